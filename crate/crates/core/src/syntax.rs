//! Structural view of a program: statement tree, identifier table, and
//! API usage sequence.
//!
//! The parser is line-structured: every logical line is one statement,
//! block nesting follows indent markers, and compound statements
//! (`if`/`for`/`while`/`def`) own their header line while their bodies
//! are child statements. Statement headers therefore partition the
//! token stream, which keeps render-after-parse an exact token
//! identity.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::token::{render_tokens, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 0-based index of the logical line (statement) the error was found at.
    pub statement: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at statement {}: {}", self.statement, self.message)
    }
}

impl core::error::Error for ParseError {}

pub type StmtId = usize;

/// Statement classification used by transforms and dead-code templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum StatementKind {
    Declaration,
    Expression,
    Conditional,
    Looping,
    FunctionDef,
    Return,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Bare identifier; `tok` indexes the tree's token stream.
    Name { tok: usize },
    Literal { tok: usize },
    /// `base.attr`; `attr` is the token index of the post-dot identifier.
    Attribute { base: Box<Expr>, attr: usize },
    Call { callee: Box<Expr>, args: Vec<Expr>, callee_start: usize },
    Binary { op: usize, lhs: Box<Expr>, rhs: Box<Expr> },
    Paren { inner: Box<Expr> },
}

impl Expr {
    /// First token index of the expression.
    pub fn start(&self) -> usize {
        match self {
            Expr::Name { tok } | Expr::Literal { tok } => *tok,
            Expr::Attribute { base, .. } => base.start(),
            Expr::Call { callee_start, .. } => *callee_start,
            Expr::Binary { lhs, .. } => lhs.start(),
            Expr::Paren { inner } => inner.start() - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtBody {
    Assign { target: Expr, value: Expr },
    ExprStmt { expr: Expr },
    Return { value: Option<Expr> },
    If { cond: Expr },
    While { cond: Expr },
    For { var: usize, iter: Expr },
    Def { name: usize, params: Vec<usize> },
    Pass,
}

impl StmtBody {
    pub fn kind(&self) -> StatementKind {
        match self {
            StmtBody::Assign { .. } => StatementKind::Declaration,
            StmtBody::ExprStmt { .. } => StatementKind::Expression,
            StmtBody::Return { .. } => StatementKind::Return,
            StmtBody::If { .. } => StatementKind::Conditional,
            StmtBody::While { .. } | StmtBody::For { .. } => StatementKind::Looping,
            StmtBody::Def { .. } => StatementKind::FunctionDef,
            StmtBody::Pass => StatementKind::Other,
        }
    }

    fn is_compound(&self) -> bool {
        matches!(
            self,
            StmtBody::If { .. } | StmtBody::While { .. } | StmtBody::For { .. } | StmtBody::Def { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StmtNode {
    pub body: StmtBody,
    pub depth: usize,
    /// This statement's own line: indent markers through the trailing
    /// newline (when present). Headers partition the token stream.
    pub header: Range<usize>,
    /// Header plus all descendant lines.
    pub span: Range<usize>,
    pub children: Vec<StmtId>,
}

impl StmtNode {
    pub fn kind(&self) -> StatementKind {
        self.body.kind()
    }
}

/// Parse result over an owned token stream. Nodes are stored in
/// pre-order (line order).
#[derive(Debug, Clone, PartialEq)]
pub struct StatementTree {
    tokens: Vec<Token>,
    nodes: Vec<StmtNode>,
    roots: Vec<StmtId>,
}

impl StatementTree {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }

    pub fn nodes(&self) -> &[StmtNode] {
        &self.nodes
    }

    pub fn node(&self, id: StmtId) -> &StmtNode {
        &self.nodes[id]
    }

    pub fn roots(&self) -> &[StmtId] {
        &self.roots
    }

    pub fn statement_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn render(&self) -> String {
        render_tokens(&self.tokens)
    }

    /// Rewrites the identifier token at `idx`. Panics if the token is
    /// not an identifier; renaming never touches other kinds.
    pub fn set_identifier_text(&mut self, idx: usize, text: &str) {
        assert_eq!(self.tokens[idx].kind, TokenKind::Identifier, "rename target must be an identifier");
        self.tokens[idx].text = text.to_string();
    }

    /// Indented textual dump for debugging (`--dump-tree`).
    pub fn dump(&self) -> String {
        fn walk(tree: &StatementTree, id: StmtId, out: &mut String) {
            let node = tree.node(id);
            for _ in 0..node.depth {
                out.push_str("  ");
            }
            let header = &tree.tokens[node.header.start..node.header.end];
            out.push_str(&format!("{:?}: {}\n", node.kind(), crate::token::render_line(header)));
            for &child in &node.children {
                walk(tree, child, out);
            }
        }
        let mut out = String::new();
        for &root in &self.roots {
            walk(self, root, &mut out);
        }
        out
    }
}

struct Line {
    depth: usize,
    /// Full line span including indent markers and trailing newline.
    range: Range<usize>,
    /// Content span (between indent markers and newline).
    content: Range<usize>,
}

fn split_lines(tokens: &[Token]) -> Vec<Line> {
    let mut lines = Vec::new();
    let mut start = 0;
    while start < tokens.len() {
        let mut end = start;
        while end < tokens.len() && tokens[end].kind != TokenKind::Newline {
            end += 1;
        }
        let line_end = if end < tokens.len() { end + 1 } else { end };
        let mut depth = 0;
        while start + depth < end && tokens[start + depth].kind == TokenKind::Indent {
            depth += 1;
        }
        lines.push(Line { depth, range: start..line_end, content: start + depth..end });
        start = line_end;
    }
    lines
}

/// Parses a lexed token stream into a statement tree.
pub fn parse(tokens: &[Token]) -> Result<StatementTree, ParseError> {
    let tokens: Vec<Token> = tokens.to_vec();
    let lines = split_lines(&tokens);
    let mut nodes: Vec<StmtNode> = Vec::new();
    let mut roots: Vec<StmtId> = Vec::new();
    // Open compound statements; stack depth equals current block depth.
    let mut stack: Vec<StmtId> = Vec::new();
    let mut pending_block = false;

    for (line_idx, line) in lines.iter().enumerate() {
        if line.content.is_empty() {
            return Err(ParseError { statement: line_idx, message: "empty statement line".to_string() });
        }
        if pending_block {
            if line.depth != stack.len() {
                return Err(ParseError {
                    statement: line_idx,
                    message: "expected indented block".to_string(),
                });
            }
            pending_block = false;
        } else {
            if line.depth > stack.len() {
                return Err(ParseError {
                    statement: line_idx,
                    message: "unexpected indent".to_string(),
                });
            }
            stack.truncate(line.depth);
        }

        let body = parse_statement(&tokens, line.content.clone(), line_idx)?;
        let compound = body.is_compound();
        let id = nodes.len();
        nodes.push(StmtNode {
            body,
            depth: line.depth,
            header: line.range.clone(),
            span: line.range.clone(),
            children: Vec::new(),
        });
        match stack.last() {
            Some(&parent) => nodes[parent].children.push(id),
            None => roots.push(id),
        }
        if compound {
            stack.push(id);
            pending_block = true;
        }
    }
    if pending_block {
        return Err(ParseError {
            statement: lines.len().saturating_sub(1),
            message: "expected indented block".to_string(),
        });
    }

    // Spans: header plus all descendant lines. Nodes are in line order,
    // so walking backwards sees children before parents.
    for id in (0..nodes.len()).rev() {
        if let Some(&last) = nodes[id].children.last() {
            nodes[id].span.end = nodes[last].span.end;
        }
    }

    Ok(StatementTree { tokens, nodes, roots })
}

struct LineParser<'a> {
    tokens: &'a [Token],
    pos: usize,
    end: usize,
    statement: usize,
}

impl<'a> LineParser<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { statement: self.statement, message: message.into() }
    }

    fn peek(&self) -> Option<&'a Token> {
        if self.pos < self.end {
            Some(&self.tokens[self.pos])
        } else {
            None
        }
    }

    fn at(&self, kind: TokenKind, text: &str) -> bool {
        self.peek().map(|t| t.kind == kind && t.text == text).unwrap_or(false)
    }

    fn bump(&mut self) -> usize {
        let idx = self.pos;
        self.pos += 1;
        idx
    }

    fn expect(&mut self, kind: TokenKind, text: &str) -> Result<usize, ParseError> {
        if self.at(kind, text) {
            Ok(self.bump())
        } else {
            Err(self.error(format!(
                "expected {:?} but found {:?}",
                text,
                self.peek().map(|t| t.text.as_str()).unwrap_or("end of line")
            )))
        }
    }

    fn expect_identifier(&mut self) -> Result<usize, ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => Ok(self.bump()),
            other => Err(self.error(format!(
                "expected identifier but found {:?}",
                other.map(|t| t.text.as_str()).unwrap_or("end of line")
            ))),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos != self.end {
            Err(self.error(format!("trailing tokens starting at {:?}", self.tokens[self.pos].text)))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.arith()?;
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && matches!(t.text.as_str(), "==" | "!=" | "<" | "<=" | ">" | ">=") {
                let op = self.bump();
                let rhs = self.arith()?;
                return Ok(Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) });
            }
        }
        Ok(lhs)
    }

    fn arith(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && matches!(t.text.as_str(), "+" | "-") {
                let op = self.bump();
                let rhs = self.term()?;
                lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.postfix()?;
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && matches!(t.text.as_str(), "*" | "/" | "%") {
                let op = self.bump();
                let rhs = self.postfix()?;
                lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut expr = self.atom()?;
        loop {
            if self.at(TokenKind::Punct, ".") {
                self.bump();
                let attr = self.expect_identifier()?;
                expr = Expr::Attribute { base: Box::new(expr), attr };
            } else if self.at(TokenKind::Punct, "(") {
                let callee_start = expr.start();
                self.bump();
                let mut args = Vec::new();
                if !self.at(TokenKind::Punct, ")") {
                    loop {
                        args.push(self.expr()?);
                        if self.at(TokenKind::Punct, ",") {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(TokenKind::Punct, ")")?;
                expr = Expr::Call { callee: Box::new(expr), args, callee_start };
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => Ok(Expr::Name { tok: self.bump() }),
            Some(t) if t.kind == TokenKind::Literal => Ok(Expr::Literal { tok: self.bump() }),
            Some(t) if t.kind == TokenKind::Punct && t.text == "(" => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::Punct, ")")?;
                Ok(Expr::Paren { inner: Box::new(inner) })
            }
            other => Err(self.error(format!(
                "expected expression but found {:?}",
                other.map(|t| t.text.as_str()).unwrap_or("end of line")
            ))),
        }
    }
}

fn parse_statement(tokens: &[Token], content: Range<usize>, statement: usize) -> Result<StmtBody, ParseError> {
    let mut p = LineParser { tokens, pos: content.start, end: content.end, statement };
    let first = p.peek().ok_or_else(|| p.error("empty statement"))?;

    if first.kind == TokenKind::Keyword {
        let body = match first.text.as_str() {
            "pass" => {
                p.bump();
                StmtBody::Pass
            }
            "return" => {
                p.bump();
                let value = if p.peek().is_some() { Some(p.expr()?) } else { None };
                StmtBody::Return { value }
            }
            "if" => {
                p.bump();
                let cond = p.expr()?;
                p.expect(TokenKind::Punct, ":")?;
                StmtBody::If { cond }
            }
            "while" => {
                p.bump();
                let cond = p.expr()?;
                p.expect(TokenKind::Punct, ":")?;
                StmtBody::While { cond }
            }
            "for" => {
                p.bump();
                let var = p.expect_identifier()?;
                p.expect(TokenKind::Keyword, "in")?;
                let iter = p.expr()?;
                p.expect(TokenKind::Punct, ":")?;
                StmtBody::For { var, iter }
            }
            "def" => {
                p.bump();
                let name = p.expect_identifier()?;
                p.expect(TokenKind::Punct, "(")?;
                let mut params = Vec::new();
                if !p.at(TokenKind::Punct, ")") {
                    loop {
                        params.push(p.expect_identifier()?);
                        if p.at(TokenKind::Punct, ",") {
                            p.bump();
                        } else {
                            break;
                        }
                    }
                }
                p.expect(TokenKind::Punct, ")")?;
                p.expect(TokenKind::Punct, ":")?;
                StmtBody::Def { name, params }
            }
            other => return Err(p.error(format!("unexpected keyword {other:?}"))),
        };
        p.finish()?;
        return Ok(body);
    }

    let expr = p.expr()?;
    if p.at(TokenKind::Operator, "=") {
        match expr {
            Expr::Name { .. } | Expr::Attribute { .. } => {}
            _ => return Err(p.error("invalid assignment target")),
        }
        p.bump();
        let value = p.expr()?;
        p.finish()?;
        return Ok(StmtBody::Assign { target: expr, value });
    }
    p.finish()?;
    Ok(StmtBody::ExprStmt { expr })
}

// ---------------------------------------------------------------------------
// Identifier table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum IdentifierRole {
    Variable,
    Function,
    Parameter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdEntry {
    pub role: IdentifierRole,
    /// Token indices of every occurrence, ascending.
    pub positions: Vec<usize>,
}

/// Renameable names of a program: variables, functions, and parameters.
///
/// Undefined names that only ever appear as a callee or as the base of
/// an attribute chain are treated as API calls and excluded, matching
/// the rule that API names cannot be renamed. Post-dot attribute names
/// are never entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdentifierTable {
    pub entries: BTreeMap<String, IdEntry>,
}

impl IdentifierTable {
    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OccCtx {
    DefName,
    Param,
    Target,
    /// Plain expression read.
    Read,
    /// Callee of a call or base of an attribute chain; API position.
    ApiHead,
}

fn collect_expr_occurrences(expr: &Expr, tokens: &[Token], out: &mut Vec<(usize, OccCtx)>) {
    match expr {
        Expr::Name { tok } => out.push((*tok, OccCtx::Read)),
        Expr::Literal { .. } => {}
        Expr::Attribute { base, .. } => {
            match base.as_ref() {
                Expr::Name { tok } => out.push((*tok, OccCtx::ApiHead)),
                other => collect_expr_occurrences(other, tokens, out),
            }
            // The post-dot attribute token is never an identifier entry.
        }
        Expr::Call { callee, args, .. } => {
            match callee.as_ref() {
                Expr::Name { tok } => out.push((*tok, OccCtx::ApiHead)),
                other => collect_expr_occurrences(other, tokens, out),
            }
            for arg in args {
                collect_expr_occurrences(arg, tokens, out);
            }
        }
        Expr::Binary { lhs, rhs, .. } => {
            collect_expr_occurrences(lhs, tokens, out);
            collect_expr_occurrences(rhs, tokens, out);
        }
        Expr::Paren { inner } => collect_expr_occurrences(inner, tokens, out),
    }
}

fn collect_occurrences(tree: &StatementTree) -> Vec<(usize, OccCtx)> {
    let mut occ: Vec<(usize, OccCtx)> = Vec::new();
    let tokens = tree.tokens();
    for node in tree.nodes() {
        match &node.body {
            StmtBody::Assign { target, value } => {
                match target {
                    Expr::Name { tok } => occ.push((*tok, OccCtx::Target)),
                    other => collect_expr_occurrences(other, tokens, &mut occ),
                }
                collect_expr_occurrences(value, tokens, &mut occ);
            }
            StmtBody::ExprStmt { expr } => collect_expr_occurrences(expr, tokens, &mut occ),
            StmtBody::Return { value } => {
                if let Some(v) = value {
                    collect_expr_occurrences(v, tokens, &mut occ);
                }
            }
            StmtBody::If { cond } | StmtBody::While { cond } => {
                collect_expr_occurrences(cond, tokens, &mut occ)
            }
            StmtBody::For { var, iter } => {
                occ.push((*var, OccCtx::Target));
                collect_expr_occurrences(iter, tokens, &mut occ);
            }
            StmtBody::Def { name, params } => {
                occ.push((*name, OccCtx::DefName));
                for &param in params {
                    occ.push((param, OccCtx::Param));
                }
            }
            StmtBody::Pass => {}
        }
    }
    occ.sort_by_key(|&(tok, _)| tok);
    occ
}

/// Builds the renameable-identifier table for a parsed program.
pub fn identifiers(tree: &StatementTree) -> IdentifierTable {
    let occ = collect_occurrences(tree);
    let tokens = tree.tokens();

    // First pass: definition sites fix each name's role; the earliest
    // definition wins.
    let mut roles: BTreeMap<&str, IdentifierRole> = BTreeMap::new();
    for &(tok, ctx) in &occ {
        let name = tokens[tok].text.as_str();
        let role = match ctx {
            OccCtx::DefName => IdentifierRole::Function,
            OccCtx::Param => IdentifierRole::Parameter,
            OccCtx::Target => IdentifierRole::Variable,
            OccCtx::Read | OccCtx::ApiHead => continue,
        };
        roles.entry(name).or_insert(role);
    }

    // Second pass: record occurrences. Undefined names in API position
    // stay out of the table; undefined plain reads become variables.
    let mut table = IdentifierTable::default();
    for &(tok, ctx) in &occ {
        let name = tokens[tok].text.as_str();
        let role = match roles.get(name) {
            Some(&role) => role,
            None => match ctx {
                OccCtx::Read => IdentifierRole::Variable,
                _ => continue,
            },
        };
        table
            .entries
            .entry(name.to_string())
            .or_insert_with(|| IdEntry { role, positions: Vec::new() })
            .positions
            .push(tok);
    }
    table
}

// ---------------------------------------------------------------------------
// API usage sequence
// ---------------------------------------------------------------------------

/// Ordered called names with attribute chains flattened to dotted
/// strings. Duplicates are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ApiSequence {
    pub calls: Vec<String>,
}

fn flatten_chain(expr: &Expr, tokens: &[Token]) -> Option<String> {
    match expr {
        Expr::Name { tok } => Some(tokens[*tok].text.clone()),
        Expr::Attribute { base, attr } => {
            let mut name = flatten_chain(base, tokens)?;
            name.push('.');
            name.push_str(&tokens[*attr].text);
            Some(name)
        }
        _ => None,
    }
}

fn collect_calls(expr: &Expr, tokens: &[Token], out: &mut Vec<(usize, String)>) {
    match expr {
        Expr::Name { .. } | Expr::Literal { .. } => {}
        Expr::Attribute { base, .. } => collect_calls(base, tokens, out),
        Expr::Call { callee, args, callee_start } => {
            if let Some(name) = flatten_chain(callee, tokens) {
                out.push((*callee_start, name));
            } else {
                collect_calls(callee, tokens, out);
            }
            for arg in args {
                collect_calls(arg, tokens, out);
            }
        }
        Expr::Binary { lhs, rhs, .. } => {
            collect_calls(lhs, tokens, out);
            collect_calls(rhs, tokens, out);
        }
        Expr::Paren { inner } => collect_calls(inner, tokens, out),
    }
}

/// Extracts the API sequence from a parsed program. Call sites are
/// ordered by the source position of their callee; calls whose callee
/// is not a pure dotted-name chain are skipped.
pub fn api_sequence(tree: &StatementTree) -> ApiSequence {
    let mut calls: Vec<(usize, String)> = Vec::new();
    let tokens = tree.tokens();
    for node in tree.nodes() {
        match &node.body {
            StmtBody::Assign { target, value } => {
                collect_calls(target, tokens, &mut calls);
                collect_calls(value, tokens, &mut calls);
            }
            StmtBody::ExprStmt { expr } => collect_calls(expr, tokens, &mut calls),
            StmtBody::Return { value } => {
                if let Some(v) = value {
                    collect_calls(v, tokens, &mut calls);
                }
            }
            StmtBody::If { cond } | StmtBody::While { cond } => collect_calls(cond, tokens, &mut calls),
            StmtBody::For { iter, .. } => collect_calls(iter, tokens, &mut calls),
            StmtBody::Def { .. } | StmtBody::Pass => {}
        }
    }
    calls.sort_by(|a, b| a.0.cmp(&b.0));
    ApiSequence { calls: calls.into_iter().map(|(_, name)| name).collect() }
}

/// Lexical API extraction for token slices that need not parse
/// (fragments, truncated queries). Agrees with [`api_sequence`] on
/// fully parsed programs.
pub fn api_scan(tokens: &[Token]) -> ApiSequence {
    let mut calls = Vec::new();
    for i in 0..tokens.len() {
        if tokens[i].kind != TokenKind::Identifier {
            continue;
        }
        if i > 0 {
            let prev = &tokens[i - 1];
            let after_dot = prev.kind == TokenKind::Punct && prev.text == ".";
            let after_def = prev.kind == TokenKind::Keyword && prev.text == "def";
            if after_dot || after_def {
                continue;
            }
        }
        let mut end = i;
        while end + 2 < tokens.len()
            && tokens[end + 1].kind == TokenKind::Punct
            && tokens[end + 1].text == "."
            && tokens[end + 2].kind == TokenKind::Identifier
        {
            end += 2;
        }
        let called = end + 1 < tokens.len()
            && tokens[end + 1].kind == TokenKind::Punct
            && tokens[end + 1].text == "(";
        if called {
            let mut name = String::new();
            for (j, tok) in tokens[i..=end].iter().enumerate() {
                if j % 2 == 0 {
                    if !name.is_empty() {
                        name.push('.');
                    }
                    name.push_str(&tok.text);
                }
            }
            calls.push(name);
        }
    }
    ApiSequence { calls }
}
