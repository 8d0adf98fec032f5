//! Random mini-language program generator.
//!
//! Programs are built token-first so they parse by construction, and all
//! names come from shared pools so that different programs overlap
//! lexically. Used by the synthetic benchmark and by property tests.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::token::{render_tokens, Token, TokenKind};

pub const VAR_POOL: &[&str] = &[
    "i", "j", "k", "n", "m", "x", "y", "z", "s", "t", "total", "count", "result", "data",
    "items", "value", "acc", "idx", "buf", "out", "num", "text", "rows", "cols", "flag",
    "step", "size", "limit", "left", "right",
];

pub const FUNC_POOL: &[&str] = &[
    "helper", "process", "compute", "run", "update", "check", "load", "build", "scan", "apply",
    "merge", "clean",
];

pub const API_POOL: &[&str] = &[
    "print", "len", "range", "os.path.join", "math.sqrt", "json.loads", "sys.exit",
    "random.choice", "time.time", "np.sum", "re.match", "str", "int", "sorted", "enumerate",
    "zip", "abs",
];

#[derive(Debug, Clone)]
pub struct ProgenConfig {
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub max_depth: usize,
}

impl Default for ProgenConfig {
    fn default() -> Self {
        ProgenConfig { min_tokens: 48, max_tokens: 120, max_depth: 2 }
    }
}

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    config: &'a ProgenConfig,
    tokens: Vec<Token>,
    vars: Vec<String>,
    funcs: Vec<String>,
    defs_emitted: usize,
}

/// Generates one program as source text ending in a newline.
pub fn generate_program(rng: &mut impl Rng, config: &ProgenConfig) -> String {
    render_tokens(&generate_program_tokens(rng, config))
}

/// Token-level entry point; the rendered text re-lexes to these tokens.
pub fn generate_program_tokens(rng: &mut impl Rng, config: &ProgenConfig) -> Vec<Token> {
    let target = rng.gen_range(config.min_tokens..=config.max_tokens);
    let mut g = Gen {
        rng,
        config,
        tokens: Vec::new(),
        vars: Vec::new(),
        funcs: Vec::new(),
        defs_emitted: 0,
    };
    while g.tokens.len() < target {
        g.statement(0, false);
    }
    g.tokens
}

impl<R: Rng> Gen<'_, R> {
    fn push(&mut self, text: &str, kind: TokenKind) {
        self.tokens.push(Token::new(text, kind));
    }

    fn open_line(&mut self, depth: usize) {
        for _ in 0..depth {
            self.tokens.push(Token::indent());
        }
    }

    fn close_line(&mut self) {
        self.tokens.push(Token::newline());
    }

    fn statement(&mut self, depth: usize, in_def: bool) {
        let can_nest = depth < self.config.max_depth;
        let can_def = depth == 0 && !in_def && self.defs_emitted < 3;
        let roll = self.rng.gen_range(0..100);
        match roll {
            0..=44 => self.assign(depth),
            45..=64 => self.call_stmt(depth),
            65..=74 if can_nest => self.conditional(depth, in_def),
            75..=82 if can_nest => self.for_loop(depth, in_def),
            83..=87 if can_nest => self.while_loop(depth, in_def),
            88..=95 if can_def => self.def(depth),
            96..=97 => self.pass_stmt(depth),
            _ => self.assign(depth),
        }
    }

    fn assign(&mut self, depth: usize) {
        self.open_line(depth);
        let name = if !self.vars.is_empty() && self.rng.gen_bool(0.3) {
            self.vars[self.rng.gen_range(0..self.vars.len())].clone()
        } else {
            let name = VAR_POOL[self.rng.gen_range(0..VAR_POOL.len())].to_string();
            if !self.vars.contains(&name) {
                self.vars.push(name.clone());
            }
            name
        };
        self.push(&name, TokenKind::Identifier);
        self.push("=", TokenKind::Operator);
        self.expr(0);
        self.close_line();
    }

    fn call_stmt(&mut self, depth: usize) {
        self.open_line(depth);
        self.call_expr();
        self.close_line();
    }

    fn pass_stmt(&mut self, depth: usize) {
        self.open_line(depth);
        self.push("pass", TokenKind::Keyword);
        self.close_line();
    }

    fn conditional(&mut self, depth: usize, in_def: bool) {
        self.open_line(depth);
        self.push("if", TokenKind::Keyword);
        self.condition();
        self.push(":", TokenKind::Punct);
        self.close_line();
        self.block(depth + 1, in_def);
    }

    fn while_loop(&mut self, depth: usize, in_def: bool) {
        self.open_line(depth);
        self.push("while", TokenKind::Keyword);
        self.condition();
        self.push(":", TokenKind::Punct);
        self.close_line();
        self.block(depth + 1, in_def);
    }

    fn for_loop(&mut self, depth: usize, in_def: bool) {
        self.open_line(depth);
        self.push("for", TokenKind::Keyword);
        let var = VAR_POOL[self.rng.gen_range(0..VAR_POOL.len())].to_string();
        if !self.vars.contains(&var) {
            self.vars.push(var.clone());
        }
        self.push(&var, TokenKind::Identifier);
        self.push("in", TokenKind::Keyword);
        self.push("range", TokenKind::Identifier);
        self.push("(", TokenKind::Punct);
        self.int_literal();
        self.push(")", TokenKind::Punct);
        self.push(":", TokenKind::Punct);
        self.close_line();
        self.block(depth + 1, in_def);
    }

    fn def(&mut self, depth: usize) {
        self.defs_emitted += 1;
        self.open_line(depth);
        self.push("def", TokenKind::Keyword);
        let name = FUNC_POOL[self.rng.gen_range(0..FUNC_POOL.len())].to_string();
        if !self.funcs.contains(&name) {
            self.funcs.push(name.clone());
        }
        self.push(&name, TokenKind::Identifier);
        self.push("(", TokenKind::Punct);
        let param_count = self.rng.gen_range(0..=2);
        let mut params: Vec<String> = Vec::new();
        while params.len() < param_count {
            let p = VAR_POOL[self.rng.gen_range(0..VAR_POOL.len())].to_string();
            if !params.contains(&p) {
                params.push(p);
            }
        }
        for (i, p) in params.iter().enumerate() {
            if i > 0 {
                self.push(",", TokenKind::Punct);
            }
            self.push(p, TokenKind::Identifier);
            if !self.vars.contains(p) {
                self.vars.push(p.clone());
            }
        }
        self.push(")", TokenKind::Punct);
        self.push(":", TokenKind::Punct);
        self.close_line();

        let body = self.rng.gen_range(1..=2);
        for _ in 0..body {
            let simple = self.rng.gen_bool(0.7);
            if simple {
                self.assign(depth + 1);
            } else {
                self.call_stmt(depth + 1);
            }
        }
        if self.rng.gen_bool(0.7) {
            self.open_line(depth + 1);
            self.push("return", TokenKind::Keyword);
            self.expr(1);
            self.close_line();
        }
    }

    fn block(&mut self, depth: usize, in_def: bool) {
        let count = self.rng.gen_range(1..=3);
        for _ in 0..count {
            self.statement(depth, in_def);
        }
    }

    /// Comparison for if/while headers; comparisons never nest inside
    /// arithmetic, matching the grammar.
    fn condition(&mut self) {
        self.var_or_literal();
        let op = ["<", "<=", ">", ">=", "==", "!="][self.rng.gen_range(0..6)];
        self.push(op, TokenKind::Operator);
        self.var_or_literal();
    }

    fn expr(&mut self, depth: usize) {
        let roll = self.rng.gen_range(0..100);
        if depth >= 2 {
            self.var_or_literal();
        } else if roll < 40 {
            self.var_or_literal();
        } else if roll < 58 {
            self.call_expr();
        } else {
            self.expr(depth + 1);
            let op = ["+", "-", "*", "%"][self.rng.gen_range(0..4)];
            self.push(op, TokenKind::Operator);
            self.expr(depth + 1);
        }
    }

    fn call_expr(&mut self) {
        let use_api = self.funcs.is_empty() || self.rng.gen_bool(0.6);
        let name = if use_api {
            API_POOL[self.rng.gen_range(0..API_POOL.len())].to_string()
        } else {
            self.funcs[self.rng.gen_range(0..self.funcs.len())].clone()
        };
        let mut first = true;
        for part in name.split('.') {
            if !first {
                self.push(".", TokenKind::Punct);
            }
            self.push(part, TokenKind::Identifier);
            first = false;
        }
        self.push("(", TokenKind::Punct);
        let args = self.rng.gen_range(0..=2);
        for i in 0..args {
            if i > 0 {
                self.push(",", TokenKind::Punct);
            }
            self.var_or_literal();
        }
        self.push(")", TokenKind::Punct);
    }

    fn var_or_literal(&mut self) {
        let roll = self.rng.gen_range(0..100);
        if roll < 55 && !self.vars.is_empty() {
            let name = self.vars[self.rng.gen_range(0..self.vars.len())].clone();
            self.push(&name, TokenKind::Identifier);
        } else if roll < 85 {
            self.int_literal();
        } else {
            self.string_literal();
        }
    }

    fn int_literal(&mut self) {
        let value = self.rng.gen_range(0..100u32);
        self.push(&format!("{value}"), TokenKind::Literal);
    }

    fn string_literal(&mut self) {
        let len = self.rng.gen_range(1..=8);
        let mut s = String::from("\"");
        for _ in 0..len {
            let c = (b'a' + self.rng.gen_range(0..26u8)) as char;
            s.push(c);
        }
        s.push('"');
        self.push(&s, TokenKind::Literal);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lex::tokenize;
    use crate::syntax::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_programs_lex_and_parse() {
        let config = ProgenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let text = generate_program(&mut rng, &config);
            let tokens = tokenize(&text).expect("generated program must lex");
            parse(&tokens).expect("generated program must parse");
            assert!(tokens.len() >= config.min_tokens);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let config = ProgenConfig::default();
        let mut a = ChaCha8Rng::seed_from_u64(11);
        let mut b = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            assert_eq!(generate_program(&mut a, &config), generate_program(&mut b, &config));
        }
    }

    #[test]
    fn token_stream_matches_rendered_text() {
        let config = ProgenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let tokens = generate_program_tokens(&mut rng, &config);
            assert_eq!(tokenize(&render_tokens(&tokens)).unwrap(), tokens);
        }
    }
}
