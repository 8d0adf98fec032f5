//! Code tokens and canonical rendering.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Marker text carried by indent tokens. One marker per indentation level.
pub const INDENT_TEXT: &str = "<indent>";

/// Lexical class of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    #[serde(rename = "id")]
    Identifier,
    #[serde(rename = "kw")]
    Keyword,
    #[serde(rename = "lit")]
    Literal,
    #[serde(rename = "op")]
    Operator,
    #[serde(rename = "punct")]
    Punct,
    #[serde(rename = "nl")]
    Newline,
    #[serde(rename = "ind")]
    Indent,
}

impl TokenKind {
    /// Newline and indent markers; stripped when comparing completion lines.
    pub fn is_whitespace(self) -> bool {
        matches!(self, TokenKind::Newline | TokenKind::Indent)
    }
}

/// One code token. `text` is never empty; newline tokens carry `"\n"` and
/// indent markers carry [`INDENT_TEXT`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn new(text: impl Into<String>, kind: TokenKind) -> Self {
        Token { text: text.into(), kind }
    }

    pub fn newline() -> Self {
        Token::new("\n", TokenKind::Newline)
    }

    pub fn indent() -> Self {
        Token::new(INDENT_TEXT, TokenKind::Indent)
    }
}

/// Renders a token sequence back to source text.
///
/// The output is canonical, not byte-faithful: indentation becomes four
/// spaces per marker and content tokens are separated by single spaces,
/// except that no space is emitted before `( ) , : .` or after `( .`.
/// For any token stream produced by the lexer, re-lexing the rendered
/// text yields the same token sequence.
pub fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    // True when nothing has been printed yet on the current line.
    let mut at_line_start = true;
    // True when the previous printed token suppresses the following space.
    let mut glue_next = false;
    for tok in tokens {
        match tok.kind {
            TokenKind::Newline => {
                out.push('\n');
                at_line_start = true;
                glue_next = false;
            }
            TokenKind::Indent => {
                out.push_str("    ");
            }
            _ => {
                let glue_before = matches!(tok.text.as_str(), "(" | ")" | "," | ":" | ".");
                if !at_line_start && !glue_next && !glue_before {
                    out.push(' ');
                }
                out.push_str(&tok.text);
                at_line_start = false;
                glue_next = matches!(tok.text.as_str(), "(" | ".");
            }
        }
    }
    out
}

/// Joins token texts for kinds that survive line stripping; used for
/// edit-similarity over a completed line.
pub fn render_line(tokens: &[Token]) -> String {
    let trimmed: Vec<Token> = tokens
        .iter()
        .filter(|t| !t.kind.is_whitespace())
        .cloned()
        .collect();
    render_tokens(&trimmed)
}
