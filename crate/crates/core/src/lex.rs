//! Lexer for the mini-language (see `docs/grammar.md`).
//!
//! Emits identifier/keyword/literal/operator/punctuation tokens plus
//! newline tokens and one indent marker per indentation level at the
//! start of each line. Comments and blank lines are dropped.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::token::{Token, TokenKind};

pub const KEYWORDS: &[&str] = &["def", "return", "if", "for", "in", "while", "pass"];

/// Two-character operators first so maximal munch works.
const OPERATORS2: &[&str] = &["==", "!=", "<=", ">="];
const OPERATORS1: &[char] = &['=', '<', '>', '+', '-', '*', '/', '%'];
const PUNCT: &[char] = &['(', ')', ',', ':', '.'];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lex error at {}:{}: {}", self.line, self.col, self.message)
    }
}

impl core::error::Error for LexError {}

pub fn is_keyword(text: &str) -> bool {
    KEYWORDS.contains(&text)
}

/// Classifies a token text the way the lexer would. Total: unknown texts
/// fall back to identifier, which keeps generated vocab entries usable.
pub fn classify_text(text: &str) -> TokenKind {
    if text == "\n" {
        return TokenKind::Newline;
    }
    if text == crate::token::INDENT_TEXT {
        return TokenKind::Indent;
    }
    if is_keyword(text) {
        return TokenKind::Keyword;
    }
    let first = match text.chars().next() {
        Some(c) => c,
        None => return TokenKind::Identifier,
    };
    if first.is_ascii_digit() || first == '"' || first == '\'' {
        return TokenKind::Literal;
    }
    if OPERATORS2.contains(&text) || (text.len() == 1 && OPERATORS1.contains(&first)) {
        return TokenKind::Operator;
    }
    if text.len() == 1 && PUNCT.contains(&first) {
        return TokenKind::Punct;
    }
    TokenKind::Identifier
}

/// Tokenizes mini-language source text.
///
/// Newline tokens appear exactly where the source has `\n` on a
/// non-blank line; a final line without a trailing newline produces no
/// newline token. Indentation must be tabs or groups of four spaces.
pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let lines: Vec<&str> = text.split('\n').collect();
    for (line_no, raw_line) in lines.iter().enumerate() {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let before = tokens.len();
        lex_line(line, line_no + 1, &mut tokens)?;
        // Blank and comment-only lines contribute nothing, including
        // their newline.
        if tokens.len() > before && line_no + 1 < lines.len() {
            tokens.push(Token::newline());
        }
    }
    Ok(tokens)
}

/// Byte offset of the first non-indentation character, or None for a
/// blank/comment-only line.
fn line_content_start(line: &str) -> Option<usize> {
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
        i += 1;
    }
    if i >= bytes.len() || bytes[i] == b'#' {
        None
    } else {
        Some(i)
    }
}

fn lex_line(line: &str, line_no: usize, out: &mut Vec<Token>) -> Result<(), LexError> {
    let content_start = match line_content_start(line) {
        Some(i) => i,
        None => return Ok(()),
    };

    // Indentation: each tab or run of four spaces is one level.
    let mut i = 0;
    let bytes = line.as_bytes();
    let mut levels = 0usize;
    while i < content_start {
        if bytes[i] == b'\t' {
            i += 1;
            levels += 1;
        } else if i + 4 <= content_start && &bytes[i..i + 4] == b"    " {
            i += 4;
            levels += 1;
        } else {
            return Err(LexError {
                line: line_no,
                col: i + 1,
                message: "bad indentation: expected tabs or four-space groups".to_string(),
            });
        }
    }
    for _ in 0..levels {
        out.push(Token::indent());
    }

    let chars: Vec<char> = line.chars().collect();
    let mut pos = chars[..].len().min(content_start); // ascii indent prefix
    while pos < chars.len() {
        let c = chars[pos];
        if c == ' ' || c == '\t' || c == '\r' {
            pos += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = pos;
            while pos < chars.len() && (chars[pos].is_ascii_alphanumeric() || chars[pos] == '_') {
                pos += 1;
            }
            let text: String = chars[start..pos].iter().collect();
            let kind = if is_keyword(&text) { TokenKind::Keyword } else { TokenKind::Identifier };
            out.push(Token::new(text, kind));
            continue;
        }
        if c.is_ascii_digit() {
            let start = pos;
            while pos < chars.len() && chars[pos].is_ascii_digit() {
                pos += 1;
            }
            out.push(Token::new(chars[start..pos].iter().collect::<String>(), TokenKind::Literal));
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = c;
            let start = pos;
            pos += 1;
            while pos < chars.len() && chars[pos] != quote {
                pos += 1;
            }
            if pos >= chars.len() {
                return Err(LexError {
                    line: line_no,
                    col: start + 1,
                    message: "unterminated string literal".to_string(),
                });
            }
            pos += 1;
            out.push(Token::new(chars[start..pos].iter().collect::<String>(), TokenKind::Literal));
            continue;
        }
        if pos + 1 < chars.len() {
            let pair: String = chars[pos..pos + 2].iter().collect();
            if OPERATORS2.contains(&pair.as_str()) {
                out.push(Token::new(pair, TokenKind::Operator));
                pos += 2;
                continue;
            }
        }
        if OPERATORS1.contains(&c) {
            out.push(Token::new(c.to_string(), TokenKind::Operator));
            pos += 1;
            continue;
        }
        if PUNCT.contains(&c) {
            out.push(Token::new(c.to_string(), TokenKind::Punct));
            pos += 1;
            continue;
        }
        return Err(LexError {
            line: line_no,
            col: pos + 1,
            message: format!("unlexable character {c:?}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::render_tokens;

    fn kinds(tokens: &[Token]) -> Vec<TokenKind> {
        tokens.iter().map(|t| t.kind).collect()
    }

    #[test]
    fn smallest_program() {
        let toks = tokenize("x = 1").unwrap();
        assert_eq!(
            toks,
            [
                Token::new("x", TokenKind::Identifier),
                Token::new("=", TokenKind::Operator),
                Token::new("1", TokenKind::Literal),
            ]
        );
    }

    #[test]
    fn def_header_kinds() {
        let toks = tokenize("def f(a):").unwrap();
        assert_eq!(
            kinds(&toks),
            [
                TokenKind::Keyword,
                TokenKind::Identifier,
                TokenKind::Punct,
                TokenKind::Identifier,
                TokenKind::Punct,
                TokenKind::Punct,
            ]
        );
    }

    #[test]
    fn indentation_and_newlines() {
        let toks = tokenize("if a:\n    b()\n").unwrap();
        assert_eq!(
            kinds(&toks),
            [
                TokenKind::Keyword,
                TokenKind::Identifier,
                TokenKind::Punct,
                TokenKind::Newline,
                TokenKind::Indent,
                TokenKind::Identifier,
                TokenKind::Punct,
                TokenKind::Punct,
                TokenKind::Newline,
            ]
        );
    }

    #[test]
    fn comments_and_blank_lines_dropped() {
        let toks = tokenize("# header\n\nx = 1  # trailing\n\n").unwrap();
        assert_eq!(
            kinds(&toks),
            [TokenKind::Identifier, TokenKind::Operator, TokenKind::Literal, TokenKind::Newline]
        );
    }

    #[test]
    fn string_literals_keep_quotes() {
        let toks = tokenize("s = 'ab'").unwrap();
        assert_eq!(toks[2], Token::new("'ab'", TokenKind::Literal));
        let toks = tokenize("s = \"cd\"").unwrap();
        assert_eq!(toks[2], Token::new("\"cd\"", TokenKind::Literal));
    }

    #[test]
    fn unlexable_character_reports_position() {
        let err = tokenize("x = $\n").unwrap_err();
        assert_eq!((err.line, err.col), (1, 5));
        assert!(err.message.contains("unlexable"));
    }

    #[test]
    fn bad_indentation_rejected() {
        let err = tokenize("if a:\n  b()\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("indentation"));
    }

    #[test]
    fn tab_indentation_accepted() {
        let toks = tokenize("if a:\n\tb()\n").unwrap();
        assert_eq!(toks[4].kind, TokenKind::Indent);
    }

    #[test]
    fn render_relexes_identically() {
        let src = "def f(a):\n    if a < 10:\n        return a + 1\n    return f(a)\nx = f(3)\n";
        let toks = tokenize(src).unwrap();
        let rendered = render_tokens(&toks);
        assert_eq!(tokenize(&rendered).unwrap(), toks);
    }
}
