//! Java tokenizer.
//!
//! Produces keywords, identifiers, literals and punctuators with their byte
//! spans. Whitespace and comments are consumed but not emitted.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RawKind {
    Keyword,
    Identifier,
    Literal,
    Punct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawToken<'a> {
    pub kind: RawKind,
    pub text: &'a str,
    pub start: usize,
}

impl RawToken<'_> {
    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == RawKind::Punct && self.text == p
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.kind == RawKind::Keyword && self.text == k
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct LexError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const", "continue", "default",
    "do", "double", "else", "enum", "extends", "final", "finally", "float", "for", "goto", "if", "implements",
    "import", "instanceof", "int", "interface", "long", "native", "new", "package", "private", "protected", "public",
    "return", "short", "static", "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
    "transient", "try", "void", "volatile", "while",
];

const LITERAL_WORDS: &[&str] = &["true", "false", "null"];

// longest first
const PUNCTUATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=",
    "/=", "&=", "|=", "^=", "%=", "<<", ">>", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@", "=", ">", "<", "!",
    "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn error(&self, at: usize, message: impl Into<String>) -> LexError {
        let before = &self.src[..at];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(at, |nl| at - nl - 1) + 1;
        LexError {
            line,
            column,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), LexError> {
        loop {
            let rest = self.rest();
            if rest.starts_with("//") {
                self.pos += rest.find('\n').unwrap_or(rest.len());
            } else if rest.starts_with("/*") {
                let close = rest[2..].find("*/").ok_or_else(|| self.error(self.pos, "unterminated comment"))?;
                self.pos += close + 4;
            } else if let Some(c) = self.peek().filter(|c| c.is_whitespace() || *c == '\u{1a}') {
                self.pos += c.len_utf8();
            } else {
                return Ok(());
            }
        }
    }

    fn quoted(&mut self, quote: char) -> Result<(), LexError> {
        let start = self.pos;
        self.bump();
        loop {
            match self.bump() {
                Some('\\') => {
                    self.bump();
                }
                Some('\n') | None => return Err(self.error(start, "unterminated literal")),
                Some(c) if c == quote => return Ok(()),
                Some(_) => {}
            }
        }
    }

    fn text_block(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 3;
        loop {
            let rest = self.rest();
            if rest.starts_with("\"\"\"") {
                self.pos += 3;
                return Ok(());
            }
            match self.bump() {
                Some('\\') => {
                    self.bump();
                }
                None => return Err(self.error(start, "unterminated text block")),
                Some(_) => {}
            }
        }
    }

    fn number(&mut self) {
        let hex = self.rest().starts_with("0x") || self.rest().starts_with("0X");
        let mut prev = '\0';
        while let Some(c) = self.peek() {
            let exponent_sign = (c == '+' || c == '-')
                && if hex {
                    matches!(prev, 'p' | 'P')
                } else {
                    matches!(prev, 'e' | 'E')
                };
            if c.is_ascii_alphanumeric() || c == '_' || exponent_sign {
                self.bump();
            } else if c == '.' && self.peek_at(1).map_or(true, |n| n.is_ascii_digit() || !is_ident_start(n)) {
                self.bump();
            } else {
                break;
            }
            prev = c;
        }
    }

    fn next_token(&mut self) -> Result<Option<RawToken<'a>>, LexError> {
        self.skip_trivia()?;
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let kind = if is_ident_start(c) {
            while self.peek().is_some_and(is_ident_part) {
                self.bump();
            }
            let word = &self.src[start..self.pos];
            if is_keyword(word) {
                RawKind::Keyword
            } else if LITERAL_WORDS.contains(&word) {
                RawKind::Literal
            } else {
                RawKind::Identifier
            }
        } else if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|n| n.is_ascii_digit())) {
            self.number();
            RawKind::Literal
        } else if self.rest().starts_with("\"\"\"") {
            self.text_block()?;
            RawKind::Literal
        } else if c == '"' || c == '\'' {
            self.quoted(c)?;
            RawKind::Literal
        } else if let Some(p) = PUNCTUATORS.iter().find(|p| self.rest().starts_with(**p)) {
            self.pos += p.len();
            RawKind::Punct
        } else {
            return Err(self.error(start, format!("unexpected character {c:?}")));
        };
        Ok(Some(RawToken {
            kind,
            text: &self.src[start..self.pos],
            start,
        }))
    }
}

pub fn lex(src: &str) -> Result<Vec<RawToken<'_>>, LexError> {
    let mut lexer = Lexer { src, pos: 0 };
    let mut out = Vec::new();
    while let Some(tok) = lexer.next_token()? {
        out.push(tok);
    }
    Ok(out)
}
