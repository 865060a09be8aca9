use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lexer::{lex, LexError, RawKind, RawToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    Punct,
    Identifier,
    /// Capitalized name, recorded without any package qualifier.
    TypeName,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

/// One compilation unit reduced to the tokens that matter for type-2 equality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedUnit {
    pub origin_path: String,
    pub package_decl: String,
    /// Import targets as written, e.g. `java.util.List` or `static a.B.c`.
    pub imports: Vec<String>,
    /// Top-level types declared in the unit.
    pub declared_types: Vec<String>,
    pub tokens: Vec<Token>,
}

impl NormalizedUnit {
    /// The type this unit is matched by: the file stem when the unit declares
    /// it, otherwise the first declared type.
    pub fn primary_name(&self) -> &str {
        let stem = Path::new(&self.origin_path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        if self.declared_types.iter().any(|t| t == stem) || self.declared_types.is_empty() {
            stem
        } else {
            &self.declared_types[0]
        }
    }

    /// Space-separated rendering of the token stream.
    pub fn render(&self) -> String {
        self.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

fn token_of(raw: &RawToken<'_>) -> Token {
    let kind = match raw.kind {
        RawKind::Keyword => TokenKind::Keyword,
        RawKind::Punct => TokenKind::Punct,
        RawKind::Literal => TokenKind::Literal,
        RawKind::Identifier if starts_upper(raw.text) => TokenKind::TypeName,
        RawKind::Identifier => TokenKind::Identifier,
    };
    Token {
        kind,
        text: raw.text.to_string(),
    }
}

/// Length in tokens of the package qualifier opening a dotted name at `at`.
///
/// A qualifier is a run of lowercase-initial identifiers, each followed by a
/// dot, that ends at a capitalized identifier: `java.util.List` has a
/// three-token qualifier `java . util .`. Returns 0 if there is none.
pub(crate) fn qualifier_len(tokens: &[RawToken<'_>], at: usize) -> usize {
    if at > 0 && tokens[at - 1].is_punct(".") {
        return 0;
    }
    let mut i = at;
    while let (Some(ident), Some(dot)) = (tokens.get(i), tokens.get(i + 1)) {
        if ident.kind != RawKind::Identifier || starts_upper(ident.text) || !dot.is_punct(".") {
            return 0;
        }
        i += 2;
        match tokens.get(i) {
            Some(next) if next.kind == RawKind::Identifier && starts_upper(next.text) => return i - at,
            Some(next) if next.kind == RawKind::Identifier => continue,
            _ => return 0,
        }
    }
    0
}

/// Joins the tokens of a declaration up to (not including) the next `;`.
fn declaration(tokens: &[RawToken<'_>], from: usize) -> (String, usize) {
    let mut text = String::new();
    let mut i = from;
    while let Some(tok) = tokens.get(i) {
        i += 1;
        if tok.is_punct(";") {
            break;
        }
        if tok.kind == RawKind::Keyword && !text.is_empty() {
            text.push(' ');
        }
        text.push_str(tok.text);
        if tok.kind == RawKind::Keyword {
            text.push(' ');
        }
    }
    (text.trim().to_string(), i)
}

pub fn normalize(source_text: &str, origin_path: &str) -> Result<NormalizedUnit, LexError> {
    let raw = lex(source_text)?;
    let mut unit = NormalizedUnit {
        origin_path: origin_path.to_string(),
        package_decl: String::new(),
        imports: Vec::new(),
        declared_types: Vec::new(),
        tokens: Vec::with_capacity(raw.len()),
    };
    let mut depth = 0usize;
    let mut i = 0;
    while i < raw.len() {
        let tok = &raw[i];
        if depth == 0 && tok.is_keyword("package") {
            let (name, next) = declaration(&raw, i + 1);
            unit.package_decl = name;
            // package annotations belong to the declaration too
            while is_annotation_tail(&unit.tokens) {
                strip_trailing_annotation(&mut unit.tokens);
            }
            i = next;
            continue;
        }
        if depth == 0 && tok.is_keyword("import") {
            let (target, next) = declaration(&raw, i + 1);
            unit.imports.push(target);
            i = next;
            continue;
        }
        match tok.text {
            "{" if tok.kind == RawKind::Punct => depth += 1,
            "}" if tok.kind == RawKind::Punct => depth = depth.saturating_sub(1),
            _ => {}
        }
        if depth == 0 && declares_type(&raw, i) {
            if let Some(name) = raw.get(i + 1).filter(|t| t.kind == RawKind::Identifier) {
                unit.declared_types.push(name.text.to_string());
            }
        }
        if tok.kind == RawKind::Identifier {
            i += qualifier_len(&raw, i);
        }
        unit.tokens.push(token_of(&raw[i]));
        i += 1;
    }
    Ok(unit)
}

fn declares_type(raw: &[RawToken<'_>], i: usize) -> bool {
    let tok = &raw[i];
    let after_dot = i > 0 && raw[i - 1].is_punct(".");
    if after_dot {
        return false;
    }
    match tok.kind {
        RawKind::Keyword => matches!(tok.text, "class" | "interface" | "enum"),
        // contextual keyword: `record Name(` or `record Name<`
        RawKind::Identifier => {
            tok.text == "record"
                && raw.get(i + 1).is_some_and(|n| n.kind == RawKind::Identifier)
                && raw.get(i + 2).is_some_and(|n| n.is_punct("(") || n.is_punct("<"))
        }
        _ => false,
    }
}

/// True when the emitted stream ends with an annotation (`@Name` or `@Name(...)`).
fn is_annotation_tail(tokens: &[Token]) -> bool {
    annotation_start(tokens).is_some()
}

fn annotation_start(tokens: &[Token]) -> Option<usize> {
    let mut end = tokens.len();
    if tokens.last()?.text == ")" {
        let mut depth = 0usize;
        let mut j = end;
        loop {
            j = j.checked_sub(1)?;
            match tokens[j].text.as_str() {
                ")" => depth += 1,
                "(" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                _ => {}
            }
        }
        end = j;
    }
    let mut j = end.checked_sub(1)?;
    if !matches!(tokens[j].kind, TokenKind::TypeName | TokenKind::Identifier) {
        return None;
    }
    while j >= 2 && tokens[j - 1].text == "." {
        j -= 2;
    }
    (j >= 1 && tokens[j - 1].text == "@").then(|| j - 1)
}

fn strip_trailing_annotation(tokens: &mut Vec<Token>) {
    if let Some(start) = annotation_start(tokens) {
        tokens.truncate(start);
    }
}
