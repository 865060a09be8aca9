//! Independent reference implementations used to check the production code.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid oracle regex"))
}

/// Comment-stripped, dequalified, header-free token text of a Java source.
///
/// Built from regexes only, so it shares nothing with the lexer. It assumes
/// string literals contain no comment openers, which the corpus guarantees.
pub fn naive_type2_tokens(source: &str) -> Vec<String> {
    static BLOCK: OnceLock<Regex> = OnceLock::new();
    static LINE: OnceLock<Regex> = OnceLock::new();
    static HEADER: OnceLock<Regex> = OnceLock::new();
    static QUALIFIER: OnceLock<Regex> = OnceLock::new();
    static TOKEN: OnceLock<Regex> = OnceLock::new();
    let text = re(&BLOCK, r"(?s)/\*.*?\*/").replace_all(source, " ");
    let text = re(&LINE, r"//[^\n]*").replace_all(&text, " ");
    let text = re(&HEADER, r"(?m)^\s*(?:package|import)\s[^;]*;").replace_all(&text, " ");
    let text = re(&QUALIFIER, r"\b(?:[a-z_][A-Za-z0-9_]*\s*\.\s*)+([A-Z][A-Za-z0-9_]*)").replace_all(&text, "$1");
    re(
        &TOKEN,
        r#""(?:\\.|[^"\\])*"|'(?:\\.|[^'\\])*'|[A-Za-z_$][A-Za-z0-9_$]*|[0-9][A-Za-z0-9_.]*|\S"#,
    )
    .find_iter(&text)
    .map(|m| m.as_str().to_string())
    .collect()
}

pub fn naive_is_clone(a: &str, b: &str) -> bool {
    naive_type2_tokens(a) == naive_type2_tokens(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Segment {
    /// Leading lowercase word, allowed at the start or after a digit or `_`.
    Lower,
    /// Capital followed by lowercase letters.
    Word,
    /// One to four capitals.
    Acronym,
    Digits,
    Underscore,
}

const WORDS: [&str; 12] = [
    "Driver", "Manager", "Factory", "Http", "Request", "Handler", "Node", "Reader", "Builder", "Alias", "Yaml", "Utils",
];
const ACRONYMS: [&str; 7] = ["JSON", "XML", "URL", "IO", "A", "SQL", "X"];
const LOWERS: [&str; 5] = ["get", "to", "is", "raw", "x"];

/// A generated class name with its token count known by construction.
#[derive(Debug, Clone)]
pub struct GeneratedName {
    pub name: String,
    pub tokens: usize,
}

/// Names assembled from typed segments. Adjacent segments that the rule
/// would merge (acronym then acronym, digits then digits, lowercase after a
/// letter) are never generated, so the count equals the segment count.
pub fn generated_names(rng: &mut ChaCha8Rng, n: usize) -> Vec<GeneratedName> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.gen_range(1..=6);
        let mut segments: Vec<Segment> = Vec::new();
        for _ in 0..len {
            let prev = segments.last().copied();
            let allowed: Vec<Segment> = [
                Segment::Lower,
                Segment::Word,
                Segment::Acronym,
                Segment::Digits,
                Segment::Underscore,
            ]
            .into_iter()
            .filter(|s| match (prev, s) {
                (None, Segment::Underscore) => false,
                (Some(Segment::Underscore), Segment::Underscore) => false,
                (Some(Segment::Acronym), Segment::Acronym) => false,
                (Some(Segment::Digits), Segment::Digits) => false,
                (Some(Segment::Word | Segment::Acronym | Segment::Lower), Segment::Lower) => false,
                _ => true,
            })
            .collect();
            segments.push(allowed[rng.gen_range(0..allowed.len())]);
        }
        let mut name = String::new();
        let mut tokens = 0;
        for segment in &segments {
            match segment {
                Segment::Lower => name.push_str(LOWERS[rng.gen_range(0..LOWERS.len())]),
                Segment::Word => name.push_str(WORDS[rng.gen_range(0..WORDS.len())]),
                Segment::Acronym => name.push_str(ACRONYMS[rng.gen_range(0..ACRONYMS.len())]),
                Segment::Digits => name.push_str(&rng.gen_range(0..1000).to_string()),
                Segment::Underscore => name.push('_'),
            }
            tokens += usize::from(*segment != Segment::Underscore);
        }
        out.push(GeneratedName { name, tokens });
    }
    out
}

/// Counts tokens by testing every gap between adjacent characters against
/// the boundary rule, with no run compression.
pub fn boundary_count(name: &str) -> usize {
    let chars: Vec<char> = name.chars().collect();
    let alnum = |i: usize| chars.get(i).is_some_and(|c| c.is_ascii_alphanumeric());
    let upper = |i: usize| chars.get(i).is_some_and(|c| c.is_ascii_uppercase());
    let lower = |i: usize| chars.get(i).is_some_and(|c| c.is_ascii_lowercase());
    let digit = |i: usize| chars.get(i).is_some_and(|c| c.is_ascii_digit());
    let mut count = 0;
    for i in 0..chars.len() {
        if !alnum(i) {
            continue;
        }
        let starts = i == 0
            || !alnum(i - 1)
            || (lower(i - 1) && upper(i))
            || (upper(i - 1) && upper(i) && lower(i + 1))
            || (digit(i) != digit(i - 1));
        count += usize::from(starts);
    }
    count
}
