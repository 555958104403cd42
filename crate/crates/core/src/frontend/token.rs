//! Lexing of C-like source into tokens, line normalization and variable
//! extraction.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

static KEYWORDS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| {
    include_str!("../../data/c_keywords.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

// Longest first within each length class; matched by maximal munch.
const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "^=", "|=", "::", "+", "-", "*", "/", "%", "=", "<", ">", "!", "~", "&", "|", "^", "?", ":", ".",
];

pub const STRING_LITERAL: &str = "STR";
pub const CHAR_LITERAL: &str = "CHR";

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(word)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Punct,
}

impl TokenKind {
    pub fn tag(self) -> &'static str {
        match self {
            TokenKind::Identifier => "ID",
            TokenKind::Keyword => "KW",
            TokenKind::Literal => "LIT",
            TokenKind::Operator => "OP",
            TokenKind::Punct => "P",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Self { kind, text: text.into() }
    }

    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }
}

/// A token tagged with the 1-based line it starts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spanned {
    pub token: Token,
    pub line: u32,
}

/// Lexes a whole text, tracking line numbers. Never fails.
pub fn lex(text: &str) -> Vec<Spanned> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let n = chars.len();
    while i < n {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '/' {
            while i < n && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '*' {
            i += 2;
            while i < n && !(chars[i] == '*' && i + 1 < n && chars[i + 1] == '/') {
                if chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            i = (i + 2).min(n);
            continue;
        }
        let start_line = line;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < n && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            // Encoding prefixes such as L"..." belong to the literal.
            if matches!(word.as_str(), "L" | "u" | "U" | "u8") && i < n && (chars[i] == '"' || chars[i] == '\'') {
                let quote = chars[i];
                i = skip_quoted(&chars, i, &mut line);
                out.push(literal_for(quote, start_line));
                continue;
            }
            let kind = if is_keyword(&word) { TokenKind::Keyword } else { TokenKind::Identifier };
            out.push(Spanned { token: Token::new(kind, word), line: start_line });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && i + 1 < n && chars[i + 1].is_ascii_digit()) {
            let start = i;
            i += 1;
            while i < n {
                let d = chars[i];
                let exponent_sign = (d == '+' || d == '-') && matches!(chars[i - 1], 'e' | 'E' | 'p' | 'P');
                if d.is_ascii_alphanumeric() || d == '_' || d == '.' || exponent_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Spanned { token: Token::new(TokenKind::Literal, text), line: start_line });
            continue;
        }
        if c == '"' || c == '\'' {
            i = skip_quoted(&chars, i, &mut line);
            out.push(literal_for(c, start_line));
            continue;
        }
        if let Some(op) = OPERATORS.iter().find(|op| matches_at(&chars, i, op)) {
            out.push(Spanned { token: Token::new(TokenKind::Operator, *op), line: start_line });
            i += op.chars().count();
            continue;
        }
        out.push(Spanned { token: Token::new(TokenKind::Punct, c.to_string()), line: start_line });
        i += 1;
    }
    out
}

fn literal_for(quote: char, line: u32) -> Spanned {
    let text = if quote == '"' { STRING_LITERAL } else { CHAR_LITERAL };
    Spanned { token: Token::new(TokenKind::Literal, text), line }
}

/// Skips a quoted literal starting at `i`; unterminated literals end at the
/// end of the line.
fn skip_quoted(chars: &[char], mut i: usize, line: &mut u32) -> usize {
    let quote = chars[i];
    i += 1;
    while i < chars.len() {
        match chars[i] {
            '\\' if i + 1 < chars.len() => {
                if chars[i + 1] == '\n' {
                    *line += 1;
                }
                i += 2;
            }
            '\n' => return i,
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    i
}

fn matches_at(chars: &[char], i: usize, op: &str) -> bool {
    let op: Vec<char> = op.chars().collect();
    chars.get(i..i + op.len()) == Some(&op[..])
}

/// Tokenizes a single line; comments are stripped and literal contents
/// discarded.
pub fn tokenize_line(text: &str) -> Vec<Token> {
    lex(text).into_iter().map(|s| s.token).collect()
}

/// Canonical spacing: one space between tokens, comments removed.
///
/// With `alpha_rename`, identifiers become `VAR1..VARn` in order of first
/// appearance.
pub fn normalize_line(text: &str, alpha_rename: bool) -> String {
    let tokens = tokenize_line(text);
    if !alpha_rename {
        return join_tokens(&tokens);
    }
    let mut names: HashMap<String, usize> = HashMap::new();
    let renamed: Vec<String> = tokens
        .iter()
        .map(|t| {
            // Collapsed literals re-lex as identifiers and must stay put.
            if t.kind == TokenKind::Identifier && t.text != STRING_LITERAL && t.text != CHAR_LITERAL {
                let next = names.len() + 1;
                let id = *names.entry(t.text.clone()).or_insert(next);
                format!("VAR{id}")
            } else {
                t.text.clone()
            }
        })
        .collect();
    renamed.join(" ")
}

pub fn join_tokens(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
}

/// Identifiers used as variables on a line: every identifier except called
/// function names and member names after `.` or `->`.
pub fn extract_variables(text: &str) -> BTreeSet<String> {
    variables_in(&tokenize_line(text))
}

pub(crate) fn variables_in(tokens: &[Token]) -> BTreeSet<String> {
    let mut vars = BTreeSet::new();
    for (i, tok) in tokens.iter().enumerate() {
        if tok.kind != TokenKind::Identifier {
            continue;
        }
        if tokens.get(i + 1).is_some_and(|t| t.is("(")) {
            continue;
        }
        if i > 0 && (tokens[i - 1].is(".") || tokens[i - 1].is("->")) {
            continue;
        }
        vars.insert(tok.text.clone());
    }
    vars
}

/// True for lines carrying code: not blank, not comment-only, and not made
/// only of delimiters such as braces and semicolons.
pub fn is_code_line(text: &str) -> bool {
    tokenize_line(text).iter().any(|t| t.kind != TokenKind::Punct)
}
