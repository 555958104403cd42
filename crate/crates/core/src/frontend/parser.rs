//! Native dependence-graph builder for a C-like function subset.
//!
//! The supported subset is declarations, expression statements, calls,
//! `if`/`else`, `while`, `for`, `return`, `break`, `continue` and blocks.
//! Anything else (preprocessor lines, `switch`, `do`, `goto`, labels) is
//! rejected with the offending line.
//!
//! Control dependences come from post-dominators over the statement CFG.
//! Data dependences are def-use chains from reaching definitions: one edge
//! per (variable, defining statement, using statement).

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::raw::{RawDepGraph, RawEdge, RawNode};
use super::token::{lex, Spanned, TokenKind};
use crate::pdg::{DepKind, LineId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: unsupported construct `{construct}`")]
    Unsupported { line: u32, construct: String },
    #[error("line {line}: unbalanced braces")]
    UnbalancedBraces { line: u32 },
    #[error("line {line}: {message}")]
    Syntax { line: u32, message: String },
    #[error("no function found in source")]
    Empty,
}

impl ParseError {
    pub fn line(&self) -> Option<u32> {
        match self {
            ParseError::Unsupported { line, .. }
            | ParseError::UnbalancedBraces { line }
            | ParseError::Syntax { line, .. } => Some(*line),
            ParseError::Empty => None,
        }
    }
}

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="];

const TYPE_WORDS: &[&str] = &[
    "int", "char", "short", "long", "float", "double", "signed", "unsigned", "void", "struct", "union", "enum",
    "const", "static", "volatile", "register", "extern", "auto", "_Bool", "_Complex", "inline", "restrict", "typedef",
];

const UNSUPPORTED: &[&str] = &["switch", "case", "default", "goto", "do"];

#[derive(Debug, Clone, PartialEq, Eq)]
struct Def {
    var: String,
    /// A strong definition overwrites the whole variable and kills earlier
    /// ones; writes through members, indices or pointers do not.
    strong: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Effect {
    line: u32,
    defs: Vec<Def>,
    uses: BTreeSet<String>,
}

#[derive(Debug)]
enum Stmt {
    Simple(Effect),
    Return(Effect),
    Break(u32),
    Continue(u32),
    If { cond: Effect, then: Box<Stmt>, els: Option<Box<Stmt>> },
    While { cond: Effect, body: Box<Stmt> },
    For { init: Option<Effect>, cond: Effect, step: Option<Effect>, body: Box<Stmt> },
    Block(Vec<Stmt>),
    Empty,
}

/// Parses one function and returns its statement-level dependence graph.
pub fn parse_function(source: &str) -> Result<RawDepGraph, ParseError> {
    let tokens = lex(source);
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    if let Some(t) = tokens.iter().find(|t| t.token.is("#")) {
        return Err(ParseError::Unsupported { line: t.line, construct: "preprocessor directive".into() });
    }
    check_braces(&tokens)?;

    let body_start = tokens
        .iter()
        .position(|t| t.token.is("{"))
        .ok_or_else(|| ParseError::Syntax { line: tokens[0].line, message: "missing function body".into() })?;
    let header = &tokens[..body_start];
    let (name, name_line, params) = parse_header(header)?;
    let body_end = matching(&tokens, body_start, "{", "}")
        .ok_or(ParseError::UnbalancedBraces { line: tokens[body_start].line })?;
    if let Some(extra) = tokens.get(body_end + 1) {
        return Err(ParseError::Syntax { line: extra.line, message: "tokens after the function body".into() });
    }

    let mut parser = StmtParser { toks: &tokens[..=body_end], pos: body_start };
    let body = parser.statement()?;

    let mut cfg = Cfg::new(name_line, params);
    let mut loops = Vec::new();
    let outs = cfg.lower(&body, vec![Cfg::ENTRY], &mut loops);
    for o in outs {
        cfg.connect(o, Cfg::EXIT);
    }
    Ok(cfg.into_raw(name, source))
}

fn check_braces(tokens: &[Spanned]) -> Result<(), ParseError> {
    let mut depth = 0i64;
    for t in tokens {
        if t.token.is("{") {
            depth += 1;
        } else if t.token.is("}") {
            depth -= 1;
            if depth < 0 {
                return Err(ParseError::UnbalancedBraces { line: t.line });
            }
        }
    }
    if depth != 0 {
        return Err(ParseError::UnbalancedBraces { line: tokens.last().map_or(1, |t| t.line) });
    }
    Ok(())
}

/// Index of the token closing the group opened at `open_at`.
fn matching(tokens: &[Spanned], open_at: usize, open: &str, close: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open_at) {
        if t.token.is(open) {
            depth += 1;
        } else if t.token.is(close) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn parse_header(header: &[Spanned]) -> Result<(String, u32, Vec<String>), ParseError> {
    let line = header.first().map_or(1, |t| t.line);
    let open = header
        .iter()
        .position(|t| t.token.is("("))
        .ok_or_else(|| ParseError::Syntax { line, message: "missing parameter list".into() })?;
    let name_tok = open
        .checked_sub(1)
        .map(|i| &header[i])
        .filter(|t| t.token.kind == TokenKind::Identifier)
        .ok_or_else(|| ParseError::Syntax { line, message: "missing function name".into() })?;
    let close = matching(header, open, "(", ")")
        .ok_or_else(|| ParseError::Syntax { line, message: "unterminated parameter list".into() })?;
    let params = split_top_level(&header[open + 1..close], ",")
        .into_iter()
        .filter_map(|p| p.iter().rev().find(|t| t.token.kind == TokenKind::Identifier).map(|t| t.token.text.clone()))
        .collect();
    Ok((name_tok.token.text.clone(), name_tok.line, params))
}

fn split_top_level<'a>(toks: &'a [Spanned], sep: &str) -> Vec<&'a [Spanned]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in toks.iter().enumerate() {
        match t.token.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            s if s == sep && depth == 0 => {
                parts.push(&toks[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if start < toks.len() {
        parts.push(&toks[start..]);
    }
    parts
}

struct StmtParser<'a> {
    toks: &'a [Spanned],
    pos: usize,
}

impl<'a> StmtParser<'a> {
    fn peek(&self) -> Option<&'a Spanned> {
        self.toks.get(self.pos)
    }

    fn line(&self) -> u32 {
        self.peek().or(self.toks.last()).map_or(1, |t| t.line)
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line(), message: message.into() }
    }

    fn expect(&mut self, text: &str) -> Result<&'a Spanned, ParseError> {
        match self.peek() {
            Some(t) if t.token.is(text) => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(self.syntax(format!("expected `{text}`, found `{}`", t.token.text))),
            None => Err(self.syntax(format!("expected `{text}` at end of input"))),
        }
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let Some(tok) = self.peek() else {
            return Err(self.syntax("unexpected end of input"));
        };
        let line = tok.line;
        let text = tok.token.text.as_str();
        if tok.token.kind == TokenKind::Keyword && UNSUPPORTED.contains(&text) {
            return Err(ParseError::Unsupported { line, construct: text.to_string() });
        }
        if tok.token.kind == TokenKind::Identifier && self.toks.get(self.pos + 1).is_some_and(|t| t.token.is(":")) {
            return Err(ParseError::Unsupported { line, construct: "label".into() });
        }
        match text {
            "{" => {
                self.pos += 1;
                let mut stmts = Vec::new();
                loop {
                    match self.peek() {
                        Some(t) if t.token.is("}") => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => stmts.push(self.statement()?),
                        None => return Err(ParseError::UnbalancedBraces { line }),
                    }
                }
                Ok(Stmt::Block(stmts))
            }
            ";" => {
                self.pos += 1;
                Ok(Stmt::Empty)
            }
            "if" => {
                self.pos += 1;
                let cond = self.paren_effect(line)?;
                let then = Box::new(self.statement()?);
                let els = if self.peek().is_some_and(|t| t.token.is("else")) {
                    self.pos += 1;
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                Ok(Stmt::If { cond, then, els })
            }
            "else" => Err(self.syntax("`else` without `if`")),
            "while" => {
                self.pos += 1;
                let cond = self.paren_effect(line)?;
                let body = Box::new(self.statement()?);
                Ok(Stmt::While { cond, body })
            }
            "for" => {
                self.pos += 1;
                let open = self.pos;
                self.expect("(")?;
                let close = matching(self.toks, open, "(", ")").ok_or_else(|| self.syntax("unterminated `for`"))?;
                let inner = &self.toks[open + 1..close];
                let semis = inner.iter().filter(|t| t.token.is(";")).count();
                if semis != 2 {
                    return Err(ParseError::Syntax { line, message: "malformed `for` header".into() });
                }
                let mut clauses = [None, None, None];
                let mut idx = 0;
                let mut start = 0;
                for (i, t) in inner.iter().enumerate() {
                    if t.token.is(";") {
                        clauses[idx] = non_empty(&inner[start..i]);
                        idx += 1;
                        start = i + 1;
                    }
                }
                clauses[2] = non_empty(&inner[start..]);
                let init = clauses[0].map(|c| statement_effect(c, line));
                let cond = clauses[1].map(|c| expr_effect(c, line)).unwrap_or(Effect { line, ..Default::default() });
                let step = clauses[2].map(|c| expr_effect(c, c[0].line));
                self.pos = close + 1;
                let body = Box::new(self.statement()?);
                Ok(Stmt::For { init, cond, step, body })
            }
            "return" => {
                self.pos += 1;
                let toks = self.until_semicolon()?;
                Ok(Stmt::Return(expr_effect(toks, line)))
            }
            "break" | "continue" => {
                self.pos += 1;
                self.expect(";")?;
                Ok(if text == "break" { Stmt::Break(line) } else { Stmt::Continue(line) })
            }
            "}" => Err(ParseError::UnbalancedBraces { line }),
            _ => {
                let toks = self.until_semicolon()?;
                Ok(Stmt::Simple(statement_effect(toks, line)))
            }
        }
    }

    fn paren_effect(&mut self, line: u32) -> Result<Effect, ParseError> {
        let open = self.pos;
        self.expect("(")?;
        let close = matching(self.toks, open, "(", ")").ok_or_else(|| self.syntax("unterminated condition"))?;
        let effect = expr_effect(&self.toks[open + 1..close], line);
        self.pos = close + 1;
        Ok(effect)
    }

    /// Tokens up to (excluding) the next top-level `;`, which is consumed.
    fn until_semicolon(&mut self) -> Result<&'a [Spanned], ParseError> {
        let start = self.pos;
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            match t.token.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" => depth -= 1,
                "}" => {
                    if depth == 0 {
                        return Err(ParseError::Syntax { line: t.line, message: "missing `;`".into() });
                    }
                    depth -= 1;
                }
                ";" if depth == 0 => {
                    self.pos += 1;
                    return Ok(&self.toks[start..self.pos - 1]);
                }
                _ => {}
            }
            self.pos += 1;
        }
        Err(self.syntax("missing `;`"))
    }
}

fn non_empty(toks: &[Spanned]) -> Option<&[Spanned]> {
    if toks.is_empty() {
        None
    } else {
        Some(toks)
    }
}

fn is_ident(t: Option<&Spanned>) -> bool {
    t.is_some_and(|t| t.token.kind == TokenKind::Identifier)
}

fn looks_like_declaration(toks: &[Spanned]) -> bool {
    let Some(first) = toks.first() else { return false };
    if first.token.kind == TokenKind::Keyword {
        return TYPE_WORDS.contains(&first.token.text.as_str());
    }
    if first.token.kind != TokenKind::Identifier {
        return false;
    }
    let mut i = 1;
    while toks.get(i).is_some_and(|t| t.token.is("*")) {
        i += 1;
    }
    if !is_ident(toks.get(i)) {
        return false;
    }
    match toks.get(i + 1) {
        None => true,
        Some(t) => matches!(t.token.text.as_str(), "=" | "," | "[" | ";"),
    }
}

/// Effect of a declaration or expression statement.
fn statement_effect(toks: &[Spanned], line: u32) -> Effect {
    if looks_like_declaration(toks) {
        declaration_effect(toks, line)
    } else {
        expr_effect(toks, line)
    }
}

fn declaration_effect(toks: &[Spanned], line: u32) -> Effect {
    let mut effect = Effect { line, ..Default::default() };
    let mut i = 0;
    // Type specifiers: keywords, struct/union/enum tags and bodies, or one
    // typedef name.
    let mut seen_typedef_name = false;
    while let Some(t) = toks.get(i) {
        match t.token.kind {
            TokenKind::Keyword if TYPE_WORDS.contains(&t.token.text.as_str()) => {
                let tagged = matches!(t.token.text.as_str(), "struct" | "union" | "enum");
                i += 1;
                if tagged && is_ident(toks.get(i)) {
                    i += 1;
                }
                if tagged && toks.get(i).is_some_and(|t| t.token.is("{")) {
                    i = matching(toks, i, "{", "}").map_or(toks.len(), |c| c + 1);
                }
            }
            TokenKind::Identifier if !seen_typedef_name && !has_type_keyword(&toks[..i]) => {
                // Identifier followed by something that is still part of the
                // declarator list means this identifier is the type name.
                let mut j = i + 1;
                while toks.get(j).is_some_and(|t| t.token.is("*")) {
                    j += 1;
                }
                if is_ident(toks.get(j)) || toks.get(j).is_some_and(|t| t.token.is("(")) {
                    seen_typedef_name = true;
                    i += 1;
                } else {
                    break;
                }
            }
            _ => break,
        }
    }
    for declarator in split_top_level(&toks[i.min(toks.len())..], ",") {
        let mut j = 0;
        while declarator.get(j).is_some_and(|t| {
            t.token.is("*") || t.token.is("(") || matches!(t.token.text.as_str(), "const" | "volatile" | "restrict")
        }) {
            j += 1;
        }
        let Some(name) = declarator.get(j).filter(|t| t.token.kind == TokenKind::Identifier) else {
            continue;
        };
        let rest = &declarator[j + 1..];
        let eq = rest.iter().position(|t| t.token.is("="));
        let (dims, init) = match eq {
            Some(p) => (&rest[..p], Some(&rest[p + 1..])),
            None => (rest, None),
        };
        effect.uses.extend(expr_effect(dims, line).uses);
        if let Some(init) = init {
            let inner = expr_effect(init, line);
            effect.uses.extend(inner.uses);
            effect.defs.extend(inner.defs);
            effect.defs.push(Def { var: name.token.text.clone(), strong: true });
        }
    }
    effect
}

fn has_type_keyword(toks: &[Spanned]) -> bool {
    toks.iter().any(|t| t.token.kind == TokenKind::Keyword && TYPE_WORDS.contains(&t.token.text.as_str()))
}

fn tok_is(toks: &[Spanned], i: usize, text: &str) -> bool {
    toks.get(i).is_some_and(|t| t.token.is(text))
}

/// Returns (base identifier index, strong) for the lvalue ending at `end`.
fn lvalue_base(toks: &[Spanned], end: usize) -> Option<(usize, bool)> {
    let mut j = end as isize;
    let mut strong = true;
    loop {
        if j < 0 {
            return None;
        }
        let t = &toks[j as usize].token;
        if t.is("]") {
            let mut depth = 0;
            while j >= 0 {
                let tx = &toks[j as usize].token;
                if tx.is("]") {
                    depth += 1;
                } else if tx.is("[") {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                j -= 1;
            }
            strong = false;
            j -= 1;
            continue;
        }
        if t.is(")") {
            let mut depth = 0;
            let close = j;
            while j >= 0 {
                let tx = &toks[j as usize].token;
                if tx.is(")") {
                    depth += 1;
                } else if tx.is("(") {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                j -= 1;
            }
            let inner = (j.max(0) as usize + 1)..(close as usize);
            return inner
                .into_iter()
                .find(|&k| toks[k].token.kind == TokenKind::Identifier && !tok_is(toks, k + 1, "("))
                .map(|k| (k, false));
        }
        if t.kind == TokenKind::Identifier {
            if j >= 1 && (toks[j as usize - 1].token.is(".") || toks[j as usize - 1].token.is("->")) {
                strong = false;
                j -= 2;
                continue;
            }
            let base = j as usize;
            if base >= 1 && toks[base - 1].token.is("*") && is_unary_position(toks, base - 1) {
                strong = false;
            }
            return Some((base, strong));
        }
        return None;
    }
}

/// Whether the operator at `i` is in prefix (unary) position.
fn is_unary_position(toks: &[Spanned], i: usize) -> bool {
    if i == 0 {
        return true;
    }
    let prev = &toks[i - 1].token;
    !(matches!(prev.kind, TokenKind::Identifier | TokenKind::Literal) || prev.is(")") || prev.is("]"))
}

fn expr_effect(toks: &[Spanned], line: u32) -> Effect {
    let mut effect = Effect { line, ..Default::default() };
    let mut pure_defs = BTreeSet::new();
    for (i, t) in toks.iter().enumerate() {
        let op = t.token.text.as_str();
        if t.token.kind == TokenKind::Operator && ASSIGN_OPS.contains(&op) && i > 0 {
            if let Some((base, strong)) = lvalue_base(toks, i - 1) {
                effect.defs.push(Def { var: toks[base].token.text.clone(), strong });
                if op == "=" && strong {
                    pure_defs.insert(base);
                }
            }
        } else if op == "++" || op == "--" {
            let target =
                if i > 0 && !is_unary_position(toks, i) { lvalue_base(toks, i - 1) } else { next_lvalue(toks, i + 1) };
            if let Some((base, strong)) = target {
                effect.defs.push(Def { var: toks[base].token.text.clone(), strong });
            }
        }
    }
    for (i, t) in toks.iter().enumerate() {
        if t.token.kind != TokenKind::Identifier || pure_defs.contains(&i) {
            continue;
        }
        if tok_is(toks, i + 1, "(") {
            continue;
        }
        if i > 0 && (toks[i - 1].token.is(".") || toks[i - 1].token.is("->")) {
            continue;
        }
        effect.uses.insert(t.token.text.clone());
    }
    effect
}

/// Lvalue following a prefix `++`/`--`, e.g. `++p->count` or `--*n`.
fn next_lvalue(toks: &[Spanned], start: usize) -> Option<(usize, bool)> {
    let mut k = start;
    let mut strong = true;
    while tok_is(toks, k, "*") || tok_is(toks, k, "(") {
        strong = false;
        k += 1;
    }
    if !is_ident(toks.get(k)) {
        return None;
    }
    if tok_is(toks, k + 1, "->") || tok_is(toks, k + 1, ".") || tok_is(toks, k + 1, "[") {
        strong = false;
    }
    Some((k, strong))
}

struct CfgNode {
    line: u32,
    defs: Vec<Def>,
    uses: BTreeSet<String>,
}

#[derive(Default)]
struct LoopFrame {
    breaks: Vec<usize>,
    continues: Vec<usize>,
}

struct Cfg {
    nodes: Vec<CfgNode>,
    succ: Vec<Vec<usize>>,
}

impl Cfg {
    const ENTRY: usize = 0;
    const EXIT: usize = 1;

    fn new(entry_line: u32, params: Vec<String>) -> Self {
        let entry = CfgNode {
            line: entry_line,
            defs: params.into_iter().map(|var| Def { var, strong: true }).collect(),
            uses: BTreeSet::new(),
        };
        let exit = CfgNode { line: 0, defs: Vec::new(), uses: BTreeSet::new() };
        Self { nodes: vec![entry, exit], succ: vec![Vec::new(), Vec::new()] }
    }

    fn add(&mut self, effect: &Effect) -> usize {
        // One definition site per variable and statement; strong if any is.
        let mut defs: Vec<Def> = Vec::new();
        for d in &effect.defs {
            match defs.iter_mut().find(|e| e.var == d.var) {
                Some(e) => e.strong |= d.strong,
                None => defs.push(d.clone()),
            }
        }
        self.nodes.push(CfgNode { line: effect.line, defs, uses: effect.uses.clone() });
        self.succ.push(Vec::new());
        self.nodes.len() - 1
    }

    fn connect(&mut self, from: usize, to: usize) {
        if !self.succ[from].contains(&to) {
            self.succ[from].push(to);
        }
    }

    fn link(&mut self, preds: &[usize], node: usize) {
        for &p in preds {
            self.connect(p, node);
        }
    }

    fn lower(&mut self, stmt: &Stmt, preds: Vec<usize>, loops: &mut Vec<LoopFrame>) -> Vec<usize> {
        match stmt {
            Stmt::Empty => preds,
            Stmt::Simple(e) => {
                let n = self.add(e);
                self.link(&preds, n);
                vec![n]
            }
            Stmt::Return(e) => {
                let n = self.add(e);
                self.link(&preds, n);
                self.connect(n, Self::EXIT);
                Vec::new()
            }
            Stmt::Break(line) | Stmt::Continue(line) => {
                let n = self.add(&Effect { line: *line, ..Default::default() });
                self.link(&preds, n);
                match loops.last_mut() {
                    Some(frame) if matches!(stmt, Stmt::Break(_)) => frame.breaks.push(n),
                    Some(frame) => frame.continues.push(n),
                    // Outside any loop: treat as leaving the function.
                    None => self.connect(n, Self::EXIT),
                }
                Vec::new()
            }
            Stmt::Block(stmts) => stmts.iter().fold(preds, |p, s| self.lower(s, p, loops)),
            Stmt::If { cond, then, els } => {
                let c = self.add(cond);
                self.link(&preds, c);
                let mut outs = self.lower(then, vec![c], loops);
                match els {
                    Some(e) => outs.extend(self.lower(e, vec![c], loops)),
                    None => outs.push(c),
                }
                outs
            }
            Stmt::While { cond, body } => {
                let c = self.add(cond);
                self.link(&preds, c);
                loops.push(LoopFrame::default());
                let body_out = self.lower(body, vec![c], loops);
                let frame = loops.pop().unwrap_or_default();
                self.link(&body_out, c);
                self.link(&frame.continues, c);
                let mut outs = vec![c];
                outs.extend(frame.breaks);
                outs
            }
            Stmt::For { init, cond, step, body } => {
                let mut preds = preds;
                if let Some(init) = init {
                    let n = self.add(init);
                    self.link(&preds, n);
                    preds = vec![n];
                }
                let c = self.add(cond);
                self.link(&preds, c);
                loops.push(LoopFrame::default());
                let mut body_out = self.lower(body, vec![c], loops);
                let frame = loops.pop().unwrap_or_default();
                body_out.extend(frame.continues);
                match step {
                    Some(step) => {
                        let s = self.add(step);
                        self.link(&body_out, s);
                        self.connect(s, c);
                    }
                    None => self.link(&body_out, c),
                }
                let mut outs = vec![c];
                outs.extend(frame.breaks);
                outs
            }
        }
    }

    /// Immediate post-dominators (Cooper, Harvey and Kennedy over the
    /// reversed CFG). `None` for nodes that cannot reach the exit.
    fn post_dominators(&self) -> Vec<Option<usize>> {
        let n = self.nodes.len();
        let mut preds = vec![Vec::new(); n];
        for (a, ss) in self.succ.iter().enumerate() {
            for &b in ss {
                preds[b].push(a);
            }
        }
        // Postorder of the reversed graph rooted at EXIT.
        let mut order = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        let mut stack = vec![(Self::EXIT, 0usize)];
        visited[Self::EXIT] = true;
        while let Some((node, child)) = stack.pop() {
            if let Some(&next) = preds[node].get(child) {
                stack.push((node, child + 1));
                if !visited[next] {
                    visited[next] = true;
                    stack.push((next, 0));
                }
            } else {
                order.push(node);
            }
        }
        let mut po = vec![usize::MAX; n];
        for (i, &node) in order.iter().enumerate() {
            po[node] = i;
        }
        let mut ipdom: Vec<Option<usize>> = vec![None; n];
        ipdom[Self::EXIT] = Some(Self::EXIT);
        let mut changed = true;
        while changed {
            changed = false;
            for &b in order.iter().rev() {
                if b == Self::EXIT {
                    continue;
                }
                let mut new: Option<usize> = None;
                for &s in &self.succ[b] {
                    if ipdom[s].is_none() {
                        continue;
                    }
                    new = Some(match new {
                        None => s,
                        Some(cur) => {
                            let (mut x, mut y) = (s, cur);
                            while x != y {
                                while po[x] < po[y] {
                                    x = ipdom[x].expect("processed");
                                }
                                while po[y] < po[x] {
                                    y = ipdom[y].expect("processed");
                                }
                            }
                            x
                        }
                    });
                }
                if new.is_some() && ipdom[b] != new {
                    ipdom[b] = new;
                    changed = true;
                }
            }
        }
        ipdom
    }

    fn control_edges(&self) -> BTreeSet<(usize, usize)> {
        let ipdom = self.post_dominators();
        let mut out = BTreeSet::new();
        for (a, succs) in self.succ.iter().enumerate() {
            if succs.len() < 2 || a == Self::ENTRY {
                continue;
            }
            let Some(stop) = ipdom[a] else { continue };
            for &b in succs {
                let mut runner = b;
                while runner != stop && runner != Self::EXIT {
                    out.insert((a, runner));
                    match ipdom[runner] {
                        Some(next) if next != runner => runner = next,
                        _ => break,
                    }
                }
            }
        }
        out
    }

    /// Reaching definitions, then one edge per (variable, def, use).
    fn data_edges(&self) -> BTreeSet<(usize, usize, String)> {
        let n = self.nodes.len();
        let sites: Vec<(usize, &Def)> =
            self.nodes.iter().enumerate().flat_map(|(i, node)| node.defs.iter().map(move |d| (i, d))).collect();
        let mut by_var: HashMap<&str, Vec<usize>> = HashMap::new();
        for (s, (_, d)) in sites.iter().enumerate() {
            by_var.entry(d.var.as_str()).or_default().push(s);
        }
        let words = sites.len().div_ceil(64).max(1);
        let mut gen = vec![vec![0u64; words]; n];
        let mut kill = vec![vec![0u64; words]; n];
        for (s, (node, def)) in sites.iter().enumerate() {
            gen[*node][s / 64] |= 1 << (s % 64);
            if def.strong {
                for &other in &by_var[def.var.as_str()] {
                    if sites[other].0 != *node {
                        kill[*node][other / 64] |= 1 << (other % 64);
                    }
                }
            }
        }
        let mut preds = vec![Vec::new(); n];
        for (a, ss) in self.succ.iter().enumerate() {
            for &b in ss {
                preds[b].push(a);
            }
        }
        let mut inn = vec![vec![0u64; words]; n];
        let mut out = gen.clone();
        let mut changed = true;
        while changed {
            changed = false;
            for b in 0..n {
                let mut new_in = vec![0u64; words];
                for &p in &preds[b] {
                    for w in 0..words {
                        new_in[w] |= out[p][w];
                    }
                }
                let new_out: Vec<u64> = (0..words).map(|w| gen[b][w] | (new_in[w] & !kill[b][w])).collect();
                if new_out != out[b] {
                    out[b] = new_out;
                    changed = true;
                }
                inn[b] = new_in;
            }
        }
        let mut edges = BTreeSet::new();
        for (b, node) in self.nodes.iter().enumerate() {
            for var in &node.uses {
                let Some(candidates) = by_var.get(var.as_str()) else { continue };
                for &s in candidates {
                    if inn[b][s / 64] & (1 << (s % 64)) != 0 {
                        edges.insert((sites[s].0, b, var.clone()));
                    }
                }
            }
        }
        edges
    }

    fn into_raw(self, function_id: String, source: &str) -> RawDepGraph {
        let lines: Vec<&str> = source.lines().collect();
        let control = self.control_edges();
        let data = self.data_edges();
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != Self::EXIT)
            .map(|(i, node)| RawNode {
                id: i as u64,
                line: LineId::new(node.line).expect("token lines are 1-based"),
                code: lines.get(node.line as usize - 1).map(|l| l.trim().to_string()).unwrap_or_default(),
            })
            .collect();
        let mut edges: Vec<RawEdge> = control
            .into_iter()
            .map(|(a, b)| RawEdge { src: a as u64, dst: b as u64, kind: DepKind::Control, variable: None })
            .chain(data.into_iter().map(|(a, b, v)| RawEdge {
                src: a as u64,
                dst: b as u64,
                kind: DepKind::Data,
                variable: Some(v),
            }))
            .collect();
        edges.sort();
        RawDepGraph { function_id, nodes, edges }
    }
}
