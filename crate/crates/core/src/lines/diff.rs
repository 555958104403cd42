//! Changed-line extraction from unified diffs.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::frontend::is_code_line;
use crate::pdg::LineId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffError {
    #[error("diff line {diff_line}: malformed hunk header `{header}`")]
    BadHeader { diff_line: usize, header: String },
    #[error("diff line {diff_line}: source line {line} is `{found}`, diff expects `{expected}`")]
    ContextMismatch { diff_line: usize, line: u32, expected: String, found: String },
    #[error("diff line {diff_line}: hunk runs past the end of the source")]
    PastEnd { diff_line: usize },
    #[error("diff line {diff_line}: hunk ends before its declared length")]
    Truncated { diff_line: usize },
}

fn parse_range(field: &str) -> Option<(u32, u32)> {
    let (start, len) = match field.split_once(',') {
        Some((s, l)) => (s, l.parse().ok()?),
        None => (field, 1),
    };
    Some((start.parse().ok()?, len))
}

fn parse_header(header: &str) -> Option<(u32, u32, u32)> {
    let rest = header.strip_prefix("@@ ")?;
    let (ranges, _) = rest.split_once(" @@")?;
    let mut fields = ranges.split_whitespace();
    let (old_start, old_len) = parse_range(fields.next()?.strip_prefix('-')?)?;
    let (_, new_len) = parse_range(fields.next()?.strip_prefix('+')?)?;
    Some((old_start, old_len, new_len))
}

/// Lines of `before_source` that the diff deletes or modifies, leaving out
/// comments, blank lines and delimiter-only lines.
///
/// Modified lines show up as deletions in a unified diff, so both are
/// collected from the `-` side. Every context and deleted line is checked
/// against the source.
pub fn extract_vulnerable_lines(before_source: &str, diff: &str) -> Result<BTreeSet<LineId>, DiffError> {
    let source: Vec<&str> = before_source.lines().collect();
    let mut out = BTreeSet::new();
    let mut lines = diff.lines().enumerate().peekable();
    while let Some((idx, text)) = lines.next() {
        if !text.starts_with("@@") {
            continue;
        }
        let (old_start, mut old_left, mut new_left) =
            parse_header(text).ok_or_else(|| DiffError::BadHeader { diff_line: idx + 1, header: text.into() })?;
        // A zero-length old range names the line before the insertion point.
        let mut cursor = if old_left == 0 { old_start + 1 } else { old_start.max(1) };
        while old_left > 0 || new_left > 0 {
            let Some((idx, body)) = lines.next() else {
                return Err(DiffError::Truncated { diff_line: diff.lines().count() });
            };
            let diff_line = idx + 1;
            let (tag, content) = match body.chars().next() {
                Some(c @ (' ' | '-' | '+')) => (c, &body[1..]),
                Some('\\') => continue,
                None => (' ', ""),
                Some(_) => return Err(DiffError::Truncated { diff_line }),
            };
            if tag == '+' {
                new_left = new_left.checked_sub(1).ok_or(DiffError::Truncated { diff_line })?;
                continue;
            }
            let found = *source.get(cursor as usize - 1).ok_or(DiffError::PastEnd { diff_line })?;
            if found.trim_end() != content.trim_end() {
                return Err(DiffError::ContextMismatch {
                    diff_line,
                    line: cursor,
                    expected: content.into(),
                    found: found.into(),
                });
            }
            old_left = old_left.checked_sub(1).ok_or(DiffError::Truncated { diff_line })?;
            if tag == ' ' {
                new_left = new_left.checked_sub(1).ok_or(DiffError::Truncated { diff_line })?;
            } else if is_code_line(found) {
                out.insert(LineId::new(cursor).expect("cursor starts at 1"));
            }
            cursor += 1;
        }
        while lines.peek().is_some_and(|(_, l)| l.starts_with('\\')) {
            lines.next();
        }
    }
    Ok(out)
}
