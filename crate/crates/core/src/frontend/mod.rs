//! Source-code front end: tokenization, the native dependence-graph builder,
//! import of externally exported graphs, and line merging.

mod import;
mod merge;
mod parser;
mod raw;
mod token;

pub use import::{
    export_raw_graph, import_document, import_raw_graph, ExportDocument, ExportEdge, ExportNode, ImportError, Imported,
};
pub use merge::{merge_line_nodes, MergeError};
pub use parser::{parse_function, ParseError};
pub use raw::{RawDepGraph, RawEdge, RawNode};
pub use token::{
    extract_variables, is_code_line, is_keyword, join_tokens, lex, normalize_line, tokenize_line, Spanned, Token,
    TokenKind, CHAR_LITERAL, STRING_LITERAL,
};

use crate::pdg::Pdg;

/// Parses a function and merges it into a line-level graph.
pub fn build_pdg(source: &str) -> Result<Pdg, ParseError> {
    let raw = parse_function(source)?;
    Ok(merge_line_nodes(&raw, source).expect("native graphs reference only their own nodes"))
}
