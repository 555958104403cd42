//! Trust assessment for line-level vulnerability predictions.
//!
//! A prediction's suspicious lines are checked in two stages: an ensemble of
//! line classifiers flags lines that look like ordinary, non-vulnerable code
//! (benign candidates), and a reachability analysis over the function's
//! program dependence graph measures how closely those lines connect to the
//! remaining suspicious lines. The resulting trust score is low when the
//! prediction leans on lines that neither look vulnerable nor lead anywhere
//! vulnerable.

pub mod assess;
pub mod config;
pub mod eval;
pub mod frontend;
pub mod lines;
pub mod pdg;

pub use pdg::{
    build_weighted_pdg, validate_pdg, DepKind, Explanation, ExplanationEntry, LineId, Pdg, PdgEdge, PdgError,
    WeightedPdg,
};

/// True when two `major.minor` schema versions share their major part.
pub(crate) fn same_major(found: &str, supported: &str) -> bool {
    found.split('.').next() == supported.split('.').next()
}
