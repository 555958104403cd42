//! Sparse feature views over normalized lines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::frontend::{tokenize_line, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureView {
    /// Token unigrams and bigrams.
    TokenNgram,
    /// Character 3- to 5-grams.
    CharNgram,
    /// Token-kind n-grams, a length bucket and keyword flags.
    SyntaxShape,
}

impl FeatureView {
    pub const ALL: [FeatureView; 3] = [FeatureView::TokenNgram, FeatureView::CharNgram, FeatureView::SyntaxShape];

    pub fn name(self) -> &'static str {
        match self {
            FeatureView::TokenNgram => "token_ngram",
            FeatureView::CharNgram => "char_ngram",
            FeatureView::SyntaxShape => "syntax_shape",
        }
    }
}

impl fmt::Display for FeatureView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureView {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| format!("unknown feature view `{s}`"))
    }
}

fn length_bucket(n: usize) -> &'static str {
    match n {
        0..=1 => "1",
        2 => "2",
        3..=4 => "3-4",
        5..=8 => "5-8",
        9..=16 => "9-16",
        _ => "17+",
    }
}

/// Feature names with their occurrence counts.
pub fn raw_features(view: FeatureView, text: &str) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let mut bump = |key: String| *out.entry(key).or_insert(0.0) += 1.0;
    match view {
        FeatureView::TokenNgram => {
            let tokens = tokenize_line(text);
            for t in &tokens {
                bump(format!("u:{}", t.text));
            }
            for w in tokens.windows(2) {
                bump(format!("b:{} {}", w[0].text, w[1].text));
            }
        }
        FeatureView::CharNgram => {
            let chars: Vec<char> = format!("^{}$", text.trim()).chars().collect();
            for n in 3..=5 {
                for w in chars.windows(n) {
                    bump(format!("c{n}:{}", w.iter().collect::<String>()));
                }
            }
        }
        FeatureView::SyntaxShape => {
            let tokens = tokenize_line(text);
            let tags: Vec<&str> = tokens.iter().map(|t| t.kind.tag()).collect();
            for n in 1..=3 {
                for w in tags.windows(n) {
                    bump(format!("k{n}:{}", w.join(" ")));
                }
            }
            bump(format!("len:{}", length_bucket(tokens.len())));
            for t in tokens.iter().filter(|t| t.kind == TokenKind::Keyword) {
                bump(format!("kw:{}", t.text));
            }
        }
    }
    out
}

/// Sparse vector of one view, indexed by vocabulary position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub view: FeatureView,
    pub indices: BTreeMap<u32, f64>,
}

/// Feature names seen at training time, in sorted order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabulary(Vec<String>);

impl Vocabulary {
    pub fn build<'a>(view: FeatureView, texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut names: Vec<String> = texts.into_iter().flat_map(|t| raw_features(view, t).into_keys()).collect();
        names.sort_unstable();
        names.dedup();
        Self(names)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn index(&self, name: &str) -> Option<u32> {
        self.0.binary_search_by(|n| n.as_str().cmp(name)).ok().map(|i| i as u32)
    }

    /// Log-scaled counts of known features, L2-normalized. Unknown features
    /// are ignored.
    pub fn vectorize(&self, view: FeatureView, text: &str) -> FeatureVector {
        let mut indices = BTreeMap::new();
        for (name, count) in raw_features(view, text) {
            if let Some(i) = self.index(&name) {
                indices.insert(i, (1.0 + count).ln());
            }
        }
        let norm = indices.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            indices.values_mut().for_each(|v| *v /= norm);
        }
        FeatureVector { view, indices }
    }
}
