//! Review ingestion: SemEval-style XML and pre-tokenized text, contextual
//! embedding stores, and the left/target/right split fed to the network.

mod embeddings;
mod tokenize;
mod xml;

pub use embeddings::{embed, synth_embeddings, EmbeddedInstance, EmbeddingStore};
pub use tokenize::{align, tokenize, Token};
pub use xml::{parse_pretokenized, parse_semeval};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::numerics::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("sentence {sentence_id}: {detail}")]
    Schema { sentence_id: String, detail: String },
    #[error("sentence {sentence_id}: target offsets [{from}, {to}) do not cover any token")]
    Alignment { sentence_id: String, from: usize, to: usize },
    #[error("unknown polarity {0:?}")]
    UnknownPolarity(String),
    #[error("line {line}: {detail}")]
    Format { line: usize, detail: String },
    #[error("duplicate embedding key ({0}, {1})")]
    DuplicateKey(String, usize),
    #[error("embedding dimension mismatch on line {line}: expected {expected}, got {got}")]
    Dimension { line: usize, expected: usize, got: usize },
    #[error("no embedding for token {index} of sentence {sentence_id}")]
    MissingEmbedding { sentence_id: String, index: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Gold sentiment of an opinion. Discriminant order matches the classifier
/// outputs: Negative, Neutral, Positive, then the fake class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Negative, Polarity::Neutral, Polarity::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Polarity> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
            Polarity::Positive => "positive",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "negative" => Ok(Polarity::Negative),
            "neutral" => Ok(Polarity::Neutral),
            "positive" => Ok(Polarity::Positive),
            _ => Err(CorpusError::UnknownPolarity(s.to_string())),
        }
    }
}

/// Token span `[begin, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub begin: usize,
    pub end: usize,
}

/// One opinion with an explicit target.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewInstance {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub target: Span,
    pub aspect_category: String,
    pub polarity: Polarity,
    /// The annotated target string as it appeared in the source.
    pub target_text: String,
}

impl ReviewInstance {
    pub fn new(
        sentence_id: String,
        tokens: Vec<String>,
        target: Span,
        aspect_category: String,
        polarity: Polarity,
    ) -> Result<Self, CorpusError> {
        if target.begin >= target.end || target.end > tokens.len() {
            return Err(CorpusError::Schema {
                sentence_id,
                detail: format!(
                    "target span [{}, {}) invalid for {} tokens",
                    target.begin,
                    target.end,
                    tokens.len()
                ),
            });
        }
        let target_text = tokens[target.begin..target.end].join(" ");
        Ok(Self { sentence_id, tokens, target, aspect_category, polarity, target_text })
    }

    pub fn target_tokens(&self) -> &[String] {
        &self.tokens[self.target.begin..self.target.end]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    pub counts: [usize; 3],
    pub total: usize,
    /// Relative frequencies in [`Polarity`] order.
    pub frequencies: [f64; 3],
}

pub fn label_distribution(instances: &[ReviewInstance]) -> Result<LabelDistribution, CorpusError> {
    if instances.is_empty() {
        return Err(CorpusError::Invalid("label distribution of an empty corpus".into()));
    }
    let mut counts = [0usize; 3];
    for inst in instances {
        counts[inst.polarity.index()] += 1;
    }
    let total = instances.len();
    let frequencies = counts.map(|c| c as f64 / total as f64);
    Ok(LabelDistribution { counts, total, frequencies })
}

/// Uniform random partition: the first part gets `⌈ratio·n⌉` items, capped
/// so that both parts are non-empty.
pub fn train_test_split<T: Clone>(
    items: &[T],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::Invalid(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let n = items.len();
    if n < 2 {
        return Err(CorpusError::Invalid(format!("cannot split {n} items")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[0x5e11]));
    // guard against 0.8 * 10 = 8.000000000000001
    let n_train = ((ratio * n as f64 - 1e-9).ceil() as usize).clamp(1, n - 1);
    let train = order[..n_train].iter().map(|&i| items[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}
