//! Rule-based first stage: aspect-scoped sentiment words.
//!
//! A lexicon holds three kinds of sentiment words: generic words that carry
//! the same sentiment for every aspect, aspect-bound words that only count
//! for their listed aspects, and context-dependent words whose sentiment
//! depends on the aspect. A sentence is decided when every firing word
//! agrees; otherwise the verdict is inconclusive and the network takes over.
//!
//! Matching is lowercase token equality. There is no lemmatizer and no
//! negation handling, so lexicons must list surface forms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{Polarity, ReviewInstance};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("invalid entry {lemma:?}: {detail}")]
    Invalid { lemma: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sentiment {
    Positive,
    Negative,
}

impl Sentiment {
    pub fn polarity(self) -> Polarity {
        match self {
            Sentiment::Positive => Polarity::Positive,
            Sentiment::Negative => Polarity::Negative,
        }
    }
}

impl FromStr for Sentiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Sentiment::Positive),
            "negative" => Ok(Sentiment::Negative),
            other => Err(format!("unknown sentiment {other:?}")),
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sentiment::Positive => "Positive",
            Sentiment::Negative => "Negative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    /// Same sentiment for every aspect.
    Type1,
    /// Fixed sentiment, only for the listed aspects.
    Type2,
    /// Sentiment depends on the aspect.
    Type3,
}

impl FromStr for EntryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "type1" => Ok(EntryKind::Type1),
            "type2" => Ok(EntryKind::Type2),
            "type3" => Ok(EntryKind::Type3),
            other => Err(format!("unknown kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SentimentSpec {
    Fixed(Sentiment),
    PerAspect(BTreeMap<String, Sentiment>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub lemma: String,
    pub kind: EntryKind,
    pub sentiment: SentimentSpec,
    /// Empty means every aspect; only allowed for `Type1`.
    pub aspects: BTreeSet<String>,
}

impl LexiconEntry {
    pub fn new(
        lemma: &str,
        kind: EntryKind,
        sentiment: SentimentSpec,
        aspects: BTreeSet<String>,
    ) -> Result<Self, LexiconError> {
        let invalid = |detail: &str| LexiconError::Invalid { lemma: lemma.to_string(), detail: detail.to_string() };
        match (kind, &sentiment) {
            (EntryKind::Type1, SentimentSpec::Fixed(_)) if aspects.is_empty() => {}
            (EntryKind::Type1, SentimentSpec::Fixed(_)) => return Err(invalid("Type1 entries apply to all aspects")),
            (EntryKind::Type2, SentimentSpec::Fixed(_)) if !aspects.is_empty() => {}
            (EntryKind::Type2, SentimentSpec::Fixed(_)) => return Err(invalid("Type2 entries need aspects")),
            (EntryKind::Type3, SentimentSpec::PerAspect(map)) => {
                if aspects.is_empty() {
                    return Err(invalid("Type3 entries need aspects"));
                }
                if aspects.iter().any(|a| !map.contains_key(a)) || map.keys().any(|a| !aspects.contains(a)) {
                    return Err(invalid("Type3 sentiments must cover exactly the listed aspects"));
                }
            }
            (EntryKind::Type3, _) => return Err(invalid("Type3 entries need per-aspect sentiments")),
            (_, SentimentSpec::PerAspect(_)) => return Err(invalid("per-aspect sentiment requires Type3")),
        }
        Ok(Self { lemma: lemma.to_lowercase(), kind, sentiment, aspects })
    }

    /// Sentiment this entry contributes for `category`, if it covers it.
    pub fn sentiment_for(&self, category: &str) -> Option<Sentiment> {
        match (&self.sentiment, self.kind) {
            (SentimentSpec::Fixed(s), EntryKind::Type1) => Some(*s),
            (SentimentSpec::Fixed(s), _) => self.aspects.contains(category).then_some(*s),
            (SentimentSpec::PerAspect(map), _) => map.get(category).copied(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    by_lemma: HashMap<String, Vec<usize>>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Self {
        let mut by_lemma: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_lemma.entry(e.lemma.clone()).or_default().push(i);
        }
        Self { entries, by_lemma }
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `lemma \t kind \t sentiment-spec \t aspect-list` lines. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let err = |detail: String| LexiconError::Line { line, detail };
            let fields: Vec<&str> = raw.split('\t').collect();
            let [lemma, kind, spec, aspects] = fields[..] else {
                return Err(err(format!("expected 4 tab-separated fields, got {}", fields.len())));
            };
            let kind: EntryKind = kind.parse().map_err(err)?;
            let aspects: BTreeSet<String> = match aspects.trim() {
                "-" | "" => BTreeSet::new(),
                list => list.split(',').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect(),
            };
            let sentiment = if kind == EntryKind::Type3 {
                let mut map = BTreeMap::new();
                for pair in spec.split(';').filter(|p| !p.trim().is_empty()) {
                    let (aspect, s) = pair.split_once('=').ok_or_else(|| err(format!("expected aspect=sentiment, got {pair:?}")))?;
                    map.insert(aspect.trim().to_string(), s.parse().map_err(err)?);
                }
                SentimentSpec::PerAspect(map)
            } else {
                SentimentSpec::Fixed(spec.parse().map_err(err)?)
            };
            entries.push(LexiconEntry::new(lemma.trim(), kind, sentiment, aspects)?);
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Positive,
    Negative,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    NoHit,
    Conflict,
    Decided,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyVerdict {
    pub outcome: Outcome,
    pub reason: Reason,
    /// Indices of the entries that fired, ascending.
    pub hits: Vec<usize>,
}

impl OntologyVerdict {
    pub fn decided(&self) -> Option<Polarity> {
        match self.outcome {
            Outcome::Positive => Some(Polarity::Positive),
            Outcome::Negative => Some(Polarity::Negative),
            Outcome::Inconclusive => None,
        }
    }
}

pub fn ontology_classify(instance: &ReviewInstance, lexicon: &Lexicon) -> OntologyVerdict {
    let words: BTreeSet<String> = instance.tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut hits = Vec::new();
    let (mut pos, mut neg) = (false, false);
    for w in &words {
        for &i in lexicon.by_lemma.get(w).into_iter().flatten() {
            if let Some(s) = lexicon.entries[i].sentiment_for(&instance.aspect_category) {
                hits.push(i);
                match s {
                    Sentiment::Positive => pos = true,
                    Sentiment::Negative => neg = true,
                }
            }
        }
    }
    hits.sort_unstable();
    let (outcome, reason) = match (pos, neg) {
        (false, false) => (Outcome::Inconclusive, Reason::NoHit),
        (true, true) => (Outcome::Inconclusive, Reason::Conflict),
        (true, false) => (Outcome::Positive, Reason::Decided),
        (false, true) => (Outcome::Negative, Reason::Decided),
    };
    OntologyVerdict { outcome, reason, hits }
}
