use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng as _;
use rand::SeedableRng;

use super::{CorpusError, Polarity, ReviewInstance, Span};
use crate::numerics::rng::{self, Rng};
use crate::numerics::Tensor;

type Key = (String, usize);

/// Contextual token vectors keyed by `(sentence_id, token_index)`.
///
/// Entries keep their insertion order so that writing a loaded file
/// reproduces it line for line.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: Vec<(Key, Vec<f64>)>,
    index: HashMap<Key, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new(), index: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, sentence_id: &str, token_index: usize, vector: Vec<f64>) -> Result<(), CorpusError> {
        if vector.len() != self.dim {
            return Err(CorpusError::Dimension { line: self.len() + 2, expected: self.dim, got: vector.len() });
        }
        let key = (sentence_id.to_string(), token_index);
        if self.index.contains_key(&key) {
            return Err(CorpusError::DuplicateKey(key.0, key.1));
        }
        self.index.insert(key.clone(), self.entries.len());
        self.entries.push((key, vector));
        Ok(())
    }

    pub fn get(&self, sentence_id: &str, token_index: usize) -> Option<&[f64]> {
        self.index
            .get(&(sentence_id.to_string(), token_index))
            .map(|&i| self.entries[i].1.as_slice())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, usize, &[f64])> {
        self.entries.iter().map(|((s, i), v)| (s.as_str(), *i, v.as_slice()))
    }

    /// Mutable access to every vector, for post-processing synthetic stores.
    pub fn vectors_mut(&mut self) -> impl Iterator<Item = (&str, usize, &mut Vec<f64>)> {
        self.entries.iter_mut().map(|((s, i), v)| (s.as_str(), *i, v))
    }

    /// Reads `d=<int>` followed by `sentence_id \t token_index \t values`.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut lines = reader.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let dim = header
            .trim()
            .strip_prefix("d=")
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| CorpusError::Format { line: 1, detail: format!("expected header d=<int>, got {header:?}") })?;
        let mut store = Self::new(dim);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fmt_err = |detail: String| CorpusError::Format { line: line_no, detail };
            let mut fields = line.splitn(3, '\t');
            let (Some(id), Some(idx), Some(values)) = (fields.next(), fields.next(), fields.next()) else {
                return Err(fmt_err("expected sentence_id, token_index and values".into()));
            };
            let idx: usize = idx.trim().parse().map_err(|_| fmt_err(format!("bad token index {idx:?}")))?;
            let vector = values
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| fmt_err(format!("bad float {v:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if vector.len() != dim {
                return Err(CorpusError::Dimension { line: line_no, expected: dim, got: vector.len() });
            }
            store.insert(id, idx, vector)?;
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    /// Writes values with 17 significant digits, which round-trips `f64`.
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), CorpusError> {
        writeln!(w, "d={}", self.dim)?;
        for ((id, idx), v) in &self.entries {
            let values: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{id}\t{idx}\t{}", values.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Deterministic stand-in for contextual embeddings: every
/// `(sentence_id, token_index, token)` seeds its own generator, which draws
/// `d` values from U(−1, 1).
pub fn synth_embeddings(instances: &[ReviewInstance], d: usize, seed: u64) -> EmbeddingStore {
    let mut store = EmbeddingStore::new(d);
    for inst in instances {
        for (i, tok) in inst.tokens.iter().enumerate() {
            if store.get(&inst.sentence_id, i).is_some() {
                continue;
            }
            let mut key = Vec::with_capacity(inst.sentence_id.len() + tok.len() + 18);
            key.extend_from_slice(inst.sentence_id.as_bytes());
            key.push(0);
            key.extend_from_slice(&(i as u64).to_le_bytes());
            key.push(0);
            key.extend_from_slice(tok.as_bytes());
            let mut r = Rng::seed_from_u64(rng::sub_seed(seed, &[rng::fnv1a(&key)]));
            let v = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
            store.insert(&inst.sentence_id, i, v).expect("fresh key of the declared dimension");
        }
    }
    store
}

/// An instance split into left context, target and right context rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedInstance {
    pub left: Tensor,
    pub target: Tensor,
    pub right: Tensor,
    pub polarity: Polarity,
    pub aspect_category: String,
}

impl EmbeddedInstance {
    pub fn dim(&self) -> usize {
        self.target.cols()
    }
}

/// Looks up every token and splits around the target. An empty side becomes
/// a single zero row.
pub fn embed(instance: &ReviewInstance, store: &EmbeddingStore) -> Result<EmbeddedInstance, CorpusError> {
    let d = store.dim();
    let rows = |range: std::ops::Range<usize>| -> Result<Tensor, CorpusError> {
        if range.is_empty() {
            return Ok(Tensor::zeros(&[1, d]));
        }
        let n = range.len();
        let mut data = Vec::with_capacity(n * d);
        for i in range {
            let v = store.get(&instance.sentence_id, i).ok_or_else(|| CorpusError::MissingEmbedding {
                sentence_id: instance.sentence_id.clone(),
                index: i,
            })?;
            data.extend_from_slice(v);
        }
        Ok(Tensor::matrix(n, d, data).expect("rows of dimension d"))
    };
    let Span { begin, end } = instance.target;
    Ok(EmbeddedInstance {
        left: rows(0..begin)?,
        target: rows(begin..end)?,
        right: rows(end..instance.tokens.len())?,
        polarity: instance.polarity,
        aspect_category: instance.aspect_category.clone(),
    })
}
