//! Versioned text container for named tensors.
//!
//! ```text
//! absa-gan checkpoint v1
//! d=4
//! r=100
//! hops=3
//! classes=4
//! seed=7
//! tensor head.w 4,32
//! <32·4 space-separated values>
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip formatting, so a save/load cycle
//! is bit-exact. Scalars are written with an empty dimension list (`-`).

use std::io::{BufRead, Write};

use thiserror::Error;

use super::params::{ModelParams, NetworkConfig, NUM_OUTPUTS};
use crate::numerics::Tensor;

pub const MAGIC: &str = "absa-gan checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (expected {MAGIC:?} header)")]
    Magic,
    #[error("checkpoint line {line}: {detail}")]
    Format { line: usize, detail: String },
    #[error("checkpoint does not match the model: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered `key=value` header plus named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub header: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn get_header(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn header_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CheckpointError> {
        self.get_header(key)
            .ok_or_else(|| CheckpointError::Mismatch(format!("missing header {key}")))?
            .parse()
            .map_err(|_| CheckpointError::Mismatch(format!("unparsable header {key}")))
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        writeln!(w, "{MAGIC}")?;
        for (k, v) in &self.header {
            writeln!(w, "{k}={v}")?;
        }
        for (name, t) in &self.tensors {
            let dims = if t.shape().is_empty() {
                "-".to_string()
            } else {
                t.shape().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
            };
            writeln!(w, "tensor {name} {dims}")?;
            let values: Vec<String> = t.data().iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", values.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, CheckpointError> {
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            Some((_, Ok(l))) if l.trim_end() == MAGIC => {}
            Some((_, Err(e))) => return Err(e.into()),
            _ => return Err(CheckpointError::Magic),
        }
        let mut ck = Checkpoint::default();
        while let Some((i, line)) = lines.next() {
            let line = line?;
            let line_no = i + 1;
            let fmt_err = |detail: String| CheckpointError::Format { line: line_no, detail };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("tensor ") {
                let (name, dims) = rest.rsplit_once(' ').ok_or_else(|| fmt_err("expected name and dims".into()))?;
                let shape: Vec<usize> = if dims == "-" {
                    Vec::new()
                } else {
                    dims.split(',')
                        .map(|d| d.parse().map_err(|_| fmt_err(format!("bad dimension {d:?}"))))
                        .collect::<Result<_, _>>()?
                };
                let (_, values) = lines.next().ok_or_else(|| fmt_err("missing values line".into()))?;
                let data = values?
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|_| fmt_err(format!("bad value {v:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let t = Tensor::new(shape, data).map_err(|e| fmt_err(e.to_string()))?;
                ck.tensors.push((name.to_string(), t));
            } else if let Some((k, v)) = line.split_once('=') {
                ck.header.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                return Err(fmt_err(format!("unexpected line {line:?}")));
            }
        }
        Ok(ck)
    }
}

impl ModelParams {
    /// Config echo plus every parameter tensor, named.
    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        let cfg = self.config();
        Checkpoint {
            header: vec![
                ("d".into(), cfg.d.to_string()),
                ("r".into(), cfg.r.to_string()),
                ("hops".into(), cfg.hops.to_string()),
                ("classes".into(), NUM_OUTPUTS.to_string()),
                ("seed".into(), seed.to_string()),
            ],
            tensors: self.ids().map(|id| (self.name(id).to_string(), self.get(id).clone())).collect(),
        }
    }

    /// Rebuilds parameters; returns them with the recorded seed. Any
    /// dimension or name mismatch is an error.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, u64), CheckpointError> {
        let classes: usize = ck.header_parse("classes")?;
        if classes != NUM_OUTPUTS {
            return Err(CheckpointError::Mismatch(format!("{classes} classes, expected {NUM_OUTPUTS}")));
        }
        let (d, r, hops): (usize, usize, usize) =
            (ck.header_parse("d")?, ck.header_parse("r")?, ck.header_parse("hops")?);
        if d == 0 || r == 0 || hops == 0 {
            return Err(CheckpointError::Mismatch("d, r and hops must be positive".into()));
        }
        let seed = ck.header_parse("seed")?;
        let mut model = ModelParams::zeros(NetworkConfig::new(d, r, hops));
        let ids: Vec<_> = model.ids().collect();
        for id in ids {
            let name = model.name(id).to_string();
            let t = ck.tensor(&name).ok_or_else(|| CheckpointError::Mismatch(format!("missing tensor {name}")))?;
            model.set(id, t.clone()).map_err(CheckpointError::Mismatch)?;
        }
        Ok((model, seed))
    }

    /// Loads and additionally checks the stored config against `expected`.
    pub fn from_checkpoint_expecting(ck: &Checkpoint, expected: &NetworkConfig) -> Result<(Self, u64), CheckpointError> {
        let (model, seed) = Self::from_checkpoint(ck)?;
        if model.config() != expected {
            return Err(CheckpointError::Mismatch(format!(
                "checkpoint has {:?}, expected {:?}",
                model.config(),
                expected
            )));
        }
        Ok((model, seed))
    }
}
