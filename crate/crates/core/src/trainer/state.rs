use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::{Hyperparams, TrainError};
use crate::network::{Checkpoint, CheckpointError, ModelParams};

const VELOCITY_PREFIX: &str = "velocity.";
const HP_PREFIX: &str = "hp.";

/// Everything needed to continue a run: parameters, momentum buffers and
/// the number of completed iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub hp: Hyperparams,
    pub params: ModelParams,
    pub velocity: ModelParams,
    pub iteration: usize,
    /// Diagnostic only; not persisted.
    pub clamp_hits: usize,
}

impl TrainState {
    pub fn new(hp: Hyperparams) -> Result<Self, TrainError> {
        hp.validate()?;
        let cfg = hp.network_config();
        Ok(Self {
            params: ModelParams::init(cfg, hp.seed),
            velocity: ModelParams::zeros(cfg),
            iteration: 0,
            clamp_hits: 0,
            hp,
        })
    }

    /// A model checkpoint extended with the iteration counter, the
    /// hyperparameters and the velocities. It also loads as a plain model.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = self.params.to_checkpoint(self.hp.seed);
        ck.header.push(("iteration".into(), self.iteration.to_string()));
        for (k, v) in self.hp.entries() {
            ck.header.push((format!("{HP_PREFIX}{k}"), v));
        }
        for id in self.velocity.ids() {
            ck.tensors.push((format!("{VELOCITY_PREFIX}{}", self.velocity.name(id)), self.velocity.get(id).clone()));
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, TrainError> {
        let (params, _) = ModelParams::from_checkpoint(ck)?;
        let mut hp = Hyperparams::default();
        for key in Hyperparams::KEYS {
            let value = ck
                .get_header(&format!("{HP_PREFIX}{key}"))
                .ok_or_else(|| CheckpointError::Mismatch(format!("missing header {HP_PREFIX}{key}")))?;
            hp.set(key, value).map_err(CheckpointError::Mismatch)?;
        }
        hp.validate()?;
        if hp.network_config() != *params.config() {
            return Err(CheckpointError::Mismatch("hyperparameters disagree with the stored model".into()).into());
        }
        let mut velocity = ModelParams::zeros(*params.config());
        let ids: Vec<_> = velocity.ids().collect();
        for id in ids {
            let name = format!("{VELOCITY_PREFIX}{}", velocity.name(id));
            let t = ck.tensor(&name).ok_or_else(|| CheckpointError::Mismatch(format!("missing tensor {name}")))?;
            velocity.set(id, t.clone()).map_err(CheckpointError::Mismatch)?;
        }
        Ok(Self { hp, params, velocity, iteration: ck.header_parse("iteration")?, clamp_hits: 0 })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.to_checkpoint().write(&mut w)?;
        std::io::Write::flush(&mut w)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let ck = Checkpoint::read(BufReader::new(File::open(path)?))?;
        Self::from_checkpoint(&ck)
    }
}
