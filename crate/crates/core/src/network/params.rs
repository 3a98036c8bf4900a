use rand::Rng as _;

use crate::numerics::rng::{self};
use crate::numerics::{ParamId, Tensor};

/// Number of real sentiment classes.
pub const NUM_REAL_CLASSES: usize = 3;
/// Output width of the discriminator: three real classes plus the fake class.
pub const NUM_OUTPUTS: usize = NUM_REAL_CLASSES + 1;
/// Output index of the fake class.
pub const FAKE_CLASS: usize = NUM_REAL_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkConfig {
    /// Embedding dimension; each bi-LSTM direction has `d` hidden units.
    pub d: usize,
    /// Generator noise dimension.
    pub r: usize,
    pub hops: usize,
}

impl NetworkConfig {
    pub fn new(d: usize, r: usize, hops: usize) -> Self {
        assert!(d >= 1 && r >= 1 && hops >= 1, "d, r and hops must be positive");
        Self { d, r, hops }
    }

    /// Length of the concatenated representation vector.
    pub fn repr_len(&self) -> usize {
        8 * self.d
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { d: 768, r: 100, hops: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Discriminator,
    Generator,
}

#[derive(Debug, Clone, Copy)]
pub struct LstmIds {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct BiLstmIds {
    pub fwd: LstmIds,
    pub bwd: LstmIds,
}

/// Bilinear attention parameters, indexed `[left, right]`.
#[derive(Debug, Clone, Copy)]
pub struct RotaryIds {
    pub w_target2context: [ParamId; 2],
    pub b_target2context: [ParamId; 2],
    pub w_context2target: [ParamId; 2],
    pub b_context2target: [ParamId; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct HierarchicalIds {
    pub w_context: ParamId,
    pub b_context: ParamId,
    pub w_target: ParamId,
    pub b_target: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct HeadIds {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorIds {
    pub w: [ParamId; 3],
    pub b: [ParamId; 3],
}

/// Where every named tensor lives in the [`ModelParams`] store.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub left: BiLstmIds,
    pub target: BiLstmIds,
    pub right: BiLstmIds,
    pub rotary: RotaryIds,
    pub hierarchical: HierarchicalIds,
    pub head: HeadIds,
    pub generator: GeneratorIds,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Weight,
    Bias,
}

struct Spec {
    name: String,
    shape: Vec<usize>,
    group: Group,
    init: Init,
}

fn layout(cfg: &NetworkConfig) -> (Layout, Vec<Spec>) {
    let d = cfg.d;
    let mut specs = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, group: Group, init: Init| {
        specs.push(Spec { name, shape, group, init });
        ParamId(specs.len() - 1)
    };
    use Group::{Discriminator as D, Generator as G};
    use Init::{Bias, Weight};

    let bilstm = |side: &str, add: &mut dyn FnMut(String, Vec<usize>, Group, Init) -> ParamId| {
        let mut dir = |dir: &str| LstmIds {
            w_x: add(format!("lstm_{side}.{dir}.w_x"), vec![4 * d, d], D, Weight),
            w_h: add(format!("lstm_{side}.{dir}.w_h"), vec![4 * d, d], D, Weight),
            b: add(format!("lstm_{side}.{dir}.b"), vec![4 * d], D, Bias),
        };
        BiLstmIds { fwd: dir("fwd"), bwd: dir("bwd") }
    };
    let left = bilstm("left", &mut add);
    let target = bilstm("target", &mut add);
    let right = bilstm("right", &mut add);

    let h = 2 * d;
    let mut pair = |stem: &str, shape: Vec<usize>, init: Init| {
        [
            add(format!("{stem}.left"), shape.clone(), D, init),
            add(format!("{stem}.right"), shape, D, init),
        ]
    };
    let rotary = RotaryIds {
        w_target2context: pair("rotary.w_t2c", vec![h, h], Weight),
        b_target2context: pair("rotary.b_t2c", vec![], Bias),
        w_context2target: pair("rotary.w_c2t", vec![h, h], Weight),
        b_context2target: pair("rotary.b_c2t", vec![], Bias),
    };
    let hierarchical = HierarchicalIds {
        w_context: add("hier.w_context".into(), vec![h], D, Weight),
        b_context: add("hier.b_context".into(), vec![], D, Bias),
        w_target: add("hier.w_target".into(), vec![h], D, Weight),
        b_target: add("hier.b_target".into(), vec![], D, Bias),
    };
    let head = HeadIds {
        w: add("head.w".into(), vec![NUM_OUTPUTS, cfg.repr_len()], D, Weight),
        b: add("head.b".into(), vec![NUM_OUTPUTS], D, Bias),
    };
    let widths = [cfg.r, 2 * d, 6 * d, 8 * d];
    let mut gw = [ParamId(0); 3];
    let mut gb = [ParamId(0); 3];
    for l in 0..3 {
        gw[l] = add(format!("gen.w{}", l + 1), vec![widths[l + 1], widths[l]], G, Weight);
        gb[l] = add(format!("gen.b{}", l + 1), vec![widths[l + 1]], G, Bias);
    }
    let generator = GeneratorIds { w: gw, b: gb };
    (Layout { left, target, right, rotary, hierarchical, head, generator }, specs)
}

/// Every trainable tensor of the discriminator and the generator.
#[derive(Debug, Clone)]
pub struct ModelParams {
    config: NetworkConfig,
    layout: Layout,
    names: Vec<String>,
    groups: Vec<Group>,
    biases: Vec<bool>,
    tensors: Vec<Tensor>,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.tensors == other.tensors
    }
}

impl ModelParams {
    /// All tensors zero.
    pub fn zeros(config: NetworkConfig) -> Self {
        let (layout, specs) = layout(&config);
        Self {
            config,
            layout,
            names: specs.iter().map(|s| s.name.clone()).collect(),
            groups: specs.iter().map(|s| s.group).collect(),
            biases: specs.iter().map(|s| matches!(s.init, Init::Bias)).collect(),
            tensors: specs.iter().map(|s| Tensor::zeros(&s.shape)).collect(),
        }
    }

    /// Weights from U(−0.01, 0.01), biases zero.
    pub fn init(config: NetworkConfig, seed: u64) -> Self {
        Self::init_uniform(config, seed, 0.01, 0.0)
    }

    /// Weights from U(−weight_scale, weight_scale) and biases from
    /// U(−bias_scale, bias_scale); each tensor draws from its own stream.
    pub fn init_uniform(config: NetworkConfig, seed: u64, weight_scale: f64, bias_scale: f64) -> Self {
        let mut p = Self::zeros(config);
        for (i, t) in p.tensors.iter_mut().enumerate() {
            let scale = if p.biases[i] { bias_scale } else { weight_scale };
            if scale == 0.0 {
                continue;
            }
            let mut r = rng::stream(seed, &[0x1417, i as u64]);
            t.data_mut().iter_mut().for_each(|v| *v = r.random_range(-scale..scale));
        }
        p
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn is_bias(&self, id: ParamId) -> bool {
        self.biases[id.0]
    }

    pub fn group(&self, id: ParamId) -> Group {
        self.groups[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn group_ids(&self, group: Group) -> impl Iterator<Item = ParamId> + '_ {
        self.ids().filter(move |id| self.groups[id.0] == group)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// ‖Θ‖² over one group.
    pub fn norm_sq(&self, group: Group) -> f64 {
        self.group_ids(group).map(|id| self.tensors[id.0].norm_sq()).sum()
    }

    pub fn count(&self, group: Group) -> usize {
        self.group_ids(group).map(|id| self.tensors[id.0].len()).sum()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Replaces a tensor; the shape must match.
    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<(), String> {
        if !value.same_shape(&self.tensors[id.0]) {
            return Err(format!(
                "{}: expected shape {:?}, got {:?}",
                self.names[id.0],
                self.tensors[id.0].shape(),
                value.shape()
            ));
        }
        self.tensors[id.0] = value;
        Ok(())
    }
}
