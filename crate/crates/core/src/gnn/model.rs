use rand::Rng as _;

use crate::dataset::{DatasetRecord, TargetVector};
use crate::featurize::{StaticFeatures, FEATURE_WIDTH, STATIC_WIDTH};
use crate::graph_ir::VOCAB_VERSION;
use crate::numerics::{Matrix, Rng};
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 512;
pub const DEFAULT_DROPOUT: f64 = 0.05;
pub const SAGE_BLOCKS: usize = 3;
pub const FC_BLOCKS: usize = 3;
pub const TARGETS: usize = 3;

/// Mean-aggregator graphSAGE layer:
/// `h'_v = relu(h_v W_self + mean_{u -> v} h_u W_neigh + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayer {
    pub w_self: Matrix,
    pub w_neigh: Matrix,
    pub bias: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl SageLayer {
    fn init(d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        // self and neighbour terms are summed, so fan-in counts both
        let bound = (6.0 / (2 * d_in) as f64).sqrt();
        SageLayer {
            w_self: uniform(d_in, d_out, bound, rng),
            w_neigh: uniform(d_in, d_out, bound, rng),
            bias: Matrix::zeros(1, d_out),
        }
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        SageLayer {
            w_self: Matrix::zeros(d_in, d_out),
            w_neigh: Matrix::zeros(d_in, d_out),
            bias: Matrix::zeros(1, d_out),
        }
    }

    pub fn out_width(&self) -> usize {
        self.w_self.cols()
    }
}

impl DenseLayer {
    fn init(d_in: usize, d_out: usize, bound: f64, rng: &mut Rng) -> Self {
        DenseLayer { weight: uniform(d_in, d_out, bound, rng), bias: Matrix::zeros(1, d_out) }
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        DenseLayer { weight: Matrix::zeros(d_in, d_out), bias: Matrix::zeros(1, d_out) }
    }
}

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized buffer")
}

fn mean_std<const N: usize>(rows: impl Iterator<Item = [f64; N]>) -> ([f64; N], [f64; N]) {
    let rows: Vec<[f64; N]> = rows.collect();
    let n = rows.len().max(1) as f64;
    let mut mean = [0.0; N];
    for r in &rows {
        for i in 0..N {
            mean[i] += r[i];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = [0.0; N];
    for r in &rows {
        for i in 0..N {
            std[i] += (r[i] - mean[i]).powi(2);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if s.is_nan() || *s <= 1e-12 {
            *s = 1.0;
        }
    }
    (mean, std)
}

/// Z-scores for the static features and for the natural log of each target.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub target_mean: [f64; TARGETS],
    pub target_std: [f64; TARGETS],
    pub static_mean: [f64; STATIC_WIDTH],
    pub static_std: [f64; STATIC_WIDTH],
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer {
            target_mean: [0.0; TARGETS],
            target_std: [1.0; TARGETS],
            static_mean: [0.0; STATIC_WIDTH],
            static_std: [1.0; STATIC_WIDTH],
        }
    }
}

impl Normalizer {
    /// Fits on the given records; constant columns get stddev 1.
    pub fn fit(records: &[DatasetRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (target_mean, target_std) = mean_std(records.iter().map(|r| r.target.as_array().map(f64::ln)));
        let (static_mean, static_std) = mean_std(records.iter().map(|r| r.fs.as_vector()));
        Ok(Normalizer { target_mean, target_std, static_mean, static_std })
    }

    pub fn normalize_target(&self, y: &TargetVector) -> [f64; TARGETS] {
        let raw = y.as_array();
        std::array::from_fn(|i| (raw[i].ln() - self.target_mean[i]) / self.target_std[i])
    }

    pub fn denormalize_target(&self, z: [f64; TARGETS]) -> TargetVector {
        let v: [f64; TARGETS] = std::array::from_fn(|i| (z[i] * self.target_std[i] + self.target_mean[i]).exp());
        TargetVector::from_array(v)
    }

    pub fn normalize_static(&self, fs: &StaticFeatures) -> [f64; STATIC_WIDTH] {
        let raw = fs.as_vector();
        std::array::from_fn(|i| (raw[i] - self.static_mean[i]) / self.static_std[i])
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let stds = self.target_std.iter().chain(&self.static_std);
        let all = self.target_mean.iter().chain(&self.static_mean).chain(stds.clone());
        if all.clone().any(|v| !v.is_finite()) || stds.clone().any(|&s| s <= 0.0) {
            return Err(Error::InvalidConfig("normalizer needs finite values and positive stddevs".into()));
        }
        Ok(())
    }
}

/// Which body feeds the fully connected head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Three graphSAGE blocks, mean readout, concatenated with static features.
    Sage,
    /// Static features only (the baseline).
    Mlp,
}

/// All trainable parameters plus the fitted normalizer.
///
/// `sage` is empty for the MLP baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct DippmModel {
    pub sage: Vec<SageLayer>,
    pub fc: Vec<DenseLayer>,
    pub hidden: usize,
    pub dropout_p: f64,
    pub normalizer: Normalizer,
    pub vocab_version: String,
}

impl DippmModel {
    pub fn new(arch: Architecture, hidden: usize, rng: &mut Rng) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidConfig("hidden width must be positive".into()));
        }
        let sage = match arch {
            Architecture::Sage => (0..SAGE_BLOCKS)
                .map(|i| SageLayer::init(if i == 0 { FEATURE_WIDTH } else { hidden }, hidden, rng))
                .collect(),
            Architecture::Mlp => Vec::new(),
        };
        let head_in = Self::head_input_width(arch, hidden);
        let relu_bound = |fan_in: usize| (6.0 / fan_in as f64).sqrt();
        let fc = vec![
            DenseLayer::init(head_in, hidden, relu_bound(head_in), rng),
            DenseLayer::init(hidden, hidden, relu_bound(hidden), rng),
            DenseLayer::init(hidden, TARGETS, (6.0 / (hidden + TARGETS) as f64).sqrt(), rng),
        ];
        Ok(DippmModel {
            sage,
            fc,
            hidden,
            dropout_p: DEFAULT_DROPOUT,
            normalizer: Normalizer::default(),
            vocab_version: VOCAB_VERSION.to_string(),
        })
    }

    /// Every weight and bias set to zero.
    pub fn zeros(arch: Architecture, hidden: usize) -> Self {
        let sage = match arch {
            Architecture::Sage => (0..SAGE_BLOCKS)
                .map(|i| SageLayer::zeros(if i == 0 { FEATURE_WIDTH } else { hidden }, hidden))
                .collect(),
            Architecture::Mlp => Vec::new(),
        };
        let head_in = Self::head_input_width(arch, hidden);
        DippmModel {
            sage,
            fc: vec![
                DenseLayer::zeros(head_in, hidden),
                DenseLayer::zeros(hidden, hidden),
                DenseLayer::zeros(hidden, TARGETS),
            ],
            hidden,
            dropout_p: DEFAULT_DROPOUT,
            normalizer: Normalizer::default(),
            vocab_version: VOCAB_VERSION.to_string(),
        }
    }

    fn head_input_width(arch: Architecture, hidden: usize) -> usize {
        match arch {
            Architecture::Sage => hidden + STATIC_WIDTH,
            Architecture::Mlp => STATIC_WIDTH,
        }
    }

    pub fn architecture(&self) -> Architecture {
        if self.sage.is_empty() {
            Architecture::Mlp
        } else {
            Architecture::Sage
        }
    }

    /// Parameter names and matrices in canonical order.
    pub fn named_params(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (i, l) in self.sage.iter().enumerate() {
            out.push((format!("sage{i}.w_self"), &l.w_self));
            out.push((format!("sage{i}.w_neigh"), &l.w_neigh));
            out.push((format!("sage{i}.bias"), &l.bias));
        }
        for (i, l) in self.fc.iter().enumerate() {
            out.push((format!("fc{i}.weight"), &l.weight));
            out.push((format!("fc{i}.bias"), &l.bias));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for l in &mut self.sage {
            out.push(&mut l.w_self);
            out.push(&mut l.w_neigh);
            out.push(&mut l.bias);
        }
        for l in &mut self.fc {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.named_params().iter().flat_map(|(_, m)| m.data().iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::LengthMismatch { left: flat.len(), right: self.param_count() });
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Checks that layer shapes chain into a 3-wide output.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ShapeMismatch(msg));
        let mut width = FEATURE_WIDTH;
        if !self.sage.is_empty() && self.sage.len() != SAGE_BLOCKS {
            return bad(format!("expected {SAGE_BLOCKS} sage blocks, got {}", self.sage.len()));
        }
        for (i, l) in self.sage.iter().enumerate() {
            let d_out = l.w_self.cols();
            if l.w_self.rows() != width
                || !l.w_neigh.same_shape(&l.w_self)
                || l.bias.rows() != 1
                || l.bias.cols() != d_out
            {
                return bad(format!("sage{i} does not chain from width {width}"));
            }
            width = d_out;
        }
        width = if self.sage.is_empty() { STATIC_WIDTH } else { width + STATIC_WIDTH };
        if self.fc.len() != FC_BLOCKS {
            return bad(format!("expected {FC_BLOCKS} fc blocks, got {}", self.fc.len()));
        }
        for (i, l) in self.fc.iter().enumerate() {
            let d_out = l.weight.cols();
            if l.weight.rows() != width || l.bias.rows() != 1 || l.bias.cols() != d_out {
                return bad(format!("fc{i} does not chain from width {width}"));
            }
            width = d_out;
        }
        if width != TARGETS {
            return bad(format!("output width {width}, expected {TARGETS}"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout_p)));
        }
        self.normalizer.validate()
    }
}
