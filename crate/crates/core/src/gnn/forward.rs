//! Forward pass with activation cache, and exact reverse-mode gradients.

use super::model::{DippmModel, TARGETS};
use crate::dataset::DatasetRecord;
use crate::featurize::{GraphEncoding, StaticFeatures};
use crate::numerics::{dropout_mask, huber_loss, Matrix, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active.
    Train,
    /// Deterministic.
    Eval,
}

/// Predecessor lists for mean aggregation over producer -> consumer edges.
struct Neighbourhood {
    preds: Vec<Vec<usize>>,
}

impl Neighbourhood {
    fn new(enc: &GraphEncoding) -> Self {
        let mut preds = vec![Vec::new(); enc.num_nodes];
        for &(s, d) in &enc.edges {
            preds[d].push(s);
        }
        Neighbourhood { preds }
    }

    /// Row v of the result is the mean of `h` over v's predecessors (zero if none).
    fn aggregate(&self, h: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(h.rows(), h.cols());
        for (v, preds) in self.preds.iter().enumerate() {
            if preds.is_empty() {
                continue;
            }
            let inv = 1.0 / preds.len() as f64;
            let row = out.row_mut(v);
            for &u in preds {
                for (o, &x) in row.iter_mut().zip(h.row(u)) {
                    *o += x;
                }
            }
            row.iter_mut().for_each(|o| *o *= inv);
        }
        out
    }

    /// Adjoint of [`Self::aggregate`], accumulated into `dh`.
    fn scatter(&self, d_agg: &Matrix, dh: &mut Matrix) {
        for (v, preds) in self.preds.iter().enumerate() {
            if preds.is_empty() {
                continue;
            }
            let inv = 1.0 / preds.len() as f64;
            for &u in preds {
                let src = d_agg.row(v);
                for (o, &g) in dh.row_mut(u).iter_mut().zip(src) {
                    *o += g * inv;
                }
            }
        }
    }
}

struct SageCache {
    input: Matrix,
    agg: Matrix,
    pre: Matrix,
}

pub(crate) struct Cache {
    nbh: Option<Neighbourhood>,
    sage: Vec<SageCache>,
    num_nodes: usize,
    head_in: Matrix,
    pre: [Matrix; 2],
    masks: [Matrix; 2],
    dropped: [Matrix; 2],
}

fn relu_mask_mul(grad: &mut Matrix, pre: &Matrix) {
    for (g, &p) in grad.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Mean over node rows.
pub fn readout_mean(z: &Matrix) -> Result<Matrix> {
    if z.rows() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(z.sum_rows().scale(1.0 / z.rows() as f64))
}

/// One graphSAGE block.
pub fn sage_forward(enc: &GraphEncoding, layer: &super::SageLayer, h_in: &Matrix) -> Result<Matrix> {
    if h_in.rows() != enc.num_nodes {
        return Err(Error::ShapeMismatch(format!("{} feature rows for {} nodes", h_in.rows(), enc.num_nodes)));
    }
    let nbh = Neighbourhood::new(enc);
    Ok(sage_pre(&nbh, layer, h_in)?.1.relu())
}

fn sage_pre(nbh: &Neighbourhood, layer: &super::SageLayer, h: &Matrix) -> Result<(Matrix, Matrix)> {
    let agg = nbh.aggregate(h);
    let mut pre = h.matmul(&layer.w_self)?;
    agg.matmul_acc(&layer.w_neigh, &mut pre)?;
    pre.add_row_broadcast(&layer.bias)?;
    Ok((agg, pre))
}

pub(crate) fn forward_cached(
    model: &DippmModel,
    enc: &GraphEncoding,
    fs: &StaticFeatures,
    mode: Mode,
    rng: &mut Rng,
) -> Result<([f64; TARGETS], Cache)> {
    let fs_norm = model.normalizer.normalize_static(fs);
    let (head_in, nbh, sage, num_nodes) = if model.sage.is_empty() {
        (Matrix::row_vector(&fs_norm), None, Vec::new(), enc.num_nodes)
    } else {
        if enc.num_nodes == 0 {
            return Err(Error::EmptyGraph);
        }
        if enc.features.rows() != enc.num_nodes {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows for {} nodes",
                enc.features.rows(),
                enc.num_nodes
            )));
        }
        let nbh = Neighbourhood::new(enc);
        let mut h = enc.features.clone();
        let mut caches = Vec::with_capacity(model.sage.len());
        for layer in &model.sage {
            let (agg, pre) = sage_pre(&nbh, layer, &h)?;
            let next = pre.relu();
            caches.push(SageCache { input: h, agg, pre });
            h = next;
        }
        let pooled = readout_mean(&h)?;
        let mut cat = pooled.into_data();
        cat.extend_from_slice(&fs_norm);
        (Matrix::row_vector(&cat), Some(nbh), caches, enc.num_nodes)
    };

    let mut masks = Vec::with_capacity(2);
    let mut pres = Vec::with_capacity(2);
    let mut dropped = Vec::with_capacity(2);
    let mut x = head_in.clone();
    for layer in &model.fc[..2] {
        let mut pre = x.matmul(&layer.weight)?;
        pre.add_row_broadcast(&layer.bias)?;
        let p = if mode == Mode::Train { model.dropout_p } else { 0.0 };
        let mask = dropout_mask(1, pre.cols(), p, rng)?;
        let out = pre.relu().hadamard(&mask)?;
        pres.push(pre);
        masks.push(mask);
        dropped.push(out.clone());
        x = out;
    }
    let last = &model.fc[2];
    let mut out = x.matmul(&last.weight)?;
    out.add_row_broadcast(&last.bias)?;
    let y: [f64; TARGETS] = out.data().try_into().map_err(|_| Error::ShapeMismatch("output width".into()))?;

    let pair = |mut v: Vec<Matrix>| -> [Matrix; 2] {
        let b = v.pop().expect("two blocks");
        let a = v.pop().expect("two blocks");
        [a, b]
    };
    let cache = Cache { nbh, sage, num_nodes, head_in, pre: pair(pres), masks: pair(masks), dropped: pair(dropped) };
    Ok((y, cache))
}

/// Prediction in normalized target space.
pub fn forward(
    model: &DippmModel,
    enc: &GraphEncoding,
    fs: &StaticFeatures,
    mode: Mode,
    rng: &mut Rng,
) -> Result<[f64; TARGETS]> {
    forward_cached(model, enc, fs, mode, rng).map(|(y, _)| y)
}

/// Gradients for one forward pass given `d_out = dL/dy`, accumulated into
/// `grads` (same order as [`DippmModel::named_params`]).
pub(crate) fn backward_cached(model: &DippmModel, cache: &Cache, d_out: &Matrix, grads: &mut [Matrix]) -> Result<()> {
    let n_sage = model.sage.len() * 3;
    let fc_grads = &mut grads[n_sage..];

    let last = &model.fc[2];
    cache.dropped[1].matmul_tn_acc(d_out, &mut fc_grads[4])?;
    fc_grads[5].add_assign(d_out)?;
    let mut d = d_out.matmul_nt(&last.weight)?;

    for i in (0..2).rev() {
        let mut dz = d.hadamard(&cache.masks[i])?;
        relu_mask_mul(&mut dz, &cache.pre[i]);
        let input = if i == 0 { &cache.head_in } else { &cache.dropped[0] };
        input.matmul_tn_acc(&dz, &mut fc_grads[2 * i])?;
        fc_grads[2 * i + 1].add_assign(&dz)?;
        if i == 0 && model.sage.is_empty() {
            return Ok(());
        }
        d = dz.matmul_nt(&model.fc[i].weight)?;
    }

    // d is dL/d(head input); the first `hidden` entries belong to the readout
    let width = model.sage.last().expect("sage model").out_width();
    let n = cache.num_nodes;
    let inv_n = 1.0 / n as f64;
    let mut dh = Matrix::zeros(n, width);
    for r in 0..n {
        for (o, &g) in dh.row_mut(r).iter_mut().zip(&d.data()[..width]) {
            *o = g * inv_n;
        }
    }
    let nbh = cache.nbh.as_ref().expect("sage cache");
    for l in (0..model.sage.len()).rev() {
        let layer = &model.sage[l];
        let c = &cache.sage[l];
        relu_mask_mul(&mut dh, &c.pre);
        let g = &mut grads[3 * l..3 * l + 3];
        c.input.matmul_tn_acc(&dh, &mut g[0])?;
        c.agg.matmul_tn_acc(&dh, &mut g[1])?;
        g[2].add_assign(&dh.sum_rows())?;
        if l == 0 {
            break;
        }
        let mut d_in = dh.matmul_nt(&layer.w_self)?;
        let d_agg = dh.matmul_nt(&layer.w_neigh)?;
        nbh.scatter(&d_agg, &mut d_in);
        dh = d_in;
    }
    Ok(())
}

pub fn zero_grads(model: &DippmModel) -> Vec<Matrix> {
    model.named_params().iter().map(|(_, m)| Matrix::zeros(m.rows(), m.cols())).collect()
}

/// Mean Huber loss over `batch` (targets in normalized space) and its exact
/// gradient with respect to every parameter.
pub fn backward(
    model: &DippmModel,
    batch: &[&DatasetRecord],
    mode: Mode,
    huber_delta: f64,
    rng: &mut Rng,
) -> Result<(f64, Vec<Matrix>)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut grads = zero_grads(model);
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for rec in batch {
        let (y, cache) = forward_cached(model, &rec.encoding, &rec.fs, mode, rng)?;
        let target = Matrix::row_vector(&model.normalizer.normalize_target(&rec.target));
        let (l, mut d_out) = huber_loss(&Matrix::row_vector(&y), &target, huber_delta)?;
        d_out.scale_assign(scale);
        loss += l * scale;
        backward_cached(model, &cache, &d_out, &mut grads)?;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    Ok((loss, grads))
}
