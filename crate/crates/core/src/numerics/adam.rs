use super::Matrix;
use crate::{Error, Result};

/// Fixed learning rate used for every training run unless overridden.
pub const DEFAULT_LR: f64 = 2.754e-5;

/// Moment estimates for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        AdamState {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_param(param: &Matrix, lr: f64) -> Self {
        Self::new(param.rows(), param.cols(), lr)
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(param: &mut Matrix, grad: &Matrix, state: &mut AdamState) -> Result<()> {
    if !param.same_shape(grad) || !param.same_shape(&state.m) {
        return Err(Error::ShapeMismatch(format!(
            "adam: param {}x{}, grad {}x{}, state {}x{}",
            param.rows(),
            param.cols(),
            grad.rows(),
            grad.cols(),
            state.m.rows(),
            state.m.cols()
        )));
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let (lr, eps) = (state.lr, state.eps);
    let p = param.data_mut().iter_mut();
    let g = grad.data().iter();
    let m = state.m.data_mut().iter_mut();
    let v = state.v.data_mut().iter_mut();
    for (((p, &g), m), v) in p.zip(g).zip(m).zip(v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        // subnormal moments are numerically irrelevant but very slow
        *m = if m.abs() < f64::MIN_POSITIVE { 0.0 } else { *m };
        *v = if *v < f64::MIN_POSITIVE { 0.0 } else { *v };
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
