use super::Matrix;
use crate::{Error, Result};

/// Mean Huber loss and its gradient with respect to `pred`.
///
/// Per element `r = pred - target`: `0.5 r²` when `|r| <= delta`, else
/// `delta (|r| - 0.5 delta)`.
pub fn huber_loss(pred: &Matrix, target: &Matrix, delta: f64) -> Result<(f64, Matrix)> {
    if !pred.same_shape(target) {
        return Err(Error::ShapeMismatch(format!(
            "huber: prediction {}x{} vs target {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    if delta <= 0.0 || delta.is_nan() {
        return Err(Error::InvalidConfig(format!("huber delta must be positive, got {delta}")));
    }
    let n = pred.len().max(1) as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut total = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let r = p - t;
        if r.abs() <= delta {
            total += 0.5 * r * r;
            *g = r / n;
        } else {
            total += delta * (r.abs() - 0.5 * delta);
            *g = delta * r.signum() / n;
        }
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::row_vector(&[v])
    }

    #[test]
    fn zero_residual() {
        let p = Matrix::row_vector(&[1.0, -2.0, 3.0]);
        let (loss, grad) = huber_loss(&p, &p, 1.0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn quadratic_branch() {
        let (loss, grad) = huber_loss(&scalar(0.5), &scalar(0.0), 1.0).unwrap();
        assert_eq!(loss, 0.125);
        assert_eq!(grad.data(), &[0.5]);
    }

    #[test]
    fn linear_branch() {
        let (loss, grad) = huber_loss(&scalar(2.0), &scalar(0.0), 1.0).unwrap();
        assert_eq!(loss, 1.5);
        assert_eq!(grad.data(), &[1.0]);
        let (_, grad) = huber_loss(&scalar(-2.0), &scalar(0.0), 1.0).unwrap();
        assert_eq!(grad.data(), &[-1.0]);
    }

    #[test]
    fn mean_reduction() {
        let (loss, grad) = huber_loss(&Matrix::row_vector(&[0.5, 2.0]), &Matrix::zeros(1, 2), 1.0).unwrap();
        assert_eq!(loss, (0.125 + 1.5) / 2.0);
        assert_eq!(grad.data(), &[0.25, 0.5]);
    }

    #[test]
    fn smooth_at_delta() {
        let delta = 1.0;
        let f = |r: f64| huber_loss(&scalar(r), &scalar(0.0), delta).unwrap().0;
        // second-order one-sided differences are exact on each branch
        let h = 1e-4;
        let left = (3.0 * f(delta) - 4.0 * f(delta - h) + f(delta - 2.0 * h)) / (2.0 * h);
        let right = (-3.0 * f(delta) + 4.0 * f(delta + h) - f(delta + 2.0 * h)) / (2.0 * h);
        assert!((left - right).abs() < 1e-9, "{left} {right}");
        assert!((f(delta - 1e-12) - f(delta + 1e-12)).abs() < 1e-11);
        let g_in = huber_loss(&scalar(delta), &scalar(0.0), delta).unwrap().1.data()[0];
        let g_out = huber_loss(&scalar(delta + 1e-12), &scalar(0.0), delta).unwrap().1.data()[0];
        assert!((g_in - g_out).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(matches!(huber_loss(&scalar(0.0), &Matrix::zeros(1, 2), 1.0), Err(Error::ShapeMismatch(_))));
        assert!(huber_loss(&scalar(0.0), &scalar(0.0), 0.0).is_err());
    }
}
