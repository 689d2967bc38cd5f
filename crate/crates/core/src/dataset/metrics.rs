use serde::Serialize;

use super::TargetVector;
use crate::{Error, Result};

/// Mean absolute percentage error per target, plus their mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapeReport {
    pub latency: f64,
    pub memory: f64,
    pub energy: f64,
    pub overall: f64,
}

pub fn mape(preds: &[TargetVector], actuals: &[TargetVector]) -> Result<MapeReport> {
    if preds.len() != actuals.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: actuals.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sums = [0.0; 3];
    for (i, (p, a)) in preds.iter().zip(actuals).enumerate() {
        let (p, a) = (p.as_array(), a.as_array());
        for t in 0..3 {
            if a[t] == 0.0 {
                return Err(Error::ZeroActual { target: TargetVector::NAMES[t], index: i });
            }
            sums[t] += (p[t] - a[t]).abs() / a[t].abs();
        }
    }
    let n = preds.len() as f64;
    let [latency, memory, energy] = sums.map(|s| s / n);
    Ok(MapeReport { latency, memory, energy, overall: (latency + memory + energy) / 3.0 })
}
