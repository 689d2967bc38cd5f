use rand::seq::SliceRandom;

use crate::numerics::seeded_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// 70 / 15 / 15.
    pub fn standard(seed: u64) -> Self {
        SplitSpec { train_frac: 0.70, val_frac: 0.15, test_frac: 0.15, seed }
    }

    /// Part sizes by largest remainder: floor each share, then hand the
    /// leftover records out by descending fractional part, ties going to
    /// train, then val, then test. 10 records give 7 / 2 / 1.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let shares = [self.train_frac, self.val_frac, self.test_frac].map(|f| f * n as f64);
        let mut sizes = shares.map(|s| s.floor() as usize);
        let mut rest = n - sizes.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = shares[a] - shares[a].floor();
            let fb = shares[b] - shares[b].floor();
            fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            sizes[i] += 1;
            rest -= 1;
        }
        sizes
    }

    fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("split fractions {fr:?} must be in [0, 1] and sum to 1")));
        }
        Ok(())
    }
}

/// Seeded shuffle, then contiguous train / val / test cut.
pub fn split<T: Clone>(records: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    spec.validate()?;
    if records.len() < 3 {
        return Err(Error::TooFew(records.len()));
    }
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut seeded_rng(spec.seed));
    let [n_train, n_val, _] = spec.sizes(records.len());
    let take = |range: &[usize]| range.iter().map(|&i| records[i].clone()).collect::<Vec<T>>();
    Ok((take(&idx[..n_train]), take(&idx[n_train..n_train + n_val]), take(&idx[n_train + n_val..])))
}
