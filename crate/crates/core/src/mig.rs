//! A100 Multi-Instance GPU profile from a predicted memory footprint.
//!
//! The prediction is treated as an upper bound, so each profile covers the
//! half-open interval `(previous cap, own cap]` in MB (1 GB = 1024 MB):
//!
//! | memory (MB)        | profile   |
//! |--------------------|-----------|
//! | (0, 5120]          | 1g.5gb    |
//! | (5120, 10240]      | 2g.10gb   |
//! | (10240, 20480]     | 3g.20gb   |
//! | (20480, 40960]     | 7g.40gb   |
//! | otherwise          | none      |

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MigProfile {
    G1Gb5,
    G2Gb10,
    G3Gb20,
    G7Gb40,
}

impl MigProfile {
    /// Smallest first.
    pub const ALL: [MigProfile; 4] = [MigProfile::G1Gb5, MigProfile::G2Gb10, MigProfile::G3Gb20, MigProfile::G7Gb40];

    pub fn max_memory_mb(self) -> f64 {
        match self {
            MigProfile::G1Gb5 => 5120.0,
            MigProfile::G2Gb10 => 10240.0,
            MigProfile::G3Gb20 => 20480.0,
            MigProfile::G7Gb40 => 40960.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MigProfile::G1Gb5 => "1g.5gb",
            MigProfile::G2Gb10 => "2g.10gb",
            MigProfile::G3Gb20 => "3g.20gb",
            MigProfile::G7Gb40 => "7g.40gb",
        }
    }
}

impl fmt::Display for MigProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MigProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MigProfile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown MIG profile `{s}`")))
    }
}

impl Serialize for MigProfile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Smallest profile whose cap is at least `alpha_mb`; `None` for
/// `alpha_mb <= 0` or above the largest cap.
pub fn mig_profile(alpha_mb: f64) -> Result<Option<MigProfile>> {
    if !alpha_mb.is_finite() {
        return Err(Error::NonFinite(format!("memory {alpha_mb} MB")));
    }
    if alpha_mb <= 0.0 {
        return Ok(None);
    }
    Ok(MigProfile::ALL.into_iter().find(|p| alpha_mb <= p.max_memory_mb()))
}
