//! Min-max feature scaling into [0.1, 0.9].
//!
//! All three temperature channels (zone, neighbor, outdoor) share one
//! range so that temperature *differences* keep a common scale — the
//! model's energy balance depends on them. Solar gets its own range.

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};

pub const TARGET_LO: f64 = 0.1;
pub const TARGET_HI: f64 = 0.9;

/// One feature's affine map onto [0.1, 0.9].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(max > min) {
            return Err(Error::InvalidConfig(format!(
                "constant feature: min {min} >= max {max}"
            )));
        }
        Ok(Self { min, max })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        TARGET_LO + (x - self.min) * (TARGET_HI - TARGET_LO) / (self.max - self.min)
    }

    #[inline]
    pub fn invert(&self, y: f64) -> f64 {
        self.min + (y - TARGET_LO) * (self.max - self.min) / (TARGET_HI - TARGET_LO)
    }

    /// Normalized units per physical unit.
    #[inline]
    pub fn scale(&self) -> f64 {
        (TARGET_HI - TARGET_LO) / (self.max - self.min)
    }

    /// Physical units per normalized unit (for converting differences and
    /// noise, which have no offset).
    #[inline]
    pub fn inv_scale(&self) -> f64 {
        (self.max - self.min) / (TARGET_HI - TARGET_LO)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    /// Shared range for zone, neighbor, and outdoor temperature.
    pub temperature: MinMax,
    pub solar: MinMax,
}

/// Fit ranges on training trajectories only.
pub fn fit_normalizer(train: &[Trajectory]) -> Result<Normalizer> {
    if train.is_empty() {
        return Err(Error::Data("cannot fit normalizer on empty set".into()));
    }
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    for traj in train {
        for r in &traj.records {
            for t in [r.t_zone, r.t_neigh, r.t_out] {
                t_min = t_min.min(t);
                t_max = t_max.max(t);
            }
            s_min = s_min.min(r.solar);
            s_max = s_max.max(r.solar);
        }
    }
    Ok(Normalizer {
        temperature: MinMax::new(t_min, t_max)?,
        solar: MinMax::new(s_min, s_max)?,
    })
}
