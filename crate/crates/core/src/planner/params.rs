use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names of the seven cost terms, in weight order.
pub const COST_NAMES: [&str; 7] = ["mc", "al", "hys", "do", "co", "v1", "v2"];

pub const PARAM_DIM: usize = 8;

/// Lower corner of the parameter box: `[gamma_v, w_mc, ..., w_v2]`.
pub const PARAM_LOWER: [f64; PARAM_DIM] = [0.6, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
pub const PARAM_UPPER: [f64; PARAM_DIM] = [1.0, 10.0, 10.0, 10.0, 10.0, 10.0, 10.0, 10.0];

/// Planner parameterization: global velocity scale plus one weight per cost term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub gamma_v: f64,
    pub weights: [f64; 7],
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self { gamma_v: 1.0, weights: [1.0; 7] }
    }
}

impl PolicyParams {
    pub fn from_array(v: [f64; PARAM_DIM]) -> Self {
        let mut weights = [0.0; 7];
        weights.copy_from_slice(&v[1..]);
        Self { gamma_v: v[0], weights }
    }

    pub fn to_array(&self) -> [f64; PARAM_DIM] {
        let mut v = [0.0; PARAM_DIM];
        v[0] = self.gamma_v;
        v[1..].copy_from_slice(&self.weights);
        v
    }

    /// Checked constructor: every field must lie inside its closed range.
    pub fn new(gamma_v: f64, weights: [f64; 7]) -> Result<Self> {
        let p = Self { gamma_v, weights };
        if !p.in_bounds() {
            return Err(Error::InvalidArgument(format!("policy parameters out of range: {:?}", p.to_array())));
        }
        Ok(p)
    }

    pub fn in_bounds(&self) -> bool {
        self.to_array()
            .iter()
            .zip(PARAM_LOWER.iter().zip(&PARAM_UPPER))
            .all(|(v, (lo, hi))| v.is_finite() && v >= lo && v <= hi)
    }

    pub fn clipped(&self) -> Self {
        let mut v = self.to_array();
        for (i, x) in v.iter_mut().enumerate() {
            *x = x.clamp(PARAM_LOWER[i], PARAM_UPPER[i]);
        }
        Self::from_array(v)
    }

    pub fn with_frozen_gamma(mut self, freeze: bool) -> Self {
        if freeze {
            self.gamma_v = 1.0;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_round_trip_and_bounds() {
        let p = PolicyParams::from_array([0.7, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(PolicyParams::from_array(p.to_array()), p);
        assert!(p.in_bounds());
        assert!(PolicyParams::new(0.5, [1.0; 7]).is_err());
        let c = PolicyParams::from_array([2.0, 0.0, 11.0, 5.0, 5.0, 5.0, 5.0, 5.0]).clipped();
        assert_eq!(c.to_array(), [1.0, 1.0, 10.0, 5.0, 5.0, 5.0, 5.0, 5.0]);
    }
}
