//! Spatial-temporal constraint on classifier output.
//!
//! Given the previously decided zone `m`, each candidate zone `n` is weighted
//! by `k^(-d(m, n) / dt)` where `d` is the hop distance. The constrained
//! distribution is the classifier's probabilities times those weights,
//! renormalized. `k = 1` leaves the decision unchanged; large `k` pins the
//! decision to the previous zone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::argmax;
use crate::zone_graph::{ZoneGraph, ZoneId};

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("mobility parameter k must be >= 1, got {0}")]
    K(f64),
    #[error("time step must be positive, got {0}")]
    DeltaT(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    /// How slowly tags move: 1 disables the constraint, infinity freezes it.
    pub k: f64,
    /// Seconds between the previous decision and this one.
    pub delta_t: f64,
}

impl ConstraintParams {
    pub fn new(k: f64, delta_t: f64) -> Result<Self, ConstraintError> {
        if !(k >= 1.0) {
            return Err(ConstraintError::K(k));
        }
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(ConstraintError::DeltaT(delta_t));
        }
        Ok(ConstraintParams { k, delta_t })
    }

    pub fn disabled() -> Self {
        ConstraintParams { k: 1.0, delta_t: crate::STEP_SECONDS }
    }
}

impl Default for ConstraintParams {
    fn default() -> Self {
        ConstraintParams { k: 40.0, delta_t: crate::STEP_SECONDS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDecision {
    pub constrained: Vec<f64>,
    pub chosen: ZoneId,
    /// No zone reachable from `prev` had positive probability; `constrained`
    /// is the raw distribution and the caller should forget `prev`.
    pub degenerate: bool,
}

/// Unnormalized weights `k^(-d(prev, n) / dt)`; unreachable zones get 0.
pub fn conditional_weights(g: &ZoneGraph, prev: ZoneId, params: &ConstraintParams) -> Vec<f64> {
    g.zones()
        .map(|n| match g.distance(prev, n) {
            Some(0) => 1.0,
            Some(d) => params.k.powf(-(d as f64) / params.delta_t),
            None => 0.0,
        })
        .collect()
}

/// Re-weights `probs` by the hop distance from `prev` and picks the most probable zone.
pub fn apply_constraint(probs: &[f64], prev: ZoneId, g: &ZoneGraph, params: &ConstraintParams) -> PosteriorDecision {
    assert_eq!(probs.len(), g.zone_count(), "one probability per zone");
    let weights = conditional_weights(g, prev, params);
    let product: Vec<f64> = probs.iter().zip(&weights).map(|(p, w)| p * w).collect();
    let total: f64 = product.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return PosteriorDecision { constrained: probs.to_vec(), chosen: ZoneId(argmax(probs)), degenerate: true };
    }
    let constrained: Vec<f64> = product.into_iter().map(|v| v / total).collect();
    let chosen = ZoneId(argmax(&constrained));
    PosteriorDecision { constrained, chosen, degenerate: false }
}
