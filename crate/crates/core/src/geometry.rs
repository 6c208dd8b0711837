//! Longitudinal and vertical lever arms.

use serde::{Deserialize, Serialize};

/// Normalized distances with the vessel center at 1.
///
/// Bays run fore to aft; deck index 0 is the lowest hold tier and the last
/// index is on deck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselGeometry {
    pub ld: Vec<f64>,
    pub vd: Vec<f64>,
}

pub fn vessel_geometry(n_bays: usize, n_decks: usize) -> VesselGeometry {
    let arm = |n: usize| -> Vec<f64> { (1..=n).map(|i| (2 * i - 1) as f64 / n as f64).collect() };
    VesselGeometry {
        ld: arm(n_bays),
        vd: arm(n_decks),
    }
}
