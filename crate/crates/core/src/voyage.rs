//! Derived, immutable context for one config.

use crate::cargo::{cargo_catalog, revenue_matrix, CargoClass};
use crate::config::VoyageConfig;
use crate::error::Result;
use crate::geometry::{vessel_geometry, VesselGeometry};
use crate::sets::TransportIndex;

/// Everything other modules need that follows from a validated config.
///
/// Flat layouts used throughout:
/// - location `loc = (b * |D| + d) * |BL| + bl`
/// - demand `q = tr * |K| + k`
/// - utilization `u = (loc * |TR| + tr) * |K| + k`
#[derive(Debug, Clone)]
pub struct Voyage {
    pub cfg: VoyageConfig,
    pub ti: TransportIndex,
    pub classes: Vec<CargoClass>,
    pub geometry: VesselGeometry,
    pub capacity: Vec<f64>,
    /// Revenue per (tr, k).
    pub rev: Vec<f64>,
}

impl Voyage {
    pub fn new(cfg: VoyageConfig) -> Result<Self> {
        cfg.validate()?;
        let ti = TransportIndex::new(cfg.n_ports)?;
        let catalog = cargo_catalog();
        let classes: Vec<CargoClass> = match &cfg.classes {
            Some(ids) => ids.iter().map(|&i| catalog[i]).collect(),
            None => catalog,
        };
        let geometry = vessel_geometry(cfg.n_bays, cfg.n_decks);
        let capacity = cfg.capacity_tensor();
        let rev = revenue_matrix(&ti, &classes, cfg.lr, cfg.sr);
        Ok(Self {
            cfg,
            ti,
            classes,
            geometry,
            capacity,
            rev,
        })
    }

    pub fn n_ports(&self) -> usize {
        self.cfg.n_ports
    }
    pub fn n_bays(&self) -> usize {
        self.cfg.n_bays
    }
    pub fn n_decks(&self) -> usize {
        self.cfg.n_decks
    }
    pub fn n_blocks(&self) -> usize {
        self.cfg.n_blocks
    }
    pub fn n_k(&self) -> usize {
        self.classes.len()
    }
    pub fn n_tr(&self) -> usize {
        self.ti.len()
    }
    pub fn n_c(&self) -> usize {
        self.cfg.n_locations()
    }
    pub fn n_q(&self) -> usize {
        self.n_tr() * self.n_k()
    }
    pub fn n_u(&self) -> usize {
        self.n_c() * self.n_q()
    }

    pub fn loc(&self, b: usize, d: usize, bl: usize) -> usize {
        (b * self.n_decks() + d) * self.n_blocks() + bl
    }

    /// `(b, d, bl)` of a location index.
    pub fn loc_parts(&self, loc: usize) -> (usize, usize, usize) {
        let bl = loc % self.n_blocks();
        let rest = loc / self.n_blocks();
        (rest / self.n_decks(), rest % self.n_decks(), bl)
    }

    pub fn qi(&self, tr: usize, k: usize) -> usize {
        tr * self.n_k() + k
    }

    pub fn ui(&self, loc: usize, tr: usize, k: usize) -> usize {
        (loc * self.n_tr() + tr) * self.n_k() + k
    }

    /// Top tier, the only one carried on the hatch covers.
    pub fn on_deck(&self) -> usize {
        self.n_decks() - 1
    }

    /// Whether tier `d` lies below the hatch covers. Single-tier vessels have no hold.
    pub fn is_hold(&self, d: usize) -> bool {
        self.n_decks() > 1 && d < self.on_deck()
    }

    pub fn teu(&self, k: usize) -> f64 {
        self.classes[k].teu
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.classes[k].weight
    }

    pub fn ld_of_loc(&self, loc: usize) -> f64 {
        self.geometry.ld[self.loc_parts(loc).0]
    }

    pub fn vd_of_loc(&self, loc: usize) -> f64 {
        self.geometry.vd[self.loc_parts(loc).1]
    }

    /// Index of the bay-block pair `(b, bl)`.
    pub fn bay_block(&self, b: usize, bl: usize) -> usize {
        b * self.n_blocks() + bl
    }

    pub fn n_bay_blocks(&self) -> usize {
        self.n_bays() * self.n_blocks()
    }

    /// Largest single-location capacity, used to scale observations.
    pub fn max_capacity(&self) -> f64 {
        self.capacity.iter().cloned().fold(0.0, f64::max).max(1.0)
    }

    /// Whole TEU per onboard location sums for `u`.
    pub fn teu_load(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_c()];
        for loc in 0..self.n_c() {
            for tr in 0..self.n_tr() {
                for k in 0..self.n_k() {
                    out[loc] += self.teu(k) * u[self.ui(loc, tr, k)];
                }
            }
        }
        out
    }
}
