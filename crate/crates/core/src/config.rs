//! Static voyage parameters and their file format.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, StowError};

/// All static parameters of a master planning instance.
///
/// Loaded from TOML with keys named exactly like the fields. Missing keys fall
/// back to the defaults of the 20-bay reference vessel; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoyageConfig {
    pub n_ports: usize,
    pub n_bays: usize,
    pub n_decks: usize,
    pub n_blocks: usize,
    /// Total vessel TEU. Spread uniformly over locations unless `capacity` is set.
    pub total_teu: f64,
    /// Optional explicit TEU capacity per location, ordered (bay, deck, block).
    pub capacity: Option<Vec<f64>>,
    /// Optional subset of catalog ids; `None` uses all 12 classes.
    pub classes: Option<Vec<usize>>,
    pub lr: f64,
    pub sr: f64,
    pub ur: f64,
    pub lcg_lb: f64,
    pub lcg_ub: f64,
    pub vcg_lb: f64,
    pub vcg_ub: f64,
    pub delta_cm: f64,
    pub ct_ho: f64,
    pub ct_cm: f64,
    pub big_m: f64,
    pub rho: f64,
    pub feas_tol: f64,
}

impl Default for VoyageConfig {
    fn default() -> Self {
        Self::paper(4)
    }
}

impl VoyageConfig {
    /// Reference vessel: 20 bays, 2 decks, 2 blocks, 20,000 TEU, all 12 classes.
    pub fn paper(n_ports: usize) -> Self {
        Self {
            n_ports,
            n_bays: 20,
            n_decks: 2,
            n_blocks: 2,
            total_teu: 20_000.0,
            capacity: None,
            classes: None,
            lr: 0.3,
            sr: 1.0,
            ur: 1.1,
            lcg_lb: 0.85,
            lcg_ub: 1.05,
            vcg_lb: 0.95,
            vcg_ub: 1.15,
            delta_cm: 0.25,
            ct_ho: 0.33,
            ct_cm: 0.5,
            big_m: 1e6,
            rho: 0.1,
            feas_tol: 1e-4,
        }
    }

    /// Desk-scale instance: 3 ports, 2 bays, 2 decks, 1 block, 16 TEU,
    /// classes (20ft, Light, Spot) and (40ft, Heavy, Long).
    pub fn mini() -> Self {
        Self {
            n_ports: 3,
            n_bays: 2,
            n_decks: 2,
            n_blocks: 1,
            total_teu: 16.0,
            classes: Some(vec![0, 11]),
            ..Self::paper(3)
        }
    }

    /// Single-transport toy: 2 ports, 2 bays, 1 deck, 1 class, capacity well
    /// above demand and wide LCG bounds.
    pub fn toy() -> Self {
        Self {
            n_ports: 2,
            n_bays: 2,
            n_decks: 1,
            n_blocks: 1,
            total_teu: 40.0,
            classes: Some(vec![2]),
            ur: 0.25,
            lcg_lb: 0.45,
            lcg_ub: 1.55,
            vcg_lb: 0.5,
            vcg_ub: 1.5,
            ..Self::paper(2)
        }
    }

    /// Looks up a named preset: `paper`, `mini` or `toy`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper(4)),
            "mini" => Ok(Self::mini()),
            "toy" => Ok(Self::toy()),
            other => Err(StowError::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| StowError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn n_locations(&self) -> usize {
        self.n_bays * self.n_decks * self.n_blocks
    }

    /// Capacity tensor in (bay, deck, block) order.
    pub fn capacity_tensor(&self) -> Vec<f64> {
        match &self.capacity {
            Some(c) => c.clone(),
            None => vec![self.total_teu / self.n_locations() as f64; self.n_locations()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(StowError::InvalidConfig(msg));
        if self.n_ports < 2 {
            return bad(format!("n_ports must be >= 2, got {}", self.n_ports));
        }
        if self.n_bays < 2 || self.n_bays % 2 != 0 {
            return bad(format!("n_bays must be even and >= 2, got {}", self.n_bays));
        }
        if self.n_decks < 1 || self.n_blocks < 1 {
            return bad("n_decks and n_blocks must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.lr) {
            return bad(format!("lr must lie in [0,1), got {}", self.lr));
        }
        if !(0.0 < self.lcg_lb && self.lcg_lb < self.lcg_ub) {
            return bad("need 0 < lcg_lb < lcg_ub".into());
        }
        if !(0.0 < self.vcg_lb && self.vcg_lb < self.vcg_ub) {
            return bad("need 0 < vcg_lb < vcg_ub".into());
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0,1), got {}", self.rho));
        }
        if self.delta_cm < 0.0 {
            return bad("delta_cm must be >= 0".into());
        }
        if self.ur < 0.0 || self.sr < 0.0 || self.ct_ho < 0.0 || self.ct_cm < 0.0 {
            return bad("ur, sr, ct_ho and ct_cm must be >= 0".into());
        }
        if !(self.feas_tol > 0.0) || !(self.big_m > 0.0) {
            return bad("feas_tol and big_m must be > 0".into());
        }
        if !(self.total_teu >= 0.0) || !self.total_teu.is_finite() {
            return bad("total_teu must be finite and >= 0".into());
        }
        if let Some(c) = &self.capacity {
            if c.len() != self.n_locations() {
                return bad(format!(
                    "capacity has {} entries, expected {}",
                    c.len(),
                    self.n_locations()
                ));
            }
            if c.iter().any(|&v| !(v >= 0.0) || v.fract() != 0.0) {
                return bad("capacity entries must be nonnegative integers".into());
            }
            let sum: f64 = c.iter().sum();
            if (sum - self.total_teu).abs() > 1e-9 * sum.max(1.0) {
                return bad(format!(
                    "capacity sums to {sum} but total_teu is {}",
                    self.total_teu
                ));
            }
        }
        if let Some(ks) = &self.classes {
            if ks.is_empty() {
                return bad("classes must not be empty".into());
            }
            let mut seen = [false; 12];
            for &k in ks {
                if k >= 12 || seen[k] {
                    return bad(format!("class id {k} is out of range or repeated"));
                }
                seen[k] = true;
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form. Identifies the config in every
    /// artifact and checkpoint.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let out = Sha256::digest(bytes);
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in ["paper", "mini", "toy"] {
            VoyageConfig::preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip_keeps_digest() {
        let cfg = VoyageConfig::mini();
        let text = cfg.to_toml_string();
        let back = VoyageConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.digest(), back.digest());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = VoyageConfig::from_toml_str("n_ports = 3\nbogus = 1\n").unwrap_err();
        assert_eq!(err.kind(), "invalid_config");
    }

    #[test]
    fn missing_keys_take_defaults() {
        let cfg = VoyageConfig::from_toml_str("n_ports = 5\n").unwrap();
        assert_eq!(cfg.n_ports, 5);
        assert_eq!(cfg.n_bays, 20);
        assert_eq!(cfg.ct_cm, 0.5);
    }

    #[test]
    fn invariants_enforced() {
        let mut cfg = VoyageConfig::mini();
        cfg.n_bays = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = VoyageConfig::mini();
        cfg.lr = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = VoyageConfig::mini();
        cfg.capacity = Some(vec![4.0, 4.0, 4.0, 5.0]);
        assert!(cfg.validate().is_err());
        cfg.capacity = Some(vec![4.0, 4.0, 4.0, 4.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn uniform_capacity() {
        let cfg = VoyageConfig::mini();
        assert_eq!(cfg.capacity_tensor(), vec![4.0; 4]);
    }
}
