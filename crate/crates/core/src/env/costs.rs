//! Per-port cost and stability evaluators.

use serde::{Deserialize, Serialize};

use crate::voyage::Voyage;

/// How excess crane moves are aggregated over adjacent bay pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmConvention {
    /// Sum of positive parts over all pairs (environment reward).
    PairSum,
    /// Largest positive part over pairs (one excess variable per port, as in the MIP).
    SingleMax,
}

/// Container moves per location at one port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortMoves {
    pub load: Vec<f64>,
    pub discharge: Vec<f64>,
}

impl PortMoves {
    pub fn total_at(&self, loc: usize) -> f64 {
        self.load[loc] + self.discharge[loc]
    }

    pub fn per_location(&self) -> Vec<f64> {
        (0..self.load.len()).map(|l| self.total_at(l)).collect()
    }
}

/// Loads at `p` read from the post-load utilization; discharges passed in.
pub fn port_moves(voyage: &Voyage, u: &[f64], p: usize, discharge: &[f64]) -> PortMoves {
    let mut load = vec![0.0; voyage.n_c()];
    if p < voyage.n_ports() {
        let trs = voyage.ti.load(p);
        for (loc, slot) in load.iter_mut().enumerate() {
            for &tr in &trs {
                for k in 0..voyage.n_k() {
                    *slot += u[voyage.ui(loc, tr, k)];
                }
            }
        }
    }
    PortMoves {
        load,
        discharge: discharge.to_vec(),
    }
}

/// Hatch movement and overstowage per bay-block at port `p`.
///
/// A hatch opens when any hold tier of the bay-block has moves above `tol`;
/// every ROB container on deck above it then counts as overstowed.
pub fn hatch_overstowage(
    voyage: &Voyage,
    u: &[f64],
    moves: &PortMoves,
    p: usize,
    tol: f64,
) -> (Vec<f64>, Vec<f64>) {
    let nbb = voyage.n_bay_blocks();
    let mut hm = vec![0.0; nbb];
    let mut ho = vec![0.0; nbb];
    if voyage.n_decks() < 2 {
        return (hm, ho);
    }
    let rob = voyage.ti.rob(p);
    let deck = voyage.on_deck();
    for b in 0..voyage.n_bays() {
        for bl in 0..voyage.n_blocks() {
            let bb = voyage.bay_block(b, bl);
            let hold_moves: f64 = (0..deck).map(|d| moves.total_at(voyage.loc(b, d, bl))).sum();
            if hold_moves > tol {
                hm[bb] = 1.0;
                let loc = voyage.loc(b, deck, bl);
                ho[bb] = rob
                    .iter()
                    .flat_map(|&tr| (0..voyage.n_k()).map(move |k| (tr, k)))
                    .map(|(tr, k)| u[voyage.ui(loc, tr, k)])
                    .sum();
            }
        }
    }
    (hm, ho)
}

/// Crane-move target for a port with `basis` containers handled.
pub fn crane_target(voyage: &Voyage, basis: f64) -> f64 {
    (1.0 + voyage.cfg.delta_cm) * 2.0 / voyage.n_bays() as f64 * basis
}

/// Demand handled at `p` (loads and discharges), the basis of the crane target.
pub fn demand_moves(voyage: &Voyage, q: &[f64], p: usize) -> f64 {
    voyage
        .ti
        .moves(p)
        .iter()
        .flat_map(|&tr| (0..voyage.n_k()).map(move |k| (tr, k)))
        .map(|(tr, k)| q[voyage.qi(tr, k)])
        .sum()
}

/// Per adjacent bay pair: moves above the target `z_bar`, floored at zero.
pub fn excess_crane_moves(voyage: &Voyage, moves: &[f64], z_bar: f64) -> Vec<f64> {
    let per_bay = bay_sums(voyage, moves);
    per_bay.windows(2).map(|w| (w[0] + w[1] - z_bar).max(0.0)).collect()
}

fn bay_sums(voyage: &Voyage, per_loc: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; voyage.n_bays()];
    for (loc, v) in per_loc.iter().enumerate() {
        out[voyage.loc_parts(loc).0] += v;
    }
    out
}

pub fn aggregate_cm(cm: &[f64], conv: CmConvention) -> f64 {
    match conv {
        CmConvention::PairSum => cm.iter().sum(),
        CmConvention::SingleMax => cm.iter().cloned().fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub tw: f64,
    pub lm: f64,
    pub vm: f64,
    /// `None` on an empty vessel, where both bounds hold trivially.
    pub lcg: Option<f64>,
    pub vcg: Option<f64>,
}

impl Stability {
    /// Largest positive bound residual in moment units.
    pub fn lcg_residual(&self, voyage: &Voyage) -> f64 {
        (voyage.cfg.lcg_lb * self.tw - self.lm)
            .max(self.lm - voyage.cfg.lcg_ub * self.tw)
            .max(0.0)
    }

    pub fn vcg_residual(&self, voyage: &Voyage) -> f64 {
        (voyage.cfg.vcg_lb * self.tw - self.vm)
            .max(self.vm - voyage.cfg.vcg_ub * self.tw)
            .max(0.0)
    }
}

pub fn stability(voyage: &Voyage, u: &[f64]) -> Stability {
    let (mut tw, mut lm, mut vm) = (0.0, 0.0, 0.0);
    for loc in 0..voyage.n_c() {
        let mut wsum = 0.0;
        for tr in 0..voyage.n_tr() {
            for k in 0..voyage.n_k() {
                wsum += voyage.weight(k) * u[voyage.ui(loc, tr, k)];
            }
        }
        tw += wsum;
        lm += voyage.ld_of_loc(loc) * wsum;
        vm += voyage.vd_of_loc(loc) * wsum;
    }
    let (lcg, vcg) = if tw > 0.0 {
        (Some(lm / tw), Some(vm / tw))
    } else {
        (None, None)
    };
    Stability {
        tw,
        lm,
        vm,
        lcg,
        vcg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::VoyageConfig;

    fn mini() -> Voyage {
        Voyage::new(VoyageConfig::mini()).unwrap()
    }

    #[test]
    fn empty_vessel_has_no_costs() {
        let v = mini();
        let u = vec![0.0; v.n_u()];
        let mv = port_moves(&v, &u, 2, &vec![0.0; v.n_c()]);
        let (_, ho) = hatch_overstowage(&v, &u, &mv, 2, 1e-4);
        assert!(ho.iter().all(|&h| h == 0.0));
        let s = stability(&v, &u);
        assert_eq!(s.tw, 0.0);
        assert!(s.lcg.is_none());
        assert_eq!(s.lcg_residual(&v), 0.0);
        assert_eq!(s.vcg_residual(&v), 0.0);
    }

    #[test]
    fn rob_on_deck_over_hold_load() {
        let v = mini();
        let mut u = vec![0.0; v.n_u()];
        let t13 = v.ti.index_of(1, 3);
        let t23 = v.ti.index_of(2, 3);
        u[v.ui(v.loc(0, 1, 0), t13, 0)] = 3.0;
        u[v.ui(v.loc(0, 0, 0), t23, 0)] = 1.0;
        let mv = port_moves(&v, &u, 2, &vec![0.0; v.n_c()]);
        let (hm, ho) = hatch_overstowage(&v, &u, &mv, 2, 1e-4);
        assert_eq!(hm, vec![1.0, 0.0]);
        assert_eq!(ho, vec![3.0, 0.0]);
        // deck ROB but no hold moves
        let mut u2 = vec![0.0; v.n_u()];
        u2[v.ui(v.loc(0, 1, 0), t13, 0)] = 3.0;
        let mv2 = port_moves(&v, &u2, 2, &vec![0.0; v.n_c()]);
        let (_, ho2) = hatch_overstowage(&v, &u2, &mv2, 2, 1e-4);
        assert_eq!(ho2, vec![0.0, 0.0]);
    }

    #[test]
    fn discharge_in_hold_opens_hatch() {
        let v = mini();
        let mut u = vec![0.0; v.n_u()];
        let t13 = v.ti.index_of(1, 3);
        u[v.ui(v.loc(1, 1, 0), t13, 1)] = 2.0;
        let mut dis = vec![0.0; v.n_c()];
        dis[v.loc(1, 0, 0)] = 1.5;
        let mv = port_moves(&v, &u, 2, &dis);
        let (_, ho) = hatch_overstowage(&v, &u, &mv, 2, 1e-4);
        assert_eq!(ho, vec![0.0, 2.0]);
    }

    #[test]
    fn crane_target_and_excess() {
        let v = Voyage::new(VoyageConfig::paper(4)).unwrap();
        assert!((crane_target(&v, 1000.0) - 125.0).abs() < 1e-9);
        // uniform moves: every pair carries exactly 2/|B| of the total
        let per_loc = vec![1000.0 / v.n_c() as f64; v.n_c()];
        let cm = excess_crane_moves(&v, &per_loc, crane_target(&v, 1000.0));
        assert_eq!(cm.len(), 19);
        assert!(cm.iter().all(|&c| c == 0.0));

        let mut cfg = VoyageConfig::mini();
        cfg.delta_cm = 0.0;
        let m = Voyage::new(cfg).unwrap();
        let per_loc = vec![2.5; 4];
        let z = crane_target(&m, 10.0);
        assert_eq!(z, 10.0);
        assert_eq!(excess_crane_moves(&m, &per_loc, z), vec![0.0]);
        assert_eq!(excess_crane_moves(&m, &per_loc, 4.0), vec![6.0]);
    }

    #[test]
    fn aggregation() {
        assert_eq!(aggregate_cm(&[1.0, 0.0, 3.0], CmConvention::PairSum), 4.0);
        assert_eq!(aggregate_cm(&[1.0, 0.0, 3.0], CmConvention::SingleMax), 3.0);
        assert_eq!(aggregate_cm(&[], CmConvention::SingleMax), 0.0);
    }

    #[test]
    fn centers_of_gravity() {
        let v = mini();
        let mut u = vec![0.0; v.n_u()];
        // heavy 40ft (weight 3) split evenly between mirrored bays
        u[v.ui(v.loc(0, 0, 0), 0, 1)] = 1.0;
        u[v.ui(v.loc(1, 0, 0), 0, 1)] = 1.0;
        let s = stability(&v, &u);
        assert_eq!(s.tw, 6.0);
        assert!((s.lcg.unwrap() - 1.0).abs() < 1e-12);
        assert!((s.vcg.unwrap() - 0.5).abs() < 1e-12);
        let mut one = vec![0.0; v.n_u()];
        one[v.ui(v.loc(0, 1, 0), 1, 0)] = 1.0;
        let s1 = stability(&v, &one);
        assert_eq!(s1.lcg, Some(0.5));
    }
}
