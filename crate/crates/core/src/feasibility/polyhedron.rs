//! Per-step linear feasible region `A x <= b` over one location vector.

use serde::{Deserialize, Serialize};

use crate::env::{residual_demand, State};
use crate::voyage::Voyage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowLabel {
    Demand,
    Capacity,
    LcgLb,
    LcgUb,
    VcgLb,
    VcgUb,
}

impl RowLabel {
    pub fn is_stability(self) -> bool {
        !matches!(self, RowLabel::Demand | RowLabel::Capacity)
    }
}

/// Dense row-major constraint system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub labels: Vec<RowLabel>,
    /// Rows that may be relaxed with a penalized slack.
    pub soft: Vec<bool>,
}

impl Polyhedron {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            a: Vec::new(),
            b: Vec::new(),
            labels: Vec::new(),
            soft: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64], rhs: f64, label: RowLabel) {
        assert_eq!(row.len(), self.n);
        self.a.extend_from_slice(row);
        self.b.push(rhs);
        self.labels.push(label);
        self.soft.push(label.is_stability());
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// `max(Ax - b, 0)` element-wise.
    pub fn violation(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m()).map(|i| (self.row_dot(i, x) - self.b[i]).max(0.0)).collect()
    }

    pub fn total_violation(&self, x: &[f64]) -> f64 {
        self.violation(x).iter().sum()
    }

    /// Largest residual over rows that are not soft.
    pub fn max_hard_residual(&self, x: &[f64]) -> f64 {
        (0..self.m())
            .filter(|&i| !self.soft[i])
            .map(|i| self.row_dot(i, x) - self.b[i])
            .fold(0.0, f64::max)
    }

    /// Each row and its bound divided by the row's Euclidean norm.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.m() {
            let norm = self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut out.a[i * self.n..(i + 1) * self.n] {
                    *v /= norm;
                }
                out.b[i] /= norm;
            }
        }
        out
    }

    /// `A^T v`.
    pub fn at_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(i)) {
                    *o += a * vi;
                }
            }
        }
        out
    }
}

/// The state-dependent numbers that, together with the voyage, define a step
/// polyhedron. Small enough to store per transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPolyParams {
    pub k: usize,
    pub demand: f64,
    pub capacity: Vec<f64>,
    /// Right-hand sides of the LCG lower/upper and VCG lower/upper rows.
    pub stability: [f64; 4],
}

impl StepPolyParams {
    pub fn from_state(voyage: &Voyage, state: &State) -> Self {
        let k = state.target.k;
        let teu = voyage.teu_load(&state.u);
        let capacity = voyage.capacity.iter().zip(&teu).map(|(c, t)| c - t).collect();
        let (mut w, mut lm, mut vm) = (0.0, 0.0, 0.0);
        for loc in 0..voyage.n_c() {
            let mut ws = 0.0;
            for tr in 0..voyage.n_tr() {
                for kk in 0..voyage.n_k() {
                    ws += voyage.weight(kk) * state.u[voyage.ui(loc, tr, kk)];
                }
            }
            w += ws;
            lm += voyage.ld_of_loc(loc) * ws;
            vm += voyage.vd_of_loc(loc) * ws;
        }
        let c = &voyage.cfg;
        Self {
            k,
            demand: residual_demand(voyage, state),
            capacity,
            stability: [
                lm - c.lcg_lb * w,
                c.lcg_ub * w - lm,
                vm - c.vcg_lb * w,
                c.vcg_ub * w - vm,
            ],
        }
    }

    /// Rows: demand, one capacity row per location, then LCG lb/ub, VCG lb/ub.
    pub fn polyhedron(&self, voyage: &Voyage) -> Polyhedron {
        let n = voyage.n_c();
        let c = &voyage.cfg;
        let (teu, w) = (voyage.teu(self.k), voyage.weight(self.k));
        let mut ph = Polyhedron::new(n);
        ph.push(&vec![1.0; n], self.demand, RowLabel::Demand);
        let mut row = vec![0.0; n];
        for loc in 0..n {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[loc] = teu;
            ph.push(&row, self.capacity[loc], RowLabel::Capacity);
        }
        let ld: Vec<f64> = (0..n).map(|l| voyage.ld_of_loc(l)).collect();
        let vd: Vec<f64> = (0..n).map(|l| voyage.vd_of_loc(l)).collect();
        let rows = [
            (ld.iter().map(|d| w * (c.lcg_lb - d)).collect::<Vec<_>>(), RowLabel::LcgLb),
            (ld.iter().map(|d| w * (d - c.lcg_ub)).collect(), RowLabel::LcgUb),
            (vd.iter().map(|d| w * (c.vcg_lb - d)).collect(), RowLabel::VcgLb),
            (vd.iter().map(|d| w * (d - c.vcg_ub)).collect(), RowLabel::VcgUb),
        ];
        for (i, (r, label)) in rows.into_iter().enumerate() {
            ph.push(&r, self.stability[i], label);
        }
        ph
    }
}

pub fn build_polyhedron(voyage: &Voyage, state: &State) -> Polyhedron {
    StepPolyParams::from_state(voyage, state).polyhedron(voyage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::VoyageConfig;
    use crate::env::Env;
    use crate::env::costs::stability;
    use std::sync::Arc;

    #[test]
    fn empty_vessel_rows() {
        let v = Arc::new(Voyage::new(VoyageConfig::mini()).unwrap());
        let env = Env::reset(v.clone(), 4, 0).unwrap();
        let ph = build_polyhedron(&v, env.state());
        assert_eq!(ph.m(), 1 + v.n_c() + 4);
        for loc in 0..v.n_c() {
            assert_eq!(ph.b[1 + loc], v.capacity[loc]);
        }
        assert!(ph.violation(&vec![0.0; v.n_c()]).iter().all(|&x| x == 0.0));
        for i in 0..ph.m() {
            assert!(ph.row(i).iter().any(|&a| a != 0.0));
        }
    }

    #[test]
    fn demand_row_tracks_loading() {
        let v = Arc::new(Voyage::new(VoyageConfig::mini()).unwrap());
        let mut env = Env::reset(v.clone(), 9, 0).unwrap();
        let q0 = env.state().q_now[0];
        let ph0 = build_polyhedron(&v, env.state());
        assert_eq!(ph0.b[0], q0);
        // a 0.0 action moves to the next class; load 2 units for class 0 instead
        let mut s = env.state().clone();
        s.u[v.ui(0, 0, 0)] += 2.0;
        let ph1 = build_polyhedron(&v, &s);
        assert!((ph1.b[0] - (q0 - 2.0)).abs() < 1e-12);
        env.step(&[0.0; 4]).unwrap();
    }

    #[test]
    fn stability_rows_match_direct_evaluation() {
        let v = Arc::new(Voyage::new(VoyageConfig::mini()).unwrap());
        let env = Env::reset(v.clone(), 1, 0).unwrap();
        let mut s = env.state().clone();
        s.u[v.ui(1, 1, 1)] = 1.3;
        s.u[v.ui(2, 0, 0)] = 0.7;
        let ph = build_polyhedron(&v, &s);
        let x = [0.4, 1.1, 0.0, 2.0];
        let mut after = s.u.clone();
        for (loc, xv) in x.iter().enumerate() {
            after[v.ui(loc, s.target.tr, s.target.k)] += xv;
        }
        let st = stability(&v, &after);
        let c = &v.cfg;
        let expect = [
            c.lcg_lb * st.tw - st.lm,
            st.lm - c.lcg_ub * st.tw,
            c.vcg_lb * st.tw - st.vm,
            st.vm - c.vcg_ub * st.tw,
        ];
        for (i, e) in expect.iter().enumerate() {
            let r = 1 + v.n_c() + i;
            assert!((ph.row_dot(r, &x) - ph.b[r] - e).abs() < 1e-12);
        }
    }
}
