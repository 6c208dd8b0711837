//! Deterministic equivalent of the multi-stage stowage MIP over a scenario tree.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::simplex::{LpProblem, Sense};
use super::tree::ScenarioTree;
use crate::env::costs::crane_target;
use crate::error::{Result, StowError};
use crate::voyage::Voyage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// Starts with `eq<label>_`.
    pub name: String,
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn label(&self) -> &str {
        let rest = self.name.strip_prefix("eq").unwrap_or(&self.name);
        rest.split('_').next().unwrap_or("")
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let r = self.lhs(x) - self.rhs;
        match self.sense {
            Sense::Le => r.max(0.0),
            Sense::Ge => (-r).max(0.0),
            Sense::Eq => r.abs(),
        }
    }
}

/// Sparse maximization model with named columns and rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LpModel {
    pub vars: Vec<Var>,
    pub obj: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LpModel {
    pub fn add_var(&mut self, name: String, lb: f64, ub: f64, binary: bool, obj: f64) -> usize {
        self.vars.push(Var { name, lb, ub, binary });
        self.obj.push(obj);
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, name: String, coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row { name, coefs, sense, rhs });
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn binaries(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&j| self.vars[j].binary).collect()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn var_index(&self) -> HashMap<&str, usize> {
        self.vars.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect()
    }

    /// Largest row or bound violation, with the offending name.
    pub fn max_violation(&self, x: &[f64]) -> (f64, String) {
        let mut worst = (0.0, String::new());
        for (v, &xv) in self.vars.iter().zip(x) {
            let r = (v.lb - xv).max(xv - v.ub);
            if r > worst.0 {
                worst = (r, v.name.clone());
            }
        }
        for row in &self.rows {
            let r = row.violation(x);
            if r > worst.0 {
                worst = (r, row.name.clone());
            }
        }
        worst
    }

    /// Dense copy; `bounds` overrides the column bounds (used by branching).
    pub fn to_problem(&self, bounds: Option<(&[f64], &[f64])>) -> LpProblem {
        let n = self.n_vars();
        let mut p = LpProblem::new(n);
        p.c = self.obj.clone();
        match bounds {
            Some((lb, ub)) => {
                p.lb = lb.to_vec();
                p.ub = ub.to_vec();
            }
            None => {
                p.lb = self.vars.iter().map(|v| v.lb).collect();
                p.ub = self.vars.iter().map(|v| v.ub).collect();
            }
        }
        let mut dense = vec![0.0; n];
        for row in &self.rows {
            dense.iter_mut().for_each(|v| *v = 0.0);
            for &(j, a) in &row.coefs {
                dense[j] += a;
            }
            p.add_row(&dense, row.sense, row.rhs);
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anticipation {
    /// Loads at port `p` shared by paths with the same demand before `p`.
    NonAnticipative,
    /// Every path plans with its own demand.
    PerfectInformation,
}

impl Anticipation {
    pub fn tag(self) -> &'static str {
        match self {
            Anticipation::NonAnticipative => "NA",
            Anticipation::PerfectInformation => "PI",
        }
    }
}

/// The model plus column maps used by extraction and per-path evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmipModel {
    pub lp: LpModel,
    pub mode: Anticipation,
    pub probs: Vec<f64>,
    /// Demand per path, `tr * |K| + k`.
    pub demand: Vec<Vec<f64>>,
    /// `[path][ui]` column of utilization.
    pub u_col: Vec<Vec<usize>>,
    /// `[path][(p - 1) * |B||BL| + bay_block]`.
    pub ho_col: Vec<Vec<Option<usize>>>,
    pub hm_col: Vec<Vec<Option<usize>>>,
    /// `[path][p - 1]`.
    pub cm_col: Vec<Vec<Option<usize>>>,
    /// `[path][((p - 1) * N_P + (j - 1)) * |B||BL| + bay_block]`.
    pub di_col: Vec<Vec<Option<usize>>>,
    pub z_bar: Vec<Vec<f64>>,
    pub ct_ho: f64,
    pub ct_cm: f64,
}

impl SmipModel {
    pub fn n_paths(&self) -> usize {
        self.probs.len()
    }

    /// Revenue minus costs of one path under solution `x`.
    pub fn path_objective(&self, voyage: &Voyage, x: &[f64], phi: usize) -> f64 {
        let mut total = 0.0;
        for loc in 0..voyage.n_c() {
            for tr in 0..voyage.n_tr() {
                for k in 0..voyage.n_k() {
                    let ui = voyage.ui(loc, tr, k);
                    total += voyage.rev[voyage.qi(tr, k)] * x[self.u_col[phi][ui]];
                }
            }
        }
        for c in self.ho_col[phi].iter().flatten() {
            total -= self.ct_ho * x[*c];
        }
        for c in self.cm_col[phi].iter().flatten() {
            total -= self.ct_cm * x[*c];
        }
        total
    }

    pub fn expected_objective(&self, voyage: &Voyage, x: &[f64]) -> f64 {
        (0..self.n_paths()).map(|phi| self.probs[phi] * self.path_objective(voyage, x, phi)).sum()
    }
}

fn loc_tag(voyage: &Voyage, loc: usize) -> String {
    let (b, d, bl) = voyage.loc_parts(loc);
    format!("b{}_d{}_bl{}", b + 1, d + 1, bl + 1)
}

/// Builds the deterministic equivalent of `tree`.
///
/// Rows are emitted path by path, and within a path in label order. Big-M
/// coefficients are the tightest valid value from demand and capacity,
/// capped by `cfg.big_m`.
pub fn build_deterministic_equivalent(
    voyage: &Voyage,
    tree: &ScenarioTree,
    mode: Anticipation,
) -> Result<SmipModel> {
    let np = voyage.n_ports();
    let (n_b, n_bl, n_k) = (voyage.n_bays(), voyage.n_blocks(), voyage.n_k());
    let nbb = voyage.n_bay_blocks();
    let deck = voyage.on_deck();
    let cfg = &voyage.cfg;
    let min_teu = voyage.classes.iter().map(|c| c.teu).fold(f64::INFINITY, f64::min);
    if !(min_teu > 0.0) {
        return Err(StowError::InvalidConfig("cargo classes need positive TEU".into()));
    }
    let n_paths = tree.n_paths();
    let probs: Vec<f64> = (0..n_paths).map(|phi| tree.path_prob(phi)).collect();
    let demand: Vec<Vec<f64>> = (0..n_paths).map(|phi| tree.path_demand(phi)).collect();
    let mut lp = LpModel::default();

    // utilization columns, shared by history group in NA mode
    let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
    let mut u_col = vec![vec![0usize; voyage.n_u()]; n_paths];
    for phi in 0..n_paths {
        for loc in 0..voyage.n_c() {
            for tr in 0..voyage.n_tr() {
                let (i, j) = voyage.ti.pair(tr);
                for k in 0..n_k {
                    let ui = voyage.ui(loc, tr, k);
                    let name = format!("u_{}_i{i}_j{j}_k{}_s{}", loc_tag(voyage, loc), k + 1, phi + 1);
                    let obj = probs[phi] * voyage.rev[voyage.qi(tr, k)];
                    let col = match mode {
                        Anticipation::PerfectInformation => lp.add_var(name, 0.0, f64::INFINITY, false, obj),
                        Anticipation::NonAnticipative => {
                            let key = (tree.history_node(phi, i), ui);
                            match shared.get(&key) {
                                Some(&c) => {
                                    lp.obj[c] += obj;
                                    c
                                }
                                None => {
                                    let c = lp.add_var(name, 0.0, f64::INFINITY, false, obj);
                                    shared.insert(key, c);
                                    c
                                }
                            }
                        }
                    };
                    u_col[phi][ui] = col;
                }
            }
        }
    }

    let mut ho_col = vec![vec![None; np * nbb]; n_paths];
    let mut hm_col = vec![vec![None; np * nbb]; n_paths];
    let mut cm_col = vec![vec![None; np]; n_paths];
    let mut di_col = vec![vec![None; np * np * nbb]; n_paths];
    let mut z_bar = vec![vec![0.0; np]; n_paths];

    for phi in 0..n_paths {
        let s = phi + 1;
        let q = &demand[phi];
        let uc = &u_col[phi];
        let qsum = |trs: &[usize]| -> f64 {
            trs.iter().flat_map(|&tr| (0..n_k).map(move |k| (tr, k))).map(|(tr, k)| q[voyage.qi(tr, k)]).sum()
        };

        // demand, one row per (tr, k)
        for tr in 0..voyage.n_tr() {
            let (i, j) = voyage.ti.pair(tr);
            for k in 0..n_k {
                let coefs = (0..voyage.n_c()).map(|loc| (uc[voyage.ui(loc, tr, k)], 1.0)).collect();
                lp.add_row(
                    format!("eq14_dem_p{i}_i{i}_j{j}_k{}_s{s}", k + 1),
                    coefs,
                    Sense::Le,
                    q[voyage.qi(tr, k)],
                );
            }
        }
        // capacity
        for p in 1..np {
            let ob = voyage.ti.onboard(p);
            for loc in 0..voyage.n_c() {
                let coefs = ob
                    .iter()
                    .flat_map(|&tr| (0..n_k).map(move |k| (tr, k)))
                    .map(|(tr, k)| (uc[voyage.ui(loc, tr, k)], voyage.teu(k)))
                    .collect();
                lp.add_row(
                    format!("eq15_cap_p{p}_{}_s{s}", loc_tag(voyage, loc)),
                    coefs,
                    Sense::Le,
                    voyage.capacity[loc],
                );
            }
        }
        // destination indicators, single POD per bay-block, link rows
        for p in 1..np {
            for b in 0..n_b {
                for bl in 0..n_bl {
                    let bb = voyage.bay_block(b, bl);
                    for j in p + 1..=np {
                        let c = lp.add_var(
                            format!("di_p{p}_j{j}_b{}_bl{}_s{s}", b + 1, bl + 1),
                            0.0,
                            1.0,
                            true,
                            0.0,
                        );
                        di_col[phi][((p - 1) * np + (j - 1)) * nbb + bb] = Some(c);
                    }
                    let coefs = (p + 1..=np)
                        .map(|j| (di_col[phi][((p - 1) * np + (j - 1)) * nbb + bb].unwrap(), 1.0))
                        .collect();
                    lp.add_row(format!("eq16_pod_p{p}_b{}_bl{}_s{s}", b + 1, bl + 1), coefs, Sense::Le, 1.0);
                }
            }
            for j in p + 1..=np {
                let tr = voyage.ti.index_of(p, j);
                let tr_demand = qsum(&[tr]);
                for loc in 0..voyage.n_c() {
                    let (b, _, bl) = voyage.loc_parts(loc);
                    let big = (voyage.capacity[loc] / min_teu).min(tr_demand).min(cfg.big_m);
                    let di = di_col[phi][((p - 1) * np + (j - 1)) * nbb + voyage.bay_block(b, bl)].unwrap();
                    let mut coefs: Vec<(usize, f64)> =
                        (0..n_k).map(|k| (uc[voyage.ui(loc, tr, k)], 1.0)).collect();
                    coefs.push((di, -big));
                    lp.add_row(
                        format!("eq17_link_p{p}_j{j}_{}_s{s}", loc_tag(voyage, loc)),
                        coefs,
                        Sense::Le,
                        0.0,
                    );
                }
            }
        }
        // hatch movement and overstowage, only where something remains on board
        if voyage.n_decks() >= 2 {
            for p in 2..np {
                let rob = voyage.ti.rob(p);
                if rob.is_empty() {
                    continue;
                }
                let mv = voyage.ti.moves(p);
                let mv_demand = qsum(&mv);
                let rob_demand = qsum(&rob);
                for b in 0..n_b {
                    for bl in 0..n_bl {
                        let bb = voyage.bay_block(b, bl);
                        let hm = lp.add_var(format!("hm_p{p}_b{}_bl{}_s{s}", b + 1, bl + 1), 0.0, 1.0, true, 0.0);
                        let ho = lp.add_var(
                            format!("ho_p{p}_b{}_bl{}_s{s}", b + 1, bl + 1),
                            0.0,
                            f64::INFINITY,
                            false,
                            -probs[phi] * cfg.ct_ho,
                        );
                        hm_col[phi][(p - 1) * nbb + bb] = Some(hm);
                        ho_col[phi][(p - 1) * nbb + bb] = Some(ho);
                        let hold_cap: f64 = (0..deck).map(|d| voyage.capacity[voyage.loc(b, d, bl)]).sum();
                        let m18 = (2.0 * hold_cap / min_teu).min(mv_demand).min(cfg.big_m);
                        let mut coefs = Vec::new();
                        for d in 0..deck {
                            let loc = voyage.loc(b, d, bl);
                            for &tr in &mv {
                                for k in 0..n_k {
                                    coefs.push((uc[voyage.ui(loc, tr, k)], 1.0));
                                }
                            }
                        }
                        coefs.push((hm, -m18));
                        lp.add_row(format!("eq18_hatch_p{p}_b{}_bl{}_s{s}", b + 1, bl + 1), coefs, Sense::Le, 0.0);

                        let dloc = voyage.loc(b, deck, bl);
                        let m19 = (voyage.capacity[dloc] / min_teu).min(rob_demand).min(cfg.big_m);
                        let mut coefs = Vec::new();
                        for &tr in &rob {
                            for k in 0..n_k {
                                coefs.push((uc[voyage.ui(dloc, tr, k)], 1.0));
                            }
                        }
                        coefs.push((hm, m19));
                        coefs.push((ho, -1.0));
                        lp.add_row(
                            format!("eq19_restow_p{p}_b{}_bl{}_s{s}", b + 1, bl + 1),
                            coefs,
                            Sense::Le,
                            m19,
                        );
                    }
                }
            }
        }
        // crane moves against the demand-based target
        for p in 1..=np {
            let mv = voyage.ti.moves(p);
            let zb = crane_target(voyage, qsum(&mv));
            z_bar[phi][p - 1] = zb;
            if n_b < 2 {
                continue;
            }
            let cm = lp.add_var(format!("cm_p{p}_s{s}"), 0.0, f64::INFINITY, false, -probs[phi] * cfg.ct_cm);
            cm_col[phi][p - 1] = Some(cm);
            for b in 0..n_b - 1 {
                let mut coefs = Vec::new();
                for bay in [b, b + 1] {
                    for d in 0..voyage.n_decks() {
                        for bl in 0..n_bl {
                            let loc = voyage.loc(bay, d, bl);
                            for &tr in &mv {
                                for k in 0..n_k {
                                    coefs.push((uc[voyage.ui(loc, tr, k)], 1.0));
                                }
                            }
                        }
                    }
                }
                coefs.push((cm, -1.0));
                lp.add_row(format!("eq21_crane_p{p}_b{}_b{}_s{s}", b + 1, b + 2), coefs, Sense::Le, zb);
            }
        }
        // stability with weight and moments substituted
        for p in 1..np {
            let ob = voyage.ti.onboard(p);
            let mut rows: [Vec<(usize, f64)>; 4] = Default::default();
            for loc in 0..voyage.n_c() {
                let (ld, vd) = (voyage.ld_of_loc(loc), voyage.vd_of_loc(loc));
                for &tr in &ob {
                    for k in 0..n_k {
                        let w = voyage.weight(k);
                        let c = uc[voyage.ui(loc, tr, k)];
                        rows[0].push((c, w * (cfg.lcg_lb - ld)));
                        rows[1].push((c, w * (ld - cfg.lcg_ub)));
                        rows[2].push((c, w * (cfg.vcg_lb - vd)));
                        rows[3].push((c, w * (vd - cfg.vcg_ub)));
                    }
                }
            }
            let names = ["eq24_lcg_lb", "eq24_lcg_ub", "eq25_vcg_lb", "eq25_vcg_ub"];
            for (coefs, name) in rows.into_iter().zip(names) {
                lp.add_row(format!("{name}_p{p}_s{s}"), coefs, Sense::Le, 0.0);
            }
        }
    }

    Ok(SmipModel {
        lp,
        mode,
        probs,
        demand,
        u_col,
        ho_col,
        hm_col,
        cm_col,
        di_col,
        z_bar,
        ct_ho: cfg.ct_ho,
        ct_cm: cfg.ct_cm,
    })
}
