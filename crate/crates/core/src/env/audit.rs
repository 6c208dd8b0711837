//! Scores a finished plan against the MIP constraints at every port departure.

use serde::{Deserialize, Serialize};

use super::costs::stability;
use super::trace::EpisodeTrace;
use super::PortReport;
use crate::error::{Result, StowError};
use crate::voyage::Voyage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortResiduals {
    pub p: usize,
    pub demand: f64,
    pub capacity: f64,
    pub pbs: f64,
    /// Bay-blocks receiving more than one POD at this port.
    pub pbs_violations: usize,
    pub lcg: f64,
    pub vcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub max_residual: f64,
    /// Constraint family of the largest residual, when one exceeds tolerance.
    pub label: Option<String>,
    pub ports: Vec<PortResiduals>,
}

impl FeasibilityReport {
    pub fn pbs_violations(&self) -> usize {
        self.ports.iter().map(|p| p.pbs_violations).sum()
    }
}

/// Residuals of utilization `u` when leaving load port `p`.
pub fn port_residuals(voyage: &Voyage, q: &[f64], u: &[f64], p: usize) -> PortResiduals {
    let tol = voyage.cfg.feas_tol;
    let mut demand: f64 = 0.0;
    for tr in voyage.ti.onboard(p) {
        for k in 0..voyage.n_k() {
            let on: f64 = (0..voyage.n_c()).map(|l| u[voyage.ui(l, tr, k)]).sum();
            demand = demand.max(on - q[voyage.qi(tr, k)]);
        }
    }
    let mut capacity: f64 = 0.0;
    for (loc, teu) in voyage.teu_load(u).iter().enumerate() {
        capacity = capacity.max(teu - voyage.capacity[loc]);
    }
    let loads = voyage.ti.load(p);
    let mut pbs: f64 = 0.0;
    let mut pbs_violations = 0;
    for b in 0..voyage.n_bays() {
        for bl in 0..voyage.n_blocks() {
            let per_pod: Vec<f64> = loads
                .iter()
                .map(|&tr| {
                    (0..voyage.n_decks())
                        .flat_map(|d| (0..voyage.n_k()).map(move |k| (d, k)))
                        .map(|(d, k)| u[voyage.ui(voyage.loc(b, d, bl), tr, k)])
                        .sum()
                })
                .collect();
            let total: f64 = per_pod.iter().sum();
            let top = per_pod.iter().cloned().fold(0.0, f64::max);
            pbs = pbs.max(total - top);
            if per_pod.iter().filter(|&&a| a > tol).count() > 1 {
                pbs_violations += 1;
            }
        }
    }
    let st = stability(voyage, u);
    PortResiduals {
        p,
        demand: demand.max(0.0),
        capacity: capacity.max(0.0),
        pbs,
        pbs_violations,
        lcg: st.lcg_residual(voyage),
        vcg: st.vcg_residual(voyage),
    }
}

/// Audits departure states of every load port.
pub fn audit_reports(voyage: &Voyage, q: &[f64], reports: &[PortReport]) -> Result<FeasibilityReport> {
    let load_ports = voyage.n_ports() - 1;
    let mut ports = Vec::with_capacity(load_ports);
    for p in 1..=load_ports {
        let rep = reports
            .iter()
            .find(|r| r.p == p && !r.u_leave.is_empty())
            .ok_or_else(|| StowError::Contract(format!("incomplete trace: no departure state for port {p}")))?;
        ports.push(port_residuals(voyage, q, &rep.u_leave, p));
    }
    Ok(summarize(voyage, ports))
}

pub fn audit_plan(voyage: &Voyage, trace: &EpisodeTrace) -> Result<FeasibilityReport> {
    if !trace.complete {
        return Err(StowError::Contract("incomplete trace".into()));
    }
    audit_reports(voyage, &trace.q, &trace.ports)
}

pub fn summarize(voyage: &Voyage, ports: Vec<PortResiduals>) -> FeasibilityReport {
    let mut max_residual: f64 = 0.0;
    let mut label = None;
    for pr in &ports {
        for (name, r) in [
            ("demand", pr.demand),
            ("capacity", pr.capacity),
            ("pbs", pr.pbs),
            ("lcg", pr.lcg),
            ("vcg", pr.vcg),
        ] {
            if r > max_residual {
                max_residual = r;
                label = Some(name.to_string());
            }
        }
    }
    let feasible = max_residual <= voyage.cfg.feas_tol;
    FeasibilityReport {
        feasible,
        max_residual,
        label: if feasible { None } else { label },
        ports,
    }
}
