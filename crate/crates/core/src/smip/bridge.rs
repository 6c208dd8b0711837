//! Turns a solved model into per-step env actions and replays them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::SmipModel;
use crate::env::{CmConvention, Env, PortReport, Schedule};
use crate::error::{Result, StowError};
use crate::instances::Episode;
use crate::voyage::Voyage;

/// One action per schedule step for path `phi`. Entries within `tol` of zero
/// become exactly zero; anything below `-tol` is an error.
pub fn plan_from_solution(
    voyage: &Voyage,
    schedule: &Schedule,
    model: &SmipModel,
    x: &[f64],
    phi: usize,
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    if phi >= model.n_paths() {
        return Err(StowError::Contract(format!("path {phi} out of range ({} paths)", model.n_paths())));
    }
    if x.len() != model.lp.n_vars() {
        return Err(StowError::Contract(format!(
            "solution has {} entries, model has {} columns",
            x.len(),
            model.lp.n_vars()
        )));
    }
    let cols = &model.u_col[phi];
    let mut plan = Vec::with_capacity(schedule.steps.len());
    for tg in &schedule.steps {
        let mut a = vec![0.0; voyage.n_c()];
        for (loc, slot) in a.iter_mut().enumerate() {
            let c = cols[voyage.ui(loc, tg.tr, tg.k)];
            let v = x[c];
            if v < -tol {
                return Err(StowError::Contract(format!(
                    "negative load {v} in column {} of path {}",
                    model.lp.vars[c].name,
                    phi + 1
                )));
            }
            *slot = if v.abs() <= tol { 0.0 } else { v };
        }
        plan.push(a);
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub reward: f64,
    pub revenue: f64,
    pub cost: f64,
    pub reports: Vec<PortReport>,
}

/// Runs `plan` in an env whose realized demand is `demand`; the rest of the
/// episode (seeds, bounds) comes from `template`.
pub fn replay_plan(
    voyage: Arc<Voyage>,
    template: &Episode,
    demand: &[f64],
    plan: &[Vec<f64>],
    conv: CmConvention,
) -> Result<ReplayResult> {
    let mut ep = template.clone();
    ep.demand.q = demand.to_vec();
    let mut env = Env::new(voyage, ep)?.with_convention(conv);
    let (mut reward, mut revenue, mut cost) = (0.0, 0.0, 0.0);
    for a in plan {
        let out = env.step(a)?;
        reward += out.reward;
        revenue += out.revenue;
        cost += out.cost;
        if out.done {
            break;
        }
    }
    Ok(ReplayResult {
        reward,
        revenue,
        cost,
        reports: env.reports().to_vec(),
    })
}
