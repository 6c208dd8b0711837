//! The decomposed MDP.
//!
//! One step loads one (transport, class) pair into the vessel. Port costs are
//! charged on the last step of each load port. Cargo for port `p` leaves the
//! vessel on arrival, before any loading at `p`.

pub mod audit;
pub mod costs;
pub mod schedule;
pub mod trace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StowError};
use crate::instances::{demand_stream, DemandMode, Episode};
use crate::voyage::Voyage;

pub use costs::CmConvention;
use costs::{
    aggregate_cm, crane_target, demand_moves, excess_crane_moves, hatch_overstowage, port_moves,
    stability, Stability,
};
pub use schedule::{port_schedule, Schedule, StepTarget};

/// Costs and stability figures of one port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortReport {
    pub p: usize,
    pub hm: Vec<f64>,
    pub ho: Vec<f64>,
    pub z_bar: f64,
    pub cm: Vec<f64>,
    pub cm_sum: f64,
    pub cm_max: f64,
    pub stability: Stability,
    pub load_moves: f64,
    pub discharge_moves: f64,
    /// Utilization when leaving the port; empty for the final port.
    pub u_leave: Vec<f64>,
    /// Cost charged for this port under the env's convention.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: Vec<f64>,
    /// Demand revealed so far; rows of later load ports are zero.
    pub q_now: Vec<f64>,
    pub t: usize,
    pub p: usize,
    pub target: StepTarget,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub revenue: f64,
    pub cost: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Env {
    voyage: Arc<Voyage>,
    schedule: Arc<Schedule>,
    episode: Arc<Episode>,
    state: State,
    convention: CmConvention,
    /// Per-location containers discharged at the current port.
    discharge: Vec<f64>,
    reports: Vec<PortReport>,
}

impl Env {
    pub fn new(voyage: Arc<Voyage>, episode: Episode) -> Result<Self> {
        let schedule = Arc::new(port_schedule(voyage.n_ports(), voyage.n_k())?);
        Self::with_schedule(voyage, schedule, Arc::new(episode))
    }

    pub fn with_schedule(
        voyage: Arc<Voyage>,
        schedule: Arc<Schedule>,
        episode: Arc<Episode>,
    ) -> Result<Self> {
        if episode.demand.q.len() != voyage.n_q() {
            return Err(StowError::Contract(format!(
                "demand has {} entries, expected {}",
                episode.demand.q.len(),
                voyage.n_q()
            )));
        }
        let n_c = voyage.n_c();
        let state = State {
            u: vec![0.0; voyage.n_u()],
            q_now: vec![0.0; voyage.n_q()],
            t: 0,
            p: 1,
            target: schedule.steps[0],
            done: false,
        };
        let mut env = Self {
            voyage,
            schedule,
            episode,
            state,
            convention: CmConvention::PairSum,
            discharge: vec![0.0; n_c],
            reports: Vec::new(),
        };
        env.reveal(1);
        Ok(env)
    }

    /// Fresh environment for `(seed, episode index)` in continuous mode.
    pub fn reset(voyage: Arc<Voyage>, seed: u64, index: u64) -> Result<Self> {
        let ep = demand_stream(&voyage, seed, index, DemandMode::Continuous);
        Self::new(voyage, ep)
    }

    pub fn with_convention(mut self, conv: CmConvention) -> Self {
        self.convention = conv;
        self
    }

    pub fn voyage(&self) -> &Arc<Voyage> {
        &self.voyage
    }
    pub fn schedule(&self) -> &Arc<Schedule> {
        &self.schedule
    }
    pub fn episode(&self) -> &Arc<Episode> {
        &self.episode
    }
    pub fn state(&self) -> &State {
        &self.state
    }
    pub fn reports(&self) -> &[PortReport] {
        &self.reports
    }
    pub fn convention(&self) -> CmConvention {
        self.convention
    }

    /// Demand of the current target not yet loaded at this port.
    pub fn residual_demand(&self) -> f64 {
        residual_demand(&self.voyage, &self.state)
    }

    fn reveal(&mut self, p: usize) {
        for tr in self.voyage.ti.load(p) {
            for k in 0..self.voyage.n_k() {
                let i = self.voyage.qi(tr, k);
                self.state.q_now[i] = self.episode.demand.q[i];
            }
        }
    }

    /// Empties every transport with pod `p` and records the per-location moves.
    fn discharge_at(&mut self, p: usize) {
        let v = self.voyage.clone();
        self.discharge.iter_mut().for_each(|d| *d = 0.0);
        for tr in v.ti.discharge(p) {
            for loc in 0..v.n_c() {
                for k in 0..v.n_k() {
                    let i = v.ui(loc, tr, k);
                    self.discharge[loc] += self.state.u[i];
                    self.state.u[i] = 0.0;
                }
            }
        }
    }

    fn port_cost(&mut self, p: usize) -> f64 {
        let v = self.voyage.clone();
        let moves = port_moves(&v, &self.state.u, p, &self.discharge);
        let (hm, ho) = hatch_overstowage(&v, &self.state.u, &moves, p, 0.0);
        let z_bar = crane_target(&v, demand_moves(&v, &self.episode.demand.q, p));
        let cm = excess_crane_moves(&v, &moves.per_location(), z_bar);
        let cm_sum = aggregate_cm(&cm, CmConvention::PairSum);
        let cm_max = aggregate_cm(&cm, CmConvention::SingleMax);
        let cm_cost = match self.convention {
            CmConvention::PairSum => cm_sum,
            CmConvention::SingleMax => cm_max,
        };
        let cost = v.cfg.ct_ho * ho.iter().sum::<f64>() + v.cfg.ct_cm * cm_cost;
        let last = p == v.n_ports();
        self.reports.push(PortReport {
            p,
            hm,
            ho,
            z_bar,
            cm,
            cm_sum,
            cm_max,
            stability: stability(&v, &self.state.u),
            load_moves: moves.load.iter().sum(),
            discharge_moves: moves.discharge.iter().sum(),
            u_leave: if last { Vec::new() } else { self.state.u.clone() },
            cost,
        });
        cost
    }

    /// Applies `x` (one entry per location) to the current target.
    pub fn step(&mut self, x: &[f64]) -> Result<StepOutcome> {
        if self.state.done {
            return Err(StowError::Contract("step after episode end".into()));
        }
        let v = self.voyage.clone();
        if x.len() != v.n_c() {
            return Err(StowError::Contract(format!(
                "action has {} entries, expected {}",
                x.len(),
                v.n_c()
            )));
        }
        if let Some(i) = x.iter().position(|a| !a.is_finite()) {
            return Err(StowError::Contract(format!("non-finite action entry at {i}")));
        }
        if let Some(i) = x.iter().position(|&a| a < 0.0) {
            return Err(StowError::Contract(format!(
                "negative action entry {} at {i}",
                x[i]
            )));
        }
        let tg = self.state.target;
        let res = self.residual_demand().max(0.0);
        let loaded: f64 = x.iter().sum();
        let revenue = v.rev[v.qi(tg.tr, tg.k)] * loaded.min(res);
        for (loc, &a) in x.iter().enumerate() {
            self.state.u[v.ui(loc, tg.tr, tg.k)] += a;
        }
        let mut cost = 0.0;
        let t = self.state.t;
        if let Some(p) = self.schedule.leaving(t) {
            cost += self.port_cost(p);
            if p + 1 == v.n_ports() {
                self.discharge_at(v.n_ports());
                cost += self.port_cost(v.n_ports());
                self.state.done = true;
            } else {
                self.state.p = p + 1;
                self.reveal(p + 1);
                self.discharge_at(p + 1);
            }
        }
        if !self.state.done {
            self.state.t = t + 1;
            self.state.target = self.schedule.steps[t + 1];
        }
        Ok(StepOutcome {
            reward: revenue - cost,
            revenue,
            cost,
            done: self.state.done,
        })
    }
}

pub fn residual_demand(voyage: &Voyage, state: &State) -> f64 {
    let tg = state.target;
    let loaded: f64 = (0..voyage.n_c())
        .map(|loc| state.u[voyage.ui(loc, tg.tr, tg.k)])
        .sum();
    state.q_now[voyage.qi(tg.tr, tg.k)] - loaded
}
