//! Step ordering of the decomposed episode.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sets::TransportIndex;

/// What a single decomposed step loads: class `k` of transport `(pol, pod)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTarget {
    pub pol: usize,
    pub pod: usize,
    pub k: usize,
    pub tr: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: Vec<StepTarget>,
    /// First step of each load port, indexed `p - 1`.
    pub arrival: Vec<usize>,
    /// Last step of each load port, indexed `p - 1`.
    pub leave: Vec<usize>,
}

impl Schedule {
    pub fn t_seq(&self) -> usize {
        self.steps.len()
    }

    /// Load port whose last step is `t`.
    pub fn leaving(&self, t: usize) -> Option<usize> {
        self.leave.iter().position(|&s| s == t).map(|i| i + 1)
    }

    /// Port `p >= 2` whose first step is `t`.
    pub fn arriving(&self, t: usize) -> Option<usize> {
        self.arrival.iter().skip(1).position(|&s| s == t).map(|i| i + 2)
    }
}

/// Closed-form last step of load port `p`.
pub fn leave_step(n_ports: usize, n_k: usize, p: usize) -> usize {
    n_k * (p * (n_ports - 1) - p * (p - 1) / 2) - 1
}

/// Steps grouped by load port, then pod ascending, then class.
pub fn port_schedule(n_ports: usize, n_k: usize) -> Result<Schedule> {
    let ti = TransportIndex::new(n_ports)?;
    let mut steps = Vec::with_capacity(ti.len() * n_k);
    let mut arrival = Vec::new();
    let mut leave = Vec::new();
    for p in 1..n_ports {
        arrival.push(steps.len());
        for j in p + 1..=n_ports {
            let tr = ti.index_of(p, j);
            for k in 0..n_k {
                steps.push(StepTarget { pol: p, pod: j, k, tr });
            }
        }
        leave.push(steps.len() - 1);
    }
    Ok(Schedule {
        steps,
        arrival,
        leave,
    })
}
