//! Flat observation vector for the MLP networks.
//!
//! Layout, in order:
//!
//! | block       | length | scaling                                   |
//! |-------------|--------|-------------------------------------------|
//! | `u`         | `n_u`  | TEU share of the location capacity        |
//! | `q_now`     | `n_q`  | divided by `q_scale`                      |
//! | `mu`        | `n_q`  | divided by `q_scale`                      |
//! | `sigma`     | `n_q`  | divided by `q_scale`                      |
//! | target      | `n_q`  | one-hot over `(tr, k)`                    |
//! | step        | 1      | `t / (T - 1)`, 0 when `T = 1`             |
//!
//! `q_scale` is fixed when a policy is created and travels with it, so an
//! evaluation under a different utilization rate sees unnormalized shift.

use crate::env::State;
use crate::instances::{upper_bounds, Episode};
use crate::voyage::Voyage;

pub fn obs_len(voyage: &Voyage) -> usize {
    voyage.n_u() + 4 * voyage.n_q() + 1
}

/// Largest unperturbed demand bound, floored at 1.
pub fn default_q_scale(voyage: &Voyage) -> f64 {
    upper_bounds(voyage).into_iter().fold(1.0, f64::max)
}

pub fn observe(voyage: &Voyage, state: &State, episode: &Episode, q_scale: f64) -> Vec<f64> {
    let (n_q, n_tr, n_k) = (voyage.n_q(), voyage.n_tr(), voyage.n_k());
    let mut out = Vec::with_capacity(obs_len(voyage));
    for loc in 0..voyage.n_c() {
        let cap = voyage.capacity[loc];
        for tr in 0..n_tr {
            for k in 0..n_k {
                let u = state.u[voyage.ui(loc, tr, k)];
                out.push(if cap > 0.0 { u * voyage.teu(k) / cap } else { 0.0 });
            }
        }
    }
    out.extend(state.q_now.iter().map(|q| q / q_scale));
    out.extend(episode.dist.mu.iter().map(|m| m / q_scale));
    out.extend(episode.dist.sigma.iter().map(|s| s / q_scale));
    let target = voyage.qi(state.target.tr, state.target.k);
    out.extend((0..n_q).map(|i| if i == target { 1.0 } else { 0.0 }));
    let t_seq = n_tr * n_k;
    out.push(if t_seq > 1 { state.t as f64 / (t_seq - 1) as f64 } else { 0.0 });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::VoyageConfig;
    use crate::env::Env;
    use std::sync::Arc;

    #[test]
    fn reset_state_layout() {
        let v = Arc::new(Voyage::new(VoyageConfig::mini()).unwrap());
        let env = Env::reset(v.clone(), 3, 0).unwrap();
        let s = default_q_scale(&v);
        let o = observe(&v, env.state(), env.episode(), s);
        assert_eq!(o.len(), v.n_u() + 2 * v.n_q() + v.n_q() + v.n_tr() * v.n_k() + 1);
        assert!(o[..v.n_u()].iter().all(|&x| x == 0.0));
        assert_eq!(o, observe(&v, env.state(), env.episode(), s));
        let onehot = &o[v.n_u() + 3 * v.n_q()..v.n_u() + 4 * v.n_q()];
        assert_eq!(onehot.iter().sum::<f64>(), 1.0);
        assert_eq!(*o.last().unwrap(), 0.0);
    }
}
