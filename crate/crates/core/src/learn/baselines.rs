//! Policies that need no training.

use super::rollout::{ActCtx, Policy};
use crate::env::residual_demand;
use crate::error::Result;
use crate::rng::Stream;

/// Each open location draws `U(0, residual demand)` containers.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random_feasible".into()
    }

    fn act(&self, ctx: &ActCtx, rng: &mut Stream) -> Result<Vec<f64>> {
        let res = residual_demand(ctx.voyage, ctx.state).max(0.0);
        Ok(ctx
            .mask
            .iter()
            .map(|&open| if open { rng.uniform_in(0.0, res) } else { 0.0 })
            .collect())
    }
}

/// Loads the residual demand of the current target into open locations,
/// roomiest first, up to each location's free capacity.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPolicy;

impl Policy for GreedyPolicy {
    fn name(&self) -> String {
        "greedy_revenue".into()
    }

    fn act(&self, ctx: &ActCtx, _rng: &mut Stream) -> Result<Vec<f64>> {
        let v = ctx.voyage;
        let teu = v.teu(ctx.state.target.k);
        let used = v.teu_load(&ctx.state.u);
        let room: Vec<f64> = (0..v.n_c())
            .map(|l| if ctx.mask[l] { ((v.capacity[l] - used[l]) / teu).max(0.0) } else { 0.0 })
            .collect();
        let mut order: Vec<usize> = (0..v.n_c()).filter(|&l| ctx.mask[l]).collect();
        order.sort_by(|&a, &b| room[b].total_cmp(&room[a]).then(a.cmp(&b)));
        let mut left = residual_demand(v, ctx.state).max(0.0);
        let mut x = vec![0.0; v.n_c()];
        for l in order {
            let take = left.min(room[l]);
            x[l] = take;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        Ok(x)
    }
}
