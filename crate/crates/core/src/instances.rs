//! Perturbed-uniform demand generator.

use serde::{Deserialize, Serialize};

use crate::rng::{substream, Stream};
use crate::voyage::Voyage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandMode {
    Continuous,
    Integral,
}

/// Per-(tr, k) distribution parameters of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandDistribution {
    pub ub_perturbed: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub mode: DemandMode,
    pub seed: u64,
}

/// Realized demand, laid out `tr * |K| + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandTensor {
    pub q: Vec<f64>,
}

/// Environment parameters of one episode plus the pre-drawn realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub base_seed: u64,
    pub index: u64,
    pub dist: DemandDistribution,
    pub demand: DemandTensor,
    /// Draws whose perturbed bound fell below 1 and were clamped to 1.
    pub clamp_warnings: usize,
}

/// Unperturbed bounds. Chosen so that, with mean `ub/2`, the expected TEU on
/// board at the busiest port equals `UR` times vessel TEU.
pub fn upper_bounds(voyage: &Voyage) -> Vec<f64> {
    let n_k = voyage.n_k() as f64;
    let denom_ports = voyage.ti.max_onboard() as f64;
    let total = voyage.capacity.iter().sum::<f64>();
    let mut ub = Vec::with_capacity(voyage.n_q());
    for _ in 0..voyage.n_tr() {
        for k in 0..voyage.n_k() {
            ub.push(2.0 * voyage.cfg.ur * total / (voyage.teu(k) * n_k * denom_ports));
        }
    }
    ub
}

/// Draws `(q, distribution)` from a fresh demand stream.
pub fn sample_demand(
    ub: &[f64],
    rho: f64,
    mode: DemandMode,
    seed: u64,
) -> (DemandTensor, DemandDistribution, usize) {
    let mut rng = Stream::new(seed, 0, substream::DEMAND);
    sample_demand_with(ub, rho, mode, seed, &mut rng)
}

/// Per element, in `tr * |K| + k` order: one perturbation draw, then one
/// demand draw.
pub fn sample_demand_with(
    ub: &[f64],
    rho: f64,
    mode: DemandMode,
    seed: u64,
    rng: &mut Stream,
) -> (DemandTensor, DemandDistribution, usize) {
    let n = ub.len();
    let mut ubp = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    let mut warnings = 0;
    for &b in ub {
        let u = rng.uniform();
        let ut = b * (1.0 + (2.0 * u - 1.0) * rho);
        ubp.push(ut);
        let (draw, clamped) = draw_one(ut, mode, rng);
        warnings += clamped as usize;
        q.push(draw);
    }
    let mu = ubp.iter().map(|v| v / 2.0).collect();
    let sigma = ubp.iter().map(|v| v / 12f64.sqrt()).collect();
    (
        DemandTensor { q },
        DemandDistribution {
            ub_perturbed: ubp,
            mu,
            sigma,
            mode,
            seed,
        },
        warnings,
    )
}

/// One draw from U(1, ub) or its integer counterpart. Returns `(value, clamped)`.
/// A draw is always consumed so the stream stays aligned.
pub fn draw_one(ub: f64, mode: DemandMode, rng: &mut Stream) -> (f64, bool) {
    let u = rng.uniform();
    match mode {
        DemandMode::Continuous => {
            if ub < 1.0 {
                (1.0, true)
            } else {
                (1.0 + u * (ub - 1.0), false)
            }
        }
        DemandMode::Integral => {
            let n = ub.floor();
            if n < 1.0 {
                (1.0, true)
            } else {
                ((1.0 + (u * n).floor()).min(n), false)
            }
        }
    }
}

/// Episode parameters, a pure function of `(base_seed, episode_index)`.
pub fn demand_stream(voyage: &Voyage, base_seed: u64, index: u64, mode: DemandMode) -> Episode {
    let ub = upper_bounds(voyage);
    let mut rng = Stream::new(base_seed, index, substream::DEMAND);
    let (demand, dist, clamp_warnings) =
        sample_demand_with(&ub, voyage.cfg.rho, mode, base_seed, &mut rng);
    Episode {
        base_seed,
        index,
        dist,
        demand,
        clamp_warnings,
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
    fn mini_upper_bounds() {
        let v = mini();
        let ub = upper_bounds(&v);
        for tr in 0..v.n_tr() {
            assert!((ub[v.qi(tr, 0)] - 8.8).abs() < 1e-12);
            assert!((ub[v.qi(tr, 1)] - 4.4).abs() < 1e-12);
        }
        // expected onboard TEU at the busiest port, using mean ub/2
        for p in 1..v.n_ports() {
            let teu: f64 = v
                .ti
                .onboard(p)
                .iter()
                .flat_map(|&tr| (0..v.n_k()).map(move |k| (tr, k)))
                .map(|(tr, k)| ub[v.qi(tr, k)] / 2.0 * v.teu(k))
                .sum();
            assert!((teu - 1.1 * 16.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bounds_scale_linearly() {
        let mut cfg = VoyageConfig::mini();
        cfg.ur = 0.0;
        assert!(upper_bounds(&Voyage::new(cfg.clone()).unwrap()).iter().all(|&b| b == 0.0));
        let base = upper_bounds(&mini());
        let mut cfg = VoyageConfig::mini();
        cfg.total_teu = 32.0;
        let doubled = upper_bounds(&Voyage::new(cfg).unwrap());
        for (a, b) in base.iter().zip(&doubled) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rho_keeps_bounds() {
        let ub = vec![3.0, 7.5, 10.0];
        let (_, dist, _) = sample_demand(&ub, 0.0, DemandMode::Continuous, 5);
        assert_eq!(dist.ub_perturbed, ub);
    }

    #[test]
    fn draws_within_support_and_formulas_exact() {
        let ub = vec![2.5, 8.8, 4.4, 30.0];
        for seed in 0..200 {
            for mode in [DemandMode::Continuous, DemandMode::Integral] {
                let (q, d, w) = sample_demand(&ub, 0.1, mode, seed);
                assert_eq!(w, 0);
                for i in 0..ub.len() {
                    let r = d.ub_perturbed[i] / ub[i];
                    assert!((0.9 - 1e-12..=1.1 + 1e-12).contains(&r));
                    assert!(q.q[i] >= 1.0 && q.q[i] <= d.ub_perturbed[i]);
                    if mode == DemandMode::Integral {
                        assert_eq!(q.q[i].fract(), 0.0);
                    }
                    assert_eq!(d.mu[i], d.ub_perturbed[i] / 2.0);
                    assert_eq!(d.sigma[i], d.ub_perturbed[i] / 12f64.sqrt());
                }
            }
        }
    }

    #[test]
    fn tiny_bounds_clamp_and_count() {
        let (q, _, w) = sample_demand(&[0.5, 0.2, 3.0], 0.0, DemandMode::Integral, 1);
        assert_eq!(w, 2);
        assert_eq!(&q.q[..2], &[1.0, 1.0]);
        let (_, _, w) = sample_demand(&[0.5], 0.0, DemandMode::Continuous, 1);
        assert_eq!(w, 1);
    }

    #[test]
    fn stream_deterministic_and_distinct() {
        let v = mini();
        let a = demand_stream(&v, 11, 3, DemandMode::Continuous);
        let b = demand_stream(&v, 11, 3, DemandMode::Continuous);
        assert_eq!(a, b);
        let c = demand_stream(&v, 11, 4, DemandMode::Continuous);
        assert_ne!(a.demand.q, c.demand.q);
        for (m, u) in a.dist.mu.iter().zip(&a.dist.ub_perturbed) {
            assert_eq!(*m, u / 2.0);
        }
    }
}
