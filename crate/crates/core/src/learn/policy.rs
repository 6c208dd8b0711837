//! Policy parameters and the rectified Gaussian actor head.

use serde::{Deserialize, Serialize};

use super::nn::{sigmoid, softplus, Mlp};
use super::obs::{default_q_scale, obs_len};
use crate::error::{Result, StowError};
use crate::rng::Stream;
use crate::voyage::Voyage;

/// Floor added to the softplus standard deviation.
pub const SIGMA_MIN: f64 = 1e-3;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arch {
    pub obs_dim: usize,
    pub n_c: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Hidden activation; the output layers are linear.
    pub activation: String,
}

impl Arch {
    pub fn actor_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.obs_dim];
        s.extend(&self.actor_hidden);
        s.push(2 * self.n_c);
        s
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.obs_dim + self.n_c];
        s.extend(&self.critic_hidden);
        s.push(1);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub arch: Arch,
    /// Divides demand-like observation entries and critic action inputs.
    pub q_scale: f64,
    pub max_std: f64,
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_targ: Mlp,
    pub q2_targ: Mlp,
    pub log_alpha: f64,
}

impl PolicyParams {
    pub fn init(
        voyage: &Voyage,
        actor_hidden: &[usize],
        critic_hidden: &[usize],
        max_std: f64,
        init_alpha: f64,
        rng: &mut Stream,
    ) -> Self {
        let arch = Arch {
            obs_dim: obs_len(voyage),
            n_c: voyage.n_c(),
            actor_hidden: actor_hidden.to_vec(),
            critic_hidden: critic_hidden.to_vec(),
            activation: "tanh".into(),
        };
        let actor = Mlp::new(&arch.actor_sizes(), 0.1, rng);
        let q1 = Mlp::new(&arch.critic_sizes(), 1.0, rng);
        let q2 = Mlp::new(&arch.critic_sizes(), 1.0, rng);
        Self {
            q_scale: default_q_scale(voyage),
            max_std,
            q1_targ: q1.clone(),
            q2_targ: q2.clone(),
            actor,
            q1,
            q2,
            log_alpha: init_alpha.ln(),
            arch,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn is_finite(&self) -> bool {
        self.log_alpha.is_finite()
            && [&self.actor, &self.q1, &self.q2, &self.q1_targ, &self.q2_targ]
                .iter()
                .all(|m| m.is_finite())
    }

    pub fn heads(&self, obs: &[f64]) -> Result<Heads> {
        heads_from_output(&self.actor.forward(obs), self.arch.n_c, self.max_std)
    }

    pub fn critic_input(&self, obs: &[f64], x: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(obs.len() + x.len());
        v.extend_from_slice(obs);
        v.extend(x.iter().map(|a| a / self.q_scale));
        v
    }
}

/// Gaussian parameters and their derivatives w.r.t. the raw actor output.
#[derive(Debug, Clone, PartialEq)]
pub struct Heads {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub dmu: Vec<f64>,
    pub dsigma: Vec<f64>,
}

pub fn heads_from_output(out: &[f64], n: usize, max_std: f64) -> Result<Heads> {
    if out.len() != 2 * n {
        return Err(StowError::Contract(format!("actor output has {} entries, expected {}", out.len(), 2 * n)));
    }
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(StowError::Numerical {
            iteration: 0,
            detail: format!("non-finite actor output at {i}"),
        });
    }
    let mut h = Heads {
        mu: Vec::with_capacity(n),
        sigma: Vec::with_capacity(n),
        dmu: Vec::with_capacity(n),
        dsigma: Vec::with_capacity(n),
    };
    for i in 0..n {
        h.mu.push(softplus(out[i]));
        h.dmu.push(sigmoid(out[i]));
        let s = softplus(out[n + i]) + SIGMA_MIN;
        if s >= max_std {
            h.sigma.push(max_std);
            h.dsigma.push(0.0);
        } else {
            h.sigma.push(s);
            h.dsigma.push(sigmoid(out[n + i]));
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Unrectified draw `mu + sigma * eps`.
    pub raw: Vec<f64>,
    /// Rectified and masked action.
    pub x: Vec<f64>,
    pub eps: Vec<f64>,
    /// Gaussian log density of `raw`, summed over open coordinates.
    pub log_prob: f64,
}

pub fn sample_with_noise(heads: &Heads, eps: &[f64], mask: &[bool]) -> Sample {
    let n = heads.mu.len();
    let mut raw = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut log_prob = 0.0;
    for i in 0..n {
        let r = heads.mu[i] + heads.sigma[i] * eps[i];
        raw.push(r);
        x.push(if mask[i] { r.max(0.0) } else { 0.0 });
        if mask[i] {
            log_prob += -0.5 * eps[i] * eps[i] - heads.sigma[i].ln() - HALF_LN_2PI;
        }
    }
    Sample {
        raw,
        x,
        eps: eps.to_vec(),
        log_prob,
    }
}

pub fn draw_noise(n: usize, rng: &mut Stream) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

pub fn policy_sample(params: &PolicyParams, obs: &[f64], mask: &[bool], rng: &mut Stream) -> Result<Sample> {
    if let Some(i) = obs.iter().position(|v| !v.is_finite()) {
        return Err(StowError::Contract(format!("non-finite observation entry at {i}")));
    }
    let heads = params.heads(obs)?;
    let eps = draw_noise(params.arch.n_c, rng);
    Ok(sample_with_noise(&heads, &eps, mask))
}

/// Deterministic action: the rectified, masked mean.
pub fn policy_mean(params: &PolicyParams, obs: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    let heads = params.heads(obs)?;
    Ok(heads
        .mu
        .iter()
        .zip(mask)
        .map(|(&m, &open)| if open { m.max(0.0) } else { 0.0 })
        .collect())
}
