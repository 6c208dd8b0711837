//! Soft actor-critic losses, their gradients, and the update step.
//!
//! The projection stages are part of the environment dynamics from the
//! learner's point of view: critics score and the buffer stores the masked,
//! rectified action before projection.

use serde::{Deserialize, Serialize};

use super::buffer::Transition;
use super::fr::{fr_grad, fr_loss};
use super::nn::{Adam, Mlp};
use super::policy::{draw_noise, sample_with_noise, PolicyParams};
use crate::error::{Result, StowError};
use crate::rng::Stream;
use crate::voyage::Voyage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacHyper {
    pub lr: f64,
    /// Transitions drawn from the buffer per update round.
    pub batch: usize,
    /// The batch is split into chunks of this size, one gradient step each.
    pub minibatch: usize,
    pub gamma: f64,
    pub tau: f64,
    pub lambda_f: f64,
    pub buffer: usize,
    pub max_std: f64,
    pub init_alpha: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Random-policy steps before the first update.
    pub warmup: usize,
    /// Environment steps between update rounds.
    pub update_every: usize,
    /// Multiplies rewards before they reach the critics; `None` picks
    /// `1 / (q_scale * max revenue)`.
    pub reward_scale: Option<f64>,
}

impl Default for SacHyper {
    fn default() -> Self {
        Self {
            lr: 1.46e-4,
            batch: 64,
            minibatch: 32,
            gamma: 0.99,
            tau: 0.005,
            lambda_f: 0.283,
            buffer: 10_000,
            max_std: 9.46,
            init_alpha: 0.2,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            warmup: 500,
            update_every: 1,
            reward_scale: None,
        }
    }
}

impl SacHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(StowError::InvalidConfig(m.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if self.batch == 0 || self.minibatch == 0 || self.buffer == 0 || self.update_every == 0 {
            return bad("batch, minibatch, buffer and update_every must be positive");
        }
        if !(self.lr > 0.0 && self.max_std > 0.0 && self.init_alpha > 0.0 && self.lambda_f >= 0.0) {
            return bad("lr, max_std and init_alpha must be positive, lambda_f nonnegative");
        }
        Ok(())
    }
}

pub fn entropy_target(n_c: usize) -> f64 {
    -(n_c as f64)
}

pub fn default_reward_scale(voyage: &Voyage, params: &PolicyParams) -> f64 {
    let rev = voyage.rev.iter().cloned().fold(0.0, f64::max);
    if rev > 0.0 {
        1.0 / (params.q_scale * rev)
    } else {
        1.0
    }
}

fn q_value(params: &PolicyParams, q: &Mlp, obs: &[f64], x: &[f64]) -> f64 {
    q.forward(&params.critic_input(obs, x))[0]
}

/// Soft Bellman targets with the twin target-critic minimum.
pub fn critic_targets(
    params: &PolicyParams,
    batch: &[&Transition],
    noise: &[Vec<f64>],
    gamma: f64,
    reward_scale: f64,
) -> Result<Vec<f64>> {
    let alpha = params.alpha();
    batch
        .iter()
        .zip(noise)
        .map(|(t, eps)| {
            let r = reward_scale * t.reward;
            if t.done {
                return Ok(r);
            }
            let h = params.heads(&t.next_obs)?;
            let s = sample_with_noise(&h, eps, &t.next_mask);
            let q1 = q_value(params, &params.q1_targ, &t.next_obs, &s.x);
            let q2 = q_value(params, &params.q2_targ, &t.next_obs, &s.x);
            Ok(r + gamma * (q1.min(q2) - alpha * s.log_prob))
        })
        .collect()
}

/// Mean squared error of one critic against fixed targets, with its gradient.
pub fn critic_loss(params: &PolicyParams, q: &Mlp, batch: &[&Transition], targets: &[f64]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; q.params.len()];
    let mut loss = 0.0;
    let n = batch.len() as f64;
    for (t, y) in batch.iter().zip(targets) {
        let cache = q.forward_cache(&params.critic_input(&t.obs, &t.x));
        let err = cache.output()[0] - y;
        loss += err * err / n;
        q.backward(&cache, &[2.0 * err / n], &mut grad);
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub mean_log_prob: f64,
    pub fr: f64,
}

/// `mean(alpha log pi - min Q + lambda_f fr)` with reparameterized noise.
pub fn actor_loss(
    params: &PolicyParams,
    voyage: &Voyage,
    batch: &[&Transition],
    noise: &[Vec<f64>],
    lambda_f: f64,
) -> Result<ActorLoss> {
    let n_c = params.arch.n_c;
    let obs_dim = params.arch.obs_dim;
    let alpha = params.alpha();
    let nb = batch.len() as f64;
    let mut out = ActorLoss {
        loss: 0.0,
        grad: vec![0.0; params.actor.params.len()],
        mean_log_prob: 0.0,
        fr: 0.0,
    };
    let mut scratch = vec![0.0; params.q1.params.len()];
    for (t, eps) in batch.iter().zip(noise) {
        let cache = params.actor.forward_cache(&t.obs);
        let h = super::policy::heads_from_output(cache.output(), n_c, params.max_std)?;
        let s = sample_with_noise(&h, eps, &t.mask);
        let ci = params.critic_input(&t.obs, &s.x);
        let c1 = params.q1.forward_cache(&ci);
        let c2 = params.q2.forward_cache(&ci);
        let (qn, qc) = if c1.output()[0] <= c2.output()[0] {
            (&params.q1, &c1)
        } else {
            (&params.q2, &c2)
        };
        let q = qc.output()[0];
        let dci = qn.backward(qc, &[1.0], &mut scratch);
        let ph = t.poly.polyhedron(voyage).normalized();
        let fr = fr_loss(&s.x, &ph);
        let dfr = fr_grad(&s.x, &ph);

        out.loss += (alpha * s.log_prob - q + lambda_f * fr) / nb;
        out.mean_log_prob += s.log_prob / nb;
        out.fr += fr / nb;

        let mut dout = vec![0.0; 2 * n_c];
        for j in 0..n_c {
            if !t.mask[j] {
                continue;
            }
            let dx = if s.raw[j] > 0.0 {
                -dci[obs_dim + j] / params.q_scale + lambda_f * dfr[j]
            } else {
                0.0
            };
            let dmu = dx;
            let dsigma = dx * eps[j] - alpha / h.sigma[j];
            dout[j] = dmu * h.dmu[j] / nb;
            dout[n_c + j] = dsigma * h.dsigma[j] / nb;
        }
        params.actor.backward(&cache, &dout, &mut out.grad);
    }
    Ok(out)
}

/// `-alpha (mean log pi + target)` and its derivative w.r.t. `log alpha`.
pub fn temperature_loss(log_alpha: f64, mean_log_prob: f64, target: f64) -> (f64, f64) {
    let a = log_alpha.exp();
    let l = -a * (mean_log_prob + target);
    (l, l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub critic1: f64,
    pub critic2: f64,
    pub actor: f64,
    pub temperature: f64,
    pub alpha: f64,
    pub fr: f64,
    pub mean_log_prob: f64,
}

#[derive(Debug, Clone)]
pub struct SacTrainer {
    pub params: PolicyParams,
    pub hyper: SacHyper,
    pub reward_scale: f64,
    opt_actor: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    opt_alpha: Adam,
    pub updates: usize,
}

impl SacTrainer {
    pub fn new(voyage: &Voyage, params: PolicyParams, hyper: SacHyper) -> Result<Self> {
        hyper.validate()?;
        let reward_scale = hyper.reward_scale.unwrap_or_else(|| default_reward_scale(voyage, &params));
        Ok(Self {
            opt_actor: Adam::new(params.actor.params.len(), hyper.lr),
            opt_q1: Adam::new(params.q1.params.len(), hyper.lr),
            opt_q2: Adam::new(params.q2.params.len(), hyper.lr),
            opt_alpha: Adam::new(1, hyper.lr),
            params,
            hyper,
            reward_scale,
            updates: 0,
        })
    }

    /// One gradient step on every loss over `batch`, then the target update.
    pub fn update(&mut self, voyage: &Voyage, batch: &[&Transition], rng: &mut Stream) -> Result<UpdateReport> {
        if batch.is_empty() {
            return Err(StowError::Contract("empty batch".into()));
        }
        let n_c = self.params.arch.n_c;
        let h = &self.hyper;
        let next_noise: Vec<Vec<f64>> = batch.iter().map(|_| draw_noise(n_c, rng)).collect();
        let targets = critic_targets(&self.params, batch, &next_noise, h.gamma, self.reward_scale)?;
        let (l1, g1) = critic_loss(&self.params, &self.params.q1, batch, &targets);
        let (l2, g2) = critic_loss(&self.params, &self.params.q2, batch, &targets);
        self.opt_q1.step(&mut self.params.q1.params, &g1);
        self.opt_q2.step(&mut self.params.q2.params, &g2);

        let noise: Vec<Vec<f64>> = batch.iter().map(|_| draw_noise(n_c, rng)).collect();
        let al = actor_loss(&self.params, voyage, batch, &noise, h.lambda_f)?;
        self.opt_actor.step(&mut self.params.actor.params, &al.grad);

        let (lt, gt) = temperature_loss(self.params.log_alpha, al.mean_log_prob, entropy_target(n_c));
        let mut la = [self.params.log_alpha];
        self.opt_alpha.step(&mut la, &[gt]);
        self.params.log_alpha = la[0];

        let tau = h.tau;
        self.params.q1_targ.soft_update(&self.params.q1, tau);
        self.params.q2_targ.soft_update(&self.params.q2, tau);
        self.updates += 1;

        let report = UpdateReport {
            critic1: l1,
            critic2: l2,
            actor: al.loss,
            temperature: lt,
            alpha: self.params.alpha(),
            fr: al.fr,
            mean_log_prob: al.mean_log_prob,
        };
        let finite = [l1, l2, al.loss, lt].iter().all(|v| v.is_finite()) && self.params.is_finite();
        if !finite {
            return Err(StowError::Numerical {
                iteration: self.updates,
                detail: format!("non-finite loss or parameters: {report:?}"),
            });
        }
        Ok(report)
    }
}
