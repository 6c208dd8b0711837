//! Training loop: interaction through mask and projection, replay, updates
//! and periodic validation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::baselines::RandomPolicy;
use super::buffer::{ReplayBuffer, Transition};
use super::obs::observe;
use super::policy::{policy_sample, PolicyParams};
use super::rollout::{evaluate, ActCtx, EvalSpec, Policy, SacPolicy};
use super::sac::{SacHyper, SacTrainer, UpdateReport};
use crate::env::{CmConvention, Env};
use crate::error::{Result, StowError};
use crate::feasibility::{apply_mask, Mode, PipelineSpec, StepPolyParams};
use crate::instances::{demand_stream, DemandMode};
use crate::rng::{substream, Stream};
use crate::voyage::Voyage;

/// Offset separating validation instances from training episodes.
pub const VALIDATION_SEED_OFFSET: u64 = 0x5A11_DA7E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hyper: SacHyper,
    /// Environment steps.
    pub budget: usize,
    pub seed: u64,
    pub pipeline: PipelineSpec,
    pub validation_instances: usize,
    /// Validation runs after every this fraction of the budget.
    pub validation_every: f64,
    pub convention: CmConvention,
}

impl TrainConfig {
    pub fn new(pipeline: PipelineSpec, budget: usize, seed: u64) -> Self {
        Self {
            hyper: SacHyper::default(),
            budget,
            seed,
            pipeline,
            validation_instances: 8,
            validation_every: 0.2,
            convention: CmConvention::PairSum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TrainEvent {
    Update { step: usize, update: usize, report: UpdateReport },
    Episode { step: usize, episode: u64, ret: f64 },
    Validation { step: usize, objective: f64, feasible_pct: f64, best: bool },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub steps: usize,
    pub updates: usize,
    pub episodes: usize,
    pub best_step: usize,
    pub events: Vec<TrainEvent>,
}

fn validation_score(voyage: &Arc<Voyage>, params: &PolicyParams, cfg: &TrainConfig) -> Result<(f64, f64)> {
    let seed = cfg.seed.wrapping_add(VALIDATION_SEED_OFFSET);
    let eps: Vec<_> = (0..cfg.validation_instances as u64)
        .map(|i| Arc::new(demand_stream(voyage, seed, i, DemandMode::Continuous)))
        .collect();
    let spec = EvalSpec {
        pipeline: cfg.pipeline.clone(),
        rollouts: 1,
        seed,
        threads: 1,
        convention: cfg.convention,
    };
    let policy = SacPolicy {
        params: params.clone(),
        stochastic: false,
    };
    let s = evaluate(voyage, &policy, &eps, &spec)?;
    Ok((s.feasible_pct, s.mean_objective))
}

/// Trains from fresh parameters and returns the snapshot with the highest
/// mean validation objective (deterministic actions, training pipeline).
/// `on_event` sees every event as it happens; the same events are kept in the
/// returned metrics.
pub fn train(
    voyage: &Arc<Voyage>,
    cfg: &TrainConfig,
    on_event: &mut dyn FnMut(&TrainEvent),
) -> Result<(PolicyParams, TrainMetrics)> {
    let h = &cfg.hyper;
    h.validate()?;
    cfg.pipeline.validate()?;
    let mut init_rng = Stream::new(cfg.seed, 0, substream::INIT);
    let params = PolicyParams::init(voyage, &h.actor_hidden, &h.critic_hidden, h.max_std, h.init_alpha, &mut init_rng);
    let mut metrics = TrainMetrics::default();
    if cfg.budget == 0 {
        return Ok((params, metrics));
    }
    if cfg.budget < h.warmup {
        return Err(StowError::InvalidConfig(format!(
            "budget {} is below the warmup of {} steps",
            cfg.budget, h.warmup
        )));
    }
    let mut trainer = SacTrainer::new(voyage, params, h.clone())?;
    let mut buffer = ReplayBuffer::new(h.buffer);
    let mut buf_rng = Stream::new(cfg.seed, 0, substream::BUFFER);
    let mut upd_rng = Stream::new(cfg.seed, 1, substream::BUFFER);
    let period = ((cfg.budget as f64 * cfg.validation_every).ceil() as usize).max(1);
    let mut best: Option<(f64, PolicyParams)> = None;
    let mut emit = |metrics: &mut TrainMetrics, e: TrainEvent| {
        on_event(&e);
        metrics.events.push(e);
    };

    let mut step = 0usize;
    let mut ep_index = 0u64;
    while step < cfg.budget {
        let episode = Arc::new(demand_stream(voyage, cfg.seed, ep_index, DemandMode::Continuous));
        let mut env = Env::new(voyage.clone(), (*episode).clone())?.with_convention(cfg.convention);
        let mut rng_policy = Stream::new(cfg.seed, ep_index, substream::POLICY);
        let mut rng_mask = Stream::new(cfg.seed, ep_index, substream::MASK);
        let mut pending: Option<Transition> = None;
        let mut ret = 0.0;
        loop {
            let state = env.state().clone();
            let mask = cfg.pipeline.mask(voyage, &state, &mut rng_mask);
            let obs = observe(voyage, &state, &episode, trainer.params.q_scale);
            if let Some(mut t) = pending.take() {
                t.next_mask = mask.xm.clone();
                buffer.push(t);
            }
            let x = if step < h.warmup {
                let ctx = ActCtx {
                    voyage,
                    state: &state,
                    episode: &episode,
                    mask: &mask.xm,
                };
                apply_mask(&RandomPolicy.act(&ctx, &mut rng_policy)?, &mask.xm)
            } else {
                policy_sample(&trainer.params, &obs, &mask.xm, &mut rng_policy)?.x
            };
            let poly = StepPolyParams::from_state(voyage, &state);
            let xm = mask.xm.clone();
            let out = cfg.pipeline.apply_with_mask(voyage, &state, &x, mask, Mode::Train)?;
            let projected: Vec<f64> = out.projected.iter().map(|v| v.max(0.0)).collect();
            let outcome = env
                .step(&projected)
                .map_err(|e| StowError::Contract(format!("training step {step}, episode {ep_index}: {e}")))?;
            ret += outcome.reward;
            let t = Transition {
                obs,
                x,
                reward: outcome.reward,
                next_obs: observe(voyage, env.state(), &episode, trainer.params.q_scale),
                done: outcome.done,
                next_mask: xm.clone(),
                mask: xm,
                poly,
            };
            if outcome.done {
                buffer.push(t);
            } else {
                pending = Some(t);
            }
            step += 1;

            if step >= h.warmup && step % h.update_every == 0 && buffer.len() >= h.minibatch {
                let batch = buffer.sample(h.batch, &mut buf_rng);
                for chunk in batch.chunks(h.minibatch) {
                    let report = trainer.update(voyage, chunk, &mut upd_rng)?;
                    let update = trainer.updates;
                    emit(&mut metrics, TrainEvent::Update { step, update, report });
                }
            }
            if step % period == 0 || step == cfg.budget {
                let (feasible_pct, objective) = validation_score(voyage, &trainer.params, cfg)?;
                let is_best = best.as_ref().map_or(true, |(s, _)| objective > *s);
                if is_best {
                    best = Some((objective, trainer.params.clone()));
                    metrics.best_step = step;
                }
                emit(
                    &mut metrics,
                    TrainEvent::Validation {
                        step,
                        objective,
                        feasible_pct,
                        best: is_best,
                    },
                );
            }
            if outcome.done || step >= cfg.budget {
                break;
            }
        }
        emit(&mut metrics, TrainEvent::Episode { step, episode: ep_index, ret });
        ep_index += 1;
    }
    metrics.steps = step;
    metrics.updates = trainer.updates;
    metrics.episodes = ep_index as usize;
    let params = best.map(|(_, p)| p).unwrap_or(trainer.params);
    Ok((params, metrics))
}
