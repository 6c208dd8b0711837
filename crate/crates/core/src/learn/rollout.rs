//! Episode runner and multi-rollout evaluation.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::obs::observe;
use super::policy::{policy_mean, policy_sample, PolicyParams};
use crate::env::audit::audit_reports;
use crate::env::trace::{state_digest, EpisodeTrace, StepRecord, TraceHeader, Totals};
use crate::env::{CmConvention, Env, State};
use crate::error::{Result, StowError};
use crate::feasibility::{Mode, PipelineSpec};
use crate::instances::Episode;
use crate::rng::{substream, Stream};
use crate::voyage::Voyage;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct ActCtx<'a> {
    pub voyage: &'a Voyage,
    pub state: &'a State,
    pub episode: &'a Episode,
    /// Open locations for this step.
    pub mask: &'a [bool],
}

pub trait Policy: Sync {
    fn name(&self) -> String;
    /// Raw action, one entry per location, before masking and projection.
    fn act(&self, ctx: &ActCtx, rng: &mut Stream) -> Result<Vec<f64>>;
}

/// A trained actor, sampled or run at its mean.
#[derive(Debug, Clone)]
pub struct SacPolicy {
    pub params: PolicyParams,
    pub stochastic: bool,
}

impl Policy for SacPolicy {
    fn name(&self) -> String {
        "sac".into()
    }

    fn act(&self, ctx: &ActCtx, rng: &mut Stream) -> Result<Vec<f64>> {
        let obs = observe(ctx.voyage, ctx.state, ctx.episode, self.params.q_scale);
        if self.stochastic {
            Ok(policy_sample(&self.params, &obs, ctx.mask, rng)?.x)
        } else {
            policy_mean(&self.params, &obs, ctx.mask)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub objective: f64,
    pub feasible: bool,
    pub max_residual: f64,
    /// Wall-clock seconds spent in the policy and the pipeline.
    pub seconds: f64,
    pub trace: EpisodeTrace,
}

/// Streams for rollout `r` of an instance.
pub fn rollout_streams(seed: u64, index: u64, r: usize) -> (Stream, Stream) {
    let s = seed.wrapping_add((r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (Stream::new(s, index, substream::POLICY), Stream::new(s, index, substream::MASK))
}

pub fn run_episode(
    voyage: &Arc<Voyage>,
    episode: &Arc<Episode>,
    policy: &dyn Policy,
    pipeline: &PipelineSpec,
    mode: Mode,
    conv: CmConvention,
    rng_policy: &mut Stream,
    rng_mask: &mut Stream,
) -> Result<EpisodeOutcome> {
    let schedule = Arc::new(crate::env::port_schedule(voyage.n_ports(), voyage.n_k())?);
    let mut env = Env::with_schedule(voyage.clone(), schedule, episode.clone())?.with_convention(conv);
    let header = TraceHeader {
        version: VERSION.into(),
        config_digest: voyage.cfg.digest(),
        seed: episode.base_seed,
        episode: episode.index,
        pipeline: pipeline.to_string(),
    };
    let mut trace = EpisodeTrace::new(header, episode.demand.q.clone());
    let mut seconds = 0.0;
    let mut totals = Totals::default();
    loop {
        let state = env.state().clone();
        let start = Instant::now();
        let mask = pipeline.mask(voyage, &state, rng_mask);
        let ctx = ActCtx {
            voyage,
            state: &state,
            episode,
            mask: &mask.xm,
        };
        let raw = policy.act(&ctx, rng_policy)?;
        let out = pipeline.apply_with_mask(voyage, &state, &raw, mask, mode)?;
        seconds += start.elapsed().as_secs_f64();
        let x: Vec<f64> = out.projected.iter().map(|v| v.max(0.0)).collect();
        let step = env.step(&x).map_err(|e| step_context(e, state.t))?;
        totals.revenue += step.revenue;
        totals.objective += step.reward;
        trace.steps.push(StepRecord {
            t: state.t,
            pol: voyage.ti.pair(state.target.tr).0,
            pod: voyage.ti.pair(state.target.tr).1,
            k: state.target.k,
            state_digest: state_digest(&state.u),
            raw,
            masked: out.masked,
            projected: x,
            reward: step.reward,
        });
        if step.done {
            break;
        }
    }
    let c = &voyage.cfg;
    for r in env.reports() {
        totals.ho_cost += c.ct_ho * r.ho.iter().sum::<f64>();
        totals.cm_cost += r.cost - c.ct_ho * r.ho.iter().sum::<f64>();
    }
    trace.ports = env.reports().to_vec();
    trace.totals = totals;
    trace.complete = true;
    let audit = audit_reports(voyage, &episode.demand.q, env.reports())?;
    Ok(EpisodeOutcome {
        objective: totals.objective,
        feasible: audit.feasible,
        max_residual: audit.max_residual,
        seconds,
        trace,
    })
}

fn step_context(e: StowError, t: usize) -> StowError {
    match e {
        StowError::Contract(m) => StowError::Contract(format!("step {t}: {m}")),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub pipeline: PipelineSpec,
    pub rollouts: usize,
    pub seed: u64,
    pub threads: usize,
    pub convention: CmConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub index: u64,
    pub objective: f64,
    pub feasible: bool,
    pub max_residual: f64,
    /// Summed over every rollout of the instance.
    pub seconds: f64,
    pub best_rollout: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub instances: Vec<InstanceResult>,
    pub mean_objective: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
    pub mean_seconds: f64,
    pub feasible_pct: f64,
}

/// Mean and 95% half-width `1.96 s / sqrt(n)` with the sample deviation.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

impl EvalSummary {
    pub fn from_instances(instances: Vec<InstanceResult>) -> Self {
        let objs: Vec<f64> = instances.iter().map(|r| r.objective).collect();
        let (mean_objective, ci95) = mean_ci95(&objs);
        let n = instances.len().max(1) as f64;
        Self {
            mean_objective,
            ci95,
            mean_seconds: instances.iter().map(|r| r.seconds).sum::<f64>() / n,
            feasible_pct: 100.0 * instances.iter().filter(|r| r.feasible).count() as f64 / n,
            instances,
        }
    }
}

fn eval_instance(
    voyage: &Arc<Voyage>,
    policy: &dyn Policy,
    episode: &Arc<Episode>,
    spec: &EvalSpec,
) -> Result<InstanceResult> {
    let mut best: Option<InstanceResult> = None;
    let mut seconds = 0.0;
    for r in 0..spec.rollouts {
        let (mut rp, mut rm) = rollout_streams(spec.seed, episode.index, r);
        let out = run_episode(voyage, episode, policy, &spec.pipeline, Mode::Inference, spec.convention, &mut rp, &mut rm)?;
        seconds += out.seconds;
        let better = match &best {
            None => true,
            Some(b) => (out.feasible, out.objective) > (b.feasible, b.objective),
        };
        if better {
            best = Some(InstanceResult {
                index: episode.index,
                objective: out.objective,
                feasible: out.feasible,
                max_residual: out.max_residual,
                seconds: 0.0,
                best_rollout: r,
            });
        }
    }
    let mut best = best.expect("at least one rollout");
    best.seconds = seconds;
    Ok(best)
}

/// Runs `spec.rollouts` episodes per instance and keeps the best, feasible
/// rollouts first. Instances are spread over `spec.threads` workers; results
/// do not depend on the thread count.
pub fn evaluate(
    voyage: &Arc<Voyage>,
    policy: &dyn Policy,
    episodes: &[Arc<Episode>],
    spec: &EvalSpec,
) -> Result<EvalSummary> {
    if spec.rollouts == 0 {
        return Err(StowError::Contract("rollouts must be at least 1".into()));
    }
    spec.pipeline.validate()?;
    let threads = spec.threads.clamp(1, episodes.len().max(1));
    let mut slots: Vec<Option<Result<InstanceResult>>> = (0..episodes.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = slots.chunks_mut(episodes.len().div_ceil(threads).max(1)).collect();
        let mut start = 0;
        for chunk in chunks {
            let first = start;
            start += chunk.len();
            scope.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(eval_instance(voyage, policy, &episodes[first + i], spec));
                }
            });
        }
    });
    let instances = slots.into_iter().map(|s| s.expect("worker filled slot")).collect::<Result<Vec<_>>>()?;
    Ok(EvalSummary::from_instances(instances))
}
