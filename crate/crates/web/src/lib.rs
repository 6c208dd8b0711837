//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain arguments and returns a JSON string. The same
//! functions without the `wasm_bindgen` wrappers are public for native tests.

use std::sync::Arc;

use serde::Serialize;
use stowlab_core::env::audit::audit_reports;
use stowlab_core::env::Env;
use stowlab_core::feasibility::{cp_project, vp_project, CpParams, Mode, PipelineSpec, Polyhedron, RowLabel, VpParams};
use stowlab_core::instances::{demand_stream, DemandMode};
use stowlab_core::learn::{ActCtx, GreedyPolicy, Policy, RandomPolicy};
use stowlab_core::rng::{substream, Stream};
use stowlab_core::{Voyage, VoyageConfig};
use wasm_bindgen::prelude::*;

fn voyage(preset: &str) -> Result<Arc<Voyage>, String> {
    let cfg = VoyageConfig::preset(preset).map_err(|e| e.to_string())?;
    Ok(Arc::new(Voyage::new(cfg).map_err(|e| e.to_string())?))
}

#[derive(Debug, Serialize)]
pub struct Frame {
    pub t: usize,
    pub port: usize,
    pub pol: usize,
    pub pod: usize,
    pub k: usize,
    /// Locations the mask left open.
    pub open: Vec<bool>,
    pub action: Vec<f64>,
    pub reward: f64,
    /// TEU on board per location after the step, split by destination port.
    pub teu_by_pod: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct EpisodeView {
    pub n_bays: usize,
    pub n_decks: usize,
    pub n_blocks: usize,
    pub n_ports: usize,
    pub capacity: Vec<f64>,
    pub frames: Vec<Frame>,
    pub objective: f64,
    pub feasible: bool,
    pub max_residual: f64,
}

/// Plays one episode of a baseline policy (`greedy` or `random`) through a
/// pipeline such as `PBS/CP`.
pub fn episode_view(preset: &str, seed: u64, index: u64, policy: &str, pipeline: &str) -> Result<EpisodeView, String> {
    let v = voyage(preset)?;
    let spec = PipelineSpec::parse(pipeline).map_err(|e| e.to_string())?;
    let policy: Box<dyn Policy> = match policy {
        "greedy" => Box::new(GreedyPolicy),
        "random" => Box::new(RandomPolicy),
        other => return Err(format!("unknown policy `{other}`")),
    };
    let episode = Arc::new(demand_stream(&v, seed, index, DemandMode::Continuous));
    let mut env = Env::new(v.clone(), (*episode).clone()).map_err(|e| e.to_string())?;
    let mut rp = Stream::new(seed, index, substream::POLICY);
    let mut rm = Stream::new(seed, index, substream::MASK);
    let mut frames = Vec::new();
    loop {
        let state = env.state().clone();
        let mask = spec.mask(&v, &state, &mut rm);
        let ctx = ActCtx {
            voyage: &v,
            state: &state,
            episode: &episode,
            mask: &mask.xm,
        };
        let raw = policy.act(&ctx, &mut rp).map_err(|e| e.to_string())?;
        let open = mask.xm.clone();
        let out = spec.apply_with_mask(&v, &state, &raw, mask, Mode::Inference).map_err(|e| e.to_string())?;
        let x: Vec<f64> = out.projected.iter().map(|a| a.max(0.0)).collect();
        let step = env.step(&x).map_err(|e| e.to_string())?;
        let u = &env.state().u;
        let teu_by_pod = (0..v.n_c())
            .map(|loc| {
                let mut by = vec![0.0; v.n_ports() + 1];
                for tr in 0..v.n_tr() {
                    for k in 0..v.n_k() {
                        by[v.ti.pair(tr).1] += v.teu(k) * u[v.ui(loc, tr, k)];
                    }
                }
                by
            })
            .collect();
        let (pol, pod) = v.ti.pair(state.target.tr);
        frames.push(Frame {
            t: state.t,
            port: state.p,
            pol,
            pod,
            k: state.target.k,
            open,
            action: x,
            reward: step.reward,
            teu_by_pod,
        });
        if step.done {
            break;
        }
    }
    let audit = audit_reports(&v, &episode.demand.q, env.reports()).map_err(|e| e.to_string())?;
    Ok(EpisodeView {
        n_bays: v.n_bays(),
        n_decks: v.n_decks(),
        n_blocks: v.n_blocks(),
        n_ports: v.n_ports(),
        capacity: v.capacity.clone(),
        objective: frames.iter().map(|f| f.reward).sum(),
        frames,
        feasible: audit.feasible,
        max_residual: audit.max_residual,
    })
}

#[derive(Debug, Serialize)]
pub struct Projection2d {
    /// Iterates from the input point to the result.
    pub path: Vec<[f64; 2]>,
    /// Total violation at each iterate.
    pub violation: Vec<f64>,
}

/// Projects `(x0, x1)` onto `{x >= 0 : a_i . x <= b_i}`. `rows` holds
/// `[a_i0, a_i1, b_i]` triples; `method` is `vp` (every step returned) or
/// `cp` (one jump).
pub fn projection_2d(rows: &[[f64; 3]], x: [f64; 2], method: &str, eta: f64, steps: usize) -> Result<Projection2d, String> {
    let mut ph = Polyhedron::new(2);
    for r in rows {
        ph.push(&[r[0], r[1]], r[2], RowLabel::Capacity);
    }
    let total = |y: &[f64]| (0..ph.m()).map(|i| (ph.row_dot(i, y) - ph.b[i]).max(0.0)).sum::<f64>();
    let mut path = vec![x];
    match method {
        "vp" => {
            let mut cur = x.to_vec();
            for _ in 0..steps {
                let params = VpParams {
                    eta,
                    epochs: 1,
                    delta: 0.0,
                };
                cur = vp_project(&cur, &ph, params, false, None).map_err(|e| e.to_string())?.x;
                path.push([cur[0], cur[1]]);
                if total(&cur) == 0.0 {
                    break;
                }
            }
        }
        "cp" => {
            let out = cp_project(&x, &ph, CpParams::default(), None).map_err(|e| e.to_string())?;
            path.push([out.x[0], out.x[1]]);
        }
        other => return Err(format!("unknown method `{other}`")),
    }
    let violation = path.iter().map(|p| total(p)).collect();
    Ok(Projection2d { path, violation })
}

#[derive(Debug, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub mean: f64,
    /// Bound-based reference values stored with each episode.
    pub mu: f64,
    pub sigma: f64,
}

/// Demand of entry `q_index` over `n` seeded instances, binned.
pub fn histogram(preset: &str, seed: u64, q_index: usize, n: u64, bins: usize) -> Result<Histogram, String> {
    let v = voyage(preset)?;
    if q_index >= v.n_q() || bins == 0 || n == 0 {
        return Err(format!("need q_index < {}, bins > 0 and n > 0", v.n_q()));
    }
    let mut draws = Vec::with_capacity(n as usize);
    let (mut mu, mut sigma) = (0.0, 0.0);
    for i in 0..n {
        let ep = demand_stream(&v, seed, i, DemandMode::Continuous);
        draws.push(ep.demand.q[q_index]);
        mu += ep.dist.mu[q_index] / n as f64;
        sigma += ep.dist.sigma[q_index] / n as f64;
    }
    let lo = draws.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = draws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0; bins];
    for d in &draws {
        counts[(((d - lo) / width) as usize).min(bins - 1)] += 1;
    }
    Ok(Histogram {
        lo,
        hi,
        counts,
        mean: draws.iter().sum::<f64>() / n as f64,
        mu,
        sigma,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate_episode(preset: &str, seed: u32, index: u32, policy: &str, pipeline: &str) -> Result<String, JsValue> {
    to_js(episode_view(preset, seed as u64, index as u64, policy, pipeline))
}

/// `rows` is a flat `[a0, a1, b, a0, a1, b, ...]` array.
#[wasm_bindgen]
pub fn project_2d(rows: &[f64], x0: f64, x1: f64, method: &str, eta: f64, steps: u32) -> Result<String, JsValue> {
    if rows.len() % 3 != 0 {
        return Err(JsValue::from_str("rows must come in triples"));
    }
    let rows: Vec<[f64; 3]> = rows.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    to_js(projection_2d(&rows, [x0, x1], method, eta, steps as usize))
}

#[wasm_bindgen]
pub fn demand_histogram(preset: &str, seed: u32, q_index: u32, n: u32, bins: u32) -> Result<String, JsValue> {
    to_js(histogram(preset, seed as u64, q_index as usize, n as u64, bins as usize))
}
