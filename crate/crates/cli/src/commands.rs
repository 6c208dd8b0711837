//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use stowlab_core::env::trace::state_digest;
use stowlab_core::env::CmConvention;
use stowlab_core::feasibility::PipelineSpec;
use stowlab_core::instances::{demand_stream, upper_bounds, DemandMode, Episode};
use stowlab_core::learn::{
    evaluate, mean_ci95, train as train_policy, Checkpoint, EvalSpec, EvalSummary, GreedyPolicy, Policy,
    PolicyParams, RandomPolicy, SacPolicy, TrainConfig, TrainEvent,
};
use stowlab_core::smip::{
    build_deterministic_equivalent, build_scenario_tree, export_lp, solve, Anticipation, SolveOptions, SolveStatus,
    DEFAULT_PATH_CAP,
};
use stowlab_core::{Result, StowError, Voyage, VoyageConfig};

use crate::out::{num, read_csv, threads, write_csv, write_json, Provenance};
use crate::{load_config, Common, DemandArg, PolicyArg, SmipMode};

fn voyage(cfg: &VoyageConfig) -> Result<Arc<Voyage>> {
    Ok(Arc::new(Voyage::new(cfg.clone())?))
}

/// Test instances: continuous demand for indices `0..n` under `seed`.
pub fn instances(v: &Voyage, seed: u64, n: u64) -> Vec<Arc<Episode>> {
    (0..n).map(|i| Arc::new(demand_stream(v, seed, i, DemandMode::Continuous))).collect()
}

fn pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads())
        .build()
        .map_err(|e| StowError::Contract(format!("thread pool: {e}")))
}

pub fn generate(cfg: &VoyageConfig, common: &Common, n: u64, mode: DemandArg) -> Result<()> {
    let v = voyage(cfg)?;
    let mode = match mode {
        DemandArg::Continuous => DemandMode::Continuous,
        DemandArg::Integral => DemandMode::Integral,
    };
    let mut rows = Vec::new();
    let mut clamps = 0;
    for i in 0..n {
        let ep = demand_stream(&v, common.seed, i, mode);
        clamps += ep.clamp_warnings;
        for tr in 0..v.n_tr() {
            let (pol, pod) = v.ti.pair(tr);
            for k in 0..v.n_k() {
                rows.push(vec![
                    i.to_string(),
                    pol.to_string(),
                    pod.to_string(),
                    v.classes[k].id.to_string(),
                    num(ep.demand.q[v.qi(tr, k)]),
                ]);
            }
        }
    }
    let prov = Provenance::new(cfg, common.seed);
    write_csv(
        &common.out.join("instances.csv"),
        &prov,
        &["instance", "pol", "pod", "class_id", "quantity"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Sidecar {
        provenance: Provenance,
        instances: u64,
        mode: DemandMode,
        rho: f64,
        ub_digest: String,
        clamp_warnings: usize,
    }
    write_json(
        &common.out.join("instances.json"),
        &Sidecar {
            provenance: prov,
            instances: n,
            mode,
            rho: cfg.rho,
            ub_digest: state_digest(&upper_bounds(&v)),
            clamp_warnings: clamps,
        },
    )
}

pub fn train(
    cfg: &VoyageConfig,
    common: &Common,
    pipeline: &str,
    budget: usize,
    lambda_f: Option<f64>,
    warmup: Option<usize>,
    hidden: &[usize],
) -> Result<()> {
    let v = voyage(cfg)?;
    let mut tc = TrainConfig::new(PipelineSpec::parse(pipeline)?, budget, common.seed);
    if let Some(l) = lambda_f {
        tc.hyper.lambda_f = l;
    }
    if let Some(w) = warmup {
        tc.hyper.warmup = w;
    }
    if !hidden.is_empty() {
        tc.hyper.actor_hidden = hidden.to_vec();
        tc.hyper.critic_hidden = hidden.to_vec();
    }
    std::fs::create_dir_all(&common.out)?;
    let mut metrics = BufWriter::new(File::create(common.out.join("metrics.jsonl"))?);
    let mut io_err: Option<std::io::Error> = None;
    let start = Instant::now();
    let (params, m) = train_policy(&v, &tc, &mut |e| {
        if io_err.is_some() {
            return;
        }
        let line = serde_json::to_string(e).expect("event serializes");
        if let Err(err) = writeln!(metrics, "{line}") {
            io_err = Some(err);
        }
        if let TrainEvent::Validation { .. } = e {
            eprintln!("{line}");
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    metrics.flush()?;
    let seconds = start.elapsed().as_secs_f64();
    let ckpt = Checkpoint::new(params, cfg.digest(), common.seed);
    ckpt.write(BufWriter::new(File::create(common.out.join("checkpoint.json"))?))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        provenance: Provenance,
        train: &'a TrainConfig,
        steps: usize,
        updates: usize,
        episodes: usize,
        best_step: usize,
        seconds: f64,
    }
    write_json(
        &common.out.join("train.json"),
        &Summary {
            provenance: Provenance::new(cfg, common.seed),
            train: &tc,
            steps: m.steps,
            updates: m.updates,
            episodes: m.episodes,
            best_step: m.best_step,
            seconds,
        },
    )
}

pub fn load_checkpoint(path: &Path, cfg: &VoyageConfig) -> Result<PolicyParams> {
    let f = File::open(path)?;
    Ok(Checkpoint::read(std::io::BufReader::new(f), &cfg.digest())?.params)
}

pub struct EvalArgs {
    pub policy: PolicyArg,
    pub checkpoint: Option<std::path::PathBuf>,
    pub pipeline: String,
    pub instances: u64,
    pub rollouts: usize,
    pub stochastic: bool,
}

fn build_policy(args: &EvalArgs, cfg: &VoyageConfig) -> Result<Box<dyn Policy>> {
    Ok(match args.policy {
        PolicyArg::Random => Box::new(RandomPolicy),
        PolicyArg::Greedy => Box::new(GreedyPolicy),
        PolicyArg::Sac => {
            let path = args
                .checkpoint
                .as_deref()
                .ok_or_else(|| StowError::InvalidConfig("--policy sac needs --checkpoint".into()))?;
            Box::new(SacPolicy {
                params: load_checkpoint(path, cfg)?,
                stochastic: args.stochastic,
            })
        }
    })
}

pub fn eval_spec(pipeline: &str, rollouts: usize, seed: u64) -> Result<EvalSpec> {
    Ok(EvalSpec {
        pipeline: PipelineSpec::parse(pipeline)?,
        rollouts,
        seed,
        threads: threads(),
        convention: CmConvention::PairSum,
    })
}

pub const RESULT_HEADER: [&str; 8] = ["method", "pipeline", "n_ports", "instances", "rollouts", "o_mean", "o_ci95", "f_pct"];

pub fn eval(cfg: &VoyageConfig, common: &Common, args: &EvalArgs) -> Result<()> {
    let v = voyage(cfg)?;
    let policy = build_policy(args, cfg)?;
    let spec = eval_spec(&args.pipeline, args.rollouts, common.seed)?;
    let eps = instances(&v, common.seed, args.instances);
    let s = evaluate(&v, policy.as_ref(), &eps, &spec)?;
    let prov = Provenance::new(cfg, common.seed);
    let row = vec![
        policy.name(),
        spec.pipeline.to_string(),
        cfg.n_ports.to_string(),
        args.instances.to_string(),
        args.rollouts.to_string(),
        num(s.mean_objective),
        num(s.ci95),
        num(s.feasible_pct),
    ];
    write_csv(&common.out.join("results.csv"), &prov, &RESULT_HEADER, &[row])?;
    let rows: Vec<Vec<String>> = s
        .instances
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                num(r.objective),
                r.feasible.to_string(),
                format!("{:.3e}", r.max_residual),
                r.best_rollout.to_string(),
            ]
        })
        .collect();
    write_csv(
        &common.out.join("eval_instances.csv"),
        &prov,
        &["instance", "objective", "feasible", "max_residual", "best_rollout"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Json<'a> {
        provenance: Provenance,
        method: String,
        pipeline: String,
        summary: &'a EvalSummary,
    }
    write_json(
        &common.out.join("eval.json"),
        &Json {
            provenance: prov,
            method: policy.name(),
            pipeline: spec.pipeline.to_string(),
            summary: &s,
        },
    )
}

pub struct SmipArgs {
    pub mode: SmipMode,
    pub scenarios: usize,
    pub instances: u64,
    pub time_limit: f64,
    pub branch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmipRun {
    pub instance: u64,
    pub mode: String,
    pub scenarios: usize,
    pub paths: usize,
    pub vars: usize,
    pub rows: usize,
    pub status: SolveStatus,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub seconds: f64,
}

impl SmipRun {
    pub fn has_plan(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::TimeLimitBest)
    }
}

fn anticipation(mode: SmipMode) -> Anticipation {
    match mode {
        SmipMode::Na => Anticipation::NonAnticipative,
        SmipMode::Pi => Anticipation::PerfectInformation,
    }
}

/// Builds and solves the program for one instance; the LP text is returned
/// when `export` is set.
pub fn smip_instance(
    v: &Voyage,
    ep: &Episode,
    mode: SmipMode,
    scenarios: usize,
    opts: &SolveOptions,
    export: bool,
) -> Result<(SmipRun, Option<String>)> {
    let start = Instant::now();
    let tree = build_scenario_tree(v, ep, scenarios, DemandMode::Integral, DEFAULT_PATH_CAP)?;
    let model = build_deterministic_equivalent(v, &tree, anticipation(mode))?;
    let sol = solve(&model.lp, opts)?;
    let run = SmipRun {
        instance: ep.index,
        mode: model.mode.tag().into(),
        scenarios,
        paths: tree.n_paths(),
        vars: model.lp.n_vars(),
        rows: model.lp.n_rows(),
        status: sol.status,
        objective: sol.objective,
        bound: sol.bound,
        nodes: sol.nodes,
        lp_iterations: sol.lp_iterations,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((run, export.then(|| export_lp(&model.lp))))
}

pub fn solve_options(time_limit: f64, branch: bool) -> Result<SolveOptions> {
    if !(time_limit > 0.0 && time_limit.is_finite()) {
        return Err(StowError::InvalidConfig("time limit must be positive".into()));
    }
    Ok(SolveOptions {
        time_limit: Duration::from_secs_f64(time_limit),
        branch,
        ..Default::default()
    })
}

/// Solves every instance on the worker pool; results keep instance order.
pub fn smip_many(
    v: &Voyage,
    eps: &[Arc<Episode>],
    mode: SmipMode,
    scenarios: usize,
    opts: &SolveOptions,
) -> Result<Vec<SmipRun>> {
    pool()?.install(|| {
        eps.par_iter()
            .map(|ep| smip_instance(v, ep, mode, scenarios, opts, false).map(|r| r.0))
            .collect()
    })
}

fn status_tag(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::TimeLimitBest => "time_limit_best",
    }
}

pub fn smip(cfg: &VoyageConfig, common: &Common, args: &SmipArgs, export: Option<&Path>) -> Result<()> {
    let v = voyage(cfg)?;
    let opts = solve_options(args.time_limit, args.branch)?;
    let eps = instances(&v, common.seed, args.instances);
    let mut runs = smip_many(&v, &eps[eps.len().min(1)..], args.mode, args.scenarios, &opts)?;
    if let Some(first) = eps.first() {
        let (run, lp) = smip_instance(&v, first, args.mode, args.scenarios, &opts, export.is_some())?;
        runs.insert(0, run);
        if let (Some(path), Some(text)) = (export, lp) {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
        }
    }
    let prov = Provenance::new(cfg, common.seed);
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.instance.to_string(),
                r.mode.clone(),
                r.scenarios.to_string(),
                r.paths.to_string(),
                r.vars.to_string(),
                r.rows.to_string(),
                status_tag(r.status).into(),
                num(r.objective),
                num(r.bound),
                r.nodes.to_string(),
            ]
        })
        .collect();
    write_csv(
        &common.out.join("smip.csv"),
        &prov,
        &["instance", "mode", "scenarios", "paths", "vars", "rows", "status", "objective", "bound", "nodes"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Json<'a> {
        provenance: Provenance,
        branch: bool,
        runs: &'a [SmipRun],
    }
    write_json(
        &common.out.join("smip.json"),
        &Json {
            provenance: prov,
            branch: args.branch,
            runs: &runs,
        },
    )
}

pub const COMPARE_HEADER: [&str; 8] = ["method", "pipeline", "n_ports", "instances", "o_mean", "o_ci95", "t_mean", "f_pct"];

fn smip_row(method: &str, n_ports: usize, runs: &[SmipRun]) -> Vec<String> {
    let objs: Vec<f64> = runs.iter().map(|r| r.objective).collect();
    let (m, ci) = mean_ci95(&objs);
    let n = runs.len().max(1) as f64;
    vec![
        method.into(),
        "-".into(),
        n_ports.to_string(),
        runs.len().to_string(),
        num(m),
        num(ci),
        num(runs.iter().map(|r| r.seconds).sum::<f64>() / n),
        num(100.0 * runs.iter().filter(|r| r.has_plan()).count() as f64 / n),
    ]
}

fn policy_row(method: &str, pipeline: &str, n_ports: usize, s: &EvalSummary) -> Vec<String> {
    vec![
        method.into(),
        pipeline.into(),
        n_ports.to_string(),
        s.instances.len().to_string(),
        num(s.mean_objective),
        num(s.ci95),
        num(s.mean_seconds),
        num(s.feasible_pct),
    ]
}

pub fn compare(
    common: &Common,
    checkpoint: Option<&Path>,
    pipeline: &str,
    n: u64,
    rollouts: usize,
    scenarios: usize,
    branch: bool,
) -> Result<()> {
    let base = load_config(&common.config, None)?;
    let ports: Vec<Option<usize>> = if common.ports.is_empty() {
        vec![None]
    } else {
        common.ports.iter().map(|&p| Some(p)).collect()
    };
    let opts = solve_options(3600.0, branch)?;
    let spec = eval_spec(pipeline, rollouts, common.seed)?;
    let mut rows = Vec::new();
    for p in ports {
        let cfg = load_config(&common.config, p)?;
        let v = voyage(&cfg)?;
        let eps = instances(&v, common.seed, n);
        if let Some(path) = checkpoint {
            match load_checkpoint(path, &cfg) {
                Ok(params) => {
                    let pol = SacPolicy {
                        params,
                        stochastic: rollouts > 1,
                    };
                    let s = evaluate(&v, &pol, &eps, &spec)?;
                    rows.push(policy_row("sac", &spec.pipeline.to_string(), cfg.n_ports, &s));
                }
                Err(StowError::DigestMismatch { .. }) => {
                    let note = serde_json::json!({ "skipped": "sac", "n_ports": cfg.n_ports, "reason": "checkpoint trained on another config" });
                    eprintln!("{note}");
                }
                Err(e) => return Err(e),
            }
        }
        for (name, pol) in [("greedy_revenue", &GreedyPolicy as &dyn Policy), ("random_feasible", &RandomPolicy)] {
            let s = evaluate(&v, pol, &eps, &spec)?;
            rows.push(policy_row(name, &spec.pipeline.to_string(), cfg.n_ports, &s));
        }
        for (name, mode) in [("smip_na", SmipMode::Na), ("smip_pi", SmipMode::Pi)] {
            let runs = smip_many(&v, &eps, mode, scenarios, &opts)?;
            rows.push(smip_row(name, cfg.n_ports, &runs));
        }
    }
    write_csv(&common.out.join("compare.csv"), &Provenance::new(&base, common.seed), &COMPARE_HEADER, &rows)
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_ur(
    cfg: &VoyageConfig,
    common: &Common,
    checkpoint: &Path,
    urs: &[f64],
    pipeline: &str,
    n: u64,
    rollouts: usize,
    scenarios: Option<usize>,
) -> Result<()> {
    let params = load_checkpoint(checkpoint, cfg)?;
    let spec = eval_spec(pipeline, rollouts, common.seed)?;
    let pipe = spec.pipeline.to_string();
    let policy = SacPolicy {
        params,
        stochastic: rollouts > 1,
    };
    let opts = solve_options(3600.0, false)?;
    let mut rows = Vec::new();
    for &ur in urs {
        let mut c = cfg.clone();
        c.ur = ur;
        c.validate()?;
        let v = voyage(&c)?;
        let eps = instances(&v, common.seed, n);
        let mut push = |method: &str, pipeline: &str, o: f64, ci: f64, f: f64| {
            rows.push(vec![num(ur), method.into(), pipeline.into(), n.to_string(), num(o), num(ci), num(f)]);
        };
        let s = evaluate(&v, &policy, &eps, &spec)?;
        push("sac", &pipe, s.mean_objective, s.ci95, s.feasible_pct);
        let g = evaluate(&v, &GreedyPolicy, &eps, &spec)?;
        push("greedy_revenue", &pipe, g.mean_objective, g.ci95, g.feasible_pct);
        if let Some(sc) = scenarios {
            let runs = smip_many(&v, &eps, SmipMode::Na, sc, &opts)?;
            let objs: Vec<f64> = runs.iter().map(|r| r.objective).collect();
            let (m, ci) = mean_ci95(&objs);
            let f = 100.0 * runs.iter().filter(|r| r.has_plan()).count() as f64 / runs.len().max(1) as f64;
            push("smip_na", "-", m, ci, f);
        }
    }
    write_csv(
        &common.out.join("sweep_ur.csv"),
        &Provenance::new(cfg, common.seed),
        &["ur", "method", "pipeline", "instances", "o_mean", "o_ci95", "f_pct"],
        &rows,
    )
}

pub fn sweep_scenarios(cfg: &VoyageConfig, common: &Common, scenarios: &[usize], n: u64, branch: bool) -> Result<()> {
    let v = voyage(cfg)?;
    let eps = instances(&v, common.seed, n);
    let opts = solve_options(3600.0, branch)?;
    let mut rows = Vec::new();
    for &s in scenarios {
        let na = smip_many(&v, &eps, SmipMode::Na, s, &opts)?;
        let pi = smip_many(&v, &eps, SmipMode::Pi, s, &opts)?;
        let obj = |rs: &[SmipRun]| mean_ci95(&rs.iter().map(|r| r.objective).collect::<Vec<_>>());
        let ((nm, nci), (pm, pci)) = (obj(&na), obj(&pi));
        let dominated = na
            .iter()
            .zip(&pi)
            .filter(|(a, b)| b.objective >= a.objective - 1e-6 * (1.0 + a.objective.abs()))
            .count();
        rows.push(vec![
            s.to_string(),
            na.first().map_or(0, |r| r.paths).to_string(),
            n.to_string(),
            num(nm),
            num(nci),
            num(pm),
            num(pci),
            dominated.to_string(),
        ]);
    }
    write_csv(
        &common.out.join("sweep_scenarios.csv"),
        &Provenance::new(cfg, common.seed),
        &["s_st", "paths", "instances", "na_mean", "na_ci95", "pi_mean", "pi_ci95", "pi_ge_na"],
        &rows,
    )
}

fn render(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            if i < w.len() {
                w[i] = w[i].max(c.len());
            }
        }
    }
    let line = |cells: &[String]| {
        let s: Vec<String> = cells.iter().zip(&w).map(|(c, n)| format!("{c:>n$}")).collect();
        format!("{}\n", s.join("  ").trim_end())
    };
    let mut out = line(header);
    out.push_str(&line(&w.iter().map(|n| "-".repeat(*n)).collect::<Vec<_>>()));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

/// Text summary of a results directory. Method rows from every CSV with
/// `method`, `n_ports` and `o_mean` columns are merged into one table sorted
/// by port count and method; cells with F% below 100 are marked `!`.
pub fn report(dir: &Path) -> Result<String> {
    let mut files: Vec<_> = match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    if files.is_empty() {
        return Ok("no results\n".into());
    }
    let cols = ["method", "pipeline", "n_ports", "o_mean", "o_ci95", "t_mean", "f_pct"];
    let mut merged: Vec<(usize, Vec<String>)> = Vec::new();
    let mut other = String::new();
    for path in &files {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let f = match read_csv(path) {
            Ok(f) => f,
            Err(e) => {
                other.push_str(&format!("{name}: unreadable ({e})\n"));
                continue;
            }
        };
        let is_table = ["method", "n_ports", "o_mean"].iter().all(|c| f.column(c).is_some());
        if is_table {
            for r in &f.rows {
                let mut cells: Vec<String> = cols
                    .iter()
                    .map(|c| f.column(c).and_then(|i| r.get(i)).cloned().unwrap_or_else(|| "missing".into()))
                    .collect();
                let fi = cols.len() - 1;
                if cells[fi].parse::<f64>().map_or(false, |v| v < 100.0) {
                    cells[fi].push('!');
                }
                let np = cells[2].parse().unwrap_or(usize::MAX);
                cells.push(name.clone());
                merged.push((np, cells));
            }
        } else {
            other.push_str(&format!("\n{name}\n"));
            other.push_str(&render(&f.header, &f.rows));
        }
    }
    let mut out = String::new();
    if !merged.is_empty() {
        merged.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1[0].cmp(&b.1[0])).then_with(|| a.1[1].cmp(&b.1[1])));
        let mut header: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
        header.push("source".into());
        let rows: Vec<Vec<String>> = merged.into_iter().map(|(_, r)| r).collect();
        out.push_str(&render(&header, &rows));
    }
    out.push_str(&other);
    if out.is_empty() {
        out.push_str("no results\n");
    }
    Ok(out)
}
