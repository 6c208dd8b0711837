use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use stowlab_core::env::audit::audit_reports;
use stowlab_core::env::{port_schedule, CmConvention};
use stowlab_core::instances::{demand_stream, DemandMode, Episode};
use stowlab_core::rng::{substream, Stream};
use stowlab_core::smip::*;
use stowlab_core::{Voyage, VoyageConfig};

fn mini() -> Arc<Voyage> {
    Arc::new(Voyage::new(VoyageConfig::mini()).unwrap())
}

fn mini_tree(v: &Voyage, seed: u64, s: usize) -> (Episode, ScenarioTree) {
    let ep = demand_stream(v, seed, 0, DemandMode::Integral);
    let t = build_scenario_tree(v, &ep, s, DemandMode::Integral, DEFAULT_PATH_CAP).unwrap();
    (ep, t)
}

fn relaxed(m: &SmipModel) -> Solution {
    let s = solve(&m.lp, &SolveOptions::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    s
}

fn exact(m: &SmipModel) -> Solution {
    let s = solve(&m.lp, &SolveOptions { branch: true, ..Default::default() }).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    s
}

#[test]
fn mini_counts_match_index_sets() {
    let v = mini();
    let (_, tree) = mini_tree(&v, 1, 2);
    let z = 2;
    let (np, nb, nbl, nc, ntr, nk) = (3, 2, 1, 4, 3, 2);
    let nu = nc * ntr * nk;
    let di: usize = (1..np).map(|p| (np - p) * nb * nbl).sum();
    // hatch rows exist at port 2 only, where (1,3) remains on board
    let hatch = nb * nbl;
    let cm = np;
    let rows_per_path = ntr * nk            // demand
        + (np - 1) * nc                     // capacity
        + (1..np).map(|_| nb * nbl).sum::<usize>() // single pod
        + (1..np).map(|p| (np - p) * nc).sum::<usize>() // pod link
        + 2 * hatch                          // hatch + restow
        + np * (nb - 1)                      // crane
        + 4 * (np - 1); // lcg/vcg bounds
    let per_path_other = di + 2 * hatch + cm;

    let pi = build_deterministic_equivalent(&v, &tree, Anticipation::PerfectInformation).unwrap();
    assert_eq!(pi.lp.n_vars(), z * (nu + per_path_other));
    assert_eq!(pi.lp.n_rows(), z * rows_per_path);
    assert_eq!(pi.lp.binaries().len(), z * (di + hatch));

    // with three ports every load decision precedes any branching: all shared
    let na = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
    assert_eq!(na.lp.n_vars(), nu + z * per_path_other);
    assert_eq!(na.lp.n_rows(), z * rows_per_path);
    assert_eq!(pi.lp.n_vars(), 74);
    assert_eq!(pi.lp.n_rows(), 90);
}

#[test]
fn single_path_na_equals_pi() {
    let v = mini();
    let (_, tree) = mini_tree(&v, 4, 1);
    let na = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
    let pi = build_deterministic_equivalent(&v, &tree, Anticipation::PerfectInformation).unwrap();
    assert_eq!(na.lp, pi.lp);
}

#[test]
fn row_names_carry_labels() {
    let v = mini();
    let (_, tree) = mini_tree(&v, 2, 3);
    let m = build_deterministic_equivalent(&v, &tree, Anticipation::PerfectInformation).unwrap();
    assert!(m.lp.rows.iter().any(|r| r.name == "eq15_cap_p2_b1_d1_bl1_s3"));
    for r in &m.lp.rows {
        assert!(["14", "15", "16", "17", "18", "19", "21", "24", "25"].contains(&r.label()), "{}", r.name);
    }
    let mut names: Vec<&str> = m.lp.rows.iter().map(|r| r.name.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), m.lp.n_rows());
}

#[test]
fn pi_dominates_na() {
    let v = mini();
    for seed in 0..6 {
        let (_, tree) = mini_tree(&v, seed, 2);
        let na = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
        let pi = build_deterministic_equivalent(&v, &tree, Anticipation::PerfectInformation).unwrap();
        let (a, b) = (relaxed(&na), relaxed(&pi));
        assert!(b.objective >= a.objective - 1e-7, "seed {seed}: PI {} < NA {}", b.objective, a.objective);
        assert!((na.expected_objective(&v, &a.x) - a.objective).abs() < 1e-7);
    }
}

#[test]
fn na_loads_agree_within_history_groups() {
    let mut cfg = VoyageConfig::mini();
    cfg.n_ports = 4;
    let v = Voyage::new(cfg).unwrap();
    let ep = demand_stream(&v, 3, 0, DemandMode::Integral);
    let tree = build_scenario_tree(&v, &ep, 2, DemandMode::Integral, 100).unwrap();
    let m = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
    let s = relaxed(&m);
    for p in 1..v.n_ports() {
        for a in 0..tree.n_paths() {
            for b in 0..tree.n_paths() {
                if tree.history_node(a, p) != tree.history_node(b, p) {
                    continue;
                }
                for tr in v.ti.load(p) {
                    for loc in 0..v.n_c() {
                        for k in 0..v.n_k() {
                            let ui = v.ui(loc, tr, k);
                            assert_eq!(s.x[m.u_col[a][ui]], s.x[m.u_col[b][ui]]);
                        }
                    }
                }
            }
        }
    }
    // port-3 loads differ between the two port-2 branches in PI
    let pi = build_deterministic_equivalent(&v, &tree, Anticipation::PerfectInformation).unwrap();
    assert!(pi.lp.n_vars() > m.lp.n_vars());
}

#[test]
fn zero_demand_model_is_zero() {
    let v = mini();
    let (_, mut tree) = mini_tree(&v, 5, 2);
    for n in &mut tree.nodes {
        n.demand.iter_mut().for_each(|q| *q = 0.0);
    }
    let m = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
    let s = exact(&m);
    assert!(s.objective.abs() < 1e-12);
    for (j, x) in s.x.iter().enumerate() {
        if !m.lp.vars[j].binary {
            assert!(x.abs() < 1e-12, "{} = {x}", m.lp.vars[j].name);
        }
    }
    let sched = port_schedule(v.n_ports(), v.n_k()).unwrap();
    let plan = plan_from_solution(&v, &sched, &m, &s.x, 0, 1e-9).unwrap();
    assert!(plan.iter().flatten().all(|&a| a == 0.0));
}

#[test]
fn export_round_trip_on_mini() {
    let v = mini();
    let (_, tree) = mini_tree(&v, 6, 2);
    let m = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
    let text = export_lp(&m.lp);
    let back = parse_lp(&text).unwrap();
    assert_eq!(back, m.lp);
    assert_eq!(export_lp(&back), text);
    let (a, b) = (relaxed(&m).objective, solve(&back, &SolveOptions::default()).unwrap().objective);
    assert_eq!(a, b);
}

#[test]
fn replay_matches_path_objective() {
    let v = mini();
    let sched = port_schedule(v.n_ports(), v.n_k()).unwrap();
    for seed in [7, 8, 9] {
        let (ep, tree) = mini_tree(&v, seed, 2);
        let m = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
        let s = exact(&m);
        for phi in 0..m.n_paths() {
            let plan = plan_from_solution(&v, &sched, &m, &s.x, phi, 1e-9).unwrap();
            let r = replay_plan(v.clone(), &ep, &m.demand[phi], &plan, CmConvention::SingleMax).unwrap();
            let want = m.path_objective(&v, &s.x, phi);
            assert!((r.reward - want).abs() < 1e-6, "seed {seed} path {phi}: env {} vs model {want}", r.reward);
            let audit = audit_reports(&v, &m.demand[phi], &r.reports).unwrap();
            assert!(audit.feasible, "{:?}", audit.label);
        }
    }
}

#[test]
fn negative_extraction_is_an_error() {
    let v = mini();
    let (_, tree) = mini_tree(&v, 1, 1);
    let m = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
    let mut x = vec![0.0; m.lp.n_vars()];
    x[m.u_col[0][0]] = -1e-3;
    let sched = port_schedule(v.n_ports(), v.n_k()).unwrap();
    let e = plan_from_solution(&v, &sched, &m, &x, 0, 1e-9).unwrap_err();
    assert_eq!(e.kind(), "contract");
    x[m.u_col[0][0]] = -1e-12;
    assert!(plan_from_solution(&v, &sched, &m, &x, 0, 1e-9).is_ok());
}

fn demand_residual(rep: &stowlab_core::env::audit::FeasibilityReport) -> f64 {
    rep.ports.iter().map(|p| p.demand).fold(0.0, f64::max)
}

/// PI plans can rely on demand that another path never sees; NA plans cannot.
#[test]
fn pi_plans_anticipate() {
    let v = mini();
    let sched = port_schedule(v.n_ports(), v.n_k()).unwrap();
    let mut pi_failures = 0;
    for seed in 0..10 {
        let (ep, tree) = mini_tree(&v, seed, 2);
        let na = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
        let pi = build_deterministic_equivalent(&v, &tree, Anticipation::PerfectInformation).unwrap();
        let (sa, sp) = (relaxed(&na), relaxed(&pi));
        for phi in 0..2 {
            let other = 1 - phi;
            let plan = plan_from_solution(&v, &sched, &pi, &sp.x, phi, 1e-9).unwrap();
            let r = replay_plan(v.clone(), &ep, &pi.demand[other], &plan, CmConvention::SingleMax).unwrap();
            if demand_residual(&audit_reports(&v, &pi.demand[other], &r.reports).unwrap()) > v.cfg.feas_tol {
                pi_failures += 1;
            }
            let plan = plan_from_solution(&v, &sched, &na, &sa.x, phi, 1e-9).unwrap();
            let r = replay_plan(v.clone(), &ep, &na.demand[other], &plan, CmConvention::SingleMax).unwrap();
            let rep = audit_reports(&v, &na.demand[other], &r.reports).unwrap();
            assert!(demand_residual(&rep) <= 1e-9, "NA plan exceeds another path's demand");
        }
    }
    assert!(pi_failures > 0);
}

/// Exhaustive grid over a two-transport instance with wide stability bounds.
#[test]
fn grid_oracle_on_small_instance() {
    let mut cfg = VoyageConfig::mini();
    cfg.classes = Some(vec![0]);
    cfg.lcg_lb = 0.01;
    cfg.lcg_ub = 10.0;
    cfg.vcg_lb = 0.01;
    cfg.vcg_ub = 10.0;
    cfg.ct_ho = 0.4;
    cfg.ct_cm = 0.3;
    let v = Voyage::new(cfg).unwrap();
    let t12 = v.ti.index_of(1, 2);
    let t13 = v.ti.index_of(1, 3);
    let t23 = v.ti.index_of(2, 3);
    let mut q = vec![0.0; v.n_q()];
    q[v.qi(t12, 0)] = 2.0;
    q[v.qi(t13, 0)] = 2.0;
    let mut q2 = vec![0.0; v.n_q()];
    q2[v.qi(t23, 0)] = 1.0;
    let tree = ScenarioTree {
        s_st: 1,
        nodes: vec![
            TreeNode { stage: 1, parent: None, prob: 1.0, demand: q.clone() },
            TreeNode { stage: 2, parent: Some(0), prob: 1.0, demand: q2.clone() },
        ],
        paths: vec![vec![0, 1]],
    };
    let m = build_deterministic_equivalent(&v, &tree, Anticipation::NonAnticipative).unwrap();
    let s = exact(&m);
    let qall: Vec<f64> = q.iter().zip(&q2).map(|(a, b)| a + b).collect();

    // grid over the 12 utilization entries, with the other transports pinned
    let h = 1.0;
    let trs = [t12, t13, t23];
    let levels = |tr: usize| (qall[v.qi(tr, 0)] / h) as usize + 1;
    let dims: Vec<(usize, usize)> = trs.iter().flat_map(|&tr| (0..v.n_c()).map(move |l| (tr, l))).collect();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; dims.len()];
    let mut visited = 0usize;
    loop {
        visited += 1;
        let mut u = vec![0.0; v.n_u()];
        for (d, &(tr, loc)) in dims.iter().enumerate() {
            u[v.ui(loc, tr, 0)] = idx[d] as f64 * h;
        }
        if let Some(val) = hand_objective(&v, &qall, &u) {
            best = best.max(val);
        }
        let mut d = 0;
        loop {
            if d == dims.len() {
                break;
            }
            idx[d] += 1;
            if idx[d] < levels(dims[d].0) {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims.len() {
            break;
        }
    }
    assert_eq!(visited, 3usize.pow(8) * 2usize.pow(4));
    let rev_max = v.rev.iter().cloned().fold(0.0, f64::max);
    // every grid plan is model-feasible, and rounding the optimum down to the
    // grid keeps feasibility while losing at most rev * h per entry
    assert!(s.objective >= best - 1e-9, "mip {} below grid {best}", s.objective);
    assert!(s.objective - best <= rev_max * h * dims.len() as f64);
    // the optimum here is on the grid
    assert!((s.objective - best).abs() < 1e-7, "mip {} grid {best}", s.objective);
}

/// Objective with hatch and crane terms at their cheapest values for `u`, or
/// `None` when demand, capacity or single-POD rows fail.
fn hand_objective(v: &Voyage, q: &[f64], u: &[f64]) -> Option<f64> {
    let np = v.n_ports();
    for tr in 0..v.n_tr() {
        let tot: f64 = (0..v.n_c()).map(|l| u[v.ui(l, tr, 0)]).sum();
        if tot > q[v.qi(tr, 0)] + 1e-12 {
            return None;
        }
    }
    for p in 1..np {
        for loc in 0..v.n_c() {
            let teu: f64 = v.ti.onboard(p).iter().map(|&tr| v.teu(0) * u[v.ui(loc, tr, 0)]).sum();
            if teu > v.capacity[loc] + 1e-12 {
                return None;
            }
        }
        for b in 0..v.n_bays() {
            let pods = v.ti.load(p).iter().filter(|&&tr| (0..v.n_decks()).any(|d| u[v.ui(v.loc(b, d, 0), tr, 0)] > 0.0)).count();
            if pods > 1 {
                return None;
            }
        }
    }
    let mut val: f64 = (0..v.n_u()).map(|i| {
        let k = i % v.n_k();
        let tr = (i / v.n_k()) % v.n_tr();
        v.rev[v.qi(tr, k)] * u[i]
    }).sum();
    for p in 1..=np {
        let mv = v.ti.moves(p);
        let moves = |loc: usize| -> f64 { mv.iter().map(|&tr| u[v.ui(loc, tr, 0)]).sum() };
        if p > 1 && p < np {
            for b in 0..v.n_bays() {
                if moves(v.loc(b, 0, 0)) > 0.0 {
                    let deck: f64 = v.ti.rob(p).iter().map(|&tr| u[v.ui(v.loc(b, 1, 0), tr, 0)]).sum();
                    val -= v.cfg.ct_ho * deck;
                }
            }
        }
        let z: f64 = mv.iter().map(|&tr| q[v.qi(tr, 0)]).sum::<f64>() * (1.0 + v.cfg.delta_cm) * 2.0 / v.n_bays() as f64;
        let pair: f64 = (0..v.n_c()).map(moves).sum();
        val -= v.cfg.ct_cm * (pair - z).max(0.0);
    }
    Some(val)
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = Stream::new(11, 0, substream::TEST);
    let opts = SimplexOptions::default();
    for trial in 0..200 {
        let n = 1 + rng.below(5);
        let m = 1 + rng.below(6);
        let mut p = LpProblem::new(n);
        p.c = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        p.ub = (0..n).map(|_| rng.uniform_in(1.0, 5.0)).collect();
        let x0: Vec<f64> = p.ub.iter().map(|&u| rng.uniform() * u).collect();
        for _ in 0..m {
            let row: Vec<f64> = (0..n)
                .map(|_| if rng.uniform() < 0.2 { 0.0 } else { rng.uniform_in(-2.0, 2.0) })
                .collect();
            let ax: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
            let r = rng.uniform();
            if r < 0.15 {
                p.add_row(&row, Sense::Eq, ax);
            } else if r < 0.4 {
                p.add_row(&row, Sense::Ge, ax - rng.uniform());
            } else {
                p.add_row(&row, Sense::Le, ax + rng.uniform());
            }
        }
        let got = solve_lp(&p, &opts).unwrap();
        assert_eq!(got.status, LpStatus::Optimal, "trial {trial}");
        let want = enumerate_vertices(&p);
        assert!((got.objective - want).abs() <= 1e-7 * (1.0 + want.abs()), "trial {trial}: simplex {} vs vertices {want}", got.objective);
        assert!(got.primal_residual <= 1e-7 && got.dual_residual <= 1e-7);
    }
}

/// Best objective over all basic solutions of `p` (rows plus box bounds).
fn enumerate_vertices(p: &LpProblem) -> f64 {
    let n = p.n;
    // candidate hyperplanes: (coefficients, rhs)
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..p.m {
        planes.push((p.row(i).to_vec(), p.b[i]));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), p.lb[j]));
        planes.push((e, p.ub[j]));
    }
    let mut best = f64::NEG_INFINITY;
    let mut pick = Vec::with_capacity(n);
    fn rec(
        start: usize,
        pick: &mut Vec<usize>,
        n: usize,
        planes: &[(Vec<f64>, f64)],
        p: &LpProblem,
        best: &mut f64,
    ) {
        if pick.len() == n {
            let a = DMatrix::from_fn(n, n, |r, c| planes[pick[r]].0[c]);
            let b = DVector::from_iterator(n, pick.iter().map(|&i| planes[i].1));
            if a.determinant().abs() < 1e-10 {
                return;
            }
            if let Some(x) = a.lu().solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                if p.max_violation(&x) <= 1e-9 {
                    *best = best.max(p.objective(&x));
                }
            }
            return;
        }
        for i in start..planes.len() {
            pick.push(i);
            rec(i + 1, pick, n, planes, p, best);
            pick.pop();
        }
    }
    rec(0, &mut pick, n, &planes, p, &mut best);
    best
}
