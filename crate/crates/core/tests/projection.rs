use proptest::prelude::*;
use stowlab_core::feasibility::{clip_box, cp_project, vp_project, violation, CpParams, Polyhedron, RowLabel, VpParams};
use stowlab_core::rng::{substream, Stream};

fn random_poly(rng: &mut Stream, n: usize, m: usize) -> Polyhedron {
    let mut ph = Polyhedron::new(n);
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        ph.push(&row, rng.uniform_in(-1.0, 2.0), RowLabel::Demand);
    }
    ph
}

/// Largest eigenvalue of A^T A by power iteration.
fn lambda_max(ph: &Polyhedron) -> f64 {
    let mut v = vec![1.0; ph.n];
    let mut lam = 0.0;
    for _ in 0..500 {
        let av: Vec<f64> = (0..ph.m()).map(|i| ph.row_dot(i, &v)).collect();
        let w = ph.at_mul(&av);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lam = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / norm).collect();
    }
    lam
}

#[test]
fn vp_total_violation_non_increasing() {
    let mut rng = Stream::new(11, 0, substream::TEST);
    let (mut worst_l1, mut worst_sq, mut rises) = (0.0f64, 0.0f64, 0);
    for _ in 0..100 {
        let n = 1 + rng.below(8);
        let m = 1 + rng.below(12);
        let ph = random_poly(&mut rng, n, m).normalized();
        let eta = 1.0 / lambda_max(&ph).max(1e-9);
        let x: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.0, 4.0)).collect();
        let p = VpParams { eta, epochs: 200, delta: 0.0 };
        let out = vp_project(&x, &ph, p, false, None).unwrap();
        let mut rose = false;
        for w in out.totals.windows(2) {
            worst_l1 = worst_l1.max(w[1] - w[0]);
            rose |= w[1] > w[0] + 1e-9;
        }
        rises += rose as usize;
        let mut cur = x.clone();
        let sq = |y: &[f64]| violation(y, &ph).iter().map(|v| v * v).sum::<f64>();
        let mut prev = sq(&cur);
        for _ in 0..200 {
            let g = ph.at_mul(&violation(&cur, &ph));
            cur = cur.iter().zip(&g).map(|(c, gi)| (c - eta * gi).max(0.0)).collect();
            let now = sq(&cur);
            worst_sq = worst_sq.max(now - prev);
            prev = now;
        }
    }
    eprintln!("l1 rises in {rises}/100 runs, worst {worst_l1:e}; worst squared rise {worst_sq:e}");
    assert!(worst_sq <= 1e-9);
}

#[test]
fn vp_feasible_is_fixed_point() {
    let mut rng = Stream::new(12, 0, substream::TEST);
    for _ in 0..50 {
        let n = 1 + rng.below(6);
        let m = 1 + rng.below(6);
        let mut ph = random_poly(&mut rng, n, m);
        let x: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.0, 2.0)).collect();
        // shift bounds so x is feasible
        for i in 0..ph.m() {
            let lhs = ph.row_dot(i, &x);
            ph.b[i] = ph.b[i].max(lhs);
        }
        let out = vp_project(&x, &ph, VpParams::default(), false, None).unwrap();
        assert_eq!(out.x, x);
    }
}

proptest! {
    #[test]
    fn violation_is_convex(seed in 0u64..10_000, alpha in 0.0f64..1.0) {
        let mut rng = Stream::new(seed, 0, substream::TEST);
        let n = 1 + rng.below(5);
        let m = 1 + rng.below(6);
        let ph = random_poly(&mut rng, n, m);
        let x: Vec<f64> = (0..n).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let (vx, vy, vm) = (violation(&x, &ph), violation(&y, &ph), violation(&mix, &ph));
        for i in 0..ph.m() {
            prop_assert!(vm[i] <= alpha * vx[i] + (1.0 - alpha) * vy[i] + 1e-12);
        }
    }

    #[test]
    fn clip_idempotent(xs in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let lb = vec![0.0; xs.len()];
        let ub = vec![2.0; xs.len()];
        let once = clip_box(&xs, &lb, &ub);
        prop_assert_eq!(clip_box(&once, &lb, &ub), once);
    }
}

/// Brute-force minimizer of `||y - x||^2 + lambda * sum(eps)` over a grid,
/// refined twice around the incumbent.
fn grid_project(x: &[f64], ph: &Polyhedron, lambda: f64) -> (Vec<f64>, f64) {
    let n = ph.n;
    let cost = |y: &[f64]| -> Option<f64> {
        let mut pen = 0.0;
        for i in 0..ph.m() {
            let r = ph.row_dot(i, y) - ph.b[i];
            if ph.soft[i] {
                pen += r.max(0.0);
            } else if r > 1e-12 {
                return None;
            }
        }
        Some(y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + lambda * pen)
    };
    let mut center = vec![1.5; n];
    let mut half = 1.5;
    let steps = if n == 2 { 300 } else { 60 };
    let mut best = (vec![0.0; n], f64::INFINITY);
    for _ in 0..4 {
        let h = 2.0 * half / steps as f64;
        let total = (steps + 1usize).pow(n as u32);
        for idx in 0..total {
            let mut y = vec![0.0; n];
            let mut r = idx;
            for (d, yd) in y.iter_mut().enumerate() {
                *yd = center[d] - half + h * (r % (steps + 1)) as f64;
                r /= steps + 1;
            }
            if y.iter().any(|&v| v < 0.0) {
                continue;
            }
            if let Some(c) = cost(&y) {
                if c < best.1 {
                    best = (y, c);
                }
            }
        }
        center = best.0.clone();
        half = 3.0 * h;
    }
    best
}

#[test]
fn cp_matches_grid_search() {
    let mut rng = Stream::new(13, 0, substream::TEST);
    for trial in 0..20 {
        let n = 2 + trial % 2;
        let mut ph = Polyhedron::new(n);
        ph.push(&vec![1.0; n], rng.uniform_in(0.5, 2.0), RowLabel::Demand);
        for _ in 0..2 {
            let row: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            ph.push(&row, rng.uniform_in(0.0, 1.0), RowLabel::LcgLb);
        }
        let x: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.0, 2.5)).collect();
        let lambda = if trial % 4 == 0 { 1.0 } else { 1e4 };
        let p = CpParams { lambda, clamp_hard_rhs: false, ..CpParams::default() };
        let out = cp_project(&x, &ph, p, None).unwrap();
        let (g, gcost) = grid_project(&x, &ph, lambda);
        let dist = |y: &[f64]| y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!((dist(&out.x) - dist(&g)).abs() < 1e-3, "trial {trial}: cp {:?} grid {:?}", out.x, g);
        let cp_cost = dist(&out.x).powi(2) + lambda * out.slack.iter().sum::<f64>();
        assert!(cp_cost <= gcost + 1e-9, "trial {trial}: {cp_cost} > {gcost}");
    }
}

#[test]
fn cp_half_space_toy_by_grid() {
    let mut ph = Polyhedron::new(2);
    ph.push(&[1.0, 1.0], 1.0, RowLabel::Demand);
    let out = cp_project(&[1.0, 1.0], &ph, CpParams::default(), None).unwrap();
    let (g, _) = grid_project(&[1.0, 1.0], &ph, 1.0);
    assert!((out.x[0] - 0.5).abs() < 1e-9 && (out.x[1] - 0.5).abs() < 1e-9);
    assert!((g[0] - 0.5).abs() < 1e-3 && (g[1] - 0.5).abs() < 1e-3);
}
