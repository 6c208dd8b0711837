//! Feasibility regularization: mean positive constraint violation.

use crate::feasibility::Polyhedron;

/// Mean over rows of `max(a_i x - b_i, 0)`; zero for a polyhedron without rows.
pub fn fr_loss(x: &[f64], ph: &Polyhedron) -> f64 {
    if ph.m() == 0 {
        return 0.0;
    }
    ph.total_violation(x) / ph.m() as f64
}

/// Gradient of [`fr_loss`] w.r.t. `x`, taking the zero side at kinks.
pub fn fr_grad(x: &[f64], ph: &Polyhedron) -> Vec<f64> {
    let m = ph.m();
    let mut g = vec![0.0; ph.n];
    if m == 0 {
        return g;
    }
    for i in 0..m {
        if ph.row_dot(i, x) - ph.b[i] > 0.0 {
            for (gj, a) in g.iter_mut().zip(ph.row(i)) {
                *gj += a / m as f64;
            }
        }
    }
    g
}
