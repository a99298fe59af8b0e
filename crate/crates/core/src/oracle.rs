//! Exact finite-horizon LQR for known linear systems, used as ground truth.
//!
//! Works in homogeneous coordinates `[x; 1]` so affine dynamics and linear
//! cost terms reduce to the textbook Riccati recursion with cross terms.

use crate::cost::CostExpansion;
use crate::env::LinearModel;
use crate::error::{invalid, Result};
use crate::linalg::{spd_inverse, Mat, Vector};

#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    /// Optimal feedback `u_t = gains[t] x_t + offsets[t]`.
    pub gains: Vec<Mat>,
    pub offsets: Vec<Vector>,
    /// Homogeneous cost-to-go matrices `P_t`, `T + 1` of them; the value is
    /// `1/2 [x;1]^T P_t [x;1]`.
    pub cost_to_go: Vec<Mat>,
}

impl RiccatiSolution {
    /// Optimal total cost from `x` at step `t`.
    pub fn value(&self, t: usize, x: &Vector) -> f64 {
        let z = homogeneous(x);
        0.5 * z.dot(&(&self.cost_to_go[t] * &z))
    }

    /// Deterministic closed-loop states under the optimal law.
    pub fn simulate(&self, model: &LinearModel, x0: &Vector) -> (Vec<Vector>, Vec<Vector>) {
        let mut xs = vec![x0.clone()];
        let mut us = Vec::new();
        for t in 0..self.gains.len() {
            let x = &xs[t];
            let u = &self.gains[t] * x + &self.offsets[t];
            xs.push(&model.a * x + &model.b * &u + &model.c);
            us.push(u);
        }
        (xs, us)
    }
}

fn homogeneous(x: &Vector) -> Vector {
    let mut z = Vector::from_element(x.len() + 1, 1.0);
    z.rows_mut(0, x.len()).copy_from(x);
    z
}

/// `W` with `1/2 [z;1]^T W [z;1] = 1/2 z^T H z + g^T z + c`.
fn homogeneous_weight(h: &Mat, g: &Vector, c: f64) -> Mat {
    let n = g.len();
    let mut w = Mat::zeros(n + 1, n + 1);
    w.view_mut((0, 0), (n, n)).copy_from(h);
    w.view_mut((0, n), (n, 1)).copy_from(g);
    w.view_mut((n, 0), (1, n)).copy_from(&g.transpose());
    w[(n, n)] = 2.0 * c;
    w
}

/// Backward Riccati recursion of the true model under a quadratic cost.
pub fn solve_riccati(model: &LinearModel, cost: &CostExpansion) -> Result<RiccatiSolution> {
    let dx = model.a.nrows();
    let du = model.b.ncols();
    let horizon = cost.horizon();
    if cost.terminal.dim() != dx || cost.running.iter().any(|e| e.dim() != dx + du) {
        return invalid("cost dimensions do not match the model");
    }
    // Augmented dynamics on s = [x; 1].
    let mut a = Mat::identity(dx + 1, dx + 1);
    a.view_mut((0, 0), (dx, dx)).copy_from(&model.a);
    a.view_mut((0, dx), (dx, 1)).copy_from(&model.c);
    let mut b = Mat::zeros(dx + 1, du);
    b.view_mut((0, 0), (dx, du)).copy_from(&model.b);

    let term = &cost.terminal;
    let mut p = homogeneous_weight(&term.hessian, &term.gradient, term.constant);
    let mut cost_to_go = vec![p.clone()];
    let mut gains = Vec::with_capacity(horizon);
    let mut offsets = Vec::with_capacity(horizon);
    for e in cost.running.iter().rev() {
        // Reorder [x; u; 1] into the blocks of s = [x; 1] and u.
        let w = homogeneous_weight(&e.hessian, &e.gradient, e.constant);
        let s_idx: Vec<usize> = (0..dx).chain(std::iter::once(dx + du)).collect();
        let u_idx: Vec<usize> = (dx..dx + du).collect();
        let pick = |rows: &[usize], cols: &[usize]| Mat::from_fn(rows.len(), cols.len(), |i, j| w[(rows[i], cols[j])]);
        let q = pick(&s_idx, &s_idx);
        let r = pick(&u_idx, &u_idx);
        let n = pick(&s_idx, &u_idx);

        let bp = b.transpose() * &p;
        let gram = &r + &bp * &b;
        let inv = spd_inverse(&gram).ok_or_else(|| crate::Error::InvalidArgument("R + B^T P B is not positive definite".into()))?;
        let l = &inv * (n.transpose() + &bp * &a);
        let next = &q + a.transpose() * &p * &a - (&n + a.transpose() * &p * &b) * &l;
        p = (&next + next.transpose()) * 0.5;
        gains.push(-l.columns(0, dx).into_owned());
        offsets.push(-l.column(dx).into_owned());
        cost_to_go.push(p.clone());
    }
    gains.reverse();
    offsets.reverse();
    cost_to_go.reverse();
    Ok(RiccatiSolution { gains, offsets, cost_to_go })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::QuadraticExpansion;

    fn scalar_model() -> LinearModel {
        LinearModel { a: Mat::identity(1, 1), b: Mat::identity(1, 1), c: Vector::zeros(1) }
    }

    #[test]
    fn one_step_scalar_problem_matches_hand_solution() {
        // min_u 1/2 r u^2 + 1/2 q (x + u)^2  =>  u = -q/(q+r) x, value 1/2 qr/(q+r) x^2.
        let (q, r) = (3.0, 1.0);
        let mut running = QuadraticExpansion::zeros(2);
        running.hessian[(1, 1)] = r;
        let mut terminal = QuadraticExpansion::zeros(1);
        terminal.hessian[(0, 0)] = q;
        let cost = CostExpansion { running: vec![running], terminal, clamp_activations: 0 };
        let sol = solve_riccati(&scalar_model(), &cost).unwrap();
        assert!((sol.gains[0][(0, 0)] + q / (q + r)).abs() < 1e-15);
        assert!(sol.offsets[0][0].abs() < 1e-15);
        let x = Vector::from_element(1, 2.0);
        assert!((sol.value(0, &x) - 0.5 * q * r / (q + r) * 4.0).abs() < 1e-14);
        assert!((sol.value(1, &x) - 0.5 * q * 4.0).abs() < 1e-14);
    }

    #[test]
    fn affine_terms_shift_the_offset() {
        // Drift c = 1 with terminal target 0: u = -q/(q+r) (x + 1).
        let mut model = scalar_model();
        model.c[0] = 1.0;
        let mut running = QuadraticExpansion::zeros(2);
        running.hessian[(1, 1)] = 1.0;
        let mut terminal = QuadraticExpansion::zeros(1);
        terminal.hessian[(0, 0)] = 1.0;
        let cost = CostExpansion { running: vec![running], terminal, clamp_activations: 0 };
        let sol = solve_riccati(&model, &cost).unwrap();
        assert!((sol.offsets[0][0] + 0.5).abs() < 1e-15);
        let (xs, us) = sol.simulate(&model, &Vector::from_element(1, 1.0));
        assert!((us[0][0] + 1.0).abs() < 1e-15);
        assert!((xs[1][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_cost() {
        let cost = CostExpansion { running: vec![QuadraticExpansion::zeros(3)], terminal: QuadraticExpansion::zeros(1), clamp_activations: 0 };
        assert!(solve_riccati(&scalar_model(), &cost).is_err());
    }
}
