//! Accelerated proximal gradient for `mean L(r_i) + kappa ||w||_*` with a
//! differentiable surrogate.

use super::{dot, AdvConfig, Dataset, LinearModel, PerturbationNorm, SolverConfig};
use crate::error::{Error, Result};

const TRACE_LEN: usize = 20;

/// The prox of `kappa ||w||_*` plus the box is closed form only when both are
/// separable, so a box is accepted only with the l1 penalty.
pub(super) fn supports(cfg: &AdvConfig, solver: &SolverConfig) -> bool {
    cfg.surrogate.is_smooth() && (solver.projection_bound.is_none() || cfg.norm == PerturbationNorm::LInf)
}

struct Problem<'a> {
    cfg: &'a AdvConfig,
    data: &'a Dataset,
    kappa: f64,
    bound: Option<f64>,
}

impl Problem<'_> {
    fn smooth_value(&self, z: &[f64]) -> f64 {
        let (w, b) = z.split_at(z.len() - 1);
        let sum: f64 = self
            .data
            .rows()
            .map(|(x, y)| self.cfg.surrogate.psi(dot(w, x) + b[0] - y))
            .sum();
        sum / self.data.len() as f64
    }

    fn smooth_grad(&self, z: &[f64], grad: &mut [f64]) {
        let (w, b) = z.split_at(z.len() - 1);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let d = w.len();
        for (x, y) in self.data.rows() {
            let g = self.cfg.surrogate.psi_subgradient(dot(w, x) + b[0] - y);
            for j in 0..d {
                grad[j] += g * x[j];
            }
            grad[d] += g;
        }
        let m = self.data.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
    }

    fn penalty(&self, z: &[f64]) -> f64 {
        self.kappa * self.cfg.norm.dual(&z[..z.len() - 1])
    }

    /// `argmin_u penalty(u) + box(u) + ||u - v||^2 / (2 step)`.
    fn prox(&self, v: &mut [f64], step: f64) {
        let d = v.len() - 1;
        let lambda = self.kappa * step;
        let w = &mut v[..d];
        if lambda > 0.0 {
            match self.cfg.norm {
                PerturbationNorm::LInf => {
                    for wj in w.iter_mut() {
                        *wj = wj.signum() * (wj.abs() - lambda).max(0.0);
                    }
                }
                PerturbationNorm::L2 => {
                    let n = w.iter().map(|a| a * a).sum::<f64>().sqrt();
                    let scale = if n > lambda { 1.0 - lambda / n } else { 0.0 };
                    w.iter_mut().for_each(|a| *a *= scale);
                }
                PerturbationNorm::L1 => {
                    // Moreau: prox of lambda ||.||_inf is v - P_{lambda B_1}(v).
                    let p = project_l1_ball(w, lambda);
                    w.iter_mut().zip(p).for_each(|(a, q)| *a -= q);
                }
            }
        }
        if let Some(r) = self.bound {
            v.iter_mut().for_each(|a| *a = a.clamp(-r, r));
        }
    }
}

fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|a| a.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut u: Vec<f64> = v.iter().map(|a| a.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - radius) / (i + 1) as f64;
        if ui > t {
            theta = t;
        }
    }
    v.iter().map(|a| a.signum() * (a.abs() - theta).max(0.0)).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(super) fn solve(cfg: &AdvConfig, data: &Dataset, solver: &SolverConfig) -> Result<(LinearModel, usize)> {
    let problem = Problem {
        cfg,
        data,
        kappa: cfg.tau * cfg.gamma,
        bound: solver.projection_bound,
    };
    let n = data.dim() + 1;
    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut x_next = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut momentum = 1.0f64;
    let mut lipschitz = 1.0 / solver.step0;
    let mut trace = Vec::new();

    for iter in 1..=solver.max_iters {
        let fy = problem.smooth_value(&y);
        problem.smooth_grad(&y, &mut grad);
        lipschitz *= 0.9;
        loop {
            let step = 1.0 / lipschitz;
            for i in 0..n {
                x_next[i] = y[i] - step * grad[i];
            }
            problem.prox(&mut x_next, step);
            let diff: Vec<f64> = x_next.iter().zip(&y).map(|(a, b)| a - b).collect();
            let model = fy + dot(&grad, &diff) + 0.5 * lipschitz * dot(&diff, &diff);
            let actual = problem.smooth_value(&x_next);
            if actual <= model + 1e-15 * (1.0 + fy.abs()) {
                break;
            }
            lipschitz *= 2.0;
            if !lipschitz.is_finite() {
                return Err(Error::NonConvergence { iters: iter, trace });
            }
        }
        let mapping = lipschitz * dist2(&x_next, &y).sqrt();
        let objective = problem.smooth_value(&x_next) + problem.penalty(&x_next);
        trace.push(objective);
        if trace.len() > TRACE_LEN {
            trace.remove(0);
        }
        if mapping <= solver.tol {
            return Ok((LinearModel::new(x_next[..n - 1].to_vec(), x_next[n - 1]), iter));
        }
        // Adaptive restart when the momentum points uphill.
        let uphill: f64 = (0..n).map(|i| (y[i] - x_next[i]) * (x_next[i] - x[i])).sum();
        let next_momentum = if uphill > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt())
        };
        let beta = if uphill > 0.0 { 0.0 } else { (momentum - 1.0) / next_momentum };
        for i in 0..n {
            y[i] = x_next[i] + beta * (x_next[i] - x[i]);
        }
        x.copy_from_slice(&x_next);
        momentum = next_momentum;
    }
    Err(Error::NonConvergence {
        iters: solver.max_iters,
        trace,
    })
}
