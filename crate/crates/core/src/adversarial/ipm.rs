//! Log-barrier interior point method.
//!
//! Every supported objective has the epigraph form
//!
//! ```text
//! min  (1/m) sum phi(t_i, N)   s.t.  t_i >= |r_i| - shift,  t_i >= floor,  N >= ||w||_*
//! ```
//!
//! with `phi` convex and nondecreasing in `t_i` and `N`, so at the optimum
//! `t_i` and `N` are tight. The residual variables only couple to `(w, b, aux)`,
//! so each Newton step eliminates them and factors a small dense system.

use nalgebra::{DMatrix, DVector};

use super::{dot, Dataset, LinearModel, Objective, PerturbationNorm, SolverConfig};
use crate::error::{Error, Result};
use crate::losses::LossKind;

const NEWTON_TOL: f64 = 1e-7;
const CENTERING_STEPS: usize = 100;
const BARRIER_GROWTH: f64 = 10.0;
const ARMIJO: f64 = 0.25;
const MIN_STEP: f64 = 1e-14;
const TRACE_LEN: usize = 20;

#[derive(Clone, Copy)]
enum Fit {
    Surrogate(LossKind),
    /// `(t_i + gamma N)^2`.
    AdvSq,
}

struct Epigraph<'a> {
    data: &'a Dataset,
    fit: Fit,
    norm: PerturbationNorm,
    /// Weight on `N` for the surrogate fit, `gamma` for the adversarial one.
    coef: f64,
    na: usize,
    shift: f64,
    floor: Option<f64>,
    bound: Option<f64>,
}

/// Gradient and Hessian blocks of the barrier function. `a` is the dense
/// block over `(w, b, aux)`, column `i` of `c` couples it to `t_i`, and `diag`
/// is the diagonal `t` block.
struct Newton {
    g: DVector<f64>,
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    diag: DVector<f64>,
}

impl<'a> Epigraph<'a> {
    fn new(objective: &Objective, data: &'a Dataset, bound: Option<f64>) -> Self {
        let (fit, norm, coef) = match *objective {
            Objective::SmoothAdv(cfg) => (Fit::Surrogate(cfg.surrogate), cfg.norm, cfg.tau * cfg.gamma),
            Objective::AdvSq { gamma, norm } => (Fit::AdvSq, norm, gamma),
        };
        let na = if coef == 0.0 {
            0
        } else if norm == PerturbationNorm::LInf {
            data.dim()
        } else {
            1
        };
        let (shift, floor) = match fit {
            Fit::Surrogate(LossKind::EpsInsensitive { eps }) => (eps, Some(0.0)),
            Fit::Surrogate(LossKind::SqEpsInsensitive { eps }) => (0.0, Some(eps)),
            _ => (0.0, None),
        };
        Epigraph {
            data,
            fit,
            norm,
            coef,
            na,
            shift,
            floor,
            bound,
        }
    }

    fn d(&self) -> usize {
        self.data.dim()
    }

    fn k(&self) -> usize {
        self.d() + 1 + self.na
    }

    fn m(&self) -> usize {
        self.data.len()
    }

    /// Barrier parameter: number of linear constraints plus 2 for the cone.
    fn nu(&self) -> f64 {
        let d = self.d();
        let mut nu = 2 * self.m();
        if self.floor.is_some() {
            nu += self.m();
        }
        if self.na > 0 {
            nu += if self.norm == PerturbationNorm::L2 { 2 } else { 2 * d };
        }
        if self.bound.is_some() {
            nu += 2 * d + 2;
        }
        nu as f64
    }

    fn start(&self) -> DVector<f64> {
        let k = self.k();
        let mut z = DVector::zeros(k + self.m());
        for l in 0..self.na {
            z[self.d() + 1 + l] = 1.0;
        }
        for (i, &y) in self.data.labels().iter().enumerate() {
            z[k + i] = (y.abs() - self.shift).max(self.floor.unwrap_or(f64::NEG_INFINITY)).max(0.0) + 1.0;
        }
        z
    }

    fn norm_var(&self, z: &DVector<f64>) -> f64 {
        (0..self.na).map(|l| z[self.d() + 1 + l]).sum()
    }

    fn model(&self, z: &DVector<f64>) -> LinearModel {
        let d = self.d();
        LinearModel::new(z.rows(0, d).iter().copied().collect(), z[d])
    }

    fn residual(&self, z: &DVector<f64>, i: usize) -> f64 {
        let d = self.d();
        let w = &z.as_slice()[..d];
        dot(w, &self.data.features()[i]) + z[d] - self.data.labels()[i]
    }

    /// `(phi, phi', phi'')` of the surrogate fit in `t`.
    fn phi(&self, loss: LossKind, t: f64) -> (f64, f64, f64) {
        match loss {
            LossKind::Squared => (t * t, 2.0 * t, 2.0),
            LossKind::Lp { p } => (t.powf(p), p * t.powf(p - 1.0), p * (p - 1.0) * t.powf(p - 2.0)),
            LossKind::Huber { delta } => {
                if t <= delta {
                    (0.5 * t * t, t, 1.0)
                } else {
                    (delta * t - 0.5 * delta * delta, delta, 0.0)
                }
            }
            LossKind::EpsInsensitive { .. } => (t, 1.0, 0.0),
            LossKind::SqEpsInsensitive { eps } => (t * t - eps * eps, 2.0 * t, 2.0),
        }
    }

    /// Epigraph objective `f(z)`.
    fn objective(&self, z: &DVector<f64>) -> f64 {
        let k = self.k();
        let m = self.m() as f64;
        let n = self.norm_var(z);
        let t = z.rows(k, self.m());
        match self.fit {
            Fit::Surrogate(loss) => t.iter().map(|&ti| self.phi(loss, ti).0).sum::<f64>() / m + self.coef * n,
            Fit::AdvSq => t.iter().map(|&ti| (ti + self.coef * n).powi(2)).sum::<f64>() / m,
        }
    }

    /// Sum of `-log` over all constraint slacks, or `None` outside the domain.
    fn barrier(&self, z: &DVector<f64>) -> Option<f64> {
        let d = self.d();
        let k = self.k();
        let mut total = 0.0;
        let mut add = |c: f64| -> bool {
            if c > 0.0 {
                total -= c.ln();
                true
            } else {
                false
            }
        };
        for i in 0..self.m() {
            let r = self.residual(z, i);
            let t = z[k + i];
            if !add(t - r + self.shift) || !add(t + r + self.shift) {
                return None;
            }
            if let Some(fl) = self.floor {
                if !add(t - fl) {
                    return None;
                }
            }
        }
        if self.na > 0 {
            match self.norm {
                PerturbationNorm::LInf => {
                    for j in 0..d {
                        if !add(z[d + 1 + j] - z[j]) || !add(z[d + 1 + j] + z[j]) {
                            return None;
                        }
                    }
                }
                PerturbationNorm::L1 => {
                    let u = z[d + 1];
                    for j in 0..d {
                        if !add(u - z[j]) || !add(u + z[j]) {
                            return None;
                        }
                    }
                }
                PerturbationNorm::L2 => {
                    let u = z[d + 1];
                    let ww: f64 = (0..d).map(|j| z[j] * z[j]).sum();
                    if u <= 0.0 || !add(u * u - ww) {
                        return None;
                    }
                }
            }
        }
        if let Some(rb) = self.bound {
            for j in 0..=d {
                if !add(rb - z[j]) || !add(rb + z[j]) {
                    return None;
                }
            }
        }
        Some(total)
    }

    fn value(&self, z: &DVector<f64>, s: f64) -> Option<f64> {
        self.barrier(z).map(|b| s * self.objective(z) + b)
    }

    fn newton(&self, z: &DVector<f64>, s: f64) -> Newton {
        let d = self.d();
        let k = self.k();
        let m = self.m();
        let mf = m as f64;
        let mut g = DVector::zeros(k + m);
        let mut a = DMatrix::zeros(k, k);
        let mut c = DMatrix::zeros(k, m);
        let mut diag = DVector::zeros(m);
        let n = self.norm_var(z);

        for i in 0..m {
            let x = &self.data.features()[i];
            let r = self.residual(z, i);
            let t = z[k + i];
            let cp = t - r + self.shift;
            let cm = t + r + self.shift;
            let (ip, im) = (1.0 / cp, 1.0 / cm);
            let (ip2, im2) = (ip * ip, im * im);
            // d(c+)/d(w,b) = -xi, d(c-)/d(w,b) = +xi, both +1 in t_i.
            let gxi = ip - im;
            let hxi = ip2 + im2;
            let cxi = im2 - ip2;
            for p in 0..=d {
                let xp = if p < d { x[p] } else { 1.0 };
                g[p] += gxi * xp;
                c[(p, i)] += cxi * xp;
                for q in 0..=p {
                    let xq = if q < d { x[q] } else { 1.0 };
                    a[(p, q)] += hxi * xp * xq;
                }
            }
            g[k + i] -= ip + im;
            diag[i] += hxi;
            if let Some(fl) = self.floor {
                let f = 1.0 / (t - fl);
                g[k + i] -= f;
                diag[i] += f * f;
            }
            match self.fit {
                Fit::Surrogate(loss) => {
                    let (_, d1, d2) = self.phi(loss, t);
                    g[k + i] += s * d1 / mf;
                    diag[i] += s * d2 / mf;
                }
                Fit::AdvSq => {
                    let e = t + self.coef * n;
                    g[k + i] += 2.0 * s * e / mf;
                    diag[i] += 2.0 * s / mf;
                    for l in 0..self.na {
                        g[d + 1 + l] += 2.0 * s * self.coef * e / mf;
                        c[(d + 1 + l, i)] += 2.0 * s * self.coef / mf;
                    }
                }
            }
        }

        if self.na > 0 {
            match self.fit {
                Fit::Surrogate(_) => {
                    for l in 0..self.na {
                        g[d + 1 + l] += s * self.coef;
                    }
                }
                Fit::AdvSq => {
                    let h = 2.0 * s * self.coef * self.coef;
                    for p in 0..self.na {
                        for q in 0..=p {
                            a[(d + 1 + p, d + 1 + q)] += h;
                        }
                    }
                }
            }
            match self.norm {
                PerturbationNorm::LInf | PerturbationNorm::L1 => {
                    for j in 0..d {
                        let aux = if self.norm == PerturbationNorm::LInf { d + 1 + j } else { d + 1 };
                        for sign in [-1.0, 1.0] {
                            // slack = aux + sign * w_j
                            let inv = 1.0 / (z[aux] + sign * z[j]);
                            g[aux] -= inv;
                            g[j] -= sign * inv;
                            let h = inv * inv;
                            a[(aux, aux)] += h;
                            a[(j, j)] += h;
                            a[(aux.max(j), aux.min(j))] += sign * h;
                        }
                    }
                }
                PerturbationNorm::L2 => {
                    let u = z[d + 1];
                    let ww: f64 = (0..d).map(|j| z[j] * z[j]).sum();
                    let q = u * u - ww;
                    let q2 = q * q;
                    for j in 0..d {
                        g[j] += 2.0 * z[j] / q;
                        for l in 0..=j {
                            a[(j, l)] += 4.0 * z[j] * z[l] / q2;
                        }
                        a[(j, j)] += 2.0 / q;
                        a[(d + 1, j)] -= 4.0 * u * z[j] / q2;
                    }
                    g[d + 1] -= 2.0 * u / q;
                    a[(d + 1, d + 1)] += -2.0 / q + 4.0 * u * u / q2;
                }
            }
        }

        if let Some(rb) = self.bound {
            for j in 0..=d {
                let (lo, hi) = (1.0 / (rb + z[j]), 1.0 / (rb - z[j]));
                g[j] += hi - lo;
                a[(j, j)] += hi * hi + lo * lo;
            }
        }

        a.fill_upper_triangle_with_lower_triangle();
        Newton { g, a, c, diag }
    }
}

/// Solves the Newton system by eliminating the residual variables.
fn newton_direction(sys: &Newton) -> Option<DVector<f64>> {
    let k = sys.a.nrows();
    let m = sys.diag.len();
    let mut schur = sys.a.clone();
    let g_theta = sys.g.rows(0, k);
    let g_t = sys.g.rows(k, m);
    let mut rhs = -g_theta.clone_owned();
    for i in 0..m {
        let col = sys.c.column(i);
        let inv = 1.0 / sys.diag[i];
        schur.ger(-inv, &col, &col, 1.0);
        rhs.axpy(g_t[i] * inv, &col, 1.0);
    }
    let scale = (0..k).map(|i| schur[(i, i)].abs()).fold(1.0, f64::max);
    let mut ridge = 0.0;
    let dtheta = loop {
        let mut mat = schur.clone();
        for i in 0..k {
            mat[(i, i)] += ridge;
        }
        if let Some(chol) = mat.cholesky() {
            break chol.solve(&rhs);
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 10.0 };
        if ridge > 1e-2 * scale {
            return None;
        }
    };
    let mut step = DVector::zeros(k + m);
    step.rows_mut(0, k).copy_from(&dtheta);
    for i in 0..m {
        step[k + i] = (-g_t[i] - sys.c.column(i).dot(&dtheta)) / sys.diag[i];
    }
    Some(step)
}

pub(super) fn solve(objective: &Objective, data: &Dataset, solver: &SolverConfig) -> Result<(LinearModel, usize)> {
    let problem = Epigraph::new(objective, data, solver.projection_bound);
    let nu = problem.nu();
    let mut z = problem.start();
    let mut s = 1.0;
    let mut iters = 0;
    let mut trace: Vec<f64> = Vec::new();
    let push = |trace: &mut Vec<f64>, v: f64| {
        trace.push(v);
        if trace.len() > TRACE_LEN {
            trace.remove(0);
        }
    };

    loop {
        // Centering at the current barrier weight. The barrier value grows
        // with `s`, so once a step no longer decreases it strictly the point is
        // as central as double precision allows.
        for _ in 0..CENTERING_STEPS {
            if iters >= solver.max_iters {
                return Err(Error::NonConvergence { iters, trace });
            }
            iters += 1;
            let sys = problem.newton(&z, s);
            let Some(dir) = newton_direction(&sys) else { break };
            let slope = sys.g.dot(&dir);
            if !slope.is_finite() || -slope / 2.0 <= NEWTON_TOL {
                break;
            }
            let f0 = problem.value(&z, s).unwrap_or(f64::INFINITY);
            let mut alpha = 1.0;
            let accepted = loop {
                let cand = &z + alpha * &dir;
                if let Some(f1) = problem.value(&cand, s) {
                    if f1 < f0 && f1 <= f0 + ARMIJO * alpha * slope {
                        break Some(cand);
                    }
                }
                alpha *= 0.5;
                if alpha < MIN_STEP {
                    break None;
                }
            };
            match accepted {
                Some(cand) => z = cand,
                None => break,
            }
            push(&mut trace, problem.objective(&z));
        }
        if nu / s < solver.tol {
            return Ok((problem.model(&z), iters));
        }
        s *= BARRIER_GROWTH;
    }
}
