//! Grid checks of the pointwise inequalities behind the positive bounds.
//!
//! Each family compares `F(x, y) = (g(x + y) + g(x - y)) / 2 - g(y)` with a
//! lower bound in `x`; the deviation `F - bound` is nonnegative wherever the
//! inequality holds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deviations below `-VIOLATION_TOL` count as violations.
pub const VIOLATION_TOL: f64 = 1e-10;

const DOMAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "lemma")]
pub enum LemmaId {
    /// Huber `g`, on `|x|, |y| <= bound` with `|y| <= delta`:
    /// `F >= min{delta / (2 bound), 1/4} x^2`.
    #[serde(rename = "huberF")]
    HuberF {
        delta: f64,
        #[serde(rename = "B")]
        bound: f64,
    },
    /// `g = |t|^p` with `p >= 2`, on `[-bound, bound]^2`: `F >= |x|^p`.
    #[serde(rename = "clarkson")]
    LpClarkson {
        p: f64,
        #[serde(rename = "B")]
        bound: f64,
    },
    /// `g = |t|^p` with `1 < p <= 2`, on `[-bound, bound]^2`:
    /// `F >= (2 bound)^(p-2) p (p-1) / 2 * x^2`.
    #[serde(rename = "lplowF")]
    LpLowF {
        p: f64,
        #[serde(rename = "B")]
        bound: f64,
    },
    /// `g = max{t^2 - eps^2, 0}`, on `|y| >= eps`: `F >= x^2`. The inequality
    /// holds for every `x`; `bound` only sets the size of the swept box.
    #[serde(rename = "sqepsF")]
    SqEpsF {
        eps: f64,
        #[serde(rename = "B")]
        bound: f64,
    },
}

impl LemmaId {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let bound = match *self {
            LemmaId::HuberF { bound, .. }
            | LemmaId::LpClarkson { bound, .. }
            | LemmaId::LpLowF { bound, .. }
            | LemmaId::SqEpsF { bound, .. } => bound,
        };
        if !(bound > 0.0 && bound.is_finite()) {
            return bad(format!("B must be positive, got {bound}"));
        }
        match *self {
            LemmaId::HuberF { delta, .. } if !(delta > 0.0 && delta.is_finite()) => {
                bad(format!("delta must be positive, got {delta}"))
            }
            LemmaId::LpClarkson { p, .. } if !(p >= 2.0 && p.is_finite()) => bad(format!("clarkson needs p >= 2, got {p}")),
            LemmaId::LpLowF { p, .. } if !(p > 1.0 && p <= 2.0) => bad(format!("lplowF needs 1 < p <= 2, got {p}")),
            LemmaId::SqEpsF { eps, bound } if !(eps > 0.0 && eps <= bound) => {
                bad(format!("sqepsF needs 0 < eps <= B, got eps {eps}, B {bound}"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LemmaId::HuberF { .. } => "huberF",
            LemmaId::LpClarkson { .. } => "clarkson",
            LemmaId::LpLowF { .. } => "lplowF",
            LemmaId::SqEpsF { .. } => "sqepsF",
        }
    }

    fn g(&self, t: f64) -> f64 {
        match *self {
            LemmaId::HuberF { delta, .. } => {
                let a = t.abs();
                if a <= delta {
                    0.5 * t * t
                } else {
                    delta * a - 0.5 * delta * delta
                }
            }
            LemmaId::LpClarkson { p, .. } | LemmaId::LpLowF { p, .. } => {
                if t == 0.0 {
                    0.0
                } else {
                    t.abs().powf(p)
                }
            }
            LemmaId::SqEpsF { eps, .. } => (t * t - eps * eps).max(0.0),
        }
    }

    fn lower_bound(&self, x: f64) -> f64 {
        match *self {
            LemmaId::HuberF { delta, bound } => (delta / (2.0 * bound)).min(0.25) * x * x,
            LemmaId::LpClarkson { p, .. } => {
                if x == 0.0 {
                    0.0
                } else {
                    x.abs().powf(p)
                }
            }
            LemmaId::LpLowF { p, bound } => (2.0 * bound).powf(p - 2.0) * p * (p - 1.0) / 2.0 * x * x,
            LemmaId::SqEpsF { .. } => x * x,
        }
    }

    fn in_domain(&self, x: f64, y: f64) -> bool {
        let within = |v: f64, r: f64| v.abs() <= r * (1.0 + DOMAIN_TOL);
        match *self {
            LemmaId::HuberF { delta, bound } => within(x, bound) && within(y, bound) && within(y, delta),
            LemmaId::LpClarkson { bound, .. } | LemmaId::LpLowF { bound, .. } => within(x, bound) && within(y, bound),
            LemmaId::SqEpsF { eps, .. } => x.is_finite() && y.abs() >= eps * (1.0 - DOMAIN_TOL),
        }
    }

    /// Grid coordinates along each axis.
    fn axes(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let line = |lo: f64, hi: f64| -> Vec<f64> {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        match *self {
            LemmaId::HuberF { delta, bound } => {
                let r = delta.min(bound);
                (line(-bound, bound), line(-r, r))
            }
            LemmaId::LpClarkson { bound, .. } | LemmaId::LpLowF { bound, .. } => (line(-bound, bound), line(-bound, bound)),
            LemmaId::SqEpsF { eps, bound } => {
                let half = line(eps, bound);
                let mut ys: Vec<f64> = half.iter().rev().map(|y| -y).collect();
                ys.extend(half);
                (line(-bound, bound), ys)
            }
        }
    }
}

/// `F(x, y)` minus the lemma's lower bound at `x`.
pub fn pair_deviation(lemma: LemmaId, x: f64, y: f64) -> Result<f64> {
    lemma.validate()?;
    if !lemma.in_domain(x, y) {
        return Err(Error::DomainViolation {
            lemma: lemma.name().to_string(),
            x,
            y,
        });
    }
    Ok(deviation(&lemma, x, y))
}

fn deviation(lemma: &LemmaId, x: f64, y: f64) -> f64 {
    let f = 0.5 * (lemma.g(x + y) + lemma.g(x - y)) - lemma.g(y);
    f - lemma.lower_bound(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub min_deviation: f64,
    pub argmin: (f64, f64),
    pub violations: usize,
    pub points: usize,
}

/// Sweeps a uniform `n x n` grid over the lemma's domain (`n x 2n` for
/// `sqepsF`, whose `y` range has two pieces).
pub fn check_lemma_grid(lemma: LemmaId, grid_points_per_axis: usize) -> Result<GridCheck> {
    lemma.validate()?;
    if grid_points_per_axis < 3 {
        return Err(Error::InvalidParams(format!(
            "grid needs at least 3 points per axis, got {grid_points_per_axis}"
        )));
    }
    let (xs, ys) = lemma.axes(grid_points_per_axis);
    // (deviation, x index, y index, violations); ties resolve to the smallest index.
    let (min_dev, ix, iy, violations) = xs
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut best = (f64::INFINITY, i, 0usize, 0usize);
            for (j, &y) in ys.iter().enumerate() {
                let d = deviation(&lemma, x, y);
                if d < -VIOLATION_TOL {
                    best.3 += 1;
                }
                if d < best.0 {
                    best = (d, i, j, best.3);
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, usize::MAX, usize::MAX, 0),
            |a, b| {
                let count = a.3 + b.3;
                let pick = if a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) <= (b.1, b.2)) { a } else { b };
                (pick.0, pick.1, pick.2, count)
            },
        );
    Ok(GridCheck {
        min_deviation: min_dev,
        argmin: (xs[ix], ys[iy]),
        violations,
        points: xs.len() * ys.len(),
    })
}
