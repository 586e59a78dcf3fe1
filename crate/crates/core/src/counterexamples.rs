//! Two-atom constructions on which a surrogate cannot tell the conditional
//! mean from a shifted prediction, so no consistency bound can exist.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditional::{best_conditional_error, conditional_error, conditional_regret, BestMethod, Hypothesis};
use crate::distributions::{check_symmetric, Conditional, FiniteDistribution, SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::losses::LossKind;

/// Surrogate errors of the two predictors must agree to this precision.
pub const EQUALITY_TOL: f64 = 1e-12;

/// Smallest regime margin used by [`random_params`].
pub const FUZZ_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NegativeTheorem {
    /// Huber with `mu - y > delta`.
    #[serde(rename = "huber")]
    HuberNeg,
    /// Squared eps-insensitive with `mu - y < eps`.
    #[serde(rename = "sqeps")]
    SqEpsNeg,
    /// Eps-insensitive with `mu - y > eps`.
    #[serde(rename = "eps-far")]
    EpsNegFar,
    /// Eps-insensitive with `mu - y < eps`.
    #[serde(rename = "eps-near")]
    EpsNegNear,
}

impl NegativeTheorem {
    pub const ALL: [NegativeTheorem; 4] = [
        NegativeTheorem::HuberNeg,
        NegativeTheorem::SqEpsNeg,
        NegativeTheorem::EpsNegFar,
        NegativeTheorem::EpsNegNear,
    ];

    pub fn surrogate(&self, param: f64) -> LossKind {
        match self {
            NegativeTheorem::HuberNeg => LossKind::Huber { delta: param },
            NegativeTheorem::SqEpsNeg => LossKind::SqEpsInsensitive { eps: param },
            NegativeTheorem::EpsNegFar | NegativeTheorem::EpsNegNear => LossKind::EpsInsensitive { eps: param },
        }
    }

    /// True when the regime needs `mu - y > param`.
    fn far(&self) -> bool {
        matches!(self, NegativeTheorem::HuberNeg | NegativeTheorem::EpsNegFar)
    }
}

impl fmt::Display for NegativeTheorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativeTheorem::HuberNeg => "huber",
            NegativeTheorem::SqEpsNeg => "sqeps",
            NegativeTheorem::EpsNegFar => "eps-far",
            NegativeTheorem::EpsNegNear => "eps-near",
        })
    }
}

impl FromStr for NegativeTheorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NegativeTheorem::ALL
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown theorem {s:?}; expected huber, sqeps, eps-far or eps-near")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    #[serde(rename = "B")]
    pub bound: f64,
    pub y: f64,
    pub mu: f64,
    /// `delta` for Huber, `eps` otherwise.
    pub param: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleCase {
    pub theorem: NegativeTheorem,
    pub params: CounterexampleParams,
    pub dist: FiniteDistribution,
    pub h_bar: Hypothesis,
    pub h_star: Hypothesis,
}

impl CounterexampleCase {
    pub fn surrogate(&self) -> LossKind {
        self.theorem.surrogate(self.params.param)
    }
}

/// Single input `x0`, atoms `y` and `2 mu - y` with mass 1/2 each,
/// `h_bar = y + param` and `h_star = mu`.
pub fn build_counterexample(theorem: NegativeTheorem, params: CounterexampleParams) -> Result<CounterexampleCase> {
    let CounterexampleParams { bound, y, mu, param } = params;
    let fail = |m: String| Err(Error::InvalidParams(m));
    if ![bound, y, mu, param].iter().all(|v| v.is_finite()) {
        return fail("parameters must be finite".into());
    }
    if bound <= 0.0 {
        return fail(format!("B > 0 violated: B = {bound}"));
    }
    if param <= 0.0 {
        return fail(format!("param > 0 violated: param = {param}"));
    }
    if !(-bound <= y && y < mu && mu <= bound) {
        return fail(format!("-B <= y < mu <= B violated: B = {bound}, y = {y}, mu = {mu}"));
    }
    let mirror = 2.0 * mu - y;
    if mirror > bound {
        return fail(format!("2 mu - y <= B violated: 2 mu - y = {mirror}, B = {bound}"));
    }
    let gap = mu - y;
    if theorem.far() && !(gap > param) {
        return fail(format!("mu - y > param violated: mu - y = {gap}, param = {param}"));
    }
    if !theorem.far() && !(gap < param) {
        return fail(format!("mu - y < param violated: mu - y = {gap}, param = {param}"));
    }
    let shifted = y + param;
    if shifted.abs() > bound {
        return fail(format!("|y + param| <= B violated: y + param = {shifted}, B = {bound}"));
    }
    let cond = Conditional::new([(y, 0.5), (mirror, 0.5)], bound)?;
    let dist = FiniteDistribution::single(cond);
    let id = dist.points()[0].id.clone();
    Ok(CounterexampleCase {
        theorem,
        params,
        h_bar: Hypothesis::new([(id.clone(), shifted)]),
        h_star: Hypothesis::new([(id, mu)]),
        dist,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleOutcome {
    pub surrogate_err_hbar: f64,
    pub surrogate_err_hstar: f64,
    /// Numeric minimum of the surrogate conditional error over `[-B, B]`.
    pub surrogate_best: f64,
    pub sq_regret_hbar: f64,
    pub confirmed: bool,
    pub diagnostics: Vec<String>,
}

/// Evaluates both predictors; `confirmed` when they tie on the surrogate, both
/// are surrogate-optimal, and `h_bar` has positive squared-loss regret.
pub fn assert_counterexample(case: &CounterexampleCase) -> Result<CounterexampleOutcome> {
    let point = &case.dist.points()[0];
    let cond = &point.cond;
    let kind = case.surrogate();
    let bar = case.h_bar.get(&point.id)?;
    let star = case.h_star.get(&point.id)?;
    let mut diagnostics = Vec::new();

    if let Err(e) = check_symmetric(cond, SYMMETRY_TOL) {
        diagnostics.push(format!("not symmetric: {e}"));
    }
    let e_bar = conditional_error(kind, bar, cond);
    let e_star = conditional_error(kind, star, cond);
    if (e_bar - e_star).abs() > EQUALITY_TOL {
        diagnostics.push(format!("surrogate errors differ: {e_bar} vs {e_star}"));
    }
    let best = best_conditional_error(kind, cond, BestMethod::Numeric)?;
    if e_bar > best + 1e-9 {
        diagnostics.push(format!("h_bar is not surrogate-optimal: {e_bar} > {best}"));
    }
    let regret = conditional_regret(LossKind::Squared, bar, cond)?;
    if !(regret > 0.0) {
        diagnostics.push(format!("squared regret of h_bar is not positive: {regret}"));
    }
    Ok(CounterexampleOutcome {
        surrogate_err_hbar: e_bar,
        surrogate_err_hstar: e_star,
        surrogate_best: best,
        sq_regret_hbar: regret,
        confirmed: diagnostics.is_empty(),
        diagnostics,
    })
}

/// Draws admissible parameters whose regime margin `|mu - y - param|` is at
/// least [`FUZZ_MARGIN`], deterministically in `seed`.
pub fn random_params(theorem: NegativeTheorem, seed: u64) -> CounterexampleParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = FUZZ_MARGIN + 1e-9;
    let bound = rng.gen_range(0.5..=2.0);
    if theorem.far() {
        // param + margin <= gap <= B
        let param = rng.gen_range(0.05..=(bound - margin) * 0.75);
        let gap = rng.gen_range(param + margin..=bound);
        let mu = rng.gen_range((-bound + gap)..=(bound - gap));
        CounterexampleParams {
            bound,
            y: mu - gap,
            mu,
            param,
        }
    } else {
        // 0 < gap <= param - margin, y + param <= B
        let param = rng.gen_range(margin + 0.01..=bound);
        let gap = rng.gen_range(0.01..=param - margin);
        let hi = (bound - gap).min(bound + gap - param);
        let mu = rng.gen_range((-bound + gap)..=hi);
        CounterexampleParams {
            bound,
            y: mu - gap,
            mu,
            param,
        }
    }
}
