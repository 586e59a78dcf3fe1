//! Adversarial losses for linear models under norm-bounded input
//! perturbations, training of the smooth adversarial and adversarial squared
//! objectives, and clean/robust evaluation.

mod ipm;
mod prox;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossKind;

/// Norm measuring the size of an input perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationNorm {
    LInf,
    L2,
    L1,
}

impl PerturbationNorm {
    /// Dual norm of `w`: l1 for LInf, l2 for L2, l-infinity for L1.
    pub fn dual(&self, w: &[f64]) -> f64 {
        match self {
            PerturbationNorm::LInf => w.iter().map(|v| v.abs()).sum(),
            PerturbationNorm::L2 => w.iter().map(|v| v * v).sum::<f64>().sqrt(),
            PerturbationNorm::L1 => w.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

impl fmt::Display for PerturbationNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbationNorm::LInf => "linf",
            PerturbationNorm::L2 => "l2",
            PerturbationNorm::L1 => "l1",
        })
    }
}

impl FromStr for PerturbationNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linf" => Ok(PerturbationNorm::LInf),
            "l2" => Ok(PerturbationNorm::L2),
            "l1" => Ok(PerturbationNorm::L1),
            other => Err(Error::InvalidParams(format!("unknown norm {other:?}; expected linf, l2 or l1"))),
        }
    }
}

/// `h(x) = <w, x> + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    #[serde(rename = "w")]
    pub weights: Vec<f64>,
    #[serde(rename = "b")]
    pub bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        LinearModel { weights, bias }
    }

    pub fn zeros(d: usize) -> Self {
        LinearModel::new(vec![0.0; d], 0.0)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Labeled rows with a common feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    d: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                found: labels.len(),
                context: Some("number of labels".into()),
            });
        }
        let d = features.first().map_or(0, Vec::len);
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                    context: Some(format!("row {i}")),
                });
            }
            if row.iter().any(|v| !v.is_finite()) || !labels[i].is_finite() {
                return Err(Error::InvalidParams(format!("row {i} has a non-finite value")));
            }
        }
        Ok(Dataset { features, labels, d })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            d: self.d,
        }
    }

    fn check_model(&self, model: &LinearModel) -> Result<()> {
        if model.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: model.dim(),
                context: Some("model weights".into()),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvConfig {
    pub gamma: f64,
    pub norm: PerturbationNorm,
    pub tau: f64,
    pub surrogate: LossKind,
}

impl AdvConfig {
    pub fn validate(&self) -> Result<()> {
        self.surrogate.validate()?;
        check_gamma(self.gamma)?;
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParams(format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("gamma must be finite and >= 0, got {gamma}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "snake_case")]
pub enum Objective {
    /// `mean L(h(x), y) + tau * gamma * ||w||_*`.
    SmoothAdv(AdvConfig),
    /// `mean (|h(x) - y| + gamma * ||w||_*)^2`.
    AdvSq { gamma: f64, norm: PerturbationNorm },
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        match self {
            Objective::SmoothAdv(cfg) => cfg.validate(),
            Objective::AdvSq { gamma, .. } => check_gamma(*gamma),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::SmoothAdv(_) => "smooth-adv",
            Objective::AdvSq { .. } => "adv-sq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Cap on iterations (proximal steps or Newton steps).
    pub max_iters: usize,
    /// Initial step size of the proximal method.
    pub step0: f64,
    /// Target accuracy: gradient-mapping norm for the proximal method,
    /// duality-gap bound for the barrier method.
    pub tol: f64,
    /// Recorded for provenance; both solvers are deterministic.
    pub seed: u64,
    /// Optional box `|w_j|, |b| <= r`.
    pub projection_bound: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 200_000,
            step0: 1.0,
            tol: 1e-9,
            seed: 0,
            projection_bound: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be >= 1".into()));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::InvalidParams(format!("step0 must be positive, got {}", self.step0)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParams(format!("tol must be positive, got {}", self.tol)));
        }
        if let Some(r) = self.projection_bound {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParams(format!("projection bound must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// Accelerated proximal gradient with backtracking and adaptive restart.
    Fista,
    /// Log-barrier interior point method on an epigraph reformulation.
    Barrier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub model: LinearModel,
    pub objective: f64,
    pub iters: usize,
    pub method: SolverMethod,
}

/// `sup_{||x' - x|| <= gamma} |h(x') - h(x)| = gamma * ||w||_*`.
pub fn smoothness_term(model: &LinearModel, gamma: f64, norm: PerturbationNorm) -> f64 {
    gamma * norm.dual(&model.weights)
}

/// `sup_{||x' - x|| <= gamma} (h(x') - y)^2 = (|h(x) - y| + gamma ||w||_*)^2`.
pub fn adv_squared_loss(model: &LinearModel, x: &[f64], y: f64, gamma: f64, norm: PerturbationNorm) -> f64 {
    let v = (model.predict(x) - y).abs() + smoothness_term(model, gamma, norm);
    v * v
}

pub fn smooth_adv_loss(cfg: &AdvConfig, model: &LinearModel, x: &[f64], y: f64) -> f64 {
    cfg.surrogate.value(model.predict(x), y) + cfg.tau * smoothness_term(model, cfg.gamma, cfg.norm)
}

/// Empirical objective of `model` on `data`, summed in row order.
pub fn objective_value(objective: &Objective, model: &LinearModel, data: &Dataset) -> Result<f64> {
    objective.validate()?;
    data.check_model(model)?;
    if data.is_empty() {
        return Err(Error::InvalidParams("dataset is empty".into()));
    }
    let m = data.len() as f64;
    Ok(match objective {
        Objective::SmoothAdv(cfg) => {
            let fit: f64 = data.rows().map(|(x, y)| cfg.surrogate.value(model.predict(x), y)).sum();
            fit / m + cfg.tau * smoothness_term(model, cfg.gamma, cfg.norm)
        }
        Objective::AdvSq { gamma, norm } => {
            data.rows().map(|(x, y)| adv_squared_loss(model, x, y, *gamma, *norm)).sum::<f64>() / m
        }
    })
}

/// Minimizes the objective over `(w, b)`, starting from zero.
///
/// The smooth adversarial objective with a differentiable surrogate goes to
/// the proximal solver (the dual-norm term has a closed-form prox). The
/// adversarial squared objective, non-smooth surrogates, and boxed problems
/// with a non-separable penalty go to the barrier solver.
pub fn train(objective: &Objective, data: &Dataset, solver: &SolverConfig) -> Result<TrainResult> {
    objective.validate()?;
    solver.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParams("dataset is empty".into()));
    }
    let (model, iters, method) = match objective {
        Objective::SmoothAdv(cfg) if prox::supports(cfg, solver) => {
            let (model, iters) = prox::solve(cfg, data, solver)?;
            (model, iters, SolverMethod::Fista)
        }
        _ => {
            let (model, iters) = ipm::solve(objective, data, solver)?;
            (model, iters, SolverMethod::Barrier)
        }
    };
    let value = objective_value(objective, &model, data)?;
    Ok(TrainResult {
        model,
        objective: value,
        iters,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub clean_mse: f64,
    pub robust_mse: f64,
}

pub fn evaluate(model: &LinearModel, data: &Dataset, gamma: f64, norm: PerturbationNorm) -> Result<EvalReport> {
    check_gamma(gamma)?;
    data.check_model(model)?;
    if data.is_empty() {
        return Err(Error::InvalidParams("dataset is empty".into()));
    }
    let m = data.len() as f64;
    let clean = data.rows().map(|(x, y)| (model.predict(x) - y).powi(2)).sum::<f64>() / m;
    let robust = data.rows().map(|(x, y)| adv_squared_loss(model, x, y, gamma, norm)).sum::<f64>() / m;
    Ok(EvalReport {
        clean_mse: clean,
        robust_mse: robust,
    })
}

/// `3 B'` with `B'` the largest of `|y|` and `|h(x')|` over the rows and their
/// perturbation balls.
pub fn empirical_nu(model: &LinearModel, data: &Dataset, gamma: f64, norm: PerturbationNorm) -> f64 {
    let s = smoothness_term(model, gamma, norm);
    3.0 * data
        .rows()
        .map(|(x, y)| (model.predict(x).abs() + s).max(y.abs()))
        .fold(0.0, f64::max)
}
