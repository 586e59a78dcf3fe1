//! Conditional errors, regrets and minimizability gaps over finite distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::{check_symmetric, Conditional, FiniteDistribution, SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::scalar::minimize_convex;

/// Negative differences smaller than this are cancellation noise and clamp to 0.
pub const CLAMP_TOL: f64 = 1e-12;

/// Predictions of a hypothesis on each input of a finite distribution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hypothesis {
    pub values: BTreeMap<String, f64>,
}

impl Hypothesis {
    pub fn new(values: impl IntoIterator<Item = (String, f64)>) -> Self {
        Hypothesis {
            values: values.into_iter().collect(),
        }
    }

    /// The same value on every input of `dist`.
    pub fn constant(dist: &FiniteDistribution, value: f64) -> Self {
        Self::new(dist.points().iter().map(|p| (p.id.clone(), value)))
    }

    /// `x -> mu(x)`.
    pub fn conditional_mean(dist: &FiniteDistribution) -> Self {
        Self::new(dist.points().iter().map(|p| (p.id.clone(), p.cond.mean())))
    }

    pub fn get(&self, input: &str) -> Result<f64> {
        self.values
            .get(input)
            .copied()
            .ok_or_else(|| Error::MissingPrediction(input.to_string()))
    }

    /// Checks `|h(x)| <= bound` on every input of `dist`.
    pub fn check_bounded(&self, dist: &FiniteDistribution, bound: f64) -> Result<()> {
        for p in dist.points() {
            let value = self.get(&p.id)?;
            if !(value.abs() <= bound * (1.0 + 1e-12)) {
                return Err(Error::PredictionOutOfBounds {
                    input: p.id.clone(),
                    value,
                    bound,
                });
            }
        }
        Ok(())
    }
}

/// Hypothesis sets bounded by `bound` that attain every value of `[-bound, bound]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HypothesisClass {
    /// Every function with values in `[-bound, bound]`.
    AllBounded {
        #[serde(rename = "B")]
        bound: f64,
        grid_size: usize,
    },
    /// Constant functions with value in `[-bound, bound]`.
    ConstantBounded {
        #[serde(rename = "B")]
        bound: f64,
        grid_size: usize,
    },
}

impl HypothesisClass {
    pub fn all_bounded(bound: f64, grid_size: usize) -> Result<Self> {
        HypothesisClass::AllBounded { bound, grid_size }.validated()
    }

    pub fn constant_bounded(bound: f64, grid_size: usize) -> Result<Self> {
        HypothesisClass::ConstantBounded { bound, grid_size }.validated()
    }

    pub fn validate(&self) -> Result<()> {
        let (bound, grid) = (self.bound(), self.grid_size());
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidClass(format!("bound must be positive, got {bound}")));
        }
        if grid < 2 {
            return Err(Error::InvalidClass(format!("grid_size must be >= 2, got {grid}")));
        }
        Ok(())
    }

    fn validated(self) -> Result<Self> {
        self.validate().map(|_| self)
    }

    pub fn bound(&self) -> f64 {
        match *self {
            HypothesisClass::AllBounded { bound, .. } | HypothesisClass::ConstantBounded { bound, .. } => bound,
        }
    }

    pub fn grid_size(&self) -> usize {
        match *self {
            HypothesisClass::AllBounded { grid_size, .. }
            | HypothesisClass::ConstantBounded { grid_size, .. } => grid_size,
        }
    }

    /// Evenly spaced values from `-bound` to `bound`, `grid_size` of them.
    pub fn mesh(&self) -> Vec<f64> {
        let (b, n) = (self.bound(), self.grid_size());
        (0..n)
            .map(|i| -b + 2.0 * b * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            HypothesisClass::AllBounded { .. } => "allbounded",
            HypothesisClass::ConstantBounded { .. } => "constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BestMethod {
    /// Evaluate at the conditional mean; requires a symmetric conditional.
    ClosedForm,
    /// Convex 1-D minimization over `[-B, B]`.
    Numeric,
}

pub fn conditional_error(kind: LossKind, prediction: f64, cond: &Conditional) -> f64 {
    cond.atoms()
        .iter()
        .map(|a| a.mass * kind.value(prediction, a.label))
        .sum()
}

pub fn best_conditional_error(kind: LossKind, cond: &Conditional, method: BestMethod) -> Result<f64> {
    match method {
        BestMethod::ClosedForm => {
            let mu = check_symmetric(cond, SYMMETRY_TOL).map_err(|e| match e {
                Error::SymmetryViolation { label } => Error::NotSymmetric {
                    input: "<conditional>".into(),
                    label,
                },
                other => other,
            })?;
            Ok(conditional_error(kind, mu, cond))
        }
        BestMethod::Numeric => {
            let b = cond.bound();
            Ok(minimize_convex(|v| conditional_error(kind, v, cond), -b, b).value)
        }
    }
}

/// Maps cancellation noise in `(-CLAMP_TOL, 0)` to zero; more negative values
/// point at a logic error.
pub(crate) fn clamp_nonnegative(value: f64, what: &str) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value > -CLAMP_TOL {
        Ok(0.0)
    } else {
        Err(Error::Inconsistent(format!("{what} is negative: {value}")))
    }
}

pub fn conditional_regret(kind: LossKind, prediction: f64, cond: &Conditional) -> Result<f64> {
    let best = best_conditional_error(kind, cond, BestMethod::ClosedForm)?;
    clamp_nonnegative(conditional_error(kind, prediction, cond) - best, "conditional regret")
}

/// The conditional epsilon-regret: `regret` when it exceeds `eps`, else 0.
pub fn clipped_regret(regret: f64, eps: f64) -> f64 {
    if regret > eps {
        regret
    } else {
        0.0
    }
}

pub fn generalization_error(kind: LossKind, h: &Hypothesis, dist: &FiniteDistribution) -> Result<f64> {
    dist.points()
        .iter()
        .map(|p| Ok(p.weight * conditional_error(kind, h.get(&p.id)?, &p.cond)))
        .sum()
}

pub fn best_in_class_error(kind: LossKind, class: &HypothesisClass, dist: &FiniteDistribution) -> f64 {
    let b = class.bound();
    match class {
        HypothesisClass::AllBounded { .. } => dist
            .points()
            .iter()
            .map(|p| p.weight * minimize_convex(|v| conditional_error(kind, v, &p.cond), -b, b).value)
            .sum(),
        HypothesisClass::ConstantBounded { .. } => {
            let objective = |c: f64| -> f64 {
                dist.points()
                    .iter()
                    .map(|p| p.weight * conditional_error(kind, c, &p.cond))
                    .sum()
            };
            minimize_convex(objective, -b, b).value
        }
    }
}

/// `sum_x w(x) * C*(x)` with the closed-form per-input best.
pub fn expected_best_conditional_error(kind: LossKind, dist: &FiniteDistribution) -> Result<f64> {
    dist.points()
        .iter()
        .map(|p| {
            best_conditional_error(kind, &p.cond, BestMethod::ClosedForm)
                .map(|v| p.weight * v)
                .map_err(|e| match e {
                    Error::NotSymmetric { label, .. } => Error::NotSymmetric {
                        input: p.id.clone(),
                        label,
                    },
                    other => other,
                })
        })
        .sum()
}

pub fn minimizability_gap(kind: LossKind, class: &HypothesisClass, dist: &FiniteDistribution) -> Result<f64> {
    let gap = best_in_class_error(kind, class, dist) - expected_best_conditional_error(kind, dist)?;
    clamp_nonnegative(gap, "minimizability gap")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{random_symmetric_distribution, GeneratorConfig, InputPoint};

    fn pm1() -> Conditional {
        Conditional::new([(-1.0, 0.5), (1.0, 0.5)], 1.0).unwrap()
    }

    /// Two inputs with means -0.5 and 0.5, each spread by +-0.5.
    fn two_input() -> FiniteDistribution {
        let c1 = Conditional::new([(-1.0, 0.5), (0.0, 0.5)], 1.0).unwrap();
        let c2 = Conditional::new([(0.0, 0.5), (1.0, 0.5)], 1.0).unwrap();
        FiniteDistribution::new(
            vec![
                InputPoint { id: "a".into(), weight: 0.5, cond: c1 },
                InputPoint { id: "b".into(), weight: 0.5, cond: c2 },
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn conditional_error_examples() {
        assert_eq!(conditional_error(LossKind::Squared, 0.0, &pm1()), 1.0);
        assert_eq!(conditional_error(LossKind::Lp { p: 1.0 }, 0.0, &pm1()), 1.0);
        assert_eq!(conditional_error(LossKind::Huber { delta: 0.5 }, 0.0, &pm1()), 0.375);
    }

    #[test]
    fn best_conditional_error_examples() {
        assert_eq!(best_conditional_error(LossKind::Squared, &pm1(), BestMethod::ClosedForm).unwrap(), 1.0);
        assert_eq!(
            best_conditional_error(LossKind::SqEpsInsensitive { eps: 2.0 }, &pm1(), BestMethod::ClosedForm).unwrap(),
            0.0
        );
        let numeric = best_conditional_error(LossKind::Huber { delta: 0.5 }, &pm1(), BestMethod::Numeric).unwrap();
        assert!((numeric - 0.375).abs() < 1e-8);
    }

    #[test]
    fn closed_form_rejects_asymmetric() {
        let c = Conditional::new([(0.0, 0.4), (1.0, 0.6)], 1.0).unwrap();
        assert!(matches!(
            best_conditional_error(LossKind::Squared, &c, BestMethod::ClosedForm),
            Err(Error::NotSymmetric { .. })
        ));
        // numeric works anyway: variance 0.24
        let v = best_conditional_error(LossKind::Squared, &c, BestMethod::Numeric).unwrap();
        assert!((v - 0.24).abs() < 1e-10);
        assert!(conditional_regret(LossKind::Squared, 0.2, &c).is_err());
    }

    #[test]
    fn regret_examples() {
        assert!((conditional_regret(LossKind::Squared, 0.5, &pm1()).unwrap() - 0.25).abs() < 1e-15);
        // 0.5 * (1.5^4 + 0.5^4) - 1
        let expect = 0.5 * (5.0625 + 0.0625) - 1.0;
        assert_eq!(expect, 1.5625);
        assert!((conditional_regret(LossKind::Lp { p: 4.0 }, 0.5, &pm1()).unwrap() - expect).abs() < 1e-12);
        for kind in [LossKind::Squared, LossKind::Huber { delta: 0.3 }, LossKind::EpsInsensitive { eps: 0.2 }] {
            assert_eq!(conditional_regret(kind, 0.0, &pm1()).unwrap(), 0.0);
        }
    }

    #[test]
    fn clipped_regret_is_strict() {
        assert_eq!(clipped_regret(0.3, 0.0), 0.3);
        assert_eq!(clipped_regret(0.3, 0.3), 0.0);
        assert_eq!(clipped_regret(0.5, 0.2), 0.5);
    }

    #[test]
    fn clamp_policy() {
        assert_eq!(clamp_nonnegative(-1e-13, "x").unwrap(), 0.0);
        assert!(clamp_nonnegative(-1e-9, "x").is_err());
    }

    #[test]
    fn generalization_error_cases() {
        let d = two_input();
        let mu = Hypothesis::conditional_mean(&d);
        let e = generalization_error(LossKind::Squared, &mu, &d).unwrap();
        assert!((e - 0.25).abs() < 1e-15);

        // hand sum: at a: 0.5*((0.2+1)^2 + 0.2^2) = 0.74; at b: 0.5*((0.1)^2 + (0.9)^2) = 0.41
        let h = Hypothesis::new([("a".to_string(), 0.2), ("b".to_string(), 0.1)]);
        let e = generalization_error(LossKind::Squared, &h, &d).unwrap();
        assert!((e - 0.5 * (0.74 + 0.41)).abs() < 1e-14);

        let single = FiniteDistribution::single(pm1());
        let h = Hypothesis::constant(&single, 0.3);
        assert_eq!(
            generalization_error(LossKind::Huber { delta: 0.5 }, &h, &single).unwrap(),
            conditional_error(LossKind::Huber { delta: 0.5 }, 0.3, &pm1())
        );

        let partial = Hypothesis::new([("a".to_string(), 0.0)]);
        assert!(matches!(
            generalization_error(LossKind::Squared, &partial, &d),
            Err(Error::MissingPrediction(id)) if id == "b"
        ));
    }

    #[test]
    fn best_in_class_and_gaps() {
        let d = two_input();
        let all = HypothesisClass::all_bounded(1.0, 11).unwrap();
        let constant = HypothesisClass::constant_bounded(1.0, 11).unwrap();
        let e_all = best_in_class_error(LossKind::Squared, &all, &d);
        assert!((e_all - 0.25).abs() < 1e-10);
        let e_const = best_in_class_error(LossKind::Squared, &constant, &d);
        assert!((e_const - 0.5).abs() < 1e-10);
        assert!((minimizability_gap(LossKind::Squared, &constant, &d).unwrap() - 0.25).abs() < 1e-9);
        assert!(minimizability_gap(LossKind::Squared, &all, &d).unwrap() < 1e-9);

        let single = FiniteDistribution::single(pm1());
        assert!(minimizability_gap(LossKind::Squared, &constant, &single).unwrap() < 1e-9);
        let k = LossKind::Huber { delta: 0.4 };
        let best = best_conditional_error(k, &pm1(), BestMethod::ClosedForm).unwrap();
        assert!((best_in_class_error(k, &all, &single) - best).abs() < 1e-10);
    }

    #[test]
    fn class_validation_and_mesh() {
        assert!(HypothesisClass::all_bounded(1.0, 1).is_err());
        assert!(HypothesisClass::constant_bounded(0.0, 5).is_err());
        let mesh = HypothesisClass::all_bounded(2.0, 5).unwrap().mesh();
        assert_eq!(mesh, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn hypothesis_bounds_are_checked() {
        let d = two_input();
        let h = Hypothesis::new([("a".to_string(), 0.2), ("b".to_string(), 1.5)]);
        assert!(matches!(h.check_bounded(&d, 1.0), Err(Error::PredictionOutOfBounds { .. })));
    }

    fn kinds() -> [LossKind; 5] {
        [
            LossKind::Squared,
            LossKind::Lp { p: 1.5 },
            LossKind::Huber { delta: 0.3 },
            LossKind::EpsInsensitive { eps: 0.2 },
            LossKind::SqEpsInsensitive { eps: 0.25 },
        ]
    }

    #[test]
    fn squared_regret_is_squared_distance_to_mean() {
        for seed in 0..200u64 {
            let d = random_symmetric_distribution(seed, &GeneratorConfig { max_inputs: 1, max_atoms: 7, bound: 1.3 });
            let c = &d.points()[0].cond;
            for k in 0..9 {
                let v = -1.3 + 0.325 * k as f64;
                let r = conditional_regret(LossKind::Squared, v, c).unwrap();
                let mu = c.mean();
                assert!((r - (v - mu).powi(2)).abs() <= 1e-12, "seed {seed} v {v}");
            }
        }
    }

    #[test]
    fn gaps_nonnegative_and_constant_class_dominates() {
        for seed in 0..100u64 {
            let d = random_symmetric_distribution(seed, &GeneratorConfig { max_inputs: 5, max_atoms: 7, bound: 1.0 });
            let all = HypothesisClass::all_bounded(1.0, 11).unwrap();
            let constant = HypothesisClass::constant_bounded(1.0, 11).unwrap();
            for k in kinds() {
                let g_all = minimizability_gap(k, &all, &d).unwrap();
                let g_const = minimizability_gap(k, &constant, &d).unwrap();
                assert!(g_all <= 1e-9);
                assert!(g_const >= 0.0);
                assert!(best_in_class_error(k, &constant, &d) >= best_in_class_error(k, &all, &d) - 1e-12);
            }
        }
    }
}
