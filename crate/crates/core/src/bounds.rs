//! Bound transforms, per-instance verification of the squared-loss consistency
//! bounds, the generic convex/concave template checker and the learning bound.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditional::{
    best_conditional_error, best_in_class_error, clamp_nonnegative, clipped_regret, conditional_error,
    expected_best_conditional_error, generalization_error, minimizability_gap, BestMethod, Hypothesis, HypothesisClass,
};
use crate::distributions::{p_min, FiniteDistribution, InputPoint, MassMode, SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::losses::LossKind;

/// A report holds when `slack >= -SLACK_TOL`.
pub const SLACK_TOL: f64 = 1e-8;

/// Tolerance on the per-input premise of the generic checker.
pub const PREMISE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theorem", rename_all = "snake_case")]
pub enum BoundTheorem {
    Huber { delta: f64 },
    LpLow { p: f64 },
    LpHigh { p: f64 },
    L1,
    SqEps { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    #[serde(flatten)]
    pub theorem: BoundTheorem,
    #[serde(rename = "B")]
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sup_factor: Option<f64>,
}

impl BoundSpec {
    pub fn new(theorem: BoundTheorem, bound: f64) -> Self {
        BoundSpec {
            theorem,
            bound,
            p_min: None,
            sup_factor: None,
        }
    }

    pub fn with_p_min(mut self, p_min: f64) -> Self {
        self.p_min = Some(p_min);
        self
    }

    pub fn with_sup_factor(mut self, factor: f64) -> Self {
        self.sup_factor = Some(factor);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return bad(format!("B must be positive, got {}", self.bound));
        }
        let need_p_min = |name: &str| -> Result<()> {
            match self.p_min {
                Some(p) if p > 0.0 && p <= 1.0 => Ok(()),
                Some(p) => Err(Error::InvalidSpec(format!("{name} needs p_min in (0, 1], got {p}"))),
                None => Err(Error::InvalidSpec(format!("{name} needs p_min"))),
            }
        };
        match self.theorem {
            BoundTheorem::Huber { delta } => {
                if !(delta > 0.0 && delta.is_finite()) {
                    return bad(format!("delta must be positive, got {delta}"));
                }
                need_p_min("huber")
            }
            BoundTheorem::SqEps { eps } => {
                if !(eps > 0.0 && eps.is_finite()) {
                    return bad(format!("eps must be positive, got {eps}"));
                }
                need_p_min("sqeps")
            }
            BoundTheorem::LpLow { p } if !(p > 1.0 && p <= 2.0) => bad(format!("lp_low needs 1 < p <= 2, got {p}")),
            BoundTheorem::LpHigh { p } if !(p >= 2.0 && p.is_finite()) => bad(format!("lp_high needs p >= 2, got {p}")),
            BoundTheorem::L1 => match self.sup_factor {
                Some(f) if !(f >= 0.0 && f.is_finite()) => bad(format!("sup_factor must be finite and >= 0, got {f}")),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Slope of the transform when it is linear, `None` for the power case.
    pub fn linear_factor(&self) -> Option<f64> {
        let b = self.bound;
        match self.theorem {
            BoundTheorem::Huber { delta } => Some((2.0 * b / delta).max(2.0) / self.p_min.unwrap_or(f64::NAN)),
            BoundTheorem::LpLow { p } => Some(2.0 / ((8.0 * b).powf(p - 2.0) * p * (p - 1.0))),
            BoundTheorem::LpHigh { .. } => None,
            BoundTheorem::L1 => Some(self.sup_factor.unwrap_or(4.0 * b)),
            BoundTheorem::SqEps { .. } => Some(1.0 / (2.0 * self.p_min.unwrap_or(f64::NAN))),
        }
    }

    /// Short identifier of the transform, e.g. `linear(4)` or `power(0.5)`.
    pub fn gamma_id(&self) -> String {
        match (self.theorem, self.linear_factor()) {
            (BoundTheorem::LpHigh { p }, _) => format!("power({:?})", 2.0 / p),
            (_, Some(c)) => format!("linear({c:?})"),
            _ => unreachable!(),
        }
    }

    fn apply(&self, t: f64) -> f64 {
        match self.theorem {
            BoundTheorem::LpHigh { p } => {
                if t == 0.0 {
                    0.0
                } else {
                    t.powf(2.0 / p)
                }
            }
            _ => self.linear_factor().expect("linear transform") * t,
        }
    }
}

pub fn gamma_transform(spec: &BoundSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(t >= 0.0) {
        return Err(Error::InvalidSpec(format!("transform argument must be >= 0, got {t}")));
    }
    Ok(spec.apply(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComponents {
    pub target_estimation_error: f64,
    pub target_gap: f64,
    pub surrogate_estimation_error: f64,
    pub surrogate_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub surrogate: LossKind,
    pub class: String,
    pub gamma: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub components: BoundComponents,
}

impl BoundReport {
    fn new(surrogate: LossKind, class: &HypothesisClass, gamma: String, lhs: f64, rhs: f64, components: BoundComponents) -> Self {
        let slack = rhs - lhs;
        BoundReport {
            surrogate,
            class: class.name().to_string(),
            gamma,
            lhs,
            rhs,
            slack,
            holds: slack >= -SLACK_TOL,
            components,
        }
    }
}

/// `max_{x, y in support} |h(x) - y| + |mu(x) - y|`.
pub fn l1_sup_factor(dist: &FiniteDistribution, h: &Hypothesis) -> Result<f64> {
    let mut best = 0.0f64;
    for p in dist.points() {
        best = best.max(l1_spread(p, h.get(&p.id)?));
    }
    Ok(best)
}

fn l1_spread(point: &InputPoint, prediction: f64) -> f64 {
    let mu = point.cond.mean();
    point
        .cond
        .atoms()
        .iter()
        .map(|a| (prediction - a.label).abs() + (mu - a.label).abs())
        .fold(0.0, f64::max)
}

fn require_p_min(dist: &FiniteDistribution, mode: MassMode) -> Result<f64> {
    let p = p_min(dist, mode);
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::BoundInapplicable(format!("p_min is 0 for {mode:?}")))
    }
}

/// Builds the bound specification that applies to `surrogate` on `dist`.
///
/// `sup_factor` is only used for the l1 loss; `None` selects the coarse `4B`.
pub fn spec_for(surrogate: LossKind, dist: &FiniteDistribution, bound: f64, sup_factor: Option<f64>) -> Result<BoundSpec> {
    surrogate.validate()?;
    let spec = match surrogate {
        LossKind::Squared => BoundSpec::new(BoundTheorem::LpHigh { p: 2.0 }, bound),
        LossKind::Lp { p: 1.0 } => {
            let spec = BoundSpec::new(BoundTheorem::L1, bound);
            match sup_factor {
                Some(f) => spec.with_sup_factor(f),
                None => spec,
            }
        }
        LossKind::Lp { p } if p < 2.0 => BoundSpec::new(BoundTheorem::LpLow { p }, bound),
        LossKind::Lp { p } => BoundSpec::new(BoundTheorem::LpHigh { p }, bound),
        LossKind::Huber { delta } => BoundSpec::new(BoundTheorem::Huber { delta }, bound)
            .with_p_min(require_p_min(dist, MassMode::HuberWindow { delta })?),
        LossKind::SqEpsInsensitive { eps } => {
            BoundSpec::new(BoundTheorem::SqEps { eps }, bound).with_p_min(require_p_min(dist, MassMode::EpsTail { eps })?)
        }
        LossKind::EpsInsensitive { .. } => {
            return Err(Error::BoundInapplicable(
                "the eps-insensitive loss admits no consistency bound for the squared loss".into(),
            ))
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Estimation error plus gap for one loss, with the components.
///
/// The sum `E(h) - E*(H) + M(H)` telescopes to `E(h) - E_x[C*(x)]`; the total
/// is taken from that identity so minimizer error in `E*(H)` cancels exactly.
struct Totals {
    components: BoundComponents,
    target_total: f64,
    surrogate_total: f64,
}

fn totals(dist: &FiniteDistribution, class: &HypothesisClass, h: &Hypothesis, surrogate: LossKind) -> Result<Totals> {
    let split = |kind: LossKind| -> Result<(f64, f64, f64)> {
        let err = generalization_error(kind, h, dist)?;
        let best_pointwise = expected_best_conditional_error(kind, dist)?;
        let estimation = clamp_nonnegative(err - best_in_class_error(kind, class, dist), "estimation error")?;
        let total = clamp_nonnegative(err - best_pointwise, "estimation error plus gap")?;
        Ok((estimation, minimizability_gap(kind, class, dist)?, total))
    };
    let (te, tg, target_total) = split(LossKind::Squared)?;
    let (se, sg, surrogate_total) = split(surrogate)?;
    Ok(Totals {
        components: BoundComponents {
            target_estimation_error: te,
            target_gap: tg,
            surrogate_estimation_error: se,
            surrogate_gap: sg,
        },
        target_total,
        surrogate_total,
    })
}

fn check_instance_inputs(dist: &FiniteDistribution, class: &HypothesisClass, h: &Hypothesis) -> Result<f64> {
    class.validate()?;
    dist.check_symmetric(SYMMETRY_TOL)?;
    h.check_bounded(dist, class.bound())?;
    Ok(class.bound().max(dist.bound()))
}

/// Checks `E2(h) - E2* + M2 <= Gamma(EL(h) - EL* + ML)` for one hypothesis.
pub fn verify_bound_instance(
    dist: &FiniteDistribution,
    class: &HypothesisClass,
    h: &Hypothesis,
    surrogate: LossKind,
) -> Result<BoundReport> {
    let bound = check_instance_inputs(dist, class, h)?;
    let factor = match surrogate {
        LossKind::Lp { p: 1.0 } => Some(l1_sup_factor(dist, h)?),
        _ => None,
    };
    let spec = spec_for(surrogate, dist, bound, factor)?;
    let t = totals(dist, class, h, surrogate)?;
    let rhs = spec.apply(t.surrogate_total);
    Ok(BoundReport::new(surrogate, class, spec.gamma_id(), t.target_total, rhs, t.components))
}

/// Closed registry of transforms usable with [`check_general_theorem`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum TransformFn {
    Identity,
    Linear(f64),
    Power(f64),
}

impl TransformFn {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TransformFn::Identity => t,
            TransformFn::Linear(c) => c * t,
            TransformFn::Power(r) => {
                if t == 0.0 {
                    0.0
                } else {
                    t.powf(r)
                }
            }
        }
    }

    fn is_convex(&self) -> bool {
        !matches!(*self, TransformFn::Power(r) if r < 1.0)
    }

    fn is_concave(&self) -> bool {
        !matches!(*self, TransformFn::Power(r) if r > 1.0)
    }

    fn id(&self) -> String {
        match self {
            TransformFn::Identity => "identity".into(),
            TransformFn::Linear(c) => format!("linear({c:?})"),
            TransformFn::Power(r) => format!("power({r:?})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "fn", rename_all = "snake_case")]
pub enum GeneralTransform {
    /// `Psi([dC2]_eps) <= alpha * dC1` per input.
    Convex(TransformFn),
    /// `[dC2]_eps <= Gamma(alpha * dC1)` per input.
    Concave(TransformFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    One,
    /// `1 / P(0 <= mu - y <= delta | x)`, delta taken from a Huber surrogate.
    HuberWindow,
    /// `1 / P(mu - y >= eps | x)`, eps taken from a squared eps-insensitive surrogate.
    EpsTail,
    /// `max_y |h(x) - y| + |mu(x) - y|`.
    L1Spread,
}

fn alpha_at(mode: AlphaMode, surrogate: LossKind, point: &InputPoint, prediction: f64) -> Result<f64> {
    let inverse_mass = |mass: f64| {
        if mass > 0.0 {
            Ok(1.0 / mass)
        } else {
            Err(Error::BoundInapplicable(format!("zero {mode:?} mass at input {}", point.id)))
        }
    };
    match (mode, surrogate) {
        (AlphaMode::One, _) => Ok(1.0),
        (AlphaMode::HuberWindow, LossKind::Huber { delta }) => inverse_mass(point.cond.huber_window_mass(delta)),
        (AlphaMode::EpsTail, LossKind::SqEpsInsensitive { eps }) => inverse_mass(point.cond.eps_tail_mass(eps)),
        (AlphaMode::L1Spread, _) => Ok(l1_spread(point, prediction)),
        _ => Err(Error::InvalidSpec(format!("alpha mode {mode:?} does not fit surrogate {surrogate}"))),
    }
}

/// Checks the generic bound template with the squared loss as target.
///
/// The per-input premise is verified first (within [`PREMISE_TOL`]); if it
/// fails at some input the result is [`Error::PremiseFailed`].
pub fn check_general_theorem(
    dist: &FiniteDistribution,
    class: &HypothesisClass,
    h: &Hypothesis,
    surrogate: LossKind,
    transform: GeneralTransform,
    alpha_mode: AlphaMode,
    eps: f64,
) -> Result<BoundReport> {
    surrogate.validate()?;
    check_instance_inputs(dist, class, h)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidSpec(format!("eps must be finite and >= 0, got {eps}")));
    }
    let f = match transform {
        GeneralTransform::Convex(f) if f.is_convex() => f,
        GeneralTransform::Concave(f) if f.is_concave() => f,
        _ => return Err(Error::InvalidSpec(format!("{transform:?} has the wrong curvature"))),
    };
    if let TransformFn::Linear(c) = f {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidSpec(format!("linear transform needs a positive slope, got {c}")));
        }
    }

    let mut sup_alpha = 0.0f64;
    for point in dist.points() {
        let v = h.get(&point.id)?;
        let alpha = alpha_at(alpha_mode, surrogate, point, v)?;
        sup_alpha = sup_alpha.max(alpha);
        let regret = |kind: LossKind| -> Result<f64> {
            let best = best_conditional_error(kind, &point.cond, BestMethod::ClosedForm)?;
            clamp_nonnegative(conditional_error(kind, v, &point.cond) - best, "conditional regret")
        };
        let target = clipped_regret(regret(LossKind::Squared)?, eps);
        let surr = regret(surrogate)?;
        let (lhs, rhs) = match transform {
            GeneralTransform::Convex(_) => (f.eval(target), alpha * surr),
            GeneralTransform::Concave(_) => (target, f.eval(alpha * surr)),
        };
        if lhs > rhs + PREMISE_TOL {
            return Err(Error::PremiseFailed {
                input: point.id.clone(),
                detail: format!("{lhs} > {rhs} (transform {}, alpha {alpha})", f.id()),
            });
        }
    }

    let Totals {
        components: c,
        target_total,
        surrogate_total,
    } = totals(dist, class, h, surrogate)?;
    let (lhs, rhs) = match transform {
        GeneralTransform::Convex(_) => (
            f.eval(target_total),
            sup_alpha * surrogate_total + f.eval(0.0).max(f.eval(eps)),
        ),
        GeneralTransform::Concave(_) => (target_total, f.eval(sup_alpha * surrogate_total) + eps),
    };
    let id = match transform {
        GeneralTransform::Convex(_) => format!("convex:{}", f.id()),
        GeneralTransform::Concave(_) => format!("concave:{}", f.id()),
    };
    Ok(BoundReport::new(surrogate, class, id, lhs, rhs, c))
}

/// The generic-template instantiation that reproduces [`verify_bound_instance`]
/// for `surrogate` (concave form, sup over inputs of the per-input alpha).
pub fn matching_instantiation(surrogate: LossKind, bound: f64) -> Result<(GeneralTransform, AlphaMode)> {
    surrogate.validate()?;
    let concave = GeneralTransform::Concave;
    Ok(match surrogate {
        LossKind::Squared => (concave(TransformFn::Identity), AlphaMode::One),
        LossKind::Lp { p: 1.0 } => (concave(TransformFn::Identity), AlphaMode::L1Spread),
        LossKind::Lp { p } if p < 2.0 => (
            concave(TransformFn::Linear(2.0 / ((8.0 * bound).powf(p - 2.0) * p * (p - 1.0)))),
            AlphaMode::One,
        ),
        LossKind::Lp { p } => (concave(TransformFn::Power(2.0 / p)), AlphaMode::One),
        LossKind::Huber { delta } => (
            concave(TransformFn::Linear((2.0 * bound / delta).max(2.0))),
            AlphaMode::HuberWindow,
        ),
        LossKind::SqEpsInsensitive { .. } => (concave(TransformFn::Linear(0.5)), AlphaMode::EpsTail),
        LossKind::EpsInsensitive { .. } => {
            return Err(Error::BoundInapplicable(
                "the eps-insensitive loss admits no consistency bound for the squared loss".into(),
            ))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningBoundReport {
    pub rhs_value: f64,
    /// Mesh lower bound of the empirical Rademacher complexity, averaged over trials.
    pub rademacher_estimate: f64,
    pub gamma: String,
    pub loss_upper_bound: f64,
    pub surrogate_gap: f64,
    pub target_gap: f64,
    pub m: usize,
    pub trials: usize,
}

/// Number of sign vectors per trial; drawn as antithetic pairs.
const SIGMA_PAIRS: usize = 16;

/// Evaluates `Gamma(ML + 4 R + 2 BL sqrt(log(2/delta) / 2m)) - M2` with a
/// Monte-Carlo estimate of the empirical Rademacher complexity.
pub fn evaluate_learning_bound(
    surrogate: LossKind,
    dist: &FiniteDistribution,
    class: &HypothesisClass,
    m: usize,
    delta_conf: f64,
    seed: u64,
    trials: usize,
) -> Result<LearningBoundReport> {
    class.validate()?;
    dist.check_symmetric(SYMMETRY_TOL)?;
    if m == 0 || trials == 0 {
        return Err(Error::InvalidParams("m and trials must be >= 1".into()));
    }
    if !(delta_conf > 0.0 && delta_conf < 1.0) {
        return Err(Error::InvalidParams(format!("confidence delta must be in (0, 1), got {delta_conf}")));
    }
    let bound = class.bound().max(dist.bound());
    let spec = spec_for(surrogate, dist, bound, None)?;
    let loss_bound = surrogate.upper_bound(bound);

    let mesh = class.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input_index = WeightedIndex::new(dist.points().iter().map(|p| p.weight))
        .map_err(|e| Error::Inconsistent(format!("input weights: {e}")))?;
    let label_index: Vec<WeightedIndex<f64>> = dist
        .points()
        .iter()
        .map(|p| WeightedIndex::new(p.cond.atoms().iter().map(|a| a.mass)))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Inconsistent(format!("atom masses: {e}")))?;

    let mut total = 0.0;
    for _ in 0..trials {
        let sample: Vec<(usize, f64)> = (0..m)
            .map(|_| {
                let i = input_index.sample(&mut rng);
                let j = label_index[i].sample(&mut rng);
                (i, dist.points()[i].cond.atoms()[j].label)
            })
            .collect();
        // losses[k][i] = L(mesh[k], y_i)
        let losses: Vec<Vec<f64>> = mesh
            .iter()
            .map(|&v| sample.iter().map(|&(_, y)| surrogate.value(v, y)).collect())
            .collect();
        let mut trial_sum = 0.0;
        for _ in 0..SIGMA_PAIRS {
            let sigma: Vec<f64> = (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            for sign in [1.0, -1.0] {
                trial_sum += mesh_sup(class, dist.points().len(), &sample, &losses, &sigma, sign) / m as f64;
            }
        }
        total += trial_sum / (2 * SIGMA_PAIRS) as f64;
    }
    let estimate = (total / trials as f64).max(0.0);

    let surrogate_gap = minimizability_gap(surrogate, class, dist)?;
    let target_gap = minimizability_gap(LossKind::Squared, class, dist)?;
    let deviation = 2.0 * loss_bound * ((2.0 / delta_conf).ln() / (2.0 * m as f64)).sqrt();
    let rhs_value = spec.apply(surrogate_gap + 4.0 * estimate + deviation) - target_gap;
    Ok(LearningBoundReport {
        rhs_value,
        rademacher_estimate: estimate,
        gamma: spec.gamma_id(),
        loss_upper_bound: loss_bound,
        surrogate_gap,
        target_gap,
        m,
        trials,
    })
}

/// `sup_h sum_i sign * sigma_i L(h(x_i), y_i)` over the mesh hypotheses.
fn mesh_sup(
    class: &HypothesisClass,
    n_inputs: usize,
    sample: &[(usize, f64)],
    losses: &[Vec<f64>],
    sigma: &[f64],
    sign: f64,
) -> f64 {
    match class {
        HypothesisClass::ConstantBounded { .. } => losses
            .iter()
            .map(|row| row.iter().zip(sigma).map(|(l, s)| sign * s * l).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max),
        HypothesisClass::AllBounded { .. } => {
            // The value at each input is chosen independently.
            let mut per_input = vec![vec![0.0; losses.len()]; n_inputs];
            for (k, row) in losses.iter().enumerate() {
                for (i, &(x, _)) in sample.iter().enumerate() {
                    per_input[x][k] += sign * sigma[i] * row[i];
                }
            }
            per_input
                .iter()
                .map(|sums| sums.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .sum()
        }
    }
}
