//! Seeded fuzzing of the consistency bounds over random symmetric
//! distributions and bounded hypotheses.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{check_general_theorem, matching_instantiation, verify_bound_instance, BoundReport};
use crate::conditional::{Hypothesis, HypothesisClass};
use crate::distributions::{random_symmetric_distribution, FiniteDistribution, GeneratorConfig};
use crate::error::{Error, Result};
use crate::losses::LossKind;

/// Mesh size of the fuzzed classes; only the learning bound reads it.
const CLASS_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    AllBounded,
    Constant,
}

impl ClassKind {
    pub fn build(&self, bound: f64) -> Result<HypothesisClass> {
        match self {
            ClassKind::AllBounded => HypothesisClass::all_bounded(bound, CLASS_GRID),
            ClassKind::Constant => HypothesisClass::constant_bounded(bound, CLASS_GRID),
        }
    }
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassKind::AllBounded => "allbounded",
            ClassKind::Constant => "constant",
        })
    }
}

impl FromStr for ClassKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "allbounded" => Ok(ClassKind::AllBounded),
            "constant" => Ok(ClassKind::Constant),
            other => Err(Error::InvalidClass(format!("unknown class {other:?}; expected allbounded or constant"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub seed: u64,
    pub distributions: usize,
    pub hypotheses: usize,
    pub max_inputs: usize,
    pub max_atoms: usize,
    pub bound_range: (f64, f64),
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seed: 0,
            distributions: 200,
            hypotheses: 50,
            max_inputs: 5,
            max_atoms: 7,
            bound_range: (0.5, 2.0),
        }
    }
}

fn mix(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

/// The `index`-th distribution of the fuzz stream.
pub fn fuzz_distribution(cfg: &FuzzConfig, index: usize) -> FiniteDistribution {
    let seed = mix(cfg.seed, index as u64);
    let (lo, hi) = cfg.bound_range;
    let bound = if hi > lo { ChaCha8Rng::seed_from_u64(seed).gen_range(lo..=hi) } else { lo };
    random_symmetric_distribution(
        seed ^ 0x5555,
        &GeneratorConfig {
            max_inputs: cfg.max_inputs,
            max_atoms: cfg.max_atoms,
            bound,
        },
    )
}

/// Members of `class` on `dist`: the first is the conditional mean (or the
/// constant 0), the rest are uniform on `[-B, B]`, with every fifth one
/// pinned to an endpoint.
pub fn fuzz_hypotheses(dist: &FiniteDistribution, class: &HypothesisClass, seed: u64, n: usize) -> Vec<Hypothesis> {
    let b = class.bound();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |k: usize| -> f64 {
        if k % 5 == 4 {
            if rng.gen_bool(0.5) {
                b
            } else {
                -b
            }
        } else {
            rng.gen_range(-b..=b)
        }
    };
    (0..n)
        .map(|k| match class {
            HypothesisClass::AllBounded { .. } => {
                if k == 0 {
                    Hypothesis::new(dist.points().iter().map(|p| (p.id.clone(), p.cond.mean().clamp(-b, b))))
                } else {
                    Hypothesis::new(dist.points().iter().map(|p| (p.id.clone(), draw(k))))
                }
            }
            HypothesisClass::ConstantBounded { .. } => Hypothesis::constant(dist, if k == 0 { 0.0 } else { draw(k) }),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzRecord {
    pub distribution: usize,
    pub hypothesis: usize,
    #[serde(flatten)]
    pub report: BoundReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub checked: usize,
    pub held: usize,
    /// Instances whose bound does not apply (zero `p_min`).
    pub skipped: usize,
    pub min_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzOutcome {
    pub reports: Vec<FuzzRecord>,
    pub summary: FuzzSummary,
}

impl FuzzOutcome {
    fn from_parts(parts: Vec<(Vec<FuzzRecord>, usize)>) -> Self {
        let mut reports = Vec::new();
        let mut skipped = 0;
        for (r, s) in parts {
            reports.extend(r);
            skipped += s;
        }
        let held = reports.iter().filter(|r| r.report.holds).count();
        let min_slack = reports.iter().map(|r| r.report.slack).fold(f64::INFINITY, f64::min);
        FuzzOutcome {
            summary: FuzzSummary {
                checked: reports.len(),
                held,
                skipped,
                min_slack,
            },
            reports,
        }
    }

    pub fn violations(&self) -> impl Iterator<Item = &FuzzRecord> {
        self.reports.iter().filter(|r| !r.report.holds)
    }
}

fn verify_distribution(
    dist: &FiniteDistribution,
    index: usize,
    cfg: &FuzzConfig,
    classes: &[ClassKind],
    surrogates: &[LossKind],
) -> Result<(Vec<FuzzRecord>, usize)> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for (ci, kind) in classes.iter().enumerate() {
        let class = kind.build(dist.bound())?;
        let hs = fuzz_hypotheses(dist, &class, mix(cfg.seed ^ 0xABCD, (index * 8 + ci) as u64), cfg.hypotheses);
        for &surrogate in surrogates {
            for (hi, h) in hs.iter().enumerate() {
                match verify_bound_instance(dist, &class, h, surrogate) {
                    Ok(report) => records.push(FuzzRecord {
                        distribution: index,
                        hypothesis: hi,
                        report,
                    }),
                    Err(Error::BoundInapplicable(_)) => {
                        skipped += hs.len() - hi;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok((records, skipped))
}

/// Verifies every (distribution, class, surrogate, hypothesis) combination of
/// the fuzz stream. Distributions run in parallel; records come back in
/// stream order.
pub fn run_bound_fuzz(cfg: &FuzzConfig, classes: &[ClassKind], surrogates: &[LossKind]) -> Result<FuzzOutcome> {
    let parts = (0..cfg.distributions)
        .into_par_iter()
        .map(|i| verify_distribution(&fuzz_distribution(cfg, i), i, cfg, classes, surrogates))
        .collect::<Result<Vec<_>>>()?;
    Ok(FuzzOutcome::from_parts(parts))
}

/// Same as [`run_bound_fuzz`] over one fixed distribution.
pub fn run_bound_check(
    dist: &FiniteDistribution,
    cfg: &FuzzConfig,
    classes: &[ClassKind],
    surrogates: &[LossKind],
) -> Result<FuzzOutcome> {
    Ok(FuzzOutcome::from_parts(vec![verify_distribution(dist, 0, cfg, classes, surrogates)?]))
}

/// Agreement between the generic template and the per-instance check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckSummary {
    pub compared: usize,
    pub agreed: usize,
    /// Instances where the per-input premise of the template fails.
    pub premise_failed: usize,
    pub skipped: usize,
    pub max_lhs_diff: f64,
    pub max_rhs_diff: f64,
}

/// Runs both checkers on the fuzz stream at each `eps`. The template's rhs
/// carries an extra `+ eps`, which is subtracted before comparing.
pub fn run_general_crosscheck(
    cfg: &FuzzConfig,
    classes: &[ClassKind],
    surrogates: &[LossKind],
    eps_values: &[f64],
    tol: f64,
) -> Result<CrossCheckSummary> {
    let parts = (0..cfg.distributions)
        .into_par_iter()
        .map(|i| -> Result<CrossCheckSummary> {
            let dist = fuzz_distribution(cfg, i);
            let mut s = CrossCheckSummary {
                compared: 0,
                agreed: 0,
                premise_failed: 0,
                skipped: 0,
                max_lhs_diff: 0.0,
                max_rhs_diff: 0.0,
            };
            for (ci, kind) in classes.iter().enumerate() {
                let class = kind.build(dist.bound())?;
                let hs = fuzz_hypotheses(&dist, &class, mix(cfg.seed ^ 0xABCD, (i * 8 + ci) as u64), cfg.hypotheses);
                for &surrogate in surrogates {
                    let (transform, alpha) = matching_instantiation(surrogate, dist.bound())?;
                    for h in &hs {
                        let direct = match verify_bound_instance(&dist, &class, h, surrogate) {
                            Ok(r) => r,
                            Err(Error::BoundInapplicable(_)) => {
                                s.skipped += eps_values.len();
                                continue;
                            }
                            Err(e) => return Err(e),
                        };
                        for &eps in eps_values {
                            match check_general_theorem(&dist, &class, h, surrogate, transform, alpha, eps) {
                                Ok(g) => {
                                    let dl = (g.lhs - direct.lhs).abs();
                                    let dr = (g.rhs - eps - direct.rhs).abs();
                                    s.compared += 1;
                                    s.max_lhs_diff = s.max_lhs_diff.max(dl);
                                    s.max_rhs_diff = s.max_rhs_diff.max(dr);
                                    if dl <= tol && dr <= tol {
                                        s.agreed += 1;
                                    }
                                }
                                Err(Error::PremiseFailed { .. }) => s.premise_failed += 1,
                                Err(Error::BoundInapplicable(_)) => s.skipped += 1,
                                Err(e) => return Err(e),
                            }
                        }
                    }
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().fold(
        CrossCheckSummary {
            compared: 0,
            agreed: 0,
            premise_failed: 0,
            skipped: 0,
            max_lhs_diff: 0.0,
            max_rhs_diff: 0.0,
        },
        |a, b| CrossCheckSummary {
            compared: a.compared + b.compared,
            agreed: a.agreed + b.agreed,
            premise_failed: a.premise_failed + b.premise_failed,
            skipped: a.skipped + b.skipped,
            max_lhs_diff: a.max_lhs_diff.max(b.max_lhs_diff),
            max_rhs_diff: a.max_rhs_diff.max(b.max_rhs_diff),
        },
    ))
}
