//! Finite-support conditional label distributions.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total mass and on symmetry matching.
pub const MASS_TOL: f64 = 1e-12;

/// Default tolerance for mirrored labels and masses in [`check_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Slack applied at the edges of the p_min windows so that atoms sitting on
/// a boundary are not lost to rounding of the conditional mean.
const WINDOW_TOL: f64 = 1e-12;

/// A single support point of a conditional law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub label: f64,
    pub mass: f64,
}

/// Conditional distribution of the label at one input, with finite support
/// inside `[-bound, bound]`. Atoms are kept sorted by label.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    atoms: Vec<Atom>,
    bound: f64,
}

impl Conditional {
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>, bound: f64) -> Result<Self> {
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|(label, mass)| Atom { label, mass })
            .collect();
        Self::from_atoms(atoms, bound, "cond")
    }

    fn from_atoms(mut atoms: Vec<Atom>, bound: f64, path: &str) -> Result<Self> {
        let fail = |at: String, reason: String| Error::InvalidDistribution { path: at, reason };
        if !(bound.is_finite() && bound > 0.0) {
            return Err(fail("B".into(), format!("bound must be positive, got {bound}")));
        }
        if atoms.is_empty() {
            return Err(fail(path.into(), "conditional has no atoms".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !a.label.is_finite() || a.label.abs() > bound {
                return Err(fail(
                    format!("{path}[{i}]"),
                    format!("label {} outside [-{bound}, {bound}]", a.label),
                ));
            }
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return Err(fail(
                    format!("{path}[{i}]"),
                    format!("mass must be positive, got {}", a.mass),
                ));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(fail(path.into(), format!("masses sum to {total}, expected 1")));
        }
        atoms.sort_by(|a, b| a.label.total_cmp(&b.label));
        if let Some(w) = atoms.windows(2).find(|w| w[0].label == w[1].label) {
            return Err(fail(path.into(), format!("duplicate label {}", w[0].label)));
        }
        Ok(Conditional { atoms, bound })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass * a.label).sum()
    }

    /// Probability of `lo <= mu - y <= hi`, where `mu` is the conditional mean.
    fn mass_where_gap_in(&self, lo: f64, hi: f64) -> f64 {
        let mu = self.mean();
        self.atoms
            .iter()
            .filter(|a| {
                let gap = mu - a.label;
                gap >= lo - WINDOW_TOL && gap <= hi + WINDOW_TOL
            })
            .map(|a| a.mass)
            .sum()
    }

    /// `P(0 <= mu - y <= delta)`.
    pub fn huber_window_mass(&self, delta: f64) -> f64 {
        self.mass_where_gap_in(0.0, delta)
    }

    /// `P(mu - y >= eps)`.
    pub fn eps_tail_mass(&self, eps: f64) -> f64 {
        self.mass_where_gap_in(eps, f64::INFINITY)
    }
}

pub fn conditional_mean(cond: &Conditional) -> f64 {
    cond.mean()
}

/// Returns the symmetry center if every atom has a mirror image about the
/// conditional mean with matching mass (both up to `tol`).
pub fn check_symmetric(cond: &Conditional, tol: f64) -> Result<f64> {
    let center = cond.mean();
    for a in cond.atoms() {
        let target = 2.0 * center - a.label;
        let mirrored = cond
            .atoms()
            .iter()
            .any(|b| (b.label - target).abs() <= tol && (b.mass - a.mass).abs() <= tol);
        if !mirrored {
            return Err(Error::SymmetryViolation { label: a.label });
        }
    }
    Ok(center)
}

/// One support point of a joint finite distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPoint {
    pub id: String,
    pub weight: f64,
    pub cond: Conditional,
}

/// Distribution over inputs (with positive weights) and their conditionals.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    points: Vec<InputPoint>,
    bound: f64,
}

impl FiniteDistribution {
    pub fn new(points: Vec<InputPoint>, bound: f64) -> Result<Self> {
        let fail = |path: String, reason: String| Error::InvalidDistribution { path, reason };
        if !(bound.is_finite() && bound > 0.0) {
            return Err(fail("B".into(), format!("bound must be positive, got {bound}")));
        }
        if points.is_empty() {
            return Err(fail("points".into(), "no inputs".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return Err(fail(
                    format!("points[{i}].weight"),
                    format!("weight must be positive, got {}", p.weight),
                ));
            }
            if p.cond.bound() != bound {
                return Err(fail(
                    format!("points[{i}].cond"),
                    format!("bound {} differs from distribution bound {bound}", p.cond.bound()),
                ));
            }
            if points[..i].iter().any(|q| q.id == p.id) {
                return Err(fail(format!("points[{i}].id"), format!("duplicate id `{}`", p.id)));
            }
        }
        let total: f64 = points.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(fail("points".into(), format!("weights sum to {total}, expected 1")));
        }
        Ok(FiniteDistribution { points, bound })
    }

    /// Single-input distribution.
    pub fn single(cond: Conditional) -> Self {
        let bound = cond.bound();
        FiniteDistribution {
            points: vec![InputPoint {
                id: "x0".into(),
                weight: 1.0,
                cond,
            }],
            bound,
        }
    }

    pub fn points(&self) -> &[InputPoint] {
        &self.points
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Checks every conditional; returns the first asymmetric input.
    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        for p in &self.points {
            check_symmetric(&p.cond, tol).map_err(|e| match e {
                Error::SymmetryViolation { label } => Error::NotSymmetric {
                    input: p.id.clone(),
                    label,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawDistribution = serde_json::from_str(s)?;
        raw.into_distribution()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        RawDistribution::from(self).to_value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MassMode {
    HuberWindow { delta: f64 },
    EpsTail { eps: f64 },
}

/// Smallest per-input mass of the window/tail event; 0 means the
/// corresponding bound does not apply.
pub fn p_min(dist: &FiniteDistribution, mode: MassMode) -> f64 {
    dist.points()
        .iter()
        .map(|p| match mode {
            MassMode::HuberWindow { delta } => p.cond.huber_window_mass(delta),
            MassMode::EpsTail { eps } => p.cond.eps_tail_mass(eps),
        })
        .fold(f64::INFINITY, f64::min)
        .clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub max_inputs: usize,
    pub max_atoms: usize,
    #[serde(rename = "B")]
    pub bound: f64,
}

/// Draws a symmetric distribution, deterministically in `seed`.
///
/// Each conditional gets a center in `[-B/2, B/2]`, mirrored pairs with equal
/// mass, and an atom at the center when the atom count is odd. The atom count
/// is drawn from `[min(2, max_atoms), max_atoms]`.
pub fn random_symmetric_distribution(seed: u64, cfg: &GeneratorConfig) -> FiniteDistribution {
    assert!(cfg.max_inputs >= 1 && cfg.max_atoms >= 1, "generator limits must be >= 1");
    assert!(cfg.bound > 0.0, "generator bound must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = cfg.bound;
    let n_inputs = rng.gen_range(1..=cfg.max_inputs);

    let raw_weights: Vec<f64> = (0..n_inputs).map(|_| rng.gen_range(0.1..1.0)).collect();
    let wsum: f64 = raw_weights.iter().sum();

    let points = raw_weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let cond = random_symmetric_conditional(&mut rng, cfg.max_atoms, b);
            InputPoint {
                id: format!("x{i}"),
                weight: w / wsum,
                cond,
            }
        })
        .collect();
    FiniteDistribution { points, bound: b }
}

fn random_symmetric_conditional(rng: &mut ChaCha8Rng, max_atoms: usize, b: f64) -> Conditional {
    let k = rng.gen_range(max_atoms.min(2)..=max_atoms);
    let n_pairs = k / 2;
    let with_center = k % 2 == 1;
    let center = rng.gen_range(-0.5..=0.5) * b;
    let reach = (b - center.abs()) * (1.0 - 1e-12);

    let mut offsets: Vec<f64> = Vec::with_capacity(n_pairs);
    while offsets.len() < n_pairs {
        // (0, 1]
        let a = (1.0 - rng.gen::<f64>()) * reach;
        if offsets.iter().all(|o| (o - a).abs() > 1e-9) {
            offsets.push(a);
        }
    }
    let pair_raw: Vec<f64> = (0..n_pairs).map(|_| rng.gen_range(0.1..1.0)).collect();
    let center_raw = if with_center { rng.gen_range(0.1..1.0) } else { 0.0 };
    let total = 2.0 * pair_raw.iter().sum::<f64>() + center_raw;

    let mut atoms = Vec::with_capacity(k);
    for (a, r) in offsets.iter().zip(&pair_raw) {
        let m = r / total;
        atoms.push(Atom { label: center - a, mass: m });
        atoms.push(Atom { label: center + a, mass: m });
    }
    if with_center {
        atoms.push(Atom {
            label: center,
            mass: center_raw / total,
        });
    }
    atoms.sort_by(|x, y| x.label.total_cmp(&y.label));
    Conditional { atoms, bound: b }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDistribution {
    #[serde(rename = "B")]
    bound: f64,
    points: Vec<RawPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPoint {
    id: String,
    weight: f64,
    cond: Vec<(f64, f64)>,
}

impl RawDistribution {
    fn into_distribution(self) -> Result<FiniteDistribution> {
        let bound = self.bound;
        let mut points = Vec::with_capacity(self.points.len());
        for (i, p) in self.points.into_iter().enumerate() {
            let atoms = p
                .cond
                .into_iter()
                .map(|(label, mass)| Atom { label, mass })
                .collect();
            let cond = Conditional::from_atoms(atoms, bound, &format!("points[{i}].cond"))?;
            points.push(InputPoint {
                id: p.id,
                weight: p.weight,
                cond,
            });
        }
        FiniteDistribution::new(points, bound)
    }

    fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("distribution serializes")
    }
}

impl From<&FiniteDistribution> for RawDistribution {
    fn from(d: &FiniteDistribution) -> Self {
        RawDistribution {
            bound: d.bound,
            points: d
                .points
                .iter()
                .map(|p| RawPoint {
                    id: p.id.clone(),
                    weight: p.weight,
                    cond: p.cond.atoms.iter().map(|a| (a.label, a.mass)).collect(),
                })
                .collect(),
        }
    }
}
