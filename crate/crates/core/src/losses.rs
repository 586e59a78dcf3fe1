//! Pointwise regression losses.
//!
//! Every loss here is distance based: `L(y', y) = psi(y' - y)` for a symmetric,
//! non-negative, convex `psi` with `psi(0) = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A regression loss and its parameters.
///
/// Use the checked constructors (or [`FromStr`]) to build values; they enforce
/// `p >= 1`, `delta > 0` and `eps > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LossKind {
    Squared,
    Lp { p: f64 },
    Huber { delta: f64 },
    EpsInsensitive { eps: f64 },
    SqEpsInsensitive { eps: f64 },
}

impl LossKind {
    pub fn lp(p: f64) -> Result<Self> {
        LossKind::Lp { p }.validated()
    }

    pub fn huber(delta: f64) -> Result<Self> {
        LossKind::Huber { delta }.validated()
    }

    pub fn eps_insensitive(eps: f64) -> Result<Self> {
        LossKind::EpsInsensitive { eps }.validated()
    }

    pub fn sq_eps_insensitive(eps: f64) -> Result<Self> {
        LossKind::SqEpsInsensitive { eps }.validated()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LossKind::Squared => true,
            LossKind::Lp { p } => p.is_finite() && p >= 1.0,
            LossKind::Huber { delta } => delta.is_finite() && delta > 0.0,
            LossKind::EpsInsensitive { eps } | LossKind::SqEpsInsensitive { eps } => {
                eps.is_finite() && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLoss(format!("parameter out of range in {self}")))
        }
    }

    fn validated(self) -> Result<Self> {
        self.validate().map(|_| self)
    }

    /// `psi(t)`, the loss as a function of the signed residual `t = prediction - label`.
    pub fn psi(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            LossKind::Squared => t * t,
            LossKind::Lp { p } => {
                if a == 0.0 {
                    0.0
                } else {
                    a.powf(p)
                }
            }
            LossKind::Huber { delta } => {
                if a <= delta {
                    0.5 * t * t
                } else {
                    delta * a - 0.5 * delta * delta
                }
            }
            LossKind::EpsInsensitive { eps } => (a - eps).max(0.0),
            LossKind::SqEpsInsensitive { eps } => (t * t - eps * eps).max(0.0),
        }
    }

    /// Minimal-norm subgradient of `psi` at `t`.
    pub fn psi_subgradient(&self, t: f64) -> f64 {
        let a = t.abs();
        let s = if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            0.0
        };
        match *self {
            LossKind::Squared => 2.0 * t,
            LossKind::Lp { p } => {
                if a == 0.0 {
                    0.0
                } else {
                    p * a.powf(p - 1.0) * s
                }
            }
            LossKind::Huber { delta } => {
                if a <= delta {
                    t
                } else {
                    delta * s
                }
            }
            LossKind::EpsInsensitive { eps } => {
                if a <= eps {
                    0.0
                } else {
                    s
                }
            }
            LossKind::SqEpsInsensitive { eps } => {
                if a <= eps {
                    0.0
                } else {
                    2.0 * t
                }
            }
        }
    }

    pub fn value(&self, prediction: f64, label: f64) -> f64 {
        self.psi(prediction - label)
    }

    pub fn subgradient(&self, prediction: f64, label: f64) -> f64 {
        self.psi_subgradient(prediction - label)
    }

    /// Supremum of the loss over predictions and labels in `[-bound, bound]`.
    pub fn upper_bound(&self, bound: f64) -> f64 {
        // psi is symmetric and non-decreasing in |t|, and |t| <= 2B.
        self.psi(2.0 * bound)
    }

    /// True for losses whose derivative is Lipschitz on bounded sets.
    pub fn is_smooth(&self) -> bool {
        match *self {
            LossKind::Squared | LossKind::Huber { .. } => true,
            LossKind::Lp { p } => p >= 2.0,
            LossKind::EpsInsensitive { .. } | LossKind::SqEpsInsensitive { .. } => false,
        }
    }
}

pub fn loss_value(kind: LossKind, prediction: f64, label: f64) -> f64 {
    kind.value(prediction, label)
}

pub fn loss_subgradient(kind: LossKind, prediction: f64, label: f64) -> f64 {
    kind.subgradient(prediction, label)
}

pub fn loss_upper_bound(kind: LossKind, bound: f64) -> f64 {
    kind.upper_bound(bound)
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LossKind::Squared => write!(f, "squared"),
            LossKind::Lp { p } => write!(f, "lp:{p:?}"),
            LossKind::Huber { delta } => write!(f, "huber:{delta:?}"),
            LossKind::EpsInsensitive { eps } => write!(f, "eps:{eps:?}"),
            LossKind::SqEpsInsensitive { eps } => write!(f, "sqeps:{eps:?}"),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("squared") {
            return Ok(LossKind::Squared);
        }
        let (name, param) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidLoss(format!("expected `name:param`, got `{s}`")))?;
        let value: f64 = param
            .trim()
            .parse()
            .map_err(|_| Error::InvalidLoss(format!("bad parameter `{param}` in `{s}`")))?;
        match name.trim().to_ascii_lowercase().as_str() {
            "lp" => LossKind::lp(value),
            "huber" => LossKind::huber(value),
            "eps" => LossKind::eps_insensitive(value),
            "sqeps" => LossKind::sq_eps_insensitive(value),
            other => Err(Error::InvalidLoss(format!("unknown loss `{other}`"))),
        }
    }
}

impl TryFrom<String> for LossKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LossKind> for String {
    fn from(k: LossKind) -> String {
        k.to_string()
    }
}

/// Parses a comma separated list such as `huber:0.5,lp:1.5,sqeps:0.25`.
pub fn parse_loss_list(s: &str) -> Result<Vec<LossKind>> {
    s.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> Vec<LossKind> {
        vec![
            LossKind::Squared,
            LossKind::lp(1.0).unwrap(),
            LossKind::lp(1.5).unwrap(),
            LossKind::lp(3.0).unwrap(),
            LossKind::huber(0.5).unwrap(),
            LossKind::eps_insensitive(0.1).unwrap(),
            LossKind::sq_eps_insensitive(0.3).unwrap(),
        ]
    }

    #[test]
    fn values_from_examples() {
        assert_eq!(loss_value(LossKind::huber(1.0).unwrap(), 0.5, 0.0), 0.125);
        assert_eq!(loss_value(LossKind::huber(1.0).unwrap(), 3.0, 0.0), 2.5);
        assert_eq!(loss_value(LossKind::sq_eps_insensitive(0.5).unwrap(), 1.0, 0.8), 0.0);
        assert_eq!(loss_value(LossKind::lp(3.0).unwrap(), 2.0, 0.0), 8.0);
    }

    #[test]
    fn subgradients_from_examples() {
        let l1 = LossKind::lp(1.0).unwrap();
        assert_eq!(loss_subgradient(l1, 0.7, 0.7), 0.0);
        assert_eq!(loss_subgradient(LossKind::Squared, 1.5, 1.0), 1.0);

        let huber = LossKind::huber(0.5).unwrap();
        let g = loss_subgradient(huber, 2.0, 0.0);
        let h = 1e-5;
        let fd = (huber.value(2.0 + h, 0.0) - huber.value(2.0 - h, 0.0)) / (2.0 * h);
        assert!((g - fd).abs() < 1e-6, "g={g} fd={fd}");
        assert_eq!(g, 0.5);
    }

    #[test]
    fn subgradient_is_zero_inside_tubes() {
        for t in [-0.1, 0.0, 0.05, 0.1] {
            assert_eq!(LossKind::eps_insensitive(0.1).unwrap().psi_subgradient(t), 0.0);
            assert_eq!(LossKind::sq_eps_insensitive(0.1).unwrap().psi_subgradient(t), 0.0);
        }
    }

    #[test]
    fn upper_bounds_from_examples() {
        assert_eq!(loss_upper_bound(LossKind::lp(2.0).unwrap(), 1.0), 4.0);
        assert_eq!(loss_upper_bound(LossKind::huber(4.0).unwrap(), 1.0), 2.0);
        assert_eq!(loss_upper_bound(LossKind::eps_insensitive(3.0).unwrap(), 1.0), 0.0);
        assert_eq!(loss_upper_bound(LossKind::sq_eps_insensitive(0.5).unwrap(), 1.0), 3.75);
    }

    #[test]
    fn huber_is_c1_at_the_knee() {
        let delta = 0.7;
        let k = LossKind::huber(delta).unwrap();
        let h = 1e-7;
        assert!((k.psi(delta + h) - k.psi(delta - h)).abs() < 2.0 * delta * h + 1e-12);
        let left = k.psi_subgradient(delta - 1e-12);
        let right = k.psi_subgradient(delta + 1e-12);
        assert!((left - right).abs() < 1e-9);
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(LossKind::lp(0.5).is_err());
        assert!(LossKind::huber(0.0).is_err());
        assert!(LossKind::eps_insensitive(-1.0).is_err());
        assert!(LossKind::sq_eps_insensitive(f64::NAN).is_err());
        assert!("huber:-1".parse::<LossKind>().is_err());
        assert!("cauchy:1".parse::<LossKind>().is_err());
        assert!("lp".parse::<LossKind>().is_err());
    }

    #[test]
    fn tagged_strings() {
        assert_eq!("squared".parse::<LossKind>().unwrap(), LossKind::Squared);
        assert_eq!("lp:3.0".parse::<LossKind>().unwrap(), LossKind::Lp { p: 3.0 });
        assert_eq!("huber:0.2".parse::<LossKind>().unwrap(), LossKind::Huber { delta: 0.2 });
        assert_eq!("eps:0.1".parse::<LossKind>().unwrap(), LossKind::EpsInsensitive { eps: 0.1 });
        assert_eq!("sqeps:0.1".parse::<LossKind>().unwrap(), LossKind::SqEpsInsensitive { eps: 0.1 });
        assert_eq!(LossKind::Lp { p: 3.0 }.to_string(), "lp:3.0");
        for k in all_kinds() {
            assert_eq!(k.to_string().parse::<LossKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(serde_json::from_str::<LossKind>(&json).unwrap(), k);
        }
        assert_eq!(parse_loss_list("huber:0.5,lp:1.5,lp:3,sqeps:0.25").unwrap().len(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn kind() -> impl Strategy<Value = LossKind> {
            prop_oneof![
                Just(LossKind::Squared),
                (1.0f64..5.0).prop_map(|p| LossKind::Lp { p }),
                (0.01f64..3.0).prop_map(|delta| LossKind::Huber { delta }),
                (0.01f64..2.0).prop_map(|eps| LossKind::EpsInsensitive { eps }),
                (0.01f64..2.0).prop_map(|eps| LossKind::SqEpsInsensitive { eps }),
            ]
        }

        proptest! {
            #[test]
            fn symmetric_and_zero_at_label(k in kind(), y in -5.0f64..5.0, t in -5.0f64..5.0) {
                prop_assert_eq!(k.psi(t), k.psi(-t));
                let (a, b) = (k.value(y + t, y), k.value(y - t, y));
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} vs {}", a, b);
                prop_assert_eq!(k.value(y, y), 0.0);
                prop_assert!(k.value(y + t, y) >= 0.0);
            }

            #[test]
            fn convex_in_prediction(k in kind(), y in -3.0f64..3.0, a in -4.0f64..4.0, b in -4.0f64..4.0) {
                let mid = k.value(0.5 * (a + b), y);
                let avg = 0.5 * (k.value(a, y) + k.value(b, y));
                prop_assert!(mid <= avg + 1e-12 * (1.0 + avg.abs()));
            }

            #[test]
            fn subgradient_inequality(k in kind(), y in -3.0f64..3.0, p in -4.0f64..4.0, q in -4.0f64..4.0) {
                let g = k.subgradient(p, y);
                let lhs = k.value(q, y);
                let rhs = k.value(p, y) + g * (q - p);
                prop_assert!(lhs >= rhs - 1e-10 * (1.0 + lhs.abs()), "lhs={} rhs={}", lhs, rhs);
            }

            #[test]
            fn lp2_matches_squared(y in -5.0f64..5.0, p in -5.0f64..5.0) {
                prop_assert_eq!(LossKind::Lp { p: 2.0 }.value(p, y), LossKind::Squared.value(p, y));
            }

            #[test]
            fn huber_branches(delta in 0.01f64..3.0, t in -6.0f64..6.0) {
                let v = LossKind::Huber { delta }.psi(t);
                let expect = if t.abs() <= delta { 0.5 * t * t } else { delta * t.abs() - 0.5 * delta * delta };
                prop_assert_eq!(v, expect);
            }

            #[test]
            fn bounded_by_upper_bound(k in kind(), b in 0.1f64..3.0, u in -1.0f64..1.0, v in -1.0f64..1.0) {
                let (pred, label) = (u * b, v * b);
                prop_assert!(k.value(pred, label) <= k.upper_bound(b) * (1.0 + 1e-12));
            }
        }
    }
}
