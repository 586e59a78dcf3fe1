//! Derivative-free minimization of convex functions on a closed interval.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Interval width at which golden-section search stops.
pub const INTERVAL_TOL: f64 = 1e-12;

const REFINE_PASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMin {
    pub argmin: f64,
    pub value: f64,
}

/// Minimizes a convex `f` over `[lo, hi]`.
///
/// Golden-section search down to [`INTERVAL_TOL`], then three ternary passes
/// over a widening neighbourhood of the incumbent; the endpoints are always
/// evaluated. Ties keep the leftmost point, so on a flat optimal interval the
/// reported argmin sits at its left end.
pub fn minimize_convex<F>(f: F, lo: f64, hi: f64) -> ScalarMin
where
    F: Fn(f64) -> f64,
{
    assert!(lo <= hi, "empty interval [{lo}, {hi}]");
    let mut best = ScalarMin {
        argmin: lo,
        value: f(lo),
    };
    let consider = |x: f64, fx: f64, best: &mut ScalarMin| {
        if fx < best.value || (fx == best.value && x < best.argmin) {
            *best = ScalarMin { argmin: x, value: fx };
        }
    };
    let fhi = f(hi);
    consider(hi, fhi, &mut best);
    if hi - lo <= INTERVAL_TOL {
        return best;
    }

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > INTERVAL_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        // Interval stopped shrinking in floating point.
        if c <= a || d >= b {
            break;
        }
    }
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    let fa = f(a);
    consider(a, fa, &mut best);

    let mut radius = 16.0 * (b - a).max(INTERVAL_TOL);
    for _ in 0..REFINE_PASSES {
        let mut l = (best.argmin - radius).max(lo);
        let mut r = (best.argmin + radius).min(hi);
        while r - l > INTERVAL_TOL {
            let m1 = l + (r - l) / 3.0;
            let m2 = r - (r - l) / 3.0;
            let (f1, f2) = (f(m1), f(m2));
            consider(m1, f1, &mut best);
            consider(m2, f2, &mut best);
            if f1 <= f2 {
                r = m2;
            } else {
                l = m1;
            }
            if m1 <= l && m2 >= r {
                break;
            }
        }
        radius *= 0.5;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interior_minimum() {
        let m = minimize_convex(|x| (x - 0.3).powi(2) + 1.0, -1.0, 1.0);
        assert!((m.argmin - 0.3).abs() < 1e-6);
        assert!((m.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_minimum() {
        let m = minimize_convex(|x| x, -2.0, 5.0);
        assert_eq!(m.argmin, -2.0);
        assert_eq!(m.value, -2.0);
        let m = minimize_convex(|x| -3.0 * x, -2.0, 5.0);
        assert_eq!(m.argmin, 5.0);
    }

    #[test]
    fn flat_minimum_reports_leftmost_point() {
        // zero on [-0.5, 0.25]
        let f = |x: f64| (x - 0.25).max(0.0) + (-0.5 - x).max(0.0);
        let m = minimize_convex(f, -1.0, 1.0);
        assert_eq!(m.value, 0.0);
        assert!((m.argmin + 0.5).abs() < 1e-9, "argmin {}", m.argmin);
    }

    #[test]
    fn kinked_absolute_value() {
        let m = minimize_convex(|x| (x - 0.123456789).abs(), -1.0, 1.0);
        assert!(m.value < 1e-11);
    }

    #[test]
    fn degenerate_interval() {
        let m = minimize_convex(|x| x * x, 0.5, 0.5);
        assert_eq!(m.argmin, 0.5);
        assert_eq!(m.value, 0.25);
    }
}
