//! Closed-form concentration and uncertainty bounds.
//!
//! Everything here is a scalar function of the dimension `d`, a measure
//! `|Ω|`, a tolerance `ε` and an exponent `p`. The incomplete-gamma ratio is
//! evaluated from the finite Poisson sum rather than a generic special
//! function routine, since `k` is always an integer.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Inputs shared by the bound functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub d: u32,
    pub measure: f64,
    pub eps: f64,
    pub p: f64,
}

impl BoundQuery {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if !self.measure.is_finite() || self.measure < 0.0 {
            return Err(Error::InvalidInput(format!(
                "measure must be finite and nonnegative, got {}",
                self.measure
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidInput(format!(
                "eps must lie in (0,1), got {}",
                self.eps
            )));
        }
        if !self.p.is_finite() || self.p < 1.0 {
            return Err(Error::BadExponent(self.p));
        }
        Ok(())
    }
}

/// `ln n!`, exact summation for small `n` and the Stirling series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 32 {
        return (2..=n).map(|i| (i as f64).ln()).sum();
    }
    let x = (n + 1) as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln Γ(x), x = n + 1
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Log of the Poisson weight `e^{-s} s^j / j!` for `s > 0`.
fn ln_poisson_weight(j: u64, s: f64) -> f64 {
    -s + j as f64 * s.ln() - ln_factorial(j)
}

/// `e^{-s} Σ_{j<k} s^j/j!`, the probability that a Poisson(s) variable is
/// below `k`.
pub fn poisson_head(k: u64, s: f64) -> f64 {
    poisson_split(k, s).0
}

/// Regularized lower incomplete gamma at integer order,
/// `γ(k,s)/(k-1)! = 1 - e^{-s} Σ_{j<k} s^j/j!`.
pub fn gamma_ratio(k: u64, s: f64) -> f64 {
    poisson_split(k, s).1
}

/// `(P[X < k], P[X ≥ k])` for `X ~ Poisson(s)`, from the finite sum.
///
/// Whichever side is the small one is summed directly and the other is its
/// complement, so both keep full relative precision where they are small.
fn poisson_split(k: u64, s: f64) -> (f64, f64) {
    assert!(k >= 1, "gamma_ratio needs k >= 1");
    assert!(s >= 0.0, "gamma_ratio needs s >= 0");
    if s == 0.0 {
        return (1.0, 0.0);
    }
    if s.is_infinite() {
        return (0.0, 1.0);
    }
    if s < k as f64 {
        // terms decrease for j >= k > s
        let mut term = ln_poisson_weight(k, s).exp();
        let mut tail = 0.0;
        let mut j = k;
        while term > 1e-18 * tail || tail == 0.0 {
            tail += term;
            j += 1;
            term *= s / j as f64;
            if term == 0.0 {
                break;
            }
        }
        let tail = tail.min(1.0);
        (1.0 - tail, tail)
    } else {
        // terms decrease going down from j = k-1 < s
        let mut term = ln_poisson_weight(k - 1, s).exp();
        let mut head = 0.0;
        let mut j = k - 1;
        loop {
            head += term;
            if j == 0 || term < 1e-18 * head {
                break;
            }
            term *= j as f64 / s;
            j -= 1;
        }
        let head = head.min(1.0);
        (head, 1.0 - head)
    }
}

/// Volume of the unit ball of ℝ^{2d}, `π^d / d!`.
pub fn unit_ball_volume(d: u32) -> f64 {
    (d as f64 * PI.ln() - ln_factorial(d as u64)).exp()
}

/// Symplectic capacity of the ball with the given volume in ℝ^{2d}:
/// `π (|Ω| / ω_{2d})^{1/d}`.
pub fn symplectic_capacity(d: u32, measure: f64) -> f64 {
    assert!(d >= 1);
    if measure <= 0.0 {
        return 0.0;
    }
    PI * (measure / unit_ball_volume(d)).powf(1.0 / d as f64)
}

/// Sharp upper bound on the concentration of any signal on a set of the
/// given measure in ℝ^{2d}. In dimension one this is `1 - e^{-|Ω|}`.
pub fn faber_krahn_bound(d: u32, measure: f64) -> f64 {
    gamma_ratio(d as u64, symplectic_capacity(d, measure))
}

/// Inverse of `s ↦ e^{-s} Σ_{j<d} s^j/j!` on `[0, ∞)`, by bisection.
pub fn psi(d: u32, eps: f64) -> f64 {
    assert!(d >= 1);
    assert!(eps > 0.0 && eps <= 1.0, "psi needs eps in (0,1], got {eps}");
    if eps == 1.0 {
        return 0.0;
    }
    let head = |s: f64| poisson_head(d as u64, s);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while head(hi) > eps {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if head(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Minimal measure of a set capturing a fraction `1 - ε` of the energy of
/// some signal: `ω_{2d} π^{-d} ψ_d(ε)^d = ψ_d(ε)^d / d!`.
pub fn min_volume(d: u32, eps: f64) -> f64 {
    let s = psi(d, eps);
    if s == 0.0 {
        return 0.0;
    }
    (d as f64 * s.ln() - ln_factorial(d as u64)).exp()
}

/// Upper bound for the local Lieb functional, `(2/p)(1 - e^{-p|Ω|/2})`.
pub fn lieb_local_bound(p: f64, measure: f64) -> f64 {
    assert!(p >= 2.0, "local Lieb bound needs p >= 2");
    -(2.0 / p) * (-0.5 * p * measure).exp_m1()
}

/// Upper bound for the `L^p` concentration, `1 - e^{-p|Ω|/2}`.
pub fn lp_bound(p: f64, measure: f64) -> f64 {
    assert!(p >= 1.0, "L^p bound needs p >= 1");
    -(-0.5 * p * measure).exp_m1()
}

/// Minimal measure for `L^p` concentration `1 - ε`: `(2/p) log(1/ε)`.
pub fn lp_min_volume(p: f64, eps: f64) -> f64 {
    assert!(p >= 1.0);
    assert!(eps > 0.0 && eps <= 1.0);
    -(2.0 / p) * eps.ln()
}

/// Earlier lower bound on the measure of an ε-concentration set,
/// `sup_{p>2} (1-ε)^{p/(p-2)} (p/2)^{2d/(p-2)}`.
///
/// With `v = 1/(p-2)` the logarithm of the objective is
/// `(1+2v) log(1-ε) + 2dv log(1 + 1/(2v))`, a concave function of `v`, so a
/// golden-section search over `p ∈ [2+10⁻⁶, 10⁴]` finds the supremum.
pub fn prior_art_bound(d: u32, eps: f64) -> f64 {
    assert!(d >= 1);
    assert!(eps > 0.0 && eps < 1.0);
    let log_obj =
        |v: f64| (1.0 + 2.0 * v) * (-eps).ln_1p() + 2.0 * d as f64 * v * (0.5 / v).ln_1p();
    let mut a = 1.0 / (1e4 - 2.0);
    let mut b = 1e6;
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let mut fc = log_obj(c);
    let mut fe = log_obj(e);
    for _ in 0..500 {
        if fc > fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = log_obj(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = log_obj(e);
        }
        // p = 2 + 1/v, so |Δp| = |Δv| / v²
        if (b - a) <= 1e-10 * a * a || b - a <= 1e-15 * b {
            break;
        }
    }
    let best = [log_obj(a), log_obj(b), fc, fe]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    best.exp()
}

/// The bound `|Ω| ≥ 1 - ε` that follows from `‖Vf‖_∞ ≤ ‖f‖₂` alone.
pub fn weak_bound(eps: f64) -> f64 {
    1.0 - eps
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Independent oracle: Simpson quadrature of t^{k-1} e^{-t} / (k-1)!.
    fn gamma_ratio_quadrature(k: u64, s: f64) -> f64 {
        let n = 20_000;
        let h = s / n as f64;
        let lf = ln_factorial(k - 1);
        let f = |t: f64| {
            if t == 0.0 {
                if k == 1 {
                    1.0
                } else {
                    0.0
                }
            } else {
                ((k - 1) as f64 * t.ln() - t - lf).exp()
            }
        };
        let mut acc = f(0.0) + f(s);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn ln_factorial_matches_direct_sum() {
        for n in [0u64, 1, 5, 31, 32, 33, 100, 170] {
            let direct: f64 = (2..=n).map(|i| (i as f64).ln()).sum();
            assert_abs_diff_eq!(ln_factorial(n), direct, epsilon = 1e-11 * direct.max(1.0));
        }
    }

    #[test]
    fn gamma_ratio_examples() {
        for s in [0.0, 0.3, 1.0, 5.0, 40.0] {
            assert_abs_diff_eq!(gamma_ratio(1, s), 1.0 - (-s).exp(), epsilon = 1e-15);
        }
        let v = gamma_ratio(2, PI);
        assert_abs_diff_eq!(v, 1.0 - (-PI).exp() * (1.0 + PI), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.821_025_553_585_931, epsilon = 1e-14);
        assert_eq!(gamma_ratio(7, 0.0), 0.0);
    }

    #[test]
    fn gamma_ratio_against_quadrature() {
        for k in [1u64, 2, 3, 5, 10, 25] {
            for s in [0.5, 2.0, PI, 9.0, 30.0] {
                let q = gamma_ratio_quadrature(k, s);
                assert_abs_diff_eq!(gamma_ratio(k, s), q, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gamma_ratio_small_values_keep_relative_precision() {
        // Σ_{j≥40} e^{-1}/j! ≈ e^{-1}/40! (1 + 1/41 + ...)
        let mut series = 0.0;
        let mut term = 1.0;
        for j in 41..80 {
            series += term;
            term /= j as f64;
        }
        let direct = (-1.0 - ln_factorial(40)).exp() * series;
        let v = gamma_ratio(40, 1.0);
        assert!((v / direct - 1.0).abs() < 1e-6, "{v} vs {direct}");
    }

    #[test]
    fn large_order_does_not_overflow() {
        let v = gamma_ratio(5000, 5000.0);
        assert!(v > 0.49 && v < 0.51, "{v}");
        assert!(gamma_ratio(10_000, 100.0) < 1e-300 || gamma_ratio(10_000, 100.0) == 0.0);
        assert_abs_diff_eq!(gamma_ratio(3, 2000.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn capacity_and_faber_krahn_examples() {
        assert_abs_diff_eq!(symplectic_capacity(1, PI), PI, epsilon = 1e-14);
        assert_abs_diff_eq!(symplectic_capacity(2, PI * PI / 2.0), PI, epsilon = 1e-13);
        assert_eq!(symplectic_capacity(3, 0.0), 0.0);
        assert_abs_diff_eq!(faber_krahn_bound(1, PI), 1.0 - (-PI).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            faber_krahn_bound(2, PI * PI / 2.0),
            1.0 - (-PI).exp() * (1.0 + PI),
            epsilon = 1e-14
        );
        assert_eq!(faber_krahn_bound(2, 0.0), 0.0);
        for m in [0.1, 1.0, 3.0, 10.0] {
            assert_abs_diff_eq!(faber_krahn_bound(1, m), 1.0 - (-m).exp(), epsilon = 1e-15);
        }
    }

    #[test]
    fn psi_examples() {
        assert_abs_diff_eq!(psi(1, 0.5), 2f64.ln(), epsilon = 1e-14);
        // e^{-s}(1+s) = 0.5, high-precision root 1.678346990016660653...
        assert_abs_diff_eq!(psi(2, 0.5), 1.678_346_990_016_660_7, epsilon = 1e-12);
        assert_eq!(psi(3, 1.0), 0.0);
    }

    #[test]
    fn min_volume_examples() {
        assert_abs_diff_eq!(min_volume(1, (-1f64).exp()), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(min_volume(2, 0.5), 1.408_424_309_448_992_4, epsilon = 1e-11);
        assert!(min_volume(2, 1.0 - 1e-12) < 1e-5);
        assert_eq!(min_volume(3, 1.0), 0.0);
    }

    #[test]
    fn lieb_and_lp_examples() {
        assert_abs_diff_eq!(
            lieb_local_bound(2.0, 1.3),
            1.0 - (-1.3f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            lieb_local_bound(4.0, PI),
            0.5 * (1.0 - (-2.0 * PI).exp()),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(lieb_local_bound(3.0, 1e6), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lp_bound(2.0, 0.7), 1.0 - (-0.7f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(lp_bound(1.0, 2.0 * 2f64.ln()), 0.5, epsilon = 1e-15);
        assert_eq!(lp_bound(3.0, 0.0), 0.0);
        assert_abs_diff_eq!(lp_min_volume(2.0, 0.5), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(lp_min_volume(1.0, 0.25), 2.0 * 4f64.ln(), epsilon = 1e-15);
        assert_eq!(lp_min_volume(5.0, 1.0), 0.0);
    }

    /// Independent oracle: dense logarithmic scan of the objective in p.
    fn prior_art_scan(d: u32, eps: f64) -> f64 {
        let mut best: f64 = 0.0;
        let n = 200_000;
        for i in 0..=n {
            let p = 2.0 + 10f64.powf(-6.0 + 10.0 * i as f64 / n as f64);
            let v = (1.0 - eps).powf(p / (p - 2.0)) * (p / 2.0).powf(2.0 * d as f64 / (p - 2.0));
            best = best.max(v);
        }
        best
    }

    #[test]
    fn prior_art_matches_scan_and_is_bounded() {
        for d in [1u32, 2] {
            for eps in [0.01, 0.1, 0.37, 0.8, 0.99] {
                let g = prior_art_bound(d, eps);
                let s = prior_art_scan(d, eps);
                assert!(g >= s * (1.0 - 1e-9), "d={d} eps={eps}: {g} < scan {s}");
                assert!(g <= s * (1.0 + 1e-6), "d={d} eps={eps}: {g} vs scan {s}");
                assert!(g <= (d as f64).exp() + 1e-9);
            }
        }
        assert!(prior_art_bound(1, 1.0 - 1e-9) < 1e-6);
        assert!(prior_art_bound(1, 0.01) < 100f64.ln());
    }

    #[test]
    fn weak_bound_below_sharp_curve() {
        assert_eq!(weak_bound(0.0), 1.0);
        assert_eq!(weak_bound(0.5), 0.5);
        for i in 1..100 {
            let eps = i as f64 / 100.0;
            assert!(weak_bound(eps) <= min_volume(1, eps) + 1e-15);
        }
    }

    #[test]
    fn psi_increases_with_dimension() {
        for i in 1..=20 {
            let eps = i as f64 / 21.0;
            assert!(psi(1, eps) < psi(2, eps));
            assert!(psi(2, eps) < psi(3, eps));
        }
    }

    #[test]
    fn psi_asymptotics() {
        for d in 1..=3u32 {
            let eps = 0.999;
            let df = ln_factorial(d as u64).exp();
            let r = psi(d, eps) / (df.powf(1.0 / d as f64) * (1.0 - eps).powf(1.0 / d as f64));
            assert!((0.95..=1.05).contains(&r), "d={d}: {r}");
        }
        assert_abs_diff_eq!(psi(1, 1e-8) / 1e8f64.ln(), 1.0, epsilon = 1e-12);
        // the small-ε ratio tends to 1 only logarithmically for d > 1
        for d in 2..=3u32 {
            let a = psi(d, 1e-8) / 1e8f64.ln();
            let b = psi(d, 1e-300) / 1e300f64.ln();
            assert!(b < a && (0.95..=1.05).contains(&b), "d={d}: {a} {b}");
        }
    }

    #[test]
    fn query_validation() {
        let q = BoundQuery {
            d: 1,
            measure: 1.0,
            eps: 0.5,
            p: 2.0,
        };
        assert!(q.validate().is_ok());
        assert!(BoundQuery { d: 0, ..q }.validate().is_err());
        assert!(BoundQuery { eps: 1.0, ..q }.validate().is_err());
        assert!(matches!(
            BoundQuery { p: 0.5, ..q }.validate(),
            Err(Error::BadExponent(_))
        ));
        assert!(BoundQuery { measure: -1.0, ..q }.validate().is_err());
    }

    proptest! {
        #[test]
        fn gamma_ratio_monotone_in_s(k in 1u64..60, s in 0.0f64..80.0, ds in 0.0f64..5.0) {
            let a = gamma_ratio(k, s);
            let b = gamma_ratio(k, s + ds);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b >= a - 1e-15);
        }

        #[test]
        fn psi_inverts_gamma_ratio(d in 1u32..=3, eps in 1e-6f64..0.999_999) {
            let s = psi(d, eps);
            prop_assert!((gamma_ratio(d as u64, s) - (1.0 - eps)).abs() < 1e-10);
        }
    }
}
