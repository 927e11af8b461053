//! The Fock space `F²(ℂ)` through finite monomial expansions.
//!
//! A function is stored as coefficients `c_k` in the orthonormal basis
//! `e_k(z) = (π^k/k!)^{1/2} z^k`, so that `‖F‖²_{F²} = Σ |c_k|²`. Most
//! consumers need the weighted value `F(z) e^{-π|z|²/2}`, whose square is
//! the time-frequency energy density; it is evaluated with the weight folded
//! into the basis recurrence so nothing overflows for moderate `|z|`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::{gamma_ratio, ln_factorial};
use crate::quadrature::gauss_legendre_on;
use crate::{Error, Result};

/// A point `z = x + iω` of the time-frequency plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct PhasePoint {
    pub x: f64,
    pub w: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { x: 0.0, w: 0.0 };

    pub const fn new(x: f64, w: f64) -> Self {
        Self { x, w }
    }

    pub fn z(self) -> Complex64 {
        Complex64::new(self.x, self.w)
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.w * self.w
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.w)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.w.is_finite()
    }
}

impl From<Complex64> for PhasePoint {
    fn from(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }
}

impl From<[f64; 2]> for PhasePoint {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<PhasePoint> for [f64; 2] {
    fn from(p: PhasePoint) -> Self {
        [p.x, p.w]
    }
}

impl std::ops::Sub for PhasePoint {
    type Output = PhasePoint;
    fn sub(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.x - o.x, self.w - o.w)
    }
}

impl std::ops::Add for PhasePoint {
    type Output = PhasePoint;
    fn add(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.x + o.x, self.w + o.w)
    }
}

/// Coefficients `c_0..c_{N-1}` of `F = Σ c_k e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockCoefficients {
    coeffs: Vec<Complex64>,
}

impl FockCoefficients {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput(
                "at least one coefficient is required".into(),
            ));
        }
        if let Some(k) = coeffs
            .iter()
            .position(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "coefficient {k} is not finite"
            )));
        }
        Ok(Self { coeffs })
    }

    /// The basis element `e_k` inside a basis of size `n`.
    pub fn basis(k: usize, n: usize) -> Self {
        assert!(k < n);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        coeffs[k] = Complex64::new(1.0, 0.0);
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn basis_size(&self) -> usize {
        self.coeffs.len()
    }

    /// `‖F‖_{F²}`, exact by Parseval.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroFunction);
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    /// `F(z)`.
    pub fn eval(&self, z: PhasePoint) -> Complex64 {
        let zc = z.z();
        let mut ek = Complex64::new(1.0, 0.0);
        let mut acc = self.coeffs[0];
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            ek *= zc * (PI / k as f64).sqrt();
            acc += c * ek;
        }
        acc
    }

    /// `F(z) e^{-π|z|²/2}`; its squared modulus is the energy density.
    pub fn weighted_eval(&self, z: PhasePoint) -> Complex64 {
        let zc = z.z();
        let mut ek = Complex64::new((-0.5 * PI * z.norm_sqr()).exp(), 0.0);
        let mut acc = self.coeffs[0] * ek;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            ek *= zc * (PI / k as f64).sqrt();
            acc += c * ek;
        }
        acc
    }

    /// `(F(z), F'(z)) e^{-π|z|²/2}`, using `e_k' = (πk)^{1/2} e_{k-1}`.
    pub fn weighted_eval_with_derivative(&self, z: PhasePoint) -> (Complex64, Complex64) {
        let zc = z.z();
        let mut ek = Complex64::new((-0.5 * PI * z.norm_sqr()).exp(), 0.0);
        let mut val = self.coeffs[0] * ek;
        let mut der = Complex64::new(0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            der += c * ek * (PI * k as f64).sqrt();
            ek *= zc * (PI / k as f64).sqrt();
            val += c * ek;
        }
        (val, der)
    }

    /// Energy density `u(z) = |F(z)|² e^{-π|z|²}`.
    pub fn density(&self, z: PhasePoint) -> f64 {
        self.weighted_eval(z).norm_sqr()
    }

    /// Radial majorant of `|F(z)| e^{-π|z|²/2}` on the circle `|z| = r`.
    pub fn radial_majorant(&self, r: f64) -> f64 {
        let mut ek = (-0.5 * PI * r * r).exp();
        let mut acc = self.coeffs[0].norm() * ek;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            ek *= r * (PI / k as f64).sqrt();
            acc += c.norm() * ek;
        }
        acc
    }
}

/// Amplitude and centre of the coherent state `c F_{z0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentParams {
    pub z0: PhasePoint,
    pub amplitude: Complex64,
}

impl CoherentParams {
    pub fn unit(z0: PhasePoint) -> Self {
        Self {
            z0,
            amplitude: Complex64::new(1.0, 0.0),
        }
    }
}

/// `e_k(z) = (π^k/k!)^{1/2} z^k`, from its logarithm so that large `k` does
/// not overflow in the prefactor.
pub fn monomial_eval(k: usize, z: PhasePoint) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let r = z.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let kf = k as f64;
    let log_mag = 0.5 * (kf * PI.ln() - ln_factorial(k as u64)) + kf * r.ln();
    Complex64::from_polar(log_mag.exp(), kf * z.w.atan2(z.x))
}

pub fn fock_eval(f: &FockCoefficients, z: PhasePoint) -> Complex64 {
    f.eval(z)
}

const NORM_TAIL_TOL: f64 = 1e-13;
const NORM_MAX_RADIUS: f64 = 25.0;

/// `‖F‖_{F^p} = (∫ |F(z)|^p e^{-pπ|z|²/2} dz)^{1/p}`.
///
/// `p = 2` is exact. Otherwise the integral is taken over a disk whose
/// radius makes the majorant tail below `1e-13` of the majorant mass, with a
/// polar rule of the given order.
pub fn fock_norm(f: &FockCoefficients, p: f64, order: usize) -> Result<f64> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::BadExponent(p));
    }
    if p == 2.0 {
        return Ok(f.norm());
    }
    Ok(fock_lp_integral(f, p, order)?.powf(1.0 / p))
}

/// `∫_{ℝ²} |F(z)|^p e^{-pπ|z|²/2} dz`.
pub fn fock_lp_integral(f: &FockCoefficients, p: f64, order: usize) -> Result<f64> {
    let radius = certified_radius(f, p)?;
    let rule =
        crate::quadrature::polar_rule(PhasePoint::ORIGIN, 0.0, radius, order, 8.0 / p.max(1.0));
    Ok(rule.integrate(|z| f.weighted_eval(z).norm().powf(p)))
}

/// Radius `R` with `2π ∫_R^∞ b(ρ)^p ρ dρ` below tolerance, `b` the radial
/// majorant.
pub fn certified_radius(f: &FockCoefficients, p: f64) -> Result<f64> {
    let tail = |r0: f64| -> f64 {
        let mut acc = 0.0;
        let step = 0.25;
        let mut a = r0;
        while a < r0 + 20.0 {
            acc += gauss_legendre_on(12, a, a + step)
                .map(|(r, w)| w * 2.0 * PI * r * f.radial_majorant(r).powf(p))
                .sum::<f64>();
            a += step;
        }
        acc
    };
    let total = tail(0.0);
    if total == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let mut r = 1.0;
    loop {
        let t = tail(r);
        if t <= NORM_TAIL_TOL * total {
            return Ok(r);
        }
        if r >= NORM_MAX_RADIUS {
            return Err(Error::TailTooLarge {
                tail: t / total,
                tol: NORM_TAIL_TOL,
            });
        }
        r += 0.5;
    }
}

const COHERENT_TAIL_TOL: f64 = 1e-12;

/// Coefficients of `c F_{z0}`, `c_k = c e^{-π|z0|²/2} conj(e_k(z0))`.
///
/// The dropped mass is the Poisson tail with mean `π|z0|²`.
pub fn coherent_state(params: CoherentParams, n: usize) -> Result<FockCoefficients> {
    if n == 0 {
        return Err(Error::InvalidInput("basis size must be positive".into()));
    }
    let z0 = params.z0;
    let tail = gamma_ratio(n as u64, PI * z0.norm_sqr());
    if tail >= COHERENT_TAIL_TOL {
        return Err(Error::BasisTooSmall {
            basis_size: n,
            dropped: tail,
            tol: COHERENT_TAIL_TOL,
        });
    }
    let zbar = z0.z().conj();
    let mut ek = Complex64::new((-0.5 * PI * z0.norm_sqr()).exp(), 0.0);
    let mut coeffs = Vec::with_capacity(n);
    coeffs.push(params.amplitude * ek);
    for k in 1..n {
        ek *= zbar * (PI / k as f64).sqrt();
        coeffs.push(params.amplitude * ek);
    }
    FockCoefficients::new(coeffs)
}

/// `(U_{z0} F)(z) = e^{-π|z0|²/2} e^{π z conj(z0)} F(z - z0)`.
pub fn translate_eval(f: &FockCoefficients, z0: PhasePoint, z: PhasePoint) -> Complex64 {
    let phase = Complex64::new(-0.5 * PI * z0.norm_sqr(), 0.0) + PI * z.z() * z0.z().conj();
    phase.exp() * f.eval(z - z0)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_unit(rng: &mut impl Rng, n: usize) -> FockCoefficients {
        let coeffs = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        FockCoefficients::new(coeffs).unwrap().normalized().unwrap()
    }

    #[test]
    fn monomial_examples() {
        let z = PhasePoint::new(2.0, 3.0);
        assert_eq!(monomial_eval(0, z), Complex64::new(1.0, 0.0));
        let v = monomial_eval(1, PhasePoint::new(1.0, 0.0));
        assert_abs_diff_eq!(v.re, PI.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
        assert_eq!(monomial_eval(5, PhasePoint::ORIGIN).norm(), 0.0);
    }

    #[test]
    fn monomial_large_k_is_finite_and_matches_recurrence() {
        let z = PhasePoint::new(3.0, -4.0);
        let mut rec = Complex64::new(1.0, 0.0);
        for k in 1..=300usize {
            rec *= z.z() * (PI / k as f64).sqrt();
            let m = monomial_eval(k, z);
            assert!(((m - rec).norm() / rec.norm()) < 1e-10, "k={k}");
        }
        let big = monomial_eval(9_999, PhasePoint::new(20.0, 0.0));
        assert!(big.re.is_finite() && big.im.is_finite());
    }

    #[test]
    fn eval_examples() {
        let e0 = FockCoefficients::basis(0, 6);
        assert_eq!(e0.eval(PhasePoint::new(2.0, 3.0)), Complex64::new(1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_unit(&mut rng, 10);
        assert_eq!(f.eval(PhasePoint::ORIGIN), f.coeffs()[0]);
        let f1 = coherent_state(CoherentParams::unit(PhasePoint::new(1.0, 0.0)), 40).unwrap();
        assert_abs_diff_eq!(f1.density(PhasePoint::new(1.0, 0.0)), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eval_agrees_with_monomials_and_weighted_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_unit(&mut rng, 24);
        for _ in 0..20 {
            let z = PhasePoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let direct: Complex64 = f
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| c * monomial_eval(k, z))
                .sum();
            let v = f.eval(z);
            assert!((v - direct).norm() <= 1e-11 * direct.norm().max(1.0));
            let w = f.weighted_eval(z) / (-0.5 * PI * z.norm_sqr()).exp();
            assert!((w - v).norm() <= 1e-11 * v.norm().max(1.0));
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_unit(&mut rng, 12);
        let z = PhasePoint::new(0.4, -0.7);
        let h = 1e-6;
        let fd = (f.eval(PhasePoint::new(z.x + h, z.w)) - f.eval(PhasePoint::new(z.x - h, z.w)))
            / (2.0 * h);
        let (_, d) = f.weighted_eval_with_derivative(z);
        let d = d / (-0.5 * PI * z.norm_sqr()).exp();
        assert!((d - fd).norm() < 1e-7 * fd.norm().max(1.0));
    }

    #[test]
    fn reproducing_bound_on_random_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.gen_range(1..=32);
            let f = random_unit(&mut rng, n);
            for _ in 0..200 {
                let r = 4.0 * rng.gen::<f64>().sqrt();
                let th = rng.gen_range(0.0..2.0 * PI);
                let z = PhasePoint::new(r * th.cos(), r * th.sin());
                assert!(f.density(z) <= 1.0 + 1e-10);
            }
        }
    }

    #[test]
    fn density_decays_away_from_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let f = random_unit(&mut rng, 32);
            for (radius, limit) in [(6.0, 1e-3), (8.0, 1e-6)] {
                let worst = (0..720)
                    .map(|i| {
                        let th = i as f64 * PI / 360.0;
                        f.density(PhasePoint::new(radius * th.cos(), radius * th.sin()))
                    })
                    .fold(0.0, f64::max);
                assert!(worst < limit, "R={radius}: {worst}");
            }
        }
    }

    #[test]
    fn norm_examples() {
        let e0 = FockCoefficients::basis(0, 4);
        assert_eq!(fock_norm(&e0, 2.0, 32).unwrap(), 1.0);
        let v = fock_norm(&e0, 4.0, 32).unwrap();
        assert_abs_diff_eq!(v, 0.5f64.powf(0.25), epsilon = 1e-12);
        let three = e0.scaled(Complex64::new(3.0, 0.0));
        assert_eq!(fock_norm(&three, 2.0, 32).unwrap(), 3.0);
        for p in [1.0, 3.0, 4.0, 7.5] {
            let v = fock_lp_integral(&e0, p, 32).unwrap();
            assert_abs_diff_eq!(v, 2.0 / p, epsilon = 1e-12);
        }
        assert!(matches!(
            fock_norm(&e0, 0.5, 32),
            Err(Error::BadExponent(_))
        ));
    }

    #[test]
    fn quadrature_norm_matches_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let f = random_unit(&mut rng, 16).scaled(Complex64::new(1.7, 0.0));
            let q = fock_lp_integral(&f, 2.0, 48).unwrap().sqrt();
            assert_abs_diff_eq!(q, f.norm(), epsilon = 1e-11);
        }
    }

    #[test]
    fn coherent_state_examples() {
        let f0 = coherent_state(CoherentParams::unit(PhasePoint::ORIGIN), 5).unwrap();
        assert_eq!(f0, FockCoefficients::basis(0, 5));
        let f1 = coherent_state(CoherentParams::unit(PhasePoint::new(1.0, 0.0)), 40).unwrap();
        assert_abs_diff_eq!(f1.norm().powi(2), 1.0, epsilon = 1e-12);
        assert!(matches!(
            coherent_state(CoherentParams::unit(PhasePoint::new(3.0, 1.0)), 10),
            Err(Error::BasisTooSmall { .. })
        ));
    }

    #[test]
    fn coherent_state_matches_closed_form() {
        let z0 = PhasePoint::new(0.7, -1.1);
        let amp = Complex64::new(0.3, 2.0);
        let f = coherent_state(CoherentParams { z0, amplitude: amp }, 64).unwrap();
        for z in [
            PhasePoint::new(0.0, 0.0),
            PhasePoint::new(1.0, 2.0),
            PhasePoint::new(-0.5, 0.3),
        ] {
            let closed = amp
                * (Complex64::new(-0.5 * PI * z0.norm_sqr(), 0.0) + PI * z.z() * z0.z().conj())
                    .exp();
            assert!((f.eval(z) - closed).norm() < 1e-11 * closed.norm().max(1.0));
        }
    }

    #[test]
    fn translation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_unit(&mut rng, 20);
        for _ in 0..50 {
            let z0 = PhasePoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let z = PhasePoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let lhs = translate_eval(&f, z0, z).norm_sqr() * (-PI * z.norm_sqr()).exp();
            let d = z - z0;
            let rhs = f.eval(d).norm_sqr() * (-PI * d.norm_sqr()).exp();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300),
                "{lhs} vs {rhs}"
            );
        }
        let z = PhasePoint::new(0.3, 0.9);
        assert_eq!(translate_eval(&f, PhasePoint::ORIGIN, z), f.eval(z));
        let e0 = FockCoefficients::basis(0, 1);
        let one = PhasePoint::new(1.0, 0.0);
        let v = translate_eval(&e0, one, one);
        assert_abs_diff_eq!(v.norm_sqr() * (-PI).exp(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn rejects_bad_coefficients() {
        assert!(FockCoefficients::new(vec![]).is_err());
        assert!(FockCoefficients::new(vec![Complex64::new(f64::NAN, 0.0)]).is_err());
        let z = FockCoefficients::new(vec![Complex64::new(0.0, 0.0); 3]).unwrap();
        assert!(matches!(z.normalized(), Err(Error::ZeroFunction)));
    }
}
