//! The metaplectic action of SL(2,ℝ) on sampled signals and the symplectic
//! covariance of STFT magnitudes.
//!
//! Generators, each defined up to a constant phase:
//!
//! * `Fourier`: `f̂(ξ) = ∫ f(x) e^{-2πixξ} dx`, realizing `[[0, 1], [-1, 0]]`;
//! * `Dilation(a)`: `|a|^{-1/2} f(x/a)`, realizing `diag(a, 1/a)`;
//! * `Chirp(C)`: `e^{πiCx²} f(x)`, realizing `[[1, 0], [C, 1]]`.
//!
//! With these, `|V_{μ(A)g} μ(A)f(z)| = |V_g f(A^{-1}z)|` for `z = (x, ω)`.
//! Every operator maps a signal to one on the same grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::fock::{FockCoefficients, PhasePoint};
use crate::gabor::{signal_to_fock, SampledSignal, MAX_HERMITE};
use crate::localization::{default_basis_size, default_order, phi_of};
use crate::{Error, Region, Result};

/// Allowed deviation of `ad - bc` from 1.
const DET_TOL: f64 = 1e-12;

/// `[[a, b], [c, d]]` with `ad - bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SL2Matrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SL2Matrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !det.is_finite() || (det - 1.0).abs() > DET_TOL {
            return Err(Error::NotSymplectic(det));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0).expect("identity")
    }

    /// Counter-clockwise rotation by `theta`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            a: c,
            b: -s,
            c: s,
            d: c,
        }
    }

    /// `[[1, 0], [c, 1]]`.
    pub fn shear(c: f64) -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c,
            d: 1.0,
        }
    }

    /// `diag(a, 1/a)`, `a ≠ 0`.
    pub fn diagonal(a: f64) -> Result<Self> {
        Self::new(a, 0.0, 0.0, 1.0 / a)
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn as_array(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn apply(&self, z: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.a * z.x + self.b * z.w, self.c * z.x + self.d * z.w)
    }

    /// Generators whose successive application realizes the matrix.
    ///
    /// For `|b| ≥ |a|`: `A = S(d/b) · J · D(1/b) · S(a/b)` with `S` the shear,
    /// `J` the Fourier matrix and `D` the dilation. For `b = 0`:
    /// `A = D(a) · S(ac)`. Otherwise `A = (AJ) · J^{-1}` with
    /// `J^{-1} = J · D(-1)`, and `AJ` has upper-right entry `a`, so no
    /// dilation factor exceeds `1/max(|a|, |b|)`. Trivial factors are dropped.
    pub fn factorization(&self) -> Vec<Generator> {
        let mut out = Vec::with_capacity(6);
        if self.b == 0.0 {
            push_chirp(&mut out, self.a * self.c);
            push_dilation(&mut out, self.a);
        } else if self.b.abs() >= self.a.abs() {
            self.push_fourier_path(&mut out);
        } else {
            out.push(Generator::Dilation(-1.0));
            out.push(Generator::Fourier);
            let aj = Self {
                a: -self.b,
                b: self.a,
                c: -self.d,
                d: self.c,
            };
            aj.push_fourier_path(&mut out);
        }
        out
    }

    fn push_fourier_path(&self, out: &mut Vec<Generator>) {
        push_chirp(out, self.a / self.b);
        push_dilation(out, 1.0 / self.b);
        out.push(Generator::Fourier);
        push_chirp(out, self.d / self.b);
    }
}

fn push_chirp(out: &mut Vec<Generator>, c: f64) {
    if c != 0.0 {
        out.push(Generator::Chirp(c));
    }
}

fn push_dilation(out: &mut Vec<Generator>, a: f64) {
    if a != 1.0 {
        out.push(Generator::Dilation(a));
    }
}

/// A generator of the metaplectic representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    Fourier,
    Dilation(f64),
    Chirp(f64),
}

/// `f̂(ξ_k) ≈ Σ_j f(x_j) e^{-2πi x_j ξ_k} dx` on the grid of `f`.
fn fourier(f: &SampledSignal) -> Result<SampledSignal> {
    let dx = f.dx();
    let out = (0..f.len())
        .map(|k| {
            let xi = f.x(k);
            let s: Complex64 = f
                .samples()
                .iter()
                .enumerate()
                .map(|(j, s)| s * Complex64::from_polar(1.0, -2.0 * PI * f.x(j) * xi))
                .sum();
            s * dx
        })
        .collect();
    SampledSignal::new(out, f.x0(), dx)
}

/// Whittaker–Shannon interpolation of the samples at `y`.
fn sinc_interpolate(f: &SampledSignal, y: f64) -> Complex64 {
    let u = (y - f.x0()) / f.dx();
    let nearest = u.round();
    if (u - nearest).abs() < 1e-12 {
        return if nearest >= 0.0 && (nearest as usize) < f.len() {
            f.samples()[nearest as usize]
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    // sin(π(u - j)) = (-1)^j sin(πu)
    let s = (PI * u).sin() / PI;
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, v) in f.samples().iter().enumerate() {
        let sign = if j % 2 == 0 { s } else { -s };
        acc += v * (sign / (u - j as f64));
    }
    acc
}

fn dilation(f: &SampledSignal, a: f64) -> Result<SampledSignal> {
    if !a.is_finite() || a == 0.0 {
        return Err(Error::InvalidInput(format!(
            "dilation needs a nonzero factor, got {a}"
        )));
    }
    let scale = a.abs().powf(-0.5);
    let out = SampledSignal::new(
        (0..f.len())
            .map(|k| sinc_interpolate(f, f.x(k) / a) * scale)
            .collect(),
        f.x0(),
        f.dx(),
    )?;
    out.check_support()?;
    Ok(out)
}

/// Applies one generator. Fourier and dilation outputs must still vanish at
/// the grid ends (`GridTooNarrow` otherwise).
pub fn apply_generator(f: &SampledSignal, g: Generator) -> Result<SampledSignal> {
    match g {
        Generator::Fourier => {
            let out = fourier(f)?;
            out.check_support()?;
            Ok(out)
        }
        Generator::Dilation(a) => dilation(f, a),
        Generator::Chirp(c) => {
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("chirp rate {c} is not finite")));
            }
            Ok(f.map_samples(|x, s| s * Complex64::from_polar(1.0, PI * c * x * x)))
        }
    }
}

/// `μ(A) f`, up to a global phase.
pub fn apply_sl2(f: &SampledSignal, a: &SL2Matrix) -> Result<SampledSignal> {
    f.check_support()?;
    a.factorization()
        .into_iter()
        .try_fold(f.clone(), |acc, g| apply_generator(&acc, g))
}

/// Both sides of the covariance identity
/// `Φ_{Ω, μ(A)φ}(μ(A)f) = Φ_{A^{-1}Ω, φ}(f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

/// `∫_Ω |V_g h|² / (‖h‖² ‖g‖²)` with `V_g h(x, ω) = ∫ h(y) conj(g(y - x))
/// e^{-2πiyω} dy`, for an arbitrary sampled window `g` on the grid of `h`.
///
/// The translates `g(· - x)` are band-limited shifts computed in the
/// frequency domain.
pub fn windowed_concentration(
    h: &SampledSignal,
    g: &SampledSignal,
    region: &Region,
    order: usize,
) -> Result<f64> {
    if h.len() != g.len() || (h.x0() - g.x0()).abs() > 1e-12 * h.dx() || h.dx() != g.dx() {
        return Err(Error::InvalidInput(
            "signal and window live on different grids".into(),
        ));
    }
    let norms = h.norm_sqr() * g.norm_sqr();
    if norms == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let n = g.len();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut spectrum = g.samples().to_vec();
    forward.process(&mut spectrum);
    let period = n as f64 * g.dx();
    let freqs: Vec<f64> = (0..n)
        .map(|k| {
            if 2 * k < n {
                k as f64 / period
            } else {
                (k as f64 - n as f64) / period
            }
        })
        .collect();

    let rule = region.quadrature(order)?;
    let mut shifted = vec![Complex64::new(0.0, 0.0); n];
    let mut total = 0.0;
    for (z, w) in rule.nodes.iter().zip(&rule.weights) {
        for k in 0..n {
            shifted[k] = if 2 * k == n {
                // Nyquist bin: keep the shift real
                spectrum[k] * (2.0 * PI * freqs[k] * z.x).cos()
            } else {
                spectrum[k] * Complex64::from_polar(1.0, -2.0 * PI * freqs[k] * z.x)
            };
        }
        inverse.process(&mut shifted);
        let s: Complex64 = h
            .samples()
            .iter()
            .zip(&shifted)
            .enumerate()
            .map(|(j, (a, b))| a * b.conj() * Complex64::from_polar(1.0, -2.0 * PI * h.x(j) * z.w))
            .sum();
        let v = s * h.dx() / n as f64;
        total += w * v.norm_sqr();
    }
    Ok(total / norms)
}

/// Fock coefficients of `f` on the smallest basis `32·2^k` that keeps all
/// but [`crate::gabor::DEFAULT_FOCK_TOL`] of the energy.
fn fock_image(f: &SampledSignal) -> Result<FockCoefficients> {
    let mut n = 32;
    loop {
        match signal_to_fock(f, n) {
            Err(Error::BasisTooSmall { .. }) if n < MAX_HERMITE => n = (2 * n).min(MAX_HERMITE),
            other => return other,
        }
    }
}

/// Compares the concentration of `μ(A)f` against the window `μ(A)φ` on `Ω`
/// (computed on the sampling grid) with the Fock-space concentration of `f`
/// on `A^{-1}Ω`.
///
/// The STFT at `(x, ω)` corresponds to the Bargmann transform at
/// `x - iω`, so the Fock side uses the reflection of `A^{-1}Ω`.
pub fn covariance_check(
    f: &SampledSignal,
    a: &SL2Matrix,
    region: &Region,
) -> Result<CovarianceReport> {
    region.validate()?;
    let axis = f.axis();
    let window = SampledSignal::from_fn(axis, |x| Complex64::new(crate::gabor::phi(x), 0.0))?;
    let h = apply_sl2(f, a)?;
    let g = apply_sl2(&window, a)?;
    let lhs = windowed_concentration(&h, &g, region, default_order(default_basis_size(region)))?;

    let pulled =
        Region::affine(a.inverse().as_array(), PhasePoint::ORIGIN, region.clone()).reflected();
    let fock = fock_image(f)?;
    let n = fock.basis_size().max(default_basis_size(&pulled));
    let rhs = phi_of(&fock, &pulled, default_order(n))?;
    let rel_err = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
    Ok(CovarianceReport { lhs, rhs, rel_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::{default_signal_axis, gaussian_window, hermite_function, Axis};

    fn gauss() -> SampledSignal {
        gaussian_window(0.0, 0.0, default_signal_axis()).unwrap()
    }

    fn test_matrices() -> Vec<SL2Matrix> {
        vec![
            SL2Matrix::identity(),
            SL2Matrix::rotation(0.5 * PI),
            SL2Matrix::shear(0.5),
            SL2Matrix::diagonal(2.0).unwrap(),
        ]
    }

    /// Distance between `a` and `b` after removing the best global phase.
    fn phase_distance(a: &SampledSignal, b: &SampledSignal) -> f64 {
        let ip = a.inner(b).unwrap();
        let theta = Complex64::from_polar(1.0, -ip.arg());
        a.scaled(theta).distance(b).unwrap()
    }

    #[test]
    fn rejects_non_unimodular_matrices() {
        assert!(matches!(
            SL2Matrix::new(1.0, 0.0, 0.0, 2.0),
            Err(Error::NotSymplectic(_))
        ));
        assert!(SL2Matrix::new(2.0, 0.0, 0.0, 0.5).is_ok());
        let r = SL2Matrix::rotation(0.3);
        assert!((r.a * r.d - r.b * r.c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn factorizations_multiply_back() {
        fn matrix(g: Generator) -> [[f64; 2]; 2] {
            match g {
                Generator::Fourier => [[0.0, 1.0], [-1.0, 0.0]],
                Generator::Dilation(a) => [[a, 0.0], [0.0, 1.0 / a]],
                Generator::Chirp(c) => [[1.0, 0.0], [c, 1.0]],
            }
        }
        let mut cases = test_matrices();
        cases.push(SL2Matrix::new(2.0, 3.0, 1.0, 2.0).unwrap());
        cases.push(SL2Matrix::new(-0.5, 0.0, 4.0, -2.0).unwrap());
        cases.push(SL2Matrix::new(3.0, 1e-3, 2.0, (1.0 + 2e-3) / 3.0).unwrap());
        cases.push(SL2Matrix::rotation(PI));
        cases.push(SL2Matrix::rotation(2.5));
        for a in cases {
            let mut m = [[1.0, 0.0], [0.0, 1.0]];
            for g in a.factorization() {
                let s = matrix(g);
                m = [
                    [
                        s[0][0] * m[0][0] + s[0][1] * m[1][0],
                        s[0][0] * m[0][1] + s[0][1] * m[1][1],
                    ],
                    [
                        s[1][0] * m[0][0] + s[1][1] * m[1][0],
                        s[1][0] * m[0][1] + s[1][1] * m[1][1],
                    ],
                ];
            }
            let want = a.as_array();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((m[i][j] - want[i][j]).abs() < 1e-14, "{a:?}: {m:?}");
                }
            }
        }
        assert_eq!(
            SL2Matrix::new(0.0, 1.0, -1.0, 0.0).unwrap().factorization(),
            vec![Generator::Fourier]
        );
        assert_eq!(
            SL2Matrix::shear(0.5).factorization(),
            vec![Generator::Chirp(0.5)]
        );
    }

    #[test]
    fn generator_examples() {
        let f = gauss();
        assert_eq!(apply_generator(&f, Generator::Chirp(0.0)).unwrap(), f);

        let ft = apply_generator(&f, Generator::Fourier).unwrap();
        assert!(phase_distance(&ft, &f) < 1e-6);

        let wide = apply_generator(&f, Generator::Dilation(2.0)).unwrap();
        for (j, s) in wide.samples().iter().enumerate() {
            let x = wide.x(j);
            let want = crate::gabor::phi(x / 2.0) / 2f64.sqrt();
            assert!((s - want).norm() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn dilation_of_an_off_grid_signal() {
        // a modulated, shifted Gaussian dilated by an irrational factor
        let axis = default_signal_axis();
        let f = gaussian_window(0.4, 1.3, axis).unwrap();
        let a = 0.5f64.sqrt();
        let g = apply_generator(&f, Generator::Dilation(a)).unwrap();
        let want = SampledSignal::from_fn(axis, |x| {
            let y = x / a;
            Complex64::from_polar(crate::gabor::phi(y - 0.4), 2.0 * PI * 1.3 * y) / a.sqrt()
        })
        .unwrap();
        assert!(g.distance(&want).unwrap() < 1e-9);
    }

    #[test]
    fn too_wide_results_are_rejected() {
        let f = gauss();
        assert!(matches!(
            apply_generator(&f, Generator::Dilation(4.0)),
            Err(Error::GridTooNarrow(_))
        ));
        let narrow = SampledSignal::from_fn(Axis::span(-3.0, 3.0, 1.0 / 64.0).unwrap(), |x| {
            Complex64::new((-PI * x * x / 16.0).exp(), 0.0)
        })
        .unwrap();
        assert!(apply_sl2(&narrow, &SL2Matrix::identity()).is_err());
    }

    #[test]
    fn action_is_unitary() {
        let axis = default_signal_axis();
        let signals = [
            gauss(),
            hermite_function(1, axis).unwrap(),
            gaussian_window(0.5, -0.8, axis).unwrap(),
        ];
        for f in &signals {
            for a in test_matrices() {
                let g = apply_sl2(f, &a).unwrap();
                assert!((g.norm() - f.norm()).abs() < 1e-7, "{a:?}");
            }
            for g in [
                Generator::Fourier,
                Generator::Chirp(-1.5),
                Generator::Dilation(0.7),
            ] {
                let out = apply_generator(f, g).unwrap();
                assert!((out.norm() - f.norm()).abs() < 1e-8, "{g:?}");
            }
        }
    }

    #[test]
    fn identity_leaves_the_signal_alone() {
        let f = hermite_function(2, default_signal_axis()).unwrap();
        assert_eq!(apply_sl2(&f, &SL2Matrix::identity()).unwrap(), f);
    }

    #[test]
    fn fourier_twice_reflects() {
        // F² f(x) = f(-x)
        let axis = default_signal_axis();
        let f = gaussian_window(0.6, 0.9, axis).unwrap();
        let ff = apply_sl2(&f, &SL2Matrix::rotation(PI)).unwrap();
        let want = gaussian_window(-0.6, -0.9, axis).unwrap();
        assert!(phase_distance(&ff, &want) < 1e-8);
    }

    #[test]
    fn magnitudes_are_covariant() {
        // |V_{μ(A)φ} μ(A)f (z)| = |V_φ f(A^{-1} z)| pointwise, checked with a
        // one-node region so the windowed integral is a single sample
        let axis = default_signal_axis();
        let f = gaussian_window(0.3, -0.5, axis).unwrap();
        let window = gauss();
        for a in [
            SL2Matrix::shear(1.0),
            SL2Matrix::rotation(0.4),
            SL2Matrix::diagonal(1.5).unwrap(),
        ] {
            let h = apply_sl2(&f, &a).unwrap();
            let g = apply_sl2(&window, &a).unwrap();
            for z in [
                PhasePoint::new(0.2, 0.1),
                PhasePoint::new(-0.7, 0.9),
                PhasePoint::new(1.1, -0.4),
            ] {
                let p = a.inverse().apply(z);
                let want = crate::gabor::stft_at(&f, p.x, p.w).norm();
                let got = pointwise(&h, &g, z);
                assert!((got - want).abs() < 1e-8, "{a:?} at {z:?}: {got} vs {want}");
            }
        }
    }

    /// `|V_g h(z)|` by direct evaluation of the exact translate.
    fn pointwise(h: &SampledSignal, g: &SampledSignal, z: PhasePoint) -> f64 {
        let s: Complex64 = (0..h.len())
            .map(|j| {
                let y = h.x(j);
                h.samples()[j]
                    * sinc_interpolate(g, y - z.x).conj()
                    * Complex64::from_polar(1.0, -2.0 * PI * y * z.w)
            })
            .sum();
        (s * h.dx()).norm()
    }

    #[test]
    fn covariance_on_the_test_grid() {
        let axis = default_signal_axis();
        let disk = Region::disk(PhasePoint::ORIGIN, 1.0);
        let sheared = Region::affine([[1.0, 0.5], [0.0, 1.0]], PhasePoint::ORIGIN, disk.clone());
        let signals = [gauss(), hermite_function(1, axis).unwrap()];
        for a in [SL2Matrix::rotation(0.5 * PI), SL2Matrix::shear(1.0)] {
            for region in [&disk, &sheared] {
                for f in &signals {
                    let r = covariance_check(f, &a, region).unwrap();
                    assert!(r.rel_err <= 1e-3, "{a:?} {region:?}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn covariance_examples() {
        let extremal = 1.0 - (-PI).exp();
        let disk = Region::disk(PhasePoint::ORIGIN, 1.0);
        let r = covariance_check(&gauss(), &SL2Matrix::rotation(0.5 * PI), &disk).unwrap();
        assert!(
            (r.lhs - extremal).abs() < 1e-4 && (r.rhs - extremal).abs() < 1e-4,
            "{r:?}"
        );

        let id = covariance_check(&gauss(), &SL2Matrix::identity(), &disk).unwrap();
        assert!(id.rel_err < 1e-8, "{id:?}");

        // the sheared disk is not a disk, so φ is no longer extremal for it
        let shear = covariance_check(&gauss(), &SL2Matrix::shear(1.0), &disk).unwrap();
        assert!(
            shear.rel_err < 1e-3 && shear.rhs < extremal - 1e-3,
            "{shear:?}"
        );
    }

    #[test]
    fn optimal_window_transfers() {
        let a = SL2Matrix::shear(1.0);
        let g = apply_sl2(&gauss(), &a).unwrap();
        let image = Region::affine(
            a.as_array(),
            PhasePoint::ORIGIN,
            Region::disk(PhasePoint::ORIGIN, 1.0),
        );
        let c = windowed_concentration(&g, &g, &image, 48).unwrap();
        assert!((c - (1.0 - (-PI).exp())).abs() < 1e-3, "{c}");
    }
}
