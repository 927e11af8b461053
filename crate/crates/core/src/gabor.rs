//! Sampled signals, the discretized STFT with the Gaussian window, and the
//! passage from a signal to its Fock coefficients.
//!
//! `Vf(x,ω) = ∫ e^{-2πiyω} f(y) φ(x-y) dy` is approximated by the Riemann
//! sum over the signal grid, which is spectrally accurate for the smooth,
//! rapidly decaying signals this crate deals with. Grids are stored in
//! `(x, ω)`; the reflection `ω ↦ -ω` relating the STFT to the Bargmann
//! transform is applied only in [`bargmann_identity_check`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::fock::{FockCoefficients, PhasePoint};
use crate::{Error, Result};

/// `2^{1/4}`, the normalization of the Gaussian window.
const PHI_NORM: f64 = 1.189_207_115_002_721;
/// Beyond this distance the window is below `1e-57` and is skipped.
const WINDOW_CUTOFF: f64 = 6.5;
/// Endpoint magnitude, relative to the peak, above which a grid is too narrow.
const SUPPORT_TOL: f64 = 1e-8;
/// Largest Hermite expansion produced by [`signal_to_fock`].
pub const MAX_HERMITE: usize = 256;
/// Default relative mass that [`signal_to_fock`] may drop.
pub const DEFAULT_FOCK_TOL: f64 = 1e-8;

/// Equispaced points `origin + i·step`, `i < count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(origin: f64, step: f64, count: usize) -> Result<Self> {
        if !origin.is_finite() || !step.is_finite() || step <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "axis needs a finite origin and a positive step, got {origin}, {step}"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidInput("axis needs at least two points".into()));
        }
        Ok(Self {
            origin,
            step,
            count,
        })
    }

    /// Points from `a` to `b` (both included) at spacing `step`; `b - a` must
    /// be a multiple of `step` up to rounding.
    pub fn span(a: f64, b: f64, step: f64) -> Result<Self> {
        let n = (b - a) / step;
        if !n.is_finite() || n < 1.0 || (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "[{a}, {b}] is not a whole number of steps {step}"
            )));
        }
        Self::new(a, step, n.round() as usize + 1)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.point(self.count - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.point(i))
    }
}

/// `x ∈ [-8, 8]` at spacing `1/64`.
pub fn default_signal_axis() -> Axis {
    Axis::span(-8.0, 8.0, 1.0 / 64.0).expect("valid default axis")
}

/// `(x, ω) ∈ [-6, 6]²` at spacing `1/32`.
pub fn default_stft_axes() -> (Axis, Axis) {
    let a = Axis::span(-6.0, 6.0, 1.0 / 32.0).expect("valid default axis");
    (a, a)
}

/// Samples `f(x0 + j·dx)` of a signal on the line.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<Complex64>,
    x0: f64,
    dx: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<Complex64>, x0: f64, dx: f64) -> Result<Self> {
        Axis::new(x0, dx, samples.len())?;
        if let Some(j) = samples
            .iter()
            .position(|s| !s.re.is_finite() || !s.im.is_finite())
        {
            return Err(Error::InvalidInput(format!("sample {j} is not finite")));
        }
        Ok(Self { samples, x0, dx })
    }

    pub fn from_fn(axis: Axis, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(axis.points().map(f).collect(), axis.origin, axis.step)
    }

    pub fn zeros(axis: Axis) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); axis.count],
            x0: axis.origin,
            dx: axis.step,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn axis(&self) -> Axis {
        Axis {
            origin: self.x0,
            step: self.dx,
            count: self.samples.len(),
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn norm_sqr(&self) -> f64 {
        self.dx * self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>()
    }

    /// Discrete `L²` norm, `(Σ|f_j|² dx)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self, other⟩ = Σ f_j conj(g_j) dx` on a common grid.
    pub fn inner(&self, other: &SampledSignal) -> Result<Complex64> {
        self.same_grid(other)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * self.dx)
    }

    /// Discrete `L²` distance on a common grid.
    pub fn distance(&self, other: &SampledSignal) -> Result<f64> {
        self.same_grid(other)?;
        let s: f64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.dx).sqrt())
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * a).collect(),
            ..*self
        }
    }

    pub fn map_samples(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        Self {
            samples: (0..self.len())
                .map(|j| f(self.x(j), self.samples[j]))
                .collect(),
            ..*self
        }
    }

    fn same_grid(&self, other: &SampledSignal) -> Result<()> {
        if self.len() != other.len()
            || (self.x0 - other.x0).abs() > 1e-12 * self.dx
            || (self.dx - other.dx).abs() > 1e-15 * self.dx
        {
            return Err(Error::InvalidInput(
                "signals live on different grids".into(),
            ));
        }
        Ok(())
    }

    /// The grid must reach past the signal: both endpoint magnitudes below
    /// `1e-8` of the peak. The zero signal passes.
    pub fn check_support(&self) -> Result<()> {
        let peak = self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return Ok(());
        }
        let ends = self.samples[0]
            .norm()
            .max(self.samples[self.len() - 1].norm());
        if ends >= SUPPORT_TOL * peak {
            return Err(Error::GridTooNarrow(format!(
                "endpoint magnitude {:.3e} of peak {:.3e} on [{}, {}]",
                ends,
                peak,
                self.x0,
                self.x(self.len() - 1)
            )));
        }
        Ok(())
    }
}

/// `Vf` sampled on a rectangular grid; `values[(i, j)] = Vf(x_i, ω_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct STFTGrid {
    pub x_axis: Axis,
    pub w_axis: Axis,
    pub values: DMatrix<Complex64>,
}

impl STFTGrid {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[(i, j)]
    }

    /// Riemann sum of `|Vf|²` over the grid.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.x_axis.step * self.w_axis.step
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `φ(x) = 2^{1/4} e^{-πx²}`.
pub fn phi(x: f64) -> f64 {
    PHI_NORM * (-PI * x * x).exp()
}

/// Samples of `M_{w0} T_{x0} φ`, i.e. `e^{2πi w0 x} φ(x - x0)`.
pub fn gaussian_window(x0: f64, w0: f64, axis: Axis) -> Result<SampledSignal> {
    if axis.origin > x0 - 5.0 || axis.end() < x0 + 5.0 {
        return Err(Error::GridTooNarrow(format!(
            "[{}, {}] does not cover [{}, {}]",
            axis.origin,
            axis.end(),
            x0 - 5.0,
            x0 + 5.0
        )));
    }
    SampledSignal::from_fn(axis, |x| {
        Complex64::from_polar(phi(x - x0), 2.0 * PI * w0 * x)
    })
}

/// Index range of samples within the window cutoff of `x`.
fn window_range(f: &SampledSignal, x: f64) -> std::ops::Range<usize> {
    let lo = ((x - WINDOW_CUTOFF - f.x0) / f.dx).floor().max(0.0) as usize;
    let hi = (((x + WINDOW_CUTOFF - f.x0) / f.dx).ceil() + 1.0).clamp(0.0, f.len() as f64) as usize;
    lo.min(hi)..hi
}

/// Riemann-sum STFT of `f` with the Gaussian window on `x_axis × w_axis`.
///
/// Each cell is summed in increasing sample order, so results do not depend
/// on how rows are scheduled.
pub fn stft(f: &SampledSignal, x_axis: Axis, w_axis: Axis) -> STFTGrid {
    let n = f.len();
    // twiddles[j * n + k] = e^{-2πi y_k ω_j}
    let mut twiddles = Vec::with_capacity(w_axis.count * n);
    for w in w_axis.points() {
        for k in 0..n {
            twiddles.push(Complex64::from_polar(1.0, -2.0 * PI * f.x(k) * w));
        }
    }
    let mut values = DMatrix::zeros(x_axis.count, w_axis.count);
    let mut windowed = Vec::with_capacity(n);
    for (i, x) in x_axis.points().enumerate() {
        let range = window_range(f, x);
        windowed.clear();
        windowed.extend(range.clone().map(|k| f.samples[k] * phi(x - f.x(k))));
        for j in 0..w_axis.count {
            let tw = &twiddles[j * n + range.start..j * n + range.end];
            let s: Complex64 = windowed.iter().zip(tw).map(|(a, b)| a * b).sum();
            values[(i, j)] = s * f.dx;
        }
    }
    STFTGrid {
        x_axis,
        w_axis,
        values,
    }
}

/// `Vf(x, ω)` at a single point.
pub fn stft_at(f: &SampledSignal, x: f64, w: f64) -> Complex64 {
    let s: Complex64 = window_range(f, x)
        .map(|k| {
            let y = f.x(k);
            f.samples[k] * Complex64::from_polar(phi(x - y), -2.0 * PI * y * w)
        })
        .sum();
    s * f.dx
}

/// `h_0(x), …, h_{n-1}(x)` where `h_k(x) = (2π)^{1/4} ψ_k(√(2π) x)` and `ψ_k`
/// are the standard Hermite functions; `h_0 = φ` and `B h_k = e_k`.
///
/// Three-term recurrence with a running exponent, so values stay accurate
/// where `e^{-πx²}` alone would underflow.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let xi = (2.0 * PI).sqrt() * x;
    // value = p · e^{log_scale}
    let mut log_scale = -0.5 * xi * xi + 0.25 * (2.0f64).ln();
    let mut out = Vec::with_capacity(n);
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        out.push(cur * log_scale.exp());
        let next =
            (2.0 / (k + 1) as f64).sqrt() * xi * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > 1e100 {
            prev *= 1e-100;
            cur *= 1e-100;
            log_scale += 100.0 * 10f64.ln();
        }
    }
    out
}

/// Samples of `h_k` on `axis`.
pub fn hermite_function(k: usize, axis: Axis) -> Result<SampledSignal> {
    SampledSignal::from_fn(axis, |x| {
        Complex64::new(hermite_functions(k + 1, x)[k], 0.0)
    })
}

/// Fock coefficients `c_k = ⟨f, h_k⟩`, `k < n`, dropping at most
/// [`DEFAULT_FOCK_TOL`] of the energy.
pub fn signal_to_fock(f: &SampledSignal, n: usize) -> Result<FockCoefficients> {
    signal_to_fock_with_tol(f, n, DEFAULT_FOCK_TOL)
}

/// As [`signal_to_fock`], failing with `BasisTooSmall` when
/// `‖f‖² - ‖c‖² > tol · ‖f‖²`.
pub fn signal_to_fock_with_tol(f: &SampledSignal, n: usize, tol: f64) -> Result<FockCoefficients> {
    if n == 0 || n > MAX_HERMITE {
        return Err(Error::InvalidInput(format!(
            "basis size must lie in 1..={MAX_HERMITE}, got {n}"
        )));
    }
    f.check_support()?;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (j, s) in f.samples.iter().enumerate() {
        if *s == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (c, h) in coeffs.iter_mut().zip(hermite_functions(n, f.x(j))) {
            *c += s * h;
        }
    }
    for c in &mut coeffs {
        *c *= f.dx;
    }
    let energy = f.norm_sqr();
    let kept: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let dropped = (energy - kept) / energy.max(f64::MIN_POSITIVE);
    if dropped > tol {
        return Err(Error::BasisTooSmall {
            basis_size: n,
            dropped,
            tol,
        });
    }
    FockCoefficients::new(coeffs)
}

/// Worst relative discrepancy between `|Vf(x, -ω)|` and
/// `|F(z)| e^{-π|z|²/2}`, `z = x + iω`, `F` the Fock image of `f` on `n`
/// basis functions.
///
/// Discrepancies are measured relative to `max(|F(z)| e^{-π|z|²/2}, 1e-3 ‖f‖)`
/// so that points in the far tails, where both sides are negligible, do not
/// dominate.
pub fn bargmann_identity_check(f: &SampledSignal, n: usize, points: &[PhasePoint]) -> Result<f64> {
    let fock = signal_to_fock(f, n)?;
    let floor = 1e-3 * f.norm();
    let mut worst = 0.0f64;
    for &z in points {
        let lhs = stft_at(f, z.x, -z.w).norm();
        let rhs = fock.weighted_eval(z).norm();
        let scale = rhs.max(floor);
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(worst)
}

/// The signals used to check the discretization: `φ`, a translated and
/// modulated Gaussian, and a combination of `h_0, h_1, h_2`.
pub fn standard_test_signals(axis: Axis) -> Result<Vec<(&'static str, SampledSignal)>> {
    let gauss = gaussian_window(0.0, 0.0, axis)?;
    let shifted = gaussian_window(0.7, -1.1, axis)?;
    let coeffs = [
        Complex64::new(0.6, 0.0),
        Complex64::new(0.0, 0.48),
        Complex64::new(-0.64, 0.0),
    ];
    let hermite = SampledSignal::from_fn(axis, |x| {
        hermite_functions(3, x)
            .into_iter()
            .zip(coeffs)
            .map(|(h, c)| c * h)
            .sum()
    })?;
    Ok(vec![
        ("gaussian", gauss),
        ("modulated", shifted),
        ("hermite3", hermite),
    ])
}

/// A spread of phase-space points, out to radius 2.5.
pub fn standard_sample_points() -> Vec<PhasePoint> {
    let mut pts = vec![PhasePoint::ORIGIN];
    for ring in 1..=5 {
        let r = 0.5 * ring as f64;
        for j in 0..8 {
            let th = 2.0 * PI * (j as f64 + 0.5 * ring as f64) / 8.0;
            pts.push(PhasePoint::new(r * th.cos(), r * th.sin()));
        }
    }
    pts
}
