//! The localization operator `V* 1_Ω V` in the monomial basis.
//!
//! In the Fock model the operator has entries
//! `M_{jk} = ∫_Ω e_j(z) conj(e_k(z)) e^{-π|z|²} dz`, and its largest
//! eigenvalue is the best fraction of energy any signal can put in `Ω`.

use std::f64::consts::PI;

use faer::{c64, Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bounds::{faber_krahn_bound, gamma_ratio};
use crate::fock::{fock_lp_integral, FockCoefficients, PhasePoint};
use crate::quadrature::QuadratureRule;
use crate::regions::Region;
use crate::{Error, Result};

/// Admissible exponents for the `L^p` functionals.
pub const P_RANGE: (f64, f64) = (1.0, 64.0);
const MIN_BASIS: usize = 8;
const EIGEN_RESIDUAL_TOL: f64 = 1e-11;

/// Basis size that captures the modes living on the region's bounding disk:
/// `⌈πR²⌉ + ⌈8√(πR²)⌉ + 16`.
pub fn default_basis_size(region: &Region) -> usize {
    let (_, r) = region.bounding_disk();
    let s = PI * r * r;
    s.ceil() as usize + (8.0 * s.sqrt()).ceil() as usize + 16
}

/// Quadrature order matched to a basis of size `n`.
pub fn default_order(n: usize) -> usize {
    n.max(32)
}

/// `e_k(z) e^{-π|z|²/2}` for `k < n`.
fn weighted_monomials(z: PhasePoint, n: usize) -> Vec<Complex64> {
    let zc = z.z();
    let half = 0.5 * PI * z.norm_sqr();
    let mut out = Vec::with_capacity(n);
    if half < 600.0 {
        let mut ek = Complex64::new((-half).exp(), 0.0);
        out.push(ek);
        for k in 1..n {
            ek *= zc * (PI / k as f64).sqrt();
            out.push(ek);
        }
    } else {
        // the Gaussian alone underflows; go through logarithms
        let (r, th) = (z.norm(), z.w.atan2(z.x));
        let mut log_mag = -half;
        out.push(Complex64::new(log_mag.exp(), 0.0));
        for k in 1..n {
            log_mag += r.ln() + 0.5 * (PI / k as f64).ln();
            out.push(Complex64::from_polar(log_mag.exp(), k as f64 * th));
        }
    }
    out
}

/// The matrix of `V* 1_Ω V` on `e_0, …, e_{N-1}`.
#[derive(Debug, Clone)]
pub struct LocalizationMatrix {
    pub entries: DMatrix<Complex64>,
    pub region_measure: f64,
    pub basis_size: usize,
    /// Translation applied to the region before assembly.
    pub center: PhasePoint,
}

/// Eigenvalues in decreasing order with matching unit eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl Spectrum {
    /// The top eigenvector as Fock coefficients (in the recentred frame).
    pub fn top_vector(&self) -> FockCoefficients {
        let v: Vec<Complex64> = self.vectors.column(0).iter().copied().collect();
        FockCoefficients::new(v).expect("eigenvectors are finite")
    }
}

impl LocalizationMatrix {
    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|c| c.re).sum()
    }

    /// Full spectrum, checking `‖Mv - λv‖ ≤ 1e-11 ‖M‖` for every pair.
    pub fn spectrum(&self) -> Result<Spectrum> {
        let n = self.basis_size;
        let m = Mat::<c64>::from_fn(n, n, |r, c| {
            let e = self.entries[(r, c)];
            c64::new(e.re, e.im)
        });
        let eig = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::EigenResidual {
                residual: f64::INFINITY,
                tol: EIGEN_RESIDUAL_TOL,
            })?;
        let (s, u) = (eig.S(), eig.U());
        // faer sorts ascending
        let values: Vec<f64> = (0..n).rev().map(|i| s[i].re).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| {
            let v = u[(r, n - 1 - c)];
            Complex64::new(v.re, v.im)
        });
        let scale = values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for (c, &lambda) in values.iter().enumerate() {
            let v: DVector<Complex64> = vectors.column(c).into_owned();
            let r = &self.entries * &v - &v * Complex64::new(lambda, 0.0);
            worst = worst.max(r.norm() / scale);
        }
        if worst > EIGEN_RESIDUAL_TOL {
            return Err(Error::EigenResidual {
                residual: worst,
                tol: EIGEN_RESIDUAL_TOL,
            });
        }
        Ok(Spectrum { values, vectors })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.spectrum()?.values)
    }
}

/// Assemble `M_{jk}` for `j, k < n` with a quadrature rule of the given order.
///
/// The region is first translated so that its bounding disk is centred at
/// the origin; the spectrum is unchanged (the translation is unitary) and the
/// eigenvectors need far fewer modes.
pub fn assemble(region: &Region, n: usize, order: usize) -> Result<LocalizationMatrix> {
    if n < MIN_BASIS {
        return Err(Error::InvalidInput(format!(
            "basis size must be at least {MIN_BASIS}, got {n}"
        )));
    }
    let region_measure = region.measure()?;
    let (center, _) = region.bounding_disk();
    let local = region
        .clone()
        .translated(PhasePoint::new(-center.x, -center.w));
    let rule = local.quadrature(order)?;
    let mut entries = gram(&rule, n);
    // exact Hermitian symmetry
    let adj = entries.adjoint();
    entries = (entries + adj) * Complex64::new(0.5, 0.0);
    Ok(LocalizationMatrix {
        entries,
        region_measure,
        basis_size: n,
        center,
    })
}

/// `Σ_i w_i v_j(z_i) conj(v_k(z_i))`.
fn gram(rule: &QuadratureRule, n: usize) -> DMatrix<Complex64> {
    let m = rule.len();
    let mut b = DMatrix::<Complex64>::zeros(m, n);
    for (i, (&z, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let sw = w.sqrt();
        for (k, v) in weighted_monomials(z, n).into_iter().enumerate() {
            b[(i, k)] = v * sw;
        }
    }
    // (B^H B)_{jk} = Σ conj(v_j) v_k = conj(M_{jk})
    (b.adjoint() * &b).map(|c| c.conj())
}

/// `γ(k+1, πr²)/k!`, `k < n`: the spectrum for a centred disk of radius `r`.
pub fn radial_eigenvalues(r: f64, n: usize) -> Vec<f64> {
    assert!(r > 0.0);
    (0..n as u64)
        .map(|k| gamma_ratio(k + 1, PI * r * r))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReport {
    pub phi: f64,
    pub sharp_bound: f64,
    pub gap: f64,
    pub measure: f64,
    pub basis_size: usize,
    /// Mass of the Poisson(πR²) distribution at or beyond `N`, `R` the radius
    /// of the (recentred) bounding disk: the share of the modes living on
    /// that disk that the basis leaves out.
    pub truncation_estimate: f64,
}

/// Best concentration on `region`, with the sharp bound `1 - e^{-|Ω|}`.
pub fn phi_max(region: &Region, n: usize, order: usize) -> Result<ConcentrationReport> {
    let m = assemble(region, n, order)?;
    let phi = m.eigenvalues()?[0];
    let sharp_bound = faber_krahn_bound(1, m.region_measure);
    let (_, r) = region.bounding_disk();
    Ok(ConcentrationReport {
        phi,
        sharp_bound,
        gap: sharp_bound - phi,
        measure: m.region_measure,
        basis_size: n,
        truncation_estimate: gamma_ratio(n as u64, PI * r * r),
    })
}

/// [`phi_max`] with [`default_basis_size`] and [`default_order`].
pub fn phi_max_default(region: &Region) -> Result<ConcentrationReport> {
    let n = default_basis_size(region);
    phi_max(region, n, default_order(n))
}

/// Fraction of the energy of `F` in the region:
/// `∫_Ω |F|² e^{-π|z|²} / ‖F‖²`.
pub fn phi_of(f: &FockCoefficients, region: &Region, order: usize) -> Result<f64> {
    let norm2 = f.norm().powi(2);
    if norm2 == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let rule = region.quadrature(order)?;
    Ok(rule.integrate(|z| f.density(z)) / norm2)
}

fn check_p(p: f64, min: f64) -> Result<()> {
    if !(p >= min && p <= P_RANGE.1) {
        return Err(Error::BadExponent(p));
    }
    Ok(())
}

fn local_lp_integral(f: &FockCoefficients, region: &Region, p: f64, order: usize) -> Result<f64> {
    let rule = region.quadrature(order)?;
    Ok(rule.integrate(|z| f.weighted_eval(z).norm().powf(p)))
}

/// `∫_Ω |F|^p e^{-pπ|z|²/2} / ∫_{ℝ²} |F|^p e^{-pπ|z|²/2}`, `p ∈ [1, 64]`.
pub fn lp_concentration(
    f: &FockCoefficients,
    region: &Region,
    p: f64,
    order: usize,
) -> Result<f64> {
    check_p(p, P_RANGE.0)?;
    if f.norm() == 0.0 {
        return Err(Error::ZeroFunction);
    }
    if p == 2.0 {
        return phi_of(f, region, order);
    }
    let total = fock_lp_integral(f, p, order)?;
    Ok(local_lp_integral(f, region, p, order)? / total)
}

/// `∫_Ω |F|^p e^{-pπ|z|²/2} / ‖F‖_{F²}^p`, `p ∈ [2, 64]`.
pub fn local_lieb(f: &FockCoefficients, region: &Region, p: f64, order: usize) -> Result<f64> {
    check_p(p, 2.0)?;
    let norm = f.norm();
    if norm == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(local_lp_integral(f, region, p, order)? / norm.powf(p))
}
