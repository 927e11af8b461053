//! Distribution function, decreasing rearrangement and super-level integrals
//! of the energy density `u(z) = |F(z)|² e^{-π|z|²}`.
//!
//! Every vertical line `x = const` meets `{u > t}` in finitely many chords.
//! Their end points are found exactly: the local extrema of `u` along the
//! line split it into monotone pieces, and each piece crosses the level at
//! most once. The line integrals (chord length, `∫(u - t)_+`) are then
//! smooth in `x` except where a chord is born or dies, which happens where
//! the value of some line extremum passes through `t`. Those points are
//! located by following the extremum, and the outer integral is split there
//! with a cosine substitution that absorbs the square-root behaviour. Panel
//! breaks are also placed at the critical points of `u` and at the folds of
//! the line extrema, so that between breaks every extremum value is monotone
//! and each can produce at most one such event.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::fock::{FockCoefficients, PhasePoint};
use crate::quadrature::gauss_legendre;
use crate::{Error, Result};

/// Densities below this value are treated as outside the computational disk.
const T_FLOOR: f64 = 1e-16;
/// Sampling step for locating extrema along a line.
const LINE_STEP: f64 = 0.025;
const PANEL_WIDTH: f64 = 0.5;
/// Initial width of the adaptive pieces of the outer integral.
const PIECE_WIDTH: f64 = 1.0;
const GL_ORDER: usize = 16;
/// Longest chord piece integrated with one Gauss–Legendre rule.
const CHORD_PIECE: f64 = 0.5;
/// Panel end lines are taken this far inside, so that a fold or critical
/// point sitting exactly on a break does not change the line structure.
const END_OFFSET: f64 = 1e-10;
/// Accepted disagreement per unit length between a piece and its halves.
const REFINE_TOL: f64 = 1e-9;
const MAX_REFINE: usize = 10;
/// Positive Gauss–Kronrod 21-point nodes, descending; odd entries are the
/// 10-point Gauss nodes.
const KRONROD_X: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const KRONROD_W: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
const GAUSS10_W: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];
/// Largest `s` accepted by [`rearrangement_profile`].
pub const MAX_S: f64 = 20.0;
/// Fewest profile nodes accepted by [`rearrangement_profile`].
pub const MIN_NODES: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Derivs {
    u: f64,
    ux: f64,
    uw: f64,
    uww: f64,
}

#[derive(Debug, Clone, Copy)]
struct Extremum {
    w: f64,
    v: f64,
    is_max: bool,
}

/// Local extrema of `ω ↦ u(x, ω)` on the chord `|ω| ≤ half` of the
/// computational disk.
#[derive(Debug, Clone)]
struct Line {
    x: f64,
    half: f64,
    ext: Vec<Extremum>,
}

impl Line {
    fn same_structure(&self, other: &Line) -> bool {
        self.ext.len() == other.ext.len()
            && self
                .ext
                .iter()
                .zip(&other.ext)
                .all(|(a, b)| a.is_max == b.is_max)
    }

    /// Number of monotone pieces crossing level `t`.
    fn crossing_count(&self, t: f64) -> usize {
        let mut count = 0;
        let mut prev = f64::NEG_INFINITY;
        for e in &self.ext {
            if (prev < t) != (e.v < t) && prev != t && e.v != t {
                count += 1;
            }
            prev = e.v;
        }
        if prev > t {
            count += 1;
        }
        count
    }
}

#[derive(Debug, Clone)]
struct Panel {
    b: f64,
    /// Lines at `a⁺`, the Gauss nodes, and `b⁻`.
    samples: Vec<Line>,
}

/// Line integrals at one `x`.
#[derive(Debug, Clone, Copy, Default)]
struct LineQuantities {
    /// `|{ω : u > t}|`
    len: f64,
    /// `d len / dt`
    dlen: f64,
    /// `∫ (u - t)_+ dω`
    excess: f64,
}

impl std::ops::AddAssign<(f64, LineQuantities)> for LineQuantities {
    fn add_assign(&mut self, (w, q): (f64, LineQuantities)) {
        self.len += w * q.len;
        self.dlen += w * q.dlen;
        self.excess += w * q.excess;
    }
}

/// The density `u` of a unit-norm Fock function, with the line structure
/// needed to integrate over its super-level sets.
#[derive(Debug, Clone)]
pub struct DensityField {
    coeffs: Vec<Complex64>,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
    steps: Vec<f64>,
    radius: f64,
    max_value: f64,
    argmax: PhasePoint,
    panels: Vec<Panel>,
    gl: (Vec<f64>, Vec<f64>),
    /// Kronrod nodes on `θ ∈ [0, π]` with Kronrod and embedded Gauss weights.
    kronrod: Vec<(f64, f64, f64)>,
}

/// `u(z) = |F(z)|² e^{-π|z|²}` for `F` normalized to unit `F²` norm.
pub fn density(f: &FockCoefficients) -> Result<DensityField> {
    let f = f.normalized()?;
    let c = f.coeffs().to_vec();
    let n = c.len();
    let derive = |v: &[Complex64]| -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); n];
        for k in 1..n {
            d[k - 1] = v[k] * (PI * k as f64).sqrt();
        }
        d
    };
    let d1 = derive(&c);
    let d2 = derive(&d1);
    let steps = (0..n)
        .map(|k| if k == 0 { 1.0 } else { (PI / k as f64).sqrt() })
        .collect();

    let radius = {
        let reach = 12.0 + (n as f64).sqrt() * 2.0;
        let mut r = reach;
        let h = 0.02;
        let mut rho = reach;
        while rho > 0.0 {
            if f.radial_majorant(rho).powi(2) > T_FLOOR {
                r = rho + h;
                break;
            }
            rho -= h;
        }
        if rho <= 0.0 {
            r = h;
        }
        r
    };

    let (gx, gw) = gauss_legendre(GL_ORDER);
    let mut kronrod = Vec::with_capacity(21);
    for (i, (&x, &wk)) in KRONROD_X.iter().zip(&KRONROD_W).enumerate() {
        let wg = if i % 2 == 1 { GAUSS10_W[i / 2] } else { 0.0 };
        let signs: &[f64] = if x == 0.0 { &[1.0] } else { &[-1.0, 1.0] };
        for &sg in signs {
            kronrod.push((0.5 * PI * (sg * x + 1.0), 0.5 * PI * wk, 0.5 * PI * wg));
        }
    }
    let mut field = DensityField {
        coeffs: c,
        d1,
        d2,
        steps,
        radius,
        max_value: 0.0,
        argmax: PhasePoint::ORIGIN,
        panels: Vec::new(),
        gl: (gx, gw),
        kronrod,
    };
    field.build_panels();
    field.locate_max();
    Ok(field)
}

impl DensityField {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Radius of the disk outside which `u ≤ 1e-16`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn argmax(&self) -> PhasePoint {
        self.argmax
    }

    pub fn u(&self, z: PhasePoint) -> f64 {
        self.weighted(z.x, z.w).0.norm_sqr()
    }

    /// `(F, F', F'') e^{-π|z|²/2}`.
    fn weighted(&self, x: f64, w: f64) -> (Complex64, Complex64, Complex64) {
        let z = Complex64::new(x, w);
        let mut ek = Complex64::new((-0.5 * PI * (x * x + w * w)).exp(), 0.0);
        let (mut a, mut a1, mut a2) = (self.coeffs[0] * ek, self.d1[0] * ek, self.d2[0] * ek);
        for k in 1..self.coeffs.len() {
            ek *= z * self.steps[k];
            a += self.coeffs[k] * ek;
            a1 += self.d1[k] * ek;
            a2 += self.d2[k] * ek;
        }
        (a, a1, a2)
    }

    /// `u` and `∂u/∂ω` only.
    fn u_uw(&self, x: f64, w: f64) -> (f64, f64) {
        let z = Complex64::new(x, w);
        let mut ek = Complex64::new((-0.5 * PI * (x * x + w * w)).exp(), 0.0);
        let (mut a, mut a1) = (self.coeffs[0] * ek, self.d1[0] * ek);
        for k in 1..self.coeffs.len() {
            ek *= z * self.steps[k];
            a += self.coeffs[k] * ek;
            a1 += self.d1[k] * ek;
        }
        let d = a1 - PI * z.conj() * a;
        (a.norm_sqr(), -2.0 * (d * a.conj()).im)
    }

    /// `u` with its gradient and `∂²u/∂ω²`.
    ///
    /// With `A = F e^{-π|z|²/2}` (and likewise `A₁`, `A₂` for `F'`, `F''`),
    /// `∂_z u = (A₁ - π z̄ A) Ā`, `∂_z ∂_z̄ u = |A₁ - π z̄ A|² - π u` and
    /// `∂_z² u = (A₂ - 2π z̄ A₁ + π² z̄² A) Ā`.
    fn derivs(&self, x: f64, w: f64) -> Derivs {
        let (a, a1, a2) = self.weighted(x, w);
        let zb = Complex64::new(x, -w);
        let d = a1 - PI * zb * a;
        let g = d * a.conj();
        let u = a.norm_sqr();
        let lap = d.norm_sqr() - PI * u;
        let q = (a2 - 2.0 * PI * zb * a1 + PI * PI * zb * zb * a) * a.conj();
        Derivs {
            u,
            ux: 2.0 * g.re,
            uw: -2.0 * g.im,
            uww: 2.0 * lap - 2.0 * q.re,
        }
    }

    fn half_width(&self, x: f64) -> f64 {
        (self.radius * self.radius - x * x).max(0.0).sqrt()
    }

    /// All extrema along the line at `x`, from sign changes of `∂u/∂ω`.
    fn scan(&self, x: f64) -> Line {
        let half = self.half_width(x);
        let mut ext = Vec::new();
        if half > 0.0 {
            let m = ((2.0 * half / LINE_STEP).ceil() as usize).max(8);
            let h = 2.0 * half / m as f64;
            let mut prev_w = -half;
            let mut prev_d = self.derivs(x, prev_w).uw;
            for k in 1..=m {
                let w = -half + k as f64 * h;
                let d = self.derivs(x, w).uw;
                if d == 0.0 {
                    continue;
                }
                if (prev_d > 0.0 && d < 0.0) || (prev_d < 0.0 && d > 0.0) {
                    ext.push(self.refine_extremum(x, prev_w, w, prev_d > 0.0));
                }
                prev_w = w;
                prev_d = d;
            }
        }
        Line { x, half, ext }
    }

    /// Root of `∂u/∂ω` in a bracket, by safeguarded Newton.
    fn refine_extremum(&self, x: f64, mut lo: f64, mut hi: f64, is_max: bool) -> Extremum {
        let mut w = 0.5 * (lo + hi);
        for _ in 0..100 {
            let d = self.derivs(x, w);
            // for a maximum ∂u/∂ω > 0 on the left of the root
            if (d.uw > 0.0) == is_max {
                lo = w;
            } else {
                hi = w;
            }
            let newton = w - d.uw / d.uww;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let done =
                (next - w).abs() <= 1e-15 * (1.0 + w.abs()) || hi - lo <= 1e-15 * (1.0 + w.abs());
            w = next;
            if done {
                break;
            }
        }
        Extremum {
            w,
            v: self.derivs(x, w).u,
            is_max,
        }
    }

    /// Follow an extremum to the line at `x` from a nearby guess.
    fn track(&self, x: f64, guess: f64, is_max: bool) -> Option<Extremum> {
        let mut w = guess;
        for _ in 0..40 {
            let d = self.derivs(x, w);
            let mut step = -d.uw / d.uww;
            if !step.is_finite() {
                return None;
            }
            step = step.clamp(-0.05, 0.05);
            w += step;
            if step.abs() <= 1e-7 * (1.0 + w.abs()) {
                // the value at the stationary point of the local quadratic
                let ok = if is_max { d.uww <= 0.0 } else { d.uww >= 0.0 };
                let v = d.u - 0.5 * d.uw * d.uw / d.uww;
                return (ok && (w - guess).abs() < 0.25).then_some(Extremum { w, v, is_max });
            }
        }
        None
    }

    /// The line at `x`, following the extrema of two lines with the same
    /// structure that enclose it; a full scan if that fails.
    ///
    /// With a `level`, extrema whose values stay well away from it are only
    /// interpolated: any point near them is an equally good bracket end for
    /// the crossings, since `u` there is on the same side of the level.
    fn line_between(&self, x: f64, la: &Line, lb: &Line, level: Option<f64>) -> Line {
        if la.same_structure(lb) {
            let s = if lb.x != la.x {
                (x - la.x) / (lb.x - la.x)
            } else {
                0.0
            };
            let mut ext = Vec::with_capacity(la.ext.len());
            for (ea, eb) in la.ext.iter().zip(&lb.ext) {
                let guess = ea.w + s * (eb.w - ea.w);
                let far = level.is_some_and(|t| {
                    let (da, db) = (ea.v - t, eb.v - t);
                    (da > 0.0) == (db > 0.0)
                        && da.abs().min(db.abs()) > 2.0 * (ea.v - eb.v).abs() + 1e-3 * t
                });
                if far {
                    ext.push(Extremum {
                        w: guess,
                        v: self.u_uw(x, guess).0,
                        is_max: ea.is_max,
                    });
                    continue;
                }
                match self.track(x, guess, ea.is_max) {
                    Some(e) => ext.push(e),
                    None => return self.scan(x),
                }
            }
            if ext.windows(2).all(|p| p[0].w < p[1].w) {
                return Line {
                    x,
                    half: self.half_width(x),
                    ext,
                };
            }
        }
        self.scan(x)
    }

    /// `(ω, ∂u/∂ω)` where the monotone piece `[wa, wb]` crosses level `t`.
    fn crossing(
        &self,
        x: f64,
        (mut lo, va): (f64, f64),
        (mut hi, vb): (f64, f64),
        t: f64,
    ) -> (f64, f64) {
        let increasing = va < t;
        let mut w = lo + (t - va) / (vb - va) * (hi - lo);
        if !(w > lo && w < hi) {
            w = 0.5 * (lo + hi);
        }
        let mut slope = 0.0;
        for _ in 0..100 {
            let (u, uw) = self.u_uw(x, w);
            slope = uw;
            if (u < t) == increasing {
                lo = w;
            } else {
                hi = w;
            }
            let newton = w - (u - t) / uw;
            if newton.is_finite() && newton > lo && newton < hi {
                // quadratic convergence: the next correction is below rounding
                let small = (newton - w).abs() <= 1e-9 * (1.0 + w.abs());
                w = newton;
                if small {
                    break;
                }
            } else {
                w = 0.5 * (lo + hi);
            }
            if hi - lo <= 1e-15 * (1.0 + w.abs()) {
                break;
            }
        }
        (w, slope)
    }

    /// Chord length, its `t`-derivative and (optionally) `∫ (u - t)_+`.
    fn line_quantities(&self, line: &Line, t: f64, with_excess: bool) -> LineQuantities {
        let mut q = LineQuantities::default();
        if line.half == 0.0 {
            return q;
        }
        let mut bps = Vec::with_capacity(line.ext.len() + 2);
        bps.push((-line.half, self.u_uw(line.x, -line.half).0));
        bps.extend(line.ext.iter().map(|e| (e.w, e.v)));
        bps.push((line.half, self.u_uw(line.x, line.half).0));
        let mut cross = Vec::new();
        for p in bps.windows(2) {
            let ((wa, va), (wb, vb)) = (p[0], p[1]);
            if (va < t && vb > t) || (va > t && vb < t) {
                cross.push(self.crossing(line.x, (wa, va), (wb, vb), t));
            }
        }
        for chord in cross.chunks_exact(2) {
            let ((a, sa), (b, sb)) = (chord[0], chord[1]);
            q.len += b - a;
            q.dlen -= 1.0 / sa.abs().max(1e-300) + 1.0 / sb.abs().max(1e-300);
            if with_excess {
                let pieces = ((b - a) / CHORD_PIECE).ceil().max(1.0) as usize;
                let h = (b - a) / pieces as f64;
                for p in 0..pieces {
                    let mid = a + (p as f64 + 0.5) * h;
                    for (gx, gw) in self.gl.0.iter().zip(&self.gl.1) {
                        let w = mid + 0.5 * h * gx;
                        q.excess += 0.5 * h * gw * (self.u_uw(line.x, w).0 - t);
                    }
                }
            }
        }
        q
    }

    fn make_panel(&self, a: f64, b: f64) -> Panel {
        let off = END_OFFSET * (b - a);
        let nodes: Vec<Line> = self
            .gl
            .0
            .iter()
            .map(|gx| self.scan(0.5 * (a + b) + 0.5 * (b - a) * gx))
            .collect();
        // end lines are followed in from the nodes: next to a fold a scan
        // cannot resolve the pair of extrema that has just been born
        let n = nodes.len();
        let first = self.line_between(a + off, &nodes[0], &nodes[1], None);
        let last = self.line_between(b - off, &nodes[n - 2], &nodes[n - 1], None);
        let mut samples = Vec::with_capacity(n + 2);
        samples.push(first);
        samples.extend(nodes);
        samples.push(last);
        Panel { b, samples }
    }

    fn panels_for(&self, breaks: &[f64]) -> Vec<Panel> {
        let mut panels = Vec::new();
        for p in breaks.windows(2) {
            let (a, b) = (p[0], p[1]);
            let k = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
            for j in 0..k {
                let lo = a + (b - a) * j as f64 / k as f64;
                let hi = if j + 1 == k {
                    b
                } else {
                    a + (b - a) * (j + 1) as f64 / k as f64
                };
                panels.push(self.make_panel(lo, hi));
            }
        }
        panels
    }

    /// Panels on `[-R, R]` broken at the critical points of `u` and at the
    /// folds of the line extrema.
    fn build_panels(&mut self) {
        let r = self.radius;
        let uniform = vec![-r, r];
        let first = self.panels_for(&uniform);
        let peak = first
            .iter()
            .flat_map(|p| p.samples.iter())
            .flat_map(|l| l.ext.iter())
            .map(|e| e.v)
            .fold(0.0, f64::max);
        let noise = 1e-12 * peak.max(f64::MIN_POSITIVE);
        let mut breaks = uniform;
        for panel in &first {
            for pair in panel.samples.windows(2) {
                let (la, lb) = (&pair[0], &pair[1]);
                if !la.same_structure(lb) {
                    if let Some(x) = self.locate_fold(la.clone(), lb.clone()) {
                        breaks.push(x);
                    }
                    continue;
                }
                for i in 0..la.ext.len() {
                    let da = self.derivs(la.x, la.ext[i].w).ux;
                    let db = self.derivs(lb.x, lb.ext[i].w).ux;
                    if da.abs() > noise && db.abs() > noise && (da > 0.0) != (db > 0.0) {
                        if let Some(x) = self.locate_critical(la, lb, i) {
                            breaks.push(x);
                        }
                    }
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        self.panels = self.panels_for(&breaks);
    }

    /// Where the extremum structure changes between two lines, by bisection.
    fn locate_fold(&self, mut la: Line, mut lb: Line) -> Option<f64> {
        for _ in 0..50 {
            if lb.x - la.x <= 1e-11 {
                break;
            }
            let mid = self.scan(0.5 * (la.x + lb.x));
            if !mid.same_structure(&la) {
                lb = mid;
            } else if !mid.same_structure(&lb) {
                la = mid;
            } else {
                return None;
            }
        }
        Some(0.5 * (la.x + lb.x))
    }

    /// Zero of `x ↦ ∂u/∂x` along the `i`-th extremum between two lines.
    fn locate_critical(&self, la: &Line, lb: &Line, i: usize) -> Option<f64> {
        let (mut xa, mut xb) = (la.x, lb.x);
        let (mut wa, mut wb) = (la.ext[i].w, lb.ext[i].w);
        let is_max = la.ext[i].is_max;
        let sign_a = self.derivs(xa, wa).ux > 0.0;
        for _ in 0..60 {
            if xb - xa <= 1e-13 * (1.0 + xa.abs()) {
                break;
            }
            let x = 0.5 * (xa + xb);
            let e = self.track(x, 0.5 * (wa + wb), is_max)?;
            if (self.derivs(x, e.w).ux > 0.0) == sign_a {
                xa = x;
                wa = e.w;
            } else {
                xb = x;
                wb = e.w;
            }
        }
        Some(0.5 * (xa + xb))
    }

    /// Global maximum: best extremum over all lines, refined by golden
    /// section along the extremum curve through it.
    fn locate_max(&mut self) {
        let mut best = (0.0, PhasePoint::ORIGIN);
        for l in self.panels.iter().flat_map(|p| p.samples.iter()) {
            for e in &l.ext {
                if e.is_max && e.v > best.0 {
                    best = (e.v, PhasePoint::new(l.x, e.w));
                }
            }
        }
        let (v0, z0) = best;
        let value = |x: f64| self.track(x, z0.w, true).map(|e| (e.v, e.w));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (z0.x - 0.05, z0.x + 0.05);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = value(c).map_or(f64::NEG_INFINITY, |p| p.0);
        let mut fd = value(d).map_or(f64::NEG_INFINITY, |p| p.0);
        for _ in 0..80 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = value(c).map_or(f64::NEG_INFINITY, |p| p.0);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = value(d).map_or(f64::NEG_INFINITY, |p| p.0);
            }
        }
        let x = 0.5 * (a + b);
        let refined = value(x);
        self.max_value = v0;
        self.argmax = z0;
        if let Some((v, w)) = refined {
            if v > v0 {
                self.max_value = v;
                self.argmax = PhasePoint::new(x, w);
            }
        }
    }

    /// Where the `i`-th extremum value crosses `t` between two lines of the
    /// same structure.
    fn locate_event(&self, la: &Line, lb: &Line, i: usize, t: f64) -> f64 {
        let is_max = la.ext[i].is_max;
        let (mut xa, mut xb) = (la.x, lb.x);
        let (mut wa, mut wb) = (la.ext[i].w, lb.ext[i].w);
        let above_a = la.ext[i].v > t;
        let mut x = 0.5 * (xa + xb);
        for _ in 0..100 {
            let guess = if xb > xa {
                wa + (x - xa) / (xb - xa) * (wb - wa)
            } else {
                wa
            };
            let e = match self.track(x, guess, is_max) {
                Some(e) => e,
                None => {
                    let line = self.scan(x);
                    match line
                        .ext
                        .iter()
                        .filter(|e| e.is_max == is_max)
                        .min_by(|p, q| (p.w - guess).abs().total_cmp(&(q.w - guess).abs()))
                    {
                        Some(e) => *e,
                        None => break,
                    }
                }
            };
            if (e.v > t) == above_a {
                xa = x;
                wa = e.w;
            } else {
                xb = x;
                wb = e.w;
            }
            // dv/dx = ∂u/∂x along the extremum
            let dv = self.derivs(x, e.w).ux;
            let newton = x - (e.v - t) / dv;
            let next = if newton.is_finite() && newton > xa && newton < xb {
                newton
            } else {
                0.5 * (xa + xb)
            };
            let done =
                (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || xb - xa <= 1e-14 * (1.0 + x.abs());
            x = next;
            if done {
                break;
            }
        }
        x
    }

    /// Events between two sample lines: tracked extrema where structures
    /// agree, bisection on the crossing count where they do not.
    fn events_between(&self, la: &Line, lb: &Line, t: f64, out: &mut Vec<f64>, depth: usize) {
        if la.same_structure(lb) {
            for i in 0..la.ext.len() {
                let (va, vb) = (la.ext[i].v, lb.ext[i].v);
                if (va > t) != (vb > t) && va != t && vb != t {
                    out.push(self.locate_event(la, lb, i, t));
                }
            }
            return;
        }
        if lb.x - la.x <= 1e-12 || depth > 45 {
            if la.crossing_count(t) != lb.crossing_count(t) {
                out.push(0.5 * (la.x + lb.x));
            }
            return;
        }
        let mid = self.scan(0.5 * (la.x + lb.x));
        self.events_between(la, &mid, t, out, depth + 1);
        self.events_between(&mid, lb, t, out, depth + 1);
    }

    /// Integrals over `x` of the line quantities at level `t`.
    fn integrate(&self, t: f64, with_excess: bool) -> LineQuantities {
        let mut events = Vec::new();
        for panel in &self.panels {
            for pair in panel.samples.windows(2) {
                self.events_between(&pair[0], &pair[1], t, &mut events, 0);
            }
        }
        events.sort_by(f64::total_cmp);
        let r = self.radius;
        let mut cuts = vec![-r];
        cuts.extend(events.iter().copied().filter(|&e| e > -r && e < r));
        cuts.push(r);
        let mut total = LineQuantities::default();
        for c in cuts.windows(2) {
            let (p, q) = (c[0], c[1]);
            if q - p <= 0.0 {
                continue;
            }
            // equal pieces keep every node at least one piece width away
            // from the singular ends; x = mid - half cos θ resolves the ends
            let k = ((q - p) / PIECE_WIDTH).ceil().max(1.0) as usize;
            let h = (q - p) / k as f64;
            for piece in 0..k {
                let (a, b) = (p + piece as f64 * h, p + (piece + 1) as f64 * h);
                self.adaptive(a, b, t, with_excess, 0, &mut total);
            }
        }
        total
    }

    /// Gauss–Kronrod on `x = mid - half cos θ`, bisected until the embedded
    /// Gauss rule agrees. Level curves that nearly turn vertical make the
    /// line integrals smooth but sharply curved.
    fn adaptive(
        &self,
        a: f64,
        b: f64,
        t: f64,
        with_excess: bool,
        depth: usize,
        total: &mut LineQuantities,
    ) {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut kron = LineQuantities::default();
        let mut gauss = LineQuantities::default();
        for &(th, wk, wg) in &self.kronrod {
            let x = mid - half * th.cos();
            let q = self.line_quantities(&self.line_at(x, t), t, with_excess);
            let jac = half * th.sin();
            kron += (jac * wk, q);
            if wg != 0.0 {
                gauss += (jac * wg, q);
            }
        }
        let tol = REFINE_TOL * (b - a);
        let converged =
            (kron.len - gauss.len).abs() <= tol && (kron.excess - gauss.excess).abs() <= tol;
        if converged || depth >= MAX_REFINE {
            *total += (1.0, kron);
        } else {
            self.adaptive(a, mid, t, with_excess, depth + 1, total);
            self.adaptive(mid, b, t, with_excess, depth + 1, total);
        }
    }

    /// The line at `x`, followed from the panel samples enclosing it.
    fn line_at(&self, x: f64, t: f64) -> Line {
        let i = self
            .panels
            .partition_point(|p| p.b < x)
            .min(self.panels.len() - 1);
        let samples = &self.panels[i].samples;
        let j = samples
            .partition_point(|l| l.x <= x)
            .clamp(1, samples.len() - 1);
        self.line_between(x, &samples[j - 1], &samples[j], Some(t))
    }

    fn check_level(&self, t: f64) -> Result<()> {
        if t.is_nan() || t <= T_FLOOR {
            return Err(Error::TailTooLarge {
                tail: t,
                tol: T_FLOOR,
            });
        }
        Ok(())
    }

    /// `μ(t) = |{u > t}|`.
    pub fn mu(&self, t: f64) -> Result<f64> {
        self.check_level(t)?;
        if t >= self.max_value {
            return Ok(0.0);
        }
        Ok(self.integrate(t, false).len)
    }

    /// `∫ (u - t)_+`.
    pub fn excess(&self, t: f64) -> Result<f64> {
        self.check_level(t)?;
        if t >= self.max_value {
            return Ok(0.0);
        }
        Ok(self.integrate(t, true).excess)
    }

    /// `u*(s)`: the level `t` with `μ(t) = s`, by safeguarded Newton in `log t`.
    fn level_for(&self, s: f64, guess: f64) -> Result<Level> {
        if s == 0.0 {
            return Ok(Level {
                t: self.max_value,
                excess: 0.0,
                dlog_ds: f64::NAN,
            });
        }
        let mut lo = T_FLOOR.ln();
        let mut hi = self.max_value.ln();
        let mut tau = guess.ln().clamp(lo, hi);
        if tau >= hi {
            tau = hi - 1e-3;
        }
        let mut lo_checked = false;
        let mut last_f = f64::INFINITY;
        for _ in 0..200 {
            let t = tau.exp();
            // the excess is only needed at the solution; request it once
            // Newton is close enough that this is likely the last step
            let with_excess = last_f.abs() <= 1e-6 * s.max(1.0);
            let q = self.integrate(t, with_excess);
            let f = q.len - s;
            // dμ/dτ = t μ'(t)
            let slope = t * q.dlen;
            if f.abs() <= 1e-13 * s.max(1.0) {
                let excess = if with_excess {
                    q.excess
                } else {
                    self.integrate(t, true).excess
                };
                return Ok(Level {
                    t,
                    excess,
                    dlog_ds: 1.0 / slope,
                });
            }
            last_f = f;
            if f > 0.0 {
                lo = tau;
                lo_checked = true;
            } else {
                hi = tau;
            }
            let newton = tau - f / slope;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            tau = next;
            if hi - lo <= 1e-14 * (1.0 + tau.abs()) {
                break;
            }
        }
        if !lo_checked && (tau - T_FLOOR.ln()).abs() < 1e-6 {
            return Err(Error::TailTooLarge {
                tail: s,
                tol: T_FLOOR,
            });
        }
        let t = tau.exp();
        let q = self.integrate(t, true);
        Ok(Level {
            t,
            excess: q.excess,
            dlog_ds: 1.0 / (t * q.dlen),
        })
    }
}

/// Solution of `μ(t) = s` with `∫ (u - t)_+` and `d log u*/ds` there.
#[derive(Debug, Clone, Copy)]
struct Level {
    t: f64,
    excess: f64,
    dlog_ds: f64,
}

/// `μ(t)` on a grid of levels in `(0, max u]`.
pub fn distribution_function(u: &DensityField, t_grid: &[f64]) -> Result<Vec<f64>> {
    t_grid
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t <= u.max_value * (1.0 + 1e-12)) {
                return Err(Error::InvalidInput(format!(
                    "level {t} outside (0, max u = {}]",
                    u.max_value
                )));
            }
            u.mu(t)
        })
        .collect()
}

/// `u*`, `I` on an `s` grid and `μ` on a `t` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RearrangementProfile {
    pub s_grid: Vec<f64>,
    pub u_star: Vec<f64>,
    pub i_vals: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub mu_vals: Vec<f64>,
}

/// `n` values of `s` from 0 to `s_max` (none when `s_max = 0`): geometric up to `min(1, s_max)`
/// (resolving `I'(0) = max u`), linear beyond.
fn s_grid(s_max: f64, n: usize) -> Vec<f64> {
    if s_max == 0.0 {
        return Vec::new();
    }
    let mut s = vec![0.0];
    let knee = s_max.min(1.0);
    let n_geo = if s_max > 1.0 { n / 4 } else { n - 1 };
    let first = 1e-3 * knee;
    for i in 0..n_geo {
        let f = if n_geo > 1 {
            i as f64 / (n_geo - 1) as f64
        } else {
            1.0
        };
        s.push(first * (knee / first).powf(f));
    }
    let n_lin = n - 1 - n_geo;
    for i in 1..=n_lin {
        s.push(1.0 + (s_max - 1.0) * i as f64 / n_lin as f64);
    }
    s
}

/// `u*(s)` by inverting `μ`, and `I(s) = ∫_{u > u*(s)} u = s u*(s) + ∫ (u - u*(s))_+`.
pub fn rearrangement_profile(
    u: &DensityField,
    s_max: f64,
    n: usize,
) -> Result<RearrangementProfile> {
    if !(0.0..=MAX_S).contains(&s_max) {
        return Err(Error::InvalidInput(format!(
            "s_max must lie in [0, {MAX_S}], got {s_max}"
        )));
    }
    if n < MIN_NODES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_NODES} nodes, got {n}"
        )));
    }
    let s_grid = s_grid(s_max, n);
    let mut u_star = Vec::with_capacity(s_grid.len());
    let mut i_vals = Vec::with_capacity(s_grid.len());
    let mut prev: Option<(f64, Level)> = None;
    for &s in &s_grid {
        // continue log u* along its slope from the previous node
        let guess = match prev {
            Some((s0, l)) if l.dlog_ds.is_finite() => l.t * ((s - s0) * l.dlog_ds).exp(),
            Some((_, l)) => l.t,
            None => u.max_value,
        };
        let level = u.level_for(s, guess)?;
        u_star.push(level.t);
        i_vals.push(level.t * s + level.excess);
        prev = Some((s, level));
    }
    // μ(u*(s)) = s: the levels of the profile sample μ directly
    let t_grid: Vec<f64> = u_star.clone();
    let mu_vals = s_grid.clone();
    Ok(RearrangementProfile {
        s_grid,
        u_star,
        i_vals,
        t_grid,
        mu_vals,
    })
}

/// Largest discrete violations of the structure behind the sharp bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferentialReport {
    /// Largest relative decrease of `e^s u*(s)` between consecutive nodes.
    pub max_violation_exp_monotone: f64,
    /// Largest excess of `G(σ) = I(-log σ)` over the chord of its neighbours.
    pub max_convexity_violation_g: f64,
    /// Largest excess of `I(s)` over `1 - e^{-s}`.
    pub max_i_bound_violation: f64,
}

impl DifferentialReport {
    pub fn worst(&self) -> f64 {
        self.max_violation_exp_monotone
            .max(self.max_convexity_violation_g)
            .max(self.max_i_bound_violation)
    }
}

pub fn verify_differential_structure(p: &RearrangementProfile) -> DifferentialReport {
    let scaled: Vec<f64> = p
        .s_grid
        .iter()
        .zip(&p.u_star)
        .map(|(s, u)| s.exp() * u)
        .collect();
    let exp_monotone = scaled
        .windows(2)
        .map(|w| ((w[0] - w[1]) / w[0]).max(0.0))
        .fold(0.0, f64::max);

    // G on increasing σ = e^{-s}
    let pts: Vec<(f64, f64)> = p
        .s_grid
        .iter()
        .zip(&p.i_vals)
        .rev()
        .map(|(s, i)| ((-s).exp(), *i))
        .collect();
    let convexity = pts
        .windows(3)
        .map(|w| {
            let ((s0, g0), (s1, g1), (s2, g2)) = (w[0], w[1], w[2]);
            let chord = g0 + (g2 - g0) * (s1 - s0) / (s2 - s0);
            (g1 - chord).max(0.0)
        })
        .fold(0.0, f64::max);

    let bound = p
        .s_grid
        .iter()
        .zip(&p.i_vals)
        .map(|(s, i)| (i + (-s).exp_m1()).max(0.0))
        .fold(0.0, f64::max);

    DifferentialReport {
        max_violation_exp_monotone: exp_monotone,
        max_convexity_violation_g: convexity,
        max_i_bound_violation: bound,
    }
}
