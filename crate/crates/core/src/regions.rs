//! Constructive subsets of the time-frequency plane.
//!
//! Primitives (disks, annuli, rectangles) have closed-form measures and
//! tensor/polar quadrature rules. Affine images map both. Unions of
//! well-separated children concatenate rules; anything that overlaps is
//! integrated through exact chords: every vertical line meets a region in a
//! finite union of intervals that can be computed from the tree, so the
//! inner integral is exact in its limits and only the outer one is adaptive.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fock::PhasePoint;
use crate::quadrature::{gauss_legendre, gauss_legendre_on, polar_rule, QuadratureRule};
use crate::{Error, Result};

pub type Matrix2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Region {
    Disk {
        center: PhasePoint,
        r: f64,
    },
    Annulus {
        center: PhasePoint,
        r_in: f64,
        r_out: f64,
    },
    Rect {
        corner: PhasePoint,
        widths: [f64; 2],
    },
    Affine {
        matrix: Matrix2,
        shift: PhasePoint,
        child: Box<Region>,
    },
    Union {
        children: Vec<Region>,
    },
    Difference {
        left: Box<Region>,
        right: Box<Region>,
    },
}

fn det(m: &Matrix2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inverse(m: &Matrix2) -> Matrix2 {
    let d = det(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

fn apply(m: &Matrix2, z: PhasePoint) -> PhasePoint {
    PhasePoint::new(m[0][0] * z.x + m[0][1] * z.w, m[1][0] * z.x + m[1][1] * z.w)
}

fn compose(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Largest singular value of a 2×2 matrix.
fn spectral_norm(m: &Matrix2) -> f64 {
    let a = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let b = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let c = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let tr = a + c;
    let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    (0.5 * (tr + disc)).sqrt()
}

/// Sorted, disjoint closed intervals.
type Intervals = Vec<(f64, f64)>;

fn merge(mut v: Intervals) -> Intervals {
    v.retain(|(a, b)| b > a);
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Intervals = Vec::with_capacity(v.len());
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn subtract(left: &Intervals, right: &Intervals) -> Intervals {
    let mut out = Vec::new();
    for &(a, b) in left {
        let mut cur = a;
        for &(c, d) in right {
            if d <= cur || c >= b {
                continue;
            }
            if c > cur {
                out.push((cur, c));
            }
            cur = cur.max(d);
            if cur >= b {
                break;
            }
        }
        if cur < b {
            out.push((cur, b));
        }
    }
    out
}

/// Rectangle side above which the tensor rule is split into panels.
const RECT_PANEL: f64 = 1.0;
/// Longest radial panel, in the variable `t = πρ²`.
const POLAR_PANEL_T: f64 = 8.0;
/// Inner panel length for chord rules.
const CHORD_PANEL: f64 = 1.0;

impl Region {
    pub fn disk(center: PhasePoint, r: f64) -> Self {
        Region::Disk { center, r }
    }

    pub fn annulus(center: PhasePoint, r_in: f64, r_out: f64) -> Self {
        Region::Annulus {
            center,
            r_in,
            r_out,
        }
    }

    pub fn rect(corner: PhasePoint, width: f64, height: f64) -> Self {
        Region::Rect {
            corner,
            widths: [width, height],
        }
    }

    /// Square of the given side centred at `center`.
    pub fn square(center: PhasePoint, side: f64) -> Self {
        Self::rect(
            PhasePoint::new(center.x - 0.5 * side, center.w - 0.5 * side),
            side,
            side,
        )
    }

    pub fn affine(matrix: Matrix2, shift: PhasePoint, child: Region) -> Self {
        Region::Affine {
            matrix,
            shift,
            child: Box::new(child),
        }
    }

    pub fn union(children: Vec<Region>) -> Self {
        Region::Union { children }
    }

    pub fn difference(left: Region, right: Region) -> Self {
        Region::Difference {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn translated(self, shift: PhasePoint) -> Self {
        Self::affine([[1.0, 0.0], [0.0, 1.0]], shift, self)
    }

    /// The reflected set `{(x, ω) : (x, -ω) ∈ Ω}`.
    pub fn reflected(self) -> Self {
        Self::affine([[1.0, 0.0], [0.0, -1.0]], PhasePoint::ORIGIN, self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::NonFiniteMeasure(msg));
        match self {
            Region::Disk { center, r } => {
                if !center.is_finite() || !r.is_finite() || *r <= 0.0 {
                    return bad(format!("disk with radius {r} at {center:?}"));
                }
            }
            Region::Annulus {
                center,
                r_in,
                r_out,
            } => {
                if !center.is_finite()
                    || !r_out.is_finite()
                    || r_in.is_nan()
                    || *r_in < 0.0
                    || r_in >= r_out
                {
                    return bad(format!("annulus with radii {r_in}, {r_out}"));
                }
            }
            Region::Rect { corner, widths } => {
                if !corner.is_finite() || widths.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                    return bad(format!("rectangle with widths {widths:?}"));
                }
            }
            Region::Affine {
                matrix,
                shift,
                child,
            } => {
                let d = det(matrix);
                if !shift.is_finite() || matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return bad("non-finite affine map".into());
                }
                if d.abs() <= 1e-12 * spectral_norm(matrix).powi(2).max(1e-300) {
                    return bad(format!("singular affine matrix (det = {d})"));
                }
                child.validate()?;
            }
            Region::Union { children } => {
                if children.is_empty() {
                    return bad("empty union".into());
                }
                for c in children {
                    c.validate()?;
                }
            }
            Region::Difference { left, right } => {
                left.validate()?;
                right.validate()?;
            }
        }
        Ok(())
    }

    /// Membership of `z` in the region enlarged (`tol > 0`) or shrunk
    /// (`tol < 0`) by roughly `|tol|`.
    pub fn contains_tol(&self, z: PhasePoint, tol: f64) -> bool {
        match self {
            Region::Disk { center, r } => (z - *center).norm() <= r + tol,
            Region::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let d = (z - *center).norm();
                d <= r_out + tol && d >= r_in - tol
            }
            Region::Rect { corner, widths } => {
                z.x >= corner.x - tol
                    && z.x <= corner.x + widths[0] + tol
                    && z.w >= corner.w - tol
                    && z.w <= corner.w + widths[1] + tol
            }
            Region::Affine {
                matrix,
                shift,
                child,
            } => {
                let inv = inverse(matrix);
                child.contains_tol(apply(&inv, z - *shift), tol * spectral_norm(&inv))
            }
            Region::Union { children } => children.iter().any(|c| c.contains_tol(z, tol)),
            Region::Difference { left, right } => {
                left.contains_tol(z, tol) && !right.contains_tol(z, -tol)
            }
        }
    }

    pub fn contains(&self, z: PhasePoint) -> bool {
        self.contains_tol(z, 0.0)
    }

    /// A disk containing the region.
    pub fn bounding_disk(&self) -> (PhasePoint, f64) {
        match self {
            Region::Disk { center, r } => (*center, *r),
            Region::Annulus { center, r_out, .. } => (*center, *r_out),
            Region::Rect { corner, widths } => (
                PhasePoint::new(corner.x + 0.5 * widths[0], corner.w + 0.5 * widths[1]),
                0.5 * widths[0].hypot(widths[1]),
            ),
            Region::Affine {
                matrix,
                shift,
                child,
            } => {
                let (c, r) = child.bounding_disk();
                (apply(matrix, c) + *shift, r * spectral_norm(matrix))
            }
            Region::Union { children } => {
                let disks: Vec<_> = children.iter().map(Region::bounding_disk).collect();
                let xmin = disks
                    .iter()
                    .map(|(c, r)| c.x - r)
                    .fold(f64::INFINITY, f64::min);
                let xmax = disks
                    .iter()
                    .map(|(c, r)| c.x + r)
                    .fold(f64::NEG_INFINITY, f64::max);
                let wmin = disks
                    .iter()
                    .map(|(c, r)| c.w - r)
                    .fold(f64::INFINITY, f64::min);
                let wmax = disks
                    .iter()
                    .map(|(c, r)| c.w + r)
                    .fold(f64::NEG_INFINITY, f64::max);
                let center = PhasePoint::new(0.5 * (xmin + xmax), 0.5 * (wmin + wmax));
                let r = disks
                    .iter()
                    .map(|(c, r)| (*c - center).norm() + r)
                    .fold(0.0, f64::max);
                (center, r)
            }
            Region::Difference { left, .. } => left.bounding_disk(),
        }
    }

    /// Parameters `t` with `p + t v` in the region, as sorted disjoint
    /// intervals.
    pub fn chords(&self, p: PhasePoint, v: PhasePoint) -> Vec<(f64, f64)> {
        match self {
            Region::Disk { center, r } => disk_chord(p - *center, v, *r).into_iter().collect(),
            Region::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let outer: Intervals = disk_chord(p - *center, v, *r_out).into_iter().collect();
                let inner: Intervals = disk_chord(p - *center, v, *r_in).into_iter().collect();
                subtract(&outer, &inner)
            }
            Region::Rect { corner, widths } => {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for (pc, vc, a, b) in [
                    (p.x, v.x, corner.x, corner.x + widths[0]),
                    (p.w, v.w, corner.w, corner.w + widths[1]),
                ] {
                    if vc == 0.0 {
                        if pc < a || pc > b {
                            return Vec::new();
                        }
                    } else {
                        let (t0, t1) = ((a - pc) / vc, (b - pc) / vc);
                        lo = lo.max(t0.min(t1));
                        hi = hi.min(t0.max(t1));
                    }
                }
                if hi > lo {
                    vec![(lo, hi)]
                } else {
                    Vec::new()
                }
            }
            Region::Affine {
                matrix,
                shift,
                child,
            } => {
                let inv = inverse(matrix);
                child.chords(apply(&inv, p - *shift), apply(&inv, v))
            }
            Region::Union { children } => {
                merge(children.iter().flat_map(|c| c.chords(p, v)).collect())
            }
            Region::Difference { left, right } => subtract(&left.chords(p, v), &right.chords(p, v)),
        }
    }

    /// Total length of the intersection with the vertical line at `x`.
    pub fn vertical_section(&self, x: f64) -> f64 {
        self.chords(PhasePoint::new(x, 0.0), PhasePoint::new(0.0, 1.0))
            .iter()
            .map(|(a, b)| b - a)
            .sum()
    }

    /// Abscissae where a vertical section may change structure: extremes of
    /// every circle/ellipse and every rectangle vertex, after the
    /// accumulated affine maps.
    fn critical_x(&self, m: &Matrix2, s: PhasePoint, out: &mut Vec<f64>) {
        let row_norm = m[0][0].hypot(m[0][1]);
        let map_x = |z: PhasePoint| m[0][0] * z.x + m[0][1] * z.w + s.x;
        match self {
            Region::Disk { center, r } => {
                let cx = map_x(*center);
                out.extend([cx - r * row_norm, cx + r * row_norm]);
            }
            Region::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let cx = map_x(*center);
                out.extend([
                    cx - r_out * row_norm,
                    cx + r_out * row_norm,
                    cx - r_in * row_norm,
                    cx + r_in * row_norm,
                ]);
            }
            Region::Rect { corner, widths } => {
                for (dx, dw) in [
                    (0.0, 0.0),
                    (widths[0], 0.0),
                    (0.0, widths[1]),
                    (widths[0], widths[1]),
                ] {
                    out.push(map_x(PhasePoint::new(corner.x + dx, corner.w + dw)));
                }
            }
            Region::Affine {
                matrix,
                shift,
                child,
            } => {
                let shift_img = apply(m, *shift) + s;
                child.critical_x(&compose(m, matrix), shift_img, out);
            }
            Region::Union { children } => {
                for c in children {
                    c.critical_x(m, s, out);
                }
            }
            Region::Difference { left, right } => {
                left.critical_x(m, s, out);
                right.critical_x(m, s, out);
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut xs = Vec::new();
        self.critical_x(&[[1.0, 0.0], [0.0, 1.0]], PhasePoint::ORIGIN, &mut xs);
        xs.retain(|x| x.is_finite());
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        xs
    }

    /// Whether this node can be integrated by concatenating/mapping the
    /// children's rules without double counting.
    fn has_exact_rule(&self) -> bool {
        match self {
            Region::Disk { .. } | Region::Annulus { .. } | Region::Rect { .. } => true,
            Region::Affine { child, .. } => child.has_exact_rule(),
            Region::Union { children } => {
                children.iter().all(Region::has_exact_rule) && pairwise_separated(children)
            }
            Region::Difference { left, right } => left.has_exact_rule() && separated(left, right),
        }
    }

    /// Lebesgue measure. Closed form for primitives and affine images;
    /// adaptive chord integration for overlapping unions and differences.
    pub fn measure(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.measure_unchecked())
    }

    fn measure_unchecked(&self) -> f64 {
        match self {
            Region::Disk { r, .. } => PI * r * r,
            Region::Annulus { r_in, r_out, .. } => PI * (r_out * r_out - r_in * r_in),
            Region::Rect { widths, .. } => widths[0] * widths[1],
            Region::Affine { matrix, child, .. } => det(matrix).abs() * child.measure_unchecked(),
            Region::Union { children } if self.has_exact_rule() => {
                children.iter().map(Region::measure_unchecked).sum()
            }
            Region::Difference { left, .. } if self.has_exact_rule() => left.measure_unchecked(),
            _ => self
                .chord_panels(CHORD_ORDER)
                .iter()
                .map(|p| p.section_integral)
                .sum(),
        }
    }

    /// Quadrature rule of the given order; integrating `1` reproduces the
    /// measure within `1e-9` relative or the call fails.
    pub fn quadrature(&self, order: usize) -> Result<QuadratureRule> {
        if order < 4 {
            return Err(Error::OrderTooLow {
                order,
                reason: "order must be at least 4".into(),
            });
        }
        self.validate()?;
        let rule = self.rule(order);
        let measure = self.measure_unchecked();
        let total = rule.total_weight();
        if (total - measure).abs() > 1e-9 * measure.max(1e-300) {
            return Err(Error::OrderTooLow {
                order,
                reason: format!("weights sum to {total}, measure is {measure}"),
            });
        }
        Ok(rule)
    }

    fn rule(&self, order: usize) -> QuadratureRule {
        match self {
            Region::Disk { center, r } => polar_rule(*center, 0.0, *r, order, POLAR_PANEL_T),
            Region::Annulus {
                center,
                r_in,
                r_out,
            } => polar_rule(*center, *r_in, *r_out, order, POLAR_PANEL_T),
            Region::Rect { corner, widths } => rect_rule(*corner, *widths, order),
            Region::Affine {
                matrix,
                shift,
                child,
            } => child.rule(order).mapped(*matrix, *shift),
            Region::Union { children } if self.has_exact_rule() => {
                let mut rule = QuadratureRule::default();
                for c in children {
                    rule.extend(c.rule(order));
                }
                rule
            }
            Region::Difference { left, .. } if self.has_exact_rule() => left.rule(order),
            _ => self.chord_rule(order),
        }
    }

    fn chord_rule(&self, order: usize) -> QuadratureRule {
        let mut rule = QuadratureRule::default();
        for panel in self.chord_panels(order.max(CHORD_ORDER)) {
            for (x, wx) in panel.nodes {
                for (a, b) in self.chords(PhasePoint::new(x, 0.0), PhasePoint::new(0.0, 1.0)) {
                    let pieces = ((b - a) / CHORD_PANEL).ceil().max(1.0) as usize;
                    let h = (b - a) / pieces as f64;
                    for k in 0..pieces {
                        let lo = a + k as f64 * h;
                        for (w, ww) in gauss_legendre_on(order, lo, lo + h) {
                            rule.push(PhasePoint::new(x, w), wx * ww);
                        }
                    }
                }
            }
        }
        rule
    }

    /// Adaptive outer panels for `∫ L(x) dx`, `L` the vertical section.
    /// Each panel uses `x = mid - half·cos θ`, which removes the
    /// square-root behaviour of `L` at tangencies on the panel ends.
    fn chord_panels(&self, order: usize) -> Vec<ChordPanel> {
        let xs = self.breakpoints();
        let mut out = Vec::new();
        let total_scale = self.bounding_disk().1.powi(2).max(1e-300);
        for w in xs.windows(2) {
            self.refine_panel(w[0], w[1], order, CHORD_TOL * total_scale, 0, &mut out);
        }
        out
    }

    fn refine_panel(
        &self,
        a: f64,
        b: f64,
        order: usize,
        tol: f64,
        depth: u32,
        out: &mut Vec<ChordPanel>,
    ) {
        if b - a <= 0.0 {
            return;
        }
        let coarse = ChordPanel::build(self, a, b, order);
        let fine = ChordPanel::build(self, a, b, 2 * order);
        let err = (coarse.section_integral - fine.section_integral).abs();
        if err <= tol * (b - a) || depth >= CHORD_MAX_DEPTH {
            out.push(fine);
        } else {
            let m = 0.5 * (a + b);
            self.refine_panel(a, m, order, tol, depth + 1, out);
            self.refine_panel(m, b, order, tol, depth + 1, out);
        }
    }
}

const CHORD_ORDER: usize = 16;
const CHORD_TOL: f64 = 1e-13;
const CHORD_MAX_DEPTH: u32 = 30;

struct ChordPanel {
    nodes: Vec<(f64, f64)>,
    section_integral: f64,
}

impl ChordPanel {
    fn build(region: &Region, a: f64, b: f64, order: usize) -> Self {
        let (t, w) = gauss_legendre(order);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut nodes = Vec::with_capacity(order);
        let mut section_integral = 0.0;
        for (t, w) in t.into_iter().zip(w) {
            // θ ∈ [0, π]
            let th = 0.5 * PI * (t + 1.0);
            let x = mid - half * th.cos();
            let wx = w * 0.5 * PI * half * th.sin();
            section_integral += wx * region.vertical_section(x);
            nodes.push((x, wx));
        }
        ChordPanel {
            nodes,
            section_integral,
        }
    }
}

fn separated(a: &Region, b: &Region) -> bool {
    let (ca, ra) = a.bounding_disk();
    let (cb, rb) = b.bounding_disk();
    (ca - cb).norm() >= ra + rb
}

fn pairwise_separated(children: &[Region]) -> bool {
    (0..children.len())
        .all(|i| ((i + 1)..children.len()).all(|j| separated(&children[i], &children[j])))
}

fn disk_chord(p: PhasePoint, v: PhasePoint, r: f64) -> Option<(f64, f64)> {
    let a = v.norm_sqr();
    if a == 0.0 {
        return None;
    }
    let b = p.x * v.x + p.w * v.w;
    let c = p.norm_sqr() - r * r;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // numerically stable roots
    let q = -(b + b.signum() * sq);
    let (t0, t1) = if q == 0.0 {
        (-sq / a, sq / a)
    } else {
        let r1 = q / a;
        let r2 = c / q;
        (r1.min(r2), r1.max(r2))
    };
    Some((t0, t1))
}

fn rect_rule(corner: PhasePoint, widths: [f64; 2], order: usize) -> QuadratureRule {
    let nx = (widths[0] / RECT_PANEL).ceil().max(1.0) as usize;
    let ny = (widths[1] / RECT_PANEL).ceil().max(1.0) as usize;
    let hx = widths[0] / nx as f64;
    let hy = widths[1] / ny as f64;
    let xs: Vec<(f64, f64)> = (0..nx)
        .flat_map(|i| {
            gauss_legendre_on(
                order,
                corner.x + i as f64 * hx,
                corner.x + (i + 1) as f64 * hx,
            )
        })
        .collect();
    let ws: Vec<(f64, f64)> = (0..ny)
        .flat_map(|j| {
            gauss_legendre_on(
                order,
                corner.w + j as f64 * hy,
                corner.w + (j + 1) as f64 * hy,
            )
        })
        .collect();
    let mut rule = QuadratureRule::default();
    for &(x, wx) in &xs {
        for &(w, ww) in &ws {
            rule.push(PhasePoint::new(x, w), wx * ww);
        }
    }
    rule
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(x: f64, w: f64) -> PhasePoint {
        PhasePoint::new(x, w)
    }

    fn gaussian(z: PhasePoint) -> f64 {
        (-PI * z.norm_sqr()).exp()
    }

    #[test]
    fn measure_examples() {
        assert_abs_diff_eq!(
            Region::disk(p(0.0, 0.0), 1.0).measure().unwrap(),
            PI,
            epsilon = 1e-15
        );
        let two = Region::union(vec![
            Region::disk(p(-2.0, 0.0), 1.0),
            Region::disk(p(2.0, 0.0), 1.0),
        ]);
        assert_abs_diff_eq!(two.measure().unwrap(), 2.0 * PI, epsilon = 1e-14);
        let shear = Region::affine(
            [[1.0, 0.5], [0.0, 1.0]],
            p(0.0, 0.0),
            Region::disk(p(0.0, 0.0), 1.0),
        );
        assert_abs_diff_eq!(shear.measure().unwrap(), PI, epsilon = 1e-14);
    }

    #[test]
    fn overlapping_measures_by_chords() {
        // two unit disks at distance 1: 2π - lens, lens = 2·acos(1/2) - (1/2)·√3
        let lens = 2.0 * (0.5f64).acos() - 0.5 * 3f64.sqrt();
        let u = Region::union(vec![
            Region::disk(p(0.0, 0.0), 1.0),
            Region::disk(p(1.0, 0.0), 1.0),
        ]);
        let m = u.measure().unwrap();
        assert!((m - (2.0 * PI - lens)).abs() < 1e-6 * m, "{m}");

        let ring = Region::difference(
            Region::disk(p(0.0, 0.0), 2.0),
            Region::disk(p(0.0, 0.0), 1.0),
        );
        let m = ring.measure().unwrap();
        assert!((m - 3.0 * PI).abs() < 1e-6 * m, "{m}");

        let cut = Region::difference(
            Region::square(p(0.0, 0.0), 2.0),
            Region::disk(p(1.0, 1.0), 1.0),
        );
        let m = cut.measure().unwrap();
        assert!((m - (4.0 - PI / 4.0)).abs() < 1e-6 * m, "{m}");

        let sheared_union = Region::affine(
            [[1.0, 0.7], [0.0, 1.0]],
            p(0.3, -0.2),
            Region::union(vec![
                Region::disk(p(0.0, 0.0), 1.0),
                Region::rect(p(0.0, -0.5), 2.0, 1.0),
            ]),
        );
        // disk ∪ rect: π + 2 - (half-disk strip overlap)
        let overlap = {
            // ∫_0^1 min(2·√(1-x²), 1) dx over the strip |w| ≤ 1/2
            let x0 = (0.75f64).sqrt();
            let inner = 0.5 * (x0 * (1.0 - x0 * x0).sqrt() + x0.asin());
            let tail = 0.5 * (PI / 2.0) - inner;
            x0 + 2.0 * tail
        };
        let m = sheared_union.measure().unwrap();
        assert!((m - (PI + 2.0 - overlap)).abs() < 1e-6 * m, "{m}");
    }

    #[test]
    fn contains_examples() {
        let d = Region::disk(p(0.0, 0.0), 1.0);
        assert!(d.contains(p(0.0, 0.0)));
        assert!(!d.contains(p(2.0, 0.0)));
        let ring = Region::difference(
            Region::disk(p(0.0, 0.0), 2.0),
            Region::disk(p(0.0, 0.0), 1.0),
        );
        assert!(ring.contains(p(1.5, 0.0)));
        assert!(!ring.contains(p(0.5, 0.0)));
        let sh = Region::affine([[1.0, 1.0], [0.0, 1.0]], p(0.0, 0.0), d.clone());
        assert!(sh.contains(p(0.9, 0.9)));
        assert!(!sh.contains(p(-0.9, 0.9)));
    }

    #[test]
    fn quadrature_examples() {
        let d = Region::disk(p(0.0, 0.0), 1.0);
        let rule = d.quadrature(32).unwrap();
        assert_abs_diff_eq!(rule.total_weight(), PI, epsilon = 1e-9);
        assert_abs_diff_eq!(rule.integrate(gaussian), 1.0 - (-PI).exp(), epsilon = 1e-13);
        let sq = Region::rect(p(0.0, 0.0), 1.0, 1.0).quadrature(8).unwrap();
        assert_abs_diff_eq!(sq.integrate(|_| 1.0), 1.0, epsilon = 1e-14);
        assert!(matches!(d.quadrature(3), Err(Error::OrderTooLow { .. })));
    }

    #[test]
    fn quadrature_converges_on_offset_disk() {
        let d = Region::disk(p(0.6, -0.4), 1.0);
        let reference = d.quadrature(128).unwrap().integrate(gaussian);
        let errs: Vec<f64> = [8usize, 16, 32, 64]
            .iter()
            .map(|&o| (d.quadrature(o).unwrap().integrate(gaussian) - reference).abs())
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] <= 0.5 * w[0] || w[1] < 5e-14, "{errs:?}");
        }
        assert!(errs[2] < 1e-13, "{errs:?}");
    }

    #[test]
    fn chord_rule_integrates_smooth_functions() {
        // annulus as a difference: compare with the primitive annulus rule
        let diff = Region::difference(
            Region::disk(p(0.2, 0.1), 1.5),
            Region::disk(p(0.2, 0.1), 0.5),
        );
        let ann = Region::annulus(p(0.2, 0.1), 0.5, 1.5);
        let a = diff.quadrature(24).unwrap().integrate(gaussian);
        let b = ann.quadrature(24).unwrap().integrate(gaussian);
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn affine_measure_preserved_for_symplectic_maps() {
        let base = Region::union(vec![
            Region::disk(p(0.0, 0.0), 0.7),
            Region::rect(p(2.0, 2.0), 0.5, 1.5),
        ]);
        let m0 = base.measure().unwrap();
        for m in [
            [[1.0, 0.0], [1.3, 1.0]],
            [[2.0, 0.0], [0.0, 0.5]],
            [[0.0, 1.0], [-1.0, 0.0]],
            [[1.0, 2.0], [0.5, 2.0]],
        ] {
            let img = Region::affine(m, p(0.4, -1.0), base.clone());
            assert_abs_diff_eq!(img.measure().unwrap(), m0, epsilon = 1e-9);
            let rule = img.quadrature(16).unwrap();
            assert_abs_diff_eq!(rule.total_weight(), m0, epsilon = 1e-9 * m0);
        }
    }

    #[test]
    fn nodes_lie_in_closure() {
        let regions = vec![
            Region::disk(p(0.3, 0.3), 1.2),
            Region::annulus(p(0.0, 1.0), 0.3, 0.9),
            Region::rect(p(-1.0, -0.5), 1.7, 0.6),
            Region::affine(
                [[1.0, 0.5], [0.0, 1.0]],
                p(0.1, 0.0),
                Region::disk(p(0.0, 0.0), 1.0),
            ),
            Region::union(vec![
                Region::disk(p(0.0, 0.0), 1.0),
                Region::disk(p(0.8, 0.0), 1.0),
            ]),
            Region::difference(
                Region::square(p(0.0, 0.0), 2.0),
                Region::disk(p(0.5, 0.5), 0.6),
            ),
        ];
        for r in regions {
            let rule = r.quadrature(12).unwrap();
            assert!(rule.weights.iter().all(|w| *w > 0.0));
            for z in &rule.nodes {
                assert!(r.contains_tol(*z, 1e-12), "{r:?} {z:?}");
            }
        }
    }

    #[test]
    fn validation_rejects_malformed_trees() {
        assert!(Region::disk(p(0.0, 0.0), -1.0).measure().is_err());
        assert!(Region::annulus(p(0.0, 0.0), 2.0, 1.0).measure().is_err());
        assert!(Region::union(vec![]).measure().is_err());
        let sing = Region::affine(
            [[1.0, 2.0], [2.0, 4.0]],
            p(0.0, 0.0),
            Region::disk(p(0.0, 0.0), 1.0),
        );
        assert!(matches!(sing.measure(), Err(Error::NonFiniteMeasure(_))));
    }

    #[test]
    fn json_schema() {
        let text = r#"{"type":"affine","matrix":[[1,0.5],[0,1]],"shift":[0,0],
            "child":{"type":"union","children":[{"type":"disk","center":[0,0],"r":1.0},
            {"type":"rect","corner":[3,3],"widths":[1,2]}]}}"#;
        let r: Region = serde_json::from_str(text).unwrap();
        assert_abs_diff_eq!(r.measure().unwrap(), PI + 2.0, epsilon = 1e-12);
        let back: Region = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn interval_algebra() {
        assert_eq!(
            merge(vec![(2.0, 3.0), (0.0, 1.0), (0.5, 2.5)]),
            vec![(0.0, 3.0)]
        );
        assert_eq!(
            subtract(&vec![(0.0, 4.0)], &vec![(1.0, 2.0), (3.0, 5.0)]),
            vec![(0.0, 1.0), (2.0, 3.0)]
        );
    }
}
