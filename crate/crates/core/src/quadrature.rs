//! Quadrature rules in one and two dimensions.

use crate::fock::PhasePoint;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { p0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.into_iter()
        .zip(w)
        .map(move |(x, w)| (mid + half * x, half * w))
}

/// Nodes and positive weights in the time-frequency plane.
#[derive(Debug, Clone, Default)]
pub struct QuadratureRule {
    pub nodes: Vec<PhasePoint>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: FnMut(PhasePoint) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }

    pub fn push(&mut self, z: PhasePoint, w: f64) {
        self.nodes.push(z);
        self.weights.push(w);
    }

    pub fn extend(&mut self, other: QuadratureRule) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }

    /// Rule for the image set `{A z + shift}`; weights pick up `|det A|`.
    pub fn mapped(&self, matrix: [[f64; 2]; 2], shift: PhasePoint) -> QuadratureRule {
        let det = (matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0]).abs();
        QuadratureRule {
            nodes: self
                .nodes
                .iter()
                .map(|z| {
                    PhasePoint::new(
                        matrix[0][0] * z.x + matrix[0][1] * z.w + shift.x,
                        matrix[1][0] * z.x + matrix[1][1] * z.w + shift.w,
                    )
                })
                .collect(),
            weights: self.weights.iter().map(|w| w * det).collect(),
        }
    }
}

/// Polar rule on the annulus `r_in ≤ |z - center| ≤ r_out`.
///
/// Radially, Gauss–Legendre in `t = πρ²` (so `dA = dt dθ / 2π`), split into
/// panels of length at most `max_panel_t`; `2·order` equispaced angles, which
/// is spectrally accurate for smooth periodic integrands.
pub fn polar_rule(
    center: PhasePoint,
    r_in: f64,
    r_out: f64,
    order: usize,
    max_panel_t: f64,
) -> QuadratureRule {
    let t0 = std::f64::consts::PI * r_in * r_in;
    let t1 = std::f64::consts::PI * r_out * r_out;
    let panels = (((t1 - t0) / max_panel_t).ceil() as usize).max(1);
    let n_angles = 2 * order;
    let (trig_c, trig_s): (Vec<f64>, Vec<f64>) = (0..n_angles)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / n_angles as f64;
            (th.cos(), th.sin())
        })
        .unzip();
    let mut rule = QuadratureRule::default();
    let dt = (t1 - t0) / panels as f64;
    for p in 0..panels {
        let a = t0 + p as f64 * dt;
        for (t, wt) in gauss_legendre_on(order, a, a + dt) {
            let rho = (t / std::f64::consts::PI).sqrt();
            let w = wt / n_angles as f64;
            for j in 0..n_angles {
                rule.push(
                    PhasePoint::new(center.x + rho * trig_c[j], center.w + rho * trig_s[j]),
                    w,
                );
            }
        }
    }
    rule
}
