//! Small numerical helpers: Gauss-Legendre rules, composite panels, fits.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// ∫_a^b f.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }

    /// Composite rule with `panels` equal panels on [a, b].
    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let panels = panels.max(1);
        let w = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * w;
                self.integrate(lo, lo + w, &mut f)
            })
            .sum()
    }

    /// (node, weight) pairs of the composite rule on [a, b].
    pub fn composite_points(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let panels = panels.max(1);
        let w = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * w;
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                out.push((c + 0.5 * w * x, 0.5 * w * wt));
            }
        }
        out
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Nonnegative least squares for two columns: min ‖a c₁ + b c₂ − y‖, c ≥ 0.
pub fn nnls2(a: &[f64], b: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let resid = |c1: f64, c2: f64| {
        a.iter()
            .zip(b)
            .zip(y)
            .map(|((p, q), t)| (c1 * p + c2 * q - t).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (aa, bb, ab, ay, by) = (dot(a, a), dot(b, b), dot(a, b), dot(a, y), dot(b, y));
    let det = aa * bb - ab * ab;
    let mut cands = vec![(0.0, 0.0), ((ay / aa).max(0.0), 0.0), (0.0, (by / bb).max(0.0))];
    if det.abs() > 1e-300 {
        let c1 = (ay * bb - by * ab) / det;
        let c2 = (by * aa - ay * ab) / det;
        if c1 >= 0.0 && c2 >= 0.0 {
            cands.push((c1, c2));
        }
    }
    cands
        .into_iter()
        .map(|(c1, c2)| (c1, c2, resid(c1, c2)))
        .min_by(|p, q| p.2.total_cmp(&q.2))
        .unwrap()
}
