//! Gauss–Legendre rules and an adaptive bisection integrator built on them.

use std::sync::OnceLock;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial roots.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess for the i-th largest root.
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
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// The 16-point rule used throughout the crate.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(16))
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const MAX_DEPTH: usize = 40;

/// Adaptive Gauss–Legendre integration of a vector-valued integrand.
///
/// Each panel is compared against the sum over its two halves; panels are
/// bisected until the discrepancy falls below `rel_tol` times the magnitude
/// of the running integral. Returns the componentwise integral.
pub fn adaptive_vec(f: &dyn Fn(f64) -> Vec<f64>, a: f64, b: f64, rel_tol: f64) -> Vec<f64> {
    let rule = GaussLegendre::standard();
    let panel = |lo: f64, hi: f64| -> Vec<f64> {
        let mut acc: Vec<f64> = Vec::new();
        for (x, w) in rule.mapped(lo, hi) {
            let v = f(x);
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (a, vi) in acc.iter_mut().zip(v) {
                *a += w * vi;
            }
        }
        acc
    };
    let whole = panel(a, b);
    let scale = norm(&whole).max(f64::MIN_POSITIVE);
    let mut out = vec![0.0; whole.len()];
    refine(&panel, a, b, whole, rel_tol * scale, 0, &mut out);
    out
}

fn refine(
    panel: &dyn Fn(f64, f64) -> Vec<f64>,
    a: f64,
    b: f64,
    whole: Vec<f64>,
    abs_tol: f64,
    depth: usize,
    out: &mut [f64],
) {
    let mid = 0.5 * (a + b);
    let left = panel(a, mid);
    let right = panel(mid, b);
    let halves: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
    let diff: Vec<f64> = halves.iter().zip(&whole).map(|(h, w)| h - w).collect();
    if norm(&diff) <= abs_tol || depth >= MAX_DEPTH {
        for (o, h) in out.iter_mut().zip(&halves) {
            *o += h;
        }
        return;
    }
    refine(panel, a, mid, left, 0.5 * abs_tol, depth + 1, out);
    refine(panel, mid, b, right, 0.5 * abs_tol, depth + 1, out);
}

/// Scalar convenience wrapper around [`adaptive_vec`].
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    adaptive_vec(&|x| vec![f(x)], a, b, rel_tol)[0]
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(16);
        // degree 31 is the exactness limit of a 16-point rule
        let got = rule.integrate(|x| x.powi(30), -1.0, 1.0);
        assert!((got - 2.0 / 31.0).abs() < 1e-14);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_rule_has_center_node() {
        let rule = GaussLegendre::new(5);
        assert!(rule.nodes[2].abs() < 1e-15);
        assert!((rule.integrate(|x| x * x, 0.0, 3.0) - 9.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let got = adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12);
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!(((got - exact) / exact).abs() < 1e-10, "{got} vs {exact}");
    }
}
