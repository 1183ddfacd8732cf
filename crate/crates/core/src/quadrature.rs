//! One-dimensional Gauss–Legendre rules and an adaptive point-doubling
//! driver.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Points per panel in composite rules.
pub const PANEL_ORDER: usize = 16;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared cached rule.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::new(n)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre with `points` total nodes split into
/// equal panels of [`PANEL_ORDER`] nodes.
pub fn composite(a: f64, b: f64, points: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let panels = (points / PANEL_ORDER).max(1);
    let rule = GaussLegendre::cached(PANEL_ORDER);
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        s += rule.integrate(lo, lo + h, &mut f);
    }
    s
}

/// Nodes and weights of the composite rule used by [`composite`].
pub fn composite_nodes(a: f64, b: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = (points / PANEL_ORDER).max(1);
    let rule = GaussLegendre::cached(PANEL_ORDER);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * PANEL_ORDER);
    let mut ws = Vec::with_capacity(panels * PANEL_ORDER);
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            xs.push(mid + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Outcome of [`adaptive_doubling`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive {
    pub value: f64,
    /// Node count of the accepted evaluation.
    pub points: usize,
    /// Absolute change between the last two refinements.
    pub est_error: f64,
    pub converged: bool,
}

/// Evaluates `eval(n)` for `n = start, 2 start, ...` until the relative
/// change drops below `rel_tol` or `max_points` is exceeded.
pub fn adaptive_doubling(
    start: usize,
    max_points: usize,
    rel_tol: f64,
    mut eval: impl FnMut(usize) -> f64,
) -> Adaptive {
    let mut n = start.max(PANEL_ORDER);
    let mut prev = eval(n);
    loop {
        let m = 2 * n;
        let cur = eval(m);
        let diff = (cur - prev).abs();
        let ok = diff <= rel_tol * cur.abs() || (cur == 0.0 && prev == 0.0);
        if ok || 2 * m > max_points || !cur.is_finite() {
            return Adaptive {
                value: cur,
                points: m,
                est_error: diff,
                converged: ok && cur.is_finite(),
            };
        }
        prev = cur;
        n = m;
    }
}

/// Endpoint-clustering map on `[-1, 1]`: `phi(+-1) = +-1` with
/// `phi'(t) = (35/16)(1 - t^2)^3`, so all derivatives up to third order
/// vanish at both ends.
pub fn cluster_map(t: f64) -> (f64, f64) {
    let t2 = t * t;
    let phi = 35.0 / 16.0 * t * (1.0 - t2 + 0.6 * t2 * t2 - t2 * t2 * t2 / 7.0);
    let d = 35.0 / 16.0 * (1.0 - t2).powi(3);
    (phi, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn small_rules_match_tabulated_values() {
        let g = GaussLegendre::new(2);
        assert!((g.nodes[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((g.weights[0] - 1.0).abs() < 1e-15);
        let g = GaussLegendre::new(3);
        assert!((g.nodes[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((g.weights[1] - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(g.nodes[1], 0.0);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 5, 16, 33, 64] {
            let g = GaussLegendre::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}");
        }
    }

    proptest! {
        #[test]
        fn exact_for_polynomials(k in 0usize..32) {
            let g = GaussLegendre::new(16);
            let v = g.integrate(0.0, 1.0, |x| x.powi(k as i32));
            prop_assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn composite_smooth_periodic() {
        let v = composite(0.0, 2.0 * PI, 64, |x| (x.cos()).exp());
        // 2 pi I0(1)
        assert!((v - 2.0 * PI * 1.266_065_877_752_008_4).abs() < 1e-12);
        let (xs, ws) = composite_nodes(0.0, 1.0, 32);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x * x).sum();
        assert!((s - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_converges_on_sqrt() {
        let r = adaptive_doubling(16, 1 << 16, 1e-8, |n| composite(0.0, 1.0, n, f64::sqrt));
        assert!(r.converged);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn cluster_map_endpoints() {
        assert!((cluster_map(1.0).0 - 1.0).abs() < 1e-15);
        assert!((cluster_map(-1.0).0 + 1.0).abs() < 1e-15);
        assert_eq!(cluster_map(1.0).1, 0.0);
        let v = composite(-1.0, 1.0, 64, |t| cluster_map(t).1);
        assert!((v - 2.0).abs() < 1e-14);
    }
}
