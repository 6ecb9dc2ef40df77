//! Gauss–Legendre rules and composite rules adapted to dyadic scales.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are Newton-refined roots of `P_n`, starting from the
    /// Tricomi-type initial guess; accurate to a few ulps for `n` in the
    /// thousands.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
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

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely onto `[a, b]`, appended to the
    /// output vectors.
    pub fn push_mapped(&self, a: f64, b: f64, nodes: &mut Vec<f64>, weights: &mut Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A one-dimensional quadrature rule: arbitrary nodes with weights.
#[derive(Debug, Clone, Default)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Composite rule with one copy of `panel` on each interval between
    /// consecutive breakpoints (breakpoints must be sorted).
    pub fn composite(breakpoints: &[f64], panel: &GaussLegendre) -> Self {
        let mut rule = Rule::default();
        for w in breakpoints.windows(2) {
            if w[1] > w[0] {
                panel.push_mapped(w[0], w[1], &mut rule.nodes, &mut rule.weights);
            }
        }
        rule
    }

    pub fn uniform(a: f64, b: f64, panels: usize, panel: &GaussLegendre) -> Self {
        let bps: Vec<f64> = (0..=panels)
            .map(|p| a + (b - a) * p as f64 / panels as f64)
            .collect();
        Self::composite(&bps, panel)
    }

    /// Composite rule over `[-horizon, horizon]` with about `total_points`
    /// nodes, in panels of 16.
    pub fn symmetric(horizon: f64, total_points: usize) -> Self {
        let panel = GaussLegendre::new(16);
        let panels = total_points.div_ceil(16).max(1);
        Self::uniform(-horizon, horizon, panels, &panel)
    }

    /// Composite rule resolving every function of a dyadic family.
    ///
    /// For each `(j, k)` the panels are the unit intervals of the scaled
    /// variable `x = 2^j s - k` over `|x| <= scaled_horizon`; the union of all
    /// breakpoints is used, so each panel is at most one scaled unit wide for
    /// every function whose support it meets. Breakpoints are exact dyadic
    /// rationals, which keeps deduplication exact.
    pub fn dyadic(family: &[(i32, i64)], scaled_horizon: u32, nodes_per_panel: usize) -> Self {
        let mut bps = Vec::new();
        let h = scaled_horizon as i64;
        for &(j, k) in family {
            let sigma = 2f64.powi(-j);
            for m in -h..=h {
                bps.push(sigma * (k + m) as f64);
            }
        }
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        Self::composite(&bps, &GaussLegendre::new(nodes_per_panel))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}
