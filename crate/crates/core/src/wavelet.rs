//! Lemarié–Meyer mother wavelet with a `C^inf` bell, its derivatives and the
//! dyadic family `u_jk(s) = 2^(j/2) u(2^j s - k)`.
//!
//! The defining integral
//! `u(s) = (1/2pi) int e^(i xi (1/2 + s)) sgn(xi) b(|xi|) d xi`
//! equals `i * v(s)` with the real function
//! `v(s) = (1/pi) int_0^inf sin(xi (s + 1/2)) b(xi) d xi`.
//! Everything here is computed from `v`; [`MotherWavelet::mother_eval`]
//! multiplies the factor `i` back in. The constant phase does not affect
//! orthonormality, norms, or any bound.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::C64;

pub const SUPPORT_LO: f64 = 2.0 * PI / 3.0;
pub const SUPPORT_HI: f64 = 8.0 * PI / 3.0;

/// Largest derivative order supported by [`MotherWavelet::standard`].
pub const DEFAULT_MAX_ORDER: usize = 8;

/// Beyond `|s + 1/2| > EVAL_CUTOFF` every derivative is reported as 0; the
/// true values there are below `1e-15`.
pub const EVAL_CUTOFF: f64 = 1024.0;

/// Up to this `|s + 1/2|` the single converged rule is used; beyond it,
/// composite panels.
const GLOBAL_RULE_LIMIT: f64 = 32.0;
const PANEL_ORDER: usize = 64;
/// Oscillation periods per composite panel, at most.
const PERIODS_PER_PANEL: f64 = 8.0;
const MAX_PANEL_LEVEL: u32 = 7;

/// Grid used for the empirical sup-norms `sup |v^(i)|`.
pub const SUP_GRID_HALF_WIDTH: f64 = 64.0;
pub const SUP_GRID_STEP: f64 = 1.0 / 32.0;

fn e_step(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth step `nu(x) = e(x) / (e(x) + e(1 - x))`, with `nu(x) + nu(1 - x) = 1`.
pub fn nu(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = e_step(x);
    a / (a + e_step(1.0 - x))
}

/// The Meyer bell `b` on `[2pi/3, 8pi/3]`.
pub fn bell_eval(xi: f64) -> f64 {
    if !(SUPPORT_LO..=SUPPORT_HI).contains(&xi) {
        0.0
    } else if xi <= 4.0 * PI / 3.0 {
        (FRAC_PI_2 * nu(3.0 * xi / (2.0 * PI) - 1.0)).sin()
    } else {
        (FRAC_PI_2 * nu(3.0 * xi / (4.0 * PI) - 1.0)).cos()
    }
}

/// Node table of one quadrature layout: `xi` nodes and, per derivative
/// order `i`, the weights `w * b(xi) * xi^i / pi`.
#[derive(Debug, Clone)]
struct NodeTable {
    xi: Vec<f64>,
    weighted: Vec<Vec<f64>>,
}

impl NodeTable {
    fn new(panels: usize, gl: &GaussLegendre, max_order: usize) -> Self {
        let mut xi = Vec::with_capacity(panels * gl.order());
        let mut w = Vec::with_capacity(panels * gl.order());
        let width = (SUPPORT_HI - SUPPORT_LO) / panels as f64;
        for p in 0..panels {
            let a = SUPPORT_LO + width * p as f64;
            gl.push_mapped(a, a + width, &mut xi, &mut w);
        }
        let base: Vec<f64> = xi.iter().zip(&w).map(|(x, w)| w * bell_eval(*x) / PI).collect();
        let weighted = (0..=max_order)
            .map(|i| base.iter().zip(&xi).map(|(b, x)| b * x.powi(i as i32)).collect())
            .collect();
        Self { xi, weighted }
    }

    /// `v^(i)(s)` for `i = 0..out.len()` at `y = s + 1/2`.
    fn eval_orders(&self, y: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (n, &x) in self.xi.iter().enumerate() {
            let (s, c) = (x * y).sin_cos();
            let rot = [s, c, -s, -c];
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.weighted[i][n] * rot[i % 4];
            }
        }
    }

    fn eval(&self, i: usize, y: f64) -> f64 {
        let w = &self.weighted[i];
        let mut acc = 0.0;
        match i % 4 {
            0 | 2 => {
                for (x, w) in self.xi.iter().zip(w) {
                    acc += w * (x * y).sin();
                }
            }
            _ => {
                for (x, w) in self.xi.iter().zip(w) {
                    acc += w * (x * y).cos();
                }
            }
        }
        if i % 4 >= 2 {
            -acc
        } else {
            acc
        }
    }
}

/// Bound constants `D(j) * A_i` for one scale and order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupNormBound {
    pub empirical_sup: f64,
    pub certified_bound: f64,
}

#[derive(Debug)]
pub struct MotherWavelet {
    max_order: usize,
    quad_order: usize,
    global: NodeTable,
    /// `panels[l]` has `2^l` panels of [`PANEL_ORDER`] nodes.
    panels: Vec<NodeTable>,
    sup: Vec<f64>,
    sup_at: Vec<f64>,
}

/// Probe points for the order-doubling convergence test.
const PROBES: [f64; 5] = [-2.3, -0.7, 0.0, 1.1, 3.7];

impl MotherWavelet {
    /// Builds the quadrature tables, doubling the Gauss-Legendre order from
    /// `base_order` until two successive orders agree to `1e-10` (relative
    /// to the largest probe value of each order) at every probe.
    pub fn new(max_order: usize, base_order: usize) -> Result<Self> {
        if base_order < 8 {
            return Err(Error::InvalidParameter(format!("quadrature order {base_order} too small")));
        }
        let mut order = base_order;
        let mut table = NodeTable::new(1, &GaussLegendre::new(order), max_order);
        loop {
            let next = NodeTable::new(1, &GaussLegendre::new(2 * order), max_order);
            let agree = (0..=max_order).all(|i| {
                let a: Vec<f64> = PROBES.iter().map(|&s| table.eval(i, s + 0.5)).collect();
                let b: Vec<f64> = PROBES.iter().map(|&s| next.eval(i, s + 0.5)).collect();
                let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-10 * scale)
            });
            if agree {
                break;
            }
            if order >= 1 << 14 {
                return Err(Error::InvalidParameter("wavelet quadrature did not converge".into()));
            }
            order *= 2;
            table = next;
        }
        let gl = GaussLegendre::new(PANEL_ORDER);
        let panels = (0..=MAX_PANEL_LEVEL)
            .map(|l| NodeTable::new(1 << l, &gl, max_order))
            .collect();
        let mut w = Self {
            max_order,
            quad_order: order,
            global: table,
            panels,
            sup: vec![],
            sup_at: vec![],
        };
        let (sup, sup_at) = w.empirical_sups();
        w.sup = sup;
        w.sup_at = sup_at;
        Ok(w)
    }

    /// Shared instance with derivative orders up to [`DEFAULT_MAX_ORDER`]
    /// and base quadrature order 256.
    pub fn standard() -> &'static MotherWavelet {
        static W: OnceLock<MotherWavelet> = OnceLock::new();
        W.get_or_init(|| MotherWavelet::new(DEFAULT_MAX_ORDER, 256).expect("standard wavelet"))
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Converged order of the global Gauss-Legendre rule.
    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    fn table_for(&self, y: f64) -> Option<&NodeTable> {
        let ay = y.abs();
        if ay <= GLOBAL_RULE_LIMIT {
            Some(&self.global)
        } else if ay > EVAL_CUTOFF {
            None
        } else {
            let need = (ay / PERIODS_PER_PANEL).ceil() as u64;
            let level = need.next_power_of_two().trailing_zeros().min(MAX_PANEL_LEVEL);
            Some(&self.panels[level as usize])
        }
    }

    fn check_order(&self, i: usize) -> Result<()> {
        if i > self.max_order {
            return Err(Error::OrderExceeded { requested: i, max: self.max_order });
        }
        Ok(())
    }

    /// Real reduced form `v^(i)(s)`; `u^(i) = i * v^(i)`.
    ///
    /// Panics if `i` exceeds [`max_order`](Self::max_order).
    pub fn eval_real(&self, i: usize, s: f64) -> f64 {
        assert!(i <= self.max_order, "derivative order {i} > {}", self.max_order);
        let y = s + 0.5;
        self.table_for(y).map_or(0.0, |t| t.eval(i, y))
    }

    /// `v^(i)(s)` for all `i < out.len()` at once.
    pub fn eval_real_orders(&self, s: f64, out: &mut [f64]) {
        assert!(out.len() <= self.max_order + 1);
        let y = s + 0.5;
        match self.table_for(y) {
            Some(t) => t.eval_orders(y, out),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    /// `u^(i)(s)`.
    pub fn mother_eval(&self, i: usize, s: f64) -> Result<C64> {
        self.check_order(i)?;
        Ok(C64::new(0.0, self.eval_real(i, s)))
    }

    /// `u_jk^(i)(s) = 2^(j/2 + ij) u^(i)(2^j s - k)`.
    pub fn dyadic_eval(&self, j: i32, k: i64, i: usize, s: f64) -> Result<C64> {
        self.check_order(i)?;
        Ok(C64::new(0.0, self.dyadic_eval_real(j, k, i, s)))
    }

    pub fn dyadic_eval_real(&self, j: i32, k: i64, i: usize, s: f64) -> f64 {
        dyadic_factor(j, i) * self.eval_real(i, dyadic_arg(j, k, s))
    }

    /// Empirical `sup |u^(i)|` over the sample grid, refined locally.
    pub fn sup_abs(&self, i: usize) -> Result<f64> {
        self.check_order(i)?;
        Ok(self.sup[i])
    }

    /// Point where [`sup_abs`](Self::sup_abs) is attained.
    pub fn sup_location(&self, i: usize) -> Result<f64> {
        self.check_order(i)?;
        Ok(self.sup_at[i])
    }

    /// `A_i = 2^((i + 1/2)^2) sup |u^(i)|`.
    pub fn a_constant(&self, i: usize) -> Result<f64> {
        Ok(2f64.powf((i as f64 + 0.5).powi(2)) * self.sup_abs(i)?)
    }

    pub fn sup_norm_bound(&self, j: i32, i: usize) -> Result<SupNormBound> {
        Ok(SupNormBound {
            empirical_sup: dyadic_factor(j, i) * self.sup_abs(i)?,
            certified_bound: d_factor(j) * self.a_constant(i)?,
        })
    }

    fn empirical_sups(&self) -> (Vec<f64>, Vec<f64>) {
        let n = (2.0 * SUP_GRID_HALF_WIDTH / SUP_GRID_STEP).round() as usize;
        let mut best = vec![(0.0f64, 0.0f64); self.max_order + 1];
        let mut vals = vec![0.0; self.max_order + 1];
        for m in 0..=n {
            let s = -SUP_GRID_HALF_WIDTH + SUP_GRID_STEP * m as f64;
            self.eval_real_orders(s, &mut vals);
            for (b, v) in best.iter_mut().zip(&vals) {
                if v.abs() > b.0 {
                    *b = (v.abs(), s);
                }
            }
        }
        // golden-section refinement around the best grid point
        let g = 0.5 * (5f64.sqrt() - 1.0);
        best.iter()
            .enumerate()
            .map(|(i, &(v0, s0))| {
                let f = |s: f64| self.eval_real(i, s).abs();
                let (mut a, mut b) = (s0 - SUP_GRID_STEP, s0 + SUP_GRID_STEP);
                for _ in 0..60 {
                    let c = b - g * (b - a);
                    let d = a + g * (b - a);
                    if f(c) > f(d) {
                        b = d;
                    } else {
                        a = c;
                    }
                }
                let s = 0.5 * (a + b);
                let v = f(s);
                if v > v0 {
                    (v, s)
                } else {
                    (v0, s0)
                }
            })
            .unzip()
    }

    /// Writes `s,v` rows of `v^(i)` on `n` equispaced points of `[s0, s1]`.
    pub fn write_samples_csv<W: Write>(&self, out: &mut W, i: usize, s0: f64, s1: f64, n: usize) -> Result<()> {
        self.check_order(i)?;
        writeln!(out, "s,v{i}")?;
        for m in 0..n {
            let s = if n > 1 { s0 + (s1 - s0) * m as f64 / (n - 1) as f64 } else { s0 };
            writeln!(out, "{s:.12e},{:.16e}", self.eval_real(i, s))?;
        }
        Ok(())
    }
}

/// `2^(j/2 + ij)`, the chain-rule factor of `u_jk^(i)`.
pub fn dyadic_factor(j: i32, i: usize) -> f64 {
    2f64.powf(j as f64 * (0.5 + i as f64))
}

/// `2^j s - k`.
pub fn dyadic_arg(j: i32, k: i64, s: f64) -> f64 {
    2f64.powi(j) * s - k as f64
}

/// `D = 2^(j^2)` for `j > 0`, `(1/sqrt 2)^|j|` otherwise.
pub fn d_factor(j: i32) -> f64 {
    if j > 0 {
        2f64.powi(j * j)
    } else {
        2f64.powf(-0.5 * j.unsigned_abs() as f64)
    }
}
