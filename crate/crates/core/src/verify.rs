//! Numerical checks of the construction.
//!
//! Checks only use public evaluation entry points of the kernel model and
//! build their own quadrature rules and wavelet samples.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{condition_report, BasisAssignment};
use crate::error::Result;
use crate::kernel::KernelModel;
use crate::operator::{AuxOperators, OperatorSpec, HS_BOUND};
use crate::quadrature::{GaussLegendre, Rule};
use crate::wavelet::{d_factor, MotherWavelet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub details: String,
}

impl CheckReport {
    /// Pass iff `measured <= bound + tolerance`.
    pub fn upper(name: &str, measured: f64, bound: f64, tolerance: f64, details: String) -> Self {
        let status = if measured <= bound + tolerance { Status::Pass } else { Status::Fail };
        Self { name: name.into(), status, measured, bound, tolerance, details }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{tag}] {} measured={:.6e} bound={:.6e} tol={:.1e} | {}",
            self.name, self.measured, self.bound, self.tolerance, self.details
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckReport>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(CheckReport::passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        out.push_str(&format!("summary: {} checks, {} failed\n", self.checks.len(), failed));
        out
    }
}

// ---------------------------------------------------------------------------
// quadrature built by the harness

/// Composite Gauss-Legendre rule with unit panels in the scaled variable of
/// every listed wavelet, `|2^j s - k| <= scaled_horizon`, clipped to
/// `|s| <= horizon` when given.
pub fn harness_rule(
    family: &[(i32, i64)],
    scaled_horizon: u32,
    nodes_per_panel: usize,
    horizon: Option<f64>,
) -> Rule {
    let mut bps = Vec::new();
    for &(j, k) in family {
        let h = scaled_horizon as i64;
        for m in (k - h)..=(k + h) {
            let s = m as f64 * 2f64.powi(-j);
            if horizon.is_none_or(|hz| s.abs() <= hz) {
                bps.push(s);
            }
        }
    }
    if let Some(hz) = horizon {
        bps.push(-hz);
        bps.push(hz);
    }
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    Rule::composite(&bps, &GaussLegendre::new(nodes_per_panel))
}

/// `nodes x family` matrix of reduced wavelet values `v_jk(s)`.
fn wavelet_samples(w: &MotherWavelet, family: &[(i32, i64)], nodes: &[f64]) -> DMatrix<f64> {
    let n = family.len();
    let flat: Vec<f64> = nodes
        .par_iter()
        .flat_map_iter(|&s| family.iter().map(move |&(j, k)| w.dyadic_eval_real(j, k, 0, s)))
        .collect();
    DMatrix::from_row_slice(nodes.len(), n, &flat)
}

fn weighted(values: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(values.nrows(), values.ncols(), |r, c| values[(r, c)] * weights[r])
}

// ---------------------------------------------------------------------------
// checks

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthoParams {
    /// Absolute half-width of the integration interval; `None` covers every
    /// wavelet out to the scaled horizon.
    pub horizon: Option<f64>,
    pub scaled_horizon: u32,
    pub nodes_per_panel: usize,
    pub tol: f64,
}

impl Default for OrthoParams {
    fn default() -> Self {
        Self { horizon: None, scaled_horizon: 48, nodes_per_panel: 24, tol: 1e-6 }
    }
}

pub fn check_orthonormality(w: &MotherWavelet, family: &[(i32, i64)], p: &OrthoParams) -> CheckReport {
    if family.is_empty() {
        return CheckReport::upper("orthonormality", 0.0, p.tol, 0.0, "empty index set".into());
    }
    let rule = harness_rule(family, p.scaled_horizon, p.nodes_per_panel, p.horizon);
    let v = wavelet_samples(w, family, &rule.nodes);
    let gram = weighted(&v, &rule.weights).transpose() * &v;
    let mut worst = (0.0, 0, 0);
    for a in 0..family.len() {
        for b in 0..family.len() {
            let target = if a == b { 1.0 } else { 0.0 };
            let dev = (gram[(a, b)] - target).abs();
            if dev > worst.0 {
                worst = (dev, a, b);
            }
        }
    }
    let (dev, a, b) = worst;
    CheckReport::upper(
        "orthonormality",
        dev,
        p.tol,
        0.0,
        format!(
            "{} functions, {} nodes; max |G - I| at ({:?}, {:?})",
            family.len(),
            rule.len(),
            family[a],
            family[b]
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceParams {
    pub m_test: usize,
    pub tol: f64,
    pub scaled_horizon: u32,
    pub nodes_per_panel: usize,
}

impl Default for EquivalenceParams {
    fn default() -> Self {
        Self { m_test: 12, tol: 1e-4, scaled_horizon: 40, nodes_per_panel: 20 }
    }
}

/// Matrix elements `<T u_m, u_l>` by double quadrature of the kernel,
/// for `l, m < m_test`.
pub fn quadrature_matrix_elements(model: &KernelModel, p: &EquivalenceParams) -> Result<(DMatrix<f64>, DMatrix<f64>, usize)> {
    let m = p.m_test.min(model.frame_len());
    let family = &model.frame[..m];
    let rule = harness_rule(&model.frame, p.scaled_horizon, p.nodes_per_panel, None);
    let wv = weighted(&wavelet_samples(model.wavelet(), family, &rule.nodes), &rule.weights);
    let eval = model.grid_evaluator(0, &rule.nodes)?;
    let mut re = DMatrix::zeros(m, m);
    let mut im = DMatrix::zeros(m, m);
    const BLOCK: usize = 512;
    for start in (0..rule.len()).step_by(BLOCK) {
        let end = (start + BLOCK).min(rule.len());
        let g = eval.rows(0, &rule.nodes[start..end])?;
        let wl = wv.rows(start, end - start);
        // conj(u_l) K u_m: the phases -i and i cancel
        re += wl.transpose() * (&g.re * &wv);
        im += wl.transpose() * (&g.im * &wv);
    }
    Ok((re, im, rule.len()))
}

pub fn check_equivalence(model: &KernelModel, spec: &OperatorSpec, p: &EquivalenceParams) -> Result<CheckReport> {
    let (re, im, nodes) = quadrature_matrix_elements(model, p)?;
    let m = re.nrows();
    let mut worst = (0.0, 0, 0);
    for l in 0..m {
        for c in 0..m {
            let want = spec.entry(model.f_order[l], model.f_order[c]);
            let dev = (re[(l, c)] - want.re).hypot(im[(l, c)] - want.im);
            if dev > worst.0 {
                worst = (dev, l, c);
            }
        }
    }
    Ok(CheckReport::upper(
        "equivalence",
        worst.0,
        p.tol,
        0.0,
        format!("{m}x{m} matrix elements, {nodes} nodes per axis; max residual at (l, m) = ({}, {})", worst.1, worst.2),
    ))
}

pub fn check_hs_bound(aux: &AuxOperators) -> CheckReport {
    CheckReport::upper(
        "hs_bound",
        aux.hs_sum,
        HS_BOUND,
        1e-12,
        format!("sum_n |Gamma* f_n|^2 over {} basis vectors vs pi^2/6", aux.gamma.ncols()),
    )
}

/// Largest ratio `sup |u_jk^(i)| / (D A_i)` over the listed wavelets, with
/// sups sampled on `|2^j s - k| <= 24` at step `1/16` in the scaled variable.
pub fn check_supnorm_entries(w: &MotherWavelet, family: &[(i32, i64)], i_max: usize) -> Result<CheckReport> {
    let a: Vec<f64> = (0..=i_max).map(|i| w.a_constant(i)).collect::<Result<_>>()?;
    let xs: Vec<f64> = (-384..=384).map(|n| n as f64 / 16.0).collect();
    let ratios: Vec<(f64, usize, usize)> = family
        .par_iter()
        .enumerate()
        .flat_map_iter(|(n, &(j, k))| {
            let a = &a;
            let xs = &xs;
            (0..=i_max).map(move |i| {
                let sup = xs
                    .iter()
                    .map(|x| {
                        let s = (x + k as f64) * 2f64.powi(-j);
                        w.dyadic_eval_real(j, k, i, s).abs()
                    })
                    .fold(0.0, f64::max);
                (sup / (d_factor(j) * a[i]), n, i)
            })
        })
        .collect();
    let violations = ratios.iter().filter(|r| r.0 > 1.0).count();
    let worst = ratios.iter().copied().fold((0.0, 0, 0), |b, r| if r.0 > b.0 { r } else { b });
    let at = family.get(worst.1).copied().unwrap_or((0, 0));
    Ok(CheckReport::upper(
        "supnorm_table",
        worst.0,
        1.0,
        0.0,
        format!(
            "{} wavelets x {} orders, {violations} violations; max sup/(D A_i) at (j,k) = {:?}, i = {}",
            family.len(),
            i_max + 1,
            at,
            worst.2
        ),
    ))
}

pub fn check_supnorm_table(a: &BasisAssignment, w: &MotherWavelet, i_max: usize) -> Result<CheckReport> {
    check_supnorm_entries(w, &a.frame_scales(), i_max)
}

/// Every `k z(e_k_perp) H_{n(k),i}` is at most `2^-k`.
pub fn check_conditions(a: &BasisAssignment, i_max: usize) -> Result<CheckReport> {
    let r = condition_report(a, i_max)?;
    let mut worst = (0.0f64, 0usize, 0usize);
    for o in &r.orders {
        for (k0, t) in o.sumrk.terms.iter().enumerate() {
            let ratio = t * 2f64.powi(k0 as i32 + 1);
            if ratio > worst.0 {
                worst = (ratio, k0 + 1, o.i);
            }
        }
    }
    Ok(CheckReport::upper(
        "condition_certificates",
        worst.0,
        1.0,
        0.0,
        format!(
            "max k z H 2^k over {} terms x {} orders at k = {}, i = {}",
            a.nk.len(),
            i_max + 1,
            worst.1,
            worst.2
        ),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessParams {
    pub order_cap: usize,
    pub points: usize,
    pub tol: f64,
    pub seed: u64,
    pub half_width: f64,
}

impl Default for SmoothnessParams {
    fn default() -> Self {
        Self { order_cap: 2, points: 10, tol: 1e-3, seed: 7, half_width: 3.0 }
    }
}

fn random_points(seed: u64, n: usize, half_width: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.random_range(-half_width..half_width), rng.random_range(-half_width..half_width)))
        .collect()
}

/// Central difference of `K` approximating `d^(i+j) K / ds^i dt^j` for
/// `1 <= i + j <= 2`, with its rounding bound `FD_ROUNDING eps max|K| |c|_1 / h^n`
/// (`c` the stencil weights).
fn finite_difference(model: &KernelModel, i: usize, j: usize, s: f64, t: f64) -> Result<(crate::C64, f64)> {
    let (h, stencil): (f64, Vec<(f64, f64, f64)>) = match (i, j) {
        (1, 0) => (1e-4, vec![(1.0, 0.0, 0.5), (-1.0, 0.0, -0.5)]),
        (0, 1) => (1e-4, vec![(0.0, 1.0, 0.5), (0.0, -1.0, -0.5)]),
        (2, 0) => (1e-3, vec![(1.0, 0.0, 1.0), (0.0, 0.0, -2.0), (-1.0, 0.0, 1.0)]),
        (0, 2) => (1e-3, vec![(0.0, 1.0, 1.0), (0.0, 0.0, -2.0), (0.0, -1.0, 1.0)]),
        (1, 1) => (
            1e-3,
            vec![(1.0, 1.0, 0.25), (1.0, -1.0, -0.25), (-1.0, 1.0, -0.25), (-1.0, -1.0, 0.25)],
        ),
        _ => unreachable!("orders above two are not differenced"),
    };
    let mut acc = crate::C64::new(0.0, 0.0);
    let mut peak = 0.0f64;
    let mut weight = 0.0;
    for (a, b, c) in stencil {
        let v = model.eval(0, 0, s + a * h, t + b * h)?.value;
        acc += v * c;
        peak = peak.max(v.norm());
        weight += c.abs();
    }
    let hn = h.powi((i + j) as i32);
    Ok((acc / hn, FD_ROUNDING * f64::EPSILON * peak * weight / hn))
}

/// Safety factor on the rounding bound of a finite difference.
pub const FD_ROUNDING: f64 = 64.0;

/// Relative error is `(|fd - exact| - rounding)+ / max(|exact|, 1e-2 * scale)`
/// with `scale` the largest `|exact|` over the sample at that order, so that
/// isolated near-zeros of a derivative do not dominate, and derivatives
/// below the resolution of the difference quotient are not charged to it.
pub fn check_smoothness(model: &KernelModel, p: &SmoothnessParams) -> Result<CheckReport> {
    let pts = random_points(p.seed, p.points, p.half_width);
    let cap = p.order_cap.min(2);
    let mut worst = (0.0f64, (0usize, 0usize), (0.0, 0.0));
    let mut unresolved = 0;
    let mut compared = 0;
    for total in 1..=cap {
        for i in 0..=total {
            let j = total - i;
            let exact: Vec<crate::C64> =
                pts.iter().map(|&(s, t)| model.eval(i, j, s, t).map(|v| v.value)).collect::<Result<_>>()?;
            let scale = exact.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if scale == 0.0 {
                continue;
            }
            for (&(s, t), ex) in pts.iter().zip(&exact) {
                let (fd, rounding) = finite_difference(model, i, j, s, t)?;
                compared += 1;
                if ex.norm() <= rounding {
                    unresolved += 1;
                }
                let rel = ((fd - ex).norm() - rounding).max(0.0) / ex.norm().max(1e-2 * scale);
                if rel > worst.0 {
                    worst = (rel, (i, j), (s, t));
                }
            }
        }
    }
    Ok(CheckReport::upper(
        "smoothness",
        worst.0,
        p.tol,
        0.0,
        format!(
            "{} points, orders i+j <= {cap}; worst (i,j) = {:?} at (s,t) = ({:.6}, {:.6}); {unresolved} of {compared} below difference resolution",
            p.points, worst.1, worst.2 .0, worst.2 .1
        ),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingParams {
    pub radii: Vec<f64>,
    /// Grid points per axis over `[-2R, 2R]`.
    pub points_per_axis: usize,
    pub threshold: f64,
    /// Allowed increase between consecutive annuli.
    pub slack: f64,
}

impl Default for VanishingParams {
    fn default() -> Self {
        Self { radii: vec![16.0, 32.0, 64.0, 128.0], points_per_axis: 257, threshold: 1e-3, slack: 1e-12 }
    }
}

/// `max |K|` over grid points with `R <= max(|s|, |t|) <= 2R`, and its location.
pub fn annulus_max(model: &KernelModel, r: f64, points_per_axis: usize) -> Result<(f64, f64, f64)> {
    let n = points_per_axis.max(2);
    let axis: Vec<f64> = (0..n).map(|m| -2.0 * r + 4.0 * r * m as f64 / (n - 1) as f64).collect();
    let g = model.grid(0, 0, &axis, &axis)?;
    let mut best = (0.0, 0.0, 0.0);
    for (a, &s) in axis.iter().enumerate() {
        for (b, &t) in axis.iter().enumerate() {
            if s.abs().max(t.abs()) < r {
                continue;
            }
            let v = g.get(a, b).norm();
            if v > best.0 {
                best = (v, s, t);
            }
        }
    }
    Ok(best)
}

pub fn check_vanishing(model: &KernelModel, p: &VanishingParams) -> Result<CheckReport> {
    let maxima = p
        .radii
        .iter()
        .map(|&r| annulus_max(model, r, p.points_per_axis))
        .collect::<Result<Vec<_>>>()?;
    let monotone = maxima.windows(2).all(|w| w[1].0 <= w[0].0 + p.slack);
    let last = maxima.last().map_or(0.0, |m| m.0);
    let listing = p
        .radii
        .iter()
        .zip(&maxima)
        .map(|(r, m)| format!("R={r}: {:.3e} at ({:.3}, {:.3})", m.0, m.1, m.2))
        .collect::<Vec<_>>()
        .join("; ");
    let mut report = CheckReport::upper(
        "vanishing",
        last,
        p.threshold,
        0.0,
        format!("{}non-increasing; {listing}", if monotone { "" } else { "NOT " }),
    );
    if !monotone {
        report.status = Status::Fail;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanParams {
    pub samples: usize,
    pub seed: u64,
    pub half_width: f64,
    pub tol: f64,
    pub step: f64,
    pub continuity_bound: f64,
    pub scaled_horizon: u32,
    pub nodes_per_panel: usize,
}

impl Default for CarlemanParams {
    fn default() -> Self {
        Self {
            samples: 10,
            seed: 11,
            half_width: 3.0,
            tol: 1e-4,
            step: 1e-3,
            continuity_bound: 1e-2,
            scaled_horizon: 40,
            nodes_per_panel: 20,
        }
    }
}

/// `|k(s)|^2` against `int |K(s,t)|^2 dt` (relative to `max(1, |k(s)|^2)`),
/// and `|k(s + step) - k(s)|` against the continuity bound.
pub fn check_carleman(model: &KernelModel, p: &CarlemanParams) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let ss: Vec<f64> = (0..p.samples).map(|_| rng.random_range(-p.half_width..p.half_width)).collect();
    let rule = harness_rule(&model.frame, p.scaled_horizon, p.nodes_per_panel, None);
    let g = model.grid(0, 0, &ss, &rule.nodes)?;
    let mut worst_norm = (0.0f64, 0.0);
    let mut worst_jump = (0.0f64, 0.0);
    for (r, &s) in ss.iter().enumerate() {
        let quad: f64 = (0..rule.len()).map(|c| rule.weights[c] * g.get(r, c).norm_sqr()).sum();
        let k = model.carleman(s);
        let dev = (quad - k.norm * k.norm).abs() / (k.norm * k.norm).max(1.0);
        if dev > worst_norm.0 {
            worst_norm = (dev, s);
        }
        let jump = (&model.carleman(s + p.step).coeffs - &k.coeffs).norm();
        if jump > worst_jump.0 {
            worst_jump = (jump, s);
        }
    }
    let mut report = CheckReport::upper(
        "carleman",
        worst_norm.0,
        p.tol,
        0.0,
        format!(
            "{} samples; max row-norm mismatch at s = {:.6}; max |k(s+{:.0e}) - k(s)| = {:.3e} at s = {:.6} (bound {:.0e})",
            p.samples, worst_norm.1, p.step, worst_jump.0, worst_jump.1, p.continuity_bound
        ),
    );
    if worst_jump.0 > p.continuity_bound {
        report.status = Status::Fail;
    }
    Ok(report)
}
