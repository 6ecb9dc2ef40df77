//! The kernel `K = P + F` of the transported operator `T = U S U^-1`.
//!
//! * `P(s,t) = sum_k h_{n(k)}(s) conj((T* h_{n(k)})(t))` carries `Q`;
//! * `F(s,t) = sum_n s_n^(1/2) (U B* q_n)(s) conj((U B p_n)(t))` carries `J*`.
//!
//! Both are finite sums of products of frame wavelets, so the model stores
//! a low-rank factorization `K(s,t) = sum_r a_r(s) conj(b_r(t))` with
//! `a_r = sum_w left[r,w] u_w`, `b_r = sum_w right[r,w] u_w`. The constant
//! phase of the wavelet cancels in every product, so evaluation runs on the
//! real reduced wavelet values.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::BasisAssignment;
use crate::error::{Error, Result};
use crate::operator::{AuxOperators, OperatorSpec};
use crate::quadrature::Rule;
use crate::schmidt::{BOperator, SchmidtSystem};
use crate::wavelet::{d_factor, dyadic_arg, dyadic_factor, MotherWavelet};
use crate::C64;

pub const KERNEL_FORMAT_VERSION: u32 = 1;

/// Rows evaluated per parallel task in grid evaluation.
const GRID_CHUNK: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct PRow {
    /// 1-based ordinal of `e_k_perp`.
    pub k: usize,
    /// Frame position of `h_{n(k)}`.
    pub h_frame: usize,
    /// `k z(e_k_perp)`.
    pub kz: f64,
    /// Frame coefficients of `T* h_{n(k)} = U S* e_k_perp`.
    pub coeffs: DVector<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FTerm {
    /// `s_n^(1/2)`.
    pub weight: f64,
    /// Frame coefficients of `U B* q_n`.
    pub left: DVector<C64>,
    /// Frame coefficients of `U B p_n`.
    pub right: DVector<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelOptions {
    pub max_p_terms: Option<usize>,
    pub max_f_terms: Option<usize>,
    /// Cap on `i + j` for kernel derivatives.
    pub max_order: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { max_p_terms: None, max_f_terms: None, max_order: 8 }
    }
}

/// Composite rule parameters resolving every frame wavelet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureParams {
    /// Half-width in scaled units `2^j s - k` covered for every wavelet.
    pub scaled_horizon: u32,
    pub nodes_per_panel: usize,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        Self { scaled_horizon: 40, nodes_per_panel: 20 }
    }
}

#[derive(Debug, Clone)]
pub struct KernelModel {
    wavelet: &'static MotherWavelet,
    pub dim: usize,
    pub max_order: usize,
    /// `(j, k)` of every frame wavelet.
    pub frame: Vec<(i32, i64)>,
    /// Operator index paired with each frame position.
    pub f_order: Vec<usize>,
    pub p_rows: Vec<PRow>,
    pub f_terms: Vec<FTerm>,
    /// `sum_t weight_t lambda_t rho_t` over omitted terms, where
    /// `lambda, rho` are `sum_w |coeff_w| D_w` of the two factors; the
    /// truncation residual at order `(i, j)` is `A_i A_j` times this.
    pub omitted_mass: f64,
    left: DMatrix<C64>,
    right: DMatrix<C64>,
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn weighted_l1(frame: &[(i32, i64)], v: &DVector<C64>) -> f64 {
    v.iter().zip(frame).map(|(c, (j, _))| c.norm() * d_factor(*j)).sum()
}

pub fn build_kernel(
    spec: &OperatorSpec,
    aux: &AuxOperators,
    sys: &SchmidtSystem,
    b: &BOperator,
    assignment: &BasisAssignment,
    opts: &KernelOptions,
) -> Result<KernelModel> {
    let dim = spec.dim();
    check_dim(dim, aux.j.nrows())?;
    check_dim(dim, sys.dim)?;
    check_dim(dim, b.dim)?;
    check_dim(dim, assignment.f_order.len())?;
    check_dim(spec.perp_indices().len(), aux.z_perp.len())?;
    let frame = assignment.frame_scales();

    let mut p_all = Vec::with_capacity(spec.perp_indices().len());
    for (k0, &m) in spec.perp_indices().iter().enumerate() {
        let coeffs = DVector::from_iterator(dim, assignment.f_order.iter().map(|&n| spec.entry(m, n).conj()));
        p_all.push(PRow {
            k: k0 + 1,
            h_frame: assignment.op_to_frame[m],
            kz: (k0 + 1) as f64 * aux.z_perp[k0],
            coeffs,
        });
    }
    let f_all: Vec<FTerm> = sys
        .s
        .iter()
        .zip(b.s_quarter.iter().zip(b.p.iter().zip(&b.q)))
        .map(|(s, (sq, (p, q)))| FTerm {
            weight: s.sqrt(),
            left: assignment.transport(&(p * C64::new(*sq, 0.0))),
            right: assignment.transport(&(q * C64::new(*sq, 0.0))),
        })
        .collect();

    let kp = opts.max_p_terms.unwrap_or(p_all.len()).min(p_all.len());
    let kf = opts.max_f_terms.unwrap_or(f_all.len()).min(f_all.len());
    let omitted_p: f64 = p_all[kp..]
        .iter()
        .map(|r| d_factor(frame[r.h_frame].0) * weighted_l1(&frame, &r.coeffs))
        .sum();
    let omitted_f: f64 = f_all[kf..]
        .iter()
        .map(|t| t.weight * weighted_l1(&frame, &t.left) * weighted_l1(&frame, &t.right))
        .sum();
    p_all.truncate(kp);
    let mut f_terms = f_all;
    f_terms.truncate(kf);
    KernelModel::assemble(
        MotherWavelet::standard(),
        dim,
        opts.max_order,
        frame,
        assignment.f_order.clone(),
        p_all,
        f_terms,
        omitted_p + omitted_f,
    )
}

/// The P-row coefficients recomputed through `Gamma`:
/// `c_k[w] = k z(e_k_perp) Gamma[op(w), perp_k]`.
pub fn p_coefficients_via_gamma(
    spec: &OperatorSpec,
    aux: &AuxOperators,
    assignment: &BasisAssignment,
) -> Vec<DVector<C64>> {
    spec.perp_indices()
        .iter()
        .enumerate()
        .map(|(k0, &m)| {
            let kz = (k0 + 1) as f64 * aux.z_perp[k0];
            DVector::from_iterator(
                spec.dim(),
                assignment.f_order.iter().map(|&n| aux.gamma[(n, m)] * kz),
            )
        })
        .collect()
}

/// One kernel value with its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: C64,
    pub p_part: C64,
    pub f_part: C64,
    /// Bound on the omitted terms at this derivative order.
    pub residual: f64,
}

/// Dense block of kernel values, rows indexed by `s`, columns by `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl KernelGrid {
    pub fn get(&self, r: usize, c: usize) -> C64 {
        C64::new(self.re[(r, c)], self.im[(r, c)])
    }

    /// `(max |K|, row, col)`; first occurrence in row-major order.
    pub fn max_abs(&self) -> (f64, usize, usize) {
        let mut best = (0.0, 0, 0);
        for r in 0..self.re.nrows() {
            for c in 0..self.re.ncols() {
                let v = self.re[(r, c)].hypot(self.im[(r, c)]);
                if v > best.0 {
                    best = (v, r, c);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanValue {
    /// Frame coefficients of `k(s) = conj(K(s, .))`.
    pub coeffs: DVector<C64>,
    pub norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum ApplyRoute<'a> {
    /// Coefficient algebra on the factors.
    Frame,
    /// `int K(s,t) f(t) dt` on the rule's nodes, projected back onto the frame.
    Quadrature(&'a Rule),
}

impl KernelModel {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        wavelet: &'static MotherWavelet,
        dim: usize,
        max_order: usize,
        frame: Vec<(i32, i64)>,
        f_order: Vec<usize>,
        p_rows: Vec<PRow>,
        f_terms: Vec<FTerm>,
        omitted_mass: f64,
    ) -> Result<Self> {
        if max_order > wavelet.max_order() {
            return Err(Error::OrderExceeded { requested: max_order, max: wavelet.max_order() });
        }
        let w = frame.len();
        check_dim(dim, w)?;
        check_dim(dim, f_order.len())?;
        let r = p_rows.len() + f_terms.len();
        let mut left = DMatrix::zeros(r, w);
        let mut right = DMatrix::zeros(r, w);
        for (n, row) in p_rows.iter().enumerate() {
            check_dim(w, row.coeffs.len())?;
            if row.h_frame >= w {
                return Err(Error::IndexOutOfRange { index: row.h_frame, dim: w });
            }
            left[(n, row.h_frame)] = C64::new(1.0, 0.0);
            right.set_row(n, &row.coeffs.transpose());
        }
        for (n, t) in f_terms.iter().enumerate() {
            check_dim(w, t.left.len())?;
            check_dim(w, t.right.len())?;
            let r = p_rows.len() + n;
            left.set_row(r, &(&t.left * C64::new(t.weight, 0.0)).transpose());
            right.set_row(r, &t.right.transpose());
        }
        Ok(Self { wavelet, dim, max_order, frame, f_order, p_rows, f_terms, omitted_mass, left, right })
    }

    pub fn wavelet(&self) -> &'static MotherWavelet {
        self.wavelet
    }

    pub fn frame_len(&self) -> usize {
        self.frame.len()
    }

    /// Number of `(P, F)` terms kept.
    pub fn truncation(&self) -> (usize, usize) {
        (self.p_rows.len(), self.f_terms.len())
    }

    fn check_orders(&self, i: usize, j: usize) -> Result<()> {
        if i + j > self.max_order {
            return Err(Error::OrderExceeded { requested: i + j, max: self.max_order });
        }
        Ok(())
    }

    /// Reduced values `v_w^(i)(s)` of every frame wavelet.
    pub fn frame_values(&self, i: usize, s: f64, out: &mut [f64]) {
        for (o, &(j, k)) in out.iter_mut().zip(&self.frame) {
            *o = dyadic_factor(j, i) * self.wavelet.eval_real(i, dyadic_arg(j, k, s));
        }
    }

    /// `nodes.len() x frame_len` matrix of reduced wavelet values.
    pub fn frame_value_matrix(&self, i: usize, nodes: &[f64]) -> Result<DMatrix<f64>> {
        if i > self.wavelet.max_order() {
            return Err(Error::OrderExceeded { requested: i, max: self.wavelet.max_order() });
        }
        let w = self.frame_len();
        let rows: Vec<f64> = nodes
            .par_iter()
            .flat_map_iter(|&s| {
                let mut row = vec![0.0; w];
                self.frame_values(i, s, &mut row);
                row
            })
            .collect();
        Ok(DMatrix::from_row_slice(nodes.len(), w, &rows))
    }

    /// Truncation residual bound for derivative order `(i, j)`.
    pub fn residual(&self, i: usize, j: usize) -> Result<f64> {
        if self.omitted_mass == 0.0 {
            return Ok(0.0);
        }
        Ok(self.wavelet.a_constant(i)? * self.wavelet.a_constant(j)? * self.omitted_mass)
    }

    fn factor_values(&self, coeffs: &DMatrix<C64>, v: &[f64]) -> Vec<C64> {
        (0..coeffs.nrows())
            .map(|r| v.iter().enumerate().map(|(w, x)| coeffs[(r, w)] * *x).sum())
            .collect()
    }

    /// `d^(i+j) K / ds^i dt^j` at `(s, t)`.
    pub fn eval(&self, i: usize, j: usize, s: f64, t: f64) -> Result<KernelValue> {
        self.check_orders(i, j)?;
        let mut vs = vec![0.0; self.frame_len()];
        let mut vt = vec![0.0; self.frame_len()];
        self.frame_values(i, s, &mut vs);
        self.frame_values(j, t, &mut vt);
        let a = self.factor_values(&self.left, &vs);
        let b = self.factor_values(&self.right, &vt);
        let np = self.p_rows.len();
        let p_part: C64 = a[..np].iter().zip(&b[..np]).map(|(a, b)| a * b.conj()).sum();
        let f_part: C64 = a[np..].iter().zip(&b[np..]).map(|(a, b)| a * b.conj()).sum();
        Ok(KernelValue { value: p_part + f_part, p_part, f_part, residual: self.residual(i, j)? })
    }

    /// Lays out `[Re a | Im a]` (or the `right` factor) for a node set.
    fn factor_block(&self, coeffs: &DMatrix<C64>, values: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let re = coeffs.map(|c| c.re);
        let im = coeffs.map(|c| c.im);
        (values * re.transpose(), values * im.transpose())
    }

    /// Builds a grid evaluator with the `t` side fixed.
    pub fn grid_evaluator(&self, j: usize, t_nodes: &[f64]) -> Result<KernelGridEvaluator<'_>> {
        let vt = self.frame_value_matrix(j, t_nodes)?;
        let (br, bi) = self.factor_block(&self.right, &vt);
        let r = self.left.nrows();
        let mut y = DMatrix::zeros(t_nodes.len(), 2 * r);
        y.columns_mut(0, r).copy_from(&br);
        y.columns_mut(r, r).copy_from(&bi);
        Ok(KernelGridEvaluator { model: self, j, yt: y.transpose() })
    }

    pub fn grid(&self, i: usize, j: usize, s_nodes: &[f64], t_nodes: &[f64]) -> Result<KernelGrid> {
        self.grid_evaluator(j, t_nodes)?.rows(i, s_nodes)
    }

    /// Frame coefficients of `k^(i)(s) = conj(d^i/ds^i K(s, .))`.
    pub fn carleman_order(&self, i: usize, s: f64) -> Result<CarlemanValue> {
        self.check_orders(i, 0)?;
        let mut vs = vec![0.0; self.frame_len()];
        self.frame_values(i, s, &mut vs);
        let a = self.factor_values(&self.left, &vs);
        // u = i v, so conj(u_h(s)) contributes the factor -i
        let mut coeffs = DVector::zeros(self.frame_len());
        for (r, ar) in a.iter().enumerate() {
            let c = -C64::i() * ar.conj();
            for w in 0..self.frame_len() {
                coeffs[w] += c * self.right[(r, w)];
            }
        }
        let norm = coeffs.norm();
        Ok(CarlemanValue { coeffs, norm })
    }

    pub fn carleman(&self, s: f64) -> CarlemanValue {
        self.carleman_order(0, s).expect("order 0 is always available")
    }

    pub fn apply_t(&self, f: &DVector<C64>, route: ApplyRoute<'_>) -> Result<DVector<C64>> {
        check_dim(self.frame_len(), f.len())?;
        match route {
            ApplyRoute::Frame => {
                let proj = self.right.map(|c| c.conj()) * f;
                Ok(self.left.transpose() * proj)
            }
            ApplyRoute::Quadrature(rule) => {
                let v = self.frame_value_matrix(0, &rule.nodes)?;
                let wv = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * rule.weights[r]);
                // reduced f on the nodes, weighted
                let fr = &wv * f.map(|c| c.re);
                let fi = &wv * f.map(|c| c.im);
                let eval = self.grid_evaluator(0, &rule.nodes)?;
                let mut out = DVector::zeros(self.frame_len());
                for start in (0..rule.len()).step_by(4 * GRID_CHUNK) {
                    let end = (start + 4 * GRID_CHUNK).min(rule.len());
                    let g = eval.rows(0, &rule.nodes[start..end])?;
                    // (Tf)(s) / i on this block
                    let tr = &g.re * &fr - &g.im * &fi;
                    let ti = &g.re * &fi + &g.im * &fr;
                    let wl = wv.rows(start, end - start);
                    let cr = wl.transpose() * tr;
                    let ci = wl.transpose() * ti;
                    for l in 0..out.len() {
                        out[l] += C64::new(cr[l], ci[l]);
                    }
                }
                Ok(out)
            }
        }
    }

    /// `C_i = max_k sup |(T* h_{n(k)})^(i)| / (k z(e_k_perp))` over `nodes`,
    /// for `i = 0..=i_max`.
    pub fn bound_constants(&self, i_max: usize, nodes: &[f64]) -> Result<Vec<f64>> {
        (0..=i_max)
            .map(|i| {
                let v = self.frame_value_matrix(i, nodes)?;
                let mut c = 0.0f64;
                for row in &self.p_rows {
                    let vals = &v * row.coeffs.map(|c| c.re);
                    let ivals = &v * row.coeffs.map(|c| c.im);
                    let sup = vals.iter().zip(ivals.iter()).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
                    c = c.max(sup / row.kz);
                }
                Ok(c)
            })
            .collect()
    }

    /// Composite rule whose panels resolve every frame wavelet.
    pub fn quadrature_rule(&self, params: &QuadratureParams) -> Rule {
        Rule::dyadic(&self.frame, params.scaled_horizon, params.nodes_per_panel)
    }
}

/// Grid evaluation with a fixed set of `t` nodes and `t` order.
pub struct KernelGridEvaluator<'a> {
    model: &'a KernelModel,
    j: usize,
    /// `2R x n_t`: rows `Re b_r`, then `Im b_r`.
    yt: DMatrix<f64>,
}

impl KernelGridEvaluator<'_> {
    pub fn t_len(&self) -> usize {
        self.yt.ncols()
    }

    /// Kernel values for the given `s` nodes at `s` order `i`.
    pub fn rows(&self, i: usize, s_nodes: &[f64]) -> Result<KernelGrid> {
        self.model.check_orders(i, self.j)?;
        let nt = self.t_len();
        let r = self.model.left.nrows();
        let blocks: Vec<(DMatrix<f64>, DMatrix<f64>)> = s_nodes
            .par_chunks(GRID_CHUNK)
            .map(|chunk| {
                let mut vs = DMatrix::zeros(chunk.len(), self.model.frame_len());
                let mut row = vec![0.0; self.model.frame_len()];
                for (n, &s) in chunk.iter().enumerate() {
                    self.model.frame_values(i, s, &mut row);
                    for (w, v) in row.iter().enumerate() {
                        vs[(n, w)] = *v;
                    }
                }
                let (ar, ai) = self.model.factor_block(&self.model.left, &vs);
                let mut x_re = DMatrix::zeros(chunk.len(), 2 * r);
                x_re.columns_mut(0, r).copy_from(&ar);
                x_re.columns_mut(r, r).copy_from(&ai);
                let mut x_im = DMatrix::zeros(chunk.len(), 2 * r);
                x_im.columns_mut(0, r).copy_from(&ai);
                x_im.columns_mut(r, r).copy_from(&(-ar));
                (&x_re * &self.yt, &x_im * &self.yt)
            })
            .collect();
        let mut re = DMatrix::zeros(s_nodes.len(), nt);
        let mut im = DMatrix::zeros(s_nodes.len(), nt);
        let mut start = 0;
        for (br, bi) in blocks {
            let n = br.nrows();
            re.rows_mut(start, n).copy_from(&br);
            im.rows_mut(start, n).copy_from(&bi);
            start += n;
        }
        Ok(KernelGrid { re, im })
    }
}

// ---------------------------------------------------------------------------
// free-function forms of the model operations

pub fn kernel_eval(model: &KernelModel, i: usize, j: usize, s: f64, t: f64) -> Result<KernelValue> {
    model.eval(i, j, s, t)
}

pub fn carleman_function(model: &KernelModel, s: f64) -> CarlemanValue {
    model.carleman(s)
}

pub fn apply_t(model: &KernelModel, f: &DVector<C64>, route: ApplyRoute<'_>) -> Result<DVector<C64>> {
    model.apply_t(f, route)
}

pub fn bound_constants(model: &KernelModel, i_max: usize, nodes: &[f64]) -> Result<Vec<f64>> {
    model.bound_constants(i_max, nodes)
}

// ---------------------------------------------------------------------------
// export

/// `s,t,re,im,residual` rows in row-major order.
pub fn write_grid_csv<W: Write>(
    out: &mut W,
    s_nodes: &[f64],
    t_nodes: &[f64],
    grid: &KernelGrid,
    residual: f64,
) -> Result<()> {
    writeln!(out, "s,t,re,im,residual")?;
    for (r, s) in s_nodes.iter().enumerate() {
        for (c, t) in t_nodes.iter().enumerate() {
            writeln!(
                out,
                "{s:.10e},{t:.10e},{:.16e},{:.16e},{residual:.6e}",
                grid.re[(r, c)],
                grid.im[(r, c)]
            )?;
        }
    }
    Ok(())
}

/// Binary graymap (P5) of `|K|`, scaled to the grid maximum; `s` runs down
/// the rows.
pub fn write_pgm<W: Write>(out: &mut W, grid: &KernelGrid) -> Result<()> {
    let (rows, cols) = grid.re.shape();
    let (max, _, _) = grid.max_abs();
    write!(out, "P5\n{cols} {rows}\n255\n")?;
    let mut bytes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = grid.get(r, c).norm();
            let level = if max > 0.0 { (255.0 * v / max).round() } else { 0.0 };
            bytes.push(level as u8);
        }
    }
    out.write_all(&bytes)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// text serialization

#[derive(Serialize, Deserialize)]
struct PRowData {
    k: usize,
    h_frame: usize,
    kz: f64,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FTermData {
    weight: f64,
    left_re: Vec<f64>,
    left_im: Vec<f64>,
    right_re: Vec<f64>,
    right_im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct KernelData {
    format_version: u32,
    dim: usize,
    max_order: usize,
    omitted_mass: f64,
    frame: Vec<(i32, i64)>,
    f_order: Vec<usize>,
    #[serde(default)]
    p_rows: Vec<PRowData>,
    #[serde(default)]
    f_terms: Vec<FTermData>,
}

fn split_parts(v: &DVector<C64>) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|c| c.re).collect(), v.iter().map(|c| c.im).collect())
}

fn join_parts(re: &[f64], im: &[f64]) -> Result<DVector<C64>> {
    check_dim(re.len(), im.len())?;
    Ok(DVector::from_iterator(re.len(), re.iter().zip(im).map(|(a, b)| C64::new(*a, *b))))
}

impl KernelModel {
    /// Versioned TOML text: every coefficient array in decimal.
    pub fn to_toml(&self) -> String {
        let data = KernelData {
            format_version: KERNEL_FORMAT_VERSION,
            dim: self.dim,
            max_order: self.max_order,
            omitted_mass: self.omitted_mass,
            frame: self.frame.clone(),
            f_order: self.f_order.clone(),
            p_rows: self
                .p_rows
                .iter()
                .map(|r| {
                    let (re, im) = split_parts(&r.coeffs);
                    PRowData { k: r.k, h_frame: r.h_frame, kz: r.kz, re, im }
                })
                .collect(),
            f_terms: self
                .f_terms
                .iter()
                .map(|t| {
                    let (left_re, left_im) = split_parts(&t.left);
                    let (right_re, right_im) = split_parts(&t.right);
                    FTermData { weight: t.weight, left_re, left_im, right_re, right_im }
                })
                .collect(),
        };
        toml::to_string(&data).expect("kernel data is always serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let data: KernelData = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if data.format_version != KERNEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "kernel format version {} is not supported (expected {KERNEL_FORMAT_VERSION})",
                data.format_version
            )));
        }
        let p_rows = data
            .p_rows
            .iter()
            .map(|r| Ok(PRow { k: r.k, h_frame: r.h_frame, kz: r.kz, coeffs: join_parts(&r.re, &r.im)? }))
            .collect::<Result<Vec<_>>>()?;
        let f_terms = data
            .f_terms
            .iter()
            .map(|t| {
                Ok(FTerm {
                    weight: t.weight,
                    left: join_parts(&t.left_re, &t.left_im)?,
                    right: join_parts(&t.right_re, &t.right_im)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(
            MotherWavelet::standard(),
            data.dim,
            data.max_order,
            data.frame,
            data.f_order,
            p_rows,
            f_terms,
            data.omitted_mass,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{assign, enumerate_dyadic, AssignParams, EnumerationOrder};
    use crate::operator::{IndexSelector, Law, MatrixSource, NamedSelector, OperatorConfig};
    use crate::schmidt::{build_b, schmidt_decompose};

    pub(crate) fn pipeline(spec: &OperatorSpec, opts: &KernelOptions) -> KernelModel {
        let aux = AuxOperators::new(spec);
        let sys = schmidt_decompose(&aux.j, None).unwrap();
        let b = build_b(&sys);
        let e = enumerate_dyadic(-128..=2, -4..=4, EnumerationOrder::Diagonal).unwrap();
        let a = assign(spec, &aux, &e, MotherWavelet::standard(), &AssignParams::default()).unwrap();
        build_kernel(spec, &aux, &sys, &b, &a, opts).unwrap()
    }

    fn diagonal(dim: usize) -> OperatorSpec {
        OperatorConfig {
            dim,
            null_indices: IndexSelector::Named(NamedSelector::Odd),
            perp_indices: None,
            matrix: MatrixSource::ParityDiagonal {
                even: Law::Linear { scale: 1.0 },
                odd: Law::Geometric { scale: 1.0, ratio: 0.5 },
            },
        }
        .build()
        .unwrap()
    }

    #[test]
    fn zero_operator_gives_zero_kernel() {
        let spec = OperatorSpec::from_entries(8, [], vec![1, 3, 5, 7], None).unwrap();
        let m = pipeline(&spec, &KernelOptions::default());
        assert!(m.f_terms.is_empty());
        assert!(m.p_rows.iter().all(|r| r.coeffs.iter().all(|c| c.norm() == 0.0)));
        assert_eq!(m.eval(0, 0, 0.3, -1.0).unwrap().value, C64::new(0.0, 0.0));
        assert_eq!(m.carleman(0.7).norm, 0.0);
        let f = DVector::from_element(8, C64::new(1.0, 0.5));
        assert_eq!(m.apply_t(&f, ApplyRoute::Frame).unwrap().norm(), 0.0);
        assert_eq!(m.bound_constants(1, &[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn frame_route_reproduces_transported_matrix() {
        let spec = diagonal(16);
        let m = pipeline(&spec, &KernelOptions::default());
        for col in 0..16 {
            let mut e = DVector::zeros(16);
            e[col] = C64::new(1.0, 0.0);
            let tf = m.apply_t(&e, ApplyRoute::Frame).unwrap();
            for row in 0..16 {
                let want = spec.entry(m.f_order[row], m.f_order[col]);
                assert!((tf[row] - want).norm() < 1e-12, "({row},{col})");
            }
        }
    }

    #[test]
    fn gamma_route_agrees() {
        let spec = diagonal(16);
        let aux = AuxOperators::new(&spec);
        let m = pipeline(&spec, &KernelOptions::default());
        let e = enumerate_dyadic(-128..=2, -4..=4, EnumerationOrder::Diagonal).unwrap();
        let a = assign(&spec, &aux, &e, MotherWavelet::standard(), &AssignParams::default()).unwrap();
        let via = p_coefficients_via_gamma(&spec, &aux, &a);
        let gnorm = aux.gamma_norm();
        for (row, c) in m.p_rows.iter().zip(&via) {
            assert!((&row.coeffs - c).norm() < 1e-10);
            assert!(row.coeffs.norm() <= row.kz * gnorm + 1e-12);
        }
    }

    #[test]
    fn parts_sum_and_grid_agree() {
        let m = pipeline(&diagonal(16), &KernelOptions::default());
        let s = [-1.3, 0.0, 0.4];
        let t = [2.0, -0.25];
        let g = m.grid(1, 0, &s, &t).unwrap();
        for (r, &sv) in s.iter().enumerate() {
            for (c, &tv) in t.iter().enumerate() {
                let k = m.eval(1, 0, sv, tv).unwrap();
                assert_eq!(k.value, k.p_part + k.f_part);
                assert!((g.get(r, c) - k.value).norm() < 1e-12 * k.value.norm().max(1.0));
            }
        }
    }

    #[test]
    fn truncation_residual_is_reported() {
        let spec = diagonal(16);
        let full = pipeline(&spec, &KernelOptions::default());
        assert_eq!(full.residual(0, 0).unwrap(), 0.0);
        let cut = pipeline(&spec, &KernelOptions { max_p_terms: Some(4), max_f_terms: Some(2), max_order: 8 });
        assert_eq!(cut.truncation(), (4, 2));
        let (s, t) = (0.3, -0.8);
        let diff = (full.eval(0, 0, s, t).unwrap().value - cut.eval(0, 0, s, t).unwrap().value).norm();
        assert!(diff <= cut.residual(0, 0).unwrap());
    }

    #[test]
    fn order_cap() {
        let m = pipeline(&diagonal(8), &KernelOptions { max_order: 2, ..Default::default() });
        assert!(matches!(m.eval(2, 1, 0.0, 0.0), Err(Error::OrderExceeded { requested: 3, max: 2 })));
    }

    #[test]
    fn toml_round_trip() {
        let m = pipeline(&diagonal(8), &KernelOptions::default());
        let text = m.to_toml();
        assert!(text.contains("format_version = 1"));
        let back = KernelModel::from_toml(&text).unwrap();
        assert_eq!(back.p_rows, m.p_rows);
        assert_eq!(back.f_terms, m.f_terms);
        assert_eq!(back.frame, m.frame);
        let bad = text.replace("format_version = 1", "format_version = 99");
        assert!(KernelModel::from_toml(&bad).is_err());
    }

    #[test]
    fn pgm_and_csv_shapes() {
        let m = pipeline(&diagonal(8), &KernelOptions::default());
        let s = [0.0, 1.0, 2.0];
        let t = [0.0, 1.0];
        let g = m.grid(0, 0, &s, &t).unwrap();
        let mut pgm = Vec::new();
        write_pgm(&mut pgm, &g).unwrap();
        assert!(pgm.starts_with(b"P5\n2 3\n255\n"));
        assert_eq!(pgm.len(), b"P5\n2 3\n255\n".len() + 6);
        let mut csv = Vec::new();
        write_grid_csv(&mut csv, &s, &t, &g, 0.0).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 7);
    }
}
