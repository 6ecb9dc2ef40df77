//! Enumeration of the dyadic wavelet family and the assignment of wavelets
//! to operator basis vectors.
//!
//! Every null vector `e_m` that is kept in the subsequence `{x_k}` receives
//! a wavelet `g_k` taken from the front of the enumeration. Every other
//! basis vector receives an `h`, chosen from coarse scales (`j <= 0`) so
//! that the `h` bounds decay like `2^-p` in the `h` position `p`, and the
//! `k`-th complementary vector `e_k_perp` additionally satisfies
//! `k z(e_k_perp) H_{n(k),i} <= 2^-k` for all `i <= i_max`.
//!
//! Operator indices are processed in ascending order, so the choice for an
//! index never depends on later indices.

use std::ops::RangeInclusive;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{basis_vector, d_value, AuxOperators, OperatorSpec};
use crate::series::{SeriesReport, DEFAULT_TAIL_LEN};
use crate::wavelet::{d_factor, MotherWavelet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnumEntry {
    pub j: i32,
    pub k: i64,
    /// `D_n` for this scale.
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationOrder {
    /// By `|j| + |k|`, ties broken by `j` then `k` ascending.
    #[default]
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    pub entries: Vec<EnumEntry>,
}

impl Enumeration {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, j: i32, k: i64) -> Option<usize> {
        self.entries.iter().position(|e| e.j == j && e.k == k)
    }
}

pub fn enumerate_dyadic(
    j_range: RangeInclusive<i32>,
    k_range: RangeInclusive<i64>,
    order: EnumerationOrder,
) -> Result<Enumeration> {
    if j_range.is_empty() || k_range.is_empty() {
        return Err(Error::InvalidParameter("empty enumeration box".into()));
    }
    let mut entries: Vec<EnumEntry> = j_range
        .flat_map(|j| k_range.clone().map(move |k| EnumEntry { j, k, d: d_factor(j) }))
        .collect();
    match order {
        EnumerationOrder::Diagonal => entries.sort_by_key(|e| (e.j.unsigned_abs() as u64 + e.k.unsigned_abs(), e.j, e.k)),
    }
    Ok(Enumeration { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignParams {
    pub i_max: usize,
    /// Only the first `budget` enumeration entries may be used.
    pub budget: Option<usize>,
    /// When set, a null vector is kept in `{x_k}` only if
    /// `d(e_m) (G_{k,i} + 1) <= c 2^-k` for every `i <= i_max`; otherwise
    /// it is paired with an `h`. When unset every null vector is kept.
    pub zndn_constant: Option<f64>,
}

impl Default for AssignParams {
    fn default() -> Self {
        Self { i_max: 2, budget: None, zndn_constant: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    G,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub op_index: usize,
    pub enum_index: usize,
    pub role: Role,
    /// Position in the `g` list or the `h` list (0-based).
    pub role_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisAssignment {
    pub enumeration: Enumeration,
    pub i_max: usize,
    /// `A_0 ..= A_{i_max}`.
    pub a_constants: Vec<f64>,
    /// Enumeration positions of `g_1, g_2, ...`.
    pub g_index: Vec<usize>,
    /// Enumeration positions of `h_1, h_2, ...`.
    pub h_index: Vec<usize>,
    /// `n(k)`: `h`-list position of the wavelet of the k-th complementary vector.
    pub nk: Vec<usize>,
    /// Operator indices of `x_1, x_2, ...`.
    pub x_index: Vec<usize>,
    /// Operator indices in `h` order.
    pub x_perp_index: Vec<usize>,
    /// `pairs[m]` is the wavelet assigned to operator index `m`.
    pub pairs: Vec<Pair>,
    /// Enumeration positions of the assigned wavelets, ascending; this is
    /// the coefficient frame used by the kernel.
    pub frame: Vec<usize>,
    /// `f_order[w]` is the operator index paired with frame position `w`.
    pub f_order: Vec<usize>,
    /// `op_to_frame[m]` is the frame position of operator index `m`.
    pub op_to_frame: Vec<usize>,
    pub z_perp: Vec<f64>,
    /// `d(x_k)` for each kept null vector.
    pub d_x: Vec<f64>,
}

fn bounds(entry: &EnumEntry, a: &[f64]) -> Vec<f64> {
    a.iter().map(|ai| entry.d * ai).collect()
}

fn required_j(bound: f64, a_max: f64) -> i32 {
    -((2.0 * (a_max / bound).log2()).ceil().max(0.0) as i32)
}

pub fn assign(
    spec: &OperatorSpec,
    aux: &AuxOperators,
    enumeration: &Enumeration,
    wavelet: &MotherWavelet,
    params: &AssignParams,
) -> Result<BasisAssignment> {
    let limit = params.budget.unwrap_or(enumeration.len()).min(enumeration.len());
    let entries = &enumeration.entries[..limit];
    if !entries.iter().any(|e| e.j < 0) {
        return Err(Error::NoCoarseScales);
    }
    let a_constants = (0..=params.i_max)
        .map(|i| wavelet.a_constant(i))
        .collect::<Result<Vec<f64>>>()?;
    let a_max = a_constants.iter().copied().fold(0.0, f64::max);

    let dim = spec.dim();
    let mut is_null = vec![false; dim];
    for &m in spec.null_indices() {
        is_null[m] = true;
    }
    let mut perp_ordinal = vec![usize::MAX; dim];
    for (k, &m) in spec.perp_indices().iter().enumerate() {
        perp_ordinal[m] = k;
    }
    let z_perp = spec.z_perp();

    let mut used = vec![false; limit];
    let mut g_cursor = 0usize;
    let mut h_cursor = 0usize;
    let mut g_index = Vec::new();
    let mut h_index = Vec::new();
    let mut nk = vec![usize::MAX; spec.perp_indices().len()];
    let mut x_index = Vec::new();
    let mut x_perp_index = Vec::new();
    let mut d_x = Vec::new();
    let mut pairs = Vec::with_capacity(dim);

    let mut take_h = |bound: f64, k_report: usize, used: &mut Vec<bool>, h_index: &mut Vec<usize>| {
        let found = (h_cursor..limit).find(|&n| {
            !used[n] && entries[n].j <= 0 && entries[n].d * a_max <= bound
        });
        match found {
            Some(n) => {
                used[n] = true;
                h_cursor = n + 1;
                h_index.push(n);
                Ok(n)
            }
            None => Err(Error::BudgetExhausted { k: k_report, required_j: required_j(bound, a_max) }),
        }
    };

    for m in 0..dim {
        if is_null[m] {
            // candidate g: next unused entry from the front
            while g_cursor < limit && used[g_cursor] {
                g_cursor += 1;
            }
            let d = d_value(aux, &basis_vector(dim, m))?;
            let keep = match params.zndn_constant {
                None => true,
                Some(c) => {
                    g_cursor < limit && {
                        let k = x_index.len() + 1;
                        let target = c * 2f64.powi(-(k as i32));
                        bounds(&entries[g_cursor], &a_constants).iter().all(|g| d * (g + 1.0) <= target)
                    }
                }
            };
            if keep {
                if g_cursor >= limit {
                    return Err(Error::BudgetExhausted { k: x_index.len() + 1, required_j: 0 });
                }
                used[g_cursor] = true;
                pairs.push(Pair { op_index: m, enum_index: g_cursor, role: Role::G, role_pos: g_index.len() });
                g_index.push(g_cursor);
                x_index.push(m);
                d_x.push(d);
                continue;
            }
        }
        let p = h_index.len() + 1;
        let mut bound = 2f64.powi(-(p as i32));
        let k_report = if is_null[m] {
            p
        } else {
            let k = perp_ordinal[m] + 1;
            let target = 2f64.powi(-(k as i32)) / (k as f64 * z_perp[k - 1]);
            bound = bound.min(target);
            k
        };
        let n = take_h(bound, k_report, &mut used, &mut h_index)?;
        if !is_null[m] {
            nk[perp_ordinal[m]] = h_index.len() - 1;
        }
        pairs.push(Pair { op_index: m, enum_index: n, role: Role::H, role_pos: h_index.len() - 1 });
        x_perp_index.push(m);
    }

    let mut frame: Vec<usize> = pairs.iter().map(|p| p.enum_index).collect();
    frame.sort_unstable();
    let mut op_to_frame = vec![0; dim];
    let mut f_order = vec![0; dim];
    for p in &pairs {
        let w = frame.binary_search(&p.enum_index).expect("assigned entry is in the frame");
        op_to_frame[p.op_index] = w;
        f_order[w] = p.op_index;
    }

    Ok(BasisAssignment {
        enumeration: Enumeration { entries: entries.to_vec() },
        i_max: params.i_max,
        a_constants,
        g_index,
        h_index,
        nk,
        x_index,
        x_perp_index,
        pairs,
        frame,
        f_order,
        op_to_frame,
        z_perp,
        d_x,
    })
}

impl BasisAssignment {
    pub fn frame_len(&self) -> usize {
        self.frame.len()
    }

    /// `(j, k)` of the wavelet at frame position `w`.
    pub fn frame_scale(&self, w: usize) -> (i32, i64) {
        let e = &self.enumeration.entries[self.frame[w]];
        (e.j, e.k)
    }

    pub fn frame_scales(&self) -> Vec<(i32, i64)> {
        (0..self.frame_len()).map(|w| self.frame_scale(w)).collect()
    }

    /// `(j, k)` of the wavelet assigned to operator index `m`.
    pub fn op_scale(&self, m: usize) -> (i32, i64) {
        self.frame_scale(self.op_to_frame[m])
    }

    /// `G_{k,i}` for every kept null vector, `k` in `g` order.
    pub fn g_bounds(&self) -> Vec<Vec<f64>> {
        self.g_index.iter().map(|&n| bounds(&self.enumeration.entries[n], &self.a_constants)).collect()
    }

    /// `H_{p,i}` for every `h`, in `h` order.
    pub fn h_bounds(&self) -> Vec<Vec<f64>> {
        self.h_index.iter().map(|&n| bounds(&self.enumeration.entries[n], &self.a_constants)).collect()
    }

    /// Maps operator-side coefficients into the wavelet frame.
    pub fn transport(&self, op_coeffs: &DVector<crate::C64>) -> DVector<crate::C64> {
        DVector::from_iterator(self.frame_len(), self.f_order.iter().map(|&m| op_coeffs[m]))
    }

    /// Maps frame coefficients back to the operator side.
    pub fn transport_back(&self, frame_coeffs: &DVector<crate::C64>) -> DVector<crate::C64> {
        DVector::from_iterator(self.f_order.len(), self.op_to_frame.iter().map(|&w| frame_coeffs[w]))
    }
}

/// Partial sums for the three summability conditions at one order `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderConditions {
    pub i: usize,
    /// `H_{p,i}` over all `h`.
    pub hki: SeriesReport,
    /// `d(x_k) (G_{k,i} + 1)`.
    pub zndn: SeriesReport,
    /// `k z(e_k_perp) H_{n(k),i}`.
    pub sumrk: SeriesReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub orders: Vec<OrderConditions>,
}

impl ConditionReport {
    /// Every `sumrk` term is at most `2^-k`.
    pub fn sumrk_targets_met(&self) -> bool {
        self.orders
            .iter()
            .all(|o| o.sumrk.terms.iter().enumerate().all(|(k, t)| *t <= 2f64.powi(-(k as i32 + 1))))
    }
}

pub fn condition_report(a: &BasisAssignment, i_max: usize) -> Result<ConditionReport> {
    if i_max > a.i_max {
        return Err(Error::OrderExceeded { requested: i_max, max: a.i_max });
    }
    let g = a.g_bounds();
    let h = a.h_bounds();
    let orders = (0..=i_max)
        .map(|i| {
            let hki = h.iter().map(|b| b[i]).collect();
            let zndn = a.d_x.iter().zip(&g).map(|(d, b)| d * (b[i] + 1.0)).collect();
            let sumrk = a
                .nk
                .iter()
                .enumerate()
                .map(|(k, &p)| (k + 1) as f64 * a.z_perp[k] * h[p][i])
                .collect();
            OrderConditions {
                i,
                hki: SeriesReport::new(hki, DEFAULT_TAIL_LEN),
                zndn: SeriesReport::new(zndn, DEFAULT_TAIL_LEN),
                sumrk: SeriesReport::new(sumrk, DEFAULT_TAIL_LEN),
            }
        })
        .collect();
    Ok(ConditionReport { orders })
}
