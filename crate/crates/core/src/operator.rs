//! Truncated model of a closed operator `S` and the auxiliary operators of
//! the construction.
//!
//! The operator is given by its matrix `a[m][n] = <S f_n, f_m>` in an
//! abstract orthonormal basis `{f_n}`. Part of that basis is designated as
//! the null sequence `{e_k}` (on which `S*` is small); the rest is the
//! complementary basis `{e_k_perp}`. Matrix entries are stored sparsely by
//! row so that large diagonal models stay cheap.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{extrapolated_sum, SeriesReport, DEFAULT_TAIL_LEN};
use crate::C64;

/// Index sets with fewer elements than this trigger a warning.
pub const MIN_MEANINGFUL_INDICES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
    null_indices: Vec<usize>,
    perp_indices: Vec<usize>,
    warnings: Vec<String>,
}

impl OperatorSpec {
    /// Builds a spec from `(row, col, value)` triplets. Repeated positions
    /// are summed; `perp_indices`, when given, must be the exact complement.
    pub fn from_entries<I>(
        dim: usize,
        entries: I,
        null_indices: Vec<usize>,
        perp_indices: Option<Vec<usize>>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        if dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (m, n, v) in entries {
            for idx in [m, n] {
                if idx >= dim {
                    return Err(Error::IndexOutOfRange { index: idx, dim });
                }
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite { row: m, col: n });
            }
            rows[m].push((n, v));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, C64)> = Vec::with_capacity(row.len());
            for &(n, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == n => last.1 += v,
                    _ => merged.push((n, v)),
                }
            }
            merged.retain(|e| e.1 != C64::new(0.0, 0.0));
            *row = merged;
        }

        let mut seen = vec![false; dim];
        for &i in &null_indices {
            if i >= dim {
                return Err(Error::IndexOutOfRange { index: i, dim });
            }
            if seen[i] {
                return Err(Error::DuplicateIndex(i));
            }
            seen[i] = true;
        }
        let perp_indices = match perp_indices {
            Some(perp) => {
                let mut in_perp = vec![false; dim];
                for &i in &perp {
                    if i >= dim {
                        return Err(Error::IndexOutOfRange { index: i, dim });
                    }
                    if seen[i] {
                        return Err(Error::OverlappingIndices(i));
                    }
                    if in_perp[i] {
                        return Err(Error::DuplicateIndex(i));
                    }
                    in_perp[i] = true;
                }
                if let Some(missing) = (0..dim).find(|&i| !seen[i] && !in_perp[i]) {
                    return Err(Error::Config(format!(
                        "index {missing} is in neither the null nor the complementary set"
                    )));
                }
                perp
            }
            None => (0..dim).filter(|&i| !seen[i]).collect(),
        };

        let mut warnings = Vec::new();
        if null_indices.len() < MIN_MEANINGFUL_INDICES {
            warnings.push(format!(
                "null sequence has only {} element(s)",
                null_indices.len()
            ));
        }
        if perp_indices.len() < MIN_MEANINGFUL_INDICES {
            warnings.push(format!(
                "complementary basis has only {} element(s)",
                perp_indices.len()
            ));
        }
        Ok(Self { dim, rows, null_indices, perp_indices, warnings })
    }

    pub fn from_dense(matrix: &DMatrix<C64>, null_indices: Vec<usize>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let entries = (0..matrix.nrows())
            .flat_map(|m| (0..matrix.ncols()).map(move |n| (m, n)))
            .map(|(m, n)| (m, n, matrix[(m, n)]))
            .collect::<Vec<_>>();
        Self::from_entries(matrix.nrows(), entries, null_indices, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn null_indices(&self) -> &[usize] {
        &self.null_indices
    }

    pub fn perp_indices(&self) -> &[usize] {
        &self.perp_indices
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `<S f_n, f_m>`.
    pub fn entry(&self, m: usize, n: usize) -> C64 {
        self.rows[m]
            .binary_search_by_key(&n, |e| e.0)
            .map(|pos| self.rows[m][pos].1)
            .unwrap_or_default()
    }

    pub fn row(&self, m: usize) -> &[(usize, C64)] {
        &self.rows[m]
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for (m, row) in self.rows.iter().enumerate() {
            for &(n, v) in row {
                a[(m, n)] = v;
            }
        }
        a
    }

    /// Matrix of `S*`: the conjugate transpose.
    pub fn adjoint(&self) -> DMatrix<C64> {
        self.matrix().adjoint()
    }

    pub fn apply(&self, f: &DVector<C64>) -> Result<DVector<C64>> {
        self.check_len(f.len())?;
        Ok(DVector::from_iterator(
            self.dim,
            self.rows.iter().map(|row| row.iter().map(|&(n, v)| v * f[n]).sum()),
        ))
    }

    pub fn apply_adjoint(&self, f: &DVector<C64>) -> Result<DVector<C64>> {
        self.check_len(f.len())?;
        let mut out = DVector::zeros(self.dim);
        for (m, row) in self.rows.iter().enumerate() {
            for &(n, v) in row {
                out[n] += v.conj() * f[m];
            }
        }
        Ok(out)
    }

    /// `||S* f_idx||`, the norm of row `idx`.
    pub fn adjoint_basis_norm(&self, idx: usize) -> f64 {
        self.rows[idx].iter().map(|e| e.1.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `z(f) = ||S* f|| + 1`.
    pub fn z_value(&self, f: &DVector<C64>) -> Result<f64> {
        Ok(self.apply_adjoint(f)?.norm() + 1.0)
    }

    /// `z(e_k_perp)` for every complementary basis vector, in order.
    pub fn z_perp(&self) -> Vec<f64> {
        self.perp_indices.iter().map(|&i| self.adjoint_basis_norm(i) + 1.0).collect()
    }

    /// Principal truncation to the first `dim` basis vectors.
    pub fn truncated(&self, dim: usize) -> Result<Self> {
        let entries = self
            .rows
            .iter()
            .enumerate()
            .take(dim)
            .flat_map(|(m, row)| row.iter().filter(|e| e.0 < dim).map(move |&(n, v)| (m, n, v)))
            .collect::<Vec<_>>();
        let null = self.null_indices.iter().copied().filter(|&i| i < dim).collect();
        Self::from_entries(dim, entries, null, None)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: len });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// config documents

/// `[operator]` table of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub dim: usize,
    pub null_indices: IndexSelector,
    #[serde(default)]
    pub perp_indices: Option<IndexSelector>,
    pub matrix: MatrixSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexSelector {
    List(Vec<usize>),
    Named(NamedSelector),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedSelector {
    Odd,
    Even,
    All,
}

impl IndexSelector {
    fn resolve(&self, dim: usize) -> Vec<usize> {
        match self {
            IndexSelector::List(v) => v.clone(),
            IndexSelector::Named(NamedSelector::Odd) => (1..dim).step_by(2).collect(),
            IndexSelector::Named(NamedSelector::Even) => (0..dim).step_by(2).collect(),
            IndexSelector::Named(NamedSelector::All) => (0..dim).collect(),
        }
    }
}

/// A diagonal law `k -> value`, with `k` the 0-based position within its
/// parity class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum Law {
    Zero,
    Constant { value: f64 },
    Linear { scale: f64 },
    Geometric { scale: f64, ratio: f64 },
    /// `scale * (k + 1)^-exponent`
    Power { scale: f64, exponent: f64 },
}

impl Law {
    pub fn value(&self, k: usize) -> f64 {
        let kf = k as f64;
        match *self {
            Law::Zero => 0.0,
            Law::Constant { value } => value,
            Law::Linear { scale } => scale * kf,
            Law::Geometric { scale, ratio } => scale * ratio.powi(k as i32),
            Law::Power { scale, exponent } => scale * (kf + 1.0).powf(-exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    /// Entry `a[m][m + offset]`.
    pub offset: i64,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn default_one() -> f64 {
    1.0
}

fn default_half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSource {
    Zero,
    Dense {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
    Diagonal {
        re: Vec<f64>,
        #[serde(default)]
        im: Option<Vec<f64>>,
    },
    Banded {
        bands: Vec<Band>,
    },
    Entries {
        entries: Vec<Entry>,
    },
    /// `S f_{2k} = even(k) f_{2k}`, `S f_{2k+1} = odd(k) f_{2k+1}`.
    ParityDiagonal {
        even: Law,
        odd: Law,
    },
    /// Dense matrix with uniform entries in `[-scale, scale]`; rows on the
    /// null sequence are damped by `null_row_decay^k` so that `||S* e_k||`
    /// decays geometrically.
    Random {
        seed: u64,
        #[serde(default = "default_one")]
        scale: f64,
        #[serde(default = "default_half")]
        null_row_decay: f64,
        #[serde(default)]
        complex: bool,
    },
}

impl OperatorConfig {
    pub fn build(&self) -> Result<OperatorSpec> {
        let dim = self.dim;
        let null = self.null_indices.resolve(dim);
        let perp = self.perp_indices.as_ref().map(|p| p.resolve(dim));
        let mut entries: Vec<(usize, usize, C64)> = Vec::new();
        let shape_err = |what: &str| Error::Config(format!("{what} does not match dim = {dim}"));
        match &self.matrix {
            MatrixSource::Zero => {}
            MatrixSource::Dense { re, im } => {
                if re.len() != dim || re.iter().any(|r| r.len() != dim) {
                    return Err(shape_err("dense `re`"));
                }
                if let Some(im) = im {
                    if im.len() != dim || im.iter().any(|r| r.len() != dim) {
                        return Err(shape_err("dense `im`"));
                    }
                }
                for m in 0..dim {
                    for n in 0..dim {
                        let i = im.as_ref().map_or(0.0, |im| im[m][n]);
                        entries.push((m, n, C64::new(re[m][n], i)));
                    }
                }
            }
            MatrixSource::Diagonal { re, im } => {
                if re.len() != dim || im.as_ref().is_some_and(|im| im.len() != dim) {
                    return Err(shape_err("diagonal"));
                }
                for (m, r) in re.iter().enumerate() {
                    let i = im.as_ref().map_or(0.0, |im| im[m]);
                    entries.push((m, m, C64::new(*r, i)));
                }
            }
            MatrixSource::Banded { bands } => {
                for band in bands {
                    let len = dim.saturating_sub(band.offset.unsigned_abs() as usize);
                    if band.re.len() != len || band.im.as_ref().is_some_and(|im| im.len() != len) {
                        return Err(Error::Config(format!(
                            "band at offset {} needs {len} entries",
                            band.offset
                        )));
                    }
                    for (p, r) in band.re.iter().enumerate() {
                        let (m, n) = if band.offset >= 0 {
                            (p, p + band.offset as usize)
                        } else {
                            (p + band.offset.unsigned_abs() as usize, p)
                        };
                        let i = band.im.as_ref().map_or(0.0, |im| im[p]);
                        entries.push((m, n, C64::new(*r, i)));
                    }
                }
            }
            MatrixSource::Entries { entries: list } => {
                entries.extend(list.iter().map(|e| (e.row, e.col, C64::new(e.re, e.im))));
            }
            MatrixSource::ParityDiagonal { even, odd } => {
                for m in 0..dim {
                    let v = if m % 2 == 0 { even.value(m / 2) } else { odd.value(m / 2) };
                    entries.push((m, m, C64::new(v, 0.0)));
                }
            }
            MatrixSource::Random { seed, scale, null_row_decay, complex } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut row_weight = vec![1.0; dim];
                for (k, &i) in null.iter().enumerate() {
                    if i < dim {
                        row_weight[i] = null_row_decay.powi(k as i32);
                    }
                }
                for (m, w) in row_weight.iter().enumerate() {
                    for n in 0..dim {
                        let re = rng.random_range(-1.0..=1.0) * scale * w;
                        let im = if *complex { rng.random_range(-1.0..=1.0) * scale * w } else { 0.0 };
                        entries.push((m, n, C64::new(re, im)));
                    }
                }
            }
        }
        OperatorSpec::from_entries(dim, entries, null, perp)
    }
}

#[derive(Deserialize)]
struct OperatorDocument {
    operator: OperatorConfig,
}

/// Parses the `[operator]` table of a TOML document into a spec.
pub fn load_operator(text: &str) -> Result<OperatorSpec> {
    let doc: OperatorDocument = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    doc.operator.build()
}

// ---------------------------------------------------------------------------
// validation of the null sequence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSequenceReport {
    pub power: f64,
    /// Always true: no finite computation certifies an infinite sum.
    pub heuristic: bool,
    pub series: SeriesReport,
    /// Limit estimated from the fitted tail model.
    pub limit_estimate: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Partial sums of `||S* e_k||^power` and the tail-decay flag.
pub fn validate_null_sequence(
    spec: &OperatorSpec,
    power: f64,
    tail_len: usize,
) -> Result<NullSequenceReport> {
    if !(power > 0.0 && power <= 1.0) {
        return Err(Error::InvalidParameter(format!("power {power} not in (0, 1]")));
    }
    if spec.null_indices().is_empty() {
        return Err(Error::EmptyNullSequence);
    }
    let terms: Vec<f64> = spec
        .null_indices()
        .iter()
        .map(|&i| spec.adjoint_basis_norm(i).powf(power))
        .collect();
    let series = SeriesReport::new(terms, tail_len);
    let limit_estimate = extrapolated_sum(&series.terms, &series.decay);
    Ok(NullSequenceReport {
        power,
        heuristic: true,
        pass: series.decay.summable,
        limit_estimate,
        series,
        warnings: spec.warnings().to_vec(),
    })
}

pub fn validate_null_sequence_default(spec: &OperatorSpec) -> Result<NullSequenceReport> {
    validate_null_sequence(spec, 0.25, DEFAULT_TAIL_LEN)
}

// ---------------------------------------------------------------------------
// auxiliary operators

/// `J = S* E` and `Q = (1 - E) S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitParts {
    pub j: DMatrix<C64>,
    pub q: DMatrix<C64>,
}

pub fn split(spec: &OperatorSpec) -> SplitParts {
    let n = spec.dim();
    let adj = spec.adjoint();
    let mut j = DMatrix::zeros(n, n);
    for &c in spec.null_indices() {
        j.set_column(c, &adj.column(c));
    }
    let mut q = spec.matrix();
    for &r in spec.null_indices() {
        q.row_mut(r).fill(C64::new(0.0, 0.0));
    }
    SplitParts { j, q }
}

/// `Gamma = S* Lambda` with `Lambda = sum_k (k z(e_k_perp))^-1 <., e_k_perp> e_k_perp`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaParts {
    pub gamma: DMatrix<C64>,
    pub z_perp: Vec<f64>,
    pub lambda_weights: Vec<f64>,
    /// `sum_n ||Gamma* f_n||^2`, from the dense matrix.
    pub hs_sum: f64,
}

pub fn lambda_weights(z_perp: &[f64]) -> Vec<f64> {
    z_perp.iter().enumerate().map(|(k, z)| 1.0 / ((k + 1) as f64 * z)).collect()
}

pub fn gamma_operator(spec: &OperatorSpec) -> Result<GammaParts> {
    if spec.perp_indices().is_empty() {
        return Err(Error::EmptyPerp);
    }
    Ok(gamma_parts(spec))
}

fn gamma_parts(spec: &OperatorSpec) -> GammaParts {
    let n = spec.dim();
    let z_perp = spec.z_perp();
    let weights = lambda_weights(&z_perp);
    let adj = spec.adjoint();
    let mut gamma = DMatrix::zeros(n, n);
    for (&c, w) in spec.perp_indices().iter().zip(&weights) {
        gamma.set_column(c, &(adj.column(c) * C64::new(*w, 0.0)));
    }
    let gamma_adj = gamma.adjoint();
    let hs_sum = (0..n).map(|c| gamma_adj.column(c).norm_squared()).sum();
    GammaParts { gamma, z_perp, lambda_weights: weights, hs_sum }
}

/// `sum_n ||Gamma* f_n||^2` computed term by term from the closed form
/// `||S* e_k_perp||^2 / (k z(e_k_perp))^2`, without forming any matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsSummary {
    pub series: SeriesReport,
    pub total: f64,
    /// Series value estimated from the fitted tail.
    pub limit_estimate: f64,
    pub bound: f64,
}

pub const HS_BOUND: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

pub fn gamma_hs_summary(spec: &OperatorSpec) -> HsSummary {
    let terms: Vec<f64> = spec
        .perp_indices()
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let a = spec.adjoint_basis_norm(i);
            let kz = (k + 1) as f64 * (a + 1.0);
            a * a / (kz * kz)
        })
        .collect();
    let series = SeriesReport::new(terms, DEFAULT_TAIL_LEN);
    let total = series.total();
    let limit_estimate = extrapolated_sum(&series.terms, &series.decay);
    HsSummary { series, total, limit_estimate, bound: HS_BOUND }
}

/// All auxiliary operators of one spec.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxOperators {
    pub j: DMatrix<C64>,
    pub q: DMatrix<C64>,
    pub gamma: DMatrix<C64>,
    pub z_perp: Vec<f64>,
    pub lambda_weights: Vec<f64>,
    pub hs_sum: f64,
}

impl AuxOperators {
    pub fn new(spec: &OperatorSpec) -> Self {
        let SplitParts { j, q } = split(spec);
        let g = gamma_parts(spec);
        Self {
            j,
            q,
            gamma: g.gamma,
            z_perp: g.z_perp,
            lambda_weights: g.lambda_weights,
            hs_sum: g.hs_sum,
        }
    }

    /// Spectral norm of Gamma.
    pub fn gamma_norm(&self) -> f64 {
        if self.gamma.is_empty() {
            return 0.0;
        }
        self.gamma.clone().singular_values().max()
    }
}

/// `d(h) = ||J h||^(1/4) + ||J* h||^(1/4) + ||Gamma* h||`.
pub fn d_value(aux: &AuxOperators, h: &DVector<C64>) -> Result<f64> {
    if h.len() != aux.j.nrows() {
        return Err(Error::DimensionMismatch { expected: aux.j.nrows(), got: h.len() });
    }
    let jh = (&aux.j * h).norm();
    let jsh = (aux.j.adjoint() * h).norm();
    let gsh = (aux.gamma.adjoint() * h).norm();
    Ok(jh.powf(0.25) + jsh.powf(0.25) + gsh)
}

/// Unit basis vector `f_idx`.
pub fn basis_vector(dim: usize, idx: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    v[idx] = C64::new(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn diagonal_example(dim: usize) -> OperatorSpec {
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

    fn random_dense(dim: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn diagonal_rule_transcription() {
        let spec = diagonal_example(16);
        assert_eq!(spec.null_indices(), &[1, 3, 5, 7, 9, 11, 13, 15]);
        assert_eq!(spec.perp_indices(), &[0, 2, 4, 6, 8, 10, 12, 14]);
        assert_eq!(spec.entry(6, 6), C64::new(3.0, 0.0));
        assert_eq!(spec.entry(7, 7), C64::new(0.125, 0.0));
        assert_eq!(spec.entry(6, 7), C64::new(0.0, 0.0));
        assert!(spec.warnings().is_empty());
    }

    #[test]
    fn zero_matrix_is_valid() {
        let doc = r#"
            [operator]
            dim = 4
            null_indices = [1, 3]
            matrix = { kind = "zero" }
        "#;
        let spec = load_operator(doc).unwrap();
        assert_eq!(spec.matrix(), DMatrix::zeros(4, 4));
        assert_eq!(spec.perp_indices(), &[0, 2]);
        assert_eq!(spec.warnings().len(), 2);
    }

    #[test]
    fn overlapping_index_sets_are_rejected() {
        let doc = r#"
            [operator]
            dim = 4
            null_indices = [1, 3]
            perp_indices = [1, 3]
            matrix = { kind = "zero" }
        "#;
        assert!(matches!(load_operator(doc), Err(Error::OverlappingIndices(1))));
    }

    #[test]
    fn config_errors() {
        let out_of_range = r#"
            [operator]
            dim = 3
            null_indices = [5]
            matrix = { kind = "zero" }
        "#;
        assert!(matches!(
            load_operator(out_of_range),
            Err(Error::IndexOutOfRange { index: 5, dim: 3 })
        ));
        assert!(matches!(load_operator("[operator]\ndim = "), Err(Error::Config(_))));
        let bad_shape = r#"
            [operator]
            dim = 2
            null_indices = "odd"
            matrix = { kind = "diagonal", re = [1.0] }
        "#;
        assert!(matches!(load_operator(bad_shape), Err(Error::Config(_))));
    }

    #[test]
    fn banded_and_entries_sources() {
        let doc = r#"
            [operator]
            dim = 3
            null_indices = [2]
            [operator.matrix]
            kind = "banded"
            bands = [ { offset = 0, re = [1.0, 2.0, 3.0] },
                      { offset = -1, re = [4.0, 5.0], im = [0.5, 0.0] } ]
        "#;
        let spec = load_operator(doc).unwrap();
        assert_eq!(spec.entry(1, 0), C64::new(4.0, 0.5));
        assert_eq!(spec.entry(2, 1), C64::new(5.0, 0.0));
        let doc = r#"
            [operator]
            dim = 2
            null_indices = [0]
            [operator.matrix]
            kind = "entries"
            entries = [ { row = 0, col = 1, re = 2.0, im = -1.0 } ]
        "#;
        assert_eq!(load_operator(doc).unwrap().entry(0, 1), C64::new(2.0, -1.0));
    }

    #[test]
    fn geometric_null_sequence_converges() {
        // ||S* e_k|| = 2^-k for k = 1, 2, ...
        let spec = OperatorConfig {
            dim: 400,
            null_indices: IndexSelector::Named(NamedSelector::Odd),
            perp_indices: None,
            matrix: MatrixSource::ParityDiagonal {
                even: Law::Zero,
                odd: Law::Geometric { scale: 0.5, ratio: 0.5 },
            },
        }
        .build()
        .unwrap();
        let report = validate_null_sequence_default(&spec).unwrap();
        // oracle: direct summation far past convergence
        let oracle: f64 = (1..=2000).map(|k| 2f64.powf(-(k as f64) / 4.0)).sum();
        assert!((oracle - 5.285_213_507_883_3).abs() < 1e-9);
        assert!((report.series.total() - oracle).abs() < 1e-12);
        assert!(report.pass);
    }

    #[test]
    fn zero_null_sequence_passes() {
        let spec = OperatorSpec::from_entries(8, [], vec![1, 3, 5, 7], None).unwrap();
        let report = validate_null_sequence_default(&spec).unwrap();
        assert!(report.series.partial_sums.iter().all(|&s| s == 0.0));
        assert!(report.pass);
    }

    #[test]
    fn harmonic_null_sequence_fails() {
        let spec = OperatorConfig {
            dim: 128,
            null_indices: IndexSelector::Named(NamedSelector::Odd),
            perp_indices: None,
            matrix: MatrixSource::ParityDiagonal {
                even: Law::Zero,
                odd: Law::Power { scale: 1.0, exponent: 1.0 },
            },
        }
        .build()
        .unwrap();
        let report = validate_null_sequence_default(&spec).unwrap();
        // the partial sums grow like k^(3/4): past 64 terms they exceed
        // (4/3)(64^(3/4) - 1) from below-integral comparison
        let lower = 4.0 / 3.0 * (65f64.powf(0.75) - 1.0);
        assert!(report.series.total() > lower);
        assert!(!report.pass);
    }

    #[test]
    fn empty_null_sequence_is_an_error() {
        let spec = OperatorSpec::from_entries(3, [], vec![], None).unwrap();
        assert!(matches!(validate_null_sequence_default(&spec), Err(Error::EmptyNullSequence)));
    }

    #[test]
    fn split_on_diagonal_example() {
        let spec = diagonal_example(16);
        let SplitParts { j, q } = split(&spec);
        for m in 0..16 {
            for n in 0..16 {
                let expect_j = if m == n && m % 2 == 1 { 0.5f64.powi((m / 2) as i32) } else { 0.0 };
                assert_eq!(j[(m, n)], C64::new(expect_j, 0.0));
                let expect_q = if m == n && m % 2 == 0 { (m / 2) as f64 } else { 0.0 };
                assert_eq!(q[(m, n)], C64::new(expect_q, 0.0));
            }
        }
    }

    #[test]
    fn split_with_full_projection() {
        let a = random_dense(5, 3);
        let spec = OperatorSpec::from_dense(&a, (0..5).collect()).unwrap();
        let SplitParts { j, q } = split(&spec);
        assert_eq!(q, DMatrix::zeros(5, 5));
        assert_eq!(j, a.adjoint());
    }

    #[test]
    fn split_reconstructs_random_matrix() {
        for seed in 0..5 {
            let a = random_dense(6, seed);
            let spec = OperatorSpec::from_dense(&a, vec![0, 2, 3]).unwrap();
            let SplitParts { j, q } = split(&spec);
            // oracle: E as an explicit projection matrix
            let mut e = DMatrix::<C64>::zeros(6, 6);
            for i in [0, 2, 3] {
                e[(i, i)] = C64::new(1.0, 0.0);
            }
            let es = &e * &a;
            let id = DMatrix::<C64>::identity(6, 6);
            assert!((&q - (&id - &e) * &a).norm() < 1e-14);
            assert!((j.adjoint() - &es).norm() < 1e-14);
            assert!((&q + j.adjoint() - &a).norm() < 1e-14);
        }
    }

    #[test]
    fn gamma_zero_case() {
        let spec = diagonal_example(8);
        let zero_perp = OperatorSpec::from_entries(
            8,
            spec.null_indices().iter().map(|&i| (i, i, C64::new(0.5, 0.0))).collect::<Vec<_>>(),
            spec.null_indices().to_vec(),
            None,
        )
        .unwrap();
        let g = gamma_operator(&zero_perp).unwrap();
        assert!(g.z_perp.iter().all(|&z| z == 1.0));
        assert_eq!(g.gamma, DMatrix::zeros(8, 8));
        assert_eq!(g.hs_sum, 0.0);
    }

    #[test]
    fn gamma_perp_eigen_case_tends_to_pi_squared_over_24() {
        let spec = OperatorConfig {
            dim: 400,
            null_indices: IndexSelector::Named(NamedSelector::Odd),
            perp_indices: None,
            matrix: MatrixSource::ParityDiagonal {
                even: Law::Constant { value: 1.0 },
                odd: Law::Zero,
            },
        }
        .build()
        .unwrap();
        let g = gamma_operator(&spec).unwrap();
        let direct: f64 = (1..=200).map(|k| 1.0 / (4.0 * (k * k) as f64)).sum();
        assert!((g.hs_sum - direct).abs() < 1e-13);
        let summary = gamma_hs_summary(&spec);
        assert!((summary.total - direct).abs() < 1e-13);
        assert!((summary.limit_estimate - PI * PI / 24.0).abs() < 1e-7);
        assert!((summary.total - PI * PI / 24.0).abs() > 1e-4);
        assert!(g.lambda_weights.iter().zip(&g.z_perp).enumerate().all(|(k, (w, z))| {
            *w == 1.0 / ((k + 1) as f64 * z)
        }));
    }

    #[test]
    fn gamma_routes_agree_and_respect_bound() {
        for seed in 0..6 {
            let mut a = random_dense(7, seed);
            a *= C64::new(10f64.powi(seed as i32 - 2), 0.0);
            let spec = OperatorSpec::from_dense(&a, vec![1, 4]).unwrap();
            let g = gamma_operator(&spec).unwrap();
            let s = gamma_hs_summary(&spec);
            assert!((g.hs_sum - s.total).abs() < 1e-12 * g.hs_sum.max(1.0));
            assert!(g.hs_sum <= HS_BOUND + 1e-12);
        }
    }

    #[test]
    fn z_value_at_least_one() {
        let a = random_dense(4, 9);
        let spec = OperatorSpec::from_dense(&a, vec![0]).unwrap();
        for i in 0..4 {
            assert!(spec.z_value(&basis_vector(4, i)).unwrap() >= 1.0);
        }
        assert_eq!(spec.z_value(&DVector::zeros(4)).unwrap(), 1.0);
    }

    #[test]
    fn d_value_cases() {
        // annihilated vector
        let spec = diagonal_example(8);
        let aux = AuxOperators::new(&spec);
        let zero_s = OperatorSpec::from_entries(8, [(1, 1, C64::new(1.0, 0.0))], vec![1, 3], None)
            .unwrap();
        let aux0 = AuxOperators::new(&zero_s);
        assert_eq!(d_value(&aux0, &basis_vector(8, 5)).unwrap(), 0.0);
        // J = diag(16, 0, ...), Gamma = 0
        let s16 = OperatorSpec::from_entries(4, [(0, 0, C64::new(16.0, 0.0))], vec![0], None)
            .unwrap();
        let aux16 = AuxOperators::new(&s16);
        assert!((d_value(&aux16, &basis_vector(4, 0)).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(
            d_value(&aux, &DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn d_value_matches_definition_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..4 {
            let a = random_dense(5, 100 + seed);
            let spec = OperatorSpec::from_dense(&a, vec![0, 3]).unwrap();
            let aux = AuxOperators::new(&spec);
            let h = DVector::from_fn(5, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            // oracle: explicit E, Lambda and products from the definitions
            let mut e = DMatrix::<C64>::zeros(5, 5);
            for i in [0, 3] {
                e[(i, i)] = C64::new(1.0, 0.0);
            }
            let j = a.adjoint() * &e;
            let mut lambda = DMatrix::<C64>::zeros(5, 5);
            for (k, &i) in [1usize, 2, 4].iter().enumerate() {
                let mut fi = DVector::<C64>::zeros(5);
                fi[i] = C64::new(1.0, 0.0);
                let z = (a.adjoint() * &fi).norm() + 1.0;
                lambda[(i, i)] = C64::new(1.0 / ((k + 1) as f64 * z), 0.0);
            }
            let gamma = a.adjoint() * lambda;
            let oracle = (&j * &h).norm().powf(0.25)
                + (j.adjoint() * &h).norm().powf(0.25)
                + (gamma.adjoint() * &h).norm();
            assert!((d_value(&aux, &h).unwrap() - oracle).abs() < 1e-13);
        }
    }

    #[test]
    fn truncation_drops_last_index() {
        let spec = diagonal_example(16);
        let t = spec.truncated(15).unwrap();
        assert_eq!(t.dim(), 15);
        assert_eq!(t.null_indices(), &[1, 3, 5, 7, 9, 11, 13]);
        assert_eq!(t.entry(14, 14), C64::new(7.0, 0.0));
    }
}
