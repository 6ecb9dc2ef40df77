//! Schmidt system of the nuclear part `J` and the operator `B` built from
//! fourth roots of its singular values.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{SeriesReport, DEFAULT_TAIL_LEN};
use crate::C64;

/// Default relative rank cutoff, multiplied by the largest singular value.
pub const DEFAULT_RELATIVE_RANK_TOL: f64 = 1e-12;

/// `J = sum_n s_n <., p_n> q_n`, with `s` non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSystem {
    pub s: Vec<f64>,
    /// Right singular vectors (eigenvectors of `J*J`).
    pub p: Vec<DVector<C64>>,
    /// Left singular vectors (eigenvectors of `J J*`).
    pub q: Vec<DVector<C64>>,
    pub dim: usize,
    pub rank_tol: f64,
}

impl SchmidtSystem {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `sum_n s_n q_n p_n*` as a matrix.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        weighted_outer_sum(self.dim, &self.s, &self.q, &self.p)
    }
}

fn weighted_outer_sum(
    dim: usize,
    w: &[f64],
    left: &[DVector<C64>],
    right: &[DVector<C64>],
) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    for ((w, l), r) in w.iter().zip(left).zip(right) {
        m += l * r.adjoint() * C64::new(*w, 0.0);
    }
    m
}

/// Singular triples of `j` above `rank_tol` (absolute). `None` selects
/// `1e-12 * s_1`.
pub fn schmidt_decompose(j: &DMatrix<C64>, rank_tol: Option<f64>) -> Result<SchmidtSystem> {
    if j.nrows() != j.ncols() {
        return Err(Error::DimensionMismatch { expected: j.nrows(), got: j.ncols() });
    }
    for r in 0..j.nrows() {
        for c in 0..j.ncols() {
            let v = j[(r, c)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    let dim = j.nrows();
    if dim == 0 || j.iter().all(|v| *v == C64::new(0.0, 0.0)) {
        let tol = rank_tol.unwrap_or(0.0);
        return Ok(SchmidtSystem { s: vec![], p: vec![], q: vec![], dim, rank_tol: tol });
    }
    let svd = j.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s1 = svd.singular_values[order[0]];
    let tol = rank_tol.unwrap_or(DEFAULT_RELATIVE_RANK_TOL * s1);
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("rank_tol {tol} must be positive")));
    }
    let mut sys = SchmidtSystem { s: vec![], p: vec![], q: vec![], dim, rank_tol: tol };
    for idx in order {
        let s = svd.singular_values[idx];
        if s <= tol {
            continue;
        }
        let mut p: DVector<C64> = v_t.row(idx).adjoint();
        let mut q: DVector<C64> = u.column(idx).into_owned();
        // first nonzero coordinate of p made real positive; q follows
        if let Some(c) = p.iter().find(|c| c.norm() > 1e-14).copied() {
            let phase = c.conj() / c.norm();
            p *= phase;
            q *= phase;
        }
        sys.s.push(s);
        sys.p.push(p);
        sys.q.push(q);
    }
    Ok(sys)
}

/// `B = sum_n s_n^(1/4) <., p_n> q_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BOperator {
    pub s_quarter: Vec<f64>,
    pub p: Vec<DVector<C64>>,
    pub q: Vec<DVector<C64>>,
    pub dim: usize,
}

pub fn build_b(sys: &SchmidtSystem) -> BOperator {
    BOperator {
        s_quarter: sys.s.iter().map(|s| s.powf(0.25)).collect(),
        p: sys.p.clone(),
        q: sys.q.clone(),
        dim: sys.dim,
    }
}

impl BOperator {
    pub fn apply(&self, f: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.dim);
        for ((w, p), q) in self.s_quarter.iter().zip(&self.p).zip(&self.q) {
            out += q * (p.dotc(f) * *w);
        }
        out
    }

    pub fn apply_adjoint(&self, f: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(self.dim);
        for ((w, p), q) in self.s_quarter.iter().zip(&self.p).zip(&self.q) {
            out += p * (q.dotc(f) * *w);
        }
        out
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        weighted_outer_sum(self.dim, &self.s_quarter, &self.q, &self.p)
    }
}

/// `(J* J)^(1/4)` through a Hermitian eigendecomposition, independent of the
/// singular value route. Eigenvalues below `dim eps lambda_max` are rounding
/// noise of the Gram product and are taken as zero.
pub fn quarter_power_of_gram(j: &DMatrix<C64>) -> DMatrix<C64> {
    let gram = j.adjoint() * j;
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = j.ncols() as f64 * f64::EPSILON * top;
    let roots = eig.eigenvalues.map(|l| C64::new(if l > floor { l.powf(0.25) } else { 0.0 }, 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearityReport {
    pub rank: usize,
    /// Partial sums of `s_n^(1/2)`.
    pub half: SeriesReport,
    /// Partial sums of `s_n^(1/4)`.
    pub quarter: SeriesReport,
}

pub fn nuclearity_report(sys: &SchmidtSystem) -> NuclearityReport {
    let half = sys.s.iter().map(|s| s.sqrt()).collect();
    let quarter = sys.s.iter().map(|s| s.powf(0.25)).collect();
    NuclearityReport {
        rank: sys.rank(),
        half: SeriesReport::new(half, DEFAULT_TAIL_LEN),
        quarter: SeriesReport::new(quarter, DEFAULT_TAIL_LEN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_matrix(n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<C64> {
        let v = DVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        v.normalize()
    }

    #[test]
    fn diagonal_case() {
        let j = DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0), c(3.0), c(1.0)]));
        let sys = schmidt_decompose(&j, None).unwrap();
        assert_eq!(sys.rank(), 3);
        for (got, want) in sys.s.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        for (n, idx) in [1usize, 0, 2].into_iter().enumerate() {
            let e = crate::operator::basis_vector(3, idx);
            assert!((&sys.p[n] - &e).norm() < 1e-14);
            assert!((&sys.q[n] - &e).norm() < 1e-14);
        }
    }

    #[test]
    fn rank_one_case_up_to_phase() {
        let p = DVector::from_vec(vec![c(0.6), C64::new(0.0, 0.8), c(0.0)]);
        let q = DVector::from_vec(vec![c(0.0), c(1.0), c(0.0)]);
        let j = &q * p.adjoint() * c(5.0);
        let sys = schmidt_decompose(&j, None).unwrap();
        assert_eq!(sys.rank(), 1);
        assert!((sys.s[0] - 5.0).abs() < 1e-13);
        assert!((sys.p[0].dotc(&p).norm() - 1.0).abs() < 1e-13);
        // first coordinate of p is made real positive, so here the vectors agree
        assert!((&sys.p[0] - &p).norm() < 1e-13);
        assert!((&sys.q[0] - &q).norm() < 1e-13);
    }

    #[test]
    fn zero_matrix_gives_empty_system() {
        let sys = schmidt_decompose(&DMatrix::zeros(4, 4), None).unwrap();
        assert_eq!(sys.rank(), 0);
        let r = nuclearity_report(&sys);
        assert_eq!(r.half.total(), 0.0);
        assert_eq!(r.quarter.total(), 0.0);
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut j = DMatrix::<C64>::zeros(2, 2);
        j[(1, 0)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(schmidt_decompose(&j, None), Err(Error::NonFinite { row: 1, col: 0 })));
    }

    #[test]
    fn random_reconstruction_and_frobenius() {
        for seed in 0..8 {
            let j = random_matrix(6, seed);
            let sys = schmidt_decompose(&j, None).unwrap();
            let frob2: f64 = j.iter().map(|v| v.norm_sqr()).sum();
            let s2: f64 = sys.s.iter().map(|s| s * s).sum();
            assert!((frob2 - s2).abs() < 1e-10);
            assert!((sys.reconstruct() - &j).norm() <= 1e-10 * j.norm());
            assert!(sys.s.windows(2).all(|w| w[0] >= w[1]));
            for m in 0..sys.rank() {
                for n in 0..sys.rank() {
                    let d = if m == n { 1.0 } else { 0.0 };
                    assert!((sys.p[m].dotc(&sys.p[n]) - c(d)).norm() < 1e-10);
                    assert!((sys.q[m].dotc(&sys.q[n]) - c(d)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn b_on_rank_one() {
        let p = crate::operator::basis_vector(3, 2);
        let q = crate::operator::basis_vector(3, 0);
        let j = &q * p.adjoint() * c(16.0);
        let b = build_b(&schmidt_decompose(&j, None).unwrap());
        assert!((b.apply(&p).norm() - 2.0).abs() < 1e-13);
        assert!((b.apply_adjoint(&q) - &p * c(2.0)).norm() < 1e-13);
    }

    #[test]
    fn unit_singular_values_give_partial_isometry() {
        let j = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(1.0), c(0.0), c(0.0)]));
        let b = build_b(&schmidt_decompose(&j, None).unwrap()).matrix();
        let bb = b.adjoint() * &b;
        // B*B is the projection onto span(f_0, f_1); compare projectors
        assert!((&bb * &bb - &bb).norm() < 1e-13);
        assert!((bb.trace() - c(2.0)).norm() < 1e-13);
    }

    #[test]
    fn degenerate_singular_values_span_same_subspace() {
        let mut j = DMatrix::<C64>::zeros(4, 4);
        j[(0, 1)] = c(2.0);
        j[(1, 0)] = c(2.0);
        j[(3, 3)] = c(1.0);
        let sys = schmidt_decompose(&j, None).unwrap();
        let proj = weighted_outer_sum(4, &[1.0, 1.0], &sys.p[..2], &sys.p[..2]);
        let mut want = DMatrix::<C64>::zeros(4, 4);
        want[(0, 0)] = c(1.0);
        want[(1, 1)] = c(1.0);
        assert!((proj - want).norm() < 1e-12);
    }

    #[test]
    fn schwarz_bounds_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..5 {
            let j = random_matrix(6, 1000 + seed) * c(10f64.powi(seed as i32 - 2));
            let b = build_b(&schmidt_decompose(&j, None).unwrap());
            for _ in 0..100 {
                let f = random_unit(6, &mut rng);
                assert!(b.apply(&f).norm() - (&j * &f).norm().powf(0.25) <= 1e-10);
                assert!(b.apply_adjoint(&f).norm() - (j.adjoint() * &f).norm().powf(0.25) <= 1e-10);
            }
        }
    }

    #[test]
    fn b_star_b_is_quarter_power_of_gram() {
        for seed in 0..5 {
            let j = random_matrix(6, 200 + seed);
            let b = build_b(&schmidt_decompose(&j, None).unwrap()).matrix();
            let lhs = b.adjoint() * &b;
            assert!((lhs - quarter_power_of_gram(&j)).norm() < 1e-8);
        }
    }

    #[test]
    fn geometric_half_root_sum() {
        let s: Vec<C64> = (1..=20).map(|n| c(4f64.powi(-n))).collect();
        let j = DMatrix::from_diagonal(&DVector::from_vec(s));
        let r = nuclearity_report(&schmidt_decompose(&j, Some(1e-300)).unwrap());
        assert_eq!(r.rank, 20);
        let direct: f64 = (1..=20).map(|n| 2f64.powi(-n)).sum();
        assert!((r.half.total() - direct).abs() < 1e-12);
        assert!((r.half.total() - 1.0).abs() < 1e-6);
        assert!(r.half.decay.summable);
    }
}
