mod common;

use carleman::operator::{validate_null_sequence_default, AuxOperators};
use carleman::schmidt::{build_b, nuclearity_report, quarter_power_of_gram, schmidt_decompose};
use carleman::C64;
use common::{random_matrix, rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn matrix_strategy() -> impl Strategy<Value = DMatrix<C64>> {
    (any::<u64>(), 0.001f64..1000.0, 0usize..6).prop_map(|(seed, scale, zero_cols)| {
        let mut m = random_matrix(&mut rng(seed), 6, scale);
        for c in 0..zero_cols {
            m.column_mut(c).fill(C64::new(0.0, 0.0));
        }
        m
    })
}

fn unit(seed: u64, n: usize) -> DVector<C64> {
    let mut r = rng(seed);
    let v = DVector::from_fn(n, |_, _| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

#[test]
fn diagonal_and_rank_one() {
    let j = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]).map(|x| C64::new(x, 0.0)));
    let sys = schmidt_decompose(&j, None).unwrap();
    assert_eq!(sys.s.len(), 3);
    for (n, s) in sys.s.iter().enumerate() {
        assert!((s - (3 - n) as f64).abs() < 1e-14);
        let e = DVector::from_fn(3, |r, _| C64::new(if r == n { 1.0 } else { 0.0 }, 0.0));
        assert!((&sys.p[n] - &e).norm() < 1e-14);
        assert!((&sys.q[n] - &e).norm() < 1e-14);
    }

    // J = 16 <., p> q with B p = 16^(1/4) q
    let p = unit(1, 5);
    let q = unit(2, 5);
    let j = &q * p.adjoint() * C64::new(16.0, 0.0);
    let sys = schmidt_decompose(&j, None).unwrap();
    assert_eq!(sys.rank(), 1);
    assert!((sys.s[0] - 16.0).abs() < 1e-12);
    let phase = sys.p[0].dotc(&p);
    assert!((phase.norm() - 1.0).abs() < 1e-12);
    assert!((sys.q[0].dotc(&q) - phase).norm() < 1e-12);
    assert!((build_b(&sys).apply(&sys.p[0]).norm() - 2.0).abs() < 1e-12);
}

#[test]
fn unit_values_give_partial_isometry() {
    let mut j = DMatrix::zeros(4, 4);
    j[(0, 1)] = C64::new(1.0, 0.0);
    j[(2, 3)] = C64::new(0.0, 1.0);
    let b = build_b(&schmidt_decompose(&j, None).unwrap()).matrix();
    let bb = b.adjoint() * &b;
    assert!((&bb * &bb - &bb).norm() < 1e-14);
    assert!((bb.trace().re - 2.0).abs() < 1e-14);
}

#[test]
fn nuclearity_sums() {
    let s: Vec<f64> = (1..=20).map(|n| 4f64.powi(-n)).collect();
    let j = DMatrix::from_diagonal(&DVector::from_iterator(20, s.iter().map(|&x| C64::new(x, 0.0))));
    let sys = schmidt_decompose(&j, None).unwrap();
    assert_eq!(sys.rank(), 20);
    let r = nuclearity_report(&sys);
    assert!((r.half.total() - (1.0 - 2f64.powi(-20))).abs() < 1e-15);

    let zero = schmidt_decompose(&DMatrix::zeros(3, 3), None).unwrap();
    assert_eq!(nuclearity_report(&zero).half.total(), 0.0);
}

#[test]
fn quarter_sum_equals_null_sequence_sum() {
    let spec = common::load("diagonal_mixed.toml").operator.build().unwrap();
    let aux = AuxOperators::new(&spec);
    let sys = schmidt_decompose(&aux.j, None).unwrap();
    let null = validate_null_sequence_default(&spec).unwrap();
    assert!((nuclearity_report(&sys).quarter.total() - null.series.total()).abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_invariants(j in matrix_strategy()) {
        let sys = schmidt_decompose(&j, None).unwrap();
        let fro = j.norm();
        prop_assert!((sys.reconstruct() - &j).norm() <= 1e-10 * fro.max(f64::MIN_POSITIVE));
        let ssq: f64 = sys.s.iter().map(|s| s * s).sum();
        prop_assert!((ssq - fro * fro).abs() <= 1e-10 * fro * fro);
        prop_assert!(sys.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(sys.s.iter().all(|&s| s > sys.rank_tol));
        for a in 0..sys.rank() {
            for b in 0..sys.rank() {
                let d = if a == b { 1.0 } else { 0.0 };
                prop_assert!((sys.p[a].dotc(&sys.p[b]) - C64::new(d, 0.0)).norm() < 1e-10);
                prop_assert!((sys.q[a].dotc(&sys.q[b]) - C64::new(d, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn schwarz_bounds(j in matrix_strategy(), seed in any::<u64>()) {
        let sys = schmidt_decompose(&j, None).unwrap();
        let b = build_b(&sys);
        let f = unit(seed, 6);
        let slack = 1e-9 * (1.0 + j.norm().powf(0.25));
        prop_assert!(b.apply(&f).norm() <= (&j * &f).norm().powf(0.25) + slack);
        prop_assert!(b.apply_adjoint(&f).norm() <= (j.adjoint() * &f).norm().powf(0.25) + slack);
    }

    #[test]
    fn b_squares_to_quarter_power(j in matrix_strategy()) {
        let bm = build_b(&schmidt_decompose(&j, None).unwrap()).matrix();
        let want = quarter_power_of_gram(&j);
        prop_assert!((bm.adjoint() * &bm - &want).norm() <= 1e-6 * (1.0 + want.norm()));
    }
}
