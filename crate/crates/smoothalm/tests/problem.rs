//! Feasible-set geometry against independent oracles: projection laws checked over
//! seeded draws, the normal-cone residual against a projection-limit oracle, and the
//! power-iteration spectral norm against a full SVD.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use smoothalm::problem::{spectral_norm, spectral_norm_with_witness, FeasibleSet};

fn test_sets() -> Vec<FeasibleSet> {
    vec![
        FeasibleSet::origin_ball(4, 1.5).unwrap(),
        FeasibleSet::ball(DVector::from_vec(vec![1.0, -2.0, 0.5]), 2.0).unwrap(),
        FeasibleSet::bounds(
            DVector::from_vec(vec![-1.0, 0.0, -0.5]),
            DVector::from_vec(vec![1.0, 2.0, -0.5]), // last coordinate pinned
        )
        .unwrap(),
        FeasibleSet::product(vec![
            FeasibleSet::origin_ball(2, 1.0).unwrap(),
            FeasibleSet::bounds(
                DVector::from_vec(vec![-0.5, 0.25]),
                DVector::from_vec(vec![0.5, 2.0]),
            )
            .unwrap(),
        ])
        .unwrap(),
    ]
}

#[test]
fn projection_is_idempotent_and_lands_in_the_set() {
    let mut rg = rng(11);
    for set in test_sets() {
        for _ in 0..250 {
            let v = random_vector(&mut rg, set.dim(), 4.0);
            let p = set.project(&v);
            let again = set.project(&p);
            assert!(
                (&again - &p).norm() <= 1e-12 * (1.0 + p.norm()),
                "projection not idempotent: moved {:e}",
                (&again - &p).norm()
            );
            assert!(set.distance(&p) <= 1e-12, "projected point left the set");
        }
    }
}

#[test]
fn projection_is_nonexpansive() {
    let mut rg = rng(22);
    for set in test_sets() {
        for _ in 0..250 {
            let u = random_vector(&mut rg, set.dim(), 4.0);
            let v = random_vector(&mut rg, set.dim(), 4.0);
            let lhs = (set.project(&u) - set.project(&v)).norm();
            let rhs = (&u - &v).norm();
            assert!(
                lhs <= rhs + 1e-12,
                "projection expanded a pair: {lhs:e} > {rhs:e}"
            );
        }
    }
}

/// Independent oracle for the cone residual: the min-norm element of `g + N_X(x)`
/// equals the negated projection of `−g` onto the tangent cone, i.e. the limit of
/// `(x − P_X(x − s·g))/s` as `s → 0⁺`. A small finite `s` approximates it using only
/// `project` as the trusted primitive.
#[test]
fn cone_residual_matches_projection_limit() {
    let s = 1e-7;
    let mut rg = rng(33);
    for set in test_sets() {
        for _ in 0..100 {
            let x = set.project(&random_vector(&mut rg, set.dim(), 4.0));
            let g = random_vector(&mut rg, set.dim(), 3.0);
            let v = set.normal_cone_min_norm(&x, &g).unwrap();
            let oracle = (&x - &set.project(&(&x - &g * s))) / s;
            assert!(
                (&v - &oracle).norm() <= 1e-4 * (1.0 + g.norm()),
                "cone residual {v:?} vs projection-limit oracle {oracle:?}"
            );
        }
    }
}

#[test]
fn spectral_norm_matches_full_svd() {
    let mut rg = rng(44);
    for (rows, cols) in [(20, 50), (50, 20), (30, 30)] {
        let m = DMatrix::from_fn(rows, cols, |_, _| rg.gen_range(-1.0..1.0));
        let power = spectral_norm(&m, 1e-12);
        let svd_max = m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(0.0, f64::max);
        assert!(
            (power - svd_max).abs() <= 1e-6 * svd_max,
            "power iteration {power} vs SVD {svd_max}"
        );
    }
}

#[test]
fn spectral_witness_attains_the_estimate() {
    let mut rg = rng(55);
    let m = DMatrix::from_fn(15, 9, |_, _| rg.gen_range(-1.0..1.0));
    let (sigma, v) = spectral_norm_with_witness(&m, 1e-12);
    assert!((v.norm() - 1.0).abs() <= 1e-12, "witness must be unit norm");
    let attained = (&m * &v).norm();
    assert!(
        (attained - sigma).abs() <= 1e-9 * sigma,
        "witness attains {attained}, estimate {sigma}"
    );
}
