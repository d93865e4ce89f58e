//! Shared helpers for the integration tests: seeded randomness, finite-difference
//! oracles, and a standard problem fixture built from the benchmark generator.
#![allow(dead_code)]

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothalm::alm::AlgoParams;
use smoothalm::problem::{AffineConstraint, FeasibleSet};
use smoothalm::qp::{QpInstance, QpObjective};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    x: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[i] += h;
        lo[i] -= h;
        (f(&hi) - f(&lo)) / (2.0 * h)
    })
}

/// Largest componentwise deviation of `a` from `b`, relative to `max(1, |a_i|, |b_i|)`.
pub fn max_rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    (0..a.len())
        .map(|i| (a[i] - b[i]).abs() / a[i].abs().max(b[i].abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// A ready-to-run problem: generated instance, its oracles, and its default
/// parameter schedule.
pub struct Fixture {
    pub inst: QpInstance,
    pub obj: QpObjective,
    pub con: AffineConstraint,
    pub set: FeasibleSet,
    pub params: AlgoParams,
}

pub fn fixture(n: usize, m: usize, seed: u64, beta: f64) -> Fixture {
    let inst = QpInstance::generate(n, m, seed).expect("valid shape");
    let obj = inst.objective();
    let con = inst.constraint().expect("valid constraint");
    let set = inst.ball();
    let params = inst.default_params(beta).expect("non-degenerate instance");
    Fixture {
        inst,
        obj,
        con,
        set,
        params,
    }
}

/// A convex instance (`Q = I`) manufactured so that `xstar` (strictly inside the
/// ball) is the unique solution with multiplier `ystar = 0`: `r = −Q·xstar` and
/// `b = A·xstar`, making both the gradient and the residual cancel exactly at
/// `xstar`.
pub fn convex_pinned_solution(n: usize, m: usize, seed: u64) -> (QpInstance, DVector<f64>) {
    let mut rg = rng(seed);
    let q = nalgebra::DMatrix::<f64>::identity(n, n);
    let a = nalgebra::DMatrix::from_fn(m, n, |_, _| rg.gen_range(-1.0..1.0));
    let xstar = random_vector(&mut rg, n, 0.5);
    let r = -(&q * &xstar);
    let b = &a * &xstar;
    let inst = QpInstance {
        q,
        r,
        a,
        b,
        rho_ball: 10.0,
        seed,
        witness: Some(xstar.clone()),
    };
    (inst, xstar)
}
