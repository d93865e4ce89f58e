//! Run diagnostics: stationarity measurement, certified inner solvers, the merit
//! function, and the inequality checks that certify a run followed the theory.
//!
//! The central objects are the two inner solutions
//!
//! ```text
//!     x(y, z) = argmin_{x ∈ X} K(x, z; y)                       (strongly convex)
//!     x(z)    = argmin_{x ∈ X, Ax = b} f(x) + (p/2)‖x − z‖²     (proximal point)
//! ```
//!
//! and the merit function `φ(x, y, z) = K(x, z; y) − 2 d(y, z) + 2 P(z)`, where
//! `d(y, z) = K(x(y,z), z; y)` is the smoothed dual value and `P(z)` the constrained
//! proximal value. Each inner solve returns a certificate (a fixed-point or KKT-style
//! residual at the returned point), and every check converts its inner tolerance into
//! an explicit slack so a pass/fail verdict is meaningful in floating point.
//!
//! Check names used in [`CheckResult::name`]:
//!
//! | name                    | inequality (up to slack)                                     |
//! |-------------------------|--------------------------------------------------------------|
//! | `primal_descent`        | `K^t − K^{t+1} ≥ ‖Δx‖²/(2c) + p‖Δz‖²/(2β) − α‖Ax^t−b‖²`      |
//! | `block_descent`         | per-block `K` decrease ≥ `‖Δx_j‖²/(2c)`                      |
//! | `block_error_bound`     | `‖E(t)‖ ≤ η‖Δx‖` (gradient staleness of the block sweep)     |
//! | `sufficient_decrease`   | `φ^t − φ^{t+1} ≥ ‖Δx‖²/(8c) + (α/2)‖Ax(y⁺,z)−b‖² + p‖Δz‖²/(6β)` |
//! | `eb_prev_to_minimizer`  | `‖Δx‖ ≥ σ₁‖x^t − x(y⁺, z^t)‖`                                |
//! | `eb_next_to_minimizer`  | `‖Δx‖ ≥ σ₂‖x^{t+1} − x(y⁺, z^t)‖`                            |
//! | `eb_dual_shift`         | `‖Δy‖ ≥ σ₃‖x(y⁺, z^t) − x(y^t, z^t)‖`                        |
//! | `eb_z_shift`            | `‖Δz‖ ≥ σ₄‖x(y⁺, z^t) − x(y⁺, z^{t+1})‖`                     |
//! | `eb_prox_shift`         | `‖Δz‖ ≥ σ₄‖x(z^t) − x(z^{t+1})‖`                             |

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::alm::{eval_k, grad_k, AlgoParams, IterateState, ParamError, RunResult, SolveError};
use crate::problem::{AffineConstraint, FeasibleSet, Objective};

/// Default tolerance for inner solves and checks.
pub const DEFAULT_INNER_TOL: f64 = 1e-8;

/// Iteration cap shared by the inner solvers.
pub const INNER_ITER_CAP: u64 = 1_000_000;

/// Additive slack for in-run (inner-solve-free) checks; absorbs accumulated
/// round-off, not model error.
pub const STEP_CHECK_SLACK: f64 = 1e-8;

pub const CHECK_PRIMAL_DESCENT: &str = "primal_descent";
pub const CHECK_BLOCK_DESCENT: &str = "block_descent";
pub const CHECK_BLOCK_ERROR_BOUND: &str = "block_error_bound";
pub const CHECK_SUFFICIENT_DECREASE: &str = "sufficient_decrease";
pub const CHECK_EB_PREV_TO_MINIMIZER: &str = "eb_prev_to_minimizer";
pub const CHECK_EB_NEXT_TO_MINIMIZER: &str = "eb_next_to_minimizer";
pub const CHECK_EB_DUAL_SHIFT: &str = "eb_dual_shift";
pub const CHECK_EB_Z_SHIFT: &str = "eb_z_shift";
pub const CHECK_EB_PROX_SHIFT: &str = "eb_prox_shift";

/// Stationarity measures at a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    /// `vnorm + feas`.
    pub gap: f64,
    /// Norm of the minimum-norm element of `∇f(x) + Aᵀy + N_X(x)`.
    pub vnorm: f64,
    /// `‖Ax − b‖`.
    pub feas: f64,
}

/// Stationarity gap of `(x, y)` for the original constrained problem: the norm of the
/// best stationarity residual over the normal cone plus the feasibility violation.
pub fn stationary_gap<O: Objective + ?Sized>(
    x: &DVector<f64>,
    y: &DVector<f64>,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
) -> Result<GapReport, SolveError> {
    let g = obj.grad(x) + con.a().tr_mul(y);
    let v = set.normal_cone_min_norm(x, &g)?;
    let vnorm = v.norm();
    let feas = con.residual(x).norm();
    Ok(GapReport {
        gap: vnorm + feas,
        vnorm,
        feas,
    })
}

/// Outcome of an inner solve: the point, its residual certificate evaluated *at that
/// point*, and the iterations spent.
#[derive(Debug, Clone)]
pub struct InnerSolveReport {
    pub solution: DVector<f64>,
    /// For [`solve_x_of_yz`]: the projected-gradient fixed-point residual
    /// `‖x − P_X(x − s∇ₓK(x))‖/s` with `s = 1/(L_f + γσ² + p)`. For
    /// [`solve_x_of_z`]: stationarity residual norm plus feasibility violation at the
    /// returned point/multiplier pair. At most the requested tolerance on success,
    /// and recomputable from the returned data alone.
    pub certified_residual: f64,
    pub iterations: u64,
}

/// Output of [`solve_x_of_z`]: the proximal point together with the equality
/// multiplier that certifies it. The certificate is
/// `‖cone residual of ∇f(x) + p(x − z) + Aᵀ·multiplier at x‖ + ‖Ax − b‖`.
#[derive(Debug, Clone)]
pub struct ProxPoint {
    pub report: InnerSolveReport,
    pub multiplier: DVector<f64>,
}

fn require_inner_convexity(params: &AlgoParams, lf: f64) -> Result<(), SolveError> {
    if !(params.p.is_finite() && params.p > lf) {
        return Err(ParamError::ProxWeightTooSmall {
            p: params.p,
            min: 3.0 * lf,
        }
        .into());
    }
    if !(params.gamma >= 0.0 && params.gamma.is_finite()) {
        return Err(ParamError::NegativePenalty(params.gamma).into());
    }
    Ok(())
}

/// Minimizer `x(y, z)` of `K(·, z; y)` over the set, by projected gradient descent
/// with the fixed step `s = 1/(L_f + γσ²_max(A) + p)`, started from `P_X(z)`.
///
/// The loop stops once the fixed-point residual `‖x − P_X(x − s∇ₓK(x))‖/s` falls to
/// or below `tol`; that residual is evaluated at the returned point and is
/// nonincreasing along the iteration (the projected-gradient map is nonexpansive for
/// this step size), so the certificate is trustworthy.
pub fn solve_x_of_yz<O: Objective + ?Sized>(
    y: &DVector<f64>,
    z: &DVector<f64>,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    tol: f64,
) -> Result<InnerSolveReport, SolveError> {
    solve_x_of_yz_from(&set.project(z), y, z, obj, con, set, params, tol)
}

/// [`solve_x_of_yz`] from an explicit (warm) start point.
#[allow(clippy::too_many_arguments)]
pub fn solve_x_of_yz_from<O: Objective + ?Sized>(
    x0: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    tol: f64,
) -> Result<InnerSolveReport, SolveError> {
    require_inner_convexity(params, obj.grad_lipschitz())?;
    let sigma = con.sigma_max();
    let s = 1.0 / (obj.grad_lipschitz() + params.gamma * sigma * sigma + params.p);
    let mut x = set.project(x0);
    let mut iterations = 0u64;
    loop {
        let g = grad_k(&x, z, y, obj, con, params);
        let moved = set.project(&(&x - &g * s));
        let residual = (&x - &moved).norm() / s;
        if residual <= tol {
            return Ok(InnerSolveReport {
                solution: x,
                certified_residual: residual,
                iterations,
            });
        }
        if iterations >= INNER_ITER_CAP {
            return Err(SolveError::InnerIterationCap {
                iterations,
                best_residual: residual,
            });
        }
        x = moved;
        iterations += 1;
    }
}

/// Proximal point `x(z)` of the equality-constrained problem
/// `min_{x ∈ X, Ax = b} f(x) + (p/2)‖x − z‖²`, by dual ascent on the smoothed dual:
/// each outer step solves `x(y_k, z)` to a tightened tolerance (warm-started) and
/// ascends `y_{k+1} = y_k + α_d (A x_k − b)` with `α_d = (p − L_f)/σ²_max(A)`.
///
/// The loop stops when the minimum-norm stationarity residual (over the normal cone,
/// using the effective multiplier `y_k + γ(Ax_k − b)`) and the feasibility violation
/// are both at or below `tol`; `iterations` counts dual ascent steps.
pub fn solve_x_of_z<O: Objective + ?Sized>(
    z: &DVector<f64>,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    tol: f64,
) -> Result<ProxPoint, SolveError> {
    require_inner_convexity(params, obj.grad_lipschitz())?;
    let lf = obj.grad_lipschitz();
    let sigma = con.sigma_max();
    let alpha_dual = if sigma > 0.0 {
        (params.p - lf) / (sigma * sigma)
    } else {
        0.0
    };
    // Solve the inner subproblems an order tighter than the outer target so the
    // stationarity part of the certificate is limited by dual convergence, not by
    // inner noise.
    let tol_pg = (0.1 * tol).max(1e-14);

    let mut y = DVector::zeros(con.rows());
    let mut x = set.project(z);
    let mut iterations = 0u64;
    loop {
        x = solve_x_of_yz_from(&x, &y, z, obj, con, set, params, tol_pg)?.solution;
        let res = con.residual(&x);
        let feas = res.norm();
        let multiplier = &y + &res * params.gamma;
        let g = obj.grad(&x) + con.a().tr_mul(&multiplier) + (&x - z) * params.p;
        let vnorm = set.normal_cone_min_norm(&x, &g)?.norm();
        if vnorm <= tol && feas <= tol {
            return Ok(ProxPoint {
                report: InnerSolveReport {
                    solution: x,
                    certified_residual: vnorm + feas,
                    iterations,
                },
                multiplier,
            });
        }
        if iterations >= INNER_ITER_CAP {
            return Err(SolveError::InnerIterationCap {
                iterations,
                best_residual: vnorm + feas,
            });
        }
        y += &res * alpha_dual;
        iterations += 1;
    }
}

/// Pieces of the merit function at one state.
#[derive(Debug, Clone)]
pub(crate) struct PotentialParts {
    pub k_value: f64,
    pub dual_value: f64,
    pub moreau_value: f64,
}

pub(crate) fn potential_parts<O: Objective + ?Sized>(
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    tol: f64,
) -> Result<PotentialParts, SolveError> {
    let xk = solve_x_of_yz(y, z, obj, con, set, params, tol)?.solution;
    let dual_value = eval_k(&xk, z, y, obj, con, params);
    let prox = solve_x_of_z(z, obj, con, set, params, tol)?;
    let moreau_value = moreau_value(&prox.report.solution, z, obj, params);
    Ok(PotentialParts {
        k_value: eval_k(x, z, y, obj, con, params),
        dual_value,
        moreau_value,
    })
}

fn moreau_value<O: Objective + ?Sized>(
    xz: &DVector<f64>,
    z: &DVector<f64>,
    obj: &O,
    params: &AlgoParams,
) -> f64 {
    obj.eval(xz) + 0.5 * params.p * (xz - z).norm_squared()
}

/// Merit function `φ(x, y, z) = K(x, z; y) − 2 d(y, z) + 2 P(z)`, evaluated with both
/// inner solves at tolerance `tol`. Bounded below by the objective's infimum over the
/// feasible set, and decreasing along the iteration up to inner-solve error.
#[allow(clippy::too_many_arguments)]
pub fn potential<O: Objective + ?Sized>(
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    tol: f64,
) -> Result<f64, SolveError> {
    let parts = potential_parts(x, y, z, obj, con, set, params, tol)?;
    Ok(parts.k_value - 2.0 * parts.dual_value + 2.0 * parts.moreau_value)
}

/// One verified inequality. `margin` is the slack-adjusted surplus
/// (`≥ 0` exactly when `pass`), so "how close was this to failing" survives into
/// reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub iteration: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl CheckResult {
    fn lower_bound(name: &str, iteration: u64, lhs: f64, rhs: f64, slack: f64) -> Self {
        let margin = lhs - rhs + slack;
        Self {
            name: name.to_string(),
            iteration,
            lhs,
            rhs,
            margin,
            pass: margin >= 0.0,
        }
    }

    fn upper_bound(name: &str, iteration: u64, lhs: f64, rhs: f64, slack: f64) -> Self {
        let margin = rhs - lhs + slack;
        Self {
            name: name.to_string(),
            iteration,
            lhs,
            rhs,
            margin,
            pass: margin >= 0.0,
        }
    }
}

/// Multiplicative constants of the step-versus-inner-solution error bounds.
///
/// For the single-block method: `σ₁ = c(p − L_f)`, `σ₂ = σ₁/(1 + σ₁)`,
/// `σ₃ = (p − L_f)/σ_max(A)`, `σ₄ = (p − L_f)/p`. For the multi-block method the
/// first two shrink by the gradient-staleness factor: `σ̄₁ = σ₁/(1 + η)` and
/// `σ̄₂ = σ̄₁/(1 + σ̄₁)` with `η` from [`admm_gradient_drift_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundConstants {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub sigma4: f64,
}

impl ErrorBoundConstants {
    /// Constants for the single-block method.
    pub fn new(params: &AlgoParams, lf: f64, sigma_a: f64) -> Self {
        let s1 = params.c * (params.p - lf);
        Self {
            sigma1: s1,
            sigma2: s1 / (1.0 + s1),
            sigma3: (params.p - lf) / sigma_a,
            sigma4: (params.p - lf) / params.p,
        }
    }

    /// Constants for the multi-block method with the given number of blocks.
    pub fn for_admm(params: &AlgoParams, lf: f64, sigma_a: f64, blocks: usize) -> Self {
        let eta = admm_gradient_drift_bound(params, lf, sigma_a, blocks);
        let s1 = params.c * (params.p - lf) / (1.0 + eta);
        Self {
            sigma1: s1,
            sigma2: s1 / (1.0 + s1),
            ..Self::new(params, lf, sigma_a)
        }
    }
}

/// Bound `η = c (L_f + p + γσ²_max(A)) N^{3/2}` on the gradient staleness of an
/// N-block sweep relative to the step length: `‖E(t)‖ ≤ η‖x^t − x^{t+1}‖`.
pub fn admm_gradient_drift_bound(
    params: &AlgoParams,
    lf: f64,
    sigma_a: f64,
    blocks: usize,
) -> f64 {
    params.c * (lf + params.p + params.gamma * sigma_a * sigma_a) * (blocks as f64).powf(1.5)
}

/// Distance ratios probing how strongly the inner solution responds to the dual
/// direction at one step; recorded for reporting, never pass/fail. `None` fields mean
/// the denominator `‖A x(y⁺, z^t) − b‖` was below `10·tol` and the ratio would be
/// noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualRatioSample {
    pub t: u64,
    /// `‖x(y⁺, z^t) − x(z^t)‖² / ‖A x(y⁺, z^t) − b‖`.
    pub weak: Option<f64>,
    /// `‖x(y⁺, z^t) − x(z^t)‖ / ‖A x(y⁺, z^t) − b‖`.
    pub strong: Option<f64>,
    pub denominator: f64,
}

/// All per-pair diagnostics for one step `t → t+1`.
#[derive(Debug, Clone)]
pub struct PairReport {
    pub checks: Vec<CheckResult>,
    pub dual_ratio: DualRatioSample,
}

/// The five inner solutions every pair check consumes. Computed once and shared.
struct PairSolves {
    /// `x(y^{t+1}, z^t)`.
    xk_ynext_zprev: DVector<f64>,
    /// `x(y^t, z^t)`.
    xk_yprev_zprev: DVector<f64>,
    /// `x(y^{t+1}, z^{t+1})`.
    xk_ynext_znext: DVector<f64>,
    /// `x(z^t)`.
    xz_prev: DVector<f64>,
    /// `x(z^{t+1})`.
    xz_next: DVector<f64>,
}

impl PairSolves {
    fn compute<O: Objective + ?Sized>(
        prev: &IterateState,
        next: &IterateState,
        obj: &O,
        con: &AffineConstraint,
        set: &FeasibleSet,
        params: &AlgoParams,
        tol: f64,
    ) -> Result<Self, SolveError> {
        if next.t != prev.t + 1 {
            return Err(SolveError::NonConsecutiveStates {
                prev: prev.t,
                next: next.t,
            });
        }
        // Solve two orders tighter than the comparison tolerance: value errors of
        // the constrained prox solves are first order in their certificate, so the
        // evaluation noise must sit well inside the published slacks.
        let tol = (0.01 * tol).max(1e-14);
        Ok(Self {
            xk_ynext_zprev: solve_x_of_yz(&next.y, &prev.z, obj, con, set, params, tol)?.solution,
            xk_yprev_zprev: solve_x_of_yz(&prev.y, &prev.z, obj, con, set, params, tol)?.solution,
            xk_ynext_znext: solve_x_of_yz(&next.y, &next.z, obj, con, set, params, tol)?.solution,
            xz_prev: solve_x_of_z(&prev.z, obj, con, set, params, tol)?.report.solution,
            xz_next: solve_x_of_z(&next.z, obj, con, set, params, tol)?.report.solution,
        })
    }
}

/// Sufficient-decrease check of the merit function across one step:
/// `φ^t − φ^{t+1} ≥ ‖Δx‖²/(8c) + (α/2)‖A x(y^{t+1}, z^t) − b‖² + p‖Δz‖²/(6β)`,
/// with slack `6·tol + 1e−8` covering the six inner solves feeding both sides.
#[allow(clippy::too_many_arguments)]
pub fn check_sufficient_decrease<O: Objective + ?Sized>(
    prev: &IterateState,
    next: &IterateState,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    tol: f64,
) -> Result<CheckResult, SolveError> {
    let solves = PairSolves::compute(prev, next, obj, con, set, params, tol)?;
    Ok(sufficient_decrease_from(
        &solves, prev, next, obj, con, params, tol,
    ))
}

fn sufficient_decrease_from<O: Objective + ?Sized>(
    solves: &PairSolves,
    prev: &IterateState,
    next: &IterateState,
    obj: &O,
    con: &AffineConstraint,
    params: &AlgoParams,
    tol: f64,
) -> CheckResult {
    let phi_prev = eval_k(&prev.x, &prev.z, &prev.y, obj, con, params)
        - 2.0 * eval_k(&solves.xk_yprev_zprev, &prev.z, &prev.y, obj, con, params)
        + 2.0 * moreau_value(&solves.xz_prev, &prev.z, obj, params);
    let phi_next = eval_k(&next.x, &next.z, &next.y, obj, con, params)
        - 2.0 * eval_k(&solves.xk_ynext_znext, &next.z, &next.y, obj, con, params)
        + 2.0 * moreau_value(&solves.xz_next, &next.z, obj, params);
    let dx = (&next.x - &prev.x).norm();
    let dz = (&next.z - &prev.z).norm();
    let mid_feas = con.residual(&solves.xk_ynext_zprev).norm();
    let rhs = dx * dx / (8.0 * params.c)
        + 0.5 * params.alpha * mid_feas * mid_feas
        + params.p * dz * dz / (6.0 * params.beta);
    let slack = 6.0 * tol + STEP_CHECK_SLACK;
    CheckResult::lower_bound(
        CHECK_SUFFICIENT_DECREASE,
        prev.t,
        phi_prev - phi_next,
        rhs,
        slack,
    )
}

/// The five step-versus-inner-solution error bounds at one step (see the module table).
/// Each uses slack `(1 + 1/σᵢ)·tol` for its constant.
#[allow(clippy::too_many_arguments)]
pub fn check_primal_error_bounds<O: Objective + ?Sized>(
    prev: &IterateState,
    next: &IterateState,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    consts: &ErrorBoundConstants,
    tol: f64,
) -> Result<Vec<CheckResult>, SolveError> {
    let solves = PairSolves::compute(prev, next, obj, con, set, params, tol)?;
    Ok(error_bounds_from(&solves, prev, next, consts, tol))
}

fn error_bounds_from(
    solves: &PairSolves,
    prev: &IterateState,
    next: &IterateState,
    consts: &ErrorBoundConstants,
    tol: f64,
) -> Vec<CheckResult> {
    let dx = (&next.x - &prev.x).norm();
    let dy = (&next.y - &prev.y).norm();
    let dz = (&next.z - &prev.z).norm();
    let slack = |sigma: f64| (1.0 + 1.0 / sigma) * tol;
    vec![
        CheckResult::lower_bound(
            CHECK_EB_PREV_TO_MINIMIZER,
            prev.t,
            dx,
            consts.sigma1 * (&prev.x - &solves.xk_ynext_zprev).norm(),
            slack(consts.sigma1),
        ),
        CheckResult::lower_bound(
            CHECK_EB_NEXT_TO_MINIMIZER,
            prev.t,
            dx,
            consts.sigma2 * (&next.x - &solves.xk_ynext_zprev).norm(),
            slack(consts.sigma2),
        ),
        CheckResult::lower_bound(
            CHECK_EB_DUAL_SHIFT,
            prev.t,
            dy,
            consts.sigma3 * (&solves.xk_ynext_zprev - &solves.xk_yprev_zprev).norm(),
            slack(consts.sigma3),
        ),
        CheckResult::lower_bound(
            CHECK_EB_Z_SHIFT,
            prev.t,
            dz,
            consts.sigma4 * (&solves.xk_ynext_zprev - &solves.xk_ynext_znext).norm(),
            slack(consts.sigma4),
        ),
        CheckResult::lower_bound(
            CHECK_EB_PROX_SHIFT,
            prev.t,
            dz,
            consts.sigma4 * (&solves.xz_prev - &solves.xz_next).norm(),
            slack(consts.sigma4),
        ),
    ]
}

/// Distance-to-feasibility ratios at one step; see [`DualRatioSample`].
#[allow(clippy::too_many_arguments)]
pub fn dual_error_ratio<O: Objective + ?Sized>(
    prev: &IterateState,
    next: &IterateState,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    tol: f64,
) -> Result<DualRatioSample, SolveError> {
    let solves = PairSolves::compute(prev, next, obj, con, set, params, tol)?;
    Ok(dual_ratio_from(&solves, prev, con, tol))
}

fn dual_ratio_from(
    solves: &PairSolves,
    prev: &IterateState,
    con: &AffineConstraint,
    tol: f64,
) -> DualRatioSample {
    let denominator = con.residual(&solves.xk_ynext_zprev).norm();
    if denominator <= 10.0 * tol {
        return DualRatioSample {
            t: prev.t,
            weak: None,
            strong: None,
            denominator,
        };
    }
    let dist = (&solves.xk_ynext_zprev - &solves.xz_prev).norm();
    DualRatioSample {
        t: prev.t,
        weak: Some(dist * dist / denominator),
        strong: Some(dist / denominator),
        denominator,
    }
}

/// Runs every per-pair diagnostic on one step with the inner solves shared: the
/// sufficient-decrease check, the five error bounds, and the dual ratios.
#[allow(clippy::too_many_arguments)]
pub fn check_iteration_pair<O: Objective + ?Sized>(
    prev: &IterateState,
    next: &IterateState,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    consts: &ErrorBoundConstants,
    tol: f64,
) -> Result<PairReport, SolveError> {
    let solves = PairSolves::compute(prev, next, obj, con, set, params, tol)?;
    let mut checks = vec![sufficient_decrease_from(
        &solves, prev, next, obj, con, params, tol,
    )];
    checks.extend(error_bounds_from(&solves, prev, next, consts, tol));
    Ok(PairReport {
        dual_ratio: dual_ratio_from(&solves, prev, con, tol),
        checks,
    })
}

/// Converts the in-run descent samples of a finished run into check results
/// (slack [`STEP_CHECK_SLACK`]).
pub fn descent_check_results(run: &RunResult) -> Vec<CheckResult> {
    run.descent
        .iter()
        .map(|d| CheckResult::lower_bound(CHECK_PRIMAL_DESCENT, d.t, d.lhs, d.rhs, STEP_CHECK_SLACK))
        .collect()
}

/// Converts the multi-block samples of a finished run into check results: per-block
/// descent plus the gradient-staleness bound `‖E(t)‖ ≤ η‖Δx‖ + slack` for the given
/// `η` (from [`admm_gradient_drift_bound`]).
pub fn block_check_results(run: &RunResult, eta: f64) -> Vec<CheckResult> {
    let mut out: Vec<CheckResult> = run
        .block_descent
        .iter()
        .map(|b| CheckResult::lower_bound(CHECK_BLOCK_DESCENT, b.t, b.lhs, b.rhs, STEP_CHECK_SLACK))
        .collect();
    out.extend(run.block_error.iter().map(|e| {
        CheckResult::upper_bound(
            CHECK_BLOCK_ERROR_BOUND,
            e.t,
            e.e_norm,
            eta * e.dx_norm,
            STEP_CHECK_SLACK,
        )
    }));
    out
}
