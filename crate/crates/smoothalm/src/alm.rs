//! Smoothed proximal augmented Lagrangian iteration.
//!
//! For `min f(x) s.t. Ax = b, x ∈ X` the method works on the smoothed proximal
//! augmented Lagrangian
//!
//! ```text
//!     K(x, z; y) = f(x) + yᵀ(Ax − b) + (γ/2)‖Ax − b‖² + (p/2)‖x − z‖²,
//! ```
//!
//! which is `(p − L_f)`-strongly convex in `x` whenever `p > L_f`. One iteration
//! performs, in this order,
//!
//! ```text
//!     y⁺ = y + α (Ax − b)                      (dual ascent)
//!     x⁺ = P_X(x − c ∇ₓK(x, z; y⁺))            (projected gradient on K)
//!     z⁺ = z + β (x⁺ − z)                      (proximal-center interpolation)
//! ```
//!
//! The x-update uses the *already updated* multiplier and the z-update uses the
//! *already updated* primal point; the update order is part of the method's contract
//! and the run drivers preserve it exactly. [`run_alm`] wraps the step map with
//! stationarity monitoring, trace recording, and per-step descent bookkeeping.

use std::collections::BTreeSet;

use nalgebra::DVector;
use thiserror::Error;

use crate::diagnostics::{potential, stationary_gap};
use crate::problem::{AffineConstraint, FeasibleSet, Objective, ProblemError, SET_MEMBERSHIP_TOL};

/// Iterates whose norm exceeds this cap abort the run (divergence guard).
pub const ITERATE_NORM_CAP: f64 = 1e12;

/// Relative slack admitted when checking the dual step-size bound. The benchmark
/// default α sits exactly on the stability boundary in exact arithmetic, so a strict
/// floating-point comparison would reject it depending on rounding direction.
const ALPHA_BOUND_REL_SLACK: f64 = 1e-9;

/// Step sizes and smoothing weights of the iteration.
///
/// Given the gradient Lipschitz constant `L_f` and `σ = σ_max(A)`, a parameter set is
/// admissible when
///
/// ```text
///     p ≥ 3·L_f (and p > L_f),   γ ≥ 0,
///     0 < c < 1/(L_f + γσ² + p),
///     0 < α ≤ c(p − L_f)²/(4σ²),   0 < β ≤ 1.
/// ```
///
/// [`AlgoParams::validate`] enforces these; the run drivers call it up front.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlgoParams {
    /// Proximal smoothing weight `p`.
    pub p: f64,
    /// Quadratic penalty weight `γ`.
    pub gamma: f64,
    /// Primal (projected-gradient) step size `c`.
    pub c: f64,
    /// Dual ascent step size `α`.
    pub alpha: f64,
    /// Proximal-center interpolation factor `β`.
    pub beta: f64,
}

/// A violated admissibility condition in [`AlgoParams::validate`].
#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("parameters and problem constants must be finite and nonnegative")]
    NonFinite,
    #[error("proximal weight p = {p} must be at least 3·L_f = {min} and exceed L_f")]
    ProxWeightTooSmall { p: f64, min: f64 },
    #[error("penalty γ = {0} must be nonnegative")]
    NegativePenalty(f64),
    #[error("primal step c = {c} must lie in (0, {bound})")]
    PrimalStepOutOfRange { c: f64, bound: f64 },
    #[error("dual step α = {alpha} must lie in (0, {bound}]")]
    DualStepOutOfRange { alpha: f64, bound: f64 },
    #[error("interpolation factor β = {0} must lie in (0, 1]")]
    InterpolationOutOfRange(f64),
}

impl AlgoParams {
    /// Checks admissibility against the problem constants `L_f` and `σ_max(A)`.
    ///
    /// The dual bound is applied with a `1e−9` relative slack because the benchmark
    /// defaults place α exactly on it.
    pub fn validate(&self, lf: f64, sigma_a: f64) -> Result<(), ParamError> {
        let fields = [self.p, self.gamma, self.c, self.alpha, self.beta, lf, sigma_a];
        if fields.iter().any(|v| !v.is_finite()) || lf < 0.0 || sigma_a < 0.0 {
            return Err(ParamError::NonFinite);
        }
        if self.p < 3.0 * lf || self.p <= lf {
            return Err(ParamError::ProxWeightTooSmall {
                p: self.p,
                min: 3.0 * lf,
            });
        }
        if self.gamma < 0.0 {
            return Err(ParamError::NegativePenalty(self.gamma));
        }
        let c_bound = 1.0 / (lf + self.gamma * sigma_a * sigma_a + self.p);
        if !(self.c > 0.0 && self.c < c_bound) {
            return Err(ParamError::PrimalStepOutOfRange {
                c: self.c,
                bound: c_bound,
            });
        }
        let alpha_bound = if sigma_a > 0.0 {
            self.c * (self.p - lf) * (self.p - lf) / (4.0 * sigma_a * sigma_a)
        } else {
            f64::INFINITY
        };
        if !(self.alpha > 0.0 && self.alpha <= alpha_bound * (1.0 + ALPHA_BOUND_REL_SLACK)) {
            return Err(ParamError::DualStepOutOfRange {
                alpha: self.alpha,
                bound: alpha_bound,
            });
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(ParamError::InterpolationOutOfRange(self.beta));
        }
        Ok(())
    }

    /// Derives an admissible parameter set from problem constants with a 0.999 safety
    /// factor on the open bounds: `p = 3·L_f` (or 1 when `L_f = 0`), the given `γ`,
    /// `c = 0.999/(L_f + γσ² + p)`, and `α` at 0.999 of its bound.
    pub fn derive(lf: f64, sigma_a: f64, gamma: f64, beta: f64) -> Result<Self, ParamError> {
        if !(lf.is_finite() && sigma_a.is_finite() && gamma.is_finite()) || lf < 0.0 {
            return Err(ParamError::NonFinite);
        }
        let p = if lf > 0.0 { 3.0 * lf } else { 1.0 };
        let c = 0.999 / (lf + gamma * sigma_a * sigma_a + p);
        let alpha = if sigma_a > 0.0 {
            0.999 * c * (p - lf) * (p - lf) / (4.0 * sigma_a * sigma_a)
        } else {
            c
        };
        let params = AlgoParams {
            p,
            gamma,
            c,
            alpha,
            beta,
        };
        params.validate(lf, sigma_a)?;
        Ok(params)
    }
}

/// One full iterate of the method: primal point, multiplier, proximal center, and the
/// iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub t: u64,
}

/// One monitoring row: stationarity measures plus step lengths at iteration `t`.
///
/// `dx`/`dz` are backward-looking (`‖x^{t−1} − x^t‖`, `‖z^{t−1} − z^t‖`; `0.0` at
/// `t = 0`). `phi` is the merit value when its computation was requested.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    pub gap: f64,
    pub vnorm: f64,
    pub feas: f64,
    pub dx: f64,
    pub dz: f64,
    pub phi: Option<f64>,
}

/// Termination and recording policy for a run.
#[derive(Debug, Clone)]
pub struct StopRule {
    /// Hard iteration limit.
    pub max_iters: u64,
    /// Stop once the stationarity gap (`‖v‖ + ‖Ax − b‖`) falls to or below this.
    pub gap_tol: f64,
    /// Record a [`TraceRecord`] whenever `t % record_every == 0` (plus the final
    /// iterate). Must be at least 1.
    pub record_every: u64,
    /// Evaluate the merit function φ at recorded iterations (two inner solves per
    /// evaluation — off by default).
    pub compute_phi: bool,
    /// Inner-solve tolerance for φ evaluations.
    pub phi_tol: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            gap_tol: 1e-6,
            record_every: 1,
            compute_phi: false,
            phi_tol: 1e-8,
        }
    }
}

/// Certificate sample for the per-step descent of `K`: at step `t → t+1`,
/// `lhs = K^t − K^{t+1}` and
/// `rhs = ‖Δx‖²/(2c) + p‖Δz‖²/(2β) − α‖Ax^t − b‖²`; admissible parameters guarantee
/// `lhs ≥ rhs` up to round-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentSample {
    pub t: u64,
    pub lhs: f64,
    pub rhs: f64,
}

impl DescentSample {
    /// Raw surplus `lhs − rhs` (no slack applied).
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Per-block descent sample from the multi-block stepper: updating block `block` at
/// step `t` decreased `K` by `lhs`, with guaranteed decrease `rhs = ‖Δx_j‖²/(2c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDescentSample {
    pub t: u64,
    pub block: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Gradient-staleness sample from the multi-block stepper: `e_norm` is the norm of the
/// deviation between the sequential block update and a full (Jacobi) projected-gradient
/// update at step `t`, and `dx_norm = ‖x^t − x^{t+1}‖` is the quantity that bounds it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockErrorSample {
    pub t: u64,
    pub e_norm: f64,
    pub dx_norm: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Monitoring rows at the recording cadence plus the final iterate.
    pub trace: Vec<TraceRecord>,
    /// The state the run stopped at.
    pub final_state: IterateState,
    /// True when the gap tolerance triggered before the iteration limit.
    pub stopped_early: bool,
    /// Descent certificates for steps starting at recorded iterations.
    pub descent: Vec<DescentSample>,
    /// Per-block descent certificates (multi-block runs only).
    pub block_descent: Vec<BlockDescentSample>,
    /// Gradient-staleness samples (multi-block runs only).
    pub block_error: Vec<BlockErrorSample>,
    /// States captured at the iterations requested via the captured-run entry points.
    pub captured: Vec<IterateState>,
}

/// Errors raised by the solvers and diagnostics.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{what} starts {dist:.3e} outside the feasible set (tolerance {:.1e})", SET_MEMBERSHIP_TOL)]
    StartOutsideSet { what: &'static str, dist: f64 },
    #[error("iterate {var} overflowed at iteration {iteration} (norm {norm:.3e})")]
    IterateOverflow {
        var: &'static str,
        iteration: u64,
        norm: f64,
    },
    #[error("inner solver hit its iteration cap ({iterations}) with best residual {best_residual:.3e}")]
    InnerIterationCap { iterations: u64, best_residual: f64 },
    #[error("invalid stop rule: {0}")]
    BadStopRule(&'static str),
    #[error("invalid block problem: {0}")]
    BadBlockProblem(String),
    #[error("diagnostic pair must be consecutive iterates, got t = {prev} and t = {next}")]
    NonConsecutiveStates { prev: u64, next: u64 },
}

/// Value of the smoothed proximal augmented Lagrangian
/// `K(x, z; y) = f(x) + yᵀ(Ax − b) + (γ/2)‖Ax − b‖² + (p/2)‖x − z‖²`.
pub fn eval_k<O: Objective + ?Sized>(
    x: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
    obj: &O,
    con: &AffineConstraint,
    params: &AlgoParams,
) -> f64 {
    let res = con.residual(x);
    obj.eval(x)
        + y.dot(&res)
        + 0.5 * params.gamma * res.norm_squared()
        + 0.5 * params.p * (x - z).norm_squared()
}

/// Gradient of `K` in `x`:
/// `∇ₓK(x, z; y) = ∇f(x) + Aᵀ(y + γ(Ax − b)) + p(x − z)`.
pub fn grad_k<O: Objective + ?Sized>(
    x: &DVector<f64>,
    z: &DVector<f64>,
    y: &DVector<f64>,
    obj: &O,
    con: &AffineConstraint,
    params: &AlgoParams,
) -> DVector<f64> {
    let res = con.residual(x);
    obj.grad(x) + con.a().tr_mul(&(y + &res * params.gamma)) + (x - z) * params.p
}

/// One iteration of the single-block method (dual step, then projected-gradient primal
/// step against the fresh multiplier, then proximal-center interpolation).
pub fn alm_step<O: Objective + ?Sized>(
    state: &IterateState,
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
) -> Result<IterateState, SolveError> {
    let res = con.residual(&state.x);
    let y = &state.y + &res * params.alpha;
    let g = grad_k(&state.x, &state.z, &y, obj, con, params);
    let x = set.project(&(&state.x - &g * params.c));
    let z = &state.z + (&x - &state.z) * params.beta;
    let t = state.t + 1;
    ensure_finite(&x, &y, &z, t)?;
    Ok(IterateState { x, y, z, t })
}

/// Runs the single-block method from `(x0, y0, z0)` under `stop`.
///
/// `x0` and `z0` are snapped onto the set by projection (an error if they lie farther
/// than the membership tolerance outside). The stationarity gap is evaluated every
/// iteration and drives the stop rule; trace rows appear at the recording cadence and
/// always include the final iterate.
#[allow(clippy::too_many_arguments)]
pub fn run_alm<O: Objective + ?Sized>(
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    z0: &DVector<f64>,
    stop: &StopRule,
) -> Result<RunResult, SolveError> {
    drive(obj, con, set, params, x0, y0, z0, stop, None, |state, _| {
        alm_step(state, obj, con, set, params).map(|s| (s, StepDiag::default()))
    })
}

/// [`run_alm`] that additionally stores clones of the iterate state at the requested
/// iteration indices (for offline verification of iterate-pair inequalities).
#[allow(clippy::too_many_arguments)]
pub fn run_alm_captured<O: Objective + ?Sized>(
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    z0: &DVector<f64>,
    stop: &StopRule,
    capture: &BTreeSet<u64>,
) -> Result<RunResult, SolveError> {
    drive(
        obj,
        con,
        set,
        params,
        x0,
        y0,
        z0,
        stop,
        Some(capture),
        |state, _| alm_step(state, obj, con, set, params).map(|s| (s, StepDiag::default())),
    )
}

/// Default initialization: `x0 = z0 = P_X(0)` and `y0 = 0 ∈ R^rows`.
pub fn origin_start(set: &FeasibleSet, rows: usize) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let x0 = set.project(&DVector::zeros(set.dim()));
    (x0.clone(), DVector::zeros(rows), x0)
}

/// Per-step diagnostics handed back by a stepper when the driver asks for a traced
/// step (empty for the single-block stepper).
#[derive(Debug, Clone, Default)]
pub(crate) struct StepDiag {
    /// `(block, lhs, rhs)` per-block descent certificates.
    pub block_descent: Vec<(usize, f64, f64)>,
    /// Norm of the sequential-update deviation `E(t)`.
    pub block_error: Option<f64>,
}

/// Divergence guard: each iterate norm must be finite and at most
/// [`ITERATE_NORM_CAP`].
pub(crate) fn ensure_finite(
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    t: u64,
) -> Result<(), SolveError> {
    for (var, v) in [("x", x), ("y", y), ("z", z)] {
        let norm = v.norm();
        if !(norm <= ITERATE_NORM_CAP) {
            return Err(SolveError::IterateOverflow {
                var,
                iteration: t,
                norm,
            });
        }
    }
    Ok(())
}

fn snap_start(
    set: &FeasibleSet,
    v: &DVector<f64>,
    what: &'static str,
) -> Result<DVector<f64>, SolveError> {
    let p = set.project(v);
    let dist = (v - &p).norm();
    if dist > SET_MEMBERSHIP_TOL {
        return Err(SolveError::StartOutsideSet { what, dist });
    }
    Ok(p)
}

/// Shared run loop: gap monitoring, stop rule, trace/capture recording, and descent
/// bookkeeping around an arbitrary stepper. The stepper receives `traced = true` for
/// steps that start at a recorded iteration and may return extra diagnostics for them.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<O, F>(
    obj: &O,
    con: &AffineConstraint,
    set: &FeasibleSet,
    params: &AlgoParams,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    z0: &DVector<f64>,
    stop: &StopRule,
    capture: Option<&BTreeSet<u64>>,
    mut step: F,
) -> Result<RunResult, SolveError>
where
    O: Objective + ?Sized,
    F: FnMut(&IterateState, bool) -> Result<(IterateState, StepDiag), SolveError>,
{
    params.validate(obj.grad_lipschitz(), con.sigma_max())?;
    if stop.record_every == 0 {
        return Err(SolveError::BadStopRule("record_every must be at least 1"));
    }
    let n = set.dim();
    for (got, expected) in [
        (obj.dim(), n),
        (con.cols(), n),
        (x0.len(), n),
        (z0.len(), n),
        (y0.len(), con.rows()),
    ] {
        if got != expected {
            return Err(ProblemError::DimensionMismatch { expected, got }.into());
        }
    }

    let x = snap_start(set, x0, "x0")?;
    let z = snap_start(set, z0, "z0")?;
    let mut state = IterateState {
        x,
        y: y0.clone(),
        z,
        t: 0,
    };

    let mut trace = Vec::new();
    let mut captured = Vec::new();
    let mut descent = Vec::new();
    let mut block_descent = Vec::new();
    let mut block_error = Vec::new();
    let (mut dx_last, mut dz_last) = (0.0, 0.0);
    let stopped_early;

    loop {
        let gap = stationary_gap(&state.x, &state.y, obj, con, set)?;
        let at_cadence = state.t % stop.record_every == 0;
        let done = state.t >= stop.max_iters || gap.gap <= stop.gap_tol;
        if at_cadence || done {
            let phi = if stop.compute_phi {
                Some(potential(
                    &state.x,
                    &state.y,
                    &state.z,
                    obj,
                    con,
                    set,
                    params,
                    stop.phi_tol,
                )?)
            } else {
                None
            };
            trace.push(TraceRecord {
                t: state.t,
                gap: gap.gap,
                vnorm: gap.vnorm,
                feas: gap.feas,
                dx: dx_last,
                dz: dz_last,
                phi,
            });
        }
        if let Some(wanted) = capture {
            if wanted.contains(&state.t) {
                captured.push(state.clone());
            }
        }
        if done {
            stopped_early = gap.gap <= stop.gap_tol && state.t < stop.max_iters;
            break;
        }

        let traced = at_cadence;
        let k_before = if traced {
            Some(eval_k(&state.x, &state.z, &state.y, obj, con, params))
        } else {
            None
        };
        let (next, diag) = step(&state, traced)?;
        dx_last = (&next.x - &state.x).norm();
        dz_last = (&next.z - &state.z).norm();
        if let Some(k_before) = k_before {
            let k_after = eval_k(&next.x, &next.z, &next.y, obj, con, params);
            let rhs = dx_last * dx_last / (2.0 * params.c)
                + params.p * dz_last * dz_last / (2.0 * params.beta)
                - params.alpha * gap.feas * gap.feas;
            descent.push(DescentSample {
                t: state.t,
                lhs: k_before - k_after,
                rhs,
            });
            for (block, lhs, rhs) in diag.block_descent {
                block_descent.push(BlockDescentSample {
                    t: state.t,
                    block,
                    lhs,
                    rhs,
                });
            }
            if let Some(e_norm) = diag.block_error {
                block_error.push(BlockErrorSample {
                    t: state.t,
                    e_norm,
                    dx_norm: dx_last,
                });
            }
        }
        state = next;
    }

    Ok(RunResult {
        trace,
        final_state: state,
        stopped_early,
        descent,
        block_descent,
        block_error,
        captured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_each_condition() {
        let good = AlgoParams {
            p: 3.0,
            gamma: 10.0,
            c: 1.0 / 28.0,
            alpha: 1.0 / 28.0,
            beta: 0.2,
        };
        assert!(good.validate(1.0, 1.0).is_ok());
        assert!(matches!(
            AlgoParams { p: 2.9, ..good }.validate(1.0, 1.0),
            Err(ParamError::ProxWeightTooSmall { .. })
        ));
        assert!(matches!(
            AlgoParams {
                gamma: -0.1,
                ..good
            }
            .validate(1.0, 1.0),
            Err(ParamError::NegativePenalty(_))
        ));
        assert!(matches!(
            AlgoParams { c: 1.0 / 14.0, ..good }.validate(1.0, 1.0),
            Err(ParamError::PrimalStepOutOfRange { .. })
        ));
        assert!(matches!(
            AlgoParams { alpha: 0.04, ..good }.validate(1.0, 1.0),
            Err(ParamError::DualStepOutOfRange { .. })
        ));
        assert!(matches!(
            AlgoParams { beta: 1.5, ..good }.validate(1.0, 1.0),
            Err(ParamError::InterpolationOutOfRange(_))
        ));
        assert!(matches!(
            AlgoParams { beta: 0.0, ..good }.validate(1.0, 1.0),
            Err(ParamError::InterpolationOutOfRange(_))
        ));
    }

    #[test]
    fn validate_accepts_alpha_on_the_boundary() {
        // α exactly equal to c(p−L_f)²/(4σ²) must pass (relative slack).
        let params = AlgoParams {
            p: 3.0,
            gamma: 0.0,
            c: 0.1,
            alpha: 0.1 * 4.0 / 4.0,
            beta: 1.0,
        };
        assert!(params.validate(1.0, 1.0).is_ok());
    }

    #[test]
    fn derive_builds_admissible_params() {
        let params = AlgoParams::derive(2.0, 3.0, 1.5, 0.2).unwrap();
        assert!(params.validate(2.0, 3.0).is_ok());
        assert!((params.p - 6.0).abs() < 1e-15);
    }
}
