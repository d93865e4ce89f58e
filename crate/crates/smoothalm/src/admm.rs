//! Multi-block variant: sequential per-block projected-gradient updates.
//!
//! When the feasible set is a product `X = X₁ × ⋯ × X_N`, the primal update can be
//! swept block by block instead of taken jointly. With the mixed point
//!
//! ```text
//!     x(i) = (x⁺₁, …, x⁺_{i−1}, x_i, …, x_N)
//! ```
//!
//! (blocks before `i` already updated), block `i` moves by
//!
//! ```text
//!     x⁺_i = P_{X_i}( x_i − c [∇ₓK(x(i), z; y⁺)]_i ),
//! ```
//!
//! while the dual and proximal-center updates are identical to the single-block
//! method. For `N = 1` the sweep collapses to exactly the single-block step — the
//! same arithmetic on the same values — which is pinned by test. The sequential sweep
//! deviates from a joint update only through gradient staleness; the traced stepper
//! measures that deviation (`E(t)`) along with per-block descent certificates.

use std::collections::BTreeSet;

use nalgebra::DVector;

use crate::alm::{
    drive, ensure_finite, eval_k, grad_k, AlgoParams, IterateState, RunResult, SolveError,
    StepDiag, StopRule,
};
use crate::problem::{AffineConstraint, BlockPartition, FeasibleSet, Objective};

/// A block-structured problem: objective, constraint, a product feasible set, and the
/// partition describing how coordinates map onto the product's factors.
#[derive(Debug, Clone)]
pub struct BlockProblem<O> {
    obj: O,
    con: AffineConstraint,
    set: FeasibleSet,
    partition: BlockPartition,
}

impl<O: Objective> BlockProblem<O> {
    /// Validates that the set is a product whose factors match the partition block for
    /// block, and that objective/constraint dimensions agree with it.
    pub fn new(
        obj: O,
        con: AffineConstraint,
        set: FeasibleSet,
        partition: BlockPartition,
    ) -> Result<Self, SolveError> {
        let children = set.product_children().ok_or_else(|| {
            SolveError::BadBlockProblem("feasible set must be a product of blocks".into())
        })?;
        if children.len() != partition.len() {
            return Err(SolveError::BadBlockProblem(format!(
                "set has {} factors but the partition has {} blocks",
                children.len(),
                partition.len()
            )));
        }
        for (j, child) in children.iter().enumerate() {
            if child.dim() != partition.sizes()[j] {
                return Err(SolveError::BadBlockProblem(format!(
                    "factor {j} has dimension {} but the partition block has {}",
                    child.dim(),
                    partition.sizes()[j]
                )));
            }
        }
        let n = partition.total();
        if obj.dim() != n || con.cols() != n {
            return Err(SolveError::BadBlockProblem(format!(
                "partition covers {n} coordinates but the objective has {} and the constraint {}",
                obj.dim(),
                con.cols()
            )));
        }
        Ok(Self {
            obj,
            con,
            set,
            partition,
        })
    }

    pub fn objective(&self) -> &O {
        &self.obj
    }

    pub fn constraint(&self) -> &AffineConstraint {
        &self.con
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }
}

/// The mixed point of a block sweep: blocks before `i` (1-based) come from `next`,
/// blocks from `i` on come from `prev`. `i = 1` returns `prev` unchanged.
pub fn mixed_point(
    prev: &DVector<f64>,
    next: &DVector<f64>,
    i: usize,
    partition: &BlockPartition,
) -> Result<DVector<f64>, SolveError> {
    if i == 0 || i > partition.len() {
        return Err(SolveError::BadBlockProblem(format!(
            "mixed point index {i} out of range 1..={}",
            partition.len()
        )));
    }
    if prev.len() != partition.total() || next.len() != partition.total() {
        return Err(SolveError::BadBlockProblem(format!(
            "mixed point inputs must have length {}",
            partition.total()
        )));
    }
    let mut out = prev.clone();
    for j in 0..i - 1 {
        let range = partition.range(j);
        out.rows_mut(range.start, range.len())
            .copy_from(&next.rows(range.start, range.len()));
    }
    Ok(out)
}

/// One iteration of the multi-block method.
pub fn admm_step<O: Objective>(
    state: &IterateState,
    prob: &BlockProblem<O>,
    params: &AlgoParams,
) -> Result<IterateState, SolveError> {
    admm_step_traced(state, prob, params, false).map(|(next, _)| next)
}

/// [`admm_step`] that additionally evaluates per-block descent certificates and the
/// gradient-staleness deviation `E(t)` (whose block `j` is
/// `c·([∇ₓK(x(j))]_j − [∇ₓK(x^t)]_j)`). Tracing only adds observations; the produced
/// iterate is bit-identical to the untraced step.
pub(crate) fn admm_step_traced<O: Objective>(
    state: &IterateState,
    prob: &BlockProblem<O>,
    params: &AlgoParams,
    traced: bool,
) -> Result<(IterateState, StepDiag), SolveError> {
    let obj = &prob.obj;
    let con = &prob.con;
    let partition = &prob.partition;
    let children = prob
        .set
        .product_children()
        .expect("BlockProblem::new enforces a product set");

    let res = con.residual(&state.x);
    let y = &state.y + &res * params.alpha;

    let mut xt = state.x.clone();
    let mut diag = StepDiag::default();
    let fresh_grad = if traced {
        Some(grad_k(&state.x, &state.z, &y, obj, con, params))
    } else {
        None
    };
    let mut staleness = fresh_grad.as_ref().map(|_| DVector::zeros(xt.len()));

    for (j, child) in children.iter().enumerate() {
        let range = partition.range(j);
        let (off, len) = (range.start, range.len());
        let k_before = if traced {
            Some(eval_k(&xt, &state.z, &y, obj, con, params))
        } else {
            None
        };
        // Full gradient at the current mixed point; the block update consumes its slice.
        let g = grad_k(&xt, &state.z, &y, obj, con, params);
        if let (Some(e), Some(fresh)) = (&mut staleness, &fresh_grad) {
            for idx in range.clone() {
                e[idx] = params.c * (g[idx] - fresh[idx]);
            }
        }
        let xj = xt.rows(off, len).clone_owned();
        let moved = child.project(&(&xj - &g.rows(off, len) * params.c));
        xt.rows_mut(off, len).copy_from(&moved);
        if let Some(k_before) = k_before {
            let k_after = eval_k(&xt, &state.z, &y, obj, con, params);
            let dxj = (&moved - &xj).norm();
            diag.block_descent
                .push((j, k_before - k_after, dxj * dxj / (2.0 * params.c)));
        }
    }

    diag.block_error = staleness.map(|e| e.norm());
    let z = &state.z + (&xt - &state.z) * params.beta;
    let t = state.t + 1;
    ensure_finite(&xt, &y, &z, t)?;
    Ok((
        IterateState {
            x: xt,
            y,
            z,
            t,
        },
        diag,
    ))
}

/// Runs the multi-block method; the driver contract (snapping, gap monitoring, stop
/// rule, recording) matches [`crate::alm::run_alm`]. Traced steps additionally fill
/// `block_descent` and `block_error` in the result.
#[allow(clippy::too_many_arguments)]
pub fn run_admm<O: Objective>(
    prob: &BlockProblem<O>,
    params: &AlgoParams,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    z0: &DVector<f64>,
    stop: &StopRule,
) -> Result<RunResult, SolveError> {
    drive(
        &prob.obj,
        &prob.con,
        &prob.set,
        params,
        x0,
        y0,
        z0,
        stop,
        None,
        |state, traced| admm_step_traced(state, prob, params, traced),
    )
}

/// [`run_admm`] that additionally stores clones of the iterate state at the requested
/// iteration indices.
#[allow(clippy::too_many_arguments)]
pub fn run_admm_captured<O: Objective>(
    prob: &BlockProblem<O>,
    params: &AlgoParams,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    z0: &DVector<f64>,
    stop: &StopRule,
    capture: &BTreeSet<u64>,
) -> Result<RunResult, SolveError> {
    drive(
        &prob.obj,
        &prob.con,
        &prob.set,
        params,
        x0,
        y0,
        z0,
        stop,
        Some(capture),
        |state, traced| admm_step_traced(state, prob, params, traced),
    )
}
