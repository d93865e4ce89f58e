//! Solvers and diagnostics for linearly constrained smooth minimization over
//! projectable compact convex sets:
//!
//! ```text
//!     minimize   f(x)
//!     subject to A x = b,   x ∈ X,
//! ```
//!
//! where `f` has a Lipschitz gradient (possibly nonconvex) and `X` is a ball, a box,
//! or a product of those. The iteration is a smoothed proximal augmented Lagrangian
//! method: a dual ascent step, a projected-gradient step on the smoothed augmented
//! Lagrangian against the fresh multiplier, and an interpolation step on the proximal
//! center. A multi-block variant sweeps the primal update over coordinate blocks.
//!
//! Module map:
//!
//! - [`problem`] — objectives, affine constraints, feasible sets, block partitions.
//! - [`alm`] — parameters, the single-block step and run driver, trace records.
//! - [`admm`] — the multi-block stepper over product sets.
//! - [`diagnostics`] — stationarity gaps, certified inner solvers, the merit
//!   function, and the inequality checks that certify a run followed the theory.
//! - [`qp`] — the reproducible random-QP benchmark family.
//!
//! Everything is deterministic: solvers are seed-free, the benchmark generator is a
//! pure function of `(n, m, seed)`, and repeated runs produce bit-identical iterates.

pub mod admm;
pub mod alm;
pub mod diagnostics;
pub mod problem;
pub mod qp;
