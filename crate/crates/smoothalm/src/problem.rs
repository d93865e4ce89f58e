//! Problem building blocks: objective oracles, affine equality constraints,
//! projectable feasible sets, and block partitions.
//!
//! The solvers in this crate address problems of the form
//!
//! ```text
//!     minimize   f(x)
//!     subject to A x = b,   x ∈ X,
//! ```
//!
//! where `f` has a Lipschitz gradient and `X` is a compact convex set that is cheap to
//! project onto. This module supplies each piece of that description: [`Objective`] for
//! `f`, [`AffineConstraint`] for `(A, b)`, [`FeasibleSet`] for `X`, and
//! [`BlockPartition`] for carving coordinates into blocks for the multi-block solver.
//! It also provides [`spectral_norm`], the power-iteration estimate of the largest
//! singular value that the step-size rules depend on.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Absolute tolerance for "is this point in the set" decisions (membership snapping,
/// start-point validation, feasibility monitoring).
pub const SET_MEMBERSHIP_TOL: f64 = 1e-9;

/// Relative tolerance used to classify a coordinate (or radius) as sitting on the
/// boundary of its set. Scaled by `max(1, |bound|)` so that unit-scale and
/// large-scale sets behave alike.
const BOUNDARY_TOL: f64 = 1e-9;

/// Default relative tolerance for [`spectral_norm`].
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;

/// Iteration cap for [`spectral_norm`].
const SPECTRAL_MAX_SWEEPS: usize = 10_000;

/// Power iteration ignores the convergence test for this many sweeps so that an
/// accidentally well-aligned start vector cannot trigger a premature stop.
const SPECTRAL_WARMUP_SWEEPS: usize = 3;

/// Errors produced while assembling or querying problem data.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point lies {dist:.3e} outside the feasible set (tolerance {tol:.1e})")]
    PointOutsideSet { dist: f64, tol: f64 },
    #[error("invalid feasible set: {0}")]
    InvalidSet(String),
    #[error("invalid block partition: {0}")]
    InvalidPartition(String),
}

/// A smooth objective `f` with Lipschitz-continuous gradient.
///
/// Implementations must report a constant `L` with
/// `‖∇f(x) − ∇f(x')‖ ≤ L·‖x − x'‖` for all `x, x'` in the feasible set; the step-size
/// and smoothing rules of the solvers are derived from it. Any upper bound is sound,
/// but looser bounds mean smaller steps.
pub trait Objective {
    /// Ambient dimension of the variable.
    fn dim(&self) -> usize;

    /// Objective value `f(x)`.
    fn eval(&self, x: &DVector<f64>) -> f64;

    /// Gradient `∇f(x)`.
    fn grad(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Lipschitz constant of `∇f` (an upper bound is acceptable).
    fn grad_lipschitz(&self) -> f64;
}

/// The affine equality constraint `A x = b`, with the largest singular value of `A`
/// cached at construction (it appears in every step-size bound).
#[derive(Debug, Clone)]
pub struct AffineConstraint {
    a: DMatrix<f64>,
    b: DVector<f64>,
    sigma_max: f64,
}

impl AffineConstraint {
    /// Builds the constraint and caches `σ_max(A)` via [`spectral_norm`] at
    /// [`DEFAULT_SPECTRAL_TOL`].
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, ProblemError> {
        if b.len() != a.nrows() {
            return Err(ProblemError::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let sigma_max = spectral_norm(&a, DEFAULT_SPECTRAL_TOL);
        Ok(Self { a, b, sigma_max })
    }

    /// Constraint matrix `A`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Right-hand side `b`.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Cached largest singular value of `A`.
    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Number of constraint rows (`m`).
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Number of variables (`n`).
    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// Constraint residual `A x − b`.
    ///
    /// # Panics
    /// Panics if `x.len() != self.cols()`.
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
}

/// A compact convex set with a cheap exact projection.
///
/// The enum is deliberately small: Euclidean balls, axis-aligned boxes, and finite
/// products of those. Products are what the multi-block solver steps over; the block
/// layout of a product is the concatenation of its children in order.
///
/// Invariants (enforced by the constructors): ball radii are finite and nonnegative,
/// box bounds are finite with `lo ≤ hi` elementwise, products are nonempty.
#[derive(Debug, Clone)]
pub enum FeasibleSet {
    /// `{ x : ‖x − center‖ ≤ radius }`.
    Ball { center: DVector<f64>, radius: f64 },
    /// `{ x : lo ≤ x ≤ hi }` elementwise.
    Box { lo: DVector<f64>, hi: DVector<f64> },
    /// Cartesian product of the children, concatenated in order.
    Product(Vec<FeasibleSet>),
}

impl FeasibleSet {
    /// Ball of the given center and radius.
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self, ProblemError> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(ProblemError::InvalidSet(format!(
                "ball radius must be finite and nonnegative, got {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(ProblemError::InvalidSet("ball center must be finite".into()));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    /// Ball of the given radius centered at the origin of `R^n`.
    pub fn origin_ball(n: usize, radius: f64) -> Result<Self, ProblemError> {
        Self::ball(DVector::zeros(n), radius)
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn bounds(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self, ProblemError> {
        if lo.len() != hi.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for i in 0..lo.len() {
            if !lo[i].is_finite() || !hi[i].is_finite() || lo[i] > hi[i] {
                return Err(ProblemError::InvalidSet(format!(
                    "box bounds must be finite with lo <= hi, got [{}, {}] at index {i}",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(FeasibleSet::Box { lo, hi })
    }

    /// Cartesian product of `children` (in order).
    pub fn product(children: Vec<FeasibleSet>) -> Result<Self, ProblemError> {
        if children.is_empty() {
            return Err(ProblemError::InvalidSet("product of zero sets".into()));
        }
        Ok(FeasibleSet::Product(children))
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Box { lo, .. } => lo.len(),
            FeasibleSet::Product(children) => children.iter().map(FeasibleSet::dim).sum(),
        }
    }

    /// Children of a product set, or `None` for atomic sets.
    pub fn product_children(&self) -> Option<&[FeasibleSet]> {
        match self {
            FeasibleSet::Product(children) => Some(children),
            _ => None,
        }
    }

    /// Euclidean projection onto the set. Exact for every variant; points already in
    /// the set are returned unchanged (bitwise).
    ///
    /// # Panics
    /// Panics if `v.len() != self.dim()`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.dim(), "projection input has wrong dimension");
        match self {
            FeasibleSet::Ball { center, radius } => {
                let d = v - center;
                let dist = d.norm();
                if dist <= *radius {
                    v.clone()
                } else {
                    center + d * (*radius / dist)
                }
            }
            FeasibleSet::Box { lo, hi } => {
                DVector::from_fn(lo.len(), |i, _| v[i].clamp(lo[i], hi[i]))
            }
            FeasibleSet::Product(children) => {
                let mut out = DVector::zeros(v.len());
                let mut offset = 0;
                for child in children {
                    let len = child.dim();
                    let block = child.project(&v.rows(offset, len).clone_owned());
                    out.rows_mut(offset, len).copy_from(&block);
                    offset += len;
                }
                out
            }
        }
    }

    /// Distance from `v` to the set.
    pub fn distance(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }

    /// Whether `v` lies in the set up to the absolute tolerance `tol`.
    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        self.distance(v) <= tol
    }

    /// Minimum-norm residual over the normal cone: returns
    /// `v = g + u*` where `u* = argmin_{u ∈ N_X(x)} ‖g + u‖` and `N_X(x)` is the normal
    /// cone of the set at `x`. `‖v‖ = 0` exactly when `−g ∈ N_X(x)`, i.e. when `x` is a
    /// stationary point of the linear model `⟨g, ·⟩` over the set, so this is the
    /// stationarity residual used throughout the diagnostics.
    ///
    /// `x` is first snapped onto the set by projection; if it lies farther than
    /// [`SET_MEMBERSHIP_TOL`] outside, an error is returned. Boundary membership is
    /// decided with a relative tolerance of `1e−9` so that points placed on the
    /// boundary by a prior projection are classified correctly.
    pub fn normal_cone_min_norm(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ProblemError> {
        if x.len() != self.dim() || g.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                got: if x.len() != self.dim() { x.len() } else { g.len() },
            });
        }
        let snapped = self.project(x);
        let drift = (x - &snapped).norm();
        if drift > SET_MEMBERSHIP_TOL {
            return Err(ProblemError::PointOutsideSet {
                dist: drift,
                tol: SET_MEMBERSHIP_TOL,
            });
        }
        Ok(self.min_norm_residual(&snapped, g))
    }

    /// Core of [`Self::normal_cone_min_norm`]; assumes `x` is already in the set.
    fn min_norm_residual(&self, x: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        match self {
            FeasibleSet::Ball { center, radius } => {
                if *radius == 0.0 {
                    // Singleton: the normal cone is all of R^n, so g can be cancelled.
                    return DVector::zeros(x.len());
                }
                let w = x - center;
                let dist = w.norm();
                if dist < *radius - BOUNDARY_TOL * radius.max(1.0) {
                    // Interior point: the normal cone is {0}.
                    g.clone()
                } else {
                    // Boundary: N = {τ·w : τ ≥ 0}; minimizing ‖g + τw‖ over τ ≥ 0
                    // gives τ* = max(0, −⟨g, w⟩/‖w‖²).
                    let tau = (-(g.dot(&w)) / (dist * dist)).max(0.0);
                    g + w * tau
                }
            }
            FeasibleSet::Box { lo, hi } => DVector::from_fn(lo.len(), |i, _| {
                let at_lo = x[i] - lo[i] <= BOUNDARY_TOL * lo[i].abs().max(1.0);
                let at_hi = hi[i] - x[i] <= BOUNDARY_TOL * hi[i].abs().max(1.0);
                match (at_lo, at_hi) {
                    // Pinned coordinate: normals span both signs, g_i can be cancelled.
                    (true, true) => 0.0,
                    // At the upper face normals point up (u_i ≥ 0): only negative g_i
                    // can be cancelled.
                    (false, true) => g[i].max(0.0),
                    // At the lower face normals point down (u_i ≤ 0).
                    (true, false) => g[i].min(0.0),
                    (false, false) => g[i],
                }
            }),
            FeasibleSet::Product(children) => {
                let mut out = DVector::zeros(x.len());
                let mut offset = 0;
                for child in children {
                    let len = child.dim();
                    let block = child.min_norm_residual(
                        &x.rows(offset, len).clone_owned(),
                        &g.rows(offset, len).clone_owned(),
                    );
                    out.rows_mut(offset, len).copy_from(&block);
                    offset += len;
                }
                out
            }
        }
    }
}

/// A partition of `{0, …, n−1}` into contiguous, nonempty blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    /// Partition with the given block sizes (all must be positive).
    pub fn new(sizes: Vec<usize>) -> Result<Self, ProblemError> {
        if sizes.is_empty() {
            return Err(ProblemError::InvalidPartition("no blocks".into()));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(ProblemError::InvalidPartition("empty block".into()));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Self { sizes, offsets })
    }

    /// Near-equal split of `n` coordinates into `blocks` contiguous blocks; the first
    /// `n mod blocks` blocks are one element longer.
    pub fn contiguous(n: usize, blocks: usize) -> Result<Self, ProblemError> {
        if blocks == 0 || blocks > n {
            return Err(ProblemError::InvalidPartition(format!(
                "cannot split {n} coordinates into {blocks} nonempty blocks"
            )));
        }
        let base = n / blocks;
        let extra = n % blocks;
        Self::new(
            (0..blocks)
                .map(|j| if j < extra { base + 1 } else { base })
                .collect(),
        )
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    /// True when the partition has no blocks (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Total number of coordinates covered.
    pub fn total(&self) -> usize {
        self.offsets.last().copied().unwrap_or(0) + self.sizes.last().copied().unwrap_or(0)
    }

    /// Block sizes in order.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Index range of block `j` (0-based).
    ///
    /// # Panics
    /// Panics if `j >= self.len()`.
    pub fn range(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j] + self.sizes[j]
    }
}

/// Largest singular value of `m`, estimated by power iteration on `MᵀM`.
///
/// The start vector is a fixed pseudo-random unit vector, so repeated calls on the
/// same matrix are bit-identical. Iteration stops when the estimate's relative change
/// per sweep drops below `tol` (after a short warm-up), or after 10 000 sweeps.
/// Returns exactly `0.0` for empty and all-zero matrices.
pub fn spectral_norm(m: &DMatrix<f64>, tol: f64) -> f64 {
    spectral_norm_with_witness(m, tol).0
}

/// Like [`spectral_norm`], additionally returning the (approximate) top right-singular
/// vector `v`, which witnesses the estimate: `‖M v‖ ≈ σ_max(M)` with `‖v‖ = 1`.
pub fn spectral_norm_with_witness(m: &DMatrix<f64>, tol: f64) -> (f64, DVector<f64>) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (0.0, DVector::zeros(cols));
    }
    let mut v = fixed_unit_start(cols);
    let mut sigma = (m * &v).norm();
    for sweep in 0..SPECTRAL_MAX_SWEEPS {
        let w = m.tr_mul(&(m * &v));
        let wn = w.norm();
        if wn == 0.0 {
            // v has no component along any nonzero singular direction, which for a
            // pseudo-random start means the matrix is zero.
            return (0.0, v);
        }
        v = w / wn;
        let next = (m * &v).norm();
        let settled = (next - sigma).abs() <= tol * next.max(f64::MIN_POSITIVE);
        sigma = next;
        if sweep >= SPECTRAL_WARMUP_SWEEPS && settled {
            break;
        }
    }
    (sigma, v)
}

/// Deterministic pseudo-random unit vector used to start power iteration.
fn fixed_unit_start(n: usize) -> DVector<f64> {
    let mut state: u64 = 0x5EED_5CA1_E0FF_5E7; // fixed: calls must be reproducible
    let mut v = DVector::from_fn(n, |_, _| {
        // Map the top 53 bits to [−1, 1).
        (splitmix64(&mut state) >> 11) as f64 * (2.0 / 9_007_199_254_740_992.0) - 1.0
    });
    let norm = v.norm();
    if norm == 0.0 {
        v[0] = 1.0;
        return v;
    }
    v / norm
}

/// SplitMix64 step; used only to seed power iteration deterministically.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
