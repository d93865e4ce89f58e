//! Benchmark instance family: random nonconvex quadratic programs over a ball.
//!
//! An instance is
//!
//! ```text
//!     minimize   f(x) = ½ xᵀQx + rᵀx
//!     subject to A x = b,   ‖x‖ ≤ ρ,
//! ```
//!
//! with `Q` symmetric (generally indefinite), `A ∈ R^{m×n}` Gaussian, and
//! `b = A x̄` for a feasible witness `x̄`, so every instance is feasible by
//! construction. Generation is a pure function of `(n, m, seed)`: the pseudo-random
//! stream is a fixed counter-based engine consumed through a fixed Box–Muller
//! recipe in a pinned draw order, so instances are reproducible across runs,
//! platforms, and thread counts. Instances round-trip through a small JSON format
//! that stores either the full matrices or just the generation triple.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alm::{AlgoParams, ParamError};
use crate::problem::{
    spectral_norm, AffineConstraint, BlockPartition, FeasibleSet, Objective, ProblemError,
    DEFAULT_SPECTRAL_TOL,
};

/// Relative tolerance (scaled by the largest entry) for accepting an explicitly
/// supplied curvature matrix as symmetric.
pub const SYMMETRY_REL_TOL: f64 = 1e-12;

/// Errors from instance generation, validation, or (de)serialization.
#[derive(Debug, Error)]
pub enum QpError {
    #[error("instance shape must have n >= 1 and m >= 1")]
    EmptyShape,
    #[error("constraint rows m = {m} must not exceed variables n = {n}")]
    TooManyRows { n: usize, m: usize },
    #[error("field `{field}` has wrong length: expected {expected}, got {got}")]
    FieldShape {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("explicit instance data must supply all of q, r, a, b, rho_ball — or none")]
    IncompleteExplicit,
    #[error("field `{0}` contains a non-finite value")]
    NonFinite(&'static str),
    #[error("ball radius must be finite and positive, got {0}")]
    BadRadius(f64),
    #[error("curvature matrix is asymmetric: max deviation {max_dev:.3e} exceeds {tol:.3e}")]
    AsymmetricQ { max_dev: f64, tol: f64 },
    #[error("witness point is invalid: {0}")]
    BadWitness(String),
    #[error("degenerate instance: {0} has zero largest singular value")]
    DegenerateScale(&'static str),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Deterministic Gaussian draw stream: a counter-based engine consumed through the
/// cosine branch of the Box–Muller transform.
///
/// Every draw recipe is pinned so the stream is a stable part of the instance
/// format: [`Self::uniform`] maps the top 53 bits of one engine word to `[0, 1)`,
/// [`Self::uniform_open0`] shifts it to `(0, 1]` (keeping the logarithm finite), and
/// [`Self::normal`] consumes exactly two engine words with no caching.
struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on `[0, 1)`: the top 53 bits of one engine word times 2⁻⁵³.
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * 2f64.powi(-53)
    }

    /// Uniform on `(0, 1]`: as [`Self::uniform`] with the mantissa shifted up by one.
    fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * 2f64.powi(-53)
    }

    /// Standard normal draw: `√(−2 ln u₁) · cos(2π u₂)` with `u₁ ∈ (0, 1]`,
    /// `u₂ ∈ [0, 1)`. Exactly two engine words per draw.
    fn normal(&mut self) -> f64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// The quadratic objective `f(x) = ½ xᵀQx + rᵀx` with its gradient Lipschitz
/// constant `σ_max(Q)` cached at construction.
#[derive(Debug, Clone)]
pub struct QpObjective {
    q: DMatrix<f64>,
    r: DVector<f64>,
    lip: f64,
}

impl QpObjective {
    /// Builds the objective and caches `σ_max(Q)` via [`spectral_norm`].
    ///
    /// # Panics
    /// Panics if `q` is not square or `r` does not match its size.
    pub fn new(q: DMatrix<f64>, r: DVector<f64>) -> Self {
        assert_eq!(q.nrows(), q.ncols(), "curvature matrix must be square");
        assert_eq!(r.len(), q.nrows(), "linear term must match matrix size");
        let lip = spectral_norm(&q, DEFAULT_SPECTRAL_TOL);
        Self { q, r, lip }
    }

    /// Curvature matrix `Q`.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Linear term `r`.
    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }
}

impl Objective for QpObjective {
    fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.r.dot(x)
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.r
    }

    fn grad_lipschitz(&self) -> f64 {
        self.lip
    }
}

/// One benchmark instance: problem data plus the generation triple and the feasible
/// witness used to manufacture the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    pub q: DMatrix<f64>,
    pub r: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub rho_ball: f64,
    pub seed: u64,
    /// Point with `A·witness = b` (bitwise, by construction) and `‖witness‖ ≤ ρ`.
    pub witness: Option<DVector<f64>>,
}

impl QpInstance {
    /// Generates the instance for `(n, m, seed)`.
    ///
    /// Draw order (part of the format): the `n²` entries of a raw matrix `Q̄`
    /// row-major, the `n` entries of `r`, the `m·n` entries of `A` row-major, one
    /// uniform for the radius `ρ = 1 + 9u`, then the `n` entries of the witness
    /// `x̄` (shrunk to norm `0.9ρ` if it lands outside the ball). Then
    /// `Q = (Q̄ + Q̄ᵀ)/2` (symmetric bitwise) and `b = A x̄` (so the witness residual
    /// is exactly zero).
    pub fn generate(n: usize, m: usize, seed: u64) -> Result<Self, QpError> {
        if n == 0 || m == 0 {
            return Err(QpError::EmptyShape);
        }
        if m > n {
            return Err(QpError::TooManyRows { n, m });
        }
        let mut stream = GaussianStream::new(seed);
        let qbar_entries: Vec<f64> = (0..n * n).map(|_| stream.normal()).collect();
        let qbar = DMatrix::from_row_slice(n, n, &qbar_entries);
        let q = (&qbar + qbar.transpose()) * 0.5;
        let r = DVector::from_vec((0..n).map(|_| stream.normal()).collect());
        let a_entries: Vec<f64> = (0..m * n).map(|_| stream.normal()).collect();
        let a = DMatrix::from_row_slice(m, n, &a_entries);
        let rho_ball = 1.0 + 9.0 * stream.uniform();
        let mut witness = DVector::from_vec((0..n).map(|_| stream.normal()).collect());
        let wnorm = witness.norm();
        if wnorm > rho_ball {
            witness *= 0.9 * rho_ball / wnorm;
        }
        let b = &a * &witness;
        Ok(Self {
            q,
            r,
            a,
            b,
            rho_ball,
            seed,
            witness: Some(witness),
        })
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    /// Number of equality constraints.
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// The objective oracle (clones the matrices, caches `σ_max(Q)`).
    pub fn objective(&self) -> QpObjective {
        QpObjective::new(self.q.clone(), self.r.clone())
    }

    /// The equality constraint (clones the matrices, caches `σ_max(A)`).
    pub fn constraint(&self) -> Result<AffineConstraint, QpError> {
        Ok(AffineConstraint::new(self.a.clone(), self.b.clone())?)
    }

    /// The feasible set `{‖x‖ ≤ ρ}`.
    pub fn ball(&self) -> FeasibleSet {
        FeasibleSet::Ball {
            center: DVector::zeros(self.n()),
            radius: self.rho_ball,
        }
    }

    /// Multi-block view of the feasible region: `blocks` contiguous near-equal
    /// coordinate blocks, each constrained to a ball of the full radius `ρ`. The
    /// product contains the original ball, and the generated witness stays feasible
    /// for it (each sub-slice of `x̄` has norm at most `‖x̄‖ ≤ ρ`).
    pub fn block_ball(&self, blocks: usize) -> Result<(FeasibleSet, BlockPartition), QpError> {
        let partition = BlockPartition::contiguous(self.n(), blocks)?;
        let children = partition
            .sizes()
            .iter()
            .map(|&s| FeasibleSet::Ball {
                center: DVector::zeros(s),
                radius: self.rho_ball,
            })
            .collect();
        Ok((FeasibleSet::product(children)?, partition))
    }

    /// Analytic lower bound on the objective over the ball:
    /// `f(x) ≥ −½σ_max(Q)ρ² − ‖r‖ρ` for all `‖x‖ ≤ ρ`.
    pub fn objective_lower_bound(&self) -> f64 {
        let sq = spectral_norm(&self.q, DEFAULT_SPECTRAL_TOL);
        -0.5 * sq * self.rho_ball * self.rho_ball - self.r.norm() * self.rho_ball
    }

    /// The benchmark's default parameter schedule, derived from the instance scales
    /// `σ_Q = σ_max(Q)` and `σ_A = σ_max(A)`:
    ///
    /// ```text
    ///     p = 3σ_Q,   γ = 10σ_Q/σ_A²,   c = 1/(2(4σ_Q + γσ_A²)),   α = cσ_Q²/σ_A².
    /// ```
    ///
    /// The result is validated before being returned; degenerate instances
    /// (`σ_Q = 0` or `σ_A = 0`) are rejected.
    pub fn default_params(&self, beta: f64) -> Result<AlgoParams, QpError> {
        let sq = spectral_norm(&self.q, DEFAULT_SPECTRAL_TOL);
        let sa = spectral_norm(&self.a, DEFAULT_SPECTRAL_TOL);
        if sq <= 0.0 {
            return Err(QpError::DegenerateScale("curvature matrix"));
        }
        if sa <= 0.0 {
            return Err(QpError::DegenerateScale("constraint matrix"));
        }
        let sa2 = sa * sa;
        let gamma = 10.0 * sq / sa2;
        let p = 3.0 * sq;
        let c = 1.0 / (2.0 * (4.0 * sq + gamma * sa2));
        let alpha = c * sq * sq / sa2;
        let params = AlgoParams {
            p,
            gamma,
            c,
            alpha,
            beta,
        };
        params.validate(sq, sa)?;
        Ok(params)
    }
}

/// On-disk form: the generation triple always, the payload either complete or absent.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    m: usize,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho_ball: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<f64>>,
}

fn mat_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Serializes an instance to the JSON format with all payload fields explicit
/// (matrices flattened row-major). Values survive the round trip bitwise.
pub fn instance_to_json(inst: &QpInstance) -> Result<String, QpError> {
    let file = InstanceFile {
        n: inst.n(),
        m: inst.m(),
        seed: inst.seed,
        q: Some(mat_row_major(&inst.q)),
        r: Some(inst.r.iter().copied().collect()),
        a: Some(mat_row_major(&inst.a)),
        b: Some(inst.b.iter().copied().collect()),
        rho_ball: Some(inst.rho_ball),
        witness: inst.witness.as_ref().map(|w| w.iter().copied().collect()),
    };
    Ok(serde_json::to_string(&file)?)
}

fn check_len(field: &'static str, values: &[f64], expected: usize) -> Result<(), QpError> {
    if values.len() != expected {
        return Err(QpError::FieldShape {
            field,
            expected,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(QpError::NonFinite(field));
    }
    Ok(())
}

fn build_explicit(file: InstanceFile) -> Result<QpInstance, QpError> {
    let InstanceFile {
        n,
        m,
        seed,
        q,
        r,
        a,
        b,
        rho_ball,
        witness,
    } = file;
    if n == 0 || m == 0 {
        return Err(QpError::EmptyShape);
    }
    if m > n {
        return Err(QpError::TooManyRows { n, m });
    }
    let (q, r, a, b) = (q.unwrap(), r.unwrap(), a.unwrap(), b.unwrap());
    let rho_ball = rho_ball.unwrap();
    check_len("q", &q, n * n)?;
    check_len("r", &r, n)?;
    check_len("a", &a, m * n)?;
    check_len("b", &b, m)?;
    if !(rho_ball.is_finite() && rho_ball > 0.0) {
        return Err(QpError::BadRadius(rho_ball));
    }
    let q = DMatrix::from_row_slice(n, n, &q);
    let scale = q.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = SYMMETRY_REL_TOL * scale;
    let max_dev = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .fold(0.0f64, |acc, (i, j)| acc.max((q[(i, j)] - q[(j, i)]).abs()));
    if max_dev > tol {
        return Err(QpError::AsymmetricQ { max_dev, tol });
    }
    let witness = match witness {
        None => None,
        Some(w) => {
            check_len("witness", &w, n)?;
            let w = DVector::from_vec(w);
            let norm = w.norm();
            if norm > rho_ball * (1.0 + 1e-9) {
                return Err(QpError::BadWitness(format!(
                    "norm {norm:.6e} exceeds ball radius {rho_ball:.6e}"
                )));
            }
            Some(w)
        }
    };
    Ok(QpInstance {
        q,
        r: DVector::from_vec(r),
        a: DMatrix::from_row_slice(m, n, &a),
        b: DVector::from_vec(b),
        rho_ball,
        seed,
        witness,
    })
}

/// Parses the JSON instance format. A file carrying the full payload is validated
/// and used as-is; a file carrying only `(n, m, seed)` is regenerated via
/// [`QpInstance::generate`]; anything in between is rejected.
pub fn instance_from_json(text: &str) -> Result<QpInstance, QpError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let payload = [
        file.q.is_some(),
        file.r.is_some(),
        file.a.is_some(),
        file.b.is_some(),
        file.rho_ball.is_some(),
    ];
    if payload.iter().all(|&present| present) {
        build_explicit(file)
    } else if payload.iter().any(|&present| present) || file.witness.is_some() {
        Err(QpError::IncompleteExplicit)
    } else {
        QpInstance::generate(file.n, file.m, file.seed)
    }
}

/// Writes the explicit JSON form of `inst` to `path` (with a trailing newline).
pub fn save_instance(inst: &QpInstance, path: &Path) -> Result<(), QpError> {
    let mut text = instance_to_json(inst)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads an instance from a JSON file written by [`save_instance`] (or hand-written
/// in either the explicit or the `(n, m, seed)` form).
pub fn load_instance(path: &Path) -> Result<QpInstance, QpError> {
    instance_from_json(&std::fs::read_to_string(path)?)
}
