//! Subcommand implementations. Each is a pure function of the configuration and the
//! files under its output directory, so the binary and the test suites drive the
//! exact same code paths.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smoothalm::alm::{
    origin_start, run_alm, run_alm_captured, IterateState, RunResult, StopRule, TraceRecord,
};
use smoothalm::admm::{run_admm, run_admm_captured, BlockProblem};
use smoothalm::diagnostics::{
    admm_gradient_drift_bound, block_check_results, check_iteration_pair, descent_check_results,
    CheckResult, DualRatioSample, ErrorBoundConstants, CHECK_BLOCK_DESCENT,
    CHECK_BLOCK_ERROR_BOUND, CHECK_EB_DUAL_SHIFT, CHECK_EB_NEXT_TO_MINIMIZER,
    CHECK_EB_PREV_TO_MINIMIZER, CHECK_EB_PROX_SHIFT, CHECK_EB_Z_SHIFT, CHECK_PRIMAL_DESCENT,
    CHECK_SUFFICIENT_DECREASE, DEFAULT_INNER_TOL,
};
use smoothalm::problem::Objective;
use smoothalm::qp::{load_instance, save_instance, QpInstance};

use crate::config::{AlgoChoice, ExperimentConfig};
use crate::stats::{loglog_slope, nearest_rank_quantile};
use crate::trace::{fmt_float, read_trace, write_trace};

/// Default number of iteration pairs the verifier samples per run.
pub const VERIFY_SAMPLES: usize = 100;

/// Instance file for one trial.
pub fn instance_path(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("instance_{trial:03}.json"))
}

/// Trace file for one (trial, β) run.
pub fn trace_path(dir: &Path, trial: usize, beta: f64) -> PathBuf {
    dir.join(format!("trace_t{trial:03}_b{beta}.csv"))
}

/// Verification report location.
pub fn verify_report_path(dir: &Path) -> PathBuf {
    dir.join("verify_report.json")
}

/// Builds the rayon pool for trial-level parallelism; `SMOOTHALM_THREADS` caps the
/// worker count (unset or 0 means rayon's default).
fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("SMOOTHALM_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .with_context(|| format!("SMOOTHALM_THREADS must be an integer, got {v:?}"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")
}

fn stop_rule(cfg: &ExperimentConfig) -> StopRule {
    StopRule {
        max_iters: cfg.max_iters,
        gap_tol: cfg.gap_tol,
        record_every: cfg.record_every,
        compute_phi: cfg.compute_phi,
        phi_tol: DEFAULT_INNER_TOL,
    }
}

/// Generates the instance files for every trial (seed `seeds + k` for trial `k`)
/// and returns their paths. Rerunning overwrites with identical bytes.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.output)
        .with_context(|| format!("creating {}", cfg.output.display()))?;
    let mut paths = Vec::with_capacity(cfg.trials);
    for k in 0..cfg.trials {
        let inst = QpInstance::generate(cfg.n, cfg.m, cfg.seeds + k as u64)?;
        let path = instance_path(&cfg.output, k);
        save_instance(&inst, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

fn load_trial_instances(cfg: &ExperimentConfig) -> Result<Vec<QpInstance>> {
    (0..cfg.trials)
        .map(|k| {
            let path = instance_path(&cfg.output, k);
            load_instance(&path).with_context(|| {
                format!("{} (run `gen` first?)", path.display())
            })
        })
        .collect()
}

/// Runs one instance with the configured algorithm, optionally capturing states at
/// the given iteration indices.
pub fn execute_run(
    inst: &QpInstance,
    algo: &AlgoChoice,
    beta: f64,
    stop: &StopRule,
    capture: Option<&BTreeSet<u64>>,
) -> Result<RunResult> {
    let params = inst.default_params(beta)?;
    let obj = inst.objective();
    let con = inst.constraint()?;
    let result = match algo {
        AlgoChoice::Alm => {
            let set = inst.ball();
            let (x0, y0, z0) = origin_start(&set, con.rows());
            match capture {
                None => run_alm(&obj, &con, &set, &params, &x0, &y0, &z0, stop)?,
                Some(c) => {
                    run_alm_captured(&obj, &con, &set, &params, &x0, &y0, &z0, stop, c)?
                }
            }
        }
        AlgoChoice::Admm { blocks } => {
            let (set, partition) = inst.block_ball(*blocks)?;
            let (x0, y0, z0) = origin_start(&set, con.rows());
            let prob = BlockProblem::new(obj, con, set, partition)?;
            match capture {
                None => run_admm(&prob, &params, &x0, &y0, &z0, stop)?,
                Some(c) => run_admm_captured(&prob, &params, &x0, &y0, &z0, stop, c)?,
            }
        }
    };
    Ok(result)
}

/// One completed (trial, β) run with its persisted trace.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub trial: usize,
    pub beta: f64,
    pub path: PathBuf,
    pub result: RunResult,
}

/// Runs the full sweep (every trial × every β), writes one trace CSV per run, and
/// returns the artifacts sorted by (trial, β).
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Vec<RunArtifact>> {
    let instances = load_trial_instances(cfg)?;
    let stop = stop_rule(cfg);
    let tasks: Vec<(usize, f64)> = (0..cfg.trials)
        .flat_map(|k| cfg.betas.iter().map(move |&b| (k, b)))
        .collect();
    let pool = thread_pool()?;
    let mut artifacts = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(trial, beta)| -> Result<RunArtifact> {
                let result = execute_run(&instances[trial], &cfg.algo, beta, &stop, None)?;
                let path = trace_path(&cfg.output, trial, beta);
                write_trace(&path, &result.trace)?;
                Ok(RunArtifact {
                    trial,
                    beta,
                    path,
                    result,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    artifacts.sort_by(|a, b| {
        a.trial
            .cmp(&b.trial)
            .then(a.beta.partial_cmp(&b.beta).expect("finite betas"))
    });
    Ok(artifacts)
}

/// Pass-rate summary of one check name within one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckAggregate {
    pub name: String,
    pub samples: usize,
    pub passes: usize,
    /// `1.0` when there were no samples (vacuous pass).
    pub pass_rate: f64,
    /// Smallest slack-adjusted margin seen; `null` without samples.
    pub worst_margin: Option<f64>,
}

/// Verification results for one (trial, β) run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunVerification {
    pub trial: usize,
    pub beta: f64,
    /// Iterations the run actually performed.
    pub iterations: u64,
    pub aggregates: Vec<CheckAggregate>,
    pub checks: Vec<CheckResult>,
    pub dual_ratios: Vec<DualRatioSample>,
    /// Inner-solver failures, recorded per sampled pair instead of aborting.
    pub errors: Vec<String>,
}

/// The full verification report; serialized to `verify_report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub tol: f64,
    pub samples_per_run: usize,
    pub runs: Vec<RunVerification>,
}

/// Evenly spaced pair starts `{t, t+1}` over a horizon of `t_end` steps; empty when
/// the run never stepped.
fn sample_pairs(t_end: u64, samples: usize) -> Vec<u64> {
    if t_end == 0 || samples == 0 {
        return Vec::new();
    }
    let s = (samples as u64).min(t_end);
    let set: BTreeSet<u64> = if s == 1 {
        [0].into()
    } else {
        (0..s).map(|j| j * (t_end - 1) / (s - 1)).collect()
    };
    set.into_iter().collect()
}

fn find_state(run: &RunResult, t: u64) -> Option<&IterateState> {
    run.captured.iter().find(|s| s.t == t)
}

fn aggregate_checks(names: &[&str], checks: &[CheckResult]) -> Vec<CheckAggregate> {
    let mut order: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    for c in checks {
        if !order.iter().any(|n| n == &c.name) {
            order.push(c.name.clone());
        }
    }
    let mut table: BTreeMap<&str, (usize, usize, Option<f64>)> = BTreeMap::new();
    for c in checks {
        let entry = table.entry(c.name.as_str()).or_insert((0, 0, None));
        entry.0 += 1;
        entry.1 += c.pass as usize;
        entry.2 = Some(entry.2.map_or(c.margin, |w: f64| w.min(c.margin)));
    }
    order
        .iter()
        .map(|name| {
            let (samples, passes, worst_margin) =
                table.get(name.as_str()).copied().unwrap_or((0, 0, None));
            CheckAggregate {
                name: name.clone(),
                samples,
                passes,
                pass_rate: if samples == 0 {
                    1.0
                } else {
                    passes as f64 / samples as f64
                },
                worst_margin,
            }
        })
        .collect()
}

fn verify_one(
    inst: &QpInstance,
    cfg: &ExperimentConfig,
    trial: usize,
    beta: f64,
    tol: f64,
) -> Result<RunVerification> {
    // Pass 1 learns the horizon (early stop may shorten it); pass 2 replays the
    // identical trajectory capturing the sampled pairs.
    let mut stop = stop_rule(cfg);
    stop.compute_phi = false;
    stop.record_every = (cfg.max_iters / VERIFY_SAMPLES as u64).max(1);
    let first = execute_run(inst, &cfg.algo, beta, &stop, None)?;
    let t_end = first.final_state.t;
    let pair_starts = sample_pairs(t_end, VERIFY_SAMPLES);
    let capture: BTreeSet<u64> = pair_starts.iter().flat_map(|&t| [t, t + 1]).collect();
    let rerun = execute_run(inst, &cfg.algo, beta, &stop, Some(&capture))?;

    let params = inst.default_params(beta)?;
    let obj = inst.objective();
    let con = inst.constraint()?;
    let lf = obj.grad_lipschitz();
    let sigma_a = con.sigma_max();
    let (set, consts) = match cfg.algo {
        AlgoChoice::Alm => (inst.ball(), ErrorBoundConstants::new(&params, lf, sigma_a)),
        AlgoChoice::Admm { blocks } => {
            let (set, _) = inst.block_ball(blocks)?;
            (set, ErrorBoundConstants::for_admm(&params, lf, sigma_a, blocks))
        }
    };

    let mut checks = Vec::new();
    let mut dual_ratios = Vec::new();
    let mut errors = Vec::new();
    for &t in &pair_starts {
        let (Some(prev), Some(next)) = (find_state(&rerun, t), find_state(&rerun, t + 1))
        else {
            errors.push(format!("pair {t}: states not captured"));
            continue;
        };
        match check_iteration_pair(prev, next, &obj, &con, &set, &params, &consts, tol) {
            Ok(report) => {
                checks.extend(report.checks);
                dual_ratios.push(report.dual_ratio);
            }
            Err(e) => errors.push(format!("pair {t}: {e}")),
        }
    }
    checks.extend(descent_check_results(&rerun));
    let mut names = vec![
        CHECK_SUFFICIENT_DECREASE,
        CHECK_EB_PREV_TO_MINIMIZER,
        CHECK_EB_NEXT_TO_MINIMIZER,
        CHECK_EB_DUAL_SHIFT,
        CHECK_EB_Z_SHIFT,
        CHECK_EB_PROX_SHIFT,
        CHECK_PRIMAL_DESCENT,
    ];
    if let AlgoChoice::Admm { blocks } = cfg.algo {
        let eta = admm_gradient_drift_bound(&params, lf, sigma_a, blocks);
        checks.extend(block_check_results(&rerun, eta));
        names.push(CHECK_BLOCK_DESCENT);
        names.push(CHECK_BLOCK_ERROR_BOUND);
    }
    Ok(RunVerification {
        trial,
        beta,
        iterations: t_end,
        aggregates: aggregate_checks(&names, &checks),
        checks,
        dual_ratios,
        errors,
    })
}

/// Reruns every (trial, β) trajectory, checks the inequality suite on sampled
/// iteration pairs plus the recorded per-step certificates, writes
/// `verify_report.json`, and returns the report.
pub fn cmd_verify(cfg: &ExperimentConfig, tol: f64) -> Result<VerifyReport> {
    let instances = load_trial_instances(cfg)?;
    let tasks: Vec<(usize, f64)> = (0..cfg.trials)
        .flat_map(|k| cfg.betas.iter().map(move |&b| (k, b)))
        .collect();
    let pool = thread_pool()?;
    let mut runs = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(trial, beta)| verify_one(&instances[trial], cfg, trial, beta, tol))
            .collect::<Result<Vec<_>>>()
    })?;
    runs.sort_by(|a, b| {
        a.trial
            .cmp(&b.trial)
            .then(a.beta.partial_cmp(&b.beta).expect("finite betas"))
    });
    let report = VerifyReport {
        tol,
        samples_per_run: VERIFY_SAMPLES,
        runs,
    };
    let path = verify_report_path(&cfg.output);
    fs::write(&path, serde_json::to_string_pretty(&report).expect("serializable"))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(report)
}

/// Header of `summary.csv`.
pub const SUMMARY_HEADER: &str = "beta,t,q25,median,q75";
/// Header of `slopes.csv`.
pub const SLOPES_HEADER: &str = "beta,slope,t_lo,t_hi,points";

/// Quantile curve point: spread of the running-minimum gap across trials at one
/// recorded iteration.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    /// β as spelled in the trace filenames (kept textual for exact grouping).
    pub beta: String,
    pub t: u64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

/// Log–log convergence-rate fit for one β.
#[derive(Debug, Clone)]
pub struct SlopeRow {
    pub beta: String,
    /// `None` when fewer than two usable points fell inside the window.
    pub slope: Option<f64>,
    pub t_lo: f64,
    pub t_hi: f64,
    pub points: usize,
}

/// Summarizer output: the parsed rows plus where they were written.
#[derive(Debug, Clone)]
pub struct SummaryTable {
    pub summary_path: PathBuf,
    pub slopes_path: PathBuf,
    pub summary_rows: Vec<SummaryRow>,
    pub slope_rows: Vec<SlopeRow>,
}

/// Running-minimum gap of one trace evaluated on a shared iteration grid by
/// carrying the last recorded value forward.
fn running_min_on_grid(rows: &[TraceRecord], grid: &[u64]) -> Vec<f64> {
    let mut run_min = Vec::with_capacity(rows.len());
    let mut best = f64::INFINITY;
    for r in rows {
        best = best.min(r.gap);
        run_min.push(best);
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut idx = 0usize;
    for &t in grid {
        while idx + 1 < rows.len() && rows[idx + 1].t <= t {
            idx += 1;
        }
        out.push(run_min[idx]);
    }
    out
}

/// Reads every trace under `dir`, groups them by the β spelled in the filename,
/// writes per-β quantile curves of the running-minimum gap (`summary.csv`) and
/// log–log slope fits of the median curve over `window` (`slopes.csv`).
pub fn cmd_summarize(dir: &Path, window: (f64, f64)) -> Result<SummaryTable> {
    let (t_lo, t_hi) = window;
    if !(t_lo > 0.0 && t_hi > t_lo) {
        bail!("slope window must satisfy 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]");
    }
    let mut names: Vec<String> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with("trace_t") && n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut groups: BTreeMap<String, Vec<Vec<TraceRecord>>> = BTreeMap::new();
    for name in &names {
        let Some(beta) = name
            .rfind("_b")
            .map(|i| name[i + 2..name.len() - ".csv".len()].to_string())
        else {
            continue;
        };
        let rows = read_trace(&dir.join(name))?;
        if rows.is_empty() {
            bail!("{name}: empty trace");
        }
        groups.entry(beta).or_default().push(rows);
    }
    if groups.is_empty() {
        bail!("no trace files found in {}", dir.display());
    }
    let mut keys: Vec<String> = groups.keys().cloned().collect();
    keys.sort_by(|a, b| {
        let (fa, fb) = (a.parse::<f64>(), b.parse::<f64>());
        match (fa, fb) {
            (Ok(x), Ok(y)) => x.partial_cmp(&y).expect("finite betas"),
            _ => a.cmp(b),
        }
    });

    let mut summary_rows = Vec::new();
    let mut slope_rows = Vec::new();
    for beta in keys {
        let traces = &groups[&beta];
        let grid: Vec<u64> = traces
            .iter()
            .flat_map(|rows| rows.iter().map(|r| r.t))
            .collect::<BTreeSet<u64>>()
            .into_iter()
            .collect();
        let per_trace: Vec<Vec<f64>> =
            traces.iter().map(|rows| running_min_on_grid(rows, &grid)).collect();
        let mut medians: Vec<(u64, f64)> = Vec::with_capacity(grid.len());
        for (gi, &t) in grid.iter().enumerate() {
            let values: Vec<f64> = per_trace.iter().map(|v| v[gi]).collect();
            let row = SummaryRow {
                beta: beta.clone(),
                t,
                q25: nearest_rank_quantile(&values, 0.25),
                median: nearest_rank_quantile(&values, 0.5),
                q75: nearest_rank_quantile(&values, 0.75),
            };
            medians.push((t, row.median));
            summary_rows.push(row);
        }
        let points: Vec<(f64, f64)> = medians
            .iter()
            .filter(|(t, _)| (*t as f64) >= t_lo && (*t as f64) <= t_hi)
            .map(|&(t, m)| (t as f64, m))
            .collect();
        slope_rows.push(SlopeRow {
            beta,
            slope: loglog_slope(&points),
            t_lo,
            t_hi,
            points: points.len(),
        });
    }

    let mut summary_text = String::from(SUMMARY_HEADER);
    summary_text.push('\n');
    for r in &summary_rows {
        summary_text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.beta,
            r.t,
            fmt_float(r.q25),
            fmt_float(r.median),
            fmt_float(r.q75)
        ));
    }
    let mut slopes_text = String::from(SLOPES_HEADER);
    slopes_text.push('\n');
    for r in &slope_rows {
        slopes_text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.beta,
            r.slope.map(fmt_float).unwrap_or_default(),
            fmt_float(r.t_lo),
            fmt_float(r.t_hi),
            r.points
        ));
    }
    let summary_path = dir.join("summary.csv");
    let slopes_path = dir.join("slopes.csv");
    fs::write(&summary_path, summary_text)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    fs::write(&slopes_path, slopes_text)
        .with_context(|| format!("writing {}", slopes_path.display()))?;
    Ok(SummaryTable {
        summary_path,
        slopes_path,
        summary_rows,
        slope_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_sampling_covers_the_horizon_without_duplicates() {
        assert!(sample_pairs(0, 100).is_empty());
        assert_eq!(sample_pairs(1, 100), vec![0]);
        assert_eq!(sample_pairs(5, 100), vec![0, 1, 2, 3, 4]);
        let s = sample_pairs(20_000, 100);
        assert_eq!(s.len(), 100);
        assert_eq!(*s.first().unwrap(), 0);
        assert_eq!(*s.last().unwrap(), 19_999);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn artifact_paths_are_zero_padded_and_beta_tagged() {
        let dir = Path::new("/tmp/x");
        assert_eq!(
            instance_path(dir, 7),
            PathBuf::from("/tmp/x/instance_007.json")
        );
        assert_eq!(
            trace_path(dir, 12, 0.05),
            PathBuf::from("/tmp/x/trace_t012_b0.05.csv")
        );
    }

    #[test]
    fn aggregation_reports_vacuous_passes_and_worst_margins() {
        let mk = |name: &str, pass: bool, margin: f64| CheckResult {
            name: name.to_string(),
            iteration: 0,
            lhs: 0.0,
            rhs: 0.0,
            margin,
            pass,
        };
        let checks = vec![
            mk("a", true, 0.5),
            mk("a", false, -0.25),
            mk("a", true, 1.0),
        ];
        let aggs = aggregate_checks(&["a", "b"], &checks);
        assert_eq!(aggs.len(), 2);
        assert_eq!(aggs[0].samples, 3);
        assert_eq!(aggs[0].passes, 2);
        assert_eq!(aggs[0].worst_margin, Some(-0.25));
        assert_eq!(aggs[1].samples, 0);
        assert_eq!(aggs[1].pass_rate, 1.0);
        assert_eq!(aggs[1].worst_margin, None);
    }

    #[test]
    fn running_min_carries_forward_on_a_union_grid() {
        let rows = |data: &[(u64, f64)]| -> Vec<TraceRecord> {
            data.iter()
                .map(|&(t, gap)| TraceRecord {
                    t,
                    gap,
                    vnorm: gap,
                    feas: 0.0,
                    dx: 0.0,
                    dz: 0.0,
                    phi: None,
                })
                .collect()
        };
        let a = rows(&[(0, 5.0), (10, 1.0), (20, 3.0)]);
        let grid = [0, 5, 10, 15, 20];
        assert_eq!(running_min_on_grid(&a, &grid), vec![5.0, 5.0, 1.0, 1.0, 1.0]);
    }
}
