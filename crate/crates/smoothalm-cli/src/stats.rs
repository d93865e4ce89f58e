//! Small deterministic statistics: nearest-rank quantiles and log–log slope fits.

/// Nearest-rank quantile: the element at sorted position `⌈q·N⌉` (1-indexed).
/// This convention never interpolates, so results are exactly reproducible across
/// implementations. `q` must lie in `(0, 1]`; `q = 0.5` on an even sample returns
/// the lower of the two middle elements.
pub fn nearest_rank_quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    assert!(q > 0.0 && q <= 1.0, "q must lie in (0, 1], got {q}");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile sample"));
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}

/// Ordinary least-squares slope of `ln y` against `ln x`.
///
/// Pairs with nonpositive coordinates are skipped (their logarithm is undefined);
/// returns `None` when fewer than two usable points remain or all usable `x` agree.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / count;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / count;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    Some(sxy / sxx)
}
