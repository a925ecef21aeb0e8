//! Minus-sampling estimators of second-order and empty-space functions.
//! Reference points come from the evaluation square; their neighbours
//! from the whole window, so radii must not exceed the border margin.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::geometry::{GridIndex, Point, PointPattern};

fn check_radii(pattern: &PointPattern, radii: &[f64]) -> Result<()> {
    let margin = pattern.window.eval_margin();
    if let Some(r) = radii.iter().find(|r| !(**r >= 0.0 && **r <= margin)) {
        return domain(format!("radius {r} outside [0, {margin}] (evaluation margin)"));
    }
    Ok(())
}

fn reference_points(pattern: &PointPattern) -> Result<Vec<usize>> {
    let idx = pattern.eval_indices();
    if idx.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} points in the evaluation window; need at least 2",
            idx.len()
        )));
    }
    Ok(idx)
}

/// Ripley's `K(r)`: mean neighbour count of evaluation-window points
/// divided by the estimated intensity.
pub fn ripley_k_estimate(pattern: &PointPattern, radii: &[f64]) -> Result<Vec<f64>> {
    check_radii(pattern, radii)?;
    let idx = reference_points(pattern)?;
    let lambda = idx.len() as f64 / pattern.window.eval_area();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let grid = GridIndex::new(pattern, r_max.max(1e-9));
    let mut counts = vec![0usize; radii.len()];
    for &i in &idx {
        for (_, d) in grid.neighbors_of(i, r_max) {
            for (c, &r) in counts.iter_mut().zip(radii) {
                if d <= r {
                    *c += 1;
                }
            }
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / (idx.len() as f64 * lambda)).collect())
}

/// Pair correlation `g(r)` with an Epanechnikov kernel of half-width `h`.
pub fn pair_correlation_estimate(pattern: &PointPattern, radii: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return domain(format!("bandwidth must be positive, got {h}"));
    }
    let reach: Vec<f64> = radii.iter().map(|r| r + h).collect();
    check_radii(pattern, &reach)?;
    if let Some(r) = radii.iter().find(|r| **r <= h) {
        return domain(format!("radius {r} must exceed the bandwidth {h}"));
    }
    let idx = reference_points(pattern)?;
    let lambda = idx.len() as f64 / pattern.window.eval_area();
    let r_max = reach.iter().copied().fold(0.0, f64::max);
    let grid = GridIndex::new(pattern, r_max);
    let mut sums = vec![0.0; radii.len()];
    for &i in &idx {
        for (_, d) in grid.neighbors_of(i, r_max) {
            for (s, &r) in sums.iter_mut().zip(radii) {
                let u = (d - r) / h;
                if u.abs() < 1.0 {
                    *s += 0.75 * (1.0 - u * u) / h;
                }
            }
        }
    }
    Ok(sums
        .into_iter()
        .zip(radii)
        .map(|(s, r)| s / (idx.len() as f64 * lambda * 2.0 * PI * r))
        .collect())
}

/// Empirical empty-space CDF: per probe, the distance to the nearest
/// pattern point (infinite when none lies within `max_radius`).
pub fn empty_space_distances(pattern: &PointPattern, probes: &[Point], max_radius: f64) -> Vec<f64> {
    if pattern.is_empty() {
        return vec![f64::INFINITY; probes.len()];
    }
    let grid = GridIndex::new(pattern, (max_radius / 4.0).max(1e-3));
    probes
        .iter()
        .map(|&x| grid.nearest(x, max_radius).map_or(f64::INFINITY, |(_, d)| d))
        .collect()
}

/// Kolmogorov–Smirnov distance between an empirical sample and a CDF.
pub fn ks_distance<F: FnMut(f64) -> f64>(sample: &[f64], mut cdf: F) -> f64 {
    let mut xs: Vec<f64> = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        if !x.is_finite() {
            // remaining mass sits at infinity; compare against the CDF limit
            d = d.max((k as f64 / n - cdf(f64::INFINITY)).abs());
            break;
        }
        let f = cdf(x);
        d = d.max((f - k as f64 / n).abs()).max(((k + 1) as f64 / n - f).abs());
    }
    d
}
