//! Item popularity: the global Zipf law and its location-dependent
//! exponential tilts driven by a peak-hour traffic density field.

mod field;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use field::{read_field_csv, sample_traffic_field, FieldParams, FieldPreset, TrafficField};

use crate::error::{domain, Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfDemand {
    pub catalog_size: usize,
    pub exponent: f64,
}

impl ZipfDemand {
    pub fn new(catalog_size: usize, exponent: f64) -> Result<Self> {
        if catalog_size == 0 {
            return domain("catalog size must be at least 1");
        }
        if !(exponent >= 0.0 && exponent.is_finite()) {
            return domain(format!("zipf exponent must be >= 0, got {exponent}"));
        }
        Ok(Self { catalog_size, exponent })
    }

    pub fn pmf(&self) -> Vec<f64> {
        zipf_unchecked(self.catalog_size, self.exponent)
    }
}

/// `p(i) = i^{-γ} / Σ_j j^{-γ}` for `i = 1..=M`.
pub fn zipf_pmf(catalog_size: usize, exponent: f64) -> Result<Vec<f64>> {
    Ok(ZipfDemand::new(catalog_size, exponent)?.pmf())
}

fn zipf_unchecked(m: usize, g: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=m).map(|i| (i as f64).powf(-g)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Request pmf seen at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDemand {
    pub location: Option<Point>,
    pub pmf: Vec<f64>,
}

/// Normalises `exp(log_w)` with log-sum-exp.
fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Geometric tilt `p^x(i) ∝ (D_x/E[D])^i p(i)`, items indexed from 1.
pub fn tilt_shift(zipf: &ZipfDemand, density: f64, mean_density: f64) -> Result<LocalDemand> {
    if !(density > 0.0) || !(mean_density > 0.0) {
        return domain(format!("densities must be positive, got D_x={density}, E[D]={mean_density}"));
    }
    let theta = (density / mean_density).ln();
    let base = zipf.pmf();
    let log_w: Vec<f64> = base.iter().enumerate().map(|(k, p)| (k + 1) as f64 * theta + p.ln()).collect();
    Ok(LocalDemand { location: None, pmf: normalize_log_weights(&log_w) })
}

/// Zipf-exponent shift: `p^x(i) ∝ i^{-(γ + γ_θ)}` with
/// `γ_θ = -ln(D_x/E[D])`, so denser locations lean toward the tail like
/// the geometric tilt does. Offered as an alternative, not an equivalent.
pub fn tilt_zipf_shift(zipf: &ZipfDemand, density: f64, mean_density: f64) -> Result<LocalDemand> {
    if !(density > 0.0) || !(mean_density > 0.0) {
        return domain(format!("densities must be positive, got D_x={density}, E[D]={mean_density}"));
    }
    let g = zipf.exponent - (density / mean_density).ln();
    let log_w: Vec<f64> = (1..=zipf.catalog_size).map(|i| -g * (i as f64).ln()).collect();
    Ok(LocalDemand { location: None, pmf: normalize_log_weights(&log_w) })
}

/// Boost applied to the top half of the catalogue by the weighted tilt:
/// `Σ_{D>E[D]} D / (|B| E[D] - Σ_{D>E[D]} D)` over the region's densities.
pub fn weighted_boost(densities: &[f64]) -> Result<f64> {
    if densities.is_empty() {
        return domain("weighted tilt needs a non-empty region");
    }
    if densities.iter().any(|d| !(*d > 0.0)) {
        return domain("densities must be positive");
    }
    let n = densities.len() as f64;
    let mean = densities.iter().sum::<f64>() / n;
    let above: f64 = densities.iter().filter(|&&d| d > mean).sum();
    let denom = n * mean - above;
    if above <= 0.0 || denom <= 0.0 {
        return Err(Error::Numeric(format!(
            "degenerate traffic field: boost numerator {above}, denominator {denom}"
        )));
    }
    Ok(above / denom)
}

/// Weighted tilt: items `1..=M/2` scaled by [`weighted_boost`], the rest by 1.
pub fn tilt_weighted(zipf: &ZipfDemand, densities: &[f64], location: Option<Point>) -> Result<LocalDemand> {
    if zipf.catalog_size % 2 != 0 {
        return domain(format!("weighted tilt needs an even catalogue, got M={}", zipf.catalog_size));
    }
    let boost = weighted_boost(densities)?;
    let half = zipf.catalog_size / 2;
    let w: Vec<f64> = zipf.pmf().iter().enumerate().map(|(k, p)| if k < half { boost * p } else { *p }).collect();
    let total: f64 = w.iter().sum();
    Ok(LocalDemand { location, pmf: w.into_iter().map(|x| x / total).collect() })
}

/// Per-item drift `E_x[p^x(i)] - p(i)` of a set of local pmfs.
pub fn demand_drift(locals: &[LocalDemand], base: &[f64]) -> Vec<f64> {
    let n = locals.len().max(1) as f64;
    base.iter()
        .enumerate()
        .map(|(i, p)| locals.iter().map(|l| l.pmf[i]).sum::<f64>() / n - p)
        .collect()
}

/// CSV rows `location_id,item,probability` (items numbered from 1).
pub fn write_demand_csv<W: Write>(out: &mut W, locals: &[LocalDemand]) -> Result<()> {
    writeln!(out, "location_id,item,probability")?;
    for (loc, l) in locals.iter().enumerate() {
        for (i, p) in l.pmf.iter().enumerate() {
            writeln!(out, "{loc},{},{p:?}", i + 1)?;
        }
    }
    Ok(())
}
