//! Lognormal peak-hour traffic density on a square pixel lattice:
//! `D = exp(S)`, `S ~ N(μ*, Σ)`, `Σ_ij = σ² exp(-d_ij / r)`.
//!
//! Lattices up to [`DENSE_MAX_SIDE`] pixels per side are sampled through
//! a dense Cholesky factor; larger ones through circulant embedding on a
//! padded torus. Both are exact Gaussian samplers; circulant embedding
//! fails loudly if the embedding is not non-negative definite.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{self, Purpose};

pub const DENSE_MAX_SIDE: usize = 64;
const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub mu_star: f64,
    pub sigma: f64,
    /// Variogram scale `r` in km.
    pub vario_scale: f64,
}

/// Measured lognormal parameters for peak-hour downlink traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldPreset {
    Urban,
    Rural,
}

impl FieldPreset {
    /// Variogram scale is a third of the reported correlation range.
    pub fn params(self) -> FieldParams {
        match self {
            Self::Urban => FieldParams { mu_star: 15.999, sigma: 1.4116, vario_scale: 0.0154 / 3.0 },
            Self::Rural => FieldParams { mu_star: 10.2496, sigma: 1.3034, vario_scale: 1.7139 / 3.0 },
        }
    }

    pub fn grid_side(self) -> usize {
        120
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficField {
    pub side: usize,
    pub pixel_size: f64,
    /// Row-major `log D`.
    pub log_density: Vec<f64>,
    /// Absent for fields read back from CSV.
    pub params: Option<FieldParams>,
}

impl TrafficField {
    pub fn log_at(&self, row: usize, col: usize) -> f64 {
        self.log_density[row * self.side + col]
    }

    pub fn density_at(&self, row: usize, col: usize) -> f64 {
        self.log_at(row, col).exp()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.log_density.iter().map(|l| l.exp()).collect()
    }

    pub fn mean_density(&self) -> f64 {
        self.log_density.iter().map(|l| l.exp()).sum::<f64>() / self.log_density.len() as f64
    }

    /// Square sub-lattice with top-left pixel `(row0, col0)`.
    pub fn subregion(&self, row0: usize, col0: usize, size: usize) -> Result<TrafficField> {
        if size == 0 || row0 + size > self.side || col0 + size > self.side {
            return domain(format!("region {size}x{size} at ({row0},{col0}) exceeds {0}x{0} field", self.side));
        }
        let mut log_density = Vec::with_capacity(size * size);
        for r in row0..row0 + size {
            log_density.extend_from_slice(&self.log_density[r * self.side + col0..r * self.side + col0 + size]);
        }
        Ok(TrafficField { side: size, pixel_size: self.pixel_size, log_density, params: self.params })
    }

    /// CSV rows `row,col,log_density`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "row,col,log_density")?;
        for r in 0..self.side {
            for c in 0..self.side {
                writeln!(out, "{r},{c},{:?}", self.log_at(r, c))?;
            }
        }
        Ok(())
    }
}

/// Reads a square field written by [`TrafficField::write_csv`].
pub fn read_field_csv<R: BufRead>(input: R, pixel_size: f64) -> Result<TrafficField> {
    let mut cells = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let bad = || Error::Config(format!("field csv line {}: expected row,col,log_density", n + 1));
        if parts.len() != 3 {
            return Err(bad());
        }
        let r: usize = parts[0].trim().parse().map_err(|_| bad())?;
        let c: usize = parts[1].trim().parse().map_err(|_| bad())?;
        let v: f64 = parts[2].trim().parse().map_err(|_| bad())?;
        cells.push((r, c, v));
    }
    let side = cells.iter().map(|&(r, c, _)| r.max(c) + 1).max().unwrap_or(0);
    if side == 0 || cells.len() != side * side {
        return Err(Error::Config(format!("field csv holds {} cells, not a full square", cells.len())));
    }
    let mut log_density = vec![f64::NAN; side * side];
    for (r, c, v) in cells {
        log_density[r * side + c] = v;
    }
    if log_density.iter().any(|v| v.is_nan()) {
        return Err(Error::Config("field csv has duplicate or missing cells".into()));
    }
    Ok(TrafficField { side, pixel_size, log_density, params: None })
}

fn check_params(side: usize, pixel_size: f64, p: &FieldParams) -> Result<()> {
    if side == 0 {
        return domain("field needs at least one pixel");
    }
    if !(pixel_size > 0.0) {
        return domain(format!("pixel size must be positive, got {pixel_size}"));
    }
    if !(p.sigma > 0.0) {
        return domain(format!("sigma must be positive, got {}", p.sigma));
    }
    if !(p.vario_scale > 0.0) {
        return domain(format!("variogram scale must be positive, got {}", p.vario_scale));
    }
    if !p.mu_star.is_finite() {
        return domain("mu_star must be finite");
    }
    Ok(())
}

/// Samples one field realisation.
pub fn sample_traffic_field(side: usize, pixel_size: f64, params: FieldParams, seed: u64) -> Result<TrafficField> {
    check_params(side, pixel_size, &params)?;
    let mut rng = rng::stream(seed, Purpose::Field, &[]);
    let gaussian = if side <= DENSE_MAX_SIDE {
        dense_sample(side, pixel_size, &params, &mut rng)?
    } else {
        circulant_sample(side, pixel_size, &params, &mut rng)?
    };
    Ok(TrafficField {
        side,
        pixel_size,
        log_density: gaussian.into_iter().map(|g| params.mu_star + g).collect(),
        params: Some(params),
    })
}

fn dense_sample<R: Rng>(side: usize, h: f64, p: &FieldParams, rng: &mut R) -> Result<Vec<f64>> {
    let n = side * side;
    let s2 = p.sigma * p.sigma;
    let cov = DMatrix::from_fn(n, n, |a, b| {
        let (ra, ca) = ((a / side) as f64, (a % side) as f64);
        let (rb, cb) = ((b / side) as f64, (b % side) as f64);
        let d = h * ((ra - rb).powi(2) + (ca - cb).powi(2)).sqrt();
        s2 * (-d / p.vario_scale).exp() + if a == b { JITTER * s2 } else { 0.0 }
    });
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numeric(format!("covariance of {side}x{side} field not positive definite after jitter")))?;
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok((chol.l() * z).iter().copied().collect())
}

fn fft2(data: &mut [Complex<f64>], m: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_forward(m);
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); m];
    for c in 0..m {
        for r in 0..m {
            col[r] = data[r * m + c];
        }
        fft.process(&mut col);
        for r in 0..m {
            data[r * m + c] = col[r];
        }
    }
}

fn circulant_sample<R: Rng>(side: usize, h: f64, p: &FieldParams, rng: &mut R) -> Result<Vec<f64>> {
    let s2 = p.sigma * p.sigma;
    let mut planner = FftPlanner::new();
    let mut m = (2 * side).next_power_of_two();
    let eig = loop {
        let mut base = vec![Complex::new(0.0, 0.0); m * m];
        for r in 0..m {
            let dr = r.min(m - r) as f64;
            for c in 0..m {
                let dc = c.min(m - c) as f64;
                let d = h * (dr * dr + dc * dc).sqrt();
                base[r * m + c] = Complex::new(s2 * (-d / p.vario_scale).exp(), 0.0);
            }
        }
        fft2(&mut base, m, &mut planner);
        let max = base.iter().map(|z| z.re).fold(0.0, f64::max);
        let min = base.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if min >= -1e-10 * max {
            break base.into_iter().map(|z| z.re.max(0.0)).collect::<Vec<f64>>();
        }
        if m >= 8 * side.next_power_of_two() {
            return Err(Error::Numeric(format!(
                "circulant embedding of {side}x{side} field not non-negative definite (min eigenvalue {min:e})"
            )));
        }
        m *= 2;
    };
    let total = (m * m) as f64;
    let mut w: Vec<Complex<f64>> = eig
        .iter()
        .map(|&l| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex::new(a, b) * (l / total).sqrt()
        })
        .collect();
    fft2(&mut w, m, &mut planner);
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            out.push(w[r * m + c].re);
        }
    }
    Ok(out)
}
