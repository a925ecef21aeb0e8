//! Budget allocation: turns a mean cache size `N` into per-item policy
//! parameters for the three placements.
//!
//! Independent probabilities come from water-filling on the closed-form
//! independent hit rate; Matérn II radii reproduce those probabilities through intensity
//! inversion; GEC marks are scaled from the Matérn II radii.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{gec_intensity, matii_intensity, matii_radius_from_prob, QuadratureSpec};
use crate::error::{domain, Error, Result};
use crate::pointprocess::{IndependentMode, MarkDistribution, PlacementPolicy};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GecMode {
    /// Mark mean `fraction * r_i`, the given scale, `p0 = 1`.
    #[default]
    Proportional,
    /// Mark means `κ * fraction * r_i` with `κ` chosen so the analytic
    /// occupancy equals `N`.
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GecParams {
    pub mode: GecMode,
    pub mark_fraction: f64,
    pub mark_scale: f64,
    pub c: f64,
}

impl Default for GecParams {
    fn default() -> Self {
        Self { mode: GecMode::Proportional, mark_fraction: 0.7, mark_scale: 1.0, c: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetAllocation {
    pub policy: PlacementPolicy,
    pub n_target: f64,
    /// Analytic per-item retention probability under the policy.
    pub retention: Vec<f64>,
    /// Matérn II radii matched to the independent probabilities; GEC marks
    /// are derived from them.
    pub radii: Vec<f64>,
    /// `Σ_i retention(i)`.
    pub achieved_occupancy: f64,
    /// Analytic hit estimate: exact for independent placement, the lower
    /// bound for Matérn II, and the independent formula at GEC's retention
    /// probabilities for GEC.
    pub achieved_hit: f64,
    /// Mark scaling found in calibrated GEC mode.
    pub kappa: Option<f64>,
}

fn check_inputs(pmf: &[f64], lambda: f64, r_dd: f64, n: f64) -> Result<()> {
    if pmf.is_empty() {
        return domain("empty catalogue");
    }
    if pmf.iter().any(|p| !(*p >= 0.0)) {
        return domain("pmf has negative entries");
    }
    if !(lambda > 0.0) || !(r_dd > 0.0) {
        return domain(format!("need lambda > 0 and R_dd > 0, got ({lambda}, {r_dd})"));
    }
    let live = pmf.iter().filter(|p| **p > 0.0).count() as f64;
    if !(n > 0.0 && n <= pmf.len() as f64) {
        return domain(format!("budget N={n} outside (0, M={}]", pmf.len()));
    }
    if n > live {
        return domain(format!("budget N={n} exceeds the {live} items with positive demand"));
    }
    Ok(())
}

fn indep_hit(pmf: &[f64], probs: &[f64], a: f64) -> f64 {
    pmf.iter().zip(probs).map(|(p, x)| p * -(-a * x).exp_m1()).sum()
}

/// Water-filling maximiser of `Σ p(i)(1 - e^{-a x_i})`, `a = λπR²`, over
/// `Σ x_i = N`, `0 ≤ x_i ≤ 1`.
pub fn alloc_independent(pmf: &[f64], lambda: f64, r_dd: f64, n: f64) -> Result<Vec<f64>> {
    check_inputs(pmf, lambda, r_dd, n)?;
    let a = lambda * PI * r_dd * r_dd;
    let fill = |ln_nu: f64| -> Vec<f64> {
        pmf.iter()
            .map(|&p| if p > 0.0 { (((p * a).ln() - ln_nu) / a).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    };
    let budget = |x: &[f64]| x.iter().sum::<f64>();
    let max_p = pmf.iter().copied().fold(0.0, f64::max);
    let min_p = pmf.iter().copied().filter(|p| *p > 0.0).fold(f64::INFINITY, f64::min);
    // budget(lo) = #live >= N, budget(hi) = 0 < N
    let (mut lo, mut hi) = ((min_p * a).ln() - a - 1.0, (max_p * a).ln() + 1.0);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if budget(&fill(mid)) > n {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    let mut x = fill(0.5 * (lo + hi));
    // spread the bisection residual over the unclamped items
    let resid = n - budget(&x);
    let free: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0 && x[i] < 1.0).collect();
    if !free.is_empty() {
        let share = resid / free.len() as f64;
        for &i in &free {
            x[i] = (x[i] + share).clamp(0.0, 1.0);
        }
    }
    let err = (budget(&x) - n).abs();
    if err >= 1e-8 {
        return Err(Error::Numeric(format!("water-filling missed the budget by {err:e}")));
    }
    Ok(x)
}

/// Matérn II radii whose retention probabilities are `probs`; zero
/// probability maps to an infinite radius.
pub fn matii_radii(lambda: f64, probs: &[f64]) -> Result<Vec<f64>> {
    probs
        .iter()
        .map(|&p| if p <= 0.0 { Ok(f64::INFINITY) } else { matii_radius_from_prob(lambda, p.min(1.0)) })
        .collect()
}

/// Radii matched to [`alloc_independent`]'s probabilities.
pub fn alloc_matii(pmf: &[f64], lambda: f64, r_dd: f64, n: f64) -> Result<Vec<f64>> {
    matii_radii(lambda, &alloc_independent(pmf, lambda, r_dd, n)?)
}

fn gec_marks(radii: &[f64], scale_factor: f64, params: &GecParams) -> Result<Vec<MarkDistribution>> {
    radii
        .iter()
        .map(|&r| MarkDistribution::from_mean_scale(scale_factor * params.mark_fraction * r, params.mark_scale))
        .collect()
}

fn gec_occupancy(lambda: f64, marks: &[MarkDistribution], c: f64, quad: &QuadratureSpec) -> Result<Vec<f64>> {
    marks
        .par_iter()
        .map(|mu| Ok(gec_intensity(lambda, mu, 1.0, c, quad)?.value / lambda))
        .collect()
}

/// GEC mark laws built on [`alloc_matii`]'s radii.
pub fn alloc_gec(
    pmf: &[f64],
    lambda: f64,
    r_dd: f64,
    n: f64,
    params: &GecParams,
    quad: &QuadratureSpec,
) -> Result<(Vec<MarkDistribution>, Vec<f64>, Option<f64>)> {
    if !(params.mark_fraction > 0.0) || !(params.mark_scale >= 0.0) || !(params.c > 0.0) {
        return domain(format!("bad GEC parameters {params:?}"));
    }
    let radii = alloc_matii(pmf, lambda, r_dd, n)?;
    let p0 = vec![1.0; pmf.len()];
    match params.mode {
        GecMode::Proportional => Ok((gec_marks(&radii, 1.0, params)?, p0, None)),
        GecMode::Calibrated => {
            let occ = |k: f64| -> Result<f64> {
                Ok(gec_occupancy(lambda, &gec_marks(&radii, k, params)?, params.c, quad)?.iter().sum())
            };
            let occ0 = occ(0.0)?;
            if occ0 < n {
                return Err(Error::Numeric(format!(
                    "calibration bracket failed: occupancy {occ0} at zero mark means is already below N={n}"
                )));
            }
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut occ_hi = occ(hi)?;
            while occ_hi > n {
                lo = hi;
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(Error::Numeric(format!(
                        "calibration bracket failed: occupancy {occ_hi} still above N={n} at kappa={hi}"
                    )));
                }
                occ_hi = occ(hi)?;
            }
            let mut k = hi;
            for _ in 0..200 {
                k = 0.5 * (lo + hi);
                let o = occ(k)?;
                if (o - n).abs() < 1e-5 * n.max(1.0) {
                    break;
                }
                if o > n {
                    lo = k;
                } else {
                    hi = k;
                }
            }
            Ok((gec_marks(&radii, k, params)?, p0, Some(k)))
        }
    }
}

/// Allocation for the named policy (`independent`, `matII`, `gec`).
pub fn allocate(
    policy: &str,
    pmf: &[f64],
    lambda: f64,
    r_dd: f64,
    n: f64,
    indep_mode: IndependentMode,
    gec: &GecParams,
    quad: &QuadratureSpec,
) -> Result<BudgetAllocation> {
    let a = lambda * PI * r_dd * r_dd;
    let probs = alloc_independent(pmf, lambda, r_dd, n)?;
    let radii = matii_radii(lambda, &probs)?;
    let (policy, retention, kappa) = match policy {
        "independent" => (PlacementPolicy::Independent { probs: probs.clone(), mode: indep_mode }, probs, None),
        "matII" => {
            let ret = radii.iter().map(|&r| Ok(matii_intensity(lambda, r)? / lambda)).collect::<Result<Vec<f64>>>()?;
            (PlacementPolicy::HardExclusion { radii: radii.clone() }, ret, None)
        }
        "gec" => {
            let (marks, p0, kappa) = alloc_gec(pmf, lambda, r_dd, n, gec, quad)?;
            let ret = gec_occupancy(lambda, &marks, gec.c, quad)?;
            (PlacementPolicy::GammaExclusion { marks, p0, c: gec.c }, ret, kappa)
        }
        other => return Err(Error::Config(format!("unknown policy {other:?}; expected independent, matII or gec"))),
    };
    let achieved_hit = match &policy {
        PlacementPolicy::HardExclusion { radii } => {
            let b = crate::analytics::matii_hit_bounds(pmf, radii, lambda, r_dd, quad);
            b.map(|b| b.lower).unwrap_or(f64::NAN)
        }
        _ => indep_hit(pmf, &retention, a),
    };
    Ok(BudgetAllocation {
        policy,
        n_target: n,
        achieved_occupancy: retention.iter().sum(),
        retention,
        radii,
        achieved_hit,
        kappa,
    })
}

/// CSV rows `item,p_c,r_i,mark_mean,mark_scale,p0` (items from 1; empty
/// cells where a column does not apply).
pub fn write_allocation_csv<W: Write>(out: &mut W, alloc: &BudgetAllocation) -> Result<()> {
    writeln!(out, "item,p_c,r_i,mark_mean,mark_scale,p0")?;
    for (i, p) in alloc.retention.iter().enumerate() {
        let (r, mean, scale, p0) = match &alloc.policy {
            PlacementPolicy::Independent { .. } => (String::new(), String::new(), String::new(), String::new()),
            PlacementPolicy::HardExclusion { radii } => (format!("{:?}", radii[i]), String::new(), String::new(), String::new()),
            PlacementPolicy::GammaExclusion { marks, p0, .. } => (
                format!("{:?}", alloc.radii[i]),
                format!("{:?}", marks[i].mean()),
                format!("{:?}", marks[i].scale()),
                format!("{:?}", p0[i]),
            ),
        };
        writeln!(out, "{},{p:?},{r},{mean},{scale},{p0}", i + 1)?;
    }
    Ok(())
}
