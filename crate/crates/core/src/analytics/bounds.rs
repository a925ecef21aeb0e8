//! Hit-rate evaluation, Matérn II hit and variance bounds, and cache
//! violation bounds.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

use super::palm::{matii_intensity, sopd_matii};
use super::quad::{integrate, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub quantity: String,
    pub lower: f64,
    pub upper: f64,
    /// Per-item `(lower, upper)` on `P(item cached within R)`.
    pub per_item: Vec<(f64, f64)>,
    pub inputs: serde_json::Value,
}

fn check_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() {
        return domain("pmf is empty");
    }
    if pmf.iter().any(|p| !(*p >= 0.0)) {
        return domain("pmf has negative or NaN entries");
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("pmf sums to {total}, not 1"));
    }
    Ok(())
}

fn check_contacts(pmf: &[f64], h: &[f64]) -> Result<()> {
    check_pmf(pmf)?;
    if h.len() != pmf.len() {
        return domain(format!("{} contact values for {} items", h.len(), pmf.len()));
    }
    if h.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return domain("contact probabilities must lie in [0,1]");
    }
    Ok(())
}

/// `Σ_i p(i) H_i`.
pub fn hit_rate(pmf: &[f64], contact: &[f64]) -> Result<f64> {
    check_contacts(pmf, contact)?;
    Ok(pmf.iter().zip(contact).map(|(p, h)| p * h).sum::<f64>().clamp(0.0, 1.0))
}

/// `Σ_i p(i)² H_i (1 - H_i)`, treating items as independent.
pub fn hit_variance(pmf: &[f64], contact: &[f64]) -> Result<f64> {
    check_contacts(pmf, contact)?;
    Ok(pmf.iter().zip(contact).map(|(p, h)| p * p * h * (1.0 - h)).sum())
}

fn check_radii(pmf: &[f64], radii: &[f64], lambda: f64, r_dd: f64) -> Result<()> {
    check_pmf(pmf)?;
    if radii.len() != pmf.len() {
        return domain(format!("{} radii for {} items", radii.len(), pmf.len()));
    }
    if radii.iter().any(|r| !(*r >= 0.0)) {
        return domain("radii must be >= 0");
    }
    if !(lambda > 0.0) || !(r_dd >= 0.0) {
        return domain(format!("need lambda > 0 and R_dd >= 0, got ({lambda}, {r_dd})"));
    }
    Ok(())
}

/// Per-item bounds on `P(Φ_th,i(B_0(R)) > 0)` for Matérn II.
///
/// Items with `r_i < R` get `1 - e^{-λ_hcp πR²}` below and that plus
/// `λ^{-1} ∫_{B_0(R)} ρ^{(2)}` above (capped at 1); the rest get
/// `λ_hcp πR²` on both sides.
pub fn matii_hit_bounds(pmf: &[f64], radii: &[f64], lambda: f64, r_dd: f64, quad: &QuadratureSpec) -> Result<BoundReport> {
    check_radii(pmf, radii, lambda, r_dd)?;
    let area = PI * r_dd * r_dd;
    let mut per_item = Vec::with_capacity(radii.len());
    for &r_i in radii {
        let lam_h = matii_intensity(lambda, r_i)?;
        if r_i < r_dd {
            let lo = -(-lam_h * area).exp_m1();
            let sopd = integrate(
                |r| sopd_matii(r, lambda, r_i).unwrap_or(f64::NAN) * r,
                r_i,
                r_dd,
                &[2.0 * r_i],
                quad,
            )?;
            let up = (lo + 2.0 * PI * sopd.value / lambda).min(1.0);
            per_item.push((lo, up));
        } else {
            let t = (lam_h * area).min(1.0);
            per_item.push((t, t));
        }
    }
    let lower = pmf.iter().zip(&per_item).map(|(p, b)| p * b.0).sum();
    let upper = pmf.iter().zip(&per_item).map(|(p, b)| p * b.1).sum();
    Ok(BoundReport {
        quantity: "matII_hit_bounds".into(),
        lower,
        upper,
        per_item,
        inputs: serde_json::json!({ "lambda": lambda, "R_dd": r_dd, "M": pmf.len() }),
    })
}

/// `Σ p(i)² (1/e + πλ p_c(i)² (R² - r_i²)_+)` with `p_c = λ_hcp/λ`.
pub fn matii_hit_var_bound(pmf: &[f64], radii: &[f64], lambda: f64, r_dd: f64) -> Result<f64> {
    check_radii(pmf, radii, lambda, r_dd)?;
    let mut total = 0.0;
    for (p, &r_i) in pmf.iter().zip(radii) {
        let pc = matii_intensity(lambda, r_i)? / lambda;
        total += p * p * (1.0 / E + PI * lambda * pc * pc * (r_dd * r_dd - r_i * r_i).max(0.0));
    }
    Ok(total)
}

/// Large-ball count variance bound `λ_hcp πR² e^{-λπr_i²}`.
pub fn spatial_var_bound(lambda: f64, r_i: f64, r_dd: f64) -> Result<f64> {
    if !(r_dd >= 0.0) {
        return domain(format!("R must be >= 0, got {r_dd}"));
    }
    Ok(matii_intensity(lambda, r_i)? * PI * r_dd * r_dd * (-lambda * PI * r_i * r_i).exp())
}

/// Chernoff bound on `P(C > N + ε)`: `exp(ε - (N+ε) ln(1 + ε/N))`.
pub fn chernoff_violation(n: f64, eps: f64) -> Result<f64> {
    if !(n > 0.0) || !(eps >= 0.0) {
        return domain(format!("chernoff needs N > 0 and eps >= 0, got ({n}, {eps})"));
    }
    Ok((eps - (n + eps) * (eps / n).ln_1p()).exp().min(1.0))
}

/// Bernstein-type bound on `P(C > threshold)`:
/// `exp(-(C-N)² / (Var + (C-N)/3))`.
pub fn bernstein_violation(n: f64, var: f64, threshold: f64) -> Result<f64> {
    if !(n >= 0.0) || !(var >= 0.0) || !(threshold >= n) {
        return domain(format!("bernstein needs N >= 0, Var >= 0 and C >= N, got ({n}, {var}, {threshold})"));
    }
    let t = threshold - n;
    if t == 0.0 {
        return Ok(1.0);
    }
    Ok((-t * t / (var + t / 3.0)).exp())
}

/// One request: a rate, the requested item and the node path toward its
/// source. The last node is the source and is not counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub rate: f64,
    pub item: usize,
    pub path: Vec<usize>,
}

fn check_request(z: &[Vec<f64>], w: &[f64], req: &Request) -> Result<()> {
    if req.path.len() < 2 {
        return domain("request path needs at least two nodes");
    }
    if w.len() + 1 < req.path.len() {
        return domain(format!("{} link weights for a path of {} nodes", w.len(), req.path.len()));
    }
    for &node in &req.path {
        let row = z.get(node).ok_or_else(|| crate::Error::Domain(format!("node {node} outside Z")))?;
        if req.item >= row.len() {
            return domain(format!("item {} outside Z", req.item));
        }
    }
    Ok(())
}

/// Path gain `Σ_req rate Σ_{k<|q|} w_k (1 - Π_{l≤k} (1 - z_{q_l,i}))`.
pub fn multihop_gain(z: &[Vec<f64>], requests: &[Request], w: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for req in requests {
        check_request(z, w, req)?;
        let mut miss = 1.0;
        for (k, &node) in req.path[..req.path.len() - 1].iter().enumerate() {
            miss *= 1.0 - z[node][req.item];
            total += req.rate * w[k] * (1.0 - miss);
        }
    }
    Ok(total)
}

/// Concave surrogate `Σ_req rate Σ_{k<|q|} w_k min{1, Σ_{l≤k} z_{q_l,i}}`.
pub fn concave_surrogate(z: &[Vec<f64>], requests: &[Request], w: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for req in requests {
        check_request(z, w, req)?;
        let mut acc = 0.0;
        for (k, &node) in req.path[..req.path.len() - 1].iter().enumerate() {
            acc += z[node][req.item];
            total += req.rate * w[k] * acc.min(1.0);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn hit_rate_cases() {
        assert_eq!(hit_rate(&[0.5, 0.5], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((hit_rate(&[0.2, 0.3, 0.5], &[0.4; 3]).unwrap() - 0.4).abs() < 1e-15);
        assert!((hit_rate(&[2.0 / 3.0, 1.0 / 3.0], &[0.9, 0.3]).unwrap() - 0.7).abs() < 1e-15);
        assert!(hit_rate(&[0.5, 0.5], &[1.2, 0.0]).is_err());
    }

    #[test]
    fn hit_variance_cases() {
        assert_eq!(hit_variance(&[0.5, 0.5], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(hit_variance(&[1.0], &[0.5]).unwrap(), 0.25);
    }

    #[test]
    fn tail_items_bounds_coincide() {
        let pmf = [0.6, 0.4];
        let radii = [3.0, 5.0];
        let b = matii_hit_bounds(&pmf, &radii, 0.1, 3.0, &QuadratureSpec::default()).unwrap();
        let expect: f64 =
            pmf.iter().zip(&radii).map(|(p, r)| p * matii_intensity(0.1, *r).unwrap() * PI * 9.0).sum();
        assert!((b.lower - expect).abs() < 1e-15 && (b.upper - expect).abs() < 1e-15);
        let z = matii_hit_bounds(&pmf, &[0.5, 1.0], 0.1, 1e-9, &QuadratureSpec::default()).unwrap();
        assert!(z.lower < 1e-15 && z.upper < 1e-15);
    }

    #[test]
    fn bounds_are_ordered() {
        let pmf = [0.4, 0.3, 0.2, 0.1];
        let b = matii_hit_bounds(&pmf, &[0.5, 1.0, 2.0, 4.0], 0.1, 3.0, &QuadratureSpec::default()).unwrap();
        assert!(0.0 <= b.lower && b.lower <= b.upper && b.upper <= 1.0);
        assert!(b.per_item.iter().all(|(l, u)| l <= u));
    }

    #[test]
    fn variance_bounds() {
        let v = matii_hit_var_bound(&[0.5, 0.5], &[4.0, 5.0], 0.1, 3.0).unwrap();
        assert!((v - 0.5 / E).abs() < 1e-15);
        assert!((spatial_var_bound(0.1, 0.0, 3.0).unwrap() - 0.1 * PI * 9.0).abs() < 1e-14);
        let s = spatial_var_bound(0.1, 2.0, 10.0).unwrap();
        assert!((s - 5.09).abs() < 0.01, "{s}");
    }

    #[test]
    fn violation_bounds() {
        assert_eq!(chernoff_violation(10.0, 0.0).unwrap(), 1.0);
        let c = chernoff_violation(10.0, 5.0).unwrap();
        assert!((c - (5.0 - 15.0 * 1.5f64.ln()).exp()).abs() < 1e-15);
        assert!((c - 0.339).abs() < 1e-3);
        let mut prev = 1.0;
        for k in 1..50 {
            let v = chernoff_violation(10.0, k as f64 * 0.2).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert_eq!(bernstein_violation(10.0, 5.0, 10.0).unwrap(), 1.0);
        assert!((bernstein_violation(10.0, 5.0, 15.0).unwrap() - (-3.75f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn surrogate_dominates_gain() {
        let reqs: Vec<Request> = (0..4).map(|i| Request { rate: 0.25, item: i % 3, path: vec![i, i + 1, i + 2, 6] }).collect();
        let w = [1.0, 0.5, 0.25];
        let zero = vec![vec![0.0; 3]; 7];
        assert_eq!(concave_surrogate(&zero, &reqs, &w).unwrap(), 0.0);
        let ones = vec![vec![1.0; 3]; 7];
        assert!((concave_surrogate(&ones, &reqs, &w).unwrap() - 1.75).abs() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let z: Vec<Vec<f64>> =
                (0..7).map(|_| (0..3).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect()).collect();
            assert!(concave_surrogate(&z, &reqs, &w).unwrap() >= multihop_gain(&z, &reqs, &w).unwrap() - 1e-15);
        }
    }
}
