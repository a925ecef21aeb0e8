//! Thinned intensities, conditional thinning Palm probabilities, contact
//! distributions and second-order product densities.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::geometry::{lens_area_unchecked, union_area_equal_discs};
use crate::pointprocess::MarkDistribution;

use super::quad::{integrate, mark_expectation, Estimate, QuadratureSpec};

/// `(1 - e^{-q}) / q`, equal to 1 at `q = 0`.
#[inline]
pub(crate) fn survival_ratio(q: f64) -> f64 {
    if q < 1e-14 {
        1.0
    } else if q.is_infinite() {
        0.0
    } else {
        -(-q).exp_m1() / q
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be positive, got {lambda}"));
    }
    Ok(())
}

/// Matérn II intensity `(1 - e^{-λπR²}) / (πR²)`; `λ` at `R = 0`, zero for
/// an infinite radius.
pub fn matii_intensity(lambda: f64, r: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(r >= 0.0) {
        return domain(format!("exclusion radius must be >= 0, got {r}"));
    }
    Ok(lambda * survival_ratio(lambda * PI * r * r))
}

/// Exclusion radius whose Matérn II retention probability is `p_target`.
pub fn matii_radius_from_prob(lambda: f64, p_target: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(p_target > 0.0 && p_target <= 1.0) {
        return domain(format!("target retention probability must lie in (0,1], got {p_target}"));
    }
    if p_target == 1.0 {
        return Ok(0.0);
    }
    // survival_ratio(a) < 1/a, so the root lies below 1/p
    let (mut lo, mut hi) = (0.0f64, 1.0 / p_target);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if survival_ratio(mid) > p_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok((a / (lambda * PI)).sqrt())
}

/// `∫_{R²} exp(-c (|x| - m - n)_+) dx = π(m+n)² + 2π((m+n)/c + 1/c²)`.
pub fn gec_spatial_kernel_integral(m: f64, n: f64, c: f64) -> Result<f64> {
    if !(m >= 0.0 && n >= 0.0) {
        return domain(format!("marks must be >= 0, got ({m}, {n})"));
    }
    if !(c > 0.0) {
        return domain(format!("decay rate c must be > 0, got {c}"));
    }
    let s = m + n;
    Ok(PI * s * s + 2.0 * PI * (s / c + 1.0 / (c * c)))
}

/// `E_n[kernel integral(m, n, c)]` in closed form.
fn mean_kernel(m: f64, mu: &MarkDistribution, c: f64) -> f64 {
    let en = mu.mean();
    PI * (m * m + 2.0 * m * en + mu.second_moment()) + 2.0 * PI * ((m + en) / c + 1.0 / (c * c))
}

fn check_gec(mu: &MarkDistribution, c: f64) -> Result<()> {
    if !(c > 0.0) {
        return domain(format!("decay rate c must be > 0, got {c}"));
    }
    if !mu.mean().is_finite() && !mu.is_never() {
        return domain("mark law needs a finite second moment");
    }
    Ok(())
}

/// GEC intensity with uniform weights:
/// `λ p0 E_m[(1 - e^{-λQ(m)}) / (λQ(m))]`, `Q(m) = E_n[kernel integral]`.
pub fn gec_intensity(lambda: f64, mu: &MarkDistribution, p0: f64, c: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    check_lambda(lambda)?;
    if !(p0 > 0.0 && p0 <= 1.0) {
        return domain(format!("p0 must lie in (0,1], got {p0}"));
    }
    check_gec(mu, c)?;
    if mu.is_never() {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let e = mark_expectation(mu, |m| survival_ratio(lambda * mean_kernel(m, mu, c)), &[], quad)?;
    let scale = lambda * p0;
    Ok(Estimate { value: scale * e.value, error: scale * e.error })
}

/// `H(R) = 1 - exp(-π λ_th R²)` for an independently thinned PPP.
pub fn contact_indep(lambda_th: f64, r: f64) -> Result<f64> {
    if !(lambda_th >= 0.0) || !(r >= 0.0) {
        return domain(format!("contact needs lambda_th >= 0 and R >= 0, got ({lambda_th}, {r})"));
    }
    Ok(-(-PI * lambda_th * r * r).exp_m1())
}

/// Matérn II Palm retention of a point at distance `r` from an empty ball:
/// `(1 - e^{-q}) / q` with `q = λ(πδ² - l₂(r, δ))`.
pub fn palm_matii(r: f64, delta: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(r > 0.0) || !(delta > 0.0) {
        return domain(format!("palm_matII needs r > 0 and delta > 0, got ({r}, {delta})"));
    }
    if delta.is_infinite() {
        return Ok(0.0);
    }
    let q = lambda * (PI * delta * delta - lens_area_unchecked(r, delta));
    Ok(survival_ratio(q))
}

fn check_palm_gec(r: f64, mu: &MarkDistribution, lambda: f64, c: f64) -> Result<()> {
    check_lambda(lambda)?;
    if !(r > 0.0) {
        return domain(format!("palm_gec needs r > 0, got {r}"));
    }
    check_gec(mu, c)
}

/// Exponent `q(m) = λ(E_n[kernel integral(m,n,c)] - E_n[l₂(r,n)])` of the
/// GEC Palm retention; returns the `m`-independent lens term.
fn gec_lens_term(r: f64, mu: &MarkDistribution, quad: &QuadratureSpec) -> Result<f64> {
    // l₂(r, n) switches branch at n = 2r
    Ok(mark_expectation(mu, |n| lens_area_unchecked(r, n), &[2.0 * r], quad)?.value)
}

/// GEC Palm retention with the kernel integral in place of `π(m+n)²`:
/// `E_m[(1 - e^{-q(m)}) / q(m)]`, `q(m) = λ(E_n[k(m,n,c)] - E_n[l₂(r,n)])`.
/// The `c → ∞` limit is the sharp-disc form.
pub fn palm_gec(r: f64, mu: &MarkDistribution, lambda: f64, c: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    check_palm_gec(r, mu, lambda, c)?;
    if mu.is_never() {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let lens = gec_lens_term(r, mu, quad)?;
    mark_expectation(mu, |m| survival_ratio(lambda * (mean_kernel(m, mu, c) - lens).max(0.0)), &[], quad)
}

/// Same quantity as [`palm_gec`] with the thinning-weight integral
/// `∫_0^1 e^{-u q(m)} du` evaluated by quadrature instead of closed form.
pub fn palm_gec_nested(r: f64, mu: &MarkDistribution, lambda: f64, c: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    check_palm_gec(r, mu, lambda, c)?;
    if mu.is_never() {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let lens = gec_lens_term(r, mu, quad)?;
    let mut inner_err: Option<Error> = None;
    let est = mark_expectation(
        mu,
        |m| {
            let q = lambda * (mean_kernel(m, mu, c) - lens).max(0.0);
            match weight_integral(q, quad) {
                Ok(e) => e.value,
                Err(e) => {
                    inner_err.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &[],
        quad,
    );
    match inner_err {
        Some(e) => Err(e),
        None => est,
    }
}

/// `∫_0^1 e^{-u q} du` by quadrature.
pub fn weight_integral(q: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    integrate(|u| (-u * q).exp(), 0.0, 1.0, &[], quad)
}

/// `H(R) = 1 - exp(-∫_0^R 2π r λ η(r) dr)` for a Palm retention `η`.
pub fn contact_from_palm<F>(mut palm: F, lambda: f64, r_max: f64, breaks: &[f64], quad: &QuadratureSpec) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    check_lambda(lambda)?;
    if !(r_max >= 0.0) {
        return domain(format!("contact radius must be >= 0, got {r_max}"));
    }
    let mut first_err: Option<Error> = None;
    let est = integrate(
        |r| match palm(r) {
            Ok(eta) => 2.0 * PI * r * lambda * eta,
            Err(e) => {
                first_err.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        r_max,
        breaks,
        quad,
    );
    if let Some(e) = first_err {
        return Err(e);
    }
    let est = est?;
    let h = -(-est.value).exp_m1();
    // dH = e^{-I} dI
    Ok(Estimate { value: h, error: (-est.value).exp() * est.error })
}

/// Matérn II contact distribution at `R` for exclusion radius `delta`.
pub fn contact_matii(lambda: f64, delta: f64, r: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    if delta == 0.0 {
        return Ok(Estimate { value: contact_indep(lambda, r)?, error: 0.0 });
    }
    contact_from_palm(|s| palm_matii(s, delta, lambda), lambda, r, &[0.5 * delta], quad)
}

/// Second-order product density of Matérn II with exclusion radius `r_i`.
pub fn sopd_matii(r: f64, lambda: f64, r_i: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(r >= 0.0) || !(r_i >= 0.0) {
        return domain(format!("sopd needs r >= 0 and r_i >= 0, got ({r}, {r_i})"));
    }
    if r_i == 0.0 {
        return Ok(lambda * lambda);
    }
    if r_i.is_infinite() || r <= r_i {
        return Ok(0.0);
    }
    let lam_h = matii_intensity(lambda, r_i)?;
    if r >= 2.0 * r_i {
        return Ok(lam_h * lam_h);
    }
    let disc = PI * r_i * r_i;
    let v = union_area_equal_discs(r_i, r);
    // 1 - e^{-x} via expm1 keeps small-λ cases accurate
    let one_m = |x: f64| -(-x).exp_m1();
    let num = 2.0 * v * one_m(lambda * disc) - 2.0 * disc * one_m(lambda * v);
    let den = disc * v * (v - disc);
    Ok(num / den)
}

/// Matérn I intensity `λ e^{-λπr_i²}` and SOPD at separation `r`:
/// `λ² e^{-λ V(r)}` for `r ≥ r_i`, where `V` is the union of the two
/// exclusion discs, and 0 below `r_i`.
pub fn mati_stats(lambda: f64, r_i: f64, r: f64) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    if !(r_i >= 0.0) || !(r >= 0.0) {
        return domain(format!("MatI needs r_i >= 0 and r >= 0, got ({r_i}, {r})"));
    }
    let intensity = lambda * (-lambda * PI * r_i * r_i).exp();
    let sopd = if r < r_i {
        0.0
    } else if r_i == 0.0 {
        lambda * lambda
    } else {
        lambda * lambda * (-lambda * union_area_equal_discs(r_i, r)).exp()
    };
    Ok((intensity, sopd))
}
