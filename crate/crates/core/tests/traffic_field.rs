use gec_core::demand::{sample_traffic_field, FieldParams, FieldPreset};
use gec_core::rng::derive_seed;

fn cov_model(p: &FieldParams, h: f64, a: usize, b: usize, side: usize) -> f64 {
    let (ra, ca) = ((a / side) as f64, (a % side) as f64);
    let (rb, cb) = ((b / side) as f64, (b % side) as f64);
    let d = h * ((ra - rb).powi(2) + (ca - cb).powi(2)).sqrt();
    p.sigma * p.sigma * (-d / p.vario_scale).exp()
}

/// Empirical covariance of `log D - mu_star` over all pixel pairs.
fn empirical_cov(side: usize, h: f64, p: FieldParams, reps: u64, seed: u64) -> Vec<f64> {
    let n = side * side;
    let mut acc = vec![0.0; n * n];
    for k in 0..reps {
        let f = sample_traffic_field(side, h, p, derive_seed(seed, &[k])).unwrap();
        let g: Vec<f64> = f.log_density.iter().map(|x| x - p.mu_star).collect();
        for a in 0..n {
            for b in 0..n {
                acc[a * n + b] += g[a] * g[b];
            }
        }
    }
    acc.iter().map(|s| s / reps as f64).collect()
}

fn frobenius_rel_err(emp: &[f64], side: usize, h: f64, p: &FieldParams) -> f64 {
    let n = side * side;
    let (mut num, mut den) = (0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let c = cov_model(p, h, a, b, side);
            num += (emp[a * n + b] - c).powi(2);
            den += c * c;
        }
    }
    (num / den).sqrt()
}

#[test]
fn dense_sampler_reproduces_exponential_covariance() {
    let p = FieldParams { mu_star: 3.0, sigma: 1.2, vario_scale: 2.0 };
    let emp = empirical_cov(5, 1.0, p, 10_000, 11);
    let err = frobenius_rel_err(&emp, 5, 1.0, &p);
    assert!(err < 0.05, "relative Frobenius error {err}");
}

#[test]
fn circulant_sampler_reproduces_exponential_covariance() {
    // sides above the dense limit go through the circulant embedding
    let side = 70;
    let h = 1.0;
    let p = FieldParams { mu_star: 0.0, sigma: 1.0, vario_scale: 3.0 };
    let reps = 300;
    let lags = [0usize, 1, 3, 6];
    let mut acc = [0.0; 4];
    let mut count = 0.0;
    for k in 0..reps {
        let f = sample_traffic_field(side, h, p, derive_seed(12, &[k])).unwrap();
        // a block of pixels well inside the grid, horizontal lags
        for r in (10..60).step_by(10) {
            for c in (10..60).step_by(10) {
                let x = f.log_at(r, c);
                for (a, l) in acc.iter_mut().zip(lags) {
                    *a += x * f.log_at(r, c + l);
                }
                count += 1.0;
            }
        }
    }
    for (a, l) in acc.iter().zip(lags) {
        let est = a / count;
        let exact = (-(l as f64) * h / p.vario_scale).exp();
        assert!((est - exact).abs() < 0.06, "lag {l}: {est} vs {exact}");
    }
}

#[test]
fn preset_fields_have_the_stated_log_mean() {
    for preset in [FieldPreset::Urban, FieldPreset::Rural] {
        let p = preset.params();
        let means: Vec<f64> = (0..30)
            .map(|k| {
                let f = sample_traffic_field(20, 0.01, p, derive_seed(13, &[k])).unwrap();
                f.log_density.iter().sum::<f64>() / f.log_density.len() as f64
            })
            .collect();
        let n = means.len() as f64;
        let m = means.iter().sum::<f64>() / n;
        let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((m - p.mu_star).abs() < 4.0 * sd / n.sqrt() + 1e-12, "{preset:?}: {m} vs {}", p.mu_star);
    }
}
