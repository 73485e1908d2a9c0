//! Kolmogorov–Smirnov tests.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Survival function `Q(λ) = P(K > λ)` of the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series converges fast for small λ
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp())
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value with Stephens' small-sample correction.
fn p_value(d: f64, n_eff: f64) -> f64 {
    let r = n_eff.sqrt();
    kolmogorov_survival((r + 0.12 + 0.11 / r) * d)
}

/// One-sample test from the CDF values `F(x_(i))` at the sorted sample.
pub fn ks_one_sample(sorted_cdf: &[f64]) -> KsTest {
    let n = sorted_cdf.len();
    let nf = n as f64;
    let d = sorted_cdf
        .iter()
        .enumerate()
        .map(|(i, &f)| ((i + 1) as f64 / nf - f).max(f - i as f64 / nf))
        .fold(0.0, f64::max);
    KsTest {
        statistic: d,
        p_value: p_value(d, nf),
        n,
    }
}

fn two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Two-sample test; inputs need not be sorted.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let d = two_sample_statistic(a, b);
    KsTest {
        statistic: d,
        p_value: p_value(d, n * m / (n + m)),
        n: a.len().min(b.len()),
    }
}

/// Two-sample test for autocorrelated samples: the p-value uses the
/// effective sizes `ess_a`, `ess_b` in place of the sample lengths.
pub fn ks_two_sample_effective(a: &[f64], b: &[f64], ess_a: f64, ess_b: f64) -> KsTest {
    let d = two_sample_statistic(a, b);
    let (n, m) = (ess_a.min(a.len() as f64), ess_b.min(b.len() as f64));
    KsTest {
        statistic: d,
        p_value: p_value(d, n * m / (n + m)),
        n: a.len().min(b.len()),
    }
}
