//! Means, standard errors and Markov-chain convergence summaries.

/// Sample mean and its standard error (i.i.d. assumption).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn variance(xs: &[f64]) -> f64 {
    let (m, _) = mean_se(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Lag-`k` autocorrelation estimator with the full-sample mean and `1/n` normalisation.
struct Acf<'a> {
    xs: &'a [f64],
    mean: f64,
    c0: f64,
}

impl<'a> Acf<'a> {
    fn new(xs: &'a [f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let c0 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self { xs, mean, c0 }
    }

    fn at(&self, k: usize) -> f64 {
        let n = self.xs.len();
        if self.c0 <= 0.0 || k >= n {
            return 0.0;
        }
        let m = self.mean;
        let ck: f64 = self.xs[..n - k]
            .iter()
            .zip(&self.xs[k..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum();
        ck / n as f64 / self.c0
    }
}

/// Autocorrelations at lags `0..=max_lag`.
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let acf = Acf::new(xs);
    (0..=max_lag.min(xs.len().saturating_sub(1)))
        .map(|k| acf.at(k))
        .collect()
}

/// Integrated autocorrelation time by Geyer's initial positive sequence.
pub fn integrated_autocorrelation_time(xs: &[f64]) -> f64 {
    let acf = Acf::new(xs);
    let mut tau = -1.0;
    let mut k = 0;
    while k + 1 < xs.len() {
        let pair = acf.at(k) + acf.at(k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    tau.max(1.0)
}

/// Effective sample size of one chain.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    xs.len() as f64 / integrated_autocorrelation_time(xs)
}

/// Split-chain potential scale reduction over several chains.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[c.len() - h..]]
        })
        .filter(|h| h.len() >= 2)
        .collect();
    if halves.len() < 2 {
        return f64::NAN;
    }
    let n = halves[0].len() as f64;
    let means: Vec<f64> = halves
        .iter()
        .map(|h| h.iter().sum::<f64>() / h.len() as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let b = n * means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (means.len() as f64 - 1.0);
    let w = halves.iter().map(|h| variance(h)).sum::<f64>() / halves.len() as f64;
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}
