//! Monte-Carlo detailed balance: draw independent inputs from the spec's
//! laws, map them, and test the images against the claimed laws (KS) and
//! for mutual independence (distance correlation, permutation p-value).

use super::transport::{InputPoint, Transport};
use super::{BalanceSpec, PairLaws, Variant};
use crate::dist::{LawSampler, MarginalLaw};
use crate::error::{Error, Result};
use crate::maps::{f_dk, psi, PositivePair};
use crate::matrix::{
    f_dk_matrix, mgig_sample, vech, LogNormalizer, McmcConfig, McmcDiagnostics, McmcRun,
    MgigParams, NormalizerConfig, SpdMatrix, SpdPair,
};
use crate::report::SCHEMA_VERSION;
use crate::rng;
use crate::stats::{
    dcor_permutation_test, dcor_vectors_permutation_test, ks_one_sample, ks_two_sample_effective,
    DcorTest,
};
use rand_distr::Distribution;
use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

/// Significance level of every test.
pub const ALPHA_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceOptions {
    pub permutations: usize,
    /// Rescale `c₁` (matrix: `a`) in the second input law only.
    pub perturb_second_c1: Option<f64>,
    pub mcmc: McmcConfig,
    pub normalizer: NormalizerConfig,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        Self {
            permutations: 499,
            perturb_second_c1: None,
            mcmc: McmcConfig::default(),
            normalizer: NormalizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsEntry {
    pub marginal: String,
    pub law: String,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceEntry {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerEntry {
    pub target: String,
    pub draws: usize,
    pub diagnostics: McmcDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub schema_version: u32,
    pub spec: BalanceSpec,
    pub seed: u64,
    /// Requested sample size (effective size for the matrix variant).
    pub n: usize,
    pub perturbation: Option<f64>,
    pub max_log_residual: f64,
    pub residual_tolerance: f64,
    pub residual_pass: bool,
    pub ks: Vec<KsEntry>,
    pub independence: IndependenceEntry,
    pub samplers: Vec<SamplerEntry>,
    pub normalizers: Option<Vec<LogNormalizer>>,
    pub pass: bool,
}

impl BalanceReport {
    pub fn ks_entry(&self, marginal: &str) -> Option<&KsEntry> {
        self.ks.iter().find(|k| k.marginal == marginal)
    }
}

fn independence(t: DcorTest) -> IndependenceEntry {
    IndependenceEntry {
        statistic: t.statistic,
        p_value: t.p_value,
        permutations: t.permutations,
        pass: t.p_value > ALPHA_LEVEL,
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn ks_against(name: &str, law: &MarginalLaw, xs: &[f64]) -> Result<KsEntry> {
    let xs = sorted(xs.to_vec());
    let t = ks_one_sample(&law.cdf_sorted(&xs)?);
    Ok(KsEntry {
        marginal: name.into(),
        law: law.to_string(),
        statistic: t.statistic,
        p_value: t.p_value,
        pass: t.p_value > ALPHA_LEVEL,
    })
}

/// Detailed-balance report at `n` draws with default options.
pub fn monte_carlo_balance(spec: &BalanceSpec, seed: u64, n: usize) -> Result<BalanceReport> {
    monte_carlo_balance_with(spec, seed, n, BalanceOptions::default())
}

pub fn monte_carlo_balance_with(
    spec: &BalanceSpec,
    seed: u64,
    n: usize,
    opts: BalanceOptions,
) -> Result<BalanceReport> {
    if n < 1000 {
        return Err(Error::domain(format!(
            "Monte-Carlo balance needs n >= 1000, got {n}"
        )));
    }
    if let Some(k) = opts.perturb_second_c1 {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::domain(format!(
                "perturbation factor must be positive, got {k}"
            )));
        }
    }
    let inputs = spec.input_laws_perturbed(opts.perturb_second_c1.unwrap_or(1.0))?;
    let transport = Transport::new(spec, opts.normalizer)?;
    let mut report = match (inputs, spec.output_laws()?) {
        (PairLaws::Scalar(inp), PairLaws::Scalar(out)) => {
            scalar_balance(spec, &transport, inp, out, seed, n, &opts)?
        }
        (PairLaws::Matrix(inp), PairLaws::Matrix(out)) => {
            matrix_balance(spec, &transport, inp, out, seed, n, &opts)?
        }
        _ => unreachable!("input and output laws share a family"),
    };
    report.residual_tolerance = transport.tolerance();
    report.residual_pass = report.max_log_residual <= report.residual_tolerance;
    report.normalizers = transport.normalizers();
    report.perturbation = opts.perturb_second_c1;
    report.pass = report.residual_pass
        && report.ks.iter().all(|k| k.pass)
        && report.independence.pass
        && report.samplers.iter().all(|s| s.diagnostics.converged);
    Ok(report)
}

fn empty_report(spec: &BalanceSpec, seed: u64, n: usize) -> BalanceReport {
    BalanceReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        seed,
        n,
        perturbation: None,
        max_log_residual: 0.0,
        residual_tolerance: 0.0,
        residual_pass: false,
        ks: Vec::new(),
        independence: IndependenceEntry {
            statistic: f64::NAN,
            p_value: f64::NAN,
            permutations: 0,
            pass: false,
        },
        samplers: Vec::new(),
        normalizers: None,
        pass: false,
    }
}

fn scalar_balance(
    spec: &BalanceSpec,
    transport: &Transport,
    inp: [MarginalLaw; 2],
    out: [MarginalLaw; 2],
    seed: u64,
    n: usize,
    opts: &BalanceOptions,
) -> Result<BalanceReport> {
    // streams: 0 first input, 1 second input, 2 permutations
    let draw = |law: &MarginalLaw, s: u64| -> Result<Vec<f64>> {
        let sampler = LawSampler::new(law)?;
        Ok(sampler.sample_iter(rng::stream(seed, s)).take(n).collect())
    };
    let (xs, ys) = (draw(&inp[0], 0)?, draw(&inp[1], 1)?);
    let mut us = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for (&x, &y) in xs.iter().zip(&ys) {
        let p = PositivePair::raw(x, y);
        let img = match spec.variant {
            Variant::ScalarFdk => f_dk(spec.map, p),
            _ => psi(spec.map, p),
        };
        worst = worst.max(transport.residual(&InputPoint::Scalar(p))?);
        us.push(img.first);
        vs.push(img.second);
    }
    let names = match spec.variant {
        Variant::ScalarFdk => ["U", "V"],
        _ => ["S", "T"],
    };
    let ks = vec![
        ks_against(names[0], &out[0], &us)?,
        ks_against(names[1], &out[1], &vs)?,
    ];
    // independence is invariant under the monotone map ln, which tames the tails
    let (lu, lv): (Vec<f64>, Vec<f64>) = us.iter().zip(&vs).map(|(u, v)| (u.ln(), v.ln())).unzip();
    let dc = dcor_permutation_test(&lu, &lv, opts.permutations, &mut rng::stream(seed, 2));
    Ok(BalanceReport {
        max_log_residual: worst,
        ks,
        independence: independence(dc),
        ..empty_report(spec, seed, n)
    })
}

/// MCMC draws whose effective size reaches `n`; one top-up run if the
/// first falls short.
fn draw_effective(params: &MgigParams, seed: u64, n: usize, mcmc: McmcConfig) -> Result<McmcRun> {
    let run = mgig_sample(params, seed, n, mcmc)?;
    let ess = run.diagnostics.effective_draws;
    if ess >= n as f64 || ess <= 0.0 {
        return Ok(run);
    }
    let m = (1.05 * n as f64 * n as f64 / ess).ceil() as usize;
    mgig_sample(params, seed, m, mcmc)
}

fn log_vech(m: &SpdMatrix) -> Vec<f64> {
    vech(&m.log())
}

fn matrix_balance(
    spec: &BalanceSpec,
    transport: &Transport,
    inp: [MgigParams; 2],
    out: [MgigParams; 2],
    seed: u64,
    n: usize,
    opts: &BalanceOptions,
) -> Result<BalanceReport> {
    // job seeds: 0, 1 inputs; 2, 3 reference draws of the claimed laws; 4 permutations
    let runs: Vec<McmcRun> = [&inp[0], &inp[1], &out[0], &out[1]]
        .iter()
        .enumerate()
        .map(|(k, p)| draw_effective(p, rng::derive_seed(seed, k as u64), n, opts.mcmc))
        .collect::<Result<_>>()?;
    let m = runs[0].draws.len().min(runs[1].draws.len());
    let mut us = Vec::with_capacity(m);
    let mut vs = Vec::with_capacity(m);
    let mut worst = 0.0f64;
    for (x, y) in runs[0].draws.iter().zip(&runs[1].draws) {
        let pair = SpdPair::new(x.clone(), y.clone())?;
        worst = worst.max(transport.residual(&InputPoint::Matrix(pair.clone()))?);
        let uv = f_dk_matrix(spec.map, &pair)?;
        us.push(uv.x);
        vs.push(uv.y);
    }
    // effective size of the images: the less mixed of the two input runs
    let ess_in =
        |run: &McmcRun| run.diagnostics.effective_draws * m as f64 / run.draws.len() as f64;
    let ess_img = ess_in(&runs[0]).min(ess_in(&runs[1]));
    let mut ks = Vec::new();
    for (name, imgs, reference, law) in
        [("U", &us, &runs[2], &out[0]), ("V", &vs, &runs[3], &out[1])]
    {
        let ess_ref = reference.diagnostics.effective_draws;
        for (stat, f) in [
            ("log_det", SpdMatrix::log_det as fn(&SpdMatrix) -> f64),
            ("trace", SpdMatrix::trace),
        ] {
            let a: Vec<f64> = imgs.iter().map(f).collect();
            let b: Vec<f64> = reference.draws.iter().map(f).collect();
            let t = ks_two_sample_effective(&a, &b, ess_img, ess_ref);
            ks.push(KsEntry {
                marginal: format!("{name}.{stat}"),
                law: format!("MGIG({}, {}, {})", law.p, law.a, law.b),
                statistic: t.statistic,
                p_value: t.p_value,
                pass: t.p_value > ALPHA_LEVEL,
            });
        }
    }
    let lu: Vec<Vec<f64>> = us.iter().map(log_vech).collect();
    let lv: Vec<Vec<f64>> = vs.iter().map(log_vech).collect();
    let dc = dcor_vectors_permutation_test(
        &lu,
        &lv,
        opts.permutations,
        &mut rng::stream(rng::derive_seed(seed, 4), 0),
    );
    let targets = ["X", "Y", "U_reference", "V_reference"];
    let samplers = runs
        .into_iter()
        .zip(targets)
        .map(|(r, t)| SamplerEntry {
            target: t.into(),
            draws: r.draws.len(),
            diagnostics: r.diagnostics,
        })
        .collect();
    Ok(BalanceReport {
        max_log_residual: worst,
        ks,
        independence: independence(dc),
        samplers,
        ..empty_report(spec, seed, n)
    })
}

/// Type-I detailed balance at the symmetric point `c₁ = c₂ = c`: the image
/// laws coincide with the input laws, so the images are tested against the
/// input marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeOneReport {
    pub laws_coincide: bool,
    pub report: BalanceReport,
    pub pass: bool,
}

pub fn type_one_check(
    alpha: f64,
    beta: f64,
    c: f64,
    lambda: f64,
    seed: u64,
    n: usize,
) -> Result<TypeOneReport> {
    let spec = BalanceSpec::scalar_fdk(alpha, beta, c, c, lambda)?;
    let laws_coincide = spec.input_laws()? == spec.output_laws()?;
    let report = monte_carlo_balance(&spec, seed, n)?;
    let pass = laws_coincide && report.pass;
    Ok(TypeOneReport {
        laws_coincide,
        report,
        pass,
    })
}

/// Calibration of the independence test under a true null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub repetitions: usize,
    pub n: usize,
    pub permutations: usize,
    pub p_values: Vec<f64>,
    pub rejections: usize,
    /// `P(Binomial(repetitions, 0.01) ≥ rejections)`.
    pub binomial_tail: f64,
    pub pass: bool,
}

/// Runs `repetitions` independence tests on two disjoint GIG streams. The
/// p-value is super-uniform if the number of rejections at level 1% is not
/// significantly above that of a Binomial(repetitions, 0.01) count.
pub fn dcor_calibration(
    seed: u64,
    repetitions: usize,
    n: usize,
    permutations: usize,
) -> Result<CalibrationReport> {
    let lx = LawSampler::new(&MarginalLaw::gig(-0.5, 1.0, 1.0)?)?;
    let ly = LawSampler::new(&MarginalLaw::gig(1.5, 2.0, 0.5)?)?;
    let p_values: Vec<f64> = (0..repetitions)
        .map(|k| {
            let s = rng::derive_seed(seed, k as u64);
            let x: Vec<f64> = (&lx).sample_iter(rng::stream(s, 0)).take(n).collect();
            let y: Vec<f64> = (&ly).sample_iter(rng::stream(s, 1)).take(n).collect();
            dcor_permutation_test(&x, &y, permutations, &mut rng::stream(s, 2)).p_value
        })
        .collect();
    let rejections = p_values.iter().filter(|&&p| p <= ALPHA_LEVEL).count();
    let binom =
        Binomial::new(ALPHA_LEVEL, repetitions as u64).map_err(|e| Error::domain(e.to_string()))?;
    let binomial_tail = if rejections == 0 {
        1.0
    } else {
        binom.sf(rejections as u64 - 1)
    };
    Ok(CalibrationReport {
        repetitions,
        n,
        permutations,
        p_values,
        rejections,
        binomial_tail,
        pass: binomial_tail > ALPHA_LEVEL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_fdk_small_run() {
        let spec = BalanceSpec::scalar_fdk(1.0, 2.0, 1.0, 1.0, 0.5).unwrap();
        let r = monte_carlo_balance(&spec, 7, 5_000).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r, monte_carlo_balance(&spec, 7, 5_000).unwrap());
        assert!(monte_carlo_balance(&spec, 7, 999).is_err());
    }

    #[test]
    fn negative_control_is_detected() {
        let spec = BalanceSpec::scalar_fdk(1.0, 2.0, 1.0, 1.0, 0.5).unwrap();
        let opts = BalanceOptions {
            perturb_second_c1: Some(2.0),
            permutations: 99,
            ..Default::default()
        };
        let r = monte_carlo_balance_with(&spec, 3, 20_000, opts).unwrap();
        assert!(r.ks_entry("U").unwrap().p_value < ALPHA_LEVEL, "{r:?}");
        assert!(!r.pass);
    }

    #[test]
    fn classical_limit() {
        let spec = BalanceSpec::scalar_psi(1.0, 0.0, 1.0, 2.0, 0.8).unwrap();
        let r = monte_carlo_balance(&spec, 5, 5_000).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn calibration_small() {
        let c = dcor_calibration(1, 20, 200, 99).unwrap();
        assert!(c.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(c.pass);
    }
}
