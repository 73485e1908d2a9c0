//! Random-walk Metropolis–Hastings for MGIG on the Cholesky factor.
//!
//! The state is `θ = (ln L_11, …, ln L_rr, L_ij for i > j)` with `x = LLᵀ`.
//! The change of variables contributes `Σ_i (r - i + 2) ln L_ii` (1-based `i`)
//! to the log target. Burn-in adapts the proposal in two phases (scale only,
//! then scale with a covariance estimate); the kernel is frozen afterwards.

use super::mgig::MgigParams;
use super::spd::SpdMatrix;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::stats::{integrated_autocorrelation_time, split_rhat};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Adaptive iterations per chain, discarded.
    pub burn_in: usize,
    /// Fixed thinning stride; `None` picks `ceil(2τ)` from a frozen pilot run.
    pub thin: Option<usize>,
    pub chains: usize,
    pub target_accept: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            burn_in: 20_000,
            thin: None,
            chains: 4,
            target_accept: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McmcDiagnostics {
    pub acceptance_rates: Vec<f64>,
    /// Largest split-R̂ over the monitored summaries (`ln det x`, `tr x`).
    pub split_rhat: f64,
    pub thin: usize,
    pub burn_in: usize,
    /// Integrated autocorrelation time of `ln det x` in the thinned output.
    pub thinned_tau: f64,
    pub effective_draws: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcRun {
    pub draws: Vec<SpdMatrix>,
    pub diagnostics: McmcDiagnostics,
}

/// Log target in Cholesky coordinates.
struct Target {
    r: usize,
    det_power: f64,
    a: DMatrix<f64>,
    chol_b: DMatrix<f64>,
}

impl Target {
    fn new(params: &MgigParams) -> Self {
        Self {
            r: params.dim(),
            det_power: params.det_power(),
            a: params.a.as_matrix().clone(),
            chol_b: params.b.cholesky().l(),
        }
    }

    fn factor(&self, theta: &[f64]) -> DMatrix<f64> {
        let r = self.r;
        let mut l = DMatrix::zeros(r, r);
        let mut k = r;
        for i in 0..r {
            l[(i, i)] = theta[i].exp();
            for j in 0..i {
                l[(i, j)] = theta[k];
                k += 1;
            }
        }
        l
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let r = self.r;
        let l = self.factor(theta);
        let eta_sum: f64 = theta[..r].iter().sum();
        let jac: f64 = theta[..r]
            .iter()
            .enumerate()
            .map(|(i, e)| (r - i + 1) as f64 * e)
            .sum();
        let tr_ax = (&self.a * &l).component_mul(&l).sum();
        let tr_bxinv = match l.solve_lower_triangular(&self.chol_b) {
            Some(m) => m.norm_squared(),
            None => return f64::NEG_INFINITY,
        };
        let v = 2.0 * self.det_power * eta_sum - 0.5 * (tr_ax + tr_bxinv) + jac;
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    }

    fn theta_of(&self, x: &SpdMatrix) -> Vec<f64> {
        let l = x.cholesky().l();
        let r = self.r;
        let mut t: Vec<f64> = (0..r).map(|i| l[(i, i)].ln()).collect();
        for i in 0..r {
            for j in 0..i {
                t.push(l[(i, j)]);
            }
        }
        t
    }

    fn matrix(&self, theta: &[f64]) -> SpdMatrix {
        let l = self.factor(theta);
        SpdMatrix::from_symmetric_part(&l * l.transpose())
            .expect("LLᵀ with positive diagonal is positive definite")
    }
}

struct Chain<'t> {
    target: &'t Target,
    rng: StreamRng,
    theta: Vec<f64>,
    log_p: f64,
    log_scale: f64,
    // lower Cholesky factor of the proposal shape
    shape: DMatrix<f64>,
}

impl<'t> Chain<'t> {
    fn new(target: &'t Target, rng: StreamRng, start: Vec<f64>) -> Self {
        let d = start.len();
        let log_p = target.log_density(&start);
        Self {
            target,
            rng,
            theta: start,
            log_p,
            log_scale: (0.5 / d as f64).sqrt().ln(),
            shape: DMatrix::identity(d, d),
        }
    }

    fn step(&mut self) -> bool {
        let d = self.theta.len();
        let z = DVector::<f64>::from_fn(d, |_, _| self.rng.sample(StandardNormal));
        let delta = &self.shape * z * self.log_scale.exp();
        let prop: Vec<f64> = self
            .theta
            .iter()
            .zip(delta.iter())
            .map(|(t, e)| t + e)
            .collect();
        let lp = self.target.log_density(&prop);
        let accept = lp - self.log_p >= (1.0 - self.rng.random::<f64>()).ln();
        if accept {
            self.theta = prop;
            self.log_p = lp;
        }
        accept
    }

    /// Robbins–Monro updates of the log scale towards `target` acceptance.
    fn adapt(&mut self, iters: usize, target: f64, record: &mut Vec<Vec<f64>>) {
        for k in 0..iters {
            let acc = self.step() as u8 as f64;
            self.log_scale += (acc - target) / (1.0 + k as f64 / 50.0).powf(0.6);
            if k >= iters / 2 {
                record.push(self.theta.clone());
            }
        }
    }

    fn set_shape_from(&mut self, samples: &[Vec<f64>]) {
        let d = self.theta.len();
        if samples.len() <= 2 * d {
            return;
        }
        let n = samples.len() as f64;
        let mean: Vec<f64> = (0..d)
            .map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n)
            .collect();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for s in samples {
            let c = DVector::from_iterator(d, s.iter().zip(&mean).map(|(v, m)| v - m));
            cov += &c * c.transpose();
        }
        cov /= n - 1.0;
        let ridge = 1e-10 * cov.trace().max(1e-300) / d as f64;
        cov += DMatrix::identity(d, d) * ridge;
        if let Some(ch) = cov.cholesky() {
            self.shape = ch.l();
            self.log_scale = (2.38 / (d as f64).sqrt()).ln();
        }
    }
}

fn summaries(target: &Target, theta: &[f64]) -> [f64; 2] {
    let r = target.r;
    let l = target.factor(theta);
    [2.0 * theta[..r].iter().sum::<f64>(), l.norm_squared()]
}

/// `n` thinned post-burn-in MGIG draws pooled over `cfg.chains` chains.
///
/// Chain `c` runs on stream `c` of `seed`; chains start at the mode and
/// run on scoped threads. Diagnostics are always attached; a failed
/// convergence check is reported through `converged`, not as an error.
pub fn mgig_sample(params: &MgigParams, seed: u64, n: usize, cfg: McmcConfig) -> Result<McmcRun> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    if cfg.chains == 0 || cfg.burn_in < 100 {
        return Err(Error::domain(
            "MCMC needs at least one chain and a burn-in of 100 iterations",
        ));
    }
    if cfg.thin == Some(0) {
        return Err(Error::domain("thinning stride must be at least 1"));
    }
    let target = Target::new(params);
    let start = target.theta_of(&params.mode());

    // burn-in and the frozen pilot, per chain
    let tuned: Vec<(Chain, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|c| {
                let (target, start) = (&target, start.clone());
                s.spawn(move || {
                    let mut chain = Chain::new(target, rng::stream(seed, c as u64), start);
                    let mut record = Vec::new();
                    chain.adapt(cfg.burn_in / 2, cfg.target_accept, &mut record);
                    chain.set_shape_from(&record);
                    chain.adapt(
                        cfg.burn_in - cfg.burn_in / 2,
                        cfg.target_accept,
                        &mut Vec::new(),
                    );
                    let tau = if cfg.thin.is_none() {
                        let pilot: Vec<[f64; 2]> = (0..cfg.burn_in / 2)
                            .map(|_| {
                                chain.step();
                                summaries(target, &chain.theta)
                            })
                            .collect();
                        let mut tau = integrated_autocorrelation_time(
                            &pilot.iter().map(|v| v[0]).collect::<Vec<_>>(),
                        );
                        tau = tau.max(integrated_autocorrelation_time(
                            &pilot.iter().map(|v| v[1]).collect::<Vec<_>>(),
                        ));
                        tau
                    } else {
                        1.0
                    };
                    (chain, tau)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread"))
            .collect()
    });
    let thin = cfg
        .thin
        .unwrap_or_else(|| (2.0 * tuned.iter().map(|t| t.1).fold(1.0, f64::max)).ceil() as usize);

    let per_chain: Vec<usize> = (0..cfg.chains)
        .map(|c| n / cfg.chains + usize::from(c < n % cfg.chains))
        .collect();
    let runs: Vec<(Vec<Vec<f64>>, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = tuned
            .into_iter()
            .zip(&per_chain)
            .map(|((mut chain, _), &m)| {
                s.spawn(move || {
                    let mut accepted = 0usize;
                    let mut out = Vec::with_capacity(m);
                    for _ in 0..m {
                        for _ in 0..thin {
                            accepted += chain.step() as usize;
                        }
                        out.push(chain.theta.clone());
                    }
                    let rate = if m == 0 {
                        f64::NAN
                    } else {
                        accepted as f64 / (m * thin) as f64
                    };
                    (out, rate)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread"))
            .collect()
    });

    let sums: Vec<Vec<[f64; 2]>> = runs
        .iter()
        .map(|(t, _)| t.iter().map(|th| summaries(&target, th)).collect())
        .collect();
    let rhat = (0..2)
        .map(|k| {
            split_rhat(
                &sums
                    .iter()
                    .map(|c| c.iter().map(|v| v[k]).collect())
                    .collect::<Vec<Vec<f64>>>(),
            )
        })
        .fold(f64::NAN, f64::max);
    let (mut ess, mut tau_max) = (0.0, 1.0f64);
    for c in &sums {
        if c.len() >= 4 {
            let tau = integrated_autocorrelation_time(&c.iter().map(|v| v[0]).collect::<Vec<_>>());
            tau_max = tau_max.max(tau);
            ess += c.len() as f64 / tau;
        } else {
            ess += c.len() as f64;
        }
    }
    let acceptance_rates: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let converged =
        acceptance_rates.iter().all(|a| (0.1..=0.6).contains(a)) && rhat.is_finite() && rhat < 1.05;
    let draws = runs
        .into_iter()
        .flat_map(|(t, _)| t)
        .map(|th| target.matrix(&th))
        .collect();
    Ok(McmcRun {
        draws,
        diagnostics: McmcDiagnostics {
            acceptance_rates,
            split_rhat: rhat,
            thin,
            burn_in: cfg.burn_in,
            thinned_tau: tau_max,
            effective_draws: ess,
            converged,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{sample, MarginalLaw};
    use crate::matrix::mgig::{
        importance_expectation, isotropic_r2_log_integral, NormalizerConfig,
    };
    use crate::stats::ks_two_sample;

    fn iso(r: usize, c: f64) -> SpdMatrix {
        SpdMatrix::scaled_identity(r, c).unwrap()
    }

    #[test]
    fn cholesky_jacobian_by_finite_differences() {
        // |∂(x_11, x_22, x_12)/∂θ| = 2^r e^{3θ_1 + 2θ_2} at r = 2
        let params = MgigParams::new(1.3, iso(2, 1.0), iso(2, 1.0)).unwrap();
        let t = Target::new(&params);
        let th = [0.1, -0.3, 0.4];
        let coords = |th: &[f64]| {
            let x = t.matrix(th);
            let m = x.as_matrix();
            [m[(0, 0)], m[(1, 1)], m[(0, 1)]]
        };
        let h = 1e-6;
        let mut jac = DMatrix::<f64>::zeros(3, 3);
        for k in 0..3 {
            let (mut up, mut down) = (th, th);
            up[k] += h;
            down[k] -= h;
            let (fu, fd) = (coords(&up), coords(&down));
            for i in 0..3 {
                jac[(i, k)] = (fu[i] - fd[i]) / (2.0 * h);
            }
        }
        let expect = 4.0 * (3.0 * th[0] + 2.0 * th[1]).exp();
        assert!((jac.determinant().abs() / expect - 1.0).abs() < 1e-8);
        let x = t.matrix(&th);
        let lhs = t.log_density(&th);
        assert!(
            (lhs - params.log_unnormalized(&x).unwrap() - expect.ln() + 4.0f64.ln()).abs() < 1e-12
        );
    }

    #[test]
    fn dimension_one_chain_matches_exact_sampler() {
        let params = MgigParams::new(0.7, iso(1, 2.0 * 1.5), iso(1, 2.0 * 0.8)).unwrap();
        let run = mgig_sample(&params, 3, 10_000, McmcConfig::default()).unwrap();
        assert!(run.diagnostics.converged, "{:?}", run.diagnostics);
        let xs: Vec<f64> = run.draws.iter().map(|m| m.as_matrix()[(0, 0)]).collect();
        let exact = sample(&MarginalLaw::gig(0.7, 1.5, 0.8).unwrap(), 4, 10_000).unwrap();
        let ks = ks_two_sample(&xs, &exact);
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn dimension_one_reciprocal_draws() {
        // scalar reciprocity: 1/X for X ~ GIG(p, a/2, b/2) is GIG(-p, b/2, a/2)
        let params = MgigParams::new(1.2, iso(1, 1.0), iso(1, 3.0)).unwrap();
        let recip = MgigParams::new(-1.2, iso(1, 3.0), iso(1, 1.0)).unwrap();
        let a = mgig_sample(&params, 8, 5_000, McmcConfig::default()).unwrap();
        let b = mgig_sample(&recip, 9, 5_000, McmcConfig::default()).unwrap();
        let inv: Vec<f64> = a
            .draws
            .iter()
            .map(|m| 1.0 / m.as_matrix()[(0, 0)])
            .collect();
        let direct: Vec<f64> = b.draws.iter().map(|m| m.as_matrix()[(0, 0)]).collect();
        assert!(ks_two_sample(&inv, &direct).p_value > 0.01);
    }

    #[test]
    fn log_det_expectation_r2() {
        let (p, a0, b0) = (3.0, 1.0, 1.0);
        let params = MgigParams::new(p, iso(2, a0), iso(2, b0)).unwrap();
        let run = mgig_sample(&params, 11, 5_000, McmcConfig::default()).unwrap();
        assert!(run.diagnostics.converged, "{:?}", run.diagnostics);
        let ld: Vec<f64> = run.draws.iter().map(SpdMatrix::log_det).collect();
        let mean = ld.iter().sum::<f64>() / ld.len() as f64;
        let var = ld.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ld.len() - 1) as f64;
        let se = (var / run.diagnostics.effective_draws).sqrt();
        // quadrature oracle: ratio of two eigenvalue integrals
        let (num, sign) = isotropic_r2_log_integral(p, a0, b0, |l1, l2| (l1 * l2).ln()).unwrap();
        let (den, _) = isotropic_r2_log_integral(p, a0, b0, |_, _| 1.0).unwrap();
        let exact = sign * (num - den).exp();
        assert!(
            (mean - exact).abs() < 4.0 * se,
            "{mean} vs {exact} (se {se})"
        );
        // importance-sampling oracle agrees with the quadrature
        let (is_mean, is_se) = importance_expectation(
            &params,
            NormalizerConfig {
                draws: 50_000,
                seed: 5,
            },
            |x| x.determinant().ln(),
        )
        .unwrap();
        assert!((is_mean - exact).abs() < 4.0 * is_se);
    }

    #[test]
    fn reproducible() {
        let params = MgigParams::new(0.5, iso(2, 1.0), iso(2, 2.0)).unwrap();
        let cfg = McmcConfig {
            burn_in: 2_000,
            ..McmcConfig::default()
        };
        let a = mgig_sample(&params, 1, 50, cfg).unwrap();
        let b = mgig_sample(&params, 1, 50, cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.draws.len(), 50);
    }
}
