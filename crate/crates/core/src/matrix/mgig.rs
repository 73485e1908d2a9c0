//! The matrix GIG law on `Ω₊`: density
//! `det(x)^{p-(r+1)/2} e^{-(tr(ax) + tr(bx⁻¹))/2} / K_p(a, b)` with respect to
//! Lebesgue measure `∏_{i≤j} dx_ij` on symmetric matrices.
//!
//! `K_p` is exact for `r = 1` (a scalar GIG constant) and estimated by
//! importance sampling from a Wishart proposal on `X` or on `X⁻¹` otherwise.

use super::spd::SpdMatrix;
use crate::dist::{GigParams, Kernel};
use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::rng;
use crate::specfun::ln_gamma;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;

/// Parameters `(p, a, b)` of MGIG(p, a, b).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgigParams {
    pub p: f64,
    pub a: SpdMatrix,
    pub b: SpdMatrix,
}

impl MgigParams {
    pub fn new(p: f64, a: SpdMatrix, b: SpdMatrix) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::domain(format!("MGIG order must be finite, got {p}")));
        }
        if a.dim() != b.dim() {
            return Err(Error::domain(format!(
                "MGIG parameter dimensions differ: {} vs {}",
                a.dim(),
                b.dim()
            )));
        }
        Ok(Self { p, a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Exponent `p - (r+1)/2` of `det x`.
    pub fn det_power(&self) -> f64 {
        self.p - (self.dim() as f64 + 1.0) / 2.0
    }

    /// `(p-(r+1)/2) ln det x - (tr(ax) + tr(bx⁻¹))/2`.
    pub fn log_unnormalized(&self, x: &SpdMatrix) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::domain(format!(
                "point has dimension {}, law has {}",
                x.dim(),
                self.dim()
            )));
        }
        let xinv = x.cholesky().inverse();
        let tr_ax = self.a.as_matrix().component_mul(x.as_matrix()).sum();
        let tr_bxinv = self.b.as_matrix().component_mul(&xinv).sum();
        Ok(self.det_power() * x.log_det() - 0.5 * (tr_ax + tr_bxinv))
    }

    /// Maximiser of the density: `a^{-1/2} z a^{-1/2}` with
    /// `z = qI + (q²I + a^{1/2} b a^{1/2})^{1/2}`, `q = p - (r+1)/2`.
    pub fn mode(&self) -> SpdMatrix {
        let (z, ah_inv) = self.whitened_mode();
        SpdMatrix::from_symmetric_part(&ah_inv * z * &ah_inv).expect("mode is positive definite")
    }

    /// `(z, a^{-1/2})` from [`MgigParams::mode`].
    fn whitened_mode(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let r = self.dim();
        let q = self.det_power();
        let ah = self.a.sqrt();
        let c = ah.as_matrix() * self.b.as_matrix() * ah.as_matrix();
        let inner = SpdMatrix::from_symmetric_part(c + DMatrix::identity(r, r) * (q * q))
            .expect("q²I + C is positive definite");
        let z = DMatrix::identity(r, r) * q + inner.sqrt().into_matrix();
        (
            z,
            ah.inverse().expect("a is well conditioned").into_matrix(),
        )
    }

    /// The scalar law this reduces to when `r = 1`: GIG(p, a/2, b/2).
    pub fn scalar_law(&self) -> Option<GigParams> {
        (self.dim() == 1)
            .then(|| {
                GigParams::new(
                    self.p,
                    0.5 * self.a.as_matrix()[(0, 0)],
                    0.5 * self.b.as_matrix()[(0, 0)],
                )
                .ok()
            })
            .flatten()
    }
}

/// Importance-sampling budget for `ln K_p(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizerConfig {
    pub draws: usize,
    pub seed: u64,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self {
            draws: 200_000,
            seed: 0x4d47_4947,
        }
    }
}

/// `ln K_p(a, b)` with its Monte-Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogNormalizer {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
}

const KAPPA_GRID: [f64; 4] = [0.35, 0.5, 0.65, 0.8];
const PILOT_DRAWS: usize = 4_000;

/// Wishart proposal `W_r(n, (κa)⁻¹)` with `n` chosen so that its mode matches
/// the target mode in trace.
struct WishartProposal {
    r: usize,
    df: f64,
    kappa: f64,
    // Cholesky factor of Σ = (κa)⁻¹
    l_sigma: DMatrix<f64>,
    // Cholesky factor of L_Σ⁻¹ b L_Σ⁻ᵀ
    g: DMatrix<f64>,
    chi: Vec<ChiSquared<f64>>,
    // terms of ln q/w that do not depend on the draw
    offset: f64,
    log_det_sigma: f64,
    det_power: f64,
}

impl WishartProposal {
    fn new(params: &MgigParams, kappa: f64) -> Result<Self> {
        let r = params.dim();
        let rf = r as f64;
        let (z, _) = params.whitened_mode();
        let df = rf + 1.0 + kappa * z.trace() / rf;
        let sigma = SpdMatrix::from_symmetric_part(params.a.inverse()?.into_matrix() / kappa)?;
        let l_sigma = sigma.cholesky().l();
        let l_inv = l_sigma
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NotPositiveDefinite("Wishart scale".into()))?;
        let bt = SpdMatrix::from_symmetric_part(&l_inv * params.b.as_matrix() * l_inv.transpose())?;
        let g = bt.cholesky().l();
        let chi = (0..r)
            .map(|i| {
                ChiSquared::new(df - i as f64)
                    .map_err(|e| Error::domain(format!("Wishart df: {e}")))
            })
            .collect::<Result<_>>()?;
        let log_det_sigma = sigma.log_det();
        let log_gamma_r = rf * (rf - 1.0) / 4.0 * std::f64::consts::PI.ln()
            + (0..r).map(|i| ln_gamma(0.5 * (df - i as f64))).sum::<f64>();
        let offset =
            0.5 * df * rf * std::f64::consts::LN_2 + 0.5 * df * log_det_sigma + log_gamma_r;
        Ok(Self {
            r,
            df,
            kappa,
            l_sigma,
            g,
            chi,
            offset,
            log_det_sigma,
            det_power: params.det_power(),
        })
    }

    /// One Bartlett draw `X = L_Σ A Aᵀ L_Σᵀ` and `ln q(X) - ln w(X)`.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (DMatrix<f64>, f64) {
        let r = self.r;
        let mut a = DMatrix::<f64>::zeros(r, r);
        for i in 0..r {
            a[(i, i)] = self.chi[i].sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let log_det = self.log_det_sigma + 2.0 * (0..r).map(|i| a[(i, i)].ln()).sum::<f64>();
        // tr(aX) = |A|²/κ since L_Σᵀ a L_Σ = I/κ
        let tr_ax = a.norm_squared() / self.kappa;
        // tr(bX⁻¹) = |A⁻¹ G|²
        let ainv_g = a
            .solve_lower_triangular(&self.g)
            .expect("Bartlett factor has positive diagonal");
        let tr_bxinv = ainv_g.norm_squared();
        let wishart_power = 0.5 * (self.df - r as f64 - 1.0);
        let log_w = (self.det_power - wishart_power) * log_det
            - 0.5 * (1.0 - self.kappa) * tr_ax
            - 0.5 * tr_bxinv
            + self.offset;
        let l_a = &self.l_sigma * &a;
        (&l_a * l_a.transpose(), log_w)
    }
}

/// Self-normalised weights: returns `(ln mean weight, se of that, weights / max)`.
fn summarize_log_weights(log_w: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = log_w.len() as f64;
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (top + mean.ln(), (var / n).sqrt() / mean, w)
}

/// A Wishart proposal on `X`, or on `X⁻¹` when `inverted`. In the latter case
/// it targets `det(y)^{-p-(r+1)/2} e^{-(tr(by) + tr(ay⁻¹))/2}`, which is the
/// density of `X⁻¹` including the inversion Jacobian `det(y)^{-(r+1)}`.
struct Proposal {
    wishart: WishartProposal,
    inverted: bool,
}

impl Proposal {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (DMatrix<f64>, f64) {
        let (y, lw) = self.wishart.draw(rng);
        if self.inverted {
            let x = y
                .cholesky()
                .expect("Wishart draw is positive definite")
                .inverse();
            (x, lw)
        } else {
            (y, lw)
        }
    }
}

/// Picks orientation and `κ` by the smallest pilot relative standard error.
fn select_proposal(params: &MgigParams, seed: u64) -> Result<Proposal> {
    let flipped = MgigParams::new(-params.p, params.b.clone(), params.a.clone())?;
    let mut best: Option<(f64, Proposal)> = None;
    for (o, (inverted, target)) in [(false, params), (true, &flipped)].into_iter().enumerate() {
        for (k, &kappa) in KAPPA_GRID.iter().enumerate() {
            let wishart = WishartProposal::new(target, kappa)?;
            let mut rng = rng::stream(rng::derive_seed(seed, 1), (o * KAPPA_GRID.len() + k) as u64);
            let log_w: Vec<f64> = (0..PILOT_DRAWS).map(|_| wishart.draw(&mut rng).1).collect();
            let (_, rel_se, _) = summarize_log_weights(&log_w);
            if best.as_ref().is_none_or(|(s, _)| rel_se < *s) {
                best = Some((rel_se, Proposal { wishart, inverted }));
            }
        }
    }
    Ok(best.expect("non-empty grid").1)
}

/// `ln K_p(a, b)`: closed form at `r = 1`, importance sampling otherwise.
pub fn log_normalizer(params: &MgigParams, cfg: NormalizerConfig) -> Result<LogNormalizer> {
    if let Some(g) = params.scalar_law() {
        return Ok(LogNormalizer {
            value: g.log_normalizer()?,
            std_error: 0.0,
            draws: 0,
        });
    }
    if cfg.draws < 2 {
        return Err(Error::domain("normalizer needs at least 2 draws"));
    }
    let prop = select_proposal(params, cfg.seed)?;
    let mut rng = rng::stream(cfg.seed, 0);
    let log_w: Vec<f64> = (0..cfg.draws).map(|_| prop.draw(&mut rng).1).collect();
    let (value, std_error, _) = summarize_log_weights(&log_w);
    Ok(LogNormalizer {
        value,
        std_error,
        draws: cfg.draws,
    })
}

/// Self-normalised importance-sampling estimate of `E[f(X)]` with its
/// delta-method standard error.
pub fn importance_expectation(
    params: &MgigParams,
    cfg: NormalizerConfig,
    f: impl Fn(&DMatrix<f64>) -> f64,
) -> Result<(f64, f64)> {
    let prop = select_proposal(params, cfg.seed)?;
    let mut rng = rng::stream(cfg.seed, 0);
    let (vals, log_w): (Vec<f64>, Vec<f64>) = (0..cfg.draws)
        .map(|_| {
            let (x, lw) = prop.draw(&mut rng);
            (f(&x), lw)
        })
        .unzip();
    let (_, _, w) = summarize_log_weights(&log_w);
    let sw: f64 = w.iter().sum();
    let mean = w.iter().zip(&vals).map(|(w, v)| w * v).sum::<f64>() / sw;
    let var = w
        .iter()
        .zip(&vals)
        .map(|(w, v)| w * w * (v - mean) * (v - mean))
        .sum::<f64>()
        / (sw * sw);
    Ok((mean, var.sqrt()))
}

/// An MGIG law together with its (estimated) normaliser.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mgig {
    pub params: MgigParams,
    pub normalizer: LogNormalizer,
}

impl Mgig {
    pub fn new(params: MgigParams, cfg: NormalizerConfig) -> Result<Self> {
        let normalizer = log_normalizer(&params, cfg)?;
        Ok(Self { params, normalizer })
    }

    pub fn log_pdf(&self, x: &SpdMatrix) -> Result<f64> {
        if let Some(g) = self.params.scalar_law() {
            return crate::dist::MarginalLaw::Gig(g).log_pdf(x.as_matrix()[(0, 0)]);
        }
        Ok(self.params.log_unnormalized(x)? - self.normalizer.value)
    }
}

/// Normalised MGIG log density, with the normaliser from the default
/// importance-sampling budget.
pub fn mgig_log_pdf(params: &MgigParams, x: &SpdMatrix) -> Result<f64> {
    Mgig::new(params.clone(), NormalizerConfig::default())?.log_pdf(x)
}

/// `∫ f(λ₁, λ₂) det(x)^{p-3/2} e^{-(a₀ tr x + b₀ tr x⁻¹)/2} dx` over 2×2 SPD
/// matrices, by nested quadrature over the eigenvalues: the volume element is
/// `(π/2)|λ₁ - λ₂| dλ₁ dλ₂ dO`. `f` must be symmetric. Returns `(ln |integral|, sign)`.
pub fn isotropic_r2_log_integral(
    p: f64,
    a0: f64,
    b0: f64,
    f: impl Fn(f64, f64) -> f64,
) -> Result<(f64, f64)> {
    if !(a0 > 0.0 && b0 > 0.0) {
        return Err(Error::domain("isotropic parameters must be positive"));
    }
    // log density of t = ln λ for one eigenvalue: (q+1)t - (a₀e^t + b₀e^{-t})/2
    let q = p - 1.5;
    let lo_k = Kernel {
        order: q + 1.0,
        a: 0.5 * a0,
        b: 0.5 * b0,
        log_norm: 0.0,
    };
    let hi_k = Kernel {
        order: q + 2.0,
        ..lo_k
    };
    let (l1, h1) = lo_k.level_points(60.0);
    let (l2, h2) = hi_k.level_points(60.0);
    let (lo, hi) = (l1.min(l2), h1.max(h2));
    let peak = lo_k.log_t(lo_k.mode_t());
    let g = |t: f64| (lo_k.log_t(t) - peak).exp();
    let outer = integrate(
        |t1| {
            let (e1, g1) = (t1.exp(), g(t1));
            if g1 == 0.0 {
                return 0.0;
            }
            let inner = integrate(
                |t2| (e1 - t2.exp()) * g(t2) * f(e1, t2.exp()),
                lo,
                t1,
                0.0,
                1e-13,
                400,
            );
            g1 * inner.value
        },
        lo,
        hi,
        0.0,
        1e-12,
        400,
    );
    let v = std::f64::consts::PI * outer.value;
    Ok((v.abs().ln() + 2.0 * peak, v.signum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::random_spd_pair;

    fn iso(r: usize, c: f64) -> SpdMatrix {
        SpdMatrix::scaled_identity(r, c).unwrap()
    }

    #[test]
    fn unnormalized_at_identity() {
        let a = SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let b = iso(2, 0.7);
        let m = MgigParams::new(1.7, a.clone(), b.clone()).unwrap();
        let v = m.log_unnormalized(&SpdMatrix::identity(2)).unwrap();
        assert!((v + 0.5 * (a.trace() + b.trace())).abs() < 1e-15);
    }

    #[test]
    fn dimension_one_is_scalar_gig() {
        let m = MgigParams::new(-0.8, iso(1, 2.0 * 1.3), iso(1, 2.0 * 0.4)).unwrap();
        let law = crate::dist::MarginalLaw::gig(-0.8, 1.3, 0.4).unwrap();
        for x in [0.01, 0.5, 1.0, 3.0, 40.0] {
            let got = mgig_log_pdf(&m, &iso(1, x)).unwrap();
            assert!((got - law.log_pdf(x).unwrap()).abs() < 1e-13);
            // the unnormalised form agrees with the same constant
            let k = log_normalizer(&m, NormalizerConfig::default())
                .unwrap()
                .value;
            assert!(
                (m.log_unnormalized(&iso(1, x)).unwrap() - k - law.log_pdf(x).unwrap()).abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn mode_is_stationary() {
        let pair = random_spd_pair(3, 5);
        let m = MgigParams::new(0.9, pair.x, pair.y).unwrap();
        let mode = m.mode();
        let f0 = m.log_unnormalized(&mode).unwrap();
        let mut rng = rng::stream(1, 0);
        for _ in 0..50 {
            let mut h =
                DMatrix::<f64>::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal) * 1e-3);
            h = &h + h.transpose();
            let x = SpdMatrix::from_symmetric_part(mode.as_matrix() + h).unwrap();
            assert!(m.log_unnormalized(&x).unwrap() <= f0 + 1e-12);
        }
    }

    #[test]
    fn normalizer_matches_eigenvalue_quadrature() {
        for (p, a0, b0) in [
            (3.0, 1.0, 1.0),
            (-0.4, 2.0, 0.5),
            (1.5, 0.3, 4.0),
            (-3.0, 1.0, 2.0),
        ] {
            let m = MgigParams::new(p, iso(2, a0), iso(2, b0)).unwrap();
            let est = log_normalizer(
                &m,
                NormalizerConfig {
                    draws: 100_000,
                    seed: 21,
                },
            )
            .unwrap();
            let (exact, _) = isotropic_r2_log_integral(p, a0, b0, |_, _| 1.0).unwrap();
            assert!(
                (est.value - exact).abs() < 3.0 * est.std_error,
                "p={p}: {} vs {exact} (se {})",
                est.value,
                est.std_error
            );
            assert!(est.std_error < 0.01);
        }
    }

    #[test]
    fn quadrature_reference_dimension_one_cross_check() {
        // the eigenvalue integral of a product of scalar kernels factorises:
        // ∫∫ (λ₁ - λ₂)² g g = 2(m₂m₀ - m₁²) with moments m_k of one eigenvalue
        let (p, a0, b0) = (2.2, 1.4, 0.6);
        let (lhs, _) = isotropic_r2_log_integral(p, a0, b0, |l1, l2| (l1 - l2).abs()).unwrap();
        let q = p - 1.5;
        let moment = |k: f64| {
            GigParams::new(q + 1.0 + k, 0.5 * a0, 0.5 * b0)
                .unwrap()
                .log_normalizer()
                .unwrap()
                .exp()
        };
        let rhs =
            (std::f64::consts::PI / 2.0) * 2.0 * (moment(2.0) * moment(0.0) - moment(1.0).powi(2));
        assert!((lhs.exp() / rhs - 1.0).abs() < 1e-9);
    }
}
