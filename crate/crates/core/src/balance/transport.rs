//! Pointwise density transport: with unit |Jacobian| the map carries the
//! product density of the inputs to that of the images, so
//! `ln f_X(x) + ln f_Y(y) - ln f_U(u) - ln f_V(v)` vanishes. For `ψ` the
//! Jacobian is `t²/b²` (from the two `I₂` factors) and enters the identity.

use super::{BalanceSpec, PairLaws, Variant};
use crate::dist::Kernel;
use crate::error::{Error, Result};
use crate::maps::{f_dk, psi, PositivePair};
use crate::matrix::{f_dk_matrix, Mgig, NormalizerConfig, SpdPair};
use crate::rng;

/// A point of the map's domain.
#[derive(Debug, Clone, PartialEq)]
pub enum InputPoint {
    Scalar(PositivePair),
    Matrix(SpdPair),
}

enum Densities {
    Scalar([Kernel; 4]),
    Matrix(Box<[Mgig; 4]>),
}

/// Transport residuals for one spec with the four densities prepared once.
pub struct Transport {
    spec: BalanceSpec,
    densities: Densities,
}

impl Transport {
    /// For the matrix variant the four normalisers are estimated with
    /// seeds derived from `cfg.seed`.
    pub fn new(spec: &BalanceSpec, cfg: NormalizerConfig) -> Result<Self> {
        let densities = match (spec.input_laws()?, spec.output_laws()?) {
            (PairLaws::Scalar([x, y]), PairLaws::Scalar([u, v])) => {
                Densities::Scalar([x.kernel()?, y.kernel()?, u.kernel()?, v.kernel()?])
            }
            (PairLaws::Matrix([x, y]), PairLaws::Matrix([u, v])) => {
                let mk = |p, k| {
                    Mgig::new(
                        p,
                        NormalizerConfig {
                            seed: rng::derive_seed(cfg.seed, k),
                            ..cfg
                        },
                    )
                };
                Densities::Matrix(Box::new([mk(x, 0)?, mk(y, 1)?, mk(u, 2)?, mk(v, 3)?]))
            }
            _ => unreachable!("input and output laws share a family"),
        };
        Ok(Self {
            spec: spec.clone(),
            densities,
        })
    }

    /// Combined standard error of the four log normalisers (0 when exact).
    pub fn std_error(&self) -> f64 {
        match &self.densities {
            Densities::Scalar(_) => 0.0,
            Densities::Matrix(m) => m
                .iter()
                .map(|d| d.normalizer.std_error.powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// `1e-9 + 3·(normaliser standard error)`.
    pub fn tolerance(&self) -> f64 {
        1e-9 + 3.0 * self.std_error()
    }

    pub fn normalizers(&self) -> Option<Vec<crate::matrix::LogNormalizer>> {
        match &self.densities {
            Densities::Scalar(_) => None,
            Densities::Matrix(m) => Some(m.iter().map(|d| d.normalizer).collect()),
        }
    }

    pub fn residual(&self, point: &InputPoint) -> Result<f64> {
        match (&self.densities, point) {
            (Densities::Scalar(k), InputPoint::Scalar(p)) => {
                let (out, log_jac) = match self.spec.variant {
                    Variant::ScalarFdk => (f_dk(self.spec.map, *p), 0.0),
                    Variant::ScalarPsi => {
                        let st = psi(self.spec.map, *p);
                        (st, 2.0 * (st.second.ln() - p.second.ln()))
                    }
                    Variant::MatrixFdk { .. } => unreachable!("scalar densities"),
                };
                let lhs = k[0].log_pdf(p.first) + k[1].log_pdf(p.second);
                let rhs = k[2].log_pdf(out.first) + k[3].log_pdf(out.second) + log_jac;
                Ok((lhs - rhs).abs())
            }
            (Densities::Matrix(m), InputPoint::Matrix(p)) => {
                let uv = f_dk_matrix(self.spec.map, p)?;
                let lhs = m[0].log_pdf(&p.x)? + m[1].log_pdf(&p.y)?;
                let rhs = m[2].log_pdf(&uv.x)? + m[3].log_pdf(&uv.y)?;
                Ok((lhs - rhs).abs())
            }
            _ => Err(Error::domain("point does not match the spec variant")),
        }
    }
}

/// `|ln f_X(x) + ln f_Y(y) - ln f_U(u) - ln f_V(v)|` at one point, with
/// the default normaliser budget for the matrix variant.
pub fn transport_residual(spec: &BalanceSpec, point: &InputPoint) -> Result<f64> {
    Transport::new(spec, NormalizerConfig::default())?.residual(point)
}

/// The `20 × 20` log-spaced grid on `[0.05, 20]²`.
pub fn log_grid(points: usize, lo: f64, hi: f64) -> Vec<PositivePair> {
    let step = (hi / lo).ln() / (points - 1) as f64;
    let axis: Vec<f64> = (0..points).map(|i| lo * (step * i as f64).exp()).collect();
    axis.iter()
        .flat_map(|&x| axis.iter().map(move |&y| PositivePair::raw(x, y)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{random_spd_pair, SpdMatrix};

    #[test]
    fn reference_point_and_conjugation() {
        let fdk = BalanceSpec::scalar_fdk(1.0, 2.0, 1.0, 1.0, 0.5).unwrap();
        let p = PositivePair::new(1.0, 1.0).unwrap();
        assert!(transport_residual(&fdk, &InputPoint::Scalar(p)).unwrap() <= 1e-9);
        let ps = BalanceSpec::scalar_psi(1.0, 2.0, 1.0, 1.0, 0.5).unwrap();
        let (tf, tp) = (
            Transport::new(&fdk, NormalizerConfig::default()).unwrap(),
            Transport::new(&ps, NormalizerConfig::default()).unwrap(),
        );
        for ab in log_grid(20, 0.05, 20.0) {
            // ψ at (a, b) is F at (a, 1/b)
            let rp = tp.residual(&InputPoint::Scalar(ab)).unwrap();
            let rf = tf.residual(&InputPoint::Scalar(ab.i2())).unwrap();
            assert!(
                rp <= 1e-9 && rf <= 1e-9 && (rp - rf).abs() <= 1e-12,
                "{ab:?}: {rp} {rf}"
            );
        }
    }

    #[test]
    fn grid_battery_points() {
        for spec in [
            BalanceSpec::scalar_fdk(1.0, 2.0, 1.0, 1.0, -2.0).unwrap(),
            BalanceSpec::scalar_fdk(0.5, 3.0, 1.0, 3.0, 0.0).unwrap(),
            BalanceSpec::scalar_psi(0.5, 3.0, 1.0, 3.0, 2.0).unwrap(),
            BalanceSpec::scalar_psi(1.0, 0.0, 1.0, 3.0, 0.8).unwrap(),
            BalanceSpec::scalar_fdk(0.0, 2.0, 2.0, 1.0, 1.5).unwrap(),
        ] {
            let t = Transport::new(&spec, NormalizerConfig::default()).unwrap();
            let worst = log_grid(20, 0.05, 20.0)
                .iter()
                .map(|p| t.residual(&InputPoint::Scalar(*p)).unwrap())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-9, "{spec:?}: {worst}");
        }
    }

    #[test]
    fn matrix_dimension_one_matches_scalar() {
        // MGIG(λ, αa, b) at r = 1 is GIG(λ, αa/2, b/2), the scalar spec at −λ
        let (lam, c1, c2) = (0.5, 1.0, 3.0);
        let m = BalanceSpec::matrix_fdk(
            1.0,
            2.0,
            -lam,
            SpdMatrix::scaled_identity(1, 2.0 * c1).unwrap(),
            SpdMatrix::scaled_identity(1, 2.0 * c2).unwrap(),
        )
        .unwrap();
        let s = BalanceSpec::scalar_fdk(1.0, 2.0, c1, c2, lam).unwrap();
        let (tm, ts) = (
            Transport::new(&m, NormalizerConfig::default()).unwrap(),
            Transport::new(&s, NormalizerConfig::default()).unwrap(),
        );
        assert_eq!(tm.std_error(), 0.0);
        for p in log_grid(8, 0.05, 20.0) {
            let pair = SpdPair::new(
                SpdMatrix::scaled_identity(1, p.first).unwrap(),
                SpdMatrix::scaled_identity(1, p.second).unwrap(),
            )
            .unwrap();
            let rm = tm.residual(&InputPoint::Matrix(pair)).unwrap();
            let rs = ts.residual(&InputPoint::Scalar(p)).unwrap();
            assert!((rm - rs).abs() < 1e-12, "{rm} vs {rs}");
        }
    }

    #[test]
    fn matrix_residual_within_normalizer_error() {
        let pair = random_spd_pair(2, 9);
        let spec = BalanceSpec::matrix_fdk(1.0, 2.0, 0.5, pair.x, pair.y).unwrap();
        let t = Transport::new(&spec, NormalizerConfig::default()).unwrap();
        for i in 0..5 {
            let p = random_spd_pair(2, 50 + i);
            let r = t.residual(&InputPoint::Matrix(p)).unwrap();
            assert!(r <= t.tolerance(), "{r} > {}", t.tolerance());
        }
    }
}
