//! Detailed balance for the cell maps.
//!
//! A [`BalanceSpec`] fixes the map, the constants `(c₁, c₂, λ)` and one of
//! three variants; it determines the two input laws and the two laws the
//! images are claimed to follow. Checks come in two flavours: the pointwise
//! density transport identity (deterministic, [`transport`]) and Monte-Carlo
//! marginal/independence tests ([`monte_carlo`]). [`machinery`] evaluates the
//! transform identities used in the characterisation argument.

pub mod machinery;
pub mod monte_carlo;
pub mod transport;

pub use machinery::{machinery_check, MachineryRecord, TransformEstimate};
pub use monte_carlo::{
    dcor_calibration, monte_carlo_balance, monte_carlo_balance_with, type_one_check,
    BalanceOptions, BalanceReport, CalibrationReport, IndependenceEntry, KsEntry, SamplerEntry,
    TypeOneReport,
};
pub use transport::{log_grid, transport_residual, InputPoint, Transport};

use crate::dist::{GigParams, MarginalLaw};
use crate::error::{Error, Result};
use crate::maps::MapParams;
use crate::matrix::{MgigParams, SpdMatrix};
use serde::Serialize;

/// Which map and which family of laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// `F_dK` with X∼GIG(−λ, αc₁, c₂), Y∼GIG(−λ, βc₂, c₁).
    ScalarFdk,
    /// `ψ` with A∼GIG(−λ, αc₁, c₂), B∼GIG(λ, c₁, βc₂).
    ScalarPsi,
    /// Matrix `F_dK` with X∼MGIG(λ, αa, b), Y∼MGIG(λ, βb, a); `c₁`, `c₂`
    /// are not used.
    MatrixFdk {
        r: usize,
        a: SpdMatrix,
        b: SpdMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceSpec {
    pub map: MapParams,
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
    pub variant: Variant,
}

/// The two laws of a pair, in order.
#[derive(Debug, Clone, PartialEq)]
pub enum PairLaws {
    Scalar([MarginalLaw; 2]),
    Matrix([MgigParams; 2]),
}

/// GIG(order, a, b), or its Gamma / inverse-Gamma limit when one rate is 0.
pub fn gig_or_limit(order: f64, a: f64, b: f64) -> Result<MarginalLaw> {
    match (a == 0.0, b == 0.0) {
        (false, false) => Ok(MarginalLaw::Gig(GigParams::new(order, a, b)?)),
        (true, false) if order < 0.0 => MarginalLaw::inv_gamma(-order, b),
        (false, true) if order > 0.0 => MarginalLaw::gamma(order, a),
        _ => Err(Error::domain(format!(
            "GIG({order}, {a}, {b}) has no Gamma/inverse-Gamma limit"
        ))),
    }
}

impl BalanceSpec {
    pub fn new(map: MapParams, c1: f64, c2: f64, lambda: f64, variant: Variant) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
            return Err(Error::domain(format!(
                "c1, c2 must be positive and finite, got ({c1}, {c2})"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::domain(format!(
                "lambda must be finite, got {lambda}"
            )));
        }
        if let Variant::MatrixFdk { r, a, b } = &variant {
            if a.dim() != *r || b.dim() != *r {
                return Err(Error::domain(format!("matrix parameters must be {r}x{r}")));
            }
            if !(map.alpha > 0.0 && map.beta > 0.0) {
                return Err(Error::domain("matrix variant needs alpha, beta > 0"));
            }
        }
        let spec = Self {
            map,
            c1,
            c2,
            lambda,
            variant,
        };
        spec.input_laws()?;
        spec.output_laws()?;
        Ok(spec)
    }

    pub fn scalar_fdk(alpha: f64, beta: f64, c1: f64, c2: f64, lambda: f64) -> Result<Self> {
        Self::new(
            MapParams::new(alpha, beta)?,
            c1,
            c2,
            lambda,
            Variant::ScalarFdk,
        )
    }

    pub fn scalar_psi(alpha: f64, beta: f64, c1: f64, c2: f64, lambda: f64) -> Result<Self> {
        Self::new(
            MapParams::new(alpha, beta)?,
            c1,
            c2,
            lambda,
            Variant::ScalarPsi,
        )
    }

    pub fn matrix_fdk(
        alpha: f64,
        beta: f64,
        lambda: f64,
        a: SpdMatrix,
        b: SpdMatrix,
    ) -> Result<Self> {
        let r = a.dim();
        Self::new(
            MapParams::new(alpha, beta)?,
            1.0,
            1.0,
            lambda,
            Variant::MatrixFdk { r, a, b },
        )
    }

    pub fn variant_name(&self) -> &'static str {
        match self.variant {
            Variant::ScalarFdk => "fdk",
            Variant::ScalarPsi => "psi",
            Variant::MatrixFdk { .. } => "matrix",
        }
    }

    /// The same spec with `c₁ ↔ c₂` (and `a ↔ b`).
    pub fn swapped(&self) -> Self {
        let variant = match &self.variant {
            Variant::MatrixFdk { r, a, b } => Variant::MatrixFdk {
                r: *r,
                a: b.clone(),
                b: a.clone(),
            },
            v => v.clone(),
        };
        Self {
            c1: self.c2,
            c2: self.c1,
            variant,
            ..self.clone()
        }
    }

    /// Laws of the two inputs; `k` rescales `c₁` (resp. `a`) in the second
    /// law only, which is how the negative control perturbs the inputs.
    pub fn input_laws_perturbed(&self, k: f64) -> Result<PairLaws> {
        let (al, be, lam) = (self.map.alpha, self.map.beta, self.lambda);
        let (c1, c2) = (self.c1, self.c2);
        Ok(match &self.variant {
            Variant::ScalarFdk => PairLaws::Scalar([
                gig_or_limit(-lam, al * c1, c2)?,
                gig_or_limit(-lam, be * c2, k * c1)?,
            ]),
            Variant::ScalarPsi => PairLaws::Scalar([
                gig_or_limit(-lam, al * c1, c2)?,
                gig_or_limit(lam, k * c1, be * c2)?,
            ]),
            Variant::MatrixFdk { a, b, .. } => {
                let scale =
                    |m: &SpdMatrix, s: f64| SpdMatrix::from_symmetric_part(m.as_matrix() * s);
                PairLaws::Matrix([
                    MgigParams::new(lam, scale(a, al)?, b.clone())?,
                    MgigParams::new(lam, scale(b, be)?, scale(a, k)?)?,
                ])
            }
        })
    }

    pub fn input_laws(&self) -> Result<PairLaws> {
        self.input_laws_perturbed(1.0)
    }

    /// Claimed laws of the images: the input laws with `c₁ ↔ c₂` swapped.
    pub fn output_laws(&self) -> Result<PairLaws> {
        self.swapped().input_laws()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(l: PairLaws) -> [MarginalLaw; 2] {
        match l {
            PairLaws::Scalar(s) => s,
            PairLaws::Matrix(_) => panic!("scalar laws expected"),
        }
    }

    #[test]
    fn stated_output_laws() {
        // images of F_dK: U∼GIG(−λ, αc₂, c₁), V∼GIG(−λ, βc₁, c₂)
        let s = BalanceSpec::scalar_fdk(0.5, 3.0, 1.0, 3.0, 2.0).unwrap();
        let [u, v] = scalar(s.output_laws().unwrap());
        assert_eq!(u, MarginalLaw::gig(-2.0, 0.5 * 3.0, 1.0).unwrap());
        assert_eq!(v, MarginalLaw::gig(-2.0, 3.0 * 1.0, 3.0).unwrap());
        // images of ψ: S∼GIG(−λ, αc₂, c₁), T∼GIG(λ, c₂, βc₁)
        let s = BalanceSpec::scalar_psi(0.5, 3.0, 1.0, 3.0, 2.0).unwrap();
        let [st, tt] = scalar(s.output_laws().unwrap());
        assert_eq!(st, MarginalLaw::gig(-2.0, 0.5 * 3.0, 1.0).unwrap());
        assert_eq!(tt, MarginalLaw::gig(2.0, 3.0, 3.0 * 1.0).unwrap());
    }

    #[test]
    fn limits_and_validation() {
        let s = BalanceSpec::scalar_psi(1.0, 0.0, 2.0, 1.0, 0.7).unwrap();
        let [_, b] = scalar(s.input_laws().unwrap());
        assert_eq!(b, MarginalLaw::gamma(0.7, 2.0).unwrap());
        let s = BalanceSpec::scalar_fdk(1.0, 0.0, 2.0, 1.0, 0.7).unwrap();
        let [_, y] = scalar(s.input_laws().unwrap());
        assert_eq!(y, MarginalLaw::inv_gamma(0.7, 2.0).unwrap());
        // β = 0 needs λ > 0 for the limit to be a law
        assert!(BalanceSpec::scalar_fdk(1.0, 0.0, 1.0, 1.0, -0.5).is_err());
        assert!(BalanceSpec::scalar_fdk(1.0, 2.0, 0.0, 1.0, 0.5).is_err());
        let i = SpdMatrix::identity(2);
        assert!(BalanceSpec::new(
            MapParams::new(1.0, 0.0).unwrap(),
            1.0,
            1.0,
            0.5,
            Variant::MatrixFdk {
                r: 2,
                a: i.clone(),
                b: i
            }
        )
        .is_err());
    }

    #[test]
    fn symmetric_point_is_type_one() {
        let s = BalanceSpec::scalar_fdk(1.0, 2.0, 1.5, 1.5, 0.5).unwrap();
        assert_eq!(s.input_laws().unwrap(), s.output_laws().unwrap());
    }
}
