//! Matrix-variate counterparts on the cone `Ω₊` of SPD matrices: the cell
//! map, the MGIG law with its sampler, and the checks that the map is an
//! involution with unit Jacobian.

mod map;
mod mcmc;
mod mgig;
mod spd;

pub use map::{
    det_identity_residual, f_dk_matrix, f_dk_matrix_raw, image_asymmetry, jacobian_abs_matrix,
    jacobian_matrix, product_identity_residual, quadratic_representation, SpdPair,
};
pub use mcmc::{mgig_sample, McmcConfig, McmcDiagnostics, McmcRun};
pub use mgig::{
    importance_expectation, isotropic_r2_log_integral, log_normalizer, mgig_log_pdf, LogNormalizer,
    Mgig, MgigParams, NormalizerConfig,
};
pub use spd::{asymmetry, unvech, vech, SpdMatrix, CONDITION_LIMIT};

use crate::error::Result;
use crate::maps::MapParams;
use crate::report::CheckRow;
use crate::rng;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// A seeded SPD matrix `Q diag(e^{g}) Qᵀ` with Haar-like `Q` (QR of a
/// Gaussian matrix) and log-eigenvalues uniform on `[ln 0.2, ln 5]`, so the
/// condition number stays below 25.
pub fn random_spd(r: usize, rng: &mut impl Rng) -> SpdMatrix {
    let g = DMatrix::<f64>::from_fn(r, r, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    let (lo, hi) = (0.2f64.ln(), 5.0f64.ln());
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(r, |_, _| {
        (lo + (hi - lo) * rng.random::<f64>()).exp()
    }));
    SpdMatrix::from_symmetric_part(&q * d * q.transpose()).expect("random SPD construction")
}

/// Seeded pair of independent [`random_spd`] matrices.
pub fn random_spd_pair(r: usize, seed: u64) -> SpdPair {
    let mut g = rng::stream(seed, 0);
    let x = random_spd(r, &mut g);
    let y = random_spd(r, &mut g);
    SpdPair::new(x, y).expect("equal dimensions")
}

/// Involution, product identity, symmetry, Jacobian and endomorphism
/// determinant checks over `pairs` random pairs of order `r`.
pub fn check_battery(p: MapParams, r: usize, seed: u64, pairs: usize) -> Result<Vec<CheckRow>> {
    let (mut inv, mut prod, mut asym, mut jac, mut det) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..pairs {
        let xy = random_spd_pair(r, rng::derive_seed(seed, i as u64));
        let uv = f_dk_matrix(p, &xy)?;
        inv = inv.max(f_dk_matrix(p, &uv)?.rel_error(&xy));
        prod = prod.max(product_identity_residual(&xy, &uv));
        asym = asym.max(image_asymmetry(p, &xy)?);
        if r <= 4 {
            jac = jac.max((jacobian_abs_matrix(p, &xy)? - 1.0).abs());
        }
        if r <= 3 {
            det = det.max(det_identity_residual(&xy.x));
        }
    }
    let mut rows = vec![
        CheckRow::at_most("involution", inv, 1e-10),
        CheckRow::at_most("product_identity_uv_yx", prod, 1e-10),
        CheckRow::at_most("image_asymmetry", asym, 1e-12),
    ];
    if r <= 4 {
        rows.push(CheckRow::at_most("abs_jacobian_minus_one", jac, 1e-4));
    }
    if r <= 3 {
        rows.push(CheckRow::at_most("endomorphism_determinant", det, 1e-8));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_up_to_order_three() {
        let p = MapParams::new(1.0, 2.0).unwrap();
        for r in 1..=3 {
            let rows = check_battery(p, r, 42, 30).unwrap();
            assert!(crate::report::all_pass(&rows), "r={r}: {rows:?}");
        }
    }

    #[test]
    fn random_pairs_are_well_conditioned() {
        for s in 0..50 {
            let xy = random_spd_pair(3, s);
            assert!(xy.x.condition() <= 25.0 + 1e-9 && xy.y.condition() <= 25.0 + 1e-9);
        }
    }
}
