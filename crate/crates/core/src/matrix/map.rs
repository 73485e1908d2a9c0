//! The matrix cell map `F(x, y) = (y(I+αxy)⁻¹(I+βxy), x(I+βyx)⁻¹(I+αyx))`
//! on pairs of SPD matrices.

use super::spd::{
    asymmetry, check_condition, condition_general, unvech, vech, vech_len, SpdMatrix,
};
use crate::error::{Error, Result};
use crate::maps::MapParams;
use nalgebra::DMatrix;

/// A pair of SPD matrices of equal order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdPair {
    pub x: SpdMatrix,
    pub y: SpdMatrix,
}

impl SpdPair {
    pub fn new(x: SpdMatrix, y: SpdMatrix) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::domain(format!(
                "pair dimensions differ: {} vs {}",
                x.dim(),
                y.dim()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// Frobenius distance to `other`, relative to the norm of `other`, taking
    /// the larger of the two components.
    pub fn rel_error(&self, other: &SpdPair) -> f64 {
        let rel = |a: &SpdMatrix, b: &SpdMatrix| {
            (a.as_matrix() - b.as_matrix()).norm() / b.as_matrix().norm()
        };
        rel(&self.x, &other.x).max(rel(&self.y, &other.y))
    }
}

fn check_params(p: MapParams) -> Result<()> {
    if p.alpha > 0.0 && p.beta > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "matrix map needs alpha, beta > 0, got ({}, {})",
            p.alpha, p.beta
        )))
    }
}

/// `m⁻¹ n` by LU, guarded by the condition ceiling on `m`.
fn solve(m: DMatrix<f64>, n: DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_condition(condition_general(&m))?;
    m.lu().solve(&n).ok_or(Error::IllConditioned {
        cond: f64::INFINITY,
        limit: super::spd::CONDITION_LIMIT,
    })
}

/// Images `(u, v)` before re-symmetrisation.
pub fn f_dk_matrix_raw(p: MapParams, xy: &SpdPair) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_params(p)?;
    let (x, y) = (xy.x.as_matrix(), xy.y.as_matrix());
    check_condition(xy.x.condition())?;
    check_condition(xy.y.condition())?;
    let id = DMatrix::<f64>::identity(xy.dim(), xy.dim());
    let (pxy, pyx) = (x * y, y * x);
    let u = y * solve(&id + &pxy * p.alpha, &id + &pxy * p.beta)?;
    let v = x * solve(&id + &pyx * p.beta, &id + &pyx * p.alpha)?;
    Ok((u, v))
}

/// `F_dK^(α,β)` on `Ω₊ × Ω₊`, with both images re-symmetrised and checked SPD.
pub fn f_dk_matrix(p: MapParams, xy: &SpdPair) -> Result<SpdPair> {
    let (u, v) = f_dk_matrix_raw(p, xy)?;
    SpdPair::new(
        SpdMatrix::from_symmetric_part(u)?,
        SpdMatrix::from_symmetric_part(v)?,
    )
}

/// `‖uv − yx‖_F / ‖yx‖_F`.
pub fn product_identity_residual(xy: &SpdPair, uv: &SpdPair) -> f64 {
    let yx = xy.y.as_matrix() * xy.x.as_matrix();
    (uv.x.as_matrix() * uv.y.as_matrix() - &yx).norm() / yx.norm()
}

/// Largest relative asymmetry of the raw images.
pub fn image_asymmetry(p: MapParams, xy: &SpdPair) -> Result<f64> {
    let (u, v) = f_dk_matrix_raw(p, xy)?;
    Ok(asymmetry(&u).max(asymmetry(&v)))
}

fn pair_to_vec(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    let mut v = vech(x);
    v.extend(vech(y));
    v
}

/// Central-difference Jacobian of `F` in isometric half-vectorised coordinates
/// (dimension `r(r+1)`), step `1e-6·max(1, |coordinate|)`.
pub fn jacobian_matrix(p: MapParams, xy: &SpdPair) -> Result<DMatrix<f64>> {
    let r = xy.dim();
    if r > 4 {
        return Err(Error::domain(format!(
            "finite-difference Jacobian limited to r <= 4, got {r}"
        )));
    }
    let m = vech_len(r);
    let z = pair_to_vec(xy.x.as_matrix(), xy.y.as_matrix());
    let eval = |z: &[f64]| -> Result<Vec<f64>> {
        let pair = SpdPair::new(
            SpdMatrix::from_symmetric_part(unvech(r, &z[..m]))?,
            SpdMatrix::from_symmetric_part(unvech(r, &z[m..]))?,
        )?;
        let out = f_dk_matrix(p, &pair)?;
        Ok(pair_to_vec(out.x.as_matrix(), out.y.as_matrix()))
    };
    let d = 2 * m;
    let mut jac = DMatrix::zeros(d, d);
    for k in 0..d {
        let h = 1e-6 * z[k].abs().max(1.0);
        let (mut up, mut down) = (z.clone(), z.clone());
        up[k] += h;
        down[k] -= h;
        let span = up[k] - down[k];
        let (fu, fd) = (eval(&up)?, eval(&down)?);
        for i in 0..d {
            jac[(i, k)] = (fu[i] - fd[i]) / span;
        }
    }
    Ok(jac)
}

/// `|det DF|` by central differences.
pub fn jacobian_abs_matrix(p: MapParams, xy: &SpdPair) -> Result<f64> {
    Ok(jacobian_matrix(p, xy)?.determinant().abs())
}

/// Matrix of `h ↦ xhx` on symmetric matrices in isometric coordinates.
pub fn quadratic_representation(x: &SpdMatrix) -> DMatrix<f64> {
    let r = x.dim();
    let m = vech_len(r);
    let xm = x.as_matrix();
    let mut q = DMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    for k in 0..m {
        e[k] = 1.0;
        let h = unvech(r, &e);
        let img = vech(&(xm * h * xm));
        q.set_column(k, &nalgebra::DVector::from_vec(img));
        e[k] = 0.0;
    }
    q
}

/// Relative gap between `det(h ↦ xhx)` and `(det x)^{r+1}`.
pub fn det_identity_residual(x: &SpdMatrix) -> f64 {
    let lhs = quadratic_representation(x).determinant();
    let rhs = ((x.dim() + 1) as f64 * x.log_det()).exp();
    ((lhs - rhs) / rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{f_dk, PositivePair};
    use crate::matrix::random_spd_pair;

    fn mp(a: f64, b: f64) -> MapParams {
        MapParams::new(a, b).unwrap()
    }

    fn scalar(v: f64) -> SpdMatrix {
        SpdMatrix::from_row_slice(1, &[v]).unwrap()
    }

    #[test]
    fn dimension_one_matches_scalar_map() {
        let p = mp(0.7, 2.5);
        for (x, y) in [(1.0, 1.0), (0.3, 4.0), (12.0, 0.02)] {
            let uv = f_dk_matrix(p, &SpdPair::new(scalar(x), scalar(y)).unwrap()).unwrap();
            let s = f_dk(p, PositivePair::new(x, y).unwrap());
            assert!(((uv.x.as_matrix()[(0, 0)] - s.first) / s.first).abs() < 4.0 * f64::EPSILON);
            assert!(((uv.y.as_matrix()[(0, 0)] - s.second) / s.second).abs() < 4.0 * f64::EPSILON);
            let j = jacobian_abs_matrix(p, &SpdPair::new(scalar(x), scalar(y)).unwrap()).unwrap();
            assert!((j - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn identity_pair_commuting_case() {
        let p = mp(1.0, 2.0);
        let pair = SpdPair::new(SpdMatrix::identity(3), SpdMatrix::identity(3)).unwrap();
        let uv = f_dk_matrix(p, &pair).unwrap();
        // u = (1+β)/(1+α)·I and v = (1+α)/(1+β)·I, as for the scalar map at (1, 1)
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((uv.x.as_matrix() - &id * 1.5).norm() < 1e-15);
        assert!((uv.y.as_matrix() - &id * (2.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn involution_product_symmetry_jacobian() {
        let p = mp(1.0, 2.0);
        for r in 1..=3 {
            for i in 0..20 {
                let pair = random_spd_pair(r, 100 + i);
                let uv = f_dk_matrix(p, &pair).unwrap();
                assert!(f_dk_matrix(p, &uv).unwrap().rel_error(&pair) < 1e-10);
                assert!(product_identity_residual(&pair, &uv) < 1e-10);
                assert!(image_asymmetry(p, &pair).unwrap() < 1e-12);
                assert!((jacobian_abs_matrix(p, &pair).unwrap() - 1.0).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn endomorphism_determinant() {
        for r in 1..=3 {
            for i in 0..20 {
                let x = random_spd_pair(r, 7 + i).x;
                assert!(det_identity_residual(&x) < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let pair = SpdPair::new(SpdMatrix::identity(2), SpdMatrix::identity(2)).unwrap();
        assert!(f_dk_matrix(MapParams::new(1.0, 0.0).unwrap(), &pair).is_err());
        assert!(SpdPair::new(SpdMatrix::identity(2), SpdMatrix::identity(3)).is_err());
        let bad = SpdPair::new(
            SpdMatrix::from_row_slice(2, &[1.0, 0.0, 0.0, 1e-13]).unwrap(),
            SpdMatrix::identity(2),
        )
        .unwrap();
        assert!(matches!(
            f_dk_matrix(mp(1.0, 2.0), &bad),
            Err(Error::IllConditioned { .. })
        ));
    }
}
