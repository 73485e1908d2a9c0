//! Symmetric positive-definite matrices and symmetric vectorisation.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Serialize, Serializer};
use std::fmt;

/// Inverses are refused beyond this condition number.
pub const CONDITION_LIMIT: f64 = 1e12;

/// A symmetric positive-definite `r × r` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

/// Frobenius norm of `m - mᵀ` relative to that of `m`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.norm();
    if n == 0.0 {
        0.0
    } else {
        (m - m.transpose()).norm() / n
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl SpdMatrix {
    /// Validates squareness, symmetry (relative 1e-12) and positive
    /// definiteness; the stored value is the symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::domain(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("matrix has non-finite entries"));
        }
        let asym = asymmetry(&m);
        if asym > 1e-12 {
            return Err(Error::domain(format!(
                "matrix is not symmetric (relative asymmetry {asym:.3e})"
            )));
        }
        Self::from_symmetric_part(m)
    }

    /// Keeps the symmetric part of `m` and checks positive definiteness.
    pub fn from_symmetric_part(m: DMatrix<f64>) -> Result<Self> {
        let s = symmetrize(&m);
        if Cholesky::new(s.clone()).is_none() {
            return Err(Error::NotPositiveDefinite(
                "Cholesky factorisation failed".into(),
            ));
        }
        Ok(Self(s))
    }

    pub fn identity(r: usize) -> Self {
        Self(DMatrix::identity(r, r))
    }

    pub fn scaled_identity(r: usize, c: f64) -> Result<Self> {
        Self::new(DMatrix::identity(r, r) * c)
    }

    pub fn from_row_slice(r: usize, data: &[f64]) -> Result<Self> {
        if data.len() != r * r {
            return Err(Error::domain(format!(
                "expected {} entries for a {r}x{r} matrix, got {}",
                r * r,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(r, r, data))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn cholesky(&self) -> Cholesky<f64, Dyn> {
        Cholesky::new(self.0.clone()).expect("validated positive definite")
    }

    pub fn log_det(&self) -> f64 {
        let l = self.cholesky().l();
        2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn det(&self) -> f64 {
        self.log_det().exp()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.0.clone().symmetric_eigenvalues()
    }

    /// Ratio of extreme eigenvalues.
    pub fn condition(&self) -> f64 {
        let ev = self.eigenvalues();
        ev.max() / ev.min()
    }

    /// Inverse, refused when the condition number exceeds [`CONDITION_LIMIT`].
    pub fn inverse(&self) -> Result<SpdMatrix> {
        check_condition(self.condition())?;
        Self::from_symmetric_part(self.cholesky().inverse())
    }

    /// Symmetric square root by eigendecomposition.
    pub fn sqrt(&self) -> SpdMatrix {
        let e = self.0.clone().symmetric_eigen();
        let d = DMatrix::from_diagonal(&e.eigenvalues.map(f64::sqrt));
        SpdMatrix(symmetrize(
            &(&e.eigenvectors * d * e.eigenvectors.transpose()),
        ))
    }

    /// Matrix logarithm (symmetric, by eigendecomposition).
    pub fn log(&self) -> DMatrix<f64> {
        let e = self.0.clone().symmetric_eigen();
        let d = DMatrix::from_diagonal(&e.eigenvalues.map(f64::ln));
        symmetrize(&(&e.eigenvectors * d * e.eigenvectors.transpose()))
    }

    /// Isometric half-vectorisation: diagonal entries, then `√2·m_ij` for
    /// `i < j` row by row, so that `|vech m| = |m|_F`.
    pub fn vech(&self) -> Vec<f64> {
        vech(&self.0)
    }

    /// Row-major entries.
    pub fn row_major(&self) -> Vec<f64> {
        let r = self.dim();
        (0..r)
            .flat_map(|i| (0..r).map(move |j| (i, j)))
            .map(|(i, j)| self.0[(i, j)])
            .collect()
    }
}

pub fn check_condition(cond: f64) -> Result<()> {
    if cond.is_finite() && cond <= CONDITION_LIMIT {
        Ok(())
    } else {
        Err(Error::IllConditioned {
            cond,
            limit: CONDITION_LIMIT,
        })
    }
}

/// Condition number in the 2-norm (singular value ratio) of a general matrix.
pub fn condition_general(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    sv.max() / sv.min()
}

pub fn vech_len(r: usize) -> usize {
    r * (r + 1) / 2
}

/// See [`SpdMatrix::vech`]; works on any square matrix via its upper triangle.
pub fn vech(m: &DMatrix<f64>) -> Vec<f64> {
    let r = m.nrows();
    let mut v: Vec<f64> = (0..r).map(|i| m[(i, i)]).collect();
    for i in 0..r {
        for j in i + 1..r {
            v.push(std::f64::consts::SQRT_2 * m[(i, j)]);
        }
    }
    v
}

/// Inverse of [`vech`].
pub fn unvech(r: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(r, r);
    for i in 0..r {
        m[(i, i)] = v[i];
    }
    let mut k = r;
    for i in 0..r {
        for j in i + 1..r {
            let x = v[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

impl fmt::Display for SpdMatrix {
    /// Rows separated by `;`, entries by `,`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.dim();
        for i in 0..r {
            if i > 0 {
                f.write_str(";")?;
            }
            for j in 0..r {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", self.0[(i, j)])?;
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for SpdMatrix {
    type Err = Error;

    /// Parses `"a,b;c,d"` (rows separated by `;`).
    fn from_str(s: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = s
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::domain(format!("bad matrix entry {v:?}: {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let r = rows.len();
        if rows.iter().any(|row| row.len() != r) {
            return Err(Error::domain(format!("matrix {s:?} is not square")));
        }
        Self::from_row_slice(r, &rows.concat())
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let r = self.dim();
        let rows: Vec<Vec<f64>> = (0..r)
            .map(|i| (0..r).map(|j| self.0[(i, j)]).collect())
            .collect();
        rows.serialize(s)
    }
}
