//! Least-squares helpers on top of nalgebra's Householder QR.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot size below which the scaled design is treated as singular.
const RANK_TOL: f64 = 1e-10;

/// Multi-response least-squares fit `Y ≈ X B`.
#[derive(Clone, Debug)]
pub struct OlsFit {
    /// `k x m`, one column per response.
    pub coefficients: DMatrix<f64>,
    /// `rows x m`, in the row order of the inputs.
    pub residuals: DMatrix<f64>,
    /// Diagonal of `(X'X)^{-1}`, used for coefficient standard errors.
    pub xtx_inv_diag: DVector<f64>,
}

/// Solves the least-squares problem column-wise through a QR decomposition
/// of the column-normalized design matrix.
pub fn ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<OlsFit> {
    let (rows, k) = x.shape();
    if y.nrows() != rows {
        return Err(Error::Mismatch(format!(
            "design has {rows} rows but response has {}",
            y.nrows()
        )));
    }
    if rows < k {
        return Err(Error::RankDeficient(format!(
            "{rows} rows cannot determine {k} coefficients"
        )));
    }

    let mut scale = DVector::zeros(k);
    let mut scaled = x.clone();
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::RankDeficient(format!(
                "regressor column {c} is identically zero"
            )));
        }
        col /= norm;
        scale[c] = norm;
    }

    let qr = scaled.qr();
    let r = qr.r();
    let max_pivot = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if let Some(c) = r
        .diagonal()
        .iter()
        .position(|v| v.abs() <= RANK_TOL * max_pivot)
    {
        return Err(Error::RankDeficient(format!(
            "regressor column {c} is (numerically) a linear combination of earlier columns"
        )));
    }

    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, k).into_owned();
    let mut coefficients = r
        .solve_upper_triangular(&head)
        .ok_or_else(|| Error::RankDeficient("triangular solve failed".into()))?;
    for (c, mut row) in coefficients.row_iter_mut().enumerate() {
        row /= scale[c];
    }

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient("triangular inverse failed".into()))?;
    // (X'X)^{-1} = D^{-1} R^{-1} R^{-T} D^{-1} with D the column scales
    let xtx_inv_diag = DVector::from_iterator(
        k,
        (0..k).map(|c| r_inv.row(c).norm_squared() / (scale[c] * scale[c])),
    );

    let residuals = y - x * &coefficients;
    Ok(OlsFit {
        coefficients,
        residuals,
        xtx_inv_diag,
    })
}
