//! Least squares through a column-pivoted QR factorisation.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },
    #[error("need more rows ({rows}) than columns ({cols})")]
    Underdetermined { rows: usize, cols: usize },
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ssr: f64,
    /// Diagonal of (X'X)^-1, for standard errors.
    pub xtx_inv_diag: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares `y ~ X`. `rows` is row-major with `cols` entries per row.
pub fn ols(rows: &[f64], cols: usize, y: &[f64]) -> Result<OlsFit, LinalgError> {
    let n = y.len();
    if n <= cols {
        return Err(LinalgError::Underdetermined { rows: n, cols });
    }
    let x = DMatrix::from_row_slice(n, cols, rows);
    // Column equilibration keeps the rank test scale-free.
    let scales: Vec<f64> = (0..cols)
        .map(|j| {
            let norm = x.column(j).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (j, s) in scales.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    let qr = xs.col_piv_qr();
    let r = qr.r();
    let diag_max = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..cols).filter(|&i| r[(i, i)].abs() > RANK_TOL * diag_max.max(f64::MIN_POSITIVE)).count();
    if rank < cols || diag_max == 0.0 {
        return Err(LinalgError::RankDeficient { rank, cols });
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let r_sq = r.view((0, 0), (cols, cols)).into_owned();
    let mut z = qty.rows(0, cols).into_owned();
    if !r_sq.solve_upper_triangular_mut(&mut z) {
        return Err(LinalgError::RankDeficient { rank, cols });
    }
    qr.p().inv_permute_rows(&mut z);
    let coef: Vec<f64> = (0..cols).map(|j| z[j] / scales[j]).collect();

    // (X'X)^-1 = P R^-1 R^-T P' in the scaled basis.
    let rinv = r_sq.try_inverse().ok_or(LinalgError::RankDeficient { rank, cols })?;
    let mut cov = &rinv * rinv.transpose();
    let p = qr.p();
    p.inv_permute_rows(&mut cov);
    p.inv_permute_columns(&mut cov);
    let xtx_inv_diag = (0..cols).map(|j| cov[(j, j)] / (scales[j] * scales[j])).collect();

    let fitted = &x * DVector::from_column_slice(&coef);
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let ssr = residuals.iter().map(|e| e * e).sum();
    Ok(OlsFit { coef, residuals, ssr, xtx_inv_diag })
}

/// Simple regression `y = a + b x` with the slope's standard error.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub n: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = (ssr / (nf - 2.0) / sxx).sqrt();
    Some(LineFit { intercept, slope, slope_se, n })
}
