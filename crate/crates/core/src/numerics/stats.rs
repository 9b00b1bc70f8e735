use nalgebra::{DMatrix, DVector};

use super::linalg::SymmetricMatrix;
use crate::error::{Error, Result};

/// Column means of an `L × n` sample matrix.
pub fn sample_mean(samples: &DMatrix<f64>) -> DVector<f64> {
    let l = samples.nrows() as f64;
    DVector::from_iterator(samples.ncols(), samples.column_iter().map(|c| c.sum() / l))
}

/// Unbiased sample covariance (divisor `L − 1`) of an `L × n` sample matrix.
pub fn sample_covariance(samples: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    let l = samples.nrows();
    if l < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: l });
    }
    let centered = center(samples);
    let cov = centered.transpose() * &centered / (l as f64 - 1.0);
    SymmetricMatrix::from_matrix(cov)
}

/// Unbiased cross-covariance `Cov(A, B)` of paired `L × a` and `L × b` samples.
pub fn cross_covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = a.nrows();
    if b.nrows() != l {
        return Err(Error::arg(format!("row counts differ: {} vs {}", l, b.nrows())));
    }
    if l < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: l });
    }
    Ok(center(a).transpose() * center(b) / (l as f64 - 1.0))
}

fn center(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let mut centered = samples.clone();
    let l = samples.nrows() as f64;
    for mut col in centered.column_iter_mut() {
        let mean = col.sum() / l;
        // second pass removes the rounding error left in the first mean
        let corr = col.iter().map(|v| v - mean).sum::<f64>() / l;
        col.apply(|v| *v = *v - mean - corr);
    }
    centered
}

/// Sample skewness `γ₁` and kurtosis `β₂` (not excess) of each column.
pub fn skewness_kurtosis(samples: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let l = samples.nrows() as f64;
    samples
        .column_iter()
        .map(|c| {
            let mean = c.sum() / l;
            let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
            for v in c.iter() {
                let d = v - mean;
                let d2 = d * d;
                m2 += d2;
                m3 += d2 * d;
                m4 += d2 * d2;
            }
            m2 /= l;
            m3 /= l;
            m4 /= l;
            (m3 / m2.powf(1.5), m4 / (m2 * m2))
        })
        .collect()
}

/// Mean and standard error of the mean (sample standard deviation over `√n`).
/// The standard error is zero when fewer than two values are given.
pub fn mean_and_standard_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
