use super::MultiIndexSet;
use crate::error::{Error, Result};

/// Normalized probabilists' Hermite values `h_0(z) … h_n(z)`, where
/// `h_n = He_n / √(n!)`.
pub fn hermite_values(z: f64, n: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if n >= 1 {
        out[1] = z;
    }
    for m in 1..n {
        out[m + 1] = (z * out[m] - (m as f64).sqrt() * out[m - 1]) / ((m + 1) as f64).sqrt();
    }
}

/// Values and derivatives; `h_n' = √n h_{n−1}`.
pub fn hermite_values_and_derivatives(z: f64, n: usize, vals: &mut [f64], ders: &mut [f64]) {
    hermite_values(z, n, vals);
    ders[0] = 0.0;
    for m in 1..=n {
        ders[m] = (m as f64).sqrt() * vals[m - 1];
    }
}

/// Feature values `ψ_α(z)` and their partials in the last coordinate.
pub fn hermite_features(idx: &MultiIndexSet, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = idx.dim();
    if z.len() != k {
        return Err(Error::arg(format!("point has length {}, expected {k}", z.len())));
    }
    let maxd = idx.max_degrees();
    let tables: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
        .map(|j| {
            let n = maxd[j] as usize;
            let mut v = vec![0.0; n + 1];
            let mut d = vec![0.0; n + 1];
            hermite_values_and_derivatives(z[j], n, &mut v, &mut d);
            (v, d)
        })
        .collect();
    let mut vals = Vec::with_capacity(idx.len());
    let mut parts = Vec::with_capacity(idx.len());
    for a in idx.iter() {
        let prefix: f64 = (0..k - 1).map(|j| tables[j].0[a[j] as usize]).product();
        let last = &tables[k - 1];
        vals.push(prefix * last.0[a[k - 1] as usize]);
        parts.push(prefix * last.1[a[k - 1] as usize]);
    }
    Ok((vals, parts))
}
