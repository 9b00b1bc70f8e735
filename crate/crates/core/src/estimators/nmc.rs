use rayon::prelude::*;

use super::{check_capability, EigEstimate, EstimatorKind};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng::stream;

/// `(N_out, N_in)` for a budget of `L` likelihood evaluations:
/// `N_in = round(L^{1/3})`, `N_out = floor(L / N_in)`.
pub fn nmc_split(l: usize) -> Result<(usize, usize)> {
    if l < 2 {
        return Err(Error::arg(format!("NMC needs a budget of at least 2, got {l}")));
    }
    let n_in = ((l as f64).cbrt().round() as usize).max(1);
    Ok((l / n_in, n_in))
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Nested Monte Carlo estimate with fresh inner prior draws for every outer
/// sample. Outer sample `i` uses its own generator streams, so the result
/// does not depend on the thread count.
pub fn nmc_eig<M: Model + ?Sized>(model: &M, budget: usize, seed: u64) -> Result<EigEstimate> {
    check_capability(EstimatorKind::Nmc, model)?;
    let (n_out, n_in) = nmc_split(budget)?;
    let terms: Result<Vec<f64>> = (0..n_out)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "nmc/outer", i as u64);
            let (x, y) = model.sample_pair(&mut rng);
            let (x, y) = (x.as_slice(), y.as_slice());
            let own = model.log_likelihood(y, x)?;
            let mut inner_rng = stream(seed, "nmc/inner", i as u64);
            let mut inner = Vec::with_capacity(n_in);
            for _ in 0..n_in {
                let xj = model.sample_prior(&mut inner_rng)?;
                inner.push(model.log_likelihood(y, xj.as_slice())?);
            }
            Ok(own - (log_sum_exp(&inner) - (n_in as f64).ln()))
        })
        .collect();
    let terms = terms?;
    if let Some(i) = terms.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite NMC term at outer sample {i}")));
    }
    Ok(EigEstimate {
        kind: EstimatorKind::Nmc,
        value: terms.iter().sum::<f64>() / n_out as f64,
        l: budget,
        m: n_out,
        n: n_in,
        seed,
        exact: model.exact_eig(),
    })
}
