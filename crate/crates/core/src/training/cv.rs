use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fit::{fit_triangular_map, DegreeScore, FitOptions};
use crate::error::{Error, Result};
use crate::numerics::standard_normal_logpdf;
use crate::transport::{total_degree_size, TriangularMap};

/// Result of cross-validated degree selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub chosen: u32,
    pub scores: Vec<DegreeScore>,
    /// Degrees dropped for lack of samples.
    pub skipped: Vec<u32>,
}

/// Mean negative log (conditional) pullback density of the rows of `samples`.
pub fn held_out_score(map: &TriangularMap, samples: &DMatrix<f64>) -> Result<f64> {
    let (img, logdet) = map.forward_batch(samples)?;
    let n = samples.nrows() as f64;
    let total: f64 = img
        .row_iter()
        .zip(logdet.iter())
        .map(|(r, ld)| {
            let w: Vec<f64> = r.iter().copied().collect();
            standard_normal_logpdf(&w) + ld
        })
        .sum();
    Ok(-total / n)
}

/// Choose the total degree minimizing the mean held-out objective over
/// `folds` contiguous folds. Ties go to the smaller degree.
pub fn select_degree_cv(
    samples: &DMatrix<f64>,
    n_conditioning: usize,
    degrees: &[u32],
    folds: usize,
    opts: &FitOptions,
) -> Result<CvSelection> {
    if degrees.is_empty() {
        return Err(Error::arg("no candidate degrees"));
    }
    if folds < 2 {
        return Err(Error::arg(format!("need at least 2 folds, got {folds}")));
    }
    let mut degrees = degrees.to_vec();
    degrees.sort_unstable();
    degrees.dedup();
    if degrees.len() == 1 {
        return Ok(CvSelection {
            chosen: degrees[0],
            scores: Vec::new(),
            skipped: Vec::new(),
        });
    }
    let n = samples.nrows();
    let dim = samples.ncols();
    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    for &p in &degrees {
        let basis = total_degree_size(dim, p);
        if n < folds * basis {
            log::warn!("skipping degree {p}: {n} samples are fewer than {folds} folds x {basis} basis functions");
            skipped.push(p);
            continue;
        }
        let mut fold_scores = Vec::with_capacity(folds);
        for f in 0..folds {
            let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
            let train_rows: Vec<usize> = (0..lo).chain(hi..n).collect();
            let train = samples.select_rows(&train_rows);
            let valid = samples.rows(lo, hi - lo).into_owned();
            let (map, _) = fit_triangular_map(&train, n_conditioning, p, opts)?;
            fold_scores.push(held_out_score(&map, &valid)?);
        }
        let mean = fold_scores.iter().sum::<f64>() / folds as f64;
        scores.push(DegreeScore {
            degree: p,
            fold_scores,
            mean,
        });
    }
    let best = scores
        .iter()
        .fold(None::<&DegreeScore>, |best, s| match best {
            Some(b) if b.mean <= s.mean => Some(b),
            _ => Some(s),
        })
        .ok_or(Error::InsufficientSamples {
            needed: folds * total_degree_size(dim, degrees[0]),
            got: n,
        })?;
    Ok(CvSelection {
        chosen: best.degree,
        scores: scores.clone(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn single_candidate_is_returned() {
        let s = DMatrix::from_element(3, 1, 0.0);
        let r = select_degree_cv(&s, 0, &[4], 5, &FitOptions::default()).unwrap();
        assert_eq!(r.chosen, 4);
    }

    #[test]
    fn skewed_data_prefers_higher_degree() {
        let mut rng = stream(1, "cv", 0);
        let s = DMatrix::from_fn(2000, 1, |_, _| rng.sample::<f64, _>(StandardNormal).exp());
        let r = select_degree_cv(&s, 0, &[1, 3], 5, &FitOptions::default()).unwrap();
        assert_eq!(r.chosen, 3);
        assert!(r.scores[1].mean < r.scores[0].mean);
    }

    #[test]
    fn oversized_degree_is_skipped() {
        let mut rng = stream(2, "cv", 0);
        let s = DMatrix::from_fn(40, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        // degree 6 in two variables needs 28 basis functions per fold
        let r = select_degree_cv(&s, 0, &[1, 6], 5, &FitOptions::default()).unwrap();
        assert_eq!(r.skipped, vec![6]);
        assert_eq!(r.chosen, 1);
        assert!(select_degree_cv(&s, 0, &[1], 1, &FitOptions::default()).is_err());
    }
}
