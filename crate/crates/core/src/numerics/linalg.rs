use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative jitter added to the diagonal once before a Cholesky factorization
/// is declared to have failed.
pub const JITTER_REL: f64 = 1e-12;

/// Dense symmetric matrix. Symmetry is exact: the constructor mirrors the
/// average of the two triangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::arg(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        Ok(Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)])
            }
        })))
    }

    /// Build from a function evaluated on the lower triangle only.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub fn add_diagonal(&self, eps: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += eps;
        }
        Self(m)
    }

    /// `Bᵀ A B`, symmetrized.
    pub fn congruence(&self, b: &DMatrix<f64>) -> Self {
        let m = b.transpose() * &self.0 * b;
        Self::from_matrix(m).expect("congruence of a square matrix is square")
    }

    /// Cholesky factor, retrying once with diagonal jitter `1e-12·trace/n`.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        CholeskyFactor::new(self)
    }

    /// Standard symmetric eigendecomposition, descending.
    pub fn eigen(&self) -> EigenPair {
        let eig = SymmetricEigen::new(self.0.clone());
        EigenPair::sorted(eig.eigenvalues, eig.eigenvectors)
    }

    /// Symmetric square root; negative eigenvalues from round-off are clipped.
    pub fn sqrt(&self) -> DMatrix<f64> {
        self.spectral_map(|l| l.max(0.0).sqrt())
    }

    /// Symmetric inverse square root. Fails if the matrix is not positive definite.
    pub fn inv_sqrt(&self) -> Result<DMatrix<f64>> {
        let eig = SymmetricEigen::new(self.0.clone());
        if let Some((i, &l)) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .find(|(_, &l)| l <= 0.0 || !l.is_finite())
        {
            return Err(Error::NotPositiveDefinite { pivot: i, value: l });
        }
        Ok(spectral(&eig, |l| 1.0 / l.sqrt()))
    }

    fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.0.clone());
        spectral(&eig, f)
    }
}

fn spectral(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let m = q * d * q.transpose();
    SymmetricMatrix::from_matrix(m).unwrap().into_inner()
}

/// Lower Cholesky factor `A + jitter·I = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    pub fn new(a: &SymmetricMatrix) -> Result<Self> {
        match factor(a.as_matrix(), 0.0) {
            Ok(l) => Ok(Self { l, jitter: 0.0 }),
            Err(first) => {
                let n = a.dim().max(1) as f64;
                let eps = JITTER_REL * a.trace() / n;
                if !(eps > 0.0) {
                    return Err(first);
                }
                let l = factor(a.as_matrix(), eps)?;
                Ok(Self { l, jitter: eps })
            }
        }
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solve `L x = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = b.clone();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[(i, k)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solve `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = b.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `L⁻¹ B` column by column.
    pub fn solve_lower_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            out.set_column(j, &self.solve_lower(&b.column(j).into_owned()));
        }
        out
    }

    /// `L⁻ᵀ B` column by column.
    pub fn solve_upper_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            out.set_column(j, &self.solve_upper(&b.column(j).into_owned()));
        }
        out
    }

    /// `A⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `A⁻¹` as a dense symmetric matrix.
    pub fn inverse(&self) -> SymmetricMatrix {
        let n = self.dim();
        let linv = self.solve_lower_mat(&DMatrix::identity(n, n));
        SymmetricMatrix::from_matrix(linv.transpose() * linv).unwrap()
    }

    /// `bᵀ A⁻¹ b`.
    pub fn quad_form(&self, b: &DVector<f64>) -> f64 {
        self.solve_lower(b).norm_squared()
    }
}

fn factor(a: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + eps;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Eigenvalues sorted descending with matching eigenvector columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPair {
    /// Sort descending and fix each column's sign so that its first entry of
    /// non-negligible magnitude is positive.
    fn sorted(values: DVector<f64>, vectors: DMatrix<f64>) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let mut vals = DVector::zeros(n);
        let mut vecs = DMatrix::zeros(vectors.nrows(), n);
        for (dst, &src) in order.iter().enumerate() {
            vals[dst] = values[src];
            let mut col = vectors.column(src).into_owned();
            let scale = col.amax();
            if let Some(first) = col.iter().find(|v| v.abs() > 1e-10 * scale) {
                if *first < 0.0 {
                    col = -col;
                }
            }
            vecs.set_column(dst, &col);
        }
        Self {
            values: vals,
            vectors: vecs,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Leading `k` eigenvector columns.
    pub fn leading(&self, k: usize) -> DMatrix<f64> {
        self.vectors.columns(0, k).into_owned()
    }
}

/// Solve `A v = λ B v` for symmetric `A` and SPD `B` by Cholesky whitening.
///
/// The eigenvectors satisfy `Vᵀ B V = I` and are returned in descending order
/// of `λ`.
pub fn generalized_eigendecomposition(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<EigenPair> {
    if a.dim() != b.dim() {
        return Err(Error::arg(format!(
            "pencil dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let chol = b.cholesky()?;
    let half = chol.solve_lower_mat(a.as_matrix());
    let c = chol.solve_lower_mat(&half.transpose());
    let c = SymmetricMatrix::from_matrix(c)?;
    let eig = SymmetricEigen::new(c.into_inner());
    let vectors = chol.solve_upper_mat(&eig.eigenvectors);
    Ok(EigenPair::sorted(eig.eigenvalues, vectors))
}

/// Mean and variance of `(X−μ)ᵀ Σ₂⁻¹ (X−μ)` for `X ~ N(μ, Σ₁)`.
///
/// The quadratic form is distributed as `Σ λᵢ χ²₁` over the generalized
/// eigenvalues of the pencil `(Σ₁, Σ₂)`, so the mean is `Σ λᵢ` and the
/// variance `2 Σ λᵢ²`.
pub fn quadratic_form_moments(sigma1: &SymmetricMatrix, sigma2: &SymmetricMatrix) -> Result<(f64, f64)> {
    if sigma1.dim() != sigma2.dim() {
        return Err(Error::arg(format!(
            "covariance dimensions differ: {} vs {}",
            sigma1.dim(),
            sigma2.dim()
        )));
    }
    let eig = generalized_eigendecomposition(sigma1, sigma2)?;
    let mean = eig.values.sum();
    let var = 2.0 * eig.values.iter().map(|l| l * l).sum::<f64>();
    Ok((mean, var))
}

/// `rows × cols` matrix with orthonormal columns (`cols ≤ rows`), from the QR
/// factorization of a standard-normal matrix with the sign of `R`'s diagonal
/// made positive.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(cols <= rows, "cannot fit {cols} orthonormal columns in R^{rows}");
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            let neg = -q.column(j);
            q.set_column(j, &neg);
        }
    }
    q
}
