use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::SymmetricMatrix;
use crate::transport::{hermite_values, MonotoneComponent, Rectifier, MAX_DEGREE};

/// Sample-dependent quantities of one component's objective that do not
/// depend on the coefficients.
///
/// Grouping multi-indices by their last degree `d` gives
/// `∂_k f(z_{<k}, t) = Σ_d a_d ψ_d'(t)` with `a_d = Σ_{α_k = d} c_α P_α(z_{<k})`,
/// so every evaluation reduces to prefix products `P_α` and one-dimensional
/// Hermite derivatives at the quadrature nodes, all of which are cached here.
pub(crate) struct Design {
    n: usize,
    nc: usize,
    /// Highest degree in the last coordinate.
    nd: usize,
    nq: usize,
    /// `n × nc` prefix products.
    p: Vec<f64>,
    last: Vec<usize>,
    /// `ψ_d(0)` for `d = 0..=nd`.
    h0: Vec<f64>,
    z: Vec<f64>,
    /// `ψ_d'(z u_q)` for `d = 1..=nd`, laid out `n × nq × nd`.
    hq: Vec<f64>,
    /// `ψ_d'(z)` for `d = 1..=nd`, laid out `n × nd`.
    he: Vec<f64>,
    weights: Vec<f64>,
    rect: Rectifier,
}

/// Per-sample intermediate values shared by gradient and Hessian.
struct SampleTerms {
    s: f64,
    /// `∂S/∂a_d`.
    b: Vec<f64>,
    /// first and second derivatives of `log g` at `∂_k f(z)`.
    psi: f64,
    chi: f64,
}

impl Design {
    pub(crate) fn new(comp: &MonotoneComponent, samples: &DMatrix<f64>) -> Result<Self> {
        let k = comp.dim();
        if samples.ncols() != k {
            return Err(Error::arg(format!(
                "samples have {} columns, component expects {k}",
                samples.ncols()
            )));
        }
        if samples.nrows() == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("samples contain non-finite values"));
        }
        let n = samples.nrows();
        let nc = comp.coefficients().len();
        let nd = comp.max_last_degree();
        let (nodes, weights) = comp.effective_rule();
        let nq = nodes.len();
        let last: Vec<usize> = (0..nc).map(|j| comp.last_degree(j)).collect();
        let mut h0 = vec![0.0; nd + 1];
        hermite_values(0.0, nd, &mut h0);

        let mut p = vec![0.0; n * nc];
        let mut z = vec![0.0; n];
        let mut hq = vec![0.0; n * nq * nd];
        let mut he = vec![0.0; n * nd];
        let mut prefix = vec![0.0; k - 1];
        let mut buf = [0.0; MAX_DEGREE as usize + 1];
        for i in 0..n {
            for j in 0..k - 1 {
                prefix[j] = samples[(i, j)];
            }
            comp.prefix_features(&prefix, &mut p[i * nc..(i + 1) * nc]);
            let zi = samples[(i, k - 1)];
            z[i] = zi;
            if nd > 0 {
                let mut fill = |t: f64, out: &mut [f64]| {
                    hermite_values(t, nd - 1, &mut buf[..nd]);
                    for d in 1..=nd {
                        out[d - 1] = (d as f64).sqrt() * buf[d - 1];
                    }
                };
                for (q, u) in nodes.iter().enumerate() {
                    let off = (i * nq + q) * nd;
                    fill(zi * u, &mut hq[off..off + nd]);
                }
                fill(zi, &mut he[i * nd..(i + 1) * nd]);
            }
        }
        Ok(Self {
            n,
            nc,
            nd,
            nq,
            p,
            last,
            h0,
            z,
            hq,
            he,
            weights: weights.to_vec(),
            rect: comp.rectifier(),
        })
    }

    fn collapse(&self, c: &[f64], i: usize, a: &mut [f64]) {
        a.iter_mut().for_each(|v| *v = 0.0);
        let row = &self.p[i * self.nc..(i + 1) * self.nc];
        for j in 0..self.nc {
            a[self.last[j]] += c[j] * row[j];
        }
    }

    fn df(&self, a: &[f64], h: &[f64]) -> f64 {
        (1..=self.nd).map(|d| a[d] * h[d - 1]).sum()
    }

    /// Value `½S² − log g(∂_k f)` of sample `i`, and optionally the
    /// quantities needed for derivatives.
    fn sample(&self, a: &[f64], i: usize, derivs: bool, sigma: &mut [f64]) -> (f64, Option<SampleTerms>) {
        let zi = self.z[i];
        let g = self.rect;
        let f0: f64 = a.iter().zip(&self.h0).map(|(a, h)| a * h).sum();
        let mut integral = 0.0;
        for q in 0..self.nq {
            let off = (i * self.nq + q) * self.nd;
            let u = self.df(a, &self.hq[off..off + self.nd]);
            integral += self.weights[q] * g.eval(u);
            if derivs {
                sigma[q] = u;
            }
        }
        let s = f0 + zi * integral;
        let e = self.df(a, &self.he[i * self.nd..(i + 1) * self.nd]);
        let value = 0.5 * s * s - g.ln_eval(e);
        if !derivs {
            return (value, None);
        }
        let mut b = self.h0.clone();
        for q in 0..self.nq {
            let w = zi * self.weights[q] * g.deriv(sigma[q]);
            let off = (i * self.nq + q) * self.nd;
            for d in 1..=self.nd {
                b[d] += w * self.hq[off + d - 1];
            }
        }
        let (psi, chi) = g.ln_derivs(e);
        (value, Some(SampleTerms { s, b, psi, chi }))
    }

    /// Mean objective and its gradient.
    pub(crate) fn value_grad(&self, c: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|v| *v = 0.0);
        let mut a = vec![0.0; self.nd + 1];
        let mut u = vec![0.0; self.nq];
        let mut ga = vec![0.0; self.nd + 1];
        let mut total = 0.0;
        for i in 0..self.n {
            self.collapse(c, i, &mut a);
            let (v, t) = self.sample(&a, i, true, &mut u);
            let t = t.unwrap();
            total += v;
            for d in 0..=self.nd {
                let e = if d == 0 { 0.0 } else { self.he[i * self.nd + d - 1] };
                ga[d] = t.s * t.b[d] - t.psi * e;
            }
            let row = &self.p[i * self.nc..(i + 1) * self.nc];
            for j in 0..self.nc {
                grad[j] += row[j] * ga[self.last[j]];
            }
        }
        let inv = 1.0 / self.n as f64;
        grad.iter_mut().for_each(|v| *v *= inv);
        total * inv
    }

    pub(crate) fn value(&self, c: &[f64]) -> f64 {
        let mut a = vec![0.0; self.nd + 1];
        let mut u = vec![0.0; self.nq];
        let mut total = 0.0;
        for i in 0..self.n {
            self.collapse(c, i, &mut a);
            total += self.sample(&a, i, false, &mut u).0;
        }
        total / self.n as f64
    }

    /// Hessian of the mean objective with respect to the coefficients.
    pub(crate) fn hessian(&self, c: &[f64]) -> DMatrix<f64> {
        let m = self.nd + 1;
        let mut h = DMatrix::zeros(self.nc, self.nc);
        let mut a = vec![0.0; m];
        let mut u = vec![0.0; self.nq];
        let mut ha = vec![0.0; m * m];
        let g = self.rect;
        for i in 0..self.n {
            self.collapse(c, i, &mut a);
            let (_, t) = self.sample(&a, i, true, &mut u);
            let t = t.unwrap();
            let zi = self.z[i];
            let he = &self.he[i * self.nd..(i + 1) * self.nd];
            let e = |d: usize| if d == 0 { 0.0 } else { he[d - 1] };
            for d in 0..m {
                for f in 0..=d {
                    ha[d * m + f] = t.b[d] * t.b[f] - t.chi * e(d) * e(f);
                }
            }
            // second derivative of S itself; nonzero only for d, f ≥ 1
            for q in 0..self.nq {
                let w = t.s * zi * self.weights[q] * g.second(u[q]);
                let off = (i * self.nq + q) * self.nd;
                for d in 1..m {
                    for f in 1..=d {
                        ha[d * m + f] += w * self.hq[off + d - 1] * self.hq[off + f - 1];
                    }
                }
            }
            let row = &self.p[i * self.nc..(i + 1) * self.nc];
            for j in 0..self.nc {
                let dj = self.last[j];
                for l in 0..=j {
                    let dl = self.last[l];
                    let v = if dj >= dl { ha[dj * m + dl] } else { ha[dl * m + dj] };
                    h[(j, l)] += row[j] * row[l] * v;
                }
            }
        }
        let inv = 1.0 / self.n as f64;
        for j in 0..self.nc {
            for l in 0..j {
                h[(j, l)] *= inv;
                h[(l, j)] = h[(j, l)];
            }
            h[(j, j)] *= inv;
        }
        h
    }
}

/// Mean of `½ S(zⁱ)² − log ∂_k S(zⁱ)` over the rows of `samples`, with its
/// gradient in the coefficients.
pub fn empirical_objective(comp: &MonotoneComponent, samples: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let design = Design::new(comp, samples)?;
    let mut grad = vec![0.0; comp.coefficients().len()];
    let v = design.value_grad(comp.coefficients(), &mut grad);
    if !v.is_finite() {
        return Err(Error::Numerical(format!("objective evaluated to {v}")));
    }
    Ok((v, grad))
}

/// Average negative coefficient-Hessian of the per-sample log pullback
/// density, which equals the Hessian of the empirical objective.
pub fn observed_fisher(comp: &MonotoneComponent, samples: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    let design = Design::new(comp, samples)?;
    SymmetricMatrix::from_matrix(design.hessian(comp.coefficients()))
}
