use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::hermite::hermite_values;
use super::{MultiIndexSet, Rectifier};
use crate::error::{Error, Result};
use crate::numerics::{unit_rule, UnitRule};

pub const DEFAULT_QUADRATURE_ORDER: usize = 32;
/// Highest polynomial degree accepted in any coordinate.
pub const MAX_DEGREE: u32 = 30;

const INVERT_TOL: f64 = 1e-10;
const INVERT_MAX_ITER: usize = 100;
const INVERT_BOUND: f64 = 1e6;

/// One monotone map component
/// `S(z) = f(z_{<k}, 0) + ∫₀^{z_k} g(∂_k f(z_{<k}, t)) dt`
/// with `f = Σ_α c_α ψ_α`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ComponentRepr", into = "ComponentRepr")]
pub struct MonotoneComponent {
    index_set: MultiIndexSet,
    coefficients: Vec<f64>,
    rectifier: Rectifier,
    quadrature_order: usize,
    max_degrees: Vec<u32>,
    rule: Arc<UnitRule>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentRepr {
    multi_indices: MultiIndexSet,
    coefficients: Vec<f64>,
    rectifier: Rectifier,
    quadrature_order: usize,
}

impl TryFrom<ComponentRepr> for MonotoneComponent {
    type Error = Error;

    fn try_from(r: ComponentRepr) -> Result<Self> {
        Self::new(r.multi_indices, r.coefficients, r.rectifier, r.quadrature_order)
    }
}

impl From<MonotoneComponent> for ComponentRepr {
    fn from(c: MonotoneComponent) -> Self {
        Self {
            multi_indices: c.index_set,
            coefficients: c.coefficients,
            rectifier: c.rectifier,
            quadrature_order: c.quadrature_order,
        }
    }
}

impl PartialEq for MonotoneComponent {
    fn eq(&self, other: &Self) -> bool {
        self.index_set == other.index_set
            && self.coefficients == other.coefficients
            && self.rectifier == other.rectifier
            && self.quadrature_order == other.quadrature_order
    }
}

impl MonotoneComponent {
    pub fn new(
        index_set: MultiIndexSet,
        coefficients: Vec<f64>,
        rectifier: Rectifier,
        quadrature_order: usize,
    ) -> Result<Self> {
        if coefficients.len() != index_set.len() {
            return Err(Error::arg(format!(
                "{} coefficients for {} multi-indices",
                coefficients.len(),
                index_set.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::arg("coefficients must be finite"));
        }
        if quadrature_order == 0 {
            return Err(Error::arg("quadrature order must be positive"));
        }
        let max_degrees = index_set.max_degrees();
        if max_degrees.iter().any(|&d| d > MAX_DEGREE) {
            return Err(Error::arg(format!("polynomial degree above {MAX_DEGREE}")));
        }
        Ok(Self {
            index_set,
            coefficients,
            rectifier,
            quadrature_order,
            max_degrees,
            rule: unit_rule(quadrature_order),
        })
    }

    /// All-zero coefficients: `S(z) = log(2)·z_k` for a softplus rectifier.
    pub fn zeros(index_set: MultiIndexSet) -> Self {
        let n = index_set.len();
        Self::new(index_set, vec![0.0; n], Rectifier::Softplus, DEFAULT_QUADRATURE_ORDER).unwrap()
    }

    /// The affine component `S(z) = z_k` in `dim` variables.
    pub fn identity(dim: usize) -> Self {
        let set = MultiIndexSet::total_degree(dim, 1);
        let g = Rectifier::Softplus;
        let coefficients = set
            .iter()
            .map(|a| if a[dim - 1] == 1 { g.inverse(1.0) } else { 0.0 })
            .collect();
        Self::new(set, coefficients, g, DEFAULT_QUADRATURE_ORDER).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.index_set.dim()
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn rectifier(&self) -> Rectifier {
        self.rectifier
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn rule(&self) -> &UnitRule {
        &self.rule
    }

    /// Nodes and weights actually used for the integral. When `∂_k f` does
    /// not depend on the last coordinate the integrand is constant and the
    /// one-point rule is exact.
    pub(crate) fn effective_rule(&self) -> (&[f64], &[f64]) {
        if self.max_last_degree() <= 1 {
            (&[0.5], &[1.0])
        } else {
            (&self.rule.nodes, &self.rule.weights)
        }
    }

    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Result<Self> {
        Self::new(
            self.index_set.clone(),
            coefficients,
            self.rectifier,
            self.quadrature_order,
        )
    }

    pub fn with_quadrature_order(&self, order: usize) -> Result<Self> {
        Self::new(self.index_set.clone(), self.coefficients.clone(), self.rectifier, order)
    }

    /// Degree of the last coordinate in each multi-index.
    pub(crate) fn last_degree(&self, j: usize) -> usize {
        self.index_set.get(j)[self.dim() - 1] as usize
    }

    pub(crate) fn max_last_degree(&self) -> usize {
        self.max_degrees[self.dim() - 1] as usize
    }

    /// `Π_{j<k} ψ_{α_j}(z_j)` for every multi-index.
    pub(crate) fn prefix_features(&self, prefix: &[f64], out: &mut [f64]) {
        let k = self.dim();
        let mut buf = [0.0f64; MAX_DEGREE as usize + 1];
        let mut flat = Vec::new();
        let mut offsets = Vec::with_capacity(k);
        for j in 0..k - 1 {
            let n = self.max_degrees[j] as usize;
            offsets.push(flat.len());
            hermite_values(prefix[j], n, &mut buf[..=n]);
            flat.extend_from_slice(&buf[..=n]);
        }
        for (o, a) in out.iter_mut().zip(self.index_set.iter()) {
            let mut p = 1.0;
            for j in 0..k - 1 {
                p *= flat[offsets[j] + a[j] as usize];
            }
            *o = p;
        }
    }

    /// The one-dimensional function `t ↦ S(prefix, t)`.
    pub fn slice(&self, prefix: &[f64]) -> ComponentSlice<'_> {
        let mut p = vec![0.0; self.coefficients.len()];
        self.prefix_features(prefix, &mut p);
        let mut a = vec![0.0; self.max_last_degree() + 1];
        for (j, (c, pj)) in self.coefficients.iter().zip(&p).enumerate() {
            a[self.last_degree(j)] += c * pj;
        }
        ComponentSlice::new(self, a)
    }

    fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::arg(format!(
                "point has length {}, expected {}",
                z.len(),
                self.dim()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("point has non-finite entries"));
        }
        Ok(())
    }

    /// `(S(z), ∂_k S(z))`.
    pub fn evaluate(&self, z: &[f64]) -> Result<(f64, f64)> {
        self.check_point(z)?;
        let k = self.dim();
        let s = self.slice(&z[..k - 1]);
        Ok((s.value(z[k - 1]), s.derivative(z[k - 1])))
    }

    /// `(S(z), log ∂_k S(z))` without input checks.
    pub(crate) fn evaluate_log(&self, z: &[f64]) -> (f64, f64) {
        let k = self.dim();
        let s = self.slice(&z[..k - 1]);
        (s.value(z[k - 1]), s.ln_derivative(z[k - 1]))
    }

    /// Solve `S(prefix, t) = target` for `t`.
    pub fn invert(&self, prefix: &[f64], target: f64) -> Result<f64> {
        if prefix.len() + 1 != self.dim() {
            return Err(Error::arg(format!(
                "prefix has length {}, expected {}",
                prefix.len(),
                self.dim() - 1
            )));
        }
        if !target.is_finite() || prefix.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("non-finite inversion input"));
        }
        self.slice(prefix).solve(target)
    }
}

/// `S` restricted to a fixed prefix, as a function of the last coordinate.
///
/// `∂_k f(prefix, t) = Σ_d a_d ψ_d'(t)`, so the prefix enters only through the
/// coefficients `a_d`.
pub struct ComponentSlice<'a> {
    comp: &'a MonotoneComponent,
    a: Vec<f64>,
    f0: f64,
}

impl<'a> ComponentSlice<'a> {
    fn new(comp: &'a MonotoneComponent, a: Vec<f64>) -> Self {
        let mut h = [0.0; MAX_DEGREE as usize + 1];
        let n = a.len() - 1;
        hermite_values(0.0, n, &mut h[..=n]);
        let f0 = a.iter().zip(&h).map(|(a, h)| a * h).sum();
        Self { comp, a, f0 }
    }

    /// `∂_k f(prefix, t)`.
    #[inline]
    pub fn df(&self, t: f64) -> f64 {
        let n = self.a.len() - 1;
        if n == 0 {
            return 0.0;
        }
        let mut h = [0.0; MAX_DEGREE as usize + 1];
        hermite_values(t, n - 1, &mut h[..n]);
        (1..=n).map(|d| self.a[d] * (d as f64).sqrt() * h[d - 1]).sum()
    }

    pub fn value(&self, t: f64) -> f64 {
        let g = self.comp.rectifier;
        let (nodes, weights) = self.comp.effective_rule();
        let integral: f64 = nodes.iter().zip(weights).map(|(u, w)| w * g.eval(self.df(t * u))).sum();
        self.f0 + t * integral
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.comp.rectifier.eval(self.df(t))
    }

    pub fn ln_derivative(&self, t: f64) -> f64 {
        self.comp.rectifier.ln_eval(self.df(t))
    }

    /// Expanding bracket, then Newton steps safeguarded by bisection.
    pub fn solve(&self, target: f64) -> Result<f64> {
        let r0 = self.value(0.0) - target;
        if r0 == 0.0 {
            return Ok(0.0);
        }
        let dir = if r0 < 0.0 { 1.0 } else { -1.0 };
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        let mut step = 1.0f64;
        loop {
            let t = dir * step.min(INVERT_BOUND);
            let r = self.value(t) - target;
            if r == 0.0 {
                return Ok(t);
            }
            if (r > 0.0) == (dir > 0.0) {
                if dir > 0.0 {
                    hi = t;
                } else {
                    lo = t;
                }
                break;
            }
            if dir > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if step >= INVERT_BOUND {
                return Err(Error::Divergence {
                    target,
                    bound: INVERT_BOUND,
                });
            }
            step *= 2.0;
        }
        // iterate until the step reaches rounding level; a residual test
        // alone leaves t inaccurate where the slope is small
        let mut t = 0.5 * (lo + hi);
        let mut r = self.value(t) - target;
        for _ in 0..INVERT_MAX_ITER {
            if r == 0.0 {
                return Ok(t);
            }
            if r < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let newton = t - r / self.derivative(t);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let step = (next - t).abs();
            t = next;
            r = self.value(t) - target;
            if step <= 4.0 * f64::EPSILON * t.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        if r.abs() >= INVERT_TOL {
            log::warn!("component inversion stopped with residual {r:e} at target {target}");
        }
        Ok(t)
    }
}
