use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MonotoneComponent;
use crate::error::{Error, Result};

/// Per-coordinate affine standardization `z̃ = (z − mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    /// Column means and standard deviations of an `N × n` sample matrix.
    /// Constant columns get unit scale.
    pub fn from_samples(samples: &DMatrix<f64>) -> Self {
        let n = samples.nrows() as f64;
        let mut mean = Vec::with_capacity(samples.ncols());
        let mut scale = Vec::with_capacity(samples.ncols());
        for col in samples.column_iter() {
            let m = col.sum() / n;
            let var = if n > 1.0 {
                col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            mean.push(m);
            scale.push(if var > 0.0 && var.is_finite() { var.sqrt() } else { 1.0 });
        }
        Self { mean, scale }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(z, (m, s))| (z - m) / s)
            .collect()
    }

    pub fn apply_matrix(&self, samples: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = samples.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.mean.len() != self.scale.len() {
            return Err(Error::arg("standardization mean and scale lengths differ"));
        }
        if self.scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::arg(
                "standardization constants must be finite with positive scales",
            ));
        }
        Ok(())
    }
}

/// Maps that push a target distribution to a standard normal.
pub trait TransportMap {
    /// Number of input coordinates.
    fn dim(&self) -> usize;

    /// `(S(z), log det ∇S(z))`.
    fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)>;

    /// `S⁻¹(w)`.
    fn invert(&self, w: &[f64]) -> Result<Vec<f64>>;
}

pub fn map_forward<T: TransportMap + ?Sized>(map: &T, z: &[f64]) -> Result<(Vec<f64>, f64)> {
    map.forward(z)
}

pub fn map_invert<T: TransportMap + ?Sized>(map: &T, w: &[f64]) -> Result<Vec<f64>> {
    map.invert(w)
}

/// Lower-triangular map whose first `n_conditioning` inputs are conditioned
/// on rather than transported.
///
/// Output `i` is `S^i(z̃_{1:n_conditioning+i+1})` on standardized inputs, so
/// the map is `x ↦ S(c, x)` for fixed conditioning values `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangularMap {
    n_conditioning: usize,
    standardization: Standardization,
    components: Vec<MonotoneComponent>,
}

impl TriangularMap {
    pub fn new(
        n_conditioning: usize,
        standardization: Standardization,
        components: Vec<MonotoneComponent>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::arg("a map needs at least one component"));
        }
        for (i, c) in components.iter().enumerate() {
            if c.dim() != n_conditioning + i + 1 {
                return Err(Error::arg(format!(
                    "component {i} has dimension {}, expected {}",
                    c.dim(),
                    n_conditioning + i + 1
                )));
            }
        }
        standardization.validate()?;
        if standardization.len() != n_conditioning + components.len() {
            return Err(Error::arg(format!(
                "standardization has length {}, expected {}",
                standardization.len(),
                n_conditioning + components.len()
            )));
        }
        Ok(Self {
            n_conditioning,
            standardization,
            components,
        })
    }

    /// `S(z) = z` in `n` variables.
    pub fn identity(n: usize) -> Self {
        Self::new(
            0,
            Standardization::identity(n),
            (1..=n).map(MonotoneComponent::identity).collect(),
        )
        .unwrap()
    }

    pub fn n_conditioning(&self) -> usize {
        self.n_conditioning
    }

    pub fn dim_in(&self) -> usize {
        self.n_conditioning + self.components.len()
    }

    pub fn dim_out(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[MonotoneComponent] {
        &self.components
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    /// Same map with every component using quadrature order `order`.
    pub fn with_quadrature_order(&self, order: usize) -> Result<Self> {
        let comps = self
            .components
            .iter()
            .map(|c| c.with_quadrature_order(order))
            .collect::<Result<_>>()?;
        Self::new(self.n_conditioning, self.standardization.clone(), comps)
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim_in() {
            return Err(Error::arg(format!(
                "input has length {}, expected {}",
                z.len(),
                self.dim_in()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("input has non-finite entries"));
        }
        Ok(())
    }

    fn log_scale(&self) -> f64 {
        self.standardization.scale[self.n_conditioning..]
            .iter()
            .map(|s| s.ln())
            .sum()
    }

    /// Image of the transported coordinates and the log-determinant of their
    /// Jacobian, given the full input (conditioning values first).
    pub fn forward_full(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_input(z)?;
        let zs = self.standardization.apply(z);
        let mut image = Vec::with_capacity(self.dim_out());
        let mut logdet = -self.log_scale();
        for (i, c) in self.components.iter().enumerate() {
            let (s, ld) = c.evaluate_log(&zs[..self.n_conditioning + i + 1]);
            image.push(s);
            logdet += ld;
        }
        Ok((image, logdet))
    }

    /// Row-wise [`forward_full`](Self::forward_full) over an `N × dim_in` matrix.
    pub fn forward_batch(&self, samples: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if samples.ncols() != self.dim_in() {
            return Err(Error::arg(format!(
                "samples have {} columns, expected {}",
                samples.ncols(),
                self.dim_in()
            )));
        }
        let rows: Vec<(Vec<f64>, f64)> = (0..samples.nrows())
            .into_par_iter()
            .map(|i| {
                let z: Vec<f64> = samples.row(i).iter().copied().collect();
                self.forward_full(&z)
            })
            .collect::<Result<_>>()?;
        let image = DMatrix::from_fn(rows.len(), self.dim_out(), |i, j| rows[i].0[j]);
        let logdet = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        Ok((image, logdet))
    }

    /// Solve `S(cond, x) = w` for `x`.
    pub fn invert_conditional(&self, cond: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        if cond.len() != self.n_conditioning || w.len() != self.dim_out() {
            return Err(Error::arg(format!(
                "inversion expects {} conditioning and {} target values, got {} and {}",
                self.n_conditioning,
                self.dim_out(),
                cond.len(),
                w.len()
            )));
        }
        let st = &self.standardization;
        let mut zs: Vec<f64> = st.apply(cond);
        for (i, c) in self.components.iter().enumerate() {
            let t = c.invert(&zs, w[i]).map_err(|e| e.in_component(i))?;
            zs.push(t);
        }
        Ok(zs[self.n_conditioning..]
            .iter()
            .enumerate()
            .map(|(i, t)| st.mean[self.n_conditioning + i] + st.scale[self.n_conditioning + i] * t)
            .collect())
    }
}

impl TransportMap for TriangularMap {
    fn dim(&self) -> usize {
        self.dim_in()
    }

    fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.forward_full(z)
    }

    fn invert(&self, w: &[f64]) -> Result<Vec<f64>> {
        if self.n_conditioning > 0 {
            return Err(Error::arg("conditional map: use invert_conditional"));
        }
        self.invert_conditional(&[], w)
    }
}

/// Which variable a block map transports first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    YThenX,
    XThenY,
}

/// Two-block triangular map `(a, b) ↦ (S_lead(a), S_trail(a, b))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockTriangularMap {
    ordering: Ordering,
    leading: TriangularMap,
    trailing: TriangularMap,
}

impl BlockTriangularMap {
    pub fn new(ordering: Ordering, leading: TriangularMap, trailing: TriangularMap) -> Result<Self> {
        if leading.n_conditioning() != 0 {
            return Err(Error::arg("the leading block cannot be conditional"));
        }
        if trailing.n_conditioning() != leading.dim_out() {
            return Err(Error::arg(format!(
                "the trailing block conditions on {} variables but the leading block has {}",
                trailing.n_conditioning(),
                leading.dim_out()
            )));
        }
        Ok(Self {
            ordering,
            leading,
            trailing,
        })
    }

    /// Split a full triangular map after its first `n_lead` components.
    pub fn from_triangular(ordering: Ordering, map: &TriangularMap, n_lead: usize) -> Result<Self> {
        if map.n_conditioning() != 0 || n_lead == 0 || n_lead >= map.dim_out() {
            return Err(Error::arg("cannot split this map into two blocks"));
        }
        let st = map.standardization();
        let lead_st = Standardization {
            mean: st.mean[..n_lead].to_vec(),
            scale: st.scale[..n_lead].to_vec(),
        };
        let leading = TriangularMap::new(0, lead_st, map.components()[..n_lead].to_vec())?;
        let trailing = TriangularMap::new(n_lead, st.clone(), map.components()[n_lead..].to_vec())?;
        Self::new(ordering, leading, trailing)
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    pub fn leading(&self) -> &TriangularMap {
        &self.leading
    }

    pub fn trailing(&self) -> &TriangularMap {
        &self.trailing
    }

    pub fn n_leading(&self) -> usize {
        self.leading.dim_out()
    }

    pub fn n_trailing(&self) -> usize {
        self.trailing.dim_out()
    }
}

impl TransportMap for BlockTriangularMap {
    fn dim(&self) -> usize {
        self.trailing.dim_in()
    }

    fn forward(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        if z.len() != self.dim() {
            return Err(Error::arg(format!(
                "input has length {}, expected {}",
                z.len(),
                self.dim()
            )));
        }
        let (mut a, la) = self.leading.forward_full(&z[..self.n_leading()])?;
        let (b, lb) = self.trailing.forward_full(z)?;
        a.extend(b);
        Ok((a, la + lb))
    }

    fn invert(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.dim() {
            return Err(Error::arg(format!(
                "input has length {}, expected {}",
                w.len(),
                self.dim()
            )));
        }
        let n = self.n_leading();
        let mut a = self.leading.invert_conditional(&[], &w[..n])?;
        let b = self.trailing.invert_conditional(&a, &w[n..]).map_err(|e| match e {
            Error::Component { index, source } => Error::Component {
                index: index + n,
                source,
            },
            e => e,
        })?;
        a.extend(b);
        Ok(a)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::transport::{MultiIndexSet, Rectifier};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn random_map(n: usize, degree: u32, seed: u64) -> TriangularMap {
        let mut rng = stream(seed, "map", 0);
        let comps = (1..=n)
            .map(|k| {
                let set = MultiIndexSet::total_degree(k, degree);
                let c = (0..set.len())
                    .map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                MonotoneComponent::new(set, c, Rectifier::Softplus, 32).unwrap()
            })
            .collect();
        let st = Standardization {
            mean: (0..n).map(|i| 0.1 * i as f64).collect(),
            scale: (0..n).map(|i| 1.0 + 0.2 * i as f64).collect(),
        };
        TriangularMap::new(0, st, comps).unwrap()
    }

    #[test]
    fn identity_map() {
        let m = TriangularMap::identity(3);
        let (img, ld) = m.forward(&[0.4, -1.0, 2.0]).unwrap();
        for (a, b) in img.iter().zip([0.4, -1.0, 2.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(ld, 0.0, epsilon = 1e-14);
        let back = m.invert(&[0.4, -1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(back[2], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn order_of_inputs_matters() {
        let m = random_map(2, 2, 1);
        let a = m.forward(&[0.5, -0.5]).unwrap().0;
        let b = m.forward(&[-0.5, 0.5]).unwrap().0;
        assert_ne!(a, b);
    }

    #[test]
    fn logdet_matches_finite_difference_jacobian() {
        let m = random_map(4, 2, 2);
        let z = [0.3, -0.2, 1.1, 0.4];
        let (_, ld) = m.forward(&z).unwrap();
        let h = 1e-6;
        let mut jac = DMatrix::zeros(4, 4);
        for j in 0..4 {
            let mut zp = z;
            let mut zm = z;
            zp[j] += h;
            zm[j] -= h;
            let fp = m.forward(&zp).unwrap().0;
            let fm = m.forward(&zm).unwrap().0;
            for i in 0..4 {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        assert!((jac.determinant().abs().ln() - ld).abs() < 1e-5);
    }

    #[test]
    fn triangularity_is_exact() {
        let m = random_map(4, 2, 3);
        let z = [0.3, -0.2, 1.1, 0.4];
        let base = m.forward(&z).unwrap().0;
        let mut zp = z;
        zp[3] += 0.7;
        zp[2] -= 0.3;
        let pert = m.forward(&zp).unwrap().0;
        assert_eq!(base[0], pert[0]);
        assert_eq!(base[1], pert[1]);
    }

    #[test]
    fn round_trip() {
        // random degree-2 components have a one-sided bounded range, so
        // targets are taken from the image of the map
        let m = random_map(5, 2, 4);
        let mut rng = stream(4, "w", 0);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let z: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let w = m.forward(&z).unwrap().0;
            let back = m.invert(&w).unwrap();
            let again = m.forward(&back).unwrap().0;
            for i in 0..5 {
                worst = worst.max((back[i] - z[i]).abs()).max((again[i] - w[i]).abs());
            }
        }
        assert!(worst < 1e-8, "max error {worst}");
    }

    #[test]
    fn unreachable_target_diverges() {
        let set = MultiIndexSet::new(1, vec![vec![0], vec![1], vec![2]]).unwrap();
        // ∂f = −√2·t, so S is bounded above
        let c = MonotoneComponent::new(set, vec![0.0, 0.0, -1.0], Rectifier::Softplus, 32).unwrap();
        let m = TriangularMap::new(0, Standardization::identity(1), vec![c]).unwrap();
        assert!(matches!(m.invert(&[50.0]), Err(Error::Component { index: 0, .. })));
    }

    #[test]
    fn block_split_matches_full_map() {
        let full = random_map(5, 2, 6);
        let block = BlockTriangularMap::from_triangular(Ordering::YThenX, &full, 2).unwrap();
        let z = [0.1, 0.9, -0.4, 0.3, -1.2];
        let (a, la) = full.forward(&z).unwrap();
        let (b, lb) = block.forward(&z).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(la, lb, epsilon = 1e-13);
        let back = block.invert(&a).unwrap();
        for (x, y) in back.iter().zip(&z) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn input_validation() {
        let m = random_map(2, 1, 0);
        assert!(m.forward(&[0.0]).is_err());
        assert!(m.forward(&[0.0, f64::INFINITY]).is_err());
        assert!(TriangularMap::new(0, Standardization::identity(2), vec![MonotoneComponent::identity(2)]).is_err());
        let bad_scale = Standardization {
            mean: vec![0.0],
            scale: vec![0.0],
        };
        assert!(TriangularMap::new(0, bad_scale, vec![MonotoneComponent::identity(1)]).is_err());
    }
}
