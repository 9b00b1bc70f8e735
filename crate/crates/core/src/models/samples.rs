use nalgebra::DMatrix;

use super::Model;
use crate::error::{Error, Result};
use crate::rng::stream;

/// Paired joint samples with a train/evaluation split.
///
/// Rows `0..n_train` train the maps; the remaining rows evaluate the
/// estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSampleSet {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    seed: u64,
    n_train: usize,
}

impl JointSampleSet {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, seed: u64) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::arg(format!("X has {} rows but Y has {}", x.nrows(), y.nrows())));
        }
        let n_train = x.nrows();
        Ok(Self { x, y, seed, n_train })
    }

    /// Same samples with the first `n_train` rows used for training.
    pub fn with_split(mut self, n_train: usize) -> Result<Self> {
        if n_train > self.len() {
            return Err(Error::arg(format!(
                "training size {n_train} exceeds the {} available samples",
                self.len()
            )));
        }
        self.n_train = n_train;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_eval(&self) -> usize {
        self.len() - self.n_train
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn train_x(&self) -> DMatrix<f64> {
        self.x.rows(0, self.n_train).into_owned()
    }

    pub fn train_y(&self) -> DMatrix<f64> {
        self.y.rows(0, self.n_train).into_owned()
    }

    pub fn eval_x(&self) -> DMatrix<f64> {
        self.x.rows(self.n_train, self.n_eval()).into_owned()
    }

    pub fn eval_y(&self) -> DMatrix<f64> {
        self.y.rows(self.n_train, self.n_eval()).into_owned()
    }

    /// `[Y, X]` or `[X, Y]` stacked column-wise.
    pub fn stacked(&self, y_first: bool) -> DMatrix<f64> {
        let (a, b) = if y_first {
            (&self.y, &self.x)
        } else {
            (&self.x, &self.y)
        };
        let mut out = DMatrix::zeros(self.len(), a.ncols() + b.ncols());
        out.columns_mut(0, a.ncols()).copy_from(a);
        out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
        out
    }
}

/// `L` i.i.d. joint draws from `model`, reproducible in `seed`. All rows start
/// in the training part; see [`JointSampleSet::with_split`].
pub fn sample_joint<M: Model + ?Sized>(model: &M, l: usize, seed: u64) -> Result<JointSampleSet> {
    if l == 0 {
        return Err(Error::arg("sample count must be at least 1"));
    }
    let mut rng = stream(seed, "joint", 0);
    let mut x = DMatrix::zeros(l, model.n_x());
    let mut y = DMatrix::zeros(l, model.n_y());
    for i in 0..l {
        let (xi, yi) = model.sample_pair(&mut rng);
        x.row_mut(i).copy_from(&xi.transpose());
        y.row_mut(i).copy_from(&yi.transpose());
    }
    JointSampleSet::new(x, y, seed)
}
