use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::{mean, Mat, Scalar};

/// Point-referenced observations: response `y`, treatments `a` (n×ℓ),
/// covariates `z` (n×v, possibly zero columns) and locations `s` (n×d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub y: Vec<T>,
    pub a: Mat<T>,
    pub z: Mat<T>,
    pub s: Mat<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(y: Vec<T>, a: Mat<T>, z: Mat<T>, s: Mat<T>) -> Result<Self> {
        let d = Self { y, a, z, s };
        d.validate()?;
        Ok(d)
    }

    /// Dataset without observed covariates.
    pub fn without_covariates(y: Vec<T>, a: Mat<T>, s: Mat<T>) -> Result<Self> {
        let n = y.len();
        Self::new(y, a, Mat::zeros(n, 0), s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.a.nrows() != n || self.z.nrows() != n || self.s.nrows() != n {
            return dim_err(format!(
                "row counts differ: y {n}, A {}, Z {}, S {}",
                self.a.nrows(),
                self.z.nrows(),
                self.s.nrows()
            ));
        }
        if n == 0 {
            return Err(Error::EmptyInput("dataset has no rows".into()));
        }
        if self.a.ncols() == 0 {
            return Err(Error::EmptyInput("dataset has no treatment columns".into()));
        }
        let finite = self.y.iter().all(|v| v.is_finite())
            && self.a.is_finite()
            && self.z.is_finite()
            && self.s.is_finite();
        if !finite {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_treatments(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_covariates(&self) -> usize {
        self.z.ncols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            a: self.a.select_rows(idx),
            z: self.z.select_rows(idx),
            s: self.s.select_rows(idx),
        }
    }

    /// `[Z 1]`, the covariate design with an intercept.
    pub fn covariate_design(&self) -> Mat<T> {
        self.z.with_intercept()
    }

    /// `[A Z 1]`, the outcome working-model design.
    pub fn outcome_design(&self) -> Mat<T> {
        self.a.hcat(&self.z).expect("same rows").with_intercept()
    }
}

/// Subtracts column means in place and returns them.
pub fn center_columns<T: Scalar>(m: &mut Mat<T>) -> Vec<T> {
    let means: Vec<T> = (0..m.ncols()).map(|j| mean(&m.col(j))).collect();
    for i in 0..m.nrows() {
        for (v, &c) in m.row_mut(i).iter_mut().zip(&means) {
            *v -= c;
        }
    }
    means
}

pub fn centered<T: Scalar>(v: &[T]) -> Vec<T> {
    let m = mean(v);
    v.iter().map(|&x| x - m).collect()
}
