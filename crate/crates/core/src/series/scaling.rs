use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column min-max scaling fitted on a training block.
///
/// Values outside the training range map outside `[0, 1]`; a constant
/// training column maps every value to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    /// Fit on the rows of `train` (observations × columns).
    pub fn fit(train: ArrayView2<'_, f64>) -> Result<Self> {
        let cols: Vec<Vec<f64>> = train.columns().into_iter().map(|c| c.to_vec()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        Self::fit_columns(&refs)
    }

    /// Fit one scaler column per slice.
    pub fn fit_columns(columns: &[&[f64]]) -> Result<Self> {
        let mut min = Vec::with_capacity(columns.len());
        let mut max = Vec::with_capacity(columns.len());
        for (i, c) in columns.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "scaler column {i} is empty"
                )));
            }
            min.push(c.iter().copied().fold(f64::INFINITY, f64::min));
            max.push(c.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    pub fn apply_value(&self, col: usize, x: f64) -> f64 {
        let range = self.max[col] - self.min[col];
        if range > 0.0 {
            (x - self.min[col]) / range
        } else {
            0.0
        }
    }

    /// Inverse map; a constant column inverts to its single training value.
    pub fn inverse_value(&self, col: usize, z: f64) -> f64 {
        let range = self.max[col] - self.min[col];
        if range > 0.0 {
            z * range + self.min[col]
        } else {
            self.min[col]
        }
    }

    pub fn apply_slice(&self, col: usize, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply_value(col, x)).collect()
    }

    pub fn inverse_slice(&self, col: usize, zs: &[f64]) -> Vec<f64> {
        zs.iter().map(|&z| self.inverse_value(col, z)).collect()
    }

    pub fn apply(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_width(data.ncols())?;
        let mut out = data.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|x| self.apply_value(j, x));
        }
        Ok(out)
    }

    pub fn inverse(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_width(data.ncols())?;
        let mut out = data.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|z| self.inverse_value(j, z));
        }
        Ok(out)
    }

    fn check_width(&self, ncols: usize) -> Result<()> {
        if ncols != self.width() {
            return Err(Error::Shape(format!(
                "scaler has {} columns, data has {ncols}",
                self.width()
            )));
        }
        Ok(())
    }
}
