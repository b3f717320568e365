use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Samples formed by sliding a window over a feature matrix.
///
/// Sample `i` sees feature rows `i .. i + window` and is scored against
/// `targets[i]`. A window of 1 turns every row into one independent sample,
/// which is how the feedforward models consume a lagged design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedData {
    inputs: Array2<f64>,
    targets: Vec<f64>,
    window: usize,
}

impl WindowedData {
    pub fn new(inputs: Array2<f64>, targets: Vec<f64>, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument(
                "window length must be at least 1".into(),
            ));
        }
        if inputs.nrows() != targets.len() + window - 1 {
            return Err(Error::Shape(format!(
                "{} feature rows cannot form {} windows of length {window}",
                inputs.nrows(),
                targets.len()
            )));
        }
        Ok(Self {
            inputs,
            targets,
            window,
        })
    }

    /// One sample per design row.
    pub fn from_design(matrix: Array2<f64>, targets: Vec<f64>) -> Result<Self> {
        Self::new(matrix, targets, 1)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn features(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Feature rows at step `t` of each window in `batch` (batch × features).
    pub fn step(&self, batch: &[usize], t: usize) -> Array2<f64> {
        let p = self.features();
        let mut out = Array2::<f64>::zeros((batch.len(), p));
        for (b, &i) in batch.iter().enumerate() {
            out.row_mut(b).assign(&self.inputs.row(i + t));
        }
        out
    }

    /// Contiguous block of samples.
    pub fn subset(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::InvalidArgument(format!(
                "sample range {range:?} out of bounds"
            )));
        }
        let rows = range.start..range.end + self.window - 1;
        Ok(Self {
            inputs: self.inputs.slice(ndarray::s![rows, ..]).to_owned(),
            targets: self.targets[range].to_vec(),
            window: self.window,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn windows_and_steps() {
        let d = WindowedData::new(array![[1.0], [2.0], [3.0], [4.0]], vec![10.0, 20.0], 3).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.step(&[0, 1], 2), array![[3.0], [4.0]]);
        let s = d.subset(1..2).unwrap();
        assert_eq!(s.inputs(), array![[2.0], [3.0], [4.0]]);
        assert!(WindowedData::new(array![[1.0]], vec![1.0, 2.0], 1).is_err());
    }
}
