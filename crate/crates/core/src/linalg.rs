//! Dense least squares used by the regression code.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Relative tolerance below which a Householder diagonal counts as zero.
const RANK_TOL: f64 = 1e-10;

/// Householder QR of `a` (rows ≥ cols), returning the packed factors.
struct Qr {
    qr: Array2<f64>,
    diag: Vec<f64>,
}

fn householder(a: ArrayView2<'_, f64>) -> Result<Qr> {
    let (m, n) = a.dim();
    if m < n {
        return Err(Error::InsufficientData(format!(
            "{m} rows cannot determine {n} coefficients"
        )));
    }
    let col_norms: Vec<f64> = a.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    let scale = col_norms
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut qr = a.to_owned();
    let mut diag = vec![0.0; n];
    for k in 0..n {
        let mut norm = 0.0;
        for i in k..m {
            norm += qr[[i, k]] * qr[[i, k]];
        }
        let norm = norm.sqrt();
        // A column whose component orthogonal to its predecessors vanishes
        // relative to the design scale is collinear.
        if col_norms[k] <= RANK_TOL * scale || norm <= RANK_TOL * col_norms[k] {
            return Err(Error::SingularDesign { column: k });
        }
        let alpha = if qr[[k, k]] > 0.0 { -norm } else { norm };
        qr[[k, k]] -= alpha;
        let vnorm2: f64 = (k..m).map(|i| qr[[i, k]] * qr[[i, k]]).sum();
        for j in k + 1..n {
            let mut dot = 0.0;
            for i in k..m {
                dot += qr[[i, k]] * qr[[i, j]];
            }
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                qr[[i, j]] -= f * qr[[i, k]];
            }
        }
        diag[k] = alpha;
    }
    Ok(Qr { qr, diag })
}

impl Qr {
    fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let (m, n) = self.qr.dim();
        let mut y = b.to_owned();
        for k in 0..n {
            let vnorm2: f64 = (k..m).map(|i| self.v(i, k).powi(2)).sum();
            let dot: f64 = (k..m).map(|i| self.v(i, k) * y[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                y[i] -= f * self.v(i, k);
            }
        }
        let mut x = Array1::zeros(n);
        for k in (0..n).rev() {
            let mut s = y[k];
            for j in k + 1..n {
                s -= self.qr[[k, j]] * x[j];
            }
            x[k] = s / self.diag[k];
        }
        x
    }

    fn v(&self, i: usize, k: usize) -> f64 {
        self.qr[[i, k]]
    }
}

/// Fails with the index of the first column that is (numerically) a linear
/// combination of the columns before it.
pub fn check_full_rank(a: ArrayView2<'_, f64>) -> Result<()> {
    householder(a).map(|_| ())
}

/// Least-squares solution of `a x ≈ b` by Householder QR.
pub fn lstsq(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "{} design rows vs {} targets",
            a.nrows(),
            b.len()
        )));
    }
    Ok(householder(a)?.solve(b))
}

/// Solve the symmetric positive-definite system `a x = b` by Cholesky.
pub fn cholesky_solve(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Numerical(format!(
                "matrix is not positive definite at pivot {j}"
            )));
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    let mut y = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[[i, k]] * y[k];
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[[k, i]] * y[k];
        }
        y[i] /= l[[i, i]];
    }
    Ok(y)
}
