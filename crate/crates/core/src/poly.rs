//! Lag-polynomial utilities shared by the ARIMA fitter and the simulators.
//!
//! AR polynomials are written `1 - φ₁B - … - φ_pB^p`; MA polynomials
//! `1 + θ₁B + … + θ_qB^q`.

/// Maps partial autocorrelations in (-1, 1) to the coefficients of a
/// stationary AR polynomial (Durbin–Levinson recursion).
pub fn pacf_to_ar(pacf: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(pacf.len());
    for (k, &r) in pacf.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi.push(r);
    }
    phi
}

/// Inverse of [`pacf_to_ar`] by step-down recursion; `None` when the
/// polynomial has a root on or inside the unit circle.
pub fn ar_to_pacf(phi: &[f64]) -> Option<Vec<f64>> {
    let mut a = phi.to_vec();
    let mut pacf = vec![0.0; phi.len()];
    for k in (0..phi.len()).rev() {
        let r = a[k];
        if !r.is_finite() || r.abs() >= 1.0 {
            return None;
        }
        pacf[k] = r;
        let denom = 1.0 - r * r;
        let prev = a.clone();
        for j in 0..k {
            a[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
        a.truncate(k);
    }
    Some(pacf)
}

/// Stationarity of `1 - Σ φ_i B^i`. Orders up to two use the closed-form
/// triangle; higher orders the step-down recursion.
pub fn is_stationary(phi: &[f64]) -> bool {
    match phi {
        [] => true,
        [a] => a.abs() < 1.0,
        [a, b] => b + a < 1.0 && b - a < 1.0 && b.abs() < 1.0,
        _ => ar_to_pacf(phi).is_some(),
    }
}

/// Invertibility of `1 + Σ θ_i B^i`.
pub fn is_invertible(theta: &[f64]) -> bool {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    is_stationary(&neg)
}

/// Product of two polynomials given by full coefficient vectors
/// (constant term first).
pub fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// AR coefficients of `φ(B)(1-B)^d`, in the `1 - Σ c_i B^i` convention.
pub fn integrated_ar(phi: &[f64], d: usize) -> Vec<f64> {
    let mut full = vec![1.0];
    full.extend(phi.iter().map(|p| -p));
    for _ in 0..d {
        full = multiply(&full, &[1.0, -1.0]);
    }
    full[1..].iter().map(|c| -c).collect()
}

/// First `h` MA(∞) weights ψ₀ = 1, ψ₁, … of `θ(B) / (φ(B)(1-B)^d)`.
pub fn psi_weights(phi: &[f64], theta: &[f64], d: usize, h: usize) -> Vec<f64> {
    let ar = integrated_ar(phi, d);
    let mut psi = vec![0.0; h];
    for j in 0..h {
        let mut v = if j == 0 {
            1.0
        } else {
            theta.get(j - 1).copied().unwrap_or(0.0)
        };
        for (i, a) in ar.iter().enumerate() {
            if i < j {
                v += a * psi[j - i - 1];
            }
        }
        psi[j] = v;
    }
    psi
}
