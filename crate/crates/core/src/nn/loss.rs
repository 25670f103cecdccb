//! Normalized mean squared error.

use crate::linalg::Real;
use crate::{Error, Result};

/// `(1/N) Σ ((g_i - x_i) / norm)²` and its gradient with respect to `g`.
///
/// `norm` is the object-class mean of the ground truth and is held constant
/// during differentiation.
pub fn loss_mse<T: Real>(g: &[T], x: &[T], norm: T) -> Result<(T, Vec<T>)> {
    if g.len() != x.len() || g.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "loss over {} outputs and {} targets",
            g.len(),
            x.len()
        )));
    }
    if norm == T::zero() || !norm.is_finite() {
        return Err(Error::Degenerate(format!(
            "loss normalizer {:?} must be finite and non-zero",
            norm
        )));
    }
    let n = T::from_f64(g.len() as f64);
    let inv_sq = T::one() / (norm * norm);
    let two = T::from_f64(2.0);
    let mut loss = T::zero();
    let grad = g
        .iter()
        .zip(x)
        .map(|(&gi, &xi)| {
            let d = gi - xi;
            loss = loss + d * d;
            two * d * inv_sq / n
        })
        .collect();
    Ok((loss * inv_sq / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_match_is_zero() {
        let (l, g) = loss_mse(&[0.5f64, 1.5], &[0.5, 1.5], 1.2).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn single_pixel_substitution() {
        let (l, g) = loss_mse(&[2.0f64], &[1.0], 1.0).unwrap();
        assert_eq!((l, g[0]), (1.0, 2.0));
    }

    #[test]
    fn zero_normalizer_rejected() {
        assert!(matches!(loss_mse(&[1.0f64], &[1.0], 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g: Vec<f64> = (0..16).map(|i| ((i * 31) % 17) as f64 / 7.0).collect();
        let x: Vec<f64> = (0..16).map(|i| ((i * 11) % 5) as f64 / 3.0).collect();
        let norm = 0.8;
        let (_, grad) = loss_mse(&g, &x, norm).unwrap();
        let h = 1e-6;
        for i in 0..16 {
            let mut p = g.clone();
            p[i] += h;
            let mut m = g.clone();
            m[i] -= h;
            let fd = (loss_mse(&p, &x, norm).unwrap().0 - loss_mse(&m, &x, norm).unwrap().0) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / grad[i].abs().max(1e-12);
            assert!(rel <= 1e-5 || (fd - grad[i]).abs() < 1e-12, "{i}: {fd} vs {}", grad[i]);
        }
    }
}
