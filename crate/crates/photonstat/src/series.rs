//! Correlation series over a symmetric τ grid.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// What a [`CoherenceSeries`] estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// First-order (field) coherence g¹(τ); complex-valued.
    G1,
    /// Second-order (intensity) coherence g²(τ); real-valued.
    G2,
    /// Connected correlation C(τ); real-valued.
    Connected,
}

/// A per-τ correlation estimate with optional standard errors.
///
/// The τ grid is in picoseconds, symmetric about zero and strictly
/// increasing. Real-valued kinds keep a zero imaginary part.
#[derive(Debug, Clone)]
pub struct CoherenceSeries {
    pub tau_ps: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Per-τ standard error; `None` when it cannot be estimated
    /// (e.g. fewer than two shots to bootstrap over).
    pub stderr: Option<Vec<f64>>,
    pub kind: SeriesKind,
}

impl CoherenceSeries {
    pub fn new(
        tau_ps: Vec<f64>,
        values: Vec<Complex64>,
        stderr: Option<Vec<f64>>,
        kind: SeriesKind,
    ) -> Result<Self> {
        if tau_ps.len() != values.len() {
            return Err(Error::Alignment(format!(
                "tau grid has {} points but values has {}",
                tau_ps.len(),
                values.len()
            )));
        }
        if let Some(se) = &stderr {
            if se.len() != tau_ps.len() {
                return Err(Error::Alignment("stderr length mismatch".into()));
            }
            if se.iter().any(|s| *s < 0.0 || s.is_nan()) {
                return Err(Error::Domain("negative or NaN standard error".into()));
            }
        }
        if tau_ps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("tau grid must be strictly increasing".into()));
        }
        // Symmetric about zero: the grid must mirror onto itself.
        let n = tau_ps.len();
        let tol = 1e-6 * (1.0 + tau_ps[n - 1].abs());
        for k in 0..n {
            if (tau_ps[k] + tau_ps[n - 1 - k]).abs() > tol {
                return Err(Error::Config("tau grid must be symmetric about zero".into()));
            }
        }
        Ok(Self { tau_ps, values, stderr, kind })
    }

    pub fn len(&self) -> usize {
        self.tau_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_ps.is_empty()
    }

    /// Index of the τ = 0 grid point.
    pub fn zero_index(&self) -> usize {
        self.tau_ps.len() / 2
    }

    /// Real parts of the values (the natural view for g² and C series).
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Checks that `other` lives on the same τ grid.
    pub fn check_same_grid(&self, other: &CoherenceSeries) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Alignment(format!(
                "series length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        let tol = 1e-6;
        for (a, b) in self.tau_ps.iter().zip(&other.tau_ps) {
            if (a - b).abs() > tol * (1.0 + a.abs()) {
                return Err(Error::Alignment("tau grids differ".into()));
            }
        }
        Ok(())
    }
}

/// Builds the symmetric τ grid `-lag_max..=lag_max` in steps of `bin_ps`.
pub fn symmetric_tau_grid(lag_max: usize, bin_ps: u64) -> Vec<f64> {
    let l = lag_max as i64;
    (-l..=l).map(|k| k as f64 * bin_ps as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_grid() {
        let tau = vec![-1.0, 0.0, 2.0];
        let vals = vec![Complex64::new(1.0, 0.0); 3];
        assert!(CoherenceSeries::new(tau, vals, None, SeriesKind::G2).is_err());
    }

    #[test]
    fn rejects_negative_stderr() {
        let tau = symmetric_tau_grid(1, 1000);
        let vals = vec![Complex64::new(1.0, 0.0); 3];
        let se = vec![0.1, -0.1, 0.1];
        assert!(CoherenceSeries::new(tau, vals, Some(se), SeriesKind::G2).is_err());
    }

    #[test]
    fn zero_index_points_at_zero() {
        let tau = symmetric_tau_grid(50, 1000);
        let vals = vec![Complex64::default(); tau.len()];
        let s = CoherenceSeries::new(tau, vals, None, SeriesKind::G1).unwrap();
        assert_eq!(s.tau_ps[s.zero_index()], 0.0);
    }
}
