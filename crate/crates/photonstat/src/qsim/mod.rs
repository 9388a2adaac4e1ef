//! Ground-truth photon streams and exact reference correlators.
//!
//! Everything here works internally in Γ = 1 time units (Γ = 2π·`gamma_hz`
//! rad/s) and converts to picoseconds at the API boundary, so the dynamical
//! generators stay well conditioned regardless of the physical linewidth.

pub mod bloch;
pub mod chaotic;
pub mod fewatom;
pub mod fixture;
pub mod mcwf;
pub mod sampler;

pub use bloch::{
    bloch_steady_state, resonant_g2_closed_form, single_atom_g1, single_atom_g2, BlochSteadyState,
};
pub use chaotic::{chaotic_field, coherent_admixture, field_autocorrelation};
pub use fewatom::{fewatom_collective_correlators, CollectiveCorrelators};
pub use fixture::nongaussian_fixture;
pub use mcwf::{mcwf_photon_stream, McwfConfig};
pub use sampler::{sample_photons, sample_two_rate_photons};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Driven two-level emitter parameters. `rabi` and `detuning` are in units
/// of the linewidth Γ; `gamma_hz` is Γ/2π in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams {
    pub rabi: f64,
    pub gamma_hz: f64,
    pub detuning: f64,
}

impl Default for TwoLevelParams {
    fn default() -> Self {
        TwoLevelParams { rabi: 0.0, gamma_hz: 6.0e6, detuning: 0.0 }
    }
}

impl TwoLevelParams {
    pub fn new(rabi: f64, gamma_hz: f64, detuning: f64) -> Result<Self> {
        let p = TwoLevelParams { rabi, gamma_hz, detuning };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi >= 0.0) {
            return Err(Error::Domain("rabi must be non-negative".into()));
        }
        if !(self.gamma_hz > 0.0) {
            return Err(Error::Domain("gamma_hz must be positive".into()));
        }
        if !self.detuning.is_finite() {
            return Err(Error::Domain("detuning must be finite".into()));
        }
        Ok(())
    }

    /// Γ in rad/s.
    pub fn gamma_rad_per_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.gamma_hz
    }

    /// Picoseconds per unit of Γ = 1 time.
    pub fn ps_per_gamma_time(&self) -> f64 {
        1.0e12 / self.gamma_rad_per_s()
    }

    pub fn ps_to_gamma(&self, t_ps: f64) -> f64 {
        t_ps / self.ps_per_gamma_time()
    }

    /// Angular frequency in rad/s → Γ = 1 units.
    pub fn rad_per_s_to_gamma(&self, w: f64) -> f64 {
        w / self.gamma_rad_per_s()
    }
}

/// Emitter positions and beam directions for the collective detection mode.
///
/// Positions are in units of the transition wavelength, so a projection of
/// 1 along a beam direction is one full 2π of phase.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleGeometry {
    pub positions: Vec<[f64; 3]>,
    pub k_las_dir: [f64; 3],
    pub detect_dir: [f64; 3],
    pub wavelength: f64,
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl EnsembleGeometry {
    pub fn new(
        positions: Vec<[f64; 3]>,
        k_las_dir: [f64; 3],
        detect_dir: [f64; 3],
        wavelength: f64,
    ) -> Result<Self> {
        let g = EnsembleGeometry { positions, k_las_dir, detect_dir, wavelength };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_las_dir", &self.k_las_dir), ("detect_dir", &self.detect_dir)] {
            if (norm3(v) - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!(
                    "{name} must be a unit vector (||v| − 1| ≤ 1e-12)"
                )));
            }
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::Domain("wavelength must be positive".into()));
        }
        Ok(())
    }

    /// Laser drive phase k_las·r_n at each atom (radians).
    pub fn drive_phases(&self) -> Vec<f64> {
        self.positions
            .iter()
            .map(|r| 2.0 * std::f64::consts::PI * dot3(&self.k_las_dir, r))
            .collect()
    }

    /// Collective-mode detection phase k û·r_n at each atom (radians).
    pub fn detection_phases(&self) -> Vec<f64> {
        self.positions
            .iter()
            .map(|r| 2.0 * std::f64::consts::PI * dot3(&self.detect_dir, r))
            .collect()
    }
}

/// Sampled complex field amplitude on a uniform time grid.
#[derive(Debug, Clone)]
pub struct FieldTrace {
    pub dt_ps: f64,
    pub samples: Vec<Complex64>,
    /// Sample average of |E|²; kept in lockstep with `samples`.
    pub mean_intensity: f64,
}

impl FieldTrace {
    pub fn new(dt_ps: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(dt_ps > 0.0) {
            return Err(Error::Domain("dt_ps must be positive".into()));
        }
        let mean_intensity = mean_intensity(&samples);
        Ok(FieldTrace { dt_ps, samples, mean_intensity })
    }

    pub fn duration_ps(&self) -> f64 {
        self.dt_ps * self.samples.len() as f64
    }
}

pub(crate) fn mean_intensity(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|e| e.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Stable per-shot RNG seed derivation (SplitMix64 over the key tuple).
pub(crate) fn derive_seed(base: u64, stream_id: u64, index: u64) -> u64 {
    let mut z =
        base ^ stream_id.wrapping_mul(0xbf58476d1ce4e5b9) ^ index.wrapping_mul(0x94d049bb133111eb);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(TwoLevelParams::new(5.0, 6e6, 0.0).is_ok());
        assert!(TwoLevelParams::new(-1.0, 6e6, 0.0).is_err());
        assert!(TwoLevelParams::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn gamma_time_conversion() {
        let p = TwoLevelParams::new(5.0, 6e6, 0.0).unwrap();
        // 1/Γ = 1/(2π·6 MHz) ≈ 26.53 ns
        assert!((p.ps_per_gamma_time() - 26525.8).abs() < 0.5);
        let t = p.ps_to_gamma(26525.8);
        assert!((t - 1.0).abs() < 1e-4);
    }

    #[test]
    fn geometry_requires_unit_vectors() {
        let g = EnsembleGeometry::new(
            vec![[0.0, 0.0, 0.0]],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0 + 1e-9],
            1.0,
        );
        assert!(g.is_err());
    }

    #[test]
    fn field_trace_tracks_mean_intensity() {
        let s = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)];
        let f = FieldTrace::new(1.0, s).unwrap();
        assert!((f.mean_intensity - 2.5).abs() < 1e-12);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(42, 1, 0);
        let b = derive_seed(42, 1, 1);
        let c = derive_seed(42, 2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
