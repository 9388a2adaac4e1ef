//! Quantum-jump (Monte-Carlo wave function) unraveling of the driven
//! two-level atom; the jump record is the emitted-photon record.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qsim::{derive_seed, TwoLevelParams};
use crate::tagstore::{StreamHeader, TagRecord, TagStream, VERSION};

const MCWF_STREAM_ID: u64 = 0x6d63_7766; // "mcwf"

#[derive(Debug, Clone, Copy)]
pub struct McwfConfig {
    pub duration_ps: u64,
    pub shots: u64,
    pub seed: u64,
    /// Probability that an emitted photon is detected at all.
    pub efficiency: f64,
    /// Per-channel detector dead time; 0 disables.
    pub dead_time_ps: u64,
    /// Integration step in Γ = 1 units; `None` picks
    /// `min(0.01, 0.01/Ω)` which keeps the per-step jump probability low.
    pub dt_gamma: Option<f64>,
    /// Bin width recorded in the stream header.
    pub bin_width_ps: u64,
}

impl Default for McwfConfig {
    fn default() -> Self {
        McwfConfig {
            duration_ps: 400_000,
            shots: 1000,
            seed: 0,
            efficiency: 1.0,
            dead_time_ps: 0,
            dt_gamma: None,
            bin_width_ps: 1000,
        }
    }
}

/// One trajectory per shot: deterministic non-Hermitian evolution with the
/// exact per-step propagator `exp(−i H_eff Δt)`, a jump resets to |g⟩ and
/// routes a photon through the 50/50 splitter.
pub fn mcwf_photon_stream(p: &TwoLevelParams, cfg: &McwfConfig) -> Result<TagStream> {
    p.validate()?;
    if !(cfg.efficiency > 0.0 && cfg.efficiency <= 1.0) {
        return Err(Error::Domain("efficiency must be in (0, 1]".into()));
    }
    if cfg.duration_ps == 0 || cfg.duration_ps % cfg.bin_width_ps != 0 {
        return Err(Error::Config("duration must be a positive multiple of the bin width".into()));
    }
    let dt = cfg.dt_gamma.unwrap_or_else(|| (0.01f64).min(0.01 / p.rabi.max(1e-9)));
    // worst-case per-step jump probability is Γ·dt (fully inverted atom)
    if dt > 0.1 {
        return Err(Error::Accuracy(format!(
            "dt = {dt} Γ⁻¹ gives per-step jump probability above 0.1"
        )));
    }
    let ps_per = p.ps_per_gamma_time();
    let duration_gamma = cfg.duration_ps as f64 / ps_per;
    let steps = (duration_gamma / dt).ceil() as u64;

    // H_eff = H − (i/2) σ⁺σ⁻ in Γ = 1 units
    let i = Complex64::i();
    let heff = Matrix2::new(
        Complex64::ZERO,
        Complex64::from(0.5 * p.rabi),
        Complex64::from(0.5 * p.rabi),
        -Complex64::from(p.detuning) - 0.5 * i,
    );
    let u = (heff * (-i * Complex64::from(dt))).exp();

    let shots: Vec<Vec<TagRecord>> = (0..cfg.shots)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, MCWF_STREAM_ID, s));
            let mut psi = nalgebra::Vector2::new(Complex64::ONE, Complex64::ZERO); // |g⟩
            let mut tags: Vec<TagRecord> = Vec::new();
            let mut last_accept = [None::<u64>, None];
            for step in 0..steps {
                let evolved = u * psi;
                let norm2 = evolved.norm_squared();
                if rng.random::<f64>() < 1.0 - norm2 {
                    // jump: photon emitted within this step
                    let t_ps = ((step + 1) as f64 * dt * ps_per) as u64;
                    if t_ps < cfg.duration_ps && rng.random::<f64>() < cfg.efficiency {
                        let channel = if rng.random::<f64>() < 0.5 { 1u8 } else { 2u8 };
                        let ch = channel as usize - 1;
                        let blocked = cfg.dead_time_ps > 0
                            && last_accept[ch]
                                .is_some_and(|prev| t_ps - prev < cfg.dead_time_ps);
                        if !blocked {
                            tags.push(TagRecord { channel, time_ps: t_ps });
                            last_accept[ch] = Some(t_ps);
                        }
                    }
                    psi = nalgebra::Vector2::new(Complex64::ONE, Complex64::ZERO);
                } else {
                    psi = evolved / Complex64::from(norm2.sqrt());
                }
            }
            tags
        })
        .collect();

    TagStream::new(
        StreamHeader {
            version: VERSION,
            shot_duration_ps: cfg.duration_ps,
            bin_width_ps: cfg.bin_width_ps,
            clock_resolution_ps: 1,
        },
        shots,
    )
}
