//! Stationary Gaussian (chaotic) field synthesis with the single-atom
//! emission spectrum, coherent admixtures, and a sample-autocorrelation
//! estimator.
//!
//! The sum of N independent atomic dipole fields with random global phases
//! is a circular complex Gaussian process; its spectrum is N times the
//! single-atom one. Synthesis therefore filters circular white noise by
//! the square root of the target spectrum in one pass — O(T log T) with
//! the exact target autocorrelation, instead of N explicit trajectories.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::qsim::bloch::{excited_projector, identity, sigma_minus, sigma_plus, single_atom_engine};
use crate::qsim::{derive_seed, FieldTrace, TwoLevelParams};
use crate::series::{CoherenceSeries, SeriesKind};

const CHAOTIC_STREAM_ID: u64 = 0x6368_616f; // "chao"

/// Synthesizes one realization of the N-emitter chaotic field on a uniform
/// grid of `dt_ps` steps covering `duration_ps`.
///
/// The per-atom autocorrelation is the normalized single-atom g¹(τ), so
/// ⟨|E|²⟩ = N in single-atom intensity units and the synthesized field is
/// zero-mean circular Gaussian (Siegert-obeying) by construction.
pub fn chaotic_field(
    p: &TwoLevelParams,
    n_emitters: usize,
    duration_ps: f64,
    dt_ps: f64,
    seed: u64,
) -> Result<FieldTrace> {
    p.validate()?;
    if n_emitters == 0 {
        return Err(Error::Domain("need at least one emitter".into()));
    }
    let dt_gamma = p.ps_to_gamma(dt_ps);
    let bandwidth = p.rabi.max(1.0);
    if dt_gamma > 0.05 / bandwidth {
        return Err(Error::Accuracy(format!(
            "dt = {dt_gamma:.4} Γ⁻¹ too coarse to resolve dynamics at Ω = {} Γ (need ≤ {:.4})",
            p.rabi,
            0.05 / bandwidth
        )));
    }
    let m = (duration_ps / dt_ps).round() as usize;
    if m < 4 {
        return Err(Error::Config("trace must hold at least 4 samples".into()));
    }

    // target circular autocorrelation: single-atom g¹ on 0..=m/2 steps,
    // Hermitian-wrapped onto the ring
    let eng = single_atom_engine(p)?;
    let nss = eng.expect(&excited_projector()).re;
    if nss <= 0.0 {
        return Err(Error::Domain("undriven ensemble radiates no chaotic field".into()));
    }
    let half: Vec<f64> = (0..=m / 2).map(|k| k as f64 * dt_gamma).collect();
    let id = identity(2);
    let sm = sigma_minus();
    let g1_half = &eng.two_time(&sigma_plus(), &id, &[&sm], &half)[0];

    let mut r = vec![Complex64::ZERO; m];
    for (k, v) in g1_half.iter().enumerate() {
        r[k] = v / nss;
    }
    for k in 1..m - m / 2 {
        r[m - k] = r[k].conj();
    }
    if m % 2 == 0 {
        r[m / 2] = Complex64::from(r[m / 2].re);
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut spec = r;
    fft.process(&mut spec);

    // c_j = w_j √(N·M·S_j) with w_j circular unit Gaussians
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, CHAOTIC_STREAM_ID, 0));
    let normal = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let scale = n_emitters as f64 * m as f64;
    let mut coef: Vec<Complex64> = spec
        .iter()
        .map(|s| {
            let power = s.re.max(0.0) * scale;
            Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)) * power.sqrt()
        })
        .collect();

    let ifft = planner.plan_fft_inverse(m);
    ifft.process(&mut coef);
    let inv_m = 1.0 / m as f64;
    let samples: Vec<Complex64> = coef.into_iter().map(|z| z * inv_m).collect();
    FieldTrace::new(dt_ps, samples)
}

/// Adds a constant coherent amplitude to every sample.
pub fn coherent_admixture(f: &FieldTrace, amplitude: Complex64) -> FieldTrace {
    let samples: Vec<Complex64> = f.samples.iter().map(|e| e + amplitude).collect();
    FieldTrace::new(f.dt_ps, samples).expect("dt unchanged")
}

/// Sample autocorrelation ⟨E*(t)E(t+τ)⟩/⟨|E|²⟩ at lags `0..=max_lag` steps,
/// mirrored onto a symmetric grid. Standard errors come from the scatter
/// across `n_blocks` contiguous sub-traces.
pub fn field_autocorrelation(
    f: &FieldTrace,
    max_lag: usize,
    n_blocks: usize,
) -> Result<CoherenceSeries> {
    let m = f.samples.len();
    if n_blocks < 2 || m / n_blocks <= max_lag + 1 {
        return Err(Error::Config("blocks too short for the requested lag range".into()));
    }
    let block = m / n_blocks;
    let nlags = max_lag + 1;
    let mut per_block = vec![vec![Complex64::ZERO; nlags]; n_blocks];
    for (bi, chunk) in f.samples.chunks_exact(block).take(n_blocks).enumerate() {
        let mean_i = chunk.iter().map(|e| e.norm_sqr()).sum::<f64>() / block as f64;
        for lag in 0..nlags {
            let mut acc = Complex64::ZERO;
            for t in 0..block - lag {
                acc += chunk[t].conj() * chunk[t + lag];
            }
            per_block[bi][lag] = acc / ((block - lag) as f64 * mean_i);
        }
    }
    let mut mean = vec![Complex64::ZERO; nlags];
    for pb in &per_block {
        for (m, v) in mean.iter_mut().zip(pb) {
            *m += v;
        }
    }
    for v in &mut mean {
        *v /= n_blocks as f64;
    }
    let stderr_half: Vec<f64> = (0..nlags)
        .map(|lag| {
            let var = per_block
                .iter()
                .map(|pb| (pb[lag] - mean[lag]).norm_sqr())
                .sum::<f64>()
                / (n_blocks - 1) as f64;
            (var / n_blocks as f64).sqrt()
        })
        .collect();

    let mut tau = Vec::with_capacity(2 * max_lag + 1);
    let mut vals = Vec::with_capacity(2 * max_lag + 1);
    let mut se = Vec::with_capacity(2 * max_lag + 1);
    for k in (1..=max_lag).rev() {
        tau.push(-(k as f64) * f.dt_ps);
        vals.push(mean[k].conj());
        se.push(stderr_half[k]);
    }
    for k in 0..=max_lag {
        tau.push(k as f64 * f.dt_ps);
        vals.push(mean[k]);
        se.push(stderr_half[k]);
    }
    CoherenceSeries::new(tau, vals, Some(se), SeriesKind::G1)
}
