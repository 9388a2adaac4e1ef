//! Inhomogeneous Poisson photon sampling from sampled field intensities.
//!
//! Given a piecewise-constant rate, photons are placed by walking the
//! cumulative hazard against unit-exponential gaps: exact for the given
//! rate staircase, O(steps + photons), with RNG usage proportional to the
//! photon count. Timestamps are interpolated inside the step, so bin
//! artifacts from the field grid do not imprint on the tag stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qsim::{derive_seed, FieldTrace};
use crate::tagstore::{StreamHeader, TagRecord, TagStream, VERSION};

const SAMPLER_STREAM_ID: u64 = 0x7361_6d70; // "samp"

/// Samples a two-channel stream whose intensity tracks |E(t)|².
///
/// The trace is split into `shots` equal segments, one per shot; a
/// stationary trace much longer than the coherence time makes the shots
/// effectively independent draws of the underlying ensemble.
///
/// `mean_rate_per_ns` is the expected total detected rate (both channels
/// summed) at the trace's mean intensity and unit efficiency; the 50/50
/// splitter sends half to each channel and `efficiency` thins the rest.
pub fn sample_photons(
    f: &FieldTrace,
    mean_rate_per_ns: f64,
    shots: u64,
    seed: u64,
    efficiency: f64,
    bin_width_ps: u64,
) -> Result<TagStream> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Domain("efficiency must be in (0, 1]".into()));
    }
    if !(mean_rate_per_ns >= 0.0) {
        return Err(Error::Domain("rate must be non-negative".into()));
    }
    if shots == 0 || f.samples.len() % shots as usize != 0 {
        return Err(Error::Config(format!(
            "{} samples do not split into {} equal shots",
            f.samples.len(),
            shots
        )));
    }
    let norm = if f.mean_intensity > 0.0 { f.mean_intensity } else { 1.0 };
    let per_channel = 0.5 * mean_rate_per_ns * efficiency * f.dt_ps / 1000.0 / norm;
    let mu1: Vec<f64> = f.samples.iter().map(|e| per_channel * e.norm_sqr()).collect();
    sample_two_rate_photons(&mu1, &mu1, f.dt_ps, shots, seed, bin_width_ps)
}

/// Core sampler: `mu1`/`mu2` are expected counts per step for each channel
/// over the whole trace; the trace splits into `shots` equal segments.
pub fn sample_two_rate_photons(
    mu1: &[f64],
    mu2: &[f64],
    dt_ps: f64,
    shots: u64,
    seed: u64,
    bin_width_ps: u64,
) -> Result<TagStream> {
    if mu1.len() != mu2.len() {
        return Err(Error::Config("rate arrays must have equal length".into()));
    }
    if shots == 0 || mu1.len() % shots as usize != 0 {
        return Err(Error::Config(format!(
            "{} samples do not split into {} equal shots",
            mu1.len(),
            shots
        )));
    }
    let peak = mu1.iter().chain(mu2).fold(0.0f64, |a, b| a.max(*b));
    if peak > 0.5 {
        return Err(Error::Accuracy(format!(
            "peak of {peak:.3} expected photons per field step; rate too high for dt"
        )));
    }
    let steps_per_shot = mu1.len() / shots as usize;
    let shot_duration_ps = (steps_per_shot as f64 * dt_ps).round() as u64;
    if shot_duration_ps == 0 || shot_duration_ps % bin_width_ps != 0 {
        return Err(Error::Config(format!(
            "shot duration {shot_duration_ps} ps is not a multiple of the bin width {bin_width_ps} ps"
        )));
    }

    let all: Vec<Vec<TagRecord>> = (0..shots)
        .into_par_iter()
        .map(|s| {
            let base = s as usize * steps_per_shot;
            let mut tags: Vec<TagRecord> = Vec::new();
            for (channel, mu) in [(1u8, mu1), (2u8, mu2)] {
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(
                    seed,
                    SAMPLER_STREAM_ID ^ channel as u64,
                    s,
                ));
                let mut acc = 0.0f64;
                let mut target = exp1(&mut rng);
                for step in 0..steps_per_shot {
                    let lam = mu[base + step];
                    while acc + lam >= target {
                        let frac = (target - acc) / lam;
                        let t_ps = ((step as f64 + frac) * dt_ps) as u64;
                        if t_ps < shot_duration_ps {
                            tags.push(TagRecord { channel, time_ps: t_ps });
                        }
                        target += exp1(&mut rng);
                    }
                    acc += lam;
                }
            }
            tags.sort_by_key(|t| (t.time_ps, t.channel));
            tags
        })
        .collect();

    TagStream::new(
        StreamHeader {
            version: VERSION,
            shot_duration_ps,
            bin_width_ps,
            clock_resolution_ps: 1,
        },
        all,
    )
}

fn exp1<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}
