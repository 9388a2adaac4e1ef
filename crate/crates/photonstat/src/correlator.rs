//! Two-time coincidence counting and steady-state g²(τ) extraction.
//!
//! The estimator follows the tag → histogram → ratio-of-sums chain:
//! N₁, N₂ are per-bin singles summed over shots, N_c(t₁,t₂) counts
//! within-shot cross-channel pairs, and
//!
//! ```text
//! g²(t₁,t₂) = N_S · N_c(t₁,t₂) / (N₁(t₁) N₂(t₂))
//! g²(τ)     = N_S · Σ_t N_c(t,t+τ) / Σ_t N₁(t) N₂(t+τ)
//! ```
//!
//! with the τ series symmetrized by averaging the (t₁,t₂) and (t₂,t₁)
//! estimators. Standard errors come from a seeded block bootstrap over
//! shots. Coincidence counting is merge-based over sorted per-shot tag
//! lists, O(T + P) in tags and in-window pairs, and parallelizes over
//! shots with an order-independent integer reduction.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::io::Write;

use crate::error::{Error, Result};
use crate::series::{symmetric_tau_grid, CoherenceSeries, SeriesKind};
use crate::tagstore::{StreamHeader, TagStream};

/// Analysis window: times kept for the steady-state estimate plus the
/// maximum |τ| retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SteadyStateWindow {
    pub t_start_ps: u64,
    pub t_end_ps: u64,
    pub tau_max_ps: u64,
    pub bin_width_ps: u64,
}

impl SteadyStateWindow {
    /// Window covering the last `span_ps` of the shot (the usual
    /// steady-state choice), aligned down to whole bins.
    pub fn last_span(header: &StreamHeader, span_ps: u64, tau_max_ps: u64, bin_width_ps: u64) -> Self {
        let t_end = header.shot_duration_ps;
        let span = span_ps.min(t_end);
        let t_start = ((t_end - span) / bin_width_ps) * bin_width_ps;
        SteadyStateWindow { t_start_ps: t_start, t_end_ps: t_end, tau_max_ps, bin_width_ps }
    }

    pub fn validate_for(&self, header: &StreamHeader) -> Result<()> {
        if self.bin_width_ps == 0 {
            return Err(Error::Config("bin width must be positive".into()));
        }
        if self.t_start_ps >= self.t_end_ps {
            return Err(Error::Config("empty analysis window".into()));
        }
        if self.t_end_ps > header.shot_duration_ps {
            return Err(Error::Config(format!(
                "window end {} ps beyond shot duration {} ps",
                self.t_end_ps, header.shot_duration_ps
            )));
        }
        if self.t_start_ps % self.bin_width_ps != 0 || self.t_end_ps % self.bin_width_ps != 0 {
            return Err(Error::Config("window bounds must be multiples of the bin width".into()));
        }
        if self.tau_max_ps > self.t_end_ps - self.t_start_ps {
            return Err(Error::Config("tau_max exceeds the window span".into()));
        }
        Ok(())
    }

    pub fn wbins(&self) -> usize {
        ((self.t_end_ps - self.t_start_ps) / self.bin_width_ps) as usize
    }

    /// Maximum |τ| in whole bins.
    pub fn lag_max(&self) -> usize {
        (self.tau_max_ps / self.bin_width_ps) as usize
    }

    fn contains(&self, other: &SteadyStateWindow) -> bool {
        self.bin_width_ps == other.bin_width_ps
            && other.t_start_ps >= self.t_start_ps
            && other.t_end_ps <= self.t_end_ps
            && other.lag_max() <= self.lag_max()
    }
}

/// Binned per-shot tags restricted to the window, plus aggregate counts.
///
/// Keeps per-shot bin lists and per-shot lag histograms as the sufficient
/// statistics for the τ series and for the shot bootstrap.
#[derive(Debug, Clone)]
pub struct CorrelationGrid {
    pub window: SteadyStateWindow,
    pub shot_count: u64,
    /// Singles per window bin, summed over shots.
    pub n1: Vec<u64>,
    pub n2: Vec<u64>,
    /// Dense coincidence matrix, row-major `[t1_bin][t2_bin]`.
    pub nc: Vec<u64>,
    wbins: usize,
    lag_max: usize,
    shot_ch1: Vec<Vec<u32>>,
    shot_ch2: Vec<Vec<u32>>,
    /// Per-shot pair counts by lag, length `2·lag_max + 1`.
    shot_lag: Vec<Vec<u32>>,
}

/// g²(t₁,t₂) matrix; bins with zero singles are `NaN` (missing, not 0).
#[derive(Debug, Clone)]
pub struct G2Matrix {
    pub t_start_ps: u64,
    pub bin_width_ps: u64,
    pub wbins: usize,
    pub values: Vec<f64>,
}

/// Block-bootstrap settings for the τ-series standard errors.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapCfg {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapCfg {
    fn default() -> Self {
        BootstrapCfg { resamples: 200, seed: 0 }
    }
}

struct ShotBins {
    ch1: Vec<u32>,
    ch2: Vec<u32>,
    lag: Vec<u32>,
}

fn bin_shot(
    shot: &[crate::tagstore::TagRecord],
    window: &SteadyStateWindow,
    lag_max: usize,
) -> ShotBins {
    let w = window.bin_width_ps;
    let mut ch1 = Vec::new();
    let mut ch2 = Vec::new();
    for tag in shot {
        if tag.time_ps < window.t_start_ps || tag.time_ps >= window.t_end_ps {
            continue;
        }
        let b = ((tag.time_ps - window.t_start_ps) / w) as u32;
        match tag.channel {
            1 => ch1.push(b),
            _ => ch2.push(b),
        }
    }
    // merge sweep over the two sorted bin lists
    let l = lag_max as i64;
    let mut lag = vec![0u32; 2 * lag_max + 1];
    let mut lo = 0usize;
    for &a in &ch1 {
        let a = a as i64;
        while lo < ch2.len() && (ch2[lo] as i64) < a - l {
            lo += 1;
        }
        let mut j = lo;
        while j < ch2.len() && (ch2[j] as i64) <= a + l {
            lag[(ch2[j] as i64 - a + l) as usize] += 1;
            j += 1;
        }
    }
    ShotBins { ch1, ch2, lag }
}

/// Counts all in-window cross-channel pairs, per shot, into the dense
/// two-time matrix and per-shot lag histograms.
pub fn coincidence_grid(stream: &TagStream, window: &SteadyStateWindow) -> Result<CorrelationGrid> {
    window.validate_for(&stream.header)?;
    let wbins = window.wbins();
    let lag_max = window.lag_max();

    let per_shot: Vec<ShotBins> = stream
        .shots
        .par_iter()
        .map(|shot| bin_shot(shot, window, lag_max))
        .collect();

    // order-independent aggregation: integer sums over shots
    let (n1, n2, nc) = per_shot
        .par_iter()
        .fold(
            || (vec![0u64; wbins], vec![0u64; wbins], vec![0u64; wbins * wbins]),
            |(mut n1, mut n2, mut nc), sb| {
                for &a in &sb.ch1 {
                    n1[a as usize] += 1;
                }
                for &b in &sb.ch2 {
                    n2[b as usize] += 1;
                }
                for &a in &sb.ch1 {
                    let row = a as usize * wbins;
                    for &b in &sb.ch2 {
                        nc[row + b as usize] += 1;
                    }
                }
                (n1, n2, nc)
            },
        )
        .reduce(
            || (vec![0u64; wbins], vec![0u64; wbins], vec![0u64; wbins * wbins]),
            |(mut a1, mut a2, mut ac), (b1, b2, bc)| {
                for (x, y) in a1.iter_mut().zip(b1) {
                    *x += y;
                }
                for (x, y) in a2.iter_mut().zip(b2) {
                    *x += y;
                }
                for (x, y) in ac.iter_mut().zip(bc) {
                    *x += y;
                }
                (a1, a2, ac)
            },
        );

    let mut shot_ch1 = Vec::with_capacity(per_shot.len());
    let mut shot_ch2 = Vec::with_capacity(per_shot.len());
    let mut shot_lag = Vec::with_capacity(per_shot.len());
    for sb in per_shot {
        shot_ch1.push(sb.ch1);
        shot_ch2.push(sb.ch2);
        shot_lag.push(sb.lag);
    }

    Ok(CorrelationGrid {
        window: *window,
        shot_count: stream.shot_count(),
        n1,
        n2,
        nc,
        wbins,
        lag_max,
        shot_ch1,
        shot_ch2,
        shot_lag,
    })
}

impl CorrelationGrid {
    pub fn wbins(&self) -> usize {
        self.wbins
    }

    pub fn lag_max(&self) -> usize {
        self.lag_max
    }

    /// Total within-shot pair count (must equal the matrix sum).
    pub fn total_pairs(&self) -> u64 {
        self.shot_ch1
            .iter()
            .zip(&self.shot_ch2)
            .map(|(a, b)| a.len() as u64 * b.len() as u64)
            .sum()
    }
}

/// Entrywise `N_S·nc/(n1⊗n2)`; zero singles propagate as `NaN`.
pub fn g2_matrix(grid: &CorrelationGrid) -> G2Matrix {
    let w = grid.wbins;
    let ns = grid.shot_count as f64;
    let mut values = vec![f64::NAN; w * w];
    for a in 0..w {
        if grid.n1[a] == 0 {
            continue;
        }
        for b in 0..w {
            if grid.n2[b] == 0 {
                continue;
            }
            values[a * w + b] =
                ns * grid.nc[a * w + b] as f64 / (grid.n1[a] as f64 * grid.n2[b] as f64);
        }
    }
    G2Matrix {
        t_start_ps: grid.window.t_start_ps,
        bin_width_ps: grid.window.bin_width_ps,
        wbins: w,
        values,
    }
}

/// Raw (unsymmetrized) ratio-of-sums series over lags `-L..=L` given
/// aggregate lag numerators and singles profiles.
fn ratio_series(
    numer: &[f64],
    prof1: &[f64],
    prof2: &[f64],
    lag_max: usize,
    shots: f64,
) -> Vec<f64> {
    let wbins = prof1.len();
    let l = lag_max as i64;
    (-l..=l)
        .map(|lag| {
            let mut denom = 0.0;
            let (lo, hi) = if lag >= 0 {
                (0usize, wbins - lag as usize)
            } else {
                ((-lag) as usize, wbins)
            };
            for t in lo..hi {
                denom += prof1[t] * prof2[(t as i64 + lag) as usize];
            }
            let num = numer[(lag + l) as usize];
            if denom > 0.0 {
                shots * num / denom
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// Averages the ±τ estimators (channel exchange combined with τ → −τ);
/// output is exactly symmetric.
fn symmetrize(raw: &[f64]) -> Vec<f64> {
    let n = raw.len();
    let mut out = vec![f64::NAN; n];
    for k in 0..n {
        let m = n - 1 - k;
        let (a, b) = (raw[k], raw[m]);
        out[k] = match (a.is_nan(), b.is_nan()) {
            (false, false) => 0.5 * (a + b),
            (false, true) => a,
            (true, false) => b,
            (true, true) => f64::NAN,
        };
    }
    out
}

fn series_for_multiplicity(grid: &CorrelationGrid, mult: Option<&[u32]>) -> Vec<f64> {
    let wbins = grid.wbins;
    let nlags = 2 * grid.lag_max + 1;
    let mut numer = vec![0.0f64; nlags];
    let mut prof1 = vec![0.0f64; wbins];
    let mut prof2 = vec![0.0f64; wbins];
    let mut shots = 0.0f64;
    for s in 0..grid.shot_ch1.len() {
        let m = mult.map_or(1, |mm| mm[s]);
        if m == 0 {
            continue;
        }
        let mf = m as f64;
        shots += mf;
        for (k, &c) in grid.shot_lag[s].iter().enumerate() {
            numer[k] += mf * c as f64;
        }
        for &a in &grid.shot_ch1[s] {
            prof1[a as usize] += mf;
        }
        for &b in &grid.shot_ch2[s] {
            prof2[b as usize] += mf;
        }
    }
    let raw = ratio_series(&numer, &prof1, &prof2, grid.lag_max, shots);
    symmetrize(&raw)
}

/// Steady-state g²(τ) with block-bootstrap standard errors.
///
/// `window` may narrow the grid's own window (same binning, sub-range,
/// smaller or equal τ span). With fewer than two shots the estimate is
/// returned with `stderr: None`.
pub fn steady_state_g2(
    grid: &CorrelationGrid,
    window: &SteadyStateWindow,
    bootstrap: &BootstrapCfg,
) -> Result<CoherenceSeries> {
    if !grid.window.contains(window) {
        return Err(Error::Config("requested window not contained in the grid".into()));
    }
    // narrowing re-counts from the stored per-shot bins
    let sub = if *window == grid.window { None } else { Some(window) };
    let work: CorrelationGrid;
    let grid = match sub {
        None => grid,
        Some(w) => {
            work = narrow_grid(grid, w);
            &work
        }
    };

    let values = series_for_multiplicity(grid, None);
    let nshots = grid.shot_ch1.len();
    let nlags = 2 * grid.lag_max + 1;

    let stderr = if nshots >= 2 && bootstrap.resamples >= 2 {
        let reps: Vec<Vec<f64>> = (0..bootstrap.resamples)
            .into_par_iter()
            .map(|r| {
                let mut rng =
                    ChaCha12Rng::seed_from_u64(bootstrap.seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(r as u64 + 1)));
                let mut mult = vec![0u32; nshots];
                for _ in 0..nshots {
                    mult[rng.random_range(0..nshots)] += 1;
                }
                series_for_multiplicity(grid, Some(&mult))
            })
            .collect();
        let mut se = vec![0.0f64; nlags];
        for k in 0..nlags {
            let xs: Vec<f64> = reps.iter().map(|r| r[k]).filter(|x| !x.is_nan()).collect();
            se[k] = if xs.len() >= 2 {
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let var =
                    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
                var.sqrt()
            } else {
                f64::NAN
            };
        }
        // NaN (inestimable) lags keep a zero-filled slot only if the value
        // itself is defined; otherwise the series carries NaN values anyway.
        Some(se.into_iter().map(|s| if s.is_nan() { 0.0 } else { s }).collect())
    } else {
        None
    };

    CoherenceSeries::new(
        symmetric_tau_grid(grid.lag_max, grid.window.bin_width_ps),
        values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        stderr,
        SeriesKind::G2,
    )
}

fn narrow_grid(grid: &CorrelationGrid, window: &SteadyStateWindow) -> CorrelationGrid {
    let shift = ((window.t_start_ps - grid.window.t_start_ps) / grid.window.bin_width_ps) as u32;
    let wbins = window.wbins();
    let lag_max = window.lag_max();
    let keep = |b: u32| -> Option<u32> {
        let rel = b.checked_sub(shift)?;
        (rel < wbins as u32).then_some(rel)
    };
    let mut shot_ch1 = Vec::with_capacity(grid.shot_ch1.len());
    let mut shot_ch2 = Vec::with_capacity(grid.shot_ch2.len());
    let mut shot_lag = Vec::with_capacity(grid.shot_ch1.len());
    let mut n1 = vec![0u64; wbins];
    let mut n2 = vec![0u64; wbins];
    let mut nc = vec![0u64; wbins * wbins];
    for s in 0..grid.shot_ch1.len() {
        let c1: Vec<u32> = grid.shot_ch1[s].iter().filter_map(|&b| keep(b)).collect();
        let c2: Vec<u32> = grid.shot_ch2[s].iter().filter_map(|&b| keep(b)).collect();
        for &a in &c1 {
            n1[a as usize] += 1;
        }
        for &b in &c2 {
            n2[b as usize] += 1;
        }
        let l = lag_max as i64;
        let mut lag = vec![0u32; 2 * lag_max + 1];
        for &a in &c1 {
            let row = a as usize * wbins;
            for &b in &c2 {
                nc[row + b as usize] += 1;
                let d = b as i64 - a as i64;
                if d.abs() <= l {
                    lag[(d + l) as usize] += 1;
                }
            }
        }
        shot_ch1.push(c1);
        shot_ch2.push(c2);
        shot_lag.push(lag);
    }
    CorrelationGrid {
        window: *window,
        shot_count: grid.shot_count,
        n1,
        n2,
        nc,
        wbins,
        lag_max,
        shot_ch1,
        shot_ch2,
        shot_lag,
    }
}

/// Mean detected intensity per bin per shot, `(n1[t]+n2[t])/N_S`,
/// over the full shot duration.
pub fn intensity_trace(stream: &TagStream, bin_width_ps: u64) -> Result<(Vec<u64>, Vec<f64>)> {
    let binned = stream.bin_counts(bin_width_ps)?;
    let ns = stream.shot_count();
    let times: Vec<u64> = (0..binned.counts_ch1.len() as u64).map(|b| b * bin_width_ps).collect();
    let trace = binned
        .counts_ch1
        .iter()
        .zip(&binned.counts_ch2)
        .map(|(a, b)| {
            if ns == 0 {
                0.0
            } else {
                (a + b) as f64 / ns as f64
            }
        })
        .collect();
    Ok((times, trace))
}

/// CSV with columns `tau_ps,g2,stderr` (`nan` when unavailable).
pub fn write_g2_tau_csv<W: Write>(series: &CoherenceSeries, mut w: W) -> Result<()> {
    writeln!(w, "tau_ps,g2,stderr")?;
    for (k, tau) in series.tau_ps.iter().enumerate() {
        let se = series.stderr.as_ref().map_or(f64::NAN, |s| s[k]);
        writeln!(w, "{},{},{}", tau, series.values[k].re, se)?;
    }
    Ok(())
}

/// Dense matrix CSV: t₁ rows, t₂ columns.
pub fn write_g2_matrix_csv<W: Write>(m: &G2Matrix, mut w: W) -> Result<()> {
    write!(w, "t1_ps")?;
    for b in 0..m.wbins {
        write!(w, ",{}", m.t_start_ps + b as u64 * m.bin_width_ps)?;
    }
    writeln!(w)?;
    for a in 0..m.wbins {
        write!(w, "{}", m.t_start_ps + a as u64 * m.bin_width_ps)?;
        for b in 0..m.wbins {
            write!(w, ",{}", m.values[a * m.wbins + b])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// CSV with columns `t_ps,intensity`.
pub fn write_intensity_csv<W: Write>(times: &[u64], trace: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "t_ps,intensity")?;
    for (t, v) in times.iter().zip(trace) {
        writeln!(w, "{},{}", t, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagstore::{StreamHeader, TagRecord, TagStream, VERSION};
    use rand::Rng;

    fn header(duration: u64, bin: u64) -> StreamHeader {
        StreamHeader {
            version: VERSION,
            shot_duration_ps: duration,
            bin_width_ps: bin,
            clock_resolution_ps: 1,
        }
    }

    /// Independent homogeneous Poisson pair of channels; the test oracle.
    fn poisson_stream(rate_per_ns_per_ch: f64, duration_ns: u64, shots: usize, seed: u64) -> TagStream {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let duration_ps = duration_ns * 1000;
        let rate_per_ps = rate_per_ns_per_ch / 1000.0;
        let mut all = Vec::with_capacity(shots);
        for _ in 0..shots {
            let mut tags = Vec::new();
            for ch in [1u8, 2u8] {
                let mut t = 0.0f64;
                loop {
                    let u: f64 = rng.random();
                    t += -u.ln() / rate_per_ps;
                    if t >= duration_ps as f64 {
                        break;
                    }
                    tags.push(TagRecord { channel: ch, time_ps: t as u64 });
                }
            }
            tags.sort_by_key(|t| (t.time_ps, t.channel));
            all.push(tags);
        }
        TagStream::new(header(duration_ps, 1000), all).unwrap()
    }

    fn full_window(stream: &TagStream, tau_max_ns: u64) -> SteadyStateWindow {
        SteadyStateWindow {
            t_start_ps: 0,
            t_end_ps: stream.header.shot_duration_ps,
            tau_max_ps: tau_max_ns * 1000,
            bin_width_ps: 1000,
        }
    }

    #[test]
    fn single_pair_lands_in_matrix_cell() {
        let s = TagStream::new(
            header(10_000, 1000),
            vec![vec![
                TagRecord { channel: 1, time_ps: 3_500 },
                TagRecord { channel: 2, time_ps: 7_200 },
            ]],
        )
        .unwrap();
        let grid = coincidence_grid(&s, &full_window(&s, 9)).unwrap();
        assert_eq!(grid.nc[3 * grid.wbins() + 7], 1);
        assert_eq!(grid.nc.iter().sum::<u64>(), 1);
        assert_eq!(grid.total_pairs(), 1);
    }

    #[test]
    fn repeated_shots_accumulate() {
        let shot = vec![
            TagRecord { channel: 1, time_ps: 3_500 },
            TagRecord { channel: 2, time_ps: 3_600 },
        ];
        let s = TagStream::new(header(10_000, 1000), vec![shot.clone(), shot]).unwrap();
        let grid = coincidence_grid(&s, &full_window(&s, 9)).unwrap();
        assert_eq!(grid.nc[3 * grid.wbins() + 3], 2);
    }

    #[test]
    fn empty_window_is_config_error() {
        let s = poisson_stream(0.01, 10, 3, 1);
        let mut w = full_window(&s, 5);
        w.t_end_ps = w.t_start_ps;
        match coincidence_grid(&s, &w) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn poisson_matrix_expectation() {
        // E[nc[a][b]] = N_S r² per (a,b); check the matrix total within 3σ.
        let rate = 0.05; // per ns per channel
        let shots = 2000;
        let duration_ns = 40.0;
        let s = poisson_stream(rate, 40, shots, 7);
        let grid = coincidence_grid(&s, &full_window(&s, 10)).unwrap();
        // per shot the total is a product of two Poisson(λ) counts
        let lam = rate * duration_ns;
        let total_expect = shots as f64 * lam * lam;
        let var_shot = (lam + lam * lam).powi(2) - lam.powi(4);
        let sigma = (shots as f64 * var_shot).sqrt();
        let total = grid.nc.iter().sum::<u64>() as f64;
        assert!(
            (total - total_expect).abs() < 3.0 * sigma,
            "total {total} vs expected {total_expect} ± {sigma}"
        );
    }

    #[test]
    fn poisson_g2_matrix_near_one() {
        let s = poisson_stream(0.1, 50, 4000, 11);
        let grid = coincidence_grid(&s, &full_window(&s, 10)).unwrap();
        let m = g2_matrix(&grid);
        let vals: Vec<f64> = m.values.iter().copied().filter(|v| !v.is_nan()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "matrix mean {mean}");
    }

    #[test]
    fn perfectly_correlated_pairs_diagonal() {
        // every shot: one tag on each channel in the same uniformly-random bin
        let bins = 20u64;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let shots: Vec<Vec<TagRecord>> = (0..5000)
            .map(|_| {
                let b = rng.random_range(0..bins);
                let t = b * 1000 + 500;
                vec![
                    TagRecord { channel: 1, time_ps: t },
                    TagRecord { channel: 2, time_ps: t },
                ]
            })
            .collect();
        let s = TagStream::new(header(bins * 1000, 1000), shots).unwrap();
        let grid = coincidence_grid(&s, &full_window(&s, 5)).unwrap();
        let m = g2_matrix(&grid);
        let ns = s.shot_count() as f64;
        for b in 0..bins as usize {
            if grid.n1[b] == 0 {
                continue;
            }
            let got = m.values[b * grid.wbins() + b];
            // nc[b][b] = n1[b] = n2[b] exactly, so g²(b,b) = N_S / n1[b]
            let exact = ns / grid.n1[b] as f64;
            assert!((got - exact).abs() < 1e-12);
            assert!((got - bins as f64).abs() < 0.35 * bins as f64);
        }
    }

    #[test]
    fn zero_coincidence_stream_gives_zero_g2() {
        // channels never co-fire within a shot
        let mut shots = Vec::new();
        for k in 0..200u64 {
            let ch = if k % 2 == 0 { 1 } else { 2 };
            shots.push(vec![TagRecord { channel: ch, time_ps: (k % 10) * 1000 + 17 }]);
        }
        let s = TagStream::new(header(10_000, 1000), shots).unwrap();
        let grid = coincidence_grid(&s, &full_window(&s, 5)).unwrap();
        let m = g2_matrix(&grid);
        for v in m.values.iter().filter(|v| !v.is_nan()) {
            assert_eq!(*v, 0.0);
        }
        let series = steady_state_g2(&grid, &full_window(&s, 5), &BootstrapCfg::default()).unwrap();
        for v in series.real_values() {
            assert!(v == 0.0 || v.is_nan());
        }
    }

    #[test]
    fn poisson_tau_series_is_unity() {
        let s = poisson_stream(0.08, 60, 3000, 21);
        let w = full_window(&s, 15);
        let grid = coincidence_grid(&s, &w).unwrap();
        let series = steady_state_g2(&grid, &w, &BootstrapCfg::default()).unwrap();
        let se = series.stderr.as_ref().unwrap();
        for (k, v) in series.real_values().iter().enumerate() {
            assert!(
                (v - 1.0).abs() < 4.0 * se[k].max(1e-3),
                "tau {} g2 {} se {}",
                series.tau_ps[k],
                v,
                se[k]
            );
        }
        // exchange symmetry holds exactly after symmetrization
        let vals = series.real_values();
        for k in 0..vals.len() {
            assert_eq!(vals[k], vals[vals.len() - 1 - k]);
        }
    }

    #[test]
    fn channel_swap_with_tau_flip_is_invariant() {
        let s = poisson_stream(0.1, 30, 400, 5);
        let swapped = TagStream::new(
            s.header,
            s.shots
                .iter()
                .map(|shot| {
                    shot.iter()
                        .map(|t| TagRecord { channel: 3 - t.channel, time_ps: t.time_ps })
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        let w = full_window(&s, 8);
        let a = steady_state_g2(&coincidence_grid(&s, &w).unwrap(), &w, &BootstrapCfg::default())
            .unwrap();
        let b = steady_state_g2(
            &coincidence_grid(&swapped, &w).unwrap(),
            &w,
            &BootstrapCfg::default(),
        )
        .unwrap();
        for (x, y) in a.real_values().iter().zip(b.real_values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sub_window_estimate_consistent() {
        let s = poisson_stream(0.1, 80, 2500, 9);
        let w = full_window(&s, 10);
        let grid = coincidence_grid(&s, &w).unwrap();
        let full = steady_state_g2(&grid, &w, &BootstrapCfg::default()).unwrap();
        let sub = SteadyStateWindow {
            t_start_ps: 20_000,
            t_end_ps: 60_000,
            tau_max_ps: 10_000,
            bin_width_ps: 1000,
        };
        let narrowed = steady_state_g2(&grid, &sub, &BootstrapCfg::default()).unwrap();
        let se = narrowed.stderr.as_ref().unwrap();
        for k in 0..full.len() {
            let d = (full.values[k].re - narrowed.values[k].re).abs();
            assert!(d < 4.0 * se[k].max(2e-2), "lag {k} differs by {d}");
        }
    }

    #[test]
    fn single_shot_has_no_stderr() {
        let s = poisson_stream(0.2, 20, 1, 2);
        let w = full_window(&s, 5);
        let grid = coincidence_grid(&s, &w).unwrap();
        let series = steady_state_g2(&grid, &w, &BootstrapCfg::default()).unwrap();
        assert!(series.stderr.is_none());
    }

    #[test]
    fn bootstrap_is_seed_deterministic() {
        let s = poisson_stream(0.1, 30, 300, 13);
        let w = full_window(&s, 6);
        let grid = coincidence_grid(&s, &w).unwrap();
        let cfg = BootstrapCfg { resamples: 50, seed: 99 };
        let a = steady_state_g2(&grid, &w, &cfg).unwrap();
        let b = steady_state_g2(&grid, &w, &cfg).unwrap();
        assert_eq!(a.stderr.unwrap(), b.stderr.unwrap());
    }

    #[test]
    fn intensity_trace_flat_for_poisson() {
        let rate = 0.2;
        let shots = 2000;
        let s = poisson_stream(rate, 40, shots, 17);
        let (_, trace) = intensity_trace(&s, 1000).unwrap();
        let expect = 2.0 * rate; // both channels, per 1 ns bin
        let sigma = (expect / shots as f64).sqrt();
        for v in &trace {
            assert!((v - expect).abs() < 4.0 * sigma, "bin intensity {v} vs {expect}");
        }
        let empty = TagStream::new(header(4000, 1000), vec![]).unwrap();
        let (_, z) = intensity_trace(&empty, 1000).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matrix_band_sum_matches_lag_numerators() {
        let s = poisson_stream(0.15, 30, 500, 23);
        let w = full_window(&s, 8);
        let grid = coincidence_grid(&s, &w).unwrap();
        let l = grid.lag_max() as i64;
        let wb = grid.wbins();
        for lag in -l..=l {
            let mut from_matrix = 0u64;
            for a in 0..wb as i64 {
                let b = a + lag;
                if b >= 0 && b < wb as i64 {
                    from_matrix += grid.nc[a as usize * wb + b as usize];
                }
            }
            let from_shots: u64 = grid
                .shot_lag
                .iter()
                .map(|h| h[(lag + l) as usize] as u64)
                .sum();
            assert_eq!(from_matrix, from_shots);
        }
    }
}
