//! Heterodyne chain: the beat-note g²_HD model, simulation of local
//! oscillator + scattered-field photon streams, lock-in recovery of g¹(τ),
//! and emission spectra with the Mollow-triplet reference.
//!
//! Conventions follow the cross-correlation of the two beamsplitter ports:
//! the beat terms on the two output arms are π out of phase, so
//!
//! ```text
//! g²_HD(τ) = 1 + α(g²(τ) − 1) − β cos(ω_LO τ) g¹(τ)
//! α = ⟨I_SC⟩²/(⟨I_SC⟩+⟨I_LO⟩)²,  β = 2⟨I_SC⟩⟨I_LO⟩/(⟨I_SC⟩+⟨I_LO⟩)²
//! ```

use num_complex::Complex64;
use std::io::Write;

use crate::error::{Error, Result};
use crate::qsim::bloch::single_atom_inelastic_spectrum;
use crate::qsim::{sample_two_rate_photons, FieldTrace, TwoLevelParams};
use crate::series::{CoherenceSeries, SeriesKind};
use crate::tagstore::TagStream;

#[derive(Debug, Clone, Copy)]
pub struct HeterodyneConfig {
    /// Local-oscillator frequency shift ω_LO/2π in Hz.
    pub omega_lo_hz: f64,
    /// Mean local-oscillator intensity (counts/bin/shot scale).
    pub i_lo: f64,
    /// Mean scattered-field intensity (same scale).
    pub i_sc: f64,
}

impl Default for HeterodyneConfig {
    fn default() -> Self {
        HeterodyneConfig { omega_lo_hz: 110.0e6, i_lo: 1.0, i_sc: 0.1 }
    }
}

impl HeterodyneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_lo_hz > 0.0) {
            return Err(Error::Domain("omega_lo_hz must be positive".into()));
        }
        if self.i_lo < 0.0 || self.i_sc < 0.0 {
            return Err(Error::Domain("intensities must be non-negative".into()));
        }
        Ok(())
    }

    pub fn omega_lo_rad_per_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.omega_lo_hz
    }
}

/// The intensity-ratio coefficients of the beat model.
pub fn alpha_beta(c: &HeterodyneConfig) -> Result<(f64, f64)> {
    c.validate()?;
    let total = c.i_lo + c.i_sc;
    if total <= 0.0 {
        return Err(Error::Domain("both intensities are zero".into()));
    }
    let alpha = c.i_sc * c.i_sc / (total * total);
    let beta = 2.0 * c.i_sc * c.i_lo / (total * total);
    Ok((alpha, beta))
}

fn grid_step(series: &CoherenceSeries) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::Config("series too short".into()));
    }
    Ok(series.tau_ps[1] - series.tau_ps[0])
}

fn check_nyquist(step_ps: f64, omega_lo: f64) -> Result<()> {
    // ω_LO·Δτ < π or the beat aliases
    if omega_lo * step_ps * 1e-12 >= std::f64::consts::PI {
        return Err(Error::Accuracy(format!(
            "τ grid step {step_ps} ps cannot resolve ω_LO (needs < π/ω_LO)"
        )));
    }
    Ok(())
}

/// Pointwise beat model; `g1` must be the resonant (real) first-order
/// coherence on the same grid as `g2`.
pub fn g2_hd_model(
    g1: &CoherenceSeries,
    g2: &CoherenceSeries,
    c: &HeterodyneConfig,
) -> Result<CoherenceSeries> {
    g1.check_same_grid(g2)?;
    let (alpha, beta) = alpha_beta(c)?;
    let step = grid_step(g1)?;
    let omega = c.omega_lo_rad_per_s();
    check_nyquist(step, omega)?;
    if g1.values.iter().any(|v| v.im.abs() > 1e-6) {
        return Err(Error::Domain(
            "g1 has an imaginary part; the beat model assumes a resonant drive".into(),
        ));
    }
    let values = g1
        .tau_ps
        .iter()
        .zip(g1.values.iter().zip(&g2.values))
        .map(|(tau, (a, b))| {
            let phase = omega * tau * 1e-12;
            Complex64::from(1.0 + alpha * (b.re - 1.0) - beta * phase.cos() * a.re)
        })
        .collect();
    CoherenceSeries::new(g1.tau_ps.clone(), values, g2.stderr.clone(), SeriesKind::G2)
}

/// Lock-in extraction settings.
#[derive(Debug, Clone, Copy)]
pub struct DemodConfig {
    /// Low-pass cutoff as a fraction of ω_LO.
    pub cutoff_fraction: f64,
    /// Undo the triangular bin-smearing attenuation of the beat; wanted for
    /// series estimated from binned tags, not for analytic models.
    pub bin_smear_correction: bool,
}

impl Default for DemodConfig {
    fn default() -> Self {
        DemodConfig { cutoff_fraction: 0.25, bin_smear_correction: false }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Blackman-windowed-sinc low-pass kernel, cutoff `fc` in cycles/sample.
fn lowpass_kernel(fc: f64, gap: f64, max_halfwidth: usize) -> Result<Vec<f64>> {
    let transition = (fc.min(gap) * 0.8).max(1e-6);
    let k = (2.75 / transition).ceil() as usize;
    if k > max_halfwidth {
        return Err(Error::Separability(format!(
            "low-pass kernel half-width {k} exceeds the series ({max_halfwidth}); \
             ω_LO is not far enough above the signal bandwidth for this grid"
        )));
    }
    let mut h = Vec::with_capacity(2 * k + 1);
    for j in -(k as i64)..=(k as i64) {
        let x = j as f64;
        let s = 2.0 * fc * sinc(2.0 * std::f64::consts::PI * fc * x);
        let u = x / (k as f64 + 1.0);
        let w = 0.42
            + 0.5 * (std::f64::consts::PI * u).cos()
            + 0.08 * (2.0 * std::f64::consts::PI * u).cos();
        h.push(s * w);
    }
    let norm: f64 = h.iter().sum();
    for v in &mut h {
        *v /= norm;
    }
    Ok(h)
}

/// The asymptotic beat form `C + A·cos(ωτ) + B·sin(ωτ)` fitted on the
/// outer tails of the series; used to pad the signal past its edges so the
/// filter does not see a phase-broken mirror image.
fn tail_asymptote(series: &CoherenceSeries, omega: f64) -> (f64, f64, f64) {
    let n = series.len();
    let m = (n / 10).max(8).min(n / 2);
    let idx = (0..m).chain(n - m..n);
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for k in idx {
        let ph = omega * series.tau_ps[k] * 1e-12;
        let row = [1.0, ph.cos(), ph.sin()];
        let v = series.values[k].re;
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * v;
        }
    }
    let a = nalgebra::Matrix3::from_fn(|i, j| ata[i][j]);
    let b = nalgebra::Vector3::from_row_slice(&atb);
    match a.lu().solve(&b) {
        Some(x) => (x[0], x[1], x[2]),
        None => (1.0, 0.0, 0.0),
    }
}

/// Recovers g¹(τ) from a measured g²_HD(τ) by multiplying with
/// cos(ω_LO τ), low-passing, and rescaling by −2/β (the beat enters with a
/// minus sign in the port cross-correlation). Errors propagate linearly
/// through the filter.
pub fn demodulate_g1(
    g2_hd: &CoherenceSeries,
    c: &HeterodyneConfig,
    cfg: &DemodConfig,
) -> Result<CoherenceSeries> {
    let (_, beta) = alpha_beta(c)?;
    if beta <= 0.0 {
        return Err(Error::NoSignal(
            "β = 0: the beat term vanishes and carries no g1 signal".into(),
        ));
    }
    let step = grid_step(g2_hd)?;
    let omega = c.omega_lo_rad_per_s();
    check_nyquist(step, omega)?;

    let f_lo = omega * step * 1e-12 / (2.0 * std::f64::consts::PI); // cycles/sample
    let fc = (cfg.cutoff_fraction * f_lo).min(0.45);
    let gap = (f_lo - fc).max(1e-6);
    let h = lowpass_kernel(fc, gap, g2_hd.len() / 2)?;
    let k = h.len() / 2;

    let n = g2_hd.len();
    let y: Vec<f64> = g2_hd
        .tau_ps
        .iter()
        .zip(&g2_hd.values)
        .map(|(tau, v)| v.re * (omega * tau * 1e-12).cos())
        .collect();
    let (c0, ca, cb) = tail_asymptote(g2_hd, omega);
    let tau0 = g2_hd.tau_ps[0];
    let y_ext = |idx: i64| -> f64 {
        if idx >= 0 && (idx as usize) < n {
            y[idx as usize]
        } else {
            let ph = omega * (tau0 + idx as f64 * step) * 1e-12;
            (c0 + ca * ph.cos() + cb * ph.sin()) * ph.cos()
        }
    };
    let smear = if cfg.bin_smear_correction {
        let x = omega * step * 1e-12 / 2.0;
        sinc(x) * sinc(x)
    } else {
        1.0
    };
    let scale = -2.0 / (beta * smear);

    let mut out = Vec::with_capacity(n);
    let mut se_out = g2_hd.stderr.as_ref().map(|_| Vec::with_capacity(n));
    for t in 0..n as i64 {
        let mut acc = 0.0;
        for (j, hj) in h.iter().enumerate() {
            acc += hj * y_ext(t + j as i64 - k as i64);
        }
        out.push(Complex64::from(acc * scale));
        if let (Some(se_acc), Some(se_in)) = (se_out.as_mut(), g2_hd.stderr.as_ref()) {
            // the padding is a deterministic fit, so only in-range samples
            // contribute noise
            let mut var = 0.0;
            for (j, hj) in h.iter().enumerate() {
                let src = t + j as i64 - k as i64;
                if src >= 0 && (src as usize) < n {
                    let src = src as usize;
                    let cosv = (omega * g2_hd.tau_ps[src] * 1e-12).cos();
                    let term = hj * cosv * se_in[src];
                    var += term * term;
                }
            }
            se_acc.push(var.sqrt() * scale.abs());
        }
    }
    CoherenceSeries::new(g2_hd.tau_ps.clone(), out, se_out, SeriesKind::G1)
}

/// Emission spectrum S(ω) normalized to S(0) = 1, ω relative to the drive.
#[derive(Debug, Clone)]
pub struct SpectrumSeries {
    pub omega_rad_per_s: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpectrumSeries {
    /// Normalizes so the point nearest ω = 0 is exactly 1.
    pub fn normalized(omega_rad_per_s: Vec<f64>, raw: Vec<f64>) -> Result<Self> {
        if omega_rad_per_s.is_empty() || omega_rad_per_s.len() != raw.len() {
            return Err(Error::Alignment("empty or mismatched spectrum grid".into()));
        }
        let center = omega_rad_per_s
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        let norm = raw[center];
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize: S(0) is zero or undefined".into()));
        }
        Ok(SpectrumSeries {
            omega_rad_per_s,
            values: raw.into_iter().map(|v| v / norm).collect(),
        })
    }

    /// Location of the largest value within [lo, hi] (rad/s).
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<f64> {
        self.omega_rad_per_s
            .iter()
            .zip(&self.values)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(w, _)| *w)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumConfig {
    /// Apply a Hann taper before transforming (suppresses leakage from the
    /// finite τ span).
    pub hann: bool,
    /// Half-width of the band kept around ω_LO; default ω_LO/2.
    pub band_halfwidth_rad_per_s: Option<f64>,
    /// Undo per-frequency triangular bin smearing (for binned estimates).
    pub bin_smear_correction: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { hann: true, band_halfwidth_rad_per_s: None, bin_smear_correction: false }
    }
}

/// DFT coefficients of the series on the natural frequency grid restricted
/// to the band around ω_LO. Exposed for power (Parseval) accounting.
pub fn band_coefficients(
    series: &CoherenceSeries,
    c: &HeterodyneConfig,
    cfg: &SpectrumConfig,
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    c.validate()?;
    let step = grid_step(series)?;
    let omega_lo = c.omega_lo_rad_per_s();
    check_nyquist(step, omega_lo)?;
    let n = series.len();
    let span_s = step * 1e-12 * n as f64;
    let dw = 2.0 * std::f64::consts::PI / span_s;
    let nyquist = std::f64::consts::PI / (step * 1e-12);
    let half = cfg
        .band_halfwidth_rad_per_s
        .unwrap_or(omega_lo / 2.0)
        .min(nyquist - omega_lo);
    if half <= 0.0 || omega_lo - half <= 0.0 {
        return Err(Error::Separability(
            "band around ω_LO touches DC or the Nyquist edge".into(),
        ));
    }

    // mean removal keeps the huge DC pedestal from leaking into the band
    let mean = series.values.iter().map(|v| v.re).sum::<f64>() / n as f64;
    let windowed: Vec<f64> = series
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = if cfg.hann {
                let u = k as f64 / (n - 1) as f64;
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * u).cos()
            } else {
                1.0
            };
            (v.re - mean) * w
        })
        .collect();

    let j_lo = ((omega_lo - half) / dw).ceil() as i64;
    let j_hi = ((omega_lo + half) / dw).floor() as i64;
    let mut omegas = Vec::with_capacity((j_hi - j_lo + 1).max(0) as usize);
    let mut coefs = Vec::with_capacity(omegas.capacity());
    for j in j_lo..=j_hi {
        let w = j as f64 * dw;
        let mut acc = Complex64::ZERO;
        for (k, v) in windowed.iter().enumerate() {
            let phase = -w * series.tau_ps[k] * 1e-12;
            acc += Complex64::from_polar(*v, phase);
        }
        if cfg.bin_smear_correction {
            let x = w * step * 1e-12 / 2.0;
            acc /= sinc(x) * sinc(x);
        }
        omegas.push(w);
        coefs.push(acc);
    }
    Ok((omegas, coefs))
}

/// Spectrum from the beat correlation: transforms g²_HD(τ), keeps the band
/// centered at ω_LO, shifts it to baseband and normalizes S(0) = 1.
pub fn spectrum_from_hd(
    g2_hd: &CoherenceSeries,
    c: &HeterodyneConfig,
    cfg: &SpectrumConfig,
) -> Result<SpectrumSeries> {
    let (omegas, coefs) = band_coefficients(g2_hd, c, cfg)?;
    let omega_lo = c.omega_lo_rad_per_s();
    // the beat term −(β/2)g¹ makes the band real up to the sign, which the
    // S(0) = 1 normalization absorbs
    let raw: Vec<f64> = coefs.iter().map(|z| z.re).collect();
    let rel: Vec<f64> = omegas.iter().map(|w| w - omega_lo).collect();
    SpectrumSeries::normalized(rel, raw)
}

/// Single-atom resonance-fluorescence (Mollow) reference spectrum on a
/// grid of angular frequencies relative to the drive, S(0) = 1.
pub fn mollow_reference(p: &TwoLevelParams, omega_rad_per_s: &[f64]) -> Result<SpectrumSeries> {
    let gammas: Vec<f64> = omega_rad_per_s.iter().map(|w| p.rad_per_s_to_gamma(*w)).collect();
    let raw = single_atom_inelastic_spectrum(p, &gammas)?;
    SpectrumSeries::normalized(omega_rad_per_s.to_vec(), raw)
}

/// Simulates the two beamsplitter-port photon streams of a heterodyne
/// measurement: the LO at ω_LO beats against the scattered field, the two
/// ports carry the beat with opposite signs, and each port feeds one
/// detector channel.
pub fn beat_stream(
    scattered: &FieldTrace,
    c: &HeterodyneConfig,
    mean_rate_per_ns: f64,
    shots: u64,
    seed: u64,
    bin_width_ps: u64,
) -> Result<TagStream> {
    c.validate()?;
    if scattered.mean_intensity <= 0.0 {
        return Err(Error::Domain("scattered field trace is empty".into()));
    }
    if c.i_lo + c.i_sc <= 0.0 {
        return Err(Error::Domain("both intensities are zero".into()));
    }
    let omega = c.omega_lo_rad_per_s();
    let dt_s = scattered.dt_ps * 1e-12;
    if omega * dt_s > 0.5 {
        return Err(Error::Accuracy(format!(
            "field step {} ps too coarse for the {} Hz beat",
            scattered.dt_ps, c.omega_lo_hz
        )));
    }
    // scale the scattered trace to ⟨I_SC⟩ = i_sc and give the LO amplitude √i_lo
    let sc_scale = (c.i_sc / scattered.mean_intensity).sqrt();
    let lo_amp = c.i_lo.sqrt();
    let n = scattered.samples.len();
    let mut i1 = Vec::with_capacity(n);
    let mut i2 = Vec::with_capacity(n);
    for (k, e) in scattered.samples.iter().enumerate() {
        let esc = e * sc_scale;
        let elo = Complex64::from_polar(lo_amp, -omega * (k as f64 * dt_s));
        // 50/50 splitter ports: (E_sc + iE_LO)/√2 and (iE_sc + E_LO)/√2
        let p1 = 0.5 * (esc + Complex64::i() * elo).norm_sqr();
        let p2 = 0.5 * (Complex64::i() * esc + elo).norm_sqr();
        i1.push(p1);
        i2.push(p2);
    }
    let mean_total = (i1.iter().sum::<f64>() + i2.iter().sum::<f64>()) / n as f64;
    let per_step = mean_rate_per_ns * scattered.dt_ps / 1000.0 / mean_total;
    for v in i1.iter_mut().chain(i2.iter_mut()) {
        *v *= per_step;
    }
    sample_two_rate_photons(&i1, &i2, scattered.dt_ps, shots, seed, bin_width_ps)
}

/// CSV with columns `tau_ps,g2_hd`.
pub fn write_g2_hd_csv<W: Write>(series: &CoherenceSeries, mut w: W) -> Result<()> {
    writeln!(w, "tau_ps,g2_hd")?;
    for (t, v) in series.tau_ps.iter().zip(&series.values) {
        writeln!(w, "{},{}", t, v.re)?;
    }
    Ok(())
}

/// CSV with columns `tau_ps,g1_recovered,stderr`.
pub fn write_g1_csv<W: Write>(series: &CoherenceSeries, mut w: W) -> Result<()> {
    writeln!(w, "tau_ps,g1_recovered,stderr")?;
    for (k, t) in series.tau_ps.iter().enumerate() {
        let se = series.stderr.as_ref().map_or(f64::NAN, |s| s[k]);
        writeln!(w, "{},{},{}", t, series.values[k].re, se)?;
    }
    Ok(())
}

/// CSV with columns `omega_rad_per_s,s_normalized`.
pub fn write_spectrum_csv<W: Write>(s: &SpectrumSeries, mut w: W) -> Result<()> {
    writeln!(w, "omega_rad_per_s,s_normalized")?;
    for (o, v) in s.omega_rad_per_s.iter().zip(&s.values) {
        writeln!(w, "{},{}", o, v)?;
    }
    Ok(())
}
