//! Siegert prediction, the Gaussian-statistics decomposition of g², the
//! connected correlation C(τ) with its data-only lower bound, fourth-order
//! joint cumulants, mean-field bounds and the intensity-vs-N scaling fit.

use num_complex::Complex64;
use std::io::Write;

use crate::error::{Error, Result};
use crate::series::{CoherenceSeries, SeriesKind};

/// The pieces entering the Gaussian expansion of g²:
///
/// ```text
/// g²(τ) = 1 + |g¹(τ)|² − 2(|⟨Ê⁻⟩|²/⟨Î⟩)² + |⟨Ê⁻(t)Ê⁻(t+τ)⟩|²/⟨Î⟩²
/// ```
///
/// The anomalous correlator oscillates fast and is usually negligible, but
/// it stays an explicit input so oracles can supply it exactly — the
/// neglect is then testable instead of silent.
#[derive(Debug, Clone)]
pub struct GaussianDecomposition {
    pub g1: CoherenceSeries,
    /// ⟨Ê⁻(t)Ê⁻(t+τ)⟩/⟨Î⟩ on the same grid.
    pub anomalous: Vec<Complex64>,
    /// |⟨Ê⁻⟩|²/⟨Î⟩.
    pub mean_field_ratio: f64,
}

impl GaussianDecomposition {
    pub fn new(
        g1: CoherenceSeries,
        anomalous: Vec<Complex64>,
        mean_field_ratio: f64,
    ) -> Result<Self> {
        if g1.kind != SeriesKind::G1 {
            return Err(Error::Config("decomposition needs a g1 series".into()));
        }
        if anomalous.len() != g1.len() {
            return Err(Error::Alignment("anomalous series off the g1 grid".into()));
        }
        if !(0.0..=1.0 + 1e-9).contains(&mean_field_ratio) {
            return Err(Error::Domain(format!(
                "mean_field_ratio {mean_field_ratio} outside [0, 1]"
            )));
        }
        let g10 = g1.values[g1.zero_index()].norm();
        if (g10 - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "g1 is not normalized: |g1(0)| = {g10}"
            )));
        }
        Ok(GaussianDecomposition { g1, anomalous, mean_field_ratio })
    }

    /// Decomposition with no anomalous part and no mean field.
    pub fn from_g1(g1: CoherenceSeries) -> Result<Self> {
        let anomalous = vec![Complex64::ZERO; g1.len()];
        Self::new(g1, anomalous, 0.0)
    }
}

/// Siegert relation g² = 1 + |g¹|², the Gaussian zero-mean prediction.
pub fn siegert_prediction(g1: &CoherenceSeries) -> Result<CoherenceSeries> {
    let g10 = g1.values[g1.zero_index()].norm();
    if (g10 - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!("g1 is not normalized: |g1(0)| = {g10}")));
    }
    let values = g1
        .values
        .iter()
        .map(|v| Complex64::from(1.0 + v.norm_sqr()))
        .collect();
    let stderr = g1
        .stderr
        .as_ref()
        .map(|se| se.iter().zip(&g1.values).map(|(s, v)| 2.0 * v.norm() * s).collect());
    CoherenceSeries::new(g1.tau_ps.clone(), values, stderr, SeriesKind::G2)
}

/// Both Gaussian-statistics predictions for g².
#[derive(Debug, Clone)]
pub struct GaussianG2 {
    /// The full expansion including the mean-field term.
    pub eq_full: CoherenceSeries,
    /// g²_Gauss with the mean field set to zero (anomalous retained):
    /// `1 + |g¹|² + |anomalous|²`.
    pub gauss: CoherenceSeries,
}

pub fn gaussian_g2(d: &GaussianDecomposition) -> Result<GaussianG2> {
    let mf2 = d.mean_field_ratio * d.mean_field_ratio;
    let mut full = Vec::with_capacity(d.g1.len());
    let mut gauss = Vec::with_capacity(d.g1.len());
    for (v, a) in d.g1.values.iter().zip(&d.anomalous) {
        let base = 1.0 + v.norm_sqr() + a.norm_sqr();
        full.push(Complex64::from(base - 2.0 * mf2));
        gauss.push(Complex64::from(base));
    }
    let stderr = d
        .g1
        .stderr
        .as_ref()
        .map(|se| se.iter().zip(&d.g1.values).map(|(s, v)| 2.0 * v.norm() * s).collect::<Vec<f64>>());
    Ok(GaussianG2 {
        eq_full: CoherenceSeries::new(d.g1.tau_ps.clone(), full, stderr.clone(), SeriesKind::G2)?,
        gauss: CoherenceSeries::new(d.g1.tau_ps.clone(), gauss, stderr, SeriesKind::G2)?,
    })
}

/// Connected correlation C(τ) = g²(τ) − g²_Gauss(τ) and the data-only
/// lower bound |C(τ)| ≥ 1 + |g¹(τ)|² − g²(τ).
#[derive(Debug, Clone)]
pub struct ConnectedResult {
    pub c: CoherenceSeries,
    /// Lower bound on |C|; needs only g¹ and g², not the anomalous part.
    pub bound: CoherenceSeries,
}

/// Extracts C(τ) under the zero-mean-field assumption.
///
/// Refuses when the decomposition's mean-field ratio exceeds
/// `mean_field_threshold`: a sizable coherent component biases C by up to
/// 2·ratio², which this estimator does not model.
pub fn connected_correlation(
    g2: &CoherenceSeries,
    d: &GaussianDecomposition,
    mean_field_threshold: f64,
) -> Result<ConnectedResult> {
    g2.check_same_grid(&d.g1)?;
    if d.mean_field_ratio > mean_field_threshold {
        return Err(Error::Domain(format!(
            "mean-field ratio {:.3} exceeds threshold {:.3}: C(τ) would be biased by up to {:.3}; \
             bound the coherent component first",
            d.mean_field_ratio,
            mean_field_threshold,
            2.0 * d.mean_field_ratio * d.mean_field_ratio
        )));
    }
    let gauss = gaussian_g2(d)?.gauss;
    let n = g2.len();
    let mut c_vals = Vec::with_capacity(n);
    let mut b_vals = Vec::with_capacity(n);
    let mut se = Vec::with_capacity(n);
    for k in 0..n {
        let c = g2.values[k].re - gauss.values[k].re;
        c_vals.push(Complex64::from(c));
        b_vals.push(Complex64::from(
            1.0 + d.g1.values[k].norm_sqr() - g2.values[k].re,
        ));
        let se_g2 = g2.stderr.as_ref().map_or(0.0, |s| s[k]);
        let se_g1 = d.g1.stderr.as_ref().map_or(0.0, |s| 2.0 * d.g1.values[k].norm() * s[k]);
        se.push((se_g2 * se_g2 + se_g1 * se_g1).sqrt());
    }
    Ok(ConnectedResult {
        c: CoherenceSeries::new(g2.tau_ps.clone(), c_vals, Some(se.clone()), SeriesKind::Connected)?,
        bound: CoherenceSeries::new(g2.tau_ps.clone(), b_vals, Some(se), SeriesKind::Connected)?,
    })
}

/// Fraction of detected photon pairs relative to Gaussian light,
/// f(τ) = g²(τ)/g²_Gauss(τ); missing (NaN) where g²_Gauss = 0.
/// Satisfies C = g²_Gauss·(f − 1) identically.
pub fn pair_fraction(g2: &CoherenceSeries, g2_gauss: &CoherenceSeries) -> Result<Vec<f64>> {
    g2.check_same_grid(g2_gauss)?;
    Ok(g2
        .values
        .iter()
        .zip(&g2_gauss.values)
        .map(|(n, d)| if d.re != 0.0 { n.re / d.re } else { f64::NAN })
        .collect())
}

fn mean_c(xs: impl Iterator<Item = Complex64>, n: f64) -> Complex64 {
    xs.fold(Complex64::ZERO, |a, b| a + b) / n
}

/// Fourth-order joint connected correlation (Kubo) from sample moments:
///
/// ```text
/// ⟨ABCD⟩c = ⟨ABCD⟩ − ⟨AB⟩⟨CD⟩ − ⟨AC⟩⟨BD⟩ − ⟨AD⟩⟨BC⟩ + 2⟨A⟩⟨B⟩⟨C⟩⟨D⟩
///           − ⟨ABC⟩c⟨D⟩ − ⟨BCD⟩c⟨A⟩ − ⟨CDA⟩c⟨B⟩ − ⟨DAB⟩c⟨C⟩
/// ```
///
/// The third-order terms are kept in full; nothing here assumes zero means.
pub fn fourth_cumulant(samples: &[[Complex64; 4]]) -> Result<Complex64> {
    if samples.len() < 2 {
        return Err(Error::Domain("need at least 2 joint samples".into()));
    }
    let n = samples.len() as f64;
    let m = |idx: &[usize]| -> Complex64 {
        mean_c(
            samples.iter().map(|s| idx.iter().map(|i| s[*i]).product()),
            n,
        )
    };
    let (a, b, c, d) = (0usize, 1, 2, 3);
    let (ma, mb, mc, md) = (m(&[a]), m(&[b]), m(&[c]), m(&[d]));
    let (mab, mac, mad) = (m(&[a, b]), m(&[a, c]), m(&[a, d]));
    let (mbc, mbd, mcd) = (m(&[b, c]), m(&[b, d]), m(&[c, d]));
    let k3 = |mxyz: Complex64,
              mxy: Complex64,
              mxz: Complex64,
              myz: Complex64,
              mx: Complex64,
              my: Complex64,
              mz: Complex64| {
        mxyz - mxy * mz - mxz * my - myz * mx + 2.0 * mx * my * mz
    };
    let k3_abc = k3(m(&[a, b, c]), mab, mac, mbc, ma, mb, mc);
    let k3_bcd = k3(m(&[b, c, d]), mbc, mbd, mcd, mb, mc, md);
    let k3_cda = k3(m(&[c, d, a]), mcd, mac, mad, mc, md, ma);
    let k3_dab = k3(m(&[d, a, b]), mad, mbd, mab, md, ma, mb);
    Ok(m(&[a, b, c, d]) - mab * mcd - mac * mbd - mad * mbc + 2.0 * ma * mb * mc * md
        - k3_abc * md
        - k3_bcd * ma
        - k3_cda * mb
        - k3_dab * mc)
}

/// Cumulant estimate with a batch-means standard error.
pub fn fourth_cumulant_with_error(
    samples: &[[Complex64; 4]],
    n_batches: usize,
) -> Result<(Complex64, f64)> {
    if n_batches < 2 || samples.len() / n_batches < 2 {
        return Err(Error::Config("need ≥ 2 batches of ≥ 2 samples".into()));
    }
    let estimate = fourth_cumulant(samples)?;
    let batch = samples.len() / n_batches;
    let per: Vec<Complex64> = samples
        .chunks_exact(batch)
        .take(n_batches)
        .map(fourth_cumulant)
        .collect::<Result<_>>()?;
    let mean = mean_c(per.iter().copied(), n_batches as f64);
    let var = per.iter().map(|k| (k - mean).norm_sqr()).sum::<f64>() / (n_batches - 1) as f64;
    Ok((estimate, (var / n_batches as f64).sqrt()))
}

/// Upper bound on |⟨Ê⁻⟩|²/⟨Î⟩ from the long-τ plateau of |g¹|:
/// mean of |g¹(τ)| over τ ≥ `tail_start_ps`, with its standard error.
pub fn mean_field_from_g1_tail(g1: &CoherenceSeries, tail_start_ps: f64) -> Result<(f64, f64)> {
    let tail: Vec<f64> = g1
        .tau_ps
        .iter()
        .zip(&g1.values)
        .filter(|(t, _)| **t >= tail_start_ps)
        .map(|(_, v)| v.norm())
        .collect();
    if tail.is_empty() {
        return Err(Error::Config(format!(
            "no τ grid points at or beyond {tail_start_ps} ps"
        )));
    }
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let var = if tail.len() > 1 {
        tail.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

/// Power-law scaling of intensity with emitter number, plus the largest
/// coherent (∝ N²) admixture admissible within the fit residuals.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    /// Log-log least-squares exponent.
    pub exponent: f64,
    /// Upper bound on |⟨Ê⁻⟩|²/⟨Î⟩ at the largest N.
    pub coherent_bound: f64,
    /// Two-term model I = aN + bN².
    pub linear_coeff: f64,
    pub quad_coeff: f64,
    pub fitted: Vec<f64>,
}

/// Fits `I = aN + bN²` with relative weighting, reads off the log-log
/// exponent, and converts `b + confidence·SE(b)` into the coherent bound
/// `b⁺N²/(aN + b⁺N²)` at the largest N.
pub fn intensity_scaling_fit(points: &[(f64, f64)], confidence: f64) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Domain("need at least 3 (N, intensity) points".into()));
    }
    if points.iter().any(|(n, i)| *n <= 0.0 || *i <= 0.0) {
        return Err(Error::Domain("N and intensity must be positive".into()));
    }

    // exponent: OLS on log-log
    let k = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (n, i) in points {
        let (x, y) = (n.ln(), i.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let exponent = (k * sxy - sx * sy) / (k * sxx - sx * sx);

    // relative-residual least squares for I = aN + bN²:
    // rows (N/I, N²/I) against target 1
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (n, i) in points {
        let (x1, x2) = (n / i, n * n / i);
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        t1 += x1;
        t2 += x2;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-300 {
        return Err(Error::Domain("degenerate design (all N equal?)".into()));
    }
    let a = (s22 * t1 - s12 * t2) / det;
    let b = (s11 * t2 - s12 * t1) / det;

    let fitted: Vec<f64> = points.iter().map(|(n, _)| a * n + b * n * n).collect();
    let dof = (points.len() as f64 - 2.0).max(1.0);
    let ssr: f64 = points
        .iter()
        .zip(&fitted)
        .map(|((_, i), f)| {
            let r = (f - i) / i;
            r * r
        })
        .sum();
    let sigma2 = ssr / dof;
    let se_b = (sigma2 * s11 / det).max(0.0).sqrt();

    let n_max = points.iter().map(|(n, _)| *n).fold(f64::MIN, f64::max);
    let b_plus = b.max(0.0) + confidence.max(0.0) * se_b;
    let a_pos = a.max(0.0);
    let denom = a_pos * n_max + b_plus * n_max * n_max;
    let coherent_bound = if denom > 0.0 {
        (b_plus * n_max * n_max / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };

    Ok(ScalingFit {
        points: points.to_vec(),
        exponent,
        coherent_bound,
        linear_coeff: a,
        quad_coeff: b,
        fitted,
    })
}

/// CSV with columns `tau_ps,g2,siegert,g2_gauss,C,C_stderr,bound`.
pub fn write_connected_csv<W: Write>(
    g2: &CoherenceSeries,
    siegert: &CoherenceSeries,
    gauss: &CoherenceSeries,
    connected: &ConnectedResult,
    mut w: W,
) -> Result<()> {
    writeln!(w, "tau_ps,g2,siegert,g2_gauss,C,C_stderr,bound")?;
    let se = connected.c.stderr.as_ref();
    for k in 0..g2.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            g2.tau_ps[k],
            g2.values[k].re,
            siegert.values[k].re,
            gauss.values[k].re,
            connected.c.values[k].re,
            se.map_or(f64::NAN, |s| s[k]),
            connected.bound.values[k].re,
        )?;
    }
    Ok(())
}

/// CSV with columns `n,intensity,fit,residual`.
pub fn write_scaling_csv<W: Write>(fit: &ScalingFit, mut w: W) -> Result<()> {
    writeln!(w, "n,intensity,fit,residual")?;
    for ((n, i), f) in fit.points.iter().zip(&fit.fitted) {
        writeln!(w, "{},{},{},{}", n, i, f, i - f)?;
    }
    Ok(())
}
