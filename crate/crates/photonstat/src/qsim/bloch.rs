//! Optical Bloch equations, quantum-regression two-time correlators and the
//! single-atom resonance-fluorescence spectrum.
//!
//! The Lindblad generator is represented as a matrix on column-major
//! vectorized density operators, `vec(AXB) = (Bᵀ⊗A) vec(X)`. Two-time
//! correlators follow the regression rule
//!
//! ```text
//! ⟨P(t) Q(t+τ) R(t)⟩ = Tr[ Q · e^{Lτ}( R ρ_ss P ) ]
//! ```
//!
//! propagated by scaling-and-squaring matrix exponentials of `L·Δτ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qsim::TwoLevelParams;
use crate::series::{CoherenceSeries, SeriesKind};

pub(crate) type CMat = DMatrix<Complex64>;
pub(crate) type CVec = DVector<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Lowering operator |g⟩⟨e| in the {|g⟩, |e⟩} basis.
pub(crate) fn sigma_minus() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

pub(crate) fn sigma_plus() -> CMat {
    sigma_minus().adjoint()
}

pub(crate) fn excited_projector() -> CMat {
    sigma_plus() * sigma_minus()
}

pub(crate) fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

/// Lindblad generator for Hamiltonian `h` and jump operators `jumps`
/// (rates folded into the operators), acting on vectorized states.
pub(crate) fn liouvillian(h: &CMat, jumps: &[CMat]) -> CMat {
    let d = h.nrows();
    let id = identity(d);
    let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * c(0.0, -1.0);
    for j in jumps {
        let jd_j = j.adjoint() * j;
        l += j.map(|z| z.conj()).kronecker(j)
            - (id.kronecker(&jd_j) + jd_j.transpose().kronecker(&id)) * c(0.5, 0.0);
    }
    l
}

pub(crate) fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Tr[Q·X] evaluated directly on the column-major vectorization of X.
pub(crate) fn trace_prod(q: &CMat, xvec: &CVec) -> Complex64 {
    let d = q.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += q[(i, j)] * xvec[i * d + j];
        }
    }
    acc
}

/// Unique steady state of the generator via the stacked least-squares
/// system `[L; trace] ρ = [0; 1]`.
pub(crate) fn steady_state_matrix(l: &CMat, dim: usize) -> Result<CMat> {
    let d2 = dim * dim;
    let mut a = CMat::zeros(d2 + 1, d2);
    a.view_mut((0, 0), (d2, d2)).copy_from(l);
    for k in 0..dim {
        a[(d2, k * dim + k)] = ONE;
    }
    let mut b = CVec::zeros(d2 + 1);
    b[d2] = ONE;
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Domain(format!("steady-state solve failed: {e}")))?;
    let rho = CMat::from_column_slice(dim, dim, x.as_slice());
    // hermitize against numerical asymmetry
    let rho = (rho.clone() + rho.adjoint()) * c(0.5, 0.0);
    Ok(rho)
}

/// Regression engine: a generator, its steady state, and cached
/// exponential steps keyed by Δτ.
pub(crate) struct RegressionEngine {
    pub l: CMat,
    pub rho: CMat,
    pub dim: usize,
}

impl RegressionEngine {
    pub fn new(h: &CMat, jumps: &[CMat]) -> Result<Self> {
        let dim = h.nrows();
        let l = liouvillian(h, jumps);
        let rho = steady_state_matrix(&l, dim)?;
        Ok(RegressionEngine { l, rho, dim })
    }

    pub fn expect(&self, op: &CMat) -> Complex64 {
        (op * &self.rho).trace()
    }

    /// `⟨P(t) Qᵢ(t+τ) R(t)⟩` for every observable `Qᵢ` on an increasing
    /// non-negative τ grid (Γ = 1 units). Returns one series per observable.
    pub fn two_time(
        &self,
        p_op: &CMat,
        r_op: &CMat,
        q_ops: &[&CMat],
        taus: &[f64],
    ) -> Vec<Vec<Complex64>> {
        let mut x = vec_of(&(r_op * &self.rho * p_op));
        let mut out = vec![Vec::with_capacity(taus.len()); q_ops.len()];
        let mut cached: Option<(f64, CMat)> = None;
        let mut prev = 0.0;
        for &tau in taus {
            let dt = tau - prev;
            if dt > 0.0 {
                let exp = match &cached {
                    Some((cdt, e)) if (cdt - dt).abs() < 1e-15 * (1.0 + dt) => e.clone(),
                    _ => {
                        let e = (self.l.clone() * c(dt, 0.0)).exp();
                        cached = Some((dt, e.clone()));
                        e
                    }
                };
                x = &exp * x;
            }
            prev = tau;
            for (qi, q) in q_ops.iter().enumerate() {
                out[qi].push(trace_prod(q, &x));
            }
        }
        out
    }
}

fn single_atom_hamiltonian(p: &TwoLevelParams) -> CMat {
    // Γ = 1 units, rotating frame: H = −Δ σ⁺σ⁻ + (Ω/2)(σ⁺ + σ⁻)
    excited_projector() * c(-p.detuning, 0.0)
        + (sigma_plus() + sigma_minus()) * c(0.5 * p.rabi, 0.0)
}

pub(crate) fn single_atom_engine(p: &TwoLevelParams) -> Result<RegressionEngine> {
    p.validate()?;
    RegressionEngine::new(&single_atom_hamiltonian(p), &[sigma_minus()])
}

/// Steady state of the driven-damped two-level atom.
#[derive(Debug, Clone, Copy)]
pub struct BlochSteadyState {
    /// ⟨σ⁺σ⁻⟩ in steady state.
    pub excited_pop: f64,
    /// ⟨σ⁻⟩ in steady state.
    pub dipole: Complex64,
}

/// Solves the Bloch generator's null space numerically; no closed form
/// is hardcoded here (closed forms live in the tests as cross-checks).
pub fn bloch_steady_state(p: &TwoLevelParams) -> Result<BlochSteadyState> {
    let eng = single_atom_engine(p)?;
    Ok(BlochSteadyState {
        excited_pop: eng.expect(&excited_projector()).re,
        dipole: eng.expect(&sigma_minus()),
    })
}

/// Splits a symmetric τ grid (ps) into its non-negative half in Γ units.
fn non_negative_half(p: &TwoLevelParams, tau_ps: &[f64]) -> Result<(usize, Vec<f64>)> {
    let zero_at = tau_ps
        .iter()
        .position(|t| *t >= -1e-9)
        .ok_or_else(|| Error::Config("tau grid has no non-negative part".into()))?;
    let half: Vec<f64> = tau_ps[zero_at..].iter().map(|t| p.ps_to_gamma(*t)).collect();
    Ok((zero_at, half))
}

/// Normalized first-order coherence g¹(τ) = ⟨σ⁺(t)σ⁻(t+τ)⟩/⟨σ⁺σ⁻⟩ on a
/// symmetric τ grid (ps); the negative half is filled by g¹(−τ) = g¹(τ)*.
pub fn single_atom_g1(p: &TwoLevelParams, tau_ps: &[f64]) -> Result<CoherenceSeries> {
    let eng = single_atom_engine(p)?;
    let nss = eng.expect(&excited_projector()).re;
    if nss <= 0.0 {
        return Err(Error::Domain("undriven atom has no emission to normalize by".into()));
    }
    let (zero_at, half) = non_negative_half(p, tau_ps)?;
    let id = identity(2);
    let sm = sigma_minus();
    let vals = &eng.two_time(&sigma_plus(), &id, &[&sm], &half)[0];
    let mut out = vec![ZERO; tau_ps.len()];
    for (k, v) in vals.iter().enumerate() {
        out[zero_at + k] = v / nss;
    }
    for k in 0..zero_at {
        out[k] = out[tau_ps.len() - 1 - k].conj();
    }
    CoherenceSeries::new(tau_ps.to_vec(), out, None, SeriesKind::G1)
}

/// Normalized intensity correlation g²(τ) =
/// ⟨σ⁺(t)σ⁺σ⁻(t+τ)σ⁻(t)⟩/⟨σ⁺σ⁻⟩² on a symmetric τ grid (ps).
pub fn single_atom_g2(p: &TwoLevelParams, tau_ps: &[f64]) -> Result<CoherenceSeries> {
    let eng = single_atom_engine(p)?;
    let nss = eng.expect(&excited_projector()).re;
    if nss <= 0.0 {
        return Err(Error::Domain("undriven atom has no emission to normalize by".into()));
    }
    let (zero_at, half) = non_negative_half(p, tau_ps)?;
    let nop = excited_projector();
    let vals = &eng.two_time(&sigma_plus(), &sigma_minus(), &[&nop], &half)[0];
    let mut out = vec![ZERO; tau_ps.len()];
    for (k, v) in vals.iter().enumerate() {
        out[zero_at + k] = c(v.re / (nss * nss), 0.0);
    }
    for k in 0..zero_at {
        out[k] = out[tau_ps.len() - 1 - k];
    }
    CoherenceSeries::new(tau_ps.to_vec(), out, None, SeriesKind::G2)
}

/// Closed-form resonant-drive g²(τ) (Δ = 0, Ω > Γ/4):
/// `1 − e^{−3Γτ/4}[cos(μτ) + (3Γ/4μ) sin(μτ)]` with `μ = √(Ω² − (Γ/4)²)`.
/// An independent algebraic route used to pin the regression numerics.
pub fn resonant_g2_closed_form(p: &TwoLevelParams, tau_ps: &[f64]) -> Result<Vec<f64>> {
    if p.detuning != 0.0 {
        return Err(Error::Domain("closed form is the resonant solution (Δ = 0)".into()));
    }
    if p.rabi <= 0.25 {
        return Err(Error::Domain("closed form requires Ω > Γ/4 (underdamped regime)".into()));
    }
    let mu = (p.rabi * p.rabi - 1.0 / 16.0).sqrt();
    Ok(tau_ps
        .iter()
        .map(|t| {
            let tau = p.ps_to_gamma(t.abs());
            1.0 - (-0.75 * tau).exp() * ((mu * tau).cos() + 0.75 / mu * (mu * tau).sin())
        })
        .collect())
}

/// Inelastic (coherent-peak-subtracted) emission spectrum on an angular
/// frequency grid in Γ units, via the resolvent of the Bloch generator:
///
/// `S(ω) ∝ 2 Re Tr[σ⁻ x(ω)]`, `(L + iω) x = −X⊥`, `X⊥ = ρσ⁺ − ⟨σ⁺⟩ρ`.
///
/// The bordered system (trace row and ρ_ss column) keeps the solve
/// regular at ω = 0 where `L` itself is singular.
pub(crate) fn single_atom_inelastic_spectrum(
    p: &TwoLevelParams,
    omegas_gamma: &[f64],
) -> Result<Vec<f64>> {
    let eng = single_atom_engine(p)?;
    let nss = eng.expect(&excited_projector()).re;
    if nss <= 1e-14 {
        return Err(Error::Domain(
            "Ω = 0: elastic-only emission, no inelastic spectrum to compute".into(),
        ));
    }
    let dim = eng.dim;
    let d2 = dim * dim;
    let x0 = vec_of(&(&eng.rho * sigma_plus()));
    let mean = eng.expect(&sigma_plus());
    let xperp = &x0 - vec_of(&eng.rho) * mean;

    let sm = sigma_minus();
    let mut out = Vec::with_capacity(omegas_gamma.len());
    for &w in omegas_gamma {
        let mut a = CMat::zeros(d2 + 1, d2 + 1);
        for i in 0..d2 {
            for j in 0..d2 {
                a[(i, j)] = eng.l[(i, j)];
            }
            a[(i, i)] += c(0.0, w);
        }
        let rssv = vec_of(&eng.rho);
        for i in 0..d2 {
            a[(i, d2)] = rssv[i];
        }
        for k in 0..dim {
            a[(d2, k * dim + k)] = ONE;
        }
        let mut b = CVec::zeros(d2 + 1);
        for i in 0..d2 {
            b[i] = -xperp[i];
        }
        let lu = a.lu();
        let sol = lu
            .solve(&b)
            .ok_or_else(|| Error::Domain("resolvent solve failed".into()))?;
        let x = CVec::from_iterator(d2, (0..d2).map(|i| sol[i]));
        out.push(2.0 * trace_prod(&sm, &x).re / nss);
    }
    Ok(out)
}
