//! Photon-statistics toolkit for driven two-level emitters.
//!
//! The crate has two halves that meet at the `PTAG` time-tag format:
//!
//! * simulation ([`qsim`]) — quantum-jump trajectories of a single atom,
//!   exact few-atom collective-mode correlators, large-N chaotic field
//!   synthesis, coherent admixtures and a pair-deletion fixture, all
//!   emitting two-channel photon streams;
//! * analysis ([`tagstore`], [`correlator`], [`coherence`], [`heterodyne`])
//!   — ingestion of tag streams, two-time coincidence matrices, steady-state
//!   g²(τ) with bootstrap errors, Siegert tests, connected correlations
//!   C(τ), fourth-order cumulants, and the heterodyne g¹/spectrum chain.

pub mod coherence;
pub mod correlator;
pub mod error;
pub mod heterodyne;
pub mod manifest;
pub mod qsim;
pub mod series;
pub mod tagstore;

pub use error::{Error, Result};
pub use series::{CoherenceSeries, SeriesKind};
