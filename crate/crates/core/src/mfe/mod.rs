//! Modulated Fourier expansions for the split-step map.
//!
//! A numerical trajectory `psi^n` with step size `h` is approximated by
//!
//! ```text
//!     psi_j(t) ~ sum_k z_j^k(eps t) exp(-i k t),
//! ```
//!
//! where the modulation coefficients `z_j^k` are polynomials in the slow time
//! `tau = eps t`, organised by powers of the small parameter `eps`. The table
//! of coefficient polynomials is constructed order by order from the splitting
//! scheme itself; the residual it leaves in the numerical recurrence (the
//! defect) and the almost-invariant built from the table are what the harness
//! measures.

pub mod defect;
pub mod graded;
pub mod poly;
pub mod seq;
pub mod table;

pub use graded::{Graded, PolySeq};
pub use poly::TauPoly;
pub use seq::ModeSeq;
pub use table::{build_modulation, build_modulation_at, restart, ModulationTable, RestartOutcome};
pub use defect::{collapse, defect, defect_series, step_on_seq};

use thiserror::Error;

use crate::splitting::CflError;

#[derive(Debug, Error)]
pub enum MfeError {
    #[error(transparent)]
    Cfl(#[from] CflError),
    #[error("phase-flow series did not converge within {max_terms} terms")]
    SeriesDiverged { max_terms: usize },
    #[error("near-resonant divisor at (j = {j}, k = {k}): |denominator| = {magnitude:.3e}")]
    NearResonance { j: i64, k: i64, magnitude: f64 },
    #[error("mode cutoff mismatch: state has K = {state}, table expects K = {table}")]
    CutoffMismatch { state: usize, table: usize },
    #[error("truncation order N = {n} is out of range (need N >= 2)")]
    BadTruncation { n: usize },
    #[error("epsilon = {value} is not a positive finite number")]
    BadEpsilon { value: f64 },
    #[error("initial state is invalid: {reason}")]
    BadState { reason: String },
    #[error("modulation table is inconsistent: {reason}")]
    BadTable { reason: String },
}
