//! Spectral split-step integrators for the cubic nonlinear Schroedinger equation
//!
//! ```text
//!     i d/dt psi = -d^2/dx^2 psi + |psi|^2 psi ,   x in the 1-D torus
//! ```
//!
//! together with a modulated Fourier expansion engine for the numerical flow and a
//! harness that measures long-time near-conservation as epsilon-scaling laws.
//!
//! The crate is organised in four layers:
//!
//! * [`spectral`]: the Fourier mode space `K = {-K, ..., K-1}`, grid transforms,
//!   and the observables (mass, H^1 norm, energy).
//! * [`splitting`]: splitting schemes of arbitrary stage count, the exact split
//!   flows, and the time integrator.
//! * [`mfe`]: modulated Fourier expansions of the splitting flow: modulation
//!   tables built grade by grade, defect evaluation, and the almost-invariant.
//! * [`harness`]: scaling experiments (drift, order, modulation validation,
//!   interval restart) with slope fits and serialisable reports.
//!
//! With the default `parallel` feature, sweeps and inner loops use rayon. All
//! parallel sites are order-preserving maps over pre-sorted work lists, so
//! results are bit-identical to the sequential fallback for any thread count.

mod ddfft;
pub mod exec;
pub mod harness;
pub mod kahan;
pub mod mfe;
pub mod phase;
pub mod spectral;
pub mod splitting;

pub use num_complex::Complex64;
