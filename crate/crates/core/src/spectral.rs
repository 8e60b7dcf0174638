//! Fourier mode space on the 1-D torus and spectral observables.
//!
//! A trigonometric polynomial with modes in `K = {-K, ..., K-1}` is stored as a
//! length-2K coefficient vector in standard DFT order: storage position `m`
//! holds mode `j = m` for `m < K` and `j = m - 2K` for `m >= K` (so mode -K sits
//! at position K). Trigonometric interpolation on the 2K-point grid aliases a
//! frequency `j` to `j mod 2K`, mapped back into `K`.
//!
//! Observables use the normalised inner products of the 2*pi-periodic setting:
//! mass `(1/2pi) int |u|^2 = sum_j |u_j|^2`, the squared H^1 norm
//! `sum_j (j^2+1) |u_j|^2`, and the energy
//! `E(u) = (1/2pi) int |du/dx|^2 + (1/4pi) int |u|^4`, whose quartic term is
//! evaluated by the trapezoidal rule on a 4K-point grid (exact: the integrand
//! has bandwidth at most 4K-2).

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use thiserror::Error;

use crate::kahan::{sum_with, Precision};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("grid with {m} points cannot hold {modes} modes")]
    GridTooCoarse { m: usize, modes: usize },
    #[error("grid length {m} does not match 2K = {expected}")]
    GridLengthMismatch { m: usize, expected: usize },
    #[error("mode cutoff K must be at least 1")]
    ZeroCutoff,
    #[error("initial profile has no nonzero coefficient")]
    ZeroProfile,
    #[error("non-finite coefficient encountered")]
    NonFinite,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_inverse(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}

fn fft_forward(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// `<j>^2 = j^2 + 1`, the squared H^1 weight.
#[inline]
pub fn jweight_sq(j: i64) -> f64 {
    (j * j) as f64 + 1.0
}

/// Samples of a 2*pi-periodic function on the uniform grid `x_m = 2 pi m / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVector {
    values: Vec<Complex64>,
}

impl GridVector {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Grid node `x_m = 2 pi m / M`.
    pub fn node(&self, m: usize) -> f64 {
        2.0 * std::f64::consts::PI * (m as f64) / (self.values.len() as f64)
    }
}

/// Fourier coefficients of a trigonometric polynomial with modes in
/// `{-K, ..., K-1}`, in standard DFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    k_cut: usize,
    coeffs: Vec<Complex64>,
}

impl ModeVector {
    pub fn zero(k_cut: usize) -> Result<Self, SpectralError> {
        if k_cut == 0 {
            return Err(SpectralError::ZeroCutoff);
        }
        Ok(Self {
            k_cut,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * k_cut],
        })
    }

    /// Takes a length-2K coefficient vector already in DFT storage order.
    pub fn from_coeffs(k_cut: usize, coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        if k_cut == 0 {
            return Err(SpectralError::ZeroCutoff);
        }
        if coeffs.len() != 2 * k_cut {
            return Err(SpectralError::GridLengthMismatch {
                m: coeffs.len(),
                expected: 2 * k_cut,
            });
        }
        if !coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        Ok(Self { k_cut, coeffs })
    }

    /// Builds from `(j, coefficient)` pairs; frequencies outside the mode set
    /// are aliased modulo 2K, collisions summed.
    pub fn from_modes(k_cut: usize, modes: &[(i64, Complex64)]) -> Result<Self, SpectralError> {
        let mut v = Self::zero(k_cut)?;
        for &(j, c) in modes {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(SpectralError::NonFinite);
            }
            let idx = v.alias_index(j);
            v.coeffs[idx] += c;
        }
        Ok(v)
    }

    pub fn k_cut(&self) -> usize {
        self.k_cut
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Storage index of frequency `j` after aliasing modulo 2K.
    pub fn alias_index(&self, j: i64) -> usize {
        let m = 2 * self.k_cut as i64;
        (((j % m) + m) % m) as usize
    }

    /// Canonical mode number in `{-K, ..., K-1}` of frequency `j` (aliased).
    pub fn alias_mode(&self, j: i64) -> i64 {
        let idx = self.alias_index(j) as i64;
        if idx < self.k_cut as i64 {
            idx
        } else {
            idx - 2 * self.k_cut as i64
        }
    }

    pub fn coeff(&self, j: i64) -> Complex64 {
        self.coeffs[self.alias_index(j)]
    }

    pub fn set_coeff(&mut self, j: i64, c: Complex64) {
        let idx = self.alias_index(j);
        self.coeffs[idx] = c;
    }

    /// Iterates `(j, coefficient)` in storage order (j = 0..K-1, then -K..-1).
    pub fn iter_modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let k = self.k_cut as i64;
        self.coeffs.iter().enumerate().map(move |(m, &c)| {
            let j = if (m as i64) < k { m as i64 } else { m as i64 - 2 * k };
            (j, c)
        })
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Evaluates the trigonometric polynomial on an `m`-point grid, `m >= 2K`.
    pub fn to_grid(&self, m: usize) -> Result<GridVector, SpectralError> {
        if m < 2 * self.k_cut {
            return Err(SpectralError::GridTooCoarse {
                m,
                modes: 2 * self.k_cut,
            });
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (j, c) in self.iter_modes() {
            let idx = (((j % m as i64) + m as i64) % m as i64) as usize;
            buf[idx] += c;
        }
        fft_inverse(&mut buf);
        Ok(GridVector::new(buf))
    }

    pub fn mass(&self) -> f64 {
        self.mass_with(Precision::Plain)
    }

    pub fn mass_with(&self, mode: Precision) -> f64 {
        sum_with(mode, self.coeffs.iter().map(|c| c.norm_sqr()))
    }

    /// Squared H^1 norm `sum_j (j^2+1) |u_j|^2`.
    pub fn h1_norm_sq(&self) -> f64 {
        self.h1_norm_sq_with(Precision::Plain)
    }

    pub fn h1_norm_sq_with(&self, mode: Precision) -> f64 {
        sum_with(
            mode,
            self.iter_modes().map(|(j, c)| jweight_sq(j) * c.norm_sqr()),
        )
    }

    /// `E(u) = sum_j j^2 |u_j|^2 + (1/4pi) int |u|^4`, the quartic term by
    /// 4K-point trapezoidal quadrature (exact at this bandwidth).
    pub fn energy(&self) -> f64 {
        self.energy_with(Precision::Plain)
    }

    pub fn energy_with(&self, mode: Precision) -> f64 {
        let quad = sum_with(
            mode,
            self.iter_modes()
                .map(|(j, c)| ((j * j) as f64) * c.norm_sqr()),
        );
        let m = 4 * self.k_cut;
        let grid = self.to_grid(m).expect("4K grid is always fine enough");
        let quart = sum_with(
            mode,
            grid.values().iter().map(|v| {
                let a = v.norm_sqr();
                a * a
            }),
        ) / (2.0 * m as f64);
        quad + quart
    }
}

/// Trigonometric interpolation: recovers the coefficients of the unique
/// polynomial with modes in `{-K, ..., K-1}` matching the 2K samples.
pub fn grid_to_modes(grid: &GridVector, k_cut: usize) -> Result<ModeVector, SpectralError> {
    if k_cut == 0 {
        return Err(SpectralError::ZeroCutoff);
    }
    if grid.len() != 2 * k_cut {
        return Err(SpectralError::GridLengthMismatch {
            m: grid.len(),
            expected: 2 * k_cut,
        });
    }
    let mut buf = grid.values().to_vec();
    fft_forward(&mut buf);
    let scale = 1.0 / (2.0 * k_cut as f64);
    for c in &mut buf {
        *c *= scale;
    }
    ModeVector::from_coeffs(k_cut, buf)
}

/// H^1 distance between two mode vectors on the same mode set.
pub fn h1_dist(a: &ModeVector, b: &ModeVector) -> f64 {
    assert_eq!(a.k_cut(), b.k_cut(), "mode sets must match");
    a.iter_modes()
        .zip(b.iter_modes())
        .map(|((j, ca), (_, cb))| jweight_sq(j) * (ca - cb).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Initial-datum profile, normalised by [`make_initial`] so that the H^1 norm
/// equals epsilon exactly.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// A fixed non-symmetric three-mode profile:
    /// `(2+i) e^{ix}/<1> + e^{-2ix}/<2> + 0.5 e^{3ix}/<3>`.
    #[default]
    Default,
    /// A single mode `e^{ijx}`.
    PlaneWave { j: i64 },
    /// Explicit `(j, re, im)` coefficients, aliased into the mode set.
    Explicit { modes: Vec<(i64, f64, f64)> },
}

/// Builds `psi0 = eps * Q^K(g) / ||Q^K(g)||_{H^1}` for the requested profile.
pub fn make_initial(
    k_cut: usize,
    epsilon: f64,
    profile: &Profile,
) -> Result<ModeVector, SpectralError> {
    let raw: Vec<(i64, Complex64)> = match profile {
        Profile::Default => vec![
            (1, Complex64::new(2.0, 1.0) / jweight_sq(1).sqrt()),
            (-2, Complex64::new(1.0, 0.0) / jweight_sq(2).sqrt()),
            (3, Complex64::new(0.5, 0.0) / jweight_sq(3).sqrt()),
        ],
        Profile::PlaneWave { j } => vec![(*j, Complex64::new(1.0, 0.0))],
        Profile::Explicit { modes } => modes
            .iter()
            .map(|&(j, re, im)| (j, Complex64::new(re, im)))
            .collect(),
    };
    let mut v = ModeVector::from_modes(k_cut, &raw)?;
    let norm = v.h1_norm_sq().sqrt();
    if norm == 0.0 {
        return Err(SpectralError::ZeroProfile);
    }
    let scale = epsilon / norm;
    for c in v.coeffs_mut() {
        *c *= scale;
    }
    Ok(v)
}
