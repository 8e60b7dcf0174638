//! Sparse sequences `x = (x_j^k)` indexed by a mode `j` in `{-K, ..., K-1}`
//! and an integer frequency label `k`, the raw material of modulated Fourier
//! expansions.
//!
//! The discrete convolution couples `j` modulo 2K (the mode set of the
//! trigonometric interpolation) while the `k` labels add exactly:
//!
//! ```text
//!     (x * y)_j^k = sum over j1 + j2 = j (mod 2K), k1 + k2 = k of x_{j1}^{k1} y_{j2}^{k2}.
//! ```
//!
//! Norms are the weighted l^2-of-l^1 family
//! `||x||_sigma^2 = sum_j <j>^{2 sigma} (sum_k |x_j^k|)^2`.

use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::exec;
use crate::phase::unit_phase_neg_f;
use crate::spectral::jweight_sq;

use super::MfeError;

/// Relative cutoff for the phase-flow series on sequences.
pub const PHI_B_SERIES_TOL: f64 = 1e-16;
/// Hard cap on the number of series terms (non-convergence guard).
pub const PHI_B_SERIES_MAX_TERMS: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSeq {
    k_cut: usize,
    map: BTreeMap<(i64, i64), Complex64>,
}

impl ModeSeq {
    pub fn new(k_cut: usize) -> Self {
        assert!(k_cut >= 1);
        Self {
            k_cut,
            map: BTreeMap::new(),
        }
    }

    pub fn from_entries(k_cut: usize, entries: &[((i64, i64), Complex64)]) -> Self {
        let mut s = Self::new(k_cut);
        for &((j, k), v) in entries {
            s.add_entry(j, k, v);
        }
        s
    }

    pub fn k_cut(&self) -> usize {
        self.k_cut
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Canonical representative of `j` in `{-K, ..., K-1}` (aliased mod 2K).
    pub fn canonical_j(&self, j: i64) -> i64 {
        canonical_j(j, self.k_cut)
    }

    pub fn get(&self, j: i64, k: i64) -> Complex64 {
        self.map
            .get(&(self.canonical_j(j), k))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Adds `v` at `(j, k)`, aliasing `j`; exact zeros are not stored.
    pub fn add_entry(&mut self, j: i64, k: i64, v: Complex64) {
        if v == Complex64::new(0.0, 0.0) {
            return;
        }
        let key = (self.canonical_j(j), k);
        let slot = self.map.entry(key).or_insert(Complex64::new(0.0, 0.0));
        *slot += v;
        if *slot == Complex64::new(0.0, 0.0) {
            self.map.remove(&key);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), Complex64)> + '_ {
        self.map.iter().map(|(&k, &v)| (k, v))
    }

    pub fn scale(&self, f: Complex64) -> Self {
        if f == Complex64::new(0.0, 0.0) {
            return Self::new(self.k_cut);
        }
        Self {
            k_cut: self.k_cut,
            map: self.map.iter().map(|(&k, &v)| (k, v * f)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.k_cut, other.k_cut);
        let mut out = self.clone();
        for (&key, &v) in &other.map {
            let slot = out.map.entry(key).or_insert(Complex64::new(0.0, 0.0));
            *slot += v;
            if *slot == Complex64::new(0.0, 0.0) {
                out.map.remove(&key);
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// The bar involution `(bar x)_j^k = conj(x_{-j}^{-k})`, with `-(-K)`
    /// identified with `-K` on the aliased mode set.
    pub fn bar(&self) -> Self {
        let mut out = Self::new(self.k_cut);
        for (&(j, k), &v) in &self.map {
            out.add_entry(-j, -k, v.conj());
        }
        out
    }

    /// `||x||_sigma = sqrt( sum_j <j>^{2 sigma} (sum_k |x_j^k|)^2 )`.
    pub fn norm_sigma(&self, sigma: f64) -> f64 {
        let mut total = 0.0;
        let mut cur_j: Option<i64> = None;
        let mut row_sum = 0.0;
        let flush = |j: Option<i64>, row: f64, total: &mut f64| {
            if let Some(j) = j {
                *total += jweight_sq(j).powf(sigma) * row * row;
            }
        };
        for (&(j, _), &v) in &self.map {
            if cur_j != Some(j) {
                flush(cur_j, row_sum, &mut total);
                cur_j = Some(j);
                row_sum = 0.0;
            }
            row_sum += v.norm();
        }
        flush(cur_j, row_sum, &mut total);
        total.sqrt()
    }

    /// Multiplies each entry by `<k - j^2>`.
    pub fn rescale_lambda(&self) -> Self {
        Self {
            k_cut: self.k_cut,
            map: self
                .map
                .iter()
                .map(|(&(j, k), &v)| ((j, k), v * jweight_sq(k - j * j).sqrt()))
                .collect(),
        }
    }

    /// Multiplies each entry by `<k>`.
    pub fn rescale_k(&self) -> Self {
        Self {
            k_cut: self.k_cut,
            map: self
                .map
                .iter()
                .map(|(&(j, k), &v)| ((j, k), v * jweight_sq(k).sqrt()))
                .collect(),
        }
    }

    /// The almost-invariant density `E(x) = sum_{j,k} (k+1) |x_j^k|^2`.
    pub fn e_invariant(&self) -> f64 {
        self.map
            .iter()
            .map(|(&(_, k), &v)| ((k + 1) as f64) * v.norm_sqr())
            .sum()
    }

    fn k_range(&self) -> Option<(i64, i64)> {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for &(_, k) in self.map.keys() {
            lo = lo.min(k);
            hi = hi.max(k);
        }
        if self.map.is_empty() {
            None
        } else {
            Some((lo, hi))
        }
    }

    /// Rows indexed by storage position of `j` (0..2K).
    fn rows(&self) -> Vec<Vec<(i64, Complex64)>> {
        let mut rows = vec![Vec::new(); 2 * self.k_cut];
        for (&(j, k), &v) in &self.map {
            rows[storage_index(j, self.k_cut)].push((k, v));
        }
        rows
    }
}

pub(crate) fn canonical_j(j: i64, k_cut: usize) -> i64 {
    let m = 2 * k_cut as i64;
    let r = ((j % m) + m) % m;
    if r < k_cut as i64 {
        r
    } else {
        r - m
    }
}

fn storage_index(j: i64, k_cut: usize) -> usize {
    let m = 2 * k_cut as i64;
    (((j % m) + m) % m) as usize
}

/// Discrete convolution: `j` adds modulo 2K, `k` adds exactly.
///
/// Work is split over output rows (one per mode `j`), each accumulated into a
/// dense `k` buffer in a fixed order, so the result does not depend on the
/// execution mode or thread count.
pub fn conv(x: &ModeSeq, y: &ModeSeq) -> ModeSeq {
    assert_eq!(x.k_cut, y.k_cut, "convolution requires matching mode sets");
    let k_cut = x.k_cut;
    let mut out = ModeSeq::new(k_cut);
    let (Some((xlo, xhi)), Some((ylo, yhi))) = (x.k_range(), y.k_range()) else {
        return out;
    };
    let klo = xlo + ylo;
    let khi = xhi + yhi;
    let width = (khi - klo + 1) as usize;
    let two_k = 2 * k_cut;
    let x_rows = x.rows();
    let y_rows = y.rows();

    let out_rows: Vec<Vec<((i64, i64), Complex64)>> =
        exec::map_ordered((0..two_k).collect(), |&pos_out| {
            let mut buf = vec![Complex64::new(0.0, 0.0); width];
            for (pos1, row1) in x_rows.iter().enumerate() {
                if row1.is_empty() {
                    continue;
                }
                let pos2 = (pos_out + two_k - pos1) % two_k;
                let row2 = &y_rows[pos2];
                if row2.is_empty() {
                    continue;
                }
                for &(k1, v1) in row1 {
                    for &(k2, v2) in row2 {
                        buf[(k1 + k2 - klo) as usize] += v1 * v2;
                    }
                }
            }
            let j_out = canonical_j(pos_out as i64, k_cut);
            buf.iter()
                .enumerate()
                .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
                .map(|(i, &v)| ((j_out, klo + i as i64), v))
                .collect()
        });

    for row in out_rows {
        for ((j, k), v) in row {
            out.map.insert((j, k), v);
        }
    }
    out
}

/// Kinetic phase operator on sequences: entry `(j, k)` times `exp(-i j^2 alpha)`.
pub fn phi_a(x: &ModeSeq, alpha: f64) -> ModeSeq {
    if alpha == 0.0 {
        return x.clone();
    }
    ModeSeq {
        k_cut: x.k_cut,
        map: x
            .map
            .iter()
            .map(|(&(j, k), &v)| ((j, k), v * unit_phase_neg_f(((j * j) as f64) * alpha)))
            .collect(),
    }
}

/// Nonlinear phase operator on sequences:
/// `Phi_B^alpha(v) = sum_m ((-i alpha)^m / m!) v^{*(m+1)} * (bar v)^{*m}`,
/// truncated when a term's sigma=1 norm falls below 1e-16 of the running sum.
pub fn phi_b(x: &ModeSeq, alpha: f64) -> Result<ModeSeq, MfeError> {
    if alpha == 0.0 || x.is_empty() {
        return Ok(x.clone());
    }
    let xbar = x.bar();
    let mut power = x.clone(); // v^{*(m+1)} * (bar v)^{*m} for current m
    let mut out = x.clone();
    let mut coef = Complex64::new(1.0, 0.0);
    for m in 1..=PHI_B_SERIES_MAX_TERMS {
        power = conv(&conv(&power, x), &xbar);
        coef *= Complex64::new(0.0, -alpha) / m as f64;
        let term = power.scale(coef);
        let term_norm = term.norm_sigma(1.0);
        out = out.add(&term);
        if term_norm <= PHI_B_SERIES_TOL * out.norm_sigma(1.0) {
            return Ok(out);
        }
    }
    Err(MfeError::SeriesDiverged {
        max_terms: PHI_B_SERIES_MAX_TERMS,
    })
}

/// The almost-invariant before and after one kinetic phase operator.
pub fn e_invariant_under_phi_a(x: &ModeSeq, alpha: f64) -> (f64, f64) {
    (x.e_invariant(), phi_a(x, alpha).e_invariant())
}

/// The almost-invariant before and after one nonlinear phase operator.
pub fn e_invariant_under_phi_b(x: &ModeSeq, alpha: f64) -> Result<(f64, f64), MfeError> {
    Ok((x.e_invariant(), phi_b(x, alpha)?.e_invariant()))
}
