//! Formal power series in the small parameter, with tau-polynomial
//! coefficients on the (j, k) index set.
//!
//! A `Graded` value represents `sum_{p >= 1} eps^p x_p` where each slice
//! `x_p` is a sparse sequence of polynomials in the slow time. All operators
//! act gradewise and truncate at a fixed top grade, so every computation here
//! is exact polynomial algebra: series are finite and no numerical limit is
//! taken.
//!
//! The central operator is [`op_f`], the nonlinear part of one splitting step
//! acting on formal series. Writing the nonlinear phase operator as
//! `Phi_B = Id + T` with `T` of grade >= 3, a telescoping identity gives
//!
//! ```text
//!     Phi_step(z) = Phi_A^{(a_1+...+a_s) h}(z) + F(z),
//!     F(z) = sum_r Phi_A^{(a_1+...+a_r) h}( T_r(w_r) ),
//! ```
//!
//! where `w_r` is the partial composition to the right of stage `r`. `F` is
//! assembled term by term, so the grade-p slice of `F(z)` never suffers
//! cancellation between the full step and the free flight: it is built
//! directly from the nonlinear tails.

use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::exec;
use crate::phase::unit_phase_neg_f;
use crate::splitting::SplittingScheme;

use super::poly::TauPoly;
use super::seq::{canonical_j, ModeSeq};

/// Sparse sequence of tau-polynomials on the (j, k) index set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolySeq {
    map: BTreeMap<(i64, i64), TauPoly>,
}

impl PolySeq {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, j: i64, k: i64) -> TauPoly {
        self.map.get(&(j, k)).cloned().unwrap_or_else(TauPoly::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(i64, i64), &TauPoly)> {
        self.map.iter()
    }

    /// Adds `poly` at the (already canonical) key `(j, k)`.
    pub fn add_entry(&mut self, j: i64, k: i64, poly: &TauPoly) {
        if poly.is_zero() {
            return;
        }
        match self.map.get_mut(&(j, k)) {
            Some(slot) => {
                slot.add_assign(poly);
                if slot.is_zero() {
                    self.map.remove(&(j, k));
                }
            }
            None => {
                self.map.insert((j, k), poly.clone());
            }
        }
    }

    pub fn set_entry(&mut self, j: i64, k: i64, poly: TauPoly) {
        if poly.is_zero() {
            self.map.remove(&(j, k));
        } else {
            self.map.insert((j, k), poly);
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (&(j, k), poly) in &other.map {
            self.add_entry(j, k, poly);
        }
    }

    pub fn scale(&self, f: Complex64) -> Self {
        if f == Complex64::new(0.0, 0.0) {
            return Self::new();
        }
        Self {
            map: self
                .map
                .iter()
                .map(|(&key, poly)| (key, poly.scale(f)))
                .collect(),
        }
    }

    /// Bar involution: index flip `(j, k) -> (-j, -k)` (aliased) together with
    /// coefficientwise conjugation of the polynomials (the slow time is real).
    pub fn bar(&self, k_cut: usize) -> Self {
        let mut out = Self::new();
        for (&(j, k), poly) in &self.map {
            out.add_entry(canonical_j(-j, k_cut), -k, &poly.conj());
        }
        out
    }

    /// Entrywise `l`-th derivative in the slow time.
    pub fn derivative(&self, l: usize) -> Self {
        let mut out = Self::new();
        for (&(j, k), poly) in &self.map {
            let d = poly.derivative(l);
            if !d.is_zero() {
                out.map.insert((j, k), d);
            }
        }
        out
    }

    pub fn eval(&self, k_cut: usize, tau: f64) -> ModeSeq {
        let mut out = ModeSeq::new(k_cut);
        for (&(j, k), poly) in &self.map {
            out.add_entry(j, k, poly.eval(tau));
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.map
            .values()
            .map(|p| p.max_coeff_norm())
            .fold(0.0, f64::max)
    }

    fn rows(&self, k_cut: usize) -> Vec<Vec<(i64, &TauPoly)>> {
        let mut rows = vec![Vec::new(); 2 * k_cut];
        let m = 2 * k_cut as i64;
        for (&(j, k), poly) in &self.map {
            rows[(((j % m) + m) % m) as usize].push((k, poly));
        }
        rows
    }

    fn k_range(&self) -> Option<(i64, i64)> {
        if self.map.is_empty() {
            return None;
        }
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for &(_, k) in self.map.keys() {
            lo = lo.min(k);
            hi = hi.max(k);
        }
        Some((lo, hi))
    }
}

/// Convolution of polynomial sequences: `j` adds modulo 2K, `k` adds exactly,
/// values multiply as polynomials capped at `max_deg`. Deterministic for the
/// same reason as the scalar convolution: output rows are independent and each
/// is accumulated in a fixed order.
pub fn conv_poly(x: &PolySeq, y: &PolySeq, k_cut: usize, max_deg: usize) -> PolySeq {
    let mut out = PolySeq::new();
    let (Some((xlo, xhi)), Some((ylo, yhi))) = (x.k_range(), y.k_range()) else {
        return out;
    };
    let klo = xlo + ylo;
    let width = (xhi + yhi - klo + 1) as usize;
    let two_k = 2 * k_cut;
    let x_rows = x.rows(k_cut);
    let y_rows = y.rows(k_cut);

    let out_rows: Vec<Vec<((i64, i64), TauPoly)>> =
        exec::map_ordered((0..two_k).collect(), |&pos_out| {
            let mut buf = vec![TauPoly::zero(); width];
            for (pos1, row1) in x_rows.iter().enumerate() {
                if row1.is_empty() {
                    continue;
                }
                let pos2 = (pos_out + two_k - pos1) % two_k;
                let row2 = &y_rows[pos2];
                for &(k1, p1) in row1 {
                    for &(k2, p2) in row2 {
                        buf[(k1 + k2 - klo) as usize].add_assign(&p1.mul(p2, max_deg));
                    }
                }
            }
            let j_out = canonical_j(pos_out as i64, k_cut);
            buf.into_iter()
                .enumerate()
                .filter(|(_, p)| !p.is_zero())
                .map(|(i, p)| ((j_out, klo + i as i64), p))
                .collect()
        });

    for row in out_rows {
        for ((j, k), p) in row {
            out.map.insert((j, k), p);
        }
    }
    out
}

/// A truncated formal series `sum_{p=1}^{q_max} eps^p x_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graded {
    k_cut: usize,
    slices: Vec<PolySeq>,
}

impl Graded {
    pub fn zero(k_cut: usize, q_max: usize) -> Self {
        assert!(q_max >= 1);
        Self {
            k_cut,
            slices: vec![PolySeq::new(); q_max],
        }
    }

    /// Builds a series from grade slices (`slices[p-1]` is grade `p`),
    /// truncating or zero-padding to exactly `q_max` grades.
    pub fn from_slices(k_cut: usize, slices: &[PolySeq], q_max: usize) -> Self {
        let mut out = Self::zero(k_cut, q_max);
        for (i, s) in slices.iter().take(q_max).enumerate() {
            out.slices[i] = s.clone();
        }
        out
    }

    pub fn k_cut(&self) -> usize {
        self.k_cut
    }

    pub fn q_max(&self) -> usize {
        self.slices.len()
    }

    /// Grade-`p` slice, 1-based.
    pub fn slice(&self, p: usize) -> &PolySeq {
        &self.slices[p - 1]
    }

    pub fn slices(&self) -> &[PolySeq] {
        &self.slices
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.k_cut, other.k_cut);
        assert_eq!(self.slices.len(), other.slices.len());
        for (a, b) in self.slices.iter_mut().zip(&other.slices) {
            a.add_assign(b);
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(&other.scale(Complex64::new(-1.0, 0.0)));
        out
    }

    pub fn scale(&self, f: Complex64) -> Self {
        Self {
            k_cut: self.k_cut,
            slices: self.slices.iter().map(|s| s.scale(f)).collect(),
        }
    }

    pub fn bar(&self) -> Self {
        Self {
            k_cut: self.k_cut,
            slices: self.slices.iter().map(|s| s.bar(self.k_cut)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.slices.iter().all(|s| s.is_empty())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| s.max_abs_coeff())
            .fold(0.0, f64::max)
    }

    /// Kinetic phase operator: every entry times `exp(-i j^2 alpha)`.
    pub fn phase_a(&self, alpha: f64) -> Self {
        if alpha == 0.0 {
            return self.clone();
        }
        let slices = self
            .slices
            .iter()
            .map(|s| {
                let mut out = PolySeq::new();
                for (&(j, k), poly) in s.iter() {
                    let ph = unit_phase_neg_f(((j * j) as f64) * alpha);
                    out.map.insert((j, k), poly.scale(ph));
                }
                out
            })
            .collect();
        Self {
            k_cut: self.k_cut,
            slices,
        }
    }

    /// Gradewise product: grade `q` of the result collects `x_{q1} * y_{q2}`
    /// over `q1 + q2 = q`.
    pub fn conv(&self, other: &Self, q_max: usize) -> Self {
        assert_eq!(self.k_cut, other.k_cut);
        let max_deg = q_max.saturating_sub(2).max(1);
        let mut out = Self::zero(self.k_cut, q_max);
        for q1 in 1..=self.q_max().min(q_max) {
            if self.slice(q1).is_empty() {
                continue;
            }
            for q2 in 1..=other.q_max().min(q_max.saturating_sub(q1)) {
                if other.slice(q2).is_empty() {
                    continue;
                }
                let prod = conv_poly(self.slice(q1), other.slice(q2), self.k_cut, max_deg);
                out.slices[q1 + q2 - 1].add_assign(&prod);
            }
        }
        out
    }
}

/// The tail `Phi_B^alpha - Id` on formal series:
/// `sum_{m >= 1} ((-i alpha)^m / m!) v^{*(m+1)} * (bar v)^{*m}`.
///
/// Term `m` has minimum grade `2m + 1` (when `v` starts at grade 1), so the
/// series is finite under grade truncation; no convergence tolerance enters.
pub fn phase_b_tail(alpha: f64, v: &Graded, q_max: usize) -> Graded {
    let mut out = Graded::zero(v.k_cut(), q_max);
    if alpha == 0.0 || v.is_zero() {
        return out;
    }
    let vbar = v.bar();
    let mut power = Graded::from_slices(v.k_cut(), v.slices(), q_max);
    let mut coef = Complex64::new(1.0, 0.0);
    let mut m = 0usize;
    loop {
        m += 1;
        if 2 * m + 1 > q_max {
            return out;
        }
        power = power.conv(v, q_max).conv(&vbar, q_max);
        if power.is_zero() {
            return out;
        }
        coef *= Complex64::new(0.0, -alpha) / m as f64;
        out.add_assign(&power.scale(coef));
    }
}

/// Full nonlinear phase operator on formal series.
pub fn phase_b(alpha: f64, v: &Graded, q_max: usize) -> Graded {
    let mut out = Graded::from_slices(v.k_cut(), v.slices(), q_max);
    out.add_assign(&phase_b_tail(alpha, v, q_max));
    out
}

/// One full splitting step on formal series (all stages, rightmost first).
pub fn graded_step(z: &Graded, scheme: &SplittingScheme, h: f64, q_max: usize) -> Graded {
    let mut w = Graded::from_slices(z.k_cut(), z.slices(), q_max);
    for r in (0..scheme.stages()).rev() {
        w = phase_b(scheme.b[r] * h, &w, q_max);
        w = w.phase_a(scheme.a[r] * h);
    }
    w
}

/// The nonlinear part `F` of one splitting step on formal series:
/// `Phi_step(z) = Phi_A^{(sum_r a_r) h}(z) + F(z)`.
///
/// Assembled stage by stage from the nonlinear tails, never as a difference
/// of two nearby series. Grade `p` of the result depends only on grades
/// `<= p - 2` of `z` and vanishes for `p < 3`.
pub fn op_f(z: &Graded, scheme: &SplittingScheme, h: f64, q_max: usize) -> Graded {
    let mut w = Graded::from_slices(z.k_cut(), z.slices(), q_max);
    let mut f = Graded::zero(z.k_cut(), q_max);
    for r in (0..scheme.stages()).rev() {
        let phase_sum: f64 = scheme.a[..=r].iter().sum();
        if scheme.b[r] != 0.0 {
            let tail = phase_b_tail(scheme.b[r] * h, &w, q_max);
            f.add_assign(&tail.phase_a(phase_sum * h));
            w.add_assign(&tail);
        }
        w = w.phase_a(scheme.a[r] * h);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitting::find_scheme;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_poly_seq(k_cut: usize, n: usize, k_span: i64, deg: usize, seed: u64) -> PolySeq {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = PolySeq::new();
        for _ in 0..n {
            let j = rng.gen_range(-(k_cut as i64)..k_cut as i64);
            let k = rng.gen_range(-k_span..=k_span);
            let coeffs: Vec<Complex64> = (0..=deg)
                .map(|_| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
                .collect();
            s.add_entry(j, k, &TauPoly::from_coeffs(coeffs));
        }
        s
    }

    fn random_graded(k_cut: usize, q_max: usize, seed: u64) -> Graded {
        let slices: Vec<PolySeq> = (0..q_max)
            .map(|p| random_poly_seq(k_cut, 6, 8, p.min(2), seed * 100 + p as u64))
            .collect();
        Graded::from_slices(k_cut, &slices, q_max)
    }

    #[test]
    fn conv_poly_matches_scalar_conv_after_eval() {
        let k_cut = 4;
        let x = random_poly_seq(k_cut, 10, 6, 2, 1);
        let y = random_poly_seq(k_cut, 8, 6, 2, 2);
        let z = conv_poly(&x, &y, k_cut, 8);
        for &tau in &[0.0, 0.3, -1.1] {
            let direct = z.eval(k_cut, tau);
            let scalar = crate::mfe::seq::conv(&x.eval(k_cut, tau), &y.eval(k_cut, tau));
            assert!(direct.sub(&scalar).norm_sigma(1.0) < 1e-13);
        }
    }

    #[test]
    fn bar_commutes_with_eval() {
        let k_cut = 4;
        let x = random_poly_seq(k_cut, 10, 6, 2, 3);
        for &tau in &[0.2, -0.7] {
            let a = x.bar(k_cut).eval(k_cut, tau);
            let b = x.eval(k_cut, tau).bar();
            assert!(a.sub(&b).norm_sigma(1.0) < 1e-14);
        }
    }

    #[test]
    fn graded_conv_respects_grading() {
        let k_cut = 4;
        let g = random_graded(k_cut, 3, 7);
        let p = g.conv(&g, 6);
        // Grade 1 of a product of two series starting at grade 1 is empty.
        assert!(p.slice(1).is_empty());
        assert!(!p.slice(2).is_empty());
    }

    #[test]
    fn phase_b_tail_starts_at_grade_three() {
        let k_cut = 4;
        let g = random_graded(k_cut, 4, 11);
        let tail = phase_b_tail(0.02, &g, 6);
        assert!(tail.slice(1).is_empty());
        assert!(tail.slice(2).is_empty());
        assert!(!tail.slice(3).is_empty());
    }

    #[test]
    fn op_f_telescoping_identity() {
        // Phi_step(z) = Phi_A^{h}(z) + F(z) grade by grade (consistent scheme:
        // the a-coefficients sum to 1).
        let k_cut = 4;
        let q_max = 6;
        let h = 0.05;
        let z = random_graded(k_cut, 3, 21);
        for name in ["lie-trotter", "strang", "strang-v2", "yoshida4", "blanes-moan4"] {
            let scheme = find_scheme(name).unwrap();
            let full = graded_step(&z, &scheme, h, q_max);
            let mut recomposed = Graded::from_slices(k_cut, z.slices(), q_max).phase_a(h);
            recomposed.add_assign(&op_f(&z, &scheme, h, q_max));
            let diff = full.sub(&recomposed);
            let scale = full.max_abs_coeff().max(1.0);
            assert!(
                diff.max_abs_coeff() <= 1e-13 * scale,
                "scheme {name}: defect {} vs scale {}",
                diff.max_abs_coeff(),
                scale
            );
        }
    }

    #[test]
    fn op_f_lowest_grades_vanish() {
        let z = random_graded(4, 4, 33);
        let f = op_f(&z, &find_scheme("strang").unwrap(), 0.1, 6);
        assert!(f.slice(1).is_empty());
        assert!(f.slice(2).is_empty());
        assert!(!f.slice(3).is_empty());
    }

    #[test]
    fn op_f_grade_p_ignores_grades_above_p_minus_two() {
        let k_cut = 4;
        let q_max = 5;
        let scheme = find_scheme("suzuki4").unwrap();
        let z = random_graded(k_cut, 4, 40);
        // Perturb grade 4 and compare grade <= 5 output: grade 5 of F may see
        // grade 3, but grades <= 4 must be untouched; grade 5 must be
        // untouched by changes to grade 4 as well (5 - 2 = 3 < 4).
        let mut slices = z.slices().to_vec();
        slices[3] = random_poly_seq(k_cut, 6, 8, 1, 99);
        let z2 = Graded::from_slices(k_cut, &slices, 4);
        let f1 = op_f(&z, &scheme, 0.07, q_max);
        let f2 = op_f(&z2, &scheme, 0.07, q_max);
        for p in 1..=5 {
            let d = f1.slice(p).scale(c(1.0, 0.0));
            let mut d2 = d.clone();
            d2.add_assign(&f2.slice(p).scale(c(-1.0, 0.0)));
            assert!(
                d2.max_abs_coeff() <= 1e-15,
                "grade {p} of F changed when grade 4 of z changed"
            );
        }
    }

    #[test]
    fn op_f_single_entry_closed_form() {
        // z with the single constant entry z_{j=1}^{k=1} = 1 at grade 1.
        // Each stage's m = 1 tail contributes (-i b_r h) z*z*zbar at grade 3,
        // index (1, 1); pushing through the remaining kinetic phases and
        // summing over stages with sum b_r = 1 gives exactly
        //     F_3(1, 1) = -i h e^{-i h}
        // for every consistent scheme: the stage phase factors compose to the
        // same e^{-i h} because j = 1 travels with j^2 = 1 through every Phi_A.
        let k_cut = 4;
        let mut slice1 = PolySeq::new();
        slice1.add_entry(1, 1, &TauPoly::constant(c(1.0, 0.0)));
        let z = Graded::from_slices(k_cut, &[slice1], 1);
        let h = 0.3;
        let expected = c(0.0, -h) * unit_phase_neg_f(h);
        for name in [
            "lie-trotter",
            "lie-trotter-v2",
            "strang",
            "strang-v2",
            "yoshida4",
            "suzuki4",
            "blanes-moan4",
        ] {
            let scheme = find_scheme(name).unwrap();
            let f = op_f(&z, &scheme, h, 3);
            let got = f.slice(3).get(1, 1);
            assert!(!got.is_zero(), "scheme {name}: F_3(1,1) missing");
            assert_eq!(got.degree(), 0);
            let v = got.eval(0.0);
            assert!(
                (v - expected).norm() < 1e-14,
                "scheme {name}: got {v}, expected {expected}"
            );
            // Nothing else at grade 3 below k-support, and grades 1, 2 empty.
            assert!(f.slice(1).is_empty() && f.slice(2).is_empty());
        }
    }

    #[test]
    fn op_f_respects_k_support_and_degree_bounds() {
        // With input slices obeying |k| <= p K^2 and deg <= p - 1, the output
        // grade p obeys |k| <= p K^2 and deg <= p - 3.
        let k_cut = 3;
        let ksq = (k_cut * k_cut) as i64;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut slices = Vec::new();
        for p in 1..=3usize {
            let mut s = PolySeq::new();
            for _ in 0..6 {
                let j = rng.gen_range(-(k_cut as i64)..k_cut as i64);
                let k = rng.gen_range(-(p as i64) * ksq..=(p as i64) * ksq);
                let coeffs: Vec<Complex64> = (0..p)
                    .map(|_| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
                    .collect();
                s.add_entry(j, k, &TauPoly::from_coeffs(coeffs));
            }
            slices.push(s);
        }
        let z = Graded::from_slices(k_cut, &slices, 3);
        let f = op_f(&z, &find_scheme("strang").unwrap(), 0.02, 7);
        for p in 3..=7usize {
            for (&(_, k), poly) in f.slice(p).iter() {
                assert!(k.unsigned_abs() <= (p as u64) * (ksq as u64), "grade {p}: k = {k}");
                assert!(poly.degree() <= p - 3, "grade {p}: degree {}", poly.degree());
            }
        }
    }
}
