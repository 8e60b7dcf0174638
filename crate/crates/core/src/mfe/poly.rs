//! Dense polynomials in the slow time `tau`, the coefficient functions of a
//! modulation table. Degrees stay tiny (at most N-1), so a plain coefficient
//! vector with Horner evaluation is the right representation. Degree growth
//! beyond the cap indicates a programming error in the grading logic, not
//! roundoff, hence the hard assertions.

use num_complex::Complex64;

/// Polynomial in `tau` with complex coefficients, lowest power first.
/// The zero polynomial is the empty coefficient list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TauPoly {
    coeffs: Vec<Complex64>,
}

impl TauPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        if c == Complex64::new(0.0, 0.0) {
            Self::zero()
        } else {
            Self { coeffs: vec![c] }
        }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while let Some(last) = self.coeffs.last() {
            if *last == Complex64::new(0.0, 0.0) {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the zero polynomial is reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, tau: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * tau + c;
        }
        acc
    }

    pub fn scale(&self, f: Complex64) -> Self {
        if f == Complex64::new(0.0, 0.0) {
            return Self::zero();
        }
        Self::from_coeffs(self.coeffs.iter().map(|c| c * f).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Self::from_coeffs(out)
    }

    pub fn add_assign(&mut self, other: &Self) {
        *self = self.add(other);
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Product with a hard degree cap: panics if the result has degree
    /// beyond `max_deg` with a nonzero coefficient.
    pub fn mul(&self, other: &Self, max_deg: usize) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let deg = self.degree() + other.degree();
        assert!(
            deg <= max_deg,
            "tau-polynomial degree {deg} exceeds cap {max_deg}: grading bug"
        );
        let mut out = vec![Complex64::new(0.0, 0.0); deg + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (l, b) in other.coeffs.iter().enumerate() {
                out[i + l] += a * b;
            }
        }
        Self::from_coeffs(out)
    }

    pub fn conj(&self) -> Self {
        // tau is real, so conjugation acts on the coefficients.
        Self::from_coeffs(self.coeffs.iter().map(|c| c.conj()).collect())
    }

    /// l-th derivative with respect to tau.
    pub fn derivative(&self, l: usize) -> Self {
        let mut cur = self.clone();
        for _ in 0..l {
            if cur.coeffs.len() <= 1 {
                return Self::zero();
            }
            let next: Vec<Complex64> = cur
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * (i as f64))
                .collect();
            cur = Self::from_coeffs(next);
        }
        cur
    }

    /// Antiderivative vanishing at tau = 0.
    pub fn antiderivative(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i + 1] = c / (i as f64 + 1.0);
        }
        Self::from_coeffs(out)
    }

    /// Largest coefficient modulus (0 for the zero polynomial).
    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}
