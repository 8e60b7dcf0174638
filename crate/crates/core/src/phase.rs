//! Accurate evaluation of the oscillatory phases `exp(-i k t)`.
//!
//! The products `k*t` reach a few times 1e4 over the time horizons of interest,
//! where plain f64 multiplication already loses ~1e-12 of phase. The reduction
//! below forms `k*t` as an exact double-double via FMA and subtracts the nearest
//! multiple of 2*pi in double-double arithmetic, keeping the phase error near
//! the 1e-16 level independently of the magnitude of `k*t`.

use num_complex::Complex64;

pub(crate) const TWO_PI_HI: f64 = 6.283185307179586;
pub(crate) const TWO_PI_LO: f64 = 2.4492935982947064e-16;

#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
pub(crate) fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Reduces `k * t` modulo 2*pi into roughly `[-pi, pi]`.
pub fn reduce_angle(k: i64, t: f64) -> f64 {
    let kf = k as f64;
    let (hi, lo) = two_prod(kf, t);
    let n = (hi / TWO_PI_HI).round();
    if n == 0.0 {
        return hi + lo;
    }
    // n * 2pi in double-double
    let (p_hi, p_lo) = two_prod(n, TWO_PI_HI);
    let p_lo = p_lo + n * TWO_PI_LO;
    // (hi + lo) - (p_hi + p_lo)
    let (s, e) = two_sum(hi, -p_hi);
    s + (e + (lo - p_lo))
}

/// `exp(-i k t)` with double-double argument reduction.
pub fn unit_phase_neg(k: i64, t: f64) -> Complex64 {
    let theta = reduce_angle(k, t);
    let (sin, cos) = theta.sin_cos();
    Complex64::new(cos, -sin)
}

/// `exp(-i theta)` for small arguments (no reduction beyond libm's own).
pub fn unit_phase_neg_f(theta: f64) -> Complex64 {
    let (sin, cos) = theta.sin_cos();
    Complex64::new(cos, -sin)
}

/// A rotation factor stored to double-double accuracy with true modulus
/// `1 + O(1e-32)`.
///
/// The rounded `(cos, sin)` pair of a fixed angle has true modulus `1 + d`
/// with `|d|` up to ~1e-16, an error invisible to f64 but fixed per angle. An
/// integrator that reapplies the same factor every step compounds it
/// linearly, and the mass of the state drifts out of a 1e-12 tolerance after
/// a few 10^4 steps. Normalizing the factor in double-double and applying it
/// with one final rounding per component turns that drift into a random walk.
#[derive(Debug, Clone, Copy)]
pub struct UnitPhase {
    hi: Complex64,
    lo: Complex64,
}

impl UnitPhase {
    /// `exp(-i theta)` for small arguments.
    pub fn neg_f(theta: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        Self::from_cos_sin(cos, -sin)
    }

    fn from_cos_sin(c: f64, s: f64) -> Self {
        // d = c^2 + s^2 - 1 exactly: the squares are split via FMA, and the
        // leading sum is within ulps of 1 so the subtraction is exact.
        let (p, ep) = two_prod(c, c);
        let (q, eq) = two_prod(s, s);
        let (s1, e1) = two_sum(p, q);
        let d = (s1 - 1.0) + (e1 + (ep + eq));
        // (c, s) * (1 - d/2) has true modulus 1 + O(d^2).
        let half = -0.5 * d;
        UnitPhase {
            hi: Complex64::new(c, s),
            lo: Complex64::new(c * half, s * half),
        }
    }

    /// Leading and trailing components of the phase factor.
    pub(crate) fn parts(&self) -> (Complex64, Complex64) {
        (self.hi, self.lo)
    }

    /// `z * phase`, each product split via FMA, one final rounding per
    /// component.
    pub fn rotate(&self, z: Complex64) -> Complex64 {
        let w = self.hi;
        let l = self.lo;
        let (p, ep) = two_prod(z.re, w.re);
        let (q, eq) = two_prod(z.im, w.im);
        let (s1, t1) = two_sum(p, -q);
        let re = s1 + (t1 + ((ep - eq) + (z.re * l.re - z.im * l.im)));

        let (r, er) = two_prod(z.re, w.im);
        let (t, et) = two_prod(z.im, w.re);
        let (s2, t2) = two_sum(r, t);
        let im = s2 + (t2 + ((er + et) + (z.re * l.im + z.im * l.re)));
        Complex64::new(re, im)
    }
}
