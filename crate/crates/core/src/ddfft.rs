//! Double-double realisation of the potential-flow stage on power-of-two
//! grids.
//!
//! One potential stage is inverse FFT -> pointwise rotation -> forward FFT ->
//! 1/M scale. Evaluated plainly in f64 that is about a dozen roundings per
//! element, and while the state is quasi-static (stage angles of order
//! h*eps^2) the rounding pattern repeats step after step, so mass picks up a
//! systematic fraction of an ulp per stage, linear in the step count and in
//! the number of nonzero potential stages of the scheme. Carrying the whole
//! stage in double-double with modulus-true twiddles and rounding once per
//! element at the end pushes the stage error floor below the level where the
//! repetition matters.
//!
//! Only power-of-two transform sizes are supported (every grid this crate
//! uses has 2K points with K a power of two); other sizes keep the planner
//! path in `splitting::flow_b_grid`.

use num_complex::Complex64;
use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::phase::{two_prod, two_sum, UnitPhase, TWO_PI_HI, TWO_PI_LO};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn add(self, o: Dd) -> Dd {
        let (s1, e1) = two_sum(self.hi, o.hi);
        let (s2, e2) = two_sum(self.lo, o.lo);
        let (s1, e1) = quick_two_sum(s1, e1 + s2);
        let (hi, lo) = quick_two_sum(s1, e1 + e2);
        Dd { hi, lo }
    }

    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    #[inline]
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    fn mul_f64(self, s: f64) -> Dd {
        let (p, e) = two_prod(self.hi, s);
        let (hi, lo) = quick_two_sum(p, e + self.lo * s);
        Dd { hi, lo }
    }

    #[inline]
    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let r = (self.hi - p) - e + self.lo;
        let (hi, lo) = quick_two_sum(q1, r / d);
        Dd { hi, lo }
    }

    /// Exact for `s` a power of two.
    #[inline]
    fn scale_pow2(self, s: f64) -> Dd {
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    #[inline]
    fn round(self) -> f64 {
        self.hi + self.lo
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct DdC {
    re: Dd,
    im: Dd,
}

impl DdC {
    #[inline]
    fn from_c(z: Complex64) -> Self {
        DdC {
            re: Dd::from_f64(z.re),
            im: Dd::from_f64(z.im),
        }
    }

    #[inline]
    fn add(self, o: DdC) -> DdC {
        DdC {
            re: self.re.add(o.re),
            im: self.im.add(o.im),
        }
    }

    #[inline]
    fn sub(self, o: DdC) -> DdC {
        DdC {
            re: self.re.sub(o.re),
            im: self.im.sub(o.im),
        }
    }

    #[inline]
    fn mul(self, o: DdC) -> DdC {
        DdC {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }
}

/// Taylor series for `(sin x, cos x)` on `|x| <= pi/4`, all arithmetic in
/// double-double. One-time table construction cost, so speed is irrelevant.
fn sincos_kernel(x: Dd) -> (Dd, Dd) {
    let x2 = x.mul(x);
    let mut s = x;
    let mut term = x;
    let mut k = 1.0f64;
    loop {
        term = term.mul(x2).div_f64(-(2.0 * k) * (2.0 * k + 1.0));
        s = s.add(term);
        if term.hi.abs() < 1e-35 {
            break;
        }
        k += 1.0;
    }
    let mut c = Dd::from_f64(1.0);
    let mut term = Dd::from_f64(1.0);
    let mut k = 1.0f64;
    loop {
        term = term.mul(x2).div_f64(-(2.0 * k - 1.0) * (2.0 * k));
        c = c.add(term);
        if term.hi.abs() < 1e-35 {
            break;
        }
        k += 1.0;
    }
    (s, c)
}

/// `exp(2 pi i k / m)` to double-double accuracy in angle and modulus,
/// `0 <= k < m/2`, `m` a power of two.
///
/// The FFT pair below cancels to an identity only as far as the twiddles of
/// the two directions are consistent samples of one circle, so unlike the
/// rotation factors these need the full angle accuracy, not just |w| = 1.
/// Octant reduction happens on the exact integer index; the kernel only ever
/// sees `2 pi k'/m <= pi/4` with `k'/m` an exact dyadic.
fn twiddle(k: usize, m: usize) -> DdC {
    let two_pi = Dd { hi: TWO_PI_HI, lo: TWO_PI_LO };
    let eval = |kp: usize| sincos_kernel(two_pi.mul_f64(kp as f64 / m as f64));
    let (sin, cos) = if 8 * k <= m {
        eval(k)
    } else if 4 * k <= m {
        let (s, c) = eval(m / 4 - k);
        (c, s)
    } else if 8 * k <= 3 * m {
        let (s, c) = eval(k - m / 4);
        (c, s.neg())
    } else {
        let (s, c) = eval(m / 2 - k);
        (s, c.neg())
    };
    DdC { re: cos, im: sin }
}

/// Twiddle table `exp(sign * 2 pi i k / m)` for `k < m/2`; the forward
/// transform takes the conjugate (exact).
fn make_twiddles(m: usize, forward: bool) -> Vec<DdC> {
    (0..m / 2)
        .map(|k| {
            let w = twiddle(k, m);
            if forward {
                DdC { re: w.re, im: w.im.neg() }
            } else {
                w
            }
        })
        .collect()
}

thread_local! {
    static TWIDDLES: RefCell<HashMap<(usize, bool), Rc<Vec<DdC>>>> =
        RefCell::new(HashMap::new());
}

fn twiddles(m: usize, forward: bool) -> Rc<Vec<DdC>> {
    TWIDDLES.with(|cell| {
        Rc::clone(
            cell.borrow_mut()
                .entry((m, forward))
                .or_insert_with(|| Rc::new(make_twiddles(m, forward))),
        )
    })
}

/// Unnormalised in-place radix-2 transform, `tw[k] = exp(sign 2 pi i k / m)`.
fn fft_pow2(buf: &mut [DdC], tw: &[DdC]) {
    let m = buf.len();
    debug_assert!(m.is_power_of_two());
    let mut j = 0usize;
    for i in 1..m {
        let mut bit = m >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= m {
        let stride = m / len;
        let half = len / 2;
        let mut start = 0;
        while start < m {
            for i in 0..half {
                let w = tw[i * stride];
                let a = buf[start + i];
                let b = buf[start + i + half].mul(w);
                buf[start + i] = a.add(b);
                buf[start + i + half] = a.sub(b);
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Fused potential stage on grid values packed in FFT storage order: inverse
/// transform, rotation by `exp(-i alpha |v|^2)` at each point, forward
/// transform, exact `1/m` scale, then a single rounding per component.
///
/// Input and output live in the same space as the raw coefficient storage of
/// a `ModeVector` with `2K = m` (the index map between mode storage and the
/// 2K-point transform is the identity).
pub(crate) fn rotate_stage(coeffs: &[Complex64], alpha: f64) -> Vec<Complex64> {
    let m = coeffs.len();
    debug_assert!(m.is_power_of_two());
    let mut buf: Vec<DdC> = coeffs.iter().map(|&c| DdC::from_c(c)).collect();
    let inv = twiddles(m, false);
    fft_pow2(&mut buf, &inv);
    for v in buf.iter_mut() {
        // |v|^2 from the leading parts only: the error is phase-sized, not
        // modulus-sized, so f64 is enough here.
        let theta = alpha * (v.re.hi * v.re.hi + v.im.hi * v.im.hi);
        let (hi, lo) = UnitPhase::neg_f(theta).parts();
        let ph = DdC {
            re: Dd { hi: hi.re, lo: lo.re },
            im: Dd { hi: hi.im, lo: lo.im },
        };
        *v = ph.mul(*v);
    }
    let fwd = twiddles(m, true);
    fft_pow2(&mut buf, &fwd);
    let scale = 1.0 / m as f64;
    buf.iter()
        .map(|v| {
            Complex64::new(
                v.re.scale_pow2(scale).round(),
                v.im.scale_pow2(scale).round(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let m = x.len();
        (0..m)
            .map(|k| {
                (0..m)
                    .map(|n| {
                        let th = sign * 2.0 * std::f64::consts::PI * ((k * n) as f64) / m as f64;
                        x[n] * Complex64::new(th.cos(), th.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn test_vector(m: usize) -> Vec<Complex64> {
        (0..m)
            .map(|i| {
                let a = (i as f64 + 1.0) * 0.37;
                Complex64::new(a.sin() * 0.11, (a * 1.7).cos() * 0.07)
            })
            .collect()
    }

    #[test]
    fn transform_matches_naive_dft() {
        for m in [2usize, 4, 8, 32, 64] {
            let x = test_vector(m);
            for forward in [false, true] {
                let mut buf: Vec<DdC> = x.iter().map(|&c| DdC::from_c(c)).collect();
                let tw = twiddles(m, forward);
                fft_pow2(&mut buf, &tw);
                let got: Vec<Complex64> = buf
                    .iter()
                    .map(|v| Complex64::new(v.re.round(), v.im.round()))
                    .collect();
                let sign = if forward { -1.0 } else { 1.0 };
                let want = naive_dft(&x, sign);
                for (g, w) in got.iter().zip(&want) {
                    assert!(
                        (g - w).norm() <= 1e-13,
                        "m={m} forward={forward}: {g} vs {w}"
                    );
                }
            }
        }
    }

    #[test]
    fn twiddles_are_unit_and_accurate() {
        for m in [2usize, 4, 8, 64, 256] {
            for k in 0..m / 2 {
                let w = twiddle(k, m);
                let theta = 2.0 * std::f64::consts::PI * (k as f64) / (m as f64);
                assert!((w.re.hi - theta.cos()).abs() <= 4e-16, "cos k={k} m={m}");
                assert!((w.im.hi - theta.sin()).abs() <= 4e-16, "sin k={k} m={m}");
                // |w|^2 - 1 at double-double accuracy.
                let n2 = w.re.mul(w.re).add(w.im.mul(w.im));
                let dev = (n2.hi - 1.0) + n2.lo;
                assert!(dev.abs() <= 1e-30, "modulus k={k} m={m}: {dev:e}");
            }
        }
    }

    #[test]
    fn zero_angle_stage_is_identity_bitwise() {
        let x = test_vector(32);
        let y = rotate_stage(&x, 0.0);
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn stage_preserves_mass_to_last_ulp() {
        // Repeated small-angle stages on a quasi-static state: the scenario
        // where the plain f64 pipeline accumulates a linear drift.
        let m = 32usize;
        let mut x = test_vector(m);
        let mass = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let m0 = mass(&x);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            x = rotate_stage(&x, 7.8e-5);
            worst = worst.max(((mass(&x) - m0) / m0).abs());
        }
        assert!(worst <= 5e-14, "mass drift {worst:.3e}");
    }
}
