//! Complex FFT of arbitrary length.
//!
//! Power-of-two lengths use an iterative radix-2 transform; every other
//! length goes through Bluestein's chirp-z algorithm on a padded power-of-two
//! plan. Plans are immutable and hold only precomputed tables, so a single
//! plan may be shared between threads; scratch space is allocated per call.
//!
//! Sign convention: `forward` computes `X(k) = sum_t x(t) exp(-2 pi i k t / N)`
//! with no scaling, `inverse` applies the conjugate kernel and divides by `N`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Radix2(Radix2),
    Bluestein {
        inner: Radix2,
        /// `exp(-i pi t^2 / N)` for t in 0..N
        chirp: Vec<Complex64>,
        /// forward transform of the conjugate chirp, wrapped to the inner length
        kernel: Vec<Complex64>,
    },
}

#[derive(Debug, Clone)]
struct Radix2 {
    len: usize,
    /// `exp(-2 pi i k / len)` for k in 0..len/2
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        Self { len, twiddles }
    }

    fn process(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.len;
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        if len.is_power_of_two() {
            return Self {
                len,
                kind: Kind::Radix2(Radix2::new(len)),
            };
        }
        let inner_len = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(inner_len);
        // t^2 mod 2N keeps the phase argument small for long transforms
        let chirp: Vec<Complex64> = (0..len)
            .map(|t| {
                let t2 = ((t as u128 * t as u128) % (2 * len as u128)) as f64;
                Complex64::from_polar(1.0, -PI * t2 / len as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); inner_len];
        kernel[0] = chirp[0].conj();
        for t in 1..len {
            kernel[t] = chirp[t].conj();
            kernel[inner_len - t] = chirp[t].conj();
        }
        inner.process(&mut kernel, false);
        Self {
            len,
            kind: Kind::Bluestein {
                inner,
                chirp,
                kernel,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.process(buf, false);
    }

    /// Inverse transform in place, scaled by `1/N`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.process(buf, true);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    fn process(&self, buf: &mut [Complex64], inverse: bool) {
        assert_eq!(buf.len(), self.len, "FFT buffer length mismatch");
        match &self.kind {
            Kind::Radix2(r) => r.process(buf, inverse),
            Kind::Bluestein {
                inner,
                chirp,
                kernel,
            } => {
                // the inverse is the forward transform of the conjugated input, conjugated
                let mut work = vec![Complex64::new(0.0, 0.0); inner.len];
                for (t, (w, &x)) in work.iter_mut().zip(buf.iter()).enumerate() {
                    let x = if inverse { x.conj() } else { x };
                    *w = x * chirp[t];
                }
                inner.process(&mut work, false);
                for (w, k) in work.iter_mut().zip(kernel.iter()) {
                    *w *= k;
                }
                inner.process(&mut work, true);
                let scale = 1.0 / inner.len as f64;
                for (t, out) in buf.iter_mut().enumerate() {
                    let v = work[t] * chirp[t] * scale;
                    *out = if inverse { v.conj() } else { v };
                }
            }
        }
    }
}

/// Forward transform of a real sequence.
pub fn fft_real(plan: &FftPlan, x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    buf
}

/// Largest absolute imaginary part in a buffer.
pub(crate) fn max_imag(buf: &[Complex64]) -> f64 {
    buf.iter().fold(0.0, |acc, v| acc.max(v.im.abs()))
}
