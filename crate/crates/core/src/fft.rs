//! In-place radix-2 complex FFT and its n-dimensional extension over
//! [`GridGeometry`] node ordering.

use alloc::string::String;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Forward transform uses `e^{-2πi jk/n}`; the inverse is unnormalised.
pub fn fft(data: &mut [Complex64], inverse: bool) -> Result<()> {
    let n = data.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Parameter(String::from("FFT length must be a power of two")));
    }
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * core::f64::consts::PI / len as f64;
        let wl = Complex64::new(ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = data[start + k];
                let b = data[start + k + len / 2] * w;
                data[start + k] = a + b;
                data[start + k + len / 2] = a - b;
                w *= wl;
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// Transforms along every axis of an array laid out with axis 0 fastest.
pub fn fft_nd(data: &mut [Complex64], shape: [usize; 3], inverse: bool) -> Result<()> {
    let mut line = Vec::new();
    for axis in 0..3 {
        let n = shape[axis];
        if n == 1 {
            continue;
        }
        let stride: usize = shape[..axis].iter().product();
        let outer = data.len() / n;
        for o in 0..outer {
            let lo = o % stride;
            let hi = o / stride;
            let base = lo + hi * stride * n;
            line.clear();
            line.extend((0..n).map(|k| data[base + k * stride]));
            fft(&mut line, inverse)?;
            for k in 0..n {
                data[base + k * stride] = line[k];
            }
        }
    }
    Ok(())
}

/// Signed wavenumber index of FFT bin `k` out of `n`.
#[inline]
pub fn freq(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}
