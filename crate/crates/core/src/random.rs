//! Seeded smooth random fields: truncated Fourier series with decaying
//! amplitudes, periodic on a box.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Vec3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothField {
    pub lo: Vec3,
    pub extent: Vec3,
    /// `(integer wavevector, cos coefficient, sin coefficient)`
    pub modes: Vec<([i32; 3], f64, f64)>,
}

impl SmoothField {
    /// All modes with `|n_a| <= kmax` on the first `dim` axes (zero mode
    /// excluded); coefficients uniform in `[-amp, amp] / (1 + |n|²)`.
    pub fn random(rng: &mut impl Rng, dim: usize, lo: Vec3, extent: Vec3, kmax: i32, amp: f64) -> Self {
        let mut modes = Vec::new();
        let r = |a: usize| if a < dim { -kmax..=kmax } else { 0..=0 };
        for n2 in r(2) {
            for n1 in r(1) {
                for n0 in r(0) {
                    if n0 == 0 && n1 == 0 && n2 == 0 {
                        continue;
                    }
                    let w = 1.0 / (1.0 + (n0 * n0 + n1 * n1 + n2 * n2) as f64);
                    let c = amp * w * (2.0 * rng.gen::<f64>() - 1.0);
                    let s = amp * w * (2.0 * rng.gen::<f64>() - 1.0);
                    modes.push(([n0, n1, n2], c, s));
                }
            }
        }
        SmoothField { lo, extent, modes }
    }

    fn phase(&self, n: [i32; 3], x: Vec3) -> (f64, Vec3) {
        let mut ph = 0.0;
        let mut k = [0.0; 3];
        for a in 0..3 {
            if self.extent[a] > 0.0 {
                k[a] = 2.0 * core::f64::consts::PI * n[a] as f64 / self.extent[a];
                ph += k[a] * (x[a] - self.lo[a]);
            }
        }
        (ph, k)
    }

    /// Upper bound on `|value|`.
    pub fn bound(&self) -> f64 {
        self.modes.iter().map(|(_, c, s)| c.abs() + s.abs()).sum()
    }

    pub fn value(&self, x: Vec3) -> f64 {
        self.modes
            .iter()
            .map(|(n, c, s)| {
                let (ph, _) = self.phase(*n, x);
                c * ph.cos() + s * ph.sin()
            })
            .sum()
    }

    pub fn gradient(&self, x: Vec3) -> Vec3 {
        let mut g = [0.0; 3];
        for (n, c, s) in &self.modes {
            let (ph, k) = self.phase(*n, x);
            let d = -c * ph.sin() + s * ph.cos();
            for a in 0..3 {
                g[a] += k[a] * d;
            }
        }
        g
    }
}
