//! Fixed-size vectors and matrices. Vectors always carry three components;
//! lower-dimensional problems leave the trailing components at zero.
#[allow(unused_imports)]
use num_traits::Float;


pub type Vec3 = [f64; 3];

pub const ZERO: Vec3 = [0.0; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn axpy(s: f64, a: Vec3, b: Vec3) -> Vec3 {
    [s * a[0] + b[0], s * a[1] + b[1], s * a[2] + b[2]]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Square matrix of size `dim` (1..=3) stored in the top-left block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    pub dim: usize,
    pub m: [[f64; 3]; 3],
}

impl Mat {
    pub fn zeros(dim: usize) -> Self {
        Mat { dim, m: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = Self::zeros(dim);
        for i in 0..dim {
            a.m[i][i] = 1.0;
        }
        a
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        match self.dim {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    }

    /// Transposed cofactor matrix, so that `adjugate = det * inverse`.
    pub fn adjugate(&self) -> Mat {
        let m = &self.m;
        let mut r = Mat::zeros(self.dim);
        match self.dim {
            1 => r.m[0][0] = 1.0,
            2 => {
                r.m[0][0] = m[1][1];
                r.m[0][1] = -m[0][1];
                r.m[1][0] = -m[1][0];
                r.m[1][1] = m[0][0];
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (i1, i2) = ((j + 1) % 3, (j + 2) % 3);
                        let (j1, j2) = ((i + 1) % 3, (i + 2) % 3);
                        r.m[i][j] = m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1];
                    }
                }
            }
        }
        r
    }

    pub fn inverse(&self) -> Option<Mat> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let mut r = self.adjugate();
        for i in 0..self.dim {
            for j in 0..self.dim {
                r.m[i][j] /= d;
            }
        }
        Some(r)
    }

    pub fn transpose(&self) -> Mat {
        let mut r = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                r.m[i][j] = self.m[j][i];
            }
        }
        r
    }

    pub fn mul(&self, b: &Mat) -> Mat {
        let mut r = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += self.m[i][k] * b.m[k][j];
                }
                r.m[i][j] = s;
            }
        }
        r
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let mut r = [0.0; 3];
        for i in 0..self.dim {
            for k in 0..self.dim {
                r[i] += self.m[i][k] * v[k];
            }
        }
        r
    }

    pub fn max_abs_diff(&self, b: &Mat) -> f64 {
        let mut e: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                e = e.max((self.m[i][j] - b.m[i][j]).abs());
            }
        }
        e
    }
}
