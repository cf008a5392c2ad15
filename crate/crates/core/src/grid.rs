//! Eulerian grids and node-centred fields.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{shape, Error, Result};
use crate::linalg::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridBoundary {
    Periodic,
    Clamped,
}

/// Regular node grid. Periodic grids have `h = L/n` with nodes at
/// `lo + i h`; clamped grids include both end points, `h = L/(n-1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub dim: usize,
    pub lo: Vec3,
    pub hi: Vec3,
    pub shape: [usize; 3],
    pub boundary: GridBoundary,
}

impl GridGeometry {
    pub fn new(dim: usize, lo: Vec3, hi: Vec3, shape: [usize; 3], boundary: GridBoundary) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Parameter(String::from("grid dimension must be 1, 2 or 3")));
        }
        for a in 0..3 {
            if a < dim {
                if shape[a] < 2 || !(hi[a] > lo[a]) {
                    return Err(Error::Parameter(String::from("grid needs >= 2 nodes and positive extent per axis")));
                }
            } else if shape[a] != 1 {
                return Err(Error::Parameter(String::from("unused grid axes must have shape 1")));
            }
        }
        Ok(GridGeometry { dim, lo, hi, shape, boundary })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize, boundary: GridBoundary) -> Result<Self> {
        let mut s = [1; 3];
        let mut l = [0.0; 3];
        let mut h = [1.0; 3];
        for a in 0..dim.min(3) {
            s[a] = n;
            l[a] = lo;
            h[a] = hi;
        }
        Self::new(dim, l, h, s, boundary)
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> Vec3 {
        let mut e = [0.0; 3];
        for a in 0..self.dim {
            e[a] = self.hi[a] - self.lo[a];
        }
        e
    }

    pub fn spacing(&self) -> Vec3 {
        let mut h = [1.0; 3];
        for a in 0..self.dim {
            let cells = match self.boundary {
                GridBoundary::Periodic => self.shape[a],
                GridBoundary::Clamped => self.shape[a] - 1,
            };
            h[a] = (self.hi[a] - self.lo[a]) / cells as f64;
        }
        h
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing()[..self.dim].iter().product()
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        i[0] + self.shape[0] * (i[1] + self.shape[1] * i[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i0 = idx % self.shape[0];
        let r = idx / self.shape[0];
        [i0, r % self.shape[1], r / self.shape[1]]
    }

    pub fn node(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.lo[a] + c[a] as f64 * h[a];
        }
        x
    }

    /// True when centred differences are available on every axis.
    pub fn is_interior(&self, idx: usize) -> bool {
        if self.boundary == GridBoundary::Periodic {
            return true;
        }
        let c = self.coords(idx);
        (0..self.dim).all(|a| c[a] > 0 && c[a] + 1 < self.shape[a])
    }

    /// Neighbour `idx ± e_axis`, or `None` past a clamped edge.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        let mut c = self.coords(idx);
        let n = self.shape[axis] as isize;
        let k = c[axis] as isize + step;
        let k = match self.boundary {
            GridBoundary::Periodic => k.rem_euclid(n),
            GridBoundary::Clamped => {
                if k < 0 || k >= n {
                    return None;
                }
                k
            }
        };
        c[axis] = k as usize;
        Some(self.index(c))
    }

    pub fn same_as(&self, other: &GridGeometry) -> Result<()> {
        if self != other {
            return shape("fields live on different grids");
        }
        Ok(())
    }
}

/// Node-centred field with `ncomp` components per node and an optional
/// validity mask (false marks nodes where the value is undefined).
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub geometry: GridGeometry,
    pub ncomp: usize,
    pub data: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

impl GridField {
    pub fn zeros(geometry: GridGeometry, ncomp: usize) -> Self {
        GridField { geometry, ncomp, data: vec![0.0; geometry.len() * ncomp], mask: None }
    }

    pub fn from_fn(geometry: GridGeometry, ncomp: usize, f: impl Fn(Vec3) -> Vec3) -> Self {
        let mut g = Self::zeros(geometry, ncomp);
        for i in 0..geometry.len() {
            let v = f(geometry.node(i));
            for c in 0..ncomp {
                g.data[i * ncomp + c] = v[c];
            }
        }
        g
    }

    pub fn scalar_fn(geometry: GridGeometry, f: impl Fn(Vec3) -> f64) -> Self {
        Self::from_fn(geometry, 1, |x| [f(x), 0.0, 0.0])
    }

    #[inline]
    pub fn get(&self, idx: usize, c: usize) -> f64 {
        self.data[idx * self.ncomp + c]
    }

    #[inline]
    pub fn vec(&self, idx: usize) -> Vec3 {
        let mut v = [0.0; 3];
        for c in 0..self.ncomp.min(3) {
            v[c] = self.data[idx * self.ncomp + c];
        }
        v
    }

    #[inline]
    pub fn valid(&self, idx: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[idx])
    }

    /// Centred first derivative of component `c` along `axis`; `None` on
    /// clamped edges or next to masked nodes.
    #[inline]
    pub fn diff(&self, idx: usize, c: usize, axis: usize) -> Option<f64> {
        let g = &self.geometry;
        let a = g.neighbor(idx, axis, -1)?;
        let b = g.neighbor(idx, axis, 1)?;
        if !self.valid(a) || !self.valid(b) {
            return None;
        }
        Some((self.get(b, c) - self.get(a, c)) / (2.0 * g.spacing()[axis]))
    }

    /// `Σ f ΔV` of one component over valid nodes.
    pub fn integral(&self, c: usize) -> f64 {
        let dv = self.geometry.cell_volume();
        (0..self.geometry.len()).filter(|&i| self.valid(i)).map(|i| self.get(i, c)).sum::<f64>() * dv
    }

    pub fn mean(&self, c: usize) -> f64 {
        let n = self.geometry.len();
        (0..n).map(|i| self.get(i, c)).sum::<f64>() / n as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Field norm of a residual, restricted to the nodes where it was evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub field: GridField,
    /// `sqrt(Σ r² ΔV)` over evaluated nodes.
    pub l2: f64,
    pub max: f64,
    pub evaluated: usize,
}

impl Residual {
    pub(crate) fn from_field(field: GridField) -> Self {
        let dv = field.geometry.cell_volume();
        let mut s = 0.0;
        let mut mx: f64 = 0.0;
        let mut count = 0;
        for i in 0..field.geometry.len() {
            if !field.valid(i) {
                continue;
            }
            count += 1;
            for c in 0..field.ncomp {
                let r = field.get(i, c);
                s += r * r;
                mx = mx.max(r.abs());
            }
        }
        Residual { l2: (s * dv).sqrt(), max: mx, evaluated: count, field }
    }
}
