//! Label lattices and flow maps.
//!
//! A [`FlowMap`] stores, for every node of a regular label lattice, the
//! current position `x(ξ)`, the momentum density `p(ξ) = m ρ0 ẋ` and the
//! reference number density `ρ0(ξ)`. Positions are always three-component;
//! the deformation matrix `A = ∂x/∂ξ` uses the leading `dim` components.
//!
//! Periodic lattices place nodes at `lo + i h` with `h = L / n`. Wall
//! lattices are cell-centred: nodes sit at `lo + (i + 1/2) h`, so that
//! `Σ ρ0 ΔV` is the midpoint rule over `[lo, hi]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{sub, Mat, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    FixedWall,
}

/// Finite-difference order used for `A = ∂x/∂ξ` on the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilOrder {
    Second,
    Fourth,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelLattice {
    pub dim: usize,
    pub lo: Vec3,
    pub hi: Vec3,
    pub shape: [usize; 3],
    pub boundary: Boundary,
    pub order: StencilOrder,
}

/// One tap of a derivative stencil along an axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tap {
    /// Node index along the axis, already wrapped.
    pub j: usize,
    /// Coefficient, already divided by the spacing.
    pub c: f64,
    /// Number of periods crossed when wrapping (periodic lattices only).
    pub wrap: i32,
}

#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub taps: [Tap; 5],
    pub len: usize,
}

impl Stencil {
    pub fn iter(&self) -> impl Iterator<Item = &Tap> {
        self.taps[..self.len].iter()
    }
}

/// Interpolation weights along one axis.
#[derive(Clone, Copy, Debug)]
pub struct AxisWeights {
    pub nodes: [usize; 4],
    pub wraps: [i32; 4],
    pub w: [f64; 4],
    pub dw: [f64; 4],
    pub len: usize,
}

impl AxisWeights {
    fn unit() -> Self {
        AxisWeights { nodes: [0; 4], wraps: [0; 4], w: [1.0, 0.0, 0.0, 0.0], dw: [0.0; 4], len: 1 }
    }
}

impl LabelLattice {
    pub fn new(
        dim: usize,
        lo: Vec3,
        hi: Vec3,
        shape: [usize; 3],
        boundary: Boundary,
    ) -> Result<Self> {
        let lat = LabelLattice { dim, lo, hi, shape, boundary, order: StencilOrder::Second };
        lat.validate()?;
        Ok(lat)
    }

    pub fn with_order(mut self, order: StencilOrder) -> Self {
        self.order = order;
        self
    }

    /// Cubic lattice `[lo, hi]^dim` with `n` nodes per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize, boundary: Boundary) -> Result<Self> {
        let mut shape = [1; 3];
        let mut l = [0.0; 3];
        let mut h = [1.0; 3];
        for a in 0..dim.min(3) {
            shape[a] = n;
            l[a] = lo;
            h[a] = hi;
        }
        Self::new(dim, l, h, shape, boundary)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Construction(String::from("lattice dimension must be 1, 2 or 3")));
        }
        for a in 0..3 {
            if a < self.dim {
                let min = match self.boundary {
                    Boundary::Periodic => 3,
                    Boundary::FixedWall => 2,
                };
                if self.shape[a] < min {
                    return Err(Error::Construction(String::from(
                        "lattice needs at least 3 nodes per periodic axis and 2 per wall axis",
                    )));
                }
                if !(self.hi[a] > self.lo[a]) || !self.hi[a].is_finite() || !self.lo[a].is_finite() {
                    return Err(Error::Construction(String::from("lattice extent must be positive")));
                }
            } else if self.shape[a] != 1 {
                return Err(Error::Construction(String::from("unused lattice axes must have shape 1")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
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
            h[a] = (self.hi[a] - self.lo[a]) / self.shape[a] as f64;
        }
        h
    }

    /// Label-space volume carried by one node.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[..self.dim].iter().product()
    }

    fn offset(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => 0.0,
            Boundary::FixedWall => 0.5,
        }
    }

    pub fn label(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        let h = self.spacing();
        let mut xi = [0.0; 3];
        for a in 0..self.dim {
            xi[a] = self.lo[a] + (c[a] as f64 + self.offset()) * h[a];
        }
        xi
    }

    pub fn labels(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    /// True when the node has a full centred stencil on every axis.
    pub fn is_interior(&self, idx: usize) -> bool {
        if self.boundary == Boundary::Periodic {
            return true;
        }
        let c = self.coords(idx);
        (0..self.dim).all(|a| c[a] > 0 && c[a] + 1 < self.shape[a])
    }

    /// First-derivative stencil along `axis` at node coordinate `i`.
    pub fn stencil(&self, axis: usize, i: usize) -> Stencil {
        let n = self.shape[axis];
        let h = self.spacing()[axis];
        let zero = Tap { j: 0, c: 0.0, wrap: 0 };
        let mut s = Stencil { taps: [zero; 5], len: 0 };
        let push = |off: isize, c: f64, s: &mut Stencil| {
            let k = i as isize + off;
            let (j, wrap) = match self.boundary {
                Boundary::Periodic => {
                    let w = k.div_euclid(n as isize);
                    (k.rem_euclid(n as isize) as usize, w as i32)
                }
                Boundary::FixedWall => (k as usize, 0),
            };
            s.taps[s.len] = Tap { j, c: c / h, wrap };
            s.len += 1;
        };
        let fourth = self.order == StencilOrder::Fourth && n >= 5;
        match self.boundary {
            Boundary::Periodic => {
                if fourth {
                    for (off, c) in [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)] {
                        push(off, c, &mut s);
                    }
                } else {
                    push(-1, -0.5, &mut s);
                    push(1, 0.5, &mut s);
                }
            }
            Boundary::FixedWall => {
                if n == 2 {
                    push(-(i as isize), -1.0, &mut s);
                    push(1 - i as isize, 1.0, &mut s);
                } else if fourth {
                    const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
                    const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
                    if i == 0 {
                        for (k, c) in EDGE0.iter().enumerate() {
                            push(k as isize, c / 12.0, &mut s);
                        }
                    } else if i == 1 {
                        for (k, c) in EDGE1.iter().enumerate() {
                            push(k as isize - 1, c / 12.0, &mut s);
                        }
                    } else if i == n - 1 {
                        for (k, c) in EDGE0.iter().enumerate() {
                            push(-(k as isize), -c / 12.0, &mut s);
                        }
                    } else if i == n - 2 {
                        for (k, c) in EDGE1.iter().enumerate() {
                            push(1 - k as isize, -c / 12.0, &mut s);
                        }
                    } else {
                        for (off, c) in [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)] {
                            push(off, c, &mut s);
                        }
                    }
                } else if i == 0 {
                    push(0, -1.5, &mut s);
                    push(1, 2.0, &mut s);
                    push(2, -0.5, &mut s);
                } else if i == n - 1 {
                    push(0, 1.5, &mut s);
                    push(-1, -2.0, &mut s);
                    push(-2, 0.5, &mut s);
                } else {
                    push(-1, -0.5, &mut s);
                    push(1, 0.5, &mut s);
                }
            }
        }
        s
    }

    /// Node index reached from `idx` by replacing the coordinate on `axis`.
    #[inline]
    pub fn along(&self, idx: usize, axis: usize, j: usize) -> usize {
        let mut c = self.coords(idx);
        c[axis] = j;
        self.index(c)
    }

    /// Neighbour `idx + step e_axis` with its wrap count, or `None` past a wall.
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<(usize, i32)> {
        let c = self.coords(idx);
        let n = self.shape[axis] as isize;
        let k = c[axis] as isize + step;
        match self.boundary {
            Boundary::Periodic => Some((self.along(idx, axis, k.rem_euclid(n) as usize), k.div_euclid(n) as i32)),
            Boundary::FixedWall => {
                if k < 0 || k >= n {
                    None
                } else {
                    Some((self.along(idx, axis, k as usize), 0))
                }
            }
        }
    }

    /// Lagrange interpolation weights at label `xi`. Periodic axes accept any
    /// real label; wall axes require `lo <= xi <= hi` up to a small slack.
    pub fn weights(&self, xi: Vec3) -> Result<[AxisWeights; 3]> {
        let mut out = [AxisWeights::unit(); 3];
        let h = self.spacing();
        for a in 0..self.dim {
            let n = self.shape[a];
            let t = (xi[a] - self.lo[a]) / h[a] - self.offset();
            if !t.is_finite() {
                return Err(Error::NonFinite(String::from("interpolation label")));
            }
            let (base, q) = match self.boundary {
                Boundary::Periodic => (t.floor() as isize - 1, 4usize),
                Boundary::FixedWall => {
                    let slack = 1e-9;
                    if t < -0.5 - slack || t > n as f64 - 0.5 + slack {
                        return Err(Error::OutOfDomain);
                    }
                    let q = n.min(4);
                    let b = (t.floor() as isize - 1).clamp(0, (n - q) as isize);
                    (b, q)
                }
            };
            let s = t - base as f64;
            let aw = &mut out[a];
            aw.len = q;
            for k in 0..q {
                let node = base + k as isize;
                match self.boundary {
                    Boundary::Periodic => {
                        aw.nodes[k] = node.rem_euclid(n as isize) as usize;
                        aw.wraps[k] = node.div_euclid(n as isize) as i32;
                    }
                    Boundary::FixedWall => {
                        aw.nodes[k] = node as usize;
                        aw.wraps[k] = 0;
                    }
                }
                let mut w = 1.0;
                let mut dw = 0.0;
                for b in 0..q {
                    if b == k {
                        continue;
                    }
                    let den = k as f64 - b as f64;
                    let mut term = 1.0 / den;
                    for c in 0..q {
                        if c != k && c != b {
                            term *= (s - c as f64) / (k as f64 - c as f64);
                        }
                    }
                    dw += term;
                    w *= (s - b as f64) / den;
                }
                aw.w[k] = w;
                aw.dw[k] = dw / h[a];
            }
        }
        Ok(out)
    }
}

/// Reference density, positions and momenta on a label lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    pub lattice: LabelLattice,
    pub rho0: Vec<f64>,
    pub x: Vec<Vec3>,
    pub p: Vec<Vec3>,
    /// Particle mass `m`.
    pub mass: f64,
    pub time: f64,
}

/// Builds a flow map from label-space initial data, with `p = m ρ0 v0`.
pub fn build_lattice(
    lattice: LabelLattice,
    rho0: impl Fn(Vec3) -> f64,
    x0: impl Fn(Vec3) -> Vec3,
    v0: impl Fn(Vec3) -> Vec3,
    mass: f64,
) -> Result<FlowMap> {
    lattice.validate()?;
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::Construction(String::from("mass must be positive")));
    }
    let n = lattice.len();
    let mut r = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    for i in 0..n {
        let xi = lattice.label(i);
        let d = rho0(xi);
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Construction(String::from("reference density must be positive and finite")));
        }
        let xx = x0(xi);
        let vv = v0(xi);
        if xx.iter().chain(vv.iter()).any(|c| !c.is_finite()) {
            return Err(Error::Construction(String::from("initial position or velocity is not finite")));
        }
        r.push(d);
        x.push(xx);
        p.push([mass * d * vv[0], mass * d * vv[1], mass * d * vv[2]]);
    }
    let map = FlowMap { lattice, rho0: r, x, p, mass, time: 0.0 };
    for i in 0..n {
        let det = map.deformation(i).det();
        if !(det > 0.0) {
            return Err(Error::Construction(alloc::format!(
                "initial map is not orientation preserving: det A = {det:e} at node {i}"
            )));
        }
    }
    Ok(map)
}

impl FlowMap {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Velocity `p / (m ρ0)` at node `i`.
    #[inline]
    pub fn velocity(&self, i: usize) -> Vec3 {
        let s = 1.0 / (self.mass * self.rho0[i]);
        [self.p[i][0] * s, self.p[i][1] * s, self.p[i][2] * s]
    }

    /// Position of node `i` shifted by `wrap` periods along `axis`.
    #[inline]
    pub fn unwrapped(&self, i: usize, axis: usize, wrap: i32) -> Vec3 {
        let mut x = self.x[i];
        if wrap != 0 {
            x[axis] += wrap as f64 * (self.lattice.hi[axis] - self.lattice.lo[axis]);
        }
        x
    }

    /// Deformation matrix `A^j_k = ∂x_j/∂ξ_k` at node `i` (row `j`, column `k`).
    pub fn deformation(&self, i: usize) -> Mat {
        let lat = &self.lattice;
        let c = lat.coords(i);
        let mut a = Mat::zeros(lat.dim);
        for k in 0..lat.dim {
            let st = lat.stencil(k, c[k]);
            for t in st.iter() {
                let n = lat.along(i, k, t.j);
                let x = self.unwrapped(n, k, t.wrap);
                for j in 0..lat.dim {
                    a.m[j][k] += t.c * x[j];
                }
            }
        }
        a
    }

    pub fn deformation_matrix(&self) -> Vec<Mat> {
        (0..self.len()).map(|i| self.deformation(i)).collect()
    }

    /// Eulerian density `ρ0 / det A` at every node.
    pub fn jacobian_density(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let d = self.deformation(i).det();
            if !(d > 0.0) {
                return Err(Error::Folding { node: i, det: d });
            }
            out.push(self.rho0[i] / d);
        }
        Ok(out)
    }

    /// Verifies `det A > 0` at every interior node.
    pub fn check_orientation(&self) -> Result<()> {
        for i in 0..self.len() {
            if !self.lattice.is_interior(i) {
                continue;
            }
            let d = self.deformation(i).det();
            if !(d > 0.0) {
                return Err(Error::Folding { node: i, det: d });
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.rho0.iter().sum::<f64>() * self.lattice.cell_volume()
    }

    pub fn total_momentum(&self) -> Vec3 {
        let dv = self.lattice.cell_volume();
        let mut s = [0.0; 3];
        for p in &self.p {
            for a in 0..3 {
                s[a] += p[a] * dv;
            }
        }
        s
    }

    fn interp_vec(&self, w: &[AxisWeights; 3], field: impl Fn(usize) -> Vec3) -> Vec3 {
        let lat = &self.lattice;
        let mut out = [0.0; 3];
        for k2 in 0..w[2].len {
            for k1 in 0..w[1].len {
                let c12 = w[1].w[k1] * w[2].w[k2];
                for k0 in 0..w[0].len {
                    let c = w[0].w[k0] * c12;
                    let idx = lat.index([w[0].nodes[k0], w[1].nodes[k1], w[2].nodes[k2]]);
                    let f = field(idx);
                    for a in 0..3 {
                        out[a] += c * f[a];
                    }
                }
            }
        }
        out
    }

    /// Interpolated position at an arbitrary label, together with `A` there.
    pub fn position_at(&self, xi: Vec3) -> Result<(Vec3, Mat)> {
        let lat = &self.lattice;
        let w = lat.weights(xi)?;
        let dim = lat.dim;
        let periodic = lat.boundary == Boundary::Periodic;
        let mut x = [0.0; 3];
        let mut a = Mat::zeros(dim);
        for k2 in 0..w[2].len {
            for k1 in 0..w[1].len {
                for k0 in 0..w[0].len {
                    let ks = [k0, k1, k2];
                    let idx = lat.index([w[0].nodes[k0], w[1].nodes[k1], w[2].nodes[k2]]);
                    // displacement from the label is periodic, the position is not
                    let mut val = self.x[idx];
                    if periodic {
                        let lab = lat.label(idx);
                        val = sub(val, lab);
                    }
                    let mut wt = 1.0;
                    for ax in 0..3 {
                        wt *= w[ax].w[ks[ax]];
                    }
                    for c in 0..3 {
                        x[c] += wt * val[c];
                    }
                    for d in 0..dim {
                        let mut g = 1.0;
                        for ax in 0..3 {
                            g *= if ax == d { w[ax].dw[ks[ax]] } else { w[ax].w[ks[ax]] };
                        }
                        for c in 0..dim {
                            a.m[c][d] += g * val[c];
                        }
                    }
                }
            }
        }
        if periodic {
            for c in 0..dim {
                x[c] += xi[c];
                a.m[c][c] += 1.0;
            }
        }
        Ok((x, a))
    }

    /// Interpolated velocity `p/(m ρ0)` at an arbitrary label.
    pub fn velocity_at(&self, xi: Vec3) -> Result<Vec3> {
        let w = self.lattice.weights(xi)?;
        Ok(self.interp_vec(&w, |i| self.velocity(i)))
    }

    /// Interpolated reference density at an arbitrary label.
    pub fn rho0_at(&self, xi: Vec3) -> Result<f64> {
        let w = self.lattice.weights(xi)?;
        Ok(self.interp_vec(&w, |i| [self.rho0[i], 0.0, 0.0])[0])
    }

    /// Builds a reusable inverter `x ↦ ξ(x)` for the current positions.
    pub fn inverter(&self) -> Inverter<'_> {
        Inverter::new(self)
    }
}

/// Newton inversion of the interpolated forward map, seeded from a spatial
/// hash of the lattice node positions.
pub struct Inverter<'a> {
    map: &'a FlowMap,
    lo: Vec3,
    cell: Vec3,
    nb: [usize; 3],
    start: Vec<usize>,
    items: Vec<usize>,
    periodic: bool,
}

pub const INVERSE_TOL: f64 = 1e-10;
pub const INVERSE_MAX_ITER: usize = 50;

impl<'a> Inverter<'a> {
    fn new(map: &'a FlowMap) -> Self {
        let lat = &map.lattice;
        let dim = lat.dim;
        let periodic = lat.boundary == Boundary::Periodic;
        let n = map.len();
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        if periodic {
            lo = lat.lo;
            hi = lat.hi;
        } else {
            for a in 0..dim {
                lo[a] = f64::INFINITY;
                hi[a] = f64::NEG_INFINITY;
            }
            for x in &map.x {
                for a in 0..dim {
                    lo[a] = lo[a].min(x[a]);
                    hi[a] = hi[a].max(x[a]);
                }
            }
        }
        // bucket edge ~ largest neighbour distance keeps the 3^dim search local
        let mut reach: f64 = 0.0;
        for i in 0..n {
            for a in 0..dim {
                if let Some((j, w)) = lat.neighbor(i, a, 1) {
                    let d = sub(map.unwrapped(j, a, w), map.x[i]);
                    reach = reach.max(crate::linalg::norm(d));
                }
            }
        }
        let budget = (n.max(1) as f64).powf(1.0 / dim as f64).ceil() as usize * 2;
        let mut nb = [1usize; 3];
        let mut cell = [1.0; 3];
        for a in 0..dim {
            let ext = (hi[a] - lo[a]).max(1e-300);
            let want = if reach > 0.0 { (ext / reach).floor() as usize } else { 1 };
            nb[a] = want.clamp(1, budget.max(1));
            cell[a] = ext / nb[a] as f64;
            if !periodic {
                // closed upper edge lands in the last bucket
                cell[a] *= 1.0 + 1e-12;
            }
        }
        let total = nb[0] * nb[1] * nb[2];
        let mut count = vec![0usize; total + 1];
        let mut keys = Vec::with_capacity(n);
        let mut inv = Inverter { map, lo, cell, nb, start: Vec::new(), items: Vec::new(), periodic };
        for x in &map.x {
            let k = inv.bucket_of(*x);
            keys.push(k);
            count[k + 1] += 1;
        }
        for b in 0..total {
            count[b + 1] += count[b];
        }
        let mut fill = count.clone();
        let mut items = vec![0usize; n];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k]] = i;
            fill[k] += 1;
        }
        inv.start = count;
        inv.items = items;
        inv
    }

    fn bucket_coords(&self, x: Vec3) -> [isize; 3] {
        let mut c = [0isize; 3];
        for a in 0..self.map.lattice.dim {
            let mut t = (x[a] - self.lo[a]) / self.cell[a];
            if self.periodic {
                t = t.rem_euclid(self.nb[a] as f64);
            }
            c[a] = (t.floor() as isize).clamp(0, self.nb[a] as isize - 1);
        }
        c
    }

    fn bucket_of(&self, x: Vec3) -> usize {
        let c = self.bucket_coords(x);
        c[0] as usize + self.nb[0] * (c[1] as usize + self.nb[1] * c[2] as usize)
    }

    fn wrapped_diff(&self, mut d: Vec3) -> Vec3 {
        if self.periodic {
            let e = self.map.lattice.extent();
            for a in 0..self.map.lattice.dim {
                d[a] -= e[a] * (d[a] / e[a]).round();
            }
        }
        d
    }

    /// Lattice node whose position is nearest to `x`.
    pub fn nearest_node(&self, x: Vec3) -> usize {
        let dim = self.map.lattice.dim;
        let c = self.bucket_coords(x);
        let mut best = (f64::INFINITY, 0usize);
        let maxr = *self.nb.iter().max().unwrap() as isize;
        let mut r = 1isize;
        loop {
            let mut lo = [0isize; 3];
            let mut hi = [0isize; 3];
            for a in 0..dim {
                lo[a] = c[a] - r;
                hi[a] = c[a] + r;
            }
            for b2 in lo[2]..=hi[2] {
                for b1 in lo[1]..=hi[1] {
                    for b0 in lo[0]..=hi[0] {
                        let mut bc = [b0, b1, b2];
                        let mut ok = true;
                        for a in 0..3 {
                            let n = self.nb[a] as isize;
                            if self.periodic {
                                bc[a] = bc[a].rem_euclid(n);
                            } else if bc[a] < 0 || bc[a] >= n {
                                ok = false;
                            }
                        }
                        if !ok {
                            continue;
                        }
                        let k = bc[0] as usize + self.nb[0] * (bc[1] as usize + self.nb[1] * bc[2] as usize);
                        for &i in &self.items[self.start[k]..self.start[k + 1]] {
                            let d = crate::linalg::norm(self.wrapped_diff(sub(self.map.x[i], x)));
                            if d < best.0 {
                                best = (d, i);
                            }
                        }
                    }
                }
            }
            if best.0.is_finite() || r > maxr {
                return best.1;
            }
            r += 1;
        }
    }

    /// Label `ξ` with `x(ξ) = x`, starting Newton from the nearest node.
    pub fn invert(&self, x: Vec3) -> Result<Vec3> {
        let seed = self.map.lattice.label(self.nearest_node(x));
        self.invert_from(x, seed)
    }

    /// Newton iteration from an explicit starting label.
    pub fn invert_from(&self, x: Vec3, seed: Vec3) -> Result<Vec3> {
        let lat = &self.map.lattice;
        let dim = lat.dim;
        let mut xi = seed;
        let mut res = f64::INFINITY;
        for _ in 0..INVERSE_MAX_ITER {
            let (fx, a) = match self.map.position_at(xi) {
                Ok(v) => v,
                Err(Error::OutOfDomain) => {
                    // one clamp back inside before giving up
                    let mut c = xi;
                    for k in 0..dim {
                        c[k] = c[k].clamp(lat.lo[k], lat.hi[k]);
                    }
                    if c == xi {
                        return Err(Error::OutOfDomain);
                    }
                    xi = c;
                    self.map.position_at(xi)?
                }
                Err(e) => return Err(e),
            };
            let r = self.wrapped_diff(sub(fx, x));
            res = r[..dim].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if res < INVERSE_TOL {
                if self.periodic {
                    let e = lat.extent();
                    for k in 0..dim {
                        xi[k] = lat.lo[k] + (xi[k] - lat.lo[k]).rem_euclid(e[k]);
                    }
                }
                return Ok(xi);
            }
            let inv = a.inverse().ok_or(Error::Folding { node: usize::MAX, det: a.det() })?;
            let step = inv.mul_vec(r);
            for k in 0..dim {
                xi[k] -= step[k];
            }
            if !self.periodic {
                let h = lat.spacing();
                for k in 0..dim {
                    if xi[k] < lat.lo[k] - 2.0 * h[k] || xi[k] > lat.hi[k] + 2.0 * h[k] {
                        return Err(Error::OutOfDomain);
                    }
                }
            }
        }
        Err(Error::Inverse { iterations: INVERSE_MAX_ITER, residual: res })
    }
}

/// Convenience wrapper: `ξ(x)` for a single point.
pub fn inverse_map(map: &FlowMap, x: Vec3) -> Result<Vec3> {
    map.inverter().invert(x)
}
