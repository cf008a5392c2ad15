//! Conserved quantities of the label-space dynamics.
//!
//! The label vorticity `R = curl_ξ J̃` is evaluated as the circulation of
//! `m u·dx` (trapezoidal, straight edges) around each elementary lattice
//! plaquette divided by its label area, where `u = p / (m ρ0)` and
//! `J̃_k = m u_m ∂x_m/∂ξ_k = J_k / ρ0`. Around any closed polygon of nodes,
//! `d/dt Σ ½(u_a + u_b)·(x_b - x_a) = Σ ½(|u_b|² - |u_a|²) = 0` under free
//! streaming, so plaquette values are conserved to round-off there.
//! Values live at plaquette centres (2D) or cell centres (3D, averaged over
//! the two opposite faces).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::deposition::{deposit_momentum, Kernel};
use crate::error::{Error, Result};
use crate::grid::{GridBoundary, GridField, GridGeometry};
use crate::lattice::{Boundary, FlowMap, StencilOrder};
use crate::linalg::{dot, sub, Mat, Vec3};

/// Closed loop of marker labels; the last marker connects to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialLoop {
    pub labels: Vec<Vec3>,
}

impl MaterialLoop {
    /// Circle of `n` markers in the label plane spanned by axes `a` and `b`.
    pub fn circle(center: Vec3, radius: f64, n: usize, a: usize, b: usize) -> Self {
        let labels = (0..n)
            .map(|k| {
                let t = 2.0 * core::f64::consts::PI * k as f64 / n as f64;
                let mut xi = center;
                xi[a] += radius * t.cos();
                xi[b] += radius * t.sin();
                xi
            })
            .collect();
        MaterialLoop { labels }
    }
}

/// Positions and velocities of the loop markers.
pub fn marker_states(map: &FlowMap, lp: &MaterialLoop) -> Result<Vec<(Vec3, Vec3)>> {
    lp.labels
        .iter()
        .map(|xi| Ok((map.position_at(*xi)?.0, map.velocity_at(*xi)?)))
        .collect()
}

/// `T = ∮ v·dx` by the trapezoidal rule over straight marker segments.
pub fn circulation(map: &FlowMap, lp: &MaterialLoop) -> Result<f64> {
    if lp.labels.len() < 3 {
        return Err(Error::Parameter(String::from("a loop needs at least three markers")));
    }
    let st = marker_states(map, lp)?;
    Ok(polygon_circulation(&st))
}

pub(crate) fn polygon_circulation(st: &[(Vec3, Vec3)]) -> f64 {
    let n = st.len();
    let mut t = 0.0;
    for k in 0..n {
        let (xa, ua) = st[k];
        let (xb, ub) = st[(k + 1) % n];
        let u = [0.5 * (ua[0] + ub[0]), 0.5 * (ua[1] + ub[1]), 0.5 * (ua[2] + ub[2])];
        t += dot(u, sub(xb, xa));
    }
    t
}

/// `J_k = p_m ∂x_m/∂ξ_k` at every node.
pub fn lagrangian_current(map: &FlowMap) -> Vec<Vec3> {
    let dim = map.lattice.dim;
    (0..map.len())
        .map(|i| {
            let a = map.deformation(i);
            let mut j = [0.0; 3];
            for k in 0..dim {
                for m in 0..dim {
                    j[k] += map.p[i][m] * a.m[m][k];
                }
            }
            j
        })
        .collect()
}

/// Label vorticity on lattice cells.
#[derive(Clone, Debug, PartialEq)]
pub struct VorticityField {
    pub dim: usize,
    /// Cells per axis.
    pub shape: [usize; 3],
    /// Label of each cell centre.
    pub centers: Vec<Vec3>,
    /// `R`; in 2D only the third component is used.
    pub values: Vec<Vec3>,
    /// Label volume of one cell.
    pub cell_volume: f64,
}

fn edge(map: &FlowMap, i: usize, axis: usize) -> Option<f64> {
    let (j, w) = map.lattice.neighbor(i, axis, 1)?;
    let xj = map.unwrapped(j, axis, w);
    let ui = map.velocity(i);
    let uj = map.velocity(j);
    let d = sub(xj, map.x[i]);
    Some(0.5 * dot([ui[0] + uj[0], ui[1] + uj[1], ui[2] + uj[2]], d))
}

/// Circulation of `u·dx` around the plaquette with lower corner `i`, spanned
/// by `b` then `c` (counter-clockwise about `e_b × e_c`).
fn plaquette(map: &FlowMap, i: usize, b: usize, c: usize) -> Option<f64> {
    let lat = &map.lattice;
    let (ib, _) = lat.neighbor(i, b, 1)?;
    let (ic, _) = lat.neighbor(i, c, 1)?;
    Some(edge(map, i, b)? + edge(map, ib, c)? - edge(map, ic, b)? - edge(map, i, c)?)
}

pub fn vorticity(map: &FlowMap) -> Result<VorticityField> {
    let lat = &map.lattice;
    let dim = lat.dim;
    if dim < 2 {
        return Err(Error::Parameter(String::from("vorticity needs a 2D or 3D lattice")));
    }
    let mut shape = [1usize; 3];
    for a in 0..dim {
        shape[a] = match lat.boundary {
            Boundary::Periodic => lat.shape[a],
            Boundary::FixedWall => lat.shape[a] - 1,
        };
    }
    let h = lat.spacing();
    let m = map.mass;
    let count = shape[0] * shape[1] * shape[2];
    let mut centers = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for c2 in 0..shape[2] {
        for c1 in 0..shape[1] {
            for c0 in 0..shape[0] {
                let i = lat.index([c0, c1, c2]);
                let mut center = lat.label(i);
                for a in 0..dim {
                    center[a] += 0.5 * h[a];
                }
                centers.push(center);
                let mut r = [0.0; 3];
                if dim == 2 {
                    r[2] = m * plaquette(map, i, 0, 1).unwrap() / (h[0] * h[1]);
                } else {
                    for a in 0..3 {
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        let (up, _) = lat.neighbor(i, a, 1).unwrap();
                        let lo = plaquette(map, i, b, c).unwrap();
                        let hi = plaquette(map, up, b, c).unwrap();
                        r[a] = m * 0.5 * (lo + hi) / (h[b] * h[c]);
                    }
                }
                values.push(r);
            }
        }
    }
    Ok(VorticityField { dim, shape, centers, values, cell_volume: lat.cell_volume() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KIntegrals {
    /// `K_j = ∫ R_j d³ξ`
    pub first: Vec3,
    /// `K_jk = ∫ R_j R_k d³ξ`
    pub second: [[f64; 3]; 3],
}

pub fn k_integrals(map: &FlowMap) -> Result<KIntegrals> {
    if map.lattice.dim != 3 {
        return Err(Error::Parameter(String::from("K-integrals are defined on 3D lattices")));
    }
    let r = vorticity(map)?;
    let mut first = [0.0; 3];
    let mut second = [[0.0; 3]; 3];
    for v in &r.values {
        for j in 0..3 {
            first[j] += v[j] * r.cell_volume;
            for k in 0..3 {
                second[j][k] += v[j] * v[k] * r.cell_volume;
            }
        }
    }
    Ok(KIntegrals { first, second })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Casimir {
    /// `I_n = ∫ ρ^(1-n) ω^n d²x`
    pub value: f64,
    /// `∫ ρ^(1-n) |ω|^n d²x`, the scale against which drift is measured.
    pub magnitude: f64,
}

/// Two-dimensional Casimir `I_n` from Eulerian density and velocity.
pub fn casimir(rho: &GridField, v: &GridField, n: u32) -> Result<Casimir> {
    let g = rho.geometry;
    g.same_as(&v.geometry)?;
    if g.dim != 2 {
        return Err(Error::Parameter(String::from("Casimirs I_n are two-dimensional")));
    }
    if n == 0 {
        return Err(Error::Parameter(String::from("order must be at least 1")));
    }
    let floor = crate::deposition::VACUUM_FRACTION * rho.mean(0);
    let mut omega = vec![None; g.len()];
    let mut wmax: f64 = 0.0;
    for i in 0..g.len() {
        if !v.valid(i) {
            continue;
        }
        if let (Some(dyvx), Some(dxvy)) = (v.diff(i, 0, 1), v.diff(i, 1, 0)) {
            let w = dxvy - dyvx;
            wmax = wmax.max(w.abs());
            omega[i] = Some(w);
        }
    }
    let dv = g.cell_volume();
    let mut value = 0.0;
    let mut magnitude = 0.0;
    for i in 0..g.len() {
        let Some(w) = omega[i] else { continue };
        let r = rho.get(i, 0);
        if r <= floor {
            if n >= 2 && w.abs() > 1e-12 * wmax {
                return Err(Error::Vacuum(String::from("vacuum node inside the vorticity support")));
            }
            continue;
        }
        let pow = r.powi(1 - n as i32);
        value += pow * w.powi(n as i32) * dv;
        magnitude += pow * w.abs().powi(n as i32) * dv;
    }
    Ok(Casimir { value, magnitude })
}

/// `Q = ∫ v·(∇×v) d³x` with centred differences.
pub fn helicity(v: &GridField) -> Result<f64> {
    let g = v.geometry;
    if g.dim != 3 {
        return Err(Error::Parameter(String::from("helicity needs a 3D grid")));
    }
    let mut q = 0.0;
    for i in 0..g.len() {
        if !v.valid(i) {
            continue;
        }
        let d = |c, a| v.diff(i, c, a);
        let (Some(a), Some(b), Some(c), Some(dd), Some(e), Some(f)) =
            (d(2, 1), d(1, 2), d(0, 2), d(2, 0), d(1, 0), d(0, 1))
        else {
            continue;
        };
        let w = [a - b, c - dd, e - f];
        q += dot(v.vec(i), w);
    }
    Ok(q * g.cell_volume())
}

/// `∫ J̃·(curl_ξ J̃) d³ξ` with `J̃ = J / ρ0`; equals `m² ∫ v·(∇×v) d³x`.
pub fn helicity_lagrangian(map: &FlowMap) -> Result<f64> {
    let lat = &map.lattice;
    if lat.dim != 3 {
        return Err(Error::Parameter(String::from("helicity needs a 3D lattice")));
    }
    let jt: Vec<Vec3> = lagrangian_current(map)
        .into_iter()
        .zip(&map.rho0)
        .map(|(j, r)| [j[0] / r, j[1] / r, j[2] / r])
        .collect();
    let mut q = 0.0;
    for i in 0..map.len() {
        let c = lat.coords(i);
        // d[k][a] = ∂_a J̃_k
        let mut d = [[0.0; 3]; 3];
        for a in 0..3 {
            for t in lat.stencil(a, c[a]).iter() {
                let n = lat.along(i, a, t.j);
                for k in 0..3 {
                    d[k][a] += t.c * jt[n][k];
                }
            }
        }
        let curl = [d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]];
        q += dot(jt[i], curl);
    }
    Ok(q * lat.cell_volume())
}

/// Canonical fields on a periodic grid: the momentum density `l`, the
/// inverse map `ξ(x)`, `π = -Aᵀ l`, `g = Aᵀ A`, `a = ∂ξ/∂x` and the
/// density `ρ0(ξ(x)) det a`.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalFields {
    pub grid: GridGeometry,
    pub l: Vec<Vec3>,
    pub xi: Vec<Vec3>,
    pub pi: Vec<Vec3>,
    pub metric: Vec<Mat>,
    pub inverse_jacobian: Vec<Mat>,
    pub rho: Vec<f64>,
    pub rho0: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityResiduals {
    /// `max |l + aᵀπ| / max |l|`
    pub momentum: f64,
    /// `max |det g · ρ² / ρ0² - 1|`
    pub metric: f64,
}

fn periodic_diff(vals: &[f64], g: &GridGeometry, i: usize, axis: usize, order: StencilOrder) -> f64 {
    let h = g.spacing()[axis];
    let at = |s: isize| vals[g.neighbor(i, axis, s).unwrap()];
    match order {
        StencilOrder::Second => (at(1) - at(-1)) / (2.0 * h),
        StencilOrder::Fourth => (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0 * h),
    }
}

pub fn canonical_fields(map: &FlowMap, grid: &GridGeometry, kernel: Kernel, order: StencilOrder) -> Result<CanonicalFields> {
    let lat = &map.lattice;
    if lat.boundary != Boundary::Periodic || grid.boundary != GridBoundary::Periodic {
        return Err(Error::Parameter(String::from("canonical fields need a periodic lattice and grid")));
    }
    if grid.dim != lat.dim {
        return Err(Error::Shape(String::from("grid and lattice dimensions differ")));
    }
    let dim = lat.dim;
    let ext = lat.extent();
    for a in 0..dim {
        if (grid.lo[a] - lat.lo[a]).abs() > 1e-12 * ext[a] || (grid.hi[a] - lat.hi[a]).abs() > 1e-12 * ext[a] {
            return Err(Error::Shape(String::from("grid period must match the label period")));
        }
    }
    let n = grid.len();
    let inv = map.inverter();
    let mom = deposit_momentum(map, grid, kernel)?;
    let mut xi = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    let mut pi = Vec::with_capacity(n);
    let mut metric = Vec::with_capacity(n);
    let mut rho0 = Vec::with_capacity(n);
    let mut prev: Option<Vec3> = None;
    for i in 0..n {
        let x = grid.node(i);
        let lab = match prev {
            Some(s) => inv.invert_from(x, s).or_else(|_| inv.invert(x))?,
            None => inv.invert(x)?,
        };
        prev = Some(lab);
        let (_, a) = map.position_at(lab)?;
        let li = mom.vec(i);
        let mut p = [0.0; 3];
        for m in 0..dim {
            for j in 0..dim {
                p[m] -= a.m[j][m] * li[j];
            }
        }
        xi.push(lab);
        l.push(li);
        pi.push(p);
        metric.push(a.transpose().mul(&a));
        rho0.push(map.rho0_at(lab)?);
    }
    // ξ(x) - x is periodic once each value is taken to the nearest image
    let mut disp = vec![vec![0.0; n]; dim];
    for i in 0..n {
        let x = grid.node(i);
        for a in 0..dim {
            let d = xi[i][a] - x[a];
            disp[a][i] = d - ext[a] * (d / ext[a]).round();
        }
    }
    let mut inverse_jacobian = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    for i in 0..n {
        let mut a = Mat::identity(dim);
        for r in 0..dim {
            for c in 0..dim {
                a.m[r][c] += periodic_diff(&disp[r], grid, i, c, order);
            }
        }
        rho.push(rho0[i] * a.det());
        inverse_jacobian.push(a);
    }
    Ok(CanonicalFields { grid: *grid, l, xi, pi, metric, inverse_jacobian, rho, rho0 })
}

impl CanonicalFields {
    pub fn residuals(&self) -> IdentityResiduals {
        let dim = self.grid.dim;
        let mut lmax: f64 = 0.0;
        let mut rmom: f64 = 0.0;
        let mut rmet: f64 = 0.0;
        for i in 0..self.l.len() {
            let a = &self.inverse_jacobian[i];
            let mut r = self.l[i];
            for j in 0..dim {
                for k in 0..dim {
                    r[j] += a.m[k][j] * self.pi[i][k];
                }
            }
            lmax = lmax.max(crate::linalg::norm(self.l[i]));
            rmom = rmom.max(crate::linalg::norm(r));
            let q = self.metric[i].det() * self.rho[i] * self.rho[i] / (self.rho0[i] * self.rho0[i]);
            rmet = rmet.max((q - 1.0).abs());
        }
        IdentityResiduals { momentum: if lmax > 0.0 { rmom / lmax } else { rmom }, metric: rmet }
    }
}
