//! Lagrangian-to-Eulerian transfer.
//!
//! Two routes are provided. Deposition spreads `ρ0 ΔVξ` and `p ΔVξ` onto a
//! grid with a particle-in-cell kernel; mass is conserved to round-off.
//! Sampling inverts the map at every grid node and reads `ρ0 / det A` and
//! `p / (m ρ0)` from the interpolated lattice fields.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::{GridBoundary, GridField, GridGeometry, Residual};
use crate::lattice::FlowMap;
use crate::linalg::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Kernel {
    /// Cloud-in-cell (linear, two nodes per axis).
    #[default]
    Cic,
    /// Triangular-shaped cloud (quadratic, three nodes per axis).
    Tsc,
}

/// Velocities are masked where `ρ < VACUUM_FRACTION · mean ρ`.
pub const VACUUM_FRACTION: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
struct Taps {
    idx: [usize; 3],
    w: [f64; 3],
    len: usize,
}

fn axis_taps(g: &GridGeometry, axis: usize, x: f64, kernel: Kernel) -> Result<Taps> {
    let n = g.shape[axis];
    let h = g.spacing()[axis];
    let mut u = (x - g.lo[axis]) / h;
    if !u.is_finite() {
        return Err(Error::NonFinite(String::from("deposition position")));
    }
    match g.boundary {
        GridBoundary::Periodic => u = u.rem_euclid(n as f64),
        GridBoundary::Clamped => {
            let slack = 1e-9;
            if u < -slack || u > (n - 1) as f64 + slack {
                return Err(Error::OutOfDomain);
            }
            u = u.clamp(0.0, (n - 1) as f64);
        }
    }
    let mut t = Taps { idx: [0; 3], w: [0.0; 3], len: 0 };
    let mut raw = [(0isize, 0.0f64); 3];
    let len = match kernel {
        Kernel::Cic => {
            let i0 = u.floor();
            let f = u - i0;
            raw[0] = (i0 as isize, 1.0 - f);
            raw[1] = (i0 as isize + 1, f);
            2
        }
        Kernel::Tsc => {
            let i = u.round();
            let d = u - i;
            let i = i as isize;
            raw[0] = (i - 1, 0.5 * (0.5 - d) * (0.5 - d));
            raw[1] = (i, 0.75 - d * d);
            raw[2] = (i + 1, 0.5 * (0.5 + d) * (0.5 + d));
            3
        }
    };
    for &(k, w) in &raw[..len] {
        let j = match g.boundary {
            GridBoundary::Periodic => k.rem_euclid(n as isize) as usize,
            // weight past an edge folds onto the edge node
            GridBoundary::Clamped => k.clamp(0, n as isize - 1) as usize,
        };
        if let Some(s) = (0..t.len).find(|&s| t.idx[s] == j) {
            t.w[s] += w;
        } else {
            t.idx[t.len] = j;
            t.w[t.len] = w;
            t.len += 1;
        }
    }
    Ok(t)
}

/// Calls `f(node, weight)` for every grid node touched by a particle at `x`.
pub fn for_each_weight(g: &GridGeometry, x: Vec3, kernel: Kernel, mut f: impl FnMut(usize, f64)) -> Result<()> {
    let unit = Taps { idx: [0; 3], w: [1.0, 0.0, 0.0], len: 1 };
    let mut taps = [unit; 3];
    for a in 0..g.dim {
        taps[a] = axis_taps(g, a, x[a], kernel)?;
    }
    for k2 in 0..taps[2].len {
        for k1 in 0..taps[1].len {
            let w12 = taps[1].w[k1] * taps[2].w[k2];
            for k0 in 0..taps[0].len {
                let idx = g.index([taps[0].idx[k0], taps[1].idx[k1], taps[2].idx[k2]]);
                f(idx, taps[0].w[k0] * w12);
            }
        }
    }
    Ok(())
}

/// Interpolates a grid field to `x` with the same kernel used for deposition.
pub fn gather(field: &GridField, x: Vec3, kernel: Kernel) -> Result<Vec3> {
    let mut out = [0.0; 3];
    let nc = field.ncomp.min(3);
    for_each_weight(&field.geometry, x, kernel, |i, w| {
        for c in 0..nc {
            out[c] += w * field.data[i * field.ncomp + c];
        }
    })?;
    Ok(out)
}

/// Deposits `q(i) ΔVξ / ΔVx` for `ncomp` components. The particle range is
/// split into a fixed number of contiguous chunks that are reduced in order,
/// so the result depends on the thread count but not on scheduling.
pub fn deposit_with(
    map: &FlowMap,
    grid: &GridGeometry,
    kernel: Kernel,
    ncomp: usize,
    q: impl Fn(usize) -> Vec3 + Sync,
) -> Result<GridField> {
    if grid.dim != map.lattice.dim {
        return Err(Error::Shape(String::from("grid and lattice dimensions differ")));
    }
    let scale = map.lattice.cell_volume() / grid.cell_volume();
    let n = map.len();
    let one = |range: core::ops::Range<usize>| -> Result<Vec<f64>> {
        let mut buf = vec![0.0; grid.len() * ncomp];
        for i in range {
            let v = q(i);
            for_each_weight(grid, map.x[i], kernel, |j, w| {
                for c in 0..ncomp {
                    buf[j * ncomp + c] += w * v[c];
                }
            })?;
        }
        Ok(buf)
    };
    let data = reduce_chunks(n, grid.len() * ncomp, one)?;
    let mut f = GridField::zeros(*grid, ncomp);
    for (d, s) in f.data.iter_mut().zip(data) {
        *d = s * scale;
    }
    Ok(f)
}

#[cfg(feature = "parallel")]
fn reduce_chunks(
    n: usize,
    len: usize,
    one: impl Fn(core::ops::Range<usize>) -> Result<Vec<f64>> + Sync,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let chunks = rayon::current_num_threads().max(1).min(n.max(1));
    let size = n.div_ceil(chunks).max(1);
    let parts: Vec<Result<Vec<f64>>> =
        (0..chunks).into_par_iter().map(|c| one(c * size..((c + 1) * size).min(n))).collect();
    let mut acc = vec![0.0; len];
    for part in parts {
        for (a, b) in acc.iter_mut().zip(part?) {
            *a += b;
        }
    }
    Ok(acc)
}

#[cfg(not(feature = "parallel"))]
fn reduce_chunks(
    n: usize,
    _len: usize,
    one: impl Fn(core::ops::Range<usize>) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    one(0..n)
}

/// Number density `Σ ρ0 ΔVξ W(x - x_i) / ΔVx`.
pub fn deposit_density(map: &FlowMap, grid: &GridGeometry, kernel: Kernel) -> Result<GridField> {
    deposit_with(map, grid, kernel, 1, |i| [map.rho0[i], 0.0, 0.0])
}

/// Momentum density `l = Σ p ΔVξ W / ΔVx`, which equals `m ρ v`.
pub fn deposit_momentum(map: &FlowMap, grid: &GridGeometry, kernel: Kernel) -> Result<GridField> {
    deposit_with(map, grid, kernel, 3, |i| map.p[i])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deposited {
    pub rho: GridField,
    pub momentum: GridField,
    /// `l / (m ρ)`, masked in vacuum.
    pub velocity: GridField,
}

pub fn deposit_fields(map: &FlowMap, grid: &GridGeometry, kernel: Kernel) -> Result<Deposited> {
    let rho = deposit_density(map, grid, kernel)?;
    let momentum = deposit_momentum(map, grid, kernel)?;
    let velocity = velocity_from(&rho, &momentum, map.mass);
    Ok(Deposited { rho, momentum, velocity })
}

/// `v = l / (m ρ)` with nodes below the vacuum threshold masked out.
pub fn velocity_from(rho: &GridField, momentum: &GridField, mass: f64) -> GridField {
    let g = rho.geometry;
    let floor = VACUUM_FRACTION * rho.mean(0);
    let mut v = GridField::zeros(g, 3);
    let mut mask = vec![true; g.len()];
    for i in 0..g.len() {
        let r = rho.get(i, 0);
        if r < floor || r <= 0.0 {
            mask[i] = false;
            continue;
        }
        for c in 0..3 {
            v.data[i * 3 + c] = momentum.get(i, c) / (mass * r);
        }
    }
    if mask.iter().any(|m| !m) {
        v.mask = Some(mask);
    }
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sampled {
    pub rho: GridField,
    pub velocity: GridField,
    /// Labels `ξ(x)` at the grid nodes (three components).
    pub xi: GridField,
}

/// Eulerian fields read through the inverse map. Nodes outside the image of
/// a wall lattice are masked.
pub fn sample_fields(map: &FlowMap, grid: &GridGeometry) -> Result<Sampled> {
    if grid.dim != map.lattice.dim {
        return Err(Error::Shape(String::from("grid and lattice dimensions differ")));
    }
    let inv = map.inverter();
    let n = grid.len();
    let mut rho = GridField::zeros(*grid, 1);
    let mut vel = GridField::zeros(*grid, 3);
    let mut xi = GridField::zeros(*grid, 3);
    let mut mask = vec![true; n];
    let mut prev: Option<Vec3> = None;
    for i in 0..n {
        let x = grid.node(i);
        let attempt = match prev {
            Some(seed) => inv.invert_from(x, seed).or_else(|_| inv.invert(x)),
            None => inv.invert(x),
        };
        let lab = match attempt {
            Ok(l) => l,
            Err(Error::OutOfDomain) => {
                mask[i] = false;
                prev = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        prev = Some(lab);
        let (_, a) = map.position_at(lab)?;
        let det = a.det();
        if !(det > 0.0) {
            return Err(Error::Folding { node: usize::MAX, det });
        }
        rho.data[i] = map.rho0_at(lab)? / det;
        let v = map.velocity_at(lab)?;
        for c in 0..3 {
            vel.data[i * 3 + c] = v[c];
            xi.data[i * 3 + c] = lab[c];
        }
    }
    if mask.iter().any(|m| !m) {
        rho.mask = Some(mask.clone());
        vel.mask = Some(mask.clone());
        xi.mask = Some(mask);
    }
    Ok(Sampled { rho, velocity: vel, xi })
}

fn check_same(fields: &[&GridField]) -> Result<()> {
    for f in &fields[1..] {
        fields[0].geometry.same_as(&f.geometry)?;
    }
    Ok(())
}

/// `∂t ρ + ∇·(ρ v)` at `t`, from densities at `t - dt`, `t`, `t + dt` and the
/// velocity at `t`. Centred differences in time and space; nodes lacking a
/// centred stencil are excluded from the norm.
pub fn continuity_residual(
    rho_prev: &GridField,
    rho_now: &GridField,
    rho_next: &GridField,
    v_now: &GridField,
    dt: f64,
) -> Result<Residual> {
    check_same(&[rho_prev, rho_now, rho_next, v_now])?;
    if !(dt > 0.0) {
        return Err(Error::Parameter(String::from("dt must be positive")));
    }
    let g = rho_now.geometry;
    let h = g.spacing();
    let mut r = GridField::zeros(g, 1);
    let mut mask = vec![false; g.len()];
    let flux = |j: usize, a: usize| -> f64 {
        if v_now.valid(j) {
            rho_now.get(j, 0) * v_now.get(j, a)
        } else {
            0.0
        }
    };
    for i in 0..g.len() {
        if !g.is_interior(i) {
            continue;
        }
        let mut div = 0.0;
        for a in 0..g.dim {
            let lo = g.neighbor(i, a, -1).unwrap();
            let hi = g.neighbor(i, a, 1).unwrap();
            div += (flux(hi, a) - flux(lo, a)) / (2.0 * h[a]);
        }
        r.data[i] = (rho_next.get(i, 0) - rho_prev.get(i, 0)) / (2.0 * dt) + div;
        mask[i] = true;
    }
    r.mask = Some(mask);
    Ok(Residual::from_field(r))
}

/// `ρ (∂t v + (v·∇) v) + ∇p` at `t`. Nodes whose stencil touches a masked
/// velocity are excluded.
pub fn euler_residual(
    v_prev: &GridField,
    v_now: &GridField,
    v_next: &GridField,
    rho_now: &GridField,
    p_now: &GridField,
    dt: f64,
) -> Result<Residual> {
    check_same(&[v_prev, v_now, v_next, rho_now, p_now])?;
    if !(dt > 0.0) {
        return Err(Error::Parameter(String::from("dt must be positive")));
    }
    let g = rho_now.geometry;
    let mut r = GridField::zeros(g, 3);
    let mut mask = vec![false; g.len()];
    'node: for i in 0..g.len() {
        if !g.is_interior(i) || !v_prev.valid(i) || !v_now.valid(i) || !v_next.valid(i) {
            continue;
        }
        let v = v_now.vec(i);
        let rho = rho_now.get(i, 0);
        let mut out = [0.0; 3];
        for j in 0..g.dim {
            let mut adv = 0.0;
            for a in 0..g.dim {
                match v_now.diff(i, j, a) {
                    Some(d) => adv += v[a] * d,
                    None => continue 'node,
                }
            }
            let dvdt = (v_next.get(i, j) - v_prev.get(i, j)) / (2.0 * dt);
            let dp = match p_now.diff(i, 0, j) {
                Some(d) => d,
                None => continue 'node,
            };
            out[j] = rho * (dvdt + adv) + dp;
        }
        for c in 0..3 {
            r.data[i * 3 + c] = out[c];
        }
        mask[i] = true;
    }
    r.mask = Some(mask);
    Ok(Residual::from_field(r))
}
