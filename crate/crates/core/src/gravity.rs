//! Self-gravitating gas.
//!
//! Particles of mass `m` attract with strength `γ`; the potential of a
//! density is `U(x) = -∫ ρ(y) / |x - y|`, so the acceleration is
//! `-(γ/m) ∇U` and `ΔU = 4πρ`. On a label lattice the interaction is the
//! softened pair sum `-(γ/2) ΔV² Σ_{i≠j} ρ0_i ρ0_j / sqrt(r² + ε²)`.
//!
//! Static configurations satisfy `(v·∇)v = -(γ/m) ∇U` and `∇·(ρv) = 0`.
//! The diagnostics here check the virial relation `2T + U = 0`, the tornado
//! solutions and the lower bound on `-E_static`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::deposition::{deposit_density, for_each_weight, Kernel};
use crate::dynamics::{DensityPotential, ForceModel};
use crate::error::{Error, Result};
use crate::grid::{GridBoundary, GridField, GridGeometry, Residual};
use crate::lattice::{build_lattice, Boundary, FlowMap, LabelLattice};
use crate::linalg::{dot, sub, Vec3};

const PI: f64 = core::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GravitySolver {
    /// Softened pair sum over labels (or grid nodes).
    DirectSum,
    /// CIC deposit, FFT Poisson solve with the mean removed, CIC gather.
    Spectral { grid: GridGeometry },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GravityBoundary {
    Open,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GravitySpec {
    pub gamma: f64,
    /// Plummer length `ε`.
    pub softening: f64,
    pub solver: GravitySolver,
    pub boundary: GravityBoundary,
}

impl GravitySpec {
    pub fn direct(gamma: f64, softening: f64) -> Self {
        GravitySpec { gamma, softening, solver: GravitySolver::DirectSum, boundary: GravityBoundary::Open }
    }

    pub fn spectral(gamma: f64, grid: GridGeometry) -> Self {
        GravitySpec { gamma, softening: 0.0, solver: GravitySolver::Spectral { grid }, boundary: GravityBoundary::Periodic }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Parameter(String::from("gravitational constant must be positive")));
        }
        if !(self.softening >= 0.0) || !self.softening.is_finite() {
            return Err(Error::Parameter(String::from("softening must be non-negative")));
        }
        match (self.solver, self.boundary) {
            (GravitySolver::DirectSum, GravityBoundary::Open) => Ok(()),
            (GravitySolver::Spectral { grid }, GravityBoundary::Periodic) => {
                if grid.boundary != GridBoundary::Periodic || !grid.shape.iter().all(|n| n.is_power_of_two()) {
                    return Err(Error::Parameter(String::from("spectral gravity needs a periodic power-of-two grid")));
                }
                Ok(())
            }
            (GravitySolver::DirectSum, GravityBoundary::Periodic) => {
                Err(Error::Parameter(String::from("direct summation has no periodic images; use the spectral solver")))
            }
            (GravitySolver::Spectral { .. }, GravityBoundary::Open) => {
                Err(Error::Parameter(String::from("the spectral solver requires a periodic boundary")))
            }
        }
    }
}

#[inline]
fn inv_softened(d: Vec3, eps2: f64) -> f64 {
    let r2 = dot(d, d) + eps2;
    if r2 > 0.0 {
        1.0 / r2.sqrt()
    } else {
        0.0
    }
}

/// `U` with `ΔU = 4π(ρ - ρ̄)` and zero mean, inverted with the continuous
/// symbol `-|k|²`.
pub fn poisson_periodic(rho: &GridField) -> Result<GridField> {
    let g = rho.geometry;
    if g.boundary != GridBoundary::Periodic {
        return Err(Error::Parameter(String::from("periodic Poisson solve on a clamped grid")));
    }
    let mut data: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new(rho.get(i, 0), 0.0)).collect();
    crate::fft::fft_nd(&mut data, g.shape, false)?;
    let ext = g.extent();
    for (idx, d) in data.iter_mut().enumerate() {
        let c = g.coords(idx);
        let mut k2 = 0.0;
        for a in 0..g.dim {
            let k = 2.0 * PI * crate::fft::freq(c[a], g.shape[a]) as f64 / ext[a];
            k2 += k * k;
        }
        *d = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { *d * (-4.0 * PI / k2) };
    }
    crate::fft::fft_nd(&mut data, g.shape, true)?;
    let n = g.len() as f64;
    let mut u = GridField::zeros(g, 1);
    for (o, d) in u.data.iter_mut().zip(&data) {
        *o = d.re / n;
    }
    Ok(u)
}

/// `U(x) = -∫ ρ(y) / |x - y|` on the nodes of `rho`'s grid.
pub fn gravitational_potential(rho: &GridField, spec: &GravitySpec) -> Result<GridField> {
    spec.validate()?;
    match spec.solver {
        GravitySolver::Spectral { .. } => poisson_periodic(rho),
        GravitySolver::DirectSum => {
            let g = rho.geometry;
            if g.boundary == GridBoundary::Periodic {
                return Err(Error::Parameter(String::from("direct summation on a periodic grid")));
            }
            let dv = g.cell_volume();
            let eps2 = spec.softening * spec.softening;
            let src: Vec<(Vec3, f64)> =
                (0..g.len()).filter(|&j| rho.get(j, 0) != 0.0).map(|j| (g.node(j), rho.get(j, 0) * dv)).collect();
            let vals = crate::par::map_indices(g.len(), |i| {
                let x = g.node(i);
                -src.iter().map(|(y, q)| q * inv_softened(sub(x, *y), eps2)).sum::<f64>()
            });
            let mut u = GridField::zeros(g, 1);
            u.data = vals;
            Ok(u)
        }
    }
}

/// Potential of the labels, `-ΔV Σ ρ0_j / sqrt(|x - x_j|² + ε²)`, at `points`.
pub fn potential_of_map(map: &FlowMap, points: &[Vec3], softening: f64) -> Vec<f64> {
    let dv = map.lattice.cell_volume();
    let eps2 = softening * softening;
    crate::par::map_indices(points.len(), |i| {
        -dv * map.x.iter().zip(&map.rho0).map(|(y, r)| r * inv_softened(sub(points[i], *y), eps2)).sum::<f64>()
    })
}

/// `ṗ` from self-gravity. Direct sums skip `i = j`; the spectral route
/// uses the same CIC kernel for deposit and gather, so momentum is
/// conserved exactly.
pub fn gravity_force(map: &FlowMap, spec: &GravitySpec) -> Result<Vec<Vec3>> {
    spec.validate()?;
    let gamma = spec.gamma;
    match spec.solver {
        GravitySolver::DirectSum => {
            if map.lattice.boundary == Boundary::Periodic {
                return Err(Error::Parameter(String::from("direct-sum gravity on a periodic lattice")));
            }
            let dv = map.lattice.cell_volume();
            let eps2 = spec.softening * spec.softening;
            Ok(crate::par::map_indices(map.len(), |i| {
                let mut f = [0.0; 3];
                for j in 0..map.len() {
                    if j == i {
                        continue;
                    }
                    let d = sub(map.x[i], map.x[j]);
                    let r2 = dot(d, d) + eps2;
                    let w = map.rho0[j] / (r2 * r2.sqrt());
                    for a in 0..3 {
                        f[a] -= w * d[a];
                    }
                }
                let s = gamma * dv * map.rho0[i];
                [f[0] * s, f[1] * s, f[2] * s]
            }))
        }
        GravitySolver::Spectral { grid } => {
            if map.lattice.boundary != Boundary::Periodic {
                return Err(Error::Parameter(String::from("spectral gravity needs a periodic lattice")));
            }
            let rho = deposit_density(map, &grid, Kernel::Cic)?;
            let u = poisson_periodic(&rho)?;
            let mut grad = GridField::zeros(grid, 3);
            for i in 0..grid.len() {
                for a in 0..grid.dim {
                    grad.data[3 * i + a] = u.diff(i, 0, a).unwrap();
                }
            }
            let mut out = Vec::with_capacity(map.len());
            for i in 0..map.len() {
                let mut gu = [0.0; 3];
                for_each_weight(&grid, map.x[i], Kernel::Cic, |j, w| {
                    for a in 0..3 {
                        gu[a] += w * grad.data[3 * j + a];
                    }
                })?;
                let s = -gamma * map.rho0[i];
                out.push([gu[0] * s, gu[1] * s, gu[2] * s]);
            }
            Ok(out)
        }
    }
}

/// Interaction energy consistent with [`gravity_force`].
pub fn gravitational_energy(map: &FlowMap, spec: &GravitySpec) -> Result<f64> {
    spec.validate()?;
    let dv = map.lattice.cell_volume();
    match spec.solver {
        GravitySolver::DirectSum => {
            let eps2 = spec.softening * spec.softening;
            let parts = crate::par::map_indices(map.len(), |i| {
                let mut s = 0.0;
                for j in i + 1..map.len() {
                    s += map.rho0[j] * inv_softened(sub(map.x[i], map.x[j]), eps2);
                }
                s * map.rho0[i]
            });
            Ok(-spec.gamma * dv * dv * parts.iter().sum::<f64>())
        }
        GravitySolver::Spectral { grid } => {
            let rho = deposit_density(map, &grid, Kernel::Cic)?;
            let u = poisson_periodic(&rho)?;
            let e: f64 = (0..grid.len()).map(|i| rho.get(i, 0) * u.get(i, 0)).sum();
            Ok(0.5 * spec.gamma * e * grid.cell_volume())
        }
    }
}

/// One leapfrog step under self-gravity and, optionally, the internal and
/// external forces of `model`.
pub fn gravity_step(map: &FlowMap, model: &ForceModel, spec: &GravitySpec, dt: f64) -> Result<FlowMap> {
    let m = model.with_gravity(*spec);
    crate::dynamics::step(map, &m, crate::dynamics::Scheme::Leapfrog, dt)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Virial {
    /// `T = (m/2) ∫ ρ v²`
    pub kinetic: f64,
    /// `U = -(γ/2) ∬ ρρ' / |x - x'|`
    pub potential: f64,
    /// `2T + U`
    pub residual: f64,
    /// `|2T + U| / |U|`
    pub relative: f64,
}

impl Virial {
    fn new(kinetic: f64, potential: f64) -> Self {
        let residual = 2.0 * kinetic + potential;
        let relative = if potential != 0.0 { residual.abs() / potential.abs() } else { 0.0 };
        Virial { kinetic, potential, residual, relative }
    }

    /// `E = T + U`, which equals `-T` when the virial relation holds.
    pub fn energy(&self) -> f64 {
        self.kinetic + self.potential
    }
}

pub fn virial_residual(map: &FlowMap, spec: &GravitySpec) -> Result<Virial> {
    if spec.boundary == GravityBoundary::Periodic || map.lattice.boundary == Boundary::Periodic {
        return Err(Error::Parameter(String::from("the virial relation needs an isolated configuration")));
    }
    Ok(Virial::new(crate::dynamics::kinetic_energy(map), gravitational_energy(map, spec)?))
}

/// Grid form: `T = (m/2) Σ ρ v² ΔV`, `U = (γ/2) Σ ρ U[ρ] ΔV` over valid nodes.
pub fn virial_residual_fields(rho: &GridField, v: &GridField, mass: f64, spec: &GravitySpec) -> Result<Virial> {
    if spec.boundary == GravityBoundary::Periodic || rho.geometry.boundary == GridBoundary::Periodic {
        return Err(Error::Parameter(String::from("the virial relation needs an isolated configuration")));
    }
    rho.geometry.same_as(&v.geometry)?;
    let u = gravitational_potential(rho, spec)?;
    let dv = rho.geometry.cell_volume();
    let mut t = 0.0;
    let mut w = 0.0;
    for i in 0..rho.geometry.len() {
        let r = rho.get(i, 0);
        if v.valid(i) {
            let vi = v.vec(i);
            t += r * dot(vi, vi);
        }
        w += r * u.get(i, 0);
    }
    Ok(Virial::new(0.5 * mass * t * dv, 0.5 * spec.gamma * w * dv))
}

/// Razor-thin Kuzmin disk on a polar label lattice, rotating on circular
/// orbits balanced against the discrete softened pair forces. Enclosed
/// mass is `M (1 - a / sqrt(R² + a²))`; rings carry equal mass out to the
/// fraction `1 - 1/(2 rings)`.
pub fn kuzmin_disk(rings: usize, per_ring: usize, scale: f64, total_mass: f64, mass: f64, spec: &GravitySpec) -> Result<FlowMap> {
    if rings < 2 || per_ring < 3 || !(scale > 0.0) || !(total_mass > 0.0) {
        return Err(Error::Parameter(String::from("Kuzmin disk needs >= 2 rings, >= 3 labels per ring and positive scales")));
    }
    let lat = LabelLattice::new(2, [0.0; 3], [1.0, 2.0 * PI, 0.0], [rings, per_ring, 1], Boundary::FixedWall)?;
    let radius = |s: f64| scale * ((1.0 / ((1.0 - s) * (1.0 - s))) - 1.0).sqrt();
    let rho0 = total_mass / (2.0 * PI);
    let mut map = build_lattice(lat, |_| rho0, |xi| {
        let r = radius(xi[0]);
        [r * xi[1].cos(), r * xi[1].sin(), 0.0]
    }, |_| [0.0; 3], mass)?;
    let f = gravity_force(&map, spec)?;
    for i in 0..map.len() {
        let x = map.x[i];
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let a_r = -(f[i][0] * x[0] + f[i][1] * x[1]) / (r * mass * map.rho0[i]);
        if !(a_r > 0.0) {
            return Err(Error::Degenerate(String::from("no inward force on a disk label")));
        }
        let v = (r * a_r).sqrt();
        let s = mass * map.rho0[i] * v / r;
        map.p[i] = [-x[1] * s, x[0] * s, 0.0];
    }
    Ok(map)
}

/// Samples of a radial function on `0 = r_0 < r_1 < ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if r.len() != values.len() || r.len() < 2 {
            return Err(Error::Shape(String::from("profile needs >= 2 matching samples")));
        }
        if r[0] != 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter(String::from("profile radii must increase strictly from 0")));
        }
        if values.iter().chain(&r).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(String::from("profile")));
        }
        Ok(RadialProfile { r, values })
    }

    pub fn sample(n: usize, r_max: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let r: Vec<f64> = (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect();
        let v = r.iter().map(|&x| f(x)).collect();
        Self::new(r, v)
    }

    /// Linear interpolation, constant beyond the last sample.
    pub fn at(&self, r: f64) -> f64 {
        let n = self.r.len();
        if r >= self.r[n - 1] {
            return self.values[n - 1];
        }
        let k = self.r.partition_point(|&x| x <= r).clamp(1, n - 1);
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        let t = (r - r0) / (r1 - r0);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }
}

/// `v(r) = sqrt((4πγ/m) ∫₀^r r' ρ(r') dr')` by the cumulative trapezoid rule.
pub fn tornado_profile(rho: &RadialProfile, gamma: f64, mass: f64) -> Result<RadialProfile> {
    if rho.values.iter().any(|&x| x < 0.0) {
        return Err(Error::Parameter(String::from("density profile is negative")));
    }
    let c = 4.0 * PI * gamma / mass;
    let mut acc = 0.0;
    let mut v = vec![0.0; rho.r.len()];
    for k in 1..rho.r.len() {
        let (r0, r1) = (rho.r[k - 1], rho.r[k]);
        acc += 0.5 * (r1 - r0) * (r0 * rho.values[k - 1] + r1 * rho.values[k]);
        if !acc.is_finite() {
            return Err(Error::NonFinite(String::from("cumulative mass integral diverges")));
        }
        v[k] = (c * acc).sqrt();
    }
    RadialProfile::new(rho.r.clone(), v)
}

/// `U(r) = (m/γ) ∫₀^r v²/r' dr'`, the potential whose gradient balances the
/// centripetal acceleration `v²/r` of the tornado.
pub fn tornado_potential(v: &RadialProfile, gamma: f64, mass: f64) -> RadialProfile {
    let g = |k: usize| if v.r[k] > 0.0 { v.values[k] * v.values[k] / v.r[k] } else { 0.0 };
    let mut u = vec![0.0; v.r.len()];
    for k in 1..v.r.len() {
        u[k] = u[k - 1] + 0.5 * (v.r[k] - v.r[k - 1]) * (g(k - 1) + g(k)) * mass / gamma;
    }
    RadialProfile { r: v.r.clone(), values: u }
}

/// Tornado fields about the vertical axis through `(cx, cy)`.
pub fn embed_tornado(grid: GridGeometry, axis: [f64; 2], rho: &RadialProfile, v: &RadialProfile) -> (GridField, GridField) {
    let mut d = GridField::zeros(grid, 1);
    let mut w = GridField::zeros(grid, 3);
    for i in 0..grid.len() {
        let x = grid.node(i);
        let (dx, dy) = (x[0] - axis[0], x[1] - axis[1]);
        let r = (dx * dx + dy * dy).sqrt();
        d.data[i] = rho.at(r);
        if r > 0.0 {
            let s = v.at(r) / r;
            w.data[3 * i] = -dy * s;
            w.data[3 * i + 1] = dx * s;
        }
    }
    (d, w)
}

fn gradient(f: &GridField, c: usize, i: usize) -> Option<Vec3> {
    let mut g = [0.0; 3];
    for a in 0..f.geometry.dim {
        g[a] = f.diff(i, c, a)?;
    }
    Some(g)
}

/// `(v·∇)v` at nodes with centred differences, masked elsewhere.
pub fn advective_acceleration(v: &GridField) -> GridField {
    let g = v.geometry;
    let mut out = GridField::zeros(g, 3);
    let mut mask = vec![false; g.len()];
    for i in 0..g.len() {
        let vi = v.vec(i);
        let mut ok = v.valid(i);
        for c in 0..3 {
            match gradient(v, c, i) {
                Some(gr) if ok => out.data[3 * i + c] = dot(vi, gr),
                _ => ok = false,
            }
        }
        mask[i] = ok;
        if !ok {
            out.data[3 * i..3 * i + 3].fill(0.0);
        }
    }
    out.mask = Some(mask);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticResiduals {
    /// `∇·((v·∇)v) + 4π(γ/m)ρ`
    pub divergence: Residual,
    /// `∇·(ρv)`
    pub continuity: Residual,
    /// `∇×((v·∇)v)`
    pub curl: Residual,
}

/// Residuals of the local static equations, evaluated where every centred
/// difference they need exists.
pub fn static_residuals(rho: &GridField, v: &GridField, gamma: f64, mass: f64) -> Result<StaticResiduals> {
    rho.geometry.same_as(&v.geometry)?;
    let g = rho.geometry;
    let w = advective_acceleration(v);
    let mut flux = GridField::zeros(g, 3);
    for i in 0..g.len() {
        for a in 0..3 {
            flux.data[3 * i + a] = rho.get(i, 0) * v.get(i, a);
        }
    }
    flux.mask = v.mask.clone();
    let mut div = GridField::zeros(g, 1);
    let mut cont = GridField::zeros(g, 1);
    let mut curl = GridField::zeros(g, 3);
    let mut mask = vec![false; g.len()];
    let dim = g.dim;
    for i in 0..g.len() {
        let dw = |c: usize, a: usize| if a < dim { w.diff(i, c, a) } else { Some(0.0) };
        let df = |c: usize, a: usize| if a < dim { flux.diff(i, c, a) } else { Some(0.0) };
        let vals = (|| {
            let d = dw(0, 0)? + dw(1, 1)? + dw(2, 2)?;
            let c = df(0, 0)? + df(1, 1)? + df(2, 2)?;
            let k = [dw(2, 1)? - dw(1, 2)?, dw(0, 2)? - dw(2, 0)?, dw(1, 0)? - dw(0, 1)?];
            Some((d, c, k))
        })();
        if let Some((d, c, k)) = vals {
            mask[i] = true;
            div.data[i] = d + 4.0 * PI * gamma / mass * rho.get(i, 0);
            cont.data[i] = c;
            curl.data[3 * i..3 * i + 3].copy_from_slice(&k);
        }
    }
    div.mask = Some(mask.clone());
    cont.mask = Some(mask.clone());
    curl.mask = Some(mask);
    Ok(StaticResiduals {
        divergence: Residual::from_field(div),
        continuity: Residual::from_field(cont),
        curl: Residual::from_field(curl),
    })
}

/// Node quadrature weights. Nodes with zero weight are ignored, so
/// derivative-based integrands only need to exist where the weight is
/// positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub geometry: GridGeometry,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// `ΔV` at every node with a full centred stencil.
    pub fn interior(g: GridGeometry) -> Self {
        let dv = g.cell_volume();
        Quadrature { geometry: g, weights: (0..g.len()).map(|i| if g.is_interior(i) { dv } else { 0.0 }).collect() }
    }

    /// Interior nodes inside the cylinder `(x-cx)² + (y-cy)² <= R²`, with the
    /// fraction of each node's cell inside the disk estimated on a
    /// `sub × sub` subgrid.
    pub fn cylinder(g: GridGeometry, axis: [f64; 2], radius: f64, sub: usize) -> Self {
        let h = g.spacing();
        let dv = g.cell_volume();
        let sub = sub.max(1);
        let weights = (0..g.len())
            .map(|i| {
                if !g.is_interior(i) {
                    return 0.0;
                }
                let x = g.node(i);
                let mut inside = 0;
                for a in 0..sub {
                    for b in 0..sub {
                        let px = x[0] + h[0] * ((a as f64 + 0.5) / sub as f64 - 0.5) - axis[0];
                        let py = x[1] + h[1] * ((b as f64 + 0.5) / sub as f64 - 0.5) - axis[1];
                        if px * px + py * py <= radius * radius {
                            inside += 1;
                        }
                    }
                }
                dv * inside as f64 / (sub * sub) as f64
            })
            .collect();
        Quadrature { geometry: g, weights }
    }

    fn check(&self, f: &GridField) -> Result<()> {
        self.geometry.same_as(&f.geometry)
    }

    /// `Σ w f` for a per-node integrand; `None` at a weighted node is an error.
    pub fn integrate(&self, f: impl Fn(usize) -> Option<f64>) -> Result<f64> {
        let mut s = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                s += w * f(i).ok_or_else(|| Error::Shape(String::from("integrand undefined at a weighted node")))?;
            }
        }
        Ok(s)
    }
}

/// `-E_static = (m² / 16πγ) ∫ |(v·∇)v|²`.
pub fn static_energy_deficit(v: &GridField, gamma: f64, mass: f64, q: &Quadrature) -> Result<f64> {
    q.check(v)?;
    let w = advective_acceleration(v);
    let s = q.integrate(|i| w.valid(i).then(|| dot(w.vec(i), w.vec(i))))?;
    Ok(mass * mass / (16.0 * PI * gamma) * s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBound {
    /// `-E_static`
    pub lhs: f64,
    /// `πγ (∫ρf)² / ∫|∇f|²`
    pub rhs: f64,
    /// `lhs / rhs`; infinite when `∫ρf = 0`.
    pub ratio: f64,
}

pub fn energy_bound_ratio(rho: &GridField, v: &GridField, f: &GridField, gamma: f64, mass: f64, q: &Quadrature) -> Result<EnergyBound> {
    q.check(rho)?;
    q.check(f)?;
    let lhs = static_energy_deficit(v, gamma, mass, q)?;
    let j = q.integrate(|i| Some(rho.get(i, 0) * f.get(i, 0)))?;
    let g2 = q.integrate(|i| gradient(f, 0, i).map(|g| dot(g, g)))?;
    if !(g2 > 0.0) {
        return Err(Error::Degenerate(String::from("trial function has no gradient")));
    }
    let rhs = PI * gamma * j * j / g2;
    let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
    Ok(EnergyBound { lhs, rhs, ratio })
}

/// `48^(1/6)`
pub fn ladyzhenskaya_constant() -> f64 {
    48f64.powf(1.0 / 6.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ladyzhenskaya {
    /// `‖f‖₆`
    pub lhs: f64,
    /// `48^(1/6) ‖∇f‖₂`
    pub rhs: f64,
    pub margin: f64,
}

pub fn ladyzhenskaya_check(f: &GridField, q: &Quadrature) -> Result<Ladyzhenskaya> {
    q.check(f)?;
    let l6 = q.integrate(|i| Some(f.get(i, 0).abs().powi(6)))?.powf(1.0 / 6.0);
    let g2 = q.integrate(|i| gradient(f, 0, i).map(|g| dot(g, g)))?.sqrt();
    let rhs = ladyzhenskaya_constant() * g2;
    Ok(Ladyzhenskaya { lhs: l6, rhs, margin: rhs - l6 })
}

/// `|J| = |∫ρf| / ‖∇f‖₂` and its bound `48^(1/6) ‖ρ‖_{6/5}`.
pub fn normalized_overlap_bound(rho: &GridField, f: &GridField, q: &Quadrature) -> Result<(f64, f64)> {
    q.check(rho)?;
    q.check(f)?;
    let j = q.integrate(|i| Some(rho.get(i, 0) * f.get(i, 0)))?;
    let g2 = q.integrate(|i| gradient(f, 0, i).map(|g| dot(g, g)))?.sqrt();
    if !(g2 > 0.0) {
        return Err(Error::Degenerate(String::from("trial function has no gradient")));
    }
    let r65 = q.integrate(|i| Some(rho.get(i, 0).abs().powf(1.2)))?.powf(1.0 / 1.2);
    Ok((j.abs() / g2, ladyzhenskaya_constant() * r65))
}

/// `∫ [m ρ v² + 3p]`. For a barotropic gas with `p ≥ 0` this is positive
/// for any non-vacuum state, so no isolated static solution exists.
pub fn shafranov_functional(rho: &GridField, v: &GridField, potential: &DensityPotential, mass: f64, q: &Quadrature) -> Result<f64> {
    q.check(rho)?;
    rho.geometry.same_as(&v.geometry)?;
    q.integrate(|i| {
        let r = rho.get(i, 0);
        let w = v.vec(i);
        Some(mass * r * dot(w, w) + 3.0 * crate::dynamics::pressure_of_density(r, potential, mass))
    })
}

/// `q = 2πk ∫ d(cos α) ∧ dβ` over the half-plane rectangle
/// `[r_lo, r_hi] × [z_lo, z_hi]`, by the midpoint rule on an `n × n` cell
/// grid with centred differences. `β` may wind by `2π` around a point; its
/// differences are taken on the circle.
pub fn toroidal_helicity(
    k: f64,
    cos_alpha: impl Fn(f64, f64) -> f64,
    beta: impl Fn(f64, f64) -> f64,
    r: [f64; 2],
    z: [f64; 2],
    n: usize,
) -> f64 {
    let hr = (r[1] - r[0]) / n as f64;
    let hz = (z[1] - z[0]) / n as f64;
    let wrap = |a: f64| a - 2.0 * PI * (a / (2.0 * PI)).round();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (rr, zz) = (r[0] + (i as f64 + 0.5) * hr, z[0] + (j as f64 + 0.5) * hz);
            let dar = (cos_alpha(rr + 0.5 * hr, zz) - cos_alpha(rr - 0.5 * hr, zz)) / hr;
            let daz = (cos_alpha(rr, zz + 0.5 * hz) - cos_alpha(rr, zz - 0.5 * hz)) / hz;
            let dbr = wrap(beta(rr + 0.5 * hr, zz) - beta(rr - 0.5 * hr, zz)) / hr;
            let dbz = wrap(beta(rr, zz + 0.5 * hz) - beta(rr, zz - 0.5 * hz)) / hz;
            s += dar * dbz - daz * dbr;
        }
    }
    2.0 * PI * k * s * hr * hz
}
