//! Label-space dynamics.
//!
//! The discrete Hamiltonian is
//! `H = ΔVξ Σ_i [ |p_i|² / (2 m ρ0_i) + det A_i · V(ρ0_i / det A_i) + ρ0_i U(x_i) ]`
//! with `A` from the lattice difference stencils. The barotropic force is
//! its exact gradient: the divergence `∂_ξk [m p(ρ) det A (A⁻¹)_kj]` is
//! applied as the transpose of the stencil used for `A`, so leapfrog is
//! symplectic for the discrete system, walls included.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::gravity::GravitySpec;
use crate::lattice::FlowMap;
use crate::linalg::{Vec3, ZERO};

/// Internal energy density `V(ρ)` per unit volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensityPotential {
    Zero,
    /// `a ρ²`
    Quadratic { a: f64 },
    /// `a ρ^Γ`
    Polytropic { a: f64, gamma: f64 },
    /// `T ρ ln ρ`, giving `p = T ρ / m`.
    Isothermal { t: f64 },
    /// `κ (ρ - ρ_as)² / (2 ρ_ref)`; pressure vanishes at `ρ_as`.
    Reference { kappa: f64, rho_as: f64, rho_ref: f64 },
}

impl DensityPotential {
    pub fn value(&self, rho: f64) -> f64 {
        match *self {
            DensityPotential::Zero => 0.0,
            DensityPotential::Quadratic { a } => a * rho * rho,
            DensityPotential::Polytropic { a, gamma } => a * rho.powf(gamma),
            DensityPotential::Isothermal { t } => t * rho * rho.ln(),
            DensityPotential::Reference { kappa, rho_as, rho_ref } => {
                0.5 * kappa * (rho - rho_as) * (rho - rho_as) / rho_ref
            }
        }
    }

    pub fn derivative(&self, rho: f64) -> f64 {
        match *self {
            DensityPotential::Zero => 0.0,
            DensityPotential::Quadratic { a } => 2.0 * a * rho,
            DensityPotential::Polytropic { a, gamma } => a * gamma * rho.powf(gamma - 1.0),
            DensityPotential::Isothermal { t } => t * (rho.ln() + 1.0),
            DensityPotential::Reference { kappa, rho_as, rho_ref } => kappa * (rho - rho_as) / rho_ref,
        }
    }

    pub fn second_derivative(&self, rho: f64) -> f64 {
        match *self {
            DensityPotential::Zero => 0.0,
            DensityPotential::Quadratic { a } => 2.0 * a,
            DensityPotential::Polytropic { a, gamma } => a * gamma * (gamma - 1.0) * rho.powf(gamma - 2.0),
            DensityPotential::Isothermal { t } => t / rho,
            DensityPotential::Reference { kappa, rho_ref, .. } => kappa / rho_ref,
        }
    }

    /// `ρ V'(ρ) - V(ρ)`, which is `m p`.
    #[inline]
    pub fn stress(&self, rho: f64) -> f64 {
        match *self {
            DensityPotential::Zero => 0.0,
            _ => rho * self.derivative(rho) - self.value(rho),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DensityPotential::Zero)
    }
}

/// Pressure `p = (ρ² / m) ∂ρ (V / ρ)`.
pub fn pressure_of_density(rho: f64, v: &DensityPotential, mass: f64) -> f64 {
    v.stress(rho) / mass
}

/// `dp/dρ = ρ V''(ρ) / m`; the squared sound speed of the Euler form.
pub fn sound_speed_squared(rho: f64, v: &DensityPotential, mass: f64) -> f64 {
    rho * v.second_derivative(rho) / mass
}

/// External potential energy per particle, `U(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExternalPotential {
    Zero,
    /// `U = g · x`
    Uniform { g: Vec3 },
    /// `U = ω² |x - c|² / 2`
    Harmonic { omega: f64, center: Vec3 },
}

impl ExternalPotential {
    pub fn value(&self, x: Vec3) -> f64 {
        match *self {
            ExternalPotential::Zero => 0.0,
            ExternalPotential::Uniform { g } => crate::linalg::dot(g, x),
            ExternalPotential::Harmonic { omega, center } => {
                let d = crate::linalg::sub(x, center);
                0.5 * omega * omega * crate::linalg::dot(d, d)
            }
        }
    }

    pub fn gradient(&self, x: Vec3) -> Vec3 {
        match *self {
            ExternalPotential::Zero => ZERO,
            ExternalPotential::Uniform { g } => g,
            ExternalPotential::Harmonic { omega, center } => {
                crate::linalg::scale(omega * omega, crate::linalg::sub(x, center))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExternalPotential::Zero)
    }
}

/// Internal plus external forcing and optional self-gravity. `free()` has
/// none of them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceModel {
    pub internal: DensityPotential,
    pub external: ExternalPotential,
    pub gravity: Option<GravitySpec>,
}

impl ForceModel {
    pub fn free() -> Self {
        ForceModel { internal: DensityPotential::Zero, external: ExternalPotential::Zero, gravity: None }
    }

    pub fn barotropic(v: DensityPotential) -> Self {
        ForceModel { internal: v, external: ExternalPotential::Zero, gravity: None }
    }

    pub fn external(u: ExternalPotential) -> Self {
        ForceModel { internal: DensityPotential::Zero, external: u, gravity: None }
    }

    pub fn composite(v: DensityPotential, u: ExternalPotential) -> Self {
        ForceModel { internal: v, external: u, gravity: None }
    }

    pub fn with_gravity(mut self, g: GravitySpec) -> Self {
        self.gravity = Some(g);
        self
    }

    pub fn is_free(&self) -> bool {
        self.internal.is_zero() && self.external.is_zero() && self.gravity.is_none()
    }
}

/// Exact free streaming `x += dt p / (m ρ0)`.
pub fn step_free(map: &FlowMap, dt: f64) -> FlowMap {
    let mut out = map.clone();
    drift(&mut out, dt);
    out.time += dt;
    out
}

fn drift(map: &mut FlowMap, dt: f64) {
    let m = map.mass;
    for i in 0..map.x.len() {
        let s = dt / (m * map.rho0[i]);
        for a in 0..3 {
            map.x[i][a] += s * map.p[i][a];
        }
    }
}

/// `ṗ` from the internal energy, applied in adjoint (summation-by-parts) form.
pub fn barotropic_force(map: &FlowMap, v: &DensityPotential) -> Result<Vec<Vec3>> {
    let lat = &map.lattice;
    let dim = lat.dim;
    let n = map.len();
    let mut f = vec![ZERO; n];
    if v.is_zero() {
        return Ok(f);
    }
    for i in 0..n {
        let a = map.deformation(i);
        let det = a.det();
        if !(det > 0.0) {
            return Err(Error::Folding { node: i, det });
        }
        let rho = map.rho0[i] / det;
        // stress · det A · A⁻¹ is stress · adj(A)
        let s = v.stress(rho);
        let adj = a.adjugate();
        let c = lat.coords(i);
        for k in 0..dim {
            let st = lat.stencil(k, c[k]);
            for t in st.iter() {
                let nidx = lat.along(i, k, t.j);
                for j in 0..dim {
                    f[nidx][j] += t.c * s * adj.m[k][j];
                }
            }
        }
    }
    Ok(f)
}

/// `ṗ = -ρ0 ∇U(x)`.
pub fn external_force(map: &FlowMap, u: &ExternalPotential) -> Vec<Vec3> {
    map.x
        .iter()
        .zip(&map.rho0)
        .map(|(x, r)| crate::linalg::scale(-r, u.gradient(*x)))
        .collect()
}

pub fn force(map: &FlowMap, model: &ForceModel) -> Result<Vec<Vec3>> {
    let mut f = barotropic_force(map, &model.internal)?;
    if !model.external.is_zero() {
        for (fi, e) in f.iter_mut().zip(external_force(map, &model.external)) {
            for a in 0..3 {
                fi[a] += e[a];
            }
        }
    }
    if let Some(g) = &model.gravity {
        for (fi, e) in f.iter_mut().zip(crate::gravity::gravity_force(map, g)?) {
            for a in 0..3 {
                fi[a] += e[a];
            }
        }
    }
    Ok(f)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub kinetic: f64,
    pub internal: f64,
    pub external: f64,
    pub gravitational: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.internal + self.external + self.gravitational
    }
}

pub fn kinetic_energy(map: &FlowMap) -> f64 {
    let dv = map.lattice.cell_volume();
    map.p
        .iter()
        .zip(&map.rho0)
        .map(|(p, r)| crate::linalg::dot(*p, *p) / (2.0 * map.mass * r))
        .sum::<f64>()
        * dv
}

/// `Σ ΔVξ det A V(ρ0 / det A)`, the label form of `∫ V(ρ) d³x`.
pub fn internal_energy(map: &FlowMap, v: &DensityPotential) -> Result<f64> {
    if v.is_zero() {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for i in 0..map.len() {
        let det = map.deformation(i).det();
        if !(det > 0.0) {
            return Err(Error::Folding { node: i, det });
        }
        s += det * v.value(map.rho0[i] / det);
    }
    Ok(s * map.lattice.cell_volume())
}

pub fn total_energy(map: &FlowMap, model: &ForceModel) -> Result<Energy> {
    let dv = map.lattice.cell_volume();
    let external = if model.external.is_zero() {
        0.0
    } else {
        map.x.iter().zip(&map.rho0).map(|(x, r)| r * model.external.value(*x)).sum::<f64>() * dv
    };
    let gravitational = match &model.gravity {
        Some(g) => crate::gravity::gravitational_energy(map, g)?,
        None => 0.0,
    };
    Ok(Energy { kinetic: kinetic_energy(map), internal: internal_energy(map, &model.internal)?, external, gravitational })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Kick-drift-kick leapfrog.
    #[default]
    Leapfrog,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
}

/// Receives the map after every `cadence()` steps (and at step 0).
pub trait Observer {
    fn cadence(&self) -> usize {
        1
    }
    fn observe(&mut self, step: usize, map: &FlowMap);
}

pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: usize, _: &FlowMap) {}
}

impl<F: FnMut(usize, &FlowMap)> Observer for F {
    fn observe(&mut self, step: usize, map: &FlowMap) {
        self(step, map)
    }
}

/// Keeps a copy of every `every`-th map.
pub struct Recorder {
    pub every: usize,
    pub snapshots: Vec<FlowMap>,
}

impl Recorder {
    pub fn new(every: usize) -> Self {
        Recorder { every: every.max(1), snapshots: Vec::new() }
    }
}

impl Observer for Recorder {
    fn cadence(&self) -> usize {
        self.every
    }
    fn observe(&mut self, _: usize, map: &FlowMap) {
        self.snapshots.push(map.clone());
    }
}

/// Integration stopped early; `last_valid` is the final accepted state.
#[derive(Clone, Debug, PartialEq)]
pub struct Aborted {
    pub last_valid: FlowMap,
    pub step: usize,
    pub error: Error,
}

/// One step of `spec.scheme`.
pub fn step(map: &FlowMap, model: &ForceModel, scheme: Scheme, dt: f64) -> Result<FlowMap> {
    let mut cache = None;
    step_cached(map, model, scheme, dt, &mut cache)
}

fn step_cached(
    map: &FlowMap,
    model: &ForceModel,
    scheme: Scheme,
    dt: f64,
    cache: &mut Option<Vec<Vec3>>,
) -> Result<FlowMap> {
    if model.is_free() {
        let out = step_free(map, dt);
        out.check_orientation()?;
        return Ok(out);
    }
    let mut out = map.clone();
    match scheme {
        Scheme::Leapfrog => {
            let f0 = match cache.take() {
                Some(f) => f,
                None => force(map, model)?,
            };
            kick(&mut out, &f0, 0.5 * dt);
            drift(&mut out, dt);
            let f1 = force(&out, model)?;
            kick(&mut out, &f1, 0.5 * dt);
            *cache = Some(f1);
        }
        Scheme::Rk4 => {
            let m = map.mass;
            let rate = |s: &FlowMap| -> Result<(Vec<Vec3>, Vec<Vec3>)> {
                let xd = s.p.iter().zip(&s.rho0).map(|(p, r)| crate::linalg::scale(1.0 / (m * r), *p)).collect();
                Ok((xd, force(s, model)?))
            };
            let shifted = |k: &(Vec<Vec3>, Vec<Vec3>), h: f64| -> FlowMap {
                let mut s = map.clone();
                for i in 0..s.x.len() {
                    s.x[i] = crate::linalg::axpy(h, k.0[i], s.x[i]);
                    s.p[i] = crate::linalg::axpy(h, k.1[i], s.p[i]);
                }
                s
            };
            let k1 = rate(map)?;
            let k2 = rate(&shifted(&k1, 0.5 * dt))?;
            let k3 = rate(&shifted(&k2, 0.5 * dt))?;
            let k4 = rate(&shifted(&k3, dt))?;
            for i in 0..out.x.len() {
                for a in 0..3 {
                    out.x[i][a] += dt / 6.0 * (k1.0[i][a] + 2.0 * k2.0[i][a] + 2.0 * k3.0[i][a] + k4.0[i][a]);
                    out.p[i][a] += dt / 6.0 * (k1.1[i][a] + 2.0 * k2.1[i][a] + 2.0 * k3.1[i][a] + k4.1[i][a]);
                }
            }
        }
    }
    out.time = map.time + dt;
    if out.x.iter().chain(out.p.iter()).any(|v| v.iter().any(|c| !c.is_finite())) {
        return Err(Error::NonFinite(String::from("flow map state")));
    }
    out.check_orientation()?;
    Ok(out)
}

fn kick(map: &mut FlowMap, f: &[Vec3], h: f64) {
    for (p, fi) in map.p.iter_mut().zip(f) {
        for a in 0..3 {
            p[a] += h * fi[a];
        }
    }
}

/// Runs `spec.steps` steps, reporting to `observer` at its cadence.
pub fn integrate(
    map: FlowMap,
    model: &ForceModel,
    spec: &IntegratorSpec,
    observer: &mut dyn Observer,
) -> core::result::Result<FlowMap, Aborted> {
    if !(spec.dt > 0.0) || !spec.dt.is_finite() {
        return Err(Aborted {
            last_valid: map,
            step: 0,
            error: Error::Parameter(String::from("dt must be positive")),
        });
    }
    let cadence = observer.cadence().max(1);
    observer.observe(0, &map);
    let mut cur = map;
    let mut cache = None;
    for s in 1..=spec.steps {
        match step_cached(&cur, model, spec.scheme, spec.dt, &mut cache) {
            Ok(next) => cur = next,
            Err(error) => return Err(Aborted { last_valid: cur, step: s, error }),
        }
        if s % cadence == 0 || s == spec.steps {
            observer.observe(s, &cur);
        }
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, Boundary, LabelLattice};

    #[test]
    fn pressure_closed_forms() {
        let q = DensityPotential::Quadratic { a: 1.5 };
        assert!((pressure_of_density(2.0, &q, 2.0) - 1.5 * 4.0 / 2.0).abs() < 1e-14);
        let r = DensityPotential::Reference { kappa: 2.0, rho_as: 1.0, rho_ref: 1.0 };
        assert!(pressure_of_density(1.0, &r, 1.0).abs() < 1e-15);
        // dp/dρ at ρ_as equals κ ρ_as / (m ρ_ref)
        assert!((sound_speed_squared(1.0, &r, 1.0) - 2.0).abs() < 1e-14);
        let iso = DensityPotential::Isothermal { t: 0.3 };
        assert!((pressure_of_density(2.0, &iso, 1.0) - 0.6).abs() < 1e-14);
    }

    #[test]
    fn force_is_gradient_of_energy() {
        let lat = LabelLattice::cube(2, 0.0, 1.0, 6, Boundary::FixedWall).unwrap();
        let map = build_lattice(
            lat,
            |xi| 1.0 + 0.2 * xi[0],
            |xi| [xi[0] + 0.03 * (3.0 * xi[1]).sin(), xi[1] + 0.02 * xi[0] * xi[0], 0.0],
            |_| [0.0; 3],
            1.0,
        )
        .unwrap();
        let v = DensityPotential::Polytropic { a: 0.7, gamma: 1.4 };
        let f = barotropic_force(&map, &v).unwrap();
        let dv = map.lattice.cell_volume();
        let eps = 1e-6;
        for i in [0usize, 7, 14, 35] {
            for a in 0..2 {
                let mut mp = map.clone();
                mp.x[i][a] += eps;
                let mut mm = map.clone();
                mm.x[i][a] -= eps;
                let de = (internal_energy(&mp, &v).unwrap() - internal_energy(&mm, &v).unwrap()) / (2.0 * eps);
                assert!((f[i][a] + de / dv).abs() < 1e-7, "node {i} axis {a}: {} vs {}", f[i][a], -de / dv);
            }
        }
    }
}
