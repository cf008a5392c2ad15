//! Two-component complex (C²) description of a barotropic fluid.
//!
//! A doublet `u = (u1, u2)` on a periodic grid defines
//! `ρ = ū u` and `v = (ū∇u - ∇ū u) / (2i ū u)`. The discrete Hamiltonian
//! `H = ΔV Σ [ m |j|² / (2(ρ + ε²)) + V(ρ) ]`, `j = Im(ū D u)` with centred
//! differences `D`, generates `u̇ = -(i/m) ∂H/∂ū`, which works out to
//!
//! `u̇ = -½ [v·Du + D·(v u)] - (i/m) (V'(ρ) - m|v|²/2) u`.
//!
//! The flow conserves `H` and the U(2) charges exactly in continuous time.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::DensityPotential;
use crate::error::{Error, Result};
use crate::grid::{GridBoundary, GridField, GridGeometry};
use crate::linalg::Vec3;

type C = Complex64;

/// Vacuum regularisation: `ε = VACUUM_EPS · mean √ρ`.
pub const VACUUM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ClebschDoublet {
    pub grid: GridGeometry,
    pub u: Vec<[C; 2]>,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EulerFields {
    pub rho: GridField,
    pub velocity: GridField,
}

/// `u = √ρ e^{iφ/2} (e^{-iψ/2} cos(α/2), e^{iψ/2} sin(α/2))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClebschAngles {
    pub grid: GridGeometry,
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Nodes where α is 0 or π and ψ is undefined.
    pub degenerate: Vec<bool>,
}

fn wrap_pi(a: f64) -> f64 {
    let t = core::f64::consts::TAU;
    a - t * (a / t).round()
}

impl ClebschDoublet {
    pub fn new(grid: GridGeometry, u: Vec<[C; 2]>, mass: f64) -> Result<Self> {
        if grid.boundary != GridBoundary::Periodic {
            return Err(Error::Parameter(String::from("C² fields live on periodic grids")));
        }
        if u.len() != grid.len() {
            return Err(Error::Shape(String::from("doublet length does not match the grid")));
        }
        if !(mass > 0.0) {
            return Err(Error::Parameter(String::from("mass must be positive")));
        }
        Ok(ClebschDoublet { grid, u, mass })
    }

    pub fn from_fn(grid: GridGeometry, mass: f64, f: impl Fn(Vec3) -> [C; 2]) -> Result<Self> {
        let u = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self::new(grid, u, mass)
    }

    pub fn from_angles(a: &ClebschAngles, mass: f64) -> Result<Self> {
        let u = (0..a.rho.len())
            .map(|i| {
                let s = a.rho[i].sqrt();
                let (h1, h2) = (0.5 * (a.phi[i] - a.psi[i]), 0.5 * (a.phi[i] + a.psi[i]));
                [
                    C::from_polar(s * (0.5 * a.alpha[i]).cos(), h1),
                    C::from_polar(s * (0.5 * a.alpha[i]).sin(), h2),
                ]
            })
            .collect();
        Self::new(a.grid, u, mass)
    }

    pub fn density(&self) -> Vec<f64> {
        self.u.iter().map(|u| u[0].norm_sqr() + u[1].norm_sqr()).collect()
    }

    fn eps2(&self, rho: &[f64]) -> f64 {
        let mean = rho.iter().map(|r| r.sqrt()).sum::<f64>() / rho.len() as f64;
        let e = VACUUM_EPS * mean;
        e * e
    }

    #[inline]
    fn d(&self, f: &[[C; 2]], i: usize, axis: usize) -> [C; 2] {
        let g = &self.grid;
        let a = g.neighbor(i, axis, -1).unwrap();
        let b = g.neighbor(i, axis, 1).unwrap();
        let s = 1.0 / (2.0 * g.spacing()[axis]);
        [(f[b][0] - f[a][0]) * s, (f[b][1] - f[a][1]) * s]
    }

    /// Current `j = Im(ū D u)` and velocity `j / (ρ + ε²)` at every node.
    fn currents(&self, u: &[[C; 2]]) -> (Vec<f64>, Vec<Vec3>, f64) {
        let dim = self.grid.dim;
        let rho: Vec<f64> = u.iter().map(|u| u[0].norm_sqr() + u[1].norm_sqr()).collect();
        let e2 = self.eps2(&rho);
        let v = (0..u.len())
            .map(|i| {
                let mut v = [0.0; 3];
                for a in 0..dim {
                    let du = self.d(u, i, a);
                    let j = (u[i][0].conj() * du[0] + u[i][1].conj() * du[1]).im;
                    v[a] = j / (rho[i] + e2);
                }
                v
            })
            .collect();
        (rho, v, e2)
    }

    pub fn project_euler(&self) -> EulerFields {
        let (rho, v, e2) = self.currents(&self.u);
        let mut r = GridField::zeros(self.grid, 1);
        r.data.copy_from_slice(&rho);
        let mut vel = GridField::zeros(self.grid, 3);
        for (i, vi) in v.iter().enumerate() {
            vel.data[3 * i..3 * i + 3].copy_from_slice(vi);
        }
        if rho.iter().any(|&r| r <= e2) {
            let mask: Vec<bool> = rho.iter().map(|&r| r > e2).collect();
            for (i, ok) in mask.iter().enumerate() {
                if !ok {
                    vel.data[3 * i..3 * i + 3].fill(0.0);
                }
            }
            vel.mask = Some(mask);
        }
        EulerFields { rho: r, velocity: vel }
    }

    /// Energy in the doublet form, `-m (ū∂u - ∂ū u)² / (8 ū u) + V`.
    pub fn hamiltonian(&self, v: &DensityPotential) -> f64 {
        let dim = self.grid.dim;
        let rho = self.density();
        let e2 = self.eps2(&rho);
        let mut h = 0.0;
        for i in 0..self.u.len() {
            let u = self.u[i];
            let mut z2 = C::new(0.0, 0.0);
            for a in 0..dim {
                let du = self.d(&self.u, i, a);
                let z = u[0].conj() * du[0] - du[0].conj() * u[0] + u[1].conj() * du[1] - du[1].conj() * u[1];
                z2 += z * z;
            }
            h += -self.mass * z2.re / (8.0 * (rho[i] + e2)) + v.value(rho[i]);
        }
        h * self.grid.cell_volume()
    }

    /// `du/dt` for the discrete Hamiltonian flow.
    pub fn rate(&self, u: &[[C; 2]], v: &DensityPotential) -> Vec<[C; 2]> {
        let dim = self.grid.dim;
        let m = self.mass;
        let (rho, vel, _) = self.currents(u);
        let vu: Vec<[[C; 2]; 3]> = (0..u.len())
            .map(|i| {
                let mut w = [[C::new(0.0, 0.0); 2]; 3];
                for a in 0..dim {
                    w[a] = [u[i][0] * vel[i][a], u[i][1] * vel[i][a]];
                }
                w
            })
            .collect();
        let g = &self.grid;
        let h = g.spacing();
        (0..u.len())
            .map(|i| {
                let mut adv = [C::new(0.0, 0.0); 2];
                let mut v2 = 0.0;
                for a in 0..dim {
                    let du = self.d(u, i, a);
                    let lo = g.neighbor(i, a, -1).unwrap();
                    let hi = g.neighbor(i, a, 1).unwrap();
                    for c in 0..2 {
                        let div = (vu[hi][a][c] - vu[lo][a][c]) / (2.0 * h[a]);
                        adv[c] += du[c] * vel[i][a] + div;
                    }
                    v2 += vel[i][a] * vel[i][a];
                }
                let phase = C::new(0.0, -(v.derivative(rho[i]) - 0.5 * m * v2) / m);
                [adv[0] * -0.5 + phase * u[i][0], adv[1] * -0.5 + phase * u[i][1]]
            })
            .collect()
    }

    /// U(2) charges `(t⁰, t¹, t², t³)`: `∫ ū u / 2` and `∫ ū σ^a/2 u`.
    pub fn u2_charges(&self) -> [f64; 4] {
        let mut t = [0.0; 4];
        for u in &self.u {
            let z = u[0].conj() * u[1];
            t[0] += 0.5 * (u[0].norm_sqr() + u[1].norm_sqr());
            t[1] += z.re;
            t[2] += z.im;
            t[3] += 0.5 * (u[0].norm_sqr() - u[1].norm_sqr());
        }
        let dv = self.grid.cell_volume();
        [t[0] * dv, t[1] * dv, t[2] * dv, t[3] * dv]
    }

    /// Angles with `φ` and `ψ` made continuous along the node sweep.
    pub fn extract_angles(&self) -> ClebschAngles {
        let g = self.grid;
        let n = g.len();
        let rho = self.density();
        let mut a1 = vec![0.0; n];
        let mut a2 = vec![0.0; n];
        let mut alpha = vec![0.0; n];
        let mut degenerate = vec![false; n];
        for i in 0..n {
            let (m1, m2) = (self.u[i][0].norm(), self.u[i][1].norm());
            alpha[i] = 2.0 * m2.atan2(m1);
            let c = g.coords(i);
            let prev = (0..g.dim).find(|&ax| c[ax] > 0).map(|ax| g.neighbor(i, ax, -1).unwrap());
            let tiny = 1e-12 * rho[i].sqrt().max(1e-300);
            let cont = |raw: f64, mag: f64, out: &mut [f64]| -> bool {
                let reference = prev.map(|p| out[p]);
                if mag <= tiny {
                    out[i] = reference.unwrap_or(0.0);
                    return true;
                }
                out[i] = match reference {
                    Some(r) => r + wrap_pi(raw - r),
                    None => raw,
                };
                false
            };
            let d1 = cont(self.u[i][0].arg(), m1, &mut a1);
            let d2 = cont(self.u[i][1].arg(), m2, &mut a2);
            degenerate[i] = d1 || d2;
        }
        let phi = (0..n).map(|i| a1[i] + a2[i]).collect();
        let psi = (0..n).map(|i| a2[i] - a1[i]).collect();
        ClebschAngles { grid: g, rho, phi, psi, alpha, degenerate }
    }

    /// Normalised degree of `u/|u|: R³ → S³`; one for the unit Hopf map.
    pub fn hopf_invariant(&self) -> Result<f64> {
        let g = self.grid;
        if g.dim != 3 {
            return Err(Error::Parameter(String::from("the Hopf invariant needs a 3D grid")));
        }
        let f: Vec<[f64; 4]> = self
            .u
            .iter()
            .map(|u| {
                let r = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
                [u[0].re / r, u[0].im / r, u[1].re / r, u[1].im / r]
            })
            .collect();
        if f.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::Vacuum(String::from("doublet vanishes somewhere on the grid")));
        }
        let h = g.spacing();
        let mut q = 0.0;
        for i in 0..g.len() {
            let mut m = [[0.0; 4]; 4];
            m[0] = f[i];
            for a in 0..3 {
                // fourth-order centred difference
                let at = |s: isize| f[g.neighbor(i, a, s).unwrap()];
                let (m2, m1, p1, p2) = (at(-2), at(-1), at(1), at(2));
                for c in 0..4 {
                    m[a + 1][c] = (8.0 * (p1[c] - m1[c]) - (p2[c] - m2[c])) / (12.0 * h[a]);
                }
            }
            q += det4(&m);
        }
        // the pulled-back volume form integrates to deg · |S³| = deg · 2π²
        Ok(q * g.cell_volume() / (2.0 * core::f64::consts::PI * core::f64::consts::PI))
    }
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut d = 0.0;
    for c in 0..4 {
        let mut sub = [[0.0; 3]; 3];
        for r in 1..4 {
            let mut k = 0;
            for cc in 0..4 {
                if cc != c {
                    sub[r - 1][k] = m[r][cc];
                    k += 1;
                }
            }
        }
        let d3 = sub[0][0] * (sub[1][1] * sub[2][2] - sub[1][2] * sub[2][1])
            - sub[0][1] * (sub[1][0] * sub[2][2] - sub[1][2] * sub[2][0])
            + sub[0][2] * (sub[1][0] * sub[2][1] - sub[1][1] * sub[2][0]);
        let s = if c % 2 == 0 { 1.0 } else { -1.0 };
        d += s * m[0][c] * d3;
    }
    d
}

/// Both energy forms: the doublet expression and `∫ [½ m ρ v² + V]` from
/// the projected Euler fields.
pub fn c2_hamiltonian(u: &ClebschDoublet, v: &DensityPotential) -> (f64, f64) {
    let e = u.project_euler();
    let mut h = 0.0;
    for i in 0..u.grid.len() {
        let r = e.rho.data[i];
        let w = e.velocity.vec(i);
        h += 0.5 * u.mass * r * crate::linalg::dot(w, w) + v.value(r);
    }
    (u.hamiltonian(v), h * u.grid.cell_volume())
}

/// One classical RK4 step of the doublet flow.
pub fn c2_step(u: &ClebschDoublet, v: &DensityPotential, dt: f64) -> Result<ClebschDoublet> {
    let axpy = |base: &[[C; 2]], k: &[[C; 2]], h: f64| -> Vec<[C; 2]> {
        base.iter().zip(k).map(|(b, k)| [b[0] + k[0] * h, b[1] + k[1] * h]).collect()
    };
    let k1 = u.rate(&u.u, v);
    let k2 = u.rate(&axpy(&u.u, &k1, 0.5 * dt), v);
    let k3 = u.rate(&axpy(&u.u, &k2, 0.5 * dt), v);
    let k4 = u.rate(&axpy(&u.u, &k3, dt), v);
    let next: Vec<[C; 2]> = (0..u.u.len())
        .map(|i| {
            let mut r = u.u[i];
            for c in 0..2 {
                r[c] += (k1[i][c] + k2[i][c] * 2.0 + k3[i][c] * 2.0 + k4[i][c]) * (dt / 6.0);
            }
            r
        })
        .collect();
    if next.iter().any(|w| !(w[0].re.is_finite() && w[0].im.is_finite() && w[1].re.is_finite() && w[1].im.is_finite())) {
        return Err(Error::NonFinite(String::from("doublet state")));
    }
    Ok(ClebschDoublet { grid: u.grid, u: next, mass: u.mass })
}

/// `v = ½ (∇φ - cos α ∇ψ)` by centred differences of the continuous angles.
pub fn velocity_from_angles(a: &ClebschAngles) -> GridField {
    let g = a.grid;
    let h = g.spacing();
    let mut out = GridField::zeros(g, 3);
    for i in 0..g.len() {
        for ax in 0..g.dim {
            let lo = g.neighbor(i, ax, -1).unwrap();
            let hi = g.neighbor(i, ax, 1).unwrap();
            // differences of multi-valued angles are taken on the circle
            let dphi = wrap_pi(a.phi[hi] - a.phi[lo]) / (2.0 * h[ax]);
            let dpsi = wrap_pi(a.psi[hi] - a.psi[lo]) / (2.0 * h[ax]);
            out.data[3 * i + ax] = 0.5 * (dphi - a.alpha[i].cos() * dpsi);
        }
    }
    out
}

/// Smooth doublet with moduli `1 + a f1`, `½ + a f2` and phases `a f3`,
/// `a f4`, where `|f| <= 1`; `ρ` stays away from zero for `amp < 0.5`.
pub fn random_doublet(grid: GridGeometry, mass: f64, seed: u64, amp: f64) -> Result<ClebschDoublet> {
    let mut r = crate::random::rng(seed);
    let ext = grid.extent();
    let f: Vec<_> = (0..4).map(|_| crate::random::SmoothField::random(&mut r, grid.dim, grid.lo, ext, 2, 1.0)).collect();
    let b: Vec<f64> = f.iter().map(|f| f.bound()).collect();
    ClebschDoublet::from_fn(grid, mass, |x| {
        [
            C::from_polar(1.0 + amp * f[0].value(x) / b[0], amp * f[2].value(x) / b[2]),
            C::from_polar(0.5 + amp * f[1].value(x) / b[1], amp * f[3].value(x) / b[3]),
        ]
    })
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Compactified inverse stereographic map of degree `degree`: the unit
/// vector `(n̂ sin f, cos f)` with `f(r) = degree·π (1 - S(r/R))`, `S` a
/// quintic smoothstep, written as `u1 = F0 + iF1`, `u2 = F2 + iF3` and
/// scaled by `√ρ`. Constant outside radius `R`.
pub fn hopf_configuration(grid: GridGeometry, center: Vec3, radius: f64, degree: i32, rho: f64, mass: f64) -> Result<ClebschDoublet> {
    if grid.dim != 3 {
        return Err(Error::Parameter(String::from("the Hopf configuration is three-dimensional")));
    }
    let s = rho.sqrt();
    ClebschDoublet::from_fn(grid, mass, |x| {
        let d = crate::linalg::sub(x, center);
        let r = crate::linalg::norm(d);
        let f = degree as f64 * core::f64::consts::PI * (1.0 - smoothstep(r / radius));
        let (sf, cf) = (f.sin(), f.cos());
        let n = if r > 0.0 { crate::linalg::scale(1.0 / r, d) } else { [0.0; 3] };
        [C::new(s * n[0] * sf, s * n[1] * sf), C::new(s * n[2] * sf, s * cf)]
    })
}
