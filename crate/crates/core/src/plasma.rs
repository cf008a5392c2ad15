//! Two-species electrostatic plasma.
//!
//! Electrons (mass `m`, charge `-e`) and ions (mass `M`, charge `+e`) are
//! two flow maps coupled through the Coulomb energy
//! `H_C = (e²/2) ∬ q(x) G(x, y) q(y)` with `q = ρ_ion - ρ_el` and the
//! Heaviside-Lorentz kernel `G = 1/(4π|x - y|)`. The potential obeys
//! `-ΔΦ = e q`, so a cold electron fluid oscillates at `ω² = e²ρ/m`.
//!
//! Periodic boxes use a gridless spectral sum over a truncated set of
//! wavevectors; open domains use the softened pair sum. Either way the
//! species forces are the exact gradient of `H_C`, so leapfrog conserves
//! energy to symplectic accuracy and total momentum to round-off.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{barotropic_force, internal_energy, kinetic_energy, DensityPotential};
use crate::error::{Error, Result};
use crate::grid::{GridBoundary, GridField, GridGeometry};
use crate::invariants::{circulation, marker_states, MaterialLoop};
use crate::lattice::{Boundary, FlowMap};
use crate::linalg::{dot, sub, Vec3};

const PI: f64 = core::f64::consts::PI;
type C = Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldSolver {
    /// Fourier modes `|n_a| <= kmax[a]` of the periodic box.
    Spectral { kmax: [usize; 3] },
    /// Softened pair sum for open domains.
    Direct { softening: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlasmaState {
    pub electrons: FlowMap,
    pub ions: FlowMap,
    /// Charge unit `e`.
    pub charge: f64,
    pub solver: FieldSolver,
    /// Ions form an immobile background when set.
    pub frozen_ions: bool,
}

/// Barotropic potentials of the two species.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlasmaModel {
    pub electrons: DensityPotential,
    pub ions: DensityPotential,
}

impl PlasmaModel {
    pub fn cold() -> Self {
        PlasmaModel { electrons: DensityPotential::Zero, ions: DensityPotential::Zero }
    }
}

fn species_charge(map: &FlowMap) -> f64 {
    map.rho0.iter().sum::<f64>() * map.lattice.cell_volume()
}

impl PlasmaState {
    /// Checks the common domain and, when `neutral` is set, that both
    /// species carry the same number of particles.
    pub fn new(electrons: FlowMap, ions: FlowMap, charge: f64, solver: FieldSolver, neutral: bool) -> Result<Self> {
        let (a, b) = (&electrons.lattice, &ions.lattice);
        if a.dim != b.dim || a.boundary != b.boundary || a.lo != b.lo || a.hi != b.hi {
            return Err(Error::Parameter(String::from("species must share one spatial domain")));
        }
        if !(charge > 0.0) {
            return Err(Error::Parameter(String::from("charge unit must be positive")));
        }
        match solver {
            FieldSolver::Spectral { kmax } => {
                if a.boundary != Boundary::Periodic {
                    return Err(Error::Parameter(String::from("the spectral field solver needs periodic species")));
                }
                if (0..a.dim).any(|k| kmax[k] == 0) {
                    return Err(Error::Parameter(String::from("spectral solver needs at least one mode per axis")));
                }
            }
            FieldSolver::Direct { softening } => {
                if !(softening >= 0.0) {
                    return Err(Error::Parameter(String::from("softening must be non-negative")));
                }
                if a.boundary == Boundary::Periodic {
                    return Err(Error::Parameter(String::from("direct Coulomb sums have no periodic images")));
                }
            }
        }
        if neutral {
            let (qe, qi) = (species_charge(&electrons), species_charge(&ions));
            if (qe - qi).abs() > 1e-12 * qe.abs().max(qi.abs()) {
                return Err(Error::Parameter(String::from("plasma is not neutral")));
            }
        }
        Ok(PlasmaState { electrons, ions, charge, solver, frozen_ions: false })
    }

    pub fn frozen(mut self) -> Self {
        self.frozen_ions = true;
        self
    }

    pub fn time(&self) -> f64 {
        self.electrons.time
    }

    /// Electrons then ions as `(position, signed particle count)`.
    fn sources(&self) -> impl Iterator<Item = (Vec3, f64)> + '_ {
        let we = self.electrons.lattice.cell_volume();
        let wi = self.ions.lattice.cell_volume();
        let el = self.electrons.x.iter().zip(&self.electrons.rho0).map(move |(x, r)| (*x, -r * we));
        let io = self.ions.x.iter().zip(&self.ions.rho0).map(move |(x, r)| (*x, r * wi));
        el.chain(io)
    }
}

/// Half of the nonzero wavevectors (one of each `±n` pair).
struct Modes {
    dim: usize,
    kappa: Vec3,
    lo: Vec3,
    kmax: [usize; 3],
    list: Vec<[i32; 3]>,
    volume: f64,
}

impl Modes {
    fn new(map: &FlowMap, kmax: [usize; 3]) -> Self {
        let lat = &map.lattice;
        let ext = lat.extent();
        let mut kappa = [0.0; 3];
        let mut volume = 1.0;
        for a in 0..lat.dim {
            kappa[a] = 2.0 * PI / ext[a];
            volume *= ext[a];
        }
        let r = |a: usize| -> i32 { if a < lat.dim { kmax[a] as i32 } else { 0 } };
        let mut list = Vec::new();
        for n2 in -r(2)..=r(2) {
            for n1 in -r(1)..=r(1) {
                for n0 in -r(0)..=r(0) {
                    let n = [n0, n1, n2];
                    if n.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0) {
                        list.push(n);
                    }
                }
            }
        }
        Modes { dim: lat.dim, kappa, lo: lat.lo, kmax, list, volume }
    }

    fn k(&self, n: [i32; 3]) -> Vec3 {
        [n[0] as f64 * self.kappa[0], n[1] as f64 * self.kappa[1], n[2] as f64 * self.kappa[2]]
    }

    /// `e^{-i n κ (x - lo)}` for `n = -kmax..=kmax` on each axis.
    fn phases(&self, x: Vec3) -> [Vec<C>; 3] {
        let mut out: [Vec<C>; 3] = [vec![C::new(1.0, 0.0)], vec![C::new(1.0, 0.0)], vec![C::new(1.0, 0.0)]];
        for a in 0..self.dim {
            let km = self.kmax[a];
            let base = C::from_polar(1.0, -self.kappa[a] * (x[a] - self.lo[a]));
            let mut t = vec![C::new(1.0, 0.0); 2 * km + 1];
            for n in 1..=km {
                t[km + n] = t[km + n - 1] * base;
                t[km - n] = t[km + n].conj();
            }
            out[a] = t;
        }
        out
    }

    fn phase(&self, tab: &[Vec<C>; 3], n: [i32; 3]) -> C {
        let mut z = C::new(1.0, 0.0);
        for a in 0..self.dim {
            z *= tab[a][(n[a] + self.kmax[a] as i32) as usize];
        }
        z
    }

    fn charge_transform(&self, state: &PlasmaState) -> Vec<C> {
        let mut q = vec![C::new(0.0, 0.0); self.list.len()];
        for (x, w) in state.sources() {
            let tab = self.phases(x);
            for (m, n) in self.list.iter().enumerate() {
                q[m] += self.phase(&tab, *n) * w;
            }
        }
        q
    }
}

fn direct_energy(state: &PlasmaState, softening: f64) -> f64 {
    let src: Vec<(Vec3, f64)> = state.sources().collect();
    let eps2 = softening * softening;
    let parts = crate::par::map_indices(src.len(), |i| {
        let mut s = 0.0;
        for j in i + 1..src.len() {
            let d = sub(src[i].0, src[j].0);
            let r2 = dot(d, d) + eps2;
            if r2 > 0.0 {
                s += src[j].1 / r2.sqrt();
            }
        }
        s * src[i].1
    });
    state.charge * state.charge / (4.0 * PI) * parts.iter().sum::<f64>()
}

/// `H_C`. Spectral: `(e²/2V) Σ_{k≠0} |q̂_k|²/k²`; direct:
/// `(e²/4π) Σ_{i<j} q_i q_j / sqrt(r² + ε²)`.
pub fn coulomb_energy(state: &PlasmaState) -> f64 {
    let e2 = state.charge * state.charge;
    match state.solver {
        FieldSolver::Spectral { kmax } => {
            let modes = Modes::new(&state.electrons, kmax);
            let q = modes.charge_transform(state);
            // each listed mode stands for the pair ±k
            let s: f64 = modes.list.iter().zip(&q).map(|(n, q)| q.norm_sqr() / dot(modes.k(*n), modes.k(*n))).sum();
            e2 * s / modes.volume
        }
        FieldSolver::Direct { softening } => direct_energy(state, softening),
    }
}

/// Electrostatic potential `Φ` at `points`, normalised so that
/// `H_C = (e/2) Σ q_i Φ(x_i)`.
pub fn electrostatic_potential(state: &PlasmaState, points: &[Vec3]) -> Vec<f64> {
    let e = state.charge;
    match state.solver {
        FieldSolver::Spectral { kmax } => {
            let modes = Modes::new(&state.electrons, kmax);
            let q = modes.charge_transform(state);
            points
                .iter()
                .map(|x| {
                    let tab = modes.phases(*x);
                    let s: f64 = modes
                        .list
                        .iter()
                        .zip(&q)
                        .map(|(n, q)| 2.0 * (q * modes.phase(&tab, *n).conj()).re / dot(modes.k(*n), modes.k(*n)))
                        .sum();
                    e * s / modes.volume
                })
                .collect()
        }
        FieldSolver::Direct { softening } => {
            let src: Vec<(Vec3, f64)> = state.sources().collect();
            let eps2 = softening * softening;
            points
                .iter()
                .map(|x| {
                    e / (4.0 * PI)
                        * src
                            .iter()
                            .map(|(y, w)| {
                                let d = sub(*x, *y);
                                let r2 = dot(d, d) + eps2;
                                if r2 > 0.0 {
                                    w / r2.sqrt()
                                } else {
                                    0.0
                                }
                            })
                            .sum::<f64>()
                })
                .collect()
        }
    }
}

/// `ṗ` of every electron and ion from `-∂H_C/∂x`.
pub fn coulomb_forces(state: &PlasmaState) -> (Vec<Vec3>, Vec<Vec3>) {
    let e2 = state.charge * state.charge;
    let ne = state.electrons.len();
    let rho: Vec<f64> = state.electrons.rho0.iter().map(|r| -r).chain(state.ions.rho0.iter().copied()).collect();
    let all = match state.solver {
        FieldSolver::Spectral { kmax } => {
            let modes = Modes::new(&state.electrons, kmax);
            let q = modes.charge_transform(state);
            let pos: Vec<Vec3> = state.sources().map(|s| s.0).collect();
            crate::par::map_indices(pos.len(), |i| {
                let tab = modes.phases(pos[i]);
                let mut f = [0.0; 3];
                for (n, qk) in modes.list.iter().zip(&q) {
                    let k = modes.k(*n);
                    let s = 2.0 * (qk.conj() * modes.phase(&tab, *n)).im / dot(k, k);
                    for a in 0..3 {
                        f[a] += k[a] * s;
                    }
                }
                let c = -e2 * rho[i] / modes.volume;
                [f[0] * c, f[1] * c, f[2] * c]
            })
        }
        FieldSolver::Direct { softening } => {
            let src: Vec<(Vec3, f64)> = state.sources().collect();
            let eps2 = softening * softening;
            crate::par::map_indices(src.len(), |i| {
                let mut f = [0.0; 3];
                for (j, (y, w)) in src.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let d = sub(src[i].0, *y);
                    let r2 = dot(d, d) + eps2;
                    let s = w / (r2 * r2.sqrt());
                    for a in 0..3 {
                        f[a] += s * d[a];
                    }
                }
                let c = e2 * rho[i] / (4.0 * PI);
                [f[0] * c, f[1] * c, f[2] * c]
            })
        }
    };
    let mut all = all;
    let ions = all.split_off(ne);
    (all, ions)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlasmaEnergy {
    pub kinetic_electrons: f64,
    pub kinetic_ions: f64,
    pub internal_electrons: f64,
    pub internal_ions: f64,
    pub coulomb: f64,
    /// Transverse-field energy; identically zero in the electrostatic limit.
    pub transverse: f64,
}

impl PlasmaEnergy {
    pub fn total(&self) -> f64 {
        self.kinetic_electrons + self.kinetic_ions + self.internal_electrons + self.internal_ions + self.coulomb + self.transverse
    }
}

pub fn plasma_hamiltonian(state: &PlasmaState, model: &PlasmaModel) -> Result<PlasmaEnergy> {
    Ok(PlasmaEnergy {
        kinetic_electrons: kinetic_energy(&state.electrons),
        kinetic_ions: kinetic_energy(&state.ions),
        internal_electrons: internal_energy(&state.electrons, &model.electrons)?,
        internal_ions: internal_energy(&state.ions, &model.ions)?,
        coulomb: coulomb_energy(state),
        transverse: 0.0,
    })
}

fn forces(state: &PlasmaState, model: &PlasmaModel) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let (mut fe, mut fi) = coulomb_forces(state);
    for (f, b) in fe.iter_mut().zip(barotropic_force(&state.electrons, &model.electrons)?) {
        for a in 0..3 {
            f[a] += b[a];
        }
    }
    if !state.frozen_ions {
        for (f, b) in fi.iter_mut().zip(barotropic_force(&state.ions, &model.ions)?) {
            for a in 0..3 {
                f[a] += b[a];
            }
        }
    }
    Ok((fe, fi))
}

fn kick(map: &mut FlowMap, f: &[Vec3], h: f64) {
    for (p, fi) in map.p.iter_mut().zip(f) {
        for a in 0..3 {
            p[a] += h * fi[a];
        }
    }
}

fn drift(map: &mut FlowMap, dt: f64) {
    let m = map.mass;
    for i in 0..map.x.len() {
        let s = dt / (m * map.rho0[i]);
        for a in 0..3 {
            map.x[i][a] += s * map.p[i][a];
        }
    }
    map.time += dt;
}

fn leapfrog(state: &PlasmaState, model: &PlasmaModel, dt: f64, cache: &mut Option<(Vec<Vec3>, Vec<Vec3>)>) -> Result<PlasmaState> {
    let mut out = state.clone();
    let (fe, fi) = match cache.take() {
        Some(f) => f,
        None => forces(state, model)?,
    };
    kick(&mut out.electrons, &fe, 0.5 * dt);
    drift(&mut out.electrons, dt);
    if state.frozen_ions {
        out.ions.time += dt;
    } else {
        kick(&mut out.ions, &fi, 0.5 * dt);
        drift(&mut out.ions, dt);
    }
    let (fe, fi) = forces(&out, model)?;
    kick(&mut out.electrons, &fe, 0.5 * dt);
    if !state.frozen_ions {
        kick(&mut out.ions, &fi, 0.5 * dt);
    }
    *cache = Some((fe, fi));
    for m in [&out.electrons, &out.ions] {
        if m.x.iter().chain(m.p.iter()).any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(String::from("plasma state")));
        }
        m.check_orientation()?;
    }
    Ok(out)
}

/// One kick-drift-kick step of both species.
pub fn electrostatic_step(state: &PlasmaState, model: &PlasmaModel, dt: f64) -> Result<PlasmaState> {
    leapfrog(state, model, dt, &mut None)
}

/// `steps` leapfrog steps with force reuse; `observe` sees step 0 and every
/// later state.
pub fn integrate_plasma(
    state: PlasmaState,
    model: &PlasmaModel,
    dt: f64,
    steps: usize,
    mut observe: impl FnMut(usize, &PlasmaState),
) -> Result<PlasmaState> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(String::from("dt must be positive")));
    }
    observe(0, &state);
    let mut cur = state;
    let mut cache = None;
    for s in 1..=steps {
        cur = leapfrog(&cur, model, dt, &mut cache)?;
        observe(s, &cur);
    }
    Ok(cur)
}

pub fn total_momentum(state: &PlasmaState) -> Vec3 {
    let a = state.electrons.total_momentum();
    let b = state.ions.total_momentum();
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TotalCirculation {
    /// `m ∮ v_el·dx + M ∮ v_ion·dx`
    pub value: f64,
    pub electrons: f64,
    pub ions: f64,
    /// Largest marker separation between the two loops over the loop size.
    pub separation: f64,
    /// True when `separation` exceeds the coherence tolerance.
    pub incoherent: bool,
}

/// Mass-weighted sum of the species circulations around two loops that
/// start on a common contour.
pub fn total_circulation(state: &PlasmaState, electrons: &MaterialLoop, ions: &MaterialLoop, coherence: f64) -> Result<TotalCirculation> {
    if electrons.labels.len() != ions.labels.len() {
        return Err(Error::Shape(String::from("loops need the same number of markers")));
    }
    let ge = circulation(&state.electrons, electrons)?;
    let gi = circulation(&state.ions, ions)?;
    let me = marker_states(&state.electrons, electrons)?;
    let mi = marker_states(&state.ions, ions)?;
    let mut c = [0.0; 3];
    for (x, _) in &me {
        for a in 0..3 {
            c[a] += x[a] / me.len() as f64;
        }
    }
    let size = me.iter().map(|(x, _)| crate::linalg::norm(sub(*x, c))).fold(0.0, f64::max);
    let gap = me.iter().zip(&mi).map(|(a, b)| crate::linalg::norm(sub(a.0, b.0))).fold(0.0, f64::max);
    let separation = if size > 0.0 { gap / size } else { 0.0 };
    Ok(TotalCirculation {
        value: state.electrons.mass * ge + state.ions.mass * gi,
        electrons: ge,
        ions: gi,
        separation,
        incoherent: separation > coherence,
    })
}

/// Debye wavenumber² `e²ρ0 / (dp/dρ)` of a warm barotropic electron fluid.
pub fn debye_wavenumber_squared(rho0: f64, potential: &DensityPotential, mass: f64, charge: f64) -> Result<f64> {
    let dp = mass * crate::dynamics::sound_speed_squared(rho0, potential, mass);
    if !(dp > 0.0) {
        return Err(Error::Parameter(String::from("screening needs a warm electron fluid")));
    }
    Ok(charge * charge * rho0 / dp)
}

/// Static potential of a test charge `Q` at `source` on a periodic grid:
/// vacuum `Q/k²` when `kd2 = 0`, otherwise the linear warm-fluid response
/// `Q/(k² + k_D²)`. The vacuum `k = 0` mode is dropped (neutralising
/// background); the screened one is kept, since the electrons neutralise
/// the test charge themselves.
pub fn test_charge_potential(grid: GridGeometry, source: Vec3, q: f64, kd2: f64) -> Result<GridField> {
    if grid.boundary != GridBoundary::Periodic {
        return Err(Error::Parameter(String::from("test-charge potential needs a periodic grid")));
    }
    let ext = grid.extent();
    let vol: f64 = ext[..grid.dim].iter().product();
    let mut data = vec![C::new(0.0, 0.0); grid.len()];
    for (idx, d) in data.iter_mut().enumerate() {
        let c = grid.coords(idx);
        let mut k = [0.0; 3];
        for a in 0..grid.dim {
            k[a] = 2.0 * PI * crate::fft::freq(c[a], grid.shape[a]) as f64 / ext[a];
        }
        let k2 = dot(k, k);
        if k2 + kd2 > 0.0 {
            // Φ(x) = (1/V) Σ Φ̂_k e^{ik(x - s)}, inverted below with the grid sign
            *d = C::from_polar(q / ((k2 + kd2) * vol), -dot(k, sub(source, grid.lo)));
        }
    }
    crate::fft::fft_nd(&mut data, grid.shape, true)?;
    let mut out = GridField::zeros(grid, 1);
    for (o, d) in out.data.iter_mut().zip(&data) {
        *o = d.re;
    }
    Ok(out)
}
