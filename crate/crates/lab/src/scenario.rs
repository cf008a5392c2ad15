//! Scenario files. Every table rejects unknown keys so a typo fails the run
//! instead of silently falling back to a default.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Module {
    Fluid,
    C2,
    Gravity,
    Plasma,
    StaticSolve,
    BoundCheck,
}

impl Module {
    pub fn name(self) -> &'static str {
        match self {
            Module::Fluid => "fluid",
            Module::C2 => "c2",
            Module::Gravity => "gravity",
            Module::Plasma => "plasma",
            Module::StaticSolve => "static-solve",
            Module::BoundCheck => "bound-check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub module: Module,
    /// Required whenever the initial condition draws random numbers.
    pub seed: Option<u64>,
    #[serde(default)]
    pub geometry: Geometry,
    pub initial: Initial,
    #[serde(default)]
    pub force: Force,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    pub plasma: Option<PlasmaSection>,
    pub bound: Option<BoundSection>,
    #[serde(default)]
    pub gates: Vec<Gate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    #[default]
    Periodic,
    Wall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stencil {
    #[default]
    Second,
    Fourth,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    #[serde(default = "two")]
    pub dim: usize,
    /// Lower corner; missing trailing axes are 0.
    #[serde(default)]
    pub lo: Vec<f64>,
    /// Upper corner; missing trailing axes are 1.
    #[serde(default)]
    pub hi: Vec<f64>,
    /// Label nodes per axis.
    #[serde(default = "thirty_two")]
    pub labels: usize,
    /// Eulerian nodes per axis for sampled diagnostics; defaults to `labels`.
    pub grid: Option<usize>,
    #[serde(default)]
    pub boundary: BoundaryKind,
    #[serde(default)]
    pub stencil: Stencil,
}

fn two() -> usize {
    2
}
fn thirty_two() -> usize {
    32
}
fn one() -> f64 {
    1.0
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { dim: 2, lo: vec![], hi: vec![], labels: 32, grid: None, boundary: BoundaryKind::Periodic, stencil: Stencil::Second }
    }
}

impl Geometry {
    pub fn corners(&self) -> Result<([f64; 3], [f64; 3]), LabError> {
        if !(1..=3).contains(&self.dim) {
            return Err(LabError::config("geometry.dim", "must be 1, 2 or 3"));
        }
        let mut lo = [0.0; 3];
        let mut hi = [1.0; 3];
        for (name, src, dst) in [("geometry.lo", &self.lo, &mut lo), ("geometry.hi", &self.hi, &mut hi)] {
            if src.len() > self.dim {
                return Err(LabError::config(name, "has more entries than geometry.dim"));
            }
            dst[..src.len()].copy_from_slice(src);
        }
        for a in 0..self.dim {
            if !(hi[a] > lo[a]) {
                return Err(LabError::config("geometry.hi", "must exceed geometry.lo on every axis"));
            }
        }
        Ok((lo, hi))
    }
}

/// Initial condition, selected by `kind`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Initial {
    /// Identity map with a constant velocity.
    Uniform {
        #[serde(default)]
        velocity: [f64; 3],
    },
    /// Longitudinal plane wave along the first axis.
    SoundWave {
        amplitude: f64,
        #[serde(default = "mode_one")]
        mode: u32,
    },
    /// Compact vortex at the box centre, density balanced for a quadratic potential.
    Vortex { speed: f64, radius: f64 },
    /// ABC flow with equal coefficients (3D).
    Beltrami { amplitude: f64 },
    /// Smooth random displacement and velocity.
    RandomSmooth {
        displacement: f64,
        velocity: f64,
        #[serde(default = "kmax_two")]
        kmax: i32,
    },
    /// Gaussian blob in free expansion, `v = ξ`.
    FreeExpansion { sigma: f64 },
    /// Two self-gravitating clumps on a circular orbit.
    Kepler { separation: f64, clump_mass: f64 },
    /// Rotating Kuzmin disk in virial balance.
    Kuzmin { rings: usize, per_ring: usize, scale: f64, total_mass: f64 },
    /// Cold-plasma Langmuir oscillation with frozen ions.
    Langmuir {
        amplitude: f64,
        #[serde(default = "mode_one")]
        mode: u32,
    },
    /// Random smooth C² doublet.
    Doublet { amplitude: f64 },
    /// Hopf configuration of integer degree.
    Hopf {
        radius: f64,
        degree: i32,
        #[serde(default = "one")]
        density: f64,
    },
    /// Axially symmetric rotating static solution.
    Tornado { profile: Profile },
}

fn mode_one() -> u32 {
    1
}
fn kmax_two() -> i32 {
    2
}

/// Radial density profile for the tornado solver.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    Constant { value: f64, r_max: f64, samples: usize },
    Gaussian { amplitude: f64, sigma: f64, r_max: f64, samples: usize },
    /// Two-column CSV `r, rho` with a header row.
    Csv { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    Quadratic { a: f64 },
    Polytropic { a: f64, gamma: f64 },
    Isothermal { t: f64 },
    Reference { kappa: f64, rho_as: f64, rho_ref: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum External {
    Uniform { g: [f64; 3] },
    Harmonic { omega: f64, center: [f64; 3] },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GravitySolverKind {
    #[default]
    Direct,
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravitySection {
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub softening: f64,
    #[serde(default)]
    pub solver: GravitySolverKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Force {
    /// Particle mass `m`.
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "zero_potential")]
    pub potential: Potential,
    pub external: Option<External>,
    pub gravity: Option<GravitySection>,
}

fn zero_potential() -> Potential {
    Potential::Zero
}

impl Default for Force {
    fn default() -> Self {
        Force { mass: 1.0, potential: Potential::Zero, external: None, gravity: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    #[default]
    Leapfrog,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integrator {
    #[serde(default)]
    pub scheme: SchemeKind,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub steps: usize,
}

fn default_dt() -> f64 {
    1e-3
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator { scheme: SchemeKind::Leapfrog, dt: default_dt(), steps: 0 }
    }
}

/// Optional time-series quantities beyond the per-module defaults.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// Largest change of the label vorticity since the start, relative to its maximum.
    Vorticity,
    /// `I_1..I_3` from sampled fields (2D).
    Casimirs,
    /// Label-space helicity (3D).
    Helicity,
    /// `K_jk` trace and off-diagonal norm (3D).
    KIntegrals,
    /// Gravitational virial residual.
    Virial,
    /// Hopf invariant of a 3D doublet.
    Hopf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    #[default]
    Binary,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "sixty_four")]
    pub markers: usize,
}

fn sixty_four() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    /// Steps between diagnostics rows.
    #[serde(default = "one_usize")]
    pub every: usize,
    #[serde(default)]
    pub quantities: Vec<Quantity>,
    /// Material loops whose circulation is recorded (label-space circles in the first two axes).
    #[serde(default)]
    pub loops: Vec<LoopSpec>,
    /// Steps between snapshots; none when absent.
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub snapshot_format: SnapshotFormat,
}

fn one_usize() -> usize {
    1
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics { every: 1, quantities: vec![], loops: vec![], snapshot_every: None, snapshot_format: SnapshotFormat::Binary }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Species {
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "zero_potential")]
    pub potential: Potential,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSolverSpec {
    Spectral { kmax: [usize; 3] },
    Direct { softening: f64 },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasmaSection {
    pub electrons: Species,
    pub ions: Species,
    #[serde(default = "one")]
    pub charge: f64,
    pub solver: FieldSolverSpec,
    #[serde(default)]
    pub frozen_ions: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    /// Random trial functions in the sweep.
    #[serde(default = "thirty_two")]
    pub trials: usize,
    /// Nodes per horizontal axis of the box `[-1, 1]²`.
    #[serde(default = "sixty_five")]
    pub nodes: usize,
    #[serde(default = "cylinder")]
    pub cylinder_radius: f64,
    #[serde(default = "eight")]
    pub subsample: usize,
}

fn sixty_five() -> usize {
    65
}
fn cylinder() -> f64 {
    0.8
}
fn eight() -> usize {
    8
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// `max |q(t) - q(0)| / |q(0)| <= limit`
    RelativeDrift,
    /// `max |q(t) - q(0)| <= limit`
    AbsoluteDrift,
    /// `min q >= limit`
    Min,
    /// `max q <= limit`
    Max,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::RelativeDrift => "relative-drift",
            Check::AbsoluteDrift => "absolute-drift",
            Check::Min => "min",
            Check::Max => "max",
        }
    }
}

/// Pass/fail check on one diagnostics column.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub column: String,
    pub check: Check,
    pub limit: f64,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let mut s = Self::parse(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // relative profile paths are resolved against the scenario file
        if let Initial::Tornado { profile: Profile::Csv { path: p } } = &mut s.initial {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(s)
    }

    pub fn seed(&self) -> Result<u64, LabError> {
        self.seed.ok_or_else(|| LabError::config("seed", "required by this initial condition"))
    }
}
