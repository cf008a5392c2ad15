//! Label-space conservation laws on evolved flow maps.

use std::f64::consts::PI;

use lagrangia_core::deposition::{sample_fields, Kernel};
use lagrangia_core::dynamics::{integrate, step_free, DensityPotential, ForceModel, IntegratorSpec, NoObserver, Scheme};
use lagrangia_core::invariants::{canonical_fields, casimir, circulation, helicity_lagrangian, k_integrals, vorticity, MaterialLoop};
use lagrangia_core::random::{rng, SmoothField};
use lagrangia_core::{build_lattice, Boundary, FlowMap, GridBoundary, GridGeometry, LabelLattice, StencilOrder};

const SOUND: DensityPotential = DensityPotential::Quadratic { a: 0.5 };
/// Support radius of the test vortex.
const CORE: f64 = 0.45;

/// Compact vortex `Ω(r) = w0 (1 - r²/R²)⁴` at the centre of the unit torus,
/// peak speed 0.1 (Mach 0.1), in cyclostrophic balance: with `p = ρ²/2`,
/// `dρ/dr = v²/r`.
fn vortex(n: usize) -> FlowMap {
    let lat = LabelLattice::cube(2, 0.0, 1.0, n, Boundary::Periodic).unwrap().with_order(StencilOrder::Fourth);
    let w0 = 0.1 / (CORE / 3.0 * (8.0f64 / 9.0).powi(4));
    let q = |xi: [f64; 3]| {
        let (dx, dy) = (xi[0] - 0.5, xi[1] - 0.5);
        ((1.0 - (dx * dx + dy * dy) / (CORE * CORE)).max(0.0), dx, dy)
    };
    build_lattice(
        lat,
        |xi| 1.0 - w0 * w0 * CORE * CORE / 18.0 * q(xi).0.powi(9),
        |xi| xi,
        |xi| {
            let (s, dx, dy) = q(xi);
            let w = w0 * s.powi(4);
            [-w * dy, w * dx, 0.0]
        },
        1.0,
    )
    .unwrap()
}

fn run(map: FlowMap, dt: f64, steps: usize) -> FlowMap {
    integrate(map, &ForceModel::barotropic(SOUND), &IntegratorSpec { scheme: Scheme::Leapfrog, dt, steps }, &mut NoObserver).unwrap()
}

fn smooth_map(dim: usize, n: usize, seed: u64, amp: f64) -> FlowMap {
    smooth_map_k(dim, n, seed, amp, 2)
}

fn smooth_map_k(dim: usize, n: usize, seed: u64, amp: f64, kmax: i32) -> FlowMap {
    let lat = LabelLattice::cube(dim, 0.0, 1.0, n, Boundary::Periodic).unwrap();
    let mut r = rng(seed);
    let ext = lat.extent();
    let f: Vec<SmoothField> = (0..2 * dim).map(|_| SmoothField::random(&mut r, dim, [0.0; 3], ext, kmax, 1.0)).collect();
    let sx: Vec<f64> = f.iter().map(|g| amp / g.bound()).collect();
    build_lattice(
        lat,
        |_| 1.0,
        |xi| {
            let mut x = xi;
            for a in 0..dim {
                x[a] += sx[a] * f[a].value(xi);
            }
            x
        },
        |xi| {
            let mut v = [0.0; 3];
            for a in 0..dim {
                v[a] = sx[dim + a] * f[dim + a].value(xi);
            }
            v
        },
        1.0,
    )
    .unwrap()
}

fn max_drift(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let scale = a.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, c| m.max(c.abs()));
    let d = a.iter().zip(b).flat_map(|(u, v)| (0..3).map(move |k| (u[k] - v[k]).abs())).fold(0.0f64, f64::max);
    d / scale
}

#[test]
fn thompson_circulation_on_a_64_marker_loop() {
    let map = vortex(64);
    let lp = MaterialLoop::circle([0.5, 0.5, 0.0], 0.3, 64, 0, 1);
    let t0 = circulation(&map, &lp).unwrap();
    let h = 1.0 / 64.0;
    let end = run(map, 0.25 * h, 1000);
    let t1 = circulation(&end, &lp).unwrap();
    let drift = ((t1 - t0) / t0).abs();
    eprintln!("circulation {t0} -> {t1}, drift {drift:e}");
    assert!(drift < 1e-3);
}

#[test]
fn label_vorticity_is_frozen() {
    let map = smooth_map(2, 32, 3, 0.05);
    let r0 = vorticity(&map).unwrap();
    let free = step_free(&map, 0.7);
    let d = max_drift(&r0.values, &vorticity(&free).unwrap().values);
    eprintln!("free R drift {d:e}");
    assert!(d < 1e-6);

    let map = vortex(128);
    let r0 = vorticity(&map).unwrap();
    let end = run(map, 0.25 / 128.0, 400);
    let d = max_drift(&r0.values, &vorticity(&end).unwrap().values);
    eprintln!("barotropic R drift {d:e}");
    assert!(d < 1e-3);
}

#[test]
fn casimirs_in_2d() {
    let map = vortex(64);
    let g = GridGeometry::cube(2, 0.0, 1.0, 64, GridBoundary::Periodic).unwrap();
    let s0 = sample_fields(&map, &g).unwrap();
    let end = run(map, 0.25 / 64.0, 400);
    let s1 = sample_fields(&end, &g).unwrap();
    for n in 1..=3 {
        let a = casimir(&s0.rho, &s0.velocity, n).unwrap();
        let b = casimir(&s1.rho, &s1.velocity, n).unwrap();
        let d = (b.value - a.value).abs() / a.magnitude;
        eprintln!("I{n}: {} -> {}, drift {d:e}", a.value, b.value);
        assert!(d < 1e-3);
    }
}

/// ABC flow with A = B = C, a Beltrami field (curl v = k v).
fn beltrami(n: usize, u0: f64) -> FlowMap {
    let lat = LabelLattice::cube(3, 0.0, 1.0, n, Boundary::Periodic).unwrap();
    let k = 2.0 * PI;
    build_lattice(
        lat,
        |_| 1.0,
        |xi| xi,
        |xi| {
            let (x, y, z) = (k * xi[0], k * xi[1], k * xi[2]);
            [u0 * (z.sin() + y.cos()), u0 * (x.sin() + z.cos()), u0 * (y.sin() + x.cos())]
        },
        1.0,
    )
    .unwrap()
}

#[test]
fn helicity_of_a_beltrami_flow() {
    let n = 24;
    let u0 = 0.05;
    let map = beltrami(n, u0);
    let q0 = helicity_lagrangian(&map).unwrap();
    // curl v = k v, so Q = k ∫|v|² = 2π · 3 u0² over the unit cube
    assert!((q0 / (2.0 * PI * 3.0 * u0 * u0) - 1.0).abs() < 0.02);
    let end = run(map, 0.25 / n as f64, 200);
    let q1 = helicity_lagrangian(&end).unwrap();
    let d = ((q1 - q0) / q0).abs();
    eprintln!("helicity {q0} -> {q1}, drift {d:e}");
    assert!(d < 1e-3);
}

#[test]
fn k_integrals_in_free_flow() {
    let map = smooth_map(3, 12, 5, 0.05);
    let k0 = k_integrals(&map).unwrap();
    let k1 = k_integrals(&step_free(&map, 0.5)).unwrap();
    let scale = k0.second.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
    let d = k0.second.iter().flatten().zip(k1.second.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    eprintln!("K_jk drift {d:e}");
    assert!(d < 1e-3);
}

/// The Jacobian of the interpolated map is third order in the lattice
/// spacing, so the lattice is refined twice beyond the grid.
#[test]
fn canonical_identities_on_random_maps() {
    let g = GridGeometry::cube(2, 0.0, 1.0, 128, GridBoundary::Periodic).unwrap();
    for seed in [1u64, 2, 3] {
        let mut map = smooth_map_k(2, 256, seed, 0.03, 1);
        map.lattice = map.lattice.with_order(StencilOrder::Fourth);
        let r = canonical_fields(&map, &g, Kernel::Tsc, StencilOrder::Fourth).unwrap().residuals();
        eprintln!("seed {seed}: momentum {:e} metric {:e}", r.momentum, r.metric);
        assert!(r.momentum < 1e-6 && r.metric < 1e-6);
    }
}
