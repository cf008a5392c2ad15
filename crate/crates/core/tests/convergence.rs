//! Grid-refinement studies of the Eulerian residuals of deposited fields.
//!
//! Labels are refined faster than the grid (label spacing ~ 2h²) so that
//! the kernel aliasing error, which scales like (s/h)³ for TSC, falls below
//! the O(h²) truncation error of the centred differences.

use lagrangia_core::deposition::{continuity_residual, deposit_fields, euler_residual, Kernel};
use lagrangia_core::dynamics::{integrate, pressure_of_density, DensityPotential, ForceModel, IntegratorSpec, NoObserver, Scheme};
use lagrangia_core::dynamics::step_free;
use lagrangia_core::{build_lattice, Boundary, FlowMap, GridBoundary, GridField, GridGeometry, LabelLattice};

fn order(e: &[f64], h: &[f64]) -> Vec<f64> {
    (1..e.len()).map(|k| (e[k - 1] / e[k]).ln() / (h[k - 1] / h[k]).ln()).collect()
}

fn expansion_residual(n_grid: usize) -> (f64, f64) {
    let grid = GridGeometry::cube(1, -2.5, 2.5, n_grid, GridBoundary::Clamped).unwrap();
    let h = grid.spacing()[0];
    let n_labels = (2.0 / (2.0 * h * h)).round() as usize;
    let lat = LabelLattice::cube(1, -1.0, 1.0, n_labels, Boundary::FixedWall).unwrap();
    let sigma = 0.2_f64;
    let map = build_lattice(lat, |xi| (-xi[0] * xi[0] / (2.0 * sigma * sigma)).exp(), |xi| xi, |xi| xi, 1.0).unwrap();
    let t = 0.5;
    let dt = 0.25 * h;
    let snaps: Vec<FlowMap> = [t - dt, t, t + dt].iter().map(|&s| step_free(&map, s)).collect();
    let d: Vec<_> = snaps.iter().map(|m| deposit_fields(m, &grid, Kernel::Tsc).unwrap()).collect();
    let r = continuity_residual(&d[0].rho, &d[1].rho, &d[2].rho, &d[1].velocity, dt).unwrap();
    (h, r.l2)
}

#[test]
fn free_expansion_continuity_converges() {
    let mut hs = vec![];
    let mut es = vec![];
    for n in [81, 161, 321] {
        let (h, e) = expansion_residual(n);
        hs.push(h);
        es.push(e);
    }
    let p = order(&es, &hs);
    eprintln!("free expansion: residuals {es:?} orders {p:?}");
    assert!(p[p.len() - 1] >= 1.9);
}

struct Wave {
    h: f64,
    cont: f64,
    euler: f64,
}

fn sound_wave(n_grid: usize) -> Wave {
    let grid = GridGeometry::cube(2, 0.0, 1.0, n_grid, GridBoundary::Periodic).unwrap();
    let h = grid.spacing()[0];
    let nx = (1.0 / (2.0 * h * h)).round() as usize;
    let ny = 2 * n_grid;
    let lat = LabelLattice::new(2, [0.0; 3], [1.0, 1.0, 0.0], [nx, ny, 1], Boundary::Periodic).unwrap();
    let k = 2.0 * std::f64::consts::PI;
    let amp = 0.005;
    let v = DensityPotential::Reference { kappa: 1.0, rho_as: 1.0, rho_ref: 1.0 };
    let c = 1.0;
    let map = build_lattice(
        lat,
        |_| 1.0,
        |xi| [xi[0] + amp * (k * xi[0]).sin(), xi[1], 0.0],
        |xi| [-amp * k * c * (k * xi[0]).cos(), 0.0, 0.0],
        1.0,
    )
    .unwrap();
    let s = 1.0 / nx as f64;
    let dt_snap = 0.25 * h;
    let sub = (dt_snap / (0.5 * s)).ceil() as usize;
    let dti = dt_snap / sub as f64;
    let t0 = 0.1;
    let model = ForceModel::barotropic(v);
    let lead = ((t0 - dt_snap) / dti).round() as usize;
    let mut cur = integrate(map, &model, &IntegratorSpec { scheme: Scheme::Leapfrog, dt: dti, steps: lead }, &mut NoObserver).unwrap();
    let mut snaps = vec![cur.clone()];
    for _ in 0..2 {
        cur = integrate(cur, &model, &IntegratorSpec { scheme: Scheme::Leapfrog, dt: dti, steps: sub }, &mut NoObserver).unwrap();
        snaps.push(cur.clone());
    }
    let d: Vec<_> = snaps.iter().map(|m| deposit_fields(m, &grid, Kernel::Tsc).unwrap()).collect();
    let cont = continuity_residual(&d[0].rho, &d[1].rho, &d[2].rho, &d[1].velocity, dt_snap).unwrap().l2;
    let mut p = GridField::zeros(grid, 1);
    for i in 0..grid.len() {
        p.data[i] = pressure_of_density(d[1].rho.data[i], &v, 1.0);
    }
    let euler = euler_residual(&d[0].velocity, &d[1].velocity, &d[2].velocity, &d[1].rho, &p, dt_snap).unwrap().l2;
    Wave { h, cont, euler }
}

#[test]
fn sound_wave_residuals_converge() {
    let runs: Vec<Wave> = [16, 32, 64].iter().map(|&n| sound_wave(n)).collect();
    let hs: Vec<f64> = runs.iter().map(|w| w.h).collect();
    let pc = order(&runs.iter().map(|w| w.cont).collect::<Vec<_>>(), &hs);
    let pe = order(&runs.iter().map(|w| w.euler).collect::<Vec<_>>(), &hs);
    eprintln!("sound wave: continuity {:?} orders {pc:?}", runs.iter().map(|w| w.cont).collect::<Vec<_>>());
    eprintln!("sound wave: euler {:?} orders {pe:?}", runs.iter().map(|w| w.euler).collect::<Vec<_>>());
    assert!(pc[pc.len() - 1] >= 1.9);
    assert!(pe[pe.len() - 1] >= 1.5);
}
