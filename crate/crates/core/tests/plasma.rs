use lagrangia_core::dynamics::DensityPotential;
use lagrangia_core::invariants::MaterialLoop;
use lagrangia_core::plasma::*;
use lagrangia_core::{build_lattice, Boundary, FlowMap, GridBoundary, GridGeometry, LabelLattice};
use std::f64::consts::PI;

fn uniform(dim: usize, n: usize, mass: f64, x: impl Fn([f64; 3]) -> [f64; 3], v: impl Fn([f64; 3]) -> [f64; 3]) -> FlowMap {
    let lat = LabelLattice::cube(dim, 0.0, 1.0, n, Boundary::Periodic).unwrap();
    build_lattice(lat, |_| 1.0, x, v, mass).unwrap()
}

fn langmuir(amp: f64) -> PlasmaState {
    let k = 2.0 * PI;
    let el = uniform(1, 64, 1.0, |xi| [xi[0] + amp * (k * xi[0]).sin(), 0.0, 0.0], |_| [0.0; 3]);
    let io = uniform(1, 64, 1836.0, |xi| xi, |_| [0.0; 3]);
    PlasmaState::new(el, io, 1.0, FieldSolver::Spectral { kmax: [8, 0, 0] }, true).unwrap().frozen()
}

#[test]
fn langmuir_frequency_and_energy() {
    let state = langmuir(0.01);
    let model = PlasmaModel::cold();
    let dt = 0.005;
    let h0 = plasma_hamiltonian(&state, &model).unwrap().total();
    let mut drift: f64 = 0.0;
    let mut prev = (0.0, f64::NAN);
    let mut crossings = vec![];
    integrate_plasma(state, &model, dt, 2600, |s, st| {
        if s <= 1000 {
            let h = plasma_hamiltonian(st, &model).unwrap().total();
            drift = drift.max(((h - h0) / h0).abs());
        }
        let d = st.electrons.x[16][0] - 0.25;
        let t = st.time();
        if prev.1 > 0.0 && d <= 0.0 {
            crossings.push(prev.0 + (t - prev.0) * prev.1 / (prev.1 - d));
        }
        prev = (t, d);
    })
    .unwrap();
    let omega = 2.0 * PI / (crossings[1] - crossings[0]);
    let want = 1.0;
    eprintln!("omega {omega}, energy drift {drift}");
    assert!((omega - want).abs() / want < 0.02);
    assert!(drift < 1e-5);
}

#[test]
fn gauss_law_reproduces_coulomb_energy() {
    let s = langmuir(0.05);
    let pts: Vec<_> = s.electrons.x.iter().chain(&s.ions.x).copied().collect();
    let phi = electrostatic_potential(&s, &pts);
    let w = s.electrons.lattice.cell_volume();
    let n = s.electrons.len();
    let half: f64 = 0.5 * s.charge * phi.iter().enumerate().map(|(i, p)| if i < n { -w * p } else { w * p }).sum::<f64>();
    let h = coulomb_energy(&s);
    assert!(h > 0.0);
    assert!((half - h).abs() < 1e-12 * h);
}

#[test]
fn uniform_neutral_plasma_is_a_fixed_point() {
    let el = uniform(2, 8, 1.0, |xi| xi, |_| [0.0; 3]);
    let io = uniform(2, 8, 10.0, |xi| xi, |_| [0.0; 3]);
    let s = PlasmaState::new(el, io, 1.0, FieldSolver::Spectral { kmax: [3, 3, 0] }, true).unwrap();
    let out = integrate_plasma(s.clone(), &PlasmaModel::cold(), 0.01, 20, |_, _| {}).unwrap();
    for (a, b) in out.electrons.x.iter().zip(&s.electrons.x) {
        assert!((a[0] - b[0]).abs() + (a[1] - b[1]).abs() < 1e-12);
    }
}

#[test]
fn counter_displaced_species_conserve_momentum() {
    let k = 2.0 * PI;
    let el = uniform(1, 32, 1.0, |xi| [xi[0] + 0.02 * (k * xi[0]).sin(), 0.0, 0.0], |_| [0.0; 3]);
    let io = uniform(1, 32, 5.0, |xi| [xi[0] - 0.02 * (k * xi[0]).sin(), 0.0, 0.0], |_| [0.0; 3]);
    let s = PlasmaState::new(el, io, 1.0, FieldSolver::Spectral { kmax: [6, 0, 0] }, true).unwrap();
    let mut worst: f64 = 0.0;
    let mut ion_moved = false;
    integrate_plasma(s, &PlasmaModel::cold(), 0.01, 300, |_, st| {
        worst = worst.max(total_momentum(st)[0].abs());
        ion_moved |= st.ions.p.iter().any(|p| p[0].abs() > 1e-4);
    })
    .unwrap();
    assert!(worst < 1e-12);
    assert!(ion_moved);
}

fn vortex(mass: f64, n: usize) -> FlowMap {
    let u0 = 0.05;
    uniform(
        2,
        n,
        mass,
        |xi| xi,
        move |xi| {
            let (dx, dy) = (xi[0] - 0.5, xi[1] - 0.5);
            let sg = 0.15;
            let g = (-(dx * dx + dy * dy) / (2.0 * sg * sg)).exp();
            [-u0 * dy / sg * g, u0 * dx / sg * g, 0.0]
        },
    )
}

#[test]
fn total_circulation_is_conserved_in_2d() {
    let el = vortex(1.0, 64);
    let io = vortex(20.0, 64);
    let s = PlasmaState::new(el, io, 1.0, FieldSolver::Spectral { kmax: [6, 6, 0] }, true).unwrap();
    let model = PlasmaModel {
        electrons: DensityPotential::Quadratic { a: 0.5 },
        ions: DensityPotential::Quadratic { a: 0.5 },
    };
    let lp = MaterialLoop::circle([0.5, 0.5, 0.0], 0.2, 64, 0, 1);
    let c0 = total_circulation(&s, &lp, &lp, 0.5).unwrap();
    assert!(c0.value.abs() > 0.0);
    let end = integrate_plasma(s, &model, 0.01, 300, |_, _| {}).unwrap();
    let c1 = total_circulation(&end, &lp, &lp, 0.5).unwrap();
    let drift = (c1.value - c0.value).abs() / c0.value.abs();
    eprintln!("total circulation {} -> {}, drift {drift}, separation {}", c0.value, c1.value, c1.separation);
    assert!(drift < 1e-3);
    assert!(!c1.incoherent);
}

#[test]
fn rigid_corotation_circulation() {
    let om = 0.3;
    let rot = move |xi: [f64; 3]| [-om * (xi[1] - 0.5), om * (xi[0] - 0.5), 0.0];
    let el = uniform(2, 32, 1.0, |xi| xi, rot);
    let io = uniform(2, 32, 7.0, |xi| xi, rot);
    let s = PlasmaState::new(el, io, 1.0, FieldSolver::Spectral { kmax: [2, 2, 0] }, true).unwrap();
    let r = 0.2;
    let lp = MaterialLoop::circle([0.5, 0.5, 0.0], r, 256, 0, 1);
    let c = total_circulation(&s, &lp, &lp, 0.1).unwrap();
    // the polygon with n sides encloses (n/2π) sin(2π/n) of the circle's area
    let n = 256.0;
    let want = 8.0 * 2.0 * PI * om * r * r * (n / (2.0 * PI)) * (2.0 * PI / n).sin();
    assert!((c.value - want).abs() < 1e-10 * want);
    let still = PlasmaState::new(uniform(2, 16, 1.0, |xi| xi, |_| [0.0; 3]), uniform(2, 16, 2.0, |xi| xi, |_| [0.0; 3]), 1.0, FieldSolver::Spectral { kmax: [2, 2, 0] }, true).unwrap();
    assert_eq!(total_circulation(&still, &lp, &lp, 0.1).unwrap().value, 0.0);
}

#[test]
fn debye_screening_decays_faster_than_coulomb() {
    let g = GridGeometry::cube(3, 0.0, 1.0, 32, GridBoundary::Periodic).unwrap();
    let kd2 = debye_wavenumber_squared(1.0, &DensityPotential::Isothermal { t: 0.01 }, 1.0, 1.0).unwrap();
    assert!((kd2 - 100.0).abs() < 1e-9);
    let src = [0.5, 0.5, 0.5];
    let scr = test_charge_potential(g, src, 1.0, kd2).unwrap();
    let bare = test_charge_potential(g, src, 1.0, 0.0).unwrap();
    // r·φ falls like exp(-kd r); the point source rings at the grid scale,
    // so the decay rate is fitted rather than checked node by node
    let pts: Vec<(f64, f64)> = (2..=10)
        .map(|i| {
            let r = i as f64 / 32.0;
            let v = scr.get(g.index([16 + i, 16, 16]), 0) * 4.0 * PI * r;
            assert!(v > 0.0);
            (r, v.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + kd2.sqrt()).abs() < 0.15 * kd2.sqrt(), "fitted decay {slope}");
    // the unscreened periodic solve is Coulomb-like near the charge
    let idx = g.index([18, 16, 16]);
    assert!(bare.get(idx, 0) > scr.get(idx, 0));
    assert!(debye_wavenumber_squared(1.0, &DensityPotential::Zero, 1.0, 1.0).is_err());
}
