//! Grid substrate: Fourier conventions, Hamiltonians, shifted solves, norm
//! estimation, eigenvalues and field I/O.

use contact_kk::bump::BumpProfile;
use contact_kk::grid::{
    self, apply_free_hamiltonian, apply_h_eps, operator_norm, read_field, solve_shifted, write_field, write_slice_csv,
    DenseResolvent, EigenOptions, FnMap, Grid, GridField, HamiltonianEps, SchrodingerOperator, SpectralOperator,
};
use contact_kk::model::SystemSpec;
use contact_kk::Error;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn parseval_and_round_trip() {
    let g = Grid::new(vec![16, 8], 5.0).unwrap();
    let psi = GridField::random_band_limited(&g, 1.0, &mut rng(1));
    let direct = g.cell_volume() * psi.values().iter().map(|v| v.norm_sqr()).sum::<f64>();
    let spectral: f64 = psi.spectrum().iter().map(|v| v.norm_sqr()).sum();
    assert!((direct - spectral).abs() < 1e-12 * direct);
    let back = GridField::from_spectrum(&g, &psi.spectrum());
    assert!(back.sub(&psi).norm() < 1e-12 * psi.norm());
}

#[test]
fn free_hamiltonian_on_plane_waves() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let l = 2.0 * std::f64::consts::PI;
    let g = Grid::cubic(2, l, 16).unwrap();
    let psi = GridField::from_fn(&g, |x| Complex64::from_polar(1.0, x[0] + 2.0 * x[1]));
    let h = apply_free_hamiltonian(&psi, &spec).unwrap();
    assert!(h.sub(&psi.scaled(c(2.5))).norm() < 1e-10 * psi.norm());
    let constant = GridField::from_fn(&g, |_| c(1.0));
    assert!(apply_free_hamiltonian(&constant, &spec).unwrap().norm() < 1e-12);
    let wrong = Grid::cubic(3, l, 4).unwrap();
    assert!(apply_free_hamiltonian(&GridField::zeros(&wrong), &spec).is_err());
}

#[test]
fn regularized_hamiltonian_is_symmetric_and_reduces_to_free() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 8.0, 32).unwrap();
    let h = HamiltonianEps::new(&spec, 1.0, &g, &BumpProfile::default()).unwrap();
    let mut r = rng(2);
    for _ in 0..50 {
        let phi = GridField::random_band_limited(&g, 1.0, &mut r);
        let psi = GridField::random_band_limited(&g, 1.0, &mut r);
        let a = phi.inner(&apply_h_eps(&psi, &h).unwrap());
        let b = psi.inner(&apply_h_eps(&phi, &h).unwrap());
        assert!((a - b.conj()).norm() < 1e-10 * phi.norm() * psi.norm());
    }
    let free = HamiltonianEps::new(&spec.with_coupling(0.0), 1.0, &g, &BumpProfile::default()).unwrap();
    let psi = GridField::random_band_limited(&g, 0.5, &mut r);
    let d = apply_h_eps(&psi, &free).unwrap().sub(&apply_free_hamiltonian(&psi, &spec).unwrap());
    assert!(d.norm() < 1e-12 * psi.norm());
}

#[test]
fn potential_energy_is_positive_and_tends_to_the_diagonal_integral() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 10.0, 512).unwrap();
    let profile = BumpProfile::default();
    let psi = GridField::from_fn(&g, |x| c((-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp()));
    // ∫|ψ(x,x)|² dx = ∫e^{−3x²} dx = √(π/3).
    let oracle = (std::f64::consts::PI / 3.0).sqrt();
    let mut last_err = f64::INFINITY;
    for eps in [0.4, 0.2, 0.1] {
        let h = HamiltonianEps::new(&spec, eps, &g, &profile).unwrap();
        let h0 = apply_free_hamiltonian(&psi, &spec).unwrap();
        let pot = psi.inner(&h0.sub(&apply_h_eps(&psi, &h).unwrap())).re / spec.g();
        assert!(pot > 0.0);
        let err = (pot - oracle).abs() / oracle;
        assert!(err < last_err);
        last_err = err;
    }
    assert!(last_err < 0.01, "{last_err}");
}

#[test]
fn regularization_errors() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 4.0, 16).unwrap();
    let profile = BumpProfile::default();
    assert!(matches!(HamiltonianEps::new(&spec, 0.1, &g, &profile), Err(Error::UnresolvedBump { .. })));
    assert!(matches!(HamiltonianEps::new(&spec, 2.5, &g, &profile), Err(Error::PotentialOverflowsBox { .. })));
}

#[test]
fn free_solve_matches_fourier_multiplier() {
    let spec = SystemSpec::non_interacting(vec![1.0, 2.0]).unwrap();
    let g = Grid::cubic(2, 8.0, 32).unwrap();
    let h = HamiltonianEps::new(&spec, 1.0, &g, &BumpProfile::default()).unwrap();
    let rhs = GridField::random_band_limited(&g, 0.8, &mut rng(3));
    for z in [Complex64::new(-1.0, 0.0), Complex64::new(-0.5, 2.0), Complex64::new(3.0, 1.0)] {
        let sol = solve_shifted(&h, z, &rhs, 1e-10).unwrap();
        let mult = grid::free_multiplier(&g, spec.masses());
        let expected: Vec<Complex64> = rhs.spectrum().iter().zip(&mult).map(|(r, k)| r / (k - z)).collect();
        let exp = GridField::from_spectrum(&g, &expected);
        assert!(sol.sub(&exp).norm() < 1e-9 * exp.norm(), "z = {z}");
    }
}

#[test]
fn interacting_solve_has_small_residual_and_matches_dense() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 4.0, 64).unwrap();
    let h = HamiltonianEps::new(&spec, 0.25, &g, &BumpProfile::default()).unwrap();
    let rhs = GridField::random_band_limited(&g, 1.0, &mut rng(4));
    let z = Complex64::new(-2.0, 0.0);
    let sol = solve_shifted(&h, z, &rhs, 1e-10).unwrap();
    let res = apply_h_eps(&sol, &h).unwrap().sub(&sol.scaled(z)).sub(&rhs);
    assert!(res.norm() < 1e-9 * rhs.norm());
    let dense = DenseResolvent::new(&h, z).unwrap().solve_field(&rhs);
    assert!(dense.sub(&sol).norm() < 1e-8 * dense.norm());
}

#[test]
fn norm_estimates_of_simple_maps() {
    let n = 50;
    let id = FnMap::new(n, n, |x: &[Complex64]| x.to_vec(), |x: &[Complex64]| x.to_vec());
    assert!((operator_norm(&id, 1e-12, 50, 2, 1).unwrap().norm - 1.0).abs() < 1e-12);
    let a: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * (k + 1) as f64 / n as f64).collect();
    let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mult = |x: &[Complex64]| x.iter().zip(&a).map(|(x, a)| x * a).collect::<Vec<_>>();
    let est = operator_norm(&FnMap::new(n, n, mult, mult), 1e-10, 2000, 3, 2).unwrap().norm;
    assert!((est - amax).abs() < 1e-6, "{est} vs {amax}");
    let u: Vec<Complex64> = (0..n).map(|k| Complex64::new(1.0 + k as f64, 0.5)).collect();
    let w: Vec<Complex64> = (0..30).map(|k| Complex64::new(0.0, (k as f64).cos())).collect();
    let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
    let nrm = |a: &[Complex64]| dot(a, a).re.sqrt();
    let fwd = |x: &[Complex64]| {
        let s = dot(&u, x);
        w.iter().map(|w| w * s).collect::<Vec<_>>()
    };
    let adj = |y: &[Complex64]| {
        let s = dot(&w, y);
        u.iter().map(|u| u * s).collect::<Vec<_>>()
    };
    let est = operator_norm(&FnMap::new(n, 30, fwd, adj), 1e-12, 50, 1, 3).unwrap().norm;
    assert!((est - nrm(&u) * nrm(&w)).abs() < 1e-8 * est);
}

#[test]
fn harmonic_oscillator_ground_state() {
    let g = Grid::cubic(1, 20.0, 128).unwrap();
    let potential = g.coordinates(0).iter().map(|x| 0.5 * x * x).collect();
    let op = SchrodingerOperator::new(&g, &[1.0], potential).unwrap();
    let opts = EigenOptions { shift: -1.0, krylov: 40, tol: 1e-10, max_attempts: 6, seed: 5 };
    let pairs = grid::lowest_eigenvalues(&op, 3, &opts).unwrap();
    for (k, p) in pairs.iter().enumerate() {
        assert!((p.value - (k as f64 + 0.5)).abs() < 1e-6, "level {k}: {}", p.value);
    }
}

#[test]
fn free_ground_state_is_zero() {
    let spec = SystemSpec::non_interacting(vec![1.0, 1.0]).unwrap();
    let g = Grid::cubic(2, 8.0, 32).unwrap();
    let h = HamiltonianEps::new(&spec, 1.0, &g, &BumpProfile::default()).unwrap();
    let opts = EigenOptions { shift: -0.5, krylov: 24, tol: 1e-10, max_attempts: 6, seed: 3 };
    let e = grid::lowest_eigenvalue(&h, &opts).unwrap();
    assert!(e.value.abs() < 1e-10);
    assert!(h.kinetic().iter().all(|k| *k >= 0.0));
}

#[test]
fn two_body_ground_state_extrapolates_to_delta_well() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(1, 20.0, 1024).unwrap();
    let (rows, e0) = grid::extrapolated_ground_state(&spec, &[0.4, 0.2, 0.1], &BumpProfile::default(), &g).unwrap();
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1), "deeper as ε shrinks: {rows:?}");
    assert!((e0 + 0.25).abs() < 0.02 * 0.25, "{e0}");
    let repulsive = spec.with_coupling(-1.0);
    let e = grid::relative_sector_ground_state(&repulsive, 0.2, &BumpProfile::default(), &g).unwrap();
    assert!(e >= -1e-6);
}

#[test]
fn binary_container_and_csv_slices() {
    let g = Grid::new(vec![4, 8], 3.0).unwrap();
    let psi = GridField::random_band_limited(&g, 1.0, &mut rng(6));
    let mut buf = Vec::new();
    write_field(&mut buf, &psi).unwrap();
    assert_eq!(&buf[0..4], b"CKKF");
    assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 2);
    let back = read_field(buf.as_slice()).unwrap();
    assert_eq!(back, psi);
    assert!(read_field(&buf[..buf.len() - 3]).is_err());
    let mut csv = Vec::new();
    write_slice_csv(&mut csv, &psi, 1, &[2, 0]).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 9);
}
