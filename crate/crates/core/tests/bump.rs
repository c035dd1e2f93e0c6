//! Interaction profile, dilations and the two factorizations of the pair
//! potentials.

use contact_kk::bump::{
    apply_a_eps, dilate, BumpProfile, CollocationFactor, Factorization, FactorizedHamiltonian, PairFactor, PairLayout,
};
use contact_kk::grid::{apply_h_eps, Grid, GridField, HamiltonianEps, SpectralOperator};
use contact_kk::model::SystemSpec;
use contact_kk::quad::integrate;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn random_vec(n: usize, r: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect()
}

#[test]
fn profile_normalization_for_several_radii() {
    for radius in [0.5, 1.0, 2.0] {
        let b = BumpProfile::new(radius).unwrap();
        let i = integrate(|x| b.potential(x), -radius, radius, 1e-15, 1e-13).unwrap();
        assert!((i.value - 1.0).abs() < 1e-10, "a = {radius}: {}", i.value);
        assert_eq!(b.value(radius), 0.0);
        assert_eq!(b.value(-1.5 * radius), 0.0);
        assert!(b.value(0.0) > b.value(0.5 * radius));
        let s = b.scaled(0.1);
        assert!((s.support_radius() - 0.1 * radius).abs() < 1e-15);
        assert!((s.amplitude(0.03).powi(2) - s.value(0.03)).abs() < 1e-12 * s.value(0.03));
    }
    assert!(BumpProfile::new(0.0).is_err());
    assert!(BumpProfile::new(f64::NAN).is_err());
}

#[test]
fn dilation_is_unitary_and_composes() {
    let g = Grid::cubic(1, 40.0, 512).unwrap();
    let phi = GridField::from_fn(&g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.3 * x[0] * (-x[0] * x[0]).exp()));
    for eps in [0.5, 2.0] {
        let d = dilate(&phi, eps).unwrap();
        assert!((d.norm() - phi.norm()).abs() < 1e-10 * phi.norm(), "eps {eps}");
    }
    let ab = dilate(&dilate(&phi, 0.8).unwrap(), 1.5).unwrap();
    let direct = dilate(&phi, 1.2).unwrap();
    assert!(ab.sub(&direct).norm() < 1e-9 * phi.norm());
    assert!(dilate(&phi, 0.1).is_err(), "support would leave the box");
    assert!(dilate(&phi, -1.0).is_err());
}

#[test]
fn collocation_factor_reproduces_the_grid_hamiltonian() {
    let spec = SystemSpec::new(vec![1.0, 2.0, 0.5], 0.7).unwrap();
    let g = Grid::cubic(3, 4.0, 16).unwrap();
    let profile = BumpProfile::default();
    let eps = 1.0;
    let h = HamiltonianEps::new(&spec, eps, &g, &profile).unwrap();
    let factors: Vec<CollocationFactor> =
        spec.pairs().iter().map(|p| CollocationFactor::new(&g, p, eps, &profile).unwrap()).collect();
    let fh = FactorizedHamiltonian::new(&spec, &g, factors.iter().map(|f| f as &dyn Factorization).collect()).unwrap();
    let psi = GridField::random_band_limited(&g, 1.0, &mut rng(1));
    let a = apply_h_eps(&psi, &h).unwrap();
    let b = GridField::from_spectrum(&g, &fh.apply(&psi.spectrum()));
    assert!(a.sub(&b).norm() < 1e-10 * a.norm());
}

#[test]
fn factors_satisfy_the_adjoint_relation() {
    let spec = SystemSpec::equal_masses(3, 1.0).unwrap();
    let g = Grid::cubic(3, 8.0, 8).unwrap();
    let profile = BumpProfile::default();
    let mut r = rng(2);
    let sigma = spec.pairs()[1];
    let layout = Arc::new(PairLayout::new(&spec, &sigma, &g).unwrap());
    let factors: Vec<Box<dyn Factorization>> = vec![
        Box::new(PairFactor::new(layout.clone(), 0.0, &profile, 12).unwrap()),
        Box::new(PairFactor::new(layout, 0.3, &profile, 12).unwrap()),
        Box::new(CollocationFactor::new(&g, &sigma, 2.0, &profile).unwrap()),
    ];
    for a in &factors {
        let x = random_vec(a.lab_len(), &mut r);
        let y = random_vec(a.chi_len(), &mut r);
        let lhs = dot(&a.forward(&x), &y);
        let rhs = dot(&x, &a.adjoint(&y));
        assert!((lhs - rhs).norm() < 1e-11 * (1.0 + lhs.norm()));
    }
}

#[test]
fn pair_factor_energy_matches_the_potential_integral() {
    // For ψ = exp(−(x₁² + 2x₂²)/2), integrating out the centre of mass gives
    // ⟨ψ, V_ε(x₁ − x₂)ψ⟩ = √(π/3) ∫V(r) exp(−2ε²r²/3) dr.
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 10.0, 128).unwrap();
    let profile = BumpProfile::default();
    let psi = GridField::from_fn(&g, |x| Complex64::new((-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp(), 0.0));
    let sigma = spec.pairs()[0];
    for eps in [0.8, 0.4, 0.1] {
        let oracle = (std::f64::consts::PI / 3.0).sqrt()
            * integrate(|r| profile.potential(r) * (-2.0 * eps * eps * r * r / 3.0).exp(), -1.0, 1.0, 1e-15, 1e-13)
                .unwrap()
                .value;
        let a = apply_a_eps(&psi, &spec, &sigma, eps, &profile).unwrap();
        let quad = dot(&a, &a).re;
        assert!((quad - oracle).abs() < 1e-8 * oracle, "eps {eps}: {quad} vs {oracle}");
    }
    // The node-sampled factor is a Riemann sum of the same integral.
    let col = CollocationFactor::new(&g, &sigma, 0.8, &profile).unwrap().forward(&psi.spectrum());
    let oracle = (std::f64::consts::PI / 3.0).sqrt()
        * integrate(|r| profile.potential(r) * (-2.0 * 0.64 * r * r / 3.0).exp(), -1.0, 1.0, 1e-15, 1e-13)
            .unwrap()
            .value;
    assert!((dot(&col, &col).re - oracle).abs() < 1e-4 * oracle);
}

#[test]
fn limit_factor_is_the_trace_times_the_amplitudes() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 8.0, 16).unwrap();
    let profile = BumpProfile::default();
    let layout = Arc::new(PairLayout::new(&spec, &spec.pairs()[0], &g).unwrap());
    let q = 10;
    let a0 = PairFactor::new(layout.clone(), 0.0, &profile, q).unwrap();
    let tiny = PairFactor::new(layout.clone(), 1e-9, &profile, q).unwrap();
    let c = random_vec(g.len(), &mut rng(3));
    let t = layout.trace(&c);
    let out = a0.forward(&c);
    for (s, ts) in t.iter().enumerate() {
        for (k, u) in a0.amplitudes().iter().enumerate() {
            assert!((out[s * q + k] - ts * u).norm() < 1e-13);
        }
    }
    let d: f64 = tiny.forward(&c).iter().zip(&out).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    assert!(d < 1e-7);
}

#[test]
fn fields_away_from_the_collision_plane_are_not_seen() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 8.0, 64).unwrap();
    let profile = BumpProfile::default();
    let sigma = spec.pairs()[0];
    let eps = 0.5;
    // Supported where |x₁ − x₂| > 1.5 > εa, so V_ε vanishes on it.
    let psi = GridField::from_fn(&g, |x| {
        let d = x[0] - x[1];
        let d = d - 8.0 * (d / 8.0).round();
        Complex64::new(if d.abs() > 1.5 { 1.0 } else { 0.0 }, 0.0)
    });
    let out = CollocationFactor::new(&g, &sigma, eps, &profile).unwrap().forward(&psi.spectrum());
    assert!(out.iter().all(|v| v.norm() < 1e-12));
}
