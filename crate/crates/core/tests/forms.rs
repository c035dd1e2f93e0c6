//! Trace operators and the quadratic form: bounds, Fourier identities, exact
//! values for Gaussians, hermiticity, positivity and consistency with `H_ε`.

use contact_kk::bump::BumpProfile;
use contact_kk::forms::{
    apply_trace, evaluate_form, form_consistency, fourier_trace_identities, h1_norm_sq, quadratic_form, trace_bound,
    TraceOperator,
};
use contact_kk::grid::{Grid, GridField};
use contact_kk::model::SystemSpec;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn trace_bound_holds_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, pts) in [(2, 32), (3, 8)] {
        let spec = SystemSpec::new((1..=n).map(|k| k as f64).collect(), 1.0).unwrap();
        let g = Grid::cubic(n, 8.0, pts).unwrap();
        for _ in 0..20 {
            let psi = GridField::random_band_limited(&g, 0.7, &mut rng);
            for sigma in spec.pairs().iter() {
                let tb = trace_bound(&psi, sigma).unwrap();
                assert!(tb.holds(1e-12), "{tb:?}");
                assert!(tb.trace_sq <= tb.h1_sq);
            }
        }
    }
}

#[test]
fn fourier_identities_hold_to_rounding() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = SystemSpec::new(vec![1.0, 2.0, 0.5], 1.0).unwrap();
    let g = Grid::cubic(3, 6.0, 8).unwrap();
    let psi = GridField::random_band_limited(&g, 1.0, &mut rng);
    for sigma in spec.pairs().iter() {
        let id = fourier_trace_identities(&psi, sigma).unwrap();
        assert!(id.max() < 1e-10, "{}: {id:?}", sigma.label());
    }
}

#[test]
fn three_body_separable_trace() {
    // ψ = f(x₁ − x₂) h((x₁ + x₂)/2) k(x₃) traces onto f(0) h(R) k(y).
    let spec = SystemSpec::equal_masses(3, 1.0).unwrap();
    let g = Grid::cubic(3, 12.0, 32).unwrap();
    let psi = GridField::from_fn(&g, |x| {
        let (r, cm) = (x[0] - x[1], 0.5 * (x[0] + x[1]));
        c((-r * r).exp() * (-cm * cm).exp() * (-(x[2] - 0.5).powi(2)).exp())
    });
    let tr = TraceOperator::new(&g, &spec.pairs()[0]).unwrap();
    let t = tr.apply(&psi).unwrap();
    assert_eq!(t.grid().points(), &[64, 32]);
    for (f, v) in t.values().iter().enumerate() {
        let p = t.grid().position(f);
        let expected = (-p[0] * p[0]).exp() * (-(p[1] - 0.5).powi(2)).exp();
        // e^{−r²} is band-limited only to about 2e−8 at this spacing.
        assert!((v.re - expected).abs() < 1e-6, "{} vs {expected}", v.re);
    }
    let direct = tr.evaluate_on_nodes(&psi);
    assert!(direct.iter().zip(t.values()).all(|(a, b)| (a - b).norm() < 1e-10));
}

#[test]
fn gaussian_form_matches_its_closed_form() {
    // ψ = e^{−(x₁²+x₂²)}: kinetic part π/2, ‖τψ‖² = ∫e^{−4R²} = √π/2.
    let g = Grid::cubic(2, 10.0, 64).unwrap();
    let psi = GridField::from_fn(&g, |x| c((-(x[0] * x[0] + x[1] * x[1])).exp()));
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let t = apply_trace(&psi, &spec.pairs()[0]).unwrap();
    assert!((t.norm().powi(2) - PI.sqrt() / 2.0).abs() < 1e-12);
    for gc in [1.0, -0.5, 2.0] {
        let q = quadratic_form(&psi, &spec.with_coupling(gc)).unwrap();
        let exact = PI / 2.0 - gc * PI.sqrt() / 2.0;
        assert!((q - exact).abs() < 1e-10, "g = {gc}: {q} vs {exact}");
    }
}

#[test]
fn form_is_hermitian_and_repulsive_form_is_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = SystemSpec::new(vec![1.0, 1.5, 0.7], 0.8).unwrap();
    let g = Grid::cubic(3, 6.0, 8).unwrap();
    for _ in 0..10 {
        let phi = GridField::random_band_limited(&g, 0.8, &mut rng);
        let psi = GridField::random_band_limited(&g, 0.8, &mut rng);
        let a = evaluate_form(&phi, &psi, &spec).unwrap();
        let b = evaluate_form(&psi, &phi, &spec).unwrap();
        let scale = (h1_norm_sq(&phi) * h1_norm_sq(&psi)).sqrt();
        assert!((a - b.conj()).norm() < 1e-12 * scale);
        // Sesquilinear: t(φ, λψ) = λ t(φ, ψ).
        let l = Complex64::new(rng.gen::<f64>(), rng.gen::<f64>());
        assert!((evaluate_form(&phi, &psi.scaled(l), &spec).unwrap() - l * a).norm() < 1e-12 * scale);
        assert!(quadratic_form(&psi, &spec.with_coupling(-0.8)).unwrap() >= 0.0);
    }
    let free = SystemSpec::non_interacting(vec![1.0, 1.5, 0.7]).unwrap();
    let psi = GridField::random_band_limited(&g, 0.8, &mut rng);
    let h0 = contact_kk::grid::apply_free_hamiltonian(&psi, &free).unwrap();
    assert!((quadratic_form(&psi, &free).unwrap() - psi.inner(&h0).re).abs() < 1e-12 * h1_norm_sq(&psi));
}

#[test]
fn form_agrees_with_the_regularized_energies() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 6.0, 256).unwrap();
    let psi = GridField::from_fn(&g, |x| c((-(x[0] * x[0] + x[1] * x[1])).exp()));
    let fc = form_consistency(&psi, &spec, &[0.4, 0.2, 0.1], &BumpProfile::default()).unwrap();
    assert!(fc.relative < 0.01, "{fc:?}");
    assert!(form_consistency(&psi, &spec, &[], &BumpProfile::default()).is_err());
}
