//! Blocks of `Λ(z)`: limit multipliers, norm bounds, `ε`-convergence,
//! off-diagonal kernels and Neumann inversion.

use contact_kk::bump::{BumpProfile, PairFactor, PairLayout};
use contact_kk::grid::{Grid, LinearMap};
use contact_kk::lambda::{
    fit_order, invert_lambda, neumann_terms, overlap_class, verify_block_convergence, DiagonalBlock, ExplicitKernel,
    LambdaMatrix, LimitMultiplier, OffDiagonalBlock, OverlapClass, PairFrames,
};
use contact_kk::model::SystemSpec;
use contact_kk::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect()
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn continuum_limit_block_attains_the_diagonal_bound() {
    // μ = 1/2, g = 1, z = −4: 𝔅|g|/√|z| = 0.5/2 = 0.25, attained on the P = 0 slice.
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 8.0, 16).unwrap();
    let layout = PairLayout::new(&spec, &spec.pairs()[0], &g).unwrap();
    let b = DiagonalBlock::limit(&layout, &BumpProfile::default(), 8, 1.0, -4.0, LimitMultiplier::Continuum).unwrap();
    assert!((b.norm() - 0.25).abs() < 1e-14);
    assert!((b.inverse_complement_norm() - 4.0 / 3.0).abs() < 1e-13);
    assert!((spec.bounds().diagonal_bound(1.0, -4.0) - 0.25).abs() < 1e-15);
}

#[test]
fn lattice_multiplier_approaches_the_continuum_value() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let z = -4.0;
    let mut last = f64::INFINITY;
    for n in [32, 64, 128, 256] {
        let g = Grid::cubic(2, 10.0, n).unwrap();
        let layout = PairLayout::new(&spec, &spec.pairs()[0], &g).unwrap();
        let lat = layout.lattice_multiplier(z);
        let con = layout.continuum_multiplier(z);
        // P = 0 slice: the continuum value is √(μ/2)/√|z| = 0.25.
        let s0 = layout.slice_of(0);
        assert!((con[s0] - 0.25).abs() < 1e-15);
        let err = (lat[s0] - con[s0]).abs();
        assert!(lat[s0] < con[s0] && err < last, "N = {n}: {err}");
        last = err;
    }
    // The momentum cutoff leaves a tail of about 1/(π p_max) = 1/(80π).
    assert!(last < 0.02 * 0.25, "{last}");
}

#[test]
fn zero_epsilon_factor_block_equals_the_rank_one_limit() {
    let spec = SystemSpec::new(vec![1.0, 2.0, 0.5], 1.0).unwrap();
    let g = Grid::cubic(3, 6.0, 8).unwrap();
    let profile = BumpProfile::default();
    for sigma in spec.pairs().iter() {
        let layout = Arc::new(PairLayout::new(&spec, sigma, &g).unwrap());
        let f0 = PairFactor::new(layout.clone(), 0.0, &profile, 10).unwrap();
        let kernel = DiagonalBlock::from_factor(&f0, 1.0, -9.0).unwrap();
        let rank_one = DiagonalBlock::limit(&layout, &profile, 10, 1.0, -9.0, LimitMultiplier::Lattice).unwrap();
        assert!(kernel.distance(&rank_one).unwrap() < 1e-12);
        let x = random_vec(kernel.len(), 1);
        let d: Vec<Complex64> = kernel.apply(&x).iter().zip(rank_one.apply(&x)).map(|(a, b)| a - b).collect();
        assert!(vnorm(&d) < 1e-12 * vnorm(&x));
    }
}

#[test]
fn regularized_diagonal_blocks_respect_the_bound_and_converge() {
    let spec = SystemSpec::equal_masses(2, 1.0).unwrap();
    let g = Grid::cubic(2, 10.0, 64).unwrap();
    let profile = BumpProfile::default();
    let z = -4.0;
    let frames = PairFrames::new(&spec, &g).unwrap();
    for eps in [0.4, 0.1] {
        let f = frames.factors(eps, &profile, 24).unwrap();
        let b = DiagonalBlock::from_factor(&f[0], 1.0, z).unwrap();
        assert!(b.norm() <= 0.25, "eps {eps}: {}", b.norm());
        assert!(b.inverse_complement_norm() <= 4.0 / 3.0);
    }
    let report = verify_block_convergence(&frames, 0, None, z, &[0.4, 0.2, 0.1, 0.05], &profile, 24).unwrap();
    let norms: Vec<f64> = report.rows.iter().map(|r| r.norm).collect();
    assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    assert!(report.fitted_order.unwrap() >= 0.9);
    assert!(report.rows.iter().skip(1).all(|r| r.ratio.unwrap() < 0.6));
    let single = verify_block_convergence(&frames, 0, None, z, &[0.2], &profile, 24).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert!(single.fitted_order.is_none());
}

#[test]
fn explicit_kernel_constants_and_classes() {
    let s3 = SystemSpec::new(vec![1.0, 2.0, 3.0], 0.5).unwrap();
    let p = s3.pairs();
    let k = ExplicitKernel::new(&s3, &p[0], &p[1], -2.0).unwrap();
    assert_eq!(k.class(), OverlapClass::SharedParticle);
    assert!((k.constant() + 2f64.powf(1.5) * 0.5 * 6f64.sqrt()).abs() < 1e-14);
    assert!(k.eval(&[0.0, 0.3], &[0.1, 0.2]).unwrap() < 0.0);
    let s4 = SystemSpec::new(vec![1.0, 1.0, 2.0, 2.0], 1.0).unwrap();
    let p = s4.pairs();
    let (a, b) = (p[0], p[5]);
    assert_eq!(overlap_class(&a, &b).unwrap(), OverlapClass::Disjoint);
    let k = ExplicitKernel::new(&s4, &a, &b, -2.0).unwrap();
    assert!((k.constant() + 4.0 * 2.0).abs() < 1e-14);
    assert!(matches!(overlap_class(&a, &a), Err(Error::SameBlockRequested)));
    assert!(ExplicitKernel::new(&s4, &p[0], &p[1], -2.0).is_err(), "shared pairs need n = 3");
}

#[test]
fn off_diagonal_blocks_respect_the_bound_and_their_adjoint() {
    let z = -20.0;
    let profile = BumpProfile::default();
    let cases = [
        (SystemSpec::equal_masses(3, 1.0).unwrap(), 16usize, 0usize, 1usize),
        (SystemSpec::equal_masses(4, 1.0).unwrap(), 8, 0, 5),
    ];
    for (spec, n, s, v) in cases {
        let g = Grid::cubic(spec.n(), 8.0, n).unwrap();
        let frames = PairFrames::new(&spec, &g).unwrap();
        let bound = spec.bounds().offdiagonal_bound(1.0, z);
        for eps in [0.0, 0.25] {
            let f = frames.factors(eps, &profile, 12).unwrap();
            let p = spec.pairs();
            let blk = OffDiagonalBlock::new(&spec, &g, &p[s], &p[v], f[s].clone(), f[v].clone(), z).unwrap();
            let norm = blk.norm(3).unwrap();
            assert!(norm > 0.0 && norm <= bound, "n = {} eps {eps}: {norm} vs {bound}", spec.n());
            let x = random_vec(blk.dim_in(), 4);
            let y = random_vec(blk.dim_out(), 5);
            let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(a, b)| a.conj() * b).sum::<Complex64>();
            let (l, r) = (dot(&blk.apply(&x), &y), dot(&x, &blk.apply_adjoint(&y)));
            assert!((l - r).norm() < 1e-12 * l.norm().max(1.0));
        }
    }
}

#[test]
fn lambda_inverse_solves_the_block_system() {
    let spec = SystemSpec::equal_masses(3, 1.0).unwrap();
    let g = Grid::cubic(3, 8.0, 16).unwrap();
    let frames = PairFrames::new(&spec, &g).unwrap();
    let factors = frames.factors(0.2, &BumpProfile::default(), 12).unwrap();
    let m = LambdaMatrix::from_pair_factors(&spec, &g, &factors, -20.0).unwrap();
    let inv = invert_lambda(&m, 1e-10, false).unwrap();
    assert!(inv.ratio() < 1.0 && !inv.forced());
    let b = random_vec(m.len(), 6);
    let x = inv.apply(&b).unwrap();
    let r: Vec<Complex64> = m.apply(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
    assert!(vnorm(&r) < 1e-9 * vnorm(&b));
    for n in m.diagonal_norms().unwrap() {
        assert!(n <= spec.bounds().diagonal_bound(1.0, -20.0));
    }
}

#[test]
fn inversion_above_the_threshold_is_refused() {
    let spec = SystemSpec::equal_masses(3, 1.0).unwrap();
    let g = Grid::cubic(3, 8.0, 8).unwrap();
    let frames = PairFrames::new(&spec, &g).unwrap();
    let factors = frames.factors(0.2, &BumpProfile::default(), 8).unwrap();
    let m = LambdaMatrix::from_pair_factors(&spec, &g, &factors, -5.0).unwrap();
    assert!(
        matches!(invert_lambda(&m, 1e-8, false), Err(Error::AboveThreshold { z, z0 }) if z == -5.0 && z0 == -12.25)
    );
    let forced = invert_lambda(&m, 1e-8, true);
    if let Ok(inv) = forced {
        assert!(inv.forced());
    }
}

#[test]
fn neumann_term_counts_and_order_fits() {
    assert_eq!(neumann_terms(0.5, 1e-3).unwrap(), 11);
    assert_eq!(neumann_terms(0.0, 1e-3).unwrap(), 1);
    assert!(matches!(neumann_terms(1.0, 1e-3), Err(Error::SeriesDiverging { .. })));
    assert!(matches!(neumann_terms(0.999, 1e-12), Err(Error::NoConvergence { .. })));
    let xs = [0.4, 0.2, 0.1, 0.05];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
    assert!((fit_order(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
    assert!(fit_order(&[0.1], &[1.0]).is_none());
}
