//! System specification, pair enumeration, pair-frame coordinates and the
//! closed-form bound constants.

use contact_kk::model::{bound_constants, enumerate_pairs, from_pair_frame, to_pair_frame, PairIndex, SystemSpec};
use contact_kk::Error;

#[test]
fn pair_enumeration_is_lexicographic_with_reduced_masses() {
    let spec = SystemSpec::new(vec![1.0, 1.0, 3.0], 1.0).unwrap();
    let pairs = enumerate_pairs(&spec);
    let labels: Vec<String> = pairs.iter().map(|p| p.label()).collect();
    assert_eq!(labels, ["(1,2)", "(1,3)", "(2,3)"]);
    let mus: Vec<f64> = pairs.iter().map(|p| p.mu).collect();
    assert_eq!(mus, [0.5, 0.75, 0.75]);
    assert_eq!(pairs[1].total_mass, 4.0);
    assert_eq!(enumerate_pairs(&SystemSpec::equal_masses(2, 1.0).unwrap()).len(), 1);
}

#[test]
fn pair_counts_are_binomial() {
    for n in 2..=8 {
        let spec = SystemSpec::equal_masses(n, 1.0).unwrap();
        let pairs = enumerate_pairs(&spec);
        assert_eq!(pairs.len(), n * (n - 1) / 2);
        let mut seen = std::collections::BTreeSet::new();
        for p in pairs.iter() {
            assert!(p.i < p.j && p.j < n);
            assert!(seen.insert((p.i, p.j)));
        }
    }
}

#[test]
fn reduced_mass_is_symmetric_and_below_both_masses() {
    let a = SystemSpec::new(vec![1.5, 0.4], 1.0).unwrap();
    let b = SystemSpec::new(vec![0.4, 1.5], 1.0).unwrap();
    let (pa, pb) = (a.pairs()[0], b.pairs()[0]);
    assert_eq!(pa.mu, pb.mu);
    assert_eq!(pa.total_mass, pb.total_mass);
    assert!(pa.mu < 0.4);
    assert!((pa.mu - 1.5 * 0.4 / 1.9).abs() < 1e-16);
}

#[test]
fn pair_frame_examples() {
    let spec = SystemSpec::equal_masses(3, 1.0).unwrap();
    let c = to_pair_frame(&[2.0, 0.0, 5.0], &spec.pairs()[0]);
    assert_eq!((c.r, c.center, c.spectators.clone()), (2.0, 1.0, vec![5.0]));
    let spec = SystemSpec::new(vec![1.0, 3.0], 1.0).unwrap();
    let c = to_pair_frame(&[4.0, 0.0], &spec.pairs()[0]);
    assert_eq!((c.r, c.center), (4.0, 1.0));
    assert_eq!(from_pair_frame(&c, &spec.pairs()[0]), vec![4.0, 0.0]);
}

#[test]
fn pair_frame_jacobian_is_one() {
    // Columns of the linear map x ↦ (r, R, spectators) for unequal masses.
    let spec = SystemSpec::new(vec![0.7, 2.0, 1.3], 1.0).unwrap();
    for sigma in spec.pairs().iter() {
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|k| {
                let mut e = vec![0.0; 3];
                e[k] = 1.0;
                let c = to_pair_frame(&e, sigma);
                vec![c.r, c.center, c.spectators[0]]
            })
            .collect();
        let m = |i: usize, j: usize| cols[j][i];
        let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        assert!((det.abs() - 1.0).abs() < 1e-14, "{}: {det}", sigma.label());
    }
}

#[test]
fn bound_constant_examples() {
    let b = bound_constants(&SystemSpec::equal_masses(3, 1.0).unwrap());
    assert_eq!((b.c_frak, b.k_const), (0.5, 1.0));
    assert!((b.z0 + 12.25).abs() < 1e-12);
    let b = bound_constants(&SystemSpec::equal_masses(2, 2.0).unwrap());
    assert!((b.z0 + 9.0).abs() < 1e-12);
    // K picks m² above unit mass and m^{3/2} below it.
    let heavy = bound_constants(&SystemSpec::new(vec![4.0, 1.0], 1.0).unwrap());
    assert_eq!(heavy.k_const, 16.0);
    let light = bound_constants(&SystemSpec::new(vec![0.25, 0.5], 1.0).unwrap());
    assert!((light.k_const - 0.5f64.powf(1.5)).abs() < 1e-15);
}

#[test]
fn threshold_scales_quadratically_and_decreases_with_coupling() {
    let base = SystemSpec::equal_masses(3, 1.0).unwrap();
    let mut last = 0.0;
    for g in [1e-3, 1e-2, 0.1, 1.0, 3.0] {
        let z0 = bound_constants(&base.with_coupling(g)).z0;
        assert!(z0 < last);
        assert!((z0 / (g * g) + 12.25).abs() < 1e-12);
        last = z0;
    }
}

#[test]
fn below_threshold_both_neumann_conditions_hold() {
    for masses in [vec![1.0, 1.0], vec![1.0, 2.0, 0.5], vec![1.0; 4]] {
        for g in [0.5, 1.0, 2.0] {
            let spec = SystemSpec::new(masses.clone(), g).unwrap();
            let b = spec.bounds();
            let n = spec.n() as f64;
            for factor in [1.0001, 1.5, 4.0, 100.0] {
                let z = factor * b.z0;
                let diag = b.diagonal_bound(g, z);
                let off = n * (n - 1.0) / 2.0 * b.offdiagonal_bound(g, z) / (1.0 - diag);
                assert!(diag < 1.0 && off < 1.0, "m={masses:?} g={g} z={z}");
            }
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(matches!(SystemSpec::new(vec![1.0], 1.0), Err(Error::InvalidSpec(_))));
    assert!(SystemSpec::new(vec![1.0, -1.0], 1.0).is_err());
    assert!(SystemSpec::new(vec![1.0, 1.0], 0.0).is_err());
    assert!(SystemSpec::with_count(3, vec![1.0, 1.0], 1.0).is_err());
    assert!(SystemSpec::non_interacting(vec![1.0, 1.0]).is_ok());
    let spec = SystemSpec::equal_masses(3, 1.0).unwrap();
    assert!(PairIndex::new(&spec, 1, 1).is_err());
    assert!(PairIndex::new(&spec, 0, 3).is_err());
    assert_eq!(PairIndex::new(&spec, 2, 0).unwrap().label(), "(1,3)");
}
