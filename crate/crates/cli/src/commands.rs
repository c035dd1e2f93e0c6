//! The six subcommands. Each one validates its inputs, computes everything in
//! memory and returns a [`Report`]; writing happens afterwards.

use crate::report::{num, Report};
use contact_kk::config::RunConfig;
use contact_kk::forms;
use contact_kk::greens::{greens_closed, greens_quadrature};
use contact_kk::grid::{self, Grid, GridField, HamiltonianEps};
use contact_kk::model::SystemSpec;
use contact_kk::resolvent::{self, Discretization, Mode, ResolventAssembly, ResolventOptions, SweepOptions};
use contact_kk::verify;
use contact_kk::Result;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Agreement required between closed-form and quadrature Green's functions.
const KERNEL_AGREEMENT: f64 = 1e-8;
/// Energies below this count as negative in the repulsive spectrum check.
const NEGATIVE_ENERGY: f64 = -1e-6;
/// Fourier-trace identity tolerance.
const IDENTITY_TOL: f64 = 1e-8;
/// Form hermiticity tolerance (relative to `‖φ‖_{H¹}‖ψ‖_{H¹}`).
const HERMITICITY_TOL: f64 = 1e-10;
/// Form-vs-operator consistency tolerance.
const CONSISTENCY_TOL: f64 = 0.01;

fn masses_label(spec: &SystemSpec) -> String {
    spec.masses().iter().map(|m| num(*m)).collect::<Vec<_>>().join(":")
}

/// `converge`: norm-resolvent distances over the ε list.
pub fn converge(cfg: &RunConfig, force: bool) -> Result<Report> {
    let spec = cfg.spec()?;
    cfg.check_thresholds(&cfg.z_list, force)?;
    let c = &cfg.converge;
    let resolvent =
        ResolventOptions { nodes: c.nodes, force, profile: cfg.profile()?, ..ResolventOptions::with_tol(c.tol) };
    let opts = SweepOptions { tol: c.tol, steps: c.steps, seed: cfg.seed, resolvent };
    let report = resolvent::convergence_sweep(&spec, &cfg.z_list, &cfg.eps_list, &cfg.grid, &opts)?;
    let rows = report
        .records
        .iter()
        .map(|r| {
            vec![
                r.spec.n.to_string(),
                masses_label(&spec),
                num(r.spec.g),
                num(r.grid.box_length),
                r.grid.points.to_string(),
                num(r.z),
                num(r.eps),
                r.mode_pair.clone(),
                num(r.distance),
                r.iterations.to_string(),
            ]
        })
        .collect();
    Ok(Report {
        stem: "converge",
        header: vec!["n", "masses", "g", "box_length", "points", "z", "eps", "mode_pair", "distance", "iterations"],
        rows,
        passed: report.monotone(),
        body: json!({ "records": report.records, "series": report.series, "monotone": report.monotone() }),
    })
}

/// `spectrum`: ground energies per (ε, grid level) with ε → 0 extrapolation.
pub fn spectrum(cfg: &RunConfig) -> Result<Report> {
    let spec = cfg.spec()?;
    let profile = cfg.profile()?;
    let eps_list = cfg.spectrum.eps_list.clone().unwrap_or_else(|| cfg.eps_list.clone());
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    for level in &cfg.spectrum.levels {
        let (energies, extrapolated) = if spec.n() == 2 {
            let g1 = Grid::cubic(1, level.box_length, level.points)?;
            grid::extrapolated_ground_state(&spec, &eps_list, &profile, &g1)?
        } else {
            let gn = Grid::cubic(spec.n(), level.box_length, level.points)?;
            let opts = grid::EigenOptions::for_spec(&spec);
            let energies = eps_list
                .iter()
                .map(|&e| {
                    let h = HamiltonianEps::new(&spec, e, &gn, &profile)?;
                    Ok((e, grid::lowest_eigenvalue(&h, &opts)?.value))
                })
                .collect::<Result<Vec<_>>>()?;
            let (xs, ys): (Vec<f64>, Vec<f64>) = energies.iter().copied().unzip();
            (energies, contact_kk::quad::extrapolate_to_zero(&xs, &ys))
        };
        for (e, v) in &energies {
            rows.push(vec![num(level.box_length), level.points.to_string(), num(*e), num(*v), "computed".into()]);
        }
        rows.push(vec![
            num(level.box_length),
            level.points.to_string(),
            "0".into(),
            num(extrapolated),
            "extrapolated".into(),
        ]);
        levels.push(json!({ "grid": level, "energies": energies, "extrapolated": extrapolated }));
    }
    let finest = levels.last().and_then(|l| l["extrapolated"].as_f64()).unwrap_or(f64::NAN);
    let all_energies: Vec<f64> =
        rows.iter().filter(|r| r[4] == "computed").filter_map(|r| r[3].parse::<f64>().ok()).collect();
    let mu_max = spec.pairs().iter().map(|p| p.mu).fold(0.0, f64::max);
    let two_body = -0.5 * mu_max * spec.g() * spec.g();
    let (passed, comparison) = if spec.g() < 0.0 {
        let lowest = all_energies.iter().copied().fold(f64::INFINITY, f64::min);
        (lowest >= NEGATIVE_ENERGY, json!({ "kind": "repulsive", "lowest": lowest, "floor": NEGATIVE_ENERGY }))
    } else if spec.n() == 2 {
        let relative = (finest - two_body).abs() / two_body.abs();
        let ok = relative <= cfg.spectrum.tolerance;
        (
            ok,
            json!({ "kind": "two-body", "analytic": two_body, "relative": relative, "tolerance": cfg.spectrum.tolerance }),
        )
    } else {
        let deeper = finest < two_body;
        (true, json!({ "kind": "qualitative", "two_body_reference": two_body, "deeper_than_two_body": deeper }))
    };
    Ok(Report {
        stem: "spectrum",
        header: vec!["box_length", "points", "eps", "energy", "kind"],
        rows,
        passed,
        body: json!({ "levels": levels, "extrapolated": finest, "comparison": comparison }),
    })
}

/// `bounds`: the audit sweep.
pub fn bounds(cfg: &RunConfig) -> Result<Report> {
    let audits = verify::run_audits(&cfg.bounds.sweep(), cfg.seed)?;
    let rows = audits
        .iter()
        .map(|a| {
            vec![
                a.name.clone(),
                a.inputs.to_string(),
                num(a.claimed),
                num(a.measured),
                a.mc_ci.map(num).unwrap_or_default(),
                a.verdict().into(),
            ]
        })
        .collect();
    let passed = audits.iter().all(|a| a.passed());
    Ok(Report {
        stem: "bounds",
        header: vec!["name", "inputs", "claimed", "measured", "ci", "verdict"],
        rows,
        passed,
        body: json!({ "audits": audits, "failures": audits.iter().filter(|a| !a.passed()).count() }),
    })
}

/// `kernels`: Green's function tables by closed form and by quadrature.
pub fn kernels(cfg: &RunConfig) -> Result<Report> {
    let k = &cfg.kernels;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &d in &k.dims {
        for &z in &k.z {
            for &x in &k.x {
                let quad = greens_quadrature(d, z, x)?;
                if matches!(d, 1 | 3 | 4) {
                    let closed = greens_closed(d, z, x)?;
                    worst = worst.max((closed - quad).abs() / closed.abs());
                    rows.push(vec![d.to_string(), num(z), num(x), num(closed), "closed".into()]);
                }
                rows.push(vec![d.to_string(), num(z), num(x), num(quad), "quadrature".into()]);
            }
        }
    }
    Ok(Report {
        stem: "kernels",
        header: vec!["d", "z", "x", "value", "method"],
        rows,
        passed: worst <= KERNEL_AGREEMENT,
        body: json!({ "max_relative_difference": worst, "tolerance": KERNEL_AGREEMENT }),
    })
}

/// `kk-check`: block formula with node-sampled factors against direct
/// inversion of `H_ε` on random right-hand sides.
pub fn kk_check(cfg: &RunConfig, force: bool) -> Result<Report> {
    let spec = cfg.spec()?;
    let kk = &cfg.kk_check;
    cfg.check_thresholds(&[kk.z], force)?;
    let g = Grid::cubic(spec.n(), kk.grid.box_length, kk.grid.points)?;
    let opts = ResolventOptions {
        discretization: Discretization::Collocation,
        force,
        profile: cfg.profile()?,
        ..ResolventOptions::with_tol(kk.tol)
    };
    let direct = ResolventAssembly::new(&spec, &g, kk.z, Mode::DirectGrid(kk.eps), &opts)?;
    let blocks = ResolventAssembly::new(&spec, &g, kk.z, Mode::KonnoKuroda(kk.eps), &opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..kk.rhs {
        let psi = GridField::random_band_limited(&g, 1.0, &mut rng);
        let a = direct.apply(&psi)?;
        let b = blocks.apply(&psi)?;
        let dev = a.sub(&b).norm() / a.norm();
        worst = worst.max(dev);
        rows.push(vec![i.to_string(), num(dev)]);
    }
    Ok(Report {
        stem: "kk_check",
        header: vec!["rhs", "relative_deviation"],
        rows,
        passed: worst < kk.threshold,
        body: json!({
            "grid": kk.grid, "z": kk.z, "eps": kk.eps, "ratio": blocks.ratio(),
            "max_relative_deviation": worst, "threshold": kk.threshold,
        }),
    })
}

/// `forms`: trace bound, Fourier-trace identities, hermiticity, repulsive
/// positivity and (for two particles) form-vs-operator consistency.
pub fn forms(cfg: &RunConfig) -> Result<Report> {
    let spec = cfg.spec()?;
    let f = &cfg.forms;
    let g = Grid::cubic(spec.n(), f.grid.box_length, f.grid.points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let repulsive = spec.with_coupling(-spec.g().abs());
    for i in 0..f.fields {
        let psi = GridField::random_band_limited(&g, f.band, &mut rng);
        let phi = GridField::random_band_limited(&g, f.band, &mut rng);
        for sigma in spec.pairs().iter() {
            let tb = forms::trace_bound(&psi, sigma)?;
            let slack = tb.trace_sq - tb.relative_h1_sq;
            rows.push(vec!["trace-bound".into(), sigma.label(), i.to_string(), num(slack)]);
            if !tb.holds(1e-12) {
                failures.push(format!("trace bound, field {i}, pair {}", sigma.label()));
            }
            let id = forms::fourier_trace_identities(&psi, sigma)?;
            rows.push(vec!["trace-identities".into(), sigma.label(), i.to_string(), num(id.max())]);
            if id.max() > IDENTITY_TOL {
                failures.push(format!("trace identities, field {i}, pair {}", sigma.label()));
            }
        }
        let a = forms::evaluate_form(&phi, &psi, &spec)?;
        let b = forms::evaluate_form(&psi, &phi, &spec)?;
        let scale = (forms::h1_norm_sq(&phi) * forms::h1_norm_sq(&psi)).sqrt();
        let herm = (a - b.conj()).norm() / scale;
        rows.push(vec!["hermiticity".into(), "all".into(), i.to_string(), num(herm)]);
        if herm > HERMITICITY_TOL {
            failures.push(format!("hermiticity, field {i}"));
        }
        for (j, field) in [&psi, &phi].into_iter().enumerate() {
            let q = forms::quadratic_form(field, &repulsive)?;
            rows.push(vec!["repulsive-form".into(), "all".into(), (2 * i + j).to_string(), num(q)]);
            if q < 0.0 {
                failures.push(format!("repulsive positivity, field {}", 2 * i + j));
            }
        }
    }
    let consistency = if spec.n() == 2 {
        let cg = Grid::cubic(2, f.consistency_grid.box_length, f.consistency_grid.points)?;
        let psi = GridField::from_fn(&cg, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0));
        let c = forms::form_consistency(&psi, &spec, &f.consistency_eps, &cfg.profile()?)?;
        rows.push(vec!["form-consistency".into(), "all".into(), "0".into(), num(c.relative)]);
        if c.relative > CONSISTENCY_TOL {
            failures.push("form consistency".into());
        }
        Some(c)
    } else {
        None
    };
    Ok(Report {
        stem: "forms",
        header: vec!["property", "pair", "field", "value"],
        rows,
        passed: failures.is_empty(),
        body: json!({ "failures": failures, "consistency": consistency }),
    })
}
