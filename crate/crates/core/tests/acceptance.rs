//! Acceptance suite: one test per release gate, each printing a PASS line
//! with the measured quantities. Run with `--nocapture` to see them.
//!
//! The gates pin exact algebraic identities, analytic eigensolver oracles,
//! cover combinatorics, two seeded Monte Carlo frequency bounds, the
//! deterministic perturbative audits, recursion goldens and envelopes,
//! labeling properties, and the parameter solver's golden and rejection
//! behavior.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use eigenlab::harness::{
    audit_interior_transfer, audit_separated_decay, verify_init_step,
};
use eigenlab::lattice::{make_box, suitable_cover, Region, Site};
use eigenlab::localization::{classify_box, label_sites, BoxClass};
use eigenlab::operator::{
    boundary_coupling, build_hamiltonian, restrict, sample_disorder, DisorderField, Distribution,
};
use eigenlab::parameters::{solve_parameters, validate, ParameterSet};
use eigenlab::recursion::{level_spacing_bound, msa1_trace, msa3_trace, SpacingMode};
use eigenlab::rng;
use eigenlab::spectral::{eigensystem, poly_level_spacing};
use eigenlab::Error;

/// Random box, disorder, hopping, and proper sub-region, reproducible from
/// the index.
fn split_instance(index: u64) -> (Region, Region, DisorderField, f64) {
    let seed = rng::subseed(0xACC1, index);
    let dim = 1 + (index as usize % 2);
    let side = if dim == 1 {
        8 + (rng::site_hash(seed, &[1]) % 17) as i64
    } else {
        5 + (rng::site_hash(seed, &[1]) % 9) as i64
    };
    let center: Vec<f64> =
        (0..dim).map(|a| (rng::site_uniform(seed, &[2, a as i64]) * 7.0).floor()).collect();
    let theta = make_box(&center, side as f64).unwrap();

    let mut chosen: Vec<Site> = theta
        .region()
        .sites()
        .iter()
        .filter(|s| rng::site_uniform(seed, s) < 0.5)
        .cloned()
        .collect();
    if chosen.is_empty() {
        chosen.push(theta.region().sites()[0].clone());
    }
    if chosen.len() == theta.region().len() {
        chosen.pop();
    }
    let phi = Region::from_sites(dim, chosen).unwrap();

    let field = sample_disorder(
        theta.region(),
        Distribution::Uniform { lo: -1.0, hi: 1.0 },
        rng::subseed(seed, 1),
    )
    .unwrap();
    let epsilon = 0.05 + 0.95 * rng::site_uniform(seed, &[7]);
    (theta.region().clone(), phi, field, epsilon)
}

#[test]
fn a1_hopping_split_identity_is_exact() {
    let start = Instant::now();
    for index in 0..50 {
        let (theta, phi, field, epsilon) = split_instance(index);
        let rest = theta.difference(&phi);
        assert!(!phi.is_empty() && !rest.is_empty());

        let h_theta = build_hamiltonian(&field, epsilon).unwrap();
        let h_phi = restrict(&h_theta, &phi).unwrap();
        let h_rest = restrict(&h_theta, &rest).unwrap();
        let gamma = boundary_coupling(&phi, &theta, epsilon).unwrap();

        let n = theta.len();
        let mut sum = DMatrix::<f64>::zeros(n, n);
        for (part, hm) in [(&phi, h_phi.matrix()), (&rest, h_rest.matrix())] {
            let embed: Vec<usize> =
                part.sites().iter().map(|s| theta.index_of(s).unwrap()).collect();
            for a in 0..part.len() {
                for b in 0..part.len() {
                    sum[(embed[a], embed[b])] = hm[(a, b)];
                }
            }
        }
        sum += epsilon * gamma.matrix();

        for i in 0..n {
            for j in 0..n {
                let diff = h_theta.matrix()[(i, j)] - sum[(i, j)];
                assert!(
                    diff == 0.0,
                    "instance {index}: entry ({i},{j}) off by {diff:e} at epsilon {epsilon}"
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget is 1 s");
    println!("PASS acceptance 1: hopping split exact on 50 instances in {elapsed:?}");
}

fn reconstruction_and_completeness(op: &eigenlab::operator::FiniteOperator) {
    let es = eigensystem(op).unwrap();
    let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(es.eigenvalues.clone()));
    let reconstructed = &es.vectors * lambda * es.vectors.transpose();
    let defect = (&reconstructed - op.matrix()).norm();
    let scale = op.matrix().norm();
    assert!(
        defect <= 1e-9 * scale.max(1.0),
        "reconstruction defect {defect:e} vs scale {scale:e}"
    );
    let gram = &es.vectors * es.vectors.transpose();
    let n = es.n();
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!(
                (gram[(i, j)] - want).abs() <= 1e-10,
                "completeness defect {:e} at ({i},{j})",
                (gram[(i, j)] - want).abs()
            );
        }
    }
}

#[test]
fn a2_eigensolver_matches_analytic_oracles() {
    let mut tested = 0usize;

    // Zero-potential chains: eigenvalues -2 eps cos(k pi / (n+1)), k = 1..n.
    for n in [10usize, 50, 200] {
        let region = Region::from_sites(1, (0..n as i64).map(|i| vec![i]).collect()).unwrap();
        let field = DisorderField::from_values(region, vec![0.0; n]).unwrap();
        let eps = 1.0;
        let op = build_hamiltonian(&field, eps).unwrap();
        let es = eigensystem(&op).unwrap();
        for k in 1..=n {
            let exact = -2.0 * eps * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            let got = es.eigenvalues[k - 1];
            assert!(
                (got - exact).abs() <= 1e-9,
                "chain n={n}, k={k}: {got} vs {exact}"
            );
        }
        reconstruction_and_completeness(&op);
        tested += 1;
    }

    // Two sites, potentials 0 and 1, hopping 0.1.
    let region2 = Region::from_sites(1, vec![vec![0], vec![1]]).unwrap();
    let field2 = DisorderField::from_values(region2, vec![0.0, 1.0]).unwrap();
    let op2 = build_hamiltonian(&field2, 0.1).unwrap();
    let es2 = eigensystem(&op2).unwrap();
    let root = 1.04f64.sqrt();
    assert!((es2.eigenvalues[0] - (1.0 - root) / 2.0).abs() <= 1e-9);
    assert!((es2.eigenvalues[1] - (1.0 + root) / 2.0).abs() <= 1e-9);
    let t = -10.0 * (1.0 - root) / 2.0;
    let ground_tail = t.abs() / (1.0 + t * t).sqrt();
    assert!((ground_tail - 0.09853761796664223).abs() <= 1e-15);
    assert!(
        (es2.amplitude(0, 1) - ground_tail).abs() <= 1e-9,
        "ground-state tail {} vs analytic {}",
        es2.amplitude(0, 1),
        ground_tail
    );
    reconstruction_and_completeness(&op2);
    tested += 1;

    // Disordered operators, both dimensions, including zero hopping.
    for (dim, side, eps, salt) in
        [(1usize, 40.0, 0.3, 11u64), (2, 8.0, 0.2, 12), (1, 25.0, 0.0, 13)]
    {
        let bx = make_box(&vec![0.0; dim], side).unwrap();
        let field = sample_disorder(
            bx.region(),
            Distribution::Uniform { lo: 0.0, hi: 1.0 },
            rng::subseed(0xACC2, salt),
        )
        .unwrap();
        let op = build_hamiltonian(&field, eps).unwrap();
        reconstruction_and_completeness(&op);
        tested += 1;
    }

    println!("PASS acceptance 2: eigensolver oracles on {tested} operators");
}

#[test]
fn a3_covers_tile_interiors_and_obey_count_bounds() {
    let pairs_1d: [(i64, i64); 15] = [
        (200, 20),
        (60, 10),
        (66, 11),
        (120, 20),
        (126, 14),
        (90, 15),
        (72, 12),
        (210, 30),
        (140, 14),
        (110, 11),
        (300, 50),
        (150, 25),
        (84, 12),
        (96, 16),
        (180, 18),
    ];
    let pairs_2d: [(i64, i64); 5] = [(200, 20), (72, 12), (66, 11), (90, 15), (60, 10)];

    let mut checked = 0usize;
    for (dim, pairs) in [(1usize, &pairs_1d[..]), (2, &pairs_2d[..])] {
        for &(l, ell) in pairs {
            assert!(ell * 6 <= l, "pair ({l},{ell}) violates the sparseness premise");
            let origin = vec![0.0; dim];
            let cover = suitable_cover(&origin, l as f64, ell as f64).unwrap();
            let parent = make_box(&origin, l as f64).unwrap();

            assert!(cover.interiors_cover_parent().unwrap(), "interiors miss ({l},{ell},d={dim})");
            assert_eq!(
                cover.union_of_cells().unwrap(),
                *parent.region(),
                "cells leak or miss for ({l},{ell},d={dim})"
            );

            let (num, den) = cover.rho();
            assert!(3 * den <= 5 * num && 5 * num <= 4 * den, "rho {num}/{den} out of range");
            assert_eq!(
                ((l - ell) * den) % (num * ell),
                0,
                "grid step not integral for ({l},{ell})"
            );
            let axis = (l - ell) * den / (num * ell) + 1;
            assert_eq!(cover.len() as i64, axis.pow(dim as u32));
            assert!(l <= axis * ell, "count lower bound fails for ({l},{ell},d={dim})");
            assert!(axis * ell <= 2 * l, "count upper bound fails for ({l},{ell},d={dim})");
            checked += 1;

            if l == 200 && ell == 20 {
                assert_eq!((num, den), (3, 4));
                assert_eq!(cover.len(), 13usize.pow(dim as u32));
            }
        }
    }
    assert_eq!(checked, 20);
    println!("PASS acceptance 3: 20 covers tile exactly within the count bounds");
}

#[test]
fn a4_initial_scale_bound_verified_by_monte_carlo() {
    let start = Instant::now();
    let comp = verify_init_step(1, 100.0, 3.0, 500, 2026).unwrap();
    let elapsed = start.elapsed();

    assert!((comp.epsilon - 0.25e-6).abs() <= 1e-18);
    assert!((comp.prob_lower - 0.979598).abs() <= 1e-9);
    assert!((comp.threshold - 0.96063).abs() <= 1e-4);
    assert!(
        comp.min_frequency >= 0.9606,
        "frequency {} below 0.9606",
        comp.min_frequency
    );
    assert!(comp.pass);
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget is 60 s");
    println!(
        "PASS acceptance 4: frequencies {:?} >= {:.6} in {elapsed:?}",
        comp.frequencies, comp.threshold
    );
}

#[test]
fn a5_level_spacing_bound_verified_by_monte_carlo() {
    let bx = make_box(&[0.0], 100.0).unwrap();
    let n_sites = bx.region().len();
    assert_eq!(n_sites, 101);

    let sb = level_spacing_bound(100.0, n_sites, 1.0, 1.0, 0.1, 1.0, 1, SpacingMode::Poly {
        q: 3.0,
    })
    .unwrap();
    assert!((sb.bound - 0.9551156).abs() <= 1e-9 * 0.9551156);

    let n = 500u64;
    let threshold = sb.bound - 3.0 * (sb.bound * (1.0 - sb.bound) / n as f64).sqrt();
    let successes: u64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let field = sample_disorder(
                bx.region(),
                Distribution::Uniform { lo: 0.0, hi: 1.0 },
                rng::subseed(777, i),
            )
            .unwrap();
            let op = build_hamiltonian(&field, 0.1).unwrap();
            let es = eigensystem(&op).unwrap();
            u64::from(poly_level_spacing(&es.eigenvalues, 100.0, 3.0).ok)
        })
        .sum();
    let frequency = successes as f64 / n as f64;
    assert!(
        frequency >= threshold,
        "spacing frequency {frequency} below threshold {threshold}"
    );
    println!(
        "PASS acceptance 5: spacing frequency {frequency} >= {threshold:.6} (bound {})",
        sb.bound
    );
}

#[test]
fn a6_perturbative_audits_pass_deterministically() {
    // 21-site chain with exactly 1/21-separated potential.
    let chain = make_box(&[0.0], 20.0).unwrap();
    let values: Vec<f64> = (0..21).map(|i| i as f64 / 21.0).collect();
    let field = DisorderField::from_values(chain.region().clone(), values).unwrap();
    let eta = 1.0 / 21.0;
    let audit = audit_separated_decay(&chain, &field, eta, eta / 8.0).unwrap();
    assert_eq!(audit.gap_checks, 420);
    assert_eq!(audit.decay_checks, 441);
    assert!(audit.gap_violations.is_empty() && audit.decay_violations.is_empty());
    assert!(audit.pass);

    // Two sites, unit separation.
    let pair = make_box(&[0.5], 1.0).unwrap();
    let field2 =
        DisorderField::from_values(pair.region().clone(), vec![0.0, 1.0]).unwrap();
    let audit2 = audit_separated_decay(&pair, &field2, 1.0, 0.1).unwrap();
    assert_eq!(audit2.gap_checks, 2);
    assert_eq!(audit2.decay_checks, 4);
    assert!(audit2.pass);

    // Interior eigenvalues of a sub-box land in the ambient spectrum.
    let transfer = audit_interior_transfer(1, 40.0, 120.0, 1e-6, 2.0, 100, 99).unwrap();
    assert_eq!(transfer.excluded, 0);
    assert_eq!(transfer.audited, 3700, "37 interior sites over 100 realizations");
    assert!(transfer.failures.is_empty());
    assert!(transfer.pass);

    println!(
        "PASS acceptance 6: separated audits 420+441 and 2+4 clean, transfer audited {} clean",
        transfer.audited
    );
}

#[test]
fn a7_probability_recursions_hit_goldens_and_envelopes() {
    // Golden first step.
    let t = msa1_trace(400.0, 1, 5.0, 3.5e-7, 20.0, 4).unwrap();
    let p1 = t.rows[1].value;
    assert!(
        (p1 - 7.84e-8).abs() <= 1e-12 * 7.84e-8,
        "first step {p1} vs 7.84e-8"
    );

    // Envelope on a grid of admissible starts.
    let mut grid_points = 0usize;
    for (p, l0) in [(5.0, 30.0), (8.0, 25.0)] {
        for p0 in [7.7922e-7, 7e-7, 5e-7, 3e-7, 1e-7] {
            let t = msa1_trace(400.0, 1, p, p0, l0, 40).unwrap();
            let k0 = t.k0.expect("threshold must be reached");
            assert!(
                (7..=10).contains(&k0),
                "threshold step {k0} out of range at (p={p}, L0={l0}, P0={p0})"
            );
            let envelope_rows: Vec<_> =
                t.rows.iter().filter(|r| r.envelope_ok.is_some()).collect();
            assert!(!envelope_rows.is_empty());
            assert!(
                envelope_rows.iter().all(|r| r.envelope_ok == Some(true)),
                "envelope fails at (p={p}, L0={l0}, P0={p0})"
            );
            grid_points += 1;
        }
    }
    assert_eq!(grid_points, 10);

    // Monotone coupling: a pointwise-larger start stays larger forever.
    for i in 0..100u64 {
        let h = rng::subseed(0xC0, i);
        let lo = rng::unit_uniform(rng::site_hash(h, &[0])) * 7.8e-7;
        let hi = lo + (7.8e-7 - lo) * rng::unit_uniform(rng::site_hash(h, &[1]));
        let ta = msa1_trace(400.0, 1, 5.0, lo, 20.0, 12).unwrap();
        let tb = msa1_trace(400.0, 1, 5.0, hi, 20.0, 12).unwrap();
        for (ra, rb) in ta.rows.iter().zip(tb.rows.iter()) {
            let (la, lb) = (
                ra.log_value.unwrap_or(f64::NEG_INFINITY),
                rb.log_value.unwrap_or(f64::NEG_INFINITY),
            );
            assert!(la <= lb, "coupling {i}: step {} has {la} > {lb}", ra.k);
        }
    }

    // Log-space evaluation agrees with direct arithmetic while the latter
    // is representable.
    let trace = msa3_trace(800.0, 0.1, 1, 0.05, 1e-7, 50.0, 7).unwrap();
    let n_exp = 800f64.powf(0.1).floor();
    let mut direct = 1e-7f64;
    let mut compared = 0usize;
    for (k, row) in trace.rows.iter().enumerate() {
        if !direct.is_finite() || direct < 1e-300 {
            break;
        }
        assert!(
            (row.value - direct).abs() <= 1e-12 * direct,
            "step {k}: log-space {} vs direct {direct}",
            row.value
        );
        compared += 1;
        let next_scale = 50.0 * 800f64.powi(k as i32 + 1);
        direct = 1600f64.powf(n_exp + 1.0) * direct.powf(n_exp + 1.0)
            + 0.5 * (-next_scale.powf(0.05)).exp();
    }
    assert!(compared >= 5, "only {compared} directly representable steps");

    println!(
        "PASS acceptance 7: golden first step, 10 envelopes, 100 couplings, {compared} log/direct steps"
    );
}

#[test]
fn a8_labeling_bijective_identity_and_mix_implies_subexp() {
    // Labels are a bijection between sites and eigenvalue indices.
    for i in 0..200u64 {
        let seed = rng::subseed(0xACC8, i);
        let dim = 1 + (i as usize % 2);
        let side = if dim == 1 { 8 + (i % 13) as i64 } else { 4 + (i % 5) as i64 };
        let bx = make_box(&vec![0.0; dim], side as f64).unwrap();
        let field = sample_disorder(
            bx.region(),
            Distribution::Uniform { lo: 0.0, hi: 1.0 },
            seed,
        )
        .unwrap();
        let eps = 0.6 * rng::site_uniform(seed, &[3]);
        let op = build_hamiltonian(&field, eps).unwrap();
        let es = eigensystem(&op).unwrap();
        let labeled = label_sites(&es, &bx).unwrap();
        let mut seen = labeled.eigen_of_site.clone();
        seen.sort_unstable();
        assert!(
            seen.iter().enumerate().all(|(j, &e)| j == e),
            "labeling {i} is not a permutation"
        );
    }

    // Zero hopping: each site keeps its own potential value exactly.
    let bx0 = make_box(&[0.0], 30.0).unwrap();
    let field0 = sample_disorder(
        bx0.region(),
        Distribution::Uniform { lo: 0.0, hi: 1.0 },
        rng::subseed(0xACC8, 999),
    )
    .unwrap();
    let op0 = build_hamiltonian(&field0, 0.0).unwrap();
    let es0 = eigensystem(&op0).unwrap();
    let labeled0 = label_sites(&es0, &bx0).unwrap();
    for (i, value) in field0.values().iter().enumerate() {
        assert!(labeled0.es.amplitude(labeled0.eigen_of_site[i], i) >= 1.0 - 1e-12);
        assert!((labeled0.lambda_of_site(i) - value).abs() <= 1e-12);
    }

    // Every box certified for mixed decay also satisfies the implied
    // subexponential certificate at the derived exponent.
    let ps = ParameterSet::for_predicates(1, 3.0, 0.55, 0.45);
    let bx = make_box(&[0.0], 240.0).unwrap();
    let verdicts: Vec<_> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let field = sample_disorder(
                bx.region(),
                Distribution::Uniform { lo: 0.0, hi: 1.0 },
                rng::subseed(123, i),
            )
            .unwrap();
            let op = build_hamiltonian(&field, 1e-4).unwrap();
            classify_box(&bx, &op, BoxClass::MixLocalizing, &ps, 2.0).unwrap()
        })
        .collect();
    let certified: Vec<_> = verdicts.iter().filter(|v| v.verdict).collect();
    assert!(
        certified.len() >= 50,
        "only {} of 100 boxes certified; sweep is too weak to be informative",
        certified.len()
    );
    for v in &certified {
        let sel = v.sel_implication.as_ref().expect("certified mixed boxes carry the implication");
        assert!(
            sel.applicable,
            "threshold conditions must hold at rate 2, side 240, got s_tilde {}",
            sel.s_tilde
        );
        assert!(sel.holds, "implied subexponential certificate failed");
    }

    println!(
        "PASS acceptance 8: 200 bijections, exact identity labels, implication on {}/100 certified boxes",
        certified.len()
    );
}

#[test]
fn a9_parameter_solver_golden_passes_and_infeasible_named() {
    let ps = solve_parameters(12.0, 0.3, 1.0, 1).unwrap();
    let checks = validate(&ps);
    assert!(!checks.is_empty());
    for c in &checks {
        assert!(c.pass, "golden set fails {}: {} vs {}", c.name, c.lhs, c.rhs);
        if c.strict {
            assert!(c.margin > 0.0, "golden set has zero margin on strict {}", c.name);
        }
    }

    match solve_parameters(10.0, 0.3, 1.0, 1) {
        Err(Error::Infeasible { inequality, lhs, rhs }) => {
            assert_eq!(inequality, "θ > (6/(2α−1) + 9/2)d");
            assert_eq!(lhs, 10.0);
            assert_eq!(rhs, 10.5);
        }
        other => panic!("expected a named infeasibility, got {other:?}"),
    }

    println!(
        "PASS acceptance 9: golden set clears {} inequalities strictly, small budget rejected by name",
        checks.len()
    );
}
