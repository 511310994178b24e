mod common;

use std::sync::Arc;

use common::{random_projection, random_symmetric, rng};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use sossr_core::datagen::{generate_gaussian, Adversary, Dataset, GaussianParams};
use sossr_core::moment::{Indeterminate, Pseudoexpectation};
use sossr_core::program::{
    check_assignment, compile, cost_polynomial, evaluate_constraints, ConstraintKind, ConstraintReport,
    Provenance, RecoveryConfig,
};

const TOL: f64 = 1e-9;

fn residual_sq(x: &DVector<f64>, pi: &DMatrix<f64>) -> f64 {
    (x - pi * x).norm_squared()
}

/// Unit directions on a grid: a half circle for d = 2, a hemisphere for d = 3.
fn direction_grid(d: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    match d {
        2 => {
            for j in 0..24 {
                let t = std::f64::consts::PI * j as f64 / 24.0;
                out.push(DVector::from_vec(vec![t.cos(), t.sin()]));
            }
        }
        3 => {
            out.push(DVector::from_vec(vec![0.0, 0.0, 1.0]));
            for a in 1..=4 {
                let polar = std::f64::consts::FRAC_PI_2 * a as f64 / 4.0;
                let count = if a == 4 { 8 } else { 12 };
                for b in 0..count {
                    let az = 2.0 * std::f64::consts::PI * b as f64 / 12.0;
                    out.push(DVector::from_vec(vec![
                        polar.sin() * az.cos(),
                        polar.sin() * az.sin(),
                        polar.cos(),
                    ]));
                }
            }
        }
        _ => unreachable!(),
    }
    out
}

fn masks(n: usize, weight: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u32..1 << n)
        .filter(move |m| m.count_ones() as usize == weight)
        .map(move |m| (0..n).map(|i| m >> i & 1 == 1).collect())
}

fn small_dataset(seed: u64, n: usize, d: usize) -> Dataset {
    let mut r = rng(seed);
    // half the points near a line so that tight budgets are exercised
    let dir = common::random_orthonormal(&mut r, d, 1);
    let pts = DMatrix::from_fn(n, d, |i, c| {
        if i % 2 == 0 {
            dir[(c, 0)] * (i as f64 + 1.0) * 0.5
        } else {
            r.random_range(-1.0..1.0)
        }
    });
    Dataset::from_points(pts)
}

fn cost_slack(report: &ConstraintReport) -> f64 {
    report.with_tag(Provenance::Cost).next().unwrap().slack
}

#[test]
fn compilation_is_sound_on_tiny_instances() {
    let mut checked = 0;
    for (seed, n, d) in [(1, 3, 2), (2, 4, 2), (3, 5, 3), (4, 6, 2), (5, 6, 3)] {
        let data = small_dataset(seed, n, d);
        let grid = direction_grid(d);
        for m in 1..=n {
            let alpha = m as f64 / n as f64;
            for eps in [0.02, 0.2, 1.0] {
                let cfg = RecoveryConfig::new(1, alpha, eps / alpha);
                let rel = compile(&data, &cfg).unwrap();
                for w in masks(n, m) {
                    for v in &grid {
                        let pi = v * v.transpose();
                        let cost: f64 = (0..n)
                            .filter(|&i| w[i])
                            .map(|i| residual_sq(&data.point(i), &pi))
                            .sum();
                        let pe = Pseudoexpectation::atomic(rel.basis.clone(), &w, &pi).unwrap();
                        let report = evaluate_constraints(&rel, &pe).unwrap();
                        if cost <= eps * n as f64 {
                            assert!(report.is_feasible(TOL), "n={n} d={d} m={m} eps={eps}: {:?}", report.violations(TOL));
                            checked += 1;
                        } else {
                            // the budget is the only constraint such a point can break
                            let violated = report.violations(TOL);
                            assert!(violated.iter().all(|e| e.tag == Provenance::Cost));
                            assert!((cost_slack(&report) - (eps * n as f64 - cost)).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 1000, "{checked}");
}

#[test]
fn tight_budget_is_feasible_through_check_assignment() {
    let data = small_dataset(9, 5, 2);
    let grid = direction_grid(2);
    for w in masks(5, 3) {
        for v in grid.iter().step_by(3) {
            let pi = v * v.transpose();
            let cost: f64 = (0..5).filter(|&i| w[i]).map(|i| residual_sq(&data.point(i), &pi)).sum();
            let cfg = RecoveryConfig::new(1, 0.6, cost / 3.0);
            let report = check_assignment(&data, &cfg, &w, &pi).unwrap();
            assert!(report.is_feasible(TOL), "{:?}", report.violations(TOL));
        }
    }
}

fn last_equality(report: &ConstraintReport, tag: Provenance) -> Vec<f64> {
    report
        .entries
        .iter()
        .filter(|e| e.tag == tag && e.kind == ConstraintKind::Equality)
        .map(|e| e.slack)
        .collect()
}

#[test]
fn localizers_scale_their_unlocalized_counterparts() {
    let mut r = rng(21);
    for _ in 0..200 {
        let n = r.random_range(2..=5);
        let d = r.random_range(2..=3);
        let data = Dataset::from_points(common::gaussian(&mut r, n, d));
        let alpha = r.random_range(1..=n) as f64 / n as f64;
        let rel = compile(&data, &RecoveryConfig::new(1, alpha, 0.5)).unwrap();
        let w: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        // arbitrary symmetric parameters, so unlocalized constraints may fail
        let rank = r.random_range(1..=d);
        let pi = if r.random_bool(0.5) {
            random_projection(&mut r, d, rank)
        } else {
            random_symmetric(&mut r, d) * 0.5 + DMatrix::identity(d, d) * 0.5
        };
        let pe = Pseudoexpectation::atomic(rel.basis.clone(), &w, &pi).unwrap();
        let report = evaluate_constraints(&rel, &pe).unwrap();
        let psd: Vec<f64> = report
            .entries
            .iter()
            .filter(|e| e.kind == ConstraintKind::Psd)
            .map(|e| e.slack)
            .collect();
        let sum = report.with_tag(Provenance::Sum).next().unwrap().slack;
        let loc_sum: Vec<f64> = report.with_tag(Provenance::LocalizedSum).map(|e| e.slack).collect();
        let trace = *last_equality(&report, Provenance::Spectral).last().unwrap();
        let loc_eq = last_equality(&report, Provenance::Localizer);
        let per_sample = loc_eq.len() / n;
        for i in 0..n {
            let wi = if w[i] { 1.0 } else { 0.0 };
            let (lo, hi) = rel.localizer_blocks(i);
            assert!((psd[lo] - wi * psd[1]).abs() < 1e-12);
            assert!((psd[hi] - wi * psd[2]).abs() < 1e-12);
            // Σ_j w_i w_j = w_i Σ_j w_j on boolean points
            assert!((loc_sum[i] - wi * sum).abs() < 1e-12);
            let loc_trace = loc_eq[(i + 1) * per_sample - 1];
            assert!((loc_trace - wi * trace).abs() < 1e-12);
            if w[i] {
                assert_eq!(psd[lo] >= -TOL, psd[1] >= -TOL);
                assert_eq!(psd[hi] >= -TOL, psd[2] >= -TOL);
                assert_eq!(loc_sum[i] >= -TOL, sum >= -TOL);
            } else {
                assert!(psd[lo] == 0.0 && psd[hi] == 0.0 && loc_sum[i] == 0.0);
            }
        }
    }
}

fn clean(n: usize) -> Dataset {
    generate_gaussian(&GaussianParams {
        d: 3,
        k: 1,
        n,
        alpha: 1.0,
        noise_sigma: 0.0,
        adversary: Adversary::OrthogonalMixture,
        seed: 4,
    })
    .unwrap()
}

#[test]
fn planted_assignment_is_feasible_on_clean_data() {
    let data = clean(6);
    let truth = data.truth.as_ref().unwrap();
    let report = check_assignment(&data, &RecoveryConfig::new(1, 1.0, 0.0), &truth.inlier_mask, &truth.plant).unwrap();
    assert!(report.is_feasible(TOL), "{:?}", report.violations(TOL));
}

#[test]
fn empty_selection_misses_the_sum_by_alpha_n() {
    let data = clean(6);
    let truth = data.truth.as_ref().unwrap();
    let report = check_assignment(&data, &RecoveryConfig::new(1, 0.5, 0.0), &[false; 6], &truth.plant).unwrap();
    let sum = report.with_tag(Provenance::Sum).next().unwrap();
    assert!((sum.slack + 3.0).abs() < 1e-12);
    assert!(!sum.satisfied(TOL));
}

#[test]
fn trace_excess_is_reported_exactly() {
    let data = clean(6);
    let truth = data.truth.as_ref().unwrap();
    // the rank-2 complement has trace k + 1 for k = 1
    let pi = DMatrix::identity(3, 3) - &truth.plant;
    let report = check_assignment(&data, &RecoveryConfig::new(1, 1.0, 10.0), &truth.inlier_mask, &pi).unwrap();
    let trace = *last_equality(&report, Provenance::Spectral).last().unwrap();
    assert!((trace - 1.0).abs() < 1e-12, "{trace}");
}

#[test]
fn linearised_cost_is_exact_on_projections() {
    let mut r = rng(33);
    for _ in 0..500 {
        let d = r.random_range(2..=6);
        let k = r.random_range(1..d);
        let basis = Arc::new(sossr_core::moment::MonomialBasis::new(1, d, 2).unwrap());
        let x = DVector::from_iterator(d, common::gaussian(&mut r, d, 1).iter().copied());
        let pi = random_projection(&mut r, d, k);
        let phi = cost_polynomial(&basis, &x);
        let direct = residual_sq(&x, &pi);
        let substituted = phi.substitute(|id| match basis.decode(id) {
            Indeterminate::One => 1.0,
            Indeterminate::Selector(_) => 1.0,
            Indeterminate::Param(a, b) => pi[(a, b)],
        });
        let pe = Pseudoexpectation::atomic(basis.clone(), &[true], &pi).unwrap();
        let evaluated = pe.evaluate(&phi).unwrap();
        let scale = 1.0 + x.norm_squared();
        assert!((substituted - direct).abs() < 1e-12 * scale, "{substituted} vs {direct}");
        assert!((evaluated - direct).abs() < 1e-12 * scale);
    }
}
