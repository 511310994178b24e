mod common;

use std::sync::Arc;

use common::{eigenspace_instance, frob_sq, random_projection, random_symmetric, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use sossr_core::datagen::{generate_gaussian, Adversary, GaussianParams};
use sossr_core::decoder::{
    decode, decode_pe, eigenspace_round, frobenius_distance_sq, round_once, DecodeSettings,
};
use sossr_core::moment::{Atom, MonomialBasis, Pseudoexpectation};
use sossr_core::par::Execution;
use sossr_core::program::{compile, RecoveryConfig};
use sossr_core::rng::substream;
use sossr_core::sdp::SolverSettings;

#[test]
fn uniform_selector_mass_gives_uniform_draws() {
    let n = 5;
    let basis = Arc::new(MonomialBasis::new(n, 2, 2).unwrap());
    let atoms: Vec<Atom> = (0..n)
        .map(|i| Atom {
            weight: 1.0,
            selectors: (0..n).map(|j| j == i).collect(),
            params: DMatrix::from_diagonal_element(2, 2, 0.5),
        })
        .collect();
    let pe = Pseudoexpectation::from_distribution(basis, &atoms).unwrap();
    let draws = 100_000;
    let mut counts = vec![0usize; n];
    let mut r = substream(17, "uniformity", 0);
    for _ in 0..draws {
        counts[round_once(&pe, 1, &mut r, 1e-8).unwrap().source_index] += 1;
    }
    let p = 1.0 / n as f64;
    let mean = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for &c in &counts {
        assert!((c as f64 - mean).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn disjoint_atoms_round_to_their_own_projection() {
    let basis = Arc::new(MonomialBasis::new(6, 3, 2).unwrap());
    let mut r = rng(4);
    let p1 = random_projection(&mut r, 3, 1);
    let p2 = random_projection(&mut r, 3, 1);
    let m1 = vec![true, true, true, false, false, false];
    let m2: Vec<bool> = m1.iter().map(|b| !b).collect();
    let pe = Pseudoexpectation::from_distribution(
        basis,
        &[
            Atom { weight: 1.0, selectors: m1.clone(), params: p1.clone() },
            Atom { weight: 1.0, selectors: m2, params: p2.clone() },
        ],
    )
    .unwrap();
    let mut s = substream(5, "two atoms", 0);
    let mut seen = [false; 2];
    for _ in 0..200 {
        let c = round_once(&pe, 1, &mut s, 1e-8).unwrap();
        let (want, side) = if m1[c.source_index] { (&p1, 0) } else { (&p2, 1) };
        seen[side] = true;
        assert!((&c.raw - want).abs().max() < 1e-12);
        assert!((&c.rounded - want).abs().max() < 1e-10);
        assert!((c.weight - 0.5).abs() < 1e-12);
    }
    assert!(seen[0] && seen[1]);

    let mut settings = DecodeSettings::new(1, 0.5, 3);
    settings.merge_radius = 0.0;
    settings.list_cap = 100;
    for trials in [1, 5, 17] {
        settings.trials = trials;
        assert_eq!(decode_pe(&pe, 1, &settings).unwrap().len(), trials);
    }
    settings.list_cap = 4;
    let list = decode_pe(&pe, 1, &settings).unwrap();
    assert_eq!((list.len(), list.truncated), (4, 13));
    // the default radius collapses the list to the two lines
    let list = decode_pe(&pe, 1, &DecodeSettings::new(1, 0.5, 3)).unwrap();
    assert_eq!(list.len(), 2);
    assert!(list.min_error(&p1).unwrap() < 1e-20 && list.min_error(&p2).unwrap() < 1e-20);
    for a in 0..list.len() {
        for b in 0..a {
            let d = frobenius_distance_sq(&list.candidates[a].rounded, &list.candidates[b].rounded).unwrap();
            assert!(d.sqrt() >= DecodeSettings::new(1, 0.5, 3).merge_radius);
        }
    }
}

#[test]
fn parallel_and_sequential_decoding_agree() {
    let basis = Arc::new(MonomialBasis::new(4, 3, 2).unwrap());
    let mut r = rng(8);
    let pe = common::random_distribution(&mut r, &basis, 6, true);
    let mut s = DecodeSettings::new(1, 0.5, 21);
    s.execution = Execution::Sequential;
    let a = decode_pe(&pe, 1, &s).unwrap();
    s.execution = Execution::Parallel;
    let b = decode_pe(&pe, 1, &s).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eigenspace_round_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..=8);
        let k = r.random_range(1..=d);
        let m = random_symmetric(&mut r, d);
        let once = eigenspace_round(&m, k);
        let twice = eigenspace_round(&once, k);
        prop_assert!((&once - &twice).abs().max() < 1e-10);
        prop_assert!((&once * &once - &once).abs().max() < 1e-10);
        prop_assert!((once.trace() - k as f64).abs() < 1e-10);
        // a projection is its own rounding
        let p = random_projection(&mut r, d, k);
        prop_assert!((eigenspace_round(&p, k) - &p).abs().max() < 1e-10);
    }

    #[test]
    fn distance_matches_elementwise_sum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.random_range(1..=8);
        let a = random_symmetric(&mut r, d);
        let b = random_symmetric(&mut r, d);
        let fast = frobenius_distance_sq(&a, &b).unwrap();
        prop_assert!((fast - frob_sq(&a, &b)).abs() <= 1e-12 * (1.0 + fast));
    }

    #[test]
    fn eigenspace_rounding_loses_at_most_twice_the_gap(seed in any::<u64>(), eps in 0.001f64..0.4) {
        let mut r = rng(seed);
        let inst = eigenspace_instance(&mut r, eps);
        let pk = eigenspace_round(&inst.m, inst.k);
        let k = inst.k as f64;
        prop_assert!(common::inner(&pk, &inst.p) >= k * (1.0 - 2.0 * inst.eps) - 1e-9);
    }
}

#[test]
fn candidates_from_a_solved_relaxation_are_well_formed() {
    let data = generate_gaussian(&GaussianParams {
        d: 3,
        k: 1,
        n: 14,
        alpha: 0.5,
        noise_sigma: 0.0,
        adversary: Adversary::OrthogonalMixture,
        seed: 2,
    })
    .unwrap();
    let rel = compile(&data, &RecoveryConfig::new(1, 0.5, 0.0)).unwrap();
    let solver = SolverSettings { max_iter: 20_000, ..SolverSettings::default() };
    let mut settings = DecodeSettings::new(1, 0.5, 1);
    settings.merge_radius = 0.0;
    settings.list_cap = settings.trials;
    let out = decode(&rel, &settings, &solver).unwrap();
    let tol = out.pe.tolerance().max(1e-6);
    for c in &out.list.candidates {
        let eig = c.raw.clone().symmetric_eigenvalues();
        assert!(eig.min() >= -tol * 10.0 && eig.max() <= 1.0 + tol * 10.0, "{eig}");
        assert!((c.raw.trace() - 1.0).abs() <= 10.0 * tol / c.weight);
        assert!((&c.rounded * &c.rounded - &c.rounded).abs().max() < 1e-10);
        assert!((c.rounded.trace() - 1.0).abs() < 1e-12);
    }
    let plant = &data.truth.as_ref().unwrap().plant;
    assert!(out.list.min_error(plant).unwrap() < 1e-3);
}
