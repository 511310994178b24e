mod common;

use std::sync::Arc;

use common::{random_distribution, random_linear, random_pseudoexpectation, random_row_polynomial, rng};
use proptest::prelude::*;
use sossr_core::moment::{MonomialBasis, PolynomialExpr, Pseudoexpectation, DEFAULT_CONDITIONING_FLOOR};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(64)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn cauchy_schwarz(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pe = random_pseudoexpectation(&mut r);
        for _ in 0..10 {
            let f = random_row_polynomial(&mut r, pe.basis());
            let g = random_row_polynomial(&mut r, pe.basis());
            let fg = pe.evaluate(&(&f * &g)).unwrap();
            let ff = pe.evaluate(&f.square()).unwrap();
            let gg = pe.evaluate(&g.square()).unwrap();
            prop_assert!(fg * fg <= ff * gg + 1e-8, "{fg}^2 > {ff} * {gg}");
        }
    }

    #[test]
    fn covariance_is_psd(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pe = random_pseudoexpectation(&mut r);
        let basis = pe.basis();
        let vars: Vec<_> = (1..basis.num_vars() as u32).collect();
        let cov = pe.pseudo_covariance(&vars).unwrap();
        prop_assert!(cov.symmetric_eigenvalues().min() >= -1e-7);
    }

    #[test]
    fn law_of_total_pseudoexpectation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pe = random_pseudoexpectation(&mut r);
        let basis = Arc::clone(pe.basis());
        let means = pe.selector_means().unwrap();
        for (i, &m) in means.iter().enumerate() {
            if m < 1e-6 || m > 1.0 - 1e-6 {
                continue;
            }
            let on = pe.condition(i, true, DEFAULT_CONDITIONING_FLOOR).unwrap();
            let off = pe.condition(i, false, DEFAULT_CONDITIONING_FLOOR).unwrap();
            prop_assert!((on.moment_of(&[basis.selector(i)]).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!(off.moment_of(&[basis.selector(i)]).unwrap().abs() < 1e-12);
            let p = random_linear(&mut r, &basis);
            let whole = pe.evaluate(&p).unwrap();
            let split = m * on.evaluate(&p).unwrap() + (1.0 - m) * off.evaluate(&p).unwrap();
            prop_assert!((whole - split).abs() < 1e-10, "{whole} vs {split}");
        }
    }

    #[test]
    fn conditioning_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pe = random_pseudoexpectation(&mut r);
        let i = r.random_range(0..pe.basis().num_samples());
        let Ok(once) = pe.condition(i, true, DEFAULT_CONDITIONING_FLOOR) else {
            return Ok(());
        };
        let twice = once.condition(i, true, DEFAULT_CONDITIONING_FLOOR).unwrap();
        let mut shared = 0;
        for id in 0..pe.basis().num_moments() {
            if let (Some(a), Some(b)) = (once.value(id), twice.value(id)) {
                prop_assert!((a - b).abs() < 1e-10);
                shared += 1;
            }
        }
        prop_assert!(shared >= 1);
    }

    #[test]
    fn evaluate_is_linear(seed in any::<u64>(), a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let mut r = rng(seed);
        let pe = random_pseudoexpectation(&mut r);
        let p = random_row_polynomial(&mut r, pe.basis()).square();
        let q = random_linear(&mut r, pe.basis());
        let combined = pe.evaluate(&(p.clone().scale(a) + q.clone().scale(b))).unwrap();
        let separate = a * pe.evaluate(&p).unwrap() + b * pe.evaluate(&q).unwrap();
        prop_assert!((combined - separate).abs() <= 1e-12 * (1.0 + combined.abs()));
    }

    #[test]
    fn distributions_validate(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=5);
        let d = r.random_range(1..=3);
        let basis = Arc::new(MonomialBasis::new(n, d, 2).unwrap());
        let atoms = r.random_range(1..=8);
        let projections = r.random_bool(0.5);
        let pe = random_distribution(&mut r, &basis, atoms, projections);
        let m = pe.moment_matrix().unwrap();
        let back = Pseudoexpectation::from_moment_matrix(Arc::clone(&basis), &m, 1e-9).unwrap();
        for id in 0..basis.num_moments() {
            prop_assert!((back.value(id).unwrap() - pe.value(id).unwrap()).abs() < 1e-12);
        }
        for i in 0..n {
            let w = basis.selector(i);
            let mut p = PolynomialExpr::monomial(1.0, vec![w, w]);
            p.push_term(-1.0, vec![w]);
            prop_assert_eq!(pe.evaluate(&p).unwrap(), 0.0);
        }
    }
}
