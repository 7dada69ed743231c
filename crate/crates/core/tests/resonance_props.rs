//! Property checks on the eigenvalue-tuple conditions: monotonicity in the
//! order, scale covariance, planted-resonance detection, spread semantics,
//! and internal coherence of the combined report.

use num_complex::Complex64;
use proptest::prelude::*;

use koopman_core::conditions::{
    check_all, check_nonresonant, check_spectral_spread, Order,
};

const TOL: f64 = 1e-9;

fn arb_lambda(max_n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(
        (-3.0..-0.1f64, prop::option::of(-2.0..2.0f64)),
        1..=max_n,
    )
    .prop_map(|parts| {
        parts
            .into_iter()
            .map(|(re, im)| Complex64::new(re, im.unwrap_or(0.0)))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The multi-index set only grows with the order, so a tuple
    /// nonresonant at order k+1 is nonresonant at order k, and the minimal
    /// gap can only shrink.
    #[test]
    fn nonresonance_is_monotone_in_order(
        lambda in arb_lambda(4),
        i_raw in 0usize..4,
    ) {
        let i = i_raw % lambda.len();
        let mut prev_gap = f64::INFINITY;
        let mut prev_ok = true;
        for k in 1..=6u32 {
            let check = check_nonresonant(&lambda, i, Order::Finite(k), TOL).unwrap();
            prop_assert!(check.min_gap <= prev_gap + 1e-15);
            prop_assert!(
                !(check.ok && !prev_ok),
                "order {k} nonresonant but order {} resonant", k - 1
            );
            prev_gap = check.min_gap;
            prev_ok = check.ok;
        }
    }

    /// Gaps are homogeneous of degree one in the tuple, so scaling both the
    /// eigenvalues and the tolerance preserves the verdict.
    #[test]
    fn verdicts_are_scale_covariant(
        lambda in arb_lambda(4),
        i_raw in 0usize..4,
        k in 1..=5u32,
        c in 0.5..3.0f64,
    ) {
        let i = i_raw % lambda.len();
        let base = check_nonresonant(&lambda, i, Order::Finite(k), TOL).unwrap();
        // stay away from the tolerance boundary, where one rounding step
        // may legitimately flip the comparison
        prop_assume!((base.min_gap - TOL).abs() > 1e-3 * TOL);
        let scaled: Vec<Complex64> = lambda.iter().map(|l| l * c).collect();
        let check = check_nonresonant(&scaled, i, Order::Finite(k), c * TOL).unwrap();
        prop_assert_eq!(check.ok, base.ok);
        prop_assert!((check.min_gap - c * base.min_gap).abs() < 1e-9 * (1.0 + base.min_gap));
    }

    /// Forcing lambda_i onto an integer combination of the others must be
    /// reported, with the planted gap below tolerance.
    #[test]
    fn planted_resonances_are_detected(
        lambda_raw in arb_lambda(4),
        i_raw in 0usize..4,
        weights in prop::collection::vec(0u32..=3, 4),
        k_extra in 0..=2u32,
    ) {
        let mut lambda = lambda_raw;
        let n = lambda.len();
        let i = i_raw % n;
        let mut m: Vec<u32> = weights[..n].to_vec();
        m[i] = 0;
        let total: u32 = m.iter().sum();
        prop_assume!(total >= 1);
        prop_assume!(!(total == 1 && m[i] == 1));
        lambda[i] = m
            .iter()
            .zip(&lambda)
            .map(|(&mj, l)| l * f64::from(mj))
            .sum();
        let check = check_nonresonant(&lambda, i, Order::Finite(total + k_extra), TOL).unwrap();
        prop_assert!(!check.ok);
        prop_assert!(check.min_gap < TOL);
        prop_assert!(check
            .violations
            .iter()
            .any(|v| v.target == i && v.gap < TOL));
    }

    /// The spread margin restates Re(lambda_i) - k * max Re directly.
    #[test]
    fn spread_margin_matches_direct_formula(
        lambda in arb_lambda(4),
        i_raw in 0usize..4,
        k in 1..=6u32,
    ) {
        let i = i_raw % lambda.len();
        let check = check_spectral_spread(&lambda, i, Order::Finite(k)).unwrap();
        let max_re = lambda.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let margin = lambda[i].re - f64::from(k) * max_re;
        prop_assert!((check.margin - margin).abs() < 1e-15);
        prop_assert_eq!(check.ok, margin > 0.0);
    }

    /// The combined report is exactly the conjunction of per-index checks.
    #[test]
    fn report_aggregates_per_index_checks(
        lambda in arb_lambda(3),
        k in 1..=5u32,
    ) {
        let report = check_all(&lambda, Order::Finite(k), TOL).unwrap();
        let mut min_gap = f64::INFINITY;
        for (i, per) in report.per_index.iter().enumerate() {
            let nr = check_nonresonant(&lambda, i, Order::Finite(k), TOL).unwrap();
            let sp = check_spectral_spread(&lambda, i, Order::Finite(k)).unwrap();
            prop_assert_eq!(per.nonresonant, nr.ok);
            prop_assert_eq!(per.spread_ok, sp.ok);
            prop_assert!((per.min_gap - nr.min_gap).abs() < 1e-15);
            min_gap = min_gap.min(nr.min_gap);
        }
        prop_assert_eq!(report.all_nonresonant, report.per_index.iter().all(|p| p.nonresonant));
        prop_assert_eq!(report.all_spread, report.per_index.iter().all(|p| p.spread_ok));
        prop_assert!((report.min_gap - min_gap).abs() < 1e-15);
    }
}

/// A repeated eigenvalue violates the letter of the definition through the
/// degree-one multi-index pointing at its twin.
#[test]
fn repeated_eigenvalues_are_resonant() {
    let lambda = vec![Complex64::new(-1.0, 0.0), Complex64::new(-1.0, 0.0)];
    for i in 0..2 {
        let check = check_nonresonant(&lambda, i, Order::Finite(2), TOL).unwrap();
        assert!(!check.ok);
        let witness: Vec<u32> = (0..2).map(|j| u32::from(j != i)).collect();
        assert!(check.violations.iter().any(|v| v.witness == witness));
    }
}

/// Order::Infinite on a tuple inside the open left half-plane agrees with
/// a large finite order: beyond the cap the combination magnitudes leave
/// every bounded disk, so no new violations appear.
#[test]
fn infinite_order_matches_large_finite_order() {
    let lambda = vec![Complex64::new(-1.3, 0.4), Complex64::new(-2.1, -0.7)];
    for i in 0..2 {
        let inf = check_nonresonant(&lambda, i, Order::Infinite, TOL).unwrap();
        let fin = check_nonresonant(
            &lambda,
            i,
            Order::Finite(koopman_core::defaults::INFINITE_ORDER_CAP),
            TOL,
        )
        .unwrap();
        assert_eq!(inf.ok, fin.ok);
    }
}
