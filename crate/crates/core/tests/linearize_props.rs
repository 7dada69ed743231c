//! Structural properties of the homological solver on random stable
//! fields: the per-eigenfunction exponential law along trajectories,
//! triangularity of the order recursion, exactness on linear systems, and
//! the normalization of the assembled map.

mod common;

use rand::Rng;

use koopman_core::flow::{flow_map, IntegratorConfig};
use koopman_core::linearize::{solve_homological, SolveOptions};
use koopman_core::polyfield::{DomainBox, PolyMap};
use koopman_core::sampling::sample_box;

const NL_SCALE: f64 = 0.05;
const RADIUS: f64 = 0.25;

fn random_field(seed: u64, n: usize) -> PolyMap {
    let mut rng = common::rng(seed);
    common::random_stable_drift(&mut rng, n, NL_SCALE)
}

/// phi_i(S_t x) = exp(lambda_i t) phi_i(x) along true trajectories, up to
/// the truncation order of the polynomial eigenfunction.
#[test]
fn eigenfunctions_follow_the_exponential_law() {
    for trial in 0..8 {
        let n = 2 + trial % 2;
        let field = random_field(0x11_00 + trial as u64, n);
        let map = solve_homological(&field, 6, &SolveOptions::default()).unwrap();
        let samples = sample_box(&DomainBox::centered_cube(n, RADIUS), 8, 0x11_50 + trial as u64)
            .unwrap();
        for x0 in &samples {
            for t in [0.5, 1.5] {
                let xt = flow_map(&field, x0, t, &IntegratorConfig::default()).unwrap();
                for i in 0..n {
                    let lambda = map.spectrum().eigenvalues()[i];
                    let lhs = map.eigenfunction(i).eval_real(&xt);
                    let rhs = (lambda * t).exp() * map.eigenfunction(i).eval_real(x0);
                    let gap = (lhs - rhs).norm();
                    assert!(
                        gap < 1e-6,
                        "trial {trial}, eigenvalue {lambda}: law violated by {gap:.3e}"
                    );
                }
            }
        }
    }
}

/// The order recursion is triangular: raising the truncation order leaves
/// every already-computed coefficient untouched.
#[test]
fn higher_orders_extend_lower_orders() {
    for trial in 0..6 {
        let n = 2 + trial % 2;
        let field = random_field(0x12_00 + trial as u64, n);
        let lo = solve_homological(&field, 4, &SolveOptions::default()).unwrap();
        let hi = solve_homological(&field, 6, &SolveOptions::default()).unwrap();
        for (comp, m, c) in lo.psi_poly().terms() {
            let gap = (c - hi.psi_poly().coeff(comp, m)).abs();
            assert!(
                gap < 1e-12,
                "coefficient at {m:?} changed by {gap} when the order grew"
            );
        }
    }
}

/// A linear field needs no correction at all: the map reduces to the
/// identity in the original coordinates.
#[test]
fn linear_fields_linearize_to_the_identity() {
    let mut rng = common::rng(0x13_00);
    for _ in 0..10 {
        let n = 2 + rng.gen_range(0..2);
        let a = common::random_stable_matrix(&mut rng, n);
        let field = PolyMap::linear(&a).unwrap();
        let map = solve_homological(&field, 5, &SolveOptions::default()).unwrap();
        let psi = map.psi_poly();
        let gap = psi
            .terms()
            .map(|(comp, m, c)| {
                let want = f64::from(u8::from(m.degree() == 1 && m.exponents()[comp] == 1));
                (c - want).abs()
            })
            .fold(0.0, f64::max);
        assert!(gap < 1e-12, "linear field produced a nontrivial map ({gap})");
        assert!(psi.max_degree() <= 1);
    }
}

/// Dpsi(0) = I and psi(0) = 0 for every solved map.
#[test]
fn maps_are_normalized_at_the_origin() {
    for trial in 0..6 {
        let n = 2 + trial % 2;
        let field = random_field(0x14_00 + trial as u64, n);
        let map = solve_homological(&field, 5, &SolveOptions::default()).unwrap();
        let jac = map.psi_poly().jacobian_at_origin();
        let gap = (jac - nalgebra::DMatrix::<f64>::identity(n, n)).amax();
        assert!(gap < 1e-10, "Dpsi(0) deviates from I by {gap}");
        assert!(map.psi_poly().vanishes_at_origin());
        assert!(map.realification_residue() < 1e-10);
    }
}

/// Complex-pair eigenfunctions come in conjugate pairs, so the assembled
/// map evaluates to real vectors even when the spectrum is complex.
#[test]
fn assembled_maps_are_real_for_complex_spectra() {
    let mut rng = common::rng(0x15_00);
    let mut seen_pair = false;
    for _ in 0..20 {
        let field = common::random_stable_drift(&mut rng, 3, NL_SCALE);
        let map = solve_homological(&field, 5, &SolveOptions::default()).unwrap();
        if map.spectrum().eigenvalues().iter().any(|l| l.im != 0.0) {
            seen_pair = true;
            // pairing mirrors coefficients: phi_j = conj(phi_i) on the pair
            let pairing = map.spectrum().pairing();
            for (i, p) in pairing.iter().enumerate() {
                if let Some(j) = p {
                    let a = map.eigenfunction(i);
                    let b = map.eigenfunction(*j);
                    for (m, c) in a.terms() {
                        let gap = (b.coeff(m) - c.conj()).norm();
                        assert!(gap < 1e-10, "pair coefficients differ by {gap}");
                    }
                }
            }
        }
        if map.realification_residue() >= 1e-10 {
            panic!("imaginary leakage {}", map.realification_residue());
        }
    }
    assert!(seen_pair, "construction never produced a complex pair");
}

/// Warnings surface near-resonant denominators without failing the solve:
/// a spectrum engineered close to (but not at) a second-order resonance
/// must come back with a warning and a matching minimal denominator.
#[test]
fn near_resonances_warn_but_solve() {
    // eigenvalues -1 and -2 - eps: the (2,0) combination lands within eps
    // of lambda_2
    let eps = 1e-8;
    let a = nalgebra::DMatrix::<f64>::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0 - eps]);
    let mut field = PolyMap::linear(&a).unwrap();
    field
        .add_term(1, koopman_core::polyfield::MultiIndex::new(vec![2, 0]), 0.3)
        .unwrap();
    let map = solve_homological(&field, 3, &SolveOptions::default()).unwrap();
    assert!(
        !map.warnings().is_empty(),
        "a denominator of size {eps} must be reported"
    );
    assert!((map.min_denominator() - eps).abs() < 1e-9);
}
