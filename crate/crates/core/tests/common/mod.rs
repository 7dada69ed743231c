//! Random construction of well-conditioned stable polynomial systems used
//! by the property and acceptance suites. Spectra are drawn with real
//! parts inside [-2, -1.05], so the ratio of extreme real parts stays
//! below 2 and every homological denominator of any order is at least
//! 0.1 by construction.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use koopman_core::polyfield::{ControlAffineSystem, DomainBox, PolyMap};

pub struct SpectrumPlan {
    /// Real eigenvalues, plus one conjugate pair appended when `pair` is
    /// set (the pair's real part is the last entry of `reals`).
    pub reals: Vec<f64>,
    pub pair_im: Option<f64>,
}

/// Distinct real parts in [-2, -1.05] separated by at least 0.1.
fn draw_real_parts(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    loop {
        let mut parts: Vec<f64> = (0..count).map(|_| rng.gen_range(-2.0..-1.05)).collect();
        parts.sort_by(f64::total_cmp);
        if parts.windows(2).all(|w| w[1] - w[0] >= 0.1) {
            return parts;
        }
    }
}

/// Random linear part with the planned spectrum: an orthogonal similarity
/// of the real canonical form, so conditioning is always mild.
pub fn random_stable_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let use_pair = n >= 2 && rng.gen_bool(0.4);
    let mut d = DMatrix::<f64>::zeros(n, n);
    if use_pair {
        let parts = draw_real_parts(rng, n - 1);
        for (i, &re) in parts.iter().take(n - 2).enumerate() {
            d[(i, i)] = re;
        }
        let re = parts[n - 2];
        let im = rng.gen_range(0.3..1.0);
        d[(n - 2, n - 2)] = re;
        d[(n - 2, n - 1)] = im;
        d[(n - 1, n - 2)] = -im;
        d[(n - 1, n - 1)] = re;
    } else {
        for (i, &re) in draw_real_parts(rng, n).iter().enumerate() {
            d[(i, i)] = re;
        }
    }
    let raw = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let q = raw.qr().q();
    &q * d * q.transpose()
}

/// Polynomial terms of degree `lo..=hi` with coefficients in [-scale, scale].
pub fn random_higher_order(
    rng: &mut ChaCha8Rng,
    n: usize,
    lo: u32,
    hi: u32,
    scale: f64,
) -> PolyMap {
    let mut map = PolyMap::zeros(n);
    let monomials =
        koopman_core::polyfield::multi_indices_up_to(n, hi, 1_000_000).unwrap();
    for m in monomials.iter().filter(|m| m.degree() >= lo) {
        for comp in 0..n {
            if rng.gen_bool(0.7) {
                map.add_term(comp, m.clone(), rng.gen_range(-scale..scale)).unwrap();
            }
        }
    }
    map
}

/// Stable polynomial drift: random linear part as above plus degree-2..=3
/// terms of the given magnitude.
pub fn random_stable_drift(rng: &mut ChaCha8Rng, n: usize, nl_scale: f64) -> PolyMap {
    let a = random_stable_matrix(rng, n);
    let linear = PolyMap::linear(&a).unwrap();
    let tail = random_higher_order(rng, n, 2, 3, nl_scale);
    linear.add_scaled(&tail, 1.0).unwrap()
}

/// Control-affine family: stable drift plus one control field with a
/// guaranteed nonzero linear part (so the family genuinely depends on u).
pub fn random_control_family(
    rng: &mut ChaCha8Rng,
    n: usize,
    nl_scale: f64,
    domain_radius: f64,
) -> ControlAffineSystem {
    let drift = random_stable_drift(rng, n, nl_scale);
    let mut lin = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-0.15..0.15));
    if lin.amax() < 0.05 {
        lin[(0, 0)] = 0.1;
    }
    let control = PolyMap::linear(&lin)
        .unwrap()
        .add_scaled(&random_higher_order(rng, n, 2, 2, 0.5 * nl_scale), 1.0)
        .unwrap();
    ControlAffineSystem::new(
        drift,
        vec![control],
        DomainBox::centered_cube(n, domain_radius),
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
