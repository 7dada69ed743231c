//! Deterministic low-discrepancy sampling of box domains.
//!
//! Digit-scrambled Halton sequences: one random digit permutation per
//! dimension, derived from a splitmix64 stream, applied at every digit
//! level. Deterministic in (seed, count).

use crate::error::{Error, Result};
use crate::polyfield::DomainBox;

const PRIMES: [u64; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283,
    293, 307, 311,
];

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Fisher-Yates permutation of 0..len driven by splitmix64.
fn permutation(len: u64, state: &mut u64) -> Vec<u64> {
    let mut p: Vec<u64> = (0..len).collect();
    for i in (1..len as usize).rev() {
        let j = (splitmix64(state) % (i as u64 + 1)) as usize;
        p.swap(i, j);
    }
    p
}

/// Scrambled radical inverse of `index` in the given base.
fn scrambled_radical_inverse(mut index: u64, base: u64, perm: &[u64]) -> f64 {
    let mut inv = 0.0f64;
    let mut denom = 1.0f64;
    while index > 0 {
        denom *= base as f64;
        inv += perm[(index % base) as usize] as f64 / denom;
        index /= base;
    }
    inv
}

/// `count` quasi-random points in the interior of `domain`.
pub fn sample_box(domain: &DomainBox, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = domain.dim();
    if n > PRIMES.len() {
        return Err(Error::InvalidArgument(format!(
            "sampling supports up to {} dimensions, got {n}",
            PRIMES.len()
        )));
    }
    let perms: Vec<Vec<u64>> = (0..n)
        .map(|dim| {
            let mut state = seed
                .wrapping_mul(0x2545f4914f6cdd1d)
                .wrapping_add(dim as u64 + 1);
            let mut p = permutation(PRIMES[dim], &mut state);
            // keep 0 fixed so index 0 never lands on the box face
            if let Some(pos) = p.iter().position(|&v| v == 0) {
                p.swap(0, pos);
            }
            p
        })
        .collect();
    Ok((0..count)
        .map(|j| {
            let unit: Vec<f64> = (0..n)
                .map(|dim| scrambled_radical_inverse(j as u64 + 1, PRIMES[dim], &perms[dim]))
                .collect();
            domain.from_unit(&unit)
        })
        .collect())
}
