//! Sparse scalar polynomials with complex coefficients, used to build and
//! transform eigenfunction coefficient tables.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::polyfield::MultiIndex;

/// Scalar polynomial C[x_1..x_n] in sparse canonical form (graded-lex keys,
/// no exact-zero coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct CPoly {
    n: usize,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl CPoly {
    pub fn zero(n: usize) -> Self {
        CPoly {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn variable(n: usize, j: usize) -> Self {
        let mut p = CPoly::zero(n);
        p.add_term(MultiIndex::unit(n, j), Complex64::new(1.0, 0.0));
        p
    }

    pub fn from_real_terms(n: usize, terms: &BTreeMap<MultiIndex, f64>) -> Self {
        let mut p = CPoly::zero(n);
        for (m, c) in terms {
            p.add_term(m.clone(), Complex64::new(*c, 0.0));
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, Complex64> {
        &self.terms
    }

    pub fn coeff(&self, m: &MultiIndex) -> Complex64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: MultiIndex, c: Complex64) {
        debug_assert_eq!(m.len(), self.n);
        if c == Complex64::ZERO {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == Complex64::ZERO {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add_assign_scaled(&mut self, other: &CPoly, factor: Complex64) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c * factor);
        }
    }

    pub fn scaled(&self, factor: Complex64) -> CPoly {
        let mut out = CPoly::zero(self.n);
        out.add_assign_scaled(self, factor);
        out
    }

    pub fn mul(&self, other: &CPoly) -> CPoly {
        let mut out = CPoly::zero(self.n);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.add(mb), ca * cb);
            }
        }
        out
    }

    pub fn partial(&self, j: usize) -> CPoly {
        let mut out = CPoly::zero(self.n);
        for (m, c) in &self.terms {
            if let Some(dm) = m.checked_dec(j) {
                out.add_term(dm, c * f64::from(m.exponents()[j]));
            }
        }
        out
    }

    /// Terms of exactly the given total degree.
    pub fn degree_part(&self, d: u32) -> CPoly {
        let mut out = CPoly::zero(self.n);
        for (m, c) in &self.terms {
            if m.degree() == d {
                out.add_term(m.clone(), *c);
            }
        }
        out
    }

    /// Terms with total degree <= d.
    pub fn truncated(&self, d: u32) -> CPoly {
        let mut out = CPoly::zero(self.n);
        for (m, c) in &self.terms {
            if m.degree() <= d {
                out.add_term(m.clone(), *c);
            }
        }
        out
    }

    /// Drop terms with |c| < threshold.
    pub fn pruned(&self, threshold: f64) -> CPoly {
        let mut out = CPoly::zero(self.n);
        for (m, c) in &self.terms {
            if c.norm() >= threshold {
                out.terms.insert(m.clone(), *c);
            }
        }
        out
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        debug_assert_eq!(x.len(), self.n);
        let mut acc = Complex64::ZERO;
        for (m, c) in &self.terms {
            let mut t = *c;
            for (j, &e) in m.exponents().iter().enumerate() {
                t *= x[j].powu(e);
            }
            acc += t;
        }
        acc
    }

    pub fn eval_real(&self, x: &[f64]) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for (m, c) in &self.terms {
            acc += c * m.eval(x);
        }
        acc
    }

    /// Substitute x_j <- sum_k M[(j, k)] y_k. Each resulting coefficient
    /// table is still over n variables (M must be n x n).
    pub fn compose_linear(&self, m: &DMatrix<Complex64>) -> Result<CPoly> {
        if m.nrows() != self.n || m.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: m.nrows(),
            });
        }
        let n = self.n;
        // linear forms L_j(y) and their powers, computed on demand
        let forms: Vec<CPoly> = (0..n)
            .map(|j| {
                let mut f = CPoly::zero(n);
                for k in 0..n {
                    f.add_term(MultiIndex::unit(n, k), m[(j, k)]);
                }
                f
            })
            .collect();
        let mut max_pow = vec![0u32; n];
        for key in self.terms.keys() {
            for (j, &e) in key.exponents().iter().enumerate() {
                max_pow[j] = max_pow[j].max(e);
            }
        }
        let mut powers: Vec<Vec<CPoly>> = Vec::with_capacity(n);
        for j in 0..n {
            let mut ps = Vec::with_capacity(max_pow[j] as usize + 1);
            let mut one = CPoly::zero(n);
            one.add_term(MultiIndex::zero(n), Complex64::new(1.0, 0.0));
            ps.push(one);
            for p in 1..=max_pow[j] {
                let next = ps[p as usize - 1].mul(&forms[j]);
                ps.push(next);
            }
            powers.push(ps);
        }
        let mut out = CPoly::zero(n);
        for (key, c) in &self.terms {
            let mut term = CPoly::zero(n);
            term.add_term(MultiIndex::zero(n), *c);
            for (j, &e) in key.exponents().iter().enumerate() {
                if e > 0 {
                    term = term.mul(&powers[j][e as usize]);
                }
            }
            out.add_assign_scaled(&term, Complex64::new(1.0, 0.0));
        }
        Ok(out)
    }

    /// Conjugate all coefficients and permute variables:
    /// result(y) = conj(self)(y o perm), i.e. exponent vectors are permuted
    /// by `perm`. With `perm` swapping conjugate eigen-coordinate pairs this
    /// realizes pointwise complex conjugation of the polynomial on real
    /// states.
    pub fn conj_permuted(&self, perm: &[usize]) -> CPoly {
        let mut out = CPoly::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.permuted(perm), c.conj());
        }
        out
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part over coefficients.
    pub fn max_abs_im(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Real parts of the coefficients as a plain table.
    pub fn real_coeffs(&self) -> BTreeMap<MultiIndex, f64> {
        self.terms
            .iter()
            .filter(|(_, c)| c.re != 0.0)
            .map(|(m, c)| (m.clone(), c.re))
            .collect()
    }
}
