//! Data-driven approximation of the flow generator on a monomial
//! dictionary, and recovery of principal eigenfunction coefficients from
//! it. Given samples x_j, the matrix L with (L m_a)(x) = grad(m_a) . f(x)
//! on the dictionary span is fit by least squares; eigenvectors of L^T are
//! candidate eigenfunction coefficient vectors, and the ones whose
//! degree-1 part matches the left eigenvectors of Df(0) are the principal
//! ones. Repeated eigenvalues are resolved inside each eigenvalue cluster
//! by that degree-1 matching rather than by whatever basis the
//! eigensolver happens to return.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;

use crate::cpoly::CPoly;
use crate::error::{Error, Result};
use crate::polyfield::{MultiIndex, PolyMap};
use crate::spectral::{eigen_decompose, Spectrum};

/// Gram condition bound; cond(Psi)^2 beyond this makes the normal
/// equations meaningless in f64.
pub const GRAM_COND_LIMIT: f64 = 1e12;

/// Ratio of the reference spectral gap used as the eigenvalue matching
/// radius.
pub const MATCH_GAP_FRACTION: f64 = 0.1;

/// Monomial observable dictionary. Always contains every coordinate
/// function and never the constant, so degree-1 matching against a
/// spectrum is well posed.
#[derive(Debug, Clone)]
pub struct Dictionary {
    n: usize,
    monomials: Vec<MultiIndex>,
}

impl Dictionary {
    /// All monomials with 1 <= degree <= d, ordered by degree and then so
    /// that x1 precedes x2 within each degree.
    pub fn up_to_degree(n: usize, d: u32) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument(
                "dictionary needs n >= 1 and degree >= 1".into(),
            ));
        }
        let all = crate::polyfield::multi_indices_up_to(n, d, crate::defaults::ENUMERATION_BUDGET)?;
        let mut monomials: Vec<MultiIndex> =
            all.into_iter().filter(|m| m.degree() >= 1).collect();
        monomials.sort_by(|a, b| {
            a.degree()
                .cmp(&b.degree())
                .then_with(|| b.exponents().cmp(a.exponents()))
        });
        Ok(Dictionary { n, monomials })
    }

    /// Explicit monomial list in the caller's order. Every coordinate x_j
    /// must appear, the constant may not, and repeats are rejected.
    pub fn from_monomials(n: usize, monomials: Vec<MultiIndex>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for m in &monomials {
            if m.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.len(),
                });
            }
            if m.degree() == 0 {
                return Err(Error::InvalidArgument(
                    "constant observable is not allowed in the dictionary".into(),
                ));
            }
            if !seen.insert(m.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "repeated dictionary monomial {m}"
                )));
            }
        }
        for j in 0..n {
            let unit = MultiIndex::unit(n, j);
            if !monomials.contains(&unit) {
                return Err(Error::InvalidArgument(format!(
                    "dictionary must contain coordinate x{}",
                    j + 1
                )));
            }
        }
        Ok(Dictionary { n, monomials })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    /// Position of each coordinate monomial x_j in the dictionary.
    pub fn coordinate_positions(&self) -> Vec<usize> {
        (0..self.n)
            .map(|j| {
                let unit = MultiIndex::unit(self.n, j);
                self.monomials.iter().position(|m| *m == unit).unwrap()
            })
            .collect()
    }

    /// Dictionary values at x, one entry per monomial.
    pub fn evaluate_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self.monomials.iter().map(|m| m.eval(x)).collect())
    }

    /// grad(m_a)(x) . fx for each monomial, with fx = f(x) precomputed.
    fn derivative_row(&self, x: &[f64], fx: &[f64]) -> Vec<f64> {
        self.monomials
            .iter()
            .map(|m| {
                let mut acc = 0.0;
                for (i, &fv) in fx.iter().enumerate() {
                    let e = m.exponents()[i];
                    if e > 0 {
                        if let Some(dm) = m.checked_dec(i) {
                            acc += e as f64 * dm.eval(x) * fv;
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

/// Least-squares generator matrix on a dictionary, with its fit
/// diagnostics. `l[(a, b)]` is the coefficient of monomial b in the
/// derivative of monomial a along the field.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    l: DMatrix<f64>,
    conditioning: f64,
    residual: f64,
    samples_used: usize,
}

impl GeneratorMatrix {
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Condition number of the Gram matrix Psi^T Psi.
    pub fn conditioning(&self) -> f64 {
        self.conditioning
    }

    /// Relative fit residual; nonzero when the dictionary span is not
    /// invariant under differentiation along the field.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn samples_used(&self) -> usize {
        self.samples_used
    }
}

pub fn fit_generator(
    f: &PolyMap,
    dict: &Dictionary,
    samples: &[Vec<f64>],
) -> Result<GeneratorMatrix> {
    if f.n() != dict.n() {
        return Err(Error::DimensionMismatch {
            expected: dict.n(),
            got: f.n(),
        });
    }
    let nd = dict.len();
    let s = samples.len();
    if s < 2 * nd {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples for a dictionary of size {nd}, got {s}",
            2 * nd
        )));
    }

    let mut psi = DMatrix::<f64>::zeros(s, nd);
    let mut y = DMatrix::<f64>::zeros(s, nd);
    for (j, x) in samples.iter().enumerate() {
        let row = dict.evaluate_row(x)?;
        let fx = f.evaluate(x)?;
        let drow = dict.derivative_row(x, &fx);
        for a in 0..nd {
            psi[(j, a)] = row[a];
            y[(j, a)] = drow[a];
        }
    }

    let svd = psi.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let conditioning = if smin > 0.0 {
        (smax / smin).powi(2)
    } else {
        f64::INFINITY
    };
    if conditioning > GRAM_COND_LIMIT {
        return Err(Error::IllConditioned { cond: conditioning });
    }

    let z = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::InvalidArgument(format!("generator fit failed: {e}")))?;
    let residual = (&psi * &z - &y).norm() / y.norm().max(1.0);
    Ok(GeneratorMatrix {
        l: z.transpose(),
        conditioning,
        residual,
        samples_used: s,
    })
}

/// Eigenfunction coefficients recovered from a generator fit, matched to
/// one reference eigenvalue. `coefficients[a]` multiplies dictionary
/// monomial a; the degree-1 slice reproduces the reference left
/// eigenvector up to `degree1_gap`.
#[derive(Debug, Clone)]
pub struct MatchedEigenfunction {
    pub index: usize,
    pub eigenvalue: Complex64,
    pub eigenvalue_found: Complex64,
    pub coefficients: Vec<Complex64>,
    pub degree1_gap: f64,
}

impl MatchedEigenfunction {
    pub fn cpoly(&self, dict: &Dictionary) -> CPoly {
        let mut p = CPoly::zero(dict.n());
        for (m, c) in dict.monomials().iter().zip(&self.coefficients) {
            p.add_term(m.clone(), *c);
        }
        p
    }
}

/// Smallest positive pairwise distance of the reference eigenvalues;
/// falls back to max(1, max |lambda|) when all of them coincide.
fn reference_gap(lambda: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..lambda.len() {
        for j in (i + 1)..lambda.len() {
            let d = (lambda[i] - lambda[j]).norm();
            if d > 1e-12 {
                gap = gap.min(d);
            }
        }
    }
    if gap.is_finite() {
        gap
    } else {
        lambda.iter().map(|l| l.norm()).fold(1.0, f64::max)
    }
}

pub fn eigenfunctions_from_generator(
    gm: &GeneratorMatrix,
    dict: &Dictionary,
    reference: &Spectrum,
) -> Result<Vec<MatchedEigenfunction>> {
    let n = reference.n();
    if dict.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: dict.n(),
        });
    }
    let nd = dict.len();
    let spec_l = eigen_decompose(&gm.l().transpose())?;
    let coord = dict.coordinate_positions();
    let limit = MATCH_GAP_FRACTION * reference_gap(reference.eigenvalues());

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let target = reference.eigenvalues()[i];
        let cluster: Vec<usize> = (0..nd)
            .filter(|&j| (spec_l.eigenvalues()[j] - target).norm() <= limit)
            .collect();
        if cluster.is_empty() {
            return Err(Error::NoMatch {
                target: format!("{target}"),
                limit,
            });
        }

        // degree-1 rows of the cluster's eigenvector span, against the
        // reference left eigenvector
        let mut pv = DMatrix::<Complex<f64>>::zeros(n, cluster.len());
        for (col, &j) in cluster.iter().enumerate() {
            let v = spec_l.right_vector(j);
            for (row, &p) in coord.iter().enumerate() {
                pv[(row, col)] = v[p];
            }
        }
        let w = reference.left_vector(i);
        let alpha = pv
            .clone()
            .svd(true, true)
            .solve(&w, 0.0)
            .map_err(|e| Error::InvalidArgument(format!("cluster match failed: {e}")))?;
        let degree1_gap = (&pv * &alpha - &w).norm();

        let mut c = DVector::<Complex<f64>>::zeros(nd);
        for (col, &j) in cluster.iter().enumerate() {
            c += spec_l.right_vector(j) * alpha[col];
        }
        let found = cluster
            .iter()
            .map(|&j| spec_l.eigenvalues()[j])
            .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
            .unwrap();
        out.push(MatchedEigenfunction {
            index: i,
            eigenvalue: target,
            eigenvalue_found: found,
            coefficients: c.iter().copied().collect(),
            degree1_gap,
        });
    }
    Ok(out)
}
