//! Eigenstructure of small dense real matrices: paired left/right
//! eigenvectors, spectral projections, and resolvent-based contour
//! quadrature for eigenprojections.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::defaults;
use crate::error::{Error, Result};

const MAX_DIM: usize = 64;
const COND_LIMIT: f64 = 1e8;
const BIORTH_TOL: f64 = 1e-10;
const NULL_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-12;

/// Eigenvalues with biorthogonal right/left eigenvector systems.
///
/// Eigenvalues are sorted by descending real part, ties by ascending
/// imaginary part. `right` holds right eigenvectors as columns, `left` holds
/// left eigenvectors as rows, normalized so that `left * right = I`.
/// Complex-conjugate pairs are exact: the partner's eigenvalue and vector are
/// the conjugates of the primary's.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<Complex64>,
    right: DMatrix<Complex64>,
    left: DMatrix<Complex64>,
    pairing: Vec<Option<usize>>,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// Right eigenvector v_i (column).
    pub fn right_vector(&self, i: usize) -> DVector<Complex64> {
        self.right.column(i).into_owned()
    }

    /// Left eigenvector w_i, returned as a vector of the row entries.
    pub fn left_vector(&self, i: usize) -> DVector<Complex64> {
        self.left.row(i).transpose()
    }

    pub fn right_matrix(&self) -> &DMatrix<Complex64> {
        &self.right
    }

    pub fn left_matrix(&self) -> &DMatrix<Complex64> {
        &self.left
    }

    /// Index of the conjugate partner for complex eigenvalues, None for real.
    pub fn pairing(&self) -> &[Option<usize>] {
        &self.pairing
    }

    pub fn max_re(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.eigenvalues.iter().all(|l| l.re < 0.0)
    }

    /// Spectral projection onto the i-th eigendirection, P_i = v_i w_i.
    pub fn eigenprojection(&self, i: usize) -> DMatrix<Complex64> {
        let v = self.right.column(i);
        let w = self.left.row(i);
        &v * &w
    }

    /// Sum of eigenprojections for all eigenvalues within `tol` of `lambda`
    /// (the projection onto a repeated eigenvalue's full eigenspace).
    pub fn eigenprojection_for(&self, lambda: Complex64, tol: f64) -> DMatrix<Complex64> {
        let n = self.n();
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            if (self.eigenvalues[i] - lambda).norm() <= tol {
                p += self.eigenprojection(i);
            }
        }
        p
    }

    /// Reconstruct the original matrix as V diag(lambda) W.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.n();
        let lam = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            self.eigenvalues.iter().copied(),
        ));
        &self.right * lam * &self.left
    }

    /// Reorder by a permutation: entry t of the result is entry perm[t].
    pub fn reorder(&self, perm: &[usize]) -> Result<Spectrum> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidArgument(format!(
                    "invalid permutation {perm:?}"
                )));
            }
            seen[p] = true;
        }
        let mut inverse = vec![0usize; n];
        for (t, &p) in perm.iter().enumerate() {
            inverse[p] = t;
        }
        let eigenvalues = perm.iter().map(|&p| self.eigenvalues[p]).collect();
        let right = DMatrix::from_columns(
            &perm.iter().map(|&p| self.right.column(p)).collect::<Vec<_>>(),
        );
        let left_rows: Vec<_> = perm.iter().map(|&p| self.left.row(p)).collect();
        let left = DMatrix::from_rows(&left_rows);
        let pairing = perm
            .iter()
            .map(|&p| self.pairing[p].map(|q| inverse[q]))
            .collect();
        Ok(Spectrum {
            eigenvalues,
            right,
            left,
            pairing,
        })
    }

    /// Reorder this spectrum so that entry t is the (unused) eigenvalue
    /// closest to `reference`'s entry t. Used to keep parameter sweeps on a
    /// consistent branch.
    pub fn match_to(&self, reference: &Spectrum) -> Result<Spectrum> {
        let perm = self.match_permutation(reference)?;
        self.reorder(&perm)
    }

    /// The permutation `match_to` would apply, for callers that keep other
    /// per-eigenvalue data aligned with the spectrum.
    pub fn match_permutation(&self, reference: &Spectrum) -> Result<Vec<usize>> {
        if reference.n() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: reference.n(),
            });
        }
        let n = self.n();
        let mut used = vec![false; n];
        let mut perm = Vec::with_capacity(n);
        for t in 0..n {
            let target = reference.eigenvalues[t];
            let mut best = None;
            let mut best_d = f64::INFINITY;
            for (j, &l) in self.eigenvalues.iter().enumerate() {
                if !used[j] {
                    let d = (l - target).norm();
                    if d < best_d {
                        best_d = d;
                        best = Some(j);
                    }
                }
            }
            let j = best.expect("unused eigenvalue remains");
            used[j] = true;
            perm.push(j);
        }
        Ok(perm)
    }

    /// Serializable snapshot: eigenvalues as [re, im], matrices row-major
    /// with interleaved re/im entries.
    pub fn to_record(&self) -> SpectrumRecord {
        let dump = |m: &DMatrix<Complex64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| {
                    (0..m.ncols())
                        .flat_map(|j| [m[(i, j)].re, m[(i, j)].im])
                        .collect()
                })
                .collect()
        };
        SpectrumRecord {
            eigenvalues: self.eigenvalues.iter().map(|l| [l.re, l.im]).collect(),
            right_rows: dump(&self.right),
            left_rows: dump(&self.left),
            pairing: self.pairing.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRecord {
    pub eigenvalues: Vec<[f64; 2]>,
    pub right_rows: Vec<Vec<f64>>,
    pub left_rows: Vec<Vec<f64>>,
    pub pairing: Vec<Option<usize>>,
}

fn cmax_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Decompose a real square matrix into eigenvalues and biorthogonal
/// eigenvector systems. Fails with `NonDiagonalizable` when an eigenvalue's
/// geometric multiplicity falls short or the eigenvector basis is too
/// ill-conditioned to invert reliably (cond > 1e8).
pub fn eigen_decompose(a: &DMatrix<f64>) -> Result<Spectrum> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "matrix must be square, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 || n > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "matrix dimension {n} outside supported range 1..={MAX_DIM}"
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }

    let scale = a.norm().max(1.0);
    let cluster_tol = 1e-8 * scale;

    let raw: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        raw[j]
            .re
            .total_cmp(&raw[i].re)
            .then(raw[i].im.total_cmp(&raw[j].im))
    });
    let mut eigenvalues: Vec<Complex64> = order.iter().map(|&i| raw[i]).collect();

    // group numerically equal eigenvalues into clusters of (start, len)
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || (eigenvalues[i] - eigenvalues[start]).norm() > cluster_tol {
            clusters.push((start, i - start));
            start = i;
        }
    }

    let mut columns: Vec<Option<DVector<Complex64>>> = vec![None; n];
    let mut pairing: Vec<Option<usize>> = vec![None; n];

    for &(c_start, c_len) in &clusters {
        if columns[c_start].is_some() {
            continue; // already filled as a conjugate partner
        }
        let mean = eigenvalues[c_start..c_start + c_len]
            .iter()
            .sum::<Complex64>()
            / c_len as f64;
        if mean.im.abs() <= cluster_tol {
            let lambda = Complex64::new(mean.re, 0.0);
            let basis = real_null_basis(a, mean.re, c_len, scale)?;
            for (t, v) in basis.into_iter().enumerate() {
                eigenvalues[c_start + t] = lambda;
                columns[c_start + t] = Some(v);
            }
        } else {
            // complex cluster: compute one side, conjugate for the partner
            let (primary, partner_val) = if mean.im < 0.0 {
                (mean, mean.conj())
            } else {
                (mean.conj(), mean)
            };
            let partner = clusters
                .iter()
                .find(|&&(s, l)| {
                    s != c_start
                        && l == c_len
                        && (eigenvalues[s] - eigenvalues[c_start].conj()).norm() <= cluster_tol
                })
                .copied()
                .ok_or_else(|| Error::NonDiagonalizable {
                    detail: format!(
                        "no conjugate partner cluster for eigenvalue {}",
                        eigenvalues[c_start]
                    ),
                })?;
            let (p_start, _) = partner;
            let (lo, hi) = if mean.im < 0.0 {
                (c_start, p_start)
            } else {
                (p_start, c_start)
            };
            let basis = complex_null_basis(a, primary, c_len, scale)?;
            for (t, v) in basis.into_iter().enumerate() {
                eigenvalues[lo + t] = primary;
                eigenvalues[hi + t] = partner_val;
                columns[hi + t] = Some(v.map(|z| z.conj()));
                columns[lo + t] = Some(v);
                pairing[lo + t] = Some(hi + t);
                pairing[hi + t] = Some(lo + t);
            }
        }
    }

    let cols: Vec<DVector<Complex64>> = columns
        .into_iter()
        .map(|c| c.expect("all eigenvector slots filled"))
        .collect();
    let right = DMatrix::from_columns(&cols);

    let svd = right.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > COND_LIMIT {
        return Err(Error::NonDiagonalizable {
            detail: format!(
                "eigenvector basis condition number {:.3e} exceeds {COND_LIMIT:.1e}",
                if smin > 0.0 { smax / smin } else { f64::INFINITY }
            ),
        });
    }

    let mut left = right.clone().try_inverse().ok_or_else(|| Error::NonDiagonalizable {
        detail: "eigenvector basis not invertible".into(),
    })?;
    // one Newton step tightens W to a two-sided inverse well past 1e-10
    let eye = DMatrix::<Complex64>::identity(n, n);
    left = &left * (&eye * Complex64::new(2.0, 0.0) - &right * &left);

    let biorth = cmax_abs(&(&left * &right - &eye)).max(cmax_abs(&(&right * &left - &eye)));
    if biorth > BIORTH_TOL {
        return Err(Error::NonDiagonalizable {
            detail: format!("biorthogonality residual {biorth:.3e} exceeds {BIORTH_TOL:.1e}"),
        });
    }

    Ok(Spectrum {
        eigenvalues,
        right,
        left,
        pairing,
    })
}

/// Null-space basis of (A - lambda I) for real lambda, via real SVD.
fn real_null_basis(
    a: &DMatrix<f64>,
    lambda: f64,
    want: usize,
    scale: f64,
) -> Result<Vec<DVector<Complex64>>> {
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    if shifted.norm() == 0.0 {
        // A = lambda I: the whole space; standard basis is canonical
        return Ok((0..want)
            .map(|t| {
                DVector::from_fn(n, |r, _| {
                    Complex64::new(if r == t { 1.0 } else { 0.0 }, 0.0)
                })
            })
            .collect());
    }
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("svd with v_t");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values.max().max(scale * f64::EPSILON);
    let cutoff = NULL_TOL * smax;
    if svd.singular_values[idx[want - 1]] > cutoff {
        return Err(Error::NonDiagonalizable {
            detail: format!(
                "eigenvalue {lambda} has algebraic multiplicity {want} but null residual {:.3e} > {:.3e}",
                svd.singular_values[idx[want - 1]],
                cutoff
            ),
        });
    }
    Ok((0..want)
        .map(|t| {
            let row = v_t.row(idx[t]).transpose();
            canonical_phase(row.map(|x| Complex64::new(x, 0.0)))
        })
        .collect())
}

/// Null-space basis of (A - lambda I) for complex lambda, via complex SVD.
fn complex_null_basis(
    a: &DMatrix<f64>,
    lambda: Complex64,
    want: usize,
    scale: f64,
) -> Result<Vec<DVector<Complex64>>> {
    let n = a.nrows();
    let mut shifted = a.map(|x| Complex64::new(x, 0.0));
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("svd with v_t");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values.max().max(scale * f64::EPSILON);
    let cutoff = NULL_TOL * smax;
    if svd.singular_values[idx[want - 1]] > cutoff {
        return Err(Error::NonDiagonalizable {
            detail: format!(
                "eigenvalue {lambda} has algebraic multiplicity {want} but null residual {:.3e} > {:.3e}",
                svd.singular_values[idx[want - 1]],
                cutoff
            ),
        });
    }
    Ok((0..want)
        .map(|t| canonical_phase(v_t.row(idx[t]).adjoint()))
        .collect())
}

/// Normalize so the largest-modulus entry (first on ties) is real positive.
fn canonical_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    let norm = v.norm();
    if norm > 0.0 {
        v /= Complex64::new(norm, 0.0);
    }
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best_mag + 1e-15 {
            best_mag = z.norm();
            best = i;
        }
    }
    let z = v[best];
    if z.norm() > 0.0 {
        let phase = z / z.norm();
        v /= phase;
        v[best] = Complex64::new(v[best].re, 0.0); // exact by construction
    }
    v
}

/// Circle contour for eigenprojection quadrature.
///
/// The circle must isolate a single eigenvalue (counted with multiplicity):
/// the margin radius/4 keeps every eigenvalue away from the circle itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourSpec {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(center: Complex64, radius: f64) -> Self {
        ContourSpec {
            center,
            radius,
            nodes: defaults::CONTOUR_NODES,
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn margin(&self) -> f64 {
        self.radius / 4.0
    }

    /// Check the circle against a spectrum; returns indices strictly inside.
    pub fn validate(&self, eigenvalues: &[Complex64]) -> Result<Vec<usize>> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "contour radius must be positive, got {}",
                self.radius
            )));
        }
        if self.nodes < 4 {
            return Err(Error::InvalidArgument(format!(
                "contour needs at least 4 nodes, got {}",
                self.nodes
            )));
        }
        let margin = self.margin();
        let mut inside = Vec::new();
        for (i, &l) in eigenvalues.iter().enumerate() {
            let dist_to_circle = ((l - self.center).norm() - self.radius).abs();
            if dist_to_circle < margin {
                return Err(Error::ContourTouchesSpectrum {
                    eigenvalue: format!("{l}"),
                    distance: dist_to_circle,
                    margin,
                });
            }
            if (l - self.center).norm() < self.radius {
                inside.push(i);
            }
        }
        if inside.is_empty() {
            return Err(Error::InvalidArgument(
                "contour encloses no eigenvalue".into(),
            ));
        }
        let first = eigenvalues[inside[0]];
        if inside
            .iter()
            .any(|&i| (eigenvalues[i] - first).norm() > 1e-8 * first.norm().max(1.0))
        {
            return Err(Error::InvalidArgument(
                "contour must enclose exactly one eigenvalue (with multiplicity)".into(),
            ));
        }
        Ok(inside)
    }
}

/// Solve (A - zeta I) X = B in complex arithmetic, rejecting near-singular
/// shifts by LU pivot magnitude.
fn shifted_solve(
    a: &DMatrix<f64>,
    zeta: Complex64,
    b: DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let mut m = a.map(|x| Complex64::new(x, 0.0));
    for i in 0..n {
        m[(i, i)] -= zeta;
    }
    let lu = m.lu();
    let min_pivot = lu
        .u()
        .diagonal()
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    if min_pivot < PIVOT_TOL {
        return Err(Error::NearSingular { pivot: min_pivot });
    }
    lu.solve(&b).ok_or(Error::NearSingular { pivot: min_pivot })
}

/// Apply the resolvent: x = (A - zeta I)^{-1} b.
pub fn resolvent_apply(
    a: &DMatrix<f64>,
    zeta: Complex64,
    b: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let rhs = DMatrix::from_columns(&[b.clone()]);
    Ok(shifted_solve(a, zeta, rhs)?.column(0).into_owned())
}

/// Eigenprojection by trapezoid quadrature of the resolvent around the
/// contour: P = -(r/N) sum_j e^{i theta_j} (A - zeta_j I)^{-1}.
///
/// The trapezoid rule on a circle converges geometrically in the node count,
/// with rate set by the distance from the circle to the nearest eigenvalue.
pub fn eigenprojection_contour(
    a: &DMatrix<f64>,
    contour: &ContourSpec,
) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let eigenvalues: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
    contour.validate(&eigenvalues)?;

    let eye = DMatrix::<Complex64>::identity(n, n);
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..contour.nodes {
        let theta = 2.0 * std::f64::consts::PI * (j as f64) / (contour.nodes as f64);
        let dir = Complex64::new(theta.cos(), theta.sin());
        let zeta = contour.center + contour.radius * dir;
        let resolvent = shifted_solve(a, zeta, eye.clone())?;
        acc += resolvent * dir;
    }
    Ok(acc * Complex64::new(-contour.radius / contour.nodes as f64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfield::quadratic_demo_system;

    fn cdist(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        cmax_abs(&(a - b))
    }

    /// Deterministic pseudo-random Hurwitz matrix for test fixtures.
    fn seeded_hurwitz(n: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut a = DMatrix::from_fn(n, n, |_, _| next() * 2.0);
        let eigs = a.complex_eigenvalues();
        let max_re = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            a[(i, i)] -= max_re + 0.5;
        }
        a
    }

    #[test]
    fn demo_jacobian_spectrum() {
        let sys = quadratic_demo_system(1.0);
        let f = sys.materialize(&[0.25]).unwrap();
        let a = f.jacobian_at(&[0.0, 0.0]).unwrap();
        let s = eigen_decompose(&a).unwrap();
        assert_eq!(s.eigenvalues()[0], Complex64::new(-0.75, 0.0));
        assert_eq!(s.eigenvalues()[1], Complex64::new(-1.0, 0.0));
        assert_eq!(s.pairing(), &[None, None]);
        // diagonal matrix: eigenvectors are coordinate axes
        assert!((s.right_vector(0)[1].re - 1.0).abs() < 1e-14);
        assert!((s.right_vector(1)[0].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_block_conjugate_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
        let s = eigen_decompose(&a).unwrap();
        assert_eq!(s.eigenvalues()[0], Complex64::new(-1.0, -2.0));
        assert_eq!(s.eigenvalues()[1], Complex64::new(-1.0, 2.0));
        assert_eq!(s.pairing(), &[Some(1), Some(0)]);
        let v0 = s.right_vector(0);
        let v1 = s.right_vector(1);
        for i in 0..2 {
            assert_eq!(v1[i], v0[i].conj(), "partner vector must be exact conjugate");
        }
        // eigenvector residual
        let av = a.map(|x| Complex64::new(x, 0.0)) * &v0;
        let lv = v0 * s.eigenvalues()[0];
        assert!(cmax_abs(&DMatrix::from_columns(&[av - lv])) < 1e-12);
    }

    #[test]
    fn repeated_eigenvalue_full_eigenspace() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -1.0]));
        let s = eigen_decompose(&a).unwrap();
        assert_eq!(s.eigenvalues(), &[Complex64::new(-1.0, 0.0); 2]);
        let eye = DMatrix::<Complex64>::identity(2, 2);
        assert!(cdist(s.right_matrix(), &eye) < 1e-12);
    }

    #[test]
    fn jordan_block_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        assert!(matches!(
            eigen_decompose(&a),
            Err(Error::NonDiagonalizable { .. })
        ));
        // near-defective: distinct eigenvalues but nearly parallel eigenvectors
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0 - 1e-10]);
        assert!(matches!(
            eigen_decompose(&b),
            Err(Error::NonDiagonalizable { .. })
        ));
    }

    #[test]
    fn random_matrices_reconstruct() {
        for seed in 0..20u64 {
            let n = 2 + (seed as usize % 5);
            let a = seeded_hurwitz(n, seed + 1);
            let s = eigen_decompose(&a).unwrap();
            let ac = a.map(|x| Complex64::new(x, 0.0));
            assert!(
                cdist(&s.reconstruct(), &ac) < 1e-9 * a.norm().max(1.0),
                "seed {seed}: reconstruction residual too large"
            );
            let eye = DMatrix::<Complex64>::identity(n, n);
            assert!(cmax_abs(&(s.left_matrix() * s.right_matrix() - &eye)) < 1e-10);
            // sorted by descending real part
            for i in 1..n {
                assert!(s.eigenvalues()[i - 1].re >= s.eigenvalues()[i].re - 1e-12);
            }
        }
    }

    #[test]
    fn projection_hand_case() {
        // A = [[-1,1],[0,-2]]: P for lambda=-1 is [[1,1],[0,0]]
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
        let s = eigen_decompose(&a).unwrap();
        assert_eq!(s.eigenvalues()[0], Complex64::new(-1.0, 0.0));
        let p = s.eigenprojection(0);
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0])
            .map(|x| Complex64::new(x, 0.0));
        assert!(cdist(&p, &want) < 1e-12);
    }

    #[test]
    fn projections_resolve_identity_idempotent_commute() {
        for seed in 0..10u64 {
            let n = 3 + (seed as usize % 3);
            let a = seeded_hurwitz(n, seed + 100);
            let s = eigen_decompose(&a).unwrap();
            let ac = a.map(|x| Complex64::new(x, 0.0));
            let mut sum = DMatrix::<Complex64>::zeros(n, n);
            for i in 0..n {
                let p = s.eigenprojection(i);
                sum += &p;
                assert!(cdist(&(&p * &p), &p) < 1e-9, "idempotence seed {seed} i {i}");
                assert!(
                    cmax_abs(&(&ac * &p - &p * &ac)) < 1e-9 * a.norm().max(1.0),
                    "commutation seed {seed} i {i}"
                );
                if let Some(j) = s.pairing()[i] {
                    let q = s.eigenprojection(j);
                    let max_im = (&p + &q).iter().map(|z| z.im.abs()).fold(0.0, f64::max);
                    assert!(max_im < 1e-10, "pair projection must be real");
                }
            }
            let eye = DMatrix::<Complex64>::identity(n, n);
            assert!(cdist(&sum, &eye) < 1e-9, "completeness seed {seed}");
        }
    }

    #[test]
    fn contour_matches_direct_projection() {
        // scalar sanity: the quadrature sign convention must give P = 1
        let a1 = DMatrix::from_row_slice(1, 1, &[-2.0]);
        let c = ContourSpec::new(Complex64::new(-2.0, 0.0), 1.0);
        let p = eigenprojection_contour(&a1, &c).unwrap();
        assert!((p[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-13);

        for seed in 0..8u64 {
            let n = 4;
            let a = seeded_hurwitz(n, seed + 300);
            let s = eigen_decompose(&a).unwrap();
            // pick the eigenvalue best separated from the rest
            let mut best = (0, 0.0f64);
            for i in 0..n {
                let d = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (s.eigenvalues()[i] - s.eigenvalues()[j]).norm())
                    .fold(f64::INFINITY, f64::min);
                if d > best.1 {
                    best = (i, d);
                }
            }
            let (i, sep) = best;
            if sep < 0.2 {
                continue; // too clustered for an isolating circle
            }
            let radius = (sep / 2.2).min(0.5);
            let contour = ContourSpec::new(s.eigenvalues()[i], radius);
            let direct = s.eigenprojection(i);
            let p64 = eigenprojection_contour(&a, &contour).unwrap();
            assert!(cdist(&p64, &direct) < 1e-8, "seed {seed}: 64-node error");
            let p128 = eigenprojection_contour(&a, &contour.clone().with_nodes(128)).unwrap();
            assert!(cdist(&p128, &direct) < 1e-12, "seed {seed}: 128-node error");
        }
    }

    #[test]
    fn contour_rejects_touching_spectrum() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        // circle through -2 exactly
        let c = ContourSpec::new(Complex64::new(-1.0, 0.0), 1.0);
        assert!(matches!(
            eigenprojection_contour(&a, &c),
            Err(Error::ContourTouchesSpectrum { .. })
        ));
        // empty circle
        let c = ContourSpec::new(Complex64::new(5.0, 0.0), 0.5);
        assert!(matches!(
            eigenprojection_contour(&a, &c),
            Err(Error::InvalidArgument(_))
        ));
        // two distinct eigenvalues enclosed
        let c = ContourSpec::new(Complex64::new(-1.5, 0.0), 0.8);
        assert!(eigenprojection_contour(&a, &c).is_err());
    }

    #[test]
    fn resolvent_solves_shifted_system() {
        let a = seeded_hurwitz(5, 42);
        let zeta = Complex64::new(0.3, 0.7);
        let b = DVector::from_fn(5, |i, _| Complex64::new(1.0 + i as f64, -0.5 * i as f64));
        let x = resolvent_apply(&a, zeta, &b).unwrap();
        let mut shifted = a.map(|v| Complex64::new(v, 0.0));
        for i in 0..5 {
            shifted[(i, i)] -= zeta;
        }
        let residual = shifted * &x - &b;
        assert!(residual.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);

        // shifting exactly onto an eigenvalue must report NearSingular
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let b2 = DVector::from_element(2, Complex64::new(1.0, 0.0));
        assert!(matches!(
            resolvent_apply(&d, Complex64::new(-1.0, 0.0), &b2),
            Err(Error::NearSingular { .. })
        ));
    }

    #[test]
    fn match_to_reorders_branch() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -3.0]));
        let s = eigen_decompose(&a).unwrap();
        // reference with the order flipped
        let reference = s.reorder(&[2, 1, 0]).unwrap();
        let matched = s.match_to(&reference).unwrap();
        assert_eq!(matched.eigenvalues(), reference.eigenvalues());
        let eye = DMatrix::<Complex64>::identity(3, 3);
        assert!(cmax_abs(&(matched.left_matrix() * matched.right_matrix() - &eye)) < 1e-10);
    }
}
