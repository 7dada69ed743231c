//! Truncated Lie algebras generated by matrices or polynomial vector fields,
//! with bracket-word provenance, relation certificates between the two
//! sides, and the adjoint spectrum of a matrix inside its own algebra.
//!
//! Bracket conventions: vector fields use [f,g] = Dg.f - Df.g (polyfield);
//! the matrix bracket here is [M1,M2] = M2 M1 - M1 M2, which is exactly the
//! Jacobian at the origin of the field bracket, so matrix words track field
//! words entry for entry. `adjoint_spectrum` reports the operator
//! commutator M -> A M - M A; the eigenvalue difference set is symmetric,
//! so the reported spectrum does not depend on that orientation choice.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::polyfield::{ControlAffineSystem, MultiIndex, PolyMap};

pub const DEFAULT_DEPTH: usize = 6;
pub const DEFAULT_DEGREE_CAP: u32 = 8;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Either a square matrix or a polynomial vector field; the two kinds never
/// mix inside one algebra.
#[derive(Debug, Clone, PartialEq)]
pub enum LiePayload {
    Matrix(DMatrix<f64>),
    Field(PolyMap),
}

/// Coefficient table of a payload. Matrix entry (i, j) shares the key of
/// the linear field coefficient x_j -> component i, which makes the
/// Jacobian-at-origin correspondence a literal slice of the coordinates.
type Coords = BTreeMap<(usize, MultiIndex), f64>;

impl LiePayload {
    pub fn ambient_dim(&self) -> usize {
        match self {
            LiePayload::Matrix(m) => m.nrows(),
            LiePayload::Field(f) => f.n(),
        }
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self, LiePayload::Matrix(_))
    }

    pub fn max_degree(&self) -> u32 {
        match self {
            LiePayload::Matrix(_) => 1,
            LiePayload::Field(f) => f.max_degree(),
        }
    }

    pub fn bracket(&self, other: &LiePayload) -> Result<LiePayload> {
        match (self, other) {
            (LiePayload::Matrix(a), LiePayload::Matrix(b)) => {
                if a.nrows() != b.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: a.nrows(),
                        got: b.nrows(),
                    });
                }
                Ok(LiePayload::Matrix(b * a - a * b))
            }
            (LiePayload::Field(f), LiePayload::Field(g)) => {
                Ok(LiePayload::Field(f.lie_bracket(g)?))
            }
            _ => Err(Error::InvalidArgument(
                "cannot bracket a matrix with a vector field".into(),
            )),
        }
    }

    fn coords(&self) -> Coords {
        let mut out = Coords::new();
        match self {
            LiePayload::Matrix(m) => {
                let n = m.nrows();
                for i in 0..n {
                    for j in 0..m.ncols() {
                        if m[(i, j)] != 0.0 {
                            out.insert((i, MultiIndex::unit(n, j)), m[(i, j)]);
                        }
                    }
                }
            }
            LiePayload::Field(f) => {
                for (i, m, c) in f.terms() {
                    out.insert((i, m.clone()), c);
                }
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        match self {
            LiePayload::Matrix(m) => m.amax(),
            LiePayload::Field(f) => f.max_abs_coeff(),
        }
    }
}

/// Bracket word over generator symbols, e.g. [g0,[g1,g0]].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LieWord {
    Gen(usize),
    Bracket(Box<LieWord>, Box<LieWord>),
}

impl LieWord {
    pub fn bracket(a: LieWord, b: LieWord) -> LieWord {
        LieWord::Bracket(Box::new(a), Box::new(b))
    }

    /// Number of generator symbols in the word.
    pub fn len(&self) -> usize {
        match self {
            LieWord::Gen(_) => 1,
            LieWord::Bracket(a, b) => a.len() + b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn mirrored(&self) -> Option<LieWord> {
        match self {
            LieWord::Gen(_) => None,
            LieWord::Bracket(a, b) => Some(LieWord::bracket((**b).clone(), (**a).clone())),
        }
    }
}

impl fmt::Display for LieWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LieWord::Gen(i) => write!(f, "g{i}"),
            LieWord::Bracket(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// Evaluate a bracket word over concrete generator payloads.
pub fn eval_word(word: &LieWord, generators: &[LiePayload]) -> Result<LiePayload> {
    match word {
        LieWord::Gen(i) => generators
            .get(*i)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("generator g{i} out of range"))),
        LieWord::Bracket(a, b) => {
            let pa = eval_word(a, generators)?;
            let pb = eval_word(b, generators)?;
            pa.bracket(&pb)
        }
    }
}

#[derive(Debug, Clone)]
pub struct LieElement {
    pub word: LieWord,
    pub payload: LiePayload,
}

/// Outcome of enumerating one bracket word.
#[derive(Debug, Clone)]
pub enum WordResolution {
    /// Linearly independent: became basis element with this index.
    Basis(usize),
    /// Dependent: coefficients over the basis elements enumerated so far.
    Dependent(Vec<f64>),
    /// Field payload exceeded the degree cap; not vectorized.
    SkippedDegree,
}

/// One linear-independence decision, with the residual that drove it.
#[derive(Debug, Clone)]
pub struct RankDecision {
    pub word: LieWord,
    pub residual_ratio: f64,
    pub accepted: bool,
}

/// Basis of a generated algebra, truncated at a bracket depth and (for
/// fields) a polynomial degree, with the resolution of every enumerated
/// word.
#[derive(Debug, Clone)]
pub struct LieBasis {
    generator_count: usize,
    elements: Vec<LieElement>,
    depth: usize,
    degree_cap: u32,
    rank_tol: f64,
    coordinates: Vec<(LieWord, WordResolution)>,
    closed: bool,
    degree_truncated: bool,
    rank_log: Vec<RankDecision>,
}

impl LieBasis {
    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[LieElement] {
        &self.elements
    }

    pub fn generator_count(&self) -> usize {
        self.generator_count
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn degree_cap(&self) -> u32 {
        self.degree_cap
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Every enumerated word in order, with its resolution.
    pub fn coordinates(&self) -> &[(LieWord, WordResolution)] {
        &self.coordinates
    }

    /// True when one more bracket layer fit under the depth cutoff and
    /// added nothing, so the span is bracket-closed.
    pub fn closed(&self) -> bool {
        self.closed
    }

    /// True when some candidate field exceeded the degree cap and was
    /// dropped unvectorized.
    pub fn degree_truncated(&self) -> bool {
        self.degree_truncated
    }

    pub fn rank_log(&self) -> &[RankDecision] {
        &self.rank_log
    }
}

/// Incremental QR over sparse coefficient tables: orthonormal q vectors
/// plus the triangular factor, so candidates resolve to coefficients over
/// the original (unorthogonalized) basis payloads.
struct RankEngine {
    q: Vec<Coords>,
    /// r[t][s] = <q_s, b_t> for s <= t; r[t][t] is the residual norm of b_t.
    r: Vec<Vec<f64>>,
}

fn dot(a: &Coords, b: &Coords) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .map(|(k, v)| v * large.get(k).copied().unwrap_or(0.0))
        .sum()
}

fn axpy(y: &mut Coords, alpha: f64, x: &Coords) {
    for (k, v) in x {
        let entry = y.entry(k.clone()).or_insert(0.0);
        *entry += alpha * v;
        if *entry == 0.0 {
            y.remove(k);
        }
    }
}

fn norm2(a: &Coords) -> f64 {
    dot(a, a).sqrt()
}

struct Resolution {
    coeffs: Vec<f64>,
    residual_ratio: f64,
    residual: Coords,
    qc: Vec<f64>,
}

impl RankEngine {
    fn new() -> Self {
        RankEngine {
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    fn resolve(&self, v: &Coords) -> Resolution {
        let nv = norm2(v);
        let mut residual = v.clone();
        let mut qc = vec![0.0; self.q.len()];
        // two Gram-Schmidt passes keep the projection accurate even for
        // nearly dependent candidates
        for _ in 0..2 {
            for (s, qs) in self.q.iter().enumerate() {
                let c = dot(&residual, qs);
                qc[s] += c;
                axpy(&mut residual, -c, qs);
            }
        }
        let ratio = if nv == 0.0 { 0.0 } else { norm2(&residual) / nv };
        // back-substitute R coeffs = qc
        let t_max = self.q.len();
        let mut coeffs = vec![0.0; t_max];
        for t in (0..t_max).rev() {
            let mut s = qc[t];
            for t2 in t + 1..t_max {
                s -= self.r[t2][t] * coeffs[t2];
            }
            coeffs[t] = s / self.r[t][t];
        }
        Resolution {
            coeffs,
            residual_ratio: ratio,
            residual,
            qc,
        }
    }

    fn push(&mut self, res: Resolution) {
        let rn = norm2(&res.residual);
        let mut qnew = Coords::new();
        axpy(&mut qnew, 1.0 / rn, &res.residual);
        let mut col = res.qc;
        col.push(rn);
        self.q.push(qnew);
        self.r.push(col);
    }
}

/// Breadth-first bracket closure from the generators: layer L enumerates
/// [g_j, w] for basis words w of length L-1 and basis pairs [w_i, w_j] with
/// total length L, skipping a word when its mirror image was already seen
/// (the bracket is antisymmetric on both payload kinds). Stops at `depth`
/// or at the default dimension cap of 10 n^2.
pub fn generate_algebra(
    generators: &[LiePayload],
    depth: usize,
    degree_cap: u32,
    rank_tol: f64,
) -> Result<LieBasis> {
    let n = generators
        .first()
        .ok_or_else(|| Error::InvalidArgument("need at least one generator".into()))?
        .ambient_dim();
    generate_algebra_capped(generators, depth, degree_cap, rank_tol, 10 * n * n)
}

pub fn generate_algebra_capped(
    generators: &[LiePayload],
    depth: usize,
    degree_cap: u32,
    rank_tol: f64,
    dim_cap: usize,
) -> Result<LieBasis> {
    if generators.is_empty() {
        return Err(Error::InvalidArgument("need at least one generator".into()));
    }
    if depth < 1 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::InvalidArgument(
            "rank tolerance must lie in (0, 1)".into(),
        ));
    }
    let kind_matrix = generators[0].is_matrix();
    let n = generators[0].ambient_dim();
    for g in generators {
        if g.is_matrix() != kind_matrix {
            return Err(Error::InvalidArgument(
                "generators must all be matrices or all vector fields".into(),
            ));
        }
        if g.ambient_dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: g.ambient_dim(),
            });
        }
        if g.max_degree() > degree_cap {
            return Err(Error::InvalidArgument(
                "generator degree exceeds the degree cap".into(),
            ));
        }
    }

    let mut basis = LieBasis {
        generator_count: generators.len(),
        elements: Vec::new(),
        depth,
        degree_cap,
        rank_tol,
        coordinates: Vec::new(),
        closed: false,
        degree_truncated: false,
        rank_log: Vec::new(),
    };
    let mut engine = RankEngine::new();
    let mut seen: HashSet<LieWord> = HashSet::new();

    let consider = |basis: &mut LieBasis,
                        engine: &mut RankEngine,
                        word: LieWord,
                        payload: LiePayload|
     -> Result<()> {
        let res = engine.resolve(&payload.coords());
        let accepted = res.residual_ratio > rank_tol;
        basis.rank_log.push(RankDecision {
            word: word.clone(),
            residual_ratio: res.residual_ratio,
            accepted,
        });
        if accepted {
            if basis.elements.len() >= dim_cap {
                return Err(Error::DimensionExplosion { cap: dim_cap });
            }
            let index = basis.elements.len();
            engine.push(res);
            basis.elements.push(LieElement {
                word: word.clone(),
                payload,
            });
            basis.coordinates.push((word, WordResolution::Basis(index)));
        } else {
            basis
                .coordinates
                .push((word, WordResolution::Dependent(res.coeffs)));
        }
        Ok(())
    };

    for (j, g) in generators.iter().enumerate() {
        let word = LieWord::Gen(j);
        seen.insert(word.clone());
        consider(&mut basis, &mut engine, word, g.clone())?;
    }

    for layer in 2..=depth {
        // candidates bracket only elements retained before this layer;
        // anything new at this layer has word length `layer` already
        let snapshot: Vec<(LieWord, LiePayload)> = basis
            .elements
            .iter()
            .map(|e| (e.word.clone(), e.payload.clone()))
            .collect();
        let mut candidates: Vec<(LieWord, LiePayload, LiePayload)> = Vec::new();
        for (j, g) in generators.iter().enumerate() {
            for (w, p) in &snapshot {
                if w.len() == layer - 1 {
                    candidates.push((
                        LieWord::bracket(LieWord::Gen(j), w.clone()),
                        g.clone(),
                        p.clone(),
                    ));
                }
            }
        }
        for (i1, (w1, p1)) in snapshot.iter().enumerate() {
            for (w2, p2) in snapshot.iter().skip(i1 + 1) {
                if w1.len() + w2.len() == layer {
                    candidates.push((
                        LieWord::bracket(w1.clone(), w2.clone()),
                        p1.clone(),
                        p2.clone(),
                    ));
                }
            }
        }
        for (word, left, right) in candidates {
            if seen.contains(&word) {
                continue;
            }
            if let Some(m) = word.mirrored() {
                if seen.contains(&m) {
                    continue;
                }
            }
            if let (LieWord::Bracket(a, b), _) = (&word, ()) {
                if a == b {
                    continue;
                }
            }
            seen.insert(word.clone());
            let payload = left.bracket(&right)?;
            if !kind_matrix && payload.max_degree() > degree_cap {
                basis.degree_truncated = true;
                basis
                    .coordinates
                    .push((word, WordResolution::SkippedDegree));
                continue;
            }
            consider(&mut basis, &mut engine, word, payload)?;
        }
    }

    let max_len = basis
        .elements
        .iter()
        .map(|e| e.word.len())
        .max()
        .unwrap_or(1);
    basis.closed = max_len + 1 <= depth;
    Ok(basis)
}

/// Which side drives the bracket-word enumeration in `check_isomorphism`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Fields,
    Matrices,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Fields => write!(f, "fields"),
            Side::Matrices => write!(f, "matrices"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Isomorphic,
    DimensionMismatch,
    RelationMismatch,
    InconclusiveTruncation,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Isomorphic => "isomorphic",
            Verdict::DimensionMismatch => "dimension-mismatch",
            Verdict::RelationMismatch => "relation-mismatch",
            Verdict::InconclusiveTruncation => "inconclusive-truncation",
        };
        write!(f, "{s}")
    }
}

/// Result of comparing the vector-field algebra of a system against the
/// matrix algebra of its origin Jacobians, word by word. `isomorphic` means
/// every enumerated word had identical linear dependencies on both sides
/// and the driving side was bracket-closed within the cutoffs; a
/// relation-mismatch carries the first word whose dependencies differ.
/// This certifies only the hypothesis at the tested depth: a mismatch means
/// "not verified here", not an impossibility result.
#[derive(Debug, Clone)]
pub struct IsomorphismCertificate {
    pub verdict: Verdict,
    pub dim_vf: usize,
    pub dim_mat: usize,
    pub witness: Option<LieWord>,
    pub depth: usize,
    pub degree_cap: u32,
    pub rank_tol: f64,
    pub max_coord_gap: f64,
    pub driver: Side,
}

impl IsomorphismCertificate {
    pub fn to_text(&self) -> String {
        let witness = self
            .witness
            .as_ref()
            .map(|w| w.to_string())
            .unwrap_or_else(|| "-".into());
        format!(
            "verdict: {}\ndim fields: {}\ndim matrices: {}\nwitness: {}\ndepth: {}\ndegree cap: {}\nrank tol: {:e}\nmax coordinate gap: {:.3e}\ndriver: {}\n",
            self.verdict,
            self.dim_vf,
            self.dim_mat,
            witness,
            self.depth,
            self.degree_cap,
            self.rank_tol,
            self.max_coord_gap,
            self.driver,
        )
    }
}

pub fn check_isomorphism(
    sys: &ControlAffineSystem,
    depth: usize,
    degree_cap: u32,
    rank_tol: f64,
) -> Result<IsomorphismCertificate> {
    check_isomorphism_driven(sys, depth, degree_cap, rank_tol, Side::Fields)
}

pub fn check_isomorphism_driven(
    sys: &ControlAffineSystem,
    depth: usize,
    degree_cap: u32,
    rank_tol: f64,
    driver: Side,
) -> Result<IsomorphismCertificate> {
    let mut field_gens: Vec<LiePayload> = vec![LiePayload::Field(sys.drift().clone())];
    for g in sys.controls() {
        field_gens.push(LiePayload::Field(g.clone()));
    }
    let mat_gens: Vec<LiePayload> = field_gens
        .iter()
        .map(|p| match p {
            LiePayload::Field(f) => LiePayload::Matrix(f.jacobian_at_origin()),
            LiePayload::Matrix(_) => unreachable!(),
        })
        .collect();

    let (drive_gens, other_gens) = match driver {
        Side::Fields => (&field_gens, &mat_gens),
        Side::Matrices => (&mat_gens, &field_gens),
    };
    let basis = generate_algebra(drive_gens, depth, degree_cap, rank_tol)?;

    // replay the identical word enumeration on the other side
    let mut memo: HashMap<LieWord, LiePayload> = HashMap::new();
    for (j, g) in other_gens.iter().enumerate() {
        memo.insert(LieWord::Gen(j), g.clone());
    }
    let mut engine2 = RankEngine::new();
    let mut dim2 = 0usize;
    let mut witness: Option<LieWord> = None;
    let mut max_coord_gap = 0.0f64;
    let mut degree_truncated2 = false;

    'replay: for (word, resolution) in basis.coordinates() {
        if matches!(resolution, WordResolution::SkippedDegree) {
            continue;
        }
        let payload2 = match word {
            LieWord::Gen(j) => other_gens[*j].clone(),
            LieWord::Bracket(a, b) => {
                let pa = memo.get(a.as_ref()).expect("bracket child enumerated");
                let pb = memo.get(b.as_ref()).expect("bracket child enumerated");
                pa.bracket(pb)?
            }
        };
        if !payload2.is_matrix() && payload2.max_degree() > degree_cap {
            // the driving side fit under the cap but the replayed side does
            // not; the comparison at this word is unavailable
            degree_truncated2 = true;
            continue;
        }
        let res2 = engine2.resolve(&payload2.coords());
        let independent2 = res2.residual_ratio > rank_tol;
        match resolution {
            WordResolution::Basis(_) => {
                if independent2 {
                    engine2.push(res2);
                    dim2 += 1;
                    memo.insert(word.clone(), payload2);
                } else {
                    witness = Some(word.clone());
                    break 'replay;
                }
            }
            WordResolution::Dependent(c1) => {
                if independent2 {
                    witness = Some(word.clone());
                    break 'replay;
                }
                let scale = 1.0 + c1.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                let gap = c1
                    .iter()
                    .zip(&res2.coeffs)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                max_coord_gap = max_coord_gap.max(gap);
                if gap > 1e-6 * scale {
                    witness = Some(word.clone());
                    break 'replay;
                }
            }
            WordResolution::SkippedDegree => unreachable!(),
        }
    }

    let (dim_vf, dim_mat) = match driver {
        Side::Fields => (basis.dim(), dim2),
        Side::Matrices => (dim2, basis.dim()),
    };
    let verdict = if witness.is_some() {
        Verdict::RelationMismatch
    } else if !basis.closed() || basis.degree_truncated() || degree_truncated2 {
        Verdict::InconclusiveTruncation
    } else if dim_vf != dim_mat {
        Verdict::DimensionMismatch
    } else {
        Verdict::Isomorphic
    };
    Ok(IsomorphismCertificate {
        verdict,
        dim_vf,
        dim_mat,
        witness,
        depth,
        degree_cap,
        rank_tol,
        max_coord_gap,
        driver,
    })
}

/// Matrix of M -> A M - M A restricted to the span of a matrix basis,
/// returned through its eigenvalues (sorted by descending real part, then
/// ascending imaginary part). Every value lies within round-off of some
/// difference lambda_k - lambda_l of eigenvalues of A whenever the span is
/// invariant; `NotInvariant` reports the offending basis element otherwise.
pub fn adjoint_spectrum(a: &DMatrix<f64>, basis: &LieBasis) -> Result<Vec<Complex64>> {
    if basis.dim() == 0 {
        return Err(Error::InvalidArgument("empty basis".into()));
    }
    let mats: Vec<&DMatrix<f64>> = basis
        .elements
        .iter()
        .map(|e| match &e.payload {
            LiePayload::Matrix(m) => Ok(m),
            LiePayload::Field(_) => Err(Error::InvalidArgument(
                "adjoint spectrum needs a matrix basis".into(),
            )),
        })
        .collect::<Result<_>>()?;
    let n = mats[0].nrows();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.nrows(),
        });
    }

    let mut engine = RankEngine::new();
    for m in &mats {
        let res = engine.resolve(&LiePayload::Matrix((*m).clone()).coords());
        engine.push(res);
    }
    let r = basis.dim();
    let mut t = DMatrix::<f64>::zeros(r, r);
    for (col, m) in mats.iter().enumerate() {
        let image = LiePayload::Matrix(a * *m - *m * a);
        let res = engine.resolve(&image.coords());
        if res.residual_ratio > basis.rank_tol {
            return Err(Error::NotInvariant {
                residual: res.residual_ratio,
                tol: basis.rank_tol,
            });
        }
        for row in 0..r {
            t[(row, col)] = res.coeffs[row];
        }
    }
    let mut eig: Vec<Complex64> = t.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfield::quadratic_demo_system;

    fn mat(entries: [[f64; 2]; 2]) -> LiePayload {
        LiePayload::Matrix(DMatrix::from_row_slice(
            2,
            2,
            &[entries[0][0], entries[0][1], entries[1][0], entries[1][1]],
        ))
    }

    fn gens_sl2() -> Vec<LiePayload> {
        vec![mat([[0.0, 1.0], [0.0, 0.0]]), mat([[0.0, 0.0], [1.0, 0.0]])]
    }

    #[test]
    fn sl2_closes_at_dimension_three() {
        let basis =
            generate_algebra(&gens_sl2(), 4, DEFAULT_DEGREE_CAP, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(basis.dim(), 3);
        assert!(basis.closed());
        assert!(!basis.degree_truncated());
        // the new element is the commutator word
        assert_eq!(basis.elements()[2].word.to_string(), "[g0,g1]");
    }

    #[test]
    fn commuting_matrices_close_immediately() {
        let gens = vec![mat([[-1.0, 0.0], [0.0, -1.0]]), mat([[0.0, 0.0], [0.0, 1.0]])];
        let basis = generate_algebra(&gens, 6, DEFAULT_DEGREE_CAP, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(basis.dim(), 2);
        assert!(basis.closed());
        // [g0,g1] is recorded as dependent with zero coefficients
        let (w, res) = &basis.coordinates()[2];
        assert_eq!(w.to_string(), "[g0,g1]");
        match res {
            WordResolution::Dependent(c) => assert!(c.iter().all(|x| x.abs() < 1e-12)),
            other => panic!("expected dependent resolution, got {other:?}"),
        }
    }

    #[test]
    fn demo_fields_bracket_dimension() {
        let sys = quadratic_demo_system(1.0);
        let gens = vec![
            LiePayload::Field(sys.drift().clone()),
            LiePayload::Field(sys.controls()[0].clone()),
        ];
        let basis = generate_algebra(&gens, 6, 8, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(basis.dim(), 2, "commuting pair stays two-dimensional");
        assert!(basis.closed());

        let sys2 = quadratic_demo_system(2.0);
        let gens2 = vec![
            LiePayload::Field(sys2.drift().clone()),
            LiePayload::Field(sys2.controls()[0].clone()),
        ];
        let basis2 = generate_algebra(&gens2, 6, 8, DEFAULT_RANK_TOL).unwrap();
        assert!(basis2.dim() >= 3, "noncommuting pair grows");
    }

    #[test]
    fn payloads_match_word_reevaluation() {
        let sys = quadratic_demo_system(2.0);
        let gens = vec![
            LiePayload::Field(sys.drift().clone()),
            LiePayload::Field(sys.controls()[0].clone()),
        ];
        let basis = generate_algebra(&gens, 5, 8, DEFAULT_RANK_TOL).unwrap();
        for e in basis.elements() {
            let fresh = eval_word(&e.word, &gens).unwrap();
            match (&e.payload, &fresh) {
                (LiePayload::Field(a), LiePayload::Field(b)) => {
                    let diff = a.add_scaled(b, -1.0).unwrap();
                    assert!(diff.max_abs_coeff() < 1e-10);
                }
                _ => panic!("field payloads expected"),
            }
        }
    }

    #[test]
    fn jacobian_functoriality_word_by_word() {
        // degree-1 slice of each field word equals the matrix word built
        // from the origin Jacobians, including the bracket sign
        let sys = quadratic_demo_system(2.0);
        let field_gens = vec![
            LiePayload::Field(sys.drift().clone()),
            LiePayload::Field(sys.controls()[0].clone()),
        ];
        let mat_gens: Vec<LiePayload> = field_gens
            .iter()
            .map(|p| match p {
                LiePayload::Field(f) => LiePayload::Matrix(f.jacobian_at_origin()),
                _ => unreachable!(),
            })
            .collect();
        let basis = generate_algebra(&field_gens, 5, 8, DEFAULT_RANK_TOL).unwrap();
        for (word, _) in basis.coordinates() {
            let fw = eval_word(word, &field_gens).unwrap();
            let mw = eval_word(word, &mat_gens).unwrap();
            let (jac, m) = match (&fw, &mw) {
                (LiePayload::Field(f), LiePayload::Matrix(m)) => (f.jacobian_at_origin(), m),
                _ => unreachable!(),
            };
            assert!((jac - m).amax() < 1e-10, "mismatch at {word}");
        }
    }

    #[test]
    fn retained_basis_is_well_conditioned() {
        let basis =
            generate_algebra(&gens_sl2(), 4, DEFAULT_DEGREE_CAP, DEFAULT_RANK_TOL).unwrap();
        // stack coordinates; smallest singular value stays above tolerance
        let keys: Vec<_> = basis
            .elements()
            .iter()
            .flat_map(|e| e.payload.coords().into_keys())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut m = DMatrix::<f64>::zeros(keys.len(), basis.dim());
        for (col, e) in basis.elements().iter().enumerate() {
            for (k, v) in e.payload.coords() {
                let row = keys.iter().position(|kk| *kk == k).unwrap();
                m[(row, col)] = v;
            }
        }
        let svd = m.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        assert!(smin >= DEFAULT_RANK_TOL * smax);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let err = generate_algebra_capped(&gens_sl2(), 4, DEFAULT_DEGREE_CAP, DEFAULT_RANK_TOL, 2)
            .unwrap_err();
        assert!(matches!(err, Error::DimensionExplosion { cap: 2 }));
    }

    #[test]
    fn isomorphism_verdicts_for_demo() {
        let ok = check_isomorphism(&quadratic_demo_system(1.0), 6, 8, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(ok.verdict, Verdict::Isomorphic);
        assert_eq!((ok.dim_vf, ok.dim_mat), (2, 2));
        assert!(ok.witness.is_none());

        let bad = check_isomorphism(&quadratic_demo_system(2.0), 6, 8, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(bad.verdict, Verdict::RelationMismatch);
        assert_eq!(bad.witness.as_ref().unwrap().to_string(), "[g0,g1]");
    }

    #[test]
    fn isomorphism_verdict_symmetric_in_driver() {
        for a in [1.0, 2.0] {
            let sys = quadratic_demo_system(a);
            let f = check_isomorphism_driven(&sys, 6, 8, DEFAULT_RANK_TOL, Side::Fields).unwrap();
            let m =
                check_isomorphism_driven(&sys, 6, 8, DEFAULT_RANK_TOL, Side::Matrices).unwrap();
            assert_eq!(f.verdict, m.verdict, "a = {a}");
        }
    }

    #[test]
    fn linear_system_is_isomorphic() {
        // linear drift and control: the correspondence is the identity
        use crate::polyfield::DomainBox;
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, -0.2, -2.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.1, 0.7, 0.4, -0.5]);
        let sys = ControlAffineSystem::new(
            PolyMap::linear(&a).unwrap(),
            vec![PolyMap::linear(&b).unwrap()],
            DomainBox::centered_cube(2, 1.0),
        )
        .unwrap();
        let cert = check_isomorphism(&sys, 6, 8, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(cert.verdict, Verdict::Isomorphic);
        assert_eq!(cert.dim_vf, cert.dim_mat);
    }

    #[test]
    fn adjoint_spectrum_on_full_algebra() {
        // generators spanning all 2x2 matrices; ad of diag(-1,-2) has
        // eigenvalues {0, 0, 1, -1}
        let gens = vec![
            mat([[1.0, 0.0], [0.0, 0.0]]),
            mat([[0.0, 1.0], [0.0, 0.0]]),
            mat([[0.0, 0.0], [1.0, 0.0]]),
            mat([[0.0, 0.0], [0.0, 1.0]]),
        ];
        let basis = generate_algebra(&gens, 4, DEFAULT_DEGREE_CAP, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(basis.dim(), 4);
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let eig = adjoint_spectrum(&a, &basis).unwrap();

        // oracle: the adjoint as a 4x4 matrix via Kronecker products
        let eye = DMatrix::<f64>::identity(2, 2);
        let adj = eye.kronecker(&a) - a.transpose().kronecker(&eye);
        let mut want: Vec<Complex64> = adj.complex_eigenvalues().iter().copied().collect();
        want.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
        for (got, expect) in eig.iter().zip(&want) {
            assert!((got - expect).norm() < 1e-9);
        }
        let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_eq!(re.iter().map(|r| r.round() as i64).collect::<Vec<_>>(), vec![-1, 0, 0, 1]);
    }

    #[test]
    fn adjoint_spectrum_zero_on_commuting_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let gens = vec![mat([[-1.0, 0.0], [0.0, -1.0]]), mat([[0.0, 0.0], [0.0, 1.0]])];
        let basis = generate_algebra(&gens, 6, DEFAULT_DEGREE_CAP, DEFAULT_RANK_TOL).unwrap();
        let eig = adjoint_spectrum(&a, &basis).unwrap();
        assert!(eig.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn adjoint_rejects_non_invariant_span() {
        let basis = generate_algebra(
            &[mat([[0.0, 1.0], [0.0, 0.0]])],
            3,
            DEFAULT_DEGREE_CAP,
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        assert_eq!(basis.dim(), 1);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let err = adjoint_spectrum(&a, &basis).unwrap_err();
        assert!(matches!(err, Error::NotInvariant { .. }));
    }
}
