//! Sparse polynomial vector fields over R^n and control-affine systems.
//!
//! Monomials are keyed by [`MultiIndex`] in graded-lexicographic order, so a
//! `BTreeMap` iterates coefficients in a canonical order. Zero coefficients
//! are never stored.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a monomial x^m = x_1^{m_1} ... x_n^{m_n}.
///
/// Ordering is graded lexicographic: lower total degree first, ties broken by
/// lexicographic comparison of the exponent vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex { exponents }
    }

    /// The zero multi-index (constant monomial) in n variables.
    pub fn zero(n: usize) -> Self {
        MultiIndex {
            exponents: vec![0; n],
        }
    }

    /// The i-th unit multi-index e_i (monomial x_i), 0-based.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] += 1;
        MultiIndex { exponents: e }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Total degree |m|.
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Componentwise sum, the exponent of a monomial product.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), other.len());
        MultiIndex {
            exponents: self
                .exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Decrement exponent j, or None if it is already zero.
    pub fn checked_dec(&self, j: usize) -> Option<MultiIndex> {
        if self.exponents[j] == 0 {
            return None;
        }
        let mut e = self.exponents.clone();
        e[j] -= 1;
        Some(MultiIndex { exponents: e })
    }

    /// True if this is the unit index e_i.
    pub fn is_unit(&self, i: usize) -> bool {
        self.degree() == 1 && self.exponents[i] == 1
    }

    /// Evaluate the monomial at a real point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    /// Apply a permutation of variables: result[j] = self[perm[j]].
    pub fn permuted(&self, perm: &[usize]) -> MultiIndex {
        MultiIndex {
            exponents: perm.iter().map(|&p| self.exponents[p]).collect(),
        }
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.exponents.cmp(&other.exponents))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for (j, &e) in self.exponents.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", j + 1)?;
            } else {
                write!(f, "x{}^{}", j + 1, e)?;
            }
        }
        Ok(())
    }
}

/// Number of multi-indices in n variables with total degree <= k, i.e.
/// C(n+k, k), computed without overflow at the sizes we allow.
pub fn count_multi_indices(n: usize, k: u32) -> u128 {
    let n = n as u128;
    let k = k as u128;
    let mut c: u128 = 1;
    // C(n+k, k) = prod_{j=1..k} (n+j)/j, exact at each step
    for j in 1..=k {
        c = c * (n + j) / j;
    }
    c
}

/// All multi-indices in n variables with total degree <= k, in graded-lex
/// order. Errors with `BudgetExceeded` if the count exceeds `budget`.
pub fn multi_indices_up_to(n: usize, k: u32, budget: u128) -> Result<Vec<MultiIndex>> {
    let count = count_multi_indices(n, k);
    if count > budget {
        return Err(Error::BudgetExceeded { n, k, count, budget });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; n];
    for d in 0..=k {
        emit_degree(&mut out, &mut current, 0, d);
    }
    Ok(out)
}

fn emit_degree(out: &mut Vec<MultiIndex>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    let n = current.len();
    if pos == n {
        if remaining == 0 {
            out.push(MultiIndex::new(current.clone()));
        }
        return;
    }
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(MultiIndex::new(current.clone()));
        current[pos] = 0;
        return;
    }
    for e in 0..=remaining {
        current[pos] = e;
        emit_degree(out, current, pos + 1, remaining - e);
        current[pos] = 0;
    }
}

// Scalar sparse polynomial helpers shared across the crate.

pub(crate) fn scalar_add_term(p: &mut BTreeMap<MultiIndex, f64>, m: MultiIndex, c: f64) {
    if c == 0.0 {
        return;
    }
    match p.entry(m) {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut o) => {
            let s = *o.get() + c;
            if s == 0.0 {
                o.remove();
            } else {
                *o.get_mut() = s;
            }
        }
    }
}

pub(crate) fn scalar_mul(
    a: &BTreeMap<MultiIndex, f64>,
    b: &BTreeMap<MultiIndex, f64>,
) -> BTreeMap<MultiIndex, f64> {
    let mut out = BTreeMap::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            scalar_add_term(&mut out, ma.add(mb), ca * cb);
        }
    }
    out
}

pub(crate) fn scalar_partial(
    a: &BTreeMap<MultiIndex, f64>,
    j: usize,
) -> BTreeMap<MultiIndex, f64> {
    let mut out = BTreeMap::new();
    for (m, c) in a {
        if let Some(dm) = m.checked_dec(j) {
            scalar_add_term(&mut out, dm, c * f64::from(m.exponents()[j]));
        }
    }
    out
}

/// Polynomial map R^n -> R^n stored as one sparse coefficient table per
/// component. Canonical form: graded-lex key order, no explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap {
    n: usize,
    components: Vec<BTreeMap<MultiIndex, f64>>,
}

impl PolyMap {
    /// The zero map on R^n.
    pub fn zeros(n: usize) -> Self {
        PolyMap {
            n,
            components: vec![BTreeMap::new(); n],
        }
    }

    /// Build from (component, multi-index, coefficient) triples, 0-based
    /// component. Duplicate monomials are summed.
    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, MultiIndex, f64)>,
    {
        let mut map = PolyMap::zeros(n);
        for (i, m, c) in terms {
            map.add_term(i, m, c)?;
        }
        Ok(map)
    }

    /// The identity map x -> x.
    pub fn identity(n: usize) -> Self {
        let mut map = PolyMap::zeros(n);
        for i in 0..n {
            map.add_term(i, MultiIndex::unit(n, i), 1.0).unwrap();
        }
        map
    }

    /// The linear map x -> M x.
    pub fn linear(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidArgument(format!(
                "linear map needs a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut map = PolyMap::zeros(n);
        for i in 0..n {
            for j in 0..n {
                map.add_term(i, MultiIndex::unit(n, j), m[(i, j)])?;
            }
        }
        Ok(map)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficient table of component i.
    pub fn component(&self, i: usize) -> &BTreeMap<MultiIndex, f64> {
        &self.components[i]
    }

    /// Highest stored total degree, 0 for the zero map.
    pub fn max_degree(&self) -> u32 {
        self.components
            .iter()
            .flat_map(|c| c.keys().map(MultiIndex::degree))
            .max()
            .unwrap_or(0)
    }

    /// Total number of stored terms.
    pub fn term_count(&self) -> usize {
        self.components.iter().map(BTreeMap::len).sum()
    }

    /// Add `c * x^m` to component i, keeping the table canonical.
    pub fn add_term(&mut self, i: usize, m: MultiIndex, c: f64) -> Result<()> {
        if i >= self.n {
            return Err(Error::InvalidArgument(format!(
                "component {} out of range for n = {}",
                i, self.n
            )));
        }
        if m.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: m.len(),
            });
        }
        if !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite coefficient {c} for component {i}"
            )));
        }
        scalar_add_term(&mut self.components[i], m, c);
        Ok(())
    }

    /// Coefficient of x^m in component i (0 if absent).
    pub fn coeff(&self, i: usize, m: &MultiIndex) -> f64 {
        self.components[i].get(m).copied().unwrap_or(0.0)
    }

    /// True if no component has a constant term, i.e. f(0) = 0.
    pub fn vanishes_at_origin(&self) -> bool {
        let zero = MultiIndex::zero(self.n);
        self.components.iter().all(|c| !c.contains_key(&zero))
    }

    /// Evaluate at a point.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|comp| comp.iter().map(|(m, c)| c * m.eval(x)).sum())
            .collect())
    }

    /// Jacobian matrix D f(x).
    pub fn jacobian_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut jac = DMatrix::zeros(self.n, self.n);
        for (i, comp) in self.components.iter().enumerate() {
            for (m, c) in comp {
                for j in 0..self.n {
                    if let Some(dm) = m.checked_dec(j) {
                        jac[(i, j)] += c * f64::from(m.exponents()[j]) * dm.eval(x);
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Jacobian at the origin: the coefficients of the degree-1 terms.
    pub fn jacobian_at_origin(&self) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.n, self.n);
        for (i, comp) in self.components.iter().enumerate() {
            for j in 0..self.n {
                jac[(i, j)] = comp.get(&MultiIndex::unit(self.n, j)).copied().unwrap_or(0.0);
            }
        }
        jac
    }

    /// Symbolic directional derivative (D self) . field, component-wise
    /// sum_j d(self_i)/dx_j * field_j.
    pub fn directional_derivative(&self, field: &PolyMap) -> Result<PolyMap> {
        if field.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: field.n,
            });
        }
        let mut out = PolyMap::zeros(self.n);
        for (i, comp) in self.components.iter().enumerate() {
            for j in 0..self.n {
                let dij = scalar_partial(comp, j);
                if dij.is_empty() {
                    continue;
                }
                let prod = scalar_mul(&dij, &field.components[j]);
                for (m, c) in prod {
                    scalar_add_term(&mut out.components[i], m, c);
                }
            }
        }
        Ok(out)
    }

    /// Left-multiply the component vector by a matrix: (A self)_i.
    pub fn linear_image(&self, a: &DMatrix<f64>) -> Result<PolyMap> {
        if a.nrows() != self.n || a.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: a.nrows(),
            });
        }
        let mut out = PolyMap::zeros(self.n);
        for i in 0..self.n {
            for (j, comp) in self.components.iter().enumerate() {
                let scale = a[(i, j)];
                if scale == 0.0 {
                    continue;
                }
                for (m, c) in comp {
                    scalar_add_term(&mut out.components[i], m.clone(), scale * c);
                }
            }
        }
        Ok(out)
    }

    /// Assemble a map from per-component coefficient tables.
    pub fn from_components(
        n: usize,
        components: Vec<BTreeMap<MultiIndex, f64>>,
    ) -> Result<PolyMap> {
        if components.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: components.len(),
            });
        }
        for comp in &components {
            for (m, c) in comp {
                if m.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: m.len(),
                    });
                }
                if !c.is_finite() {
                    return Err(Error::InvalidArgument(
                        "non-finite coefficient in component table".into(),
                    ));
                }
            }
        }
        Ok(PolyMap { n, components })
    }

    /// self + scale * other.
    pub fn add_scaled(&self, other: &PolyMap, scale: f64) -> Result<PolyMap> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut out = self.clone();
        for (i, comp) in other.components.iter().enumerate() {
            for (m, c) in comp {
                scalar_add_term(&mut out.components[i], m.clone(), scale * c);
            }
        }
        Ok(out)
    }

    /// Multiply every coefficient by `scale`.
    pub fn scaled(&self, scale: f64) -> PolyMap {
        let mut out = PolyMap::zeros(self.n);
        for (i, comp) in self.components.iter().enumerate() {
            for (m, c) in comp {
                scalar_add_term(&mut out.components[i], m.clone(), scale * c);
            }
        }
        out
    }

    /// Drop coefficients with |c| < threshold. Used on numerically computed
    /// maps; symbolic operations only ever drop exact zeros.
    pub fn pruned(&self, threshold: f64) -> PolyMap {
        let mut out = PolyMap::zeros(self.n);
        for (i, comp) in self.components.iter().enumerate() {
            for (m, c) in comp {
                if c.abs() >= threshold {
                    out.components[i].insert(m.clone(), *c);
                }
            }
        }
        out
    }

    /// Lie bracket [f, g] = Dg . f - Df . g.
    ///
    /// Sign convention matches the operator commutator L_f L_g - L_g L_f, so
    /// for linear fields f = Ax, g = Bx the bracket is (BA - AB)x.
    pub fn lie_bracket(&self, other: &PolyMap) -> Result<PolyMap> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let n = self.n;
        let mut out = PolyMap::zeros(n);
        for i in 0..n {
            let mut acc: BTreeMap<MultiIndex, f64> = BTreeMap::new();
            for j in 0..n {
                let dg = scalar_partial(&other.components[i], j);
                for (m, c) in scalar_mul(&dg, &self.components[j]) {
                    scalar_add_term(&mut acc, m, c);
                }
                let df = scalar_partial(&self.components[i], j);
                for (m, c) in scalar_mul(&df, &other.components[j]) {
                    scalar_add_term(&mut acc, m, -c);
                }
            }
            out.components[i] = acc;
        }
        Ok(out)
    }

    /// Largest absolute coefficient, 0 for the zero map.
    pub fn max_abs_coeff(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.values().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }

    /// Iterate all terms as (component, multi-index, coefficient).
    pub fn terms(&self) -> impl Iterator<Item = (usize, &MultiIndex, f64)> {
        self.components
            .iter()
            .enumerate()
            .flat_map(|(i, comp)| comp.iter().map(move |(m, c)| (i, m, *c)))
    }
}

impl fmt::Display for PolyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, comp) in self.components.iter().enumerate() {
            write!(f, "f{} =", i + 1)?;
            if comp.is_empty() {
                write!(f, " 0")?;
            }
            for (idx, (m, c)) in comp.iter().enumerate() {
                if idx == 0 {
                    write!(f, " {c} {m}")?;
                } else if *c < 0.0 {
                    write!(f, " - {} {m}", -c)?;
                } else {
                    write!(f, " + {c} {m}")?;
                }
            }
            if i + 1 < self.n {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Axis-aligned box domain used for sampling and invariance checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidArgument(format!(
                    "domain bounds must satisfy lo < hi, got [{a}, {b}] at axis {i}"
                )));
            }
        }
        Ok(DomainBox { lo, hi })
    }

    /// Cube [-r, r]^n.
    pub fn centered_cube(n: usize, r: f64) -> Self {
        DomainBox {
            lo: vec![-r; n],
            hi: vec![r; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Map a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (a, b))| a + t * (b - a))
            .collect()
    }
}

/// Control-affine system dx/dt = F(x) + sum_i u_i G_i(x) on a box domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlAffineSystem {
    drift: PolyMap,
    controls: Vec<PolyMap>,
    domain: DomainBox,
}

impl ControlAffineSystem {
    pub fn new(drift: PolyMap, controls: Vec<PolyMap>, domain: DomainBox) -> Result<Self> {
        let n = drift.n();
        for g in &controls {
            if g.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: g.n(),
                });
            }
        }
        if domain.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: domain.dim(),
            });
        }
        Ok(ControlAffineSystem {
            drift,
            controls,
            domain,
        })
    }

    pub fn n(&self) -> usize {
        self.drift.n()
    }

    /// Number of control channels.
    pub fn input_dim(&self) -> usize {
        self.controls.len()
    }

    pub fn drift(&self) -> &PolyMap {
        &self.drift
    }

    pub fn controls(&self) -> &[PolyMap] {
        &self.controls
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    /// The frozen-input field F + sum_i u_i G_i.
    pub fn materialize(&self, u: &[f64]) -> Result<PolyMap> {
        if u.len() != self.controls.len() {
            return Err(Error::DimensionMismatch {
                expected: self.controls.len(),
                got: u.len(),
            });
        }
        let mut field = self.drift.clone();
        for (g, ui) in self.controls.iter().zip(u) {
            field = field.add_scaled(g, *ui)?;
        }
        Ok(field)
    }

    /// Read a system from its JSON file representation.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let repr: SystemRepr = serde_json::from_str(text)
            .map_err(|e| Error::SystemFile(format!("json parse: {e}")))?;
        repr.build()
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::SystemFile(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&SystemRepr::from_system(self)).expect("system serializes")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())
            .map_err(|e| Error::SystemFile(format!("{}: {e}", path.display())))
    }
}

/// A system with its input frozen at a specific u.
#[derive(Debug, Clone)]
pub struct ParameterizedField {
    field: PolyMap,
    u: Vec<f64>,
}

impl ParameterizedField {
    pub fn new(system: &ControlAffineSystem, u: &[f64]) -> Result<Self> {
        Ok(ParameterizedField {
            field: system.materialize(u)?,
            u: u.to_vec(),
        })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn field(&self) -> &PolyMap {
        &self.field
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    component: usize,
    exponents: Vec<u32>,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct DomainRepr {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SystemRepr {
    n: usize,
    d: usize,
    drift: Vec<TermRepr>,
    controls: Vec<Vec<TermRepr>>,
    domain: DomainRepr,
}

impl SystemRepr {
    fn build(self) -> Result<ControlAffineSystem> {
        if self.n == 0 {
            return Err(Error::SystemFile("state dimension n must be >= 1".into()));
        }
        if self.controls.len() != self.d {
            return Err(Error::SystemFile(format!(
                "declared d = {} but {} control fields given",
                self.d,
                self.controls.len()
            )));
        }
        let drift = terms_to_map(self.n, "drift", &self.drift)?;
        let controls = self
            .controls
            .iter()
            .enumerate()
            .map(|(i, terms)| terms_to_map(self.n, &format!("controls[{i}]"), terms))
            .collect::<Result<Vec<_>>>()?;
        let domain = DomainBox::new(self.domain.lo, self.domain.hi)
            .map_err(|e| Error::SystemFile(format!("domain: {e}")))?;
        ControlAffineSystem::new(drift, controls, domain)
    }

    fn from_system(sys: &ControlAffineSystem) -> SystemRepr {
        let dump = |f: &PolyMap| -> Vec<TermRepr> {
            f.terms()
                .map(|(i, m, c)| TermRepr {
                    component: i + 1,
                    exponents: m.exponents().to_vec(),
                    coeff: c,
                })
                .collect()
        };
        SystemRepr {
            n: sys.n(),
            d: sys.input_dim(),
            drift: dump(&sys.drift),
            controls: sys.controls.iter().map(dump).collect(),
            domain: DomainRepr {
                lo: sys.domain.lo.clone(),
                hi: sys.domain.hi.clone(),
            },
        }
    }
}

fn terms_to_map(n: usize, what: &str, terms: &[TermRepr]) -> Result<PolyMap> {
    let mut map = PolyMap::zeros(n);
    for (idx, t) in terms.iter().enumerate() {
        if t.component == 0 || t.component > n {
            return Err(Error::SystemFile(format!(
                "{what}[{idx}]: component {} out of range 1..={n}",
                t.component
            )));
        }
        if t.exponents.len() != n {
            return Err(Error::SystemFile(format!(
                "{what}[{idx}]: exponent vector has length {}, expected {n}",
                t.exponents.len()
            )));
        }
        if !t.coeff.is_finite() {
            return Err(Error::SystemFile(format!(
                "{what}[{idx}]: coefficient must be finite, got {}",
                t.coeff
            )));
        }
        map.add_term(t.component - 1, MultiIndex::new(t.exponents.clone()), t.coeff)
            .map_err(|e| Error::SystemFile(format!("{what}[{idx}]: {e}")))?;
    }
    Ok(map)
}

/// Two-state quadratic family used throughout the test corpus and the demo
/// subcommand: dx1/dt = -x1, dx2/dt = (-1+u) x2 + (a+u) x1^2, one input.
pub fn quadratic_demo_system(a: f64) -> ControlAffineSystem {
    let e = |e1: u32, e2: u32| MultiIndex::new(vec![e1, e2]);
    let drift = PolyMap::from_terms(
        2,
        [
            (0, e(1, 0), -1.0),
            (1, e(0, 1), -1.0),
            (1, e(2, 0), a),
        ],
    )
    .unwrap();
    let control = PolyMap::from_terms(2, [(1, e(0, 1), 1.0), (1, e(2, 0), 1.0)]).unwrap();
    ControlAffineSystem::new(
        drift,
        vec![control],
        DomainBox::centered_cube(2, 2.0),
    )
    .unwrap()
}

/// Closed-form flow of [`quadratic_demo_system`] under constant input.
/// x1(t) = e^{-t} x1(0); x2 solves a linear scalar ODE forced by x1^2.
pub fn quadratic_demo_flow(a: f64, u: f64, x0: [f64; 2], t: f64) -> [f64; 2] {
    let l2 = -1.0 + u;
    let b = a + u;
    let x1 = (-t).exp() * x0[0];
    let forcing_rate = -2.0; // x1^2 decays at e^{-2t}
    let x2 = if (forcing_rate - l2).abs() < 1e-12 {
        // resonant forcing: secular term
        (l2 * t).exp() * (x0[1] + b * x0[0] * x0[0] * t)
    } else {
        let c = b * x0[0] * x0[0] / (forcing_rate - l2);
        (x0[1] - c) * (l2 * t).exp() + c * (forcing_rate * t).exp()
    };
    [x1, x2]
}
