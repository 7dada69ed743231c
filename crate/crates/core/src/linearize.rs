//! Polynomial conjugacy maps that linearize a vector field near a globally
//! attracting equilibrium.
//!
//! The construction works in eigen-coordinates y = Wx: each eigenfunction
//! candidate phi_i(y) = y_i + h_i(y) is solved degree by degree from the
//! invariance equation grad(phi_i) . f = lambda_i phi_i, dividing each
//! monomial coefficient by lambda_i - <m, lambda>. The assembled map
//! psi = V phi has identity Jacobian at the origin and conjugates the flow
//! to zdot = A z with A the original Jacobian.
//!
//! Truncation at degree k leaves a polynomial that is only approximately
//! invariant far from the origin. `evaluate_conjugacy` therefore supports a
//! flow pull-back: evaluate exp(-A T) psi(S_T x) with S_T the nonlinear
//! flow, which converges geometrically in T toward the exact map.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cpoly::CPoly;
use crate::defaults;
use crate::error::{Error, Result};
use crate::flow::{flow_map, flow_trajectory, IntegratorConfig};
use crate::polyfield::{multi_indices_up_to, ControlAffineSystem, MultiIndex, PolyMap};
use crate::spectral::{eigen_decompose, Spectrum};

/// How `evaluate_conjugacy` combines the polynomial map with the flow.
/// `horizon == 0` means pure polynomial evaluation.
#[derive(Debug, Clone)]
pub struct PullbackConfig {
    pub horizon: f64,
    pub integrator: IntegratorConfig,
}

impl PullbackConfig {
    pub fn polynomial_only() -> Self {
        PullbackConfig {
            horizon: 0.0,
            integrator: IntegratorConfig::default(),
        }
    }

    pub fn with_horizon(horizon: f64) -> Self {
        PullbackConfig {
            horizon,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// A denominator that passed the hard tolerance but came close to it.
#[derive(Debug, Clone)]
pub struct DenominatorWarning {
    pub target: usize,
    pub witness: Vec<u32>,
    pub gap: f64,
}

/// Controls for the homological solve. `reverse_order` only changes the
/// iteration order over monomials inside each degree; results must agree
/// either way because every coefficient is determined independently.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub reverse_order: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: defaults::DENOMINATOR_TOL,
            reverse_order: false,
        }
    }
}

/// Polynomial conjugacy map for one vector field, together with its
/// spectral data and solve diagnostics.
#[derive(Debug, Clone)]
pub struct ConjugacyMap {
    k: u32,
    tol: f64,
    spectrum: Spectrum,
    jacobian: DMatrix<f64>,
    /// Eigenfunctions in original coordinates; phi[i] has linear part w_i x.
    phi: Vec<CPoly>,
    /// Real polynomial map with Dpsi(0) = I.
    psi: PolyMap,
    pullback: PullbackConfig,
    min_denominator: f64,
    warnings: Vec<DenominatorWarning>,
    realification_residue: f64,
}

impl ConjugacyMap {
    pub fn n(&self) -> usize {
        self.jacobian.nrows()
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn eigenfunction(&self, i: usize) -> &CPoly {
        &self.phi[i]
    }

    pub fn psi_poly(&self) -> &PolyMap {
        &self.psi
    }

    pub fn pullback(&self) -> &PullbackConfig {
        &self.pullback
    }

    pub fn set_pullback(&mut self, pullback: PullbackConfig) {
        self.pullback = pullback;
    }

    pub fn min_denominator(&self) -> f64 {
        self.min_denominator
    }

    pub fn warnings(&self) -> &[DenominatorWarning] {
        &self.warnings
    }

    pub fn realification_residue(&self) -> f64 {
        self.realification_residue
    }

    /// Reorder spectral data and eigenfunctions so eigenvalue i is the one
    /// closest to `reference` eigenvalue i. The map psi itself is a sum over
    /// all branches and does not change.
    pub fn matched_to(&self, reference: &Spectrum) -> Result<ConjugacyMap> {
        let perm = self.spectrum.match_permutation(reference)?;
        let mut out = self.clone();
        out.spectrum = self.spectrum.reorder(&perm)?;
        out.phi = perm.iter().map(|&p| self.phi[p].clone()).collect();
        Ok(out)
    }

    /// Coefficient-space residual of the invariance equation
    /// Dpsi . f - A psi, split by total degree. Degrees <= k should sit at
    /// round-off; degrees above k measure the truncation tail.
    pub fn residual_by_degree(&self, field: &PolyMap) -> Result<Vec<(u32, f64)>> {
        let n = self.n();
        if field.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: field.n(),
            });
        }
        let resid = self.psi.directional_derivative(field)?.add_scaled(
            &self.psi.linear_image(&self.jacobian)?,
            -1.0,
        )?;
        let max_deg = resid.max_degree();
        let mut out = Vec::new();
        for d in 1..=max_deg {
            let mut worst = 0.0f64;
            for comp in 0..n {
                for (m, c) in resid.component(comp) {
                    if m.degree() == d {
                        worst = worst.max(c.abs());
                    }
                }
            }
            out.push((d, worst));
        }
        Ok(out)
    }
}

fn check_denominators(
    eigenvalues: &[Complex64],
    k: u32,
    tol: f64,
) -> Result<(f64, Vec<DenominatorWarning>)> {
    let n = eigenvalues.len();
    let mut min_gap = f64::INFINITY;
    let mut warnings = Vec::new();
    for m in multi_indices_up_to(n, k, defaults::ENUMERATION_BUDGET)? {
        if m.degree() < 2 {
            continue;
        }
        let dot: Complex64 = m
            .exponents()
            .iter()
            .zip(eigenvalues)
            .map(|(&e, l)| l * f64::from(e))
            .sum();
        for (i, li) in eigenvalues.iter().enumerate() {
            let gap = (li - dot).norm();
            if gap < tol {
                return Err(Error::ResonantDenominator {
                    target: i,
                    witness: m.exponents().to_vec(),
                    gap,
                    tol,
                });
            }
            if gap < 100.0 * tol {
                warnings.push(DenominatorWarning {
                    target: i,
                    witness: m.exponents().to_vec(),
                    gap,
                });
            }
            min_gap = min_gap.min(gap);
        }
    }
    Ok((min_gap, warnings))
}

/// Solve the homological equations for `field` up to degree `k` and return
/// the conjugacy map. The field must vanish at the origin and have a
/// Hurwitz Jacobian there; every denominator |lambda_i - <m, lambda>| for
/// 2 <= |m| <= k must exceed `opts.tol`.
pub fn solve_homological(field: &PolyMap, k: u32, opts: &SolveOptions) -> Result<ConjugacyMap> {
    let n = field.n();
    if k < 1 {
        return Err(Error::InvalidArgument("order k must be at least 1".into()));
    }
    if !field.vanishes_at_origin() {
        return Err(Error::InvalidArgument(
            "vector field must vanish at the origin".into(),
        ));
    }
    let a = field.jacobian_at_origin();
    let spectrum = eigen_decompose(&a)?;
    if !spectrum.is_hurwitz() {
        return Err(Error::NotGes {
            max_re: spectrum.max_re(),
        });
    }
    let lambda: Vec<Complex64> = spectrum.eigenvalues().to_vec();
    let (min_denominator, warnings) = check_denominators(&lambda, k, opts.tol)?;

    let v = spectrum.right_matrix();
    let w = spectrum.left_matrix();

    // ghat(y) = W f(V y) - Lambda y; drop the (round-off) linear part.
    let mut ghat: Vec<CPoly> = Vec::with_capacity(n);
    for i in 0..n {
        let mut gi = CPoly::zero(n);
        for (j, fj) in (0..n).map(|j| (j, CPoly::from_real_terms(n, field.component(j)))) {
            let composed = fj.compose_linear(&v)?;
            gi.add_assign_scaled(&composed, w[(i, j)]);
        }
        let mut nonlinear = CPoly::zero(n);
        for (m, c) in gi.terms() {
            if m.degree() >= 2 {
                nonlinear.add_term(m.clone(), *c);
            }
        }
        ghat.push(nonlinear.truncated(k));
    }

    // conjugate-pair variable permutation in eigen-coordinates
    let pairing = spectrum.pairing().to_vec();
    let perm: Vec<usize> = (0..n).map(|i| pairing[i].unwrap_or(i)).collect();

    let mut h: Vec<CPoly> = vec![CPoly::zero(n); n];
    for i in 0..n {
        if let Some(partner) = pairing[i] {
            if partner < i {
                // mirror the already-solved partner so conjugate symmetry is
                // exact in coefficient space
                h[i] = h[partner].conj_permuted(&perm);
                continue;
            }
        }
        for d in 2..=k {
            // rhs = degree-d part of ghat_i + grad(h_i) . ghat (lower degrees
            // of h_i fully determine it)
            let mut rhs = ghat[i].degree_part(d);
            for j in 0..n {
                let dj = h[i].partial(j);
                if dj.is_zero() || ghat[j].is_zero() {
                    continue;
                }
                rhs.add_assign_scaled(&dj.mul(&ghat[j]).degree_part(d), Complex64::new(1.0, 0.0));
            }
            let mut keys: Vec<MultiIndex> = rhs.terms().keys().cloned().collect();
            if opts.reverse_order {
                keys.reverse();
            }
            for m in keys {
                let r = rhs.coeff(&m);
                let dot: Complex64 = m
                    .exponents()
                    .iter()
                    .zip(&lambda)
                    .map(|(&e, l)| l * f64::from(e))
                    .sum();
                h[i].add_term(m, r / (lambda[i] - dot));
            }
        }
    }

    // back to original coordinates: phi_i(x) = (y_i + h_i)(W x)
    let mut phi: Vec<CPoly> = Vec::with_capacity(n);
    for i in 0..n {
        let mut in_y = h[i].clone();
        in_y.add_term(MultiIndex::unit(n, i), Complex64::new(1.0, 0.0));
        phi.push(in_y.compose_linear(&w)?.pruned(defaults::COEFF_PRUNE));
    }

    // psi = V phi: real by conjugate symmetry, up to round-off
    let mut psi_components: Vec<BTreeMap<MultiIndex, f64>> = Vec::with_capacity(n);
    let mut residue = 0.0f64;
    for r in 0..n {
        let mut row = CPoly::zero(n);
        for (i, p) in phi.iter().enumerate() {
            row.add_assign_scaled(p, v[(r, i)]);
        }
        residue = residue.max(row.max_abs_im());
        psi_components.push(
            row.real_coeffs()
                .into_iter()
                .filter(|(_, c)| c.abs() >= defaults::COEFF_PRUNE)
                .collect(),
        );
    }
    if residue > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "conjugate symmetry failed to cancel imaginary parts (residue {residue:.3e})"
        )));
    }
    let psi = PolyMap::from_components(n, psi_components)?;

    // default pull-back horizon: ten decay constants of the slowest mode
    let gamma = -spectrum.max_re();
    let horizon = defaults::PULLBACK_DECADES / gamma;

    Ok(ConjugacyMap {
        k,
        tol: opts.tol,
        spectrum,
        jacobian: a,
        phi,
        psi,
        pullback: PullbackConfig::with_horizon(horizon),
        min_denominator,
        warnings,
        realification_residue: residue,
    })
}

/// Evaluate the conjugacy map at a point. With a zero horizon this is the
/// polynomial psi(x); otherwise exp(-A T) psi(S_T x), which cancels the
/// truncation error of psi by letting the flow contract the state first.
pub fn evaluate_conjugacy(map: &ConjugacyMap, field: &PolyMap, x: &[f64]) -> Result<Vec<f64>> {
    let t = map.pullback.horizon;
    if t == 0.0 {
        return map.psi.evaluate(x);
    }
    let xt = flow_map(field, x, t, &map.pullback.integrator)?;
    let p = DVector::from_vec(map.psi.evaluate(&xt)?);
    let decay = (map.jacobian.clone() * (-t)).exp();
    Ok((decay * p).iter().copied().collect())
}

/// Sup-norm of psi(x_t) - exp(A t) psi(x_0) along trajectories, plus the
/// instantaneous defect Dpsi(x) f(x) - A psi(x), over a set of samples.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub horizon: f64,
    pub log_points: usize,
    pub integrator: IntegratorConfig,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            horizon: 5.0,
            log_points: 32,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearizationDiagnostics {
    pub samples: usize,
    pub horizon: f64,
    pub max_trajectory_residual: f64,
    pub max_instantaneous_residual: f64,
    pub per_degree_residual: Vec<(u32, f64)>,
    pub pullback_horizon: f64,
}

pub fn verify_conjugacy(
    map: &ConjugacyMap,
    field: &PolyMap,
    samples: &[Vec<f64>],
    opts: &VerifyOptions,
) -> Result<LinearizationDiagnostics> {
    let n = map.n();
    if field.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: field.n(),
        });
    }
    if opts.log_points < 2 || opts.horizon <= 0.0 {
        return Err(Error::InvalidArgument(
            "verification needs a positive horizon and at least two log points".into(),
        ));
    }
    let times: Vec<f64> = (0..opts.log_points)
        .map(|j| opts.horizon * j as f64 / (opts.log_points - 1) as f64)
        .collect();
    let propagators: Vec<DMatrix<f64>> = times
        .iter()
        .map(|&t| (map.jacobian.clone() * t).exp())
        .collect();

    let per_sample: Vec<Result<(f64, f64)>> = samples
        .par_iter()
        .map(|x0| {
            let traj = flow_trajectory(field, x0, &times, &opts.integrator)?;
            let z0 = DVector::from_vec(evaluate_conjugacy(map, field, x0)?);
            let mut worst_traj = 0.0f64;
            for (s, state) in traj.states.iter().enumerate() {
                let lhs = DVector::from_vec(evaluate_conjugacy(map, field, state)?);
                let rhs = &propagators[s] * &z0;
                worst_traj = worst_traj.max((lhs - rhs).amax());
            }
            let instant = instantaneous_defect(map, field, x0)?;
            Ok((worst_traj, instant))
        })
        .collect();

    let mut max_traj = 0.0f64;
    let mut max_inst = 0.0f64;
    for r in per_sample {
        let (t, i) = r?;
        max_traj = max_traj.max(t);
        max_inst = max_inst.max(i);
    }
    Ok(LinearizationDiagnostics {
        samples: samples.len(),
        horizon: opts.horizon,
        max_trajectory_residual: max_traj,
        max_instantaneous_residual: max_inst,
        per_degree_residual: map.residual_by_degree(field)?,
        pullback_horizon: map.pullback.horizon,
    })
}

/// || Dpsi(x) f(x) - A psi(x) ||_inf, pulled back by the configured horizon
/// (the defect is then evaluated at S_T x and damped by exp(-A T), the same
/// correction `evaluate_conjugacy` applies to values).
pub fn instantaneous_defect(map: &ConjugacyMap, field: &PolyMap, x: &[f64]) -> Result<f64> {
    let t = map.pullback.horizon;
    let site = if t == 0.0 {
        x.to_vec()
    } else {
        flow_map(field, x, t, &map.pullback.integrator)?
    };
    let jac = map.psi.jacobian_at(&site)?;
    let f = DVector::from_vec(field.evaluate(&site)?);
    let p = DVector::from_vec(map.psi.evaluate(&site)?);
    let defect = jac * f - &map.jacobian * p;
    if t == 0.0 {
        Ok(defect.amax())
    } else {
        let decay = (map.jacobian.clone() * (-t)).exp();
        Ok((decay * defect).amax())
    }
}

/// Conjugacy map for one parameter value of a control-affine system. With a
/// reference spectrum the eigen-branch ordering follows minimal spectral
/// distance to the reference instead of the default sort.
pub fn linearize_parameterized(
    sys: &ControlAffineSystem,
    u: &[f64],
    k: u32,
    opts: &SolveOptions,
    reference: Option<&Spectrum>,
) -> Result<ConjugacyMap> {
    let field = sys.materialize(u)?;
    let map = solve_homological(&field, k, opts)?;
    match reference {
        Some(r) => map.matched_to(r),
        None => Ok(map),
    }
}

/// One row of a parameter-continuity table: how far the map at u0 + delta d
/// sits from the map at u0, in values and first derivatives over a grid.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub delta: f64,
    pub value_gap: f64,
    pub derivative_gap: f64,
    /// value_gap relative to the previous row, if any
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub base_u: Vec<f64>,
    pub direction: Vec<f64>,
    pub k: u32,
    pub rows: Vec<SweepRow>,
}

/// Shrinking-perturbation sweep around a base parameter. Gaps are measured
/// on the polynomial maps (no pull-back) over the supplied grid points, so
/// each row is a deterministic function of the two coefficient tables.
pub fn continuity_sweep(
    sys: &ControlAffineSystem,
    base_u: &[f64],
    direction: &[f64],
    deltas: &[f64],
    k: u32,
    opts: &SolveOptions,
    grid: &[Vec<f64>],
) -> Result<SweepTable> {
    if direction.len() != base_u.len() {
        return Err(Error::DimensionMismatch {
            expected: base_u.len(),
            got: direction.len(),
        });
    }
    if grid.is_empty() || deltas.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one grid point and one delta".into(),
        ));
    }
    let base = linearize_parameterized(sys, base_u, k, opts, None)?;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let u: Vec<f64> = base_u
            .iter()
            .zip(direction)
            .map(|(b, d)| b + delta * d)
            .collect();
        let shifted = linearize_parameterized(sys, &u, k, opts, Some(base.spectrum()))?;
        let mut value_gap = 0.0f64;
        let mut deriv_gap = 0.0f64;
        for x in grid {
            let pv = DVector::from_vec(base.psi.evaluate(x)?);
            let qv = DVector::from_vec(shifted.psi.evaluate(x)?);
            value_gap = value_gap.max((pv - qv).amax());
            let pj = base.psi.jacobian_at(x)?;
            let qj = shifted.psi.jacobian_at(x)?;
            deriv_gap = deriv_gap.max((pj - qj).amax());
        }
        let ratio = rows
            .last()
            .map(|prev: &SweepRow| value_gap / prev.value_gap.max(f64::MIN_POSITIVE));
        rows.push(SweepRow {
            delta,
            value_gap,
            derivative_gap: deriv_gap,
            ratio,
        });
    }
    Ok(SweepTable {
        base_u: base_u.to_vec(),
        direction: direction.to_vec(),
        k,
        rows,
    })
}
