//! Global bilinear models for control-affine systems: z = psi(x) built from
//! the drift alone turns xdot = F(x) + sum u_i G_i(x) into
//! zdot = A z + sum u_i B_i z, with A = DF(0) and B_i = DG_i(0), whenever
//! the generated field algebra matches the matrix algebra of the origin
//! Jacobians relation for relation.
//!
//! Gating: the hard preconditions are a stable origin, k >= 2, the spectral
//! spread bound, nonresonant homological denominators for 2 <= |m| <= k,
//! and an `isomorphic` certificate. The full nonresonance report over
//! |m| <= k (which also inspects degree-0/1 indices and always flags
//! repeated eigenvalues) is attached for inspection but does not gate:
//! repeated stable eigenvalues are routine here and harmless to the
//! construction, which never divides by degree-0/1 denominators.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::conditions::{check_all, ConditionsReport, Order};
use crate::error::{Error, Result};
use crate::flow::{flow_map, IntegratorConfig};
use crate::liealg::{check_isomorphism, IsomorphismCertificate, Verdict};
use crate::linearize::{evaluate_conjugacy, solve_homological, ConjugacyMap, SolveOptions};
use crate::polyfield::ControlAffineSystem;
use crate::sampling::sample_box;
use crate::{defaults, liealg};

#[derive(Debug, Clone)]
pub struct BilinearizeOptions {
    /// Truncation order of the drift conjugacy map (>= 2).
    pub k: u32,
    /// Bracket-word depth for the certificate.
    pub depth: usize,
    /// Polynomial degree cap on the vector-field algebra.
    pub degree_cap: u32,
    /// Hard lower bound on homological denominators.
    pub tol: f64,
    /// Relative rank threshold for algebra generation.
    pub rank_tol: f64,
    /// Verification sample count; 0 selects max(64, 10 n).
    pub samples: usize,
    pub seed: u64,
    /// Acceptable deviation between fitted and Jacobian control matrices,
    /// and between the two sides of the defect identity on samples.
    pub residual_threshold: f64,
    /// Build the model even when the certificate verdict is not
    /// `isomorphic`; the defect gate still applies unless the residual
    /// threshold is raised too. Intended for characterization runs.
    pub force: bool,
}

impl Default for BilinearizeOptions {
    fn default() -> Self {
        BilinearizeOptions {
            k: defaults::ORDER_K,
            depth: liealg::DEFAULT_DEPTH,
            degree_cap: liealg::DEFAULT_DEGREE_CAP,
            tol: defaults::DENOMINATOR_TOL,
            rank_tol: liealg::DEFAULT_RANK_TOL,
            samples: 0,
            seed: 7,
            residual_threshold: defaults::BILINEAR_RESIDUAL,
            force: false,
        }
    }
}

/// Bilinear realization of a control-affine system, with the certificate
/// and sampled verification residuals that justify it.
#[derive(Debug, Clone)]
pub struct BilinearModel {
    system: ControlAffineSystem,
    a: DMatrix<f64>,
    b: Vec<DMatrix<f64>>,
    psi: ConjugacyMap,
    certificate: IsomorphismCertificate,
    conditions: ConditionsReport,
    /// max over samples and controls of |Dpsi(x) G_i(x) - B_i psi(x)|_inf.
    residual: f64,
    /// max over controls of |C_i - B_i|_inf for the least-squares C_i.
    fit_gap: f64,
    samples_used: usize,
}

impl BilinearModel {
    pub fn system(&self) -> &ControlAffineSystem {
        &self.system
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &[DMatrix<f64>] {
        &self.b
    }

    pub fn psi(&self) -> &ConjugacyMap {
        &self.psi
    }

    pub fn psi_mut(&mut self) -> &mut ConjugacyMap {
        &mut self.psi
    }

    pub fn certificate(&self) -> &IsomorphismCertificate {
        &self.certificate
    }

    pub fn conditions(&self) -> &ConditionsReport {
        &self.conditions
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn fit_gap(&self) -> f64 {
        self.fit_gap
    }

    pub fn samples_used(&self) -> usize {
        self.samples_used
    }

    /// A + sum u_i B_i; the generator of the bilinear dynamics while the
    /// input is held at u.
    pub fn input_matrix(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        if u.len() != self.b.len() {
            return Err(Error::DimensionMismatch {
                expected: self.b.len(),
                got: u.len(),
            });
        }
        let mut m = self.a.clone();
        for (ui, bi) in u.iter().zip(&self.b) {
            m += bi * *ui;
        }
        Ok(m)
    }
}

pub fn bilinearize(
    sys: &ControlAffineSystem,
    opts: &BilinearizeOptions,
) -> Result<BilinearModel> {
    if opts.k < 2 {
        return Err(Error::InvalidArgument(
            "bilinearization needs order k >= 2".into(),
        ));
    }
    for (i, g) in sys.controls().iter().enumerate() {
        if !g.vanishes_at_origin() {
            return Err(Error::InvalidArgument(format!(
                "control field {i} does not vanish at the origin, so the equilibrium is not input-invariant"
            )));
        }
    }

    let psi = solve_homological(
        sys.drift(),
        opts.k,
        &SolveOptions {
            tol: opts.tol,
            reverse_order: false,
        },
    )?;
    let conditions = check_all(
        psi.spectrum().eigenvalues(),
        Order::Finite(opts.k),
        opts.tol,
    )?;
    if !conditions.all_spread {
        let worst = conditions
            .per_index
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.spread_ok)
            .min_by(|a, b| a.1.spread_margin.total_cmp(&b.1.spread_margin))
            .map(|(i, c)| format!("index {} margin {:.3e}", i, c.spread_margin))
            .unwrap_or_default();
        return Err(Error::ConditionFailed {
            condition: format!("spectral spread of order {}", opts.k),
            witness: worst,
        });
    }

    let certificate = check_isomorphism(sys, opts.depth, opts.degree_cap, opts.rank_tol)?;
    if certificate.verdict != Verdict::Isomorphic && !opts.force {
        return Err(Error::CertificateNotIsomorphic {
            verdict: certificate.verdict.to_string(),
        });
    }

    let a = sys.drift().jacobian_at_origin();
    let b: Vec<DMatrix<f64>> = sys
        .controls()
        .iter()
        .map(|g| g.jacobian_at_origin())
        .collect();

    let n = sys.n();
    let count = if opts.samples == 0 {
        defaults::SAMPLES.max(10 * n)
    } else {
        opts.samples.max(10 * n)
    };
    let samples = sample_box(sys.domain(), count, opts.seed)?;

    // psi values and control defects on the sample set
    let psi_poly = psi.psi_poly();
    let mut theta = DMatrix::<f64>::zeros(count, n);
    for (row, x) in samples.iter().enumerate() {
        let v = psi_poly.evaluate(x)?;
        for col in 0..n {
            theta[(row, col)] = v[col];
        }
    }
    let theta_svd = theta.clone().svd(true, true);

    let mut residual = 0.0f64;
    let mut fit_gap = 0.0f64;
    for (i, g) in sys.controls().iter().enumerate() {
        let mut target = DMatrix::<f64>::zeros(count, n);
        for (row, x) in samples.iter().enumerate() {
            let jac = psi_poly.jacobian_at(x)?;
            let gv = DVector::from_vec(g.evaluate(x)?);
            let dv = jac * gv;
            let pv = theta.row(row).transpose();
            let defect = (&dv - &b[i] * pv).amax();
            residual = residual.max(defect);
            for col in 0..n {
                target[(row, col)] = dv[col];
            }
        }
        // rows of C_i solve theta c = target column
        let ct = theta_svd
            .solve(&target, defaults::RANK_TOL)
            .map_err(|e| Error::InvalidArgument(format!("control fit failed: {e}")))?;
        let c = ct.transpose();
        fit_gap = fit_gap.max((&c - &b[i]).amax());
        if residual > opts.residual_threshold || fit_gap > opts.residual_threshold {
            return Err(Error::ResidualTooLarge {
                control: i,
                residual: residual.max(fit_gap),
                threshold: opts.residual_threshold,
            });
        }
    }

    Ok(BilinearModel {
        system: sys.clone(),
        a,
        b,
        psi,
        certificate,
        conditions,
        residual,
        fit_gap,
        samples_used: count,
    })
}

/// Piecewise-constant input signal: value j applies on
/// [breakpoints[j], breakpoints[j+1]), the last value until the horizon.
#[derive(Debug, Clone)]
pub struct Schedule {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::InvalidArgument(
                "schedule needs matching breakpoint and value lists".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "schedule must start at t = 0".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "schedule breakpoints must increase".into(),
            ));
        }
        let d = values[0].len();
        if values.iter().any(|v| v.len() != d) {
            return Err(Error::InvalidArgument(
                "schedule values must share one input dimension".into(),
            ));
        }
        Ok(Schedule {
            breakpoints,
            values,
        })
    }

    pub fn constant(u: Vec<f64>) -> Self {
        Schedule {
            breakpoints: vec![0.0],
            values: vec![u],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        let idx = match self
            .breakpoints
            .iter()
            .rposition(|&b| b <= t)
        {
            Some(i) => i,
            None => 0,
        };
        &self.values[idx]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub grid_points: usize,
    pub integrator: IntegratorConfig,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            grid_points: 121,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Paired run of the true system and its bilinear model under one input
/// schedule, with the gap e(t) = |z(t) - psi(x(t))|_inf on a uniform grid.
#[derive(Debug, Clone)]
pub struct BilinearSim {
    pub times: Vec<f64>,
    pub true_states: Vec<Vec<f64>>,
    pub model_states: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
    pub max_error: f64,
}

pub fn simulate_bilinear(
    model: &BilinearModel,
    x0: &[f64],
    schedule: &Schedule,
    horizon: f64,
    opts: &SimulateOptions,
) -> Result<BilinearSim> {
    let sys = &model.system;
    if schedule.input_dim() != sys.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.input_dim(),
            got: schedule.input_dim(),
        });
    }
    if !(horizon > 0.0) || opts.grid_points < 2 {
        return Err(Error::InvalidArgument(
            "simulation needs a positive horizon and at least two grid points".into(),
        ));
    }

    let gp = opts.grid_points;
    let times: Vec<f64> = (0..gp)
        .map(|j| horizon * j as f64 / (gp - 1) as f64)
        .collect();
    // marks = grid times merged with schedule breakpoints inside (0,
    // horizon), so each advance happens under one constant input
    let mut marks: Vec<f64> = times.clone();
    for &b in schedule.breakpoints() {
        if b > 0.0 && b < horizon && times.iter().all(|&t| (t - b).abs() > 1e-12) {
            marks.push(b);
        }
    }
    marks.sort_by(f64::total_cmp);

    let mut x = x0.to_vec();
    let mut z = DVector::from_vec(evaluate_conjugacy(&model.psi, sys.drift(), x0)?);
    let mut true_states = vec![x.clone()];
    let mut model_states: Vec<Vec<f64>> = vec![z.iter().copied().collect()];
    let mut record = vec![false; marks.len()];
    for (j, &m) in marks.iter().enumerate() {
        record[j] = times.iter().any(|&t| (t - m).abs() <= 1e-12);
    }

    for j in 1..marks.len() {
        let (t0, t1) = (marks[j - 1], marks[j]);
        let u = schedule.value_at(0.5 * (t0 + t1));
        let field = sys.materialize(u)?;
        x = flow_map(&field, &x, t1 - t0, &opts.integrator)?;
        let gen = model.input_matrix(u)?;
        z = (gen * (t1 - t0)).exp() * z;
        if record[j] {
            true_states.push(x.clone());
            model_states.push(z.iter().copied().collect());
        }
    }

    // measure against the model's own conjugacy evaluation per grid state;
    // parallel because the pull-back integrates a trajectory per point
    let drift = sys.drift();
    let errors: Vec<f64> = true_states
        .par_iter()
        .zip(model_states.par_iter())
        .map(|(xs, zs)| {
            let px = evaluate_conjugacy(&model.psi, drift, xs)?;
            Ok(px
                .iter()
                .zip(zs)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(BilinearSim {
        times,
        true_states,
        model_states,
        errors,
        max_error,
    })
}
