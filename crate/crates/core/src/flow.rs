//! Reference ODE integration for polynomial fields: fixed-step RK4 and
//! adaptive Dormand-Prince RK45, plus trajectory-based domain-invariance and
//! semigroup checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::defaults;
use crate::error::{Error, Result};
use crate::polyfield::{DomainBox, PolyMap};
use crate::sampling::sample_box;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical RK4 with a fixed step.
    Rk4 { step: f64 },
    /// Dormand-Prince 5(4) with PI-free proportional step control.
    Rk45 { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4 { step },
            max_steps: defaults::MAX_STEPS,
        }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk45 { rtol, atol },
            max_steps: defaults::MAX_STEPS,
        }
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig::rk45(defaults::RK45_RTOL, defaults::RK45_ATOL)
    }
}

/// Time-stamped states along one trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

struct Stepper<'a> {
    field: &'a PolyMap,
    cfg: IntegratorConfig,
    steps_used: usize,
    h: f64,
}

impl<'a> Stepper<'a> {
    fn new(field: &'a PolyMap, cfg: IntegratorConfig) -> Self {
        let h = match cfg.method {
            Method::Rk4 { step } => step,
            Method::Rk45 { .. } => 1e-2,
        };
        Stepper {
            field,
            cfg,
            steps_used: 0,
            h,
        }
    }

    fn guard(&self, x: &[f64], t: f64) -> Result<()> {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        if !norm2.is_finite() || norm2.sqrt() > defaults::BLOWUP_NORM {
            return Err(Error::NonFinite { t });
        }
        Ok(())
    }

    fn budget(&mut self, t: f64) -> Result<()> {
        self.steps_used += 1;
        if self.steps_used > self.cfg.max_steps {
            return Err(Error::StepLimitExceeded {
                max_steps: self.cfg.max_steps,
                t,
            });
        }
        Ok(())
    }

    /// Advance from (t, x) to exactly t_target, mutating x in place.
    fn advance(&mut self, t: &mut f64, x: &mut Vec<f64>, t_target: f64) -> Result<()> {
        match self.cfg.method {
            Method::Rk4 { step } => {
                if !(step > 0.0 && step.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "rk4 step must be positive, got {step}"
                    )));
                }
                while *t < t_target {
                    self.budget(*t)?;
                    let h = step.min(t_target - *t);
                    *x = rk4_step(self.field, x, h)?;
                    *t += h;
                    self.guard(x, *t)?;
                }
            }
            Method::Rk45 { rtol, atol } => {
                if !(rtol > 0.0 && atol > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "rk45 tolerances must be positive, got rtol={rtol} atol={atol}"
                    )));
                }
                while *t < t_target {
                    self.budget(*t)?;
                    let h_try = self.h.min(t_target - *t);
                    if h_try < 1e-14 * t_target.abs().max(1.0) {
                        return Err(Error::StepLimitExceeded {
                            max_steps: self.cfg.max_steps,
                            t: *t,
                        });
                    }
                    let (x_new, err) = dopri_step(self.field, x, h_try, rtol, atol)?;
                    if err <= 1.0 {
                        *t += h_try;
                        *x = x_new;
                        self.guard(x, *t)?;
                        let grow = 0.9 * err.max(1e-10).powf(-0.2);
                        self.h = h_try * grow.clamp(0.2, 5.0);
                    } else {
                        let shrink = 0.9 * err.powf(-0.2);
                        self.h = h_try * shrink.clamp(0.2, 1.0);
                    }
                }
            }
        }
        Ok(())
    }
}

fn rk4_step(field: &PolyMap, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let k1 = field.evaluate(x)?;
    let mut tmp: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
    let k2 = field.evaluate(&tmp)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    let k3 = field.evaluate(&tmp)?;
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    let k4 = field.evaluate(&tmp)?;
    Ok((0..n)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// One Dormand-Prince 5(4) step; returns (5th-order state, scaled error).
fn dopri_step(field: &PolyMap, x: &[f64], h: f64, rtol: f64, atol: f64) -> Result<(Vec<f64>, f64)> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let n = x.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(field.evaluate(x)?);
    for s in 0..6 {
        let mut xs = x.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..n {
                    xs[i] += h * a * kj[i];
                }
            }
        }
        k.push(field.evaluate(&xs)?);
    }
    let mut x5 = x.to_vec();
    let mut x4 = x.to_vec();
    for (j, kj) in k.iter().enumerate() {
        for i in 0..n {
            x5[i] += h * B5[j] * kj[i];
            x4[i] += h * B4[j] * kj[i];
        }
    }
    let mut err_sq = 0.0;
    for i in 0..n {
        let sc = atol + rtol * x[i].abs().max(x5[i].abs());
        let e = (x5[i] - x4[i]) / sc;
        err_sq += e * e;
    }
    let err = (err_sq / n as f64).sqrt();
    if !err.is_finite() {
        // force a rejection; the guard after acceptance handles true blow-up
        return Ok((x5, f64::MAX));
    }
    Ok((x5, err))
}

/// Flow map S_t(x0) for t >= 0. t = 0 returns x0 unchanged.
pub fn flow_map(field: &PolyMap, x0: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    if x0.len() != field.n() {
        return Err(Error::DimensionMismatch {
            expected: field.n(),
            got: x0.len(),
        });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "flow time must be finite and >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(x0.to_vec());
    }
    let mut stepper = Stepper::new(field, *cfg);
    let mut time = 0.0;
    let mut x = x0.to_vec();
    stepper.guard(&x, 0.0)?;
    stepper.advance(&mut time, &mut x, t)?;
    Ok(x)
}

/// Integrate once, recording the state at each requested time. Times must be
/// finite, non-negative, and non-decreasing.
pub fn flow_trajectory(
    field: &PolyMap,
    x0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if x0.len() != field.n() {
        return Err(Error::DimensionMismatch {
            expected: field.n(),
            got: x0.len(),
        });
    }
    for w in times.windows(2) {
        if !(w[0] <= w[1]) {
            return Err(Error::InvalidArgument(
                "trajectory times must be non-decreasing".into(),
            ));
        }
    }
    if let Some(&first) = times.first() {
        if !(first >= 0.0) || times.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "trajectory times must be finite and >= 0".into(),
            ));
        }
    }
    let mut stepper = Stepper::new(field, *cfg);
    let mut time = 0.0;
    let mut x = x0.to_vec();
    stepper.guard(&x, 0.0)?;
    let mut states = Vec::with_capacity(times.len());
    for &tt in times {
        if tt > time {
            stepper.advance(&mut time, &mut x, tt)?;
        }
        states.push(x.clone());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

/// First observed departure of a sampled trajectory from the domain.
#[derive(Debug, Clone, Serialize)]
pub struct ExitEvent {
    pub sample: usize,
    pub time: f64,
    pub state: Vec<f64>,
    /// True when the trajectory blew up rather than merely leaving the box.
    pub diverged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub samples: usize,
    pub horizon: f64,
    pub exit_fraction: f64,
    pub exits: Vec<ExitEvent>,
}

const INVARIANCE_CHECKPOINTS: usize = 64;

/// Integrate quasi-random interior samples over `horizon` and record which
/// leave the box. Trajectories are inspected at 64 evenly spaced checkpoint
/// times; brief excursions between checkpoints can go unnoticed.
pub fn check_invariance(
    field: &PolyMap,
    domain: &DomainBox,
    samples: usize,
    horizon: f64,
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<InvarianceReport> {
    if domain.dim() != field.n() {
        return Err(Error::DimensionMismatch {
            expected: field.n(),
            got: domain.dim(),
        });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let points = sample_box(domain, samples, seed)?;
    let times: Vec<f64> = (1..=INVARIANCE_CHECKPOINTS)
        .map(|j| horizon * j as f64 / INVARIANCE_CHECKPOINTS as f64)
        .collect();
    let exits: Vec<Option<ExitEvent>> = points
        .par_iter()
        .enumerate()
        .map(|(s, x0)| scan_for_exit(field, domain, s, x0, &times, cfg))
        .collect::<Result<Vec<_>>>()?;
    let exits: Vec<ExitEvent> = exits.into_iter().flatten().collect();
    Ok(InvarianceReport {
        samples,
        horizon,
        exit_fraction: exits.len() as f64 / samples.max(1) as f64,
        exits,
    })
}

fn scan_for_exit(
    field: &PolyMap,
    domain: &DomainBox,
    sample: usize,
    x0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Option<ExitEvent>> {
    let mut stepper = Stepper::new(field, *cfg);
    let mut time = 0.0;
    let mut x = x0.to_vec();
    for &tt in times {
        let before = x.clone();
        match stepper.advance(&mut time, &mut x, tt) {
            Ok(()) => {}
            Err(Error::NonFinite { t }) => {
                return Ok(Some(ExitEvent {
                    sample,
                    time: t,
                    state: before,
                    diverged: true,
                }));
            }
            Err(e) => return Err(e),
        }
        if !domain.contains(&x) {
            return Ok(Some(ExitEvent {
                sample,
                time: tt,
                state: x,
                diverged: false,
            }));
        }
    }
    Ok(None)
}

/// Max-abs defect of the semigroup property: || S_{t+s}(x) - S_t(S_s(x)) ||.
pub fn semigroup_defect(
    field: &PolyMap,
    x0: &[f64],
    t: f64,
    s: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let direct = flow_map(field, x0, t + s, cfg)?;
    let mid = flow_map(field, x0, s, cfg)?;
    let composed = flow_map(field, &mid, t, cfg)?;
    Ok(direct
        .iter()
        .zip(&composed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
