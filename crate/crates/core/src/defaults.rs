//! Default numerical parameters, collected in one place.
//!
//! | constant | value | used by |
//! |---|---|---|
//! | [`ORDER_K`] | 5 | truncation order for conjugacy maps |
//! | [`LIE_DEPTH`] | 6 | bracket nesting depth in Lie closures |
//! | [`LIE_DEGREE_CAP`] | 8 | max polynomial degree tracked in Lie closures |
//! | [`DENOMINATOR_TOL`] | 1e-9 | small-denominator / resonance-gap threshold |
//! | [`CONTOUR_NODES`] | 64 | trapezoid nodes on spectral contours |
//! | [`RK45_RTOL`] | 1e-9 | adaptive integrator relative tolerance |
//! | [`RK45_ATOL`] | 1e-11 | adaptive integrator absolute tolerance |
//! | [`RK4_STEP`] | 1e-3 | fixed-step integrator step size |
//! | [`MAX_STEPS`] | 1_000_000 | integrator step cap |
//! | [`BLOWUP_NORM`] | 1e6 | trajectory norm treated as divergence |
//! | [`INFINITE_ORDER_CAP`] | 8 | finite stand-in when checking order-infinity conditions |
//! | [`ENUMERATION_BUDGET`] | 1e7 | max multi-indices enumerated per check |
//! | [`COEFF_PRUNE`] | 1e-14 | magnitude below which computed coefficients are dropped |
//! | [`RANK_TOL`] | 1e-8 | relative rank tolerance in Lie-basis acceptance |
//! | [`BILINEAR_RESIDUAL`] | 1e-6 | max allowed bilinear fit residual |
//! | [`SAMPLES`] | 64 | default sample-point count for verification |
//! | [`PULLBACK_DECADES`] | 10.0 | flow-pullback horizon in units of 1/|max Re lambda| |

pub const ORDER_K: u32 = 5;
pub const LIE_DEPTH: usize = 6;
pub const LIE_DEGREE_CAP: u32 = 8;
pub const DENOMINATOR_TOL: f64 = 1e-9;
pub const CONTOUR_NODES: usize = 64;
pub const RK45_RTOL: f64 = 1e-9;
pub const RK45_ATOL: f64 = 1e-11;
pub const RK4_STEP: f64 = 1e-3;
pub const MAX_STEPS: usize = 1_000_000;
pub const BLOWUP_NORM: f64 = 1e6;
pub const INFINITE_ORDER_CAP: u32 = 8;
pub const ENUMERATION_BUDGET: u128 = 10_000_000;
pub const COEFF_PRUNE: f64 = 1e-14;
pub const RANK_TOL: f64 = 1e-8;
pub const BILINEAR_RESIDUAL: f64 = 1e-6;
pub const SAMPLES: usize = 64;
pub const PULLBACK_DECADES: f64 = 10.0;
