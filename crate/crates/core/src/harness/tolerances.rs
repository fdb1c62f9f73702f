//! Pass/fail bars of the acceptance checks.

/// Componentwise gap of the analytic induced metric from `L²·I`.
pub const METRIC_IDENTITY: f64 = 1e-12;
/// Finite-difference cross-check of the analytic metric.
pub const METRIC_FD: f64 = 1e-6;

/// Relative speed error of a straight delta path at the finest width.
pub const SPEED_RELATIVE: f64 = 1e-2;
/// Accepted range of the observed convergence order in the width.
pub const SPEED_ORDER: (f64, f64) = (1.8, 2.2);

/// Relative gap between kernel-form and reduced-form actions.
pub const ACTION_ROUTES: f64 = 2e-2;
/// Sup-norm gap between the minimizing path and the ODE solution.
pub const NEWTON_SUP: f64 = 1e-3;

pub const SPIN_RESIDUAL: f64 = 1e-6;
/// Required ratio of control residual to exact-solution residual.
pub const SPIN_CONTROL_RATIO: f64 = 100.0;
pub const SPIN_K_SPEED: f64 = 1e-12;
pub const SPIN_PHASE: f64 = 1e-14;

pub const THEOREM1_SOLUTION: f64 = 1e-2;
pub const THEOREM1_NON_SOLUTION: f64 = 1e-1;

pub const KINEMATICS_FINITE: f64 = 1e-8;
pub const KINEMATICS_GRID: f64 = 1e-4;
pub const KINEMATICS_FS: f64 = 1e-4;

pub const UNCERTAINTY_IDENTITY: f64 = 1e-10;
pub const GAUSSIAN_PRODUCT: f64 = 1e-6;
/// `|⟨[x̂, p̂]⟩| / 2`
pub const CANONICAL_BOUND: f64 = 0.5;

pub const SHADOW_VELOCITY: f64 = 1e-4;
pub const SHADOW_ACCELERATION: f64 = 1e-3;
pub const SHADOW_FIBRE: f64 = 1e-10;
pub const COLLAPSE_VELOCITY: f64 = 1e-3;

pub const BORN_IDENTITY: f64 = 1e-8;

/// Number of binomial standard deviations allowed for hit frequencies.
pub const DIFFUSION_SIGMAS: f64 = 3.0;

pub const PROPAGATOR_RESIDUAL: f64 = 1e-3;
pub const PROPAGATOR_GROUP: f64 = 1e-3;
