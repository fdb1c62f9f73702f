//! Action functionals of delta-state paths, evaluated through the kernel
//! double integral or through the reduced classical form, and the matching
//! equations of motion solved by RK4 and by direct minimization.
//!
//! Configuration space is one spatial coordinate. Space-time problems
//! (`Relativistic`, `Curved`) are parameterized by coordinate time, so the
//! space-time label of a path is `(x(t), t)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, numeric, Error, Result};
use crate::grid::{
    inner_kernel, make_delta_approx, make_delta_approx_derivative, Axis, GridSpec, KernelSpec, DELTA_CUTOFF,
};
use crate::potential::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    /// `∫ m/2 ẋ² - V(x) dt`
    Classical,
    /// `m/2 ∫ ṫ² - ẋ² dτ`
    Relativistic,
    /// `m/2 ∫ (1+2u(x)) ṫ² - ẋ² dτ`
    Curved,
}

#[derive(Clone, Debug)]
pub struct ActionProblem {
    pub kind: ActionKind,
    pub mass: f64,
    /// `V` for classical problems, `u` for curved ones, unused otherwise.
    pub potential: Potential,
    pub t0: f64,
    pub t1: f64,
}

impl ActionProblem {
    pub fn new(kind: ActionKind, mass: f64, potential: Potential, t0: f64, t1: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(domain(format!("mass must be positive, got {mass}")));
        }
        if !(t1 > t0) {
            return Err(domain(format!("time window [{t0}, {t1}] is degenerate")));
        }
        Ok(ActionProblem {
            kind,
            mass,
            potential,
            t0,
            t1,
        })
    }

    pub fn classical(mass: f64, v: Potential, t0: f64, t1: f64) -> Result<Self> {
        Self::new(ActionKind::Classical, mass, v, t0, t1)
    }

    pub fn relativistic(mass: f64, t0: f64, t1: f64) -> Result<Self> {
        Self::new(ActionKind::Relativistic, mass, Potential::Zero, t0, t1)
    }

    pub fn curved(mass: f64, u: Potential, t0: f64, t1: f64) -> Result<Self> {
        Self::new(ActionKind::Curved, mass, u, t0, t1)
    }

    /// Reduced Lagrangian at position `x` and velocity `v`.
    pub fn lagrangian(&self, x: f64, v: f64) -> f64 {
        let m = self.mass;
        match self.kind {
            ActionKind::Classical => 0.5 * m * v * v - self.potential.value(x),
            ActionKind::Relativistic => 0.5 * m * (1.0 - v * v),
            ActionKind::Curved => 0.5 * m * (1.0 + 2.0 * self.potential.value(x) - v * v),
        }
    }

    /// Acceleration `ẍ` from the Euler–Lagrange equation.
    pub fn acceleration(&self, x: f64) -> f64 {
        match self.kind {
            ActionKind::Classical => -self.potential.gradient(x) / self.mass,
            ActionKind::Relativistic => 0.0,
            ActionKind::Curved => -self.potential.gradient(x),
        }
    }

    /// Conserved energy of the equation of motion (per unit mass for the
    /// space-time problems).
    pub fn energy(&self, x: f64, v: f64) -> f64 {
        match self.kind {
            ActionKind::Classical => 0.5 * self.mass * v * v + self.potential.value(x),
            ActionKind::Relativistic => 0.5 * v * v,
            ActionKind::Curved => 0.5 * v * v + self.potential.value(x),
        }
    }

    /// The potential of the equivalent Newtonian problem `m ẍ = -V'(x)`,
    /// whose action differs from `-S` only by a constant.
    fn newtonian_potential(&self) -> Potential {
        match self.kind {
            ActionKind::Classical => self.potential.clone(),
            ActionKind::Relativistic => Potential::Zero,
            ActionKind::Curved => {
                let u = self.potential.clone();
                let m = self.mass;
                match u {
                    Potential::Zero => Potential::Zero,
                    Potential::Linear { slope } => Potential::Linear { slope: m * slope },
                    Potential::Harmonic { stiffness } => Potential::Harmonic { stiffness: m * stiffness },
                    Potential::Custom(f) => Potential::custom(move |x| m * f(x)),
                }
            }
        }
    }
}

/// Time-sampled path `x(t)` with piecewise-linear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<f64>,
    /// Velocities at the samples when known (ODE solutions).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocities: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, points: Vec<f64>) -> Result<Self> {
        if times.len() != points.len() || times.len() < 2 {
            return Err(Error::Shape(format!(
                "trajectory needs matching times and points, got {} and {}",
                times.len(),
                points.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("trajectory times must be strictly increasing"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(numeric("trajectory contains non-finite points"));
        }
        Ok(Trajectory {
            times,
            points,
            velocities: None,
        })
    }

    /// Samples `f` at `n` uniformly spaced times over `[t0, t1]`.
    pub fn sample(t0: f64, t1: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(domain("need at least two samples"));
        }
        let times: Vec<f64> = (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect();
        let points = times.iter().map(|&t| f(t)).collect();
        Self::new(times, points)
    }

    fn segment(&self, t: f64) -> usize {
        match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            k => (k - 1).min(self.times.len() - 2),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let s = (t - ta) / (tb - ta);
        self.points[k] * (1.0 - s) + self.points[k + 1] * s
    }

    /// Slope of the segment containing `t`.
    pub fn slope(&self, t: f64) -> f64 {
        let k = self.segment(t);
        (self.points[k + 1] - self.points[k]) / (self.times[k + 1] - self.times[k])
    }

    /// Largest pointwise gap to `other`, sampled at this trajectory's times.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.times
            .iter()
            .zip(&self.points)
            .map(|(&t, &x)| (x - other.value(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// Settings for evaluating the action through the kernel double integral.
#[derive(Clone, Debug)]
pub struct KernelRoute {
    /// Width of the delta approximations.
    pub eps: f64,
    /// Quadrature grid: `[x]` for classical problems, `[x, t]` otherwise.
    /// Only the window around each path point is used.
    pub grid: GridSpec,
    /// Combine widths `ε` and `ε/2` to cancel the `O(ε²)` term.
    pub richardson: bool,
}

#[derive(Clone, Debug)]
pub enum Route {
    Reduced,
    Kernel(KernelRoute),
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Evaluates the action of a piecewise-linear trajectory, using three
/// Gauss–Legendre nodes per segment for the time integral.
pub fn action_functional(p: &ActionProblem, traj: &Trajectory, via: &Route) -> Result<f64> {
    match via {
        Route::Reduced => Ok(time_integral(traj, |x, v| Ok(p.lagrangian(x, v)))?),
        Route::Kernel(route) => {
            let at = |eps: f64| time_integral(traj, |x, v| kernel_lagrangian(p, route, eps, x, v));
            let coarse = at(route.eps)?;
            if !route.richardson {
                return Ok(coarse);
            }
            let fine = at(0.5 * route.eps)?;
            Ok((4.0 * fine - coarse) / 3.0)
        }
    }
}

fn time_integral(traj: &Trajectory, mut l: impl FnMut(f64, f64) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..traj.times.len() - 1 {
        let (ta, tb) = (traj.times[k], traj.times[k + 1]);
        let (xa, xb) = (traj.points[k], traj.points[k + 1]);
        let half = 0.5 * (tb - ta);
        let v = (xb - xa) / (tb - ta);
        for &(node, w) in &GAUSS3 {
            let s = 0.5 * (1.0 + node);
            total += half * w * l(xa + s * (xb - xa), v)?;
        }
    }
    Ok(total)
}

/// Kernel form of the Lagrangian at label `x` moving with velocity `v`.
///
/// Classical: `m/2 (φ', φ')_k - (Vφ, φ)_k` with the Euclidean kernel.
/// Space-time: `-(m/2) (φ', φ')_k` with the Minkowski or curved kernel,
/// where the sign turns the raw timelike-negative product into `ds²`.
pub fn kernel_lagrangian(p: &ActionProblem, route: &KernelRoute, eps: f64, x: f64, v: f64) -> Result<f64> {
    match p.kind {
        ActionKind::Classical => {
            let k = KernelSpec::euclid(1.0)?;
            let local = local_window(&route.grid, &[x], eps)?;
            let delta = make_delta_approx(&[x], eps, &local)?;
            let vel = make_delta_approx_derivative(&[x], eps, 0, &local)?.scale(Complex64::new(-v, 0.0));
            let kinetic = inner_kernel(&vel, &vel, &k)?.re;
            let vd = delta.map(|q, f| f * p.potential.value(q[0]))?;
            let pot = inner_kernel(&vd, &delta, &k)?.re;
            Ok(0.5 * p.mass * kinetic - pot)
        }
        ActionKind::Relativistic | ActionKind::Curved => {
            let k = if p.kind == ActionKind::Curved {
                KernelSpec::curved(1.0, p.potential.clone())?
            } else {
                KernelSpec::minkowski(1.0)?
            };
            spacetime_kernel_lagrangian(p.mass, &k, route, eps, [x, 0.0], [v, 1.0])
        }
    }
}

/// `-(m/2)(dφ/dτ, dφ/dτ)_k` for a delta path through space-time point `a`
/// with label velocity `adot`. The time coordinate of `a` is taken from the
/// grid window, so callers working in coordinate gauge may pass any value;
/// a window centred on the time axis midpoint is used.
pub fn spacetime_kernel_lagrangian(
    mass: f64,
    k: &KernelSpec,
    route: &KernelRoute,
    eps: f64,
    a: [f64; 2],
    adot: [f64; 2],
) -> Result<f64> {
    if route.grid.dim() != 2 {
        return Err(Error::Shape("space-time kernel route needs a 1+1-D grid".into()));
    }
    // The kernels depend on time only through t - s, so the path point can be
    // placed at the centre of the time axis without changing the product.
    let t_axis = route.grid.axis(1);
    let t_mid = t_axis.coord(t_axis.n / 2);
    let point = [a[0], t_mid];
    let local = local_window(&route.grid, &point, eps)?;
    let dx = make_delta_approx_derivative(&point, eps, 0, &local)?;
    let dt = make_delta_approx_derivative(&point, eps, 1, &local)?;
    let vel = dx.combine(Complex64::new(-adot[0], 0.0), &dt, Complex64::new(-adot[1], 0.0))?;
    Ok(-0.5 * mass * inner_kernel(&vel, &vel, k)?.re)
}

/// The part of `grid` needed to hold a width-`eps` delta at `a`.
fn local_window(grid: &GridSpec, a: &[f64], eps: f64) -> Result<GridSpec> {
    let margin = (DELTA_CUTOFF + 1.0) * eps;
    grid.check_inside(a, margin)?;
    let mut axes = Vec::with_capacity(grid.dim());
    for (k, &c) in a.iter().enumerate() {
        let axis = grid.axis(k);
        let h = axis.spacing();
        // One extra sample on each side absorbs rounding in the margin check.
        let lo = (((c - margin - axis.lo) / h).floor() - 1.0).max(0.0) as usize;
        let hi = ((((c + margin - axis.lo) / h).ceil() + 1.0) as usize).min(axis.n - 1);
        let (lo, hi) = widen(lo, hi, axis.n);
        axes.push(Axis::new(axis.coord(lo), axis.coord(hi), hi - lo + 1)?);
    }
    GridSpec::new(axes)
}

fn widen(mut lo: usize, mut hi: usize, n: usize) -> (usize, usize) {
    while hi - lo + 1 < GridSpec::MIN_SAMPLES {
        if lo > 0 {
            lo -= 1;
        }
        if hi + 1 < n {
            hi += 1;
        }
    }
    (lo, hi)
}

/// Initial data for [`solve_euler_lagrange`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub x: f64,
    pub v: f64,
}

/// RK4 integration of the reduced equation of motion over the problem window
/// with step `dt` (the last step is shortened to land on `t1`).
pub fn solve_euler_lagrange(p: &ActionProblem, initial: InitialState, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(domain("time step must be positive"));
    }
    let steps = ((p.t1 - p.t0) / dt - 1e-9).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    let (mut t, mut x, mut v) = (p.t0, initial.x, initial.v);
    times.push(t);
    xs.push(x);
    vs.push(v);
    for i in 0..steps {
        let h = if i + 1 == steps { p.t1 - t } else { dt };
        let acc = |x: f64| p.acceleration(x);
        let (k1x, k1v) = (v, acc(x));
        let (k2x, k2v) = (v + 0.5 * h * k1v, acc(x + 0.5 * h * k1x));
        let (k3x, k3v) = (v + 0.5 * h * k2v, acc(x + 0.5 * h * k2x));
        let (k4x, k4v) = (v + h * k3v, acc(x + h * k3x));
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        t = if i + 1 == steps { p.t1 } else { t + h };
        if !(x.is_finite() && v.is_finite()) {
            return Err(numeric(format!("equation of motion diverged at t = {t}")));
        }
        times.push(t);
        xs.push(x);
        vs.push(v);
    }
    let mut traj = Trajectory::new(times, xs)?;
    traj.velocities = Some(vs);
    Ok(traj)
}

/// Solves the two-point boundary problem `x(t0) = x0`, `x(t1) = x1` by secant
/// shooting on the initial velocity over [`solve_euler_lagrange`].
pub fn shoot(p: &ActionProblem, x0: f64, x1: f64, dt: f64) -> Result<Trajectory> {
    let end = |v: f64| -> Result<f64> {
        let tr = solve_euler_lagrange(p, InitialState { x: x0, v }, dt)?;
        Ok(tr.points[tr.points.len() - 1] - x1)
    };
    let mut va = (x1 - x0) / (p.t1 - p.t0);
    let mut vb = va + 0.1;
    let mut fa = end(va)?;
    let mut fb = end(vb)?;
    for _ in 0..60 {
        if fb.abs() < 1e-13 * (1.0 + x1.abs()) || fb == fa {
            break;
        }
        let vn = vb - fb * (vb - va) / (fb - fa);
        va = vb;
        fa = fb;
        vb = vn;
        fb = end(vb)?;
    }
    if fb.abs() > 1e-9 * (1.0 + x1.abs()) {
        return Err(numeric(format!("shooting missed the endpoint by {fb:e}")));
    }
    solve_euler_lagrange(p, InitialState { x: x0, v: vb }, dt)
}

/// Optimizer limits for [`minimize_action`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop when the discrete Euler–Lagrange residual (gradient divided by
    /// the knot spacing) is below this in max-norm.
    pub tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iter: 20_000,
            tol: 1e-10,
        }
    }
}

pub const DEFAULT_KNOTS: usize = 64;
pub const DEFAULT_DT: f64 = 1e-3;

/// Minimizes the reduced action over the interior knots of a uniform
/// piecewise-linear path with fixed endpoints `x(t0) = x0`, `x(t1) = x1`.
///
/// The potential term uses the trapezoid rule at the knots, so stationary
/// points satisfy the Störmer–Verlet discretization of the equation of
/// motion. Space-time problems are solved in coordinate gauge by minimizing
/// `-S`, which is the Newtonian action with potential `m·u` up to a constant.
pub fn minimize_action(
    p: &ActionProblem,
    x0: f64,
    x1: f64,
    n_knots: usize,
    opts: MinimizeOptions,
) -> Result<Trajectory> {
    if n_knots < 8 {
        return Err(domain(format!("need at least 8 knots, got {n_knots}")));
    }
    let v = p.newtonian_potential();
    let m = p.mass;
    let dt = (p.t1 - p.t0) / (n_knots - 1) as f64;
    let full = |inner: &[f64]| -> Vec<f64> {
        let mut xs = Vec::with_capacity(n_knots);
        xs.push(x0);
        xs.extend_from_slice(inner);
        xs.push(x1);
        xs
    };
    let objective = |inner: &[f64], grad: &mut [f64]| -> f64 {
        let xs = full(inner);
        let mut s = 0.0;
        for k in 0..n_knots - 1 {
            let d = xs[k + 1] - xs[k];
            s += 0.5 * m * d * d / dt - 0.5 * dt * (v.value(xs[k]) + v.value(xs[k + 1]));
        }
        for (i, g) in grad.iter_mut().enumerate() {
            let k = i + 1;
            *g = m * (2.0 * xs[k] - xs[k - 1] - xs[k + 1]) / dt - dt * v.gradient(xs[k]);
        }
        s
    };
    let start: Vec<f64> = (1..n_knots - 1)
        .map(|k| x0 + (x1 - x0) * k as f64 / (n_knots - 1) as f64)
        .collect();
    // The kinetic term's tridiagonal Hessian is used as the initial inverse
    // Hessian approximation, which removes the O(n²) conditioning of the knots.
    let kinetic = move |g: &[f64]| -> Vec<f64> {
        let diag = 2.0 * m / dt;
        let off = -m / dt;
        thomas(&vec![off; g.len()], &vec![diag; g.len()], &vec![off; g.len()], g)
    };
    let inner = lbfgs(objective, kinetic, start, opts.tol * dt, opts.max_iter)?;
    let times = (0..n_knots).map(|k| p.t0 + k as f64 * dt).collect();
    Trajectory::new(times, full(&inner))
}

/// Solves a tridiagonal system with sub-, main and super-diagonals `a`, `b`, `c`.
pub(crate) fn thomas<T>(a: &[T], b: &[T], c: &[T], d: &[T]) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<Output = T> + std::ops::Div<Output = T>,
{
    let n = d.len();
    let mut cp = Vec::with_capacity(n);
    let mut dp = Vec::with_capacity(n);
    cp.push(c[0] / b[0]);
    dp.push(d[0] / b[0]);
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp.push(c[i] / den);
        dp.push((d[i] - a[i] * dp[i - 1]) / den);
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] = x[i] - cp[i] * x[i + 1];
    }
    x
}

/// Preconditioned limited-memory BFGS with Armijo backtracking. `precond`
/// applies the initial inverse Hessian approximation. Stops when the
/// gradient max-norm drops below `tol`.
fn lbfgs(
    f: impl Fn(&[f64], &mut [f64]) -> f64,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    mut x: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    const MEMORY: usize = 12;
    let n = x.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let maxabs = |a: &[f64]| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = std::collections::VecDeque::new();
    let mut g_new = vec![0.0; n];
    for iter in 0..max_iter {
        if maxabs(&g) < tol {
            return Ok(x);
        }
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let mut r = precond(&q);
        if let Some((s, y, _)) = hist.back() {
            let py = precond(y);
            let gamma = dot(s, y) / dot(y, &py);
            r.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &r);
            for (ri, si) in r.iter_mut().zip(s) {
                *ri += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = precond(&g).iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let ft = f(&trial, &mut g_new);
            let armijo = ft <= fx + 1e-4 * step * slope;
            // Near the optimum the decrease is below the rounding of f; fall
            // back to requiring a smaller gradient.
            let flat = (ft - fx).abs() <= 1e-14 * (1.0 + fx.abs()) && maxabs(&g_new) < maxabs(&g);
            if armijo || flat {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            return Err(Error::Optimization {
                iterations: iter,
                grad_norm: maxabs(&g),
            });
        };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        fx = f_new;
        std::mem::swap(&mut g, &mut g_new);
    }
    if maxabs(&g) < tol {
        return Ok(x);
    }
    Err(Error::Optimization {
        iterations: max_iter,
        grad_norm: maxabs(&g),
    })
}
