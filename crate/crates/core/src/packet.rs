//! One-dimensional Schrödinger propagation: the closed-form uniformly
//! accelerated Gaussian packet, a Crank–Nicolson propagator, shadows of the
//! evolution on the Gaussian manifold, Madelung residuals, width-reset
//! collapse, the space-time path residual and the free propagator.
//!
//! Shadow velocities and accelerations are the components along the unit
//! tangent `-dr/dx / ‖dr/dx‖` of the manifold, divided by `‖dr/dx‖`, so they
//! come out in the same length units as the grid. With `σ = 1/√2` (lengths in
//! units of `√2σ`) this is the bare product `(dr/dt, -dr/dx)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::thomas;
use crate::error::{domain, numeric, Error, Result};
use crate::grid::{pairwise_sum, Axis, GridSpec, StateFunction, TILDE_DELTA_MARGIN};
use crate::potential::Potential;
use crate::stencil::{d1_4, d1_4c, d2_4, FIVE_POINT_D1, FIVE_POINT_D2};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub const DEFAULT_LO: f64 = -20.0;
pub const DEFAULT_HI: f64 = 20.0;
pub const DEFAULT_N: usize = 2048;
pub const DEFAULT_DT: f64 = 5e-4;

pub fn default_grid() -> GridSpec {
    GridSpec::line(DEFAULT_LO, DEFAULT_HI, DEFAULT_N).expect("default grid is valid")
}

/// Gaussian packet in the linear potential `V = -m·w·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketParams {
    pub sigma: f64,
    pub m: f64,
    pub x0: f64,
    pub v0: f64,
    #[serde(default)]
    pub w: f64,
}

impl PacketParams {
    pub fn new(sigma: f64, m: f64, x0: f64, v0: f64, w: f64) -> Result<Self> {
        let p = PacketParams { sigma, m, x0, v0, w };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(domain(format!("packet width must be positive, got {}", self.sigma)));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(domain(format!("mass must be positive, got {}", self.m)));
        }
        if ![self.x0, self.v0, self.w].iter().all(|v| v.is_finite()) {
            return Err(domain("packet centre, velocity and acceleration must be finite"));
        }
        Ok(())
    }

    pub fn potential(&self) -> Potential {
        Potential::Linear { slope: -self.m * self.w }
    }

    pub fn center(&self, t: f64) -> f64 {
        self.x0 + self.v0 * t + 0.5 * self.w * t * t
    }

    pub fn velocity(&self, t: f64) -> f64 {
        self.v0 + self.w * t
    }

    /// `sqrt(σ² + t²/(m²σ²))`
    pub fn width(&self, t: f64) -> f64 {
        (self.sigma.powi(2) + (t / (self.m * self.sigma)).powi(2)).sqrt()
    }

    /// `ψ(x, t)`. The free packet `ψ_f` is carried along `y = x - wt²/2`
    /// and multiplied by `exp(i m w t x - i m w² t³/6)`.
    pub fn value(&self, x: f64, t: f64) -> Complex64 {
        let (s, m) = (self.sigma, self.m);
        let tau = t / (m * s * s);
        let z = Complex64::new(1.0, tau);
        let y = x - 0.5 * self.w * t * t;
        let u = y - self.x0 - self.v0 * t;
        let free_phase = m * self.v0 * (y - self.x0) - 0.5 * m * self.v0 * self.v0 * t;
        let boost = m * self.w * t * x - m * self.w * self.w * t.powi(3) / 6.0;
        let envelope = (-(u * u) / (2.0 * s * s * z)).exp() / z.sqrt();
        envelope * Complex64::from_polar((PI * s * s).powf(-0.25), free_phase + boost)
    }
}

/// Samples the closed-form packet at time `t` on a 1-D grid.
pub fn packet_closed_form(p: &PacketParams, t: f64, grid: &GridSpec) -> Result<StateFunction> {
    p.validate()?;
    if grid.dim() != 1 {
        return Err(Error::Shape("packets live on 1-D grids".into()));
    }
    grid.check_inside(&[p.center(t)], TILDE_DELTA_MARGIN * p.width(t))?;
    StateFunction::from_fn(grid, |q| p.value(q[0], t))
}

/// Discrete second derivative used by [`CrankNicolson`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Laplacian {
    /// 3-point, matching the grid observables.
    ThreePoint,
    /// 5-point, 4th order.
    FivePoint,
}

impl Laplacian {
    /// Stencil weights at offsets 0, ±1, ±2 in units of `1/h²`.
    fn weights(self) -> [f64; 3] {
        match self {
            Laplacian::ThreePoint => [-2.0, 1.0, 0.0],
            Laplacian::FivePoint => [-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0],
        }
    }
}

/// Crank–Nicolson step `(1 + i dt ĥ/2) ψ' = (1 - i dt ĥ/2) ψ` with zero
/// Dirichlet values beyond the grid.
#[derive(Clone, Debug)]
pub struct CrankNicolson {
    grid: GridSpec,
    dt: f64,
    /// `ĥ` bands at offsets 1 and 2.
    off: [f64; 2],
    diag: Vec<f64>,
}

/// Largest tolerated change of the norm in one step.
pub const MAX_NORM_DRIFT: f64 = 1e-6;

impl CrankNicolson {
    /// 3-point Laplacian, the same `ĥ` as the grid observables.
    pub fn new(grid: &GridSpec, mass: f64, potential: &Potential, dt: f64) -> Result<Self> {
        Self::with_laplacian(grid, mass, potential, dt, Laplacian::ThreePoint)
    }

    pub fn with_laplacian(grid: &GridSpec, mass: f64, potential: &Potential, dt: f64, lap: Laplacian) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::Shape("Crank–Nicolson acts on 1-D grids".into()));
        }
        if !(mass > 0.0 && dt.is_finite() && dt != 0.0) {
            return Err(domain("mass must be positive and dt nonzero"));
        }
        let h = grid.spacing(0);
        let c = -0.5 / (mass * h * h);
        let [w0, w1, w2] = lap.weights();
        let diag: Vec<f64> = (0..grid.len()).map(|j| c * w0 + potential.value(grid.point(j)[0])).collect();
        if diag.iter().any(|d| !d.is_finite()) {
            return Err(domain("potential is not finite on the grid"));
        }
        Ok(CrankNicolson {
            grid: grid.clone(),
            dt,
            off: [c * w1, c * w2],
            diag,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn apply_h(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len() as isize;
        let at = |j: isize| if j < 0 || j >= n { Complex64::new(0.0, 0.0) } else { v[j as usize] };
        (0..n)
            .map(|j| {
                v[j as usize] * self.diag[j as usize]
                    + (at(j - 1) + at(j + 1)) * self.off[0]
                    + (at(j - 2) + at(j + 2)) * self.off[1]
            })
            .collect()
    }

    fn advance(&self, psi: &StateFunction, dt: f64) -> Result<StateFunction> {
        if psi.grid() != &self.grid {
            return Err(Error::Shape("state and propagator grids differ".into()));
        }
        let v = psi.values();
        let half = I * (0.5 * dt);
        let hv = self.apply_h(v);
        let rhs: Vec<Complex64> = v.iter().zip(&hv).map(|(a, b)| a - half * b).collect();
        let diag: Vec<Complex64> = self.diag.iter().map(|d| Complex64::new(1.0, 0.0) + half * d).collect();
        let solved = if self.off[1] == 0.0 {
            let off = vec![half * self.off[0]; v.len()];
            thomas(&off, &diag, &off, &rhs)
        } else {
            penta_solve(&diag, half * self.off[0], half * self.off[1], rhs)
        };
        let next = psi.with_values(solved)?;
        let drift = (next.norm() - psi.norm()).abs();
        if !(drift <= MAX_NORM_DRIFT) {
            return Err(numeric(format!("Crank–Nicolson step changed the norm by {drift:e}")));
        }
        Ok(next)
    }

    pub fn step(&self, psi: &StateFunction) -> Result<StateFunction> {
        self.advance(psi, self.dt)
    }

    pub fn step_back(&self, psi: &StateFunction) -> Result<StateFunction> {
        self.advance(psi, -self.dt)
    }
}

/// Solves the symmetric pentadiagonal system with diagonal `d` and constant
/// bands `e` (offset 1) and `f` (offset 2) by banded elimination without
/// pivoting. `I + iS` with real symmetric `S` has a positive definite
/// Hermitian part, so no pivoting is needed.
fn penta_solve(d: &[Complex64], e: Complex64, f: Complex64, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = d.len();
    let mut diag = d.to_vec();
    let mut up1 = vec![e; n];
    let mut low1 = vec![e; n];
    for k in 0..n {
        if k + 1 < n {
            let l = low1[k + 1] / diag[k];
            diag[k + 1] -= l * up1[k];
            up1[k + 1] -= l * f;
            b[k + 1] = b[k + 1] - l * b[k];
        }
        if k + 2 < n {
            let l = f / diag[k];
            low1[k + 2] -= l * up1[k];
            diag[k + 2] -= l * f;
            b[k + 2] = b[k + 2] - l * b[k];
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        if k + 1 < n {
            acc -= up1[k] * x[k + 1];
        }
        if k + 2 < n {
            acc -= f * x[k + 2];
        }
        x[k] = acc / diag[k];
    }
    x
}

/// Frames of an evolution sampled at `times`.
#[derive(Clone, Debug)]
pub struct PacketTrajectory {
    pub times: Vec<f64>,
    pub frames: Vec<StateFunction>,
}

impl PacketTrajectory {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Five consecutive frames centred at index `k`.
    pub fn window(&self, k: usize) -> Result<ShadowWindow> {
        if k < 2 || k + 2 >= self.frames.len() {
            return Err(domain(format!("frame {k} has no two neighbours on each side")));
        }
        Ok(ShadowWindow {
            time: self.times[k],
            dt: self.dt(),
            frames: std::array::from_fn(|j| self.frames[k + j - 2].clone()),
        })
    }
}

/// Evolves `psi0` over `window` with Crank–Nicolson and the 5-point
/// Laplacian, keeping every frame.
pub fn crank_nicolson_evolve(
    psi0: &StateFunction,
    mass: f64,
    potential: &Potential,
    window: (f64, f64),
    dt: f64,
) -> Result<PacketTrajectory> {
    crank_nicolson_evolve_with(psi0, mass, potential, window, dt, Laplacian::FivePoint)
}

pub fn crank_nicolson_evolve_with(
    psi0: &StateFunction,
    mass: f64,
    potential: &Potential,
    window: (f64, f64),
    dt: f64,
    lap: Laplacian,
) -> Result<PacketTrajectory> {
    if !(window.1 > window.0 && dt > 0.0) {
        return Err(domain("window must be nondegenerate and dt positive"));
    }
    let steps = ((window.1 - window.0) / dt).round() as usize;
    let cn = CrankNicolson::with_laplacian(psi0.grid(), mass, potential, dt, lap)?;
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(psi0.clone());
    for k in 0..steps {
        let next = cn.step(&frames[k]).map_err(|e| e.context(format!("step {k}")))?;
        frames.push(next);
    }
    let times = (0..=steps).map(|k| window.0 + k as f64 * dt).collect();
    Ok(PacketTrajectory { times, frames })
}

/// Lowest eigenvector of the discrete Hamiltonian of [`CrankNicolson`],
/// by shifted inverse iteration.
pub fn discrete_ground_state(grid: &GridSpec, mass: f64, potential: &Potential, lap: Laplacian) -> Result<StateFunction> {
    let op = CrankNicolson::with_laplacian(grid, mass, potential, 1.0, lap)?;
    let n = grid.len();
    let shift = (0..n).map(|j| potential.value(grid.point(j)[0])).fold(f64::INFINITY, f64::min) - 1.0;
    let diag: Vec<Complex64> = op.diag.iter().map(|d| Complex64::new(d - shift, 0.0)).collect();
    let (e, f) = (Complex64::new(op.off[0], 0.0), Complex64::new(op.off[1], 0.0));
    let mut x: Vec<Complex64> = (0..n).map(|j| Complex64::new((-(grid.point(j)[0]).powi(2) / 2.0).exp() + 1e-3, 0.0)).collect();
    let mut rayleigh_prev = f64::INFINITY;
    for _ in 0..2000 {
        let y = penta_solve(&diag, e, f, x);
        let norm = y.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        x = y.into_iter().map(|a| a / norm).collect();
        let hx = op.apply_h(&x);
        let rayleigh: f64 = x.iter().zip(&hx).map(|(a, b)| (a.conj() * b).re).sum();
        if (rayleigh - rayleigh_prev).abs() < 1e-15 * rayleigh.abs().max(1.0) {
            break;
        }
        rayleigh_prev = rayleigh;
    }
    StateFunction::new(grid.clone(), x.into_iter().map(|a| Complex64::new(a.re, 0.0)).collect())?.normalized()
}

/// Mean of `x` under `|ψ|²`.
pub fn measured_center(psi: &StateFunction) -> f64 {
    let g = psi.grid();
    let num: Vec<f64> = (0..g.len()).map(|j| g.weight(j) * g.point(j)[0] * psi.values()[j].norm_sqr()).collect();
    let den: Vec<f64> = (0..g.len()).map(|j| g.weight(j) * psi.values()[j].norm_sqr()).collect();
    pairwise_sum(&num) / pairwise_sum(&den)
}

/// Width `s` of `|ψ|² ∝ exp(-(x-c)²/s²)`, i.e. `sqrt(2 Var x)`.
pub fn measured_width(psi: &StateFunction) -> f64 {
    let g = psi.grid();
    let c = measured_center(psi);
    let num: Vec<f64> = (0..g.len()).map(|j| g.weight(j) * (g.point(j)[0] - c).powi(2) * psi.values()[j].norm_sqr()).collect();
    let den: Vec<f64> = (0..g.len()).map(|j| g.weight(j) * psi.values()[j].norm_sqr()).collect();
    (2.0 * pairwise_sum(&num) / pairwise_sum(&den)).sqrt()
}

/// Amplitude and continuous phase of a sampled state.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarState {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

impl PolarState {
    /// Phase unwrapped outward from the amplitude peak.
    pub fn from_state(psi: &StateFunction) -> Self {
        let v = psi.values();
        let r: Vec<f64> = v.iter().map(|z| z.norm()).collect();
        let raw: Vec<f64> = v.iter().map(|z| z.arg()).collect();
        let peak = (0..r.len()).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap_or(0);
        let mut theta = raw.clone();
        for j in peak + 1..raw.len() {
            theta[j] = theta[j - 1] + wrap(raw[j] - raw[j - 1]);
        }
        for j in (0..peak).rev() {
            theta[j] = theta[j + 1] + wrap(raw[j] - raw[j + 1]);
        }
        PolarState { r, theta }
    }

    pub fn to_values(&self) -> Vec<Complex64> {
        self.r.iter().zip(&self.theta).map(|(&r, &t)| Complex64::from_polar(r, t)).collect()
    }

    pub fn peak(&self) -> usize {
        (0..self.r.len()).max_by(|&a, &b| self.r[a].total_cmp(&self.r[b])).unwrap_or(0)
    }
}

fn wrap(d: f64) -> f64 {
    d - 2.0 * PI * (d / (2.0 * PI)).round()
}

/// Fails if the amplitude vanishes, or the phase jumps by more than `π/2`
/// between neighbours, inside the support (samples above `1e-3·max r`).
fn check_polar(values: &[Complex64]) -> Result<()> {
    let r: Vec<f64> = values.iter().map(|z| z.norm()).collect();
    let max = r.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::PolarDecomposition("amplitude vanishes identically".into()));
    }
    let first = r.iter().position(|&x| x >= 1e-3 * max).unwrap_or(0);
    let last = r.iter().rposition(|&x| x >= 1e-3 * max).unwrap_or(0);
    if let Some(j) = (first..=last).find(|&j| r[j] < 1e-8 * max) {
        return Err(Error::PolarDecomposition(format!("amplitude vanishes at sample {j} inside the support")));
    }
    if let Some(j) = (first..last).find(|&j| (values[j + 1] * values[j].conj()).arg().abs() > 0.5 * PI) {
        return Err(Error::PolarDecomposition(format!("phase jumps between samples {j} and {} (node or unresolved phase)", j + 1)));
    }
    Ok(())
}

/// Five frames spaced `dt` apart, centred at `time`.
#[derive(Clone, Debug)]
pub struct ShadowWindow {
    pub time: f64,
    pub dt: f64,
    pub frames: [StateFunction; 5],
}

/// Time step between closed-form frames used for shadow derivatives.
pub const SHADOW_DT: f64 = 1e-2;

impl ShadowWindow {
    pub fn closed_form(p: &PacketParams, t: f64, dt: f64, grid: &GridSpec) -> Result<Self> {
        let frames = [-2.0, -1.0, 0.0, 1.0, 2.0].map(|k| packet_closed_form(p, t + k * dt, grid));
        let [a, b, c, d, e] = frames;
        Ok(ShadowWindow {
            time: t,
            dt,
            frames: [a?, b?, c?, d?, e?],
        })
    }

    pub fn center(&self) -> &StateFunction {
        &self.frames[2]
    }

    /// Every frame multiplied by the same phase `exp(iθ(x))`.
    pub fn with_phase(&self, theta: impl Fn(f64) -> f64) -> Result<Self> {
        let mut frames = self.frames.clone();
        for f in frames.iter_mut() {
            *f = f.map(|p, z| z * Complex64::from_polar(1.0, theta(p[0])))?;
        }
        Ok(ShadowWindow {
            time: self.time,
            dt: self.dt,
            frames,
        })
    }

    fn amplitudes(&self) -> [Vec<f64>; 5] {
        std::array::from_fn(|k| self.frames[k].values().iter().map(|z| z.norm()).collect())
    }
}

fn rate(samples: &[Vec<f64>; 5], weights: &[f64; 5], scale: f64) -> Vec<f64> {
    let n = samples[2].len();
    (0..n)
        .map(|j| (0..5).map(|k| weights[k] * samples[k][j]).sum::<f64>() / scale)
        .collect()
}

fn real_inner(grid: &GridSpec, a: &[f64], b: &[f64]) -> f64 {
    let terms: Vec<f64> = (0..a.len()).map(|j| grid.weight(j) * a[j] * b[j]).collect();
    pairwise_sum(&terms)
}

/// `(dr, -dr/dx) / ‖dr/dx‖²` for a time derivative `dr` of the amplitude.
fn manifold_component(grid: &GridSpec, values: &[Complex64], r: &[f64], dr: &[f64]) -> Result<f64> {
    check_polar(values)?;
    let h = grid.spacing(0);
    let minus_rx: Vec<f64> = d1_4(r, h).into_iter().map(|x| -x).collect();
    let norm2 = real_inner(grid, &minus_rx, &minus_rx);
    Ok(real_inner(grid, dr, &minus_rx) / norm2)
}

/// Velocity of the shadow `r = |ψ|` along the Gaussian manifold at the
/// window centre, from 4th-order differences in time.
pub fn shadow_velocity(w: &ShadowWindow) -> Result<f64> {
    let r = w.amplitudes();
    let dr = rate(&r, &FIVE_POINT_D1, w.dt);
    manifold_component(w.center().grid(), w.center().values(), &r[2], &dr)
}

/// Acceleration of the shadow, `(d²r/dt², -dr/dx) / ‖dr/dx‖²`.
pub fn shadow_acceleration(w: &ShadowWindow) -> Result<f64> {
    let r = w.amplitudes();
    let ddr = rate(&r, &FIVE_POINT_D2, w.dt * w.dt);
    manifold_component(w.center().grid(), w.center().values(), &r[2], &ddr)
}

/// Shadow velocity computed from a tangent vector `v` at `ψ` instead of
/// time differences: `dr = Re(e^{-iθ} v)`.
pub fn shadow_velocity_from_tangent(psi: &StateFunction, v: &StateFunction) -> Result<f64> {
    let r: Vec<f64> = psi.values().iter().map(|z| z.norm()).collect();
    let dr: Vec<f64> = psi
        .values()
        .iter()
        .zip(v.values())
        .map(|(z, dv)| if z.norm() > 0.0 { (z.conj() * dv).re / z.norm() } else { 0.0 })
        .collect();
    manifold_component(psi.grid(), psi.values(), &r, &dr)
}

/// Samples with `r` below this fraction of its maximum are excluded from
/// Madelung residuals.
pub const MADELUNG_MASK: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MadelungResiduals {
    pub continuity: f64,
    pub hamilton_jacobi: f64,
}

/// Max-norm residuals at the window centre of
/// `dr/dt = -(1/m) r_x θ_x - (r/2m) θ_xx` and
/// `dθ/dt = -(1/2m) θ_x² - V + r_xx/(2m r)`.
pub fn madelung_residuals(w: &ShadowWindow, mass: f64, potential: &Potential) -> Result<MadelungResiduals> {
    let grid = w.center().grid().clone();
    let h = grid.spacing(0);
    let polar: Vec<PolarState> = w.frames.iter().map(PolarState::from_state).collect();
    let centre = &polar[2];
    check_polar(w.center().values())?;
    let peak = centre.peak();
    // Align phase branches across frames at the amplitude peak.
    let theta: [Vec<f64>; 5] = std::array::from_fn(|k| {
        let shift = 2.0 * PI * ((centre.theta[peak] - polar[k].theta[peak]) / (2.0 * PI)).round();
        polar[k].theta.iter().map(|t| t + shift).collect()
    });
    let r: [Vec<f64>; 5] = std::array::from_fn(|k| polar[k].r.clone());
    let rt = rate(&r, &FIVE_POINT_D1, w.dt);
    let tt = rate(&theta, &FIVE_POINT_D1, w.dt);
    let (rc, tc) = (&r[2], &theta[2]);
    let (rx, rxx) = (d1_4(rc, h), d2_4(rc, h));
    let (tx, txx) = (d1_4(tc, h), d2_4(tc, h));
    let max = rc.iter().cloned().fold(0.0, f64::max);
    let mut out = MadelungResiduals {
        continuity: 0.0,
        hamilton_jacobi: 0.0,
    };
    for j in 2..rc.len().saturating_sub(2) {
        if rc[j] <= MADELUNG_MASK * max {
            continue;
        }
        let cont = rt[j] + rx[j] * tx[j] / mass + rc[j] * txx[j] / (2.0 * mass);
        let x = grid.point(j)[0];
        let hj = tt[j] + tx[j] * tx[j] / (2.0 * mass) + potential.value(x) - rxx[j] / (2.0 * mass * rc[j]);
        out.continuity = out.continuity.max(cont.abs());
        out.hamilton_jacobi = out.hamilton_jacobi.max(hj.abs());
    }
    Ok(out)
}

/// Packet after a width-reset collapse at `t1`: the state at `t1` is the
/// Schrödinger evolution from `t = 0` of `initial`, whose width `σ̃`
/// spreads back to the original `σ` exactly at `t1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapsedPacket {
    pub sigma_tilde: f64,
    pub t1: f64,
    pub initial: PacketParams,
    pub center: f64,
    pub velocity: f64,
}

impl CollapsedPacket {
    pub fn state(&self, grid: &GridSpec) -> Result<StateFunction> {
        packet_closed_form(&self.initial, self.t1, grid)
    }

    pub fn width(&self) -> f64 {
        self.initial.width(self.t1)
    }

    pub fn window(&self, dt: f64, grid: &GridSpec) -> Result<ShadowWindow> {
        ShadowWindow::closed_form(&self.initial, self.t1, dt, grid)
    }
}

/// Solves `σ̃² + t₁²/(m²σ̃²) = σ²` on the branch with `σ̃(0) = σ`.
pub fn collapse_width_reset(p: &PacketParams, t1: f64) -> Result<CollapsedPacket> {
    p.validate()?;
    if !(t1 >= 0.0 && t1.is_finite()) {
        return Err(domain(format!("collapse time must be nonnegative, got {t1}")));
    }
    let s2 = p.sigma * p.sigma;
    let disc = s2 * s2 - 4.0 * (t1 / p.m).powi(2);
    if disc < 0.0 {
        return Err(Error::NoRealRoot(format!(
            "collapse interval {t1} exceeds mσ²/2 = {}",
            0.5 * p.m * s2
        )));
    }
    let sigma_tilde = (0.5 * (s2 + disc.sqrt())).sqrt();
    Ok(CollapsedPacket {
        sigma_tilde,
        t1,
        initial: PacketParams { sigma: sigma_tilde, ..*p },
        center: p.center(t1),
        velocity: p.velocity(t1),
    })
}

/// `(dr/dσ, dr/dx)` for the unit Gaussian `δ̃_a` of width `σ`.
pub fn collapse_motion_overlap(a: f64, sigma: f64, grid: &GridSpec) -> Result<f64> {
    grid.check_inside(&[a], TILDE_DELTA_MARGIN * sigma)?;
    let r = |x: f64| (PI * sigma * sigma).powf(-0.25) * (-(x - a).powi(2) / (2.0 * sigma * sigma)).exp();
    let xs = grid.axis(0).coords();
    let dr_ds: Vec<f64> = xs
        .iter()
        .map(|&x| r(x) * (-0.5 / sigma + (x - a).powi(2) / sigma.powi(3)))
        .collect();
    let rs: Vec<f64> = xs.iter().map(|&x| r(x)).collect();
    let dr_dx = d1_4(&rs, grid.spacing(0));
    Ok(real_inner(grid, &dr_ds, &dr_dx))
}

/// Writes `x, re, im, r, theta` rows of one frame.
pub fn write_frame_csv(mut out: impl Write, psi: &StateFunction) -> std::io::Result<()> {
    let polar = PolarState::from_state(psi);
    writeln!(out, "x,re,im,r,theta")?;
    for (j, z) in psi.values().iter().enumerate() {
        let x = psi.grid().point(j)[0];
        writeln!(out, "{x},{},{},{},{}", z.re, z.im, polar.r[j], polar.theta[j])?;
    }
    Ok(())
}

/// Samples in time on a space-time grid made by [`theorem1_grid`].
pub const THEOREM1_TIME_SAMPLES: usize = 401;
/// Half-length of the time axis, in widths `ε`.
pub const THEOREM1_HALF_WINDOW: f64 = 10.0;

/// Space-time grid `space × [τ - 10ε, τ + 10ε]`.
pub fn theorem1_grid(space: Axis, tau: f64, eps: f64) -> Result<GridSpec> {
    let half = THEOREM1_HALF_WINDOW * eps;
    GridSpec::plane(space, Axis::new(tau - half, tau + half, THEOREM1_TIME_SAMPLES)?)
}

/// `‖dφ_τ/dτ - (-∂_t - iĥ)φ_τ‖` over the space-time grid, with
/// `φ_τ(x, t) = ψ(x, t)·δ̃(t - τ)` and `δ̃` the unit Gaussian of width `eps`
/// in `t`. `∂_t` is a 4th-order difference, `ĥ` the 3-point Laplacian
/// plus `V`, and `dφ_τ/dτ` is exact.
pub fn theorem1_residual(psi: &StateFunction, tau: f64, eps: f64, mass: f64, potential: &Potential) -> Result<f64> {
    let grid = psi.grid();
    if grid.dim() != 2 {
        return Err(Error::Shape("the path residual needs a space × time grid".into()));
    }
    if !(eps > 0.0 && mass > 0.0) {
        return Err(domain("eps and mass must be positive"));
    }
    let time = grid.axis(1);
    let margin = TILDE_DELTA_MARGIN * eps;
    if tau - margin < time.lo || tau + margin > time.hi {
        return Err(domain(format!(
            "τ = {tau} needs {margin} of time margin inside [{}, {}]",
            time.lo, time.hi
        )));
    }
    let (nx, nt) = (grid.axis(0).n, time.n);
    let (hx, ht) = (grid.spacing(0), grid.spacing(1));
    let norm = (PI * eps * eps).powf(-0.25);
    let delta: Vec<f64> = (0..nt).map(|j| norm * (-(time.coord(j) - tau).powi(2) / (2.0 * eps * eps)).exp()).collect();
    let ddelta_dtau: Vec<f64> = (0..nt).map(|j| delta[j] * (time.coord(j) - tau) / (eps * eps)).collect();
    let v = psi.values();
    let phi: Vec<Complex64> = (0..nx * nt).map(|idx| v[idx] * delta[idx % nt]).collect();
    let c = -0.5 / (mass * hx * hx);
    let mut terms = vec![0.0; nx * nt];
    for i in 0..nx {
        let row = &phi[i * nt..(i + 1) * nt];
        let dt_row = d1_4c(row, ht);
        let x = grid.axis(0).coord(i);
        let vx = potential.value(x);
        for j in 0..nt {
            let at = |ii: isize| -> Complex64 {
                if ii < 0 || ii as usize >= nx {
                    Complex64::new(0.0, 0.0)
                } else {
                    phi[ii as usize * nt + j]
                }
            };
            let hphi = c * (at(i as isize + 1) - 2.0 * phi[i * nt + j] + at(i as isize - 1)) + vx * phi[i * nt + j];
            let lhs = v[i * nt + j] * ddelta_dtau[j];
            let rhs = -dt_row[j] - I * hphi;
            terms[i * nt + j] = grid.weight(i * nt + j) * (lhs - rhs).norm_sqr();
        }
    }
    let total = pairwise_sum(&terms).sqrt();
    if !total.is_finite() {
        return Err(numeric("path residual is not finite"));
    }
    Ok(total)
}

/// Smallest `|t - s|` at which the free propagator is evaluated.
pub const PROPAGATOR_MIN_GAP: f64 = 0.1;
const PROPAGATOR_STEP: f64 = 1e-2;

fn check_gap(t: f64, s: f64) -> Result<()> {
    if !((t - s).abs() >= PROPAGATOR_MIN_GAP) {
        return Err(Error::Singularity(format!("|t - s| = {} is below {PROPAGATOR_MIN_GAP}", (t - s).abs())));
    }
    Ok(())
}

fn kernel(m: f64, x: f64, t: f64, y: f64, s: f64) -> Complex64 {
    let dt = t - s;
    let pref = (Complex64::new(m, 0.0) / (2.0 * PI * I * dt)).sqrt();
    pref * Complex64::from_polar(1.0, m * (x - y).powi(2) / (2.0 * dt))
}

/// Free propagator `g(x,t;y,s) = (m/2πi(t-s))^{1/2} exp(im(x-y)²/2(t-s))`.
pub fn free_propagator(m: f64, x: f64, t: f64, y: f64, s: f64) -> Result<Complex64> {
    check_gap(t, s)?;
    Ok(kernel(m, x, t, y, s))
}

/// `(-∂_t - iĥ_x) g` with `ĥ_x = -(1/2m) ∂²_x`, by 4th-order differences.
pub fn propagator_residual(m: f64, x: f64, t: f64, y: f64, s: f64) -> Result<Complex64> {
    check_gap(t, s)?;
    let h = PROPAGATOR_STEP;
    let (mut gt, mut gxx) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for k in 0..5 {
        let d = (k as f64 - 2.0) * h;
        gt += kernel(m, x, t + d, y, s) * FIVE_POINT_D1[k];
        gxx += kernel(m, x + d, t, y, s) * FIVE_POINT_D2[k];
    }
    gt /= h;
    gxx /= h * h;
    Ok(-gt + I * gxx / (2.0 * m))
}

/// `(∫ g(x,t;z,u) g(z,u;y,s) dz, g(x,t;y,s))` for `s < u < t`. The integral
/// uses the trapezoid rule under the window `exp(-((z - z*)/Z)^8)` centred at
/// the stationary point `z*`.
pub fn propagator_group_check(m: f64, x: f64, t: f64, u: f64, y: f64, s: f64) -> Result<(Complex64, Complex64)> {
    if !(s < u && u < t) {
        return Err(domain("group property needs s < u < t"));
    }
    check_gap(t, u)?;
    check_gap(u, s)?;
    let centre = (x * (u - s) + y * (t - u)) / (t - s);
    let width = 15.0 + (x - y).abs();
    let half = 1.8 * width;
    let fmax = m * 2.0 * half * (1.0 / (t - u) + 1.0 / (u - s));
    let n = ((2.0 * half) / (2.0 * PI / (12.0 * fmax))).ceil() as usize + 1;
    let dz = 2.0 * half / (n - 1) as f64;
    let terms: Vec<Complex64> = (0..n)
        .map(|k| {
            let z = centre - half + k as f64 * dz;
            let win = (-((z - centre) / width).powi(8)).exp();
            let wt = if k == 0 || k == n - 1 { 0.5 * dz } else { dz };
            kernel(m, x, t, z, u) * kernel(m, z, u, y, s) * (win * wt)
        })
        .collect();
    Ok((pairwise_sum(&terms), kernel(m, x, t, y, s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{perp, Ket, ObservableOp};
    use crate::grid::{inner_l2, make_tilde_delta};
    use proptest::prelude::*;

    fn packet(v0: f64, w: f64) -> PacketParams {
        PacketParams::new(1.0, 1.0, 0.0, v0, w).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let g = default_grid();
        let p = packet(1.0, 0.5);
        let psi0 = packet_closed_form(&p, 0.0, &g).unwrap();
        let tilde = make_tilde_delta(&[0.0], 1.0, &g).unwrap();
        let phased = tilde.map(|q, z| z * Complex64::from_polar(1.0, q[0])).unwrap();
        assert!(psi0.sub(&phased).unwrap().norm() < 1e-12);
        assert!((p.center(1.0) - 1.25).abs() < 1e-15);
        let psi1 = packet_closed_form(&p, 1.0, &g).unwrap();
        assert!((psi1.norm() - 1.0).abs() < 1e-8);
        assert!((measured_center(&psi1) - 1.25).abs() < 1e-8);
        let free = packet(0.0, 0.0);
        assert!((free.width(1.0).powi(2) - 2.0).abs() < 1e-15);
        let spread = packet_closed_form(&free, 1.0, &g).unwrap();
        assert!((measured_width(&spread).powi(2) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn closed_form_rejects_edge_packets() {
        let g = GridSpec::line(-5.0, 5.0, 512).unwrap();
        assert!(matches!(packet_closed_form(&packet(0.0, 0.0), 3.0, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn crank_nicolson_tracks_closed_form() {
        let g = default_grid();
        for (v0, w) in [(0.0, 0.0), (2.0, 0.5), (-1.0, -1.0)] {
            let p = packet(v0, w);
            let traj = crank_nicolson_evolve(&packet_closed_form(&p, 0.0, &g).unwrap(), 1.0, &p.potential(), (0.0, 0.5), DEFAULT_DT).unwrap();
            let mut worst: f64 = 0.0;
            for (t, f) in traj.times.iter().zip(&traj.frames).step_by(50) {
                let exact = packet_closed_form(&p, *t, &g).unwrap();
                let sup = f.values().iter().zip(exact.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                worst = worst.max(sup);
                assert!((f.norm() - 1.0).abs() < 1e-8);
            }
            assert!(worst < 1e-3, "({v0}, {w}): {worst}");
            let last = traj.frames.last().unwrap();
            assert!((measured_center(last) - p.center(0.5)).abs() < 1e-3);
            assert!((measured_width(last) - p.width(0.5)).abs() < 1e-3);
        }
    }

    #[test]
    fn crank_nicolson_is_reversible() {
        let g = default_grid();
        let psi = packet_closed_form(&packet(1.0, 0.0), 0.0, &g).unwrap();
        for lap in [Laplacian::ThreePoint, Laplacian::FivePoint] {
            let cn = CrankNicolson::with_laplacian(&g, 1.0, &Potential::Harmonic { stiffness: 0.1 }, DEFAULT_DT, lap).unwrap();
            let fwd = cn.step(&psi).unwrap();
            assert!((fwd.norm() - 1.0).abs() < 1e-12);
            let back = cn.step_back(&fwd).unwrap();
            assert!(back.sub(&psi).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn oscillator_ground_state_is_stationary() {
        let g = GridSpec::line(-10.0, 10.0, 1024).unwrap();
        let v = Potential::Harmonic { stiffness: 1.0 };
        let psi = discrete_ground_state(&g, 1.0, &v, Laplacian::FivePoint).unwrap();
        let traj = crank_nicolson_evolve(&psi, 1.0, &v, (0.0, 1.0), 1e-3).unwrap();
        let drift = traj
            .frames
            .iter()
            .flat_map(|f| f.values().iter().zip(psi.values()).map(|(a, b)| (a.norm() - b.norm()).abs()))
            .fold(0.0, f64::max);
        assert!(drift < 1e-6, "{drift}");
        let m = madelung_residuals(&traj.window(500).unwrap(), 1.0, &v).unwrap();
        assert!(m.continuity < 1e-6, "{m:?}");
    }

    #[test]
    fn crank_nicolson_reports_blow_up() {
        let g = GridSpec::line(-10.0, 10.0, 256).unwrap();
        let psi = make_tilde_delta(&[0.0], 1.0, &g).unwrap();
        let v = Potential::custom(|x| if x > 0.0 { f64::NAN } else { 0.0 });
        assert!(matches!(CrankNicolson::new(&g, 1.0, &v, 1e-3), Err(Error::Domain(_))));
        let _ = psi;
    }

    #[test]
    fn shadow_kinematics_follow_the_packet() {
        // The component along -dr/dx is +dc/dt for r = |ψ|; see the ledger on sign.
        let g = default_grid();
        for (v0, w) in [(2.0, 0.0), (0.0, 0.0), (1.0, 0.5), (0.5, -1.0)] {
            let win = ShadowWindow::closed_form(&packet(v0, w), 0.0, SHADOW_DT, &g).unwrap();
            assert!((shadow_velocity(&win).unwrap() - v0).abs() < 1e-4);
            assert!((shadow_acceleration(&win).unwrap() - w).abs() < 1e-3);
        }
    }

    #[test]
    fn shadow_is_constant_along_the_fibre() {
        let g = default_grid();
        let win = ShadowWindow::closed_form(&packet(1.5, 0.3), 0.0, SHADOW_DT, &g).unwrap();
        let phased = win.with_phase(|x| 0.7 + 0.3 * x.sin() + 0.05 * x * x).unwrap();
        assert!((shadow_velocity(&win).unwrap() - shadow_velocity(&phased).unwrap()).abs() < 1e-10);
        assert!((shadow_acceleration(&win).unwrap() - shadow_acceleration(&phased).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn shadow_velocity_comes_from_orthogonal_component() {
        let g = default_grid();
        let p = packet(2.0, 0.4);
        let psi = packet_closed_form(&p, 0.0, &g).unwrap();
        let h = ObservableOp::Hamiltonian { mass: 1.0, potential: p.potential() };
        let ket = Ket::Grid(psi.clone());
        let full = h.apply(&ket).unwrap().scale(-I);
        let orth = perp(&h, &ket).unwrap().scale(-I);
        let a = shadow_velocity_from_tangent(&psi, full.as_grid().unwrap()).unwrap();
        let b = shadow_velocity_from_tangent(&psi, orth.as_grid().unwrap()).unwrap();
        assert!((a - b).abs() < 1e-8);
        assert!((a - 2.0).abs() < 1e-3);
    }

    #[test]
    fn shadow_rejects_nodes() {
        let g = default_grid();
        let win = ShadowWindow::closed_form(&packet(0.0, 0.0), 0.0, SHADOW_DT, &g).unwrap();
        let node = win.with_phase(|_| 0.0).unwrap();
        let mut frames = node.frames.clone();
        for f in frames.iter_mut() {
            *f = f.map(|q, z| z * q[0]).unwrap();
        }
        let odd = ShadowWindow { frames, ..node };
        assert!(matches!(shadow_velocity(&odd), Err(Error::PolarDecomposition(_))));
    }

    #[test]
    fn collapse_examples() {
        let p = packet(1.0, 0.5);
        let c = collapse_width_reset(&p, 0.3).unwrap();
        assert!((c.sigma_tilde.powi(2) - 0.9).abs() < 1e-12);
        assert!((c.width() - 1.0).abs() < 1e-10);
        assert!((c.center - p.center(0.3)).abs() < 1e-15);
        assert!((c.velocity - 1.15).abs() < 1e-15);
        assert_eq!(collapse_width_reset(&p, 0.0).unwrap().sigma_tilde, 1.0);
        assert!(matches!(collapse_width_reset(&p, 0.6), Err(Error::NoRealRoot(_))));
        let g = default_grid();
        let state = c.state(&g).unwrap();
        assert!((measured_width(&state) - 1.0).abs() < 1e-8);
        let v = shadow_velocity(&c.window(SHADOW_DT, &g).unwrap()).unwrap();
        assert!((v - c.velocity).abs() < 1e-3);
    }

    #[test]
    fn width_and_motion_directions_are_orthogonal() {
        let g = default_grid();
        for (a, s) in [(0.0, 1.0), (1.3, 0.7), (-4.1, 2.0)] {
            assert!(collapse_motion_overlap(a, s, &g).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn polar_round_trip() {
        let g = default_grid();
        let psi = packet_closed_form(&packet(3.0, 1.0), 0.7, &g).unwrap();
        let polar = PolarState::from_state(&psi);
        for (z, back) in psi.values().iter().zip(polar.to_values()) {
            if z.norm() > 1e-8 {
                assert!((z - back).norm() < 1e-10);
            }
        }
        let th = &polar.theta;
        let peak = polar.peak();
        assert!((peak..th.len() - 1).filter(|&j| polar.r[j] > 1e-6).all(|j| (th[j + 1] - th[j]).abs() < PI));
    }

    #[test]
    fn madelung_on_closed_form_and_numeric_solutions() {
        let g = default_grid();
        let p = packet(1.0, 0.0);
        let win = ShadowWindow::closed_form(&p, 0.2, 1e-3, &g).unwrap();
        let m = madelung_residuals(&win, 1.0, &Potential::Zero).unwrap();
        assert!(m.continuity < 1e-3 && m.hamilton_jacobi < 1e-3, "{m:?}");

        let corrupted = win.with_phase(|x| 0.1 * x * x).unwrap();
        let m = madelung_residuals(&corrupted, 1.0, &Potential::Zero).unwrap();
        assert!(m.hamilton_jacobi > 1e-1, "{m:?}");

        let p = packet(1.0, 0.5);
        let traj = crank_nicolson_evolve(&packet_closed_form(&p, 0.0, &g).unwrap(), 1.0, &p.potential(), (0.0, 0.5), DEFAULT_DT).unwrap();
        let m = madelung_residuals(&traj.window(500).unwrap(), 1.0, &p.potential()).unwrap();
        assert!(m.continuity < 1e-3 && m.hamilton_jacobi < 1e-3, "{m:?}");
    }

    fn theorem1_on(n: usize, eps: f64, frozen: bool) -> f64 {
        let p = packet(1.0, 0.0);
        let tau = 0.5;
        let g = theorem1_grid(Axis::new(DEFAULT_LO, DEFAULT_HI, n).unwrap(), tau, eps).unwrap();
        let psi = StateFunction::from_fn(&g, |q| p.value(q[0], if frozen { 0.0 } else { q[1] })).unwrap();
        theorem1_residual(&psi, tau, eps, 1.0, &Potential::Zero).unwrap()
    }

    #[test]
    fn theorem1_separates_solutions() {
        let solution = theorem1_on(DEFAULT_N, 0.05, false);
        assert!(solution < 1e-2, "{solution}");
        assert!(theorem1_on(DEFAULT_N, 0.05, true) > 1e-1);
        let coarse = theorem1_on(512, 0.2, false);
        let mid = theorem1_on(1024, 0.1, false);
        assert!(coarse > mid && mid > solution, "{coarse} {mid} {solution}");
    }

    #[test]
    fn theorem1_needs_time_margin() {
        let g = theorem1_grid(Axis::new(-10.0, 10.0, 64).unwrap(), 0.0, 0.05).unwrap();
        let psi = StateFunction::zeros(&g);
        assert!(matches!(theorem1_residual(&psi, 0.4, 0.05, 1.0, &Potential::Zero), Err(Error::Domain(_))));
    }

    #[test]
    fn propagator_examples() {
        let g = free_propagator(1.0, 0.5, 1.0, 0.0, 0.0).unwrap();
        let r = propagator_residual(1.0, 0.5, 1.0, 0.0, 0.0).unwrap();
        assert!(r.norm() / g.norm() < 1e-3);
        assert_eq!(free_propagator(1.0, 0.3, 1.0, -0.8, 0.2).unwrap(), free_propagator(1.0, -0.8, 1.0, 0.3, 0.2).unwrap());
        assert!(matches!(free_propagator(1.0, 0.0, 0.05, 0.0, 0.0), Err(Error::Singularity(_))));
        let (q, d) = propagator_group_check(1.0, 0.4, 1.0, 0.5, -0.2, 0.0).unwrap();
        assert!((q - d).norm() < 1e-3 * d.norm(), "{q} {d}");
    }

    #[test]
    fn closed_form_is_normalized_over_time() {
        let g = default_grid();
        let p = packet(0.5, -0.5);
        for t in [0.0, 0.5, 1.0, 2.0] {
            let f = packet_closed_form(&p, t, &g).unwrap();
            assert!((inner_l2(&f, &f).unwrap().re - 1.0).abs() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn fibre_invariance_under_random_phases(a in -1.0f64..1.0, b in -0.3f64..0.3, k in 0.1f64..2.0, v0 in -2.0f64..2.0) {
            let g = default_grid();
            let win = ShadowWindow::closed_form(&packet(v0, 0.0), 0.0, SHADOW_DT, &g).unwrap();
            let phased = win.with_phase(|x| a * (k * x).sin() + b * x * x).unwrap();
            prop_assert!((shadow_velocity(&win).unwrap() - shadow_velocity(&phased).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn propagator_solves_free_equation(x in -1.0f64..1.0, y in -1.0f64..1.0, gap in 0.5f64..3.0) {
            let g = free_propagator(1.0, x, gap, y, 0.0).unwrap();
            let r = propagator_residual(1.0, x, gap, y, 0.0).unwrap();
            prop_assert!(r.norm() < 1e-3 * g.norm());
        }
    }
}
