//! Observables as vector fields `φ ↦ -iÂφ` on the sphere of states, the
//! real metric `G(X, Y) = Re(X, Y)`, Fubini–Study distances, uncertainty
//! relations and the projective kinematics of Schrödinger evolution.
//!
//! Products follow `(u, v) = Σ u conj(v)`, so the expectation
//! `⟨φ|Â|φ⟩ = (Âφ, φ)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::{inner_l2, StateFunction};
use crate::packet::CrankNicolson;
use crate::potential::Potential;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// A state either sampled on a 1-D grid or given by finite-dimensional amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub enum Ket {
    Grid(StateFunction),
    Finite(DVector<Complex64>),
}

impl From<StateFunction> for Ket {
    fn from(f: StateFunction) -> Self {
        Ket::Grid(f)
    }
}

impl From<DVector<Complex64>> for Ket {
    fn from(v: DVector<Complex64>) -> Self {
        Ket::Finite(v)
    }
}

impl Ket {
    /// `(self, other) = Σ self · conj(other)`
    pub fn inner(&self, other: &Ket) -> Result<Complex64> {
        match (self, other) {
            (Ket::Grid(a), Ket::Grid(b)) => inner_l2(a, b),
            (Ket::Finite(a), Ket::Finite(b)) if a.len() == b.len() => Ok(b.dotc(a)),
            _ => Err(Error::Shape("kets of different kinds or sizes".into())),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Ket::Grid(f) => f.norm(),
            Ket::Finite(v) => v.norm(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Ket {
        match self {
            Ket::Grid(f) => Ket::Grid(f.scale(c)),
            Ket::Finite(v) => Ket::Finite(v * c),
        }
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: Complex64, other: &Ket, b: Complex64) -> Result<Ket> {
        match (self, other) {
            (Ket::Grid(f), Ket::Grid(g)) => Ok(Ket::Grid(f.combine(a, g, b)?)),
            (Ket::Finite(u), Ket::Finite(v)) if u.len() == v.len() => Ok(Ket::Finite(u * a + v * b)),
            _ => Err(Error::Shape("kets of different kinds or sizes".into())),
        }
    }

    pub fn sub(&self, other: &Ket) -> Result<Ket> {
        self.combine(ONE, other, -ONE)
    }

    pub fn normalized(&self) -> Result<Ket> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::Normalization { norm: n });
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn as_grid(&self) -> Option<&StateFunction> {
        match self {
            Ket::Grid(f) => Some(f),
            Ket::Finite(_) => None,
        }
    }
}

/// Tolerance on `‖φ‖ = 1` for operations that require unit states.
pub const UNIT_TOL: f64 = 1e-8;

fn require_unit(phi: &Ket) -> Result<()> {
    let n = phi.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Normalization { norm: n });
    }
    Ok(())
}

/// Self-adjoint operators acting on [`Ket`]s.
///
/// Grid operators use Dirichlet (zero) extension beyond the grid: momentum
/// is the centred difference `-i(φ_{j+1} - φ_{j-1})/2h` and the kinetic term
/// the 3-point Laplacian.
#[derive(Clone, Debug)]
pub enum ObservableOp {
    Identity,
    Position,
    Momentum,
    /// `-(1/2m) d²/dx² + V(x)`
    Hamiltonian { mass: f64, potential: Potential },
    Matrix(DMatrix<Complex64>),
}

impl ObservableOp {
    pub fn free(mass: f64) -> Self {
        ObservableOp::Hamiltonian {
            mass,
            potential: Potential::Zero,
        }
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        match (self, ket) {
            (ObservableOp::Identity, k) => Ok(k.clone()),
            (ObservableOp::Matrix(m), Ket::Finite(v)) => {
                if m.ncols() != v.len() || m.nrows() != v.len() {
                    return Err(Error::Shape(format!("{}×{} matrix on a {}-vector", m.nrows(), m.ncols(), v.len())));
                }
                Ok(Ket::Finite(m * v))
            }
            (ObservableOp::Position, Ket::Grid(f)) => Ok(Ket::Grid(grid_1d(f)?.map(|p, v| v * p[0])?)),
            (ObservableOp::Momentum, Ket::Grid(f)) => {
                let h = grid_1d(f)?.grid().spacing(0);
                let v = f.values();
                let out = (0..v.len())
                    .map(|j| -I * (at(v, j as isize + 1) - at(v, j as isize - 1)) / (2.0 * h))
                    .collect();
                Ok(Ket::Grid(f.with_values(out)?))
            }
            (ObservableOp::Hamiltonian { mass, potential }, Ket::Grid(f)) => {
                let g = grid_1d(f)?.grid();
                let h = g.spacing(0);
                let v = f.values();
                let c = -0.5 / (mass * h * h);
                let out = (0..v.len())
                    .map(|j| {
                        let lap = at(v, j as isize + 1) - 2.0 * v[j] + at(v, j as isize - 1);
                        c * lap + v[j] * potential.value(g.point(j)[0])
                    })
                    .collect();
                Ok(Ket::Grid(f.with_values(out)?))
            }
            (op, _) => Err(Error::Shape(format!("{op:?} cannot act on this kind of state"))),
        }
    }

    /// `Âφ` expectation `⟨φ|Â|φ⟩ = (Âφ, φ)`.
    pub fn expectation(&self, phi: &Ket) -> Result<Complex64> {
        self.apply(phi)?.inner(phi)
    }
}

fn at(v: &[Complex64], j: isize) -> Complex64 {
    if j < 0 || j as usize >= v.len() {
        Complex64::new(0.0, 0.0)
    } else {
        v[j as usize]
    }
}

fn grid_1d(f: &StateFunction) -> Result<&StateFunction> {
    if f.grid().dim() != 1 {
        return Err(Error::Shape("grid observables act on 1-D grids".into()));
    }
    Ok(f)
}

/// `[Â, B̂]φ`
pub fn commutator(a: &ObservableOp, b: &ObservableOp, phi: &Ket) -> Result<Ket> {
    let ab = a.apply(&b.apply(phi)?)?;
    let ba = b.apply(&a.apply(phi)?)?;
    ab.sub(&ba)
}

/// `{Â, B̂}φ`
pub fn anticommutator(a: &ObservableOp, b: &ObservableOp, phi: &Ket) -> Result<Ket> {
    let ab = a.apply(&b.apply(phi)?)?;
    let ba = b.apply(&a.apply(phi)?)?;
    ab.combine(ONE, &ba, ONE)
}

/// The vector field `φ ↦ -iÂφ`.
pub fn field(a: &ObservableOp, phi: &Ket) -> Result<Ket> {
    Ok(a.apply(phi)?.scale(-I))
}

/// Step of the central differences used for directional derivatives of fields.
pub const BRACKET_STEP: f64 = 1e-5;

/// Samples within this many grid steps of an edge must be negligible.
pub const EDGE_CELLS: usize = 5;

fn check_interior(phi: &Ket) -> Result<()> {
    if let Ket::Grid(f) = phi {
        let v = f.values();
        let peak = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let n = v.len();
        let edge = EDGE_CELLS.min(n / 2);
        let worst = v[..edge].iter().chain(&v[n - edge..]).fold(0.0f64, |m, z| m.max(z.norm()));
        if worst > 1e-10 * peak {
            return Err(domain(format!(
                "state reaches within {EDGE_CELLS} cells of the grid edge (edge amplitude {worst:e})"
            )));
        }
    }
    Ok(())
}

/// Lie bracket `[A_φ, B_φ]` of the fields `A_φ = -iÂφ`, `B_φ = -iB̂φ`,
/// computed from central differences of each field along the other, and
/// the commutator `[Â, B̂]φ` applied directly.
pub fn lie_bracket_check(a: &ObservableOp, b: &ObservableOp, phi: &Ket) -> Result<(Ket, Ket)> {
    require_unit(phi)?;
    check_interior(phi)?;
    let s = Complex64::new(BRACKET_STEP, 0.0);
    let derivative = |f: &ObservableOp, dir: &Ket| -> Result<Ket> {
        let fwd = field(f, &phi.combine(ONE, dir, s)?)?;
        let bwd = field(f, &phi.combine(ONE, dir, -s)?)?;
        fwd.combine(Complex64::new(0.5 / BRACKET_STEP, 0.0), &bwd, Complex64::new(-0.5 / BRACKET_STEP, 0.0))
    };
    let xa = field(a, phi)?;
    let xb = field(b, phi)?;
    let bracket = derivative(b, &xa)?.sub(&derivative(a, &xb)?)?;
    Ok((bracket, commutator(a, b, phi)?))
}

/// Split of a tangent vector `v` at `φ` in the real metric `G`:
/// `v = radial·φ + phase_parallel·(-iφ) + orthogonal`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentDecomposition {
    /// `Re(v, φ)`. The metric is real, so the radial part is a real multiple of `φ`.
    pub radial: f64,
    /// `Re(v, -iφ)`
    pub phase_parallel: f64,
    pub orthogonal: Ket,
}

impl TangentDecomposition {
    pub fn reconstruct(&self, phi: &Ket) -> Result<Ket> {
        let par = phi.combine(Complex64::new(self.radial, 0.0), phi, -I * self.phase_parallel)?;
        par.combine(ONE, &self.orthogonal, ONE)
    }
}

pub fn decompose(v: &Ket, phi: &Ket) -> Result<TangentDecomposition> {
    require_unit(phi)?;
    let radial = v.inner(phi)?.re;
    let iphi = phi.scale(-I);
    let phase_parallel = v.inner(&iphi)?.re;
    let orthogonal = v
        .combine(ONE, phi, Complex64::new(-radial, 0.0))?
        .combine(ONE, &iphi, Complex64::new(-phase_parallel, 0.0))?;
    Ok(TangentDecomposition {
        radial,
        phase_parallel,
        orthogonal,
    })
}

/// Decomposition of the Schrödinger velocity `-iĥφ`.
pub fn decompose_tangent(h: &ObservableOp, phi: &Ket) -> Result<TangentDecomposition> {
    decompose(&field(h, phi)?, phi)
}

/// `Â_⊥φ = Âφ - ⟨Â⟩φ`
pub fn perp(a: &ObservableOp, phi: &Ket) -> Result<Ket> {
    let mean = a.expectation(phi)?.re;
    a.apply(phi)?.combine(ONE, phi, Complex64::new(-mean, 0.0))
}

/// `ΔA` from moments, `sqrt((φ, Â²φ) - (φ, Âφ)²)`.
pub fn uncertainty(a: &ObservableOp, phi: &Ket) -> Result<f64> {
    let aphi = a.apply(phi)?;
    let mean = aphi.inner(phi)?.re;
    let second = a.apply(&aphi)?.inner(phi)?.re;
    Ok((second - mean * mean).max(0.0).sqrt())
}

/// Uncertainty of `ĥ²` from moments: `sqrt(⟨ĥ⁴⟩ - ⟨ĥ²⟩²)`.
pub fn uncertainty_of_square(h: &ObservableOp, phi: &Ket) -> Result<f64> {
    let h2 = h.apply(&h.apply(phi)?)?;
    let mean = h2.inner(phi)?.re;
    let fourth = h.apply(&h.apply(&h2)?)?.inner(phi)?.re;
    Ok((fourth - mean * mean).max(0.0).sqrt())
}

/// `‖-iĥ_⊥φ‖`, the speed of the projected evolution.
pub fn projective_speed(h: &ObservableOp, phi: &Ket) -> Result<f64> {
    require_unit(phi)?;
    Ok(perp(h, phi)?.norm())
}

/// `‖-ĥ²_⊥φ‖`, the tangential acceleration of the evolution.
pub fn projective_accel(h: &ObservableOp, phi: &Ket) -> Result<f64> {
    require_unit(phi)?;
    let h2 = h.apply(&h.apply(phi)?)?;
    let mean = h2.inner(phi)?.re;
    Ok(h2.combine(ONE, phi, Complex64::new(-mean, 0.0))?.norm())
}

/// `Re(-iφ, -ĥ²φ)`, the phase-parallel part of the acceleration.
pub fn parallel_acceleration(h: &ObservableOp, phi: &Ket) -> Result<f64> {
    let acc = h.apply(&h.apply(phi)?)?.scale(-ONE);
    Ok(phi.scale(-I).inner(&acc)?.re)
}

/// Fubini–Study distance `arccos|(φ, ψ)|`, evaluated for unit states as
/// `atan2(‖ψ - (ψ,φ)φ‖, |(ψ,φ)|)`, which stays accurate for nearby states.
pub fn fubini_study_distance(phi: &Ket, psi: &Ket) -> Result<f64> {
    require_unit(phi)?;
    require_unit(psi)?;
    let overlap = psi.inner(phi)?;
    let rest = psi.combine(ONE, phi, -overlap)?.norm();
    Ok(rest.atan2(overlap.norm()).clamp(0.0, std::f64::consts::FRAC_PI_2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub delta_a: f64,
    pub delta_b: f64,
    /// `½|(φ, [Â, B̂]φ)|`
    pub bound: f64,
    /// Area of the parallelogram spanned by `X = -iÂ_⊥φ`, `Y = -iB̂_⊥φ` in `G`.
    pub area: f64,
    /// `G(X, Y)`
    pub g: f64,
    /// `|ΔA²ΔB² - area² - G²|`
    pub identity_gap: f64,
}

pub fn uncertainty_report(a: &ObservableOp, b: &ObservableOp, phi: &Ket) -> Result<UncertaintyReport> {
    require_unit(phi)?;
    let x = perp(a, phi)?.scale(-I);
    let y = perp(b, phi)?.scale(-I);
    let delta_a = uncertainty(a, phi)?;
    let delta_b = uncertainty(b, phi)?;
    let g = x.inner(&y)?.re;
    let xx = x.inner(&x)?.re;
    // Height of Y over X by Gram–Schmidt in the real metric.
    let area = if xx > 0.0 {
        let height = y.combine(ONE, &x, Complex64::new(-g / xx, 0.0))?.norm();
        xx.sqrt() * height
    } else {
        0.0
    };
    let bound = 0.5 * commutator(a, b, phi)?.inner(phi)?.norm();
    let lhs = delta_a * delta_a * delta_b * delta_b;
    let identity_gap = (lhs - area * area - g * g).abs();
    Ok(UncertaintyReport {
        delta_a,
        delta_b,
        bound,
        area,
        g,
        identity_gap,
    })
}

/// `(lhs, rhs)` of `2(dφ/dt, -iÂφ) = (φ, {Â,ĥ}φ) - (φ, [Â,ĥ]φ)` with `dφ/dt = -iĥφ`.
pub fn projection_identity(a: &ObservableOp, h: &ObservableOp, phi: &Ket) -> Result<(Complex64, Complex64)> {
    require_unit(phi)?;
    let lhs = field(h, phi)?.inner(&field(a, phi)?)? * 2.0;
    let rhs = phi.inner(&anticommutator(a, h, phi)?)? - phi.inner(&commutator(a, h, phi)?)?;
    Ok((lhs, rhs))
}

/// One-step propagator for [`ehrenfest_check`] and the finite-difference
/// Fubini–Study speed: Crank–Nicolson on grids, the exact exponential for
/// matrices.
pub enum Propagator {
    Grid(CrankNicolson),
    Finite(DMatrix<Complex64>),
}

impl Propagator {
    pub fn new(h: &ObservableOp, like: &Ket, dt: f64) -> Result<Self> {
        match (h, like) {
            (ObservableOp::Hamiltonian { mass, potential }, Ket::Grid(f)) => {
                Ok(Propagator::Grid(CrankNicolson::new(f.grid(), *mass, potential, dt)?))
            }
            (ObservableOp::Matrix(m), Ket::Finite(_)) => Ok(Propagator::Finite((m * (-I * dt)).exp())),
            _ => Err(Error::Shape("no propagator for this Hamiltonian and state kind".into())),
        }
    }

    pub fn step(&self, phi: &Ket) -> Result<Ket> {
        match (self, phi) {
            (Propagator::Grid(cn), Ket::Grid(f)) => Ok(Ket::Grid(cn.step(f)?)),
            (Propagator::Finite(u), Ket::Finite(v)) => Ok(Ket::Finite(u * v)),
            _ => Err(Error::Shape("propagator and state kinds differ".into())),
        }
    }
}

/// `ρ(φ, φ_dt) / dt` for one propagator step: the finite-difference
/// projective speed.
pub fn fs_speed(h: &ObservableOp, phi: &Ket, dt: f64) -> Result<f64> {
    let next = Propagator::new(h, phi, dt)?.step(phi)?;
    Ok(fubini_study_distance(phi, &next.normalized()?)? / dt)
}

/// Largest gap over the window between the central-difference rate of
/// `⟨Â⟩(t)` and `-i⟨φ|[Â,ĥ]|φ⟩` along the evolution of `phi0`.
pub fn ehrenfest_check(a: &ObservableOp, h: &ObservableOp, phi0: &Ket, window: (f64, f64), dt: f64) -> Result<f64> {
    let (means, rates) = ehrenfest_series(a, h, phi0, window, dt)?;
    let mut worst: f64 = 0.0;
    for k in 1..means.len() - 1 {
        let fd = (means[k + 1] - means[k - 1]) / (2.0 * dt);
        worst = worst.max((fd - rates[k]).abs());
    }
    Ok(worst)
}

/// Samples `⟨Â⟩` and `-i⟨[Â,ĥ]⟩` at every step of the evolution.
pub fn ehrenfest_series(
    a: &ObservableOp,
    h: &ObservableOp,
    phi0: &Ket,
    window: (f64, f64),
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    require_unit(phi0)?;
    if !(window.1 > window.0 && dt > 0.0) {
        return Err(domain("window must be nondegenerate and dt positive"));
    }
    let steps = ((window.1 - window.0) / dt).round().max(2.0) as usize;
    let prop = Propagator::new(h, phi0, dt)?;
    let mut phi = phi0.clone();
    let mut means = Vec::with_capacity(steps + 1);
    let mut rates = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        means.push(a.expectation(&phi)?.re);
        rates.push((-I * commutator(a, h, &phi)?.inner(&phi)?).re);
        if k < steps {
            let next = prop.step(&phi)?;
            let drift = (next.norm() - phi.norm()).abs();
            if !(drift <= 1e-6) {
                return Err(crate::error::numeric(format!("propagation lost unitarity: norm drift {drift:e}")));
            }
            phi = next;
        }
    }
    Ok((means, rates))
}

/// Unitary on a 1-D grid: multiplication by `exp(iθ(x))` followed by
/// free Crank–Nicolson steps.
#[derive(Clone, Debug)]
pub struct GridUnitary {
    phase: Vec<f64>,
    cn: CrankNicolson,
    steps: usize,
}

impl GridUnitary {
    pub fn new(grid: &crate::grid::GridSpec, theta: impl Fn(f64) -> f64, mass: f64, steps: usize, dt: f64) -> Result<Self> {
        let phase = (0..grid.len()).map(|j| theta(grid.point(j)[0])).collect();
        Ok(GridUnitary {
            phase,
            cn: CrankNicolson::new(grid, mass, &Potential::Zero, dt)?,
            steps,
        })
    }

    fn rotate(&self, f: &StateFunction, sign: f64) -> Result<StateFunction> {
        let values = f
            .values()
            .iter()
            .zip(&self.phase)
            .map(|(z, t)| z * Complex64::from_polar(1.0, sign * t))
            .collect();
        f.with_values(values)
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        let f = ket.as_grid().ok_or_else(|| Error::Shape("grid unitary needs a grid state".into()))?;
        let mut out = self.rotate(f, 1.0)?;
        for _ in 0..self.steps {
            out = self.cn.step(&out)?;
        }
        Ok(Ket::Grid(out))
    }

    pub fn apply_inverse(&self, ket: &Ket) -> Result<Ket> {
        let f = ket.as_grid().ok_or_else(|| Error::Shape("grid unitary needs a grid state".into()))?;
        let mut out = f.clone();
        for _ in 0..self.steps {
            out = self.cn.step_back(&out)?;
        }
        Ok(Ket::Grid(self.rotate(&out, -1.0)?))
    }
}

/// `‖-i(U†ÂU)_⊥φ‖ · ‖-i(U†B̂U)_⊥φ‖`
pub fn conjugated_uncertainty_product(u: &GridUnitary, a: &ObservableOp, b: &ObservableOp, phi: &Ket) -> Result<f64> {
    require_unit(phi)?;
    let uphi = u.apply(phi)?;
    let spread = |op: &ObservableOp| -> Result<f64> {
        let conj = u.apply_inverse(&op.apply(&uphi)?)?;
        let mean = conj.inner(phi)?.re;
        Ok(conj.combine(ONE, phi, Complex64::new(-mean, 0.0))?.norm())
    };
    Ok(spread(a)? * spread(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::grid::make_tilde_delta;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli() -> [DMatrix<Complex64>; 3] {
        let z = c(0.0, 0.0);
        [
            DMatrix::from_row_slice(2, 2, &[z, ONE, ONE, z]),
            DMatrix::from_row_slice(2, 2, &[z, -I, I, z]),
            DMatrix::from_row_slice(2, 2, &[ONE, z, z, -ONE]),
        ]
    }

    fn random_ket(rng: &mut ChaCha8Rng, n: usize) -> Ket {
        let v = DVector::from_fn(n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        Ket::Finite(v.normalize())
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
        let m = DMatrix::from_fn(n, n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        (&m + m.adjoint()) * c(0.5, 0.0)
    }

    fn gaussian(n: usize, v0: f64) -> Ket {
        let grid = GridSpec::line(-10.0, 10.0, n).unwrap();
        let g = make_tilde_delta(&[0.0], 1.0, &grid).unwrap();
        Ket::Grid(g.map(|p, z| z * Complex64::from_polar(1.0, v0 * p[0])).unwrap())
    }

    #[test]
    fn grid_observables_are_hermitian() {
        let grid = GridSpec::line(-10.0, 10.0, 801).unwrap();
        let f = Ket::Grid(StateFunction::from_fn(&grid, |p| c((-p[0] * p[0]).exp(), p[0] * (-p[0] * p[0] / 2.0).exp())).unwrap());
        let g = Ket::Grid(StateFunction::from_fn(&grid, |p| c((p[0] - 1.0).cos() * (-p[0] * p[0] / 3.0).exp(), 0.2)).unwrap().map(|p, z| z * (-p[0] * p[0] / 4.0).exp()).unwrap());
        let ops = [
            ObservableOp::Position,
            ObservableOp::Momentum,
            ObservableOp::Hamiltonian { mass: 1.3, potential: Potential::Harmonic { stiffness: 1.0 } },
        ];
        for op in &ops {
            let lhs = op.apply(&f).unwrap().inner(&g).unwrap();
            let rhs = f.inner(&op.apply(&g).unwrap()).unwrap();
            assert!((lhs - rhs).norm() < 1e-10, "{op:?}");
        }
    }

    #[test]
    fn bracket_of_equal_fields_vanishes() {
        let phi = gaussian(1025, 0.5);
        let (field, comm) = lie_bracket_check(&ObservableOp::Momentum, &ObservableOp::Momentum, &phi).unwrap();
        assert!(field.norm() < 1e-6 && comm.norm() == 0.0);
    }

    #[test]
    fn pauli_bracket_is_twice_sigma_z() {
        let [s1, s2, s3] = pauli();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi = random_ket(&mut rng, 2);
        let (field, comm) = lie_bracket_check(&ObservableOp::Matrix(s1), &ObservableOp::Matrix(s2), &phi).unwrap();
        let expected = ObservableOp::Matrix(s3).apply(&phi).unwrap().scale(c(0.0, 2.0));
        assert!(field.sub(&expected).unwrap().norm() < 1e-6);
        assert!(comm.sub(&expected).unwrap().norm() < 1e-14);
    }

    #[test]
    fn canonical_bracket_on_gaussian() {
        let phi = gaussian(2048, 0.0);
        let (field, comm) = lie_bracket_check(&ObservableOp::Position, &ObservableOp::Momentum, &phi).unwrap();
        let target = phi.scale(I);
        assert!(field.sub(&comm).unwrap().norm() < 1e-6);
        assert!(comm.sub(&target).unwrap().norm() < 1e-4);
    }

    #[test]
    fn bracket_rejects_edge_support() {
        let grid = GridSpec::line(-3.0, 3.0, 301).unwrap();
        let f = StateFunction::from_fn(&grid, |p| c((-(p[0] - 2.5).powi(2)).exp(), 0.0)).unwrap().normalized().unwrap();
        let err = lie_bracket_check(&ObservableOp::Position, &ObservableOp::Momentum, &Ket::Grid(f)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn eigenstate_has_no_orthogonal_velocity() {
        let h = DMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), ONE]);
        let phi = Ket::Finite(DVector::from_vec(vec![ONE, c(0.0, 0.0)]));
        let d = decompose_tangent(&ObservableOp::Matrix(h.clone()), &phi).unwrap();
        assert_eq!(d.orthogonal.norm(), 0.0);
        assert_eq!(d.phase_parallel, -1.0);
        assert_eq!(d.radial, 0.0);
        let op = ObservableOp::Matrix(h);
        assert_eq!(projective_speed(&op, &phi).unwrap(), 0.0);
        assert_eq!(projective_accel(&op, &phi).unwrap(), 0.0);
    }

    #[test]
    fn balanced_spin_decomposition_and_kinematics() {
        let h = ObservableOp::Matrix(DMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), ONE]));
        let r = 0.5f64.sqrt();
        let phi = Ket::Finite(DVector::from_vec(vec![c(r, 0.0), c(r, 0.0)]));
        let d = decompose_tangent(&h, &phi).unwrap();
        assert!(d.phase_parallel.abs() < 1e-15);
        assert!((d.orthogonal.norm() - 1.0).abs() < 1e-15);
        assert!((projective_speed(&h, &phi).unwrap() - 1.0).abs() < 1e-15);
        assert!(projective_accel(&h, &phi).unwrap() < 1e-15);
        assert!((fs_speed(&h, &phi, 1e-4).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn free_gaussian_phase_component_is_kinetic_mean() {
        // For the width-1 Gaussian with carrier v0: ⟨p²⟩ = v0² + 1/2.
        let v0 = 1.5;
        let phi = gaussian(4001, v0);
        let d = decompose_tangent(&ObservableOp::free(1.0), &phi).unwrap();
        let expected = 0.5 * (v0 * v0 + 0.5);
        assert!((d.phase_parallel - expected).abs() < 1e-3, "{}", d.phase_parallel);
        let rebuilt = d.reconstruct(&phi).unwrap();
        assert!(rebuilt.sub(&field(&ObservableOp::free(1.0), &phi).unwrap()).unwrap().norm() < 1e-10);
    }

    #[test]
    fn grid_projective_kinematics_match_moments() {
        let h = ObservableOp::Hamiltonian { mass: 1.0, potential: Potential::Harmonic { stiffness: 1.0 } };
        let grid = GridSpec::line(-10.0, 10.0, 2001).unwrap();
        let phi = Ket::Grid(make_tilde_delta(&[1.0], 1.0, &grid).unwrap());
        let speed = projective_speed(&h, &phi).unwrap();
        assert!((speed - uncertainty(&h, &phi).unwrap()).abs() < 1e-4);
        let accel = projective_accel(&h, &phi).unwrap();
        assert!((accel - uncertainty_of_square(&h, &phi).unwrap()).abs() < 1e-4);
        assert!((fs_speed(&h, &phi, 1e-4).unwrap() - speed).abs() < 1e-4);
        assert!(parallel_acceleration(&h, &phi).unwrap().abs() < 1e-10);
    }

    #[test]
    fn minimum_uncertainty_gaussian() {
        let phi = gaussian(16385, 0.0);
        let r = uncertainty_report(&ObservableOp::Position, &ObservableOp::Momentum, &phi).unwrap();
        assert!((r.delta_a * r.delta_b - 0.5).abs() < 1e-6, "{}", r.delta_a * r.delta_b);
        assert!((r.bound - 0.5).abs() < 1e-6);
    }

    #[test]
    fn pauli_uncertainty_at_up_state() {
        let [s1, s2, _] = pauli();
        let phi = Ket::Finite(DVector::from_vec(vec![ONE, c(0.0, 0.0)]));
        let r = uncertainty_report(&ObservableOp::Matrix(s1), &ObservableOp::Matrix(s2), &phi).unwrap();
        assert!((r.delta_a * r.delta_b - 1.0).abs() < 1e-15);
        assert!((r.bound - 1.0).abs() < 1e-15);
        assert!(r.delta_a * r.delta_b >= r.bound - 1e-15);
    }

    #[test]
    fn equal_observables_span_no_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_hermitian(&mut rng, 4);
        let phi = random_ket(&mut rng, 4);
        let r = uncertainty_report(&ObservableOp::Matrix(a.clone()), &ObservableOp::Matrix(a), &phi).unwrap();
        assert!(r.area < 1e-7);
        assert!((r.g - r.delta_a.powi(2)).abs() < 1e-12);
        assert!(r.identity_gap < 1e-10);
    }

    #[test]
    fn free_momentum_is_conserved() {
        let phi = gaussian(2048, 1.0);
        let gap = ehrenfest_check(&ObservableOp::Momentum, &ObservableOp::free(1.0), &phi, (0.0, 0.5), 1e-3).unwrap();
        assert!(gap < 1e-6, "{gap}");
    }

    #[test]
    fn oscillator_position_rate_is_mean_momentum() {
        let grid = GridSpec::line(-10.0, 10.0, 4096).unwrap();
        let phi = Ket::Grid(make_tilde_delta(&[1.0], 1.0, &grid).unwrap());
        let h = ObservableOp::Hamiltonian { mass: 1.0, potential: Potential::Harmonic { stiffness: 1.0 } };
        let dt = 1e-3;
        let gap = ehrenfest_check(&ObservableOp::Position, &h, &phi, (0.0, 1.0), dt).unwrap();
        assert!(gap < 1e-5, "{gap}");
        let (means, _) = ehrenfest_series(&ObservableOp::Position, &h, &phi, (0.0, 1.0), dt).unwrap();
        let prop = Propagator::new(&h, &phi, dt).unwrap();
        let mut state = phi.clone();
        let mut worst: f64 = 0.0;
        for k in 0..means.len() - 1 {
            if k > 0 {
                let fd = (means[k + 1] - means[k - 1]) / (2.0 * dt);
                worst = worst.max((fd - ObservableOp::Momentum.expectation(&state).unwrap().re).abs());
            }
            state = prop.step(&state).unwrap();
        }
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn eigenstate_expectations_are_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(&mut rng, 3);
        let a = random_hermitian(&mut rng, 3);
        let eig = nalgebra::SymmetricEigen::new(h.clone());
        let phi = Ket::Finite(eig.eigenvectors.column(0).into_owned());
        let (means, rates) = ehrenfest_series(&ObservableOp::Matrix(a), &ObservableOp::Matrix(h), &phi, (0.0, 1.0), 1e-2).unwrap();
        assert!(means.iter().all(|m| (m - means[0]).abs() < 1e-12));
        assert!(rates.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn projection_identity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = ObservableOp::Matrix(random_hermitian(&mut rng, 3));
        let phi = random_ket(&mut rng, 3);
        let e = h.expectation(&phi).unwrap().re;
        let (l, r) = projection_identity(&ObservableOp::Identity, &h, &phi).unwrap();
        assert!((l - 2.0 * e).norm() < 1e-12 && (r - 2.0 * e).norm() < 1e-12);
        let h2 = h.apply(&h.apply(&phi).unwrap()).unwrap().inner(&phi).unwrap().re;
        let (l, r) = projection_identity(&h, &h, &phi).unwrap();
        assert!((l - 2.0 * h2).norm() < 1e-12 && (r - 2.0 * h2).norm() < 1e-12);

        // ⟨p³⟩ = v0³ + 3 v0 / 2 for the width-1 Gaussian; the identity gives ⟨p³⟩/m.
        let phi = gaussian(8001, 2.0);
        let (l, r) = projection_identity(&ObservableOp::Momentum, &ObservableOp::free(1.0), &phi).unwrap();
        assert!((l - r).norm() < 1e-8);
        assert!((l.re - 11.0).abs() < 1e-2, "{l}");
    }

    #[test]
    fn fubini_study_examples() {
        let grid = GridSpec::line(-10.0, 10.0, 801).unwrap();
        let a = Ket::Grid(make_tilde_delta(&[-1.0], 1.0, &grid).unwrap());
        let b = Ket::Grid(make_tilde_delta(&[1.0], 1.0, &grid).unwrap());
        assert!((fubini_study_distance(&a, &b).unwrap() - (-1.0f64).exp().acos()).abs() < 1e-10);
        assert!((fubini_study_distance(&a, &b).unwrap() - 1.194069).abs() < 1e-6);
        assert!(fubini_study_distance(&a, &a.scale(Complex64::from_polar(1.0, 0.7))).unwrap() < 1e-12);
        let up = Ket::Finite(DVector::from_vec(vec![ONE, c(0.0, 0.0)]));
        let down = Ket::Finite(DVector::from_vec(vec![c(0.0, 0.0), ONE]));
        assert_eq!(fubini_study_distance(&up, &down).unwrap(), std::f64::consts::FRAC_PI_2);
        assert!(matches!(fubini_study_distance(&up, &up.scale(c(2.0, 0.0))), Err(Error::Normalization { .. })));
    }

    #[test]
    fn canonical_bound_survives_random_unitaries() {
        let grid = GridSpec::line(-20.0, 20.0, 2048).unwrap();
        let phi = Ket::Grid(make_tilde_delta(&[0.0], 1.0, &grid).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..4 {
            let (a, k, b): (f64, f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(0.2..1.5), rng.random_range(-0.2..0.2));
            let u = GridUnitary::new(&grid, move |x| a * (k * x).sin() + b * x * x, 1.0, rng.random_range(1..200), 5e-3).unwrap();
            let product = conjugated_uncertainty_product(&u, &ObservableOp::Position, &ObservableOp::Momentum, &phi).unwrap();
            assert!(product >= 0.5, "{product}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fubini_study_is_a_metric_on_rays(seed in 0u64..10_000, theta in 0.0f64..6.3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c3) = (random_ket(&mut rng, 4), random_ket(&mut rng, 4), random_ket(&mut rng, 4));
            let ab = fubini_study_distance(&a, &b).unwrap();
            let bc = fubini_study_distance(&b, &c3).unwrap();
            let ac = fubini_study_distance(&a, &c3).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
            let rotated = b.scale(Complex64::from_polar(1.0, theta));
            prop_assert!((fubini_study_distance(&a, &rotated).unwrap() - ab).abs() < 1e-12);
        }

        #[test]
        fn uncertainty_identity_on_random_triples(seed in 0u64..10_000, n in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = ObservableOp::Matrix(random_hermitian(&mut rng, n));
            let b = ObservableOp::Matrix(random_hermitian(&mut rng, n));
            let phi = random_ket(&mut rng, n);
            let r = uncertainty_report(&a, &b, &phi).unwrap();
            prop_assert!(r.identity_gap < 1e-10);
            prop_assert!(r.delta_a * r.delta_b >= r.bound - 1e-12);
            prop_assert!(r.area >= r.bound - 1e-12);
        }

        #[test]
        fn projection_identity_on_random_triples(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = ObservableOp::Matrix(random_hermitian(&mut rng, 3));
            let h = ObservableOp::Matrix(random_hermitian(&mut rng, 3));
            let phi = random_ket(&mut rng, 3);
            let (l, r) = projection_identity(&a, &h, &phi).unwrap();
            prop_assert!((l - r).norm() < 1e-8);
            let d = decompose_tangent(&h, &phi).unwrap();
            prop_assert!(d.radial.abs() < 1e-12);
            prop_assert!(d.reconstruct(&phi).unwrap().sub(&field(&h, &phi).unwrap()).unwrap().norm() < 1e-10);
        }
    }
}
