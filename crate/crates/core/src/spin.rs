//! A spin in a constant field as the finite-dimensional case of geodesic
//! Schrödinger dynamics: evolution under `ĥ = M - μ σ·B` is geodesic motion
//! on the unit sphere of `C²` with the metric `ĥ⁻²`.
//!
//! The field points along `z`. In the `σ_z` basis (up, down) the Hamiltonian
//! is `diag(M - μB, M + μB)`. A [`SpinState`] stores the amplitudes named by
//! their evolution phase: `plus` turns with `M + μB` (the down component) and
//! `minus` with `M - μB` (the up component).

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelSystem {
    pub m: f64,
    /// The product `μB`.
    pub mu_b: f64,
}

impl TwoLevelSystem {
    pub fn new(m: f64, mu_b: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite() && mu_b.is_finite()) {
            return Err(domain(format!("need M > 0 and finite μB, got M = {m}, μB = {mu_b}")));
        }
        Ok(TwoLevelSystem { m, mu_b })
    }

    /// Energies of the `(plus, minus)` amplitudes.
    pub fn energies(&self) -> (f64, f64) {
        (self.m + self.mu_b, self.m - self.mu_b)
    }

    /// `ĥ⁻²` acting on `(plus, minus)` amplitudes.
    pub fn state_metric(&self) -> Result<(f64, f64)> {
        let (ep, em) = self.energies();
        if ep == 0.0 || em == 0.0 {
            return Err(Error::SingularOperator(format!(
                "M = {} equals ±μB, the Hamiltonian is not invertible",
                self.m
            )));
        }
        Ok((1.0 / (ep * ep), 1.0 / (em * em)))
    }
}

/// Metric operator `ĥ⁻²` in the `σ_z` basis: `diag(1/(M-μB)², 1/(M+μB)²)`.
pub fn metric_operator(sys: &TwoLevelSystem) -> Result<Matrix2<f64>> {
    let (kp, km) = sys.state_metric()?;
    Ok(Matrix2::new(km, 0.0, 0.0, kp))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub plus: Complex64,
    pub minus: Complex64,
}

impl SpinState {
    pub const NORM_TOL: f64 = 1e-12;

    /// A unit state; fails if `|c₊|² + |c₋|²` is not 1.
    pub fn new(plus: Complex64, minus: Complex64) -> Result<Self> {
        let s = SpinState { plus, minus };
        let n = s.norm();
        if (n * n - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::Normalization { norm: n });
        }
        Ok(s)
    }

    /// Any amplitudes, not necessarily unit.
    pub fn raw(plus: Complex64, minus: Complex64) -> Self {
        SpinState { plus, minus }
    }

    pub fn normalized(plus: Complex64, minus: Complex64) -> Result<Self> {
        let n = (plus.norm_sqr() + minus.norm_sqr()).sqrt();
        if !(n > 0.0) {
            return Err(Error::Normalization { norm: n });
        }
        Ok(SpinState {
            plus: plus / n,
            minus: minus / n,
        })
    }

    pub fn norm(&self) -> f64 {
        (self.plus.norm_sqr() + self.minus.norm_sqr()).sqrt()
    }

    /// Amplitudes in the `σ_z` basis (up, down).
    pub fn to_sigma_z(&self) -> Vector2<Complex64> {
        Vector2::new(self.minus, self.plus)
    }

    pub fn from_sigma_z(v: &Vector2<Complex64>) -> Self {
        SpinState {
            plus: v[1],
            minus: v[0],
        }
    }

    fn axpy(&self, a: f64, other: &SpinState) -> SpinState {
        SpinState {
            plus: self.plus + other.plus * a,
            minus: self.minus + other.minus * a,
        }
    }

    fn sub(&self, other: &SpinState) -> SpinState {
        self.axpy(-1.0, other)
    }

    /// `(self, other) = Σ a_i conj(b_i)`
    pub fn inner(&self, other: &SpinState) -> Complex64 {
        self.plus * other.plus.conj() + self.minus * other.minus.conj()
    }
}

/// Closed-form evolution `(c₊ e^{-i(M+μB)t}, c₋ e^{-i(M-μB)t})`.
pub fn evolve_spin(sys: &TwoLevelSystem, psi0: &SpinState, t: f64) -> SpinState {
    let (ep, em) = sys.energies();
    SpinState {
        plus: psi0.plus * Complex64::from_polar(1.0, -ep * t),
        minus: psi0.minus * Complex64::from_polar(1.0, -em * t),
    }
}

/// `‖dψ/dt‖_K` with `dψ/dt = -iĥψ` and `K = ĥ⁻²`. Equals `‖ψ‖`.
pub fn k_speed(sys: &TwoLevelSystem, psi: &SpinState) -> Result<f64> {
    let (ep, em) = sys.energies();
    let (kp, km) = sys.state_metric()?;
    let sq = kp * (ep * ep) * psi.plus.norm_sqr() + km * (em * em) * psi.minus.norm_sqr();
    Ok(sq.sqrt())
}

/// Image of a state in `R⁴ = C²` with coordinates scaled by `1/(M∓μB)`,
/// ordered `(x₁, y₁, x₂, y₂)` in the `σ_z` basis.
pub fn ellipsoid_image(sys: &TwoLevelSystem, psi: &SpinState) -> [f64; 4] {
    let (ep, em) = sys.energies();
    [psi.minus.re / em, psi.minus.im / em, psi.plus.re / ep, psi.plus.im / ep]
}

/// Left side of the ellipsoid equation minus 1 (zero on unit states).
pub fn ellipsoid_residual(sys: &TwoLevelSystem, p: &[f64; 4]) -> f64 {
    let (ep, em) = sys.energies();
    (p[0] * p[0] + p[1] * p[1]) * em * em + (p[2] * p[2] + p[3] * p[3]) * ep * ep - 1.0
}

/// Settings for the perturbative geodesic test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicTest {
    /// Perturbation size.
    pub delta: f64,
    /// Number of random perturbation directions.
    pub trials: usize,
    pub seed: u64,
}

impl Default for GeodesicTest {
    fn default() -> Self {
        GeodesicTest {
            delta: 1e-4,
            trials: 16,
            seed: 7,
        }
    }
}

/// Samples of the exact solution over `window` with step `dt`.
pub fn sample_solution(sys: &TwoLevelSystem, psi0: &SpinState, window: (f64, f64), dt: f64) -> Result<Vec<SpinState>> {
    let n = steps(window, dt)?;
    let h = (window.1 - window.0) / n as f64;
    Ok((0..=n).map(|k| evolve_spin(sys, psi0, window.0 + k as f64 * h)).collect())
}

fn steps(window: (f64, f64), dt: f64) -> Result<usize> {
    if !(window.1 > window.0) || !(dt > 0.0) {
        return Err(domain("window must be nondegenerate and dt positive"));
    }
    Ok(((window.1 - window.0) / dt).round().max(2.0) as usize)
}

/// Renormalized straight chord between the endpoints of the exact solution:
/// a path on the sphere that is not a geodesic when `μB ≠ 0`.
pub fn chord_path(sys: &TwoLevelSystem, psi0: &SpinState, window: (f64, f64), dt: f64) -> Result<Vec<SpinState>> {
    let n = steps(window, dt)?;
    let a = evolve_spin(sys, psi0, window.0);
    let b = evolve_spin(sys, psi0, window.1);
    (0..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            SpinState::normalized(a.plus * (1.0 - s) + b.plus * s, a.minus * (1.0 - s) + b.minus * s)
        })
        .collect()
}

/// Discrete energy `Σ Re(KΔψ, Δψ) / dt` of a sampled path.
pub fn discrete_energy(sys: &TwoLevelSystem, path: &[SpinState], dt: f64) -> Result<f64> {
    let (kp, km) = sys.state_metric()?;
    Ok(path
        .windows(2)
        .map(|w| {
            let d = w[1].sub(&w[0]);
            kp * d.plus.norm_sqr() + km * d.minus.norm_sqr()
        })
        .sum::<f64>()
        / dt)
}

/// First-variation residual of the exact solution over `window`.
///
/// See [`path_residual`].
pub fn geodesic_residual(
    sys: &TwoLevelSystem,
    psi0: &SpinState,
    window: (f64, f64),
    dt: f64,
    test: &GeodesicTest,
) -> Result<f64> {
    let period = 2.0 * std::f64::consts::PI / (sys.m + sys.mu_b.abs());
    if dt > 1e-3 * period * (1.0 + 1e-12) {
        return Err(domain(format!("dt = {dt} exceeds 1e-3 of the fast period {period}")));
    }
    let path = sample_solution(sys, psi0, window, dt)?;
    let h = (window.1 - window.0) / (path.len() - 1) as f64;
    path_residual(sys, &path, h, test)
}

/// Largest relative change `|ΔE| / E` of the discrete energy when the path is
/// pushed by `δ sin(πs)` along a smooth random tangent field (a fixed random
/// vector projected onto the sphere's tangent space at each sample) and
/// renormalized. Endpoints stay fixed. Critical paths give `O(δ²)`.
pub fn path_residual(sys: &TwoLevelSystem, path: &[SpinState], dt: f64, test: &GeodesicTest) -> Result<f64> {
    let e0 = discrete_energy(sys, path, dt)?;
    if !(e0 > 0.0) {
        return Err(domain("path has zero energy"));
    }
    let n = path.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(test.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..test.trials {
        let mut g = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let xi = SpinState::raw(g(), g());
        let xi = SpinState::raw(xi.plus / xi.norm(), xi.minus / xi.norm());
        let perturbed: Result<Vec<SpinState>> = path
            .iter()
            .enumerate()
            .map(|(k, psi)| {
                let tangent = xi.axpy(-psi.inner(&xi).re, psi);
                let bump = test.delta * (std::f64::consts::PI * k as f64 / n as f64).sin();
                let q = psi.axpy(bump, &tangent);
                SpinState::normalized(q.plus, q.minus)
            })
            .collect();
        let e = discrete_energy(sys, &perturbed?, dt)?;
        worst = worst.max((e - e0).abs() / e0);
    }
    Ok(worst)
}
