//! Transition probabilities `cos²ρ` between states, their agreement with the
//! normal law on the Gaussian manifold, and an isotropic random walk on a
//! truncated projective space that is absorbed near target states.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{fubini_study_distance, Ket};
use crate::grid::{inner_l2, make_tilde_delta, GridSpec, StateFunction};

/// `|(φ, ψ)|² = cos²ρ(φ, ψ)` for unit states.
pub fn born_probability(phi: &Ket, psi: &Ket) -> Result<f64> {
    Ok(fubini_study_distance(phi, psi)?.cos().powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BornIdentity {
    pub separation: f64,
    /// `exp(-(a-b)²/2σ²)`
    pub lhs: f64,
    /// `cos²ρ(δ̃_a, δ̃_b)` by quadrature
    pub rhs: f64,
    pub gap: f64,
}

pub fn born_normal_identity(sigma: f64, a: f64, b: f64, grid: &GridSpec) -> Result<BornIdentity> {
    let da = Ket::Grid(make_tilde_delta(&[a], sigma, grid)?);
    let db = Ket::Grid(make_tilde_delta(&[b], sigma, grid)?);
    let lhs = (-(a - b).powi(2) / (2.0 * sigma * sigma)).exp();
    let rhs = born_probability(&da, &db)?;
    Ok(BornIdentity {
        separation: (a - b).abs(),
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// The identity at `points` separations evenly spaced over `[0, 4σ]`,
/// placed symmetrically about `centre`.
pub fn born_sweep(sigma: f64, centre: f64, points: usize, grid: &GridSpec) -> Result<Vec<BornIdentity>> {
    if points < 2 {
        return Err(domain("a sweep needs at least two points"));
    }
    (0..points)
        .map(|k| {
            let d = 4.0 * sigma * k as f64 / (points - 1) as f64;
            born_normal_identity(sigma, centre - d / 2.0, centre + d / 2.0, grid)
        })
        .collect()
}

/// `(|δ̃_a(b)|², (1/πσ²)^{1/2} exp(-(a-b)²/σ²))` in one dimension.
pub fn normal_density_check(sigma: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) {
        return Err(domain(format!("width must be positive, got {sigma}")));
    }
    let value = (PI * sigma * sigma).powf(-0.25) * (-(b - a).powi(2) / (2.0 * sigma * sigma)).exp();
    let density = value * value;
    let reference = (1.0 / (PI * sigma * sigma)).sqrt() * (-(a - b).powi(2) / (sigma * sigma)).exp();
    Ok((density, reference))
}

/// Unit vector of amplitudes over a finite orthonormal basis, compared only
/// through `|⟨·,·⟩|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectivePoint {
    amplitudes: DVector<Complex64>,
}

pub const PROJECTIVE_NORM_TOL: f64 = 1e-12;

impl ProjectivePoint {
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        let n = amplitudes.norm();
        if (n - 1.0).abs() > PROJECTIVE_NORM_TOL {
            return Err(Error::Normalization { norm: n });
        }
        Ok(ProjectivePoint { amplitudes })
    }

    pub fn normalized(amplitudes: DVector<Complex64>) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Normalization { norm: n });
        }
        Ok(ProjectivePoint {
            amplitudes: amplitudes / Complex64::new(n, 0.0),
        })
    }

    /// `cos χ·e₀ + sin χ·e^{iφ}·e₁` in `dim` modes.
    pub fn qubit(dim: usize, chi: f64, phase: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Shape("a qubit needs two modes".into()));
        }
        let mut v = DVector::zeros(dim);
        v[0] = Complex64::new(chi.cos(), 0.0);
        v[1] = Complex64::from_polar(chi.sin(), phase);
        Self::normalized(v)
    }

    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Shape(format!("mode {k} outside {dim} modes")));
        }
        let mut v = DVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn distance(&self, other: &ProjectivePoint) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Shape("points of different dimension".into()));
        }
        let overlap = other.amplitudes.dotc(&self.amplitudes);
        let rest = (&self.amplitudes - &other.amplitudes * overlap).norm();
        Ok(rest.atan2(overlap.norm()))
    }

    pub fn transformed(&self, u: &nalgebra::DMatrix<Complex64>) -> Result<Self> {
        Self::normalized(u * &self.amplitudes)
    }
}

/// Orthonormal harmonic-oscillator eigenfunctions `ψ_0 … ψ_{N-1}` sampled on a grid.
#[derive(Clone, Debug)]
pub struct HermiteBasis {
    modes: Vec<StateFunction>,
}

pub const DEFAULT_MODES: usize = 16;
pub const MAX_MODES: usize = 64;

impl HermiteBasis {
    pub fn new(grid: &GridSpec, n: usize) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::Shape("the mode basis lives on a 1-D grid".into()));
        }
        if n == 0 || n > MAX_MODES {
            return Err(domain(format!("mode count must be in 1..={MAX_MODES}, got {n}")));
        }
        let extent = (2.0 * n as f64 + 1.0).sqrt() + 6.0;
        grid.check_inside(&[0.0], extent)?;
        let xs = grid.axis(0).coords();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        cols.push(xs.iter().map(|x| PI.powf(-0.25) * (-x * x / 2.0).exp()).collect());
        for k in 1..n {
            let prev = &cols[k - 1];
            let next: Vec<f64> = xs
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let back = if k >= 2 { ((k - 1) as f64 / k as f64).sqrt() * cols[k - 2][j] } else { 0.0 };
                    (2.0 / k as f64).sqrt() * x * prev[j] - back
                })
                .collect();
            cols.push(next);
        }
        let modes = cols
            .into_iter()
            .map(|c| StateFunction::new(grid.clone(), c.into_iter().map(|v| Complex64::new(v, 0.0)).collect()))
            .collect::<Result<_>>()?;
        Ok(HermiteBasis { modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode(&self, k: usize) -> &StateFunction {
        &self.modes[k]
    }

    /// Amplitudes `(f, ψ_k)`, renormalized after truncation.
    pub fn project(&self, f: &StateFunction) -> Result<ProjectivePoint> {
        let amps = self.modes.iter().map(|m| inner_l2(f, m)).collect::<Result<Vec<_>>>()?;
        ProjectivePoint::normalized(DVector::from_vec(amps))
    }

    pub fn synthesize(&self, p: &ProjectivePoint) -> Result<StateFunction> {
        let mut out = StateFunction::zeros(self.modes[0].grid());
        for (m, c) in self.modes.iter().zip(p.amplitudes().iter()) {
            out = out.combine(Complex64::new(1.0, 0.0), m, *c)?;
        }
        Ok(out)
    }

    /// Projections of `δ̃_a` of width `sigma` for each centre.
    pub fn manifold_targets(&self, sigma: f64, centres: &[f64]) -> Result<Vec<ProjectivePoint>> {
        let grid = self.modes[0].grid();
        centres.iter().map(|&a| self.project(&make_tilde_delta(&[a], sigma, grid)?)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    /// Fubini–Study length of each step.
    pub step_len: f64,
    pub max_steps: usize,
    /// Absorption radius in Fubini–Study distance.
    pub absorb_tol: f64,
    pub seed: u64,
    pub n_trials: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            step_len: 0.05,
            max_steps: 100_000,
            absorb_tol: 0.05,
            seed: 0,
            n_trials: 10_000,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_len > 0.0 && self.step_len <= 0.05) {
            return Err(domain(format!("step_len must lie in (0, 0.05], got {}", self.step_len)));
        }
        if !(self.absorb_tol > 0.0 && self.absorb_tol <= self.step_len) {
            return Err(domain(format!("absorb_tol must lie in (0, step_len], got {}", self.absorb_tol)));
        }
        if self.n_trials == 0 || self.max_steps == 0 {
            return Err(domain("n_trials and max_steps must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetHits {
    /// Distance from the start.
    pub fs_distance: f64,
    pub hits: usize,
    /// Absorbed trials, the denominator of `frequency`.
    pub trials: usize,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `cos²ρ` normalized over the targets.
    pub born_reference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitReport {
    pub targets: Vec<TargetHits>,
    pub n_trials: usize,
    pub absorbed: usize,
    pub mean_steps: f64,
}

/// 95% Wilson score interval for `hits` out of `n`.
pub fn wilson_interval(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let (k, n) = (hits as f64, n as f64);
    let p = k / n;
    let den = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / den;
    let half = z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Outcome of one trial: index of the absorbing target and steps taken.
fn run_trial(start: &ProjectivePoint, targets: &[ProjectivePoint], cfg: &WalkConfig, trial: usize) -> (Option<usize>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let dim = start.dim();
    let mut z = start.amplitudes.clone();
    let (c, s) = (cfg.step_len.cos(), cfg.step_len.sin());
    for step in 0..=cfg.max_steps {
        if let Some(k) = absorbing(&z, targets, cfg.absorb_tol) {
            return (Some(k), step);
        }
        if step == cfg.max_steps {
            break;
        }
        let mut u = DVector::from_fn(dim, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        // Horizontal part: orthogonal to z over ℂ, so also to the fibre direction iz.
        let along = z.dotc(&u);
        u -= &z * along;
        let n = u.norm();
        if n == 0.0 {
            continue;
        }
        u /= Complex64::new(n, 0.0);
        z = &z * Complex64::new(c, 0.0) + u * Complex64::new(s, 0.0);
        let zn = z.norm();
        z /= Complex64::new(zn, 0.0);
    }
    (None, cfg.max_steps)
}

fn absorbing(z: &DVector<Complex64>, targets: &[ProjectivePoint], tol: f64) -> Option<usize> {
    // ρ ≤ tol  ⇔  |⟨t, z⟩| ≥ cos(tol)
    let threshold = tol.cos();
    let mut best: Option<(usize, f64)> = None;
    for (k, t) in targets.iter().enumerate() {
        let o = t.amplitudes.dotc(z).norm();
        if o >= threshold && best.is_none_or(|(_, b)| o > b) {
            best = Some((k, o));
        }
    }
    best.map(|(k, _)| k)
}

/// Runs `cfg.n_trials` independent walks from `start`. Trial `i` draws from
/// the stream `i` of a generator seeded with `cfg.seed`, so the result does
/// not depend on `parallel`.
pub fn diffuse_walk(start: &ProjectivePoint, targets: &[ProjectivePoint], cfg: &WalkConfig, parallel: bool) -> Result<HitReport> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(domain("at least one target is required"));
    }
    if start.dim() > MAX_MODES || targets.iter().any(|t| t.dim() != start.dim()) {
        return Err(Error::Shape(format!("start and targets must share a dimension ≤ {MAX_MODES}")));
    }
    let outcomes: Vec<(Option<usize>, usize)> = if parallel {
        (0..cfg.n_trials).into_par_iter().map(|i| run_trial(start, targets, cfg, i)).collect()
    } else {
        (0..cfg.n_trials).map(|i| run_trial(start, targets, cfg, i)).collect()
    };
    let absorbed = outcomes.iter().filter(|o| o.0.is_some()).count();
    if (cfg.n_trials - absorbed) as f64 > 0.99 * cfg.n_trials as f64 {
        return Err(Error::NonErgodic {
            absorbed,
            trials: cfg.n_trials,
        });
    }
    let distances = targets.iter().map(|t| start.distance(t)).collect::<Result<Vec<_>>>()?;
    let born: Vec<f64> = distances.iter().map(|d| d.cos().powi(2)).collect();
    let born_total: f64 = born.iter().sum();
    let targets = distances
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let hits = outcomes.iter().filter(|o| o.0 == Some(k)).count();
            let (ci_low, ci_high) = wilson_interval(hits, absorbed);
            TargetHits {
                fs_distance: d,
                hits,
                trials: absorbed,
                frequency: if absorbed > 0 { hits as f64 / absorbed as f64 } else { 0.0 },
                ci_low,
                ci_high,
                born_reference: if born_total > 0.0 { born[k] / born_total } else { 0.0 },
            }
        })
        .collect();
    let steps: Vec<f64> = outcomes.iter().map(|o| o.1 as f64).collect();
    Ok(HitReport {
        targets,
        n_trials: cfg.n_trials,
        absorbed,
        mean_steps: crate::grid::pairwise_sum(&steps) / cfg.n_trials as f64,
    })
}

/// Hitting probability of the first of two orthogonal targets on CP¹ for
/// Brownian motion started at distance `rho` from it, with absorbing caps of
/// radius `tol`. On the Bloch sphere the caps have angular radius `2·tol`
/// and the probability is harmonic: it is affine in `ln tan(θ/2)`.
pub fn cp1_harmonic_reference(rho: f64, tol: f64) -> f64 {
    let f = |theta: f64| (theta / 2.0).tan().ln();
    let (lo, hi) = (2.0 * tol, PI - 2.0 * tol);
    ((f(hi) - f(2.0 * rho)) / (f(hi) - f(lo))).clamp(0.0, 1.0)
}

/// Random unitary from the QR factors of a complex Gaussian matrix, with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> nalgebra::DMatrix<Complex64> {
    let g = nalgebra::DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::default_grid;
    use proptest::prelude::*;

    fn three_sigma(p: f64, n: usize) -> f64 {
        3.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn born_probability_examples() {
        let g = default_grid();
        let a = Ket::Grid(make_tilde_delta(&[0.0], 1.0, &g).unwrap());
        assert!((born_probability(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let half = (2.0 * 2f64.ln()).sqrt();
        let b = Ket::Grid(make_tilde_delta(&[half], 1.0, &g).unwrap());
        assert!((born_probability(&a, &b).unwrap() - 0.5).abs() < 1e-10);
        let up = Ket::Finite(ProjectivePoint::basis(2, 0).unwrap().amplitudes().clone());
        let down = Ket::Finite(ProjectivePoint::basis(2, 1).unwrap().amplitudes().clone());
        assert!(born_probability(&up, &down).unwrap() < 1e-30);
    }

    #[test]
    fn identity_examples_and_sweep() {
        let g = default_grid();
        let same = born_normal_identity(1.0, 0.3, 0.3, &g).unwrap();
        assert_eq!(same.lhs, 1.0);
        assert!((same.rhs - 1.0).abs() < 1e-12 && same.gap < 1e-12);
        let two = born_normal_identity(1.0, -1.0, 1.0, &g).unwrap();
        assert!((two.lhs - 0.135335).abs() < 1e-6 && two.gap < 1e-8);
        let r = (2.0 * 2f64.ln()).sqrt();
        let half = born_normal_identity(1.0, 0.0, r, &g).unwrap();
        assert!((half.lhs - 0.5).abs() < 1e-12 && half.gap < 1e-8);
        let sweep = born_sweep(1.0, 0.0, 21, &g).unwrap();
        assert_eq!(sweep.len(), 21);
        assert!((sweep[20].separation - 4.0).abs() < 1e-12);
        assert!(sweep.iter().all(|s| s.gap < 1e-8));
        assert!(matches!(born_normal_identity(1.0, 0.0, 17.0, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn normal_density_examples() {
        let (d, r) = normal_density_check(1.0, 0.0, 0.0).unwrap();
        assert!((d - 0.564190).abs() < 1e-6 && (d - r).abs() < 1e-15);
        let (d, r) = normal_density_check(1.0, 0.0, 1.0).unwrap();
        assert!((d - (-1.0f64).exp() / PI.sqrt()).abs() < 1e-15 && (d - r).abs() < 1e-15);
        let (d, _) = normal_density_check(2.0, 0.5, 0.5).unwrap();
        assert!((d - (4.0 * PI).powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn hermite_modes_are_orthonormal() {
        let g = default_grid();
        let basis = HermiteBasis::new(&g, DEFAULT_MODES).unwrap();
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                let v = inner_l2(basis.mode(i), basis.mode(j)).unwrap();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).norm() < 1e-10, "{i} {j} {v}");
            }
        }
        let targets = basis.manifold_targets(1.0, &[0.0]).unwrap();
        // δ̃_0 of unit width is the ground mode.
        assert!((targets[0].amplitudes()[0].norm() - 1.0).abs() < 1e-10);
        let back = basis.synthesize(&targets[0]).unwrap();
        assert!((back.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn walk_config_bounds() {
        let ok = WalkConfig::default();
        assert!(ok.validate().is_ok());
        assert!(WalkConfig { step_len: 0.06, ..ok }.validate().is_err());
        assert!(WalkConfig { absorb_tol: 0.08, ..ok }.validate().is_err());
        assert!(WalkConfig { absorb_tol: 0.0, ..ok }.validate().is_err());
    }

    #[test]
    fn start_on_target_is_absorbed_at_once() {
        let s = ProjectivePoint::qubit(4, 0.4, 0.2).unwrap();
        let r = diffuse_walk(&s, &[s.clone()], &WalkConfig { n_trials: 50, ..Default::default() }, false).unwrap();
        assert_eq!(r.targets[0].frequency, 1.0);
        assert_eq!(r.mean_steps, 0.0);
    }

    #[test]
    fn symmetric_start_splits_evenly() {
        let targets = [ProjectivePoint::basis(2, 0).unwrap(), ProjectivePoint::basis(2, 1).unwrap()];
        let start = ProjectivePoint::qubit(2, PI / 4.0, 0.9).unwrap();
        let cfg = WalkConfig { seed: 3, ..Default::default() };
        let r = diffuse_walk(&start, &targets, &cfg, true).unwrap();
        assert_eq!(r.absorbed, cfg.n_trials);
        assert!((r.targets[0].frequency - 0.5).abs() < three_sigma(0.5, r.absorbed));
        assert!(r.targets[0].ci_low < 0.5 && r.targets[0].ci_high > 0.5);
    }

    #[test]
    fn parallel_schedule_reproduces_serial_result() {
        let targets = [ProjectivePoint::basis(3, 0).unwrap(), ProjectivePoint::basis(3, 2).unwrap()];
        let start = ProjectivePoint::normalized(DVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.2, 0.3), Complex64::new(0.1, -0.5)])).unwrap();
        let cfg = WalkConfig { n_trials: 400, seed: 17, ..Default::default() };
        let a = diffuse_walk(&start, &targets, &cfg, false).unwrap();
        let b = diffuse_walk(&start, &targets, &cfg, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unreachable_targets_are_non_ergodic() {
        let targets = [ProjectivePoint::basis(2, 0).unwrap()];
        let start = ProjectivePoint::basis(2, 1).unwrap();
        let cfg = WalkConfig { n_trials: 20, max_steps: 3, ..Default::default() };
        assert!(matches!(diffuse_walk(&start, &targets, &cfg, false), Err(Error::NonErgodic { .. })));
    }

    #[test]
    fn harmonic_reference_is_symmetric() {
        assert!((cp1_harmonic_reference(PI / 4.0, 0.05) - 0.5).abs() < 1e-12);
        assert!(cp1_harmonic_reference(0.05, 0.05) > 0.999);
        let p = cp1_harmonic_reference(0.8f64.sqrt().acos(), 0.05);
        assert!(p > 0.5 && p < 0.8);
    }

    #[test]
    fn random_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(5, &mut rng);
        let e = &u.adjoint() * &u - nalgebra::DMatrix::<Complex64>::identity(5, 5);
        assert!(e.norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn born_rule_on_manifold_is_normal_law(a in -3.0f64..3.0, b in -3.0f64..3.0, sigma in 0.6f64..1.5) {
            let g = default_grid();
            let r = born_normal_identity(sigma, a, b, &g).unwrap();
            prop_assert!(r.gap < 1e-8);
        }

        #[test]
        fn wilson_interval_brackets_estimate(hits in 0usize..500, extra in 1usize..500) {
            let n = hits + extra;
            let (lo, hi) = wilson_interval(hits, n);
            let p = hits as f64 / n as f64;
            prop_assert!(lo <= p && p <= hi && 0.0 <= lo && hi <= 1.0);
        }
    }
}
