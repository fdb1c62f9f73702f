//! Uniform sample grids, trapezoid quadrature and the two inner products
//! every other module is built on: the plain `L2` product and the
//! kernel-weighted double integral.
//!
//! Inner products follow the convention `(f, g) = ∫ f conj(g)`, linear in
//! the first slot. Reductions use pairwise summation so that results do not
//! depend on how the work is split across threads.

use std::f64::consts::PI;
use std::ops::Add;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, numeric, Error, Result};
use crate::potential::Potential;

/// One uniformly sampled coordinate axis, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let axis = Axis { lo, hi, n };
        axis.validate()?;
        Ok(axis)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.hi <= self.lo {
            return Err(domain(format!("axis bounds [{}, {}] are not increasing", self.lo, self.hi)));
        }
        if self.n < GridSpec::MIN_SAMPLES {
            return Err(domain(format!(
                "axis needs at least {} samples, got {}",
                GridSpec::MIN_SAMPLES,
                self.n
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Trapezoid weight of sample `i`.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.n {
            0.5 * h
        } else {
            h
        }
    }
}

/// A 1-D or 2-D tensor-product grid. In 2-D, axis 0 is space and axis 1 is
/// time; samples are stored with axis 0 varying slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    axes: Vec<Axis>,
}

impl GridSpec {
    pub const MIN_SAMPLES: usize = 16;

    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(domain(format!("grid dimension must be 1 or 2, got {}", axes.len())));
        }
        for axis in &axes {
            axis.validate()?;
        }
        Ok(GridSpec { axes })
    }

    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![Axis::new(lo, hi, n)?])
    }

    pub fn plane(space: Axis, time: Axis) -> Result<Self> {
        Self::new(vec![space, time])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.axes[k].spacing()
    }

    /// Multi-index of a flat sample index.
    pub fn split(&self, idx: usize) -> [usize; 2] {
        match self.axes.len() {
            1 => [idx, 0],
            _ => [idx / self.axes[1].n, idx % self.axes[1].n],
        }
    }

    pub fn flat(&self, i: usize, j: usize) -> usize {
        match self.axes.len() {
            1 => i,
            _ => i * self.axes[1].n + j,
        }
    }

    /// Coordinates of a sample; unused trailing components are zero.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.split(idx);
        match self.axes.len() {
            1 => [self.axes[0].coord(i), 0.0],
            _ => [self.axes[0].coord(i), self.axes[1].coord(j)],
        }
    }

    pub fn weight(&self, idx: usize) -> f64 {
        let [i, j] = self.split(idx);
        match self.axes.len() {
            1 => self.axes[0].weight(i),
            _ => self.axes[0].weight(i) * self.axes[1].weight(j),
        }
    }

    /// Checks that `a` lies inside the grid with at least `margin` to every edge.
    pub fn check_inside(&self, a: &[f64], margin: f64) -> Result<()> {
        if a.len() != self.dim() {
            return Err(Error::Shape(format!(
                "point has {} coordinates, grid has dimension {}",
                a.len(),
                self.dim()
            )));
        }
        for (k, (&c, axis)) in a.iter().zip(&self.axes).enumerate() {
            if !c.is_finite() || c - margin < axis.lo || c + margin > axis.hi {
                return Err(domain(format!(
                    "coordinate {k} = {c} is not inside [{}, {}] with margin {margin}",
                    axis.lo, axis.hi
                )));
            }
        }
        Ok(())
    }
}

/// Complex samples of a state function on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StateFunction {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl StateFunction {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} samples",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(numeric("state contains non-finite samples"));
        }
        Ok(StateFunction { grid, values })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        StateFunction {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn([f64; 2]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Replaces the samples, keeping the grid. Length and finiteness are rechecked.
    pub fn with_values(&self, values: Vec<Complex64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn map(&self, f: impl Fn([f64; 2], Complex64) -> Complex64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.grid.point(i), v))
            .collect();
        self.with_values(values)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        StateFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: Complex64, other: &StateFunction, b: Complex64) -> Result<Self> {
        same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(StateFunction {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn sub(&self, other: &StateFunction) -> Result<Self> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn norm(&self) -> f64 {
        inner_l2(self, self).map(|c| c.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(numeric("cannot normalize a zero state"));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }
}

pub(crate) fn same_grid(f: &StateFunction, g: &StateFunction) -> Result<()> {
    if f.grid != g.grid {
        return Err(Error::Shape("states live on different grids".into()));
    }
    Ok(())
}

/// Pairwise (cascade) summation; result is independent of evaluation order.
pub fn pairwise_sum<T: Copy + Default + Add<Output = T>>(xs: &[T]) -> T {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().fold(T::default(), |acc, &x| acc + x)
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Trapezoid approximation of `∫ f conj(g)`.
pub fn inner_l2(f: &StateFunction, g: &StateFunction) -> Result<Complex64> {
    same_grid(f, g)?;
    let terms: Vec<Complex64> = f
        .values
        .iter()
        .zip(&g.values)
        .enumerate()
        .map(|(i, (&a, &b))| a * b.conj() * f.grid.weight(i))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Shape of a bilinear-form kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `exp(-L²|x-y|²/2)`, positive definite.
    Euclid,
    /// `exp(-L²[(x-y)² - (t-s)²]/2)` on space-time, indefinite.
    Minkowski,
    /// `exp(-L²[(x-y)² - (1+u(x)+u(y))(t-s)²]/2)` on space-time, indefinite.
    Curved,
}

/// A kernel `k(x, y)` defining the product `∫∫ k(x,y) f(x) conj(g(y))`.
///
/// The Gaussian normalization `(L/√(2π))^d` is not part of the kernel;
/// see [`KernelSpec::normalization`].
#[derive(Clone, Debug)]
pub struct KernelSpec {
    kind: KernelKind,
    scale: f64,
    potential: Potential,
}

impl KernelSpec {
    pub fn euclid(scale: f64) -> Result<Self> {
        Self::build(KernelKind::Euclid, scale, Potential::Zero)
    }

    pub fn minkowski(scale: f64) -> Result<Self> {
        Self::build(KernelKind::Minkowski, scale, Potential::Zero)
    }

    pub fn curved(scale: f64, u: Potential) -> Result<Self> {
        Self::build(KernelKind::Curved, scale, u)
    }

    fn build(kind: KernelKind, scale: f64, potential: Potential) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(domain(format!("kernel scale must be positive, got {scale}")));
        }
        Ok(KernelSpec {
            kind,
            scale,
            potential,
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn is_indefinite(&self) -> bool {
        !matches!(self.kind, KernelKind::Euclid)
    }

    /// `(L/√(2π))^dim`, the factor that turns the Euclidean kernel into an
    /// approximate identity as `L` grows.
    pub fn normalization(&self, dim: usize) -> f64 {
        (self.scale / (2.0 * PI).sqrt()).powi(dim as i32)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        match self.kind {
            KernelKind::Euclid => Ok(()),
            _ if dim == 2 => Ok(()),
            _ => Err(Error::Shape(format!(
                "{:?} kernel needs a 1+1-D space-time grid, got dimension {dim}",
                self.kind
            ))),
        }
    }

    /// Kernel value for points given as `[x, t]` (1-D grids ignore `t`).
    pub fn eval(&self, p: &[f64], q: &[f64]) -> f64 {
        let l2 = self.scale * self.scale;
        match self.kind {
            KernelKind::Euclid => {
                let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (-0.5 * l2 * d2).exp()
            }
            KernelKind::Minkowski => {
                let dx = p[0] - q[0];
                let dt = p[1] - q[1];
                (-0.5 * l2 * (dx * dx - dt * dt)).exp()
            }
            KernelKind::Curved => {
                let u = self.potential.value(p[0]) + self.potential.value(q[0]);
                self.eval_curved(p, q, u)
            }
        }
    }

    fn eval_curved(&self, p: &[f64], q: &[f64], u_sum: f64) -> f64 {
        let l2 = self.scale * self.scale;
        let dx = p[0] - q[0];
        let dt = p[1] - q[1];
        (-0.5 * l2 * (dx * dx - (1.0 + u_sum) * dt * dt)).exp()
    }
}

struct Support {
    points: Vec<[f64; 2]>,
    weighted: Vec<Complex64>,
    u: Vec<f64>,
}

fn support(state: &StateFunction, kernel: &KernelSpec, conj: bool) -> Support {
    let grid = state.grid();
    let mut points = Vec::new();
    let mut weighted = Vec::new();
    let mut u = Vec::new();
    for (i, &v) in state.values().iter().enumerate() {
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        let p = grid.point(i);
        let w = grid.weight(i);
        weighted.push(if conj { v.conj() * w } else { v * w });
        if kernel.kind == KernelKind::Curved {
            u.push(kernel.potential.value(p[0]));
        }
        points.push(p);
    }
    Support { points, weighted, u }
}

/// Double trapezoid quadrature of `∫∫ k(x,y) f(x) conj(g(y))`.
///
/// Samples that are exactly zero are skipped, so compactly supported states
/// (such as [`make_delta_approx`]) cost only their support.
pub fn inner_kernel(f: &StateFunction, g: &StateFunction, k: &KernelSpec) -> Result<Complex64> {
    same_grid(f, g)?;
    k.check_dim(f.grid().dim())?;
    let sf = support(f, k, false);
    let sg = support(g, k, true);
    let dim = f.grid().dim();
    let rows: Vec<Complex64> = (0..sf.points.len())
        .into_par_iter()
        .map(|i| {
            let p = &sf.points[i][..dim];
            let terms: Vec<Complex64> = (0..sg.points.len())
                .map(|j| {
                    let q = &sg.points[j][..dim];
                    let kv = match k.kind {
                        KernelKind::Curved => k.eval_curved(p, q, sf.u[i] + sg.u[j]),
                        _ => k.eval(p, q),
                    };
                    sg.weighted[j] * kv
                })
                .collect();
            sf.weighted[i] * pairwise_sum(&terms)
        })
        .collect();
    let total = pairwise_sum(&rows);
    if !(total.re.is_finite() && total.im.is_finite()) {
        return Err(numeric("kernel quadrature produced a non-finite value"));
    }
    Ok(total)
}

/// Margin, in widths, required around a unit-norm Gaussian state.
pub const TILDE_DELTA_MARGIN: f64 = 5.0;

/// Unit-`L2` Gaussian `(πσ²)^(-d/4) exp(-|x-a|²/2σ²)`: a point of the
/// width-`σ` classical manifold.
pub fn make_tilde_delta(a: &[f64], sigma: f64, grid: &GridSpec) -> Result<StateFunction> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("width must be positive, got {sigma}")));
    }
    grid.check_inside(a, TILDE_DELTA_MARGIN * sigma)?;
    let d = grid.dim();
    let norm = (PI * sigma * sigma).powf(-(d as f64) / 4.0);
    StateFunction::from_fn(grid, |p| {
        let r2: f64 = (0..d).map(|k| (p[k] - a[k]).powi(2)).sum();
        Complex64::new(norm * (-r2 / (2.0 * sigma * sigma)).exp(), 0.0)
    })
}

/// Cut-off radius of [`make_delta_approx`], in widths.
pub const DELTA_CUTOFF: f64 = 7.0;

/// Unit-integral Gaussian `(2πε²)^(-d/2) exp(-|x-a|²/2ε²)` approximating the
/// delta function at `a`, set to exactly zero beyond `DELTA_CUTOFF * ε` along
/// any axis.
pub fn make_delta_approx(a: &[f64], eps: f64, grid: &GridSpec) -> Result<StateFunction> {
    delta_approx_impl(a, eps, grid, None)
}

/// Gradient component `∂/∂x_axis` of [`make_delta_approx`] as a function of `x`.
pub fn make_delta_approx_derivative(
    a: &[f64],
    eps: f64,
    axis: usize,
    grid: &GridSpec,
) -> Result<StateFunction> {
    if axis >= grid.dim() {
        return Err(Error::Shape(format!("axis {axis} out of range")));
    }
    delta_approx_impl(a, eps, grid, Some(axis))
}

fn delta_approx_impl(a: &[f64], eps: f64, grid: &GridSpec, derivative: Option<usize>) -> Result<StateFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(domain(format!("delta width must be positive, got {eps}")));
    }
    grid.check_inside(a, (DELTA_CUTOFF + 1.0) * eps)?;
    let d = grid.dim();
    let norm = (2.0 * PI * eps * eps).powf(-(d as f64) / 2.0);
    let cut = DELTA_CUTOFF * eps;
    StateFunction::from_fn(grid, |p| {
        if (0..d).any(|k| (p[k] - a[k]).abs() > cut) {
            return Complex64::new(0.0, 0.0);
        }
        let r2: f64 = (0..d).map(|k| (p[k] - a[k]).powi(2)).sum();
        let g = norm * (-r2 / (2.0 * eps * eps)).exp();
        let v = match derivative {
            None => g,
            Some(k) => -(p[k] - a[k]) / (eps * eps) * g,
        };
        Complex64::new(v, 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> GridSpec {
        GridSpec::line(-12.0, 12.0, 1201).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_rejects_bad_specs() {
        assert!(GridSpec::line(1.0, 0.0, 100).is_err());
        assert!(GridSpec::line(0.0, 1.0, 8).is_err());
        assert!(GridSpec::new(vec![]).is_err());
    }

    #[test]
    fn unit_gaussian_has_unit_norm() {
        let g = make_tilde_delta(&[0.0], 1.0, &line()).unwrap();
        let n = inner_l2(&g, &g).unwrap();
        assert!((n.re - 1.0).abs() < 1e-10 && n.im.abs() < 1e-14);
    }

    #[test]
    fn even_and_odd_hermite_functions_are_orthogonal() {
        let grid = line();
        let even = StateFunction::from_fn(&grid, |p| c((-p[0] * p[0] / 2.0).exp())).unwrap();
        let odd = StateFunction::from_fn(&grid, |p| c(p[0] * (-p[0] * p[0] / 2.0).exp())).unwrap();
        assert!(inner_l2(&even, &odd).unwrap().norm() < 1e-10);
    }

    #[test]
    fn shifted_gaussian_overlap() {
        // ∫ g(x) g(x-2) dx = exp(-b²/4σ²) = e^{-1} for unit Gaussians.
        let grid = line();
        let a = make_tilde_delta(&[-1.0], 1.0, &grid).unwrap();
        let b = make_tilde_delta(&[1.0], 1.0, &grid).unwrap();
        let o = inner_l2(&a, &b).unwrap();
        assert!((o.re - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn tilde_delta_peak_and_margin() {
        let g = make_tilde_delta(&[0.0], 1.0, &line()).unwrap();
        let peak = g.values()[600].re;
        assert!((peak - PI.powf(-0.25)).abs() < 1e-12);
        assert!((peak - 0.751126).abs() < 1e-6);
        let err = make_tilde_delta(&[9.0], 1.0, &line()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn inner_l2_rejects_grid_mismatch() {
        let a = StateFunction::zeros(&line());
        let b = StateFunction::zeros(&GridSpec::line(-1.0, 1.0, 32).unwrap());
        assert!(matches!(inner_l2(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn kernel_norm_of_narrow_delta_is_one() {
        // The convolution of two width-ε deltas with exp(-z²/2) is (1+2ε²)^{-1/2}.
        let grid = GridSpec::line(-2.0, 2.0, 321).unwrap();
        let d = make_delta_approx(&[0.0], 0.05, &grid).unwrap();
        let k = KernelSpec::euclid(1.0).unwrap();
        let n = inner_kernel(&d, &d, &k).unwrap().re;
        assert!((n - 1.0).abs() < 5e-3);
        assert!((n - (1.0 + 2.0 * 0.05f64.powi(2)).powf(-0.5)).abs() < 1e-9);
    }

    #[test]
    fn kernel_norm_of_zero_is_zero() {
        let z = StateFunction::zeros(&line());
        let k = KernelSpec::euclid(1.0).unwrap();
        assert_eq!(inner_kernel(&z, &z, &k).unwrap(), c(0.0));
    }

    #[test]
    fn kernel_norm_of_unit_gaussian() {
        // Closed form: π^{-1/2} ∫∫ exp(-(x² + y² - xy)) = π^{-1/2}·2π/√3 = 2√(π/3).
        let grid = GridSpec::line(-10.0, 10.0, 401).unwrap();
        let g = make_tilde_delta(&[0.0], 1.0, &grid).unwrap();
        let k = KernelSpec::euclid(1.0).unwrap();
        let n = inner_kernel(&g, &g, &k).unwrap().re;
        assert!((n - 2.0 * (PI / 3.0).sqrt()).abs() < 1e-9);
        assert!((n - 2.04665).abs() < 1e-5);
    }

    #[test]
    fn kernel_quadrature_converges_at_second_order() {
        // Non-Gaussian smooth integrand with truncated tails, so the trapezoid
        // rule shows its generic h² behaviour.
        let k = KernelSpec::euclid(1.0).unwrap();
        let value = |n: usize| {
            let grid = GridSpec::line(-1.0, 1.0, n).unwrap();
            let f = StateFunction::from_fn(&grid, |p| c(1.0 + p[0] + p[0] * p[0])).unwrap();
            inner_kernel(&f, &f, &k).unwrap().re
        };
        let (a, b, r) = (value(33), value(65), value(129));
        let ratio = (a - b) / (b - r);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn normalized_euclid_kernel_approaches_l2() {
        let grid = GridSpec::line(-8.0, 8.0, 801).unwrap();
        let f = StateFunction::from_fn(&grid, |p| {
            Complex64::new((-p[0] * p[0] / 2.0).exp(), 0.3 * p[0] * (-p[0] * p[0] / 3.0).exp())
        })
        .unwrap();
        let l2 = inner_l2(&f, &f).unwrap().re;
        let mut last = f64::INFINITY;
        for scale in [1.0, 2.0, 4.0, 8.0] {
            let k = KernelSpec::euclid(scale).unwrap();
            let v = inner_kernel(&f, &f, &k).unwrap().re * k.normalization(1);
            let gap = (v - l2).abs() / l2;
            assert!(gap < last, "gap {gap} at L={scale} not below {last}");
            last = gap;
        }
        assert!(last < 2e-2);
    }

    #[test]
    fn indefinite_kernels_need_spacetime_grid() {
        let f = StateFunction::zeros(&line());
        let k = KernelSpec::minkowski(1.0).unwrap();
        assert!(matches!(inner_kernel(&f, &f, &k), Err(Error::Shape(_))));
    }

    #[test]
    fn delta_approx_integrates_to_one() {
        let grid = GridSpec::line(-1.0, 1.0, 201).unwrap();
        let d = make_delta_approx(&[0.1], 0.05, &grid).unwrap();
        let total: f64 = d.values().iter().enumerate().map(|(i, v)| v.re * grid.weight(i)).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(make_delta_approx(&[0.7], 0.05, &grid).is_err());
    }

    fn random_state(grid: &GridSpec, coeffs: &[(f64, f64)]) -> StateFunction {
        StateFunction::from_fn(grid, |p| {
            let x = p[0];
            let env = (-x * x / 2.0).exp();
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &(re, im))| Complex64::new(re, im) * x.powi(k as i32) * env)
                .sum()
        })
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn inner_products_are_hermitian_and_sesquilinear(
            cf in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
            cg in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
            ch in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3),
            alpha in (-2.0f64..2.0, -2.0f64..2.0),
        ) {
            let grid = GridSpec::line(-8.0, 8.0, 161).unwrap();
            let f = random_state(&grid, &cf);
            let g = random_state(&grid, &cg);
            let h = random_state(&grid, &ch);
            let a = Complex64::new(alpha.0, alpha.1);
            let k = KernelSpec::euclid(1.0).unwrap();
            let tol = |x: Complex64, y: Complex64| (x - y).norm() <= 1e-12 * (1.0 + x.norm().max(y.norm()));

            let fg = inner_l2(&f, &g).unwrap();
            prop_assert!(tol(fg, inner_l2(&g, &f).unwrap().conj()));
            let kfg = inner_kernel(&f, &g, &k).unwrap();
            prop_assert!(tol(kfg, inner_kernel(&g, &f, &k).unwrap().conj()));

            let afh = f.combine(a, &h, Complex64::new(1.0, 0.0)).unwrap();
            prop_assert!(tol(inner_l2(&afh, &g).unwrap(), a * fg + inner_l2(&h, &g).unwrap()));
            prop_assert!(tol(inner_l2(&g, &afh).unwrap(), a.conj() * inner_l2(&g, &f).unwrap() + inner_l2(&g, &h).unwrap()));
            prop_assert!(tol(inner_kernel(&afh, &g, &k).unwrap(), a * kfg + inner_kernel(&h, &g, &k).unwrap()));

            let kff = inner_kernel(&f, &f, &k).unwrap();
            prop_assert!(kff.re > 0.0);
        }
    }
}
