//! Metrics induced by a kernel on the manifold of delta states, speeds of
//! delta paths, and the sign structure of the Minkowski (Krein) product.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, numeric, Error, Result};
use crate::grid::{inner_kernel, make_delta_approx, GridSpec, KernelKind, KernelSpec, StateFunction};

/// Mixed second derivatives `∂²k/∂xᵘ∂yᵛ` of a kernel at `x = y = a`.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedMetric {
    pub point: Vec<f64>,
    pub kind: KernelKind,
    /// Raw mixed-derivative matrix. For the Minkowski kernel this is
    /// `diag(+L², -L²)` (space, time).
    pub raw: DMatrix<f64>,
}

impl InducedMetric {
    /// The metric used for reporting squared lengths. For indefinite kernels
    /// this is `-raw`, so that timelike paths have positive square length
    /// `(1+2u)dt² - dx²`; for the Euclidean kernel it is `raw`.
    pub fn reported(&self) -> DMatrix<f64> {
        match self.kind {
            KernelKind::Euclid => self.raw.clone(),
            _ => -self.raw.clone(),
        }
    }

    pub fn raw_square(&self, v: &[f64]) -> f64 {
        quadratic(&self.raw, v)
    }

    pub fn reported_square(&self, v: &[f64]) -> f64 {
        quadratic(&self.reported(), v)
    }
}

fn quadratic(g: &DMatrix<f64>, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += g[(i, j)] * v[i] * v[j];
        }
    }
    s
}

/// Analytic induced metric at `a`. Points are `[x]`/`[x, y]` for the
/// Euclidean kernel and `[x, t]` for the space-time kernels.
pub fn induced_metric(k: &KernelSpec, a: &[f64]) -> Result<InducedMetric> {
    let d = a.len();
    if d == 0 || d > 2 {
        return Err(Error::Shape(format!("point dimension must be 1 or 2, got {d}")));
    }
    k.check_dim(d)?;
    let l2 = k.scale() * k.scale();
    let raw = match k.kind() {
        KernelKind::Euclid => DMatrix::identity(d, d) * l2,
        KernelKind::Minkowski => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![l2, -l2])),
        KernelKind::Curved => {
            let u = k.potential().value(a[0]);
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![l2, -l2 * (1.0 + 2.0 * u)]))
        }
    };
    Ok(InducedMetric {
        point: a.to_vec(),
        kind: k.kind(),
        raw,
    })
}

/// A path `τ ↦ a(τ)` of delta-state labels, realized with unit-integral
/// Gaussians of width `eps` and differenced with step `dt`.
#[derive(Clone)]
pub struct DeltaPath {
    label: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    pub eps: f64,
    pub dt: f64,
    pub grid: GridSpec,
}

impl std::fmt::Debug for DeltaPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeltaPath")
            .field("eps", &self.eps)
            .field("dt", &self.dt)
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

impl DeltaPath {
    pub fn new(
        label: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        eps: f64,
        dt: f64,
        grid: GridSpec,
    ) -> Result<Self> {
        if !(eps > 0.0 && dt > 0.0) {
            return Err(domain("delta width and time step must be positive"));
        }
        Ok(DeltaPath {
            label: Arc::new(label),
            eps,
            dt,
            grid,
        })
    }

    /// `a(τ) = a0 + v τ`.
    pub fn straight(a0: Vec<f64>, v: Vec<f64>, eps: f64, dt: f64, grid: GridSpec) -> Result<Self> {
        if a0.len() != v.len() {
            return Err(Error::Shape("start and velocity differ in dimension".into()));
        }
        Self::new(
            move |t| a0.iter().zip(&v).map(|(a, b)| a + b * t).collect(),
            eps,
            dt,
            grid,
        )
    }

    pub fn label(&self, t: f64) -> Vec<f64> {
        (self.label)(t)
    }

    pub fn state(&self, t: f64) -> Result<StateFunction> {
        make_delta_approx(&self.label(t), self.eps, &self.grid)
    }

    /// Central difference `(φ(t+dt) - φ(t-dt)) / 2dt`.
    pub fn velocity(&self, t: f64) -> Result<StateFunction> {
        let fwd = self.state(t + self.dt)?;
        let bwd = self.state(t - self.dt)?;
        let c = Complex64::new(0.5 / self.dt, 0.0);
        fwd.combine(c, &bwd, -c)
    }

    /// Classical velocity of the label, by the same central difference.
    pub fn label_velocity(&self, t: f64) -> Vec<f64> {
        let a = self.label(t + self.dt);
        let b = self.label(t - self.dt);
        a.iter().zip(&b).map(|(p, q)| (p - q) / (2.0 * self.dt)).collect()
    }
}

/// Raw squared kernel norm `(dφ/dt, dφ/dt)` of the delta path velocity.
/// Negative for timelike paths under the Minkowski kernel.
pub fn delta_path_raw_square(k: &KernelSpec, path: &DeltaPath, t: f64) -> Result<f64> {
    let v = path.velocity(t)?;
    Ok(inner_kernel(&v, &v, k)?.re)
}

/// Squared speed in the reported sign convention (see [`InducedMetric::reported`]).
pub fn delta_path_square(k: &KernelSpec, path: &DeltaPath, t: f64) -> Result<f64> {
    let raw = delta_path_raw_square(k, path, t)?;
    Ok(if k.is_indefinite() { -raw } else { raw })
}

/// `‖dφ/dt‖`, the square root of the magnitude of the squared speed.
pub fn delta_path_speed(k: &KernelSpec, path: &DeltaPath, t: f64) -> Result<f64> {
    Ok(delta_path_raw_square(k, path, t)?.abs().sqrt())
}

/// Relative change above which [`krein_sign`] declares the quadrature unconverged.
pub const KREIN_CONVERGENCE_TOL: f64 = 1e-3;

/// `(f, f)` under the unit-scale Minkowski kernel on a 1+1-D grid.
///
/// The value is recomputed on the grid with its outer tenth in time removed
/// and, when the sample counts allow, on every second sample. A relative
/// change above [`KREIN_CONVERGENCE_TOL`] means the double integral does not
/// converge for this `f` and is reported as a numeric error.
pub fn krein_sign(f: &StateFunction) -> Result<f64> {
    let grid = f.grid();
    if grid.dim() != 2 {
        return Err(Error::Shape("the Minkowski product needs a 1+1-D grid".into()));
    }
    let k = KernelSpec::minkowski(1.0)?;
    let full = inner_kernel(f, f, &k)?.re;
    if f.values().iter().all(|v| v.norm() == 0.0) {
        return Ok(0.0);
    }
    let mut variants = vec![trim_time(f)?];
    if let Some(coarse) = coarsen(f)? {
        variants.push(coarse);
    }
    for g in &variants {
        let v = inner_kernel(g, g, &k)?.re;
        let rel = (v - full).abs() / full.abs().max(f64::MIN_POSITIVE);
        if !rel.is_finite() || rel > KREIN_CONVERGENCE_TOL {
            return Err(numeric(format!(
                "Minkowski norm does not converge under refinement: {full:e} vs {v:e}"
            )));
        }
    }
    Ok(full)
}

fn trim_time(f: &StateFunction) -> Result<StateFunction> {
    let grid = f.grid();
    let (xs, ts) = (*grid.axis(0), *grid.axis(1));
    let cut = (ts.n / 10).max(1);
    let new_t = crate::grid::Axis::new(ts.coord(cut), ts.coord(ts.n - 1 - cut), ts.n - 2 * cut)?;
    let g = GridSpec::plane(xs, new_t)?;
    let mut values = Vec::with_capacity(g.len());
    for i in 0..xs.n {
        for j in cut..ts.n - cut {
            values.push(f.values()[grid.flat(i, j)]);
        }
    }
    StateFunction::new(g, values)
}

fn coarsen(f: &StateFunction) -> Result<Option<StateFunction>> {
    let grid = f.grid();
    let (xs, ts) = (*grid.axis(0), *grid.axis(1));
    if xs.n % 2 == 0 || ts.n % 2 == 0 || xs.n / 2 + 1 < GridSpec::MIN_SAMPLES || ts.n / 2 + 1 < GridSpec::MIN_SAMPLES {
        return Ok(None);
    }
    let nx = xs.n / 2 + 1;
    let nt = ts.n / 2 + 1;
    let g = GridSpec::plane(
        crate::grid::Axis::new(xs.lo, xs.hi, nx)?,
        crate::grid::Axis::new(ts.lo, ts.hi, nt)?,
    )?;
    let mut values = Vec::with_capacity(g.len());
    for i in 0..nx {
        for j in 0..nt {
            values.push(f.values()[grid.flat(2 * i, 2 * j)]);
        }
    }
    Ok(Some(StateFunction::new(g, values)?))
}

/// Labels of `ω(a) ⊕ ω(b) = ω(a + b)` and `λ ⊙ ω(a) = ω(λa)`, checked to lie
/// inside the grid.
pub fn manifold_vector_ops(a: &[f64], b: &[f64], lambda: f64, grid: &GridSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != b.len() {
        return Err(Error::Shape("labels differ in dimension".into()));
    }
    let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let scaled: Vec<f64> = a.iter().map(|x| lambda * x).collect();
    grid.check_inside(&sum, 0.0)?;
    grid.check_inside(&scaled, 0.0)?;
    Ok((sum, scaled))
}
