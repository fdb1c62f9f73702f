//! Experiment configs: JSON with unknown keys rejected and every error
//! reported at a JSON pointer.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Metric,
    Action,
    Spin,
    Packet,
    Uncertainty,
    Born,
    Diffuse,
    All,
}

impl Experiment {
    pub const SINGLE: [Experiment; 7] = [
        Experiment::Metric,
        Experiment::Action,
        Experiment::Spin,
        Experiment::Packet,
        Experiment::Uncertainty,
        Experiment::Born,
        Experiment::Diffuse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Metric => "metric",
            Experiment::Action => "action",
            Experiment::Spin => "spin",
            Experiment::Packet => "packet",
            Experiment::Uncertainty => "uncertainty",
            Experiment::Born => "born",
            Experiment::Diffuse => "diffuse",
            Experiment::All => "all",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::SINGLE.into_iter().chain([Experiment::All]).find(|e| e.name() == s)
    }

    pub fn criteria(self) -> Vec<u8> {
        match self {
            Experiment::Metric => vec![1, 2],
            Experiment::Action => vec![3, 4],
            Experiment::Spin => vec![5],
            Experiment::Packet => vec![6, 9, 12],
            Experiment::Uncertainty => vec![7, 8],
            Experiment::Born => vec![10],
            Experiment::Diffuse => vec![11],
            Experiment::All => (1..=12).collect(),
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::Metric => "induced metric of the Euclidean kernel; delta-path speed",
            Experiment::Action => "kernel vs reduced actions; Newtonian limit of the curved action",
            Experiment::Spin => "spin-precession paths as geodesics of the energy metric",
            Experiment::Packet => "Schrödinger residual; wave-packet shadows and collapse; free propagator",
            Experiment::Uncertainty => "projective speed and acceleration; uncertainty relations",
            Experiment::Born => "Born probabilities of Gaussian deltas vs the normal law",
            Experiment::Diffuse => "random walk on CP¹ absorbed on classical states",
            Experiment::All => "every experiment above, in order",
        }
    }

    /// The single experiments this one runs.
    pub fn expand(self) -> Vec<Experiment> {
        match self {
            Experiment::All => Self::SINGLE.to_vec(),
            e => vec![e],
        }
    }
}

/// A uniform 1-D grid `{lo, hi, n}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl LineGrid {
    pub const fn new(lo: f64, hi: f64, n: usize) -> Self {
        LineGrid { lo, hi, n }
    }

    pub fn axis(&self) -> Result<crate::grid::Axis> {
        crate::grid::Axis::new(self.lo, self.hi, self.n)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::line(self.lo, self.hi, self.n)
    }

    fn validate(&self, at: &Pointer) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            return Err(at.error("grid needs finite lo < hi"));
        }
        if self.n < GridSpec::MIN_SAMPLES {
            return Err(at.key("n").error(format!("need at least {} samples", GridSpec::MIN_SAMPLES)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricParams {
    pub kernel_scale: f64,
    /// Random points for the induced-metric check.
    pub points: usize,
    pub dim: usize,
    /// Points are drawn uniformly from `[-point_range, point_range]^dim`.
    pub point_range: f64,
    /// Label speed of the straight delta path.
    pub velocity: f64,
    /// Delta widths, coarse to fine.
    pub widths: Vec<f64>,
    pub grid: LineGrid,
    /// Time step of the path derivative.
    pub dt: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            kernel_scale: 1.0,
            points: 10,
            dim: 2,
            point_range: 5.0,
            velocity: 1.5,
            widths: vec![0.2, 0.1, 0.05],
            grid: LineGrid::new(-3.0, 3.0, 481),
            dt: 1e-3,
        }
    }
}

impl MetricParams {
    fn validate(&self, at: &Pointer) -> Result<()> {
        positive(at, "kernel_scale", self.kernel_scale)?;
        positive(at, "point_range", self.point_range)?;
        positive(at, "dt", self.dt)?;
        finite(at, "velocity", self.velocity)?;
        if self.velocity == 0.0 {
            return Err(at.key("velocity").error("velocity must be nonzero for a relative error"));
        }
        if self.points == 0 {
            return Err(at.key("points").error("need at least one point"));
        }
        if !(1..=2).contains(&self.dim) {
            return Err(at.key("dim").error("dimension must be 1 or 2"));
        }
        if self.widths.len() < 2 {
            return Err(at.key("widths").error("need at least two widths to estimate an order"));
        }
        for (i, w) in self.widths.iter().enumerate() {
            if !(*w > 0.0 && w.is_finite()) {
                return Err(at.key("widths").index(i).error("width must be positive"));
            }
            if i > 0 && *w >= self.widths[i - 1] {
                return Err(at.key("widths").index(i).error("widths must decrease"));
            }
        }
        self.grid.validate(&at.key("grid"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionParams {
    /// Random trajectories per kernel kind.
    pub trajectories: usize,
    /// Knots of each random trajectory.
    pub knots: usize,
    pub mass: f64,
    /// Delta width of the kernel route.
    pub eps: f64,
    /// Stiffness of the harmonic potential in the classical action.
    pub stiffness: f64,
    /// Slope of `u` in the curved action.
    pub curved_slope: f64,
    pub classical_grid: LineGrid,
    pub spacetime_space: LineGrid,
    pub spacetime_time: LineGrid,
    /// Field strength of the Newtonian-limit check, `u = g·x`.
    pub g: f64,
    pub duration: f64,
    pub minimize_knots: usize,
    pub ode_dt: f64,
}

impl Default for ActionParams {
    fn default() -> Self {
        ActionParams {
            trajectories: 5,
            knots: 9,
            mass: 1.0,
            eps: 0.05,
            stiffness: 0.2,
            curved_slope: 0.2,
            classical_grid: LineGrid::new(-3.0, 3.0, 241),
            spacetime_space: LineGrid::new(-2.0, 2.0, 161),
            spacetime_time: LineGrid::new(-1.0, 1.0, 81),
            g: 0.5,
            duration: 2.0,
            minimize_knots: crate::action::DEFAULT_KNOTS,
            ode_dt: crate::action::DEFAULT_DT,
        }
    }
}

impl ActionParams {
    fn validate(&self, at: &Pointer) -> Result<()> {
        positive(at, "mass", self.mass)?;
        positive(at, "eps", self.eps)?;
        positive(at, "duration", self.duration)?;
        positive(at, "ode_dt", self.ode_dt)?;
        finite(at, "stiffness", self.stiffness)?;
        finite(at, "curved_slope", self.curved_slope)?;
        finite(at, "g", self.g)?;
        if self.trajectories == 0 {
            return Err(at.key("trajectories").error("need at least one trajectory"));
        }
        if self.knots < 2 {
            return Err(at.key("knots").error("need at least two knots"));
        }
        if self.minimize_knots < 8 {
            return Err(at.key("minimize_knots").error("need at least 8 knots"));
        }
        self.classical_grid.validate(&at.key("classical_grid"))?;
        self.spacetime_space.validate(&at.key("spacetime_space"))?;
        self.spacetime_time.validate(&at.key("spacetime_time"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinParams {
    pub m: f64,
    pub mu_b: f64,
    /// Random initial states for the geodesic check.
    pub states: usize,
    pub delta: f64,
    /// Random perturbation directions per state.
    pub directions: usize,
    /// Window length in fast periods `2π/(M+|μB|)`.
    pub window_periods: f64,
    /// Time steps per fast period.
    pub steps_per_period: usize,
    /// Random states for the K-speed check.
    pub speed_states: usize,
}

impl Default for SpinParams {
    fn default() -> Self {
        SpinParams {
            m: 10.0,
            mu_b: 1.0,
            states: 5,
            delta: 1e-4,
            directions: 16,
            window_periods: 0.5,
            steps_per_period: 1000,
            speed_states: 20,
        }
    }
}

impl SpinParams {
    fn validate(&self, at: &Pointer) -> Result<()> {
        positive(at, "m", self.m)?;
        finite(at, "mu_b", self.mu_b)?;
        if self.mu_b.abs() >= self.m {
            return Err(at.key("mu_b").error("need |mu_b| < m"));
        }
        positive(at, "delta", self.delta)?;
        positive(at, "window_periods", self.window_periods)?;
        if self.steps_per_period < 1000 {
            return Err(at.key("steps_per_period").error("need at least 1000 steps per fast period"));
        }
        if self.states == 0 || self.directions == 0 || self.speed_states == 0 {
            return Err(at.error("states, directions and speed_states must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketExperimentParams {
    pub sigma: f64,
    pub mass: f64,
    pub x0: f64,
    /// `(v0, w)` pairs of the shadow checks.
    pub pairs: Vec<[f64; 2]>,
    pub grid: LineGrid,
    /// Frame spacing of the shadow time derivatives.
    pub shadow_dt: f64,
    pub collapse_t1: f64,
    /// Delta width of the Schrödinger-residual check on `grid`.
    pub theorem_eps: f64,
    pub theorem_tau: f64,
    pub theorem_v0: f64,
    /// Coarser `(n, eps)` levels of the refinement check, coarse to fine.
    pub theorem_ladder: Vec<(usize, f64)>,
    /// `(x, t, y, s)` points of the propagator residual.
    pub propagator_points: Vec<[f64; 4]>,
    /// `(x, t, u, y, s)` points of the group-property check.
    pub group_points: Vec<[f64; 5]>,
    /// Times of the Crank–Nicolson frames written as CSV (first pair).
    pub frame_times: Vec<f64>,
    pub cn_dt: f64,
}

impl Default for PacketExperimentParams {
    fn default() -> Self {
        PacketExperimentParams {
            sigma: 1.0,
            mass: 1.0,
            x0: 0.0,
            pairs: vec![[2.0, 0.0], [0.0, 0.0], [1.0, 0.5], [0.5, -1.0], [-1.0, 1.0]],
            grid: LineGrid::new(crate::packet::DEFAULT_LO, crate::packet::DEFAULT_HI, crate::packet::DEFAULT_N),
            shadow_dt: crate::packet::SHADOW_DT,
            collapse_t1: 0.3,
            theorem_eps: 0.05,
            theorem_tau: 0.5,
            theorem_v0: 1.0,
            theorem_ladder: vec![(512, 0.2), (1024, 0.1)],
            propagator_points: vec![
                [0.5, 1.0, 0.0, 0.0],
                [0.3, 2.0, -0.8, 0.5],
                [-1.0, 0.7, 0.4, 0.2],
                [2.0, 1.5, 0.0, 0.0],
            ],
            group_points: vec![[0.4, 1.0, 0.5, -0.2, 0.0], [-0.3, 1.5, 0.8, 0.6, 0.2]],
            frame_times: vec![0.0, 0.25, 0.5],
            cn_dt: crate::packet::DEFAULT_DT,
        }
    }
}

impl PacketExperimentParams {
    fn validate(&self, at: &Pointer) -> Result<()> {
        positive(at, "sigma", self.sigma)?;
        positive(at, "mass", self.mass)?;
        finite(at, "x0", self.x0)?;
        positive(at, "shadow_dt", self.shadow_dt)?;
        positive(at, "theorem_eps", self.theorem_eps)?;
        positive(at, "cn_dt", self.cn_dt)?;
        finite(at, "theorem_tau", self.theorem_tau)?;
        finite(at, "theorem_v0", self.theorem_v0)?;
        if !(self.collapse_t1 >= 0.0 && self.collapse_t1.is_finite()) {
            return Err(at.key("collapse_t1").error("t1 must be non-negative"));
        }
        if self.pairs.is_empty() {
            return Err(at.key("pairs").error("need at least one (v0, w) pair"));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(at.key("pairs").index(i).error("v0 and w must be finite"));
            }
        }
        for (i, (n, eps)) in self.theorem_ladder.iter().enumerate() {
            if *n < GridSpec::MIN_SAMPLES || !(*eps > 0.0) {
                return Err(at.key("theorem_ladder").index(i).error("level needs n >= 16 and eps > 0"));
            }
        }
        for (i, t) in self.frame_times.iter().enumerate() {
            if !(*t >= 0.0 && t.is_finite()) {
                return Err(at.key("frame_times").index(i).error("frame times must be non-negative"));
            }
        }
        self.grid.validate(&at.key("grid"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyParams {
    /// Random finite-dimensional `(ĥ, φ)` pairs for the kinematics check.
    pub kinematic_cases: usize,
    /// Random `(Â, B̂, φ)` triples for the uncertainty identity.
    pub triples: usize,
    /// Largest dimension of the random finite cases (at least 2).
    pub max_dim: usize,
    pub kinematics_grid: LineGrid,
    /// Centre of the displaced Gaussian in the oscillator case.
    pub oscillator_shift: f64,
    /// Carrier momentum of the free-packet case.
    pub free_momentum: f64,
    /// Step of the finite-difference Fubini–Study speed.
    pub fd_dt: f64,
    pub gaussian_grid: LineGrid,
    pub unitaries: usize,
    pub unitary_grid: LineGrid,
    pub unitary_dt: f64,
    pub unitary_max_steps: usize,
}

impl Default for UncertaintyParams {
    fn default() -> Self {
        UncertaintyParams {
            kinematic_cases: 10,
            triples: 50,
            max_dim: 6,
            kinematics_grid: LineGrid::new(-10.0, 10.0, 8001),
            oscillator_shift: 1.0,
            free_momentum: 1.0,
            fd_dt: 1e-4,
            gaussian_grid: LineGrid::new(-10.0, 10.0, 16385),
            unitaries: 20,
            unitary_grid: LineGrid::new(-20.0, 20.0, 2048),
            unitary_dt: 5e-3,
            unitary_max_steps: 200,
        }
    }
}

impl UncertaintyParams {
    fn validate(&self, at: &Pointer) -> Result<()> {
        positive(at, "fd_dt", self.fd_dt)?;
        positive(at, "unitary_dt", self.unitary_dt)?;
        finite(at, "oscillator_shift", self.oscillator_shift)?;
        finite(at, "free_momentum", self.free_momentum)?;
        if self.max_dim < 2 {
            return Err(at.key("max_dim").error("max_dim must be at least 2"));
        }
        if self.kinematic_cases == 0 || self.triples == 0 || self.unitaries == 0 {
            return Err(at.error("kinematic_cases, triples and unitaries must be positive"));
        }
        if self.unitary_max_steps == 0 {
            return Err(at.key("unitary_max_steps").error("must be positive"));
        }
        self.kinematics_grid.validate(&at.key("kinematics_grid"))?;
        self.gaussian_grid.validate(&at.key("gaussian_grid"))?;
        self.unitary_grid.validate(&at.key("unitary_grid"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BornParams {
    pub sigma: f64,
    pub centre: f64,
    pub points: usize,
    pub grid: LineGrid,
}

impl Default for BornParams {
    fn default() -> Self {
        BornParams {
            sigma: 1.0,
            centre: 0.0,
            points: 21,
            grid: LineGrid::new(crate::packet::DEFAULT_LO, crate::packet::DEFAULT_HI, crate::packet::DEFAULT_N),
        }
    }
}

impl BornParams {
    fn validate(&self, at: &Pointer) -> Result<()> {
        positive(at, "sigma", self.sigma)?;
        finite(at, "centre", self.centre)?;
        if self.points < 2 {
            return Err(at.key("points").error("need at least two sweep points"));
        }
        self.grid.validate(&at.key("grid"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffuseParams {
    pub n_trials: usize,
    pub step_len: f64,
    pub absorb_tol: f64,
    pub max_steps: usize,
    /// Number of modes; the two targets are the first two basis states.
    pub modes: usize,
    /// Born probabilities `cos²ρ` of the first target for the monotonicity scan.
    pub starts: Vec<f64>,
    /// Start of the reported Born comparison.
    pub born_start: f64,
}

impl Default for DiffuseParams {
    fn default() -> Self {
        DiffuseParams {
            n_trials: 10_000,
            step_len: 0.05,
            absorb_tol: 0.05,
            max_steps: 100_000,
            modes: 2,
            starts: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            born_start: 0.8,
        }
    }
}

impl DiffuseParams {
    pub fn walk(&self, seed: u64) -> crate::born::WalkConfig {
        crate::born::WalkConfig {
            step_len: self.step_len,
            max_steps: self.max_steps,
            absorb_tol: self.absorb_tol,
            seed,
            n_trials: self.n_trials,
        }
    }

    fn validate(&self, at: &Pointer) -> Result<()> {
        self.walk(0).validate().map_err(|e| at.error(e.to_string()))?;
        if !(2..=crate::born::MAX_MODES).contains(&self.modes) {
            return Err(at.key("modes").error(format!("modes must lie in 2..={}", crate::born::MAX_MODES)));
        }
        if self.starts.len() < 2 {
            return Err(at.key("starts").error("need at least two starts"));
        }
        for (i, p) in self.starts.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(at.key("starts").index(i).error("start probabilities lie in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.born_start) {
            return Err(at.key("born_start").error("born_start lies in [0, 1]"));
        }
        Ok(())
    }
}

/// Resolved parameters; only the experiments that will run are present.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Parameters {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spin: Option<SpinParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packet: Option<PacketExperimentParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub born: Option<BornParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffuse: Option<DiffuseParams>,
}

pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub parameters: Parameters,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    #[serde(default)]
    parameters: Option<Value>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
}

impl ExperimentConfig {
    /// Defaults for `experiment`.
    pub fn default_for(experiment: Experiment) -> Self {
        let mut parameters = Parameters::default();
        for e in experiment.expand() {
            fill_default(&mut parameters, e);
        }
        ExperimentConfig {
            experiment,
            parameters,
            output_dir: None,
            seed: DEFAULT_SEED,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(e).context(format!("reading {}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config("", format!("invalid JSON: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let raw: RawConfig = parse(&Pointer::root(), value)?;
        let mut parameters = Parameters::default();
        let at = Pointer::root().key("parameters");
        let given = raw.parameters.unwrap_or(Value::Object(Default::default()));
        match raw.experiment {
            Experiment::All => {
                let Value::Object(map) = given else {
                    return Err(at.error("parameters of `all` must be an object keyed by experiment"));
                };
                for (name, v) in map {
                    let e = Experiment::from_name(&name).filter(|e| *e != Experiment::All);
                    let Some(e) = e else {
                        return Err(at.key(&name).error(format!("unknown experiment `{name}`")));
                    };
                    set_params(&mut parameters, e, v, &at.key(&name))?;
                }
                for e in Experiment::SINGLE {
                    fill_default(&mut parameters, e);
                }
            }
            e => set_params(&mut parameters, e, given, &at)?,
        }
        Ok(ExperimentConfig {
            experiment: raw.experiment,
            parameters,
            output_dir: raw.output_dir,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
        })
    }

    /// The resolved config as JSON in the input layout, for the report.
    pub fn echo(&self) -> Value {
        let mut params = serde_json::to_value(&self.parameters).unwrap_or(Value::Null);
        if self.experiment != Experiment::All {
            params = params[self.experiment.name()].take();
        }
        serde_json::json!({
            "experiment": self.experiment,
            "parameters": params,
            "output_dir": self.output_dir,
            "seed": self.seed,
        })
    }
}

fn fill_default(p: &mut Parameters, e: Experiment) {
    match e {
        Experiment::Metric => {
            p.metric.get_or_insert_with(Default::default);
        }
        Experiment::Action => {
            p.action.get_or_insert_with(Default::default);
        }
        Experiment::Spin => {
            p.spin.get_or_insert_with(Default::default);
        }
        Experiment::Packet => {
            p.packet.get_or_insert_with(Default::default);
        }
        Experiment::Uncertainty => {
            p.uncertainty.get_or_insert_with(Default::default);
        }
        Experiment::Born => {
            p.born.get_or_insert_with(Default::default);
        }
        Experiment::Diffuse => {
            p.diffuse.get_or_insert_with(Default::default);
        }
        Experiment::All => {}
    }
}

fn set_params(p: &mut Parameters, e: Experiment, v: Value, at: &Pointer) -> Result<()> {
    match e {
        Experiment::Metric => {
            let x: MetricParams = parse(at, v)?;
            x.validate(at)?;
            p.metric = Some(x);
        }
        Experiment::Action => {
            let x: ActionParams = parse(at, v)?;
            x.validate(at)?;
            p.action = Some(x);
        }
        Experiment::Spin => {
            let x: SpinParams = parse(at, v)?;
            x.validate(at)?;
            p.spin = Some(x);
        }
        Experiment::Packet => {
            let x: PacketExperimentParams = parse(at, v)?;
            x.validate(at)?;
            p.packet = Some(x);
        }
        Experiment::Uncertainty => {
            let x: UncertaintyParams = parse(at, v)?;
            x.validate(at)?;
            p.uncertainty = Some(x);
        }
        Experiment::Born => {
            let x: BornParams = parse(at, v)?;
            x.validate(at)?;
            p.born = Some(x);
        }
        Experiment::Diffuse => {
            let x: DiffuseParams = parse(at, v)?;
            x.validate(at)?;
            p.diffuse = Some(x);
        }
        Experiment::All => unreachable!("`all` is expanded by the caller"),
    }
    Ok(())
}

/// A JSON pointer under construction (RFC 6901 escaping).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pointer(String);

impl Pointer {
    pub fn root() -> Self {
        Pointer(String::new())
    }

    pub fn key(&self, k: &str) -> Self {
        Pointer(format!("{}/{}", self.0, k.replace('~', "~0").replace('/', "~1")))
    }

    pub fn index(&self, i: usize) -> Self {
        Pointer(format!("{}/{i}", self.0))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::config(self.0.clone(), message)
    }
}

fn parse<T: DeserializeOwned>(at: &Pointer, v: Value) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let mut ptr = at.clone();
        for seg in e.path().iter() {
            use serde_path_to_error::Segment;
            ptr = match seg {
                Segment::Seq { index } => ptr.index(*index),
                Segment::Map { key } => ptr.key(key),
                Segment::Enum { variant } => ptr.key(variant),
                Segment::Unknown => ptr,
            };
        }
        let message = e.into_inner().to_string();
        if let Some(field) = unknown_field(&message) {
            if !ptr.as_str().ends_with(&format!("/{field}")) {
                ptr = ptr.key(field);
            }
        }
        ptr.error(message)
    })
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

fn positive(at: &Pointer, key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(at.key(key).error(format!("{key} must be positive and finite, got {v}")))
    }
}

fn finite(at: &Pointer, key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(at.key(key).error(format!("{key} must be finite")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pointer_of(text: &str) -> String {
        match ExperimentConfig::from_json_str(text) {
            Err(Error::Config { pointer, .. }) => pointer,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_json_str(r#"{"experiment": "born"}"#).unwrap();
        assert_eq!(c.parameters.born, Some(BornParams::default()));
        assert!(c.parameters.metric.is_none());
        assert_eq!(c.seed, DEFAULT_SEED);
    }

    #[test]
    fn all_fills_every_experiment() {
        let c = ExperimentConfig::from_json_str(r#"{"experiment": "all", "parameters": {"born": {"points": 5}}}"#).unwrap();
        assert_eq!(c.parameters.born.as_ref().unwrap().points, 5);
        assert!(c.parameters.diffuse.is_some() && c.parameters.metric.is_some());
    }

    #[test]
    fn negative_sigma_points_at_the_field() {
        assert_eq!(pointer_of(r#"{"experiment": "born", "parameters": {"sigma": -1}}"#), "/parameters/sigma");
        assert_eq!(
            pointer_of(r#"{"experiment": "all", "parameters": {"packet": {"sigma": -1}}}"#),
            "/parameters/packet/sigma"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert_eq!(pointer_of(r#"{"experiment": "born", "colour": 1}"#), "/colour");
        assert_eq!(pointer_of(r#"{"experiment": "born", "parameters": {"sigmaa": 1}}"#), "/parameters/sigmaa");
        assert_eq!(pointer_of(r#"{"experiment": "all", "parameters": {"optics": {}}}"#), "/parameters/optics");
        assert_eq!(
            pointer_of(r#"{"experiment": "metric", "parameters": {"grid": {"lo": 0, "hi": 1, "n": 20, "m": 1}}}"#),
            "/parameters/grid/m"
        );
    }

    #[test]
    fn type_errors_carry_array_indices() {
        assert_eq!(
            pointer_of(r#"{"experiment": "metric", "parameters": {"widths": [0.2, "x"]}}"#),
            "/parameters/widths/1"
        );
        assert_eq!(pointer_of(r#"{"experiment": "metric", "parameters": {"widths": [0.1, 0.2]}}"#), "/parameters/widths/1");
    }

    #[test]
    fn unknown_experiment_and_bad_json() {
        assert_eq!(pointer_of(r#"{"experiment": "optics"}"#), "/experiment");
        assert_eq!(pointer_of("{"), "");
    }

    #[test]
    fn echo_round_trips_through_the_parser() {
        for e in Experiment::SINGLE.into_iter().chain([Experiment::All]) {
            let c = ExperimentConfig::default_for(e);
            let echo = c.echo();
            assert_eq!(ExperimentConfig::from_value(echo).unwrap(), c, "{}", e.name());
        }
    }

    #[test]
    fn pointer_escaping() {
        assert_eq!(Pointer::root().key("a/b").key("c~d").index(2).as_str(), "/a~1b/c~0d/2");
    }
}
