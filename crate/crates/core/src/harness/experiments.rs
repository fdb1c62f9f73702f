//! Dispatch from a config to the criteria, and persistence of the results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::checks;
use super::config::{Experiment, ExperimentConfig};
use super::report::{version_string, CriterionOutcome, Report};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    pub out_dir: Option<PathBuf>,
    /// Trial-level parallelism in the diffusion experiment.
    pub parallel_trials: bool,
}

pub const DEFAULT_OUTPUT_ROOT: &str = "results";

/// `flag` (CLI or environment) if given, else the config's `output_dir`,
/// else `results/<experiment>`.
pub fn resolve_output_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| Path::new(DEFAULT_OUTPUT_ROOT).join(config.experiment.name()))
}

fn missing(e: Experiment) -> Error {
    Error::config("/parameters", format!("no parameters resolved for `{}`", e.name()))
}

/// Runs criterion `id` with the parameters in `config`.
pub fn run_criterion(config: &ExperimentConfig, id: u8, seed: u64, parallel_trials: bool) -> Result<CriterionOutcome> {
    let p = &config.parameters;
    let res = match id {
        1 => checks::criterion_1(p.metric.as_ref().ok_or(missing(Experiment::Metric))?, seed),
        2 => checks::criterion_2(p.metric.as_ref().ok_or(missing(Experiment::Metric))?),
        3 => checks::criterion_3(p.action.as_ref().ok_or(missing(Experiment::Action))?, seed),
        4 => checks::criterion_4(p.action.as_ref().ok_or(missing(Experiment::Action))?),
        5 => checks::criterion_5(p.spin.as_ref().ok_or(missing(Experiment::Spin))?, seed),
        6 => checks::criterion_6(p.packet.as_ref().ok_or(missing(Experiment::Packet))?),
        7 => checks::criterion_7(p.uncertainty.as_ref().ok_or(missing(Experiment::Uncertainty))?, seed),
        8 => checks::criterion_8(p.uncertainty.as_ref().ok_or(missing(Experiment::Uncertainty))?, seed),
        9 => checks::criterion_9(p.packet.as_ref().ok_or(missing(Experiment::Packet))?, seed),
        10 => checks::criterion_10(p.born.as_ref().ok_or(missing(Experiment::Born))?),
        11 => checks::criterion_11(p.diffuse.as_ref().ok_or(missing(Experiment::Diffuse))?, seed, parallel_trials),
        12 => checks::criterion_12(p.packet.as_ref().ok_or(missing(Experiment::Packet))?),
        _ => return Err(Error::config("/experiment", format!("no criterion {id}"))),
    };
    res.map_err(|e| e.context(format!("criterion {id} ({})", checks::TITLES[id as usize - 1])))
}

/// Criteria of `config` in order, without writing anything. `progress` is
/// called after each criterion.
pub fn execute(
    config: &ExperimentConfig,
    opts: &RunOptions,
    mut progress: impl FnMut(&CriterionOutcome),
) -> Result<(Vec<CriterionOutcome>, BTreeMap<String, f64>)> {
    let seed = opts.seed.unwrap_or(config.seed);
    let mut outcomes = Vec::new();
    let mut clock = BTreeMap::new();
    for e in config.experiment.expand() {
        for id in e.criteria() {
            let start = Instant::now();
            let o = run_criterion(config, id, seed, opts.parallel_trials)
                .map_err(|err| err.context(format!("experiment {}", e.name())))?;
            clock.insert(format!("criterion_{id:02}"), start.elapsed().as_secs_f64());
            progress(&o);
            outcomes.push(o);
        }
    }
    Ok((outcomes, clock))
}

/// Output of [`run`].
#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    pub dir: PathBuf,
}

/// Runs `config`, writing `report.json` and the CSV tables into the output
/// directory.
pub fn run(config: &ExperimentConfig, opts: &RunOptions, progress: impl FnMut(&CriterionOutcome)) -> Result<RunOutput> {
    let dir = resolve_output_dir(opts.out_dir.as_deref(), config);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(e).context(format!("creating {}", dir.display())))?;
    let seed = opts.seed.unwrap_or(config.seed);
    let (criteria, wall_clock) = execute(config, opts, progress)?;
    let mut tables = Vec::new();
    for o in &criteria {
        for t in &o.tables {
            t.write(&dir).map_err(|e| e.context(format!("writing {}", t.file)))?;
            tables.push(t.file.clone());
        }
    }
    let mut echo = config.echo();
    echo["seed"] = seed.into();
    echo["output_dir"] = serde_json::Value::Null;
    let report = Report {
        experiment: config.experiment.name().to_string(),
        version: version_string(),
        seed,
        config: echo,
        passed: criteria.iter().all(|c| c.pass),
        criteria,
        tables,
        wall_clock,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(dir.join("report.json"), text).map_err(|e| Error::Io(e).context("writing report.json"))?;
    Ok(RunOutput { report, dir })
}

/// Process exit status for an error: 2 for config and I/O problems, 3 for
/// numerical and module errors.
pub fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Config { .. } | Error::Io(_) | Error::Json(_) => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_dir_precedence() {
        let mut c = ExperimentConfig::default_for(Experiment::Born);
        assert_eq!(resolve_output_dir(None, &c), Path::new("results/born"));
        c.output_dir = Some("from_config".into());
        assert_eq!(resolve_output_dir(None, &c), Path::new("from_config"));
        assert_eq!(resolve_output_dir(Some(Path::new("flag")), &c), Path::new("flag"));
    }

    #[test]
    fn exit_codes_follow_the_root_error() {
        assert_eq!(exit_code(&Error::config("/x", "bad").context("outer")), 2);
        assert_eq!(exit_code(&Error::Numeric("nan".into()).context("criterion 1")), 3);
        assert_eq!(exit_code(&Error::NoRealRoot("t1".into())), 3);
    }

    #[test]
    fn unknown_criterion_is_a_config_error() {
        let c = ExperimentConfig::default_for(Experiment::Born);
        assert_eq!(exit_code(&run_criterion(&c, 13, 1, false).unwrap_err()), 2);
        assert_eq!(exit_code(&run_criterion(&c, 1, 1, false).unwrap_err()), 2);
    }
}
