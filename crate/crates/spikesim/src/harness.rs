//! Experiment configuration, batch execution, benchmarking, and file
//! emission.
//!
//! Configs are flat `key = value` text grouped under `[model]`, `[current]`,
//! `[init]`, `[solver]` and `[outputs]` section headers, with optional
//! `seed` and `repeat` keys in a preamble or a `[run]` section. Every key
//! has a documented default; an empty document runs the stock bursting
//! experiment. Unknown keys and sections are rejected with line numbers.
//!
//! Emitted files: trajectory CSV (`t,v,w,branch`), spike CSV
//! (`index,spike_time,w_at_spike`), error-sweep CSV
//! (`theta,tau,spike_time_error,w_error`) and a JSON report that echoes the
//! solver configuration. Spike CSVs are byte-identical across reruns of the
//! same config.

use std::collections::HashMap;
use std::env;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::error_analysis::measure_empirical_error;
use crate::integrate::{
    simulate, Scheme, SimState, SolverConfig, SpikeDetection, SpikeEvent, SpikeTrain,
    TrajectoryPoint,
};
use crate::model::{InputCurrent, ModelSpec, Nonlinearity};
use crate::spiketrain::{
    classify_pattern, default_tolerance, default_transient_skip, reset_sequence,
};

/// Relative output paths resolve against this directory when it is set.
pub const OUTPUT_DIR_ENV: &str = "SPIKESIM_OUTPUT_DIR";

pub const DEFAULT_MAX_PERIOD: u32 = 8;

/// Output file selection; everything is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub trajectory_path: Option<PathBuf>,
    pub spikes_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    /// Keep every `stride`-th trajectory sample (the last one always).
    pub stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            trajectory_path: None,
            spikes_path: None,
            report_path: None,
            stride: 1,
        }
    }
}

/// One fully specified experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub current: InputCurrent,
    pub init: SimState,
    pub solver: SolverConfig,
    pub outputs: OutputSpec,
    /// Seed for randomized suites built on top of the harness.
    pub seed: u64,
    /// Wall-clock timing repetitions.
    pub repeat: u32,
}

impl ExperimentConfig {
    /// Stock bursting experiment: every config key defaults to this.
    pub fn stock() -> Self {
        ExperimentConfig {
            model: ModelSpec {
                kind: Nonlinearity::QuadraticIzhikevich {
                    p2: 0.04,
                    p1: 5.0,
                    p0: 140.0,
                },
                a: 0.02,
                b: 0.19,
                v_reset: -59.9,
                w_jump: 1.15,
            },
            current: InputCurrent::Constant { value: 7.6 },
            init: SimState::new(0.0, -65.0, -12.35),
            solver: SolverConfig::new(Scheme::Euler, 30.0),
            outputs: OutputSpec::default(),
            seed: 0,
            repeat: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.current.validate()?;
        self.solver.validate(&self.model)?;
        if !self.init.is_finite() {
            return Err(Error::ConfigInvalid(
                "initial state must be finite".into(),
            ));
        }
        if self.repeat < 1 {
            return Err(Error::ConfigInvalid("repeat must be >= 1".into()));
        }
        if self.outputs.stride < 1 {
            return Err(Error::ConfigInvalid("stride must be >= 1".into()));
        }
        let paths: Vec<&PathBuf> = [
            self.outputs.trajectory_path.as_ref(),
            self.outputs.spikes_path.as_ref(),
            self.outputs.report_path.as_ref(),
        ]
        .into_iter()
        .flatten()
        .collect();
        for i in 0..paths.len() {
            for j in i + 1..paths.len() {
                if paths[i] == paths[j] {
                    return Err(Error::ConfigInvalid(format!(
                        "output paths must be distinct, `{}` repeats",
                        paths[i].display()
                    )));
                }
            }
        }
        Ok(())
    }
}

// --- config parsing ----------------------------------------------------------

const SECTIONS: [&str; 7] = ["run", "model", "current", "init", "solver", "outputs", ""];

struct KeyBag {
    section: String,
    entries: HashMap<String, (usize, String)>,
}

impl KeyBag {
    fn new(section: &str) -> Self {
        KeyBag {
            section: section.to_string(),
            entries: HashMap::new(),
        }
    }

    fn insert(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        if self
            .entries
            .insert(key.to_string(), (line, value.to_string()))
            .is_some()
        {
            return Err(Error::ConfigParse {
                line,
                reason: format!("duplicate key `{key}`"),
            });
        }
        Ok(())
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<T>().map(Some).map_err(|_| Error::ConfigParse {
                line,
                reason: format!("invalid value `{value}` for key `{key}`"),
            }),
        }
    }

    fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, value)) => value
                .split(',')
                .map(|piece| {
                    piece.trim().parse::<f64>().map_err(|_| Error::ConfigParse {
                        line,
                        reason: format!("invalid number `{}` in list `{key}`", piece.trim()),
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().min_by_key(|(_, (l, _))| *l) {
            let section = if self.section.is_empty() {
                "the preamble".to_string()
            } else {
                format!("[{}]", self.section)
            };
            return Err(Error::ConfigParse {
                line,
                reason: format!("unknown key `{key}` in {section}"),
            });
        }
        Ok(())
    }
}

fn split_into_bags(text: &str) -> Result<HashMap<String, KeyBag>> {
    let mut bags: HashMap<String, KeyBag> = HashMap::new();
    let mut current = String::new();
    bags.insert(current.clone(), KeyBag::new(""));
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner.strip_suffix(']').ok_or(Error::ConfigParse {
                line: line_no,
                reason: "section header must close with `]`".into(),
            })?;
            let name = name.trim().to_ascii_lowercase();
            if !SECTIONS.contains(&name.as_str()) || name.is_empty() {
                return Err(Error::ConfigParse {
                    line: line_no,
                    reason: format!("unknown section `[{name}]`"),
                });
            }
            if bags.contains_key(&name) {
                return Err(Error::ConfigParse {
                    line: line_no,
                    reason: format!("section `[{name}]` appears twice"),
                });
            }
            current = name.clone();
            bags.insert(name.clone(), KeyBag::new(&name));
        } else if let Some((key, value)) = line.split_once('=') {
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(Error::ConfigParse {
                    line: line_no,
                    reason: "expected `key = value` with both sides nonempty".into(),
                });
            }
            bags.get_mut(&current)
                .expect("current section always present")
                .insert(line_no, &key, value)?;
        } else {
            return Err(Error::ConfigParse {
                line: line_no,
                reason: format!("expected `key = value` or a section header, got `{line}`"),
            });
        }
    }
    Ok(bags)
}

fn parse_model(bag: &mut KeyBag) -> Result<ModelSpec> {
    let stock = ExperimentConfig::stock().model;
    let kind = match bag.take_raw("kind") {
        None => stock.kind,
        Some((line, value)) => match value.as_str() {
            "quadratic-izhikevich" => Nonlinearity::QuadraticIzhikevich {
                p2: 0.04,
                p1: 5.0,
                p0: 140.0,
            },
            "canonical-quadratic" => Nonlinearity::CanonicalQuadratic,
            "quartic" => Nonlinearity::Quartic { alpha: 1.0 },
            "exponential" => Nonlinearity::Exponential,
            other => {
                return Err(Error::ConfigParse {
                    line,
                    reason: format!(
                        "unknown kind `{other}`; expected quadratic-izhikevich, \
                         canonical-quadratic, quartic or exponential"
                    ),
                })
            }
        },
    };
    let kind = match kind {
        Nonlinearity::QuadraticIzhikevich { p2, p1, p0 } => Nonlinearity::QuadraticIzhikevich {
            p2: bag.take::<f64>("p2")?.unwrap_or(p2),
            p1: bag.take::<f64>("p1")?.unwrap_or(p1),
            p0: bag.take::<f64>("p0")?.unwrap_or(p0),
        },
        Nonlinearity::Quartic { alpha } => Nonlinearity::Quartic {
            alpha: bag.take::<f64>("alpha")?.unwrap_or(alpha),
        },
        other => other,
    };
    Ok(ModelSpec {
        kind,
        a: bag.take::<f64>("a")?.unwrap_or(stock.a),
        b: bag.take::<f64>("b")?.unwrap_or(stock.b),
        v_reset: bag.take::<f64>("v_reset")?.unwrap_or(stock.v_reset),
        w_jump: bag.take::<f64>("w_jump")?.unwrap_or(stock.w_jump),
    })
}

fn parse_current(bag: &mut KeyBag) -> Result<InputCurrent> {
    let kind = bag.take_raw("type");
    match kind {
        None => Ok(InputCurrent::Constant {
            value: bag.take::<f64>("value")?.unwrap_or(7.6),
        }),
        Some((line, value)) => match value.as_str() {
            "constant" => Ok(InputCurrent::Constant {
                value: bag.take::<f64>("value")?.unwrap_or(7.6),
            }),
            "piecewise" => {
                let jumps = bag.take_list("jumps")?.ok_or(Error::ConfigParse {
                    line,
                    reason: "piecewise current needs `jumps`".into(),
                })?;
                let values = bag.take_list("values")?.ok_or(Error::ConfigParse {
                    line,
                    reason: "piecewise current needs `values`".into(),
                })?;
                Ok(InputCurrent::PiecewiseConstant { jumps, values })
            }
            "sum-of-steps" => {
                let base = bag.take::<f64>("base")?.unwrap_or(0.0);
                let onsets = bag.take_list("onsets")?.unwrap_or_default();
                let amplitudes = bag.take_list("amplitudes")?.unwrap_or_default();
                Ok(InputCurrent::SumOfSteps {
                    base,
                    onsets,
                    amplitudes,
                })
            }
            other => Err(Error::ConfigParse {
                line,
                reason: format!(
                    "unknown current type `{other}`; expected constant, piecewise or sum-of-steps"
                ),
            }),
        },
    }
}

fn parse_solver(bag: &mut KeyBag) -> Result<SolverConfig> {
    let scheme = match bag.take_raw("scheme") {
        None => Scheme::Euler,
        Some((line, value)) => match value.as_str() {
            "euler" => Scheme::Euler,
            "hybrid-fixed" => Scheme::HybridFixed,
            "hybrid-adaptive" => Scheme::HybridAdaptive,
            "oracle" => Scheme::Oracle,
            other => {
                return Err(Error::ConfigParse {
                    line,
                    reason: format!(
                        "unknown scheme `{other}`; expected euler, hybrid-fixed, \
                         hybrid-adaptive or oracle"
                    ),
                })
            }
        },
    };
    let mut solver = SolverConfig::new(scheme, 30.0);
    if let Some(theta) = bag.take::<f64>("theta")? {
        solver.theta = theta;
    }
    if let Some(x) = bag.take::<f64>("m_switch")? {
        solver.m_switch = x;
    }
    if let Some(x) = bag.take::<f64>("dt")? {
        solver.dt = x;
    }
    if let Some(x) = bag.take::<f64>("dv")? {
        solver.dv = x;
    }
    if let Some(x) = bag.take::<f64>("epsilon")? {
        solver.epsilon = x;
    }
    if let Some(x) = bag.take::<f64>("dt_cap")? {
        solver.dt_cap = x;
    }
    if let Some(x) = bag.take::<f64>("dv_cap")? {
        solver.dv_cap = x;
    }
    if let Some(x) = bag.take::<f64>("oracle_tol")? {
        solver.oracle_tol = x;
    }
    if let Some(x) = bag.take::<f64>("t_end")? {
        solver.t_end = x;
    }
    if let Some((line, value)) = bag.take_raw("spike_detection") {
        solver.spike_detection = match value.as_str() {
            "first-exceedance" => SpikeDetection::FirstExceedance,
            "linear-interp" => SpikeDetection::LinearInterp,
            other => {
                return Err(Error::ConfigParse {
                    line,
                    reason: format!(
                        "unknown spike_detection `{other}`; expected first-exceedance \
                         or linear-interp"
                    ),
                })
            }
        };
    }
    Ok(solver)
}

fn parse_outputs(bag: &mut KeyBag) -> Result<OutputSpec> {
    let mut outputs = OutputSpec::default();
    if let Some((_, p)) = bag.take_raw("trajectory") {
        outputs.trajectory_path = Some(PathBuf::from(p));
    }
    if let Some((_, p)) = bag.take_raw("spikes") {
        outputs.spikes_path = Some(PathBuf::from(p));
    }
    if let Some((_, p)) = bag.take_raw("report") {
        outputs.report_path = Some(PathBuf::from(p));
    }
    if let Some(stride) = bag.take::<usize>("stride")? {
        outputs.stride = stride;
    }
    Ok(outputs)
}

/// Parse and fully validate a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut bags = split_into_bags(text)?;
    let mut config = ExperimentConfig::stock();

    let mut preamble = bags.remove("").expect("preamble always present");
    let mut run = bags.remove("run").unwrap_or_else(|| KeyBag::new("run"));
    if let Some(seed) = preamble.take::<u64>("seed")? {
        config.seed = seed;
    }
    if let Some(seed) = run.take::<u64>("seed")? {
        config.seed = seed;
    }
    if let Some(repeat) = preamble.take::<u32>("repeat")? {
        config.repeat = repeat;
    }
    if let Some(repeat) = run.take::<u32>("repeat")? {
        config.repeat = repeat;
    }
    preamble.finish()?;
    run.finish()?;

    if let Some(mut bag) = bags.remove("model") {
        config.model = parse_model(&mut bag)?;
        bag.finish()?;
    }
    if let Some(mut bag) = bags.remove("current") {
        config.current = parse_current(&mut bag)?;
        bag.finish()?;
    }
    if let Some(mut bag) = bags.remove("init") {
        let t = bag.take::<f64>("t")?.unwrap_or(config.init.t);
        let v = bag.take::<f64>("v")?.unwrap_or(config.init.v);
        let w = bag.take::<f64>("w")?.unwrap_or(config.init.w);
        config.init = SimState::new(t, v, w);
        bag.finish()?;
    }
    if let Some(mut bag) = bags.remove("solver") {
        config.solver = parse_solver(&mut bag)?;
        bag.finish()?;
    }
    if let Some(mut bag) = bags.remove("outputs") {
        config.outputs = parse_outputs(&mut bag)?;
        bag.finish()?;
    }
    config.validate()?;
    Ok(config)
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

// --- reports and file emission -----------------------------------------------

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SolverEcho {
    pub scheme: String,
    pub theta: f64,
    pub m_switch: f64,
    pub dt: f64,
    pub dv: f64,
    pub epsilon: f64,
    pub dt_cap: f64,
    pub dv_cap: f64,
    pub oracle_tol: f64,
    pub t_end: f64,
    pub spike_detection: String,
}

impl SolverEcho {
    pub fn from_config(solver: &SolverConfig) -> Self {
        SolverEcho {
            scheme: solver.scheme.name().to_string(),
            theta: solver.theta,
            m_switch: solver.m_switch,
            dt: solver.dt,
            dv: solver.dv,
            epsilon: solver.epsilon,
            dt_cap: solver.dt_cap,
            dv_cap: solver.dv_cap,
            oracle_tol: solver.oracle_tol,
            t_end: solver.t_end,
            spike_detection: match solver.spike_detection {
                SpikeDetection::FirstExceedance => "first-exceedance".to_string(),
                SpikeDetection::LinearInterp => "linear-interp".to_string(),
            },
        }
    }
}

/// Classification summary with the tolerances that produced it.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PatternSummary {
    pub label: String,
    pub period: Option<u32>,
    pub residual: f64,
    pub tolerance: f64,
    pub transient_skip: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchReport {
    pub scheme: String,
    pub wall_time_median_s: f64,
    pub step_count: u64,
    pub first_spike_time: Option<f64>,
    pub spike_count: usize,
    pub pattern: Option<PatternSummary>,
    pub solver: SolverEcho,
}

/// Resolve an output path against the output-directory override.
pub fn resolve_output_path(path: &Path) -> PathBuf {
    match env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Write a file, resolving relative paths against the output-directory
/// override and creating parent directories.
pub fn write_output(path: &Path, content: &str) -> Result<()> {
    let resolved = resolve_output_path(path);
    if let Some(parent) = resolved.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(resolved, content)?;
    Ok(())
}

pub fn trajectory_csv(points: &[TrajectoryPoint], stride: usize) -> String {
    let mut out = String::from("t,v,w,branch\n");
    let last = points.len().saturating_sub(1);
    for (i, p) in points.iter().enumerate() {
        if i % stride == 0 || i == last {
            let _ = writeln!(out, "{},{},{},{}", p.t, p.v, p.w, p.branch.name());
        }
    }
    out
}

pub fn spikes_csv(train: &SpikeTrain) -> String {
    let mut out = String::from("index,spike_time,w_at_spike\n");
    for (i, e) in train.events.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", i, e.time, e.w);
    }
    out
}

/// Parse a spike CSV produced by this harness.
pub fn read_spikes_csv(path: &Path) -> Result<Vec<SpikeEvent>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "index,spike_time,w_at_spike" => {}
        _ => {
            return Err(Error::ConfigInvalid(format!(
                "`{}` is not a spike CSV (expected header index,spike_time,w_at_spike)",
                path.display()
            )))
        }
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::ConfigParse {
                line: i + 1,
                reason: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let time = fields[1].parse::<f64>().map_err(|_| Error::ConfigParse {
            line: i + 1,
            reason: format!("invalid spike_time `{}`", fields[1]),
        })?;
        let w = fields[2].parse::<f64>().map_err(|_| Error::ConfigParse {
            line: i + 1,
            reason: format!("invalid w_at_spike `{}`", fields[2]),
        })?;
        events.push(SpikeEvent { time, w });
    }
    Ok(events)
}

/// Classify a spike train with the default tolerances, when it is long
/// enough to say anything.
pub fn summarize_pattern(train: &SpikeTrain) -> Option<PatternSummary> {
    summarize_events(&train.events)
}

pub fn summarize_events(events: &[SpikeEvent]) -> Option<PatternSummary> {
    if events.len() < 2 {
        return None;
    }
    let train = SpikeTrain {
        events: events.to_vec(),
        step_count: 0,
        terminated_by: crate::integrate::Termination::Horizon,
    };
    let skip = default_transient_skip(events.len());
    let seq = reset_sequence(&train, skip).ok()?;
    if seq.len() < 2 {
        return None;
    }
    let tolerance = default_tolerance(&seq);
    let class = classify_pattern(&seq, tolerance, DEFAULT_MAX_PERIOD).ok()?;
    Some(PatternSummary {
        label: class.label.name(),
        period: class.period,
        residual: class.residual,
        tolerance,
        transient_skip: skip,
    })
}

fn median_duration(mut durations: Vec<Duration>) -> Duration {
    durations.sort();
    durations[durations.len() / 2]
}

/// Execute one experiment: run the configured solver `repeat` times for the
/// timing median, write any configured files, return the report. Solver
/// failures are recorded in the report file before propagating.
pub fn run_experiment(config: &ExperimentConfig) -> Result<BenchReport> {
    config.validate()?;
    let echo = SolverEcho::from_config(&config.solver);
    let mut durations = Vec::with_capacity(config.repeat as usize);
    let mut last = None;
    for _ in 0..config.repeat {
        let started = Instant::now();
        match simulate(&config.model, &config.current, config.init, &config.solver) {
            Ok(result) => {
                durations.push(started.elapsed());
                last = Some(result);
            }
            Err(e) => {
                if let Some(report_path) = &config.outputs.report_path {
                    let record = serde_json::json!({
                        "error": { "exit_code": e.exit_code(), "message": e.to_string() },
                        "solver": echo,
                    });
                    let _ = write_output(
                        report_path,
                        &format!("{}\n", serde_json::to_string_pretty(&record).unwrap()),
                    );
                }
                return Err(e);
            }
        }
    }
    let (points, train) = last.expect("repeat >= 1 was validated");

    if let Some(path) = &config.outputs.trajectory_path {
        write_output(path, &trajectory_csv(&points, config.outputs.stride))?;
    }
    if let Some(path) = &config.outputs.spikes_path {
        write_output(path, &spikes_csv(&train))?;
    }
    let report = BenchReport {
        scheme: config.solver.scheme.name().to_string(),
        wall_time_median_s: median_duration(durations).as_secs_f64(),
        step_count: train.step_count,
        first_spike_time: train.first().map(|e| e.time),
        spike_count: train.events.len(),
        pattern: summarize_pattern(&train),
        solver: echo,
    };
    if let Some(path) = &config.outputs.report_path {
        write_output(
            path,
            &format!("{}\n", serde_json::to_string_pretty(&report).unwrap()),
        )?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ComparisonRow {
    #[serde(flatten)]
    pub report: BenchReport,
    /// First-spike difference against the reference row (the oracle row if
    /// present, the first row otherwise).
    pub first_spike_delta: Option<f64>,
}

/// Run several schemes on the same problem and tabulate them against the
/// reference row.
pub fn run_comparison(
    configs: &[ExperimentConfig],
    csv_path: Option<&Path>,
) -> Result<Vec<ComparisonRow>> {
    if configs.len() < 2 {
        return Err(Error::ConfigInvalid(format!(
            "comparison needs at least 2 configs, got {}",
            configs.len()
        )));
    }
    let head = &configs[0];
    for (i, c) in configs.iter().enumerate().skip(1) {
        if c.model != head.model || c.current != head.current || c.init != head.init {
            return Err(Error::ConfigInvalid(format!(
                "config {} does not share model/current/init with the first",
                i + 1
            )));
        }
    }
    let reports: Vec<BenchReport> = configs
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>>>()?;
    let reference = reports
        .iter()
        .position(|r| r.scheme == Scheme::Oracle.name())
        .unwrap_or(0);
    let reference_spike = reports[reference].first_spike_time;
    let rows: Vec<ComparisonRow> = reports
        .into_iter()
        .map(|report| {
            let first_spike_delta = match (report.first_spike_time, reference_spike) {
                (Some(t), Some(r)) => Some(t - r),
                _ => None,
            };
            ComparisonRow {
                report,
                first_spike_delta,
            }
        })
        .collect();
    if let Some(path) = csv_path {
        let mut out = String::from(
            "scheme,wall_time_median_s,step_count,first_spike_time,spike_count,\
             pattern,first_spike_delta\n",
        );
        for row in &rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.report.scheme,
                row.report.wall_time_median_s,
                row.report.step_count,
                row.report
                    .first_spike_time
                    .map(|t| t.to_string())
                    .unwrap_or_default(),
                row.report.spike_count,
                row.report
                    .pattern
                    .as_ref()
                    .map(|p| p.label.clone())
                    .unwrap_or_default(),
                row.first_spike_delta
                    .map(|d| d.to_string())
                    .unwrap_or_default(),
            );
        }
        write_output(path, &out)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SweepPoint {
    pub theta: f64,
    pub tau: f64,
    pub spike_time_error: f64,
    pub w_error: f64,
}

/// First-spike error of the base scheme against the oracle over a grid of
/// cutoffs and resolutions. The resolution knob scales `dt`, `dv` or
/// `epsilon` according to the base scheme.
pub fn run_error_sweep(
    base: &ExperimentConfig,
    taus: &[f64],
    thetas: &[f64],
    csv_path: Option<&Path>,
) -> Result<Vec<SweepPoint>> {
    if taus.is_empty() || thetas.is_empty() {
        return Err(Error::ConfigInvalid(
            "error sweep needs nonempty tau and theta lists".into(),
        ));
    }
    if base.solver.scheme == Scheme::Oracle {
        return Err(Error::ConfigInvalid(
            "error sweep measures a discrete scheme against the oracle".into(),
        ));
    }
    let mut rows = Vec::with_capacity(taus.len() * thetas.len());
    for &theta in thetas {
        for &tau in taus {
            let mut solver = base.solver;
            solver.theta = theta;
            match solver.scheme {
                Scheme::Euler => solver.dt = tau,
                Scheme::HybridFixed => solver.dv = tau,
                Scheme::HybridAdaptive => solver.epsilon = tau,
                Scheme::Oracle => unreachable!("rejected above"),
            }
            let report = measure_empirical_error(
                &base.model,
                &base.current,
                base.init,
                &solver,
                base.solver.oracle_tol,
            )?;
            rows.push(SweepPoint {
                theta,
                tau,
                spike_time_error: report.spike_time_error,
                w_error: report.w_at_spike_error,
            });
        }
    }
    if let Some(path) = csv_path {
        let mut out = String::from("theta,tau,spike_time_error,w_error\n");
        for row in &rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.theta, row.tau, row.spike_time_error, row.w_error
            );
        }
        write_output(path, &out)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_stock_experiment() {
        let config = parse_config("").unwrap();
        assert_eq!(config, ExperimentConfig::stock());
        assert_eq!(config.model.a, 0.02);
        assert_eq!(config.model.b, 0.19);
        assert_eq!(config.model.v_reset, -59.9);
        assert_eq!(config.model.w_jump, 1.15);
        assert_eq!(config.solver.theta, 30.0);
        assert_eq!(config.solver.t_end, 1000.0);
        assert_eq!(config.repeat, 5);
    }

    #[test]
    fn sections_and_comments_parse() {
        let text = "\
# stock burster, coarser step
seed = 42
[model]
kind = quadratic-izhikevich
a = 0.02
[current]
type = constant
value = 7.6
[init]
v = -65.0
w = -12.35
[solver]
scheme = hybrid-adaptive   # curvature-controlled
epsilon = 0.01
theta = 30.0
[outputs]
spikes = spikes.csv
stride = 10
";
        let config = parse_config(text).unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.solver.scheme, Scheme::HybridAdaptive);
        assert_eq!(config.outputs.spikes_path, Some(PathBuf::from("spikes.csv")));
        assert_eq!(config.outputs.stride, 10);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let text = "[solver]\nscheme = euler\nwibble = 3\n";
        let err = parse_config(text).unwrap_err();
        match err {
            Error::ConfigParse { line, reason } => {
                assert_eq!(line, 3);
                assert!(reason.contains("wibble"), "{reason}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn unknown_sections_and_duplicates_are_rejected() {
        assert!(parse_config("[banana]\n").is_err());
        assert!(parse_config("[solver]\ndt = 0.1\ndt = 0.2\n").is_err());
        assert!(parse_config("[solver]\n[solver]\n").is_err());
        assert!(parse_config("just some text\n").is_err());
    }

    #[test]
    fn unstable_euler_step_is_a_validation_error() {
        let text = "[solver]\nscheme = euler\ndt = 60.0\n";
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("adaptation recursion"), "{err}");
    }

    #[test]
    fn piecewise_current_parses_lists() {
        let text = "[current]\ntype = piecewise\njumps = 1.0, 2.5\nvalues = 0, 7.6, 0\n";
        let config = parse_config(text).unwrap();
        assert_eq!(
            config.current,
            InputCurrent::PiecewiseConstant {
                jumps: vec![1.0, 2.5],
                values: vec![0.0, 7.6, 0.0],
            }
        );
    }

    #[test]
    fn repeated_output_paths_are_rejected() {
        let text = "[outputs]\nspikes = out.csv\ntrajectory = out.csv\n";
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn spike_csv_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spikes.csv");
        let train = SpikeTrain {
            events: vec![
                SpikeEvent { time: 4.5, w: -12.1 },
                SpikeEvent { time: 22.25, w: -9.25 },
            ],
            step_count: 1000,
            terminated_by: crate::integrate::Termination::Horizon,
        };
        write_output(&path, &spikes_csv(&train)).unwrap();
        let events = read_spikes_csv(&path).unwrap();
        assert_eq!(events, train.events);
    }

    #[test]
    fn run_experiment_emits_files_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::stock();
        config.solver.t_end = 120.0;
        config.repeat = 1;
        config.outputs.trajectory_path = Some(dir.path().join("traj.csv"));
        config.outputs.spikes_path = Some(dir.path().join("spikes.csv"));
        config.outputs.report_path = Some(dir.path().join("report.json"));
        config.outputs.stride = 50;

        let report = run_experiment(&config).unwrap();
        assert!(report.spike_count >= 2);
        assert!(report.step_count > 0);
        assert!(report.wall_time_median_s > 0.0);

        let spikes_1 = fs::read(dir.path().join("spikes.csv")).unwrap();
        let traj_1 = fs::read(dir.path().join("traj.csv")).unwrap();
        assert!(spikes_1.starts_with(b"index,spike_time,w_at_spike\n"));
        assert!(traj_1.starts_with(b"t,v,w,branch\n"));
        let report_text = fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert!(report_text.contains("\"scheme\": \"euler\""));
        assert!(report_text.contains("\"t_end\""));

        run_experiment(&config).unwrap();
        let spikes_2 = fs::read(dir.path().join("spikes.csv")).unwrap();
        let traj_2 = fs::read(dir.path().join("traj.csv")).unwrap();
        assert_eq!(spikes_1, spikes_2);
        assert_eq!(traj_1, traj_2);
    }

    #[test]
    fn zero_horizon_gives_empty_spike_file_and_zero_steps() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::stock();
        config.solver.t_end = 0.0;
        config.repeat = 1;
        config.outputs.spikes_path = Some(dir.path().join("spikes.csv"));
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.step_count, 0);
        assert_eq!(report.spike_count, 0);
        assert_eq!(report.first_spike_time, None);
        let bytes = fs::read(dir.path().join("spikes.csv")).unwrap();
        assert_eq!(bytes, b"index,spike_time,w_at_spike\n");
    }

    #[test]
    fn solver_failures_leave_a_machine_readable_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::stock();
        // A cutoff far beyond the overflow guard forces a divergence error.
        config.model.a = 0.0;
        config.solver.theta = 1e305;
        config.solver.dt = 1.0;
        config.solver.t_end = 10_000.0;
        config.repeat = 1;
        config.outputs.report_path = Some(dir.path().join("report.json"));
        let err = run_experiment(&config).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert!(text.contains("\"error\""), "{text}");
        assert!(text.contains("\"exit_code\": 2"), "{text}");
    }

    #[test]
    fn comparison_of_identical_configs_has_zero_deltas() {
        let mut config = ExperimentConfig::stock();
        config.solver.t_end = 60.0;
        config.repeat = 1;
        let rows = run_comparison(&[config.clone(), config], None).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].report.first_spike_time, rows[1].report.first_spike_time);
        assert_eq!(rows[0].first_spike_delta, Some(0.0));
        assert_eq!(rows[1].first_spike_delta, Some(0.0));
    }

    #[test]
    fn comparison_rejects_mismatched_problems() {
        let mut one = ExperimentConfig::stock();
        one.solver.t_end = 10.0;
        let mut two = one.clone();
        two.init.v = -60.0;
        let err = run_comparison(&[one, two], None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn comparison_uses_the_oracle_row_as_reference() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("cmp.csv");
        let mut euler = ExperimentConfig::stock();
        euler.solver.t_end = 10.0;
        euler.repeat = 1;
        let mut oracle = euler.clone();
        oracle.solver = SolverConfig::new(Scheme::Oracle, 30.0);
        oracle.solver.t_end = 10.0;
        let rows = run_comparison(&[euler, oracle], Some(&csv)).unwrap();
        assert_eq!(rows[1].first_spike_delta, Some(0.0));
        // Euler lands late relative to the oracle.
        assert!(rows[0].first_spike_delta.unwrap() > 0.0);
        let text = fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("scheme,wall_time_median_s,step_count,first_spike_time"));
    }

    #[test]
    fn error_sweep_emits_the_specified_columns() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("sweep.csv");
        let mut base = ExperimentConfig::stock();
        base.solver.t_end = 10.0;
        let rows = run_error_sweep(&base, &[0.01, 0.005], &[30.0], Some(&csv)).unwrap();
        assert_eq!(rows.len(), 2);
        let text = fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("theta,tau,spike_time_error,w_error\n"));
        assert_eq!(text.lines().count(), 3);
        assert!(run_error_sweep(&base, &[], &[30.0], None).is_err());
        assert!(run_error_sweep(&base, &[0.01], &[], None).is_err());
    }

    #[test]
    fn output_dir_override_applies_to_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        env::set_var(OUTPUT_DIR_ENV, dir.path());
        let resolved = resolve_output_path(Path::new("sub/out.csv"));
        env::remove_var(OUTPUT_DIR_ENV);
        assert_eq!(resolved, dir.path().join("sub/out.csv"));
        let absolute = Path::new("/tmp/x.csv");
        assert_eq!(resolve_output_path(absolute), absolute.to_path_buf());
    }
}
