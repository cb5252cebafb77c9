//! Scriptable front end for `immune-sim`: single trajectories, survival
//! estimates, sweeps, bisections and closed-form queries, written as CSV or
//! JSON with byte-reproducible output for a fixed seed.
//!
//! Exit codes: 0 ok, 2 validation error, 3 run anomaly (event cap, or an
//! undecidable bisection probe), 4 invalid bisection bracket, 1 anything else.

pub mod args;
pub mod format;
pub mod grid;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::{json, Map, Value};

use immune_sim::analytic::{
    gw_extinction, model1_chain_bound, model1_min_level, model2_mean_offspring, model2_phase, model3_offspring_law,
    model3_phase, AnalyticError, Extended, SurvivalProbability, DEFAULT_TOL,
};
use immune_sim::experiments::{
    bisect_critical, estimate_survival, sweep, z_for_confidence, Axis, BisectOptions, EstimateOptions,
    ExperimentError, Parallelism, SurvivalEstimate, DEFAULT_NONSPATIAL_TRIALS, DEFAULT_SPATIAL_TRIALS,
};
use immune_sim::{derive_trial_rng, ModelId, Outcome, ParamError, RecordOptions, SimError, SimParams, StopRule, Verdict};

use args::{AnalyticArgs, AxisArg, BatchArgs, BisectArgs, Cli, Command, EstimateArgs, ModelArgs, OutFormat, RunArgs, SweepArgs};
use format::{csv_row, g9, json_row, num, CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ANOMALY: i32 = 3;
pub const EXIT_BRACKET: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Anomaly(String),
    Bracket(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Anomaly(_) => EXIT_ANOMALY,
            CliError::Bracket(_) => EXIT_BRACKET,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Anomaly(m) | CliError::Bracket(m) | CliError::Failure(m) => m,
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::InvalidParameter(_) => CliError::Validation(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Param(p) => p.into(),
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Sim(s) => s.into(),
            ExperimentError::InvalidArgument(_) => CliError::Validation(e.to_string()),
            ExperimentError::BracketInvalid { .. } => CliError::Bracket(e.to_string()),
            ExperimentError::EventCapAnomaly(_) | ExperimentError::UndecidableProbe { .. } => {
                CliError::Anomaly(e.to_string())
            }
        }
    }
}

/// Text to emit, plus an anomaly that turns the exit code into 3 after the
/// text has been written.
struct Report {
    text: String,
    anomaly: Option<String>,
}

/// Entry point shared by the binary and the tests.
pub fn run_main(argv: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let argv = match args::expand_config(argv) {
        Ok(a) => a,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_VALIDATION;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_VALIDATION
                }
            };
        }
    };
    let (result, out_path) = match &cli.command {
        Command::Run(a) => (cmd_run(a), a.output.out_path.as_deref()),
        Command::Estimate(a) => (cmd_estimate(a), a.output.out_path.as_deref()),
        Command::Sweep(a) => (cmd_sweep(a), a.output.out_path.as_deref()),
        Command::Bisect(a) => (cmd_bisect(a), a.output.out_path.as_deref()),
        Command::Analytic(a) => (cmd_analytic(a), a.out_path.as_deref()),
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            return e.exit_code();
        }
    };
    if let Err(e) = emit(&report.text, out_path, stdout) {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_FAILURE;
    }
    match report.anomaly {
        Some(msg) => {
            let _ = writeln!(stderr, "anomaly: {msg}");
            EXIT_ANOMALY
        }
        None => EXIT_OK,
    }
}

fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> std::io::Result<()> {
    match path {
        None => stdout.write_all(text.as_bytes()),
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(text.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| e.error)?;
            Ok(())
        }
    }
}

fn params(m: &ModelArgs, lambda: f64, r: f64) -> Result<SimParams, CliError> {
    let model: ModelId = m.model.parse()?;
    let defaults = StopRule::default();
    let stop = StopRule {
        max_population: m.max_pop.unwrap_or(defaults.max_population),
        max_time: m.max_time.unwrap_or(defaults.max_time),
        max_events: m.max_events.unwrap_or(defaults.max_events),
    };
    let p = SimParams::new(model, lambda, r, m.dim)?.with_stop(stop);
    p.validate()?;
    Ok(p)
}

fn estimate_options(b: &BatchArgs) -> Result<EstimateOptions, CliError> {
    z_for_confidence(b.confidence)?;
    let parallelism = match b.parallelism {
        Some(0) => return Err(CliError::Validation("parallelism must be at least 1".into())),
        Some(n) => Parallelism(n),
        None => Parallelism::available(),
    };
    Ok(EstimateOptions {
        confidence: b.confidence,
        parallelism,
    })
}

fn trials(b: &BatchArgs, p: &SimParams) -> Result<u64, CliError> {
    match b.trials {
        Some(0) => Err(CliError::Validation("trials must be positive".into())),
        Some(n) => Ok(n),
        None if p.model.is_spatial() => Ok(DEFAULT_SPATIAL_TRIALS),
        None => Ok(DEFAULT_NONSPATIAL_TRIALS),
    }
}

fn format_of(o: Option<OutFormat>, default: OutFormat) -> OutFormat {
    o.unwrap_or(default)
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_run(a: &RunArgs) -> Result<Report, CliError> {
    if format_of(a.output.out_format, OutFormat::Json) != OutFormat::Json {
        return Err(CliError::Validation("run writes JSON only".into()));
    }
    if let Some(s) = a.stride {
        if !(s.is_finite() && s > 0.0) {
            return Err(CliError::Validation(format!("stride must be positive, got {s}")));
        }
    }
    let p = params(&a.model, a.lambda, a.r)?;
    let mut opts = RecordOptions::default();
    if a.series || a.every_event || a.stride.is_some() {
        opts = opts.with_series(a.stride.unwrap_or(RecordOptions::DEFAULT_STRIDE));
        opts.series_every_event = a.every_event;
    }
    if a.genealogy {
        opts = opts.with_genealogy();
    }
    let mut rng = derive_trial_rng(a.output.seed, 0);
    let outcome = immune_sim::simulate(&p, &mut rng, &opts)?;
    let anomaly = outcome
        .verdict
        .hit_event_cap()
        .then(|| format!("trajectory stopped at the event cap ({} events)", outcome.events));
    Ok(Report {
        text: json_text(&run_json(&p, a.output.seed, &outcome)),
        anomaly,
    })
}

fn run_json(p: &SimParams, seed: u64, o: &Outcome) -> Value {
    let (verdict, reason) = match o.verdict {
        Verdict::Extinct { .. } => ("extinct", None),
        Verdict::SurvivedProxy { reason, .. } => ("survived_proxy", Some(reason.as_str())),
    };
    let mut v = json!({
        "command": "run",
        "model": p.model.as_str(),
        "dim": p.dim,
        "lambda": num(p.lambda),
        "r": num(p.r),
        "seed": seed,
        "verdict": verdict,
        "stop_reason": reason,
        "time": num(o.verdict.time()),
        "final_population": o.final_population,
        "final_type_count": o.final_type_count,
        "events": o.events,
    });
    let obj = v.as_object_mut().expect("object");
    if let Some(series) = &o.series {
        let rows = series
            .iter()
            .map(|pt| {
                let mut row = vec![num(pt.t), json!(pt.population), json!(pt.types)];
                if let Some((l, r)) = pt.extent {
                    row.extend([json!(l), json!(r)]);
                }
                Value::Array(row)
            })
            .collect();
        obj.insert("series".into(), Value::Array(rows));
    }
    if let Some(g) = &o.genealogy {
        let types = g
            .types
            .iter()
            .map(|t| {
                json!({
                    "type_id": t.type_id.get(),
                    "parent": t.parent.map(|p| p.get()),
                    "birth_time": num(t.birth_time),
                    "death_time": t.death_time.map(num),
                    "mutant_offspring": t.mutant_offspring,
                    "max_size": t.max_size,
                })
            })
            .collect();
        obj.insert("genealogy".into(), Value::Array(types));
    }
    v
}

/// Rows of estimates as CSV or as `{"command": .., "rows": [..]}`.
fn table(
    command: &str,
    rows: &[(SurvivalEstimate, Map<String, Value>)],
    seed: u64,
    wall_time: bool,
    format: OutFormat,
) -> String {
    match format {
        OutFormat::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for (est, _) in rows {
                s.push_str(&csv_row(est, seed, wall_time));
                s.push('\n');
            }
            s
        }
        OutFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(est, extra)| json_row(est, seed, wall_time, extra.clone()))
                .collect();
            json_text(&json!({ "command": command, "rows": rows }))
        }
    }
}

fn extras(pairs: Vec<(&str, Value)>) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn cmd_estimate(a: &EstimateArgs) -> Result<Report, CliError> {
    let p = params(&a.model, a.lambda, a.r)?;
    let opts = estimate_options(&a.batch)?;
    let n = trials(&a.batch, &p)?;
    let seed = a.output.seed;
    let (est, anomaly) = match estimate_survival(&p, n, seed, &opts) {
        Ok(est) => (est, None),
        Err(ExperimentError::EventCapAnomaly(est)) => {
            let msg = format!("{} of {} trials hit the event cap", est.event_caps, est.trials);
            (*est, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };
    let extra = extras(vec![
        ("event_caps", json!(est.event_caps)),
        ("confidence", num(est.confidence)),
        ("anomaly", json!(anomaly)),
    ]);
    let format = format_of(a.output.out_format, OutFormat::Csv);
    Ok(Report {
        text: table("estimate", &[(est, extra)], seed, a.batch.wall_time, format),
        anomaly,
    })
}

fn cmd_sweep(a: &SweepArgs) -> Result<Report, CliError> {
    let lambdas = grid::parse_grid(&a.lambda).map_err(|e| CliError::Validation(format!("--lambda: {e}")))?;
    let rs = grid::parse_grid(&a.r).map_err(|e| CliError::Validation(format!("--r: {e}")))?;
    let base = params(&a.model, lambdas[0], rs[0])?;
    // Every cell is validated before any simulation starts.
    for &l in &lambdas {
        for &r in &rs {
            base.with_lambda(l).with_r(r).validate()?;
        }
    }
    let opts = estimate_options(&a.batch)?;
    let n = trials(&a.batch, &base)?;
    let seed = a.output.seed;
    let result = sweep(&base, &lambdas, &rs, n, seed, &opts)?;
    let mut rows = Vec::with_capacity(result.rows.len());
    let mut anomalies = Vec::new();
    for row in result.rows {
        let Some(est) = row.estimate else {
            return Err(CliError::Failure(row.anomaly.unwrap_or_else(|| "cell failed".into())));
        };
        if let Some(msg) = &row.anomaly {
            anomalies.push(format!("lambda={} r={}: {msg}", g9(row.lambda), g9(row.r)));
        }
        let extra = extras(vec![
            ("cell_seed", json!(row.cell_seed)),
            ("event_caps", json!(est.event_caps)),
            ("confidence", num(est.confidence)),
            ("anomaly", json!(row.anomaly)),
        ]);
        rows.push((est, extra));
    }
    let format = format_of(a.output.out_format, OutFormat::Csv);
    Ok(Report {
        text: table("sweep", &rows, seed, a.batch.wall_time, format),
        anomaly: (!anomalies.is_empty()).then(|| anomalies.join("; ")),
    })
}

fn cmd_bisect(a: &BisectArgs) -> Result<Report, CliError> {
    let (axis, template) = match (a.axis, a.lambda, a.r) {
        (AxisArg::Lambda, _, None) => return Err(CliError::Validation("bisecting on lambda needs a fixed --r".into())),
        (AxisArg::Lambda, Some(_), _) => {
            return Err(CliError::Validation("--lambda conflicts with --axis lambda".into()))
        }
        (AxisArg::Lambda, None, Some(r)) => (Axis::Lambda, params(&a.model, a.lo, r)?),
        (AxisArg::R, None, _) => return Err(CliError::Validation("bisecting on r needs a fixed --lambda".into())),
        (AxisArg::R, _, Some(_)) => return Err(CliError::Validation("--r conflicts with --axis r".into())),
        (AxisArg::R, Some(l), None) => (Axis::R, params(&a.model, l, a.lo)?),
    };
    axis.apply(&template, a.hi).validate()?;
    let opts = BisectOptions {
        estimate: estimate_options(&a.batch)?,
        ..BisectOptions::default()
    };
    let n = trials(&a.batch, &template)?;
    let seed = a.output.seed;
    let res = bisect_critical(&template, axis, a.lo, a.hi, a.resolution, n, seed, &opts)?;
    let rows: Vec<(SurvivalEstimate, Map<String, Value>)> = res
        .probes
        .iter()
        .map(|p| {
            let extra = extras(vec![
                ("probe_seed", json!(p.seed)),
                ("class", json!(p.class.to_string())),
                ("escalated", json!(p.escalated)),
                ("event_caps", json!(p.estimate.event_caps)),
                ("confidence", num(p.estimate.confidence)),
            ]);
            (p.estimate.clone(), extra)
        })
        .collect();
    let text = match format_of(a.output.out_format, OutFormat::Csv) {
        OutFormat::Csv => {
            let mut s = table("bisect", &rows, seed, a.batch.wall_time, OutFormat::Csv);
            s.push_str(&format!("bracket_lo={},bracket_hi={}\n", g9(res.lo), g9(res.hi)));
            s
        }
        OutFormat::Json => {
            let probes: Vec<Value> = rows
                .iter()
                .map(|(est, extra)| json_row(est, seed, a.batch.wall_time, extra.clone()))
                .collect();
            json_text(&json!({
                "command": "bisect",
                "axis": axis.as_str(),
                "fixed_value": num(res.fixed_value),
                "resolution": num(a.resolution),
                "decision_threshold": num(res.decision_threshold),
                "rows": probes,
                "bracket_lo": num(res.lo),
                "bracket_hi": num(res.hi),
            }))
        }
    };
    Ok(Report { text, anomaly: None })
}

fn extended(x: Extended) -> Value {
    match x {
        Extended::Finite(v) => num(v),
        Extended::Infinite => Value::String("inf".into()),
    }
}

fn cmd_analytic(a: &AnalyticArgs) -> Result<Report, CliError> {
    let model: ModelId = a.model.parse()?;
    // Validate lambda and r with the same rules as simulations.
    let probe_dim = model.is_spatial().then_some(1);
    SimParams::new(model, a.lambda, a.r, probe_dim)?;
    let mut v = json!({
        "command": "analytic",
        "model": model.as_str(),
        "lambda": num(a.lambda),
        "r": num(a.r),
    });
    let obj = v.as_object_mut().expect("object");
    match model {
        ModelId::M3 => {
            let phase = model3_phase(a.lambda, a.r)?;
            let survival = match phase.survival_probability {
                SurvivalProbability::Positive(p) => p,
                _ => 0.0,
            };
            let q = gw_extinction(&model3_offspring_law(a.lambda, a.r)?, DEFAULT_TOL)?;
            obj.insert("survives".into(), json!(phase.survives));
            obj.insert("survival_probability".into(), num(survival));
            obj.insert("offspring_mean".into(), num(a.r * a.lambda));
            obj.insert("extinction_probability_numeric".into(), num(q));
        }
        ModelId::M2 => {
            let phase = model2_phase(a.lambda, a.r)?;
            obj.insert("survives".into(), json!(phase.survives));
            obj.insert("mean_offspring".into(), extended(model2_mean_offspring(a.lambda, a.r)?));
        }
        ModelId::M1 => {
            let level = match a.chain_n {
                Some(0) => return Err(CliError::Validation("--chain-n must be positive".into())),
                Some(n) => Some(n),
                None => model1_min_level(a.lambda, a.r)?,
            };
            obj.insert("survives".into(), json!(a.r > 0.0));
            match level {
                Some(n) => {
                    let bound = model1_chain_bound(a.lambda, a.r, n)?;
                    obj.insert("chain_n".into(), json!(n));
                    obj.insert("up_probability".into(), num(bound.up_probability));
                    obj.insert("stay_above".into(), num(bound.stay_above));
                    obj.insert(
                        "note".into(),
                        json!(
                            "comparison-chain bound (2p-1)/p: once N types are alive, the type count \
                             stays at or above N forever with at least this probability"
                        ),
                    );
                }
                None => {
                    obj.insert("note".into(), json!("r = 0: the single type dies at rate 1"));
                }
            }
        }
        _ => {
            return Err(CliError::Validation(format!(
                "no closed forms for lattice model {model}; use estimate or sweep"
            )))
        }
    }
    Ok(Report {
        text: json_text(&v),
        anomaly: None,
    })
}
