//! `cqt` command line: run `.cqp` scripts, the built-in protocols and
//! parameter sweeps, with JSON or CSV output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cqt_core::hilbert::{InputQubit, C64};
use cqt_core::protocols::{
    discriminate_bell, prepare_bell, teleport, trial_rng, BellKind, InjectionSign, ProtocolParams,
    TeleportRecord,
};
use cqt_core::script::{execute_script, parse_script};
use cqt_core::Error;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

mod selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "CQT_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "cqt",
    version,
    about = "Cavity-QED Bell states and teleportation simulator"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Coherent amplitude alpha of the cavity field
    #[arg(long, global = true, default_value_t = 2.0)]
    alpha: f64,
    /// Fock-space cutoff
    #[arg(long = "nmax", global = true, default_value_t = 64)]
    n_max: usize,
    /// Probe pulse area g*tau [default: pi / (2 sqrt(nbar)), nbar = round(4 alpha^2)]
    #[arg(long, global = true)]
    gt: Option<f64>,
    /// RNG seed (CQT_SEED overrides)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    trials: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Inject {
    Plus,
    Minus,
    Random,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute a .cqp script
    Run {
        file: PathBuf,
        /// Script parameter, repeatable: --param alpha=2
        #[arg(long = "param", value_parser = parse_kv)]
        params: Vec<(String, f64)>,
    },
    /// Prepare a Bell pair and report its fidelity
    Bell {
        #[arg(long, value_parser = parse_kind)]
        kind: BellKind,
    },
    /// Prepare a Bell pair, then identify it
    Discriminate {
        #[arg(long, value_parser = parse_kind)]
        kind: BellKind,
        /// Injected field [default: the one matched to --kind]
        #[arg(long, value_enum)]
        inject: Option<Inject>,
    },
    /// Teleport zeta|f> + xi|g> (Haar-random per trial when omitted)
    Teleport {
        #[arg(long, requires = "xi", allow_hyphen_values = true)]
        zeta: Option<f64>,
        #[arg(long, requires = "zeta", allow_hyphen_values = true)]
        xi: Option<f64>,
        #[arg(long, value_enum, default_value_t = Inject::Minus)]
        inject: Inject,
    },
    /// Teleportation statistics over a parameter grid
    Sweep {
        /// var=start:stop:step or var=v1,v2,...  (var: alpha, nmax, gt)
        #[arg(long)]
        spec: String,
        #[arg(long, value_enum, default_value_t = Inject::Minus)]
        inject: Inject,
    },
    /// Check the simulator against its reference implementations
    Selftest,
}

fn parse_kv(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_kind(s: &str) -> Result<BellKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Runtime { source, .. } => Failure::from((**source).clone()).code,
            Error::ProtocolAbort { .. }
            | Error::ImpossiblePostselection { .. }
            | Error::NotSeparable(..) => EXIT_PROTOCOL,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// What a subcommand produced: a JSON document, CSV text, and whether the
/// run counts as a protocol failure.
struct Output {
    json: serde_json::Value,
    csv: Option<String>,
    failed: Option<String>,
}

/// Per-trial CSV row shared by every protocol subcommand.
#[derive(Serialize)]
struct TrialRow {
    trial: u64,
    injection: String,
    outcome1: Option<String>,
    outcome2: Option<String>,
    probe_prob: f64,
    fidelity: Option<f64>,
}

fn csv_text<T: Serialize>(rows: &[T]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn params_from(common: &Common, seed: u64) -> Result<ProtocolParams, Failure> {
    let mut p = ProtocolParams::new(common.alpha)
        .with_n_max(common.n_max)
        .with_seed(seed);
    if let Some(gt) = common.gt {
        p = p.with_gt(gt);
    }
    p.cutoff()?;
    Ok(p)
}

fn params_json(p: &ProtocolParams) -> serde_json::Value {
    serde_json::json!({
        "alpha": p.alpha,
        "n_max": p.n_max,
        "phi": p.phi,
        "gt_probe": p.gt_probe,
        "tail_tol": p.tail_tol,
        "postselect_min": p.postselect_min,
        "seed": p.seed,
        "nbar": ProtocolParams::nbar(p.alpha),
        "nbar_rounded": p.nbar_rounded(),
    })
}

fn injection_for(choice: Inject, rng: &mut impl Rng) -> InjectionSign {
    match choice {
        Inject::Plus => InjectionSign::Plus,
        Inject::Minus => InjectionSign::Minus,
        Inject::Random => {
            if rng.random::<bool>() {
                InjectionSign::Plus
            } else {
                InjectionSign::Minus
            }
        }
    }
}

fn cmd_run(
    common: &Common,
    file: &PathBuf,
    params: &[(String, f64)],
    seed: u64,
) -> Result<Output, Failure> {
    if common.format == Format::Csv {
        return Err(usage("`run` produces JSON only"));
    }
    let text =
        std::fs::read_to_string(file).map_err(|e| usage(format!("{}: {e}", file.display())))?;
    let script = parse_script(&text)?;
    let mut map: BTreeMap<String, f64> = BTreeMap::new();
    map.insert("n_max".into(), common.n_max as f64);
    map.extend(params.iter().cloned());
    let report = execute_script(&script, &map, seed)?;
    let failed = (!report.passed).then(|| "an `expect` statement failed".to_string());
    Ok(Output {
        json: serde_json::json!({ "command": "run", "file": file.display().to_string(), "report": report }),
        csv: None,
        failed,
    })
}

fn cmd_bell(common: &Common, kind: BellKind, seed: u64) -> Result<Output, Failure> {
    let p = params_from(common, seed)?;
    let prep = prepare_bell(&p, kind)?;
    let fidelity = prep.state.fidelity(&kind.register("A1", "A2"))?;
    let row = TrialRow {
        trial: 0,
        injection: kind.preparation_injection().to_string(),
        outcome1: None,
        outcome2: None,
        probe_prob: prep.success_probability,
        fidelity: Some(fidelity),
    };
    Ok(Output {
        json: serde_json::json!({
            "command": "bell",
            "params": params_json(&p),
            "kind": kind,
            "injection": kind.preparation_injection(),
            "success_probability": prep.success_probability,
            "fidelity": fidelity,
        }),
        csv: Some(csv_text(&[row])?),
        failed: None,
    })
}

#[derive(Serialize)]
struct DiscriminationRecord {
    trial: u64,
    injection: InjectionSign,
    outcome1: String,
    outcome2: String,
    inferred: BellKind,
    correct: bool,
    probe_probability: f64,
}

fn cmd_discriminate(
    common: &Common,
    kind: BellKind,
    inject: Option<Inject>,
    seed: u64,
) -> Result<Output, Failure> {
    let p = params_from(common, seed)?;
    let prep = prepare_bell(&p, kind)?;
    let choice = inject.unwrap_or(match kind.discrimination_injection() {
        InjectionSign::Plus => Inject::Plus,
        InjectionSign::Minus => Inject::Minus,
    });
    let records: Vec<DiscriminationRecord> = (0..common.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let sign = injection_for(choice, &mut rng);
            let d = discriminate_bell(&prep.state, &p, sign, &mut rng)?;
            Ok(DiscriminationRecord {
                trial: t,
                injection: sign,
                outcome1: d.outcomes.0.to_string(),
                outcome2: d.outcomes.1.to_string(),
                inferred: d.inferred,
                correct: d.inferred == kind,
                probe_probability: d.probe_probability,
            })
        })
        .collect::<Result<_, Error>>()?;
    let correct = records.iter().filter(|r| r.correct).count();
    let rows: Vec<TrialRow> = records
        .iter()
        .map(|r| TrialRow {
            trial: r.trial,
            injection: r.injection.to_string(),
            outcome1: Some(r.outcome1.clone()),
            outcome2: Some(r.outcome2.clone()),
            probe_prob: r.probe_probability,
            fidelity: None,
        })
        .collect();
    Ok(Output {
        json: serde_json::json!({
            "command": "discriminate",
            "params": params_json(&p),
            "kind": kind,
            "trials": common.trials,
            "correct": correct,
            "records": records,
        }),
        csv: Some(csv_text(&rows)?),
        failed: None,
    })
}

#[derive(Serialize)]
struct TeleportTrial {
    trial: u64,
    zeta: C64,
    xi: C64,
    #[serde(flatten)]
    record: TeleportRecord,
}

fn teleport_trials(
    p: &ProtocolParams,
    input: Option<InputQubit>,
    choice: Inject,
    seed: u64,
    first_stream: u64,
    trials: u64,
) -> Result<Vec<TeleportTrial>, Failure> {
    let out = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, first_stream + t);
            let q = match input {
                Some(q) => q,
                None => InputQubit::haar_random(&mut rng),
            };
            let sign = injection_for(choice, &mut rng);
            let record = teleport(&q, p, sign, &mut rng)?;
            Ok(TeleportTrial {
                trial: t,
                zeta: q.zeta(),
                xi: q.xi(),
                record,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(out)
}

#[derive(Serialize)]
struct Summary {
    trials: u64,
    detections: u64,
    detection_rate: f64,
    probe_prob: f64,
    mean_fidelity: Option<f64>,
    min_fidelity: Option<f64>,
}

fn summarize(trials: &[TeleportTrial]) -> Summary {
    let ok: Vec<f64> = trials
        .iter()
        .filter(|t| t.record.success)
        .map(|t| t.record.fidelity)
        .collect();
    let n = trials.len() as u64;
    Summary {
        trials: n,
        detections: ok.len() as u64,
        detection_rate: ok.len() as f64 / n.max(1) as f64,
        probe_prob: trials
            .first()
            .map(|t| t.record.probe_probability)
            .unwrap_or(0.0),
        mean_fidelity: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
        min_fidelity: ok.iter().copied().reduce(f64::min),
    }
}

fn cmd_teleport(
    common: &Common,
    zeta: Option<f64>,
    xi: Option<f64>,
    inject: Inject,
    seed: u64,
) -> Result<Output, Failure> {
    let p = params_from(common, seed)?;
    let input = match (zeta, xi) {
        (Some(z), Some(x)) => Some(InputQubit::new(C64::new(z, 0.0), C64::new(x, 0.0))?),
        _ => None,
    };
    let trials = teleport_trials(&p, input, inject, seed, 0, common.trials)?;
    let rows: Vec<TrialRow> = trials
        .iter()
        .map(|t| TrialRow {
            trial: t.trial,
            injection: t.record.injected.to_string(),
            outcome1: t.record.message.map(|m| m.outcome1.to_string()),
            outcome2: t.record.message.map(|m| m.outcome2.to_string()),
            probe_prob: t.record.probe_probability,
            fidelity: t.record.success.then_some(t.record.fidelity),
        })
        .collect();
    let failed = (common.trials == 1 && !trials[0].record.success)
        .then(|| "probe atom was not detected in e".to_string());
    Ok(Output {
        json: serde_json::json!({
            "command": "teleport",
            "params": params_json(&p),
            "input": if input.is_some() { "fixed" } else { "haar" },
            "summary": summarize(&trials),
            "records": trials,
        }),
        csv: Some(csv_text(&rows)?),
        failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum SweepVar {
    Alpha,
    NMax,
    GtProbe,
}

/// Parses `var=start:stop:step` or `var=v1,v2,...`.
fn parse_sweep(spec: &str) -> Result<(SweepVar, Vec<f64>), Failure> {
    let (name, values) = spec.split_once('=').ok_or_else(|| {
        usage(format!(
            "sweep spec must look like var=start:stop:step, got `{spec}`"
        ))
    })?;
    let var = match name.trim() {
        "alpha" => SweepVar::Alpha,
        "nmax" | "n_max" => SweepVar::NMax,
        "gt" | "gt_probe" => SweepVar::GtProbe,
        other => return Err(usage(format!("cannot sweep `{other}` (alpha, nmax, gt)"))),
    };
    let num = |s: &str| -> Result<f64, Failure> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage(format!("`{s}` is not a number")))
    };
    let list = if values.contains(':') {
        let parts: Vec<&str> = values.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(usage("a range needs start:stop:step"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step <= 0.0 || stop < start {
            return Err(usage("a range needs step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        values.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if list.is_empty() {
        return Err(usage("sweep has no values"));
    }
    if var == SweepVar::NMax && list.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
        return Err(usage("nmax values must be positive integers"));
    }
    Ok((var, list))
}

#[derive(Serialize)]
struct SweepPoint {
    point: usize,
    variable: SweepVar,
    value: f64,
    #[serde(flatten)]
    summary: Summary,
}

fn cmd_sweep(common: &Common, spec: &str, inject: Inject, seed: u64) -> Result<Output, Failure> {
    let (var, values) = parse_sweep(spec)?;
    let mut points = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let mut c = common.clone();
        match var {
            SweepVar::Alpha => c.alpha = v,
            SweepVar::NMax => c.n_max = v as usize,
            SweepVar::GtProbe => c.gt = Some(v),
        }
        let p = params_from(&c, seed)?;
        let trials = teleport_trials(
            &p,
            None,
            inject,
            seed,
            i as u64 * common.trials,
            common.trials,
        )?;
        points.push(SweepPoint {
            point: i,
            variable: var,
            value: v,
            summary: summarize(&trials),
        });
    }
    #[derive(Serialize)]
    struct Row<'a> {
        point: usize,
        variable: &'a str,
        value: f64,
        trials: u64,
        detections: u64,
        detection_rate: f64,
        probe_prob: f64,
        mean_fidelity: Option<f64>,
        min_fidelity: Option<f64>,
    }
    let name = match var {
        SweepVar::Alpha => "alpha",
        SweepVar::NMax => "n_max",
        SweepVar::GtProbe => "gt_probe",
    };
    let rows: Vec<Row> = points
        .iter()
        .map(|pt| Row {
            point: pt.point,
            variable: name,
            value: pt.value,
            trials: pt.summary.trials,
            detections: pt.summary.detections,
            detection_rate: pt.summary.detection_rate,
            probe_prob: pt.summary.probe_prob,
            mean_fidelity: pt.summary.mean_fidelity,
            min_fidelity: pt.summary.min_fidelity,
        })
        .collect();
    let base = params_from(common, seed)?;
    Ok(Output {
        json: serde_json::json!({
            "command": "sweep",
            "params": params_json(&base),
            "variable": var,
            "injection": format!("{inject:?}").to_lowercase(),
            "points": points,
        }),
        csv: Some(csv_text(&rows)?),
        failed: None,
    })
}

fn dispatch(cli: &Cli, seed: u64) -> Result<Output, Failure> {
    let c = &cli.common;
    if c.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    match &cli.command {
        Command::Run { file, params } => cmd_run(c, file, params, seed),
        Command::Bell { kind } => cmd_bell(c, *kind, seed),
        Command::Discriminate { kind, inject } => cmd_discriminate(c, *kind, *inject, seed),
        Command::Teleport { zeta, xi, inject } => cmd_teleport(c, *zeta, *xi, *inject, seed),
        Command::Sweep { spec, inject } => cmd_sweep(c, spec, *inject, seed),
        Command::Selftest => selftest::run(seed),
    }
}

/// Runs the CLI with an explicit `CQT_SEED` value (for tests).
pub fn run_with_env<I, T>(
    argv: I,
    env_seed: Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let seed = match env_seed {
        Some(s) => match s.trim().parse::<u64>() {
            Ok(v) => v,
            Err(_) => {
                let _ = writeln!(err, "error: {SEED_ENV}=`{s}` is not an unsigned integer");
                return EXIT_USAGE;
            }
        },
        None => cli.common.seed,
    };
    let output = match dispatch(&cli, seed) {
        Ok(o) => o,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            return f.code;
        }
    };
    let text = match cli.common.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&output.json).expect("serializable");
            s.push('\n');
            s
        }
        Format::Csv => match output.csv {
            Some(c) => c,
            None => {
                let _ = writeln!(err, "error: this command has no CSV form");
                return EXIT_USAGE;
            }
        },
    };
    let written = match &cli.common.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    match output.failed {
        Some(reason) => {
            let _ = writeln!(err, "protocol failure: {reason}");
            EXIT_PROTOCOL
        }
        None => EXIT_OK,
    }
}

/// Runs the CLI, reading `CQT_SEED` from the environment.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_env(argv, std::env::var(SEED_ENV).ok(), out, err)
}
