//! Command-line front end: instance files in, JSON or CSV out.
//!
//! Exit codes: 0 on success, 2 when an input or flag fails validation,
//! 3 when a size budget is exceeded and 1 for anything else.

pub mod schema;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::error::Error;
use crate::exante::{exante_opt_cabinets, exante_opt_cms, CurveMode};
use crate::generate::{self, MspShape};
use crate::indices::compute_indices;
use crate::model::{convert_cabinets_to_cms, convert_noi_to_cabinets, min_first_advance_cost, CmsInstance, Decision, Msp, PandoraCabinetsInstance};
use crate::oracles::{brute_force_opt_cabinets, brute_force_opt_cms, brute_force_opt_noi, brute_force_opt_pandora_cabinets};
use crate::prophet::{estimate_welfare, CmsRunner, MatroidCabinetsRunner, PlanMode, ThresholdMode, WelfareEstimate, DEFAULT_THRESHOLD_SAMPLES};
use crate::saup::{cabinets_saup, maxsaup};
pub use schema::{Instance, InstanceFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },

    #[error("{0}")]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Core(Error::InvalidProcess(_) | Error::InvalidInstance(_) | Error::Parameter(_) | Error::Domain(_)) => 2,
            CliError::Core(Error::SizeLimit { .. }) => 3,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "markov-search", version, about = "Search, ex-ante relaxations and prophet thresholds for Markov search processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdArg {
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanArg {
    Exact,
    Fptas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvertTarget {
    PandoraCabinets,
    Cms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Cms,
    Cabinets,
    PandoraCabinets,
    NoiPandora,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ProphetArgs {
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ThresholdArg::Auto)]
    pub threshold_mode: ThresholdArg,
    /// Pool size for sampled thresholds.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_SAMPLES)]
    pub samples: usize,
    /// Curve construction for process instances.
    #[arg(long, value_enum, default_value_t = PlanArg::Fptas)]
    pub plan: PlanArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an instance file.
    Validate { path: PathBuf },
    /// Weitzman indices and capped values of every bandit.
    Index { path: PathBuf },
    /// Optimal single-agent policies against a posted price.
    Saup {
        path: PathBuf,
        #[arg(long)]
        tau: f64,
    },
    /// Ex-ante relaxation: claim probabilities, values and objective.
    Exante {
        path: PathBuf,
        /// Use approximate curves instead of exact ones.
        #[arg(long)]
        fptas: bool,
        #[arg(long, default_value_t = 0.01)]
        c: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Monte Carlo welfare of the online threshold algorithm.
    Prophet {
        path: PathBuf,
        #[command(flatten)]
        args: ProphetArgs,
    },
    /// Brute-force optimal adaptive welfare.
    Oracle { path: PathBuf },
    /// Rewrite an instance as another kind.
    Convert {
        path: PathBuf,
        #[arg(long, value_enum)]
        to: ConvertTarget,
        /// Drawer selection cost when converting to processes.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every instance of a directory and write one CSV row each.
    Bench {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        args: ProphetArgs,
        /// Report 0 in the wall_ms column.
        #[arg(long)]
        no_timing: bool,
    },
    /// Write a seeded random instance.
    Generate {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        max_rank: usize,
        #[arg(long, default_value_t = 6)]
        max_states: usize,
        #[arg(long, default_value_t = 2)]
        max_actions: usize,
        #[arg(long, default_value_t = 3)]
        max_drawers: usize,
        #[arg(long, default_value_t = 3)]
        max_atoms: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: &Command, out: &mut dyn Write) -> CliResult<i32> {
    let text = match cmd {
        Command::Validate { path } => {
            let (report, code) = validate(path);
            emit(out, &report)?;
            return Ok(code);
        }
        Command::Index { path } => json_text(&index(&load(path)?)?),
        Command::Saup { path, tau } => json_text(&saup(&load(path)?, *tau)?),
        Command::Exante { path, fptas, c, eps } => {
            let mode = if *fptas { CurveMode::Fptas { c: *c, eps: *eps } } else { CurveMode::Exact };
            json_text(&exante(&load(path)?, mode)?)
        }
        Command::Prophet { path, args } => json_text(&prophet(&load(path)?, args)?.to_json()),
        Command::Oracle { path } => json_text(&json!({ "opt": oracle(&load(path)?)? })),
        Command::Convert { path, to, eps, out: dest } => {
            let converted = convert(&load(path)?, *to, *eps)?;
            return write_or_print(dest.as_deref(), &json_text(&InstanceFile::from_instance(&converted))?, out);
        }
        Command::Bench { dir, out: dest, args, no_timing } => {
            return write_or_print(dest.as_deref(), &bench(dir, args, *no_timing)?, out);
        }
        Command::Generate { kind, n, seed, max_rank, max_states, max_actions, max_drawers, max_atoms, out: dest } => {
            let mut rng = generate::seeded(*seed);
            let shape = MspShape { max_states: *max_states, max_actions: *max_actions, ..MspShape::default() };
            let inst = match kind {
                KindArg::Cms => Instance::Cms(generate::random_cms(&mut rng, *n, *max_rank, &shape)?),
                KindArg::Cabinets => {
                    Instance::Cabinets(generate::random_cabinets(&mut rng, *n, *max_rank, *max_drawers, *max_atoms)?)
                }
                KindArg::PandoraCabinets => Instance::PandoraCabinets(generate::random_pandora_cabinets(
                    &mut rng,
                    *n,
                    *max_rank,
                    *max_drawers,
                    *max_states,
                )?),
                KindArg::NoiPandora => Instance::NoiPandora(generate::random_noi(&mut rng, *n, *max_atoms)?),
            };
            return write_or_print(dest.as_deref(), &json_text(&InstanceFile::from_instance(&inst))?, out);
        }
    };
    print(out, &text?)?;
    Ok(0)
}

fn json_text<T: serde::Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Parse { path: "<output>".into(), source: e })?;
    s.push('\n');
    Ok(s)
}

fn print(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io { path: "<stdout>".into(), source: e })
}

fn emit(out: &mut dyn Write, v: &Value) -> CliResult<()> {
    print(out, &json_text(v)?)
}

fn write_or_print(dest: Option<&Path>, text: &str, out: &mut dyn Write) -> CliResult<i32> {
    match dest {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io { path: p.display().to_string(), source: e })?,
        None => print(out, text)?,
    }
    Ok(0)
}

/// Reads and parses an instance file.
pub fn read_file(path: &Path) -> CliResult<InstanceFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.display().to_string(), source: e })
}

/// Reads, parses and validates an instance file.
pub fn load(path: &Path) -> CliResult<Instance> {
    Ok(read_file(path)?.to_instance()?)
}

fn validate(path: &Path) -> (Value, i32) {
    match load(path) {
        Ok(inst) => (json!({ "valid": true, "kind": inst.kind(), "n": inst.len() }), 0),
        Err(e) => {
            let code = e.exit_code();
            (json!({ "valid": false, "error": e.to_string() }), code)
        }
    }
}

fn decision_json(m: &Msp, ids: &[String], s: usize, d: Decision) -> Value {
    match d {
        Decision::Act(a) => {
            let name = m.actions(s)[a].label.clone().unwrap_or_else(|| a.to_string());
            json!({ "state": ids[s], "decision": "act", "action": name })
        }
        Decision::HaltClaim => json!({ "state": ids[s], "decision": "claim" }),
        Decision::HaltNoClaim => json!({ "state": ids[s], "decision": "halt" }),
    }
}

fn msp_index(m: &Msp) -> CliResult<Value> {
    if !m.is_bandit() {
        return Ok(json!({ "bandit": false }));
    }
    let t = compute_indices(m)?;
    let ids = schema::state_ids(m);
    let states: Vec<Value> = (0..m.len())
        .map(|s| json!({ "state": ids[s], "sigma": t.sigma(s), "kappa": t.kappa(s).atoms() }))
        .collect();
    Ok(json!({ "bandit": true, "states": states }))
}

pub fn index(inst: &Instance) -> CliResult<Value> {
    Ok(match inst {
        Instance::Cms(i) => json!({ "processes": i.processes.iter().map(msp_index).collect::<CliResult<Vec<_>>>()? }),
        Instance::PandoraCabinets(i) => json!({ "cabinets": pandora_index(i)? }),
        Instance::NoiPandora(i) => json!({ "cabinets": pandora_index(&convert_noi_to_cabinets(i)?)? }),
        Instance::Cabinets(_) => {
            return Err(Error::Parameter("cabinet instances have no processes to index".into()).into())
        }
    })
}

fn pandora_index(i: &PandoraCabinetsInstance) -> CliResult<Vec<Vec<Value>>> {
    i.cabinets.iter().map(|c| c.iter().map(msp_index).collect()).collect()
}

fn msp_saup(m: &Msp, tau: f64) -> CliResult<Value> {
    let r = maxsaup(m, tau)?;
    let ids = schema::state_ids(m);
    let policy: Vec<Value> = (0..m.len()).map(|s| decision_json(m, &ids, s, r.policy.decision(s))).collect();
    Ok(json!({ "value": r.value, "start_index": r.table.sigma(m.start()), "policy": policy }))
}

pub fn saup(inst: &Instance, tau: f64) -> CliResult<Value> {
    Ok(match inst {
        Instance::Cms(i) => {
            json!({ "tau": tau, "processes": i.processes.iter().map(|m| msp_saup(m, tau)).collect::<CliResult<Vec<_>>>()? })
        }
        Instance::Cabinets(i) => {
            let rows: Vec<Value> = i
                .cabinets
                .iter()
                .map(|c| {
                    let r = cabinets_saup(c, tau);
                    json!({ "drawer": r.drawer, "value": r.value })
                })
                .collect();
            json!({ "tau": tau, "cabinets": rows })
        }
        Instance::PandoraCabinets(i) => json!({ "tau": tau, "cabinets": pandora_saup(i, tau)? }),
        Instance::NoiPandora(i) => json!({ "tau": tau, "cabinets": pandora_saup(&convert_noi_to_cabinets(i)?, tau)? }),
    })
}

fn pandora_saup(i: &PandoraCabinetsInstance, tau: f64) -> CliResult<Vec<Vec<Value>>> {
    i.cabinets.iter().map(|c| c.iter().map(|m| msp_saup(m, tau)).collect()).collect()
}

/// Default drawer selection cost: half the cheapest first advance, at most ½.
pub fn default_conversion_eps(inst: &PandoraCabinetsInstance) -> f64 {
    0.5 * min_first_advance_cost(inst).min(1.0)
}

/// Process form of any instance with processes.
fn as_cms(inst: &Instance) -> CliResult<CmsInstance> {
    let pc = match inst {
        Instance::Cms(i) => return Ok(i.clone()),
        Instance::Cabinets(_) => {
            return Err(Error::Parameter("cabinet instances have no process form".into()).into())
        }
        Instance::PandoraCabinets(i) => i.clone(),
        Instance::NoiPandora(i) => convert_noi_to_cabinets(i)?,
    };
    Ok(convert_cabinets_to_cms(&pc, default_conversion_eps(&pc))?)
}

pub fn exante(inst: &Instance, mode: CurveMode) -> CliResult<Value> {
    let sol = match inst {
        Instance::Cabinets(i) => exante_opt_cabinets(i)?,
        _ => exante_opt_cms(&as_cms(inst)?, mode)?,
    };
    Ok(json!({ "q": sol.q, "z": sol.z, "objective": sol.objective }))
}

/// Welfare estimate together with the relaxation it is measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct ProphetReport {
    pub estimate: WelfareEstimate,
    pub exante_objective: f64,
    /// Welfare the guarantee promises.
    pub bound: f64,
}

impl ProphetReport {
    pub fn ratio(&self) -> Option<f64> {
        (self.exante_objective > 0.0).then(|| self.estimate.mean / self.exante_objective)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "mean": self.estimate.mean,
            "se": self.estimate.se,
            "trials": self.estimate.trials,
            "exante_objective": self.exante_objective,
            "bound": self.bound,
            "ratio": self.ratio(),
        })
    }
}

fn threshold_mode(args: &ProphetArgs, n: usize) -> ThresholdMode {
    match args.threshold_mode {
        ThresholdArg::Auto => ThresholdMode::auto(n),
        ThresholdArg::Exact => ThresholdMode::Exact,
        ThresholdArg::MonteCarlo => ThresholdMode::MonteCarlo { samples: args.samples },
    }
}

/// Runs the online algorithm matching the instance kind.
pub fn prophet(inst: &Instance, args: &ProphetArgs) -> CliResult<ProphetReport> {
    if let Instance::Cabinets(i) = inst {
        let sol = exante_opt_cabinets(i)?;
        let mode = threshold_mode(args, i.cabinets.len());
        let mut runner = MatroidCabinetsRunner::new(i, &sol.q, &sol.z, mode, args.seed)?;
        let estimate = estimate_welfare(&mut runner, args.trials, args.seed)?;
        return Ok(ProphetReport { estimate, exante_objective: sol.objective, bound: 0.5 * sol.objective });
    }
    let cms = as_cms(inst)?;
    let plan = match args.plan {
        PlanArg::Exact => PlanMode::Exact,
        PlanArg::Fptas => PlanMode::Fptas,
    };
    let mode = threshold_mode(args, cms.processes.len());
    let mut runner = CmsRunner::new(&cms, args.eps, plan, mode, args.seed)?;
    let exante_objective = match exante_opt_cms(&cms, CurveMode::Exact) {
        Ok(sol) => sol.objective,
        Err(Error::SizeLimit { .. }) => runner.plan.exante.objective,
        Err(e) => return Err(e.into()),
    };
    let estimate = estimate_welfare(&mut runner, args.trials, args.seed)?;
    Ok(ProphetReport { estimate, exante_objective, bound: (0.5 - args.eps) * exante_objective })
}

/// Brute-force optimum of the instance.
pub fn oracle(inst: &Instance) -> CliResult<f64> {
    Ok(match inst {
        Instance::Cms(i) => brute_force_opt_cms(i)?,
        Instance::Cabinets(i) => brute_force_opt_cabinets(i)?,
        Instance::PandoraCabinets(i) => brute_force_opt_pandora_cabinets(i)?,
        Instance::NoiPandora(i) => brute_force_opt_noi(i)?,
    })
}

pub fn convert(inst: &Instance, to: ConvertTarget, eps: Option<f64>) -> CliResult<Instance> {
    let pc = match inst {
        Instance::NoiPandora(i) => convert_noi_to_cabinets(i)?,
        Instance::PandoraCabinets(i) if to == ConvertTarget::Cms => i.clone(),
        _ => {
            return Err(Error::Parameter(format!("cannot convert a {} instance to {to:?}", inst.kind())).into());
        }
    };
    Ok(match to {
        ConvertTarget::PandoraCabinets => Instance::PandoraCabinets(pc),
        ConvertTarget::Cms => {
            let eps = eps.unwrap_or_else(|| default_conversion_eps(&pc));
            Instance::Cms(convert_cabinets_to_cms(&pc, eps)?)
        }
    })
}

pub const CSV_HEADER: &str = "instance,kind,n,exante_obj,oracle_opt,alg_mean,alg_se,ratio,wall_ms";

fn bench(dir: &Path, args: &ProphetArgs, no_timing: bool) -> CliResult<String> {
    let read = std::fs::read_dir(dir).map_err(|e| CliError::Io { path: dir.display().to_string(), source: e })?;
    let mut files: Vec<PathBuf> = read
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for path in files {
        let start = Instant::now();
        // invalid corpus entries are skipped, not fatal
        let Ok(inst) = load(&path) else { continue };
        let report = prophet(&inst, args)?;
        let opt = match oracle(&inst) {
            Ok(v) => Some(v),
            Err(CliError::Core(Error::SizeLimit { .. })) => None,
            Err(e) => return Err(e),
        };
        let ms = if no_timing { 0 } else { start.elapsed().as_millis() };
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let field = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{name},{},{},{},{},{},{},{},{ms}",
            inst.kind(),
            inst.len(),
            report.exante_objective,
            field(opt),
            report.estimate.mean,
            report.estimate.se,
            field(report.ratio()),
        );
    }
    Ok(csv)
}
