use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use coflow_core::experiment::{self, ExperimentConfig, ExperimentKind, TraceSource};
use coflow_core::model::Instance;
use coflow_core::oracle::{oracle_check, OracleLimits};
use coflow_core::primal_dual::{order, Granularity, Permutation, DEFAULT_KAPPA};
use coflow_core::scheduler::{assign_cdls, assign_fdls, simulate};
use coflow_core::workload::{
    filter_min_flows, gen_density, gen_mix, parse_trace_records, trace_to_instance, Density,
    GenOptions, TraceOptions,
};
use coflow_core::{metrics, Error};
use serde_json::{json, Value};

/// Coflow ordering, list scheduling on parallel cores, and ratio experiments.
#[derive(Parser)]
#[command(name = "coflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance (default template mix, or a density mode).
    Generate {
        #[arg(long, default_value_t = 25)]
        coflows: usize,
        #[arg(long, default_value_t = 10)]
        ports: u32,
        #[arg(long, default_value_t = 5)]
        cores: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Flow-count regime; omit for the default template mix.
        #[arg(long)]
        density: Option<Density>,
        /// Draw releases uniformly from [0, SPREAD] instead of all zero.
        #[arg(long, allow_negative_numbers = true)]
        release_spread: Option<i64>,
        /// Directory for instance.json; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the coflow order and its dual lower bound.
    Order {
        /// Instance JSON file, or `-` for stdin.
        instance: PathBuf,
        #[arg(long, default_value = "flow")]
        granularity: Granularity,
        #[arg(long, default_value_t = DEFAULT_KAPPA, allow_negative_numbers = true)]
        kappa: f64,
        /// Include the per-iteration dual trace.
        #[arg(long)]
        emit_trace: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Order, assign to cores and simulate one instance.
    Schedule {
        instance: PathBuf,
        #[arg(long, default_value = "flow")]
        granularity: Granularity,
        #[arg(long, default_value_t = DEFAULT_KAPPA, allow_negative_numbers = true)]
        kappa: f64,
        #[arg(long)]
        emit_trace: bool,
        /// Include every transmission segment.
        #[arg(long)]
        emit_timeline: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a cluster trace into an instance.
    TraceImport {
        trace: PathBuf,
        /// Number of racks, which become ports 1..=N.
        #[arg(long, default_value_t = 150)]
        ports: u32,
        #[arg(long, default_value_t = 5)]
        cores: u32,
        /// Seed for the coflow weights.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rack number that maps to port 1.
        #[arg(long, default_value_t = 1)]
        rack_base: u32,
        /// Keep only coflows with at least this many flows.
        #[arg(long)]
        threshold: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch experiment and write rows.csv, aggregate.json and cdf.csv.
    Experiment {
        /// ratio-vs-coflows | ratio-vs-cores | density | trace-threshold | box | cdf
        kind: ExperimentKind,
        #[arg(long, default_value = "flow")]
        granularity: Granularity,
        /// Coflow counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        coflows: Option<Vec<usize>>,
        /// Core counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        cores: Option<Vec<u32>>,
        #[arg(long)]
        ports: Option<u32>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_KAPPA, allow_negative_numbers = true)]
        kappa: f64,
        #[arg(long, value_delimiter = ',')]
        density: Option<Vec<Density>>,
        /// Flow-count thresholds, comma separated.
        #[arg(long, value_delimiter = ',')]
        threshold: Option<Vec<usize>>,
        /// Trace file for trace-threshold.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        rack_base: u32,
        #[arg(long, allow_negative_numbers = true)]
        release_spread: Option<i64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the algorithm and its dual bound against exhaustive search.
    OracleCheck {
        instance: PathBuf,
        /// Check one granularity; both when omitted.
        #[arg(long)]
        granularity: Option<Granularity>,
        #[arg(long, default_value_t = DEFAULT_KAPPA, allow_negative_numbers = true)]
        kappa: f64,
        #[arg(long, default_value_t = OracleLimits::default().max_schedules)]
        max_schedules: u64,
    },
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    Ok(Instance::from_json(&read_input(path)?)?)
}

/// Writes `(name, body)` pairs under `dir` and returns the written paths.
fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<Value> {
    fs::create_dir_all(dir)
        .map_err(Error::from)
        .with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(Error::from)?;
        written.push(path.display().to_string());
    }
    Ok(json!({ "written": written }))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes") + "\n"
}

fn trace_records(p: &Permutation) -> Value {
    serde_json::to_value(&p.trace.records).expect("trace serializes")
}

fn emit(
    out: Option<&Path>,
    main_name: &str,
    main: Value,
    extra: Vec<(&str, String)>,
) -> Result<()> {
    match out {
        Some(dir) => {
            let mut files = vec![(main_name, pretty(&main))];
            files.extend(extra);
            print!("{}", pretty(&write_files(dir, &files)?));
        }
        None => print!("{}", pretty(&main)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            coflows,
            ports,
            cores,
            seed,
            density,
            release_spread,
            out,
        } => {
            let opts = GenOptions {
                cores,
                release_spread,
            };
            let inst = match density {
                Some(mode) => gen_density(coflows, ports, mode, seed, &opts)?,
                None => gen_mix(coflows, ports, seed, &opts)?,
            };
            let text = inst.to_json() + "\n";
            match out {
                Some(dir) => print!(
                    "{}",
                    pretty(&write_files(&dir, &[("instance.json", text)])?)
                ),
                None => print!("{text}"),
            }
        }
        Command::Order {
            instance,
            granularity,
            kappa,
            emit_trace,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let p = order(&inst, kappa, granularity)?;
            let mut doc = json!({
                "granularity": granularity.as_str(),
                "kappa": kappa,
                "order": p.order,
                "dual_cost": p.dual_cost,
            });
            let mut extra = Vec::new();
            if emit_trace {
                match out {
                    Some(_) => extra.push(("trace.jsonl", p.trace.to_json_lines())),
                    None => doc["trace"] = trace_records(&p),
                }
            }
            emit(out.as_deref(), "order.json", doc, extra)?;
        }
        Command::Schedule {
            instance,
            granularity,
            kappa,
            emit_trace,
            emit_timeline,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let p = order(&inst, kappa, granularity)?;
            let a = match granularity {
                Granularity::Flow => assign_fdls(&inst, &p)?,
                Granularity::Coflow => assign_cdls(&inst, &p)?,
            };
            let result = simulate(&inst, &p, &a)?;
            let embed_timeline = emit_timeline && out.is_none();
            let mut doc: Value = serde_json::from_str(&result.to_json(embed_timeline))?;
            doc["granularity"] = json!(granularity.as_str());
            doc["kappa"] = json!(kappa);
            doc["order"] = json!(p.order);
            doc["dual_cost"] = json!(p.dual_cost);
            doc["ratio"] = json!(metrics::ratio(result.objective, p.dual_cost)?);
            let mut extra = Vec::new();
            if emit_trace {
                match out {
                    Some(_) => extra.push(("trace.jsonl", p.trace.to_json_lines())),
                    None => doc["trace"] = trace_records(&p),
                }
            }
            if emit_timeline && out.is_some() {
                extra.push(("timeline.csv", result.timeline_csv()));
            }
            emit(out.as_deref(), "schedule.json", doc, extra)?;
        }
        Command::TraceImport {
            trace,
            ports,
            cores,
            seed,
            rack_base,
            threshold,
            out,
        } => {
            let records = parse_trace_records(&read_input(&trace)?)?;
            let opts = TraceOptions {
                cores,
                seed,
                rack_base,
            };
            let mut inst = trace_to_instance(&records, ports, &opts)?;
            if let Some(t) = threshold {
                if t == 0 {
                    return Err(Error::Config("threshold must be positive".into()).into());
                }
                inst = filter_min_flows(&inst, t);
            }
            let text = inst.to_json() + "\n";
            match out {
                Some(dir) => print!(
                    "{}",
                    pretty(&write_files(&dir, &[("instance.json", text)])?)
                ),
                None => print!("{text}"),
            }
        }
        Command::Experiment {
            kind,
            granularity,
            coflows,
            cores,
            ports,
            instances,
            seed,
            kappa,
            density,
            threshold,
            trace,
            rack_base,
            release_spread,
            out,
        } => {
            let mut cfg = ExperimentConfig::defaults(kind, granularity);
            cfg.seed = seed;
            cfg.kappa = kappa;
            cfg.release_spread = release_spread;
            if let Some(v) = coflows {
                cfg.coflows = v;
            }
            if let Some(v) = cores {
                cfg.cores = v;
            }
            if let Some(v) = ports {
                cfg.ports = v;
            }
            if let Some(v) = instances {
                cfg.instances = v;
            }
            if let Some(v) = density {
                cfg.densities = v;
            }
            if let Some(v) = threshold {
                cfg.thresholds = v;
            }
            if let Some(path) = trace {
                cfg.trace = Some(TraceSource {
                    records: parse_trace_records(&read_input(&path)?)?,
                    racks: cfg.ports,
                    rack_base,
                });
            }
            let report = experiment::run(&cfg)?;
            let written: Vec<String> = experiment::write_report(&report, &out)?
                .into_iter()
                .map(|name| out.join(name).display().to_string())
                .collect();
            print!("{}", pretty(&json!({ "written": written })));
        }
        Command::OracleCheck {
            instance,
            granularity,
            kappa,
            max_schedules,
        } => {
            let inst = load_instance(&instance)?;
            let limits = OracleLimits {
                max_schedules,
                ..OracleLimits::default()
            };
            let levels = match granularity {
                Some(g) => vec![g],
                None => vec![Granularity::Flow, Granularity::Coflow],
            };
            let mut checks = Vec::new();
            for g in levels {
                checks.push(oracle_check(&inst, kappa, g, &limits)?);
            }
            print!("{}", pretty(&serde_json::to_value(&checks)?));
            let failed: Vec<&str> = checks
                .iter()
                .filter(|c| !(c.dual_below_best && c.trivial_below_best && c.within_guarantee))
                .map(|c| c.granularity.as_str())
                .collect();
            if !failed.is_empty() {
                bail!(CheckFailed(failed.join(",")));
            }
        }
    }
    Ok(())
}

#[derive(Debug)]
struct CheckFailed(String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "oracle check failed for granularity {}", self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!(
                "{}",
                error_line("usage", message.lines().next().unwrap_or(""))
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if let Some(core) = e.downcast_ref::<Error>() {
                core.kind()
            } else if e.downcast_ref::<CheckFailed>().is_some() {
                "oracle-check-failed"
            } else {
                "internal"
            };
            eprintln!("{}", error_line(kind, &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
