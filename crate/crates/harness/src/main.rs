use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mitigator_core::confusion::InductionType;
use mitigator_core::dsl::{
    builtin_program, compile_source, load_policy, parse_policy, validate_program, CompileError, PolicyProgram,
};
use mitigator_core::engine::{EngineConfig, ProductiveDispatch};
use mitigator_harness::exact::{analyze, ExactOptions, ExactReport};
use mitigator_harness::report::{bold, color_enabled};
use mitigator_harness::{emit_report, load_params, load_scenarios, replay_file, run_batch, Format, RunConfig};

/// Exit status for validation failures (bad policy, invariant violations).
const EXIT_INVALID: u8 = 1;
/// Exit status for runtime errors (IO, bad arguments, bad input files).
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mitigator",
    version,
    about = "Evaluate confusion-mitigation dialogue policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded simulated trials and report metrics.
    Run {
        /// Policy file, or `builtin`.
        #[arg(long, default_value = "builtin")]
        policy: String,
        /// Scenario file, `builtin` (all inductions) or `builtin:<induction>`.
        #[arg(long = "scenario", required = true)]
        scenarios: Vec<String>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for per-trial logs and report files.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
        /// Record real timestamps and random session ids.
        #[arg(long)]
        wall_clock: bool,
    },
    /// Exact absorption analysis of a policy against simulated users.
    Analyze {
        #[arg(long, default_value = "builtin")]
        policy: String,
        /// Parameter file, or `builtin`.
        #[arg(long, default_value = "builtin")]
        params: String,
        #[arg(long, default_value_t = mitigator_harness::exact::DEFAULT_BINS)]
        bins: usize,
        /// Restrict to one induction (keyword or name).
        #[arg(long)]
        induction: Option<String>,
        /// Use the general ladder for productive confusion.
        #[arg(long)]
        general_ladder: bool,
        #[arg(long, default_value_t = mitigator_harness::exact::DEFAULT_MAX_STATES)]
        max_states: usize,
        #[arg(long, value_enum, default_value_t = Precision::F64)]
        precision: Precision,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
    },
    /// Parse and validate a policy file.
    Validate {
        #[arg(long)]
        policy: String,
    },
    /// Re-check session logs against the engine invariants.
    Replay {
        /// Log file, or a directory searched recursively for `.jsonl` logs.
        #[arg(long = "log", required = true)]
        logs: Vec<PathBuf>,
        /// Policy used to re-execute logs; the builtin is always tried.
        #[arg(long)]
        policy: Option<String>,
    },
}

enum Failure {
    Invalid(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load_program(spec: &str) -> Result<PolicyProgram, Failure> {
    let source = load_policy(spec).with_context(|| format!("reading policy {spec}"))?;
    compile_source(&source).map_err(|e| match e {
        CompileError::Parse(e) => Failure::Invalid(format!("{spec}: {e}")),
        CompileError::Invalid(diagnostics) => {
            let lines: Vec<String> = diagnostics.iter().map(|d| format!("{spec}: {d}")).collect();
            Failure::Invalid(lines.join("\n"))
        }
    })
}

fn cmd_run(
    policy: &str,
    scenarios: &[String],
    trials: u64,
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
    wall_clock: bool,
) -> Result<(), Failure> {
    let program = load_program(policy)?;
    let mut specs = Vec::new();
    for s in scenarios {
        specs.extend(load_scenarios(s).map_err(anyhow::Error::from)?);
    }
    let config = RunConfig {
        trials,
        root_seed: seed,
        output_dir: out,
        format,
        wall_clock,
    };
    let report = run_batch(&program, &specs, &config)?;
    print!(
        "{}",
        emit_report(&report, format, color_enabled()).map_err(anyhow::Error::from)?
    );
    Ok(())
}

fn summary_line(r: &ExactReport<f64>) -> String {
    let steps = r.expected_steps.map_or("-".to_string(), |s| format!("{s:.4}"));
    format!(
        "{:<26} {:>8} {:>10.6} {:>10} {:>10.6} {:>10.6} {:>10.2e} {:>6}",
        r.induction.name(),
        r.states,
        r.p_resolved,
        steps,
        r.p_disengaged,
        r.p_exhausted,
        r.p_unabsorbed,
        r.stuck_states
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    policy: &str,
    params: &str,
    bins: usize,
    induction: Option<&str>,
    general_ladder: bool,
    max_states: usize,
    precision: Precision,
    format: Format,
) -> Result<(), Failure> {
    let program = load_program(policy)?;
    let params = load_params(params).map_err(anyhow::Error::from)?;
    let inductions = match induction {
        None => InductionType::ALL.to_vec(),
        Some(k) => vec![InductionType::from_keyword(k)
            .or_else(|| InductionType::from_name(k))
            .ok_or_else(|| anyhow::anyhow!("unknown induction `{k}`"))?],
    };
    let config = EngineConfig {
        dispatch: if general_ladder {
            ProductiveDispatch::GeneralLadder
        } else {
            ProductiveDispatch::SubPolicy
        },
        ..EngineConfig::default()
    };
    let opts = ExactOptions {
        bins,
        max_states,
        ..ExactOptions::default()
    };
    let mut reports = Vec::new();
    for i in inductions {
        let r = match precision {
            Precision::F64 => analyze::<f64>(&program, &config, &params, i, &opts),
            Precision::F32 => analyze::<f32>(&program, &config, &params, i, &opts).map(|r| r.to_f64()),
        }
        .map_err(anyhow::Error::from)?;
        reports.push(r);
    }
    match format {
        Format::Jsonl => {
            for r in &reports {
                println!("{}", serde_json::to_string(r).expect("report serializes"));
            }
        }
        Format::Summary => {
            let header = format!(
                "{:<26} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>6}",
                "induction", "states", "resolved", "steps", "disengaged", "exhausted", "unabsorbed", "stuck"
            );
            println!("{}", bold(&header, color_enabled()));
            for r in &reports {
                println!("{}", summary_line(r));
            }
        }
    }
    Ok(())
}

fn cmd_validate(policy: &str) -> Result<(), Failure> {
    let source = load_policy(policy).with_context(|| format!("reading policy {policy}"))?;
    let ast = parse_policy(&source).map_err(|e| Failure::Invalid(format!("{policy}: {e}")))?;
    let diagnostics = validate_program(&ast);
    if diagnostics.is_empty() {
        println!("{policy}: ok");
        return Ok(());
    }
    let lines: Vec<String> = diagnostics.iter().map(|d| format!("{policy}: {d}")).collect();
    Err(Failure::Invalid(lines.join("\n")))
}

/// Expands directories into the `.jsonl` files below them, in sorted order.
fn collect_logs(path: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if !path.is_dir() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_logs(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "jsonl") && p.file_name().is_some_and(|n| n != "report.jsonl") {
            out.push(p);
        }
    }
    Ok(())
}

fn cmd_replay(logs: &[PathBuf], policy: Option<&str>) -> Result<(), Failure> {
    let mut programs = vec![Arc::new(builtin_program())];
    if let Some(p) = policy {
        programs.push(Arc::new(load_program(p)?));
    }
    let mut files = Vec::new();
    for path in logs {
        collect_logs(path, &mut files).with_context(|| format!("reading {}", path.display()))?;
    }
    let mut failed = Vec::new();
    for path in &files {
        let report = replay_file(path, &programs).map_err(anyhow::Error::from)?;
        let status = if report.is_clean() { "ok" } else { "FAILED" };
        println!(
            "{}: {status}: {} events, {} violations, re-execution {}",
            path.display(),
            report.events,
            report.violations.len(),
            serde_json::to_value(report.reexecution)
                .expect("serializes")
                .as_str()
                .unwrap_or("?")
        );
        for v in &report.violations {
            println!("  {v}");
        }
        if let Some(at) = report.divergence {
            println!("  regenerated transcript differs at event {at}");
        }
        if !report.is_clean() {
            failed.push(path.display().to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{} log(s) failed replay", failed.len())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            policy,
            scenarios,
            trials,
            seed,
            out,
            format,
            wall_clock,
        } => cmd_run(&policy, &scenarios, trials, seed, out, format, wall_clock),
        Command::Analyze {
            policy,
            params,
            bins,
            induction,
            general_ladder,
            max_states,
            precision,
            format,
        } => cmd_analyze(
            &policy,
            &params,
            bins,
            induction.as_deref(),
            general_ladder,
            max_states,
            precision,
            format,
        ),
        Command::Validate { policy } => cmd_validate(&policy),
        Command::Replay { logs, policy } => cmd_replay(&logs, policy.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
