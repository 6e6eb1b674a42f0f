//! Command-line front end: validate and run scenario files, generate the
//! canonical or random scenarios, and sweep a single config field across a
//! value list.
//!
//! Exit codes: 0 success, 1 validation failure (the message names the
//! offending field), 2 runtime invariant violation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lfsim_core::defender::Strategy;
use lfsim_core::engine::{self, MetricsTrace, ScenarioSpec, SimConfig};
use lfsim_core::scenario;

#[derive(Debug, Parser)]
#[command(name = "lfsim", version, about = "Link-flooding attack/defense simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write trace.csv plus summary.json.
    Run {
        scenario: PathBuf,
        /// Output directory for written artifacts.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Sweep one config field over a value list, e.g. `beta=0,1,2,3`.
        /// Runs once per value with derived seeds (base seed + index).
        #[arg(long, value_name = "FIELD=v1,v2,...")]
        sweep: Option<String>,
    },
    /// Write a scenario file.
    Generate {
        kind: GenerateKind,
        /// Node count for random scenarios (at least 4).
        #[arg(long, default_value_t = 8)]
        nodes: usize,
        /// Bot count for random scenarios.
        #[arg(long, default_value_t = 8)]
        bots: usize,
        /// Seed for random scenarios (required for `random`).
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load and validate a scenario file without running it.
    Validate { scenario: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GenerateKind {
    Figure1,
    Random,
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            out,
            seed,
            sweep,
        } => cmd_run(&scenario, &out, seed, sweep.as_deref()),
        Command::Generate {
            kind,
            nodes,
            bots,
            seed,
            out,
        } => cmd_generate(kind, nodes, bots, seed, out.as_deref()),
        Command::Validate { scenario } => cmd_validate(&scenario),
    }
}

fn load_spec(path: &Path) -> Result<ScenarioSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read `{}`: {e}", path.display())))?;
    ScenarioSpec::from_json_str(&text).map_err(|e| CliError::validation(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::validation(format!("cannot create `{}`: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::validation(format!("cannot write `{}`: {e}", path.display())))
}

fn run_one(spec: &ScenarioSpec, out_dir: &Path) -> Result<MetricsTrace, CliError> {
    let cfg = SimConfig::from_spec(spec).map_err(|e| CliError::validation(e.to_string()))?;
    let trace = engine::run(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out_dir.join("trace.csv"), &trace.trace_csv())?;
    write_file(&out_dir.join("summary.json"), &trace.summary_json())?;
    Ok(trace)
}

fn print_summary(trace: &MetricsTrace) {
    let s = &trace.summary;
    println!("summary:");
    println!("  attack_effective_fraction  {:.4}", s.attack_effective_fraction);
    println!("  bot_recall                 {:.4}", s.bot_recall);
    println!("  bot_precision              {:.4}", s.bot_precision);
    println!("  benign_false_positives     {}", s.benign_false_positives);
    println!("  reroute_total              {}", s.reroute_total);
}

fn cmd_run(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    sweep: Option<&str>,
) -> Result<(), CliError> {
    let mut spec = load_spec(scenario)?;
    if let Some(seed) = seed {
        spec.sim.rng_seed = seed;
    }

    let Some(sweep) = sweep else {
        let trace = run_one(&spec, out)?;
        print_summary(&trace);
        println!(
            "wrote {} and {}",
            out.join("trace.csv").display(),
            out.join("summary.json").display()
        );
        return Ok(());
    };

    let (field, values) = sweep
        .split_once('=')
        .ok_or_else(|| CliError::validation("sweep must look like FIELD=v1,v2,..."))?;
    let values: Vec<&str> = values.split(',').filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(CliError::validation("sweep needs at least one value"));
    }
    let base_seed = spec.sim.rng_seed;
    let mut comparison = String::from(
        "field,value,attack_effective_fraction,bot_recall,bot_precision,benign_false_positives,reroute_total\n",
    );
    for (index, value) in values.iter().enumerate() {
        let mut run_spec = spec.clone();
        apply_sweep_value(&mut run_spec, field, value)?;
        run_spec.sim.rng_seed = base_seed + index as u64;
        let run_dir = out.join(format!("{field}_{}", value.replace('.', "p")));
        let trace = run_one(&run_spec, &run_dir)?;
        let s = &trace.summary;
        writeln!(
            comparison,
            "{field},{value},{:.6},{:.6},{:.6},{},{}",
            s.attack_effective_fraction,
            s.bot_recall,
            s.bot_precision,
            s.benign_false_positives,
            s.reroute_total
        )
        .expect("writing to a string");
        println!(
            "{field}={value}: effectiveness {:.4}, recall {:.4}, precision {:.4}, reroutes {}",
            s.attack_effective_fraction, s.bot_recall, s.bot_precision, s.reroute_total
        );
    }
    let comparison_path = out.join(format!("sweep_{field}.csv"));
    write_file(&comparison_path, &comparison)?;
    println!("wrote {}", comparison_path.display());
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::validation(format!("cannot parse `{value}` for field `{field}`")))
}

/// Set one swept SimConfig field from its textual value.
fn apply_sweep_value(spec: &mut ScenarioSpec, field: &str, value: &str) -> Result<(), CliError> {
    match field {
        "k" => spec.attacker.k = parse(field, value)?,
        "bot_rate_cap" => spec.attacker.bot_rate_cap = parse(field, value)?,
        "attack_margin" => spec.attacker.attack_margin = parse(field, value)?,
        "t_a" => spec.attacker.t_a = parse(field, value)?,
        "probe_duration" => spec.attacker.probe_duration = parse(field, value)?,
        "theta_dos" => spec.defender.theta_dos = parse(field, value)?,
        "d" => spec.defender.d = parse(field, value)?,
        "t_d" => spec.defender.t_d = parse(field, value)?,
        "batch_delay" => spec.defender.batch_delay = parse(field, value)?,
        "control_delay" => spec.defender.control_delay = parse(field, value)?,
        "beta" => spec.defender.beta = parse(field, value)?,
        "rho" => spec.defender.rho = parse(field, value)?,
        "s_threshold" => {
            spec.defender.s_threshold = match value {
                "null" | "none" => None,
                v => Some(parse(field, v)?),
            }
        }
        "strategy" => {
            spec.defender.strategy = match value {
                "random" => Strategy::Random,
                "homogeneous" => Strategy::Homogeneous,
                other => {
                    return Err(CliError::validation(format!(
                        "unknown strategy `{other}` for field `strategy`"
                    )))
                }
            }
        }
        "total_ticks" => spec.sim.total_ticks = parse(field, value)?,
        "rng_seed" => spec.sim.rng_seed = parse(field, value)?,
        other => {
            return Err(CliError::validation(format!(
                "unknown sweep field `{other}`; it must name a scenario config field"
            )))
        }
    }
    Ok(())
}

fn cmd_generate(
    kind: GenerateKind,
    nodes: usize,
    bots: usize,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let spec = match kind {
        GenerateKind::Figure1 => scenario::figure1_spec(),
        GenerateKind::Random => {
            let seed =
                seed.ok_or_else(|| CliError::validation("random scenarios require --seed"))?;
            scenario::random_spec(nodes, bots, seed)
                .map_err(|e| CliError::validation(e.to_string()))?
        }
    };
    let text = spec.to_json_string();
    match out {
        Some(path) => {
            write_file(path, &text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_validate(scenario: &Path) -> Result<(), CliError> {
    let spec = load_spec(scenario)?;
    let cfg = SimConfig::from_spec(&spec).map_err(|e| CliError::validation(e.to_string()))?;
    println!(
        "OK: {} nodes, {} links, {} hosts, {} ticks",
        cfg.topology.nodes().len(),
        cfg.topology.link_count(),
        cfg.topology.hosts().count(),
        cfg.total_ticks
    );
    Ok(())
}
