//! `openpnet` — parse, validate, derive, saturate, check and export
//! parameterised networks of synchronised automata.
//!
//! Exit codes: 0 success (a passing check), 1 failing check,
//! 2 inconclusive check, 3 usage or input errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use open_pnets::bisim::{self, CheckOptions, CheckVerdict};
use open_pnets::dsl::{self, System};
use open_pnets::semantics::{self, DeriveOptions};
use open_pnets::weak::{self, SaturateOptions};

#[derive(Parser)]
#[command(
    name = "openpnet",
    about = "Symbolic semantics and FH-bisimulation checking for open pNets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Args)]
struct CommonArgs {
    /// Directories searched for imported files.
    #[arg(long = "include", value_name = "DIR")]
    include: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model, run the structural checks and the non-observability
    /// condition.
    Validate {
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Derive the strong open automaton.
    Derive {
        file: PathBuf,
        /// Print state and transition counts only.
        #[arg(long)]
        stats: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Maximum number of reachable global states.
        #[arg(long, default_value_t = 10_000)]
        state_cap: usize,
        /// Keep intermediate unification variables in the transitions.
        #[arg(long)]
        no_simplify: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Derive the weak open automaton by bounded saturation.
    Saturate {
        file: PathBuf,
        /// Maximum number of concatenations per weak transition.
        #[arg(long, default_value_t = 3)]
        weak_depth: u32,
        #[arg(long, default_value_t = 10_000)]
        state_cap: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check a candidate relation for FH-bisimulation.
    Check {
        /// The left model.
        spec: PathBuf,
        /// The right model.
        implementation: PathBuf,
        /// The relation file (`left | right | predicate` per line).
        relation: PathBuf,
        /// Check weak FH-bisimulation (the default).
        #[arg(long, conflicts_with = "strong")]
        weak: bool,
        /// Check strong FH-bisimulation.
        #[arg(long)]
        strong: bool,
        #[arg(long, default_value_t = 3)]
        weak_depth: u32,
        #[arg(long, default_value_t = 10_000)]
        state_cap: usize,
        /// Worker threads for discharging proof obligations.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Export the elaborated pNet tree.
    Export {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Render clap's message but keep the documented exit code.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn load(path: &PathBuf, include: &[PathBuf]) -> Result<System> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut dirs: Vec<PathBuf> = Vec::new();
    if let Some(parent) = path.parent() {
        dirs.push(parent.to_path_buf());
    }
    dirs.extend(include.iter().cloned());
    let sys = dsl::load_system(&text, &dirs)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    for w in &sys.warnings {
        eprintln!("warning: {w}");
    }
    Ok(sys)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { file, common } => {
            let sys = load(&file, &common.include)?;
            let diagnostics = sys.net.validate();
            if !diagnostics.is_empty() {
                for d in &diagnostics {
                    eprintln!("{d}");
                }
                return Err(anyhow!("{} diagnostic(s)", diagnostics.len()));
            }
            let report = sys.net.check_non_observability();
            if report.passed() {
                println!("ok; non-observability: pass");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("ok; non-observability: FAIL");
                for v in &report.violations {
                    println!("  {v}");
                }
                Ok(ExitCode::from(1))
            }
        }
        Command::Derive {
            file,
            stats,
            format,
            state_cap,
            no_simplify,
            common,
        } => {
            let sys = load(&file, &common.include)?;
            let oa = semantics::derive(
                &sys,
                DeriveOptions {
                    simplify: !no_simplify,
                    state_cap,
                },
            )?;
            if stats {
                println!(
                    "{} states, {} satisfiable OTs",
                    oa.states.len(),
                    oa.transitions.len()
                );
                println!("{} unsatisfiable OTs discarded", oa.unsat_count);
                return Ok(ExitCode::SUCCESS);
            }
            match format {
                Format::Text => {
                    println!(
                        "open automaton of {}: {} states, initial {}",
                        oa.name,
                        oa.states.len(),
                        oa.initial.label()
                    );
                    for t in &oa.transitions {
                        println!("{t}");
                    }
                }
                Format::Json => println!("{}", serde_json::to_string_pretty(&oa.to_json())?),
                Format::Dot => print!("{}", oa.to_dot()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Saturate {
            file,
            weak_depth,
            state_cap,
            format,
            common,
        } => {
            let sys = load(&file, &common.include)?;
            if !sys.net.check_non_observability().passed() {
                eprintln!(
                    "warning: the model observes silent actions; weak semantics may be unsound"
                );
            }
            let oa = semantics::derive(
                &sys,
                DeriveOptions {
                    simplify: true,
                    state_cap,
                },
            )?;
            let woa = weak::saturate(
                &oa,
                SaturateOptions {
                    depth: weak_depth,
                    ..Default::default()
                },
            )?;
            match format {
                Format::Text => {
                    println!(
                        "weak open automaton of {} at depth {}: {} transitions",
                        woa.name,
                        woa.depth,
                        woa.transitions.len()
                    );
                    print!("{}", woa.table());
                }
                Format::Json => println!("{}", serde_json::to_string_pretty(&woa.to_json())?),
                Format::Dot => print!("{}", woa.to_dot()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            spec,
            implementation,
            relation,
            weak,
            strong,
            weak_depth,
            state_cap,
            jobs,
            format,
            common,
        } => {
            let left = load(&spec, &common.include)?;
            let right = load(&implementation, &common.include)?;
            let relation_text = std::fs::read_to_string(&relation)
                .with_context(|| format!("reading {}", relation.display()))?;
            let opts = DeriveOptions {
                simplify: true,
                state_cap,
            };
            let oa_left = semantics::derive(&left, opts)?;
            let oa_right = semantics::derive(&right, opts)?;
            let check_opts = CheckOptions {
                weak_depth,
                jobs,
                ..Default::default()
            };
            let report = if strong {
                bisim::check_strong(&oa_left, &oa_right, &relation_text, check_opts)?
            } else {
                let _ = weak; // weak is the default mode
                bisim::check_weak(&oa_left, &oa_right, &relation_text, check_opts)?
            };
            match format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json | Format::Dot => {
                    println!("{}", serde_json::to_string_pretty(&report)?)
                }
            }
            Ok(match report.verdict {
                CheckVerdict::Pass => ExitCode::SUCCESS,
                CheckVerdict::Fail => ExitCode::from(1),
                CheckVerdict::Inconclusive => ExitCode::from(2),
            })
        }
        Command::Export { file, format, common } => {
            let sys = load(&file, &common.include)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&sys.net.to_json())?),
                Format::Text => print!("{}", dsl::print_system(&sys)),
                Format::Dot => return Err(anyhow!("export supports json or text")),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
