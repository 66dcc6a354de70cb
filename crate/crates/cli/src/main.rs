use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use weakfix_core::lambda::{LambdaReading, SequenceVariant};
use weakfix_core::report::{emit_reports, Format, RunReport};
use weakfix_core::run::{
    run_hunt, run_lambda, run_solve, run_verify, HuntOptions, LambdaOptions, SolveOptions,
    VerifyOptions,
};
use weakfix_core::scenario::{resolve, Scenario, BUILTIN_NAMES};
use weakfix_core::{ConditionVariant, Error, ErrorClass};

const EXIT_VIOLATION: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "weakfix", version, about = "Check and solve weakly contractive map families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value = "text", global = true)]
    format: OutputFormat,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeqVariant {
    Plain,
    Doubled,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reading {
    Raw,
    MaxMetric,
}

#[derive(Subcommand)]
enum Command {
    /// Print the built-in scenario names.
    List {
        #[command(flatten)]
        output: Output,
    },
    /// Hypothesis checks and the contractive condition.
    Verify {
        /// Built-in name or path to a TOML scenario.
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        indices: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Treat failed class prechecks as load errors.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Picard iteration, certificate, envelope and residuals.
    Solve {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        output: Output,
    },
    /// λ-sequence or series analysis of the coefficient schedule.
    Lambda {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, value_enum)]
        variant: Option<SeqVariant>,
        #[arg(long, value_enum, default_value = "raw")]
        reading: Reading,
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Seeded counterexample search.
    Hunt {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        output: Output,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Invalid => EXIT_INVALID,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

fn parse_variant(v: &Option<String>) -> Result<Option<ConditionVariant>, Error> {
    v.as_deref().map(str::parse).transpose()
}

fn run_all(
    names: &[String],
    strict: bool,
    f: impl Fn(&Scenario) -> Result<RunReport, Error>,
) -> Result<Vec<RunReport>, Error> {
    names
        .iter()
        .map(|n| resolve(n, strict).and_then(|sc| f(&sc)))
        .collect()
}

fn write(output: &Output, text: &str) -> Result<(), Error> {
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn format_of(output: &Output) -> Format {
    match output.format {
        OutputFormat::Json => Format::Json,
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Text => Format::Text,
    }
}

fn execute(cli: Cli) -> Result<u8, Error> {
    let (reports, output) = match cli.command {
        Command::List { output } => {
            let text = match output.format {
                OutputFormat::Json => {
                    let quoted: Vec<String> = BUILTIN_NAMES.iter().map(|n| format!("\"{n}\"")).collect();
                    format!("[{}]\n", quoted.join(", "))
                }
                _ => BUILTIN_NAMES.iter().map(|n| format!("{n}\n")).collect(),
            };
            write(&output, &text)?;
            return Ok(0);
        }
        Command::Verify {
            scenarios,
            variant,
            grid,
            indices,
            seed,
            strict,
            output,
        } => {
            let opts = VerifyOptions {
                variant: parse_variant(&variant)?,
                grid,
                indices,
                seed,
            };
            (run_all(&scenarios, strict, |sc| run_verify(sc, &opts))?, output)
        }
        Command::Solve {
            scenarios,
            start,
            max_steps,
            tol,
            strict,
            output,
        } => {
            let opts = SolveOptions {
                start,
                max_steps,
                tolerance: tol,
            };
            (run_all(&scenarios, strict, |sc| run_solve(sc, &opts))?, output)
        }
        Command::Lambda {
            scenarios,
            horizon,
            variant,
            reading,
            strict,
            output,
        } => {
            let opts = LambdaOptions {
                horizon,
                sequence: variant.map(|v| match v {
                    SeqVariant::Plain => SequenceVariant::Plain,
                    SeqVariant::Doubled => SequenceVariant::Doubled,
                }),
                reading: match reading {
                    Reading::Raw => LambdaReading::RawValues,
                    Reading::MaxMetric => LambdaReading::MaxMetricSteps,
                },
            };
            (run_all(&scenarios, strict, |sc| run_lambda(sc, &opts))?, output)
        }
        Command::Hunt {
            scenarios,
            variant,
            budget,
            seed,
            strict,
            output,
        } => {
            let opts = HuntOptions {
                variant: parse_variant(&variant)?,
                budget,
                seed,
            };
            (run_all(&scenarios, strict, |sc| run_hunt(sc, &opts))?, output)
        }
    };
    write(&output, &emit_reports(&reports, format_of(&output))?)?;
    Ok(if reports.iter().all(RunReport::passed) {
        0
    } else {
        EXIT_VIOLATION
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
