use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(name = "lmm", version, about = "Exact large moments of coupled linear ODE systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct RunArgs {
    /// System document (JSON).
    pub system: PathBuf,
    /// Initial values document (JSON).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Highest moment index.
    #[arg(long, default_value_t = 8)]
    pub mu: usize,
    /// eps-window `l:r`; give once for all components or once per component.
    #[arg(long = "window", allow_hyphen_values = true)]
    pub windows: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Uncouple, normalize and propagate; writes moment files and a manifest.
    Pipeline {
        #[command(flatten)]
        run: RunArgs,
        /// Recompute with every window one order higher and compare.
        #[arg(long)]
        verify_window: bool,
        /// Compare against the direct coefficient-comparison oracle.
        #[arg(long)]
        oracle_check: bool,
        /// Extend existing moment files in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Propagate a recurrence file.
    Moments {
        recurrence: PathBuf,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        mu: usize,
        #[arg(long, allow_hyphen_values = true, default_value = "0:0")]
        window: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the uncoupled stages and their recurrences.
    Uncouple {
        system: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Guess a recurrence from a moment file.
    Guess {
        moments: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_order: usize,
        #[arg(long, default_value_t = 3)]
        max_degree: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a recurrence layer by layer in closed form where possible.
    Solve {
        recurrence: PathBuf,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        mu: usize,
        #[arg(long, allow_hyphen_values = true, default_value = "0:0")]
        window: String,
        /// Closed-form rhs of one layer as `k=<expr in n>`; overrides the file rhs.
        #[arg(long = "rhs-expr", allow_hyphen_values = true)]
        rhs_expr: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pipeline and the direct oracle and compare every layer.
    OracleCheck {
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Failure of a command: a machine-readable class plus detail.
pub struct Failure {
    pub class: &'static str,
    pub detail: String,
}

impl From<lmm_core::Error> for Failure {
    fn from(e: lmm_core::Error) -> Self {
        Failure {
            class: e.class(),
            detail: e.to_string(),
        }
    }
}

pub fn exit_code(class: &str) -> u8 {
    match class {
        "degenerate" => 10,
        "division-by-zero" => 11,
        "parse-error" => 12,
        "invalid-system" => 13,
        "invalid-argument" => 14,
        "window-shortfall" => 15,
        "capacity-shortfall" => 16,
        "init-shortfall" => 17,
        "init-inconsistent" => 18,
        "insufficient-length" => 19,
        "singular-point" => 20,
        "non-expandable" => 21,
        "insufficient-moments" => 22,
        "hash-mismatch" => 23,
        "oracle-mismatch" => 24,
        "io-error" => 25,
        "no-recurrence-found" => 30,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Pipeline {
            run,
            verify_window,
            oracle_check,
            resume,
        } => commands::pipeline(&run, verify_window, oracle_check, resume),
        Command::Moments {
            recurrence,
            init,
            mu,
            window,
            out,
        } => commands::moments(&recurrence, init.as_deref(), mu, &window, out.as_deref()),
        Command::Uncouple { system, out } => commands::uncouple(&system, out.as_deref()),
        Command::Guess {
            moments,
            max_order,
            max_degree,
            out,
        } => commands::guess(&moments, max_order, max_degree, out.as_deref()),
        Command::Solve {
            recurrence,
            init,
            mu,
            window,
            rhs_expr,
            out,
        } => commands::solve(&recurrence, init.as_deref(), mu, &window, &rhs_expr, out.as_deref()),
        Command::OracleCheck { run } => commands::oracle_check(&run),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}: {}", f.class, f.detail.replace('\n', " "));
            ExitCode::from(exit_code(f.class))
        }
    }
}
