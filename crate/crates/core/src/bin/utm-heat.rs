use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use utm_heat::cli::{parse_times, run_compare, run_example, run_solve, CliError, Overrides, RunOutput};
use utm_heat::config::{Example, Method, RunConfig};

#[derive(Parser)]
#[command(name = "utm-heat", version, about = "Heat conduction in layered media by the unified transform method")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configured problem and write `x,t,layer,u,flux` rows.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Solve and report the relative error against a reference method.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run a built-in example: A, A0, B, C, D, E or F.
    Example {
        name: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Fd,
    Fourier,
}

#[derive(Args)]
struct OverrideArgs {
    /// Comma-separated output times.
    #[arg(long)]
    times: Option<String>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    oracle: Option<Oracle>,
    #[arg(long = "theta-max")]
    theta_max: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long = "fixed-T")]
    fixed_t: Option<f64>,
}

impl OverrideArgs {
    fn resolve(&self) -> Result<Overrides, String> {
        Ok(Overrides {
            times: self.times.as_deref().map(parse_times).transpose()?,
            grid: self.grid,
            output: self.output.clone(),
            oracle: self.oracle.map(|o| match o {
                Oracle::Fd => Method::Fd,
                Oracle::Fourier => Method::Fourier,
            }),
            theta_max: self.theta_max,
            nodes: self.nodes,
            fixed_t: self.fixed_t,
        })
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::from_path(path)?;
    overrides.apply(&mut config);
    Ok(config)
}

fn report(out: &RunOutput) {
    let d = &out.field.diagnostics;
    if d.endpoint_caveat {
        eprintln!("note: end-point values with nonhomogeneous boundary data are unreliable");
    }
    if d.max_interpolated_fraction > 0.0 {
        eprintln!("note: {:.1}% of contour nodes interpolated", 100.0 * d.max_interpolated_fraction);
    }
    if let Some(reference) = out.reference {
        println!("reference: {reference}");
        print!("{}", out.error_table());
    } else if out.written.is_empty() {
        print!("{}", out.csv);
    }
    for path in &out.written {
        eprintln!("wrote {}", path.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let overrides = match &cli.command {
        Command::Solve { overrides, .. } | Command::Compare { overrides, .. } | Command::Example { overrides, .. } => {
            overrides.resolve()
        }
    };
    let overrides = match overrides {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Solve { config, .. } => load(config, &overrides).and_then(|c| run_solve(&c)),
        Command::Compare { config, .. } => load(config, &overrides).and_then(|c| run_compare(&c)),
        Command::Example { name, .. } => match name.parse::<Example>() {
            Ok(ex) => run_example(ex, &overrides),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };
    match result {
        Ok(out) => {
            report(&out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
