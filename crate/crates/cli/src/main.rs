//! `tangle`: fitting, geodesics, Log maps and validation for tangles.
//!
//! Exit codes: 0 success, 1 I/O or malformed input, 2 an iterative method
//! did not converge (outputs are still written).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "tangle",
    version,
    about = "Tangle shape spaces from the command line"
)]
struct Cli {
    /// Log progress to standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit an n-link tangle to a sampled curve.
    Fit(FitArgs),
    /// Integrate a geodesic from a tangle.
    Geodesic(GeodesicArgs),
    /// Estimate the initial velocity of a geodesic joining two tangles.
    Logmap(LogmapArgs),
    /// Report how far a tangle document is from satisfying the model.
    Validate(ValidateArgs),
    /// Print the numerical rank of the closure constraint Jacobian.
    Rank(RankArgs),
    /// Sample a tangle as `t,x,y,z` rows.
    Sample(SampleArgs),
    /// Generate test curves as headerless `x,y,z` rows.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Args, Debug)]
struct FitArgs {
    /// CSV of ordered points, `x,y,z` or `t,x,y,z`, optional header row.
    #[arg(long)]
    curve: PathBuf,
    /// Number of links n.
    #[arg(long)]
    links: usize,
    /// Fit an open tangle (default).
    #[arg(long, conflicts_with = "closed")]
    open: bool,
    /// Fit a closed tangle; the curve's last point must equal its first.
    #[arg(long)]
    closed: bool,
    #[arg(long, default_value_t = 20)]
    samples_per_link: usize,
    /// Initial penalty weight.
    #[arg(long, default_value_t = 1.0)]
    initial_weight: f64,
    /// Penalty growth per outer iteration.
    #[arg(long, default_value_t = 10.0)]
    growth_factor: f64,
    #[arg(long, default_value_t = 8)]
    outer_iterations: usize,
    /// Gradient-norm tolerance of each inner solve.
    #[arg(long, default_value_t = 1e-8)]
    inner_tolerance: f64,
    /// Inner solver: levenberg-marquardt or gradient-descent.
    #[arg(long, default_value = "levenberg-marquardt")]
    solver: String,
    /// Additional randomly perturbed starts.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    /// Seed for the restart perturbations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for tangle.json, target.csv, fitted.csv and
    /// fit_report.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TangentSource {
    /// Initial velocity as a JSON array.
    #[arg(long, group = "source")]
    tangent: Option<String>,
    /// File holding the initial velocity as a JSON array.
    #[arg(long, group = "source")]
    tangent_file: Option<PathBuf>,
    /// Draw a Gaussian initial velocity from this seed (projected onto the
    /// tangent space in closed mode).
    #[arg(long, group = "source")]
    seed: Option<u64>,
    /// Length of a seeded velocity.
    #[arg(long, default_value_t = 0.5)]
    norm: f64,
}

#[derive(Args, Debug)]
struct GeodesicArgs {
    /// Tangle JSON; its `closed` flag selects the torus or closed geodesic.
    #[arg(long)]
    tangle: PathBuf,
    #[command(flatten)]
    source: TangentSource,
    /// Integration steps on [0, 1]; the output has steps + 1 tangles.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// rk4, midpoint or euler.
    #[arg(long, default_value = "rk4")]
    integrator: String,
    /// Treat V_0, V_1 as unknowns instead of pinning them.
    #[arg(long)]
    free_first_link: bool,
    /// Output JSON; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LogmapArgs {
    #[arg(long)]
    from: PathBuf,
    #[arg(long)]
    to: PathBuf,
    /// Stop once the endpoint gap is at most this.
    #[arg(long, default_value_t = 1e-3)]
    threshold: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value = "rk4")]
    integrator: String,
    #[arg(long)]
    free_first_link: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    tangle: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankArgs {
    /// Closed tangle JSON.
    #[arg(long)]
    tangle: PathBuf,
    #[arg(long)]
    free_first_link: bool,
    /// Singular values below this fraction of the largest count as zero.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    tangle: PathBuf,
    /// Samples per link counting both of its endpoints; shared joints are
    /// written once.
    #[arg(long, default_value_t = 20)]
    samples_per_link: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// `(a cos t, a sin t, b t)` on [0, nπ/2].
    Helix {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        links: usize,
        #[arg(long, default_value_t = 20)]
        samples_per_link: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// `(a cos t + cos bt cos ct, a sin t + cos bt sin ct, d sin ct)`,
    /// resampled by arc length onto an n-link grid; the last row repeats
    /// the first.
    Closed {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        links: usize,
        #[arg(long, default_value_t = 20)]
        samples_per_link: usize,
        /// Raw samples of the parametric curve before resampling.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Geodesic(a) => commands::geodesic(a),
        Command::Logmap(a) => commands::logmap(a),
        Command::Validate(a) => commands::validate(a),
        Command::Rank(a) => commands::rank(a),
        Command::Sample(a) => commands::sample(a),
        Command::Gen(g) => commands::generate(g),
    };
    match result {
        Ok(commands::Outcome::Done) => ExitCode::SUCCESS,
        Ok(commands::Outcome::NotConverged(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
