//! Campaign runner CLI.
//!
//! Exit codes: 0 success, 1 config/usage error, 2 I/O error, 3 internal
//! invariant violation (panic).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mdcplan::campaign::{run_campaign, CampaignConfig, RunOptions};
use mdcplan::model::{tour_length, Point2D};
use mdcplan::service::closed_form_tour_time;
use mdcplan::Error;

#[derive(Parser)]
#[command(
    name = "mdcplan",
    version,
    about = "Mobile data-collector tour planning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign from a JSON config and write runs.csv / summary.csv.
    Run(RunArgs),
    /// Parse and validate a campaign config; exits non-zero on problems.
    Validate {
        /// Path to the campaign config.
        config: PathBuf,
    },
    /// Reference oracles for test tooling.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the campaign config.
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of seeds per node count (overrides the config).
    #[arg(long)]
    seeds: Option<usize>,
    /// Also dump per-run geometry CSVs (sensors, RPs, associations, tours).
    #[arg(long)]
    dump_geometry: bool,
    /// Record diffusion trajectory snapshots every K reverse steps
    /// (requires --dump-geometry).
    #[arg(long, value_name = "K")]
    snapshot_every: Option<usize>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exhaustive shortest tour over at most 9 points read from a CSV file
    /// with columns x_m,y_m.
    Tsp {
        /// Points file (CSV with header x_m,y_m).
        #[arg(long)]
        points: PathBuf,
        /// Treat the tour as closed (return to start).
        #[arg(long)]
        closed: bool,
    },
    /// Closed-form tour-time fixed point T = T_tr / (1 - rho).
    FixedPoint {
        /// Travel-only time in seconds.
        #[arg(long)]
        travel_time_s: f64,
        /// Uniform per-RP upload rate in bits per second.
        #[arg(long)]
        upload_rate_bps: f64,
        /// Comma-separated per-RP aggregate rates in bits per second.
        #[arg(long, value_delimiter = ',')]
        rp_rates_bps: Vec<f64>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) => 2,
        _ => 1,
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let config = CampaignConfig::load(&args.config)?;
    let opts = RunOptions {
        out_dir: args.out.clone(),
        seeds_override: args.seeds,
        dump_geometry: args.dump_geometry,
        snapshot_every: args.snapshot_every,
    };
    let results = run_campaign(&config, &opts)?;
    eprintln!(
        "wrote {} rows to {} (summary: {})",
        results.rows.len(),
        results.runs_csv.display(),
        results.summary_csv.display()
    );
    Ok(())
}

fn cmd_validate(path: &std::path::Path) -> Result<(), Error> {
    let config = CampaignConfig::load(path)?;
    let cells = config.sweep_n_sensors.len() * config.seeds * config.planners.len();
    eprintln!(
        "config ok: {} node counts x {} seeds x {} planners = {} rows",
        config.sweep_n_sensors.len(),
        config.seeds,
        config.planners.len(),
        cells
    );
    Ok(())
}

/// Exhaustive closed/open tour optimum; small inputs only.
fn brute_force_tour(points: &[Point2D], closed: bool) -> Result<(Vec<usize>, f64), Error> {
    let m = points.len();
    if m == 0 {
        return Err(Error::InvalidArgument("points file is empty".into()));
    }
    if m > 9 {
        return Err(Error::InvalidArgument(format!(
            "oracle accepts at most 9 points, got {m}"
        )));
    }
    let mut best_order: Vec<usize> = (0..m).collect();
    let mut best_len = tour_length(&best_order, points, closed)?;
    let mut order: Vec<usize> = (0..m).collect();
    permute(
        &mut order,
        0,
        points,
        closed,
        &mut best_order,
        &mut best_len,
    );
    Ok((best_order, best_len))
}

fn permute(
    order: &mut Vec<usize>,
    at: usize,
    points: &[Point2D],
    closed: bool,
    best_order: &mut Vec<usize>,
    best_len: &mut f64,
) {
    if at == order.len() {
        let len = tour_length(order, points, closed).expect("valid permutation");
        if len < *best_len {
            *best_len = len;
            best_order.clone_from(order);
        }
        return;
    }
    // For closed tours the first stop can stay fixed (rotation symmetry).
    let fixed_first = closed && at == 0;
    if fixed_first {
        permute(order, 1, points, closed, best_order, best_len);
        return;
    }
    for i in at..order.len() {
        order.swap(at, i);
        permute(order, at + 1, points, closed, best_order, best_len);
        order.swap(at, i);
    }
}

fn cmd_oracle(cmd: &OracleCommand) -> Result<(), Error> {
    match cmd {
        OracleCommand::Tsp { points, closed } => {
            let mut reader = csv::Reader::from_path(points)?;
            let headers = reader.headers()?.clone();
            let xi = headers
                .iter()
                .position(|h| h == "x_m")
                .ok_or_else(|| Error::InvalidArgument("missing x_m column".into()))?;
            let yi = headers
                .iter()
                .position(|h| h == "y_m")
                .ok_or_else(|| Error::InvalidArgument("missing y_m column".into()))?;
            let mut pts = Vec::new();
            for record in reader.records() {
                let record = record?;
                let x: f64 = record[xi]
                    .parse()
                    .map_err(|_| Error::InvalidArgument("bad x_m value".into()))?;
                let y: f64 = record[yi]
                    .parse()
                    .map_err(|_| Error::InvalidArgument("bad y_m value".into()))?;
                pts.push(Point2D::new(x, y));
            }
            let (order, len) = brute_force_tour(&pts, *closed)?;
            let order_str: Vec<String> = order.iter().map(|i| i.to_string()).collect();
            println!("order: {}", order_str.join(" "));
            println!("length_m: {len}");
            Ok(())
        }
        OracleCommand::FixedPoint {
            travel_time_s,
            upload_rate_bps,
            rp_rates_bps,
        } => {
            let uploads = vec![*upload_rate_bps; rp_rates_bps.len()];
            let t = closed_form_tour_time(*travel_time_s, rp_rates_bps, &uploads)?;
            println!("tour_time_s: {t}");
            for (j, rate) in rp_rates_bps.iter().enumerate() {
                println!("dwell_{j}_s: {}", rate * t / upload_rate_bps);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = catch_unwind(AssertUnwindSafe(|| match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { config } => cmd_validate(config),
        Command::Oracle(cmd) => cmd_oracle(cmd),
    }));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
        Err(_) => {
            eprintln!("error: internal invariant violation");
            ExitCode::from(3)
        }
    }
}
