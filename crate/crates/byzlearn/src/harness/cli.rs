//! Command-line interface over the harness: assumption checking,
//! reduced-graph enumeration, one-off Tverberg points, experiment runs,
//! and post-hoc trace analysis.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::geometry::{tverberg_point, PointSet};
use crate::observation::check_global_identifiability;
use crate::topology::count_reduced_graphs;

use super::{
    load_config, render_beliefs_csv, run_experiment, write_trace, AnalysisConfig, ExperimentConfig,
    HarnessError, WindowCheckConfig,
};

#[derive(Parser)]
#[command(
    name = "byzlearn",
    version,
    about = "Byzantine-resilient learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check reachability and global identifiability of a scenario.
    CheckAssumptions {
        config: PathBuf,
        /// Override the reduced-graph enumeration cap.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Count reduced graphs and report whether enumeration under the cap
    /// is exhaustive.
    EnumerateReduced {
        config: PathBuf,
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Compute a Tverberg point of a point list with its certificate.
    Tverberg {
        /// JSON file: {"points": [[x, y, ...], ...]}
        points: PathBuf,
        /// Fault bound; the list must hold (dim+1)*f+1 points.
        #[arg(long)]
        f: usize,
    },
    /// Run the configured experiment and write the trace.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the enumeration cap.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Replay a written trace and run the full analysis suite over it.
    Analyze { trace_dir: PathBuf },
}

/// Entry point used by the binary; returns the process exit status.
/// 0 = success, 1 = failure or violated assumption, 2 = usage error.
pub fn cli<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own help/usage text
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::CheckAssumptions { config, cap } => check_assumptions(&config, cap),
        Command::EnumerateReduced { config, cap } => enumerate_reduced(&config, cap),
        Command::Tverberg { points, f } => tverberg_cmd(&points, f),
        Command::Run {
            config,
            out,
            seed,
            trials,
            cap,
        } => run_cmd(&config, &out, seed, trials, cap),
        Command::Analyze { trace_dir } => analyze_cmd(&trace_dir),
    }
}

fn check_assumptions(path: &Path, cap: Option<usize>) -> Result<i32, HarnessError> {
    let config = load_config(path)?;
    let scenario = config.build_scenario()?;
    let states = config.build_states()?;
    let model = config.build_model()?;
    let cap = cap.unwrap_or(config.run.cap);

    // structural reachability holds on every reduced graph by
    // construction; run the executable check anyway
    let (graphs, exhaustive) = crate::topology::enumerate_reduced_graphs(&scenario, cap)?;
    let reachability = graphs
        .iter()
        .all(crate::topology::check_reachability_condition);
    println!(
        "reachability: holds={reachability} graphs_checked={}",
        graphs.len()
    );

    let report = check_global_identifiability(&model, &scenario, &states, cap)?;
    match &report.witness {
        None => {
            println!(
                "identifiability: holds=true exhaustive={} graphs_checked={}",
                report.exhaustive, report.graphs_checked
            );
            let _ = exhaustive;
            Ok(0)
        }
        Some(witness) => {
            println!(
                "identifiability: holds=false graph_edges={:?} component={:?} theta={} ({})",
                witness.graph.kept_edges(),
                witness.component.members,
                witness.state,
                states.label(witness.state),
            );
            Ok(1)
        }
    }
}

fn enumerate_reduced(path: &Path, cap: Option<usize>) -> Result<i32, HarnessError> {
    let config = load_config(path)?;
    let scenario = config.build_scenario()?;
    let cap = cap.unwrap_or(config.run.cap);
    let count = count_reduced_graphs(&scenario)?;
    let exhaustive = count <= cap as u128;
    println!("reduced_graphs: count={count} cap={cap} exhaustive={exhaustive}");
    Ok(0)
}

#[derive(Deserialize)]
struct PointsFile {
    points: Vec<Vec<f64>>,
}

fn tverberg_cmd(path: &Path, f: usize) -> Result<i32, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: PointsFile = serde_json::from_str(&text).map_err(|source| HarnessError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    let dim = file.points.first().map_or(0, Vec::len);
    let ps = PointSet::new(dim, file.points)?;
    let result = tverberg_point(&ps, f)?;
    let rendered = serde_json::json!({
        "point": result.point,
        "partition": result.partition,
        "weights": result.weights,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&rendered).expect("serializable")
    );
    Ok(0)
}

fn run_cmd(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    cap: Option<usize>,
) -> Result<i32, HarnessError> {
    let mut config = load_config(config_path)?;
    if let Some(seed) = seed {
        config.run.seed = seed;
    }
    if let Some(trials) = trials {
        config.run.trials = trials;
    }
    if let Some(cap) = cap {
        config.run.cap = cap;
    }
    config.validate()?;
    let trace = run_experiment(&config)?;
    write_trace(&trace, out)?;
    println!(
        "run: trials={} horizon={} out={} wall_ms={}",
        config.run.trials,
        config.run.horizon,
        out.display(),
        trace.wall_ms
    );
    Ok(0)
}

/// Force the full analysis plan for a replayed trace: matrix extraction,
/// log-ratio reconstruction, the window check (config's parameters if
/// present, else a quarter/half/full-horizon default), and the centered
/// statistic (config's checkpoints if present, else a sixteenth, quarter,
/// and full horizon).
fn ensure_full_plan(analysis: &mut AnalysisConfig, horizon: usize) {
    analysis.identifiability = true;
    analysis.extract_matrices = true;
    analysis.psi_reconstruction = true;
    if analysis.window_check.is_none() {
        let mut ends: Vec<usize> = vec![horizon / 4, horizon / 2, horizon];
        ends.retain(|&t| t >= 1);
        ends.dedup();
        analysis.window_check = Some(WindowCheckConfig {
            ends,
            window: horizon.min(50),
            threshold: 1e-4,
        });
    }
    if analysis.q_statistic_at.is_empty() {
        let mut q_at: Vec<usize> = vec![horizon.div_ceil(16), horizon.div_ceil(4), horizon];
        q_at.retain(|&t| t >= 1);
        q_at.sort_unstable();
        q_at.dedup();
        analysis.q_statistic_at = q_at;
    }
}

fn analyze_cmd(trace_dir: &Path) -> Result<i32, HarnessError> {
    let config_path = trace_dir.join("config.json");
    let mut config: ExperimentConfig = {
        let text = std::fs::read_to_string(&config_path).map_err(|source| HarnessError::Io {
            path: config_path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Parse {
            path: config_path.display().to_string(),
            source,
        })?
    };
    config.validate()?;
    ensure_full_plan(&mut config.analysis, config.run.horizon);

    let trace = run_experiment(&config)?;

    // replaying the snapshot must reproduce the written series exactly
    let beliefs_path = trace_dir.join("beliefs.csv");
    let replay_consistent = match std::fs::read_to_string(&beliefs_path) {
        Ok(previous) => previous == render_beliefs_csv(&trace),
        Err(source) => {
            return Err(HarnessError::Io {
                path: beliefs_path.display().to_string(),
                source,
            })
        }
    };
    let mut analysis = trace.analysis.clone().unwrap_or_default();
    analysis.replay_consistent = Some(replay_consistent);

    let rendered = serde_json::to_string_pretty(&analysis).expect("report serializes");
    let out_path = trace_dir.join("analysis.json");
    std::fs::write(&out_path, rendered + "\n").map_err(|source| HarnessError::Io {
        path: out_path.display().to_string(),
        source,
    })?;

    let extraction_ok = analysis
        .matrix_extraction
        .as_ref()
        .is_some_and(|stats| stats.iter().all(|s| s.max_row_sum_error <= 1e-9));
    let psi_ok = analysis
        .psi_reconstruction
        .as_ref()
        .is_some_and(|stats| stats.iter().all(|s| s.max_residual <= 1e-6));
    println!(
        "analyze: replay_consistent={replay_consistent} extraction_ok={extraction_ok} psi_ok={psi_ok} out={}",
        out_path.display()
    );
    Ok(if replay_consistent { 0 } else { 1 })
}
