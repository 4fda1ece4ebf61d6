//! Command-line front end: run trials, batches and sweeps from scenario
//! files, and dump intermediate pipeline stages for debugging.
//!
//! Exit codes are a stable contract: 0 = reached goal (or a non-trial
//! command succeeded), 2 = collision, 3 = timeout, 64 = usage error
//! (missing or invalid scenario, bad flags).

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};

use crate::detector::{
    doppler_fft, magnitude_sum, process_frame, range_fft, DEFAULT_DOPPLER_ZERO_PAD,
    DEFAULT_RANGE_ZERO_PAD,
};
use crate::radar_model::{build_echoes, synthesize_frame, write_frame, EgoState, IQFrame,
    PointTarget, NUM_ANTENNAS};
use crate::scenario::ScenarioFile;
use crate::sim::{error_sweep, run_batch, run_trial, write_trial_log, Outcome, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_COLLISION: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "sense-avoid",
    about = "Closed-loop FMCW radar sense-and-avoid simulation",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single closed-loop trial and write its logs.
    Run {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for the trial logs.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario's world seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a batch of trials with start poses on a ring.
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the base seed; trial i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of trials; defaults to the scenario's batch section.
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads; 1 means fully serial.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Sweep detection error against bearing and fit the trend.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Dump one pipeline stage for the scenario's first radar frame.
    Dump {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        stage: Stage,
        /// Overrides the scenario's world seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    /// Raw I/Q frame, binary.
    Frame,
    /// Per-chirp range spectrum magnitudes (antenna 0), CSV.
    RangeFft,
    /// Summed range-Doppler magnitude map, CSV, one row per Doppler bin.
    Rdmap,
    /// Detection list, CSV.
    Detections,
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run { scenario, out, seed } => cmd_run(&scenario, &out, seed),
        Command::Batch {
            scenario,
            out,
            seed,
            trials,
            parallel,
        } => cmd_batch(&scenario, &out, seed, trials, parallel),
        Command::Sweep { scenario, out } => cmd_sweep(&scenario, &out),
        Command::Dump {
            scenario,
            out,
            stage,
            seed,
        } => cmd_dump(&scenario, &out, stage, seed),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
    }
}

fn load_sim_config(path: &Path, seed_override: Option<u64>) -> Result<SimConfig, String> {
    let scenario = ScenarioFile::load(path).map_err(|e| e.to_string())?;
    let mut config = scenario.sim_config().map_err(|e| e.to_string())?;
    if let Some(seed) = seed_override {
        config.world.seed = seed;
    }
    Ok(config)
}

fn outcome_exit_code(outcome: Outcome) -> i32 {
    match outcome {
        Outcome::ReachedGoal => EXIT_OK,
        Outcome::Collision => EXIT_COLLISION,
        Outcome::Timeout => EXIT_TIMEOUT,
    }
}

fn cmd_run(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<i32, String> {
    let config = load_sim_config(scenario, seed)?;
    let log = run_trial(&config);
    write_trial_log(&log, out, "trial").map_err(|e| e.to_string())?;
    println!(
        "{}",
        serde_json::json!({
            "outcome": log.outcome,
            "min_clearance": log.min_clearance,
            "frames": log.frames.len(),
            "seed": log.seed,
        })
    );
    Ok(outcome_exit_code(log.outcome))
}

#[derive(Serialize)]
struct BatchSummary {
    trials: usize,
    reached_goal: usize,
    collision: usize,
    timeout: usize,
    min_clearance: f64,
}

fn cmd_batch(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    parallel: usize,
) -> Result<i32, String> {
    let scenario = ScenarioFile::load(scenario).map_err(|e| e.to_string())?;
    let n = trials.unwrap_or_else(|| scenario.batch_trials());
    let configs = scenario.batch_configs(n, seed).map_err(|e| e.to_string())?;
    let logs = run_batch(&configs, parallel.max(1));

    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let mut table = String::from("trial,seed,outcome,min_clearance,frames\n");
    let mut summary = BatchSummary {
        trials: n,
        reached_goal: 0,
        collision: 0,
        timeout: 0,
        min_clearance: f64::INFINITY,
    };
    for (i, log) in logs.iter().enumerate() {
        let trial_id = format!("trial_{i:03}");
        write_trial_log(log, out, &trial_id).map_err(|e| e.to_string())?;
        let outcome = match log.outcome {
            Outcome::ReachedGoal => {
                summary.reached_goal += 1;
                "reached_goal"
            }
            Outcome::Collision => {
                summary.collision += 1;
                "collision"
            }
            Outcome::Timeout => {
                summary.timeout += 1;
                "timeout"
            }
        };
        summary.min_clearance = summary.min_clearance.min(log.min_clearance);
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            i,
            log.seed,
            outcome,
            log.min_clearance,
            log.frames.len()
        ));
    }
    std::fs::write(out.join("batch_summary.csv"), &table).map_err(|e| e.to_string())?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?;
    std::fs::write(out.join("batch_summary.json"), format!("{json}\n"))
        .map_err(|e| e.to_string())?;
    print!("{table}");
    Ok(EXIT_OK)
}

fn cmd_sweep(scenario: &Path, out: &Path) -> Result<i32, String> {
    let scenario = ScenarioFile::load(scenario).map_err(|e| e.to_string())?;
    let result = error_sweep(&scenario.sweep_config());

    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let mut csv = String::from("bearing_deg,mean_abs_range_error,mean_abs_bearing_error_deg\n");
    for row in &result.rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.bearing_deg, row.mean_abs_range_error, row.mean_abs_bearing_error_deg
        ));
    }
    std::fs::write(out.join("sweep.csv"), csv).map_err(|e| e.to_string())?;
    println!(
        "{}",
        serde_json::json!({
            "range_slope": result.range_slope,
            "range_r_squared": result.range_r_squared,
            "bearing_slope": result.bearing_slope,
            "bearing_r_squared": result.bearing_r_squared,
        })
    );
    Ok(EXIT_OK)
}

/// Synthesizes the first radar frame a trial would see, exactly as
/// [`crate::sim::step_with_events`] does at frame 0.
fn first_frame(config: &SimConfig) -> IQFrame {
    let to_goal = config.world.goal - config.world.start;
    let heading = if to_goal.norm() > 1e-9 {
        to_goal.y.atan2(to_goal.x)
    } else {
        0.0
    };
    let ego = EgoState {
        position: config.world.start,
        heading,
        velocity: nalgebra::Vector2::zeros(),
    };
    let reflectors: Vec<PointTarget> = config
        .world
        .obstacles
        .iter()
        .filter_map(|obstacle| {
            let to_centre = obstacle.center - ego.position;
            let distance = to_centre.norm();
            (distance > obstacle.radius).then(|| PointTarget {
                position: obstacle.center - to_centre / distance * obstacle.radius,
                velocity: obstacle.velocity,
                amplitude: 1.0,
            })
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.world.seed);
    let echoes = build_echoes(&config.radar, &ego, &reflectors, 1.0, &mut rng);
    let frame_seed: u64 = rng.gen();
    synthesize_frame(&config.radar, &echoes, frame_seed, 0.0).expect("valid radar config")
}

fn cmd_dump(scenario: &Path, out: &Path, stage: Stage, seed: Option<u64>) -> Result<i32, String> {
    let config = load_sim_config(scenario, seed)?;
    let frame = first_frame(&config);
    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;

    match stage {
        Stage::Frame => {
            let file = std::fs::File::create(out.join("frame.bin")).map_err(|e| e.to_string())?;
            write_frame(&frame, std::io::BufWriter::new(file)).map_err(|e| e.to_string())?;
        }
        Stage::RangeFft => {
            let mut csv = String::new();
            for chirp in 0..frame.chirps_per_frame {
                let spectrum = range_fft(&frame, 0, chirp, DEFAULT_RANGE_ZERO_PAD);
                let row: Vec<String> = spectrum.iter().map(|c| c.norm().to_string()).collect();
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            std::fs::write(out.join("range_fft.csv"), csv).map_err(|e| e.to_string())?;
        }
        Stage::Rdmap => {
            // One row per Doppler bin, one column per range bin, no header
            // so the row count equals the Doppler bin count.
            let maps: Vec<_> = (0..NUM_ANTENNAS)
                .map(|antenna| {
                    let spectra: Vec<_> = (0..frame.chirps_per_frame)
                        .map(|chirp| range_fft(&frame, antenna, chirp, DEFAULT_RANGE_ZERO_PAD))
                        .collect();
                    doppler_fft(&spectra, &config.radar, DEFAULT_DOPPLER_ZERO_PAD)
                })
                .collect();
            let mag = magnitude_sum(&maps);
            let cols = maps[0].range_bins;
            let mut csv = String::new();
            for row in 0..maps[0].doppler_bins {
                let cells: Vec<String> = (0..cols)
                    .map(|col| mag[row * cols + col].to_string())
                    .collect();
                csv.push_str(&cells.join(","));
                csv.push('\n');
            }
            std::fs::write(out.join("rdmap.csv"), csv).map_err(|e| e.to_string())?;
        }
        Stage::Detections => {
            let detections = process_frame(&config.radar, &frame, config.detection_threshold)
                .map_err(|e| e.to_string())?;
            let mut csv = String::from("range,bearing,radial_velocity,magnitude,timestamp\n");
            for d in &detections {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    d.range, d.bearing, d.radial_velocity, d.magnitude, d.timestamp
                ));
            }
            std::fs::write(out.join("detections.csv"), csv).map_err(|e| e.to_string())?;
        }
    }
    Ok(EXIT_OK)
}
