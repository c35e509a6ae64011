//! `curtain` command line: scene generation, episode execution, and the
//! timing benchmark.
//!
//! Exit codes are a stable contract: 0 success, 1 usage/config error,
//! 2 runtime or planning error.

mod bench;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use curtain_core::config::{Rig, SensorConfig};
use curtain_core::episode::{run_generalization, run_with_cloud, EpisodeConfig};
use curtain_core::planner::Strategy;
use curtain_core::sim::{generate_scene, Bounds, NoiseConfig, Scene};
use curtain_core::uncertainty::GridSpec;

pub use bench::{bench_scenes, BenchReport, BenchRow};

#[derive(Parser, Debug)]
#[command(
    name = "curtain",
    about = "Uncertainty-guided light curtain placement: scenes, episodes, benchmarks"
)]
struct Cli {
    /// Sensor rig configuration JSON (camera/laser/lattice); defaults built in
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base RNG seed
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a random non-overlapping scene (rectangles for targets, convex
    /// blobs for clutter); deterministic under --seed
    Genscene {
        /// Number of target obstacles
        #[arg(long, default_value_t = 4)]
        targets: usize,
        /// Number of clutter obstacles
        #[arg(long, default_value_t = 3)]
        clutter: usize,
        /// Scene file path (default: <out>/scene.json)
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Run one sense-plan-update episode and export JSON/CSV logs
    Run {
        /// Scene file
        #[arg(long)]
        scene: PathBuf,
        /// dp | greedy-random | greedy-minangle | random | fixed:<z> | fp-uncertainty
        #[arg(long, default_value = "dp")]
        strategy: String,
        /// Curtains per episode (K)
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Run this many curtains regardless of K
        #[arg(long)]
        k_test: Option<usize>,
        /// none | standard | dropout=<p>,sigma=<m>
        #[arg(long, default_value = "none")]
        noise: String,
        /// LiDAR ray stride
        #[arg(long, default_value_t = 4)]
        stride: usize,
        /// Occupancy prior
        #[arg(long, default_value_t = 0.3)]
        prior: f64,
        /// Curtain hit tolerance, meters
        #[arg(long, default_value_t = 0.3)]
        epsilon: f64,
    },
    /// Time strategies over a scene directory and report mean +/- 95% CI per
    /// curtain count, with entropy-removed tradeoff data
    Bench {
        /// Directory of scene JSON files
        #[arg(long)]
        scenes: PathBuf,
        /// Comma-separated strategy list
        #[arg(long, default_value = "dp,fp-uncertainty")]
        strategies: String,
        /// Independent trials per strategy
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Curtains per trial
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| usage(format!("cannot create output directory: {e}")))?;
    let sensor = match &cli.config {
        Some(path) => SensorConfig::load(path)
            .map_err(|e| usage(format!("cannot load config {}: {e}", path.display())))?,
        None => SensorConfig::default(),
    };

    match cli.cmd {
        Cmd::Genscene {
            targets,
            clutter,
            path,
        } => {
            let path = path.unwrap_or_else(|| cli.out.join("scene.json"));
            let scene =
                generate_scene(cli.seed, targets, clutter, Bounds::default()).map_err(runtime)?;
            scene.save(&path).map_err(runtime)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Cmd::Run {
            scene,
            strategy,
            k,
            k_test,
            noise,
            stride,
            prior,
            epsilon,
        } => {
            let strategy: Strategy = strategy
                .parse()
                .map_err(|e| usage(format!("bad --strategy: {e}")))?;
            let noise = parse_noise(&noise, cli.seed)?;
            let scene = Scene::load(&scene)
                .map_err(|e| usage(format!("cannot load scene {}: {e}", scene.display())))?;
            let rig = Rig::from_config(&sensor).map_err(|e| usage(format!("bad rig: {e}")))?;
            let cfg = EpisodeConfig {
                k_max: k,
                strategy,
                noise,
                seed: cli.seed,
                grid: GridSpec::default(),
                prior_p: prior,
                curtain_epsilon: epsilon,
                lidar_stride: stride,
                ..EpisodeConfig::default()
            };
            let curtains = k_test.unwrap_or(k);
            let log = run_generalization(&scene, &rig, &cfg, curtains).map_err(runtime)?;
            let (_, cloud) = run_with_cloud(&scene, &rig, &cfg, curtains).map_err(runtime)?;
            log.write_json(&cli.out.join("episode.json"))
                .map_err(runtime)?;
            log.write_csv(&cli.out.join("episode.csv"))
                .map_err(runtime)?;
            std::fs::write(cli.out.join("cloud.csv"), cloud.to_csv_string()).map_err(runtime)?;
            println!(
                "wrote {}, {}, {}",
                cli.out.join("episode.json").display(),
                cli.out.join("episode.csv").display(),
                cli.out.join("cloud.csv").display()
            );
            Ok(())
        }
        Cmd::Bench {
            scenes,
            strategies,
            trials,
            k,
        } => {
            if trials < 2 {
                return Err(usage("bench needs at least 2 trials"));
            }
            let strategies = strategies
                .split(',')
                .map(|s| s.trim().parse::<Strategy>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| usage(format!("bad --strategies: {e}")))?;
            if strategies.is_empty() {
                return Err(usage("no strategies given"));
            }
            let scene_files = list_scene_files(&scenes)?;
            let loaded = scene_files
                .iter()
                .map(|p| Scene::load(p))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| usage(format!("cannot load scene: {e}")))?;
            let rig = Rig::from_config(&sensor).map_err(|e| usage(format!("bad rig: {e}")))?;
            let workers = bench_workers();
            let report = bench_scenes(&rig, &loaded, &strategies, trials, k, cli.seed, workers)
                .map_err(runtime)?;
            std::fs::write(cli.out.join("bench.json"), report.to_json_string()).map_err(runtime)?;
            std::fs::write(cli.out.join("bench.csv"), report.to_csv_string()).map_err(runtime)?;
            println!("{}", report.to_csv_string().trim_end());
            println!(
                "wrote {} and {}",
                cli.out.join("bench.json").display(),
                cli.out.join("bench.csv").display()
            );
            Ok(())
        }
    }
}

fn list_scene_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| {
        usage(format!(
            "cannot read scene directory {}: {e}",
            dir.display()
        ))
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|x| x == "json").unwrap_or(false))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!(
            "scene directory {} holds no .json scenes",
            dir.display()
        )));
    }
    Ok(files)
}

fn parse_noise(spec: &str, seed: u64) -> CliResult<Option<NoiseConfig>> {
    match spec {
        "none" => Ok(None),
        "standard" => Ok(Some(NoiseConfig::standard(seed))),
        other => {
            let mut dropout = None;
            let mut sigma = None;
            for part in other.split(',') {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| usage(format!("bad --noise fragment {part:?}")))?;
                let value: f64 = value
                    .parse()
                    .map_err(|e| usage(format!("bad --noise value {value:?}: {e}")))?;
                match key {
                    "dropout" => dropout = Some(value),
                    "sigma" => sigma = Some(value),
                    _ => return Err(usage(format!("unknown --noise key {key:?}"))),
                }
            }
            NoiseConfig::new(dropout.unwrap_or(0.0), sigma.unwrap_or(0.0), seed)
                .map(Some)
                .map_err(|e| usage(format!("bad --noise: {e}")))
        }
    }
}

/// Benchmark worker count: CURTAIN_THREADS caps parallelism, default 1 so
/// timings are uncontended.
fn bench_workers() -> usize {
    std::env::var("CURTAIN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}
