//! polardet — command-line interface over the polar polygon-detection core.
//!
//! Logs go to stderr; data goes to files or stdout. Exit codes: 0 success,
//! 1 runtime failure, 2 usage/validation error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polardet_core::supervision::CostWeights;
use polardet_core::RunConfig;

#[derive(Parser)]
#[command(
    name = "polardet",
    version,
    about = "Polar-representation polygon detection: geometry, supervision and evaluation tools"
)]
struct Cli {
    #[command(flatten)]
    overrides: ConfigOverrides,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Config file plus per-field flag overrides; flags win over the file.
#[derive(Args)]
struct ConfigOverrides {
    /// TOML config file; missing keys fall back to defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Number of polar rays K.
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Sampling points per ray T.
    #[arg(long, global = true)]
    t: Option<usize>,

    /// Rasterized-mask resolution.
    #[arg(long = "rmask-res", global = true)]
    rmask_res: Option<usize>,

    /// Cost weights as class,dist,rmask,inner.
    #[arg(long, global = true, value_parser = parse_weights)]
    weights: Option<CostWeights>,

    /// Approximability search lattice resolution.
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,

    /// Seed for synthetic generators.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn parse_weights(s: &str) -> Result<CostWeights, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected four comma-separated values: class,dist,rmask,inner".into());
    }
    let mut vals = [0.0f64; 4];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|e| format!("bad weight {p:?}: {e}"))?;
    }
    CostWeights::new(vals[0], vals[1], vals[2], vals[3]).map_err(|e| e.to_string())
}

impl ConfigOverrides {
    fn resolve(&self) -> polardet_core::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(t) = self.t {
            cfg.t = t;
        }
        if let Some(r) = self.rmask_res {
            cfg.rmask_resolution = r;
        }
        if let Some(w) = self.weights {
            cfg.weights = w;
        }
        if let Some(g) = self.grid_n {
            cfg.grid_n = g;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct explicit polygons from polar parameters.
    Reconstruct {
        /// JSON array of {x, y, distances} records.
        #[arg(long)]
        input: PathBuf,
        /// Output JSON of {polygon: [x1, y1, ...]} records.
        #[arg(long)]
        output: PathBuf,
        /// Also write an SVG overlay of the reconstructed polygons.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Position-aware supervision targets: ray-contour distances from each
    /// predicted start.
    Targets {
        /// JSON array of {contour: [x1, y1, ...], start: [x, y]} records.
        #[arg(long)]
        input: PathBuf,
        /// Output JSON of {distances: [...]} records.
        #[arg(long)]
        output: PathBuf,
    },
    /// Hungarian (or one-to-many) matching between detections and
    /// annotations, dumped as CSV.
    Match {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
        /// One-to-many mode: up to M predictions per GT.
        #[arg(long = "one-to-many", value_name = "M")]
        one_to_many: Option<usize>,
        /// One-to-many cost threshold; default 2x the median matched
        /// one-to-one cost per image.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Per-instance polygon approximability scores as CSV.
    Score {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Representation-error landscape of one instance as CSV (and
    /// optionally a PGM heat image).
    Landscape {
        #[arg(long)]
        annotations: PathBuf,
        /// Instance (annotation) id; defaults to the first instance.
        #[arg(long)]
        instance: Option<u64>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Deformable-attention sampling grids (zero offsets) as CSV.
    Grid {
        /// JSON array of {x, y, distances} records.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Sampling scheme: the polar fan grid or the box baseline.
        #[arg(long, default_value = "polar")]
        scheme: commands::GridScheme,
        /// Also write an SVG overlay of the sampling points.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Gradient and invariant self-checks on seeded synthetic shapes.
    Gradcheck {
        /// Which suite to run.
        #[arg(long, default_value = "all")]
        suite: commands::GradSuite,
        /// Shapes per check.
        #[arg(long, default_value_t = 20)]
        cases: usize,
        /// Test hook: corrupt the loss values to verify failure detection.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// COCO-protocol mask AP evaluation (optionally on the most
    /// polygon-approximable subset).
    Eval {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Evaluate only the top fraction of instances ranked by polygon
        /// approximability.
        #[arg(long = "subset-fraction")]
        subset_fraction: Option<f64>,
        /// Report JSON path (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Raster fallback resolution for multi-ring instances.
        #[arg(long = "raster-res", default_value_t = 512)]
        raster_res: usize,
        /// Detection cap per image.
        #[arg(long = "max-dets", default_value_t = 100)]
        max_dets: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            log::warn!("could not set thread pool size: {e}");
        }
    }
    let cfg = match cli.overrides.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Reconstruct { input, output, svg } => {
            commands::reconstruct(&cfg, &input, &output, svg.as_deref())
        }
        Command::Targets { input, output } => commands::targets(&cfg, &input, &output),
        Command::Match {
            annotations,
            detections,
            output,
            one_to_many,
            tau,
        } => commands::match_cmd(&cfg, &annotations, &detections, &output, one_to_many, tau),
        Command::Score {
            annotations,
            output,
        } => commands::score(&cfg, &annotations, &output),
        Command::Landscape {
            annotations,
            instance,
            output,
            pgm,
        } => commands::landscape(&cfg, &annotations, instance, &output, pgm.as_deref()),
        Command::Grid {
            input,
            output,
            scheme,
            svg,
        } => commands::grid(&cfg, &input, &output, scheme, svg.as_deref()),
        Command::Gradcheck {
            suite,
            cases,
            corrupt,
        } => commands::gradcheck(&cfg, suite, cases, corrupt),
        Command::Eval {
            annotations,
            detections,
            subset_fraction,
            output,
            csv,
            raster_res,
            max_dets,
        } => commands::eval(
            &cfg,
            &annotations,
            &detections,
            subset_fraction,
            output.as_deref(),
            csv.as_deref(),
            raster_res,
            max_dets,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err
                .downcast_ref::<polardet_core::Error>()
                .map_or(false, |e| e.is_usage());
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
