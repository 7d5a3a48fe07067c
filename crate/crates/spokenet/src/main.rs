use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spokenet::export::{Format, Raster, Window};
use spokenet::io;
use spokenet::pipeline::{self, BaselineMethod, ReconOptions};
use spokenet::{AppError, AppResult, ExperimentConfig};
use spokenet_core::metrics::xt_profile;

#[derive(Parser)]
#[command(name = "spokenet", version, about = "Radial dynamic MRI reconstruction with subspace coordinate networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config; falls back to $SPOKENET_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the worker pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate spokes and render the ground truth.
    Simulate,
    /// Initialize, fine-tune and render the coordinate networks.
    Reconstruct {
        /// Spoke file (default: <out>/spokes.spkt).
        #[arg(long)]
        spokes: Option<PathBuf>,
        /// Skip the GRASP/SVD initialization.
        #[arg(long)]
        skip_init: bool,
        /// Also write the low-resolution GRASP frames and bases.
        #[arg(long)]
        dump_stages: bool,
    },
    /// Binned reference reconstruction.
    Baseline {
        #[arg(long)]
        spokes: Option<PathBuf>,
        #[arg(long)]
        method: BaselineMethod,
        #[arg(long, default_value_t = 20)]
        spokes_per_bin: usize,
    },
    /// Metrics of a reconstruction, against a ground truth when given.
    Evaluate {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Output CSV (default: <out>/metrics.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render frames or an x–t profile for viewing.
    Export {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Pgm)]
        format: ExportFormat,
        /// Frame to render (default: every frame).
        #[arg(long)]
        frame: Option<usize>,
        /// Display window `lo,hi` (default: 0 to the maximum magnitude).
        #[arg(long, value_parser = parse_window)]
        window: Option<Window>,
        /// Render the x–t profile of this row instead of frames.
        #[arg(long)]
        xt_row: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Pgm,
    Png,
    Csv,
}

impl From<ExportFormat> for Format {
    fn from(f: ExportFormat) -> Self {
        match f {
            ExportFormat::Pgm => Format::Pgm,
            ExportFormat::Png => Format::Png,
            ExportFormat::Csv => Format::Csv,
        }
    }
}

fn parse_window(s: &str) -> Result<Window, String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad window start `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad window end `{hi}`"))?;
    if !(hi > lo) {
        return Err(format!("window end {hi} must exceed start {lo}"));
    }
    Ok(Window { lo, hi })
}

fn config(common: &Common) -> AppResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::resolve(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> AppResult<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Config(format!("--threads: {e}")))?;
    }
    let cfg = config(&cli.common)?;
    let out = cfg.output_dir.clone();
    let spokes_path = |p: Option<PathBuf>| p.unwrap_or_else(|| out.join("spokes.spkt"));
    match cli.command {
        Command::Simulate => {
            let sim = pipeline::simulate(&cfg)?;
            io::spokes_to_file(&sim.spokes).write(&pipeline::output_path(&out, "spokes.spkt")?)?;
            io::dynamic_to_file(&sim.truth).write(&pipeline::output_path(&out, "truth.spkt")?)?;
            let cfg_path = pipeline::output_path(&out, "config.ini")?;
            std::fs::write(&cfg_path, cfg.to_text()).map_err(|e| AppError::io(&cfg_path, e))?;
            eprintln!(
                "{} spokes x {} coils x {} samples, noise sigma {:.4e}",
                sim.spokes.n_spokes(),
                sim.spokes.n_coils,
                sim.spokes.n_samples(),
                sim.noise_sigma
            );
        }
        Command::Reconstruct { spokes, skip_init, dump_stages } => {
            let spokes = io::read_spokes(&spokes_path(spokes))?;
            let opts = ReconOptions { skip_init };
            let r = pipeline::reconstruct_observed(&cfg, &spokes, &opts, &mut |e, _, _| {
                eprintln!("iteration {:>4} {:<16} loss {:.6e} ({:.1} s)", e.step, e.phase.name(), e.loss, e.elapsed);
            })?;
            pipeline::write_reconstruction(&out, &r, dump_stages)?;
            eprintln!("wrote {} frames to {}", r.image.n_frames(), out.display());
        }
        Command::Baseline { spokes, method, spokes_per_bin } => {
            let spokes = io::read_spokes(&spokes_path(spokes))?;
            let image = pipeline::baseline(&cfg, &spokes, method, spokes_per_bin)?;
            let path = pipeline::output_path(&out, &format!("baseline_{}_{spokes_per_bin}.spkt", method.name()))?;
            pipeline::write_image(&path, &image)?;
            eprintln!("wrote {} frames to {}", image.n_frames(), path.display());
        }
        Command::Evaluate { recon, truth, output } => {
            let recon = io::read_dynamic(&recon)?;
            let truth = truth.as_deref().map(io::read_dynamic).transpose()?;
            let report = pipeline::evaluate(&cfg, &recon, truth.as_ref())?;
            let path = match output {
                Some(p) => p,
                None => pipeline::output_path(&out, "metrics.csv")?,
            };
            io::write_metrics(&path, &report.rows())?;
            for row in report.rows() {
                let profile = row.profile.map(|p| format!("[{p}]")).unwrap_or_default();
                println!("{:<20} {:<9} {profile:<4} {:.6}", row.metric, row.phase, row.value);
            }
        }
        Command::Export { image, format, frame, window, xt_row } => export(&image, &out, format.into(), frame, window, xt_row)?,
    }
    Ok(())
}

fn export(path: &Path, out: &Path, format: Format, frame: Option<usize>, window: Option<Window>, row: Option<usize>) -> AppResult<()> {
    let image = io::read_dynamic(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let mut rasters = Vec::new();
    if let Some(y) = row {
        let p = xt_profile(&image, y).map_err(|e| AppError::Config(format!("--xt-row: {e}")))?;
        rasters.push((format!("{stem}_xt_row{y}"), Raster::xt(&p)));
    } else {
        let frames: Vec<usize> = match frame {
            Some(f) => vec![f],
            None => (0..image.n_frames()).collect(),
        };
        for f in frames {
            rasters.push((format!("{stem}_frame{f:03}"), Raster::frame(&image, f)?));
        }
    }
    for (name, raster) in rasters {
        let w = window.unwrap_or_else(|| Window::auto(&raster.values));
        let path = pipeline::output_path(out, &format!("{name}.{}", format.extension()))?;
        raster.write(&path, format, w)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
