use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use makeup_core::bench::attention_bench;
use makeup_core::config::RunConfig;
use makeup_core::editing::EditSpec;
use makeup_core::geometry::{alignment_grid, bilinear_sample, LandmarkSet};
use makeup_core::gradsuite::{run_suite, DEFAULT_INSTANCES};
use makeup_core::imaging::{load_rgb, rgb_to_tensor, save_rgb, tensor_to_rgb};
use makeup_core::network::{Generator, GeneratorConfig};
use makeup_core::pgt::{histogram_composite, make_pgt, schedule_eval, BlendSchedule, RegionAlphas, RegionMasks};
use makeup_core::pipeline::{edit_transfer, Face};
use makeup_core::{Error, Result};

/// Makeup-transfer kernels from the command line.
#[derive(Debug, Parser)]
#[command(name = "makeup", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Warp a reference image so its landmarks land on the source landmarks.
    Warp {
        #[arg(long)]
        src_landmarks: PathBuf,
        #[arg(long)]
        ref_landmarks: PathBuf,
        #[arg(long)]
        ref_image: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-region histogram matching of the source onto the reference colors.
    Histmatch {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pseudo ground truth: per-region blend of color-matched and warped reference.
    Pgt {
        #[command(flatten)]
        pair: PairArgs,
        /// Detail weight, either one value or `skin,lip,eyeshadow`.
        #[arg(long, conflicts_with = "progress")]
        alphas: Option<String>,
        /// Training progress in [0, 1]; weights come from the blend schedule.
        #[arg(long)]
        progress: Option<f64>,
        /// Schedule JSON used with --progress (defaults otherwise).
        #[arg(long, requires = "progress")]
        schedule: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count attention multiply-accumulates and time full vs windowed attention.
    AttnBench {
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        channels: usize,
        /// Sow window size (defaults to height / 8).
        #[arg(long, conflicts_with = "full")]
        window: Option<usize>,
        /// Use one window covering the whole map instead of Sow-Attention.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 17)]
        landmarks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Transfer through the toy generator with per-region references and shades.
    Edit {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        src_landmarks: PathBuf,
        /// `ID=IMAGE,LANDMARKS`, repeatable.
        #[arg(long = "refs", num_args = 1..)]
        refs: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run config supplying the generator shape; its seed is replaced by --seed.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of a kernel's vector-Jacobian product.
    Gradcheck {
        #[arg(long)]
        kernel: String,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_INSTANCES)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct PairArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Directory with skin.png, lip.png and optionally eyeshadow.png.
    #[arg(long)]
    masks_src: PathBuf,
    #[arg(long)]
    masks_ref: PathBuf,
    #[arg(long)]
    landmarks_src: PathBuf,
    #[arg(long)]
    landmarks_ref: PathBuf,
}

struct Pair {
    x: image::RgbImage,
    y: image::RgbImage,
    masks_x: RegionMasks,
    masks_y: RegionMasks,
    x_lm: LandmarkSet,
    y_lm: LandmarkSet,
}

fn load_landmarks_for(path: &Path, img: &image::RgbImage) -> Result<LandmarkSet> {
    let (w, h) = img.dimensions();
    LandmarkSet::load(path, w as usize, h as usize)
}

impl PairArgs {
    fn load(&self) -> Result<Pair> {
        let x = load_rgb(&self.src)?;
        let y = load_rgb(&self.reference)?;
        let x_lm = load_landmarks_for(&self.landmarks_src, &x)?;
        let y_lm = load_landmarks_for(&self.landmarks_ref, &y)?;
        let masks_x = RegionMasks::load_dir(&self.masks_src, &x_lm)?;
        let masks_y = RegionMasks::load_dir(&self.masks_ref, &y_lm)?;
        Ok(Pair { x, y, masks_x, masks_y, x_lm, y_lm })
    }
}

fn parse_ref(arg: &str) -> Result<(String, Face)> {
    let bad = || Error::Config(format!("--refs expects ID=IMAGE,LANDMARKS, got `{arg}`"));
    let (id, rest) = arg.split_once('=').ok_or_else(bad)?;
    let (img, lm) = rest.split_once(',').ok_or_else(bad)?;
    let image = load_rgb(img)?;
    let landmarks = load_landmarks_for(Path::new(lm), &image)?;
    Ok((id.to_string(), Face { image, landmarks }))
}

/// `Ok(false)` means the command ran but a check failed.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Warp { src_landmarks, ref_landmarks, ref_image, out } => {
            let y = load_rgb(&ref_image)?;
            let (w, h) = y.dimensions();
            let src = LandmarkSet::load(&src_landmarks, w as usize, h as usize)?;
            let reference = LandmarkSet::load(&ref_landmarks, w as usize, h as usize)?;
            let grid = alignment_grid(&reference, &src, h as usize, w as usize)?;
            save_rgb(&tensor_to_rgb(&bilinear_sample(&rgb_to_tensor(&y), &grid)?)?, &out)?;
            Ok(true)
        }
        Command::Histmatch { pair, out } => {
            let p = pair.load()?;
            save_rgb(&histogram_composite(&p.x, &p.y, &p.masks_x, &p.masks_y)?, &out)?;
            Ok(true)
        }
        Command::Pgt { pair, alphas, progress, schedule, out } => {
            let alphas = match (alphas, progress) {
                (Some(a), _) => RegionAlphas::parse(&a)?,
                (None, Some(p)) => {
                    let s = match schedule {
                        Some(path) => BlendSchedule::load(path)?,
                        None => BlendSchedule::default(),
                    };
                    schedule_eval(&s, p)?
                }
                (None, None) => return Err(Error::Config("pass --alphas or --progress".into())),
            };
            let p = pair.load()?;
            save_rgb(&make_pgt(&p.x, &p.y, &p.masks_x, &p.masks_y, &p.x_lm, &p.y_lm, alphas)?, &out)?;
            Ok(true)
        }
        Command::AttnBench { height, width, channels, window, full, landmarks, seed, json } => {
            let window = window.unwrap_or(height / 8);
            let r = attention_bench(height, width, channels, window, full, landmarks, seed)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            } else {
                let line = |name: &str, m: &makeup_core::bench::MacCounts, ms: f64| {
                    println!(
                        "{name:<14} score {:>12}  value {:>12}  projection {:>10}  {ms:>9.1} ms",
                        m.score_macs, m.value_macs, m.projection_macs
                    )
                };
                println!("{height}×{width}×{channels}, {landmarks} landmarks, mode {} (S = {})", r.mode, r.window);
                line("full", &r.full, r.timing.full_ms);
                line(&r.mode, &r.windowed, r.timing.windowed_ms);
                println!("score ratio full/windowed: {:.2}", r.score_ratio);
                println!("counters match formula: {}", r.counters_match_formula);
                if let Some(d) = r.max_abs_diff {
                    println!("max |windowed − full|: {d:.3e}");
                }
            }
            Ok(true)
        }
        Command::Edit { spec, src, src_landmarks, refs, seed, config, out } => {
            let cfg = match config {
                Some(path) => RunConfig::load(path)?.generator_config(),
                None => GeneratorConfig::default(),
            };
            let g = Generator::new(GeneratorConfig { seed, ..cfg })?;
            let image = load_rgb(&src)?;
            let landmarks = load_landmarks_for(&src_landmarks, &image)?;
            let source = Face { image, landmarks };
            let references = refs.iter().map(|r| parse_ref(r)).collect::<Result<Vec<_>>>()?;
            let spec = EditSpec::load(&spec)?;
            save_rgb(&edit_transfer(&source, &references, &spec, &g)?, &out)?;
            Ok(true)
        }
        Command::Gradcheck { kernel, tol, instances, seed } => {
            let results = run_suite(&kernel, tol, instances, seed)?;
            let mut failed = 0;
            for r in &results {
                println!(
                    "{} {}[{}] #{}: max_abs {:.3e} max_rel {:.3e} over {} entries",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.kernel,
                    r.argument,
                    r.instance,
                    r.max_abs_err,
                    r.max_rel_err,
                    r.entries
                );
                failed += !r.passed as usize;
            }
            if failed > 0 {
                eprintln!("{failed} of {} gradient checks failed at tol {tol}", results.len());
            }
            Ok(failed == 0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
