//! Command-line front end: one subcommand per pipeline stage, each reading
//! and writing CXT1 files and leaving a JSON run manifest next to its
//! outputs.
//!
//! Exit status: 0 on success, 1 when `compare` finds a mismatch, 2 for
//! usage and input errors, 3 for numerical failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::acquisition::{
    acquire, extract_navigators, golden_angle_trajectory, pca_compress_coils, KSpaceData, NavigatorMatrix,
    RadialSense,
};
use crate::dae::{TrainConfig, TrainedDae};
use crate::error::{Error, Result};
use crate::io::{self, render_frame, render_profile, write_atomic, Cxt1, Payload, RunManifest};
use crate::metrics::MetricReport;
use crate::numerics::{CasoratiMatrix, RngSeed};
use crate::phantom::{generate_coil_maps, generate_phantom, CoilMapSet, PhantomConfig};
use crate::pipeline::{run_method, sweep_lambda, train_on_navigators, Method, Problem};
use crate::priors::{estimate_basis, SubspaceBasis};
use crate::recon::{Init, ReconConfig};

#[derive(Debug, Parser)]
#[command(name = "dmri", version, about = "Dynamic MRI reconstruction with navigator-learned priors")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads; 1 gives the canonical single-threaded schedule.
    #[arg(long, global = true, env = "DMRI_THREADS")]
    pub threads: Option<usize>,

    /// File of `key=value` lines used as defaults for the subcommand's
    /// long options.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the ground-truth phantom and coil sensitivities.
    Phantom(PhantomArgs),
    /// Simulate radial multi-coil k-space and extract navigators.
    Acquire(AcquireArgs),
    /// Estimate a temporal subspace basis from navigators.
    Basis(BasisArgs),
    /// Train the denoising autoencoder on navigator vectors.
    TrainDae(TrainDaeArgs),
    /// Reconstruct the image series.
    Recon(ReconArgs),
    /// Per-frame SER, SSIM and HFEN against a reference.
    Eval(EvalArgs),
    /// Render a frame or an x-t profile to PGM.
    Render(RenderArgs),
    /// Relative Frobenius distance between two tensors.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 200)]
    pub frames: usize,
    #[arg(long, default_value_t = 22.0)]
    pub cardiac_period: f64,
    #[arg(long, default_value_t = 85.0)]
    pub resp_period: f64,
    #[arg(long, default_value_t = 0.15)]
    pub cardiac_amplitude: f64,
    #[arg(long, default_value_t = 4.0)]
    pub resp_amplitude: f64,
    #[arg(long, default_value_t = 8)]
    pub coils: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AcquireArgs {
    #[arg(long)]
    pub phantom: PathBuf,
    #[arg(long)]
    pub coils: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Spokes per frame, including the two navigators.
    #[arg(long, default_value_t = 10)]
    pub spokes: usize,
    /// Absolute standard deviation of complex Gaussian noise.
    #[arg(long, default_value_t = 0.005)]
    pub noise: f64,
    /// Virtual coil count; 0 keeps every physical coil.
    #[arg(long, default_value_t = 4)]
    pub compress: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    #[arg(long)]
    pub navigators: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub rank: usize,
    #[arg(long, default_value = "basis.cxt1")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainDaeArgs {
    #[arg(long)]
    pub navigators: PathBuf,
    #[arg(long, default_value = "dae.cxt1")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Defaults to round(frames / 8).
    #[arg(long)]
    pub bottleneck: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReconArgs {
    #[arg(long)]
    pub kspace: PathBuf,
    /// Sensitivities matching the k-space coils (virtual coils after
    /// compression).
    #[arg(long)]
    pub coils: PathBuf,
    #[arg(long, default_value = "dae")]
    pub method: Method,
    #[arg(long)]
    pub dae: Option<PathBuf>,
    #[arg(long)]
    pub basis: Option<PathBuf>,
    /// Regularization weight; the DAE method falls back to a data-scaled
    /// default when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated λ values; keeps the best mean SER against
    /// `--reference`.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<f64>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub outer_iters: usize,
    #[arg(long, default_value_t = 30)]
    pub cg_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub cg_tol: f64,
    /// `gridding` or `zeros`.
    #[arg(long, default_value = "gridding")]
    pub init: String,
    #[arg(long, default_value = "recon.cxt1")]
    pub out: PathBuf,
    /// Per-iteration CSV; defaults to `<out stem>-trace.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub recon: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, default_value = "metrics.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// A Casorati CXT1 file (phantom or reconstruction).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, conflicts_with = "profile_row", required_unless_present = "profile_row")]
    pub frame: Option<usize>,
    #[arg(long)]
    pub profile_row: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

/// Parse `args` (including the program name), run, and return the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        // Fails only if a pool already exists, e.g. on a second in-process run.
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialized; --threads {n} ignored");
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

/// Splice `key=value` lines from `--config FILE` in as `--key value`
/// right after the subcommand name, so explicit flags still win.
fn expand_config(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy().into_owned();
        if a == "--config" {
            if i + 1 >= args.len() {
                return Err(Error::Config("--config needs a file".into()));
            }
            path = Some(PathBuf::from(args.remove(i + 1)));
            args.remove(i);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        extra.push(OsString::from(format!("--{}", k.trim().replace('_', "-"))));
        extra.push(OsString::from(v.trim()));
    }
    let names: Vec<String> = <Cli as clap::CommandFactory>::command()
        .get_subcommands()
        .map(|s| s.get_name().to_string())
        .collect();
    let pos = args
        .iter()
        .position(|a| names.iter().any(|n| a.to_str() == Some(n)))
        .ok_or_else(|| Error::Config("--config given without a subcommand".into()))?;
    args.splice(pos + 1..pos + 1, extra);
    Ok(args)
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Phantom(a) => cmd_phantom(&a),
        Command::Acquire(a) => cmd_acquire(&a),
        Command::Basis(a) => cmd_basis(&a),
        Command::TrainDae(a) => cmd_train_dae(&a),
        Command::Recon(a) => cmd_recon(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Render(a) => cmd_render(&a),
        Command::Compare(a) => return cmd_compare(&a),
    }
    .map(|()| 0)
}

fn manifest_path(out: &Path, stage: &str) -> PathBuf {
    out.parent()
        .unwrap_or(Path::new(""))
        .join(format!("manifest-{stage}.json"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn input_err(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
        other => other,
    }
}

fn load<T: io::Persist>(path: &Path) -> Result<T> {
    io::load(path).map_err(|e| input_err(path, e))
}

pub fn cmd_phantom(a: &PhantomArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = PhantomConfig {
        height: a.height,
        width: a.width,
        n_frames: a.frames,
        cardiac_period_frames: a.cardiac_period,
        resp_period_frames: a.resp_period,
        cardiac_amplitude: a.cardiac_amplitude,
        resp_amplitude: a.resp_amplitude,
        seed: RngSeed(a.seed),
    };
    ensure_dir(&a.out_dir)?;
    let x = generate_phantom(&cfg)?;
    let maps = generate_coil_maps(a.height, a.width, a.coils, RngSeed(a.seed))?;
    let (xp, cp) = (a.out_dir.join("phantom.cxt1"), a.out_dir.join("coils.cxt1"));
    io::save(&xp, &x)?;
    io::save(&cp, &maps)?;
    let mut m = RunManifest::new("phantom", json!({ "phantom": cfg, "coils": a.coils }));
    m.seeds.insert("seed".into(), a.seed);
    m.add_output(&xp)?;
    m.add_output(&cp)?;
    m.timings_s.insert("phantom".into(), start.elapsed().as_secs_f64());
    m.write(&manifest_path(&xp, "phantom"))
}

pub fn cmd_acquire(a: &AcquireArgs) -> Result<()> {
    let start = Instant::now();
    let x: CasoratiMatrix = load(&a.phantom)?;
    let maps: CoilMapSet = load(&a.coils)?;
    let n_read = 2 * x.height().max(x.width());
    let traj = golden_angle_trajectory(x.frames(), a.spokes, n_read)?;
    let raw = acquire(&x, &maps, &traj, a.noise, RngSeed(a.seed))?;
    let (kspace, virt) = if a.compress > 0 && a.compress < maps.n_coils() {
        let (k, v) = pca_compress_coils(&raw, &maps, a.compress)?;
        (k, Some(v))
    } else {
        (raw, None)
    };
    let nav = extract_navigators(&kspace)?;

    ensure_dir(&a.out_dir)?;
    let kp = a.out_dir.join("kspace.cxt1");
    let np = a.out_dir.join("navigators.cxt1");
    io::save(&kp, &kspace)?;
    io::save(&np, &nav)?;
    let mut m = RunManifest::new(
        "acquire",
        json!({ "spokes": a.spokes, "noise": a.noise, "compress": a.compress }),
    );
    m.seeds.insert("seed".into(), a.seed);
    m.add_input(&a.phantom)?;
    m.add_input(&a.coils)?;
    m.add_output(&kp)?;
    m.add_output(&np)?;
    if let Some(v) = virt {
        let vp = a.out_dir.join("virtual-coils.cxt1");
        io::save(&vp, &v)?;
        m.add_output(&vp)?;
    }
    m.timings_s.insert("acquire".into(), start.elapsed().as_secs_f64());
    m.write(&manifest_path(&kp, "acquire"))
}

pub fn cmd_basis(a: &BasisArgs) -> Result<()> {
    let start = Instant::now();
    let z: NavigatorMatrix = load(&a.navigators)?;
    let basis = estimate_basis(&z, a.rank)?;
    io::save(&a.out, &basis)?;
    let mut m = RunManifest::new("basis", json!({ "rank": a.rank }));
    m.add_input(&a.navigators)?;
    m.add_output(&a.out)?;
    m.timings_s.insert("basis".into(), start.elapsed().as_secs_f64());
    m.write(&manifest_path(&a.out, "basis"))
}

pub fn cmd_train_dae(a: &TrainDaeArgs) -> Result<()> {
    let start = Instant::now();
    let z: NavigatorMatrix = load(&a.navigators)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        bottleneck: a.bottleneck,
        seed: RngSeed(a.seed),
        ..TrainConfig::default()
    };
    let dae = train_on_navigators(&z, &cfg)?;
    log::info!(
        "best validation loss {:.4e} at epoch {}",
        dae.history.validation_loss[dae.history.best_epoch],
        dae.history.best_epoch
    );
    io::save(&a.out, &dae)?;
    let mut m = RunManifest::new("train-dae", json!(cfg));
    m.seeds.insert("seed".into(), a.seed);
    m.add_input(&a.navigators)?;
    m.add_output(&a.out)?;
    m.timings_s.insert("train".into(), start.elapsed().as_secs_f64());
    m.write(&manifest_path(&a.out, "train-dae"))
}

fn parse_init(s: &str) -> Result<Init> {
    match s {
        "gridding" => Ok(Init::Gridding),
        "zeros" => Ok(Init::Zeros),
        other => Err(Error::Config(format!("unknown init '{other}' (gridding or zeros)"))),
    }
}

fn trace_path(a: &ReconArgs) -> PathBuf {
    a.trace.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().map_or("recon".into(), |s| s.to_string_lossy().into_owned());
        a.out.with_file_name(format!("{stem}-trace.csv"))
    })
}

pub fn cmd_recon(a: &ReconArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = ReconConfig {
        lambda: a.lambda,
        outer_iters: a.outer_iters,
        cg_iters: a.cg_iters,
        cg_tol: a.cg_tol,
        init: parse_init(&a.init)?,
        ..ReconConfig::default()
    };
    cfg.validate()?;
    let kspace: KSpaceData = load(&a.kspace)?;
    let coils: CoilMapSet = load(&a.coils)?;
    if coils.n_coils() != kspace.n_coils {
        return Err(Error::Config(format!(
            "k-space has {} coils but the sensitivity file has {}",
            kspace.n_coils,
            coils.n_coils()
        )));
    }
    let basis: Option<SubspaceBasis> = a.basis.as_deref().map(load).transpose()?;
    let dae: Option<TrainedDae> = a.dae.as_deref().map(load).transpose()?;
    let op = RadialSense::new(kspace.trajectory.clone(), coils)?;
    let problem = Problem {
        op: &op,
        y: &kspace.samples,
        basis: basis.as_ref(),
        dae: dae.as_ref(),
        recon: &cfg,
    };

    let mut m = RunManifest::new(
        "recon",
        json!({ "method": a.method.name(), "recon": cfg, "sweep": a.sweep }),
    );
    let run = if a.sweep.is_empty() {
        run_method(&problem, a.method, a.lambda)?
    } else {
        let rp = a
            .reference
            .as_deref()
            .ok_or_else(|| Error::Config("--sweep needs --reference".into()))?;
        let truth: CasoratiMatrix = load(rp)?;
        m.add_input(rp)?;
        let (best, points) = sweep_lambda(&problem, a.method, &a.sweep, &truth)?;
        m.config["sweep_results"] = json!(points);
        best
    };
    if let Some(l) = run.lambda {
        m.config["lambda_used"] = json!(l);
    }

    io::save(&a.out, &run.x)?;
    let tp = trace_path(a);
    write_atomic(&tp, io::trace_csv(&run.records).as_bytes())?;
    for p in [Some(&a.kspace), Some(&a.coils), a.basis.as_ref(), a.dae.as_ref()].into_iter().flatten() {
        m.add_input(p)?;
    }
    m.add_output(&a.out)?;
    m.add_output(&tp)?;
    m.timings_s.insert("recon".into(), start.elapsed().as_secs_f64());
    m.write(&manifest_path(&a.out, "recon"))
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let rec: CasoratiMatrix = load(&a.recon)?;
    let reference: CasoratiMatrix = load(&a.reference)?;
    let report = MetricReport::evaluate(&reference, &rec)?;
    let s = report.ser_summary();
    println!("mean SER {:.3} dB (std {:.3})", s.mean, s.std);
    write_atomic(&a.out, report.to_csv().as_bytes())
}

pub fn cmd_render(a: &RenderArgs) -> Result<()> {
    let x: CasoratiMatrix = load(&a.input)?;
    let img = match (a.frame, a.profile_row) {
        (Some(t), _) => render_frame(&x, t)?,
        (None, Some(r)) => render_profile(&x, r)?,
        (None, None) => return Err(Error::Config("give --frame or --profile-row".into())),
    };
    img.write(&a.out)
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖` between two containers of
/// the same shape and dtype.
pub fn relative_difference(a: &Cxt1, b: &Cxt1) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::Dimension(format!("dims {:?} vs {:?}", a.dims, b.dims)));
    }
    let (num, den) = match (&a.payload, &b.payload) {
        (Payload::Complex(x), Payload::Complex(y)) => x
            .iter()
            .zip(y)
            .fold((0.0, 0.0), |(n, d), (p, q)| (n + (p - q).norm_sqr(), d + q.norm_sqr())),
        (Payload::Real(x), Payload::Real(y)) => x
            .iter()
            .zip(y)
            .fold((0.0, 0.0), |(n, d), (p, q)| (n + (p - q).powi(2), d + q * q)),
        _ => return Err(Error::Format("payload dtypes differ".into())),
    };
    Ok(if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}

pub fn cmd_compare(a: &CompareArgs) -> Result<i32> {
    let read = |p: &Path| Cxt1::read(p).map_err(|e| input_err(p, e));
    let d = relative_difference(&read(&a.a)?, &read(&a.b)?)?;
    let ok = d <= a.tol;
    println!("relative difference {d:.6e} ({} tolerance {:.1e})", if ok { "within" } else { "exceeds" }, a.tol);
    Ok(if ok { 0 } else { 1 })
}
