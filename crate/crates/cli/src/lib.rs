//! Command-line front end: `project`, `extract`, `sweep`, `testset`, `eval` and `grid`.
//!
//! Exit codes: 0 ok, 2 usage, 3 I/O, 4 domain/geometry.

mod config;
mod preview;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use omniproj::dataset::{self, ClassMap, CropList, SourceSet, SweepConfig};
use omniproj::eval::{self, ConfusionMatrix, IoUReport, TableFormat};
use omniproj::geom::{distorted_kernel_grid, EquirectSpec, PixelCoord, SphereCoord};
use omniproj::warp::{self, odd_side, Interp, ProjectionJob, WarpMode};
use omniproj::{Angle, LabelMap, RasterImage, ValidMask};

pub use config::CliConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] omniproj::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_domain() => EXIT_DOMAIN,
            CliError::Core(_) => EXIT_IO,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "omniproj",
    version,
    about = "Perspective ↔ equirectangular projection toolkit"
)]
pub struct Cli {
    /// Worker threads for data-parallel loops (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// TOML file with default values; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the effective configuration to stderr before running.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a perspective image (and labels) onto an equirectangular canvas.
    Project(ProjectArgs),
    /// Extract a tangent-plane view from an equirectangular image.
    Extract(ExtractArgs),
    /// Build a φ-sweep training set from a directory of image/label pairs.
    Sweep(SweepArgs),
    /// Build a single-φ test set, optionally from per-source crop rectangles.
    Testset(TestsetArgs),
    /// Score predicted label maps against ground truth.
    Eval(EvalArgs),
    /// Print the distortion-following k×k sampling grid around a pixel.
    Grid(GridArgs),
}

#[derive(Debug, Args, Default)]
struct CanvasArgs {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Tangent image side; even values are bumped to the next odd size.
    #[arg(long = "size-n")]
    size_n: Option<usize>,
    #[arg(long)]
    interp: Option<String>,
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Tangent zenith, e.g. `6*pi/16` or radians.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[command(flatten)]
    canvas: CanvasArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long = "size-n")]
    size_n: Option<usize>,
    #[arg(long)]
    interp: Option<String>,
    /// Treat the input as an 8-bit label map (nearest-neighbour sampling).
    #[arg(long)]
    labels: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Directory of `X.png` / `X_labels.png` pairs.
    #[arg(long = "input-dir", conflicts_with = "listing")]
    input_dir: Option<PathBuf>,
    /// JSON-lines listing of `{"image", "labels"}` pairs instead of a directory.
    #[arg(long)]
    listing: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[command(flatten)]
    canvas: CanvasArgs,
    #[arg(long)]
    tile: Option<usize>,
    #[arg(long = "class-map")]
    class_map: Option<PathBuf>,
    /// JSON array of class names; ids are positions in the list.
    #[arg(long)]
    classes: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Flip outputs vertically (lower-region experiments).
    #[arg(long)]
    mirror: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Comma-separated angle list, or `default` for kπ/16, k = 1..8.
    #[arg(long)]
    phis: Option<String>,
}

#[derive(Debug, Args)]
struct TestsetArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Defaults to pi/2.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// JSON object mapping source names to lists of `[x, y, w, h]` rectangles.
    #[arg(long)]
    crops: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predictions; either label PNGs or `phi_*` subdirectories of them.
    #[arg(long = "pred-dir")]
    pred_dir: PathBuf,
    #[arg(long = "gt-dir")]
    gt_dir: PathBuf,
    /// JSON array of class names; defaults to the six street-scene classes.
    #[arg(long)]
    classes: Option<PathBuf>,
    #[arg(long = "mask-dir")]
    mask_dir: Option<PathBuf>,
    #[arg(long, default_value = "markdown")]
    format: String,
    /// Row label when `pred-dir` holds label files directly.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    /// Directory for `grid.json` and `preview.png`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("omniproj: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    let threads = cfg.threads.unwrap_or(0);
    let print = cli.print_config;
    with_threads(threads, move || match cli.command {
        Command::Project(a) => cmd_project(a, cfg, print),
        Command::Extract(a) => cmd_extract(a, cfg, print),
        Command::Sweep(a) => cmd_sweep(a, cfg, print),
        Command::Testset(a) => cmd_testset(a, cfg, print),
        Command::Eval(a) => cmd_eval(a, cfg),
        Command::Grid(a) => cmd_grid(a, cfg),
    })
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> CliResult<R> + Send) -> CliResult<R> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| usage(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(_threads: usize, f: impl FnOnce() -> CliResult<R> + Send) -> CliResult<R> {
    f()
}

pub fn parse_angle(flag: &str, expr: &str) -> CliResult<Angle> {
    expr.parse::<Angle>()
        .map_err(|e| usage(format!("--{flag}: {e}")))
}

fn tangent_from(phi: Angle, theta: Angle) -> CliResult<SphereCoord> {
    let limit = std::f64::consts::FRAC_PI_2;
    if !(-limit..=limit).contains(&phi.radians()) {
        return Err(usage(format!("--phi {phi} is outside [-pi/2, pi/2]")));
    }
    Ok(SphereCoord::new(theta.radians(), phi.radians())?)
}

fn parse_interp(s: Option<&str>, default: Interp) -> CliResult<Interp> {
    s.map_or(Ok(default), |s| {
        s.parse()
            .map_err(|_| usage(format!("--interp {s:?}: expected nearest|bilinear")))
    })
}

fn parse_mode(s: Option<&str>) -> CliResult<WarpMode> {
    s.map_or(Ok(WarpMode::Inverse), |s| {
        s.parse()
            .map_err(|_| usage(format!("--mode {s:?}: expected inverse|scatter")))
    })
}

fn side(requested: usize) -> CliResult<usize> {
    if requested < 3 {
        return Err(usage(format!("--size-n {requested} is below 3")));
    }
    let n = odd_side(requested);
    if n != requested {
        log::warn!("--size-n {requested} is even; using {n}");
    }
    Ok(n)
}

fn canvas_spec(canvas: &CanvasArgs, cfg: &CliConfig) -> CliResult<EquirectSpec> {
    let width = canvas.width.or(cfg.width).unwrap_or(config::DEFAULT_WIDTH);
    let height = canvas.height.or(cfg.height).unwrap_or(width / 2);
    EquirectSpec::new(width, height).map_err(|e| usage(e.to_string()))
}

fn out_dir(flag: Option<PathBuf>, cfg: &CliConfig) -> CliResult<PathBuf> {
    flag.or_else(|| cfg.out.clone())
        .ok_or_else(|| usage("--out is required"))
}

fn echo_config(print: bool, effective: &impl Serialize) {
    if print {
        eprintln!("{}", toml::to_string_pretty(effective).unwrap_or_default());
    }
}

#[derive(Serialize)]
struct ProjectEffective {
    phi: String,
    theta: String,
    width: usize,
    height: usize,
    size_n: usize,
    interp: String,
    mode: String,
    out: PathBuf,
}

fn cmd_project(a: ProjectArgs, cfg: CliConfig, print: bool) -> CliResult<()> {
    let phi = parse_angle(
        "phi",
        a.phi.as_deref().or(cfg.phi.as_deref()).unwrap_or("0"),
    )?;
    let theta = parse_angle(
        "theta",
        a.theta.as_deref().or(cfg.theta.as_deref()).unwrap_or("0"),
    )?;
    let tangent = tangent_from(phi, theta)?;
    let spec = canvas_spec(&a.canvas, &cfg)?;
    let n = side(
        a.canvas
            .size_n
            .or(cfg.size_n)
            .unwrap_or(config::DEFAULT_SIZE_N),
    )?;
    let interp = parse_interp(
        a.canvas.interp.as_deref().or(cfg.interp.as_deref()),
        Interp::Bilinear,
    )?;
    let mode = parse_mode(a.canvas.mode.as_deref().or(cfg.mode.as_deref()))?;
    let out = out_dir(a.out, &cfg)?;
    echo_config(
        print,
        &ProjectEffective {
            phi: phi.to_string(),
            theta: theta.to_string(),
            width: spec.width(),
            height: spec.height(),
            size_n: n,
            interp: interp.to_string(),
            mode: mode.to_string(),
            out: out.clone(),
        },
    );

    let job = ProjectionJob::new(tangent, spec, n, interp, mode)?;
    let source = RasterImage::load_png(&a.input)?;
    let labels = a.labels.as_deref().map(LabelMap::load_png).transpose()?;
    let square = warp::resize_square(&source, n)?;
    let (equi, mask) = warp::project_image(&square, &job)?;
    if mask.is_empty() {
        return Err(omniproj::Error::Domain("projection covers no output pixel".into()).into());
    }
    write(&out.join("equirect.png"), &equi.encode_png())?;
    write(&out.join("mask.png"), &mask.encode_png())?;
    if let Some(labels) = labels {
        let square = warp::resize_square(&labels, n)?;
        let (eq_labels, _) = warp::project_labels(&square, &job)?;
        write(&out.join("labels.png"), &eq_labels.encode_png())?;
    }
    write(
        &out.join("preview.png"),
        &preview::side_by_side(&source, &equi, &mask),
    )?;
    println!(
        "projected {} at phi={} theta={} onto {}x{} (n={n}, coverage {:.4})",
        a.input.display(),
        phi.label(),
        theta.label(),
        spec.width(),
        spec.height(),
        mask.coverage()
    );
    Ok(())
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| omniproj::Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, bytes).map_err(|e| {
        CliError::Core(omniproj::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn cmd_extract(a: ExtractArgs, cfg: CliConfig, print: bool) -> CliResult<()> {
    let phi = parse_angle(
        "phi",
        a.phi.as_deref().or(cfg.phi.as_deref()).unwrap_or("0"),
    )?;
    let theta = parse_angle(
        "theta",
        a.theta.as_deref().or(cfg.theta.as_deref()).unwrap_or("0"),
    )?;
    let tangent = tangent_from(phi, theta)?;
    let n = side(a.size_n.or(cfg.size_n).unwrap_or(config::DEFAULT_SIZE_N))?;
    let out = out_dir(a.out, &cfg)?;
    echo_config(
        print,
        &BTreeMap::from([
            ("phi", phi.to_string()),
            ("theta", theta.to_string()),
            ("size_n", n.to_string()),
        ]),
    );
    let bytes = if a.labels {
        let equi = LabelMap::load_png(&a.input)?;
        warp::extract_tangent_labels(&equi, tangent, n)?.encode_png()
    } else {
        let interp = parse_interp(
            a.interp.as_deref().or(cfg.interp.as_deref()),
            Interp::Bilinear,
        )?;
        let equi = RasterImage::load_png(&a.input)?;
        warp::extract_tangent_image(&equi, tangent, n, interp)?.encode_png()
    };
    write(&out.join("tangent.png"), &bytes)?;
    println!(
        "extracted {n}x{n} view at phi={} theta={}",
        phi.label(),
        theta.label()
    );
    Ok(())
}

fn load_classes(path: Option<&Path>) -> CliResult<Vec<String>> {
    match path {
        None => Ok(eval::default_classes()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| omniproj::Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            let classes: Vec<String> =
                serde_json::from_str(&text).map_err(|source| omniproj::Error::Json {
                    path: p.to_path_buf(),
                    source,
                })?;
            Ok(classes)
        }
    }
}

fn dataset_config(
    d: &DatasetArgs,
    cfg: &CliConfig,
    phis: Vec<Angle>,
) -> CliResult<(SweepConfig, SourceSet, PathBuf, Option<ClassMap>)> {
    let theta = parse_angle(
        "theta",
        d.theta.as_deref().or(cfg.theta.as_deref()).unwrap_or("0"),
    )?;
    let spec = canvas_spec(&d.canvas, cfg)?;
    let n = side(
        d.canvas
            .size_n
            .or(cfg.size_n)
            .unwrap_or(config::DEFAULT_SIZE_N),
    )?;
    let sweep = SweepConfig {
        phis,
        theta,
        spec,
        n,
        tile: d.tile.or(cfg.tile).unwrap_or(224),
        mode: parse_mode(d.canvas.mode.as_deref().or(cfg.mode.as_deref()))?,
        interp: parse_interp(
            d.canvas.interp.as_deref().or(cfg.interp.as_deref()),
            Interp::Bilinear,
        )?,
        seed: d.seed.or(cfg.seed).unwrap_or(0),
        mirror: d.mirror || cfg.mirror.unwrap_or(false),
        classes: load_classes(d.classes.as_deref().or(cfg.classes.as_deref()))?,
    };
    sweep.validate().map_err(|e| usage(e.to_string()))?;
    let sources = match (&d.input_dir, &d.listing) {
        (Some(dir), None) => SourceSet::discover(dir)?,
        (None, Some(listing)) => SourceSet::from_listing(listing)?,
        _ => return Err(usage("exactly one of --input-dir or --listing is required")),
    };
    let class_map = d
        .class_map
        .as_deref()
        .or(cfg.class_map.as_deref())
        .map(ClassMap::load)
        .transpose()?;
    let out = out_dir(d.out.clone(), cfg)?;
    Ok((sweep, sources, out, class_map))
}

fn report_outcome(outcome: &dataset::RunOutcome, phis: &[Angle]) -> CliResult<()> {
    for (phi, count) in outcome.manifest.counts_by_phi() {
        let label = phis
            .iter()
            .find(|a| a.radians() == phi)
            .map_or_else(|| format!("{phi:.6}"), Angle::label);
        println!("phi={label} entries={count}");
    }
    println!("total entries={}", outcome.manifest.entries.len());
    if !outcome.unpaired.is_empty() {
        eprintln!(
            "warning: {} unpaired input file(s) skipped",
            outcome.unpaired.len()
        );
    }
    if let Some(first) = outcome.failures.first() {
        for f in &outcome.failures {
            eprintln!(
                "failed: {} {:?}: {}",
                f.source,
                f.crop.map(<[usize; 4]>::from),
                f.error
            );
        }
        eprintln!("{} entr(ies) failed", outcome.failures.len());
        return Err(CliError::Core(if first.error.is_domain() {
            omniproj::Error::Domain(format!("{} entries failed", outcome.failures.len()))
        } else {
            omniproj::Error::Io {
                path: PathBuf::from(&first.source),
                source: std::io::Error::other(format!("{} entries failed", outcome.failures.len())),
            }
        }));
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, cfg: CliConfig, print: bool) -> CliResult<()> {
    let phis = match (a.phis.as_deref(), &cfg.phis) {
        (Some("default"), _) | (None, None) => dataset::default_phis(),
        (Some(list), _) => parse_angle_list(list)?,
        (None, Some(list)) => list
            .iter()
            .map(|s| parse_angle("phis", s))
            .collect::<CliResult<_>>()?,
    };
    let (sweep, sources, out, class_map) = dataset_config(&a.data, &cfg, phis)?;
    echo_config(print, &sweep);
    let outcome = dataset::build_sweep(&sources, &out, &sweep, class_map.as_ref())?;
    report_outcome(&outcome, &sweep.phis)
}

fn parse_angle_list(list: &str) -> CliResult<Vec<Angle>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_angle("phis", s.trim()))
        .collect()
}

fn cmd_testset(a: TestsetArgs, cfg: CliConfig, print: bool) -> CliResult<()> {
    let phi = parse_angle("phi", a.phi.as_deref().unwrap_or("pi/2"))?;
    let (sweep, sources, out, class_map) = dataset_config(&a.data, &cfg, vec![phi])?;
    echo_config(print, &sweep);
    let crops = a
        .crops
        .as_deref()
        .map(dataset::load_crop_list)
        .transpose()?
        .unwrap_or_else(CropList::new);
    let outcome = dataset::build_testset(&sources, &out, &sweep, &crops, class_map.as_ref())?;
    report_outcome(&outcome, &sweep.phis)
}

/// `dir/labels` when it exists (dataset output layout), else `dir`.
fn label_root(dir: &Path) -> PathBuf {
    let nested = dir.join("labels");
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

fn png_files(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let read = std::fs::read_dir(dir).map_err(|e| omniproj::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut out = BTreeMap::new();
    for entry in read {
        let path = entry
            .map_err(|e| omniproj::Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .path();
        if path.is_file() && path.extension().and_then(|e| e.to_str()) == Some("png") {
            out.insert(
                path.file_name().unwrap().to_string_lossy().into_owned(),
                path,
            );
        }
    }
    Ok(out)
}

/// Scores every basename present in both directories.
fn score_dir(
    pred_dir: &Path,
    gt: &BTreeMap<String, PathBuf>,
    masks: Option<&BTreeMap<String, PathBuf>>,
    classes: &[String],
) -> CliResult<IoUReport> {
    let pred = png_files(&label_root(pred_dir))?;
    let names: Vec<&String> = pred.keys().filter(|k| gt.contains_key(*k)).collect();
    let unpaired = pred.len() + gt.len() - 2 * names.len();
    if unpaired > 0 {
        log::warn!("{unpaired} unpaired file(s) under {}", pred_dir.display());
    }
    if names.is_empty() {
        return Err(omniproj::Error::Domain(format!(
            "no prediction/ground-truth pairs in {}",
            pred_dir.display()
        ))
        .into());
    }
    let matrices: Vec<Result<ConfusionMatrix, omniproj::Error>> =
        omniproj::par::map(&names, |name| {
            let mut cm = ConfusionMatrix::new(classes.to_vec())?;
            let p = LabelMap::load_png(&pred[*name])?;
            let g = LabelMap::load_png(&gt[*name])?;
            let mask = match masks.and_then(|m| m.get(*name)) {
                Some(path) => Some(ValidMask::load_png(path)?),
                None => None,
            };
            eval::accumulate(&p, &g, mask.as_ref(), &mut cm)?;
            Ok(cm)
        });
    let mut total = ConfusionMatrix::new(classes.to_vec())?;
    for m in matrices {
        total.merge(&m?)?;
    }
    Ok(eval::iou(&total))
}

fn cmd_eval(a: EvalArgs, cfg: CliConfig) -> CliResult<()> {
    let format: TableFormat = a.format.parse().map_err(|_| {
        usage(format!(
            "--format {:?}: expected csv|markdown|json",
            a.format
        ))
    })?;
    let classes = load_classes(a.classes.as_deref().or(cfg.classes.as_deref()))?;
    let gt = png_files(&label_root(&a.gt_dir))?;
    let masks = a.mask_dir.as_deref().map(png_files).transpose()?;

    let mut sweep_dirs: Vec<(Angle, PathBuf)> = std::fs::read_dir(&a.pred_dir)
        .map_err(|e| omniproj::Error::Io {
            path: a.pred_dir.clone(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter_map(|p| Angle::from_dir_name(&p.file_name()?.to_string_lossy()).map(|phi| (phi, p)))
        .collect();
    sweep_dirs.sort_by(|x, y| x.0.radians().total_cmp(&y.0.radians()));

    let rows: Vec<(Angle, IoUReport)> = if sweep_dirs.is_empty() {
        let phi = parse_angle("phi", a.phi.as_deref().unwrap_or("pi/2"))?;
        vec![(phi, score_dir(&a.pred_dir, &gt, masks.as_ref(), &classes)?)]
    } else {
        sweep_dirs
            .iter()
            .map(|(phi, dir)| Ok((*phi, score_dir(dir, &gt, masks.as_ref(), &classes)?)))
            .collect::<CliResult<_>>()?
    };
    let table = eval::emit_table(&rows, format)?;
    match a.out {
        Some(path) => write(&path, table.as_bytes())?,
        None => print!("{table}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct GridPoint {
    x: f64,
    y: f64,
    wrapped: bool,
}

#[derive(Serialize)]
struct GridOutput {
    width: usize,
    height: usize,
    k: usize,
    center: [f64; 2],
    positions: Vec<GridPoint>,
}

fn cmd_grid(a: GridArgs, cfg: CliConfig) -> CliResult<()> {
    let spec = canvas_spec(
        &CanvasArgs {
            width: a.width,
            height: a.height,
            ..CanvasArgs::default()
        },
        &cfg,
    )?;
    if a.k < 3 || a.k.is_multiple_of(2) {
        return Err(usage(format!("--k {} must be odd and at least 3", a.k)));
    }
    let center = PixelCoord::new(a.x, a.y);
    let grid = distorted_kernel_grid(&spec, a.k, center)?;
    let half_w = spec.width() as f64 / 2.0;
    let output = GridOutput {
        width: spec.width(),
        height: spec.height(),
        k: a.k,
        center: [a.x, a.y],
        positions: grid
            .iter()
            .map(|p| GridPoint {
                x: p.x,
                y: p.y,
                wrapped: (p.x - center.x).abs() > half_w,
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&output).expect("serializable grid") + "\n";
    print!("{json}");
    if let Some(out) = a.out {
        write(&out.join("grid.json"), json.as_bytes())?;
        write(
            &out.join("preview.png"),
            &preview::grid_overlay(&spec, center, &grid),
        )?;
    }
    Ok(())
}
