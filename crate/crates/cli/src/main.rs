//! `wildtrack` — track / eval / bench / synth front end over the tracking
//! library. Exit codes: 0 success, 2 bad arguments or malformed input,
//! 3 I/O failure, 4 detector failure during startup.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use wildtrack_core::detector::{
    Detector, ExternalDetector, OracleDetector, OracleNoiseModel, StubDetector,
};
use wildtrack_core::metrics;
use wildtrack_core::model::PipelineConfig;
use wildtrack_core::mot;
use wildtrack_core::pipeline::{self, PipelineError, RunSummary};
use wildtrack_core::synth;

#[derive(Debug)]
enum CliError {
    /// Bad arguments, malformed input files, inconsistent ranges.
    Usage(String),
    /// Filesystem problems.
    Io(String),
    /// Detector failed before tracking started.
    Detector(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Detector(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Detector(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io(msg: impl Into<String>) -> CliError {
    CliError::Io(msg.into())
}

#[derive(Parser)]
#[command(
    name = "wildtrack",
    version,
    about = "High-resolution multi-object tracking with scheduled window re-detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track objects through a directory of PPM frames.
    Track(TrackArgs),
    /// Score a tracking result against ground truth (MOTA / IDF1).
    Eval(EvalArgs),
    /// Measure throughput across window budgets.
    Bench(BenchArgs),
    /// Generate a deterministic synthetic sequence with ground truth.
    Synth(SynthArgs),
}

/// Pipeline tunables; each flag overrides the same-named key of the config
/// file (flags win over the file, the file wins over built-in defaults).
#[derive(Args, Debug, Clone)]
struct ConfigOverrides {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    window_size: Option<usize>,
    #[arg(long)]
    window_overlap_ratio: Option<f64>,
    #[arg(long)]
    points_per_instance: Option<usize>,
    #[arg(long)]
    pyramid_levels: Option<usize>,
    /// Number of windows re-detected per frame; "all" probes every window.
    #[arg(long)]
    windows_per_frame: Option<String>,
    #[arg(long)]
    edge_rate_boost: Option<u64>,
    #[arg(long)]
    instance_rate_boost: Option<u64>,
    #[arg(long)]
    poa_threshold: Option<f64>,
    #[arg(long)]
    iou_gate: Option<f64>,
    #[arg(long)]
    conf_required_per_detection: Option<f64>,
    #[arg(long)]
    conf_validate_threshold: Option<f64>,
    #[arg(long)]
    conf_terminate_threshold: Option<f64>,
    #[arg(long)]
    lk_window_radius: Option<usize>,
    #[arg(long)]
    lk_max_iterations: Option<usize>,
    #[arg(long)]
    lk_epsilon: Option<f64>,
    #[arg(long)]
    harris_k: Option<f64>,
    #[arg(long)]
    mask_containment_fraction: Option<f64>,
}

impl ConfigOverrides {
    /// `total_windows`: grid size of the input frames, for `all`.
    fn resolve(&self, total_windows: Option<usize>) -> CliResult<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path).map_err(|e| usage(e.to_string()))?,
            None => PipelineConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        apply!(
            window_size,
            window_overlap_ratio,
            points_per_instance,
            pyramid_levels,
            edge_rate_boost,
            instance_rate_boost,
            poa_threshold,
            iou_gate,
            conf_required_per_detection,
            conf_validate_threshold,
            conf_terminate_threshold,
            lk_window_radius,
            lk_max_iterations,
            lk_epsilon,
            harris_k,
            mask_containment_fraction
        );
        if let Some(w) = &self.windows_per_frame {
            cfg.windows_per_frame = parse_windows_setting(w, total_windows)?;
        }
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn parse_windows_setting(s: &str, total: Option<usize>) -> CliResult<usize> {
    if s == "all" {
        return total.ok_or_else(|| usage("'all' windows requires a frame sequence"));
    }
    s.parse::<usize>()
        .map_err(|_| usage(format!("bad windows-per-frame value '{s}'")))
        .and_then(|v| {
            if v == 0 {
                Err(usage("windows-per-frame must be >= 1 (or 'all')"))
            } else {
                Ok(v)
            }
        })
}

#[derive(Args)]
struct TrackArgs {
    /// Directory of frames named like 000001.ppm (1-based).
    #[arg(long)]
    frames: PathBuf,
    /// Detector: `oracle:<gt-file>[:<noise-spec>]`, `exec:<command>`,
    /// or `stub:<millis>`. noise-spec keys: miss, fp, jitter,
    /// conf=<lo>-<hi>, seed (comma separated).
    #[arg(long)]
    detector: String,
    /// Result CSV path; timing report and run manifest are written next to it.
    #[arg(long, short, default_value = "tracks.csv")]
    output: PathBuf,
    /// Worker thread cap (0 = auto).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth MOT CSV.
    #[arg(long)]
    gt: PathBuf,
    /// Tracking result MOT CSV.
    #[arg(long)]
    result: PathBuf,
    /// Optional file to also write the report to.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of frames named like 000001.ppm (1-based).
    #[arg(long)]
    frames: PathBuf,
    /// Comma-separated windows-per-frame settings; "all" allowed.
    #[arg(long, default_value = "1,2,4,8,16,all")]
    settings: String,
    /// Detector (defaults to a fixed-cost stub so numbers isolate
    /// pipeline overhead).
    #[arg(long, default_value = "stub:50")]
    detector: String,
    /// Optional file to also write the fps table to.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Worker thread cap (0 = auto).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for frames, gt.txt, masks and manifest.
    #[arg(long, short)]
    out: PathBuf,
    /// Scene spec file (`key = value`; `object = class,w,h,x,y,vx,vy,texture[,until]`).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides of the scene spec.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra object, repeatable: class,w,h,x,y,vx,vy,texture[,until].
    #[arg(long = "object")]
    objects: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Track(args) => cmd_track(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

// ---- frame sequences --------------------------------------------------------

fn list_frames(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| io(format!("{}: {e}", dir.display())))?;
    let mut frames: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "ppm").unwrap_or(false))
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(io(format!("{}: no .ppm frames found", dir.display())));
    }
    Ok(frames)
}

fn frame_dims(path: &Path) -> CliResult<(usize, usize)> {
    let img = synth::read_ppm(path).map_err(|e| io(e.to_string()))?;
    Ok((img.width(), img.height()))
}

/// Run the pipeline over a lazily loaded frame directory.
fn run_sequence(
    frames: &[PathBuf],
    detector: &mut dyn Detector,
    cfg: &PipelineConfig,
) -> CliResult<RunSummary> {
    let read_error = std::cell::RefCell::new(None::<CliError>);
    let source = frames.iter().map_while(|p| match synth::read_ppm(p) {
        Ok(img) => Some(img),
        Err(e) => {
            *read_error.borrow_mut() = Some(io(e.to_string()));
            None
        }
    });
    let outcome = pipeline::run(source, detector, cfg, |_| {});
    if let Some(e) = read_error.into_inner() {
        return Err(e);
    }
    outcome.map_err(|e| match e {
        PipelineError::InitDetector(d) => CliError::Detector(d.to_string()),
        other => usage(other.to_string()),
    })
}

// ---- detectors --------------------------------------------------------------

enum DetectorKind {
    Oracle(Box<OracleDetector>),
    External(Box<ExternalDetector>),
    Stub(StubDetector),
}

impl DetectorKind {
    fn as_mut(&mut self) -> &mut dyn Detector {
        match self {
            DetectorKind::Oracle(d) => d.as_mut(),
            DetectorKind::External(d) => d.as_mut(),
            DetectorKind::Stub(d) => d,
        }
    }
}

fn parse_noise_spec(spec: &str) -> CliResult<OracleNoiseModel> {
    let mut noise = OracleNoiseModel::noise_free();
    for part in spec.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("noise spec '{part}': expected key=value")))?;
        let bad = || usage(format!("noise spec '{part}': bad value"));
        match key {
            "miss" => noise.miss_rate = value.parse().map_err(|_| bad())?,
            "fp" => noise.false_positive_rate = value.parse().map_err(|_| bad())?,
            "jitter" => noise.box_jitter_sigma = value.parse().map_err(|_| bad())?,
            "seed" => noise.seed = value.parse().map_err(|_| bad())?,
            "conf" => {
                let (lo, hi) = value
                    .split_once('-')
                    .ok_or_else(|| usage(format!("noise spec '{part}': conf needs lo-hi")))?;
                noise.confidence_range = (
                    lo.parse().map_err(|_| bad())?,
                    hi.parse().map_err(|_| bad())?,
                );
            }
            other => return Err(usage(format!("noise spec: unknown key '{other}'"))),
        }
    }
    Ok(noise)
}

/// Build a detector from its CLI spec; `sequence_len` pads oracle ground
/// truth with empty frames so short GT files still cover the whole run.
fn build_detector(spec: &str, sequence_len: usize) -> CliResult<DetectorKind> {
    if let Some(rest) = spec.strip_prefix("oracle:") {
        let (gt_path, noise) = match rest.split_once(':') {
            Some((path, noise_spec)) => (path, parse_noise_spec(noise_spec)?),
            None => (rest, OracleNoiseModel::noise_free()),
        };
        let mut store = mot::load_ground_truth(Path::new(gt_path)).map_err(|e| match e {
            mot::MotError::Io { .. } => io(e.to_string()),
            mot::MotError::Parse { .. } => usage(e.to_string()),
        })?;
        while store.frames.len() < sequence_len {
            store.frames.push(Vec::new());
        }
        Ok(DetectorKind::Oracle(Box::new(OracleDetector::new(store, noise))))
    } else if let Some(cmd) = spec.strip_prefix("exec:") {
        let det = ExternalDetector::spawn(cmd, Duration::from_secs(30))
            .map_err(|e| CliError::Detector(e.to_string()))?;
        Ok(DetectorKind::External(Box::new(det)))
    } else if let Some(ms) = spec.strip_prefix("stub:") {
        let ms: u64 = ms
            .parse()
            .map_err(|_| usage(format!("bad stub delay '{ms}'")))?;
        Ok(DetectorKind::Stub(StubDetector {
            delay: Duration::from_millis(ms),
        }))
    } else {
        Err(usage(format!(
            "unknown detector '{spec}' (expected oracle:<gt>[:<noise>], exec:<cmd>, stub:<ms>)"
        )))
    }
}

// ---- manifest ---------------------------------------------------------------

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

struct Manifest {
    command: String,
    inputs: Vec<(String, String)>,
    cfg: Option<PipelineConfig>,
    started: u64,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            cfg: None,
            started: unix_now(),
        }
    }

    fn input(&mut self, key: &str, value: impl std::fmt::Display) {
        self.inputs.push((key.to_string(), value.to_string()));
    }

    fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = format!(
            "version = {}\ncommand = {}\nstarted_unix = {}\nfinished_unix = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.started,
            unix_now()
        );
        for (k, v) in &self.inputs {
            text.push_str(&format!("{k} = {v}\n"));
        }
        if let Some(cfg) = &self.cfg {
            text.push_str("# resolved pipeline config\n");
            text.push_str(&cfg.to_config_text());
        }
        std::fs::write(path, text).map_err(|e| io(format!("{}: {e}", path.display())))
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

// ---- subcommands ------------------------------------------------------------

fn total_windows_for(frames: &[PathBuf], overrides: &ConfigOverrides) -> CliResult<usize> {
    let (w, h) = frame_dims(&frames[0])?;
    // Grid geometry only needs the two window keys; defaults for the rest.
    let mut probe_cfg = PipelineConfig::default();
    if let Some(path) = &overrides.config {
        probe_cfg = PipelineConfig::from_file(path).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(ws) = overrides.window_size {
        probe_cfg.window_size = ws;
    }
    if let Some(ov) = overrides.window_overlap_ratio {
        probe_cfg.window_overlap_ratio = ov;
    }
    let grid = wildtrack_core::slicer::slice_grid(w, h, probe_cfg.window_size, probe_cfg.window_overlap_ratio)
        .map_err(|e| usage(e.to_string()))?;
    Ok(grid.len())
}

fn cmd_track(args: TrackArgs) -> CliResult<()> {
    let frames = list_frames(&args.frames)?;
    let total = total_windows_for(&frames, &args.overrides)?;
    let cfg = args.overrides.resolve(Some(total))?;
    let mut detector = build_detector(&args.detector, frames.len())?;

    let mut manifest = Manifest::new("track");
    manifest.input("frames_dir", args.frames.display());
    manifest.input("frame_count", frames.len());
    manifest.input("detector", &args.detector);
    manifest.input("threads", args.threads);
    manifest.cfg = Some(cfg.clone());

    let summary = run_sequence(&frames, detector.as_mut(), &cfg)?;

    let csv = summary.csv_lines.join("\n") + "\n";
    std::fs::write(&args.output, csv)
        .map_err(|e| io(format!("{}: {e}", args.output.display())))?;
    std::fs::write(sibling(&args.output, ".timing.txt"), summary.to_text())
        .map_err(|e| io(format!("{}: {e}", args.output.display())))?;
    manifest.input("output", args.output.display());
    manifest.write(&sibling(&args.output, ".manifest.txt"))?;

    println!(
        "tracked {} frames at {:.2} fps — {} rows, {} spawned / {} confirmed / {} terminated",
        summary.frames,
        summary.fps,
        summary.csv_lines.len(),
        summary.census.spawned,
        summary.census.confirmed,
        summary.census.terminated
    );
    Ok(())
}

fn read_rows(path: &Path) -> CliResult<Vec<mot::MotRow>> {
    mot::read_mot_csv(path).map_err(|e| match e {
        mot::MotError::Io { .. } => io(e.to_string()),
        mot::MotError::Parse { .. } => usage(e.to_string()),
    })
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let gt_rows = read_rows(&args.gt)?;
    let result_rows = read_rows(&args.result)?;
    let gt_max = gt_rows.iter().map(|r| r.frame).max().unwrap_or(0);
    let res_max = result_rows.iter().map(|r| r.frame).max().unwrap_or(0);
    if res_max > gt_max {
        return Err(usage(format!(
            "frame range mismatch: result reaches frame {res_max} but ground truth ends at {gt_max}"
        )));
    }
    let report = metrics::evaluate(
        &mot::rows_to_track_store(&gt_rows),
        &mot::rows_to_track_store(&result_rows),
    );
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &args.output {
        std::fs::write(out, &text).map_err(|e| io(format!("{}: {e}", out.display())))?;
        let mut manifest = Manifest::new("eval");
        manifest.input("gt", args.gt.display());
        manifest.input("result", args.result.display());
        manifest.input("output", out.display());
        manifest.write(&sibling(out, ".manifest.txt"))?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    let frames = list_frames(&args.frames)?;
    let total = total_windows_for(&frames, &args.overrides)?;
    let settings: Vec<usize> = args
        .settings
        .split(',')
        .map(|s| parse_windows_setting(s.trim(), Some(total)))
        .collect::<CliResult<_>>()?;
    if settings.is_empty() {
        return Err(usage("no bench settings given"));
    }

    let mut table = String::from("windows_per_frame,fps\n");
    println!("windows_per_frame  fps");
    for &setting in &settings {
        let mut cfg = args.overrides.resolve(Some(total))?;
        cfg.windows_per_frame = setting;
        let mut detector = build_detector(&args.detector, frames.len())?;
        let summary = run_sequence(&frames, detector.as_mut(), &cfg)?;
        println!("{setting:>17}  {:.3}", summary.fps);
        table.push_str(&format!("{setting},{:.3}\n", summary.fps));
    }
    if let Some(out) = &args.output {
        std::fs::write(out, &table).map_err(|e| io(format!("{}: {e}", out.display())))?;
        let mut manifest = Manifest::new("bench");
        manifest.input("frames_dir", args.frames.display());
        manifest.input("detector", &args.detector);
        manifest.input("settings", &args.settings);
        manifest.input("threads", args.threads);
        manifest.write(&sibling(out, ".manifest.txt"))?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| io(format!("{}: {e}", path.display())))?;
            synth::SceneSpec::parse_str(&text).map_err(|e| usage(e.to_string()))?
        }
        None => synth::SceneSpec::parse_str("").map_err(|e| usage(e.to_string()))?,
    };
    if let Some(w) = args.width {
        spec.width = w;
    }
    if let Some(h) = args.height {
        spec.height = h;
    }
    if let Some(f) = args.frames {
        spec.frames = f;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    for obj in &args.objects {
        let line = format!("object = {obj}\n");
        let parsed = synth::SceneSpec::parse_str(&line).map_err(|e| usage(e.to_string()))?;
        spec.objects.extend(parsed.objects);
    }
    if spec.frames == 0 || spec.width == 0 || spec.height == 0 {
        return Err(usage("scene dims and frame count must be positive"));
    }

    let (frames, gt) = synth::render_sequence(&spec);
    synth::write_sequence(&frames, &gt, &args.out, spec.seed).map_err(|e| match e {
        synth::SynthError::BadSpec(_) => usage(e.to_string()),
        other => io(other.to_string()),
    })?;
    println!(
        "wrote {} frames ({}x{}) and ground truth to {}",
        frames.len(),
        spec.width,
        spec.height,
        args.out.display()
    );
    Ok(())
}
