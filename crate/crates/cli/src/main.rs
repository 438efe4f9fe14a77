//! `svmcascade`: train, run and evaluate boosted cascade detectors.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 training
//! failure. Failures print exactly one `svmcascade: <class>: <reason>` line.

mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::{sibling, RunManifest};
use serde_json::json;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use svmcascade::cascade::{
    detect, round_log_csv, train_cascade, CascadeError, CascadeModel, LearnerKind, ScanConfig,
    TrainConfig, TrainError,
};
use svmcascade::evalkit::{
    backgrounds, cross_corpus, cross_faces, error_table_from_rocs, roc_csv, roc_curve, roc_svg,
    two_gaussians, two_moons, write_corpus, AnnotatedCorpus, EvalError, LabeledImage, Sweep,
    ANNOTATION_FILE,
};
use svmcascade::imaging::{load_pgm, write_pgm, write_ppm};
use svmcascade::real::csv_real;
use svmcascade::{Dataset, GrayImage};

#[derive(Debug)]
struct Fail {
    code: u8,
    class: &'static str,
    reason: String,
}

impl Fail {
    fn config(reason: impl Into<String>) -> Self {
        Fail { code: 2, class: "config", reason: reason.into() }
    }
    fn data(reason: impl Into<String>) -> Self {
        Fail { code: 3, class: "data", reason: reason.into() }
    }
    fn training(reason: impl Into<String>) -> Self {
        Fail { code: 4, class: "training", reason: reason.into() }
    }
}

impl From<TrainError> for Fail {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => Fail::config(e.to_string()),
            TrainError::Data(_) => Fail::data(e.to_string()),
            _ => Fail::training(e.to_string()),
        }
    }
}

impl From<CascadeError> for Fail {
    fn from(e: CascadeError) -> Self {
        match e {
            CascadeError::Config(_) => Fail::config(e.to_string()),
            _ => Fail::data(e.to_string()),
        }
    }
}

impl From<EvalError> for Fail {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::EmptySweep => Fail::config(e.to_string()),
            EvalError::Cascade(c) => c.into(),
            _ => Fail::data(e.to_string()),
        }
    }
}

type Res<T> = Result<T, Fail>;

#[derive(Parser, Debug)]
#[command(name = "svmcascade", version, about = "Boosted cascade detectors with SVM, tree, net or stump components")]
struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; outputs are identical for any value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Base window edge in pixels (train, synth; checked against the model elsewhere).
    #[arg(long, global = true)]
    base: Option<u32>,
    /// Output file or directory.
    #[arg(short = 'o', long = "output", global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a cascade: writes the model, `<stem>.rounds.csv` and `<stem>.manifest.json`.
    Train(TrainArgs),
    /// Scan images and write `path,x,y,w,h,score` rows.
    Detect(DetectArgs),
    /// ROC curve of one model over an annotated corpus (CSV and SVG).
    Roc(RocArgs),
    /// Compare models: ROC curves plus a miss-rate table at fixed false-detection counts.
    Eval(EvalArgs),
    /// Generate a synthetic corpus or point set.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory of base x base face windows (PGM/PPM).
    #[arg(long)]
    faces: PathBuf,
    /// Directory of face-free images to mine negatives from.
    #[arg(long)]
    nonfaces: PathBuf,
    #[arg(long, default_value = "stump", value_parser = ["svm", "stump", "tree", "net"])]
    learner: String,
    #[arg(long, default_value_t = 10)]
    max_stages: usize,
    #[arg(long, default_value_t = 100)]
    max_rounds: usize,
    #[arg(long, default_value_t = 0.995)]
    d_min: f64,
    #[arg(long, default_value_t = 0.5)]
    f_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    target_fpr: f64,
    #[arg(long, default_value_t = 3.0)]
    negative_ratio: f64,
    /// Random candidate features per run, or `all`.
    #[arg(long, default_value = "2000")]
    candidates: String,
    #[arg(long, default_value_t = 200)]
    mining_draws: usize,
}

#[derive(Args, Debug, Clone, Copy)]
struct ScanArgs {
    #[arg(long, default_value_t = 1.25)]
    scale_factor: f64,
    /// Stride as a fraction of the window edge.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    min_window: u32,
    #[arg(long, default_value_t = 2)]
    min_neighbors: usize,
    #[arg(long, default_value_t = 0.3)]
    merge_overlap: f64,
}

impl ScanArgs {
    fn config(&self) -> Res<ScanConfig> {
        let c = ScanConfig {
            scale_factor: self.scale_factor,
            step_fraction: self.step,
            min_window: self.min_window,
            merge_min_neighbors: self.min_neighbors,
            merge_overlap: self.merge_overlap,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Write a PPM copy of each image with the detections boxed into this directory.
    #[arg(long)]
    annotate: Option<PathBuf>,
    #[command(flatten)]
    scan: ScanArgs,
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct RocArgs {
    #[arg(long)]
    model: PathBuf,
    /// Directory holding the images and `annotations.txt`.
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated final-stage thresholds; default sweeps every distinct score.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    thresholds: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.5)]
    match_iou: f64,
    #[command(flatten)]
    scan: ScanArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Comma-separated model files.
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated false-detection budgets.
    #[arg(long, value_delimiter = ',', default_value = "120,200")]
    fd: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    match_iou: f64,
    #[command(flatten)]
    scan: ScanArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthKind {
    /// Scenes with planted plus-shaped faces and an annotation file.
    Cross,
    /// Face windows of edge `--base`.
    Faces,
    /// Face-free scenes.
    Backgrounds,
    /// Imbalanced two-Gaussian points as CSV.
    Gaussians,
    /// Two-moons points as CSV.
    Moons,
}

#[derive(Args, Debug)]
struct SynthArgs {
    kind: SynthKind,
    /// Images to generate (cross, backgrounds).
    #[arg(long, default_value_t = 10)]
    images: usize,
    /// Faces per scene (cross).
    #[arg(long, default_value_t = 3)]
    targets: usize,
    /// Number of faces (faces) or points (gaussians, moons).
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Majority to minority ratio (gaussians).
    #[arg(long, default_value_t = 10.0)]
    ratio: f64,
    /// Jitter (moons).
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Scene size (backgrounds); defaults to the cross-scene size for `--base`.
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("bad arguments");
            return report(Fail::config(first.trim_start_matches("error: ")));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Fail) -> ExitCode {
    let reason = f.reason.replace(['\n', '\r'], " ");
    eprintln!("svmcascade: {}: {}", f.class, reason);
    ExitCode::from(f.code)
}

fn run(cli: Cli) -> Res<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Fail::config("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Fail::config(e.to_string()))?;
    }
    let g = Globals {
        seed: cli.seed,
        base: cli.base,
        output: cli.output,
    };
    match cli.command {
        Command::Train(a) => cmd_train(&g, a),
        Command::Detect(a) => cmd_detect(&g, a),
        Command::Roc(a) => cmd_roc(&g, a),
        Command::Eval(a) => cmd_eval(&g, a),
        Command::Synth(a) => cmd_synth(&g, a),
    }
}

struct Globals {
    seed: u64,
    base: Option<u32>,
    output: Option<PathBuf>,
}

fn read(path: &Path) -> Res<Vec<u8>> {
    std::fs::read(path).map_err(|e| Fail::data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Res<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| Fail::data(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| Fail::data(format!("{}: {e}", path.display())))
}

fn image_from(path: &Path, bytes: &[u8]) -> Res<GrayImage> {
    load_pgm(bytes).map_err(|e| Fail::data(format!("{}: {e}", path.display())))
}

/// PGM/PPM files of `dir`, sorted by name, with their bytes.
fn image_files(dir: &Path) -> Res<Vec<(PathBuf, Vec<u8>)>> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| Fail::data(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|x| matches!(x.to_ascii_lowercase().to_str(), Some("pgm" | "ppm")))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Fail::data(format!("{}: no .pgm or .ppm files", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let b = read(&p)?;
            Ok((p, b))
        })
        .collect()
}

fn load_model(path: &Path, m: &mut RunManifest) -> Res<CascadeModel> {
    let bytes = read(path)?;
    m.add_input(path, &bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| Fail::data(format!("{}: model is not UTF-8", path.display())))?;
    let model = CascadeModel::from_json(&text)
        .map_err(|e| Fail::data(format!("{}: {e}", path.display())))?;
    model
        .verified_pool()
        .map_err(|e| Fail::data(format!("{}: {e}", path.display())))?;
    Ok(model)
}

fn check_base(g: &Globals, model: &CascadeModel, path: &Path) -> Res<()> {
    match g.base {
        Some(b) if b != model.base => Err(Fail::config(format!(
            "--base {b} does not match {} (base {})",
            path.display(),
            model.base
        ))),
        _ => Ok(()),
    }
}

fn load_corpus(dir: &Path, m: &mut RunManifest) -> Res<Vec<LabeledImage>> {
    let ann_path = dir.join(ANNOTATION_FILE);
    let ann = read(&ann_path)?;
    m.add_input(&ann_path, &ann);
    let text = String::from_utf8(ann)
        .map_err(|_| Fail::data(format!("{}: not UTF-8", ann_path.display())))?;
    let corpus = AnnotatedCorpus::parse(&text)?;
    let images = corpus.load(dir)?;
    for e in &corpus.entries {
        let p = dir.join(&e.path);
        m.add_input(&p, &read(&p)?);
    }
    Ok(images)
}

fn cmd_train(g: &Globals, a: TrainArgs) -> Res<()> {
    let candidates = match a.candidates.as_str() {
        "all" => None,
        s => Some(
            s.parse::<usize>()
                .map_err(|_| Fail::config(format!("--candidates: expected a count or `all`, got `{s}`")))?,
        ),
    };
    let cfg = TrainConfig {
        base: g.base.unwrap_or(32),
        learner: LearnerKind::from_name(&a.learner).expect("clap restricts the learner"),
        d_min: a.d_min,
        f_max: a.f_max,
        target_fpr: a.target_fpr,
        max_stages: a.max_stages,
        max_rounds: a.max_rounds,
        negative_ratio: a.negative_ratio,
        candidate_features: candidates,
        mining_draws: a.mining_draws,
        seed: g.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let out = g.output.clone().unwrap_or_else(|| PathBuf::from("model.json"));

    let mut man = RunManifest::new("train", g.seed, serde_json::to_value(&cfg).expect("config serialises"));
    let mut load_dir = |dir: &Path| -> Res<Vec<GrayImage>> {
        image_files(dir)?
            .into_iter()
            .map(|(p, b)| {
                man.add_input(&p, &b);
                image_from(&p, &b)
            })
            .collect()
    };
    let faces = load_dir(&a.faces)?;
    let nonfaces = load_dir(&a.nonfaces)?;

    let trained = train_cascade(&faces, &nonfaces, &cfg)?;
    let log_path = sibling(&out, "rounds.csv");
    let man_path = sibling(&out, "manifest.json");
    write(&out, trained.model.to_json())?;
    write(&log_path, round_log_csv(&trained.log))?;
    man.add_output(&out);
    man.add_output(&log_path);
    write(&man_path, man.to_json())?;
    for w in &trained.model.training_meta.warnings {
        eprintln!("svmcascade: warning: {w}");
    }
    Ok(())
}

fn cmd_detect(g: &Globals, a: DetectArgs) -> Res<()> {
    let scan = a.scan.config()?;
    let mut man = RunManifest::new(
        "detect",
        g.seed,
        json!({ "scan": scan, "annotate": a.annotate.as_ref().map(|p| p.display().to_string()) }),
    );
    let model = load_model(&a.model, &mut man)?;
    check_base(g, &model, &a.model)?;

    let mut csv = String::from("path,x,y,w,h,score\n");
    for path in &a.images {
        let bytes = read(path)?;
        man.add_input(path, &bytes);
        let img = image_from(path, &bytes)?;
        let dets = detect(&model, &img, &scan)?;
        for d in &dets {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                path.display(),
                d.rect.x,
                d.rect.y,
                d.rect.w,
                d.rect.h,
                csv_real(d.score)
            );
        }
        if let Some(dir) = &a.annotate {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let p = dir.join(format!("{stem}.ppm"));
            let boxes: Vec<_> = dets.iter().map(|d| d.rect).collect();
            write(&p, write_ppm(&img, &boxes))?;
            man.add_output(&p);
        }
    }
    match &g.output {
        Some(out) => {
            write(out, &csv)?;
            man.add_output(out);
            write(&sibling(out, "manifest.json"), man.to_json())
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn sweep_of(thresholds: &Option<Vec<f64>>) -> Sweep {
    match thresholds {
        Some(v) => Sweep::Values(v.clone()),
        None => Sweep::Exact,
    }
}

fn cmd_roc(g: &Globals, a: RocArgs) -> Res<()> {
    let scan = a.scan.config()?;
    let sweep = sweep_of(&a.thresholds);
    let mut man = RunManifest::new(
        "roc",
        g.seed,
        json!({ "scan": scan, "match_iou": a.match_iou, "thresholds": a.thresholds }),
    );
    let model = load_model(&a.model, &mut man)?;
    check_base(g, &model, &a.model)?;
    let images = load_corpus(&a.corpus, &mut man)?;
    let points = roc_curve(&model, &images, &scan, &sweep, a.match_iou)?;

    let out = g.output.clone().unwrap_or_else(|| PathBuf::from("roc.csv"));
    let svg = sibling(&out, "svg");
    write(&out, roc_csv(&points))?;
    write(&svg, roc_svg(&[(model.training_meta.learner.clone(), points)]))?;
    man.add_output(&out);
    man.add_output(&svg);
    write(&sibling(&out, "manifest.json"), man.to_json())
}

fn cmd_eval(g: &Globals, a: EvalArgs) -> Res<()> {
    let scan = a.scan.config()?;
    if a.fd.is_empty() {
        return Err(Fail::config("--fd needs at least one budget"));
    }
    let mut man = RunManifest::new(
        "eval",
        g.seed,
        json!({ "scan": scan, "match_iou": a.match_iou, "fd": a.fd }),
    );
    let mut models = Vec::new();
    for p in &a.models {
        let m = load_model(p, &mut man)?;
        check_base(g, &m, p)?;
        models.push((p.clone(), m));
    }
    // rows are named by learner family unless two models share one
    let mut names: Vec<String> = models
        .iter()
        .map(|(_, m)| m.training_meta.learner.clone())
        .collect();
    let unique = names.iter().collect::<std::collections::BTreeSet<_>>().len() == names.len();
    if !unique {
        names = models
            .iter()
            .map(|(p, _)| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
            .collect();
    }
    let images = load_corpus(&a.corpus, &mut man)?;
    let mut curves = Vec::new();
    for ((_, m), name) in models.iter().zip(&names) {
        curves.push((name.clone(), roc_curve(m, &images, &scan, &Sweep::Exact, a.match_iou)?));
    }
    let table = error_table_from_rocs(&curves, &a.fd);

    let dir = g.output.clone().unwrap_or_else(|| PathBuf::from("eval"));
    let mut outputs: Vec<(PathBuf, String)> = curves
        .iter()
        .map(|(name, pts)| (dir.join(format!("roc_{name}.csv")), roc_csv(pts)))
        .collect();
    outputs.push((dir.join("roc.svg"), roc_svg(&curves)));
    outputs.push((dir.join("table.txt"), table.to_text()));
    outputs.push((dir.join("table.csv"), table.to_csv()));
    for (p, text) in &outputs {
        write(p, text)?;
        man.add_output(p);
    }
    write(&dir.join("manifest.json"), man.to_json())?;
    print!("{}", table.to_text());
    Ok(())
}

fn points_csv(d: &Dataset) -> String {
    let mut s = String::new();
    let header: Vec<String> = (1..=d.dim()).map(|j| format!("x{j}")).collect();
    let _ = writeln!(s, "{},label", header.join(","));
    for (p, &y) in d.points().zip(d.labels()) {
        let cells: Vec<String> = p.iter().map(|&v| csv_real(v)).collect();
        let _ = writeln!(s, "{},{y}", cells.join(","));
    }
    s
}

fn cmd_synth(g: &Globals, a: SynthArgs) -> Res<()> {
    let base = g.base.unwrap_or(32);
    if base < 2 {
        return Err(Fail::config(format!("--base must be >= 2, got {base}")));
    }
    let name = format!("{:?}", a.kind).to_lowercase();
    let mut man = RunManifest::new(
        "synth",
        g.seed,
        json!({
            "kind": name,
            "base": base,
            "images": a.images,
            "targets": a.targets,
            "n": a.n,
            "ratio": a.ratio,
            "noise": a.noise,
            "width": a.width,
            "height": a.height,
        }),
    );
    let write_images = |dir: &Path, prefix: &str, imgs: &[GrayImage], man: &mut RunManifest| -> Res<()> {
        for (i, img) in imgs.iter().enumerate() {
            let p = dir.join(format!("{prefix}_{i:04}.pgm"));
            write(&p, write_pgm(img))?;
            man.add_output(&p);
        }
        write(&dir.join("manifest.json"), man.to_json())
    };
    match a.kind {
        SynthKind::Cross => {
            let dir = g.output.clone().unwrap_or_else(|| PathBuf::from("corpus"));
            let corpus = cross_corpus(a.images, a.targets, base, g.seed);
            write_corpus(&dir, &corpus)?;
            for l in &corpus {
                man.add_output(&dir.join(&l.name));
            }
            man.add_output(&dir.join(ANNOTATION_FILE));
            write(&dir.join("manifest.json"), man.to_json())
        }
        SynthKind::Faces => {
            let dir = g.output.clone().unwrap_or_else(|| PathBuf::from("faces"));
            write_images(&dir, "face", &cross_faces(a.n, base, g.seed), &mut man)
        }
        SynthKind::Backgrounds => {
            let dir = g.output.clone().unwrap_or_else(|| PathBuf::from("backgrounds"));
            let w = a.width.unwrap_or(5 * base);
            let h = a.height.unwrap_or(15 * base / 4);
            if w == 0 || h == 0 {
                return Err(Fail::config("--width and --height must be >= 1"));
            }
            write_images(&dir, "bg", &backgrounds(a.images, w, h, g.seed), &mut man)
        }
        SynthKind::Gaussians | SynthKind::Moons => {
            if a.n == 0 {
                return Err(Fail::config("--n must be >= 1"));
            }
            let d = if a.kind == SynthKind::Gaussians {
                if !(a.ratio > 0.0 && a.ratio.is_finite()) {
                    return Err(Fail::config("--ratio must be positive"));
                }
                two_gaussians(a.n, a.ratio, g.seed)
            } else {
                two_moons(a.n, a.noise, g.seed)
            };
            let out = g.output.clone().unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
            write(&out, points_csv(&d))?;
            man.add_output(&out);
            write(&sibling(&out, "manifest.json"), man.to_json())
        }
    }
}
