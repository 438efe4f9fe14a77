//! Acceptance suite: one PASS/FAIL line per criterion, written straight to
//! stdout so the report shows up even when the harness captures output.
//!
//! Run alone with `cargo test -p svmcascade-cli --test acceptance`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use svmcascade::boosting::{
    run_adaboost, AdaBoostRun, StumpLearner, TinyNetLearner, TreeLearner, ComponentLearn,
};
use svmcascade::boostsvm::{attempts_csv, run_adaboost_svm, BoostSvmConfig, SigmaSchedule};
use svmcascade::cascade::{train_cascade, CascadeModel, Detector, LearnerKind, ScanConfig, TrainConfig};
use svmcascade::evalkit::{
    backgrounds, cross_corpus, cross_faces, error_table_from_rocs, roc_curve, two_gaussians,
    two_moons, LabeledImage, RocPoint, Sweep,
};
use svmcascade::features::{enumerate_pool, HaarKind};
use svmcascade::svm::{dual_objective, train_svm, KernelSpec, SolverConfig, SvmModel};
use svmcascade::{Dataset, GrayImage, IntegralPair, Rect};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(id: usize, name: &str, o: &Outcome, elapsed: Duration) {
    let line = format!(
        "criterion {id:>2} {} {name}: {} ({:.1}s)\n",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

// ---- criterion 1 -------------------------------------------------------

fn integral_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let w = rng.random_range(1..=64u32);
        let h = rng.random_range(1..=64u32);
        let data: Vec<u8> = (0..w * h).map(|_| rng.random()).collect();
        let img = GrayImage::new(w, h, data).unwrap();
        let ip = IntegralPair::build(&img);
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        let r = Rect::new(x, y, rng.random_range(1..=w - x), rng.random_range(1..=h - y));
        let mut brute = 0u64;
        for py in r.y..r.y + r.h {
            for px in r.x..r.x + r.w {
                brute += img.get(px, py) as u64;
            }
        }
        if ip.rect_sum(r).unwrap() != brute {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 1000 random rects"))
}

// ---- criterion 2 -------------------------------------------------------

/// Placements of all widths that are multiples of `unit` in a `base` span:
/// sum over k of (base - k unit + 1) = n (base + 1) - unit n (n + 1) / 2.
fn closed_form_axis(base: u64, unit: u64) -> u64 {
    let n = base / unit;
    n * (base + 1) - unit * n * (n + 1) / 2
}

fn closed_form(base: u32, kind: HaarKind) -> u64 {
    let (uw, uh) = kind.unit();
    closed_form_axis(base as u64, uw as u64) * closed_form_axis(base as u64, uh as u64)
}

fn pool_count() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for base in [4u32, 8, 24, 32] {
        let pool = enumerate_pool(base);
        for kind in HaarKind::ALL {
            let got = pool.features.iter().filter(|f| f.kind == kind).count() as u64;
            let want = closed_form(base, kind);
            if got != want {
                ok = false;
                notes.push(format!("base {base} {kind:?}: {got} != {want}"));
            }
        }
        if base == 32 {
            ok &= pool.len() > 180_000;
            notes.push(format!("base 32 total {}", pool.len()));
        }
        if base == 4 {
            let horizontal = pool
                .features
                .iter()
                .filter(|f| f.kind == HaarKind::TwoRectHorizontal)
                .count();
            ok &= horizontal == 40;
            notes.push(format!("base 4 two-rect horizontal {horizontal}"));
        }
    }
    outcome(ok, notes.join(", "))
}

// ---- criterion 3 -------------------------------------------------------

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Exact minimum of the dual by enumerating which variables sit at 0, at C
/// or strictly inside, solving the KKT system of the free ones each time.
fn brute_force_dual(data: &Dataset, kernel: &KernelSpec, c: f64) -> f64 {
    let l = data.len();
    let y: Vec<f64> = data.labels().iter().map(|&v| v as f64).collect();
    let k = |i: usize, j: usize| {
        svmcascade::svm::kernel_eval(kernel, data.point(i), data.point(j)).unwrap()
    };
    let q: Vec<Vec<f64>> = (0..l).map(|i| (0..l).map(|j| y[i] * y[j] * k(i, j)).collect()).collect();
    let objective = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..l {
            for j in 0..l {
                s += a[i] * a[j] * q[i][j];
            }
        }
        0.5 * s - a.iter().sum::<f64>()
    };
    let mut best = f64::INFINITY;
    let patterns = 3usize.pow(l as u32);
    for code in 0..patterns {
        // 0 = at zero, 1 = at C, 2 = free
        let mut state = vec![0u8; l];
        let mut v = code;
        for s in state.iter_mut() {
            *s = (v % 3) as u8;
            v /= 3;
        }
        let free: Vec<usize> = (0..l).filter(|&i| state[i] == 2).collect();
        let mut a: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if free.is_empty() {
            let eq: f64 = (0..l).map(|i| y[i] * a[i]).sum();
            if eq.abs() < 1e-9 {
                best = best.min(objective(&a));
            }
            continue;
        }
        // unknowns: alpha_F and the multiplier b of the equality constraint
        let m = free.len();
        let mut mat = vec![vec![0.0; m + 1]; m + 1];
        let mut rhs = vec![0.0; m + 1];
        for (r, &i) in free.iter().enumerate() {
            for (cidx, &j) in free.iter().enumerate() {
                mat[r][cidx] = q[i][j];
            }
            mat[r][m] = y[i];
            let fixed: f64 = (0..l).filter(|&j| state[j] == 1).map(|j| q[i][j] * c).sum();
            rhs[r] = 1.0 - fixed;
        }
        for (cidx, &j) in free.iter().enumerate() {
            mat[m][cidx] = y[j];
        }
        rhs[m] = -(0..l).filter(|&j| state[j] == 1).map(|j| y[j] * c).sum::<f64>();
        let Some(sol) = solve_linear(mat, rhs) else {
            continue;
        };
        if free.iter().enumerate().all(|(r, _)| sol[r] >= -1e-12 && sol[r] <= c + 1e-12) {
            for (r, &i) in free.iter().enumerate() {
                a[i] = sol[r].clamp(0.0, c);
            }
            best = best.min(objective(&a));
        }
    }
    best
}

fn svm_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tight = SolverConfig {
        kkt_tolerance: 1e-9,
        max_passes: 10_000,
        ..SolverConfig::default()
    };
    let mut worst = 0.0f64;
    let mut tested = 0;
    while tested < 200 {
        let l = rng.random_range(2..=8usize);
        let pts: Vec<Vec<f64>> = (0..l)
            .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let labels: Vec<i8> = (0..l).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let data = Dataset::new(pts, labels).unwrap();
        if !data.has_both_classes() {
            continue;
        }
        tested += 1;
        let kernel = KernelSpec::Rbf {
            sigma: rng.random_range(0.3..3.0),
        };
        let c = rng.random_range(0.1..10.0);
        let fit = train_svm(&data, kernel, c, &tight).unwrap();
        let smo = dual_objective(&data, &kernel, &fit.alpha);
        let oracle = brute_force_dual(&data, &kernel, c);
        worst = worst.max((smo - oracle).abs() / oracle.abs().max(1.0));
    }

    // two points at distance sigma: K = e^{-1/2}, alpha = 1 / (1 - K), b = 0
    let two = Dataset::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1, -1]).unwrap();
    let fit = train_svm(&two, KernelSpec::Rbf { sigma: 1.0 }, 100.0, &tight).unwrap();
    let want = 1.0 / (1.0 - (-0.5f64).exp());
    let pair_err = fit
        .alpha
        .iter()
        .map(|a| (a - want).abs())
        .fold(fit.model.bias.abs(), f64::max);
    outcome(
        worst <= 1e-5 && pair_err <= 1e-6 && (want - 2.5415).abs() < 1e-4,
        format!(
            "worst relative dual gap {worst:.2e} over 200 sets, two-point alpha {:.6} vs {want:.6}, |b| {:.1e}",
            fit.alpha[0],
            fit.model.bias.abs()
        ),
    )
}

// ---- criterion 4 -------------------------------------------------------

/// Training error of the run's classifier against both bounds.
fn check_bound(run: &AdaBoostRun, data: &Dataset) -> (bool, f64, f64) {
    let err = run.classifier.training_error(data);
    let any_clamped = run.rounds.iter().any(|r| r.clamped);
    // with clamped alphas the tight bound is prod Z_t, which is never below the eps form
    let bound = if any_clamped {
        run.normalizer_product()
    } else {
        run.error_bound()
    };
    let sums_ok = run.rounds.iter().all(|r| (r.weight_sum - 1.0).abs() <= 1e-12);
    (err <= bound + 1e-12 && sums_ok, err, bound)
}

fn adaboost_bound() -> Outcome {
    let sets: Vec<(String, Dataset)> = (0..5u64)
        .flat_map(|s| {
            [
                (format!("gauss{s}"), two_gaussians(120, 1.0, s)),
                (format!("gauss10:{s}"), two_gaussians(110, 10.0, s)),
                (format!("moons{s}"), two_moons(120, 0.2, s)),
            ]
        })
        .collect();
    let mut runs = 0;
    let mut failures = Vec::new();
    for (name, data) in &sets {
        let mut learners: Vec<(&str, Box<dyn ComponentLearn>)> = vec![
            ("stump", Box::new(StumpLearner)),
            ("tree", Box::new(TreeLearner { max_depth: 2 })),
            (
                "net",
                Box::new(TinyNetLearner {
                    hidden: 4,
                    epochs: 60,
                    seed: 1,
                    inputs: None,
                }),
            ),
        ];
        for (lname, learner) in learners.iter_mut() {
            let run = run_adaboost(data, learner.as_mut(), 30).unwrap();
            runs += 1;
            let (ok, err, bound) = check_bound(&run, data);
            if !ok {
                failures.push(format!("{name}/{lname}: {err} > {bound}"));
            }
        }
        let svm = run_adaboost_svm(
            data,
            &BoostSvmConfig {
                t_max: 15,
                seed: 2,
                ..BoostSvmConfig::default()
            },
        )
        .unwrap();
        runs += 1;
        let as_run = AdaBoostRun {
            classifier: svm.classifier.clone(),
            rounds: svm.rounds.clone(),
        };
        let (ok, err, bound) = check_bound(&as_run, data);
        if !ok {
            failures.push(format!("{name}/svm: {err} > {bound}"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{runs} runs within bound, weight sums within 1e-12")
        } else {
            failures.join("; ")
        },
    )
}

// ---- criterion 5 -------------------------------------------------------

fn schedule_log() -> Outcome {
    // balanced odd-sized sets make a near-constant wide-kernel SVM miss by just over half
    let found = (0..200u64).find_map(|seed| {
        let data = two_moons(101, 0.1, seed);
        let cfg = BoostSvmConfig {
            t_max: 20,
            seed,
            ..BoostSvmConfig::default()
        };
        let run = run_adaboost_svm(&data, &cfg).ok()?;
        (run.attempts[0].epsilon > 0.5).then_some((seed, run))
    });
    let Some((seed, run)) = found else {
        return outcome(false, "no seed below 200 gives a first sigma with eps > 0.5".into());
    };
    let csv = attempts_csv(&run.attempts);
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let sigma: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let eps: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    let accepted: Vec<bool> = rows.iter().map(|r| r[5] == "accepted").collect();
    let rejected_first = !accepted[0] && sigma[1] < sigma[0];
    // the rejected attempt leaves no round: accepted rows count the rounds
    let no_round = accepted.iter().filter(|&&a| a).count() == run.rounds.len()
        && run.rounds[0].epsilon == eps[accepted.iter().position(|&a| a).unwrap()];
    let monotone = sigma.windows(2).all(|w| w[1] <= w[0]);
    let accepted_ok = eps.iter().zip(&accepted).filter(|(_, &a)| a).all(|(e, _)| *e <= 0.5);
    outcome(
        rejected_first && no_round && monotone && accepted_ok,
        format!(
            "moons seed {seed}: first eps {:.4} rejected, sigma {:.4} -> {:.4}, {} attempts, {} rounds, sigma monotone {monotone}",
            eps[0],
            sigma[0],
            sigma[1],
            rows.len(),
            run.rounds.len()
        ),
    )
}

// ---- criterion 6 -------------------------------------------------------

fn accuracy(predict: impl Fn(&[f64]) -> i8, d: &Dataset) -> f64 {
    let ok = (0..d.len()).filter(|&i| predict(d.point(i)) == d.label(i)).count();
    ok as f64 / d.len() as f64
}

fn imbalance() -> Outcome {
    let mut boost_sum = 0.0;
    let mut svm_sum = 0.0;
    let mut wins = 0;
    for seed in 1..=10u64 {
        let train = two_gaussians(220, 10.0, seed);
        let test = two_gaussians(2200, 10.0, 1000 + seed);
        let run = run_adaboost_svm(
            &train,
            &BoostSvmConfig {
                seed,
                ..BoostSvmConfig::default()
            },
        )
        .unwrap();
        let a = accuracy(|x| run.classifier.decide(x).1, &test);
        let sigma_ini = SigmaSchedule::from_data(&train, seed).unwrap().sigma_ini;
        let single: SvmModel = train_svm(
            &train,
            KernelSpec::Rbf { sigma: sigma_ini },
            1.0,
            &SolverConfig::default(),
        )
        .unwrap()
        .model;
        let b = accuracy(|x| single.classify(x).unwrap(), &test);
        boost_sum += a;
        svm_sum += b;
        if a >= b {
            wins += 1;
        }
    }
    let (ma, mb) = (boost_sum / 10.0, svm_sum / 10.0);
    outcome(
        ma >= mb - 0.01 && wins >= 6,
        format!("mean accuracy AdaBoostSVM {ma:.4} vs SVM(sigma_ini) {mb:.4}, wins {wins}/10"),
    )
}

// ---- criteria 7 to 9: shared desk-scale detector ------------------------

const BASE: u32 = 32;

fn train_config(learner: LearnerKind) -> TrainConfig {
    TrainConfig {
        base: BASE,
        learner,
        max_stages: 3,
        f_max: 0.2,
        target_fpr: 1e-9,
        seed: 7,
        ..TrainConfig::default()
    }
}

fn training_data() -> (Vec<GrayImage>, Vec<GrayImage>) {
    (
        cross_faces(400, BASE, 100),
        backgrounds(100, 5 * BASE, 15 * BASE / 4, 200),
    )
}

/// One three-target scene per seed of the fixed set.
fn test_corpus() -> Vec<LabeledImage> {
    (1..=10u64)
        .map(|seed| {
            let mut l = cross_corpus(1, 3, BASE, seed).remove(0);
            l.name = format!("seed_{seed:02}.pgm");
            l
        })
        .collect()
}

fn best_rate_within(points: &[RocPoint], fd: usize) -> (f64, Option<RocPoint>) {
    let best = points
        .iter()
        .filter(|p| p.false_detections <= fd)
        .max_by(|a, b| a.detection_rate.total_cmp(&b.detection_rate))
        .copied();
    (best.map(|p| p.detection_rate).unwrap_or(0.0), best)
}

fn end_to_end(model: &CascadeModel, corpus: &[LabeledImage]) -> Outcome {
    let points = roc_curve(model, corpus, &ScanConfig::default(), &Sweep::Exact, 0.5).unwrap();
    let (rate, best) = best_rate_within(&points, 2);
    let total: usize = corpus.iter().map(|l| l.truth.len()).sum();
    let found = (rate * total as f64).round() as usize;
    let stages = model.stages.len();
    outcome(
        stages == 3 && rate >= 0.93 && found >= 28,
        format!(
            "{stages}-stage stump cascade: {found}/{total} targets at {} false detections (theta {:.4})",
            best.map(|p| p.false_detections).unwrap_or(0),
            best.map(|p| p.threshold).unwrap_or(f64::NAN)
        ),
    )
}

fn early_rejection(model: &CascadeModel) -> Outcome {
    let det = Detector::new(model, &ScanConfig::default(), BASE).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut total = 0usize;
    for _ in 0..10_000 {
        let data: Vec<u8> = (0..BASE * BASE).map(|_| rng.random()).collect();
        let img = GrayImage::new(BASE, BASE, data).unwrap();
        let ip = IntegralPair::build(&img);
        total += det.classify(&ip, Rect::new(0, 0, BASE, BASE)).unwrap().stages_run;
    }
    let mean = total as f64 / 10_000.0;
    outcome(
        mean < 2.0 && model.stages.len() == 3,
        format!("mean stages run {mean:.4} over 10000 noise windows"),
    )
}

fn table_shape(
    stump: &CascadeModel,
    faces: &[GrayImage],
    bgs: &[GrayImage],
    corpus: &[LabeledImage],
) -> Outcome {
    let mut curves = Vec::new();
    for name in ["svm", "tree", "net", "stump"] {
        let model = if name == "stump" {
            stump.clone()
        } else {
            let learner = LearnerKind::from_name(name).unwrap();
            train_cascade(faces, bgs, &train_config(learner)).unwrap().model
        };
        let points = roc_curve(&model, corpus, &ScanConfig::default(), &Sweep::Exact, 0.5).unwrap();
        curves.push((name.to_string(), points));
    }
    let fd = [1usize, 5, 20];
    let table = error_table_from_rocs(&curves, &fd);
    let names: Vec<&str> = table.rows.iter().map(|r| r.name.as_str()).collect();
    let mut ok = names == ["svm", "tree", "net", "stump"]
        && table.fd_targets == fd
        && table.rows.iter().all(|r| r.cells.len() == fd.len());
    let text = table.to_text();
    let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    ok &= header == ["model", "fd=1", "fd=5", "fd=20"] && text.lines().count() == 5;

    let mut endpoints = true;
    for (_, pts) in &curves {
        let first = pts.first().unwrap();
        let last = pts.last().unwrap();
        let max_fd = pts.iter().map(|p| p.false_detections).max().unwrap();
        let max_rate = pts.iter().map(|p| p.detection_rate).fold(0.0, f64::max);
        endpoints &= first.threshold == f64::INFINITY
            && first.false_detections == 0
            && first.detection_rate == 0.0
            && last.threshold == f64::NEG_INFINITY
            && last.false_detections == max_fd
            && last.detection_rate == max_rate;
    }
    ok &= endpoints;
    let cells: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            let c: Vec<String> = r
                .cells
                .iter()
                .map(|c| c.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()))
                .collect();
            format!("{} [{}]", r.name, c.join(" "))
        })
        .collect();
    outcome(
        ok,
        format!("rows {names:?}, endpoints exact {endpoints}; miss % at fd {fd:?}: {}", cells.join(", ")),
    )
}

// ---- criterion 10 -------------------------------------------------------

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_svmcascade"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn tree_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn run_pipeline(dir: &Path, jobs: &str) -> Result<(), String> {
    let run = |extra: &[&str]| {
        let mut a: Vec<&str> = extra.to_vec();
        a.extend_from_slice(&["--jobs", jobs]);
        cli(dir, &a)
    };
    run(&["synth", "faces", "--n", "120", "--seed", "100", "-o", "faces"])?;
    run(&["synth", "backgrounds", "--images", "20", "--seed", "200", "-o", "bg"])?;
    run(&["synth", "cross", "--images", "4", "--targets", "3", "--seed", "1", "-o", "corpus"])?;
    run(&["synth", "gaussians", "--n", "220", "--seed", "3", "-o", "points.csv"])?;
    for learner in ["stump", "svm"] {
        let out = format!("{learner}.json");
        run(&[
            "train", "--faces", "faces", "--nonfaces", "bg", "--learner", learner,
            "--max-stages", "2", "--max-rounds", "20", "--seed", "7", "-o", &out,
        ])?;
    }
    run(&[
        "detect", "--model", "stump.json", "--annotate", "annotated", "-o", "detections.csv",
        "corpus/img_000.pgm", "corpus/img_001.pgm",
    ])?;
    run(&["roc", "--model", "stump.json", "--corpus", "corpus", "-o", "roc.csv"])?;
    run(&["eval", "--models", "svm.json,stump.json", "--corpus", "corpus", "--fd", "1,5", "-o", "eval"])
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let runs = [("a", "1"), ("b", "8"), ("c", "1")];
    for (name, jobs) in runs {
        let d = root.path().join(name);
        std::fs::create_dir_all(&d).unwrap();
        if let Err(e) = run_pipeline(&d, jobs) {
            return outcome(false, e);
        }
    }
    let a = tree_files(&root.path().join("a"));
    let b = tree_files(&root.path().join("b"));
    let c = tree_files(&root.path().join("c"));
    let differ = |x: &[(String, Vec<u8>)], y: &[(String, Vec<u8>)]| -> Vec<String> {
        if x.len() != y.len() {
            return vec![format!("{} vs {} files", x.len(), y.len())];
        }
        x.iter()
            .zip(y)
            .filter(|(p, q)| p != q)
            .map(|(p, _)| p.0.clone())
            .collect()
    };
    let jobs_diff = differ(&a, &b);
    let rerun_diff = differ(&a, &c);
    let kinds = ["json", "csv", "svg", "pgm", "ppm"];
    let covered = kinds
        .iter()
        .all(|k| a.iter().any(|(p, _)| p.ends_with(&format!(".{k}"))));
    outcome(
        jobs_diff.is_empty() && rerun_diff.is_empty() && covered,
        format!(
            "{} output files compared; --jobs 1 vs 8 differing: {jobs_diff:?}; rerun differing: {rerun_diff:?}",
            a.len()
        ),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, bool)> = Vec::new();
    let mut timed = |id: usize, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let mut o = f();
        let elapsed = t.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                o.pass = false;
                o.detail.push_str(&format!("; over the {}s budget", limit.as_secs()));
            }
        }
        report(id, name, &o, elapsed);
        results.push((id, o.pass));
    };
    let secs = |s: u64| Some(Duration::from_secs(s));

    timed(1, "integral image exactness", secs(5), &mut integral_exactness);
    timed(2, "feature pool counts", None, &mut pool_count);
    timed(3, "SMO matches brute-force QP", secs(60), &mut svm_oracle);
    timed(4, "AdaBoost training error bound", None, &mut adaboost_bound);
    timed(5, "kernel width schedule", None, &mut schedule_log);
    timed(6, "imbalanced Gaussians vs single SVM", secs(300), &mut imbalance);

    let (faces, bgs) = training_data();
    let corpus = test_corpus();
    let t = Instant::now();
    let stump = train_cascade(&faces, &bgs, &train_config(LearnerKind::Stump))
        .unwrap()
        .model;
    let train_time = t.elapsed();
    timed(7, "end-to-end detection", secs(600), &mut || {
        let mut o = end_to_end(&stump, &corpus);
        o.detail.push_str(&format!(", training {:.1}s", train_time.as_secs_f64()));
        o
    });
    timed(8, "cascade early rejection", None, &mut || early_rejection(&stump));
    timed(9, "error table and ROC endpoints", None, &mut || {
        table_shape(&stump, &faces, &bgs, &corpus)
    });
    timed(10, "CLI determinism", None, &mut determinism);

    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
