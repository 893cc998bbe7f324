//! Acceptance gate. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-3 and 8 run on generated data and decide the exit status.
//! Criteria 4-7 and 9 reproduce benchmark accuracies; they need the LINQS
//! files under `$GLNN_DATA_DIR` (default: `data/` at the workspace root) and
//! report FAIL when the files are missing. Set `GLNN_ACCEPT_STRICT=1` to make
//! every FAIL affect the exit status.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use glnn_core::dataset::{make_split, Dataset, SplitSpec};
use glnn_core::gcn::{chain_symmetrize, init_model, GlnnModel};
use glnn_core::graph::symmetrize;
use glnn_core::loss::{
    glr_loss, gt_loss, masked_cross_entropy, properties_loss, softmax_cross_entropy_grad,
    CeReduction, LossWeights,
};
use glnn_core::matrix::rand_uniform;
use glnn_core::synthetic::PlantedPartition;
use glnn_core::train::{train, TrainConfig};
use glnn_core::{Matrix, Rng};
use glnn_harness::config::build_spec;
use glnn_harness::presets::{locate, preset};
use glnn_harness::{run_lambda0_sweep, run_robustness_sweep, run_single, ExperimentSpec, LABEL_RATES, LAMBDA0_GRID};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- 1

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Worst relative error between `analytic` and central differences of `f`
/// at 20 random coordinates.
fn fd_worst(analytic: &Matrix, point: &Matrix, rng: &mut Rng, f: impl Fn(&Matrix) -> f64) -> f64 {
    let h = 1e-4;
    (0..20)
        .map(|_| {
            let (r, c) = (rng.below(point.rows()), rng.below(point.cols()));
            let mut plus = point.clone();
            plus.set(r, c, point.get(r, c) + h);
            let mut minus = point.clone();
            minus.set(r, c, point.get(r, c) - h);
            rel_err(analytic.get(r, c), (f(&plus) - f(&minus)) / (2.0 * h))
        })
        .fold(0.0, f64::max)
}

fn gradient_oracles() -> Verdict {
    let (n, c, h, f) = (8, 5, 4, 3);
    let mut worst = [0.0f64; 4];
    for seed in 0..5 {
        let mut rng = Rng::new(seed);
        let x = rand_uniform(&mut rng, n, c, -1.0, 1.0).unwrap();
        let a = symmetrize(&rand_uniform(&mut rng, n, n, 0.0, 0.4).unwrap()).unwrap();
        let agt = rand_uniform(&mut rng, n, n, 0.0, 0.4).unwrap();
        let w = LossWeights {
            lambda2: 0.3,
            lambda3: 0.7,
            lambda4: 0.2,
            ..LossWeights::default()
        };

        let glr = glr_loss(&x, &a, 0.5).unwrap();
        worst[0] = worst[0].max(fd_worst(&glr.grad, &a, &mut rng, |m| glr_loss(&x, m, 0.5).unwrap().value));
        let non_sym = rand_uniform(&mut rng, n, n, -0.5, 0.5).unwrap();
        let pr = properties_loss(&non_sym, &w).unwrap();
        worst[1] = worst[1].max(fd_worst(&pr.grad, &non_sym, &mut rng, |m| {
            properties_loss(m, &w).unwrap().value
        }));
        let gt = gt_loss(&a, &agt).unwrap();
        worst[2] = worst[2].max(fd_worst(&gt.grad, &a, &mut rng, |m| gt_loss(m, &agt).unwrap().value));

        let mut model = init_model(&mut rng, n, c, h, f, LossWeights::default()).unwrap();
        model.a_raw = rand_uniform(&mut rng, n, n, -0.5, 1.0).unwrap();
        model.dropout_rate = 0.0;
        let mut y = Matrix::zeros(n, f);
        for i in 0..n {
            y.set(i, rng.below(f), 1.0);
        }
        let labeled = [0, 1, 4, 5, 7];
        let ce = |m: &GlnnModel| {
            let probs = m.forward_eval(&x).unwrap().probs;
            masked_cross_entropy(&probs, &y, &labeled).unwrap().value + m.weight_decay_penalty()
        };
        let cache = model.forward_eval(&x).unwrap();
        let g = softmax_cross_entropy_grad(&cache.probs, &y, &labeled, CeReduction::Mean).unwrap();
        let grads = model.backward(&cache, &g).unwrap();
        let g_raw = chain_symmetrize(&grads.a_out).unwrap();
        let with = |set: &dyn Fn(&mut GlnnModel)| {
            let mut m = model.clone();
            set(&mut m);
            ce(&m)
        };
        let e2e = [
            fd_worst(&grads.w0, &model.w0, &mut rng, |p| with(&|m| m.w0 = p.clone())),
            fd_worst(&grads.w1, &model.w1, &mut rng, |p| with(&|m| m.w1 = p.clone())),
            fd_worst(&g_raw, &model.a_raw, &mut rng, |p| with(&|m| m.a_raw = p.clone())),
        ];
        worst[3] = e2e.iter().fold(worst[3], |acc, &e| acc.max(e));
    }
    verdict(
        worst.iter().all(|&e| e < 1e-6),
        format!(
            "max rel err glr {:.1e}, properties {:.1e}, gt {:.1e}, gcn backward {:.1e} (tol 1e-6)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

// ---------------------------------------------------------------- 2

fn planted_split(nodes: usize, seed: u64) -> Dataset {
    let ds = PlantedPartition {
        nodes,
        seed,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let test = nodes * 3 / 5;
    make_split(&ds, &SplitSpec::counts(nodes / 5, nodes / 5, test, seed)).unwrap()
}

fn algebraic_invariants() -> Verdict {
    let mut rng = Rng::new(42);
    let mut sym_err = 0.0f64;
    for _ in 0..20 {
        let a = rand_uniform(&mut rng, 12, 12, -1.0, 1.0).unwrap();
        let b = rand_uniform(&mut rng, 12, 12, -1.0, 1.0).unwrap();
        let s = symmetrize(&a).unwrap();
        sym_err = sym_err.max(symmetrize(&s).unwrap().max_abs_diff(&s));
        let lhs = symmetrize(&a.scale(2.5).add(&b.scale(-0.5)).unwrap()).unwrap();
        let rhs = s.scale(2.5).add(&symmetrize(&b).unwrap().scale(-0.5)).unwrap();
        sym_err = sym_err.max(lhs.max_abs_diff(&rhs));
    }

    let n = 10;
    let mut feasible = Matrix::filled(n, n, 1.0 / (n - 1) as f64);
    for i in 0..n {
        feasible.set(i, i, 0.0);
    }
    let w = LossWeights {
        lambda2: 1.0,
        lambda3: 1.0,
        lambda4: 1.0,
        ..LossWeights::default()
    };
    let prop = properties_loss(&feasible, &w).unwrap().value;

    let out = train(&planted_split(40, 1), &TrainConfig {
        epochs: 50,
        snapshot_epochs: vec![],
        ..TrainConfig::default()
    })
    .unwrap();
    let identity_err = out
        .records
        .iter()
        .map(|r| (r.total - (r.cross_entropy + r.glr + r.sparsity + r.properties + 10.0 * r.gt)).abs())
        .fold(0.0, f64::max);

    let logits = rand_uniform(&mut rng, 50, 7, -30.0, 30.0).unwrap();
    let probs = logits.row_softmax();
    let softmax_err = (0..50)
        .map(|r| (probs.row(r).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);

    verdict(
        sym_err < 1e-12 && prop < 1e-20 && identity_err <= 1e-9 && softmax_err <= 1e-12,
        format!(
            "symmetrize {sym_err:.1e}, feasible properties loss {prop:.1e}, \
             total identity {identity_err:.1e} over 50 epochs, softmax rows {softmax_err:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 3

fn ground_truth_recovery() -> Verdict {
    let mut passes = 0;
    let mut lines = Vec::new();
    for seed in 0..5 {
        let ds = planted_split(30, seed);
        let out = train(&ds, &TrainConfig {
            seed,
            ..TrainConfig::default()
        })
        .unwrap();
        let rel = |e: usize| out.records[e - 1].gt_rel_frob.unwrap();
        let trace = [rel(1), rel(5), rel(15), rel(50)];
        let ok = trace.windows(2).all(|w| w[1] < w[0]) && rel(200) < 0.2;
        passes += ok as usize;
        lines.push(format!(
            "seed {seed}: {:.3}>{:.3}>{:.3}>{:.3}, @200 {:.3}",
            trace[0], trace[1], trace[2], trace[3],
            rel(200)
        ));
    }
    verdict(passes == 5, format!("{passes}/5 seeds; {}", lines.join("; ")))
}

// ---------------------------------------------------------------- 8

fn determinism() -> Verdict {
    let ds = PlantedPartition {
        nodes: 200,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let threads = 4;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let pairs: Vec<(String, String)> = [
            ("dataset", "planted"),
            ("split", "counts"),
            ("train", "40"),
            ("val", "40"),
            ("test", "100"),
            ("epochs", "60"),
            ("seed", "11"),
            ("repeats", "2"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .chain([("out".to_string(), d.path().display().to_string())])
        .collect();
        pool.install(|| run_single(&build_spec(&pairs).unwrap(), &ds)).unwrap();
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for seed in [11, 12] {
        for ext in ["csv", "ckpt"] {
            let name = format!("run_{seed}.{ext}");
            let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&name)).unwrap();
            compared += 1;
            if a != b {
                differing.push(name);
            }
        }
    }
    verdict(
        differing.is_empty(),
        format!(
            "{compared} files compared on {threads} threads, {} differ {:?}",
            differing.len(),
            differing
        ),
    )
}

// ---------------------------------------------------------------- 4-7, 9

fn data_dir() -> PathBuf {
    match std::env::var_os("GLNN_DATA_DIR") {
        Some(d) => PathBuf::from(d),
        None => {
            let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
            root.canonicalize().unwrap_or(root).join("data")
        }
    }
}

/// Loads a benchmark dataset and a 5-seed spec for it, or explains why not.
fn benchmark(name: &str, out: &Path) -> Result<(ExperimentSpec, Dataset), String> {
    let dir = data_dir();
    let p = preset(name).unwrap();
    let source = locate(&dir, p).map_err(|e| format!("blocked: {e}"))?;
    let base = source.load().map_err(|e| format!("blocked: cannot load {name}: {e}"))?;
    let pairs: Vec<(String, String)> = vec![
        ("dataset".into(), name.into()),
        ("repeats".into(), "5".into()),
        ("out".into(), out.join(name).display().to_string()),
        ("snapshot_epochs".into(), String::new()),
    ];
    Ok((build_spec(&pairs).map_err(|e| e.to_string())?, base))
}

fn pct(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{:.1}%", v * 100.0))
}

fn reproduction(name: &str, threshold: f64, reference: f64, out: &Path) -> Verdict {
    let (spec, base) = match benchmark(name, out) {
        Ok(v) => v,
        Err(why) => return verdict(false, why),
    };
    match run_single(&spec, &base) {
        Ok(s) => {
            let mean = s.test_acc_mean.unwrap_or(0.0);
            verdict(
                s.all_finite() && mean >= threshold,
                format!(
                    "mean test accuracy {} +/- {} over 5 seeds (need >= {:.1}%, reference {:.1}%, gap {:+.1} points)",
                    pct(s.test_acc_mean),
                    pct(s.test_acc_std),
                    threshold * 100.0,
                    reference * 100.0,
                    (mean - reference) * 100.0
                ),
            )
        }
        Err(e) => verdict(false, format!("run failed: {e}")),
    }
}

fn lambda0_trend(out: &Path) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, min_gap) in [("cora", 0.0), ("terroristsrel", 0.02)] {
        let (spec, base) = match benchmark(name, out) {
            Ok(v) => v,
            Err(why) => {
                pass = false;
                parts.push(format!("{name}: {why}"));
                continue;
            }
        };
        match run_lambda0_sweep(&spec, &base, &LAMBDA0_GRID) {
            Ok(rows) => {
                let acc = |s: &glnn_harness::Summary| s.test_acc_mean.unwrap_or(f64::NEG_INFINITY);
                let zero = rows.iter().find(|s| s.lambda0 == 0.0).unwrap();
                let best = rows
                    .iter()
                    .filter(|s| s.lambda0 != 0.0)
                    .max_by(|a, b| acc(a).total_cmp(&acc(b)))
                    .unwrap();
                let gap = acc(best) - acc(zero);
                let ok = rows.iter().all(|s| s.all_finite()) && gap > min_gap;
                pass &= ok;
                parts.push(format!(
                    "{name}: best lambda0 {} {} vs lambda0 0 {} (gap {:+.1} points)",
                    best.lambda0,
                    pct(best.test_acc_mean),
                    pct(zero.test_acc_mean),
                    gap * 100.0
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: sweep failed: {e}"));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

fn robustness(out: &Path) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, floor) in [("cora", 0.53), ("citeseer", 0.468)] {
        let (spec, base) = match benchmark(name, out) {
            Ok(v) => v,
            Err(why) => {
                pass = false;
                parts.push(format!("{name}: {why}"));
                continue;
            }
        };
        match run_robustness_sweep(&spec, &base, &LABEL_RATES, true) {
            Ok(points) => {
                let mean = |rate: f64, scheme: &str| {
                    points
                        .iter()
                        .find(|p| p.rate == rate && p.scheme == scheme)
                        .and_then(|p| p.mean_test_acc)
                        .unwrap_or(0.0)
                };
                let lowest = mean(LABEL_RATES[0], "glnn");
                let beaten: Vec<f64> = LABEL_RATES
                    .iter()
                    .copied()
                    .filter(|&r| mean(r, "glnn") < mean(r, "baseline"))
                    .collect();
                let ok = points.iter().all(|p| p.failed == 0) && lowest >= floor && beaten.is_empty();
                pass &= ok;
                parts.push(format!(
                    "{name}: {:.1}% at rate {} (need >= {:.1}%), baseline ahead at rates {beaten:?}",
                    lowest * 100.0,
                    LABEL_RATES[0],
                    floor * 100.0
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: sweep failed: {e}"));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let strict = std::env::var("GLNN_ACCEPT_STRICT").is_ok_and(|v| v == "1");
    let scratch = tempfile::tempdir().unwrap();
    let out = scratch.path();
    type Check<'a> = Box<dyn Fn() -> Verdict + 'a>;
    let criteria: Vec<(u32, &str, bool, Check)> = vec![
        (1, "gradient oracles", true, Box::new(gradient_oracles)),
        (2, "algebraic invariants", true, Box::new(algebraic_invariants)),
        (3, "ground-truth recovery", true, Box::new(ground_truth_recovery)),
        (4, "cora accuracy", false, Box::new(|| reproduction("cora", 0.80, 0.834, out))),
        (5, "citeseer accuracy", false, Box::new(|| reproduction("citeseer", 0.69, 0.724, out))),
        (6, "lambda0 ablation trend", false, Box::new(|| lambda0_trend(out))),
        (7, "label-rate robustness", false, Box::new(|| robustness(out))),
        (8, "determinism", true, Box::new(determinism)),
        (9, "pubmed accuracy (soft)", false, Box::new(|| reproduction("pubmed", 0.70, 0.767, out))),
    ];
    let mut gate_ok = true;
    for (id, name, hard, check) in criteria {
        let start = Instant::now();
        let v = check();
        if !v.pass && (hard || strict) {
            gate_ok = false;
        }
        println!(
            "{} criterion {id} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if gate_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
