//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use c3d_core::deconv::{deconv_feature_map, deconv_project, DeconvRequest, ReluMode, Selection};
use c3d_core::descriptor::{aggregate, clip_features, extraction_clips, video_descriptor};
use c3d_core::gradcheck::run_suite;
use c3d_core::network::{c3d_layout, load_weights, preset_spec, FamilyConfig, Network};
use c3d_core::probes::{pair_feature, similarity_descriptors, svm_predict, svm_train, znorm_apply, znorm_fit};
use c3d_core::videodata::{center_crop, load_dataset, VideoRecord};
use c3d_core::{InitScheme, Tensor};

const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(120);
const PARAM_TOL: f64 = 0.01;
const SEEDS: [u64; 3] = [0, 1, 2];
const MOTION_GAP: f64 = 0.10;
const APPEARANCE_GAP: f64 = 0.05;
const NORM_TOL: f64 = 1e-6;
const PCA_SLACK: f64 = 0.02;
const MIN_AUC: f64 = 0.9;
const LINEARITY_TOL: f64 = 1e-10;
const MIN_BENCH_VIDEOS: usize = 100;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_c3d")
}

fn c3d(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("c3d {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn num(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("`{s}` is not a number"))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn criterion_1() -> Result<Outcome, String> {
    let start = Instant::now();
    let checks = run_suite(0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let worst = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let coverage = checks.iter().all(|c| c.checked * 5 >= (c.checked + c.skipped) * 4);
    let ops: Vec<&str> = checks.iter().map(|c| c.op).collect();
    outcome(
        worst < GRAD_TOL && elapsed < GRAD_BUDGET && coverage && ops.len() == 6,
        format!("{} ops, max relative error {worst:.2e}, {:.1}s", ops.join("/"), elapsed.as_secs_f64()),
    )
}

fn total_params(preset: &str, classes: usize, out: &Path) -> Result<usize, String> {
    let stdout = c3d(&["count-params", "--preset", preset, "--classes", &classes.to_string(), "--out", p(out)])?;
    let line = stdout.lines().find(|l| l.starts_with("total ")).ok_or("no total line")?;
    line.split_whitespace().nth(1).and_then(|n| n.parse().ok()).ok_or_else(|| format!("bad total line `{line}`"))
}

/// Closed-form count for the eight-conv layout at 3x16x112x112.
fn c3d_closed_form(classes: usize) -> usize {
    let widths = [3, 64, 128, 256, 256, 512, 512, 512, 512];
    let conv: usize = widths.windows(2).map(|w| 27 * w[0] * w[1] + w[1]).sum();
    // pool5 leaves 512 x 1 x 4 x 4 (ceiling mode on 2 x 7 x 7).
    let flat = 512 * 4 * 4;
    conv + (flat * 4096 + 4096) + (4096 * 4096 + 4096) + (4096 * classes + classes)
}

fn criterion_2(work: &Path) -> Result<Outcome, String> {
    let mut parts = Vec::new();
    let mut pass = true;
    for (preset, reference) in [("net-64", 11.1e6), ("net-128", 17.5e6), ("net-256", 34.8e6)] {
        let n = total_params(preset, 101, &work.join(preset))?;
        let rel = (n as f64 - reference).abs() / reference;
        pass &= rel < PARAM_TOL;
        parts.push(format!("{preset} {n} ({:+.2}%)", 100.0 * (n as f64 - reference) / reference));
    }
    let n = total_params("c3d", 487, &work.join("c3d"))?;
    let expected = c3d_closed_form(487);
    let rel = (n as f64 - expected as f64).abs() / expected as f64;
    pass &= rel < PARAM_TOL;
    parts.push(format!("c3d {n} vs closed form {expected}"));
    outcome(pass, parts.join(", "))
}

fn criterion_3() -> Result<Outcome, String> {
    let names = ["depth-1", "depth-3", "depth-5", "depth-7", "increase", "decrease", "net-64", "net-128", "net-256", "c3d"];
    let classes = 7;
    let mut fails = Vec::new();
    for name in names {
        let spec = preset_spec(name, classes).map_err(|e| e.to_string())?;
        let net = Network::build(spec, 0).map_err(|e| e.to_string())?;
        let [c, l, h, w] = net.spec().input;
        let x = Tensor::random_init(&[1, c, l, h, w], InitScheme::Uniform(1.0), 1).map_err(|e| e.to_string())?;
        let trace = net.forward(&x, false).map_err(|e| e.to_string())?;
        let out_of = |layer: &str| -> Result<Vec<usize>, String> {
            let i = net.spec().layer_index(layer).map_err(|e| e.to_string())?;
            Ok(trace.output(i).dims()[1..].to_vec())
        };
        if trace.logits().dims() != [1, classes] {
            fails.push(format!("{name} logits {:?}", trace.logits().dims()));
        }
        if name.starts_with("depth-") || name == "increase" || name == "decrease" || name == "net-128" {
            let pool5 = out_of("pool5")?;
            if pool5 != [256, 1, 4, 4] {
                fails.push(format!("{name} pool5 {pool5:?}"));
            }
        }
        if name == "c3d" && out_of("fc6")? != [4096] {
            fails.push("c3d fc6 width".into());
        }
    }
    outcome(fails.is_empty(), if fails.is_empty() { format!("{} presets forward-propagated", names.len()) } else { fails.join("; ") })
}

const APPEARANCE_DATA: [&str; 10] = [
    "--set", "data.radius_min=3", "--set", "data.radius_max=4.5", "--set", "data.blobs_max=1", "--set", "data.speed_min=0",
    "--set", "data.speed_max=0.3",
];

fn dataset(work: &Path, mode: &str, seed: u64) -> Result<PathBuf, String> {
    let path = work.join(format!("{mode}_{seed}.vset"));
    let seed = seed.to_string();
    let mut args = vec!["gen-data", "--mode", mode, "--seed", &seed, "--output", p(&path)];
    let run = work.join(format!("gen_{mode}_{seed}"));
    args.extend(["--out", p(&run)]);
    if mode == "appearance" {
        args.extend(APPEARANCE_DATA);
    }
    c3d(&args)?;
    Ok(path)
}

/// Mean held-out clip accuracy of depth 1 and depth 3 over [`SEEDS`].
fn depth_means(work: &Path, mode: &str) -> Result<(f64, f64, Vec<String>), String> {
    let (mut d1, mut d3) = (0.0, 0.0);
    let mut per_seed = Vec::new();
    for seed in SEEDS {
        let data = dataset(work, mode, seed)?;
        let run = work.join(format!("arch_{mode}_{seed}"));
        c3d(&["arch-search", "--data", p(&data), "--depths", "1,3", "--seed", &seed.to_string(), "--out", p(&run)])?;
        let rows = csv_rows(&run.join("arch_search.csv"))?;
        let acc = |depth: &str| -> Result<f64, String> {
            let row = rows.iter().find(|r| r[0] == depth).ok_or("missing depth row")?;
            num(&row[2])
        };
        let (a1, a3) = (acc("1")?, acc("3")?);
        per_seed.push(format!("{a1:.3}/{a3:.3}"));
        d1 += a1 / SEEDS.len() as f64;
        d3 += a3 / SEEDS.len() as f64;
    }
    Ok((d1, d3, per_seed))
}

fn criterion_4(work: &Path) -> Result<Outcome, String> {
    let (m1, m3, ms) = depth_means(work, "motion")?;
    let (a1, a3, as_) = depth_means(work, "appearance")?;
    let motion_ok = m3 - m1 >= MOTION_GAP;
    let appearance_ok = (a1 - a3).abs() <= APPEARANCE_GAP;
    outcome(
        motion_ok && appearance_ok,
        format!(
            "motion depth-1 {m1:.3} vs depth-3 {m3:.3} (seeds {}); appearance depth-1 {a1:.3} vs depth-3 {a3:.3} (seeds {})",
            ms.join(" "),
            as_.join(" ")
        ),
    )
}

/// The depth-3 motion model shared by the later criteria.
struct Trained {
    run: PathBuf,
    data: PathBuf,
    net: Network,
    videos: Vec<VideoRecord>,
}

fn train_reference(work: &Path) -> Result<Trained, String> {
    let data = work.join("motion_0.vset");
    let run = work.join("train_ref");
    c3d(&["train", "--data", p(&data), "--seed", "0", "--out", p(&run)])?;
    let spec = FamilyConfig::desk([3; 5], 1, 16).build(8).map_err(|e| e.to_string())?.with_he_init();
    let net = load_weights(spec, &run.join("weights.c3dw")).map_err(|e| e.to_string())?;
    let videos = load_dataset(&data).map_err(|e| e.to_string())?;
    Ok(Trained { run, data, net, videos })
}

fn criterion_5(t: &Trained) -> Result<Outcome, String> {
    let e = |e: c3d_core::Error| e.to_string();
    let mut worst_norm: f64 = 0.0;
    for (i, v) in t.videos.iter().enumerate().step_by(10) {
        let d = video_descriptor(&t.net, v, "fc6", i).map_err(e)?;
        worst_norm = worst_norm.max((d.norm() - 1.0).abs());
    }
    // 32-frame video with period 8: its three extraction clips are identical.
    let base = &t.videos[3];
    let [c, _, h, w] = base.dims();
    let mut frames = Vec::with_capacity(c * 32 * h * w);
    for ch in 0..c {
        for f in 0..32 {
            let start = (ch * 16 + f % 8) * h * w;
            frames.extend_from_slice(&base.frames.data()[start..start + h * w]);
        }
    }
    let periodic = VideoRecord::new(0, Tensor::from_vec(&[c, 32, h, w], frames).map_err(e)?).map_err(e)?;
    let clips = extraction_clips(&periodic).map_err(e)?;
    let single = clip_features(&t.net, &clips[..1], &["fc6"]).map_err(e)?.remove(0);
    let (single_desc, _) = aggregate(&single).map_err(e)?;
    let desc = video_descriptor(&t.net, &periodic, "fc6", 0).map_err(e)?;
    let repeat_err = desc.values.iter().zip(&single_desc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    // Reversed evaluation order: per-clip features are bit-identical, and the
    // mean in clip order is unchanged.
    let long = VideoRecord::new(1, Tensor::random_init(&[1, 40, 16, 16], InitScheme::Uniform(1.0), 9).map_err(e)?).map_err(e)?;
    let clips = extraction_clips(&long).map_err(e)?;
    let forward = clip_features(&t.net, &clips, &["fc6"]).map_err(e)?.remove(0);
    let reversed_clips: Vec<Tensor> = clips.iter().rev().cloned().collect();
    let mut reversed = clip_features(&t.net, &reversed_clips, &["fc6"]).map_err(e)?.remove(0);
    reversed.reverse();
    let order_ok = forward == reversed && aggregate(&forward).map_err(e)?.0 == video_descriptor(&t.net, &long, "fc6", 1).map_err(e)?.values;
    outcome(
        worst_norm <= NORM_TOL && repeat_err <= 1e-12 && order_ok,
        format!("max |norm - 1| {worst_norm:.1e}, repeated-clip deviation {repeat_err:.1e}, clip order invariant {order_ok}"),
    )
}

fn criterion_6(t: &Trained, work: &Path) -> Result<Outcome, String> {
    let run = work.join("pca");
    c3d(&["probe-pca", "--model", p(&t.run), "--data", p(&t.data), "--seed", "0", "--out", p(&run)])?;
    let rows = csv_rows(&run.join("pca.csv"))?;
    let acc: BTreeMap<String, f64> = rows.iter().map(|r| Ok((r[0].clone(), num(&r[1])?))).collect::<Result<_, String>>()?;
    let seq = ["2", "10", "50", "full"].map(|k| acc.get(k).copied().unwrap_or(f64::NAN));
    let monotone = seq.windows(2).all(|w| w[1] >= w[0] - PCA_SLACK);
    let preds = csv_rows(&run.join("pca_predictions.csv"))?;
    // Columns: video, label, 2, 10, 50, full, none.
    let same_labels = preds.iter().all(|r| r[5] == r[6]);
    let equal_acc = acc.get("full") == acc.get("none");
    outcome(
        monotone && same_labels && equal_acc,
        format!(
            "accuracy k=2 {:.3}, k=10 {:.3}, k=50 {:.3}, full {:.3}, unprojected {:.3}; full-rank labels identical {same_labels}",
            seq[0], seq[1], seq[2], seq[3], acc.get("none").copied().unwrap_or(f64::NAN)
        ),
    )
}

/// Pairwise count over every (positive, negative) pair, ties one half.
fn brute_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut total) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if positive[i] && !positive[j] {
                total += 1.0;
                wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
            }
        }
    }
    wins / total
}

fn criterion_7(t: &Trained, work: &Path) -> Result<Outcome, String> {
    // Twenty directions offset from the eight training directions.
    let data = work.join("similarity.vset");
    c3d(&[
        "gen-data", "--classes", "20", "--videos-per-class", "10", "--set", "data.angle_offset=0.1", "--seed", "11",
        "--output", p(&data), "--out", p(&work.join("gen_sim")),
    ])?;
    let run = work.join("sim");
    c3d(&["probe-sim", "--model", p(&t.run), "--data", p(&data), "--seed", "0", "--out", p(&run)])?;
    let folds = csv_rows(&run.join("sim_folds.csv"))?;
    let pairs = csv_rows(&run.join("sim_pairs.csv"))?;
    let mut exact = true;
    let mut fold_aucs = Vec::new();
    for row in folds.iter().filter(|r| r[0] != "mean") {
        let in_fold: Vec<&Vec<String>> = pairs.iter().filter(|r| r[0] == row[0]).collect();
        let scores: Vec<f64> = in_fold.iter().map(|r| num(&r[4])).collect::<Result<_, _>>()?;
        let positive: Vec<bool> = in_fold.iter().map(|r| r[3] == "1").collect();
        let reported = num(&row[3])?;
        exact &= brute_auc(&scores, &positive) == reported;
        fold_aucs.push(reported);
    }
    let mean_auc = fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64;

    // Pair order: features are bitwise symmetric, so any trained scorer agrees.
    let videos = load_dataset(&data).map_err(|e| e.to_string())?;
    let descs: Vec<_> = videos
        .iter()
        .enumerate()
        .take(40)
        .map(|(i, v)| similarity_descriptors(&t.net, v, i))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    let mut swapped = Vec::new();
    for a in 0..20 {
        // Even a pairs within a class, odd a across classes.
        let b = if a % 2 == 0 { a + 1 } else { a + 20 };
        feats.push(pair_feature(&descs[a], &descs[b]).map_err(|e| e.to_string())?);
        swapped.push(pair_feature(&descs[b], &descs[a]).map_err(|e| e.to_string())?);
        labels.push(usize::from(videos[a].label == videos[b].label));
    }
    let z = znorm_fit(&feats).map_err(|e| e.to_string())?;
    let zf: Vec<Vec<f64>> = feats.iter().map(|f| znorm_apply(&z, f)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let model = svm_train(&zf, &labels, 1e-4, 20, 0).map_err(|e| e.to_string())?;
    let mut swap_ok = feats == swapped;
    for (f, s) in feats.iter().zip(&swapped) {
        let a = svm_predict(&model, &znorm_apply(&z, f).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.1;
        let b = svm_predict(&model, &znorm_apply(&z, s).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.1;
        swap_ok &= a == b;
    }
    outcome(
        mean_auc > MIN_AUC && exact && swap_ok && fold_aucs.len() == 10,
        format!("mean fold AUC {mean_auc:.4} over {} class-disjoint folds, brute-force match {exact}, swap invariant {swap_ok}", fold_aucs.len()),
    )
}

fn snapshot(paths: &[PathBuf]) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for path in paths {
        if path.is_dir() {
            for entry in fs::read_dir(path).map_err(|e| e.to_string())? {
                let entry = entry.map_err(|e| e.to_string())?;
                files.insert(entry.path().display().to_string(), fs::read(entry.path()).map_err(|e| e.to_string())?);
            }
        } else {
            files.insert(path.display().to_string(), fs::read(path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn criterion_8(work: &Path) -> Result<Outcome, String> {
    let dir = work.join("determinism");
    let data = dir.join("small.vset");
    let sim = dir.join("sim.vset");
    let runs = ["gen", "gen_sim", "train", "svm", "pca", "sim"].map(|r| dir.join(r));
    let model = p(&runs[2]).to_string();
    let common = ["--threads", "1", "--seed", "5"];
    let commands: Vec<Vec<String>> = vec![
        vec!["gen-data", "--videos-per-class", "10", "--output", p(&data), "--out", p(&runs[0])],
        vec!["gen-data", "--classes", "20", "--videos-per-class", "4", "--output", p(&sim), "--out", p(&runs[1])],
        vec!["train", "--data", p(&data), "--set", "train.epochs=3", "--out", p(&runs[2])],
        vec!["probe-svm", "--model", &model, "--data", p(&data), "--out", p(&runs[3])],
        vec!["probe-pca", "--model", &model, "--data", p(&data), "--set", "probe.pca_dims=2,10,full", "--out", p(&runs[4])],
        vec!["probe-sim", "--model", &model, "--data", p(&sim), "--out", p(&runs[5])],
    ]
    .into_iter()
    .map(|c| c.into_iter().chain(common).map(str::to_string).collect())
    .collect();
    let mut watched: Vec<PathBuf> = runs.to_vec();
    watched.extend([data.clone(), sim.clone()]);
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        for cmd in &commands {
            c3d(&cmd.iter().map(String::as_str).collect::<Vec<_>>())?;
        }
        snapshots.push(snapshot(&watched)?);
    }
    let differing: Vec<&String> = snapshots[0].iter().filter(|(k, v)| snapshots[1].get(*k) != Some(v)).map(|(k, _)| k).collect();
    outcome(
        differing.is_empty() && snapshots[0].len() == snapshots[1].len(),
        if differing.is_empty() {
            format!("{} output files byte-identical across two runs", snapshots[0].len())
        } else {
            format!("differing: {differing:?}")
        },
    )
}

fn criterion_9(t: &Trained, work: &Path) -> Result<Outcome, String> {
    let e = |e: c3d_core::Error| e.to_string();
    // Eight-conv layout at full 112x112 geometry, narrow widths.
    let spec = c3d_layout([3, 16, 112, 112], [4, 8, 8, 8, 8, 8, 8, 8], 32, 10).map_err(e)?;
    let net = Network::build(spec, 2).map_err(e)?;
    let clip = Tensor::random_init(&[3, 16, 112, 112], InitScheme::Uniform(1.0), 3).map_err(e)?;
    let mut shapes_ok = true;
    let mut zero_ok = true;
    let mut worst_lin: f64 = 0.0;
    for layer in ["conv2a", "conv3b", "conv5b"] {
        let y = deconv_feature_map(&net, &clip, &DeconvRequest::top1(layer, 1)).map_err(e)?;
        shapes_ok &= y.dims() == clip.dims();
        let f = net.spec().feature_layer(layer).map_err(e)?;
        let dims = net.layer_shape(f).to_vec();
        let zero = Tensor::zeros(&dims).map_err(e)?;
        for mode in [ReluMode::Deconvnet, ReluMode::ForwardMask] {
            zero_ok &= deconv_project(&net, &clip, layer, &zero, mode).map_err(e)?.data().iter().all(|&v| v == 0.0);
            let mut signal = zero.clone();
            signal.data_mut()[dims[1..].iter().product::<usize>() + 1] = 0.7;
            let base = deconv_project(&net, &clip, layer, &signal, mode).map_err(e)?;
            let scale = base.data().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for alpha in [0.25, 4.0, 1000.0] {
                let scaled = deconv_project(&net, &clip, layer, &signal.scale(alpha), mode).map_err(e)?;
                worst_lin = worst_lin.max(scaled.max_abs_diff(&base.scale(alpha)) / (alpha * scale));
            }
        }
    }
    // A zero-valued selected activation projects to an all-zero clip.
    let dead = Tensor::zeros(&[3, 16, 112, 112]).map_err(e)?;
    let req = DeconvRequest { selection: Selection::Position { t: 0, y: 0, x: 0 }, ..DeconvRequest::top1("conv3b", 0) };
    zero_ok &= deconv_feature_map(&net, &dead, &req).map_err(e)?.data().iter().all(|&v| v == 0.0);

    // The command-line path on the trained model.
    let run = work.join("visualize");
    c3d(&["visualize", "--model", p(&t.run), "--data", p(&t.data), "--top", "2", "--out", p(&run)])?;
    let frames = fs::read_dir(run.join("rank_00").join("deconv")).map_err(|e| e.to_string())?.count();
    let crop = center_crop(&t.videos[0].frames, 16, 16).map_err(e)?;
    outcome(
        shapes_ok && zero_ok && worst_lin <= LINEARITY_TOL && frames == 16 && crop.dims()[1] == 16,
        format!("shapes conv2a/conv3b/conv5b {shapes_ok}, zero in zero out {zero_ok}, linearity error {worst_lin:.1e}, {frames} frames written"),
    )
}

fn criterion_10(t: &Trained, work: &Path) -> Result<Outcome, String> {
    let mut reports = Vec::new();
    for rep in 0..2 {
        let run = work.join(format!("bench{rep}"));
        c3d(&["benchmark", "--model", p(&t.run), "--data", p(&t.data), "--reps", "3", "--out", p(&run)])?;
        let text = fs::read_to_string(run.join("benchmark.txt")).map_err(|e| e.to_string())?;
        let kv: BTreeMap<String, String> = text
            .lines()
            .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())))
            .collect();
        let rows = csv_rows(&run.join("benchmark.csv"))?;
        reports.push((kv, rows));
    }
    let mut ok = true;
    for (kv, rows) in &reports {
        let get = |k: &str| kv.get(k).ok_or(format!("missing `{k}`")).and_then(|v| num(v));
        let (videos, clips, secs, cps, fps) = (get("videos")?, get("clips")?, get("median_seconds")?, get("clips_per_sec")?, get("fps")?);
        ok &= videos >= MIN_BENCH_VIDEOS as f64 && clips >= videos;
        ok &= ((fps - 16.0 * cps) / fps).abs() < 1e-12 && ((cps - clips / secs) / cps).abs() < 1e-12;
        ok &= rows.len() == 3;
        for r in rows {
            let (cps, fps) = (num(&r[4])?, num(&r[5])?);
            ok &= ((fps - 16.0 * cps) / fps).abs() < 1e-12;
        }
    }
    ok &= reports[0].0.get("clips") == reports[1].0.get("clips");
    let kv = &reports[0].0;
    outcome(
        ok,
        format!(
            "{} videos, {} clips, median {} s, {} fps",
            kv.get("videos").map_or("?", String::as_str),
            kv.get("clips").map_or("?", String::as_str),
            kv.get("median_seconds").map_or("?", String::as_str),
            kv.get("fps").map_or("?", String::as_str)
        ),
    )
}

fn report(n: usize, name: &str, result: Result<Outcome, String>, failures: &mut usize) {
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if !pass {
        *failures += 1;
    }
    println!("criterion {n:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn main() {
    // The harness passes filter arguments; `--list` must not run anything.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let tmp = tempfile::tempdir().expect("temporary directory");
    let work = tmp.path();
    let mut failures = 0;
    report(1, "gradient suite", criterion_1(), &mut failures);
    report(2, "parameter counts", criterion_2(work), &mut failures);
    report(3, "preset shapes", criterion_3(), &mut failures);
    report(4, "temporal depth at desk scale", criterion_4(work), &mut failures);
    let trained = train_reference(work);
    let with = |f: &dyn Fn(&Trained) -> Result<Outcome, String>| match &trained {
        Ok(t) => f(t),
        Err(e) => Err(format!("reference training failed: {e}")),
    };
    report(5, "descriptor contract", with(&|t| criterion_5(t)), &mut failures);
    report(6, "PCA compactness", with(&|t| criterion_6(t, work)), &mut failures);
    report(7, "similarity pipeline", with(&|t| criterion_7(t, work)), &mut failures);
    report(8, "determinism", criterion_8(work), &mut failures);
    report(9, "deconvolution", with(&|t| criterion_9(t, work)), &mut failures);
    report(10, "benchmark", with(&|t| criterion_10(t, work)), &mut failures);
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
