//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use c3d_core::deconv::{deconv_feature_map, top_activations, write_image_sequence, DeconvRequest, ReluMode, Selection};
use c3d_core::descriptor::{
    descriptors_to_csv, encode_descriptors, extraction_clips, video_descriptors, video_predict, VideoDescriptor,
    EXTRACTION_OVERLAP,
};
use c3d_core::gradcheck::run_suite;
use c3d_core::network::{encode_weights, Network, NetworkSpec};
use c3d_core::probes::{
    cross_validate, make_folds, pair_feature, pca_svm_probe, roc_auc, roc_csv, roc_curve, svm_probe, CvReport, PcaDims,
    Protocol, SIMILARITY_LAYERS,
};
use c3d_core::trainer::{argmax, train_with_progress, TrainConfig, TrainReport};
use c3d_core::videodata::{center_crop, encode_dataset, generate, load_dataset, VideoRecord};
use c3d_core::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::context::{Ctx, DATA_DIR_ENV, DEFAULT_DATASET, WEIGHTS_FILE};
use crate::{Cli, Command, ModelArgs};

/// Largest relative error the gradient suite accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn dispatch(cli: Cli) -> Result<()> {
    let name = cli.command.name();
    let g = &cli.global;
    let some = |v: &Option<String>| v.clone();
    let num = |v: Option<usize>| v.map(|n| n.to_string());
    match &cli.command {
        Command::GenData { output, mode, classes, videos_per_class } => {
            let flags = [
                ("data.mode", some(mode)),
                ("data.classes", num(*classes)),
                ("data.videos_per_class", num(*videos_per_class)),
            ];
            gen_data(&mut Ctx::new(g, name, &flags)?, output.as_deref())
        }
        Command::Train { data } => train(&mut Ctx::new(g, name, &[])?, data.as_deref()),
        Command::ArchSearch { data, depths } => arch_search(&mut Ctx::new(g, name, &[])?, data.as_deref(), depths),
        Command::CountParams { preset, classes } => {
            count_params(&mut Ctx::new(g, name, &[("model.arch", some(preset))])?, *classes)
        }
        Command::Gradcheck => gradcheck(&mut Ctx::new(g, name, &[])?),
        Command::Extract { model, layer } => extract(&mut Ctx::new(g, name, &[("probe.layer", some(layer))])?, model),
        Command::Predict { model, clips } => predict(&mut Ctx::new(g, name, &[("predict.clips", num(*clips))])?, model),
        Command::ProbeSvm { model, layer } => probe_svm(&mut Ctx::new(g, name, &[("probe.layer", some(layer))])?, model),
        Command::ProbePca { model, layer, dims } => {
            let flags = [("probe.layer", some(layer)), ("probe.pca_dims", some(dims))];
            probe_pca(&mut Ctx::new(g, name, &flags)?, model)
        }
        Command::ProbeSim { model } => probe_sim(&mut Ctx::new(g, name, &[])?, model),
        Command::Visualize { model, layer, channel, top } => {
            let flags = [
                ("visualize.layer", some(layer)),
                ("visualize.channel", num(*channel)),
                ("visualize.top", num(*top)),
            ];
            visualize(&mut Ctx::new(g, name, &flags)?, model)
        }
        Command::Benchmark { model, data, reps } => {
            let mut ctx = Ctx::new(g, name, &[("benchmark.reps", num(*reps))])?;
            benchmark(&mut ctx, model.as_deref(), data.as_deref())
        }
    }
}

fn gen_data(ctx: &mut Ctx, output: Option<&Path>) -> Result<()> {
    let cfg = ctx.blobs_config()?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) => Path::new(&dir).join(DEFAULT_DATASET),
            None => ctx.path(DEFAULT_DATASET),
        },
    };
    let videos = generate(&cfg)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(&path, encode_dataset(&videos)?).with_context(|| format!("writing {}", path.display()))?;
    ctx.log(format!(
        "wrote {} videos ({} classes x {}) to {}",
        videos.len(),
        cfg.classes,
        cfg.videos_per_class,
        path.display()
    ));
    Ok(())
}

fn describe(spec: &NetworkSpec) -> String {
    let shape = spec.input.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
    format!("{} layers, input {shape}, {} classes", spec.layers.len(), spec.class_count)
}

fn train_net(ctx: &mut Ctx, net: &mut Network, data: &[VideoRecord], tc: &TrainConfig) -> Result<TrainReport> {
    let report = train_with_progress(net, data, tc, |e| {
        let acc = e.clip_accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into());
        ctx.progress(format!("epoch {} iter {} lr {} loss {:.6} clip_accuracy {acc}", e.epoch, e.iter, e.lr, e.loss));
    })?;
    Ok(report)
}

fn train(ctx: &mut Ctx, data: Option<&Path>) -> Result<()> {
    let (_, data) = ctx.load_data(data)?;
    ctx.resolve_model_io(&data)?;
    let tc = ctx.train_config()?;
    let mut net = ctx.build_model()?;
    ctx.log(format!("network: {}, {} parameters", describe(net.spec()), net.param_elements()));
    let report = train_net(ctx, &mut net, &data, &tc)?;
    ctx.write(WEIGHTS_FILE, &encode_weights(&net))?;
    ctx.write("train.csv", report.to_csv().as_bytes())?;
    match report.final_accuracy() {
        Some(a) => ctx.log(format!("held-out clip accuracy {a:.4}")),
        None => ctx.log("no held-out videos"),
    }
    ctx.log(format!("weights saved to {}", ctx.path(WEIGHTS_FILE).display()));
    Ok(())
}

fn arch_search(ctx: &mut Ctx, data: Option<&Path>, depths: &[usize]) -> Result<()> {
    if depths.is_empty() {
        bail!("no depths given");
    }
    let (_, data) = ctx.load_data(data)?;
    ctx.resolve_model_io(&data)?;
    let tc = ctx.train_config()?;
    let family = ctx.cfg.raw("model.arch") == "family";
    let mut csv = String::from("depth,params,clip_accuracy\n");
    for &d in depths {
        if family {
            ctx.cfg.set("model.depths", "")?;
            ctx.cfg.set("model.depth", &d.to_string())?;
        } else {
            ctx.cfg.set("model.arch", &format!("depth-{d}"))?;
        }
        let mut net = ctx.build_model()?;
        let params = net.param_elements();
        ctx.log(format!("depth {d}: {params} parameters"));
        let report = train_net(ctx, &mut net, &data, &tc)?;
        ctx.write(&format!("train_depth{d}.csv"), report.to_csv().as_bytes())?;
        let acc = report.final_accuracy().map(|a| a.to_string()).unwrap_or_default();
        ctx.log(format!("depth {d}: held-out clip accuracy {acc}"));
        let _ = writeln!(csv, "{d},{params},{acc}");
    }
    ctx.write("arch_search.csv", csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

fn count_params(ctx: &mut Ctx, classes: Option<usize>) -> Result<()> {
    let arch = ctx.cfg.raw("model.arch").to_string();
    let configured: usize = ctx.cfg.get("model.classes")?;
    let classes = classes.filter(|&c| c > 0).unwrap_or(match configured {
        0 if arch == "c3d" => 487,
        0 => 101,
        c => c,
    });
    ctx.cfg.set("model.classes", &classes.to_string())?;
    ctx.save_config()?;
    let spec = ctx.model_spec()?;
    let shapes = spec.infer_shapes()?;
    let counts = spec.count_params()?;
    let mut table = format!("{:<10} {:<20} {:>14}\n", "layer", "output", "params");
    let mut csv = String::from("layer,params\n");
    for (layer, shape) in spec.layers.iter().zip(&shapes) {
        let shape = shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        let params = layer.param_count();
        let _ = writeln!(table, "{:<10} {:<20} {:>14}", layer.name, shape, params);
        if layer.is_parametric() {
            let _ = writeln!(csv, "{},{params}", layer.name);
        }
    }
    let _ = writeln!(table, "total {} ({:.2}M)", counts.total, counts.total as f64 / 1e6);
    let _ = writeln!(csv, "total,{}", counts.total);
    ctx.write("params.csv", csv.as_bytes())?;
    print!("{table}");
    ctx.log(format!("{arch} with {classes} classes: {} parameters", counts.total));
    Ok(())
}

fn gradcheck(ctx: &mut Ctx) -> Result<()> {
    let checks = run_suite(ctx.seed()?)?;
    let mut csv = String::from("op,max_rel_error,checked,skipped\n");
    for c in &checks {
        ctx.log(format!(
            "{:<13} max relative error {:.3e} ({} checked, {} skipped)",
            c.op, c.max_rel_error, c.checked, c.skipped
        ));
        let _ = writeln!(csv, "{},{},{},{}", c.op, c.max_rel_error, c.checked, c.skipped);
    }
    ctx.write("gradcheck.csv", csv.as_bytes())?;
    let failed: Vec<&str> = checks.iter().filter(|c| c.max_rel_error >= GRADCHECK_TOLERANCE).map(|c| c.op).collect();
    if !failed.is_empty() {
        bail!("gradient check failed for {}", failed.join(", "));
    }
    ctx.log(format!("all {} checks below {GRADCHECK_TOLERANCE:e}", checks.len()));
    Ok(())
}

fn open_model(ctx: &mut Ctx, args: &ModelArgs) -> Result<(Network, Vec<VideoRecord>)> {
    let net = ctx.load_model(&args.model)?;
    let (_, data) = ctx.load_data(args.data.as_deref())?;
    Ok((net, data))
}

/// Descriptors of every video for each of `layers`, `[video][layer]`.
fn all_descriptors(net: &Network, data: &[VideoRecord], layers: &[&str]) -> Result<Vec<Vec<VideoDescriptor>>> {
    Ok(data
        .par_iter()
        .enumerate()
        .map(|(i, v)| video_descriptors(net, v, layers, i))
        .collect::<c3d_core::Result<Vec<_>>>()?)
}

fn extract(ctx: &mut Ctx, args: &ModelArgs) -> Result<()> {
    let (net, data) = open_model(ctx, args)?;
    let layer = ctx.cfg.raw("probe.layer").to_string();
    let descs: Vec<VideoDescriptor> = all_descriptors(&net, &data, &[&layer])?.into_iter().flatten().collect();
    ctx.write("descriptors.csv", descriptors_to_csv(&descs).as_bytes())?;
    ctx.write("descriptors.desc", &encode_descriptors(&descs)?)?;
    let mut labels = String::from("video_id,label\n");
    for (i, v) in data.iter().enumerate() {
        let _ = writeln!(labels, "{i},{}", v.label);
    }
    ctx.write("labels.csv", labels.as_bytes())?;
    let degenerate = descs.iter().filter(|d| d.degenerate).count();
    ctx.log(format!(
        "{} {layer} descriptors of dimension {} ({degenerate} degenerate)",
        descs.len(),
        descs.first().map_or(0, VideoDescriptor::dim)
    ));
    Ok(())
}

fn predict(ctx: &mut Ctx, args: &ModelArgs) -> Result<()> {
    let (net, data) = open_model(ctx, args)?;
    let clips: usize = ctx.cfg.get("predict.clips")?;
    let seed = ctx.seed()?;
    let probs = data
        .par_iter()
        .enumerate()
        .map(|(i, v)| video_predict(&net, v, clips, seed.wrapping_add(i as u64)))
        .collect::<c3d_core::Result<Vec<_>>>()?;
    let k = net.spec().class_count;
    let mut csv = String::from("video,label,predicted");
    for c in 0..k {
        let _ = write!(csv, ",p{c}");
    }
    csv.push('\n');
    let mut correct = 0;
    for (i, (v, p)) in data.iter().zip(&probs).enumerate() {
        let pred = argmax(p);
        correct += usize::from(pred == v.label);
        let _ = write!(csv, "{i},{},{pred}", v.label);
        for x in p {
            let _ = write!(csv, ",{x}");
        }
        csv.push('\n');
    }
    ctx.write("predictions.csv", csv.as_bytes())?;
    ctx.log(format!("video accuracy {:.4} over {} videos ({clips} clips each)", correct as f64 / data.len() as f64, data.len()));
    Ok(())
}

fn features_and_labels(ctx: &mut Ctx, args: &ModelArgs) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let (net, data) = open_model(ctx, args)?;
    let layer = ctx.cfg.raw("probe.layer").to_string();
    let features = all_descriptors(&net, &data, &[&layer])?.into_iter().map(|mut d| d.remove(0).values).collect();
    Ok((features, data.iter().map(|v| v.label).collect()))
}

fn folds_for(ctx: &Ctx, n: usize) -> Result<Vec<Vec<usize>>> {
    let k: usize = ctx.cfg.get("probe.folds")?;
    Ok(make_folds(n, Protocol::KFold { k, seed: ctx.seed()? })?)
}

fn predictions_column(report: &CvReport) -> Vec<String> {
    report.predictions.iter().map(|p| p.map(|p| p.label.to_string()).unwrap_or_default()).collect()
}

fn probe_svm(ctx: &mut Ctx, args: &ModelArgs) -> Result<()> {
    let (features, labels) = features_and_labels(ctx, args)?;
    let folds = folds_for(ctx, features.len())?;
    let (lambda, epochs, seed) = (ctx.cfg.get("probe.lambda")?, ctx.cfg.get("probe.epochs")?, ctx.seed()?);
    let report = cross_validate(&features, &labels, &folds, svm_probe(lambda, epochs, seed, false))?;
    ctx.write("svm_folds.csv", report.to_csv().as_bytes())?;
    let mut csv = String::from("video,label,predicted\n");
    for (i, p) in predictions_column(&report).iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{p}", labels[i]);
    }
    ctx.write("svm_predictions.csv", csv.as_bytes())?;
    ctx.log(format!("{}-fold SVM accuracy {:.4}", folds.len(), report.mean_accuracy));
    Ok(())
}

fn probe_pca(ctx: &mut Ctx, args: &ModelArgs) -> Result<()> {
    let settings: Vec<(String, Option<PcaDims>)> = ctx
        .cfg
        .raw("probe.pca_dims")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "full" => Ok((s.to_string(), Some(PcaDims::Full))),
            _ => Ok((s.to_string(), Some(PcaDims::Fixed(s.parse().with_context(|| format!("probe.pca_dims entry `{s}`"))?)))),
        })
        .chain(std::iter::once(Ok(("none".to_string(), None))))
        .collect::<Result<_>>()?;
    let (features, labels) = features_and_labels(ctx, args)?;
    let folds = folds_for(ctx, features.len())?;
    let (lambda, epochs, seed) = (ctx.cfg.get("probe.lambda")?, ctx.cfg.get("probe.epochs")?, ctx.seed()?);
    let mut csv = String::from("dims,accuracy\n");
    let mut columns = Vec::new();
    for (name, dims) in &settings {
        let report = match dims {
            Some(d) => cross_validate(&features, &labels, &folds, pca_svm_probe(*d, lambda, epochs, seed))?,
            None => cross_validate(&features, &labels, &folds, svm_probe(lambda, epochs, seed, false))?,
        };
        let _ = writeln!(csv, "{name},{}", report.mean_accuracy);
        ctx.log(format!("dims {name}: accuracy {:.4}", report.mean_accuracy));
        columns.push(predictions_column(&report));
    }
    ctx.write("pca.csv", csv.as_bytes())?;
    let mut pred = String::from("video,label");
    for (name, _) in &settings {
        let _ = write!(pred, ",{name}");
    }
    pred.push('\n');
    for (i, l) in labels.iter().enumerate() {
        let _ = write!(pred, "{i},{l}");
        for col in &columns {
            let _ = write!(pred, ",{}", col[i]);
        }
        pred.push('\n');
    }
    ctx.write("pca_predictions.csv", pred.as_bytes())?;
    Ok(())
}

/// Same/different pairs whose classes are disjoint across folds.
pub struct PairSet {
    /// `(video a, video b, fold)`.
    pub pairs: Vec<(usize, usize, usize)>,
    /// 1 for same class, 0 for different.
    pub labels: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
}

/// Assigns classes to `k` folds at random and, within each fold, draws up to
/// `per_fold / 2` same-class and as many different-class pairs.
pub fn class_disjoint_pairs(labels: &[usize], k: usize, per_fold: usize, seed: u64) -> Result<PairSet> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if k < 2 || classes.len() < 2 * k {
        bail!("{} classes cannot fill {k} folds with at least two classes each", classes.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    classes.shuffle(&mut rng);
    let fold_of = |label: usize| classes.iter().position(|&c| c == label).expect("known class") % k;
    let mut set = PairSet { pairs: Vec::new(), labels: Vec::new(), folds: vec![Vec::new(); k] };
    for f in 0..k {
        let videos: Vec<usize> = (0..labels.len()).filter(|&i| fold_of(labels[i]) == f).collect();
        let (mut same, mut diff) = (Vec::new(), Vec::new());
        for (x, &a) in videos.iter().enumerate() {
            for &b in &videos[x + 1..] {
                if labels[a] == labels[b] {
                    same.push((a, b));
                } else {
                    diff.push((a, b));
                }
            }
        }
        let mut frng = ChaCha8Rng::seed_from_u64(seed);
        frng.set_stream(f as u64 + 1);
        same.shuffle(&mut frng);
        diff.shuffle(&mut frng);
        let half = (per_fold / 2).min(same.len()).min(diff.len());
        if half == 0 {
            bail!("fold {f} has no same-class or no different-class pair");
        }
        for (list, label) in [(&same, 1), (&diff, 0)] {
            for &(a, b) in &list[..half] {
                set.folds[f].push(set.pairs.len());
                set.pairs.push((a, b, f));
                set.labels.push(label);
            }
        }
    }
    Ok(set)
}

fn probe_sim(ctx: &mut Ctx, args: &ModelArgs) -> Result<()> {
    let (net, data) = open_model(ctx, args)?;
    let labels: Vec<usize> = data.iter().map(|v| v.label).collect();
    let k: usize = ctx.cfg.get("probe.folds")?;
    let set = class_disjoint_pairs(&labels, k, ctx.cfg.get("probe.pairs_per_fold")?, ctx.seed()?)?;
    let descs = all_descriptors(&net, &data, &SIMILARITY_LAYERS)?;
    let features = set
        .pairs
        .iter()
        .map(|&(a, b, _)| pair_feature(&descs[a], &descs[b]))
        .collect::<c3d_core::Result<Vec<_>>>()?;
    let (lambda, epochs, seed) = (ctx.cfg.get("probe.lambda")?, ctx.cfg.get("probe.epochs")?, ctx.seed()?);
    let report = cross_validate(&features, &set.labels, &set.folds, svm_probe(lambda, epochs, seed, true))?;
    ctx.write("sim_folds.csv", report.to_csv().as_bytes())?;
    let mut csv = String::from("fold,a,b,label,score\n");
    let mut scores = Vec::with_capacity(set.pairs.len());
    for ((&(a, b, f), &l), p) in set.pairs.iter().zip(&set.labels).zip(&report.predictions) {
        let s = p.expect("every pair is in a fold").score;
        scores.push(s);
        let _ = writeln!(csv, "{f},{a},{b},{l},{s}");
    }
    ctx.write("sim_pairs.csv", csv.as_bytes())?;
    let positive: Vec<bool> = set.labels.iter().map(|&l| l == 1).collect();
    ctx.write("roc.csv", roc_csv(&roc_curve(&scores, &positive)?).as_bytes())?;
    ctx.log(format!(
        "{} pairs over {k} class-disjoint folds: accuracy {:.4}, mean fold AUC {:.4}, pooled AUC {:.4}",
        set.pairs.len(),
        report.mean_accuracy,
        report.mean_auc.unwrap_or(f64::NAN),
        roc_auc(&scores, &positive)?
    ));
    Ok(())
}

fn visualize(ctx: &mut Ctx, args: &ModelArgs) -> Result<()> {
    let (net, data) = open_model(ctx, args)?;
    let layer = ctx.cfg.raw("visualize.layer").to_string();
    let channel: usize = ctx.cfg.get("visualize.channel")?;
    let top: usize = ctx.cfg.get("visualize.top")?;
    let relu = match ctx.cfg.raw("visualize.relu") {
        "deconvnet" => ReluMode::Deconvnet,
        "forward-mask" => ReluMode::ForwardMask,
        other => bail!("visualize.relu must be deconvnet or forward-mask, got `{other}`"),
    };
    let [_, _, h, w] = net.spec().input;
    let mut clips: Vec<Tensor> = Vec::new();
    let mut origin = Vec::new();
    for (vi, v) in data.iter().enumerate() {
        for (ci, clip) in extraction_clips(v)?.into_iter().enumerate() {
            clips.push(center_crop(&clip, h, w)?);
            origin.push((vi, ci * EXTRACTION_OVERLAP));
        }
    }
    let acts = top_activations(&net, &clips, &layer, channel, top)?;
    let mut csv = String::from("rank,video,clip_start,t,y,x,value\n");
    for (rank, a) in acts.iter().enumerate() {
        let (t, y, x) = a.position;
        let request = DeconvRequest { layer: layer.clone(), channel, selection: Selection::Position { t, y, x }, relu };
        let projection = deconv_feature_map(&net, &clips[a.clip], &request)?;
        let dir: PathBuf = ctx.path(&format!("rank_{rank:02}"));
        write_image_sequence(&projection, &dir.join("deconv"))?;
        write_image_sequence(&clips[a.clip], &dir.join("input"))?;
        let (video, start) = origin[a.clip];
        let _ = writeln!(csv, "{rank},{video},{start},{t},{y},{x},{}", a.value);
    }
    ctx.write("top.csv", csv.as_bytes())?;
    ctx.log(format!("projected {} activations of {layer} channel {channel}", acts.len()));
    Ok(())
}

/// One timed extraction pass.
#[derive(Clone, Copy, Debug)]
pub struct BenchRep {
    pub videos: usize,
    pub clips: usize,
    pub seconds: f64,
}

/// Loads the dataset, extracts fc6 descriptors of every video and writes them.
fn bench_pass(net: &Network, data_path: &Path, sink: &Path) -> Result<BenchRep> {
    let start = Instant::now();
    let data = load_dataset(data_path)?;
    let descs: Vec<VideoDescriptor> = all_descriptors(net, &data, &["fc6"])?.into_iter().flatten().collect();
    std::fs::write(sink, encode_descriptors(&descs)?)?;
    let clips = data.iter().map(|v| extraction_clips(v).map(|c| c.len())).sum::<c3d_core::Result<usize>>()?;
    Ok(BenchRep { videos: data.len(), clips, seconds: start.elapsed().as_secs_f64() })
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn benchmark(ctx: &mut Ctx, model: Option<&Path>, data: Option<&Path>) -> Result<()> {
    let reps: usize = ctx.cfg.get("benchmark.reps")?;
    if reps == 0 {
        bail!("benchmark.reps must be positive");
    }
    let data_path = ctx.data_path(data)?;
    let net = match model {
        Some(dir) => ctx.load_model(dir)?,
        None => {
            let (_, videos) = ctx.load_data(Some(&data_path))?;
            ctx.resolve_model_io(&videos)?;
            ctx.build_model()?
        }
    };
    let sink = ctx.path("benchmark_descriptors.desc");
    let mut csv = String::from("rep,videos,clips,seconds,clips_per_sec,fps\n");
    let mut runs = Vec::with_capacity(reps);
    for rep in 0..reps {
        let r = bench_pass(&net, &data_path, &sink)?;
        if r.videos == 0 {
            bail!("dataset {} is empty", data_path.display());
        }
        let cps = r.clips as f64 / r.seconds;
        let _ = writeln!(csv, "{rep},{},{},{},{},{}", r.videos, r.clips, r.seconds, cps, 16.0 * cps);
        ctx.progress(format!("rep {rep}: {} clips in {:.3}s", r.clips, r.seconds));
        runs.push(r);
    }
    let seconds = median(runs.iter().map(|r| r.seconds).collect());
    let clips = runs[0].clips;
    let clips_per_sec = clips as f64 / seconds;
    let fps = 16.0 * clips_per_sec;
    ctx.write("benchmark.csv", csv.as_bytes())?;
    let summary = format!(
        "videos = {}\nclips = {clips}\nreps = {reps}\nmedian_seconds = {seconds}\nclips_per_sec = {clips_per_sec}\nfps = {fps}\n",
        runs[0].videos
    );
    ctx.write("benchmark.txt", summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}
