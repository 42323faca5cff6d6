//! Mini-batch SGD with momentum, step learning-rate schedules and clip
//! jittering.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{Gradients, Network};
use crate::tensor::Tensor;
use crate::videodata::{center_crop, crop, flip_horizontal, split_into_clips, VideoRecord, CLIP_LEN};

/// Piecewise-constant learning rate: divide by `divisor` every `every`
/// epochs (or iterations) and stop at `stop`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    StepEpochs { divisor: f64, every: usize, stop: usize },
    StepIters { divisor: f64, every: usize, stop: usize },
}

impl Schedule {
    fn parts(&self) -> (f64, usize, usize) {
        match *self {
            Schedule::StepEpochs { divisor, every, stop } | Schedule::StepIters { divisor, every, stop } => {
                (divisor, every, stop)
            }
        }
    }
}

/// How training clips are drawn from videos.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClipSampling {
    /// One fresh random 16-frame window per video per epoch.
    RandomWindow,
    /// Every non-overlapped 16-frame clip is a training unit.
    NonOverlapped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    pub schedule: Schedule,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Random crops (and flips with `flip_prob`) when on, center crops when off.
    pub augmentation: bool,
    pub flip_prob: f64,
    /// `None` picks random windows with augmentation and non-overlapped clips without.
    pub sampling: Option<ClipSampling>,
    /// Fraction of each class held out for clip accuracy.
    pub held_out_fraction: f64,
}

impl Default for TrainConfig {
    /// The architecture-search recipe: batch 30, lr 0.003 divided by 10 every
    /// 4 epochs, 16 epochs.
    fn default() -> Self {
        TrainConfig {
            batch_size: 30,
            initial_lr: 0.003,
            schedule: Schedule::StepEpochs { divisor: 10.0, every: 4, stop: 16 },
            momentum: 0.9,
            weight_decay: 0.0,
            seed: 0,
            augmentation: true,
            flip_prob: 0.5,
            sampling: None,
            held_out_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    /// Large-scale recipe: lr halved every 150K iterations, stopped at 1.9M.
    pub fn sports() -> Self {
        TrainConfig {
            schedule: Schedule::StepIters { divisor: 2.0, every: 150_000, stop: 1_900_000 },
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let (divisor, every, stop) = self.schedule.parts();
        if !(divisor > 1.0) {
            return bad(format!("schedule divisor must exceed 1, got {divisor}"));
        }
        if every == 0 || stop == 0 {
            return bad("schedule step and stop point must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.initial_lr >= 0.0 && self.initial_lr.is_finite()) {
            return bad(format!("learning rate {}", self.initial_lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight decay {}", self.weight_decay));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad(format!("flip probability {}", self.flip_prob));
        }
        if !(0.0..1.0).contains(&self.held_out_fraction) {
            return bad(format!("held-out fraction {} outside [0, 1)", self.held_out_fraction));
        }
        Ok(())
    }

    pub fn sampling(&self) -> ClipSampling {
        self.sampling.unwrap_or(if self.augmentation {
            ClipSampling::RandomWindow
        } else {
            ClipSampling::NonOverlapped
        })
    }
}

/// Learning rate at an epoch or iteration index, depending on the schedule.
pub fn lr_at(config: &TrainConfig, index: usize) -> f64 {
    let (divisor, every, _) = config.schedule.parts();
    config.initial_lr / divisor.powi((index / every) as i32)
}

/// Momentum buffers, one per parameter tensor, zero-initialized.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub velocity: Gradients,
}

impl OptimizerState {
    pub fn new(net: &Network) -> Self {
        OptimizerState { velocity: net.zero_gradients() }
    }
}

/// `v = momentum * v - lr * g; p = p + v` for every parameter.
pub fn sgd_step(net: &mut Network, grads: &Gradients, state: &mut OptimizerState, lr: f64, momentum: f64) -> Result<()> {
    let params = net.params_mut();
    if grads.layers.len() != params.len() || state.velocity.layers.len() != params.len() {
        return Err(Error::ShapeMismatch("gradients do not match network layers".into()));
    }
    for (i, p) in params.iter_mut().enumerate() {
        let (Some(p), Some(g), Some(v)) = (p.as_mut(), grads.layers[i].as_ref(), state.velocity.layers[i].as_mut()) else {
            if p.is_some() != grads.layers[i].is_some() {
                return Err(Error::ShapeMismatch(format!("layer {i}: gradient presence differs from parameters")));
            }
            continue;
        };
        for (pt, gt, vt) in [(&mut p.weight, &g.weight, &mut v.weight), (&mut p.bias, &g.bias, &mut v.bias)] {
            if pt.dims() != gt.dims() || pt.dims() != vt.dims() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: parameter {} vs gradient {}",
                    pt.shape(),
                    gt.shape()
                )));
            }
            for ((x, &dx), vel) in pt.data_mut().iter_mut().zip(gt.data()).zip(vt.data_mut()) {
                *vel = momentum * *vel - lr * dx;
                *x += *vel;
            }
        }
    }
    Ok(())
}

/// Random `(crop_h, crop_w)` crop of a random 16-frame window, flipped with
/// probability `flip_prob`.
pub fn augment_clip(video: &VideoRecord, crop_hw: (usize, usize), flip_prob: f64, rng: &mut impl Rng) -> Result<Tensor> {
    let [_, l, _, _] = video.dims();
    if l < CLIP_LEN {
        return Err(Error::InsufficientData(format!("video of {l} frames is shorter than a clip")));
    }
    let start = rng.random_range(0..=l - CLIP_LEN);
    jitter(&video.clip(start, CLIP_LEN)?, crop_hw, flip_prob, rng)
}

fn jitter(clip: &Tensor, (ch, cw): (usize, usize), flip_prob: f64, rng: &mut impl Rng) -> Result<Tensor> {
    let (h, w) = (clip.dims()[2], clip.dims()[3]);
    if ch > h || cw > w {
        return Err(Error::InvalidShape(format!("crop {ch}x{cw} larger than frame {h}x{w}")));
    }
    let y0 = rng.random_range(0..=h - ch);
    let x0 = rng.random_range(0..=w - cw);
    let out = crop(clip, y0, x0, ch, cw)?;
    Ok(if rng.random_bool(flip_prob) { flip_horizontal(&out) } else { out })
}

/// One row per epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Iterations completed by the end of the epoch.
    pub iter: usize,
    pub lr: f64,
    /// Mean training loss over the epoch's batches.
    pub loss: f64,
    /// Held-out clip accuracy, `None` without a held-out split.
    pub clip_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Loss of every iteration, in order.
    pub iter_losses: Vec<f64>,
    pub wall_clock: Duration,
}

impl TrainReport {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.clip_accuracy)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,iter,lr,loss,clip_accuracy\n");
        for e in &self.epochs {
            let acc = e.clip_accuracy.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{}", e.epoch, e.iter, e.lr, e.loss, acc);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Stratified held-out split. Returns `(train, held_out)` video indices, both sorted.
pub fn split_held_out(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let k = (fraction * idx.len() as f64).round() as usize;
        held.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}

fn check_dataset(net: &Network, videos: &[&VideoRecord]) -> Result<()> {
    let [c, l, h, w] = net.spec().input;
    if l != CLIP_LEN {
        return Err(Error::InvalidConfig(format!("network clip length {l}, expected {CLIP_LEN}")));
    }
    for (i, v) in videos.iter().enumerate() {
        let d = v.dims();
        if d[0] != c || d[1] < CLIP_LEN || d[2] < h || d[3] < w {
            return Err(Error::ShapeMismatch(format!(
                "video {i} has extents {d:?}, network needs ({c}, >={CLIP_LEN}, >={h}, >={w})"
            )));
        }
        if v.label >= net.spec().class_count {
            return Err(Error::LabelOutOfRange { label: v.label, classes: net.spec().class_count });
        }
    }
    Ok(())
}

fn stack(clips: &[Tensor]) -> Result<Tensor> {
    let mut dims = vec![clips.len()];
    dims.extend_from_slice(clips[0].dims());
    let mut data = Vec::with_capacity(clips.len() * clips[0].len());
    for c in clips {
        data.extend_from_slice(c.data());
    }
    Tensor::from_vec(&dims, data)
}

/// Clip accuracy over the non-overlapped, center-cropped clips of `videos`.
pub fn clip_accuracy(net: &Network, videos: &[&VideoRecord]) -> Result<f64> {
    let [_, _, h, w] = net.spec().input;
    let mut clips = Vec::new();
    for v in videos {
        for ci in split_into_clips(0, v.length(), CLIP_LEN, 0)? {
            clips.push((center_crop(&v.clip(ci.start, CLIP_LEN)?, h, w)?, v.label));
        }
    }
    if clips.is_empty() {
        return Err(Error::InsufficientData("no evaluation clips".into()));
    }
    let mut correct = 0;
    for chunk in clips.chunks(32) {
        let batch: Vec<Tensor> = chunk.iter().map(|(c, _)| c.clone()).collect();
        let probs = net.predict(&stack(&batch)?)?;
        let k = probs.dims()[1];
        for (i, (_, label)) in chunk.iter().enumerate() {
            if argmax(&probs.data()[i * k..(i + 1) * k]) == *label {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / clips.len() as f64)
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Trains on a seeded stratified split of `dataset`, evaluating on the rest.
pub fn train(net: &mut Network, dataset: &[VideoRecord], config: &TrainConfig) -> Result<TrainReport> {
    train_with_progress(net, dataset, config, |_| {})
}

pub fn train_with_progress(
    net: &mut Network,
    dataset: &[VideoRecord],
    config: &TrainConfig,
    progress: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    let labels: Vec<usize> = dataset.iter().map(|v| v.label).collect();
    let (train_idx, held_idx) = split_held_out(&labels, config.held_out_fraction, config.seed);
    let train_set: Vec<&VideoRecord> = train_idx.iter().map(|&i| &dataset[i]).collect();
    let held_set: Vec<&VideoRecord> = held_idx.iter().map(|&i| &dataset[i]).collect();
    train_split(net, &train_set, &held_set, config, progress)
}

/// Trains on `train_set` and reports clip accuracy on `held_out` after every epoch.
pub fn train_split(
    net: &mut Network,
    train_set: &[&VideoRecord],
    held_out: &[&VideoRecord],
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    check_dataset(net, train_set)?;
    check_dataset(net, held_out)?;
    let started = Instant::now();
    let [_, _, h, w] = net.spec().input;
    let sampling = config.sampling();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = OptimizerState::new(net);

    // (video, start) units; random windows re-draw the start each epoch.
    let mut units: Vec<(usize, usize)> = Vec::new();
    for (vi, v) in train_set.iter().enumerate() {
        match sampling {
            ClipSampling::RandomWindow => units.push((vi, 0)),
            ClipSampling::NonOverlapped => {
                units.extend(split_into_clips(vi, v.length(), CLIP_LEN, 0)?.iter().map(|c| (vi, c.start)))
            }
        }
    }

    let (_, _, stop) = config.schedule.parts();
    let mut iter = 0usize;
    let mut epochs = Vec::new();
    let mut iter_losses = Vec::new();
    let mut epoch = 0usize;
    loop {
        let done = match config.schedule {
            Schedule::StepEpochs { .. } => epoch >= stop,
            Schedule::StepIters { .. } => iter >= stop,
        };
        if done {
            break;
        }
        units.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut lr = lr_at(config, epoch);
        for chunk in units.chunks(config.batch_size) {
            if let Schedule::StepIters { .. } = config.schedule {
                if iter >= stop {
                    break;
                }
                lr = lr_at(config, iter);
            }
            let mut clips = Vec::with_capacity(chunk.len());
            let mut labels = Vec::with_capacity(chunk.len());
            for &(vi, start) in chunk {
                let v = train_set[vi];
                let clip = match (sampling, config.augmentation) {
                    (ClipSampling::RandomWindow, true) => augment_clip(v, (h, w), config.flip_prob, &mut rng)?,
                    (ClipSampling::RandomWindow, false) => {
                        let s = rng.random_range(0..=v.length() - CLIP_LEN);
                        center_crop(&v.clip(s, CLIP_LEN)?, h, w)?
                    }
                    (ClipSampling::NonOverlapped, true) => {
                        jitter(&v.clip(start, CLIP_LEN)?, (h, w), config.flip_prob, &mut rng)?
                    }
                    (ClipSampling::NonOverlapped, false) => center_crop(&v.clip(start, CLIP_LEN)?, h, w)?,
                };
                clips.push(clip);
                labels.push(v.label);
            }
            let (xent, mut grads) = net.loss_and_gradients(&stack(&clips)?, &labels)?;
            if !xent.loss.is_finite() {
                return Err(Error::Diverged { iter, loss: xent.loss });
            }
            if config.weight_decay > 0.0 {
                add_weight_decay(net, &mut grads, config.weight_decay);
            }
            sgd_step(net, &grads, &mut state, lr, config.momentum)?;
            iter_losses.push(xent.loss);
            loss_sum += xent.loss;
            batches += 1;
            iter += 1;
        }
        let clip_accuracy = if held_out.is_empty() { None } else { Some(clip_accuracy(net, held_out)?) };
        let record = EpochRecord { epoch, iter, lr, loss: loss_sum / batches.max(1) as f64, clip_accuracy };
        progress(&record);
        epochs.push(record);
        epoch += 1;
    }
    Ok(TrainReport { epochs, iter_losses, wall_clock: started.elapsed() })
}

fn add_weight_decay(net: &Network, grads: &mut Gradients, decay: f64) {
    for (p, g) in net.params().iter().zip(grads.layers.iter_mut()) {
        if let (Some(p), Some(g)) = (p, g) {
            for (gx, px) in g.weight.data_mut().iter_mut().zip(p.weight.data()) {
                *gx += decay * px;
            }
        }
    }
}
