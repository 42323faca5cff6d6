//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Every accepted key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "master seed for data, initialization, shuffling and probes"),
    ("threads", "0", "worker threads; 0 uses every core, 1 is bit-deterministic"),
    ("data.mode", "motion", "motion (class = direction) or appearance (class = shape)"),
    ("data.classes", "8", "number of classes"),
    ("data.videos_per_class", "100", "videos generated per class"),
    ("data.channels", "1", "1 (gray) or 3 (RGB) channels"),
    ("data.length", "16", "frames per video"),
    ("data.height", "16", "frame height"),
    ("data.width", "16", "frame width"),
    ("data.blobs_min", "1", "fewest blobs per video"),
    ("data.blobs_max", "2", "most blobs per video"),
    ("data.radius_min", "2", "smallest blob radius in pixels"),
    ("data.radius_max", "3", "largest blob radius in pixels"),
    ("data.speed_min", "1", "slowest speed in pixels per frame"),
    ("data.speed_max", "1.5", "fastest speed in pixels per frame"),
    ("data.noise", "0.05", "standard deviation of additive pixel noise"),
    ("data.angle_offset", "0", "rotation of every motion direction, in radians"),
    ("model.arch", "family", "`family` (narrow 5-conv net) or a preset: depth-1/3/5/7, increase, decrease, net-64/128/256, c3d"),
    ("model.depth", "3", "temporal kernel depth of every family conv layer"),
    ("model.depths", "", "per-layer family depths, e.g. 3,3,5,5,7; overrides model.depth"),
    ("model.filters", "8,16,16,16,16", "family conv widths"),
    ("model.fc_width", "64", "family fc6/fc7 width"),
    ("model.crop", "16", "family spatial input size"),
    ("model.init", "he", "family weight init: he (sqrt(6/fan_in)) or fan-in (sqrt(1/fan_in))"),
    ("model.classes", "0", "classifier width; 0 takes it from the dataset"),
    ("model.channels", "0", "input channels; 0 takes them from the dataset"),
    ("train.batch_size", "16", "clips per SGD step"),
    ("train.lr", "0.005", "initial learning rate"),
    ("train.momentum", "0.9", "SGD momentum"),
    ("train.weight_decay", "0", "L2 weight decay"),
    ("train.epochs", "30", "epochs before stopping"),
    ("train.lr_every", "20", "epochs between learning-rate divisions"),
    ("train.lr_divisor", "10", "learning-rate divisor"),
    ("train.augmentation", "true", "random crops and temporal windows"),
    ("train.flip_prob", "0", "horizontal flip probability (mirrors direction labels; keep 0 for motion data)"),
    ("train.held_out", "0.2", "held-out fraction per class for clip accuracy"),
    ("train.sampling", "random", "training clips: random (16-frame windows) or non-overlapped"),
    ("probe.layer", "fc6", "feature layer for extract, probe-svm and probe-pca"),
    ("probe.lambda", "1e-4", "SVM regularization"),
    ("probe.epochs", "100", "SVM epochs"),
    ("probe.folds", "10", "cross-validation folds"),
    ("probe.pca_dims", "2,10,50,full", "PCA sizes for probe-pca"),
    ("probe.pairs_per_fold", "200", "pairs drawn per similarity fold, half same and half different"),
    ("predict.clips", "10", "random clips averaged per video prediction"),
    ("visualize.layer", "conv3", "layer whose feature map is projected"),
    ("visualize.channel", "0", "channel of that layer"),
    ("visualize.top", "4", "strongest activations to project"),
    ("visualize.relu", "deconvnet", "reverse rectification: deconvnet or forward-mask"),
    ("benchmark.reps", "3", "repetitions; the median is reported"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config { values: KEYS.iter().map(|(k, v, _)| (*k, v.to_string())).collect() }
    }
}

fn known(key: &str) -> Result<&'static str> {
    KEYS.iter().map(|(k, _, _)| *k).find(|k| *k == key).ok_or_else(|| anyhow!("unknown config key `{key}`"))
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = known(key)?;
        self.values.insert(key, value.trim().to_string());
        Ok(())
    }

    /// Parses `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| anyhow!("expected key=value, got `{pair}`"))?;
        self.set(k.trim(), v)
    }

    /// Applies a file of `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.apply_text(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).unwrap_or_else(|| panic!("config key `{key}` is not declared"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e}"))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        parse_list(self.raw(key)).with_context(|| format!("config key `{key}`"))
    }

    /// Every key in sorted order, one `key = value` line each.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

pub fn parse_list<T: FromStr>(raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| anyhow!("`{s}`: {e}")))
        .collect()
}

pub fn parse_bool(raw: &str) -> Result<bool> {
    match raw {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!("`{raw}` is not a boolean"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_unique_and_sorted_output_round_trips() {
        let mut names: Vec<_> = KEYS.iter().map(|k| k.0).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), KEYS.len());
        let mut c = Config::default();
        c.set("train.lr", "0.1").unwrap();
        let mut back = Config::default();
        back.apply_text(&c.render()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut c = Config::default();
        assert!(c.set("train.lr_typo", "1").is_err());
        let err = c.apply_text("seed = 3\nbogus = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 2"));
    }

    #[test]
    fn typed_access() {
        let mut c = Config::default();
        c.apply_text("# comment\ndata.classes = 12  # trailing\n").unwrap();
        assert_eq!(c.get::<usize>("data.classes").unwrap(), 12);
        assert_eq!(c.list::<usize>("model.filters").unwrap(), vec![8, 16, 16, 16, 16]);
        c.set("data.classes", "x").unwrap();
        assert!(c.get::<usize>("data.classes").is_err());
        assert!(parse_bool("maybe").is_err());
    }
}
