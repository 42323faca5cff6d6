//! Per-run state: resolved configuration, run directory, log, and the
//! translation of config keys into engine configs.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use c3d_core::network::{load_weights, preset_spec, FamilyConfig, Network, NetworkSpec};
use c3d_core::trainer::{ClipSampling, Schedule, TrainConfig};
use c3d_core::videodata::{load_dataset, MotionBlobsConfig, VideoRecord};

use crate::config::{parse_bool, Config};
use crate::GlobalArgs;

pub const DATA_DIR_ENV: &str = "C3D_DATA_DIR";
pub const DEFAULT_DATASET: &str = "motionblobs.vset";
pub const CONFIG_FILE: &str = "config.txt";
pub const LOG_FILE: &str = "log.txt";
pub const WEIGHTS_FILE: &str = "weights.c3dw";

pub struct Ctx {
    pub cfg: Config,
    pub out: PathBuf,
    log: File,
    started: Instant,
}

impl Ctx {
    /// Resolves the config (defaults, then `--config`, then `--set`, then the
    /// command's own flags, then `--seed`/`--threads`) and opens the run directory.
    pub fn new(global: &GlobalArgs, command: &str, flags: &[(&str, Option<String>)]) -> Result<Ctx> {
        let mut cfg = Config::default();
        if let Some(path) = &global.config {
            cfg.apply_file(path)?;
        }
        for pair in &global.set {
            cfg.set_pair(pair).context("--set")?;
        }
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(seed) = global.seed {
            cfg.set("seed", &seed.to_string())?;
        }
        if let Some(threads) = global.threads {
            cfg.set("threads", &threads.to_string())?;
        }
        let threads: usize = cfg.get("threads")?;
        if threads > 0 {
            // Fails only if a pool already exists, as in repeated in-process runs.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
        let out = global.out.clone().unwrap_or_else(|| Path::new("runs").join(command));
        fs::create_dir_all(&out).with_context(|| format!("creating run directory {}", out.display()))?;
        let log = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(out.join(LOG_FILE))
            .with_context(|| format!("opening log in {}", out.display()))?;
        let ctx = Ctx { cfg, out, log, started: Instant::now() };
        ctx.save_config()?;
        Ok(ctx)
    }

    pub fn save_config(&self) -> Result<()> {
        self.write(CONFIG_FILE, self.cfg.render().as_bytes())
    }

    /// Writes a line to stderr and to the run log. The log carries no timings,
    /// so it is reproducible; [`Ctx::progress`] adds elapsed time on stderr only.
    pub fn log(&mut self, msg: impl AsRef<str>) {
        let msg = msg.as_ref();
        eprintln!("{msg}");
        let _ = writeln!(self.log, "{msg}");
    }

    pub fn progress(&mut self, msg: impl AsRef<str>) {
        let msg = msg.as_ref();
        eprintln!("[{:7.1}s] {msg}", self.started.elapsed().as_secs_f64());
        let _ = writeln!(self.log, "{msg}");
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.cfg.get("seed")
    }

    pub fn data_path(&self, given: Option<&Path>) -> Result<PathBuf> {
        if let Some(p) = given {
            return Ok(p.to_path_buf());
        }
        match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) => Ok(Path::new(&dir).join(DEFAULT_DATASET)),
            None => bail!("no dataset given: pass --data or set {DATA_DIR_ENV}"),
        }
    }

    pub fn load_data(&mut self, given: Option<&Path>) -> Result<(PathBuf, Vec<VideoRecord>)> {
        let path = self.data_path(given)?;
        let data = load_dataset(&path).with_context(|| format!("loading {}", path.display()))?;
        if data.is_empty() {
            bail!("dataset {} is empty", path.display());
        }
        self.log(format!("dataset {}: {} videos", path.display(), data.len()));
        Ok((path, data))
    }

    pub fn blobs_config(&self) -> Result<MotionBlobsConfig> {
        let c = &self.cfg;
        Ok(MotionBlobsConfig {
            mode: c.raw("data.mode").parse()?,
            classes: c.get("data.classes")?,
            videos_per_class: c.get("data.videos_per_class")?,
            channels: c.get("data.channels")?,
            length: c.get("data.length")?,
            height: c.get("data.height")?,
            width: c.get("data.width")?,
            blob_count: (c.get("data.blobs_min")?, c.get("data.blobs_max")?),
            blob_radius: (c.get("data.radius_min")?, c.get("data.radius_max")?),
            speed: (c.get("data.speed_min")?, c.get("data.speed_max")?),
            noise: c.get("data.noise")?,
            angle_offset: c.get("data.angle_offset")?,
            seed: self.seed()?,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let c = &self.cfg;
        let sampling = match c.raw("train.sampling") {
            "random" => ClipSampling::RandomWindow,
            "non-overlapped" => ClipSampling::NonOverlapped,
            other => bail!("train.sampling must be random or non-overlapped, got `{other}`"),
        };
        let tc = TrainConfig {
            batch_size: c.get("train.batch_size")?,
            initial_lr: c.get("train.lr")?,
            schedule: Schedule::StepEpochs {
                divisor: c.get("train.lr_divisor")?,
                every: c.get("train.lr_every")?,
                stop: c.get("train.epochs")?,
            },
            momentum: c.get("train.momentum")?,
            weight_decay: c.get("train.weight_decay")?,
            seed: self.seed()?,
            augmentation: parse_bool(c.raw("train.augmentation")).context("train.augmentation")?,
            flip_prob: c.get("train.flip_prob")?,
            sampling: Some(sampling),
            held_out_fraction: c.get("train.held_out")?,
        };
        tc.validate()?;
        Ok(tc)
    }

    /// Fills `model.classes` and `model.channels` from the dataset when unset.
    pub fn resolve_model_io(&mut self, data: &[VideoRecord]) -> Result<()> {
        if self.cfg.get::<usize>("model.classes")? == 0 {
            let classes = data.iter().map(|v| v.label).max().map_or(0, |m| m + 1);
            self.cfg.set("model.classes", &classes.max(2).to_string())?;
        }
        if self.cfg.get::<usize>("model.channels")? == 0 {
            let channels = data.first().map_or(3, |v| v.dims()[0]);
            self.cfg.set("model.channels", &channels.to_string())?;
        }
        self.save_config()
    }

    pub fn model_spec(&self) -> Result<NetworkSpec> {
        let c = &self.cfg;
        let classes: usize = c.get("model.classes")?;
        if classes == 0 {
            bail!("model.classes is unresolved");
        }
        let arch = c.raw("model.arch");
        if arch != "family" {
            return Ok(preset_spec(arch, classes)?);
        }
        let depths: Vec<usize> = c.list("model.depths")?;
        let depths: [usize; 5] = if depths.is_empty() {
            [c.get("model.depth")?; 5]
        } else {
            depths.try_into().map_err(|d: Vec<usize>| anyhow!("model.depths needs 5 entries, got {}", d.len()))?
        };
        let filters: [usize; 5] = c
            .list::<usize>("model.filters")?
            .try_into()
            .map_err(|f: Vec<usize>| anyhow!("model.filters needs 5 entries, got {}", f.len()))?;
        let mut channels: usize = c.get("model.channels")?;
        if channels == 0 {
            channels = c.get("data.channels")?;
        }
        let family = FamilyConfig {
            filters,
            fc_width: c.get("model.fc_width")?,
            ..FamilyConfig::desk(depths, channels, c.get("model.crop")?)
        };
        let spec = family.build(classes)?;
        Ok(match c.raw("model.init") {
            "he" => spec.with_he_init(),
            "fan-in" => spec,
            other => bail!("model.init must be he or fan-in, got `{other}`"),
        })
    }

    pub fn build_model(&self) -> Result<Network> {
        Ok(Network::build(self.model_spec()?, self.seed()?)?)
    }

    /// Adopts the `model.*` keys of a training run and loads its weights.
    pub fn load_model(&mut self, dir: &Path) -> Result<Network> {
        let mut trained = Config::default();
        trained.apply_file(&dir.join(CONFIG_FILE))?;
        for (key, _, _) in crate::config::KEYS.iter().filter(|(k, _, _)| k.starts_with("model.")) {
            self.cfg.set(key, trained.raw(key))?;
        }
        self.save_config()?;
        let spec = self.model_spec()?;
        let weights = dir.join(WEIGHTS_FILE);
        let net = load_weights(spec, &weights).with_context(|| format!("loading {}", weights.display()))?;
        self.log(format!("model {} ({} parameters)", dir.display(), net.param_elements()));
        Ok(net)
    }
}
