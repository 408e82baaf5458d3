//! Run configuration in a flat `key = value` text format. Blank lines and
//! lines starting with `#` are ignored; unknown or repeated keys are errors.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gcn::STANDARD_KERNEL_T;
use crate::pipeline::{PipelineConfig, SamplingMode};
use crate::synth::SyntheticSpec;
use crate::two_stream::{Fusion, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    pub synth: SyntheticSpec,
    pub fusion: Fusion,
    pub kernel_t: usize,
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            train: TrainConfig::default(),
            synth: SyntheticSpec::default(),
            fusion: Fusion::Average,
            kernel_t: STANDARD_KERNEL_T,
            seed: 0,
            data: None,
            out: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "T",
    "sampling",
    "strategy",
    "partition",
    "fusion",
    "gate_theta",
    "alpha",
    "coordinates",
    "gravity",
    "kernel_t",
    "epochs",
    "batch_size",
    "lr",
    "momentum",
    "decay_every",
    "decay_factor",
    "ohp_on_all_clips",
    "eval_every",
    "seed",
    "vibe_samples",
    "vibe_radius",
    "vibe_min_matches",
    "vibe_subsample",
    "min_area",
    "hand_radius_factor",
    "max_misses",
    "clips_per_class",
    "frames_per_clip",
    "warmup_frames",
    "width",
    "height",
    "jitter",
    "dropout",
    "bystander_rate",
    "data",
    "out",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn strategy<T: FromStr<Err = Error>>(value: &str) -> Result<T> {
    value.parse()
}

impl RunConfig {
    /// Defaults overridden by the entries of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.pipeline;
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "T" => p.segments = parse(key, value)?,
            "sampling" => p.sampling = strategy::<SamplingMode>(value)?,
            "strategy" => p.connection = strategy(value)?,
            "partition" => p.partition = strategy(value)?,
            "fusion" => self.fusion = strategy(value)?,
            "gate_theta" => p.gate_theta = parse(key, value)?,
            "alpha" => p.alpha = parse(key, value)?,
            "coordinates" => p.coordinates = value.parse()?,
            "gravity" => p.gravity = value.parse()?,
            "kernel_t" => self.kernel_t = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "lr" => t.lr = parse(key, value)?,
            "momentum" => t.momentum = parse(key, value)?,
            "decay_every" => t.decay_every = parse(key, value)?,
            "decay_factor" => t.decay_factor = parse(key, value)?,
            "ohp_on_all_clips" => t.ohp_on_all_clips = parse(key, value)?,
            "eval_every" => t.eval_every = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "vibe_samples" => p.detector.vibe.num_samples = parse(key, value)?,
            "vibe_radius" => p.detector.vibe.radius = parse(key, value)?,
            "vibe_min_matches" => p.detector.vibe.min_matches = parse(key, value)?,
            "vibe_subsample" => p.detector.vibe.subsample_factor = parse(key, value)?,
            "min_area" => p.detector.hand.min_area = parse(key, value)?,
            "hand_radius_factor" => p.detector.hand.radius_factor = parse(key, value)?,
            "max_misses" => p.max_misses = parse(key, value)?,
            "clips_per_class" => s.clips_per_class = parse(key, value)?,
            "frames_per_clip" => s.frames_per_clip = parse(key, value)?,
            "warmup_frames" => s.warmup_frames = parse(key, value)?,
            "width" => s.width = parse(key, value)?,
            "height" => s.height = parse(key, value)?,
            "jitter" => s.jitter_sigma = parse(key, value)?,
            "dropout" => s.dropout_rate = parse(key, value)?,
            "bystander_rate" => s.bystander_rate = parse(key, value)?,
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Seeds every stochastic stage from `seed`.
    pub fn seeded(mut self) -> Self {
        self.synth.seed = self.seed;
        self.train.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.pipeline;
        if p.segments == 0 {
            return Err(Error::Config("T must be positive".into()));
        }
        if !(0.0..=1.0).contains(&p.gate_theta) {
            return Err(Error::Config(format!("gate_theta must be in [0, 1], got {}", p.gate_theta)));
        }
        if !(p.alpha >= 0.0 && p.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be non-negative, got {}", p.alpha)));
        }
        if self.kernel_t == 0 || self.kernel_t.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel_t must be odd, got {}", self.kernel_t)));
        }
        let v = &p.detector.vibe;
        if v.num_samples == 0 || v.min_matches == 0 || v.min_matches > v.num_samples || v.subsample_factor == 0 {
            return Err(Error::Config("invalid background model parameters".into()));
        }
        if p.detector.hand.radius_factor.is_nan() || p.detector.hand.radius_factor <= 0.0 {
            return Err(Error::Config("hand_radius_factor must be positive".into()));
        }
        self.train.validate()?;
        self.synth.validate()
    }

    /// All keys with their current values, in the file format.
    pub fn to_text(&self) -> String {
        let p = &self.pipeline;
        let t = &self.train;
        let s = &self.synth;
        let path = |o: &Option<PathBuf>| o.as_ref().map(|p| p.display().to_string());
        let entries: Vec<(&str, Option<String>)> = vec![
            ("T", Some(p.segments.to_string())),
            ("sampling", Some(p.sampling.to_string())),
            ("strategy", Some(p.connection.name().into())),
            ("partition", Some(p.partition.name().into())),
            ("fusion", Some(self.fusion.to_string())),
            ("gate_theta", Some(p.gate_theta.to_string())),
            ("alpha", Some(p.alpha.to_string())),
            ("coordinates", Some(p.coordinates.to_string())),
            ("gravity", Some(p.gravity.to_string())),
            ("kernel_t", Some(self.kernel_t.to_string())),
            ("epochs", Some(t.epochs.to_string())),
            ("batch_size", Some(t.batch_size.to_string())),
            ("lr", Some(t.lr.to_string())),
            ("momentum", Some(t.momentum.to_string())),
            ("decay_every", Some(t.decay_every.to_string())),
            ("decay_factor", Some(t.decay_factor.to_string())),
            ("ohp_on_all_clips", Some(t.ohp_on_all_clips.to_string())),
            ("eval_every", Some(t.eval_every.to_string())),
            ("seed", Some(self.seed.to_string())),
            ("vibe_samples", Some(p.detector.vibe.num_samples.to_string())),
            ("vibe_radius", Some(p.detector.vibe.radius.to_string())),
            ("vibe_min_matches", Some(p.detector.vibe.min_matches.to_string())),
            ("vibe_subsample", Some(p.detector.vibe.subsample_factor.to_string())),
            ("min_area", Some(p.detector.hand.min_area.to_string())),
            ("hand_radius_factor", Some(p.detector.hand.radius_factor.to_string())),
            ("max_misses", Some(p.max_misses.to_string())),
            ("clips_per_class", Some(s.clips_per_class.to_string())),
            ("frames_per_clip", Some(s.frames_per_clip.to_string())),
            ("warmup_frames", Some(s.warmup_frames.to_string())),
            ("width", Some(s.width.to_string())),
            ("height", Some(s.height.to_string())),
            ("jitter", Some(s.jitter_sigma.to_string())),
            ("dropout", Some(s.dropout_rate.to_string())),
            ("bystander_rate", Some(s.bystander_rate.to_string())),
            ("data", path(&self.data)),
            ("out", path(&self.out)),
        ];
        entries.into_iter().filter_map(|(k, v)| v.map(|v| format!("{k} = {v}\n"))).collect()
    }
}
