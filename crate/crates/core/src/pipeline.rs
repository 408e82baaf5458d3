//! End-to-end wiring: actor resolution, object detection on video, frame
//! sampling, graph construction, dataset files on disk, and the strategy
//! ablation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gcn::{load_checkpoint, GcnModel, ModelConfig};
use crate::graph::{
    gravity_center, normalize, partition, ConnectionStrategy, GraphSpec, PartitionStrategy, PartitionedAdjacency, DEFAULT_ALPHA,
};
use crate::objdet::{actor_object, read_rawgs, write_rawgs, DetectorParams, GrayFrame, ObjectDetector};
use crate::pose_io::{body_normalize, clip_to_json, normalize_coordinates, parse_pose_json, to_pose_tensor, Clip, PoseTensor};
use crate::sampling::{informative_select, plan_segments, uniform_select, DEFAULT_SEGMENTS};
use crate::synth::SyntheticClip;
use crate::tracking::{annotate_clip, DEFAULT_MAX_MISSES};
use crate::two_stream::{
    evaluate, evaluate_stream, gate, train, train_stream, Fusion, Prediction, Sample, StreamInput, Streams, TrainConfig, TwoStreamModel,
    DEFAULT_GATE_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    #[default]
    Informative,
    Uniform,
}

impl FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "informative" => Ok(Self::Informative),
            "uniform" => Ok(Self::Uniform),
            _ => Err(Error::Config(format!("unknown sampling mode '{s}'"))),
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Informative => "informative",
            Self::Uniform => "uniform",
        })
    }
}

/// Coordinate encoding of the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coordinates {
    /// Relative to the actor's mean hip, in torso lengths.
    #[default]
    Body,
    /// Image extent mapped to `[-1, 1]`.
    Image,
}

impl FromStr for Coordinates {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "body" => Ok(Self::Body),
            "image" => Ok(Self::Image),
            _ => Err(Error::Config(format!("unknown coordinate encoding '{s}'"))),
        }
    }
}

impl fmt::Display for Coordinates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Body => "body",
            Self::Image => "image",
        })
    }
}

/// Poses averaged to place the gravity center and split neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GravityWindow {
    /// One partition from the training clips, stored with the model.
    #[default]
    Dataset,
    /// A partition per clip from its own sampled frames.
    Clip,
}

impl FromStr for GravityWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dataset" => Ok(Self::Dataset),
            "clip" => Ok(Self::Clip),
            _ => Err(Error::Config(format!("unknown gravity window '{s}'"))),
        }
    }
}

impl fmt::Display for GravityWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dataset => "dataset",
            Self::Clip => "clip",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub segments: usize,
    pub sampling: SamplingMode,
    /// Object wiring of the second stream; `HumanOnly` disables it.
    pub connection: ConnectionStrategy,
    pub partition: PartitionStrategy,
    pub alpha: f64,
    pub coordinates: Coordinates,
    pub gravity: GravityWindow,
    pub gate_theta: f64,
    pub detector: DetectorParams,
    pub max_misses: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            segments: DEFAULT_SEGMENTS,
            sampling: SamplingMode::Informative,
            connection: ConnectionStrategy::Hands,
            partition: PartitionStrategy::SpatialConfig,
            alpha: DEFAULT_ALPHA,
            coordinates: Coordinates::Body,
            gravity: GravityWindow::Dataset,
            gate_theta: DEFAULT_GATE_THRESHOLD,
            detector: DetectorParams::default(),
            max_misses: DEFAULT_MAX_MISSES,
        }
    }
}

/// Assigns track ids when the clip has none, then returns the position of
/// the primary person in every frame. The primary person has the largest
/// total confidence; ties go to the lowest id.
pub fn resolve_actor(clip: &mut Clip, max_misses: u32) -> Result<Vec<Option<usize>>> {
    if clip.frames.is_empty() {
        return Err(Error::EmptyClip);
    }
    if !clip.has_person_ids() {
        annotate_clip(clip, max_misses);
    }
    let mut totals: BTreeMap<u32, f64> = BTreeMap::new();
    for p in clip.frames.iter().flat_map(|f| &f.poses) {
        if let Some(id) = p.person_id {
            *totals.entry(id).or_default() += p.confidence_sum();
        }
    }
    let mut best: Option<(u32, f64)> = None;
    for (&id, &s) in &totals {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    let (id, _) = best.ok_or(Error::NoPerson)?;
    Ok(clip.person_positions(id))
}

/// Runs the detector over every video frame and writes the actor's object,
/// if any, into the matching annotated frame. Video frame `k` pairs with the
/// annotated frame whose index is `k`.
pub fn detect_objects(clip: &mut Clip, video: &[GrayFrame], actor: &[Option<usize>], params: DetectorParams, seed: u64) -> Result<usize> {
    let by_index: BTreeMap<u64, usize> = clip.frames.iter().enumerate().map(|(i, f)| (f.index, i)).collect();
    let mut detector = ObjectDetector::new(params, seed);
    let mut found = 0;
    for (k, image) in video.iter().enumerate() {
        let pos = by_index.get(&(k as u64)).copied();
        let poses = pos.map_or(&[][..], |p| &clip.frames[p].poses[..]);
        let det = detector.process(image, poses)?;
        if let Some(p) = pos {
            let object = actor.get(p).copied().flatten().and_then(|a| actor_object(&det.candidates, a));
            found += usize::from(object.is_some());
            clip.frames[p].object = object;
        }
    }
    Ok(found)
}

fn clip_extent(clip: &Clip) -> (f64, f64) {
    if let Some((w, h)) = clip.size {
        return (w as f64, h as f64);
    }
    let mut ext: (f64, f64) = (1.0, 1.0);
    for j in clip.frames.iter().flat_map(|f| &f.poses).flat_map(|p| &p.joints).filter(|j| j.is_present()) {
        ext = (ext.0.max(j.x + 1.0), ext.1.max(j.y + 1.0));
    }
    ext
}

/// Sampled actor frames and the per-frame object flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledClip {
    /// Positions into `clip.frames`.
    pub positions: Vec<usize>,
    pub object_present: Vec<bool>,
}

/// Picks `segments` frames among those where the actor is present.
pub fn sample_frames(clip: &Clip, actor: &[Option<usize>], segments: usize, mode: SamplingMode) -> Result<SampledClip> {
    let present: Vec<usize> = (0..clip.frames.len()).filter(|&i| actor.get(i).copied().flatten().is_some()).collect();
    let sub = Clip { frames: present.iter().map(|&i| clip.frames[i].clone()).collect(), ..clip.clone() };
    let sub_actor: Vec<Option<usize>> = present.iter().map(|&i| actor[i]).collect();
    let picked = match mode {
        SamplingMode::Informative => informative_select(&sub, &sub_actor, &plan_segments(present.len(), segments)?)?,
        SamplingMode::Uniform => uniform_select(present.len(), segments)?,
    };
    let positions: Vec<usize> = picked.iter().map(|&k| present[k]).collect();
    let object_present = positions.iter().map(|&p| clip.frames[p].object.is_some()).collect();
    Ok(SampledClip { positions, object_present })
}

/// Mean confident position of each node relative to the gravity center.
fn centered_mean_pose(raw: &PoseTensor, nodes: usize) -> Vec<Option<(f64, f64)>> {
    let mut mean = raw.mean_positions();
    mean.truncate(nodes);
    match gravity_center(&mean) {
        Ok((gx, gy)) => mean.iter().map(|p| p.map(|(x, y)| (x - gx, y - gy))).collect(),
        Err(_) => mean,
    }
}

fn adjacency_from_mean(
    mean: &[Option<(f64, f64)>],
    connection: ConnectionStrategy,
    strategy: PartitionStrategy,
    alpha: f64,
) -> Result<PartitionedAdjacency> {
    normalize(&partition(&GraphSpec::new(connection), strategy, mean)?, alpha)
}

/// Normalized adjacency built from the clip's mean pose.
pub fn clip_adjacency(
    raw: &PoseTensor,
    connection: ConnectionStrategy,
    strategy: PartitionStrategy,
    alpha: f64,
) -> Result<PartitionedAdjacency> {
    adjacency_from_mean(&centered_mean_pose(raw, connection.num_nodes()), connection, strategy, alpha)
}

/// Labeled samples for every clip, in dataset order, with the held-out mask.
pub fn labeled_samples(clips: &[Clip], cfg: &PipelineConfig) -> Result<(Vec<Sample>, Vec<bool>)> {
    let mask = held_out_mask(&clips.iter().collect::<Vec<_>>());
    let mut samples = Vec::with_capacity(clips.len());
    for clip in clips {
        let mut c = clip.clone();
        let actor = resolve_actor(&mut c, cfg.max_misses)?;
        samples.push(build_sample(&c, &actor, cfg)?);
    }
    Ok((samples, mask))
}

/// Reads a trained model directory: `run.cfg`, `hp.ckpt` and, when the object
/// stream was trained, `ohp.ckpt`. Returns the model, its run configuration and
/// the epoch the checkpoint was written at.
pub fn load_model(dir: &Path) -> Result<(TwoStreamModel, RunConfig, u32)> {
    let cfg_path = dir.join("run.cfg");
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let cfg = RunConfig::parse(&text)?;
    let hp = load_checkpoint(&dir.join("hp.ckpt"))?;
    let ohp_path = dir.join("ohp.ckpt");
    let ohp = if ohp_path.exists() { Some(load_checkpoint(&ohp_path)?.model) } else { None };
    Ok((TwoStreamModel { hp: hp.model, ohp, fusion: cfg.fusion }, cfg, hp.epoch))
}

/// Tracks, samples and classifies one clip with a trained model.
pub fn classify_clip(model: &TwoStreamModel, cfg: &PipelineConfig, clip: &Clip) -> Result<Prediction> {
    let mut c = clip.clone();
    let actor = resolve_actor(&mut c, cfg.max_misses)?;
    let mut sample = build_unlabeled(&c, &actor, cfg, 0)?;
    use_model_adjacency(model, std::slice::from_mut(&mut sample), cfg);
    model.predict(&sample)
}

/// Normalized adjacency from the average of the inputs' centered mean poses.
pub fn dataset_adjacency(
    inputs: &[&StreamInput],
    connection: ConnectionStrategy,
    strategy: PartitionStrategy,
    alpha: f64,
) -> Result<PartitionedAdjacency> {
    let nodes = connection.num_nodes();
    let mut sums = vec![(0.0, 0.0, 0usize); nodes];
    for input in inputs {
        for (acc, p) in sums.iter_mut().zip(&input.mean_pose) {
            if let Some((x, y)) = p {
                *acc = (acc.0 + x, acc.1 + y, acc.2 + 1);
            }
        }
    }
    let mean: Vec<_> = sums.iter().map(|&(x, y, k)| (k > 0).then(|| (x / k as f64, y / k as f64))).collect();
    adjacency_from_mean(&mean, connection, strategy, alpha)
}

/// Under the dataset window, derives each stream's adjacency from the
/// training samples and stores it in the model.
pub fn fit_adjacency(model: &mut TwoStreamModel, train: &[Sample], cfg: &PipelineConfig) -> Result<()> {
    if cfg.gravity == GravityWindow::Clip {
        return Ok(());
    }
    let hp: Vec<_> = train.iter().map(|s| &s.hp).collect();
    model.hp.adjacency = dataset_adjacency(&hp, model.hp.config.connection, cfg.partition, cfg.alpha)?;
    if let Some(ohp) = &mut model.ohp {
        let inputs: Vec<_> = train.iter().filter_map(|s| s.ohp.as_ref()).collect();
        ohp.adjacency = dataset_adjacency(&inputs, ohp.config.connection, cfg.partition, cfg.alpha)?;
    }
    Ok(())
}

/// Under the dataset window, gives every sample the model's adjacencies.
pub fn use_model_adjacency(model: &TwoStreamModel, samples: &mut [Sample], cfg: &PipelineConfig) {
    if cfg.gravity == GravityWindow::Clip {
        return;
    }
    for s in samples {
        s.hp.adjacency = model.hp.adjacency.clone();
        if let (Some(input), Some(ohp)) = (&mut s.ohp, &model.ohp) {
            input.adjacency = ohp.adjacency.clone();
        }
    }
}

fn stream_input(
    clip: &Clip,
    actor: &[Option<usize>],
    sampled: &SampledClip,
    connection: ConnectionStrategy,
    cfg: &PipelineConfig,
) -> Result<StreamInput> {
    let with_object = connection != ConnectionStrategy::HumanOnly;
    let raw = to_pose_tensor(clip, actor, &sampled.positions, with_object)?;
    let mean_pose = centered_mean_pose(&raw, connection.num_nodes());
    let adjacency = adjacency_from_mean(&mean_pose, connection, cfg.partition, cfg.alpha)?;
    let tensor = match cfg.coordinates {
        Coordinates::Body => body_normalize(&raw)?,
        Coordinates::Image => {
            let (w, h) = clip_extent(clip);
            normalize_coordinates(&raw, w, h)?
        }
    };
    Ok(StreamInput { tensor: tensor.into_tensor(), adjacency, mean_pose })
}

/// Network inputs for an actor-resolved clip.
pub fn build_sample(clip: &Clip, actor: &[Option<usize>], cfg: &PipelineConfig) -> Result<Sample> {
    let label = clip.label.ok_or_else(|| Error::Schema(format!("clip {} has no label", clip.clip_id)))?;
    build_unlabeled(clip, actor, cfg, label)
}

/// Like [`build_sample`] but with an explicit label, which may be a
/// placeholder for inference.
pub fn build_unlabeled(clip: &Clip, actor: &[Option<usize>], cfg: &PipelineConfig, label: usize) -> Result<Sample> {
    let sampled = sample_frames(clip, actor, cfg.segments, cfg.sampling)?;
    let hp = stream_input(clip, actor, &sampled, ConnectionStrategy::HumanOnly, cfg)?;
    let ohp = match cfg.connection {
        ConnectionStrategy::HumanOnly => None,
        c => Some(stream_input(clip, actor, &sampled, c, cfg)?),
    };
    let streams = if ohp.is_some() { gate(&sampled.object_present, cfg.gate_theta) } else { Streams::Hp };
    Ok(Sample { clip_id: clip.clip_id.clone(), label, hp, ohp, streams })
}

/// Tracking, optional detection, and sample construction for one clip.
pub fn prepare_clip(clip: &mut Clip, video: Option<&[GrayFrame]>, cfg: &PipelineConfig, seed: u64) -> Result<Sample> {
    let actor = resolve_actor(clip, cfg.max_misses)?;
    if let Some(v) = video {
        detect_objects(clip, v, &actor, cfg.detector, seed)?;
    }
    build_sample(clip, &actor, cfg)
}

/// A freshly initialized two-stream model. The stored adjacency is a
/// placeholder; every sample carries its own.
pub fn new_two_stream(num_classes: usize, cfg: &PipelineConfig, fusion: Fusion, seed: u64, kernel_t: usize) -> Result<TwoStreamModel> {
    let make = |connection: ConnectionStrategy, seed: u64| -> Result<GcnModel> {
        let spec = GraphSpec::new(connection);
        let nodes = spec.num_nodes;
        let mean: Vec<Option<(f64, f64)>> = (0..nodes).map(|n| Some((n as f64, (n % 5) as f64))).collect();
        let adj = normalize(&partition(&spec, cfg.partition, &mean)?, cfg.alpha)?;
        let mut config = ModelConfig::standard(num_classes, connection, cfg.partition);
        config.kernel_t = kernel_t;
        GcnModel::new(config, adj, seed)
    };
    let hp = make(ConnectionStrategy::HumanOnly, seed)?;
    let ohp = match cfg.connection {
        ConnectionStrategy::HumanOnly => None,
        c => Some(make(c, seed.wrapping_add(1))?),
    };
    Ok(TwoStreamModel { hp, ohp, fusion })
}

/// Held-out membership: within each label, clips sorted by id and every
/// fifth one held out.
pub fn held_out_mask(clips: &[&Clip]) -> Vec<bool> {
    let mut by_label: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, c) in clips.iter().enumerate() {
        by_label.entry(c.label).or_default().push(i);
    }
    let mut mask = vec![false; clips.len()];
    for idx in by_label.values_mut() {
        idx.sort_by(|&a, &b| clips[a].clip_id.cmp(&clips[b].clip_id));
        for (k, &i) in idx.iter().enumerate() {
            mask[i] = k % 5 == 4;
        }
    }
    mask
}

/// A clip with its video, if available.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub clip: Clip,
    pub video: Option<Vec<GrayFrame>>,
}

/// Writes `clips/*.json`, `video/*.rawgs` and `labels.csv` under `root`.
pub fn write_dataset(root: &Path, clips: &[SyntheticClip], with_video: bool) -> Result<()> {
    write_clips(root, &clips.iter().map(|c| &c.clip).collect::<Vec<_>>())?;
    if with_video {
        let video_dir = root.join("video");
        fs::create_dir_all(&video_dir).map_err(|e| Error::io(&video_dir, e))?;
        for c in clips {
            let p = video_dir.join(format!("{}.rawgs", c.clip.clip_id));
            fs::write(&p, write_rawgs(&c.video)?).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}

/// Writes `clips/*.json` and, for labeled clips, `labels.csv` under `root`.
pub fn write_clips(root: &Path, clips: &[&Clip]) -> Result<()> {
    let clips_dir = root.join("clips");
    fs::create_dir_all(&clips_dir).map_err(|e| Error::io(&clips_dir, e))?;
    let mut labels = String::from("clip_id,label\n");
    for c in clips {
        let id = &c.clip_id;
        let p = clips_dir.join(format!("{id}.json"));
        fs::write(&p, clip_to_json(c)).map_err(|e| Error::io(&p, e))?;
        if let Some(l) = c.label {
            labels.push_str(&format!("{id},{l}\n"));
        }
    }
    let p = root.join("labels.csv");
    fs::write(&p, labels).map_err(|e| Error::io(&p, e))
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("clip_id")) {
            continue;
        }
        let (id, label) =
            line.split_once(',').ok_or_else(|| Error::Schema(format!("labels.csv line {}: expected clip_id,label", n + 1)))?;
        let label = label.trim().parse().map_err(|_| Error::Schema(format!("labels.csv line {}: bad label", n + 1)))?;
        out.insert(id.trim().to_string(), label);
    }
    Ok(out)
}

/// Loads every clip under `root/clips`, sorted by file name, with labels from
/// `labels.csv` when present and videos from `root/video` when present.
pub fn load_dataset(root: &Path, with_video: bool) -> Result<Vec<DatasetItem>> {
    let dir = root.join("clips");
    let mut paths: Vec<_> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let labels_path = root.join("labels.csv");
    let labels = if labels_path.exists() { read_labels(&labels_path)? } else { BTreeMap::new() };
    let mut items = Vec::with_capacity(paths.len());
    for p in paths {
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let mut clip = parse_pose_json(&bytes)?;
        if let Some(&l) = labels.get(&clip.clip_id) {
            clip.label = Some(l);
        }
        let vpath = root.join("video").join(format!("{}.rawgs", clip.clip_id));
        let video = if with_video && vpath.exists() {
            let frames = read_rawgs(&fs::read(&vpath).map_err(|e| Error::io(&vpath, e))?)?;
            if clip.size.is_none() {
                clip.size = frames.first().map(|f| (f.width as u32, f.height as u32));
            }
            Some(frames)
        } else {
            None
        };
        items.push(DatasetItem { clip, video });
    }
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(items)
}

/// One row of the strategy comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub method: String,
    pub uniform: f64,
    pub informative: f64,
}

pub fn format_ablation(rows: &[AblationRow]) -> String {
    let mut s = format!("{:<24} {:>9} {:>12}\n", "method", "uniform", "informative");
    for r in rows {
        s.push_str(&format!("{:<24} {:>8.2}% {:>11.2}%\n", r.method, 100.0 * r.uniform, 100.0 * r.informative));
    }
    s
}

/// Trains and evaluates HP, each single OHP stream, and each HP + OHP
/// fusion under both sampling modes. `items` must already carry actor ids
/// and object annotations; `held_out[i]` marks test clips.
pub fn run_ablation(
    items: &[Clip],
    held_out: &[bool],
    base: &PipelineConfig,
    train_cfg: &TrainConfig,
    kernel_t: usize,
    fusion: Fusion,
) -> Result<Vec<AblationRow>> {
    let num_classes = items.iter().filter_map(|c| c.label).max().map_or(0, |m| m + 1);
    if num_classes == 0 {
        return Err(Error::EmptyDataset);
    }
    let connections = [ConnectionStrategy::Body, ConnectionStrategy::Limbs, ConnectionStrategy::Hands];
    let single_cfg = TrainConfig { ohp_on_all_clips: true, ..train_cfg.clone() };
    // Indexed [row][mode]: HP, OHP-x for each x, then HP + OHP-x for each x.
    let mut acc = vec![[0.0f64; 2]; 1 + 2 * connections.len()];
    for (m, mode) in [SamplingMode::Uniform, SamplingMode::Informative].into_iter().enumerate() {
        let mut hp_model: Option<GcnModel> = None;
        for (ci, &connection) in connections.iter().enumerate() {
            let cfg = PipelineConfig { sampling: mode, connection, ..base.clone() };
            let mut train_set = Vec::new();
            let mut test_set = Vec::new();
            for (clip, &test) in items.iter().zip(held_out) {
                let actor = resolve_actor(&mut clip.clone(), cfg.max_misses)?;
                let s = build_sample(clip, &actor, &cfg)?;
                if test {
                    test_set.push(s)
                } else {
                    train_set.push(s)
                }
            }
            let mut model = new_two_stream(num_classes, &cfg, fusion, train_cfg.seed, kernel_t)?;
            fit_adjacency(&mut model, &train_set, &cfg)?;
            use_model_adjacency(&model, &mut train_set, &cfg);
            use_model_adjacency(&model, &mut test_set, &cfg);
            match &hp_model {
                None => {
                    train(&mut model, &train_set, &[], &single_cfg)?;
                    let hp_test: Vec<_> = test_set.iter().map(|s| (&s.hp, s.label)).collect();
                    acc[0][m] = evaluate_stream(&model.hp, &hp_test)?.top1;
                    hp_model = Some(model.hp.clone());
                }
                Some(hp) => {
                    // The HP stream only depends on the sampling mode; reuse it.
                    model.hp = hp.clone();
                    let ohp = model.ohp.as_mut().expect("object stream");
                    let ohp_train: Vec<_> = train_set.iter().filter_map(|s| s.ohp.as_ref().map(|o| (o, s.label))).collect();
                    train_stream(
                        ohp,
                        &ohp_train,
                        &[],
                        &TrainConfig { seed: single_cfg.seed.wrapping_add(1), ..single_cfg.clone() },
                        "ohp",
                    )?;
                }
            }
            let ohp_test: Vec<_> = test_set.iter().filter_map(|s| s.ohp.as_ref().map(|o| (o, s.label))).collect();
            acc[1 + ci][m] = evaluate_stream(model.ohp.as_ref().expect("object stream"), &ohp_test)?.top1;
            acc[1 + connections.len() + ci][m] = evaluate(&model, &test_set)?.top1;
        }
    }
    let mut names = vec!["HP".to_string()];
    names.extend(connections.iter().map(|c| format!("OHP-{}", c.name())));
    names.extend(connections.iter().map(|c| format!("HP + OHP-{}", c.name())));
    Ok(names.into_iter().zip(acc).map(|(method, a)| AblationRow { method, uniform: a[0], informative: a[1] }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_io::{MID_HIP, OBJECT_NODE};
    use crate::synth::{generate_clip, ActionClass, SyntheticSpec};

    fn spec() -> SyntheticSpec {
        SyntheticSpec { clips_per_class: 1, frames_per_clip: 40, bystander_rate: 1.0, ..SyntheticSpec::default() }
    }

    #[test]
    fn actor_is_the_confident_person() {
        let s = generate_clip(&spec(), ActionClass::Carry, 0).unwrap();
        let mut clip = s.clip.clone();
        let actor = resolve_actor(&mut clip, DEFAULT_MAX_MISSES).unwrap();
        assert!(actor.iter().all(|a| a.is_some()));
        let ids: Vec<Option<u32>> = clip.frames.iter().zip(&actor).map(|(f, a)| f.poses[a.unwrap()].person_id).collect();
        assert!(ids.windows(2).all(|w| w[0] == w[1]));
        // The bystander stands further back, higher in the image.
        let mut dy: Vec<f64> = clip
            .frames
            .iter()
            .zip(&actor)
            .filter_map(|(f, a)| {
                let a = a.unwrap();
                Some(f.poses[a].joint(MID_HIP)?.y - f.poses[1 - a].joint(MID_HIP)?.y)
            })
            .collect();
        dy.sort_by(f64::total_cmp);
        assert!(dy[dy.len() / 2] > 0.0);
    }

    #[test]
    fn detection_finds_held_objects() {
        for class in [ActionClass::Carry, ActionClass::Phone, ActionClass::Walk] {
            let s = generate_clip(&spec(), class, 0).unwrap();
            let mut clip = s.clip.clone();
            let actor = resolve_actor(&mut clip, DEFAULT_MAX_MISSES).unwrap();
            let found = detect_objects(&mut clip, &s.video, &actor, DetectorParams::default(), 1).unwrap();
            let n = clip.frames.len();
            if class.has_object() {
                assert!(found * 10 >= n * 6, "{class}: object in {found} of {n} frames");
                let mut err: Vec<f64> = clip
                    .frames
                    .iter()
                    .zip(&s.object_track)
                    .filter_map(|(f, &t)| Some(((f.object?.cx - t?.0).powi(2) + (f.object?.cy - t?.1).powi(2)).sqrt()))
                    .collect();
                err.sort_by(f64::total_cmp);
                let median = err[err.len() / 2];
                assert!(median < 3.0, "{class}: median center error {median}");
            } else {
                assert!(found * 5 <= n, "{class}: spurious objects in {found} of {n} frames");
            }
        }
    }

    #[test]
    fn sample_shapes_and_gate() {
        let s = generate_clip(&spec(), ActionClass::Phone, 0).unwrap();
        let mut clip = s.clip.clone();
        let cfg = PipelineConfig::default();
        let sample = prepare_clip(&mut clip, None, &cfg, 0).unwrap();
        assert_eq!(sample.hp.tensor.dims(), (3, 32, 25));
        assert_eq!(sample.ohp.as_ref().unwrap().tensor.dims(), (3, 32, 26));
        assert_eq!(sample.hp.adjacency.num_subsets(), 3);
        assert_eq!(sample.streams, Streams::HpOhp);
        assert_eq!(sample.label, 1);

        let w = generate_clip(&spec(), ActionClass::Walk, 0).unwrap();
        let mut clip = w.clip.clone();
        let sample = prepare_clip(&mut clip, None, &cfg, 0).unwrap();
        assert_eq!(sample.streams, Streams::Hp);
        let obj = &sample.ohp.unwrap().tensor;
        // Missing entries carry confidence 0, encoded as -1.
        assert!((0..32).all(|t| obj.get(2, t, OBJECT_NODE) == -1.0));
    }

    #[test]
    fn constant_confidence_sampling_modes_agree() {
        let s = generate_clip(&SyntheticSpec { dropout_rate: 0.0, ..spec() }, ActionClass::Walk, 0).unwrap();
        let mut clip = s.clip.clone();
        let actor = resolve_actor(&mut clip, DEFAULT_MAX_MISSES).unwrap();
        for f in clip.frames.iter_mut() {
            for p in f.poses.iter_mut() {
                for j in p.joints.iter_mut() {
                    j.confidence = 0.7;
                }
            }
        }
        let a = sample_frames(&clip, &actor, 32, SamplingMode::Informative).unwrap();
        let b = sample_frames(&clip, &actor, 32, SamplingMode::Uniform).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn held_out_split() {
        let clips: Vec<Clip> =
            (0..10).map(|i| Clip { clip_id: format!("c{i:02}"), fps: 1.0, frames: vec![], label: Some(i % 2), size: None }).collect();
        let refs: Vec<&Clip> = clips.iter().rev().collect();
        let mask = held_out_mask(&refs);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 2);
        let held: Vec<&str> = refs.iter().zip(&mask).filter(|(_, m)| **m).map(|(c, _)| c.clip_id.as_str()).collect();
        assert_eq!(held, vec!["c09", "c08"]);
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let clips = vec![generate_clip(&spec(), ActionClass::Dump, 0).unwrap()];
        write_dataset(dir.path(), &clips, true).unwrap();
        let items = load_dataset(dir.path(), true).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].clip.label, Some(3));
        assert_eq!(items[0].video.as_ref().unwrap(), &clips[0].video);
        assert!(matches!(load_dataset(&dir.path().join("missing"), false), Err(Error::Io { .. })));
    }
}
