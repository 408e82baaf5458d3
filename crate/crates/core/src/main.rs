use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use skelact::config::RunConfig;
use skelact::gcn::{save_checkpoint, Checkpoint};
use skelact::pipeline::{
    build_unlabeled, classify_clip, detect_objects, fit_adjacency, format_ablation, held_out_mask, labeled_samples, load_dataset,
    load_model, new_two_stream, resolve_actor, run_ablation, sample_frames, use_model_adjacency, write_clips, write_dataset, DatasetItem,
};
use skelact::pose_io::Clip;
use skelact::synth::generate;
use skelact::two_stream::{evaluate, metrics_to_jsonl, train, EpochMetrics, Sample, Streams, TwoStreamModel};
use skelact::{Error, Result};

#[derive(Parser)]
#[command(name = "skelact", version, about = "Skeleton-based action recognition with object-augmented pose graphs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Flat `key = value` run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of sampled frames per clip.
    #[arg(long = "T", global = true)]
    segments: Option<usize>,
    /// Object connection strategy: human, body, limbs or hands.
    #[arg(long, global = true)]
    strategy: Option<String>,
    /// Neighbor partitioning: uni, distance or spatial.
    #[arg(long, global = true)]
    partition: Option<String>,
    /// Stream fusion: avg or max.
    #[arg(long, global = true)]
    fusion: Option<String>,
    /// Frame sampling: informative or uniform.
    #[arg(long, global = true)]
    sampling: Option<String>,
    /// Input dataset directory.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Any other configuration key, as `key=value`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset: pose JSON, labels and rendered video.
    Synth {
        /// Skip the rendered grayscale video.
        #[arg(long)]
        no_video: bool,
    },
    /// Validate pose JSON clips and write them back in canonical form.
    Ingest,
    /// Detect handled objects from video and write annotated clips.
    Detect,
    /// Assign persistent person ids and write annotated clips.
    Track,
    /// Write the sampled frames and gate decision of every clip.
    Sample,
    /// Train both streams; writes checkpoints, the run config and metrics.
    Train,
    /// Evaluate a trained model on one split of a dataset.
    Eval {
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
    },
    /// Print class probabilities for every clip of a dataset.
    Infer {
        #[arg(long)]
        model: PathBuf,
    },
    /// Compare connection strategies under uniform and informative sampling.
    Ablate,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Split {
    Train,
    Test,
    All,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::All => "all",
        }
    }
}

fn resolve_config(g: &Global, base: Option<RunConfig>) -> Result<RunConfig> {
    let mut cfg = match (&g.config, base) {
        (Some(p), _) => RunConfig::parse(&fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
        (None, Some(b)) => b,
        (None, None) => RunConfig::default(),
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.push((k.into(), v));
        }
    };
    push("seed", g.seed.map(|s| s.to_string()));
    push("T", g.segments.map(|t| t.to_string()));
    push("strategy", g.strategy.clone());
    push("partition", g.partition.clone());
    push("fusion", g.fusion.clone());
    push("sampling", g.sampling.clone());
    push("data", g.data.as_ref().map(|p| p.display().to_string()));
    push("out", g.out.as_ref().map(|p| p.display().to_string()));
    for kv in &g.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
        overrides.push((k.trim().into(), v.trim().into()));
    }
    for (k, v) in overrides {
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg.seeded())
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write(p: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(p, contents).map_err(|e| Error::io(p, e))
}

fn json_line(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("serializable record")
}

fn clips_of(items: Vec<DatasetItem>) -> Vec<Clip> {
    items.into_iter().map(|i| i.clip).collect()
}

#[derive(Serialize)]
struct SampleRecord<'a> {
    clip_id: &'a str,
    label: Option<usize>,
    person_id: Option<u32>,
    frames: Vec<u64>,
    object_present: Vec<bool>,
    streams: Streams,
}

#[derive(Serialize)]
struct InferRecord<'a> {
    clip_id: &'a str,
    probabilities: &'a [f64],
    predicted_class: usize,
    streams_used: Streams,
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Synth { no_video } => {
            let cfg = resolve_config(g, None)?;
            let out = required(&cfg.out, "out")?;
            let clips = generate(&cfg.synth)?;
            write_dataset(out, &clips, !no_video)?;
            write(&out.join("synth.cfg"), cfg.to_text())?;
            eprintln!("wrote {} clips to {}", clips.len(), out.display());
        }
        Command::Ingest => {
            let cfg = resolve_config(g, None)?;
            let clips = clips_of(load_dataset(required(&cfg.data, "data")?, false)?);
            let out = required(&cfg.out, "out")?;
            write_clips(out, &clips.iter().collect::<Vec<_>>())?;
            let frames: usize = clips.iter().map(|c| c.frames.len()).sum();
            eprintln!("ingested {} clips, {frames} frames", clips.len());
        }
        Command::Detect => {
            let cfg = resolve_config(g, None)?;
            let items = load_dataset(required(&cfg.data, "data")?, true)?;
            let mut clips = Vec::with_capacity(items.len());
            let mut found = 0;
            for item in items {
                let mut clip = item.clip;
                let video = item.video.ok_or_else(|| Error::Schema(format!("clip {} has no video", clip.clip_id)))?;
                let actor = resolve_actor(&mut clip, cfg.pipeline.max_misses)?;
                found += detect_objects(&mut clip, &video, &actor, cfg.pipeline.detector, cfg.seed)?;
                clips.push(clip);
            }
            write_clips(required(&cfg.out, "out")?, &clips.iter().collect::<Vec<_>>())?;
            eprintln!("detected objects in {found} frames over {} clips", clips.len());
        }
        Command::Track => {
            let cfg = resolve_config(g, None)?;
            let mut clips = clips_of(load_dataset(required(&cfg.data, "data")?, false)?);
            for clip in &mut clips {
                resolve_actor(clip, cfg.pipeline.max_misses)?;
            }
            write_clips(required(&cfg.out, "out")?, &clips.iter().collect::<Vec<_>>())?;
            eprintln!("tracked {} clips", clips.len());
        }
        Command::Sample => {
            let cfg = resolve_config(g, None)?;
            let clips = clips_of(load_dataset(required(&cfg.data, "data")?, false)?);
            let out = required(&cfg.out, "out")?;
            create_dir(out)?;
            let mut lines = String::new();
            for clip in &clips {
                let mut c = clip.clone();
                let actor = resolve_actor(&mut c, cfg.pipeline.max_misses)?;
                let sampled = sample_frames(&c, &actor, cfg.pipeline.segments, cfg.pipeline.sampling)?;
                let person_id = sampled.positions.first().and_then(|&p| actor[p].and_then(|k| c.frames[p].poses[k].person_id));
                let sample = build_unlabeled(&c, &actor, &cfg.pipeline, 0)?;
                lines += &json_line(&SampleRecord {
                    clip_id: &c.clip_id,
                    label: c.label,
                    person_id,
                    frames: sampled.positions.iter().map(|&p| c.frames[p].index).collect(),
                    object_present: sampled.object_present,
                    streams: sample.streams,
                });
                lines.push('\n');
            }
            write(&out.join("samples.jsonl"), lines)?;
            eprintln!("sampled {} clips at T={}", clips.len(), cfg.pipeline.segments);
        }
        Command::Train => {
            let cfg = resolve_config(g, None)?;
            let clips = clips_of(load_dataset(required(&cfg.data, "data")?, false)?);
            let out = required(&cfg.out, "out")?;
            create_dir(out)?;
            let (samples, mask) = labeled_samples(&clips, &cfg.pipeline)?;
            let num_classes = samples.iter().map(|s| s.label).max().map_or(0, |m| m + 1).max(2);
            let (held_out, train_set): (Vec<_>, Vec<_>) = samples.into_iter().zip(&mask).partition(|(_, &t)| t);
            let mut held_out: Vec<Sample> = held_out.into_iter().map(|(s, _)| s).collect();
            let mut train_set: Vec<Sample> = train_set.into_iter().map(|(s, _)| s).collect();
            eprintln!("training on {} clips, holding out {}", train_set.len(), held_out.len());
            let mut model = new_two_stream(num_classes, &cfg.pipeline, cfg.fusion, cfg.seed, cfg.kernel_t)?;
            fit_adjacency(&mut model, &train_set, &cfg.pipeline)?;
            use_model_adjacency(&model, &mut train_set, &cfg.pipeline);
            use_model_adjacency(&model, &mut held_out, &cfg.pipeline);
            let state = train(&mut model, &train_set, &held_out, &cfg.train)?;
            let epoch = cfg.train.epochs as u32;
            save_checkpoint(&Checkpoint { model: model.hp, optimizer: Some(state.hp), seed: cfg.seed, epoch }, &out.join("hp.ckpt"))?;
            if let (Some(ohp), Some(opt)) = (model.ohp, state.ohp) {
                save_checkpoint(&Checkpoint { model: ohp, optimizer: Some(opt), seed: cfg.seed, epoch }, &out.join("ohp.ckpt"))?;
            }
            write(&out.join("run.cfg"), cfg.to_text())?;
            write(&out.join("metrics.jsonl"), metrics_to_jsonl(&state.history))?;
            for m in state.history.iter().filter(|m| m.split == "test" && m.epoch == cfg.train.epochs) {
                println!("{}", json_line(m));
            }
        }
        Command::Eval { model, split } => {
            let (net, base, epoch) = load_model(&model)?;
            let cfg = resolve_config(g, Some(base))?;
            let net = TwoStreamModel { fusion: cfg.fusion, ..net };
            let clips = clips_of(load_dataset(required(&cfg.data, "data")?, false)?);
            let (samples, mask) = labeled_samples(&clips, &cfg.pipeline)?;
            let mut chosen: Vec<Sample> = samples
                .into_iter()
                .zip(mask)
                .filter(|(_, t)| match split {
                    Split::Train => !t,
                    Split::Test => *t,
                    Split::All => true,
                })
                .map(|(s, _)| s)
                .collect();
            use_model_adjacency(&net, &mut chosen, &cfg.pipeline);
            let ev = evaluate(&net, &chosen)?;
            let m =
                EpochMetrics { stream: "fused".into(), epoch: epoch as usize, split: split.name().into(), loss: ev.loss, top1: ev.top1 };
            println!("{}", json_line(&m));
            for (k, row) in ev.confusion.iter().enumerate() {
                eprintln!("class {k}: {row:?}");
            }
        }
        Command::Infer { model } => {
            let (net, base, _) = load_model(&model)?;
            let cfg = resolve_config(g, Some(base))?;
            let net = TwoStreamModel { fusion: cfg.fusion, ..net };
            let clips = clips_of(load_dataset(required(&cfg.data, "data")?, false)?);
            for clip in &clips {
                let p = classify_clip(&net, &cfg.pipeline, clip)?;
                println!(
                    "{}",
                    json_line(&InferRecord {
                        clip_id: &clip.clip_id,
                        probabilities: &p.probabilities,
                        predicted_class: p.predicted_class,
                        streams_used: p.streams_used,
                    })
                );
            }
        }
        Command::Ablate => {
            let cfg = resolve_config(g, None)?;
            let clips = clips_of(load_dataset(required(&cfg.data, "data")?, false)?);
            let mask = held_out_mask(&clips.iter().collect::<Vec<_>>());
            let rows = run_ablation(&clips, &mask, &cfg.pipeline, &cfg.train, cfg.kernel_t, cfg.fusion)?;
            let table = format_ablation(&rows);
            print!("{table}");
            if let Some(out) = &cfg.out {
                create_dir(out)?;
                write(&out.join("ablation.md"), &table)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
