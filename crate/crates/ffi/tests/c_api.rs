use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use skelact::config::RunConfig;
use skelact::gcn::{save_checkpoint, Checkpoint};
use skelact::pipeline::{build_sample, classify_clip, fit_adjacency, new_two_stream, resolve_actor, sample_frames, SamplingMode};
use skelact::pose_io::clip_to_json;
use skelact::synth::{generate, SyntheticSpec};
use skelact_ffi::*;

fn spec() -> SyntheticSpec {
    SyntheticSpec { clips_per_class: 1, frames_per_clip: 40, ..SyntheticSpec::default() }
}

fn parse(json: &str) -> *mut SkClip {
    let mut clip = ptr::null_mut();
    let s = unsafe { sk_clip_parse(json.as_ptr(), json.len(), &mut clip) };
    assert_eq!(s, SkStatus::Ok);
    clip
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sk_last_error()) }.to_string_lossy().into_owned()
}

/// Writes an untrained model directory whose adjacency is fitted to `clips`.
fn write_model(dir: &Path, cfg: &RunConfig) {
    let clips = generate(&spec()).unwrap();
    let samples: Vec<_> = clips
        .iter()
        .map(|s| {
            let mut c = s.clip.clone();
            let actor = resolve_actor(&mut c, cfg.pipeline.max_misses).unwrap();
            build_sample(&c, &actor, &cfg.pipeline).unwrap()
        })
        .collect();
    let mut model = new_two_stream(4, &cfg.pipeline, cfg.fusion, 3, cfg.kernel_t).unwrap();
    fit_adjacency(&mut model, &samples, &cfg.pipeline).unwrap();
    save_checkpoint(&Checkpoint { model: model.hp, optimizer: None, seed: 3, epoch: 0 }, &dir.join("hp.ckpt")).unwrap();
    save_checkpoint(&Checkpoint { model: model.ohp.unwrap(), optimizer: None, seed: 3, epoch: 0 }, &dir.join("ohp.ckpt")).unwrap();
    std::fs::write(dir.join("run.cfg"), cfg.to_text()).unwrap();
}

#[test]
fn inference_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse("T = 16").unwrap();
    write_model(dir.path(), &cfg);
    let synthetic = generate(&spec()).unwrap();

    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { sk_model_load(path.as_ptr(), &mut model) }, SkStatus::Ok);
    assert_eq!(unsafe { sk_model_num_classes(model) }, 4);
    let (reference, _, _) = skelact::pipeline::load_model(dir.path()).unwrap();

    for s in &synthetic {
        let clip = parse(&clip_to_json(&s.clip));
        let mut probs = [0.0; 4];
        let mut class = usize::MAX;
        let mut streams = SkStreams::Hp;
        let status = unsafe { sk_model_infer(model, clip, probs.as_mut_ptr(), probs.len(), &mut class, &mut streams) };
        assert_eq!(status, SkStatus::Ok);
        let expected = classify_clip(&reference, &cfg.pipeline, &s.clip).unwrap();
        assert_eq!(probs.to_vec(), expected.probabilities);
        assert_eq!(class, expected.predicted_class);

        let mut short = [0.0; 3];
        let status = unsafe { sk_model_infer(model, clip, short.as_mut_ptr(), short.len(), ptr::null_mut(), ptr::null_mut()) };
        assert_eq!(status, SkStatus::BufferTooSmall);
        unsafe { sk_clip_free(clip) };
    }
    unsafe { sk_model_free(model) };
}

#[test]
fn sampling_matches_the_library() {
    for s in generate(&spec()).unwrap() {
        let clip = parse(&clip_to_json(&s.clip));
        assert_eq!(unsafe { sk_clip_num_frames(clip) }, 40);
        let mut c = s.clip.clone();
        let actor = resolve_actor(&mut c, 10).unwrap();
        for (mode, lib) in [(SkSampling::Informative, SamplingMode::Informative), (SkSampling::Uniform, SamplingMode::Uniform)] {
            let mut out = [0usize; 8];
            assert_eq!(unsafe { sk_clip_sample(clip, 8, mode, out.as_mut_ptr(), out.len()) }, SkStatus::Ok);
            assert_eq!(out.to_vec(), sample_frames(&c, &actor, 8, lib).unwrap().positions);
        }
        let mut out = [0usize; 100];
        assert_eq!(unsafe { sk_clip_sample(clip, 100, SkSampling::Uniform, out.as_mut_ptr(), out.len()) }, SkStatus::Data);
        unsafe { sk_clip_free(clip) };
    }
}

#[test]
fn hungarian_over_the_boundary() {
    let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
    let mut rows = [0isize; 3];
    let mut total = 0.0;
    assert_eq!(unsafe { sk_hungarian(cost.as_ptr(), 3, 3, rows.as_mut_ptr(), &mut total) }, SkStatus::Ok);
    assert_eq!(rows, [1, 0, 2]);
    assert_eq!(total, 5.0);

    let wide = [1.0, 0.0, 9.0];
    let mut one = [0isize; 1];
    assert_eq!(unsafe { sk_hungarian(wide.as_ptr(), 1, 3, one.as_mut_ptr(), ptr::null_mut()) }, SkStatus::Ok);
    assert_eq!(one, [1]);

    let tall = [1.0, 5.0, 0.5];
    let mut three = [0isize; 3];
    assert_eq!(unsafe { sk_hungarian(tall.as_ptr(), 3, 1, three.as_mut_ptr(), ptr::null_mut()) }, SkStatus::Ok);
    assert_eq!(three, [-1, -1, 0]);

    let bad = [f64::NAN];
    assert_eq!(unsafe { sk_hungarian(bad.as_ptr(), 1, 1, one.as_mut_ptr(), ptr::null_mut()) }, SkStatus::Data);
}

#[test]
fn failures_set_status_and_message() {
    let mut clip = ptr::null_mut();
    let junk = b"{\"frames\": 3}";
    assert_eq!(unsafe { sk_clip_parse(junk.as_ptr(), junk.len(), &mut clip) }, SkStatus::Schema);
    assert!(clip.is_null());
    assert!(last_error().starts_with("schema error"));

    assert_eq!(unsafe { sk_clip_parse(ptr::null(), 0, &mut clip) }, SkStatus::NullArgument);
    assert_eq!(last_error(), "json is null");

    let missing = CString::new("/nonexistent/model").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { sk_model_load(missing.as_ptr(), &mut model) }, SkStatus::Io);

    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse("T = 8").unwrap();
    write_model(dir.path(), &cfg);
    let mut bytes = std::fs::read(dir.path().join("hp.ckpt")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(dir.path().join("hp.ckpt"), bytes).unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sk_model_load(path.as_ptr(), &mut model) }, SkStatus::Checkpoint);

    unsafe {
        sk_clip_free(ptr::null_mut());
        sk_model_free(ptr::null_mut());
        assert_eq!(sk_clip_num_frames(ptr::null()), 0);
    }
    let version = unsafe { CStr::from_ptr(sk_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/skelact.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["sk_clip_parse", "sk_clip_sample", "sk_model_load", "sk_model_infer", "sk_hungarian", "sk_last_error", "SK_STATUS_OK"] {
        assert!(text.contains(name), "{name}");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
