//! Pose sequence data model, the per-clip JSON format, and conversion of a
//! sampled actor skeleton sequence into the `(3, T, N)` network input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::Tensor3;

/// Joints per skeleton in the BODY_25 layout.
pub const NUM_JOINTS: usize = 25;
/// Node index of the handled object in the object-augmented graph.
pub const OBJECT_NODE: usize = 25;

pub const NOSE: usize = 0;
pub const NECK: usize = 1;
pub const R_SHOULDER: usize = 2;
pub const R_ELBOW: usize = 3;
pub const R_WRIST: usize = 4;
pub const L_SHOULDER: usize = 5;
pub const L_ELBOW: usize = 6;
pub const L_WRIST: usize = 7;
pub const MID_HIP: usize = 8;
pub const R_HIP: usize = 9;
pub const R_KNEE: usize = 10;
pub const R_ANKLE: usize = 11;
pub const L_HIP: usize = 12;
pub const L_KNEE: usize = 13;
pub const L_ANKLE: usize = 14;
pub const R_EYE: usize = 15;
pub const L_EYE: usize = 16;
pub const R_EAR: usize = 17;
pub const L_EAR: usize = 18;
pub const L_BIG_TOE: usize = 19;
pub const L_SMALL_TOE: usize = 20;
pub const L_HEEL: usize = 21;
pub const R_BIG_TOE: usize = 22;
pub const R_SMALL_TOE: usize = 23;
pub const R_HEEL: usize = 24;

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "Nose",
    "Neck",
    "RShoulder",
    "RElbow",
    "RWrist",
    "LShoulder",
    "LElbow",
    "LWrist",
    "MidHip",
    "RHip",
    "RKnee",
    "RAnkle",
    "LHip",
    "LKnee",
    "LAnkle",
    "REye",
    "LEye",
    "REar",
    "LEar",
    "LBigToe",
    "LSmallToe",
    "LHeel",
    "RBigToe",
    "RSmallToe",
    "RHeel",
];

/// A 2D keypoint. Confidence 0 marks the joint as missing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Joint2D {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Joint2D {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    pub fn missing() -> Self {
        Self::default()
    }

    pub fn is_present(&self) -> bool {
        self.confidence > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub joints: [Joint2D; NUM_JOINTS],
    pub person_id: Option<u32>,
}

impl Pose {
    pub fn new(joints: [Joint2D; NUM_JOINTS]) -> Self {
        Self { joints, person_id: None }
    }

    pub fn confidence_sum(&self) -> f64 {
        self.joints.iter().map(|j| j.confidence).sum()
    }

    pub fn joint(&self, idx: usize) -> Option<&Joint2D> {
        self.joints.get(idx).filter(|j| j.is_present())
    }

    /// Neck to mid-hip distance, or `None` when either joint is missing.
    pub fn torso_length(&self) -> Option<f64> {
        let a = self.joint(NECK)?;
        let b = self.joint(MID_HIP)?;
        Some(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt())
    }

    /// Torso length with a fallback to a third of the confident-joint
    /// bounding-box height when the neck or hip is missing.
    pub fn scale(&self) -> f64 {
        if let Some(t) = self.torso_length().filter(|t| *t > 0.0) {
            return t;
        }
        let ys: Vec<f64> = self.joints.iter().filter(|j| j.is_present()).map(|j| j.y).collect();
        if ys.len() < 2 {
            return 0.0;
        }
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / 3.0
    }
}

/// Center of the object handled in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameObject {
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub poses: Vec<Pose>,
    pub object: Option<FrameObject>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub clip_id: String,
    pub fps: f64,
    pub frames: Vec<Frame>,
    pub label: Option<usize>,
    /// Image extent in pixels, when known.
    pub size: Option<(u32, u32)>,
}

impl Clip {
    /// Position of the pose with `person_id` in every frame.
    pub fn person_positions(&self, person_id: u32) -> Vec<Option<usize>> {
        self.frames.iter().map(|f| f.poses.iter().position(|p| p.person_id == Some(person_id))).collect()
    }

    pub fn has_person_ids(&self) -> bool {
        self.frames.iter().flat_map(|f| &f.poses).any(|p| p.person_id.is_some())
    }
}

// Wire format.

#[derive(Serialize, Deserialize)]
struct ClipDoc {
    clip_id: String,
    fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<u32>,
    frames: Vec<FrameDoc>,
}

#[derive(Serialize, Deserialize)]
struct FrameDoc {
    index: i64,
    people: Vec<PersonDoc>,
    #[serde(default)]
    object: Option<FrameObject>,
}

#[derive(Serialize, Deserialize)]
struct PersonDoc {
    #[serde(default)]
    person_id: Option<i64>,
    keypoints: Vec<f64>,
}

fn pose_from_doc(doc: PersonDoc, frame_index: i64) -> Result<Pose> {
    if doc.keypoints.len() != NUM_JOINTS * 3 {
        return Err(Error::Schema(format!(
            "frame {frame_index}: expected {} keypoint values ({NUM_JOINTS} joints), got {}",
            NUM_JOINTS * 3,
            doc.keypoints.len()
        )));
    }
    let person_id = match doc.person_id {
        Some(id) if id < 0 || id > u32::MAX as i64 => return Err(Error::Schema(format!("frame {frame_index}: invalid person_id {id}"))),
        Some(id) => Some(id as u32),
        None => None,
    };
    let mut joints = [Joint2D::default(); NUM_JOINTS];
    for (j, chunk) in joints.iter_mut().zip(doc.keypoints.chunks_exact(3)) {
        let (x, y, c) = (chunk[0], chunk[1], chunk[2]);
        if !(0.0..=1.0).contains(&c) || !x.is_finite() || !y.is_finite() {
            return Err(Error::Schema(format!("frame {frame_index}: keypoint ({x}, {y}, {c}) out of domain")));
        }
        *j = Joint2D::new(x, y, c);
    }
    Ok(Pose { joints, person_id })
}

/// Parses one clip document. Frames are returned sorted by index.
pub fn parse_pose_json(bytes: &[u8]) -> Result<Clip> {
    let doc: ClipDoc = serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))?;
    if !(doc.fps > 0.0 && doc.fps.is_finite()) {
        return Err(Error::Schema(format!("fps must be positive, got {}", doc.fps)));
    }
    if doc.frames.is_empty() {
        return Err(Error::EmptyClip);
    }
    let size = match (doc.width, doc.height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => Some((w, h)),
        (None, None) => None,
        _ => return Err(Error::Schema("width and height must both be positive".into())),
    };
    let mut frames = Vec::with_capacity(doc.frames.len());
    for f in doc.frames {
        if f.index < 0 {
            return Err(Error::Schema(format!("negative frame index {}", f.index)));
        }
        if let Some(o) = &f.object {
            if !o.cx.is_finite() || !o.cy.is_finite() {
                return Err(Error::Schema(format!("frame {}: non-finite object", f.index)));
            }
        }
        let poses = f.people.into_iter().map(|p| pose_from_doc(p, f.index)).collect::<Result<Vec<_>>>()?;
        frames.push(Frame { index: f.index as u64, poses, object: f.object });
    }
    frames.sort_by_key(|f| f.index);
    if let Some(w) = frames.windows(2).find(|w| w[0].index == w[1].index) {
        return Err(Error::Schema(format!("duplicate frame index {}", w[0].index)));
    }
    Ok(Clip { clip_id: doc.clip_id, fps: doc.fps, frames, label: doc.label, size })
}

pub fn clip_to_json(clip: &Clip) -> String {
    let doc = ClipDoc {
        clip_id: clip.clip_id.clone(),
        fps: clip.fps,
        label: clip.label,
        width: clip.size.map(|s| s.0),
        height: clip.size.map(|s| s.1),
        frames: clip
            .frames
            .iter()
            .map(|f| FrameDoc {
                index: f.index as i64,
                people: f
                    .poses
                    .iter()
                    .map(|p| PersonDoc {
                        person_id: p.person_id.map(i64::from),
                        keypoints: p.joints.iter().flat_map(|j| [j.x, j.y, j.confidence]).collect(),
                    })
                    .collect(),
                object: f.object,
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("clip document serializes")
}

/// The `(3, T, N)` network input: channels x, y, confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseTensor {
    data: Tensor3,
}

impl PoseTensor {
    pub fn from_tensor(data: Tensor3) -> Result<Self> {
        let (c, _, n) = data.dims();
        if c != 3 || !(n == NUM_JOINTS || n == NUM_JOINTS + 1) {
            return Err(Error::ShapeMismatch(format!("pose tensor must be (3, T, 25|26), got {:?}", data.dims())));
        }
        Ok(Self { data })
    }

    pub fn frames(&self) -> usize {
        self.data.dims().1
    }

    pub fn nodes(&self) -> usize {
        self.data.dims().2
    }

    pub fn get(&self, c: usize, t: usize, n: usize) -> f64 {
        self.data.get(c, t, n)
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor3 {
        self.data
    }

    /// Mean pixel position of each node over the frames in which it is
    /// confident.
    pub fn mean_positions(&self) -> Vec<Option<(f64, f64)>> {
        (0..self.nodes())
            .map(|n| {
                let (mut sx, mut sy, mut k) = (0.0, 0.0, 0usize);
                for t in 0..self.frames() {
                    if self.get(2, t, n) > 0.0 {
                        sx += self.get(0, t, n);
                        sy += self.get(1, t, n);
                        k += 1;
                    }
                }
                (k > 0).then(|| (sx / k as f64, sy / k as f64))
            })
            .collect()
    }
}

/// Copies the actor skeleton of each sampled frame into a pose tensor.
///
/// `actor[i]` is the pose position of the actor in `clip.frames[i]`;
/// `sampled` holds frame positions. With `with_object` the 26th node carries
/// the frame's object center at confidence 1, or zeros when absent.
pub fn to_pose_tensor(clip: &Clip, actor: &[Option<usize>], sampled: &[usize], with_object: bool) -> Result<PoseTensor> {
    let nodes = if with_object { NUM_JOINTS + 1 } else { NUM_JOINTS };
    let t_len = sampled.len();
    if t_len == 0 {
        return Err(Error::ShapeMismatch("no sampled frames".into()));
    }
    let mut data = Tensor3::zeros(3, t_len, nodes);
    for (t, &pos) in sampled.iter().enumerate() {
        let frame = clip.frames.get(pos).ok_or(Error::IndexOutOfRange { index: pos, len: clip.frames.len() })?;
        let pose = actor.get(pos).copied().flatten().and_then(|a| frame.poses.get(a)).ok_or(Error::MissingActor(pos))?;
        for (n, j) in pose.joints.iter().enumerate() {
            if j.is_present() {
                data.set(0, t, n, j.x);
                data.set(1, t, n, j.y);
                data.set(2, t, n, j.confidence);
            }
        }
        if with_object {
            if let Some(o) = frame.object {
                data.set(0, t, OBJECT_NODE, o.cx);
                data.set(1, t, OBJECT_NODE, o.cy);
                data.set(2, t, OBJECT_NODE, 1.0);
            }
        }
    }
    PoseTensor::from_tensor(data)
}

/// Maps x, y of confident entries to `[-1, 1]`; missing entries stay zero.
pub fn normalize_coordinates(tensor: &PoseTensor, width: f64, height: f64) -> Result<PoseTensor> {
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::ZeroExtent { width, height });
    }
    let mut out = tensor.clone();
    for t in 0..tensor.frames() {
        for n in 0..tensor.nodes() {
            if tensor.get(2, t, n) > 0.0 {
                out.data.set(0, t, n, 2.0 * tensor.get(0, t, n) / width - 1.0);
                out.data.set(1, t, n, 2.0 * tensor.get(1, t, n) / height - 1.0);
            }
        }
    }
    Ok(out)
}

/// Body-centric encoding: x, y of confident entries relative to the mean
/// mid-hip and divided by the mean neck to mid-hip length; confidence mapped
/// to `[-1, 1]` by `2c - 1`. Missing entries get x = y = 0.
///
/// The hip falls back to the mean of all confident joints and the torso to a
/// third of the mean vertical extent.
pub fn body_normalize(tensor: &PoseTensor) -> Result<PoseTensor> {
    let frames = tensor.frames();
    let conf = |t: usize, n: usize| tensor.get(2, t, n) > 0.0;
    let pos = |t: usize, n: usize| (tensor.get(0, t, n), tensor.get(1, t, n));
    let mean = |pts: &[(f64, f64)]| {
        let k = pts.len() as f64;
        (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k)
    };
    let hips: Vec<_> = (0..frames).filter(|&t| conf(t, MID_HIP)).map(|t| pos(t, MID_HIP)).collect();
    let joints: Vec<_> =
        (0..frames).flat_map(|t| (0..NUM_JOINTS).map(move |n| (t, n))).filter(|&(t, n)| conf(t, n)).map(|(t, n)| pos(t, n)).collect();
    if joints.is_empty() {
        return Err(Error::DegeneratePose);
    }
    let center = mean(if hips.is_empty() { &joints } else { &hips });

    let torsos: Vec<f64> = (0..frames)
        .filter(|&t| conf(t, NECK) && conf(t, MID_HIP))
        .map(|t| (pos(t, NECK).0 - pos(t, MID_HIP).0).hypot(pos(t, NECK).1 - pos(t, MID_HIP).1))
        .collect();
    let mut scale = torsos.iter().sum::<f64>() / torsos.len().max(1) as f64;
    if scale.is_nan() || scale <= 0.0 {
        let extents: Vec<f64> = (0..frames)
            .filter_map(|t| {
                let ys: Vec<f64> = (0..NUM_JOINTS).filter(|&n| conf(t, n)).map(|n| pos(t, n).1).collect();
                (ys.len() >= 2)
                    .then(|| ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ys.iter().cloned().fold(f64::INFINITY, f64::min))
            })
            .collect();
        scale = extents.iter().sum::<f64>() / extents.len().max(1) as f64 / 3.0;
    }
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::DegeneratePose);
    }

    let mut out = tensor.clone();
    for t in 0..frames {
        for n in 0..tensor.nodes() {
            let c = tensor.get(2, t, n);
            if c > 0.0 {
                out.data.set(0, t, n, (tensor.get(0, t, n) - center.0) / scale);
                out.data.set(1, t, n, (tensor.get(1, t, n) - center.1) / scale);
            } else {
                out.data.set(0, t, n, 0.0);
                out.data.set(1, t, n, 0.0);
            }
            out.data.set(2, t, n, 2.0 * c - 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person_json(n_joints: usize, pid: Option<i64>) -> String {
        let kp: Vec<String> = (0..n_joints).flat_map(|i| [format!("{}", i * 2), format!("{}", i * 3), "0.5".into()]).collect();
        let pid = pid.map_or("null".to_string(), |p| p.to_string());
        format!(r#"{{"person_id": {pid}, "keypoints": [{}]}}"#, kp.join(","))
    }

    fn doc(frames: &[(i64, usize)]) -> String {
        let fs: Vec<String> = frames
            .iter()
            .map(|(idx, nj)| format!(r#"{{"index": {idx}, "people": [{}], "object": null}}"#, person_json(*nj, Some(0))))
            .collect();
        format!(r#"{{"clip_id": "c", "fps": 30.0, "frames": [{}]}}"#, fs.join(","))
    }

    #[test]
    fn minimal_document() {
        let clip = parse_pose_json(doc(&[(0, 25)]).as_bytes()).unwrap();
        assert_eq!(clip.frames.len(), 1);
        assert_eq!(clip.frames[0].poses.len(), 1);
        assert_eq!(clip.frames[0].poses[0].joints[3], Joint2D::new(6.0, 9.0, 0.5));
    }

    #[test]
    fn wrong_joint_count_is_schema_error() {
        let err = parse_pose_json(doc(&[(0, 24)]).as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn frames_sorted_by_index() {
        let clip = parse_pose_json(doc(&[(5, 25), (2, 25), (9, 25)]).as_bytes()).unwrap();
        let idx: Vec<u64> = clip.frames.iter().map(|f| f.index).collect();
        assert_eq!(idx, vec![2, 5, 9]);
    }

    #[test]
    fn empty_and_malformed() {
        let empty = r#"{"clip_id": "c", "fps": 30.0, "frames": []}"#;
        assert!(matches!(parse_pose_json(empty.as_bytes()), Err(Error::EmptyClip)));
        assert!(matches!(parse_pose_json(b"{\"fps\": 1}"), Err(Error::Schema(_))));
        let dup = doc(&[(1, 25), (1, 25)]);
        assert!(matches!(parse_pose_json(dup.as_bytes()), Err(Error::Schema(_))));
        let bad_conf = doc(&[(0, 25)]).replace("0.5", "1.5");
        assert!(matches!(parse_pose_json(bad_conf.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn serialize_round_trip() {
        let mut clip = parse_pose_json(doc(&[(3, 25), (1, 25)]).as_bytes()).unwrap();
        clip.frames[1].object = Some(FrameObject { cx: 0.1 + 0.2, cy: 7.25 });
        // Values whose shortest decimal form needs all 17 digits.
        clip.frames[0].poses[0].joints[4].x = 61.837_289_043_215_47;
        clip.frames[0].poses[0].joints[4].y = 1.0 / 3.0;
        clip.label = Some(2);
        let back = parse_pose_json(clip_to_json(&clip).as_bytes()).unwrap();
        assert_eq!(back, clip);
    }

    fn single_frame_clip() -> Clip {
        let mut joints = [Joint2D::default(); NUM_JOINTS];
        for (i, j) in joints.iter_mut().enumerate() {
            *j = Joint2D::new(10.0 + i as f64, 20.0 + 2.0 * i as f64, 0.9);
        }
        Clip {
            clip_id: "one".into(),
            fps: 25.0,
            frames: vec![Frame { index: 0, poses: vec![Pose::new(joints)], object: None }],
            label: None,
            size: None,
        }
    }

    #[test]
    fn tensor_copies_actor_joints() {
        let clip = single_frame_clip();
        let t = to_pose_tensor(&clip, &[Some(0)], &[0], false).unwrap();
        assert_eq!((t.frames(), t.nodes()), (1, 25));
        for n in 0..25 {
            let j = clip.frames[0].poses[0].joints[n];
            assert_eq!((t.get(0, 0, n), t.get(1, 0, n), t.get(2, 0, n)), (j.x, j.y, j.confidence));
        }
    }

    #[test]
    fn tensor_shape_with_object() {
        let mut clip = single_frame_clip();
        let frame = clip.frames[0].clone();
        clip.frames = (0..40)
            .map(|i| Frame { index: i, object: (i % 2 == 0).then_some(FrameObject { cx: 3.0, cy: 4.0 }), ..frame.clone() })
            .collect();
        let actor = vec![Some(0); 40];
        let sampled: Vec<usize> = (0..32).collect();
        let t = to_pose_tensor(&clip, &actor, &sampled, true).unwrap();
        assert_eq!(t.tensor().dims(), (3, 32, 26));
        assert_eq!((t.get(0, 0, 25), t.get(1, 0, 25), t.get(2, 0, 25)), (3.0, 4.0, 1.0));
        assert_eq!((t.get(0, 1, 25), t.get(1, 1, 25), t.get(2, 1, 25)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn tensor_errors() {
        let clip = single_frame_clip();
        assert!(matches!(to_pose_tensor(&clip, &[None], &[0], false), Err(Error::MissingActor(0))));
        assert!(matches!(to_pose_tensor(&clip, &[Some(0)], &[3], false), Err(Error::IndexOutOfRange { index: 3, .. })));
    }

    #[test]
    fn normalization_maps_extent_to_unit_box() {
        let mut data = Tensor3::zeros(3, 1, 25);
        let pts = [(0.0, 0.0), (328.0, 184.0), (656.0, 368.0)];
        for (n, (x, y)) in pts.iter().enumerate() {
            data.set(0, 0, n, *x);
            data.set(1, 0, n, *y);
            data.set(2, 0, n, 0.7);
        }
        data.set(0, 0, 3, 100.0);
        let t = PoseTensor::from_tensor(data).unwrap();
        let out = normalize_coordinates(&t, 656.0, 368.0).unwrap();
        assert_eq!((out.get(0, 0, 0), out.get(1, 0, 0)), (-1.0, -1.0));
        assert_eq!((out.get(0, 0, 1), out.get(1, 0, 1)), (0.0, 0.0));
        assert_eq!((out.get(0, 0, 2), out.get(1, 0, 2)), (1.0, 1.0));
        assert_eq!(out.get(2, 0, 2), 0.7);
        // entries with zero confidence are left untouched
        assert_eq!(out.get(0, 0, 3), 100.0);
        assert!(matches!(normalize_coordinates(&t, 0.0, 368.0), Err(Error::ZeroExtent { .. })));
    }

    #[test]
    fn body_normalization_centers_on_hip_in_torso_units() {
        let mut data = Tensor3::zeros(3, 2, 26);
        for (t, dx) in [(0, 0.0), (1, 10.0)] {
            for (n, (x, y)) in [(NECK, (100.0, 50.0)), (MID_HIP, (100.0, 70.0)), (R_WRIST, (120.0, 60.0)), (OBJECT_NODE, (80.0, 90.0))] {
                data.set(0, t, n, x + dx);
                data.set(1, t, n, y);
                data.set(2, t, n, 0.75);
            }
        }
        let out = body_normalize(&PoseTensor::from_tensor(data.clone()).unwrap()).unwrap();
        // mean hip (105, 70), torso 20
        assert_eq!((out.get(0, 0, MID_HIP), out.get(1, 0, MID_HIP)), (-0.25, 0.0));
        assert_eq!((out.get(0, 1, R_WRIST), out.get(1, 1, R_WRIST)), (1.25, -0.5));
        assert_eq!((out.get(0, 0, OBJECT_NODE), out.get(1, 0, OBJECT_NODE)), (-1.25, 1.0));
        assert_eq!(out.get(2, 0, NECK), 0.5);
        assert_eq!((out.get(0, 0, NOSE), out.get(1, 0, NOSE), out.get(2, 0, NOSE)), (0.0, 0.0, -1.0));

        // translating and scaling the input leaves the encoding unchanged
        let mut moved = data.clone();
        for t in 0..2 {
            for n in 0..26 {
                moved.set(0, t, n, 3.0 * data.get(0, t, n) - 40.0);
                moved.set(1, t, n, 3.0 * data.get(1, t, n) + 7.0);
            }
        }
        let again = body_normalize(&PoseTensor::from_tensor(moved).unwrap()).unwrap();
        for (a, b) in again.tensor().as_slice().iter().zip(out.tensor().as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }

        let empty = PoseTensor::from_tensor(Tensor3::zeros(3, 2, 25)).unwrap();
        assert!(matches!(body_normalize(&empty), Err(Error::DegeneratePose)));
    }
}
