//! Detection of the object a person handles. Moving pixels come from a
//! sample-based background model, the rendered human region is removed, and
//! the remaining blobs near a wrist become object candidates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::human_edges;
use crate::pose_io::{FrameObject, Pose, L_WRIST, R_WRIST};

/// Single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyFrame);
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch { expected: (width, height), got: (data.len(), 1) });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Grayscale from interleaved RGB bytes.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::DimensionMismatch { expected: (width, height), got: (rgb.len() / 3, 1) });
        }
        let data = rgb.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect();
        Self::new(width, height, data)
    }
}

/// ITU-R BT.601 luma.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibeParams {
    pub num_samples: usize,
    /// Match radius in intensity units, inclusive.
    pub radius: u8,
    pub min_matches: usize,
    /// Update probability is `1 / subsample_factor`.
    pub subsample_factor: u32,
}

impl Default for VibeParams {
    fn default() -> Self {
        Self { num_samples: 20, radius: 20, min_matches: 2, subsample_factor: 16 }
    }
}

const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

#[derive(Debug, Clone)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    params: VibeParams,
    samples: Vec<u8>,
    rng: ChaCha8Rng,
}

impl BackgroundModel {
    /// Fills every pixel's samples with values drawn from its 8-neighborhood.
    pub fn init(frame: &GrayFrame, params: VibeParams, seed: u64) -> Result<Self> {
        if frame.width == 0 || frame.height == 0 || frame.data.is_empty() {
            return Err(Error::EmptyFrame);
        }
        if params.num_samples == 0 || params.min_matches == 0 || params.subsample_factor == 0 {
            return Err(Error::Config("ViBe parameters must be positive".into()));
        }
        let mut model = Self {
            width: frame.width,
            height: frame.height,
            params,
            samples: vec![0; frame.width * frame.height * params.num_samples],
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        for y in 0..frame.height {
            for x in 0..frame.width {
                for s in 0..params.num_samples {
                    let (nx, ny) = model.random_neighbor(x, y);
                    model.samples[(y * frame.width + x) * params.num_samples + s] = frame.get(nx, ny);
                }
            }
        }
        Ok(model)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn params(&self) -> VibeParams {
        self.params
    }

    pub fn samples_at(&self, x: usize, y: usize) -> &[u8] {
        let n = self.params.num_samples;
        let p = y * self.width + x;
        &self.samples[p * n..(p + 1) * n]
    }

    fn random_neighbor(&mut self, x: usize, y: usize) -> (usize, usize) {
        if self.width == 1 && self.height == 1 {
            return (0, 0);
        }
        loop {
            let (dx, dy) = NEIGHBORS[self.rng.gen_range(0..8)];
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                return (nx as usize, ny as usize);
            }
        }
    }

    /// Classifies `frame` and updates the model from its background pixels.
    pub fn classify_update(&mut self, frame: &GrayFrame) -> Result<BinaryMask> {
        if (frame.width, frame.height) != (self.width, self.height) {
            return Err(Error::DimensionMismatch { expected: (self.width, self.height), got: (frame.width, frame.height) });
        }
        let n = self.params.num_samples;
        let r = self.params.radius as i16;
        let mut mask = BinaryMask::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let p = y * self.width + x;
                let v = frame.data[p];
                let matches = self.samples[p * n..(p + 1) * n].iter().filter(|&&s| (s as i16 - v as i16).abs() <= r).count();
                if matches < self.params.min_matches {
                    mask.data[p] = true;
                    continue;
                }
                if self.rng.gen_range(0..self.params.subsample_factor) == 0 {
                    let s = self.rng.gen_range(0..n);
                    self.samples[p * n + s] = v;
                }
                if self.rng.gen_range(0..self.params.subsample_factor) == 0 {
                    let (nx, ny) = self.random_neighbor(x, y);
                    let s = self.rng.gen_range(0..n);
                    self.samples[(ny * self.width + nx) * n + s] = v;
                }
            }
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

pub type ForegroundMask = BinaryMask;
pub type HumanRegionMap = BinaryMask;

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Intersection over union; two empty masks give 1.
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let inter = self.data.iter().zip(&other.data).filter(|(a, b)| **a && **b).count();
        let union = self.data.iter().zip(&other.data).filter(|(a, b)| **a || **b).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    fn fill_where(&mut self, cx: f64, cy: f64, reach: f64, inside: impl Fn(f64, f64) -> bool) {
        if self.width == 0 || self.height == 0 || !cx.is_finite() || !cy.is_finite() {
            return;
        }
        let x0 = (cx - reach).floor().max(0.0) as usize;
        let y0 = (cy - reach).floor().max(0.0) as usize;
        let x1 = ((cx + reach).ceil().max(-1.0) as isize).min(self.width as isize - 1);
        let y1 = ((cy + reach).ceil().max(-1.0) as isize).min(self.height as isize - 1);
        for y in y0 as isize..=y1 {
            for x in x0 as isize..=x1 {
                if inside(x as f64, y as f64) {
                    self.set(x as usize, y as usize, true);
                }
            }
        }
    }

    /// Sets every pixel center within `radius` of `(cx, cy)`.
    pub fn fill_disk(&mut self, cx: f64, cy: f64, radius: f64) {
        self.fill_where(cx, cy, radius, |x, y| (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius);
    }

    /// Sets every pixel center within `radius` of the segment `a`-`b`.
    pub fn fill_capsule(&mut self, a: (f64, f64), b: (f64, f64), radius: f64) {
        let (mx, my) = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
        let half = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() / 2.0;
        self.fill_where(mx, my, half + radius, |x, y| segment_distance((x, y), a, b) <= radius);
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Disk radius for a pose: `max(3, 0.15 * torso)` pixels.
pub fn joint_radius(pose: &Pose) -> f64 {
    (0.15 * pose.scale()).max(3.0)
}

/// Union of disks at confident joints and capsules of the same radius along
/// skeleton edges whose endpoints are both confident.
pub fn render_human_region(poses: &[Pose], width: usize, height: usize) -> HumanRegionMap {
    let mut map = BinaryMask::new(width, height);
    for pose in poses {
        let r = joint_radius(pose);
        for j in pose.joints.iter().filter(|j| j.is_present()) {
            map.fill_disk(j.x, j.y, r);
        }
        for (a, b) in human_edges() {
            if let (Some(p), Some(q)) = (pose.joint(a), pose.joint(b)) {
                map.fill_capsule((p.x, p.y), (q.x, q.y), r);
            }
        }
    }
    map
}

/// Moving pixels not covered by the human region.
pub fn object_mask(moving: &ForegroundMask, human: &HumanRegionMap) -> Result<BinaryMask> {
    if (moving.width, moving.height) != (human.width, human.height) {
        return Err(Error::DimensionMismatch { expected: (moving.width, moving.height), got: (human.width, human.height) });
    }
    let data = moving.data.iter().zip(&human.data).map(|(m, h)| *m && !*h).collect();
    Ok(BinaryMask { width: moving.width, height: moving.height, data })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectCandidate {
    pub cx: f64,
    pub cy: f64,
    /// `(x, y, w, h)` in pixels.
    pub bbox: (usize, usize, usize, usize),
    pub area: usize,
    /// Index of the owning pose in the frame.
    pub owner: usize,
    pub owner_wrist: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandParams {
    pub min_area: usize,
    /// Hand radius as a multiple of the owner's torso length.
    pub radius_factor: f64,
    /// Fixed radius in pixels, overriding `radius_factor`.
    pub radius_px: Option<f64>,
}

impl Default for HandParams {
    fn default() -> Self {
        Self { min_area: 25, radius_factor: 1.0, radius_px: None }
    }
}

struct Component {
    area: usize,
    sum: (f64, f64),
    min: (usize, usize),
    max: (usize, usize),
}

/// 8-connected components in raster order of their first pixel.
fn components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut c = Component { area: 0, sum: (0.0, 0.0), min: (usize::MAX, usize::MAX), max: (0, 0) };
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            c.area += 1;
            c.sum.0 += x as f64;
            c.sum.1 += y as f64;
            c.min = (c.min.0.min(x), c.min.1.min(y));
            c.max = (c.max.0.max(x), c.max.1.max(y));
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if mask.data[q] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        out.push(c);
    }
    out
}

/// Blobs of at least `min_area` pixels whose centroid lies within the hand
/// radius of a wrist. Each blob goes to the closest wrist; each wrist keeps
/// its largest blob. Sorted by owner, then wrist.
pub fn extract_hand_objects(mask: &BinaryMask, poses: &[Pose], params: &HandParams) -> Vec<ObjectCandidate> {
    let mut best: Vec<ObjectCandidate> = Vec::new();
    for comp in components(mask).into_iter().filter(|c| c.area >= params.min_area) {
        let cx = comp.sum.0 / comp.area as f64;
        let cy = comp.sum.1 / comp.area as f64;
        let mut owner: Option<(usize, usize, f64)> = None;
        for (pi, pose) in poses.iter().enumerate() {
            let radius = params.radius_px.unwrap_or(params.radius_factor * pose.scale());
            for wrist in [R_WRIST, L_WRIST] {
                let Some(j) = pose.joint(wrist) else { continue };
                let d = ((j.x - cx).powi(2) + (j.y - cy).powi(2)).sqrt();
                if d <= radius && owner.is_none_or(|(_, _, bd)| d < bd) {
                    owner = Some((pi, wrist, d));
                }
            }
        }
        let Some((pi, wrist, _)) = owner else { continue };
        let cand = ObjectCandidate {
            cx,
            cy,
            bbox: (comp.min.0, comp.min.1, comp.max.0 - comp.min.0 + 1, comp.max.1 - comp.min.1 + 1),
            area: comp.area,
            owner: pi,
            owner_wrist: wrist,
        };
        match best.iter_mut().find(|b| b.owner == pi && b.owner_wrist == wrist) {
            Some(b) if cand.area > b.area => *b = cand,
            Some(_) => {}
            None => best.push(cand),
        }
    }
    best.sort_by_key(|c| (c.owner, c.owner_wrist));
    best
}

/// The largest candidate owned by pose `actor`.
pub fn actor_object(candidates: &[ObjectCandidate], actor: usize) -> Option<FrameObject> {
    candidates
        .iter()
        .filter(|c| c.owner == actor)
        .fold(None::<&ObjectCandidate>, |acc, c| match acc {
            Some(a) if a.area >= c.area => Some(a),
            _ => Some(c),
        })
        .map(|c| FrameObject { cx: c.cx, cy: c.cy })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectorParams {
    pub vibe: VibeParams,
    pub hand: HandParams,
}

/// Per-clip detector. The background model is initialized from the first
/// frame it sees.
#[derive(Debug, Clone)]
pub struct ObjectDetector {
    params: DetectorParams,
    seed: u64,
    model: Option<BackgroundModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetection {
    pub moving: ForegroundMask,
    pub objects: BinaryMask,
    pub candidates: Vec<ObjectCandidate>,
}

impl ObjectDetector {
    pub fn new(params: DetectorParams, seed: u64) -> Self {
        Self { params, seed, model: None }
    }

    pub fn process(&mut self, frame: &GrayFrame, poses: &[Pose]) -> Result<FrameDetection> {
        let model = match &mut self.model {
            Some(m) => m,
            None => self.model.insert(BackgroundModel::init(frame, self.params.vibe, self.seed)?),
        };
        let moving = model.classify_update(frame)?;
        let human = render_human_region(poses, frame.width, frame.height);
        let objects = object_mask(&moving, &human)?;
        let candidates = extract_hand_objects(&objects, poses, &self.params.hand);
        Ok(FrameDetection { moving, objects, candidates })
    }
}

/// Reads a binary PGM (P5) image with maxval below 256.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayFrame> {
    let bad = |m: &str| Error::Schema(format!("pgm: {m}"));
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(bad("not a P5 file"));
    }
    let mut num = || -> Result<usize> { token()?.parse().map_err(|_| bad("bad header number")) };
    let (w, h, maxval) = (num()?, num()?, num()?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be 1..=255"));
    }
    let start = pos + 1;
    let end = start + w * h;
    if end > bytes.len() {
        return Err(bad("truncated pixel data"));
    }
    GrayFrame::new(w, h, bytes[start..end].to_vec())
}

pub fn write_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.data);
    out
}

/// Raw grayscale video: width, height and frame count as little-endian u32,
/// then the frames back to back.
pub fn read_rawgs(bytes: &[u8]) -> Result<Vec<GrayFrame>> {
    let bad = |m: &str| Error::Schema(format!("rawgs: {m}"));
    if bytes.len() < 12 {
        return Err(bad("truncated header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
    let (w, h, n) = (word(0), word(1), word(2));
    if w == 0 || h == 0 {
        return Err(Error::EmptyFrame);
    }
    let size = w.checked_mul(h).ok_or_else(|| bad("dimensions overflow"))?;
    if n.checked_mul(size).and_then(|s| s.checked_add(12)) != Some(bytes.len()) {
        return Err(bad("length does not match header"));
    }
    bytes[12..].chunks_exact(size).map(|c| GrayFrame::new(w, h, c.to_vec())).collect()
}

pub fn write_rawgs(frames: &[GrayFrame]) -> Result<Vec<u8>> {
    let first = frames.first().ok_or(Error::EmptyFrame)?;
    let mut out = Vec::with_capacity(12 + frames.len() * first.data.len());
    for v in [first.width, first.height, frames.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for f in frames {
        if (f.width, f.height) != (first.width, first.height) {
            return Err(Error::DimensionMismatch { expected: (first.width, first.height), got: (f.width, f.height) });
        }
        out.extend_from_slice(&f.data);
    }
    Ok(out)
}
