//! Procedural stick-figure clips for four actions: walking, talking on a
//! phone, carrying a bag, and dumping it. Each clip comes with pose
//! annotations, the object trajectory, and a rendered grayscale video.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::human_edges;
use crate::objdet::{BinaryMask, GrayFrame};
use crate::pose_io::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionClass {
    Walk,
    Phone,
    Carry,
    Dump,
}

impl ActionClass {
    pub const ALL: [ActionClass; 4] = [Self::Walk, Self::Phone, Self::Carry, Self::Dump];

    pub fn name(self) -> &'static str {
        match self {
            Self::Walk => "walk",
            Self::Phone => "phone",
            Self::Carry => "carry",
            Self::Dump => "dump",
        }
    }

    pub fn has_object(self) -> bool {
        self != Self::Walk
    }
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::Config(format!("unknown class '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub clips_per_class: usize,
    pub classes: Vec<ActionClass>,
    pub frames_per_clip: usize,
    /// Background-only frames rendered before the annotated frames.
    pub warmup_frames: usize,
    pub width: usize,
    pub height: usize,
    /// Standard deviation of the joint position noise, pixels.
    pub jitter_sigma: f64,
    /// Fraction of frames whose pose estimate is corrupted.
    pub dropout_rate: f64,
    /// Probability that a clip contains a second, idle person.
    pub bystander_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            clips_per_class: 125,
            classes: ActionClass::ALL.to_vec(),
            frames_per_clip: 64,
            warmup_frames: 6,
            width: 128,
            height: 96,
            jitter_sigma: 0.8,
            dropout_rate: 0.2,
            bystander_rate: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::Config(format!("jitter sigma must be non-negative, got {}", self.jitter_sigma)));
        }
        for (name, v) in [("dropout_rate", self.dropout_rate), ("bystander_rate", self.bystander_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.frames_per_clip == 0 || self.clips_per_class == 0 {
            return Err(Error::Config("frames_per_clip and clips_per_class must be positive".into()));
        }
        if self.width < 64 || self.height < 48 {
            return Err(Error::Config("image must be at least 64x48".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticClip {
    pub class: ActionClass,
    /// Pose annotations. Frame indices count from the first video frame and
    /// therefore start at `warmup_frames`.
    pub clip: Clip,
    pub video: Vec<GrayFrame>,
    /// True object center for each annotated frame.
    pub object_track: Vec<Option<(f64, f64)>>,
    /// Annotated frame position at which a dumped object is let go.
    pub release_frame: Option<usize>,
    /// Image row where dropped objects come to rest.
    pub rest_y: f64,
}

type Skeleton = [(f64, f64); NUM_JOINTS];

/// Limb angles in radians, measured from straight down and positive towards
/// the facing direction.
#[derive(Debug, Clone, Copy, Default)]
struct Limbs {
    r_shoulder: f64,
    r_elbow: f64,
    l_shoulder: f64,
    l_elbow: f64,
    r_hip: f64,
    r_knee: f64,
    l_hip: f64,
    l_knee: f64,
}

struct Figure {
    facing: f64,
    torso: f64,
}

impl Figure {
    fn dir(&self, angle: f64, len: f64) -> (f64, f64) {
        (self.facing * angle.sin() * len, angle.cos() * len)
    }

    fn pose(&self, root: (f64, f64), limbs: &Limbs) -> Skeleton {
        let l = self.torso;
        let f = self.facing;
        let add = |a: (f64, f64), b: (f64, f64)| (a.0 + b.0, a.1 + b.1);
        let mut s = [(0.0, 0.0); NUM_JOINTS];
        s[MID_HIP] = root;
        s[NECK] = add(root, (0.0, -l));
        s[NOSE] = add(s[NECK], (f * 0.12 * l, -0.38 * l));
        s[R_EYE] = add(s[NOSE], (-0.07 * l, -0.07 * l));
        s[L_EYE] = add(s[NOSE], (0.07 * l, -0.07 * l));
        s[R_EAR] = add(s[NECK], (-0.15 * l, -0.36 * l));
        s[L_EAR] = add(s[NECK], (0.15 * l, -0.36 * l));
        s[R_SHOULDER] = add(s[NECK], (-0.25 * l, 0.02 * l));
        s[L_SHOULDER] = add(s[NECK], (0.25 * l, 0.02 * l));
        s[R_ELBOW] = add(s[R_SHOULDER], self.dir(limbs.r_shoulder, 0.55 * l));
        s[R_WRIST] = add(s[R_ELBOW], self.dir(limbs.r_shoulder + limbs.r_elbow, 0.5 * l));
        s[L_ELBOW] = add(s[L_SHOULDER], self.dir(limbs.l_shoulder, 0.55 * l));
        s[L_WRIST] = add(s[L_ELBOW], self.dir(limbs.l_shoulder + limbs.l_elbow, 0.5 * l));
        s[R_HIP] = add(root, (-0.18 * l, 0.0));
        s[L_HIP] = add(root, (0.18 * l, 0.0));
        s[R_KNEE] = add(s[R_HIP], self.dir(limbs.r_hip, 0.85 * l));
        s[R_ANKLE] = add(s[R_KNEE], self.dir(limbs.r_hip - limbs.r_knee, 0.85 * l));
        s[L_KNEE] = add(s[L_HIP], self.dir(limbs.l_hip, 0.85 * l));
        s[L_ANKLE] = add(s[L_KNEE], self.dir(limbs.l_hip - limbs.l_knee, 0.85 * l));
        for (ankle, toe, small, heel) in [(L_ANKLE, L_BIG_TOE, L_SMALL_TOE, L_HEEL), (R_ANKLE, R_BIG_TOE, R_SMALL_TOE, R_HEEL)] {
            s[toe] = add(s[ankle], (f * 0.22 * l, 0.08 * l));
            s[small] = add(s[ankle], (f * 0.16 * l, 0.1 * l));
            s[heel] = add(s[ankle], (-f * 0.08 * l, 0.08 * l));
        }
        s
    }

    /// Hip height above the soles.
    fn hip_height(&self) -> f64 {
        1.78 * self.torso
    }
}

fn walk_limbs(phase: f64, amplitude: f64) -> Limbs {
    let (s, c) = (phase.sin(), phase.cos());
    Limbs {
        r_shoulder: -0.45 * amplitude * s,
        r_elbow: 0.35,
        l_shoulder: 0.45 * amplitude * s,
        l_elbow: 0.35,
        r_hip: 0.42 * amplitude * s,
        r_knee: 0.35 * amplitude * (1.0 - c) / 2.0,
        l_hip: -0.42 * amplitude * s,
        l_knee: 0.35 * amplitude * (1.0 + c) / 2.0,
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t.clamp(0.0, 1.0)
}

/// Vertical position of a dropped object `dt` frames after release.
pub fn dump_drop_y(release_y: f64, ground_y: f64, dt: f64) -> f64 {
    if dt <= 0.0 {
        return release_y;
    }
    (release_y + 0.5 * 0.5 * dt * dt).min(ground_y.max(release_y))
}

struct Motion {
    figure: Figure,
    start_x: f64,
    ground_y: f64,
    speed: f64,
    period: f64,
    phase0: f64,
}

impl Motion {
    fn root(&self, t: f64) -> (f64, f64) {
        (self.start_x + self.figure.facing * self.speed * t, self.ground_y - self.figure.hip_height())
    }

    fn rest_y(&self) -> f64 {
        self.ground_y - 4.0
    }

    fn phase(&self, t: f64) -> f64 {
        self.phase0 + 2.0 * PI * t / self.period
    }
}

/// Pose and true object position of one frame.
fn class_frame(class: ActionClass, m: &Motion, t: usize, release: usize) -> (Skeleton, Option<(f64, f64)>) {
    let tf = t as f64;
    let l = m.figure.torso;
    let f = m.figure.facing;
    let mut limbs = walk_limbs(m.phase(tf), 1.0);
    let root = m.root(tf);
    match class {
        ActionClass::Walk => (m.figure.pose(root, &limbs), None),
        ActionClass::Phone => {
            limbs.r_shoulder = 2.35;
            limbs.r_elbow = 0.0;
            let mut s = m.figure.pose(root, &limbs);
            // Bend the forearm so the hand rests at the ear.
            s[R_ELBOW] = (s[R_SHOULDER].0 + f * 0.3 * l, s[R_SHOULDER].1 + 0.25 * l);
            s[R_WRIST] = (s[R_EAR].0 + f * 0.05 * l, s[R_EAR].1 + 0.12 * l);
            let phone = (s[R_WRIST].0 - f * 0.5 * l, s[R_WRIST].1 - 0.05 * l);
            (s, Some(phone))
        }
        ActionClass::Carry => {
            // Forearm held level in front of the waist, bag hanging below it.
            limbs.r_shoulder = 0.35 + 0.04 * m.phase(tf).sin();
            limbs.r_elbow = 1.2;
            let s = m.figure.pose(root, &limbs);
            let bag = (s[R_WRIST].0 + f * 0.05 * l, s[R_WRIST].1 + 0.6 * l);
            (s, Some(bag))
        }
        ActionClass::Dump => {
            let swing = 8usize;
            let windup = release.saturating_sub(swing);
            if t < windup {
                return class_frame(ActionClass::Carry, m, t, release);
            }
            if t <= release {
                let k = (t - windup) as f64 / swing as f64;
                let (held, bag) = class_frame(ActionClass::Carry, m, t, release);
                let bag = bag.expect("carried bag");
                limbs.r_shoulder = lerp(0.3, 1.7, k);
                limbs.r_elbow = 0.0;
                let mut s = m.figure.pose(root, &limbs);
                for j in [R_ELBOW, R_WRIST] {
                    s[j] = (lerp(held[j].0, s[j].0, k), lerp(held[j].1, s[j].1, k));
                }
                let off = (lerp(bag.0 - held[R_WRIST].0, f * 0.6 * l, k), lerp(bag.1 - held[R_WRIST].1, 0.0, k));
                return (s, Some((s[R_WRIST].0 + off.0, s[R_WRIST].1 + off.1)));
            }
            let at_release = class_frame(ActionClass::Dump, m, release, release).1.expect("held at release");
            let dt = (t - release) as f64;
            let x = at_release.0 + f * 0.6 * dt.min(10.0);
            let y = dump_drop_y(at_release.1, m.rest_y(), dt);
            (m.figure.pose(root, &limbs), Some((x, y)))
        }
    }
}

/// Adds jitter and confidences. Corrupted frames lose or displace about half
/// of their joints.
fn observe(rng: &mut ChaCha8Rng, skeleton: &Skeleton, jitter: &Normal<f64>, corrupted: bool, conf: (f64, f64), torso: f64) -> Pose {
    let mut joints = [Joint2D::missing(); NUM_JOINTS];
    for (j, &(x, y)) in joints.iter_mut().zip(skeleton) {
        let (x, y) = (x + jitter.sample(rng), y + jitter.sample(rng));
        *j = if corrupted && rng.gen_bool(0.5) {
            if rng.gen_bool(0.5) {
                Joint2D::missing()
            } else {
                let dx = rng.gen_range(-0.8..0.8) * torso;
                let dy = rng.gen_range(-0.8..0.8) * torso;
                Joint2D::new(x + dx, y + dy, rng.gen_range(0.05..0.2))
            }
        } else if corrupted {
            Joint2D::new(x, y, rng.gen_range(0.25..0.5))
        } else {
            Joint2D::new(x, y, rng.gen_range(conf.0..conf.1))
        };
    }
    Pose::new(joints)
}

fn paint(frame: &mut GrayFrame, mask: &BinaryMask, value: u8) {
    for (p, &on) in frame.data.iter_mut().zip(&mask.data) {
        if on {
            *p = value;
        }
    }
}

fn draw_figure(frame: &mut GrayFrame, s: &Skeleton, radius: f64, value: u8) {
    let mut mask = BinaryMask::new(frame.width, frame.height);
    for &(x, y) in s {
        mask.fill_disk(x, y, radius);
    }
    for (a, b) in human_edges() {
        mask.fill_capsule(s[a], s[b], radius);
    }
    paint(frame, &mask, value);
}

fn draw_box(frame: &mut GrayFrame, c: (f64, f64), half: f64, value: u8) {
    let x0 = (c.0 - half).round().max(0.0) as usize;
    let y0 = (c.1 - half).round().max(0.0) as usize;
    let x1 = ((c.0 + half).round() as isize).min(frame.width as isize);
    let y1 = ((c.1 + half).round() as isize).min(frame.height as isize);
    for y in y0 as isize..y1 {
        for x in x0 as isize..x1 {
            frame.set(x as usize, y as usize, value);
        }
    }
}

fn background(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayFrame {
    let (fx, fy) = (rng.gen_range(0.03..0.08), rng.gen_range(0.03..0.08));
    let base = rng.gen_range(45.0..75.0);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v = base + 18.0 * ((x as f64 * fx).sin() + (y as f64 * fy).cos()) + rng.gen_range(-6.0..6.0);
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayFrame { width: w, height: h, data }
}

/// Generates one clip. Deterministic in `(spec, class, index)`.
pub fn generate_clip(spec: &SyntheticSpec, class: ActionClass, index: usize) -> Result<SyntheticClip> {
    spec.validate()?;
    let label = spec.classes.iter().position(|c| *c == class).ok_or_else(|| Error::Config(format!("class {class} not in spec")))?;
    let clip_seed = spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((label as u64) << 32 | index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(clip_seed);
    let (w, h) = (spec.width as f64, spec.height as f64);
    let frames = spec.frames_per_clip;

    let torso = h * rng.gen_range(0.17..0.21);
    let facing = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let speed = rng.gen_range(0.5..1.1) * w / (frames as f64 * 1.6);
    let travel = speed * frames as f64;
    let margin = 0.5 * torso + 4.0;
    let span = (w - 2.0 * margin - travel).max(0.0);
    let left = margin + rng.gen_range(0.0..=span);
    let start_x = if facing > 0.0 { left } else { left + travel };
    let ground_y = h - rng.gen_range(3.0..8.0);
    let motion = Motion {
        figure: Figure { facing, torso },
        start_x,
        ground_y,
        speed,
        period: rng.gen_range(14.0..22.0),
        phase0: rng.gen_range(0.0..2.0 * PI),
    };
    let release = rng.gen_range(frames * 2 / 5..=frames * 3 / 5);

    let bystander = if rng.gen_bool(spec.bystander_rate) {
        let bt = torso * 0.7;
        let bx = rng.gen_range(bt..w - bt);
        Some(Motion {
            figure: Figure { facing: -facing, torso: bt },
            start_x: bx,
            ground_y: ground_y - 0.45 * h,
            speed: 0.0,
            period: rng.gen_range(20.0..30.0),
            phase0: rng.gen_range(0.0..2.0 * PI),
        })
    } else {
        None
    };

    let jitter = Normal::new(0.0, spec.jitter_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let bg = background(&mut rng, spec.width, spec.height);
    let person_value = rng.gen_range(165..195u8);
    let object_value = rng.gen_range(230..=255u8);
    let radius = (0.15 * torso).max(3.0) - 1.0;

    let mut video = Vec::with_capacity(spec.warmup_frames + frames);
    let noisy = |rng: &mut ChaCha8Rng| {
        let mut f = bg.clone();
        for p in &mut f.data {
            *p = (*p as i16 + rng.gen_range(-3..=3)).clamp(0, 255) as u8;
        }
        f
    };
    for _ in 0..spec.warmup_frames {
        video.push(noisy(&mut rng));
    }
    let mut clip_frames = Vec::with_capacity(frames);
    let mut object_track = Vec::with_capacity(frames);
    for t in 0..frames {
        let (skeleton, object) = class_frame(class, &motion, t, release);
        let mut img = noisy(&mut rng);
        let mut poses = Vec::new();
        if let Some(b) = &bystander {
            let s = b.figure.pose(b.root(t as f64), &walk_limbs(b.phase(t as f64), 0.4));
            draw_figure(&mut img, &s, (0.15 * b.figure.torso).max(3.0) - 1.0, person_value - 25);
            poses.push(observe(&mut rng, &s, &jitter, false, (0.3, 0.5), b.figure.torso));
        }
        draw_figure(&mut img, &skeleton, radius, person_value);
        if let Some(c) = object {
            draw_box(&mut img, c, 0.3 * torso, object_value);
        }
        let corrupted = rng.gen_bool(spec.dropout_rate);
        let actor = observe(&mut rng, &skeleton, &jitter, corrupted, (0.65, 0.95), torso);
        // The bystander, when present, is listed first half of the time.
        if rng.gen_bool(0.5) {
            poses.push(actor);
        } else {
            poses.insert(0, actor);
        }
        video.push(img);
        clip_frames.push(Frame { index: (spec.warmup_frames + t) as u64, poses, object: object.map(|(cx, cy)| FrameObject { cx, cy }) });
        object_track.push(object);
    }
    let clip = Clip {
        clip_id: format!("{}_{:04}", class.name(), index),
        fps: 25.0,
        frames: clip_frames,
        label: Some(label),
        size: Some((spec.width as u32, spec.height as u32)),
    };
    Ok(SyntheticClip {
        class,
        clip,
        video,
        object_track,
        release_frame: (class == ActionClass::Dump).then_some(release),
        rest_y: motion.rest_y(),
    })
}

/// Every clip of the spec, class by class.
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<SyntheticClip>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.classes.len() * spec.clips_per_class);
    for &class in &spec.classes {
        for i in 0..spec.clips_per_class {
            out.push(generate_clip(spec, class, i)?);
        }
    }
    Ok(out)
}

/// Held-out membership: every fifth clip of each class.
pub fn is_held_out(index: usize) -> bool {
    index % 5 == 4
}
