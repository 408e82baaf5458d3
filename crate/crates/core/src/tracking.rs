//! Tracking by detection: poses in consecutive frames are linked to tracks by
//! a minimum-cost assignment over mean joint distances.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pose_io::{Clip, Pose};

pub const DEFAULT_MAX_MISSES: u32 = 10;
/// Gate as a multiple of the torso length of a track's last pose.
pub const GATE_TORSO_FACTOR: f64 = 2.0;

/// Mean Euclidean distance over joints confident in both poses, capped at
/// `gate`. Poses with no shared confident joint cost `gate`.
pub fn pose_cost(a: &Pose, b: &Pose, gate: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, q) in a.joints.iter().zip(&b.joints) {
        if p.is_present() && q.is_present() {
            sum += ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
            count += 1;
        }
    }
    if count == 0 {
        return gate;
    }
    (sum / count as f64).min(gate)
}

/// Row-major costs with a per-row gate. Entries are clipped to their row's
/// gate, and pairs at the gate are infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    gates: Vec<f64>,
}

impl CostMatrix {
    /// Ungated matrix. Panics if `data.len() != rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self::with_gates(rows, cols, data, vec![f64::INFINITY; rows])
    }

    pub fn with_gates(rows: usize, cols: usize, mut data: Vec<f64>, gates: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix size");
        assert_eq!(gates.len(), rows, "gate count");
        for (r, g) in gates.iter().enumerate() {
            for v in &mut data[r * cols..(r + 1) * cols] {
                *v = v.min(*g);
            }
        }
        Self { rows, cols, data, gates }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn gate(&self, r: usize) -> f64 {
        self.gates[r]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column matched to each row after dropping gated pairs.
    pub row_to_col: Vec<Option<usize>>,
    /// Cost of the full `min(rows, cols)` matching, gated pairs included.
    pub total: f64,
}

impl Assignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col.iter().enumerate().filter_map(|(r, c)| c.map(|c| (r, c)))
    }
}

/// Minimum-cost assignment on a square matrix with `n` rows, `O(n^3)`.
/// Returns the column of each row.
fn solve_square(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // Potentials formulation, 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

fn min_cost(n: usize, cost: &impl Fn(usize, usize) -> f64) -> f64 {
    solve_square(n, cost).iter().enumerate().map(|(r, &c)| cost(r, c)).sum()
}

/// Minimum-cost matching of `min(rows, cols)` pairs. Among optimal matchings
/// the lexicographically smallest row-to-column sequence is returned, with
/// unmatched rows ordered after every column. Pairs at their row's gate are
/// then dropped.
pub fn hungarian(cost: &CostMatrix) -> Assignment {
    let (rows, cols) = (cost.rows, cost.cols);
    if rows == 0 || cols == 0 {
        return Assignment { row_to_col: vec![None; rows], total: 0.0 };
    }
    // Pad to square with zero-cost dummy rows or columns.
    let n = rows.max(cols);
    let padded = |r: usize, c: usize| if r < rows && c < cols { cost.get(r, c) } else { 0.0 };
    let best = min_cost(n, &padded);
    let tol = 1e-9 * (1.0 + best.abs());

    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut acc = 0.0;
    for r in 0..n {
        let rest_rows: Vec<usize> = (r + 1..n).collect();
        let mut chosen = None;
        for c in (0..n).filter(|&c| !used[c]) {
            let rest_cols: Vec<usize> = (0..n).filter(|&k| !used[k] && k != c).collect();
            let sub = |i: usize, j: usize| padded(rest_rows[i], rest_cols[j]);
            let rest = if rest_rows.is_empty() { 0.0 } else { min_cost(rest_rows.len(), &sub) };
            if acc + padded(r, c) + rest <= best + tol {
                chosen = Some(c);
                break;
            }
        }
        let c = chosen.expect("an optimal completion always exists");
        acc += padded(r, c);
        used[c] = true;
        fixed.push(c);
    }

    let mut total = 0.0;
    let mut row_to_col = vec![None; rows];
    for (r, slot) in row_to_col.iter_mut().enumerate() {
        let c = fixed[r];
        if c < cols {
            let v = cost.get(r, c);
            total += v;
            if v < cost.gate(r) {
                *slot = Some(c);
            }
        }
    }
    Assignment { row_to_col, total }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u32,
    pub poses: BTreeMap<u64, Pose>,
    pub last_seen: u64,
    pub misses: u32,
}

impl Track {
    pub fn last_pose(&self) -> &Pose {
        self.poses.values().next_back().expect("tracks are never empty")
    }

    pub fn gate(&self) -> f64 {
        (GATE_TORSO_FACTOR * self.last_pose().scale()).max(1.0)
    }

    pub fn confidence_total(&self) -> f64 {
        self.poses.values().map(Pose::confidence_sum).sum()
    }
}

/// Online tracker. Tracks unmatched for `max_misses` consecutive frames are
/// retired and kept for later inspection.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub active: Vec<Track>,
    pub retired: Vec<Track>,
    pub max_misses: u32,
    next_id: u32,
}

impl Default for Tracker {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_MISSES)
    }
}

impl Tracker {
    pub fn new(max_misses: u32) -> Self {
        Self { active: Vec::new(), retired: Vec::new(), max_misses, next_id: 0 }
    }

    /// Links `detections` seen at `frame_index` and returns the track id given
    /// to each detection.
    pub fn track_step(&mut self, detections: &[Pose], frame_index: u64) -> Vec<u32> {
        let gates: Vec<f64> = self.active.iter().map(Track::gate).collect();
        let mut data = Vec::with_capacity(self.active.len() * detections.len());
        for (t, g) in self.active.iter().zip(&gates) {
            data.extend(detections.iter().map(|d| pose_cost(t.last_pose(), d, *g)));
        }
        let assignment = hungarian(&CostMatrix::with_gates(self.active.len(), detections.len(), data, gates));

        let mut ids = vec![u32::MAX; detections.len()];
        for (r, track) in self.active.iter_mut().enumerate() {
            match assignment.row_to_col[r] {
                Some(c) => {
                    let mut pose = detections[c].clone();
                    pose.person_id = Some(track.track_id);
                    track.poses.insert(frame_index, pose);
                    track.last_seen = frame_index;
                    track.misses = 0;
                    ids[c] = track.track_id;
                }
                None => track.misses += 1,
            }
        }
        for (c, det) in detections.iter().enumerate() {
            if ids[c] == u32::MAX {
                let id = self.next_id;
                self.next_id += 1;
                let mut pose = det.clone();
                pose.person_id = Some(id);
                self.active.push(Track { track_id: id, poses: BTreeMap::from([(frame_index, pose)]), last_seen: frame_index, misses: 0 });
                ids[c] = id;
            }
        }
        let max = self.max_misses;
        let (keep, gone): (Vec<Track>, Vec<Track>) = std::mem::take(&mut self.active).into_iter().partition(|t| t.misses < max);
        self.active = keep;
        self.retired.extend(gone);
        ids
    }

    /// Every track seen so far, ordered by id.
    pub fn all_tracks(&self) -> Vec<Track> {
        let mut all: Vec<Track> = self.active.iter().chain(&self.retired).cloned().collect();
        all.sort_by_key(|t| t.track_id);
        all
    }
}

/// Track with the largest lifetime confidence sum, ties to the lowest id.
pub fn primary_track(tracks: &[Track]) -> Result<u32> {
    let mut best: Option<(&Track, f64)> = None;
    for t in tracks {
        let s = t.confidence_total();
        let better = match best {
            None => true,
            Some((b, bs)) => s > bs || (s == bs && t.track_id < b.track_id),
        };
        if better {
            best = Some((t, s));
        }
    }
    best.map(|(t, _)| t.track_id).ok_or(Error::NoTrack)
}

/// Runs the tracker over a clip and writes track ids into `person_id`.
pub fn annotate_clip(clip: &mut Clip, max_misses: u32) -> Vec<Track> {
    let mut tracker = Tracker::new(max_misses);
    for frame in &mut clip.frames {
        let ids = tracker.track_step(&frame.poses, frame.index);
        for (pose, id) in frame.poses.iter_mut().zip(ids) {
            pose.person_id = Some(id);
        }
    }
    tracker.all_tracks()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_io::{Joint2D, NUM_JOINTS};
    use proptest::prelude::*;

    fn pose_at(x: f64, y: f64, conf: f64) -> Pose {
        let mut joints = [Joint2D::missing(); NUM_JOINTS];
        for (k, j) in joints.iter_mut().enumerate() {
            *j = Joint2D::new(x + (k % 5) as f64 * 4.0, y + (k / 5) as f64 * 10.0, conf);
        }
        Pose::new(joints)
    }

    fn brute_force(c: &CostMatrix) -> f64 {
        fn go(c: &CostMatrix, r: usize, used: &mut Vec<bool>, left: usize) -> f64 {
            if left == 0 || r == c.rows() {
                return if left == 0 { 0.0 } else { f64::INFINITY };
            }
            let mut best = if c.rows() - r > left { go(c, r + 1, used, left) } else { f64::INFINITY };
            for j in 0..c.cols() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(c.get(r, j) + go(c, r + 1, used, left - 1));
                    used[j] = false;
                }
            }
            best
        }
        go(c, 0, &mut vec![false; c.cols()], c.rows().min(c.cols()))
    }

    #[test]
    fn cost_examples() {
        let a = pose_at(10.0, 10.0, 0.9);
        assert_eq!(pose_cost(&a, &a, 100.0), 0.0);
        let mut b = a.clone();
        for j in &mut b.joints {
            j.x += 3.0;
            j.y += 4.0;
        }
        assert!((pose_cost(&a, &b, 100.0) - 5.0).abs() < 1e-12);
        let mut c = a.clone();
        let mut d = a.clone();
        for k in 0..NUM_JOINTS {
            if k % 2 == 0 {
                c.joints[k].confidence = 0.0
            } else {
                d.joints[k].confidence = 0.0
            }
        }
        assert_eq!(pose_cost(&c, &d, 42.0), 42.0);
    }

    #[test]
    fn hungarian_examples() {
        let a = hungarian(&CostMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]));
        assert_eq!(a.row_to_col, vec![Some(0), Some(1)]);
        assert_eq!(a.total, 2.0);
        assert_eq!(hungarian(&CostMatrix::from_rows(&[vec![7.0]])).row_to_col, vec![Some(0)]);
        let tie = hungarian(&CostMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]));
        assert_eq!(tie.row_to_col, vec![Some(0), Some(1)]);
        assert_eq!(tie.total, 2.0);
    }

    #[test]
    fn rectangular_and_gated() {
        let wide = hungarian(&CostMatrix::from_rows(&[vec![5.0, 1.0, 3.0]]));
        assert_eq!(wide.row_to_col, vec![Some(1)]);
        let tall = hungarian(&CostMatrix::from_rows(&[vec![4.0], vec![2.0], vec![9.0]]));
        assert_eq!(tall.row_to_col, vec![None, Some(0), None]);
        let gated = hungarian(&CostMatrix::with_gates(2, 2, vec![1.0, 50.0, 50.0, 60.0], vec![10.0, 10.0]));
        assert_eq!(gated.row_to_col, vec![Some(0), None]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>(), integer in any::<bool>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..rows * cols)
                .map(|_| if integer { rng.gen_range(0..4) as f64 } else { rng.gen_range(0.0..100.0) })
                .collect();
            let m = CostMatrix::new(rows, cols, data);
            let a = hungarian(&m);
            prop_assert!((a.total - brute_force(&m)).abs() <= 1e-9 * (1.0 + a.total));
            let mut seen = vec![false; cols];
            for (_, c) in a.pairs() {
                prop_assert!(!seen[c]);
                seen[c] = true;
            }
            prop_assert_eq!(a.pairs().count(), rows.min(cols));
        }
    }

    #[test]
    fn new_tracks_and_extension() {
        let mut tr = Tracker::default();
        let ids = tr.track_step(&[pose_at(0.0, 0.0, 0.9), pose_at(200.0, 0.0, 0.9)], 0);
        assert_eq!(ids, vec![0, 1]);
        let ids = tr.track_step(&[pose_at(3.0, 0.0, 0.9)], 1);
        assert_eq!(ids, vec![0]);
        assert_eq!(tr.active[0].misses, 0);
        assert_eq!(tr.active[1].misses, 1);
        for f in 2..12 {
            tr.track_step(&[pose_at(3.0, 0.0, 0.9)], f);
        }
        assert_eq!(tr.active.len(), 1);
        assert_eq!(tr.retired[0].track_id, 1);
    }

    #[test]
    fn crossing_walkers_keep_identity() {
        let mut tr = Tracker::default();
        for f in 0..50u64 {
            let x = f as f64 * 4.0;
            let a = pose_at(x, 20.0, 0.9);
            let b = pose_at(200.0 - x, 140.0, 0.8);
            let dets = if f % 2 == 0 { vec![a, b] } else { vec![b, a] };
            let ids = tr.track_step(&dets, f);
            let expect = if f % 2 == 0 { vec![0, 1] } else { vec![1, 0] };
            assert_eq!(ids, expect, "frame {f}");
        }
    }

    #[test]
    fn primary_track_rule() {
        assert!(matches!(primary_track(&[]), Err(Error::NoTrack)));
        let mk = |id: u32, conf: f64, frames: u64| Track {
            track_id: id,
            poses: (0..frames).map(|f| (f, pose_at(0.0, 0.0, conf))).collect(),
            last_seen: frames - 1,
            misses: 0,
        };
        assert_eq!(primary_track(&[mk(3, 0.5, 1)]).unwrap(), 3);
        // 25 joints: 0.4 * 25 * 4 = 40 and 0.9 * 25 * 4 = 90.
        assert_eq!(primary_track(&[mk(0, 0.4, 4), mk(1, 0.9, 4)]).unwrap(), 1);
        assert_eq!(primary_track(&[mk(5, 0.5, 2), mk(2, 0.5, 2)]).unwrap(), 2);
    }
}
