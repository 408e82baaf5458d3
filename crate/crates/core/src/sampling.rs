//! Frame sampling: equal-interval segmentation, per-segment selection of the
//! most reliable frame, the uniform baseline, and actor selection.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::pose_io::{Clip, Frame};

/// Default number of sampled frames per clip.
pub const DEFAULT_SEGMENTS: usize = 32;

/// `T` disjoint, ordered, non-empty frame ranges covering `0..num_frames`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentPlan {
    pub boundaries: Vec<Range<usize>>,
}

impl SegmentPlan {
    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    pub fn num_frames(&self) -> usize {
        self.boundaries.last().map_or(0, |r| r.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    pub frame_index: usize,
    pub score: f64,
}

/// Splits `num_frames` into `segments` ranges whose lengths differ by at most
/// one, longer ranges first. Boundary `i` sits at `ceil(i * num_frames / segments)`.
pub fn plan_segments(num_frames: usize, segments: usize) -> Result<SegmentPlan> {
    if segments == 0 || segments > num_frames {
        return Err(Error::TooFewFrames { num_frames, segments });
    }
    let edge = |i: usize| (i * num_frames).div_ceil(segments);
    Ok(SegmentPlan { boundaries: (0..segments).map(|i| edge(i)..edge(i + 1)).collect() })
}

/// Picks, in each segment, the frame whose score is highest. Ties go to the
/// earliest frame.
pub fn select_by_score(scores: &[f64], plan: &SegmentPlan) -> Vec<usize> {
    plan.boundaries
        .iter()
        .map(|seg| {
            let mut best = seg.start;
            for m in seg.clone() {
                if scores[m] > scores[best] {
                    best = m;
                }
            }
            best
        })
        .collect()
}

/// Confidence sum of the actor in every frame; frames without the actor score 0.
pub fn actor_scores(clip: &Clip, actor: &[Option<usize>]) -> Vec<FrameScore> {
    clip.frames
        .iter()
        .enumerate()
        .map(|(i, f)| FrameScore {
            frame_index: i,
            score: actor.get(i).copied().flatten().and_then(|a| f.poses.get(a)).map_or(0.0, |p| p.confidence_sum()),
        })
        .collect()
}

/// Per segment, the frame position maximizing the actor's joint-confidence sum.
pub fn informative_select(clip: &Clip, actor: &[Option<usize>], plan: &SegmentPlan) -> Result<Vec<usize>> {
    if plan.num_frames() != clip.frames.len() {
        return Err(Error::ShapeMismatch(format!("segment plan covers {} frames, clip has {}", plan.num_frames(), clip.frames.len())));
    }
    let scores: Vec<f64> = actor_scores(clip, actor).into_iter().map(|s| s.score).collect();
    Ok(select_by_score(&scores, plan))
}

/// First frame of each equal-interval segment.
pub fn uniform_select(num_frames: usize, segments: usize) -> Result<Vec<usize>> {
    Ok(plan_segments(num_frames, segments)?.boundaries.into_iter().map(|r| r.start).collect())
}

/// Index of the pose with the largest confidence sum; ties go to the lowest index.
pub fn select_actor(frame: &Frame) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in frame.poses.iter().enumerate() {
        let s = p.confidence_sum();
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoPerson)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_io::{Joint2D, Pose, NUM_JOINTS};

    fn pose_with_sum(sum: f64) -> Pose {
        Pose::new([Joint2D::new(1.0, 1.0, sum / NUM_JOINTS as f64); NUM_JOINTS])
    }

    fn clip_with_sums(sums: &[f64]) -> Clip {
        Clip {
            clip_id: "s".into(),
            fps: 30.0,
            frames: sums.iter().enumerate().map(|(i, s)| Frame { index: i as u64, poses: vec![pose_with_sum(*s)], object: None }).collect(),
            label: None,
            size: None,
        }
    }

    #[test]
    fn segment_plans() {
        assert_eq!(plan_segments(4, 2).unwrap().boundaries, vec![0..2, 2..4]);
        assert_eq!(plan_segments(5, 2).unwrap().boundaries, vec![0..3, 3..5]);
        assert_eq!(plan_segments(3, 3).unwrap().boundaries, vec![0..1, 1..2, 2..3]);
        assert!(matches!(plan_segments(3, 4), Err(Error::TooFewFrames { .. })));
        assert!(plan_segments(3, 0).is_err());
    }

    #[test]
    fn informative_picks_segment_maxima() {
        let clip = clip_with_sums(&[0.5, 0.9, 0.3, 0.4]);
        let actor = vec![Some(0); 4];
        let plan = plan_segments(4, 2).unwrap();
        assert_eq!(informative_select(&clip, &actor, &plan).unwrap(), vec![1, 3]);
    }

    #[test]
    fn informative_ties_and_singletons() {
        let clip = clip_with_sums(&[2.0; 6]);
        let actor = vec![Some(0); 6];
        assert_eq!(informative_select(&clip, &actor, &plan_segments(6, 3).unwrap()).unwrap(), vec![0, 2, 4]);
        assert_eq!(informative_select(&clip, &actor, &plan_segments(6, 6).unwrap()).unwrap(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn uniform_picks() {
        assert_eq!(uniform_select(8, 4).unwrap(), vec![0, 2, 4, 6]);
        assert_eq!(uniform_select(8, 1).unwrap(), vec![0]);
        assert_eq!(uniform_select(5, 5).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(uniform_select(2, 3).is_err());
    }

    #[test]
    fn actor_selection() {
        let mut f = Frame { index: 0, poses: vec![pose_with_sum(12.3)], object: None };
        assert_eq!(select_actor(&f).unwrap(), 0);
        f.poses.push(pose_with_sum(17.1));
        assert_eq!(select_actor(&f).unwrap(), 1);
        f.poses = vec![pose_with_sum(5.0), pose_with_sum(5.0)];
        assert_eq!(select_actor(&f).unwrap(), 0);
        f.poses.clear();
        assert!(matches!(select_actor(&f), Err(Error::NoPerson)));
    }
}
