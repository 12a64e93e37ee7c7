//! Multi-granularity quality filtering of 2D keypoint tracks.

use crate::CurationError;
use serde::{Deserialize, Serialize};
use std::io::BufRead;

pub const NUM_KEYPOINTS: usize = 17;

/// One frame of a detector track: bounding box, frame size, and 17 keypoints
/// as (x, y, confidence).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeypointFrame {
    pub frame_idx: u64,
    pub bbox: [f64; 4],
    pub frame_size: [f64; 2],
    pub keypoints: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_frames: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct KeypointTrack {
    pub frames: Vec<KeypointFrame>,
    /// Length of the source clip in frames; defaults to last frame index + 1.
    pub source_frames: u64,
}

impl KeypointTrack {
    pub fn new(frames: Vec<KeypointFrame>) -> Result<KeypointTrack, CurationError> {
        if frames.is_empty() {
            return Err(CurationError::MalformedTrack("empty track".into()));
        }
        for w in frames.windows(2) {
            if w[1].frame_idx <= w[0].frame_idx {
                return Err(CurationError::MalformedTrack(format!(
                    "frame indices not strictly increasing at {} -> {}",
                    w[0].frame_idx, w[1].frame_idx
                )));
            }
        }
        for f in &frames {
            if f.keypoints.len() != NUM_KEYPOINTS {
                return Err(CurationError::MalformedTrack(format!(
                    "frame {} has {} keypoints, expected {NUM_KEYPOINTS}",
                    f.frame_idx,
                    f.keypoints.len()
                )));
            }
            for kp in &f.keypoints {
                if !(0.0..=1.0).contains(&kp[2]) {
                    return Err(CurationError::MalformedTrack(format!(
                        "frame {} confidence {} out of [0,1]",
                        f.frame_idx, kp[2]
                    )));
                }
            }
        }
        let declared = frames.iter().filter_map(|f| f.source_frames).max();
        let source_frames = declared.unwrap_or_else(|| frames.last().unwrap().frame_idx + 1);
        Ok(KeypointTrack { frames, source_frames })
    }

    /// Parses one JSON record per line.
    pub fn from_jsonl<R: BufRead>(r: R) -> Result<KeypointTrack, CurationError> {
        let mut frames = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| CurationError::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: KeypointFrame = serde_json::from_str(&line)
                .map_err(|e| CurationError::Parse(format!("line {}: {e}", i + 1)))?;
            frames.push(f);
        }
        KeypointTrack::new(frames)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterCriteria {
    pub min_visible_keypoints: usize,
    pub confidence_threshold: f64,
    pub min_bbox_area_ratio: f64,
    pub min_duration_frames: usize,
    pub min_motion_coverage: f64,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        FilterCriteria {
            min_visible_keypoints: 8,
            confidence_threshold: 0.3,
            min_bbox_area_ratio: 0.10,
            min_duration_frames: 40,
            min_motion_coverage: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    MinVisibleKeypoints,
    MinBboxAreaRatio,
    MinDurationFrames,
    MinMotionCoverage,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterDecision {
    pub accept: bool,
    /// Every violated criterion, in the order the criteria are defined.
    pub reasons: Vec<RejectionReason>,
    pub criteria: FilterCriteria,
}

/// Applies every criterion and reports all violations, not just the first.
pub fn filter_track(t: &KeypointTrack, c: &FilterCriteria) -> FilterDecision {
    let mut reasons = Vec::new();

    let keypoints_ok = t.frames.iter().all(|f| {
        f.keypoints
            .iter()
            .filter(|kp| kp[2] >= c.confidence_threshold)
            .count()
            >= c.min_visible_keypoints
    });
    if !keypoints_ok {
        reasons.push(RejectionReason::MinVisibleKeypoints);
    }

    let bbox_ok = t.frames.iter().all(|f| {
        let frame_area = f.frame_size[0] * f.frame_size[1];
        let bbox_area = f.bbox[2] * f.bbox[3];
        frame_area > 0.0 && bbox_area / frame_area >= c.min_bbox_area_ratio
    });
    if !bbox_ok {
        reasons.push(RejectionReason::MinBboxAreaRatio);
    }

    if t.frames.len() < c.min_duration_frames {
        reasons.push(RejectionReason::MinDurationFrames);
    }

    let coverage = t.frames.len() as f64 / t.source_frames as f64;
    if coverage < c.min_motion_coverage {
        reasons.push(RejectionReason::MinMotionCoverage);
    }

    FilterDecision { accept: reasons.is_empty(), reasons, criteria: c.clone() }
}
