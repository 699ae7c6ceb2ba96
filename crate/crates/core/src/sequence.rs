//! The in-memory skeleton sequence: T frames of J joints with 3D coordinates.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("sequence must contain at least one frame")]
    Empty,
    #[error("coordinate buffer holds {got} joints, expected {frames} frames x {joints} joints")]
    ShapeMismatch {
        frames: usize,
        joints: usize,
        got: usize,
    },
    #[error("non-finite coordinate at frame {frame}, joint {joint}")]
    NonFinite { frame: usize, joint: usize },
    #[error("body track has {got} entries, expected one per frame ({frames})")]
    BodyTrackLength { frames: usize, got: usize },
}

/// A skeleton action sequence: `T x J x 3` coordinates in dataset camera
/// space, tagged with its format and per-frame body provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    format_id: String,
    sample_id: String,
    joints: usize,
    /// Row-major `[t][j]` joint positions.
    coords: Vec<[f64; 3]>,
    /// Source-body label per frame (split provenance).
    body_track: Vec<String>,
}

impl SkeletonSequence {
    /// Build a sequence, validating shape and finiteness.
    pub fn new(
        format_id: impl Into<String>,
        sample_id: impl Into<String>,
        joints: usize,
        coords: Vec<[f64; 3]>,
        body_track: Vec<String>,
    ) -> Result<Self, SequenceError> {
        if coords.is_empty() || joints == 0 {
            return Err(SequenceError::Empty);
        }
        if !coords.len().is_multiple_of(joints) {
            return Err(SequenceError::ShapeMismatch {
                frames: coords.len() / joints,
                joints,
                got: coords.len(),
            });
        }
        let frames = coords.len() / joints;
        if body_track.len() != frames {
            return Err(SequenceError::BodyTrackLength {
                frames,
                got: body_track.len(),
            });
        }
        for (i, coord) in coords.iter().enumerate() {
            if coord.iter().any(|v| !v.is_finite()) {
                return Err(SequenceError::NonFinite {
                    frame: i / joints,
                    joint: i % joints,
                });
            }
        }
        Ok(SkeletonSequence {
            format_id: format_id.into(),
            sample_id: sample_id.into(),
            joints,
            coords,
            body_track,
        })
    }

    /// Build from per-frame joint lists, defaulting every frame's body
    /// label to `"0"`.
    pub fn from_frames(
        format_id: impl Into<String>,
        sample_id: impl Into<String>,
        frames: Vec<Vec<[f64; 3]>>,
    ) -> Result<Self, SequenceError> {
        let joints = frames.first().map(Vec::len).unwrap_or(0);
        for (t, frame) in frames.iter().enumerate() {
            if frame.len() != joints {
                return Err(SequenceError::ShapeMismatch {
                    frames: t,
                    joints,
                    got: frame.len(),
                });
            }
        }
        let body_track = vec!["0".to_string(); frames.len()];
        let coords = frames.into_iter().flatten().collect();
        Self::new(format_id, sample_id, joints, coords, body_track)
    }

    pub fn format_id(&self) -> &str {
        &self.format_id
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    /// Number of frames T.
    pub fn frame_count(&self) -> usize {
        self.coords.len() / self.joints
    }

    /// Number of joints J.
    pub fn joint_count(&self) -> usize {
        self.joints
    }

    pub fn get(&self, frame: usize, joint: usize) -> [f64; 3] {
        self.coords[frame * self.joints + joint]
    }

    /// All joints of one frame.
    pub fn frame(&self, frame: usize) -> &[[f64; 3]] {
        &self.coords[frame * self.joints..(frame + 1) * self.joints]
    }

    pub fn body_track(&self) -> &[String] {
        &self.body_track
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    /// Derive a same-shape sequence by mapping every `(t, j, coord)`.
    /// The result keeps the format, sample id, and body track.
    pub fn map_coords(&self, mut f: impl FnMut(usize, usize, [f64; 3]) -> [f64; 3]) -> Self {
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, &c)| f(i / self.joints, i % self.joints, c))
            .collect();
        SkeletonSequence {
            format_id: self.format_id.clone(),
            sample_id: self.sample_id.clone(),
            joints: self.joints,
            coords,
            body_track: self.body_track.clone(),
        }
    }
}
