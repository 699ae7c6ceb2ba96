//! Motion and bone modality derivation from the joint stream.
//!
//! Both keep the `T x J x 3` shape so all three streams encode to the same
//! image size: the first motion frame is zero-padded and the root joint's
//! bone is the zero vector.

use std::fmt;
use std::str::FromStr;

use crate::format::SkeletonFormat;
use crate::sequence::SkeletonSequence;

/// The three skeleton modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stream {
    #[default]
    Joint,
    Bone,
    Motion,
}

impl Stream {
    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Joint => "joint",
            Stream::Bone => "bone",
            Stream::Motion => "motion",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stream {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joint" => Ok(Stream::Joint),
            "bone" => Ok(Stream::Bone),
            "motion" => Ok(Stream::Motion),
            other => Err(format!("unknown stream '{other}', expected joint|bone|motion")),
        }
    }
}

/// Per-joint vector to the kinematic parent: `bone[t][j] = seq[t][j] -
/// seq[t][parent(j)]`, zero for the root.
///
/// # Panics
///
/// Panics if the sequence does not match the format.
pub fn bone_stream(seq: &SkeletonSequence, format: &SkeletonFormat) -> SkeletonSequence {
    assert_eq!(
        seq.joint_count(),
        format.joint_count(),
        "sequence does not match format '{}'",
        format.format_id()
    );
    seq.map_coords(|t, j, c| match format.parent_of(j) {
        None => [0.0, 0.0, 0.0],
        Some(p) => {
            let parent = seq.get(t, p);
            [c[0] - parent[0], c[1] - parent[1], c[2] - parent[2]]
        }
    })
}

/// Per-frame temporal difference: `motion[t] = seq[t] - seq[t-1]`, with the
/// first frame zero-padded.
pub fn motion_stream(seq: &SkeletonSequence) -> SkeletonSequence {
    seq.map_coords(|t, j, c| {
        if t == 0 {
            [0.0, 0.0, 0.0]
        } else {
            let prev = seq.get(t - 1, j);
            [c[0] - prev[0], c[1] - prev[1], c[2] - prev[2]]
        }
    })
}

/// Apply the selected modality derivation.
pub fn derive_stream(
    seq: &SkeletonSequence,
    format: &SkeletonFormat,
    stream: Stream,
) -> SkeletonSequence {
    match stream {
        Stream::Joint => seq.clone(),
        Stream::Bone => bone_stream(seq, format),
        Stream::Motion => motion_stream(seq),
    }
}
