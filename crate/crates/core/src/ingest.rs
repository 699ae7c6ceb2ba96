//! Parsing of raw skeleton dataset files and sequence-level preprocessing:
//! two-person frame splitting and first-frame translation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{ReferenceJoint, SkeletonFormat};
use crate::sequence::{SequenceError, SkeletonSequence};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unexpected end of file at line {line}: expected {expected}")]
    Truncated { line: usize, expected: String },
    #[error("line {line}: expected {expected} fields, got {got}")]
    FieldCount {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: non-numeric token '{token}'")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: trailing content after the declared {frames} frames")]
    TrailingContent { line: usize, frames: usize },
    #[error("frame {frame} has {count} bodies, at most 2 are supported")]
    TooManyBodies { frame: usize, count: usize },
    #[error("frame {frame} body {body} has {got} joints, expected {expected}")]
    JointCountMismatch {
        frame: usize,
        body: String,
        expected: usize,
        got: usize,
    },
    #[error("no frames left after dropping all-zero frames")]
    AllFramesZero,
    #[error("document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("document format id '{document}' does not match requested format '{requested}'")]
    FormatMismatch { document: String, requested: String },
    #[error("frame {frame}, joint {joint}: {detail}")]
    BadCoordinate {
        frame: usize,
        joint: usize,
        detail: String,
    },
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// One tracked body within one frame of a raw capture file.
///
/// Only the joint positions are consumed downstream; the remaining per-joint
/// numeric fields (depth/color coordinates, orientation, tracking state) are
/// retained as parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct RawBodyFrame {
    pub body_id: String,
    /// Per-joint `(x, y, z)` camera-space positions in meters.
    pub joints: Vec<[f64; 3]>,
    /// The nine remaining numeric fields of each joint line.
    pub extras: Vec<[f64; 9]>,
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines(),
            line: 0,
        }
    }

    fn next(&mut self, expected: &str) -> Result<(usize, &'a str), IngestError> {
        loop {
            self.line += 1;
            match self.iter.next() {
                Some(l) if l.trim().is_empty() => continue,
                Some(l) => return Ok((self.line, l)),
                None => {
                    return Err(IngestError::Truncated {
                        line: self.line,
                        expected: expected.to_string(),
                    });
                }
            }
        }
    }

    fn rest_is_blank(&mut self) -> Option<usize> {
        for l in self.iter.by_ref() {
            self.line += 1;
            if !l.trim().is_empty() {
                return Some(self.line);
            }
        }
        None
    }
}

fn parse_int(token: &str, line: usize) -> Result<usize, IngestError> {
    token.parse().map_err(|_| IngestError::NonNumeric {
        line,
        token: token.to_string(),
    })
}

fn parse_real(token: &str, line: usize) -> Result<f64, IngestError> {
    token.parse().map_err(|_| IngestError::NonNumeric {
        line,
        token: token.to_string(),
    })
}

/// Parse an NTU `.skeleton` text file into per-frame body lists.
///
/// Layout: line 1 is the frame count; each frame starts with its body
/// count; each body has one 10-field info line (body id plus 9 tracking
/// fields), a joint-count line, and one 12-field line per joint
/// (`x y z depthX depthY colorX colorY orientW orientX orientY orientZ
/// trackingState`). Decimal-point reals, whitespace-delimited.
pub fn parse_ntu_skeleton(bytes: &[u8]) -> Result<Vec<Vec<RawBodyFrame>>, IngestError> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines = Lines::new(&text);

    let (line, count_line) = lines.next("frame count")?;
    let frame_count = parse_int(count_line.trim(), line)?;

    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let (line, body_count_line) = lines.next("body count")?;
        let body_count = parse_int(body_count_line.trim(), line)?;

        let mut bodies = Vec::with_capacity(body_count);
        for _ in 0..body_count {
            let (line, info) = lines.next("body info line")?;
            let fields: Vec<&str> = info.split_whitespace().collect();
            if fields.len() != 10 {
                return Err(IngestError::FieldCount {
                    line,
                    expected: 10,
                    got: fields.len(),
                });
            }
            // The 9 tracking fields are validated as numeric but not kept.
            for token in &fields[1..] {
                parse_real(token, line)?;
            }
            let body_id = fields[0].to_string();

            let (line, joint_count_line) = lines.next("joint count")?;
            let joint_count = parse_int(joint_count_line.trim(), line)?;

            let mut joints = Vec::with_capacity(joint_count);
            let mut extras = Vec::with_capacity(joint_count);
            for _ in 0..joint_count {
                let (line, joint_line) = lines.next("joint line")?;
                let fields: Vec<&str> = joint_line.split_whitespace().collect();
                if fields.len() != 12 {
                    return Err(IngestError::FieldCount {
                        line,
                        expected: 12,
                        got: fields.len(),
                    });
                }
                let mut values = [0.0f64; 12];
                for (slot, token) in values.iter_mut().zip(&fields) {
                    *slot = parse_real(token, line)?;
                }
                joints.push([values[0], values[1], values[2]]);
                extras.push(values[3..12].try_into().unwrap());
            }
            bodies.push(RawBodyFrame {
                body_id,
                joints,
                extras,
            });
        }
        frames.push(bodies);
    }

    if let Some(line) = lines.rest_is_blank() {
        return Err(IngestError::TrailingContent {
            line,
            frames: frame_count,
        });
    }
    Ok(frames)
}

/// Split multi-body frames into a single-body sequence.
///
/// A frame with two bodies becomes two consecutive output frames, bodies
/// ordered by ascending body id, so a uniformly two-body input of length T
/// yields length 2T. Frames with no bodies contribute nothing; frames with
/// more than two are rejected. Each output frame's body track records the
/// source body id.
pub fn split_bodies(
    frames: &[Vec<RawBodyFrame>],
    format: &SkeletonFormat,
    sample_id: &str,
) -> Result<SkeletonSequence, IngestError> {
    let expected = format.joint_count();
    let mut coords = Vec::new();
    let mut body_track = Vec::new();

    for (t, bodies) in frames.iter().enumerate() {
        if bodies.len() > 2 {
            return Err(IngestError::TooManyBodies {
                frame: t,
                count: bodies.len(),
            });
        }
        let mut ordered: Vec<&RawBodyFrame> = bodies.iter().collect();
        // Ascending numeric body ids; (length, lexicographic) ordering is
        // numeric order for unsigned decimal strings.
        ordered.sort_by_key(|b| (b.body_id.len(), b.body_id.clone()));
        for body in ordered {
            if body.joints.len() != expected {
                return Err(IngestError::JointCountMismatch {
                    frame: t,
                    body: body.body_id.clone(),
                    expected,
                    got: body.joints.len(),
                });
            }
            coords.extend_from_slice(&body.joints);
            body_track.push(body.body_id.clone());
        }
    }

    SkeletonSequence::new(format.format_id(), sample_id, expected, coords, body_track)
        .map_err(IngestError::from)
}

/// Drop frames whose coordinates are all exactly zero (an artifact of some
/// capture pipelines that would poison the first-frame reference).
pub fn drop_zero_frames(seq: &SkeletonSequence) -> Result<SkeletonSequence, IngestError> {
    let joints = seq.joint_count();
    let mut coords = Vec::new();
    let mut body_track = Vec::new();
    for t in 0..seq.frame_count() {
        let frame = seq.frame(t);
        if frame.iter().all(|c| *c == [0.0, 0.0, 0.0]) {
            continue;
        }
        coords.extend_from_slice(frame);
        body_track.push(seq.body_track()[t].clone());
    }
    if coords.is_empty() {
        return Err(IngestError::AllFramesZero);
    }
    SkeletonSequence::new(seq.format_id(), seq.sample_id(), joints, coords, body_track)
        .map_err(IngestError::from)
}

/// The format's reference position in a given frame: the reference joint's
/// coordinates, or the midpoint of the reference joint pair.
pub fn reference_position(
    seq: &SkeletonSequence,
    format: &SkeletonFormat,
    frame: usize,
) -> [f64; 3] {
    match format.reference() {
        ReferenceJoint::Single(id) => seq.get(frame, id),
        ReferenceJoint::Midpoint(a, b) => {
            let pa = seq.get(frame, a);
            let pb = seq.get(frame, b);
            [
                (pa[0] + pb[0]) / 2.0,
                (pa[1] + pb[1]) / 2.0,
                (pa[2] + pb[2]) / 2.0,
            ]
        }
    }
}

/// Sequence-level translation: subtract the first frame's reference
/// position from every joint of every frame, making the output invariant
/// to the subject's initial position.
///
/// # Panics
///
/// Panics if the sequence's joint count does not match the format.
pub fn translate_by_first_frame(
    seq: &SkeletonSequence,
    format: &SkeletonFormat,
) -> SkeletonSequence {
    assert_eq!(
        seq.joint_count(),
        format.joint_count(),
        "sequence does not match format '{}'",
        format.format_id()
    );
    let r = reference_position(seq, format, 0);
    seq.map_coords(|_, _, c| [c[0] - r[0], c[1] - r[1], c[2] - r[2]])
}

// ---------------------------------------------------------------------------
// Generic interchange documents
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct GenericDoc {
    sample_id: String,
    format_id: String,
    frames: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    body_track: Option<Vec<String>>,
}

/// Parse the generic interchange document
/// `{sample_id, format_id, frames: [[[x,y,z] x J] x T]}` against a format.
///
/// Coordinates are walked individually so errors name the offending frame
/// and joint.
pub fn parse_generic_json(
    bytes: &[u8],
    format: &SkeletonFormat,
) -> Result<SkeletonSequence, IngestError> {
    let doc: GenericDoc = serde_json::from_slice(bytes)?;
    if doc.format_id != format.format_id() {
        return Err(IngestError::FormatMismatch {
            document: doc.format_id,
            requested: format.format_id().to_string(),
        });
    }

    let expected = format.joint_count();
    let frames = doc.frames.as_array().ok_or_else(|| IngestError::BadCoordinate {
        frame: 0,
        joint: 0,
        detail: "'frames' is not an array".to_string(),
    })?;

    let mut coords = Vec::with_capacity(frames.len() * expected);
    for (t, frame) in frames.iter().enumerate() {
        let joints = frame.as_array().ok_or_else(|| IngestError::BadCoordinate {
            frame: t,
            joint: 0,
            detail: "frame is not an array".to_string(),
        })?;
        if joints.len() != expected {
            return Err(IngestError::JointCountMismatch {
                frame: t,
                body: doc.sample_id.clone(),
                expected,
                got: joints.len(),
            });
        }
        for (j, joint) in joints.iter().enumerate() {
            let triple = joint
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| IngestError::BadCoordinate {
                    frame: t,
                    joint: j,
                    detail: "joint is not a 3-element array".to_string(),
                })?;
            let mut coord = [0.0f64; 3];
            for (axis, value) in coord.iter_mut().zip(triple) {
                let v = value.as_f64().ok_or_else(|| IngestError::BadCoordinate {
                    frame: t,
                    joint: j,
                    detail: format!("coordinate '{value}' is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(IngestError::BadCoordinate {
                        frame: t,
                        joint: j,
                        detail: format!("coordinate '{v}' is not finite"),
                    });
                }
                *axis = v;
            }
            coords.push(coord);
        }
    }

    let body_track = match doc.body_track {
        Some(track) => track,
        None => vec!["0".to_string(); frames.len()],
    };
    SkeletonSequence::new(format.format_id(), doc.sample_id, expected, coords, body_track)
        .map_err(IngestError::from)
}

/// Serialize a sequence to the generic interchange document (the inverse
/// of [`parse_generic_json`]).
pub fn serialize_generic_json(seq: &SkeletonSequence) -> String {
    let frames: Vec<Vec<[f64; 3]>> = (0..seq.frame_count())
        .map(|t| seq.frame(t).to_vec())
        .collect();
    let doc = GenericDoc {
        sample_id: seq.sample_id().to_string(),
        format_id: seq.format_id().to_string(),
        frames: serde_json::to_value(frames).expect("frames serialize"),
        body_track: Some(seq.body_track().to_vec()),
    };
    serde_json::to_string_pretty(&doc).expect("document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{builtin_format, BuiltinFormat};

    /// Hand-built five-joint format for split/translate unit tests.
    fn tiny_format() -> SkeletonFormat {
        use crate::format::{JointDef, PartDef, PartName, ReferenceJoint};
        let joints = (0..5)
            .map(|i| JointDef {
                joint_id: i,
                name: format!("j{i}"),
                parent_id: if i == 0 { None } else { Some(0) },
            })
            .collect();
        let parts = [
            (PartName::Spine, vec![0]),
            (PartName::LeftArm, vec![1]),
            (PartName::RightArm, vec![2]),
            (PartName::LeftLeg, vec![3]),
            (PartName::RightLeg, vec![4]),
        ]
        .map(|(part_name, ordered_joint_ids)| PartDef {
            part_name,
            ordered_joint_ids,
        });
        SkeletonFormat::new("tiny5", joints, parts, ReferenceJoint::Single(0)).unwrap()
    }

    fn ntu_fixture(frames: &[&[(&str, f64)]]) -> String {
        // Each body is (id, constant coordinate value) over 25 joints.
        let mut out = format!("{}\n", frames.len());
        for bodies in frames {
            out.push_str(&format!("{}\n", bodies.len()));
            for (id, v) in *bodies {
                out.push_str(&format!("{id} 0 0 0 0 0 0 0 0 2\n25\n"));
                for _ in 0..25 {
                    out.push_str(&format!("{v} {v} {v} 0 0 0 0 1 0 0 0 2\n"));
                }
            }
        }
        out
    }

    #[test]
    fn parses_single_body_zeros() {
        let text = ntu_fixture(&[&[("1000", 0.0)], &[("1000", 0.0)]]);
        let frames = parse_ntu_skeleton(text.as_bytes()).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].len(), 1);
        assert_eq!(frames[0][0].joints.len(), 25);
        assert!(frames[0][0].joints.iter().all(|c| *c == [0.0; 3]));
    }

    #[test]
    fn reports_truncation_with_line_number() {
        let full = ntu_fixture(&[&[("1000", 1.0)], &[("1000", 1.0)]]);
        // Declare 3 frames but provide 2.
        let truncated = full.replacen("2\n", "3\n", 1);
        match parse_ntu_skeleton(truncated.as_bytes()) {
            Err(IngestError::Truncated { line, .. }) => assert!(line > 1),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn reports_non_numeric_token_with_line_number() {
        let mut text = ntu_fixture(&[&[("1000", 0.5)]]);
        text = text.replacen("0.5 0.5 0.5", "0.5 oops 0.5", 1);
        match parse_ntu_skeleton(text.as_bytes()) {
            // Frame count, body count, body info, joint count, first joint.
            Err(IngestError::NonNumeric { line: 5, token }) => assert_eq!(token, "oops"),
            other => panic!("expected non-numeric error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_trailing_content() {
        let mut text = ntu_fixture(&[&[("1000", 0.5)]]);
        text.push_str("surprise\n");
        assert!(matches!(
            parse_ntu_skeleton(text.as_bytes()),
            Err(IngestError::TrailingContent { .. })
        ));
    }

    #[test]
    fn parses_two_body_frame() {
        let text = ntu_fixture(&[&[("1000", 1.0), ("1001", 2.0)]]);
        let frames = parse_ntu_skeleton(text.as_bytes()).unwrap();
        assert_eq!(frames[0].len(), 2);
        assert_eq!(frames[0][0].body_id, "1000");
        assert_eq!(frames[0][1].body_id, "1001");
    }

    fn body(id: &str, value: f64, joints: usize) -> RawBodyFrame {
        RawBodyFrame {
            body_id: id.to_string(),
            joints: vec![[value, value, value]; joints],
            extras: vec![[0.0; 9]; joints],
        }
    }

    #[test]
    fn split_interleaves_two_bodies() {
        let format = tiny_format();
        let frames: Vec<Vec<RawBodyFrame>> = (0..3)
            .map(|t| {
                vec![
                    body("7", 10.0 + t as f64, 5),
                    body("3", 20.0 + t as f64, 5),
                ]
            })
            .collect();
        let seq = split_bodies(&frames, &format, "two").unwrap();
        assert_eq!(seq.frame_count(), 6);
        // Ascending body id: 3 before 7 within each frame.
        let first: Vec<f64> = (0..6).map(|t| seq.get(t, 0)[0]).collect();
        assert_eq!(first, [20.0, 10.0, 21.0, 11.0, 22.0, 12.0]);
        assert_eq!(seq.body_track(), ["3", "7", "3", "7", "3", "7"]);
    }

    #[test]
    fn split_single_body_is_identity() {
        let format = tiny_format();
        let frames: Vec<Vec<RawBodyFrame>> =
            (0..5).map(|t| vec![body("1", t as f64, 5)]).collect();
        let seq = split_bodies(&frames, &format, "one").unwrap();
        assert_eq!(seq.frame_count(), 5);
        for t in 0..5 {
            assert_eq!(seq.get(t, 2), [t as f64; 3]);
        }
    }

    #[test]
    fn split_rejects_three_bodies() {
        let format = tiny_format();
        let frames = vec![vec![body("1", 0.0, 5), body("2", 0.0, 5), body("3", 0.0, 5)]];
        assert!(matches!(
            split_bodies(&frames, &format, "x"),
            Err(IngestError::TooManyBodies { frame: 0, count: 3 })
        ));
    }

    #[test]
    fn split_skips_empty_frames() {
        let format = tiny_format();
        let frames = vec![vec![body("1", 1.0, 5)], vec![], vec![body("1", 2.0, 5)]];
        let seq = split_bodies(&frames, &format, "gap").unwrap();
        assert_eq!(seq.frame_count(), 2);
    }

    #[test]
    fn translate_constant_sequence_to_origin() {
        let format = tiny_format();
        let frames = vec![vec![[1.0, 2.0, 3.0]; 5]; 4];
        let seq = SkeletonSequence::from_frames("tiny5", "c", frames).unwrap();
        let out = translate_by_first_frame(&seq, &format);
        assert!(out.coords().iter().all(|c| *c == [0.0, 0.0, 0.0]));
    }

    #[test]
    fn translate_uses_hip_midpoint_for_toyota() {
        let format = builtin_format(BuiltinFormat::Toyota13);
        let lhip = format.joint_id_by_name("left hip").unwrap();
        let rhip = format.joint_id_by_name("right hip").unwrap();
        let mut frame = vec![[0.0, 0.0, 0.0]; 13];
        frame[lhip] = [1.0, 0.0, 0.0];
        frame[rhip] = [3.0, 0.0, 0.0];
        let seq = SkeletonSequence::from_frames("toyota13", "m", vec![frame]).unwrap();
        let out = translate_by_first_frame(&seq, &format);
        assert_eq!(out.get(0, lhip), [-1.0, 0.0, 0.0]);
        assert_eq!(out.get(0, rhip), [1.0, 0.0, 0.0]);
        assert_eq!(out.get(0, 0), [-2.0, 0.0, 0.0]);
        let r = reference_position(&out, &format, 0);
        assert_eq!(r, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn drop_zero_frames_removes_leading_artifact() {
        let frames = vec![
            vec![[0.0; 3]; 5],
            vec![[1.0, 0.0, 0.0]; 5],
            vec![[0.0; 3]; 5],
        ];
        let seq = SkeletonSequence::from_frames("tiny5", "z", frames).unwrap();
        let out = drop_zero_frames(&seq).unwrap();
        assert_eq!(out.frame_count(), 1);
        assert_eq!(out.get(0, 0), [1.0, 0.0, 0.0]);

        let all_zero =
            SkeletonSequence::from_frames("tiny5", "z", vec![vec![[0.0; 3]; 5]; 2]).unwrap();
        assert!(matches!(
            drop_zero_frames(&all_zero),
            Err(IngestError::AllFramesZero)
        ));
    }

    #[test]
    fn generic_json_minimal_document() {
        let format = builtin_format(BuiltinFormat::Toyota13);
        let doc = serde_json::json!({
            "sample_id": "mini",
            "format_id": "toyota13",
            "frames": [vec![[1.0, 1.0, 1.0]; 13]],
        });
        let seq = parse_generic_json(doc.to_string().as_bytes(), &format).unwrap();
        assert_eq!(seq.frame_count(), 1);
        assert_eq!(seq.joint_count(), 13);
        assert!(seq.coords().iter().all(|c| *c == [1.0, 1.0, 1.0]));
    }

    #[test]
    fn generic_json_rejects_wrong_joint_count() {
        let format = builtin_format(BuiltinFormat::Toyota13);
        let doc = serde_json::json!({
            "sample_id": "short",
            "format_id": "toyota13",
            "frames": [vec![[1.0, 1.0, 1.0]; 12]],
        });
        assert!(matches!(
            parse_generic_json(doc.to_string().as_bytes(), &format),
            Err(IngestError::JointCountMismatch {
                expected: 13,
                got: 12,
                ..
            })
        ));
    }

    #[test]
    fn generic_json_names_bad_coordinate() {
        let format = tiny_format();
        let doc = r#"{
            "sample_id": "bad",
            "format_id": "tiny5",
            "frames": [[[0,0,0],[0,0,0],[0,null,0],[0,0,0],[0,0,0]]]
        }"#;
        match parse_generic_json(doc.as_bytes(), &format) {
            Err(IngestError::BadCoordinate { frame: 0, joint: 2, .. }) => {}
            other => panic!("expected named bad coordinate, got {other:?}"),
        }
    }

    #[test]
    fn generic_json_round_trips() {
        let format = tiny_format();
        let frames = vec![
            vec![[0.5, -1.25, 2.0]; 5],
            vec![[3.0, 4.5, -6.75]; 5],
        ];
        let seq = SkeletonSequence::from_frames("tiny5", "rt", frames).unwrap();
        let doc = serialize_generic_json(&seq);
        let back = parse_generic_json(doc.as_bytes(), &format).unwrap();
        assert_eq!(back, seq);
    }
}
