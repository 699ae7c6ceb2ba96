//! Skeleton format definitions: joint layouts, kinematic parents, and the
//! five-part body partition that fixes the joint order of encoded images.
//!
//! A [`SkeletonFormat`] is immutable after construction and validated on
//! every construction path, so downstream code can rely on its invariants:
//! joint ids are a dense `0..J` range, the parent map is a tree with a
//! single root, and the five parts partition the joint set exactly.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The five semantic body parts, in canonical order.
///
/// This order is what [`s2i_joint_order`] concatenates, so it directly
/// determines the column layout of encoded images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartName {
    Spine,
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
}

/// Canonical part order: spine first, then arms, then legs.
pub const CANONICAL_PART_ORDER: [PartName; 5] = [
    PartName::Spine,
    PartName::LeftArm,
    PartName::RightArm,
    PartName::LeftLeg,
    PartName::RightLeg,
];

impl PartName {
    pub fn as_str(self) -> &'static str {
        match self {
            PartName::Spine => "spine",
            PartName::LeftArm => "left_arm",
            PartName::RightArm => "right_arm",
            PartName::LeftLeg => "left_leg",
            PartName::RightLeg => "right_leg",
        }
    }
}

impl fmt::Display for PartName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One joint of a skeleton format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointDef {
    /// Index into the joint axis of raw sequence data.
    pub joint_id: usize,
    pub name: String,
    /// Kinematic parent; `None` marks the tree root.
    pub parent_id: Option<usize>,
}

/// One body part: its name and the joint ids it owns, in kinematic order
/// (top-down for the spine, torso-outward for limbs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartDef {
    pub part_name: PartName,
    pub ordered_joint_ids: Vec<usize>,
}

/// The joint (or joint-pair midpoint) used as the translation reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceJoint {
    Single(usize),
    Midpoint(usize, usize),
}

/// Errors raised while constructing or loading a [`SkeletonFormat`].
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("format document is not valid JSON: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("format has no joints")]
    NoJoints,
    #[error("joint ids must be exactly 0..{expected}, got duplicate or out-of-range id {id}")]
    BadJointIds { expected: usize, id: usize },
    #[error("duplicate joint name '{0}'")]
    DuplicateJointName(String),
    #[error("unknown joint name '{name}' referenced by {context}")]
    UnknownJointName { name: String, context: String },
    #[error("joint {joint} has nonexistent parent id {parent}")]
    BadParentId { joint: usize, parent: usize },
    #[error("parent map must have exactly one root, found {0}")]
    RootCount(usize),
    #[error("parent map contains a cycle through joint {0}")]
    ParentCycle(usize),
    #[error("joint {joint} ('{name}') appears in {count} parts, expected exactly one")]
    PartitionViolation {
        joint: usize,
        name: String,
        count: usize,
    },
    #[error("part '{0}' is empty")]
    EmptyPart(PartName),
    #[error("reference joint id {0} does not exist")]
    BadReference(usize),
    #[error("unknown format '{0}'")]
    UnknownFormat(String),
}

/// A validated skeleton format.
///
/// Fields are private; construction goes through [`SkeletonFormat::new`],
/// which enforces all invariants, so a value of this type is always valid.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFormat {
    format_id: String,
    joints: Vec<JointDef>,
    parts: [PartDef; 5],
    reference: ReferenceJoint,
}

impl SkeletonFormat {
    /// Build a format from parts, validating every invariant.
    ///
    /// `parts` must be given in canonical order; `joints` may be listed in
    /// any order but their ids must cover `0..joints.len()` exactly.
    pub fn new(
        format_id: impl Into<String>,
        joints: Vec<JointDef>,
        parts: [PartDef; 5],
        reference: ReferenceJoint,
    ) -> Result<Self, FormatError> {
        let format_id = format_id.into();
        let j = joints.len();
        if j == 0 {
            return Err(FormatError::NoJoints);
        }

        // Dense unique joint ids.
        let mut seen = vec![false; j];
        for joint in &joints {
            if joint.joint_id >= j || seen[joint.joint_id] {
                return Err(FormatError::BadJointIds {
                    expected: j,
                    id: joint.joint_id,
                });
            }
            seen[joint.joint_id] = true;
        }

        // Unique names (the document schema joins parts to joints by name).
        let mut names = HashMap::with_capacity(j);
        for joint in &joints {
            if names.insert(joint.name.clone(), joint.joint_id).is_some() {
                return Err(FormatError::DuplicateJointName(joint.name.clone()));
            }
        }

        // Parent map: single root, all parents exist, no cycles.
        let mut parent_of = vec![None; j];
        let mut roots = 0usize;
        for joint in &joints {
            match joint.parent_id {
                None => roots += 1,
                Some(p) if p == joint.joint_id => roots += 1,
                Some(p) if p >= j => {
                    return Err(FormatError::BadParentId {
                        joint: joint.joint_id,
                        parent: p,
                    });
                }
                Some(p) => parent_of[joint.joint_id] = Some(p),
            }
        }
        if roots != 1 {
            return Err(FormatError::RootCount(roots));
        }
        for start in 0..j {
            // Walking to the root takes at most j-1 hops in a tree.
            let mut cursor = start;
            let mut hops = 0usize;
            while let Some(p) = parent_of[cursor] {
                cursor = p;
                hops += 1;
                if hops >= j {
                    return Err(FormatError::ParentCycle(start));
                }
            }
        }

        // Five parts in canonical order, each non-empty, partitioning 0..j.
        let mut membership = vec![0usize; j];
        for (part, &expected) in parts.iter().zip(CANONICAL_PART_ORDER.iter()) {
            debug_assert_eq!(part.part_name, expected, "parts must be in canonical order");
            if part.ordered_joint_ids.is_empty() {
                return Err(FormatError::EmptyPart(part.part_name));
            }
            for &id in &part.ordered_joint_ids {
                if id >= j {
                    return Err(FormatError::BadJointIds { expected: j, id });
                }
                membership[id] += 1;
            }
        }
        for (id, &count) in membership.iter().enumerate() {
            if count != 1 {
                let name = joints
                    .iter()
                    .find(|joint| joint.joint_id == id)
                    .map(|joint| joint.name.clone())
                    .unwrap_or_default();
                return Err(FormatError::PartitionViolation {
                    joint: id,
                    name,
                    count,
                });
            }
        }

        match reference {
            ReferenceJoint::Single(id) if id >= j => {
                return Err(FormatError::BadReference(id));
            }
            ReferenceJoint::Midpoint(a, b) if a >= j || b >= j => {
                return Err(FormatError::BadReference(a.max(b)));
            }
            _ => {}
        }

        let mut joints = joints;
        joints.sort_by_key(|joint| joint.joint_id);
        // Normalize self-parent roots to None.
        for joint in &mut joints {
            if joint.parent_id == Some(joint.joint_id) {
                joint.parent_id = None;
            }
        }

        Ok(SkeletonFormat {
            format_id,
            joints,
            parts,
            reference,
        })
    }

    pub fn format_id(&self) -> &str {
        &self.format_id
    }

    /// Number of joints J.
    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    /// Joints sorted by id.
    pub fn joints(&self) -> &[JointDef] {
        &self.joints
    }

    /// The five parts in canonical order.
    pub fn parts(&self) -> &[PartDef; 5] {
        &self.parts
    }

    pub fn reference(&self) -> ReferenceJoint {
        self.reference
    }

    /// Kinematic parent of a joint; `None` for the root.
    pub fn parent_of(&self, joint_id: usize) -> Option<usize> {
        self.joints[joint_id].parent_id
    }

    /// Joint id for a name, if present.
    pub fn joint_id_by_name(&self, name: &str) -> Option<usize> {
        self.joints
            .iter()
            .find(|joint| joint.name == name)
            .map(|joint| joint.joint_id)
    }
}

/// The joint order used for image columns: the five parts' joint lists
/// concatenated in canonical part order. Always a permutation of `0..J`.
pub fn s2i_joint_order(format: &SkeletonFormat) -> Vec<usize> {
    format
        .parts()
        .iter()
        .flat_map(|part| part.ordered_joint_ids.iter().copied())
        .collect()
}

/// The three built-in skeleton formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinFormat {
    /// 25-joint Kinect v2 layout (NTU-60/120, PKU-MMD).
    Ntu25,
    /// 20-joint Kinect v1 layout (NW-UCLA).
    Ucla20,
    /// 13-joint LCRNet layout (Toyota Smarthome).
    Toyota13,
}

impl BuiltinFormat {
    pub const ALL: [BuiltinFormat; 3] = [
        BuiltinFormat::Ntu25,
        BuiltinFormat::Ucla20,
        BuiltinFormat::Toyota13,
    ];

    pub fn id(self) -> &'static str {
        match self {
            BuiltinFormat::Ntu25 => "ntu25",
            BuiltinFormat::Ucla20 => "ucla20",
            BuiltinFormat::Toyota13 => "toyota13",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.id() == id)
    }
}

fn joints_from_table(table: &[(usize, &str, Option<usize>)]) -> Vec<JointDef> {
    table
        .iter()
        .map(|&(joint_id, name, parent_id)| JointDef {
            joint_id,
            name: name.to_string(),
            parent_id,
        })
        .collect()
}

fn parts_from_ids(ids: [&[usize]; 5]) -> [PartDef; 5] {
    let mut iter = CANONICAL_PART_ORDER.iter().zip(ids);
    std::array::from_fn(|_| {
        let (&part_name, ordered) = iter.next().unwrap();
        PartDef {
            part_name,
            ordered_joint_ids: ordered.to_vec(),
        }
    })
}

/// Construct one of the built-in formats.
///
/// Joint indices follow each dataset's file convention (Kinect v2 for
/// ntu25, Kinect v1 for ucla20, LCRNet for toyota13); part membership and
/// intra-part order follow the five-part partition table, spine listed
/// top-down and limbs torso-outward.
pub fn builtin_format(name: BuiltinFormat) -> SkeletonFormat {
    let result = match name {
        BuiltinFormat::Ntu25 => {
            // Kinect v2 indexing: 0 = base of spine ... 24 = right thumb.
            // Parents follow the Kinect v2 joint hierarchy (thumbs hang off
            // the wrists, hand tips off the hands).
            let joints = joints_from_table(&[
                (0, "base of spine", None),
                (1, "middle of spine", Some(0)),
                (2, "neck", Some(20)),
                (3, "head", Some(2)),
                (4, "left shoulder", Some(20)),
                (5, "left elbow", Some(4)),
                (6, "left wrist", Some(5)),
                (7, "left hand", Some(6)),
                (8, "right shoulder", Some(20)),
                (9, "right elbow", Some(8)),
                (10, "right wrist", Some(9)),
                (11, "right hand", Some(10)),
                (12, "left hip", Some(0)),
                (13, "left knee", Some(12)),
                (14, "left ankle", Some(13)),
                (15, "left foot", Some(14)),
                (16, "right hip", Some(0)),
                (17, "right knee", Some(16)),
                (18, "right ankle", Some(17)),
                (19, "right foot", Some(18)),
                (20, "spine", Some(1)),
                (21, "tip of left hand", Some(7)),
                (22, "left thumb", Some(6)),
                (23, "tip of right hand", Some(11)),
                (24, "right thumb", Some(10)),
            ]);
            let parts = parts_from_ids([
                &[3, 2, 20, 1, 0],
                &[4, 5, 6, 7, 22, 21],
                &[8, 9, 10, 11, 24, 23],
                &[12, 13, 14, 15],
                &[16, 17, 18, 19],
            ]);
            SkeletonFormat::new("ntu25", joints, parts, ReferenceJoint::Single(0))
        }
        BuiltinFormat::Ucla20 => {
            // Kinect v1 indexing: 0 = base of spine (hip center) ... 19 =
            // right foot.
            let joints = joints_from_table(&[
                (0, "base of spine", None),
                (1, "middle of spine", Some(0)),
                (2, "spine", Some(1)),
                (3, "head", Some(2)),
                (4, "left shoulder", Some(2)),
                (5, "left elbow", Some(4)),
                (6, "left wrist", Some(5)),
                (7, "left hand", Some(6)),
                (8, "right shoulder", Some(2)),
                (9, "right elbow", Some(8)),
                (10, "right wrist", Some(9)),
                (11, "right hand", Some(10)),
                (12, "left hip", Some(0)),
                (13, "left knee", Some(12)),
                (14, "left ankle", Some(13)),
                (15, "left foot", Some(14)),
                (16, "right hip", Some(0)),
                (17, "right knee", Some(16)),
                (18, "right ankle", Some(17)),
                (19, "right foot", Some(18)),
            ]);
            let parts = parts_from_ids([
                &[3, 2, 1, 0],
                &[4, 5, 6, 7],
                &[8, 9, 10, 11],
                &[12, 13, 14, 15],
                &[16, 17, 18, 19],
            ]);
            SkeletonFormat::new("ucla20", joints, parts, ReferenceJoint::Single(0))
        }
        BuiltinFormat::Toyota13 => {
            // LCRNet indexing: ankles first, head last. There is no pelvis
            // joint; the tree is rooted at the head with hips attached to
            // the same-side shoulders, and the reference position is the
            // hip midpoint.
            let joints = joints_from_table(&[
                (0, "right ankle", Some(2)),
                (1, "left ankle", Some(3)),
                (2, "right knee", Some(4)),
                (3, "left knee", Some(5)),
                (4, "right hip", Some(10)),
                (5, "left hip", Some(11)),
                (6, "right wrist", Some(8)),
                (7, "left wrist", Some(9)),
                (8, "right elbow", Some(10)),
                (9, "left elbow", Some(11)),
                (10, "right shoulder", Some(12)),
                (11, "left shoulder", Some(12)),
                (12, "head", None),
            ]);
            let parts = parts_from_ids([
                &[12],
                &[11, 9, 7],
                &[10, 8, 6],
                &[5, 3, 1],
                &[4, 2, 0],
            ]);
            SkeletonFormat::new("toyota13", joints, parts, ReferenceJoint::Midpoint(5, 4))
        }
    };
    result.expect("built-in format must satisfy its own invariants")
}

// ---------------------------------------------------------------------------
// Format-description documents
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct JointDoc {
    id: usize,
    name: String,
    /// Parent joint name; `null` (or the joint's own name) marks the root.
    parent: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PartsDoc {
    spine: Vec<String>,
    left_arm: Vec<String>,
    right_arm: Vec<String>,
    left_leg: Vec<String>,
    right_leg: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ReferenceDoc {
    Single(String),
    Pair([String; 2]),
}

#[derive(Debug, Serialize, Deserialize)]
struct FormatDoc {
    format_id: String,
    joints: Vec<JointDoc>,
    parts: PartsDoc,
    reference: ReferenceDoc,
}

/// Load a format from its JSON description document.
pub fn load_format(document: &str) -> Result<SkeletonFormat, FormatError> {
    let doc: FormatDoc = serde_json::from_str(document)?;

    let mut name_to_id = HashMap::with_capacity(doc.joints.len());
    for joint in &doc.joints {
        if name_to_id.insert(joint.name.clone(), joint.id).is_some() {
            return Err(FormatError::DuplicateJointName(joint.name.clone()));
        }
    }
    let resolve = |name: &str, context: &str| -> Result<usize, FormatError> {
        name_to_id
            .get(name)
            .copied()
            .ok_or_else(|| FormatError::UnknownJointName {
                name: name.to_string(),
                context: context.to_string(),
            })
    };

    let joints = doc
        .joints
        .iter()
        .map(|joint| {
            let parent_id = match &joint.parent {
                None => None,
                Some(p) if *p == joint.name => None,
                Some(p) => Some(resolve(p, &format!("joint '{}' parent", joint.name))?),
            };
            Ok(JointDef {
                joint_id: joint.id,
                name: joint.name.clone(),
                parent_id,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;

    let part_lists = [
        (&doc.parts.spine, PartName::Spine),
        (&doc.parts.left_arm, PartName::LeftArm),
        (&doc.parts.right_arm, PartName::RightArm),
        (&doc.parts.left_leg, PartName::LeftLeg),
        (&doc.parts.right_leg, PartName::RightLeg),
    ];
    let mut parts = Vec::with_capacity(5);
    for (names, part_name) in part_lists {
        let ordered_joint_ids = names
            .iter()
            .map(|n| resolve(n, &format!("part '{part_name}'")))
            .collect::<Result<Vec<_>, _>>()?;
        parts.push(PartDef {
            part_name,
            ordered_joint_ids,
        });
    }
    let parts: [PartDef; 5] = parts.try_into().expect("five parts were built");

    let reference = match &doc.reference {
        ReferenceDoc::Single(name) => ReferenceJoint::Single(resolve(name, "reference")?),
        ReferenceDoc::Pair([a, b]) => {
            ReferenceJoint::Midpoint(resolve(a, "reference")?, resolve(b, "reference")?)
        }
    };

    SkeletonFormat::new(doc.format_id, joints, parts, reference)
}

/// Serialize a format to its JSON description document (the inverse of
/// [`load_format`]).
pub fn format_to_document(format: &SkeletonFormat) -> String {
    let name_of = |id: usize| format.joints()[id].name.clone();
    let part_names = |index: usize| {
        format.parts()[index]
            .ordered_joint_ids
            .iter()
            .map(|&id| name_of(id))
            .collect::<Vec<_>>()
    };
    let doc = FormatDoc {
        format_id: format.format_id().to_string(),
        joints: format
            .joints()
            .iter()
            .map(|joint| JointDoc {
                id: joint.joint_id,
                name: joint.name.clone(),
                parent: joint.parent_id.map(name_of),
            })
            .collect(),
        parts: PartsDoc {
            spine: part_names(0),
            left_arm: part_names(1),
            right_arm: part_names(2),
            left_leg: part_names(3),
            right_leg: part_names(4),
        },
        reference: match format.reference() {
            ReferenceJoint::Single(id) => ReferenceDoc::Single(name_of(id)),
            ReferenceJoint::Midpoint(a, b) => ReferenceDoc::Pair([name_of(a), name_of(b)]),
        },
    };
    serde_json::to_string_pretty(&doc).expect("format document serializes")
}

/// In-memory registry of formats, pre-populated with the built-ins.
///
/// Formats are immutable once registered; the registry itself is built
/// single-threaded and then shared read-only.
#[derive(Debug)]
pub struct FormatRegistry {
    formats: HashMap<String, SkeletonFormat>,
}

impl FormatRegistry {
    pub fn new() -> Self {
        let mut registry = FormatRegistry {
            formats: HashMap::new(),
        };
        for builtin in BuiltinFormat::ALL {
            registry.register(builtin_format(builtin));
        }
        registry
    }

    pub fn register(&mut self, format: SkeletonFormat) {
        self.formats.insert(format.format_id().to_string(), format);
    }

    pub fn get(&self, format_id: &str) -> Result<&SkeletonFormat, FormatError> {
        self.formats
            .get(format_id)
            .ok_or_else(|| FormatError::UnknownFormat(format_id.to_string()))
    }

    pub fn ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.formats.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }
}

impl Default for FormatRegistry {
    fn default() -> Self {
        Self::new()
    }
}
