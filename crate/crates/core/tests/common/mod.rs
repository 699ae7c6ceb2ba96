//! Shared helpers for integration tests: an independent brute-force
//! interpolation oracle and random generators for formats and sequences.
//!
//! The oracle intentionally re-derives align-corners bilinear sampling from
//! scratch (direct four-corner weights per output pixel) so it shares no
//! code path with the separable implementation it checks.

#![allow(dead_code)]

use rand::prelude::*;
use rand::rngs::StdRng;

use s2i_core::format::{
    s2i_joint_order, JointDef, PartDef, ReferenceJoint, SkeletonFormat,
    CANONICAL_PART_ORDER,
};
use s2i_core::sequence::SkeletonSequence;

/// Brute-force align-corners bilinear encode: reorder joints, then sample
/// every output pixel directly with four-corner weights.
pub fn oracle_encode(
    seq: &SkeletonSequence,
    format: &SkeletonFormat,
    height: usize,
    width: usize,
) -> Vec<f64> {
    let order = s2i_joint_order(format);
    let t_in = seq.frame_count();
    let j_in = seq.joint_count();

    let src_pos = |i: usize, len_in: usize, len_out: usize| -> f64 {
        if len_in == 1 || len_out == 1 {
            0.0
        } else {
            (i * (len_in - 1)) as f64 / (len_out - 1) as f64
        }
    };

    let mut out = vec![0.0f64; height * width * 3];
    for h in 0..height {
        let tp = src_pos(h, t_in, height);
        let t0 = (tp.floor() as usize).min(t_in - 1);
        let t1 = (t0 + 1).min(t_in - 1);
        let ft = tp - t0 as f64;
        for w in 0..width {
            let jp = src_pos(w, j_in, width);
            let j0 = (jp.floor() as usize).min(j_in - 1);
            let j1 = (j0 + 1).min(j_in - 1);
            let fj = jp - j0 as f64;
            for c in 0..3 {
                let f00 = seq.get(t0, order[j0])[c];
                let f01 = seq.get(t0, order[j1])[c];
                let f10 = seq.get(t1, order[j0])[c];
                let f11 = seq.get(t1, order[j1])[c];
                out[(h * width + w) * 3 + c] = f00 * (1.0 - ft) * (1.0 - fj)
                    + f01 * (1.0 - ft) * fj
                    + f10 * ft * (1.0 - fj)
                    + f11 * ft * fj;
            }
        }
    }
    out
}

/// A random valid format: random joint permutation split into five
/// non-empty parts, random tree parents, random reference.
pub fn random_format(rng: &mut StdRng, joints: usize) -> SkeletonFormat {
    assert!(joints >= 5);

    let mut ids: Vec<usize> = (0..joints).collect();
    ids.shuffle(rng);

    // Four cut points make five non-empty chunks.
    let mut cuts: Vec<usize> = (1..joints).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts[..4].to_vec();
    cuts.sort_unstable();

    let mut parts = Vec::with_capacity(5);
    let mut start = 0usize;
    for (i, &part_name) in CANONICAL_PART_ORDER.iter().enumerate() {
        let end = if i < 4 { cuts[i] } else { joints };
        parts.push(PartDef {
            part_name,
            ordered_joint_ids: ids[start..end].to_vec(),
        });
        start = end;
    }
    let parts: [PartDef; 5] = parts.try_into().unwrap();

    // Random tree: attach each joint (in a random order) to an earlier one.
    let mut attach_order: Vec<usize> = (0..joints).collect();
    attach_order.shuffle(rng);
    let mut parent = vec![None; joints];
    for i in 1..joints {
        parent[attach_order[i]] = Some(attach_order[rng.random_range(0..i)]);
    }

    let joint_defs = (0..joints)
        .map(|joint_id| JointDef {
            joint_id,
            name: format!("j{joint_id}"),
            parent_id: parent[joint_id],
        })
        .collect();

    let reference = if rng.random_bool(0.5) {
        ReferenceJoint::Single(rng.random_range(0..joints))
    } else {
        ReferenceJoint::Midpoint(rng.random_range(0..joints), rng.random_range(0..joints))
    };

    SkeletonFormat::new(format!("rand{joints}"), joint_defs, parts, reference)
        .expect("random format is valid by construction")
}

/// A random sequence matching the format, coordinates within
/// `[-scale, scale]`.
pub fn random_sequence(
    rng: &mut StdRng,
    format: &SkeletonFormat,
    frames: usize,
    scale: f64,
) -> SkeletonSequence {
    let joints = format.joint_count();
    let frame_data: Vec<Vec<[f64; 3]>> = (0..frames)
        .map(|_| {
            (0..joints)
                .map(|_| std::array::from_fn(|_| rng.random_range(-scale..scale)))
                .collect()
        })
        .collect();
    SkeletonSequence::from_frames(format.format_id(), "random", frame_data).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
