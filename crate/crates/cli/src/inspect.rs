//! File inspection: identify an artifact by its shape, print its parsed
//! header or metadata, and validate the invariants it declares.

use std::fs;
use std::path::Path;

use s2i_core::format::load_format;
use s2i_core::image_io::{Sidecar, F32RAW_MAGIC};
use s2i_core::ingest::parse_ntu_skeleton;
use s2i_core::masking::mask_from_json;
use s2i_core::stats::{stats_from_json, DatasetManifest};

/// Inspect one file. `Ok` carries a human-readable report; `Err` carries a
/// named invariant violation.
pub fn inspect_file(path: &Path) -> Result<String, String> {
    let bytes = fs::read(path).map_err(|e| format!("unreadable: {e}"))?;

    if bytes.len() >= 4 && bytes[..4] == F32RAW_MAGIC {
        return inspect_f32raw(path, &bytes);
    }
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("skeleton"))
    {
        return inspect_skeleton(&bytes);
    }
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        return inspect_png(path, &bytes);
    }

    let text = String::from_utf8(bytes).map_err(|_| "not valid UTF-8".to_string())?;
    inspect_json(&text)
}

fn inspect_f32raw(path: &Path, bytes: &[u8]) -> Result<String, String> {
    if bytes.len() < 12 {
        return Err("f32raw header truncated".to_string());
    }
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + height * width * 3 * 4;
    if bytes.len() != expected {
        return Err(format!(
            "f32raw payload holds {} bytes, header implies {expected}",
            bytes.len()
        ));
    }
    let mut report = format!("f32raw image: {height}x{width}x3");
    let sidecar_path = sidecar_path_for(path);
    match fs::read_to_string(&sidecar_path) {
        Ok(text) => {
            let sidecar = Sidecar::from_json(&text).map_err(|e| e.to_string())?;
            report.push_str(&format!(
                ", sidecar ok (sample '{}', format '{}', original {}x{})",
                sidecar.sample_id, sidecar.format_id, sidecar.original_t, sidecar.original_j
            ));
        }
        Err(_) => report.push_str(&format!(", no sidecar at {}", sidecar_path.display())),
    }
    Ok(report)
}

fn inspect_png(path: &Path, bytes: &[u8]) -> Result<String, String> {
    // IHDR is always the first chunk: width and height live at bytes 16..24.
    if bytes.len() < 24 || &bytes[12..16] != b"IHDR" {
        return Err("png missing IHDR chunk".to_string());
    }
    let width = u32::from_be_bytes(bytes[16..20].try_into().unwrap());
    let height = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
    let mut report = format!("png image: {height}x{width}");
    let sidecar_path = sidecar_path_for(path);
    if let Ok(text) = fs::read_to_string(&sidecar_path) {
        let sidecar = Sidecar::from_json(&text).map_err(|e| e.to_string())?;
        report.push_str(&format!(", sidecar ok (sample '{}')", sidecar.sample_id));
    }
    Ok(report)
}

fn sidecar_path_for(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

fn inspect_skeleton(bytes: &[u8]) -> Result<String, String> {
    let frames = parse_ntu_skeleton(bytes).map_err(|e| e.to_string())?;
    let bodies: Vec<usize> = frames.iter().map(Vec::len).collect();
    let joints = frames
        .iter()
        .flatten()
        .map(|b| b.joints.len())
        .next()
        .unwrap_or(0);
    Ok(format!(
        "ntu skeleton: {} frames, bodies per frame {}..{}, {} joints",
        frames.len(),
        bodies.iter().min().unwrap_or(&0),
        bodies.iter().max().unwrap_or(&0),
        joints
    ))
}

fn inspect_json(text: &str) -> Result<String, String> {
    let first_line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first_line.contains("\"manifest_id\"") {
        let manifest = DatasetManifest::from_jsonl(text).map_err(|e| e.to_string())?;
        return Ok(format!(
            "manifest '{}': {} entries",
            manifest.manifest_id,
            manifest.entries.len()
        ));
    }

    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("not valid JSON: {e}"))?;
    let object = value.as_object().ok_or("top-level JSON is not an object")?;

    if object.contains_key("joint_order") && object.contains_key("channel_affine") {
        let sidecar = Sidecar::from_json(text).map_err(|e| e.to_string())?;
        return Ok(format!(
            "sidecar: sample '{}', format '{}', original {}x{}, {} joints in order",
            sidecar.sample_id,
            sidecar.format_id,
            sidecar.original_t,
            sidecar.original_j,
            sidecar.joint_order.len()
        ));
    }
    if object.contains_key("rng_id") && object.contains_key("bits") {
        let mask = mask_from_json(text).map_err(|e| e.to_string())?;
        return Ok(format!(
            "mask: {} strategy, ratio {}, seed {}, {}/{} patches masked",
            mask.strategy,
            mask.ratio,
            mask.seed,
            mask.count(),
            mask.grid.n_patches()
        ));
    }
    if object.contains_key("std") && object.contains_key("count") {
        let stats = stats_from_json(text).map_err(|e| e.to_string())?;
        return Ok(format!(
            "stats: {} pixels from {} sources, mean {:?}",
            stats.count,
            stats.source_ids.len(),
            stats.mean
        ));
    }
    if object.contains_key("parts") && object.contains_key("joints") {
        let format = load_format(text).map_err(|e| e.to_string())?;
        return Ok(format!(
            "format '{}': {} joints in five parts",
            format.format_id(),
            format.joint_count()
        ));
    }
    if object.contains_key("beta") && object.contains_key("alpha_bar") {
        return Ok("diffusion schedule dump".to_string());
    }
    if object.contains_key("frames") && object.contains_key("sample_id") {
        return inspect_generic_sequence(object);
    }
    Err("unrecognized document shape".to_string())
}

fn inspect_generic_sequence(
    object: &serde_json::Map<String, serde_json::Value>,
) -> Result<String, String> {
    let frames = object
        .get("frames")
        .and_then(|f| f.as_array())
        .ok_or("'frames' is not an array")?;
    let mut joints = None;
    for (t, frame) in frames.iter().enumerate() {
        let row = frame
            .as_array()
            .ok_or_else(|| format!("frame {t} is not an array"))?;
        match joints {
            None => joints = Some(row.len()),
            Some(j) if j != row.len() => {
                return Err(format!("frame {t} has {} joints, frame 0 has {j}", row.len()));
            }
            _ => {}
        }
        for (j, coord) in row.iter().enumerate() {
            let triple = coord
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| format!("frame {t} joint {j} is not a 3-vector"))?;
            for v in triple {
                let value = v
                    .as_f64()
                    .ok_or_else(|| format!("frame {t} joint {j} non-numeric"))?;
                if !value.is_finite() {
                    return Err(format!("frame {t} joint {j} non-finite coordinate"));
                }
            }
        }
    }
    Ok(format!(
        "sequence '{}' ({}): {} frames x {} joints",
        object.get("sample_id").and_then(|v| v.as_str()).unwrap_or("?"),
        object.get("format_id").and_then(|v| v.as_str()).unwrap_or("?"),
        frames.len(),
        joints.unwrap_or(0)
    ))
}
