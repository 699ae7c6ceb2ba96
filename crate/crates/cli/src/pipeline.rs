//! The per-file encode pipeline and its batch runner: parse, split,
//! preprocess, derive the stream, encode, normalize, and export — each file
//! in isolation so one bad input never poisons the batch.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use s2i_core::encoder::{encode, S2IImage};
use s2i_core::format::SkeletonFormat;
use s2i_core::image_io::{export, ExportMode};
use s2i_core::ingest::{
    drop_zero_frames, parse_generic_json, parse_ntu_skeleton, split_bodies,
    translate_by_first_frame,
};
use s2i_core::sequence::SkeletonSequence;
use s2i_core::stats::{normalize, ChannelStats};
use s2i_core::streams::{derive_stream, Stream};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub stream: Stream,
    pub size: (usize, usize),
    pub keep_zero_frames: bool,
    pub translate: bool,
    pub mode: ExportMode,
    pub stats: Option<ChannelStats>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            stream: Stream::Joint,
            size: s2i_core::CANONICAL_SIZE,
            keep_zero_frames: false,
            translate: true,
            mode: ExportMode::F32Raw,
            stats: None,
        }
    }
}

/// Parse a raw input by extension: `.skeleton` as an NTU capture file,
/// anything else as a generic interchange document.
pub fn load_sequence(path: &Path, format: &SkeletonFormat) -> Result<SkeletonSequence> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let is_ntu = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("skeleton"));
    let sample_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sample".to_string());
    if is_ntu {
        let frames = parse_ntu_skeleton(&bytes)?;
        Ok(split_bodies(&frames, format, &sample_id)?)
    } else {
        Ok(parse_generic_json(&bytes, format)?)
    }
}

/// Preprocess and encode one parsed sequence.
pub fn process_sequence(
    seq: &SkeletonSequence,
    format: &SkeletonFormat,
    opts: &PipelineOptions,
) -> Result<S2IImage> {
    let mut seq = seq.clone();
    if !opts.keep_zero_frames {
        seq = drop_zero_frames(&seq)?;
    }
    if opts.translate {
        seq = translate_by_first_frame(&seq, format);
    }
    let seq = derive_stream(&seq, format, opts.stream);
    let img = encode(&seq, format, opts.size);
    match &opts.stats {
        Some(stats) => Ok(normalize(&img, stats)?),
        None => Ok(img),
    }
}

/// Write `payload` and its sidecar next to each other under `out_dir`,
/// atomically (temp file in the target directory, then rename).
pub fn write_export(
    out_dir: &Path,
    stem: &str,
    mode: ExportMode,
    payload: &[u8],
    sidecar: &str,
) -> Result<PathBuf> {
    let final_path = out_dir.join(format!("{stem}.{}", mode.file_extension()));
    atomic_write(&final_path, payload)?;
    let sidecar_path = out_dir.join(format!("{stem}.{}.json", mode.file_extension()));
    atomic_write(&sidecar_path, sidecar.as_bytes())?;
    Ok(final_path)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().ok_or_else(|| anyhow!("no parent directory"))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// One unit of batch work: an input path with its resolved format and an
/// output stem.
pub struct BatchItem<'a> {
    pub path: PathBuf,
    pub format: &'a SkeletonFormat,
    pub stem: String,
    pub stream: Option<Stream>,
}

pub struct BatchOutcome {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, String)>,
}

/// Encode a batch with per-file isolation. Under `fail_fast` the batch
/// stops scheduling new work after the first failure; otherwise every file
/// is attempted and failures are collected.
pub fn run_batch(
    items: &[BatchItem<'_>],
    opts: &PipelineOptions,
    out_dir: &Path,
    fail_fast: bool,
) -> Result<BatchOutcome> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    // Output stems must be unique or files would silently overwrite.
    let mut seen = std::collections::HashSet::new();
    for item in items {
        if !seen.insert(item.stem.as_str()) {
            bail!("duplicate output name '{}' in batch", item.stem);
        }
    }

    let results: Vec<(usize, Result<PathBuf, String>)> = if fail_fast {
        let mut collected = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let result = encode_one(item, opts, out_dir);
            let failed = result.is_err();
            collected.push((i, result));
            if failed {
                break;
            }
        }
        collected
    } else {
        items
            .par_iter()
            .enumerate()
            .map(|(i, item)| (i, encode_one(item, opts, out_dir)))
            .collect()
    };

    let mut outcome = BatchOutcome {
        written: Vec::new(),
        failures: Vec::new(),
    };
    for (i, result) in results {
        match result {
            Ok(path) => outcome.written.push(path),
            Err(msg) => outcome.failures.push((items[i].path.clone(), msg)),
        }
    }
    Ok(outcome)
}

fn encode_one(item: &BatchItem<'_>, opts: &PipelineOptions, out_dir: &Path) -> Result<PathBuf, String> {
    let run = || -> Result<PathBuf> {
        let seq = load_sequence(&item.path, item.format)?;
        let mut opts = opts.clone();
        if let Some(stream) = item.stream {
            opts.stream = stream;
        }
        let img = process_sequence(&seq, item.format, &opts)?;
        let (payload, sidecar) = export(&img, opts.mode)?;
        write_export(out_dir, &item.stem, opts.mode, &payload, &sidecar)
    };
    run().map_err(|e| format!("{e:#}"))
}

/// Accumulate normalization statistics over encoded batch items: each
/// file runs the same pipeline (without normalization), shards are
/// computed in parallel and folded in input order so the result is
/// deterministic.
pub fn accumulate_stats(
    items: &[BatchItem<'_>],
    opts: &PipelineOptions,
) -> Result<(ChannelStats, Vec<(PathBuf, String)>)> {
    let opts = PipelineOptions {
        stats: None,
        ..opts.clone()
    };
    let results: Vec<Result<ChannelStats, String>> = items
        .par_iter()
        .map(|item| {
            let run = || -> Result<ChannelStats> {
                let seq = load_sequence(&item.path, item.format)?;
                let mut local = opts.clone();
                if let Some(stream) = item.stream {
                    local.stream = stream;
                }
                let img = process_sequence(&seq, item.format, &local)?;
                let mut stats = ChannelStats::new();
                stats.accumulate(&img);
                Ok(stats)
            };
            run().map_err(|e| format!("{e:#}"))
        })
        .collect();

    let mut total = ChannelStats::new();
    let mut failures = Vec::new();
    for (item, result) in items.iter().zip(results) {
        match result {
            Ok(shard) => total = ChannelStats::merge(&total, &shard),
            Err(msg) => failures.push((item.path.clone(), msg)),
        }
    }
    Ok((total, failures))
}
