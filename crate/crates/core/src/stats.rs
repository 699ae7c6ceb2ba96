//! Per-channel normalization statistics over encoded images: streaming
//! (Welford) accumulation, a parallel merge that makes sharded reduction
//! exact up to floating tolerance, and the normalization transform itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{ImageError, S2IImage};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("statistics are empty, nothing to normalize with")]
    Empty,
    #[error("channel {0} has zero standard deviation")]
    ZeroStd(usize),
    #[error("stats file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("stats file invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Streaming per-channel statistics over image pixels.
///
/// `m2` holds the sum of squared deviations from the running mean, so the
/// population variance is `m2 / count`. Accumulate shards independently
/// and [`ChannelStats::merge`] them in any order; the result matches a
/// single joint pass up to floating-point tolerance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelStats {
    pub count: u64,
    pub mean: [f64; 3],
    pub m2: [f64; 3],
    pub source_ids: Vec<String>,
}

impl ChannelStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fold one image's pixels into the statistics.
    pub fn accumulate(&mut self, img: &S2IImage) {
        for chunk in img.pixels().chunks_exact(3) {
            self.count += 1;
            for (c, &value) in chunk.iter().enumerate() {
                let delta = value - self.mean[c];
                self.mean[c] += delta / self.count as f64;
                self.m2[c] += delta * (value - self.mean[c]);
            }
        }
        let id = img.meta().sample_id.clone();
        if !id.is_empty() {
            self.source_ids.push(id);
        }
    }

    /// Combine two independently accumulated statistics.
    pub fn merge(a: &ChannelStats, b: &ChannelStats) -> ChannelStats {
        if a.count == 0 {
            return b.clone();
        }
        if b.count == 0 {
            return a.clone();
        }
        let count = a.count + b.count;
        let mut mean = [0.0; 3];
        let mut m2 = [0.0; 3];
        for c in 0..3 {
            let delta = b.mean[c] - a.mean[c];
            mean[c] = a.mean[c] + delta * (b.count as f64 / count as f64);
            m2[c] = a.m2[c]
                + b.m2[c]
                + delta * delta * (a.count as f64 * b.count as f64 / count as f64);
        }
        let mut source_ids = a.source_ids.clone();
        source_ids.extend_from_slice(&b.source_ids);
        ChannelStats {
            count,
            mean,
            m2,
            source_ids,
        }
    }

    /// Population standard deviation per channel.
    pub fn std(&self) -> Result<[f64; 3], StatsError> {
        if self.count == 0 {
            return Err(StatsError::Empty);
        }
        Ok(self.m2.map(|m2| (m2 / self.count as f64).sqrt()))
    }
}

/// Standardize an image with precomputed statistics: per channel,
/// `(pixel - mean) / std`. Fails if any channel's deviation is zero.
pub fn normalize(img: &S2IImage, stats: &ChannelStats) -> Result<S2IImage, StatsError> {
    let std = stats.std()?;
    for (c, &s) in std.iter().enumerate() {
        if s <= 0.0 {
            return Err(StatsError::ZeroStd(c));
        }
    }
    let pixels = img
        .pixels()
        .chunks_exact(3)
        .flat_map(|chunk| (0..3).map(move |c| (chunk[c] - stats.mean[c]) / std[c]))
        .collect();
    Ok(img.with_pixels(pixels)?)
}

/// Invert [`normalize`]: `pixel * std + mean`.
pub fn denormalize(img: &S2IImage, stats: &ChannelStats) -> Result<S2IImage, StatsError> {
    let std = stats.std()?;
    let pixels = img
        .pixels()
        .chunks_exact(3)
        .flat_map(|chunk| (0..3).map(move |c| chunk[c] * std[c] + stats.mean[c]))
        .collect();
    Ok(img.with_pixels(pixels)?)
}

// --- stats files -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct StatsFile {
    count: u64,
    mean: [f64; 3],
    std: [f64; 3],
    source_ids: Vec<String>,
}

/// Serialize statistics to their file form (mean and std per channel).
pub fn stats_to_json(stats: &ChannelStats) -> Result<String, StatsError> {
    let file = StatsFile {
        count: stats.count,
        mean: stats.mean,
        std: stats.std()?,
        source_ids: stats.source_ids.clone(),
    };
    Ok(serde_json::to_string_pretty(&file).expect("stats serialize"))
}

/// Load statistics from their file form. The squared-deviation sum is
/// reconstructed as `std^2 * count`, the exact inverse of the writer.
pub fn stats_from_json(text: &str) -> Result<ChannelStats, StatsError> {
    let file: StatsFile = serde_json::from_str(text)?;
    if file.count == 0 {
        return Err(StatsError::Invalid("stats file has zero count".to_string()));
    }
    for value in file.mean.iter().chain(&file.std) {
        if !value.is_finite() {
            return Err(StatsError::Invalid("non-finite statistic".to_string()));
        }
    }
    Ok(ChannelStats {
        count: file.count,
        mean: file.mean,
        m2: file.std.map(|s| s * s * file.count as f64),
        source_ids: file.source_ids,
    })
}

// --- manifests ---------------------------------------------------------------

/// One input of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub path: String,
    pub format_id: String,
    #[serde(default)]
    pub stream: Option<String>,
    #[serde(default)]
    pub label: Option<String>,
}

/// A corpus description: line-delimited JSON with a header record carrying
/// the manifest id, then one entry record per line.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub manifest_id: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    manifest_id: String,
}

impl DatasetManifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&ManifestHeader {
            manifest_id: self.manifest_id.clone(),
        })
        .expect("header serializes");
        out.push('\n');
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, StatsError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: ManifestHeader = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| StatsError::Invalid("manifest is empty".to_string()))?,
        )?;
        let entries = lines
            .map(serde_json::from_str::<ManifestEntry>)
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = std::collections::HashSet::new();
        for entry in &entries {
            if !seen.insert(entry.sample_id.as_str()) {
                return Err(StatsError::Invalid(format!(
                    "duplicate sample_id '{}' in manifest",
                    entry.sample_id
                )));
            }
        }
        Ok(DatasetManifest {
            manifest_id: header.manifest_id,
            entries,
        })
    }
}
