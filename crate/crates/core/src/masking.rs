//! Patch-mask generation over the ViT patch lattice: random, block, joint
//! (column), and temporal (row) strategies, all pure functions of
//! `(grid, ratio, seed)`.
//!
//! Randomness comes from a frozen pipeline — the u64 seed is expanded by
//! SplitMix64 into a ChaCha12 key, and all sampling uses unbiased rejection
//! on raw 64-bit draws — so identical inputs reproduce identical masks
//! across platforms and releases. The algorithm identifier [`RNG_ID`] is
//! embedded in every mask file.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Frozen identifier of the mask-sampling RNG pipeline.
pub const RNG_ID: &str = "chacha12-sm64";

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("patch size {patch_size} does not divide image dimension {dim}")]
    NotDivisible { dim: usize, patch_size: usize },
    #[error("mask file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("mask file invalid: {0}")]
    Invalid(String),
}

/// The non-overlapping patch tiling of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub grid_h: usize,
    pub grid_w: usize,
}

impl PatchGrid {
    pub fn new(height: usize, width: usize, patch_size: usize) -> Result<Self, MaskError> {
        if patch_size == 0 || !height.is_multiple_of(patch_size) {
            return Err(MaskError::NotDivisible {
                dim: height,
                patch_size,
            });
        }
        if !width.is_multiple_of(patch_size) {
            return Err(MaskError::NotDivisible {
                dim: width,
                patch_size,
            });
        }
        Ok(PatchGrid {
            patch_size,
            grid_h: height / patch_size,
            grid_w: width / patch_size,
        })
    }

    /// The 14 x 14 grid of a 224 x 224 image with 16-pixel patches.
    pub fn vit_b16() -> Self {
        PatchGrid {
            patch_size: 16,
            grid_h: 14,
            grid_w: 14,
        }
    }

    pub fn n_patches(&self) -> usize {
        self.grid_h * self.grid_w
    }
}

/// Mask sampling strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskStrategy {
    Random,
    Block,
    Joint,
    Temporal,
}

impl MaskStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskStrategy::Random => "random",
            MaskStrategy::Block => "block",
            MaskStrategy::Joint => "joint",
            MaskStrategy::Temporal => "temporal",
        }
    }
}

impl std::str::FromStr for MaskStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(MaskStrategy::Random),
            "block" | "group" => Ok(MaskStrategy::Block),
            "joint" => Ok(MaskStrategy::Joint),
            "temporal" => Ok(MaskStrategy::Temporal),
            other => Err(format!(
                "unknown strategy '{other}', expected random|block|joint|temporal"
            )),
        }
    }
}

impl std::fmt::Display for MaskStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A boolean mask over a patch grid, with its generation provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMask {
    pub grid: PatchGrid,
    /// Row-major over the patch lattice.
    pub masked: Vec<bool>,
    pub strategy: MaskStrategy,
    pub ratio: f64,
    pub seed: u64,
}

impl PatchMask {
    pub fn count(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }

    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        self.masked[row * self.grid.grid_w + col]
    }

    /// Indices of masked patches in row-major order.
    pub fn masked_indices(&self) -> Vec<usize> {
        (0..self.masked.len()).filter(|&i| self.masked[i]).collect()
    }
}

/// One placed block of the block strategy: a square with top-left corner
/// `(row, col)` and the given side, clipped to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlacedBlock {
    pub row: usize,
    pub col: usize,
    pub side: usize,
}

impl PlacedBlock {
    /// The grid cells the clipped block covers.
    pub fn cells(&self, grid: &PatchGrid) -> impl Iterator<Item = (usize, usize)> + '_ {
        let rows = self.row..(self.row + self.side).min(grid.grid_h);
        let cols_end = (self.col + self.side).min(grid.grid_w);
        let col0 = self.col;
        rows.flat_map(move |r| (col0..cols_end).map(move |c| (r, c)))
    }

    fn clipped_area(&self, grid: &PatchGrid) -> usize {
        let rows = (self.row + self.side).min(grid.grid_h) - self.row;
        let cols = (self.col + self.side).min(grid.grid_w) - self.col;
        rows * cols
    }
}

// --- frozen sampling pipeline ---------------------------------------------

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Uniform draw in `0..n` by unbiased rejection on raw u64 output.
fn next_below(rng: &mut ChaCha12Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as u64;
    let min = n.wrapping_neg() % n; // 2^64 mod n
    loop {
        let v = rng.next_u64();
        if v >= min {
            return (v % n) as usize;
        }
    }
}

/// `k` distinct values from `0..n` via partial Fisher-Yates.
fn sample_distinct(rng: &mut ChaCha12Rng, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + next_below(rng, n - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

fn ratio_in_range(ratio: f64) {
    assert!(
        (0.0..=1.0).contains(&ratio),
        "mask ratio must be in [0, 1], got {ratio}"
    );
}

/// Mask exactly `floor(ratio * n_patches)` patches, uniformly without
/// replacement.
pub fn random_mask(grid: PatchGrid, ratio: f64, seed: u64) -> PatchMask {
    ratio_in_range(ratio);
    let n = grid.n_patches();
    let k = (ratio * n as f64).floor() as usize;
    let mut rng = rng_from_seed(seed);
    let mut masked = vec![false; n];
    for i in sample_distinct(&mut rng, n, k) {
        masked[i] = true;
    }
    PatchMask {
        grid,
        masked,
        strategy: MaskStrategy::Random,
        ratio,
        seed,
    }
}

/// Mask contiguous square regions grown from random seed positions until
/// at least `floor(ratio * n_patches)` patches are covered.
///
/// Each block starts at side 1 on a seed sampled among still-unmasked
/// patches and grows until its grid-clipped area reaches the remaining
/// deficit (or it is fully clipped); the final count may exceed the target
/// by less than the last block's area. The placed blocks are returned as a
/// contiguity witness.
pub fn block_mask_with_witness(
    grid: PatchGrid,
    ratio: f64,
    seed: u64,
) -> (PatchMask, Vec<PlacedBlock>) {
    ratio_in_range(ratio);
    let n = grid.n_patches();
    let target = (ratio * n as f64).floor() as usize;
    let mut rng = rng_from_seed(seed);
    let mut masked = vec![false; n];
    let mut count = 0usize;
    let mut blocks = Vec::new();

    while count < target {
        let unmasked: Vec<usize> = (0..n).filter(|&i| !masked[i]).collect();
        let pick = unmasked[next_below(&mut rng, unmasked.len())];
        let (row, col) = (pick / grid.grid_w, pick % grid.grid_w);

        let remaining = target - count;
        let max_side = grid.grid_h.max(grid.grid_w);
        let mut block = PlacedBlock { row, col, side: 1 };
        while block.clipped_area(&grid) < remaining && block.side < max_side {
            block.side += 1;
        }

        for (r, c) in block.cells(&grid) {
            let idx = r * grid.grid_w + c;
            if !masked[idx] {
                masked[idx] = true;
                count += 1;
            }
        }
        blocks.push(block);
    }

    let mask = PatchMask {
        grid,
        masked,
        strategy: MaskStrategy::Block,
        ratio,
        seed,
    };
    (mask, blocks)
}

/// [`block_mask_with_witness`] without the witness.
pub fn block_mask(grid: PatchGrid, ratio: f64, seed: u64) -> PatchMask {
    block_mask_with_witness(grid, ratio, seed).0
}

/// Mask whole patch columns (the joint axis): `round-half-even(ratio *
/// grid_w)` distinct columns chosen uniformly.
pub fn joint_mask(grid: PatchGrid, ratio: f64, seed: u64) -> PatchMask {
    ratio_in_range(ratio);
    let k = (ratio * grid.grid_w as f64).round_ties_even() as usize;
    let mut rng = rng_from_seed(seed);
    let mut masked = vec![false; grid.n_patches()];
    for col in sample_distinct(&mut rng, grid.grid_w, k.min(grid.grid_w)) {
        for row in 0..grid.grid_h {
            masked[row * grid.grid_w + col] = true;
        }
    }
    PatchMask {
        grid,
        masked,
        strategy: MaskStrategy::Joint,
        ratio,
        seed,
    }
}

/// Mask whole patch rows (the time axis): `round-half-even(ratio * grid_h)`
/// distinct rows chosen uniformly.
pub fn temporal_mask(grid: PatchGrid, ratio: f64, seed: u64) -> PatchMask {
    ratio_in_range(ratio);
    let k = (ratio * grid.grid_h as f64).round_ties_even() as usize;
    let mut rng = rng_from_seed(seed);
    let mut masked = vec![false; grid.n_patches()];
    for row in sample_distinct(&mut rng, grid.grid_h, k.min(grid.grid_h)) {
        for col in 0..grid.grid_w {
            masked[row * grid.grid_w + col] = true;
        }
    }
    PatchMask {
        grid,
        masked,
        strategy: MaskStrategy::Temporal,
        ratio,
        seed,
    }
}

/// Generate a mask with the given strategy.
pub fn generate_mask(strategy: MaskStrategy, grid: PatchGrid, ratio: f64, seed: u64) -> PatchMask {
    match strategy {
        MaskStrategy::Random => random_mask(grid, ratio, seed),
        MaskStrategy::Block => block_mask(grid, ratio, seed),
        MaskStrategy::Joint => joint_mask(grid, ratio, seed),
        MaskStrategy::Temporal => temporal_mask(grid, ratio, seed),
    }
}

// --- mask files ------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct MaskFile {
    strategy: MaskStrategy,
    ratio: f64,
    seed: u64,
    grid_h: usize,
    grid_w: usize,
    patch_size: usize,
    rng_id: String,
    /// Row-major bits packed LSB-first, base64-encoded.
    bits: String,
}

/// Serialize a mask to its file form.
pub fn mask_to_json(mask: &PatchMask) -> String {
    let mut packed = vec![0u8; mask.masked.len().div_ceil(8)];
    for (i, &m) in mask.masked.iter().enumerate() {
        if m {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    let file = MaskFile {
        strategy: mask.strategy,
        ratio: mask.ratio,
        seed: mask.seed,
        grid_h: mask.grid.grid_h,
        grid_w: mask.grid.grid_w,
        patch_size: mask.grid.patch_size,
        rng_id: RNG_ID.to_string(),
        bits: BASE64.encode(&packed),
    };
    serde_json::to_string_pretty(&file).expect("mask serializes")
}

/// Load a mask from its file form, checking the RNG identifier and payload
/// length.
pub fn mask_from_json(text: &str) -> Result<PatchMask, MaskError> {
    let file: MaskFile = serde_json::from_str(text)?;
    if file.rng_id != RNG_ID {
        return Err(MaskError::Invalid(format!(
            "unsupported rng_id '{}', expected '{RNG_ID}'",
            file.rng_id
        )));
    }
    let grid = PatchGrid {
        patch_size: file.patch_size,
        grid_h: file.grid_h,
        grid_w: file.grid_w,
    };
    let n = grid.n_patches();
    let packed = BASE64
        .decode(file.bits.as_bytes())
        .map_err(|e| MaskError::Invalid(format!("bad base64 payload: {e}")))?;
    if packed.len() != n.div_ceil(8) {
        return Err(MaskError::Invalid(format!(
            "payload holds {} bytes, expected {}",
            packed.len(),
            n.div_ceil(8)
        )));
    }
    let masked = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
    Ok(PatchMask {
        grid,
        masked,
        strategy: file.strategy,
        ratio: file.ratio,
        seed: file.seed,
    })
}
