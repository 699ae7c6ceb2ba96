//! The skeleton-to-image transform: part-ordered joint reordering, temporal
//! stacking, and separable align-corners linear interpolation to the target
//! resolution, plus the inverse transform used for verification.
//!
//! Axis convention: rows are time (row 0 is frame 0), columns are joints in
//! [`s2i_joint_order`], and channels map x to R, y to G, z to B.

use rayon::prelude::*;
use thiserror::Error;

use crate::format::{s2i_joint_order, SkeletonFormat};
use crate::sequence::SkeletonSequence;

/// Standard vision-model input size.
pub const CANONICAL_SIZE: (usize, usize) = (224, 224);

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("pixel buffer holds {got} values, expected {height} x {width} x 3")]
    ShapeMismatch {
        height: usize,
        width: usize,
        got: usize,
    },
    #[error("image dimensions must be at least 1x1")]
    EmptyImage,
    #[error("non-finite pixel at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// Everything needed to invert or export an encoded image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMeta {
    pub sample_id: String,
    pub format_id: String,
    pub original_t: usize,
    pub original_j: usize,
    /// Per-channel `(scale, offset)` for 8-bit export: `value ~= offset +
    /// byte * scale`. A constant channel has scale 0.
    pub channel_affine: [(f64, f64); 3],
    /// The joint permutation applied to columns before resizing.
    pub joint_order: Vec<usize>,
}

/// A real-valued H x W x 3 image produced by [`encode`].
///
/// Pixels stay unquantized in memory; integer quantization happens only at
/// 8-bit export, with the affine recorded in the metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct S2IImage {
    height: usize,
    width: usize,
    /// Row-major `[h][w][c]`.
    pixels: Vec<f64>,
    meta: ImageMeta,
}

impl S2IImage {
    /// Build an image from raw parts, validating shape and finiteness.
    /// The metadata's channel affine is recomputed from the pixels.
    pub fn new(
        height: usize,
        width: usize,
        pixels: Vec<f64>,
        mut meta: ImageMeta,
    ) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyImage);
        }
        if pixels.len() != height * width * 3 {
            return Err(ImageError::ShapeMismatch {
                height,
                width,
                got: pixels.len(),
            });
        }
        for (i, v) in pixels.iter().enumerate() {
            if !v.is_finite() {
                let pixel = i / 3;
                return Err(ImageError::NonFinite {
                    row: pixel / width,
                    col: pixel % width,
                });
            }
        }
        meta.channel_affine = channel_affine(&pixels);
        Ok(S2IImage {
            height,
            width,
            pixels,
            meta,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.pixels[(row * self.width + col) * 3 + channel]
    }

    /// Row-major `[h][w][c]` pixel buffer.
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn meta(&self) -> &ImageMeta {
        &self.meta
    }

    /// Same metadata identity, new pixel values (affine recomputed).
    pub fn with_pixels(&self, pixels: Vec<f64>) -> Result<Self, ImageError> {
        Self::new(self.height, self.width, pixels, self.meta.clone())
    }

    /// Per-channel `(min, max)` over all pixels.
    pub fn channel_bounds(&self) -> [(f64, f64); 3] {
        channel_bounds(&self.pixels)
    }
}

fn channel_bounds(pixels: &[f64]) -> [(f64, f64); 3] {
    let mut bounds = [(f64::INFINITY, f64::NEG_INFINITY); 3];
    for chunk in pixels.chunks_exact(3) {
        for c in 0..3 {
            bounds[c].0 = bounds[c].0.min(chunk[c]);
            bounds[c].1 = bounds[c].1.max(chunk[c]);
        }
    }
    bounds
}

/// The 8-bit export affine: `scale = (max - min) / 255`, `offset = min`,
/// degenerating to scale 0 for constant channels.
fn channel_affine(pixels: &[f64]) -> [(f64, f64); 3] {
    channel_bounds(pixels).map(|(min, max)| {
        if max > min {
            ((max - min) / 255.0, min)
        } else {
            (0.0, min)
        }
    })
}

/// Align-corners sample positions for resampling `len_in` samples to
/// `len_out`: for each output index, the two source indices and the
/// interpolation fraction.
///
/// The first and last outputs are pinned exactly to the first and last
/// inputs. A single-sample input extends as a constant; a single-sample
/// output takes the first input.
fn axis_map(len_in: usize, len_out: usize) -> Vec<(usize, usize, f64)> {
    debug_assert!(len_in >= 1 && len_out >= 1);
    if len_in == 1 {
        return vec![(0, 0, 0.0); len_out];
    }
    if len_out == 1 {
        return vec![(0, 0, 0.0)];
    }
    (0..len_out)
        .map(|i| {
            if i == len_out - 1 {
                return (len_in - 1, len_in - 1, 0.0);
            }
            let pos = (i * (len_in - 1)) as f64 / (len_out - 1) as f64;
            let i0 = (pos as usize).min(len_in - 1);
            let i1 = (i0 + 1).min(len_in - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, frac: f64) -> f64 {
    a * (1.0 - frac) + b * frac
}

/// Separable align-corners resize of a row-major `t_in x j_in x 3` plane:
/// rows first, then columns.
pub(crate) fn resize_plane(
    grid: &[f64],
    t_in: usize,
    j_in: usize,
    height: usize,
    width: usize,
) -> Vec<f64> {
    debug_assert_eq!(grid.len(), t_in * j_in * 3);
    let row_len = j_in * 3;

    let row_map = axis_map(t_in, height);
    let mut rows = vec![0.0f64; height * row_len];
    for (h, &(t0, t1, frac)) in row_map.iter().enumerate() {
        let (a, b) = (&grid[t0 * row_len..], &grid[t1 * row_len..]);
        let out = &mut rows[h * row_len..(h + 1) * row_len];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = lerp(a[i], b[i], frac);
        }
    }

    let col_map = axis_map(j_in, width);
    let mut pixels = vec![0.0f64; height * width * 3];
    for h in 0..height {
        let row = &rows[h * row_len..(h + 1) * row_len];
        let out = &mut pixels[h * width * 3..(h + 1) * width * 3];
        for (w, &(j0, j1, frac)) in col_map.iter().enumerate() {
            for c in 0..3 {
                out[w * 3 + c] = lerp(row[j0 * 3 + c], row[j1 * 3 + c], frac);
            }
        }
    }
    pixels
}

/// Encode a sequence into its image representation.
///
/// Joints are reordered by the format's part sequence, the `T x J`
/// coordinate map is stacked over time, and both axes are resized
/// independently by align-corners linear interpolation to `target`.
/// Coordinates map to channels as x to R, y to G, z to B.
///
/// # Panics
///
/// Panics if the sequence does not match the format or `target` has a zero
/// dimension.
pub fn encode(
    seq: &SkeletonSequence,
    format: &SkeletonFormat,
    target: (usize, usize),
) -> S2IImage {
    let (height, width) = target;
    assert!(height >= 1 && width >= 1, "target must be at least 1x1");
    assert_eq!(
        seq.joint_count(),
        format.joint_count(),
        "sequence does not match format '{}'",
        format.format_id()
    );

    let order = s2i_joint_order(format);
    let t_in = seq.frame_count();
    let j_in = seq.joint_count();
    let row_len = j_in * 3;

    // Reordered T x J x 3 coordinate map.
    let mut grid = vec![0.0f64; t_in * row_len];
    for t in 0..t_in {
        let frame = seq.frame(t);
        let row = &mut grid[t * row_len..(t + 1) * row_len];
        for (w, &j) in order.iter().enumerate() {
            row[w * 3..w * 3 + 3].copy_from_slice(&frame[j]);
        }
    }

    let pixels = resize_plane(&grid, t_in, j_in, height, width);

    let meta = ImageMeta {
        sample_id: seq.sample_id().to_string(),
        format_id: seq.format_id().to_string(),
        original_t: t_in,
        original_j: j_in,
        channel_affine: channel_affine(&pixels),
        joint_order: order,
    };
    S2IImage {
        height,
        width,
        pixels,
        meta,
    }
}

/// Encode many sequences in parallel. Each encode is independent, so the
/// output order matches the input order regardless of scheduling.
pub fn encode_batch(
    seqs: &[SkeletonSequence],
    format: &SkeletonFormat,
    target: (usize, usize),
) -> Vec<S2IImage> {
    seqs.par_iter().map(|seq| encode(seq, format, target)).collect()
}

/// Invert [`encode`]: resample back to `target_t x target_j` and undo the
/// joint permutation.
///
/// The permutation is undone only when `target_j` matches the recorded
/// joint order's length; other widths keep columns in part order. Corner
/// grid points round-trip exactly; interior frames are exact only when the
/// output grid nests in the image grid.
pub fn decode(img: &S2IImage, target_t: usize, target_j: usize) -> SkeletonSequence {
    assert!(target_t >= 1 && target_j >= 1, "target must be at least 1x1");

    let row_map = axis_map(img.height, target_t);
    let col_map = axis_map(img.width, target_j);
    let width = img.width;

    let order = &img.meta.joint_order;
    let unpermute = order.len() == target_j;

    let mut coords = vec![[0.0f64; 3]; target_t * target_j];
    for (t, &(h0, h1, hfrac)) in row_map.iter().enumerate() {
        for (w, &(w0, w1, wfrac)) in col_map.iter().enumerate() {
            let joint = if unpermute { order[w] } else { w };
            let slot = &mut coords[t * target_j + joint];
            for (c, value) in slot.iter_mut().enumerate() {
                let top = lerp(
                    img.pixels[(h0 * width + w0) * 3 + c],
                    img.pixels[(h0 * width + w1) * 3 + c],
                    wfrac,
                );
                let bottom = lerp(
                    img.pixels[(h1 * width + w0) * 3 + c],
                    img.pixels[(h1 * width + w1) * 3 + c],
                    wfrac,
                );
                *value = lerp(top, bottom, hfrac);
            }
        }
    }

    let body_track = vec!["0".to_string(); target_t];
    SkeletonSequence::new(
        img.meta.format_id.clone(),
        img.meta.sample_id.clone(),
        target_j,
        coords,
        body_track,
    )
    .expect("decoding a finite image yields a valid sequence")
}
