//! Reference implementations of the training objective formulas as pure
//! numeric functions: masked reconstruction loss, the forward diffusion
//! process with its variance schedule, and classification cross-entropy.
//! No networks and no gradients — these exist so downstream trainers can
//! validate their own implementations against a fixed reference.

use serde::Serialize;
use thiserror::Error;

use crate::encoder::S2IImage;
use crate::masking::{PatchGrid, PatchMask};

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("patch grid {grid_h}x{grid_w} (patch {patch_size}) does not tile a {height}x{width} image")]
    GridMismatch {
        grid_h: usize,
        grid_w: usize,
        patch_size: usize,
        height: usize,
        width: usize,
    },
    #[error("patch tensors disagree: {a} vs {b} patches of dim {da} vs {db}")]
    ShapeMismatch {
        a: usize,
        b: usize,
        da: usize,
        db: usize,
    },
    #[error("mask covers no patches")]
    EmptyMask,
    #[error("mask has {mask} patches but tensor has {tensor}")]
    MaskMismatch { mask: usize, tensor: usize },
    #[error("diffusion step {t} out of range 1..={t_diff}")]
    StepOutOfRange { t: usize, t_diff: usize },
    #[error("probabilities sum to {sum}, expected 1 within 1e-6")]
    NotASimplex { sum: f64 },
    #[error("probability {value} at class {class} is negative")]
    NegativeProbability { class: usize, value: f64 },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
}

/// Patches of an image flattened to `n_patches x patch_dim` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchTensor {
    pub n_patches: usize,
    /// `patch_size^2 * 3` values per patch.
    pub patch_dim: usize,
    /// Row-major `[patch][element]`.
    pub data: Vec<f64>,
}

impl PatchTensor {
    pub fn patch(&self, index: usize) -> &[f64] {
        &self.data[index * self.patch_dim..(index + 1) * self.patch_dim]
    }
}

/// Split an image into non-overlapping patches, row-major over the grid.
///
/// Within a patch, elements are laid out pixel-major with interleaved
/// channels, so patch 0 starts with the three channel values of pixel
/// `(0, 0)`.
pub fn patchify(img: &S2IImage, grid: &PatchGrid) -> Result<PatchTensor, ObjectiveError> {
    let ps = grid.patch_size;
    if grid.grid_h * ps != img.height() || grid.grid_w * ps != img.width() {
        return Err(ObjectiveError::GridMismatch {
            grid_h: grid.grid_h,
            grid_w: grid.grid_w,
            patch_size: ps,
            height: img.height(),
            width: img.width(),
        });
    }
    let n_patches = grid.n_patches();
    let patch_dim = ps * ps * 3;
    let mut data = Vec::with_capacity(n_patches * patch_dim);
    for pr in 0..grid.grid_h {
        for pc in 0..grid.grid_w {
            for py in 0..ps {
                for px in 0..ps {
                    for c in 0..3 {
                        data.push(img.pixel(pr * ps + py, pc * ps + px, c));
                    }
                }
            }
        }
    }
    Ok(PatchTensor {
        n_patches,
        patch_dim,
        data,
    })
}

/// Reassemble patches into the pixel buffer (inverse of [`patchify`]).
pub fn unpatchify(patches: &PatchTensor, grid: &PatchGrid) -> Result<Vec<f64>, ObjectiveError> {
    let ps = grid.patch_size;
    if patches.n_patches != grid.n_patches() || patches.patch_dim != ps * ps * 3 {
        return Err(ObjectiveError::ShapeMismatch {
            a: patches.n_patches,
            b: grid.n_patches(),
            da: patches.patch_dim,
            db: ps * ps * 3,
        });
    }
    let width = grid.grid_w * ps;
    let mut pixels = vec![0.0f64; grid.grid_h * ps * width * 3];
    let mut iter = patches.data.iter();
    for pr in 0..grid.grid_h {
        for pc in 0..grid.grid_w {
            for py in 0..ps {
                for px in 0..ps {
                    for c in 0..3 {
                        let (h, w) = (pr * ps + py, pc * ps + px);
                        pixels[(h * width + w) * 3 + c] = *iter.next().unwrap();
                    }
                }
            }
        }
    }
    Ok(pixels)
}

fn check_pair(pred: &PatchTensor, target: &PatchTensor) -> Result<(), ObjectiveError> {
    if pred.n_patches != target.n_patches || pred.patch_dim != target.patch_dim {
        return Err(ObjectiveError::ShapeMismatch {
            a: pred.n_patches,
            b: target.n_patches,
            da: pred.patch_dim,
            db: target.patch_dim,
        });
    }
    Ok(())
}

fn masked_squared_error(
    pred: &PatchTensor,
    target: &PatchTensor,
    mask: &PatchMask,
) -> Result<(f64, usize), ObjectiveError> {
    check_pair(pred, target)?;
    if mask.masked.len() != pred.n_patches {
        return Err(ObjectiveError::MaskMismatch {
            mask: mask.masked.len(),
            tensor: pred.n_patches,
        });
    }
    let mut sum = 0.0;
    let mut masked = 0usize;
    for i in 0..pred.n_patches {
        if !mask.masked[i] {
            continue;
        }
        masked += 1;
        sum += pred
            .patch(i)
            .iter()
            .zip(target.patch(i))
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
    }
    if masked == 0 {
        return Err(ObjectiveError::EmptyMask);
    }
    Ok((sum, masked))
}

/// Masked reconstruction loss: the squared L2 norm of each masked patch's
/// residual, averaged over masked patches.
pub fn mae_loss(
    pred: &PatchTensor,
    target: &PatchTensor,
    mask: &PatchMask,
) -> Result<f64, ObjectiveError> {
    let (sum, masked) = masked_squared_error(pred, target, mask)?;
    Ok(sum / masked as f64)
}

/// [`mae_loss`] additionally divided by the patch dimension, i.e. a plain
/// per-element MSE over masked patches. The two differ by the constant
/// factor `patch_dim` (768 for 16 x 16 x 3 patches).
pub fn mae_loss_normalized(
    pred: &PatchTensor,
    target: &PatchTensor,
    mask: &PatchMask,
) -> Result<f64, ObjectiveError> {
    let (sum, masked) = masked_squared_error(pred, target, mask)?;
    Ok(sum / (masked * pred.patch_dim) as f64)
}

/// Diffusion-based reconstruction loss: per-element MSE between the true
/// masked content and a caller-supplied prediction of it, restricted to
/// masked patches. The denoising networks live in the caller; this only
/// scores their output.
pub fn diffmae_loss(
    pred_x0m: &PatchTensor,
    true_x0m: &PatchTensor,
    mask: &PatchMask,
) -> Result<f64, ObjectiveError> {
    mae_loss_normalized(pred_x0m, true_x0m, mask)
}

/// The forward diffusion variance schedule: a linear beta ramp from 1e-4
/// to 0.02, optionally sharpened by exponentiating each beta with `rho`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionSchedule {
    pub t_diff: usize,
    pub rho: f64,
    /// 0-indexed storage for steps `t = 1..=t_diff`.
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 0.02;
pub const DEFAULT_T_DIFF: usize = 1000;
pub const DEFAULT_RHO: f64 = 1.0;

/// Build the schedule: `beta[t] = beta_lin(t)^rho` with `beta_lin` linear
/// from 1e-4 at t=1 to 0.02 at t=t_diff, `alpha[t] = 1 - beta[t]`, and
/// `alpha_bar[t]` their running product.
///
/// # Panics
///
/// Panics if `t_diff` is 0 or `rho` is not positive.
pub fn build_schedule(t_diff: usize, rho: f64) -> DiffusionSchedule {
    assert!(t_diff >= 1, "schedule needs at least one step");
    assert!(rho > 0.0, "rho must be positive");
    let mut beta = Vec::with_capacity(t_diff);
    let mut alpha = Vec::with_capacity(t_diff);
    let mut alpha_bar = Vec::with_capacity(t_diff);
    let mut product = 1.0f64;
    for t in 1..=t_diff {
        let lin = if t_diff == 1 {
            BETA_START
        } else {
            BETA_START + (t - 1) as f64 * (BETA_END - BETA_START) / (t_diff - 1) as f64
        };
        let b = lin.powf(rho);
        beta.push(b);
        alpha.push(1.0 - b);
        product *= 1.0 - b;
        alpha_bar.push(product);
    }
    DiffusionSchedule {
        t_diff,
        rho,
        beta,
        alpha,
        alpha_bar,
    }
}

impl DiffusionSchedule {
    fn check_step(&self, t: usize) -> Result<usize, ObjectiveError> {
        if t < 1 || t > self.t_diff {
            return Err(ObjectiveError::StepOutOfRange {
                t,
                t_diff: self.t_diff,
            });
        }
        Ok(t - 1)
    }

    /// `beta_t` for 1-based step `t`.
    pub fn beta(&self, t: usize) -> Result<f64, ObjectiveError> {
        Ok(self.beta[self.check_step(t)?])
    }

    pub fn alpha(&self, t: usize) -> Result<f64, ObjectiveError> {
        Ok(self.alpha[self.check_step(t)?])
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64, ObjectiveError> {
        Ok(self.alpha_bar[self.check_step(t)?])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

/// Forward diffusion of clean patches at step `t`:
/// `sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps`.
pub fn forward_diffuse(
    x0: &PatchTensor,
    t: usize,
    eps: &PatchTensor,
    sched: &DiffusionSchedule,
) -> Result<PatchTensor, ObjectiveError> {
    check_pair(x0, eps)?;
    let abar = sched.alpha_bar(t)?;
    let signal = abar.sqrt();
    let noise = (1.0 - abar).sqrt();
    let data = x0
        .data
        .iter()
        .zip(&eps.data)
        .map(|(x, e)| signal * x + noise * e)
        .collect();
    Ok(PatchTensor {
        n_patches: x0.n_patches,
        patch_dim: x0.patch_dim,
        data,
    })
}

/// Classification cross-entropy: `-ln(probs[label])` with the probability
/// floored at 1e-12. `probs` must be a simplex vector (entries >= 0,
/// summing to 1 within 1e-6).
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64, ObjectiveError> {
    if label >= probs.len() {
        return Err(ObjectiveError::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    let mut sum = 0.0;
    for (class, &p) in probs.iter().enumerate() {
        if p < 0.0 {
            return Err(ObjectiveError::NegativeProbability { class, value: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(ObjectiveError::NotASimplex { sum });
    }
    Ok(-probs[label].max(1e-12).ln())
}
