//! Image export and import: lossless little-endian f32 tensors, quantized
//! 8-bit PNG, and the sidecar metadata document that makes both invertible.

use std::io::Cursor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{ImageError, ImageMeta, S2IImage};

/// Magic bytes opening every f32raw stream.
pub const F32RAW_MAGIC: [u8; 4] = *b"S2I1";

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("bad magic bytes, expected \"S2I1\"")]
    BadMagic,
    #[error("stream holds {got} bytes, expected {expected}")]
    UnexpectedEof { expected: usize, got: usize },
    #[error("sidecar is not valid JSON: {0}")]
    SidecarJson(#[from] serde_json::Error),
    #[error("sidecar invalid: {0}")]
    SidecarInvalid(String),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Export mode for encoded images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportMode {
    /// Unquantized 32-bit reals: magic, u32 height, u32 width, then
    /// row-major `H x W x 3` little-endian f32.
    F32Raw,
    /// Standard 8-bit RGB PNG quantized by the recorded channel affine.
    Png8,
}

impl ExportMode {
    pub fn file_extension(self) -> &'static str {
        match self {
            ExportMode::F32Raw => "s2i",
            ExportMode::Png8 => "png",
        }
    }
}

/// The sidecar document accompanying every exported image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub sample_id: String,
    pub format_id: String,
    pub original_t: usize,
    pub original_j: usize,
    /// Per-channel `[scale, offset]`.
    pub channel_affine: [[f64; 2]; 3],
    pub joint_order: Vec<usize>,
}

impl Sidecar {
    pub fn from_meta(meta: &ImageMeta) -> Self {
        Sidecar {
            sample_id: meta.sample_id.clone(),
            format_id: meta.format_id.clone(),
            original_t: meta.original_t,
            original_j: meta.original_j,
            channel_affine: meta.channel_affine.map(|(scale, offset)| [scale, offset]),
            joint_order: meta.joint_order.clone(),
        }
    }

    pub fn into_meta(self) -> ImageMeta {
        ImageMeta {
            sample_id: self.sample_id,
            format_id: self.format_id,
            original_t: self.original_t,
            original_j: self.original_j,
            channel_affine: self.channel_affine.map(|[scale, offset]| (scale, offset)),
            joint_order: self.joint_order,
        }
    }

    /// Check the invariants a well-formed sidecar must satisfy.
    pub fn validate(&self) -> Result<(), ImageIoError> {
        let n = self.joint_order.len();
        let mut seen = vec![false; n];
        for &j in &self.joint_order {
            if j >= n || seen[j] {
                return Err(ImageIoError::SidecarInvalid(format!(
                    "joint_order is not a permutation of 0..{n}"
                )));
            }
            seen[j] = true;
        }
        if self.original_t == 0 || self.original_j == 0 {
            return Err(ImageIoError::SidecarInvalid(
                "original dimensions must be positive".to_string(),
            ));
        }
        for [scale, offset] in &self.channel_affine {
            if !scale.is_finite() || !offset.is_finite() || *scale < 0.0 {
                return Err(ImageIoError::SidecarInvalid(
                    "channel_affine must be finite with non-negative scale".to_string(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sidecar serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ImageIoError> {
        let sidecar: Sidecar = serde_json::from_str(text)?;
        sidecar.validate()?;
        Ok(sidecar)
    }
}

/// Serialize to the f32raw wire format. Values are narrowed to f32; the
/// byte stream itself round-trips losslessly through [`import_f32raw`].
pub fn export_f32raw(img: &S2IImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + img.pixels().len() * 4);
    out.extend_from_slice(&F32RAW_MAGIC);
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    for &v in img.pixels() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn import_f32raw(bytes: &[u8], sidecar: &Sidecar) -> Result<S2IImage, ImageIoError> {
    if bytes.len() < 12 {
        return Err(ImageIoError::UnexpectedEof {
            expected: 12,
            got: bytes.len(),
        });
    }
    if bytes[..4] != F32RAW_MAGIC {
        return Err(ImageIoError::BadMagic);
    }
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + height * width * 3 * 4;
    if bytes.len() != expected {
        return Err(ImageIoError::UnexpectedEof {
            expected,
            got: bytes.len(),
        });
    }
    sidecar.validate()?;
    let pixels = bytes[12..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Ok(S2IImage::new(height, width, pixels, sidecar.clone().into_meta())?)
}

/// Quantize to 8-bit RGB PNG using the image's recorded channel affine.
/// A constant channel (scale 0) maps every pixel to byte 128.
pub fn export_png8(img: &S2IImage) -> Result<Vec<u8>, ImageIoError> {
    let affine = img.meta().channel_affine;
    let mut bytes = Vec::with_capacity(img.pixels().len());
    for chunk in img.pixels().chunks_exact(3) {
        for (c, &v) in chunk.iter().enumerate() {
            let (scale, offset) = affine[c];
            let byte = if scale == 0.0 {
                128u8
            } else {
                ((v - offset) / scale).round().clamp(0.0, 255.0) as u8
            };
            bytes.push(byte);
        }
    }
    let buffer: image::RgbImage =
        image::ImageBuffer::from_raw(img.width() as u32, img.height() as u32, bytes)
            .expect("byte buffer matches dimensions");
    let mut out = Cursor::new(Vec::new());
    buffer.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// De-quantize an 8-bit PNG using the sidecar's channel affine:
/// `value = offset + byte * scale`.
pub fn import_png8(bytes: &[u8], sidecar: &Sidecar) -> Result<S2IImage, ImageIoError> {
    sidecar.validate()?;
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.into_rgb8();
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let affine = sidecar.channel_affine;
    let pixels = decoded
        .into_raw()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let [scale, offset] = affine[i % 3];
            offset + b as f64 * scale
        })
        .collect();
    Ok(S2IImage::new(height, width, pixels, sidecar.clone().into_meta())?)
}

/// Export in the requested mode, returning the payload and sidecar text.
pub fn export(img: &S2IImage, mode: ExportMode) -> Result<(Vec<u8>, String), ImageIoError> {
    let payload = match mode {
        ExportMode::F32Raw => export_f32raw(img),
        ExportMode::Png8 => export_png8(img)?,
    };
    Ok((payload, Sidecar::from_meta(img.meta()).to_json()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_image(pixels: Vec<f64>, height: usize, width: usize) -> S2IImage {
        let meta = ImageMeta {
            sample_id: "img".into(),
            format_id: "tiny5".into(),
            original_t: height,
            original_j: width,
            channel_affine: [(0.0, 0.0); 3],
            joint_order: (0..width).collect(),
        };
        S2IImage::new(height, width, pixels, meta).unwrap()
    }

    #[test]
    fn f32raw_bytes_round_trip() {
        let pixels: Vec<f64> = (0..4 * 5 * 3).map(|i| (i as f64) * 0.37 - 2.0).collect();
        let img = test_image(pixels, 4, 5);
        let bytes = export_f32raw(&img);
        assert_eq!(&bytes[..4], b"S2I1");
        let sidecar = Sidecar::from_meta(img.meta());
        let back = import_f32raw(&bytes, &sidecar).unwrap();
        assert_eq!(export_f32raw(&back), bytes);
        // Sidecar metadata survives the trip.
        assert_eq!(back.meta().joint_order, img.meta().joint_order);
    }

    #[test]
    fn f32raw_rejects_bad_magic_and_truncation() {
        let img = test_image(vec![0.0; 2 * 2 * 3], 2, 2);
        let sidecar = Sidecar::from_meta(img.meta());
        let mut bytes = export_f32raw(&img);
        bytes[0] = b'X';
        assert!(matches!(
            import_f32raw(&bytes, &sidecar),
            Err(ImageIoError::BadMagic)
        ));
        let bytes = export_f32raw(&img);
        assert!(matches!(
            import_f32raw(&bytes[..bytes.len() - 1], &sidecar),
            Err(ImageIoError::UnexpectedEof { .. })
        ));
    }

    #[test]
    fn png8_constant_channel_maps_to_128() {
        let img = test_image(vec![7.5; 3 * 3 * 3], 3, 3);
        assert_eq!(img.meta().channel_affine, [(0.0, 7.5); 3]);
        let bytes = export_png8(&img).unwrap();
        let decoded = image::load_from_memory(&bytes).unwrap().into_rgb8();
        assert!(decoded.into_raw().iter().all(|&b| b == 128));
        let back = import_png8(&bytes, &Sidecar::from_meta(img.meta())).unwrap();
        assert!(back.pixels().iter().all(|&v| v == 7.5));
    }

    #[test]
    fn png8_quantization_error_is_bounded() {
        let pixels: Vec<f64> = (0..8 * 8 * 3)
            .map(|i| ((i * 2654435761usize) % 1000) as f64 / 250.0 - 2.0)
            .collect();
        let img = test_image(pixels, 8, 8);
        let bytes = export_png8(&img).unwrap();
        let back = import_png8(&bytes, &Sidecar::from_meta(img.meta())).unwrap();
        let bounds = img.channel_bounds();
        for (i, (&orig, &quant)) in img.pixels().iter().zip(back.pixels()).enumerate() {
            let (min, max) = bounds[i % 3];
            let limit = (max - min) / 255.0 * 0.5 + 1e-9;
            assert!(
                (orig - quant).abs() <= limit,
                "pixel {i}: |{orig} - {quant}| > {limit}"
            );
        }
    }

    #[test]
    fn sidecar_rejects_non_permutation() {
        let img = test_image(vec![0.0; 12], 2, 2);
        let mut sidecar = Sidecar::from_meta(img.meta());
        sidecar.joint_order = vec![0, 0];
        assert!(matches!(
            sidecar.validate(),
            Err(ImageIoError::SidecarInvalid(_))
        ));
        let json = sidecar.to_json();
        assert!(Sidecar::from_json(&json).is_err());
    }
}
