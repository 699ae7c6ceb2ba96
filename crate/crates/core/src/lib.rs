//! Skeleton-to-image (S2I) encoding of 3D human action sequences.
//!
//! Heterogeneous skeleton data — different joint counts, layouts, and
//! capture devices — is unified by partitioning each format's joints into
//! five semantic body parts, reordering them part by part, stacking the
//! frames over time, and resizing the resulting `T x J` coordinate map to
//! a standard image resolution with the `(x, y, z)` axes on the RGB
//! channels. The crate covers the full data path around that transform:
//!
//! - [`format`]: skeleton format definitions with built-in 25/20/13-joint
//!   layouts and loadable user formats
//! - [`ingest`]: raw file parsing and sequence preprocessing (two-person
//!   splitting, first-frame translation)
//! - [`encoder`] / [`image_io`]: the encode/decode transform and its
//!   lossless and quantized serializations
//! - [`streams`]: bone and motion modality derivation
//! - [`masking`]: deterministic patch-mask sampling over the ViT lattice
//! - [`objectives`]: reference loss formulas and the diffusion schedule
//! - [`stats`]: cross-dataset channel normalization statistics

pub mod encoder;
pub mod format;
pub mod image_io;
pub mod ingest;
pub mod masking;
pub mod objectives;
pub mod sequence;
pub mod stats;
pub mod streams;

pub use encoder::{decode, encode, encode_batch, ImageMeta, S2IImage, CANONICAL_SIZE};
pub use format::{
    builtin_format, load_format, s2i_joint_order, BuiltinFormat, FormatError, FormatRegistry,
    JointDef, PartDef, PartName, ReferenceJoint, SkeletonFormat,
};
pub use image_io::{export, ExportMode, ImageIoError, Sidecar};
pub use ingest::{
    drop_zero_frames, parse_generic_json, parse_ntu_skeleton, serialize_generic_json,
    split_bodies, translate_by_first_frame, IngestError, RawBodyFrame,
};
pub use masking::{
    block_mask, block_mask_with_witness, generate_mask, joint_mask, mask_from_json, mask_to_json,
    random_mask, temporal_mask, MaskError, MaskStrategy, PatchGrid, PatchMask, PlacedBlock,
};
pub use objectives::{
    build_schedule, cross_entropy, diffmae_loss, forward_diffuse, mae_loss, mae_loss_normalized,
    patchify, unpatchify, DiffusionSchedule, ObjectiveError, PatchTensor,
};
pub use sequence::{SequenceError, SkeletonSequence};
pub use stats::{
    denormalize, normalize, stats_from_json, stats_to_json, ChannelStats, DatasetManifest,
    ManifestEntry, StatsError,
};
pub use streams::{bone_stream, derive_stream, motion_stream, Stream};
