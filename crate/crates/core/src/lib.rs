//! Label-altering video transforms and the machinery around them.
//!
//! This crate is `no_std` (it needs `alloc`) and holds every algorithm of the
//! toolkit: the self-invertible clip transforms ([`tensor`], [`transform`]),
//! dataset manifests and class-transform maps ([`manifest`]), discovery of
//! class transforms from prediction logs ([`discovery`]), synthesis of
//! augmented and zero-shot training sets ([`synthesis`]), evaluation
//! ([`metrics`]) and the time-reversal perception statistics ([`perception`]).
//!
//! File formats, IO and the command-line front end live in the `retro` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod discovery;
pub mod manifest;
pub mod metrics;
pub mod perception;
pub mod predictions;
pub mod synthesis;
pub mod tensor;
pub mod transform;

use core::fmt;

pub use discovery::{DiscoveryConfig, DiscoveryReport};
pub use manifest::{ClassTransform, ClassTransformMap, DatasetManifest, ManifestRecord, Split};
pub use predictions::{PredictionLog, Variant};
pub use tensor::{DType, Dims, FrameTensor, Layout};
pub use transform::TransformId;

/// Dataset class identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for ClassId {
    fn from(id: u32) -> Self {
        ClassId(id)
    }
}
