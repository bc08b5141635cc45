//! Synthesizing training examples through label-altering transforms.
//!
//! Synthetic examples are references `(source video, transform, label)`; the
//! transformed clips themselves are produced on demand from the source tensors.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::manifest::{ClassTransformMap, DatasetManifest, MapViolation, Split};
use crate::transform::TransformId;
use crate::ClassId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("class transform map is invalid ({} violation(s), first: {})", .0.len(), .0[0])]
    InvalidMap(Vec<MapViolation>),
    #[error("map describes {map} but {requested} was requested")]
    TransformMismatch {
        map: TransformId,
        requested: TransformId,
    },
    #[error("map has no equivariant pairs, so no zero-shot split can be built")]
    NoEquivariantPairs,
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(String),
    #[error("the {transform} transform would turn class {class} into a class outside the dataset")]
    NovelClass {
        class: ClassId,
        transform: TransformId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Augmentation,
    ZeroShot,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Augmentation => "augment",
            Provenance::ZeroShot => "zeroshot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticExample {
    pub source_video_id: String,
    pub transform: TransformId,
    pub class_id: ClassId,
    pub provenance: Provenance,
}

impl SyntheticExample {
    /// Identifier of the synthesized video, usable as a file stem.
    pub fn video_id(&self) -> String {
        format!("{}__{}", self.source_video_id, self.transform)
    }
}

fn validated(manifest: &DatasetManifest, map: &ClassTransformMap) -> Result<(), SynthesisError> {
    let violations = map.validate(manifest);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(SynthesisError::InvalidMap(violations))
    }
}

/// One transformed copy of every training example whose class is invariant
/// or equivariant, labelled through the class transform.
///
/// Together with the real examples this gives
/// `V_aug(y) = V_y ∪ {T(v) | v ∈ V_y', T_y(y') = y}`; novel and unmapped
/// classes contribute nothing. Output follows manifest order.
pub fn build_augmented(
    manifest: &DatasetManifest,
    map: &ClassTransformMap,
) -> Result<Vec<SyntheticExample>, SynthesisError> {
    validated(manifest, map)?;
    Ok(manifest
        .records()
        .iter()
        .filter(|r| r.split == Split::Train)
        .filter_map(|r| {
            map.target_of(r.class_id).map(|class_id| SyntheticExample {
                source_video_id: r.video_id.clone(),
                transform: map.transform,
                class_id,
                provenance: Provenance::Augmentation,
            })
        })
        .collect())
}

/// A dataset where one class of each equivariant pair has no real training
/// data and is learnt from transformed examples of its counterpart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroShotSplit {
    /// `(many-shot, zero-shot)` per equivariant pair, ordered by the pair's smaller id.
    pub pairs: Vec<(ClassId, ClassId)>,
    /// Input manifest minus the training records of zero-shot classes.
    pub retained: DatasetManifest,
    pub synthesized: Vec<SyntheticExample>,
}

impl ZeroShotSplit {
    pub fn many_shot_classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.pairs.iter().map(|p| p.0)
    }

    pub fn zero_shot_classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.pairs.iter().map(|p| p.1)
    }
}

/// Per equivariant pair, keeps the class with more training examples (lower
/// id on ties) and replaces the other's training data with transformed
/// examples of the kept class. Validation and test records are untouched.
pub fn build_zero_shot_subset(
    manifest: &DatasetManifest,
    map: &ClassTransformMap,
    transform: TransformId,
) -> Result<ZeroShotSplit, SynthesisError> {
    if map.transform != transform {
        return Err(SynthesisError::TransformMismatch {
            map: map.transform,
            requested: transform,
        });
    }
    validated(manifest, map)?;
    let support = manifest.split_counts(Split::Train);
    let pairs: Vec<(ClassId, ClassId)> = map
        .equivariant_pairs()
        .into_iter()
        .map(|(a, b)| {
            if support[&b] > support[&a] {
                (b, a)
            } else {
                (a, b)
            }
        })
        .collect();
    if pairs.is_empty() {
        return Err(SynthesisError::NoEquivariantPairs);
    }
    let zero_of: BTreeMap<ClassId, ClassId> =
        pairs.iter().map(|&(many, zero)| (many, zero)).collect();
    let zero_shot: BTreeSet<ClassId> = pairs.iter().map(|&(_, zero)| zero).collect();

    let retained =
        manifest.filtered(|r| !(r.split == Split::Train && zero_shot.contains(&r.class_id)));
    let synthesized = manifest
        .records()
        .iter()
        .filter(|r| r.split == Split::Train)
        .filter_map(|r| {
            zero_of.get(&r.class_id).map(|&zero| SyntheticExample {
                source_video_id: r.video_id.clone(),
                transform,
                class_id: zero,
                provenance: Provenance::ZeroShot,
            })
        })
        .collect();
    Ok(ZeroShotSplit {
        pairs,
        retained,
        synthesized,
    })
}

/// Outcome of one draw: the composed transform to apply (if any) and the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledExample {
    pub transform: Option<TransformId>,
    pub class_id: ClassId,
}

/// Online augmentation: each configured transform is applied independently
/// with probability `p`, and the label follows each applied class transform
/// in configuration order.
#[derive(Debug, Clone)]
pub struct AugmentationSampler {
    maps: Vec<ClassTransformMap>,
    coin: Bernoulli,
    rng: ChaCha8Rng,
}

impl AugmentationSampler {
    pub fn new(maps: Vec<ClassTransformMap>, p: f64, seed: u64) -> Result<Self, SynthesisError> {
        let coin =
            Bernoulli::new(p).map_err(|_| SynthesisError::InvalidProbability(format!("{p}")))?;
        Ok(AugmentationSampler {
            maps,
            coin,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Sampler for data-loading worker `worker` of a run seeded with `seed`.
    pub fn for_worker(
        maps: Vec<ClassTransformMap>,
        p: f64,
        seed: u64,
        worker: u64,
    ) -> Result<Self, SynthesisError> {
        Self::new(maps, p, worker_seed(seed, worker))
    }

    pub fn sample(&mut self, class: ClassId) -> Result<SampledExample, SynthesisError> {
        let mut transform = None;
        let mut label = class;
        for map in &self.maps {
            if !self.coin.sample(&mut self.rng) {
                continue;
            }
            label = map.target_of(label).ok_or(SynthesisError::NovelClass {
                class: label,
                transform: map.transform,
            })?;
            transform = match transform {
                None => Some(map.transform),
                Some(t) => t.then(map.transform),
            };
        }
        Ok(SampledExample {
            transform,
            class_id: label,
        })
    }
}

/// Derives an independent per-worker seed (SplitMix64 finalizer).
pub fn worker_seed(seed: u64, worker: u64) -> u64 {
    let mut z = seed ^ worker.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
