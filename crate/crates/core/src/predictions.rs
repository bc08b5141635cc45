//! Ranked model predictions for original and transformed videos.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::transform::TransformId;
use crate::ClassId;

/// Which version of a video a prediction was made on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Original,
    Transformed(TransformId),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Original => f.write_str("original"),
            Variant::Transformed(t) => write!(f, "transformed:{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictionError {
    #[error("video {video_id:?} has an empty ranking for the {variant} variant")]
    EmptyRanking { video_id: String, variant: Variant },
    #[error("video {video_id:?} ranks class {class_id} more than once ({variant} variant)")]
    DuplicateClass {
        video_id: String,
        variant: Variant,
        class_id: ClassId,
    },
    #[error("video {video_id:?} already has a prediction for the {variant} variant")]
    DuplicateEntry { video_id: String, variant: Variant },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct VideoPredictions {
    original: Option<Vec<ClassId>>,
    transformed: [Option<Vec<ClassId>>; 3],
}

impl VideoPredictions {
    fn slot(&mut self, variant: Variant) -> &mut Option<Vec<ClassId>> {
        match variant {
            Variant::Original => &mut self.original,
            Variant::Transformed(t) => &mut self.transformed[t.index()],
        }
    }

    fn get(&self, variant: Variant) -> Option<&[ClassId]> {
        match variant {
            Variant::Original => self.original.as_deref(),
            Variant::Transformed(t) => self.transformed[t.index()].as_deref(),
        }
    }
}

/// Predictions keyed by `(video id, variant)`. Rank 0 is the top-1 class.
///
/// Rankings are non-empty and contain each class at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionLog {
    videos: BTreeMap<String, VideoPredictions>,
    entries: usize,
}

impl PredictionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        video_id: impl Into<String>,
        variant: Variant,
        ranking: Vec<ClassId>,
    ) -> Result<(), PredictionError> {
        let video_id = video_id.into();
        if ranking.is_empty() {
            return Err(PredictionError::EmptyRanking { video_id, variant });
        }
        let mut seen = BTreeSet::new();
        for &c in &ranking {
            if !seen.insert(c) {
                return Err(PredictionError::DuplicateClass {
                    video_id,
                    variant,
                    class_id: c,
                });
            }
        }
        let slot = self
            .videos
            .entry(video_id.clone())
            .or_default()
            .slot(variant);
        if slot.is_some() {
            return Err(PredictionError::DuplicateEntry { video_id, variant });
        }
        *slot = Some(ranking);
        self.entries += 1;
        Ok(())
    }

    pub fn ranking(&self, video_id: &str, variant: Variant) -> Option<&[ClassId]> {
        self.videos.get(video_id).and_then(|v| v.get(variant))
    }

    pub fn top1(&self, video_id: &str, variant: Variant) -> Option<ClassId> {
        self.ranking(video_id, variant).map(|r| r[0])
    }

    /// Number of `(video, variant)` entries.
    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    /// Every class id mentioned anywhere in a ranking.
    pub fn predicted_classes(&self) -> BTreeSet<ClassId> {
        let mut out = BTreeSet::new();
        for v in self.videos.values() {
            let all = core::iter::once(&v.original).chain(v.transformed.iter());
            for r in all.flatten() {
                out.extend(r.iter().copied());
            }
        }
        out
    }
}
