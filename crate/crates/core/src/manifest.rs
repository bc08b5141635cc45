//! Dataset manifests and per-class transform maps.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::transform::TransformId;
use crate::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub video_id: String,
    pub class_id: ClassId,
    pub split: Split,
}

impl ManifestRecord {
    pub fn new(video_id: impl Into<String>, class_id: impl Into<ClassId>, split: Split) -> Self {
        ManifestRecord {
            video_id: video_id.into(),
            class_id: class_id.into(),
            split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("duplicate video id {0:?}")]
    DuplicateVideo(String),
    #[error("video {video_id:?} has class {class_id} which is missing from the class table")]
    UnknownClass { video_id: String, class_id: ClassId },
}

/// Validated list of videos with their classes and splits.
///
/// Video ids are unique and every record's class appears in the class table.
/// The class table (not the records) defines the class universe.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    records: Vec<ManifestRecord>,
    class_names: BTreeMap<ClassId, String>,
    by_video: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn new(
        records: Vec<ManifestRecord>,
        class_names: BTreeMap<ClassId, String>,
    ) -> Result<Self, ManifestError> {
        let mut by_video = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if !class_names.contains_key(&r.class_id) {
                return Err(ManifestError::UnknownClass {
                    video_id: r.video_id.clone(),
                    class_id: r.class_id,
                });
            }
            if by_video.insert(r.video_id.clone(), i).is_some() {
                return Err(ManifestError::DuplicateVideo(r.video_id.clone()));
            }
        }
        Ok(DatasetManifest {
            records,
            class_names,
            by_video,
        })
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_names(&self) -> &BTreeMap<ClassId, String> {
        &self.class_names
    }

    pub fn class_name(&self, class: ClassId) -> Option<&str> {
        self.class_names.get(&class).map(String::as_str)
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.class_names.keys().copied()
    }

    pub fn has_class(&self, class: ClassId) -> bool {
        self.class_names.contains_key(&class)
    }

    pub fn get(&self, video_id: &str) -> Option<&ManifestRecord> {
        self.by_video.get(video_id).map(|&i| &self.records[i])
    }

    pub fn records_of(&self, class: ClassId) -> impl Iterator<Item = &ManifestRecord> + '_ {
        self.records.iter().filter(move |r| r.class_id == class)
    }

    /// Per-class record counts for `split`; every class in the table is present.
    pub fn split_counts(&self, split: Split) -> BTreeMap<ClassId, usize> {
        let mut counts: BTreeMap<ClassId, usize> = self.classes().map(|c| (c, 0)).collect();
        for r in self.records.iter().filter(|r| r.split == split) {
            *counts.entry(r.class_id).or_default() += 1;
        }
        counts
    }

    /// Keeps the records for which `keep` returns true, with the same class table.
    pub fn filtered(&self, mut keep: impl FnMut(&ManifestRecord) -> bool) -> DatasetManifest {
        let records: Vec<_> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        let by_video = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.video_id.clone(), i))
            .collect();
        DatasetManifest {
            records,
            class_names: self.class_names.clone(),
            by_video,
        }
    }
}

/// What a transform does to the label of one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassTransform {
    /// Transformed examples keep their label.
    Invariant,
    /// Transformed examples take the counterpart's label, and vice versa.
    Equivariant(ClassId),
    /// Transformed examples fall outside the label set. `realistic` is an
    /// optional annotation used only for reporting.
    Novel { realistic: Option<bool> },
}

impl ClassTransform {
    pub const NOVEL: ClassTransform = ClassTransform::Novel { realistic: None };

    pub fn is_novel(&self) -> bool {
        matches!(self, ClassTransform::Novel { .. })
    }

    /// Label of a transformed example, if one exists in the dataset.
    pub fn target(&self, class: ClassId) -> Option<ClassId> {
        match *self {
            ClassTransform::Invariant => Some(class),
            ClassTransform::Equivariant(t) => Some(t),
            ClassTransform::Novel { .. } => None,
        }
    }
}

/// The class transform induced by one video transform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTransformMap {
    pub transform: TransformId,
    pub entries: BTreeMap<ClassId, ClassTransform>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapViolation {
    /// `class` names `target` as counterpart but `target` does not name `class` back.
    Asymmetric {
        class: ClassId,
        target: ClassId,
    },
    SelfTarget {
        class: ClassId,
    },
    UnknownClass {
        class: ClassId,
    },
    UnknownTarget {
        class: ClassId,
        target: ClassId,
    },
}

impl fmt::Display for MapViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MapViolation::Asymmetric { class, target } => {
                write!(
                    f,
                    "class {class} maps to {target} but {target} does not map back to {class}"
                )
            }
            MapViolation::SelfTarget { class } => {
                write!(f, "class {class} is equivariant with itself")
            }
            MapViolation::UnknownClass { class } => {
                write!(f, "class {class} is not in the manifest")
            }
            MapViolation::UnknownTarget { class, target } => {
                write!(
                    f,
                    "class {class} maps to {target} which is not in the manifest"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CategoryCounts {
    pub invariant: usize,
    pub equivariant: usize,
    pub novel_realistic: usize,
    pub novel_unrealistic: usize,
}

impl CategoryCounts {
    pub fn total(&self) -> usize {
        self.invariant + self.equivariant + self.novel_realistic + self.novel_unrealistic
    }

    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (
            self.invariant,
            self.equivariant,
            self.novel_realistic,
            self.novel_unrealistic,
        )
    }
}

impl ClassTransformMap {
    pub fn new(transform: TransformId) -> Self {
        ClassTransformMap {
            transform,
            entries: BTreeMap::new(),
        }
    }

    pub fn with_entries(
        transform: TransformId,
        entries: impl IntoIterator<Item = (ClassId, ClassTransform)>,
    ) -> Self {
        ClassTransformMap {
            transform,
            entries: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, class: ClassId) -> Option<ClassTransform> {
        self.entries.get(&class).copied()
    }

    /// Label of a transformed example of `class`; `None` for novel or unmapped classes.
    pub fn target_of(&self, class: ClassId) -> Option<ClassId> {
        self.get(class).and_then(|e| e.target(class))
    }

    /// Equivariant pairs `(a, b)` with `a < b`, listed once each.
    ///
    /// Only mutually consistent pairs are returned.
    pub fn equivariant_pairs(&self) -> Vec<(ClassId, ClassId)> {
        self.entries
            .iter()
            .filter_map(|(&a, e)| match *e {
                ClassTransform::Equivariant(b)
                    if a < b && self.get(b) == Some(ClassTransform::Equivariant(a)) =>
                {
                    Some((a, b))
                }
                _ => None,
            })
            .collect()
    }

    /// Every invariant the map breaks with respect to `manifest`'s class table.
    /// An empty list means the map is valid.
    pub fn validate(&self, manifest: &DatasetManifest) -> Vec<MapViolation> {
        self.validate_against(&manifest.classes().collect())
    }

    pub fn validate_against(&self, universe: &BTreeSet<ClassId>) -> Vec<MapViolation> {
        let mut out = Vec::new();
        for (&class, entry) in &self.entries {
            if !universe.contains(&class) {
                out.push(MapViolation::UnknownClass { class });
            }
            if let ClassTransform::Equivariant(target) = *entry {
                if target == class {
                    out.push(MapViolation::SelfTarget { class });
                    continue;
                }
                if !universe.contains(&target) {
                    out.push(MapViolation::UnknownTarget { class, target });
                }
                if self.get(target) != Some(ClassTransform::Equivariant(class)) {
                    out.push(MapViolation::Asymmetric { class, target });
                }
            }
        }
        out
    }

    /// Counts entries per category; equivariant classes are counted individually.
    /// Novel entries without a realism flag count as realistic.
    pub fn category_counts(&self) -> CategoryCounts {
        let mut c = CategoryCounts::default();
        for e in self.entries.values() {
            match e {
                ClassTransform::Invariant => c.invariant += 1,
                ClassTransform::Equivariant(_) => c.equivariant += 1,
                ClassTransform::Novel {
                    realistic: Some(false),
                } => c.novel_unrealistic += 1,
                ClassTransform::Novel { .. } => c.novel_realistic += 1,
            }
        }
        c
    }
}
