//! Top-k accuracy, confusion matrices and per-group breakdowns.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::manifest::{ClassTransformMap, DatasetManifest, MapViolation};
use crate::predictions::{PredictionLog, Variant};
use crate::ClassId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("video {video_id:?} has only {len} ranked classes, fewer than k = {k}")]
    RankingTooShort {
        video_id: String,
        len: usize,
        k: usize,
    },
    #[error("no evaluated examples match the selection")]
    EmptySelection,
    #[error("label transform requested without a class transform map")]
    MissingMap,
    #[error("class transform map is invalid: {0}")]
    InvalidMap(MapViolation),
    #[error("class {0} is not in the manifest")]
    UnknownClass(ClassId),
    #[error("video {video_id:?} is predicted as class {class_id}, which is not in the manifest")]
    UnknownPredictedClass { video_id: String, class_id: ClassId },
}

/// Which predictions to score and how to label them.
#[derive(Debug, Clone, Copy)]
pub struct EvalSpec<'a> {
    pub variant: Variant,
    /// When set, each true label is mapped through the class transform first;
    /// examples whose class has no mapped label are excluded.
    pub label_transform: Option<&'a ClassTransformMap>,
}

impl EvalSpec<'_> {
    pub fn original() -> Self {
        EvalSpec {
            variant: Variant::Original,
            label_transform: None,
        }
    }
}

struct Example<'a> {
    video_id: &'a str,
    label: ClassId,
    ranking: &'a [ClassId],
}

struct Selection<'a> {
    examples: Vec<Example<'a>>,
    excluded: usize,
}

/// Manifest records that have a prediction for the requested variant.
fn select<'a>(
    log: &'a PredictionLog,
    manifest: &'a DatasetManifest,
    spec: EvalSpec<'_>,
) -> Result<Selection<'a>, MetricsError> {
    if let Some(map) = spec.label_transform {
        if let Some(&v) = map.validate(manifest).first() {
            return Err(MetricsError::InvalidMap(v));
        }
    }
    let mut examples = Vec::new();
    let mut excluded = 0;
    for r in manifest.records() {
        let Some(ranking) = log.ranking(&r.video_id, spec.variant) else {
            continue;
        };
        let label = match spec.label_transform {
            None => r.class_id,
            Some(map) => match map.target_of(r.class_id) {
                Some(t) => t,
                None => {
                    excluded += 1;
                    continue;
                }
            },
        };
        examples.push(Example {
            video_id: &r.video_id,
            label,
            ranking,
        });
    }
    Ok(Selection { examples, excluded })
}

/// Hit counts for several values of k; mergeable across partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopKCounts {
    pub ks: Vec<usize>,
    pub examples: u64,
    pub hits: Vec<u64>,
}

impl TopKCounts {
    pub fn new(ks: &[usize]) -> Result<Self, MetricsError> {
        if ks.contains(&0) {
            return Err(MetricsError::ZeroK);
        }
        Ok(TopKCounts {
            ks: ks.to_vec(),
            examples: 0,
            hits: vec![0; ks.len()],
        })
    }

    fn add(&mut self, ex: &Example<'_>) -> Result<(), MetricsError> {
        for (&k, hits) in self.ks.iter().zip(&mut self.hits) {
            if k > ex.ranking.len() {
                return Err(MetricsError::RankingTooShort {
                    video_id: ex.video_id.into(),
                    len: ex.ranking.len(),
                    k,
                });
            }
            *hits += u64::from(ex.ranking[..k].contains(&ex.label));
        }
        self.examples += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &TopKCounts) {
        debug_assert_eq!(self.ks, other.ks);
        self.examples += other.examples;
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
    }

    /// Accuracy per k, or `None` when nothing was evaluated.
    pub fn accuracies(&self) -> Option<Vec<f64>> {
        (self.examples > 0).then(|| {
            self.hits
                .iter()
                .map(|&h| h as f64 / self.examples as f64)
                .collect()
        })
    }
}

fn count_topk<'a>(
    examples: impl Iterator<Item = &'a Example<'a>>,
    ks: &[usize],
) -> Result<TopKCounts, MetricsError> {
    let mut counts = TopKCounts::new(ks)?;
    for ex in examples {
        counts.add(ex)?;
    }
    Ok(counts)
}

/// Fraction of selected examples whose true class is among the first `k`
/// ranked predictions. `filter` restricts by (possibly transformed) true class.
pub fn topk_accuracy(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    spec: EvalSpec<'_>,
    k: usize,
    filter: Option<&BTreeSet<ClassId>>,
) -> Result<f64, MetricsError> {
    let sel = select(log, manifest, spec)?;
    let counts = count_topk(
        sel.examples
            .iter()
            .filter(|e| filter.is_none_or(|f| f.contains(&e.label))),
        &[k],
    )?;
    counts
        .accuracies()
        .map(|a| a[0])
        .ok_or(MetricsError::EmptySelection)
}

/// Row = true class, column = top-1 prediction, both in `order`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    order: Vec<ClassId>,
    position: BTreeMap<ClassId, usize>,
    counts: Vec<u64>,
    /// Examples left out because their class has no transformed label.
    pub excluded: usize,
}

impl ConfusionMatrix {
    pub fn new(order: Vec<ClassId>) -> Self {
        let position = order.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let n = order.len();
        ConfusionMatrix {
            order,
            position,
            counts: vec![0; n * n],
            excluded: 0,
        }
    }

    pub fn order(&self) -> &[ClassId] {
        &self.order
    }

    pub fn get(&self, truth: ClassId, predicted: ClassId) -> u64 {
        match (self.position.get(&truth), self.position.get(&predicted)) {
            (Some(&i), Some(&j)) => self.counts[i * self.order.len() + j],
            _ => 0,
        }
    }

    pub fn row(&self, i: usize) -> &[u64] {
        let n = self.order.len();
        &self.counts[i * n..(i + 1) * n]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.order.len();
        self.counts
            .iter()
            .enumerate()
            .all(|(i, &v)| v == 0 || i / n == i % n)
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        debug_assert_eq!(self.order, other.order);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.excluded += other.excluded;
    }
}

/// Class order with each equivariant pair adjacent (pairs sorted by their
/// smaller id) followed by the remaining classes in ascending id.
pub fn adjacent_pair_order(
    manifest: &DatasetManifest,
    map: Option<&ClassTransformMap>,
) -> Vec<ClassId> {
    let mut order = Vec::new();
    let mut placed = BTreeSet::new();
    if let Some(map) = map {
        for (a, b) in map.equivariant_pairs() {
            if manifest.has_class(a) && manifest.has_class(b) {
                order.extend([a, b]);
                placed.extend([a, b]);
            }
        }
    }
    order.extend(manifest.classes().filter(|c| !placed.contains(c)));
    order
}

/// Tabulates top-1 predictions against (optionally label-transformed) truth.
///
/// The map, when given, also sets the row/column order.
pub fn confusion(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    variant: Variant,
    map: Option<&ClassTransformMap>,
    apply_label_transform: bool,
) -> Result<ConfusionMatrix, MetricsError> {
    let label_transform = match (apply_label_transform, map) {
        (true, None) => return Err(MetricsError::MissingMap),
        (true, Some(m)) => Some(m),
        (false, _) => None,
    };
    let sel = select(
        log,
        manifest,
        EvalSpec {
            variant,
            label_transform,
        },
    )?;
    let mut cm = ConfusionMatrix::new(adjacent_pair_order(manifest, map));
    let n = cm.order.len();
    for ex in &sel.examples {
        let predicted = ex.ranking[0];
        let j =
            *cm.position
                .get(&predicted)
                .ok_or_else(|| MetricsError::UnknownPredictedClass {
                    video_id: ex.video_id.into(),
                    class_id: predicted,
                })?;
        let i = cm.position[&ex.label];
        cm.counts[i * n + j] += 1;
    }
    cm.excluded = sel.excluded;
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    pub group: String,
    pub examples: u64,
    /// One accuracy per requested k; `None` when the group has no examples.
    pub accuracies: Option<Vec<f64>>,
}

/// Top-k accuracy per named class group. Groups may overlap.
pub fn breakdown(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    spec: EvalSpec<'_>,
    groups: &[(String, BTreeSet<ClassId>)],
    ks: &[usize],
) -> Result<Vec<BreakdownRow>, MetricsError> {
    for (_, classes) in groups {
        if let Some(&c) = classes.iter().find(|c| !manifest.has_class(**c)) {
            return Err(MetricsError::UnknownClass(c));
        }
    }
    let sel = select(log, manifest, spec)?;
    groups
        .iter()
        .map(|(name, classes)| {
            let counts = count_topk(
                sel.examples.iter().filter(|e| classes.contains(&e.label)),
                ks,
            )?;
            Ok(BreakdownRow {
                group: name.clone(),
                examples: counts.examples,
                accuracies: counts.accuracies(),
            })
        })
        .collect()
}
