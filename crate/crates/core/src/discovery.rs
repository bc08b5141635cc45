//! Discovering class transforms from a trained model's predictions.
//!
//! For every class `y` let `V_y` be its videos that have an original
//! prediction and `V̂_y ⊆ V_y` those whose top-1 prediction is `y`.
//!
//! * recall `Λ(y) = |V̂_y| / |V_y|`;
//! * transfer `Γ(y, y')`: fraction of `V̂_y` predicted as `y'` once transformed;
//! * affinity `Ω(y, y') = Γ(y, y') · Γ(y', y)`;
//! * candidate `y_t = argmax_{y'} Ω(y, y')`, lowest class id on ties.
//!
//! A class with `Λ(y) ≥ λ` is invariant when `Ω(y, y) ≥ α`, equivariant with
//! `y_t` when `Ω(y, y_t) ≥ α`, `Ω(y, y) < α` and `Ω(y_t, y_t) < α`, and novel
//! otherwise. Classes below the recall threshold are reported as novel with a
//! "not established" flag. Equivariant entries that do not point back at each
//! other are demoted to novel with a "conflict" flag until the map is an
//! involution.
//!
//! Counting is split from the formulas: [`TransferCounts`] holds plain integer
//! tallies that can be built over disjoint slices of the manifest and merged,
//! giving results identical to a single pass.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::manifest::{ClassTransform, ClassTransformMap, DatasetManifest, ManifestRecord};
use crate::predictions::{PredictionLog, Variant};
use crate::transform::TransformId;
use crate::ClassId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiscoveryError {
    #[error("{name} must lie in [0, 1], got {value}")]
    InvalidThreshold { name: &'static str, value: String },
    #[error("class {0} is not in the manifest")]
    UnknownClass(ClassId),
    #[error("recall of class {0} is undefined: no video of that class has an original prediction")]
    UndefinedRecall(ClassId),
    #[error(
        "{} correctly classified video(s) lack a {transform} prediction: {}",
        .videos.len(),
        preview(.videos)
    )]
    IncompleteLog {
        transform: TransformId,
        videos: Vec<String>,
    },
    #[error("video {video_id:?} is predicted as class {class_id}, which is not in the manifest")]
    UnknownPredictedClass { video_id: String, class_id: ClassId },
    #[error("class universes differ: {only_discovered} class(es) only in the discovered map, {only_truth} only in the ground truth")]
    UniverseMismatch {
        only_discovered: usize,
        only_truth: usize,
    },
    #[error("maps describe different transforms ({discovered} vs {truth})")]
    TransformMismatch {
        discovered: TransformId,
        truth: TransformId,
    },
    #[error("threshold grid is empty")]
    EmptyGrid,
}

fn preview(videos: &[String]) -> String {
    let mut s = String::new();
    for (i, v) in videos.iter().take(5).enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(v);
    }
    if videos.len() > 5 {
        s.push_str(", ...");
    }
    s
}

/// Recall threshold `λ` and affinity threshold `α`, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoveryConfig {
    lambda: f64,
    alpha: f64,
}

impl DiscoveryConfig {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self, DiscoveryError> {
        for (name, value) in [("lambda", lambda), ("alpha", alpha)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(DiscoveryError::InvalidThreshold {
                    name,
                    value: alloc::format!("{value}"),
                });
            }
        }
        Ok(DiscoveryConfig { lambda, alpha })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassCounts {
    /// `|V_y|`
    pub videos: u64,
    /// `|V̂_y|`
    pub correct: u64,
    /// Top-1 class of each transformed video in `V̂_y`.
    pub transferred: BTreeMap<ClassId, u64>,
}

/// Mergeable integer tallies behind `Λ` and `Γ` for one transform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferCounts {
    transform: TransformId,
    classes: BTreeMap<ClassId, ClassCounts>,
    missing: Vec<String>,
}

impl TransferCounts {
    pub fn empty(transform: TransformId) -> Self {
        TransferCounts {
            transform,
            classes: BTreeMap::new(),
            missing: Vec::new(),
        }
    }

    /// Tallies `records` (normally a slice of `manifest.records()`).
    ///
    /// Records without an original prediction are skipped. Correctly classified
    /// videos without a transformed prediction are collected and reported by
    /// [`TransferCounts::check_complete`].
    pub fn accumulate(
        log: &PredictionLog,
        manifest: &DatasetManifest,
        transform: TransformId,
        records: &[ManifestRecord],
    ) -> Result<Self, DiscoveryError> {
        let mut out = TransferCounts::empty(transform);
        for r in records {
            let Some(top) = log.top1(&r.video_id, Variant::Original) else {
                continue;
            };
            let counts = out.classes.entry(r.class_id).or_default();
            counts.videos += 1;
            if top != r.class_id {
                continue;
            }
            counts.correct += 1;
            match log.top1(&r.video_id, Variant::Transformed(transform)) {
                Some(t) if !manifest.has_class(t) => {
                    return Err(DiscoveryError::UnknownPredictedClass {
                        video_id: r.video_id.clone(),
                        class_id: t,
                    });
                }
                Some(t) => *counts.transferred.entry(t).or_default() += 1,
                None => out.missing.push(r.video_id.clone()),
            }
        }
        Ok(out)
    }

    pub fn merge(&mut self, other: TransferCounts) {
        debug_assert_eq!(self.transform, other.transform);
        for (class, c) in other.classes {
            let mine = self.classes.entry(class).or_default();
            mine.videos += c.videos;
            mine.correct += c.correct;
            for (t, n) in c.transferred {
                *mine.transferred.entry(t).or_default() += n;
            }
        }
        self.missing.extend(other.missing);
    }

    pub fn transform(&self) -> TransformId {
        self.transform
    }

    pub fn class(&self, class: ClassId) -> Option<&ClassCounts> {
        self.classes.get(&class)
    }

    pub fn check_complete(&self) -> Result<(), DiscoveryError> {
        if self.missing.is_empty() {
            return Ok(());
        }
        let mut videos = self.missing.clone();
        videos.sort();
        Err(DiscoveryError::IncompleteLog {
            transform: self.transform,
            videos,
        })
    }

    /// `Λ(y)`; errors when `V_y` is empty.
    pub fn recall(&self, class: ClassId) -> Result<f64, DiscoveryError> {
        match self.classes.get(&class) {
            Some(c) if c.videos > 0 => Ok(c.correct as f64 / c.videos as f64),
            _ => Err(DiscoveryError::UndefinedRecall(class)),
        }
    }

    /// `Γ`, after checking that the log is complete.
    pub fn transfer_matrix(&self) -> Result<TransferMatrix, DiscoveryError> {
        self.check_complete()?;
        let rows = self
            .classes
            .iter()
            .filter(|(_, c)| c.correct > 0)
            .map(|(&y, c)| {
                let denom = c.correct as f64;
                let row = c
                    .transferred
                    .iter()
                    .map(|(&t, &n)| (t, n as f64 / denom))
                    .collect();
                (y, row)
            })
            .collect();
        Ok(TransferMatrix { rows })
    }
}

/// Sparse `Γ(y, y')`; rows exist only for classes with a non-empty `V̂_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    rows: BTreeMap<ClassId, BTreeMap<ClassId, f64>>,
}

impl TransferMatrix {
    pub fn gamma(&self, from: ClassId, to: ClassId) -> f64 {
        self.rows
            .get(&from)
            .and_then(|r| r.get(&to))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn row(&self, class: ClassId) -> Option<&BTreeMap<ClassId, f64>> {
        self.rows.get(&class)
    }

    pub fn rows(&self) -> impl Iterator<Item = (ClassId, &BTreeMap<ClassId, f64>)> {
        self.rows.iter().map(|(&c, r)| (c, r))
    }

    /// `Ω(a, b) = Γ(a, b) · Γ(b, a)`; missing rows or cells count as 0.
    pub fn affinity(&self, a: ClassId, b: ClassId) -> f64 {
        affinity(self, a, b)
    }
}

/// `Λ(y)` for a single class.
pub fn class_recall(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    class: ClassId,
) -> Result<f64, DiscoveryError> {
    if !manifest.has_class(class) {
        return Err(DiscoveryError::UnknownClass(class));
    }
    let mut videos = 0u64;
    let mut correct = 0u64;
    for r in manifest.records_of(class) {
        if let Some(top) = log.top1(&r.video_id, Variant::Original) {
            videos += 1;
            correct += u64::from(top == class);
        }
    }
    if videos == 0 {
        return Err(DiscoveryError::UndefinedRecall(class));
    }
    Ok(correct as f64 / videos as f64)
}

pub fn transfer_matrix(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    transform: TransformId,
) -> Result<TransferMatrix, DiscoveryError> {
    TransferCounts::accumulate(log, manifest, transform, manifest.records())?.transfer_matrix()
}

pub fn affinity(gamma: &TransferMatrix, a: ClassId, b: ClassId) -> f64 {
    gamma.gamma(a, b) * gamma.gamma(b, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiagnosticFlags {
    /// `Λ(y) < λ`: the model is not trusted for this class.
    pub not_established: bool,
    /// Demoted from equivariant because the counterpart disagreed.
    pub conflict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDiagnostics {
    pub class: ClassId,
    pub recall: f64,
    pub established: bool,
    pub omega_self: f64,
    /// Non-zero entries of `Ω(y, ·)`.
    pub omega: BTreeMap<ClassId, f64>,
    pub candidate: ClassId,
    pub omega_candidate: f64,
    pub outcome: ClassTransform,
    pub flags: DiagnosticFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryReport {
    pub config: DiscoveryConfig,
    pub classes: Vec<ClassDiagnostics>,
    pub map: ClassTransformMap,
}

pub fn extract_transform(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    transform: TransformId,
    config: DiscoveryConfig,
) -> Result<DiscoveryReport, DiscoveryError> {
    let counts = TransferCounts::accumulate(log, manifest, transform, manifest.records())?;
    extract_from_counts(&counts, manifest, config)
}

/// Applies the extraction rule to pre-aggregated counts.
pub fn extract_from_counts(
    counts: &TransferCounts,
    manifest: &DatasetManifest,
    config: DiscoveryConfig,
) -> Result<DiscoveryReport, DiscoveryError> {
    let gamma = counts.transfer_matrix()?;
    let universe: Vec<ClassId> = manifest.classes().collect();
    let Some(&first) = universe.first() else {
        return Ok(DiscoveryReport {
            config,
            classes: Vec::new(),
            map: ClassTransformMap::new(counts.transform),
        });
    };

    let mut classes = Vec::with_capacity(universe.len());
    for &y in &universe {
        let recall = counts.recall(y)?;
        let established = recall >= config.lambda;
        let omega: BTreeMap<ClassId, f64> = gamma
            .row(y)
            .into_iter()
            .flatten()
            .map(|(&t, _)| (t, gamma.affinity(y, t)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        // Every class outside `omega` has affinity 0, so the lowest class id
        // is the argmax when nothing beats 0.
        let (candidate, omega_candidate) =
            omega.iter().fold(
                (first, 0.0),
                |best, (&t, &w)| if w > best.1 { (t, w) } else { best },
            );
        let omega_self = gamma.affinity(y, y);
        let outcome = if !established {
            ClassTransform::NOVEL
        } else if omega_self >= config.alpha {
            ClassTransform::Invariant
        } else if omega_candidate >= config.alpha
            && gamma.affinity(candidate, candidate) < config.alpha
        {
            ClassTransform::Equivariant(candidate)
        } else {
            ClassTransform::NOVEL
        };
        classes.push(ClassDiagnostics {
            class: y,
            recall,
            established,
            omega_self,
            omega,
            candidate,
            omega_candidate,
            outcome,
            flags: DiagnosticFlags {
                not_established: !established,
                conflict: false,
            },
        });
    }

    resolve_conflicts(&mut classes);

    let map = ClassTransformMap::with_entries(
        counts.transform,
        classes.iter().map(|d| (d.class, d.outcome)),
    );
    Ok(DiscoveryReport {
        config,
        classes,
        map,
    })
}

/// Demotes non-reciprocal equivariant entries (and their targets) to novel
/// until every remaining equivariant entry is reciprocated.
fn resolve_conflicts(classes: &mut [ClassDiagnostics]) {
    let index: BTreeMap<ClassId, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, d)| (d.class, i))
        .collect();
    loop {
        let mut demote = BTreeSet::new();
        for d in classes.iter() {
            if let ClassTransform::Equivariant(t) = d.outcome {
                let back = index.get(&t).map(|&i| classes[i].outcome);
                if back != Some(ClassTransform::Equivariant(d.class)) {
                    demote.insert(d.class);
                    demote.insert(t);
                }
            }
        }
        if demote.is_empty() {
            return;
        }
        for class in demote {
            if let Some(&i) = index.get(&class) {
                classes[i].outcome = ClassTransform::NOVEL;
                classes[i].flags.conflict = true;
            }
        }
    }
}

/// Outcome counts from treating each class's mapping as a binary decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl ScoreCounts {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }
}

/// Scores a discovered map against ground truth, class by class.
///
/// TP: truth maps the class and discovery found the same mapping. FP:
/// discovery asserts a mapping that differs from the truth (including a
/// mapping where the truth is novel). FN: discovery says novel where the
/// truth maps. TN: both novel.
pub fn score_against_ground_truth(
    discovered: &ClassTransformMap,
    truth: &ClassTransformMap,
) -> Result<ScoreCounts, DiscoveryError> {
    if discovered.transform != truth.transform {
        return Err(DiscoveryError::TransformMismatch {
            discovered: discovered.transform,
            truth: truth.transform,
        });
    }
    let only_discovered = discovered
        .entries
        .keys()
        .filter(|k| !truth.entries.contains_key(k))
        .count();
    let only_truth = truth
        .entries
        .keys()
        .filter(|k| !discovered.entries.contains_key(k))
        .count();
    if only_discovered + only_truth > 0 {
        return Err(DiscoveryError::UniverseMismatch {
            only_discovered,
            only_truth,
        });
    }
    let mut s = ScoreCounts::default();
    for &class in truth.entries.keys() {
        match (discovered.target_of(class), truth.target_of(class)) {
            (Some(d), Some(t)) if d == t => s.true_positive += 1,
            (Some(_), _) => s.false_positive += 1,
            (None, Some(_)) => s.false_negative += 1,
            (None, None) => s.true_negative += 1,
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub alpha: f64,
    pub score: ScoreCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Every grid point, `lambda`-major in grid order.
    pub points: Vec<SweepPoint>,
    pub best: SweepPoint,
}

/// Evaluates every `(λ, α)` pair and picks the one with most true positives.
///
/// Ties go to more true negatives, then lower `λ`, then lower `α`.
pub fn sweep(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    transform: TransformId,
    truth: &ClassTransformMap,
    lambdas: &[f64],
    alphas: &[f64],
) -> Result<SweepResult, DiscoveryError> {
    let counts = TransferCounts::accumulate(log, manifest, transform, manifest.records())?;
    sweep_counts(&counts, manifest, truth, lambdas, alphas)
}

pub fn sweep_counts(
    counts: &TransferCounts,
    manifest: &DatasetManifest,
    truth: &ClassTransformMap,
    lambdas: &[f64],
    alphas: &[f64],
) -> Result<SweepResult, DiscoveryError> {
    if lambdas.is_empty() || alphas.is_empty() {
        return Err(DiscoveryError::EmptyGrid);
    }
    let mut points = Vec::with_capacity(lambdas.len() * alphas.len());
    for &lambda in lambdas {
        for &alpha in alphas {
            let config = DiscoveryConfig::new(lambda, alpha)?;
            let report = extract_from_counts(counts, manifest, config)?;
            let score = score_against_ground_truth(&report.map, truth)?;
            points.push(SweepPoint {
                lambda,
                alpha,
                score,
            });
        }
    }
    let mut best = points[0];
    for &p in &points[1..] {
        if better(&p, &best) {
            best = p;
        }
    }
    Ok(SweepResult { points, best })
}

fn better(a: &SweepPoint, b: &SweepPoint) -> bool {
    use core::cmp::Ordering::*;
    match a.score.true_positive.cmp(&b.score.true_positive) {
        Greater => return true,
        Less => return false,
        Equal => {}
    }
    match a.score.true_negative.cmp(&b.score.true_negative) {
        Greater => return true,
        Less => return false,
        Equal => {}
    }
    if a.lambda != b.lambda {
        return a.lambda < b.lambda;
    }
    a.alpha < b.alpha
}
