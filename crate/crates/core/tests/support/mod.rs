//! Synthetic prediction logs with planted class transforms, plus brute-force
//! reference implementations used to cross-check the library.
//!
//! Nothing here calls into `retro_core::discovery` or `retro_core::metrics`;
//! the references recount the raw log with plain loops.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use retro_core::manifest::{
    ClassTransform, ClassTransformMap, DatasetManifest, ManifestRecord, Split,
};
use retro_core::predictions::{PredictionLog, Variant};
use retro_core::{ClassId, TransformId};

pub struct Instance {
    pub manifest: DatasetManifest,
    pub log: PredictionLog,
    pub planted: ClassTransformMap,
    pub noise: f64,
}

/// Random planted map over `n` classes: some equivariant pairs, some
/// invariant classes, the rest novel.
pub fn random_map<R: Rng>(rng: &mut R, n: u32, transform: TransformId) -> ClassTransformMap {
    let mut classes: Vec<u32> = (0..n).collect();
    classes.shuffle(rng);
    let n_pairs = rng.random_range(0..=n / 2);
    let mut entries = BTreeMap::new();
    for p in 0..n_pairs as usize {
        let (a, b) = (ClassId(classes[2 * p]), ClassId(classes[2 * p + 1]));
        entries.insert(a, ClassTransform::Equivariant(b));
        entries.insert(b, ClassTransform::Equivariant(a));
    }
    for &c in &classes[2 * n_pairs as usize..] {
        let e = if rng.random_bool(0.5) {
            ClassTransform::Invariant
        } else {
            ClassTransform::NOVEL
        };
        entries.insert(ClassId(c), e);
    }
    ClassTransformMap { transform, entries }
}

/// Builds a log consistent with a planted map.
///
/// Without noise, original predictions are always correct, mapped classes
/// transform to their target and novel classes spread their transformed
/// predictions round-robin over all classes (so no affinity involving a novel
/// class exceeds 0.36 with at least four videos per class). With noise, each
/// prediction is replaced by a uniformly random class with probability `noise`.
pub fn planted_instance<R: Rng>(
    rng: &mut R,
    n_classes: u32,
    max_videos: usize,
    noise: f64,
    transform: TransformId,
) -> Instance {
    let planted = random_map(rng, n_classes, transform);
    let names = (0..n_classes)
        .map(|i| (ClassId(i), format!("class {i}")))
        .collect();
    let mut records = Vec::new();
    let mut log = PredictionLog::new();
    for y in 0..n_classes {
        let n = rng.random_range(4..=max_videos.max(4));
        let offset = rng.random_range(0..n_classes);
        for i in 0..n {
            let id = format!("v{y}_{i}");
            records.push(ManifestRecord::new(id.clone(), y, Split::Val));
            let mut original = y;
            if rng.random_bool(noise) {
                original = rng.random_range(0..n_classes);
            }
            let mut transformed = match planted.target_of(ClassId(y)) {
                Some(t) => t.0,
                None => (offset + i as u32) % n_classes,
            };
            if rng.random_bool(noise) {
                transformed = rng.random_range(0..n_classes);
            }
            log.insert(id.clone(), Variant::Original, ranking(original, n_classes))
                .unwrap();
            log.insert(
                id,
                Variant::Transformed(transform),
                ranking(transformed, n_classes),
            )
            .unwrap();
        }
    }
    let manifest = DatasetManifest::new(records, names).unwrap();
    Instance {
        manifest,
        log,
        planted,
        noise,
    }
}

/// `top` followed by up to four other classes.
pub fn ranking(top: u32, n_classes: u32) -> Vec<ClassId> {
    let len = n_classes.min(5);
    (0..len).map(|i| ClassId((top + i) % n_classes)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleClass {
    pub recall: f64,
    pub outcome: ClassTransform,
    pub not_established: bool,
    pub conflict: bool,
}

/// Straight-line reimplementation of class-transform extraction.
pub fn oracle_extract(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    transform: TransformId,
    lambda: f64,
    alpha: f64,
) -> BTreeMap<ClassId, OracleClass> {
    let classes: Vec<ClassId> = manifest.classes().collect();
    let tr = Variant::Transformed(transform);

    // V̂_y as explicit video lists.
    let mut correct: BTreeMap<ClassId, Vec<&str>> = BTreeMap::new();
    let mut total: BTreeMap<ClassId, usize> = BTreeMap::new();
    for r in manifest.records() {
        if let Some(rank) = log.ranking(&r.video_id, Variant::Original) {
            *total.entry(r.class_id).or_default() += 1;
            if rank[0] == r.class_id {
                correct.entry(r.class_id).or_default().push(&r.video_id);
            }
        }
    }
    let gamma = |y: ClassId, z: ClassId| -> f64 {
        let Some(vids) = correct.get(&y) else {
            return 0.0;
        };
        let hits = vids
            .iter()
            .filter(|v| log.ranking(v, tr).unwrap()[0] == z)
            .count();
        hits as f64 / vids.len() as f64
    };
    let omega = |y: ClassId, z: ClassId| gamma(y, z) * gamma(z, y);

    let mut out = BTreeMap::new();
    for &y in &classes {
        let n_correct = correct.get(&y).map_or(0, Vec::len);
        let recall = n_correct as f64 / total[&y] as f64;
        let mut yt = classes[0];
        let mut best = omega(y, yt);
        for &z in &classes[1..] {
            let w = omega(y, z);
            if w > best {
                best = w;
                yt = z;
            }
        }
        let established = recall >= lambda;
        let outcome = if !established {
            ClassTransform::NOVEL
        } else if omega(y, y) >= alpha {
            ClassTransform::Invariant
        } else if omega(y, yt) >= alpha && omega(y, y) < alpha && omega(yt, yt) < alpha {
            ClassTransform::Equivariant(yt)
        } else {
            ClassTransform::NOVEL
        };
        out.insert(
            y,
            OracleClass {
                recall,
                outcome,
                not_established: !established,
                conflict: false,
            },
        );
    }

    loop {
        let mut bad = Vec::new();
        for (&y, c) in &out {
            if let ClassTransform::Equivariant(t) = c.outcome {
                if out[&t].outcome != ClassTransform::Equivariant(y) {
                    bad.push(y);
                    bad.push(t);
                }
            }
        }
        if bad.is_empty() {
            break;
        }
        for y in bad {
            let c = out.get_mut(&y).unwrap();
            c.outcome = ClassTransform::NOVEL;
            c.conflict = true;
        }
    }
    out
}

/// Largest affinity between two distinct classes, or of a class with itself,
/// that the planted map does not account for.
pub fn max_spurious_affinity(inst: &Instance) -> f64 {
    let tr = Variant::Transformed(inst.planted.transform);
    let classes: Vec<ClassId> = inst.manifest.classes().collect();
    let gamma = |y: ClassId, z: ClassId| {
        let vids: Vec<_> = inst
            .manifest
            .records_of(y)
            .filter(|r| inst.log.ranking(&r.video_id, Variant::Original).unwrap()[0] == y)
            .collect();
        if vids.is_empty() {
            return 0.0;
        }
        let hits = vids
            .iter()
            .filter(|r| inst.log.ranking(&r.video_id, tr).unwrap()[0] == z)
            .count();
        hits as f64 / vids.len() as f64
    };
    let mut worst: f64 = 0.0;
    for &y in &classes {
        for &z in &classes {
            if inst.planted.target_of(y) == Some(z) {
                continue;
            }
            worst = worst.max(gamma(y, z) * gamma(z, y));
        }
    }
    worst
}

/// Top-k accuracy by direct recount; `None` if no example is selected.
pub fn oracle_topk(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    variant: Variant,
    k: usize,
    filter: Option<&BTreeSet<ClassId>>,
) -> Option<f64> {
    let mut n = 0usize;
    let mut hits = 0usize;
    for r in manifest.records() {
        if filter.is_some_and(|f| !f.contains(&r.class_id)) {
            continue;
        }
        if let Some(rank) = log.ranking(&r.video_id, variant) {
            n += 1;
            if rank.iter().take(k).any(|&c| c == r.class_id) {
                hits += 1;
            }
        }
    }
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Random log with rankings of length `min(n_classes, 5)` and accuracy near `skill`.
pub fn random_log<R: Rng>(
    rng: &mut R,
    n_classes: u32,
    videos: usize,
    skill: f64,
) -> (DatasetManifest, PredictionLog) {
    let names = (0..n_classes)
        .map(|i| (ClassId(i), format!("class {i}")))
        .collect();
    let mut records = Vec::new();
    let mut log = PredictionLog::new();
    for i in 0..videos {
        let y = rng.random_range(0..n_classes);
        let id = format!("r{i}");
        records.push(ManifestRecord::new(id.clone(), y, Split::Test));
        let mut all: Vec<u32> = (0..n_classes).collect();
        all.shuffle(rng);
        if rng.random_bool(skill) {
            let pos = all.iter().position(|&c| c == y).unwrap();
            all.swap(0, pos);
        }
        let rank = all.into_iter().take(5).map(ClassId).collect();
        log.insert(id, Variant::Original, rank).unwrap();
    }
    (DatasetManifest::new(records, names).unwrap(), log)
}
