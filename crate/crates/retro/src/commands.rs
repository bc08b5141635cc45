//! Subcommand bodies, callable in-process. Each takes parsed arguments and
//! returns the text to print on stdout.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use log::{debug, info, warn};
use retro_core::discovery::{self, DiscoveryConfig, TransferCounts};
use retro_core::manifest::{ClassTransformMap, DatasetManifest, MapViolation, Split};
use retro_core::metrics::{self, EvalSpec};
use retro_core::perception::{self, ClassTally};
use retro_core::predictions::{PredictionLog, Variant};
use retro_core::synthesis::{self, AugmentationSampler, SyntheticExample};
use retro_core::tensor::Layout;
use retro_core::{ClassId, TransformId};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats;
use crate::rten;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Runs `f` over `items` on up to `jobs` threads; results keep input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut done: Vec<(usize, R)> = std::thread::scope(|s| {
        let workers: Vec<_> = (0..jobs)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        out.push((i, f(item)));
                    }
                    out
                })
            })
            .collect();
        workers
            .into_iter()
            .flat_map(|w| w.join().expect("worker panicked"))
            .collect()
    });
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, r)| r).collect()
}

// ---------------------------------------------------------------- transform

#[derive(Debug, Serialize)]
pub struct FileFailure {
    pub file: String,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct TransformSummary {
    pub op: String,
    pub files: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub wall_time_ms: f64,
    pub failures: Vec<FileFailure>,
}

impl TransformSummary {
    pub fn into_result(self) -> Result<String> {
        let text = serde_json::to_string_pretty(&self).expect("summary serializes");
        if self.failed > 0 {
            return Err(Error::ItemsFailed {
                failed: self.failed,
                total: self.files,
                summary: text,
            });
        }
        Ok(text)
    }
}

/// A unit of tensor work: read `src`, apply `op`, write `dst`.
struct Job {
    src: PathBuf,
    dst: PathBuf,
    label: String,
}

fn run_jobs(
    op: TransformId,
    layout: Option<Layout>,
    jobs: &[Job],
    threads: usize,
) -> TransformSummary {
    let start = Instant::now();
    let results = par_map(jobs, threads, |job| -> Result<(u64, u64)> {
        let bytes = std::fs::read(&job.src).map_err(|e| Error::io(&job.src, e))?;
        let input = rten::decode(&bytes)?;
        let mut out = input.apply(op);
        if let Some(l) = layout {
            out = out.to_layout(l);
        }
        let written = rten::write(&job.dst, &out)?;
        Ok((bytes.len() as u64, written as u64))
    });
    let mut summary = TransformSummary {
        op: op.as_str().into(),
        files: jobs.len(),
        succeeded: 0,
        failed: 0,
        bytes_in: 0,
        bytes_out: 0,
        wall_time_ms: 0.0,
        failures: Vec::new(),
    };
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok((i, o)) => {
                summary.succeeded += 1;
                summary.bytes_in += i;
                summary.bytes_out += o;
            }
            Err(e) => {
                warn!("{}: {e}", job.label);
                summary.failed += 1;
                summary.failures.push(FileFailure {
                    file: job.label.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    summary.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    summary
}

/// Files with an `.rten` extension directly inside `dir`, sorted by name.
pub fn rten_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "rten") {
            files.push(path);
        } else {
            debug!("skipping {}", path.display());
        }
    }
    files.sort();
    Ok(files)
}

/// Transforms every `.rten` file of `input` into the same name under `output`.
pub fn transform(
    op: TransformId,
    input: &Path,
    output: &Path,
    layout: Option<Layout>,
    threads: usize,
) -> Result<TransformSummary> {
    let files = rten_files(input)?;
    std::fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    let jobs: Vec<Job> = files
        .into_iter()
        .map(|src| {
            let name = src.file_name().unwrap().to_owned();
            Job {
                dst: output.join(&name),
                label: name.to_string_lossy().into_owned(),
                src,
            }
        })
        .collect();
    info!("transforming {} file(s) with {}", jobs.len(), op);
    Ok(run_jobs(op, layout, &jobs, threads))
}

// ---------------------------------------------------------------- discovery

/// Aggregates transfer counts over `threads` contiguous partitions of the
/// manifest and merges them in partition order.
pub fn partitioned_counts(
    log: &PredictionLog,
    manifest: &DatasetManifest,
    transform: TransformId,
    threads: usize,
) -> Result<TransferCounts> {
    let records = manifest.records();
    let chunk = records.len().div_ceil(threads.max(1)).max(1);
    let parts: Vec<_> = records.chunks(chunk).collect();
    let mut total = TransferCounts::empty(transform);
    for part in par_map(&parts, threads, |p| {
        TransferCounts::accumulate(log, manifest, transform, p)
    }) {
        total.merge(part?);
    }
    Ok(total)
}

#[derive(Serialize)]
struct DiscoverSummary {
    transform: String,
    lambda: f64,
    alpha: f64,
    classes: usize,
    invariant: usize,
    equivariant: usize,
    novel: usize,
    not_established: usize,
    conflicts: usize,
    pairs: Vec<(u32, u32)>,
}

pub struct DiscoverArgs<'a> {
    pub manifest: &'a Path,
    pub classes: Option<&'a Path>,
    pub predictions: &'a Path,
    pub transform: TransformId,
    pub lambda: f64,
    pub alpha: f64,
    pub out: &'a Path,
    pub map_out: Option<&'a Path>,
}

pub fn discover(a: &DiscoverArgs<'_>, threads: usize) -> Result<String> {
    let config = DiscoveryConfig::new(a.lambda, a.alpha)?;
    let manifest = formats::read_manifest(a.manifest, a.classes)?;
    let log = formats::read_predictions(a.predictions)?;
    let counts = partitioned_counts(&log, &manifest, a.transform, threads)?;
    let report = discovery::extract_from_counts(&counts, &manifest, config)?;
    formats::write_report(a.out, &report)?;
    if let Some(p) = a.map_out {
        formats::write_map(p, &report.map)?;
    }
    let c = report.map.category_counts();
    let summary = DiscoverSummary {
        transform: a.transform.as_str().into(),
        lambda: a.lambda,
        alpha: a.alpha,
        classes: report.classes.len(),
        invariant: c.invariant,
        equivariant: c.equivariant,
        novel: c.novel_realistic + c.novel_unrealistic,
        not_established: report
            .classes
            .iter()
            .filter(|d| d.flags.not_established)
            .count(),
        conflicts: report.classes.iter().filter(|d| d.flags.conflict).count(),
        pairs: report
            .map
            .equivariant_pairs()
            .into_iter()
            .map(|(x, y)| (x.0, y.0))
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&summary).expect("summary serializes"))
}

/// Parses `a:b:step` (inclusive of `b` up to rounding) or a single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("invalid grid {spec:?}, expected a:b:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [x] if x.is_finite() => Ok(vec![x]),
        [a, b, step] if a.is_finite() && b.is_finite() && step > 0.0 && b >= a => {
            let n = ((b - a) / step + 1e-9).floor() as usize;
            if n > 100_000 {
                return Err(bad());
            }
            // Snap to 12 decimals so 0.1 steps give 0.3, not 0.30000000000000004.
            Ok((0..=n)
                .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        _ => Err(bad()),
    }
}

pub struct SweepArgs<'a> {
    pub manifest: &'a Path,
    pub classes: Option<&'a Path>,
    pub predictions: &'a Path,
    pub truth: &'a Path,
    pub lambda_grid: &'a str,
    pub alpha_grid: &'a str,
    pub out: &'a Path,
}

#[derive(Serialize)]
struct BestPoint {
    lambda: f64,
    alpha: f64,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    tn: usize,
}

pub fn sweep(a: &SweepArgs<'_>, threads: usize) -> Result<String> {
    let lambdas = parse_grid(a.lambda_grid)?;
    let alphas = parse_grid(a.alpha_grid)?;
    let truth = formats::read_map(a.truth)?;
    let manifest = formats::read_manifest(a.manifest, a.classes)?;
    let violations = truth.validate(&manifest);
    if !violations.is_empty() {
        return Err(Error::InvalidMap(violations));
    }
    let log = formats::read_predictions(a.predictions)?;
    let counts = partitioned_counts(&log, &manifest, truth.transform, threads)?;
    let result = discovery::sweep_counts(&counts, &manifest, &truth, &lambdas, &alphas)?;
    formats::write_sweep_csv(a.out, &result)?;
    let b = result.best;
    let best = BestPoint {
        lambda: b.lambda,
        alpha: b.alpha,
        tp: b.score.true_positive,
        fp: b.score.false_positive,
        fn_: b.score.false_negative,
        tn: b.score.true_negative,
    };
    Ok(serde_json::to_string_pretty(&best).expect("best point serializes"))
}

// ---------------------------------------------------------------- synthesis

fn check_map(map: &ClassTransformMap, manifest: &DatasetManifest) -> Result<()> {
    let violations = map.validate(manifest);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidMap(violations))
    }
}

pub fn synth_augment(
    manifest: &Path,
    classes: Option<&Path>,
    map: &Path,
    out: &Path,
) -> Result<String> {
    let manifest = formats::read_manifest(manifest, classes)?;
    let map = formats::read_map(map)?;
    check_map(&map, &manifest)?;
    let examples = synthesis::build_augmented(&manifest, &map)?;
    formats::write_synthetic(out, &examples)?;
    Ok(format!("{} synthetic example(s)", examples.len()))
}

#[derive(Serialize)]
struct ZeroShotSummary {
    pairs: Vec<ZeroShotPair>,
    retained_records: usize,
    synthesized: usize,
}

#[derive(Serialize)]
struct ZeroShotPair {
    many_shot: u32,
    zero_shot: u32,
}

/// Writes `retained.jsonl` (with its class sidecar), `synthetic.jsonl` and
/// `pairs.json` into `out_dir`.
pub fn synth_zeroshot(
    manifest: &Path,
    classes: Option<&Path>,
    map: &Path,
    transform: Option<TransformId>,
    out_dir: &Path,
) -> Result<String> {
    let manifest = formats::read_manifest(manifest, classes)?;
    let map = formats::read_map(map)?;
    let split =
        synthesis::build_zero_shot_subset(&manifest, &map, transform.unwrap_or(map.transform))?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let retained = out_dir.join("retained.jsonl");
    formats::write_manifest(&retained, split.retained.records())?;
    let names: Vec<&str> = class_name_array(&split.retained)?;
    formats::write_json(&formats::sidecar_path(&retained), &names)?;
    formats::write_synthetic(&out_dir.join("synthetic.jsonl"), &split.synthesized)?;
    let summary = ZeroShotSummary {
        pairs: split
            .pairs
            .iter()
            .map(|&(m, z)| ZeroShotPair {
                many_shot: m.0,
                zero_shot: z.0,
            })
            .collect(),
        retained_records: split.retained.len(),
        synthesized: split.synthesized.len(),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    formats::write_with(&out_dir.join("pairs.json"), |w| {
        use std::io::Write;
        writeln!(w, "{text}")
    })?;
    Ok(text)
}

/// Names indexed by class id; the sidecar format needs ids `0..n`.
fn class_name_array(manifest: &DatasetManifest) -> Result<Vec<&str>> {
    let names = manifest.class_names();
    names
        .iter()
        .enumerate()
        .map(|(i, (id, name))| {
            if id.0 as usize == i {
                Ok(name.as_str())
            } else {
                Err(Error::Config(format!(
                    "class ids are not contiguous from 0 (missing {i})"
                )))
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SampleLine<'a> {
    video_id: &'a str,
    transform: Option<&'static str>,
    class_id: u32,
}

/// One sampler draw per training record, in manifest order, from a single
/// stream seeded with `seed`.
pub fn synth_sample(
    manifest: &Path,
    classes: Option<&Path>,
    maps: &[PathBuf],
    p: f64,
    seed: u64,
    out: &Path,
) -> Result<String> {
    let manifest = formats::read_manifest(manifest, classes)?;
    let maps = maps
        .iter()
        .map(|m| {
            let map = formats::read_map(m)?;
            check_map(&map, &manifest)?;
            Ok(map)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sampler = AugmentationSampler::new(maps, p, seed)?;
    let mut lines = Vec::new();
    let mut transformed = 0usize;
    for r in manifest
        .records()
        .iter()
        .filter(|r| r.split == Split::Train)
    {
        let s = sampler.sample(r.class_id)?;
        transformed += usize::from(s.transform.is_some());
        lines.push((r.video_id.as_str(), s));
    }
    formats::write_with(out, |w| {
        use std::io::Write;
        for (video_id, s) in &lines {
            let line = SampleLine {
                video_id,
                transform: s.transform.map(TransformId::as_str),
                class_id: s.class_id.0,
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    Ok(format!(
        "{} draw(s), {} transformed",
        lines.len(),
        transformed
    ))
}

/// Writes `<out>/<video_id>.rten` for every synthetic example, reading
/// `<src>/<source>.rten`.
pub fn synth_materialize(
    synthetic: &Path,
    src: &Path,
    out: &Path,
    layout: Option<Layout>,
    threads: usize,
) -> Result<Vec<TransformSummary>> {
    let examples = formats::read_synthetic(synthetic)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    // Group by transform so each batch shares one op; order within a group
    // follows the file.
    let mut summaries = Vec::new();
    for op in TransformId::ALL {
        let jobs: Vec<Job> = examples
            .iter()
            .filter(|e| e.transform == op)
            .map(|e: &SyntheticExample| Job {
                src: src.join(format!("{}.rten", e.source_video_id)),
                dst: out.join(format!("{}.rten", e.video_id())),
                label: e.video_id(),
            })
            .collect();
        if !jobs.is_empty() {
            summaries.push(run_jobs(op, layout, &jobs, threads));
        }
    }
    Ok(summaries)
}

// ---------------------------------------------------------------- evaluation

pub fn parse_variant(s: &str) -> Result<Variant> {
    if s.eq_ignore_ascii_case("original") {
        return Ok(Variant::Original);
    }
    s.parse::<TransformId>()
        .map(Variant::Transformed)
        .map_err(|e| Error::Config(e.to_string()))
}

pub fn parse_ks(s: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = s
        .split(',')
        .map(|k| {
            k.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid k list {s:?}")))
        })
        .collect::<Result<_>>()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config(format!("invalid k list {s:?}")));
    }
    Ok(ks)
}

pub struct EvalArgs<'a> {
    pub predictions: &'a Path,
    pub manifest: &'a Path,
    pub classes: Option<&'a Path>,
    pub variant: Variant,
    pub map: Option<&'a Path>,
    pub apply_lt: bool,
    pub groups: Option<&'a Path>,
    pub ks: &'a [usize],
    pub confusion_out: Option<&'a Path>,
    pub breakdown_out: Option<&'a Path>,
}

#[derive(Serialize)]
struct GroupJson {
    group: String,
    examples: u64,
    /// `None` serializes as null for groups without examples.
    topk: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct EvalJson {
    variant: String,
    label_transform: bool,
    ks: Vec<usize>,
    examples: u64,
    topk: Vec<f64>,
    groups: Vec<GroupJson>,
}

pub fn eval(a: &EvalArgs<'_>) -> Result<String> {
    let manifest = formats::read_manifest(a.manifest, a.classes)?;
    let log = formats::read_predictions(a.predictions)?;
    let map = a.map.map(formats::read_map).transpose()?;
    if let Some(m) = &map {
        check_map(m, &manifest)?;
    }
    let label_transform = match (a.apply_lt, &map) {
        (true, None) => return Err(Error::Config("--apply-lt needs --map".into())),
        (true, Some(m)) => Some(m),
        (false, _) => None,
    };
    let spec = EvalSpec {
        variant: a.variant,
        label_transform,
    };

    let all: BTreeSet<ClassId> = manifest.classes().collect();
    let overall = metrics::breakdown(&log, &manifest, spec, &[("all".into(), all)], a.ks)?
        .pop()
        .expect("one group requested");
    let topk = overall
        .accuracies
        .ok_or(metrics::MetricsError::EmptySelection)?;

    let groups = match a.groups {
        Some(p) => formats::read_groups(p)?,
        None => Vec::new(),
    };
    let rows = metrics::breakdown(&log, &manifest, spec, &groups, a.ks)?;
    if let Some(p) = a.breakdown_out {
        formats::write_breakdown_csv(p, a.ks, &rows)?;
    }
    if let Some(p) = a.confusion_out {
        let cm = metrics::confusion(&log, &manifest, a.variant, map.as_ref(), a.apply_lt)?;
        formats::write_confusion_csv(p, &cm)?;
    }
    let json = EvalJson {
        variant: a.variant.to_string(),
        label_transform: a.apply_lt,
        ks: a.ks.to_vec(),
        examples: overall.examples,
        topk,
        groups: rows
            .into_iter()
            .map(|r| GroupJson {
                group: r.group,
                examples: r.examples,
                topk: r.accuracies,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&json).expect("eval report serializes"))
}

// ---------------------------------------------------------------- perception

pub enum TallySource<'a> {
    Tally(&'a Path),
    Submissions {
        path: &'a Path,
        k: usize,
        min_correct: usize,
    },
}

/// One line per class: id, trials, forward choices, proportion, bounds and
/// verdict.
pub fn perception(source: TallySource<'_>, tally_out: Option<&Path>) -> Result<String> {
    let tallies: Vec<ClassTally> = match source {
        TallySource::Tally(p) => formats::read_tally(p)?,
        TallySource::Submissions {
            path,
            k,
            min_correct,
        } => {
            let subs = formats::read_submissions(path)?;
            let kept = perception::qc_filter(&subs, k, min_correct)?;
            info!(
                "{} of {} submission(s) passed catch trials",
                kept.len(),
                subs.len()
            );
            perception::tally(&kept)
        }
    };
    if let Some(p) = tally_out {
        formats::write_with(p, |w| {
            use std::io::Write;
            writeln!(w, "class_id,n_trials,forward_choices")?;
            for t in &tallies {
                writeln!(w, "{},{},{}", t.class_id, t.trials, t.forward)?;
            }
            Ok(())
        })?;
    }
    let mut out =
        String::from("class_id,n_trials,forward_choices,proportion,lower,upper,verdict\n");
    for t in &tallies {
        let (lo, hi) = perception::reversibility_bounds(t.trials)?;
        let verdict = perception::classify_reversibility(t)?;
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.4},{}\n",
            t.class_id,
            t.trials,
            t.forward,
            t.proportion(),
            lo,
            hi,
            verdict.as_str()
        ));
    }
    out.pop();
    Ok(out)
}

// ---------------------------------------------------------------- maps

#[derive(Serialize)]
struct MapSummary {
    transform: String,
    entries: usize,
    invariant: usize,
    equivariant: usize,
    novel_realistic: usize,
    novel_unrealistic: usize,
    violations: Vec<String>,
}

/// Category counts and, given a class universe, the invariant violations.
/// The universe is the manifest's classes or, failing that, the class-names
/// file.
pub fn validate_map(
    map: &Path,
    manifest: Option<&Path>,
    classes: Option<&Path>,
) -> Result<(String, Vec<MapViolation>)> {
    let map = formats::read_map(map)?;
    let violations = match (manifest, classes) {
        (Some(m), c) => map.validate(&formats::read_manifest(m, c)?),
        (None, Some(c)) => {
            map.validate_against(&formats::read_class_names(c)?.into_keys().collect())
        }
        (None, None) => map.validate_against(&map.entries.keys().copied().collect()),
    };
    let c = map.category_counts();
    let summary = MapSummary {
        transform: map.transform.as_str().into(),
        entries: map.entries.len(),
        invariant: c.invariant,
        equivariant: c.equivariant,
        novel_realistic: c.novel_realistic,
        novel_unrealistic: c.novel_unrealistic,
        violations: violations.iter().map(ToString::to_string).collect(),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    Ok((text, violations))
}
