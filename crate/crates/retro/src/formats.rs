//! File formats: JSONL manifests and prediction logs, JSON maps and reports,
//! CSV tallies.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use retro_core::discovery::{DiscoveryReport, SweepResult};
use retro_core::manifest::{
    ClassTransform, ClassTransformMap, DatasetManifest, ManifestRecord, Split,
};
use retro_core::metrics::{BreakdownRow, ConfusionMatrix};
use retro_core::perception::{ClassTally, PairChoice, SubmissionRecord};
use retro_core::predictions::{PredictionLog, Variant};
use retro_core::synthesis::{Provenance, SyntheticExample};
use retro_core::{ClassId, TransformId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Parses every non-blank line; errors carry the 1-based line number.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::parse(path, Some(i + 1), e))?;
        out.push((i + 1, value));
    }
    Ok(out)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::parse(path, None, e))
}

/// Writes via a buffered file; `body` receives the writer.
pub fn write_with(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    write_with(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, &item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn parse_transform(s: &str) -> std::result::Result<TransformId, String> {
    s.parse()
        .map_err(|e: retro_core::transform::UnknownTransform| e.to_string())
}

// ---------------------------------------------------------------- manifest

#[derive(Serialize, Deserialize)]
struct ManifestLine {
    video_id: String,
    class_id: u32,
    split: String,
}

fn parse_split(s: &str) -> Option<Split> {
    match s {
        "train" => Some(Split::Train),
        "val" => Some(Split::Val),
        "test" => Some(Split::Test),
        _ => None,
    }
}

/// Default location of the class-names file for a manifest: `x.jsonl` pairs
/// with `x.classes.json`.
pub fn sidecar_path(manifest: &Path) -> PathBuf {
    let stem = manifest.file_stem().unwrap_or_default().to_string_lossy();
    manifest.with_file_name(format!("{stem}.classes.json"))
}

/// Class names from a JSON array; position is the class id.
pub fn read_class_names(path: &Path) -> Result<BTreeMap<ClassId, String>> {
    let names: Vec<String> = read_json(path)?;
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(i, n)| (ClassId(i as u32), n))
        .collect())
}

/// Loads a manifest. Class names come from `classes` if given, else from the
/// sidecar next to the manifest if it exists, else every id seen is a class
/// named after its id.
pub fn read_manifest(path: &Path, classes: Option<&Path>) -> Result<DatasetManifest> {
    let mut records = Vec::new();
    for (line, m) in read_jsonl::<ManifestLine>(path)? {
        let split = parse_split(&m.split).ok_or_else(|| {
            Error::parse(path, Some(line), format!("unknown split {:?}", m.split))
        })?;
        records.push(ManifestRecord::new(m.video_id, m.class_id, split));
    }
    let sidecar = sidecar_path(path);
    let names = match classes {
        Some(p) => read_class_names(p)?,
        None if sidecar.exists() => read_class_names(&sidecar)?,
        None => records
            .iter()
            .map(|r| (r.class_id, r.class_id.to_string()))
            .collect(),
    };
    Ok(DatasetManifest::new(records, names)?)
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    write_jsonl(
        path,
        records.iter().map(|r| ManifestLine {
            video_id: r.video_id.clone(),
            class_id: r.class_id.0,
            split: r.split.as_str().into(),
        }),
    )
}

// ---------------------------------------------------------------- maps

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Debug)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EntryJson {
    Invariant,
    Equivariant {
        target: u32,
    },
    Novel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        realistic: Option<bool>,
    },
}

impl From<ClassTransform> for EntryJson {
    fn from(e: ClassTransform) -> Self {
        match e {
            ClassTransform::Invariant => EntryJson::Invariant,
            ClassTransform::Equivariant(t) => EntryJson::Equivariant { target: t.0 },
            ClassTransform::Novel { realistic } => EntryJson::Novel { realistic },
        }
    }
}

impl From<EntryJson> for ClassTransform {
    fn from(e: EntryJson) -> Self {
        match e {
            EntryJson::Invariant => ClassTransform::Invariant,
            EntryJson::Equivariant { target } => ClassTransform::Equivariant(ClassId(target)),
            EntryJson::Novel { realistic } => ClassTransform::Novel { realistic },
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct MapJson {
    pub transform: String,
    pub classes: BTreeMap<u32, EntryJson>,
}

impl From<&ClassTransformMap> for MapJson {
    fn from(m: &ClassTransformMap) -> Self {
        MapJson {
            transform: m.transform.as_str().into(),
            classes: m.entries.iter().map(|(k, v)| (k.0, (*v).into())).collect(),
        }
    }
}

impl MapJson {
    fn into_map(self, path: &Path) -> Result<ClassTransformMap> {
        let transform =
            parse_transform(&self.transform).map_err(|e| Error::parse(path, None, e))?;
        let entries = self
            .classes
            .into_iter()
            .map(|(k, v)| (ClassId(k), v.into()))
            .collect();
        Ok(ClassTransformMap { transform, entries })
    }
}

/// Reads a map (a discovery report is accepted too; extra fields are ignored).
pub fn read_map(path: &Path) -> Result<ClassTransformMap> {
    read_json::<MapJson>(path)?.into_map(path)
}

pub fn write_map(path: &Path, map: &ClassTransformMap) -> Result<()> {
    write_json(path, &MapJson::from(map))
}

// ---------------------------------------------------------------- predictions

#[derive(Deserialize)]
struct PredictionLine {
    video_id: String,
    variant: String,
    #[serde(default)]
    transform: Option<String>,
    ranking: Vec<u32>,
}

pub fn read_predictions(path: &Path) -> Result<PredictionLog> {
    let mut log = PredictionLog::new();
    for (line, p) in read_jsonl::<PredictionLine>(path)? {
        let bad = |msg: String| Error::parse(path, Some(line), msg);
        let variant = match (p.variant.as_str(), p.transform.as_deref()) {
            ("original", None) => Variant::Original,
            ("original", Some(t)) => {
                return Err(bad(format!("original prediction with transform {t:?}")));
            }
            ("transformed", Some(t)) => Variant::Transformed(parse_transform(t).map_err(bad)?),
            ("transformed", None) => {
                return Err(bad("transformed prediction without a transform".into()))
            }
            (other, _) => return Err(bad(format!("unknown variant {other:?}"))),
        };
        log.insert(
            p.video_id,
            variant,
            p.ranking.into_iter().map(ClassId).collect(),
        )
        .map_err(|e| bad(e.to_string()))?;
    }
    Ok(log)
}

// ---------------------------------------------------------------- synthetic manifests

#[derive(Serialize, Deserialize)]
pub struct SyntheticLine {
    pub video_id: String,
    pub source: String,
    pub transform: String,
    pub class_id: u32,
    pub origin: String,
}

impl From<&SyntheticExample> for SyntheticLine {
    fn from(s: &SyntheticExample) -> Self {
        SyntheticLine {
            video_id: s.video_id(),
            source: s.source_video_id.clone(),
            transform: s.transform.as_str().into(),
            class_id: s.class_id.0,
            origin: s.provenance.as_str().into(),
        }
    }
}

pub fn write_synthetic(path: &Path, examples: &[SyntheticExample]) -> Result<()> {
    write_jsonl(path, examples.iter().map(SyntheticLine::from))
}

pub fn read_synthetic(path: &Path) -> Result<Vec<SyntheticExample>> {
    read_jsonl::<SyntheticLine>(path)?
        .into_iter()
        .map(|(line, s)| {
            let bad = |msg: String| Error::parse(path, Some(line), msg);
            let provenance = match s.origin.as_str() {
                "augment" => Provenance::Augmentation,
                "zeroshot" => Provenance::ZeroShot,
                other => return Err(bad(format!("unknown origin {other:?}"))),
            };
            Ok(SyntheticExample {
                source_video_id: s.source,
                transform: parse_transform(&s.transform).map_err(bad)?,
                class_id: ClassId(s.class_id),
                provenance,
            })
        })
        .collect()
}

// ---------------------------------------------------------------- discovery output

#[derive(Serialize)]
struct ConfigJson {
    lambda: f64,
    alpha: f64,
}

#[derive(Serialize)]
struct FlagsJson {
    not_established: bool,
    conflict: bool,
}

#[derive(Serialize)]
struct DiagnosticsJson {
    class_id: u32,
    lambda_value: f64,
    established: bool,
    omega_self: f64,
    candidate_target: u32,
    omega_target: f64,
    omega: BTreeMap<u32, f64>,
    flags: FlagsJson,
    outcome: EntryJson,
}

#[derive(Serialize)]
struct ReportJson {
    #[serde(flatten)]
    map: MapJson,
    config: ConfigJson,
    diagnostics: Vec<DiagnosticsJson>,
}

/// The report carries the map fields at top level, so it can be read back
/// with [`read_map`].
pub fn write_report(path: &Path, report: &DiscoveryReport) -> Result<()> {
    let json = ReportJson {
        map: MapJson::from(&report.map),
        config: ConfigJson {
            lambda: report.config.lambda(),
            alpha: report.config.alpha(),
        },
        diagnostics: report
            .classes
            .iter()
            .map(|d| DiagnosticsJson {
                class_id: d.class.0,
                lambda_value: d.recall,
                established: d.established,
                omega_self: d.omega_self,
                candidate_target: d.candidate.0,
                omega_target: d.omega_candidate,
                omega: d
                    .omega
                    .iter()
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(k, w)| (k.0, *w))
                    .collect(),
                flags: FlagsJson {
                    not_established: d.flags.not_established,
                    conflict: d.flags.conflict,
                },
                outcome: d.outcome.into(),
            })
            .collect(),
    };
    write_json(path, &json)
}

pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["lambda", "alpha", "tp", "fp", "fn", "tn", "best"])
        .map_err(|e| csv_error(path, e))?;
    for p in &sweep.points {
        let s = p.score;
        w.write_record([
            p.lambda.to_string(),
            p.alpha.to_string(),
            s.true_positive.to_string(),
            s.false_positive.to_string(),
            s.false_negative.to_string(),
            s.true_negative.to_string(),
            u8::from(*p == sweep.best).to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, None, format!("{other:?}")),
    }
}

// ---------------------------------------------------------------- evaluation

/// Named class groups: a JSON object from group name to class ids. Group
/// order follows the file.
pub fn read_groups(path: &Path) -> Result<Vec<(String, BTreeSet<ClassId>)>> {
    let raw: serde_json::Map<String, serde_json::Value> = read_json(path)?;
    raw.into_iter()
        .map(|(name, v)| {
            let ids: Vec<u32> = serde_json::from_value(v)
                .map_err(|e| Error::parse(path, None, format!("group {name:?}: {e}")))?;
            Ok((name, ids.into_iter().map(ClassId).collect()))
        })
        .collect()
}

pub fn write_breakdown_csv(path: &Path, ks: &[usize], rows: &[BreakdownRow]) -> Result<()> {
    write_with(path, |w| {
        write!(w, "group,examples")?;
        for k in ks {
            write!(w, ",top{k}")?;
        }
        writeln!(w)?;
        for r in rows {
            write!(w, "{},{}", csv_field(&r.group), r.examples)?;
            match &r.accuracies {
                Some(a) => a.iter().try_for_each(|x| write!(w, ",{x:.6}"))?,
                None => ks.iter().try_for_each(|_| write!(w, ",n/a"))?,
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Square CSV: header row and first column are class ids in matrix order.
pub fn write_confusion_csv(path: &Path, cm: &ConfusionMatrix) -> Result<()> {
    write_with(path, |w| {
        write!(w, "truth\\pred")?;
        for c in cm.order() {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
        for (i, c) in cm.order().iter().enumerate() {
            write!(w, "{c}")?;
            for x in cm.row(i) {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- perception

#[derive(Deserialize)]
struct TallyRow {
    class_id: u32,
    n_trials: u64,
    forward_choices: u64,
}

pub fn read_tally(path: &Path) -> Result<Vec<ClassTally>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<TallyRow>().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, Some(line), e))?;
        out.push(ClassTally::new(
            ClassId(row.class_id),
            row.n_trials,
            row.forward_choices,
        )?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct ChoiceJson {
    class_id: u32,
    forward: bool,
}

#[derive(Deserialize)]
struct SubmissionJson {
    worker_id: String,
    choices: Vec<ChoiceJson>,
    #[serde(rename = "catch")]
    catch_trials: Vec<bool>,
}

pub fn read_submissions(path: &Path) -> Result<Vec<SubmissionRecord>> {
    Ok(read_jsonl::<SubmissionJson>(path)?
        .into_iter()
        .map(|(_, s)| SubmissionRecord {
            worker_id: s.worker_id,
            choices: s
                .choices
                .into_iter()
                .map(|c| PairChoice {
                    class_id: ClassId(c.class_id),
                    chose_forward: c.forward,
                })
                .collect(),
            catch_trials: s.catch_trials,
        })
        .collect())
}
