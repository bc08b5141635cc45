#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retro::{formats, rten};
use retro_core::manifest::{ClassTransform, ClassTransformMap, DatasetManifest, Split};
use retro_core::predictions::{PredictionLog, Variant};
use retro_core::tensor::{Dims, FrameTensor, Layout, Payload};
use retro_core::{ClassId, TransformId};
use tempfile::TempDir;

fn retro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retro"))
        .args(args)
        .env("RETRO_LOG", "error")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn random_tensor(rng: &mut ChaCha8Rng) -> FrameTensor {
    let dims = Dims::new(
        rng.random_range(1..=8),
        rng.random_range(1..=4),
        rng.random_range(1..=16),
        rng.random_range(1..=16),
    );
    let n = dims.element_count().unwrap();
    let layout = if rng.random_bool(0.5) {
        Layout::Tchw
    } else {
        Layout::Cthw
    };
    let payload = if rng.random_bool(0.5) {
        Payload::U8((0..n).map(|_| rng.random()).collect())
    } else {
        Payload::F32((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    };
    FrameTensor::new(dims, layout, payload).unwrap()
}

fn write_manifest(path: &Path, manifest: &DatasetManifest) {
    formats::write_manifest(path, manifest.records()).unwrap();
    let names: Vec<&str> = manifest
        .class_names()
        .values()
        .map(String::as_str)
        .collect();
    formats::write_json(&formats::sidecar_path(path), &names).unwrap();
}

fn write_log(
    path: &Path,
    manifest: &DatasetManifest,
    log: &PredictionLog,
    transforms: &[TransformId],
) {
    let mut out = String::new();
    for r in manifest.records() {
        let mut line = |variant: &str, t: Option<TransformId>, rank: &[ClassId]| {
            let t = t.map_or("null".to_string(), |t| format!("\"{t}\""));
            let rank: Vec<String> = rank.iter().map(|c| c.to_string()).collect();
            writeln!(
                out,
                r#"{{"video_id": "{}", "variant": "{variant}", "transform": {t}, "ranking": [{}]}}"#,
                r.video_id,
                rank.join(",")
            )
            .unwrap();
        };
        if let Some(rank) = log.ranking(&r.video_id, Variant::Original) {
            line("original", None, rank);
        }
        for &t in transforms {
            if let Some(rank) = log.ranking(&r.video_id, Variant::Transformed(t)) {
                line("transformed", Some(t), rank);
            }
        }
    }
    std::fs::write(path, out).unwrap();
}

#[test]
fn transform_empty_directory() {
    let dir = TempDir::new().unwrap();
    let (input, output) = (dir.path().join("in"), dir.path().join("out"));
    std::fs::create_dir(&input).unwrap();
    let o = retro(&[
        "transform",
        "--op",
        "tr",
        "--in",
        s(&input),
        "--out",
        s(&output),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["files"], 0);
    assert_eq!(summary["failed"], 0);
}

#[test]
fn transform_twice_restores_input() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    std::fs::create_dir(&a).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    rten::write(&a.join("clip.rten"), &random_tensor(&mut rng)).unwrap();
    for (from, to) in [(&a, &b), (&b, &c)] {
        let o = retro(&["transform", "--op", "tr", "--in", s(from), "--out", s(to)]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let original = std::fs::read(a.join("clip.rten")).unwrap();
    assert_ne!(std::fs::read(b.join("clip.rten")).unwrap(), original);
    assert_eq!(std::fs::read(c.join("clip.rten")).unwrap(), original);
}

#[test]
fn transform_matches_library_for_random_files() {
    let dir = TempDir::new().unwrap();
    let (input, output) = (dir.path().join("in"), dir.path().join("out"));
    std::fs::create_dir(&input).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tensors: Vec<FrameTensor> = (0..100).map(|_| random_tensor(&mut rng)).collect();
    for (i, t) in tensors.iter().enumerate() {
        rten::write(&input.join(format!("{i:03}.rten")), t).unwrap();
    }
    for (op, id) in [("hf", TransformId::Hf), ("hftr", TransformId::HfTr)] {
        let o = retro(&[
            "transform",
            "--op",
            op,
            "--in",
            s(&input),
            "--out",
            s(&output),
            "--layout",
            "cthw",
            "--jobs",
            "4",
        ]);
        assert_eq!(o.status.code(), Some(0));
        for (i, t) in tensors.iter().enumerate() {
            let expected = rten::encode(&t.apply(id).to_layout(Layout::Cthw));
            let got = std::fs::read(output.join(format!("{i:03}.rten"))).unwrap();
            assert_eq!(got, expected, "file {i} op {op}");
        }
    }
}

#[test]
fn transform_reports_corrupt_files() {
    let dir = TempDir::new().unwrap();
    let (input, output) = (dir.path().join("in"), dir.path().join("out"));
    std::fs::create_dir(&input).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    rten::write(&input.join("good.rten"), &random_tensor(&mut rng)).unwrap();
    std::fs::write(input.join("bad.rten"), b"RTEN\x01\x00").unwrap();
    let o = retro(&[
        "transform",
        "--op",
        "hf",
        "--in",
        s(&input),
        "--out",
        s(&output),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["files"], 2);
    assert_eq!(summary["failed"], 1);
    assert_eq!(summary["failures"][0]["file"], "bad.rten");
    assert!(output.join("good.rten").exists());
}

fn planted_files(dir: &Path, seed: u64) -> (support::Instance, PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = support::planted_instance(&mut rng, 12, 20, 0.0, TransformId::Tr);
    let (m, p) = (dir.join("manifest.jsonl"), dir.join("pred.jsonl"));
    write_manifest(&m, &inst.manifest);
    write_log(&p, &inst.manifest, &inst.log, &[TransformId::Tr]);
    (inst, m, p)
}

#[test]
fn discover_recovers_planted_map_for_any_job_count() {
    let dir = TempDir::new().unwrap();
    let (inst, m, p) = planted_files(dir.path(), 4);
    let mut reports = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("report{jobs}.json"));
        let map_out = dir.path().join(format!("map{jobs}.json"));
        let o = retro(&[
            "discover",
            "--manifest",
            s(&m),
            "--pred",
            s(&p),
            "--transform",
            "TR",
            "--lambda",
            "0.9",
            "--alpha",
            "0.5",
            "--out",
            s(&out),
            "--map-out",
            s(&map_out),
            "--jobs",
            jobs,
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        let map = formats::read_map(&map_out).unwrap();
        for (class, planted) in &inst.planted.entries {
            assert_eq!(
                map.target_of(*class),
                planted.target(*class),
                "class {class}"
            );
        }
        assert_eq!(formats::read_map(&out).unwrap(), map);
        reports.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn discover_identity_log_is_all_invariant() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (manifest, mut log) = support::random_log(&mut rng, 6, 60, 1.0);
    for r in manifest.records() {
        let rank = log
            .ranking(&r.video_id, Variant::Original)
            .unwrap()
            .to_vec();
        log.insert(
            r.video_id.clone(),
            Variant::Transformed(TransformId::Hf),
            rank,
        )
        .unwrap();
    }
    let (m, p, out) = (
        dir.path().join("m.jsonl"),
        dir.path().join("p.jsonl"),
        dir.path().join("r.json"),
    );
    write_manifest(&m, &manifest);
    write_log(&p, &manifest, &log, &[TransformId::Hf]);
    let o = retro(&[
        "discover",
        "--manifest",
        s(&m),
        "--pred",
        s(&p),
        "--transform",
        "HF",
        "--lambda",
        "0.5",
        "--alpha",
        "0.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let map = formats::read_map(&out).unwrap();
    assert_eq!(map.entries.len(), 6);
    assert!(map
        .entries
        .values()
        .all(|e| *e == ClassTransform::Invariant));
}

#[test]
fn discover_incomplete_log_exit_code() {
    let dir = TempDir::new().unwrap();
    let (inst, m, _) = planted_files(dir.path(), 6);
    let p = dir.path().join("original_only.jsonl");
    write_log(&p, &inst.manifest, &inst.log, &[]);
    let out = dir.path().join("r.json");
    let o = retro(&[
        "discover",
        "--manifest",
        s(&m),
        "--pred",
        s(&p),
        "--transform",
        "TR",
        "--lambda",
        "0.9",
        "--alpha",
        "0.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(6));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&inst.manifest.records()[0].video_id), "{err}");
    assert!(!out.exists());
}

#[test]
fn sweep_finds_planted_point() {
    let dir = TempDir::new().unwrap();
    let (inst, m, p) = planted_files(dir.path(), 7);
    let truth = dir.path().join("truth.json");
    formats::write_map(&truth, &inst.planted).unwrap();
    let table = dir.path().join("sweep.csv");
    let o = retro(&[
        "sweep",
        "--manifest",
        s(&m),
        "--pred",
        s(&p),
        "--truth",
        s(&truth),
        "--lambda-grid",
        "0.5:0.9:0.1",
        "--alpha-grid",
        "0.1:1:0.3",
        "--out",
        s(&table),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let best: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pairs = inst
        .planted
        .entries
        .values()
        .filter(|e| matches!(e, ClassTransform::Equivariant(_)))
        .count();
    let invariant = inst
        .planted
        .entries
        .values()
        .filter(|e| **e == ClassTransform::Invariant)
        .count();
    assert_eq!(best["tp"], pairs + invariant);
    assert_eq!(best["fp"], 0);
    let csv = std::fs::read_to_string(&table).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 4);
    assert!(csv.starts_with("lambda,alpha,tp,fp,fn,tn,best\n0.5,0.1,"));
}

fn synthetic_manifest_with_pairs(
    dir: &Path,
) -> (PathBuf, PathBuf, DatasetManifest, ClassTransformMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lines = String::new();
    let n_classes = 8u32;
    for i in 0..200 {
        let class = rng.random_range(0..n_classes);
        let split = ["train", "train", "train", "val", "test"][rng.random_range(0..5)];
        writeln!(
            lines,
            r#"{{"video_id": "v{i}", "class_id": {class}, "split": "{split}"}}"#
        )
        .unwrap();
    }
    let m = dir.join("m.jsonl");
    std::fs::write(&m, lines).unwrap();
    let mut entries = BTreeMap::new();
    for (a, b) in [(0, 1), (2, 5)] {
        entries.insert(ClassId(a), ClassTransform::Equivariant(ClassId(b)));
        entries.insert(ClassId(b), ClassTransform::Equivariant(ClassId(a)));
    }
    entries.insert(ClassId(3), ClassTransform::Invariant);
    entries.insert(ClassId(4), ClassTransform::Invariant);
    entries.insert(ClassId(6), ClassTransform::NOVEL);
    entries.insert(ClassId(7), ClassTransform::NOVEL);
    let map = ClassTransformMap {
        transform: TransformId::Hf,
        entries,
    };
    let map_path = dir.join("map.json");
    formats::write_map(&map_path, &map).unwrap();
    (
        m.clone(),
        map_path,
        formats::read_manifest(&m, None).unwrap(),
        map,
    )
}

#[test]
fn synth_zeroshot_output_satisfies_split_invariants() {
    let dir = TempDir::new().unwrap();
    let (m, map_path, manifest, _) = synthetic_manifest_with_pairs(dir.path());
    let out = dir.path().join("zs");
    let o = retro(&[
        "synth",
        "zeroshot",
        "--manifest",
        s(&m),
        "--map",
        s(&map_path),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    // Recheck from the written files only.
    let retained = formats::read_manifest(&out.join("retained.jsonl"), None).unwrap();
    let synthetic = formats::read_synthetic(&out.join("synthetic.jsonl")).unwrap();
    let train = manifest.split_counts(Split::Train);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("pairs.json")).unwrap()).unwrap();
    let pairs = summary["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 2);
    for pair in pairs {
        let many = ClassId(pair["many_shot"].as_u64().unwrap() as u32);
        let zero = ClassId(pair["zero_shot"].as_u64().unwrap() as u32);
        assert!(train[&many] >= train[&zero]);
        assert_eq!(
            retained
                .records_of(zero)
                .filter(|r| r.split == Split::Train)
                .count(),
            0
        );
        let made: Vec<_> = synthetic.iter().filter(|e| e.class_id == zero).collect();
        assert_eq!(made.len(), train[&many]);
        for e in made {
            assert_eq!(manifest.get(&e.source_video_id).unwrap().class_id, many);
            assert_eq!(e.transform, TransformId::Hf);
        }
        // held-out records of the zero-shot class survive
        let held_out = manifest
            .records_of(zero)
            .filter(|r| r.split != Split::Train)
            .count();
        assert_eq!(retained.records_of(zero).count(), held_out);
    }
    assert_eq!(retained.class_names(), manifest.class_names());
}

#[test]
fn synth_augment_sample_and_materialize() {
    let dir = TempDir::new().unwrap();
    let (m, map_path, manifest, map) = synthetic_manifest_with_pairs(dir.path());
    let aug = dir.path().join("aug.jsonl");
    let o = retro(&[
        "synth",
        "augment",
        "--manifest",
        s(&m),
        "--map",
        s(&map_path),
        "--out",
        s(&aug),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let examples = formats::read_synthetic(&aug).unwrap();
    let mapped_train = manifest
        .records()
        .iter()
        .filter(|r| r.split == Split::Train && map.target_of(r.class_id).is_some());
    assert_eq!(examples.len(), mapped_train.count());

    let src = dir.path().join("src");
    std::fs::create_dir(&src).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for r in manifest.records() {
        rten::write(
            &src.join(format!("{}.rten", r.video_id)),
            &random_tensor(&mut rng),
        )
        .unwrap();
    }
    let out = dir.path().join("out");
    let o = retro(&[
        "synth",
        "materialize",
        "--synthetic",
        s(&aug),
        "--src",
        s(&src),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for e in &examples {
        let source = rten::read(&src.join(format!("{}.rten", e.source_video_id))).unwrap();
        let made = rten::read(&out.join(format!("{}.rten", e.video_id()))).unwrap();
        assert_eq!(made, source.apply(e.transform));
    }

    let rejected = dir.path().join("rejected.jsonl");
    let o = retro(&[
        "synth",
        "sample",
        "--manifest",
        s(&m),
        "--map",
        s(&map_path),
        "--out",
        s(&rejected),
    ]);
    assert_eq!(
        o.status.code(),
        Some(5),
        "novel classes in the manifest must be rejected"
    );
    let mapped = dir.path().join("mapped.jsonl");
    let mapped_lines: String = std::fs::read_to_string(&m)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"class_id\": 6,") && !l.contains("\"class_id\": 7,"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&mapped, mapped_lines).unwrap();
    // keep all eight classes in the universe so the map still validates
    let names = dir.path().join("names.json");
    std::fs::write(&names, r#"["0", "1", "2", "3", "4", "5", "6", "7"]"#).unwrap();
    let mut outputs = Vec::new();
    for seed in ["11", "11", "12"] {
        let path = dir.path().join("sample.jsonl");
        let o = retro(&[
            "synth",
            "sample",
            "--manifest",
            s(&mapped),
            "--classes",
            s(&names),
            "--map",
            s(&map_path),
            "--p",
            "0.5",
            "--seed",
            seed,
            "--out",
            s(&path),
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_ne!(outputs[0], outputs[2]);
}

#[test]
fn eval_perfect_log_top1_is_one() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (manifest, log) = support::random_log(&mut rng, 10, 80, 1.0);
    let (m, p) = (dir.path().join("m.jsonl"), dir.path().join("p.jsonl"));
    write_manifest(&m, &manifest);
    write_log(&p, &manifest, &log, &[]);
    let groups = dir.path().join("groups.json");
    std::fs::write(
        &groups,
        r#"{"low": [0, 1, 2, 3, 4], "high": [5, 6, 7, 8, 9], "none": []}"#,
    )
    .unwrap();
    let breakdown = dir.path().join("b.csv");
    let confusion = dir.path().join("c.csv");
    let o = retro(&[
        "eval",
        "--pred",
        s(&p),
        "--manifest",
        s(&m),
        "--topk",
        "1",
        "--groups",
        s(&groups),
        "--breakdown-out",
        s(&breakdown),
        "--confusion-out",
        s(&confusion),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["topk"][0], 1.0);
    assert_eq!(report["examples"], 80);
    assert_eq!(report["groups"][2]["topk"], serde_json::Value::Null);
    let table = std::fs::read_to_string(&breakdown).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "group,examples,top1");
    assert!(rows[1].starts_with("low,") && rows[1].ends_with(",1.000000"));
    assert_eq!(rows[3], "none,0,n/a");
    let cm = std::fs::read_to_string(&confusion).unwrap();
    assert_eq!(cm.lines().count(), 11);
}

#[test]
fn eval_without_predictions_is_undefined() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (manifest, log) = support::random_log(&mut rng, 4, 10, 1.0);
    let (m, p) = (dir.path().join("m.jsonl"), dir.path().join("p.jsonl"));
    write_manifest(&m, &manifest);
    write_log(&p, &manifest, &log, &[]);
    let o = retro(&[
        "eval",
        "--pred",
        s(&p),
        "--manifest",
        s(&m),
        "--variant",
        "TR",
        "--topk",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(7));
}

#[test]
fn perception_reports_reversible() {
    let dir = TempDir::new().unwrap();
    let tally = dir.path().join("t.csv");
    std::fs::write(
        &tally,
        "class_id,n_trials,forward_choices\n3,200,110\n4,120,80\n",
    )
    .unwrap();
    let o = retro(&["perception", "--tally", s(&tally)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[1], "3,200,110,0.5500,0.3939,0.6061,reversible");
    assert_eq!(lines[2], "4,120,80,0.6667,0.3631,0.6369,forward-preferred");
}

#[test]
fn perception_from_submissions() {
    let dir = TempDir::new().unwrap();
    let subs = dir.path().join("s.jsonl");
    std::fs::write(
        &subs,
        concat!(
            r#"{"worker_id": "a", "choices": [{"class_id": 1, "forward": true}, {"class_id": 2, "forward": false}], "catch": [true, true]}"#,
            "\n",
            r#"{"worker_id": "b", "choices": [{"class_id": 1, "forward": true}], "catch": [true, false]}"#,
            "\n",
        ),
    )
    .unwrap();
    let tally_out = dir.path().join("t.csv");
    let o = retro(&[
        "perception",
        "--qc",
        s(&subs),
        "--k",
        "2",
        "--tally-out",
        s(&tally_out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        std::fs::read_to_string(&tally_out).unwrap(),
        "class_id,n_trials,forward_choices\n1,1,1\n2,1,0\n"
    );
    let o = retro(&["perception", "--qc", s(&subs), "--k", "3"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn usage_and_parse_errors_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(retro(&["transform", "--op", "xx"]).status.code(), Some(2));
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"video_id\": \"a\", \"class_id\": 0, \"split\": \"train\"}\nnot json\n",
    )
    .unwrap();
    let o = retro(&[
        "synth",
        "augment",
        "--manifest",
        s(&bad),
        "--map",
        "x",
        "--out",
        "y",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.jsonl:2"));
    let missing = dir.path().join("missing.jsonl");
    let o = retro(&[
        "synth",
        "augment",
        "--manifest",
        s(&missing),
        "--map",
        "x",
        "--out",
        "y",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = retro(&[
        "discover",
        "--manifest",
        s(&bad),
        "--pred",
        s(&bad),
        "--transform",
        "TR",
        "--lambda",
        "1.5",
        "--alpha",
        "0.5",
        "--out",
        "r.json",
    ]);
    assert_eq!(o.status.code(), Some(8));
}

#[test]
fn validate_map_fixtures() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let classes = fixtures.join("jester_classes.json");
    for (file, counts) in [
        ("jester_tr.json", [8, 14, 5, 0]),
        ("jester_hf.json", [21, 6, 0, 0]),
    ] {
        let o = retro(&[
            "validate-map",
            "--map",
            s(&fixtures.join(file)),
            "--classes",
            s(&classes),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        let got = [
            "invariant",
            "equivariant",
            "novel_realistic",
            "novel_unrealistic",
        ]
        .map(|k| v[k].as_u64().unwrap());
        assert_eq!(got, counts.map(|c| c as u64), "{file}");
    }
    let dir = TempDir::new().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(
        &broken,
        r#"{"transform": "TR", "classes": {"0": {"kind": "equivariant", "target": 1}, "1": {"kind": "invariant"}}}"#,
    )
    .unwrap();
    let o = retro(&["validate-map", "--map", s(&broken)]);
    assert_eq!(o.status.code(), Some(5));
}
