use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use slavc::harness::{
    decode_map, encode_map, map_path, write_annotations, AnnotationRecord, DatasetManifest, FRAME,
};
use slavc::metrics::{NegativeType, PixelBox};
use slavc::slavc::LocalizationMap;

fn slavc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slavc"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Four positives with a centred box and two real negatives.
fn fixture(dir: &Path) {
    let mut records: Vec<AnnotationRecord> = (0..4)
        .map(|k| {
            AnnotationRecord::positive(
                format!("p{k}"),
                Some(format!("c{}", k % 2)),
                vec![PixelBox::new(80, 80, 144, 144)],
            )
        })
        .collect();
    for k in 0..2 {
        records.push(AnnotationRecord {
            negative: true,
            negative_type: NegativeType::Real,
            ..AnnotationRecord::positive(format!("n{k}"), None, vec![])
        });
    }
    let manifest = DatasetManifest::new(records, FRAME.0, FRAME.1).unwrap();
    let mut buf = Vec::new();
    write_annotations(&manifest, &mut buf).unwrap();
    fs::write(dir.join("ann.jsonl"), buf).unwrap();
}

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(slavc(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(
        slavc(dir.path(), &["no-such-command"]).status.code(),
        Some(1)
    );
    assert_eq!(slavc(dir.path(), &["eval"]).status.code(), Some(1));
}

#[test]
fn center_baseline_eval_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = slavc(
        dir.path(),
        &[
            "baseline-center",
            "--annotations",
            "ann.jsonl",
            "--out",
            "maps",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let map =
        decode_map(&fs::read(map_path(&dir.path().join("maps"), "p0").unwrap()).unwrap()).unwrap();
    assert_eq!((map.height(), map.width()), FRAME);

    let out = slavc(
        dir.path(),
        &[
            "eval",
            "--annotations",
            "ann.jsonl",
            "--maps",
            "maps",
            "--threshold-mode",
            "top-fraction:0.08",
            "--format",
            "csv",
        ],
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("# annotations = ann.jsonl"));
    let global = text.lines().find(|l| l.starts_with("global,")).unwrap();
    // every positive is centred, so the center prior localizes all of them
    let fields: Vec<&str> = global.split(',').collect();
    assert_eq!(fields[2], "4");
    assert_eq!(fields[3], "2");
    assert_eq!(fields[4], "100.00");
}

#[test]
fn eval_errors_are_user_errors() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = slavc(
        dir.path(),
        &["eval", "--annotations", "ann.jsonl", "--maps", "empty"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("6 map files missing"));

    slavc(
        dir.path(),
        &[
            "baseline-center",
            "--annotations",
            "ann.jsonl",
            "--out",
            "maps",
        ],
    );
    for bad in [["--gamma", "1.5"], ["--threshold-mode", "top-fraction:0"]] {
        let mut args = vec!["eval", "--annotations", "ann.jsonl", "--maps", "maps"];
        args.extend(bad);
        assert_eq!(slavc(dir.path(), &args).status.code(), Some(1), "{bad:?}");
    }

    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"id\":\"x\",\"negative\":false,\"boxes\":[],\"extra\":1}\n",
    )
    .unwrap();
    let out = slavc(
        dir.path(),
        &["eval", "--annotations", "bad.jsonl", "--maps", "maps"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn low_resolution_maps_are_resampled() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let maps = dir.path().join("maps");
    fs::create_dir(&maps).unwrap();
    // 7x7 map peaked at the centre
    let data = (0..49).map(|k| if k == 24 { 1.0 } else { 0.0 }).collect();
    let map = encode_map(&LocalizationMap::from_rows(7, 7, data).unwrap()).unwrap();
    for id in ["p0", "p1", "p2", "p3", "n0", "n1"] {
        fs::write(map_path(&maps, id).unwrap(), &map).unwrap();
    }
    let out = slavc(
        dir.path(),
        &[
            "eval",
            "--annotations",
            "ann.jsonl",
            "--maps",
            "maps",
            "--format",
            "json",
        ],
    );
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["positives"], 4);
}

#[test]
fn config_file_supplies_flags_and_explicit_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("gc.toml"),
        "loss = \"micl\"\ntrials = 2\nseed = 3\n",
    )
    .unwrap();
    let a = slavc(dir.path(), &["gradcheck", "--config", "gc.toml"]);
    assert!(a.status.success());
    let text = stdout(&a);
    assert!(text.contains("# loss = micl"));
    assert!(text.contains("# trials = 2"));

    let b = slavc(
        dir.path(),
        &["gradcheck", "--config", "gc.toml", "--trials", "1"],
    );
    assert!(stdout(&b).contains("# trials = 1"));

    fs::write(dir.path().join("bad.toml"), "trials = [1]\n").unwrap();
    assert_eq!(
        slavc(dir.path(), &["gradcheck", "--config", "bad.toml"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn corrupted_gradient_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let out = slavc(dir.path(), &["gradcheck", "--trials", "2", "--corrupt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn gen_negatives_counts() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = slavc(
        dir.path(),
        &[
            "gen-negatives",
            "--annotations",
            "ann.jsonl",
            "--count",
            "4",
            "--hard-fraction",
            "0.5",
            "--out",
            "ext.jsonl",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("added 4 negatives (2 auto-easy, 2 auto-hard) to 6 records"));
    assert_eq!(
        fs::read_to_string(dir.path().join("ext.jsonl"))
            .unwrap()
            .lines()
            .count(),
        10
    );
    let bad = slavc(
        dir.path(),
        &[
            "gen-negatives",
            "--annotations",
            "ann.jsonl",
            "--count",
            "lots",
            "--out",
            "x.jsonl",
        ],
    );
    assert_eq!(bad.status.code(), Some(1));
}
