use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use uwfkit::io::{decode_image, encode_image, ImageIoError};
use uwfkit::manifest::read_manifest;
use uwfkit_core::pipeline::{Eye, PairRecord, Phase, Split, Status};
use uwfkit_core::{MetricReport, Raster};

fn uwfkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uwfkit"))
        .args(args)
        .env_remove("UWFKIT_CONFIG")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn record(patient: &str, k: usize, elapsed: Option<f64>) -> PairRecord {
    let mut r = PairRecord::new(
        patient,
        Eye::Right,
        "v1",
        format!("ri{k}.png"),
        format!("fa{k}.png"),
    );
    r.injection_elapsed_s = elapsed;
    r
}

fn write_records(path: &Path, rs: &[PairRecord]) {
    uwfkit::manifest::write_manifest(path, rs).unwrap();
}

#[test]
fn encode_decode_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let r = Raster::from_fn(37, 21, |x, y| ((x * 7 + y * 13) % 101) as f64 / 100.0);
    for name in ["a.png", "a.pgm"] {
        let p = dir.path().join(name);
        encode_image(&r, &p).unwrap();
        let back = decode_image(&p).unwrap();
        assert_eq!(back.dims(), r.dims());
        for (a, b) in back.data().iter().zip(r.data()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }
    let rgb = Raster::new(2, 1, 3, vec![0.0, 0.5, 1.0, 0.25, 0.75, 0.1]).unwrap();
    let p = dir.path().join("c.ppm");
    encode_image(&rgb, &p).unwrap();
    assert_eq!(decode_image(&p).unwrap().channels(), 3);
    let zeros = dir.path().join("z.png");
    encode_image(&Raster::zeros(4, 4), &zeros).unwrap();
    assert_eq!(decode_image(&zeros).unwrap().data(), &[0.0; 16][..]);
}

#[test]
fn unwritable_destination_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, b"x").unwrap();
    let e = encode_image(&Raster::zeros(2, 2), &file.join("out.png")).unwrap_err();
    assert!(matches!(e, ImageIoError::Io { .. }), "{e}");
    let e = decode_image(&dir.path().join("missing.png")).unwrap_err();
    assert!(matches!(e, ImageIoError::Io { .. }), "{e}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(uwfkit(&[]).status.code(), Some(2));
    assert_eq!(uwfkit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        uwfkit(&["split", "--manifest", "m.jsonl"]).status.code(),
        Some(2)
    );
    assert_eq!(
        uwfkit(&["split", "--manifest", "m", "--out", "o", "--ratio", "8:0:1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(uwfkit(&["--help"]).status.code(), Some(0));
    let help = String::from_utf8(uwfkit(&["phase-bin", "--help"]).stdout).unwrap();
    assert!(help.contains("60 s counts as early"), "{help}");
}

#[test]
fn command_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.jsonl");
    let out = dir.path().join("o.jsonl");
    assert_eq!(
        uwfkit(&["phase-bin", "--manifest", s(&missing), "--out", s(&out)])
            .status
            .code(),
        Some(1)
    );
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "dice_gate = 2.0\n").unwrap();
    let m = dir.path().join("m.jsonl");
    write_records(&m, &[record("p", 0, None)]);
    let o = uwfkit(&[
        "--config",
        s(&bad),
        "gate",
        "--manifest",
        s(&m),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dice gate"));
}

#[test]
fn phase_bin_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.jsonl");
    let mut rs = Vec::new();
    for p in 0..30 {
        for k in 0..3 {
            rs.push(record(
                &format!("P{p:03}"),
                k,
                Some([10.0, 40.0, 200.0, 400.0][(p + k) % 4]),
            ));
        }
    }
    rs.push(record("P999", 0, Some(-3.0)));
    write_records(&m, &rs);

    let binned = dir.path().join("b.jsonl");
    assert!(
        uwfkit(&["phase-bin", "--manifest", s(&m), "--out", s(&binned)])
            .status
            .success()
    );
    let out = read_manifest(&binned).unwrap();
    let phase_of = |e: f64| {
        out.iter()
            .find(|r| r.injection_elapsed_s == Some(e))
            .unwrap()
            .phase
    };
    assert_eq!(phase_of(10.0), Phase::Unknown);
    assert_eq!(phase_of(40.0), Phase::Early);
    assert_eq!(phase_of(200.0), Phase::Mid);
    assert_eq!(phase_of(400.0), Phase::Late);
    assert!(out
        .iter()
        .find(|r| r.patient_id == "P999")
        .unwrap()
        .status
        .is_rejected());

    let split = dir.path().join("s.jsonl");
    let o = uwfkit(&[
        "split",
        "--manifest",
        s(&binned),
        "--ratio",
        "8:1:1",
        "--seed",
        "7",
        "--out",
        s(&split),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = read_manifest(&split).unwrap();
    assert!(out.iter().all(|r| r.split.is_some()));
    let train = out.iter().filter(|r| r.split == Some(Split::Train)).count();
    assert!(train > out.len() / 2);
    uwfkit_core::pipeline::check_split_integrity(&out).unwrap();
}

#[test]
fn gate_partitions_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.jsonl");
    let pair = uwfkit_core::pipeline::synth_pair(
        1,
        &uwfkit_core::pipeline::SynthParams {
            size: 256,
            ..Default::default()
        },
    );
    let mut cfg = uwfkit_core::pipeline::PipelineConfig::synthetic();
    cfg.working_resolution = 256;
    let base = uwfkit_core::pipeline::register_rasters(&pair.fixed, &pair.moving, &cfg, 1)
        .unwrap()
        .result;
    let mut rs = Vec::new();
    for (k, dice) in [0.49, 0.5, 0.9].into_iter().enumerate() {
        let mut r = record("p", k, None);
        r.registration = Some(uwfkit_core::RegistrationResult {
            dice,
            ..base.clone()
        });
        rs.push(r);
    }
    rs.push(record("q", 9, None));
    write_records(&m, &rs);
    let (acc, rej) = (dir.path().join("a.jsonl"), dir.path().join("r.jsonl"));
    let o = uwfkit(&[
        "gate",
        "--manifest",
        s(&m),
        "--dice-min",
        "0.5",
        "--out",
        s(&acc),
        "--rejected",
        s(&rej),
    ]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["total"], 4);
    assert_eq!(summary["accepted"], 2);
    assert_eq!(summary["rejected_dice"], 1);
    assert_eq!(summary["rejected_error"], 1);
    let acc = read_manifest(&acc).unwrap();
    assert!(acc.iter().all(|r| r.status == Status::Accepted));
    assert_eq!(read_manifest(&rej).unwrap().len(), 2);
}

#[test]
fn evaluate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let img = Raster::from_fn(200, 200, |x, y| ((x / 5 + y / 7) % 9) as f64 / 8.0);
    let p = dir.path().join("p.png");
    encode_image(&img, &p).unwrap();
    let out = dir.path().join("e.json");
    let o = uwfkit(&[
        "evaluate",
        "--pred",
        s(&p),
        "--target",
        s(&p),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: MetricReport = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!((rep.mae, rep.psnr, rep.gv), (0.0, f64::INFINITY, 0.0));
    assert!((rep.ssim - 1.0).abs() < 1e-12 && (rep.ms_ssim - 1.0).abs() < 1e-12);

    let m = dir.path().join("m.jsonl");
    let mut rs = Vec::new();
    for (k, (phase, mae)) in [
        (Phase::Early, 10.0),
        (Phase::Early, 20.0),
        (Phase::Late, 5.0),
    ]
    .into_iter()
    .enumerate()
    {
        let mut r = record("p", k, None);
        r.phase = phase;
        r.metrics = Some(MetricReport { mae, ..rep });
        rs.push(r);
    }
    write_records(&m, &rs);
    let txt = dir.path().join("r.txt");
    assert!(uwfkit(&["report", "--manifest", s(&m), "--out", s(&txt)])
        .status
        .success());
    let table = fs::read_to_string(&txt).unwrap();
    assert!(table.contains("15.00 (\u{b1}7.07)"), "{table}");
    assert!(table.contains("no reports: mid"), "{table}");
    let json = dir.path().join("r.json");
    assert!(uwfkit(&["report", "--manifest", s(&m), "--out", s(&json)])
        .status
        .success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["phases"][0]["phase"], "early");
    assert_eq!(v["phases"][0]["mae"]["mean"], 15.0);
    // Every PSNR is infinite, so the statistic is empty.
    assert!(v["phases"][0]["psnr"]["mean"].is_null());

    let empty = dir.path().join("empty.jsonl");
    write_records(&empty, &[record("p", 0, None)]);
    assert_eq!(
        uwfkit(&["report", "--manifest", s(&empty), "--out", s(&txt)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn synth_register_and_vesselmap() {
    let dir = tempfile::tempdir().unwrap();
    let o = uwfkit(&[
        "synth",
        "--seed",
        "3",
        "--count",
        "2",
        "--size",
        "256",
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "pair_0003_ri.png",
        "pair_0004_fa.png",
        "pair_0003_truth.json",
        "manifest.jsonl",
        "config.toml",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let out = dir.path().join("reg.json");
    let o = uwfkit(&[
        "--config",
        s(&dir.path().join("config.toml")),
        "register",
        "--ri",
        s(&dir.path().join("pair_0003_ri.png")),
        "--fa",
        s(&dir.path().join("pair_0003_fa.png")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["status"]["state"], "accepted");

    let vm = dir.path().join("v.png");
    let mask = dir.path().join("vmask.png");
    let o = uwfkit(&[
        "vesselmap",
        s(&dir.path().join("pair_0003_ri.png")),
        s(&vm),
        "--polarity",
        "bright",
        "--scales",
        "1,2,4",
        "--mask",
        s(&mask),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = decode_image(&vm).unwrap();
    assert_eq!(v.dims(), (256, 256));
    assert!(v.min_max().1 > 0.9);
    let m = decode_image(&mask).unwrap();
    assert!(m.data().iter().all(|&x| x == 0.0 || x == 1.0));
}

#[test]
fn batch_rejects_unreadable_pairs_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    assert!(uwfkit(&[
        "synth",
        "--count",
        "1",
        "--size",
        "256",
        "--out-dir",
        s(dir.path())
    ])
    .status
    .success());
    let m = dir.path().join("manifest.jsonl");
    let mut rs = read_manifest(&m).unwrap();
    rs.push(PairRecord::new(
        "broken",
        Eye::Left,
        "v1",
        "missing_ri.png",
        "pair_0000_fa.png",
    ));
    write_records(&m, &rs);
    let out = dir.path().join("out.jsonl");
    let o = uwfkit(&[
        "--config",
        s(&dir.path().join("config.toml")),
        "batch",
        "--manifest-in",
        s(&m),
        "--out",
        s(&out),
        "--workers",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let done = read_manifest(&out).unwrap();
    assert_eq!(done.len(), 2);
    assert!(matches!(
        &done[0].status,
        Status::Rejected {
            reason: uwfkit_core::pipeline::RejectReason::Error { .. }
        }
    ));
    assert_eq!(done[1].status, Status::Accepted);
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "dice_gate = 0.95\n").unwrap();
    let m = dir.path().join("m.jsonl");
    let pair = uwfkit_core::pipeline::synth_pair(
        2,
        &uwfkit_core::pipeline::SynthParams {
            size: 256,
            ..Default::default()
        },
    );
    let mut c = uwfkit_core::pipeline::PipelineConfig::synthetic();
    c.working_resolution = 256;
    let base = uwfkit_core::pipeline::register_rasters(&pair.fixed, &pair.moving, &c, 1)
        .unwrap()
        .result;
    let mut r = record("p", 0, None);
    r.registration = Some(uwfkit_core::RegistrationResult { dice: 0.9, ..base });
    write_records(&m, &[r]);
    let out = dir.path().join("o.jsonl");
    let o = Command::new(env!("CARGO_BIN_EXE_uwfkit"))
        .args(["gate", "--manifest", s(&m), "--out", s(&out)])
        .env("UWFKIT_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(read_manifest(&out).unwrap().is_empty());
    // A flag overrides the file.
    let o = Command::new(env!("CARGO_BIN_EXE_uwfkit"))
        .args([
            "gate",
            "--manifest",
            s(&m),
            "--out",
            s(&out),
            "--dice-min",
            "0.5",
        ])
        .env("UWFKIT_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read_manifest(&out).unwrap().len(), 1);
}
