//! End-to-end tests of the `s2i` binary: every subcommand against golden
//! fixtures, the exit-code contract, and batch determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn s2i() -> Command {
    Command::new(env!("CARGO_BIN_EXE_s2i"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawning s2i")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn encode_single_fixture_writes_payload_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(s2i()
        .arg("encode")
        .arg(fixture("valid_motion.skeleton"))
        .args(["--format", "ntu25", "-o"])
        .arg(dir.path()));
    assert!(out.status.success(), "{}", stderr_of(&out));

    let payload = dir.path().join("valid_motion.s2i");
    let sidecar = dir.path().join("valid_motion.s2i.json");
    assert!(payload.exists() && sidecar.exists());

    let bytes = fs::read(&payload).unwrap();
    assert_eq!(&bytes[..4], b"S2I1");
    assert_eq!(bytes.len(), 12 + 224 * 224 * 3 * 4);

    let inspect = run(s2i().arg("inspect").arg(&payload).arg(&sidecar));
    assert!(inspect.status.success(), "{}", stderr_of(&inspect));
}

#[test]
fn encode_batch_isolates_corrupt_file_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let corrupt = dir.path().join("corrupt.skeleton");
    fs::write(&corrupt, "not a skeleton\n").unwrap();

    let out_dir = dir.path().join("out");
    let out = run(s2i()
        .arg("encode")
        .arg(fixture("valid_motion.skeleton"))
        .arg(&corrupt)
        .arg(fixture("two_body.skeleton"))
        .args(["--format", "ntu25", "-o"])
        .arg(&out_dir));
    assert_eq!(out.status.code(), Some(1));
    assert!(out_dir.join("valid_motion.s2i").exists());
    assert!(out_dir.join("two_body.s2i").exists());
    assert!(!out_dir.join("corrupt.s2i").exists());
    assert!(stderr_of(&out).contains("corrupt.skeleton"));
}

#[test]
fn encode_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = run(s2i()
            .arg("encode")
            .arg(fixture("valid_motion.skeleton"))
            .arg(fixture("two_body.skeleton"))
            .arg(fixture("zero_first.skeleton"))
            .args(["--format", "ntu25", "--stream", "bone", "-o"])
            .arg(dir.path().join(sub)));
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    for name in ["valid_motion.s2i", "two_body.s2i", "zero_first.s2i"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn decode_round_trips_an_encoded_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(s2i()
        .arg("encode")
        .arg(fixture("valid_motion.skeleton"))
        .args(["--format", "ntu25", "--no-translate", "-o"])
        .arg(dir.path()));
    assert!(out.status.success(), "{}", stderr_of(&out));

    let decoded_path = dir.path().join("decoded.json");
    let out = run(s2i()
        .arg("decode")
        .arg(dir.path().join("valid_motion.s2i"))
        .arg("-o")
        .arg(&decoded_path));
    assert!(out.status.success(), "{}", stderr_of(&out));

    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&decoded_path).unwrap()).unwrap();
    let frames = doc["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 4);
    assert_eq!(frames[0].as_array().unwrap().len(), 25);
    // Corner grid point: frame 0, head (S2I column 0, joint id 3 in the
    // fixture generator: x = 0.1 * 3 + 0.05 * 0).
    let head = frames[0][3].as_array().unwrap();
    let x = head[0].as_f64().unwrap();
    assert!((x - 0.3).abs() < 1e-6, "head x {x}");
}

#[test]
fn inspect_rejects_tampered_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(s2i()
        .arg("encode")
        .arg(fixture("valid_motion.skeleton"))
        .args(["--format", "ntu25", "-o"])
        .arg(dir.path()));
    assert!(out.status.success(), "{}", stderr_of(&out));

    let sidecar = dir.path().join("valid_motion.s2i.json");
    // Duplicate the first entry of joint_order: no longer a permutation.
    let text = fs::read_to_string(&sidecar).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let first = doc["joint_order"][0].clone();
    let mut tampered = doc;
    tampered["joint_order"][1] = first;
    fs::write(&sidecar, serde_json::to_string_pretty(&tampered).unwrap()).unwrap();

    let out = run(s2i().arg("inspect").arg(&sidecar));
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("permutation"), "{}", stderr_of(&out));
}

#[test]
fn mask_defaults_match_contract() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mask.json");
    let out = run(s2i()
        .arg("mask")
        .args(["--strategy", "random", "--seed", "7", "-o"])
        .arg(&path));
    assert!(out.status.success(), "{}", stderr_of(&out));

    let mask = s2i_core::masking::mask_from_json(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(mask.grid.n_patches(), 196);
    assert_eq!(mask.ratio, 0.75);
    assert_eq!(mask.count(), 147);
}

#[test]
fn stats_over_two_image_corpus_reproduces_closed_form() {
    let dir = tempfile::tempdir().unwrap();

    // Two constant toyota13 sequences at 0 and 2: mean 1, std 1 per
    // channel. Zero-frame dropping and translation must be off so the
    // constants survive to the images.
    for (name, value) in [("lo", 0.0), ("hi", 2.0)] {
        let frames = vec![vec![[value; 3]; 13]; 2];
        let doc = serde_json::json!({
            "sample_id": name,
            "format_id": "toyota13",
            "frames": frames,
        });
        fs::write(dir.path().join(format!("{name}.json")), doc.to_string()).unwrap();
    }
    let manifest = "{\"manifest_id\":\"pair\"}\n\
        {\"sample_id\":\"lo\",\"path\":\"lo.json\",\"format_id\":\"toyota13\"}\n\
        {\"sample_id\":\"hi\",\"path\":\"hi.json\",\"format_id\":\"toyota13\"}\n";
    let manifest_path = dir.path().join("corpus.jsonl");
    fs::write(&manifest_path, manifest).unwrap();

    let stats_path = dir.path().join("stats.json");
    let out = run(s2i()
        .arg("stats")
        .args(["--manifest"])
        .arg(&manifest_path)
        .args(["--keep-zero-frames", "--no-translate", "-o"])
        .arg(&stats_path));
    assert!(out.status.success(), "{}", stderr_of(&out));

    let stats = s2i_core::stats::stats_from_json(&fs::read_to_string(&stats_path).unwrap()).unwrap();
    assert_eq!(stats.count, 2 * 224 * 224);
    for c in 0..3 {
        assert!((stats.mean[c] - 1.0).abs() < 1e-12);
        assert!((stats.std().unwrap()[c] - 1.0).abs() < 1e-12);
    }

    // The stats plug straight back into encode --normalize.
    let norm_dir = dir.path().join("normed");
    let out = run(s2i()
        .arg("encode")
        .arg(dir.path().join("hi.json"))
        .args(["--format", "toyota13", "--keep-zero-frames", "--no-translate"])
        .args(["--normalize"])
        .arg(&stats_path)
        .arg("-o")
        .arg(&norm_dir));
    assert!(out.status.success(), "{}", stderr_of(&out));
}

#[test]
fn schedule_prints_documented_endpoints() {
    let out = run(s2i().arg("schedule").args(["--t", "1000", "--rho", "1.0"]));
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_slice(&out.stdout).unwrap();
    let beta = doc["beta"].as_array().unwrap();
    assert_eq!(beta.len(), 1000);
    assert_eq!(beta[0].as_f64().unwrap(), 1e-4);
    assert_eq!(beta[999].as_f64().unwrap(), 0.02);
    let alpha_bar = doc["alpha_bar"].as_array().unwrap();
    assert!((alpha_bar[0].as_f64().unwrap() - 0.9999).abs() < 1e-12);
    assert!(alpha_bar[999].as_f64().unwrap() < 0.01);
}

#[test]
fn usage_errors_exit_two() {
    // Unknown format is a configuration error.
    let out = run(s2i()
        .arg("encode")
        .arg(fixture("valid_motion.skeleton"))
        .args(["--format", "nope99", "-o", "/tmp/unused-s2i-out"]));
    assert_eq!(out.status.code(), Some(2));

    // Bad flag value is a clap usage error.
    let out = run(s2i().arg("mask").args(["--strategy", "zigzag"]));
    assert_eq!(out.status.code(), Some(2));

    // Ratio outside [0, 1].
    let out = run(s2i().arg("mask").args(["--strategy", "random", "--ratio", "1.5"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn encode_accepts_custom_format_file() {
    let dir = tempfile::tempdir().unwrap();
    let format_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../formats/toyota13.json");

    let frames = vec![vec![[1.0, 2.0, 3.0]; 13]; 3];
    let doc = serde_json::json!({
        "sample_id": "custom",
        "format_id": "toyota13",
        "frames": frames,
    });
    let input = dir.path().join("custom.json");
    fs::write(&input, doc.to_string()).unwrap();

    let out = run(s2i()
        .arg("encode")
        .arg(&input)
        .arg("--format")
        .arg(&format_path)
        .arg("-o")
        .arg(dir.path().join("out")));
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(dir.path().join("out/custom.s2i").exists());
}
