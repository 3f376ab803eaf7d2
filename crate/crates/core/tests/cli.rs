use std::fs;
use std::process::Command;

use bitflip_core::vectors::verify_vector_file;

fn bitflip(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bitflip")).args(args).output().unwrap()
}

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn demo_prints_reference_transitions() {
    let out = bitflip(&["demo", "--reference-ciphertext"]);
    assert!(out.status.success());
    let s = stdout(&out);
    assert!(s.contains("0xc354 → 0xc3d4"), "{s}");
    assert!(s.contains("0xe2c2ce32 → 0xe242ce32"), "{s}");
    assert!(s.contains("accepted-mutated"), "{s}");

    let out = bitflip(&["demo", "--attack", "payload"]);
    let s = stdout(&out);
    assert!(s.contains("position=268") && s.contains("velocity=27"), "{s}");

    let s = stdout(&bitflip(&["demo", "--defense", "mac"]));
    assert!(!s.contains("accepted-mutated"), "{s}");
}

#[test]
fn experiment_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let out = bitflip(&[
            "experiment", "--seed", "5", "--trials", "200", "--synthetic", "2",
            "--defense", "none,shuffle,mac", "--threads", threads,
            "--output", path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(path).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "4");
    assert_eq!(a, b);
    assert!(a.starts_with("vehicle,strategy,flips,defense,trials,successes,rate\n"));
    assert_eq!(a.lines().count(), 1 + 2 * 4 * 3);
    let decay = fs::read_to_string(dir.path().join("a_decay_none.csv")).unwrap();
    assert!(decay.starts_with("flips,rate,reference_rate\n"));
    assert_eq!(decay.lines().count(), 5);
}

#[test]
fn sweep_and_markdown_formats() {
    let out = bitflip(&["sweep", "--seed", "1", "--trials", "100", "--format", "markdown"]);
    assert!(out.status.success());
    let s = stdout(&out);
    assert!(s.contains("checksum+acceleration"), "{s}");
    assert!(s.contains('|'), "{s}");
}

#[test]
fn vectors_are_written_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = bitflip(&["vectors", "--output", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut seen = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let text = fs::read_to_string(&path).unwrap();
        assert!(verify_vector_file(&name, &text).unwrap() > 0, "{name}");
        seen += 1;
    }
    assert_eq!(seen, 5);
}

#[test]
fn bad_usage_exits_nonzero() {
    for args in [
        &["experiment", "--flips", "3"][..],
        &["experiment", "--defense", "rot13"],
        &["demo", "--message", "1,2"],
        &["frobnicate"],
    ] {
        let out = bitflip(args);
        assert!(!out.status.success(), "{args:?}");
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = bitflip(&["experiment", "--input", "/nonexistent/trajectories.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bitflip:"));
}
