//! End-to-end checks of the binary: exit codes, report plumbing and the
//! determinism contract.

use std::path::PathBuf;
use std::process::Command;

fn expweb() -> Command {
    Command::new(env!("CARGO_BIN_EXE_expweb"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("expweb-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn verify_passes_for_cosx() {
    let out = expweb()
        .args(["verify", "--family", "cosx", "--samples", "1500"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["nu_prime"].as_f64().unwrap() > 0.0);
}

#[test]
fn web_gate_rejects_low_order_with_exit_one() {
    for family in ["exp", "cosine"] {
        let out = expweb().args(["web", "--family", family]).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "family {family}");
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let gate = report["gate"].as_str().unwrap();
        assert!(gate.contains("not a spider's web"), "{gate}");
    }
}

#[test]
fn config_errors_exit_two() {
    // malformed coefficient
    let out = expweb()
        .args(["verify", "--coeffs", "1,0;0,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("entry 1"));
    // no family at all
    let out = expweb().args(["verify"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    // malformed config file with a line/column diagnostic
    let cfg = tmp("broken.json");
    std::fs::write(&cfg, "{\"family\": \"cosx\", \"seed\": \"x\"}").unwrap();
    let out = expweb()
        .args(["verify", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("column"), "{err}");
}

#[test]
fn render_smoke_is_fast_and_deterministic() {
    let base = tmp("smoke");
    let t0 = std::time::Instant::now();
    let out = expweb()
        .args([
            "render",
            "--family",
            "cosx",
            "--res",
            "16x16",
            "--out",
            base.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        t0.elapsed().as_secs_f64() < 1.0,
        "smoke render took {:?}",
        t0.elapsed()
    );
    let ppm1 = std::fs::read(base.with_extension("ppm")).unwrap();
    let json1 = std::fs::read(base.with_extension("json")).unwrap();
    assert!(ppm1.starts_with(b"P6\n16 16\n255\n"));
    // sidecar histogram sums to the pixel count
    let sidecar: serde_json::Value = serde_json::from_slice(&json1).unwrap();
    let total: u64 = sidecar["histogram"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(total, 256);
    // identical invocation, byte-identical outputs
    expweb()
        .args([
            "render",
            "--family",
            "cosx",
            "--res",
            "16x16",
            "--out",
            base.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(ppm1, std::fs::read(base.with_extension("ppm")).unwrap());
    assert_eq!(json1, std::fs::read(base.with_extension("json")).unwrap());
}

#[test]
fn web_depth_zero_trivially_passes() {
    let out = expweb()
        .args(["web", "--family", "cosx", "--depth", "0"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["inclusion"][0]["pass"], true);
}

#[test]
fn area_seed_changes_data_not_verdict() {
    let run = |seed: &str| {
        let out = expweb()
            .args([
                "area",
                "--family",
                "cosx",
                "--nu",
                "12",
                "--samples",
                "20000",
                "--seed",
                seed,
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let a = run("1");
    let b = run("2");
    assert_eq!(a["pass"], b["pass"]);
    assert_ne!(
        a["survival"]["survivors"], b["survival"]["survivors"],
        "different seeds should produce different sample data"
    );
}

#[test]
fn flags_override_config_file() {
    let cfg = tmp("override.json");
    std::fs::write(&cfg, "{\"family\": \"cosx\", \"seed\": 3, \"res\": [8, 8]}").unwrap();
    let base = tmp("override-render");
    let out = expweb()
        .args([
            "render",
            "--config",
            cfg.to_str().unwrap(),
            "--res",
            "4x4",
            "--out",
            base.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let ppm = std::fs::read(base.with_extension("ppm")).unwrap();
    assert!(
        ppm.starts_with(b"P6\n4 4\n255\n"),
        "flag must win over config res"
    );
}
