use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn turbo_ep(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_turbo-ep"));
    cmd.args(args).env_remove("TURBO_EP_OUT");
    if let Some(dir) = out_env {
        cmd.env("TURBO_EP_OUT", dir);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_BER: &str = r#"
name = "small"
seed = 3

[ber]
equalizers = ["lmmse-block", "nubep"]
min_frames = 4
min_errors = 1000

[[ber.scenario]]
constellation = "bpsk"
channel = "chan3"
code_length = 256
turbo_iterations = 2
eb_n0 = [2.0, 4.0]
"#;

#[test]
fn validate_passes_and_filters() {
    let o = turbo_ep(&["validate", "--instances", "10"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for s in ["woodbury", "window-cavity", "bcjr", "first-pass"] {
        assert!(text.contains(s), "{text}");
    }
    let o = turbo_ep(
        &["validate", "--instances", "10", "--filter", "woodbury"],
        None,
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.starts_with("woodbury"));
}

#[test]
fn corrupted_tap_fails_validation() {
    let o = turbo_ep(
        &[
            "validate",
            "--filter",
            "woodbury",
            "--instances",
            "10",
            "--corrupt-tap-sign",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("woodbury"));
}

#[test]
fn usage_errors_exit_two() {
    let o = turbo_ep(&["ber", "--config", "/nonexistent/run.toml"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = turbo_ep(
        &["exit", "--preset", "fig2", "--equalizer", "zero-forcing"],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    let o = turbo_ep(&["ber", "--preset", "fig42"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = turbo_ep(&["validate", "--filter", "nothing"], None);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, SMALL_BER.replace("\"nubep\"", "\"turbo-magic\"")).unwrap();
    let o = turbo_ep(&["ber", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    fs::write(&cfg, SMALL_BER.replace("seed = 3", "seed = 3\nspeed = 9")).unwrap();
    let o = turbo_ep(&["ber", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ber_run_writes_csvs_and_sidecars_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL_BER).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = turbo_ep(
            &[
                "ber",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            None,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for eq in ["lmmse-block", "nubep"] {
        let name = format!("small_{eq}.csv");
        let csv = fs::read_to_string(a.join(&name)).unwrap();
        assert_eq!(csv, fs::read_to_string(b.join(&name)).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "eb_n0_db,turbo_iter,frames,bit_errors,ber");
        assert_eq!(lines.len(), 1 + 2 * 2);
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(a.join(format!("small_{eq}.json"))).unwrap())
                .unwrap();
        assert_eq!(side["seed"], 3);
        assert_eq!(side["config"]["name"], "small");
        assert!(side["build"]
            .as_str()
            .unwrap()
            .contains(env!("CARGO_PKG_VERSION")));
    }
}

#[test]
fn point_override_and_env_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL_BER).unwrap();
    let out = dir.path().join("from-env");
    let o = turbo_ep(
        &[
            "ber",
            "--config",
            cfg.to_str().unwrap(),
            "--eb-n0",
            "6",
            "--equalizer",
            "ep-f",
            "--seed",
            "11",
        ],
        Some(&out),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("small_ep-f.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("6.0000000000000000e0,1,"));
    assert!(!out.join("small_nubep.csv").exists());
}

#[test]
fn fig3d_preset_emits_five_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let o = turbo_ep(
        &[
            "ber",
            "--preset",
            "fig3d",
            "--eb-n0",
            "30",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csvs: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .collect();
    assert_eq!(csvs.len(), 5);
    for e in csvs {
        let text = fs::read_to_string(e.path()).unwrap();
        // noiseless point: 200 frames, no errors at any turbo iteration
        assert!(
            text.lines()
                .skip(1)
                .all(|l| l.ends_with(",200,0,0.0000000000000000e0")),
            "{text}"
        );
    }
}

#[test]
fn exit_run_writes_one_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exit.toml");
    fs::write(
        &cfg,
        r#"
name = "mini"
[exit]
equalizers = ["lmmse-block", "nubep"]
channel = "proakis-c"
eb_n0 = [9.0]
i_in = [0.0, 0.5, 0.9]
symbols = 3000
decoder_code_length = 256
decoder_frames = 2
"#,
    )
    .unwrap();
    let o = turbo_ep(
        &[
            "exit",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("mini_exit.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "i_in,i_out,eb_n0_db,equalizer");
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert_eq!(lines.iter().filter(|l| l.ends_with(",ldpc")).count(), 3);
    assert!(dir.path().join("mini_exit.json").exists());
}
