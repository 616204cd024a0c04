use std::process::Command;

const BINARY_GAUSSIAN: &str = "kind=fixed_gaussian b=2 mean=0 sd=1";

fn brwld(args: &[&str], threads: Option<&str>) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_brwld"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("BRWLD_THREADS", t);
    }
    let out = cmd.output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn without_timing(json: &str) -> String {
    json.lines().filter(|l| !l.trim_start().starts_with("\"timing\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn reruns_are_byte_identical() {
    for cmd in [
        vec!["tail", "--law", BINARY_GAUSSIAN, "--theta", "1.5", "--n", "25", "--replicas", "3000", "--seed", "4"],
        vec!["ctheta", "--law", BINARY_GAUSSIAN, "--theta", "1.5", "--n", "20", "--replicas", "2000", "--seed", "4"],
        vec!["simulate", "--law", BINARY_GAUSSIAN, "--n", "6", "--seed", "4"],
        vec!["decoration", "--law", BINARY_GAUSSIAN, "--theta", "1.5", "--n", "15", "--target", "50", "--seed", "4"],
    ] {
        let (c1, a, _) = brwld(&cmd, Some("1"));
        let (c2, b, _) = brwld(&cmd, Some("2"));
        assert_eq!((c1, c2), (0, 0));
        assert!(a.contains("\"timing\""));
        assert_eq!(without_timing(&a), without_timing(&b), "{}", cmd[0]);
    }
}

#[test]
fn record_schema() {
    let (code, out, _) = brwld(&["tail", "--law", BINARY_GAUSSIAN, "--theta", "1.5", "--n", "10", "--replicas", "500"], None);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    for key in ["command", "config", "estimate", "diagnostics", "seed", "config_digest", "tool_version", "timing"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    for key in ["mean", "stderr", "replicas", "invalid_replicas", "bias_bound"] {
        assert!(v["estimate"].get(key).is_some(), "missing estimate.{key}");
    }
    assert_eq!(v["estimate"]["config_digest"], v["config_digest"]);
    assert!(v["timing"]["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn output_path_does_not_change_the_digest() {
    let dir = std::env::temp_dir().join(format!("brwld-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("gw.json");
    let args = ["gw", "--law", "kind=mixed_gaussian; offspring=0:3/5; offspring=2:2/5; mean=0; sd=1", "--n", "2"];
    let (_, stdout, _) = brwld(&args, None);
    let mut with_out: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap();
    with_out.extend(["--out", p]);
    let (code, printed, _) = brwld(&with_out, None);
    assert_eq!(code, 0);
    assert!(printed.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(without_timing(&stdout), without_timing(&written));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn decoration_csv_has_one_atom_per_line() {
    let (code, out, _) = brwld(
        &["decoration", "--law", BINARY_GAUSSIAN, "--theta", "1.5", "--n", "15", "--target", "20", "--format", "csv"],
        None,
    );
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("sample_id,location,multiplicity"));
    let zeros = lines.filter(|l| l.split(',').nth(1).map(|x| x.parse::<f64>().unwrap() == 0.0).unwrap_or(false)).count();
    assert_eq!(zeros, 20);
}

#[test]
fn validate_exit_status_follows_verdicts() {
    let (ok, out, err) = brwld(&["validate", "--only", "1"], None);
    assert_eq!(ok, 0, "{err}");
    assert!(err.contains("criterion  1 PASS"));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["diagnostics"]["all_passed"], true);

    let (bad, _, err) = brwld(&["validate", "--only", "1", "--psi-prime-offset", "1e-3"], None);
    assert_ne!(bad, 0);
    assert!(err.contains("criterion  1 FAIL"));
}

#[test]
fn bad_input_is_reported() {
    let (code, _, err) = brwld(&["tail", "--law", "kind=nope", "--n", "3"], None);
    assert_ne!(code, 0);
    assert!(err.contains("unknown kind"));
    let (code, _, _) = brwld(&["frobnicate"], None);
    assert_ne!(code, 0);
}
