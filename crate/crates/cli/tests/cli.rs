use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qamp")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = qamp(args);
    assert!(
        out.status.success(),
        "qamp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn summary(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &[&str] = &["--n-half", "4", "--t-max", "4", "--samples", "81"];

fn with<'a>(cmd: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd, "--out", out];
    v.extend_from_slice(SMALL);
    v.extend_from_slice(extra);
    v
}

#[test]
fn trace_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    run_ok(&with("trace", out, &["--delta", "1"]));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t[hbar/J],E,p_s,p_x,p_y,p_z");
    assert_eq!(lines.count(), 81);
    assert!(!csv.contains('\r'));
    let s = summary(&dir.path().join("trace.json"));
    for key in ["experiment", "version", "seed", "wall_time_s", "parameters", "results", "provenance"] {
        assert!(s.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(s["experiment"], "trace");
    assert_eq!(s["parameters"]["delta"], 1.0);
    assert!(s["results"]["max_bell_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn golden_headers() {
    let cases: &[(&str, &[&str], &[(&str, &str)])] = &[
        (
            "gap",
            &[],
            &[("gap.csv", "module,n_sites,e0[J],e1[J],gap[J],ground_sector,gap_sector,sector_gap[J]")],
        ),
        ("static", &[], &[("static.csv", "module,n_sites,E,C,p_s,p_x,p_y,p_z")]),
        ("peak", &[], &[("peak.csv", "t_opt[hbar/J],e_max,index,refined,window_truncated")]),
        (
            "spectral",
            &[],
            &[
                ("spectral.csv", "n,excitation[J],weight"),
                ("spectral_trace.csv", "t[hbar/J],E_krylov,E_spectral"),
            ],
        ),
        ("perturbative", &[], &[("perturbative.csv", "t[hbar/J],p_singlet,E_pred,E_sim")]),
        (
            "optimize",
            &["--j-prime-grid", "0.4,0.5,0.1", "--j-i-grid", "0.5,0.6,0.1"],
            &[("optimize.csv", "j_prime[J],j_i[J],e_max,t_opt[hbar/J],window_truncated,error")],
        ),
        (
            "amplify",
            &["--j-prime-grid", "0.4,0.5,0.1", "--j-i-grid", "0.5,0.6,0.1"],
            &[
                ("amplify.csv", "j_prime[J],e_static,e_max,best_j_i[J],t_opt[hbar/J]"),
                ("amplify_fixed.csv", "j_prime[J],j_i[J],e_max,t_opt[hbar/J]"),
            ],
        ),
        ("thermal", &["--temperatures", "0.01,1,100"], &[("thermal.csv", "T[J],e_max,t_peak[hbar/J]")]),
        (
            "disorder",
            &["--realizations", "3"],
            &[("disorder.csv", "realization,e_max,t_peak[hbar/J],e_at_clean_t_opt")],
        ),
    ];
    for (cmd, extra, files) in cases {
        let dir = tempfile::tempdir().unwrap();
        run_ok(&with(cmd, dir.path().to_str().unwrap(), extra));
        for (file, want) in *files {
            assert_eq!(header(&dir.path().join(file)), *want, "{cmd}: {file}");
        }
        assert_eq!(summary(&dir.path().join(format!("{cmd}.json")))["experiment"], *cmd);
    }
}

#[test]
fn disorder_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let extra = ["--realizations", "4", "--lambda", "0.2"];
    run_ok(&[with("disorder", a.path().to_str().unwrap(), &extra), vec!["--seed", "11"]].concat());
    run_ok(&[with("disorder", b.path().to_str().unwrap(), &extra), vec!["--seed", "11"]].concat());
    run_ok(&[with("disorder", c.path().to_str().unwrap(), &extra), vec!["--seed", "12"]].concat());
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("disorder.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn summary_replays_as_config() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    run_ok(&with("trace", first.path().to_str().unwrap(), &["--j-prime", "0.35", "--delta", "1"]));
    let cfg = first.path().join("trace.json");
    run_ok(&["trace", "--config", cfg.to_str().unwrap(), "--out", second.path().to_str().unwrap()]);
    let read = |d: &Path| fs::read(d.join("trace.csv")).unwrap();
    assert_eq!(read(first.path()), read(second.path()));
    let a = summary(&cfg);
    let b = summary(&second.path().join("trace.json"));
    let mut pa = a["parameters"].clone();
    pa["out"] = b["parameters"]["out"].clone();
    assert_eq!(pa, b["parameters"]);
}

#[test]
fn toml_sections_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "n_left = 4\nn_right = 4\nt_max = 2.0\nsamples = 21\nj_prime = 0.3\n\n[trace]\nj_prime = 0.45\ndelta = 1.0\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    run_ok(&["trace", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let s = summary(&out.join("trace.json"));
    assert_eq!(s["parameters"]["j_prime"], 0.45);
    assert_eq!(s["parameters"]["delta"], 1.0);
    run_ok(&["trace", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--j-prime", "0.6"]);
    assert_eq!(summary(&out.join("trace.json"))["parameters"]["j_prime"], 0.6);
}

#[test]
fn exit_codes() {
    assert_eq!(qamp(&["transmogrify"]).status.code(), Some(2));
    assert_eq!(qamp(&["trace", "--no-such-flag"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "jprime = 0.3\n").unwrap();
    assert_eq!(qamp(&["trace", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let out = dir.path().to_str().unwrap();
    // thermal runs are capped at 14 sites
    let r = qamp(&["thermal", "--n-half", "8", "--out", out]);
    assert_eq!(r.status.code(), Some(1));
    let err = String::from_utf8_lossy(&r.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "one-line diagnostic, got {err:?}");
    assert_eq!(qamp(&["trace", "--n-half", "5", "--out", out]).status.code(), Some(1));
}
