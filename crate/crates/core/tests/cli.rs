use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coop-relay"));
    cmd.env_remove("COOP_RELAY_SEED")
        .env_remove("COOP_RELAY_CONFIG_PATH");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn last_stderr_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(err.lines().last().expect("stderr line")).expect("JSON error line")
}

fn sample_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/flow_separation.json")
}

#[test]
fn classify_one_state_as_json() {
    let o = run(&["classify", "--state", "6"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["index"], 6);
    assert_eq!(v["label"], "A∩B");
    assert_eq!(v["bits"]["H_R1S2"], true);
    assert_eq!(v["bits"]["X_S2"], false);
}

#[test]
fn out_of_range_state_is_a_usage_error() {
    let o = run(&["classify", "--state", "300"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(last_stderr_json(&o)["error"], "usage");
}

#[test]
fn unknown_flags_are_rejected() {
    let o = run(&["verify", "--fast"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["eval", "--policy", "cons9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classify_all_emits_every_state() {
    let o = run(&["classify", "--all"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 257);
    assert_eq!(
        lines[0],
        "index,H_R1D2,H_R1D1,H_R1S2,H_S2D1,H_S2D2,H_S1S2,H_S1D2,X_S2,label"
    );
    assert_eq!(lines[146], "145,1,0,0,0,1,0,0,1,C");
}

#[test]
fn synth_prints_table_and_expressions() {
    let o = run(&["synth", "--knowledge", "hops:2", "--view", "cons"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(
        text.lines()
            .filter(|l| l.ends_with(",Tx") || l.ends_with(",Rx") || l.ends_with(",Z"))
            .count(),
        128
    );
    assert!(
        text.contains("# Rx = H_R1S2·¬H_S1S2 + H_R1D2·H_S2D2·¬H_S1D2"),
        "{text}"
    );
    let custom = run(&["synth", "--knowledge", "custom:H_R1D1", "--view", "greed"]);
    assert!(stdout(&custom).contains("# Rx = ¬H_R1D1"));
}

#[test]
fn eval_exact_point() {
    let o = run(&[
        "eval",
        "--policy",
        "greed0",
        "--scenario",
        "flow-sep",
        "--p",
        "1/2",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines,
        [
            "policy,event,p,exact_value",
            "greed0,A,1/2,3/8",
            "greed0,B,1/2,1/8",
            "greed0,C,1/2,1/16"
        ]
    );
}

#[test]
fn eval_emits_polynomials() {
    let o = run(&["eval", "--policy", "fnsi", "--emit-poly"]);
    assert!(stdout(&o).contains("fnsi,A,(5p^2-5p+6)/16"));
}

#[test]
fn eval_sweep_is_exact_and_monte_carlo_is_reproducible() {
    let args = [
        "eval",
        "--policy",
        "all",
        "--sweep",
        "0:1:1/10",
        "--mc-samples",
        "20000",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 1 + 7 * 11 * 3);
    assert!(text
        .lines()
        .next()
        .unwrap()
        .ends_with(",mc_estimate,mc_stderr"));
    assert!(text.contains("\ncons1,A,1/10,243/800,"));

    let env = bin()
        .args([
            "eval",
            "--policy",
            "all",
            "--sweep",
            "0:1:1/10",
            "--mc-samples",
            "20000",
        ])
        .env("COOP_RELAY_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(env.stdout, a.stdout);
}

#[test]
fn custom_policy_needs_knowledge_and_view() {
    let o = run(&["eval", "--policy", "custom"]);
    assert_eq!(o.status.code(), Some(2));
    let ok = run(&[
        "eval",
        "--policy",
        "custom",
        "--knowledge",
        "hops:0",
        "--view",
        "greed",
        "--p",
        "1/2",
    ]);
    assert!(stdout(&ok).contains("custom,A,1/2,3/8"));
}

#[test]
fn verify_reports_each_check() {
    let o = run(&["verify"]);
    let text = stdout(&o);
    assert!(
        text.contains("labels       PASS  256/256 match, 48 harmful states"),
        "{text}"
    );
    assert!(text.contains("expressions  PASS  7/7"), "{text}");
    let table_ok = text.contains("event table  PASS");
    assert_eq!(o.status.success(), table_ok);
    if !table_ok {
        assert_eq!(o.status.code(), Some(1));
        assert_eq!(last_stderr_json(&o)["error"], "runtime");
        assert!(text.contains("18/21 cells match"), "{text}");
    }
}

#[test]
fn simulate_is_deterministic_and_uses_the_config_search_path() {
    let args = [
        "simulate",
        "--config",
        "flow_separation.json",
        "--duration-s",
        "1",
        "--seed",
        "4",
    ];
    let dir = sample_config().parent().unwrap().to_path_buf();
    let a = bin()
        .args(args)
        .env("COOP_RELAY_CONFIG_PATH", &dir)
        .output()
        .unwrap();
    let b = bin()
        .args(args)
        .env("COOP_RELAY_CONFIG_PATH", &dir)
        .output()
        .unwrap();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with(
        "protocol,separation_m,flow_id,thpt_bps,delta_bps,collisions,deferrals,relay_tx_count"
    ));
    assert!(lines[1].starts_with("cons2,300.0,1,"));

    let missing = run(&["simulate", "--config", "flow_separation.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"topology": {"kind": "flow_separation", "separation_m": 100}, "protocl": "x"}"#,
    )
    .unwrap();
    let o = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(last_stderr_json(&o)["error"], "usage");
}

#[test]
fn small_sweep() {
    let cfg = sample_config();
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--separations",
        "100,400",
        "--protocols",
        "cons2,greed0",
        "--seeds",
        "1",
        "--duration-s",
        "0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    // header + 2 separations × (baseline + 2 protocols) × 2 flows
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 2);
    assert!(text
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("norelay,"))
        .all(|l| l.split(',').nth(4) == Some("0.0")));
}

#[test]
fn help_documents_defaults() {
    let text = stdout(&run(&["sweep", "--help"]));
    assert!(text.contains("[default: 50:1000:50]"));
    assert!(text.contains("[default: cons0,cons2,greed2,greed0]"));
    assert!(text.contains("[default: 3]"));
    let text = stdout(&run(&["synth", "--help"]));
    assert!(text.contains("[default: full]") && text.contains("[default: cons]"));
}
