mod common;

use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use audit_agent::scenario::load_all;
use common::*;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_audit-agent"));
    c.current_dir(repo_root()).env_remove("AUDIT_AGENT_API_KEY");
    c
}

fn run(args: &[&str], reports: &Path) -> Output {
    bin()
        .args(args)
        .arg("--report-dir")
        .arg(reports)
        .stdin(Stdio::null())
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ask_prints_task_query_and_output() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "ask",
            "Did user account Patrick change password for the past 90 days",
            "--backend",
            "scripted",
            "--script",
            "scenarios/1b/script.json",
            "--date",
            "2024-12-01",
            "--out",
            "json",
        ],
        reports.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["task_query"], "Did user account Patrick change password for the past 90 days");
    assert!(json["output"].as_str().unwrap().contains("17/11/2024"));
    assert_eq!(json["status"], "Completed");
}

#[test]
fn ask_text_output() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(
        &["ask", "q", "--script", "scenarios/1b/script.json", "--date", "2024-12-01"],
        reports.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("--- step 1 ---"));
}

#[test]
fn http_backend_without_endpoint_is_a_config_error() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(&["ask", "q", "--backend", "http"], reports.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("endpoint"));
}

#[test]
fn http_backend_without_api_key_is_a_config_error() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(
        &["ask", "q", "--backend", "http", "--endpoint", "http://127.0.0.1:1/v1/chat/completions"],
        reports.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("AUDIT_AGENT_API_KEY"));
}

#[test]
fn scripted_backend_without_script_is_a_config_error() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(&["ask", "q"], reports.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("script"));
}

#[test]
fn looping_script_exits_one() {
    let reports = tempfile::tempdir().unwrap();
    let script = reports.path().join("loop.json");
    let reply = "Thought: again\nAction: WindowsTask\nAction Input: net accounts";
    let entries: Vec<_> = (0..10).map(|_| serde_json::json!({ "reply": reply })).collect();
    std::fs::write(&script, serde_json::to_string(&entries).unwrap()).unwrap();
    let o = run(&["ask", "audit the machine", "--script", script.to_str().unwrap()], reports.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("LoopDetected"));
}

#[test]
fn scenario_list_shows_prompts() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(&["scenario", "list"], reports.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 6);
    for spec in load_all(&scenarios_dir()).unwrap() {
        assert!(out.contains(&spec.prompt), "{}", spec.id);
    }
}

#[test]
fn scenario_run_reproduces_the_table() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(&["scenario", "run", "--mode", "scripted"], reports.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("Interpret Audit Task"));
    assert!(out.contains("6/6 Pass"));
    assert_eq!(out.matches("| Pass").count(), 6);
}

#[test]
fn scenario_run_with_sabotaged_script_exits_one() {
    let work = tempfile::tempdir().unwrap();
    let bundle = work.path().join("scenarios/1a");
    std::fs::create_dir_all(&bundle).unwrap();
    std::fs::copy(scenarios_dir().join("1a/spec.json"), bundle.join("spec.json")).unwrap();
    std::fs::write(
        bundle.join("script.json"),
        r#"[{"reply": "Action: WindowsTask\nAction Input: net user Penny"}, {"reply": "Final Answer: Penny is compliant."}]"#,
    )
    .unwrap();
    let scenarios = work.path().join("scenarios");
    let o = run(
        &["scenario", "run", "1a", "--scenarios", scenarios.to_str().unwrap()],
        work.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("Fail"));
}

#[test]
fn unknown_scenario_id_exits_two() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(&["scenario", "run", "7c"], reports.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_penny_is_non_compliant() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(&["check", "Penny", "--date", "2024-12-01"], reports.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("NON-COMPLIANT"));
}

#[test]
fn check_machine_after_policy_is_compliant() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(&["check", "machine", "--fixtures", "after", "--out", "json"], reports.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["overall"], "Compliant");
    assert_eq!(json["subject"], "machine");
}

#[test]
fn check_unknown_account_exits_two() {
    let reports = tempfile::tempdir().unwrap();
    let o = run(&["check", "Ghost"], reports.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fixture missing"));
}

#[test]
fn check_agrees_with_scenario_oracles() {
    let reports = tempfile::tempdir().unwrap();
    for spec in load_all(&scenarios_dir()).unwrap() {
        let state = spec
            .fixtures
            .net_accounts
            .trim_start_matches("net_accounts_")
            .trim_end_matches(".txt")
            .to_string();
        let policy = fixtures_dir().join(&spec.fixtures.policy);
        let date = spec.fixtures.clock_date.to_string();
        let o = run(
            &[
                "check",
                &spec.subject,
                "--fixtures",
                &state,
                "--policy",
                policy.to_str().unwrap(),
                "--date",
                &date,
            ],
            reports.path(),
        );
        let expected = match spec.expected_compliance {
            audit_agent::compliance::Compliance::Compliant => 0,
            audit_agent::compliance::Compliance::NonCompliant => 1,
        };
        assert_eq!(o.status.code(), Some(expected), "{}: {}", spec.id, stderr(&o));
    }
}

#[test]
fn config_file_supplies_defaults() {
    let reports = tempfile::tempdir().unwrap();
    let conf = reports.path().join("audit.conf");
    std::fs::write(&conf, "fixtures = after\nout = json\n").unwrap();
    let o = run(&["check", "machine", "--config", conf.to_str().unwrap()], reports.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).trim_start().starts_with('{'));
}

#[test]
fn bad_flags_exit_two() {
    let reports = tempfile::tempdir().unwrap();
    assert_eq!(run(&["check"], reports.path()).status.code(), Some(2));
    assert_eq!(run(&["check", "Penny", "--date", "yesterday"], reports.path()).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], reports.path()).status.code(), Some(2));
}

#[test]
fn never_waits_for_stdin() {
    let reports = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args(["ask", "q", "--script", "scenarios/1b/script.json", "--date", "2024-12-01", "--report-dir"])
        .arg(reports.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    // stdin stays open and empty; a read would block forever
    let _stdin = child.stdin.take().unwrap();
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait().unwrap() {
            assert!(status.success());
            break;
        }
        if start.elapsed() > Duration::from_secs(20) {
            child.kill().unwrap();
            panic!("process blocked with stdin open");
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    let mut sink = Vec::new();
    std::io::copy(&mut child.stdout.take().unwrap(), &mut sink).unwrap();
    assert!(String::from_utf8_lossy(&sink).contains("Final Answer"));
}
