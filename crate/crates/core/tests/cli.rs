//! CLI behavior: stage ordering, exit codes, the evaluation flow, and the
//! workspace audit, all through the real binary against the mock backend.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn cli(workspace: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roleforge"))
        .arg("--workspace")
        .arg(workspace)
        .arg("--mock")
        .args(args)
        .output()
        .expect("CLI spawn failed")
}

fn expect_ok(workspace: &Path, args: &[&str]) -> String {
    let out = cli(workspace, args);
    assert!(
        out.status.success(),
        "CLI {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn expect_code(workspace: &Path, args: &[&str], code: i32) -> String {
    let out = cli(workspace, args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "CLI {args:?} expected exit {code}:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ingest_fixture(workspace: &Path) {
    let profile_dir = fixtures_dir().join("beethoven");
    expect_ok(
        workspace,
        &[
            "ingest",
            "--role",
            "beethoven",
            "--profile-dir",
            profile_dir.to_str().unwrap(),
        ],
    );
}

fn small_bank(dir: &Path) -> PathBuf {
    let path = dir.join("bank.jsonl");
    let mut lines = String::new();
    for (i, (cat, text)) in [
        ("childhood", "Where did you grow up, and what was it like?"),
        ("career", "How did your working life begin?"),
        ("fears", "What do you fear more than death?"),
        ("era_events", "Which public event of your lifetime moved you most?"),
        ("legacy", "How do you wish to be remembered?"),
    ]
    .iter()
    .enumerate()
    {
        lines.push_str(&format!(
            "{{\"question_id\":\"q{i}\",\"kind\":\"common\",\"category\":\"{cat}\",\"text\":\"{text}\"}}\n"
        ));
    }
    std::fs::write(&path, lines).unwrap();
    path
}

#[test]
fn stage_ordering_errors_name_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingest_fixture(ws);
    let stderr = expect_code(ws, &["gen-thoughts", "--role", "beethoven"], 1);
    assert!(
        stderr.contains("gen-dialogues"),
        "dependency message missing: {stderr}"
    );
    let stderr = expect_code(ws, &["gen-dialogues", "--role", "beethoven"], 1);
    assert!(stderr.contains("gen-scenes"));
    let stderr = expect_code(
        ws,
        &["build-trainset", "--role", "beethoven", "--seed", "1"],
        1,
    );
    assert!(stderr.contains("gen-dialogues"));
}

#[test]
fn unknown_role_and_bad_ingest_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    expect_code(ws, &["gen-scenes", "--role", "nobody"], 1);
    expect_code(
        ws,
        &[
            "ingest",
            "--role",
            "bad/role",
            "--profile-dir",
            fixtures_dir().join("beethoven").to_str().unwrap(),
        ],
        1,
    );
    expect_code(
        ws,
        &[
            "ingest",
            "--role",
            "ok",
            "--profile-dir",
            "/nonexistent/profile/dir",
        ],
        1,
    );
}

#[test]
fn eval_report_without_verdicts_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingest_fixture(ws);
    let stderr = expect_code(ws, &["eval", "report", "--role", "beethoven"], 1);
    assert!(stderr.contains("eval judge"), "got: {stderr}");
}

#[test]
fn full_eval_flow_over_the_mock() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingest_fixture(ws);
    let bank = small_bank(dir.path());

    let stdout = expect_ok(
        ws,
        &[
            "eval",
            "run",
            "--role",
            "beethoven",
            "--agent",
            "mock",
            "--questions",
            bank.to_str().unwrap(),
        ],
    );
    assert!(stdout.contains("collected 5 transcripts"), "got: {stdout}");

    let stdout = expect_ok(
        ws,
        &["eval", "judge", "--role", "beethoven", "--judge", "mock"],
    );
    assert!(stdout.contains("judged 30 verdicts"), "got: {stdout}");

    let stdout = expect_ok(ws, &["eval", "report", "--role", "beethoven"]);
    assert!(stdout.contains("contextual"), "got: {stdout}");
    assert!(stdout.contains("6.00"), "got: {stdout}");

    let report_path = ws.join("beethoven/eval/report.json");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(report["per_metric"]["overall"]["mean"], 6.0);
    assert_eq!(report["per_metric"]["overall"]["count"], 5);
}

#[test]
fn multi_turn_eval_collects_five_round_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingest_fixture(ws);
    let bank = small_bank(dir.path());
    let stdout = expect_ok(
        ws,
        &[
            "eval",
            "run",
            "--role",
            "beethoven",
            "--agent",
            "mock",
            "--mode",
            "multi",
            "--questions",
            bank.to_str().unwrap(),
        ],
    );
    assert!(stdout.contains("collected 5 transcripts"));
    let raw = std::fs::read_to_string(ws.join("beethoven/eval/transcripts.jsonl")).unwrap();
    for line in raw.lines() {
        let t: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(t["mode"], "multi_turn");
        assert_eq!(t["rounds"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn metric_subset_and_custom_rubric_flow() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingest_fixture(ws);
    let bank = small_bank(dir.path());
    expect_ok(
        ws,
        &[
            "eval",
            "run",
            "--role",
            "beethoven",
            "--agent",
            "mock",
            "--questions",
            bank.to_str().unwrap(),
        ],
    );

    // A custom rubric whose preamble matches the mock judge rule scores too.
    let rubric = dir.path().join("memorization.txt");
    std::fs::write(
        &rubric,
        "You will be given responses written by an AI assistant mimicing the character \
{agent_name}. Recall check.\nProfile: {agent_context}\nInteractions: {interactions}\n\
Score the AI on a scale of 1 to 7.\nyou need to give evidence first, then the score in a new line.",
    )
    .unwrap();

    let stdout = expect_ok(
        ws,
        &[
            "eval",
            "judge",
            "--role",
            "beethoven",
            "--judge",
            "mock",
            "--metrics",
            "adaptability,overall",
            "--rubric",
            rubric.to_str().unwrap(),
        ],
    );
    // 5 transcripts x (2 built-in + 1 custom metric).
    assert!(stdout.contains("judged 15 verdicts"), "got: {stdout}");

    let stdout = expect_ok(ws, &["eval", "report", "--role", "beethoven"]);
    assert!(stdout.contains("memorization"), "got: {stdout}");
    assert!(!stdout.contains("contextual"), "got: {stdout}");

    // An unknown built-in name is rejected up front.
    let stderr = expect_code(
        ws,
        &[
            "eval",
            "judge",
            "--role",
            "beethoven",
            "--judge",
            "mock",
            "--metrics",
            "charisma",
        ],
        1,
    );
    assert!(stderr.contains("unknown metric"), "got: {stderr}");
}

#[test]
fn audit_exits_zero_on_clean_workspace_and_one_after_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingest_fixture(ws);
    expect_ok(ws, &["gen-scenes", "--role", "beethoven"]);
    expect_ok(ws, &["gen-dialogues", "--role", "beethoven"]);
    expect_ok(ws, &["gen-thoughts", "--role", "beethoven"]);
    let stdout = expect_ok(ws, &["audit", "--role", "beethoven"]);
    assert!(stdout.contains("ok   pairs"), "got: {stdout}");

    // Break an invariant on disk: make a scene background carry a dialogue
    // marker.
    let scenes_path = ws.join("beethoven/scenes/scenes.jsonl");
    let tampered = std::fs::read_to_string(&scenes_path)
        .unwrap()
        .replacen("the morning at work", "the morning (speaking): chatter", 1);
    std::fs::write(&scenes_path, tampered).unwrap();
    let stderr = expect_code(ws, &["audit", "--role", "beethoven"], 1);
    assert!(stderr.contains("invariant"), "got: {stderr}");
}

#[test]
fn authentic_dialogue_flow_through_real_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    // Assemble a profile source with an authentic dialogue script.
    let src = dir.path().join("profile-src");
    std::fs::create_dir_all(src.join("dialogues")).unwrap();
    for file in ["profile.md", "profile.json", "summary.txt"] {
        std::fs::copy(fixtures_dir().join("beethoven").join(file), src.join(file)).unwrap();
    }
    std::fs::copy(
        fixtures_dir().join("authentic_dialogue.txt"),
        src.join("dialogues/salon_meeting.txt"),
    )
    .unwrap();

    let stdout = expect_ok(
        ws,
        &[
            "ingest",
            "--role",
            "beethoven",
            "--profile-dir",
            src.to_str().unwrap(),
        ],
    );
    assert!(stdout.contains("1 authentic dialogues"), "got: {stdout}");

    expect_ok(ws, &["gen-scenes", "--role", "beethoven"]);
    expect_ok(ws, &["gen-dialogues", "--role", "beethoven"]);

    // Trainset fails while the authentic dialogue still lacks a scene.
    expect_ok(ws, &["gen-thoughts", "--role", "beethoven"]);
    let stderr = expect_code(
        ws,
        &["build-trainset", "--role", "beethoven", "--seed", "7"],
        1,
    );
    assert!(stderr.contains("gen-real-scenes"), "got: {stderr}");

    expect_ok(ws, &["gen-real-scenes", "--role", "beethoven"]);
    expect_ok(ws, &["gen-thoughts", "--role", "beethoven"]);
    expect_ok(
        ws,
        &["build-trainset", "--role", "beethoven", "--seed", "7"],
    );
    expect_ok(ws, &["audit", "--role", "beethoven"]);

    // The authentic dialogue contributed pairs to the train file.
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ws.join("beethoven/trainset/manifest.json")).unwrap(),
    )
    .unwrap();
    // 24 mimic pairs + 2 authentic pairs.
    assert_eq!(manifest["record_counts"]["dialogue"], 26);
}

#[test]
fn rerunning_build_trainset_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingest_fixture(ws);
    expect_ok(ws, &["gen-scenes", "--role", "beethoven"]);
    expect_ok(ws, &["gen-dialogues", "--role", "beethoven"]);
    expect_ok(ws, &["gen-thoughts", "--role", "beethoven"]);
    expect_ok(
        ws,
        &["build-trainset", "--role", "beethoven", "--seed", "7"],
    );
    let train = ws.join("beethoven/trainset/train.jsonl");
    let manifest = ws.join("beethoven/trainset/manifest.json");
    let train_before = std::fs::read(&train).unwrap();
    let manifest_before = std::fs::read(&manifest).unwrap();
    expect_ok(
        ws,
        &["build-trainset", "--role", "beethoven", "--seed", "7"],
    );
    assert_eq!(std::fs::read(&train).unwrap(), train_before);
    assert_eq!(std::fs::read(&manifest).unwrap(), manifest_before);
}

#[test]
fn probes_respect_cap_flag() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingest_fixture(ws);
    expect_ok(ws, &["gen-scenes", "--role", "beethoven"]);
    expect_ok(ws, &["gen-dialogues", "--role", "beethoven"]);
    expect_ok(ws, &["gen-thoughts", "--role", "beethoven"]);
    let stdout = expect_ok(
        ws,
        &[
            "gen-probes",
            "--role",
            "beethoven",
            "--topics",
            fixtures_dir().join("topics.tsv").to_str().unwrap(),
        ],
    );
    assert!(stdout.contains("generated 20 probes"), "got: {stdout}");
    assert!(stdout.contains("1 flagged direct"), "got: {stdout}");

    expect_ok(
        ws,
        &[
            "build-trainset",
            "--role",
            "beethoven",
            "--seed",
            "7",
            "--probe-cap",
            "0.2",
        ],
    );
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ws.join("beethoven/trainset/manifest.json")).unwrap(),
    )
    .unwrap();
    // 24 dialogue records at cap 0.2 admit floor(24*0.2/0.8) = 6 probes.
    assert_eq!(manifest["record_counts"]["probe"], 6);
    assert_eq!(manifest["record_counts"]["dialogue"], 24);
}

#[test]
fn manifest_override_flags_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    ingest_fixture(ws);
    expect_ok(ws, &["gen-scenes", "--role", "beethoven"]);
    expect_ok(ws, &["gen-dialogues", "--role", "beethoven"]);
    expect_ok(ws, &["gen-thoughts", "--role", "beethoven"]);
    expect_ok(
        ws,
        &[
            "build-trainset",
            "--role",
            "beethoven",
            "--seed",
            "7",
            "--epochs",
            "1",
        ],
    );
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(ws.join("beethoven/trainset/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["epochs"], 1);
    assert_eq!(manifest["overridden"][0], "epochs");
}
