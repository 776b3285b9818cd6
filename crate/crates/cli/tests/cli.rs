use std::path::Path;
use std::process::{Command, Output};

use stepstone::client::{FixtureSet, ScriptedFixture};
use stepstone::exec::FakeTableEntry;
use stepstone::model::{read_problems, ExecStatus};

const GOLD: &str = "def f(x):\n    return x * 3";
const WRONG: &str = "def f(x):\n    return x";

fn stepstone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stepstone"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn passk_prints_the_estimate() {
    let o = stepstone(&["passk", "--n", "8", "--c", "7", "--k", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0.875");
}

#[test]
fn passk_domain_error_exits_one() {
    let o = stepstone(&["passk", "--n", "8", "--c", "9", "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn schedule_preview_prints_the_row() {
    let o = stepstone(&["schedule", "preview", "--name", "soft", "--step", "0"]);
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(0), "easy=0.80 medium=0.15 hard=0.05"));
    let o = stepstone(&["schedule", "preview", "--name", "soft", "--step", "12000"]);
    assert_eq!(stdout(&o), "easy=0.15 medium=0.80 hard=0.05");
    assert_eq!(stepstone(&["schedule", "preview", "--name", "soft", "--step", "40000"]).status.code(), Some(1));
    assert_eq!(stepstone(&["schedule", "preview", "--name", "nope", "--step", "0"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    let o = stepstone(&["gen", "--seeds", "x.py", "--out", "o", "--backend", "scripted:f.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stepstone(&["passk", "--n", "8"]).status.code(), Some(2));
    assert_eq!(stepstone(&["frobnicate"]).status.code(), Some(2));
}

/// Teacher fixture for `turns` turns of the tripling task, each with
/// `correct` of `m` students right; table rows for the gold code.
fn write_fixtures(dir: &Path, turns: usize, m: usize, correct: usize) {
    let inputs = ["1", "2", "3", "4", "5"];
    let mut teacher_text = format!("```python\n{GOLD}\n```\n\n");
    for i in inputs {
        teacher_text += &format!("```input\n{i}\n```\n\n");
    }
    teacher_text += "```message\nTriple it.\n```\n";
    let student: Vec<String> = (0..turns * m)
        .map(|i| format!("```python\n{}\n```\n", if i % m < correct { GOLD } else { WRONG }))
        .collect();
    let set = FixtureSet {
        teacher: ScriptedFixture::any(vec![teacher_text; turns]),
        student: ScriptedFixture::any(student),
    };
    std::fs::write(dir.join("fixture.json"), serde_json::to_string(&set).unwrap()).unwrap();

    let mut rows = Vec::new();
    for (code, mul) in [(GOLD, 3), (WRONG, 1)] {
        for i in inputs {
            let x: i64 = i.parse().unwrap();
            rows.push(
                serde_json::to_string(&FakeTableEntry {
                    code: code.into(),
                    entry: "f".into(),
                    args_literal: i.into(),
                    status: ExecStatus::Ok,
                    output: Some((x * mul).to_string()),
                    error_text: None,
                })
                .unwrap(),
            );
        }
    }
    std::fs::write(dir.join("table.jsonl"), rows.join("\n")).unwrap();
    let corpus: String = (0..60).map(|i| format!("row_{i} = {i} * 3\n")).collect();
    std::fs::write(dir.join("corpus.py"), corpus).unwrap();
}

fn gen(dir: &Path, out: &str, turns: &str) -> Output {
    let (fixture, table, corpus, out) = (
        format!("scripted:{}", p(&dir.join("fixture.json"))),
        format!("fake:{}", p(&dir.join("table.jsonl"))),
        dir.join("corpus.py"),
        dir.join(out),
    );
    stepstone(&[
        "gen", "--env", "induction", "--seeds", p(&corpus), "--out", p(&out), "--turns", turns, "--attempts", "4",
        "--backend", &fixture, "--executor", &table, "--rng-seed", "5",
    ])
}

#[test]
fn scripted_gen_is_reproducible_and_feeds_curation() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path(), 1, 4, 2);
    let first = gen(dir.path(), "a", "1");
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let second = gen(dir.path(), "b", "1");
    assert_eq!(second.status.code(), Some(0));

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let bytes = |d: &Path| std::fs::read(d.join("problems.jsonl")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    let kept = read_problems(&a.join("problems.jsonl")).unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].pass_rate.unwrap().to_string(), "0.500000");
    assert_eq!(kept[0].gold_outputs, ["3", "6", "9", "12", "15"]);
    for f in ["attempts.jsonl", "summaries.jsonl", "manifest.json", "session.log.jsonl"] {
        assert!(a.join(f).exists(), "{f} missing");
    }

    let stats = stepstone(&["stats", "--dataset", p(&a)]);
    let report: serde_json::Value = serde_json::from_slice(&stats.stdout).unwrap();
    assert_eq!(report["records"], 1);
    assert_eq!(report["per_bin"]["appendix-b"]["medium"], 1);

    let binned = dir.path().join("binned.jsonl");
    let o = stepstone(&["curate", "bin", "--dataset", p(&a), "--scheme", "appendix-b", "--out", p(&binned)]);
    assert_eq!(stdout(&o), "easy=0 medium=1 hard=0");
    let labeled = read_problems(&binned).unwrap();
    assert_eq!(labeled[0].bin_label.map(|l| l.as_str()), Some("medium"));

    let deduped = dir.path().join("dedup.jsonl");
    let o = stepstone(&[
        "curate", "dedup", "--dataset", p(&a.join("problems.jsonl")), "--out", p(&deduped),
    ]);
    assert_eq!(stdout(&o), "kept 1 dropped 0 (exact 0, near 0)");
}

#[test]
fn exec_grades_a_submission() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path(), 1, 4, 2);
    assert_eq!(gen(dir.path(), "a", "1").status.code(), Some(0));
    let table = format!("fake:{}", p(&dir.path().join("table.jsonl")));
    let problems = dir.path().join("a").join("problems.jsonl");
    for (code, want) in [(GOLD, 1), (WRONG, 0)] {
        let sub = dir.path().join("sub.py");
        std::fs::write(&sub, code).unwrap();
        let o = stepstone(&["exec", "--problem", p(&problems), "--submission", p(&sub), "--executor", &table]);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["reward"], want, "{v}");
    }
}

#[test]
fn exhausted_script_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path(), 1, 4, 2);
    let o = gen(dir.path(), "a", "3");
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}
