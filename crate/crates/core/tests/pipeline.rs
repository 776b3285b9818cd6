mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use common::*;
use stepstone::client::{
    record_replay, ClientError, CompletionParams, FixtureSet, Logged, ModelClient, ScriptedClient, ScriptedFixture,
    SessionLog,
};
use stepstone::env::PromptSet;
use stepstone::exec::FakeExecutor;
use stepstone::model::{read_problems, read_records, Fraction, Record};
use stepstone::pipeline::{
    run_pipeline, write_dataset, DedupIndex, DropReason, GenContext, PipelineConfig, PipelineRun, DROPPED_FILE,
    PROBLEMS_FILE,
};

fn cfg(turns: u32, m: u32) -> PipelineConfig {
    PipelineConfig {
        turns_per_seed: turns,
        attempts_m: m,
        ..PipelineConfig::default()
    }
}

fn run_with(
    cfg: &PipelineConfig,
    teacher: &dyn ModelClient,
    student: &dyn ModelClient,
    fake: &FakeExecutor,
    seeds: usize,
    log: &SessionLog,
) -> PipelineRun {
    let prompts = PromptSet::builtin();
    let dedup = DedupIndex::new();
    let ctx = GenContext {
        teacher,
        student,
        executor: fake,
        cfg,
        prompts: &prompts,
        dedup: &dedup,
        log,
    };
    run_pipeline(&[corpus("c")], seeds, &ctx).unwrap()
}

fn scripted(set: FixtureSet) -> (ScriptedClient, ScriptedClient) {
    (ScriptedClient::new(set.teacher), ScriptedClient::new(set.student))
}

#[test]
fn resource_budget_turn_scores_five_of_eight() {
    let mut fake = fake();
    register_offset(&mut fake, 1);
    let mut teacher = vec![offset_answer(1)];
    let (good1, good2) = (offset_code(1), app_f_code());
    let mut student: Vec<String> = (0..8)
        .map(|i| student_answer(if i < 4 { &good1 } else { WRONG_STUDENT }))
        .collect();
    teacher.push(APP_F_ANSWER.to_string());
    student.extend((0..8).map(|i| student_answer(if i < 5 { &good2 } else { SUM_STUDENT })));
    let (t, s) = (
        ScriptedClient::new(ScriptedFixture::any(teacher)),
        ScriptedClient::new(ScriptedFixture::any(student)),
    );
    let run = run_with(&cfg(2, 8), &t, &s, &fake, 1, &SessionLog::disabled());
    let outcomes = &run.seeds[0].outcomes;
    assert_eq!(outcomes.len(), 2);
    let (p1, s1) = outcomes[0].graded().unwrap();
    assert_eq!(s1.pass_rate, Fraction::new(1, 2).unwrap());
    let (p2, s2) = outcomes[1].graded().unwrap();
    assert_eq!(s2.pass_rate, Fraction::new(5, 8).unwrap());
    assert_eq!(s2.pass_rate.to_string(), "0.625000");
    assert!(outcomes[1].kept);
    assert_eq!(p2.parent_id.as_deref(), Some(p1.problem_id.as_str()));
    assert_eq!(p2.pass_rate, Some(s2.pass_rate));
    assert_eq!(outcomes[1].attempts.len(), 8);
    assert_eq!(s2.solved_examples.len(), 2);
    assert_eq!(s2.failed_examples, vec![SUM_STUDENT.to_string(), SUM_STUDENT.to_string()]);
}

#[test]
fn filter_outcomes_and_context_carry_over() {
    let mut fake = fake();
    for k in 1..=4 {
        register_offset(&mut fake, k);
    }
    let set = script(
        &[
            Turn::Offset { k: 1, correct: 4 },
            Turn::Unparseable,
            Turn::Offset { k: 2, correct: 8 },
            Turn::Offset { k: 3, correct: 0 },
            Turn::Offset { k: 1, correct: 3 },
            Turn::Offset { k: 4, correct: 2 },
        ],
        8,
    );
    let (t, s) = scripted(set);
    let run = run_with(&cfg(6, 8), &t, &s, &fake, 1, &SessionLog::disabled());
    let o = &run.seeds[0].outcomes;
    let reasons: Vec<Option<DropReason>> = o.iter().map(|x| x.drop_reason).collect();
    assert_eq!(
        reasons,
        vec![
            None,
            Some(DropReason::ParseFail),
            Some(DropReason::TooEasy),
            Some(DropReason::TooHard),
            Some(DropReason::Duplicate),
            None
        ]
    );
    assert!(o[1].problem.is_none() && o[1].attempts.is_empty());
    // turn 3 builds on turn 1 because turn 2 produced nothing
    let t1 = o[0].problem.as_ref().unwrap();
    assert_eq!(o[2].problem.as_ref().unwrap().parent_id.as_deref(), Some(t1.problem_id.as_str()));
    // later turns build on the last graded problem even when it was dropped
    let t5 = o[4].problem.as_ref().unwrap();
    assert_eq!(o[5].problem.as_ref().unwrap().parent_id.as_deref(), Some(t5.problem_id.as_str()));
    assert_eq!(run.kept().len(), 2);
    assert_eq!(run.dropped().len(), 3);
    assert_eq!(t.remaining() + s.remaining(), 0);

    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&run, dir.path(), &cfg(6, 8)).unwrap();
    assert_eq!(manifest.record_count, 2);
    assert_eq!(read_problems(&dir.path().join(DROPPED_FILE)).unwrap().len(), 3);
    let kept = read_problems(&dir.path().join(PROBLEMS_FILE)).unwrap();
    assert!(manifest.matches(&kept));
}

#[test]
fn a_seed_without_a_turn_one_problem_is_aborted() {
    let set = script(&[Turn::Unparseable, Turn::Unparseable, Turn::Unparseable], 8);
    let (t, s) = scripted(set);
    let run = run_with(&cfg(6, 8), &t, &s, &fake(), 1, &SessionLog::disabled());
    assert!(run.seeds[0].aborted.as_deref().unwrap().contains("No message found"));
    assert!(run.seeds[0].outcomes.is_empty());
    assert_eq!(t.calls(), 3);
}

#[test]
fn turn_one_retries_before_giving_up() {
    let mut fake = fake();
    register_offset(&mut fake, 7);
    let set = script(&[Turn::Unparseable, Turn::Offset { k: 7, correct: 1 }], 4);
    let (t, s) = scripted(set);
    let run = run_with(&cfg(1, 4), &t, &s, &fake, 1, &SessionLog::disabled());
    let o = &run.seeds[0].outcomes;
    assert_eq!(o.len(), 1);
    assert_eq!(o[0].summary.as_ref().unwrap().pass_rate, Fraction::new(1, 4).unwrap());
}

#[test]
fn backend_exhaustion_is_fatal() {
    let mut fake = fake();
    register_offset(&mut fake, 1);
    let mut set = script(&[Turn::Offset { k: 1, correct: 4 }], 8);
    set.student = ScriptedFixture::any(set.student.entries.iter().take(3).map(|e| e.response.clone()));
    let (t, s) = scripted(set);
    let prompts = PromptSet::builtin();
    let dedup = DedupIndex::new();
    let log = SessionLog::disabled();
    let c = cfg(1, 8);
    let ctx = GenContext {
        teacher: &t,
        student: &s,
        executor: &fake,
        cfg: &c,
        prompts: &prompts,
        dedup: &dedup,
        log: &log,
    };
    assert!(run_pipeline(&[corpus("c")], 1, &ctx).is_err());
}

#[test]
fn short_corpora_are_rejected() {
    let set = script(&[], 8);
    let (t, s) = scripted(set);
    let prompts = PromptSet::builtin();
    let dedup = DedupIndex::new();
    let log = SessionLog::disabled();
    let fake = fake();
    let c = cfg(1, 8);
    let ctx = GenContext {
        teacher: &t,
        student: &s,
        executor: &fake,
        cfg: &c,
        prompts: &prompts,
        dedup: &dedup,
        log: &log,
    };
    let short = stepstone::pipeline::Corpus::from_text("tiny", "a\nb\n");
    let err = run_pipeline(&[short], 1, &ctx).unwrap_err();
    assert!(err.to_string().contains("at least 50"));
}

/// Teacher that reports a context overflow on its second call and records prompts.
struct Overflowing {
    inner: ScriptedClient,
    calls: AtomicUsize,
    prompts: Mutex<Vec<String>>,
}

impl ModelClient for Overflowing {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ClientError> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        if self.calls.fetch_add(1, Ordering::SeqCst) == 1 {
            return Err(ClientError::ContextTooLong("too many tokens".into()));
        }
        self.inner.complete(prompt, params)
    }
}

#[test]
fn context_overflow_drops_examples_and_retries() {
    let mut fake = fake();
    register_offset(&mut fake, 1);
    register_offset(&mut fake, 2);
    let set = script(&[Turn::Offset { k: 1, correct: 2 }, Turn::Offset { k: 2, correct: 2 }], 4);
    let t = Overflowing {
        inner: ScriptedClient::new(set.teacher),
        calls: AtomicUsize::new(0),
        prompts: Mutex::new(vec![]),
    };
    let s = ScriptedClient::new(set.student);
    let run = run_with(&cfg(2, 4), &t, &s, &fake, 1, &SessionLog::disabled());
    assert_eq!(run.kept().len(), 2);
    let prompts = t.prompts.lock().unwrap();
    assert_eq!(prompts.len(), 3);
    assert!(prompts[1].contains("0.500") && !prompts[1].contains("(none)"));
    assert_eq!(prompts[2].matches("(none)").count(), 2);
}

#[test]
fn a_logged_run_replays_exactly() {
    let mut fake = fake();
    for k in [1, 2, 3] {
        register_offset(&mut fake, k);
    }
    let set = script(
        &[
            Turn::Offset { k: 1, correct: 3 },
            Turn::Offset { k: 2, correct: 5 },
            Turn::Offset { k: 3, correct: 6 },
        ],
        8,
    );
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("session.log.jsonl");
    let log = Arc::new(SessionLog::create(&log_path).unwrap());
    let (t, s) = scripted(set);
    let (t, s) = (Logged::new(t, "teacher", log.clone()), Logged::new(s, "student", log.clone()));
    let c = PipelineConfig {
        rng_seed: 11,
        ..cfg(3, 8)
    };
    let first = run_with(&c, &t, &s, &fake, 1, &log);
    drop((t, s));
    let text = std::fs::read_to_string(&log_path).unwrap();
    let replay = record_replay(&text).unwrap();
    assert_eq!(replay.teacher.len(), 3);
    assert_eq!(replay.student.len(), 24);
    let (t, s) = scripted(replay);
    let second = run_with(&c, &t, &s, &fake, 1, &SessionLog::disabled());
    assert_eq!(first.kept(), second.kept());
    assert_eq!(first.attempts(), second.attempts());

    let decisions = text.lines().filter(|l| l.contains("\"decision\"")).count();
    assert_eq!(decisions, 3);
    let other = tempfile::tempdir().unwrap();
    write_dataset(&second, other.path(), &c).unwrap();
    let recs = read_records(&other.path().join("attempts.jsonl")).unwrap();
    assert!(recs.iter().all(|r| matches!(r, Record::Attempt(_))));
    assert_eq!(recs.len(), 24);
}
