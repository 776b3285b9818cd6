#![allow(dead_code)]

use stepstone::env::{materialize_problem, parse_teacher_output, Lineage};
use stepstone::exec::{ExecLimits, FakeExecutor, FakeOutcome};
use stepstone::literal::Value;
use stepstone::model::{EnvKind, ProblemSpec};

pub const APP_F_ANSWER: &str = include_str!("../fixtures/resource_budget_answer.txt");

/// Gold outputs of the resource-budget reference code on its own five
/// inputs, from running it under CPython.
pub const APP_F_GOLD: [bool; 5] = [true, true, false, false, false];

/// A student answer that sums the fourth tuple field; it takes two
/// arguments while the problem passes three.
pub const SUM_STUDENT: &str = "def f(task_dict, limit):
    total_duration = sum(
        info[3] for info in task_dict.values())
    return total_duration <= limit";

pub const ANGLE_EASY: &str = "def f(b1, b2):
    d = abs(b1 - b2) % 360
    return float(min(d, 360 - d))";

pub const SQUARE: &str = "def f(x):
    return x * x";

pub const BUGGY_ABS: &str = "def f(x):
    return x

def pre_test_f(x):
    return isinstance(x, int)

def test_f(x):
    assert f(x) >= 0";

pub fn limits() -> ExecLimits {
    ExecLimits::default()
}

pub fn lineage(id: &str) -> Lineage {
    Lineage {
        problem_id: id.into(),
        seed_id: "seed-0".into(),
        turn_index: 1,
        parent_id: None,
    }
}

pub fn app_f_code() -> String {
    parse_teacher_output(APP_F_ANSWER).unwrap().code
}

/// Registers gold rows for the resource-budget problem and the two-argument
/// student function.
pub fn register_app_f(fake: &mut FakeExecutor) {
    let draft = parse_teacher_output(APP_F_ANSWER).unwrap();
    for (input, gold) in draft.input_literals.iter().zip(APP_F_GOLD) {
        fake.register_result(&draft.code, "f", input, FakeOutcome::Return(Value::Bool(gold)));
    }
    fake.register_fn(SUM_STUDENT, "f", |args| {
        if args.len() != 2 {
            return FakeOutcome::Raise(format!(
                "TypeError: f() takes 2 positional arguments but {} were given",
                args.len()
            ));
        }
        FakeOutcome::Return(Value::Bool(true))
    });
}

pub fn angle_distance(b1: i64, b2: i64) -> f64 {
    let d = (b1 - b2).rem_euclid(360).min((b2 - b1).rem_euclid(360));
    d as f64
}

pub fn register_basics(fake: &mut FakeExecutor) {
    fake.register_fn(ANGLE_EASY, "f", |a| match (a[0].as_i64(), a[1].as_i64()) {
        (Some(x), Some(y)) => {
            let d = (x - y).abs() % 360;
            FakeOutcome::Return(Value::Float(d.min(360 - d) as f64))
        }
        _ => FakeOutcome::Raise("TypeError: bad operand type".into()),
    });
    fake.register_fn(SQUARE, "f", |a| match a.first().and_then(Value::as_i64) {
        Some(x) => FakeOutcome::Return(Value::int(x * x)),
        None => FakeOutcome::Raise("TypeError: can't multiply sequence".into()),
    });
    fake.register_fn(BUGGY_ABS, "f", |a| FakeOutcome::Return(a[0].clone()));
    fake.register_fn(BUGGY_ABS, "pre_test_f", |a| {
        FakeOutcome::Return(Value::Bool(matches!(a[0], Value::Int(_))))
    });
    fake.register_fn(BUGGY_ABS, "test_f", |a| match a[0].as_i64() {
        Some(x) if x >= 0 => FakeOutcome::Return(Value::None),
        Some(_) => FakeOutcome::Raise("AssertionError".into()),
        None => FakeOutcome::Raise("TypeError: '>=' not supported".into()),
    });
}

pub fn fake() -> FakeExecutor {
    let mut f = FakeExecutor::new();
    register_app_f(&mut f);
    register_basics(&mut f);
    f
}

pub fn answer(code: &str, inputs: &[&str], message: &str) -> String {
    let mut s = format!("```python\n{code}\n```\n\n");
    for i in inputs {
        s += &format!("```input\n{i}\n```\n\n");
    }
    s + &format!("```message\n{message}\n```\n")
}

pub fn problem(env: EnvKind, code: &str, inputs: &[&str], fake: &FakeExecutor) -> ProblemSpec {
    let draft = parse_teacher_output(&answer(code, inputs, "m")).unwrap();
    materialize_problem(&draft, env, fake, lineage("p"), limits()).unwrap()
}

pub const WRONG_STUDENT: &str = "def f(x):\n    return x";
pub const OFFSET_INPUTS: [&str; 5] = ["1", "2", "3", "4", "5"];

pub fn offset_code(k: i64) -> String {
    format!("def f(x):\n    return x + {k}")
}

pub fn register_offset(fake: &mut FakeExecutor, k: i64) {
    fake.register_fn(&offset_code(k), "f", move |a| match a[0].as_i64() {
        Some(x) => FakeOutcome::Return(Value::int(x + k)),
        None => FakeOutcome::Raise("TypeError".into()),
    });
}

pub fn offset_answer(k: i64) -> String {
    answer(&offset_code(k), &OFFSET_INPUTS, &format!("Shift the number by {k}."))
}

pub fn student_answer(code: &str) -> String {
    format!("<think>\nlooks simple\n</think>\n```python\n{code}\n```\n")
}

/// What the teacher says in one turn and how many of the M students get it right.
pub enum Turn {
    Offset { k: i64, correct: usize },
    /// Teacher output with no message block; nothing reaches the students.
    Unparseable,
}

/// Sequential teacher and student scripts for `turns`, in call order.
pub fn script(turns: &[Turn], m: usize) -> stepstone::client::FixtureSet {
    use stepstone::client::{FixtureSet, ScriptedFixture};
    let mut teacher = Vec::new();
    let mut student = Vec::new();
    for t in turns {
        match t {
            Turn::Offset { k, correct } => {
                teacher.push(offset_answer(*k));
                for i in 0..m {
                    let code = if i < *correct { offset_code(*k) } else { WRONG_STUDENT.to_string() };
                    student.push(student_answer(&code));
                }
            }
            Turn::Unparseable => teacher.push(format!("```python\n{}\n```\n```input\n1\n```\n", offset_code(0))),
        }
    }
    FixtureSet {
        teacher: ScriptedFixture::any(teacher),
        student: ScriptedFixture::any(student),
    }
}

/// 80-line corpus so every snippet length fits.
pub fn corpus(name: &str) -> stepstone::pipeline::Corpus {
    let text: String = (0..80).map(|i| format!("value_{i} = compute({i}, scale={})\n", i % 7)).collect();
    stepstone::pipeline::Corpus::from_text(name, &text)
}

/// A problem record with the given text and pass rate, skipping execution.
pub fn record(id: &str, code: &str, message: &str, pass_rate: Option<stepstone::model::Fraction>) -> ProblemSpec {
    let mut p = ProblemSpec {
        problem_id: id.into(),
        env: EnvKind::Deduction,
        code: code.into(),
        message: message.into(),
        inputs: vec!["1".into()],
        gold_outputs: vec!["1".into()],
        visible_k: None,
        seed_id: "seed-0".into(),
        turn_index: 1,
        parent_id: None,
        pass_rate,
        bin_label: None,
        dedup_digest: String::new(),
    };
    p.dedup_digest = stepstone::model::canonical_digest(&p);
    p
}

pub fn frac(n: u64, d: u64) -> stepstone::model::Fraction {
    stepstone::model::Fraction::new(n, d).unwrap()
}

/// `n` distinct records with pass rates spread evenly over `[lo, hi]` in 1/den steps.
pub fn records_in(prefix: &str, n: usize, lo: u64, hi: u64, den: u64) -> Vec<ProblemSpec> {
    let span = hi - lo + 1;
    (0..n)
        .map(|i| {
            let p = frac(lo + (i as u64 % span), den);
            record(&format!("{prefix}-{i}"), &format!("def f(x):\n    return x + {i}"), prefix, Some(p))
        })
        .collect()
}

pub const SECTOR_HARD: &str = "def f(edges):
    out = {}
    for src, dst, bearing in edges:
        out.setdefault(src, []).append(bearing % 360)
    spans = {}
    for node, bs in out.items():
        bs.sort()
        gaps = [bs[i + 1] - bs[i] for i in range(len(bs) - 1)] + [bs[0] + 360 - bs[-1]]
        spans[node] = round(float(360 - max(gaps)), 1)
    return spans";

pub const SECTOR_MEDIUM: &str = "def f(bearings):
    bs = sorted(b % 360 for b in bearings)
    gaps = [bs[i + 1] - bs[i] for i in range(len(bs) - 1)] + [bs[0] + 360 - bs[-1]]
    return round(float(360 - max(gaps)), 1)";

pub const GUESS_STUDENT: &str = "def f(*args):\n    return -1.0";

pub const HARD_INPUTS: [&str; 5] = [
    "[('a', 'b', 350), ('a', 'c', 10)]",
    "[('a', 'b', 90), ('b', 'c', 45), ('b', 'a', 300)]",
    "[('x', 'y', 0)]",
    "[('p', 'q', 10), ('p', 'r', 200), ('q', 'p', 180)]",
    "[('n', 'm', 359), ('n', 'k', 1), ('n', 'j', 180)]",
];
pub const MEDIUM_INPUTS: [&str; 5] = ["[350, 10, 5]", "[0, 90, 180]", "[45]", "[10, 200]", "[359, 1, 180]"];
pub const EASY_INPUTS: [&str; 5] = ["0, 359", "10, 190", "90, 270", "45, 50", "350, 20"];

pub fn sector(bearings: &[f64]) -> f64 {
    let mut bs: Vec<f64> = bearings.iter().map(|b| b.rem_euclid(360.0)).collect();
    bs.sort_by(f64::total_cmp);
    let mut widest = bs[0] + 360.0 - bs[bs.len() - 1];
    for w in bs.windows(2) {
        widest = widest.max(w[1] - w[0]);
    }
    ((360.0 - widest) * 10.0).round() / 10.0
}

pub fn register_chain_fns(fake: &mut FakeExecutor) {
    fake.register_fn(SECTOR_HARD, "f", |a| {
        let Value::List(edges) = &a[0] else {
            return FakeOutcome::Raise("TypeError".into());
        };
        let mut by_node: Vec<(String, Vec<f64>)> = Vec::new();
        for e in edges {
            let Value::Tuple(t) = e else {
                return FakeOutcome::Raise("TypeError".into());
            };
            let src = t[0].as_str().unwrap_or_default().to_string();
            let b = t[2].as_f64().unwrap_or_default();
            match by_node.iter_mut().find(|(n, _)| *n == src) {
                Some((_, v)) => v.push(b),
                None => by_node.push((src, vec![b])),
            }
        }
        FakeOutcome::Return(Value::Dict(
            by_node.into_iter().map(|(n, bs)| (Value::str(n), Value::Float(sector(&bs)))).collect(),
        ))
    });
    fake.register_fn(SECTOR_MEDIUM, "f", |a| match &a[0] {
        Value::List(xs) => FakeOutcome::Return(Value::Float(sector(
            &xs.iter().map(|x| x.as_f64().unwrap_or_default()).collect::<Vec<_>>(),
        ))),
        _ => FakeOutcome::Raise("TypeError".into()),
    });
    fake.register_fn(GUESS_STUDENT, "f", |_| FakeOutcome::Return(Value::Float(-1.0)));
}

pub fn sector_hard_answer() -> String {
    answer(SECTOR_HARD, &HARD_INPUTS, "For each node, find the smallest angular sector holding all its outgoing bearings.")
}

pub fn sector_medium_answer() -> String {
    answer(SECTOR_MEDIUM, &MEDIUM_INPUTS, "Find the smallest sector covering all compass bearings.")
}

pub fn angle_easy_answer() -> String {
    answer(ANGLE_EASY, &EASY_INPUTS, "Return the smallest angular distance between two bearings.")
}

/// Materialized hard problem with the given pass rate.
pub fn sector_hard_problem(fake: &FakeExecutor, pass_rate: stepstone::model::Fraction) -> ProblemSpec {
    let d = parse_teacher_output(&sector_hard_answer()).unwrap();
    let mut p = materialize_problem(&d, EnvKind::Induction, fake, lineage("hard-0"), limits()).unwrap();
    p.pass_rate = Some(pass_rate);
    p
}

/// Teacher answers and student batches for successive chain tries:
/// `(teacher answer, correct code, correct count)` with `m` students each.
pub fn chain_script(tries: &[(String, &str, usize)], m: usize) -> stepstone::client::FixtureSet {
    use stepstone::client::{FixtureSet, ScriptedFixture};
    let mut teacher = Vec::new();
    let mut student = Vec::new();
    for (answer, code, correct) in tries {
        teacher.push(answer.clone());
        for i in 0..m {
            student.push(student_answer(if i < *correct { code } else { GUESS_STUDENT }));
        }
    }
    FixtureSet {
        teacher: ScriptedFixture::any(teacher),
        student: ScriptedFixture::any(student),
    }
}

/// A chain built from plain records with the given pass rates.
pub fn chain_of(rates: [stepstone::model::Fraction; 3]) -> stepstone::model::Chain {
    use stepstone::model::DifficultyLabel as L;
    let mut hard = record("h", "def f(x):\n    return 3", "hard", Some(rates[0]));
    let mut medium = record("m", "def f(x):\n    return 2", "medium", Some(rates[1]));
    let mut easy = record("e", "def f(x):\n    return 1", "easy", Some(rates[2]));
    hard.bin_label = Some(L::Hard);
    medium.bin_label = Some(L::Medium);
    easy.bin_label = Some(L::Easy);
    medium.turn_index = 2;
    medium.parent_id = Some("h".into());
    easy.turn_index = 3;
    easy.parent_id = Some("m".into());
    stepstone::model::Chain {
        chain_id: "c".into(),
        hard,
        medium,
        easy,
    }
}
