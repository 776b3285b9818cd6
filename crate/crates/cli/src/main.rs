use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use stepstone::client::{FixtureSet, Logged, ModelClient, RemoteClient, RemoteConfig, ScriptedClient, SessionLog};
use stepstone::curation::{
    assign_bin, bin_dataset, build_chain, dataset_stats, dedup_dataset, label_counts, match_histograms, DuplicateOf,
};
use stepstone::curriculum::stage_weights;
use stepstone::env::{grade_completion, reward, PromptSet};
use stepstone::exec::{Executor, FakeExecutor, SandboxConfig, SandboxExecutor};
use stepstone::model::{read_problems, write_records, DifficultyLabel, EnvKind, Fraction, ProblemSpec, Record};
use stepstone::pipeline::{run_pipeline, seed_rng, write_dataset, Corpus, DedupIndex, GenContext, PROBLEMS_FILE};
use stepstone::presets::RunConfig;
use stepstone::rl::{pass_at_k, rational_to_f64};

const SESSION_LOG: &str = "session.log.jsonl";
const CHAINS_FILE: &str = "chains.jsonl";
const DEFAULT_HARNESS: &str = "python3 -u -m stepstone_harness";

#[derive(Parser)]
#[command(name = "stepstone", version, about = "Generate, grade, curate and schedule synthetic code problems")]
struct Cli {
    /// TOML settings file ([pipeline], [chains], [bins.*], [schedules.*]). Flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Session log path. Commands with --out default to OUT/session.log.jsonl.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the multi-turn teacher/student generation loop.
    Gen(GenArgs),
    /// Build hard -> medium -> easy chains from hard problems.
    Chains(ChainArgs),
    #[command(subcommand)]
    Curate(CurateCmd),
    #[command(subcommand)]
    Schedule(ScheduleCmd),
    /// Grade one submission against one problem.
    Exec(ExecArgs),
    /// Summarize a dataset.
    Stats {
        /// Dataset directory or problems file.
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Unbiased pass@k.
    Passk {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        c: u64,
        #[arg(long)]
        k: u64,
    },
}

#[derive(Clone, Debug)]
enum Backend {
    Scripted(PathBuf),
    Remote,
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some(("scripted", p)) if !p.is_empty() => Ok(Backend::Scripted(p.into())),
            None if s == "remote" => Ok(Backend::Remote),
            _ => Err(format!("expected scripted:FIXTURE or remote, got {s}")),
        }
    }
}

#[derive(Clone, Debug)]
enum ExecutorSpec {
    Sandbox,
    Fake(PathBuf),
}

impl FromStr for ExecutorSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some(("fake", p)) if !p.is_empty() => Ok(ExecutorSpec::Fake(p.into())),
            None if s == "sandbox" => Ok(ExecutorSpec::Sandbox),
            _ => Err(format!("expected sandbox or fake:TABLE, got {s}")),
        }
    }
}

#[derive(Args)]
struct ExecutorArgs {
    #[arg(long, default_value = "sandbox")]
    executor: ExecutorSpec,
    /// Guest harness command for the sandbox executor.
    #[arg(long, default_value = DEFAULT_HARNESS)]
    harness: String,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    backend: Backend,
    #[command(flatten)]
    exec: ExecutorArgs,
    /// Directory of prompt templates replacing the built-in ones.
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long)]
    rng_seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    env: EnvKind,
    /// Seed corpus files; snippets are drawn from those with at least 50 lines.
    #[arg(long, required = true, num_args = 1..)]
    seeds: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Seed sessions to run.
    #[arg(long, default_value_t = 1)]
    num_seeds: usize,
    #[arg(long, alias = "turns-per-seed")]
    turns: Option<u32>,
    #[arg(long, alias = "attempts-m")]
    attempts: Option<u32>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    induction_inputs: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long)]
    hard_set: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, alias = "attempts-m")]
    attempts: Option<u32>,
    #[arg(long)]
    max_regeneration_tries: Option<u32>,
    #[arg(long)]
    scheme: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Subcommand)]
enum CurateCmd {
    /// Label every problem under a bin scheme.
    Bin {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "appendix-b")]
        scheme: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove exact and near duplicates.
    Dedup {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "9/10")]
        threshold: Fraction,
        /// Where to write the removed records.
        #[arg(long)]
        dropped: Option<PathBuf>,
    },
    /// Subsample two datasets to equal per-bin counts.
    Match {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "appendix-b")]
        scheme: String,
        #[arg(long)]
        out_a: PathBuf,
        #[arg(long)]
        out_b: PathBuf,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
    },
}

#[derive(Subcommand)]
enum ScheduleCmd {
    /// Split weights of a schedule at one step.
    Preview {
        #[arg(long)]
        name: String,
        #[arg(long)]
        step: u64,
    },
    /// Names of the known schedules.
    List,
}

#[derive(Args)]
struct ExecArgs {
    /// Problems file; the first problem is used.
    #[arg(long)]
    problem: PathBuf,
    /// A bare submission or a completion with a fenced answer block.
    #[arg(long)]
    submission: PathBuf,
    #[command(flatten)]
    exec: ExecutorArgs,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn open_log(explicit: Option<&Path>, out: Option<&Path>) -> Result<Arc<SessionLog>> {
    let path = explicit.map(Path::to_path_buf).or_else(|| out.map(|o| o.join(SESSION_LOG)));
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            Ok(Arc::new(SessionLog::create(&p).with_context(|| format!("opening {}", p.display()))?))
        }
        None => Ok(Arc::new(SessionLog::disabled())),
    }
}

fn make_executor(args: &ExecutorArgs) -> Result<Box<dyn Executor>> {
    Ok(match &args.executor {
        ExecutorSpec::Fake(table) => Box::new(FakeExecutor::from_table_file(table)?),
        ExecutorSpec::Sandbox => {
            let cmd: Vec<String> = args.harness.split_whitespace().map(String::from).collect();
            if cmd.is_empty() {
                bail!("empty --harness command");
            }
            Box::new(SandboxExecutor::new(SandboxConfig::new(cmd)))
        }
    })
}

type Client = Logged<Box<dyn ModelClient>>;

fn make_clients(backend: &Backend, log: &Arc<SessionLog>) -> Result<(Client, Client)> {
    let (t, s): (Box<dyn ModelClient>, Box<dyn ModelClient>) = match backend {
        Backend::Scripted(path) => {
            let set = FixtureSet::load(path)?;
            (
                Box::new(ScriptedClient::new(set.teacher)),
                Box::new(ScriptedClient::new(set.student)),
            )
        }
        Backend::Remote => (
            Box::new(RemoteClient::new(RemoteConfig::from_env()?)?),
            Box::new(RemoteClient::new(RemoteConfig::from_env()?)?),
        ),
    };
    Ok((Logged::new(t, "teacher", log.clone()), Logged::new(s, "student", log.clone())))
}

fn prompts(dir: Option<&Path>) -> Result<PromptSet> {
    Ok(match dir {
        Some(d) => PromptSet::from_dir(d)?,
        None => PromptSet::builtin(),
    })
}

fn problems_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(PROBLEMS_FILE)
    } else {
        p.to_path_buf()
    }
}

fn cmd_gen(cli: &Cli, a: &GenArgs) -> Result<()> {
    let mut rc = load_config(cli.config.as_deref())?;
    let cfg = &mut rc.pipeline;
    cfg.env = a.env;
    if let Some(v) = a.turns {
        cfg.turns_per_seed = v;
    }
    if let Some(v) = a.attempts {
        cfg.attempts_m = v;
    }
    if let Some(v) = a.concurrency {
        cfg.concurrency = v;
    }
    if let Some(v) = a.induction_inputs {
        cfg.induction_inputs = v;
    }
    if let Some(v) = a.model.rng_seed {
        cfg.rng_seed = v;
    }
    cfg.validate().map_err(anyhow::Error::msg)?;
    let corpora = a
        .seeds
        .iter()
        .map(|p| Corpus::load(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let log = open_log(cli.log.as_deref(), Some(&a.out))?;
    let (teacher, student) = make_clients(&a.model.backend, &log)?;
    let executor = make_executor(&a.model.exec)?;
    let prompts = prompts(a.model.prompts.as_deref())?;
    let dedup = DedupIndex::new();
    let ctx = GenContext {
        teacher: &teacher,
        student: &student,
        executor: executor.as_ref(),
        cfg,
        prompts: &prompts,
        dedup: &dedup,
        log: &log,
    };
    let run = run_pipeline(&corpora, a.num_seeds, &ctx)?;
    let manifest = write_dataset(&run, &a.out, cfg)?;
    let aborted = run.seeds.iter().filter(|s| s.aborted.is_some()).count();
    let drops: Vec<String> = run.drop_counts().iter().map(|(r, n)| format!("{}={n}", r.as_str())).collect();
    println!(
        "kept {} problems from {} seeds ({aborted} aborted); dropped: {}",
        manifest.record_count,
        run.seeds.len(),
        if drops.is_empty() { "none".into() } else { drops.join(" ") }
    );
    Ok(())
}

fn cmd_chains(cli: &Cli, a: &ChainArgs) -> Result<()> {
    let mut rc = load_config(cli.config.as_deref())?;
    if let Some(v) = a.attempts {
        rc.chains.attempts_m = v;
    }
    if let Some(v) = a.max_regeneration_tries {
        rc.chains.max_regeneration_tries = v;
    }
    if let Some(v) = &a.scheme {
        rc.chains.bin_scheme = v.clone();
    }
    if let Some(v) = a.model.rng_seed {
        rc.pipeline.rng_seed = v;
    }
    let chain_cfg = rc.chain_config()?;
    chain_cfg.validate().map_err(anyhow::Error::msg)?;
    let hard_set = read_problems(&a.hard_set)?;
    let log = open_log(cli.log.as_deref(), Some(&a.out))?;
    let (teacher, student) = make_clients(&a.model.backend, &log)?;
    let executor = make_executor(&a.model.exec)?;
    let prompts = prompts(a.model.prompts.as_deref())?;
    let dedup = DedupIndex::new();
    let ctx = GenContext {
        teacher: &teacher,
        student: &student,
        executor: executor.as_ref(),
        cfg: &rc.pipeline,
        prompts: &prompts,
        dedup: &dedup,
        log: &log,
    };
    let mut rng = seed_rng(rc.pipeline.rng_seed, 0);
    let mut chains = Vec::new();
    let mut skipped = 0;
    for hard in &hard_set {
        if hard.pass_rate.map(|p| assign_bin(p, &chain_cfg.bin_config)) != Some(DifficultyLabel::Hard) {
            skipped += 1;
            continue;
        }
        match build_chain(hard, &ctx, &chain_cfg, &mut rng) {
            Ok(c) => chains.push(c),
            Err(stepstone::curation::ChainError::Pipeline(e)) => return Err(e.into()),
            Err(e) => log.note(format!("chain from {} failed: {e}", hard.problem_id)),
        }
    }
    std::fs::create_dir_all(&a.out)?;
    let built = chains.len();
    write_records(&a.out.join(CHAINS_FILE), chains.into_iter().map(Record::from))?;
    println!(
        "built {built} chains from {} hard problems ({skipped} not hard, {} failed)",
        hard_set.len() - skipped,
        hard_set.len() - skipped - built
    );
    Ok(())
}

fn cmd_curate(cli: &Cli, c: &CurateCmd) -> Result<()> {
    let rc = load_config(cli.config.as_deref())?;
    let log = open_log(cli.log.as_deref(), None)?;
    match c {
        CurateCmd::Bin { dataset, scheme, out } => {
            let cfg = rc.presets.bin_config(scheme)?;
            let mut problems = read_problems(&problems_path(dataset))?;
            bin_dataset(&mut problems, cfg);
            let counts = label_counts(&problems, cfg);
            write_records(out, problems.into_iter().map(Record::from))?;
            let line = counts.iter().map(|(l, n)| format!("{l}={n}")).collect::<Vec<_>>().join(" ");
            log.note(format!("curate bin {scheme}: {line}"));
            println!("{line}");
        }
        CurateCmd::Dedup {
            dataset,
            out,
            threshold,
            dropped,
        } => {
            let problems = read_problems(&problems_path(dataset))?;
            let r = dedup_dataset(problems, *threshold);
            let exact = r.dropped.iter().filter(|(_, d)| matches!(d, DuplicateOf::Exact { .. })).count();
            for (p, d) in &r.dropped {
                log.note(format!("dropped {}: {d:?}", p.problem_id));
            }
            let summary = format!(
                "kept {} dropped {} (exact {exact}, near {})",
                r.kept.len(),
                r.dropped.len(),
                r.dropped.len() - exact
            );
            write_records(out, r.kept.into_iter().map(Record::from))?;
            if let Some(path) = dropped {
                write_records(path, r.dropped.into_iter().map(|(p, _)| Record::from(p)))?;
            }
            println!("{summary}");
        }
        CurateCmd::Match {
            a,
            b,
            scheme,
            out_a,
            out_b,
            rng_seed,
        } => {
            let cfg = rc.presets.bin_config(scheme)?;
            let (da, db) = (read_problems(&problems_path(a))?, read_problems(&problems_path(b))?);
            let mut rng = seed_rng(*rng_seed, 0);
            let (ma, mb) = match_histograms(&da, &db, cfg, &mut rng);
            let line = label_counts(&ma, cfg)
                .iter()
                .map(|(l, n)| format!("{l}={n}"))
                .collect::<Vec<_>>()
                .join(" ");
            write_records(out_a, ma.into_iter().map(Record::from))?;
            write_records(out_b, mb.into_iter().map(Record::from))?;
            log.note(format!("curate match {scheme}: {line}"));
            println!("{line}");
        }
    }
    Ok(())
}

fn cmd_exec(a: &ExecArgs) -> Result<()> {
    let problem: ProblemSpec = read_problems(&a.problem)?
        .into_iter()
        .next()
        .with_context(|| format!("{} holds no problem", a.problem.display()))?;
    let text = std::fs::read_to_string(&a.submission).with_context(|| format!("reading {}", a.submission.display()))?;
    let executor = make_executor(&a.exec)?;
    let limits = stepstone::exec::ExecLimits::default();
    let grade = if text.contains("```") {
        grade_completion(&problem, &text, executor.as_ref(), limits).1
    } else {
        reward(problem.env, text.trim(), &problem, executor.as_ref(), limits)
    };
    println!(
        "{}",
        serde_json::json!({
            "problem_id": problem.problem_id,
            "reward": grade.reward,
            "status": grade.status,
            "detail": grade.detail,
        })
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(cli, a),
        Cmd::Chains(a) => cmd_chains(cli, a),
        Cmd::Curate(c) => cmd_curate(cli, c),
        Cmd::Schedule(ScheduleCmd::Preview { name, step }) => {
            let rc = load_config(cli.config.as_deref())?;
            println!("{}", stage_weights(rc.presets.schedule(name)?, *step)?.render());
            Ok(())
        }
        Cmd::Schedule(ScheduleCmd::List) => {
            let rc = load_config(cli.config.as_deref())?;
            for (name, s) in &rc.presets.schedules {
                println!("{name}\t{}", s.splits.join(","));
            }
            Ok(())
        }
        Cmd::Exec(a) => cmd_exec(a),
        Cmd::Stats { dataset } => {
            let rc = load_config(cli.config.as_deref())?;
            let problems = read_problems(&problems_path(dataset))?;
            let schemes: Vec<_> = rc.presets.bins.values().collect();
            let report = dataset_stats(&problems, &schemes);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Cmd::Passk { n, c, k } => {
            println!("{:?}", rational_to_f64(&pass_at_k(*n, *c, *k)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
