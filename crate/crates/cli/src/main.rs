mod dot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use cdt_core::adapt::{adapt_tree, transfer};
use cdt_core::analyze::{drift_test, similarity_matrix, GroupData, SimilarityMode};
use cdt_core::bench::synthetic::{drifting_corpus, generate, planted_config, two_rule_corpus, Behavior};
use cdt_core::bench::{ingest, run_experiment, verify_provenance, Corpus, PredictionRecord, RunConfig};
use cdt_core::construct::{build_tree, build_tree_with_selection, candidate_seeds};
use cdt_core::document::{load_tree, save_tree, to_jsonl, write_file, write_json, write_jsonl};
use cdt_core::evaluate::{aggregate, evaluate_all, GroupBy};
use cdt_core::infer::{predict, BaselineConfig, BaselineKind, Baselines, InferConfig};
use cdt_core::model::{EventStore, HyperParams, Observation};
use cdt_core::oracle::{Oracle, OracleConfig, Transcript, TranscriptMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Oracle(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Oracle(_) => "oracle",
            CliError::Io(_) => "io",
            CliError::Internal(_) => "internal",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 3,
            CliError::Data(_) => 4,
            CliError::Oracle(_) => 5,
            CliError::Io(_) => 6,
        }
    }
}

impl From<cdt_core::Error> for CliError {
    fn from(e: cdt_core::Error) -> Self {
        use cdt_core::Error as E;
        let msg = e.to_string();
        match e.root() {
            E::Invalid(_) | E::DegenerateEmbedding(_) | E::Json(_) => CliError::Data(msg),
            // Invalid input short-circuits before failures are aggregated.
            E::Oracle(_) | E::Aggregate(_) => CliError::Oracle(msg),
            E::Io { .. } => CliError::Io(msg),
            _ => CliError::Internal(msg),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "cdt", version, about = "Codified decision trees: build, adapt, predict, evaluate, analyze")]
struct Cli {
    /// Tool config (TOML): seed, hyperparams, infer, baselines, oracle.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Record oracle traffic into this transcript directory.
    #[arg(long, global = true, conflicts_with = "replay")]
    record: Option<PathBuf>,
    /// Serve oracle traffic only from this transcript directory.
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a tree from a group's observations.
    Build {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        group: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adapt a tree with new observations.
    Adapt {
        #[arg(long)]
        tree: PathBuf,
        /// Observations the tree was built or last adapted on.
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        new: PathBuf,
        #[arg(long, default_value = "adapt")]
        phase: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Carry a source group's tree over to a target group.
    Transfer {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        group: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Predict decisions with a tree or a baseline.
    Predict(PredictArgs),
    /// Score predictions against reference decisions.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-method, per-group and per-domain CSV tables.
        #[arg(long)]
        tables: Option<PathBuf>,
    },
    /// Drift and similarity analytics.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Render a tree.
    Export {
        #[arg(long)]
        tree: PathBuf,
        /// Graphviz DOT instead of indented text.
        #[arg(long)]
        dot: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment plan from a run config.
    Run {
        #[arg(long = "plan")]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check that every traced prediction in a run resolves to evidence.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
    /// Write a synthetic corpus with planted behaviors.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "group", required = true)]
        groups: Vec<String>,
        #[arg(long, value_enum, default_value = "two-rule")]
        kind: SynthKind,
        /// Events per rule (two-rule) or per phase (drifting).
        #[arg(long, default_value_t = 30)]
        per: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write a tool config wired to the planted provider.
        #[arg(long)]
        config_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    TwoRule,
    Drifting,
    Strikes,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Cdt,
    Vanilla,
    HumanProfile,
    Summarization,
    Rag,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, value_enum, default_value = "cdt")]
    method: MethodArg,
    /// Tree for the cdt method.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Training observations for the summarization and rag baselines.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Group name for baselines (defaults to the tree's group).
    #[arg(long)]
    group: Option<String>,
    #[arg(long, conflicts_with = "data")]
    context: Option<String>,
    #[arg(long, requires = "context")]
    question: Option<String>,
    /// Predict every observation in this JSONL file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output JSONL for --data.
    #[arg(long, requires = "data")]
    out: Option<PathBuf>,
    /// Write the traversal trace (single context, cdt method).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Phase drift test for one group.
    Drift {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 3)]
        phases: usize,
    },
    /// Pairwise group similarity matrix (CSV).
    Similarity {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Corpus for bss mode.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Restrict bss mode to these groups.
        #[arg(long = "group")]
        groups: Vec<String>,
        /// Trees for the emd modes.
        #[arg(long = "tree")]
        trees: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bss,
    EmdGate,
    EmdStmt,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ToolConfig {
    seed: u64,
    hyperparams: HyperParams,
    infer: InferConfig,
    baselines: BaselineConfig,
    oracle: OracleConfig,
}

struct Ctx {
    cfg: ToolConfig,
    record: Option<PathBuf>,
    replay: Option<PathBuf>,
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

impl Ctx {
    fn load(cli: &Cli) -> CliResult<Ctx> {
        let cfg: ToolConfig = match &cli.config {
            Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => ToolConfig::default(),
        };
        Ok(Ctx {
            cfg,
            record: cli.record.clone(),
            replay: cli.replay.clone(),
        })
    }

    fn transcript(&self) -> CliResult<Option<Arc<Transcript>>> {
        let opened = match (&self.record, &self.replay) {
            (Some(d), _) => Transcript::open(d, TranscriptMode::Record),
            (None, Some(d)) => Transcript::open(d, TranscriptMode::Replay),
            (None, None) => return Ok(None),
        };
        opened.map(|t| Some(Arc::new(t))).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Validates everything, then builds the oracle. Nothing has been asked
    /// of any provider when this fails.
    fn oracle_for(&self, oracle_cfg: &OracleConfig, hp: Option<&HyperParams>) -> CliResult<Oracle> {
        let mut problems = Vec::new();
        if let Some(Err(e)) = hp.map(HyperParams::validate) {
            problems.push(e.to_string());
        }
        let replay = self.replay.is_some() && self.record.is_none();
        problems.extend(oracle_cfg.problems(replay));
        if !problems.is_empty() {
            return Err(CliError::Config(problems.join("; ")));
        }
        oracle_cfg.build(self.transcript()?).map_err(CliError::Config)
    }

    fn oracle(&self) -> CliResult<Oracle> {
        self.oracle_for(&self.cfg.oracle, Some(&self.cfg.hyperparams))
    }
}

fn load_corpus(path: &Path) -> CliResult<Corpus> {
    let corpus = ingest(path)?;
    for e in &corpus.errors {
        log::warn!("{}:{}: {}", path.display(), e.line, e.message);
    }
    for w in &corpus.warnings {
        log::warn!("{w}");
    }
    if corpus.is_empty() {
        return Err(CliError::Data(format!("{} has no valid observations", path.display())));
    }
    Ok(corpus)
}

fn group_of(corpus: &Corpus, group: &str, path: &Path) -> CliResult<Vec<Observation>> {
    corpus
        .groups
        .get(group)
        .cloned()
        .ok_or_else(|| CliError::Data(format!("group {group:?} not found in {}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => Ok(write_file(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_build(ctx: &Ctx, data: &Path, group: &str, out: &Path) -> CliResult {
    let oracle = ctx.oracle()?;
    let corpus = load_corpus(data)?;
    let obs = group_of(&corpus, group, data)?;
    let hp = &ctx.cfg.hyperparams;
    let tree = if hp.candidates_c <= 1 {
        build_tree(&obs, group, hp, &oracle, ctx.cfg.seed)?
    } else {
        build_tree_with_selection(&obs, group, hp, &oracle, &candidate_seeds(ctx.cfg.seed, hp.candidates_c))?.tree
    };
    save_tree(out, &tree)?;
    log::info!("built {} statements for {group} ({} oracle requests)", tree.root.statement_count(), oracle.requests());
    Ok(())
}

fn cmd_adapt(ctx: &Ctx, tree: &Path, history: &Path, new: &Path, phase: &str, out: &Path, report: Option<&Path>) -> CliResult {
    let oracle = ctx.oracle()?;
    let t = load_tree(tree)?;
    let hist = load_corpus(history)?;
    let store = EventStore::from_observations(hist.all())?;
    let new_corpus = load_corpus(new)?;
    let d_new = group_of(&new_corpus, &t.group, new)?;
    let (adapted, rep) = adapt_tree(&t, &store, &d_new, &oracle, &ctx.cfg.hyperparams, phase)?;
    save_tree(out, &adapted)?;
    if let Some(r) = report {
        write_json(r, &rep)?;
    }
    Ok(())
}

fn cmd_transfer(ctx: &Ctx, source: &Path, data: &Path, group: &str, out: &Path, report: Option<&Path>) -> CliResult {
    let oracle = ctx.oracle()?;
    let src = load_tree(source)?;
    let corpus = load_corpus(data)?;
    let target = group_of(&corpus, group, data)?;
    let (t, rep) = transfer(&src, &target, group, &oracle, &ctx.cfg.hyperparams, "transfer")?;
    save_tree(out, &t)?;
    if let Some(r) = report {
        write_json(r, &rep)?;
    }
    Ok(())
}

fn cmd_predict(ctx: &Ctx, a: &PredictArgs) -> CliResult {
    if a.context.is_none() && a.data.is_none() {
        return Err(CliError::Config("predict needs --context or --data".into()));
    }
    let tree = match (&a.tree, a.method) {
        (Some(p), _) => Some(load_tree(p)?),
        (None, MethodArg::Cdt) => return Err(CliError::Config("the cdt method needs --tree".into())),
        (None, _) => None,
    };
    let group = a
        .group
        .clone()
        .or_else(|| tree.as_ref().map(|t| t.group.clone()))
        .ok_or_else(|| CliError::Config("--group is required without a tree".into()))?;
    let history = match &a.history {
        Some(p) => group_of(&load_corpus(p)?, &group, p)?,
        None => Vec::new(),
    };
    let oracle = ctx.oracle_for(&ctx.cfg.oracle, None)?;
    let baselines = Baselines::new(&group, history, ctx.cfg.baselines.clone())?;
    let kind = match a.method {
        MethodArg::Cdt => None,
        MethodArg::Vanilla => Some(BaselineKind::Vanilla),
        MethodArg::HumanProfile => Some(BaselineKind::HumanProfile),
        MethodArg::Summarization => Some(BaselineKind::Summarization),
        MethodArg::Rag => Some(BaselineKind::Rag),
    };
    let method = a.method.to_possible_value().map(|v| v.get_name().replace('-', "_")).unwrap_or_default();

    let run_one = |context: &str, question: &str| -> CliResult<PredictionRecord> {
        let mut rec = PredictionRecord {
            observation_id: cdt_core::model::EventId::new(""),
            group: group.clone(),
            method: method.clone(),
            prediction: String::new(),
            tree: None,
            trace: None,
            fallback: false,
        };
        match (kind, &tree) {
            (Some(k), _) => rec.prediction = baselines.predict(k, context, question, &oracle)?,
            (None, Some(t)) => {
                let p = predict(t, context, question, &oracle, &ctx.cfg.infer)?;
                rec.prediction = p.text;
                rec.trace = Some(p.trace);
                rec.fallback = p.fallback;
                rec.tree = a.tree.as_ref().map(|p| p.display().to_string());
            }
            (None, None) => unreachable!("cdt without a tree was rejected above"),
        }
        Ok(rec)
    };

    if let Some(context) = &a.context {
        let q = a.question.clone().unwrap_or_else(|| format!("What will {group} do next?"));
        let rec = run_one(context, &q)?;
        if let (Some(path), Some(trace)) = (&a.trace, &rec.trace) {
            write_json(path, trace)?;
        }
        println!("{}", rec.prediction);
        return Ok(());
    }
    let data = a.data.as_ref().expect("checked above");
    let corpus = load_corpus(data)?;
    let mut records = Vec::new();
    for o in corpus.all() {
        let q = if o.question.trim().is_empty() {
            format!("What will {} do next?", o.group)
        } else {
            o.question.clone()
        };
        let mut rec = run_one(&o.context, &q).map_err(|e| match e {
            CliError::Oracle(m) => CliError::Oracle(format!("{}: {m}", o.id)),
            other => other,
        })?;
        rec.observation_id = o.id.clone();
        rec.group = o.group.clone();
        records.push(rec);
    }
    match &a.out {
        Some(p) => write_jsonl(p, &records)?,
        None => print!("{}", to_jsonl(&records)?),
    }
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, data: &Path, predictions: &Path, out: &Path, tables: Option<&Path>) -> CliResult {
    let oracle = ctx.oracle_for(&ctx.cfg.oracle, None)?;
    let corpus = load_corpus(data)?;
    let store = EventStore::from_observations(corpus.all())?;
    let preds: Vec<PredictionRecord> = cdt_core::document::read_jsonl(predictions)?;
    let mut by_method: std::collections::BTreeMap<&str, Vec<(&Observation, String)>> = Default::default();
    for p in &preds {
        let o = store
            .get(&p.observation_id)
            .ok_or_else(|| CliError::Data(format!("prediction for unknown observation {}", p.observation_id)))?;
        by_method.entry(&p.method).or_default().push((o, p.prediction.clone()));
    }
    let mut records = Vec::new();
    for (method, items) in by_method {
        records.extend(evaluate_all(&items, method, &oracle)?);
    }
    write_jsonl(out, &records)?;
    if records.is_empty() {
        return Ok(());
    }
    let by_method = aggregate(&records, GroupBy::Method)?;
    match tables {
        Some(dir) => {
            for (by, name) in [(GroupBy::Method, "method"), (GroupBy::Group, "group"), (GroupBy::Domain, "domain")] {
                write_file(dir.join(format!("evaluation_by_{name}.csv")), aggregate(&records, by)?.to_csv())?;
            }
        }
        None => print!("{}", by_method.to_csv()),
    }
    Ok(())
}

fn cmd_analyze(ctx: &Ctx, cmd: &AnalyzeCommand) -> CliResult {
    let hp = &ctx.cfg.hyperparams;
    let oracle = ctx.oracle()?;
    match cmd {
        AnalyzeCommand::Drift { data, group, phases } => {
            let corpus = load_corpus(data)?;
            let obs = group_of(&corpus, group, data)?;
            let r = drift_test(&obs, *phases, hp.bss_top_n, hp.bss_context_tau, &oracle)?;
            println!("{}", serde_json::to_string_pretty(&r).map_err(|e| CliError::Internal(e.to_string()))?);
        }
        AnalyzeCommand::Similarity {
            mode,
            data,
            groups,
            trees,
            out,
        } => {
            let (mode, inputs) = match mode {
                ModeArg::Bss => {
                    let data = data.as_ref().ok_or_else(|| CliError::Config("bss mode needs --data".into()))?;
                    let corpus = load_corpus(data)?;
                    let names: Vec<String> = if groups.is_empty() { corpus.groups.keys().cloned().collect() } else { groups.clone() };
                    let inputs = names
                        .iter()
                        .map(|g| Ok((g.clone(), GroupData::Events(group_of(&corpus, g, data)?))))
                        .collect::<CliResult<Vec<_>>>()?;
                    (SimilarityMode::Bss, inputs)
                }
                ModeArg::EmdGate | ModeArg::EmdStmt => {
                    if trees.len() < 2 {
                        return Err(CliError::Config("emd modes need at least two --tree files".into()));
                    }
                    let inputs = trees
                        .iter()
                        .map(|p| {
                            let t = load_tree(p)?;
                            Ok((t.group.clone(), GroupData::Tree(Box::new(t))))
                        })
                        .collect::<CliResult<Vec<_>>>()?;
                    let m = if matches!(mode, ModeArg::EmdGate) { SimilarityMode::EmdGate } else { SimilarityMode::EmdStmt };
                    (m, inputs)
                }
            };
            let m = similarity_matrix(&inputs, mode, hp.bss_top_n, hp.bss_context_tau, &oracle)?;
            for e in &m.errors {
                log::warn!("{e}");
            }
            emit(out.as_deref(), &m.to_csv())?;
        }
    }
    Ok(())
}

fn cmd_run(ctx: &Ctx, plan: &Path, out: &Path) -> CliResult {
    let mut cfg = RunConfig::from_toml(&read_text(plan)?).map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.data.is_relative() {
        cfg.data = plan.parent().unwrap_or(Path::new(".")).join(&cfg.data);
    }
    let mut problems = cfg.problems();
    let corpus = load_corpus(&cfg.data)?;
    problems.extend(cfg.problems_with(&corpus));
    if !problems.is_empty() {
        return Err(CliError::Config(problems.join("; ")));
    }
    let oracle = ctx.oracle_for(&cfg.oracle, Some(&cfg.hyperparams))?;
    let report = run_experiment(&cfg, &corpus, &oracle, out)?;
    for c in report.failed() {
        log::warn!("cell {} failed: {}", c.cell, c.error.as_deref().unwrap_or(""));
    }
    let ok = report.cells.iter().filter(|c| c.ok).count();
    println!("{ok}/{} cells completed; report at {}", report.cells.len(), out.join("report.json").display());
    Ok(())
}

fn cmd_verify(run: &Path) -> CliResult {
    let cfg = RunConfig::from_toml(&read_text(&run.join("config.toml"))?).map_err(|e| CliError::Config(e.to_string()))?;
    let corpus = load_corpus(&cfg.data)?;
    let store = EventStore::from_observations(corpus.all())?;
    let check = verify_provenance(run, &store)?;
    println!("{}", serde_json::to_string_pretty(&check).map_err(|e| CliError::Internal(e.to_string()))?);
    if check.dangling.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} dangling references", check.dangling.len())))
    }
}

fn cmd_synth(out: &Path, groups: &[String], kind: SynthKind, per: usize, seed: u64, config_out: Option<&Path>) -> CliResult {
    let mut all = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        let s = seed.wrapping_add(i as u64 * 1000);
        all.extend(match kind {
            SynthKind::TwoRule => two_rule_corpus(g, per, s),
            SynthKind::Drifting => drifting_corpus(g, per, s),
            SynthKind::Strikes => generate(g, &[(Behavior::Negotiate, per), (Behavior::Refund, per)], 0, s, 0),
        });
    }
    write_jsonl(out, &all)?;
    if let Some(p) = config_out {
        let oracle = toml::to_string(&OracleConfig::planted(planted_config())).map_err(|e| CliError::Internal(e.to_string()))?;
        let text = format!("seed = {seed}\n\n[hyperparams]\ncandidates_c = 1\n\n{}", prefix_tables(&oracle, "oracle"));
        write_file(p, text)?;
    }
    Ok(())
}

/// Nests a serialized TOML document under `[name]`.
fn prefix_tables(doc: &str, name: &str) -> String {
    let mut top = String::new();
    let mut rest = String::new();
    let mut in_table = false;
    for line in doc.lines() {
        let t = line.trim_start();
        if let Some(inner) = t.strip_prefix("[[").and_then(|x| x.strip_suffix("]]")) {
            in_table = true;
            rest.push_str(&format!("[[{name}.{inner}]]\n"));
        } else if let Some(inner) = t.strip_prefix('[').and_then(|x| x.strip_suffix(']')) {
            in_table = true;
            rest.push_str(&format!("[{name}.{inner}]\n"));
        } else if in_table {
            rest.push_str(line);
            rest.push('\n');
        } else {
            top.push_str(line);
            top.push('\n');
        }
    }
    format!("[{name}]\n{top}\n{rest}")
}

fn run(cli: Cli) -> CliResult {
    let ctx = Ctx::load(&cli)?;
    match &cli.command {
        Command::Build { data, group, out } => cmd_build(&ctx, data, group, out),
        Command::Adapt {
            tree,
            history,
            new,
            phase,
            out,
            report,
        } => cmd_adapt(&ctx, tree, history, new, phase, out, report.as_deref()),
        Command::Transfer {
            source,
            data,
            group,
            out,
            report,
        } => cmd_transfer(&ctx, source, data, group, out, report.as_deref()),
        Command::Predict(a) => cmd_predict(&ctx, a),
        Command::Evaluate {
            data,
            predictions,
            out,
            tables,
        } => cmd_evaluate(&ctx, data, predictions, out, tables.as_deref()),
        Command::Analyze(a) => cmd_analyze(&ctx, a),
        Command::Export { tree, dot, out } => {
            let t = load_tree(tree)?;
            let text = if *dot { dot::render(&t) } else { t.verbalize() };
            emit(out.as_deref(), &text)
        }
        Command::Run { plan, out } => cmd_run(&ctx, plan, out),
        Command::Verify { run } => cmd_verify(run),
        Command::Synth {
            out,
            groups,
            kind,
            per,
            seed,
            config_out,
        } => cmd_synth(out, groups, *kind, *per, *seed, config_out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::from(e.code())
        }
    }
}
