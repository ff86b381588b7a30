//! Subcommand front-end. Each command validates its inputs, writes its
//! outputs and one manifest per output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dived_core::assembly::DEFAULT_INSTANCE_TEMPLATE;
use dived_core::generate::AttemptError;
use dived_core::ontology::NodeId;
use dived_core::{
    assemble, drop_rate, match_and_score, prune, render_instance, CurationReport, Curator, Dataset,
    GenRequest, Generate, GeneratedSample, InstanceKind, MockGenerator, ScoreReport, Template,
};
use serde::Serialize;

use crate::client::{load_templates, BatchClient, HttpGenerator, TemplateOverrides};
use crate::config::{BackendKind, Config};
use crate::io;
use crate::manifest::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0:#}")]
    Validation(anyhow::Error),
    #[error("backend failure: {0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Backend(_) => 2,
        }
    }
}

macro_rules! validation_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.into())
            }
        }
    )*};
}

validation_errors!(
    anyhow::Error,
    crate::io::FormatError,
    crate::config::ConfigError,
    crate::client::ClientError,
    dived_core::CurationError,
    dived_core::DatasetError,
    dived_core::PruneError,
    dived_core::AssemblyError,
    dived_core::EvalError,
    dived_core::TemplateError
);

#[derive(Debug, Parser)]
#[command(
    name = "dived",
    version,
    about = "Build, assemble and score diverse event definition datasets"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Global options")]
pub struct GlobalArgs {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Generation backend
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// Seed for the mock backend and for assembly sampling
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub seed: Option<i64>,
    /// Maximum concurrent backend requests
    #[arg(long, global = true, value_name = "N")]
    pub max_in_flight: Option<usize>,
    /// Retries per request after the first attempt
    #[arg(long, global = true, value_name = "N")]
    pub max_retries: Option<u32>,
    /// Chat-completion endpoint URL for the http backend
    #[arg(long, global = true, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Model name sent to the http backend
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Directory of template and in-context example overrides
    #[arg(long, global = true, value_name = "DIR")]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load an ontology and drop every tree containing a held-out event
    Ingest(IngestArgs),
    /// Generate one definition per event type, one request per tree
    CurateDefs(CurateDefsArgs),
    /// Generate samples for every event type, one request per tree
    CurateSamples(CurateSamplesArgs),
    /// Paraphrase each event type's seed definition
    ExpandDefs(ExpandDefsArgs),
    /// Remove duplicate event types by trigger overlap
    Prune(PruneArgs),
    /// Build training instances for one data slice
    Assemble(AssembleArgs),
    /// Score predictions against gold triggers
    Score(ScoreArgs),
    /// Drop rates between a baseline and a definition-ablated score report
    AblateReport(AblateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Ontology JSONL to read
    #[arg(long, value_name = "PATH")]
    pub ontology: PathBuf,
    /// Held-out event name (repeatable)
    #[arg(long, value_name = "NAME")]
    pub heldout: Vec<String>,
    /// File with one held-out event name per line
    #[arg(long, value_name = "PATH")]
    pub heldout_file: Option<PathBuf>,
    /// Filtered ontology JSONL to write
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurateDefsArgs {
    /// Ontology JSONL to read
    #[arg(long, value_name = "PATH")]
    pub ontology: PathBuf,
    /// Dataset JSONL to write
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurateSamplesArgs {
    /// Dataset JSONL with definitions
    #[arg(long, short, value_name = "PATH")]
    pub input: PathBuf,
    /// Dataset JSONL to write
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
    /// Samples requested per event type
    #[arg(long, value_name = "N")]
    pub per_event: Option<usize>,
    /// Extra rounds for event types left short of samples
    #[arg(long, value_name = "ROUNDS")]
    pub regenerate: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ExpandDefsArgs {
    /// Dataset JSONL with seed definitions
    #[arg(long, short, value_name = "PATH")]
    pub input: PathBuf,
    /// Dataset JSONL to write
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
    /// Paraphrases requested per event type
    #[arg(long, value_name = "N")]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Dataset JSONL with samples
    #[arg(long, short, value_name = "PATH")]
    pub input: PathBuf,
    /// Pruned dataset JSONL to write
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
    /// Overlap ratio above which the later event is removed
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Audit JSONL of removed pairs [default: <output>.audit.jsonl]
    #[arg(long, value_name = "PATH")]
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    /// Dataset JSONL (usually pruned)
    #[arg(long, short, value_name = "PATH")]
    pub input: PathBuf,
    /// Instance JSONL to write
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
    /// Number of event types
    #[arg(long, value_name = "N")]
    pub events: Option<usize>,
    /// Definitions per event type
    #[arg(long, value_name = "N")]
    pub definitions: Option<usize>,
    /// Samples per event type
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
    /// Negatives per sample
    #[arg(long, value_name = "N")]
    pub negatives: Option<usize>,
    /// Sibling hard negatives among the negatives
    #[arg(long, value_name = "N")]
    pub hard_negatives: Option<usize>,
    /// Attach parent and child event names
    #[arg(long, overrides_with = "no_ontology")]
    pub ontology: bool,
    /// Leave out ontology context
    #[arg(long, overrides_with = "ontology")]
    pub no_ontology: bool,
    /// Keep definition text
    #[arg(long, overrides_with = "no_definition")]
    pub definition: bool,
    /// Empty every definition (ablation)
    #[arg(long, overrides_with = "definition")]
    pub no_definition: bool,
    /// Also write rendered prompt/completion pairs here
    #[arg(long, value_name = "PATH")]
    pub prompts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Gold JSONL
    #[arg(long, value_name = "PATH")]
    pub gold: PathBuf,
    /// Prediction JSONL
    #[arg(long, value_name = "PATH")]
    pub pred: PathBuf,
    /// Score report JSON to write
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Score report JSON of the run with definitions
    #[arg(long, value_name = "PATH")]
    pub baseline: PathBuf,
    /// Score report JSON of the run without definitions
    #[arg(long, value_name = "PATH")]
    pub ablated: PathBuf,
    /// Drop-rate JSON to write
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

fn flag<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn resolve(global: &GlobalArgs, command: &Command) -> Result<Config, CliError> {
    let mut c = match &global.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    flag(&mut c.seed, global.seed);
    flag(&mut c.backend.kind, global.backend);
    flag(&mut c.backend.max_in_flight, global.max_in_flight);
    flag(&mut c.backend.retry.max_retries, global.max_retries);
    if global.endpoint.is_some() {
        c.backend.endpoint = global.endpoint.clone();
    }
    if global.model.is_some() {
        c.backend.model = global.model.clone();
    }
    if global.templates.is_some() {
        c.templates = global.templates.clone();
    }
    match command {
        Command::CurateSamples(a) => {
            flag(&mut c.curation.per_event, a.per_event);
            flag(&mut c.curation.regenerate, a.regenerate);
        }
        Command::ExpandDefs(a) => flag(&mut c.curation.expand_count, a.count),
        Command::Prune(a) => flag(&mut c.pruning.threshold, a.threshold),
        Command::Assemble(a) => {
            let s = &mut c.assembly;
            flag(&mut s.n_events, a.events);
            flag(&mut s.n_definitions, a.definitions);
            flag(&mut s.n_samples, a.samples);
            flag(&mut s.n_negatives, a.negatives);
            flag(&mut s.n_hard_negatives, a.hard_negatives);
            if a.ontology {
                s.with_ontology = true;
            }
            if a.no_ontology {
                s.with_ontology = false;
            }
            if a.definition {
                s.with_definition = true;
            }
            if a.no_definition {
                s.with_definition = false;
            }
        }
        _ => {}
    }
    c.validate()?;
    Ok(c)
}

enum AnyGenerator {
    Mock(MockGenerator),
    Http(HttpGenerator),
}

impl Generate for AnyGenerator {
    fn backend_name(&self) -> &str {
        match self {
            AnyGenerator::Mock(g) => g.backend_name(),
            AnyGenerator::Http(g) => g.backend_name(),
        }
    }

    fn generate(&self, request: &GenRequest, prompt: &str) -> Result<String, AttemptError> {
        match self {
            AnyGenerator::Mock(g) => g.generate(request, prompt),
            AnyGenerator::Http(g) => g.generate(request, prompt),
        }
    }
}

fn overrides(config: &Config) -> Result<TemplateOverrides, CliError> {
    match &config.templates {
        Some(dir) => Ok(load_templates(dir)?),
        None => Ok(TemplateOverrides::default()),
    }
}

fn client(config: &Config, templates: &TemplateOverrides) -> Result<BatchClient<AnyGenerator>, CliError> {
    let b = &config.backend;
    let generator = match b.kind {
        BackendKind::Mock => AnyGenerator::Mock(MockGenerator::new(config.seed)),
        BackendKind::Http => {
            let endpoint = b.endpoint.as_deref().unwrap_or_default();
            let model = b.model.as_deref().unwrap_or_default();
            let g = HttpGenerator::from_env(endpoint, model, Duration::from_secs(b.timeout_secs))
                .map_err(|e| CliError::Backend(e.to_string()))?;
            AnyGenerator::Http(g)
        }
    };
    let mut c = BatchClient::new(generator, b.max_in_flight);
    c.templates = templates.templates.clone();
    c.retry = b.retry;
    Ok(c)
}

fn curator<'a>(backend: &'a BatchClient<AnyGenerator>, templates: &TemplateOverrides) -> Curator<'a> {
    templates
        .examples
        .iter()
        .fold(Curator::new(backend), |c, (id, text)| {
            c.with_example(*id, text.clone())
        })
}

fn check_backend(report: &CurationReport) -> Result<(), CliError> {
    let failed: Vec<String> = report
        .failures
        .iter()
        .filter(|f| matches!(f.reason, dived_core::curation::FailureReason::Backend(_)))
        .map(|f| format!("{}: {}", f.event, f.reason))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Backend(failed.join("; ")))
    }
}

fn warn_missing(report: &CurationReport) {
    for f in &report.failures {
        log::warn!("{}: {}", f.event, f.reason);
    }
}

fn report_counts(m: &mut RunManifest, r: &CurationReport) {
    m.count("requested", r.requested);
    m.count("parsed", r.parsed);
    m.count("dropped_invalid", r.dropped_invalid);
    m.count("missing", r.missing());
    m.count("parse_retries", r.parse_retries);
}

fn ingest(a: &IngestArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let ontology = io::load_ontology(&a.ontology)?;
    m.input(&a.ontology)?;
    let mut heldout = a.heldout.clone();
    if let Some(path) = &a.heldout_file {
        let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
        heldout.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from),
        );
        m.input(path)?;
    }
    let filtered = ontology.filter_heldout(&heldout);
    for name in &filtered.unmatched {
        log::warn!("held-out name {name:?} matches no event type");
    }
    io::write_ontology(&a.output, &filtered.ontology)?;
    m.output(&a.output);
    m.count("nodes_in", ontology.len());
    m.count("nodes_out", filtered.ontology.len());
    m.count("trees_in", ontology.roots().len());
    m.count("trees_out", filtered.ontology.roots().len());
    m.count("trees_removed", filtered.removed_trees.len());
    m.count("heldout_unmatched", filtered.unmatched.len());
    Ok(())
}

fn curate_defs(a: &CurateDefsArgs, c: &Config, m: &mut RunManifest) -> Result<(), CliError> {
    let mut ontology = io::load_ontology(&a.ontology)?;
    m.input(&a.ontology)?;
    let t = overrides(c)?;
    let backend = client(c, &t)?;
    let roots = ontology.roots().to_vec();
    let report = curator(&backend, &t).curate_definitions(&mut ontology, &roots)?;
    check_backend(&report)?;
    warn_missing(&report);
    let dataset = Dataset::new(ontology);
    io::write_dataset(&a.output, &dataset)?;
    m.output(&a.output);
    m.count("events", dataset.ontology().len());
    m.count("definitions", dataset.total_definitions());
    report_counts(m, &report);
    Ok(())
}

/// Groups event types by tree, keeping only those `short` selects.
fn tree_groups(dataset: &Dataset, short: impl Fn(NodeId) -> bool) -> Vec<Vec<NodeId>> {
    let o = dataset.ontology();
    o.trees()
        .map(|t| t.ids().filter(|&id| short(id)).collect::<Vec<_>>())
        .filter(|g| !g.is_empty())
        .collect()
}

fn curate_samples(a: &CurateSamplesArgs, c: &Config, m: &mut RunManifest) -> Result<(), CliError> {
    let mut dataset = io::load_dataset(&a.input)?;
    m.input(&a.input)?;
    let per_event = c.curation.per_event;
    let t = overrides(c)?;
    let backend = client(c, &t)?;
    let curator = curator(&backend, &t);

    let groups = tree_groups(&dataset, |_| true);
    let (samples, report) = curator.curate_samples_for(dataset.ontology(), &groups, per_event, 0)?;
    check_backend(&report)?;
    let mut by_event: BTreeMap<String, Vec<GeneratedSample>> = BTreeMap::new();
    for s in samples {
        by_event.entry(s.event_name().to_string()).or_default().push(s);
    }

    let mut regenerated = 0;
    let mut rounds = 0;
    for round in 1..=c.curation.regenerate {
        let o = dataset.ontology();
        let have = |id: NodeId| by_event.get(o.node(id).name()).map_or(0, Vec::len);
        let groups = tree_groups(&dataset, |id| have(id) < per_event);
        if groups.is_empty() {
            break;
        }
        rounds += 1;
        let (extra, r) = curator.curate_samples_for(o, &groups, per_event, round)?;
        check_backend(&r)?;
        for s in extra {
            let list = by_event.entry(s.event_name().to_string()).or_default();
            if list.len() < per_event && !list.iter().any(|x| x.sentence() == s.sentence()) {
                list.push(s);
                regenerated += 1;
            }
        }
    }

    let mut short = 0;
    for (_, node) in dataset.ontology().iter() {
        let n = by_event.get(node.name()).map_or(0, Vec::len);
        if n < per_event {
            log::warn!("{}: {n} of {per_event} samples", node.name());
            short += 1;
        }
    }
    if rounds == 0 {
        warn_missing(&report);
    }
    dataset.set_samples(by_event.into_values().flatten().collect())?;
    io::write_dataset(&a.output, &dataset)?;
    m.output(&a.output);
    m.count("events", dataset.ontology().len());
    m.count("samples", dataset.total_samples());
    m.count("regenerated", regenerated);
    m.count("regenerate_rounds", rounds as usize);
    m.count("short_events", short);
    report_counts(m, &report);
    Ok(())
}

fn expand_defs(a: &ExpandDefsArgs, c: &Config, m: &mut RunManifest) -> Result<(), CliError> {
    let mut dataset = io::load_dataset(&a.input)?;
    m.input(&a.input)?;
    let t = overrides(c)?;
    let backend = client(c, &t)?;
    let ids: Vec<NodeId> = dataset.ontology().iter().map(|(id, _)| id).collect();
    let (_, report) =
        curator(&backend, &t).expand_definitions(dataset.ontology_mut(), &ids, c.curation.expand_count)?;
    check_backend(&report)?;
    warn_missing(&report);
    io::write_dataset(&a.output, &dataset)?;
    m.output(&a.output);
    m.count("events", dataset.ontology().len());
    m.count("definitions", dataset.total_definitions());
    report_counts(m, &report);
    Ok(())
}

fn audit_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".audit.jsonl");
    output.with_file_name(name)
}

fn prune_cmd(a: &PruneArgs, c: &Config, m: &mut RunManifest) -> Result<(), CliError> {
    let dataset = io::load_dataset(&a.input)?;
    m.input(&a.input)?;
    let (pruned, records) = prune(&dataset, c.pruning.threshold)?;
    let audit = a.audit.clone().unwrap_or_else(|| audit_path(&a.output));
    io::write_dataset(&a.output, &pruned)?;
    io::write_audit(&audit, &records)?;
    m.output(&a.output);
    m.output(&audit);
    m.count("events_in", dataset.ontology().len());
    m.count("events_out", pruned.ontology().len());
    m.count("removed", records.len());
    m.count("samples_out", pruned.total_samples());
    Ok(())
}

#[derive(Serialize)]
struct PromptPair<'a> {
    instance_id: &'a str,
    prompt: String,
    completion: String,
}

fn assemble_cmd(a: &AssembleArgs, c: &Config, m: &mut RunManifest) -> Result<(), CliError> {
    let dataset = io::load_dataset(&a.input)?;
    m.input(&a.input)?;
    let spec = c.slice_spec();
    let out = assemble(&dataset, &spec)?;
    io::write_instances(&a.output, &out.instances)?;
    m.output(&a.output);
    if let Some(path) = &a.prompts {
        let t = overrides(c)?;
        let template = Template::parse(t.instance.as_deref().unwrap_or(DEFAULT_INSTANCE_TEMPLATE));
        let pairs = out
            .instances
            .iter()
            .map(|i| {
                let (prompt, completion) = render_instance(i, &template)?;
                Ok(PromptPair {
                    instance_id: &i.instance_id,
                    prompt,
                    completion,
                })
            })
            .collect::<Result<Vec<_>, dived_core::TemplateError>>()?;
        io::write_jsonl(path, &pairs)?;
        m.output(path);
    }
    if out.hard_negative_fallbacks > 0 {
        log::warn!(
            "{} hard-negative slots filled from outside the sibling set",
            out.hard_negative_fallbacks
        );
    }
    m.count("instances", out.instances.len());
    m.count("positives", out.count(InstanceKind::Positive));
    m.count("negatives", out.count(InstanceKind::Negative));
    m.count("hard_negatives", out.count(InstanceKind::HardNegative));
    m.count("hard_negative_fallbacks", out.hard_negative_fallbacks);
    Ok(())
}

fn score(a: &ScoreArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let gold = io::read_gold(&a.gold)?;
    let pred = io::read_predictions(&a.pred)?;
    let report = match_and_score(&gold, &pred)?;
    print!("{}", report.to_table());
    if let Some(out) = &a.output {
        m.input(&a.gold)?;
        m.input(&a.pred)?;
        io::write_json(out, &report)?;
        m.output(out);
        m.count("gold_records", gold.len());
        m.count("pred_records", pred.len());
    }
    Ok(())
}

fn ablate_report(a: &AblateArgs, m: &mut RunManifest) -> Result<(), CliError> {
    let base: ScoreReport = io::read_json(&a.baseline)?;
    let ablated: ScoreReport = io::read_json(&a.ablated)?;
    let d = drop_rate(&base, &ablated);
    println!(
        "identification drop {:.4}% ({:+.4} points){}",
        d.id_drop_pct,
        -d.id_drop_points,
        if d.id_base_zero { " [baseline F1 is 0]" } else { "" }
    );
    println!(
        "classification drop {:.4}% ({:+.4} points){}",
        d.cls_drop_pct,
        -d.cls_drop_points,
        if d.cls_base_zero {
            " [baseline F1 is 0]"
        } else {
            ""
        }
    );
    if let Some(out) = &a.output {
        m.input(&a.baseline)?;
        m.input(&a.ablated)?;
        io::write_json(out, &d)?;
        m.output(out);
    }
    Ok(())
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::CurateDefs(_) => "curate-defs",
            Command::CurateSamples(_) => "curate-samples",
            Command::ExpandDefs(_) => "expand-defs",
            Command::Prune(_) => "prune",
            Command::Assemble(_) => "assemble",
            Command::Score(_) => "score",
            Command::AblateReport(_) => "ablate-report",
        }
    }
}

pub fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    let config = resolve(&cli.global, &cli.command)?;
    let mut m = RunManifest::new(cli.command.name(), config.hash(), config.seed);
    match &cli.command {
        Command::Ingest(a) => ingest(a, &mut m)?,
        Command::CurateDefs(a) => curate_defs(a, &config, &mut m)?,
        Command::CurateSamples(a) => curate_samples(a, &config, &mut m)?,
        Command::ExpandDefs(a) => expand_defs(a, &config, &mut m)?,
        Command::Prune(a) => prune_cmd(a, &config, &mut m)?,
        Command::Assemble(a) => assemble_cmd(a, &config, &mut m)?,
        Command::Score(a) => score(a, &mut m)?,
        Command::AblateReport(a) => ablate_report(a, &mut m)?,
    }
    m.write_all()?;
    Ok(m)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(m) => {
            for (k, v) in &m.counts {
                log::info!("{k}: {v}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
