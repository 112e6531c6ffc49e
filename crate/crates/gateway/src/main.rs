use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kgdf::config::{BackendSection, ServiceConfig};
use kgdf::pipeline::{
    campaign_items_from_responses, read_jsonl, record_fixtures, run_pipeline, SelectionRecord,
};
use kgdf::{build_backend, load_context, server};
use kgdf_core::clock::{Clock, SystemClock};
use kgdf_core::eval::{
    build_identification_task, create_campaign, export_csv, rank_personas, score_identification, CampaignStore,
    IdentificationTask,
};
use kgdf_core::generate::{
    generate, select_best, Batch, GenerationBackend, GeneratedResponse, ScriptedBackend, Strategy, DEFAULT_CANDIDATES,
};
use kgdf_core::grounding::{annotate, build_knowledge_lexicon, build_situation_lexicon, render_ansi};
use kgdf_core::ingest::{
    extract_triples_llm, extract_triples_pattern, parse_profile_page, CurationQueue, Decision, EntityProfile, RuleSet,
};
use kgdf_core::kg::{self, Depth, Ontology};
use kgdf_core::prompt::{
    assemble_battle_prompt, assemble_npc_prompt, render, Persona, PromptBundle, PromptKind, PromptTemplate, Scenario,
    ScenarioSet,
};

#[derive(Parser)]
#[command(name = "kgdf", version, about = "Knowledge-grounded game dialogue workbench")]
struct Cli {
    /// Service and pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replay scripted fixtures instead of calling a live backend.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Knowledge graph files.
    #[command(subcommand)]
    Kg(KgCommand),
    /// Profile parsing, triple extraction and curation.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Prompt assembly.
    #[command(subcommand)]
    Forge(ForgeCommand),
    /// Candidate generation and selection.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Label a response's knowledge and situation spans.
    Annotate(AnnotateArgs),
    /// Run the whole pipeline over a scenario file.
    Run {
        #[arg(long)]
        scenarios: PathBuf,
        /// Defaults to <data_dir>/pipeline/<scenario file stem>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve,
    /// Human evaluation campaigns.
    #[command(subcommand)]
    Campaign(CampaignCommand),
    /// Speaker identification tasks.
    #[command(subcommand)]
    Ident(IdentCommand),
}

#[derive(Subcommand)]
enum KgCommand {
    /// Build a graph from an ontology and a file of hand-written triples.
    Init {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print an entity's triples.
    Subgraph {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        entity: String,
        #[arg(long, default_value_t = 1)]
        depth: u8,
    },
}

#[derive(Subcommand)]
enum IngestCommand {
    /// Parse a saved page into a profile (JSON).
    Parse {
        file: PathBuf,
        #[arg(long)]
        entity: String,
        #[arg(long)]
        concept: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract candidate triples from a profile into a curation queue.
    Extract {
        profile: PathBuf,
        #[arg(long, conflicts_with = "llm", required_unless_present = "llm")]
        pattern: bool,
        #[arg(long)]
        llm: bool,
        #[arg(long, required_if_eq("pattern", "true"))]
        rules: Option<PathBuf>,
        #[arg(long, required_if_eq("llm", "true"))]
        ontology: Option<PathBuf>,
        /// Scripted fixture for --llm; otherwise the configured backend.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        queue: PathBuf,
    },
    /// Accept or reject pending candidates.
    Curate {
        queue: PathBuf,
        /// Graph whose ontology accepted triples are checked against.
        #[arg(long)]
        kg: PathBuf,
        /// Accept every pending candidate without prompting.
        #[arg(long)]
        accept_all: bool,
    },
    /// Insert accepted candidates into a graph.
    Promote { queue: PathBuf, kg: PathBuf },
}

#[derive(Subcommand)]
enum ForgeCommand {
    Battle {
        #[arg(long)]
        speaker: String,
        #[arg(long)]
        boss: String,
        /// File holding the situation text.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        depth: u8,
        /// Print the bundle as JSON instead of the rendered prompt.
        #[arg(long)]
        json: bool,
    },
    Npc {
        #[arg(long)]
        persona: String,
        #[arg(long)]
        npc: String,
        /// File holding the NPC's line.
        #[arg(long)]
        utterance: PathBuf,
        #[arg(long)]
        kg: PathBuf,
        #[arg(long, default_value = "Red")]
        speaker: String,
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        depth: u8,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendName {
    Scripted,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyName {
    Grounding,
    Manual,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Sample candidates for a bundle (JSON from `forge --json`).
    Run {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(short, default_value_t = DEFAULT_CANDIDATES)]
        n: usize,
        #[arg(long, value_enum, default_value = "scripted")]
        backend: BackendName,
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose one candidate of a batch.
    Select {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        batch: PathBuf,
        #[arg(long, value_enum, default_value = "grounding")]
        strategy: StrategyName,
        #[arg(long, required_if_eq("strategy", "manual"))]
        index: Option<usize>,
    },
    /// Turn a per-scenario response script into a prompt-hash fixture file.
    Record {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Add to an existing fixture file instead of replacing it.
        #[arg(long)]
        merge: bool,
    },
}

#[derive(Args)]
struct AnnotateArgs {
    #[arg(long)]
    response: PathBuf,
    #[arg(long)]
    kg: PathBuf,
    /// Comma-separated entities whose triples form the knowledge lexicon.
    #[arg(long, value_delimiter = ',')]
    entities: Vec<String>,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 1)]
    depth: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Csv,
}

#[derive(Subcommand)]
enum CampaignCommand {
    /// Create a campaign from pipeline selections.
    Create {
        #[arg(long)]
        id: String,
        #[arg(long, required = true)]
        selections: Vec<PathBuf>,
        /// Make one task per stored response instead of per selection.
        #[arg(long)]
        responses: Vec<PathBuf>,
        /// Keep only the first N items.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Record one rating, exactly as POST /api/ratings does.
    Rate {
        #[arg(long)]
        task: String,
        #[arg(long)]
        evaluator: String,
        #[arg(long)]
        s1: f64,
        #[arg(long)]
        s2: f64,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    Stats {
        #[arg(long)]
        store: Option<PathBuf>,
    },
    Rank {
        #[arg(long)]
        store: Option<PathBuf>,
    },
    Export {
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportFormat,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum IdentCommand {
    /// Build K-option tasks from JSON lines of {"response", "speaker"}.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record an answer in a task file.
    Answer {
        tasks: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long)]
        answer: String,
    },
    /// Precision, recall and macro F1 of answered tasks.
    Score { tasks: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn config(cli: &Cli) -> Result<ServiceConfig> {
    let path = cli.config.as_deref().context("this command needs --config")?;
    Ok(ServiceConfig::load(path)?)
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Kg(cmd) => kg_command(cmd)?,
        Command::Ingest(cmd) => ingest_command(cli, cmd)?,
        Command::Forge(cmd) => forge_command(cmd)?,
        Command::Gen(cmd) => gen_command(cli, cmd)?,
        Command::Annotate(args) => annotate_command(args)?,
        Command::Run { scenarios, out } => return run_command(cli, scenarios, out.as_deref()),
        Command::Serve => {
            let config = config(cli)?;
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("listening on {}", config.service.listen);
            runtime.block_on(server::serve(&config, cli.offline))?;
        }
        Command::Campaign(cmd) => campaign_command(cli, cmd)?,
        Command::Ident(cmd) => ident_command(cmd)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn kg_command(cmd: &KgCommand) -> Result<()> {
    match cmd {
        KgCommand::Init { ontology, triples, out } => {
            let ontology = Ontology::parse(&fs::read_to_string(ontology)?)?;
            let source = triples.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            let graph = kgdf::seed_graph(ontology, &fs::read_to_string(triples)?, &source)?;
            kg::persist(&graph, out)?;
            eprintln!("{} triples, {} entities", graph.len(), graph.index().len());
        }
        KgCommand::Subgraph { kg: path, entity, depth } => {
            let graph = kg::load(path)?;
            for t in graph.subgraph(entity, Depth::try_from(*depth)?)? {
                println!("{t}");
            }
        }
    }
    Ok(())
}

fn scripted_or_configured(cli: &Cli, fixture: Option<&Path>) -> Result<Arc<dyn GenerationBackend>> {
    if let Some(f) = fixture {
        return Ok(Arc::new(ScriptedBackend::load(f)?));
    }
    let config = config(cli)?;
    Ok(build_backend(&config.effective_backend(cli.offline)?)?)
}

fn ingest_command(cli: &Cli, cmd: &IngestCommand) -> Result<()> {
    match cmd {
        IngestCommand::Parse { file, entity, concept, out } => {
            let raw = fs::read_to_string(file)?;
            let source = file.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            let parsed = parse_profile_page(&raw, entity, concept, &source)?;
            for w in &parsed.warnings {
                eprintln!("warning: {w:?}");
            }
            write_out(out.as_deref(), &json(&parsed.profile))?;
        }
        IngestCommand::Extract { profile, pattern, rules, ontology, fixture, queue, .. } => {
            let profile: EntityProfile = serde_json::from_str(&fs::read_to_string(profile)?)?;
            let candidates = if *pattern {
                let rules = RuleSet::load(rules.as_ref().context("--pattern needs --rules")?)?;
                extract_triples_pattern(&profile, &rules)
            } else {
                let ontology = Ontology::parse(&fs::read_to_string(ontology.as_ref().context("--llm needs --ontology")?)?)?;
                let backend = scripted_or_configured(cli, fixture.as_deref())?;
                let (candidates, report) = extract_triples_llm(&profile, &ontology, backend.as_ref())?;
                eprintln!("parsed {}/{} lines", report.parsed_lines, report.total_lines);
                for w in &report.warnings {
                    eprintln!("warning: {w:?}");
                }
                candidates
            };
            let mut q = if queue.exists() { CurationQueue::load(queue)? } else { CurationQueue::new() };
            let added = candidates.len();
            q.extend(candidates);
            q.save(queue)?;
            eprintln!("{added} candidates queued, {} pending", q.pending().count());
        }
        IngestCommand::Curate { queue, kg: kg_path, accept_all } => {
            let graph = kg::load(kg_path)?;
            let mut q = CurationQueue::load(queue)?;
            let pending: Vec<usize> = q.pending().map(|(id, _)| id).collect();
            let stdin = io::stdin();
            let mut lines = stdin.lock().lines();
            for id in pending {
                let c = q.get(id).expect("pending id exists");
                let (decision, note) = if *accept_all {
                    (Decision::Accept, None)
                } else {
                    print!("[{id}] {} ({:?}, {})\n  a)ccept r)eject s)kip q)uit [note]: ", c.triple, c.extractor, c.triple.provenance().source);
                    io::stdout().flush()?;
                    let Some(line) = lines.next().transpose()? else { break };
                    let (choice, note) = line.trim().split_once(' ').unwrap_or((line.trim(), ""));
                    let note = (!note.trim().is_empty()).then(|| note.trim().to_string());
                    match choice {
                        "a" => (Decision::Accept, note),
                        "r" => (Decision::Reject, note),
                        "q" => break,
                        _ => continue,
                    }
                };
                if let Err(e) = q.decide(id, decision, note.as_deref(), &graph) {
                    eprintln!("[{id}] {e}");
                    continue;
                }
                q.save(queue)?;
            }
            q.save(queue)?;
        }
        IngestCommand::Promote { queue, kg: kg_path } => {
            let q = CurationQueue::load(queue)?;
            let mut graph = kg::load(kg_path)?;
            let report = q.promote_accepted(&mut graph);
            kg::persist(&graph, kg_path)?;
            print!("{}", json(&report));
        }
    }
    Ok(())
}

fn template(path: Option<&Path>, kind: PromptKind) -> Result<PromptTemplate> {
    Ok(match path {
        Some(p) => PromptTemplate::load(p)?,
        None => PromptTemplate::builtin(kind),
    })
}

fn print_bundle(bundle: &PromptBundle, as_json: bool) {
    if as_json {
        print!("{}", json(bundle));
    } else {
        print!("{}", render(bundle));
    }
}

fn forge_command(cmd: &ForgeCommand) -> Result<()> {
    match cmd {
        ForgeCommand::Battle { speaker, boss, scenario, kg: kg_path, template: t, depth, json } => {
            let graph = kg::load(kg_path)?;
            let depth = Depth::try_from(*depth)?;
            let situation = fs::read_to_string(scenario)?;
            let id = scenario.file_stem().map_or_else(|| "battle".into(), |s| s.to_string_lossy().into_owned());
            let s = Scenario::battle(&id, speaker, boss, situation.trim());
            let bundle = assemble_battle_prompt(
                graph.game(),
                &graph.subgraph(speaker, depth)?,
                &graph.subgraph(boss, depth)?,
                &s,
                &template(t.as_deref(), PromptKind::Battle)?,
            )?;
            print_bundle(&bundle, *json);
        }
        ForgeCommand::Npc { persona, npc, utterance, kg: kg_path, speaker, template: t, depth, json } => {
            let graph = kg::load(kg_path)?;
            let personas = Persona::builtin();
            let persona = Persona::find(&personas, persona)?;
            // the line is kept byte for byte, trailing newline aside
            let text = fs::read_to_string(utterance)?;
            let text = text.strip_suffix('\n').unwrap_or(&text);
            let id = utterance.file_stem().map_or_else(|| "npc".into(), |s| s.to_string_lossy().into_owned());
            let s = Scenario::npc(&id, speaker, npc, text);
            let bundle = assemble_npc_prompt(
                graph.game(),
                persona,
                &graph.subgraph(npc, Depth::try_from(*depth)?)?,
                &s,
                &template(t.as_deref(), PromptKind::NpcInteraction)?,
            )?;
            print_bundle(&bundle, *json);
        }
    }
    Ok(())
}

fn gen_command(cli: &Cli, cmd: &GenCommand) -> Result<()> {
    match cmd {
        GenCommand::Run { bundle, n, backend, fixture, out } => {
            let bundle: PromptBundle = serde_json::from_str(&fs::read_to_string(bundle)?)?;
            let backend: Arc<dyn GenerationBackend> = match (backend, cli.offline) {
                (BackendName::Scripted, _) | (BackendName::Http, true) => scripted_or_configured(cli, fixture.as_deref())?,
                (BackendName::Http, false) => {
                    let config = config(cli)?;
                    if !matches!(config.backend, BackendSection::HttpChat { .. }) {
                        bail!("config does not describe an http-chat backend");
                    }
                    build_backend(&config.backend)?
                }
            };
            let batch = generate(&bundle, *n, backend.as_ref(), &SystemClock)?;
            write_out(out.as_deref(), &json(&batch))?;
        }
        GenCommand::Select { bundle, batch, strategy, index } => {
            let bundle: PromptBundle = serde_json::from_str(&fs::read_to_string(bundle)?)?;
            let batch: Batch = serde_json::from_str(&fs::read_to_string(batch)?)?;
            let candidates: Vec<GeneratedResponse> = batch.responses().into_iter().cloned().collect();
            let knowledge = build_knowledge_lexicon(&bundle.triples());
            let situation = build_situation_lexicon(bundle.scenario_text());
            let annotations: Vec<_> =
                candidates.iter().map(|c| annotate(&c.text, &knowledge, &situation).for_response(&c.id)).collect();
            let strategy = match strategy {
                StrategyName::Grounding => Strategy::Grounding,
                StrategyName::Manual => Strategy::Manual(index.context("--strategy manual needs --index")?),
            };
            let selection = select_best(&candidates, &annotations, strategy)?;
            print!("{}", json(&selection));
            eprintln!("{}", candidates[selection.chosen].text);
        }
        GenCommand::Record { scenarios, script, out, merge } => {
            let ctx = load_context(&config(cli)?)?;
            let set = ScenarioSet::load(scenarios)?;
            let script: BTreeMap<String, Vec<String>> = serde_json::from_str(&fs::read_to_string(script)?)?;
            let recorded = record_fixtures(&ctx, &set, &script)?;
            let mut fixtures: BTreeMap<String, Vec<String>> = if *merge && out.exists() {
                serde_json::from_str(&fs::read_to_string(out)?)?
            } else {
                BTreeMap::new()
            };
            let added = recorded.len();
            fixtures.extend(recorded);
            fs::write(out, json(&fixtures))?;
            eprintln!("{added} prompts recorded, {} in {}", fixtures.len(), out.display());
        }
    }
    Ok(())
}

fn annotate_command(args: &AnnotateArgs) -> Result<()> {
    let graph = kg::load(&args.kg)?;
    let depth = Depth::try_from(args.depth)?;
    let mut triples = Vec::new();
    for e in &args.entities {
        triples.extend(graph.subgraph(e.trim(), depth)?);
    }
    let response = fs::read_to_string(&args.response)?;
    let response = response.trim_end_matches('\n');
    let scenario = fs::read_to_string(&args.scenario)?;
    let annotation = annotate(response, &build_knowledge_lexicon(&triples), &build_situation_lexicon(&scenario));
    eprintln!("{}", render_ansi(response, &annotation));
    print!("{}", json(&annotation));
    Ok(())
}

fn run_command(cli: &Cli, scenarios: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let config = config(cli)?;
    let ctx = load_context(&config)?;
    let backend = build_backend(&config.effective_backend(cli.offline)?)?;
    let set = ScenarioSet::load(scenarios)?;
    let out = out.map_or_else(|| server::run_dir(&config.service.data_dir, scenarios), Path::to_path_buf);
    let report = run_pipeline(&ctx, &set, backend.as_ref(), &SystemClock, &out)?;
    print!("{}", json(&report));
    for f in &report.failures {
        eprintln!("{} failed at {:?}: {}", f.scenario_id, f.stage, f.error);
    }
    eprintln!("{}/{} scenarios succeeded; artifacts in {}", report.succeeded(), report.scenarios, out.display());
    Ok(if report.exit_code() == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn store_path(cli: &Cli, store: Option<&Path>, campaign: Option<&str>) -> Result<PathBuf> {
    if let Some(p) = store {
        return Ok(p.to_path_buf());
    }
    let config = config(cli).context("pass --store or --config")?;
    Ok(match campaign {
        Some(id) => kgdf::config::campaign_path(&config.service.data_dir, id),
        None => config.campaign_path(),
    })
}

fn open_store(cli: &Cli, store: Option<&Path>) -> Result<CampaignStore> {
    let path = store_path(cli, store, None)?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    CampaignStore::open(&path, clock).with_context(|| format!("opening campaign {}", path.display()))
}

fn campaign_command(cli: &Cli, cmd: &CampaignCommand) -> Result<()> {
    match cmd {
        CampaignCommand::Create { id, selections, responses, limit, store } => {
            let mut records: Vec<SelectionRecord> = Vec::new();
            for path in selections {
                records.extend(read_jsonl::<SelectionRecord>(path)?);
            }
            let mut items = if responses.is_empty() {
                records.iter().map(SelectionRecord::campaign_item).collect()
            } else {
                let mut all: Vec<GeneratedResponse> = Vec::new();
                for path in responses {
                    all.extend(read_jsonl::<GeneratedResponse>(path)?);
                }
                campaign_items_from_responses(&all, &records)?
            };
            if let Some(n) = limit {
                if *n > items.len() {
                    bail!("--limit {n} exceeds the {} available items", items.len());
                }
                items.truncate(*n);
            }
            let (campaign, warnings) = create_campaign(id, &items, &SystemClock)?;
            for w in &warnings {
                eprintln!("warning: {w:?}");
            }
            let path = store_path(cli, store.as_deref(), Some(id))?;
            let tasks = campaign.tasks.len();
            CampaignStore::create(&path, campaign, Arc::new(SystemClock))?;
            eprintln!("{tasks} tasks written to {}", path.display());
        }
        CampaignCommand::Rate { task, evaluator, s1, s2, store } => {
            let rating = open_store(cli, store.as_deref())?.submit_rating(task, evaluator, *s1, *s2)?;
            print!("{}", json(&rating));
        }
        CampaignCommand::Stats { store } => {
            let stats = open_store(cli, store.as_deref())?.stats()?;
            print!("{}", json(&stats));
        }
        CampaignCommand::Rank { store } => {
            let ranking = rank_personas(&open_store(cli, store.as_deref())?.stats()?);
            print!("{}", json(&ranking));
        }
        CampaignCommand::Export { format: ExportFormat::Csv, store, out } => {
            let s = open_store(cli, store.as_deref())?;
            write_out(out.as_deref(), &export_csv(&s.campaign().tasks, &s.ratings())?)?;
        }
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct IdentInput {
    #[serde(default)]
    task_id: Option<String>,
    response: String,
    speaker: String,
}

fn ident_command(cmd: &IdentCommand) -> Result<()> {
    match cmd {
        IdentCommand::Build { input, k, seed, out } => {
            let inputs: Vec<IdentInput> = read_jsonl(input)?;
            let speakers: BTreeSet<&str> = inputs.iter().map(|i| i.speaker.as_str()).collect();
            let mut tasks = Vec::with_capacity(inputs.len());
            for (n, i) in inputs.iter().enumerate() {
                let decoys: Vec<String> =
                    speakers.iter().filter(|s| **s != i.speaker).map(|s| s.to_string()).collect();
                let id = i.task_id.clone().unwrap_or_else(|| format!("i{:04}", n + 1));
                tasks.push(build_identification_task(&id, &i.response, &i.speaker, &decoys, *k, seed + n as u64)?);
            }
            fs::write(out, json(&tasks))?;
        }
        IdentCommand::Answer { tasks, task, answer } => {
            let mut all: Vec<IdentificationTask> = serde_json::from_str(&fs::read_to_string(tasks)?)?;
            let t = all.iter_mut().find(|t| &t.task_id == task).with_context(|| format!("no task {task}"))?;
            t.record_answer(answer)?;
            fs::write(tasks, json(&all))?;
        }
        IdentCommand::Score { tasks } => {
            let all: Vec<IdentificationTask> = serde_json::from_str(&fs::read_to_string(tasks)?)?;
            let score = score_identification(&all)?;
            if !score.unanswered.is_empty() {
                eprintln!("skipped {} unanswered tasks", score.unanswered.len());
            }
            print!("{}", json(&score));
        }
    }
    Ok(())
}
