//! One PASS/FAIL line per primary acceptance criterion.

mod common;
#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::Utc;
use common::*;
use kgdf::pipeline::{read_jsonl, run_pipeline, AnnotationRecord, SelectionRecord, ANNOTATIONS_FILE, SELECTIONS_FILE};
use kgdf_core::clock::SystemClock;
use kgdf_core::eval::{
    compute_stats, create_campaign, rank_personas, score_identification, CampaignItem, EvalError, EvalTask,
    IdentificationTask, Rating,
};
use kgdf_core::generate::{select_best, BackendDescriptor, GeneratedResponse};
use kgdf_core::grounding::{
    annotate, build_knowledge_lexicon, build_situation_lexicon, GroundingAnnotation, Label, NORMALIZATION_VERSION,
    STOPWORDS,
};
use kgdf_core::ingest::{extract_triples_pattern, parse_profile_page, CurationQueue, Decision, RuleSet};
use kgdf_core::kg::{parse_triple, serialize_triple, Depth, KnowledgeGraph, Ontology, Triple};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;
const PROPERTY_CASES: u32 = 256;
const MIN_CASES: usize = 200;

/// Name, time limit and check of one criterion.
type Criterion = (&'static str, Option<Duration>, fn());

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("sabrina profile round trip", Some(Duration::from_secs(1)), sabrina_round_trip),
        ("battle matrix 65 responses / 13 selections", Some(Duration::from_secs(5)), battle_matrix),
        ("persona matrix 70 tasks, 120 accepted", Some(Duration::from_secs(5)), persona_matrix),
        ("grounding oracle equivalence", Some(Duration::from_secs(30)), grounding_oracle),
        ("stats fixture histogram and persona ranking", Some(Duration::from_secs(1)), stats_fixture),
        ("determinism of persisted artifacts", None, determinism),
        ("identification macro F-score", None, identification),
        ("property suites >= 200 cases", None, property_suites),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let slow = limit.is_some_and(|l| elapsed >= l);
        let limit_text = limit.map_or_else(String::new, |l| format!(" limit {:.0?}", l));
        let verdict = match (&outcome, slow) {
            (Ok(()), false) => "PASS",
            _ => "FAIL",
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        let reason = match outcome {
            Err(e) => format!(
                " ({})",
                e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
            ),
            Ok(()) if slow => " (too slow)".to_string(),
            Ok(()) => String::new(),
        };
        println!("{verdict} [{}] {name}: {:.3?}{limit_text}{reason}", i + 1, elapsed);
    }
    println!("acceptance: {} of 8 criteria pass", 8 - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}

fn sabrina_triples() -> HashSet<Triple> {
    [
        "(Sabrina, has_gender, female)",
        "(Sabrina, has_outfit, a small red and dress black in the middle at the waist)",
        "(Sabrina, has_height, slim young woman)",
        "(Sabrina, has_pokemon, Mr. Mime)",
    ]
    .into_iter()
    .map(|l| parse_triple(l).unwrap())
    .collect()
}

fn sabrina_round_trip() {
    let raw = fs::read_to_string(data("profiles/sabrina.txt")).unwrap();
    let parsed = parse_profile_page(&raw, "Sabrina", "Character", "sabrina.txt").unwrap();
    let rules = RuleSet::load(data("rules/pokemon.rules")).unwrap();
    let ontology = Ontology::parse(&fs::read_to_string(data("ontology/pokemon.ont")).unwrap()).unwrap();
    let mut kg = KnowledgeGraph::new(Arc::new(ontology));
    let mut queue = CurationQueue::new();
    queue.extend(extract_triples_pattern(&parsed.profile, &rules));
    let ids: Vec<usize> = queue.pending().map(|(id, _)| id).collect();
    for id in ids {
        queue.decide(id, Decision::Accept, None, &kg).unwrap();
    }
    queue.promote_accepted(&mut kg);
    let got: HashSet<Triple> = kg.triples().cloned().collect();
    assert_eq!(got, sabrina_triples());
}

fn battle_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let report = run("battles", dir.path());
    let selections: Vec<SelectionRecord> = read_jsonl(&dir.path().join(SELECTIONS_FILE)).unwrap();
    let responses: Vec<GeneratedResponse> = read_jsonl(&dir.path().join("responses.jsonl")).unwrap();
    assert_eq!(report.scenarios, 13);
    assert_eq!((responses.len(), selections.len()), (65, 13));
    assert!(report.failures.is_empty());
}

const S1: &str = "Red's response adequately expresses Red's personality";
const S2: &str = "Red's response is reasonable and fits in conversation";

fn persona_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let items = persona_items(dir.path());
    let (campaign, _) = create_campaign("red-personas", &items, &fixed_clock()).unwrap();
    assert_eq!(campaign.tasks.len(), 70);
    let npcs: HashSet<&str> = campaign.tasks.iter().map(|t| t.counterpart.as_str()).collect();
    let personas: HashSet<&str> = campaign.tasks.iter().map(|t| t.persona_key.as_str()).collect();
    assert_eq!((npcs.len(), personas.len()), (14, 5));
    for t in &campaign.tasks {
        assert_eq!((t.statements[0].text.as_str(), t.statements[1].text.as_str()), (S1, S2));
    }

    let responses: Vec<GeneratedResponse> = read_jsonl(&dir.path().join("personas-run/responses.jsonl")).unwrap();
    let selections: Vec<SelectionRecord> = read_jsonl(&dir.path().join("personas-run").join(SELECTIONS_FILE)).unwrap();
    let mut all = kgdf::pipeline::campaign_items_from_responses(&responses, &selections).unwrap();
    all.truncate(120);
    let (big, _) = create_campaign("red-120", &all, &fixed_clock()).unwrap();
    assert_eq!(big.tasks.len(), 120);
}

fn grounding_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(4);
    let mut checked = 0;
    let mut lexicons = Vec::new();
    for name in ["battles", "personas"] {
        let set = scenarios(name);
        let out = dir.path().join(name);
        run_pipeline(&ctx, &set, &backend(), &fixed_clock(), &out).unwrap();
        let records: Vec<AnnotationRecord> = read_jsonl(&out.join(ANNOTATIONS_FILE)).unwrap();
        let mut by_scenario = BTreeMap::new();
        for s in &set.scenarios {
            let bundle = ctx.bundle_for(&set.game, s).unwrap();
            let k = build_knowledge_lexicon(&bundle.triples());
            let sl = build_situation_lexicon(bundle.scenario_text());
            by_scenario.insert(s.id.clone(), (k, sl, bundle.triples()));
        }
        for r in &records {
            let (k, s, _) = &by_scenario[&r.scenario_id];
            assert_eq!(oracle::observed(&r.annotation), oracle::brute_force(&r.text, k, s), "{}", r.response_id);
            assert_eq!(annotate(&r.text, k, s).for_response(&r.response_id), r.annotation);
            checked += 1;
        }
        lexicons.extend(by_scenario.into_values());
    }
    assert_eq!(checked, 65 + 350);

    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let noise = ["Hey", "core", "let's", "GO", "naïve", "well-timed", "42", "don’t", "x"];
    let seps = [" ", " ", ", ", "! ", "-", "'", "\n", "...", "\u{2014}"];
    for n in 0..500 {
        let (k, s, triples) = &lexicons[n % lexicons.len()];
        let vocab: Vec<String> = triples.iter().map(|t| t.object().to_string()).collect();
        let mut text = String::new();
        while text.chars().count() < 200 && rng.random_bool(0.97) {
            let w = match rng.random_range(0..3) {
                0 => vocab[rng.random_range(0..vocab.len())].clone(),
                1 => STOPWORDS[rng.random_range(0..STOPWORDS.len())].to_string(),
                _ => noise[rng.random_range(0..noise.len())].to_string(),
            };
            text.push_str(&w);
            text.push_str(seps[rng.random_range(0..seps.len())]);
        }
        let text: String = text.chars().take(200).collect();
        assert_eq!(oracle::observed(&annotate(&text, k, s)), oracle::brute_force(&text, k, s), "random {n}: {text:?}");
    }

    let spans_of = |dir: &std::path::Path, id_prefix: &str| -> (String, GroundingAnnotation) {
        let records: Vec<AnnotationRecord> = read_jsonl(&dir.join(ANNOTATIONS_FILE)).unwrap();
        let r = records.into_iter().find(|r| r.response_id.starts_with(id_prefix) && r.response_id.ends_with("-c0")).unwrap();
        (r.text, r.annotation)
    };
    let labeled = |text: &str, a: &GroundingAnnotation| -> Vec<(String, Label)> {
        let chars: Vec<char> = text.chars().collect();
        a.spans.iter().map(|s| (chars[s.start..s.end].iter().collect(), s.label)).collect()
    };
    let (text, a) = spans_of(&dir.path().join("battles"), "ss-5-");
    assert!(labeled(&text, &a).contains(&("auto-repair".into(), Label::Knowledge)));
    let (text, a) = spans_of(&dir.path().join("personas"), "brock-talkative-");
    let l = labeled(&text, &a);
    assert!(l.contains(&("Geodude".into(), Label::Knowledge)) && l.contains(&("Onix".into(), Label::Knowledge)));
    let (text, a) = spans_of(&dir.path().join("battles"), "ss-1-");
    let region = text[..text.find("pull back!").unwrap() + "pull back!".len()].chars().count();
    let inside: Vec<_> = a.spans.iter().filter(|s| s.start < region).collect();
    assert!(inside.iter().any(|s| s.label == Label::Situation));
    assert!(inside.iter().all(|s| s.label == Label::Situation));
}

fn items(personas: &[&str]) -> Vec<CampaignItem> {
    personas
        .iter()
        .enumerate()
        .map(|(i, p)| CampaignItem {
            response_id: format!("resp-{i:03}"),
            speaker: "Red".into(),
            persona_key: p.to_string(),
            persona: p.to_string(),
            counterpart: "Brock".into(),
            context: "I'm Brock! I'm Pewter's Gym Leader!".into(),
            response: format!("line {i}"),
        })
        .collect()
}

fn rating(task: &EvalTask, evaluator: &str, s1: f64, s2: f64) -> Rating {
    Rating { task_id: task.task_id.clone(), evaluator: evaluator.into(), s1, s2, timestamp: Utc::now() }
}

fn stats_fixture() {
    // 120 responses, two evaluators each; the pair means fall in the bands
    // 4.5-5.0 (55), 3.5-4.5 (33), 2.5-3.5 (22) and below 2.5 (10).
    let bands: [(usize, (f64, f64)); 4] = [(55, (5.0, 4.0)), (33, (4.0, 4.0)), (22, (3.0, 2.5)), (10, (1.5, 2.0))];
    let personas = ["mature", "amateur", "talkative", "timid", "confident"];
    let names: Vec<&str> = (0..120).map(|i| personas[i % 5]).collect();
    let (campaign, _) = create_campaign("hist", &items(&names), &fixed_clock()).unwrap();
    let mut ratings = Vec::new();
    let mut tasks = campaign.tasks.iter();
    for (count, (a, b)) in bands {
        for t in tasks.by_ref().take(count) {
            ratings.push(rating(t, "e1", a, 3.0));
            ratings.push(rating(t, "e2", b, 3.0));
        }
    }
    let stats = compute_stats(&campaign.tasks, &ratings).unwrap();
    assert_eq!(stats.histograms.s1, [10, 22, 33, 55]);
    assert_eq!(stats.histograms.s2, [0, 120, 0, 0]);
    assert_eq!(stats.response_count, 120);

    // Two responses per persona; hand-computed persona means below.
    let scores: [(&str, [(f64, f64); 2]); 5] = [
        ("talkative", [(5.0, 4.5), (5.0, 5.0)]),
        ("confident", [(4.5, 4.0), (4.0, 4.0)]),
        ("timid", [(4.0, 3.5), (4.0, 4.5)]),
        ("amateur", [(3.0, 3.5), (3.5, 3.5)]),
        ("mature", [(2.0, 2.5), (3.0, 2.5)]),
    ];
    let expected = [("talkative", 4.875), ("confident", 4.125), ("timid", 4.0), ("amateur", 3.375), ("mature", 2.5)];
    let names: Vec<&str> = scores.iter().flat_map(|(p, _)| [*p, *p]).collect();
    let (campaign, _) = create_campaign("rank", &items(&names), &fixed_clock()).unwrap();
    let mut ratings = Vec::new();
    for (pair, task) in scores.iter().flat_map(|(_, pairs)| pairs.iter()).zip(&campaign.tasks) {
        ratings.push(rating(task, "e1", pair.0, pair.0 - 0.5));
        ratings.push(rating(task, "e2", pair.1, pair.1 - 0.5));
    }
    let ranking = rank_personas(&compute_stats(&campaign.tasks, &ratings).unwrap());
    for (statement, offset) in [(&ranking.s1, 0.0), (&ranking.s2, 0.5)] {
        let order: Vec<&str> = statement.iter().map(|r| r.persona.as_str()).collect();
        assert_eq!(order, expected.map(|e| e.0));
        for (got, (_, mean)) in statement.iter().zip(expected) {
            assert!((got.mean - (mean - offset)).abs() < TOL, "{} {}", got.persona, got.mean);
        }
    }
}

fn determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, parallelism) in [(a.path(), 1), (b.path(), 8)] {
        for name in ["battles", "personas"] {
            run_pipeline(&context(parallelism), &scenarios(name), &backend(), &SystemClock, &dir.join(name)).unwrap();
        }
    }
    let normalized = |root: &std::path::Path| -> Vec<(std::path::PathBuf, Vec<u8>)> {
        tree(root)
            .into_iter()
            .map(|(p, bytes)| {
                if p.extension().is_some_and(|e| e == "jsonl") {
                    let lines: Vec<String> =
                        stripped_jsonl(&root.join(&p)).iter().map(|v| v.to_string()).collect();
                    (p, lines.join("\n").into_bytes())
                } else {
                    (p, bytes)
                }
            })
            .collect()
    };
    let (ta, tb) = (normalized(a.path()), normalized(b.path()));
    assert_eq!(ta.len(), tb.len());
    assert!(ta == tb, "artifacts differ outside timestamp fields");
}

fn ident_task(i: usize, truth: &str, answer: &str, options: &[&str]) -> IdentificationTask {
    IdentificationTask {
        task_id: format!("t{i}"),
        response: format!("line {i}"),
        true_speaker: truth.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
        seed: i as u64,
        answer: Some(answer.into()),
    }
}

fn identification() {
    let cast = ["Cloud", "Tifa", "Barret", "Aerith"];
    let truths = ["Cloud", "Cloud", "Tifa", "Barret"];
    let all_correct: Vec<_> = truths.iter().enumerate().map(|(i, t)| ident_task(i, t, t, &cast)).collect();
    assert!((score_identification(&all_correct).unwrap().macro_f1 - 1.0).abs() < TOL);

    let fixed_wrong: Vec<_> = truths.iter().enumerate().map(|(i, t)| ident_task(i, t, "Aerith", &cast)).collect();
    assert!(score_identification(&fixed_wrong).unwrap().macro_f1.abs() < TOL);

    // Cloud: tp 3, fp 3, fn 2 -> F1 6/11. Tifa: tp 2, fp 2, fn 3 -> F1 4/9.
    let pair = ["Cloud", "Tifa"];
    let cloud = ["Cloud", "Cloud", "Tifa", "Cloud", "Tifa"];
    let tifa = ["Tifa", "Cloud", "Tifa", "Cloud", "Cloud"];
    let chance: Vec<_> = cloud
        .iter()
        .map(|a| ("Cloud", *a))
        .chain(tifa.iter().map(|a| ("Tifa", *a)))
        .enumerate()
        .map(|(i, (t, a))| ident_task(i, t, a, &pair))
        .collect();
    let score = score_identification(&chance).unwrap();
    assert!((score.macro_f1 - 49.0 / 99.0).abs() < TOL, "{}", score.macro_f1);
}

fn check<S: proptest::strategy::Strategy>(name: &str, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>)
where
    S::Value: std::fmt::Debug,
{
    let cases = AtomicUsize::new(0);
    let mut runner = TestRunner::new(Config { cases: PROPERTY_CASES, failure_persistence: None, ..Config::default() });
    runner
        .run(&strategy, |v| {
            cases.fetch_add(1, Ordering::Relaxed);
            test(v)
        })
        .unwrap_or_else(|e| panic!("{name}: {e}"));
    let n = cases.load(Ordering::Relaxed);
    assert!(n >= MIN_CASES, "{name}: only {n} cases");
}

fn response(i: usize) -> GeneratedResponse {
    GeneratedResponse {
        id: format!("r{i}"),
        text: format!("line {i}"),
        scenario_id: "s".into(),
        prompt_hash: "h".into(),
        template_version: "v".into(),
        candidate_index: i,
        batch_size: 0,
        backend: BackendDescriptor::Scripted { fixture: "f".into() },
        timestamp: Utc::now(),
    }
}

fn with_knowledge(k: usize) -> GroundingAnnotation {
    GroundingAnnotation {
        response: String::new(),
        spans: Vec::new(),
        knowledge_tokens: k,
        situation_tokens: 0,
        normalization: NORMALIZATION_VERSION.into(),
    }
}

fn property_suites() {
    check(
        "triple round trip",
        ("[A-Za-z(][A-Za-z0-9 ()._'-]{0,20}", "[a-z_]{1,12}", "[A-Za-z0-9 (),.'%-]{1,40}"),
        |(s, p, o)| {
            if s.trim().is_empty() || o.trim().is_empty() {
                return Ok(());
            }
            let t = Triple::new(&s, &p, &o).unwrap();
            let back = parse_triple(&serialize_triple(&t)).unwrap();
            prop_assert_eq!((back.subject(), back.predicate(), back.object()), (t.subject(), t.predicate(), t.object()));
            Ok(())
        },
    );

    let names = ["Ash", "Misty", "Brock", "Onix", "Pikachu", "Raichu", "Eevee"];
    let ontology = Arc::new(
        Ontology::parse(
            "game toy\nconcept Character\nconcept Pokemon\n\
             relation has_gender : Character -> literal\n\
             relation has_pokemon : Character -> Pokemon\n\
             relation evolves_to : Pokemon -> Pokemon\n",
        )
        .unwrap(),
    );
    let relations = [("has_gender", false), ("has_pokemon", true), ("evolves_to", true)];
    check(
        "subgraph vs linear scan",
        (prop::collection::vec((0..7usize, 0..3usize, 0..7usize), 0..40), 0..7usize, any::<bool>()),
        |(facts, e, two)| {
            let mut kg = KnowledgeGraph::new(Arc::clone(&ontology));
            for (s, r, o) in facts {
                let _ = kg.insert(Triple::new(names[s], relations[r].0, names[o]).unwrap());
            }
            let all: Vec<&Triple> = kg.triples().collect();
            let known: HashSet<&str> = all
                .iter()
                .flat_map(|t| {
                    let ranged = relations.iter().any(|(r, c)| *c && *r == t.predicate());
                    std::iter::once(t.subject()).chain(ranged.then_some(t.object()))
                })
                .collect();
            let depth = if two { Depth::Two } else { Depth::One };
            let Ok(got) = kg.subgraph(names[e], depth) else {
                prop_assert!(!known.contains(names[e]));
                return Ok(());
            };
            let mut subjects: HashSet<&str> = HashSet::from([names[e]]);
            if two {
                subjects.extend(all.iter().filter(|t| t.subject() == names[e] && known.contains(t.object())).map(|t| t.object()));
            }
            let expected: HashSet<Triple> = all.iter().filter(|t| subjects.contains(t.subject())).map(|t| (*t).clone()).collect();
            prop_assert_eq!(got.len(), expected.len());
            prop_assert_eq!(got.into_iter().collect::<HashSet<_>>(), expected);
            Ok(())
        },
    );

    let rating_sets = (1usize..10).prop_flat_map(|n| {
        (Just(n), prop::collection::vec((0..n, 0usize..5, 2u8..=10, 2u8..=10), 0..40), any::<u64>())
    });
    let build = |n: usize, raw: &[(usize, usize, u8, u8)]| {
        let personas = ["mature", "amateur", "talkative", "timid", "confident"];
        let names: Vec<&str> = (0..n).map(|i| personas[i % 5]).collect();
        let (campaign, _) = create_campaign("p", &items(&names), &fixed_clock()).unwrap();
        let mut seen = HashSet::new();
        let ratings: Vec<Rating> = raw
            .iter()
            .filter(|(t, e, _, _)| seen.insert((*t, *e)))
            .map(|&(t, e, a, b)| rating(&campaign.tasks[t], &format!("e{e}"), f64::from(a) / 2.0, f64::from(b) / 2.0))
            .collect();
        (campaign.tasks, ratings)
    };
    check("histogram conservation", rating_sets.clone(), |(n, raw, _)| {
        let (tasks, ratings) = build(n, &raw);
        let rated: HashSet<&str> = ratings.iter().map(|r| r.task_id.as_str()).collect();
        match compute_stats(&tasks, &ratings) {
            Err(EvalError::NoRatings) => prop_assert!(rated.is_empty()),
            Err(e) => prop_assert!(false, "{}", e),
            Ok(stats) => {
                prop_assert_eq!(stats.histograms.s1.iter().sum::<usize>(), rated.len());
                prop_assert_eq!(stats.histograms.s2.iter().sum::<usize>(), rated.len());
            }
        }
        Ok(())
    });
    check("rating order invariance", rating_sets, |(n, raw, seed)| {
        use rand::seq::SliceRandom;
        let (tasks, ratings) = build(n, &raw);
        let mut shuffled = ratings.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(compute_stats(&tasks, &ratings).ok(), compute_stats(&tasks, &shuffled).ok());
        Ok(())
    });

    check("select_best tie-breaking", prop::collection::vec(0usize..5, 1..12), |counts| {
        let candidates: Vec<GeneratedResponse> = (0..counts.len()).map(response).collect();
        let annotations: Vec<GroundingAnnotation> = counts.iter().map(|&k| with_knowledge(k)).collect();
        let chosen = select_best(&candidates, &annotations, kgdf_core::generate::Strategy::Grounding).unwrap().chosen;
        let max = counts.iter().copied().max().unwrap();
        prop_assert_eq!(chosen, counts.iter().position(|&c| c == max).unwrap());
        Ok(())
    });
}
