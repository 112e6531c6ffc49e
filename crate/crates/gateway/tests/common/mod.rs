#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use kgdf::config::ServiceConfig;
use kgdf::pipeline::{read_jsonl, run_pipeline, PipelineContext, RunReport, SelectionRecord, SELECTIONS_FILE};
use kgdf::load_context;
use kgdf_core::clock::FixedClock;
use kgdf_core::eval::CampaignItem;
use kgdf_core::generate::ScriptedBackend;
use kgdf_core::prompt::ScenarioSet;
use serde_json::Value;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn data(rel: &str) -> PathBuf {
    root().join("crates/core/data").join(rel)
}

pub fn fixed_clock() -> FixedClock {
    FixedClock(Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap())
}

/// An offline config over the shipped data, writing into `data_dir`.
pub fn config_text(data_dir: &Path, parallelism: usize, operator: bool) -> String {
    let operator = if operator { "operator_token = \"op-secret\"\n" } else { "" };
    format!(
        r#"[service]
listen = "127.0.0.1:18080"
data_dir = "{data_dir}"
campaign = "red-personas"
bearer_token = "eval-secret"
{operator}
[backend]
kind = "scripted"
fixture = "{fixture}"

[generation]
candidates = 5
parallelism = {parallelism}

[paths]
kg = {{ ffviir = "{ffviir}", pokemon = "{pokemon}" }}
"#,
        data_dir = data_dir.display(),
        fixture = data("fixtures/offline.json").display(),
        ffviir = data("kg/ffviir.kg").display(),
        pokemon = data("kg/pokemon.kg").display(),
    )
}

pub fn config(data_dir: &Path, parallelism: usize) -> ServiceConfig {
    ServiceConfig::parse(&config_text(data_dir, parallelism, true), Path::new("/")).unwrap()
}

pub fn context(parallelism: usize) -> PipelineContext {
    load_context(&config(Path::new("/tmp"), parallelism)).unwrap()
}

pub fn backend() -> ScriptedBackend {
    ScriptedBackend::load(data("fixtures/offline.json")).unwrap()
}

pub fn fixtures() -> HashMap<String, Vec<String>> {
    backend().fixtures().clone()
}

pub fn scenarios(name: &str) -> ScenarioSet {
    ScenarioSet::load(data(&format!("scenarios/{name}.json"))).unwrap()
}

pub fn run(name: &str, out: &Path) -> RunReport {
    run_pipeline(&context(4), &scenarios(name), &backend(), &fixed_clock(), out).unwrap()
}

/// Campaign items for the 70 persona selections.
pub fn persona_items(work: &Path) -> Vec<CampaignItem> {
    let out = work.join("personas-run");
    run("personas", &out);
    let selections: Vec<SelectionRecord> = read_jsonl(&out.join(SELECTIONS_FILE)).unwrap();
    selections.iter().map(SelectionRecord::campaign_item).collect()
}

/// Drops every `timestamp` and `created` field, recursively.
pub fn strip_timestamps(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("timestamp");
            map.remove("created");
            map.values_mut().for_each(strip_timestamps);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timestamps),
        _ => {}
    }
}

/// JSON-lines file with timestamp fields removed.
pub fn stripped_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            strip_timestamps(&mut v);
            v
        })
        .collect()
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn shared<T>(t: T) -> Arc<T> {
    Arc::new(t)
}
