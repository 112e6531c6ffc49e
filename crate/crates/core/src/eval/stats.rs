use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::campaign::{EvalTask, Rating, StatementId};
use super::EvalError;

/// Lower edges of the upper three histogram bins. A mean falls into the
/// highest bin whose edge it reaches; the top bin is closed at 5.0.
pub const BIN_EDGES: [f64; 3] = [2.5, 3.5, 4.5];
pub const BIN_LABELS: [&str; 4] = ["1.0-2.5", "2.5-3.5", "3.5-4.5", "4.5-5.0"];

pub fn bin_of(mean: f64) -> usize {
    BIN_EDGES.iter().take_while(|&&edge| mean >= edge).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMeans {
    pub task_id: String,
    pub response_id: String,
    pub persona_key: String,
    pub counterpart: String,
    pub ratings: usize,
    pub s1: f64,
    pub s2: f64,
}

impl ResponseMeans {
    pub fn mean(&self, statement: StatementId) -> f64 {
        match statement {
            StatementId::S1 => self.s1,
            StatementId::S2 => self.s2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaMeans {
    pub persona: String,
    pub responses: usize,
    pub s1: f64,
    pub s2: f64,
}

impl PersonaMeans {
    pub fn mean(&self, statement: StatementId) -> f64 {
        match statement {
            StatementId::S1 => self.s1,
            StatementId::S2 => self.s2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histograms {
    pub s1: [usize; 4],
    pub s2: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub task_count: usize,
    pub rating_count: usize,
    /// Responses with at least one rating.
    pub response_count: usize,
    pub bins: [String; 4],
    pub histograms: Histograms,
    /// Sorted by task id.
    pub responses: Vec<ResponseMeans>,
    /// Sorted by persona key.
    pub personas: Vec<PersonaMeans>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Aggregates ratings: evaluator means per response, histograms over those
/// means, and persona means over response means.
///
/// Ratings for tasks not in `tasks` are ignored. The result does not depend on
/// the order of `ratings`.
pub fn compute_stats(tasks: &[EvalTask], ratings: &[Rating]) -> Result<CampaignStats, EvalError> {
    let by_id: BTreeMap<&str, &EvalTask> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let mut grouped: BTreeMap<&str, Vec<&Rating>> = BTreeMap::new();
    for r in ratings {
        if by_id.contains_key(r.task_id.as_str()) {
            grouped.entry(r.task_id.as_str()).or_default().push(r);
        }
    }
    if grouped.is_empty() {
        return Err(EvalError::NoRatings);
    }

    let mut responses = Vec::with_capacity(grouped.len());
    for (task_id, rs) in &grouped {
        // Sorting makes float summation independent of submission order.
        let mut s1: Vec<f64> = rs.iter().map(|r| r.s1).collect();
        let mut s2: Vec<f64> = rs.iter().map(|r| r.s2).collect();
        s1.sort_by(f64::total_cmp);
        s2.sort_by(f64::total_cmp);
        let task = by_id[task_id];
        responses.push(ResponseMeans {
            task_id: task.task_id.clone(),
            response_id: task.response_id.clone(),
            persona_key: task.persona_key.clone(),
            counterpart: task.counterpart.clone(),
            ratings: rs.len(),
            s1: mean(s1),
            s2: mean(s2),
        });
    }

    let mut histograms = Histograms { s1: [0; 4], s2: [0; 4] };
    for r in &responses {
        histograms.s1[bin_of(r.s1)] += 1;
        histograms.s2[bin_of(r.s2)] += 1;
    }

    let mut by_persona: BTreeMap<&str, Vec<&ResponseMeans>> = BTreeMap::new();
    for r in &responses {
        by_persona.entry(r.persona_key.as_str()).or_default().push(r);
    }
    let personas = by_persona
        .into_iter()
        .map(|(persona, rs)| PersonaMeans {
            persona: persona.to_string(),
            responses: rs.len(),
            s1: mean(rs.iter().map(|r| r.s1)),
            s2: mean(rs.iter().map(|r| r.s2)),
        })
        .collect();

    Ok(CampaignStats {
        task_count: tasks.len(),
        rating_count: grouped.values().map(Vec::len).sum(),
        response_count: responses.len(),
        bins: BIN_LABELS.map(String::from),
        histograms,
        responses,
        personas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPersona {
    pub persona: String,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaRanking {
    pub s1: Vec<RankedPersona>,
    pub s2: Vec<RankedPersona>,
}

/// Personas by descending mean for each statement; equal means sort by name.
pub fn rank_personas(stats: &CampaignStats) -> PersonaRanking {
    let rank = |statement: StatementId| {
        let mut ranked: Vec<RankedPersona> = stats
            .personas
            .iter()
            .map(|p| RankedPersona { persona: p.persona.clone(), mean: p.mean(statement) })
            .collect();
        ranked.sort_by(|a, b| match b.mean.total_cmp(&a.mean) {
            Ordering::Equal => a.persona.cmp(&b.persona),
            other => other,
        });
        ranked
    };
    PersonaRanking { s1: rank(StatementId::S1), s2: rank(StatementId::S2) }
}

/// Flat per-task table: task id, persona, counterpart, statement means and
/// rating count. Unrated tasks have empty means.
pub fn export_csv(tasks: &[EvalTask], ratings: &[Rating]) -> Result<String, EvalError> {
    let stats = compute_stats(tasks, ratings).ok();
    let means: BTreeMap<&str, &ResponseMeans> =
        stats.iter().flat_map(|s| s.responses.iter()).map(|r| (r.task_id.as_str(), r)).collect();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["task_id", "persona", "counterpart", "s1_mean", "s2_mean", "ratings"])?;
    for t in tasks {
        let (s1, s2, n) = match means.get(t.task_id.as_str()) {
            Some(m) => (m.s1.to_string(), m.s2.to_string(), m.ratings),
            None => (String::new(), String::new(), 0),
        };
        writer.write_record([t.task_id.as_str(), &t.persona_key, &t.counterpart, &s1, &s2, &n.to_string()])?;
    }
    let bytes = writer.into_inner().map_err(|e| EvalError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
