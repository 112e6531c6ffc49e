use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::campaign::{check_score, Campaign, EvalTask, Rating, StatementId};
use super::stats::{compute_stats, CampaignStats};
use super::EvalError;
use crate::clock::Clock;

/// One line of the campaign log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Campaign { id: String, created: DateTime<Utc> },
    Task(EvalTask),
    Rating(Rating),
}

fn encode(record: &Record) -> String {
    let mut line = serde_json::to_string(record).expect("records serialize");
    line.push('\n');
    line
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub evaluator: String,
    pub rated: usize,
    pub total: usize,
}

struct Inner {
    ratings: Vec<Rating>,
    rated: HashSet<(String, String)>,
    file: File,
}

/// A campaign persisted as an append-only JSON-lines log.
///
/// All writes go through one mutex, and every rating is flushed to disk
/// before it is acknowledged, so a restart never loses a committed rating.
pub struct CampaignStore {
    path: PathBuf,
    campaign: Campaign,
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for CampaignStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CampaignStore").field("path", &self.path).field("campaign", &self.campaign.id).finish()
    }
}

impl CampaignStore {
    /// Writes a new campaign log. Fails if the file already exists.
    pub fn create(path: impl AsRef<Path>, campaign: Campaign, clock: Arc<dyn Clock>) -> Result<Self, EvalError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().append(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                EvalError::CampaignExists(path.display().to_string())
            } else {
                EvalError::Io(e)
            }
        })?;
        let mut text = encode(&Record::Campaign { id: campaign.id.clone(), created: campaign.created });
        for t in &campaign.tasks {
            text.push_str(&encode(&Record::Task(t.clone())));
        }
        file.write_all(text.as_bytes())?;
        file.sync_all()?;
        Ok(Self { path, campaign, inner: Mutex::new(Inner { ratings: Vec::new(), rated: HashSet::new(), file }), clock })
    }

    /// Replays an existing campaign log.
    pub fn open(path: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, EvalError> {
        let path = path.as_ref().to_path_buf();
        let text = fs::read_to_string(&path)?;
        let mut header = None;
        let mut tasks = Vec::new();
        let mut ratings = Vec::new();
        let mut rated = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |reason: String| EvalError::CorruptStore { line: i + 1, reason };
            let record: Record = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
            match record {
                Record::Campaign { id, created } => {
                    if header.replace((id, created)).is_some() {
                        return Err(corrupt("second campaign header".into()));
                    }
                }
                Record::Task(t) => tasks.push(t),
                Record::Rating(r) => {
                    if !rated.insert((r.task_id.clone(), r.evaluator.clone())) {
                        return Err(corrupt(format!("duplicate rating of {} by {}", r.task_id, r.evaluator)));
                    }
                    ratings.push(r);
                }
            }
        }
        let (id, created) = header.ok_or_else(|| EvalError::CorruptStore { line: 1, reason: "missing campaign header".into() })?;
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(Self { path, campaign: Campaign { id, created, tasks }, inner: Mutex::new(Inner { ratings, rated, file }), clock })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn campaign(&self) -> &Campaign {
        &self.campaign
    }

    pub fn task(&self, task_id: &str) -> Option<&EvalTask> {
        self.campaign.task(task_id)
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Validates and durably appends one rating, returning what was stored.
    pub fn submit_rating(&self, task_id: &str, evaluator: &str, s1: f64, s2: f64) -> Result<Rating, EvalError> {
        if self.task(task_id).is_none() {
            return Err(EvalError::UnknownTask(task_id.to_string()));
        }
        let evaluator = evaluator.trim();
        if evaluator.is_empty() || evaluator.chars().any(char::is_control) {
            return Err(EvalError::InvalidEvaluator(evaluator.to_string()));
        }
        check_score(StatementId::S1, s1)?;
        check_score(StatementId::S2, s2)?;

        let mut inner = self.lock();
        let key = (task_id.to_string(), evaluator.to_string());
        if inner.rated.contains(&key) {
            return Err(EvalError::DuplicateRating { task_id: key.0, evaluator: key.1 });
        }
        let rating = Rating { task_id: key.0.clone(), evaluator: key.1.clone(), s1, s2, timestamp: self.clock.now() };
        inner.file.write_all(encode(&Record::Rating(rating.clone())).as_bytes())?;
        inner.file.sync_data()?;
        inner.rated.insert(key);
        inner.ratings.push(rating.clone());
        Ok(rating)
    }

    pub fn ratings(&self) -> Vec<Rating> {
        self.lock().ratings.clone()
    }

    /// The unrated task with the lowest id for this evaluator.
    pub fn next_task(&self, evaluator: &str) -> Option<EvalTask> {
        let inner = self.lock();
        let evaluator = evaluator.trim();
        self.campaign
            .tasks
            .iter()
            .filter(|t| !inner.rated.contains(&(t.task_id.clone(), evaluator.to_string())))
            .min_by(|a, b| a.task_id.cmp(&b.task_id))
            .cloned()
    }

    pub fn progress(&self, evaluator: &str) -> Progress {
        let inner = self.lock();
        let evaluator = evaluator.trim();
        let rated = inner.ratings.iter().filter(|r| r.evaluator == evaluator).count();
        Progress { evaluator: evaluator.to_string(), rated, total: self.campaign.tasks.len() }
    }

    /// Statistics over a consistent snapshot of the ratings.
    pub fn stats(&self) -> Result<CampaignStats, EvalError> {
        let ratings = self.ratings();
        compute_stats(&self.campaign.tasks, &ratings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FixedClock;
    use crate::eval::{create_campaign, CampaignItem};
    use chrono::TimeZone;

    fn clock() -> Arc<dyn Clock> {
        Arc::new(FixedClock(Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap()))
    }

    fn campaign(n: usize) -> Campaign {
        let items: Vec<_> = (0..n)
            .map(|i| CampaignItem {
                response_id: format!("r{i}"),
                speaker: "Red".into(),
                persona_key: "timid".into(),
                persona: "timid".into(),
                counterpart: "Misty".into(),
                context: "ctx".into(),
                response: "resp".into(),
            })
            .collect();
        create_campaign("c1", &items, clock().as_ref()).unwrap().0
    }

    #[test]
    fn ratings_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c1.jsonl");
        let c = campaign(3);
        let first = c.tasks[0].task_id.clone();
        {
            let store = CampaignStore::create(&path, c.clone(), clock()).unwrap();
            let receipt = store.submit_rating(&first, "eval-A", 4.5, 4.0).unwrap();
            assert_eq!((receipt.s1, receipt.s2), (4.5, 4.0));
        }
        let store = CampaignStore::open(&path, clock()).unwrap();
        assert_eq!(store.campaign(), &c);
        assert_eq!(store.ratings().len(), 1);
        assert!(matches!(store.submit_rating(&first, "eval-A", 3.0, 3.0), Err(EvalError::DuplicateRating { .. })));
        assert!(matches!(CampaignStore::create(&path, c, clock()), Err(EvalError::CampaignExists(_))));
    }

    #[test]
    fn rejections_leave_no_trace() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c1.jsonl");
        let c = campaign(1);
        let id = c.tasks[0].task_id.clone();
        let store = CampaignStore::create(&path, c, clock()).unwrap();
        let before = fs::read(&path).unwrap();
        assert!(matches!(store.submit_rating("t-nope", "a", 3.0, 3.0), Err(EvalError::UnknownTask(_))));
        assert!(matches!(store.submit_rating(&id, "a", 4.3, 3.0), Err(EvalError::ScoreNotHalfStep { .. })));
        assert!(matches!(store.submit_rating(&id, "a", 3.0, 6.0), Err(EvalError::ScoreOutOfRange { .. })));
        assert!(matches!(store.submit_rating(&id, " ", 3.0, 3.0), Err(EvalError::InvalidEvaluator(_))));
        assert_eq!(fs::read(&path).unwrap(), before);
    }

    #[test]
    fn next_task_is_lowest_unrated() {
        let dir = tempfile::tempdir().unwrap();
        let c = campaign(4);
        let mut ids: Vec<_> = c.tasks.iter().map(|t| t.task_id.clone()).collect();
        ids.sort();
        let store = CampaignStore::create(dir.path().join("c.jsonl"), c, clock()).unwrap();
        assert_eq!(store.next_task("a").unwrap().task_id, ids[0]);
        store.submit_rating(&ids[0], "a", 3.0, 3.0).unwrap();
        assert_eq!(store.next_task("a").unwrap().task_id, ids[1]);
        assert_eq!(store.next_task("b").unwrap().task_id, ids[0]);
        for id in &ids[1..] {
            store.submit_rating(id, "a", 3.0, 3.0).unwrap();
        }
        assert!(store.next_task("a").is_none());
        assert_eq!(store.progress("a"), Progress { evaluator: "a".into(), rated: 4, total: 4 });
    }

    #[test]
    fn concurrent_duplicates_store_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let c = campaign(1);
        let id = c.tasks[0].task_id.clone();
        let store = Arc::new(CampaignStore::create(&path, c, clock()).unwrap());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let store = Arc::clone(&store);
                let id = id.clone();
                std::thread::spawn(move || store.submit_rating(&id, "same", 4.0, 4.0).is_ok())
            })
            .collect();
        let ok = handles.into_iter().map(|h| h.join().unwrap()).filter(|ok| *ok).count();
        assert_eq!(ok, 1);
        assert_eq!(CampaignStore::open(&path, clock()).unwrap().ratings().len(), 1);
    }

    #[test]
    fn corrupt_log_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        CampaignStore::create(&path, campaign(1), clock()).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{not json\n");
        fs::write(&path, text).unwrap();
        assert!(matches!(CampaignStore::open(&path, clock()), Err(EvalError::CorruptStore { line: 3, .. })));
    }
}
