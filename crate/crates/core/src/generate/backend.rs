use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GenError;

/// Hex SHA-256 of the rendered prompt bytes; the scripted fixture key.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub prompt_hash: &'a str,
    pub candidate_index: usize,
}

/// Identifies the backend that produced a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendDescriptor {
    HttpChat { endpoint: String, model: String, temperature: f64 },
    Scripted { fixture: String },
}

/// A text-generation service answering one prompt with one completion.
pub trait GenerationBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, GenError>;

    fn descriptor(&self) -> BackendDescriptor;

    /// Number of completion requests issued so far.
    fn request_count(&self) -> u64;
}

/// Replays canned responses keyed by prompt hash. Candidate `i` of a prompt is
/// the `i`-th fixture string for that hash.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    name: String,
    fixtures: HashMap<String, Vec<String>>,
    requests: AtomicU64,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>, fixtures: HashMap<String, Vec<String>>) -> Self {
        Self { name: name.into(), fixtures, requests: AtomicU64::new(0) }
    }

    /// Reads a JSON object mapping hex prompt hash to a list of responses.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GenError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| GenError::Fixture(format!("{}: {e}", path.display())))?;
        let fixtures: HashMap<String, Vec<String>> =
            serde_json::from_str(&text).map_err(|e| GenError::Fixture(format!("{}: {e}", path.display())))?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        Ok(Self::new(name, fixtures))
    }

    pub fn fixtures(&self) -> &HashMap<String, Vec<String>> {
        &self.fixtures
    }
}

impl GenerationBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, GenError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        self.fixtures
            .get(request.prompt_hash)
            .and_then(|responses| responses.get(request.candidate_index))
            .cloned()
            .ok_or_else(|| GenError::FixtureMissing {
                prompt_hash: request.prompt_hash.to_string(),
                candidate: request.candidate_index,
            })
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::Scripted { fixture: self.name.clone() }
    }

    fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}
