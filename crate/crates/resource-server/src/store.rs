//! Document store with an append-only mutation journal.
//!
//! The journal is the source of truth: the live map is always the result of
//! replaying it, and when a journal file is attached every mutation is
//! appended to it as one JSON line before the call returns.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use permchain_core::crypto::Digest32;
use permchain_core::Permission;
use serde::{Deserialize, Serialize};

use crate::document::ClinicalTrialDocument;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("document `{0}` already exists")]
    DuplicateId(String),
    #[error("document `{0}` not found")]
    NotFound(String),
    #[error("operation {0} is not a single CRUD bit")]
    InvalidOp(Permission),
    #[error("payload required for {0}")]
    MissingPayload(Permission),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum JournalEntry {
    Create { document: ClinicalTrialDocument },
    Update { document: ClinicalTrialDocument },
    Delete { patient_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CrudOutcome {
    Created,
    Read(ClinicalTrialDocument),
    Updated,
    Deleted,
}

#[derive(Debug, Default)]
pub struct DocumentStore {
    documents: BTreeMap<String, ClinicalTrialDocument>,
    journal: Vec<JournalEntry>,
    journal_path: Option<PathBuf>,
}

impl DocumentStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (or creates) a journal file and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut journal = Vec::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry = serde_json::from_str(&line)
                    .map_err(|e| StoreError::Parse(format!("journal line {}: {e}", i + 1)))?;
                journal.push(entry);
            }
        }
        let documents = replay(&journal)?;
        Ok(Self {
            documents,
            journal,
            journal_path: Some(path),
        })
    }

    pub fn get(&self, patient_id: &str) -> Option<&ClinicalTrialDocument> {
        self.documents.get(patient_id)
    }

    pub fn documents(&self) -> &BTreeMap<String, ClinicalTrialDocument> {
        &self.documents
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Canonical serialization of the whole store, for byte-level comparison.
    pub fn snapshot(&self) -> String {
        let docs: Vec<String> = self
            .documents
            .values()
            .map(|d| d.canonical_json())
            .collect();
        format!("[{}]", docs.join(","))
    }

    fn commit(&mut self, entry: JournalEntry) -> Result<(), StoreError> {
        if let Some(path) = &self.journal_path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let line = serde_json::to_string(&entry).expect("journal entry serializes");
            writeln!(f, "{line}")?;
        }
        apply(&mut self.documents, &entry)?;
        self.journal.push(entry);
        Ok(())
    }

    /// Inserts every document of a JSON array or JSON-lines file, returning
    /// each patient id with its canonical hash. Nothing is stored if any
    /// document fails to parse or clashes with an existing id.
    pub fn ingest_dataset(
        &mut self,
        path: impl AsRef<Path>,
    ) -> Result<Vec<(String, Digest32)>, StoreError> {
        let text = std::fs::read_to_string(path)?;
        let docs = parse_dataset(&text)?;
        let mut seen = std::collections::BTreeSet::new();
        for d in &docs {
            if self.documents.contains_key(&d.patient_id) || !seen.insert(d.patient_id.clone()) {
                return Err(StoreError::DuplicateId(d.patient_id.clone()));
            }
        }
        let mut out = Vec::with_capacity(docs.len());
        for document in docs {
            out.push((document.patient_id.clone(), document.data_hash()));
            self.commit(JournalEntry::Create { document })?;
        }
        Ok(out)
    }
}

pub fn parse_dataset(text: &str) -> Result<Vec<ClinicalTrialDocument>, StoreError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| StoreError::Parse(e.to_string()));
    }
    trimmed
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Parse(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn apply(
    docs: &mut BTreeMap<String, ClinicalTrialDocument>,
    entry: &JournalEntry,
) -> Result<(), StoreError> {
    match entry {
        JournalEntry::Create { document } => {
            if docs.contains_key(&document.patient_id) {
                return Err(StoreError::DuplicateId(document.patient_id.clone()));
            }
            docs.insert(document.patient_id.clone(), document.clone());
        }
        JournalEntry::Update { document } => match docs.get_mut(&document.patient_id) {
            Some(d) => *d = document.clone(),
            None => return Err(StoreError::NotFound(document.patient_id.clone())),
        },
        JournalEntry::Delete { patient_id } => {
            if docs.remove(patient_id).is_none() {
                return Err(StoreError::NotFound(patient_id.clone()));
            }
        }
    }
    Ok(())
}

/// Rebuilds the document map from a journal.
pub fn replay(
    journal: &[JournalEntry],
) -> Result<BTreeMap<String, ClinicalTrialDocument>, StoreError> {
    let mut docs = BTreeMap::new();
    for e in journal {
        apply(&mut docs, e)?;
    }
    Ok(docs)
}

/// Runs one CRUD operation. `payload` is required for CREATE and UPDATE; its
/// patient id is overridden by `patient_id`.
pub fn crud(
    store: &mut DocumentStore,
    op: Permission,
    patient_id: &str,
    payload: Option<ClinicalTrialDocument>,
) -> Result<CrudOutcome, StoreError> {
    let with_id = |p: Option<ClinicalTrialDocument>| {
        p.map(|mut d| {
            d.patient_id = patient_id.to_string();
            d
        })
        .ok_or(StoreError::MissingPayload(op))
    };
    match op {
        Permission::CREATE => {
            let document = with_id(payload)?;
            if store.documents.contains_key(patient_id) {
                return Err(StoreError::DuplicateId(patient_id.to_string()));
            }
            store.commit(JournalEntry::Create { document })?;
            Ok(CrudOutcome::Created)
        }
        Permission::READ => store
            .get(patient_id)
            .cloned()
            .map(CrudOutcome::Read)
            .ok_or_else(|| StoreError::NotFound(patient_id.to_string())),
        Permission::UPDATE => {
            let document = with_id(payload)?;
            if !store.documents.contains_key(patient_id) {
                return Err(StoreError::NotFound(patient_id.to_string()));
            }
            store.commit(JournalEntry::Update { document })?;
            Ok(CrudOutcome::Updated)
        }
        Permission::DELETE => {
            if !store.documents.contains_key(patient_id) {
                return Err(StoreError::NotFound(patient_id.to_string()));
            }
            store.commit(JournalEntry::Delete {
                patient_id: patient_id.to_string(),
            })?;
            Ok(CrudOutcome::Deleted)
        }
        other => Err(StoreError::InvalidOp(other)),
    }
}
