use std::io::Write;

use permchain_core::Permission;
use permchain_resource::*;
use proptest::prelude::*;
use serde_json::json;

fn doc(id: &str, v: u32) -> ClinicalTrialDocument {
    ClinicalTrialDocument {
        patient_id: id.to_string(),
        name: format!("name {v}"),
        contact: format!("{id}@example.org"),
        data: json!({"v": v, "tags": ["a", v.to_string()]}),
    }
}

fn op_strategy() -> impl Strategy<Value = (u8, u8, u32)> {
    (0u8..4, 0u8..6, any::<u32>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn journal_replay_reproduces_store(ops in proptest::collection::vec(op_strategy(), 0..60)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let mut store = DocumentStore::open(&path).unwrap();
        for (op, id, v) in ops {
            let id = format!("p{id}");
            let op = Permission(1 << op);
            let payload = (op == Permission::CREATE || op == Permission::UPDATE).then(|| doc(&id, v));
            // Failures (duplicates, missing ids) must leave no trace.
            let _ = crud(&mut store, op, &id, payload);
        }
        let replayed = replay(store.journal()).unwrap();
        prop_assert_eq!(&replayed, store.documents());
        let reopened = DocumentStore::open(&path).unwrap();
        prop_assert_eq!(reopened.snapshot(), store.snapshot());
        prop_assert_eq!(reopened.journal(), store.journal());
    }
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::File::create(&path)
        .unwrap()
        .write_all(text.as_bytes())
        .unwrap();
    path
}

#[test]
fn ingest_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "empty.json", "");
    assert!(DocumentStore::new()
        .ingest_dataset(&path)
        .unwrap()
        .is_empty());
}

#[test]
fn ingest_is_stable_and_rejects_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let docs = vec![doc("a", 1), doc("b", 2), doc("c", 3)];
    let path = write(&dir, "docs.json", &serde_json::to_string(&docs).unwrap());
    let first = DocumentStore::new().ingest_dataset(&path).unwrap();
    let mut store = DocumentStore::new();
    let second = store.ingest_dataset(&path).unwrap();
    assert_eq!(first.len(), 3);
    assert_eq!(first, second);
    for ((id, h), d) in first.iter().zip(&docs) {
        assert_eq!(id, &d.patient_id);
        assert_eq!(
            *h,
            permchain_core::crypto::hash(d.canonical_json().as_bytes())
        );
    }
    assert_eq!(
        store.ingest_dataset(&path),
        Err(StoreError::DuplicateId("a".into()))
    );
    assert_eq!(store.len(), 3);
}

#[test]
fn ingest_rejects_duplicates_within_file_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        &dir,
        "dup.json",
        &serde_json::to_string(&vec![doc("a", 1), doc("a", 2)]).unwrap(),
    );
    let mut store = DocumentStore::new();
    assert!(matches!(
        store.ingest_dataset(&path),
        Err(StoreError::DuplicateId(_))
    ));
    assert!(store.is_empty());
    let path = write(&dir, "bad.json", "[{\"patient_id\": 1}]");
    assert!(matches!(
        store.ingest_dataset(&path),
        Err(StoreError::Parse(_))
    ));
}
