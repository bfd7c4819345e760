mod common;

use common::{fixture, kb_file};
use kbqa::io;
use kbqa::store::{KbPatch, NewQa, Store, StoreError};

#[test]
fn interrupted_staging_directories_are_removed_on_open() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let id = {
        let store = Store::open(&root, io::default_engine()).unwrap();
        store.import(kb_file(&fixture("multi-turn-kb.json"))).unwrap().kb_id
    };
    let leftover = root.join(".new-1234");
    std::fs::create_dir(&leftover).unwrap();
    std::fs::write(leftover.join("kb.json"), "{half").unwrap();
    let store = Store::open(&root, io::default_engine()).unwrap();
    assert!(!leftover.exists());
    assert_eq!(store.list().len(), 1);
    assert!(store.state(&id).is_ok());
}

#[test]
fn conflicting_revision_leaves_the_kb_alone() {
    let (_d, store) = common::temp_store();
    let id = store.import(kb_file(&fixture("multi-turn-kb.json"))).unwrap().kb_id;
    let before = store.export(&id).unwrap();
    let patch = KbPatch {
        add: vec![NewQa {
            question: "Do you sell rugs?".into(),
            answer: "Yes.".into(),
            ..Default::default()
        }],
        ..Default::default()
    };
    let e = store.update(&id, Some(7), patch).unwrap_err();
    assert!(matches!(e, StoreError::Conflict { .. }), "{e}");
    assert_eq!(store.export(&id).unwrap(), before);
}

#[test]
fn deleted_kbs_do_not_come_back() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let store = Store::open(&root, io::default_engine()).unwrap();
    let id = store.import(kb_file(&fixture("multi-turn-kb.json"))).unwrap().kb_id;
    store.delete(&id, None).unwrap();
    drop(store);
    let store = Store::open(&root, io::default_engine()).unwrap();
    assert!(store.list().is_empty());
    assert!(matches!(store.state(&id), Err(StoreError::UnknownKb(_))));
}
