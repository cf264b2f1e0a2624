use std::fs;

use sea_core::dataset::{load_annotations, load_db, load_db_with_categories};
use sea_core::Error;

const DB: &str = r#"[
  {"class": "zebra", "total_elements": 2, "elements": [
    {"id": "zebra.head", "name": "head", "optional": false},
    {"id": "zebra.stripes", "name": "stripes", "optional": false}
  ]}
]"#;

#[test]
fn loads_db_categories_and_annotations_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let db_path = dir.path().join("db.json");
    let cat_path = dir.path().join("categories.json");
    let ann_path = dir.path().join("annotations.jsonl");
    fs::write(&db_path, DB).unwrap();
    fs::write(&cat_path, r#"{"zebra": "animal"}"#).unwrap();
    fs::write(
        &ann_path,
        "{\"sketch_id\":\"s1\",\"class\":\"zebra\",\"caption\":\"a zebra\",\"presence\":{\"zebra.head\":true,\"zebra.stripes\":false}}\n",
    )
    .unwrap();

    let db = load_db_with_categories(&db_path, &cat_path).unwrap();
    assert_eq!(db.category("zebra"), Some("animal"));
    let records = load_annotations(&ann_path, &db).unwrap();
    assert_eq!(records[0].visible_count(), 1);

    fs::write(&db_path, db.to_json_pretty().unwrap()).unwrap();
    assert_eq!(load_db(&db_path).unwrap().classes, db.classes);
}

#[test]
fn errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{").unwrap();
    let err = load_db(&path).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }));
    assert!(err.to_string().contains("broken.json"));
    assert!(matches!(load_db(dir.path().join("missing.json")), Err(Error::Io(_))));
}
