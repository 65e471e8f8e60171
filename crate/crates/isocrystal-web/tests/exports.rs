use isocrystal_web::*;
use serde_json::{json, Value};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn deviation_export() {
    let v = parse(deviation_json("-1,1,-1,-1,1,1,0,-1").unwrap());
    assert_eq!((v["S"].as_u64(), v["W"].as_u64()), (Some(2), Some(3)));
    assert!(deviation_json("1,x").is_err());
}

#[test]
fn corpus_then_polygons() {
    let file = corpus_file_json("phi_alpha_4_5", "", 2, 1, 7).unwrap();
    let v = parse(polygons_json(&file).unwrap());
    assert_eq!(v["newton"]["slopes"], json!([[1, 3, 3], [2, 3, 3]]));
    assert_eq!(v["hodge"], json!([[0, 1, 3], [1, 1, 3]]));

    let low = corpus_file_json("phi_alpha_4_5", "", 2, 1, 4).unwrap();
    let v = parse(polygons_json(&low).unwrap());
    assert_eq!(v["newton"]["needed"].as_u64(), Some(7));

    assert!(corpus_file_json("supersingular", "x", 2, 1, 4).is_err());
    assert!(polygons_json("{}").is_err());
}

#[test]
fn bound_export() {
    let v = parse(bound_json("rank", 2, 1, 1, 2).unwrap());
    assert_eq!(v["value"], "3");
    let v = parse(bound_json("pdiv", 4, 4, 0, 2).unwrap());
    assert_eq!(v["value"], "0");
    assert!(bound_json("other", 1, 1, 1, 2).is_err());
    assert!(bound_json("polarized", 0, 0, 0, 2).is_err());
}
