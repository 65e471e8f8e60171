use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isocrystal"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    serde_json::from_str(text.lines().next().expect("stdout line")).unwrap()
}

fn corpus(dir: &TempDir, file: &str, args: &[&str]) -> PathBuf {
    let o = run(&[&["corpus"], args].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let path = dir.path().join(file);
    std::fs::write(&path, &o.stdout).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn deviation_samples() {
    for (t, sv, w) in [("-1,1,-1,-1,1,1,0,-1", 2, 3), ("0", 0, 0), ("1,1,-2,1,3", 2, 2)] {
        let o = run(&["deviation", t]);
        assert_eq!(code(&o), 0);
        let v = json(&o);
        assert_eq!((v["S"].as_i64(), v["W"].as_i64()), (Some(sv), Some(w)));
    }
    assert_eq!(code(&run(&["deviation", "1,,2"])), 2);
}

#[test]
fn polygons() {
    let dir = TempDir::new().unwrap();
    let et = corpus(&dir, "et.json", &["etale", "3", "--p", "3", "--n", "2"]);
    let v = json(&run(&["polygon", s(&et), "--hodge"]));
    assert_eq!(v["slopes"], serde_json::json!([[0, 1, 3]]));
    assert_eq!((v["s"].as_u64(), v["h"].as_u64()), (Some(0), Some(0)));

    let pa = corpus(&dir, "pa.json", &["phi_alpha_4_5", "--p", "2", "--q", "2", "--n", "13", "--alpha", "1,0"]);
    let o = run(&["polygon", s(&pa), "--newton"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["slopes"], serde_json::json!([[1, 3, 3], [2, 3, 3]]));

    let low = corpus(&dir, "low.json", &["phi_alpha_4_5", "--p", "2", "--q", "2", "--n", "5", "--alpha", "1,0"]);
    let o = run(&["polygon", s(&low), "--newton"]);
    assert_eq!(code(&o), 3);
    assert!(o.stdout.is_empty());
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"version\": 1}").unwrap();
    assert_eq!(code(&run(&["polygon", s(&bad), "--hodge"])), 2);
    assert_eq!(code(&run(&["polygon", "/nonexistent/file.json"])), 2);
    assert_eq!(code(&run(&["corpus", "no_such_thing", "--p", "2", "--n", "3"])), 2);
    assert_eq!(code(&run(&["bound", "--rank", "3"])), 2);
    assert_eq!(code(&run(&["verify", "--suite", "unknown"])), 2);
}

#[test]
fn bounds_print_value_and_formula() {
    let o = run(&["bound", "--rank", "3", "--s", "1", "--h", "2"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    let mut lines = out.lines();
    let value: u128 = lines.next().unwrap().parse().unwrap();
    let lib = isocrystal::bounds::d_plus_bound(isocrystal::bounds::BoundParams::new(3, 1, 2).unwrap());
    assert_eq!(value.to_string(), lib.to_string());
    assert!(lines.next().unwrap().starts_with("formula:"));
    let o = run(&["bound", "--pdiv", "4", "0", "--p", "2"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().next(), Some("0"));
}

#[test]
fn isom_and_hom() {
    let dir = TempDir::new().unwrap();
    let ss = corpus(&dir, "ss.json", &["supersingular", "1", "--p", "2", "--q", "2", "--n", "4"]);
    let o = run(&["isom", s(&ss), s(&ss)]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["witness"], serde_json::json!([[[1, 0], [0, 0]], [[0, 0], [1, 0]]]));

    let a = corpus(&dir, "a.json", &["phi_alpha_4_5", "--p", "2", "--q", "6", "--n", "4", "--alpha", "1,0,0,0,0,0"]);
    let b = corpus(&dir, "b.json", &["phi_alpha_4_5", "--p", "2", "--q", "6", "--n", "4", "--alpha", "0,1,0,0,0,0"]);
    let o = run(&["isom", s(&a), s(&b), "--prec", "4"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["regime"]["kind"], "exhaustive");

    let et = corpus(&dir, "et.json", &["etale", "2", "--p", "2", "--n", "4"]);
    let tw = corpus(&dir, "tw.json", &["ordinary", "2", "2", "--p", "2", "--n", "4"]);
    let o = run(&["hom", s(&et), s(&tw)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["basis"], serde_json::json!([]));
}

#[test]
fn stairs_and_probe() {
    let dir = TempDir::new().unwrap();
    let ss = corpus(&dir, "ss.json", &["supersingular", "1", "--p", "2", "--q", "2", "--n", "8", "--datum"]);
    let o = run(&["stairs", s(&ss), "--level", "4", "--seed", "9"]);
    assert!(matches!(code(&o), 0 | 4));
    let v = json(&o);
    assert_eq!(v["complete"].as_bool(), Some(code(&o) == 0));
    let again = run(&["stairs", s(&ss), "--level", "4", "--seed", "9", "--jobs", "1"]);
    assert_eq!(again.stdout, o.stdout);

    let twist = dir.path().join("g.json");
    std::fs::write(&twist, "[[[1,0],[0,0]],[[0,0],[1,0]]]").unwrap();
    let o = run(&["stairs", s(&ss), "--twist", s(&twist)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["certified"].as_u64(), Some(8));

    let o = run(&["probe", s(&ss)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["upper"].as_u64(), Some(1));
}

#[test]
fn outputs_do_not_depend_on_jobs() {
    let dir = TempDir::new().unwrap();
    let a = corpus(&dir, "a.json", &["phi_alpha_4_5", "--p", "2", "--q", "6", "--n", "4", "--alpha", "1,0,0,0,0,0"]);
    let b = corpus(&dir, "b.json", &["phi_alpha_4_5", "--p", "2", "--q", "6", "--n", "4", "--alpha", "0,0,1,0,0,0"]);
    let one = run(&["isom", s(&a), s(&b), "--jobs", "1"]);
    let four = run(&["isom", s(&a), s(&b), "--jobs", "4"]);
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(code(&one), code(&four));
}

#[test]
fn corpus_files_round_trip() {
    let dir = TempDir::new().unwrap();
    let p = corpus(&dir, "pol.json", &["polarized_4_5_4", "--p", "2", "--n", "4", "--alpha", "1"]);
    let text = std::fs::read_to_string(&p).unwrap();
    let f = isocrystal::io::CrystalFile::parse(&text).unwrap();
    assert!(f.gram.is_some());
    assert_eq!(f.to_json().trim(), text.trim());
    f.load().unwrap();
}
