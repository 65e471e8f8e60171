//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string; errors become JS exceptions carrying
//! the library's message. The plain `*_json` functions hold the logic so
//! they can be tested natively.

use isocrystal::bounds::{d_plus_bound, truncation_level_bound, BoundParams, TruncationKind};
use isocrystal::crystal::{paper_corpus, CorpusEntry, Polygon};
use isocrystal::deviation::{deviations, df_reduce, ExponentTuple};
use isocrystal::io::CrystalFile;
use isocrystal::witt::make_witt_ring;
use isocrystal::Error;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn slopes(p: &Polygon) -> Value {
    p.points
        .iter()
        .map(|(s, m)| json!([s.numer(), s.denom(), m]))
        .collect()
}

pub fn deviation_json(tuple: &str) -> Result<String, Error> {
    let t: ExponentTuple = tuple.parse()?;
    let (s, w) = deviations(&t);
    let red = df_reduce(&t);
    Ok(json!({
        "S": s,
        "W": w,
        "rescale": red.rescale,
        "reduced": red.tuple,
        "cycles": red.cycles,
    })
    .to_string())
}

fn parse_params(params: &str) -> Result<Vec<usize>, Error> {
    params
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("`{s}` is not a parameter"))))
        .collect()
}

/// A corpus crystal in the file format, pretty-printed.
pub fn corpus_file_json(name: &str, params: &str, p: u64, q: usize, n: u32) -> Result<String, Error> {
    let ring = make_witt_ring(p, q, n)?;
    let alpha = ring.one();
    let file = match paper_corpus(&ring, name, &parse_params(params)?, Some(&alpha))? {
        CorpusEntry::Crystal(c) => CrystalFile::from_crystal(&c),
        CorpusEntry::Polarized(pc) => CrystalFile::from_polarized(&pc),
    };
    Ok(file.to_json())
}

/// Hodge data and, when the precision allows it, the Newton polygon.
pub fn polygons_json(file: &str) -> Result<String, Error> {
    let c = CrystalFile::parse(file)?.load()?.crystal;
    let hd = c.hodge_data()?;
    let newton = match c.newton_polygon() {
        Ok(poly) => json!({"slopes": slopes(&poly)}),
        Err(Error::PrecisionExhausted { needed, available }) => {
            json!({"needed": needed, "available": available})
        }
        Err(e) => return Err(e),
    };
    Ok(json!({
        "rank": c.rank(),
        "hodge": slopes(&hd.hodge),
        "s": hd.s,
        "h": hd.h,
        "newton": newton,
    })
    .to_string())
}

/// `kind` is `rank` (a, b, c), `pdiv` (height a, dimension b) or
/// `polarized` (dimension a).
pub fn bound_json(kind: &str, a: u64, b: u64, c: u64, p: u64) -> Result<String, Error> {
    let value = match kind {
        "rank" => d_plus_bound(BoundParams::new(a, b, c)?),
        "pdiv" => truncation_level_bound(TruncationKind::PDivisible { r: a, dim: Some(b) }, p)?,
        "polarized" => truncation_level_bound(TruncationKind::Polarized { d: a }, p)?,
        other => return Err(Error::BadParams(format!("unknown bound `{other}`"))),
    };
    let digits = value.to_string();
    Ok(json!({"value": digits, "digits": digits.len()}).to_string())
}

fn js(r: Result<String, Error>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn deviation(tuple: &str) -> Result<String, JsError> {
    js(deviation_json(tuple))
}

#[wasm_bindgen]
pub fn corpus_file(name: &str, params: &str, p: u32, q: u32, n: u32) -> Result<String, JsError> {
    js(corpus_file_json(name, params, p.into(), q as usize, n))
}

#[wasm_bindgen]
pub fn polygons(file: &str) -> Result<String, JsError> {
    js(polygons_json(file))
}

#[wasm_bindgen]
pub fn bound(kind: &str, a: u32, b: u32, c: u32, p: u32) -> Result<String, JsError> {
    js(bound_json(kind, a.into(), b.into(), c.into(), p.into()))
}
