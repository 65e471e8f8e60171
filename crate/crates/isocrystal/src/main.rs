use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use isocrystal::bounds::{d_plus_bound, truncation_level_bound, BoundParams, TruncationKind};
use isocrystal::crystal::{paper_corpus, CorpusEntry, FCrystal, Polygon};
use isocrystal::deviation::{deviations, df_reduce, ExponentTuple};
use isocrystal::io::{matrix_from_json, matrix_to_json, CrystalFile, HomModuleJson, MatrixJson};
use isocrystal::semilinear::{dmax_from_env, hom_module, isom_search_seeded, SearchRegime};
use isocrystal::stairs::{build_stairs_datum, lang_run, stairs_run, Strategy};
use isocrystal::truncation::{i_number_probe, random_twist, ProbeOptions};
use isocrystal::verify::{criteria, SUITES};
use isocrystal::witt::make_witt_ring;
use isocrystal::Error;

#[derive(Parser)]
#[command(name = "isocrystal", version, about = "Latticed F-isocrystals over finite fields")]
struct Cli {
    /// Worker threads for searches.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for randomized regimes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Hodge or Newton polygon of a crystal file.
    Polygon {
        file: PathBuf,
        #[arg(long, conflicts_with = "newton")]
        hodge: bool,
        #[arg(long)]
        newton: bool,
    },
    /// Sign and value deviation of a comma-separated exponent tuple.
    Deviation {
        #[arg(allow_hyphen_values = true)]
        tuple: String,
    },
    /// Effective bounds as a decimal integer.
    Bound(BoundArgs),
    /// Search for an isomorphism between two crystals.
    Isom {
        file1: PathBuf,
        file2: PathBuf,
        #[arg(long)]
        prec: Option<u32>,
    },
    /// Hom module between two crystals.
    Hom {
        file1: PathBuf,
        file2: PathBuf,
        #[arg(long)]
        prec: Option<u32>,
    },
    /// Run the stairs method on a twist of a crystal.
    Stairs {
        file: PathBuf,
        /// JSON file holding the twist matrix (row-major coefficient arrays).
        #[arg(long, conflicts_with = "level")]
        twist: Option<PathBuf>,
        /// Sample a random twist congruent to 1 modulo p^LEVEL instead.
        #[arg(long)]
        level: Option<u32>,
        /// Use Lang's theorem on a fixed-lattice datum.
        #[arg(long)]
        lang: bool,
        #[arg(long)]
        dmax: Option<usize>,
    },
    /// Certified i-number upper bound plus sampling evidence.
    Probe {
        file: PathBuf,
        #[arg(long, default_value_t = 3)]
        nmax: u32,
        #[arg(long, default_value_t = 2)]
        trials: usize,
    },
    /// Write a corpus crystal as a crystal file.
    Corpus {
        name: String,
        params: Vec<usize>,
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long)]
        n: u32,
        /// Coefficients of alpha, comma-separated.
        #[arg(long)]
        alpha: Option<String>,
        /// Attach the stairs datum.
        #[arg(long)]
        datum: bool,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long, default_value = "paper")]
        suite: String,
    },
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, requires_all = ["s", "h"], conflicts_with_all = ["pdiv", "polarized"])]
    rank: Option<u64>,
    #[arg(long)]
    s: Option<u64>,
    #[arg(long)]
    h: Option<u64>,
    /// Height and optional dimension of a p-divisible group.
    #[arg(long, num_args = 1..=2, conflicts_with = "polarized")]
    pdiv: Option<Vec<u64>>,
    /// Dimension of a principally quasi-polarized p-divisible group.
    #[arg(long)]
    polarized: Option<u64>,
    #[arg(long, default_value_t = 2)]
    p: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Hodge,
    Newton,
}

/// Exit codes of the command line contract.
mod exit {
    pub const OK: u8 = 0;
    pub const NONE: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const PRECISION: u8 = 3;
    pub const INCONCLUSIVE: u8 = 4;
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::PrecisionExhausted { .. } => exit::PRECISION,
        Error::SearchSpaceTooLarge | Error::ExtensionCapExceeded(_) => exit::INCONCLUSIVE,
        _ => exit::INPUT,
    }
}

type CmdResult = Result<u8, Error>;

/// Writes one line to stdout; a closed pipe ends the process quietly.
fn out(line: &str) {
    let mut stdout = std::io::stdout().lock();
    if writeln!(stdout, "{line}").and_then(|_| stdout.flush()).is_err() {
        std::process::exit(0);
    }
}

fn emit(v: &impl Serialize) {
    out(&serde_json::to_string(v).expect("serializable"));
}

fn load(path: &Path) -> Result<FCrystal, Error> {
    Ok(CrystalFile::read(path)?.load()?.crystal)
}

fn polygon_json(p: &Polygon) -> Value {
    p.points
        .iter()
        .map(|(s, m)| json!([s.numer(), s.denom(), m]))
        .collect()
}

fn cmd_polygon(file: &Path, kind: Kind) -> CmdResult {
    let c = load(file)?;
    let hd = c.hodge_data()?;
    let (name, poly) = match kind {
        Kind::Hodge => ("hodge", hd.hodge.clone()),
        Kind::Newton => ("newton", c.newton_polygon()?),
    };
    emit(&json!({"kind": name, "slopes": polygon_json(&poly), "s": hd.s, "h": hd.h}));
    Ok(exit::OK)
}

fn cmd_deviation(tuple: &str) -> CmdResult {
    let t: ExponentTuple = tuple.parse()?;
    let (s, w) = deviations(&t);
    let red = df_reduce(&t);
    emit(&json!({"S": s, "W": w, "rescale": red.rescale}));
    Ok(exit::OK)
}

fn cmd_bound(a: &BoundArgs) -> CmdResult {
    let (value, formula) = if let Some(rank) = a.rank {
        let params = BoundParams::new(rank, a.s.unwrap_or(0), a.h.unwrap_or(0))?;
        (d_plus_bound(params), "D(a,b,c) = (a-1) b + D0(a,c)".to_string())
    } else if let Some(v) = &a.pdiv {
        let kind = TruncationKind::PDivisible { r: v[0], dim: v.get(1).copied() };
        (
            truncation_level_bound(kind, a.p)?,
            "T(r,d) <= 2 D(r^2,1,2) + eps_p, and 0 when d is 0 or r".to_string(),
        )
    } else if let Some(d) = a.polarized {
        (
            truncation_level_bound(TruncationKind::Polarized { d }, a.p)?,
            "T(d) <= 2 D(2d^2+d,1,2) + eps_p".to_string(),
        )
    } else {
        return Err(Error::BadParams("give --rank/--s/--h, --pdiv or --polarized".into()));
    };
    out(&value.to_string());
    out(&format!("formula: {formula}"));
    Ok(exit::OK)
}

fn regime_json(r: &SearchRegime) -> Value {
    match r {
        SearchRegime::Exhaustive { candidates } => json!({"kind": "exhaustive", "candidates": candidates}),
        SearchRegime::Randomized { trials } => json!({"kind": "randomized", "trials": trials}),
    }
}

fn cmd_isom(f1: &Path, f2: &Path, prec: Option<u32>, seed: u64) -> CmdResult {
    let (c1, c2) = (load(f1)?, load(f2)?);
    let m = prec.unwrap_or(c1.ring().n().min(c2.ring().n()));
    let res = match isom_search_seeded(&c1, &c2, m, seed) {
        Err(Error::SearchSpaceTooLarge) => {
            emit(&json!({"witness": null, "regime": {"kind": "randomized"}, "conclusive": false}));
            return Ok(exit::INCONCLUSIVE);
        }
        other => other?,
    };
    emit(&json!({
        "witness": res.witness.as_ref().map(matrix_to_json),
        "regime": regime_json(&res.regime),
        "hom_log_size": res.hom_log_size,
        "conclusive": true,
    }));
    Ok(if res.witness.is_some() { exit::OK } else { exit::NONE })
}

fn cmd_hom(f1: &Path, f2: &Path, prec: Option<u32>) -> CmdResult {
    let (c1, c2) = (load(f1)?, load(f2)?);
    let m = prec.unwrap_or(c1.ring().n().min(c2.ring().n()));
    let h = hom_module(&c1, &c2, m)?;
    emit(&HomModuleJson::from_module(&h));
    Ok(exit::OK)
}

fn cmd_stairs(
    file: &Path,
    twist: Option<&Path>,
    level: Option<u32>,
    lang: bool,
    dmax: usize,
    seed: u64,
) -> CmdResult {
    let loaded = CrystalFile::read(file)?.load()?;
    let c = loaded.crystal;
    let datum = match loaded.datum {
        Some(d) => d,
        None if lang => isocrystal::stairs::build_stairs_datum_with(&c, Strategy::FixedLattice)?,
        None => build_stairs_datum(&c)?,
    };
    let g = match (twist, level) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(e.to_string()))?;
            let m: MatrixJson = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            matrix_from_json(c.ring(), c.rank(), c.rank(), &m)?
        }
        (None, Some(k)) => random_twist(c.ring(), c.rank(), k, &mut ChaCha8Rng::seed_from_u64(seed)),
        (None, None) => return Err(Error::BadParams("give --twist or --level".into())),
    };
    let out = if lang { lang_run(&datum, &g, dmax)? } else { stairs_run(&datum, &g, dmax)? };
    let w = out.witness.ring();
    emit(&json!({
        "complete": out.complete(),
        "certified": out.certified,
        "target": out.target,
        "iterations": out.iterations,
        "field_degree": out.degree(),
        "stall": out.stall.as_ref().map(|e| e.to_string()),
        "witness": {"p": w.p(), "q": w.q(), "n": w.n(), "matrix": matrix_to_json(&out.witness)},
    }));
    Ok(if out.complete() { exit::OK } else { exit::INCONCLUSIVE })
}

fn cmd_probe(file: &Path, nmax: u32, trials: usize, seed: u64) -> CmdResult {
    let c = load(file)?;
    let rep = i_number_probe(&c, ProbeOptions { n_max: nmax, trials, seed });
    emit(&rep);
    Ok(exit::OK)
}

fn cmd_corpus(name: &str, params: &[usize], p: u64, q: usize, n: u32, alpha: Option<&str>, datum: bool) -> CmdResult {
    let ring = make_witt_ring(p, q, n)?;
    let alpha = alpha
        .map(|s| {
            let coeffs = s
                .split(',')
                .map(|t| t.trim().parse::<u64>().map_err(|_| Error::Parse(format!("bad coefficient `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if coeffs.len() != q {
                return Err(Error::Parse(format!("alpha needs {q} coefficients")));
            }
            Ok(ring.elem(coeffs))
        })
        .transpose()?;
    let file = match paper_corpus(&ring, name, params, alpha.as_ref())? {
        CorpusEntry::Crystal(c) => {
            let f = CrystalFile::from_crystal(&c);
            if datum {
                f.with_datum(&build_stairs_datum(&c)?)
            } else {
                f
            }
        }
        CorpusEntry::Polarized(pc) => CrystalFile::from_polarized(&pc),
    };
    out(&file.to_json());
    Ok(exit::OK)
}

fn cmd_verify(suite: &str) -> CmdResult {
    if !SUITES.contains(&suite) {
        return Err(Error::BadParams(format!("unknown suite `{suite}`")));
    }
    let mut failed = Vec::new();
    let all = criteria();
    for c in &all {
        let check = c.run();
        emit(&check);
        eprintln!(
            "{} {:>2} {:<26} {}",
            if check.pass { "ok  " } else { "FAIL" },
            check.id,
            check.name,
            check.detail
        );
        if !check.pass {
            failed.push(check.name);
        }
    }
    eprintln!("{} of {} checks passed", all.len() - failed.len(), all.len());
    Ok(if failed.is_empty() { exit::OK } else { exit::NONE })
}

fn run(cli: Cli) -> CmdResult {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::BadParams(e.to_string()))?;
    }
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Polygon { file, newton, .. } => {
            cmd_polygon(&file, if newton { Kind::Newton } else { Kind::Hodge })
        }
        Cmd::Deviation { tuple } => cmd_deviation(&tuple),
        Cmd::Bound(a) => cmd_bound(&a),
        Cmd::Isom { file1, file2, prec } => cmd_isom(&file1, &file2, prec, seed),
        Cmd::Hom { file1, file2, prec } => cmd_hom(&file1, &file2, prec),
        Cmd::Stairs { file, twist, level, lang, dmax } => cmd_stairs(
            &file,
            twist.as_deref(),
            level,
            lang,
            dmax.unwrap_or_else(dmax_from_env),
            seed,
        ),
        Cmd::Probe { file, nmax, trials } => cmd_probe(&file, nmax, trials, seed),
        Cmd::Corpus { name, params, p, q, n, alpha, datum } => {
            cmd_corpus(&name, &params, p, q, n, alpha.as_deref(), datum)
        }
        Cmd::Verify { suite } => cmd_verify(&suite),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
