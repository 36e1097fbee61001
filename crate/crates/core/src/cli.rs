//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::assignment::{Direction, IsoConfig, Isomorphism, PhiResult};
use crate::error::{Error, Result};
use crate::exact::{format_rational, to_f64};
use crate::filler::{AepBounds, FillerCaps, FillerContext, FillerMode};
use crate::intermediate::{designate_symbols, entropy_match, MatchOptions};
use crate::markov::{MarkovProcess, Symbol, SymbolSequence};
use crate::skeleton::{choose_n, diagnostic_case_i, diagnostic_case_ii, extract_skeleton, Extraction, Skeleton};
use crate::verify::{verify, VerifyOptions};

#[derive(Parser, Debug)]
#[command(name = "finiso", version, about = "Finite-precision isomorphisms between mixing Markov shifts")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Entropy rate as an exact rational approximation and a decimal.
    Entropy {
        #[arg(long)]
        process: PathBuf,
        #[arg(long, default_value_t = 8)]
        precision: u32,
    },
    /// Synthesize the intermediate chain between two processes.
    DesignIntermediate {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 10)]
        precision: u32,
        /// Where to write the intermediate chain.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the powered source process `A^m`.
        #[arg(long)]
        out_a_power: Option<PathBuf>,
        /// Also write the powered target process `B^m`.
        #[arg(long)]
        out_b_power: Option<PathBuf>,
        /// Include the step trace in the summary.
        #[arg(long)]
        trace: bool,
    },
    /// Extract the rank-r skeleton around a coordinate.
    Skeleton {
        #[arg(long)]
        process: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        rank: usize,
        #[arg(long, default_value_t = 0)]
        center: i64,
        #[arg(long)]
        zero: Option<String>,
    },
    /// Filler classes of a skeleton.
    Fillers {
        #[arg(long)]
        process: PathBuf,
        /// Pattern `n0,l1,n1,...`.
        #[arg(long)]
        skeleton: String,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long, default_value_t = 1)]
        precision: u32,
        #[arg(long, value_enum, default_value_t = ModeArg::Free)]
        mode: ModeArg,
        #[arg(long)]
        zero: Option<String>,
        #[arg(long, default_value_t = 12)]
        filler_cap: usize,
    },
    /// Fix the configuration of the isomorphism between A and C.
    BuildIso {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        c: PathBuf,
        #[arg(long, default_value_t = 4)]
        rank_cap: usize,
        #[arg(long, default_value_t = 6)]
        precision: u32,
        #[arg(long)]
        zero_a: Option<String>,
        #[arg(long)]
        zero_c: Option<String>,
        #[arg(long, default_value_t = 12)]
        filler_cap: usize,
        #[arg(long, default_value_t = 100_000)]
        window_cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate phi (or its inverse) on a window of a sequence.
    Apply {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        /// Coordinates `lo..hi` (inclusive).
        #[arg(long, default_value = "0..0", allow_hyphen_values = true)]
        range: String,
        #[arg(long)]
        inverse: bool,
        /// Compose with the inverse of a second tree sharing the target.
        #[arg(long)]
        via: Option<PathBuf>,
    },
    /// Empirical factor, measure and round-trip checks.
    Verify {
        #[arg(long)]
        a: Option<PathBuf>,
        #[arg(long)]
        c: Option<PathBuf>,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value_t = 2)]
        z: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 1000)]
        factor_samples: usize,
        #[arg(long, default_value_t = 20)]
        shifts: usize,
        #[arg(long, default_value_t = 10_000)]
        roundtrip_trials: usize,
        #[arg(long, default_value_t = 10_000)]
        window: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Betting diagnostics on a sequence.
    Diagnose {
        #[arg(long)]
        process: PathBuf,
        #[arg(long)]
        seq: PathBuf,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long, default_value_t = 1000.0)]
        threshold: f64,
        #[arg(long)]
        zero: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Free,
    Consistent,
}

/// Effective settings of a run, echoed into machine outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub precision: Option<u32>,
    pub rank_cap: Option<usize>,
    pub filler_cap: Option<usize>,
    pub window_cap: Option<usize>,
    pub seed: Option<u64>,
    pub paths: Vec<String>,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("--jobs must be positive");
            return 2;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({"kind": e.kind(), "message": e.to_string()}));
            1
        }
    }
}

fn load_process(path: &Path) -> Result<MarkovProcess> {
    MarkovProcess::load(path)
}

fn load_sequence(p: &MarkovProcess, path: &Path) -> Result<SymbolSequence> {
    p.parse_sequence(&std::fs::read_to_string(path)?)
}

fn zero_symbol(p: &MarkovProcess, label: Option<&str>) -> Result<Symbol> {
    match label {
        Some(l) => p.symbol_index(l).ok_or_else(|| Error::AlphabetMismatch(format!("no symbol {l:?}"))),
        None => match p.symbol_index("0") {
            Some(s) => Ok(s),
            None => Ok(designate_symbols(p, p)?.0),
        },
    }
}

fn emit(v: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_range(s: &str) -> Result<(i64, i64)> {
    let (a, b) = s.split_once("..").ok_or_else(|| Error::Parse(format!("range {s:?} must look like lo..hi")))?;
    let lo: i64 = a.trim().parse().map_err(|_| Error::Parse(format!("bad range start {a:?}")))?;
    let hi: i64 = b.trim().parse().map_err(|_| Error::Parse(format!("bad range end {b:?}")))?;
    if lo > hi {
        return Err(Error::Parse(format!("empty range {s:?}")));
    }
    Ok((lo, hi))
}

fn open_iso(path: &Path) -> Result<Isomorphism> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let cfg = IsoConfig::from_json(v.get("config").unwrap_or(&v))?;
    let iso = Isomorphism::new(cfg)?;
    match std::env::var_os("FINISO_CACHE_DIR") {
        Some(d) if !d.is_empty() => iso.with_cache_dir(Path::new(&d)),
        _ => Ok(iso),
    }
}

fn labels(p: &MarkovProcess, results: &[PhiResult]) -> Vec<Value> {
    results.iter().map(|r| r.symbol().map_or(Value::Null, |s| Value::String(p.alphabet()[s].clone()))).collect()
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Entropy { process, precision } => {
            let p = load_process(&process)?;
            let h = p.entropy_rate(precision);
            let exact = p.entropy_form().exact_value();
            emit(
                &json!({
                    "entropy": format_rational(&h.value),
                    "decimal": format!("{:.12}", h.to_f64()),
                    "precision": precision,
                    "exact": exact.map(|e| format_rational(&e)),
                }),
                None,
            )
        }
        Command::DesignIntermediate { a, b, precision, out, out_a_power, out_b_power, trace } => {
            let pa = load_process(&a)?;
            let pb = load_process(&b)?;
            let im = entropy_match(&pa, &pb, precision, &MatchOptions::default())?;
            if let Some(o) = &out {
                std::fs::write(o, serde_json::to_string(&im.process.to_json_with_stationary())? + "\n")?;
            }
            if let Some(o) = &out_a_power {
                std::fs::write(o, serde_json::to_string(&im.a_power.to_json_with_stationary())? + "\n")?;
            }
            if let Some(o) = &out_b_power {
                std::fs::write(o, serde_json::to_string(&im.b_power.to_json_with_stationary())? + "\n")?;
            }
            let cfg = RunConfig {
                precision: Some(precision),
                rank_cap: None,
                filler_cap: None,
                window_cap: None,
                seed: None,
                paths: [Some(&a), Some(&b), out.as_ref()].iter().flatten().map(|p| p.display().to_string()).collect(),
            };
            let mut v = json!({
                "config": cfg,
                "parameters": im.params,
                "zero_a": im.a_power.alphabet()[im.symbol0],
                "zero_b": im.b_power.alphabet()[im.symbol1],
                "entropy": format_rational(&im.entropy.value),
                "entropy_decimal": format!("{:.12}", im.entropy.to_f64()),
                "target": format_rational(&im.target),
                "steps": im.trace.len(),
            });
            if trace {
                v["trace"] = serde_json::to_value(&im.trace)?;
            }
            emit(&v, None)
        }
        Command::Skeleton { process, seq, rank, center, zero } => {
            let p = load_process(&process)?;
            let x = load_sequence(&p, &seq)?;
            let z = zero_symbol(&p, zero.as_deref())?;
            let params = choose_n(&p, z, rank.max(1));
            let v = match extract_skeleton(&x, rank, center, params.n[rank.max(1)], z) {
                Extraction::Found(s) => json!({
                    "status": "found",
                    "pattern": s.pattern_string(),
                    "length": s.length(),
                    "zero_set": s.zero_offsets().iter().map(|&o| s.start + o as i64).collect::<Vec<_>>(),
                    "skeleton": s,
                    "n_r": params.n[rank.max(1)],
                }),
                Extraction::NotFound => json!({"status": "not-found", "n_r": params.n[rank.max(1)]}),
                Extraction::InDelimiter => json!({"status": "in-delimiter", "n_r": params.n[rank.max(1)]}),
            };
            emit(&v, None)
        }
        Command::Fillers { process, skeleton, rank, precision, mode, zero, filler_cap } => {
            let p = load_process(&process)?;
            let s = Skeleton::parse(&skeleton, rank)?;
            let z = zero_symbol(&p, zero.as_deref())?;
            let params = choose_n(&p, z, rank);
            let bounds = AepBounds::from_processes(&[&p], p.entropy_rate(precision + 16).value);
            let mode = match mode {
                ModeArg::Free => FillerMode::Free,
                ModeArg::Consistent => FillerMode::Consistent,
            };
            let ctx = FillerContext::new(&p, z, mode, &bounds, &params)?.with_caps(FillerCaps { max_length: filler_cap, ..FillerCaps::default() });
            let part = ctx.classes(&s, precision)?;
            let report = ctx.lemma_report(&s, &part, precision, precision);
            let classes: Vec<Value> = part
                .classes
                .iter()
                .map(|c| {
                    json!({
                        "j": c.j,
                        "fixed": c.fixed.iter().map(|&x| p.alphabet()[x].clone()).collect::<Vec<_>>(),
                        "members": c.members.len(),
                        "probability": format_rational(&c.probability),
                        "probability_decimal": to_f64(&c.probability),
                    })
                })
                .collect();
            emit(&json!({"pattern": part.pattern, "rank": rank, "precision": precision, "fillers": part.fillers.len(), "classes": classes, "lemma": report}), None)
        }
        Command::BuildIso { a, c, rank_cap, precision, zero_a, zero_c, filler_cap, window_cap, out } => {
            let pa = load_process(&a)?;
            let pc = load_process(&c)?;
            let za = zero_symbol(&pa, zero_a.as_deref())?;
            let zc = zero_symbol(&pc, zero_c.as_deref())?;
            let mut cfg = IsoConfig::new(&pa, &pc, za, zc, precision, rank_cap);
            cfg.max_filler_length = filler_cap;
            cfg.window_cap = window_cap;
            let iso = Isomorphism::new(cfg.clone())?;
            let v = json!({
                "config": cfg,
                "parameters": {"n": iso.params.n, "l": iso.params.l},
                "bounds": iso.bounds,
            });
            std::fs::write(&out, serde_json::to_string(&v)? + "\n")?;
            emit(&json!({"written": out.display().to_string(), "n": iso.params.n}), None)
        }
        Command::Apply { tree, seq, range, inverse, via } => {
            let iso = open_iso(&tree)?;
            let (lo, hi) = parse_range(&range)?;
            let (input, dir) = if inverse { (&iso.c, Direction::Inverse) } else { (&iso.a, Direction::Forward) };
            let x = load_sequence(input, &seq)?;
            let first = iso.phi_window(&x, lo, hi, dir)?;
            let out_proc = if inverse { &iso.a } else { &iso.c };
            let mut v = json!({
                "range": [lo, hi],
                "symbols": labels(out_proc, &first),
                "outcomes": first,
            });
            if let Some(via) = via {
                if inverse {
                    return Err(Error::Parse("--via composes forward maps only".into()));
                }
                let second = open_iso(&via)?;
                if second.c.alphabet() != iso.c.alphabet() {
                    return Err(Error::AlphabetMismatch("the two trees do not share a target".into()));
                }
                let y: Vec<Symbol> = first.iter().map(PhiResult::symbol).collect::<Option<_>>().ok_or_else(|| {
                    Error::ConstraintViolation("phi is undefined somewhere in the range; cannot compose".into())
                })?;
                let y = SymbolSequence::new(y, lo, crate::markov::Provenance::UserSupplied);
                let composed = second.phi_window(&y, lo, hi, Direction::Inverse)?;
                v["composed"] = json!({"symbols": labels(&second.a, &composed), "outcomes": composed});
            }
            emit(&v, None)
        }
        Command::Verify { a, c, tree, z, trials, factor_samples, shifts, roundtrip_trials, window, seed, out } => {
            let iso = open_iso(&tree)?;
            for (given, have) in [(a, &iso.a), (c, &iso.c)] {
                if let Some(path) = given {
                    if load_process(&path)?.alphabet() != have.alphabet() {
                        return Err(Error::AlphabetMismatch(format!("{} does not match the tree", path.display())));
                    }
                }
            }
            if !(1..=4).contains(&z) {
                return Err(Error::ConstraintViolation("--z must be in 1..=4".into()));
            }
            let opts = VerifyOptions { z, trials, factor_samples, shifts, roundtrip_trials, window, seed };
            let report = verify(&iso, &iso.a, &iso.c, &opts)?;
            let v = serde_json::to_value(&report)?;
            emit(&v, out.as_deref())?;
            if out.is_some() {
                emit(
                    &json!({
                        "factor_violations": report.factor.violations,
                        "roundtrip_agreement": report.roundtrip.agreement,
                        "tv_distance": report.measure.tv_distance,
                        "undefined_rate": report.measure.undefined_rate,
                    }),
                    None,
                )?;
            }
            Ok(())
        }
        Command::Diagnose { process, seq, rank, threshold, zero } => {
            let p = load_process(&process)?;
            let x = load_sequence(&p, &seq)?;
            let z = zero_symbol(&p, zero.as_deref())?;
            let params = choose_n(&p, z, rank.max(1));
            let d1 = diagnostic_case_i(&x, &params, &p, z);
            let d2 = diagnostic_case_ii(&x, rank.max(1), &params, &p, z);
            let diverges = d1.exceeds(threshold) || d2.exceeds(threshold);
            emit(
                &json!({
                    "case_i": {"log2": finite(d1.log2_value), "value": finite(d1.value()), "per_rank_log2": d1.per_rank.iter().map(|&v| finite(v)).collect::<Vec<_>>()},
                    "case_ii": {"log2": finite(d2.log2_value), "value": finite(d2.value())},
                    "threshold": threshold,
                    "verdict": if diverges { "diverges" } else { "bounded" },
                }),
                None,
            )
        }
    }
}

/// JSON has no infinities; they are rendered as strings.
fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}
