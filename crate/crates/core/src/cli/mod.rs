//! Command-line front end: `analyze`, `check`, `simulate`, `bound`, `parse`.

pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::Signed;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::certificates::{
    check_lpf, check_smap, BoxDomain, CertError, Certificate, CheckReport, Domain, FormatError, Verdict, DEFAULT_BOX,
};
use crate::lang::{normalize, parse, pretty_print, Component, LangError, NormalizedProgram, SingleWhileLoop};
use crate::rational::{self, Rational};
use crate::simulator::{estimate_tail, write_csv as write_tail_csv, SimError, TailEstimate};
use crate::synthesis::{synth_lpf, synth_smap_bounded, synth_smap_linear, SynthError};
use crate::tailbounds::{bound_diff, bound_series, write_csv as write_bound_csv, BoundInput, BoundKind, TailError};
use report::{AnalysisReport, BoundSeries, LoopEntry, LoopVerdict, Method, PostCheck, SCHEMA};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{col}: {source}")]
    Lang { path: String, line: usize, col: usize, source: LangError },
    #[error("invalid --{flag} value `{value}`: {why}")]
    Flag { flag: &'static str, value: String, why: String },
    #[error("program has no loop with index {0}")]
    NoSuchLoop(usize),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Tail(#[from] TailError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Output(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "astprove", version, about = "Almost-sure termination analysis for probabilistic while-programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize certificates, compute tail bounds and cross-check by simulation.
    Analyze {
        file: PathBuf,
        /// Initial valuation, e.g. `x=1,y=0` (unlisted variables start at 0).
        #[arg(long, default_value = "")]
        init: String,
        #[arg(long, default_value = "2,8,32")]
        ks: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Box for bounded checks: `lo..hi` for every variable or `x=lo..hi,y=lo..hi`.
        #[arg(long = "box", allow_hyphen_values = true)]
        box_: Option<String>,
        /// JSON report path; the CSV projection goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a certificate file against one loop.
    Check {
        file: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        #[arg(long = "box", allow_hyphen_values = true)]
        box_: Option<String>,
        #[arg(long = "loop", default_value_t = 0)]
        loop_index: usize,
    },
    /// Monte Carlo estimates of P(T >= k) as CSV.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value = "")]
        init: String,
        #[arg(long, default_value = "2,8,32")]
        ks: String,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "loop", default_value_t = 0)]
        loop_index: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate tail bounds from certificate data as CSV.
    Bound {
        #[arg(long = "e-x0")]
        e_x0: String,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        zeta: Option<String>,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        ks: String,
        /// Explicit t for the difference-bounded bound.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and pretty-print a program.
    Parse { file: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Diff,
    General,
}

/// Runs the CLI on `args` (including the program name), writing to `out`
/// and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Analyze { file, init, ks, trials, seed, box_, out: path } => {
            let text = read(&file)?;
            let prog = load(&file, &text)?;
            let init = parse_init(&init, &prog.pvars)?;
            let ks = parse_ks(&ks)?;
            let bx = parse_box(box_.as_deref(), &prog.pvars)?;
            let report = analyze(&text, &prog, &init, &ks, trials, seed, &bx, err)?;
            let json = report.to_json();
            match path {
                Some(p) => {
                    write_file(&p, json.as_bytes())?;
                    let mut csv = Vec::new();
                    report.write_csv(&mut csv)?;
                    write_file(&p.with_extension("csv"), &csv)?;
                }
                None => out.write_all(json.as_bytes())?,
            }
            if report.loops.iter().any(|l| l.post_check.as_ref().is_some_and(|p| !p.passed)) {
                writeln!(err, "error: a tail bound fell below the empirical Wilson-95 lower limit")?;
                return Ok(1);
            }
            Ok(report.exit_code())
        }
        Command::Check { file, cert, box_, loop_index } => {
            let text = read(&file)?;
            let prog = load(&file, &text)?;
            let l = nth_loop(&prog, loop_index)?;
            let cert = Certificate::from_json(&read(&cert)?, &l.pvars)?;
            let domain = match parse_box(box_.as_deref(), &l.pvars)? {
                Some(b) => Domain::Box(b),
                None => Domain::Symbolic,
            };
            let report = match &cert {
                Certificate::Smap(m) => check_smap(l, m, &domain)?,
                Certificate::Lpf(f) => check_lpf(l, f, &domain)?,
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
            for w in &report.witnesses {
                writeln!(err, "witness: {w}")?;
            }
            Ok(match report.verdict {
                Verdict::Certified => 0,
                Verdict::CertifiedOnBox => 2,
                Verdict::Refuted => 4,
                Verdict::Inconclusive => 5,
            })
        }
        Command::Simulate { file, init, ks, trials, seed, loop_index, out: path } => {
            let text = read(&file)?;
            let prog = load(&file, &text)?;
            let pv0 = parse_init(&init, &prog.pvars)?;
            let entry = entry_valuations(&prog, &pv0)?;
            let (i, l) = prog.loops().enumerate().nth(loop_index).ok_or(CliError::NoSuchLoop(loop_index))?;
            let pv = entry[i].clone().ok_or_else(|| CliError::Flag {
                flag: "loop",
                value: loop_index.to_string(),
                why: "the entry valuation of this loop is not deterministic".into(),
            })?;
            let rows = estimate_tail(l, &pv, &parse_ks(&ks)?, trials, seed)?;
            let mut csv = Vec::new();
            write_tail_csv(&mut csv, &rows)?;
            emit(path.as_deref(), &csv, out)?;
            Ok(0)
        }
        Command::Bound { e_x0, delta, zeta, kind, ks, t, out: path } => {
            let e = parse_rational("e-x0", &e_x0)?;
            let d = parse_rational("delta", &delta)?;
            let z = zeta.map(|z| parse_rational("zeta", &z)).transpose()?;
            let kind = match kind {
                KindArg::Diff => BoundKind::DiffBounded,
                KindArg::General => BoundKind::General,
            };
            let input = BoundInput::new(e, d, z, kind)?;
            let ks = parse_ks(&ks)?;
            let rows = match t {
                Some(t) => ks.iter().map(|&k| bound_diff(&input, k, Some(t))).collect::<Result<Vec<_>, _>>()?,
                None => bound_series(&input, &ks)?,
            };
            let mut csv = Vec::new();
            write_bound_csv(&mut csv, &rows)?;
            emit(path.as_deref(), &csv, out)?;
            Ok(0)
        }
        Command::Parse { file } => {
            let text = read(&file)?;
            let prog = parse(&text).map_err(|e| lang_error(&file, e))?;
            normalize(&prog).map_err(|e| lang_error(&file, e))?;
            out.write_all(pretty_print(&prog).as_bytes())?;
            Ok(0)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn emit(path: Option<&Path>, bytes: &[u8], out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, bytes),
        None => Ok(out.write_all(bytes)?),
    }
}

fn lang_error(path: &Path, e: LangError) -> CliError {
    let (line, col) = e.location().unwrap_or((1, 1));
    CliError::Lang { path: path.display().to_string(), line, col, source: e }
}

fn load(path: &Path, text: &str) -> Result<NormalizedProgram, CliError> {
    let prog = parse(text).map_err(|e| lang_error(path, e))?;
    normalize(&prog).map_err(|e| lang_error(path, e))
}

fn nth_loop(prog: &NormalizedProgram, i: usize) -> Result<&SingleWhileLoop, CliError> {
    prog.loops().nth(i).ok_or(CliError::NoSuchLoop(i))
}

fn parse_rational(flag: &'static str, s: &str) -> Result<Rational, CliError> {
    rational::parse(s.trim()).ok_or_else(|| CliError::Flag { flag, value: s.into(), why: "expected an integer, decimal or num/den".into() })
}

/// Comma-separated indices; `1e6` style is accepted for exact integers.
pub fn parse_ks(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let p = p.trim();
            p.parse::<u64>()
                .ok()
                .or_else(|| p.parse::<f64>().ok().filter(|f| f.fract() == 0.0 && *f >= 1.0 && *f < 1.8e19).map(|f| f as u64))
                .filter(|k| *k >= 1)
                .ok_or_else(|| CliError::Flag { flag: "ks", value: p.into(), why: "expected positive integers".into() })
        })
        .collect()
}

/// `x=1,y=-2`; variables not mentioned start at 0.
pub fn parse_init(s: &str, pvars: &[String]) -> Result<Vec<i64>, CliError> {
    let mut pv = vec![0i64; pvars.len()];
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = |why: &str| CliError::Flag { flag: "init", value: part.into(), why: why.into() };
        let (name, value) = part.split_once('=').ok_or_else(|| bad("expected name=value"))?;
        let i = pvars.iter().position(|x| x == name.trim()).ok_or_else(|| bad("unknown program variable"))?;
        pv[i] = value.trim().parse().map_err(|_| bad("expected an integer"))?;
    }
    Ok(pv)
}

/// `lo..hi` for every variable or `x=lo..hi,y=lo..hi` (unlisted variables
/// get the default range).
pub fn parse_box(s: Option<&str>, pvars: &[String]) -> Result<Option<BoxDomain>, CliError> {
    let Some(s) = s else { return Ok(None) };
    let bad = |why: &str| CliError::Flag { flag: "box", value: s.into(), why: why.into() };
    let range = |r: &str| -> Result<(i64, i64), CliError> {
        let (lo, hi) = r.split_once("..").ok_or_else(|| bad("expected lo..hi"))?;
        let lo: i64 = lo.trim().parse().map_err(|_| bad("bounds must be integers"))?;
        let hi: i64 = hi.trim().parse().map_err(|_| bad("bounds must be integers"))?;
        if hi < lo {
            return Err(bad("empty range"));
        }
        Ok((lo, hi))
    };
    if !s.contains('=') {
        let r = range(s)?;
        return Ok(Some(BoxDomain { ranges: vec![r; pvars.len()] }));
    }
    let mut ranges = vec![DEFAULT_BOX; pvars.len()];
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, r) = part.split_once('=').ok_or_else(|| bad("expected name=lo..hi"))?;
        let i = pvars.iter().position(|x| x == name.trim()).ok_or_else(|| bad("unknown program variable"))?;
        ranges[i] = range(r)?;
    }
    Ok(Some(BoxDomain { ranges }))
}

/// Entry valuation of each loop, known when every statement before it is
/// a loop-free block without sampling.
fn entry_valuations(prog: &NormalizedProgram, pv0: &[i64]) -> Result<Vec<Option<Vec<i64>>>, CliError> {
    let mut state = Some(pv0.to_vec());
    let mut out = Vec::new();
    for c in &prog.components {
        match c {
            Component::LoopFree(b) => {
                state = match state {
                    Some(mut pv) if b.rvars.is_empty() => {
                        b.code.exec(&mut pv, &[]).map_err(CertError::from)?;
                        Some(pv)
                    }
                    _ => None,
                };
            }
            Component::Loop(_) => {
                out.push(state.clone());
                state = None;
            }
        }
    }
    Ok(out)
}

struct Found {
    method: Method,
    cert: Certificate,
    report: CheckReport,
}

/// The first certificate in method order, with a note per failed attempt.
fn find_certificate(l: &SingleWhileLoop, bx: &BoxDomain, notes: &mut Vec<String>) -> Result<Option<Found>, CliError> {
    match synth_smap_linear(l) {
        Ok(s) => {
            let method = if s.cert.zeta.is_some() { Method::SmapDiffBounded } else { Method::SmapGeneral };
            return Ok(Some(Found { method, cert: Certificate::Smap(s.cert), report: s.report }));
        }
        Err(e @ (SynthError::Lin(_) | SynthError::Cert(_) | SynthError::Dist(_))) => return Err(e.into()),
        Err(e) => notes.push(format!("symbolic supermartingale synthesis: {e}")),
    }
    match synth_lpf(l) {
        Ok(s) => return Ok(Some(Found { method: Method::CltLpf, cert: Certificate::Lpf(s.cert), report: s.report })),
        Err(e @ (SynthError::Lin(_) | SynthError::Cert(_) | SynthError::Dist(_))) => return Err(e.into()),
        Err(e) => notes.push(format!("linear progress synthesis: {e}")),
    }
    match synth_smap_bounded(l, bx) {
        Ok(s) => Ok(Some(Found { method: Method::SmapGeneral, cert: Certificate::Smap(s.cert), report: s.report })),
        Err(e @ (SynthError::Lin(_) | SynthError::Dist(_))) => Err(e.into()),
        Err(e) => {
            notes.push(format!("bounded supermartingale synthesis: {e}"));
            Ok(None)
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn analyze(
    text: &str,
    prog: &NormalizedProgram,
    init: &[i64],
    ks: &[u64],
    trials: u64,
    seed: u64,
    bx: &Option<BoxDomain>,
    err: &mut dyn Write,
) -> Result<AnalysisReport, CliError> {
    let entries = entry_valuations(prog, init)?;
    let mut loops = Vec::new();
    for (i, l) in prog.loops().enumerate() {
        let bx = bx.clone().unwrap_or_else(|| BoxDomain::uniform(l.pvars.len(), DEFAULT_BOX.0, DEFAULT_BOX.1));
        let mut notes = Vec::new();
        let found = find_certificate(l, &bx, &mut notes)?;
        let entry = entries[i].clone();
        let mut e = LoopEntry {
            loop_id: i,
            line: l.span.line,
            method: Method::Unknown,
            certificate: None,
            delta: None,
            zeta: None,
            tail_class: "none",
            verdict: LoopVerdict::Inconclusive,
            check: None,
            entry_valuation: entry.clone(),
            bounds: None,
            empirical: None,
            post_check: None,
            notes,
        };
        if let Some(f) = found {
            e.method = f.method;
            e.certificate = Some(f.cert.to_value());
            e.verdict = match f.report.verdict {
                Verdict::Certified => LoopVerdict::AstCertified,
                Verdict::CertifiedOnBox => LoopVerdict::AstCertifiedOnBox,
                _ => LoopVerdict::Inconclusive,
            };
            e.notes.extend(f.report.notices.iter().cloned());
            e.check = Some(f.report);
            if let Certificate::Smap(m) = &f.cert {
                e.delta = Some(m.delta.to_string());
                e.zeta = m.zeta.as_ref().map(ToString::to_string);
                e.tail_class = if m.zeta.is_some() { "O(1/sqrt(k))" } else { "O(k^-1/6)" };
                if let Some(pv) = &entry {
                    let h = crate::certificates::ResolvedExpr::new(&m.h, &l.pvars)?;
                    let e_x0 = h.eval(pv);
                    if e_x0.is_positive() {
                        let kind = if m.zeta.is_some() { BoundKind::DiffBounded } else { BoundKind::General };
                        let input = BoundInput::new(e_x0, m.delta.clone(), m.zeta.clone(), kind)?;
                        let values = bound_series(&input, ks)?;
                        e.bounds = Some(BoundSeries { input, values });
                    } else {
                        e.notes.push("h is not positive at the entry valuation; no bound computed".into());
                    }
                }
            }
        } else {
            e.notes.push("no certificate found".into());
        }
        match &entry {
            Some(pv) => {
                let emp = estimate_tail(l, pv, ks, trials, seed)?;
                e.post_check = e.bounds.as_ref().map(|b| post_check(&b.values, &emp));
                e.empirical = Some(emp);
            }
            None => e.notes.push("entry valuation is not deterministic; no simulation".into()),
        }
        if let Some(pc) = &e.post_check {
            if !pc.passed {
                writeln!(err, "warning: loop {i}: bound below Wilson-95 lower limit at k = {:?}", pc.failures)?;
            }
        }
        loops.push(e);
    }
    let init = prog.pvars.iter().cloned().zip(init.iter().copied()).collect();
    Ok(AnalysisReport {
        schema: SCHEMA,
        tool: "astprove",
        version: env!("CARGO_PKG_VERSION"),
        program_sha256: format!("{:x}", Sha256::digest(text.as_bytes())),
        seed,
        trials,
        ks: ks.to_vec(),
        init,
        loops,
    })
}

fn post_check(bounds: &[crate::tailbounds::BoundResult], emp: &[TailEstimate]) -> PostCheck {
    let failures: Vec<u64> = bounds
        .iter()
        .filter_map(|b| emp.iter().find(|e| e.k == b.k).filter(|e| b.bound < e.wilson95.0).map(|e| e.k))
        .collect();
    PostCheck { passed: failures.is_empty(), failures }
}
