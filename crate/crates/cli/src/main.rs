//! Batch experiment driver for the `fqvar` library.
//!
//! Subcommands map one-to-one onto the library's report entry points:
//! single-case deep reports are emitted as JSON, q-scan tables as CSV (with
//! the producing configuration echoed in `#` preamble lines).  All output is
//! deterministic: identical configuration, including the seed and regardless
//! of the thread count, yields byte-identical bytes.
//!
//! Exit codes: 0 success; 2 precondition failure (a machine-readable
//! `{"error": {...}}` object is written to stderr); 3 enumeration budget
//! exceeded; 64 unknown subcommand.  The `FQVAR_THREADS` environment
//! variable sets the worker-thread count (0 or unset = automatic); its raw
//! value is echoed in every report.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use fqvar::characters::{character_census, enumerate_characters, primitive_even_count};
use fqvar::field::{construct_field, FiniteField};
use fqvar::genlfunc::{detect_recurrence, euler_product_check, genl_coefficients};
use fqvar::lfunctions::frobenius_spectrum;
use fqvar::polyring::{self, parse_poly, Poly};
use fqvar::unitgroup::build_unit_group;
use fqvar::variance::{
    conjecture_scan, dual_transfer, psi_hybrid, theorem_i_report, theorem_iii_report,
    variance_report, variance_spectral, SPECTRAL_PHI_CAP,
};
use fqvar::{Error, Result};

/// Hard cap on the number of rows a theorem scan may enumerate.
const SCAN_ROW_CAP: u128 = 100_000;

#[derive(Parser)]
#[command(
    name = "fqvar",
    version = fqvar::VERSION,
    about = "Prime-polynomial variance experiments over F_q[T]",
    disable_help_subcommand = true
)]
struct Cli {
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format; defaults to json for single-case subcommands and csv
    /// for scan subcommands.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Character census mod Q: total, even, and primitive-even counts.
    Characters {
        /// Field size as a prime power ("3", "9") or "p=3,r=2".
        #[arg(long)]
        q: String,
        /// Modulus: coefficient list "c0,c1,..." or a polynomial in T.
        #[arg(long = "Q")]
        modulus: String,
    },
    /// Per-character L-function data mod Q: parity, primitivity, Frobenius
    /// phases, and the RH deviation.  The trivial character has no finite
    /// L-polynomial and is skipped; imprimitive characters have no
    /// unitarized spectrum, so their rows carry null spectrum fields.
    Lfunc {
        #[arg(long)]
        q: String,
        #[arg(long = "Q")]
        modulus: String,
    },
    /// Full variance report for one (n, h, Q): mean value, direct and
    /// mean-centered variance, spectral cross-check, main-term comparison.
    Variance {
        #[arg(long)]
        q: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        h: usize,
        #[arg(long = "Q")]
        modulus: String,
    },
    /// Scan of the unconditional short-interval-dominant statement: exact
    /// Lambda-sum identities and main-term residuals, one row per (q, Q)
    /// with deg Q > h.
    Theorem1 {
        /// Comma-separated prime powers, e.g. "3,5,7".
        #[arg(long)]
        qs: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        h: usize,
        /// Smallest modulus degree scanned (default h+1).
        #[arg(long)]
        deg_q_min: Option<usize>,
        /// Largest modulus degree scanned (default n+1).
        #[arg(long)]
        deg_q_max: Option<usize>,
    },
    /// Scan of the progression-dominant main term: spectral variance against
    /// the primitive-even main term with its error envelope, one row per
    /// (q, Q) with deg Q <= n.
    Theorem2 {
        #[arg(long)]
        qs: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        h: usize,
        /// Smallest modulus degree scanned (default 1).
        #[arg(long)]
        deg_q_min: Option<usize>,
        /// Largest modulus degree scanned (default min(3, n)).
        #[arg(long)]
        deg_q_max: Option<usize>,
    },
    /// Scan of the statement conditional on the hybrid equidistribution
    /// hypothesis: squarefree moduli with 3 <= deg Q <= h+2.
    Theorem3 {
        #[arg(long)]
        qs: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        h: usize,
        /// Smallest modulus degree scanned (default 3).
        #[arg(long)]
        deg_q_min: Option<usize>,
        /// Largest modulus degree scanned (default h+2).
        #[arg(long)]
        deg_q_max: Option<usize>,
    },
    /// Hybrid equidistribution scan: averages of |tr Theta^n|^2 over
    /// character families mod T^l, mod random squarefree Q of degree m, and
    /// mod T^l*Q, against their large-q references.
    Conjecture {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        qs: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        moduli_per_field: usize,
    },
    /// Generalized series for a character pair (chi mod Q1, chi* mod T^m):
    /// coefficients, Euler-product cross-check, and the recurrence probe.
    Genl {
        #[arg(long)]
        q: String,
        #[arg(long = "Q1")]
        q1: String,
        /// Index of chi in the enumeration of characters mod Q1 (0 = trivial).
        #[arg(long)]
        chi_index: usize,
        /// Exponent of the twist modulus T^m.
        #[arg(long)]
        m: usize,
        /// Index of chi* in the enumeration of characters mod T^m.
        #[arg(long)]
        chistar_index: usize,
        #[arg(long)]
        nmax: usize,
        #[arg(long)]
        max_order: usize,
        /// Relative tolerance for the recurrence probe.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Embedded invariant battery across all modules; exits nonzero on any
    /// failure.
    Selftest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if e.kind() == ErrorKind::InvalidSubcommand {
                let _ = e.print();
                return ExitCode::from(64);
            }
            // --help/--version exit 0 here; usage errors exit 2.
            e.exit();
        }
    };
    let threads = init_threads();
    match dispatch(&cli, &threads) {
        Ok(code) => code,
        Err(err) => {
            let obj = json!({ "error": { "kind": error_kind(&err), "message": err.to_string() } });
            eprintln!("{obj}");
            if err.is_budget() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(cli: &Cli, threads: &str) -> Result<ExitCode> {
    let (content, code) = match &cli.cmd {
        Cmd::Characters { q, modulus } => {
            ensure_json(cli.format)?;
            (run_characters(q, modulus, threads)?, ExitCode::SUCCESS)
        }
        Cmd::Lfunc { q, modulus } => {
            ensure_json(cli.format)?;
            (run_lfunc(q, modulus, threads)?, ExitCode::SUCCESS)
        }
        Cmd::Variance { q, n, h, modulus } => {
            ensure_json(cli.format)?;
            (run_variance(q, *n, *h, modulus, threads)?, ExitCode::SUCCESS)
        }
        Cmd::Theorem1 {
            qs,
            n,
            h,
            deg_q_min,
            deg_q_max,
        } => (
            run_theorem1(qs, *n, *h, *deg_q_min, *deg_q_max, threads, scan_format(cli.format))?,
            ExitCode::SUCCESS,
        ),
        Cmd::Theorem2 {
            qs,
            n,
            h,
            deg_q_min,
            deg_q_max,
        } => (
            run_theorem2(qs, *n, *h, *deg_q_min, *deg_q_max, threads, scan_format(cli.format))?,
            ExitCode::SUCCESS,
        ),
        Cmd::Theorem3 {
            qs,
            n,
            h,
            deg_q_min,
            deg_q_max,
        } => (
            run_theorem3(qs, *n, *h, *deg_q_min, *deg_q_max, threads, scan_format(cli.format))?,
            ExitCode::SUCCESS,
        ),
        Cmd::Conjecture {
            l,
            m,
            n,
            qs,
            seed,
            moduli_per_field,
        } => (
            run_conjecture(*l, *m, *n, qs, *seed, *moduli_per_field, threads, scan_format(cli.format))?,
            ExitCode::SUCCESS,
        ),
        Cmd::Genl {
            q,
            q1,
            chi_index,
            m,
            chistar_index,
            nmax,
            max_order,
            tol,
        } => {
            ensure_json(cli.format)?;
            (
                run_genl(q, q1, *chi_index, *m, *chistar_index, *nmax, *max_order, *tol, threads)?,
                ExitCode::SUCCESS,
            )
        }
        Cmd::Selftest => {
            let (content, ok) = run_selftest();
            (content, if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    };
    emit(&cli.out, content)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// Plumbing
// ---------------------------------------------------------------------------

fn init_threads() -> String {
    match std::env::var("FQVAR_THREADS") {
        Ok(raw) => {
            let n: usize = raw.trim().parse().unwrap_or(0);
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            raw
        }
        Err(_) => "auto".to_string(),
    }
}

fn emit(out: &Option<PathBuf>, content: String) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| {
            Error::Precondition(format!("cannot write output file {}: {e}", path.display()))
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn ensure_json(format: Option<Format>) -> Result<()> {
    if format == Some(Format::Csv) {
        return Err(Error::Precondition(
            "this subcommand emits a single-case JSON report; csv applies to scans".into(),
        ));
    }
    Ok(())
}

fn scan_format(format: Option<Format>) -> Format {
    format.unwrap_or(Format::Csv)
}

fn parse_field_spec(s: &str) -> Result<FiniteField> {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix("p=") {
        let mut p: Option<u64> = None;
        let mut r: u32 = 1;
        for part in rest.split(',') {
            let part = part.trim();
            if let Some(v) = part.strip_prefix("r=") {
                r = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad extension degree in '{s}'")))?;
            } else {
                p = Some(
                    part.parse()
                        .map_err(|_| Error::Parse(format!("bad characteristic in '{s}'")))?,
                );
            }
        }
        let p = p.ok_or_else(|| Error::Parse(format!("missing characteristic in '{s}'")))?;
        construct_field(p, r)
    } else {
        let qv: u64 = t
            .parse()
            .map_err(|_| Error::Parse(format!("field size '{s}' is not an integer or p=..,r=..")))?;
        let (p, r) = split_prime_power(qv)?;
        construct_field(p, r)
    }
}

fn split_prime_power(qv: u64) -> Result<(u64, u32)> {
    if qv < 2 {
        return Err(Error::Parse(format!("field size must be at least 2, got {qv}")));
    }
    let mut p = qv;
    let mut d = 2u64;
    while d * d <= qv {
        if qv % d == 0 {
            p = d;
            break;
        }
        d += 1;
    }
    let mut rest = qv;
    let mut r = 0u32;
    while rest % p == 0 {
        rest /= p;
        r += 1;
    }
    if rest != 1 {
        return Err(Error::Parse(format!("field size {qv} is not a prime power")));
    }
    Ok((p, r))
}

fn parse_qs(s: &str) -> Result<Vec<FiniteField>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(parse_field_spec(part)?);
    }
    if out.is_empty() {
        return Err(Error::Parse(format!("empty field list '{s}'")));
    }
    Ok(out)
}

/// Polynomial argument: a coefficient list "c0,c1,..." (constant first) or a
/// symbolic polynomial in T such as "T^3+2T+1".
fn parse_poly_arg(field: &FiniteField, s: &str) -> Result<Poly> {
    let t = s.trim();
    if t.contains(',') || t.chars().all(|c| c.is_ascii_digit()) {
        let ints: Vec<i64> = t
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::Parse(format!("bad coefficient '{x}' in '{s}'")))
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(Poly::from_ints(field, &ints))
    } else {
        parse_poly(field, t)
    }
}

fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::NotPrime(_) => "not_prime",
        Error::FieldTooLarge { .. } => "field_too_large",
        Error::DegreeZero => "degree_zero",
        Error::DivisionByZero => "division_by_zero",
        Error::NotAUnit(_) => "not_a_unit",
        Error::Budget { .. } => "budget",
        Error::MismatchedField => "mismatched_field",
        Error::NoFiniteLPolynomial => "no_finite_l_polynomial",
        Error::CompletionRequiresPrimitive => "completion_requires_primitive",
        Error::TrivialZeroStructure { .. } => "trivial_zero_structure",
        Error::RhViolation { .. } => "rh_violation",
        Error::ExplicitFormulaMismatch { .. } => "explicit_formula_mismatch",
        Error::InvolutionTransfer => "involution_transfer",
        Error::RootFinder { .. } => "root_finder",
        Error::Precondition(_) => "precondition",
        Error::RouteDisagreement(_) => "route_disagreement",
        Error::Parse(_) => "parse",
    }
}

/// A scan table: configuration preamble plus ordered rows.
struct Table {
    preamble: Vec<(&'static str, String)>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

fn render_table(t: &Table, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = String::new();
            for (k, v) in &t.preamble {
                s.push_str(&format!("# {k} = {v}\n"));
            }
            s.push_str(&t.columns.join(","));
            s.push('\n');
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(csv_cell).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let mut config = Map::new();
            for (k, v) in &t.preamble {
                config.insert((*k).to_string(), Value::String(v.clone()));
            }
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|row| {
                    let mut obj = Map::new();
                    for (c, v) in t.columns.iter().zip(row) {
                        obj.insert((*c).to_string(), v.clone());
                    }
                    Value::Object(obj)
                })
                .collect();
            to_pretty(&json!({ "config": Value::Object(config), "rows": rows }))
        }
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "nan".to_string(),
        other => other.to_string(),
    }
}

fn fval(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// All monic moduli of the given degree with Q(0) ≠ 0, in rank order.
fn moduli_of_degree(field: &FiniteField, d: usize) -> Result<Vec<Poly>> {
    let mut out = Vec::new();
    for qp in polyring::enumerate_monic(field, d)? {
        if qp.constant_term().rank() != 0 {
            out.push(qp);
        }
    }
    Ok(out)
}

fn check_scan_size(fields: &[FiniteField], dmin: usize, dmax: usize) -> Result<()> {
    let mut total: u128 = 0;
    for field in fields {
        for d in dmin..=dmax {
            let q = field.q() as u128;
            total = total.saturating_add((q - 1).saturating_mul(q.saturating_pow(d as u32 - 1)));
        }
    }
    if total > SCAN_ROW_CAP {
        return Err(Error::Budget {
            what: "scan row count",
            value: total,
            cap: SCAN_ROW_CAP,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Single-case subcommands (JSON)
// ---------------------------------------------------------------------------

fn run_characters(q: &str, modulus: &str, threads: &str) -> Result<String> {
    let field = parse_field_spec(q)?;
    let qp = parse_poly_arg(&field, modulus)?;
    let group = Arc::new(build_unit_group(&qp)?);
    let census = character_census(&group);
    Ok(to_pretty(&json!({
        "version": fqvar::VERSION,
        "subcommand": "characters",
        "threads": threads,
        "q": field.q(),
        "modulus": polyring::pretty(group.modulus()),
        "total": census.total,
        "even": census.even,
        "primitive_even": census.primitive_even,
        "nonprimitive_even": census.nonprimitive_even,
    })))
}

fn run_lfunc(q: &str, modulus: &str, threads: &str) -> Result<String> {
    let field = parse_field_spec(q)?;
    let qp = parse_poly_arg(&field, modulus)?;
    let group = Arc::new(build_unit_group(&qp)?);
    let mut rows = Vec::new();
    for chi in &enumerate_characters(&group) {
        if chi.is_trivial() {
            continue;
        }
        // The unitarized spectrum exists only for primitive characters
        // (imprimitive ones carry extra inverse roots off the q^{1/2}
        // circle); their rows keep the classification fields and leave the
        // spectrum fields null.
        if chi.is_primitive() {
            let spec = frobenius_spectrum(chi)?;
            rows.push(json!({
                "exps": chi.exps(),
                "even": chi.is_even(),
                "primitive": true,
                "d": spec.d,
                "phases": spec.phases,
                "rh_max_deviation": spec.rh_max_deviation,
            }));
        } else {
            rows.push(json!({
                "exps": chi.exps(),
                "even": chi.is_even(),
                "primitive": false,
                "d": Value::Null,
                "phases": Value::Null,
                "rh_max_deviation": Value::Null,
            }));
        }
    }
    Ok(to_pretty(&json!({
        "version": fqvar::VERSION,
        "subcommand": "lfunc",
        "threads": threads,
        "q": field.q(),
        "modulus": polyring::pretty(group.modulus()),
        "trivial_character_skipped": true,
        "characters": rows,
    })))
}

fn run_variance(q: &str, n: usize, h: usize, modulus: &str, threads: &str) -> Result<String> {
    let field = parse_field_spec(q)?;
    let qp = parse_poly_arg(&field, modulus)?;
    let mut report = variance_report(n, h, &qp)?;
    report.threads = threads.to_string();
    let v = serde_json::to_value(&report).expect("serializable report");
    Ok(to_pretty(&v))
}

#[allow(clippy::too_many_arguments)]
fn run_genl(
    q: &str,
    q1: &str,
    chi_index: usize,
    m: usize,
    chistar_index: usize,
    nmax: usize,
    max_order: usize,
    tol: f64,
    threads: &str,
) -> Result<String> {
    let field = parse_field_spec(q)?;
    let q1p = parse_poly_arg(&field, q1)?;
    let group1 = Arc::new(build_unit_group(&q1p)?);
    let chars1 = enumerate_characters(&group1);
    let chi = chars1.get(chi_index).ok_or_else(|| {
        Error::Precondition(format!(
            "chi-index {chi_index} out of range: {} characters mod Q1",
            chars1.len()
        ))
    })?;
    if m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    let tm = Poly::monomial(&field, field.one(), m);
    let groupm = Arc::new(build_unit_group(&tm)?);
    let stars = enumerate_characters(&groupm);
    let chistar = stars.get(chistar_index).ok_or_else(|| {
        Error::Precondition(format!(
            "chistar-index {chistar_index} out of range: {} characters mod T^{m}",
            stars.len()
        ))
    })?;

    let series = genl_coefficients(chi, chistar, nmax)?;
    let cut = nmax.min(6);
    let euler_dev = euler_product_check(&series, cut)?;
    let fit = detect_recurrence(&series, max_order, tol)?;
    let coeffs: Vec<[f64; 2]> = series.coeffs.iter().map(|c| [c.re, c.im]).collect();
    Ok(to_pretty(&json!({
        "version": fqvar::VERSION,
        "subcommand": "genl",
        "threads": threads,
        "q": field.q(),
        "Q1": polyring::pretty(group1.modulus()),
        "chi_index": chi_index,
        "chi_exps": chi.exps(),
        "m": m,
        "chistar_index": chistar_index,
        "chistar_exps": chistar.exps(),
        "nmax": nmax,
        "max_order": max_order,
        "tol": tol,
        "coeffs": coeffs,
        "euler_degree_cut": cut,
        "euler_max_deviation": euler_dev,
        "fit": serde_json::to_value(&fit).expect("serializable fit"),
    })))
}

// ---------------------------------------------------------------------------
// Scan subcommands (CSV by default)
// ---------------------------------------------------------------------------

fn run_theorem1(
    qs: &str,
    n: usize,
    h: usize,
    dmin: Option<usize>,
    dmax: Option<usize>,
    threads: &str,
    format: Format,
) -> Result<String> {
    let fields = parse_qs(qs)?;
    let dmin = dmin.unwrap_or(h + 1);
    let dmax = dmax.unwrap_or(n + 1);
    if dmin <= h {
        return Err(Error::Precondition(format!(
            "this scan requires deg Q > h (deg-q-min = {dmin}, h = {h})"
        )));
    }
    if dmin > dmax {
        return Err(Error::Precondition(format!(
            "empty degree range {dmin}..={dmax}"
        )));
    }
    check_scan_size(&fields, dmin, dmax)?;

    let mut rows = Vec::new();
    for field in &fields {
        for d in dmin..=dmax {
            let moduli = moduli_of_degree(field, d)?;
            let reports: Vec<_> = moduli
                .par_iter()
                .map(|qp| theorem_i_report(n, h, qp))
                .collect::<Result<Vec<_>>>()?;
            for rep in reports {
                let main = rep.theorem_main_term.unwrap_or(f64::NAN);
                let ratio = rep.theorem_ratio.unwrap_or(rep.v_direct / main);
                rows.push(vec![
                    json!(rep.q),
                    json!(rep.n),
                    json!(rep.h),
                    Value::String(rep.modulus.clone()),
                    json!(rep.phi),
                    Value::String(rep.mean.clone()),
                    fval(rep.v_direct),
                    Value::String(rep.s1.clone().unwrap_or_default()),
                    Value::String(rep.s2.clone().unwrap_or_default()),
                    fval(main),
                    fval(rep.theorem_residual.unwrap_or(f64::NAN)),
                    fval(rep.theorem_envelope.unwrap_or(f64::NAN)),
                    fval(rep.theorem_constant.unwrap_or(f64::NAN)),
                    fval(ratio),
                ]);
            }
        }
    }
    let table = Table {
        preamble: vec![
            ("version", fqvar::VERSION.to_string()),
            ("subcommand", "theorem1".to_string()),
            ("qs", qs.trim().to_string()),
            ("n", n.to_string()),
            ("h", h.to_string()),
            ("deg_q_min", dmin.to_string()),
            ("deg_q_max", dmax.to_string()),
            ("threads", threads.to_string()),
        ],
        columns: vec![
            "q", "n", "h", "Q", "phi", "mean", "v_direct", "s1", "s2", "main_term", "residual",
            "envelope", "constant", "ratio",
        ],
        rows,
    };
    Ok(render_table(&table, format))
}

fn run_theorem2(
    qs: &str,
    n: usize,
    h: usize,
    dmin: Option<usize>,
    dmax: Option<usize>,
    threads: &str,
    format: Format,
) -> Result<String> {
    let fields = parse_qs(qs)?;
    let dmin = dmin.unwrap_or(1);
    let dmax = dmax.unwrap_or(n.min(3));
    if n == 0 || h >= n {
        return Err(Error::Precondition(format!(
            "this scan requires 0 <= h <= n-1 (got n = {n}, h = {h})"
        )));
    }
    if dmin == 0 || dmax > n || dmin > dmax {
        return Err(Error::Precondition(format!(
            "this scan requires 1 <= deg Q <= n (got degree range {dmin}..={dmax}, n = {n})"
        )));
    }
    check_scan_size(&fields, dmin, dmax)?;

    let mut rows = Vec::new();
    let mut skipped: u64 = 0;
    for field in &fields {
        let qq = field.q();
        for d in dmin..=dmax {
            // Skip moduli whose Q-tilde character group would exceed the
            // spectral cap; the row budget is the group size.
            let moduli: Vec<Poly> = moduli_of_degree(field, d)?
                .into_iter()
                .filter(|qp| {
                    let phi = polyring::euler_phi(qp).unwrap_or(u64::MAX);
                    let pred = (qq as u128 - 1)
                        * (qq as u128).saturating_pow((n - h - 1) as u32)
                        * phi as u128;
                    if pred > SPECTRAL_PHI_CAP {
                        return false;
                    }
                    true
                })
                .collect();
            skipped += ((qq as u64 - 1) * qq.pow(d as u32 - 1)) - moduli.len() as u64;
            let specs: Vec<_> = moduli
                .par_iter()
                .map(|qp| variance_spectral(n, h, qp).map(|s| (qp.clone(), s)))
                .collect::<Result<Vec<_>>>()?;
            for (qp, spec) in specs {
                let dq = qp.degree().unwrap_or(0);
                let residual = (spec.full - spec.primitive_even_main).abs();
                let envelope =
                    (qq as f64).powi(h as i32) * ((n - h - 1 + dq) as f64).powi(2);
                rows.push(vec![
                    json!(qq),
                    json!(n),
                    json!(h),
                    Value::String(polyring::pretty(&qp)),
                    json!(polyring::euler_phi(&qp)?),
                    json!(spec.phi_qtilde),
                    fval(spec.full),
                    fval(spec.primitive_even_main),
                    fval(residual),
                    fval(envelope),
                    fval(residual / envelope),
                ]);
            }
        }
    }
    let table = Table {
        preamble: vec![
            ("version", fqvar::VERSION.to_string()),
            ("subcommand", "theorem2".to_string()),
            ("qs", qs.trim().to_string()),
            ("n", n.to_string()),
            ("h", h.to_string()),
            ("deg_q_min", dmin.to_string()),
            ("deg_q_max", dmax.to_string()),
            ("skipped_over_spectral_cap", skipped.to_string()),
            ("threads", threads.to_string()),
        ],
        columns: vec![
            "q",
            "n",
            "h",
            "Q",
            "phi",
            "phi_qtilde",
            "v_full",
            "primitive_even_main",
            "residual",
            "envelope",
            "constant",
        ],
        rows,
    };
    Ok(render_table(&table, format))
}

fn run_theorem3(
    qs: &str,
    n: usize,
    h: usize,
    dmin: Option<usize>,
    dmax: Option<usize>,
    threads: &str,
    format: Format,
) -> Result<String> {
    let fields = parse_qs(qs)?;
    let dmin = dmin.unwrap_or(3);
    let dmax = dmax.unwrap_or(h + 2);
    if dmin < 3 || dmin > dmax {
        return Err(Error::Precondition(format!(
            "this scan requires 3 <= deg Q <= h+2 (got degree range {dmin}..={dmax}, h = {h})"
        )));
    }
    check_scan_size(&fields, dmin, dmax)?;

    let mut rows = Vec::new();
    for field in &fields {
        for d in dmin..=dmax {
            let moduli: Vec<Poly> = moduli_of_degree(field, d)?
                .into_iter()
                .filter(|qp| matches!(polyring::mobius(qp), Ok(mu) if mu != 0))
                .collect();
            let reports: Vec<_> = moduli
                .par_iter()
                .map(|qp| theorem_iii_report(n, h, qp))
                .collect::<Result<Vec<_>>>()?;
            for rep in reports {
                rows.push(vec![
                    json!(rep.q),
                    json!(rep.n),
                    json!(rep.h),
                    Value::String(rep.modulus.clone()),
                    json!(rep.phi),
                    Value::String(rep.mean.clone()),
                    fval(rep.v_direct),
                    fval(rep.theorem_main_term.unwrap_or(f64::NAN)),
                    fval(rep.theorem_ratio.unwrap_or(f64::NAN)),
                    Value::String(rep.theorem_label.clone().unwrap_or_default()),
                ]);
            }
        }
    }
    let table = Table {
        preamble: vec![
            ("version", fqvar::VERSION.to_string()),
            ("subcommand", "theorem3".to_string()),
            ("qs", qs.trim().to_string()),
            ("n", n.to_string()),
            ("h", h.to_string()),
            ("deg_q_min", dmin.to_string()),
            ("deg_q_max", dmax.to_string()),
            ("threads", threads.to_string()),
        ],
        columns: vec![
            "q", "n", "h", "Q", "phi", "mean", "v_direct", "main_term", "ratio", "label",
        ],
        rows,
    };
    Ok(render_table(&table, format))
}

#[allow(clippy::too_many_arguments)]
fn run_conjecture(
    l: usize,
    m: usize,
    n: usize,
    qs: &str,
    seed: u64,
    moduli_per_field: usize,
    threads: &str,
    format: Format,
) -> Result<String> {
    let fields = parse_qs(qs)?;
    let scan = conjecture_scan(l, m, n, &fields, moduli_per_field, seed)?;
    let rows = scan
        .iter()
        .map(|r| {
            vec![
                Value::String(r.kind.clone()),
                json!(r.q),
                Value::String(r.modulus.clone()),
                json!(r.phi),
                json!(r.characters),
                json!(r.n),
                fval(r.average),
                fval(r.reference),
                fval(r.deviation),
            ]
        })
        .collect();
    let table = Table {
        preamble: vec![
            ("version", fqvar::VERSION.to_string()),
            ("subcommand", "conjecture".to_string()),
            ("l", l.to_string()),
            ("m", m.to_string()),
            ("n", n.to_string()),
            ("qs", qs.trim().to_string()),
            ("seed", seed.to_string()),
            ("moduli_per_field", moduli_per_field.to_string()),
            ("threads", threads.to_string()),
        ],
        columns: vec![
            "kind",
            "q",
            "modulus",
            "phi",
            "characters",
            "n",
            "average",
            "reference",
            "deviation",
        ],
        rows,
    };
    Ok(render_table(&table, format))
}

// ---------------------------------------------------------------------------
// Selftest
// ---------------------------------------------------------------------------

fn run_selftest() -> (String, bool) {
    let mut lines = Vec::new();
    let mut failures = 0usize;
    let checks: Vec<(&str, Box<dyn Fn() -> Result<()>>)> = vec![
        ("prime number theorem identity", Box::new(selftest_pnt)),
        ("involution laws", Box::new(selftest_involution)),
        ("character census formulas", Box::new(selftest_census)),
        ("frobenius spectra", Box::new(selftest_spectra)),
        ("variance golden case", Box::new(selftest_variance_golden)),
        ("dual congruence transfer", Box::new(selftest_dual_transfer)),
        ("generalized euler product", Box::new(selftest_genl)),
        ("deterministic reruns", Box::new(selftest_determinism)),
    ];
    for (name, check) in checks {
        match check() {
            Ok(()) => lines.push(format!("ok   {name}")),
            Err(e) => {
                failures += 1;
                lines.push(format!("FAIL {name}: {e}"));
            }
        }
    }
    lines.push(format!(
        "selftest: {} passed, {} failed",
        8 - failures,
        failures
    ));
    (lines.join("\n") + "\n", failures == 0)
}

fn selfcheck(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::RouteDisagreement(msg.to_string()))
    }
}

fn selftest_pnt() -> Result<()> {
    for (p, r) in [(2u64, 1u32), (3, 1), (2, 2), (5, 1)] {
        let field = construct_field(p, r)?;
        let q = field.q() as u128;
        for n in 1..=6usize {
            let total = polyring::psi_total(&field, n)?;
            selfcheck(
                total == q.pow(n as u32),
                &format!("psi_total != q^n at q={q}, n={n}"),
            )?;
        }
    }
    Ok(())
}

fn selftest_involution() -> Result<()> {
    let field = construct_field(3, 1)?;
    for arank in 0..27u64 {
        let a = polyring::unrank_monic(&field, 3, arank);
        if a.constant_term().rank() == 0 {
            continue;
        }
        let astar = polyring::involution(&a)?;
        selfcheck(
            polyring::involution(&astar)? == a,
            "involution is not self-inverse",
        )?;
        for brank in 0..9u64 {
            let b = polyring::unrank_monic(&field, 2, brank);
            if b.constant_term().rank() == 0 {
                continue;
            }
            let lhs = polyring::involution(&a.mul(&b))?;
            let rhs = astar.mul(&polyring::involution(&b)?);
            selfcheck(lhs == rhs, "involution is not multiplicative")?;
        }
    }
    Ok(())
}

fn selftest_census() -> Result<()> {
    let field = construct_field(3, 1)?;
    for spec in ["T^2", "T^3", "T^2+1", "T^3+2T+1", "T^2+T"] {
        let qp = parse_poly(&field, spec)?;
        let group = Arc::new(build_unit_group(&qp)?);
        let census = character_census(&group);
        let formula = primitive_even_count(&qp)?;
        selfcheck(
            census.primitive_even == formula,
            &format!("primitive-even census mismatch at Q = {spec}"),
        )?;
        selfcheck(
            census.even == group.phi() / (field.q() - 1),
            &format!("even census mismatch at Q = {spec}"),
        )?;
    }
    Ok(())
}

fn selftest_spectra() -> Result<()> {
    let field = construct_field(5, 1)?;
    let qp = parse_poly(&field, "T^2+2")?;
    let group = Arc::new(build_unit_group(&qp)?);
    for chi in &enumerate_characters(&group) {
        if chi.is_trivial() {
            continue;
        }
        let spec = frobenius_spectrum(chi)?;
        selfcheck(
            spec.phases.len() == spec.d,
            "phase count disagrees with the completed degree",
        )?;
    }
    Ok(())
}

fn selftest_variance_golden() -> Result<()> {
    let field = construct_field(3, 1)?;
    let qp = parse_poly(&field, "T+1")?;
    let rep = variance_report(2, 0, &qp)?;
    selfcheck(rep.mean == "7/6", "mean value is not 7/6")?;
    selfcheck((rep.v_direct - 11.0 / 6.0).abs() < 1e-9, "V is not 11/6")?;
    selfcheck(
        (rep.v_tilde_direct - 29.0 / 18.0).abs() < 1e-9,
        "mean-centered variance is not 29/18",
    )?;
    selfcheck(
        rep.v_spectral
            .is_some_and(|v| (v - 29.0 / 18.0).abs() < 1e-9),
        "spectral variance is not 29/18",
    )?;
    Ok(())
}

fn selftest_dual_transfer() -> Result<()> {
    let field = construct_field(3, 1)?;
    let qp = parse_poly(&field, "T+2")?;
    let a = parse_poly(&field, "1")?;
    for brank in 0..9u64 {
        let b = polyring::unrank_monic(&field, 2, brank);
        for h in 0..=1usize {
            let center = b.mul_t_power(h + 1);
            let lhs = psi_hybrid(&center, h, &qp, &a)?;
            let rhs = dual_transfer(&b, h, &qp, &a)?;
            selfcheck(lhs == rhs, "dual transfer disagrees with the direct count")?;
        }
    }
    Ok(())
}

fn selftest_genl() -> Result<()> {
    let field = construct_field(3, 1)?;
    let chi = enumerate_characters(&Arc::new(build_unit_group(&parse_poly(&field, "T")?)?))[0].clone();
    let tsq = Poly::monomial(&field, field.one(), 2);
    let chistar = enumerate_characters(&Arc::new(build_unit_group(&tsq)?))[0].clone();
    let series = genl_coefficients(&chi, &chistar, 6)?;
    let dev = euler_product_check(&series, 6)?;
    selfcheck(dev < 1e-9, "euler product deviates on the zeta-like case")?;
    Ok(())
}

fn selftest_determinism() -> Result<()> {
    let field = construct_field(3, 1)?;
    let qp = parse_poly(&field, "T^2+1")?;
    let s1 = variance_spectral(4, 1, &qp)?;
    let s2 = variance_spectral(4, 1, &qp)?;
    selfcheck(
        s1.full.to_bits() == s2.full.to_bits()
            && s1.primitive_even_main.to_bits() == s2.primitive_even_main.to_bits(),
        "spectral variance reruns differ",
    )?;
    let group = Arc::new(build_unit_group(&qp)?);
    let chi = enumerate_characters(&group)[1].clone();
    let tm = Poly::monomial(&field, field.one(), 3);
    let chistar = enumerate_characters(&Arc::new(build_unit_group(&tm)?))[1].clone();
    let a = genl_coefficients(&chi, &chistar, 8)?;
    let b = genl_coefficients(&chi, &chistar, 8)?;
    for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
        selfcheck(
            x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits(),
            "generalized coefficients differ between reruns",
        )?;
    }
    Ok(())
}
