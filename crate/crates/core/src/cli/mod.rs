//! Command-line front end: single runs, sweeps to CSV, audits and slope fits.

pub mod fit;
pub mod parse;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::channels::ModeParams;
use crate::dts_protocols::{
    error_budget, ledger_for, run_case, Case, Diagnostics, ErrorBudget, MemoryLedger, ParamRanges,
    ProtocolConfig,
};
use crate::linalg::C64;
use crate::optimality_auditor::{audit, AuditReport};
use crate::qudit_gaussian::{full_family, qudit_ledger};
use crate::Error;

#[derive(Debug, Parser)]
#[command(
    name = "popcode",
    version,
    about = "Compression protocols for many copies of Gaussian and qudit states"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo draws.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one protocol and print its JSON report.
    Run(RunArgs),
    /// Run a cartesian grid of protocols and write CSV rows.
    Sweep(SweepArgs),
    /// Compare protocol memory with the lower bound.
    Audit(AuditArgs),
    /// Fit log-log slopes of a sweep CSV.
    Fit(FitArgs),
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct RangeArgs {
    /// Half-width of the box holding Re α and Im α.
    #[arg(long)]
    pub alpha_box: Option<f64>,
    /// Range of |α| as lo:hi.
    #[arg(long, value_parser = parse::interval)]
    pub abs_range: Option<(f64, f64)>,
    /// Range of arg α as lo:hi.
    #[arg(long, value_parser = parse::interval)]
    pub phase_range: Option<(f64, f64)>,
    /// Range of β as lo:hi.
    #[arg(long, value_parser = parse::interval)]
    pub beta_range: Option<(f64, f64)>,
}

impl RangeArgs {
    fn ranges(&self, params: &ModeParams) -> ParamRanges {
        let mut r = ParamRanges::around(params);
        if let Some(b) = self.alpha_box {
            r.alpha_box = b;
        }
        if let Some(a) = self.abs_range {
            r.abs_alpha = a;
        }
        if let Some(p) = self.phase_range {
            r.phase = p;
        }
        if let Some(b) = self.beta_range {
            r.beta = b;
        }
        r
    }
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct RunArgs {
    /// Case as 0-7 or a name such as `thermal`.
    #[arg(long, value_parser = parse::case)]
    #[serde(serialize_with = "ser_case")]
    pub case: Case,
    #[arg(long, value_parser = parse::sizes_one)]
    pub n: u64,
    #[arg(long)]
    pub delta: f64,
    /// Displacement as a complex literal, e.g. `0.3-0.1i`.
    #[arg(long, value_parser = parse::complex, default_value = "0", allow_hyphen_values = true)]
    #[serde(serialize_with = "ser_complex")]
    pub alpha: C64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo draws.
    #[arg(long = "mc", default_value_t = 200)]
    pub mc_samples: usize,
    /// Fixed tracked-mode cutoff; sized per draw when absent.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[command(flatten)]
    pub ranges: RangeArgs,
    /// Output file; a `.meta.json` sidecar is written next to it.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse::cases)]
    #[serde(serialize_with = "ser_cases")]
    pub case: ::std::vec::Vec<Case>,
    /// Sizes, e.g. `2^8..2^16` or `100,1000,10^4`.
    #[arg(long, value_parser = parse::sizes)]
    pub n: ::std::vec::Vec<u64>,
    #[arg(long, value_parser = parse::floats)]
    pub delta: ::std::vec::Vec<f64>,
    #[arg(long, value_parser = parse::complexes, default_value = "0", allow_hyphen_values = true)]
    #[serde(serialize_with = "ser_complexes")]
    pub alpha: ::std::vec::Vec<C64>,
    #[arg(long, value_parser = parse::floats, default_value = "0")]
    pub beta: ::std::vec::Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "mc", default_value_t = 200)]
    pub mc_samples: usize,
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[command(flatten)]
    pub ranges: RangeArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct AuditArgs {
    /// Displaced-thermal case to audit.
    #[arg(long, value_parser = parse::case, conflicts_with = "qudit_d", required_unless_present = "qudit_d")]
    #[serde(serialize_with = "ser_opt_case")]
    pub case: Option<Case>,
    /// Audit the full qudit family of this dimension instead.
    #[arg(long)]
    pub qudit_d: Option<usize>,
    #[arg(long, value_parser = parse::sizes)]
    pub n: ::std::vec::Vec<u64>,
    #[arg(long)]
    pub delta: f64,
    /// Independent-parameter count; must match the family when given.
    #[arg(long)]
    pub f: Option<u32>,
    #[arg(long, default_value_t = 1.0)]
    pub t_theta: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct FitArgs {
    /// Sweep CSV to fit.
    pub csv: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn ser_case<S: serde::Serializer>(c: &Case, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(c.id())
}

fn ser_opt_case<S: serde::Serializer>(c: &Option<Case>, s: S) -> Result<S::Ok, S::Error> {
    match c {
        Some(c) => s.serialize_some(&c.id()),
        None => s.serialize_none(),
    }
}

fn ser_cases<S: serde::Serializer>(c: &[Case], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(c.iter().map(|c| c.id()))
}

fn ser_complex<S: serde::Serializer>(c: &C64, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq([c.re, c.im])
}

fn ser_complexes<S: serde::Serializer>(c: &[C64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(c.iter().map(|c| [c.re, c.im]))
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn io(e: impl std::fmt::Display) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CutoffTooSmall { .. } => 3,
            Error::Numerical(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerCeilings {
    pub cbits: u64,
    pub qubits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub case: u8,
    pub n: u64,
    pub delta: f64,
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub beta: f64,
    pub seed: u64,
    pub mc_samples: usize,
    pub cutoff: Option<usize>,
    pub epsilon_hat: f64,
    pub epsilon_stderr: f64,
    /// Exact codec error, for the case without displacement.
    pub exact_error: Option<f64>,
    pub ledger: MemoryLedger,
    pub ledger_ceil: LedgerCeilings,
    pub diagnostics: Diagnostics,
    pub error_budget: ErrorBudget,
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub case: u8,
    pub n: u64,
    pub delta: f64,
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub beta: f64,
    pub epsilon_hat: f64,
    pub epsilon_stderr: f64,
    pub cbits: f64,
    pub qubits: f64,
    pub leakage: f64,
    pub seed: u64,
    pub cutoff: usize,
    pub mc_samples: usize,
}

pub const CSV_HEADER: [&str; 14] = [
    "case",
    "n",
    "delta",
    "alpha_re",
    "alpha_im",
    "beta",
    "epsilon_hat",
    "epsilon_stderr",
    "cbits",
    "qubits",
    "leakage",
    "seed",
    "cutoff",
    "mc_samples",
];

#[allow(clippy::too_many_arguments)]
fn protocol_config(
    case: Case,
    n: u64,
    delta: f64,
    alpha: C64,
    beta: f64,
    seed: u64,
    mc: usize,
    cutoff: Option<usize>,
    ranges: &RangeArgs,
) -> Result<ProtocolConfig, Failure> {
    let params = ModeParams::new(alpha, beta)?;
    let mut cfg = ProtocolConfig::new(case, n, delta, params);
    cfg.ranges = ranges.ranges(&params);
    cfg.seed = seed;
    cfg.mc_samples = mc;
    cfg.cutoff = cutoff;
    Ok(cfg)
}

pub fn run_report(cfg: &ProtocolConfig) -> Result<RunReport, Failure> {
    let r = run_case(cfg)?;
    let budget = error_budget(cfg)?;
    let exact_error = (cfg.case == Case::Thermal).then_some(r.epsilon_hat);
    Ok(RunReport {
        case: cfg.case.id(),
        n: cfg.n,
        delta: cfg.delta,
        alpha_re: cfg.params.alpha().re,
        alpha_im: cfg.params.alpha().im,
        beta: cfg.params.beta(),
        seed: cfg.seed,
        mc_samples: cfg.mc_samples,
        cutoff: cfg.cutoff,
        epsilon_hat: r.epsilon_hat,
        epsilon_stderr: r.epsilon_stderr,
        exact_error,
        ledger_ceil: LedgerCeilings {
            cbits: r.ledger.cbits_ceil(),
            qubits: r.ledger.qubits_ceil(),
        },
        ledger: r.ledger,
        diagnostics: r.diagnostics,
        error_budget: budget,
    })
}

fn sweep_rows(args: &SweepArgs) -> Result<Vec<SweepRow>, Failure> {
    let mut rows = Vec::new();
    for &case in &args.case {
        for &alpha in &args.alpha {
            for &beta in &args.beta {
                for &delta in &args.delta {
                    for &n in &args.n {
                        let cfg = protocol_config(
                            case,
                            n,
                            delta,
                            alpha,
                            beta,
                            args.seed,
                            args.mc_samples,
                            args.cutoff,
                            &args.ranges,
                        )?;
                        let r = run_case(&cfg)?;
                        let mc = if r.diagnostics.max_cutoff == 0 {
                            0
                        } else {
                            cfg.mc_samples
                        };
                        rows.push(SweepRow {
                            case: case.id(),
                            n,
                            delta,
                            alpha_re: alpha.re,
                            alpha_im: alpha.im,
                            beta,
                            epsilon_hat: r.epsilon_hat,
                            epsilon_stderr: r.epsilon_stderr,
                            cbits: r.ledger.cbits,
                            qubits: r.ledger.qubits,
                            leakage: r.diagnostics.max_leakage,
                            seed: args.seed,
                            cutoff: r.diagnostics.max_cutoff,
                            mc_samples: mc,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<(), Failure> {
    let mut wtr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wtr.write_record(CSV_HEADER).map_err(Failure::io)?;
    }
    for r in rows {
        wtr.serialize(r).map_err(Failure::io)?;
    }
    wtr.flush().map_err(Failure::io)
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>, Failure> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| Failure::usage(e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Failure::usage(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    rdr.deserialize()
        .collect::<Result<Vec<SweepRow>, _>>()
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn audit_reports(args: &AuditArgs) -> Result<Vec<AuditReport>, Failure> {
    if let Some(d) = args.qudit_d {
        if d < 2 {
            return Err(Failure::usage("qudit dimension must be at least 2"));
        }
    }
    args.n
        .iter()
        .map(|&n| {
            let ledger = match (args.case, args.qudit_d) {
                (Some(c), _) => ledger_for(c, n, args.delta),
                (None, Some(d)) => qudit_ledger(full_family(d), n, args.delta),
                (None, None) => return Err(Failure::usage("give --case or --qudit-d")),
            };
            let f = args.f.unwrap_or(ledger.family.total());
            Ok(audit(&ledger, f, n, args.delta, args.t_theta)?)
        })
        .collect()
}

/// SHA-256 of the canonical JSON of the command configuration.
pub fn config_hash(command: &str, config: &impl Serialize) -> String {
    let canonical = serde_json::to_string(&json!({ "command": command, "config": config }))
        .expect("configuration serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn emit(
    out: Option<&Path>,
    body: &[u8],
    command: &str,
    config: &impl Serialize,
) -> Result<(), Failure> {
    match out {
        Some(p) => {
            fs::write(p, body).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?;
            let meta = json!({
                "tool": env!("CARGO_PKG_NAME"),
                "version": env!("CARGO_PKG_VERSION"),
                "timestamp": chrono::Utc::now().to_rfc3339(),
                "config_hash": config_hash(command, config),
            });
            let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
            fs::write(meta_path(p), text).map_err(Failure::io)
        }
        None => io::stdout().write_all(body).map_err(Failure::io),
    }
}

fn json_body(v: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Failure::usage("--jobs must be positive"));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global();
    }
    match cli.command {
        Command::Run(a) => {
            let cfg = protocol_config(
                a.case,
                a.n,
                a.delta,
                a.alpha,
                a.beta,
                a.seed,
                a.mc_samples,
                a.cutoff,
                &a.ranges,
            )?;
            let report = run_report(&cfg)?;
            emit(a.out.as_deref(), &json_body(&report), "run", &a)
        }
        Command::Sweep(a) => {
            let rows = sweep_rows(&a)?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            emit(a.out.as_deref(), &buf, "sweep", &a)
        }
        Command::Audit(a) => {
            let reports = audit_reports(&a)?;
            emit(a.out.as_deref(), &json_body(&reports), "audit", &a)
        }
        Command::Fit(a) => {
            let rows = read_csv(&a.csv)?;
            if rows.is_empty() {
                return Err(Failure::usage(format!("{}: no rows", a.csv.display())));
            }
            let fits = fit::fit_rows(&rows);
            emit(a.out.as_deref(), &json_body(&fits), "fit", &a)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("popcode: {}", f.message);
            f.code
        }
    }
}
