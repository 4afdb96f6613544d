//! Command-line front end.
//!
//! Every subcommand prints one JSON object on stdout carrying a
//! `provenance` block (tool version and the full argument echo). File
//! outputs carry their own headers. Failures print a JSON error object on
//! stderr: exit 2 for argument errors, 1 for computation errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::encoding::{oracle_check, qubit_count, qubit_count_qcd, Scheme};
use crate::error::{Error, Result};
use crate::fock_basis::{enumerate_basis, Basis};
use crate::hamiltonian::{build_mass_matrix, max_abs_element, sparsity, ModelParams};
use crate::io::{fmt_f64, write_basis, write_matrix};
use crate::observables::{pdf, qmax2, truncate_state, PdfTable};
use crate::spectrum::{
    lowest_eigenpairs_with, renormalize_with, BosonLevel, ConditionConvention, CouplingConvention, EigenOptions,
    EigenResult, RenormOptions, RenormTarget, Solver, DEFAULT_SEED, OVERLAP_DENSE_LIMIT,
};

/// The published qubit count for the QCD grid `(K, Λ⊥, n_f, n_c) = (20, 20, 5, 3)`.
const QCD_REFERENCE_TOTAL: u64 = 1360;

#[derive(Debug, Parser, Serialize)]
#[command(name = "lfdlcq", version, about = "DLCQ of the 1+1D Yukawa model")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true, env = "LFDLCQ_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// List the Fock basis of a (K, Q) block.
    Basis(BasisArgs),
    /// Write the mass matrix of a block in coordinate format.
    Ham(HamArgs),
    /// Lowest eigenvalues of a block.
    Spectrum(SpectrumArgs),
    /// Bare masses reproducing the physical ones.
    Renorm(RenormArgs),
    /// Parton distributions of an eigenstate.
    Pdf(PdfArgs),
    /// Measured sparsity against the analytic bounds.
    Sparsity(SparsityArgs),
    /// Qubit budget of an encoding.
    Resources(ResourcesArgs),
    /// Compare descriptor images with Hamiltonian images.
    OracleCheck(OracleArgs),
    /// PDFs of the M = 18.96 state at three probing scales.
    Fig2(Fig2Args),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum CouplingArg {
    Identity,
    Sqrt4pi,
}

impl From<CouplingArg> for CouplingConvention {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Identity => CouplingConvention::Identity,
            CouplingArg::Sqrt4pi => CouplingConvention::Sqrt4pi,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ConditionArg {
    MassSquared,
    Literal,
}

impl From<ConditionArg> for ConditionConvention {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::MassSquared => ConditionConvention::MassSquared,
            ConditionArg::Literal => ConditionConvention::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BosonLevelArg {
    Lowest,
    SingleBosonOverlap,
}

impl From<BosonLevelArg> for BosonLevel {
    fn from(b: BosonLevelArg) -> Self {
        match b {
            BosonLevelArg::Lowest => BosonLevel::Lowest,
            BosonLevelArg::SingleBosonOverlap => BosonLevel::SingleBosonOverlap,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SolverArg {
    Auto,
    Dense,
    Lanczos,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => Solver::Auto,
            SolverArg::Dense => Solver::Dense,
            SolverArg::Lanczos => Solver::Lanczos,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct BasisArgs {
    #[arg(long)]
    k: u32,
    /// Charge sector; all charges when omitted.
    #[arg(long, allow_negative_numbers = true)]
    q: Option<i32>,
    #[arg(long)]
    exclude_angel: bool,
    /// Write the listing here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("coupling_value").required(true).args(["g", "lambda"])))]
struct ModelArgs {
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    q: i32,
    /// Bare boson mass.
    #[arg(long)]
    mb: f64,
    /// Bare fermion mass.
    #[arg(long)]
    mf: f64,
    /// Hamiltonian coupling.
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
    /// Lagrangian coupling, converted with `--coupling`.
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = CouplingArg::Identity)]
    coupling: CouplingArg,
    #[arg(long, default_value_t = 2048)]
    cutoff: u32,
    #[arg(long)]
    exclude_angel: bool,
}

impl ModelArgs {
    fn g(&self) -> f64 {
        match (self.g, self.lambda) {
            (Some(g), _) => g,
            (None, Some(l)) => CouplingConvention::from(self.coupling).g(l),
            (None, None) => unreachable!("clap requires one of --g and --lambda"),
        }
    }

    fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.mb, self.mf, self.g(), self.cutoff, self.k, Some(self.q))
    }

    fn basis(&self) -> Result<Basis> {
        let b = enumerate_basis(self.k, Some(self.q))?;
        Ok(if self.exclude_angel { b.without_angel() } else { b })
    }
}

#[derive(Debug, Args, Serialize)]
struct HamArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EigenArgs {
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    solver: SolverArg,
    /// Seed of the Lanczos start vector.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl EigenArgs {
    fn options(&self, count: usize) -> EigenOptions {
        let mut o = EigenOptions::new(count, self.tol);
        o.solver = self.solver.into();
        o.seed = self.seed;
        o
    }
}

#[derive(Debug, Args, Serialize)]
struct SpectrumArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    nev: usize,
    #[command(flatten)]
    eigen: EigenArgs,
}

#[derive(Debug, Args, Serialize)]
struct RenormArgs {
    /// Physical boson mass.
    #[arg(long)]
    mbt: f64,
    /// Physical fermion mass.
    #[arg(long)]
    mft: f64,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, default_value_t = 2048)]
    cutoff: u32,
    #[arg(long)]
    k: u32,
    #[command(flatten)]
    conventions: ConventionArgs,
}

#[derive(Debug, Args, Serialize)]
struct ConventionArgs {
    #[arg(long, value_enum, default_value_t = CouplingArg::Identity)]
    coupling: CouplingArg,
    #[arg(long, value_enum, default_value_t = ConditionArg::MassSquared)]
    condition: ConditionArg,
    #[arg(long, value_enum, default_value_t = BosonLevelArg::Lowest)]
    boson_level: BosonLevelArg,
    /// Relative tolerance on the renormalization conditions.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_sweeps: usize,
    #[arg(long)]
    exclude_angel: bool,
}

impl ConventionArgs {
    fn options(&self) -> RenormOptions {
        RenormOptions {
            coupling: self.coupling.into(),
            condition: self.condition.into(),
            boson_level: self.boson_level.into(),
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            exclude_angel: self.exclude_angel,
            ..RenormOptions::default()
        }
    }
}

/// `lowest` or a zero-based eigenvalue index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
enum StateSel {
    Lowest,
    Index(usize),
}

fn parse_state_sel(s: &str) -> std::result::Result<StateSel, String> {
    if s == "lowest" {
        return Ok(StateSel::Lowest);
    }
    s.parse().map(StateSel::Index).map_err(|_| format!("expected `lowest` or an index, got {s:?}"))
}

impl StateSel {
    fn index(self) -> usize {
        match self {
            StateSel::Lowest => 0,
            StateSel::Index(i) => i,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct PdfArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "lowest", value_parser = parse_state_sel)]
    state: StateSel,
    /// Probing scale `Q^2`; no truncation when omitted.
    #[arg(long)]
    qsq: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// JSON sidecar; defaults to the CSV path with `.json` appended.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[command(flatten)]
    eigen: EigenArgs,
}

#[derive(Debug, Args, Serialize)]
struct SparsityArgs {
    #[arg(long, default_value_t = 3)]
    k_min: u32,
    #[arg(long, default_value_t = 12)]
    k_max: u32,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    q: i32,
    /// Parameters only need to be generic.
    #[arg(long, default_value_t = 1.3)]
    mb: f64,
    #[arg(long, default_value_t = 0.7)]
    mf: f64,
    #[arg(long, default_value_t = 0.9)]
    g: f64,
    #[arg(long, default_value_t = 2048)]
    cutoff: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SchemeArg {
    DirectDirect,
    DirectCompact,
    Compact,
    Qcd,
}

#[derive(Debug, Args, Serialize)]
struct ResourcesArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long)]
    k: u32,
    /// Transverse cutoff, QCD only.
    #[arg(long)]
    lperp: Option<u32>,
    /// Flavors, QCD only.
    #[arg(long)]
    nf: Option<u32>,
    /// Colors, QCD only.
    #[arg(long)]
    nc: Option<u32>,
}

#[derive(Debug, Args, Serialize)]
struct OracleArgs {
    #[arg(long)]
    k: u32,
}

#[derive(Debug, Args, Serialize)]
struct Fig2Args {
    #[arg(long, default_value_t = 14)]
    k: u32,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    q: i32,
    #[arg(long, default_value_t = 6.7)]
    mbt: f64,
    #[arg(long, default_value_t = 1.0)]
    mft: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 2048)]
    cutoff: u32,
    #[arg(long, value_enum, default_value_t = CouplingArg::Sqrt4pi)]
    coupling: CouplingArg,
    #[arg(long, value_enum, default_value_t = ConditionArg::MassSquared)]
    condition: ConditionArg,
    #[arg(long, value_enum, default_value_t = BosonLevelArg::SingleBosonOverlap)]
    boson_level: BosonLevelArg,
    /// The eigenstate is the one whose mass is closest to this.
    #[arg(long, default_value_t = 18.96)]
    target_mass: f64,
    /// Probing scales; `max` means no truncation.
    #[arg(long, value_delimiter = ',', default_value = "max,400,289")]
    qsq: Vec<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Parses `argv` (program name first), runs one subcommand and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return 0;
            }
            eprint!("{}", e.render());
            eprintln!("{}", json!({"error": {"kind": "usage", "message": e.kind().to_string()}}));
            return 2;
        }
    };
    match execute(&cli) {
        Ok((out, status)) => {
            println!("{out}");
            status
        }
        Err(e) => {
            eprintln!("{}", error_payload(&e));
            match e {
                Error::InvalidArgument(_) => 2,
                _ => 1,
            }
        }
    }
}

fn error_payload(e: &Error) -> Value {
    let mut body = json!({"kind": e.kind(), "message": e.to_string()});
    let extra = match e {
        Error::Convergence {
            best_residual,
            iterations,
        } => json!({"best_residual": best_residual, "iterations": iterations}),
        Error::RenormalizationFailed { sweeps, trace, .. } => json!({"sweeps": sweeps, "trace": trace}),
        Error::InfeasibleSeed { seed_mb2 } => json!({"seed_mb2": seed_mb2}),
        Error::ResourceLimit { dim, cap } => json!({"dim": dim, "cap": cap}),
        Error::Parse { line, .. } => json!({"line": line}),
        Error::DegenerateTruncation { kept } => json!({"kept": kept}),
        _ => Value::Null,
    };
    if !extra.is_null() {
        body["detail"] = extra;
    }
    json!({ "error": body })
}

fn provenance(cli: &Cli) -> Value {
    json!({
        "tool": "lfdlcq",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cli,
    })
}

fn execute(cli: &Cli) -> Result<(String, i32)> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        // a second build in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let prov = provenance(cli);
    let mut status = 0;
    let result = match &cli.command {
        Command::Basis(a) => cmd_basis(a, &prov)?,
        Command::Ham(a) => cmd_ham(a)?,
        Command::Spectrum(a) => cmd_spectrum(a)?,
        Command::Renorm(a) => cmd_renorm(a)?,
        Command::Pdf(a) => cmd_pdf(a, &prov)?,
        Command::Sparsity(a) => cmd_sparsity(a)?,
        Command::Resources(a) => cmd_resources(a)?,
        Command::OracleCheck(a) => {
            let report = oracle_check(a.k)?;
            if !report.passed() {
                status = 1;
            }
            json!({"passed": report.passed(), "report": report})
        }
        Command::Fig2(a) => cmd_fig2(a, &prov)?,
    };
    let out = json!({"provenance": prov, "result": result});
    Ok((out.to_string(), status))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_basis(a: &BasisArgs, prov: &Value) -> Result<Value> {
    let mut b = enumerate_basis(a.k, a.q)?;
    if a.exclude_angel {
        b = b.without_angel();
    }
    let summary = json!({"K": a.k, "Q": a.q, "dim": b.len(), "out": a.out});
    match &a.out {
        Some(p) => {
            let mut w = create(p)?;
            write_basis(&mut w, &b)?;
            w.flush()?;
            Ok(summary)
        }
        None => {
            // the listing follows the provenance line, the summary closes
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            writeln!(w, "{}", json!({ "provenance": prov }))?;
            write_basis(&mut w, &b)?;
            Ok(summary)
        }
    }
}

fn cmd_ham(a: &HamArgs) -> Result<Value> {
    let basis = a.model.basis()?;
    let params = a.model.params()?;
    let m = build_mass_matrix(&basis, &params)?;
    let max_el = max_abs_element(&m, a.model.k);
    let mut summary = json!({
        "dim": m.dim(),
        "nnz": m.nnz(),
        "sparsity": sparsity(&m),
        "max_element": max_el,
        "g": params.g,
    });
    match &a.out {
        Some(p) => {
            let mut w = create(p)?;
            write_matrix(&mut w, &m, max_el)?;
            w.flush()?;
            summary["out"] = json!(p);
        }
        None => {
            let mut buf = Vec::new();
            write_matrix(&mut buf, &m, max_el)?;
            summary["matrix"] = json!(String::from_utf8(buf).expect("ascii output"));
        }
    }
    Ok(summary)
}

fn eigen_json(e: &EigenResult) -> Value {
    let masses: Vec<Option<f64>> = e.eigenvalues.iter().map(|&l| (l >= 0.0).then(|| l.sqrt())).collect();
    json!({"eigenvalues": e.eigenvalues, "masses": masses, "residuals": e.residuals})
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<Value> {
    let basis = a.model.basis()?;
    let params = a.model.params()?;
    let m = build_mass_matrix(&basis, &params)?;
    let e = lowest_eigenpairs_with(&m, &a.eigen.options(a.nev))?;
    let mut v = eigen_json(&e);
    v["dim"] = json!(basis.len());
    v["g"] = json!(params.g);
    Ok(v)
}

fn cmd_renorm(a: &RenormArgs) -> Result<Value> {
    let target = RenormTarget {
        mb_phys: a.mbt,
        mf_phys: a.mft,
        lambda: a.lambda,
        cutoff: a.cutoff,
        k: a.k,
    };
    let r = renormalize_with(&target, &a.conventions.options())?;
    Ok(serde_json::to_value(r).expect("plain struct"))
}

/// `n, x, f_f, f_a, f_b` with 17 significant digits.
fn write_pdf_csv(path: &Path, t: &PdfTable) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "n,x,f_f,f_a,f_b")?;
    for (i, e) in t.entries.iter().enumerate() {
        let n = i as u32 + 1;
        writeln!(w, "{n},{},{},{},{}", fmt_f64(t.x(n)), fmt_f64(e[0]), fmt_f64(e[1]), fmt_f64(e[2]))?;
    }
    w.flush()?;
    Ok(())
}

fn pdf_summary(t: &PdfTable, q: i32, qmax2: f64, kept: f64) -> Value {
    json!({
        "momentum_sum_residual": t.momentum_sum() - t.k as f64,
        "charge_sum_residual": t.charge_sum() - q as f64,
        "qmax2": qmax2,
        "qmax": qmax2.sqrt(),
        "qsq": t.qsq,
        "kept_fraction": kept,
    })
}

fn pdf_at(vector: &[f64], basis: &Basis, params: &ModelParams, qsq: Option<f64>) -> Result<(PdfTable, f64)> {
    match qsq {
        None => Ok((pdf(vector, basis)?, 1.0)),
        Some(q2) => {
            let (v, kept) = truncate_state(vector, basis, params, q2)?;
            let mut t = pdf(&v, basis)?;
            t.qsq = Some(q2);
            Ok((t, kept))
        }
    }
}

fn sidecar_path(out: &Path, sidecar: &Option<PathBuf>) -> PathBuf {
    sidecar.clone().unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    })
}

fn cmd_pdf(a: &PdfArgs, prov: &Value) -> Result<Value> {
    let basis = a.model.basis()?;
    let params = a.model.params()?;
    let m = build_mass_matrix(&basis, &params)?;
    let idx = a.state.index();
    let e = lowest_eigenpairs_with(&m, &a.eigen.options(idx + 1))?;
    let (t, kept) = pdf_at(&e.eigenvectors[idx], &basis, &params, a.qsq)?;
    write_pdf_csv(&a.out, &t)?;
    let mut summary = pdf_summary(&t, a.model.q, qmax2(&basis, &params)?, kept);
    summary["eigenvalue"] = json!(e.eigenvalues[idx]);
    summary["csv"] = json!(a.out);
    let side = sidecar_path(&a.out, &a.sidecar);
    let mut w = create(&side)?;
    writeln!(w, "{}", json!({"provenance": prov, "result": summary}))?;
    w.flush()?;
    summary["sidecar"] = json!(side);
    Ok(summary)
}

fn cmd_sparsity(a: &SparsityArgs) -> Result<Value> {
    if a.k_min < 1 || a.k_min > a.k_max {
        return Err(Error::InvalidArgument("need 1 <= k-min <= k-max".into()));
    }
    let mut rows = Vec::new();
    for k in a.k_min..=a.k_max {
        let basis = enumerate_basis(k, Some(a.q))?;
        let params = ModelParams::new(a.mb, a.mf, a.g, a.cutoff.max(k), k, Some(a.q))?;
        let m = build_mass_matrix(&basis, &params)?;
        let s = sparsity(&m);
        let (lo, hi) = sparsity_bounds(k);
        rows.push(json!({
            "K": k,
            "dim": basis.len(),
            "sparsity": s,
            "lower": lo,
            "upper": hi,
            "within": lo <= s as i64 && s as i64 <= hi,
        }));
    }
    Ok(json!({ "rows": rows }))
}

/// `[K^2/2 - 3K/2 + 1, K^2/2 + 3K/2 - 1]`, exact in integers.
pub fn sparsity_bounds(k: u32) -> (i64, i64) {
    let k = k as i64;
    // K^2 - 3K and K^2 + 3K are even
    ((k * k - 3 * k) / 2 + 1, (k * k + 3 * k) / 2 - 1)
}

fn cmd_resources(a: &ResourcesArgs) -> Result<Value> {
    let scheme = match a.scheme {
        SchemeArg::DirectDirect => Some(Scheme::DirectDirect),
        SchemeArg::DirectCompact => Some(Scheme::DirectCompact),
        SchemeArg::Compact => Some(Scheme::Compact),
        SchemeArg::Qcd => None,
    };
    match scheme {
        Some(s) => {
            if a.lperp.is_some() || a.nf.is_some() || a.nc.is_some() {
                return Err(Error::InvalidArgument("--lperp, --nf and --nc only apply to --scheme qcd".into()));
            }
            Ok(serde_json::to_value(qubit_count(s, a.k)?).expect("plain struct"))
        }
        None => {
            let (Some(lp), Some(nf), Some(nc)) = (a.lperp, a.nf, a.nc) else {
                return Err(Error::InvalidArgument("--scheme qcd needs --lperp, --nf and --nc".into()));
            };
            let b = qubit_count_qcd(a.k, lp, nf, nc)?;
            let mut v = serde_json::to_value(&b).expect("plain struct");
            if (a.k, lp, nf, nc) == (20, 20, 5, 3) {
                v["reference_total"] = json!(QCD_REFERENCE_TOTAL);
                v["delta_vs_reference"] = json!(b.total_qubits as i64 - QCD_REFERENCE_TOTAL as i64);
            }
            Ok(v)
        }
    }
}

fn cmd_fig2(a: &Fig2Args, prov: &Value) -> Result<Value> {
    let target = RenormTarget {
        mb_phys: a.mbt,
        mf_phys: a.mft,
        lambda: a.lambda,
        cutoff: a.cutoff,
        k: a.k,
    };
    let opts = RenormOptions {
        coupling: a.coupling.into(),
        condition: a.condition.into(),
        boson_level: a.boson_level.into(),
        ..RenormOptions::default()
    };
    let scales: Vec<Option<f64>> = a
        .qsq
        .iter()
        .map(|s| match s.as_str() {
            "max" => Ok(None),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|x| *x > 0.0)
                .map(Some)
                .ok_or_else(|| Error::InvalidArgument(format!("bad --qsq entry {other:?}"))),
        })
        .collect::<Result<_>>()?;
    let r = renormalize_with(&target, &opts)?;
    let state = fig2_state(a, r.m_b, r.m_f, r.g)?;
    let params = ModelParams::new(r.m_b, r.m_f, r.g, a.cutoff, a.k, Some(a.q))?;
    let physical = ModelParams::new(a.mbt, a.mft, r.g, a.cutoff, a.k, Some(a.q))?;
    let q2max = qmax2(&state.basis, &params)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let mut pdfs = Vec::new();
    for q in &scales {
        let (t, kept) = pdf_at(&state.vector, &state.basis, &params, *q)?;
        let name = match q {
            None => "pdf_qmax.csv".to_string(),
            Some(x) => format!("pdf_qsq_{x}.csv"),
        };
        let path = a.out_dir.join(&name);
        write_pdf_csv(&path, &t)?;
        let mut s = pdf_summary(&t, a.q, q2max, kept);
        s["csv"] = json!(name);
        pdfs.push(s);
    }
    let summary = json!({
        "renormalization": r,
        "state": {
            "index": state.index,
            "eigenvalue": state.eigenvalue,
            "mass": state.eigenvalue.max(0.0).sqrt(),
            "target_mass": a.target_mass,
            "relative_mass_error": (state.eigenvalue.max(0.0).sqrt() - a.target_mass) / a.target_mass,
        },
        "qmax": {
            "bare": q2max.sqrt(),
            "physical": qmax2(&state.basis, &physical)?.sqrt(),
            "bare_without_angel": qmax2(&state.basis.without_angel(), &params)?.sqrt(),
        },
        "pdfs": pdfs,
    });
    let mut w = create(&a.out_dir.join("fig2.json"))?;
    writeln!(w, "{}", json!({"provenance": prov, "result": summary}))?;
    w.flush()?;
    Ok(summary)
}

struct Fig2State {
    basis: Basis,
    index: usize,
    eigenvalue: f64,
    vector: Vec<f64>,
}

/// The eigenstate of the `(K, Q)` block whose mass is closest to the target,
/// from the full dense spectrum.
fn fig2_state(a: &Fig2Args, m_b: f64, m_f: f64, g: f64) -> Result<Fig2State> {
    let basis = enumerate_basis(a.k, Some(a.q))?;
    if basis.len() > OVERLAP_DENSE_LIMIT {
        return Err(Error::ResourceLimit {
            dim: basis.len(),
            cap: OVERLAP_DENSE_LIMIT,
        });
    }
    let params = ModelParams::new(m_b, m_f, g, a.cutoff, a.k, Some(a.q))?;
    let m = build_mass_matrix(&basis, &params)?;
    let mut o = EigenOptions::new(basis.len(), 1e-9);
    o.solver = Solver::Dense;
    let e = lowest_eigenpairs_with(&m, &o)?;
    let t2 = a.target_mass * a.target_mass;
    let index = (0..e.eigenvalues.len())
        .min_by(|&i, &j| (e.eigenvalues[i] - t2).abs().total_cmp(&(e.eigenvalues[j] - t2).abs()))
        .expect("nonempty block");
    Ok(Fig2State {
        eigenvalue: e.eigenvalues[index],
        vector: e.eigenvectors[index].clone(),
        index,
        basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["lfdlcq", "basis"]), 2);
        assert_eq!(run(["lfdlcq", "nonsense"]), 2);
        assert_eq!(run(["lfdlcq", "ham", "--k", "2", "--mb", "1", "--mf", "1"]), 2);
    }

    #[test]
    fn validation_errors_exit_2_and_compute_ok() {
        assert_eq!(run(["lfdlcq", "basis", "--k", "0"]), 2);
        assert_eq!(run(["lfdlcq", "resources", "--scheme", "compact", "--k", "6"]), 0);
    }

    #[test]
    fn bounds_are_integers() {
        assert_eq!(sparsity_bounds(3), (1, 8));
        assert_eq!(sparsity_bounds(19), (153, 208));
    }

    #[test]
    fn state_selector() {
        assert_eq!(parse_state_sel("lowest"), Ok(StateSel::Lowest));
        assert_eq!(parse_state_sel("3"), Ok(StateSel::Index(3)));
        assert!(parse_state_sel("x").is_err());
    }
}
