//! Command-line front end.
//!
//! Exit status: 0 on success, 2 on usage errors (bad flags, out-of-range
//! values), 1 on runtime failures.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::canonical::{count_spreading_trees, enumerate_classes, ClassCatalog, DEFAULT_ENUMERATION_CAP};
use crate::cube::{eta_star, Params};
use crate::error::Error;
use crate::expectations::{class_expectation, exact_census_oracle, mu3_coefficient_two, mu_asymptotic, mu_exact};
use crate::numeric::fmt_sig;
use crate::par::Execution;
use crate::sampler::CensusRecord;
use crate::stats::{report_from_records, run_experiment_with_sink, Check, Envelope, ExperimentConfig, SummaryReport};

#[derive(Debug, Parser)]
#[command(name = "cubefrag", version, about = "Components of random subgraphs of the hypercube")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print m_p, eta*, mu_1..mu_3 and per-class expectations.
    Calc(CalcArgs),
    /// List the canonical forms with a given number of vertices.
    Enumerate(EnumerateArgs),
    /// Exact laws of the census for d <= 3.
    Oracle(OracleArgs),
    /// Run a Monte Carlo experiment and write a summary report.
    Simulate(SimulateArgs),
    /// Recompute a report from a stored report or census file.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct CalcArgs {
    /// Cube dimension.
    #[arg(long)]
    pub d: u32,
    /// Edge probability in (0, 1/2), as a decimal.
    #[arg(long)]
    pub p: String,
    /// Also print the leading-order mean of X_t.
    #[arg(long)]
    pub t: Option<usize>,
    /// Class ids (see `enumerate`) to print expectations for.
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    /// Number of vertices, at most 6.
    #[arg(long)]
    pub t: usize,
    /// Write the forms as JSON here as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Cube dimension, 1 to 3.
    #[arg(long)]
    pub d: u32,
    /// Edge probability in (0, 1/2), as a decimal.
    #[arg(long)]
    pub p: String,
    /// Write the laws as JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Dimension, or a comma-separated list for trend runs.
    #[arg(long, value_delimiter = ',')]
    pub d: Vec<u32>,
    /// Edge probability in (0, 1/2), as a decimal.
    #[arg(long)]
    pub p: Option<String>,
    /// Trials per dimension.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed; required.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trial-level worker threads; output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report path (JSON); a CSV is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Constant in N_gamma = floor(16 (1 + gamma) / p) (default 3).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ball radius for the clustering check, as a fraction of d (default 0.05).
    #[arg(long)]
    pub radius_frac: Option<f64>,
    /// Class ids for the joint check.
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<usize>,
    /// Envelope file (statistic id -> [lo, hi]) to check the report against.
    #[arg(long)]
    pub envelope: Option<PathBuf>,
    /// Checks to run: poisson, normal, joint, local-limit, distance,
    /// clustering, goodness, or all.
    #[arg(long, value_delimiter = ',')]
    pub checks: Vec<String>,
    /// Largest fragment size classified into canonical forms (default 3).
    #[arg(long)]
    pub class_cap: Option<usize>,
    /// Largest component stored whole for the per-trial checks (default 64).
    #[arg(long)]
    pub store_cap: Option<usize>,
    /// Largest dimension the census may use.
    #[arg(long)]
    pub max_dim: Option<u32>,
    /// Write every census record, one JSON object per line.
    #[arg(long)]
    pub census_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// A report written by `simulate`.
    #[arg(long, conflicts_with = "census")]
    pub input: Option<PathBuf>,
    /// Census records (JSON lines) written by `simulate --census-out`.
    #[arg(long, requires = "config")]
    pub census: Option<PathBuf>,
    /// Experiment configuration for `--census`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Envelope file to check the recomputed report against.
    #[arg(long)]
    pub envelope: Option<PathBuf>,
    /// Report path (JSON); a CSV is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(flag: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{flag}: {e}"))
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn io_out(e: std::io::Error) -> Failure {
    Failure::Runtime(format!("writing output: {e}"))
}

/// Parses `argv` (program name first) and runs the command, writing to the
/// given streams. Returns the exit status.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

/// [`run`] on the process streams.
pub fn parse_and_execute(argv: &[String]) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

fn execute(command: Command, out: &mut dyn Write) -> Outcome {
    match command {
        Command::Calc(a) => calc(a, out),
        Command::Enumerate(a) => enumerate(a, out),
        Command::Oracle(a) => oracle(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Analyze(a) => analyze(a, out),
    }
}

fn params(d: u32, p: &str) -> std::result::Result<Params, Failure> {
    Params::from_decimal(d, p).map_err(|e| match e {
        Error::Dimension { .. } => usage("--d", e),
        other => usage("--p", other),
    })
}

fn calc(a: CalcArgs, out: &mut dyn Write) -> Outcome {
    let params = params(a.d, &a.p)?;
    let (d, p) = (params.d(), params.p());
    let catalog = if a.classes.is_empty() {
        None
    } else {
        let top = *a.classes.iter().max().expect("non-empty");
        let mut size = 1;
        let catalog = loop {
            let c = ClassCatalog::new(size).map_err(runtime)?;
            if c.forms().len() > top || size == DEFAULT_ENUMERATION_CAP {
                break c;
            }
            size += 1;
        };
        if catalog.get(top).is_none() {
            return Err(usage("--classes", format!("class id {top} beyond the catalog of sizes <= {size}")));
        }
        Some(catalog)
    };
    if let Some(t) = a.t {
        if t == 0 {
            return Err(usage("--t", "component size must be at least 1"));
        }
    }
    let mut lines = vec![
        format!("d = {d}"),
        format!("p = {}", a.p),
        format!("m_p = {}", params.m_p()),
        format!("eta_star = {}", fmt_sig(eta_star(p, 1e-12).map_err(runtime)?)),
    ];
    for t in 1..=3 {
        lines.push(format!("mu{t} = {}", fmt_sig(mu_exact(t, d, p).map_err(runtime)?)));
    }
    lines.push(format!("mu3_coefficient_two = {}", fmt_sig(mu3_coefficient_two(d, p).map_err(runtime)?)));
    if let Some(t) = a.t {
        let (v, beyond) = mu_asymptotic(t, d, p).map_err(runtime)?;
        lines.push(format!("mu{t}_leading = {}", fmt_sig(v)));
        if beyond {
            lines.push(format!("note: t = {t} exceeds m_p; the leading term decays in d"));
        }
    }
    if let Some(catalog) = catalog {
        for &id in &a.classes {
            let form = catalog.get(id).expect("checked above");
            let ce = class_expectation(form, d, p).map_err(runtime)?;
            lines.push(format!(
                "class {id}: t = {} s = {} e = {} e' = {} expected = {} beta = {}",
                form.size(),
                ce.s,
                ce.e,
                ce.e_prime,
                fmt_sig(ce.expected_count),
                fmt_sig(ce.beta)
            ));
        }
    }
    for l in lines {
        writeln!(out, "{l}").map_err(io_out)?;
    }
    Ok(())
}

fn enumerate(a: EnumerateArgs, out: &mut dyn Write) -> Outcome {
    if a.t == 0 || a.t > DEFAULT_ENUMERATION_CAP {
        return Err(usage("--t", format!("must lie in 1..={DEFAULT_ENUMERATION_CAP}")));
    }
    let out_file = a.out.as_deref().map(|p| create(p, "--out")).transpose()?;
    let forms = enumerate_classes(a.t).map_err(runtime)?;
    let catalog = ClassCatalog::new(a.t).map_err(runtime)?;
    let mut trees = 0;
    let mut listed = Vec::new();
    for form in &forms {
        let id = catalog.id_of(form).expect("catalog covers size t");
        trees += form.is_spreading_tree() as u64;
        let record = serde_json::to_string(form).map_err(runtime)?;
        writeln!(out, "{id} {record}").map_err(io_out)?;
        listed.push(json!({"form_id": id, "form": form}));
    }
    let (tree_classes, _) = count_spreading_trees(a.t as u32, a.t as u32 - 1).map_err(runtime)?;
    writeln!(out, "classes = {}", forms.len()).map_err(io_out)?;
    writeln!(out, "spreading_tree_classes = {trees}").map_err(io_out)?;
    writeln!(out, "spreading_tree_formula = {tree_classes}").map_err(io_out)?;
    if let Some(mut w) = out_file {
        let doc = json!({"t": a.t, "classes": listed, "spreading_tree_classes": trees});
        write_json(&mut w, &doc)?;
    }
    Ok(())
}

fn oracle(a: OracleArgs, out: &mut dyn Write) -> Outcome {
    if a.d == 0 || a.d > 3 {
        return Err(usage("--d", "the exact oracle supports 1 <= d <= 3"));
    }
    let p = if a.d == 1 {
        // Params needs d >= 2; the probability itself is validated the same way
        params(2, &a.p)?.p()
    } else {
        params(a.d, &a.p)?.p()
    };
    let out_file = a.out.as_deref().map(|path| create(path, "--out")).transpose()?;
    let oracle = exact_census_oracle(a.d, p).map_err(runtime)?;
    let n = 1usize << a.d;
    let law_json = |law: crate::expectations::ExactLaw<u64>| {
        json!({
            "mean": law.mean(),
            "variance": law.variance(),
            "law": law.probabilities,
        })
    };
    let mut sizes = serde_json::Map::new();
    for t in 1..=n {
        sizes.insert(t.to_string(), law_json(oracle.size_law(t)));
    }
    let doc = json!({
        "d": a.d,
        "p": a.p,
        "X_t": sizes,
        "X": law_json(oracle.component_count_law()),
        "Z": law_json(oracle.fragment_size_law()),
        "L2": law_json(oracle.second_largest_law()),
    });
    match out_file {
        Some(mut w) => write_json(&mut w, &doc),
        None => write_json(out, &doc),
    }
}

fn create(path: &Path, flag: &str) -> std::result::Result<BufWriter<fs::File>, Failure> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Failure::Runtime(format!("{flag} {}: {e}", path.display())))
}

fn write_json(w: &mut dyn Write, doc: &serde_json::Value) -> Outcome {
    let text = serde_json::to_string_pretty(doc).map_err(runtime)?;
    writeln!(w, "{text}").map_err(io_out)?;
    w.flush().map_err(io_out)
}

fn read_to_string(path: &Path, flag: &str) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{flag} {}: {e}", path.display())))
}

fn load_config(path: &Path, flag: &str) -> std::result::Result<ExperimentConfig, Failure> {
    let text = read_to_string(path, flag)?;
    serde_json::from_str(&text).map_err(|e| usage(flag, format!("{}: {e}", path.display())))
}

fn load_envelope(path: &Path) -> std::result::Result<Envelope, Failure> {
    let text = read_to_string(path, "--envelope")?;
    serde_json::from_str(&text).map_err(|e| usage("--envelope", format!("{}: {e}", path.display())))
}

fn build_config(a: &SimulateArgs) -> std::result::Result<ExperimentConfig, Failure> {
    let mut cfg = match &a.config {
        Some(path) => load_config(path, "--config")?,
        None => {
            let d = *a.d.first().ok_or_else(|| usage("--d", "required"))?;
            let p = a.p.as_deref().ok_or_else(|| usage("--p", "required"))?;
            let trials = a.trials.ok_or_else(|| usage("--trials", "required"))?;
            let seed = a.seed.ok_or_else(|| usage("--seed", "required; there is no default seed"))?;
            ExperimentConfig::new(d, p, trials, seed)
        }
    };
    if let Some((&d, rest)) = a.d.split_first() {
        cfg.d = d;
        cfg.d_list = rest.to_vec();
    }
    if let Some(p) = &a.p {
        cfg.p = p.clone();
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(g) = a.gamma {
        cfg.gamma = g;
    }
    if let Some(r) = a.radius_frac {
        cfg.radius_frac = r;
    }
    if !a.classes.is_empty() {
        cfg.classes = a.classes.clone();
    }
    if let Some(c) = a.class_cap {
        cfg.class_cap = c;
    }
    if let Some(c) = a.store_cap {
        cfg.store_cap = c;
    }
    if let Some(m) = a.max_dim {
        cfg.max_dim = m;
    }
    for name in &a.checks {
        if name == "all" {
            cfg.checks.extend(Check::ALL);
        } else {
            let check = Check::parse(name).ok_or_else(|| usage("--checks", format!("unknown check {name:?}")))?;
            cfg.checks.insert(check);
        }
    }
    if cfg.has(Check::Joint) && cfg.classes.is_empty() {
        cfg.classes = vec![0, 1];
    }
    validate(&cfg)?;
    Ok(cfg)
}

/// Maps a configuration error to the flag that carries the offending value.
fn validate(cfg: &ExperimentConfig) -> Outcome {
    cfg.validate().map_err(|e| {
        let msg = e.to_string();
        let inner = match &e {
            Error::Invalid(m) => m.as_str(),
            _ => msg.as_str(),
        };
        let flag = match &e {
            Error::Dimension { .. } | Error::Cap { .. } => "--d",
            Error::Probability(_) | Error::ProbabilityParse(_) => "--p",
            _ if inner.starts_with("trials") => "--trials",
            _ if inner.starts_with("gamma") => "--gamma",
            _ if inner.starts_with("radius_frac") => "--radius-frac",
            _ if inner.contains("class id") || inner.contains("joint") => "--classes",
            _ if inner.starts_with("class_cap") => "--class-cap",
            _ if inner.starts_with("store_cap") => "--store-cap",
            _ if inner.starts_with("max_dim") => "--max-dim",
            _ => "--config",
        };
        usage(flag, msg)
    })
}

fn csv_path(json: &Path) -> PathBuf {
    json.with_extension("csv")
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Outcome {
    let cfg = build_config(&a)?;
    if a.workers == Some(0) {
        return Err(usage("--workers", "must be at least 1"));
    }
    let envelope = a.envelope.as_deref().map(load_envelope).transpose()?;
    let mut report_file = a.out.as_deref().map(|p| create(p, "--out")).transpose()?;
    let mut csv_file = a.out.as_deref().map(|p| create(&csv_path(p), "--out")).transpose()?;
    let mut census_file = a.census_out.as_deref().map(|p| create(p, "--census-out")).transpose()?;

    let exec = Execution::from_workers(a.workers);
    let mut report = run_experiment_with_sink(&cfg, exec, |record| {
        if let Some(w) = census_file.as_mut() {
            let line = serde_json::to_string(record).map_err(|e| Error::Internal(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::Internal(format!("--census-out: {e}")))?;
        }
        Ok(())
    })
    .map_err(runtime)?;
    if let Some(env) = &envelope {
        report.apply_envelope(env);
    }
    if let Some(w) = census_file.as_mut() {
        w.flush().map_err(io_out)?;
    }
    emit(&report, report_file.as_mut(), csv_file.as_mut(), out)
}

fn emit(
    report: &SummaryReport,
    report_file: Option<&mut BufWriter<fs::File>>,
    csv_file: Option<&mut BufWriter<fs::File>>,
    out: &mut dyn Write,
) -> Outcome {
    match report_file {
        Some(w) => {
            w.write_all(report.to_json().as_bytes()).map_err(io_out)?;
            w.flush().map_err(io_out)?;
            if let Some(c) = csv_file {
                c.write_all(report.to_csv().as_bytes()).map_err(io_out)?;
                c.flush().map_err(io_out)?;
            }
            out.write_all(report.to_csv().as_bytes()).map_err(io_out)?;
        }
        None => out.write_all(report.to_json().as_bytes()).map_err(io_out)?,
    }
    if let Some(checks) = &report.envelope {
        for c in checks {
            let v = c.value.map(fmt_sig).unwrap_or_else(|| "none".into());
            let verdict = if c.inside { "inside" } else { "OUTSIDE" };
            writeln!(out, "envelope {} = {v} in [{}, {}]: {verdict}", c.id, fmt_sig(c.lo), fmt_sig(c.hi))
                .map_err(io_out)?;
        }
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Outcome {
    let envelope = a.envelope.as_deref().map(load_envelope).transpose()?;
    let (mut report, stored) = match (&a.input, &a.census) {
        (Some(path), None) => {
            let text = read_to_string(path, "--input")?;
            let stored = SummaryReport::from_json(&text).map_err(|e| usage("--input", e))?;
            (stored.recompute().map_err(runtime)?, Some(stored))
        }
        (None, Some(path)) => {
            let cfg = load_config(a.config.as_deref().expect("clap enforces --config"), "--config")?;
            validate(&cfg)?;
            let file =
                fs::File::open(path).map_err(|e| Failure::Runtime(format!("--census {}: {e}", path.display())))?;
            let mut records = Vec::new();
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Failure::Runtime(format!("--census: {e}")))?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: CensusRecord =
                    serde_json::from_str(&line).map_err(|e| usage("--census", format!("line {}: {e}", i + 1)))?;
                records.push(record);
            }
            (report_from_records(&cfg, &records).map_err(runtime)?, None)
        }
        _ => return Err(usage("--input", "give exactly one of --input or --census")),
    };
    let mut report_file = a.out.as_deref().map(|p| create(p, "--out")).transpose()?;
    let mut csv_file = a.out.as_deref().map(|p| create(&csv_path(p), "--out")).transpose()?;
    if let Some(stored) = &stored {
        if stored.blocks != report.blocks || stored.envelope != report.envelope {
            return Err(Failure::Runtime("recomputed statistics differ from the stored report".into()));
        }
        writeln!(out, "reproduced: {} blocks", report.blocks.len()).map_err(io_out)?;
    }
    if let Some(env) = &envelope {
        report.apply_envelope(env);
    }
    emit(&report, report_file.as_mut(), csv_file.as_mut(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let argv: Vec<String> = std::iter::once("cubefrag").chain(args.iter().copied()).map(String::from).collect();
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(&argv, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn calc_prints_closed_forms() {
        let (code, out, _) = run_str(&["calc", "--d", "10", "--p", "0.25"]);
        assert_eq!(code, 0);
        assert!(out.contains("mu1 = 57.6650390625"), "{out}");
        assert!(out.contains("m_p = 2"));
        assert!(out.contains("mu3_coefficient_two = "));
    }

    #[test]
    fn enumerate_counts_trees() {
        let (code, out, _) = run_str(&["enumerate", "--t", "3"]);
        assert_eq!(code, 0);
        assert!(out.contains("spreading_tree_classes = 4"), "{out}");
        assert!(out.contains("classes = 4"));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_str(&["simulate", "--d", "3", "--p", "0.3", "--trials", "0", "--seed", "1"]).0, 2);
        let (code, _, err) = run_str(&["simulate", "--d", "3", "--p", "0.3", "--trials", "5"]);
        assert_eq!(code, 2);
        assert!(err.contains("--seed"));
        let (code, _, err) = run_str(&["calc", "--d", "10", "--p", "0.7"]);
        assert_eq!(code, 2);
        assert!(err.contains("--p"));
        assert_eq!(run_str(&["calc", "--d", "10", "--p", "0.25", "--bogus"]).0, 2);
        assert_eq!(run_str(&["oracle", "--d", "4", "--p", "0.3"]).0, 2);
        assert_eq!(run_str(&[]).0, 2);
    }

    #[test]
    fn unwritable_output_is_a_runtime_error() {
        let (code, _, err) = run_str(&[
            "simulate",
            "--d",
            "4",
            "--p",
            "0.3",
            "--trials",
            "2",
            "--seed",
            "1",
            "--out",
            "/nonexistent/dir/r.json",
        ]);
        assert_eq!(code, 1);
        assert!(err.contains("--out"));
    }

    #[test]
    fn oracle_emits_laws() {
        let (code, out, _) = run_str(&["oracle", "--d", "3", "--p", "0.3"]);
        assert_eq!(code, 0);
        let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
        let mean = doc["X_t"]["1"]["mean"].as_f64().unwrap();
        assert!((mean - 2.744).abs() < 1e-12);
    }
}
