//! Command-line front end for the split-step experiments.
//!
//! Subcommands wrap the harness one to one (`drift`, `order`, `mfe-verify`,
//! `interface`), plus `run` for a single integration, `schemes` to list the
//! built-in splitting schemes, and `validate` for a dry run of every check a
//! config has to pass.
//!
//! Exit codes are stable API: 0 success, 2 validation or configuration
//! failure, 3 numerical failure (a state stopped being finite).
//!
//! Every experiment writes `report.json`, raw observable series as CSV, and
//! (unless `--no-plot`) two-column plot data under `plot/`. Output files are
//! reproducible byte for byte for a fixed config.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use splitstep::harness::{
    drift_experiment, interface_study, mfe_validation, order_study, report_json,
    resolve_scheme_name, steps_for, ExperimentConfig, FitLine, HarnessError, HorizonRule,
    SeriesBlock, SeriesRow,
};
use splitstep::kahan::Precision;
use splitstep::spectral::{make_initial, SpectralError};
use splitstep::splitting::{
    builtin_schemes, integrate, CflPolicy, IntegrateError, IntegrateOptions, ObservableRecord,
    StepParams,
};

#[derive(Parser)]
#[command(
    name = "splitstep",
    version,
    about = "Split-step spectral experiments for the cubic Schroedinger equation on the torus",
    after_help = "Config files are JSON with the keys scheme, K, N, c0, epsilons, h | h_rule, \
horizon_rule, profile, precision, output_dir (and the order-study keys schemes, h_list, \
reference_scheme). Unknown keys are rejected. Command-line flags override config fields. \
The output directory resolves as: --output-dir, then $SPLITSTEP_OUTPUT_DIR, then the \
config, then \"out\"."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration (the first epsilon) and write its
    /// observable series
    Run(RunArgs),
    /// Long-time energy / H1 drift vs epsilon
    Drift(ExperimentArgs),
    /// Convergence-order study over a list of step sizes
    Order(OrderArgs),
    /// Build modulation tables per epsilon and measure defect, error, and
    /// almost-invariant scalings
    MfeVerify(ExperimentArgs),
    /// Interval-restart study: rebuild the expansion at t = 1/eps and
    /// compare at the interface
    Interface(ExperimentArgs),
    /// List the built-in splitting schemes with their coefficients
    Schemes,
    /// Dry-run every validation of a config and print a summary table
    Validate(ConfigArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON config file; the flags below override its fields
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in scheme name or path to a scheme JSON file [default: strang]
    #[arg(long)]
    scheme: Option<String>,
    /// Mode cutoff K [default: 16]
    #[arg(long)]
    k: Option<usize>,
    /// Truncation / step-restriction exponent N [default: 2]
    #[arg(long)]
    n: Option<usize>,
    /// Step-restriction constant, must lie in (0, 2 pi) [default: 6.0]
    #[arg(long)]
    c0: Option<f64>,
    /// Comma-separated epsilon list, strictly decreasing [default: 0.1]
    #[arg(long, value_delimiter = ',', value_name = "E1,E2,...")]
    eps: Option<Vec<f64>>,
    /// Explicit step size (default: the largest step allowed by the
    /// restriction (N+1) h K^2 <= c0)
    #[arg(long)]
    h: Option<f64>,
    /// Observable accumulation mode [default: plain]
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
    /// Demote step-restriction violations to warnings
    #[arg(long)]
    cfl_warn: bool,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output directory (overrides $SPLITSTEP_OUTPUT_DIR and the config)
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Skip plot-data emission
    #[arg(long)]
    no_plot: bool,
    /// Worker threads for sweeps; 1 keeps runs cheap to reason about, and
    /// results are identical for any value
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Number of steps; 0 emits just the initial observables (default:
    /// derived from the horizon rule)
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Args)]
struct OrderArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Schemes to compare
    #[arg(long, value_delimiter = ',', value_name = "S1,S2,...")]
    schemes: Option<Vec<String>>,
    /// Step sizes to sweep; each must divide the final time
    #[arg(long = "h-list", value_delimiter = ',', value_name = "H1,H2,...")]
    h_list: Option<Vec<f64>>,
    /// Scheme providing the reference solution [default: blanes-moan4]
    #[arg(long)]
    reference: Option<String>,
    /// Fixed final time (shorthand for a fixed horizon rule)
    #[arg(long)]
    t_final: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Plain,
    Compensated,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Plain => Precision::Plain,
            PrecisionArg::Compensated => Precision::Compensated,
        }
    }
}

struct CliError {
    code: i32,
    message: String,
}

fn bad_config(message: String) -> CliError {
    CliError { code: 2, message }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let code = match &e {
            HarnessError::Integrate(IntegrateError::NonFinite { .. }) => 3,
            HarnessError::Spectral(SpectralError::NonFinite) => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_error(what: &Path, e: io::Error) -> CliError {
    CliError {
        code: 2,
        message: format!("{}: {e}", what.display()),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Drift(args) => cmd_drift(args),
        Command::Order(args) => cmd_order(args),
        Command::MfeVerify(args) => cmd_mfe_verify(args),
        Command::Interface(args) => cmd_interface(args),
        Command::Schemes => cmd_schemes(),
        Command::Validate(args) => cmd_validate(args),
    }
}

// ---------------------------------------------------------------------------
// Config ingestion

struct LoadedConfig {
    experiment: ExperimentConfig,
    output_dir: Option<PathBuf>,
}

/// Reads a config file: the experiment schema plus the CLI-only key
/// `output_dir`. Syntax errors carry line/column, unknown keys are named.
fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        bad_config(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let obj = value.as_object_mut().ok_or_else(|| {
        bad_config(format!(
            "{}: top level must be a JSON object",
            path.display()
        ))
    })?;
    let output_dir = match obj.remove("output_dir") {
        None => None,
        Some(serde_json::Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => {
            return Err(bad_config(format!(
                "{}: output_dir must be a string, got {other}",
                path.display()
            )))
        }
    };
    let experiment: ExperimentConfig = serde_json::from_value(value)
        .map_err(|e| bad_config(format!("{}: {e}", path.display())))?;
    Ok(LoadedConfig {
        experiment,
        output_dir,
    })
}

/// Base config (file or built-in defaults) with flag overrides applied.
fn resolve_config(args: &ConfigArgs) -> Result<(ExperimentConfig, Option<PathBuf>), CliError> {
    let (mut cfg, cfg_out) = match &args.config {
        Some(path) => {
            let loaded = load_config(path)?;
            (loaded.experiment, loaded.output_dir)
        }
        None => (ExperimentConfig::new("strang", 16, 2, &[0.1]), None),
    };
    if let Some(s) = &args.scheme {
        cfg.scheme = s.clone();
    }
    if let Some(k) = args.k {
        cfg.k_cut = k;
    }
    if let Some(n) = args.n {
        cfg.trunc = n;
    }
    if let Some(c0) = args.c0 {
        cfg.c0 = c0;
    }
    if let Some(eps) = &args.eps {
        cfg.epsilons = eps.clone();
    }
    if let Some(h) = args.h {
        cfg.h = Some(h);
        cfg.h_rule = None;
    }
    if let Some(p) = args.precision {
        cfg.precision = p.into();
    }
    if args.cfl_warn {
        cfg.cfl = CflPolicy::Warn;
    }
    Ok((cfg, cfg_out))
}

/// Flag beats environment beats config beats "out".
fn resolve_output_dir(flag: &Option<PathBuf>, from_config: Option<PathBuf>) -> PathBuf {
    if let Some(p) = flag {
        return p.clone();
    }
    if let Ok(s) = std::env::var("SPLITSTEP_OUTPUT_DIR") {
        if !s.is_empty() {
            return PathBuf::from(s);
        }
    }
    from_config.unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(feature = "parallel")]
fn configure_jobs(jobs: usize) -> Result<(), CliError> {
    if jobs == 0 {
        return Err(bad_config("--jobs must be at least 1".into()));
    }
    // A second initialization in the same process is harmless: results do
    // not depend on the pool width.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global();
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_jobs(jobs: usize) -> Result<(), CliError> {
    if jobs == 0 {
        return Err(bad_config("--jobs must be at least 1".into()));
    }
    if jobs > 1 {
        eprintln!("note: built without the parallel feature; --jobs {jobs} runs sequentially");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Artifacts

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// report.json + one raw CSV per series + (optionally) plot data.
fn write_artifacts(
    out_dir: &Path,
    report: &str,
    series: &[SeriesBlock],
    fits: &[FitLine],
    plot: bool,
) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    write_file(&out_dir.join("report.json"), report)?;
    for block in series {
        let name = format!("series_{}.csv", sanitize_label(&block.label));
        write_file(&out_dir.join(name), &block.to_csv())?;
    }
    if plot {
        emit_plot_data(&out_dir.join("plot"), series, fits)?;
    }
    Ok(())
}

/// Two-column files for any plotting tool: per series `t  e_dev_scaled`
/// (header only when the series is empty), plus a single `fits.dat` whose
/// blank-line-separated blocks hold each fitted power law evaluated at its
/// own sample points. Rewriting produces identical bytes.
fn emit_plot_data(dir: &Path, series: &[SeriesBlock], fits: &[FitLine]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    for block in series {
        let mut text = String::from("# t  e_dev_scaled\n");
        for r in &block.rows {
            let _ = writeln!(text, "{} {}", r.t, r.e_dev_scaled);
        }
        let name = format!("series_{}.dat", sanitize_label(&block.label));
        write_file(&dir.join(name), &text)?;
    }
    let mut text = String::new();
    for (i, f) in fits.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        let _ = writeln!(text, "# fit {}", f.label);
        let target = match f.target {
            Some(t) => t.to_string(),
            None => "none".to_string(),
        };
        let _ = writeln!(
            text,
            "# slope {} intercept {} rms_residual {} target {}",
            f.fit.slope, f.fit.intercept, f.fit.rms_residual, target
        );
        for &(x, _) in &f.points {
            let y = (f.fit.intercept + f.fit.slope * x.ln()).exp();
            let _ = writeln!(text, "{x} {y}");
        }
    }
    if fits.is_empty() {
        text.push_str("# no fits\n");
    }
    write_file(&dir.join("fits.dat"), &text)
}

fn print_summary(fits: &[FitLine], notes: &[String]) {
    for f in fits {
        let target = match f.target {
            Some(t) => format!(" (target {t})"),
            None => String::new(),
        };
        println!(
            "fit {}: slope {:.4}{target}, rms residual {:.4}, {} points",
            f.label, f.fit.slope, f.fit.rms_residual, f.fit.used
        );
    }
    for n in notes {
        println!("note: {n}");
    }
}

// ---------------------------------------------------------------------------
// Subcommands

#[derive(Serialize)]
struct RunReport {
    kind: &'static str,
    code_version: String,
    config: ExperimentConfig,
    epsilon: f64,
    h: f64,
    steps: u64,
    t_final: f64,
    cfl_ok: bool,
    initial: ObservableRecord,
    #[serde(rename = "final")]
    final_record: ObservableRecord,
    max_mass_rel_dev: f64,
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (cfg, cfg_out) = resolve_config(&args.config)?;
    cfg.validate()?;
    let scheme = cfg.resolve_scheme()?;
    let params = cfg.step_params()?;
    let eps = cfg.epsilons[0];
    let u0 = make_initial(cfg.k_cut, eps, &cfg.profile).map_err(HarnessError::from)?;
    let steps = match args.steps {
        Some(s) => s,
        None => steps_for(cfg.horizon(eps), params.h).min(cfg.max_steps),
    };
    let opts = IntegrateOptions {
        record_stride: (steps / 512).max(1),
        snapshot_steps: Vec::new(),
        precision: cfg.precision,
        cfl: cfg.cfl,
    };
    let traj = integrate(&u0, &scheme, &params, steps, &opts).map_err(HarnessError::from)?;

    let first = traj.records[0];
    let inv_eps2 = eps.powi(-2);
    let rows: Vec<SeriesRow> = traj
        .records
        .iter()
        .map(|r| SeriesRow {
            t: r.t,
            mass: r.mass,
            h1_sq: r.h1_sq,
            energy: r.energy,
            e_dev_scaled: inv_eps2 * (r.energy - first.energy).abs(),
            h1_dev_scaled: inv_eps2 * (r.h1_sq - first.h1_sq).abs(),
        })
        .collect();
    let max_mass_rel_dev = traj
        .records
        .iter()
        .map(|r| (r.mass - first.mass).abs() / first.mass)
        .fold(0.0, f64::max);
    let block = SeriesBlock {
        label: format!("eps={eps}"),
        rows,
    };
    let report = RunReport {
        kind: "run",
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg,
        epsilon: eps,
        h: params.h,
        steps,
        t_final: steps as f64 * params.h,
        cfl_ok: traj.cfl_ok,
        initial: first,
        final_record: *traj.records.last().expect("step 0 is always recorded"),
        max_mass_rel_dev,
    };
    let out = resolve_output_dir(&args.output.output_dir, cfg_out);
    write_artifacts(
        &out,
        &report_json(&report),
        std::slice::from_ref(&block),
        &[],
        !args.output.no_plot,
    )?;
    if !traj.cfl_ok {
        println!("note: step-size restriction demoted to a warning for this run");
    }
    println!(
        "integrated {} steps to t = {}; mass rel dev {:.3e}",
        steps, report.t_final, max_mass_rel_dev
    );
    Ok(())
}

fn cmd_drift(args: ExperimentArgs) -> Result<(), CliError> {
    let (cfg, cfg_out) = resolve_config(&args.config)?;
    configure_jobs(args.output.jobs)?;
    let report = drift_experiment(&cfg)?;
    let out = resolve_output_dir(&args.output.output_dir, cfg_out);
    write_artifacts(
        &out,
        &report_json(&report),
        &report.series,
        &report.fits,
        !args.output.no_plot,
    )?;
    print_summary(&report.fits, &report.notes);
    Ok(())
}

fn cmd_order(args: OrderArgs) -> Result<(), CliError> {
    let (mut cfg, cfg_out) = resolve_config(&args.config)?;
    if let Some(s) = &args.schemes {
        cfg.schemes = s.clone();
    }
    if let Some(hs) = &args.h_list {
        cfg.h_list = hs.clone();
    }
    if let Some(r) = &args.reference {
        cfg.reference_scheme = Some(r.clone());
    }
    if let Some(t) = args.t_final {
        cfg.horizon_rule = HorizonRule::Fixed { t_final: t };
    }
    configure_jobs(args.output.jobs)?;
    let schemes = cfg.schemes.clone();
    let h_list = cfg.h_list.clone();
    let report = order_study(&cfg, &schemes, &h_list)?;
    let out = resolve_output_dir(&args.output.output_dir, cfg_out);
    write_artifacts(&out, &report_json(&report), &[], &report.fits, !args.output.no_plot)?;
    print_summary(&report.fits, &report.notes);
    Ok(())
}

fn cmd_mfe_verify(args: ExperimentArgs) -> Result<(), CliError> {
    let (cfg, cfg_out) = resolve_config(&args.config)?;
    configure_jobs(args.output.jobs)?;
    let report = mfe_validation(&cfg)?;
    let out = resolve_output_dir(&args.output.output_dir, cfg_out);
    write_artifacts(&out, &report_json(&report), &[], &report.fits, !args.output.no_plot)?;
    print_summary(&report.fits, &report.notes);
    Ok(())
}

fn cmd_interface(args: ExperimentArgs) -> Result<(), CliError> {
    let (cfg, cfg_out) = resolve_config(&args.config)?;
    configure_jobs(args.output.jobs)?;
    let report = interface_study(&cfg)?;
    let out = resolve_output_dir(&args.output.output_dir, cfg_out);
    write_artifacts(&out, &report_json(&report), &[], &report.fits, !args.output.no_plot)?;
    print_summary(&report.fits, &report.notes);
    Ok(())
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_schemes() -> Result<(), CliError> {
    println!("built-in splitting schemes:");
    for s in builtin_schemes() {
        let (sum_a, sum_b) = s.coefficient_sums();
        let status = match s.validate() {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("INVALID: {e}"),
        };
        println!("\n{}  (order {}, {} stages)", s.name, s.declared_order, s.stages());
        println!("  a = [{}]", join_f64(&s.a));
        println!("  b = [{}]", join_f64(&s.b));
        println!("  sum(a) = {sum_a}, sum(b) = {sum_b}  [{status}]");
    }
    Ok(())
}

fn cmd_validate(args: ConfigArgs) -> Result<(), CliError> {
    let (cfg, _) = resolve_config(&args)?;
    let mut failures = 0usize;
    let mut row = |name: &str, value: String, problem: Option<String>| match problem {
        None => println!("  {name:<12} {value:<40} ok"),
        Some(p) => {
            failures += 1;
            println!("  {name:<12} {value:<40} FAIL: {p}");
        }
    };

    println!("validation summary:");
    match resolve_scheme_name(&cfg.scheme) {
        Ok(s) => {
            let (sum_a, sum_b) = s.coefficient_sums();
            row(
                "scheme",
                format!(
                    "{} (order {}, {} stages, sum(a) = {sum_a}, sum(b) = {sum_b})",
                    s.name,
                    s.declared_order,
                    s.stages()
                ),
                None,
            );
        }
        Err(e) => row("scheme", cfg.scheme.clone(), Some(e.to_string())),
    }
    row(
        "K",
        cfg.k_cut.to_string(),
        (cfg.k_cut == 0).then(|| "K must be at least 1".to_string()),
    );
    row(
        "N",
        cfg.trunc.to_string(),
        (cfg.trunc == 0).then(|| "N must be at least 1".to_string()),
    );
    row(
        "c0",
        cfg.c0.to_string(),
        (!(cfg.c0 > 0.0 && cfg.c0 < 2.0 * std::f64::consts::PI))
            .then(|| format!("c0 must lie in (0, 2 pi), got {}", cfg.c0)),
    );
    let eps_problem = if cfg.epsilons.is_empty() {
        Some("epsilons must be nonempty".to_string())
    } else if cfg.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        Some("epsilons must be positive and finite".to_string())
    } else if cfg.epsilons.windows(2).any(|w| w[1] >= w[0]) {
        Some("epsilons must be strictly decreasing".to_string())
    } else {
        None
    };
    row("epsilons", join_f64(&cfg.epsilons), eps_problem);
    match cfg.step_size() {
        Ok(h) => {
            let product = (cfg.trunc + 1) as f64 * h * (cfg.k_cut * cfg.k_cut) as f64;
            let cfl_problem = if product > cfg.c0 {
                match cfg.cfl {
                    CflPolicy::Enforce => Some(format!(
                        "step-size restriction violated: (N+1) h K^2 = {product} > c0 = {}",
                        cfg.c0
                    )),
                    CflPolicy::Warn => {
                        println!(
                            "  {:<12} {:<40} warn: (N+1) h K^2 = {product} > c0 = {} (demoted)",
                            "cfl",
                            "",
                            cfg.c0
                        );
                        None
                    }
                }
            } else {
                None
            };
            row("h", h.to_string(), None);
            if cfl_problem.is_some() || product <= cfg.c0 {
                row(
                    "cfl",
                    format!("(N+1) h K^2 = {product} vs c0 = {}", cfg.c0),
                    cfl_problem,
                );
            }
        }
        Err(e) => row("h", "-".into(), Some(e.to_string())),
    }
    let horizon = match cfg.horizon_rule {
        HorizonRule::ScaledInverse { factor } => format!("eps^-1 min({factor}, eps^-1)"),
        HorizonRule::Theorem => "eps^-(N-1)".to_string(),
        HorizonRule::Fixed { t_final } => format!("fixed t = {t_final}"),
    };
    let horizon_sample = cfg
        .epsilons
        .first()
        .map(|&e| format!(" (t = {} at eps = {e})", cfg.horizon(e)))
        .unwrap_or_default();
    row("horizon", format!("{horizon}{horizon_sample}"), None);
    row("precision", format!("{:?}", cfg.precision).to_lowercase(), None);

    if failures > 0 {
        Err(bad_config(format!(
            "validation failed with {failures} problem(s)"
        )))
    } else {
        println!("all checks passed");
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use splitstep::harness::SlopeFit;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn labels_sanitize_to_filesystem_safe_names() {
        assert_eq!(sanitize_label("eps=0.1"), "eps_0.1");
        assert_eq!(sanitize_label("strang/solution_error"), "strang_solution_error");
        assert_eq!(sanitize_label("h=1/16"), "h_1_16");
    }

    #[test]
    fn config_file_keys_and_output_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(
            &dir,
            "cfg.json",
            r#"{"scheme":"strang","K":8,"N":2,"epsilons":[0.2,0.1],"output_dir":"artifacts"}"#,
        );
        let loaded = load_config(&path).unwrap();
        assert_eq!(loaded.experiment.k_cut, 8);
        assert_eq!(loaded.output_dir, Some(PathBuf::from("artifacts")));

        let bad = write_tmp(
            &dir,
            "bad.json",
            r#"{"scheme":"strang","K":8,"N":2,"epsilons":[0.1],"sede":1}"#,
        );
        let err = load_config(&bad).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("sede"), "{}", err.message);

        let syn = write_tmp(&dir, "syn.json", "{\n  \"scheme\": ,\n}");
        let err = load_config(&syn).unwrap_err();
        assert!(err.message.contains("line 2"), "{}", err.message);
    }

    #[test]
    fn flags_override_config_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_tmp(
            &dir,
            "cfg.json",
            r#"{"scheme":"strang","K":8,"N":2,"epsilons":[0.2,0.1]}"#,
        );
        let args = ConfigArgs {
            config: Some(path),
            scheme: Some("yoshida4".into()),
            k: Some(4),
            n: None,
            c0: None,
            eps: Some(vec![0.3]),
            h: Some(0.01),
            precision: Some(PrecisionArg::Compensated),
            cfl_warn: true,
        };
        let (cfg, _) = resolve_config(&args).unwrap();
        assert_eq!(cfg.scheme, "yoshida4");
        assert_eq!(cfg.k_cut, 4);
        assert_eq!(cfg.trunc, 2);
        assert_eq!(cfg.epsilons, vec![0.3]);
        assert_eq!(cfg.h, Some(0.01));
        assert_eq!(cfg.precision, Precision::Compensated);
        assert_eq!(cfg.cfl, CflPolicy::Warn);
    }

    #[test]
    fn output_dir_flag_beats_config_beats_default() {
        // The environment layer is exercised in the integration tests, where
        // the child process owns its environment.
        let flag = Some(PathBuf::from("flagdir"));
        assert_eq!(
            resolve_output_dir(&flag, Some(PathBuf::from("cfgdir"))),
            PathBuf::from("flagdir")
        );
        assert_eq!(
            resolve_output_dir(&None, Some(PathBuf::from("cfgdir"))),
            PathBuf::from("cfgdir")
        );
        assert_eq!(resolve_output_dir(&None, None), PathBuf::from("out"));
    }

    fn sample_series(label: &str, n: usize) -> SeriesBlock {
        SeriesBlock {
            label: label.to_string(),
            rows: (0..n)
                .map(|i| SeriesRow {
                    t: i as f64 * 0.5,
                    mass: 1.0,
                    h1_sq: 0.01,
                    energy: 0.02,
                    e_dev_scaled: 1e-8 * i as f64,
                    h1_dev_scaled: 2e-8 * i as f64,
                })
                .collect(),
        }
    }

    fn sample_fit() -> FitLine {
        FitLine {
            label: "energy_dev_scaled".into(),
            target: Some(1.0),
            fit: SlopeFit {
                slope: 1.05,
                intercept: -2.0,
                rms_residual: 0.01,
                slope_stderr: None,
                excluded: 0,
                used: 2,
            },
            points: vec![(0.1, 1e-3), (0.05, 5e-4)],
        }
    }

    #[test]
    fn plot_emission_is_deterministic_and_counts_files() {
        let dir = tempfile::tempdir().unwrap();
        let plot = dir.path().join("plot");
        let series = vec![
            sample_series("eps=0.1", 3),
            sample_series("eps=0.05", 3),
            sample_series("eps=0.025", 0),
        ];
        let fits = vec![sample_fit()];
        emit_plot_data(&plot, &series, &fits).unwrap();

        let mut names: Vec<String> = fs::read_dir(&plot)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(
            names,
            vec![
                "fits.dat",
                "series_eps_0.025.dat",
                "series_eps_0.05.dat",
                "series_eps_0.1.dat"
            ]
        );

        // Empty series: header only.
        let empty = fs::read_to_string(plot.join("series_eps_0.025.dat")).unwrap();
        assert_eq!(empty, "# t  e_dev_scaled\n");

        // Fit file evaluates the power law at the sample abscissae.
        let fit_text = fs::read_to_string(plot.join("fits.dat")).unwrap();
        assert!(fit_text.starts_with("# fit energy_dev_scaled\n"));
        let y_at = |x: f64| (-2.0f64 + 1.05 * x.ln()).exp();
        assert!(fit_text.contains(&format!("0.1 {}", y_at(0.1))));

        // Re-emission is byte-identical.
        let before: Vec<(String, Vec<u8>)> = names
            .iter()
            .map(|n| (n.clone(), fs::read(plot.join(n)).unwrap()))
            .collect();
        emit_plot_data(&plot, &series, &fits).unwrap();
        for (n, bytes) in before {
            assert_eq!(bytes, fs::read(plot.join(&n)).unwrap(), "{n} changed");
        }
    }
}
