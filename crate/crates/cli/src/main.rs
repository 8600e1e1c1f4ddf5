//! `spikes` — reproducible tables and figures for sparse spike
//! certificates and recovery experiments.
//!
//! Every command writes CSV (canonical) and, where useful, an SVG plot,
//! plus a run manifest listing the outputs. Exit codes: 0 success,
//! 2 mathematical precondition failure, 64 usage, 65 config parse,
//! 70 internal.

mod output;
mod selftest;

use clap::{Args, Parser, Subcommand};
use output::{fmt, write_csv, write_svg, RunManifest};
use serde_json::json;
use spikes_core::blasso::{recovery_experiment, ExperimentConfig};
use spikes_core::certificates::{
    check_nondegeneracy, convergence_report, limit_precert, vanishing_precert, Certificate,
    CertificateError, GridSpec,
};
use spikes_core::interp::Nodes;
use spikes_core::kernels::{gram_fk, Kernel};
use spikes_core::structmat::{checkerboard_tol, is_checkerboard};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spikes", version, about = "Sparse spike certificates and desk-scale recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutDir {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate and plot the limit certificate eta_W.
    Etaw {
        /// Kernel spec: dirichlet:fc=10 | gaussian:sigma=1.0 | fourier:coeffs=[...]
        #[arg(long)]
        kernel: String,
        /// Spike count N.
        #[arg(long)]
        n: usize,
        /// Grid step override.
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Tabulate and plot the vanishing precertificate eta_V,t.
    Etav {
        #[arg(long)]
        kernel: String,
        /// Cluster scale t > 0.
        #[arg(long)]
        t: f64,
        /// Comma-separated node pattern z, e.g. "-1,0,1".
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Sup-norm gaps between eta_V,t and eta_W per scale and derivative order.
    Converge {
        #[arg(long)]
        kernel: String,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        /// Comma-separated scales, e.g. "0.4,0.2,0.01".
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 0)]
        max_order: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Gram matrix of the kernel derivative family at the origin.
    Gram {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Non-degeneracy verdict of the limit certificate.
    Nondegen {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run one recovery solve from a config file and dump the details.
    Recover {
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run the full support-recovery sweep from a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<u32>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run the named invariant suites.
    Selftest {
        /// Force a tolerance violation in the named suite (debug aid).
        #[arg(long)]
        force_fail: Option<String>,
    },
}

enum CliError {
    Usage(String),
    Config(String),
    Math(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Config(_) => 65,
            CliError::Math(_) => 2,
            CliError::Internal(_) => 70,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Math(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("io error: {e}"))
    }
}

impl From<CertificateError> for CliError {
    fn from(e: CertificateError) -> Self {
        match e {
            CertificateError::Injectivity { .. }
            | CertificateError::SingularGram { .. }
            | CertificateError::GridTooCoarse { .. } => CliError::Math(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

fn parse_kernel(spec: &str) -> Result<Kernel, CliError> {
    spec.parse().map_err(|e: spikes_core::kernels::KernelError| CliError::Usage(e.to_string()))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| CliError::Usage(format!("bad {what} list '{s}': {e}")))
}

fn parse_nodes(s: &str) -> Result<Nodes, CliError> {
    Nodes::new(parse_list(s, "node")?).map_err(|e| CliError::Usage(e.to_string()))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(64);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Etaw { kernel, n, step, out } => cmd_etaw(&kernel, n, step, &out.out),
        Command::Etav { kernel, t, z, step, out } => cmd_etav(&kernel, t, &z, step, &out.out),
        Command::Converge { kernel, z, t, max_order, out } => {
            cmd_converge(&kernel, &z, &t, max_order, &out.out)
        }
        Command::Gram { kernel, k, out } => cmd_gram(&kernel, k, &out.out),
        Command::Nondegen { kernel, n, step, out } => cmd_nondegen(&kernel, n, step, &out.out),
        Command::Recover { config, out } => cmd_recover(&config, &out.out),
        Command::Sweep { config, trials, seed, out } => cmd_sweep(&config, trials, seed, &out.out),
        Command::Selftest { force_fail } => cmd_selftest(force_fail.as_deref()),
    }
}

/// Sample a certificate and its first two derivatives on the default grid.
fn sample_grid_report(
    cert: &Certificate,
    step: Option<f64>,
) -> Result<(GridSpec, Vec<(f64, f64, f64, f64)>), CliError> {
    let mut grid = GridSpec::default_for(cert.kernel(), &cert.spike_positions());
    if let Some(s) = step {
        if !(s > 0.0) {
            return Err(CliError::Usage(format!("step must be positive, got {s}")));
        }
        grid.step = s;
    }
    let mut rows = Vec::with_capacity(grid.points());
    for i in 0..grid.points() {
        let x = grid.start + i as f64 * grid.step;
        rows.push((x, cert.eval(x)?, cert.eval_deriv(1, x)?, cert.eval_deriv(2, x)?));
    }
    Ok((grid, rows))
}

fn cmd_etaw(kernel_spec: &str, n: usize, step: Option<f64>, out: &Path) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("spike count n must be >= 1".into()));
    }
    let kernel = parse_kernel(kernel_spec)?;
    let cert = limit_precert(&kernel, n)?;
    let (grid, rows) = sample_grid_report(&cert, step)?;
    ensure_dir(out)?;
    let stem = format!("etaw_n{n}");
    let csv_path = out.join(format!("{stem}.csv"));
    write_csv(
        &csv_path,
        &["x", "eta", "d1", "d2"],
        &rows.iter().map(|r| vec![fmt(r.0), fmt(r.1), fmt(r.2), fmt(r.3)]).collect::<Vec<_>>(),
    )?;
    let svg_path = out.join(format!("{stem}.svg"));
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    write_svg(&svg_path, &[("eta_W", &pts)])?;
    let mut manifest = RunManifest::new(
        "etaw",
        json!({"kernel": kernel_spec, "n": n, "grid": grid}),
        None,
    );
    manifest.add_output(&csv_path);
    manifest.add_output(&svg_path);
    manifest.write(out, &stem)?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}

fn cmd_etav(
    kernel_spec: &str,
    t: f64,
    z_spec: &str,
    step: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    if !(t > 0.0) {
        return Err(CliError::Usage(format!("scale t must be positive, got {t}")));
    }
    let kernel = parse_kernel(kernel_spec)?;
    let z = parse_nodes(z_spec)?;
    let cert = vanishing_precert(&kernel, t, &z)?;
    let (grid, rows) = sample_grid_report(&cert, step)?;
    ensure_dir(out)?;
    let stem = format!("etav_t{t}");
    let csv_path = out.join(format!("{stem}.csv"));
    write_csv(
        &csv_path,
        &["x", "eta", "d1", "d2"],
        &rows.iter().map(|r| vec![fmt(r.0), fmt(r.1), fmt(r.2), fmt(r.3)]).collect::<Vec<_>>(),
    )?;
    let svg_path = out.join(format!("{stem}.svg"));
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    write_svg(&svg_path, &[("eta_V", &pts)])?;
    let mut manifest = RunManifest::new(
        "etav",
        json!({"kernel": kernel_spec, "t": t, "z": z.values(), "grid": grid}),
        None,
    );
    manifest.add_output(&csv_path);
    manifest.add_output(&svg_path);
    manifest.write(out, &stem)?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    Ok(())
}

fn cmd_converge(
    kernel_spec: &str,
    z_spec: &str,
    t_spec: &str,
    max_order: usize,
    out: &Path,
) -> Result<(), CliError> {
    let kernel = parse_kernel(kernel_spec)?;
    let z = parse_nodes(z_spec)?;
    let ts = parse_list(t_spec, "scale")?;
    if ts.is_empty() || ts.iter().any(|&t| !(t > 0.0)) {
        return Err(CliError::Usage(format!("scales must be positive, got '{t_spec}'")));
    }
    let report = convergence_report(&kernel, &z, &ts, max_order)?;
    ensure_dir(out)?;
    let csv_path = out.join("converge.csv");
    let mut rows = Vec::new();
    for (i, &t) in report.t_values.iter().enumerate() {
        for (l, gap) in report.gaps[i].iter().enumerate() {
            rows.push(vec![fmt(t), l.to_string(), fmt(*gap)]);
        }
    }
    write_csv(&csv_path, &["t", "order", "sup_gap"], &rows)?;
    let mut manifest = RunManifest::new(
        "converge",
        json!({"kernel": kernel_spec, "z": z.values(), "t": ts, "max_order": max_order}),
        None,
    );
    manifest.add_output(&csv_path);
    manifest.write(out, "converge")?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_gram(kernel_spec: &str, k: usize, out: &Path) -> Result<(), CliError> {
    let kernel = parse_kernel(kernel_spec)?;
    let bundle = gram_fk(&kernel, k).map_err(|e| match e {
        spikes_core::kernels::KernelError::GramOrderOverflow { .. } => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Internal(other.to_string()),
    })?;
    ensure_dir(out)?;
    let stem = format!("gram_k{k}");
    let csv_path = out.join(format!("{stem}.csv"));
    let n = bundle.matrix.nrows();
    let mut header: Vec<String> = vec!["row".into()];
    header.extend(bundle.basis_labels.iter().cloned());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut row = vec![bundle.basis_labels[i].clone()];
            row.extend((0..n).map(|j| fmt(bundle.matrix[(i, j)])));
            row
        })
        .collect();
    write_csv(&csv_path, &header_refs, &rows)?;
    let checker = is_checkerboard(&bundle.matrix, checkerboard_tol(&bundle.matrix));
    let summary_path = out.join(format!("{stem}.json"));
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&json!({
            "kernel": kernel_spec,
            "k": k,
            "cond_estimate": bundle.cond_estimate,
            "rank_deficient": bundle.rank_deficient,
            "checkerboard": checker.is_checkerboard,
            "max_odd_parity_entry": checker.max_odd_parity_entry,
        }))
        .expect("json"),
    )?;
    let mut manifest = RunManifest::new("gram", json!({"kernel": kernel_spec, "k": k}), None);
    manifest.add_output(&csv_path);
    manifest.add_output(&summary_path);
    manifest.write(out, &stem)?;
    println!("wrote {} and {}", csv_path.display(), summary_path.display());
    Ok(())
}

fn cmd_nondegen(
    kernel_spec: &str,
    n: usize,
    step: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("spike count n must be >= 1".into()));
    }
    let kernel = parse_kernel(kernel_spec)?;
    let cert = limit_precert(&kernel, n)?;
    let mut grid = GridSpec::default_for(&kernel, &cert.spike_positions());
    if let Some(s) = step {
        grid.step = s;
    }
    let report = check_nondegeneracy(&cert, &grid)?;
    ensure_dir(out)?;
    let stem = format!("nondegen_n{n}");
    let path = out.join(format!("{stem}.json"));
    let doc = json!({
        "kernel": kernel_spec,
        "n": n,
        "verdict": report.verdict,
        "nondegenerate": report.verdict.as_bool(),
        "sup_off_spike": report.sup_off_spike,
        "off_spike_margin": report.off_spike_margin,
        "curvature_at_spikes": report.curvature_at_spikes,
        "tail_bound": report.tail_bound,
        "grid": report.grid,
    });
    std::fs::write(&path, serde_json::to_string_pretty(&doc).expect("json"))?;
    let mut manifest = RunManifest::new("nondegen", json!({"kernel": kernel_spec, "n": n}), None);
    manifest.add_output(&path);
    manifest.write(out, &stem)?;
    println!("{}", serde_json::to_string(&doc).expect("json"));
    Ok(())
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "config parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })
}

fn map_experiment_error(e: spikes_core::blasso::BlassoError) -> CliError {
    use spikes_core::blasso::BlassoError as B;
    match e {
        B::DegenerateKernel { .. } | B::Certificate(_) => CliError::Math(e.to_string()),
        B::BadConfig(_)
        | B::NonPositiveAmplitude { .. }
        | B::LengthMismatch { .. }
        | B::CoincidentPositions { .. }
        | B::NonFinitePosition { .. } => CliError::Usage(e.to_string()),
        other => CliError::Internal(other.to_string()),
    }
}

fn cmd_recover(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let mut config = load_config(config_path)?;
    // one cell: the first scale, a single trial
    config.t_list.truncate(1);
    config.trials = 1;
    let table = recovery_experiment(&config).map_err(map_experiment_error)?;
    ensure_dir(out)?;
    let csv_path = out.join("recover.csv");
    write_rows_csv(&csv_path, &table.rows)?;
    let mut manifest = RunManifest::new(
        "recover",
        serde_json::to_value(&config).expect("config echoes"),
        Some(config.seed),
    );
    manifest.add_output(&csv_path);
    manifest.write(out, "recover")?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_sweep(
    config_path: &Path,
    trials: Option<u32>,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let mut config = load_config(config_path)?;
    if let Some(v) = trials {
        config.trials = v;
    }
    if let Some(v) = seed {
        config.seed = v;
    }
    let table = recovery_experiment(&config).map_err(map_experiment_error)?;
    ensure_dir(out)?;
    let csv_path = out.join("sweep.csv");
    write_rows_csv(&csv_path, &table.rows)?;
    let mut manifest = RunManifest::new(
        "sweep",
        serde_json::to_value(&config).expect("config echoes"),
        Some(config.seed),
    );
    manifest.add_output(&csv_path);
    manifest.write(out, "sweep")?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn write_rows_csv(
    path: &Path,
    rows: &[spikes_core::blasso::ExperimentRow],
) -> Result<(), CliError> {
    let header = [
        "t",
        "trial",
        "spike_count",
        "pos_err",
        "amp_err",
        "dual_sup",
        "normalized_err",
        "converged",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt(r.t),
                r.trial.to_string(),
                r.spike_count.to_string(),
                fmt(r.pos_err),
                fmt(r.amp_err),
                fmt(r.dual_sup),
                fmt(r.normalized_err),
                r.converged.to_string(),
            ]
        })
        .collect();
    write_csv(path, &header, &body)?;
    Ok(())
}

fn cmd_selftest(force_fail: Option<&str>) -> Result<(), CliError> {
    if let Some(name) = force_fail {
        if !selftest::SUITES.contains(&name) {
            return Err(CliError::Usage(format!(
                "unknown suite '{name}'; available: {}",
                selftest::SUITES.join(", ")
            )));
        }
    }
    match selftest::run(force_fail) {
        Ok(()) => {
            println!("all suites passed");
            Ok(())
        }
        Err((suite, msg)) => Err(CliError::Math(format!("selftest suite '{suite}' failed: {msg}"))),
    }
}
