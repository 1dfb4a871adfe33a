//! `nnbisim`: merge networks, bound their output discrepancy and verify
//! safety through compressed networks.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bisim_core::bisim::{bisim_error_lower_mc, bisim_error_upper};
use bisim_core::formats::{load_network, load_problem, write_json_net, Problem};
use bisim_core::verify::{render_table, write_reports_csv, VerifyOptions};
use bisim_core::{merge, verify, verify_via_compressed, Activation, Method, NormKind, Verdict};
use clap::{Args, Parser, Subcommand, ValueEnum};

const DEFAULT_SPLITS: u32 = 4;

#[derive(Parser)]
#[command(name = "nnbisim", version, about = "Approximate bisimulation bounds for ReLU networks")]
struct Cli {
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a network file (.nnet or .json)
    Info { net: PathBuf },
    /// Write the merged difference network of LARGE and SMALL as JSON
    Merge {
        large: PathBuf,
        small: PathBuf,
        out: PathBuf,
    },
    /// Bound the output discrepancy between two networks over a problem's input box
    Bisim {
        large: PathBuf,
        small: PathBuf,
        problem: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        /// Also report a Monte-Carlo lower bound from this many samples
        #[arg(long)]
        mc: Option<u64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Verify a network against a problem's unsafe region (exit 0 Safe, 4 Unsafe, 5 Uncertain)
    Verify {
        net: PathBuf,
        problem: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Random points tried in the counterexample search
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Verify every pair of a manifest through the compressed network
    Report {
        manifest: PathBuf,
        problem: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        /// Write the CSV here and print a table instead
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also verify the large network directly (fills V_L / T_L)
        #[arg(long)]
        also_large: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Interval,
    Split,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Inf,
    L2,
}

#[derive(Args)]
struct BackendArgs {
    /// Reachability back-end (default: problem file, then interval)
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Cells per input dimension for `--method split`
    #[arg(long)]
    splits: Option<u32>,
    /// Output norm (default: problem file, then inf)
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
}

impl BackendArgs {
    fn method(&self, problem: &Problem) -> Result<Method> {
        let splits = self.splits.or(problem.options.splits);
        if splits == Some(0) {
            anyhow::bail!(bisim_core::Error::InvalidArgument("--splits must be >= 1".into()));
        }
        Ok(match self.method {
            Some(MethodArg::Interval) => Method::Interval,
            Some(MethodArg::Exact) => Method::ExactStar,
            Some(MethodArg::Split) => Method::IntervalSplit(splits.unwrap_or(DEFAULT_SPLITS)),
            None => match problem.options.method {
                Some(Method::IntervalSplit(_)) => {
                    Method::IntervalSplit(splits.unwrap_or(DEFAULT_SPLITS))
                }
                Some(m) => m,
                None => Method::Interval,
            },
        })
    }

    fn norm(&self, problem: &Problem) -> NormKind {
        match self.norm {
            Some(NormArg::Inf) => NormKind::Linf,
            Some(NormArg::L2) => NormKind::L2,
            None => problem.options.norm.unwrap_or_default(),
        }
    }
}

fn cmd_info(path: &Path) -> Result<ExitCode> {
    let net = load_network(path)?;
    let widths = net.widths();
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "layers: {}, widths: [{}]",
        net.layer_count(),
        widths.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    )?;
    for (k, layer) in net.layers().iter().enumerate() {
        let relu = layer.activations.iter().filter(|a| **a == Activation::Relu).count();
        let ident = layer.activations.len() - relu;
        writeln!(out, "  layer {k}: {}x{} relu={relu} identity={ident}", layer.out_dim(), layer.in_dim())?;
    }
    writeln!(out, "parameters: {}", net.param_count())?;
    if net.has_mixed_layers() {
        writeln!(out, "note: mixed ReLU/Identity activations within a layer")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_merge(large: &Path, small: &Path, out: &Path) -> Result<ExitCode> {
    let merged = merge(&load_network(large)?, &load_network(small)?)?;
    fs::write(out, write_json_net(&merged)).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} ({} layers)", out.display(), merged.layer_count());
    Ok(ExitCode::SUCCESS)
}

fn cmd_bisim(
    large: &Path,
    small: &Path,
    problem: &Path,
    backend: &BackendArgs,
    mc: Option<u64>,
    seed: u64,
) -> Result<ExitCode> {
    let (large, small) = (load_network(large)?, load_network(small)?);
    let problem = load_problem(problem)?;
    let method = backend.method(&problem)?;
    let norm = backend.norm(&problem);
    let bound = bisim_error_upper(&large, &small, &problem.input, method, norm, &Default::default())?;
    let mut out = io::stdout().lock();
    writeln!(out, "epsilon_upper={:.6}", bound.epsilon_upper)?;
    if let Some(n) = mc {
        let lower = bisim_error_lower_mc(&large, &small, &problem.input, n, seed, norm)?;
        writeln!(out, "epsilon_lower={lower:.6}")?;
    }
    eprintln!("method={method} norm={norm} time_s={:.5}", bound.wall_time_seconds);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(
    net: &Path,
    problem: &Path,
    backend: &BackendArgs,
    seed: u64,
    samples: u64,
) -> Result<ExitCode> {
    let net = load_network(net)?;
    let problem = load_problem(problem)?;
    let method = backend.method(&problem)?;
    let opts = VerifyOptions {
        seed,
        samples,
        ..Default::default()
    };
    let verdict = verify(&net, &problem.input, &problem.spec, method, &opts)?;
    let mut out = io::stdout().lock();
    writeln!(out, "verdict={verdict}")?;
    Ok(match verdict {
        Verdict::Safe => ExitCode::SUCCESS,
        Verdict::Unsafe { witness } => {
            let y = net.eval_slice(&witness)?;
            writeln!(out, "witness={witness:?}")?;
            writeln!(out, "output={y:?}")?;
            ExitCode::from(4)
        }
        Verdict::Uncertain => ExitCode::from(5),
    })
}

struct ManifestEntry {
    id: String,
    large: PathBuf,
    small: PathBuf,
}

/// `id,large_path,small_path` per line; `#` comments; paths relative to
/// the manifest's directory.
fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)
        .map_err(|e| bisim_core::Error::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [id, large, small] = fields[..] else {
            anyhow::bail!(bisim_core::Error::Parse {
                location: format!("{}: line {}", path.display(), i + 1),
                message: "expected `id,large_path,small_path`".into(),
            });
        };
        entries.push(ManifestEntry {
            id: id.to_string(),
            large: base.join(large),
            small: base.join(small),
        });
    }
    Ok(entries)
}

fn cmd_report(
    manifest: &Path,
    problem: &Path,
    backend: &BackendArgs,
    csv: Option<&Path>,
    also_large: bool,
    seed: u64,
) -> Result<ExitCode> {
    let entries = read_manifest(manifest)?;
    let problem = load_problem(problem)?;
    let method = backend.method(&problem)?;
    let norm = backend.norm(&problem);
    let opts = VerifyOptions {
        seed,
        ..Default::default()
    };
    let mut reports = Vec::with_capacity(entries.len());
    for e in &entries {
        let large = load_network(&e.large)?;
        let small = load_network(&e.small)?;
        let r = verify_via_compressed(
            &e.id,
            &large,
            &small,
            &problem.input,
            &problem.spec,
            method,
            norm,
            &opts,
            also_large,
        )?;
        eprintln!("{}: epsilon={} V_S={}", r.network_id, r.epsilon, r.verdict_small);
        reports.push(r);
    }
    match csv {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_reports_csv(file, &reports)?;
            print!("{}", render_table(&reports));
        }
        None => write_reports_csv(io::stdout().lock(), &reports)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<bisim_core::Error>() {
        Some(bisim_core::Error::Parse { .. }) => 2,
        Some(bisim_core::Error::MergePrecondition { .. } | bisim_core::Error::UnsupportedShape(_)) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Info { net } => cmd_info(net),
        Command::Merge { large, small, out } => cmd_merge(large, small, out),
        Command::Bisim {
            large,
            small,
            problem,
            backend,
            mc,
            seed,
        } => cmd_bisim(large, small, problem, backend, *mc, *seed),
        Command::Verify {
            net,
            problem,
            backend,
            seed,
            samples,
        } => cmd_verify(net, problem, backend, *seed, *samples),
        Command::Report {
            manifest,
            problem,
            backend,
            csv,
            also_large,
            seed,
        } => cmd_report(manifest, problem, backend, csv.as_deref(), *also_large, *seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
