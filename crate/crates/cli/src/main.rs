//! `entcascade`: build, check, sample and export entropy-matched distributions.
//!
//! Exit codes: 0 success, 2 validation or parse failure, 3 solver
//! non-convergence, 4 materialization cap exceeded, 5 verification mismatch,
//! 1 for I/O failures while writing outputs.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use entropy_cascade::io::{self as formats, AnyArtifact, DenseFormat, FormatError};
use entropy_cascade::{
    build_from_schedule, empirical_entropy, joint_entropy_dense, joint_entropy_factored, marginal,
    materialize, sample_tuples, shannon_entropy, solve_vector, CascadeError, CascadeStep,
    DenseJointTensor, EntropySchedule, FactoredJointDistribution, SolveError, SolveMethod,
    SolverConfig, DEFAULT_MATERIALIZATION_CAP,
};

/// Allowed `|computed − target|` for `verify --target`, in bits.
const VERIFY_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "entcascade",
    version,
    about = "Joint distributions with prescribed entropies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    #[value(alias = "two_level")]
    TwoLevel,
    #[value(alias = "exponential_family")]
    ExponentialFamily,
    #[value(alias = "random_search")]
    RandomSearch,
}

impl From<MethodArg> for SolveMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::TwoLevel => SolveMethod::TwoLevel,
            MethodArg::ExponentialFamily => SolveMethod::ExponentialFamily,
            MethodArg::RandomSearch => SolveMethod::RandomSearch,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    #[value(alias = "indexed_csv")]
    IndexedCsv,
    #[value(alias = "flat_binary")]
    FlatBinary,
}

impl From<FormatArg> for DenseFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::IndexedCsv => DenseFormat::IndexedCsv,
            FormatArg::FlatBinary => DenseFormat::FlatBinary,
        }
    }
}

#[derive(clap::Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "two-level")]
    method: MethodArg,
    /// Allowed |achieved − target| in bits.
    #[arg(long, default_value_t = entropy_cascade::solver::DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Defaults to 200 for bisection methods and 100000 for random search.
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Randomly permute each solved vector.
    #[arg(long)]
    shuffle: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::for_method(self.method.into())
            .with_tolerance(self.tolerance)
            .with_seed(self.seed)
            .with_shuffle(self.shuffle);
        if let Some(m) = self.max_iterations {
            cfg = cfg.with_max_iterations(m);
        }
        cfg
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve for one probability vector with a given entropy.
    Solve {
        #[arg(long)]
        symbols: usize,
        /// Target entropy in bits.
        #[arg(long)]
        entropy: f64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Where to write the vector artifact.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a factored joint distribution from a schedule of joint entropies.
    Build {
        #[arg(long)]
        symbols: usize,
        /// Comma-separated joint entropies H1,H2,… in bits.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        schedule: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also materialize the dense tensor here.
        #[arg(long)]
        dense: Option<PathBuf>,
        /// Dense encoding; inferred from a `.bin` extension when omitted.
        #[arg(long, value_enum)]
        dense_format: Option<FormatArg>,
        #[arg(long, default_value_t = DEFAULT_MATERIALIZATION_CAP)]
        max_entries: u128,
    },
    /// Recompute entropies of a stored distribution and optionally check a target.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        target: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MATERIALIZATION_CAP)]
        max_entries: u128,
    },
    /// Draw symbol tuples from a factored distribution.
    Sample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Print the plug-in entropy of the drawn tuples.
        #[arg(long)]
        report_entropy: bool,
    },
    /// Materialize a factored distribution to a dense file.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MATERIALIZATION_CAP)]
        max_entries: u128,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    const IO: u8 = 1;
    const VALIDATION: u8 = 2;
    const NO_CONVERGENCE: u8 = 3;
    const TOO_LARGE: u8 = 4;
    const MISMATCH: u8 = 5;

    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::NoConvergence { .. } => Self::NO_CONVERGENCE,
            _ => Self::VALIDATION,
        };
        Self::new(code, e.to_string())
    }
}

impl From<CascadeError> for Failure {
    fn from(e: CascadeError) -> Self {
        let code = match &e {
            CascadeError::Solve {
                source: SolveError::NoConvergence { .. },
                ..
            } => Self::NO_CONVERGENCE,
            CascadeError::MaterializationTooLarge { .. } => Self::TOO_LARGE,
            _ => Self::VALIDATION,
        };
        Self::new(code, e.to_string())
    }
}

/// Failures reading an input are validation errors; writing an output is I/O.
fn input_error(e: FormatError) -> Failure {
    Failure::new(Failure::VALIDATION, e.to_string())
}

fn output_error(e: FormatError) -> Failure {
    Failure::new(Failure::IO, e.to_string())
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string(value).expect("reports serialize infallibly")
    );
}

fn dense_format_for(path: &Path, explicit: Option<FormatArg>) -> DenseFormat {
    match explicit {
        Some(f) => f.into(),
        None if path.extension().is_some_and(|e| e == "bin") => DenseFormat::FlatBinary,
        None => DenseFormat::IndexedCsv,
    }
}

fn format_name(f: DenseFormat) -> &'static str {
    match f {
        DenseFormat::IndexedCsv => "indexed_csv",
        DenseFormat::FlatBinary => "flat_binary",
    }
}

fn read_distribution(path: &Path) -> Result<FactoredJointDistribution, Failure> {
    match formats::read_any(path).map_err(input_error)? {
        AnyArtifact::Factored(f) => Ok(f),
        AnyArtifact::Vector(v) => Ok(FactoredJointDistribution::single(v)),
        _ => Err(Failure::new(
            Failure::VALIDATION,
            format!("{} is not a factored distribution", path.display()),
        )),
    }
}

fn cmd_solve(
    symbols: usize,
    entropy: f64,
    solver: &SolverArgs,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let outcome = solve_vector(symbols, entropy, &solver.config())?;
    if let Some(path) = out {
        formats::write_vector(&outcome.vector, path).map_err(output_error)?;
    }
    print_json(&outcome.report);
    Ok(())
}

#[derive(Serialize)]
struct BuildReport<'a> {
    n_symbols: usize,
    order: usize,
    target: f64,
    joint_entropy: f64,
    steps: &'a [CascadeStep],
    #[serde(skip_serializing_if = "Option::is_none")]
    dense: Option<DenseSummary>,
}

#[derive(Serialize)]
struct DenseSummary {
    path: PathBuf,
    format: &'static str,
    entries: usize,
    joint_entropy: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_build(
    symbols: usize,
    schedule: Vec<f64>,
    solver: &SolverArgs,
    out: &Path,
    dense: Option<&Path>,
    dense_format: Option<FormatArg>,
    max_entries: u128,
) -> Result<(), Failure> {
    let schedule = EntropySchedule::new(symbols, schedule)
        .map_err(|v| Failure::new(Failure::VALIDATION, format!("invalid schedule: {v}")))?;
    let built = build_from_schedule(&schedule, &solver.config())?;
    let f = &built.distribution;
    // Fail on the cap before writing anything.
    let tensor = dense.map(|_| materialize(f, max_entries)).transpose()?;
    formats::write_factored(f, out).map_err(output_error)?;
    let dense = match (dense, tensor) {
        (Some(path), Some(t)) => {
            let format = dense_format_for(path, dense_format);
            formats::write_dense(&t, format, path).map_err(output_error)?;
            Some(DenseSummary {
                path: path.to_path_buf(),
                format: format_name(format),
                entries: t.len(),
                joint_entropy: joint_entropy_dense(&t),
            })
        }
        _ => None,
    };
    print_json(&BuildReport {
        n_symbols: f.n_symbols(),
        order: f.order(),
        target: schedule.final_target(),
        joint_entropy: joint_entropy_factored(f),
        steps: &built.steps,
        dense,
    });
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    kind: &'static str,
    n_symbols: usize,
    order: usize,
    /// Dense entropy when available, factored otherwise.
    joint_entropy: f64,
    dense_entropy: Option<f64>,
    /// Sum of factor entropies (sum of marginal entropies for dense input).
    factored_entropy: f64,
    difference: Option<f64>,
    marginal_entropies: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_difference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pass: Option<bool>,
}

fn marginal_entropies(t: &DenseJointTensor) -> Result<Vec<f64>, Failure> {
    (0..t.order())
        .map(|axis| Ok(shannon_entropy(&marginal(t, axis)?)))
        .collect()
}

fn cmd_verify(input: &Path, target: Option<f64>, max_entries: u128) -> Result<(), Failure> {
    let mut report = match formats::read_any(input).map_err(input_error)? {
        AnyArtifact::Dense(t) => {
            let dense = joint_entropy_dense(&t);
            let marginals = marginal_entropies(&t)?;
            let factored: f64 = marginals.iter().sum();
            VerifyReport {
                kind: "dense",
                n_symbols: t.n_symbols(),
                order: t.order(),
                joint_entropy: dense,
                dense_entropy: Some(dense),
                factored_entropy: factored,
                difference: Some(dense - factored),
                marginal_entropies: marginals,
                target: None,
                target_difference: None,
                pass: None,
            }
        }
        other => {
            let f = match other {
                AnyArtifact::Factored(f) => f,
                AnyArtifact::Vector(v) => FactoredJointDistribution::single(v),
                _ => {
                    return Err(Failure::new(
                        Failure::VALIDATION,
                        format!("{} is not a distribution", input.display()),
                    ))
                }
            };
            let factored = joint_entropy_factored(&f);
            let (dense, marginals) = match materialize(&f, max_entries) {
                Ok(t) => (Some(joint_entropy_dense(&t)), marginal_entropies(&t)?),
                Err(CascadeError::MaterializationTooLarge { .. }) => {
                    (None, f.factors().iter().map(shannon_entropy).collect())
                }
                Err(e) => return Err(e.into()),
            };
            VerifyReport {
                kind: "factored",
                n_symbols: f.n_symbols(),
                order: f.order(),
                joint_entropy: dense.unwrap_or(factored),
                dense_entropy: dense,
                factored_entropy: factored,
                difference: dense.map(|d| d - factored),
                marginal_entropies: marginals,
                target: None,
                target_difference: None,
                pass: None,
            }
        }
    };
    if let Some(t) = target {
        let diff = report.joint_entropy - t;
        report.target = Some(t);
        report.target_difference = Some(diff);
        report.pass = Some(diff.abs() <= VERIFY_TOLERANCE);
    }
    print_json(&report);
    match report.pass {
        Some(false) => Err(Failure::new(
            Failure::MISMATCH,
            format!(
                "joint entropy {} differs from target {} by more than {VERIFY_TOLERANCE:e} bits",
                report.joint_entropy,
                report.target.unwrap_or_default()
            ),
        )),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct SampleReport {
    count: usize,
    order: usize,
    seed: u64,
    out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint_entropy: Option<f64>,
}

fn cmd_sample(
    input: &Path,
    count: usize,
    seed: u64,
    out: &Path,
    report_entropy: bool,
) -> Result<(), Failure> {
    if count == 0 {
        return Err(Failure::new(
            Failure::VALIDATION,
            "--count must be at least 1",
        ));
    }
    let f = read_distribution(input)?;
    let batch = sample_tuples(&f, count, seed);
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(out)?);
        for t in batch.tuples() {
            let line: Vec<String> = t.iter().map(usize::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    };
    write().map_err(|e| Failure::new(Failure::IO, format!("{}: {e}", out.display())))?;
    print_json(&SampleReport {
        count,
        order: f.order(),
        seed,
        out: out.to_path_buf(),
        empirical_entropy: report_entropy.then(|| empirical_entropy(&batch)),
        joint_entropy: report_entropy.then(|| joint_entropy_factored(&f)),
    });
    Ok(())
}

#[derive(Serialize)]
struct ExportReport {
    out: PathBuf,
    format: &'static str,
    entries: usize,
    joint_entropy: f64,
}

fn cmd_export(
    input: &Path,
    format: FormatArg,
    out: &Path,
    max_entries: u128,
) -> Result<(), Failure> {
    let f = read_distribution(input)?;
    let t = materialize(&f, max_entries)?;
    let format = DenseFormat::from(format);
    formats::write_dense(&t, format, out).map_err(output_error)?;
    print_json(&ExportReport {
        out: out.to_path_buf(),
        format: format_name(format),
        entries: t.len(),
        joint_entropy: joint_entropy_dense(&t),
    });
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            symbols,
            entropy,
            solver,
            out,
        } => cmd_solve(symbols, entropy, &solver, out.as_deref()),
        Command::Build {
            symbols,
            schedule,
            solver,
            out,
            dense,
            dense_format,
            max_entries,
        } => cmd_build(
            symbols,
            schedule,
            &solver,
            &out,
            dense.as_deref(),
            dense_format,
            max_entries,
        ),
        Command::Verify {
            input,
            target,
            max_entries,
        } => cmd_verify(&input, target, max_entries),
        Command::Sample {
            input,
            count,
            seed,
            out,
            report_entropy,
        } => cmd_sample(&input, count, seed, &out, report_entropy),
        Command::Export {
            input,
            format,
            out,
            max_entries,
        } => cmd_export(&input, format, &out, max_entries),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
