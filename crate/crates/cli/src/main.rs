use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use perturbdp::accounting::GammaGrid;
use perturbdp::audit::write_audit_csv;
use perturbdp::cellkey::{generate_record_keys, read_record_keys, DEFAULT_BIG_N};
use perturbdp::grid::linear_grid;
use perturbdp::sweep::{delta_sweep, write_delta_sweep_csv, DeltaSweep, DeltaSweepMode};
use perturbdp::*;
use serde_json::json;

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_UNREACHABLE: u8 = 3;
const EXIT_SUPPORT: u8 = 4;

/// Design max-entropy integer noise, account for its privacy and sample it by cell key.
#[derive(Parser, Debug)]
#[command(name = "perturbdp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Smallest support D meeting a target (epsilon, delta)
    Design(DesignArgs),
    /// Noise pmf for a support D and a variance or shape exponent
    Pmf(PmfArgs),
    /// Delta of a pmf file at one epsilon
    Delta(DeltaArgs),
    /// Delta over an epsilon grid, as CSV
    DeltaSweep(DeltaSweepArgs),
    /// Build the integer lookup table of a pmf file
    Quantize(QuantizeArgs),
    /// Draw the noise for a cell key from a table file
    Sample(SampleArgs),
    /// Aggregate record keys into a cell key
    Cellkey(CellkeyArgs),
    /// Key size sweep of post-quantization metrics, as CSV
    Audit(AuditArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct KappaArgs {
    /// kappa as a fraction of its admissible maximum 2 epsilon / (4D^2 - 1)
    #[arg(long)]
    kappa_fraction: Option<f64>,
    /// Fixed kappa for every D
    #[arg(long)]
    kappa: Option<f64>,
}

impl KappaArgs {
    fn rule(&self) -> KappaRule {
        match (self.kappa_fraction, self.kappa) {
            (_, Some(k)) => KappaRule::Fixed(k),
            (Some(f), None) => KappaRule::FractionOfMax(f),
            (None, None) => KappaRule::default(),
        }
    }
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[arg(long)]
    epsilon: f64,
    /// Target delta in (0, 1)
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = CalibrationInput::DEFAULT_D_MAX)]
    d_max: u32,
    #[command(flatten)]
    kappa: KappaArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("shape").required(true).args(["variance", "gamma"])))]
struct PmfArgs {
    /// Support half-width
    #[arg(long = "d")]
    d: u32,
    #[arg(long)]
    variance: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DeltaMethod {
    Analytical,
    Oracle,
}

#[derive(Args, Debug)]
struct DeltaArgs {
    /// Pmf JSON file
    #[arg(long)]
    pmf: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = DeltaMethod::Analytical)]
    method: DeltaMethod,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("mode").required(true).args(["gamma", "variance", "calibrated"])))]
struct DeltaSweepArgs {
    #[arg(long = "d")]
    d: u32,
    /// Fixed shape exponent
    #[arg(long)]
    gamma: Option<f64>,
    /// Fixed variance, converted to a shape exponent
    #[arg(long)]
    variance: Option<f64>,
    /// Use the calibrated pmf at each epsilon
    #[arg(long)]
    calibrated: bool,
    #[command(flatten)]
    kappa: KappaArgs,
    #[arg(long, default_value_t = 0.01)]
    eps_start: f64,
    #[arg(long, default_value_t = 3.0)]
    eps_stop: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_step: f64,
    /// Also fill the numeric minimum over a grid of shape exponents
    #[arg(long)]
    numeric: bool,
    #[arg(long, default_value_t = 0.0001)]
    gamma_lo: f64,
    #[arg(long, default_value_t = 0.3)]
    gamma_hi: f64,
    #[arg(long, default_value_t = 0.0001)]
    gamma_step: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct QuantizeArgs {
    /// Pmf JSON file
    #[arg(long)]
    pmf: PathBuf,
    #[arg(long)]
    keysize_log2: u8,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Scheme {
    #[default]
    ByteSums,
    FoldedSum,
}

impl From<Scheme> for CellKeyScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::ByteSums => CellKeyScheme::ByteSums,
            Scheme::FoldedSum => CellKeyScheme::FoldedSum,
        }
    }
}

#[derive(Args, Debug)]
struct AggregationArgs {
    /// Prime modulus for the component sums
    #[arg(long, default_value_t = DEFAULT_BIG_N)]
    big_n: u64,
    #[arg(long, value_enum, default_value_t = Scheme::ByteSums)]
    scheme: Scheme,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("key").required(true).args(["cell_key", "record_keys"])))]
struct SampleArgs {
    /// Table JSON file
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    cell_key: Option<u64>,
    /// Newline-delimited record keys of the cell
    #[arg(long)]
    record_keys: Option<PathBuf>,
    /// True count to perturb; must be at least D
    #[arg(long)]
    count: Option<u64>,
    #[command(flatten)]
    aggregation: AggregationArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["record_keys", "count"])))]
struct CellkeyArgs {
    /// Newline-delimited record keys
    #[arg(long)]
    record_keys: Option<PathBuf>,
    /// Generate this many record keys instead of reading them
    #[arg(long, requires = "seed")]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    keysize_log2: u8,
    #[command(flatten)]
    aggregation: AggregationArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long = "d", default_value_t = 10)]
    d: u32,
    #[arg(long, default_value_t = 0.1)]
    eps_start: f64,
    #[arg(long, default_value_t = 2.5)]
    eps_stop: f64,
    #[arg(long, default_value_t = 0.1)]
    eps_step: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [8u8, 16, 32])]
    keysizes: Vec<u8>,
    #[command(flatten)]
    kappa: KappaArgs,
    #[command(flatten)]
    output: Output,
}

fn emit(output: &Output, body: &[u8]) -> Result<()> {
    match &output.out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(body)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json(output: &Output, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(output, text.as_bytes())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_keys(path: &Path) -> Result<Vec<RecordKey>> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_record_keys(BufReader::new(file))?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Design(a) => {
            let input = CalibrationInput {
                kappa_rule: a.kappa.rule(),
                d_max: a.d_max,
                ..CalibrationInput::new(a.epsilon, a.delta)
            };
            emit_json(&a.output, &design_noise(&input)?)
        }
        Command::Pmf(a) => {
            let pmf = match (a.variance, a.gamma) {
                (Some(v), _) => NoisePmf::from_variance(a.d, v)?,
                (None, Some(g)) => pmf_from_gamma(a.d, g)?,
                (None, None) => unreachable!("clap requires one of the shape flags"),
            };
            emit(&a.output, format!("{}\n", pmf.to_json_pretty()).as_bytes())
        }
        Command::Delta(a) => {
            let pmf = NoisePmf::from_json(&read(&a.pmf)?)?;
            let point = match a.method {
                DeltaMethod::Analytical => delta_of_epsilon(&pmf, a.epsilon)?,
                DeltaMethod::Oracle => delta_oracle(&pmf, a.epsilon)?,
            };
            emit_json(&a.output, &point)
        }
        Command::DeltaSweep(a) => {
            let mode = match (a.gamma, a.variance) {
                (Some(g), _) => DeltaSweepMode::FixedGamma(g),
                (None, Some(v)) => DeltaSweepMode::FixedGamma(solve_gamma(a.d, v)?),
                (None, None) => DeltaSweepMode::Calibrated(a.kappa.rule()),
            };
            let sweep = DeltaSweep {
                d: a.d,
                mode,
                epsilons: linear_grid(a.eps_start, a.eps_stop, a.eps_step)?,
                numeric_grid: a.numeric.then_some(GammaGrid {
                    lo: a.gamma_lo,
                    hi: a.gamma_hi,
                    step: a.gamma_step,
                }),
            };
            let rows = delta_sweep(&sweep)?;
            let mut buf = Vec::new();
            write_delta_sweep_csv(&rows, &mut buf)?;
            emit(&a.output, &buf)
        }
        Command::Quantize(a) => {
            let pmf = NoisePmf::from_json(&read(&a.pmf)?)?;
            let table = build_lookup(&pmf, a.keysize_log2)?;
            if !table.full_support() {
                eprintln!(
                    "warning: KEYSIZE 2^{} cannot represent every value in [-{d}, {d}]; the table cannot be sampled",
                    a.keysize_log2,
                    d = table.d()
                );
            }
            emit(
                &a.output,
                format!("{}\n", table.to_json_pretty()).as_bytes(),
            )
        }
        Command::Sample(a) => {
            let table = LookupTable::from_json(&read(&a.table)?)?;
            let key = match (a.cell_key, &a.record_keys) {
                (Some(k), _) => CellKey::new(k, table.keysize_log2())?,
                (None, Some(path)) => {
                    let config = CellKeyConfig::with_modulus(
                        table.keysize_log2(),
                        a.aggregation.big_n,
                        a.aggregation.scheme.into(),
                    )?;
                    aggregate_cell_key(&read_keys(path)?, &config)?
                }
                (None, None) => unreachable!("clap requires a key source"),
            };
            let noise = sample(&table, key)?.0;
            let mut doc = json!({ "cell_key": key.value(), "noise": noise });
            if let Some(count) = a.count {
                doc["true_count"] = json!(count);
                doc["perturbed_count"] = json!(perturb(count, &table, key)?);
            }
            emit_json(&a.output, &doc)
        }
        Command::Cellkey(a) => {
            let keys = match (&a.record_keys, a.count) {
                (Some(path), _) => read_keys(path)?,
                (None, Some(n)) => generate_record_keys(n, a.seed.expect("clap requires --seed"))?,
                (None, None) => unreachable!("clap requires a key source"),
            };
            let config = CellKeyConfig::with_modulus(
                a.keysize_log2,
                a.aggregation.big_n,
                a.aggregation.scheme.into(),
            )?;
            let key = aggregate_cell_key(&keys, &config)?;
            emit(&a.output, format!("{}\n", key.value()).as_bytes())
        }
        Command::Audit(a) => {
            let sweep = KeysizeSweep {
                d: a.d,
                epsilons: linear_grid(a.eps_start, a.eps_stop, a.eps_step)?,
                keysize_log2s: a.keysizes,
                kappa_rule: a.kappa.rule(),
            };
            let rows = keysize_sweep(&sweep)?;
            let mut buf = Vec::new();
            write_audit_csv(&rows, &mut buf)?;
            emit(&a.output, &buf)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::TargetUnreachable { .. }) => EXIT_UNREACHABLE,
        Some(Error::InsufficientSupport { .. }) => EXIT_SUPPORT,
        Some(Error::NonConvergence { .. }) | None => EXIT_OTHER,
        Some(_) => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
