//! `dhsp`: run sieve experiments and simulator self-checks.
//!
//! Exit codes: 0 success, 1 a check or recovery failed, 2 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dhsp_sieve::harness::{
    fit_scaling, read_rows, run_simulate, run_table1, verify_suite, Algorithm, ExperimentConfig, Format, Mode,
    ResultRow, VerifyConfig,
};
use dhsp_sieve::phase::Faults;
use dhsp_sieve::Error;

#[derive(Parser)]
#[command(name = "dhsp", version, about = "Dihedral hidden subgroup sieve simulator")]
struct Cli {
    /// JSON config mirroring the flags; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recover random secrets and report the exact-recovery rate.
    Simulate(SimulateArgs),
    /// Mean cancelled bits of the greedy sieve per query budget.
    Table1(Table1Args),
    /// Fit log_3 Q against sqrt(2 * bits * log_3 2).
    Scaling(ScalingArgs),
    /// Compare the phase backend with the dense simulator.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    Staged,
    General,
    Greedy,
    Abelian,
    Substring,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Output {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Fill the seconds column with wall time (output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    algorithm: Option<AlgArg>,
    /// Exponent for the staged (N = 2^n) and greedy (N = radix^n) algorithms.
    #[arg(long)]
    n: Option<u32>,
    /// Modulus for the general and substring algorithms.
    #[arg(long = "N")]
    modulus: Option<String>,
    /// Cyclic orders for the abelian algorithm, comma separated.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u64>>,
    /// Truncation widths of free summands for the abelian algorithm.
    #[arg(long, value_delimiter = ',')]
    free_bits: Option<Vec<u32>>,
    #[arg(long)]
    radix: Option<u32>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    retry_cap: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct Table1Args {
    /// `3^1..3^8`, `3^4` or a comma list such as `3,9,27`.
    #[arg(long)]
    budgets: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    radix: Option<u32>,
    /// Label width in digits.
    #[arg(long)]
    label_digits: Option<u32>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ScalingArgs {
    /// Rows from `table1`, CSV or JSON.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    nmax: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fault injection: probability of the sum branch in every combine.
    #[arg(long)]
    combine_bias: Option<f64>,
    /// Fault injection: conjugate every phase.
    #[arg(long)]
    sign_flip: bool,
}

enum Failure {
    Check(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Io(_) | Error::Unsupported(_) | Error::DegenerateFit(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Check(other.to_string()),
        }
    }
}

fn parse_budgets(text: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("bad budget list: {text}"));
    let one = |s: &str| -> Result<(usize, Option<u32>), Failure> {
        let s = s.trim();
        match s.split_once('^') {
            Some((b, e)) => {
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                let e: u32 = e.trim().parse().map_err(|_| bad())?;
                Ok((b.checked_pow(e).ok_or_else(bad)?, Some(e)))
            }
            None => Ok((s.parse().map_err(|_| bad())?, None)),
        }
    };
    if let Some((lo, hi)) = text.split_once("..") {
        let (base_lo, base_hi) = (lo.trim().split('^').next(), hi.trim().split('^').next());
        let ((_, Some(e0)), (_, Some(e1))) = (one(lo)?, one(hi)?) else {
            return Err(bad());
        };
        if base_lo != base_hi || e0 > e1 {
            return Err(bad());
        }
        let base: usize = base_lo.unwrap_or("").parse().map_err(|_| bad())?;
        return (e0..=e1).map(|e| base.checked_pow(e).ok_or_else(bad)).collect();
    }
    text.split(',').map(|s| one(s).map(|x| x.0)).collect()
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, Failure> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            Ok(ExperimentConfig::from_json(&text)?)
        }
    }
}

fn apply_output(cfg: &mut ExperimentConfig, o: &Output) {
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(p) = &o.out {
        cfg.out = Some(p.clone());
    }
    if let Some(f) = o.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    cfg.timing |= o.timing;
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(rows: &[ResultRow], cfg: &ExperimentConfig) -> Result<(), Failure> {
    let mut w = sink(&cfg.out)?;
    dhsp_sieve::harness::write_rows(rows, cfg.format, &mut w)?;
    w.flush().map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = load_config(&cli.config)?;
    match cli.cmd {
        Cmd::Simulate(a) => {
            cfg.mode = Mode::Simulate;
            if let Some(x) = a.algorithm {
                cfg.algorithm = match x {
                    AlgArg::Staged => Algorithm::Staged,
                    AlgArg::General => Algorithm::General,
                    AlgArg::Greedy => Algorithm::Greedy,
                    AlgArg::Abelian => Algorithm::Abelian,
                    AlgArg::Substring => Algorithm::Substring,
                };
            }
            cfg.n = a.n.or(cfg.n);
            cfg.modulus = a.modulus.or(cfg.modulus.take());
            cfg.orders = a.orders.unwrap_or(std::mem::take(&mut cfg.orders));
            cfg.free_bits = a.free_bits.unwrap_or(std::mem::take(&mut cfg.free_bits));
            cfg.radix = a.radix.unwrap_or(cfg.radix);
            cfg.trials = a.trials.unwrap_or(cfg.trials);
            cfg.budget = a.budget.unwrap_or(cfg.budget);
            cfg.retry_cap = a.retry_cap.unwrap_or(cfg.retry_cap);
            apply_output(&mut cfg, &a.output);
            cfg.validate()?;
            let rows = run_simulate(&cfg)?;
            emit(&rows, &cfg)?;
            if rows.iter().any(|r| r.mean < 1.0) {
                return Err(Failure::Check(format!("exact recovery rate {:.3}", rows[0].mean)));
            }
        }
        Cmd::Table1(a) => {
            cfg.mode = Mode::Table1;
            if let Some(b) = &a.budgets {
                cfg.budgets = parse_budgets(b)?;
            }
            cfg.trials = a.trials.unwrap_or(cfg.trials);
            cfg.radix = a.radix.unwrap_or(cfg.radix);
            cfg.label_digits = a.label_digits.unwrap_or(cfg.label_digits);
            apply_output(&mut cfg, &a.output);
            cfg.validate()?;
            let rows = run_table1(&cfg.budgets, cfg.trials, cfg.radix, cfg.label_digits, cfg.seed, cfg.timing)?;
            emit(&rows, &cfg)?;
        }
        Cmd::Scaling(a) => {
            cfg.mode = Mode::Scaling;
            let input = a.input.or(cfg.input.take()).ok_or_else(|| Failure::Usage("--in is required".into()))?;
            let file = File::open(&input).map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
            let rows = read_rows(file)?;
            let fit = fit_scaling(&rows)?;
            let mut w = sink(&a.out.or(cfg.out.take()))?;
            serde_json::to_writer_pretty(&mut w, &fit).map_err(|e| Failure::Usage(e.to_string()))?;
            writeln!(w).and_then(|_| w.flush()).map_err(|e| Failure::Usage(e.to_string()))?;
        }
        Cmd::Verify(a) => {
            cfg.mode = Mode::Verify;
            cfg.nmax = a.nmax.unwrap_or(cfg.nmax);
            cfg.samples = a.samples.unwrap_or(cfg.samples);
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            cfg.validate()?;
            let faults = Faults {
                combine_sum_probability: a.combine_bias.unwrap_or(0.5),
                phase_sign_flip: a.sign_flip,
            };
            if !(0.0..=1.0).contains(&faults.combine_sum_probability) {
                return Err(Failure::Usage("combine bias must be a probability".into()));
            }
            let rep = verify_suite(&VerifyConfig { nmax: cfg.nmax, samples: cfg.samples, seed: cfg.seed, faults })?;
            print!("{rep}");
            if !rep.passed() {
                let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(Failure::Check(format!("failed: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("dhsp: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("dhsp: {msg}");
            ExitCode::from(2)
        }
    }
}
