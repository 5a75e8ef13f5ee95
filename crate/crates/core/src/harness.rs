//! Experiment runner: bit-count table, scaling fit, simulator self-checks.
//!
//! Trials run on the rayon pool. Trial `i` of the row with budget `q` draws from
//! ChaCha8 seeded with the root seed on stream `(q << 32) | i`, so any trial
//! can be replayed alone and output does not depend on scheduling.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::greedy::{greedy_sieve, recover_slope_radix, GreedyConfig, RadixObjective};
use crate::group::{AbelianGroupSpec, GroupCtx};
use crate::oracle::{make_injective_oracle, make_reflection_oracle, ShiftPair, SubstringInstance};
use crate::phase::{Branch, Faults, PhaseBackend, Pm};
use crate::recovery::{recover_slope_general, recover_slope_power2, solve_abelian_shift, solve_substring, RecoveryConfig};
use crate::util::{mean, stddev};
use crate::verifier;

/// RNG for trial `index` of row `row`.
pub fn trial_rng(seed: u64, row: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((row << 32) | index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Simulate,
    Table1,
    Scaling,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Staged,
    General,
    Greedy,
    Abelian,
    Substring,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub algorithm: Algorithm,
    /// Exponent: `N = radix^n` for the staged and greedy algorithms.
    pub n: Option<u32>,
    /// Modulus for the general and substring algorithms, in decimal.
    #[serde(rename = "N")]
    pub modulus: Option<String>,
    /// Finite cyclic orders for the abelian algorithm.
    pub orders: Vec<u64>,
    /// Truncation widths of free `Z` summands for the abelian algorithm.
    pub free_bits: Vec<u32>,
    pub radix: u32,
    pub trials: usize,
    /// Sampled qubits per greedy run.
    pub budget: usize,
    /// Row budgets for the bit-count table.
    pub budgets: Vec<usize>,
    /// Label width in digits for the bit-count table.
    pub label_digits: u32,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    /// Input rows for the scaling fit.
    pub input: Option<PathBuf>,
    pub retry_cap: usize,
    pub nmax: u64,
    pub samples: usize,
    /// Record wall time in the `seconds` column; off by default so output is
    /// reproducible byte for byte.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Simulate,
            algorithm: Algorithm::Staged,
            n: None,
            modulus: None,
            orders: Vec::new(),
            free_bits: Vec::new(),
            radix: 2,
            trials: 100,
            budget: 1024,
            budgets: (1..=6).map(|e| 3usize.pow(e)).collect(),
            label_digits: 96,
            seed: 0,
            format: Format::Csv,
            out: None,
            input: None,
            retry_cap: RecoveryConfig::default().retry_cap,
            nmax: 32,
            samples: 100_000,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.radix < 2 {
            return Err(Error::InvalidArgument("radix must be at least 2".into()));
        }
        if self.retry_cap == 0 {
            return Err(Error::InvalidArgument("retry cap must be at least 1".into()));
        }
        if self.mode == Mode::Table1 && self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("budgets must be strictly ascending".into()));
        }
        if self.mode == Mode::Verify && (self.nmax == 0 || self.nmax as usize > verifier::DENSE_LIMIT) {
            return Err(Error::InvalidArgument(format!("nmax must be in 1..={}", verifier::DENSE_LIMIT)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    fn recovery(&self) -> RecoveryConfig {
        RecoveryConfig { retry_cap: self.retry_cap, ..RecoveryConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub budget: u64,
    pub trials: usize,
    pub mean: f64,
    pub stddev: f64,
    /// Oracle queries consumed by all trials of the row.
    pub queries: u64,
    pub seconds: f64,
}

fn summarize(budget: u64, stats: &[(f64, u64)], seconds: f64) -> ResultRow {
    let xs: Vec<f64> = stats.iter().map(|s| s.0).collect();
    ResultRow {
        budget,
        trials: xs.len(),
        mean: mean(&xs),
        stddev: if xs.len() > 1 { stddev(&xs) } else { 0.0 },
        queries: stats.iter().map(|s| s.1).sum(),
        seconds,
    }
}

/// One cancellation race: `budget` uniform labels of `digits` base-`r`
/// digits, greedy pairing until the buckets run dry; returns the largest
/// number of cancelled low digits and the queries used.
pub fn cancellation_race(r: u32, digits: u32, budget: usize, rng: &mut ChaCha8Rng) -> Result<(u64, u64)> {
    let obj = RadixObjective::new(r, digits)?;
    let s = rng.gen_biguint_below(obj.modulus());
    let o = make_reflection_oracle(&GroupCtx::new(obj.modulus().clone())?, &s)?;
    let mut be = PhaseBackend::from_seed(o.clone(), rng.gen());
    let out = greedy_sieve(&mut be, &obj, None, GreedyConfig::new(budget))?;
    Ok((out.max_alpha, o.queries()))
}

/// Mean cancelled bits per query budget (greedy sieve, race mode).
pub fn run_table1(budgets: &[usize], trials: usize, r: u32, digits: u32, seed: u64, timing: bool) -> Result<Vec<ResultRow>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(budgets.len());
    for &q in budgets {
        let start = Instant::now();
        let stats = (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(seed, q as u64, i as u64);
                cancellation_race(r, digits, q, &mut rng).map(|(a, q)| (a as f64, q))
            })
            .collect::<Result<Vec<_>>>()?;
        let secs = if timing { start.elapsed().as_secs_f64() } else { 0.0 };
        rows.push(summarize(q as u64, &stats, secs));
    }
    rows.sort_by_key(|r| r.budget);
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval for the slope.
    pub slope_ci: (f64, f64),
    pub residuals: Vec<f64>,
}

/// Least squares of `log_3 Q` against `sqrt(2 * mean_bits * log_3 2)`;
/// the `3^sqrt(2 log_3 N)` law predicts slope 1.
pub fn fit_scaling(rows: &[ResultRow]) -> Result<ScalingFit> {
    if rows.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} rows, need at least 3", rows.len())));
    }
    let ln3 = 3f64.ln();
    let xs: Vec<f64> = rows.iter().map(|r| (2.0 * r.mean * 2f64.ln() / ln3).sqrt()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.budget as f64).ln() / ln3).collect();
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite input".into()));
    }
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * xs.len() as f64 {
        return Err(Error::DegenerateFit("all rows have the same mean".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let df = (rows.len() - 2) as f64;
    let se = (residuals.iter().map(|e| e * e).sum::<f64>() / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(ScalingFit { slope, intercept, slope_ci: (slope - t * se, slope + t * se), residuals })
}

pub fn write_rows<W: Write>(rows: &[ResultRow], format: Format, mut w: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut cw = csv::Writer::from_writer(w);
            for r in rows {
                cw.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
            }
            cw.flush().map_err(|e| Error::Io(e.to_string()))?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w).map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    Ok(())
}

/// Reads rows written by [`write_rows`] in either format.
pub fn read_rows<R: Read>(mut r: R) -> Result<Vec<ResultRow>> {
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(|e| Error::Io(e.to_string()))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| Error::Io(e.to_string()));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| Error::Io(e.to_string()))
}

fn parse_modulus(cfg: &ExperimentConfig) -> Result<BigUint> {
    let text = cfg.modulus.as_deref().ok_or_else(|| Error::InvalidArgument("N is required".into()))?;
    text.parse().map_err(|_| Error::InvalidArgument(format!("bad N: {text}")))
}

fn exponent(cfg: &ExperimentConfig) -> Result<u32> {
    cfg.n.ok_or_else(|| Error::InvalidArgument("n is required".into()))
}

/// One recovery trial with a random secret: whether it came back exact, and
/// the queries spent.
fn simulate_trial(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<(f64, u64)> {
    let rc = cfg.recovery();
    let hit = |b: bool| if b { 1.0 } else { 0.0 };
    match cfg.algorithm {
        Algorithm::Staged | Algorithm::General | Algorithm::Greedy => {
            let n = match cfg.algorithm {
                Algorithm::Staged => BigUint::one() << exponent(cfg)?,
                Algorithm::Greedy => BigUint::from(cfg.radix).pow(exponent(cfg)?),
                _ => parse_modulus(cfg)?,
            };
            let s = rng.gen_biguint_below(&n);
            let o = make_reflection_oracle(&GroupCtx::new(n)?, &s)?;
            let got = match cfg.algorithm {
                Algorithm::Staged => recover_slope_power2(&o, exponent(cfg)?, &rc, rng).map(|r| r.secret[0].clone()),
                Algorithm::Greedy => recover_slope_radix(&o, cfg.radix, exponent(cfg)?, cfg.budget, rng),
                _ => recover_slope_general(&o, &rc, rng).map(|r| r.secret[0].clone()),
            };
            Ok((hit(got.as_ref().ok() == Some(&s)), o.queries()))
        }
        Algorithm::Substring => {
            let n = parse_modulus(cfg)?;
            let s = rng.gen_biguint_below(&n);
            let inst = SubstringInstance::random(n, s.clone(), rng)?;
            let got = solve_substring(&inst, usize::MAX, &rc, rng);
            let q = got.as_ref().map(|r| r.queries).unwrap_or(0);
            Ok((hit(got.ok().map(|r| r.shift) == Some(s)), q))
        }
        Algorithm::Abelian => {
            let group = AbelianGroupSpec::new(
                cfg.orders.iter().map(|&x| BigUint::from(x)).collect(),
                cfg.free_bits.clone(),
            )?;
            let s: Vec<BigInt> = group
                .effective_orders()
                .iter()
                .enumerate()
                .map(|(j, n)| match group.free_bits.get(j) {
                    // free coordinates: |s_j| < 2^bits
                    Some(&bits) => {
                        let bound = BigUint::one() << bits;
                        BigInt::from(rng.gen_biguint_below(&(&bound << 1u32))) - BigInt::from(bound)
                    }
                    None => BigInt::from(rng.gen_biguint_below(n)),
                })
                .collect();
            let p = ShiftPair::random(group, s.clone(), rng)?;
            let got = solve_abelian_shift(&p, cfg.budget, &rc, rng);
            let q = got.as_ref().map(|r| r.queries).unwrap_or(0);
            Ok((hit(got.ok().map(|r| r.shift) == Some(s)), q))
        }
    }
}

/// Recovery trials with random secrets. The row's statistic is the
/// fraction recovered exactly.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let start = Instant::now();
    let stats = (0..cfg.trials)
        .into_par_iter()
        .map(|i| simulate_trial(cfg, &mut trial_rng(cfg.seed, 0, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let secs = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let budget = match cfg.algorithm {
        Algorithm::Greedy | Algorithm::Abelian => cfg.budget as u64,
        _ => 0,
    };
    Ok(vec![summarize(budget, &stats, secs)])
}

// ---------------------------------------------------------------------------
// Self-checks of the phase backend against the dense verifier.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, passed: bool, observed: String, expected: String) {
        self.checks.push(CheckResult { name: name.into(), passed, observed, expected });
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: observed {}, expected {}", c.name, c.observed, c.expected)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyConfig {
    pub nmax: u64,
    pub samples: usize,
    pub seed: u64,
    pub faults: Faults,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { nmax: 32, samples: 100_000, seed: 0, faults: Faults::default() }
    }
}

const TV_LIMIT: f64 = 0.02;

fn total_variation(counts: &[u64], law: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    0.5 * counts.iter().zip(law).map(|(&c, p)| (c as f64 / total as f64 - p).abs()).sum::<f64>()
}

fn backend(n: u64, s: u64, seed: u64, faults: Faults) -> Result<PhaseBackend> {
    let o = make_reflection_oracle(&GroupCtx::new(n)?, &BigUint::from(s))?;
    Ok(PhaseBackend::from_seed(o, seed).with_faults(faults))
}

fn k64(q: &crate::PhaseQubit) -> usize {
    q.k().to_usize().expect("small label")
}

/// Exact law of `(k, +/-)` after one sample and an `X`-basis measurement,
/// from the dense Fourier sampling of every coset state. Index `2k + [minus]`.
fn label_pm_law(n: u64, s: u64) -> Result<Vec<f64>> {
    let plus = verifier::PureState::new(vec![num_complex::Complex64::new(1.0, 0.0); 2])?;
    let mut law = vec![0.0; 2 * n as usize];
    for a in 0..n {
        for (k, (p, res)) in verifier::qft_measure_law(n, s, a)?.into_iter().enumerate() {
            let pp = plus.fidelity(&res)?;
            law[2 * k] += p * pp / n as f64;
            law[2 * k + 1] += p * (1.0 - pp) / n as f64;
        }
    }
    Ok(law)
}

/// Exact law of `(k', outcome)` for: sample two qubits, combine, measure
/// the result against `(|0> + i|1>)/sqrt 2`. Uses the dense residuals.
fn residual_law(n: u64, s: u64) -> Result<Vec<f64>> {
    let basis = verifier::PureState::new(vec![
        num_complex::Complex64::new(1.0, 0.0),
        num_complex::Complex64::new(0.0, 1.0),
    ])?;
    let mut law = vec![0.0; 2 * n as usize];
    let w = 1.0 / (n * n) as f64;
    for k in 0..n {
        for l in 0..n {
            let [(p0, r0), (p1, r1)] = verifier::extract_law(k, l, s, n);
            for (p, r, kk) in [(p0, r0, (k + l) % n), (p1, r1, (k + n - l) % n)] {
                let f = basis.fidelity(&r)?;
                law[2 * kk as usize] += w * p * f;
                law[2 * kk as usize + 1] += w * p * (1.0 - f);
            }
        }
    }
    Ok(law)
}

fn binomial_z(hits: u64, total: u64, p: f64) -> f64 {
    let sd = (p * (1.0 - p) / total as f64).sqrt();
    let f = hits as f64 / total as f64;
    if sd == 0.0 {
        if (f - p).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (f - p) / sd
    }
}

fn two_proportion_z(h1: u64, h2: u64, total: u64) -> f64 {
    let (p1, p2) = (h1 as f64 / total as f64, h2 as f64 / total as f64);
    let p = (p1 + p2) / 2.0;
    let sd = (2.0 * p * (1.0 - p) / total as f64).sqrt();
    if sd == 0.0 {
        0.0
    } else {
        (p1 - p2) / sd
    }
}

fn all_pairs(nmax: u64) -> Vec<(u64, u64)> {
    (1..=nmax).flat_map(|n| (0..n).map(move |s| (n, s))).collect()
}

/// Label and `+/-` statistics against the dense law, every `N <= nmax`
/// and every `s`; returns the worst total variation.
fn check_label_pm(cfg: &VerifyConfig) -> Result<(f64, (u64, u64))> {
    let worst = all_pairs(cfg.nmax)
        .into_par_iter()
        .map(|(n, s)| -> Result<(f64, (u64, u64))> {
            let law = label_pm_law(n, s)?;
            let mut be = backend(n, s, trial_rng(cfg.seed, 1, n << 16 | s).gen(), cfg.faults)?;
            let mut counts = vec![0u64; 2 * n as usize];
            for _ in 0..cfg.samples {
                let q = be.sample_phase_qubit();
                let k = k64(&q);
                let minus = be.measure_pm(q)? == Pm::Minus;
                counts[2 * k + minus as usize] += 1;
            }
            Ok((total_variation(&counts, &law), (n, s)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(worst.into_iter().fold((0.0, (0, 0)), |a, b| if b.0 > a.0 { b } else { a }))
}

fn check_residuals(cfg: &VerifyConfig) -> Result<(f64, (u64, u64))> {
    let worst = all_pairs(cfg.nmax)
        .into_par_iter()
        .map(|(n, s)| -> Result<(f64, (u64, u64))> {
            let law = residual_law(n, s)?;
            let mut be = backend(n, s, trial_rng(cfg.seed, 2, n << 16 | s).gen(), cfg.faults)?;
            let mut counts = vec![0u64; 2 * n as usize];
            for _ in 0..cfg.samples {
                let (a, b) = (be.sample_phase_qubit(), be.sample_phase_qubit());
                let (q, _) = be.combine(a, b)?;
                let k = k64(&q);
                let minus = !be.measure_basis(q, PI / 2.0)?;
                counts[2 * k + minus as usize] += 1;
            }
            Ok((total_variation(&counts, &law), (n, s)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(worst.into_iter().fold((0.0, (0, 0)), |a, b| if b.0 > a.0 { b } else { a }))
}

/// Sum-branch frequency for two slopes; returns the two counts and the
/// exact sum probability from the dense extraction.
fn check_coin(cfg: &VerifyConfig, n: u64) -> Result<(u64, u64, f64)> {
    let slopes = [1 % n, (n / 2 + 1) % n];
    let mut hits = [0u64; 2];
    let mut expected = 0.0;
    for (i, &s) in slopes.iter().enumerate() {
        let mut be = backend(n, s, trial_rng(cfg.seed, 3, i as u64).gen(), cfg.faults)?;
        for _ in 0..cfg.samples {
            let (a, b) = (be.sample_phase_qubit(), be.sample_phase_qubit());
            if i == 0 && expected == 0.0 {
                expected = verifier::extract_law(k64(&a) as u64, k64(&b) as u64, s, n)[0].0;
            }
            if be.combine(a, b)?.1 == Branch::Sum {
                hits[i] += 1;
            }
        }
    }
    Ok((hits[0], hits[1], expected))
}

/// `(N, k, s, t)` points for the cosine-observation check.
pub fn cosine_grid(nmax: u64) -> Vec<(u64, u64, u64, u64)> {
    let mut out = Vec::new();
    for n in [5u64, 8, 12, 32] {
        if n > nmax {
            continue;
        }
        for k in [1, n / 4 + 1, n - 1] {
            for (s, t) in [(n / 3, 0), (n - 1, n / 2)] {
                out.push((n, k, s, t));
            }
        }
    }
    out
}

/// Draw qubits until one carries label `k`.
fn sample_label(be: &mut PhaseBackend, k: u64) -> crate::PhaseQubit {
    loop {
        let q = be.sample_phase_qubit();
        if q.k() == &BigUint::from(k) {
            return q;
        }
    }
}

pub const COSINE_SAMPLES: usize = 10_000;

/// Largest `|z|` of cosine-observation frequencies against
/// `cos^2(pi k (s - t) / N)` over the grid.
fn check_cosine(cfg: &VerifyConfig) -> Result<(f64, (u64, u64, u64, u64))> {
    let mut worst = (0.0, (0, 0, 0, 0));
    for (i, &(n, k, s, t)) in cosine_grid(cfg.nmax).iter().enumerate() {
        let mut be = backend(n, s, trial_rng(cfg.seed, 4, i as u64).gen(), cfg.faults)?;
        let tt = [BigUint::from(t)];
        let mut hits = 0;
        for _ in 0..COSINE_SAMPLES {
            let q = sample_label(&mut be, k);
            hits += be.cosine_observe(q, &tt)? as u64;
        }
        let d = (k * ((s + n - t) % n)) % n;
        let p = (PI * d as f64 / n as f64).cos().powi(2);
        let z = binomial_z(hits, COSINE_SAMPLES as u64, p).abs();
        if z > worst.0 {
            worst = (z, (n, k, s, t));
        }
    }
    Ok(worst)
}

/// Cosine observations with and without negating the label first.
fn check_negation(cfg: &VerifyConfig) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (i, &(n, k, s, t)) in cosine_grid(cfg.nmax).iter().enumerate().filter(|(i, _)| i % 3 == 0) {
        let mut be = backend(n, s, trial_rng(cfg.seed, 5, i as u64).gen(), cfg.faults)?;
        let tt = [BigUint::from(t)];
        let (mut h1, mut h2) = (0, 0);
        for _ in 0..COSINE_SAMPLES {
            let q = sample_label(&mut be, k);
            h1 += be.cosine_observe(q, &tt)? as u64;
            let q = sample_label(&mut be, k);
            let q = be.negate_label(q)?;
            h2 += be.cosine_observe(q, &tt)? as u64;
        }
        worst = worst.max(two_proportion_z(h1, h2, COSINE_SAMPLES as u64).abs());
    }
    Ok(worst)
}

/// Measurements on classical qubits (trivial hidden subgroup) must be fair.
fn check_classical(cfg: &VerifyConfig) -> Result<f64> {
    let n = cfg.nmax.max(2);
    let o = make_injective_oracle(&GroupCtx::new(n)?);
    let mut be = PhaseBackend::from_seed(o, trial_rng(cfg.seed, 6, 0).gen()).with_faults(cfg.faults);
    let (mut pm, mut cos) = (0, 0);
    let t = [BigUint::from(n / 3)];
    for _ in 0..COSINE_SAMPLES {
        let q = be.sample_phase_qubit();
        pm += (be.measure_pm(q)? == Pm::Plus) as u64;
        let q = be.sample_phase_qubit();
        cos += be.cosine_observe(q, &t)? as u64;
    }
    let z1 = binomial_z(pm, COSINE_SAMPLES as u64, 0.5).abs();
    let z2 = binomial_z(cos, COSINE_SAMPLES as u64, 0.5).abs();
    Ok(z1.max(z2))
}

/// Dense-state invariants: trace, Hermiticity, positivity (1e-10) and
/// invariance of the coset mixture under left multiplication by `y x^s` (1e-12).
fn check_density(nmax: u64) -> Result<(f64, f64)> {
    let mut inv_err: f64 = 0.0;
    let mut sym_err: f64 = 0.0;
    for (n, s) in all_pairs(nmax) {
        let rho = verifier::rho_coset_mixture(n, s)?;
        if rho.check_invariants(1e-10).is_err() {
            inv_err = f64::INFINITY;
        }
        let tr = rho.trace();
        inv_err = inv_err.max((tr.re - 1.0).abs()).max(rho.hermiticity_error());
        let moved = rho.permuted(&verifier::left_mult_permutation(n, true, s));
        let diff = (&moved.m - &rho.m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        sym_err = sym_err.max(diff);
    }
    Ok((inv_err, sym_err))
}

/// Residual fidelity of the dense extraction, exhaustive at `N = 8`.
fn check_extract_fidelity(seed: u64) -> f64 {
    let n = 8;
    let mut rng = trial_rng(seed, 7, 0);
    let mut worst: f64 = 1.0;
    for k in 0..n {
        for l in 0..n {
            for s in 0..n {
                let (diff, res) = verifier::extract_sim(k, l, s, n, &mut rng);
                let label = if diff { (k + n - l) % n } else { (k + l) % n };
                let f = verifier::phase_qubit_state(label, s, n).fidelity(&res).unwrap_or(0.0);
                worst = worst.min(f);
            }
        }
    }
    worst
}

/// Every statistical check of the phase backend against the dense
/// verifier. A build with injected faults should fail some of them.
pub fn verify_suite(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.nmax == 0 || cfg.nmax as usize > verifier::DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!("nmax must be in 1..={}", verifier::DENSE_LIMIT)));
    }
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let mut rep = VerifyReport::default();

    let (tv, at) = check_label_pm(cfg)?;
    rep.push("label_pm_law", tv <= TV_LIMIT, format!("max TV {tv:.4} at (N, s) = {at:?}"), format!("<= {TV_LIMIT}"));

    let (h0, h1, p) = check_coin(cfg, cfg.nmax.max(2))?;
    let total = cfg.samples as u64;
    let (z0, z1) = (binomial_z(h0, total, p), binomial_z(h1, total, p));
    let zs = two_proportion_z(h0, h1, total);
    let ok = z0.abs() <= 3.0 && z1.abs() <= 3.0 && zs.abs() <= 3.0;
    rep.push(
        "combine_coin",
        ok,
        format!(
            "sum frequency {:.4} / {:.4} (z {z0:.2}, {z1:.2}; between slopes {zs:.2})",
            h0 as f64 / total as f64,
            h1 as f64 / total as f64
        ),
        format!("{p:.4} within 3 sigma, independent of s"),
    );

    let (tv, at) = check_residuals(cfg)?;
    rep.push(
        "residual_fidelity",
        tv <= TV_LIMIT,
        format!("max TV {tv:.4} at (N, s) = {at:?}"),
        format!("<= {TV_LIMIT} against dense extraction residuals"),
    );

    let f = check_extract_fidelity(cfg.seed);
    rep.push("extract_residuals_n8", f >= 1.0 - 1e-10, format!("min fidelity {f:.12}"), ">= 1 - 1e-10".into());

    let (z, at) = check_cosine(cfg)?;
    rep.push("cosine_observation", z <= 3.0, format!("max |z| {z:.2} at (N, k, s, t) = {at:?}"), "<= 3".into());

    let z = check_negation(cfg)?;
    rep.push("negation_symmetry", z <= 3.0, format!("max |z| {z:.2}"), "<= 3".into());

    let z = check_classical(cfg)?;
    rep.push("classical_unbiased", z <= 3.0, format!("max |z| {z:.2}"), "<= 3".into());

    let (inv, sym) = check_density(cfg.nmax.min(32))?;
    rep.push("density_invariants", inv <= 1e-10, format!("max error {inv:.2e}"), "<= 1e-10".into());
    rep.push("coset_mixture_symmetry", sym <= 1e-12, format!("max error {sym:.2e}"), "<= 1e-12".into());

    Ok(rep)
}

pub fn faults_for(combine_bias: Option<f64>, sign_flip: bool) -> Faults {
    Faults { combine_sum_probability: combine_bias.unwrap_or(0.5), phase_sign_flip: sign_flip }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(budget: u64, mean: f64) -> ResultRow {
        ResultRow { budget, trials: 100, mean, stddev: 0.0, queries: 0, seconds: 0.0 }
    }

    #[test]
    fn fit_on_exact_law() {
        // mean bits chosen so that sqrt(2 mean log_3 2) = log_3 Q exactly
        let rows: Vec<ResultRow> = (3..=8)
            .map(|e| {
                let x = e as f64;
                row(3u64.pow(e), x * x * 3f64.ln() / (2.0 * 2f64.ln()))
            })
            .collect();
        let fit = fit_scaling(&rows).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-6, "{fit:?}");
        assert!(fit.intercept.abs() < 1e-6);
    }

    #[test]
    fn fit_on_published_rows() {
        let rows = [
            row(243, 27.14),
            row(729, 36.44),
            row(2187, 47.51),
            row(6561, 59.76),
        ];
        let fit = fit_scaling(&rows).unwrap();
        assert!((0.8..=1.2).contains(&fit.slope), "{fit:?}");
        assert!(fit.slope_ci.0 <= fit.slope && fit.slope <= fit.slope_ci.1);
    }

    #[test]
    fn degenerate_fits() {
        assert!(matches!(fit_scaling(&[row(3, 1.0), row(9, 2.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_scaling(&[row(3, 1.0), row(9, 1.0), row(27, 1.0)]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(3, 3.5), row(9, 6.25)];
        let mut buf = Vec::new();
        write_rows(&rows, Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("budget,trials,mean,stddev,queries,seconds\n"));
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
        let mut buf = Vec::new();
        write_rows(&rows, Format::Json, &mut buf).unwrap();
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn table_rows_are_deterministic_and_counted() {
        let a = run_table1(&[2, 9, 27], 10, 2, 96, 7, false).unwrap();
        let b = run_table1(&[2, 9, 27], 10, 2, 96, 7, false).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert_eq!(r.queries, r.budget * 10);
            assert!(r.mean.is_finite() && r.stddev >= 0.0);
            assert!((0.0..=96.0).contains(&r.mean));
        }
    }

    #[test]
    fn trial_streams_are_independent() {
        let mut a = trial_rng(1, 0, 0);
        let mut b = trial_rng(1, 0, 1);
        let mut c = trial_rng(1, 1, 0);
        let (x, y, z): (u64, u64, u64) = (a.gen(), b.gen(), c.gen());
        assert!(x != y && x != z && y != z);
        assert_eq!(x, trial_rng(1, 0, 0).gen::<u64>());
    }

    #[test]
    fn config_json_defaults() {
        let c = ExperimentConfig::from_json(r#"{"mode": "table1", "trials": 5, "N": "360"}"#).unwrap();
        assert_eq!(c.mode, Mode::Table1);
        assert_eq!(c.trials, 5);
        assert_eq!(c.modulus.as_deref(), Some("360"));
        assert_eq!(c.radix, 2);
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let bad = ExperimentConfig { trials: 0, ..ExperimentConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn exact_laws_are_distributions() {
        for (n, s) in [(1u64, 0u64), (6, 5), (8, 3)] {
            for law in [label_pm_law(n, s).unwrap(), residual_law(n, s).unwrap()] {
                assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(law.iter().all(|&p| p >= -1e-15));
            }
        }
    }

    #[test]
    fn small_suite_passes_and_catches_faults() {
        let cfg = VerifyConfig { nmax: 8, samples: 20_000, seed: 3, faults: Faults::default() };
        let rep = verify_suite(&cfg).unwrap();
        assert!(rep.passed(), "{rep}");
        let biased = verify_suite(&VerifyConfig { faults: faults_for(Some(0.6), false), ..cfg }).unwrap();
        assert!(!biased.get("combine_coin").unwrap().passed);
        let flipped = verify_suite(&VerifyConfig { faults: faults_for(None, true), ..cfg }).unwrap();
        assert!(!flipped.get("residual_fidelity").unwrap().passed);
    }

    #[test]
    fn simulate_rows() {
        let cfg = ExperimentConfig { n: Some(6), trials: 4, seed: 2, ..ExperimentConfig::default() };
        let rows = run_simulate(&cfg).unwrap();
        assert_eq!(rows[0].mean, 1.0);
        assert!(rows[0].queries > 0);
        assert_eq!(rows, run_simulate(&cfg).unwrap());
    }
}
