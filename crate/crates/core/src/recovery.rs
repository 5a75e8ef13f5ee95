//! Full-secret recovery built on the sieves.
//!
//! Every returned slope or shift has been checked against the oracle (or
//! the classical functions), so results are Las Vegas: a wrong answer is
//! retried, never returned.

use std::collections::HashSet;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::greedy::{greedy_sieve, AbelianObjective, GreedyConfig};
use crate::group::{crt_split, signed_rep, Element};
use crate::oracle::{shift_to_dihedral, splice_substring, HidingOracle, ShiftPair, SubstringInstance};
use crate::phase::{PhaseBackend, PhaseQubit};
use crate::staged::{
    interval_m, list_size_schedule, observe_pair, quadrature_angle, reference_angle, run_staged_parity,
    suffix_sieve, interval_sieve, SieveStats,
};
use crate::util::{ratio_to_f64, ser_biguints};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryConfig {
    /// Full restarts before giving up on a hidden reflection.
    pub retry_cap: usize,
    /// Cosine observations per reference point in each refinement step.
    pub copies_per_reference: usize,
    /// Sieve runs allowed per refinement step.
    pub max_sieve_runs: usize,
    /// Random positions tried when verifying a candidate.
    pub verify_tries: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig { retry_cap: 8, copies_per_reference: 32, max_sieve_runs: 64, verify_tries: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryReport {
    #[serde(serialize_with = "ser_biguints")]
    pub secret: Vec<BigUint>,
    /// Oracle queries spent, including verification.
    pub queries: u64,
    pub attempts: usize,
    pub levels: Vec<SieveStats>,
    /// Staged recursion only: `(n, queries, sieve runs)` for each parity
    /// level of the successful attempt.
    pub parity_calls: Vec<(u32, u64, usize)>,
    pub verified: bool,
}

impl RecoveryReport {
    pub fn slope(&self) -> &BigUint {
        &self.secret[0]
    }
}

/// Bit-by-bit recovery on `D_(2^n)`: the staged sieve gives `s mod 2`, the
/// oracle is restricted to the index-2 subgroup containing the hidden
/// reflection, and the loop repeats on `D_(2^(n-1))`.
pub fn recover_slope_power2<R: Rng + ?Sized>(
    o: &HidingOracle,
    n: u32,
    cfg: &RecoveryConfig,
    rng: &mut R,
) -> Result<RecoveryReport> {
    let modulus = o.modulus()?.clone();
    if modulus != BigUint::one() << n {
        return Err(Error::InvalidArgument(format!("N = {modulus} is not 2^{n}")));
    }
    let start = o.queries();
    for attempt in 1..=cfg.retry_cap.max(1) {
        let mut view = o.clone();
        let mut s = BigUint::zero();
        let mut levels = Vec::new();
        let mut parity_calls = Vec::new();
        let mut complete = true;
        for level in 0..n {
            let mut be = PhaseBackend::new(view.clone(), rng);
            let mut parity = None;
            let before = o.queries();
            let mut runs = 0;
            for _ in 0..cfg.retry_cap.max(1) {
                runs += 1;
                match run_staged_parity(&mut be, n - level) {
                    Ok((p, st)) => {
                        levels.push(st);
                        parity = Some(p);
                        break;
                    }
                    Err(Error::SieveExhausted(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            parity_calls.push((n - level, o.queries() - before, runs));
            let Some(p) = parity else {
                complete = false;
                break;
            };
            if p {
                s.set_bit(u64::from(level), true);
            }
            view = view.restrict_parity(p)?;
        }
        if complete && o.verify_slope(&[s.clone()], cfg.verify_tries, rng)? {
            return Ok(RecoveryReport {
                secret: vec![s],
                queries: o.queries() - start,
                attempts: attempt,
                levels,
                parity_calls,
                verified: true,
            });
        }
    }
    Err(Error::NoHiddenReflection { attempts: cfg.retry_cap.max(1) })
}

/// Where the refinement loop gets raw qubits from.
pub trait QubitSource {
    /// Fresh qubits whose labels vanish off the refined coordinate. `size`
    /// is a hint for how many the caller would like.
    fn produce(&mut self, be: &mut PhaseBackend, size: usize) -> Result<Vec<PhaseQubit>>;
}

/// Plain samples (cyclic groups).
pub struct DirectSource;

impl QubitSource for DirectSource {
    fn produce(&mut self, be: &mut PhaseBackend, size: usize) -> Result<Vec<PhaseQubit>> {
        Ok((0..size).map(|_| be.sample_phase_qubit()).collect())
    }
}

/// Greedy sieve that clears every coordinate but one.
pub struct GreedySource {
    pub objective: AbelianObjective,
    pub budget: usize,
}

impl QubitSource for GreedySource {
    fn produce(&mut self, be: &mut PhaseBackend, size: usize) -> Result<Vec<PhaseQubit>> {
        let obj = &self.objective;
        let pred = |k: &[BigUint]| obj.is_target(k);
        let mut out = Vec::new();
        // a run yields roughly budget/4 targets; allow twice what the request needs
        let runs = 8 + 8 * size / self.budget.max(1);
        for _ in 0..runs {
            match greedy_sieve(be, obj, Some(&pred), GreedyConfig::new(self.budget)) {
                Ok(res) => out.extend(res.targets),
                Err(Error::SieveExhausted(_)) => {}
                Err(e) => return Err(e),
            }
            if out.len() >= size {
                break;
            }
        }
        Ok(out)
    }
}

/// Unit `u` with `u = 1 (mod 2^a)` and `u = 2^(j - j') (mod M)`.
fn refinement_unit(n: &BigUint, j: u32, jp: u32) -> BigUint {
    let crt = crt_split(n);
    if crt.odd.is_one() {
        return BigUint::one();
    }
    let odd_part = (BigUint::one() << (j - jp)) % &crt.odd;
    let two_part = if crt.two_exp == 0 { BigUint::zero() } else { BigUint::one() };
    crt.join(&two_part, &odd_part)
}

fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y - two_pi
    } else {
        y
    }
}

fn add_signed(c: &BigUint, d: i128, n: &BigUint) -> BigUint {
    let x = (BigInt::from(c.clone()) + BigInt::from(d)) % BigInt::from(n.clone());
    let x = if x < BigInt::zero() { x + BigInt::from(n.clone()) } else { x };
    x.to_biguint().expect("reduced")
}

/// Learn coordinate `coord` of the hidden slope to within 2 by repeated
/// cosine observations on copies of `psi_(2^j)`, `j = 0, 1, ...`.
///
/// Step `j` twists the oracle by the unit `u_j` (identity on the 2-part,
/// `2^(j - j')` on the odd part, `j' = min(a, j)`), clears the low `j'`
/// bits of the labels with the staged sieve, and finishes with the interval
/// sieve on `k / 2^j'`; the surviving label `2^j'` in the twisted frame is
/// `2^j` in the original one. Observations at the current centre `c` and at
/// `c + N / 2^(j+2)` then give the angle of `2^j (s - c)`, which shrinks the
/// search radius to `N / 2^(j+3)`.
///
/// Returns the five residues around the final centre.
pub fn refine_coordinate<R: Rng + ?Sized>(
    o: &HidingOracle,
    coord: usize,
    src: &mut dyn QubitSource,
    cfg: &RecoveryConfig,
    rng: &mut R,
    levels: &mut Vec<SieveStats>,
) -> Result<Vec<BigUint>> {
    let n = o.orders().get(coord).ok_or_else(|| Error::InvalidArgument("coordinate".into()))?.clone();
    if n < BigUint::from(2u32) {
        return Ok(vec![BigUint::zero()]);
    }
    let a = n.trailing_zeros().unwrap_or(0) as u32;
    let rank = o.rank();
    let mut centre = BigUint::zero();
    let mut j = 0u32;
    loop {
        let jp = a.min(j);
        let u = refinement_unit(&n, j, jp);
        let view = o.with_unit(coord, &u)?;
        let mut be = PhaseBackend::new(view, rng);
        let g = BigUint::one() << jp;
        let np = &n / &g;
        if np < BigUint::from(2u32) {
            break;
        }
        let m = interval_m(&np);
        let suffix_stages = jp.div_ceil(m);
        let size = (list_size_schedule(m)?.initial_size as usize) << (2 * suffix_stages);
        let want = 2 * cfg.copies_per_reference;
        let mut copies = Vec::new();
        let mut stats = SieveStats::default();
        let before = be.oracle().queries();
        for _ in 0..cfg.max_sieve_runs {
            let list = src.produce(&mut be, size)?;
            let list = suffix_sieve(&mut be, list, coord, u64::from(jp), u64::from(m), &mut stats)?;
            let ones = interval_sieve(&mut be, list, coord, &g, &n, m, &mut stats)?;
            copies.extend(ones);
            if copies.len() >= want {
                break;
            }
        }
        stats.queries_used = be.oracle().queries() - before;
        stats.outputs = copies.len();
        levels.push(stats);
        if copies.len() < 2 {
            return Err(Error::SieveExhausted(format!("no copies of psi_(2^{j})")));
        }
        copies.truncate(want);
        let label = (BigUint::one() << j) % &n;
        let delta = ((&n >> (j + 2)).max(BigUint::one())) % &n;
        let t0 = centre.clone();
        let t1 = (&centre + &delta) % &n;
        let frame = |t: &BigUint| {
            let mut v = vec![BigUint::zero(); rank];
            v[coord] = (t * &u) % &n;
            v
        };
        let (c0, c1) = observe_pair(&mut be, copies, &frame(&t0), &frame(&t1))?;
        let phi0 = reference_angle(&label, &t0, &n);
        let phi1 = reference_angle(&label, &t1, &n);
        let theta = quadrature_angle(c0, phi0, c1, phi1);
        let d = wrap_angle(theta - phi0);
        let span = ratio_to_f64(&n, &(BigUint::one() << j));
        let offset = (d / (2.0 * std::f64::consts::PI) * span).round() as i128;
        centre = add_signed(&centre, offset, &n);
        // radius now N / 2^(j+3)
        if span / 8.0 <= 2.0 {
            break;
        }
        j += 1;
    }
    let mut out = Vec::new();
    for d in -2i128..=2 {
        let c = add_signed(&centre, d, &n);
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

fn power_of_two_exponent(n: &BigUint) -> Option<u32> {
    let tz = n.trailing_zeros()?;
    (n.bits() == tz + 1).then_some(tz as u32)
}

/// Slope recovery on `D_N` for any `N`. Powers of two use the staged
/// bit-by-bit recursion; everything else uses [`refine_coordinate`].
pub fn recover_slope_general<R: Rng + ?Sized>(
    o: &HidingOracle,
    cfg: &RecoveryConfig,
    rng: &mut R,
) -> Result<RecoveryReport> {
    let n = o.modulus()?.clone();
    if let Some(e) = power_of_two_exponent(&n) {
        return recover_slope_power2(o, e, cfg, rng);
    }
    recover_slope_interval(o, cfg, rng)
}

/// [`recover_slope_general`] without the power-of-two shortcut.
pub fn recover_slope_interval<R: Rng + ?Sized>(
    o: &HidingOracle,
    cfg: &RecoveryConfig,
    rng: &mut R,
) -> Result<RecoveryReport> {
    let n = o.modulus()?.clone();
    let start = o.queries();
    if n.is_one() {
        let zero = vec![BigUint::zero()];
        if o.verify_slope(&zero, cfg.verify_tries, rng)? {
            return Ok(RecoveryReport { secret: zero, queries: o.queries() - start, attempts: 1, levels: vec![], parity_calls: vec![], verified: true });
        }
        return Err(Error::NoHiddenReflection { attempts: 1 });
    }
    for attempt in 1..=cfg.retry_cap.max(1) {
        let mut levels = Vec::new();
        let cands = match refine_coordinate(o, 0, &mut DirectSource, cfg, rng, &mut levels) {
            Ok(c) => c,
            Err(Error::SieveExhausted(_)) => continue,
            Err(e) => return Err(e),
        };
        for c in cands {
            if o.verify_slope(&[c.clone()], cfg.verify_tries, rng)? {
                return Ok(RecoveryReport {
                    secret: vec![c],
                    queries: o.queries() - start,
                    attempts: attempt,
                    levels,
                    parity_calls: Vec::new(),
                    verified: true,
                });
            }
        }
    }
    Err(Error::NoHiddenReflection { attempts: cfg.retry_cap.max(1) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubstringReport {
    #[serde(serialize_with = "crate::util::ser_biguint")]
    pub shift: BigUint,
    /// Guesses `t` tried, in order.
    pub guesses: usize,
    /// Queries to the spliced oracles plus classical checks.
    pub queries: u64,
}

/// Guesses `t` for the substring shift: `0`, then the odd multiples of
/// `N/2`, `N/4`, ... (each level shuffled), without repeats.
pub fn guess_grid<R: Rng + ?Sized>(n: &BigUint, rng: &mut R) -> Vec<BigUint> {
    let mut seen = HashSet::new();
    let mut out = vec![BigUint::zero()];
    seen.insert(BigUint::zero());
    let levels = n.bits();
    for level in 1..=levels {
        let parts = BigUint::one() << level;
        let mut this: Vec<BigUint> = Vec::new();
        let count = parts.to_u64().unwrap_or(u64::MAX).min(1 << 20);
        for i in (1..count).step_by(2) {
            let t = (n * i) / &parts;
            if seen.insert(t.clone()) {
                this.push(t);
            }
        }
        this.shuffle(rng);
        out.extend(this);
        if &parts >= n {
            break;
        }
    }
    out
}

/// Hidden substring: find `s` with `f(x) = g(x + s)` by splicing `f` and a
/// window of `g` at guessed offsets and solving the (approximately hidden)
/// reflection problem each splice gives.
pub fn solve_substring<R: Rng + ?Sized>(
    inst: &SubstringInstance,
    max_guesses: usize,
    cfg: &RecoveryConfig,
    rng: &mut R,
) -> Result<SubstringReport> {
    let n = inst.n().clone();
    let mut queries = 0;
    for (i, t) in guess_grid(&n, rng).into_iter().take(max_guesses).enumerate() {
        let o = splice_substring(inst, &t)?;
        let res = recover_slope_general(&o, cfg, rng);
        queries += o.queries();
        if let Ok(rep) = res {
            let s = (&t + rep.slope()) % &n;
            let before = inst.queries();
            let ok = inst.check_shift(&s, 8, rng);
            queries += inst.queries() - before;
            if ok {
                return Ok(SubstringReport { shift: s, guesses: i + 1, queries });
            }
        }
    }
    Err(Error::GuessBudgetExhausted(max_guesses))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbelianReport {
    #[serde(serialize_with = "ser_bigints")]
    pub shift: Vec<BigInt>,
    pub queries: u64,
    pub attempts: usize,
}

fn ser_bigints<S: serde::Serializer>(xs: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|x| x.to_string()))
}

fn random_positions<R: Rng + ?Sized>(orders: &[BigUint], count: usize, rng: &mut R) -> Vec<Vec<BigInt>> {
    (0..count)
        .map(|_| orders.iter().map(|n| BigInt::from(rng.gen_biguint_below(n))).collect())
        .collect()
}

/// Hidden shift on a finitely generated abelian group. Free summands are
/// truncated; each coordinate is found separately (a greedy sieve clears the
/// other coordinates, the refinement loop pins this one down) and the
/// combined candidates are checked against `f` and `g` directly.
pub fn solve_abelian_shift<R: Rng + ?Sized>(
    p: &ShiftPair,
    greedy_budget: usize,
    cfg: &RecoveryConfig,
    rng: &mut R,
) -> Result<AbelianReport> {
    let group = p.group().clone();
    let orders = group.effective_orders();
    let free = group.free_bits.len();
    let o = shift_to_dihedral(p);
    let to_signed = |v: &[BigUint]| -> Vec<BigInt> {
        v.iter()
            .zip(&orders)
            .enumerate()
            .map(|(j, (x, n))| if j < free { signed_rep(x, n) } else { BigInt::from(x.clone()) })
            .collect()
    };
    if orders.len() == 1 {
        let rep = recover_slope_general(&o, cfg, rng)?;
        let s = to_signed(&rep.secret);
        if p.check_shift(&s, &random_positions(&orders, 4, rng)) {
            return Ok(AbelianReport { shift: s, queries: o.queries(), attempts: rep.attempts });
        }
        return Err(Error::NoHiddenReflection { attempts: rep.attempts });
    }
    for attempt in 1..=cfg.retry_cap.max(1) {
        let mut per_coord = Vec::with_capacity(orders.len());
        let mut failed = false;
        for c in 0..orders.len() {
            let mut src = GreedySource {
                objective: AbelianObjective::with_last(orders.clone(), c)?,
                budget: greedy_budget,
            };
            let mut levels = Vec::new();
            match refine_coordinate(&o, c, &mut src, cfg, rng, &mut levels) {
                Ok(cands) => per_coord.push(cands),
                Err(Error::SieveExhausted(_)) => {
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            continue;
        }
        let mut combo = vec![0usize; orders.len()];
        loop {
            let cand: Vec<BigUint> = combo.iter().zip(&per_coord).map(|(&i, cs)| cs[i].clone()).collect();
            let s = to_signed(&cand);
            if p.check_shift(&s, &random_positions(&orders, 4, rng)) {
                return Ok(AbelianReport { shift: s, queries: o.queries(), attempts: attempt });
            }
            // odometer over the candidate lists
            let mut pos = 0;
            while pos < combo.len() {
                combo[pos] += 1;
                if combo[pos] < per_coord[pos].len() {
                    break;
                }
                combo[pos] = 0;
                pos += 1;
            }
            if pos == combo.len() {
                break;
            }
        }
    }
    Err(Error::NoHiddenReflection { attempts: cfg.retry_cap.max(1) })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HiddenSubgroup {
    /// `H` meets the rotations in `<x^period>`.
    #[serde(serialize_with = "crate::util::ser_biguint")]
    pub period: BigUint,
    /// `H = <x^period, y x^slope>` when present, else `H = <x^period>`.
    pub slope: Option<String>,
}

fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// General hidden subgroup of `D_N`: find `H` meets `<x>` in `<x^d>` by
/// testing divisors of `N` classically, pass to `D_N / <x^d> = D_d`, and
/// look for a hidden reflection there. Desk-scale `N` only.
pub fn recover_hidden_subgroup<R: Rng + ?Sized>(
    o: &HidingOracle,
    cfg: &RecoveryConfig,
    rng: &mut R,
) -> Result<HiddenSubgroup> {
    let n = o.modulus()?.to_u64().ok_or_else(|| Error::Unsupported("N beyond trial division".into()))?;
    let id = o.evaluate_element(&Element::new(false, vec![BigUint::zero()]))?;
    let mut period = n;
    for d in divisors(n) {
        if d == n || o.evaluate_element(&Element::new(false, vec![BigUint::from(d)]))? == id {
            period = d;
            break;
        }
    }
    let pb = BigUint::from(period);
    let q = o.quotient(&pb)?;
    let slope = if period == 1 {
        let y = o.evaluate_element(&Element::new(true, vec![BigUint::zero()]))?;
        (y == id).then(|| "0".to_string())
    } else {
        match recover_slope_general(&q, cfg, rng) {
            Ok(rep) => Some(rep.slope().to_string()),
            Err(Error::NoHiddenReflection { .. }) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(HiddenSubgroup { period: pb, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{AbelianGroupSpec, GroupCtx};
    use crate::oracle::{make_injective_oracle, make_reflection_oracle, make_subgroup_oracle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn b(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn oracle(n: u64, s: u64) -> HidingOracle {
        make_reflection_oracle(&GroupCtx::new(n).unwrap(), &b(s)).unwrap()
    }

    #[test]
    fn power2_small_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = RecoveryConfig::default();
        for n in 0..=5u32 {
            for s in 0..1u64 << n {
                let rep = recover_slope_power2(&oracle(1 << n, s), n, &cfg, &mut rng).unwrap();
                assert_eq!(rep.slope(), &b(s));
                assert!(rep.verified);
            }
        }
    }

    #[test]
    fn power2_trivial_subgroup_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = make_injective_oracle(&GroupCtx::new(64u32).unwrap());
        let cfg = RecoveryConfig { retry_cap: 3, ..RecoveryConfig::default() };
        assert!(matches!(recover_slope_power2(&o, 6, &cfg, &mut rng), Err(Error::NoHiddenReflection { .. })));
    }

    #[test]
    fn units() {
        let n = b(360);
        for j in 0..9u32 {
            let jp = j.min(3);
            let u = refinement_unit(&n, j, jp);
            assert_eq!((&u << jp) % &n, (BigUint::one() << j) % &n, "j={j}");
            assert!(crate::group::mod_inverse(&u, &n).is_some());
        }
    }

    #[test]
    fn general_small_moduli() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = RecoveryConfig::default();
        for n in [3u64, 5, 6, 12, 45, 100, 360] {
            for _ in 0..5 {
                let s = rng.gen_range(0..n);
                let rep = recover_slope_interval(&oracle(n, s), &cfg, &mut rng).unwrap();
                assert_eq!(rep.slope(), &b(s), "N={n}");
            }
        }
    }

    #[test]
    fn interval_path_agrees_with_power2() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = RecoveryConfig::default();
        for s in [0u64, 1, 100, 255] {
            let o = oracle(256, s);
            let a = recover_slope_power2(&o, 8, &cfg, &mut rng).unwrap();
            let c = recover_slope_interval(&o, &cfg, &mut rng).unwrap();
            assert_eq!(a.slope(), c.slope());
        }
    }

    #[test]
    fn substring_n64() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = RecoveryConfig { retry_cap: 2, ..RecoveryConfig::default() };
        for s in [0u64, 13, 40, 63] {
            let inst = SubstringInstance::random(b(64), b(s), &mut rng).unwrap();
            let rep = solve_substring(&inst, 64, &cfg, &mut rng).unwrap();
            assert_eq!(rep.shift, b(s));
            if s == 0 {
                assert_eq!(rep.guesses, 1);
            }
        }
    }

    #[test]
    fn grid_covers_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in [1u64, 7, 64, 100] {
            let g = guess_grid(&b(n), &mut rng);
            let set: HashSet<_> = g.iter().cloned().collect();
            assert_eq!(set.len(), g.len());
            assert_eq!(set.len() as u64, n, "N={n}");
            assert_eq!(g[0], b(0));
        }
    }

    #[test]
    fn abelian_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = RecoveryConfig::default();
        let group = AbelianGroupSpec::finite(&[16, 9]).unwrap();
        for s in [[0i64, 0], [5, 4], [15, 8]] {
            let shift: Vec<BigInt> = s.iter().map(|&x| BigInt::from(x)).collect();
            let p = ShiftPair::random(group.clone(), shift.clone(), &mut rng).unwrap();
            let rep = solve_abelian_shift(&p, 256, &cfg, &mut rng).unwrap();
            assert_eq!(rep.shift.as_slice(), p.sealed_shift().unwrap());
        }
    }

    #[test]
    fn abelian_coordinate_of_order_five() {
        // every greedy target has k' in {1, 2}; the interval sieve must keep the 1s
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let group = AbelianGroupSpec::finite(&[64, 5]).unwrap();
        for s in [[17i64, 3], [0, 4]] {
            let shift: Vec<BigInt> = s.iter().map(|&x| BigInt::from(x)).collect();
            let p = ShiftPair::random(group.clone(), shift, &mut rng).unwrap();
            let rep = solve_abelian_shift(&p, 256, &RecoveryConfig::default(), &mut rng).unwrap();
            assert_eq!(rep.shift.as_slice(), p.sealed_shift().unwrap());
        }
    }

    #[test]
    fn abelian_free_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let group = AbelianGroupSpec::new(vec![], vec![6]).unwrap();
        for s in [-20i64, 0, 31] {
            let p = ShiftPair::random(group.clone(), vec![BigInt::from(s)], &mut rng).unwrap();
            let rep = solve_abelian_shift(&p, 256, &RecoveryConfig::default(), &mut rng).unwrap();
            assert_eq!(rep.shift, vec![BigInt::from(s)]);
        }
    }

    #[test]
    fn hidden_subgroups() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = RecoveryConfig { retry_cap: 3, ..RecoveryConfig::default() };
        let ctx = GroupCtx::new(12u32).unwrap();
        let o = make_subgroup_oracle(&ctx, &b(4), Some(&b(7))).unwrap();
        let h = recover_hidden_subgroup(&o, &cfg, &mut rng).unwrap();
        assert_eq!(h, HiddenSubgroup { period: b(4), slope: Some("3".into()) });
        let o = make_subgroup_oracle(&ctx, &b(6), None).unwrap();
        let h = recover_hidden_subgroup(&o, &cfg, &mut rng).unwrap();
        assert_eq!(h, HiddenSubgroup { period: b(6), slope: None });
        let o = make_reflection_oracle(&ctx, &b(5)).unwrap();
        let h = recover_hidden_subgroup(&o, &cfg, &mut rng).unwrap();
        assert_eq!(h, HiddenSubgroup { period: b(12), slope: Some("5".into()) });
        let o = make_subgroup_oracle(&ctx, &b(1), Some(&b(0))).unwrap();
        assert_eq!(recover_hidden_subgroup(&o, &cfg, &mut rng).unwrap().slope, Some("0".into()));
    }
}
