//! Greedy sieve driven by an objective `alpha`.
//!
//! Labels live in buckets keyed by `alpha`; the sieve always works in the
//! lowest bucket and combines the pair whose sum or difference scores best.
//! Inside a bucket labels are ordered by an objective-specific key chosen so
//! that good partners sit next to each other, and a heap of adjacent pairs
//! (scored exactly, invalidated lazily) picks the next combine.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Pow, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::group::coords;
use crate::phase::{Branch, PhaseBackend, PhaseQubit};
use crate::staged::SieveStats;

/// Number of factors of `r` in `k`; 0 for `k = 0`.
pub fn alpha_radix(k: &BigUint, r: u32) -> u64 {
    if k.is_zero() || r < 2 {
        return 0;
    }
    if r == 2 {
        return k.trailing_zeros().unwrap_or(0);
    }
    let rb = BigUint::from(r);
    let mut x = k.clone();
    let mut a = 0;
    loop {
        let (q, rem) = x.div_rem(&rb);
        if !rem.is_zero() {
            return a;
        }
        x = q;
        a += 1;
    }
}

fn bitlen(x: &BigUint) -> u64 {
    x.bits()
}

/// Position objective on `A = Z/N_1 + ... + Z/N_a` (coordinates in the given
/// order). With `b` the first nonzero coordinate and `k_b` reduced to at most
/// `N_b / 2` by negating the whole vector,
/// `alpha = sum_(j <= b) ceil(1 + log2(N_j + 1)) - ceil(log2(k_b + 1))`,
/// and the full sum when only the last coordinate is nonzero.
pub fn alpha_abelian(k: &[BigUint], orders: &[BigUint]) -> u64 {
    let weight = |n: &BigUint| 1 + bitlen(n);
    let mut acc = 0;
    for (j, (kj, n)) in k.iter().zip(orders).enumerate() {
        acc += weight(n);
        if !kj.is_zero() {
            if j + 1 == orders.len() {
                return acc;
            }
            let other = n - kj;
            let small = if &other < kj { other } else { kj.clone() };
            return acc - bitlen(&small);
        }
    }
    acc
}

/// `3^(-sqrt(2 (n - 1 - alpha(k))))`. Diagnostic only.
pub fn value_estimate(k: &BigUint, r: u32, n: u32) -> f64 {
    let a = alpha_radix(k, r).min(u64::from(n.saturating_sub(1)));
    let beta = f64::from(n.saturating_sub(1)) - a as f64;
    3f64.powf(-(2.0 * beta).sqrt())
}

pub trait Objective: Sync {
    fn orders(&self) -> &[BigUint];
    fn alpha(&self, k: &[BigUint]) -> u64;
    /// Ordering key inside a bucket.
    fn key(&self, k: &[BigUint]) -> Vec<u8>;
    /// Whether `-k` is the preferred representative of `{k, -k}`.
    fn prefer_negation(&self, k: &[BigUint]) -> bool {
        let neg = coords::neg(k, self.orders());
        self.key(&neg) < self.key(k)
    }
    /// Whether the pair-optimality audit is meaningful for this objective.
    fn auditable(&self) -> bool {
        false
    }
    fn radix(&self) -> Option<u32> {
        None
    }
}

/// Radix objective on `Z/r^n`.
#[derive(Clone, Debug)]
pub struct RadixObjective {
    r: u32,
    n: u32,
    orders: Vec<BigUint>,
}

impl RadixObjective {
    pub fn new(r: u32, n: u32) -> Result<Self> {
        if !(2..=256).contains(&r) {
            return Err(Error::InvalidArgument(format!("radix {r} outside 2..=256")));
        }
        Ok(RadixObjective { r, n, orders: vec![Pow::pow(BigUint::from(r), n)] })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.orders[0]
    }

    /// Little-endian base-`r` digits from position `alpha(k)` up to `n`.
    pub fn digits_from_alpha(&self, k: &BigUint) -> Vec<u8> {
        let a = alpha_radix(k, self.r) as usize;
        let mut d = if k.is_zero() { Vec::new() } else { k.to_radix_le(self.r) };
        d.resize(self.n as usize, 0);
        d.split_off(a.min(d.len()))
    }
}

impl Objective for RadixObjective {
    fn orders(&self) -> &[BigUint] {
        &self.orders
    }

    fn alpha(&self, k: &[BigUint]) -> u64 {
        alpha_radix(&k[0], self.r)
    }

    fn key(&self, k: &[BigUint]) -> Vec<u8> {
        self.digits_from_alpha(&k[0])
    }

    fn auditable(&self) -> bool {
        true
    }

    fn radix(&self) -> Option<u32> {
        Some(self.r)
    }
}

/// Position objective with coordinates visited in `order`; the last entry
/// of `order` is the coordinate that survives.
#[derive(Clone, Debug)]
pub struct AbelianObjective {
    orders: Vec<BigUint>,
    order: Vec<usize>,
    widths: Vec<usize>,
}

impl AbelianObjective {
    pub fn new(orders: Vec<BigUint>, order: Vec<usize>) -> Result<Self> {
        let mut seen = order.clone();
        seen.sort_unstable();
        if seen != (0..orders.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument("order must be a permutation of the coordinates".into()));
        }
        let widths = orders.iter().map(|n| n.bits().div_ceil(8) as usize).collect();
        Ok(AbelianObjective { orders, order, widths })
    }

    /// Natural order with coordinate `last` moved to the end.
    pub fn with_last(orders: Vec<BigUint>, last: usize) -> Result<Self> {
        let mut order: Vec<usize> = (0..orders.len()).filter(|&j| j != last).collect();
        order.push(last);
        Self::new(orders, order)
    }

    fn permuted(&self, k: &[BigUint]) -> (Vec<BigUint>, Vec<BigUint>) {
        (
            self.order.iter().map(|&j| k[j].clone()).collect(),
            self.order.iter().map(|&j| self.orders[j].clone()).collect(),
        )
    }

    /// Whether every coordinate but the surviving one is zero (and it is not).
    pub fn is_target(&self, k: &[BigUint]) -> bool {
        let last = *self.order.last().expect("nonempty");
        !k[last].is_zero() && k.iter().enumerate().all(|(j, x)| j == last || x.is_zero())
    }

    pub fn surviving_coordinate(&self) -> usize {
        *self.order.last().expect("nonempty")
    }
}

impl Objective for AbelianObjective {
    fn orders(&self) -> &[BigUint] {
        &self.orders
    }

    fn alpha(&self, k: &[BigUint]) -> u64 {
        let (kp, op) = self.permuted(k);
        alpha_abelian(&kp, &op)
    }

    /// Big-endian coordinates from the first nonzero one onwards.
    fn key(&self, k: &[BigUint]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut started = false;
        for &j in &self.order {
            started |= !k[j].is_zero();
            if started {
                let mut b = k[j].to_bytes_be();
                let mut padded = vec![0u8; self.widths[j].saturating_sub(b.len())];
                padded.append(&mut b);
                out.extend(padded);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GreedyConfig {
    /// Number of sampled qubits.
    pub budget: usize,
    /// Stop once this many targets are collected.
    pub max_targets: Option<usize>,
    /// Brute-force check every chosen pair against all pairs in its bucket.
    pub audit: bool,
}

impl GreedyConfig {
    pub fn new(budget: usize) -> Self {
        GreedyConfig { budget, max_targets: None, audit: false }
    }
}

#[derive(Debug, Default)]
pub struct GreedyOutcome {
    pub targets: Vec<PhaseQubit>,
    pub stats: SieveStats,
    /// Largest `alpha` of any nonzero label seen.
    pub max_alpha: u64,
    pub combines: u64,
    /// Bucket insertions, removals and heap pushes.
    pub bucket_ops: u64,
    /// Audit: chosen pairs that scored below the best pair in the bucket.
    pub audit_violations: u64,
    /// Radix 2: difference outcomes that cancelled fewer than two bits.
    pub favorable_shortfalls: u64,
    pub zeros_discarded: u64,
    pub lone_discarded: u64,
}

type Entry = (Vec<u8>, u64);

struct State<'a> {
    obj: &'a dyn Objective,
    target: Option<&'a (dyn Fn(&[BigUint]) -> bool + Sync)>,
    store: HashMap<u64, PhaseQubit>,
    buckets: BTreeMap<u64, BTreeSet<Entry>>,
    next_id: u64,
    out: GreedyOutcome,
    max_targets: Option<usize>,
}

impl State<'_> {
    fn done(&self) -> bool {
        self.max_targets.is_some_and(|m| self.out.targets.len() >= m)
    }

    /// Returns the bucket the qubit landed in, if any.
    fn insert(&mut self, be: &mut PhaseBackend, q: PhaseQubit) -> Result<Option<(u64, Entry)>> {
        if coords::is_zero(q.label()) {
            self.out.zeros_discarded += 1;
            return Ok(None);
        }
        let a = self.obj.alpha(q.label());
        self.out.max_alpha = self.out.max_alpha.max(a);
        if let Some(t) = self.target {
            if t(q.label()) {
                self.out.targets.push(q);
                return Ok(None);
            }
        }
        let q = if self.obj.prefer_negation(q.label()) { be.negate_label(q)? } else { q };
        let key = self.obj.key(q.label());
        let id = self.next_id;
        self.next_id += 1;
        self.store.insert(id, q);
        self.buckets.entry(a).or_default().insert((key.clone(), id));
        self.out.bucket_ops += 1;
        Ok(Some((a, (key, id))))
    }

    fn score(&self, x: u64, y: u64) -> u64 {
        let (kx, ky) = (self.store[&x].label(), self.store[&y].label());
        let orders = self.obj.orders();
        let d = self.obj.alpha(&coords::sub(kx, ky, orders));
        let s = self.obj.alpha(&coords::add(kx, ky, orders));
        d.max(s)
    }
}

type HeapItem = (u64, Reverse<u64>, Entry, Entry);

fn push_pair(st: &mut State<'_>, heap: &mut BinaryHeap<HeapItem>, seq: &mut u64, a: &Entry, b: &Entry) {
    let sc = st.score(a.1, b.1);
    *seq += 1;
    heap.push((sc, Reverse(*seq), a.clone(), b.clone()));
    st.out.bucket_ops += 1;
}

fn neighbours(set: &BTreeSet<Entry>, e: &Entry) -> (Option<Entry>, Option<Entry>) {
    use std::ops::Bound::{Excluded, Unbounded};
    let pred = set.range::<Entry, _>((Unbounded, Excluded(e))).next_back().cloned();
    let succ = set.range::<Entry, _>((Excluded(e), Unbounded)).next().cloned();
    (pred, succ)
}

/// Run the greedy sieve on `budget` fresh samples.
///
/// With a target predicate, matching labels are collected as they appear
/// and the run fails if none turn up. Without one the sieve runs until the
/// buckets are exhausted (the cancellation race used for the bit-count table).
pub fn greedy_sieve(
    be: &mut PhaseBackend,
    obj: &dyn Objective,
    target: Option<&(dyn Fn(&[BigUint]) -> bool + Sync)>,
    cfg: GreedyConfig,
) -> Result<GreedyOutcome> {
    if cfg.budget < 2 {
        return Err(Error::InvalidArgument("budget must be at least 2".into()));
    }
    let before = be.oracle().queries();
    let mut st = State {
        obj,
        target,
        store: HashMap::with_capacity(cfg.budget),
        buckets: BTreeMap::new(),
        next_id: 0,
        out: GreedyOutcome::default(),
        max_targets: cfg.max_targets,
    };
    for _ in 0..cfg.budget {
        let q = be.sample_phase_qubit();
        st.insert(be, q)?;
    }
    st.out.stats.sizes.push(st.store.len());
    let mut seq = 0u64;
    'outer: while !st.done() {
        let Some((&a, _)) = st.buckets.first_key_value() else { break };
        let set = st.buckets.get(&a).expect("present");
        if set.len() < 2 {
            for (_, id) in st.buckets.remove(&a).expect("present") {
                st.store.remove(&id);
                st.out.lone_discarded += 1;
            }
            continue;
        }
        let entries: Vec<Entry> = set.iter().cloned().collect();
        let mut heap = BinaryHeap::with_capacity(entries.len());
        for w in entries.windows(2) {
            push_pair(&mut st, &mut heap, &mut seq, &w[0], &w[1]);
        }
        while let Some((score, _, e1, e2)) = heap.pop() {
            if st.done() {
                break 'outer;
            }
            let set = match st.buckets.get(&a) {
                Some(s) if s.len() >= 2 => s,
                _ => break,
            };
            if !set.contains(&e1) || !set.contains(&e2) || neighbours(set, &e1).1.as_ref() != Some(&e2) {
                continue;
            }
            if cfg.audit && obj.auditable() {
                let ids: Vec<u64> = set.iter().map(|e| e.1).collect();
                let mut best = 0;
                for i in 0..ids.len() {
                    for j in i + 1..ids.len() {
                        best = best.max(st.score(ids[i], ids[j]));
                    }
                }
                if score < best {
                    st.out.audit_violations += 1;
                }
            }
            let (pred, _) = neighbours(set, &e1);
            let (_, succ) = neighbours(set, &e2);
            let set = st.buckets.get_mut(&a).expect("present");
            set.remove(&e1);
            set.remove(&e2);
            st.out.bucket_ops += 2;
            if let (Some(p), Some(s)) = (&pred, &succ) {
                push_pair(&mut st, &mut heap, &mut seq, p, s);
            }
            let q1 = st.store.remove(&e1.1).expect("stored");
            let q2 = st.store.remove(&e2.1).expect("stored");
            let (q, branch) = be.combine(q1, q2)?;
            st.out.combines += 1;
            let new_alpha = obj.alpha(q.label());
            if obj.radix() == Some(2) && branch == Branch::Difference && !coords::is_zero(q.label()) && new_alpha < a + 2
            {
                st.out.favorable_shortfalls += 1;
            }
            if let Some((landed, entry)) = st.insert(be, q)? {
                if landed < a {
                    // a lower bucket now exists; go back and work there first
                    continue 'outer;
                }
                if landed == a {
                    let set = st.buckets.get(&a).expect("present");
                    let (p, s) = neighbours(set, &entry);
                    if let Some(p) = p {
                        push_pair(&mut st, &mut heap, &mut seq, &p, &entry);
                    }
                    if let Some(s) = s {
                        push_pair(&mut st, &mut heap, &mut seq, &entry, &s);
                    }
                }
            }
        }
        if let Some(set) = st.buckets.get(&a) {
            if set.len() >= 2 {
                // heap ran dry while pairs remain (only after early exits); rebuild
                continue;
            }
        }
        if let Some(rest) = st.buckets.remove(&a) {
            for (_, id) in rest {
                st.store.remove(&id);
                st.out.lone_discarded += 1;
            }
        }
    }
    st.out.stats.sizes.push(st.store.len());
    st.out.stats.queries_used = be.oracle().queries() - before;
    st.out.stats.outputs = st.out.targets.len();
    if target.is_some() && st.out.targets.is_empty() {
        return Err(Error::SieveExhausted("greedy sieve produced no target labels".into()));
    }
    Ok(st.out)
}

/// Residue `s mod r` on `D_(r^n)`: collect qubits with `(N/r) | k`, `k != 0`,
/// then read the residue off them by tomography.
pub fn run_radix_recovery(
    be: &mut PhaseBackend,
    r: u32,
    n: u32,
    budget: usize,
    failure_bound: f64,
    max_rounds: usize,
) -> Result<u64> {
    let obj = RadixObjective::new(r, n)?;
    if be.oracle().modulus()? != obj.modulus() {
        return Err(Error::InvalidArgument(format!("oracle modulus is not {r}^{n}")));
    }
    if n == 0 {
        return Ok(0);
    }
    let step = obj.modulus() / r;
    let need = crate::phase::min_tomography_copies(u64::from(r), failure_bound).max(1);
    let is_target = move |k: &[BigUint]| !k[0].is_zero() && (&k[0] % &step).is_zero();
    let mut copies = Vec::new();
    for _ in 0..max_rounds.max(1) {
        let cfg = GreedyConfig { budget, max_targets: Some(need - copies.len()), audit: false };
        match greedy_sieve(be, &obj, Some(&is_target), cfg) {
            Ok(out) => copies.extend(out.targets),
            Err(Error::SieveExhausted(_)) => {}
            Err(e) => return Err(e),
        }
        if copies.len() >= need {
            return be.tomography_mod_r(copies, u64::from(r), failure_bound);
        }
    }
    Err(Error::SieveExhausted(format!("{} of {need} copies with (N/r) | k", copies.len())))
}

/// Full slope on `D_(r^n)` digit by digit: learn `s mod r`, restrict to the
/// index-`r` subgroup that still contains the hidden reflection, repeat.
pub fn recover_slope_radix<R: Rng + ?Sized>(
    o: &crate::oracle::HidingOracle,
    r: u32,
    n: u32,
    budget: usize,
    rng: &mut R,
) -> Result<BigUint> {
    let mut view = o.clone();
    let mut s = BigUint::zero();
    let mut place = BigUint::one();
    for level in 0..n {
        let mut be = PhaseBackend::new(view.clone(), rng);
        let rho = run_radix_recovery(&mut be, r, n - level, budget, 0.01, 8)?;
        s += &place * rho;
        place *= r;
        view = view.restrict(0, rho, u64::from(r))?;
    }
    if o.verify_slope(&[s.clone()], 3, rng)? {
        Ok(s)
    } else {
        Err(Error::NoHiddenReflection { attempts: 1 })
    }
}
