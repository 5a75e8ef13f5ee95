//! Phase qubits and the measurements the sieves apply to them.
//!
//! A phase qubit `(|0> + e^(2 pi i k.s / N)|1>)/sqrt 2` is stored as its label
//! `k`. Every measurement outcome is drawn from its exact Born probability,
//! which needs the hidden slope; the backend reads it from the oracle and
//! never returns it.
//!
//! [`PhaseQubit`] is deliberately not `Clone`: measurements consume their
//! inputs, so a qubit cannot be used twice.
//!
//! ```compile_fail
//! use dhsp_sieve::{group::GroupCtx, oracle::make_reflection_oracle, phase::PhaseBackend};
//! let ctx = GroupCtx::new(16u32).unwrap();
//! let o = make_reflection_oracle(&ctx, &5u32.into()).unwrap();
//! let mut be = PhaseBackend::from_seed(o, 1);
//! let q = be.sample_phase_qubit();
//! let copy = q.clone();
//! ```

use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group::coords;
use crate::oracle::{Hidden, HidingOracle};
use crate::util::frac;

static NEXT_BACKEND: AtomicU64 = AtomicU64::new(1);

/// Intentional corruptions of the simulator, for testing the verifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Faults {
    /// Probability that `combine` reports the sum branch (0.5 when honest).
    pub combine_sum_probability: f64,
    /// Simulate the conjugate phase `e^(-2 pi i k s / N)`.
    pub phase_sign_flip: bool,
}

impl Default for Faults {
    fn default() -> Self {
        Faults { combine_sum_probability: 0.5, phase_sign_flip: false }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct PhaseQubit {
    label: Vec<BigUint>,
    classical: bool,
    backend: u64,
}

impl PhaseQubit {
    pub fn label(&self) -> &[BigUint] {
        &self.label
    }

    /// The label of a qubit over a cyclic group.
    pub fn k(&self) -> &BigUint {
        &self.label[0]
    }

    /// Simulation bookkeeping: whether the qubit is a classical mixture
    /// (drawn from a broken coset or a trivial hidden subgroup). Algorithms
    /// do not look at this; tests and statistics do.
    pub fn is_classical(&self) -> bool {
        self.classical
    }

    pub fn backend_id(&self) -> u64 {
        self.backend
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Sum,
    Difference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pm {
    Plus,
    Minus,
}

pub struct PhaseBackend {
    id: u64,
    oracle: HidingOracle,
    rng: ChaCha8Rng,
    faults: Faults,
}

impl PhaseBackend {
    pub fn new<R: Rng + ?Sized>(oracle: HidingOracle, rng: &mut R) -> Self {
        Self::from_seed(oracle, rng.gen())
    }

    pub fn from_seed(oracle: HidingOracle, seed: u64) -> Self {
        PhaseBackend {
            id: NEXT_BACKEND.fetch_add(1, Ordering::Relaxed),
            oracle,
            rng: ChaCha8Rng::seed_from_u64(seed),
            faults: Faults::default(),
        }
    }

    pub fn with_faults(mut self, faults: Faults) -> Self {
        self.faults = faults;
        self
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn oracle(&self) -> &HidingOracle {
        &self.oracle
    }

    pub fn orders(&self) -> &[BigUint] {
        self.oracle.orders()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Slope used for outcome probabilities, or `None` when every qubit is classical.
    fn slope(&self) -> Option<Vec<BigUint>> {
        let s = match self.oracle.hidden() {
            Hidden::Reflection(s) => s.clone(),
            Hidden::Dihedral { slope: Some(s), .. } => vec![s.clone()],
            _ => return None,
        };
        Some(if self.faults.phase_sign_flip { coords::neg(&s, self.oracle.orders()) } else { s })
    }

    /// Prepare a coset state with one oracle query, apply the Fourier
    /// transform over the rotation part and measure it.
    pub fn sample_phase_qubit(&mut self) -> PhaseQubit {
        self.oracle.count_query();
        let orders = self.oracle.orders().to_vec();
        let (label, classical) = match self.oracle.hidden().clone() {
            Hidden::Reflection(s) => {
                let label: Vec<BigUint> = orders.iter().map(|n| self.rng.gen_biguint_below(n)).collect();
                let classical = self.oracle.is_approximate() && {
                    let a: Vec<BigUint> = orders.iter().map(|n| self.rng.gen_biguint_below(n)).collect();
                    !self.oracle.coset_intact(&s, &a)
                };
                (label, classical)
            }
            Hidden::Trivial => (orders.iter().map(|n| self.rng.gen_biguint_below(n)).collect(), true),
            Hidden::Dihedral { period, slope } => {
                let step = &orders[0] / &period;
                let j = self.rng.gen_biguint_below(&period);
                (vec![j * step], slope.is_none())
            }
        };
        PhaseQubit { label, classical, backend: self.id }
    }

    fn own(&self, q: &PhaseQubit) -> Result<()> {
        if q.backend != self.id {
            return Err(Error::MixedBackends(self.id, q.backend));
        }
        Ok(())
    }

    /// CNOT the pair and measure the target: yields `k + l` or `k - l`, each
    /// with probability 1/2 regardless of the slope.
    pub fn combine(&mut self, q1: PhaseQubit, q2: PhaseQubit) -> Result<(PhaseQubit, Branch)> {
        self.own(&q1)?;
        self.own(&q2)?;
        let orders = self.oracle.orders();
        let branch = if self.rng.gen_bool(self.faults.combine_sum_probability.clamp(0.0, 1.0)) {
            Branch::Sum
        } else {
            Branch::Difference
        };
        let label = match branch {
            Branch::Sum => coords::add(&q1.label, &q2.label, orders),
            Branch::Difference => coords::sub(&q1.label, &q2.label, orders),
        };
        Ok((PhaseQubit { label, classical: q1.classical || q2.classical, backend: self.id }, branch))
    }

    /// Apply `X`, which conjugates the phase: label `k` becomes `-k`.
    pub fn negate_label(&self, q: PhaseQubit) -> Result<PhaseQubit> {
        self.own(&q)?;
        let label = coords::neg(&q.label, self.oracle.orders());
        Ok(PhaseQubit { label, ..q })
    }

    /// `sum_j k_j (s_j - t_j) / N_j mod 1`, or `None` for a classical qubit.
    fn phase(&self, q: &PhaseQubit, t: Option<&[BigUint]>) -> Option<f64> {
        if q.classical {
            return None;
        }
        let s = self.slope()?;
        let orders = self.oracle.orders();
        let d = match t {
            Some(t) => coords::sub(&s, t, orders),
            None => s,
        };
        let mut acc = 0.0;
        for ((k, dj), n) in q.label.iter().zip(&d).zip(orders) {
            acc += frac(&(k * dj), n);
        }
        Some(acc.fract())
    }

    /// Project onto `(|0> + e^(i theta)|1>)/sqrt 2` versus its complement.
    /// Returns `true` on the first outcome, which has probability
    /// `cos^2(pi phi - theta/2)` for phase `2 pi phi`.
    pub fn measure_basis(&mut self, q: PhaseQubit, theta: f64) -> Result<bool> {
        self.own(&q)?;
        let p = match self.phase(&q, None) {
            Some(phi) => (std::f64::consts::PI * phi - theta / 2.0).cos().powi(2),
            None => 0.5,
        };
        Ok(self.rng.gen_bool(p.clamp(0.0, 1.0)))
    }

    /// Measure in the `|+>, |->` basis; `P(+) = cos^2(pi k s / N)`.
    pub fn measure_pm(&mut self, q: PhaseQubit) -> Result<Pm> {
        Ok(if self.measure_basis(q, 0.0)? { Pm::Plus } else { Pm::Minus })
    }

    /// Measure against a reference position `t`:
    /// `P(true) = cos^2(pi k (s - t) / N)`.
    pub fn cosine_observe(&mut self, q: PhaseQubit, t: &[BigUint]) -> Result<bool> {
        self.own(&q)?;
        if t.len() != self.oracle.rank() {
            return Err(Error::DimensionMismatch(t.len(), self.oracle.rank()));
        }
        let t: Vec<BigUint> = t.iter().zip(self.oracle.orders()).map(|(x, n)| x % n).collect();
        let p = match self.phase(&q, Some(&t)) {
            Some(phi) => (std::f64::consts::PI * phi).cos().powi(2),
            None => 0.5,
        };
        Ok(self.rng.gen_bool(p.clamp(0.0, 1.0)))
    }

    /// Phase estimation on `psi_1, psi_2, ..., psi_(2^kappa)`: returns `t`
    /// with `t / 2^(kappa+1)` close to `s / N`, drawn from the exact
    /// distribution.
    pub fn hoyer_readout(&mut self, qs: Vec<PhaseQubit>) -> Result<BigUint> {
        let n = self.oracle.modulus()?.clone();
        if qs.is_empty() {
            return Err(Error::WrongLabelSet("no qubits".into()));
        }
        for q in &qs {
            self.own(q)?;
        }
        let mut want: Vec<BigUint> = (0..qs.len()).map(|i| (BigUint::one() << i) % &n).collect();
        let mut got: Vec<BigUint> = qs.iter().map(|q| q.label[0].clone()).collect();
        want.sort();
        got.sort();
        if want != got {
            return Err(Error::WrongLabelSet(format!("expected powers of two up to 2^{}", qs.len() - 1)));
        }
        if qs.iter().any(|q| q.classical) {
            return Err(Error::ClassicalQubit);
        }
        let s = self.slope().ok_or(Error::ClassicalQubit)?.remove(0);
        let bits = qs.len() as u64;
        let m = BigUint::one() << bits;
        let nm = &n * &m;
        let sm = &s * &m;
        let delta = |t: &BigUint| -> f64 {
            // s/N - t/M as a fraction of 1
            let num = (&sm + &nm - (t * &n) % &nm) % &nm;
            frac(&num, &nm)
        };
        let mf = m.to_f64().unwrap_or(f64::INFINITY);
        // t* = round(s M / N)
        let centre = ((&sm << 1u32) + &n) / (&n << 1u32) % &m;
        let (start, count) = if bits <= 20 {
            (BigUint::zero(), 1u64 << bits)
        } else {
            // Outside a window of 2^13 around the peak the kernel carries
            // less than 1e-4 of the mass; renormalize over the window.
            let w = 1u64 << 12;
            ((&centre + &m - BigUint::from(w)) % &m, 2 * w + 1)
        };
        let ts: Vec<BigUint> = (0..count).map(|i| (&start + i) % &m).collect();
        let weights: Vec<f64> = ts.iter().map(|t| phase_estimation_kernel(mf, delta(t))).collect();
        let total: f64 = weights.iter().sum();
        let mut u = self.rng.gen::<f64>() * total;
        for (t, w) in ts.iter().zip(&weights) {
            if u < *w {
                return Ok(t.clone());
            }
            u -= w;
        }
        Ok(centre)
    }

    /// Recover `rho = s mod r` from qubits whose labels are multiples of
    /// `N/r`, by maximum likelihood over quadrature measurements.
    pub fn tomography_mod_r(&mut self, qs: Vec<PhaseQubit>, r: u64, failure_bound: f64) -> Result<u64> {
        let n = self.oracle.modulus()?.clone();
        if r == 0 || !(&n % r).is_zero() {
            return Err(Error::InvalidArgument(format!("{r} does not divide {n}")));
        }
        let needed = min_tomography_copies(r, failure_bound);
        if qs.len() < needed {
            return Err(Error::InsufficientCopies { needed, got: qs.len() });
        }
        let step = &n / r;
        let mut obs: Vec<(u64, f64, bool)> = Vec::with_capacity(qs.len());
        for (i, q) in qs.into_iter().enumerate() {
            self.own(&q)?;
            let (a, rem) = q.label[0].div_rem(&step);
            if !rem.is_zero() {
                return Err(Error::WrongLabelSet(format!("label {} is not a multiple of N/{r}", q.label[0])));
            }
            let a = a.to_u64().expect("below r");
            let theta = if r <= 2 || i % 2 == 0 { 0.0 } else { std::f64::consts::FRAC_PI_2 };
            let out = self.measure_basis(q, theta)?;
            obs.push((a, theta, out));
        }
        if r == 1 {
            return Ok(0);
        }
        let pi = std::f64::consts::PI;
        let mut best = (f64::NEG_INFINITY, 0u64);
        for rho in 0..r {
            let ll: f64 = obs
                .iter()
                .map(|&(a, theta, out)| {
                    let phi = ((a * rho) % r) as f64 / r as f64;
                    let p = (pi * phi - theta / 2.0).cos().powi(2);
                    let p = if out { p } else { 1.0 - p };
                    p.max(1e-12).ln()
                })
                .sum();
            if ll > best.0 {
                best = (ll, rho);
            }
        }
        Ok(best.1)
    }
}

/// Copies [`PhaseBackend::tomography_mod_r`] asks for.
pub fn min_tomography_copies(r: u64, failure_bound: f64) -> usize {
    match r {
        0 | 1 => 0,
        2 => 1,
        _ => {
            let d = failure_bound.clamp(1e-300, 1.0);
            (r as f64 * (r as f64 / d).ln()).ceil() as usize
        }
    }
}

/// `sin^2(pi M delta) / (M^2 sin^2(pi delta))`, the phase-estimation
/// outcome distribution at offset `delta`.
pub fn phase_estimation_kernel(m: f64, delta: f64) -> f64 {
    let x = delta - delta.round();
    let pi = std::f64::consts::PI;
    let den = m * (pi * x).sin();
    if den.abs() < 1e-300 || x.abs() < 1e-15 {
        return 1.0;
    }
    ((pi * m * x).sin() / den).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupCtx;
    use crate::oracle::{make_injective_oracle, make_reflection_oracle, splice_substring, SubstringInstance};

    fn b(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn backend(n: u64, s: u64, seed: u64) -> PhaseBackend {
        let ctx = GroupCtx::new(n).unwrap();
        PhaseBackend::from_seed(make_reflection_oracle(&ctx, &b(s)).unwrap(), seed)
    }

    #[test]
    fn labels_uniform_and_queries_counted() {
        let mut be = backend(8, 3, 1);
        let mut counts = [0u32; 8];
        for _ in 0..80_000 {
            let q = be.sample_phase_qubit();
            counts[q.k().to_usize().unwrap()] += 1;
            assert!(!q.is_classical());
        }
        assert_eq!(be.oracle().queries(), 80_000);
        for c in counts {
            assert!((c as f64 / 80_000.0 - 0.125).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn combine_label_law() {
        let mut be = backend(32, 7, 2);
        let mut sums = 0;
        for _ in 0..20_000 {
            let (q1, q2) = (be.sample_phase_qubit(), be.sample_phase_qubit());
            let (k, l) = (q1.k().clone(), q2.k().clone());
            let (q, br) = be.combine(q1, q2).unwrap();
            match br {
                Branch::Sum => {
                    sums += 1;
                    assert_eq!(q.k(), &((&k + &l) % 32u32));
                }
                Branch::Difference => assert_eq!(q.k(), &((&k + 32u32 - &l) % 32u32)),
            }
        }
        assert!((sums as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn measure_pm_probabilities() {
        let (n, s) = (16u64, 5u64);
        let mut be = backend(n, s, 3);
        let mut plus = [0u32; 16];
        let mut seen = [0u32; 16];
        for _ in 0..160_000 {
            let q = be.sample_phase_qubit();
            let k = q.k().to_usize().unwrap();
            seen[k] += 1;
            if be.measure_pm(q).unwrap() == Pm::Plus {
                plus[k] += 1;
            }
        }
        for k in 0..16 {
            let p = (std::f64::consts::PI * (k as u64 * s) as f64 / n as f64).cos().powi(2);
            assert!((plus[k] as f64 / seen[k] as f64 - p).abs() < 0.02, "k={k}");
        }
    }

    #[test]
    fn cosine_observe_at_slope_is_certain() {
        let mut be = backend(1000, 417, 4);
        for _ in 0..1000 {
            let q = be.sample_phase_qubit();
            assert!(be.cosine_observe(q, &[b(417)]).unwrap());
        }
    }

    #[test]
    fn sign_flip_changes_cosine_reference() {
        let mut be = backend(1000, 417, 4).with_faults(Faults { phase_sign_flip: true, ..Faults::default() });
        for _ in 0..200 {
            let q = be.sample_phase_qubit();
            assert!(be.cosine_observe(q, &[b(583)]).unwrap());
        }
    }

    #[test]
    fn mixed_backends_rejected() {
        let mut a = backend(16, 3, 5);
        let mut c = backend(16, 3, 5);
        let (q1, q2) = (a.sample_phase_qubit(), c.sample_phase_qubit());
        assert!(matches!(a.combine(q1, q2), Err(Error::MixedBackends(..))));
    }

    #[test]
    fn trivial_subgroup_gives_fair_coins() {
        let ctx = GroupCtx::new(64u32).unwrap();
        let mut be = PhaseBackend::from_seed(make_injective_oracle(&ctx), 6);
        let mut plus = 0;
        for _ in 0..20_000 {
            let q = be.sample_phase_qubit();
            assert!(q.is_classical());
            if be.measure_pm(q).unwrap() == Pm::Plus {
                plus += 1;
            }
        }
        assert!((plus as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn spliced_flag_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = SubstringInstance::random(b(64), b(10), &mut rng).unwrap();
        let o = splice_substring(&inst, &b(6)).unwrap();
        let mut be = PhaseBackend::from_seed(o, 10);
        let flagged = (0..64_000).filter(|_| be.sample_phase_qubit().is_classical()).count();
        assert!((flagged as f64 / 64_000.0 - 4.0 / 64.0).abs() < 0.005, "{flagged}");
    }

    #[test]
    fn negate_conjugates() {
        let mut be = backend(16, 0, 7);
        let q = be.sample_phase_qubit();
        let k = q.k().clone();
        let q = be.negate_label(q).unwrap();
        assert_eq!(q.k(), &((b(16) - k) % 16u32));
    }

    #[test]
    fn hoyer_exact_when_m_equals_n() {
        for s in [0u64, 1, 511, 700, 1023] {
            let mut be = backend(1024, s, 8);
            // draw labels 2^i by sampling until each appears
            let mut qs = Vec::new();
            let mut need: Vec<BigUint> = (0..10).map(|i| b(1 << i)).collect();
            while !need.is_empty() {
                let q = be.sample_phase_qubit();
                if let Some(p) = need.iter().position(|x| x == q.k()) {
                    need.remove(p);
                    qs.push(q);
                }
            }
            assert_eq!(be.hoyer_readout(qs).unwrap(), b(s));
        }
    }

    #[test]
    fn hoyer_rejects_wrong_labels() {
        let mut be = backend(16, 3, 9);
        let q = be.sample_phase_qubit();
        let ok = q.k() == &b(1);
        let r = be.hoyer_readout(vec![q]);
        assert_eq!(r.is_ok(), ok);
    }

    #[test]
    fn kernel_sums_to_one() {
        let m = 64.0;
        for delta0 in [0.0, 0.3 / 64.0, 0.5 / 64.0, 0.123] {
            let total: f64 = (0..64).map(|t| phase_estimation_kernel(m, delta0 - t as f64 / m)).sum();
            assert!((total - 1.0).abs() < 1e-9, "{delta0} {total}");
        }
    }

    #[test]
    fn tomography_mod_3() {
        let n = 3u64 * 1024;
        let mut ok = 0;
        for trial in 0..100u64 {
            let s = trial % 3 * 5 + 3;
            let mut be = backend(n, s, 100 + trial);
            let mut qs = Vec::new();
            while qs.len() < 200 {
                let q = be.sample_phase_qubit();
                if (q.k() % 1024u32).is_zero() && !q.k().is_zero() {
                    qs.push(q);
                }
            }
            if be.tomography_mod_r(qs, 3, 0.05).unwrap() == s % 3 {
                ok += 1;
            }
        }
        assert!(ok >= 99, "{ok}");
    }

    #[test]
    fn tomography_copy_bound() {
        assert_eq!(min_tomography_copies(1, 0.05), 0);
        assert_eq!(min_tomography_copies(2, 0.05), 1);
        assert_eq!(min_tomography_copies(3, 0.05), 13);
        let mut be = backend(6, 1, 1);
        let q = be.sample_phase_qubit();
        assert!(matches!(be.tomography_mod_r(vec![q], 3, 0.05), Err(Error::InsufficientCopies { .. })));
    }
}
