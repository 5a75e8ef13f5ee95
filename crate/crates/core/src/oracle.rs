//! Hiding oracles.
//!
//! A [`HidingOracle`] wraps a classical function on a (generalized) dihedral
//! group together with the subgroup it hides. The hidden slope never leaves
//! this crate: callers can evaluate the function and read the query counter,
//! and the phase backend consults the slope only while sampling measurement
//! outcomes.
//!
//! Oracles are cheap to clone; clones and derived views (subgroup
//! restrictions, automorphism twists, quotients) share one query counter.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::group::{
    coords, mod_inverse, AbelianGroupSpec, DihedralElement, Element, GroupCtx,
};
use crate::error::{Error, Result};

/// Opaque oracle output. Equality is the only meaningful operation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OracleValue(Box<[u8]>);

const TAG_UINT: u8 = 1;
const TAG_COORDS: u8 = 2;
const TAG_PAIR: u8 = 3;
const TAG_UNORDERED: u8 = 4;
const TAG_TEXT: u8 = 5;
const TAG_FLAGGED: u8 = 6;

impl OracleValue {
    fn tagged(tag: u8, parts: &[&[u8]]) -> Self {
        let mut out = vec![tag];
        for p in parts {
            out.extend_from_slice(&(p.len() as u64).to_le_bytes());
            out.extend_from_slice(p);
        }
        OracleValue(out.into_boxed_slice())
    }

    pub fn from_uint(r: &BigUint) -> Self {
        Self::tagged(TAG_UINT, &[&r.to_bytes_le()])
    }

    pub fn from_coords(v: &[BigUint]) -> Self {
        let parts: Vec<Vec<u8>> = v.iter().map(|c| c.to_bytes_le()).collect();
        let refs: Vec<&[u8]> = parts.iter().map(|p| p.as_slice()).collect();
        Self::tagged(TAG_COORDS, &refs)
    }

    pub fn text(s: &str) -> Self {
        Self::tagged(TAG_TEXT, &[s.as_bytes()])
    }

    /// `(flag, value)`, used by injective encodings of the whole group.
    pub fn flagged(flag: bool, inner: &OracleValue) -> Self {
        Self::tagged(TAG_FLAGGED, &[&[u8::from(flag)], &inner.0])
    }

    pub fn pair(a: &OracleValue, b: &OracleValue) -> Self {
        Self::tagged(TAG_PAIR, &[&a.0, &b.0])
    }

    pub fn unordered_pair(a: &OracleValue, b: &OracleValue) -> Self {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        Self::tagged(TAG_UNORDERED, &[&lo.0, &hi.0])
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for OracleValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OracleValue(")?;
        for b in self.0.iter().take(12) {
            write!(f, "{b:02x}")?;
        }
        if self.0.len() > 12 {
            write!(f, "..")?;
        }
        write!(f, ")")
    }
}

pub type Hider = Arc<dyn Fn(&Element) -> OracleValue + Send + Sync>;
/// A token-valued function on integer coordinates (torsion coordinates are
/// passed reduced, free coordinates as plain integers).
pub type TokenFn = Arc<dyn Fn(&[BigInt]) -> OracleValue + Send + Sync>;

/// What the oracle hides. Crate-private: only sampling reads it.
#[derive(Clone, PartialEq, Eq)]
pub(crate) enum Hidden {
    /// `<y x^s>` for a slope vector `s`.
    Reflection(Vec<BigUint>),
    /// The trivial subgroup: the function is injective.
    Trivial,
    /// `<x^period>` or `<x^period, y x^slope>` in a cyclic `D_N`.
    Dihedral { period: BigUint, slope: Option<BigUint> },
}

#[derive(Clone)]
pub struct HidingOracle {
    orders: Vec<BigUint>,
    hider: Hider,
    hidden: Hidden,
    queries: Arc<AtomicU64>,
    corruption: (BigUint, BigUint),
    approximate: bool,
    kind: &'static str,
}

impl fmt::Debug for HidingOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HidingOracle")
            .field("kind", &self.kind)
            .field("orders", &self.orders.iter().map(|n| n.to_string()).collect::<Vec<_>>())
            .field("queries", &self.queries())
            .field("corruption_rate", &self.corruption_rate())
            .finish_non_exhaustive()
    }
}

impl Serialize for HidingOracle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("HidingOracle", 4)?;
        st.serialize_field("kind", self.kind)?;
        st.serialize_field(
            "orders",
            &self.orders.iter().map(|n| n.to_string()).collect::<Vec<_>>(),
        )?;
        st.serialize_field("queries", &self.queries())?;
        st.serialize_field("corruption_rate", &self.corruption_rate())?;
        st.end()
    }
}

impl HidingOracle {
    fn exact(orders: Vec<BigUint>, hider: Hider, hidden: Hidden, kind: &'static str) -> Self {
        HidingOracle {
            orders,
            hider,
            hidden,
            queries: Arc::new(AtomicU64::new(0)),
            corruption: (BigUint::zero(), BigUint::one()),
            approximate: false,
            kind,
        }
    }

    pub fn orders(&self) -> &[BigUint] {
        &self.orders
    }

    pub fn rank(&self) -> usize {
        self.orders.len()
    }

    /// `N` for an oracle on a cyclic dihedral group.
    pub fn modulus(&self) -> Result<&BigUint> {
        match self.orders.as_slice() {
            [n] => Ok(n),
            _ => Err(Error::Unsupported("oracle is not on a cyclic dihedral group".into())),
        }
    }

    pub fn ctx(&self) -> Result<GroupCtx> {
        GroupCtx::new(self.modulus()?.clone())
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub(crate) fn count_query(&self) {
        self.queries.fetch_add(1, Ordering::Relaxed);
    }

    /// Fraction of cosets on which the hiding promise is broken.
    pub fn corruption_rate(&self) -> f64 {
        crate::util::ratio_to_f64(&self.corruption.0, &self.corruption.1)
    }

    /// Exact `(broken, total)` behind [`Self::corruption_rate`].
    pub fn corruption_fraction(&self) -> (&BigUint, &BigUint) {
        (&self.corruption.0, &self.corruption.1)
    }

    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    pub(crate) fn hidden(&self) -> &Hidden {
        &self.hidden
    }

    fn check(&self, e: &Element) -> Result<()> {
        if e.a.len() != self.orders.len() || e.a.iter().zip(&self.orders).any(|(c, n)| c >= n) {
            return Err(Error::InvalidElement(format!("{e:?}")));
        }
        Ok(())
    }

    pub fn evaluate(&self, e: &DihedralElement) -> Result<OracleValue> {
        self.modulus()?;
        self.evaluate_element(&Element::from(e))
    }

    pub fn evaluate_element(&self, e: &Element) -> Result<OracleValue> {
        self.check(e)?;
        self.count_query();
        Ok((self.hider)(e))
    }

    /// Evaluation without touching the counter. Used only by the simulated
    /// quantum process to decide which coset state a sample landed in.
    pub(crate) fn evaluate_uncounted(&self, e: &Element) -> OracleValue {
        (self.hider)(e)
    }

    /// Two-query check that `x^a` and `y x^(a + slope)` share a value.
    /// For an exact reflection oracle this holds iff `slope` is the hidden one.
    pub fn check_reflection(&self, slope: &[BigUint], a: &[BigUint]) -> Result<bool> {
        let lhs = self.evaluate_element(&Element::new(false, a.to_vec()))?;
        let rhs = self.evaluate_element(&Element::new(true, coords::add(a, slope, &self.orders)))?;
        Ok(lhs == rhs)
    }

    /// Randomized Las Vegas verification: accept if any of `tries` random
    /// positions confirms the slope. Sound for exact and spliced oracles.
    pub fn verify_slope<R: Rng + ?Sized>(&self, slope: &[BigUint], tries: usize, rng: &mut R) -> Result<bool> {
        for _ in 0..tries.max(1) {
            let a: Vec<BigUint> = self.orders.iter().map(|n| rng.gen_biguint_below(n)).collect();
            if self.check_reflection(slope, &a)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Whether the coset `{x^a, y x^(a+s)}` is intact (approximate oracles).
    pub(crate) fn coset_intact(&self, slope: &[BigUint], a: &[BigUint]) -> bool {
        let lhs = self.evaluate_uncounted(&Element::new(false, a.to_vec()));
        let rhs = self.evaluate_uncounted(&Element::new(true, coords::add(a, slope, &self.orders)));
        lhs == rhs
    }

    fn derive(&self, orders: Vec<BigUint>, hider: Hider, hidden: Hidden, kind: &'static str) -> Self {
        HidingOracle {
            orders,
            hider,
            hidden,
            queries: Arc::clone(&self.queries),
            corruption: self.corruption.clone(),
            approximate: self.approximate,
            kind,
        }
    }

    /// View of the index-`r` subgroup `<x^r e_coord, y x^(residue e_coord), other coords>`,
    /// which is again a generalized dihedral group with `N_coord / r`.
    ///
    /// If the hidden slope is not `residue` mod `r` along `coord`, the
    /// restricted function is injective and the view hides the trivial group.
    pub fn restrict(&self, coord: usize, residue: u64, r: u64) -> Result<HidingOracle> {
        let n = self.orders.get(coord).ok_or_else(|| Error::InvalidArgument("coordinate".into()))?;
        let rb = BigUint::from(r);
        if r < 2 || !(n % &rb).is_zero() {
            return Err(if r == 2 {
                Error::OddModulus(n.to_string())
            } else {
                Error::InvalidArgument(format!("{r} does not divide {n}"))
            });
        }
        if residue >= r {
            return Err(Error::InvalidArgument(format!("residue {residue} >= {r}")));
        }
        let mut orders = self.orders.clone();
        orders[coord] = n / &rb;
        let hidden = match &self.hidden {
            Hidden::Reflection(s) => {
                let (q, rem) = s[coord].div_rem(&rb);
                if rem == BigUint::from(residue) {
                    let mut s2 = s.clone();
                    s2[coord] = q;
                    Hidden::Reflection(s2)
                } else {
                    Hidden::Trivial
                }
            }
            Hidden::Trivial => Hidden::Trivial,
            Hidden::Dihedral { .. } => {
                return Err(Error::Unsupported("restriction of a rotation-containing subgroup".into()))
            }
        };
        let parent = Arc::clone(&self.hider);
        let n = n.clone();
        let res = BigUint::from(residue);
        let hider: Hider = Arc::new(move |e: &Element| {
            let mut a = e.a.clone();
            let offset = if e.t { res.clone() } else { BigUint::zero() };
            a[coord] = (offset + &a[coord] * &rb) % &n;
            parent(&Element::new(e.t, a))
        });
        Ok(self.derive(orders, hider, hidden, "restricted"))
    }

    /// `restrict(0, parity, 2)` on a cyclic oracle: the `F_parity` view.
    pub fn restrict_parity(&self, parity: bool) -> Result<HidingOracle> {
        self.modulus()?;
        self.restrict(0, u64::from(parity), 2)
    }

    /// Twist by the automorphism multiplying coordinate `coord` by the unit
    /// `u`. The view hides slope `u * s` along that coordinate, and a phase
    /// qubit with label `k` drawn from it carries the phase of label `u * k`
    /// for the original slope.
    pub fn with_unit(&self, coord: usize, u: &BigUint) -> Result<HidingOracle> {
        let n = self.orders.get(coord).ok_or_else(|| Error::InvalidArgument("coordinate".into()))?.clone();
        let u = u % &n;
        let u_inv = mod_inverse(&u, &n).ok_or_else(|| Error::InvalidArgument(format!("{u} is not a unit mod {n}")))?;
        let hidden = match &self.hidden {
            Hidden::Reflection(s) => {
                let mut s2 = s.clone();
                s2[coord] = (&s[coord] * &u) % &n;
                Hidden::Reflection(s2)
            }
            Hidden::Trivial => Hidden::Trivial,
            Hidden::Dihedral { .. } => {
                return Err(Error::Unsupported("twisting a rotation-containing subgroup".into()))
            }
        };
        let parent = Arc::clone(&self.hider);
        let hider: Hider = Arc::new(move |e: &Element| {
            let mut a = e.a.clone();
            a[coord] = (&a[coord] * &u_inv) % &n;
            parent(&Element::new(e.t, a))
        });
        Ok(self.derive(self.orders.clone(), hider, hidden, "twisted"))
    }

    /// Quotient by `<x^d>` for a cyclic oracle whose hidden subgroup contains it.
    pub fn quotient(&self, d: &BigUint) -> Result<HidingOracle> {
        let n = self.modulus()?.clone();
        if d.is_zero() || !(&n % d).is_zero() {
            return Err(Error::InvalidArgument(format!("{d} does not divide {n}")));
        }
        let hidden = match &self.hidden {
            Hidden::Dihedral { period, slope } if (d % period).is_zero() => {
                if period == d {
                    match slope {
                        Some(s) => Hidden::Reflection(vec![s % d]),
                        None => Hidden::Trivial,
                    }
                } else {
                    Hidden::Dihedral { period: period.clone(), slope: slope.as_ref().map(|s| s % period) }
                }
            }
            Hidden::Reflection(s) if d == &n => Hidden::Reflection(s.clone()),
            Hidden::Trivial if d == &n => Hidden::Trivial,
            _ => return Err(Error::InvalidArgument("hidden subgroup does not contain <x^d>".into())),
        };
        let parent = Arc::clone(&self.hider);
        let hider: Hider = Arc::new(move |e: &Element| parent(e));
        Ok(self.derive(vec![d.clone()], hider, hidden, "quotient"))
    }
}

/// `f(y^t x^b) = token((b - t s) mod N)`, hiding `<y x^s>`.
pub fn make_reflection_oracle(ctx: &GroupCtx, s: &BigUint) -> Result<HidingOracle> {
    if s >= ctx.n() {
        return Err(Error::InvalidArgument(format!("slope {s} >= N = {}", ctx.n())));
    }
    make_generalized_oracle(&ctx.as_abelian(), &[s.clone()])
}

/// Hidden reflection `<y x^s>` in `D_A` with `s` a coordinate vector.
pub fn make_generalized_oracle(group: &AbelianGroupSpec, s: &[BigUint]) -> Result<HidingOracle> {
    let orders = group.effective_orders();
    if s.len() != orders.len() || s.iter().zip(&orders).any(|(c, n)| c >= n) {
        return Err(Error::InvalidArgument("slope not in the group".into()));
    }
    let s_owned = s.to_vec();
    let ord = orders.clone();
    let hider: Hider = Arc::new(move |e: &Element| {
        let v = if e.t { coords::sub(&e.a, &s_owned, &ord) } else { e.a.clone() };
        if v.len() == 1 {
            OracleValue::from_uint(&v[0])
        } else {
            OracleValue::from_coords(&v)
        }
    });
    Ok(HidingOracle::exact(orders, hider, Hidden::Reflection(s.to_vec()), "reflection"))
}

/// An injective function on `D_N`: the hidden subgroup is trivial.
pub fn make_injective_oracle(ctx: &GroupCtx) -> HidingOracle {
    let hider: Hider =
        Arc::new(|e: &Element| OracleValue::flagged(e.t, &OracleValue::from_coords(&e.a)));
    HidingOracle::exact(vec![ctx.n().clone()], hider, Hidden::Trivial, "injective")
}

/// Hides `<x^d>` (no slope) or `<x^d, y x^slope>` in `D_N`; `d` must divide `N`.
pub fn make_subgroup_oracle(ctx: &GroupCtx, d: &BigUint, slope: Option<&BigUint>) -> Result<HidingOracle> {
    let n = ctx.n().clone();
    if d.is_zero() || !(&n % d).is_zero() {
        return Err(Error::InvalidArgument(format!("{d} does not divide {n}")));
    }
    let slope = slope.map(|s| s % d);
    let dd = d.clone();
    let sl = slope.clone();
    let hider: Hider = Arc::new(move |e: &Element| {
        let b = &e.a[0] % &dd;
        match &sl {
            Some(s) => {
                let v = if e.t { (b + &dd - s) % &dd } else { b };
                OracleValue::from_uint(&v)
            }
            None => OracleValue::flagged(e.t, &OracleValue::from_uint(&b)),
        }
    });
    let hidden = if d == &n {
        match slope {
            Some(s) => Hidden::Reflection(vec![s]),
            None => Hidden::Trivial,
        }
    } else {
        Hidden::Dihedral { period: d.clone(), slope }
    };
    Ok(HidingOracle::exact(vec![n], hider, hidden, "subgroup"))
}

fn reduce(group_orders: &[BigUint], free: usize, a: &[BigInt]) -> Vec<BigInt> {
    a.iter()
        .enumerate()
        .map(|(j, x)| {
            if j < free {
                x.clone()
            } else {
                x.mod_floor(&BigInt::from(group_orders[j].clone()))
            }
        })
        .collect()
}

fn to_ints(a: &[BigUint]) -> Vec<BigInt> {
    a.iter().map(|c| BigInt::from(c.clone())).collect()
}

/// Two injective functions on an abelian group with `f(a) = g(a + s)`.
#[derive(Clone)]
pub struct ShiftPair {
    group: AbelianGroupSpec,
    f: TokenFn,
    g: TokenFn,
    shift: Option<Vec<BigInt>>,
}

impl fmt::Debug for ShiftPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftPair").field("group", &self.group).finish_non_exhaustive()
    }
}

impl ShiftPair {
    /// A pair whose shift is unknown even to the simulator; usable for
    /// classical evaluation only.
    pub fn new(group: AbelianGroupSpec, f: TokenFn, g: TokenFn) -> Self {
        ShiftPair { group, f, g, shift: None }
    }

    /// `g(a) = f(a - s)`, so `f(a) = g(a + s)`.
    pub fn with_hidden_shift(group: AbelianGroupSpec, f: TokenFn, s: Vec<BigInt>) -> Result<Self> {
        if s.len() != group.rank() {
            return Err(Error::InvalidArgument("shift has the wrong rank".into()));
        }
        let orders = group.effective_orders();
        let free = group.free_bits.len();
        let s = reduce(&orders, free, &s);
        let (f2, s2, ord2) = (Arc::clone(&f), s.clone(), orders.clone());
        let g: TokenFn = Arc::new(move |a: &[BigInt]| {
            let shifted: Vec<BigInt> = a.iter().zip(&s2).map(|(x, y)| x - y).collect();
            f2(&reduce(&ord2, free, &shifted))
        });
        Ok(ShiftPair { group, f, g, shift: Some(s) })
    }

    /// Random injective `f` built from an affine map, with hidden shift `s`.
    pub fn random<R: Rng + ?Sized>(group: AbelianGroupSpec, s: Vec<BigInt>, rng: &mut R) -> Result<Self> {
        let key_mul: u64 = rng.gen::<u64>() | 1;
        let key_add: u64 = rng.gen();
        let f: TokenFn = Arc::new(move |a: &[BigInt]| {
            let mixed: Vec<BigUint> = a
                .iter()
                .map(|x| {
                    let (sign, mag) = (x.is_negative(), x.magnitude().clone());
                    let m = (mag * key_mul + key_add) << 1u32;
                    if sign {
                        m + 1u32
                    } else {
                        m
                    }
                })
                .collect();
            OracleValue::from_coords(&mixed)
        });
        Self::with_hidden_shift(group, f, s)
    }

    pub fn group(&self) -> &AbelianGroupSpec {
        &self.group
    }

    pub fn f(&self, a: &[BigInt]) -> OracleValue {
        (self.f)(a)
    }

    pub fn g(&self, a: &[BigInt]) -> OracleValue {
        (self.g)(a)
    }

    /// Classical check of a candidate shift at the given positions.
    pub fn check_shift(&self, s: &[BigInt], positions: &[Vec<BigInt>]) -> bool {
        let orders = self.group.effective_orders();
        let free = self.group.free_bits.len();
        positions.iter().all(|a| {
            let b: Vec<BigInt> = a.iter().zip(s).map(|(x, y)| x + y).collect();
            self.f(&reduce(&orders, free, a)) == self.g(&reduce(&orders, free, &b))
        })
    }

    #[cfg(test)]
    pub(crate) fn sealed_shift(&self) -> Option<&[BigInt]> {
        self.shift.as_deref()
    }
}

/// `h(x^a) = f(a)`, `h(y x^a) = g(a)`: hides `<y x^s>` in `D_A`.
///
/// Free summands are truncated to `Z/2^m`; the wrap-around window of the
/// truncation breaks `|s_j|` cosets per free coordinate, so such oracles are
/// approximate.
pub fn shift_to_dihedral(p: &ShiftPair) -> HidingOracle {
    let orders = p.group.effective_orders();
    let free = p.group.free_bits.len();
    let (f, g) = (Arc::clone(&p.f), Arc::clone(&p.g));
    let hider: Hider = Arc::new(move |e: &Element| {
        let a = to_ints(&e.a);
        if e.t {
            g(&a)
        } else {
            f(&a)
        }
    });
    let hidden = match &p.shift {
        Some(s) => Hidden::Reflection(
            s.iter()
                .zip(&orders)
                .map(|(x, n)| x.mod_floor(&BigInt::from(n.clone())).to_biguint().expect("reduced"))
                .collect(),
        ),
        None => Hidden::Trivial,
    };
    let mut o = HidingOracle::exact(orders.clone(), hider, hidden, "shift-pair");
    if free > 0 {
        o.approximate = true;
        if let Some(s) = &p.shift {
            let total: BigUint = orders[..free].iter().product();
            let intact: BigUint = orders[..free]
                .iter()
                .zip(s)
                .map(|(n, x)| {
                    let mag = x.magnitude();
                    if mag >= n {
                        BigUint::zero()
                    } else {
                        n - mag
                    }
                })
                .product();
            o.corruption = (&total - intact, total);
        }
    }
    o
}

/// A function on `A` that is injective except for `h(a) = h(s - a)`.
#[derive(Clone)]
pub struct HiddenReflectionFn {
    group: AbelianGroupSpec,
    h: TokenFn,
    reflection: Option<Vec<BigInt>>,
}

impl HiddenReflectionFn {
    pub fn new(group: AbelianGroupSpec, h: TokenFn) -> Self {
        HiddenReflectionFn { group, h, reflection: None }
    }

    /// Records the reflection `s` so derived objects can be simulated.
    pub fn with_hidden(group: AbelianGroupSpec, h: TokenFn, s: Vec<BigInt>) -> Self {
        HiddenReflectionFn { group, h, reflection: Some(s) }
    }

    pub fn eval(&self, a: &[BigInt]) -> OracleValue {
        let orders = self.group.effective_orders();
        (self.h)(&reduce(&orders, self.group.free_bits.len(), a))
    }

    pub fn group(&self) -> &AbelianGroupSpec {
        &self.group
    }
}

/// `f(a) = (h(-a), h(v - a))`, `g(a) = (h(a), h(a - v))`, giving
/// `f(a) = g(a + s)`. Needs `v` with `2v != 0`; when no such element exists
/// the problem is Simon's and [`Error::SimonCase`] is returned.
pub fn reflection_to_shift(h: &HiddenReflectionFn, v: Option<Vec<BigInt>>) -> Result<ShiftPair> {
    let orders = h.group.effective_orders();
    let free = h.group.free_bits.len();
    let two_torsion = |v: &[BigInt]| {
        v.iter().zip(&orders).enumerate().all(|(j, (x, n))| {
            let twice: BigInt = x * 2;
            if j < free {
                twice.is_zero()
            } else {
                twice.mod_floor(&BigInt::from(n.clone())).is_zero()
            }
        })
    };
    let v = match v {
        Some(v) => {
            if v.len() != orders.len() || two_torsion(&v) {
                return Err(Error::InvalidArgument("need an element with 2v != 0".into()));
            }
            v
        }
        None => {
            let j = (0..orders.len())
                .find(|&j| j < free || orders[j] > BigUint::from(2u32))
                .ok_or(Error::SimonCase)?;
            let mut v = vec![BigInt::zero(); orders.len()];
            v[j] = BigInt::one();
            v
        }
    };
    let (h1, h2, v1, v2) = (h.clone(), h.clone(), v.clone(), v);
    let f: TokenFn = Arc::new(move |a: &[BigInt]| {
        let neg: Vec<BigInt> = a.iter().map(|x| -x).collect();
        let vm: Vec<BigInt> = v1.iter().zip(a).map(|(x, y)| x - y).collect();
        OracleValue::pair(&h1.eval(&neg), &h1.eval(&vm))
    });
    let g: TokenFn = Arc::new(move |a: &[BigInt]| {
        let am: Vec<BigInt> = a.iter().zip(&v2).map(|(x, y)| x - y).collect();
        OracleValue::pair(&h2.eval(a), &h2.eval(&am))
    });
    let shift = h.reflection.as_ref().map(|s| reduce(&orders, free, s));
    Ok(ShiftPair { group: h.group.clone(), f, g, shift })
}

/// `h(a) = {f(-a), g(a)}` as an unordered pair: injective save `h(a) = h(s - a)`.
pub fn shift_to_reflection_in_a(p: &ShiftPair) -> HiddenReflectionFn {
    let orders = p.group.effective_orders();
    let free = p.group.free_bits.len();
    let (f, g) = (Arc::clone(&p.f), Arc::clone(&p.g));
    let h: TokenFn = Arc::new(move |a: &[BigInt]| {
        let neg: Vec<BigInt> = a.iter().map(|x| -x).collect();
        OracleValue::unordered_pair(&f(&reduce(&orders, free, &neg)), &g(a))
    });
    HiddenReflectionFn { group: p.group.clone(), h, reflection: p.shift.clone() }
}

pub type IndexFn = Arc<dyn Fn(&BigUint) -> OracleValue + Send + Sync>;

/// `N -> 2N` hidden substring instance: `f` on `{0..N-1}`, `g` on
/// `{0..2N-1}`, with `f(x) = g(x + s)` for a fixed `0 <= s < N`.
#[derive(Clone)]
pub struct SubstringInstance {
    n: BigUint,
    f: IndexFn,
    g: IndexFn,
    shift: Option<BigUint>,
    queries: Arc<AtomicU64>,
}

impl SubstringInstance {
    pub fn new(n: BigUint, f: IndexFn, g: IndexFn) -> Self {
        SubstringInstance { n, f, g, shift: None, queries: Arc::new(AtomicU64::new(0)) }
    }

    /// `f(x) = g(x + s)` built from `g`.
    pub fn with_hidden_shift(n: BigUint, g: IndexFn, s: BigUint) -> Result<Self> {
        if s >= n {
            return Err(Error::InvalidArgument(format!("shift {s} must be < N = {n}")));
        }
        let (g2, s2) = (Arc::clone(&g), s.clone());
        let f: IndexFn = Arc::new(move |x: &BigUint| g2(&(x + &s2)));
        Ok(SubstringInstance { n, f, g, shift: Some(s), queries: Arc::new(AtomicU64::new(0)) })
    }

    /// Random injective `g` (an odd affine map) and `f(x) = g(x + s)`.
    pub fn random<R: Rng + ?Sized>(n: BigUint, s: BigUint, rng: &mut R) -> Result<Self> {
        let bits = n.bits() + 65;
        let modulus = BigUint::one() << bits;
        let mul = rng.gen_biguint_below(&modulus) | BigUint::one();
        let add = rng.gen_biguint_below(&modulus);
        let g: IndexFn = Arc::new(move |x: &BigUint| OracleValue::from_uint(&((x * &mul + &add) % &modulus)));
        Self::with_hidden_shift(n, g, s)
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn f(&self, x: &BigUint) -> OracleValue {
        self.queries.fetch_add(1, Ordering::Relaxed);
        (self.f)(x)
    }

    pub fn g(&self, x: &BigUint) -> OracleValue {
        self.queries.fetch_add(1, Ordering::Relaxed);
        (self.g)(x)
    }

    /// Classical check `f(x) = g(x + s)` at random positions.
    pub fn check_shift<R: Rng + ?Sized>(&self, s: &BigUint, samples: usize, rng: &mut R) -> bool {
        if s >= &self.n {
            return false;
        }
        (0..samples).all(|_| {
            let x = rng.gen_biguint_below(&self.n);
            self.f(&x) == self.g(&(&x + s))
        })
    }
}

/// Splices `f` and the window `g(t..t+N)` into a function on `D_N`:
/// `h(x^a) = f(a)`, `h(y x^b) = g(b + t)`.
///
/// The result hides slope `s - t (mod N)` except on the `|s - t|` cosets
/// that wrap around, where both halves return unmatched values.
pub fn splice_substring(inst: &SubstringInstance, t: &BigUint) -> Result<HidingOracle> {
    let n = inst.n.clone();
    if t >= &n {
        return Err(Error::InvalidArgument(format!("guess {t} must be < M - N = {n}")));
    }
    let (f, g, t2) = (Arc::clone(&inst.f), Arc::clone(&inst.g), t.clone());
    let hider: Hider = Arc::new(move |e: &Element| {
        if e.t {
            g(&(&e.a[0] + &t2))
        } else {
            f(&e.a[0])
        }
    });
    let (hidden, broken) = match &inst.shift {
        Some(s) => {
            let slope = (s + &n - t) % &n;
            let broken = if s >= t { s - t } else { t - s };
            (Hidden::Reflection(vec![slope]), broken)
        }
        None => (Hidden::Trivial, n.clone()),
    };
    let mut o = HidingOracle::exact(vec![n.clone()], hider, hidden, "spliced");
    o.approximate = true;
    o.corruption = (broken, n);
    Ok(o)
}

/// Small helper for tests and the verifier: count broken cosets of a
/// spliced or truncated cyclic oracle by direct enumeration.
pub fn count_broken_cosets(o: &HidingOracle) -> Result<u64> {
    let n = o.modulus()?.to_u64().ok_or_else(|| Error::Unsupported("N too large".into()))?;
    let s = match o.hidden() {
        Hidden::Reflection(s) => s.clone(),
        _ => return Ok(n),
    };
    Ok((0..n).filter(|&a| !o.coset_intact(&s, &[BigUint::from(a)])).count() as u64)
}
