//! Dihedral and generalized dihedral group arithmetic.
//!
//! Elements are kept in the normal form `y^t x^b`: a reflection flag `t`
//! followed by a rotation exponent `b`. With this form the right cosets of a
//! reflection subgroup `<y x^s>` are the pairs `{x^b, y x^(b+s)}`, which is all
//! the oracle and verifier code ever needs.
//!
//! Products follow from `y x = x^-1 y`:
//! `(t1, b1) * (t2, b2) = (t1 ^ t2, (-1)^t2 * b1 + b2)`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Holds the order `N` of the rotation subgroup of `D_N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupCtx {
    n: BigUint,
}

impl GroupCtx {
    pub fn new(n: impl Into<BigUint>) -> Result<Self> {
        let n = n.into();
        if n.is_zero() {
            return Err(Error::InvalidArgument("dihedral order must be >= 1".into()));
        }
        Ok(GroupCtx { n })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn identity(&self) -> DihedralElement {
        DihedralElement::new(false, BigUint::zero())
    }

    /// The rotation `x^b`.
    pub fn rotation(&self, b: impl Into<BigUint>) -> DihedralElement {
        DihedralElement::new(false, b.into() % &self.n)
    }

    /// The reflection `y x^b`.
    pub fn reflection(&self, b: impl Into<BigUint>) -> DihedralElement {
        DihedralElement::new(true, b.into() % &self.n)
    }

    pub fn contains(&self, e: &DihedralElement) -> bool {
        e.b < self.n
    }

    /// All `2N` elements, rotations first. Only sensible for small `N`.
    pub fn elements(&self) -> impl Iterator<Item = DihedralElement> + '_ {
        let n = self.n.to_u64().expect("enumeration needs a machine-sized N");
        [false, true]
            .into_iter()
            .flat_map(move |t| (0..n).map(move |b| DihedralElement::new(t, BigUint::from(b))))
    }

    pub fn as_abelian(&self) -> AbelianGroupSpec {
        AbelianGroupSpec::cyclic(self.n.clone())
    }
}

/// `y^t x^b` in `D_N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DihedralElement {
    pub t: bool,
    pub b: BigUint,
}

impl DihedralElement {
    pub fn new(t: bool, b: BigUint) -> Self {
        DihedralElement { t, b }
    }

    pub fn is_reflection(&self) -> bool {
        self.t
    }
}

fn neg_mod(x: &BigUint, n: &BigUint) -> BigUint {
    let r = x % n;
    if r.is_zero() {
        r
    } else {
        n - r
    }
}

pub fn dmul(a: &DihedralElement, c: &DihedralElement, ctx: &GroupCtx) -> DihedralElement {
    let n = ctx.n();
    let left = if c.t { neg_mod(&a.b, n) } else { &a.b % n };
    DihedralElement::new(a.t ^ c.t, (left + &c.b) % n)
}

pub fn dinv(a: &DihedralElement, ctx: &GroupCtx) -> DihedralElement {
    if a.t {
        DihedralElement::new(true, &a.b % ctx.n())
    } else {
        DihedralElement::new(false, neg_mod(&a.b, ctx.n()))
    }
}

/// Embeds `D_{N/2}` onto the index-2 subgroup `F_parity` of `D_N`:
/// `F_0 = <x^2, y>` and `F_1 = <x^2, y x>`.
///
/// `ctx` is the context of the *larger* group `D_N`.
pub fn subgroup_embed(parity: bool, e: &DihedralElement, ctx: &GroupCtx) -> Result<DihedralElement> {
    subgroup_embed_radix(u64::from(parity), 2, e, ctx)
}

/// Radix-`r` version of [`subgroup_embed`]: maps `D_{N/r}` onto
/// `<x^r, y x^residue>`, which contains `<y x^s>` exactly when
/// `s = residue (mod r)`.
pub fn subgroup_embed_radix(
    residue: u64,
    r: u64,
    e: &DihedralElement,
    ctx: &GroupCtx,
) -> Result<DihedralElement> {
    let n = ctx.n();
    let rb = BigUint::from(r);
    if r < 2 || !(n % &rb).is_zero() {
        return Err(if r == 2 {
            Error::OddModulus(n.to_string())
        } else {
            Error::InvalidArgument(format!("{r} does not divide {n}"))
        });
    }
    if residue >= r {
        return Err(Error::InvalidArgument(format!("residue {residue} >= radix {r}")));
    }
    if e.b >= n / &rb {
        return Err(Error::InvalidElement(format!("{} not in D_{}", e.b, n / &rb)));
    }
    let offset = if e.t { BigUint::from(residue) } else { BigUint::zero() };
    Ok(DihedralElement::new(e.t, (offset + &e.b * rb) % n))
}

/// `N = 2^a * M` with `M` odd, together with the CRT isomorphism
/// `Z/N <-> Z/2^a x Z/M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrtSplit {
    pub two_exp: u32,
    pub odd: BigUint,
    n: BigUint,
    two_pow: BigUint,
    // Idempotents: e2 = 1 mod 2^a, 0 mod M; eo = 0 mod 2^a, 1 mod M.
    e2: BigUint,
    eo: BigUint,
}

pub fn crt_split(n: &BigUint) -> CrtSplit {
    assert!(!n.is_zero(), "crt_split needs N >= 1");
    let two_exp = n.trailing_zeros().unwrap_or(0) as u32;
    let odd = n >> two_exp;
    let two_pow = BigUint::one() << two_exp;
    let e2 = if two_exp == 0 {
        BigUint::zero()
    } else {
        let inv = mod_inverse(&(&odd % &two_pow), &two_pow).expect("M odd, so a unit mod 2^a");
        (&odd * inv) % n
    };
    let eo = if odd.is_one() {
        BigUint::zero()
    } else {
        let inv = mod_inverse(&(&two_pow % &odd), &odd).expect("2^a is a unit mod odd M");
        (&two_pow * inv) % n
    };
    CrtSplit { two_exp, odd, n: n.clone(), two_pow, e2, eo }
}

impl CrtSplit {
    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn two_power(&self) -> &BigUint {
        &self.two_pow
    }

    pub fn split(&self, x: &BigUint) -> (BigUint, BigUint) {
        (x % &self.two_pow, x % &self.odd)
    }

    pub fn join(&self, two_part: &BigUint, odd_part: &BigUint) -> BigUint {
        (two_part * &self.e2 + odd_part * &self.eo) % &self.n
    }
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    if m.is_one() {
        return Some(BigUint::zero());
    }
    let a = BigInt::from(a % m);
    let m_int = BigInt::from(m.clone());
    let egcd = a.extended_gcd(&m_int);
    if !egcd.gcd.is_one() {
        return None;
    }
    let x = egcd.x.mod_floor(&m_int);
    debug_assert!(!x.is_negative());
    x.to_biguint()
}

/// A finitely generated abelian group `Z^b + Z/N_1 + ... + Z/N_a`, with every
/// free summand carrying an output-bit allocation used to truncate it to a
/// finite cyclic group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AbelianGroupSpec {
    pub orders: Vec<BigUint>,
    #[serde(default)]
    pub free_bits: Vec<u32>,
}

impl AbelianGroupSpec {
    pub fn new(orders: Vec<BigUint>, free_bits: Vec<u32>) -> Result<Self> {
        if orders.iter().any(|n| n.is_zero()) {
            return Err(Error::InvalidArgument("cyclic orders must be >= 1".into()));
        }
        if free_bits.iter().any(|&b| b == 0) {
            return Err(Error::InvalidArgument("free summands need a positive bit bound".into()));
        }
        if orders.is_empty() && free_bits.is_empty() {
            return Err(Error::InvalidArgument("empty group".into()));
        }
        Ok(AbelianGroupSpec { orders, free_bits })
    }

    pub fn cyclic(n: BigUint) -> Self {
        AbelianGroupSpec { orders: vec![n], free_bits: vec![] }
    }

    pub fn finite(orders: &[u64]) -> Result<Self> {
        Self::new(orders.iter().map(|&n| BigUint::from(n)).collect(), vec![])
    }

    /// Bits `m = n + ceil(2 sqrt(n))` kept for a free summand with `n` output bits.
    pub fn truncation_bits(output_bits: u32) -> u32 {
        output_bits + (2.0 * f64::from(output_bits).sqrt()).ceil() as u32
    }

    /// Cyclic orders of the finite group actually simulated: free summands
    /// (truncated to `Z/2^m`) first, then the torsion factors.
    pub fn effective_orders(&self) -> Vec<BigUint> {
        self.free_bits
            .iter()
            .map(|&b| BigUint::one() << Self::truncation_bits(b))
            .chain(self.orders.iter().cloned())
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.free_bits.len() + self.orders.len()
    }

    pub fn is_free_coordinate(&self, coord: usize) -> bool {
        coord < self.free_bits.len()
    }

    pub fn is_cyclic_single(&self) -> bool {
        self.rank() == 1
    }
}

/// `y^t x^a` in a generalized dihedral group `D_A`, with `a` a coordinate
/// vector in the (truncated) finite group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Element {
    pub t: bool,
    pub a: Vec<BigUint>,
}

impl Element {
    pub fn new(t: bool, a: Vec<BigUint>) -> Self {
        Element { t, a }
    }
}

impl From<DihedralElement> for Element {
    fn from(e: DihedralElement) -> Self {
        Element { t: e.t, a: vec![e.b] }
    }
}

impl From<&DihedralElement> for Element {
    fn from(e: &DihedralElement) -> Self {
        Element { t: e.t, a: vec![e.b.clone()] }
    }
}

/// Coordinate-wise helpers over a list of cyclic orders.
pub mod coords {
    use super::*;

    pub fn add(x: &[BigUint], y: &[BigUint], orders: &[BigUint]) -> Vec<BigUint> {
        x.iter().zip(y).zip(orders).map(|((a, b), n)| (a + b) % n).collect()
    }

    pub fn sub(x: &[BigUint], y: &[BigUint], orders: &[BigUint]) -> Vec<BigUint> {
        x.iter()
            .zip(y)
            .zip(orders)
            .map(|((a, b), n)| (a + neg_mod(b, n)) % n)
            .collect()
    }

    pub fn neg(x: &[BigUint], orders: &[BigUint]) -> Vec<BigUint> {
        x.iter().zip(orders).map(|(a, n)| neg_mod(a, n)).collect()
    }

    pub fn is_zero(x: &[BigUint]) -> bool {
        x.iter().all(|c| c.is_zero())
    }

    pub fn zero(len: usize) -> Vec<BigUint> {
        vec![BigUint::zero(); len]
    }

    pub fn neg_one(x: &BigUint, n: &BigUint) -> BigUint {
        neg_mod(x, n)
    }
}

pub fn gmul(p: &Element, q: &Element, orders: &[BigUint]) -> Element {
    let left = if q.t { coords::neg(&p.a, orders) } else { p.a.clone() };
    Element::new(p.t ^ q.t, coords::add(&left, &q.a, orders))
}

pub fn ginv(p: &Element, orders: &[BigUint]) -> Element {
    if p.t {
        p.clone()
    } else {
        Element::new(false, coords::neg(&p.a, orders))
    }
}

/// Signed representative of `x` in `(-n/2, n/2]`.
pub fn signed_rep(x: &BigUint, n: &BigUint) -> BigInt {
    let x = BigInt::from(x % n);
    let n = BigInt::from(n.clone());
    if &x * 2 > n {
        x - n
    } else {
        x
    }
}
