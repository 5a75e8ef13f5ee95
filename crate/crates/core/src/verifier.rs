//! Exact dense simulation at small `N`, used to check the phase backend and
//! the spliced-oracle distance law. Nothing in the sieves calls into this.
//!
//! Basis order for `C[D_N]`: `|x^b>` is index `b`, `|y x^b>` is index `N + b`.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::Rng;

use crate::error::{Error, Result};
use crate::group::Element;
use crate::oracle::{HidingOracle, OracleValue};

/// Largest `N` the dense routines accept.
pub const DENSE_LIMIT: usize = 1 << 10;

fn omega(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    pub amps: DVector<Complex64>,
}

impl PureState {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let v = DVector::from_vec(amps);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero vector".into()));
        }
        Ok(PureState { amps: v / Complex64::new(norm, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self.amps.dotc(&other.amps).norm_sqr())
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix { m: &self.amps * self.amps.adjoint() }
    }
}

/// `(|0> + e^(2 pi i k s / N)|1>)/sqrt 2`.
pub fn phase_qubit_state(k: u64, s: u64, n: u64) -> PureState {
    let ph = ((k as u128 * s as u128) % n as u128) as f64 / n as f64;
    PureState::new(vec![Complex64::new(1.0, 0.0), omega(ph)]).expect("nonzero")
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub m: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.m - self.m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.m + self.m.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().collect()
    }

    /// Checks unit trace, Hermiticity and positivity within `tol`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidArgument(format!("trace {tr}")));
        }
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::InvalidArgument(format!("hermiticity error {herm}")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::InvalidArgument(format!("negative eigenvalue {min}")));
        }
        Ok(())
    }

    /// `P rho P^dagger` for a permutation of the basis (`perm[i]` is the image of `i`).
    pub fn permuted(&self, perm: &[usize]) -> DensityMatrix {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(perm[i], perm[j])] = self.m[(i, j)];
            }
        }
        DensityMatrix { m }
    }
}

fn check_n(n: u64) -> Result<usize> {
    let nu = n as usize;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    if nu > DENSE_LIMIT {
        return Err(Error::DimensionTooLarge { dim: 2 * nu, limit: 2 * DENSE_LIMIT });
    }
    Ok(nu)
}

/// `(|x^a> + |y x^(s+a)>)/sqrt 2`.
pub fn coset_state(n: u64, s: u64, a: u64) -> Result<PureState> {
    let nu = check_n(n)?;
    if s >= n || a >= n {
        return Err(Error::InvalidArgument("s and a must be below N".into()));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); 2 * nu];
    v[a as usize] = Complex64::new(1.0, 0.0);
    v[nu + ((s + a) % n) as usize] = Complex64::new(1.0, 0.0);
    PureState::new(v)
}

/// Uniform mixture of the `N` coset states of `<y x^s>`.
pub fn rho_coset_mixture(n: u64, s: u64) -> Result<DensityMatrix> {
    let nu = check_n(n)?;
    let mut m = DMatrix::zeros(2 * nu, 2 * nu);
    for a in 0..n {
        m += coset_state(n, s, a)?.projector().m;
    }
    Ok(DensityMatrix { m: m / Complex64::new(n as f64, 0.0) })
}

/// The state left after querying `o` on a uniform superposition over
/// `D_N` and discarding the output: a mixture of uniform states on the
/// level sets of `o`. Evaluations are not counted as queries.
pub fn rho_from_oracle(o: &HidingOracle) -> Result<DensityMatrix> {
    let n = o.modulus()?.to_u64().ok_or_else(|| Error::Unsupported("N too large".into()))?;
    let nu = check_n(n)?;
    let mut fibres: HashMap<OracleValue, Vec<usize>> = HashMap::new();
    for t in [false, true] {
        for b in 0..n {
            let v = o.evaluate_uncounted(&Element::new(t, vec![BigUint::from(b)]));
            fibres.entry(v).or_default().push(if t { nu + b as usize } else { b as usize });
        }
    }
    let w = Complex64::new(1.0 / (2 * nu) as f64, 0.0);
    let mut m = DMatrix::zeros(2 * nu, 2 * nu);
    for idx in fibres.values() {
        for &i in idx {
            for &j in idx {
                m[(i, j)] += w;
            }
        }
    }
    Ok(DensityMatrix { m })
}

/// Apply `F_N` to the rotation register of a coset state and return, for
/// each `k`, the probability and the (unnormalized) residual on the flag qubit.
fn qft_branches(n: u64, s: u64, a: u64) -> Result<Vec<(f64, [Complex64; 2])>> {
    let psi = coset_state(n, s, a)?;
    let nu = n as usize;
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(nu);
    for k in 0..n {
        let mut r = [Complex64::new(0.0, 0.0); 2];
        for (t, slot) in r.iter_mut().enumerate() {
            for b in 0..n {
                let amp = psi.amps[t * nu + b as usize];
                if amp.norm_sqr() > 0.0 {
                    *slot += amp * omega(((k * b) % n) as f64 / n as f64) * scale;
                }
            }
        }
        let p = r[0].norm_sqr() + r[1].norm_sqr();
        out.push((p, r));
    }
    Ok(out)
}

/// Exact `P(k)` and residual for every `k`, for coset representative `a`.
pub fn qft_measure_law(n: u64, s: u64, a: u64) -> Result<Vec<(f64, PureState)>> {
    qft_branches(n, s, a)?
        .into_iter()
        .map(|(p, r)| Ok((p, PureState::new(r.to_vec())?)))
        .collect()
}

/// Sample `(k, residual)` from `F_N` applied to the coset mixture.
pub fn qft_measure_sim<R: Rng + ?Sized>(n: u64, s: u64, rng: &mut R) -> Result<(u64, PureState)> {
    check_n(n)?;
    let a = rng.gen_range(0..n);
    let law = qft_measure_law(n, s, a)?;
    let mut u: f64 = rng.gen();
    let last = law.len() - 1;
    for (k, (p, st)) in law.into_iter().enumerate() {
        if u < p || k == last {
            return Ok((k as u64, st));
        }
        u -= p;
    }
    unreachable!()
}

/// CNOT `psi_k (x) psi_l` and measure the target. Returns the probability
/// and residual for outcomes 0 and 1.
pub fn extract_law(k: u64, l: u64, s: u64, n: u64) -> [(f64, PureState); 2] {
    let a = phase_qubit_state(k, s, n).amps;
    let b = phase_qubit_state(l, s, n).amps;
    // |ab> -> |a, a xor b>
    let mut joint = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            joint[i][i ^ j] += a[i] * b[j];
        }
    }
    let branch = |o: usize| {
        let r = vec![joint[0][o], joint[1][o]];
        let p = r.iter().map(|z| z.norm_sqr()).sum();
        (p, PureState::new(r).expect("both branches have weight"))
    };
    [branch(0), branch(1)]
}

pub fn extract_sim<R: Rng + ?Sized>(k: u64, l: u64, s: u64, n: u64, rng: &mut R) -> (bool, PureState) {
    let [(p0, r0), (_, r1)] = extract_law(k, l, s, n);
    if rng.gen::<f64>() < p0 {
        (false, r0)
    } else {
        (true, r1)
    }
}

fn eig_abs_sum(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch(r1.dim(), r2.dim()));
    }
    let d = DensityMatrix { m: &r1.m - &r2.m };
    Ok(d.eigenvalues().iter().map(|x| x.abs()).sum())
}

/// `||r1 - r2||_1`, the sum of absolute eigenvalues of the difference.
pub fn trace_norm(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    eig_abs_sum(r1, r2)
}

/// Half the trace norm: the best bias any measurement achieves between the two states.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    Ok(eig_abs_sum(r1, r2)? / 2.0)
}

/// Basis permutation for left multiplication by `y^t x^b` on `D_N`.
pub fn left_mult_permutation(n: u64, t: bool, b: u64) -> Vec<usize> {
    let nu = n as usize;
    let mut perm = vec![0; 2 * nu];
    for t2 in [false, true] {
        for b2 in 0..n {
            // (t, b)(t2, b2) = (t ^ t2, (-1)^t2 b + b2)
            let nb = if t2 { (n - b % n + b2) % n } else { (b + b2) % n };
            let src = if t2 { nu + b2 as usize } else { b2 as usize };
            let dst = if t ^ t2 { nu + nb as usize } else { nb as usize };
            perm[src] = dst;
        }
    }
    perm
}

/// The two-dimensional representation `V_k`: images of `x` and `y`.
pub fn v_k(k: u64, n: u64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let w = omega((k % n) as f64 / n as f64);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let x = DMatrix::from_row_slice(2, 2, &[w, zero, zero, w.conj()]);
    let y = DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]);
    (x, y)
}
