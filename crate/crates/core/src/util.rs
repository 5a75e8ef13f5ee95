use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// `num / den` as an `f64`, accurate for operands of any size.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if den.is_zero() {
        return f64::NAN;
    }
    let shift = den.bits().max(num.bits()).saturating_sub(960);
    let n = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    if d == 0.0 {
        // den was tiny compared with num
        return f64::INFINITY;
    }
    n / d
}

/// `x mod n` as a fraction of `n`, in `[0, 1)`.
pub fn frac(x: &BigUint, n: &BigUint) -> f64 {
    let r = ratio_to_f64(&(x % n), n);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn stddev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// `ceil(log2(x))` for `x >= 1`, and 0 for `x <= 1`.
pub fn ceil_log2(x: &BigUint) -> u64 {
    if x <= &BigUint::from(1u32) {
        return 0;
    }
    (x - 1u32).bits()
}

pub fn ser_biguint<S: serde::Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

pub fn ser_biguints<S: serde::Serializer>(xs: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|x| x.to_string()))
}
