//! Hypercube geometry and the scalar quantities that govern `Q_p^d`.
//!
//! Vertices are plain `u64` ids: coordinate `i` (1-based) of a 0-1 vector is
//! bit `i - 1` of the id, so adjacency is a single XOR.

use std::f64::consts::LN_2;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Largest dimension whose vertex ids fit comfortably in a `u64`.
pub const MAX_DIM: u32 = 62;

/// Half-width of the tie band used when deciding `2 q^t >= 1` in floating
/// point, measured on `ln(2 q^t)` and scaled by `t + 1`.
const TIE_BAND: f64 = 1e-12;

/// Above this estimate the exact rational test for `m_p` would build
/// numbers with millions of digits; the guarded float test is used instead.
const EXACT_MP_LIMIT: u64 = 20_000;

/// Dimension and edge probability of a random cube subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    d: u32,
    p: f64,
    q: f64,
    decimal: Option<BigRational>,
}

impl Params {
    pub fn new(d: u32, p: f64) -> Result<Self> {
        check_dim(d, 2)?;
        check_probability(p)?;
        Ok(Self { d, p, q: 1.0 - p, decimal: None })
    }

    /// Builds parameters from a decimal string such as `"0.25"`. The exact
    /// value is kept for boundary-sensitive computations like [`m_p`].
    pub fn from_decimal(d: u32, p: &str) -> Result<Self> {
        let exact = parse_decimal(p)?;
        let approx = exact.to_f64().ok_or_else(|| Error::ProbabilityParse(p.to_string()))?;
        let mut params = Self::new(d, approx)?;
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        if !exact.is_positive() || exact >= half {
            return Err(Error::Probability(approx));
        }
        params.decimal = Some(exact);
        Ok(params)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn num_vertices(&self) -> u64 {
        1u64 << self.d
    }

    pub fn m_p(&self) -> u64 {
        match &self.decimal {
            Some(exact) => m_p_exact(exact),
            None => m_p(self.p).expect("validated on construction"),
        }
    }
}

pub(crate) fn check_dim(d: u32, min: u32) -> Result<()> {
    if d < min || d > MAX_DIM {
        return Err(Error::Dimension { d, min, max: MAX_DIM });
    }
    Ok(())
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::Probability(p));
    }
    Ok(())
}

/// The `d` neighbours of `v`, ordered by the flipped bit.
pub fn neighbors(v: u64, d: u32) -> Result<Vec<u64>> {
    check_dim(d, 1)?;
    if v >> d != 0 {
        return Err(Error::Vertex { v, d });
    }
    Ok((0..d).map(|i| v ^ (1u64 << i)).collect())
}

pub fn binomial(n: u32, k: u32) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `C(n, k)` as a float, for the log-space paths.
pub(crate) fn ln_binomial(n: u32, k: u32) -> f64 {
    let (n, k) = (n as f64, k as f64);
    statrs::function::gamma::ln_gamma(n + 1.0)
        - statrs::function::gamma::ln_gamma(k + 1.0)
        - statrs::function::gamma::ln_gamma(n - k + 1.0)
}

/// Number of vertices of `Q^d` within Hamming distance `r` of a fixed vertex.
pub fn ball_volume(d: u32, r: u32) -> Result<BigUint> {
    check_dim(d, 0)?;
    if r > d {
        return Err(Error::Radius { r, d });
    }
    Ok((0..=r).map(|k| binomial(d, k)).sum())
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::OpenUnit(x));
    }
    Ok(entropy_unchecked(x))
}

fn entropy_unchecked(x: f64) -> f64 {
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Largest `t` with `2 q^t >= 1`, where `q = 1 - p`.
///
/// Decided on `ln(2 q^t) = ln 2 + t ln(1 - p)`; values inside a narrow band
/// around zero count as ties and are resolved in favour of `t <= m_p`.
pub fn m_p(p: f64) -> Result<u64> {
    check_probability(p)?;
    let ln_q = (-p).ln_1p();
    let holds = |t: u64| LN_2 + t as f64 * ln_q >= -TIE_BAND * (t as f64 + 1.0);
    let mut t = ((LN_2 / -ln_q).floor() as u64).max(1);
    while holds(t + 1) {
        t += 1;
    }
    while t > 1 && !holds(t) {
        t -= 1;
    }
    Ok(t)
}

/// Same as [`m_p`] but decided exactly for a rational `p`: `2 num(q)^t >= den(q)^t`.
pub fn m_p_exact(p: &BigRational) -> u64 {
    let q = BigRational::one() - p;
    let estimate = m_p(p.to_f64().unwrap_or(0.25)).unwrap_or(1);
    if estimate > EXACT_MP_LIMIT {
        return estimate;
    }
    let (num, den) = (q.numer().clone(), q.denom().clone());
    let holds = |t: u64| {
        let t = t as usize;
        num_traits::pow(num.clone(), t) * 2 >= num_traits::pow(den.clone(), t)
    };
    let mut t = estimate.max(1);
    while holds(t + 1) {
        t += 1;
    }
    while t > 1 && !holds(t) {
        t -= 1;
    }
    t
}

/// Parses a plain decimal (`0.25`, `.3`, `1e-2`) into an exact rational.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::ProbabilityParse(s.to_string());
    let s = s.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("0{int_part}{frac_part}").parse().map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Solves `h(eta) = log2(1/q)` on `(0, 1/2)` by bisection.
pub fn eta_star(p: f64, tol: f64) -> Result<f64> {
    check_probability(p)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Invalid(format!("tolerance {tol} must be positive")));
    }
    let target = -(-p).log2_1p();
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        let h = entropy_unchecked(mid);
        if (h - target).abs() <= tol {
            return Ok(mid);
        }
        if h < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < f64::EPSILON * mid {
            break;
        }
    }
    Err(Error::Internal(format!("eta* bisection did not reach tolerance {tol} for p = {p}")))
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / LN_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_examples() {
        assert_eq!(neighbors(0, 3).unwrap(), vec![1, 2, 4]);
        assert_eq!(neighbors(5, 3).unwrap(), vec![4, 7, 1]);
        assert_eq!(neighbors(0, 1).unwrap(), vec![1]);
        assert!(neighbors(8, 3).is_err());
        assert!(neighbors(0, 63).is_err());
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(ball_volume(5, 0).unwrap(), BigUint::from(1u32));
        assert_eq!(ball_volume(5, 2).unwrap(), BigUint::from(16u32));
        assert_eq!(ball_volume(3, 3).unwrap(), BigUint::from(8u32));
        assert_eq!(ball_volume(3, 4), Err(Error::Radius { r: 4, d: 3 }));
        assert_eq!(ball_volume(62, 62).unwrap(), BigUint::one() << 62u32);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert!((binary_entropy(0.25).unwrap() - 0.811278).abs() < 1e-6);
        assert_eq!(binary_entropy(0.25).unwrap(), binary_entropy(0.75).unwrap());
        assert!(binary_entropy(0.0).is_err());
        assert!(binary_entropy(1.0).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn m_p_examples() {
        assert_eq!(m_p(0.25).unwrap(), 2);
        assert_eq!(m_p(0.30).unwrap(), 1);
        assert_eq!(m_p(0.10).unwrap(), 6);
        assert_eq!(m_p(1.0 - std::f64::consts::FRAC_1_SQRT_2).unwrap(), 2);
        assert!(m_p(0.5).is_err());
        assert!(m_p(0.0).is_err());
    }

    #[test]
    fn m_p_exact_agrees_on_decimals() {
        for s in ["0.25", "0.3", "0.1", "0.01", "0.49", "0.001"] {
            let exact = m_p_exact(&parse_decimal(s).unwrap());
            assert_eq!(exact, m_p(s.parse().unwrap()).unwrap(), "p = {s}");
        }
        // 2 * 0.75^2 = 1.125, 2 * 0.75^3 = 0.84375
        assert_eq!(Params::from_decimal(4, "0.25").unwrap().m_p(), 2);
        // q = 1/2^(1/2) is irrational, so the exact tie cannot occur on a
        // decimal, but q^2 = 1/2 exactly for q = 0.5 is excluded by p < 1/2.
        assert!(Params::from_decimal(4, "0.5").is_err());
    }

    #[test]
    fn parse_decimal_forms() {
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(parse_decimal("0.25").unwrap(), r(1, 4));
        assert_eq!(parse_decimal(".3").unwrap(), r(3, 10));
        assert_eq!(parse_decimal("1e-2").unwrap(), r(1, 100));
        assert_eq!(parse_decimal("25E-2").unwrap(), r(1, 4));
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("-0.1").is_err());
        assert!(parse_decimal(".").is_err());
    }

    #[test]
    fn eta_star_examples() {
        let eta = eta_star(0.25, 1e-12).unwrap();
        assert!((eta - 0.08).abs() <= 0.005);
        let eta = eta_star(0.25, 1e-9).unwrap();
        let target = (4.0f64 / 3.0).log2();
        assert!((binary_entropy(eta).unwrap() - target).abs() <= 1e-9);
        assert!(eta_star(1e-6, 1e-12).unwrap() < eta_star(1e-3, 1e-12).unwrap());
        assert!(eta_star(0.25, 0.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(1, 0.25).is_err());
        assert!(Params::new(63, 0.25).is_err());
        assert!(Params::new(10, 0.5).is_err());
        let params = Params::new(10, 0.3).unwrap();
        assert_eq!(params.q(), 1.0 - 0.3);
        assert_eq!(params.num_vertices(), 1024);
    }
}
