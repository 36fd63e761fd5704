//! Exact and leading-order expectations of component counts in `Q_p^d`.
//!
//! Everything here is a closed form in `(d, p)` and the shape of a class.
//! The [`oracle`] submodule enumerates every subgraph of `Q^d` for `d <= 3`
//! and is the reference these formulas are tested against.

mod oracle;
mod stein_chen;

pub use oracle::{exact_census_oracle, CensusOracle, ExactLaw, OracleOutcome};
pub use stein_chen::{
    joint_component_probability, single_event_probability, stein_chen_terms, stein_chen_terms_capped, SteinChenTerms,
    DEFAULT_STEIN_CHEN_MAX_DIM,
};

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::canonical::CanonicalForm;
use crate::cube::{binomial, check_probability, ln_binomial, m_p};
use crate::error::{Error, Result};

/// Largest `t * d * |ln q|` for which `q^(t d)` is evaluated directly.
const DIRECT_EXPONENT_LIMIT: f64 = 700.0;

/// Expected number of components in one ambient-isomorphism class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassExpectation {
    pub form: CanonicalForm,
    pub e: usize,
    pub e_prime: usize,
    pub s: u32,
    pub expected_count: f64,
    pub beta: f64,
}

/// `(p/q^2)^e q^(-e') 2^(d-s) C(d,s) q^(t d)`, in log space when it would underflow.
fn class_count_value(e: usize, e_prime: usize, s: u32, t: usize, d: u32, p: f64) -> f64 {
    let q = 1.0 - p;
    let exponent = (t as f64) * d as f64 * -q.ln();
    if d <= 62 && exponent <= DIRECT_EXPONENT_LIMIT {
        let embeddings = binomial(d, s).to_f64().unwrap_or(f64::INFINITY) * 2f64.powi((d - s) as i32);
        (p / (q * q)).powi(e as i32) * q.powi(-(e_prime as i32)) * embeddings * q.powi((t as u32 * d) as i32)
    } else {
        let ln = e as f64 * (p / (q * q)).ln() - e_prime as f64 * q.ln()
            + (d - s) as f64 * std::f64::consts::LN_2
            + ln_binomial(d, s)
            + (t as f64) * d as f64 * q.ln();
        ln.exp()
    }
}

pub fn expected_class_count(form: &CanonicalForm, d: u32, p: f64) -> Result<f64> {
    check_probability(p)?;
    if d < form.span() {
        return Err(Error::SpanExceedsDimension { d, span: form.span() });
    }
    Ok(class_count_value(form.num_edges(), form.internal_nonedges(), form.span(), form.size(), d, p))
}

/// `(p/q^2)^e (1/q)^e' / (2^s s!)`.
pub fn beta(form: &CanonicalForm, p: f64) -> f64 {
    let q = 1.0 - p;
    let s = form.span();
    let factorial: f64 = (1..=s).map(f64::from).product();
    (p / (q * q)).powi(form.num_edges() as i32) * q.powi(-(form.internal_nonedges() as i32))
        / (2f64.powi(s as i32) * factorial)
}

/// `d (d-1) ... (d-s+1)`.
pub fn falling_factorial(d: u32, s: u32) -> f64 {
    (0..s).map(|i| (d - i) as f64).product()
}

pub fn class_expectation(form: &CanonicalForm, d: u32, p: f64) -> Result<ClassExpectation> {
    Ok(ClassExpectation {
        form: form.clone(),
        e: form.num_edges(),
        e_prime: form.internal_nonedges(),
        s: form.span(),
        expected_count: expected_class_count(form, d, p)?,
        beta: beta(form, p),
    })
}

/// Exact mean number of components of size `t` for `t <= 3`.
///
/// `t = 3` uses coefficient 1/2, the value obtained by summing the four
/// 3-vertex classes; [`mu3_coefficient_two`] gives the variant with
/// coefficient 2 for side-by-side reporting.
pub fn mu_exact(t: usize, d: u32, p: f64) -> Result<f64> {
    check_probability(p)?;
    let q = 1.0 - p;
    match t {
        1 if d >= 1 => Ok(class_count_value(0, 0, 0, 1, d, p)),
        2 if d >= 2 => Ok(class_count_value(1, 0, 1, 2, d, p)),
        3 if d >= 2 => Ok(mu3_with_coefficient(0.5, d, q)),
        1..=3 => Err(Error::Dimension { d, min: if t == 1 { 1 } else { 2 }, max: u32::MAX }),
        _ => Err(Error::UnsupportedSize(t)),
    }
}

/// `2 (p^2/q^4) d (d-1) (2 q^3)^d`, four times [`mu_exact`] at `t = 3`.
pub fn mu3_coefficient_two(d: u32, p: f64) -> Result<f64> {
    check_probability(p)?;
    Ok(mu3_with_coefficient(2.0, d, 1.0 - p))
}

fn mu3_with_coefficient(coefficient: f64, d: u32, q: f64) -> f64 {
    let p = 1.0 - q;
    let pre = coefficient * (p * p / q.powi(4)) * d as f64 * (d as f64 - 1.0);
    let exponent = 3.0 * d as f64 * -q.ln();
    if exponent <= DIRECT_EXPONENT_LIMIT && d <= 1000 {
        pre * (2.0 * q * q * q).powi(d as i32)
    } else {
        (pre.ln() + d as f64 * (2.0 * q.powi(3)).ln()).exp()
    }
}

/// Leading term `t^(t-2)/t! (p/q^2)^(t-1) d^(t-1) (2 q^t)^d`; the flag is
/// set when `t > m_p`, where the term decays and is rarely meaningful.
pub fn mu_asymptotic(t: usize, d: u32, p: f64) -> Result<(f64, bool)> {
    check_probability(p)?;
    if t == 0 {
        return Err(Error::Invalid("component size must be at least 1".into()));
    }
    let q = 1.0 - p;
    let tf = t as f64;
    let ln_coeff = (tf - 2.0) * tf.ln() - statrs::function::gamma::ln_gamma(tf + 1.0);
    let ln = ln_coeff
        + (tf - 1.0) * (p / (q * q)).ln()
        + (tf - 1.0) * (d as f64).ln()
        + d as f64 * (std::f64::consts::LN_2 + tf * q.ln());
    Ok((ln.exp(), t as u64 > m_p(p)?))
}

/// Leading constant of `E[Y]` for a list of classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassConstant {
    /// Minimum size among the forms.
    pub t: usize,
    /// Maximum span among forms of size `t`.
    pub s: u32,
    /// Indices of forms with size `t` and span `s`.
    pub members: Vec<usize>,
    pub c: f64,
    /// Some form is larger than `m_p`.
    pub beyond_m_p: bool,
}

impl ClassConstant {
    /// `c (d)_s (2 q^t)^d`.
    pub fn leading_term(&self, d: u32, p: f64) -> f64 {
        let q = 1.0 - p;
        let ln = self.c.ln()
            + (0..self.s).map(|i| ((d - i) as f64).ln()).sum::<f64>()
            + d as f64 * (std::f64::consts::LN_2 + self.t as f64 * q.ln());
        ln.exp()
    }
}

pub fn class_constant(forms: &[CanonicalForm], p: f64) -> Result<ClassConstant> {
    check_probability(p)?;
    let t = forms.iter().map(|f| f.size()).min().ok_or(Error::Empty("form list"))?;
    let s = forms.iter().filter(|f| f.size() == t).map(|f| f.span()).max().unwrap_or(0);
    let members: Vec<usize> =
        forms.iter().enumerate().filter(|(_, f)| f.size() == t && f.span() == s).map(|(i, _)| i).collect();
    let c = members.iter().map(|&i| beta(&forms[i], p)).sum();
    let limit = m_p(p)?;
    Ok(ClassConstant { t, s, members, c, beyond_m_p: forms.iter().any(|f| f.size() as u64 > limit) })
}
