//! Statistical checks of sampled counts against Poisson and normal limits.
//!
//! Samples are held as histograms with exact integer moments, so every
//! derived number is a deterministic function of the counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::numeric::{
    compensated_sum, poisson_lower_cut, poisson_lower_tail, poisson_pmf, poisson_upper_cut, poisson_upper_tail,
};

mod experiment;

pub use experiment::*;

/// Poisson mass beyond the compared range, folded into the distance.
pub const POISSON_FOLD_MASS: f64 = 1e-12;

/// Product-Poisson mass the joint comparison box must hold.
pub const JOINT_BOX_MASS: f64 = 1e-6;

pub const KS_MIN_SAMPLES: u64 = 100;
pub const LOCAL_LIMIT_MIN_POINTS: usize = 20;
pub const LOCAL_LIMIT_MIN_EXPECTED: f64 = 50.0;

/// Multiset of non-negative integers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Histogram(pub BTreeMap<u64, u64>);

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: &[u64]) -> Self {
        let mut h = Self::new();
        samples.iter().for_each(|&x| h.add(x));
        h
    }

    pub fn add(&mut self, x: u64) {
        *self.0.entry(x).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (&x, &c) in &other.0 {
            *self.0.entry(x).or_insert(0) += c;
        }
    }

    pub fn n(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn count(&self, x: u64) -> u64 {
        self.0.get(&x).copied().unwrap_or(0)
    }

    pub fn min(&self) -> Option<u64> {
        self.0.keys().next().copied()
    }

    pub fn max(&self) -> Option<u64> {
        self.0.keys().next_back().copied()
    }

    fn sums(&self) -> (u128, u128) {
        self.0.iter().fold((0, 0), |(s, s2), (&x, &c)| {
            let (x, c) = (x as u128, c as u128);
            (s + x * c, s2 + x * x * c)
        })
    }

    pub fn mean(&self) -> Option<f64> {
        let n = self.n();
        (n > 0).then(|| self.sums().0 as f64 / n as f64)
    }

    /// Unbiased sample variance, from exact integer sums.
    pub fn variance(&self) -> Option<f64> {
        let n = self.n() as u128;
        if n < 2 {
            return None;
        }
        let (s, s2) = self.sums();
        Some((n * s2 - s * s) as f64 / (n * (n - 1)) as f64)
    }

    pub fn std_error(&self) -> Option<f64> {
        Some((self.variance()? / self.n() as f64).sqrt())
    }

    /// Fraction of samples satisfying `pred`, with its binomial standard error.
    pub fn fraction(&self, pred: impl Fn(u64) -> bool) -> Option<(f64, f64)> {
        let n = self.n();
        if n == 0 {
            return None;
        }
        let hits: u64 = self.0.iter().filter(|(&x, _)| pred(x)).map(|(_, &c)| c).sum();
        let f = hits as f64 / n as f64;
        Some((f, (f * (1.0 - f) / n as f64).sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub tv: f64,
    /// `sqrt(#support / n) / 2`: the scale of plug-in bias.
    pub bias_bound: f64,
}

pub fn empirical_tv_to_poisson(samples: &Histogram, lambda: f64) -> Result<TvEstimate> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Invalid(format!("Poisson mean {lambda} must be positive")));
    }
    let n = samples.n();
    if n == 0 {
        return Err(Error::Empty("sample"));
    }
    let top = poisson_upper_cut(lambda, POISSON_FOLD_MASS).max(samples.max().unwrap_or(0));
    let nf = n as f64;
    let diffs = (0..=top).map(|k| (samples.count(k) as f64 / nf - poisson_pmf(k, lambda)).abs());
    let tv = 0.5 * compensated_sum(diffs) + 0.5 * poisson_upper_tail(top, lambda);
    let support = samples.0.len() as f64;
    Ok(TvEstimate { tv: tv.min(1.0), bias_bound: (support / nf).sqrt() / 2.0 })
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// KS distance between the sample (value, multiplicity) pairs and `N(0, 1)`.
fn ks_sorted(points: impl Iterator<Item = (f64, u64)>, n: u64) -> f64 {
    let nf = n as f64;
    let mut below = 0u64;
    let mut d = 0.0f64;
    for (z, c) in points {
        let phi = normal_cdf(z);
        d = d.max((below as f64 / nf - phi).abs());
        below += c;
        d = d.max((below as f64 / nf - phi).abs());
    }
    d
}

/// One-sample KS distance of already standardized samples to `N(0, 1)`.
pub fn ks_normal_check(samples: &[f64]) -> Result<f64> {
    if (samples.len() as u64) < KS_MIN_SAMPLES {
        return Err(Error::Undersized(format!(
            "KS check needs at least {KS_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Invalid("NaN sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::ZeroVariance);
    }
    Ok(ks_sorted(sorted.into_iter().map(|z| (z, 1)), samples.len() as u64))
}

/// KS distance of `(x - mean) / sd` over a histogram to `N(0, 1)`.
pub fn ks_normal_histogram(samples: &Histogram, mean: f64, sd: f64) -> Result<f64> {
    let n = samples.n();
    if n < KS_MIN_SAMPLES {
        return Err(Error::Undersized(format!("KS check needs at least {KS_MIN_SAMPLES} samples, got {n}")));
    }
    if sd.is_nan() || sd <= 0.0 || samples.0.len() < 2 {
        return Err(Error::ZeroVariance);
    }
    Ok(ks_sorted(samples.0.iter().map(|(&x, &c)| ((x as f64 - mean) / sd, c)), n))
}

/// Joint law of tuples `(Y_1, ..., Y_r)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JointHistogram(pub BTreeMap<Vec<u64>, u64>);

#[derive(Serialize, Deserialize)]
struct JointCell {
    values: Vec<u64>,
    count: u64,
}

impl Serialize for JointHistogram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let cells: Vec<JointCell> = self.0.iter().map(|(v, &c)| JointCell { values: v.clone(), count: c }).collect();
        cells.serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointHistogram {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let cells = Vec::<JointCell>::deserialize(d)?;
        let mut h = BTreeMap::new();
        for cell in cells {
            *h.entry(cell.values).or_insert(0) += cell.count;
        }
        Ok(Self(h))
    }
}

impl JointHistogram {
    pub fn from_samples(samples: &[Vec<u64>]) -> Self {
        let mut h = Self::default();
        samples.iter().for_each(|s| h.add(s.clone()));
        h
    }

    pub fn add(&mut self, tuple: Vec<u64>) {
        *self.0.entry(tuple).or_insert(0) += 1;
    }

    pub fn n(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn arity(&self) -> Option<usize> {
        self.0.keys().next().map(Vec::len)
    }

    pub fn marginal(&self, j: usize) -> Histogram {
        let mut h = Histogram::new();
        for (v, &c) in &self.0 {
            *h.0.entry(v[j]).or_insert(0) += c;
        }
        h
    }

    /// Pearson correlation of coordinates `a` and `b`; `None` if either is constant.
    pub fn correlation(&self, a: usize, b: usize) -> Option<f64> {
        let n = self.n() as i128;
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0i128, 0i128, 0i128, 0i128, 0i128);
        for (v, &c) in &self.0 {
            let (x, y, c) = (v[a] as i128, v[b] as i128, c as i128);
            sa += x * c;
            sb += y * c;
            saa += x * x * c;
            sbb += y * y * c;
            sab += x * y * c;
        }
        let va = n * saa - sa * sa;
        let vb = n * sbb - sb * sb;
        if va == 0 || vb == 0 {
            return None;
        }
        Some((n * sab - sa * sb) as f64 / ((va as f64).sqrt() * (vb as f64).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub a: usize,
    pub b: usize,
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCheck {
    pub tv: f64,
    pub bias_bound: f64,
    /// Per-coordinate `[lo, hi]` holding all but `JOINT_BOX_MASS` of the product law.
    pub box_bounds: Vec<[u64; 2]>,
    pub correlations: Vec<PairCorrelation>,
}

pub fn joint_product_poisson_check(samples: &JointHistogram, lambdas: &[f64]) -> Result<JointCheck> {
    let r = lambdas.len();
    if r < 2 {
        return Err(Error::Invalid("joint check needs at least two coordinates".into()));
    }
    if let Some(bad) = lambdas.iter().find(|&&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::Invalid(format!("Poisson mean {bad} must be positive")));
    }
    let n = samples.n();
    if n == 0 {
        return Err(Error::Empty("sample"));
    }
    if samples.arity() != Some(r) || samples.0.keys().any(|k| k.len() != r) {
        return Err(Error::Invalid(format!("tuples do not all have {r} coordinates")));
    }
    let per_coordinate = JOINT_BOX_MASS / (2.0 * r as f64);
    let box_bounds: Vec<[u64; 2]> =
        lambdas.iter().map(|&l| [poisson_lower_cut(l, per_coordinate), poisson_upper_cut(l, per_coordinate)]).collect();
    let inside_marginals: Vec<f64> = lambdas
        .iter()
        .zip(&box_bounds)
        .map(|(&l, &[lo, hi])| 1.0 - poisson_lower_tail(lo, l) - poisson_upper_tail(hi, l))
        .collect();
    let inside: f64 = inside_marginals.iter().product();
    if inside < 1.0 - JOINT_BOX_MASS {
        return Err(Error::Invalid(format!("comparison box holds product mass {inside}, below 1 - {JOINT_BOX_MASS}")));
    }
    // sum over the box of |phat - pi| = inside + sum over observed cells in
    // the box of (|phat - pi| - pi); cells outside contribute phat
    let nf = n as f64;
    let mut correction = Vec::new();
    let mut outside_empirical = Vec::new();
    for (v, &c) in &samples.0 {
        let phat = c as f64 / nf;
        if v.iter().zip(&box_bounds).all(|(&x, &[lo, hi])| lo <= x && x <= hi) {
            let pi: f64 = v.iter().zip(lambdas).map(|(&x, &l)| poisson_pmf(x, l)).product();
            correction.push((phat - pi).abs() - pi);
        } else {
            outside_empirical.push(phat);
        }
    }
    let box_sum = inside + compensated_sum(correction);
    let tv = 0.5 * (box_sum + compensated_sum(outside_empirical) + (1.0 - inside));
    let mut correlations = Vec::new();
    for a in 0..r {
        for b in a + 1..r {
            correlations.push(PairCorrelation { a, b, correlation: samples.correlation(a, b) });
        }
    }
    Ok(JointCheck {
        tv: tv.clamp(0.0, 1.0),
        bias_bound: (samples.0.len() as f64 / nf).sqrt() / 2.0,
        box_bounds,
        correlations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLimit {
    pub window: [u64; 2],
    pub points: usize,
    pub max_deviation: f64,
    /// Lattice point where the maximum is attained.
    pub argmax: u64,
    /// Monte Carlo standard error of `phat / pi` at `argmax`.
    pub std_error: f64,
}

/// Max over integers `|nu - mu| <= c sqrt(mu)` of `|phat(nu) / Po(mu)(nu) - 1|`.
pub fn local_limit_check(samples: &Histogram, mu: f64, c: f64) -> Result<LocalLimit> {
    if !(mu > 0.0 && c > 0.0) {
        return Err(Error::Invalid(format!("local limit needs mu > 0 and c > 0, got {mu}, {c}")));
    }
    let n = samples.n();
    let half = c * mu.sqrt();
    let lo = (mu - half).max(0.0).ceil() as u64;
    let hi = (mu + half).floor() as u64;
    let points = if hi >= lo { (hi - lo + 1) as usize } else { 0 };
    if points < LOCAL_LIMIT_MIN_POINTS {
        return Err(Error::Undersized(format!(
            "window [{lo}, {hi}] holds {points} lattice points, need {LOCAL_LIMIT_MIN_POINTS}"
        )));
    }
    let nf = n as f64;
    let smallest = (lo..=hi).map(|k| nf * poisson_pmf(k, mu)).fold(f64::INFINITY, f64::min);
    if smallest < LOCAL_LIMIT_MIN_EXPECTED {
        return Err(Error::Undersized(format!(
            "{n} samples give expected count {smallest:.1} in the window, need {LOCAL_LIMIT_MIN_EXPECTED}"
        )));
    }
    let mut best = (0.0f64, lo, 0.0f64);
    for k in lo..=hi {
        let pi = poisson_pmf(k, mu);
        let dev = (samples.count(k) as f64 / (nf * pi) - 1.0).abs();
        if dev > best.0 {
            best = (dev, k, ((1.0 - pi) / (nf * pi)).sqrt());
        }
    }
    if best.2 == 0.0 {
        let pi = poisson_pmf(lo, mu);
        best.2 = ((1.0 - pi) / (nf * pi)).sqrt();
    }
    Ok(LocalLimit { window: [lo, hi], points, max_deviation: best.0, argmax: best.1, std_error: best.2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erfc_inv;

    #[test]
    fn histogram_moments_are_exact() {
        let h = Histogram::from_samples(&[1, 2, 3, 4]);
        assert_eq!(h.n(), 4);
        assert_eq!(h.mean(), Some(2.5));
        assert!((h.variance().unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(h.fraction(|x| x >= 3).unwrap().0, 0.5);
        assert_eq!(Histogram::new().mean(), None);
        assert_eq!(Histogram::from_samples(&[7]).variance(), None);
    }

    #[test]
    fn tv_examples() {
        let zeros = Histogram::from_samples(&[0; 10]);
        assert!(empirical_tv_to_poisson(&zeros, 1e-9).unwrap().tv < 1e-8);
        let c = 4;
        let point = Histogram::from_samples(&[c; 50]);
        let tv = empirical_tv_to_poisson(&point, c as f64).unwrap().tv;
        assert!((tv - (1.0 - poisson_pmf(c, c as f64))).abs() < 1e-12);
        assert!(empirical_tv_to_poisson(&point, 0.0).is_err());
        assert!(empirical_tv_to_poisson(&Histogram::new(), 1.0).is_err());
    }

    #[test]
    fn ks_examples() {
        let n = 1000;
        let quantiles: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
            })
            .collect();
        assert!(ks_normal_check(&quantiles).unwrap() <= 0.002);
        assert_eq!(ks_normal_check(&[1.0; 200]), Err(Error::ZeroVariance));
        assert!(matches!(ks_normal_check(&[0.0, 1.0]), Err(Error::Undersized(_))));
        let h = Histogram::from_samples(&[5; 200]);
        assert_eq!(ks_normal_histogram(&h, 5.0, 0.0), Err(Error::ZeroVariance));
    }

    #[test]
    fn correlated_tuples_are_detected() {
        let samples: Vec<Vec<u64>> = (0..2000u64).map(|i| vec![i % 7, i % 7]).collect();
        let h = JointHistogram::from_samples(&samples);
        let check = joint_product_poisson_check(&h, &[3.0, 3.0]).unwrap();
        assert!((check.correlations[0].correlation.unwrap() - 1.0).abs() < 1e-12);
        assert!(check.tv > 0.5);
        assert!(joint_product_poisson_check(&h, &[3.0]).is_err());
        assert!(joint_product_poisson_check(&h, &[3.0, 3.0, 3.0]).is_err());
    }

    #[test]
    fn joint_histogram_json_round_trip() {
        let h = JointHistogram::from_samples(&[vec![1, 2], vec![1, 2], vec![0, 5]]);
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(json, r#"[{"values":[0,5],"count":1},{"values":[1,2],"count":2}]"#);
        assert_eq!(serde_json::from_str::<JointHistogram>(&json).unwrap(), h);
    }

    #[test]
    fn local_limit_refuses_small_windows() {
        let h = Histogram::from_samples(&[100; 10]);
        assert!(matches!(local_limit_check(&h, 100.0, 1.0), Err(Error::Undersized(_))));
        assert!(matches!(local_limit_check(&h, 4.0, 1.0), Err(Error::Undersized(_))));
    }
}
