//! Small numeric helpers: compensated sums, Poisson masses, fixed formatting.

use statrs::function::gamma::ln_gamma;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        iter.into_iter().for_each(|x| acc.add(x));
        acc
    }
}

pub fn compensated_sum(iter: impl IntoIterator<Item = f64>) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let k = k as f64;
    (k * lambda.ln() - lambda - ln_gamma(k + 1.0)).exp()
}

/// `P(Po(lambda) > k)`, summed directly from `k + 1` upwards.
pub fn poisson_upper_tail(k: u64, lambda: f64) -> f64 {
    let mut acc = CompensatedSum::default();
    let mut j = k + 1;
    let mut term = poisson_pmf(j, lambda);
    // below the mode the terms grow; keep going until they are negligible
    loop {
        acc.add(term);
        j += 1;
        term = poisson_pmf(j, lambda);
        if (j as f64) > lambda && term < 1e-30 * acc.value().max(1e-300) {
            break;
        }
        if term == 0.0 && (j as f64) > lambda {
            break;
        }
    }
    acc.value()
}

/// `P(Po(lambda) < k)`.
pub fn poisson_lower_tail(k: u64, lambda: f64) -> f64 {
    compensated_sum((0..k).map(|j| poisson_pmf(j, lambda)))
}

/// Smallest `k >= lambda` with `P(Po(lambda) > k) < mass`.
pub fn poisson_upper_cut(lambda: f64, mass: f64) -> u64 {
    let mut k = (lambda + 6.0 * lambda.sqrt() + 10.0).ceil() as u64;
    while poisson_upper_tail(k, lambda) >= mass {
        k += (lambda.sqrt().ceil() as u64).max(1);
    }
    k
}

/// Largest `k <= lambda` with `P(Po(lambda) < k) < mass`.
pub fn poisson_lower_cut(lambda: f64, mass: f64) -> u64 {
    let mut k = (lambda - 6.0 * lambda.sqrt() - 10.0).max(0.0).floor() as u64;
    let step = (lambda.sqrt().ceil() as u64).max(1);
    while k > 0 && poisson_lower_tail(k, lambda) >= mass {
        k = k.saturating_sub(step);
    }
    k
}

/// Formats with 12 significant digits: plain notation for moderate
/// magnitudes, trailing zeros trimmed, scientific otherwise.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
