//! Brute-force law of the full component census of `Q_p^d` for `d <= 3`.
//!
//! Every edge subset of the cube is visited once and weighted by
//! `p^present q^absent`; all laws are then read off the weighted outcomes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::canonical::{CanonicalForm, CubeSubgraph};
use crate::cube::check_probability;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, poisson_pmf, poisson_upper_cut, poisson_upper_tail, CompensatedSum};

const ORACLE_MAX_DIM: u32 = 3;

/// Poisson tail mass below which the comparison range is truncated.
const POISSON_TAIL_CUT: f64 = 1e-15;

/// A probability law over outcomes `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactLaw<K: Ord> {
    pub d: u32,
    pub probabilities: BTreeMap<K, f64>,
}

impl<K: Ord> ExactLaw<K> {
    pub fn total(&self) -> f64 {
        compensated_sum(self.probabilities.values().copied())
    }

    pub fn probability(&self, k: &K) -> f64 {
        self.probabilities.get(k).copied().unwrap_or(0.0)
    }
}

impl ExactLaw<u64> {
    pub fn mean(&self) -> f64 {
        compensated_sum(self.probabilities.iter().map(|(&k, &pr)| k as f64 * pr))
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        compensated_sum(self.probabilities.iter().map(|(&k, &pr)| {
            let dev = k as f64 - mean;
            dev * dev * pr
        }))
    }

    /// Total variation distance to `Po(lambda)`. The Poisson tail beyond the
    /// compared range (mass below 1e-15) is added in full.
    pub fn tv_to_poisson(&self, lambda: f64) -> f64 {
        let max_support = self.probabilities.keys().next_back().copied().unwrap_or(0);
        let top = poisson_upper_cut(lambda, POISSON_TAIL_CUT).max(max_support);
        let mut acc = CompensatedSum::default();
        for k in 0..=top {
            acc.add((self.probability(&k) - poisson_pmf(k, lambda)).abs());
        }
        0.5 * acc.value() + poisson_upper_tail(top, lambda)
    }
}

/// One edge subset of the cube with its probability and components.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub probability: f64,
    /// Components ordered by their smallest vertex.
    pub components: Vec<CubeSubgraph>,
    /// Index of the largest component; ties go to the smallest vertex.
    pub giant: usize,
}

impl OracleOutcome {
    pub fn count_of_size(&self, t: usize) -> u64 {
        self.components.iter().filter(|c| c.size() == t).count() as u64
    }

    pub fn num_components(&self) -> u64 {
        self.components.len() as u64
    }

    pub fn largest(&self) -> u64 {
        self.components[self.giant].size() as u64
    }

    pub fn second_largest(&self) -> u64 {
        self.components
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.giant)
            .map(|(_, c)| c.size() as u64)
            .max()
            .unwrap_or(0)
    }

    pub fn fragment_size(&self) -> u64 {
        let total: u64 = self.components.iter().map(|c| c.size() as u64).sum();
        total - self.largest()
    }

    /// Number of components (giant included) ambient-isomorphic to `form`.
    pub fn class_count(&self, form: &CanonicalForm) -> u64 {
        self.components.iter().filter(|c| c.size() == form.size() && &c.canonical_copy() == form).count() as u64
    }

    /// `sum_i w_i Y_i` over the listed forms.
    pub fn weighted_count(&self, forms: &[CanonicalForm], weights: Option<&[u64]>) -> u64 {
        self.components
            .iter()
            .filter_map(|c| {
                let form = c.canonical_copy();
                forms.iter().position(|f| *f == form).map(|i| weights.map_or(1, |w| w[i]))
            })
            .sum()
    }

    /// `(X_1, ..., X_{2^d})`.
    pub fn size_counts(&self, d: u32) -> Vec<u64> {
        (1..=(1usize << d)).map(|t| self.count_of_size(t)).collect()
    }
}

/// Weighted list of every outcome of `Q_p^d`.
#[derive(Debug, Clone)]
pub struct CensusOracle {
    d: u32,
    p: f64,
    outcomes: Vec<OracleOutcome>,
}

pub fn exact_census_oracle(d: u32, p: f64) -> Result<CensusOracle> {
    CensusOracle::new(d, p)
}

impl CensusOracle {
    pub fn new(d: u32, p: f64) -> Result<Self> {
        if d == 0 || d > ORACLE_MAX_DIM {
            return Err(Error::Dimension { d, min: 1, max: ORACLE_MAX_DIM });
        }
        check_probability(p)?;
        let q = 1.0 - p;
        let n = 1u64 << d;
        let cube_edges: Vec<(u64, u64)> =
            (0..n).flat_map(|v| (0..d).map(move |i| (v, v ^ (1 << i)))).filter(|&(a, b)| a < b).collect();
        let m = cube_edges.len() as u32;
        let outcomes = (0u64..(1 << m))
            .map(|subset| {
                let present: Vec<(u64, u64)> =
                    cube_edges.iter().enumerate().filter(|(k, _)| subset >> k & 1 == 1).map(|(_, &e)| e).collect();
                let k = present.len() as i32;
                let probability = p.powi(k) * q.powi(m as i32 - k);
                let components = split_components(d, &present);
                let giant = giant_index(&components);
                OracleOutcome { probability, components, giant }
            })
            .collect();
        Ok(Self { d, p, outcomes })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn outcomes(&self) -> &[OracleOutcome] {
        &self.outcomes
    }

    pub fn law<K: Ord>(&self, f: impl Fn(&OracleOutcome) -> K) -> ExactLaw<K> {
        let mut acc: BTreeMap<K, CompensatedSum> = BTreeMap::new();
        for o in &self.outcomes {
            acc.entry(f(o)).or_default().add(o.probability);
        }
        ExactLaw { d: self.d, probabilities: acc.into_iter().map(|(k, s)| (k, s.value())).collect() }
    }

    pub fn expectation(&self, f: impl Fn(&OracleOutcome) -> f64) -> f64 {
        compensated_sum(self.outcomes.iter().map(|o| f(o) * o.probability))
    }

    pub fn variance(&self, f: impl Fn(&OracleOutcome) -> f64) -> f64 {
        let mean = self.expectation(&f);
        self.expectation(|o| {
            let dev = f(o) - mean;
            dev * dev
        })
    }

    /// Joint law of `(X_1, ..., X_{2^d})`.
    pub fn size_counts_law(&self) -> ExactLaw<Vec<u64>> {
        self.law(|o| o.size_counts(self.d))
    }

    pub fn size_law(&self, t: usize) -> ExactLaw<u64> {
        self.law(|o| o.count_of_size(t))
    }

    pub fn component_count_law(&self) -> ExactLaw<u64> {
        self.law(OracleOutcome::num_components)
    }

    pub fn fragment_size_law(&self) -> ExactLaw<u64> {
        self.law(OracleOutcome::fragment_size)
    }

    pub fn second_largest_law(&self) -> ExactLaw<u64> {
        self.law(OracleOutcome::second_largest)
    }

    pub fn class_law(&self, form: &CanonicalForm) -> ExactLaw<u64> {
        self.law(|o| o.class_count(form))
    }

    /// Law of `sum_i w_i Y_i` over the listed forms.
    pub fn weighted_class_law(&self, forms: &[CanonicalForm], weights: Option<&[u64]>) -> ExactLaw<u64> {
        self.law(|o| o.weighted_count(forms, weights))
    }
}

fn split_components(d: u32, edges: &[(u64, u64)]) -> Vec<CubeSubgraph> {
    let n = 1usize << d;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    type Part = (Vec<u64>, Vec<(u64, u64)>);
    let mut groups: BTreeMap<usize, Part> = BTreeMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().0.push(v as u64);
    }
    for &(a, b) in edges {
        let r = find(&mut parent, a as usize);
        groups.get_mut(&r).expect("root exists").1.push((a, b));
    }
    // roots are minimum vertices, so BTreeMap order is order of smallest vertex
    groups
        .into_values()
        .map(|(vs, mut es)| {
            es.sort_unstable();
            CubeSubgraph::from_parts_unchecked(d, vs, es)
        })
        .collect()
}

fn giant_index(components: &[CubeSubgraph]) -> usize {
    let mut best = 0;
    for (i, c) in components.iter().enumerate() {
        if c.size() > components[best].size() {
            best = i;
        }
    }
    best
}
