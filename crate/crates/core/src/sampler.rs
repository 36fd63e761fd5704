//! Seed-deterministic sampling of `Q_p^d` and its component census.
//!
//! No edge list is ever stored. Whether an edge is present is a pure function
//! of `(master_seed, trial_index, lower endpoint, dimension)`:
//!
//! ```text
//! mix64(z)      = SplitMix64 finalizer
//! trial_key     = mix64(master_seed ^ mix64(trial_index ^ 0x9E3779B97F4A7C15))
//! edge_hash     = mix64(mix64(trial_key ^ lo) ^ dim)
//! present       = edge_hash < floor(p * 2^64)
//! ```
//!
//! where `lo = min(v, v ^ 2^dim)`. Any implementation following these lines
//! reproduces the same graphs bit for bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bitset::{or_flipped, BitSet};
use crate::canonical::{CanonicalForm, ClassCatalog, CubeSubgraph};
use crate::cube::{check_dim, Params};
use crate::error::{Error, Result};

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Default largest dimension the census accepts (about 3 * 2^30 bits of state).
pub const DEFAULT_MAX_CENSUS_DIM: u32 = 30;

/// Default size above which fragment components are only tallied.
pub const DEFAULT_FRAGMENT_STORE_CAP: usize = 64;

/// Default largest fragment for the pairwise ball statistic.
pub const DEFAULT_PAIRWISE_CAP: usize = 20_000;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial key derived from the master seed.
#[inline]
pub fn trial_key(master_seed: u64, trial_index: u64) -> u64 {
    mix64(master_seed ^ mix64(trial_index ^ GOLDEN_GAMMA))
}

#[inline]
pub fn edge_hash(key: u64, lo: u64, dim: u32) -> u64 {
    mix64(mix64(key ^ lo) ^ dim as u64)
}

/// `floor(p * 2^64)` for `p` in `[0, 1]`; `2^64` means every edge is present.
pub fn edge_threshold(p: f64) -> Result<u128> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Invalid(format!("edge probability {p} outside [0, 1]")));
    }
    // scaling by a power of two is exact
    Ok((p * 18_446_744_073_709_551_616.0).floor() as u128)
}

/// Everything that determines one sampled graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    d: u32,
    p: f64,
    threshold: u128,
    master_seed: u64,
    trial_index: u64,
    key: u64,
}

impl SampleSpec {
    pub fn new(params: &Params, master_seed: u64, trial_index: u64) -> Self {
        Self::with_probability(params.d(), params.p(), master_seed, trial_index).expect("validated parameters")
    }

    /// Accepts any `p` in `[0, 1]` and `1 <= d <= 62`, for exploration
    /// outside the `p < 1/2` regime.
    pub fn with_probability(d: u32, p: f64, master_seed: u64, trial_index: u64) -> Result<Self> {
        check_dim(d, 1)?;
        let threshold = edge_threshold(p)?;
        Ok(Self { d, p, threshold, master_seed, trial_index, key: trial_key(master_seed, trial_index) })
    }

    /// Same seed and trial, different edge threshold. Raising the threshold
    /// only ever adds edges.
    pub fn with_threshold(&self, threshold: u128) -> Self {
        let p = threshold.min(1u128 << 64) as f64 / 18_446_744_073_709_551_616.0;
        Self { threshold, p, ..self.clone() }
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn threshold(&self) -> u128 {
        self.threshold
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn trial_index(&self) -> u64 {
        self.trial_index
    }

    pub fn num_vertices(&self) -> u64 {
        1u64 << self.d
    }

    #[inline]
    pub fn edge_present(&self, v: u64, dim: u32) -> bool {
        let lo = v & !(1u64 << dim);
        (edge_hash(self.key, lo, dim) as u128) < self.threshold
    }

    pub fn degree(&self, v: u64) -> u32 {
        (0..self.d).filter(|&i| self.edge_present(v, i)).count() as u32
    }
}

pub fn edge_present(spec: &SampleSpec, v: u64, dim: u32) -> bool {
    spec.edge_present(v, dim)
}

/// BFS frontier: a list while small, a bit array once it would outgrow one.
enum Frontier {
    Sparse(Vec<u64>),
    Dense(BitSet),
}

impl Frontier {
    fn push(&mut self, v: u64, n: u64, dense_limit: usize) {
        match self {
            Frontier::Sparse(list) => {
                list.push(v);
                if list.len() > dense_limit {
                    let mut bits = BitSet::new(n);
                    list.iter().for_each(|&u| bits.set(u));
                    *self = Frontier::Dense(bits);
                }
            }
            Frontier::Dense(bits) => bits.set(v),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Frontier::Sparse(list) => list.is_empty(),
            Frontier::Dense(bits) => bits.words().iter().all(|&w| w == 0),
        }
    }

    fn for_each(&self, mut f: impl FnMut(u64)) {
        match self {
            Frontier::Sparse(list) => list.iter().for_each(|&v| f(v)),
            Frontier::Dense(bits) => bits.iter_ones().for_each(f),
        }
    }
}

/// Explores the component of `root` in the sampled graph, marking `visited`
/// and calling `on_vertex` once per newly reached vertex (root included).
fn explore(spec: &SampleSpec, root: u64, visited: &mut BitSet, mut on_vertex: impl FnMut(u64)) {
    let n = spec.num_vertices();
    let dense_limit = (n / 64).max(64) as usize;
    visited.set(root);
    on_vertex(root);
    let mut frontier = Frontier::Sparse(vec![root]);
    while !frontier.is_empty() {
        let mut next = Frontier::Sparse(Vec::new());
        frontier.for_each(|v| {
            for i in 0..spec.d {
                let u = v ^ (1u64 << i);
                if !visited.get(u) && spec.edge_present(v, i) {
                    visited.set(u);
                    on_vertex(u);
                    next.push(u, n, dense_limit);
                }
            }
        });
        frontier = next;
    }
}

/// Summary of one sampled graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCensus {
    pub d: u32,
    pub p: f64,
    pub seed: u64,
    pub trial: u64,
    /// `t -> X_t`.
    pub size_histogram: BTreeMap<u64, u64>,
    pub l1: u64,
    pub l2: u64,
    /// Fragment size `2^d - L1`.
    pub z: u64,
    /// Number of components.
    pub x: u64,
    /// Smallest vertex of the giant.
    pub giant_root: u64,
    /// The giant itself when it fits under the store cap.
    pub giant_component: Option<CubeSubgraph>,
    /// Non-giant components up to the store cap, ordered by smallest vertex.
    pub fragment_components: Vec<CubeSubgraph>,
    /// Sizes of non-giant components above the store cap.
    pub oversize: Vec<u64>,
    pub store_cap: usize,
}

impl ComponentCensus {
    pub fn x_t(&self, t: u64) -> u64 {
        self.size_histogram.get(&t).copied().unwrap_or(0)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = 1u64 << self.d;
        let bad = |msg: String| Err(Error::Internal(msg));
        let weighted: u64 = self.size_histogram.iter().map(|(t, c)| t * c).sum();
        if weighted != n {
            return bad(format!("sum t X_t = {weighted} != {n}"));
        }
        if self.x != self.size_histogram.values().sum::<u64>() {
            return bad("X != sum X_t".into());
        }
        if self.z != n - self.l1 {
            return bad("Z != 2^d - L1".into());
        }
        let max = self.size_histogram.keys().next_back().copied().unwrap_or(0);
        if self.l1 != max || self.l2 > self.l1 {
            return bad(format!("L1 = {}, L2 = {}, max size = {max}", self.l1, self.l2));
        }
        let fragment: u64 =
            self.fragment_components.iter().map(|c| c.size() as u64).sum::<u64>() + self.oversize.iter().sum::<u64>();
        if fragment != self.z {
            return bad(format!("fragment components hold {fragment} vertices, Z = {}", self.z));
        }
        Ok(())
    }

    /// Components of every class, the giant included when it is stored.
    pub fn class_counts(&self) -> BTreeMap<CanonicalForm, u64> {
        let mut counts = classify_fragment(self).counts;
        if let Some(g) = &self.giant_component {
            *counts.entry(g.canonical_copy()).or_insert(0) += 1;
        }
        counts
    }

    /// The census record written to disk. Classes are numbered by `catalog`
    /// and count every component, the giant included.
    pub fn to_record(&self, catalog: &ClassCatalog) -> CensusRecord {
        let mut classes: BTreeMap<usize, u64> = BTreeMap::new();
        let mut unclassified = 0;
        for (form, count) in &self.class_counts() {
            match catalog.id_of(form) {
                Some(id) => *classes.entry(id).or_default() += count,
                None => unclassified += count,
            }
        }
        CensusRecord {
            d: self.d,
            p: self.p,
            seed: self.seed,
            trial: self.trial,
            sizes_histogram: self.size_histogram.clone(),
            l1: self.l1,
            l2: self.l2,
            z: self.z,
            x: self.x,
            classes: classes.into_iter().map(|(form_id, count)| ClassCount { form_id, count }).collect(),
            unclassified,
            oversize: self.oversize.len() as u64,
            checks: None,
        }
    }
}

/// JSON form of a census.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRecord {
    pub d: u32,
    pub p: f64,
    pub seed: u64,
    pub trial: u64,
    pub sizes_histogram: BTreeMap<u64, u64>,
    #[serde(rename = "L1")]
    pub l1: u64,
    #[serde(rename = "L2")]
    pub l2: u64,
    #[serde(rename = "Z")]
    pub z: u64,
    #[serde(rename = "X")]
    pub x: u64,
    pub classes: Vec<ClassCount>,
    /// Stored components larger than the catalog's size limit.
    #[serde(default)]
    pub unclassified: u64,
    pub oversize: u64,
    /// Per-trial geometric checks, when the experiment asked for them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<TrialChecks>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub form_id: usize,
    pub count: u64,
}

/// Per-trial results of the geometric diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrialChecks {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<DistanceSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goodness: Option<GoodnessReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<BallCluster>,
}

/// Distance-profile digest kept per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    /// Radius used for the "near the fragment" count.
    pub near_radius: u32,
    /// Vertices within `near_radius` of the fragment.
    pub near_count: u64,
    /// Largest distance from any vertex to the fragment; `None` if the fragment is empty.
    pub max_distance: Option<u32>,
}

pub fn component_census(spec: &SampleSpec, fragment_store_cap: usize) -> Result<ComponentCensus> {
    component_census_capped(spec, fragment_store_cap, DEFAULT_MAX_CENSUS_DIM)
}

struct Found {
    root: u64,
    size: u64,
    members: Option<Vec<u64>>,
}

pub fn component_census_capped(spec: &SampleSpec, fragment_store_cap: usize, max_d: u32) -> Result<ComponentCensus> {
    if spec.d > max_d {
        return Err(Error::Cap { what: "census dimension", value: spec.d as u64, cap: max_d as u64 });
    }
    let n = spec.num_vertices();
    let mut visited = BitSet::new(n);
    let mut found: Vec<Found> = Vec::new();
    let mut from = 0;
    while let Some(root) = visited.next_clear(from) {
        from = root + 1;
        let mut size = 0u64;
        let mut members = (fragment_store_cap > 0).then(Vec::new);
        explore(spec, root, &mut visited, |v| {
            size += 1;
            if let Some(list) = members.as_mut() {
                if list.len() < fragment_store_cap {
                    list.push(v);
                } else {
                    members = None;
                }
            }
        });
        found.push(Found { root, size, members });
    }

    let mut giant = 0;
    for (i, c) in found.iter().enumerate() {
        if c.size > found[giant].size {
            giant = i;
        }
    }
    let mut size_histogram = BTreeMap::new();
    for c in &found {
        *size_histogram.entry(c.size).or_insert(0) += 1;
    }
    let l1 = found[giant].size;
    let l2 = found.iter().enumerate().filter(|&(i, _)| i != giant).map(|(_, c)| c.size).max().unwrap_or(0);

    let giant_root = found[giant].root;
    let mut giant_component = None;
    let mut fragment_components = Vec::new();
    let mut oversize = Vec::new();
    for (i, c) in found.into_iter().enumerate() {
        match (c.members, i == giant) {
            (Some(vertices), true) => giant_component = Some(induced_component(spec, vertices)),
            (Some(vertices), false) => fragment_components.push(induced_component(spec, vertices)),
            (None, false) => oversize.push(c.size),
            (None, true) => {}
        }
    }
    let x = size_histogram.values().sum();
    Ok(ComponentCensus {
        d: spec.d,
        p: spec.p,
        seed: spec.master_seed,
        trial: spec.trial_index,
        size_histogram,
        l1,
        l2,
        z: n - l1,
        x,
        giant_root,
        giant_component,
        fragment_components,
        oversize,
        store_cap: fragment_store_cap,
    })
}

fn induced_component(spec: &SampleSpec, mut vertices: Vec<u64>) -> CubeSubgraph {
    vertices.sort_unstable();
    let mut edges = Vec::new();
    for &v in &vertices {
        for b in 0..spec.d {
            let u = v ^ (1u64 << b);
            if u > v && spec.edge_present(v, b) {
                edges.push((v, u));
            }
        }
    }
    edges.sort_unstable();
    CubeSubgraph::from_parts_unchecked(spec.d, vertices, edges)
}

/// Tally of stored fragment components by class.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentClasses {
    pub counts: BTreeMap<CanonicalForm, u64>,
    pub oversize: u64,
}

pub fn classify_fragment(census: &ComponentCensus) -> FragmentClasses {
    let mut counts = BTreeMap::new();
    for c in &census.fragment_components {
        *counts.entry(c.canonical_copy()).or_insert(0) += 1;
    }
    FragmentClasses { counts, oversize: census.oversize.len() as u64 }
}

/// Vertices of the giant component, recovered by re-exploring from its root.
pub fn giant_mask(census: &ComponentCensus, spec: &SampleSpec) -> BitSet {
    let mut mask = BitSet::new(spec.num_vertices());
    explore(spec, census.giant_root, &mut mask, |_| {});
    mask
}

/// Multi-source BFS in the full cube: entry `r` counts vertices at distance
/// exactly `r` from `sources`. Always `d + 1` entries.
pub fn distance_profile(d: u32, sources: &BitSet) -> Vec<u64> {
    let mut counts = vec![0u64; d as usize + 1];
    counts[0] = sources.count_ones();
    if counts[0] == 0 {
        return counts;
    }
    let mut reached = sources.clone();
    let mut frontier = sources.clone();
    let mut next = BitSet::new(sources.len());
    for count in counts.iter_mut().skip(1) {
        next.clear();
        for dim in 0..d {
            or_flipped(frontier.words(), dim, next.words_mut());
        }
        let mut fresh = 0u64;
        for (w, seen) in next.words_mut().iter_mut().zip(reached.words_mut()) {
            *w &= !*seen;
            *seen |= *w;
            fresh += w.count_ones() as u64;
        }
        *count = fresh;
        if fresh == 0 {
            break;
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub enum FragmentDistance {
    /// No fragment: every distance is undefined.
    Empty,
    Profile(Vec<u64>),
}

impl FragmentDistance {
    pub fn max_distance(&self) -> Option<u32> {
        match self {
            FragmentDistance::Empty => None,
            FragmentDistance::Profile(c) => c.iter().rposition(|&x| x > 0).map(|r| r as u32),
        }
    }

    /// Vertices within distance `r` of the fragment.
    pub fn within(&self, r: u32) -> u64 {
        match self {
            FragmentDistance::Empty => 0,
            FragmentDistance::Profile(c) => c.iter().take(r as usize + 1).sum(),
        }
    }
}

pub fn fragment_distance_profile(census: &ComponentCensus, spec: &SampleSpec) -> FragmentDistance {
    if census.z == 0 {
        return FragmentDistance::Empty;
    }
    let mut sources = giant_mask(census, spec);
    for w in sources.words_mut() {
        *w = !*w;
    }
    let n = spec.num_vertices();
    if n < 64 {
        sources.words_mut()[0] &= (1u64 << n) - 1;
    }
    FragmentDistance::Profile(distance_profile(spec.d, &sources))
}

/// Good vertices have sampled degree at least `d p / 2`, and at least one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessReport {
    pub bad_vertex_count: u64,
    pub good_vertices_all_in_giant: bool,
    pub max_fragment_size: u64,
    /// `floor(16 (1 + gamma) / p)`; `None` when `p = 0`.
    pub n_gamma: Option<u64>,
    pub l2_within_n_gamma: bool,
}

pub fn goodness_diagnostic(census: &ComponentCensus, spec: &SampleSpec, gamma: f64) -> GoodnessReport {
    let giant = giant_mask(census, spec);
    let cutoff = (spec.d as f64 * spec.p / 2.0).max(1.0);
    let mut bad = 0;
    let mut all_in_giant = true;
    for v in 0..spec.num_vertices() {
        if (spec.degree(v) as f64) < cutoff {
            bad += 1;
        } else if !giant.get(v) {
            all_in_giant = false;
        }
    }
    let n_gamma = (spec.p > 0.0).then(|| (16.0 * (1.0 + gamma) / spec.p).floor() as u64);
    GoodnessReport {
        bad_vertex_count: bad,
        good_vertices_all_in_giant: all_in_giant,
        max_fragment_size: census.l2,
        n_gamma,
        l2_within_n_gamma: n_gamma.is_none_or(|n| census.l2 <= n),
    }
}

/// Two brackets for the fragment mass of a radius-`rho` ball.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallCluster {
    pub radius: u32,
    /// Max over fragment vertices `u` of fragment vertices within `rho` of `u`:
    /// a lower bound on the max over all balls.
    pub within_radius_max: u64,
    /// Max over fragment vertices `u` of fragment vertices within `2 rho` of `u`:
    /// an upper bound for any ball containing `u`.
    pub within_double_radius_max: u64,
    pub fragment_vertices: u64,
}

pub fn ball_cluster_counts(vertices: &[u64], radius: u32) -> BallCluster {
    let (mut one, mut two) = (0u64, 0u64);
    for &u in vertices {
        let (mut a, mut b) = (0u64, 0u64);
        for &v in vertices {
            let dist = (u ^ v).count_ones();
            a += (dist <= radius) as u64;
            b += (dist <= 2 * radius) as u64;
        }
        one = one.max(a);
        two = two.max(b);
    }
    BallCluster {
        radius,
        within_radius_max: one,
        within_double_radius_max: two,
        fragment_vertices: vertices.len() as u64,
    }
}

pub fn ball_cluster_statistic(census: &ComponentCensus, radius: u32) -> Result<BallCluster> {
    ball_cluster_statistic_capped(census, radius, DEFAULT_PAIRWISE_CAP)
}

pub fn ball_cluster_statistic_capped(census: &ComponentCensus, radius: u32, pair_cap: usize) -> Result<BallCluster> {
    if !census.oversize.is_empty() {
        return Err(Error::FragmentNotStored(census.oversize.len() as u64));
    }
    let vertices: Vec<u64> = census.fragment_components.iter().flat_map(|c| c.vertices().iter().copied()).collect();
    if vertices.len() > pair_cap {
        return Err(Error::Cap {
            what: "fragment size for pairwise scan",
            value: vertices.len() as u64,
            cap: pair_cap as u64,
        });
    }
    Ok(ball_cluster_counts(&vertices, radius))
}
