//! Connected cube subgraphs, their canonical copies, and exhaustive
//! enumeration of ambient-isomorphism classes.
//!
//! The canonical copy drops every coordinate that no edge flips and packs the
//! remaining ones, in increasing order, into the low bits. Two subgraphs are
//! ambient-isomorphic exactly when their canonical copies coincide.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::cube::{binomial, MAX_DIM};
use crate::error::{Error, Result};

/// Default largest component size [`enumerate_classes`] accepts.
pub const DEFAULT_ENUMERATION_CAP: usize = 6;

/// Hard ceiling: sizes up to 7 live in `Q^6`, whose 64 vertices fit a mask.
pub const MAX_ENUMERATION_SIZE: usize = 7;

/// A connected subgraph of `Q^d` with sorted vertex and edge lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CubeSubgraph {
    d: u32,
    vertices: Vec<u64>,
    edges: Vec<(u64, u64)>,
}

impl CubeSubgraph {
    /// Validates and normalises: edges become `(lo, hi)` pairs, both lists are
    /// sorted and deduplicated, and the result must be connected.
    pub fn new(
        d: u32,
        vertices: impl IntoIterator<Item = u64>,
        edges: impl IntoIterator<Item = (u64, u64)>,
    ) -> Result<Self> {
        if d > MAX_DIM {
            return Err(Error::Dimension { d, min: 0, max: MAX_DIM });
        }
        let mut vertices: Vec<u64> = vertices.into_iter().collect();
        vertices.sort_unstable();
        vertices.dedup();
        if vertices.is_empty() {
            return Err(Error::InvalidSubgraph("no vertices".into()));
        }
        if let Some(&v) = vertices.iter().find(|&&v| v >> d != 0) {
            return Err(Error::Vertex { v, d });
        }
        let mut edges: Vec<(u64, u64)> = edges.into_iter().map(|(a, b)| if a < b { (a, b) } else { (b, a) }).collect();
        edges.sort_unstable();
        edges.dedup();
        for &(a, b) in &edges {
            if (a ^ b).count_ones() != 1 {
                return Err(Error::InvalidSubgraph(format!("{a} and {b} are not adjacent in the cube")));
            }
            if vertices.binary_search(&a).is_err() || vertices.binary_search(&b).is_err() {
                return Err(Error::InvalidSubgraph(format!("edge ({a}, {b}) leaves the vertex set")));
            }
        }
        let graph = Self { d, vertices, edges };
        if !graph.is_connected() {
            return Err(Error::InvalidSubgraph("not connected".into()));
        }
        Ok(graph)
    }

    pub fn single_vertex(d: u32, v: u64) -> Result<Self> {
        Self::new(d, [v], [])
    }

    /// Caller guarantees sorted, deduplicated, connected input.
    pub(crate) fn from_parts_unchecked(d: u32, vertices: Vec<u64>, edges: Vec<(u64, u64)>) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        Self { d, vertices, edges }
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn vertices(&self) -> &[u64] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(u64, u64)] {
        &self.edges
    }

    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, v: u64) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        let index = |v: u64| self.vertices.binary_search(&v).unwrap();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut merges = 0;
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, index(a)), find(&mut parent, index(b)));
            if ra != rb {
                parent[ra] = rb;
                merges += 1;
            }
        }
        merges + 1 == n
    }

    /// Bit `i` set iff some edge flips coordinate `i + 1`.
    pub fn support_mask(&self) -> u64 {
        self.edges.iter().fold(0, |m, &(a, b)| m | (a ^ b))
    }

    /// Support as 1-based coordinate indices, with the span.
    pub fn support_and_span(&self) -> (Vec<u32>, u32) {
        let mask = self.support_mask();
        let dims: Vec<u32> = (0..64).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
        let span = dims.len() as u32;
        (dims, span)
    }

    pub fn span(&self) -> u32 {
        self.support_mask().count_ones()
    }

    pub fn canonical_copy(&self) -> CanonicalForm {
        let mask = self.support_mask();
        let span = mask.count_ones();
        let mut vertices: Vec<u64> = self.vertices.iter().map(|&v| compress(v, mask)).collect();
        vertices.sort_unstable();
        let mut edges: Vec<(u64, u64)> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (compress(a, mask), compress(b, mask));
                (x.min(y), x.max(y))
            })
            .collect();
        edges.sort_unstable();
        CanonicalForm(Self::from_parts_unchecked(span, vertices, edges))
    }

    pub fn ambient_isomorphic(&self, other: &Self) -> bool {
        self.canonical_copy() == other.canonical_copy()
    }

    /// Cube edges joining two vertices of the subgraph that the subgraph omits.
    pub fn internal_nonedges(&self) -> usize {
        let induced: usize = self
            .vertices
            .iter()
            .map(|&v| {
                (0..self.d)
                    .filter(|&i| {
                        let u = v ^ (1 << i);
                        u > v && self.contains(u)
                    })
                    .count()
            })
            .sum();
        induced - self.edges.len()
    }

    pub fn is_spreading_tree(&self) -> bool {
        self.span() as usize + 1 == self.size()
    }

    /// Number of cube edges with exactly one endpoint in the vertex set.
    pub fn boundary_edges(&self) -> u64 {
        let v = self.size() as u64;
        let inside = (self.num_edges() + self.internal_nonedges()) as u64;
        v * self.d as u64 - 2 * inside
    }
}

/// Packs the bits of `x` selected by `mask` into the low bits, preserving order.
#[inline]
pub(crate) fn compress(x: u64, mut mask: u64) -> u64 {
    let mut out = 0;
    let mut k = 0;
    while mask != 0 {
        let b = mask.trailing_zeros();
        out |= (x >> b & 1) << k;
        k += 1;
        mask &= mask - 1;
    }
    out
}

/// Inverse of [`compress`]: spreads the low bits of `x` onto the set bits of `mask`.
#[inline]
pub(crate) fn deposit(x: u64, mut mask: u64) -> u64 {
    let mut out = 0;
    let mut k = 0;
    while mask != 0 {
        let b = mask.trailing_zeros();
        out |= (x >> k & 1) << b;
        k += 1;
        mask &= mask - 1;
    }
    out
}

/// Canonical copy of a connected cube subgraph; lives in `Q^span`.
///
/// Ordered by size, then span, then vertex list, then edge list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalForm(CubeSubgraph);

impl CanonicalForm {
    /// Accepts a subgraph only if it already is its own canonical copy.
    pub fn from_subgraph(graph: CubeSubgraph) -> Result<Self> {
        let form = graph.canonical_copy();
        if form.0 != graph {
            return Err(Error::InvalidSubgraph("subgraph is not in canonical position".into()));
        }
        Ok(form)
    }

    pub fn single_vertex() -> Self {
        CanonicalForm(CubeSubgraph::from_parts_unchecked(0, vec![0], vec![]))
    }

    pub fn single_edge() -> Self {
        CanonicalForm(CubeSubgraph::from_parts_unchecked(1, vec![0, 1], vec![(0, 1)]))
    }

    pub fn graph(&self) -> &CubeSubgraph {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.size()
    }

    pub fn span(&self) -> u32 {
        self.0.d
    }

    pub fn num_edges(&self) -> usize {
        self.0.num_edges()
    }

    pub fn internal_nonedges(&self) -> usize {
        self.0.internal_nonedges()
    }

    pub fn is_spreading_tree(&self) -> bool {
        self.0.is_spreading_tree()
    }

    /// Places the form in `Q^d` on the coordinates selected by `support`
    /// (exactly `span` bits), with the remaining coordinates fixed to `base`.
    pub fn embed(&self, d: u32, support: u64, base: u64) -> CubeSubgraph {
        debug_assert_eq!(support.count_ones(), self.span());
        debug_assert_eq!(base & support, 0);
        let map = |x: u64| base | deposit(x, support);
        let mut vertices: Vec<u64> = self.0.vertices.iter().map(|&v| map(v)).collect();
        vertices.sort_unstable();
        let mut edges: Vec<(u64, u64)> = self
            .0
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (map(a), map(b));
                (x.min(y), x.max(y))
            })
            .collect();
        edges.sort_unstable();
        CubeSubgraph::from_parts_unchecked(d, vertices, edges)
    }

    /// Every subgraph of `Q^d` ambient-isomorphic to this form, in a fixed order.
    pub fn embeddings(&self, d: u32) -> Result<Vec<CubeSubgraph>> {
        let s = self.span();
        if d < s {
            return Err(Error::SpanExceedsDimension { d, span: s });
        }
        let full = (1u64 << d) - 1;
        let mut out = Vec::new();
        for support in subsets_of_size(d, s) {
            let rest = full & !support;
            let mut base = 0u64;
            loop {
                out.push(self.embed(d, support, base));
                if base == rest {
                    break;
                }
                base = (base.wrapping_sub(rest)) & rest;
            }
        }
        Ok(out)
    }

    pub fn to_record(&self) -> FormRecord {
        FormRecord {
            t: self.size(),
            s: self.span(),
            vertices: self.0.vertices.clone(),
            edges: self.0.edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_record(record: &FormRecord) -> Result<Self> {
        let graph =
            CubeSubgraph::new(record.s, record.vertices.iter().copied(), record.edges.iter().map(|e| (e[0], e[1])))?;
        if graph.size() != record.t {
            return Err(Error::InvalidSubgraph(format!("record claims {} vertices, lists {}", record.t, graph.size())));
        }
        Self::from_subgraph(graph)
    }
}

impl Ord for CanonicalForm {
    fn cmp(&self, other: &Self) -> Ordering {
        self.size()
            .cmp(&other.size())
            .then(self.span().cmp(&other.span()))
            .then_with(|| self.0.vertices.cmp(&other.0.vertices))
            .then_with(|| self.0.edges.cmp(&other.0.edges))
    }
}

impl PartialOrd for CanonicalForm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// JSON shape of a canonical form: `{t, s, vertices, edges}` with sorted arrays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormRecord {
    pub t: usize,
    pub s: u32,
    pub vertices: Vec<u64>,
    pub edges: Vec<[u64; 2]>,
}

impl Serialize for CanonicalForm {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CanonicalForm {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let record = FormRecord::deserialize(deserializer)?;
        Self::from_record(&record).map_err(serde::de::Error::custom)
    }
}

/// All `k`-subsets of the low `n` bits, as masks, in increasing order.
pub(crate) fn subsets_of_size(n: u32, k: u32) -> impl Iterator<Item = u64> {
    let limit: u128 = 1u128 << n;
    let mut next: Option<u64> = if k > n {
        None
    } else if k == 0 {
        Some(0)
    } else {
        Some((1u64 << k) - 1)
    };
    std::iter::from_fn(move || {
        let current = next?;
        next = if current == 0 {
            None
        } else {
            // Gosper's hack
            let c = current & current.wrapping_neg();
            let r = current as u128 + c as u128;
            if r >= limit {
                None
            } else {
                let r = r as u64;
                Some((((r ^ current) >> 2) / c) | r)
            }
        };
        Some(current)
    })
}

/// Number of subgraphs of `Q^d` ambient-isomorphic to a form of the given span.
pub fn embedding_count(span: u32, d: u32) -> Result<BigUint> {
    if d < span {
        return Err(Error::SpanExceedsDimension { d, span });
    }
    Ok((BigUint::from(1u32) << (d - span)) * binomial(d, span))
}

pub fn count_embeddings(form: &CanonicalForm, d: u32) -> Result<BigUint> {
    embedding_count(form.span(), d)
}

/// Spreading trees on `t` vertices: `(classes, subgraphs of Q^d)`.
pub fn count_spreading_trees(t: u32, d: u32) -> Result<(BigUint, BigUint)> {
    if t == 0 || d + 1 < t {
        return Err(Error::SpanExceedsDimension { d, span: t.saturating_sub(1) });
    }
    // t^(t-3) is fractional for t < 3; use t^(t-2) / t, which divides exactly.
    let rooted = if t >= 2 { num_traits::pow(BigUint::from(t), (t - 2) as usize) } else { BigUint::from(1u32) };
    let classes = (BigUint::from(1u32) << (t - 1)) * &rooted / t;
    let subgraphs = (BigUint::from(1u32) << d) * &rooted * binomial(d, t - 1) / t;
    Ok((classes, subgraphs))
}

/// All canonical forms with exactly `t` vertices, in the canonical order.
pub fn enumerate_classes(t: usize) -> Result<Vec<CanonicalForm>> {
    enumerate_classes_with_cap(t, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_classes_with_cap(t: usize, cap: usize) -> Result<Vec<CanonicalForm>> {
    if t == 0 {
        return Err(Error::Invalid("class size must be at least 1".into()));
    }
    if t > cap.min(MAX_ENUMERATION_SIZE) {
        return Err(Error::EnumerationCap { t, cap: cap.min(MAX_ENUMERATION_SIZE) });
    }
    let n = (t - 1) as u32;
    let mut forms = BTreeSet::new();
    for_each_connected_set(n, t, |set| {
        for graph in connected_spanning_subgraphs(n, set) {
            forms.insert(graph.canonical_copy());
        }
    });
    Ok(forms.into_iter().collect())
}

/// Calls `f` with every connected vertex set of size `t` in `Q^n` (as a mask
/// over the `2^n <= 64` vertices), each exactly once.
fn for_each_connected_set(n: u32, t: usize, mut f: impl FnMut(u64)) {
    let num = 1u64 << n;
    let nbhd = |v: u64| -> u64 { (0..n).fold(0u64, |m, i| m | 1u64 << (v ^ (1 << i))) };
    let above = |v: u64| -> u64 {
        if v + 1 >= 64 {
            0
        } else {
            !0u64 << (v + 1)
        }
    };
    #[allow(clippy::too_many_arguments)]
    fn extend(
        sub: u64,
        sub_nbhd: u64,
        mut ext: u64,
        size: usize,
        t: usize,
        seed_above: u64,
        nbhd: &dyn Fn(u64) -> u64,
        f: &mut dyn FnMut(u64),
    ) {
        if size == t {
            f(sub);
            return;
        }
        while ext != 0 {
            let w = ext.trailing_zeros() as u64;
            ext &= ext - 1;
            let w_nbhd = nbhd(w);
            let exclusive = w_nbhd & !sub & !sub_nbhd & seed_above;
            extend(sub | 1 << w, sub_nbhd | w_nbhd, ext | exclusive, size + 1, t, seed_above, nbhd, f);
        }
    }
    for v in 0..num {
        let v_nbhd = nbhd(v);
        extend(1 << v, v_nbhd, v_nbhd & above(v), 1, t, above(v), &nbhd, &mut f);
    }
}

/// Connected spanning subgraphs of the subgraph of `Q^n` induced by `set`.
fn connected_spanning_subgraphs(n: u32, set: u64) -> Vec<CubeSubgraph> {
    let vertices: Vec<u64> = (0..64u64).filter(|&v| set >> v & 1 == 1).collect();
    let mut induced = Vec::new();
    for &v in &vertices {
        for i in 0..n {
            let u = v ^ (1 << i);
            if u > v && set >> u & 1 == 1 {
                induced.push((v, u));
            }
        }
    }
    induced.sort_unstable();
    let need = vertices.len() - 1;
    let mut out = Vec::new();
    for chosen in 0u64..(1u64 << induced.len()) {
        if (chosen.count_ones() as usize) < need {
            continue;
        }
        let edges: Vec<(u64, u64)> =
            induced.iter().enumerate().filter(|(k, _)| chosen >> k & 1 == 1).map(|(_, &e)| e).collect();
        let graph = CubeSubgraph::from_parts_unchecked(n, vertices.clone(), edges);
        if graph.is_connected() {
            out.push(graph);
        }
    }
    out
}

/// Numbered list of every class up to a size, in canonical order. A class's
/// id is its position, so ids of smaller sizes do not depend on the cap.
#[derive(Debug, Clone)]
pub struct ClassCatalog {
    forms: Vec<CanonicalForm>,
    index: BTreeMap<CanonicalForm, usize>,
    max_size: usize,
}

impl ClassCatalog {
    pub fn new(max_size: usize) -> Result<Self> {
        let mut forms = Vec::new();
        for t in 1..=max_size {
            forms.extend(enumerate_classes_with_cap(t, MAX_ENUMERATION_SIZE)?);
        }
        let index = forms.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
        Ok(Self { forms, index, max_size })
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn forms(&self) -> &[CanonicalForm] {
        &self.forms
    }

    pub fn get(&self, id: usize) -> Option<&CanonicalForm> {
        self.forms.get(id)
    }

    pub fn id_of(&self, form: &CanonicalForm) -> Option<usize> {
        self.index.get(form).copied()
    }

    pub fn ids_of_size(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.forms.iter().enumerate().filter(move |(_, f)| f.size() == t).map(|(i, _)| i)
    }
}
