//! Dependency-graph sums for Poisson approximation of component counts.
//!
//! Each embedding `G_i` of each requested class gives an event `A_i`: the
//! subgraph of `Q_p` induced on `V(G_i)` is exactly `G_i` and is a component.
//! Two events depend on each other when their vertex sets meet or are joined
//! by a cube edge.

use serde::Serialize;

use crate::canonical::{CanonicalForm, CubeSubgraph};
use crate::cube::check_probability;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::par::{map_range, Execution};

pub const DEFAULT_STEIN_CHEN_MAX_DIM: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteinChenTerms {
    /// `lambda = sum_i t_i pi_i`.
    pub expectation: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    /// `min(1/lambda, 1) (delta_plus + delta_minus)`.
    pub tv_bound: f64,
}

impl SteinChenTerms {
    /// `lambda + delta_plus - delta_minus`, which equals the variance exactly.
    pub fn variance(&self) -> f64 {
        self.expectation + self.delta_plus - self.delta_minus
    }
}

/// `P(A) = p^e q^e' q^(v d - 2e - 2e')`.
pub fn single_event_probability(g: &CubeSubgraph, p: f64) -> f64 {
    let q = 1.0 - p;
    let e = g.num_edges() as i32;
    let e_prime = g.internal_nonedges() as i32;
    p.powi(e) * q.powi(e_prime) * q.powi(g.boundary_edges() as i32)
}

fn cut_edges(a: &CubeSubgraph, b: &CubeSubgraph) -> u64 {
    let mut cut = 0;
    for &u in a.vertices() {
        for &v in b.vertices() {
            if (u ^ v).count_ones() == 1 {
                cut += 1;
            }
        }
    }
    cut
}

fn vertex_sets_meet(a: &CubeSubgraph, b: &CubeSubgraph) -> bool {
    let (mut i, mut j) = (0, 0);
    let (va, vb) = (a.vertices(), b.vertices());
    while i < va.len() && j < vb.len() {
        match va[i].cmp(&vb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// `P(A_1 and A_2)`; zero when the vertex sets meet. Cut edges between the
/// two sets must be absent and are counted once.
pub fn joint_component_probability(g1: &CubeSubgraph, g2: &CubeSubgraph, p: f64) -> Result<f64> {
    if g1.d() != g2.d() {
        return Err(Error::DimensionMismatch(g1.d(), g2.d()));
    }
    if vertex_sets_meet(g1, g2) {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let e = (g1.num_edges() + g2.num_edges()) as i32;
    let absent =
        g1.internal_nonedges() as u64 + g2.internal_nonedges() as u64 + g1.boundary_edges() + g2.boundary_edges()
            - cut_edges(g1, g2);
    Ok(p.powi(e) * q.powi(absent as i32))
}

struct Event {
    graph: CubeSubgraph,
    pi: f64,
    weight: f64,
}

pub fn stein_chen_terms(forms: &[CanonicalForm], d: u32, p: f64, weights: Option<&[u64]>) -> Result<SteinChenTerms> {
    stein_chen_terms_capped(forms, d, p, weights, DEFAULT_STEIN_CHEN_MAX_DIM)
}

/// Exact `Delta+`, `Delta-` over every embedding of every form in `Q^d`.
/// With weights `t_i`, the weighted sums for `sum_i t_i 1[A_i]` are returned.
pub fn stein_chen_terms_capped(
    forms: &[CanonicalForm],
    d: u32,
    p: f64,
    weights: Option<&[u64]>,
    max_d: u32,
) -> Result<SteinChenTerms> {
    check_probability(p)?;
    if forms.is_empty() {
        return Err(Error::Empty("form list"));
    }
    if d > max_d {
        return Err(Error::Cap { what: "dimension", value: d as u64, cap: max_d as u64 });
    }
    if let Some(w) = weights {
        if w.len() != forms.len() {
            return Err(Error::Invalid(format!("{} weights for {} forms", w.len(), forms.len())));
        }
        if w.contains(&0) {
            return Err(Error::Invalid("weights must be positive".into()));
        }
    }
    for (i, a) in forms.iter().enumerate() {
        if forms[..i].contains(a) {
            return Err(Error::Invalid("forms must be pairwise distinct".into()));
        }
    }

    let mut events = Vec::new();
    for (k, form) in forms.iter().enumerate() {
        let weight = weights.map_or(1.0, |w| w[k] as f64);
        let embedded = form.embeddings(d)?;
        let pi = embedded.first().map_or(0.0, |g| single_event_probability(g, p));
        events.extend(embedded.into_iter().map(|graph| Event { graph, pi, weight }));
    }

    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); 1 << d];
    for (i, ev) in events.iter().enumerate() {
        for &v in ev.graph.vertices() {
            by_vertex[v as usize].push(i);
        }
    }

    // per event: (t pi, t(t-1) pi + sum_j t t_j P(ij), t^2 pi^2 + sum_j t t_j pi pi_j)
    let rows = map_range(events.len(), Execution::Parallel, |i| {
        let ev = &events[i];
        let mut neighbours: Vec<usize> = Vec::new();
        for &v in ev.graph.vertices() {
            neighbours.extend_from_slice(&by_vertex[v as usize]);
            for b in 0..d {
                neighbours.extend_from_slice(&by_vertex[(v ^ (1 << b)) as usize]);
            }
        }
        neighbours.sort_unstable();
        neighbours.dedup();
        let mut plus = Vec::with_capacity(neighbours.len() + 1);
        let mut minus = Vec::with_capacity(neighbours.len() + 1);
        plus.push(ev.weight * (ev.weight - 1.0) * ev.pi);
        minus.push(ev.weight * ev.weight * ev.pi * ev.pi);
        for &j in neighbours.iter().filter(|&&j| j != i) {
            let other = &events[j];
            let joint = joint_component_probability(&ev.graph, &other.graph, p).expect("same dimension");
            plus.push(ev.weight * other.weight * joint);
            minus.push(ev.weight * other.weight * ev.pi * other.pi);
        }
        (ev.weight * ev.pi, compensated_sum(plus), compensated_sum(minus))
    })?;

    let expectation = compensated_sum(rows.iter().map(|r| r.0));
    let delta_plus = compensated_sum(rows.iter().map(|r| r.1));
    let delta_minus = compensated_sum(rows.iter().map(|r| r.2));
    let tv_bound = (1.0 / expectation).min(1.0) * (delta_plus + delta_minus);
    Ok(SteinChenTerms { expectation, delta_plus, delta_minus, tv_bound })
}
