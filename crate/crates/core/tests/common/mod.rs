//! Independent brute force over small cube subgraphs, shared by test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cubefrag::canonical::CanonicalForm;

pub type Key = (Vec<u64>, Vec<(u64, u64)>);

/// Every connected subgraph of `Q^d` with `t` vertices, as (vertices, edges).
pub fn connected_subgraphs(d: u32, t: usize) -> Vec<Key> {
    let n = 1u64 << d;
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(t);
    fn rec(start: u64, n: u64, t: usize, chosen: &mut Vec<u64>, out: &mut Vec<Key>) {
        if chosen.len() == t {
            emit(chosen, out);
            return;
        }
        for v in start..n {
            chosen.push(v);
            rec(v + 1, n, t, chosen, out);
            chosen.pop();
        }
    }
    rec(0, n, t, &mut chosen, &mut out);
    out
}

fn emit(vs: &[u64], out: &mut Vec<Key>) {
    let mut induced = Vec::new();
    for (i, &a) in vs.iter().enumerate() {
        for &b in &vs[i + 1..] {
            if (a ^ b).count_ones() == 1 {
                induced.push((a, b));
            }
        }
    }
    if induced.len() + 1 < vs.len() {
        return;
    }
    for mask in 0u32..(1 << induced.len()) {
        let edges: Vec<(u64, u64)> =
            induced.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &e)| e).collect();
        if edges.len() + 1 >= vs.len() && spans_connected(vs, &edges) {
            out.push((vs.to_vec(), edges));
        }
    }
}

fn spans_connected(vs: &[u64], edges: &[(u64, u64)]) -> bool {
    let idx = |v: u64| vs.iter().position(|&x| x == v).unwrap();
    let mut parent: Vec<usize> = (0..vs.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    let mut parts = vs.len();
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, idx(a)), find(&mut parent, idx(b)));
        if ra != rb {
            parent[ra] = rb;
            parts -= 1;
        }
    }
    parts == 1
}

/// Support dimensions packed in increasing order into the low bits.
pub fn canonical_key(vs: &[u64], edges: &[(u64, u64)]) -> (Key, u32) {
    let support = edges.iter().fold(0u64, |m, &(a, b)| m | (a ^ b));
    let pack = |v: u64| {
        let mut out = 0u64;
        let mut k = 0;
        for bit in 0..64 {
            if support >> bit & 1 == 1 {
                out |= (v >> bit & 1) << k;
                k += 1;
            }
        }
        out
    };
    let mut cv: Vec<u64> = vs.iter().map(|&v| pack(v)).collect();
    cv.sort_unstable();
    let mut ce: Vec<(u64, u64)> = edges
        .iter()
        .map(|&(a, b)| {
            let (x, y) = (pack(a), pack(b));
            (x.min(y), x.max(y))
        })
        .collect();
    ce.sort_unstable();
    ((cv, ce), support.count_ones())
}

pub fn form_key(f: &CanonicalForm) -> Key {
    (f.graph().vertices().to_vec(), f.graph().edges().to_vec())
}

pub fn brute_force_classes(d: u32, t: usize) -> BTreeMap<Key, (u32, u64)> {
    let mut tally: BTreeMap<Key, (u32, u64)> = BTreeMap::new();
    for (vs, es) in connected_subgraphs(d, t) {
        let (key, span) = canonical_key(&vs, &es);
        tally.entry(key).or_insert((span, 0)).1 += 1;
    }
    tally
}
