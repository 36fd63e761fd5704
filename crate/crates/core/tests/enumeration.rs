//! Brute-force cross-checks of class enumeration and embedding counts.

mod common;

use common::{brute_force_classes, canonical_key, connected_subgraphs, form_key, Key};
use cubefrag::canonical::{count_embeddings, count_spreading_trees, enumerate_classes};
use cubefrag::cube::binomial;
use num_bigint::BigUint;

#[test]
fn class_totals_match_brute_force_and_artifact() {
    let artifact: serde_json::Value =
        serde_json::from_str(include_str!("../data/class_totals.json")).expect("artifact parses");
    for t in 1..=6usize {
        let forms = enumerate_classes(t).unwrap();
        let pinned = artifact["classes"][t.to_string()].as_u64().unwrap();
        assert_eq!(forms.len() as u64, pinned, "t = {t}");
        let trees = forms.iter().filter(|f| f.is_spreading_tree()).count() as u64;
        assert_eq!(trees, artifact["spreading_tree_classes"][t.to_string()].as_u64().unwrap());
        if t <= 5 {
            // span is at most t - 1, so Q^(t-1) holds a copy of every class
            let d = (t as u32 - 1).max(1);
            let brute = brute_force_classes(d, t);
            let keys: Vec<Key> = forms.iter().map(form_key).collect();
            let brute_keys: Vec<Key> = brute.keys().cloned().collect();
            let mut sorted = keys.clone();
            sorted.sort();
            assert_eq!(sorted, brute_keys, "t = {t}");
        }
    }
}

#[test]
fn embedding_counts_in_q4() {
    let d = 4;
    for t in 1..=4usize {
        let brute = brute_force_classes(d, t);
        let forms = enumerate_classes(t).unwrap();
        assert_eq!(forms.len(), brute.len());
        for form in &forms {
            let &(span, count) = brute.get(&form_key(form)).expect("class present in Q^4");
            let formula = (BigUint::from(1u32) << (d - span)) * binomial(d, span);
            assert_eq!(BigUint::from(count), formula, "t = {t}, span = {span}");
            assert_eq!(count_embeddings(form, d).unwrap(), formula);
            let listed = form.embeddings(d).unwrap();
            assert_eq!(listed.len() as u64, count);
            assert!(listed.iter().all(|g| &g.canonical_copy() == form));
        }
    }
}

#[test]
fn spreading_tree_totals() {
    for (t, d) in [(3u32, 3u32), (3, 4), (4, 4)] {
        let brute = connected_subgraphs(d, t as usize)
            .into_iter()
            .filter(|(vs, es)| es.len() + 1 == vs.len() && canonical_key(vs, es).1 == t - 1)
            .count() as u64;
        // 2^d t^(t-3) C(d, t-1), written as 2^d t^(t-2) C(d, t-1) / t
        let formula = (BigUint::from(1u32) << d) * BigUint::from(t).pow(t - 2) * binomial(d, t - 1) / t;
        assert_eq!(BigUint::from(brute), formula, "(t, d) = ({t}, {d})");
        assert_eq!(count_spreading_trees(t, d).unwrap().1, formula);
    }
}

#[test]
fn rooted_subtrees_respect_exponential_bound() {
    for d in [3u32, 4, 5] {
        for t in 1..=4usize {
            let rooted = connected_subgraphs(d, t)
                .into_iter()
                .filter(|(vs, es)| vs.contains(&0) && es.len() + 1 == vs.len())
                .count() as f64;
            let bound = (std::f64::consts::E * d as f64).powi(t as i32);
            assert!(rooted <= bound, "d = {d}, t = {t}: {rooted} > {bound}");
        }
    }
}
