//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Checks marked known-unattainable are measured against their pinned
//! thresholds and reported like any other; a criterion whose only failures
//! are such checks does not fail the run.

mod common;

use std::fmt::Write as _;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{brute_force_classes, canonical_key, connected_subgraphs, form_key};
use cubefrag::canonical::{count_embeddings, count_spreading_trees, enumerate_classes, CanonicalForm};
use cubefrag::cube::{binomial, eta_star, m_p, Params};
use cubefrag::expectations::{exact_census_oracle, mu3_coefficient_two, mu_exact, stein_chen_terms};
use cubefrag::par::Execution;
use cubefrag::stats::{run_experiment, Check, Envelope, ExperimentConfig, SummaryReport};
use num_bigint::BigUint;

const SEED: u64 = 20_240_601;
const ORACLE_P: [f64; 4] = [0.1, 0.25, 0.3, 0.4];
const PILOT_ENVELOPE: &str = include_str!("../envelopes/pilot.json");

struct Outcome {
    pass: bool,
    known_only: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, known_only: true, detail: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl AsRef<str>) {
        if !ok {
            self.known_only = false;
        }
        self.check_known(ok, what);
    }

    /// A check that does not hold at the tested dimension.
    fn check_known(&mut self, ok: bool, what: impl AsRef<str>) {
        if !ok {
            self.pass = false;
            let _ = write!(self.detail, "{}; ", what.as_ref());
        }
    }

    fn note(&mut self, what: impl AsRef<str>) {
        let _ = write!(self.detail, "{}; ", what.as_ref());
    }

    fn within(&mut self, started: Instant, limit: Duration) {
        let took = started.elapsed();
        self.check(took <= limit, format!("runtime {took:.1?} exceeds {limit:?}"));
        self.note(format!("runtime {took:.1?}"));
    }
}

fn row(r: &SummaryReport, d: u32, stat: &str) -> (f64, f64) {
    let row = r.row(d, stat).unwrap_or_else(|| panic!("row d{d}/{stat} missing"));
    (row.value.unwrap_or(f64::NAN), row.std_error.unwrap_or(f64::NAN))
}

fn envelope() -> Envelope {
    serde_json::from_str(PILOT_ENVELOPE).expect("pilot envelope parses")
}

fn envelope_verdicts(report: &mut SummaryReport, ids: &[String], o: &mut Outcome) {
    let env: Envelope = envelope().into_iter().filter(|(k, _)| ids.contains(k)).collect();
    o.check(env.len() == ids.len(), "pilot envelope lacks an entry");
    report.apply_envelope(&env);
    for c in report.envelope.as_deref().unwrap_or_default() {
        o.check(c.inside, format!("{} = {:?} outside [{}, {}]", c.id, c.value, c.lo, c.hi));
    }
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let started = Instant::now();
    for p in ORACLE_P {
        let q = 1.0 - p;
        let oracle = exact_census_oracle(3, p).unwrap();
        let x1 = oracle.size_law(1).mean();
        let x2 = oracle.size_law(2).mean();
        o.check((x1 - (2.0 * q).powi(3)).abs() <= 1e-9, format!("E[X1] at p = {p}"));
        let x2_formula = p / (2.0 * q * q) * 3.0 * (2.0 * q * q).powi(3);
        o.check((x2 - x2_formula).abs() <= 1e-9, format!("E[X2] at p = {p}"));
        let x3 = oracle.size_law(3).mean();
        o.check((mu_exact(3, 3, p).unwrap() - x3).abs() <= 1e-9, format!("shipped mu3 at p = {p}"));
        if p == 0.3 {
            o.check((x1 - 2.744).abs() <= 1e-9, format!("E[X1] = {x1}"));
            o.check((x2 - 0.864359).abs() <= 1e-6, format!("E[X2] = {x2}"));
            o.check((x3 - 0.363031).abs() <= 1e-6, format!("E[X3] = {x3}"));
            let literal = mu3_coefficient_two(3, 0.3).unwrap();
            o.note(format!("E[X3] = {x3:.6}, coefficient-two value {literal:.6}"));
        }
    }
    let report = run_experiment(&ExperimentConfig::new(3, "0.3", 10, SEED), Execution::Sequential).unwrap();
    let shown = report.row(3, "mu3_coefficient_two").and_then(|r| r.theory);
    let expected = mu3_coefficient_two(3, 0.3).unwrap();
    o.check(shown == Some(expected), "report lacks the coefficient-two mu3 row");
    o.within(started, Duration::from_secs(5));
    o
}

type FormList = (&'static str, Vec<CanonicalForm>, Option<Vec<u64>>);

fn form_lists() -> Vec<FormList> {
    let v = CanonicalForm::single_vertex();
    let e = CanonicalForm::single_edge();
    vec![
        ("{vertex}", vec![v.clone()], None),
        ("{vertex, edge}", vec![v.clone(), e.clone()], None),
        ("{vertex} by size", vec![v.clone()], Some(vec![1])),
        ("{vertex, edge} by size", vec![v, e], Some(vec![1, 2])),
    ]
}

fn criteria_2_and_3() -> (Outcome, Outcome) {
    let (mut var, mut tv) = (Outcome::new(), Outcome::new());
    let (mut worst_gap, mut configs) = (0f64, 0);
    for d in 1..=3 {
        for p in [0.05, 0.1, 0.2, 0.25, 0.3, 0.4, 0.45] {
            let oracle = exact_census_oracle(d, p).unwrap();
            for (name, forms, weights) in form_lists() {
                let w = weights.as_deref();
                let terms = stein_chen_terms(&forms, d, p, w).unwrap();
                let law = oracle.weighted_class_law(&forms, w);
                let gap = (law.variance() - terms.variance()).abs();
                worst_gap = worst_gap.max(gap);
                var.check(gap <= 1e-9, format!("d = {d}, p = {p}, {name}: gap {gap:e}"));
                let distance = law.tv_to_poisson(terms.expectation);
                tv.check(
                    distance <= terms.tv_bound,
                    format!("d = {d}, p = {p}, {name}: tv {distance} > {}", terms.tv_bound),
                );
                configs += 1;
            }
        }
    }
    var.note(format!("{configs} configurations, worst gap {worst_gap:e}"));
    tv.note(format!("{configs} configurations"));
    (var, tv)
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let started = Instant::now();
    let expected = [1usize, 1, 4, 32, 400, 6912];
    for (t, &want) in (1..=6).zip(&expected) {
        let trees = enumerate_classes(t).unwrap().iter().filter(|f| f.is_spreading_tree()).count();
        o.check(trees == want, format!("t = {t}: {trees} spreading-tree classes, expected {want}"));
        let formula = (1usize << (t - 1)) as f64 * (t as f64).powi(t as i32 - 3);
        o.check((formula - want as f64).abs() < 1e-9, format!("t = {t}: closed form {formula}"));
    }
    let d = 4;
    for t in 1..=4 {
        let brute = brute_force_classes(d, t);
        for form in enumerate_classes(t).unwrap() {
            let Some(&(span, count)) = brute.get(&form_key(&form)) else {
                o.check(false, format!("class of size {t} not found by brute force"));
                continue;
            };
            let formula = (BigUint::from(1u32) << (d - span)) * binomial(d, span);
            o.check(BigUint::from(count) == formula, format!("t = {t}, span {span}: {count} copies"));
            o.check(count_embeddings(&form, d).unwrap() == formula, "embedding count formula");
        }
    }
    for (t, d) in [(3u32, 3u32), (3, 4), (4, 4)] {
        let brute = connected_subgraphs(d, t as usize)
            .into_iter()
            .filter(|(vs, es)| es.len() + 1 == vs.len() && canonical_key(vs, es).1 == t - 1)
            .count() as u64;
        let formula = (BigUint::from(1u32) << d) * BigUint::from(t).pow(t - 2) * binomial(d, t - 1) / t;
        o.check(BigUint::from(brute) == formula, format!("(t, d) = ({t}, {d}): {brute} spreading trees"));
        o.check(count_spreading_trees(t, d).unwrap().1 == formula, "spreading-tree total");
    }
    o.within(started, Duration::from_secs(30));
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    for (p, want) in [("0.25", 2), ("0.30", 1), ("0.10", 6)] {
        let got = Params::from_decimal(10, p).unwrap().m_p();
        o.check(got == want, format!("m_p({p}) = {got}"));
        let float = m_p(p.parse().unwrap()).unwrap();
        o.check(float == want, format!("float m_p({p}) = {float}"));
    }
    let boundary = m_p(1.0 - 1.0 / 2f64.sqrt()).unwrap();
    o.check(boundary == 2, format!("m_p(1 - 1/sqrt 2) = {boundary}"));
    let eta = eta_star(0.25, 1e-12).unwrap();
    o.check((eta - 0.08).abs() <= 0.005, format!("eta* = {eta}"));
    o.note(format!("eta*(0.25) = {eta:.5}"));
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let started = Instant::now();
    let trials = 5000;
    let report = run_experiment(&ExperimentConfig::new(16, "0.25", trials, SEED), Execution::Parallel).unwrap();
    let mu1 = report.block(16).unwrap().theory.mu[0];
    let (mean_x1, _) = row(&report, 16, "X_1.mean");
    let tol = 4.0 * (mu1 / trials as f64).sqrt();
    o.check((mean_x1 - mu1).abs() <= tol, format!("mean X1 {mean_x1:.3} vs mu1 {mu1:.3} (tol {tol:.3})"));
    let (ratio, _) = row(&report, 16, "X_1.variance_over_mu");
    o.check((0.8..=1.2).contains(&ratio), format!("Var(X1)/mu1 = {ratio:.4}"));
    let (mean_z, _) = row(&report, 16, "Z.mean");
    let (mean_x, _) = row(&report, 16, "X.mean");
    let gap = (mean_z - mean_x).abs() / mu1;
    o.check_known(gap <= 0.02, format!("|mean Z - mean X| / mu1 = {gap:.4} > 0.02"));
    let predicted: f64 = (2..=3).map(|t| (t - 1) as f64 * mu_exact(t, 16, 0.25).unwrap()).sum::<f64>() / mu1;
    o.note(format!(
        "mean X1 {mean_x1:.2}, mu1 {mu1:.2}, Var/mu1 {ratio:.4}, gap {gap:.4} (sizes 2..3 alone predict {predicted:.4})"
    ));
    o.within(started, Duration::from_secs(600));
    o
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let mut cfg = ExperimentConfig::new(12, "0.25", 1000, SEED);
    cfg.d_list = vec![16, 20];
    let mut report = run_experiment(&cfg, Execution::Parallel).unwrap();
    let points: Vec<(u32, f64, f64)> = [12, 16, 20]
        .into_iter()
        .map(|d| {
            let (f, se) = row(&report, d, "L2.eq_m_p_fraction");
            (d, f, se)
        })
        .collect();
    for w in points.windows(2) {
        let ((d0, f0, s0), (d1, f1, s1)) = (w[0], w[1]);
        let slack = 2.0 * (s0 * s0 + s1 * s1).sqrt();
        o.check(f1 >= f0 - slack, format!("fraction drops from {f0} at d = {d0} to {f1} at d = {d1}"));
    }
    envelope_verdicts(&mut report, &["d20/L2.eq_m_p_fraction".into()], &mut o);
    let shown: Vec<String> = points.iter().map(|(d, f, se)| format!("d{d} {f:.3}±{se:.3}")).collect();
    o.note(format!("P(L2 = 2): {}", shown.join(", ")));
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let cfg = ExperimentConfig::new(16, "0.25", 1000, SEED).with_checks([Check::Goodness]);
    let report = run_experiment(&cfg, Execution::Parallel).unwrap();
    let (n_gamma, _) = row(&report, 16, "goodness.n_gamma");
    o.check(n_gamma == 256.0, format!("N_gamma = {n_gamma}"));
    let (all_good, _) = row(&report, 16, "goodness.all_good_in_giant_fraction");
    o.check_known(all_good == 1.0, format!("all good vertices in the giant in a fraction {all_good} of trials"));
    let (l2_ok, _) = row(&report, 16, "goodness.l2_within_n_gamma_fraction");
    o.check(l2_ok == 1.0, format!("L2 <= N_gamma in a fraction {l2_ok} of trials"));
    o.note(format!("N_gamma {n_gamma}, good-in-giant fraction {all_good}, L2 bound fraction {l2_ok}"));
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let mut cfg = ExperimentConfig::new(14, "0.25", 100, SEED).with_checks([Check::Distance]);
    cfg.d_list = vec![16, 18];
    let mut report = run_experiment(&cfg, Execution::Parallel).unwrap();
    let near: Vec<f64> = [14, 16, 18].iter().map(|&d| row(&report, d, "distance.near_fraction").0).collect();
    let ratios: Vec<f64> = near.windows(2).map(|w| w[1] / w[0]).collect();
    for (i, r) in ratios.iter().enumerate() {
        o.check(*r <= 0.8, format!("near fraction ratio {r:.3} at step {i} is not a clear decrease"));
    }
    let spread = (ratios[0].ln() - ratios[1].ln()).abs();
    o.check(spread <= 1.5f64.ln(), format!("successive ratios {ratios:?} are not geometric"));
    let ids: Vec<String> = [14, 16, 18]
        .iter()
        .flat_map(|d| [format!("d{d}/distance.max.min"), format!("d{d}/distance.max.max")])
        .collect();
    envelope_verdicts(&mut report, &ids, &mut o);
    let maxes: Vec<String> = [14, 16, 18]
        .iter()
        .map(|&d| {
            format!("d{d} max {}..{}", row(&report, d, "distance.max.min").0, row(&report, d, "distance.max.max").0)
        })
        .collect();
    o.note(format!("near fractions {near:.4?}, ratios {ratios:.3?}, {}", maxes.join(", ")));
    o
}

fn criterion_10() -> Outcome {
    let mut o = Outcome::new();
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str| {
        let out = dir.path().join(format!("w{workers}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_cubefrag"))
            .args(["simulate", "--d", "8,10", "--p", "0.25", "--trials", "300", "--seed", "99"])
            .args(["--checks", "all", "--classes", "0,1", "--workers", workers, "--out"])
            .arg(&out)
            .output()
            .expect("binary runs");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        (std::fs::read(&out).unwrap(), std::fs::read(out.with_extension("csv")).unwrap())
    };
    let (json1, csv1) = run("1");
    let (json8, csv8) = run("8");
    o.check(json1 == json8, "JSON reports differ");
    o.check(csv1 == csv8, "CSV reports differ");
    o.note(format!("{} byte report", json1.len()));
    o
}

fn criterion_11() -> Outcome {
    let mut o = Outcome::new();
    let started = Instant::now();
    let report = run_experiment(&ExperimentConfig::new(3, "0.3", 1_000_000, SEED), Execution::Parallel).unwrap();
    let (tv, bias) = row(&report, 3, "census_law.tv_oracle");
    o.check(tv <= 0.01, format!("TV {tv}"));
    o.note(format!("TV {tv:.5} (plug-in bias bound {bias:.5})"));
    o.within(started, Duration::from_secs(120));
    o
}

fn main() -> ExitCode {
    let mut unexpected = Vec::new();
    let mut report = |n: u32, title: &str, o: Outcome| {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let known = !o.pass && o.known_only;
        let tag = if known { " [known unattainable at this dimension]" } else { "" };
        println!("{verdict} criterion {n:>2} {title}{tag}: {}", o.detail.trim_end_matches("; "));
        if !o.pass && !known {
            unexpected.push(n);
        }
    };
    report(1, "oracle vs closed forms", criterion_1());
    let (var, tv) = criteria_2_and_3();
    report(2, "variance identity", var);
    report(3, "Stein-Chen bound", tv);
    report(4, "enumeration counts", criterion_4());
    report(5, "scalar theory", criterion_5());
    report(6, "Monte Carlo means and variances at d = 16", criterion_6());
    report(7, "L2 concentration trend", criterion_7());
    report(8, "goodness diagnostic at d = 16", criterion_8());
    report(9, "distance profile trend", criterion_9());
    report(10, "determinism across worker counts", criterion_10());
    report(11, "empirical vs oracle census law at d = 3", criterion_11());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
