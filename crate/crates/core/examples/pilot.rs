//! Pilot run that writes the envelope file used by the acceptance suite.
//!
//! Run from the workspace root: `cargo run --release --example pilot [-- OUT]`
//! (default `crates/core/envelopes/pilot.json`).

use std::collections::BTreeMap;

use cubefrag::par::Execution;
use cubefrag::stats::{run_experiment, Check, ExperimentConfig};

const PILOT_SEED: u64 = 0x5E_ED0F_9170;
const P: &str = "0.25";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "crates/core/envelopes/pilot.json".into());
    let mut envelope: BTreeMap<String, [f64; 2]> = BTreeMap::new();

    let mut l2 = ExperimentConfig::new(12, P, 1000, PILOT_SEED);
    l2.d_list = vec![16, 20];
    let report = run_experiment(&l2, Execution::Parallel)?;
    for d in [12, 16, 20] {
        let row = report.row(d, "L2.eq_m_p_fraction").ok_or("missing L2 row")?;
        let (f, se) = (row.value.unwrap_or(0.0), row.std_error.unwrap_or(0.0));
        println!("d = {d}: L2 = m_p fraction {f} (se {se})");
    }
    let row = report.row(20, "L2.eq_m_p_fraction").ok_or("missing L2 row")?;
    let (f, se) = (row.value.unwrap_or(0.0), row.std_error.unwrap_or(0.0));
    envelope.insert("d20/L2.eq_m_p_fraction".into(), [(f - 4.0 * se).max(0.0), 1.0]);

    let mut dist = ExperimentConfig::new(14, P, 100, PILOT_SEED).with_checks([Check::Distance]);
    dist.d_list = vec![16, 18];
    let report = run_experiment(&dist, Execution::Parallel)?;
    for d in [14, 16, 18] {
        let lo = report.value(d, "distance.max.min").ok_or("missing distance row")?;
        let hi = report.value(d, "distance.max.max").ok_or("missing distance row")?;
        let near = report.value(d, "distance.near_fraction").unwrap_or(f64::NAN);
        println!("d = {d}: max distance in [{lo}, {hi}], near fraction {near}");
        envelope.insert(format!("d{d}/distance.max.min"), [lo - 1.0, hi + 1.0]);
        envelope.insert(format!("d{d}/distance.max.max"), [lo - 1.0, hi + 1.0]);
    }

    std::fs::write(&out, serde_json::to_string_pretty(&envelope)? + "\n")?;
    println!("wrote {out}");
    Ok(())
}
