//! Pilot runs that freeze the constants checked by the acceptance suite.
//!
//! Writes `fixtures/pilot.json` next to this crate's manifest. Seeds differ
//! from the ones used by the acceptance suite.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use zlab_core::counting::{count_lattice_in_domain, random_domain};
use zlab_core::estimates::{committed_sweeps, run_sweep, HopmOptions};
use zlab_core::inflation::{closed_form_n2_hat, closed_form_u2_hat, not_c2_probe, Case};
use zlab_core::TorusSpec;

const COUNT_SEED: u64 = 2024;
const HOPM_SEED: u64 = 17;

const COUNT_INSTANCES: usize = 4000;

/// Periods of the counting tori; the frozen constant depends on them.
pub fn counting_gamma(d: usize) -> Vec<f64> {
    [1.0, 2f64.sqrt(), 3f64.sqrt()][..d].to_vec()
}

fn counting(d: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(COUNT_SEED + d as u64);
    let gamma = counting_gamma(d);
    let mut worst = 0.0f64;
    for _ in 0..COUNT_INSTANCES {
        let dom = random_domain(d, 64.0, 1024.0, 64.0, &mut rng);
        let r = count_lattice_in_domain(&dom, &gamma).expect("admissible instance");
        worst = worst.max(r.ratio);
    }
    worst
}

fn main() {
    // Sections named on the command line are recomputed; the others are kept
    // from the existing fixture.
    let only: Vec<String> = std::env::args().skip(1).collect();
    let wants = |s: &str| only.is_empty() || only.iter().any(|o| o == s);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/pilot.json");
    let mut out: Value = std::fs::read_to_string(path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_else(|| json!({}));
    let start = Instant::now();
    if wants("counting") {
        let (c2, c3) = (counting(2), counting(3));
        out["counting"] = json!({
            "d2": c2, "d3": c3, "instances": COUNT_INSTANCES, "seed": COUNT_SEED,
            "gamma_d2": counting_gamma(2), "gamma_d3": counting_gamma(3),
        });
        eprintln!("counting: {c2:.4} {c3:.4} ({:?})", start.elapsed());
    }
    if wants("estimates") {
        estimates(&mut out, &start);
    }
    if wants("inflation") {
        inflation(&mut out);
    }
    std::fs::write(path, serde_json::to_string_pretty(&out).unwrap() + "\n").unwrap();
    eprintln!("wrote {path} in {:?}", start.elapsed());
}

fn estimates(out: &mut Value, start: &Instant) {
    let opts = HopmOptions { restarts: 4, seed: HOPM_SEED, ..Default::default() };
    let mut classes = BTreeMap::new();
    for sweep in committed_sweeps() {
        let points = run_sweep(&sweep, &opts).expect("sweep runs");
        let worst = points.iter().map(|p| p.result.ratio).fold(0.0, f64::max);
        eprintln!("{} C* = {worst:.4} ({:?})", sweep.class.name(), start.elapsed());
        classes.insert(sweep.class.name().to_string(), worst);
    }
    out["estimates"] = json!({ "c_star": classes, "restarts": opts.restarts, "seed": HOPM_SEED });
}

fn inflation(out: &mut Value) {
    // Lower-bound regime 0 < |t| ≤ γ₂²/100, N ≥ 100/|t|.
    let mut u2_lower = f64::MAX;
    let mut n2_lower = f64::MAX;
    for gamma in [[1.0, 1.0], [1.0, 2f64.sqrt()], [3f64.sqrt(), 2f64.sqrt()]] {
        let spec = TorusSpec::standard(&gamma).unwrap();
        let t0 = gamma[1] * gamma[1] / 100.0;
        for t in [t0, t0 / 3.0, -t0] {
            let n_min = (100.0 / t.abs()).ceil() as i64;
            for mult in [1, 2, 4, 8] {
                let n = n_min * mult;
                let u = closed_form_u2_hat(t, n, 0.0, 0.0, &spec).unwrap().norm() / t.abs();
                let w = closed_form_n2_hat(t, n, 0.0, &spec).unwrap().norm() / (t.abs() * n as f64);
                u2_lower = u2_lower.min(u);
                n2_lower = n2_lower.min(w);
            }
        }
    }
    let mut probe = BTreeMap::new();
    for (case, name) in [(Case::Iii, "iii"), (Case::Iv, "iv")] {
        let spec = TorusSpec::standard(&[1.0, 2f64.sqrt()]).unwrap();
        let c = (5..=10).map(|e| not_c2_probe(case, 1 << e, 0.0, 0.0, &spec).unwrap()).fold(f64::MAX, f64::min);
        probe.insert(name.to_string(), c);
    }

    out["inflation"] = json!({ "u2_lower": u2_lower, "n2_lower": n2_lower, "probe": probe });
}
