//! Acceptance suite: one PASS/FAIL line per criterion on stderr.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use zlab_core::counting::{count_lattice_in_domain, random_domain, verify_orthogonality, AngularTiling};
use zlab_core::dyadic::LpExponent;
use zlab_core::estimates::{
    committed_sweeps, exhaustive_constant, fit_scaling, maximize, run_sweep, HopmOptions, KSupport, Support,
    TauSupport, TrilinearProblem,
};
use zlab_core::fit::fit_power_law;
use zlab_core::inflation::{
    bourgain_counterexample_ratio, closed_form_case_iii, closed_form_case_iv, closed_form_n2_hat, closed_form_u2_hat,
    make_counterexample, not_c2_probe, probe_time, run_inflation_experiment, Case, InflationConfig, Pairing,
};
use zlab_core::resonance::{
    classify_regularity, classify_text, construct_resonant_pair, enumerate_near_resonant, one_d_constant, parse_rational,
    predicates_overlap, resonance_m_lattice, Threshold, Verdict,
};
use zlab_core::solver::{duhamel_quadratic, evolve, picard_iterate, reduce_first_order, PicardOptions, SolverConfig};
use zlab_core::torus::{sobolev_norm, SymbolTable};
use zlab_core::{DualLattice, FourierField, TorusSpec};

fn pilot() -> Value {
    serde_json::from_str(include_str!("../fixtures/pilot.json")).expect("pilot fixture parses")
}

fn frozen(path: &[&str]) -> f64 {
    let mut v = pilot();
    for p in path {
        v = v[*p].clone();
    }
    v.as_f64().unwrap_or_else(|| panic!("missing pilot constant {path:?}"))
}

/// Regression slack on frozen constants.
const SLACK: f64 = 1.1;

fn report(n: usize, name: &str, pass: bool, start: Instant, detail: String) {
    let line = format!(
        "criterion {n:>2} {name}: {} ({:.1} s) {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

/// Random coefficients decaying like `⟨k⟩^{-4}`.
fn smooth(lat: &Arc<DualLattice>, rng: &mut ChaCha8Rng, real: bool) -> FourierField {
    let sym = SymbolTable::new(lat);
    let coeffs = (0..lat.len())
        .map(|i| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / sym.bracket[i].powi(4))
        .collect();
    let f = FourierField::from_coeffs(lat.clone(), coeffs).unwrap();
    if real {
        f.into_real()
    } else {
        f
    }
}

fn rescale(f: &FourierField, s: f64, size: f64) -> FourierField {
    f.scale(Complex64::new(size / sobolev_norm(f, s), 0.0))
}

#[test]
fn c01_conservation() {
    let start = Instant::now();
    let spec = TorusSpec::standard(&[1.0, 2f64.sqrt()]).unwrap();
    let lat = Arc::new(DualLattice::cube(spec, 32).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let u0 = rescale(&smooth(&lat, &mut rng, false), 1.0, 0.1);
    let n0 = rescale(&smooth(&lat, &mut rng, true), 0.0, 0.1);
    let mut n1 = smooth(&lat, &mut rng, true);
    let z = lat.zero_index();
    n1.coeffs[z] = Complex64::new(0.0, 0.0);
    let n1 = rescale(&n1, -1.0, 0.1);
    let mut cfg = SolverConfig::new(1e-4, 0.1);
    cfg.sample_every = 10;
    let traj = evolve(&u0, &n0, &n1, &cfg).unwrap();
    let mass = traj.report.max_relative_mass_drift;
    let ham = traj.report.max_relative_hamiltonian_drift.unwrap_or(f64::INFINITY);
    let pass = mass <= 1e-8 && ham <= 1e-6;
    report(1, "conservation", pass, start, format!("mass drift {mass:.2e}, Hamiltonian drift {ham:.2e}"));
}

#[test]
fn c02_resonant_pairs() {
    let start = Instant::now();
    let gammas = [[1.0, 1.0], [1.0, 2f64.sqrt()], [3f64.sqrt(), 2f64.sqrt()]];
    let mut bad = Vec::new();
    for g in gammas {
        let bound = 1.0 / (g[1] * g[1]);
        for n in 2..=200 {
            let p = construct_resonant_pair(n, &g).unwrap();
            if !(p.residual > -bound - 1e-9 && p.residual <= bound + 1e-9) {
                bad.push(format!("residual {} at N={n}, γ={g:?}", p.residual));
            }
            let mc: Vec<i64> = (0..2).map(|j| p.m_k[j] - p.m_ktilde[j]).collect();
            let ms: Vec<i64> = (0..2).map(|j| -p.m_ktilde[j]).collect();
            let m = resonance_m_lattice(&mc, &ms, &g, 1);
            if (m - p.residual.abs()).abs() > 1e-12 * (1.0 + p.residual.abs()) {
                bad.push(format!("M {m} vs |residual| {} at N={n}", p.residual.abs()));
            }
            let twin = resonance_m_lattice(&mc, &ms, &g, -1) / n as f64;
            if !(1.0..=8.0).contains(&twin) {
                bad.push(format!("σ=-1 M/N = {twin} at N={n}, γ={g:?}"));
            }
        }
    }
    report(2, "resonant pairs", bad.is_empty(), start, format!("{} violations {:?}", bad.len(), bad.first()));
}

#[test]
fn c03_one_d_dichotomy() {
    let start = Instant::now();
    let g = 2f64.sqrt();
    let kmax = (50.0 * g).floor() as usize;
    let lat = DualLattice::new(TorusSpec::standard(&[g]).unwrap(), &[kmax]).unwrap();
    let c = one_d_constant(g);
    let found: usize = [1, -1].iter().map(|&s| enumerate_near_resonant(&lat, s, Threshold::Linear(c)).len()).sum();
    let lat1 = DualLattice::new(TorusSpec::standard(&[1.0]).unwrap(), &[50]).unwrap();
    let recs = enumerate_near_resonant(&lat1, 1, Threshold::Absolute(1.0));
    // M is a multiple of |k| when γ = 1, so M ≤ 1 forces M = 0 and odd k:
    // every odd |k| up to the truncation must carry a pair.
    let covered = (1..=50).step_by(2).all(|k| recs.iter().any(|r| r.k[0].abs() == k as f64));
    let pass = found == 0 && covered;
    report(3, "1-d dichotomy", pass, start, format!("γ=√2 pairs below c(γ)|k|: {found}; γ=1 every odd |k| ≤ 49 covered: {covered}"));
}

#[test]
fn c04_lattice_counting() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for d in [2usize, 3] {
        let key = if d == 2 { "d2" } else { "d3" };
        let c_star = frozen(&["counting", key]);
        let gamma: Vec<f64> = serde_json::from_value(pilot()["counting"][format!("gamma_{key}")].clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77 + d as u64);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let dom = random_domain(d, 64.0, 1024.0, 64.0, &mut rng);
            let r = count_lattice_in_domain(&dom, &gamma).unwrap();
            worst = worst.max(r.ratio);
        }
        pass &= worst <= SLACK * c_star;
        details.push(format!("d={d}: max ratio {worst:.3} vs C* {c_star:.3}"));
    }
    report(4, "lattice counting", pass, start, details.join("; "));
}

#[test]
fn c05_orthogonality() {
    let start = Instant::now();
    let t = AngularTiling::new((1u64 << 14) as f64, 1 << 14, 1 << 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let r = verify_orthogonality(&t, 10_000, &mut rng);
    let pass = !r.vacuous && r.samples == 10_000 && r.violations.is_empty() && r.preimage_histogram[3] == 0 && r.representatives_ok;
    report(
        5,
        "orthogonality",
        pass,
        start,
        format!("{} samples, {} violations, preimage histogram {:?}", r.samples, r.violations.len(), r.preimage_histogram),
    );
}

#[test]
fn c06_trilinear_scaling() {
    let start = Instant::now();
    let opts = HopmOptions { restarts: 2, seed: 3, ..Default::default() };
    let mut pass = true;
    let mut details = Vec::new();
    for sweep in committed_sweeps() {
        let c_star = frozen(&["estimates", "c_star", sweep.class.name()]);
        let points = run_sweep(&sweep, &opts).unwrap();
        let worst = points.iter().map(|p| p.result.ratio).fold(0.0, f64::max);
        let bounded = worst <= SLACK * c_star;
        pass &= bounded;
        let mut line = format!("{}: max C/bound {worst:.3} (C* {c_star:.3})", sweep.class.name());
        if points.len() >= 6 {
            let f = fit_scaling(&sweep, &points).unwrap();
            let ok = (f.fit.slope - f.predicted).abs() <= 0.15;
            pass &= ok;
            line += &format!(", slope {:.3} vs {:.3}", f.fit.slope, f.predicted);
        }
        details.push(line);
    }
    let supports = [
        Support { k: KSupport::Shell(2), tau: TauSupport::Wave(2, -1) },
        Support { k: KSupport::Shell(1), tau: TauSupport::Schrodinger(1) },
        Support { k: KSupport::Shell(4), tau: TauSupport::Schrodinger(2) },
    ];
    let p = TrilinearProblem::new(&[0.4, 0.45], 2.0, supports).unwrap();
    let (r, _) = maximize(&p, &HopmOptions { restarts: 4, tol: 1e-12, max_iter: 5000, seed: 1 }).unwrap();
    let ex = exhaustive_constant(&p, 48).unwrap();
    pass &= r.constant >= 0.999 * ex;
    details.push(format!("tiny instance {:.6} vs exhaustive {:.6}", r.constant, ex));
    report(6, "trilinear scaling", pass, start, details.join("; "));
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn c07_quadratic_oracle() {
    let start = Instant::now();
    let spec = TorusSpec::standard(&[1.0, 2f64.sqrt()]).unwrap();
    let (s, l) = (0.5, 0.25);
    let mut worst = 0.0f64;
    for n in [8i64, 32] {
        let d = make_counterexample(Case::I, n, &spec, s, l).unwrap();
        let pair = d.pair.clone().unwrap();
        let mc = [pair.m_k[0] - pair.m_ktilde[0], pair.m_k[1] - pair.m_ktilde[1], 0];
        for t in [0.001, 0.01] {
            let (u2, n2) = duhamel_quadratic(d.u0.as_ref().unwrap(), d.n0.as_ref().unwrap(), d.n1.as_ref().unwrap(), t).unwrap();
            worst = worst.max(rel(closed_form_u2_hat(t, n, s, l, &spec).unwrap(), u2.get(&pair.m_k)));
            worst = worst.max(rel(closed_form_n2_hat(t, n, s, &spec).unwrap(), n2.get(&mc)));
        }
        for case in [Case::Iii, Case::Iv] {
            let d = make_counterexample(case, n, &spec, s, l).unwrap();
            let t = probe_time(case, n, spec.gamma[0]).unwrap();
            let (u2, n2) = duhamel_quadratic(d.u0.as_ref().unwrap(), d.n0.as_ref().unwrap(), d.n1.as_ref().unwrap(), t).unwrap();
            let e = if case == Case::Iii {
                rel(closed_form_case_iii(t, n, l, &spec).unwrap(), u2.get(&[n, 0, 0]))
            } else {
                rel(closed_form_case_iv(t, n, s, &spec).unwrap(), n2.get(&[n, 0, 0]))
            };
            worst = worst.max(e);
        }
    }
    report(7, "quadratic-iterate oracle", worst <= 1e-8, start, format!("max relative error {worst:.2e}"));
}

#[test]
fn c08_norm_inflation() {
    let start = Instant::now();
    let gamma = [1.0, 2f64.sqrt()];
    let mut pass = true;
    let mut details = Vec::new();
    for (s, l, sp, lp) in [(0.55, 0.4, 0.6, 0.4), (0.65, 0.6, 0.7, 0.6)] {
        let closed = InflationConfig::new(&gamma, s, l, sp, lp, (4..=9).map(|e| 1i64 << e).collect(), vec![0.2]).unwrap();
        let rep = run_inflation_experiment(&closed).unwrap();
        let f = rep.slopes[0].closed_form.clone().unwrap();
        let ok_cf = (f.slope - rep.predicted_slope).abs() <= 0.1 && f.residual_std_error <= 0.05;

        let mut full = InflationConfig::new(&gamma, s, l, sp, lp, (2..=6).map(|e| 1i64 << e).collect(), vec![0.2]).unwrap();
        full.solver_n_max = Some(64);
        full.solver_dt = 4e-3;
        let rep = run_inflation_experiment(&full).unwrap();
        let errors: Vec<&String> = rep.per_n.iter().filter_map(|p| p.solver_error.as_ref()).collect();
        let g = rep.slopes[0].solver.clone();
        let ok_solver = errors.is_empty() && g.as_ref().is_some_and(|g| (g.slope - rep.predicted_slope).abs() <= 0.2);
        pass &= ok_cf && ok_solver;
        details.push(format!(
            "(s',l')=({sp},{lp}): closed-form slope {:.3} (rse {:.3}), solver slope {:.3}, predicted {:.3}",
            f.slope,
            f.residual_std_error,
            g.map(|g| g.slope).unwrap_or(f64::NAN),
            rep.predicted_slope
        ));
    }
    report(8, "norm inflation", pass, start, details.join("; "));
}

#[test]
fn c09_not_c2_probes() {
    let start = Instant::now();
    let spec = TorusSpec::standard(&[1.0, 2f64.sqrt()]).unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    for (case, key) in [(Case::Iii, "iii"), (Case::Iv, "iv")] {
        let c = frozen(&["inflation", "probe", key]);
        let lo = (5..=10).map(|e| not_c2_probe(case, 1 << e, 0.5, 0.25, &spec).unwrap()).fold(f64::MAX, f64::min);
        pass &= lo >= c / SLACK;
        details.push(format!("case {key}: min scaled probe {lo:.4} vs c {c:.4}"));
    }
    report(9, "non-C2 probes", pass, start, details.join("; "));
}

#[test]
fn c10_bourgain_ratios() {
    let start = Instant::now();
    let spec = TorusSpec::standard(&[1.0, 2f64.sqrt()]).unwrap();
    let ns: Vec<i64> = (4..=9).map(|e| 1i64 << e).collect();
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = |which: Pairing, s: f64, l: f64| {
        let y: Vec<f64> = ns
            .iter()
            .map(|&n| bourgain_counterexample_ratio(n, s, l, 0.5, LpExponent::One, which, &spec).unwrap())
            .collect();
        fit_power_law(&x, &y).unwrap().slope
    };
    let schr = slope(Pairing::Uw, 0.0, -0.5);
    let wave = slope(Pairing::UvBarWave, 0.0, 0.0);
    let pass = schr >= 0.8 * 0.5 && wave >= 0.8 * 1.0;
    report(10, "Bourgain ratios", pass, start, format!("Schrödinger slope {schr:.3} (predicted 0.5), wave slope {wave:.3} (predicted 1)"));
}

#[test]
fn c11_region_classifier() {
    let start = Instant::now();
    let fixture = [
        ("1", "0", 2, Verdict::WellPosed),
        ("0", "-1/2", 2, Verdict::NotC2),
        ("1", "1", 3, Verdict::Gap),
        ("0.5", "0", 2, Verdict::WellPosed),
        ("1.5", "0.5", 3, Verdict::Gap),
        ("1.5", "1", 3, Verdict::WellPosed),
        ("1", "1.5", 2, Verdict::IllPosed2D),
        ("2", "3.5", 2, Verdict::NotC2),
        ("3", "0.5", 2, Verdict::NotC2),
        ("2", "1", 2, Verdict::WellPosed),
        ("0.25", "0.5", 2, Verdict::IllPosed2D),
        ("2.5", "1.5", 3, Verdict::WellPosed),
    ];
    let mut wrong = Vec::new();
    for (s, l, d, v) in fixture {
        let got = classify_text(s, l, d).unwrap().verdict;
        let as_f64 = |t: &str| parse_rational(t).map(|r| *r.numer() as f64 / *r.denom() as f64).unwrap();
        let float = classify_regularity(as_f64(s), as_f64(l), d).unwrap().verdict;
        if got != v || float != v {
            wrong.push(format!("({s},{l},{d}) -> {got:?}/{float:?}"));
        }
    }
    let mut overlaps = 0;
    for d in [2, 3] {
        for i in 0..=160 {
            for j in 0..=160 {
                if predicates_overlap(Rational64::new(-200 + 5 * i, 100), Rational64::new(-200 + 5 * j, 100), d) {
                    overlaps += 1;
                }
            }
        }
    }
    let pass = wrong.is_empty() && overlaps == 0;
    report(11, "region classifier", pass, start, format!("{} wrong verdicts {wrong:?}, {overlaps} grid overlaps", wrong.len()));
}

#[test]
fn c12_picard_contraction() {
    let start = Instant::now();
    let spec = TorusSpec::standard(&[1.0, 2f64.sqrt()]).unwrap();
    let lat = Arc::new(DualLattice::cube(spec, 6).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let u0 = smooth(&lat, &mut rng, false);
    let n0 = smooth(&lat, &mut rng, true);
    let n1 = smooth(&lat, &mut rng, true);
    let w0 = reduce_first_order(&n0, &n1).unwrap();
    let r0 = (sobolev_norm(&u0, 1.0).powi(2) + sobolev_norm(&w0, 0.0).powi(2)).sqrt();
    let c = Complex64::new(0.1 / r0, 0.0);
    let (u0, n0, n1) = (u0.scale(c), n0.scale(c), n1.scale(c));
    let w0 = w0.scale(c);
    let delta = 0.1;
    let rep = picard_iterate(&u0, &w0, delta, 6, &PicardOptions::default()).unwrap();
    let ratios = &rep.sup_ratios;
    let contracting = !ratios.is_empty() && ratios.iter().all(|&r| r < 1.0) && !rep.diverging;
    let decreasing = ratios.windows(2).all(|w| w[1] <= w[0]) && rep.sup_differences.windows(2).all(|w| w[1] < w[0]);
    let fixed = rep.state_at(0.5 * delta).unwrap();
    let mut cfg = SolverConfig::new(1e-4, 0.5 * delta);
    cfg.sample_every = 100;
    let stepped = evolve(&u0, &n0, &n1, &cfg).unwrap().final_state;
    let du = sobolev_norm(&fixed.u.sub(&stepped.u).unwrap(), 1.0);
    let dw = sobolev_norm(&fixed.w.sub(&stepped.w).unwrap(), 0.0);
    let gap = (du * du + dw * dw).sqrt();
    let pass = contracting && decreasing && gap <= 1e-4;
    report(
        12,
        "Picard contraction",
        pass,
        start,
        format!("ratios {:?}, decreasing: {decreasing}, gap to time-stepper {gap:.2e}", ratios.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()),
    );
}
