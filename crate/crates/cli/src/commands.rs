//! Subcommand bodies: resolve parameters, call the library, emit results.

use std::sync::Arc;

use anyhow::{Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use zlab_core::counting::{count_lattice_in_domain, random_rotation, AnnulusSlabDomain};
use zlab_core::dyadic::{
    bourgain_norm, default_dt, shell_norms, window_and_transform, BourgainParams, LpExponent, Modulation,
    SampledTrajectory, TransformOptions,
};
use zlab_core::estimates::{committed_sweeps, sharp_constant, DyadicBlockSpec, HopmOptions, InteractionClass};
use zlab_core::fit::fit_power_law;
use zlab_core::inflation::{
    bourgain_counterexample_ratio, not_c2_probe, probe_time, run_inflation_experiment, Case, InflationConfig, Pairing,
};
use zlab_core::resonance::{classify_text, enumerate_near_resonant, Threshold};
use zlab_core::solver::{evolve, Quadrature, Scheme, SolverConfig};
use zlab_core::torus::sobolev_norm;
use zlab_core::{DualLattice, FourierField, TorusSpec};

use crate::output::{num, write_csv, write_json, write_json_lines, Header};
use crate::params::*;
use crate::{invalid, RunContext};

fn header<P: Serialize>(ctx: &RunContext, torus: Option<&TorusSpec>, params: &P) -> Result<Header> {
    let mut config = json!({ "command": ctx.command, "seed": ctx.seed, "params": serde_json::to_value(params)? });
    if let Some(t) = torus {
        config["torus"] = serde_json::to_value(t)?;
    }
    Ok(Header::new(ctx.command, ctx.seed, crate::output::sanitize(config)))
}

fn lp(p: Option<f64>) -> Result<LpExponent> {
    LpExponent::from_f64(p.unwrap_or(2.0)).map_err(|e| invalid(format!("config key `params.p`: {e}")))
}

/// Seeded data `amplitude · vol · ⟨k⟩^{-2} · (ξ + iη)`, `ξ, η` uniform on `[-1, 1]`.
fn random_field(lattice: &Arc<DualLattice>, amplitude: f64, rng: &mut ChaCha8Rng) -> FourierField {
    let vol = lattice.spec.volume();
    let coeffs = (0..lattice.len())
        .map(|i| {
            let k = lattice.k(i);
            let w = amplitude * vol / (1.0 + k.iter().map(|x| x * x).sum::<f64>());
            Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)) * w
        })
        .collect();
    FourierField::from_coeffs(lattice.clone(), coeffs).expect("coefficient count matches the lattice")
}

fn read_field(path: &std::path::Path, lattice: &Arc<DualLattice>) -> Result<FourierField> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(FourierField::from_json(&value, lattice.clone())?)
}

pub fn classify(ctx: &RunContext, p: ClassifyParams) -> Result<()> {
    let s = required(&p.s, "s", "s")?;
    let l = required(&p.l, "l", "l")?;
    let d = required(&p.d, "d", "d")?;
    let point = classify_text(&s.0, &l.0, d)?;
    println!("{}", point.verdict);
    if ctx.output.is_some() {
        let h = header(ctx, None, &p)?;
        write_json(ctx.output.as_deref(), &h, json!({ "s": s.0, "l": l.0, "d": d, "verdict": point.verdict }))?;
    }
    Ok(())
}

pub fn resonances(ctx: &RunContext, p: ResonanceParams, t: TorusArgs) -> Result<()> {
    let spec = t.build(None)?;
    let kmax = required(&p.kmax, "kmax", "kmax")?;
    let sigma = required(&p.sigma, "sigma", "sigma")?;
    if sigma != 1 && sigma != -1 {
        return Err(invalid(format!("config key `params.sigma` must be +1 or -1 (got {sigma})")));
    }
    let c = required(&p.threshold, "threshold", "threshold")?;
    let threshold = if p.linear.unwrap_or(false) { Threshold::Linear(c) } else { Threshold::Absolute(c) };
    let d = spec.d;
    let lattice = DualLattice::cube(spec.clone(), kmax)?;
    let records = enumerate_near_resonant(&lattice, sigma, threshold);
    let mut columns: Vec<String> = (1..=d).map(|j| format!("k{j}")).collect();
    columns.extend((1..=d).map(|j| format!("kprime{j}")));
    columns.push("sigma".into());
    columns.push("M".into());
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row: Vec<String> = r.k.iter().chain(&r.kprime).map(|&x| num(x)).collect();
            row.push(r.sigma.to_string());
            row.push(num(r.value));
            row
        })
        .collect();
    write_csv(ctx.output.as_deref(), &header(ctx, Some(&spec), &p)?, &columns, &rows)
}

pub fn count(ctx: &RunContext, p: CountParams, t: TorusArgs) -> Result<()> {
    let spec = t.build(None)?;
    let d = spec.d;
    let mut base = AnnulusSlabDomain::new(
        d,
        required(&p.n, "N", "N")?,
        required(&p.mu, "mu", "mu")?,
        required(&p.nu, "nu", "nu")?,
        required(&p.x, "X", "X")?,
    );
    if let Some(r) = p.n0 {
        let center = p.center.clone().unwrap_or_else(|| vec![0.0; d]);
        if center.len() != d {
            return Err(invalid(format!("config key `params.center` must have {d} entries")));
        }
        base.ball = Some((center, r));
    }
    base.theta = p.theta;
    let rotations = p.rotations.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let domains: Vec<AnnulusSlabDomain> = if rotations == 0 {
        vec![base]
    } else {
        (0..rotations)
            .map(|_| AnnulusSlabDomain { rotation: random_rotation(d, &mut rng), ..base.clone() })
            .collect()
    };
    let results = domains
        .par_iter()
        .map(|dom| count_lattice_in_domain(dom, &spec.gamma))
        .collect::<zlab_core::Result<Vec<_>>>()?;
    let columns: Vec<String> =
        ["rotation", "N", "mu", "nu", "X", "N0", "theta", "exact", "bound", "ratio"].map(String::from).to_vec();
    let rows = domains
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (dom, r))| {
            vec![
                i.to_string(),
                num(dom.n),
                num(dom.mu),
                num(dom.nu),
                num(dom.x),
                num(dom.n0()),
                dom.theta.map(num).unwrap_or_default(),
                r.exact.to_string(),
                num(r.bound_value),
                num(r.ratio),
            ]
        })
        .collect::<Vec<_>>();
    write_csv(ctx.output.as_deref(), &header(ctx, Some(&spec), &p)?, &columns, &rows)
}

pub fn estimate(ctx: &RunContext, p: EstimateParams, t: TorusArgs) -> Result<()> {
    let class = p
        .class
        .as_deref()
        .map(InteractionClass::parse)
        .transpose()
        .map_err(|e| invalid(format!("config key `params.class`: {e}")))?;
    let mut jobs: Vec<(String, f64, DyadicBlockSpec)> = Vec::new();
    let torus = match p.sweeps.as_deref() {
        Some("committed") => {
            for sweep in committed_sweeps() {
                if class.is_some_and(|c| c != sweep.class) {
                    continue;
                }
                for (x, spec) in sweep.specs {
                    jobs.push((sweep.parameter.clone(), x, spec));
                }
            }
            None
        }
        Some(other) => return Err(invalid(format!("config key `params.sweeps`: unknown sweep set {other:?}"))),
        None => {
            let torus = t.build(None)?;
            let g = required(&p.grid_spec, "grid_spec", "grid-spec")?;
            if g.len() != 6 {
                return Err(invalid("config key `params.grid_spec` needs N0,N1,N2,L0,L1,L2"));
            }
            let class = class.ok_or_else(|| invalid("missing required key `params.class` (flag --class)"))?;
            let spec = DyadicBlockSpec {
                n0: g[0],
                n1: g[1],
                n2: g[2],
                l0: g[3],
                l1: g[4],
                l2: g[5],
                sigma: p.sigma.unwrap_or(1),
                class,
                gamma: torus.gamma.clone(),
            };
            spec.validate().map_err(|e| invalid(format!("config key `params.grid_spec`: {e}")))?;
            jobs.push(("single".into(), 1.0, spec));
            Some(torus)
        }
    };
    let opts = HopmOptions {
        tol: p.tol.unwrap_or(1e-6),
        max_iter: p.max_iter.unwrap_or(200),
        restarts: p.restarts.unwrap_or(3),
        seed: ctx.seed,
    };
    let results = jobs
        .par_iter()
        .map(|(_, _, spec)| sharp_constant(spec, &opts))
        .collect::<zlab_core::Result<Vec<_>>>()?;
    let columns: Vec<String> = [
        "sweep", "x", "class", "N0", "N1", "N2", "L0", "L1", "L2", "sigma", "gamma", "constant", "paper_bound",
        "ratio", "iterations", "converged",
    ]
    .map(String::from)
    .to_vec();
    let rows = jobs
        .iter()
        .zip(&results)
        .map(|((sweep, x, s), r)| {
            vec![
                sweep.clone(),
                num(*x),
                s.class.name().to_string(),
                s.n0.to_string(),
                s.n1.to_string(),
                s.n2.to_string(),
                s.l0.to_string(),
                s.l1.to_string(),
                s.l2.to_string(),
                s.sigma.to_string(),
                s.gamma.iter().map(|g| num(*g)).collect::<Vec<_>>().join(" "),
                num(r.constant),
                num(r.paper_bound),
                num(r.ratio),
                r.iterations.to_string(),
                r.converged.to_string(),
            ]
        })
        .collect::<Vec<_>>();
    write_csv(ctx.output.as_deref(), &header(ctx, torus.as_ref(), &p)?, &columns, &rows)
}

fn dyadic_range(lo: i64, hi: i64) -> Result<Vec<i64>> {
    if lo < 2 || hi < lo {
        return Err(invalid("config keys `params.Nmin`, `params.Nmax` need 2 ≤ Nmin ≤ Nmax"));
    }
    Ok(std::iter::successors(Some(lo), |n| n.checked_mul(2)).take_while(|&n| n <= hi).collect())
}

fn slope_of(ns: &[i64], ys: &[f64]) -> Value {
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    fit_power_law(&x, ys).map(|f| serde_json::to_value(f).unwrap_or(Value::Null)).unwrap_or(Value::Null)
}

pub fn inflate(ctx: &RunContext, p: InflateParams, t: TorusArgs) -> Result<()> {
    let case_text = required(&p.case, "case", "case")?;
    let case = Case::parse(&case_text).ok_or_else(|| invalid(format!("config key `params.case`: unknown case {case_text:?}")))?;
    let spec = t.build(Some(&[1.0, 2f64.sqrt()]))?;
    let s = required(&p.s, "s", "s")?;
    let l = required(&p.l, "l", "l")?;
    let ns = dyadic_range(p.n_min.unwrap_or(16), p.n_max.unwrap_or(512))?;
    let body = match case {
        Case::I | Case::Ii => {
            let mut cfg = InflationConfig::new(
                &spec.gamma,
                s,
                l,
                required(&p.s_prime, "s_prime", "sprime")?,
                required(&p.l_prime, "l_prime", "lprime")?,
                ns,
                p.t.clone().unwrap_or_else(|| vec![0.2]),
            )
            .map_err(|e| invalid(format!("config key `params`: {e}")))?;
            cfg.beta = spec.beta.clone();
            cfg.solver_n_max = p.solver_n_max;
            if let Some(dt) = p.solver_dt {
                cfg.solver_dt = dt;
            }
            cfg.validate().map_err(|e| invalid(format!("config key `params`: {e}")))?;
            let report = run_inflation_experiment(&cfg)?;
            json!({
                "case": case,
                "per_N": report.per_n,
                "predicted_slope": report.predicted_slope,
                "slopes": report.slopes,
            })
        }
        Case::Iii | Case::Iv => {
            let values = ns.iter().map(|&n| not_c2_probe(case, n, s, l, &spec)).collect::<zlab_core::Result<Vec<_>>>()?;
            let per_n: Vec<Value> = ns
                .iter()
                .zip(&values)
                .map(|(&n, v)| json!({ "N": n, "t": probe_time(case, n, spec.gamma[0]), "probe": v }))
                .collect();
            json!({ "case": case, "per_N": per_n, "predicted_slope": 0.0, "slope": slope_of(&ns, &values) })
        }
        Case::Bourgain => {
            let pairings = match p.which.as_deref() {
                None => Pairing::ALL.to_vec(),
                Some(w) => vec![Pairing::parse(w).ok_or_else(|| invalid(format!("config key `params.which`: unknown pairing {w:?}")))?],
            };
            let b = p.b.unwrap_or(0.5);
            let lp = lp(p.p)?;
            let mut out = Vec::new();
            for which in pairings {
                let ratios = ns
                    .par_iter()
                    .map(|&n| bourgain_counterexample_ratio(n, s, l, b, lp, which, &spec))
                    .collect::<zlab_core::Result<Vec<_>>>()?;
                let per_n: Vec<Value> = ns.iter().zip(&ratios).map(|(&n, r)| json!({ "N": n, "ratio": r })).collect();
                out.push(json!({
                    "which": which,
                    "per_N": per_n,
                    "predicted_slope": which.predicted_exponent(s, l),
                    "slope": slope_of(&ns, &ratios),
                }));
            }
            json!({ "case": case, "b": b, "p": lp, "pairings": out })
        }
    };
    write_json(ctx.output.as_deref(), &header(ctx, Some(&spec), &p)?, body)
}

fn parse_scheme(text: Option<&str>) -> Result<Scheme> {
    match text.unwrap_or("exponential") {
        "exponential" | "ExponentialIntegrator" => Ok(Scheme::ExponentialIntegrator),
        "strang" | "StrangSplitting" => Ok(Scheme::StrangSplitting),
        other => Err(invalid(format!("config key `params.scheme`: unknown scheme {other:?}"))),
    }
}

fn parse_quadrature(text: Option<&str>) -> Result<Quadrature> {
    match text.unwrap_or("midpoint") {
        "midpoint" | "Midpoint" => Ok(Quadrature::Midpoint),
        "gauss2" | "Gauss2" => Ok(Quadrature::Gauss2),
        other => Err(invalid(format!("config key `params.quadrature`: unknown quadrature {other:?}"))),
    }
}

pub fn solve(ctx: &RunContext, p: SolveParams, t: TorusArgs) -> Result<()> {
    let spec = t.build(None)?;
    let lattice = Arc::new(DualLattice::cube(spec.clone(), p.kmax.unwrap_or(8))?);
    let mut cfg = SolverConfig::new(required(&p.dt, "dt", "dt")?, required(&p.t_final, "T", "T")?);
    cfg.scheme = parse_scheme(p.scheme.as_deref())?;
    cfg.quadrature = parse_quadrature(p.quadrature.as_deref())?;
    cfg.sample_every = p.sample_every.unwrap_or(1);
    cfg.snap_every = p.snap_every;
    cfg.s = p.s.unwrap_or(1.0);
    cfg.l = p.l.unwrap_or(0.0);
    cfg.validate().map_err(|e| invalid(format!("config key `params`: {e}")))?;
    if cfg.snap_every.is_some() && p.snapshots.is_none() {
        return Err(invalid("config key `params.snap_every` needs `params.snapshots` (flag --snapshots)"));
    }
    let amplitude = p.amplitude.unwrap_or(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut field = |path: &Option<std::path::PathBuf>, real: bool| -> Result<FourierField> {
        let f = match path {
            Some(path) => read_field(path, &lattice)?,
            None => random_field(&lattice, amplitude, &mut rng),
        };
        Ok(if real { f.into_real() } else { f })
    };
    let u0 = field(&p.u0, false)?;
    let mut n0 = field(&p.n0, true)?;
    let mut n1 = field(&p.n1, true)?;
    // Random wave data are mean-zero so that the Hamiltonian stays defined.
    for (path, f) in [(&p.n0, &mut n0), (&p.n1, &mut n1)] {
        if path.is_none() {
            f.coeffs[lattice.zero_index()] = Complex64::new(0.0, 0.0);
        }
    }
    let traj = evolve(&u0, &n0, &n1, &cfg)?;
    let h = header(ctx, Some(&spec), &p)?;
    if let Some(path) = &p.snapshots {
        let snaps: Vec<Value> = traj
            .snapshots
            .iter()
            .map(|st| json!({ "t": st.t, "u": st.u.to_json(), "n": st.n().to_json(), "nt": st.nt().to_json() }))
            .collect();
        write_json_lines(Some(path), &h, &snaps)?;
    }
    write_json_lines(ctx.output.as_deref(), &h, &traj.samples)
}

pub fn norms(ctx: &RunContext, p: NormsParams, t: TorusArgs) -> Result<()> {
    let spec = t.build(None)?;
    let lattice = Arc::new(DualLattice::cube(spec.clone(), p.kmax.unwrap_or(8))?);
    let u0 = match &p.u {
        Some(path) => read_field(path, &lattice)?,
        None => random_field(&lattice, p.amplitude.unwrap_or(1.0), &mut ChaCha8Rng::seed_from_u64(ctx.seed)),
    };
    let ty = Modulation::parse(p.ty.as_deref().unwrap_or("S")).map_err(|e| invalid(format!("config key `params.type`: {e}")))?;
    let params = BourgainParams { s: p.s.unwrap_or(0.0), b: p.b.unwrap_or(0.5), p: lp(p.p)?, ty };
    let delta = p.delta.unwrap_or(1.0);
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("config key `params.delta` must lie in (0, 1] (got {delta})")));
    }
    // Free evolution whose spectrum sits on the characteristic of `ty`.
    let dt = default_dt(&lattice);
    let steps = (2.0 * delta / dt).ceil() as i64;
    let freq: Vec<f64> = (0..lattice.len())
        .map(|i| {
            let k = lattice.k(i);
            let a = k.iter().map(|x| x * x).sum::<f64>();
            match ty {
                Modulation::S => a,
                Modulation::WPlus | Modulation::W => a.sqrt(),
                Modulation::WMinus => -a.sqrt(),
            }
        })
        .collect();
    let samples: Vec<Vec<Complex64>> = (-steps..=steps)
        .map(|j| {
            let time = j as f64 * dt;
            u0.coeffs.iter().zip(&freq).map(|(c, w)| c * Complex64::from_polar(1.0, -time * w)).collect()
        })
        .collect();
    let traj = SampledTrajectory { lattice: lattice.clone(), t0: -(steps as f64) * dt, dt, samples };
    let spectrum = window_and_transform(&traj, delta, TransformOptions::default())?;
    let shells = shell_norms(&spectrum, ty);
    let h = header(ctx, Some(&spec), &p)?;
    match p.format.as_deref().unwrap_or("json") {
        "csv" => {
            let rows: Vec<Vec<String>> = shells.iter().map(|(n, l, v)| vec![n.to_string(), l.to_string(), num(*v)]).collect();
            write_csv(ctx.output.as_deref(), &h, &["N", "L", "norm"].map(String::from), &rows)
        }
        "json" => {
            let table: Vec<Value> = shells.iter().map(|(n, l, v)| json!({ "N": n, "L": l, "norm": v })).collect();
            write_json(
                ctx.output.as_deref(),
                &h,
                json!({
                    "sobolev_norm": sobolev_norm(&u0, params.s),
                    "bourgain_norm": bourgain_norm(&spectrum, &params),
                    "shells": table,
                }),
            )
        }
        other => Err(invalid(format!("config key `params.format`: unknown format {other:?}"))),
    }
}
