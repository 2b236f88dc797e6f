//! Special data for the ill-posedness counterexamples: two-mode initial data
//! built on the resonant pair, closed forms of their quadratic Picard iterates,
//! norm-inflation sweeps, non-C² probes and Bourgain-space counterexamples.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{shells_at, LpExponent, Modulation};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, PowerFit};
use crate::resonance::{construct_resonant_pair, ResonantPair};
use crate::solver::{evolve, SolverConfig};
use crate::torus::{sobolev_norm, DualLattice, FourierField, Idx, TorusSpec};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `∫_0^t e^{iat'} dt' = (e^{iat} - 1)/(ia)`, equal to `t` at `a = 0`.
pub fn phase_integral(a: f64, t: f64) -> Complex64 {
    if a == 0.0 {
        return Complex64::new(t, 0.0);
    }
    let half = (0.5 * a * t).sin();
    Complex64::new((a * t).sin() / a, 2.0 * half * half / a)
}

/// `∫_0^t cos(ωt') e^{iδt'} dt'`.
fn cos_phase_integral(omega: f64, delta: f64, t: f64) -> Complex64 {
    0.5 * (phase_integral(delta + omega, t) + phase_integral(delta - omega, t))
}

/// `∫_0^t sin((t-t')ω)/ω e^{-iδt'} dt'` for `ω > 0`.
fn sinc_phase_integral(omega: f64, delta: f64, t: f64) -> Complex64 {
    let a = Complex64::from_polar(1.0, omega * t) * phase_integral(-(delta + omega), t);
    let b = Complex64::from_polar(1.0, -omega * t) * phase_integral(omega - delta, t);
    (a - b) / (2.0 * I * omega)
}

fn norm2(k: &[f64]) -> f64 {
    k.iter().map(|x| x * x).sum()
}

fn beta_norm2(spec: &TorusSpec, k: &[f64]) -> f64 {
    spec.beta.iter().zip(k).map(|(b, x)| b * x * x).sum()
}

fn require_plane(spec: &TorusSpec) -> Result<()> {
    spec.validate()?;
    if spec.d != 2 {
        return invalid(format!("the special data live on 2-d tori (got d = {})", spec.d));
    }
    Ok(())
}

fn require_n(n: i64) -> Result<()> {
    if n < 2 {
        return invalid(format!("N must be at least 2 (got {n})"));
    }
    Ok(())
}

fn require_beta1(spec: &TorusSpec) -> Result<()> {
    if spec.beta[0] == 0.0 {
        return Err(Error::Hypothesis("beta[0] must be nonzero".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    I,
    Ii,
    Iii,
    Iv,
    Bourgain,
}

impl Case {
    pub fn parse(s: &str) -> Option<Case> {
        match s.to_ascii_lowercase().as_str() {
            "i" => Some(Case::I),
            "ii" => Some(Case::Ii),
            "iii" => Some(Case::Iii),
            "iv" => Some(Case::Iv),
            "bourgain" => Some(Case::Bourgain),
            _ => None,
        }
    }
}

/// Spacetime spectra of the Bourgain counterexample: unit masses at one
/// frequency each, times the indicator of a modulation window of half-width
/// `half_width` centred at `tau_center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowedMode {
    pub m: Idx,
    pub k: Vec<f64>,
    pub tau_center: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BourgainSpectra {
    pub u: WindowedMode,
    pub v: WindowedMode,
    pub w: WindowedMode,
}

#[derive(Clone, Debug)]
pub struct CounterexampleData {
    pub case: Case,
    pub n: i64,
    pub pair: Option<ResonantPair>,
    pub u0: Option<FourierField>,
    pub n0: Option<FourierField>,
    pub n1: Option<FourierField>,
    pub spectra: Option<BourgainSpectra>,
}

/// Lattice holding the data modes and every quadratic interaction of them.
fn lattice_for(spec: &TorusSpec, modes: &[Idx]) -> Result<Arc<DualLattice>> {
    let mut kmax = vec![0usize; spec.d];
    for m in modes {
        for j in 0..spec.d {
            kmax[j] = kmax[j].max(2 * m[j].unsigned_abs() as usize);
        }
    }
    Ok(Arc::new(DualLattice::new(spec.clone(), &kmax)?))
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Builds the data of the given case at frequency scale `n`. Cases i and ii
/// share the data `u0 = N^{-s} f_N`, `n0 = N^{-l} g_N` with
/// `f_N = e^{iK·x} + e^{iK̃·x}` and `g_N = cos((K - K̃)·x)`.
pub fn make_counterexample(case: Case, n: i64, spec: &TorusSpec, s: f64, l: f64) -> Result<CounterexampleData> {
    require_plane(spec)?;
    require_n(n)?;
    let vol = spec.volume();
    let nf = n as f64;
    let mut data = CounterexampleData { case, n, pair: None, u0: None, n0: None, n1: None, spectra: None };
    match case {
        Case::I | Case::Ii => {
            let pair = construct_resonant_pair(n, &spec.gamma)?;
            let (mk, mt) = (pair.m_k, pair.m_ktilde);
            let mc: Idx = [mk[0] - mt[0], mk[1] - mt[1], 0];
            let mneg: Idx = [-mc[0], -mc[1], 0];
            let lat = lattice_for(spec, &[mk, mt, mc])?;
            let a = vol * nf.powf(-s);
            let b = 0.5 * vol * nf.powf(-l);
            data.u0 = Some(FourierField::from_modes(lat.clone(), &[(mk, c(a)), (mt, c(a))])?);
            data.n0 = Some(FourierField::from_modes(lat.clone(), &[(mc, c(b)), (mneg, c(b))])?.assert_real()?);
            data.n1 = Some(FourierField::zeros(lat).with_flag(true));
            data.pair = Some(pair);
        }
        Case::Iii => {
            let m: Idx = [n, 0, 0];
            let lat = lattice_for(spec, &[m])?;
            let b = 0.5 * vol * nf.powf(-l);
            data.u0 = Some(FourierField::from_modes(lat.clone(), &[([0, 0, 0], c(vol))])?);
            data.n0 = Some(FourierField::from_modes(lat.clone(), &[(m, c(b)), ([-n, 0, 0], c(b))])?.assert_real()?);
            data.n1 = Some(FourierField::zeros(lat).with_flag(true));
        }
        Case::Iv => {
            let m: Idx = [n, 0, 0];
            let lat = lattice_for(spec, &[m])?;
            data.u0 = Some(FourierField::from_modes(lat.clone(), &[([0, 0, 0], c(vol)), (m, c(vol * nf.powf(-s)))])?);
            data.n0 = Some(FourierField::zeros(lat.clone()).with_flag(true));
            data.n1 = Some(FourierField::zeros(lat).with_flag(true));
        }
        Case::Bourgain => {
            let pair = construct_resonant_pair(n, &spec.gamma)?;
            let half_width = 10.0 / (spec.gamma[1] * spec.gamma[1]);
            let kc: Vec<f64> = pair.ktilde.iter().zip(&pair.k).map(|(a, b)| a - b).collect();
            let (mk, mt) = (pair.m_k, pair.m_ktilde);
            data.spectra = Some(BourgainSpectra {
                u: WindowedMode { m: mk, k: pair.k.clone(), tau_center: -norm2(&pair.k), half_width },
                v: WindowedMode { m: mt, k: pair.ktilde.clone(), tau_center: -norm2(&pair.ktilde), half_width },
                w: WindowedMode {
                    m: [mt[0] - mk[0], mt[1] - mk[1], 0],
                    tau_center: -norm2(&kc).sqrt(),
                    k: kc,
                    half_width,
                },
            });
            data.pair = Some(pair);
        }
    }
    Ok(data)
}

/// `F_x u^{(2)}[u0, n0, 0](t, K_N)` for the case-i data.
pub fn closed_form_u2_hat(t: f64, n: i64, s: f64, l: f64, spec: &TorusSpec) -> Result<Complex64> {
    require_plane(spec)?;
    require_n(n)?;
    let pair = construct_resonant_pair(n, &spec.gamma)?;
    let vol = spec.volume();
    let nf = n as f64;
    let k2 = norm2(&pair.k);
    let omega = norm2(&pair.wave_frequency()).sqrt();
    // |K|² - |K̃|² = residual - |K - K̃|
    let delta = pair.residual - omega;
    let amp = -I * spec.lambda * 0.5 * vol * nf.powf(-s - l);
    Ok(amp * Complex64::from_polar(1.0, -t * k2) * cos_phase_integral(omega, delta, t))
}

/// `F_x n^{(2)}[u0](t, K_N - K̃_N)` for `u0 = N^{-s} f_N`.
pub fn closed_form_n2_hat(t: f64, n: i64, s: f64, spec: &TorusSpec) -> Result<Complex64> {
    require_plane(spec)?;
    require_n(n)?;
    require_beta1(spec)?;
    let pair = construct_resonant_pair(n, &spec.gamma)?;
    let vol = spec.volume();
    let kc = pair.wave_frequency();
    let omega = norm2(&kc).sqrt();
    let delta = pair.residual - omega;
    let amp = beta_norm2(spec, &kc) * vol * (n as f64).powf(-2.0 * s);
    Ok(amp * sinc_phase_integral(omega, delta, t))
}

/// `‖n^{(2)}[N^{-s}f_N](t)‖_{H^r}`; the iterate lives on `±(K - K̃)`.
pub fn closed_form_n2_norm(t: f64, n: i64, s: f64, r: f64, spec: &TorusSpec) -> Result<f64> {
    let v = closed_form_n2_hat(t, n, s, spec)?;
    let pair = construct_resonant_pair(n, &spec.gamma)?;
    let br2 = 1.0 + norm2(&pair.wave_frequency());
    Ok((2.0 * v.norm_sqr() * br2.powf(r) / spec.gamma_product()).sqrt())
}

/// `F_x u^{(2)}(t, (N/γ₁, 0))` for the case-iii data.
pub fn closed_form_case_iii(t: f64, n: i64, l: f64, spec: &TorusSpec) -> Result<Complex64> {
    require_plane(spec)?;
    require_n(n)?;
    let omega = n as f64 / spec.gamma[0];
    let amp = -I * spec.lambda * 0.5 * spec.volume() * (n as f64).powf(-l);
    Ok(amp * Complex64::from_polar(1.0, -t * omega * omega) * cos_phase_integral(omega, omega * omega, t))
}

/// `F_x n^{(2)}(t, (N/γ₁, 0))` for the case-iv data.
pub fn closed_form_case_iv(t: f64, n: i64, s: f64, spec: &TorusSpec) -> Result<Complex64> {
    require_plane(spec)?;
    require_n(n)?;
    require_beta1(spec)?;
    let omega = n as f64 / spec.gamma[0];
    let amp = spec.beta[0] * omega * omega * spec.volume() * (n as f64).powf(-s);
    Ok(amp * sinc_phase_integral(omega, omega * omega, t))
}

/// Scaled non-C² probe at the designated time: `N^{l+2}|F_x u^{(2)}|` at
/// `t = γ₁²/(100N²)` for case iii, `N^{s+1}|F_x n^{(2)}|` at `t = πγ₁/(2N)`
/// for case iv.
pub fn not_c2_probe(case: Case, n: i64, s: f64, l: f64, spec: &TorusSpec) -> Result<f64> {
    let nf = n as f64;
    let g1 = spec.gamma.first().copied().unwrap_or(1.0);
    match case {
        Case::Iii => {
            let t = g1 * g1 / (100.0 * nf * nf);
            Ok(nf.powf(l + 2.0) * closed_form_case_iii(t, n, l, spec)?.norm())
        }
        Case::Iv => {
            let t = std::f64::consts::PI * g1 / (2.0 * nf);
            Ok(nf.powf(s + 1.0) * closed_form_case_iv(t, n, s, spec)?.norm())
        }
        _ => invalid("the non-C2 probe is defined for cases iii and iv"),
    }
}

/// Probe time of [`not_c2_probe`].
pub fn probe_time(case: Case, n: i64, gamma1: f64) -> Option<f64> {
    let nf = n as f64;
    match case {
        Case::Iii => Some(gamma1 * gamma1 / (100.0 * nf * nf)),
        Case::Iv => Some(std::f64::consts::PI * gamma1 / (2.0 * nf)),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `0 < 2s'-1 < l' < 1`, `l' = 2s₊-1`.
    Low,
    /// `1 < 2s'-1 < l' < s'+1/2`, `l' = s₊`, `l₋ = s₊-1 = 2s₋-1`.
    High,
    /// `s' = 1/2`, `l' = 0`.
    Endpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflationConfig {
    pub gamma: Vec<f64>,
    #[serde(default = "unit_beta")]
    pub beta: Vec<f64>,
    pub s: f64,
    pub l: f64,
    pub s_prime: f64,
    pub l_prime: f64,
    pub s_plus: Option<f64>,
    pub s_minus: Option<f64>,
    pub l_minus: Option<f64>,
    pub n_list: Vec<i64>,
    pub t_list: Vec<f64>,
    /// Largest `N` run through the full solver (none: closed form only).
    #[serde(default)]
    pub solver_n_max: Option<i64>,
    #[serde(default = "default_dt")]
    pub solver_dt: f64,
}

fn unit_beta() -> Vec<f64> {
    vec![1.0, 1.0]
}

fn default_dt() -> f64 {
    1e-3
}

impl InflationConfig {
    /// Fills `s₊, s₋, l₋` from `(s', l')` according to the branch.
    pub fn new(gamma: &[f64], s: f64, l: f64, s_prime: f64, l_prime: f64, n_list: Vec<i64>, t_list: Vec<f64>) -> Result<Self> {
        let mut cfg = InflationConfig {
            gamma: gamma.to_vec(),
            beta: unit_beta(),
            s,
            l,
            s_prime,
            l_prime,
            s_plus: None,
            s_minus: None,
            l_minus: None,
            n_list,
            t_list,
            solver_n_max: None,
            solver_dt: default_dt(),
        };
        match cfg.branch() {
            Some(Branch::Low) => cfg.s_plus = Some((l_prime + 1.0) / 2.0),
            Some(Branch::High) => {
                cfg.s_plus = Some(l_prime);
                cfg.l_minus = Some(l_prime - 1.0);
                cfg.s_minus = Some(l_prime / 2.0);
            }
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn branch(&self) -> Option<Branch> {
        let e = 2.0 * self.s_prime - 1.0;
        if self.s_prime == 0.5 && self.l_prime == 0.0 {
            Some(Branch::Endpoint)
        } else if 0.0 < e && e < self.l_prime && self.l_prime < 1.0 {
            Some(Branch::Low)
        } else if 1.0 < e && e < self.l_prime && self.l_prime < self.s_prime + 0.5 {
            Some(Branch::High)
        } else {
            None
        }
    }

    pub fn spec(&self) -> Result<TorusSpec> {
        TorusSpec::standard(&self.gamma)?.with_beta(&self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        let hyp = |m: &str| Err(Error::Hypothesis(m.into()));
        require_plane(&self.spec()?)?;
        require_beta1(&self.spec()?)?;
        let tol = 1e-12;
        match self.branch() {
            None => return hyp("(s', l') must satisfy 0 < 2s'-1 < l' < 1, 1 < 2s'-1 < l' < s'+1/2, or s' = 1/2, l' = 0"),
            Some(Branch::Low) => {
                let sp = self.s_plus.ok_or_else(|| Error::Hypothesis("s_plus is required".into()))?;
                if (self.l_prime - (2.0 * sp - 1.0)).abs() > tol {
                    return hyp("l' = 2 s_plus - 1 violated");
                }
            }
            Some(Branch::High) => {
                let (Some(sp), Some(sm), Some(lm)) = (self.s_plus, self.s_minus, self.l_minus) else {
                    return hyp("s_plus, s_minus and l_minus are required");
                };
                if (self.l_prime - sp).abs() > tol {
                    return hyp("l' = s_plus violated");
                }
                if (lm - (sp - 1.0)).abs() > tol {
                    return hyp("l_minus = s_plus - 1 violated");
                }
                if (lm - (2.0 * sm - 1.0)).abs() > tol {
                    return hyp("l_minus = 2 s_minus - 1 violated");
                }
            }
            Some(Branch::Endpoint) => {}
        }
        if self.branch() != Some(Branch::Endpoint) {
            if !(self.s < self.s_prime) {
                return hyp("s < s' violated");
            }
            if !(self.l >= self.l_prime) {
                return hyp("l >= l' violated");
            }
        }
        if self.n_list.is_empty() || self.n_list[0] < 2 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("N_list must be increasing integers >= 2");
        }
        if self.t_list.is_empty() || self.t_list.iter().any(|t| *t == 0.0 || !t.is_finite()) {
            return invalid("t_list must hold finite nonzero times");
        }
        if !(self.solver_dt > 0.0 && self.solver_dt.is_finite()) {
            return invalid("solver_dt must be positive");
        }
        Ok(())
    }

    pub fn predicted_slope(&self) -> f64 {
        self.l_prime - 2.0 * self.s_prime + 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationPoint {
    #[serde(rename = "N")]
    pub n: i64,
    pub t: f64,
    /// `‖u_{0,N}‖_{H^{s'}}`.
    pub u0_hs_prime: f64,
    /// `‖u_{0,N}‖_{H^s}`.
    pub u0_hs: f64,
    pub closed_form: f64,
    pub solver: Option<f64>,
    pub solver_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub t: f64,
    pub closed_form: Option<PowerFit>,
    pub solver: Option<PowerFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationReport {
    pub per_n: Vec<InflationPoint>,
    pub predicted_slope: f64,
    pub slopes: Vec<SlopeReport>,
}

/// `‖N^{-s'} f_N‖_{H^r}`.
fn u0_norm(pair: &ResonantPair, n: i64, s: f64, r: f64, spec: &TorusSpec) -> f64 {
    let a = spec.volume() * (n as f64).powf(-s);
    let sum = (1.0 + norm2(&pair.k)).powf(r) + (1.0 + norm2(&pair.ktilde)).powf(r);
    (a * a * sum / spec.gamma_product()).sqrt()
}

/// `‖n_N(t)‖_{H^r}` from the full solver with data `(u0, 0, 0)` on a lattice
/// holding `K_N` and `K̃_N` within half of each axis.
fn solver_norm(data: &CounterexampleData, t: f64, r: f64, dt: f64) -> Result<f64> {
    let pair = data.pair.as_ref().expect("case-i data carry the pair");
    let spec = data.u0.as_ref().expect("case-i data carry u0").lattice.spec.clone();
    let kmax: Vec<usize> = (0..2)
        .map(|j| 2 * pair.m_k[j].unsigned_abs().max(pair.m_ktilde[j].unsigned_abs()) as usize)
        .collect();
    let lat = Arc::new(DualLattice::new(spec, &kmax)?);
    let modes: Vec<(Idx, Complex64)> = [pair.m_k, pair.m_ktilde]
        .iter()
        .map(|m| (*m, data.u0.as_ref().unwrap().get(m)))
        .collect();
    let u0 = FourierField::from_modes(lat.clone(), &modes)?;
    let zero = FourierField::zeros(lat).with_flag(true);
    let steps = (t.abs() / dt).ceil().max(1.0);
    let mut cfg = SolverConfig::new(t.abs() / steps, t.abs());
    cfg.sample_every = usize::MAX;
    let u0 = if t < 0.0 { u0.conj().reflect() } else { u0 };
    let traj = evolve(&u0, &zero, &zero, &cfg)?;
    let v = sobolev_norm(&traj.final_state.n(), r);
    if !v.is_finite() {
        return Err(Error::Numerical(format!("solver diverged at N = {}", data.n)));
    }
    Ok(v)
}

/// Norm-inflation sweep of `‖n^{(2)}[u_{0,N}](t)‖_{H^{l'}}` (closed form) and
/// `‖n_N(t)‖_{H^{l'}}` (full solver, `N ≤ solver_n_max`) with
/// `u_{0,N} = N^{-s'} f_N`.
pub fn run_inflation_experiment(config: &InflationConfig) -> Result<InflationReport> {
    config.validate()?;
    let spec = config.spec()?;
    let jobs: Vec<(i64, f64)> =
        config.t_list.iter().flat_map(|&t| config.n_list.iter().map(move |&n| (n, t))).collect();
    let per_n: Vec<InflationPoint> = jobs
        .par_iter()
        .map(|&(n, t)| -> Result<InflationPoint> {
            let pair = construct_resonant_pair(n, &spec.gamma)?;
            let closed_form = closed_form_n2_norm(t, n, config.s_prime, config.l_prime, &spec)?;
            let (solver, solver_error) = match config.solver_n_max {
                Some(cap) if n <= cap => {
                    let data = make_counterexample(Case::Ii, n, &spec, config.s_prime, config.l_prime)?;
                    match solver_norm(&data, t, config.l_prime, config.solver_dt) {
                        Ok(v) => (Some(v), None),
                        Err(e) => (None, Some(e.to_string())),
                    }
                }
                _ => (None, None),
            };
            Ok(InflationPoint {
                n,
                t,
                u0_hs_prime: u0_norm(&pair, n, config.s_prime, config.s_prime, &spec),
                u0_hs: u0_norm(&pair, n, config.s_prime, config.s, &spec),
                closed_form,
                solver,
                solver_error,
            })
        })
        .collect::<Result<_>>()?;
    let slopes = config
        .t_list
        .iter()
        .map(|&t| {
            let pts: Vec<&InflationPoint> = per_n.iter().filter(|p| p.t == t).collect();
            let xs: Vec<f64> = pts.iter().map(|p| p.n as f64).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.closed_form).collect();
            let solved: Vec<(f64, f64)> = pts.iter().filter_map(|p| p.solver.map(|v| (p.n as f64, v))).collect();
            let (sx, sy): (Vec<f64>, Vec<f64>) = solved.into_iter().unzip();
            SlopeReport { t, closed_form: fit_power_law(&xs, &ys).ok(), solver: fit_power_law(&sx, &sy).ok() }
        })
        .collect();
    Ok(InflationReport { per_n, predicted_slope: config.predicted_slope(), slopes })
}

/// Estimate whose failure a Bourgain counterexample ratio exhibits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pairing {
    /// `‖uw‖_{X^{s,b-1,p}_S} / (‖u‖_{X^{s,b,p}_S} ‖w‖_{X^{l,b,p}_{W+}})`.
    #[serde(rename = "uw")]
    Uw,
    /// `‖v w̄‖_{X^{s,b-1,p}_S} / (‖v‖_{X^{s,b,p}_S} ‖w̄‖_{X^{l,b,p}_{W-}})`.
    #[serde(rename = "vw_bar")]
    VwBar,
    /// `‖Δ_β⟨∇⟩^{-1}(u v̄)‖_{X^{l,b-1,p}_{W-}} / (‖u‖ ‖v‖)`.
    #[serde(rename = "uv_bar_wave")]
    UvBarWave,
    /// `‖Δ_β⟨∇⟩^{-1}(v ū)‖_{X^{l,b-1,p}_{W+}} / (‖v‖ ‖u‖)`.
    #[serde(rename = "vu_bar_wave")]
    VuBarWave,
}

impl Pairing {
    pub const ALL: [Pairing; 4] = [Pairing::Uw, Pairing::VwBar, Pairing::UvBarWave, Pairing::VuBarWave];

    pub fn parse(s: &str) -> Option<Pairing> {
        match s {
            "uw" => Some(Pairing::Uw),
            "vw_bar" | "vwbar" => Some(Pairing::VwBar),
            "uv_bar_wave" | "uvbar-wave" => Some(Pairing::UvBarWave),
            "vu_bar_wave" | "vubar-wave" => Some(Pairing::VuBarWave),
            _ => None,
        }
    }

    /// Growth exponent of the ratio in `N`.
    pub fn predicted_exponent(self, s: f64, l: f64) -> f64 {
        match self {
            Pairing::Uw | Pairing::VwBar => -l,
            Pairing::UvBarWave | Pairing::VuBarWave => l + 1.0 - 2.0 * s,
        }
    }
}

/// Profile in `τ` of a function supported at a single frequency, sampled at
/// `tau0 + j h`.
#[derive(Clone, Debug)]
struct Profile {
    abs_k: f64,
    tau0: f64,
    h: f64,
    values: Vec<f64>,
}

impl Profile {
    fn window(mode: &WindowedMode, h: f64) -> Profile {
        let n = (2.0 * mode.half_width / h).round() as usize + 1;
        Profile { abs_k: norm2(&mode.k).sqrt(), tau0: mode.tau_center - mode.half_width, h, values: vec![1.0; n] }
    }

    /// Profile of the conjugate function: `τ ↦ τ` reflected.
    fn conj(&self) -> Profile {
        let n = self.values.len();
        let mut values = self.values.clone();
        values.reverse();
        Profile { abs_k: self.abs_k, tau0: -(self.tau0 + (n - 1) as f64 * self.h), h: self.h, values }
    }

    /// `∫ f(τ₁) g(τ - τ₁) dτ₁`, placed at frequency `|k| = abs_k`.
    fn convolve(&self, other: &Profile, abs_k: f64) -> Profile {
        let (a, b) = (&self.values, &other.values);
        let mut values = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                values[i + j] += x * y * self.h;
            }
        }
        Profile { abs_k, tau0: self.tau0 + other.tau0, h: self.h, values }
    }

    fn scaled(mut self, c: f64) -> Profile {
        self.values.iter_mut().for_each(|v| *v *= c);
        self
    }

    /// `X^{r,b,p}` norm with smooth dyadic pieces in `|k|` and in the
    /// modulation `ty`.
    fn bourgain_norm(&self, r: f64, b: f64, p: LpExponent, ty: Modulation) -> f64 {
        let mut per_l: Vec<(u64, f64)> = Vec::new();
        for (j, v) in self.values.iter().enumerate() {
            let tau = self.tau0 + j as f64 * self.h;
            for (l, el) in shells_at(ty.weight(tau, self.abs_k)) {
                let a = v * v * el * el * self.h;
                match per_l.iter_mut().find(|(m, _)| *m == l) {
                    Some(e) => e.1 += a,
                    None => per_l.push((l, a)),
                }
            }
        }
        let terms = per_l.iter().map(|(l, a)| (*l as f64).powf(b) * a.sqrt());
        let lp = match p {
            LpExponent::One => terms.sum(),
            LpExponent::Two => terms.map(|x| x * x).sum::<f64>().sqrt(),
            LpExponent::Infinity => terms.fold(0.0, f64::max),
        };
        let sum_n: f64 = shells_at(self.abs_k).map(|(n, en)| ((n as f64).powf(r) * en).powi(2)).sum();
        sum_n.sqrt() * lp
    }
}

/// Points per unit of `τ` used to sample the windows.
const TAU_RESOLUTION: f64 = 40.0;

/// Left side over right side of the bilinear estimate named by `which`,
/// evaluated on the windowed single-mode spectra at scale `n`.
pub fn bourgain_counterexample_ratio(
    n: i64,
    s: f64,
    l: f64,
    b: f64,
    p: LpExponent,
    which: Pairing,
    spec: &TorusSpec,
) -> Result<f64> {
    let data = make_counterexample(Case::Bourgain, n, spec, s, l)?;
    let sp = data.spectra.expect("bourgain data carry spectra");
    let h = 1.0 / TAU_RESOLUTION;
    let u = Profile::window(&sp.u, h);
    let v = Profile::window(&sp.v, h);
    let w = Profile::window(&sp.w, h);
    let nu = u.bourgain_norm(s, b, p, Modulation::S);
    let nv = v.bourgain_norm(s, b, p, Modulation::S);
    let nw = w.bourgain_norm(l, b, p, Modulation::WPlus);
    let wave_symbol = |k: &[f64]| beta_norm2(spec, k) / (1.0 + norm2(k)).sqrt();
    let kw = &sp.w.k;
    let ratio = match which {
        Pairing::Uw => u.convolve(&w, v.abs_k).bourgain_norm(s, b - 1.0, p, Modulation::S) / (nu * nw),
        Pairing::VwBar => v.convolve(&w.conj(), u.abs_k).bourgain_norm(s, b - 1.0, p, Modulation::S) / (nv * nw),
        Pairing::UvBarWave => {
            let prod = u.convolve(&v.conj(), w.abs_k).scaled(wave_symbol(kw));
            prod.bourgain_norm(l, b - 1.0, p, Modulation::WMinus) / (nu * nv)
        }
        Pairing::VuBarWave => {
            let prod = v.convolve(&u.conj(), w.abs_k).scaled(wave_symbol(kw));
            prod.bourgain_norm(l, b - 1.0, p, Modulation::WPlus) / (nu * nv)
        }
    };
    Ok(ratio)
}
