//! Time integration of the first-order reduced system
//!
//! ```text
//! i∂_t u + Δu = (λ/2)(w + w̄)u,
//! i∂_t w − ⟨∇⟩w = −⟨∇⟩^{-1}Δ_β|u|² − ⟨∇⟩^{-1}(w + w̄)/2,
//! ```
//!
//! with `w = n + i⟨∇⟩^{-1}∂_t n`, plus Picard iteration of the windowed
//! integral equations and the quadratic Duhamel iterates.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::{
    bourgain_norm, psi_delta, window_and_transform, BourgainParams, LpExponent, Modulation,
    SampledTrajectory, TransformOptions,
};
use crate::error::{invalid, Error, Result};
use crate::grid::PaddedGrid;
use crate::quad::CompositeRule;
use crate::torus::{hamiltonian, mass, sobolev_norm, DualLattice, FourierField, SymbolTable};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    ExponentialIntegrator,
    StrangSplitting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    Midpoint,
    Gauss2,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub quadrature: Quadrature,
    /// Record diagnostics every this many steps.
    pub sample_every: usize,
    /// Keep full states every this many steps (none when absent).
    pub snap_every: Option<usize>,
    /// Regularities used for the `Hs_u`, `Hl_n`, `Hlm1_nt` diagnostics.
    pub s: f64,
    pub l: f64,
}

impl SolverConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        SolverConfig {
            dt,
            t_final,
            scheme: Scheme::ExponentialIntegrator,
            quadrature: Quadrature::Midpoint,
            sample_every: 1,
            snap_every: None,
            s: 1.0,
            l: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid("dt must be positive");
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return invalid("T must be positive");
        }
        if self.dt > self.t_final * (1.0 + 1e-12) {
            return invalid("dt must not exceed T");
        }
        if self.sample_every == 0 || self.snap_every == Some(0) {
            return invalid("sampling intervals must be positive");
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }
}

/// Solution state `(u, w)` at time `t`.
#[derive(Clone, Debug)]
pub struct ZakharovState {
    pub t: f64,
    pub u: FourierField,
    pub w: FourierField,
}

impl ZakharovState {
    /// `n = Re w`.
    pub fn n(&self) -> FourierField {
        real_part(&self.w)
    }

    /// `∂_t n = ⟨∇⟩ Im w`.
    pub fn nt(&self) -> FourierField {
        let im = imag_part(&self.w);
        let sym = SymbolTable::new(&self.w.lattice);
        let coeffs = im.coeffs.iter().zip(&sym.bracket).map(|(c, b)| c * b).collect();
        FourierField::from_coeffs(self.w.lattice.clone(), coeffs).unwrap().with_flag(true)
    }
}

/// Coefficients of `Re φ`: `(φ̂(k) + conj φ̂(-k))/2`.
pub fn real_part(f: &FourierField) -> FourierField {
    let n = f.coeffs.len();
    let coeffs = (0..n).map(|i| 0.5 * (f.coeffs[i] + f.coeffs[n - 1 - i].conj())).collect();
    FourierField::from_coeffs(f.lattice.clone(), coeffs).unwrap().with_flag(true)
}

/// Coefficients of `Im φ`: `(φ̂(k) - conj φ̂(-k))/(2i)`.
pub fn imag_part(f: &FourierField) -> FourierField {
    let n = f.coeffs.len();
    let coeffs = (0..n)
        .map(|i| (f.coeffs[i] - f.coeffs[n - 1 - i].conj()) / (2.0 * I))
        .collect();
    FourierField::from_coeffs(f.lattice.clone(), coeffs).unwrap().with_flag(true)
}

/// `w0 = n0 + i⟨∇⟩^{-1} n1`.
pub fn reduce_first_order(n0: &FourierField, n1: &FourierField) -> Result<FourierField> {
    n0.check_same(n1)?;
    for (name, f) in [("n0", n0), ("n1", n1)] {
        let defect = f.symmetry_defect();
        if defect > 1e-12 {
            return Err(Error::Precondition(format!(
                "{name} must be real (conjugate-symmetry defect {defect:.3e})"
            )));
        }
    }
    let sym = SymbolTable::new(&n0.lattice);
    let coeffs = (0..n0.coeffs.len())
        .map(|i| n0.coeffs[i] + I * n1.coeffs[i] / sym.bracket[i])
        .collect();
    FourierField::from_coeffs(n0.lattice.clone(), coeffs)
}

/// Reusable integrator bound to one lattice.
pub struct Solver {
    lattice: Arc<DualLattice>,
    grid: PaddedGrid,
    sym: SymbolTable,
    lambda: Complex64,
    scheme: Scheme,
    quadrature: Quadrature,
}

type Pair = (Vec<Complex64>, Vec<Complex64>);

impl Solver {
    pub fn new(lattice: Arc<DualLattice>, scheme: Scheme, quadrature: Quadrature) -> Result<Self> {
        if !lattice.spec.is_normalized() {
            return Err(Error::Precondition(
                "the solver requires normalized constants c0 = 1, alpha = (1,…,1)".into(),
            ));
        }
        let grid = PaddedGrid::new(&lattice);
        let sym = SymbolTable::new(&lattice);
        let lambda = lattice.spec.lambda;
        Ok(Solver { lattice, grid, sym, lambda, scheme, quadrature })
    }

    pub fn lattice(&self) -> &Arc<DualLattice> {
        &self.lattice
    }

    /// Nonlinear part of the right-hand side in Fourier variables.
    fn nonlinear(&self, u: &[Complex64], w: &[Complex64]) -> Pair {
        let n = u.len();
        let nre: Vec<Complex64> = (0..n).map(|i| 0.5 * (w[i] + w[n - 1 - i].conj())).collect();
        let pu = self.grid.to_physical(u);
        let pn = self.grid.to_physical(&nre);
        let prod: Vec<Complex64> = pu.iter().zip(&pn).map(|(a, b)| a * b.re).collect();
        let dens: Vec<Complex64> = pu.iter().map(|a| Complex64::new(a.norm_sqr(), 0.0)).collect();
        let nu = self.grid.from_physical(prod);
        let rho = self.grid.from_physical(dens);
        let fu = nu.iter().map(|c| -I * self.lambda * c).collect();
        let fw = (0..n)
            .map(|i| I * (nre[i] + self.sym.lap_beta[i] * rho[i]) / self.sym.bracket[i])
            .collect();
        (fu, fw)
    }

    /// Applies the free flow `e^{-i h |k|²}`, `e^{-i h ⟨k⟩}`.
    fn linear(&self, (u, w): &Pair, h: f64) -> Pair {
        let u2 = u
            .iter()
            .zip(&self.sym.k2)
            .map(|(c, k2)| c * Complex64::from_polar(1.0, -h * k2))
            .collect();
        let w2 = w
            .iter()
            .zip(&self.sym.bracket)
            .map(|(c, b)| c * Complex64::from_polar(1.0, -h * b))
            .collect();
        (u2, w2)
    }

    /// Interaction-picture vector field `G(c, v) = E(-c) F(E(c) v)`.
    fn g(&self, v: &Pair, c: f64) -> Pair {
        let y = self.linear(v, c);
        let f = self.nonlinear(&y.0, &y.1);
        self.linear(&f, -c)
    }

    fn axpy(a: &Pair, h: f64, b: &Pair) -> Pair {
        (
            a.0.iter().zip(&b.0).map(|(x, y)| x + y * h).collect(),
            a.1.iter().zip(&b.1).map(|(x, y)| x + y * h).collect(),
        )
    }

    fn step_pair(&self, y: Pair, h: f64) -> Pair {
        match (self.scheme, self.quadrature) {
            (Scheme::StrangSplitting, _) => self.strang(y, h),
            (Scheme::ExponentialIntegrator, Quadrature::Midpoint) => {
                let k1 = self.g(&y, 0.0);
                let mid = Self::axpy(&y, 0.5 * h, &k1);
                let k2 = self.g(&mid, 0.5 * h);
                self.linear(&Self::axpy(&y, h, &k2), h)
            }
            (Scheme::ExponentialIntegrator, Quadrature::Gauss2) => {
                let r = 3f64.sqrt() / 6.0;
                let c = [0.5 - r, 0.5 + r];
                let a = [[0.25, 0.25 - r], [0.25 + r, 0.25]];
                let g0 = self.g(&y, 0.0);
                let mut stages = [Self::axpy(&y, c[0] * h, &g0), Self::axpy(&y, c[1] * h, &g0)];
                let mut gs = [self.g(&stages[0], c[0] * h), self.g(&stages[1], c[1] * h)];
                for _ in 0..2 {
                    for i in 0..2 {
                        let t = Self::axpy(&y, a[i][0] * h, &gs[0]);
                        stages[i] = Self::axpy(&t, a[i][1] * h, &gs[1]);
                    }
                    gs = [self.g(&stages[0], c[0] * h), self.g(&stages[1], c[1] * h)];
                }
                let t = Self::axpy(&y, 0.5 * h, &gs[0]);
                self.linear(&Self::axpy(&t, 0.5 * h, &gs[1]), h)
            }
        }
    }

    /// Strang splitting. Under the nonlinear part alone `n = Re w` is frozen,
    /// so the Schrödinger component solves the linear equation
    /// `u' = -iλ P(n u)` (`P` the lattice truncation), propagated by a Taylor
    /// series of its generator; the wave component then only needs
    /// `∫ P|u|²`, taken by Simpson's rule on the substep.
    fn strang(&self, y: Pair, h: f64) -> Pair {
        let (u, w) = self.linear(&y, 0.5 * h);
        let n = u.len();
        let nre: Vec<Complex64> = (0..n).map(|i| 0.5 * (w[i] + w[n - 1 - i].conj())).collect();
        let pn: Vec<f64> = self.grid.to_physical(&nre).iter().map(|v| v.re).collect();
        let u_mid = self.frozen_potential_flow(&u, &pn, 0.5 * h);
        let u_end = self.frozen_potential_flow(&u_mid, &pn, 0.5 * h);
        let dens = |v: &[Complex64]| self.grid.product_conj(v, v);
        let (r0, r1, r2) = (dens(&u), dens(&u_mid), dens(&u_end));
        let w1 = (0..n)
            .map(|i| {
                let rho_int = h / 6.0 * (r0[i] + 4.0 * r1[i] + r2[i]);
                w[i] + I * (h * nre[i] + self.sym.lap_beta[i] * rho_int) / self.sym.bracket[i]
            })
            .collect();
        self.linear(&(u_end, w1), 0.5 * h)
    }

    /// `exp(-iλ h P(n ·)) u` for a real potential given on the padded grid.
    fn frozen_potential_flow(&self, u: &[Complex64], pn: &[f64], h: f64) -> Vec<Complex64> {
        let mut out = u.to_vec();
        let mut term = u.to_vec();
        let scale: f64 = u.iter().map(|c| c.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
        for k in 1..60 {
            let phys: Vec<Complex64> = self.grid.to_physical(&term).iter().zip(pn).map(|(a, b)| a * b).collect();
            let c = -I * self.lambda * h / k as f64;
            term = self.grid.from_physical(phys).into_iter().map(|v| v * c).collect();
            let size: f64 = term.iter().map(|c| c.norm()).sum();
            for (o, t) in out.iter_mut().zip(&term) {
                *o += t;
            }
            if size <= 1e-17 * scale {
                break;
            }
        }
        out
    }

    /// Advances by `h` (negative `h` integrates backwards).
    pub fn step_by(&self, state: &ZakharovState, h: f64) -> Result<ZakharovState> {
        let (u, w) = self.step_pair((state.u.coeffs.clone(), state.w.coeffs.clone()), h);
        if u.iter().chain(&w).any(|c| !c.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite coefficients after the step from t = {}",
                state.t
            )));
        }
        Ok(ZakharovState {
            t: state.t + h,
            u: FourierField::from_coeffs(self.lattice.clone(), u)?,
            w: FourierField::from_coeffs(self.lattice.clone(), w)?,
        })
    }
}

/// One step of size `config.dt`.
pub fn step(state: &ZakharovState, config: &SolverConfig) -> Result<ZakharovState> {
    config.validate()?;
    state.u.check_same(&state.w)?;
    let solver = Solver::new(state.u.lattice.clone(), config.scheme, config.quadrature)?;
    solver.step_by(state, config.dt)
}

/// One diagnostic record.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub hamiltonian: Option<f64>,
    #[serde(rename = "Hs_u")]
    pub hs_u: f64,
    #[serde(rename = "Hl_n")]
    pub hl_n: f64,
    #[serde(rename = "Hlm1_nt")]
    pub hlm1_nt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConservationReport {
    pub mass_initial: f64,
    pub mass_final: f64,
    pub max_relative_mass_drift: f64,
    pub hamiltonian_initial: Option<f64>,
    pub max_relative_hamiltonian_drift: Option<f64>,
    /// `dt · max|k|²`, the phase advanced per step by the fastest mode.
    pub stiffness: f64,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<ZakharovState>,
    pub final_state: ZakharovState,
    pub report: ConservationReport,
}

fn sample(state: &ZakharovState, s: f64, l: f64) -> Sample {
    let n = state.n();
    let nt = state.nt();
    let ham = hamiltonian(&state.u, &n, &nt).ok();
    Sample {
        t: state.t,
        mass: mass(&state.u),
        hamiltonian: ham,
        hs_u: sobolev_norm(&state.u, s),
        hl_n: sobolev_norm(&n, l),
        hlm1_nt: sobolev_norm(&nt, l - 1.0),
    }
}

/// Integrates from `(u0, n0, n1)` to `config.t_final`.
pub fn evolve(
    u0: &FourierField,
    n0: &FourierField,
    n1: &FourierField,
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate()?;
    u0.check_same(n0)?;
    let w0 = reduce_first_order(n0, n1)?;
    let solver = Solver::new(u0.lattice.clone(), config.scheme, config.quadrature)?;
    let mut state = ZakharovState { t: 0.0, u: u0.clone(), w: w0 };
    let steps = config.steps();
    let h = config.t_final / steps as f64;
    let first = sample(&state, config.s, config.l);
    let m0 = first.mass;
    let h0 = first.hamiltonian;
    let mut samples = vec![first];
    let mut snapshots = Vec::new();
    if config.snap_every.is_some() {
        snapshots.push(state.clone());
    }
    let mut mass_drift = 0.0f64;
    let mut ham_drift: Option<f64> = h0.map(|_| 0.0);
    for n in 1..=steps {
        state = solver.step_by(&state, h)?;
        state.t = n as f64 * h;
        let last = n == steps;
        if n % config.sample_every == 0 || last {
            let smp = sample(&state, config.s, config.l);
            if m0 > 0.0 {
                mass_drift = mass_drift.max((smp.mass - m0).abs() / m0);
            }
            if let (Some(a), Some(b), Some(dr)) = (h0, smp.hamiltonian, ham_drift.as_mut()) {
                if a != 0.0 {
                    *dr = dr.max((b - a).abs() / a.abs());
                }
            }
            samples.push(smp);
        }
        if let Some(k) = config.snap_every {
            if n % k == 0 || last {
                snapshots.push(state.clone());
            }
        }
    }
    let k2max = SymbolTable::new(&u0.lattice).k2.iter().cloned().fold(0.0, f64::max);
    let report = ConservationReport {
        mass_initial: m0,
        mass_final: samples.last().map(|s| s.mass).unwrap_or(m0),
        max_relative_mass_drift: mass_drift,
        hamiltonian_initial: h0,
        max_relative_hamiltonian_drift: ham_drift,
        stiffness: h * k2max,
        steps,
    };
    Ok(Trajectory { samples, snapshots, final_state: state, report })
}

/// Options of the Picard iteration.
#[derive(Clone, Debug)]
pub struct PicardOptions {
    /// Time samples per unit `δ` on `[-2δ, 2δ]`.
    pub samples_per_delta: usize,
    pub s: f64,
    pub l: f64,
    /// Iterates whose difference falls below this fraction of the data norm
    /// stop the iteration (round-off floor).
    pub floor: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { samples_per_delta: 400, s: 1.0, l: 0.0, floor: 1e-12 }
    }
}

/// Windowed iterate on the time grid.
#[derive(Clone, Debug)]
pub struct PicardIterate {
    pub u: Vec<Vec<Complex64>>,
    pub w: Vec<Vec<Complex64>>,
}

#[derive(Clone, Debug)]
pub struct PicardReport {
    pub times: Vec<f64>,
    pub data_norm: f64,
    pub iterates: Vec<PicardIterate>,
    /// `‖Φ^{m+1} − Φ^m‖` in `X^{s,1/2,1}_S × X^{l,1/2,1}_{W+}` (windowed).
    pub bourgain_differences: Vec<f64>,
    /// Same differences in `sup_t H^s × H^l`.
    pub sup_differences: Vec<f64>,
    pub bourgain_ratios: Vec<f64>,
    pub sup_ratios: Vec<f64>,
    /// True when a ratio exceeded one.
    pub diverging: bool,
    lattice: Arc<DualLattice>,
}

impl PicardReport {
    /// State of the last iterate at the grid time closest to `t`.
    pub fn state_at(&self, t: f64) -> Option<ZakharovState> {
        let last = self.iterates.last()?;
        let (j, _) = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?;
        Some(ZakharovState {
            t: self.times[j],
            u: FourierField::from_coeffs(self.lattice.clone(), last.u[j].clone()).ok()?,
            w: FourierField::from_coeffs(self.lattice.clone(), last.w[j].clone()).ok()?,
        })
    }
}

fn ratios(d: &[f64]) -> Vec<f64> {
    d.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect()
}

/// Iterates the windowed integral-equation map
/// `Φ(u, w)(t) = ψ_δ(t)[e^{itΔ}u0 + ∫_0^t e^{i(t−t')Δ} F_u(u, w)(t') dt']` (and the
/// analogue for `w`) `m` times, starting from the windowed free flows.
pub fn picard_iterate(
    u0: &FourierField,
    w0: &FourierField,
    delta: f64,
    m: usize,
    opts: &PicardOptions,
) -> Result<PicardReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return invalid("delta must lie in (0, 1]");
    }
    u0.check_same(w0)?;
    let lat = u0.lattice.clone();
    let solver = Solver::new(lat.clone(), Scheme::ExponentialIntegrator, Quadrature::Midpoint)?;
    let sym = SymbolTable::new(&lat);
    let half = 2 * opts.samples_per_delta;
    let dt = delta / opts.samples_per_delta as f64;
    let times: Vec<f64> = (0..=2 * half).map(|j| (j as f64 - half as f64) * dt).collect();
    let window: Vec<f64> = times.iter().map(|&t| psi_delta(t, delta)).collect();
    let nk = lat.len();
    let free = |t: f64| -> Pair {
        let u = (0..nk).map(|i| u0.coeffs[i] * Complex64::from_polar(1.0, -t * sym.k2[i])).collect();
        let w = (0..nk)
            .map(|i| w0.coeffs[i] * Complex64::from_polar(1.0, -t * sym.bracket[i]))
            .collect();
        (u, w)
    };
    let free_traj: Vec<Pair> = times.iter().map(|&t| free(t)).collect();
    let windowed = |p: &Pair, c: f64| -> Pair {
        (p.0.iter().map(|x| x * c).collect(), p.1.iter().map(|x| x * c).collect())
    };
    let mut current: Vec<Pair> = free_traj.iter().zip(&window).map(|(p, &c)| windowed(p, c)).collect();
    let data_norm = (sobolev_norm(u0, opts.s).powi(2) + sobolev_norm(w0, opts.l).powi(2)).sqrt();
    let to_iterate = |v: &[Pair]| PicardIterate {
        u: v.iter().map(|p| p.0.clone()).collect(),
        w: v.iter().map(|p| p.1.clone()).collect(),
    };
    let mut iterates = vec![to_iterate(&current)];
    let mut bdiff = Vec::new();
    let mut sdiff = Vec::new();
    for _ in 0..m {
        // Integrand in the interaction picture, g(t') = E(-t') F(t').
        let g: Vec<Pair> = times
            .iter()
            .zip(&current)
            .map(|(&t, p)| {
                let f = solver.nonlinear(&p.0, &p.1);
                solver.linear(&f, -t)
            })
            .collect();
        let mut cumulative: Vec<Pair> = vec![(vec![Complex64::new(0.0, 0.0); nk], vec![Complex64::new(0.0, 0.0); nk]); times.len()];
        for dir in [1i64, -1] {
            let mut j = half as i64;
            loop {
                let next = j + dir;
                if next < 0 || next as usize >= times.len() {
                    break;
                }
                let h = times[next as usize] - times[j as usize];
                let (a, b) = (&g[j as usize], &g[next as usize]);
                let prev = cumulative[j as usize].clone();
                cumulative[next as usize] = (
                    (0..nk).map(|i| prev.0[i] + 0.5 * h * (a.0[i] + b.0[i])).collect(),
                    (0..nk).map(|i| prev.1[i] + 0.5 * h * (a.1[i] + b.1[i])).collect(),
                );
                j = next;
            }
        }
        let next: Vec<Pair> = times
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let duhamel = solver.linear(&cumulative[j], t);
                let sum = Solver::axpy(&free_traj[j], 1.0, &duhamel);
                windowed(&sum, window[j])
            })
            .collect();
        if next.iter().any(|p| p.0.iter().chain(&p.1).any(|c| !c.is_finite())) {
            return Err(Error::Numerical("non-finite Picard iterate".into()));
        }
        let diff: Vec<Pair> = next
            .iter()
            .zip(&current)
            .map(|(a, b)| Solver::axpy(a, -1.0, b))
            .collect();
        let (bd, sd) = difference_norms(&lat, &times, dt, delta, &diff, opts)?;
        current = next;
        iterates.push(to_iterate(&current));
        bdiff.push(bd);
        sdiff.push(sd);
        if sd <= opts.floor * data_norm.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let bourgain_ratios = ratios(&bdiff);
    let sup_ratios = ratios(&sdiff);
    let diverging = bourgain_ratios.iter().chain(&sup_ratios).any(|&r| r > 1.0);
    Ok(PicardReport {
        times,
        data_norm,
        iterates,
        bourgain_differences: bdiff,
        sup_differences: sdiff,
        bourgain_ratios,
        sup_ratios,
        diverging,
        lattice: lat,
    })
}

fn difference_norms(
    lat: &Arc<DualLattice>,
    times: &[f64],
    dt: f64,
    delta: f64,
    diff: &[Pair],
    opts: &PicardOptions,
) -> Result<(f64, f64)> {
    let mut sup = 0.0f64;
    for p in diff {
        let u = FourierField::from_coeffs(lat.clone(), p.0.clone())?;
        let w = FourierField::from_coeffs(lat.clone(), p.1.clone())?;
        sup = sup.max((sobolev_norm(&u, opts.s).powi(2) + sobolev_norm(&w, opts.l).powi(2)).sqrt());
    }
    let traj_u = SampledTrajectory { lattice: lat.clone(), t0: times[0], dt, samples: diff.iter().map(|p| p.0.clone()).collect() };
    let traj_w = SampledTrajectory { lattice: lat.clone(), t0: times[0], dt, samples: diff.iter().map(|p| p.1.clone()).collect() };
    let su = window_and_transform(&traj_u, delta, TransformOptions::default())?;
    let sw = window_and_transform(&traj_w, delta, TransformOptions::default())?;
    let bu = bourgain_norm(&su, &BourgainParams { s: opts.s, b: 0.5, p: LpExponent::One, ty: Modulation::S });
    let bw = bourgain_norm(&sw, &BourgainParams { s: opts.l, b: 0.5, p: LpExponent::One, ty: Modulation::WPlus });
    Ok(((bu * bu + bw * bw).sqrt(), sup))
}

/// Quadratic iterates `(u^{(2)}, n^{(2)})` at time `t`:
///
/// ```text
/// u^{(2)}(t) = −iλ ∫_0^t e^{i(t−t')Δ}[(cos(t'|∇|)n0 + sin(t'|∇|)/|∇| n1) e^{it'Δ}u0] dt',
/// n^{(2)}(t) = −∫_0^t sin((t−t')|∇|)/|∇| Δ_β[|e^{it'Δ}u0|²] dt',
/// ```
///
/// evaluated mode by mode with composite Gauss–Legendre quadrature that
/// resolves every phase rate present. Cost grows with the product of the
/// support sizes of the data.
pub fn duhamel_quadratic(
    u0: &FourierField,
    n0: &FourierField,
    n1: &FourierField,
    t: f64,
) -> Result<(FourierField, FourierField)> {
    u0.check_same(n0)?;
    u0.check_same(n1)?;
    let lat = u0.lattice.clone();
    let mut u2 = FourierField::zeros(lat.clone());
    let mut n2 = FourierField::zeros(lat.clone());
    if t == 0.0 {
        return Ok((u2, n2.with_flag(true)));
    }
    let sym = SymbolTable::new(&lat);
    let vol = lat.spec.volume();
    let lambda = lat.spec.lambda;
    let nz = |f: &FourierField| -> Vec<usize> {
        (0..f.coeffs.len()).filter(|&i| f.coeffs[i].norm_sqr() > 0.0).collect()
    };
    let su = nz(u0);
    let mut sn: Vec<usize> = nz(n0);
    sn.extend(nz(n1));
    sn.sort_unstable();
    sn.dedup();

    // u^{(2)}: pairs (wave mode a, Schrödinger mode b) landing on m_a + m_b.
    let mut pairs_u = Vec::new();
    let mut rate_u = 0.0f64;
    for &a in &sn {
        let ma = lat.multi_index(a);
        for &b in &su {
            let mb = lat.multi_index(b);
            if let Some(c) = lat.index_of(&[ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2]]) {
                pairs_u.push((a, b, c));
                rate_u = rate_u.max(sym.abs_k[a] + sym.k2[b] + sym.k2[c]);
            }
        }
    }
    let rule_u = oscillatory_rule(t, rate_u);
    for &(a, b, c) in &pairs_u {
        let ka = sym.abs_k[a];
        let integral: Complex64 = rule_u
            .nodes
            .iter()
            .zip(&rule_u.weights)
            .map(|(&tp, &wt)| {
                let wave = n0.coeffs[a] * (tp * ka).cos() + n1.coeffs[a] * sinc_time(tp, ka);
                wave * Complex64::from_polar(wt, -(t - tp) * sym.k2[c] - tp * sym.k2[b])
            })
            .sum();
        u2.coeffs[c] += -I * lambda * u0.coeffs[b] * integral / vol;
    }

    // n^{(2)}: pairs (a, b) of Schrödinger modes giving |u|² at m_a − m_b.
    let mut pairs_n = Vec::new();
    let mut rate_n = 0.0f64;
    for &a in &su {
        let ma = lat.multi_index(a);
        for &b in &su {
            let mb = lat.multi_index(b);
            if let Some(c) = lat.index_of(&[ma[0] - mb[0], ma[1] - mb[1], ma[2] - mb[2]]) {
                if sym.lap_beta[c] != 0.0 {
                    pairs_n.push((a, b, c));
                    rate_n = rate_n.max(sym.k2[a] + sym.k2[b] + sym.abs_k[c]);
                }
            }
        }
    }
    let rule_n = oscillatory_rule(t, rate_n);
    for &(a, b, c) in &pairs_n {
        let kc = sym.abs_k[c];
        let integral: Complex64 = rule_n
            .nodes
            .iter()
            .zip(&rule_n.weights)
            .map(|(&tp, &wt)| {
                Complex64::from_polar(wt * sinc_time(t - tp, kc), -tp * (sym.k2[a] - sym.k2[b]))
            })
            .sum();
        n2.coeffs[c] += -sym.lap_beta[c] * u0.coeffs[a] * u0.coeffs[b].conj() * integral / vol;
    }
    let real = n2.symmetry_defect() <= 1e-12;
    let n2 = n2.with_flag(real);
    Ok((u2, n2))
}

/// `sin(s ω)/ω`, with the value `s` at `ω = 0`.
pub fn sinc_time(s: f64, omega: f64) -> f64 {
    if omega == 0.0 {
        s
    } else {
        (s * omega).sin() / omega
    }
}

fn oscillatory_rule(t: f64, rate: f64) -> CompositeRule {
    let (a, b) = if t >= 0.0 { (0.0, t) } else { (t, 0.0) };
    let panels = ((rate * t.abs()) / PI).ceil() as usize + 2;
    let rule = CompositeRule::new(a, b, panels, 16);
    if t >= 0.0 {
        rule
    } else {
        // ∫_0^t = −∫_t^0
        CompositeRule { nodes: rule.nodes, weights: rule.weights.iter().map(|w| -w).collect() }
    }
}
