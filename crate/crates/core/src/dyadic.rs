//! Littlewood–Paley pieces, the time window `ψ_δ`, discrete spacetime spectra
//! and windowed Bourgain norms.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, Error, Result};
use crate::quad::CompositeRule;
use crate::torus::{DualLattice, FourierField, Idx};

/// Raised-cosine bump: 1 on `|r| ≤ 1`, `cos²(π(|r|-1)/2)` on `1 ≤ |r| ≤ 2`, 0 beyond.
pub fn eta(r: f64) -> f64 {
    let a = r.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let c = (0.5 * PI * (a - 1.0)).cos();
        c * c
    }
}

/// Derivative of [`eta`].
pub fn eta_prime(r: f64) -> f64 {
    let a = r.abs();
    if a <= 1.0 || a >= 2.0 {
        return 0.0;
    }
    let v = -0.5 * PI * (PI * (a - 1.0)).sin();
    if r < 0.0 {
        -v
    } else {
        v
    }
}

pub fn is_dyadic(n: u64) -> bool {
    n >= 1 && n.is_power_of_two()
}

/// `η_1 = η`, `η_N(r) = η(r/N) - η(2r/N)` for `N ≥ 2`.
pub fn eta_n(n: u64, r: f64) -> f64 {
    debug_assert!(is_dyadic(n));
    if n == 1 {
        eta(r)
    } else {
        let nf = n as f64;
        eta(r / nf) - eta(2.0 * r / nf)
    }
}

/// Dyadic numbers `1, 2, …, N_top` with `N_top` the least power of two `≥ max_r`
/// (so that the pieces sum to one on `[0, max_r]`).
pub fn dyadic_up_to(max_r: f64) -> Vec<u64> {
    let mut out = vec![1u64];
    let mut n = 1u64;
    while (n as f64) < max_r {
        n *= 2;
        out.push(n);
    }
    out
}

/// The at most two dyadic shells whose `η_N` is nonzero at `r`.
pub fn shells_at(r: f64) -> impl Iterator<Item = (u64, f64)> {
    let a = r.abs();
    let top = if a < 1.0 { 1 } else { (a.log2().floor() as i32 + 2).max(1) };
    let lo = (top - 3).max(0);
    (lo..=top).filter_map(move |e| {
        let n = 1u64 << e;
        let v = eta_n(n, a);
        (v != 0.0).then_some((n, v))
    })
}

/// `ψ_δ(t) = η(t/δ)`.
pub fn psi_delta(t: f64, delta: f64) -> f64 {
    eta(t / delta)
}

/// `ψ̂(ω) = ∫ η(t) e^{-iωt} dt = π²(sin 2ω + sin ω) / (ω(π² - ω²))`.
pub fn psi_hat(omega: f64) -> f64 {
    let w = omega.abs();
    if w < 1e-3 || (w - PI).abs() < 1e-3 {
        return psi_hat_quadrature(w);
    }
    PI * PI * ((2.0 * w).sin() + w.sin()) / (w * (PI * PI - w * w))
}

fn psi_hat_quadrature(w: f64) -> f64 {
    let inner = CompositeRule::new(0.0, 1.0, 2, 20);
    let outer = CompositeRule::new(1.0, 2.0, 2, 20);
    2.0 * (inner.integrate(|t| (w * t).cos()) + outer.integrate(|t| eta(t) * (w * t).cos()))
}

/// `ψ̂_δ(τ) = δ ψ̂(δτ)`.
pub fn psi_delta_hat(tau: f64, delta: f64) -> f64 {
    delta * psi_hat(delta * tau)
}

/// `Σ_L L^b ‖η_L ψ̂_δ‖_{L²_τ}`, the `B^b_{2,1}` norm of the window on the
/// Fourier side.
pub fn psi_besov_norm(delta: f64, b: f64) -> f64 {
    let cutoff = 4096.0 / delta;
    let mut total = 0.0;
    let mut l = 1u64;
    loop {
        let lf = l as f64;
        let (lo, hi) = if l == 1 { (0.0, 2.0) } else { (0.5 * lf, 2.0 * lf) };
        let panels = ((hi - lo) * delta).ceil() as usize * 2 + 4;
        let rule = CompositeRule::new(lo, hi, panels, 8);
        let sq = 2.0 * rule.integrate(|tau| {
            let v = eta_n(l, tau) * psi_delta_hat(tau, delta);
            v * v
        });
        total += lf.powf(b) * sq.sqrt();
        if lf > cutoff {
            break;
        }
        l *= 2;
    }
    total
}

/// Characteristic weight selecting a modulation type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    /// `τ + |k|²`
    S,
    /// `τ + |k|`
    WPlus,
    /// `τ - |k|`
    WMinus,
    /// `|τ| - |k|`
    W,
}

impl Modulation {
    pub fn weight(self, tau: f64, abs_k: f64) -> f64 {
        match self {
            Modulation::S => tau + abs_k * abs_k,
            Modulation::WPlus => tau + abs_k,
            Modulation::WMinus => tau - abs_k,
            Modulation::W => tau.abs() - abs_k,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Modulation::S),
            "W+" | "Wplus" | "w+" => Ok(Modulation::WPlus),
            "W-" | "Wminus" | "w-" => Ok(Modulation::WMinus),
            "W" | "w" => Ok(Modulation::W),
            _ => invalid(format!("unknown modulation type {s:?}")),
        }
    }
}

/// Windowed spacetime spectrum `ũ(τ_j, k)` on a symmetric uniform τ grid.
#[derive(Clone, Debug)]
pub struct SpacetimeSpectrum {
    pub lattice: Arc<DualLattice>,
    pub tau: Vec<f64>,
    pub dtau: f64,
    pub delta: f64,
    /// Row-major: `values[i * tau.len() + j]` is the value at lattice point `i`, `τ_j`.
    pub values: Vec<Complex64>,
}

impl SpacetimeSpectrum {
    /// Zero spectrum on the grid `τ_j = j·dtau`, `|j| ≤ half_len`.
    pub fn zeros(lattice: Arc<DualLattice>, half_len: usize, dtau: f64, delta: f64) -> Self {
        let n = 2 * half_len + 1;
        let tau = (0..n).map(|j| (j as f64 - half_len as f64) * dtau).collect();
        let len = lattice.len() * n;
        SpacetimeSpectrum { lattice, tau, dtau, delta, values: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn n_tau(&self) -> usize {
        self.tau.len()
    }

    pub fn tau_max(&self) -> f64 {
        *self.tau.last().unwrap_or(&0.0)
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let n = self.n_tau();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        let n = self.n_tau();
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Spectrum of the complex conjugate: `(w̄)~(τ, k) = conj(w̃(-τ, -k))`.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        let nk = self.lattice.len();
        let nt = self.n_tau();
        for i in 0..nk {
            let src = self.row(nk - 1 - i);
            let dst = &mut out.values[i * nt..(i + 1) * nt];
            for j in 0..nt {
                dst[j] = src[nt - 1 - j].conj();
            }
        }
        out
    }

    /// `L²` norm for the measure `dτ (γ_1⋯γ_d)^{-1} Σ_k`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.dtau / self.lattice.spec.gamma_product()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_json(&self) -> Value {
        let nt = self.n_tau();
        let d = self.lattice.d();
        let entries: Vec<Value> = (0..self.lattice.len())
            .map(|i| {
                let m = self.lattice.multi_index(i);
                let row = &self.values[i * nt..(i + 1) * nt];
                json!({
                    "m": &m[..d],
                    "values_re": row.iter().map(|v| v.re).collect::<Vec<_>>(),
                    "values_im": row.iter().map(|v| v.im).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({ "tau": self.tau, "entries": entries })
    }

    pub fn from_json(value: &Value, lattice: Arc<DualLattice>, delta: f64) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Entry {
            m: Vec<i64>,
            values_re: Vec<f64>,
            values_im: Vec<f64>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            tau: Vec<f64>,
            entries: Vec<Entry>,
        }
        let r: Repr = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidArgument(format!("spectrum JSON: {e}")))?;
        let n = r.tau.len();
        if n % 2 == 0 || n < 1 {
            return invalid("tau grid must have odd length");
        }
        let half = n / 2;
        let dtau = if n > 1 { r.tau[1] - r.tau[0] } else { 1.0 };
        let mut out = SpacetimeSpectrum::zeros(lattice, half, dtau, delta);
        for (a, b) in out.tau.iter().zip(&r.tau) {
            if (a - b).abs() > 1e-9 * (1.0 + b.abs()) {
                return invalid("tau grid must be uniform and symmetric about 0");
            }
        }
        for e in r.entries {
            if e.values_re.len() != n || e.values_im.len() != n {
                return invalid("entry length does not match the tau grid");
            }
            let mut m: Idx = [0; 3];
            for (j, v) in e.m.iter().enumerate().take(3) {
                m[j] = *v;
            }
            let i = out
                .lattice
                .index_of(&m)
                .ok_or_else(|| Error::InvalidArgument(format!("mode {:?} outside lattice", e.m)))?;
            for j in 0..n {
                out.values[i * n + j] = Complex64::new(e.values_re[j], e.values_im[j]);
            }
        }
        Ok(out)
    }
}

/// Frequency localization `P_N`.
pub trait FrequencyProject: Sized {
    fn project_frequency(&self, n: u64) -> Result<Self>;
}

fn check_dyadic(n: u64, what: &str) -> Result<()> {
    if is_dyadic(n) {
        Ok(())
    } else {
        invalid(format!("{what} must be a power of two ≥ 1 (got {n})"))
    }
}

impl FrequencyProject for FourierField {
    fn project_frequency(&self, n: u64) -> Result<Self> {
        check_dyadic(n, "N")?;
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let k = self.lattice.k(i);
            *c *= eta_n(n, crate::torus::norm3(&k));
        }
        Ok(out)
    }
}

impl FrequencyProject for SpacetimeSpectrum {
    fn project_frequency(&self, n: u64) -> Result<Self> {
        check_dyadic(n, "N")?;
        let mut out = self.clone();
        let nt = self.n_tau();
        for i in 0..self.lattice.len() {
            let w = eta_n(n, crate::torus::norm3(&self.lattice.k(i)));
            out.values[i * nt..(i + 1) * nt].iter_mut().for_each(|v| *v *= w);
        }
        Ok(out)
    }
}

pub fn project_frequency<T: FrequencyProject>(x: &T, n: u64) -> Result<T> {
    x.project_frequency(n)
}

/// Modulation localization `Q_L` for the chosen weight.
pub fn project_modulation(spec: &SpacetimeSpectrum, l: u64, ty: Modulation) -> Result<SpacetimeSpectrum> {
    check_dyadic(l, "L")?;
    let mut out = spec.clone();
    let nt = spec.n_tau();
    for i in 0..spec.lattice.len() {
        let ak = crate::torus::norm3(&spec.lattice.k(i));
        for j in 0..nt {
            out.values[i * nt + j] *= eta_n(l, ty.weight(spec.tau[j], ak));
        }
    }
    Ok(out)
}

/// Exponent of the `ℓ^p_L` sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpExponent {
    One,
    Two,
    Infinity,
}

impl LpExponent {
    pub fn from_f64(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(LpExponent::One)
        } else if p == 2.0 {
            Ok(LpExponent::Two)
        } else if p.is_infinite() && p > 0.0 {
            Ok(LpExponent::Infinity)
        } else {
            invalid(format!("p must be 1, 2 or infinity (got {p})"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BourgainParams {
    pub s: f64,
    pub b: f64,
    pub p: LpExponent,
    pub ty: Modulation,
}

/// Dyadic `L` values covered by the spectrum's grid for the given weight.
fn modulation_shells(spec: &SpacetimeSpectrum) -> Vec<u64> {
    let kmax = spec.lattice.max_abs_k();
    let wmax = spec.tau_max() + kmax * kmax.max(1.0);
    dyadic_up_to((2.0 * spec.tau_max()).max(wmax))
}

/// Table of `‖P_N Q_L u‖_{L²}` over all dyadic `(N, L)` shells.
pub fn shell_norms(spec: &SpacetimeSpectrum, ty: Modulation) -> Vec<(u64, u64, f64)> {
    let ns = dyadic_up_to(spec.lattice.max_abs_k());
    let ls = modulation_shells(spec);
    let mut acc = vec![0.0; ns.len() * ls.len()];
    let nt = spec.n_tau();
    let ln = |l: u64| l.trailing_zeros() as usize;
    for i in 0..spec.lattice.len() {
        let row = spec.row(i);
        if row.iter().all(|v| v.norm_sqr() == 0.0) {
            continue;
        }
        let ak = crate::torus::norm3(&spec.lattice.k(i));
        let nshell: Vec<(u64, f64)> = shells_at(ak).collect();
        for j in 0..nt {
            let a = row[j].norm_sqr();
            if a == 0.0 {
                continue;
            }
            let w = ty.weight(spec.tau[j], ak);
            for (l, el) in shells_at(w) {
                if ln(l) >= ls.len() {
                    continue;
                }
                for &(n, en) in &nshell {
                    if ln(n) >= ns.len() {
                        continue;
                    }
                    acc[ln(n) * ls.len() + ln(l)] += a * en * en * el * el;
                }
            }
        }
    }
    let scale = spec.dtau / spec.lattice.spec.gamma_product();
    let mut out = Vec::with_capacity(acc.len());
    for (a, &n) in ns.iter().enumerate() {
        for (b, &l) in ls.iter().enumerate() {
            out.push((n, l, (acc[a * ls.len() + b] * scale).sqrt()));
        }
    }
    out
}

/// `‖ ‖ N^s L^b ‖P_N Q_L u‖ ‖_{ℓ^p_L} ‖_{ℓ²_N}`.
pub fn bourgain_norm(spec: &SpacetimeSpectrum, params: &BourgainParams) -> f64 {
    let table = shell_norms(spec, params.ty);
    let mut per_n: Vec<(u64, f64)> = Vec::new();
    for (n, l, v) in table {
        let term = (l as f64).powf(params.b) * v;
        match per_n.last_mut() {
            Some((m, acc)) if *m == n => match params.p {
                LpExponent::One => *acc += term,
                LpExponent::Two => *acc += term * term,
                LpExponent::Infinity => *acc = acc.max(term),
            },
            _ => per_n.push((
                n,
                match params.p {
                    LpExponent::Two => term * term,
                    _ => term,
                },
            )),
        }
    }
    per_n
        .into_iter()
        .map(|(n, acc)| {
            let lp = if params.p == LpExponent::Two { acc.sqrt() } else { acc };
            let v = (n as f64).powf(params.s) * lp;
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// Uniformly sampled coefficient trajectory.
#[derive(Clone, Debug)]
pub struct SampledTrajectory {
    pub lattice: Arc<DualLattice>,
    pub t0: f64,
    pub dt: f64,
    /// `samples[n]` holds the coefficients at `t0 + n·dt`.
    pub samples: Vec<Vec<Complex64>>,
}

impl SampledTrajectory {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.samples.len().saturating_sub(1)) as f64
    }

    /// Constant trajectory `u(t) = u0` sampled on `[t0, t0 + (n-1)dt]`.
    pub fn stationary(u0: &FourierField, t0: f64, dt: f64, n: usize) -> Self {
        SampledTrajectory {
            lattice: u0.lattice.clone(),
            t0,
            dt,
            samples: vec![u0.coeffs.clone(); n],
        }
    }
}

/// Resolution controls for [`window_and_transform`].
#[derive(Clone, Copy, Debug)]
pub struct TransformOptions {
    /// Largest admissible τ spacing; defaults to `1/(8δ)`.
    pub max_dtau: Option<f64>,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions { max_dtau: None }
    }
}

/// Sampling step giving `τ_max ≥ 4 max|k|²` for the lattice.
pub fn default_dt(lattice: &DualLattice) -> f64 {
    let k2 = lattice.max_abs_k().powi(2).max(1.0);
    PI / (4.0 * k2) * 0.99
}

/// Multiplies the trajectory by `ψ_δ(t)` and takes the discrete time Fourier
/// transform `ũ(τ, k) = Σ_n dt e^{-iτ t_n} ψ_δ(t_n) û(t_n, k)` per lattice point.
pub fn window_and_transform(
    traj: &SampledTrajectory,
    delta: f64,
    opts: TransformOptions,
) -> Result<SpacetimeSpectrum> {
    if !(delta > 0.0 && delta <= 1.0) {
        return invalid(format!("window scale must lie in (0, 1] (got {delta})"));
    }
    let slack = 1e-9 * delta;
    if traj.t0 > -2.0 * delta + slack || traj.t_end() < 2.0 * delta - slack {
        return invalid(format!(
            "sampling interval [{}, {}] does not contain the window support [-{}, {}]",
            traj.t0,
            traj.t_end(),
            2.0 * delta,
            2.0 * delta
        ));
    }
    let dt = traj.dt;
    let max_dtau = opts.max_dtau.unwrap_or(1.0 / (8.0 * delta));
    let ns = traj.samples.len();
    let mut p = ns.max((2.0 * PI / (dt * max_dtau)).ceil() as usize);
    if p % 2 == 0 {
        p += 1;
    }
    let half = p / 2;
    let dtau = 2.0 * PI / (p as f64 * dt);
    let mut out = SpacetimeSpectrum::zeros(traj.lattice.clone(), half, dtau, delta);
    let window: Vec<f64> = (0..ns).map(|n| psi_delta(traj.t0 + n as f64 * dt, delta)).collect();
    let phase: Vec<Complex64> = out.tau.iter().map(|&tau| Complex64::from_polar(dt, -tau * traj.t0)).collect();
    let fft = FftPlanner::new().plan_fft_forward(p);
    let mut buf = vec![Complex64::new(0.0, 0.0); p];
    for i in 0..traj.lattice.len() {
        if traj.samples.iter().all(|s| s[i].norm_sqr() == 0.0) {
            continue;
        }
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for n in 0..ns {
            buf[n] = traj.samples[n][i] * window[n];
        }
        fft.process(&mut buf);
        let row = out.row_mut(i);
        for (j, r) in row.iter_mut().enumerate() {
            let q = j as i64 - half as i64;
            *r = buf[q.rem_euclid(p as i64) as usize] * phase[j];
        }
    }
    if !out.is_finite() {
        return Err(Error::Numerical("non-finite spectrum".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{sobolev_norm, TorusSpec};
    use proptest::prelude::*;

    fn square(m: usize) -> Arc<DualLattice> {
        Arc::new(DualLattice::cube(TorusSpec::standard(&[1.0, 1.0]).unwrap(), m).unwrap())
    }

    fn random_spectrum(seed: &[f64]) -> SpacetimeSpectrum {
        let lat = square(2);
        let mut s = SpacetimeSpectrum::zeros(lat, 20, 0.75, 0.5);
        let n = s.values.len();
        for (i, v) in s.values.iter_mut().enumerate() {
            *v = Complex64::new(seed[i % seed.len()], seed[(7 * i + 3) % seed.len()] * ((i * 13 % n) as f64).cos());
        }
        s
    }

    #[test]
    fn eta_shape() {
        for i in 0..=4000 {
            let r = -3.0 + i as f64 * 1.5e-3;
            let v = eta(r);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, eta(-r));
            if r.abs() <= 1.0 {
                assert_eq!(v, 1.0);
            }
            if r.abs() >= 2.0 {
                assert_eq!(v, 0.0);
            }
            let h = 1e-6;
            let fd = (eta(r + h) - eta(r - h)) / (2.0 * h);
            assert!((fd - eta_prime(r)).abs() < 1e-5, "r={r}");
        }
    }

    #[test]
    fn partition_of_unity() {
        for i in 0..20000 {
            let r = i as f64 * 0.0173;
            let total: f64 = dyadic_up_to(r.max(1.0)).iter().map(|&n| eta_n(n, r)).sum();
            assert!((total - 1.0).abs() < 1e-12, "r={r} total={total}");
            let via_shells: f64 = shells_at(r).map(|(_, v)| v).sum();
            assert!((via_shells - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_projection_of_shell_five() {
        let lat = square(6);
        let f = FourierField::plane_wave(lat.clone(), [3, 4, 0]).unwrap();
        for (n, nonzero) in [(1, false), (2, false), (4, true), (8, true), (32, false)] {
            let p = project_frequency(&f, n).unwrap();
            assert_eq!(p.nonzero_count() > 0, nonzero, "N={n}");
        }
        let mut sum = FourierField::zeros(lat.clone());
        for n in dyadic_up_to(2.0 * lat.max_abs_k()) {
            sum = sum.add(&project_frequency(&f, n).unwrap()).unwrap();
        }
        for (a, b) in sum.coeffs.iter().zip(&f.coeffs) {
            assert!((a - b).norm() < 1e-12 * lat.spec.volume());
        }
        assert!(project_frequency(&f, 3).is_err());
    }

    #[test]
    fn modulation_projection_point_mass() {
        let lat = square(2);
        let mut s = SpacetimeSpectrum::zeros(lat.clone(), 10, 0.5, 1.0);
        let i = lat.index_of(&[1, 1, 0]).unwrap();
        // τ = 1 ⇒ τ + |k|² = 3.
        let j = s.tau.iter().position(|&t| t == 1.0).unwrap();
        s.row_mut(i)[j] = Complex64::new(1.0, 0.0);
        for (l, survives) in [(1, false), (2, true), (4, true), (8, false)] {
            let q = project_modulation(&s, l, Modulation::S).unwrap();
            assert_eq!(q.values.iter().any(|v| v.norm() > 0.0), survives, "L={l}");
        }
        let mut w = SpacetimeSpectrum::zeros(lat.clone(), 10, 0.5, 1.0);
        let i = lat.index_of(&[1, 0, 0]).unwrap();
        let j = s.tau.iter().position(|&t| t == -1.0).unwrap();
        w.row_mut(i)[j] = Complex64::new(2.0, 0.0);
        let q = project_modulation(&w, 1, Modulation::W).unwrap();
        assert_eq!(q.values, w.values);
    }

    #[test]
    fn stationary_spectrum_matches_window_transform() {
        let lat = square(2);
        let delta: f64 = 0.5;
        let mut u0 = FourierField::zeros(lat.clone());
        u0.coeffs[lat.index_of(&[1, 0, 0]).unwrap()] = Complex64::new(2.0, -1.0);
        let dt = delta / 2000.0;
        let n = (4.0 * delta / dt).round() as usize + 1;
        let traj = SampledTrajectory::stationary(&u0, -2.0 * delta, dt, n);
        let spec = window_and_transform(&traj, delta, TransformOptions::default()).unwrap();
        assert!(spec.dtau <= 1.0 / (8.0 * delta) + 1e-12);
        let i = lat.index_of(&[1, 0, 0]).unwrap();
        let row = spec.row(i);
        let scale = 3.0 * delta * u0.coeffs[i].norm();
        for (j, &tau) in spec.tau.iter().enumerate() {
            if tau.abs() > 200.0 {
                continue;
            }
            // Direct quadrature of ∫ ψ_δ(t) e^{-iτt} dt.
            let rule = CompositeRule::new(-2.0 * delta, 2.0 * delta, 64, 16);
            let re = rule.integrate(|t| psi_delta(t, delta) * (tau * t).cos());
            let im = -rule.integrate(|t| psi_delta(t, delta) * (tau * t).sin());
            let oracle = Complex64::new(re, im) * u0.coeffs[i];
            assert!((row[j] - oracle).norm() < 1e-8 * scale, "tau={tau}");
            assert!((psi_delta_hat(tau, delta) - re).abs() < 1e-10);
        }
        let zero = SampledTrajectory::stationary(&FourierField::zeros(lat), -2.0 * delta, dt, n);
        let z = window_and_transform(&zero, delta, TransformOptions::default()).unwrap();
        assert!(z.values.iter().all(|v| v.norm() == 0.0));
        let short = SampledTrajectory::stationary(&u0, -delta, dt, 10);
        assert!(window_and_transform(&short, delta, TransformOptions::default()).is_err());
    }

    #[test]
    fn psi_besov_scaling_is_uniform() {
        for b in [0.25, 0.5] {
            let ratios: Vec<f64> = (0..7)
                .map(|e| {
                    let delta = 0.5f64.powi(e);
                    psi_besov_norm(delta, b) / delta.powf(0.5 - b)
                })
                .collect();
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            assert!(hi / lo < 3.0, "b={b}: {ratios:?}");
        }
    }

    #[test]
    fn free_wave_bourgain_norm_bounded_by_data() {
        let lat = square(8);
        let delta = 0.5;
        let dt = default_dt(&lat);
        let n = (4.0 * delta / dt).ceil() as usize + 3;
        let t0 = -dt * ((n / 2) as f64);
        let mut ratios = Vec::new();
        for m in [[0, 0, 0], [1, 0, 0], [2, 1, 0], [4, 3, 0], [6, -6, 0]] {
            let u0 = FourierField::plane_wave(lat.clone(), m).unwrap();
            let i = lat.index_of(&m).unwrap();
            let k2 = lat.k(i).iter().map(|x| x * x).sum::<f64>();
            let samples = (0..n)
                .map(|s| {
                    let t = t0 + s as f64 * dt;
                    let mut c = u0.coeffs.clone();
                    c[i] *= Complex64::from_polar(1.0, -t * k2);
                    c
                })
                .collect();
            let traj = SampledTrajectory { lattice: lat.clone(), t0, dt, samples };
            let spec = window_and_transform(&traj, delta, TransformOptions::default()).unwrap();
            let params = BourgainParams { s: 1.0, b: 0.5, p: LpExponent::One, ty: Modulation::S };
            ratios.push(bourgain_norm(&spec, &params) / sobolev_norm(&u0, 1.0));
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 1.5, "{ratios:?}");
    }

    #[test]
    fn spectrum_json_round_trip() {
        let s = random_spectrum(&[0.5, -1.0, 2.0, 0.25]);
        let v = s.to_json();
        let back = SpacetimeSpectrum::from_json(&v, s.lattice.clone(), s.delta).unwrap();
        assert_eq!(back.values, s.values);
        assert_eq!(back.tau.len(), s.tau.len());
    }

    proptest! {
        #[test]
        fn norm_properties(seed in proptest::collection::vec(-2.0f64..2.0, 5..30), c in -3.0f64..3.0, s in -1.0f64..2.0) {
            let spec = random_spectrum(&seed);
            for ty in [Modulation::S, Modulation::WPlus, Modulation::W] {
                let p1 = BourgainParams { s, b: 0.5, p: LpExponent::One, ty };
                let p2 = BourgainParams { p: LpExponent::Two, ..p1 };
                let pinf = BourgainParams { p: LpExponent::Infinity, ..p1 };
                let n1 = bourgain_norm(&spec, &p1);
                prop_assert!(n1 >= bourgain_norm(&spec, &p2) * (1.0 - 1e-12));
                prop_assert!(bourgain_norm(&spec, &p2) >= bourgain_norm(&spec, &pinf) * (1.0 - 1e-12));
                let scaled = bourgain_norm(&spec.scale(Complex64::new(c, 0.0)), &p1);
                prop_assert!((scaled - c.abs() * n1).abs() <= 1e-12 * n1.max(1e-300) * c.abs().max(1.0));
            }
            let wp = BourgainParams { s, b: 0.5, p: LpExponent::One, ty: Modulation::WPlus };
            let wm = BourgainParams { ty: Modulation::WMinus, ..wp };
            let a = bourgain_norm(&spec, &wp);
            let b = bourgain_norm(&spec.conj(), &wm);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }

        #[test]
        fn projections_commute_and_reconstruct(seed in proptest::collection::vec(-2.0f64..2.0, 5..30)) {
            let spec = random_spectrum(&seed);
            let a = project_modulation(&project_frequency(&spec, 2).unwrap(), 4, Modulation::S).unwrap();
            let b = project_frequency(&project_modulation(&spec, 4, Modulation::S).unwrap(), 2).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).norm() <= 1e-15 * x.norm());
            }
            let mut acc = vec![Complex64::new(0.0, 0.0); spec.values.len()];
            for l in modulation_shells(&spec) {
                let q = project_modulation(&spec, l, Modulation::S).unwrap();
                for (x, y) in acc.iter_mut().zip(&q.values) {
                    *x += y;
                }
            }
            for (x, y) in acc.iter().zip(&spec.values) {
                prop_assert!((x - y).norm() < 1e-12 * y.norm().max(1.0));
            }
        }
    }
}
