//! Torus geometry, the dual lattice, Fourier coefficient containers and the
//! diagonal Fourier multipliers.
//!
//! Coefficients use the unnormalized convention
//! `φ̂(k) = ∫_T e^{-ik·x} φ(x) dx`, so `φ(x) = |T|^{-1} Σ_k φ̂(k) e^{ik·x}` with
//! `|T| = (2π)^d γ_1⋯γ_d`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PaddedGrid;

/// Multi-index `m` of a lattice point; unused trailing axes are zero.
pub type Idx = [i64; 3];

/// Physical and geometric constants of the system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TorusSpecRepr", into = "TorusSpecRepr")]
pub struct TorusSpec {
    pub d: usize,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub c0: f64,
    pub lambda: Complex64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TorusSpecRepr {
    d: usize,
    gamma: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    c0: f64,
    lambda_re: f64,
    lambda_im: f64,
}

impl TryFrom<TorusSpecRepr> for TorusSpec {
    type Error = Error;
    fn try_from(r: TorusSpecRepr) -> Result<Self> {
        TorusSpec::new(
            r.d,
            r.gamma,
            r.alpha,
            r.beta,
            r.c0,
            Complex64::new(r.lambda_re, r.lambda_im),
        )
    }
}

impl From<TorusSpec> for TorusSpecRepr {
    fn from(t: TorusSpec) -> Self {
        TorusSpecRepr {
            d: t.d,
            gamma: t.gamma,
            alpha: t.alpha,
            beta: t.beta,
            c0: t.c0,
            lambda_re: t.lambda.re,
            lambda_im: t.lambda.im,
        }
    }
}

impl TorusSpec {
    pub fn new(
        d: usize,
        gamma: Vec<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        c0: f64,
        lambda: Complex64,
    ) -> Result<Self> {
        let spec = TorusSpec { d, gamma, alpha, beta, c0, lambda };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit constants (α = β = 1, c0 = λ = 1) with the given periods.
    pub fn standard(gamma: &[f64]) -> Result<Self> {
        let d = gamma.len();
        Self::new(d, gamma.to_vec(), vec![1.0; d], vec![1.0; d], 1.0, Complex64::new(1.0, 0.0))
    }

    pub fn with_beta(mut self, beta: &[f64]) -> Result<Self> {
        self.beta = beta.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: Complex64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTorus(m));
        if !(1..=3).contains(&self.d) {
            return bad(format!("d must be 1, 2 or 3 (got {})", self.d));
        }
        for (name, v) in [("gamma", &self.gamma), ("alpha", &self.alpha), ("beta", &self.beta)] {
            if v.len() != self.d {
                return bad(format!("{name} must have {} entries (got {})", self.d, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} entries must be finite"));
            }
        }
        if let Some(j) = self.gamma.iter().position(|&g| g <= 0.0) {
            return bad(format!("gamma[{j}] must be > 0"));
        }
        if let Some(j) = self.alpha.iter().position(|&a| a <= 0.0) {
            return bad(format!("alpha[{j}] must be > 0"));
        }
        if self.beta.iter().all(|&b| b == 0.0) {
            return bad("beta must not vanish identically".into());
        }
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return bad("c0 must be > 0".into());
        }
        if self.lambda.norm() == 0.0 || !self.lambda.is_finite() {
            return bad("lambda must be finite and nonzero".into());
        }
        Ok(())
    }

    pub fn gamma_product(&self) -> f64 {
        self.gamma.iter().product()
    }

    /// Volume `(2π)^d γ_1⋯γ_d`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.d as i32) * self.gamma_product()
    }

    /// Frequency vector `k_j = m_j/γ_j`.
    pub fn k_of(&self, m: &Idx) -> [f64; 3] {
        let mut k = [0.0; 3];
        for j in 0..self.d {
            k[j] = m[j] as f64 / self.gamma[j];
        }
        k
    }

    pub fn is_normalized(&self) -> bool {
        self.c0 == 1.0 && self.alpha.iter().all(|&a| a == 1.0)
    }
}

pub fn norm3(k: &[f64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

/// Truncated dual lattice `{ (m_1/γ_1, …) : |m_j| ≤ M_j }`, stored in
/// row-major order with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DualLattice {
    pub spec: TorusSpec,
    pub kmax: Vec<usize>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl DualLattice {
    pub fn new(spec: TorusSpec, kmax: &[usize]) -> Result<Self> {
        spec.validate()?;
        if kmax.len() != spec.d {
            return Err(Error::InvalidArgument(format!(
                "kmax must have {} entries (got {})",
                spec.d,
                kmax.len()
            )));
        }
        let dims: Vec<usize> = kmax.iter().map(|&m| 2 * m + 1).collect();
        let mut strides = vec![1; spec.d];
        for j in (0..spec.d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * dims[j + 1];
        }
        let len = dims.iter().product();
        Ok(DualLattice { spec, kmax: kmax.to_vec(), dims, strides, len })
    }

    /// Cube with the same bound on every axis.
    pub fn cube(spec: TorusSpec, m: usize) -> Result<Self> {
        let d = spec.d;
        Self::new(spec, &vec![m; d])
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn index_of(&self, m: &Idx) -> Option<usize> {
        let mut i = 0;
        for j in 0..self.d() {
            let mj = m[j];
            if mj.unsigned_abs() as usize > self.kmax[j] {
                return None;
            }
            i += (mj + self.kmax[j] as i64) as usize * self.strides[j];
        }
        if self.d() < 3 && m[self.d()..].iter().any(|&x| x != 0) {
            return None;
        }
        Some(i)
    }

    pub fn multi_index(&self, i: usize) -> Idx {
        let mut m = [0i64; 3];
        let mut r = i;
        for j in 0..self.d() {
            let q = r / self.strides[j];
            r %= self.strides[j];
            m[j] = q as i64 - self.kmax[j] as i64;
        }
        m
    }

    pub fn k(&self, i: usize) -> [f64; 3] {
        self.spec.k_of(&self.multi_index(i))
    }

    pub fn zero_index(&self) -> usize {
        self.index_of(&[0, 0, 0]).expect("zero frequency is always present")
    }

    /// Index of `-m` for the point stored at `i`.
    pub fn neg_index(&self, i: usize) -> usize {
        self.len - 1 - i
    }

    pub fn max_abs_k(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.d() {
            let kj = self.kmax[j] as f64 / self.spec.gamma[j];
            s += kj * kj;
        }
        s.sqrt()
    }

    pub fn same_shape(&self, other: &DualLattice) -> bool {
        self.kmax == other.kmax && self.spec.gamma == other.spec.gamma
    }
}

/// Precomputed symbols on a lattice.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    pub k2: Vec<f64>,
    pub abs_k: Vec<f64>,
    pub bracket: Vec<f64>,
    /// Symbol of `Δ_α`, i.e. `-Σ α_j k_j²`.
    pub lap_alpha: Vec<f64>,
    /// Symbol of `Δ_β`, i.e. `-Σ β_j k_j²`.
    pub lap_beta: Vec<f64>,
}

impl SymbolTable {
    pub fn new(lattice: &DualLattice) -> Self {
        let n = lattice.len();
        let spec = &lattice.spec;
        let mut t = SymbolTable {
            k2: Vec::with_capacity(n),
            abs_k: Vec::with_capacity(n),
            bracket: Vec::with_capacity(n),
            lap_alpha: Vec::with_capacity(n),
            lap_beta: Vec::with_capacity(n),
        };
        for i in 0..n {
            let k = lattice.k(i);
            let mut k2 = 0.0;
            let mut a = 0.0;
            let mut b = 0.0;
            for j in 0..spec.d {
                let kk = k[j] * k[j];
                k2 += kk;
                a += spec.alpha[j] * kk;
                b += spec.beta[j] * kk;
            }
            t.k2.push(k2);
            t.abs_k.push(k2.sqrt());
            t.bracket.push((1.0 + k2).sqrt());
            t.lap_alpha.push(-a);
            t.lap_beta.push(-b);
        }
        t
    }
}

/// Fourier multiplier selectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbol {
    LaplacianAlpha,
    LaplacianBeta,
    Bracket,
    InvBracket,
    Abs,
    InvAbs,
}

/// Finite set of Fourier coefficients on a truncated lattice.
#[derive(Clone, Debug)]
pub struct FourierField {
    pub lattice: Arc<DualLattice>,
    pub coeffs: Vec<Complex64>,
    real: bool,
}

const REALNESS_TOL: f64 = 1e-12;

impl FourierField {
    pub fn zeros(lattice: Arc<DualLattice>) -> Self {
        let n = lattice.len();
        FourierField { lattice, coeffs: vec![Complex64::new(0.0, 0.0); n], real: false }
    }

    pub fn from_coeffs(lattice: Arc<DualLattice>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                lattice.len(),
                coeffs.len()
            )));
        }
        Ok(FourierField { lattice, coeffs, real: false })
    }

    /// Builds a field from `(m, φ̂)` pairs; every `m` must lie in the lattice.
    pub fn from_modes(lattice: Arc<DualLattice>, modes: &[(Idx, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(lattice);
        for (m, c) in modes {
            let i = f.lattice.index_of(m).ok_or_else(|| {
                Error::InvalidArgument(format!("mode {:?} outside the truncated lattice", m))
            })?;
            f.coeffs[i] += c;
        }
        Ok(f)
    }

    /// Single plane wave `e^{iK·x}` (coefficient `|T|` at `K`).
    pub fn plane_wave(lattice: Arc<DualLattice>, m: Idx) -> Result<Self> {
        let vol = lattice.spec.volume();
        Self::from_modes(lattice, &[(m, Complex64::new(vol, 0.0))])
    }

    pub fn get(&self, m: &Idx) -> Complex64 {
        self.lattice.index_of(m).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Largest violation of `φ̂(-k) = conj φ̂(k)` relative to the largest coefficient.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.coeffs.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let j = n - 1 - i;
            worst = worst.max((self.coeffs[j] - self.coeffs[i].conj()).norm());
        }
        worst / scale
    }

    /// Sets the realness flag after checking conjugate symmetry.
    pub fn assert_real(mut self) -> Result<Self> {
        let defect = self.symmetry_defect();
        if defect > REALNESS_TOL {
            return Err(Error::Precondition(format!(
                "field is not real: conjugate-symmetry defect {defect:.3e}"
            )));
        }
        self.real = true;
        Ok(self)
    }

    /// Projects onto real fields by symmetrizing, then sets the flag.
    pub fn into_real(mut self) -> Self {
        let n = self.coeffs.len();
        let old = self.coeffs.clone();
        for i in 0..n {
            self.coeffs[i] = 0.5 * (old[i] + old[n - 1 - i].conj());
        }
        self.real = true;
        self
    }

    pub(crate) fn with_flag(mut self, real: bool) -> Self {
        self.real = real;
        self
    }

    /// `û(k) ↦ conj(û(-k))`, the coefficients of `ū`.
    pub fn conj(&self) -> Self {
        let n = self.coeffs.len();
        let coeffs = (0..n).map(|i| self.coeffs[n - 1 - i].conj()).collect();
        FourierField { lattice: self.lattice.clone(), coeffs, real: self.real }
    }

    /// Reflection `û(k) ↦ û(-k)`.
    pub fn reflect(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        FourierField { lattice: self.lattice.clone(), coeffs, real: self.real }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let real = self.real && c.im == 0.0;
        FourierField {
            lattice: self.lattice.clone(),
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
            real,
        }
    }

    pub fn add(&self, other: &FourierField) -> Result<Self> {
        self.check_same(other)?;
        Ok(FourierField {
            lattice: self.lattice.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            real: self.real && other.real,
        })
    }

    pub fn sub(&self, other: &FourierField) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn check_same(&self, other: &FourierField) -> Result<()> {
        if Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice.same_shape(&other.lattice) {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn nonzero_count(&self) -> usize {
        self.coeffs.iter().filter(|c| c.norm_sqr() > 0.0).count()
    }

    /// JSON array of `{m, re, im}` records for the nonzero coefficients.
    pub fn to_json(&self) -> serde_json::Value {
        let d = self.lattice.d();
        let records: Vec<_> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(i, c)| {
                let m = self.lattice.multi_index(i);
                serde_json::json!({"m": &m[..d], "re": c.re, "im": c.im})
            })
            .collect();
        serde_json::Value::Array(records)
    }

    pub fn from_json(value: &serde_json::Value, lattice: Arc<DualLattice>) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Record {
            m: Vec<i64>,
            re: f64,
            im: f64,
        }
        let records: Vec<Record> = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidArgument(format!("field records: {e}")))?;
        let d = lattice.d();
        let mut modes = Vec::with_capacity(records.len());
        for r in records {
            if r.m.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "multi-index {:?} has length {}, expected {d}",
                    r.m,
                    r.m.len()
                )));
            }
            let mut m = [0i64; 3];
            m[..d].copy_from_slice(&r.m);
            modes.push((m, Complex64::new(r.re, r.im)));
        }
        Self::from_modes(lattice, &modes)
    }
}

/// `((1/(γ_1⋯γ_d)) Σ_k ⟨k⟩^{2s} |φ̂(k)|²)^{1/2}`.
pub fn sobolev_norm(field: &FourierField, s: f64) -> f64 {
    let lat = &field.lattice;
    let n = field.coeffs.len();
    let mut acc = 0.0;
    // Pairs (k, -k) share the weight, which keeps the sum exactly invariant
    // under reflection and conjugation.
    for i in 0..n.div_ceil(2) {
        let j = n - 1 - i;
        let a = if i == j {
            field.coeffs[i].norm_sqr()
        } else {
            field.coeffs[i].norm_sqr() + field.coeffs[j].norm_sqr()
        };
        if a == 0.0 {
            continue;
        }
        let k = lat.k(i);
        let br2 = 1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        acc += br2.powf(s) * a;
    }
    (acc / lat.spec.gamma_product()).sqrt()
}

/// `‖u‖_{L²(T)}` by Plancherel, `(|T|^{-1} Σ |û|²)^{1/2}`.
pub fn mass(u: &FourierField) -> f64 {
    let s: f64 = u.coeffs.iter().map(|c| c.norm_sqr()).sum();
    (s / u.lattice.spec.volume()).sqrt()
}

/// Pointwise multiplication of the coefficients by the selected symbol.
pub fn apply_multiplier(field: &FourierField, symbol: Symbol) -> Result<FourierField> {
    let lat = &field.lattice;
    let spec = &lat.spec;
    let mut out = field.clone();
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        let k = lat.k(i);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let factor = match symbol {
            Symbol::LaplacianAlpha => -(0..spec.d).map(|j| spec.alpha[j] * k[j] * k[j]).sum::<f64>(),
            Symbol::LaplacianBeta => -(0..spec.d).map(|j| spec.beta[j] * k[j] * k[j]).sum::<f64>(),
            Symbol::Bracket => (1.0 + k2).sqrt(),
            Symbol::InvBracket => 1.0 / (1.0 + k2).sqrt(),
            Symbol::Abs => k2.sqrt(),
            Symbol::InvAbs => {
                if k2 == 0.0 {
                    if c.norm_sqr() != 0.0 {
                        return Err(Error::InvalidArgument(
                            "|∇|^{-1} is undefined on a nonzero mean".into(),
                        ));
                    }
                    0.0
                } else {
                    1.0 / k2.sqrt()
                }
            }
        };
        *c *= factor;
    }
    Ok(out)
}

/// Energy `‖∇u‖² + ½(‖n‖² + ‖|∇|^{-1}∂_t n‖²) + ∫ n|u|²` for unit constants.
pub fn hamiltonian(u: &FourierField, n: &FourierField, nt: &FourierField) -> Result<f64> {
    u.check_same(n)?;
    u.check_same(nt)?;
    let lat = u.lattice.clone();
    let spec = &lat.spec;
    if spec.alpha != spec.beta {
        return Err(Error::Precondition("hamiltonian requires alpha == beta".into()));
    }
    if spec.alpha.iter().any(|&a| a != 1.0) || spec.c0 != 1.0 || spec.lambda != Complex64::new(1.0, 0.0) {
        return Err(Error::Precondition("hamiltonian requires unit alpha, beta, c0 and lambda".into()));
    }
    for (name, f) in [("n", n), ("nt", nt)] {
        if f.symmetry_defect() > REALNESS_TOL {
            return Err(Error::Precondition(format!("{name} must be real")));
        }
    }
    let z = lat.zero_index();
    let scale: f64 = nt.coeffs.iter().map(|c| c.norm()).sum();
    if nt.coeffs[z].norm() > 1e-12 * (1.0 + scale) {
        return Err(Error::Precondition("the mean of nt must vanish".into()));
    }
    let vol = spec.volume();
    let sym = SymbolTable::new(&lat);
    let mut grad = 0.0;
    let mut nn = 0.0;
    let mut vv = 0.0;
    for i in 0..lat.len() {
        grad += sym.k2[i] * u.coeffs[i].norm_sqr();
        nn += n.coeffs[i].norm_sqr();
        if i != z {
            vv += nt.coeffs[i].norm_sqr() / sym.k2[i];
        }
    }
    let grid = PaddedGrid::new(&lat);
    let density = grid.product_conj(&u.coeffs, &u.coeffs);
    let cubic: f64 = n
        .coeffs
        .iter()
        .zip(&density)
        .map(|(a, b)| (a.conj() * b).re)
        .sum();
    Ok((grad + 0.5 * (nn + vv) + cubic) / vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(m: usize) -> Arc<DualLattice> {
        Arc::new(DualLattice::cube(TorusSpec::standard(&[1.0, 1.0]).unwrap(), m).unwrap())
    }

    fn random_field(lat: &Arc<DualLattice>, seed: &[f64]) -> FourierField {
        let coeffs = (0..lat.len())
            .map(|i| Complex64::new(seed[(2 * i) % seed.len()], seed[(2 * i + 1) % seed.len()]))
            .collect();
        FourierField::from_coeffs(lat.clone(), coeffs).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(TorusSpec::standard(&[1.0, 0.0]).is_err());
        assert!(TorusSpec::standard(&[1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(TorusSpec::standard(&[1.0, 1.0]).unwrap().with_beta(&[0.0, 0.0]).is_err());
        assert!(TorusSpec::standard(&[1.0]).unwrap().with_lambda(Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn spec_json_round_trip_rejects_unknown_keys() {
        let spec = TorusSpec::standard(&[1.0, 2f64.sqrt()]).unwrap();
        let v = serde_json::to_value(&spec).unwrap();
        let back: TorusSpec = serde_json::from_value(v.clone()).unwrap();
        assert_eq!(spec, back);
        let mut bad = v;
        bad["extra"] = serde_json::json!(1);
        assert!(serde_json::from_value::<TorusSpec>(bad).is_err());
    }

    #[test]
    fn lattice_enumeration() {
        let spec = TorusSpec::standard(&[1.0, 2.0]).unwrap();
        let lat = DualLattice::new(spec, &[2, 3]).unwrap();
        assert_eq!(lat.len(), 5 * 7);
        let z = lat.zero_index();
        assert_eq!(lat.multi_index(z), [0, 0, 0]);
        for i in 0..lat.len() {
            let m = lat.multi_index(i);
            assert_eq!(lat.index_of(&m), Some(i));
            let neg = lat.multi_index(lat.neg_index(i));
            assert_eq!(neg, [-m[0], -m[1], 0]);
            let k = lat.k(i);
            assert_eq!(k[1], m[1] as f64 / 2.0);
        }
        assert_eq!(lat.index_of(&[3, 0, 0]), None);
    }

    #[test]
    fn constant_and_plane_wave_norms() {
        let lat = square(12);
        let vol = 4.0 * PI * PI;
        let one = FourierField::from_modes(lat.clone(), &[([0, 0, 0], Complex64::new(vol, 0.0))]).unwrap();
        for s in [-1.0, 0.0, 2.5] {
            assert!((sobolev_norm(&one, s) - vol).abs() < 1e-12 * vol);
        }
        assert!((mass(&one) - 2.0 * PI).abs() < 1e-13);
        let wave = FourierField::plane_wave(lat.clone(), [5, 9, 0]).unwrap();
        assert!((sobolev_norm(&wave, 1.0) - vol * 107f64.sqrt()).abs() < 1e-10);
        assert!((mass(&wave) - 2.0 * PI).abs() < 1e-13);
        assert_eq!(sobolev_norm(&FourierField::zeros(lat), 3.0), 0.0);
    }

    #[test]
    fn multipliers() {
        let spec = TorusSpec::standard(&[1.0, 1.0]).unwrap().with_beta(&[2.0, 0.0]).unwrap();
        let lat = Arc::new(DualLattice::cube(spec, 6).unwrap());
        let wave = FourierField::plane_wave(lat.clone(), [3, 4, 0]).unwrap();
        let vol = lat.spec.volume();
        let b = apply_multiplier(&wave, Symbol::LaplacianBeta).unwrap();
        assert!((b.get(&[3, 4, 0]).re - (-18.0 * vol)).abs() < 1e-12 * vol);
        let a = apply_multiplier(&wave, Symbol::LaplacianAlpha).unwrap();
        assert!((a.get(&[3, 4, 0]).re - (-25.0 * vol)).abs() < 1e-12 * vol);
        let seed: Vec<f64> = (0..50).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let f = random_field(&lat, &seed);
        let g = apply_multiplier(&apply_multiplier(&f, Symbol::InvBracket).unwrap(), Symbol::Bracket).unwrap();
        for (x, y) in f.coeffs.iter().zip(&g.coeffs) {
            assert!((x - y).norm() <= 1e-14 * x.norm().max(1.0));
        }
        assert!(apply_multiplier(&f, Symbol::InvAbs).is_err());
    }

    #[test]
    fn field_json_round_trip() {
        let lat = square(3);
        let f = FourierField::from_modes(lat.clone(), &[([1, -2, 0], Complex64::new(0.5, -1.5))]).unwrap();
        let v = f.to_json();
        assert_eq!(v.as_array().unwrap().len(), 1);
        let g = FourierField::from_json(&v, lat.clone()).unwrap();
        assert_eq!(f.coeffs, g.coeffs);
        let bad = serde_json::json!([{"m": [9, 0], "re": 1.0, "im": 0.0}]);
        assert!(FourierField::from_json(&bad, lat).is_err());
    }

    #[test]
    fn hamiltonian_single_mode_and_preconditions() {
        let lat = square(10);
        let u = FourierField::plane_wave(lat.clone(), [5, 9, 0]).unwrap();
        let z = FourierField::zeros(lat.clone());
        let h = hamiltonian(&u, &z, &z).unwrap();
        let expected = 106.0 * 4.0 * PI * PI;
        assert!((h - expected).abs() < 1e-10 * expected);
        assert_eq!(hamiltonian(&z, &z, &z).unwrap(), 0.0);
        let mut nt = z.clone();
        nt.coeffs[lat.zero_index()] = Complex64::new(1.0, 0.0);
        assert!(hamiltonian(&z, &z, &nt).is_err());
        let spec = TorusSpec::standard(&[1.0, 1.0]).unwrap().with_lambda(Complex64::new(2.0, 0.0)).unwrap();
        let lat2 = Arc::new(DualLattice::cube(spec, 2).unwrap());
        let z2 = FourierField::zeros(lat2);
        assert!(hamiltonian(&z2, &z2, &z2).is_err());
    }

    /// Real-space quadrature of the energy on the padded grid.
    #[test]
    fn hamiltonian_matches_physical_quadrature() {
        let lat = square(5);
        let grid = PaddedGrid::new(&lat);
        let mk = |f: &dyn Fn(i64, i64) -> Complex64| {
            let c = (0..lat.len())
                .map(|i| {
                    let m = lat.multi_index(i);
                    f(m[0], m[1])
                })
                .collect();
            FourierField::from_coeffs(lat.clone(), c).unwrap()
        };
        let u = mk(&|a, b| Complex64::new(1.0 / (1 + a * a + b * b) as f64, 0.3 * a as f64 / (2 + b * b) as f64));
        let n = mk(&|a, b| {
            if a == 0 && b == 0 {
                Complex64::new(0.7, 0.0)
            } else {
                Complex64::new(1.0 / (2 + a * a + 2 * b * b) as f64, 0.1 * (a + 2 * b) as f64 / (3 + a * a) as f64)
            }
        })
        .into_real();
        let nt = mk(&|a, b| {
            if a == 0 && b == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.2 / (1 + a * a + b * b) as f64, 0.05 * (b - a) as f64 / (4 + b * b) as f64)
            }
        })
        .into_real();
        let h = hamiltonian(&u, &n, &nt).unwrap();

        let cell = lat.spec.volume() / grid.len() as f64;
        let pu = grid.to_physical(&u.coeffs);
        let pn = grid.to_physical(&n.coeffs);
        let sym = SymbolTable::new(&lat);
        let mut grad = 0.0;
        for axis in 0..2 {
            let du: Vec<Complex64> = (0..lat.len())
                .map(|i| u.coeffs[i] * Complex64::new(0.0, lat.k(i)[axis]))
                .collect();
            grad += grid.to_physical(&du).iter().map(|v| v.norm_sqr()).sum::<f64>() * cell;
        }
        let inv: Vec<Complex64> = (0..lat.len())
            .map(|i| if sym.abs_k[i] > 0.0 { nt.coeffs[i] / sym.abs_k[i] } else { Complex64::new(0.0, 0.0) })
            .collect();
        let pv = grid.to_physical(&inv);
        let nn: f64 = pn.iter().map(|v| v.re * v.re).sum::<f64>() * cell;
        let vv: f64 = pv.iter().map(|v| v.re * v.re).sum::<f64>() * cell;
        let cubic: f64 = pn.iter().zip(&pu).map(|(a, b)| a.re * b.norm_sqr()).sum::<f64>() * cell;
        let oracle = grad + 0.5 * (nn + vv) + cubic;
        assert!((h - oracle).abs() < 1e-8 * oracle.abs(), "{h} vs {oracle}");
    }

    proptest! {
        #[test]
        fn parseval_and_conjugation(seed in proptest::collection::vec(-3.0f64..3.0, 8..40), s in -2.0f64..3.0) {
            let lat = square(3);
            let f = random_field(&lat, &seed);
            let ratio = sobolev_norm(&f, 0.0) / mass(&f);
            prop_assert!((ratio - 2.0 * PI).abs() < 1e-12 * 2.0 * PI);
            prop_assert_eq!(sobolev_norm(&f.conj(), s), sobolev_norm(&f, s));
        }

        #[test]
        fn sobolev_monotone_off_zero(seed in proptest::collection::vec(-3.0f64..3.0, 8..40), s in -2.0f64..3.0, ds in 0.0f64..2.0) {
            let lat = square(3);
            let mut f = random_field(&lat, &seed);
            let z = lat.zero_index();
            f.coeffs[z] = Complex64::new(0.0, 0.0);
            prop_assert!(sobolev_norm(&f, s + ds) >= sobolev_norm(&f, s) * (1.0 - 1e-14));
        }

        #[test]
        fn multipliers_commute_with_reflection(seed in proptest::collection::vec(-3.0f64..3.0, 8..40)) {
            let lat = square(3);
            let f = random_field(&lat, &seed);
            for sym in [Symbol::LaplacianAlpha, Symbol::LaplacianBeta, Symbol::Bracket, Symbol::InvBracket, Symbol::Abs] {
                let a = apply_multiplier(&f.reflect(), sym).unwrap();
                let b = apply_multiplier(&f, sym).unwrap().reflect();
                prop_assert_eq!(a.coeffs, b.coeffs);
            }
        }
    }
}
