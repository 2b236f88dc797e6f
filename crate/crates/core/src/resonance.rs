//! Resonance function, the explicit resonant pair, near-resonant enumeration
//! and the regularity-region classifier.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::torus::{DualLattice, Idx};

/// `| -σ|k| - |k - k'|² + |k'|² |`.
pub fn resonance_m(k: &[f64], kprime: &[f64], sigma: i32) -> f64 {
    let nk = k.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = k.iter().zip(kprime).map(|(a, b)| (a - b) * (a - b)).sum();
    let kp: f64 = kprime.iter().map(|x| x * x).sum();
    (-(sigma as f64) * nk - diff + kp).abs()
}

/// [`resonance_m`] at lattice points `k = m/γ`, `k' = m'/γ`, with the
/// quadratic part `Σ (m'_j² - (m_j - m'_j)²)/γ_j²` formed from exact integer
/// numerators.
pub fn resonance_m_lattice(m: &[i64], mprime: &[i64], gamma: &[f64], sigma: i32) -> f64 {
    let nk = m.iter().zip(gamma).map(|(a, g)| (*a as f64 / g).powi(2)).sum::<f64>().sqrt();
    let quad: f64 = m
        .iter()
        .zip(mprime)
        .zip(gamma)
        .map(|((a, b), g)| (b * b - (a - b) * (a - b)) as f64 / (g * g))
        .sum();
    (-(sigma as f64) * nk + quad).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRecord {
    pub m: Idx,
    pub mprime: Idx,
    pub k: Vec<f64>,
    pub kprime: Vec<f64>,
    pub sigma: i32,
    #[serde(rename = "M")]
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantPair {
    pub big_n: i64,
    pub gamma: Vec<f64>,
    /// Integer indices of `K_N` and `K̃_N`.
    pub m_k: Idx,
    pub m_ktilde: Idx,
    pub k: Vec<f64>,
    pub ktilde: Vec<f64>,
    pub n: i64,
    /// `|K - K̃| + |K|² - |K̃|²`.
    pub residual: f64,
    /// Residual within `1e-9` of an endpoint of `(-1/γ₂², 1/γ₂²]`.
    pub near_boundary: bool,
}

impl ResonantPair {
    /// Wave frequency `K - K̃`.
    pub fn wave_frequency(&self) -> Vec<f64> {
        self.k.iter().zip(&self.ktilde).map(|(a, b)| a - b).collect()
    }

    /// Schrödinger frequency `-K̃` paired with it.
    pub fn schrodinger_frequency(&self) -> Vec<f64> {
        self.ktilde.iter().map(|x| -x).collect()
    }
}

/// `K_N = (N/γ₁, (n-1)/γ₂)`, `K̃_N = ((1-N)/γ₁, n/γ₂)` with `n` the integer
/// placing the residual in `(-1/γ₂², 1/γ₂²]`.
///
/// The residual equals `(A - 2n + 1)/γ₂²` with
/// `A = γ₂²(|K - K̃| + (2N-1)/γ₁²)`, so `n = ⌈A/2⌉`.
pub fn construct_resonant_pair(big_n: i64, gamma: &[f64]) -> Result<ResonantPair> {
    if big_n < 2 {
        return invalid("N must be at least 2");
    }
    if gamma.len() < 2 || gamma.len() > 3 || gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return invalid("gamma must hold 2 or 3 positive periods");
    }
    let (g1, g2) = (gamma[0], gamma[1]);
    let d = gamma.len();
    let a1 = (2 * big_n - 1) as f64;
    let dnorm = (a1 * a1 / (g1 * g1) + 1.0 / (g2 * g2)).sqrt();
    let a = g2 * g2 * (dnorm + a1 / (g1 * g1));
    let mut n = (a / 2.0).ceil() as i64;
    let residual_of = |n: i64| dnorm + a1 / (g1 * g1) - (2 * n - 1) as f64 / (g2 * g2);
    let bound = 1.0 / (g2 * g2);
    // Guard against rounding at the interval ends.
    if residual_of(n) <= -bound {
        n -= 1;
    } else if residual_of(n) > bound {
        n += 1;
    }
    let residual = residual_of(n);
    let near_boundary = (residual + bound).abs() < 1e-9 || (residual - bound).abs() < 1e-9;
    let m_k: Idx = [big_n, n - 1, 0];
    let m_ktilde: Idx = [1 - big_n, n, 0];
    let to_k = |m: &Idx| (0..d).map(|j| m[j] as f64 / gamma[j]).collect::<Vec<_>>();
    Ok(ResonantPair {
        big_n,
        gamma: gamma.to_vec(),
        m_k,
        m_ktilde,
        k: to_k(&m_k),
        ktilde: to_k(&m_ktilde),
        n,
        residual,
        near_boundary,
    })
}

/// Selection rule for [`enumerate_near_resonant`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// `M ≤ t`.
    Absolute(f64),
    /// `M < c|k|`.
    Linear(f64),
}

impl Threshold {
    fn bound(self, abs_k: f64) -> f64 {
        match self {
            Threshold::Absolute(t) => t,
            Threshold::Linear(c) => c * abs_k,
        }
    }

    fn accepts(self, m: f64, abs_k: f64) -> bool {
        match self {
            Threshold::Absolute(t) => m <= t + 1e-9 * (1.0 + abs_k * abs_k),
            Threshold::Linear(c) => m < c * abs_k * (1.0 - 1e-12),
        }
    }
}

/// `c(γ) = γ^{-1} dist(γ, ℤ)`.
pub fn one_d_constant(gamma: f64) -> f64 {
    (gamma - gamma.round()).abs() / gamma
}

/// All pairs `(k, k')` of nonzero `k` and arbitrary `k'` in the lattice
/// selected by `threshold`, sorted by `|k|` then `M`.
///
/// `M` is affine in `k'` once `k` is fixed, since
/// `-σ|k| - |k - k'|² + |k'|² = 2k·k' - |k|² - σ|k|`, so for each `k` the
/// admissible `k'` form a slab that is enumerated directly along the axis
/// where `k` is largest.
pub fn enumerate_near_resonant(lattice: &DualLattice, sigma: i32, threshold: Threshold) -> Vec<ResonanceRecord> {
    let d = lattice.d();
    let gamma = &lattice.spec.gamma;
    let kmax: Vec<i64> = lattice.kmax.iter().map(|&m| m as i64).collect();
    let mut out: Vec<ResonanceRecord> = (0..lattice.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let m = lattice.multi_index(i);
            let k = lattice.k(i);
            let k = &k[..d];
            let k2: f64 = k.iter().map(|x| x * x).sum();
            let mut found = Vec::new();
            if k2 == 0.0 {
                return found.into_iter();
            }
            let abs_k = k2.sqrt();
            let t = threshold.bound(abs_k) + 1e-9 * (1.0 + k2);
            if t < 0.0 {
                return found.into_iter();
            }
            let centre = k2 + sigma as f64 * abs_k;
            let axis = (0..d).max_by(|&a, &b| k[a].abs().total_cmp(&k[b].abs())).unwrap();
            let others: Vec<usize> = (0..d).filter(|&j| j != axis).collect();
            let mut idx = [0i64; 3];
            let mut counter: Vec<i64> = others.iter().map(|&j| -kmax[j]).collect();
            loop {
                let mut rest = 0.0;
                for (c, &j) in counter.iter().zip(&others) {
                    idx[j] = *c;
                    rest += 2.0 * k[j] * (*c as f64 / gamma[j]);
                }
                // 2 k_a k'_a ∈ [centre - t - rest, centre + t - rest]
                let lo = (centre - t - rest) / (2.0 * k[axis]);
                let hi = (centre + t - rest) / (2.0 * k[axis]);
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
                let g = gamma[axis];
                let a0 = ((lo * g).floor() as i64 - 1).max(-kmax[axis]);
                let a1 = ((hi * g).ceil() as i64 + 1).min(kmax[axis]);
                for a in a0..=a1 {
                    idx[axis] = a;
                    let kp: Vec<f64> = (0..d).map(|j| idx[j] as f64 / gamma[j]).collect();
                    let value = resonance_m(k, &kp, sigma);
                    if threshold.accepts(value, abs_k) {
                        found.push(ResonanceRecord {
                            m,
                            mprime: idx,
                            k: k.to_vec(),
                            kprime: kp,
                            sigma,
                            value,
                        });
                    }
                }
                // Advance the odometer over the remaining axes.
                let mut p = 0;
                loop {
                    if p == counter.len() {
                        return found.into_iter();
                    }
                    counter[p] += 1;
                    if counter[p] <= kmax[others[p]] {
                        break;
                    }
                    counter[p] = -kmax[others[p]];
                    p += 1;
                }
            }
        })
        .collect();
    out.sort_by(|a, b| {
        let na: f64 = a.k.iter().map(|x| x * x).sum();
        let nb: f64 = b.k.iter().map(|x| x * x).sum();
        na.total_cmp(&nb)
            .then(a.value.total_cmp(&b.value))
            .then(a.m.cmp(&b.m))
            .then(a.mprime.cmp(&b.mprime))
    });
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    WellPosed,
    NotC2,
    IllPosed2D,
    Gap,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::WellPosed => "WellPosed",
            Verdict::NotC2 => "NotC2",
            Verdict::IllPosed2D => "IllPosed2D",
            Verdict::Gap => "Gap",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityPoint {
    pub s: f64,
    pub l: f64,
    pub d: usize,
    pub verdict: Verdict,
}

/// Ordered field used by the region predicates: exact for rationals, with a
/// `1e-12` slack for floats (closed inequalities admit the slack, open ones
/// exclude it).
pub trait RegionScalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn int(v: i64) -> Self;
    fn half() -> Self;
    fn cmp_slack(a: Self, b: Self) -> Ordering;
    fn ge(a: Self, b: Self) -> bool {
        Self::cmp_slack(a, b) != Ordering::Less
    }
    fn gt(a: Self, b: Self) -> bool {
        Self::cmp_slack(a, b) == Ordering::Greater
    }
    fn min(a: Self, b: Self) -> Self {
        if Self::ge(a, b) {
            b
        } else {
            a
        }
    }
    fn max(a: Self, b: Self) -> Self {
        if Self::ge(a, b) {
            a
        } else {
            b
        }
    }
}

const REGION_SLACK: f64 = 1e-12;

impl RegionScalar for f64 {
    fn int(v: i64) -> Self {
        v as f64
    }
    fn half() -> Self {
        0.5
    }
    fn cmp_slack(a: Self, b: Self) -> Ordering {
        if (a - b).abs() <= REGION_SLACK {
            Ordering::Equal
        } else {
            a.total_cmp(&b)
        }
    }
}

impl RegionScalar for Rational64 {
    fn int(v: i64) -> Self {
        Rational64::from_integer(v)
    }
    fn half() -> Self {
        Rational64::new(1, 2)
    }
    fn cmp_slack(a: Self, b: Self) -> Ordering {
        a.cmp(&b)
    }
}

fn verdict<T: RegionScalar>(s: T, l: T, d: usize) -> Verdict {
    let zero = T::int(0);
    let one = T::int(1);
    let two = T::int(2);
    let gap = s - l;
    let strip = T::ge(gap, zero) && T::ge(one, gap);
    let well_posed = strip
        && if d == 2 {
            T::ge(two * s, l + one) && T::ge(l + one, one)
        } else {
            let half_d = T::int(d as i64) * T::half();
            T::ge(two * s, l + half_d) && T::gt(l + half_d, T::int(d as i64 - 1))
        };
    if well_posed {
        return Verdict::WellPosed;
    }
    let three_halves = T::int(3) * T::half();
    if d == 2 && T::gt(three_halves, s) && T::ge(l, zero) && T::gt(l, two * s - one) {
        return Verdict::IllPosed2D;
    }
    let upper = T::min(two * s - one, s + one);
    let lower = T::max(zero, s - two);
    if T::gt(l, upper) || T::gt(lower, l) {
        return Verdict::NotC2;
    }
    Verdict::Gap
}

/// Whether the well-posedness and non-`C²` predicates both hold (never, if the
/// predicates are coded consistently).
pub fn predicates_overlap<T: RegionScalar>(s: T, l: T, d: usize) -> bool {
    let one = T::int(1);
    let two = T::int(2);
    let wp = verdict(s, l, d) == Verdict::WellPosed;
    let upper = T::min(two * s - one, s + one);
    let lower = T::max(T::int(0), s - two);
    wp && (T::gt(l, upper) || T::gt(lower, l))
}

fn check_dimension(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        invalid(format!("classification needs d ∈ {{2, 3}} (got {d})"))
    }
}

/// Verdict for floating-point `(s, l)`.
pub fn classify_regularity(s: f64, l: f64, d: usize) -> Result<RegularityPoint> {
    check_dimension(d)?;
    if !(s.is_finite() && l.is_finite()) {
        return invalid("s and l must be finite");
    }
    Ok(RegularityPoint { s, l, d, verdict: verdict(s, l, d) })
}

/// Verdict for exact rational `(s, l)`.
pub fn classify_regularity_exact(s: Rational64, l: Rational64, d: usize) -> Result<RegularityPoint> {
    check_dimension(d)?;
    let f = |r: Rational64| *r.numer() as f64 / *r.denom() as f64;
    Ok(RegularityPoint { s: f(s), l: f(l), d, verdict: verdict(s, l, d) })
}

/// Parses `"3/2"`, `"-0.25"` or `"1"` as an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational64> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let a: i64 = a.trim().parse().ok()?;
        let b: i64 = b.trim().parse().ok()?;
        return (b != 0).then(|| Rational64::new(a, b));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 15 {
        return None;
    }
    let den = 10i64.checked_pow(frac.len() as u32)?;
    let num = format!("{int}{frac}");
    let num: i64 = if num.is_empty() { 0 } else { num.parse().ok()? };
    let r = Rational64::new(num, den);
    Some(if neg { -r } else { r })
}

/// Classifies decimal or fractional text exactly, falling back to the
/// floating-point path when it is not a short rational.
pub fn classify_text(s: &str, l: &str, d: usize) -> Result<RegularityPoint> {
    match (parse_rational(s), parse_rational(l)) {
        (Some(a), Some(b)) => classify_regularity_exact(a, b, d),
        _ => {
            let a: f64 = s.trim().parse().map_err(|_| crate::Error::InvalidArgument(format!("bad s: {s:?}")))?;
            let b: f64 = l.trim().parse().map_err(|_| crate::Error::InvalidArgument(format!("bad l: {l:?}")))?;
            classify_regularity(a, b, d)
        }
    }
}
