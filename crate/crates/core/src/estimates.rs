//! Best-constant estimation for trilinear forms over dyadic blocks and for the
//! bilinear Strichartz estimates.
//!
//! Functions live on the discrete grid `τ ∈ hZ`, `k ∈ Z_γ^d`, with measure
//! `h/|γ|` per point. The trilinear form is
//! `∬_{ζ0 = ζ1 - ζ2} f(ζ0) g1(ζ1) g2(ζ2)`, so with unit `ℓ²` vectors its
//! ratio to the `L²` norms is `(h/|γ|)^{1/2}` times the plain sum.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::is_dyadic;
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_power_law, PowerFit};

/// Value of `ε` in exponents such as `3/8+` or `0+`.
pub const EPS: f64 = 0.01;

/// Largest grid size accepted by the optimizer.
pub const MAX_DOF: usize = 10_000_000;

fn much_less(a: f64, b: f64) -> bool {
    8.0 * a <= b
}

fn lesssim(a: f64, b: f64) -> bool {
    a <= 8.0 * b
}

fn comparable(a: f64, b: f64) -> bool {
    !much_less(a, b) && !much_less(b, a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InteractionClass {
    HighModulation,
    HighLow,
    VeryLowWave,
    MiddleHighHigh,
    #[serde(rename = "LowHighHigh_d3")]
    LowHighHighD3,
    #[serde(rename = "LowHighHigh_d2")]
    LowHighHighD2,
}

impl InteractionClass {
    pub const ALL: [InteractionClass; 6] = [
        InteractionClass::HighModulation,
        InteractionClass::HighLow,
        InteractionClass::VeryLowWave,
        InteractionClass::MiddleHighHigh,
        InteractionClass::LowHighHighD3,
        InteractionClass::LowHighHighD2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InteractionClass::HighModulation => "HighModulation",
            InteractionClass::HighLow => "HighLow",
            InteractionClass::VeryLowWave => "VeryLowWave",
            InteractionClass::MiddleHighHigh => "MiddleHighHigh",
            InteractionClass::LowHighHighD3 => "LowHighHigh_d3",
            InteractionClass::LowHighHighD2 => "LowHighHigh_d2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        InteractionClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown interaction class {s:?}")))
    }
}

/// Dyadic frequency shells `N_j`, modulation shells `L_j`, wave sign `σ`
/// (`f` lives on `|τ + σ|k|| ∼ L0`) and the interaction class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyadicBlockSpec {
    #[serde(rename = "N0")]
    pub n0: u64,
    #[serde(rename = "N1")]
    pub n1: u64,
    #[serde(rename = "N2")]
    pub n2: u64,
    #[serde(rename = "L0")]
    pub l0: u64,
    #[serde(rename = "L1")]
    pub l1: u64,
    #[serde(rename = "L2")]
    pub l2: u64,
    pub sigma: i8,
    pub class: InteractionClass,
    pub gamma: Vec<f64>,
}

impl DyadicBlockSpec {
    pub fn d(&self) -> usize {
        self.gamma.len()
    }

    fn l_sorted(&self) -> [f64; 3] {
        let mut l = [self.l0 as f64, self.l1 as f64, self.l2 as f64];
        l.sort_by(f64::total_cmp);
        l
    }

    fn n_max(&self) -> f64 {
        self.n0.max(self.n1).max(self.n2) as f64
    }

    fn n_min(&self) -> f64 {
        self.n0.min(self.n1).min(self.n2) as f64
    }

    fn high_modulation(&self) -> bool {
        let [_, _, lmax] = self.l_sorted();
        lesssim(self.n_max() * self.n_max(), lmax)
    }

    fn high_low(&self) -> bool {
        let (a, b) = (self.n1 as f64, self.n2 as f64);
        much_less(a, b) || much_less(b, a)
    }

    fn very_low_wave(&self) -> bool {
        self.n0 <= 2
    }

    fn middle(&self) -> bool {
        let [_, _, lmax] = self.l_sorted();
        let (n0, n1, n2) = (self.n0 as f64, self.n1 as f64, self.n2 as f64);
        much_less(1.0, n0)
            && lesssim(n0, n1)
            && comparable(n1, n2)
            && lesssim(self.n_max(), lmax)
            && much_less(lmax, n1 * n1)
    }

    fn low_high_high(&self) -> bool {
        let [_, _, lmax] = self.l_sorted();
        let (n0, n1, n2) = (self.n0 as f64, self.n1 as f64, self.n2 as f64);
        much_less(1.0, n0) && lesssim(n0, n1) && comparable(n1, n2) && much_less(lmax, n1)
    }

    fn low_high_high_2d(&self) -> bool {
        let [_, _, lmax] = self.l_sorted();
        let (n1, n2) = (self.n1 as f64, self.n2 as f64);
        much_less(1.0, n1) && comparable(n1, n2) && much_less(lmax, n1)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if !(2..=3).contains(&d) {
            return invalid(format!("d must be 2 or 3 (got {d})"));
        }
        if self.gamma.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return invalid("gamma entries must be positive");
        }
        for (name, v) in [("N0", self.n0), ("N1", self.n1), ("N2", self.n2), ("L0", self.l0), ("L1", self.l1), ("L2", self.l2)] {
            if !is_dyadic(v) {
                return invalid(format!("{name} = {v} is not dyadic"));
            }
        }
        if self.sigma != 1 && self.sigma != -1 {
            return invalid("sigma must be +1 or -1");
        }
        let (ok, what) = match self.class {
            InteractionClass::HighModulation => (self.high_modulation(), "L_max ≥ N_max²/8"),
            InteractionClass::HighLow => (self.high_low(), "N1 ≥ 8 N2 or N2 ≥ 8 N1"),
            InteractionClass::VeryLowWave => (self.very_low_wave(), "N0 ≤ 2"),
            InteractionClass::MiddleHighHigh => {
                (self.middle(), "8 ≤ N0 ≤ 8 N1, N1 ∼ N2, N_max ≤ 8 L_max, 8 L_max ≤ N1²")
            }
            InteractionClass::LowHighHighD3 => (d == 3 && self.low_high_high(), "d = 3, 8 ≤ N0 ≤ 8 N1, N1 ∼ N2, 8 L_max ≤ N1"),
            InteractionClass::LowHighHighD2 => (d == 2 && self.low_high_high_2d(), "d = 2, 8 ≤ N1 ∼ N2, 8 L_max ≤ N1"),
        };
        if !ok {
            return Err(Error::Hypothesis(format!("{} requires {what}", self.class.name())));
        }
        Ok(())
    }

    /// Every applicable right-hand side with constant one, labelled.
    pub fn applicable_bounds(&self) -> Vec<(&'static str, f64)> {
        let d = self.d() as f64;
        let [lmin, lmed, lmax] = self.l_sorted();
        let (n0, n1, n2) = (self.n0 as f64, self.n1 as f64, self.n2 as f64);
        let (nlo, nhi) = (n1.min(n2), n1.max(n2));
        if self.class == InteractionClass::LowHighHighD2 {
            return vec![("low_high_high_2d", lmax.powf(0.375) * lmed.powf(0.375))];
        }
        let mut out = Vec::new();
        if self.high_modulation() {
            out.push((
                "high_modulation",
                lmax.sqrt() * lmed.powf(0.25) * lmin.powf(0.25) * self.n_min().powf(d / 2.0) / self.n_max(),
            ));
        }
        if self.high_low() {
            out.push((
                "high_low_refined",
                lmax.sqrt() * lmed.powf(0.375) * lmin.powf(0.375) * nlo.powf((d - 1.0) / 2.0) / nhi,
            ));
            out.push((
                "high_low",
                lmax.sqrt() * lmed.powf(0.25 + EPS) * lmin.powf(0.25 + EPS) * nlo.powf(d / 2.0 - EPS) / nhi,
            ));
        }
        if self.very_low_wave() {
            out.push(("very_low_wave", (self.l0 as f64 * self.l1 as f64 * self.l2 as f64).powf(1.0 / 6.0)));
        }
        if self.middle() {
            out.push((
                "middle_high_high",
                lmax.powf(0.375 + EPS) * lmed.powf(0.375 + EPS) * lmin.powf(0.25) * n0.powf((d - 2.0) / 2.0) * (n0 / n1).powf(EPS),
            ));
        }
        if self.d() >= 3 && self.low_high_high() {
            out.push(("low_high_high", lmax.powf(0.375) * lmed.powf(0.375) * n0.powf((d - 2.0) / 2.0)));
        }
        out
    }

    /// The bound attached to the declared class.
    pub fn class_bound(&self) -> f64 {
        let label = match self.class {
            InteractionClass::HighModulation => "high_modulation",
            InteractionClass::HighLow => "high_low",
            InteractionClass::VeryLowWave => "very_low_wave",
            InteractionClass::MiddleHighHigh => "middle_high_high",
            InteractionClass::LowHighHighD3 => "low_high_high",
            InteractionClass::LowHighHighD2 => "low_high_high_2d",
        };
        self.applicable_bounds().into_iter().find(|b| b.0 == label).map_or(f64::NAN, |b| b.1)
    }

    /// Minimum over the applicable bounds.
    pub fn paper_bound(&self) -> f64 {
        self.applicable_bounds().into_iter().map(|b| b.1).fold(f64::INFINITY, f64::min)
    }

    pub fn supports(&self) -> [Support; 3] {
        let k0 = if self.class == InteractionClass::LowHighHighD2 {
            // Every |k0| ≥ 8 that k1 - k2 can reach.
            KSupport::Annulus(8.0, 2.0 * (self.n1 + self.n2) as f64)
        } else {
            KSupport::Shell(self.n0)
        };
        [
            Support { k: k0, tau: TauSupport::Wave(self.l0, self.sigma) },
            Support { k: KSupport::Shell(self.n1), tau: TauSupport::Schrodinger(self.l1) },
            Support { k: KSupport::Shell(self.n2), tau: TauSupport::Schrodinger(self.l2) },
        ]
    }

    /// Grid spacing `L_min / 8`.
    pub fn default_h(&self) -> f64 {
        self.l_sorted()[0] / 8.0
    }
}

/// Frequency support of one function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KSupport {
    /// `𝔓_N`: `N/2 ≤ |k| ≤ 2N`, or `|k| ≤ 2` for `N = 1`.
    Shell(u64),
    /// `a ≤ |k| ≤ b`.
    Annulus(f64, f64),
}

impl KSupport {
    fn radii(self) -> (f64, f64) {
        match self {
            KSupport::Shell(1) => (0.0, 2.0),
            KSupport::Shell(n) => (0.5 * n as f64, 2.0 * n as f64),
            KSupport::Annulus(a, b) => (a, b),
        }
    }
}

/// Modulation support of one function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TauSupport {
    /// `𝔖_L`: `|τ + |k|²| ∼ L`.
    Schrodinger(u64),
    /// `𝔚_L^σ`: `|τ + σ|k|| ∼ L`.
    Wave(u64, i8),
    /// Whatever the other two supports allow.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub k: KSupport,
    pub tau: TauSupport,
}

/// Contiguous run of τ indices `start..start+len` at one frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Seg {
    k: u32,
    start: i64,
    len: u32,
    offset: u32,
}

impl Seg {
    fn end(&self) -> i64 {
        self.start + self.len as i64 - 1
    }
}

/// Grid points of one function: frequencies and their τ runs.
#[derive(Clone, Debug)]
pub struct Block {
    pub m: Vec<Vec<i64>>,
    segs: Vec<Seg>,
    index: HashMap<Vec<i64>, usize>,
    len: usize,
}

impl Block {
    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Flat position of `(m, τ-index)`, if it lies in the support.
    pub fn position(&self, m: &[i64], tau_index: i64) -> Option<usize> {
        let k = *self.index.get(m)?;
        self.segs
            .iter()
            .filter(|s| s.k as usize == k)
            .find(|s| tau_index >= s.start && tau_index <= s.end())
            .map(|s| s.offset as usize + (tau_index - s.start) as usize)
    }

    /// `(m, τ-index)` of every grid point, in storage order.
    pub fn points(&self) -> Vec<(Vec<i64>, i64)> {
        let mut out = Vec::with_capacity(self.len);
        for s in &self.segs {
            for j in 0..s.len as i64 {
                out.push((self.m[s.k as usize].clone(), s.start + j));
            }
        }
        out
    }
}

fn lattice_in_annulus(gamma: &[f64], rmin: f64, rmax: f64) -> Vec<Vec<i64>> {
    let d = gamma.len();
    let ranges: Vec<i64> = gamma.iter().map(|g| (rmax * g).floor() as i64).collect();
    let mut out = Vec::new();
    let mut m: Vec<i64> = ranges.iter().map(|r| -r).collect();
    loop {
        let r2: f64 = m.iter().zip(gamma).map(|(a, g)| (*a as f64 / g).powi(2)).sum();
        let r = r2.sqrt();
        if r >= rmin - 1e-12 && r <= rmax + 1e-12 {
            out.push(m.clone());
        }
        let mut p = 0;
        loop {
            if p == d {
                return out;
            }
            m[p] += 1;
            if m[p] <= ranges[p] {
                break;
            }
            m[p] = -ranges[p];
            p += 1;
        }
    }
}

/// Index runs with `w = τ + c` in the shell of size `L`.
fn window_runs(l: u64, c: f64, h: f64) -> Vec<(i64, i64)> {
    let lf = l as f64;
    let intervals: Vec<(f64, f64)> = if l == 1 { vec![(-2.0, 2.0)] } else { vec![(-2.0 * lf, -0.5 * lf), (0.5 * lf, 2.0 * lf)] };
    intervals
        .into_iter()
        .filter_map(|(a, b)| {
            let lo = ((a - c) / h - 1e-9).ceil() as i64;
            let hi = ((b - c) / h + 1e-9).floor() as i64;
            (lo <= hi).then_some((lo, hi))
        })
        .collect()
}

/// Sparse trilinear problem: three grids and the list of compatible run triples.
#[derive(Clone, Debug)]
pub struct TrilinearProblem {
    pub gamma: Vec<f64>,
    pub h: f64,
    pub blocks: [Block; 3],
    triples: Vec<[u32; 3]>,
}

impl TrilinearProblem {
    /// Builds the grid for the block `spec` at spacing `L_min/8`.
    pub fn from_spec(spec: &DyadicBlockSpec) -> Result<Self> {
        spec.validate()?;
        Self::new(&spec.gamma, spec.default_h(), spec.supports())
    }

    /// Builds the grid for arbitrary supports; at most one may be τ-free.
    pub fn new(gamma: &[f64], h: f64, supports: [Support; 3]) -> Result<Self> {
        let d = gamma.len();
        if !(2..=3).contains(&d) || gamma.iter().any(|g| !(*g > 0.0)) {
            return invalid("gamma must hold 2 or 3 positive periods");
        }
        if !(h > 0.0 && h.is_finite()) {
            return invalid("grid spacing must be positive");
        }
        let free: Vec<usize> = (0..3).filter(|&b| supports[b].tau == TauSupport::Free).collect();
        if free.len() > 1 {
            return invalid("at most one τ-free support");
        }
        let kvec = |m: &[i64]| -> Vec<f64> { m.iter().zip(gamma).map(|(a, g)| *a as f64 / g).collect() };
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ms: Vec<Vec<Vec<i64>>> = supports
            .iter()
            .map(|s| {
                let (a, b) = s.k.radii();
                lattice_in_annulus(gamma, a, b)
            })
            .collect();
        let maps: Vec<HashMap<Vec<i64>, usize>> =
            ms.iter().map(|list| list.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect()).collect();
        // τ runs per frequency for the restricted supports.
        let mut runs: Vec<Vec<Vec<(i64, i64)>>> = Vec::with_capacity(3);
        for (b, s) in supports.iter().enumerate() {
            runs.push(
                ms[b]
                    .iter()
                    .map(|m| {
                        let k = kvec(m);
                        match s.tau {
                            TauSupport::Schrodinger(l) => window_runs(l, k.iter().map(|x| x * x).sum(), h),
                            TauSupport::Wave(l, sigma) => window_runs(l, sigma as f64 * norm(&k), h),
                            TauSupport::Free => Vec::new(),
                        }
                    })
                    .collect(),
            );
        }
        // Frequency triples k0 = k1 - k2, iterating over the two smallest lists.
        let mut ktrip: Vec<[usize; 3]> = Vec::new();
        let sizes = [ms[0].len(), ms[1].len(), ms[2].len()];
        let lookup = (0..3).max_by_key(|&b| sizes[b]).unwrap();
        let (a, b) = match lookup {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        // τ hull of each restricted support as a function of |k|.
        let hull = |b: usize, r: f64| -> Option<(f64, f64)> {
            match supports[b].tau {
                TauSupport::Schrodinger(l) => Some((-r * r - 2.0 * l as f64, -r * r + 2.0 * l as f64)),
                TauSupport::Wave(l, sigma) => Some((-(sigma as f64) * r - 2.0 * l as f64, -(sigma as f64) * r + 2.0 * l as f64)),
                TauSupport::Free => None,
            }
        };
        let (rmin, rmax) = supports[lookup].k.radii();
        let mut third = vec![0i64; d];
        for (ia, ma) in ms[a].iter().enumerate() {
            let ra = norm(&kvec(ma));
            for (ib, mb) in ms[b].iter().enumerate() {
                for j in 0..d {
                    // m0 = m1 - m2
                    third[j] = match lookup {
                        0 => ma[j] - mb[j],
                        1 => ma[j] + mb[j],
                        _ => mb[j] - ma[j],
                    };
                }
                let r: f64 = third.iter().zip(gamma).map(|(x, g)| (*x as f64 / g).powi(2)).sum::<f64>().sqrt();
                if r < rmin - 1e-9 || r > rmax + 1e-9 {
                    continue;
                }
                let mut rs = [0.0; 3];
                rs[a] = ra;
                rs[b] = norm(&kvec(mb));
                rs[lookup] = r;
                if let (Some(h0), Some(h1), Some(h2)) = (hull(0, rs[0]), hull(1, rs[1]), hull(2, rs[2])) {
                    if h0.0 + h2.0 > h1.1 + 2.0 * h || h0.1 + h2.1 < h1.0 - 2.0 * h {
                        continue;
                    }
                }
                if let Some(&ic) = maps[lookup].get(&third) {
                    let mut t = [0usize; 3];
                    t[a] = ia;
                    t[b] = ib;
                    t[lookup] = ic;
                    ktrip.push(t);
                }
            }
        }
        // Hull of the τ range forced on the free support.
        if let Some(&fb) = free.first() {
            let mut hull: Vec<Option<(i64, i64)>> = vec![None; ms[fb].len()];
            for t in &ktrip {
                let (p, q) = match fb {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                for &(ps, pe) in &runs[p][t[p]] {
                    for &(qs, qe) in &runs[q][t[q]] {
                        let range = match fb {
                            0 => (ps - qe, pe - qs),
                            1 => (ps + qs, pe + qe),
                            _ => (qs - pe, qe - ps),
                        };
                        let e = &mut hull[t[fb]];
                        *e = Some(match *e {
                            None => range,
                            Some((lo, hi)) => (lo.min(range.0), hi.max(range.1)),
                        });
                    }
                }
            }
            runs[fb] = hull.into_iter().map(|h| h.into_iter().collect()).collect();
        }
        // Flatten into segments.
        let mut blocks = Vec::with_capacity(3);
        let mut seg_of: Vec<Vec<Vec<u32>>> = Vec::with_capacity(3);
        for b in 0..3 {
            let mut segs = Vec::new();
            let mut per_k = Vec::with_capacity(ms[b].len());
            let mut offset = 0usize;
            for (k, rs) in runs[b].iter().enumerate() {
                let mut ids = Vec::new();
                for &(s, e) in rs {
                    ids.push(segs.len() as u32);
                    let len = (e - s + 1) as usize;
                    segs.push(Seg { k: k as u32, start: s, len: len as u32, offset: offset as u32 });
                    offset += len;
                }
                per_k.push(ids);
            }
            if offset > MAX_DOF {
                return invalid(format!("grid has {offset} points, above the limit {MAX_DOF}"));
            }
            blocks.push(Block { m: ms[b].clone(), segs, index: maps[b].clone(), len: offset });
            seg_of.push(per_k);
        }
        let mut triples = Vec::new();
        for t in &ktrip {
            for &s0 in &seg_of[0][t[0]] {
                for &s1 in &seg_of[1][t[1]] {
                    for &s2 in &seg_of[2][t[2]] {
                        let (a0, a1, a2) = (&blocks[0].segs[s0 as usize], &blocks[1].segs[s1 as usize], &blocks[2].segs[s2 as usize]);
                        // i1 = i0 + i2 must be feasible.
                        if a0.start + a2.start <= a1.end() && a0.end() + a2.end() >= a1.start {
                            triples.push([s0, s1, s2]);
                        }
                    }
                }
            }
        }
        let blocks: [Block; 3] = blocks.try_into().unwrap();
        Ok(TrilinearProblem { gamma: gamma.to_vec(), h, blocks, triples })
    }

    /// Measure of one grid point, `h / |γ|`.
    pub fn weight(&self) -> f64 {
        self.h / self.gamma.iter().product::<f64>()
    }

    pub fn dof(&self) -> usize {
        self.blocks.iter().map(|b| b.len).sum()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    /// Plain sum `Σ f g1 g2` over the constraint set.
    fn raw_form(&self, f: &[f64], g1: &[f64], g2: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.sweep(|s0, s1, i2, lo, n, a2| {
            let fs = &f[s0.offset as usize + (lo - s0.start) as usize..][..n];
            let gs = &g1[s1.offset as usize + (lo + i2 - s1.start) as usize..][..n];
            acc += g2[a2] * dot(fs, gs);
        });
        acc
    }

    /// Partial pairing with respect to function `which`.
    fn gradient(&self, which: usize, f: &[f64], g1: &[f64], g2: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.blocks[which].len];
        match which {
            0 => self.sweep(|s0, s1, i2, lo, n, a2| {
                let gs = &g1[s1.offset as usize + (lo + i2 - s1.start) as usize..][..n];
                let o = &mut out[s0.offset as usize + (lo - s0.start) as usize..][..n];
                let w = g2[a2];
                for (x, y) in o.iter_mut().zip(gs) {
                    *x += w * y;
                }
            }),
            1 => self.sweep(|s0, s1, i2, lo, n, a2| {
                let fs = &f[s0.offset as usize + (lo - s0.start) as usize..][..n];
                let o = &mut out[s1.offset as usize + (lo + i2 - s1.start) as usize..][..n];
                let w = g2[a2];
                for (x, y) in o.iter_mut().zip(fs) {
                    *x += w * y;
                }
            }),
            _ => self.sweep(|s0, s1, i2, lo, n, a2| {
                let fs = &f[s0.offset as usize + (lo - s0.start) as usize..][..n];
                let gs = &g1[s1.offset as usize + (lo + i2 - s1.start) as usize..][..n];
                out[a2] += dot(fs, gs);
            }),
        }
        out
    }

    /// Visits every `(i0, i1 = i0 + i2, i2)` as runs in `i0`: the callback gets
    /// the two runs, `i2`, the first `i0`, the run length and the flat index of `i2`.
    fn sweep<F: FnMut(&Seg, &Seg, i64, i64, usize, usize)>(&self, mut visit: F) {
        for t in &self.triples {
            let s0 = &self.blocks[0].segs[t[0] as usize];
            let s1 = &self.blocks[1].segs[t[1] as usize];
            let s2 = &self.blocks[2].segs[t[2] as usize];
            let lo2 = s2.start.max(s1.start - s0.end());
            let hi2 = s2.end().min(s1.end() - s0.start);
            for i2 in lo2..=hi2 {
                let lo = s0.start.max(s1.start - i2);
                let hi = s0.end().min(s1.end() - i2);
                if lo <= hi {
                    let a2 = s2.offset as usize + (i2 - s2.start) as usize;
                    visit(s0, s1, i2, lo, (hi - lo + 1) as usize, a2);
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = l2(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Nonnegative function on one block of a problem.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFunction {
    pub values: Vec<f64>,
}

impl BlockFunction {
    pub fn zeros(problem: &TrilinearProblem, which: usize) -> Self {
        BlockFunction { values: vec![0.0; problem.blocks[which].len] }
    }

    /// From `(m, τ-index, value)` triples; points outside the support or
    /// negative values are rejected.
    pub fn from_points(problem: &TrilinearProblem, which: usize, points: &[(Vec<i64>, i64, f64)]) -> Result<Self> {
        let mut out = Self::zeros(problem, which);
        for (m, i, v) in points {
            if !(*v >= 0.0) {
                return invalid(format!("negative value {v} at {m:?}"));
            }
            let p = problem.blocks[which]
                .position(m, *i)
                .ok_or_else(|| Error::InvalidArgument(format!("point {m:?}, τ-index {i} lies outside support {which}")))?;
            out.values[p] += v;
        }
        Ok(out)
    }

    /// `L²` norm with the grid measure.
    pub fn norm(&self, problem: &TrilinearProblem) -> f64 {
        (problem.weight()).sqrt() * l2(&self.values)
    }
}

/// `∬_{ζ0 = ζ1 - ζ2} f(ζ0) g1(ζ1) g2(ζ2)` with the grid measure.
pub fn trilinear_form(problem: &TrilinearProblem, f: &BlockFunction, g1: &BlockFunction, g2: &BlockFunction) -> Result<f64> {
    for (j, v) in [f, g1, g2].into_iter().enumerate() {
        if v.values.len() != problem.blocks[j].len {
            return invalid(format!("function {j} does not match its block"));
        }
        if v.values.iter().any(|x| !(*x >= 0.0)) {
            return invalid(format!("function {j} is not nonnegative"));
        }
    }
    let w = problem.weight();
    Ok(w * w * problem.raw_form(&f.values, &g1.values, &g2.values))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for HopmOptions {
    fn default() -> Self {
        HopmOptions { tol: 1e-6, max_iter: 200, restarts: 3, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrilinearResult {
    pub constant: f64,
    pub paper_bound: f64,
    pub ratio: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    /// Objective after each sweep of the best restart.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug)]
struct RunOutcome {
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    funcs: [Vec<f64>; 3],
}

fn hopm_run(problem: &TrilinearProblem, init: [Vec<f64>; 3], tol: f64, max_iter: usize) -> Result<RunOutcome> {
    let [mut f, mut g1, mut g2] = init.map(normalized);
    let mut value = problem.raw_form(&f, &g1, &g2);
    let mut trace = vec![value];
    for it in 1..=max_iter {
        f = normalized(problem.gradient(0, &f, &g1, &g2));
        g1 = normalized(problem.gradient(1, &f, &g1, &g2));
        let grad = problem.gradient(2, &f, &g1, &g2);
        let next = l2(&grad);
        g2 = normalized(grad);
        if !next.is_finite() {
            return Err(Error::Numerical("alternating maximization produced a non-finite value".into()));
        }
        if next < value * (1.0 - 1e-12) {
            return Err(Error::Numerical(format!("objective decreased from {value} to {next}")));
        }
        let gain = (next - value) / next.max(f64::MIN_POSITIVE);
        value = next;
        trace.push(value);
        if gain < tol {
            return Ok(RunOutcome { value, iterations: it, converged: true, trace, funcs: [f, g1, g2] });
        }
    }
    Ok(RunOutcome { value, iterations: max_iter, converged: false, trace, funcs: [f, g1, g2] })
}

/// Alternating maximization of the trilinear ratio over nonnegative
/// functions. The first restart starts from constants, the others from
/// seeded random data; the best value is returned (a lower bound on the
/// true constant).
pub fn maximize(problem: &TrilinearProblem, opts: &HopmOptions) -> Result<(TrilinearResult, [BlockFunction; 3])> {
    if opts.restarts == 0 || opts.max_iter == 0 || !(opts.tol > 0.0) {
        return invalid("restarts, max_iter and tol must be positive");
    }
    let lens = [problem.blocks[0].len, problem.blocks[1].len, problem.blocks[2].len];
    let runs: Vec<Result<RunOutcome>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let init = if r == 0 {
                lens.map(|n| vec![1.0; n])
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                lens.map(|n| (0..n).map(|_| rng.gen_range(0.05..1.0)).collect())
            };
            hopm_run(problem, init, opts.tol, opts.max_iter)
        })
        .collect();
    let mut best: Option<RunOutcome> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().map_or(true, |b| r.value > b.value) {
            best = Some(r);
        }
    }
    let best = best.unwrap();
    let scale = problem.weight().sqrt();
    let result = TrilinearResult {
        constant: scale * best.value,
        paper_bound: f64::NAN,
        ratio: f64::NAN,
        iterations: best.iterations,
        restarts: opts.restarts,
        converged: best.converged,
        trace: best.trace.iter().map(|v| v * scale).collect(),
    };
    let funcs = best.funcs.map(|values| BlockFunction { values });
    Ok((result, funcs))
}

/// Best-constant estimate for one dyadic block, compared with the smallest
/// applicable bound.
pub fn sharp_constant(spec: &DyadicBlockSpec, opts: &HopmOptions) -> Result<TrilinearResult> {
    let problem = TrilinearProblem::from_spec(spec)?;
    let (mut result, _) = maximize(&problem, opts)?;
    result.paper_bound = spec.paper_bound();
    result.ratio = result.constant / result.paper_bound;
    Ok(result)
}

/// Top singular value of `(f, g2) ↦ Σ f g1 g2` for fixed `g1`, by power iteration.
fn bilinear_norm(problem: &TrilinearProblem, g1: &[f64]) -> f64 {
    let mut g2 = vec![1.0; problem.blocks[2].len];
    let f0 = vec![0.0; problem.blocks[0].len];
    let mut value = 0.0;
    for _ in 0..10_000 {
        let f = normalized(problem.gradient(0, &f0, g1, &g2));
        let grad = problem.gradient(2, &f, g1, &g2);
        let next = l2(&grad);
        g2 = normalized(grad);
        if (next - value).abs() <= 1e-14 * next {
            return next;
        }
        value = next;
    }
    value
}

/// Brute-force constant for problems whose `g1` grid has at most three
/// points: a grid over the directions of `g1` (a quarter circle or an octant
/// of the sphere) refined around the best cell, with the exact bilinear norm
/// for each direction.
pub fn exhaustive_constant(problem: &TrilinearProblem, resolution: usize) -> Result<f64> {
    let n = problem.blocks[1].len;
    if n == 0 || n > 3 {
        return invalid(format!("exhaustive search needs 1 to 3 points in g1, found {n}"));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let dir = |a: f64, b: f64| -> Vec<f64> {
        match n {
            1 => vec![1.0],
            2 => vec![a.cos(), a.sin()],
            _ => vec![a.cos() * b.cos(), a.cos() * b.sin(), a.sin()],
        }
    };
    let steps_b = if n == 3 { resolution } else { 0 };
    let mut best = (0.0, 0.0, 0.0);
    for i in 0..=resolution {
        for j in 0..=steps_b {
            let a = half_pi * i as f64 / resolution as f64;
            let b = if steps_b > 0 { half_pi * j as f64 / steps_b as f64 } else { 0.0 };
            let v = bilinear_norm(problem, &dir(a, b));
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    // Shrinking pattern search from the best grid cell.
    let mut step = half_pi / resolution as f64;
    while step > 1e-9 && n > 1 {
        let mut moved = false;
        let moves: &[(f64, f64)] = if n == 3 { &[(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] } else { &[(1.0, 0.0), (-1.0, 0.0)] };
        for (da, db) in moves {
            let a = (best.1 + da * step).clamp(0.0, half_pi);
            let b = (best.2 + db * step).clamp(0.0, half_pi);
            let v = bilinear_norm(problem, &dir(a, b));
            if v > best.0 {
                best = (v, a, b);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(problem.weight().sqrt() * best.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BilinearCase {
    /// `‖(u1 ū2)~‖_{L²(𝔓_{N0})}` with `u_j` on `𝔓_{N_j} ∩ 𝔖_{L_j}`.
    SchrodingerSchrodinger,
    /// `‖(w̄ u)~‖_{L²(𝔓_{N2})}` with `w` on `𝔓_{N0} ∩ 𝔚_{L0}^σ`, `u` on `𝔓_{N1} ∩ 𝔖_{L1}`.
    WaveSchrodinger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearResult {
    pub constant: f64,
    pub bound: f64,
    pub ratio: f64,
    pub converged: bool,
}

/// Best constant of a bilinear Strichartz estimate by alternating
/// maximization of the dual trilinear form (the output frequency carries no
/// modulation restriction). `la`, `lb` are `(L1, L2)` in the
/// Schrödinger–Schrödinger case and `(L0, L1)` in the wave case.
#[allow(clippy::too_many_arguments)]
pub fn bilinear_strichartz_constant(
    case: BilinearCase,
    n: [u64; 3],
    la: u64,
    lb: u64,
    sigma: i8,
    gamma: &[f64],
    opts: &HopmOptions,
) -> Result<BilinearResult> {
    for v in n.iter().chain([&la, &lb]) {
        if !is_dyadic(*v) {
            return invalid(format!("{v} is not dyadic"));
        }
    }
    let d = gamma.len() as f64;
    let nmin = *n.iter().min().unwrap() as f64;
    let (lo, hi) = (la.min(lb) as f64, la.max(lb) as f64);
    let h = lo / 8.0;
    let (supports, bound) = match case {
        BilinearCase::SchrodingerSchrodinger => {
            if n[0] < 2 {
                return Err(Error::Hypothesis("N0 ≥ 2 required".into()));
            }
            (
                [
                    Support { k: KSupport::Shell(n[0]), tau: TauSupport::Free },
                    Support { k: KSupport::Shell(n[1]), tau: TauSupport::Schrodinger(la) },
                    Support { k: KSupport::Shell(n[2]), tau: TauSupport::Schrodinger(lb) },
                ],
                lo.sqrt() * (hi / n[0] as f64 + 1.0).sqrt() * nmin.powf((d - 1.0) / 2.0),
            )
        }
        BilinearCase::WaveSchrodinger => (
            [
                Support { k: KSupport::Shell(n[0]), tau: TauSupport::Wave(la, sigma) },
                Support { k: KSupport::Shell(n[1]), tau: TauSupport::Schrodinger(lb) },
                Support { k: KSupport::Shell(n[2]), tau: TauSupport::Free },
            ],
            lo.sqrt() * (hi / n[1] as f64 + 1.0).sqrt() * nmin.powf((d - 1.0) / 2.0),
        ),
    };
    let problem = TrilinearProblem::new(gamma, h, supports)?;
    let (r, _) = maximize(&problem, opts)?;
    Ok(BilinearResult { constant: r.constant, bound, ratio: r.constant / bound, converged: r.converged })
}

/// One measured sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub spec: DyadicBlockSpec,
    pub x: f64,
    pub result: TrilinearResult,
}

/// A single-parameter sweep: `x` is the varied parameter, `predicted` the
/// exponent of `x` in the bound along the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub class: InteractionClass,
    pub parameter: String,
    pub predicted: f64,
    pub specs: Vec<(f64, DyadicBlockSpec)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub class: InteractionClass,
    pub parameter: String,
    pub predicted: f64,
    pub fit: PowerFit,
}

/// Log-log slope of measured constants against the varied parameter.
pub fn fit_scaling(sweep: &Sweep, points: &[SweepPoint]) -> Result<ScalingFit> {
    if points.len() < 6 {
        return invalid(format!("a scaling fit needs at least 6 sweep points, got {}", points.len()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.x).collect();
    let y: Vec<f64> = points.iter().map(|p| p.result.constant).collect();
    Ok(ScalingFit { class: sweep.class, parameter: sweep.parameter.clone(), predicted: sweep.predicted, fit: fit_power_law(&x, &y)? })
}

/// Slope of the class bound along a sweep.
pub fn predicted_exponent(specs: &[(f64, DyadicBlockSpec)]) -> Result<f64> {
    let x: Vec<f64> = specs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = specs.iter().map(|p| p.1.class_bound()).collect();
    Ok(fit_power_law(&x, &y)?.slope)
}

/// The committed per-class sweeps (`d = 2` unless the class needs `d = 3`).
///
/// Only the first three have the six points a slope fit needs; under the
/// class predicates the middle- and low-modulation classes admit at most five
/// dyadic values of any single parameter at this scale.
pub fn committed_sweeps() -> Vec<Sweep> {
    use InteractionClass::*;
    let g2 = vec![1.0, 2f64.sqrt()];
    let g2_coarse = vec![0.5, 0.5 * 2f64.sqrt()];
    let g3_coarse = vec![0.5, 0.5 * 2f64.sqrt(), 0.5 * 3f64.sqrt()];
    let mk = |n: [u64; 3], l: [u64; 3], class, gamma: &Vec<f64>| DyadicBlockSpec {
        n0: n[0],
        n1: n[1],
        n2: n[2],
        l0: l[0],
        l1: l[1],
        l2: l[2],
        sigma: 1,
        class,
        gamma: gamma.clone(),
    };
    let dyadic = |lo: u32, hi: u32| (lo..=hi).map(|j| 1u64 << j).collect::<Vec<_>>();
    let build = |class, parameter: &str, specs: Vec<(f64, DyadicBlockSpec)>| Sweep {
        class,
        parameter: parameter.to_string(),
        predicted: predicted_exponent(&specs).unwrap_or(f64::NAN),
        specs,
    };
    vec![
        build(
            VeryLowWave,
            "L0=L1=L2",
            dyadic(0, 5).into_iter().map(|l| (l as f64, mk([1, 8, 8], [l, l, l], VeryLowWave, &g2))).collect(),
        ),
        build(
            HighModulation,
            "L0",
            dyadic(0, 5).into_iter().map(|l| (l as f64, mk([4, 4, 4], [l, 32, 32], HighModulation, &g2))).collect(),
        ),
        build(
            HighLow,
            "L0=L2",
            dyadic(0, 5).into_iter().map(|l| (l as f64, mk([8, 8, 1], [l, 128, l], HighLow, &g2))).collect(),
        ),
        build(
            MiddleHighHigh,
            "L0=L1=L2",
            dyadic(1, 5).into_iter().map(|l| (l as f64, mk([8, 16, 16], [l, l, l], MiddleHighHigh, &g2))).collect(),
        ),
        build(
            LowHighHighD2,
            "L0=L1=L2",
            dyadic(0, 2).into_iter().map(|l| (l as f64, mk([32, 32, 32], [l, l, l], LowHighHighD2, &g2_coarse))).collect(),
        ),
        build(LowHighHighD3, "none", vec![(1.0, mk([8, 8, 8], [1, 1, 1], LowHighHighD3, &g3_coarse))]),
    ]
}

/// Runs every point of a sweep, in input order.
pub fn run_sweep(sweep: &Sweep, opts: &HopmOptions) -> Result<Vec<SweepPoint>> {
    sweep
        .specs
        .iter()
        .map(|(x, spec)| Ok(SweepPoint { spec: spec.clone(), x: *x, result: sharp_constant(spec, opts)? }))
        .collect()
}
