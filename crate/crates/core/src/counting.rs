//! Lattice-point counts in annulus ∩ slab ∩ ball ∩ cone domains, the
//! bilinear block sets `E(ζ0)`, and the angular tiling with its two-to-one
//! index map.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// "a ≪ b" is read as `a ≤ b / MUCH`.
pub const MUCH: f64 = 8.0;

/// `{ξ : N ≤ |ξ| ≤ N+μ, X ≤ ξ₁ ≤ X+ν}`, optionally intersected with a ball
/// and the cone `θ/2 ≤ ∠(ξ, e₁) ≤ 2θ`, then rotated by `R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSlabDomain {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: f64,
    pub mu: f64,
    pub nu: f64,
    #[serde(rename = "X")]
    pub x: f64,
    /// Ball centre (in the unrotated frame) and radius `N0`.
    pub ball: Option<(Vec<f64>, f64)>,
    pub theta: Option<f64>,
    /// Row-major `d × d` orthogonal matrix.
    pub rotation: Vec<f64>,
}

impl AnnulusSlabDomain {
    pub fn new(d: usize, n: f64, mu: f64, nu: f64, x: f64) -> Self {
        let mut rotation = vec![0.0; d * d];
        for i in 0..d {
            rotation[i * d + i] = 1.0;
        }
        AnnulusSlabDomain { d, n, mu, nu, x, ball: None, theta: None, rotation }
    }

    /// Radius `N0` entering the bounds (`N + μ` without a ball).
    pub fn n0(&self) -> f64 {
        self.ball.as_ref().map(|b| b.1).unwrap_or(self.n + self.mu)
    }

    /// Checks the hypotheses, naming the violated inequality.
    pub fn validate(&self) -> Result<()> {
        let hyp = |msg: String| Err(Error::Hypothesis(msg));
        if !(2..=3).contains(&self.d) {
            return invalid(format!("d must be 2 or 3 (got {})", self.d));
        }
        if self.rotation.len() != self.d * self.d {
            return invalid("rotation must be a d×d matrix");
        }
        for i in 0..self.d {
            for j in 0..self.d {
                let dot: f64 = (0..self.d).map(|k| self.rotation[k * self.d + i] * self.rotation[k * self.d + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot - target).abs() > 1e-9 {
                    return invalid("rotation is not orthogonal");
                }
            }
        }
        if !(self.n >= MUCH) {
            return hyp(format!("N ≫ 1 violated: N = {} < {MUCH}", self.n));
        }
        for (name, v) in [("mu", self.mu), ("nu", self.nu)] {
            if !(v >= 1.0 / self.n) {
                return hyp(format!("N^-1 ≤ {name} violated: {name} = {v}"));
            }
            if !(v <= self.n / MUCH) {
                return hyp(format!("{name} ≪ N violated: {name} = {v} > N/{MUCH}"));
            }
        }
        if !(self.x >= 0.0) {
            return hyp(format!("X ≥ 0 violated: X = {}", self.x));
        }
        if let Some((c, r)) = &self.ball {
            if c.len() != self.d {
                return invalid("ball centre has the wrong dimension");
            }
            if !(*r >= 1.0 && *r <= MUCH * self.n) {
                return hyp(format!("1 ≤ N0 ≲ N violated: N0 = {r}"));
            }
        }
        if let Some(theta) = self.theta {
            let lower = ((self.mu + self.nu.min(1.0)) / self.n).sqrt();
            if !(theta > MUCH * lower) {
                return hyp(format!(
                    "θ ≫ ((μ+min(ν,1))/N)^(1/2) violated: θ = {theta} ≤ {MUCH}·{lower}"
                ));
            }
            if !(theta <= PI / 4.0) {
                return hyp(format!("θ ≤ π/4 violated: θ = {theta}"));
            }
        }
        Ok(())
    }

    /// Membership of a point given in the unrotated frame.
    fn contains_unrotated(&self, q: &[f64]) -> bool {
        let r2: f64 = q.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        if r < self.n || r > self.n + self.mu {
            return false;
        }
        if q[0] < self.x || q[0] > self.x + self.nu {
            return false;
        }
        if let Some((c, rad)) = &self.ball {
            let dist2: f64 = q.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist2 > rad * rad {
                return false;
            }
        }
        if let Some(theta) = self.theta {
            let angle = (q[0] / r).clamp(-1.0, 1.0).acos();
            if angle < 0.5 * theta || angle > 2.0 * theta {
                return false;
            }
        }
        true
    }

    /// `q = Rᵀ p`.
    fn unrotate(&self, p: &[f64]) -> [f64; 3] {
        let d = self.d;
        let mut q = [0.0; 3];
        for (i, qi) in q.iter_mut().enumerate().take(d) {
            *qi = (0..d).map(|k| self.rotation[k * d + i] * p[k]).sum();
        }
        q
    }

    /// `R v`.
    fn rotate(&self, v: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..d).map(|i| (0..d).map(|k| self.rotation[i * d + k] * v[k]).sum()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountResult {
    pub exact: u64,
    /// Bound of the applicable clause (the cone clause when a cone is present).
    pub bound_value: f64,
    pub ratio: f64,
    /// Annulus–slab clause, always applicable.
    pub bound_annulus: f64,
    /// Cone clause, when a cone is present.
    pub bound_cone: Option<f64>,
}

/// `max{ν,1} N0^{d-2} [N(μ + min{ν,1})]^{1/2}`.
pub fn bound_annulus(dom: &AnnulusSlabDomain) -> f64 {
    dom.nu.max(1.0) * dom.n0().powi(dom.d as i32 - 2) * (dom.n * (dom.mu + dom.nu.min(1.0))).sqrt()
}

/// `max{ν,1} min{Nθ, N0}^{d-2} [θ^{-1}(μ + min{ν,1}) + 1]`.
pub fn bound_cone(dom: &AnnulusSlabDomain, theta: f64) -> f64 {
    dom.nu.max(1.0)
        * (dom.n * theta).min(dom.n0()).powi(dom.d as i32 - 2)
        * ((dom.mu + dom.nu.min(1.0)) / theta + 1.0)
}

/// Exact number of points of `Z_γ^d` in `R(D ∩ B ∩ K_θ)`.
///
/// The outer axes run over the bounding box of the rotated domain; along the
/// remaining axis (the one most aligned with the slab normal `R e₁`) the slab
/// and ball cut out an interval that is scanned directly.
pub fn count_lattice_in_domain(dom: &AnnulusSlabDomain, gamma: &[f64]) -> Result<CountResult> {
    dom.validate()?;
    let d = dom.d;
    if gamma.len() != d || gamma.iter().any(|g| !(*g > 0.0)) {
        return invalid("gamma must hold d positive periods");
    }
    let outer_r = dom.n + dom.mu;
    let ball_rot = dom.ball.as_ref().map(|(c, r)| (dom.rotate(c), *r));
    // Box in p-space.
    let mut lo = vec![-outer_r; d];
    let mut hi = vec![outer_r; d];
    if let Some((c, r)) = &ball_rot {
        for j in 0..d {
            lo[j] = lo[j].max(c[j] - r);
            hi[j] = hi[j].min(c[j] + r);
        }
    }
    if (0..d).any(|j| lo[j] > hi[j]) {
        return Ok(result(dom, 0));
    }
    // Slab normal in p-space: the first column of R.
    let normal: Vec<f64> = (0..d).map(|i| dom.rotation[i * d]).collect();
    let axis = (0..d).max_by(|&a, &b| normal[a].abs().total_cmp(&normal[b].abs())).unwrap();
    let others: Vec<usize> = (0..d).filter(|&j| j != axis).collect();
    let idx_range = |j: usize| -> (i64, i64) {
        ((lo[j] * gamma[j]).floor() as i64 - 1, (hi[j] * gamma[j]).ceil() as i64 + 1)
    };
    let (a0, a1) = idx_range(others[0]);
    let count: u64 = (a0..=a1)
        .into_par_iter()
        .map(|first| {
            let mut total = 0u64;
            let (b0, b1) = if others.len() > 1 { idx_range(others[1]) } else { (0, 0) };
            let mut p = [0.0f64; 3];
            for second in b0..=b1 {
                p[others[0]] = first as f64 / gamma[others[0]];
                if others.len() > 1 {
                    p[others[1]] = second as f64 / gamma[others[1]];
                }
                // X ≤ n·p ≤ X + ν, solved for p[axis].
                let rest: f64 = others.iter().map(|&j| normal[j] * p[j]).sum();
                let na = normal[axis];
                let (mut t0, mut t1) = ((dom.x - rest) / na, (dom.x + dom.nu - rest) / na);
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t0 = t0.max(lo[axis]);
                t1 = t1.min(hi[axis]);
                if t0 > t1 + 1.0 {
                    continue;
                }
                let g = gamma[axis];
                let i0 = (t0 * g).floor() as i64 - 1;
                let i1 = (t1 * g).ceil() as i64 + 1;
                for ia in i0..=i1 {
                    p[axis] = ia as f64 / g;
                    let q = dom.unrotate(&p[..d]);
                    if dom.contains_unrotated(&q[..d]) {
                        total += 1;
                    }
                }
            }
            total
        })
        .sum();
    Ok(result(dom, count))
}

fn result(dom: &AnnulusSlabDomain, exact: u64) -> CountResult {
    let annulus = bound_annulus(dom);
    let cone = dom.theta.map(|t| bound_cone(dom, t));
    let bound_value = cone.unwrap_or(annulus);
    CountResult { exact, bound_value, ratio: exact as f64 / bound_value, bound_annulus: annulus, bound_cone: cone }
}

/// Haar-distributed rotation of `R^d`, `d ∈ {2, 3}`, row-major.
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    if d == 2 {
        let a = rng.gen_range(0.0..2.0 * PI);
        let (s, c) = a.sin_cos();
        return vec![c, -s, s, c];
    }
    // Uniform unit quaternion.
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    vec![
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    ]
}

/// Draws an admissible instance: `N` log-uniform in `[n_lo, n_hi]`,
/// `μ, ν` log-uniform in `[1/N, min(N/8, 4)]`, a ball centred near the domain,
/// and a cone with probability one half when the aperture window is nonempty.
pub fn random_domain<R: Rng + ?Sized>(d: usize, n_lo: f64, n_hi: f64, max_n0: f64, rng: &mut R) -> AnnulusSlabDomain {
    let log_uniform = |rng: &mut R, a: f64, b: f64| (rng.gen_range(a.ln()..=b.ln())).exp();
    let n = log_uniform(rng, n_lo, n_hi);
    let cap = (n / MUCH).min(4.0);
    let mu = log_uniform(rng, 1.0 / n, cap);
    let nu = log_uniform(rng, 1.0 / n, cap);
    let x = if rng.gen_bool(0.5) { rng.gen_range(0.0..n) } else { rng.gen_range((n - 2.0 * (mu + nu)).max(0.0)..n + mu) };
    let mut dom = AnnulusSlabDomain::new(d, n, mu, nu, x);
    dom.rotation = random_rotation(d, rng);
    let n0 = log_uniform(rng, 1.0, max_n0.min(n));
    // Centre at a point of the slab on the sphere, jittered by up to N0.
    let q1 = (x + 0.5 * nu).min(n);
    let rho = (n * n - q1 * q1).max(0.0).sqrt();
    let phi = rng.gen_range(0.0..2.0 * PI);
    let mut c = vec![q1, rho * phi.cos(), 0.0];
    if d == 3 {
        c[2] = rho * phi.sin();
    } else {
        c[1] = if phi < PI { rho } else { -rho };
    }
    c.truncate(d);
    for v in c.iter_mut() {
        *v += rng.gen_range(-0.5..0.5) * n0;
    }
    dom.ball = Some((c, n0));
    let lower = MUCH * ((mu + nu.min(1.0)) / n).sqrt();
    if rng.gen_bool(0.5) && lower < PI / 4.0 {
        dom.theta = Some(rng.gen_range(lower * 1.0001..=PI / 4.0));
    }
    dom
}

fn shell_interval(n: u64) -> (f64, f64) {
    if n == 1 {
        (0.0, 2.0)
    } else {
        (0.5 * n as f64, 2.0 * n as f64)
    }
}

/// `τ` intervals where `τ + shift` lies in the modulation shell of size `L`.
fn modulation_intervals(l: u64, shift: f64) -> Vec<(f64, f64)> {
    let (a, b) = shell_interval(l);
    if l == 1 {
        vec![(-b - shift, b - shift)]
    } else {
        vec![(-b - shift, -a - shift), (a - shift, b - shift)]
    }
}

fn in_frequency_shell(n: u64, r: f64) -> bool {
    let (a, b) = shell_interval(n);
    r >= a - 1e-12 && r <= b + 1e-12
}

/// `|E(ζ0)|`: τ-measure times lattice count of
/// `{(τ1, k1) ∈ 𝔓_{N1} ∩ 𝔖_{L1} : (τ1 - τ0, k1 - k0) ∈ 𝔓_{N2} ∩ 𝔖_{L2}}`.
///
/// Each `k1` contributes the exact length of the intersection of two unions
/// of open intervals.
pub fn bilinear_block_set_size(
    tau0: f64,
    m0: &[i64],
    n1: u64,
    n2: u64,
    l1: u64,
    l2: u64,
    gamma: &[f64],
) -> Result<f64> {
    let d = gamma.len();
    if m0.len() != d || !(2..=3).contains(&d) {
        return invalid("k0 and gamma must share a dimension d ∈ {2, 3}");
    }
    for v in [n1, n2, l1, l2] {
        if !crate::dyadic::is_dyadic(v) {
            return invalid(format!("{v} is not dyadic"));
        }
    }
    let k0: Vec<f64> = (0..d).map(|j| m0[j] as f64 / gamma[j]).collect();
    let rmax = 2.0 * n1 as f64;
    let ranges: Vec<i64> = gamma.iter().map(|g| (rmax * g).ceil() as i64).collect();
    let mut total = 0.0;
    let mut m = vec![0i64; d];
    let mut counter: Vec<i64> = ranges.iter().map(|r| -r).collect();
    loop {
        m.copy_from_slice(&counter);
        let k1: Vec<f64> = (0..d).map(|j| m[j] as f64 / gamma[j]).collect();
        let r1 = k1.iter().map(|x| x * x).sum::<f64>();
        let diff: Vec<f64> = k1.iter().zip(&k0).map(|(a, b)| a - b).collect();
        let r2 = diff.iter().map(|x| x * x).sum::<f64>();
        if in_frequency_shell(n1, r1.sqrt()) && in_frequency_shell(n2, r2.sqrt()) {
            let a = modulation_intervals(l1, r1);
            let b = modulation_intervals(l2, r2 - tau0);
            for (x0, x1) in &a {
                for (y0, y1) in &b {
                    total += (x1.min(*y1) - x0.max(*y0)).max(0.0);
                }
            }
        }
        let mut p = 0;
        loop {
            if p == d {
                return Ok(total);
            }
            counter[p] += 1;
            if counter[p] <= ranges[p] {
                break;
            }
            counter[p] = -ranges[p];
            p += 1;
        }
    }
}

/// `L_min (L_max/N0 + 1) N_min^{d-1}` with `N_min = min(N0, N1, N2)`.
pub fn block_set_bound(n0: u64, n1: u64, n2: u64, l1: u64, l2: u64, d: usize) -> f64 {
    let lmin = l1.min(l2) as f64;
    let lmax = l1.max(l2) as f64;
    let nmin = n0.min(n1).min(n2) as f64;
    lmin * (lmax / n0 as f64 + 1.0) * nmin.powi(d as i32 - 1)
}

/// Angular tiling of the annulus `N ≤ |k| ≤ N + 10` into `J = √(N1/L_max)`
/// overlapping sectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngularTiling {
    #[serde(rename = "N")]
    pub n: f64,
    pub n1: u64,
    pub lmax: u64,
    pub j: usize,
    /// Admissible `d[j1, j2]` range of the index set 𝒥 (empty when `lo > hi`).
    pub d_lo: usize,
    pub d_hi: usize,
    /// `κ_θ(j, 0)` for `j = 0..J`.
    pub kappa_base: Vec<usize>,
}

impl AngularTiling {
    pub fn new(n: f64, n1: u64, lmax: u64) -> Result<Self> {
        if !(crate::dyadic::is_dyadic(n1) && crate::dyadic::is_dyadic(lmax)) || lmax > n1 {
            return invalid("N1 and L_max must be dyadic with L_max ≤ N1");
        }
        let ratio = n1 / lmax;
        let j = (ratio as f64).sqrt().round() as usize;
        if j * j != ratio as usize {
            return invalid("√(N1/L_max) must be an integer");
        }
        let jf = j as f64;
        let d_lo = (0.25 * jf - 2.0).ceil().max(1.0) as usize;
        // Largest d for which the radial containment
        // 2(N+10) sin[π(d+2)/J] ≤ 2N sin[π(d+10)/J] holds.
        let mut d_hi = 0usize;
        let mut found = false;
        if j >= 8 {
            for d in d_lo..=j / 2 {
                let lhs = (n + 10.0) * (PI * (d as f64 + 2.0) / jf).sin();
                let rhs = n * (PI * (d as f64 + 10.0) / jf).sin();
                if lhs <= rhs {
                    d_hi = d;
                    found = true;
                } else {
                    break;
                }
            }
        }
        let (d_lo, d_hi) = if found { (d_lo, d_hi) } else { (1, 0) };
        let kappa_base = (0..j)
            .map(|j1| {
                // k*(j1) - k*(0) points at angle π/2 + π j1/J; the smallest
                // admissible j_θ is ⌈j1/2 + J/4 - 1⌉.
                let v = (0.5 * j1 as f64 + 0.25 * jf - 1.0 - 1e-12).ceil();
                (v.max(0.0) as usize) % j
            })
            .collect();
        Ok(AngularTiling { n, n1, lmax, j, d_lo, d_hi, kappa_base })
    }

    pub fn is_vacuous(&self) -> bool {
        self.d_lo > self.d_hi
    }

    /// `min{|a - b|, J - |a - b|}`.
    pub fn cyclic_distance(&self, a: usize, b: usize) -> usize {
        let diff = a.abs_diff(b) % self.j;
        diff.min(self.j - diff)
    }

    pub fn in_index_set(&self, j1: usize, j2: usize) -> bool {
        let d = self.cyclic_distance(j1, j2);
        j1 < self.j && j2 < self.j && d >= self.d_lo && d <= self.d_hi
    }

    /// All admissible `(j1, j2)`.
    pub fn index_set(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j1 in 0..self.j {
            for j2 in 0..self.j {
                if self.in_index_set(j1, j2) {
                    out.push((j1, j2));
                }
            }
        }
        out
    }

    /// `κ = (κ_r, κ_θ)`.
    pub fn kappa(&self, j1: usize, j2: usize) -> (usize, usize) {
        let kr = self.cyclic_distance(j1, j2);
        let diff = (j1 + self.j - j2) % self.j;
        (kr, (j2 + self.kappa_base[diff]) % self.j)
    }

    /// Representative point `k*(j)`.
    pub fn representative(&self, j: usize) -> [f64; 2] {
        let a = 2.0 * PI * j as f64 / self.j as f64;
        [self.n * a.cos(), self.n * a.sin()]
    }

    fn angle_in_sector(&self, angle: f64, index: usize) -> bool {
        let w = 2.0 * PI / self.j as f64;
        let centre = index as f64 * w;
        let mut delta = (angle - centre).rem_euclid(2.0 * PI);
        if delta > PI {
            delta -= 2.0 * PI;
        }
        delta.abs() <= w * (1.0 + 1e-12)
    }

    /// Membership in `D_j`.
    pub fn in_tile(&self, k: [f64; 2], index: usize) -> bool {
        let r = k[0].hypot(k[1]);
        r >= self.n && r <= self.n + 10.0 && self.angle_in_sector(k[1].atan2(k[0]), index)
    }

    /// Membership in `D̃_{j_r, j_θ}`.
    pub fn in_target(&self, k: [f64; 2], jr: usize, jt: usize) -> bool {
        let r = k[0].hypot(k[1]);
        let s = PI / self.j as f64;
        let r0 = 2.0 * self.n * (s * (jr as f64 - 1.0)).sin();
        let r1 = 2.0 * self.n * (s * (jr as f64 + 1.0)).sin();
        r >= r0 && r <= r1 && self.angle_in_sector(k[1].atan2(k[0]), jt)
    }

    /// Uniform sample of `D_j` in polar coordinates.
    pub fn sample_tile<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> [f64; 2] {
        let w = 2.0 * PI / self.j as f64;
        let r = rng.gen_range(self.n..=self.n + 10.0);
        let a = rng.gen_range((index as f64 - 1.0) * w..=(index as f64 + 1.0) * w);
        [r * a.cos(), r * a.sin()]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrthogonalityViolation {
    pub j1: usize,
    pub j2: usize,
    pub k1: [f64; 2],
    pub k2: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub vacuous: bool,
    pub index_set_size: usize,
    pub samples: usize,
    pub radial_slack: usize,
    pub angular_slack: usize,
    pub violations: Vec<OrthogonalityViolation>,
    /// `histogram[c]` counts targets with `c` preimages (`c ≥ 3` lumped into
    /// the last bin).
    pub preimage_histogram: [usize; 4],
    /// Whether every representative difference lands in its own target tile.
    pub representatives_ok: bool,
}

/// Randomized check of the tile-membership claim plus the preimage count of κ.
pub fn verify_orthogonality<R: Rng + ?Sized>(tiling: &AngularTiling, samples: usize, rng: &mut R) -> OrthogonalityReport {
    const RADIAL: usize = 10;
    const ANGULAR: usize = 20;
    let index_set = tiling.index_set();
    let mut report = OrthogonalityReport {
        vacuous: index_set.is_empty(),
        index_set_size: index_set.len(),
        samples: 0,
        radial_slack: RADIAL,
        angular_slack: ANGULAR,
        violations: Vec::new(),
        preimage_histogram: [0; 4],
        representatives_ok: true,
    };
    let j = tiling.j;
    let targets_r = 1..(j / 2).max(1);
    let mut preimages = vec![0usize; j * j];
    for &(j1, j2) in &index_set {
        let (kr, kt) = tiling.kappa(j1, j2);
        preimages[kr * j + kt] += 1;
        let a = tiling.representative(j1);
        let b = tiling.representative(j2);
        if !tiling.in_target([a[0] - b[0], a[1] - b[1]], kr, kt) {
            report.representatives_ok = false;
        }
    }
    for jr in targets_r.clone() {
        for jt in 0..j {
            report.preimage_histogram[preimages[jr * j + jt].min(3)] += 1;
        }
    }
    if index_set.is_empty() {
        return report;
    }
    for _ in 0..samples {
        let (j1, j2) = index_set[rng.gen_range(0..index_set.len())];
        let k1 = tiling.sample_tile(j1, rng);
        let k2 = tiling.sample_tile(j2, rng);
        let diff = [k1[0] - k2[0], k1[1] - k2[1]];
        let (kr, kt) = tiling.kappa(j1, j2);
        let hit = targets_r.clone().filter(|jr| jr.abs_diff(kr) <= RADIAL).any(|jr| {
            (0..j).filter(|&jt| tiling.cyclic_distance(jt, kt) <= ANGULAR).any(|jt| tiling.in_target(diff, jr, jt))
        });
        if !hit {
            report.violations.push(OrthogonalityViolation { j1, j2, k1, k2 });
        }
        report.samples += 1;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn annulus_example() {
        let mut dom = AnnulusSlabDomain::new(2, 100.0, 0.05, 0.05, 0.0);
        dom.ball = Some((vec![0.0, 0.0], 100.0));
        let r = count_lattice_in_domain(&dom, &[1.0, 1.0]).unwrap();
        assert_eq!(r.exact, 2);
        assert!((r.bound_value - 10f64.sqrt()).abs() < 1e-12);
        assert!((r.ratio - 2.0 / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_when_slab_misses_annulus() {
        let dom = AnnulusSlabDomain::new(2, 100.0, 0.5, 0.5, 101.0);
        assert_eq!(count_lattice_in_domain(&dom, &[1.0, 1.0]).unwrap().exact, 0);
        let dom = AnnulusSlabDomain::new(3, 50.0, 0.5, 0.5, 60.0);
        assert_eq!(count_lattice_in_domain(&dom, &[1.0, 1.0, 1.0]).unwrap().exact, 0);
    }

    #[test]
    fn hypotheses_are_named() {
        let dom = AnnulusSlabDomain::new(2, 100.0, 0.001, 0.05, 0.0);
        let err = count_lattice_in_domain(&dom, &[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("mu"), "{err}");
        let mut dom = AnnulusSlabDomain::new(2, 100.0, 0.05, 0.05, 0.0);
        dom.theta = Some(0.01);
        let err = count_lattice_in_domain(&dom, &[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("θ"), "{err}");
    }

    /// The slab-scan agrees with a plain box scan on random instances.
    #[test]
    fn count_matches_box_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 3] {
            for _ in 0..25 {
                let dom = random_domain(d, 8.0, 24.0, 24.0, &mut rng);
                let gamma: Vec<f64> = (0..d).map(|j| 1.0 + 0.3 * j as f64).collect();
                let fast = count_lattice_in_domain(&dom, &gamma).unwrap().exact;
                let r = dom.n + dom.mu + 1.0;
                let ranges: Vec<i64> = gamma.iter().map(|g| (r * g).ceil() as i64).collect();
                let mut slow = 0;
                let z = if d == 3 { ranges[2] } else { 0 };
                for a in -ranges[0]..=ranges[0] {
                    for b in -ranges[1]..=ranges[1] {
                        for c in -z..=z {
                            let p = [a as f64 / gamma[0], b as f64 / gamma[1], if d == 3 { c as f64 / gamma[2] } else { 0.0 }];
                            let q = dom.unrotate(&p[..d]);
                            if dom.contains_unrotated(&q[..d]) {
                                slow += 1;
                            }
                        }
                    }
                }
                assert_eq!(fast, slow, "{dom:?}");
            }
        }
    }

    #[test]
    fn rotations_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 3] {
            for _ in 0..20 {
                let mut dom = AnnulusSlabDomain::new(d, 10.0, 1.0, 1.0, 0.0);
                dom.rotation = random_rotation(d, &mut rng);
                dom.validate().unwrap();
            }
        }
    }

    #[test]
    fn block_set_disjoint_supports() {
        let v = bilinear_block_set_size(0.0, &[40, 0], 1, 1, 1, 1, &[1.0, 1.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    /// Per-k1 interval intersection agrees with fine τ sampling.
    #[test]
    fn block_set_matches_tau_sampling() {
        let gamma = [1.0, 1.0];
        let exact = bilinear_block_set_size(0.0, &[1, 0], 4, 4, 2, 2, &gamma).unwrap();
        let h = 1e-3;
        let mut approx = 0.0;
        for a in -8i64..=8 {
            for b in -8i64..=8 {
                let r1 = (a * a + b * b) as f64;
                let r2 = ((a - 1) * (a - 1) + b * b) as f64;
                if !(in_frequency_shell(4, r1.sqrt()) && in_frequency_shell(4, r2.sqrt())) {
                    continue;
                }
                let mut t = -200.0 + 0.5 * h;
                while t < 200.0 {
                    let w1 = (t + r1).abs();
                    let w2 = (t + r2).abs();
                    if w1 > 1.0 && w1 < 4.0 && w2 > 1.0 && w2 < 4.0 {
                        approx += h;
                    }
                    t += h;
                }
            }
        }
        assert!(exact > 0.0);
        assert!((exact - approx).abs() < 0.01 * exact, "{exact} vs {approx}");
    }

    #[test]
    fn tiling_index_set_and_kappa() {
        let t = AngularTiling::new(16384.0, 1 << 14, 1 << 4).unwrap();
        assert_eq!(t.j, 32);
        assert_eq!((t.d_lo, t.d_hi), (6, 9));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let report = verify_orthogonality(&t, 2000, &mut rng);
        assert!(!report.vacuous);
        assert!(report.violations.is_empty());
        assert!(report.representatives_ok);
        assert_eq!(report.preimage_histogram[1] + report.preimage_histogram[3], 0);
        assert!(report.preimage_histogram[2] > 0);
    }

    #[test]
    fn small_tiling_is_vacuous() {
        let t = AngularTiling::new(64.0, 64, 4).unwrap();
        assert_eq!(t.j, 4);
        assert!(t.is_vacuous());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let report = verify_orthogonality(&t, 100, &mut rng);
        assert!(report.vacuous);
        assert_eq!(report.samples, 0);
    }
}
