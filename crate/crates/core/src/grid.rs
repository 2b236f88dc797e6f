//! Zero-padded physical grids for alias-free products of truncated fields.
//!
//! A lattice with bounds `M_j` is embedded in a grid of `P_j = 2(2M_j+1)`
//! points per axis. Products of two truncated fields have indices bounded by
//! `2M_j < P_j/2`, so restricting the discrete transform of the pointwise
//! product back to the lattice reproduces the exact coefficient convolution.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::torus::DualLattice;

/// Products with at most this many nonzero term pairs are formed by direct
/// convolution instead of FFTs.
const SPARSE_PAIR_LIMIT: usize = 1 << 14;

#[derive(Clone)]
pub struct PaddedGrid {
    lattice: DualLattice,
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
    volume: f64,
    map: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for PaddedGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PaddedGrid").field("dims", &self.dims).finish()
    }
}

impl PaddedGrid {
    pub fn new(lattice: &DualLattice) -> Self {
        let d = lattice.d();
        let dims: Vec<usize> = lattice.kmax.iter().map(|&m| 2 * (2 * m + 1)).collect();
        let mut strides = vec![1; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * dims[j + 1];
        }
        let total = dims.iter().product();
        let map = (0..lattice.len())
            .map(|i| {
                let m = lattice.multi_index(i);
                (0..d)
                    .map(|j| (m[j].rem_euclid(dims[j] as i64)) as usize * strides[j])
                    .sum()
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = dims.iter().map(|&p| planner.plan_fft_forward(p)).collect();
        let inv = dims.iter().map(|&p| planner.plan_fft_inverse(p)).collect();
        PaddedGrid {
            lattice: lattice.clone(),
            dims,
            strides,
            total,
            volume: lattice.spec.volume(),
            map,
            fwd,
            inv,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let d = self.dims.len();
        for axis in 0..d {
            let p = self.dims[axis];
            let stride = self.strides[axis];
            let plan = &plans[axis];
            let mut line = vec![Complex64::new(0.0, 0.0); p];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            let outer = self.total / (p * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * p * stride + inner;
                    for (t, v) in line.iter_mut().enumerate() {
                        *v = data[base + t * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (t, v) in line.iter().enumerate() {
                        data[base + t * stride] = *v;
                    }
                }
            }
        }
    }

    /// Values `φ(x_j) = |T|^{-1} Σ_k φ̂(k) e^{ik·x_j}` on the padded grid.
    pub fn to_physical(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut data = vec![Complex64::new(0.0, 0.0); self.total];
        let s = 1.0 / self.volume;
        for (i, c) in coeffs.iter().enumerate() {
            data[self.map[i]] = c * s;
        }
        self.transform(&mut data, &self.inv);
        data
    }

    /// Lattice coefficients of grid values (exact for trigonometric polynomials
    /// whose indices stay below half the grid size).
    pub fn from_physical(&self, mut values: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut values, &self.fwd);
        let s = self.volume / self.total as f64;
        self.map.iter().map(|&g| values[g] * s).collect()
    }

    /// Coefficients of `φψ` restricted to the lattice.
    pub fn product(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let na = count_nonzero(a);
        let nb = count_nonzero(b);
        if na.saturating_mul(nb) <= SPARSE_PAIR_LIMIT {
            return self.sparse_product(a, b);
        }
        let pa = self.to_physical(a);
        let mut pb = self.to_physical(b);
        for (x, y) in pb.iter_mut().zip(&pa) {
            *x *= y;
        }
        self.from_physical(pb)
    }

    /// Coefficients of `φ ψ̄` restricted to the lattice.
    pub fn product_conj(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let n = b.len();
        let bc: Vec<Complex64> = (0..n).map(|i| b[n - 1 - i].conj()).collect();
        self.product(a, &bc)
    }

    fn sparse_product(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let lat = &self.lattice;
        let mut out = vec![Complex64::new(0.0, 0.0); a.len()];
        let s = 1.0 / self.volume;
        let nzb: Vec<(usize, [i64; 3])> = b
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(i, _)| (i, lat.multi_index(i)))
            .collect();
        for (i, ca) in a.iter().enumerate() {
            if ca.norm_sqr() == 0.0 {
                continue;
            }
            let mi = lat.multi_index(i);
            for (j, mj) in &nzb {
                let m = [mi[0] + mj[0], mi[1] + mj[1], mi[2] + mj[2]];
                if let Some(t) = lat.index_of(&m) {
                    out[t] += ca * b[*j] * s;
                }
            }
        }
        out
    }
}

fn count_nonzero(a: &[Complex64]) -> usize {
    a.iter().filter(|c| c.norm_sqr() > 0.0).count()
}
