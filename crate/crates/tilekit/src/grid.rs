//! Periodic anisotropic sampling grids and grid functions.
//!
//! The window is `[0, 2^{K·α_i})` per axis with sample spacing `2^{k0·α_i}`,
//! so axis i has `N_i = 2^{(K−k0)·α_i}` points. The frequency lattice has
//! spacing `2^{−K·α_i}` and signed indices in `[−N_i/2, N_i/2)`, which makes
//! every frequency dyadic cube of scale −k with k ≤ K an exact union of
//! lattice cells. Transforms use the kernel `e^{−2πi x·ξ}` with the Riemann
//! measure weights, so Plancherel holds exactly on the grid.

use std::sync::Mutex;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TilekitError};
use crate::geometry::{pow2, AnisoCube, AnisoExponent};

/// Window exponent K and sampling exponent k0 over an anisotropy vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alpha: AnisoExponent,
    /// Window exponent: axis i spans `[0, 2^{K·α_i})`.
    pub big_k: i32,
    /// Sampling exponent (≤ 0 in practice): spacing `2^{k0·α_i}`.
    pub k0: i32,
}

impl GridSpec {
    pub fn new(alpha: AnisoExponent, big_k: i32, k0: i32) -> Result<Self> {
        if k0 >= big_k {
            return Err(TilekitError::Validation(format!(
                "need k0 < K, got k0={k0}, K={big_k}"
            )));
        }
        let bits: i64 = alpha
            .components()
            .iter()
            .map(|&a| (big_k - k0) as i64 * a as i64)
            .sum();
        if bits > 26 {
            return Err(TilekitError::Validation(format!(
                "grid too large: 2^{bits} points"
            )));
        }
        Ok(GridSpec { alpha, big_k, k0 })
    }

    pub fn dim(&self) -> usize {
        self.alpha.dim()
    }

    /// Points along axis i.
    pub fn points(&self, i: usize) -> usize {
        1usize << ((self.big_k - self.k0) as u32 * self.alpha.component(i))
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.points(i)).collect()
    }

    pub fn total_points(&self) -> usize {
        (0..self.dim()).map(|i| self.points(i)).product()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let dims = self.dims();
        let mut s = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * dims[i + 1];
        }
        s
    }

    /// Physical cell volume `2^{k0|α|}`.
    pub fn cell_volume(&self) -> f64 {
        pow2(self.k0 * self.alpha.total() as i32)
    }

    /// Frequency cell volume `2^{−K|α|}`.
    pub fn freq_cell_volume(&self) -> f64 {
        pow2(-self.big_k * self.alpha.total() as i32)
    }

    /// Window volume `2^{K|α|}`.
    pub fn window_volume(&self) -> f64 {
        pow2(self.big_k * self.alpha.total() as i32)
    }

    /// Window side on axis i.
    pub fn side(&self, i: usize) -> f64 {
        pow2(self.big_k * self.alpha.component(i) as i32)
    }

    /// Sample spacing on axis i.
    pub fn spacing(&self, i: usize) -> f64 {
        pow2(self.k0 * self.alpha.component(i) as i32)
    }

    /// Frequency lattice spacing on axis i.
    pub fn freq_spacing(&self, i: usize) -> f64 {
        pow2(-self.big_k * self.alpha.component(i) as i32)
    }

    /// The window as the scale-K dyadic cube at the origin.
    pub fn window_cube(&self) -> AnisoCube {
        AnisoCube {
            k: self.big_k,
            idx: vec![0; self.dim()],
        }
    }

    /// Physical coordinates of the sample with multi-index `j`.
    pub fn point_coords(&self, j: &[usize]) -> Vec<f64> {
        j.iter()
            .enumerate()
            .map(|(i, &ji)| ji as f64 * self.spacing(i))
            .collect()
    }

    /// Multi-index of a flat sample index.
    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize; self.dim()];
        let mut rem = flat;
        for i in 0..self.dim() {
            out[i] = rem / strides[i];
            rem %= strides[i];
        }
        out
    }

    pub fn flatten(&self, j: &[usize]) -> usize {
        j.iter()
            .zip(self.strides())
            .map(|(&ji, s)| ji * s)
            .sum()
    }

    /// Signed frequency index range on axis i: `[-N_i/2, N_i/2)`.
    pub fn freq_range(&self, i: usize) -> (i64, i64) {
        let half = (self.points(i) / 2) as i64;
        (-half, half)
    }

    /// Storage index of a signed frequency index.
    pub fn freq_storage(&self, i: usize, m: i64) -> usize {
        (m.rem_euclid(self.points(i) as i64)) as usize
    }

    /// Signed frequency index of a storage index.
    pub fn freq_signed(&self, i: usize, u: usize) -> i64 {
        let n = self.points(i) as i64;
        let u = u as i64;
        if u < n / 2 {
            u
        } else {
            u - n
        }
    }

    /// Continuum coordinates of a frequency lattice point.
    pub fn freq_coords(&self, m: &[i64]) -> Vec<f64> {
        m.iter()
            .enumerate()
            .map(|(i, &mi)| mi as f64 * self.freq_spacing(i))
            .collect()
    }

    pub fn freq_in_range(&self, m: &[i64]) -> bool {
        m.iter().enumerate().all(|(i, &mi)| {
            let (lo, hi) = self.freq_range(i);
            lo <= mi && mi < hi
        })
    }

    /// Fold a coordinate difference into `[−L_i/2, L_i/2)` per axis.
    pub fn torus_fold(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let l = self.side(i);
                let mut v = xi.rem_euclid(l);
                if v >= 0.5 * l {
                    v -= l;
                }
                v
            })
            .collect()
    }

    /// Periodic anisotropic norm: ρ of the folded difference.
    pub fn rho_per(&self, x: &[f64]) -> f64 {
        crate::geometry::aniso_norm(&self.torus_fold(x), &self.alpha)
    }

    /// The scales whose wave packets resolve on this grid: centers on both
    /// lattices and frequency support of relative width `b0` at least one
    /// lattice cell wide per axis.
    pub fn resolvable_scales(&self, b0: f64) -> Result<(i32, i32)> {
        let k_lo = self.k0 + 1;
        let need = (1.0 / b0).log2().ceil().max(2.0) as i32;
        let k_hi = (0..self.dim())
            .map(|i| self.big_k - (need + self.alpha.component(i) as i32 - 1) / self.alpha.component(i) as i32)
            .min()
            .expect("non-empty alpha");
        if k_lo > k_hi {
            return Err(TilekitError::Resolution(format!(
                "no resolvable tile scales on grid K={}, k0={} at b0={b0}",
                self.big_k, self.k0
            )));
        }
        Ok((k_lo, k_hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Repr {
    Physical,
    Frequency,
}

/// Complex samples on the grid, tagged by representation.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub spec: GridSpec,
    pub repr: Repr,
    pub samples: Vec<Complex64>,
}

static PLANNER: Mutex<Option<FftPlanner<f64>>> = Mutex::new(None);

fn plan(len: usize, inverse: bool) -> std::sync::Arc<dyn rustfft::Fft<f64>> {
    let mut guard = PLANNER.lock().expect("fft planner lock");
    let planner = guard.get_or_insert_with(FftPlanner::new);
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

fn fft_all_axes(spec: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let dims = spec.dims();
    let strides = spec.strides();
    for axis in 0..dims.len() {
        let len = dims[axis];
        if len == 1 {
            continue;
        }
        let fft = plan(len, inverse);
        let stride = strides[axis];
        let block = len * stride;
        let blocks = data.len() / block;
        let mut lane = vec![Complex64::ZERO; len];
        for b in 0..blocks {
            for inner in 0..stride {
                let base = b * block + inner;
                for (t, slot) in lane.iter_mut().enumerate() {
                    *slot = data[base + t * stride];
                }
                fft.process(&mut lane);
                for (t, &v) in lane.iter().enumerate() {
                    data[base + t * stride] = v;
                }
            }
        }
    }
}

impl GridFunction {
    pub fn zero(spec: GridSpec, repr: Repr) -> Self {
        let n = spec.total_points();
        GridFunction {
            spec,
            repr,
            samples: vec![Complex64::ZERO; n],
        }
    }

    pub fn from_samples(spec: GridSpec, repr: Repr, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != spec.total_points() {
            return Err(TilekitError::invalid("sample count does not match grid"));
        }
        Ok(GridFunction { spec, repr, samples })
    }

    /// Measure weight of one cell in the current representation.
    pub fn measure(&self) -> f64 {
        match self.repr {
            Repr::Physical => self.spec.cell_volume(),
            Repr::Frequency => self.spec.freq_cell_volume(),
        }
    }

    pub fn to_frequency(&self) -> GridFunction {
        match self.repr {
            Repr::Frequency => self.clone(),
            Repr::Physical => {
                let mut data = self.samples.clone();
                fft_all_axes(&self.spec, &mut data, false);
                let w = self.spec.cell_volume();
                for v in &mut data {
                    *v *= w;
                }
                GridFunction {
                    spec: self.spec.clone(),
                    repr: Repr::Frequency,
                    samples: data,
                }
            }
        }
    }

    pub fn to_physical(&self) -> GridFunction {
        match self.repr {
            Repr::Physical => self.clone(),
            Repr::Frequency => {
                let mut data = self.samples.clone();
                fft_all_axes(&self.spec, &mut data, true);
                let w = self.spec.freq_cell_volume();
                for v in &mut data {
                    *v *= w;
                }
                GridFunction {
                    spec: self.spec.clone(),
                    repr: Repr::Physical,
                    samples: data,
                }
            }
        }
    }

    /// ‖f‖₂ with the representation's measure; Plancherel makes the two
    /// representations agree.
    pub fn norm_l2(&self) -> f64 {
        let w = self.measure();
        (self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * w).sqrt()
    }

    /// ⟨f, g⟩ = Σ f·conj(g)·measure; both functions must share grid and
    /// representation.
    pub fn inner(&self, other: &GridFunction) -> Result<Complex64> {
        if self.spec != other.spec || self.repr != other.repr {
            return Err(TilekitError::invalid(
                "inner product requires matching grid and representation",
            ));
        }
        let w = self.measure();
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * w)
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        let mut out = self.clone();
        for v in &mut out.samples {
            *v *= c;
        }
        out
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.spec != other.spec || self.repr != other.repr {
            return Err(TilekitError::invalid("add requires matching grid/repr"));
        }
        let mut out = self.clone();
        for (v, o) in out.samples.iter_mut().zip(&other.samples) {
            *v += o;
        }
        Ok(out)
    }

    /// Access a frequency sample by signed lattice index.
    pub fn freq_sample(&self, m: &[i64]) -> Complex64 {
        debug_assert_eq!(self.repr, Repr::Frequency);
        let flat = self.freq_flat(m);
        self.samples[flat]
    }

    pub fn freq_flat(&self, m: &[i64]) -> usize {
        let j: Vec<usize> = m
            .iter()
            .enumerate()
            .map(|(i, &mi)| self.spec.freq_storage(i, mi))
            .collect();
        self.spec.flatten(&j)
    }
}

/// Iterate all signed frequency indices in the inclusive integer box
/// `[lo_i, hi_i]`, clipped to the grid's Nyquist range.
pub fn for_each_freq_in_box<F: FnMut(&[i64])>(spec: &GridSpec, lo: &[i64], hi: &[i64], mut f: F) {
    let n = spec.dim();
    let mut lo_c = vec![0i64; n];
    let mut hi_c = vec![0i64; n];
    for i in 0..n {
        let (rlo, rhi) = spec.freq_range(i);
        lo_c[i] = lo[i].max(rlo);
        hi_c[i] = hi[i].min(rhi - 1);
        if lo_c[i] > hi_c[i] {
            return;
        }
    }
    let mut m = lo_c.clone();
    loop {
        f(&m);
        let mut axis = n;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            m[axis] += 1;
            if m[axis] <= hi_c[axis] {
                break;
            }
            m[axis] = lo_c[axis];
            if axis == 0 {
                return;
            }
        }
    }
}
