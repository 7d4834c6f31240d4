//! The base bump, wave packets, symmetry actions, and tile weights.
//!
//! Packets are built directly in frequency space:
//!
//! `φ̂_P(ξ) = 2^{k|α|/2} · φ̂(δ_{2^k}(ξ − c(ω_{P(0)}))) · e^{−2πi c(I_P)·(ξ − c(ω_{P(0)}))}`
//!
//! which realizes `M_{c(ω_{P(0)})} T_{c(I_P)} D²_{2^k} φ` with exact compact
//! frequency support: the bump vanishes identically outside the centered
//! sub-box of `ω_{P(0)}` of relative side b0, so packets with disjoint
//! frequency supports are exactly orthogonal on the grid.
//!
//! The public constructor rescales each packet to `‖φ_P‖₂ = ‖φ‖₂` (the
//! continuum quadrature value); the raw sampled norm is only Riemann-sum
//! close to it and varies slightly across scales. `phi_p_raw` keeps the
//! unrescaled samples, for which the dilation-covariance identity is exact.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TilekitError};
use crate::geometry::{aniso_norm, pow2};
use crate::grid::{for_each_freq_in_box, GridFunction, GridSpec, Repr};
use crate::multipliers::MultiplierSpec;
use crate::tiles::Tile;

const TAU: f64 = std::f64::consts::TAU;

/// `exp(−1/(1−s²))` on (−1,1), zero outside.
fn mollifier(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

const STEP_CELLS: usize = 4096;

/// Prefix integrals of the mollifier over [−1, 1] at STEP_CELLS uniform
/// cells, each integrated with two Simpson panels.
fn step_table() -> &'static Vec<f64> {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 2.0 / STEP_CELLS as f64;
        let mut acc = 0.0;
        let mut table = Vec::with_capacity(STEP_CELLS + 1);
        table.push(0.0);
        for c in 0..STEP_CELLS {
            let a = -1.0 + c as f64 * h;
            let m1 = a + 0.25 * h;
            let m2 = a + 0.5 * h;
            let m3 = a + 0.75 * h;
            let b = a + h;
            acc += h / 12.0
                * (mollifier(a) + 4.0 * mollifier(m1) + 2.0 * mollifier(m2) + 4.0 * mollifier(m3)
                    + mollifier(b));
            table.push(acc);
        }
        table
    })
}

/// The normalized integral of the mollifier: smooth, 0 at −1, 1 at +1.
fn smooth_step(t: f64) -> f64 {
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let table = step_table();
    let total = table[STEP_CELLS];
    let pos = (t + 1.0) / 2.0 * STEP_CELLS as f64;
    let cell = (pos.floor() as usize).min(STEP_CELLS - 1);
    let a = -1.0 + cell as f64 * (2.0 / STEP_CELLS as f64);
    // Simpson on the partial cell [a, t]
    let w = t - a;
    let part = w / 6.0 * (mollifier(a) + 4.0 * mollifier(a + 0.5 * w) + mollifier(t));
    (table[cell] + part) / total
}

/// Frequency-side bump profile: smooth, even, exactly 1 on [−b1/2, b1/2] and
/// exactly 0 outside [−b0/2, b0/2], tensorized per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub b0: f64,
    pub b1: f64,
    #[serde(skip, default)]
    profile_l2_sq: OnceCellF64,
}

#[derive(Debug, Clone, Default)]
pub struct OnceCellF64(OnceLock<f64>);

impl PartialEq for OnceCellF64 {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Serialize for OnceCellF64 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_unit()
    }
}

impl<'de> Deserialize<'de> for OnceCellF64 {
    fn deserialize<D: serde::Deserializer<'de>>(_d: D) -> std::result::Result<Self, D::Error> {
        Ok(OnceCellF64::default())
    }
}

impl BumpSpec {
    pub fn new(b0: f64, b1: f64) -> Result<Self> {
        if !(0.0 < b1 && b1 < b0 && b0 < 1.0) {
            return Err(TilekitError::invalid(format!(
                "bump parameters must satisfy 0 < b1 < b0 < 1, got b0={b0}, b1={b1}"
            )));
        }
        Ok(BumpSpec {
            b0,
            b1,
            profile_l2_sq: OnceCellF64::default(),
        })
    }

    /// b0 = 1/10, b1 = 9/100.
    pub fn default_params() -> Self {
        BumpSpec::new(0.1, 0.09).expect("valid defaults")
    }

    /// The 1-D profile η(u).
    pub fn profile(&self, u: f64) -> f64 {
        let u = u.abs();
        if u <= self.b1 / 2.0 {
            1.0
        } else if u >= self.b0 / 2.0 {
            0.0
        } else {
            let w = (u - self.b1 / 2.0) / ((self.b0 - self.b1) / 2.0);
            1.0 - smooth_step(2.0 * w - 1.0)
        }
    }

    /// φ̂(ξ) = Π η(ξ_i).
    pub fn hat(&self, xi: &[f64]) -> f64 {
        xi.iter().map(|&u| self.profile(u)).product()
    }

    /// ∫ η(u)² du over ℝ, by adaptive quadrature (cached).
    pub fn profile_l2_sq(&self) -> f64 {
        *self.profile_l2_sq.0.get_or_init(|| {
            let lo = self.b1 / 2.0;
            let hi = self.b0 / 2.0;
            // dense composite Simpson over the transition region
            let n = 4096usize;
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for c in 0..n {
                let a = lo + c as f64 * h;
                let f = |u: f64| self.profile(u) * self.profile(u);
                acc += h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
            }
            self.b1 + 2.0 * acc
        })
    }

    /// ‖φ‖₂ on ℝⁿ = (∫η²)^{n/2}.
    pub fn base_norm(&self, n: usize) -> f64 {
        self.profile_l2_sq().powf(n as f64 / 2.0).sqrt()
    }
}

/// Checks that a tile's packet resolves on the grid and that its cubes fit
/// the window / Nyquist box.
pub fn validate_tile_on_grid(spec: &GridSpec, bump: &BumpSpec, tile: &Tile) -> Result<()> {
    let (k_lo, k_hi) = spec.resolvable_scales(bump.b0)?;
    if tile.k < k_lo || tile.k > k_hi {
        return Err(TilekitError::Resolution(format!(
            "tile scale {} outside resolvable range [{k_lo}, {k_hi}]",
            tile.k
        )));
    }
    for i in 0..spec.dim() {
        let a = spec.alpha.component(i) as i32;
        let s_cells = 1i64 << ((spec.big_k - tile.k) * a);
        if tile.space[i] < 0 || tile.space[i] >= s_cells {
            return Err(TilekitError::OutOfWindow(format!(
                "tile space index {} outside window on axis {i}",
                tile.space[i]
            )));
        }
        let f_half = 1i64 << ((tile.k - spec.k0) * a - 1);
        if tile.freq[i] < -f_half || tile.freq[i] >= f_half {
            return Err(TilekitError::OutOfWindow(format!(
                "tile frequency index {} outside Nyquist box on axis {i}",
                tile.freq[i]
            )));
        }
    }
    Ok(())
}

/// Center of `ω_{P(0)}` in frequency-lattice units (integer by the
/// resolvability constraints).
fn semitile_center_lattice(spec: &GridSpec, tile: &Tile) -> Vec<i64> {
    (0..spec.dim())
        .map(|i| {
            let a = spec.alpha.component(i) as i32;
            let sh = (spec.big_k - tile.k) * a - 2;
            debug_assert!(sh >= 0);
            (4 * tile.freq[i] + 1) << sh
        })
        .collect()
}

/// The lattice bounding box of the packet's frequency support.
fn support_box(spec: &GridSpec, bump: &BumpSpec, tile: &Tile) -> (Vec<i64>, Vec<i64>) {
    let c = semitile_center_lattice(spec, tile);
    let mut lo = Vec::with_capacity(spec.dim());
    let mut hi = Vec::with_capacity(spec.dim());
    for i in 0..spec.dim() {
        let a = spec.alpha.component(i) as i32;
        let hw = bump.b0 / 2.0 * pow2((spec.big_k - tile.k) * a);
        lo.push((c[i] as f64 - hw).ceil() as i64);
        hi.push((c[i] as f64 + hw).floor() as i64);
    }
    (lo, hi)
}

/// Unnormalized packet value at one frequency lattice point.
fn packet_value(tile: &Tile, bump: &BumpSpec, spec: &GridSpec, m: &[i64]) -> Complex64 {
    let c_lat = semitile_center_lattice(spec, tile);
    let space_center = tile.space_cube().center(&spec.alpha);
    let amp0 = pow2(tile.k * spec.alpha.total() as i32).sqrt();
    let mut mag = amp0;
    let mut phase = 0.0;
    for i in 0..spec.dim() {
        let a = spec.alpha.component(i) as i32;
        let rel = (m[i] - c_lat[i]) as f64;
        mag *= bump.profile(rel * pow2(-(spec.big_k - tile.k) * a));
        phase += space_center[i] * rel * pow2(-spec.big_k * a);
    }
    if mag == 0.0 {
        Complex64::ZERO
    } else {
        Complex64::from_polar(mag, -TAU * phase)
    }
}

/// Norm of the raw packet, from the support cells only.
fn packet_raw_norm(tile: &Tile, bump: &BumpSpec, spec: &GridSpec) -> f64 {
    let (lo, hi) = support_box(spec, bump, tile);
    let mut sum = 0.0;
    for_each_freq_in_box(spec, &lo, &hi, |m| {
        sum += packet_value(tile, bump, spec, m).norm_sqr();
    });
    (sum * spec.freq_cell_volume()).sqrt()
}

/// Whether the exact frequency supports of two packets share no lattice cell.
pub fn supports_disjoint(a: &Tile, b: &Tile, bump: &BumpSpec, spec: &GridSpec) -> bool {
    let (lo_a, hi_a) = support_box(spec, bump, a);
    let (lo_b, hi_b) = support_box(spec, bump, b);
    (0..spec.dim()).any(|i| hi_a[i] < lo_b[i] || hi_b[i] < lo_a[i])
}

/// ⟨φ_P, φ_{P'}⟩ over the support intersection, without allocating grids.
/// Uses the same normalization as [`phi_p`].
pub fn phi_inner(a: &Tile, b: &Tile, bump: &BumpSpec, spec: &GridSpec) -> Result<Complex64> {
    validate_tile_on_grid(spec, bump, a)?;
    validate_tile_on_grid(spec, bump, b)?;
    let target = bump.base_norm(spec.dim());
    let scale_a = target / packet_raw_norm(a, bump, spec);
    let scale_b = target / packet_raw_norm(b, bump, spec);
    let (lo_a, hi_a) = support_box(spec, bump, a);
    let (lo_b, hi_b) = support_box(spec, bump, b);
    let lo: Vec<i64> = (0..spec.dim()).map(|i| lo_a[i].max(lo_b[i])).collect();
    let hi: Vec<i64> = (0..spec.dim()).map(|i| hi_a[i].min(hi_b[i])).collect();
    if (0..spec.dim()).any(|i| lo[i] > hi[i]) {
        return Ok(Complex64::ZERO);
    }
    let mut sum = Complex64::ZERO;
    for_each_freq_in_box(spec, &lo, &hi, |m| {
        let va = packet_value(a, bump, spec, m);
        if va == Complex64::ZERO {
            return;
        }
        let vb = packet_value(b, bump, spec, m);
        sum += va * vb.conj();
    });
    Ok(sum * scale_a * scale_b * spec.freq_cell_volume())
}

/// ⟨ψ^N_P, ψ^N_{P'}⟩ = Σ |m(ξ−N)|²·φ̂_P·conj(φ̂_{P'}) over the support
/// intersection.
pub fn psi_inner(
    a: &Tile,
    b: &Tile,
    n_point: &[i64],
    mult: &MultiplierSpec,
    bump: &BumpSpec,
    spec: &GridSpec,
) -> Result<Complex64> {
    validate_tile_on_grid(spec, bump, a)?;
    validate_tile_on_grid(spec, bump, b)?;
    let target = bump.base_norm(spec.dim());
    let scale_a = target / packet_raw_norm(a, bump, spec);
    let scale_b = target / packet_raw_norm(b, bump, spec);
    let (lo_a, hi_a) = support_box(spec, bump, a);
    let (lo_b, hi_b) = support_box(spec, bump, b);
    let lo: Vec<i64> = (0..spec.dim()).map(|i| lo_a[i].max(lo_b[i])).collect();
    let hi: Vec<i64> = (0..spec.dim()).map(|i| hi_a[i].min(hi_b[i])).collect();
    if (0..spec.dim()).any(|i| lo[i] > hi[i]) {
        return Ok(Complex64::ZERO);
    }
    let n = spec.dim();
    let mut sum = Complex64::ZERO;
    let mut shifted = vec![0.0f64; n];
    for_each_freq_in_box(spec, &lo, &hi, |m| {
        let va = packet_value(a, bump, spec, m);
        if va == Complex64::ZERO {
            return;
        }
        let vb = packet_value(b, bump, spec, m);
        if vb == Complex64::ZERO {
            return;
        }
        for i in 0..n {
            shifted[i] = (m[i] - n_point[i]) as f64 * spec.freq_spacing(i);
        }
        if shifted.iter().all(|&v| v == 0.0) {
            return; // m(0) := 0
        }
        sum += mult.eval(&shifted).norm_sqr() * va * vb.conj();
    });
    Ok(sum * scale_a * scale_b * spec.freq_cell_volume())
}

/// Whether a frequency lattice point lies inside the packet's semi-tile
/// `ω_{P(0)}` (half-open), the exclusion region of the decay estimates.
pub fn point_in_lower_semitile(tile: &Tile, m: &[i64], spec: &GridSpec) -> bool {
    crate::operators::semitile_contains_freq_point(
        tile,
        &crate::tiles::BitVector::zeros(spec.dim()),
        m,
        spec,
    )
}

/// The raw (unrescaled) packet in frequency representation.
pub fn phi_p_raw(tile: &Tile, bump: &BumpSpec, spec: &GridSpec) -> Result<GridFunction> {
    validate_tile_on_grid(spec, bump, tile)?;
    let mut out = GridFunction::zero(spec.clone(), Repr::Frequency);
    let c_lat = semitile_center_lattice(spec, tile);
    let space_center = tile.space_cube().center(&spec.alpha);
    let amp = pow2(tile.k * spec.alpha.total() as i32).sqrt();
    let (lo, hi) = support_box(spec, bump, tile);
    let n = spec.dim();
    let strides = spec.strides();
    let samples = &mut out.samples;
    for_each_freq_in_box(spec, &lo, &hi, |m| {
        let mut mag = amp;
        let mut phase = 0.0;
        for i in 0..n {
            let a = spec.alpha.component(i) as i32;
            let rel = (m[i] - c_lat[i]) as f64;
            // bump argument: δ_{2^k}(ξ − c) on axis i
            mag *= bump.profile(rel * pow2(-(spec.big_k - tile.k) * a));
            // translation phase: c(I_P)_i · (ξ − c)_i
            phase += space_center[i] * rel * pow2(-spec.big_k * a);
        }
        if mag != 0.0 {
            let flat: usize = (0..n)
                .map(|i| spec.freq_storage(i, m[i]) * strides[i])
                .sum();
            samples[flat] = Complex64::from_polar(mag, -TAU * phase);
        }
    });
    Ok(out)
}

/// The wave packet φ_P, rescaled so ‖φ_P‖₂ equals the scale-independent
/// target ‖φ‖₂.
pub fn phi_p(tile: &Tile, bump: &BumpSpec, spec: &GridSpec) -> Result<GridFunction> {
    let raw = phi_p_raw(tile, bump, spec)?;
    let target = bump.base_norm(spec.dim());
    let actual = raw.norm_l2();
    if actual == 0.0 {
        return Err(TilekitError::Resolution(format!(
            "packet for tile {tile:?} has no support on the grid"
        )));
    }
    Ok(raw.scale(Complex64::new(target / actual, 0.0)))
}

/// The modulated-multiplier packet `ψ̂^N_P(ξ) = m(ξ − N)·φ̂_P(ξ)`.
///
/// N is a frequency-lattice point (signed indices). Returns the packet and a
/// flag that is set when ξ − N hit the frequency origin somewhere on the
/// support, where the m(0) := 0 convention applied.
pub fn psi_p_n(
    tile: &Tile,
    n_point: &[i64],
    mult: &MultiplierSpec,
    bump: &BumpSpec,
    spec: &GridSpec,
) -> Result<(GridFunction, bool)> {
    let phi = phi_p(tile, bump, spec)?;
    psi_from_phi(&phi, tile, n_point, mult, bump, spec)
}

/// Same as [`psi_p_n`] but reusing an already-built φ_P.
pub fn psi_from_phi(
    phi: &GridFunction,
    tile: &Tile,
    n_point: &[i64],
    mult: &MultiplierSpec,
    bump: &BumpSpec,
    spec: &GridSpec,
) -> Result<(GridFunction, bool)> {
    if n_point.len() != spec.dim() {
        return Err(TilekitError::invalid("modulation point dimension mismatch"));
    }
    let mut out = GridFunction::zero(spec.clone(), Repr::Frequency);
    let (lo, hi) = support_box(spec, bump, tile);
    let mut hit_origin = false;
    let n = spec.dim();
    let mut shifted = vec![0.0f64; n];
    for_each_freq_in_box(spec, &lo, &hi, |m| {
        let flat = phi.freq_flat(m);
        let base = phi.samples[flat];
        if base == Complex64::ZERO {
            return;
        }
        let mut all_zero = true;
        for i in 0..n {
            let d = m[i] - n_point[i];
            shifted[i] = d as f64 * spec.freq_spacing(i);
            if d != 0 {
                all_zero = false;
            }
        }
        if all_zero {
            hit_origin = true;
            return; // m(0) := 0
        }
        let mv = mult.eval(&shifted);
        out.samples[flat] = mv * base;
    });
    Ok((out, hit_origin))
}

/// The tile weight `w^ν_P = T_{c(I_P)} D¹_{2^k} w^ν` with
/// `w^ν(x) = (1 + ρ(x))^{−ν}`, periodized on the torus.
pub fn weight_w(tile: &Tile, nu: f64, spec: &GridSpec) -> GridFunction {
    let mut out = GridFunction::zero(spec.clone(), Repr::Physical);
    let center = tile.space_cube().center(&spec.alpha);
    let strides = spec.strides();
    let n = spec.dim();
    let amp = pow2(-tile.k * spec.alpha.total() as i32);
    let mut arg = vec![0.0f64; n];
    for flat in 0..out.samples.len() {
        let mut rem = flat;
        for i in 0..n {
            let ji = rem / strides[i];
            rem %= strides[i];
            arg[i] = ji as f64 * spec.spacing(i) - center[i];
        }
        let folded = spec.torus_fold(&arg);
        for i in 0..n {
            arg[i] = folded[i] * pow2(-tile.k * spec.alpha.component(i) as i32);
        }
        let rho = aniso_norm(&arg, &spec.alpha);
        out.samples[flat] = Complex64::new(amp * (1.0 + rho).powf(-nu), 0.0);
    }
    out
}

/// Pointwise weight value at physical coordinates x (periodized).
pub fn weight_w_at(tile: &Tile, nu: f64, spec: &GridSpec, x: &[f64]) -> f64 {
    let center = tile.space_cube().center(&spec.alpha);
    let diff: Vec<f64> = x.iter().zip(&center).map(|(a, b)| a - b).collect();
    let folded = spec.torus_fold(&diff);
    let arg: Vec<f64> = folded
        .iter()
        .enumerate()
        .map(|(i, &v)| v * pow2(-tile.k * spec.alpha.component(i) as i32))
        .collect();
    let rho = aniso_norm(&arg, &spec.alpha);
    pow2(-tile.k * spec.alpha.total() as i32) * (1.0 + rho).powf(-nu)
}

/// Symmetry actions on grid functions.
#[derive(Debug, Clone)]
pub enum Symmetry {
    /// T_y f(x) = f(x − y), y on the sample lattice (circular).
    Translate(Vec<f64>),
    /// M_ξ f(x) = e^{2πi x·ξ} f(x), ξ a signed frequency-lattice index.
    Modulate(Vec<i64>),
    /// D^p_λ f(x) = λ^{−|α|/p} f(δ_{λ^{−1}} x) with λ = 2^{log2_lambda}.
    ///
    /// The window dilates with the function: the result lives on the grid
    /// (K + s, k0 + s), which keeps the rescaling exact (and unitary for
    /// p = 2) with the same point count.
    Dilate { log2_lambda: i32, p: u8 },
}

pub fn apply_symmetry(f: &GridFunction, action: &Symmetry) -> Result<GridFunction> {
    let spec = &f.spec;
    match action {
        Symmetry::Translate(y) => {
            if y.len() != spec.dim() {
                return Err(TilekitError::invalid("translation dimension mismatch"));
            }
            let mut shifts = Vec::with_capacity(spec.dim());
            for (i, &yi) in y.iter().enumerate() {
                let cells = yi / spec.spacing(i);
                if (cells - cells.round()).abs() > 1e-9 {
                    return Err(TilekitError::invalid(format!(
                        "translation {yi} is off the sample lattice on axis {i}"
                    )));
                }
                shifts.push(cells.round() as i64);
            }
            match f.repr {
                Repr::Physical => {
                    let dims = spec.dims();
                    let strides = spec.strides();
                    let mut out = GridFunction::zero(spec.clone(), Repr::Physical);
                    for flat in 0..f.samples.len() {
                        let mut rem = flat;
                        let mut src = 0usize;
                        for i in 0..spec.dim() {
                            let ji = (rem / strides[i]) as i64;
                            rem %= strides[i];
                            let si = (ji - shifts[i]).rem_euclid(dims[i] as i64) as usize;
                            src += si * strides[i];
                        }
                        out.samples[flat] = f.samples[src];
                    }
                    Ok(out)
                }
                Repr::Frequency => {
                    // (T_y f)^(ξ) = e^{−2πi y·ξ} f̂(ξ)
                    let mut out = f.clone();
                    let strides = spec.strides();
                    for flat in 0..out.samples.len() {
                        let mut rem = flat;
                        let mut phase = 0.0;
                        for i in 0..spec.dim() {
                            let u = rem / strides[i];
                            rem %= strides[i];
                            let m = spec.freq_signed(i, u);
                            phase += y[i] * m as f64 * spec.freq_spacing(i);
                        }
                        out.samples[flat] *= Complex64::from_polar(1.0, -TAU * phase);
                    }
                    Ok(out)
                }
            }
        }
        Symmetry::Modulate(mi) => {
            if mi.len() != spec.dim() {
                return Err(TilekitError::invalid("modulation dimension mismatch"));
            }
            match f.repr {
                Repr::Physical => {
                    let strides = spec.strides();
                    let mut out = f.clone();
                    for flat in 0..out.samples.len() {
                        let mut rem = flat;
                        let mut phase = 0.0;
                        for i in 0..spec.dim() {
                            let ji = rem / strides[i];
                            rem %= strides[i];
                            phase += ji as f64 * spec.spacing(i) * mi[i] as f64 * spec.freq_spacing(i);
                        }
                        out.samples[flat] *= Complex64::from_polar(1.0, TAU * phase);
                    }
                    Ok(out)
                }
                Repr::Frequency => {
                    // circular shift: (M_ξ f)^(ζ) = f̂(ζ − ξ)
                    let dims = spec.dims();
                    let strides = spec.strides();
                    let mut out = GridFunction::zero(spec.clone(), Repr::Frequency);
                    for flat in 0..f.samples.len() {
                        let mut rem = flat;
                        let mut src = 0usize;
                        for i in 0..spec.dim() {
                            let ui = (rem / strides[i]) as i64;
                            rem %= strides[i];
                            let si = (ui - mi[i]).rem_euclid(dims[i] as i64) as usize;
                            src += si * strides[i];
                        }
                        out.samples[flat] = f.samples[src];
                    }
                    Ok(out)
                }
            }
        }
        Symmetry::Dilate { log2_lambda, p } => {
            if *p != 1 && *p != 2 {
                return Err(TilekitError::invalid("dilation requires p in {1, 2}"));
            }
            let s = *log2_lambda;
            let new_spec = GridSpec::new(spec.alpha.clone(), spec.big_k + s, spec.k0 + s)?;
            let factor = pow2(-s * spec.alpha.total() as i32).powf(1.0 / *p as f64);
            let mut out = f.clone();
            out.spec = new_spec;
            match f.repr {
                // physical samples: out(δ_λ x_j) = λ^{−|α|/p} f(x_j), and the
                // new grid's j-th sample point is exactly δ_λ x_j
                Repr::Physical => {
                    for v in &mut out.samples {
                        *v *= factor;
                    }
                }
                // frequency samples pick up the Jacobian: f̂ values scale by
                // λ^{|α|}·λ^{−|α|/p} and live at δ_{λ^{−1}} ξ, the new lattice
                Repr::Frequency => {
                    let jac = pow2(s * spec.alpha.total() as i32);
                    for v in &mut out.samples {
                        *v *= factor * jac;
                    }
                }
            }
            Ok(out)
        }
    }
}
