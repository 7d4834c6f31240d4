//! The model sum operator, its linearization and maximal form, restricted
//! sets, weak-L² norms, and the anisotropic maximal function.
//!
//! A [`Scenario`] bundles a grid, a tile family, the selection bits r, a
//! multiplier, the input f, the measurable set E, and the linearizing map N.
//! N is piecewise constant with finitely many values, stored as a per-cell
//! index into a distinct-value table; all modulation-dependent quantities are
//! grouped by distinct value. Derived data that every downstream algorithm
//! reuses (packet coefficients ⟨f,φ_P⟩, per-tile pairings with E, masked
//! cell lists) is computed once on demand and cached; a Scenario is
//! otherwise immutable.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Result, TilekitError};
use crate::geometry::{AnisoCube, Rect};
use crate::grid::{GridFunction, GridSpec, Repr};
use crate::multipliers::MultiplierSpec;
use crate::tiles::{BitVector, Tile};
use crate::wavepackets::{phi_p, psi_from_phi, validate_tile_on_grid, BumpSpec};

/// Experiment configuration: everything the model operator depends on.
#[derive(Debug)]
pub struct Scenario {
    pub grid: GridSpec,
    pub bump: BumpSpec,
    pub tiles: Vec<Tile>,
    pub r: BitVector,
    pub multiplier: MultiplierSpec,
    /// input function, kept in frequency representation
    pub f_hat: GridFunction,
    /// E as a boolean mask over grid cells
    pub e_mask: Vec<bool>,
    /// N(x): per-cell index into `n_values`
    pub n_map: Vec<u32>,
    /// distinct frequency lattice points in the range of N
    pub n_values: Vec<Vec<i64>>,
    /// mass weight exponent ν₁ (> |α|+1)
    pub nu1: f64,
    /// multiplier smoothness order ν₀ used in bound denominators
    pub nu0: u32,
    pub k_min: i32,
    pub k_max: i32,
    /// truncation scale for the mass sup over larger tiles
    pub k_cap: i32,

    coeffs: OnceLock<Vec<Complex64>>,
    pairings: OnceLock<Vec<Complex64>>,
    masked_cells: OnceLock<Vec<Vec<u32>>>,
    m_norm_nu0: OnceLock<f64>,
    /// per-tile mass memo (tile mass never depends on the surrounding
    /// collection, so decomposition rounds can share it)
    pub(crate) mass_cache: Mutex<HashMap<Tile, crate::mass_energy::MassResult>>,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: GridSpec,
        bump: BumpSpec,
        tiles: Vec<Tile>,
        r: BitVector,
        multiplier: MultiplierSpec,
        f: GridFunction,
        e_mask: Vec<bool>,
        n_map: Vec<u32>,
        n_values: Vec<Vec<i64>>,
        nu1: f64,
        nu0: u32,
        k_cap: i32,
    ) -> Result<Self> {
        if r.is_zero() || r.len() != grid.dim() {
            return Err(TilekitError::Validation("need r != 0 of grid dimension".into()));
        }
        if multiplier.alpha != grid.alpha {
            return Err(TilekitError::Validation("multiplier alpha differs from grid".into()));
        }
        let (lo, hi) = grid.resolvable_scales(bump.b0)?;
        let mut k_min = hi;
        let mut k_max = lo;
        for t in &tiles {
            validate_tile_on_grid(&grid, &bump, t)?;
            k_min = k_min.min(t.k);
            k_max = k_max.max(t.k);
        }
        if tiles.is_empty() {
            k_min = lo;
            k_max = lo;
        }
        if k_cap < k_max || k_cap > grid.big_k {
            return Err(TilekitError::Validation(format!(
                "k_cap must lie in [{k_max}, {}], got {k_cap}",
                grid.big_k
            )));
        }
        if k_cap - k_min > 6 {
            return Err(TilekitError::Validation(
                "k_cap − k_min > 6 would make the mass enumeration explode".into(),
            ));
        }
        let nu_floor = grid.alpha.total() as f64 + 1.0;
        if nu1 <= nu_floor {
            return Err(TilekitError::Validation(format!(
                "nu1 must exceed |alpha|+1 = {nu_floor}, got {nu1}"
            )));
        }
        if e_mask.len() != grid.total_points() || n_map.len() != grid.total_points() {
            return Err(TilekitError::Validation("mask/map size mismatch".into()));
        }
        for v in &n_values {
            if !grid.freq_in_range(v) {
                return Err(TilekitError::Validation(format!(
                    "N value {v:?} outside the frequency window"
                )));
            }
        }
        if let Some(&bad) = n_map.iter().find(|&&i| i as usize >= n_values.len()) {
            return Err(TilekitError::Validation(format!("N index {bad} out of table")));
        }
        let f_hat = f.to_frequency();
        Ok(Scenario {
            grid,
            bump,
            tiles,
            r,
            multiplier,
            f_hat,
            e_mask,
            n_map,
            n_values,
            nu1,
            nu0,
            k_min,
            k_max,
            k_cap,
            coeffs: OnceLock::new(),
            pairings: OnceLock::new(),
            masked_cells: OnceLock::new(),
            m_norm_nu0: OnceLock::new(),
            mass_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// |E| = cell count × cell volume.
    pub fn e_measure(&self) -> f64 {
        self.e_mask.iter().filter(|&&b| b).count() as f64 * self.grid.cell_volume()
    }

    pub fn f_norm(&self) -> f64 {
        self.f_hat.norm_l2()
    }

    /// ‖m‖_{𝓜^{ν₀}} via exact jets on a 32-per-face sphere sample (cached).
    pub fn multiplier_norm_nu0(&self) -> f64 {
        *self.m_norm_nu0.get_or_init(|| {
            crate::multipliers::multiplier_norm_exact(&self.multiplier, self.nu0, 32)
                .unwrap_or(0.0)
        })
    }

    /// ⟨f, φ_P⟩ for every tile (cached).
    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| {
            self.tiles
                .iter()
                .map(|t| {
                    let phi = phi_p(t, &self.bump, &self.grid).expect("validated tile");
                    self.f_hat.inner(&phi).expect("matching grids")
                })
                .collect()
        })
    }

    /// Cells of E grouped by distinct N value (cached).
    pub fn masked_cells(&self) -> &[Vec<u32>] {
        self.masked_cells.get_or_init(|| {
            let mut out = vec![Vec::new(); self.n_values.len()];
            for (cell, (&e, &nv)) in self.e_mask.iter().zip(&self.n_map).enumerate() {
                if e {
                    out[nv as usize].push(cell as u32);
                }
            }
            out
        })
    }

    /// ⟨1_{E_{P(r)}}, ψ^{N(·)}_P⟩ for every tile (cached).
    ///
    /// Grouped by distinct N value: the indicator of E ∩ {N = ν} is
    /// transformed once per ν and paired against ψ̂^ν_P over the packet's
    /// frequency support (Plancherel), instead of re-synthesizing ψ per grid
    /// point.
    pub fn pairings(&self) -> &[Complex64] {
        self.pairings.get_or_init(|| {
            let mut out = vec![Complex64::ZERO; self.tiles.len()];
            let masked = self.masked_cells();
            for (vi, value) in self.n_values.iter().enumerate() {
                let cells = &masked[vi];
                if cells.is_empty() {
                    continue;
                }
                let active: Vec<usize> = (0..self.tiles.len())
                    .filter(|&ti| {
                        semitile_contains_freq_point(&self.tiles[ti], &self.r, value, &self.grid)
                    })
                    .collect();
                if active.is_empty() {
                    continue;
                }
                let mut mask = GridFunction::zero(self.grid.clone(), Repr::Physical);
                for &c in cells {
                    mask.samples[c as usize] = Complex64::new(1.0, 0.0);
                }
                let mask_hat = mask.to_frequency();
                for ti in active {
                    let tile = &self.tiles[ti];
                    let phi = phi_p(tile, &self.bump, &self.grid).expect("validated tile");
                    let (psi, _) =
                        psi_from_phi(&phi, tile, value, &self.multiplier, &self.bump, &self.grid)
                            .expect("validated modulation");
                    out[ti] += mask_hat.inner(&psi).expect("matching grids");
                }
            }
            out
        })
    }
}

/// Exact membership of a frequency lattice point in the semi-tile ω_{P(r)}.
pub fn semitile_contains_freq_point(
    tile: &Tile,
    r: &BitVector,
    m: &[i64],
    grid: &GridSpec,
) -> bool {
    for i in 0..grid.dim() {
        let a = grid.alpha.component(i) as i32;
        let sh = (grid.big_k - tile.k) * a - 1;
        debug_assert!(sh >= 0, "tile finer than the frequency lattice");
        let lo = (2 * tile.freq[i] + r.bit(i) as i64) << sh;
        let hi = (2 * tile.freq[i] + r.bit(i) as i64 + 1) << sh;
        if m[i] < lo || m[i] >= hi {
            return false;
        }
    }
    true
}

/// Membership of a frequency lattice point in a frequency dyadic cube.
pub fn cube_contains_freq_point(cube: &AnisoCube, m: &[i64], grid: &GridSpec) -> bool {
    for i in 0..grid.dim() {
        let a = grid.alpha.component(i) as i32;
        let sh = (grid.big_k + cube.k) * a;
        debug_assert!(sh >= 0);
        let lo = cube.idx[i] << sh;
        let hi = (cube.idx[i] + 1) << sh;
        if m[i] < lo || m[i] >= hi {
            return false;
        }
    }
    true
}

/// A frequency region for restricted sets.
#[derive(Debug, Clone)]
pub enum FreqRegion {
    Cube(AnisoCube),
    Semitile(Tile, BitVector),
    Rect(Rect),
}

impl FreqRegion {
    fn contains(&self, m: &[i64], grid: &GridSpec) -> bool {
        match self {
            FreqRegion::Cube(c) => cube_contains_freq_point(c, m, grid),
            FreqRegion::Semitile(t, r) => semitile_contains_freq_point(t, r, m, grid),
            FreqRegion::Rect(rect) => rect.contains_point(&grid.freq_coords(m)),
        }
    }
}

/// E ∩ N^{−1}(ω): mask of grid cells with E true and N(x) ∈ ω.
pub fn restricted_set(s: &Scenario, omega: &FreqRegion) -> Vec<bool> {
    let value_in: Vec<bool> = s
        .n_values
        .iter()
        .map(|v| omega.contains(v, &s.grid))
        .collect();
    s.e_mask
        .iter()
        .zip(&s.n_map)
        .map(|(&e, &nv)| e && value_in[nv as usize])
        .collect()
}

/// The frequency-side accumulation of the model sum at a fixed modulation
/// point: Σ_P ⟨f,φ_P⟩·ψ̂^N_P·1_{ω_{P(r)}}(N).
fn model_sum_hat(s: &Scenario, n_const: &[i64]) -> GridFunction {
    let coeffs = s.coeffs();
    let mut acc = GridFunction::zero(s.grid.clone(), Repr::Frequency);
    for (ti, tile) in s.tiles.iter().enumerate() {
        if !semitile_contains_freq_point(tile, &s.r, n_const, &s.grid) {
            continue;
        }
        if coeffs[ti] == Complex64::ZERO {
            continue;
        }
        let phi = phi_p(tile, &s.bump, &s.grid).expect("validated tile");
        let (psi, _) = psi_from_phi(&phi, tile, n_const, &s.multiplier, &s.bump, &s.grid)
            .expect("validated modulation");
        for (a, b) in acc.samples.iter_mut().zip(&psi.samples) {
            *a += coeffs[ti] * b;
        }
    }
    acc
}

/// The model sum at a constant modulation point, in physical representation.
pub fn model_sum(s: &Scenario, n_const: &[i64]) -> Result<GridFunction> {
    if n_const.len() != s.dim() {
        return Err(TilekitError::invalid("modulation point dimension mismatch"));
    }
    Ok(model_sum_hat(s, n_const).to_physical())
}

/// The linearized operator Tf(x) = A_{N(x)} f(x), grouped by the distinct
/// values of N rather than re-summing per point.
pub fn linearized_apply(s: &Scenario) -> GridFunction {
    let mut out = GridFunction::zero(s.grid.clone(), Repr::Physical);
    for (vi, value) in s.n_values.iter().enumerate() {
        let any = s.n_map.iter().any(|&nv| nv as usize == vi);
        if !any {
            continue;
        }
        let part = model_sum_hat(s, value).to_physical();
        for (cell, &nv) in s.n_map.iter().enumerate() {
            if nv as usize == vi {
                out.samples[cell] = part.samples[cell];
            }
        }
    }
    out
}

/// sup over the candidate modulation points of |A_N f|, pointwise.
///
/// Parallel over candidates; the pointwise max is order-insensitive, so the
/// result does not depend on the thread count.
pub fn carleson_sup(s: &Scenario, candidates: &[Vec<i64>]) -> Result<GridFunction> {
    use rayon::prelude::*;
    if candidates.is_empty() {
        return Err(TilekitError::invalid("carleson_sup needs at least one candidate"));
    }
    s.coeffs(); // fill the cache before fanning out
    let zero = || vec![0.0f64; s.grid.total_points()];
    let maxed = candidates
        .par_iter()
        .fold(zero, |mut acc, cand| {
            let part = model_sum_hat(s, cand).to_physical();
            for (o, p) in acc.iter_mut().zip(&part.samples) {
                let mag = p.norm();
                if mag > *o {
                    *o = mag;
                }
            }
            acc
        })
        .reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                if *y > *x {
                    *x = *y;
                }
            }
            a
        });
    let mut out = GridFunction::zero(s.grid.clone(), Repr::Physical);
    for (o, v) in out.samples.iter_mut().zip(&maxed) {
        *o = Complex64::new(*v, 0.0);
    }
    Ok(out)
}

/// Default modulation candidates: the centers of all semi-tiles ω_{P(r)} of
/// the scenario tiles, plus a coarse uniform lattice over the frequency
/// window (`coarse` points per axis).
pub fn default_candidates(s: &Scenario, coarse: usize) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = Vec::new();
    for tile in &s.tiles {
        let c: Vec<i64> = (0..s.dim())
            .map(|i| {
                let a = s.grid.alpha.component(i) as i32;
                let sh = (s.grid.big_k - tile.k) * a - 2;
                // center of ω_{P(r)}: (4ℓ + 2r + 1)·2^{(K−k)α−2}
                (4 * tile.freq[i] + 2 * s.r.bit(i) as i64 + 1) << sh
            })
            .collect();
        out.push(c);
    }
    if coarse > 0 {
        for axis_step in 0..coarse.pow(s.dim() as u32) {
            let mut rem = axis_step;
            let mut pt = Vec::with_capacity(s.dim());
            for i in 0..s.dim() {
                let t = rem % coarse;
                rem /= coarse;
                let (lo, hi) = s.grid.freq_range(i);
                let step = ((hi - lo) as usize / coarse).max(1) as i64;
                pt.push(lo + step / 2 + t as i64 * step);
            }
            out.push(pt);
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Σ_P |⟨f,φ_P⟩|·|⟨1_{E_{P(r)}}, ψ^{N(·)}_P⟩| over all scenario tiles.
pub fn dual_pairing(s: &Scenario) -> f64 {
    let coeffs = s.coeffs();
    let pairings = s.pairings();
    coeffs
        .iter()
        .zip(pairings)
        .map(|(c, p)| c.norm() * p.norm())
        .sum()
}

/// The same sum restricted to a subset of tile indices.
pub fn dual_pairing_subset(s: &Scenario, tile_indices: &[usize]) -> f64 {
    let coeffs = s.coeffs();
    let pairings = s.pairings();
    tile_indices
        .iter()
        .map(|&ti| coeffs[ti].norm() * pairings[ti].norm())
        .sum()
}

/// ‖g‖_{2,∞} = sup_λ λ·|{|g| ≥ λ}|^{1/2} with λ running over the distinct
/// sample magnitudes (the sup is attained at one of them).
pub fn weak_l2_norm(g: &GridFunction) -> f64 {
    let cell = g.measure();
    let mut mags: Vec<f64> = g.samples.iter().map(|v| v.norm()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("no NaN magnitudes"));
    let mut best = 0.0f64;
    let mut i = 0;
    while i < mags.len() {
        let lam = mags[i];
        if lam == 0.0 {
            break;
        }
        let mut j = i;
        while j + 1 < mags.len() && mags[j + 1] == lam {
            j += 1;
        }
        // #{|g| ≥ lam} = j+1
        best = best.max(lam * ((j + 1) as f64 * cell).sqrt());
        i = j + 1;
    }
    best
}

/// The anisotropic maximal function, approximated by dyadic cubes at every
/// scale in [k0, K] with per-axis shifts of {0, 1/3, 2/3} of the side
/// (periodic wrap). Dominates the unshifted dyadic maximal function.
pub fn aniso_maximal(g: &GridFunction) -> GridFunction {
    let phys = g.to_physical();
    let spec = &phys.spec;
    let dims = spec.dims();
    let strides = spec.strides();
    let n = spec.dim();
    let mags: Vec<f64> = phys.samples.iter().map(|v| v.norm()).collect();
    let mut out = vec![0.0f64; mags.len()];

    for k in spec.k0..=spec.big_k {
        // box side in cells per axis
        let blen: Vec<usize> = (0..n)
            .map(|i| 1usize << ((k - spec.k0) as u32 * spec.alpha.component(i)))
            .collect();
        let boxes: Vec<usize> = (0..n).map(|i| dims[i] / blen[i]).collect();
        let shift_combos = 3usize.pow(n as u32);
        for combo in 0..shift_combos {
            let mut rem = combo;
            let offset: Vec<usize> = (0..n)
                .map(|i| {
                    let s = rem % 3;
                    rem /= 3;
                    blen[i] * s / 3
                })
                .collect();
            // iterate boxes with an odometer
            let mut bidx = vec![0usize; n];
            loop {
                // sum over the box
                let mut sum = 0.0;
                let mut cidx = vec![0usize; n];
                let mut members: Vec<usize> = Vec::with_capacity(blen.iter().product());
                loop {
                    let mut flat = 0;
                    for i in 0..n {
                        let j = (offset[i] + bidx[i] * blen[i] + cidx[i]) % dims[i];
                        flat += j * strides[i];
                    }
                    sum += mags[flat];
                    members.push(flat);
                    let mut axis = 0;
                    loop {
                        if axis == n {
                            break;
                        }
                        cidx[axis] += 1;
                        if cidx[axis] < blen[axis] {
                            break;
                        }
                        cidx[axis] = 0;
                        axis += 1;
                    }
                    if cidx.iter().all(|&c| c == 0) {
                        break;
                    }
                }
                let avg = sum / members.len() as f64;
                for &m in &members {
                    if avg > out[m] {
                        out[m] = avg;
                    }
                }
                let mut axis = 0;
                loop {
                    if axis == n {
                        break;
                    }
                    bidx[axis] += 1;
                    if bidx[axis] < boxes[axis] {
                        break;
                    }
                    bidx[axis] = 0;
                    axis += 1;
                }
                if bidx.iter().all(|&b| b == 0) {
                    break;
                }
            }
        }
    }
    GridFunction {
        spec: spec.clone(),
        repr: Repr::Physical,
        samples: out.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    }
}

/// Average of |g| over the periodic ρ-ball {y : ρ_per(x − y) ≤ radius}
/// centered at the cell with flat index `center`.
pub fn ball_average(g: &GridFunction, center: usize, radius: f64) -> f64 {
    let spec = &g.spec;
    let n = spec.dim();
    let strides = spec.strides();
    let cj = spec.unflatten(center);
    // bounding box of the ball in cells per axis: |Δ_i| ≤ radius^{α_i}
    let half: Vec<i64> = (0..n)
        .map(|i| {
            (radius.powi(spec.alpha.component(i) as i32) / spec.spacing(i)).floor() as i64
        })
        .collect();
    let dims = spec.dims();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut d = half.iter().map(|&h| -h).collect::<Vec<i64>>();
    loop {
        let delta: Vec<f64> = (0..n).map(|i| d[i] as f64 * spec.spacing(i)).collect();
        if crate::geometry::aniso_norm(&delta, &spec.alpha) <= radius {
            let mut flat = 0usize;
            for i in 0..n {
                let j = (cj[i] as i64 + d[i]).rem_euclid(dims[i] as i64) as usize;
                flat += j * strides[i];
            }
            sum += g.samples[flat].norm();
            count += 1;
        }
        let mut axis = 0;
        loop {
            if axis == n {
                return if count == 0 { 0.0 } else { sum / count as f64 };
            }
            d[axis] += 1;
            if d[axis] <= half[axis] {
                break;
            }
            d[axis] = -half[axis];
            axis += 1;
        }
    }
}
