//! Seeded random scenario generation.
//!
//! All randomness is ChaCha8 keyed by explicit seeds, so identical configs
//! reproduce identical scenarios byte for byte. The shape of each ingredient:
//!
//! - tiles: scale uniform over the grid's resolvable range, then spatial and
//!   frequency positions uniform over the window / Nyquist box, deduplicated;
//! - f: independent complex-Gaussian frequency coefficients, then (by
//!   default) L²-normalized;
//! - N: piecewise constant on dyadic cell blocks; the value table mixes
//!   semi-tile centers of the scenario's own tiles (so masses and pairings
//!   are nontrivial) with uniform frequency-lattice points, 50/50;
//! - E: a union of random dyadic cubes accepted while the measure stays
//!   within the budget (default 1).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TilekitError};
use crate::geometry::AnisoExponent;
use crate::grid::{GridFunction, GridSpec, Repr};
use crate::multipliers::{MultiplierSpec, ToyMultiplierParams, ToyVariant};
use crate::operators::Scenario;
use crate::tiles::{BitVector, Tile};
use crate::wavepackets::BumpSpec;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Multiplier selection by name and parameters (grid-independent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum MultiplierSelect {
    Constant { value: f64 },
    SmoothRational,
    SmoothPhase,
    Toy { d: u32, delta: f64, j: i32, variant: ToyVariant },
}

impl MultiplierSelect {
    pub fn build(&self, alpha: &AnisoExponent) -> Result<MultiplierSpec> {
        match self {
            MultiplierSelect::Constant { value } => {
                Ok(MultiplierSpec::constant(alpha.clone(), *value))
            }
            MultiplierSelect::SmoothRational => Ok(MultiplierSpec::smooth_builtin(alpha.clone())),
            MultiplierSelect::SmoothPhase => Ok(MultiplierSpec::smooth_phase(alpha.clone())),
            MultiplierSelect::Toy { d, delta, j, variant } => {
                let m = MultiplierSpec::toy(ToyMultiplierParams::new(*d, *delta, *j)?, *variant)?;
                if &m.alpha != alpha {
                    return Err(TilekitError::Validation(format!(
                        "toy multiplier requires alpha = (1, {d})"
                    )));
                }
                Ok(m)
            }
        }
    }
}

/// A self-contained scenario description: explicit tiles plus seeds for the
/// f/E/N ingredients. Round-trips losslessly through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub alpha: Vec<u32>,
    pub big_k: i32,
    pub k0: i32,
    pub r: Vec<u8>,
    pub b0: f64,
    pub b1: f64,
    pub nu1: f64,
    pub nu0: u32,
    pub k_cap: i32,
    pub multiplier: MultiplierSelect,
    /// (k, space index, frequency index) triples
    pub tiles: Vec<(i32, Vec<i64>, Vec<i64>)>,
    pub f_seed: u64,
    pub e_seed: u64,
    pub n_seed: u64,
    pub n_value_count: usize,
    pub e_budget: f64,
    pub normalize_f: bool,
}

/// Generation parameters (the `gen` command's inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub alpha: Vec<u32>,
    pub big_k: i32,
    pub k0: i32,
    pub tile_count: usize,
    pub seed: u64,
    pub r: Vec<u8>,
    pub multiplier: MultiplierSelect,
    /// default |α| + 4/3
    pub nu1: Option<f64>,
    /// default 3|α| + 2
    pub nu0: Option<u32>,
    /// mass-sup truncation above the deepest tile scale; default k_max + 2
    pub k_cap_offset: i32,
    pub b0: f64,
    pub b1: f64,
    pub n_value_count: usize,
    pub e_budget: f64,
    pub normalize_f: bool,
}

impl ScenarioConfig {
    pub fn new(alpha: Vec<u32>, big_k: i32, k0: i32, tile_count: usize, seed: u64) -> Self {
        let n = alpha.len();
        let mut r = vec![0u8; n];
        if n > 0 {
            r[n - 1] = 1;
        }
        ScenarioConfig {
            alpha,
            big_k,
            k0,
            tile_count,
            seed,
            r,
            multiplier: MultiplierSelect::Constant { value: 1.0 },
            nu1: None,
            nu0: None,
            k_cap_offset: 2,
            b0: 0.1,
            b1: 0.09,
            n_value_count: 8,
            e_budget: 1.0,
            normalize_f: true,
        }
    }
}

fn sub_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt)
}

/// Draw `count` distinct tiles with uniform scale and position.
pub fn gen_tiles(
    rng: &mut ChaCha8Rng,
    grid: &GridSpec,
    bump: &BumpSpec,
    count: usize,
) -> Result<Vec<Tile>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let (k_lo, k_hi) = grid.resolvable_scales(bump.b0)?;
    let n = grid.dim();
    let mut tiles: Vec<Tile> = Vec::with_capacity(count);
    let max_attempts = 200 * count + 1000;
    for _ in 0..max_attempts {
        if tiles.len() == count {
            break;
        }
        let k = rng.gen_range(k_lo..=k_hi);
        let mut space = Vec::with_capacity(n);
        let mut freq = Vec::with_capacity(n);
        for i in 0..n {
            let a = grid.alpha.component(i) as i32;
            let s_cells = 1i64 << ((grid.big_k - k) * a);
            space.push(rng.gen_range(0..s_cells));
            let f_half = 1i64 << ((k - grid.k0) * a - 1);
            freq.push(rng.gen_range(-f_half..f_half));
        }
        let t = Tile { k, space, freq };
        if !tiles.contains(&t) {
            tiles.push(t);
        }
    }
    if tiles.len() < count {
        return Err(TilekitError::Validation(format!(
            "could not draw {count} distinct tiles on this grid (got {})",
            tiles.len()
        )));
    }
    tiles.sort();
    Ok(tiles)
}

/// Complex-Gaussian frequency coefficients, optionally L²-normalized.
pub fn gen_f(rng: &mut ChaCha8Rng, grid: &GridSpec, normalize: bool) -> GridFunction {
    // Box-Muller from uniform draws
    let mut gauss = || {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u.ln()).sqrt() * v.cos()
    };
    let samples: Vec<Complex64> = (0..grid.total_points())
        .map(|_| Complex64::new(gauss(), gauss()))
        .collect();
    let mut f = GridFunction::from_samples(grid.clone(), Repr::Frequency, samples)
        .expect("matching sample count");
    if normalize {
        let norm = f.norm_l2();
        if norm > 0.0 {
            f = f.scale(Complex64::new(1.0 / norm, 0.0));
        }
    }
    f
}

/// N values (semi-tile centers of scenario tiles mixed with uniform lattice
/// points) and a per-cell map, piecewise constant on dyadic blocks.
pub fn gen_n(
    rng: &mut ChaCha8Rng,
    grid: &GridSpec,
    tiles: &[Tile],
    r: &BitVector,
    count: usize,
) -> (Vec<Vec<i64>>, Vec<u32>) {
    let n = grid.dim();
    let mut values: Vec<Vec<i64>> = Vec::new();
    let count = count.max(1);
    let mut attempts = 0;
    while values.len() < count && attempts < 50 * count {
        attempts += 1;
        let v: Vec<i64> = if !tiles.is_empty() && rng.gen_bool(0.5) {
            let t = &tiles[rng.gen_range(0..tiles.len())];
            (0..n)
                .map(|i| {
                    let a = grid.alpha.component(i) as i32;
                    let sh = (grid.big_k - t.k) * a - 2;
                    (4 * t.freq[i] + 2 * r.bit(i) as i64 + 1) << sh
                })
                .collect()
        } else {
            (0..n)
                .map(|i| {
                    let (lo, hi) = grid.freq_range(i);
                    rng.gen_range(lo..hi)
                })
                .collect()
        };
        if !values.contains(&v) {
            values.push(v);
        }
    }
    // piecewise-constant assignment on dyadic blocks of roughly half the
    // window depth
    let b = (((grid.big_k - grid.k0) as u32) / 2).max(1);
    let dims = grid.dims();
    let block_len: Vec<usize> = (0..n)
        .map(|i| (1usize << (b * grid.alpha.component(i))).min(dims[i]))
        .collect();
    let blocks: Vec<usize> = (0..n).map(|i| dims[i] / block_len[i]).collect();
    let total_blocks: usize = blocks.iter().product();
    let assignment: Vec<u32> = (0..total_blocks)
        .map(|_| rng.gen_range(0..values.len() as u32))
        .collect();
    let mut map = vec![0u32; grid.total_points()];
    for (flat, slot) in map.iter_mut().enumerate() {
        let idx = grid.unflatten(flat);
        let mut block_flat = 0usize;
        let mut mul = 1usize;
        for i in (0..n).rev() {
            block_flat += (idx[i] / block_len[i]) * mul;
            mul *= blocks[i];
        }
        *slot = assignment[block_flat];
    }
    (values, map)
}

/// A union of random dyadic cubes with measure at most `budget`.
pub fn gen_e(rng: &mut ChaCha8Rng, grid: &GridSpec, budget: f64) -> Vec<bool> {
    let n = grid.dim();
    let mut mask = vec![false; grid.total_points()];
    if budget <= 0.0 {
        return mask;
    }
    let cellvol = grid.cell_volume();
    let total_alpha = grid.alpha.total() as i32;
    // largest scale whose cube volume fits the budget
    let k_max_cube = ((budget.log2() / total_alpha as f64).floor() as i32).min(grid.big_k - 1);
    let k_min_cube = grid.k0;
    if k_max_cube < k_min_cube {
        return mask;
    }
    let mut count = 0usize;
    let strides = grid.strides();
    let dims = grid.dims();
    for _ in 0..200 {
        let measure = count as f64 * cellvol;
        if measure >= 0.98 * budget {
            break;
        }
        let k = rng.gen_range(k_min_cube..=k_max_cube);
        // cube position within the window
        let mut base = Vec::with_capacity(n);
        let mut side = Vec::with_capacity(n);
        for i in 0..n {
            let a = grid.alpha.component(i);
            let cells = 1usize << ((k - grid.k0) as u32 * a);
            let positions = dims[i] / cells;
            base.push(rng.gen_range(0..positions) * cells);
            side.push(cells);
        }
        // count the new cells before committing
        let mut added = 0usize;
        let mut idx = vec![0usize; n];
        loop {
            let mut flat = 0;
            for i in 0..n {
                flat += (base[i] + idx[i]) * strides[i];
            }
            if !mask[flat] {
                added += 1;
            }
            let mut axis = 0;
            loop {
                if axis == n {
                    break;
                }
                idx[axis] += 1;
                if idx[axis] < side[axis] {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
            if idx.iter().all(|&v| v == 0) {
                break;
            }
        }
        if (count + added) as f64 * cellvol > budget {
            continue;
        }
        // commit
        let mut idx = vec![0usize; n];
        loop {
            let mut flat = 0;
            for i in 0..n {
                flat += (base[i] + idx[i]) * strides[i];
            }
            mask[flat] = true;
            let mut axis = 0;
            loop {
                if axis == n {
                    break;
                }
                idx[axis] += 1;
                if idx[axis] < side[axis] {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
            if idx.iter().all(|&v| v == 0) {
                break;
            }
        }
        count += added;
    }
    mask
}

/// Expand a generation config into a self-contained scenario file.
pub fn generate_file(cfg: &ScenarioConfig) -> Result<ScenarioFile> {
    let alpha = AnisoExponent::new(cfg.alpha.clone())?;
    let grid = GridSpec::new(alpha.clone(), cfg.big_k, cfg.k0)?;
    let bump = BumpSpec::new(cfg.b0, cfg.b1)?;
    let r = BitVector::new(cfg.r.clone())?;
    if r.is_zero() || r.len() != alpha.dim() {
        return Err(TilekitError::Validation("need r != 0 of matching dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, 1));
    let tiles = gen_tiles(&mut rng, &grid, &bump, cfg.tile_count)?;
    let k_max = tiles.iter().map(|t| t.k).max().unwrap_or(grid.k0 + 1);
    let k_cap = (k_max + cfg.k_cap_offset).min(grid.big_k);
    let total = alpha.total() as f64;
    Ok(ScenarioFile {
        schema_version: SCENARIO_SCHEMA_VERSION,
        alpha: cfg.alpha.clone(),
        big_k: cfg.big_k,
        k0: cfg.k0,
        r: cfg.r.clone(),
        b0: cfg.b0,
        b1: cfg.b1,
        nu1: cfg.nu1.unwrap_or(total + 4.0 / 3.0),
        nu0: cfg.nu0.unwrap_or(3 * alpha.total() + 2),
        k_cap,
        multiplier: cfg.multiplier.clone(),
        tiles: tiles.into_iter().map(|t| (t.k, t.space, t.freq)).collect(),
        f_seed: sub_seed(cfg.seed, 2),
        e_seed: sub_seed(cfg.seed, 3),
        n_seed: sub_seed(cfg.seed, 4),
        n_value_count: cfg.n_value_count,
        e_budget: cfg.e_budget,
        normalize_f: cfg.normalize_f,
    })
}

impl ScenarioFile {
    /// Materialize the scenario: regenerate f, E, N from the stored seeds.
    pub fn build(&self) -> Result<Scenario> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(TilekitError::Validation(format!(
                "unsupported scenario schema version {}",
                self.schema_version
            )));
        }
        let alpha = AnisoExponent::new(self.alpha.clone())?;
        let grid = GridSpec::new(alpha.clone(), self.big_k, self.k0)?;
        let bump = BumpSpec::new(self.b0, self.b1)?;
        let r = BitVector::new(self.r.clone())?;
        let multiplier = self.multiplier.build(&alpha)?;
        let tiles: Vec<Tile> = self
            .tiles
            .iter()
            .map(|(k, s, f)| Tile::new(*k, s.clone(), f.clone(), &alpha))
            .collect::<Result<_>>()?;
        let f = gen_f(
            &mut ChaCha8Rng::seed_from_u64(self.f_seed),
            &grid,
            self.normalize_f,
        );
        let e_mask = gen_e(&mut ChaCha8Rng::seed_from_u64(self.e_seed), &grid, self.e_budget);
        let (n_values, n_map) = gen_n(
            &mut ChaCha8Rng::seed_from_u64(self.n_seed),
            &grid,
            &tiles,
            &r,
            self.n_value_count,
        );
        Scenario::new(
            grid, bump, tiles, r, multiplier, f, e_mask, n_map, n_values, self.nu1, self.nu0,
            self.k_cap,
        )
    }
}

/// One-call generation for suites: config → scenario.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    generate_file(cfg)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(seed: u64, tiles: usize) -> ScenarioConfig {
        ScenarioConfig::new(vec![1, 2], 1, -5, tiles, seed)
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = base_config(7, 20);
        let f1 = generate_file(&cfg).unwrap();
        let f2 = generate_file(&cfg).unwrap();
        assert_eq!(f1, f2);
        let s1 = f1.build().unwrap();
        let s2 = f2.build().unwrap();
        assert_eq!(s1.e_mask, s2.e_mask);
        assert_eq!(s1.n_map, s2.n_map);
        assert_eq!(s1.f_hat.samples, s2.f_hat.samples);
    }

    #[test]
    fn scenario_file_round_trips() {
        let cfg = base_config(9, 15);
        let file = generate_file(&cfg).unwrap();
        let json = crate::report::to_json_17(&file).unwrap();
        let back: ScenarioFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file, back);
    }

    #[test]
    fn generated_scenario_validates() {
        let cfg = base_config(11, 30);
        let s = generate_scenario(&cfg).unwrap();
        assert_eq!(s.tiles.len(), 30);
        assert!((s.f_norm() - 1.0).abs() < 1e-12);
        assert!(s.e_measure() <= 1.0 + 1e-12);
        assert!(!s.n_values.is_empty());
    }

    #[test]
    fn empty_tile_count_is_valid() {
        let cfg = base_config(3, 0);
        let s = generate_scenario(&cfg).unwrap();
        assert!(s.tiles.is_empty());
    }

    #[test]
    fn zero_budget_empty_e() {
        let mut cfg = base_config(5, 5);
        cfg.e_budget = 0.0;
        let s = generate_scenario(&cfg).unwrap();
        assert_eq!(s.e_measure(), 0.0);
    }
}
