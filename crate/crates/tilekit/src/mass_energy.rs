//! The mass and energy functionals over tile collections.
//!
//! Mass of a tile: `sup_{P' ≥ P} ∫_{E_{P'}} w^{ν₁}_{P'}`, with the sup over
//! larger tiles truncated at the scenario's `k_cap`. For each scale the
//! spatial cube of P' is the unique ancestor of I_P and the frequency cubes
//! range over the sub-cubes of ω_P, so the admissible P' at one scale
//! partition the N-values inside ω_P; the integral is accumulated per
//! distinct N value and grouped by the containing candidate.
//!
//! Energy of a collection: the sup of Δ over canonical maximal 2-trees,
//! which is exact because Δ grows when tiles with nonnegative contributions
//! join a tree with a fixed top.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TilekitError};
use crate::operators::Scenario;
use crate::tiles::{tile_leq, Tile};
use crate::wavepackets::weight_w_at;

/// Outcome of the truncated mass sup for one tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassResult {
    pub value: f64,
    /// the tile P' ≥ P attaining the truncated sup
    pub witness: Tile,
    /// truncation scale used for the sup
    pub k_cap: i32,
    /// largest candidate integral at the truncation scale (decay monitor)
    pub last_scale_max: f64,
}

/// Mass of a collection with the attaining tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionMass {
    pub value: f64,
    /// index (into the queried slice) of the tile attaining the sup
    pub argmax: Option<usize>,
    pub witness: Option<MassResult>,
}

/// The truncated mass of a single tile, memoized on the scenario.
pub fn mass_single(s: &Scenario, tile: &Tile) -> Result<MassResult> {
    if s.k_cap < tile.k {
        return Err(TilekitError::invalid(format!(
            "mass truncation scale {} below tile scale {}",
            s.k_cap, tile.k
        )));
    }
    if let Some(hit) = s.mass_cache.lock().expect("mass cache").get(tile) {
        return Ok(hit.clone());
    }

    let grid = &s.grid;
    let n = grid.dim();
    let cellvol = grid.cell_volume();
    let masked = s.masked_cells();

    // distinct N values inside ω_P, with their masked-cell weight sums
    let in_omega: Vec<usize> = (0..s.n_values.len())
        .filter(|&vi| {
            crate::operators::cube_contains_freq_point(&tile.freq_cube(), &s.n_values[vi], grid)
        })
        .collect();

    let mut best = 0.0f64;
    let mut witness = tile.clone();
    let mut last_scale_max = 0.0f64;

    for k_prime in tile.k..=s.k_cap {
        // spatial ancestor of I_P at scale k'
        let space: Vec<i64> = (0..n)
            .map(|i| {
                let sh = ((k_prime - tile.k) as u32) * grid.alpha.component(i);
                tile.space[i].div_euclid(1 << sh)
            })
            .collect();
        let center: Vec<f64> = {
            let cube = crate::geometry::AnisoCube { k: k_prime, idx: space.clone() };
            cube.center(&grid.alpha)
        };
        // accumulate Σ w_{P'} per candidate frequency cube; a BTreeMap keeps
        // deterministic tie-breaking (smaller freq index wins)
        let mut per_candidate: std::collections::BTreeMap<Vec<i64>, f64> =
            std::collections::BTreeMap::new();
        let probe = Tile { k: k_prime, space: space.clone(), freq: vec![0; n] };
        for &vi in &in_omega {
            let cells = &masked[vi];
            if cells.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            let mut x = vec![0.0f64; n];
            for &cell in cells {
                let j = grid.unflatten(cell as usize);
                for i in 0..n {
                    x[i] = j[i] as f64 * grid.spacing(i);
                }
                sum += weight_w_at(&probe, s.nu1, grid, &x);
            }
            // the frequency cube of scale −k' containing this N value
            let freq_idx: Vec<i64> = (0..n)
                .map(|i| {
                    let sh = ((grid.big_k - k_prime) as u32) * grid.alpha.component(i);
                    s.n_values[vi][i].div_euclid(1 << sh)
                })
                .collect();
            *per_candidate.entry(freq_idx).or_insert(0.0) += sum;
        }
        let _ = &center;
        let mut scale_max = 0.0f64;
        for (freq_idx, raw) in per_candidate {
            let integral = raw * cellvol;
            scale_max = scale_max.max(integral);
            if integral > best {
                best = integral;
                witness = Tile { k: k_prime, space: space.clone(), freq: freq_idx };
            }
        }
        if k_prime == s.k_cap {
            last_scale_max = scale_max;
        }
    }

    let result = MassResult { value: best, witness, k_cap: s.k_cap, last_scale_max };
    s.mass_cache
        .lock()
        .expect("mass cache")
        .insert(tile.clone(), result.clone());
    Ok(result)
}

/// sup of the tile masses over a collection (given by indices into the
/// scenario's tile list). Tie-break: the lexicographically smallest tile.
pub fn mass_collection(s: &Scenario, indices: &[usize]) -> Result<CollectionMass> {
    let mut order: Vec<usize> = indices.to_vec();
    order.sort_by(|&a, &b| s.tiles[a].cmp(&s.tiles[b]));
    let mut out = CollectionMass { value: 0.0, argmax: None, witness: None };
    for &ti in &order {
        let m = mass_single(s, &s.tiles[ti])?;
        if m.value > out.value || out.witness.is_none() {
            let pos = indices.iter().position(|&x| x == ti);
            out.value = m.value;
            out.argmax = pos;
            out.witness = Some(m);
        }
    }
    if indices.is_empty() {
        out.witness = None;
        out.argmax = None;
        out.value = 0.0;
    }
    Ok(out)
}

/// Outcome of the energy sup over 2-trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    pub value: f64,
    /// index (into the queried slice) of the attaining top
    pub top: Option<usize>,
    /// indices (into the queried slice) of the attaining 2-tree members
    pub members: Vec<usize>,
}

/// Δ of the canonical maximal 2-tree with top `indices[q]`.
fn delta_sq(s: &Scenario, indices: &[usize], q: usize) -> (f64, Vec<usize>) {
    let coeffs = s.coeffs();
    let top = &s.tiles[indices[q]];
    let mut sum = 0.0;
    let mut members = Vec::new();
    for (pos, &ti) in indices.iter().enumerate() {
        let p = &s.tiles[ti];
        let in_tree = tile_leq(p, top, &s.grid.alpha)
            && (pos == q || p.freq_center_in_semitile(&s.r, top, &s.grid.alpha));
        if in_tree {
            sum += coeffs[ti].norm_sqr();
            members.push(pos);
        }
    }
    (sum / top.space_volume(&s.grid.alpha), members)
}

/// 𝓔 over a collection: the max of Δ over canonical maximal 2-trees with
/// tops in the collection. Tie-break: smallest top tile.
pub fn energy(s: &Scenario, indices: &[usize]) -> EnergyResult {
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by(|&a, &b| s.tiles[indices[a]].cmp(&s.tiles[indices[b]]));
    let mut best = EnergyResult { value: 0.0, top: None, members: Vec::new() };
    for q in order {
        let (dsq, members) = delta_sq(s, indices, q);
        let value = dsq.sqrt();
        if value > best.value || best.top.is_none() {
            best = EnergyResult { value, top: Some(q), members };
        }
    }
    if indices.is_empty() {
        return EnergyResult { value: 0.0, top: None, members: Vec::new() };
    }
    best
}

/// Brute-force oracle: max Δ over every subset of `indices` that forms a
/// 2-tree (a designated top in the subset dominating all members, all
/// non-top members passing the semi-tile test). Exponential; test-sized
/// inputs only.
pub fn energy_brute_force(s: &Scenario, indices: &[usize]) -> f64 {
    let n = indices.len();
    assert!(n <= 20, "brute force limited to small collections");
    let coeffs = s.coeffs();
    let alpha = &s.grid.alpha;
    let mut best = 0.0f64;
    for mask in 1u32..(1 << n) {
        let subset: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        // the top must dominate every member
        let top = subset.iter().copied().find(|&q| {
            subset
                .iter()
                .all(|&p| tile_leq(&s.tiles[indices[p]], &s.tiles[indices[q]], alpha))
        });
        let Some(q) = top else { continue };
        let top_tile = &s.tiles[indices[q]];
        let ok = subset.iter().all(|&p| {
            p == q || s.tiles[indices[p]].freq_center_in_semitile(&s.r, top_tile, alpha)
        });
        if !ok {
            continue;
        }
        let sum: f64 = subset
            .iter()
            .map(|&p| coeffs[indices[p]].norm_sqr())
            .sum();
        best = best.max((sum / top_tile.space_volume(alpha)).sqrt());
    }
    best
}

/// Members (as indices into `indices`) of the canonical maximal 2-tree with
/// the given top, matching [`max_two_tree_members`] on tiles.
pub fn two_tree_member_indices(s: &Scenario, indices: &[usize], top_pos: usize) -> Vec<usize> {
    let (_, members) = delta_sq(s, indices, top_pos);
    members
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnisoExponent;
    use crate::grid::{GridFunction, GridSpec, Repr};
    use crate::multipliers::MultiplierSpec;
    use crate::operators::{restricted_set, FreqRegion};
    use crate::tiles::BitVector;
    use crate::wavepackets::BumpSpec;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn alpha12() -> AnisoExponent {
        AnisoExponent::new(vec![1, 2]).unwrap()
    }

    fn tile(k: i32, space: &[i64], freq: &[i64]) -> Tile {
        Tile::new(k, space.to_vec(), freq.to_vec(), &alpha12()).unwrap()
    }

    /// grid 64×4096, random f, N piecewise from the given values
    fn scenario(
        seed: u64,
        tiles: Vec<Tile>,
        e_density: f64,
        n_values: Vec<Vec<i64>>,
        k_cap: i32,
    ) -> Scenario {
        let alpha = alpha12();
        let grid = GridSpec::new(alpha.clone(), 1, -5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = GridFunction::from_samples(
            grid.clone(),
            Repr::Frequency,
            (0..grid.total_points())
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let e_mask: Vec<bool> = (0..grid.total_points())
            .map(|_| rng.gen_bool(e_density))
            .collect();
        let nv = n_values.len() as u32;
        let n_map: Vec<u32> = (0..grid.total_points()).map(|_| rng.gen_range(0..nv)).collect();
        Scenario::new(
            grid,
            BumpSpec::default_params(),
            tiles,
            BitVector::new(vec![0, 1]).unwrap(),
            MultiplierSpec::constant(alpha, 1.0),
            f,
            e_mask,
            n_map,
            n_values,
            4.0 + 1.0 / 3.0,
            11,
            k_cap,
        )
        .unwrap()
    }

    #[test]
    fn mass_empty_e_is_zero() {
        let t = tile(-3, &[1, 3], &[0, 2]);
        let mut s = scenario(1, vec![t.clone()], 0.5, vec![vec![0, 0]], 0);
        s.e_mask = vec![false; s.e_mask.len()];
        let m = mass_single(&s, &t).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.witness, t);
    }

    #[test]
    fn mass_matches_exhaustive_enumeration() {
        // oracle: enumerate every P' >= P up to k_cap by explicit candidate
        // construction and integrate via restricted_set + weight grid scan
        let t = tile(-4, &[7, 100], &[0, 1]);
        let values: Vec<Vec<i64>> = vec![
            vec![0, 80],
            vec![1, 100],
            vec![-3, -50],
            vec![0, 120],
            vec![5, 700],
        ];
        let s = scenario(3, vec![t.clone()], 0.4, values, -1);
        let fast = mass_single(&s, &t).unwrap();

        let grid = &s.grid;
        let alpha = &grid.alpha;
        let mut best = 0.0f64;
        for k_prime in t.k..=s.k_cap {
            let dk = (k_prime - t.k) as u32;
            let space: Vec<i64> = (0..2)
                .map(|i| t.space[i].div_euclid(1 << (dk * alpha.component(i))))
                .collect();
            // all frequency sub-cubes of ω_P at scale −k'
            let mut combos = vec![vec![]];
            for i in 0..2 {
                let base = t.freq[i] << (dk * alpha.component(i));
                let count = 1i64 << (dk * alpha.component(i));
                let mut next = Vec::new();
                for c in combos {
                    for off in 0..count {
                        let mut cc: Vec<i64> = c.clone();
                        cc.push(base + off);
                        next.push(cc);
                    }
                }
                combos = next;
            }
            for freq in combos {
                let cand = Tile { k: k_prime, space: space.clone(), freq };
                // the candidate must dominate t: center of ω_cand in ω_t
                assert!(tile_leq(&t, &cand, alpha));
                let mask = restricted_set(&s, &FreqRegion::Cube(cand.freq_cube()));
                let mut integral = 0.0;
                for (cell, &inside) in mask.iter().enumerate() {
                    if inside {
                        let j = grid.unflatten(cell);
                        let x = grid.point_coords(&j);
                        integral += weight_w_at(&cand, s.nu1, grid, &x);
                    }
                }
                best = best.max(integral * grid.cell_volume());
            }
        }
        assert!(
            (fast.value - best).abs() <= 1e-10 * (1.0 + best),
            "fast {} vs oracle {best}",
            fast.value
        );
    }

    #[test]
    fn mass_bounded_by_weight_l1() {
        let norm_w: f64 = {
            // grid quadrature of ‖w^{ν₁}‖₁ at the origin tile scale
            let alpha = alpha12();
            let grid = GridSpec::new(alpha.clone(), 1, -5).unwrap();
            let t0 = tile(-3, &[0, 0], &[0, 0]);
            let w = crate::wavepackets::weight_w(&t0, 4.0 + 1.0 / 3.0, &grid);
            w.samples.iter().map(|v| v.re).sum::<f64>() * grid.cell_volume()
        };
        for seed in 0..8 {
            let t = tile(-3, &[2, 5], &[1, -3]);
            let s = scenario(seed, vec![t.clone()], 0.7, vec![vec![2, -100], vec![0, 0]], 0);
            let m = mass_single(&s, &t).unwrap();
            assert!(m.value <= norm_w * (1.0 + 1e-9), "{} > {norm_w}", m.value);
        }
    }

    #[test]
    fn mass_collection_monotone() {
        let t1 = tile(-3, &[1, 3], &[0, 2]);
        let t2 = tile(-3, &[4, 30], &[1, -4]);
        let t3 = tile(-4, &[3, 17], &[0, 1]);
        let s = scenario(5, vec![t1, t2, t3], 0.5, vec![vec![1, 40], vec![0, -30]], 0);
        let a = mass_collection(&s, &[0]).unwrap();
        let ab = mass_collection(&s, &[0, 1]).unwrap();
        let abc = mass_collection(&s, &[0, 1, 2]).unwrap();
        assert!(a.value <= ab.value + 1e-15);
        assert!(ab.value <= abc.value + 1e-15);
        assert_eq!(mass_collection(&s, &[]).unwrap().value, 0.0);
    }

    #[test]
    fn energy_empty_and_singleton() {
        let t = tile(-3, &[1, 3], &[0, 2]);
        let s = scenario(7, vec![t.clone()], 0.5, vec![vec![0, 0]], 0);
        assert_eq!(energy(&s, &[]).value, 0.0);
        let e = energy(&s, &[0]);
        let expect = s.coeffs()[0].norm() / t.space_volume(&s.grid.alpha).sqrt();
        assert!((e.value - expect).abs() < 1e-12 * (1.0 + expect));
        assert_eq!(e.members, vec![0]);
    }

    #[test]
    fn energy_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for seed in 0..5 {
            // random tile family, up to 10 tiles
            let mut tiles = Vec::new();
            for _ in 0..10 {
                let k = rng.gen_range(-4..=-3);
                let s0 = rng.gen_range(0..(1i64 << (1 - k)));
                let s1 = rng.gen_range(0..(1i64 << (2 * (1 - k))));
                let f0 = rng.gen_range(-(1i64 << (k + 4))..(1i64 << (k + 4)));
                let f1 = rng.gen_range(-(1i64 << (2 * (k + 5) - 1))..(1i64 << (2 * (k + 5) - 1)));
                tiles.push(tile(k, &[s0, s1], &[f0, f1]));
            }
            tiles.sort();
            tiles.dedup();
            let n = tiles.len();
            let s = scenario(100 + seed, tiles, 0.5, vec![vec![0, 0]], 0);
            let indices: Vec<usize> = (0..n).collect();
            let fast = energy(&s, &indices);
            let brute = energy_brute_force(&s, &indices);
            assert!(
                (fast.value - brute).abs() <= 1e-12 * (1.0 + brute),
                "seed {seed}: fast {} vs brute {brute}",
                fast.value
            );
            // witness identity: value² · |I_top| = Σ members |coeff|²
            if let Some(top) = fast.top {
                let top_vol = s.tiles[indices[top]].space_volume(&s.grid.alpha);
                let sum: f64 = fast
                    .members
                    .iter()
                    .map(|&p| s.coeffs()[indices[p]].norm_sqr())
                    .sum();
                assert!((fast.value * fast.value * top_vol - sum).abs() < 1e-10 * (1.0 + sum));
            }
        }
    }

    #[test]
    fn energy_monotone_and_singleton_bound() {
        let t1 = tile(-3, &[1, 3], &[0, 2]);
        let t2 = tile(-3, &[4, 30], &[1, -4]);
        let t3 = tile(-4, &[3, 17], &[0, 1]);
        let s = scenario(13, vec![t1, t2, t3], 0.5, vec![vec![0, 0]], 0);
        let e12 = energy(&s, &[0, 1]).value;
        let e123 = energy(&s, &[0, 1, 2]).value;
        assert!(e12 <= e123 + 1e-15);
        // |⟨f,φ_P⟩| ≤ 𝓔·|I_P|^{1/2} for every tile in the collection
        for ti in 0..3 {
            let c = s.coeffs()[ti].norm();
            let bound = e123 * s.tiles[ti].space_volume(&s.grid.alpha).sqrt();
            assert!(c <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energy_scales_linearly_in_f() {
        let t1 = tile(-3, &[1, 3], &[0, 2]);
        let t2 = tile(-4, &[3, 17], &[0, 1]);
        let s1 = scenario(21, vec![t1.clone(), t2.clone()], 0.5, vec![vec![0, 0]], 0);
        let mut f2 = s1.f_hat.clone();
        f2 = f2.scale(Complex64::new(3.0, 0.0));
        let s2 = Scenario::new(
            s1.grid.clone(),
            s1.bump.clone(),
            vec![t1, t2],
            s1.r.clone(),
            s1.multiplier.clone(),
            f2,
            s1.e_mask.clone(),
            s1.n_map.clone(),
            s1.n_values.clone(),
            s1.nu1,
            s1.nu0,
            s1.k_cap,
        )
        .unwrap();
        let e1 = energy(&s1, &[0, 1]).value;
        let e2 = energy(&s2, &[0, 1]).value;
        assert!((e2 - 3.0 * e1).abs() < 1e-10 * (1.0 + e2));
    }
}
