//! The constructive mass split, the energy tree-selection algorithm, the
//! main ℓ-indexed decomposition loop, and the tree-estimate / global-sum
//! checks.
//!
//! Tile collections are handled as index sets into the scenario's tile list.
//! Decomposition trees carry a top tile together with member indices; mass
//! trees may have tops outside the input collection (the witness of the mass
//! sup need not belong to it), which is why they are not `tiles::Tree`
//! values.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TilekitError};
use crate::geometry::pow2;
use crate::mass_energy::{energy, mass_collection, mass_single};
use crate::operators::{dual_pairing_subset, Scenario};
use crate::tiles::{freq_center_cmp, tile_leq, Tile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeKind {
    Mass,
    Energy,
    /// leftovers with zero mass and zero coefficients, swept at loop end
    NullTail,
}

/// One tree of a decomposition: a top tile dominating every member.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeRecord {
    pub kind: TreeKind,
    pub top: Tile,
    /// indices into the scenario's tile list
    pub members: Vec<usize>,
    /// |I_top|
    pub top_volume: f64,
}

/// Certificate of one mass split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassSplitCert {
    pub mu: f64,
    pub tree_count: usize,
    pub sum_top_volumes: f64,
    /// μ·Σ|I_T| — the counting-bound product
    pub product: f64,
}

pub struct MassSplit {
    pub light: Vec<usize>,
    pub heavy: Vec<usize>,
    pub trees: Vec<TreeRecord>,
    pub cert: MassSplitCert,
}

/// Heavy/light split at threshold μ/4, with heavy tiles organized into trees
/// whose tops are the maximal witness tiles.
pub fn mass_split(s: &Scenario, indices: &[usize]) -> Result<MassSplit> {
    let mu = mass_collection(s, indices)?.value;
    if mu == 0.0 {
        return Ok(MassSplit {
            light: indices.to_vec(),
            heavy: Vec::new(),
            trees: Vec::new(),
            cert: MassSplitCert { mu, tree_count: 0, sum_top_volumes: 0.0, product: 0.0 },
        });
    }
    let alpha = &s.grid.alpha;
    let mut light = Vec::new();
    let mut heavy: Vec<(usize, Tile)> = Vec::new(); // (index, witness)
    for &ti in indices {
        let m = mass_single(s, &s.tiles[ti])?;
        if m.value > mu / 4.0 {
            heavy.push((ti, m.witness));
        } else {
            light.push(ti);
        }
    }
    // maximal elements of the witness set
    let mut witnesses: Vec<Tile> = heavy.iter().map(|(_, w)| w.clone()).collect();
    witnesses.sort();
    witnesses.dedup();
    let tops: Vec<Tile> = witnesses
        .iter()
        .filter(|w| {
            !witnesses
                .iter()
                .any(|other| *other != **w && tile_leq(w, other, alpha))
        })
        .cloned()
        .collect();
    // assign each heavy tile to the first top dominating its witness
    let mut trees: Vec<TreeRecord> = tops
        .iter()
        .map(|t| TreeRecord {
            kind: TreeKind::Mass,
            top: t.clone(),
            members: Vec::new(),
            top_volume: t.space_volume(alpha),
        })
        .collect();
    for (ti, w) in &heavy {
        let slot = tops
            .iter()
            .position(|t| tile_leq(w, t, alpha))
            .ok_or_else(|| TilekitError::Internal("witness above no maximal element".into()))?;
        trees[slot].members.push(*ti);
    }
    trees.retain(|t| !t.members.is_empty());
    let sum_top_volumes: f64 = trees.iter().map(|t| t.top_volume).sum();
    let cert = MassSplitCert {
        mu,
        tree_count: trees.len(),
        sum_top_volumes,
        product: mu * sum_top_volumes,
    };
    Ok(MassSplit { light, heavy: heavy.into_iter().map(|(i, _)| i).collect(), trees, cert })
}

/// Certificate of one energy split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergySplitCert {
    pub eps: f64,
    pub tree_count: usize,
    pub sum_top_volumes: f64,
    /// ε²·Σ|I_T| — the counting-bound product
    pub product: f64,
}

pub struct EnergySplit {
    pub low: Vec<usize>,
    pub high: Vec<usize>,
    /// the removed maximal trees
    pub trees: Vec<TreeRecord>,
    /// the selected 2-trees (members of the corresponding maximal tree)
    pub two_trees: Vec<TreeRecord>,
    pub cert: EnergySplitCert,
}

/// The greedy tree selection: repeatedly pick a maximal 2-tree with
/// Δ ≥ ε/2 whose top's frequency center has minimal π₀ coordinate, remove
/// the maximal tree with that top, and stop when no candidate remains.
pub fn energy_split(s: &Scenario, indices: &[usize]) -> Result<EnergySplit> {
    let eps = energy(s, indices).value;
    let alpha = &s.grid.alpha;
    let i0 = s
        .r
        .first_set()
        .ok_or_else(|| TilekitError::invalid("energy split needs r != 0"))?;
    let mut stock: Vec<usize> = indices.to_vec();
    stock.sort_by(|&a, &b| s.tiles[a].cmp(&s.tiles[b]));
    let mut trees = Vec::new();
    let mut two_trees = Vec::new();
    let mut high = Vec::new();

    if eps > 0.0 {
        loop {
            // candidate tops: Δ(T_q) ≥ ε/2 over the current stock
            let coeffs = s.coeffs();
            let mut best: Option<(usize, f64, Vec<usize>)> = None; // (stock pos, Δ², members)
            for (pos, &ti) in stock.iter().enumerate() {
                let top = &s.tiles[ti];
                let mut sum = 0.0;
                let mut members = Vec::new();
                for &tj in stock.iter() {
                    let p = &s.tiles[tj];
                    let in_two = tile_leq(p, top, alpha)
                        && (tj == ti || p.freq_center_in_semitile(&s.r, top, alpha));
                    if in_two {
                        sum += coeffs[tj].norm_sqr();
                        members.push(tj);
                    }
                }
                let dsq = sum / top.space_volume(alpha);
                if dsq.sqrt() < eps / 2.0 {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((bpos, _, _)) => {
                        let bt = &s.tiles[stock[*bpos]];
                        match freq_center_cmp(top, bt, i0, alpha) {
                            std::cmp::Ordering::Less => true,
                            std::cmp::Ordering::Greater => false,
                            std::cmp::Ordering::Equal => top < bt,
                        }
                    }
                };
                if better {
                    best = Some((pos, dsq, members));
                }
            }
            let Some((pos, _dsq, two_members)) = best else { break };
            let top_idx = stock[pos];
            let top = s.tiles[top_idx].clone();
            // maximal tree in the stock with this top
            let tree_members: Vec<usize> = stock
                .iter()
                .copied()
                .filter(|&tj| tile_leq(&s.tiles[tj], &top, alpha))
                .collect();
            let vol = top.space_volume(alpha);
            trees.push(TreeRecord {
                kind: TreeKind::Energy,
                top: top.clone(),
                members: tree_members.clone(),
                top_volume: vol,
            });
            two_trees.push(TreeRecord {
                kind: TreeKind::Energy,
                top,
                members: two_members,
                top_volume: vol,
            });
            stock.retain(|tj| !tree_members.contains(tj));
            high.extend(tree_members);
        }
    }

    let sum_top_volumes: f64 = trees.iter().map(|t| t.top_volume).sum();
    Ok(EnergySplit {
        low: stock,
        high,
        cert: EnergySplitCert {
            eps,
            tree_count: trees.len(),
            sum_top_volumes,
            product: eps * eps * sum_top_volumes,
        },
        trees,
        two_trees,
    })
}

/// One ℓ-bucket of the decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bucket {
    pub ell: i32,
    pub trees: Vec<TreeRecord>,
    pub mass_cert: Option<MassSplitCert>,
    pub energy_cert: Option<EnergySplitCert>,
    /// recomputed mass and energy of the bucket's tile set
    pub mass: f64,
    pub energy: f64,
    pub null_tail: bool,
}

impl Bucket {
    pub fn tile_indices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.trees.iter().flat_map(|t| t.members.clone()).collect();
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub buckets: Vec<Bucket>,
    /// must be empty on success
    pub residue: Vec<usize>,
    pub initial_ell: i32,
    pub final_ell: i32,
}

impl DecompositionResult {
    /// Exact-partition and per-bucket threshold re-verification.
    pub fn verify(&self, s: &Scenario) -> Result<()> {
        let mut seen = vec![false; s.tiles.len()];
        for b in &self.buckets {
            for ti in b.tile_indices() {
                if seen[ti] {
                    return Err(TilekitError::Internal(format!(
                        "tile {ti} appears in two buckets"
                    )));
                }
                seen[ti] = true;
            }
        }
        if !seen.iter().all(|&b| b) || !self.residue.is_empty() {
            return Err(TilekitError::Internal("buckets do not cover the input".into()));
        }
        for b in &self.buckets {
            let idx = b.tile_indices();
            let mu = mass_collection(s, &idx)?.value;
            let eps = energy(s, &idx).value;
            let slack = 1.0 + 1e-9;
            if mu > pow2(2 * b.ell) * slack {
                return Err(TilekitError::Internal(format!(
                    "bucket {}: mass {mu} exceeds 2^{}",
                    b.ell,
                    2 * b.ell
                )));
            }
            if eps > pow2(b.ell) * slack {
                return Err(TilekitError::Internal(format!(
                    "bucket {}: energy {eps} exceeds 2^{}",
                    b.ell, b.ell
                )));
            }
        }
        Ok(())
    }
}

/// The main decomposition loop: while tiles remain, split off heavy-mass and
/// high-energy trees into the bucket at the current ℓ, then lower ℓ.
pub fn main_decompose(s: &Scenario) -> Result<DecompositionResult> {
    let all: Vec<usize> = (0..s.tiles.len()).collect();
    if all.is_empty() {
        return Ok(DecompositionResult {
            buckets: Vec::new(),
            residue: Vec::new(),
            initial_ell: 0,
            final_ell: 0,
        });
    }
    let mu0 = mass_collection(s, &all)?.value;
    let eps0 = energy(s, &all).value;

    // floor from the minimal nonzero single-tile quantities: below it, no
    // threshold can trigger, so reaching it means a logic error
    let mut min_mass = f64::INFINITY;
    let mut min_energy = f64::INFINITY;
    for &ti in &all {
        let m = mass_single(s, &s.tiles[ti])?.value;
        if m > 0.0 {
            min_mass = min_mass.min(m);
        }
        let c = s.coeffs()[ti].norm();
        if c > 0.0 {
            min_energy = min_energy.min(c / s.tiles[ti].space_volume(&s.grid.alpha).sqrt());
        }
    }
    let ell_floor = {
        let from_mass = if min_mass.is_finite() { (min_mass.log2() / 2.0).floor() as i32 } else { 0 };
        let from_energy = if min_energy.is_finite() { min_energy.log2().floor() as i32 } else { 0 };
        from_mass.min(from_energy) - 2
    };

    let initial_ell = {
        let from_eps = if eps0 > 0.0 { eps0.log2().ceil() as i32 } else { i32::MIN };
        let from_mu = if mu0 > 0.0 { (mu0.log2() / 2.0).ceil() as i32 } else { i32::MIN };
        from_eps.max(from_mu).max(ell_floor)
    };

    let mut ell = initial_ell;
    let mut stock = all;
    let mut buckets: Vec<Bucket> = Vec::new();

    while !stock.is_empty() {
        let mu = mass_collection(s, &stock)?.value;
        let eps = energy(s, &stock).value;
        if mu == 0.0 && eps == 0.0 {
            // null tiles: zero mass and zero coefficients; every bound is
            // vacuous, sweep them as singleton trees
            let trees: Vec<TreeRecord> = stock
                .iter()
                .map(|&ti| TreeRecord {
                    kind: TreeKind::NullTail,
                    top: s.tiles[ti].clone(),
                    members: vec![ti],
                    top_volume: s.tiles[ti].space_volume(&s.grid.alpha),
                })
                .collect();
            buckets.push(Bucket {
                ell,
                trees,
                mass_cert: None,
                energy_cert: None,
                mass: 0.0,
                energy: 0.0,
                null_tail: true,
            });
            stock.clear();
            break;
        }

        let mut bucket_trees: Vec<TreeRecord> = Vec::new();
        let mut mass_cert = None;
        let mut energy_cert = None;

        if mu > pow2(2 * (ell - 1)) {
            let split = mass_split(s, &stock)?;
            bucket_trees.extend(split.trees);
            mass_cert = Some(split.cert);
            stock = split.light;
        }
        if !stock.is_empty() {
            let eps_now = energy(s, &stock).value;
            if eps_now > pow2(ell - 1) {
                let split = energy_split(s, &stock)?;
                bucket_trees.extend(split.trees);
                energy_cert = Some(split.cert);
                stock = split.low;
            }
        }

        if !bucket_trees.is_empty() {
            let idx: Vec<usize> = bucket_trees.iter().flat_map(|t| t.members.clone()).collect();
            let mass = mass_collection(s, &idx)?.value;
            let energy_v = energy(s, &idx).value;
            buckets.push(Bucket {
                ell,
                trees: bucket_trees,
                mass_cert,
                energy_cert,
                mass,
                energy: energy_v,
                null_tail: false,
            });
        }

        if stock.is_empty() {
            break;
        }
        ell -= 1;
        if ell < ell_floor {
            return Err(TilekitError::Internal(format!(
                "decomposition did not terminate: ell {ell} fell below floor {ell_floor} \
                 with {} tiles left (mass {mu:e}, energy {eps:e})",
                stock.len()
            )));
        }
    }

    Ok(DecompositionResult { buckets, residue: stock, initial_ell, final_ell: ell })
}

/// Tree-estimate audit values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeEstimate {
    pub lhs: f64,
    pub rhs: f64,
    /// lhs/rhs, 0 when both vanish
    pub ratio: f64,
    /// rhs = 0 with lhs > 0 (must not occur)
    pub degenerate: bool,
    pub energy: f64,
    pub mass: f64,
}

/// Audit of the single-tree inequality: Σ_P |⟨f,φ_P⟩⟨ψ^{N(·)}_P, 1_{E_{P(r)}}⟩|
/// against ‖m‖_{𝓜^{ν₀}}·|I_top|·𝓔(T)·𝓜(T).
pub fn tree_estimate_check(s: &Scenario, top: &Tile, members: &[usize]) -> Result<TreeEstimate> {
    let lhs = dual_pairing_subset(s, members);
    let eps = energy(s, members).value;
    let mu = mass_collection(s, members)?.value;
    let m_norm = s.multiplier_norm_nu0();
    let rhs = m_norm * top.space_volume(&s.grid.alpha) * eps * mu;
    let (ratio, degenerate) = if rhs > 0.0 {
        (lhs / rhs, false)
    } else if lhs == 0.0 {
        (0.0, false)
    } else {
        (f64::INFINITY, true)
    };
    Ok(TreeEstimate { lhs, rhs, ratio, degenerate, energy: eps, mass: mu })
}

/// Global-sum audit values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalSum {
    /// Σ over all decomposition trees of the tree-estimate lhs
    pub total: f64,
    /// Σ_ℓ 2^ℓ·min(1, 2^{2ℓ})·Σ_{T ∈ 𝒯_ℓ} |I_T|
    pub weighted_tops: f64,
    /// total / (‖m‖·weighted_tops), 0 when vacuous
    pub ratio: f64,
    /// total / ‖m‖ (the empirical model-operator constant)
    pub normalized_total: f64,
    pub multiplier_norm: f64,
    pub e_measure: f64,
    pub bucket_count: usize,
}

/// Runs the decomposition on the unit-normalized scenario and compares the
/// summed pairings to the bucket-weighted counting bound.
///
/// The caller must supply a scenario with ‖f‖₂ = 1 and |E| ≤ 1 (the
/// generator's normalization); this is checked.
pub fn global_sum_check(s: &Scenario) -> Result<GlobalSum> {
    let fn2 = s.f_norm();
    if s.tiles.is_empty() {
        return Ok(GlobalSum {
            total: 0.0,
            weighted_tops: 0.0,
            ratio: 0.0,
            normalized_total: 0.0,
            multiplier_norm: s.multiplier_norm_nu0(),
            e_measure: s.e_measure(),
            bucket_count: 0,
        });
    }
    if (fn2 - 1.0).abs() > 1e-6 {
        return Err(TilekitError::Validation(format!(
            "global sum check expects ‖f‖₂ = 1, got {fn2}"
        )));
    }
    if s.e_measure() > 1.0 + 1e-9 {
        return Err(TilekitError::Validation(format!(
            "global sum check expects |E| ≤ 1, got {}",
            s.e_measure()
        )));
    }
    let result = main_decompose(s)?;
    result.verify(s)?;
    let mut total = 0.0;
    let mut weighted = 0.0;
    for b in &result.buckets {
        let weight = pow2(b.ell) * pow2(2 * b.ell).min(1.0);
        for t in &b.trees {
            total += dual_pairing_subset(s, &t.members);
            weighted += weight * t.top_volume;
        }
    }
    let m_norm = s.multiplier_norm_nu0();
    let denom = m_norm * weighted;
    let ratio = if denom > 0.0 { total / denom } else { 0.0 };
    Ok(GlobalSum {
        total,
        weighted_tops: weighted,
        ratio,
        normalized_total: if m_norm > 0.0 { total / m_norm } else { 0.0 },
        multiplier_norm: m_norm,
        e_measure: s.e_measure(),
        bucket_count: result.buckets.len(),
    })
}
