//! Tiles, semi-tiles, the tile partial order, and tree classification.
//!
//! A tile is a phase-space rectangle `I_P × ω_P` with `I_P` a spatial dyadic
//! cube of scale `k` and `ω_P` a frequency dyadic cube of scale `−k`, so
//! `|I_P|·|ω_P| = 1`. All order and membership tests are exact dyadic-rational
//! comparisons (i128 shifts), never floating point.
//!
//! Semi-tile membership uses the half-open convention `[lower, upper)`, so
//! the 2^n semi-tiles of a tile partition its frequency cube without double
//! counting. One consequence: the center of `ω_P` lies in `ω_{P(r)}` iff
//! r = (1,…,1). A tree's designated top is therefore exempted from the 1-/2-
//! tree membership scan (for trees with at least two tiles), which reproduces
//! the closed-convention classification where the top qualifies for both.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TilekitError};
use crate::geometry::{AnisoCube, AnisoExponent, Rect};

/// A vector in {0,1}^n selecting one semi-tile per tile.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVector(Vec<u8>);

impl BitVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(TilekitError::invalid("bit vector entries must be 0 or 1"));
        }
        Ok(BitVector(bits))
    }

    pub fn zeros(n: usize) -> Self {
        BitVector(vec![0; n])
    }

    pub fn ones(n: usize) -> Self {
        BitVector(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    /// Least index with bit 1 (the π₀ axis of the energy selection).
    pub fn first_set(&self) -> Option<usize> {
        self.0.iter().position(|&b| b == 1)
    }

    /// All 2^n − 1 nonzero bit vectors of length n.
    pub fn all_nonzero(n: usize) -> Vec<BitVector> {
        (1u32..(1 << n))
            .map(|mask| BitVector((0..n).map(|i| ((mask >> i) & 1) as u8).collect()))
            .collect()
    }
}

/// n1/2^e1 < n2/2^e2, exactly.
fn dyadic_lt(n1: i64, e1: i32, n2: i64, e2: i32) -> bool {
    let e = e1.max(e2);
    ((n1 as i128) << (e - e1)) < ((n2 as i128) << (e - e2))
}

fn dyadic_le(n1: i64, e1: i32, n2: i64, e2: i32) -> bool {
    !dyadic_lt(n2, e2, n1, e1)
}

/// A tile: spatial cube `(k, space_index)` × frequency cube `(−k, freq_index)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tile {
    pub k: i32,
    pub space: Vec<i64>,
    pub freq: Vec<i64>,
}

impl Tile {
    pub fn new(k: i32, space: Vec<i64>, freq: Vec<i64>, alpha: &AnisoExponent) -> Result<Self> {
        if space.len() != alpha.dim() || freq.len() != alpha.dim() {
            return Err(TilekitError::invalid("tile index dimension mismatch"));
        }
        // reuse the cube constructors for range validation
        AnisoCube::new(k, space.clone(), alpha)?;
        AnisoCube::new(-k, freq.clone(), alpha)?;
        Ok(Tile { k, space, freq })
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn space_cube(&self) -> AnisoCube {
        AnisoCube {
            k: self.k,
            idx: self.space.clone(),
        }
    }

    pub fn freq_cube(&self) -> AnisoCube {
        AnisoCube {
            k: -self.k,
            idx: self.freq.clone(),
        }
    }

    /// |I_P| = 2^{k|α|}.
    pub fn space_volume(&self, alpha: &AnisoExponent) -> f64 {
        self.space_cube().volume(alpha)
    }

    /// The frequency rectangle of the semi-tile `ω_{P(r)}`:
    /// `[δ_{2^{−k}}(ℓ + r/2), δ_{2^{−k}}(ℓ + (r+1)/2))`.
    pub fn semitile(&self, r: &BitVector, alpha: &AnisoExponent) -> Rect {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for (i, &l) in self.freq.iter().enumerate() {
            let a = alpha.component(i) as i32;
            let step = crate::geometry::pow2(-self.k * a - 1);
            lower.push((2 * l + r.bit(i) as i64) as f64 * step);
            upper.push((2 * l + r.bit(i) as i64 + 1) as f64 * step);
        }
        Rect { lower, upper }
    }

    /// Exact test: c(ω_other) ∈ ω_self (half-open).
    pub fn freq_center_in_omega(&self, other: &Tile, alpha: &AnisoExponent) -> bool {
        for i in 0..self.dim() {
            let a = alpha.component(i) as i32;
            // center of ω_other on axis i: (2f+1) / 2^{k_other·a + 1}
            let (cn, ce) = (2 * other.freq[i] + 1, other.k * a + 1);
            // ω_self bounds: f / 2^{k_self·a}, (f+1) / 2^{k_self·a}
            let (ln, le) = (self.freq[i], self.k * a);
            if !(dyadic_le(ln, le, cn, ce) && dyadic_lt(cn, ce, ln + 1, le)) {
                return false;
            }
        }
        true
    }

    /// Exact test: c(ω_other) ∈ ω_{self(r)} (half-open).
    pub fn freq_center_in_semitile(&self, r: &BitVector, other: &Tile, alpha: &AnisoExponent) -> bool {
        for i in 0..self.dim() {
            let a = alpha.component(i) as i32;
            let (cn, ce) = (2 * other.freq[i] + 1, other.k * a + 1);
            let (ln, le) = (2 * self.freq[i] + r.bit(i) as i64, self.k * a + 1);
            if !(dyadic_le(ln, le, cn, ce) && dyadic_lt(cn, ce, ln + 1, le)) {
                return false;
            }
        }
        true
    }
}

/// Exact comparison of the axis-`i` coordinates of c(ω_a) and c(ω_b)
/// (dyadic rationals (2ℓ+1)/2^{kα+1}).
pub fn freq_center_cmp(a: &Tile, b: &Tile, axis: usize, alpha: &AnisoExponent) -> std::cmp::Ordering {
    let ai = alpha.component(axis) as i32;
    let (n1, e1) = (2 * a.freq[axis] + 1, a.k * ai + 1);
    let (n2, e2) = (2 * b.freq[axis] + 1, b.k * ai + 1);
    if dyadic_lt(n1, e1, n2, e2) {
        std::cmp::Ordering::Less
    } else if dyadic_lt(n2, e2, n1, e1) {
        std::cmp::Ordering::Greater
    } else {
        std::cmp::Ordering::Equal
    }
}

/// The tile partial order: P ≤ Q iff I_P ⊆ I_Q and c(ω_Q) ∈ ω_P.
pub fn tile_leq(p: &Tile, q: &Tile, alpha: &AnisoExponent) -> bool {
    q.space_cube().contains(&p.space_cube(), alpha) && p.freq_center_in_omega(q, alpha)
}

/// Two tiles are comparable iff their phase-space rectangles intersect; this
/// predicate evaluates both sides and reports whether they agree.
pub fn comparable_iff_intersect_check(p: &Tile, q: &Tile, alpha: &AnisoExponent) -> bool {
    let comparable = tile_leq(p, q, alpha) || tile_leq(q, p, alpha);
    let intersect = p.space_cube().intersects(&q.space_cube(), alpha)
        && p.freq_cube().intersects(&q.freq_cube(), alpha);
    comparable == intersect
}

/// A finite tile set dominated by a designated top tile (the top is a member).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    top: Tile,
    tiles: Vec<Tile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeClass {
    OneTree,
    TwoTree,
    Mixed,
}

impl Tree {
    /// Construction validates domination: every tile must satisfy P ≤ top.
    pub fn new(top: Tile, mut tiles: Vec<Tile>, alpha: &AnisoExponent) -> Result<Self> {
        if !tiles.contains(&top) {
            tiles.push(top.clone());
        }
        tiles.sort();
        tiles.dedup();
        if let Some(bad) = tiles.iter().find(|p| !tile_leq(p, &top, alpha)) {
            return Err(TilekitError::invalid(format!(
                "tree top does not dominate {bad:?}"
            )));
        }
        Ok(Tree { top, tiles })
    }

    pub fn singleton(tile: Tile) -> Self {
        Tree {
            top: tile.clone(),
            tiles: vec![tile],
        }
    }

    pub fn top(&self) -> &Tile {
        &self.top
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// |I_T|.
    pub fn top_volume(&self, alpha: &AnisoExponent) -> f64 {
        self.top.space_volume(alpha)
    }

    /// 1-/2-tree classification.
    ///
    /// A tile belongs to the 2-class when c(ω_T) ∈ ω_{P(r)} and to the 1-class
    /// otherwise; half-open semi-tiles make these mutually exclusive. For
    /// trees with at least two tiles the designated top is exempt from the
    /// scan; a singleton is classified by its own membership test.
    pub fn classify(&self, r: &BitVector, alpha: &AnisoExponent) -> TreeClass {
        let members: Vec<&Tile> = if self.tiles.len() == 1 {
            self.tiles.iter().collect()
        } else {
            self.tiles.iter().filter(|p| **p != self.top).collect()
        };
        let mut in_two = 0usize;
        for p in &members {
            if p.freq_center_in_semitile(r, &self.top, alpha) {
                in_two += 1;
            }
        }
        if in_two == members.len() {
            TreeClass::TwoTree
        } else if in_two == 0 {
            TreeClass::OneTree
        } else {
            TreeClass::Mixed
        }
    }

    /// Split into a 2-tree part and a 1-tree part sharing the top.
    ///
    /// Non-top tiles go to the part their membership test selects; the top
    /// goes to its own natural part and is adjoined to the other part when
    /// that part is otherwise non-empty. Parts are `None` when empty.
    pub fn split(&self, r: &BitVector, alpha: &AnisoExponent) -> (Option<Tree>, Option<Tree>) {
        let mut two = Vec::new();
        let mut one = Vec::new();
        for p in &self.tiles {
            if p.freq_center_in_semitile(r, &self.top, alpha) {
                two.push(p.clone());
            } else {
                one.push(p.clone());
            }
        }
        let mk = |mut part: Vec<Tile>, top: &Tile| -> Option<Tree> {
            if part.is_empty() {
                return None;
            }
            if !part.contains(top) {
                part.push(top.clone());
            }
            part.sort();
            Some(Tree {
                top: top.clone(),
                tiles: part,
            })
        };
        (mk(two, &self.top), mk(one, &self.top))
    }
}

/// The canonical maximal 2-tree members with top `top` inside `tiles`:
/// every P ≤ top whose semi-tile contains c(ω_top), with the top itself
/// always included (singletons count as 2-trees).
pub fn max_two_tree_members(tiles: &[Tile], top: &Tile, r: &BitVector, alpha: &AnisoExponent) -> Vec<Tile> {
    let mut out: Vec<Tile> = tiles
        .iter()
        .filter(|p| {
            tile_leq(p, top, alpha)
                && (*p == top || p.freq_center_in_semitile(r, top, alpha))
        })
        .cloned()
        .collect();
    if !out.contains(top) && tiles.contains(top) {
        out.push(top.clone());
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha12() -> AnisoExponent {
        AnisoExponent::new(vec![1, 2]).unwrap()
    }

    fn tile(k: i32, space: &[i64], freq: &[i64]) -> Tile {
        Tile::new(k, space.to_vec(), freq.to_vec(), &alpha12()).unwrap()
    }

    #[test]
    fn semitile_direct_formula() {
        let a = alpha12();
        let p = tile(0, &[0, 0], &[0, 0]);
        let r = BitVector::new(vec![1, 0]).unwrap();
        let s = p.semitile(&r, &a);
        assert_eq!(s.lower, vec![0.5, 0.0]);
        assert_eq!(s.upper, vec![1.0, 0.5]);

        let r0 = BitVector::zeros(2);
        let s0 = p.semitile(&r0, &a);
        assert_eq!(s0.lower, vec![0.0, 0.0]);
        assert_eq!(s0.upper, vec![0.5, 0.5]);
    }

    #[test]
    fn semitiles_partition_omega() {
        let a = alpha12();
        let p = tile(-1, &[1, 3], &[0, 1]);
        let omega = p.freq_cube().realize(&a);
        let vol: f64 = (0u8..4)
            .map(|m| {
                let r = BitVector::new(vec![m & 1, (m >> 1) & 1]).unwrap();
                p.semitile(&r, &a).volume()
            })
            .sum();
        assert!((vol - omega.volume()).abs() < 1e-15);
        // every semitile sits inside omega
        for m in 0u8..4 {
            let r = BitVector::new(vec![m & 1, (m >> 1) & 1]).unwrap();
            assert!(omega.contains_rect(&p.semitile(&r, &a)));
        }
    }

    #[test]
    fn tile_leq_examples() {
        let a = alpha12();
        // P: k=0, I=[0,1)x[0,1), omega=[0,1)x[0,1)
        let p = tile(0, &[0, 0], &[0, 0]);
        // Q: k=1, I=[0,2)x[0,4), omega=[0,1/2)x[0,1/4) -> c(omega_Q)=(1/4,1/8)
        let q = tile(1, &[0, 0], &[0, 0]);
        assert!(tile_leq(&p, &q, &a));
        assert!(tile_leq(&p, &p, &a));
        // shifted Q' with omega=[1/2,1)x[1/4,1/2): center (3/4,3/8) not in
        // [0,1/2)x[0,1/4)
        let p_small = tile(1, &[0, 0], &[0, 0]);
        let q_shift = tile(1, &[0, 0], &[1, 1]);
        assert!(!tile_leq(&p_small, &q_shift, &a));
    }

    #[test]
    fn tile_leq_partial_order_laws_exhaustive() {
        let a = alpha12();
        let mut tiles = Vec::new();
        for k in -1..=1 {
            for s1 in -1..=1 {
                for s2 in -1..=1 {
                    for f1 in -1..=1 {
                        for f2 in -1..=1 {
                            tiles.push(tile(k, &[s1, s2], &[f1, f2]));
                        }
                    }
                }
            }
        }
        for p in &tiles {
            assert!(tile_leq(p, p, &a), "reflexivity");
        }
        for p in &tiles {
            for q in &tiles {
                if tile_leq(p, q, &a) && tile_leq(q, p, &a) {
                    assert_eq!(p, q, "antisymmetry");
                }
            }
        }
        // transitivity over comparable chains
        for p in &tiles {
            for q in &tiles {
                if !tile_leq(p, q, &a) {
                    continue;
                }
                for s in &tiles {
                    if tile_leq(q, s, &a) {
                        assert!(tile_leq(p, s, &a), "transitivity {p:?} {q:?} {s:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn comparable_iff_intersect_exhaustive_small() {
        let a = alpha12();
        let mut tiles = Vec::new();
        for k in -1..=1 {
            for s1 in -1..=1 {
                for s2 in -1..=1 {
                    for f1 in -1..=1 {
                        for f2 in -1..=1 {
                            tiles.push(tile(k, &[s1, s2], &[f1, f2]));
                        }
                    }
                }
            }
        }
        for p in &tiles {
            for q in &tiles {
                assert!(comparable_iff_intersect_check(p, q, &a), "{p:?} vs {q:?}");
            }
        }
    }

    #[test]
    fn order_implies_nested_frequencies() {
        let a = alpha12();
        let p = tile(0, &[0, 0], &[0, 0]);
        let q = tile(1, &[0, 0], &[0, 0]);
        assert!(tile_leq(&p, &q, &a));
        assert!(p.k <= q.k);
        assert!(p.freq_cube().contains(&q.freq_cube(), &a));
    }

    #[test]
    fn singleton_classification_deterministic() {
        let a = alpha12();
        let p = tile(0, &[0, 0], &[0, 0]);
        let t = Tree::singleton(p.clone());
        // center of omega_P is in omega_{P(r)} iff r = (1,1) under half-open
        assert_eq!(t.classify(&BitVector::ones(2), &a), TreeClass::TwoTree);
        assert_eq!(t.classify(&BitVector::new(vec![0, 1]).unwrap(), &a), TreeClass::OneTree);
        assert_eq!(t.classify(&BitVector::new(vec![1, 0]).unwrap(), &a), TreeClass::OneTree);
    }

    #[test]
    fn classify_against_membership_loop() {
        let a = alpha12();
        let top = tile(1, &[0, 0], &[0, 0]);
        // tiles below top with omega containing c(omega_top) = (1/4, 1/8)
        let p1 = tile(0, &[0, 0], &[0, 0]); // omega [0,1)x[0,1)
        let p2 = tile(0, &[1, 2], &[0, 0]);
        let t = Tree::new(top.clone(), vec![p1.clone(), p2.clone()], &a).unwrap();
        for r in BitVector::all_nonzero(2) {
            let class = t.classify(&r, &a);
            let mut two = 0;
            let mut total = 0;
            for p in t.tiles() {
                if *p == top {
                    continue;
                }
                total += 1;
                if p.freq_center_in_semitile(&r, &top, &a) {
                    two += 1;
                }
            }
            let expect = if two == total {
                TreeClass::TwoTree
            } else if two == 0 {
                TreeClass::OneTree
            } else {
                TreeClass::Mixed
            };
            assert_eq!(class, expect);
        }
    }

    #[test]
    fn split_union_and_labels() {
        let a = alpha12();
        let top = tile(2, &[0, 0], &[0, 0]);
        let mut members = vec![top.clone()];
        // gather a mixed set of tiles below the top
        for k in 0..=1 {
            for s1 in 0..(1 << (2 - k)) {
                for f1 in 0..2i64 {
                    let cand = tile(k, &[s1, 0], &[f1, 0]);
                    if tile_leq(&cand, &top, &a) {
                        members.push(cand);
                    }
                }
            }
        }
        let t = Tree::new(top.clone(), members.clone(), &a).unwrap();
        for r in BitVector::all_nonzero(2) {
            let (two, one) = t.split(&r, &a);
            let mut union: Vec<Tile> = Vec::new();
            for part in [&two, &one] {
                if let Some(tree) = part {
                    assert_ne!(tree.classify(&r, &a), TreeClass::Mixed);
                    union.extend(tree.tiles().iter().cloned());
                }
            }
            union.sort();
            union.dedup();
            let mut expect = t.tiles().to_vec();
            expect.sort();
            assert_eq!(union, expect);
            // parts disjoint except possibly the top
            if let (Some(a2), Some(a1)) = (&two, &one) {
                for p in a2.tiles() {
                    if a1.tiles().contains(p) {
                        assert_eq!(p, &top);
                    }
                }
            }
        }
    }

    #[test]
    fn split_singleton() {
        let a = alpha12();
        let p = tile(0, &[0, 0], &[0, 0]);
        let t = Tree::singleton(p.clone());
        let (two, one) = t.split(&BitVector::new(vec![0, 1]).unwrap(), &a);
        assert!(two.is_none());
        assert_eq!(one.unwrap().tiles(), &[p]);
    }

    #[test]
    fn down_set_is_tree() {
        let a = alpha12();
        let q = tile(1, &[0, 0], &[0, 0]);
        let mut pool = Vec::new();
        for k in -1..=1 {
            for s1 in -2..=2 {
                for s2 in -2..=2 {
                    for f1 in -2..=2 {
                        for f2 in -2..=2 {
                            pool.push(tile(k, &[s1, s2], &[f1, f2]));
                        }
                    }
                }
            }
        }
        let below: Vec<Tile> = pool
            .iter()
            .filter(|p| tile_leq(p, &q, &a))
            .cloned()
            .collect();
        let t = Tree::new(q.clone(), below, &a).unwrap();
        assert_eq!(t.top(), &q);
    }
}
