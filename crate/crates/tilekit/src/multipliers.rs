//! Anisotropically homogeneous multipliers: evaluation, derivative-norm
//! estimation, kernel synthesis, the toy oscillatory family, and the cone
//! function θ_r.
//!
//! All builtin symbols are closed-form, so two derivative routes exist: the
//! sampled central-difference estimator (`multiplier_norm`, step 1e−3 with
//! one Richardson halving) and exact truncated-Taylor jets
//! (`multiplier_norm_exact`), which stay accurate at orders where finite
//! differences drown in rounding noise. The two are cross-checked in tests.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TilekitError};
use crate::geometry::{aniso_norm, dilate, pow2, AnisoExponent};
use crate::grid::{GridFunction, GridSpec, Repr};
use crate::wavepackets::BumpSpec;

// ---------------------------------------------------------------------------
// truncated multivariate Taylor arithmetic (jets)
// ---------------------------------------------------------------------------

/// Shared tables for jets in `n` variables truncated at total order `ord`.
#[derive(Debug)]
pub struct JetSpace {
    pub n: usize,
    pub ord: usize,
    /// exponent vector of each coefficient slot, ordered by (degree, lex)
    pub exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// prod[i*len+j] = slot of exps[i]+exps[j], or u32::MAX when truncated
    prod: Vec<u32>,
}

fn enumerate_exps(n: usize, ord: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = Vec::new();
    let mut cur = vec![0u8; n];
    fn rec(axis: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if axis == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[axis] = v as u8;
            rec(axis + 1, left - v, cur, out);
        }
        cur[axis] = 0;
    }
    for deg in 0..=ord {
        let mut level = Vec::new();
        rec(0, deg, &mut cur, &mut level);
        level.retain(|e| e.iter().map(|&v| v as usize).sum::<usize>() == deg);
        level.sort();
        out.extend(level);
    }
    out
}

impl JetSpace {
    fn build(n: usize, ord: usize) -> JetSpace {
        let exps = enumerate_exps(n, ord);
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let len = exps.len();
        let mut prod = vec![u32::MAX; len * len];
        for i in 0..len {
            for j in 0..len {
                let total: usize = exps[i]
                    .iter()
                    .zip(&exps[j])
                    .map(|(&a, &b)| (a + b) as usize)
                    .sum();
                if total <= ord {
                    let sum: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(&a, &b)| a + b).collect();
                    prod[i * len + j] = index[&sum] as u32;
                }
            }
        }
        JetSpace { n, ord, exps, index, prod }
    }

    pub fn get(n: usize, ord: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache");
        guard
            .entry((n, ord))
            .or_insert_with(|| Arc::new(JetSpace::build(n, ord)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn slot(&self, beta: &[u8]) -> Option<usize> {
        self.index.get(beta).copied()
    }
}

/// A truncated Taylor expansion with complex coefficients.
#[derive(Debug, Clone)]
pub struct Jet {
    pub space: Arc<JetSpace>,
    pub c: Vec<Complex64>,
}

impl Jet {
    pub fn constant(space: Arc<JetSpace>, v: Complex64) -> Jet {
        let mut c = vec![Complex64::ZERO; space.len()];
        c[0] = v;
        Jet { space, c }
    }

    pub fn variable(space: Arc<JetSpace>, axis: usize, value: f64) -> Jet {
        let mut c = vec![Complex64::ZERO; space.len()];
        c[0] = Complex64::new(value, 0.0);
        if space.ord >= 1 {
            let mut e = vec![0u8; space.n];
            e[axis] = 1;
            let slot = space.slot(&e).expect("first-order slot");
            c[slot] = Complex64::new(1.0, 0.0);
        }
        Jet { space, c }
    }

    pub fn zero(space: Arc<JetSpace>) -> Jet {
        let c = vec![Complex64::ZERO; space.len()];
        Jet { space, c }
    }

    pub fn value(&self) -> Complex64 {
        self.c[0]
    }

    /// ∂^β f = coeff(β)·β!.
    pub fn derivative(&self, beta: &[u8]) -> Option<Complex64> {
        let slot = self.space.slot(beta)?;
        let fact: f64 = beta.iter().map(|&b| factorial(b as usize)).product();
        Some(self.c[slot] * fact)
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let mut out = self.clone();
        for (a, b) in out.c.iter_mut().zip(&other.c) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let mut out = self.clone();
        for (a, b) in out.c.iter_mut().zip(&other.c) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, v: Complex64) -> Jet {
        let mut out = self.clone();
        for a in &mut out.c {
            *a *= v;
        }
        out
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let len = self.space.len();
        let mut out = Jet::zero(self.space.clone());
        for i in 0..len {
            let a = self.c[i];
            if a == Complex64::ZERO {
                continue;
            }
            for j in 0..len {
                let b = other.c[j];
                if b == Complex64::ZERO {
                    continue;
                }
                let slot = self.space.prod[i * len + j];
                if slot != u32::MAX {
                    out.c[slot as usize] += a * b;
                }
            }
        }
        out
    }

    pub fn int_pow(&self, e: u32) -> Jet {
        let mut out = Jet::constant(self.space.clone(), Complex64::new(1.0, 0.0));
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                out = out.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        out
    }

    /// g^a for real exponent a; the constant term must be nonzero (and is
    /// real positive wherever this is used).
    pub fn powf(&self, a: f64) -> Jet {
        if a == 0.0 {
            return Jet::constant(self.space.clone(), Complex64::new(1.0, 0.0));
        }
        let g0 = self.c[0];
        debug_assert!(g0.norm() > 0.0, "powf at vanishing constant term");
        // u = g/g0 − 1 has zero constant term
        let u = {
            let mut t = self.scale(g0.inv());
            t.c[0] -= Complex64::new(1.0, 0.0);
            t
        };
        let mut out = Jet::constant(self.space.clone(), Complex64::new(1.0, 0.0));
        let mut upow = Jet::constant(self.space.clone(), Complex64::new(1.0, 0.0));
        let mut binom = 1.0;
        for k in 1..=self.space.ord {
            binom *= (a - (k as f64 - 1.0)) / k as f64;
            upow = upow.mul(&u);
            out = out.add(&upow.scale(Complex64::new(binom, 0.0)));
        }
        out.scale(g0.powf(a))
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    pub fn exp(&self) -> Jet {
        let g0 = self.c[0];
        let mut u = self.clone();
        u.c[0] = Complex64::ZERO;
        let mut out = Jet::constant(self.space.clone(), Complex64::new(1.0, 0.0));
        let mut term = Jet::constant(self.space.clone(), Complex64::new(1.0, 0.0));
        for k in 1..=self.space.ord {
            term = term.mul(&u).scale(Complex64::new(1.0 / k as f64, 0.0));
            out = out.add(&term);
        }
        out.scale(g0.exp())
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

// ---------------------------------------------------------------------------
// smooth cutoffs for the toy family (closed-form, jet-differentiable)
// ---------------------------------------------------------------------------

/// s(t) = exp(−1/t) for t > 0, else 0.
fn cutoff_s(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 on (−∞, plateau], 0 on [hi, ∞).
fn smooth_cut(x: f64, plateau: f64, hi: f64) -> f64 {
    if x <= plateau {
        1.0
    } else if x >= hi {
        0.0
    } else {
        let a = cutoff_s(hi - x);
        let b = cutoff_s(x - plateau);
        a / (a + b)
    }
}

fn smooth_cut_jet(x: &Jet, plateau: f64, hi: f64) -> Jet {
    let x0 = x.value().re;
    if x0 <= plateau {
        return Jet::constant(x.space.clone(), Complex64::new(1.0, 0.0));
    }
    if x0 >= hi {
        return Jet::zero(x.space.clone());
    }
    let hi_j = Jet::constant(x.space.clone(), Complex64::new(hi, 0.0));
    let pl_j = Jet::constant(x.space.clone(), Complex64::new(plateau, 0.0));
    let a = hi_j.sub(x).recip().scale(Complex64::new(-1.0, 0.0)).exp();
    let b = x.sub(&pl_j).recip().scale(Complex64::new(-1.0, 0.0)).exp();
    a.mul(&a.add(&b).recip())
}

// ---------------------------------------------------------------------------
// multiplier specification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToyVariant {
    /// m_{d,δ}: the full multiplier with cutoff ψ(ζ).
    Full,
    /// m_{d,δ,j}: the dyadic piece with cutoff φ(2^{−j}ζ).
    Piece,
    /// m̃_{d,δ,j}: the rescaled piece with phase scale 2^{−j d'δ} and φ(ζ).
    Rescaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyMultiplierParams {
    pub d: u32,
    pub delta: f64,
    pub j: i32,
    /// inner plateau of the cutoff ψ (support is always [−2, 2])
    pub psi_plateau: f64,
}

impl ToyMultiplierParams {
    pub fn new(d: u32, delta: f64, j: i32) -> Result<Self> {
        if d < 2 {
            return Err(TilekitError::invalid("toy multiplier requires d >= 2"));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(TilekitError::invalid("toy multiplier requires 0 <= delta <= 1"));
        }
        if j > 0 {
            return Err(TilekitError::invalid("toy multiplier piece index must be <= 0"));
        }
        Ok(ToyMultiplierParams { d, delta, j, psi_plateau: 1.5 })
    }

    pub fn d_prime(&self) -> f64 {
        self.d as f64 / (self.d as f64 - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MultiplierKind {
    Constant(f64),
    /// ξ₁^{2L/α₁} / Σ_i ξ_i^{2L/α_i} with L = lcm(α): smooth, real, degree 0.
    SmoothRational,
    /// exp(iπ · SmoothRational): smooth, unimodular.
    SmoothPhase,
    Toy {
        params: ToyMultiplierParams,
        variant: ToyVariant,
    },
}

/// An anisotropically homogeneous symbol, evaluable pointwise and
/// jet-differentiable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSpec {
    pub alpha: AnisoExponent,
    pub kind: MultiplierKind,
    pub nu_max: u32,
}

fn lcm(a: u64, b: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

impl MultiplierSpec {
    pub fn constant(alpha: AnisoExponent, c: f64) -> Self {
        MultiplierSpec { alpha, kind: MultiplierKind::Constant(c), nu_max: u32::MAX }
    }

    pub fn smooth_builtin(alpha: AnisoExponent) -> Self {
        MultiplierSpec { alpha, kind: MultiplierKind::SmoothRational, nu_max: 64 }
    }

    pub fn smooth_phase(alpha: AnisoExponent) -> Self {
        MultiplierSpec { alpha, kind: MultiplierKind::SmoothPhase, nu_max: 64 }
    }

    pub fn toy(params: ToyMultiplierParams, variant: ToyVariant) -> Result<Self> {
        let alpha = AnisoExponent::new(vec![1, params.d])?;
        Ok(MultiplierSpec {
            alpha,
            kind: MultiplierKind::Toy { params, variant },
            nu_max: 64,
        })
    }

    pub fn name(&self) -> String {
        match &self.kind {
            MultiplierKind::Constant(c) => format!("constant({c})"),
            MultiplierKind::SmoothRational => "smooth-rational".into(),
            MultiplierKind::SmoothPhase => "smooth-phase".into(),
            MultiplierKind::Toy { params, variant } => format!(
                "toy-{:?}(d={}, delta={}, j={})",
                variant, params.d, params.delta, params.j
            ),
        }
    }

    /// Exponents 2L/α_i of the rational builtin.
    fn rational_exps(&self) -> Vec<u32> {
        let l = self
            .alpha
            .components()
            .iter()
            .fold(1u64, |acc, &a| lcm(acc, a as u64));
        self.alpha
            .components()
            .iter()
            .map(|&a| (2 * l / a as u64) as u32)
            .collect()
    }

    /// Support interval of the toy cutoff in ζ, per variant.
    fn toy_zeta_support(params: &ToyMultiplierParams, variant: ToyVariant) -> (f64, f64) {
        match variant {
            ToyVariant::Full => (0.0, 2.0),
            // φ(x) = ψ(x) − ψ(2x) is supported in [plateau/2, 2]
            ToyVariant::Rescaled => (params.psi_plateau / 2.0, 2.0),
            ToyVariant::Piece => {
                let s = pow2(params.j);
                (params.psi_plateau / 2.0 * s, 2.0 * s)
            }
        }
    }

    /// Pointwise evaluation with the convention m(0) := 0. For ξ ≠ 0 the
    /// point is projected to the unit ρ-sphere first (a dyadic pre-scaling
    /// makes power-of-two homogeneity exact in floating point).
    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        if xi.iter().all(|&v| v == 0.0) {
            return Complex64::ZERO;
        }
        let rho = aniso_norm(xi, &self.alpha);
        if rho == 0.0 || !rho.is_finite() {
            return Complex64::ZERO;
        }
        // dyadic pre-scale so the residual norm is in [1, 2)
        let q = rho.log2().floor() as i32;
        let pre: Vec<f64> = xi
            .iter()
            .zip(self.alpha.components())
            .map(|(&v, &a)| v * pow2(-q * a as i32))
            .collect();
        let r = aniso_norm(&pre, &self.alpha);
        let inv = 1.0 / r;
        let proj = dilate(&pre, inv, &self.alpha).expect("positive dilation");
        self.value_at(&proj)
    }

    /// The symbol value at a point (no projection; formulas are homogeneous).
    fn value_at(&self, xi: &[f64]) -> Complex64 {
        match &self.kind {
            MultiplierKind::Constant(c) => Complex64::new(*c, 0.0),
            MultiplierKind::SmoothRational => {
                let exps = self.rational_exps();
                let s: Vec<f64> = xi
                    .iter()
                    .zip(&exps)
                    .map(|(&v, &e)| v.powi(e as i32))
                    .collect();
                let denom: f64 = s.iter().sum();
                if denom == 0.0 {
                    return Complex64::ZERO;
                }
                Complex64::new(s[0] / denom, 0.0)
            }
            MultiplierKind::SmoothPhase => {
                let exps = self.rational_exps();
                let s: Vec<f64> = xi
                    .iter()
                    .zip(&exps)
                    .map(|(&v, &e)| v.powi(e as i32))
                    .collect();
                let denom: f64 = s.iter().sum();
                if denom == 0.0 {
                    return Complex64::ZERO;
                }
                Complex64::from_polar(1.0, std::f64::consts::PI * s[0] / denom)
            }
            MultiplierKind::Toy { params, variant } => {
                let (x, e) = (xi[0], xi[1]);
                if x <= 0.0 || e <= 0.0 {
                    return Complex64::ZERO;
                }
                let zeta = e.powf(1.0 / params.d as f64) / x;
                let (lo, hi) = Self::toy_zeta_support(params, *variant);
                if zeta <= lo || zeta >= hi {
                    return Complex64::ZERO;
                }
                let dp = params.d_prime();
                let plateau = params.psi_plateau;
                let cut = match variant {
                    ToyVariant::Full => smooth_cut(zeta, plateau, 2.0),
                    ToyVariant::Piece => {
                        let z = zeta * pow2(-params.j);
                        smooth_cut(z, plateau, 2.0) - smooth_cut(2.0 * z, plateau, 2.0)
                    }
                    ToyVariant::Rescaled => {
                        smooth_cut(zeta, plateau, 2.0) - smooth_cut(2.0 * zeta, plateau, 2.0)
                    }
                };
                let phase_scale = match variant {
                    ToyVariant::Rescaled => (2f64).powf(-(params.j as f64) * dp * params.delta),
                    _ => 1.0,
                };
                let amp = zeta.powf(dp / 2.0) * cut;
                let phase = phase_scale * zeta.powf(-dp * params.delta);
                Complex64::from_polar(amp, phase)
            }
        }
    }

    /// Ambient-coordinate jet of the symbol at ξ, truncated at total order
    /// `ord`. The seed is the raw point (no sphere projection).
    pub fn jet_at(&self, xi: &[f64], ord: usize) -> Jet {
        let space = JetSpace::get(self.alpha.dim(), ord);
        let vars: Vec<Jet> = (0..self.alpha.dim())
            .map(|i| Jet::variable(space.clone(), i, xi[i]))
            .collect();
        match &self.kind {
            MultiplierKind::Constant(c) => Jet::constant(space, Complex64::new(*c, 0.0)),
            MultiplierKind::SmoothRational | MultiplierKind::SmoothPhase => {
                let exps = self.rational_exps();
                let s: Vec<Jet> = vars
                    .iter()
                    .zip(&exps)
                    .map(|(v, &e)| v.int_pow(e))
                    .collect();
                let mut denom = s[0].clone();
                for t in &s[1..] {
                    denom = denom.add(t);
                }
                if denom.value().norm() == 0.0 {
                    return Jet::zero(space);
                }
                let ratio = s[0].mul(&denom.recip());
                match self.kind {
                    MultiplierKind::SmoothRational => ratio,
                    _ => ratio
                        .scale(Complex64::new(0.0, std::f64::consts::PI))
                        .exp(),
                }
            }
            MultiplierKind::Toy { params, variant } => {
                let (x0, e0) = (xi[0], xi[1]);
                if x0 <= 0.0 || e0 <= 0.0 {
                    return Jet::zero(space);
                }
                let zeta0 = e0.powf(1.0 / params.d as f64) / x0;
                let (lo, hi) = Self::toy_zeta_support(params, *variant);
                if zeta0 <= lo || zeta0 >= hi {
                    return Jet::zero(space);
                }
                let dp = params.d_prime();
                let plateau = params.psi_plateau;
                let zeta = vars[1].powf(1.0 / params.d as f64).mul(&vars[0].recip());
                let cut = match variant {
                    ToyVariant::Full => smooth_cut_jet(&zeta, plateau, 2.0),
                    ToyVariant::Piece => {
                        let z = zeta.scale(Complex64::new(pow2(-params.j), 0.0));
                        let two_z = z.scale(Complex64::new(2.0, 0.0));
                        smooth_cut_jet(&z, plateau, 2.0).sub(&smooth_cut_jet(&two_z, plateau, 2.0))
                    }
                    ToyVariant::Rescaled => {
                        let two_z = zeta.scale(Complex64::new(2.0, 0.0));
                        smooth_cut_jet(&zeta, plateau, 2.0)
                            .sub(&smooth_cut_jet(&two_z, plateau, 2.0))
                    }
                };
                let phase_scale = if let ToyVariant::Rescaled = variant {
                    (2f64).powf(-(params.j as f64) * dp * params.delta)
                } else {
                    1.0
                };
                let amp = zeta.powf(dp / 2.0).mul(&cut);
                let osc = zeta
                    .powf(-dp * params.delta)
                    .scale(Complex64::new(0.0, phase_scale))
                    .exp();
                amp.mul(&osc)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// sphere sampling and derivative norms
// ---------------------------------------------------------------------------

/// Quasi-uniform samples of the unit ρ-sphere (the boundary of [−1,1]^n),
/// face by face with `per_axis` midpoints per free axis.
pub fn sphere_samples(alpha: &AnisoExponent, per_axis: usize) -> Vec<Vec<f64>> {
    let n = alpha.dim();
    let mut out = Vec::new();
    if n == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    for face_axis in 0..n {
        for sign in [-1.0, 1.0] {
            let free: Vec<usize> = (0..n).filter(|&i| i != face_axis).collect();
            let mut counters = vec![0usize; free.len()];
            loop {
                let mut pt = vec![0.0; n];
                pt[face_axis] = sign;
                for (c, &axis) in counters.iter().zip(&free) {
                    pt[axis] = -1.0 + (2 * c + 1) as f64 / per_axis as f64;
                }
                out.push(pt);
                let mut carry = 0;
                loop {
                    if carry == counters.len() {
                        break;
                    }
                    counters[carry] += 1;
                    if counters[carry] < per_axis {
                        break;
                    }
                    counters[carry] = 0;
                    carry += 1;
                }
                if carry == counters.len() {
                    break;
                }
            }
        }
    }
    out
}

/// All multi-indices with |β| ≤ ν.
pub fn multi_indices(n: usize, nu: usize) -> Vec<Vec<u8>> {
    enumerate_exps(n, nu)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for t in 0..k {
        v = v * (n - t) as f64 / (t + 1) as f64;
    }
    v
}

/// Central-difference estimate of ∂^β m(ξ) with step h.
fn central_difference(m: &MultiplierSpec, xi: &[f64], beta: &[u8], h: f64) -> Complex64 {
    // tensor stencil: axis i contributes offsets (β_i/2 − t)·h with weights
    // (−1)^t C(β_i, t)
    let n = xi.len();
    let mut points: Vec<(Vec<f64>, f64)> = vec![(xi.to_vec(), 1.0)];
    for i in 0..n {
        let k = beta[i] as usize;
        if k == 0 {
            continue;
        }
        let mut next = Vec::with_capacity(points.len() * (k + 1));
        for (pt, w) in &points {
            for t in 0..=k {
                let mut p = pt.clone();
                p[i] += (k as f64 / 2.0 - t as f64) * h;
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                next.push((p, w * sign * binomial(k, t)));
            }
        }
        points = next;
    }
    let total_order: usize = beta.iter().map(|&b| b as usize).sum();
    let scale = h.powi(total_order as i32);
    points
        .iter()
        .map(|(p, w)| m.eval(p) * *w)
        .sum::<Complex64>()
        / scale
}

/// Finite-difference estimate of ‖m‖_{𝓜^ν}: the sup over multi-indices
/// |β| ≤ ν and a face-by-face sphere sample of central differences at
/// h = 1e−3 with one Richardson halving.
pub fn multiplier_norm(m: &MultiplierSpec, nu: u32, sphere_per_axis: usize) -> Result<f64> {
    if nu > m.nu_max {
        return Err(TilekitError::invalid(format!(
            "requested order {nu} exceeds declared nu_max {}",
            m.nu_max
        )));
    }
    if m.alpha.dim() >= 2 && sphere_per_axis < 16 {
        return Err(TilekitError::invalid("need at least 16 sphere samples per face"));
    }
    let samples = sphere_samples(&m.alpha, sphere_per_axis);
    let betas = multi_indices(m.alpha.dim(), nu as usize);
    let h = 1e-3;
    let mut best = 0.0f64;
    let mut any_nonzero = false;
    for pt in &samples {
        if m.eval(pt).norm() > 0.0 {
            any_nonzero = true;
        }
        for beta in &betas {
            let order: usize = beta.iter().map(|&b| b as usize).sum();
            let v = if order == 0 {
                m.eval(pt)
            } else {
                let d_h = central_difference(m, pt, beta, h);
                let d_h2 = central_difference(m, pt, beta, h / 2.0);
                // Richardson: central stencils have O(h²) error
                (d_h2 * 4.0 - d_h) / 3.0
            };
            best = best.max(v.norm());
        }
    }
    if !any_nonzero {
        return Err(TilekitError::DegenerateMultiplier(m.name()));
    }
    Ok(best)
}

/// Exact-derivative counterpart of [`multiplier_norm`] via truncated Taylor
/// jets on the same sphere sample.
pub fn multiplier_norm_exact(m: &MultiplierSpec, nu: u32, sphere_per_axis: usize) -> Result<f64> {
    if let MultiplierKind::Constant(c) = m.kind {
        return Ok(c.abs());
    }
    let samples = sphere_samples(&m.alpha, sphere_per_axis);
    let betas = multi_indices(m.alpha.dim(), nu as usize);
    let mut best = 0.0f64;
    let mut any_nonzero = false;
    for pt in &samples {
        let jet = m.jet_at(pt, nu as usize);
        if jet.value().norm() > 0.0 {
            any_nonzero = true;
        }
        for beta in &betas {
            if let Some(d) = jet.derivative(beta) {
                best = best.max(d.norm());
            }
        }
    }
    if !any_nonzero {
        return Err(TilekitError::DegenerateMultiplier(m.name()));
    }
    Ok(best)
}

/// Samples m on the frequency lattice (m(0) := 0) and returns the physical
/// kernel K with K̂ = m.
pub fn kernel(m: &MultiplierSpec, spec: &GridSpec) -> GridFunction {
    let mut hat = GridFunction::zero(spec.clone(), Repr::Frequency);
    let strides = spec.strides();
    let n = spec.dim();
    let mut xi = vec![0.0f64; n];
    for flat in 0..hat.samples.len() {
        let mut rem = flat;
        for i in 0..n {
            let u = rem / strides[i];
            rem %= strides[i];
            xi[i] = spec.freq_signed(i, u) as f64 * spec.freq_spacing(i);
        }
        hat.samples[flat] = m.eval(&xi);
    }
    hat.to_physical()
}

// ---------------------------------------------------------------------------
// the cone function θ_r
// ---------------------------------------------------------------------------

/// Quadrature resolution for θ_r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaQuad {
    pub t_nodes: usize,
    pub zeta_nodes: usize,
}

impl Default for ThetaQuad {
    fn default() -> Self {
        ThetaQuad { t_nodes: 512, zeta_nodes: 64 }
    }
}

use crate::geometry::AnisoExponent as Alpha;
use crate::tiles::BitVector;

/// θ_r(ξ) = ∫∫ χ(ζ)·1_{Q_r}(ζ − δ_{1/t}ξ) dt/t dζ with χ = |φ̂|²(· − 1/4)
/// and Q_r = [r/2, (r+1)/2], up to the fixed quadrature normalization.
///
/// The t-integration is truncated to the exact interval where the integrand
/// can be nonzero (computed from the support boxes) and sampled log-uniformly;
/// the ζ-integral is a tensor midpoint rule over the clipped support box,
/// evaluated axis by axis (the integrand is a product).
pub fn theta_r(
    r: &BitVector,
    xi: &[f64],
    bump: &BumpSpec,
    alpha: &Alpha,
    quad: &ThetaQuad,
) -> Result<f64> {
    if r.is_zero() {
        return Err(TilekitError::invalid("theta_r requires r != 0"));
    }
    if xi.iter().all(|&v| v == 0.0) {
        return Err(TilekitError::invalid("theta_r undefined at xi = 0"));
    }
    let n = alpha.dim();
    if xi.len() != n || r.len() != n {
        return Err(TilekitError::invalid("dimension mismatch in theta_r"));
    }
    // per-axis box B_i = [1/4 − b0/2 − (r_i+1)/2, 1/4 + b0/2 − r_i/2];
    // the t-window is {t > 0 : ξ_i·t^{−α_i} ∈ B_i for all i}
    let mut t_lo: f64 = 0.0;
    let mut t_hi = f64::INFINITY;
    for i in 0..n {
        let a = alpha.component(i);
        let b_lo = 0.25 - bump.b0 / 2.0 - (r.bit(i) as f64 + 1.0) / 2.0;
        let b_hi = 0.25 + bump.b0 / 2.0 - r.bit(i) as f64 / 2.0;
        let v = xi[i];
        if v == 0.0 {
            if b_lo > 0.0 || b_hi < 0.0 {
                return Ok(0.0);
            }
            continue;
        }
        if v > 0.0 {
            if b_hi <= 0.0 {
                return Ok(0.0);
            }
            t_lo = t_lo.max(root_pos(v / b_hi, a));
            if b_lo > 0.0 {
                t_hi = t_hi.min(root_pos(v / b_lo, a));
            }
        } else {
            if b_lo >= 0.0 {
                return Ok(0.0);
            }
            t_lo = t_lo.max(root_pos(v / b_lo, a));
            if b_hi < 0.0 {
                t_hi = t_hi.min(root_pos(v / b_hi, a));
            }
        }
    }
    if !(t_lo > 0.0) || !t_hi.is_finite() || t_hi <= t_lo {
        return Ok(0.0);
    }
    let log_span = (t_hi / t_lo).ln();
    let dt = log_span / quad.t_nodes as f64;
    let mut total = 0.0;
    for jt in 0..quad.t_nodes {
        let t = t_lo * ((jt as f64 + 0.5) * dt).exp();
        // inner ζ integral: product of clipped per-axis midpoint sums
        let mut inner = 1.0;
        for i in 0..n {
            let a = alpha.component(i) as i32;
            let v = xi[i] / t.powi(a);
            let lo = (0.25 - bump.b0 / 2.0).max(v + r.bit(i) as f64 / 2.0);
            let hi = (0.25 + bump.b0 / 2.0).min(v + (r.bit(i) as f64 + 1.0) / 2.0);
            if hi <= lo {
                inner = 0.0;
                break;
            }
            let w = (hi - lo) / quad.zeta_nodes as f64;
            let mut axis_sum = 0.0;
            for c in 0..quad.zeta_nodes {
                let z = lo + (c as f64 + 0.5) * w;
                let p = bump.profile(z - 0.25);
                axis_sum += p * p;
            }
            inner *= axis_sum * w;
        }
        total += inner * dt;
    }
    Ok(total)
}

/// (v)^{1/a} for positive v, exact under power-of-two scaling of v^... the
/// base (keeps the θ_r t-window covariant under dyadic dilations).
fn root_pos(v: f64, a: u32) -> f64 {
    debug_assert!(v > 0.0);
    if a == 1 {
        return v;
    }
    let e = v.log2().floor() as i32;
    let q = e.div_euclid(a as i32);
    let res = v * pow2(-q * a as i32);
    pow2(q) * res.powf(1.0 / a as f64)
}

/// The generating box of the cone Θ_r: per axis
/// [1/4 − b1/2 − (r_i+1)/2, 1/4 + b1/2 − r_i/2].
pub fn cone_box(r: &BitVector, bump: &BumpSpec, alpha: &Alpha) -> (Vec<f64>, Vec<f64>) {
    let n = alpha.dim();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        lo.push(0.25 - bump.b1 / 2.0 - (r.bit(i) as f64 + 1.0) / 2.0);
        hi.push(0.25 + bump.b1 / 2.0 - r.bit(i) as f64 / 2.0);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha12() -> AnisoExponent {
        AnisoExponent::new(vec![1, 2]).unwrap()
    }

    #[test]
    fn constant_multiplier() {
        let m = MultiplierSpec::constant(alpha12(), 1.0);
        assert_eq!(m.eval(&[0.0, 0.0]), Complex64::ZERO);
        for xi in [[1.0, 0.5], [-3.0, 2.0], [1e-6, -1e6]] {
            assert_eq!(m.eval(&xi), Complex64::new(1.0, 0.0));
        }
        for nu in 0..4 {
            assert_eq!(multiplier_norm(&m, nu, 16).unwrap(), 1.0);
            assert_eq!(multiplier_norm_exact(&m, nu, 16).unwrap(), 1.0);
        }
    }

    #[test]
    fn eval_pow2_homogeneity_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let ms = [
            MultiplierSpec::smooth_builtin(alpha12()),
            MultiplierSpec::smooth_phase(alpha12()),
            MultiplierSpec::toy(ToyMultiplierParams::new(2, 1.0, 0).unwrap(), ToyVariant::Full)
                .unwrap(),
        ];
        for m in &ms {
            for _ in 0..100 {
                let xi = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                if xi[0] == 0.0 && xi[1] == 0.0 {
                    continue;
                }
                let scaled = [2.0 * xi[0], 4.0 * xi[1]];
                let a = m.eval(&xi);
                let b = m.eval(&scaled);
                assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn toy_value_at_unit_point() {
        let m = MultiplierSpec::toy(ToyMultiplierParams::new(2, 0.0, 0).unwrap(), ToyVariant::Full)
            .unwrap();
        // ζ = 1: value = 1·e^{i·1}·ψ(1) = e^i
        let v = m.eval(&[1.0, 1.0]);
        let expect = Complex64::from_polar(1.0, 1.0);
        assert!((v - expect).norm() < 1e-12);
    }

    #[test]
    fn toy_delta_zero_modulus() {
        let m = MultiplierSpec::toy(ToyMultiplierParams::new(3, 0.0, 0).unwrap(), ToyVariant::Full)
            .unwrap();
        let dp = 1.5; // d' for d = 3
        for (x, e) in [(1.0, 0.5), (1.0, 1.2), (2.0, 8.0)] {
            let zeta = (e as f64).powf(1.0 / 3.0) / x;
            let expect = zeta.powf(dp / 2.0) * smooth_cut(zeta, 1.5, 2.0);
            let v = m.eval(&[x, e]);
            assert!((v.norm() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn toy_vanishes_off_quadrant_and_support() {
        let m = MultiplierSpec::toy(ToyMultiplierParams::new(2, 0.5, 0).unwrap(), ToyVariant::Full)
            .unwrap();
        assert_eq!(m.eval(&[-1.0, 1.0]), Complex64::ZERO);
        assert_eq!(m.eval(&[1.0, -1.0]), Complex64::ZERO);
        // ζ = 3 > 2: outside the cutoff
        assert_eq!(m.eval(&[1.0, 9.0]), Complex64::ZERO);
    }

    #[test]
    fn dyadic_partition_of_unity() {
        // Σ_{j≤0} φ(2^{−j} x) = ψ(x) = 1 on (0, 1/2]
        for t in 1..=50 {
            let x = 0.5 * t as f64 / 50.0;
            let mut sum = 0.0;
            for j in (-40..=0).rev() {
                let z = x * pow2(-j);
                sum += smooth_cut(z, 1.5, 2.0) - smooth_cut(2.0 * z, 1.5, 2.0);
            }
            assert!((sum - 1.0).abs() < 1e-12, "partition fails at {x}: {sum}");
        }
    }

    #[test]
    fn jet_value_matches_eval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let ms = [
            MultiplierSpec::smooth_builtin(alpha12()),
            MultiplierSpec::smooth_phase(alpha12()),
            MultiplierSpec::toy(
                ToyMultiplierParams::new(2, 0.3, -2).unwrap(),
                ToyVariant::Rescaled,
            )
            .unwrap(),
        ];
        for m in &ms {
            for _ in 0..50 {
                let xi = [rng.gen_range(0.2..1.5), rng.gen_range(0.2..1.5)];
                let direct = m.value_at(&xi);
                let jet = m.jet_at(&xi, 3);
                assert!(
                    (jet.value() - direct).norm() < 1e-10 * (1.0 + direct.norm()),
                    "{:?} at {xi:?}",
                    m.name()
                );
            }
        }
    }

    #[test]
    fn jet_derivatives_match_finite_differences() {
        let m = MultiplierSpec::smooth_builtin(alpha12());
        let pts = [[1.0, 0.3], [1.0, -0.7], [0.5, 1.0]];
        for pt in &pts {
            let jet = m.jet_at(pt, 2);
            for beta in multi_indices(2, 2) {
                let order: usize = beta.iter().map(|&b| b as usize).sum();
                if order == 0 {
                    continue;
                }
                let fd = central_difference(&m, pt, &beta, 1e-4);
                let exact = jet.derivative(&beta).unwrap();
                assert!(
                    (fd - exact).norm() < 1e-5 * (1.0 + exact.norm()),
                    "beta {beta:?} at {pt:?}: fd={fd}, jet={exact}"
                );
            }
        }
    }

    #[test]
    fn fd_norm_close_to_exact_norm_low_order() {
        let m = MultiplierSpec::smooth_builtin(alpha12());
        for nu in [0u32, 1, 2] {
            let fd = multiplier_norm(&m, nu, 24).unwrap();
            let exact = multiplier_norm_exact(&m, nu, 24).unwrap();
            assert!(
                (fd - exact).abs() < 2e-4 * (1.0 + exact),
                "nu={nu}: fd={fd}, exact={exact}"
            );
        }
    }

    #[test]
    fn norm_monotone_in_nu_and_sup_at_zero() {
        let m = MultiplierSpec::smooth_phase(alpha12());
        let n0 = multiplier_norm(&m, 0, 16).unwrap();
        let n1 = multiplier_norm(&m, 1, 16).unwrap();
        let n2 = multiplier_norm(&m, 2, 16).unwrap();
        assert!((n0 - 1.0).abs() < 1e-12, "unimodular sup: {n0}");
        assert!(n1 >= n0 && n2 >= n1);
    }

    #[test]
    fn symbol_estimate_off_sphere() {
        // |∂_i^ν m(ξ)| ≤ ‖m‖_{𝓜^ν}·ρ(ξ)^{−ν α_i} at off-sphere points
        use rand::{Rng, SeedableRng};
        let alpha = alpha12();
        let m = MultiplierSpec::smooth_builtin(alpha.clone());
        let nu = 2u32;
        let norm = multiplier_norm_exact(&m, nu, 64).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let xi = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let rho = aniso_norm(&xi, &alpha);
            if rho < 0.3 {
                continue;
            }
            let jet = m.jet_at(&xi, nu as usize);
            for i in 0..2 {
                let mut beta = vec![0u8; 2];
                beta[i] = nu as u8;
                let d = jet.derivative(&beta).unwrap().norm();
                // the sphere sup is sampled, so allow a small sampling slack
                let bound = norm * rho.powf(-(nu as f64) * alpha.component(i) as f64);
                assert!(
                    d <= bound * 1.05 + 1e-12,
                    "axis {i} at {xi:?}: {d} > {bound}"
                );
            }
        }
    }

    #[test]
    fn kernel_of_identity_is_delta() {
        let alpha = alpha12();
        let spec = GridSpec::new(alpha.clone(), 1, -3).unwrap();
        let m = MultiplierSpec::constant(alpha, 1.0);
        let k = kernel(&m, &spec);
        let peak = k.samples[0].norm();
        let energy_at_zero = peak * peak;
        let total: f64 = k.samples.iter().map(|v| v.norm_sqr()).sum();
        assert!(energy_at_zero / total > 0.99, "delta concentration");
    }

    #[test]
    fn kernel_of_real_even_symbol_is_real() {
        let alpha = alpha12();
        let spec = GridSpec::new(alpha.clone(), 1, -3).unwrap();
        // SmoothRational is even in each variable (even powers)
        let m = MultiplierSpec::smooth_builtin(alpha);
        let k = kernel(&m, &spec);
        let linf = k
            .samples
            .iter()
            .map(|v| v.re.abs())
            .fold(0.0f64, f64::max);
        for v in &k.samples {
            assert!(v.im.abs() < 1e-10 * (1.0 + linf));
        }
    }

    #[test]
    fn kernel_round_trip_recovers_symbol() {
        let alpha = alpha12();
        let spec = GridSpec::new(alpha.clone(), 1, -3).unwrap();
        let m = MultiplierSpec::smooth_phase(alpha);
        let k = kernel(&m, &spec);
        let hat = k.to_frequency();
        let strides = spec.strides();
        for flat in 0..hat.samples.len() {
            let mut rem = flat;
            let mut xi = vec![0.0; 2];
            for i in 0..2 {
                let u = rem / strides[i];
                rem %= strides[i];
                xi[i] = spec.freq_signed(i, u) as f64 * spec.freq_spacing(i);
            }
            let expect = m.eval(&xi);
            assert!((hat.samples[flat] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn theta_homogeneity_dyadic_exact() {
        let alpha = alpha12();
        let bump = BumpSpec::default_params();
        let quad = ThetaQuad::default();
        let r = BitVector::new(vec![1, 1]).unwrap();
        let xi = [-0.5, -0.3];
        let t1 = theta_r(&r, &xi, &bump, &alpha, &quad).unwrap();
        let t2 = theta_r(&r, &[2.0 * xi[0], 4.0 * xi[1]], &bump, &alpha, &quad).unwrap();
        assert!(t1 > 0.0);
        assert!((t1 - t2).abs() <= 1e-13 * t1, "{t1} vs {t2}");
    }

    #[test]
    fn theta_homogeneity_general_dilation() {
        let alpha = alpha12();
        let bump = BumpSpec::default_params();
        let quad = ThetaQuad::default();
        let r = BitVector::new(vec![1, 0]).unwrap();
        let xi = [-0.4, 0.1];
        let t1 = theta_r(&r, &xi, &bump, &alpha, &quad).unwrap();
        let lam: f64 = 3.7;
        let scaled = [lam * xi[0], lam * lam * xi[1]];
        let t2 = theta_r(&r, &scaled, &bump, &alpha, &quad).unwrap();
        assert!(t1 > 0.0);
        assert!((t1 - t2).abs() < 1e-4 * t1, "{t1} vs {t2}");
    }

    #[test]
    fn theta_nonnegative_and_zero_cases() {
        let alpha = alpha12();
        let bump = BumpSpec::default_params();
        let quad = ThetaQuad::default();
        let r = BitVector::new(vec![1, 0]).unwrap();
        // positive coordinate on an r_i = 1 axis kills the cone
        assert_eq!(theta_r(&r, &[0.5, 0.2], &bump, &alpha, &quad).unwrap(), 0.0);
        // zero coordinate on an r_i = 1 axis too
        assert_eq!(theta_r(&r, &[0.0, 0.2], &bump, &alpha, &quad).unwrap(), 0.0);
        assert!(theta_r(&r, &[0.0, 0.0], &bump, &alpha, &quad).is_err());
        assert!(theta_r(&BitVector::zeros(2), &[1.0, 1.0], &bump, &alpha, &quad).is_err());
    }

    #[test]
    fn theta_positive_on_cone_box() {
        let alpha = alpha12();
        let bump = BumpSpec::default_params();
        let quad = ThetaQuad::default();
        for r in BitVector::all_nonzero(2) {
            let (lo, hi) = cone_box(&r, &bump, &alpha);
            // center and corners of the generating box
            let mut pts = vec![vec![(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0]];
            for c in 0..4 {
                pts.push(vec![
                    if c & 1 == 0 { lo[0] } else { hi[0] },
                    if c & 2 == 0 { lo[1] } else { hi[1] },
                ]);
            }
            for pt in pts {
                let v = theta_r(&r, &pt, &bump, &alpha, &quad).unwrap();
                assert!(v > 0.0, "theta_{:?} at {pt:?} = {v}", r.bits());
            }
        }
    }
}
