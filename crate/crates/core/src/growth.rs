//! Growth functions in logarithmic scale coordinates.
//!
//! A spectrum `φ` is moved to `ξ(y) = β(e^{-y})`, and a growth function `g`
//! is assembled by concatenating blocks `f_n = ξ_{z_n}|[0,n]`,
//! `e_n = Ψ_{w_n}|[0,n]` and, when the Assouad dimension is to be raised,
//! `u_n(x) = α − (α−q_n)e^{−x}` on `[0, 1/n]`. The spectrum of the
//! associated Moran set is the limsup of
//! `Q(x, θ) = (g(x + log(1/θ)) − θ g(x))/(1−θ)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::SpectrumFn;
use crate::validation::{check_ad, GridSpec, ValidationReport, Worst};

/// Junction mismatch accepted by [`concatenate`].
pub const JUNCTION_TOL: f64 = 1e-9;

/// Default extent of the domain built by [`build_g`].
pub const DEFAULT_HORIZON: f64 = 256.0;

/// `ξ(y) = (1−e^{−y})φ(e^{−y}) = β(e^{−y})`.
#[derive(Clone, Debug)]
pub struct XiFn {
    phi: SpectrumFn,
}

impl XiFn {
    /// `ξ(y)` for `y > 0`.
    pub fn eval(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Domain(format!("y = {y} must be positive")));
        }
        Ok(self.value(y))
    }

    /// `ξ` on `[0, ∞)`, with `ξ(0) = 0`.
    pub fn value(&self, y: f64) -> f64 {
        self.phi.beta((-y).exp())
    }

    pub fn spectrum(&self) -> &SpectrumFn {
        &self.phi
    }
}

/// Builds `ξ` after checking admissibility of `f` on a 100-point grid.
pub fn xi_from_phi(f: &SpectrumFn) -> Result<XiFn> {
    let report = check_ad(f, &GridSpec::uniform(100));
    if !report.passed {
        return Err(Error::Argument("spectrum fails the admissibility check".into()));
    }
    Ok(XiFn { phi: f.clone() })
}

/// Checks `0 ≤ ξ(y2) − ξ(y1) ≤ e^{−y1} ξ(y2 − y1)` over all sample pairs.
pub fn check_xi_props(xi: &XiFn, samples: &[f64]) -> ValidationReport {
    let mut ys: Vec<f64> = samples.iter().copied().filter(|&y| y > 0.0).collect();
    ys.sort_by(f64::total_cmp);
    let (mut lower, mut upper) = (Worst::new(), Worst::new());
    for (i, &y1) in ys.iter().enumerate() {
        let v1 = xi.value(y1);
        for &y2 in &ys[i..] {
            let rise = xi.value(y2) - v1;
            lower.offer(-rise, &[y1, y2]);
            upper.offer(rise - (-y1).exp() * xi.value(y2 - y1), &[y1, y2]);
        }
    }
    let tol = crate::validation::DEFAULT_TOL;
    ValidationReport {
        passed: false,
        checks: vec![lower.outcome("xi-increasing", tol), upper.outcome("xi-increment", tol)],
        grid: None,
        notes: vec![format!("{} sample points", ys.len())],
        abstained: false,
    }
    .finish()
}

impl ValidationReport {
    fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }
}

/// One block of a concatenation, evaluated in local coordinates `[0, length]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    /// `ξ(y) + e^{−y}z`.
    Xi { z: f64, length: f64 },
    /// `w e^{−y}`.
    Psi { w: f64, length: f64 },
    /// `α − (α−q)e^{−y}`.
    Relax { alpha: f64, q: f64, length: f64 },
    /// The constant `value`.
    Constant { value: f64, length: f64 },
    /// Linear interpolation of `(ys, values)`, with `ys[0] = 0`.
    Table { ys: Vec<f64>, values: Vec<f64>, length: f64 },
}

impl Piece {
    pub fn length(&self) -> f64 {
        match *self {
            Piece::Xi { length, .. }
            | Piece::Psi { length, .. }
            | Piece::Relax { length, .. }
            | Piece::Constant { length, .. }
            | Piece::Table { length, .. } => length,
        }
    }

    fn eval(&self, y: f64, xi: Option<&XiFn>) -> f64 {
        match self {
            Piece::Xi { z, .. } => {
                xi.expect("xi pieces need a base spectrum").value(y) + (-y).exp() * z
            }
            Piece::Psi { w, .. } => w * (-y).exp(),
            Piece::Relax { alpha, q, .. } => alpha - (alpha - q) * (-y).exp(),
            Piece::Constant { value, .. } => *value,
            Piece::Table { ys, values, .. } => {
                let i = ys.partition_point(|&b| b <= y).clamp(1, ys.len() - 1) - 1;
                let (a, b) = (ys[i], ys[i + 1]);
                values[i] + (values[i + 1] - values[i]) * ((y - a) / (b - a))
            }
        }
    }
}

/// Start of block `n` in a built growth function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlockIndex {
    pub n: u32,
    pub x_n: f64,
    /// `z_n`, the value of `g` at `x_n`.
    pub z_n: f64,
    /// `w_n = ξ(n) + e^{−n} z_n`.
    pub w_n: f64,
    /// `q_n = e^{−n} w_n` when a relaxation block follows, otherwise `None`.
    pub q_n: Option<f64>,
}

/// Concatenation of [`Piece`]s on `(0, Σ lengths]`.
#[derive(Clone, Debug, Serialize)]
pub struct GrowthFn {
    pieces: Vec<Piece>,
    #[serde(skip)]
    starts: Vec<f64>,
    #[serde(skip)]
    xi: Option<Arc<XiFn>>,
    blocks: Vec<BlockIndex>,
    /// `g ≡ 0`: the spectrum is identically zero and no block structure exists.
    trivial: bool,
}

/// Concatenates pieces, checking continuity at each junction.
pub fn concatenate(pieces: Vec<Piece>, xi: Option<XiFn>) -> Result<GrowthFn> {
    if pieces.is_empty() {
        return Err(Error::Construction("no pieces".into()));
    }
    let xi = xi.map(Arc::new);
    let mut starts = Vec::with_capacity(pieces.len() + 1);
    let mut x = 0.0;
    for (i, p) in pieces.iter().enumerate() {
        if !(p.length() > 0.0) {
            return Err(Error::Construction(format!("piece {i} has non-positive length")));
        }
        if matches!(p, Piece::Xi { .. }) && xi.is_none() {
            return Err(Error::Construction(format!("piece {i} needs a base spectrum")));
        }
        if i > 0 {
            let prev = &pieces[i - 1];
            let left = prev.eval(prev.length(), xi.as_deref());
            let right = p.eval(0.0, xi.as_deref());
            if (left - right).abs() > JUNCTION_TOL {
                return Err(Error::Construction(format!(
                    "junction {i} mismatch: {left} vs {right}"
                )));
            }
        }
        starts.push(x);
        x += p.length();
    }
    starts.push(x);
    Ok(GrowthFn { pieces, starts, xi, blocks: Vec::new(), trivial: false })
}

impl GrowthFn {
    /// The constant function `s` on `(0, length]`.
    pub fn constant(s: f64, length: f64) -> Result<Self> {
        concatenate(vec![Piece::Constant { value: s, length }], None)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn blocks(&self) -> &[BlockIndex] {
        &self.blocks
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    pub fn domain_end(&self) -> f64 {
        *self.starts.last().unwrap()
    }

    pub fn xi(&self) -> Option<&XiFn> {
        self.xi.as_deref()
    }

    /// `g(x)` for `x ∈ (0, domain_end]`; a point on a junction belongs to the
    /// piece on its left. Outside the domain the first or last piece's
    /// formula is extended.
    pub fn eval(&self, x: f64) -> f64 {
        if self.trivial {
            return 0.0;
        }
        let k = self.starts[1..].partition_point(|&s| s < x).min(self.pieces.len() - 1);
        self.pieces[k].eval(x - self.starts[k], self.xi.as_deref())
    }

    pub fn try_eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= self.domain_end()) {
            return Err(Error::Range(format!("x = {x} outside (0, {}]", self.domain_end())));
        }
        Ok(self.eval(x))
    }

    /// `(g(x+τ) − θ g(x))/(1−θ)` with `τ = log(1/θ)`.
    pub fn quotient(&self, theta: f64, x: f64) -> f64 {
        let tau = -theta.ln();
        (self.eval(x + tau) - theta * self.eval(x)) / (1.0 - theta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

/// Builds the block concatenation for `target` on a domain reaching past
/// [`DEFAULT_HORIZON`]. `z1` defaults to `α/2`.
pub fn build_g(target: &SpectrumFn, alpha: f64, z1: Option<f64>) -> Result<GrowthFn> {
    build_g_with_horizon(target, alpha, z1, DEFAULT_HORIZON)
}

/// As [`build_g`], adding blocks until the domain reaches `horizon`.
///
/// With `α = φ(1)` the layout is `f_1, e_1, f_2, e_2, …` and block `n`
/// starts at `n(n−1)`. With `α > φ(1)` a relaxation block of length `1/n`
/// follows each `e_n`, and `q_n`, `z_{n+1}` are fixed by continuity.
pub fn build_g_with_horizon(
    target: &SpectrumFn,
    alpha: f64,
    z1: Option<f64>,
    horizon: f64,
) -> Result<GrowthFn> {
    const ALPHA_TOL: f64 = 1e-12;
    let d = target.dim().as_f64();
    let phi1 = target.value(1.0);
    if !(alpha >= phi1 - ALPHA_TOL) {
        return Err(Error::Argument(format!("alpha = {alpha} below phi(1) = {phi1}")));
    }
    if alpha > d + ALPHA_TOL {
        return Err(Error::Argument(format!("alpha = {alpha} above d = {d}")));
    }
    let xi = xi_from_phi(target)?;
    if alpha <= ALPHA_TOL {
        // φ ≡ 0 and α = 0.
        let mut g = GrowthFn::constant(0.0, horizon)?;
        g.trivial = true;
        return Ok(g);
    }
    let z1 = z1.unwrap_or(0.5 * alpha);
    if !(z1 > 0.0 && z1 < alpha) {
        return Err(Error::Argument(format!("z1 = {z1} not in (0, {alpha})")));
    }
    let relax = alpha > phi1 + ALPHA_TOL;

    let mut pieces = Vec::new();
    let mut blocks = Vec::new();
    let mut z = z1;
    let mut x = 0.0;
    let mut n = 1u32;
    while x < horizon {
        let len = n as f64;
        let decay = (-len).exp();
        let w = xi.value(len) + decay * z;
        pieces.push(Piece::Xi { z, length: len });
        pieces.push(Piece::Psi { w, length: len });
        let q = decay * w;
        let mut block = BlockIndex { n, x_n: x, z_n: z, w_n: w, q_n: None };
        x += 2.0 * len;
        if relax {
            let ulen = 1.0 / len;
            pieces.push(Piece::Relax { alpha, q, length: ulen });
            block.q_n = Some(q);
            z = alpha - (alpha - q) * (-ulen).exp();
            x += ulen;
        } else {
            z = q;
        }
        blocks.push(block);
        n += 1;
    }
    let mut g = concatenate(pieces, Some(xi))?;
    g.blocks = blocks;
    Ok(g)
}

/// Parameters `(λ, α)` of the class `𝒢(λ, α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GClassParams {
    pub lambda: f64,
    pub alpha: f64,
}

impl GClassParams {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(0.0 <= lambda && lambda < alpha) {
            return Err(Error::Argument(format!("need 0 <= lambda < alpha, got ({lambda}, {alpha})")));
        }
        Ok(GClassParams { lambda, alpha })
    }
}

/// Deterministic sample pairs `(y, t)` with `y + t ≤ span`, from an additive
/// recurrence with irrational steps.
pub fn sample_pairs(count: usize, span: f64) -> Vec<(f64, f64)> {
    let (a, b) = (std::f64::consts::SQRT_2 - 1.0, 3f64.sqrt() - 1.0);
    (1..=count)
        .map(|i| {
            let u = (i as f64 * a).fract();
            let v = (i as f64 * b).fract();
            // Bias half of the increments towards short scales.
            let t = if i % 2 == 0 { v } else { v * v * v };
            let y = u * span;
            (y.max(1e-9), (t * (span - y)).max(1e-12))
        })
        .collect()
}

/// Checks the `𝒢(λ, α)` sandwich
/// `λ − (λ−g(y))e^{−t} ≤ g(y+t) ≤ α − (α−g(y))e^{−t}` on the given pairs.
pub fn check_g(g: &GrowthFn, p: GClassParams, pairs: &[(f64, f64)]) -> ValidationReport {
    let (mut lower, mut upper) = (Worst::new(), Worst::new());
    for &(y, t) in pairs {
        let gy = g.eval(y);
        let gyt = g.eval(y + t);
        let decay = (-t).exp();
        lower.offer(p.lambda - (p.lambda - gy) * decay - gyt, &[y, t]);
        upper.offer(gyt - (p.alpha - (p.alpha - gy) * decay), &[y, t]);
    }
    let tol = crate::validation::DEFAULT_TOL;
    ValidationReport {
        passed: false,
        checks: vec![lower.outcome("g-lower", tol), upper.outcome("g-upper", tol)],
        grid: None,
        notes: vec![format!("{} sample pairs", pairs.len())],
        abstained: false,
    }
    .finish()
}

/// A finite-range stand-in for a limsup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimsupEstimate {
    pub value: f64,
    pub argmax: f64,
    /// Maximum over the last 20% of the range.
    pub tail_max: f64,
}

fn sweep(xs: usize, eval: impl Fn(usize) -> (f64, f64) + Sync) -> LimsupEstimate {
    let vals: Vec<(f64, f64)> = (1..=xs).into_par_iter().map(&eval).collect();
    let tail_from = xs - xs / 5;
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut tail = f64::NEG_INFINITY;
    for (i, &(x, v)) in vals.iter().enumerate() {
        if v > best.0 {
            best = (v, x);
        }
        if i + 1 >= tail_from {
            tail = tail.max(v);
        }
    }
    LimsupEstimate { value: best.0, argmax: best.1, tail_max: tail }
}

/// Maximum of `Q(x, θ)` over `x ∈ {step, 2·step, …, x_max}`.
pub fn spectrum_from_g(g: &GrowthFn, theta: f64, x_max: f64, step: f64) -> Result<LimsupEstimate> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} not in (0,1)")));
    }
    if !(step > 0.0 && x_max >= step) {
        return Err(Error::Argument("need 0 < step <= x_max".into()));
    }
    let tau = -theta.ln();
    if x_max + tau > g.domain_end() {
        return Err(Error::Range(format!(
            "x_max + log(1/theta) = {} beyond domain end {}",
            x_max + tau,
            g.domain_end()
        )));
    }
    let count = (x_max / step + 1e-9).floor() as usize;
    Ok(sweep(count, |i| {
        let x = step * i as f64;
        (x, g.quotient(theta, x))
    }))
}

/// Default window of scale gaps `τ` for [`assouad_dim_from_g`]: 64 geometric
/// values in `[10⁻³, 4]`.
pub fn default_window_grid() -> Vec<f64> {
    (0..64).map(|i| 1e-3 * 4000f64.powf(i as f64 / 63.0)).collect()
}

/// Maximum of the two-scale quotient `(g(x+τ) − e^{−τ}g(x))/(1−e^{−τ})` over
/// `x ∈ {0.01, 0.02, …, x_max}` and `τ` in `window_grid`.
pub fn assouad_dim_from_g(g: &GrowthFn, x_max: f64, window_grid: &[f64]) -> Result<LimsupEstimate> {
    let tau_max = window_grid.iter().copied().fold(0.0, f64::max);
    if window_grid.is_empty() || window_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Argument("window grid must be non-empty and positive".into()));
    }
    if x_max + tau_max > g.domain_end() {
        return Err(Error::Range(format!("x_max + max window beyond domain end {}", g.domain_end())));
    }
    const STEP: f64 = 0.01;
    // Relaxation blocks sit between grid points; include their endpoints.
    let mut xs: Vec<f64> = (1..=(x_max / STEP) as usize).map(|i| STEP * i as f64).collect();
    let mut x = 0.0;
    for p in &g.pieces {
        if x > 0.0 && x <= x_max {
            xs.push(x);
        }
        x += p.length();
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Ok(sweep(n, |i| {
        let x = xs[i - 1];
        let gx = g.eval(x);
        let q = window_grid
            .iter()
            .map(|&tau| {
                let th = (-tau).exp();
                (g.eval(x + tau) - th * gx) / (1.0 - th)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        (x, q)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_f, make_h, CParam, MParam};
    use crate::spectrum::{AmbientDim, BetaFn};
    use proptest::prelude::*;

    fn d1() -> AmbientDim {
        AmbientDim::new(1).unwrap()
    }

    fn mtarget() -> SpectrumFn {
        SpectrumFn::ExactBeta(make_f(d1(), MParam { kappa: 1.0, c: 0.5 }).unwrap())
    }

    #[test]
    fn xi_of_monotone_member() {
        let xi = xi_from_phi(&mtarget()).unwrap();
        for y in [0.1, 0.3, 0.6] {
            assert!((xi.eval(y).unwrap() - (1.0 - (-y).exp())).abs() < 1e-14);
        }
        assert!((xi.eval(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!((xi.eval(5.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(xi.eval(0.0).is_err());
        let full = SpectrumFn::ExactBeta(BetaFn::constant_phi(AmbientDim::new(2).unwrap(), 2.0).unwrap());
        let xi = xi_from_phi(&full).unwrap();
        assert!((xi.eval(0.7).unwrap() - 2.0 * (1.0 - (-0.7f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn xi_props_hold() {
        let xi = xi_from_phi(&mtarget()).unwrap();
        let ys: Vec<f64> = (1..=100).map(|i| i as f64 * 0.05).collect();
        assert!(check_xi_props(&xi, &ys).passed);
    }

    #[test]
    fn concatenation_layout() {
        let xi = xi_from_phi(&mtarget()).unwrap();
        let z1 = 0.25;
        let w1 = xi.value(1.0) + (-1f64).exp() * z1;
        let z2 = (-1f64).exp() * w1;
        let pieces = vec![
            Piece::Xi { z: z1, length: 1.0 },
            Piece::Psi { w: w1, length: 1.0 },
            Piece::Xi { z: z2, length: 2.0 },
        ];
        let g = concatenate(pieces, Some(xi.clone())).unwrap();
        assert_eq!(g.domain_end(), 4.0);
        assert!((g.eval(1.0) - w1).abs() < 1e-15);
        assert!((g.eval(2.0) - z2).abs() < 1e-15);
        assert!((g.eval(1.0 + 1e-12) - g.eval(1.0)).abs() < 1e-11);

        let bad = vec![Piece::Constant { value: 0.3, length: 1.0 }, Piece::Constant { value: 0.4, length: 1.0 }];
        match concatenate(bad, None) {
            Err(Error::Construction(m)) => assert!(m.contains("junction 1")),
            other => panic!("{other:?}"),
        }
        let one = GrowthFn::constant(0.3, 5.0).unwrap();
        assert_eq!(one.eval(2.5), 0.3);
    }

    #[test]
    fn recurrences_for_monotone_target() {
        let g = build_g(&mtarget(), 1.0, Some(0.25)).unwrap();
        let b = g.blocks();
        let e = (-1f64).exp();
        assert!((b[0].w_n - 0.591970).abs() < 1e-6);
        assert!((b[0].w_n - (0.5 + 0.25 * e)).abs() < 1e-15);
        assert!((b[1].z_n - e * (0.5 + 0.25 * e)).abs() < 1e-15);
        assert!((b[1].z_n - 0.2177735).abs() < 1e-7);
        for blk in b {
            assert_eq!(blk.x_n, (blk.n * (blk.n - 1)) as f64);
            assert!(blk.q_n.is_none());
        }
        assert!(g.domain_end() >= DEFAULT_HORIZON);
    }

    #[test]
    fn relaxation_blocks_inserted_when_alpha_exceeds() {
        let target = SpectrumFn::ExactBeta(make_f(d1(), MParam { kappa: 0.6, c: 0.5 }).unwrap());
        let g = build_g(&target, 0.9, None).unwrap();
        let b = g.blocks();
        let mut x = 0.0;
        for blk in b {
            assert!((blk.x_n - x).abs() < 1e-9);
            assert!(blk.q_n.is_some());
            x += 2.0 * blk.n as f64 + 1.0 / blk.n as f64;
        }
        assert!(matches!(build_g(&target, 0.5, None), Err(Error::Argument(_))));
    }

    #[test]
    fn zero_target_is_trivial() {
        let zero = SpectrumFn::ExactBeta(BetaFn::constant_phi(d1(), 0.0).unwrap());
        let g = build_g(&zero, 0.0, None).unwrap();
        assert!(g.is_trivial());
        assert_eq!(spectrum_from_g(&g, 0.5, 60.0, 0.01).unwrap().value, 0.0);
    }

    #[test]
    fn sandwich_examples() {
        let p = GClassParams::new(0.0, 1.0).unwrap();
        let pairs = sample_pairs(2000, 40.0);
        let flow = concatenate(vec![Piece::Relax { alpha: 1.0, q: 0.2, length: 50.0 }], None).unwrap();
        let r = check_g(&flow, p, &pairs);
        assert!(r.passed);
        let c = GrowthFn::constant(0.4, 50.0).unwrap();
        assert!(check_g(&c, p, &pairs).passed);
        let g = build_g(&mtarget(), 1.0, None).unwrap();
        assert!(check_g(&g, p, &sample_pairs(10_000, 200.0)).passed);
        assert!(GClassParams::new(0.5, 0.5).is_err());
    }

    #[test]
    fn quotient_of_simple_functions() {
        let c = GrowthFn::constant(0.37, 100.0).unwrap();
        let e = concatenate(vec![Piece::Psi { w: 0.8, length: 100.0 }], None).unwrap();
        for th in [0.1, 0.5, 0.9] {
            assert!((spectrum_from_g(&c, th, 50.0, 0.5).unwrap().value - 0.37).abs() < 1e-12);
            assert!(spectrum_from_g(&e, th, 50.0, 0.5).unwrap().value.abs() < 1e-12);
        }
        assert!(spectrum_from_g(&c, 0.5, 100.0, 0.5).is_err());
    }

    #[test]
    fn block_starts_attain_target() {
        let target = SpectrumFn::ExactBeta(make_h(d1(), CParam { kappa: 1.0, c1: 1.0 / 3.0, c2: 0.5 }).unwrap());
        let g = build_g(&target, 1.0, None).unwrap();
        for i in 1..10 {
            let th = i as f64 / 10.0;
            let need = -th.ln() + 1.0;
            for blk in g.blocks().iter().filter(|b| b.n as f64 >= need && b.x_n < 200.0) {
                assert!((g.quotient(th, blk.x_n) - target.value(th)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn assouad_dimension_estimates() {
        let target = SpectrumFn::ExactBeta(make_f(d1(), MParam { kappa: 0.6, c: 0.5 }).unwrap());
        let w = default_window_grid();
        let g = build_g(&target, 0.6, None).unwrap();
        let a = assouad_dim_from_g(&g, 60.0, &w).unwrap();
        assert!((a.value - 0.6).abs() < 0.05, "{a:?}");
        let g = build_g(&target, 0.9, None).unwrap();
        let a = assouad_dim_from_g(&g, 60.0, &w).unwrap();
        assert!((a.value - 0.9).abs() < 0.1, "{a:?}");
        let c = GrowthFn::constant(0.3, 100.0).unwrap();
        assert!((assouad_dim_from_g(&c, 60.0, &w).unwrap().value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn growth_description_serializes() {
        let g = build_g_with_horizon(&mtarget(), 1.0, None, 10.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(v["pieces"][0]["kind"], "xi");
        assert_eq!(v["blocks"][1]["x_n"], 2.0);
    }

    proptest! {
        #[test]
        fn built_g_respects_target(k in 0.2f64..=1.0, c in 0.1f64..0.9, th in 0.05f64..0.95) {
            let target = SpectrumFn::ExactBeta(make_f(d1(), MParam { kappa: k, c }).unwrap());
            let g = build_g_with_horizon(&target, k, None, 80.0).unwrap();
            let tau = -th.ln();
            let want = target.value(th);
            let first = g.blocks().iter().find(|b| b.n as f64 >= tau + 1.0).unwrap().x_n;
            let mut x = first;
            while x < 60.0 {
                prop_assert!(g.quotient(th, x) <= want + 1e-6);
                x += 0.01;
            }
        }

        #[test]
        fn xi_pieces_obey_displayed_chain(k in 0.2f64..=1.0, c1 in 0.1f64..0.8, s in 0.0f64..1.0, z in 0.01f64..0.5) {
            let c2 = c1 + s * (c1.sqrt() - c1);
            let target = SpectrumFn::ExactBeta(make_h(d1(), CParam { kappa: k, c1, c2 }).unwrap());
            let xi = xi_from_phi(&target).unwrap();
            let phi1 = target.value(1.0);
            let piece = Piece::Xi { z: z * k, length: 10.0 };
            for (y, t) in sample_pairs(200, 10.0) {
                let lhs = piece.eval(y + t, Some(&xi));
                let rhs = (1.0 - (-t).exp()) * phi1 + piece.eval(y, Some(&xi)) * (-t).exp();
                prop_assert!(lhs <= rhs + 1e-12);
            }
        }
    }
}
