//! Homogeneous Moran sets in `[0,1]^d` with level-dependent ratios.
//!
//! A schedule stores the cumulative log-scales `t_k = −log(r_1⋯r_k)` rather
//! than the ratios, so that scales far below `f64::MIN_POSITIVE` stay
//! representable. Level-`k` cylinders have side `e^{−t_k}`.

use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::{check_g, sample_pairs, GClassParams, GrowthFn};
use crate::spectrum::AmbientDim;

/// Maximum number of levels a schedule may hold.
pub const MAX_LEVELS: usize = 1_000_000;

/// Maximum number of cylinders visited by one covering query.
pub const MAX_CYLINDERS: usize = 1_000_000;

/// Smallest `δ′` accepted by [`covering_count`]. Corners are stored as
/// absolute coordinates in `[0,1]`, so finer scales are lost to rounding.
pub const MIN_COVER_SCALE: f64 = 1e-12;

/// Relative slack used when locating `k(δ)`, so that `δ = e^{−t_k}` computed
/// through `exp`/`ln` still lands on level `k`.
const LEVEL_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Generator {
    /// `r_k = r` for all `k`.
    Constant(f64),
    /// `r_k = min(1/2, 1/(k+1))`, the schedule used for the zero spectrum.
    Harmonic,
    /// Greedy discretization of a growth function.
    Growth(Arc<GrowthFn>),
}

/// Cumulative log-scales `t_0 = 0 < t_1 < ⋯` with increments `≥ log 2`.
#[derive(Debug)]
pub struct RatioSchedule {
    d: AmbientDim,
    t: RwLock<Vec<f64>>,
    generator: Option<Generator>,
}

impl Clone for RatioSchedule {
    fn clone(&self) -> Self {
        RatioSchedule {
            d: self.d,
            t: RwLock::new(self.t.read().unwrap().clone()),
            generator: self.generator.clone(),
        }
    }
}

fn check_increments(t: &[f64]) -> Result<()> {
    if t.first() != Some(&0.0) {
        return Err(Error::Argument("log-scales must start at t_0 = 0".into()));
    }
    for (k, w) in t.windows(2).enumerate() {
        if !(w[1] - w[0] >= LN_2 - 1e-12) || !w[1].is_finite() {
            return Err(Error::Argument(format!(
                "t_{} − t_{} = {} is below log 2",
                k + 1,
                k,
                w[1] - w[0]
            )));
        }
    }
    Ok(())
}

impl RatioSchedule {
    /// Schedule from explicit log-scales, `t[0] = 0`.
    pub fn from_log_scales(d: AmbientDim, t: Vec<f64>) -> Result<Self> {
        check_increments(&t)?;
        if t.len() > MAX_LEVELS + 1 {
            return Err(Error::Capacity(format!("{} levels exceed {MAX_LEVELS}", t.len() - 1)));
        }
        Ok(RatioSchedule { d, t: RwLock::new(t), generator: None })
    }

    /// Schedule from ratios `r_1, r_2, …` in `(0, 1/2]`.
    pub fn from_ratios(d: AmbientDim, ratios: &[f64]) -> Result<Self> {
        let mut t = Vec::with_capacity(ratios.len() + 1);
        t.push(0.0);
        for (k, &r) in ratios.iter().enumerate() {
            if !(r > 0.0 && r <= 0.5) {
                return Err(Error::Argument(format!("r_{} = {r} not in (0, 1/2]", k + 1)));
            }
            t.push(t[k] - r.ln());
        }
        Self::from_log_scales(d, t)
    }

    /// `r_k = r` for `k ≤ levels`, extended on demand.
    pub fn constant(d: AmbientDim, r: f64, levels: usize) -> Result<Self> {
        let s = Self::from_ratios(d, &vec![r; levels])?;
        Ok(RatioSchedule { generator: Some(Generator::Constant(r)), ..s })
    }

    /// `r_k = min(1/2, 1/(k+1))` for `k ≤ levels`, extended on demand.
    pub fn harmonic(d: AmbientDim, levels: usize) -> Result<Self> {
        let mut t = vec![0.0];
        for k in 1..=levels {
            t.push(t[k - 1] + harmonic_step(k));
        }
        let s = Self::from_log_scales(d, t)?;
        Ok(RatioSchedule { generator: Some(Generator::Harmonic), ..s })
    }

    pub fn dim(&self) -> AmbientDim {
        self.d
    }

    /// Number of materialized levels.
    pub fn levels(&self) -> usize {
        self.t.read().unwrap().len() - 1
    }

    /// Snapshot of `t_0, …, t_K`.
    pub fn log_scales(&self) -> Vec<f64> {
        self.t.read().unwrap().clone()
    }

    pub fn t(&self, k: usize) -> Option<f64> {
        self.t.read().unwrap().get(k).copied()
    }

    /// `r_k = e^{−(t_k − t_{k−1})}` for `k ≥ 1`.
    pub fn ratio(&self, k: usize) -> Option<f64> {
        let t = self.t.read().unwrap();
        if k == 0 || k >= t.len() {
            return None;
        }
        Some((t[k - 1] - t[k]).exp())
    }

    pub fn t_max(&self) -> f64 {
        *self.t.read().unwrap().last().unwrap()
    }

    /// Extends the schedule until `t_K ≥ log_scale`, if a generator is present.
    pub fn ensure_log_scale(&self, log_scale: f64) -> Result<()> {
        if self.t_max() >= log_scale * (1.0 - LEVEL_SLACK) {
            return Ok(());
        }
        let Some(gen) = &self.generator else {
            return Err(Error::Range(format!(
                "scale e^-{log_scale} below the materialized range e^-{}",
                self.t_max()
            )));
        };
        let mut t = self.t.write().unwrap();
        while *t.last().unwrap() < log_scale * (1.0 - LEVEL_SLACK) {
            if t.len() > MAX_LEVELS {
                return Err(Error::Capacity(format!(
                    "reaching e^-{log_scale} needs more than {MAX_LEVELS} levels"
                )));
            }
            let k = t.len();
            let prev = t[k - 1];
            let next = match gen {
                Generator::Constant(r) => prev - r.ln(),
                Generator::Harmonic => prev + harmonic_step(k),
                Generator::Growth(g) => greedy_level(g, self.d, k, prev)?,
            };
            t.push(next);
        }
        Ok(())
    }

    /// `k(δ)` for `δ = e^{−log_scale}`: the least `k` with `t_k ≥ log_scale`.
    pub fn k_of_log(&self, log_scale: f64) -> Result<usize> {
        if !(log_scale > 0.0) {
            return Err(Error::Domain(format!("delta = e^-{log_scale} must be below 1")));
        }
        self.ensure_log_scale(log_scale)?;
        let t = self.t.read().unwrap();
        let target = log_scale * (1.0 - LEVEL_SLACK);
        Ok(t.partition_point(|&tk| tk < target))
    }

    /// `s` at `δ = e^{−log_scale}`.
    pub fn s_log(&self, log_scale: f64) -> Result<f64> {
        let k = self.k_of_log(log_scale)?;
        Ok(k as f64 * self.d.as_f64() * LN_2 / log_scale)
    }

    /// CSV with header `k,t_k,r_k`; the row for `k = 0` leaves `r_k` empty.
    pub fn to_csv(&self) -> String {
        let t = self.t.read().unwrap();
        let mut out = String::from("k,t_k,r_k\n");
        for (k, &tk) in t.iter().enumerate() {
            if k == 0 {
                let _ = writeln!(out, "0,{tk},");
            } else {
                let _ = writeln!(out, "{k},{tk},{}", (t[k - 1] - tk).exp());
            }
        }
        out
    }
}

fn harmonic_step(k: usize) -> f64 {
    ((k + 1) as f64).ln().max(LN_2)
}

/// `F(T) = g(log T)·T / (d log 2)`, the level count the schedule should have
/// reached at log-scale `T`.
fn level_target(g: &GrowthFn, d: AmbientDim, log_scale: f64) -> Result<f64> {
    let x = log_scale.ln();
    let gx = if x <= 0.0 { g.eval(f64::MIN_POSITIVE) } else { g.try_eval(x)? };
    Ok(gx * log_scale / (d.as_f64() * LN_2))
}

/// `t_k`: the least `T ≥ t_{k−1} + log 2` with `F(T) ≥ k`.
fn greedy_level(g: &GrowthFn, d: AmbientDim, k: usize, prev: f64) -> Result<f64> {
    let kf = k as f64;
    let lo = prev + LN_2;
    if level_target(g, d, lo)? >= kf {
        return Ok(lo);
    }
    let mut a = lo;
    let mut b = 2.0 * lo;
    while level_target(g, d, b)? < kf {
        a = b;
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if !(a < m && m < b) {
            break;
        }
        if level_target(g, d, m)? >= kf {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(b)
}

/// Discretizes `g ∈ 𝒢(0, d)` into a schedule covering `log t ≤ x_max`.
///
/// Levels are placed greedily at the least `t` where `g(log t)·t` reaches
/// `k·d·log 2`, so `|s(e^{−e^x}) − g(x)| ≤ d log 2 · e^{−x}` wherever
/// `F` is continuous. One level past `e^{x_max}` is included so that `s`
/// is defined on the whole range. The zero growth function gives
/// `r_k = min(1/2, 1/(k+1))`.
pub fn schedule_from_g(g: &GrowthFn, d: AmbientDim, x_max: f64) -> Result<RatioSchedule> {
    if !(x_max > 0.0) {
        return Err(Error::Argument(format!("x_max = {x_max} must be positive")));
    }
    let t_end = x_max.exp();
    if g.is_trivial() {
        let s = RatioSchedule::harmonic(d, 0)?;
        s.ensure_log_scale(t_end)?;
        return Ok(s);
    }
    if x_max > g.domain_end() {
        return Err(Error::Range(format!("x_max = {x_max} beyond domain end {}", g.domain_end())));
    }
    let span = g.domain_end().min(x_max + 8.0);
    let report = check_g(g, GClassParams::new(0.0, d.as_f64())?, &sample_pairs(2000, span));
    if !report.passed {
        return Err(Error::Argument("growth function is not in G(0, d)".into()));
    }
    let needed = level_target(g, d, t_end)?;
    if needed > MAX_LEVELS as f64 {
        let reachable = crate::bisect::bisect_predicate(0.0, x_max, 1e-6, |x| {
            level_target(g, d, x.exp()).map_or(true, |f| f > MAX_LEVELS as f64)
        });
        return Err(Error::Capacity(format!(
            "x_max = {x_max} needs about {needed:.0} levels; reachable x_max ≈ {reachable:.3}"
        )));
    }
    let s = RatioSchedule {
        d,
        t: RwLock::new(vec![0.0]),
        generator: Some(Generator::Growth(Arc::new(g.clone()))),
    };
    s.ensure_log_scale(t_end)?;
    Ok(s)
}

/// `s(δ) = k(δ)·d·log 2 / (−log δ)`.
pub fn s_delta(sched: &RatioSchedule, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta = {delta} not in (0,1)")));
    }
    sched.s_log(-delta.ln())
}

/// Maximum of `(s(δ^{1/θ}) − θ s(δ))/(1−θ)` over `mesh` geometric values of
/// `δ` in `[δ_min, δ_min^{0.1}]`. `δ_min` is given through `−log δ_min`.
pub fn spectrum_from_schedule(
    sched: &RatioSchedule,
    theta: f64,
    log_delta_min: f64,
    mesh: usize,
) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} not in (0,1)")));
    }
    if mesh < 2 || !(log_delta_min > 0.0) {
        return Err(Error::Argument("need mesh >= 2 and delta_min < 1".into()));
    }
    sched.ensure_log_scale(log_delta_min / theta)?;
    let mut best = f64::NEG_INFINITY;
    for i in 0..mesh {
        let big_t = log_delta_min * 0.1f64.powf(i as f64 / (mesh - 1) as f64);
        let q = (sched.s_log(big_t / theta)? - theta * sched.s_log(big_t)?) / (1.0 - theta);
        best = best.max(q);
    }
    Ok(best)
}

/// A cylinder `S_σ([0,1]^d)`; digit `i` of `σ` packs the `d` binary choices,
/// bit `j` for axis `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CylinderAddress {
    d: u32,
    digits: Vec<u32>,
}

impl CylinderAddress {
    pub fn new(d: AmbientDim, digits: Vec<u32>) -> Result<Self> {
        let base = 1u64 << d.get();
        if let Some(&bad) = digits.iter().find(|&&x| x as u64 >= base) {
            return Err(Error::Argument(format!("digit {bad} not below 2^{}", d.get())));
        }
        Ok(CylinderAddress { d: d.get(), digits })
    }

    /// The level-`level` cylinder containing the origin.
    pub fn leftmost(d: AmbientDim, level: usize) -> Self {
        CylinderAddress { d: d.get(), digits: vec![0; level] }
    }

    pub fn level(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// Binary digits along one axis.
    fn axis_bits(&self, axis: u32) -> impl Iterator<Item = bool> + '_ {
        self.digits.iter().map(move |&x| (x >> axis) & 1 == 1)
    }

    /// The corner `S_σ(0)`, a point of the set.
    pub fn corner(&self, sched: &RatioSchedule) -> Result<Vec<f64>> {
        let offs = offsets(sched, self.level())?;
        Ok((0..self.d)
            .map(|a| self.axis_bits(a).zip(&offs).filter(|(b, _)| *b).map(|(_, o)| o).sum())
            .collect())
    }
}

/// `o_j = e^{−t_{j−1}} − e^{−t_j}`, the offset of the second child at level `j`.
fn offsets(sched: &RatioSchedule, level: usize) -> Result<Vec<f64>> {
    if level > sched.levels() {
        let Some(_) = sched.generator else {
            return Err(Error::Range(format!(
                "level {level} beyond the {} materialized levels",
                sched.levels()
            )));
        };
        while sched.levels() < level {
            sched.ensure_log_scale(sched.t_max() + LN_2)?;
        }
    }
    let t = sched.t.read().unwrap();
    Ok((1..=level).map(|j| (-t[j - 1]).exp() - (-t[j]).exp()).collect())
}

/// Result of a covering query.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverCount {
    /// Geometric count: balls of radius `δ′` (max metric) needed to cover the
    /// level-`k(δ′)` cylinders meeting the ball of radius `δ`.
    pub n: u64,
    /// `2^{d·(k(δ′) − k(δ))}`.
    pub predicted: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub k_delta: usize,
    pub k_delta_prime: usize,
    pub center: Vec<f64>,
}

impl CoverCount {
    pub fn ratio(&self) -> f64 {
        self.n as f64 / self.predicted
    }
}

/// Covers `C ∩ B(x, δ)` by balls of radius `δ′`, where `x` is the corner of
/// `center`.
///
/// In one dimension the level-`k(δ′)` cylinders (closed intervals) meeting the
/// open ball are clipped to it and covered left to right by intervals of
/// length `2δ′`, which is optimal. Touching the ball's boundary counts as
/// meeting it. For `d > 1` the ball is the max-metric cube, the set is a
/// product of identical one-dimensional sets, and the count is the product
/// of the per-axis counts; a Euclidean ball of radius `δ` sits inside this
/// cube, and Euclidean balls of radius `√d·δ′` cover the small cubes.
pub fn covering_count(
    sched: &RatioSchedule,
    center: &CylinderAddress,
    delta: f64,
    delta_prime: f64,
) -> Result<CoverCount> {
    if !(delta > 0.0 && delta < 1.0 && delta_prime > 0.0) {
        return Err(Error::Domain(format!("scales ({delta}, {delta_prime}) must lie in (0,1)")));
    }
    if delta_prime > delta {
        return Err(Error::Argument(format!("delta' = {delta_prime} exceeds delta = {delta}")));
    }
    if delta_prime < MIN_COVER_SCALE {
        return Err(Error::Domain(format!(
            "delta' = {delta_prime} below the coordinate resolution {MIN_COVER_SCALE}"
        )));
    }
    if center.d != sched.d.get() {
        return Err(Error::Argument("address and schedule dimensions differ".into()));
    }
    let k_delta = sched.k_of_log(-delta.ln())?;
    let k_prime = sched.k_of_log(-delta_prime.ln())?;
    let x = center.corner(sched)?;
    let offs = offsets(sched, k_prime)?;
    let sides: Vec<f64> = sched.log_scales()[1..=k_prime].iter().map(|t| (-t).exp()).collect();
    let mut n: u64 = 1;
    let mut visited = 0usize;
    for &c in &x {
        let axis = cover_axis(&offs, &sides, c, delta, delta_prime, &mut visited)?;
        n = n.saturating_mul(axis);
    }
    let d = sched.d.as_f64();
    Ok(CoverCount {
        n,
        predicted: 2f64.powf(d * (k_prime as f64 - k_delta as f64)),
        delta,
        delta_prime,
        k_delta,
        k_delta_prime: k_prime,
        center: x,
    })
}

fn cover_axis(
    offs: &[f64],
    sides: &[f64],
    c: f64,
    delta: f64,
    delta_prime: f64,
    visited: &mut usize,
) -> Result<u64> {
    let (lo, hi) = (c - delta, c + delta);
    // Left ends of surviving cylinders, level by level, in increasing order.
    let mut starts = vec![0.0f64];
    // Side lengths come from the log-scales directly: subtracting offsets
    // level by level amplifies rounding by about 1/r per level.
    let mut len = 1.0f64;
    for (&o, &child) in offs.iter().zip(sides) {
        let mut next = Vec::with_capacity(2 * starts.len());
        for &a in &starts {
            for b in [a, a + o] {
                if b <= hi && b + child >= lo {
                    next.push(b);
                }
            }
        }
        *visited += next.len();
        if *visited > MAX_CYLINDERS {
            return Err(Error::Capacity(format!("more than {MAX_CYLINDERS} cylinders in the ball")));
        }
        starts = next;
        len = child;
    }
    let width = 2.0 * delta_prime;
    let mut covered = f64::NEG_INFINITY;
    let mut n = 0u64;
    for &a in &starts {
        let (l, r) = (a.max(lo), (a + len).min(hi));
        if r <= covered {
            continue;
        }
        if l > covered {
            covered = l + width;
            n += 1;
        }
        if r > covered {
            let extra = ((r - covered) / width).ceil();
            n += extra as u64;
            covered += extra * width;
        }
    }
    Ok(n)
}

/// Corners of level-`level` cylinders. With more than `max_points`
/// cylinders, either fails or, with `subsample`, returns an evenly strided
/// subset of `max_points` corners.
pub fn sample_points(
    sched: &RatioSchedule,
    level: usize,
    max_points: usize,
    subsample: bool,
) -> Result<Vec<Vec<f64>>> {
    let d = sched.d.get();
    let bits = d as usize * level;
    let total: Option<u64> = if bits < 64 { Some(1u64 << bits) } else { None };
    let take = match total {
        Some(t) if t <= max_points as u64 => t,
        _ if subsample => max_points as u64,
        _ => {
            return Err(Error::Capacity(format!(
                "2^{bits} corners exceed max_points = {max_points}"
            )))
        }
    };
    let offs = offsets(sched, level)?;
    let mut out = Vec::with_capacity(take as usize);
    for i in 0..take {
        // Index into the full family, strided when subsampling.
        let idx: u128 = match total {
            Some(t) if t <= max_points as u64 => i as u128,
            _ => {
                let full: u128 = if bits < 128 { 1u128 << bits } else { u128::MAX };
                i as u128 * (full / take as u128)
            }
        };
        let mut p = vec![0.0; d as usize];
        for (j, &o) in offs.iter().enumerate() {
            let shift = bits - d as usize * (j + 1);
            let digit = if shift < 128 { (idx >> shift) as u32 & ((1u32 << d) - 1) } else { 0 };
            for (a, coord) in p.iter_mut().enumerate() {
                if (digit >> a) & 1 == 1 {
                    *coord += o;
                }
            }
        }
        out.push(p);
    }
    Ok(out)
}

/// CSV of points, header `x1,…,xd`.
pub fn points_csv(points: &[Vec<f64>]) -> String {
    let d = points.first().map_or(1, |p| p.len());
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for p in points {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
