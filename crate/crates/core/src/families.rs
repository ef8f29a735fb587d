//! Explicit families of admissible spectra and the exceptional examples.
//!
//! All constructors return β-forms; see [`crate::spectrum`].

use serde::{Deserialize, Serialize};

use crate::bisect::bisect_predicate;
use crate::error::{Error, Result};
use crate::spectrum::{beta_envelope, AmbientDim, BetaFn, SpectrumFn};
use crate::validation::{check_ad, GridSpec};

/// Tolerance used to recognise the degenerate member `c2 = √c1`.
const DEGENERATE_TOL: f64 = 1e-12;

/// Parameters `(κ, c)` of the monotone family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MParam {
    pub kappa: f64,
    pub c: f64,
}

/// Parameters `(κ, c1, c2)` of the non-monotone family. `c1 = 0` is accepted
/// as the degenerate member `κ(1−θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CParam {
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
}

fn check_kappa(d: AmbientDim, kappa: f64) -> Result<()> {
    if !(0.0..=d.as_f64()).contains(&kappa) {
        return Err(Error::Argument(format!("kappa = {kappa} outside [0, {}]", d.get())));
    }
    Ok(())
}

/// `f_{(κ,c)}`: equal to `κ(1−c)` on `[0,c]` and `κ(1−θ)` on `[c,1]`.
pub fn make_f(d: AmbientDim, p: MParam) -> Result<BetaFn> {
    check_kappa(d, p.kappa)?;
    if !(p.c > 0.0 && p.c < 1.0) {
        return Err(Error::Argument(format!("c = {} not in (0,1)", p.c)));
    }
    let top = p.kappa * (1.0 - p.c);
    BetaFn::new(d, vec![0.0, p.c, 1.0], vec![top, top, 0.0])
}

/// `h_{(κ,c1,c2)}`: slope 0 on `[0,c1] ∪ [c2,c1/c2]`, slope `−κ` on
/// `[c1,c2] ∪ [c1/c2,1]`, and `h(1) = 0`.
pub fn make_h(d: AmbientDim, p: CParam) -> Result<BetaFn> {
    check_kappa(d, p.kappa)?;
    let CParam { kappa, c1, c2 } = p;
    if c1 == 0.0 {
        return BetaFn::constant_phi(d, kappa);
    }
    let root = c1.sqrt();
    if !(c1 > 0.0 && c1 <= c2 && c2 <= root + DEGENERATE_TOL && root < 1.0) {
        return Err(Error::Argument(format!(
            "need 0 < c1 <= c2 <= sqrt(c1) < 1, got c1 = {c1}, c2 = {c2}"
        )));
    }
    if (c2 - root).abs() <= DEGENERATE_TOL {
        return make_f(d, MParam { kappa, c: c1 });
    }
    if c1 == c2 || kappa == 0.0 {
        return BetaFn::constant_phi(d, 0.0);
    }
    let knee = c1 / c2;
    let low = kappa * (1.0 - knee);
    let high = low + kappa * (c2 - c1);
    BetaFn::new(d, vec![0.0, c1, c2, knee, 1.0], vec![high, high, low, low, 0.0])
}

/// The value `c2 = c(λ, y)` for which `h_{(φλ, λ, c2)}(λ) = y`.
pub fn c_of(lambda: f64, y: f64, phi_lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Argument(format!("lambda = {lambda} not in (0,1)")));
    }
    if !(phi_lambda > 0.0) {
        return Err(Error::Argument("phi(lambda) must be positive".into()));
    }
    let top = (1.0 - lambda) * phi_lambda;
    if !(y >= -DEGENERATE_TOL && y <= top + DEGENERATE_TOL) {
        return Err(Error::Argument(format!("y = {y} outside [0, {top}]")));
    }
    let y = y.clamp(0.0, top);
    let a = lambda + y / phi_lambda - 1.0;
    let disc = (a * a + 4.0 * lambda).sqrt();
    // Larger root of c² + (1−λ−y/φλ)c − λ; the second form avoids cancellation.
    let c = if a >= 0.0 { 0.5 * (a + disc) } else { 2.0 * lambda / (disc - a) };
    let c = c.clamp(lambda, lambda.sqrt());
    let back = phi_lambda * (1.0 - lambda / c + c - lambda);
    if (back - y).abs() > 1e-9 {
        return Err(Error::Construction(format!(
            "c({lambda}, {y}) = {c} reproduces {back}"
        )));
    }
    Ok(c)
}

fn holder_f(theta: f64) -> f64 {
    1.0 + 1.0 / (-theta).ln_1p()
}

/// The non-Hölder example built from `f(θ) = 1 + 1/log(1−θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderExample {
    /// Least `θ₀` such that `(1−θ)f(θ)` decreases on `[θ₀, 1]`.
    pub theta0: f64,
    pub f_theta0: f64,
}

impl HolderExample {
    pub fn new() -> Self {
        // d/dθ[(1−θ)f(θ)] = −1 − 1/L + 1/L² with L = log(1−θ); positive before θ₀.
        let slope = |t: f64| {
            let l = (-t).ln_1p();
            -1.0 - 1.0 / l + 1.0 / (l * l)
        };
        let lo = 1.0 - (-1.0f64).exp();
        let hi = 1.0 - (-3.0f64).exp();
        let theta0 = bisect_predicate(lo, hi, 1e-15, |t| slope(t) <= 0.0);
        HolderExample { theta0, f_theta0: holder_f(theta0) }
    }

    pub fn f(&self, theta: f64) -> f64 {
        holder_f(theta)
    }

    /// `σ(θ)`, with `σ(1) = 1`.
    pub fn sigma(&self, theta: f64) -> f64 {
        if theta >= 1.0 {
            1.0
        } else if theta <= self.theta0 {
            (1.0 - self.theta0) * self.f_theta0 / (1.0 - theta)
        } else {
            holder_f(theta)
        }
    }

    /// `σ` sampled on `n` uniform interior points, the points `1 − 2^{-j}`
    /// for `j ≤ 50`, `θ₀` and both endpoints, with `β` interpolated linearly
    /// between samples. Interpolating `β` rather than `φ` keeps `φ`
    /// increasing and `β` decreasing exactly; `φ(1)` becomes the limit over
    /// the last segment.
    pub fn tabulate(&self, n: usize) -> SpectrumFn {
        let mut grid: Vec<f64> = (0..=n + 1).map(|i| i as f64 / (n + 1) as f64).collect();
        grid.extend((1..=50).map(|j| 1.0 - 2f64.powi(-j)));
        grid.push(self.theta0);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let values = grid.iter().map(|&t| (1.0 - t) * self.sigma(t)).collect();
        BetaFn::new(AmbientDim::new(1).unwrap(), grid, values)
            .expect("sigma takes values in [0,1]")
            .into()
    }
}

impl Default for HolderExample {
    fn default() -> Self {
        Self::new()
    }
}

/// `σ` sampled at `10⁴` interior points.
pub fn make_holder_failure() -> SpectrumFn {
    HolderExample::new().tabulate(10_000)
}

/// `φ = h/(1−θ)` with `h(θ) = inf_{θ' ≤ θ} (1−θ')f(θ')`, taken over `grid`
/// (which must contain 0 and 1); `φ(1)` is set to `f(1)`.
pub fn holder_envelope(d: AmbientDim, f: impl Fn(f64) -> f64, grid: Vec<f64>) -> Result<SpectrumFn> {
    let f0 = f(0.0);
    if !(f0 > 0.0) {
        return Err(Error::Argument(format!("f(0) = {f0} must be positive")));
    }
    let mut inf = f64::INFINITY;
    let mut phis = Vec::with_capacity(grid.len());
    for &t in &grid {
        if t >= 1.0 {
            phis.push(f(1.0));
            continue;
        }
        inf = inf.min((1.0 - t) * f(t));
        phis.push(inf / (1.0 - t));
    }
    Ok(SpectrumFn::Tabulated(crate::spectrum::Tabulated::new(d, grid, phis)?))
}

/// The value `y_λ` chosen at one dyadic point, with the window it came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadicChoice {
    pub lambda: f64,
    pub generation: u32,
    pub y: f64,
    pub kappa: f64,
    pub c2: f64,
    pub window: (f64, f64),
    /// Soft constraints that could not be met together with the hard window
    /// and were dropped for this point.
    pub relaxed: Vec<String>,
}

/// Output of [`build_nonmonotone`].
#[derive(Clone, Debug)]
pub struct NonMonoBuild {
    pub target: SpectrumFn,
    /// Strictly increasing admissible function within `0.45ε` of the target.
    pub perturbed: SpectrumFn,
    pub epsilon: f64,
    pub depth: u32,
    pub choices: Vec<DyadicChoice>,
    pub beta: BetaFn,
}

impl NonMonoBuild {
    pub fn spectrum(&self) -> SpectrumFn {
        SpectrumFn::ExactBeta(self.beta.clone())
    }
}

/// Samples used for the decreasing hull of the lower barrier.
const PSI_SAMPLES: usize = 1 << 14;

struct Barrier {
    grid: Vec<f64>,
    suffix: Vec<f64>,
}

impl Barrier {
    fn new(raw: impl Fn(f64) -> f64) -> Self {
        let grid: Vec<f64> = (0..=PSI_SAMPLES).map(|i| i as f64 / PSI_SAMPLES as f64).collect();
        let mut suffix: Vec<f64> = grid.iter().map(|&t| raw(t)).collect();
        for i in (0..PSI_SAMPLES).rev() {
            suffix[i] = suffix[i].max(suffix[i + 1]);
        }
        Barrier { grid, suffix }
    }

    /// Decreasing majorant: `max(raw(θ), sup of raw on grid points ≥ θ)`.
    fn eval(&self, theta: f64, raw: impl Fn(f64) -> f64) -> f64 {
        let i = self.grid.partition_point(|&g| g < theta);
        let tail = if i <= PSI_SAMPLES { self.suffix[i] } else { 0.0 };
        raw(theta).max(tail)
    }
}

fn is_strictly_increasing_on(f: &SpectrumFn, n: usize) -> bool {
    let mut prev = f.value(0.0);
    for i in 1..=n {
        let v = f.value(i as f64 / n as f64);
        if v <= prev {
            return false;
        }
        prev = v;
    }
    true
}

/// Non-monotone approximation of an increasing admissible `target`.
///
/// Dyadic points are processed generation by generation, left to right. At
/// each point `λ` a value `y_λ` is picked at the midpoint of an open window,
/// and the curve `h_{(φ(λ), λ, c(λ, y_λ))}` joins the envelope. The hard window
/// keeps `y_λ` between the barrier `ψ` and `β`, above the current envelope
/// at `λ` and the right neighbour, and below the left neighbour. It also keeps
/// every earlier point on top of the envelope, and keeps the points of
/// generation `≤ depth−2` strict local maxima at the probe offset
/// `2^{−depth−3}`. An empty hard window is a construction error.
///
/// The softer constraints are then applied in order, each only when it leaves
/// the window non-empty: `y_λ` below the average of its neighbours, `y_λ`
/// close enough to `β` that later children can clear `ψ`, and the two rate
/// constraints that pin the one-sided Dini derivatives. Dropped ones are
/// listed in [`DyadicChoice::relaxed`].
pub fn build_nonmonotone(target: &SpectrumFn, epsilon: f64, depth: u32) -> Result<NonMonoBuild> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument("epsilon must be positive".into()));
    }
    if depth == 0 || depth > 12 {
        return Err(Error::Argument(format!("depth = {depth} not in 1..=12")));
    }
    let d = target.dim();
    let dim = d.as_f64();
    let check = check_ad(target, &GridSpec::uniform(200));
    if !check.passed {
        return Err(Error::Argument("target fails the admissibility check".into()));
    }
    let upper = crate::validation::check_upper_form(target, &GridSpec::uniform(1000));
    if !upper.check("phi-increasing").map_or(false, |c| c.passed) {
        return Err(Error::Argument("target is not increasing".into()));
    }

    // Blend towards d(1+θ)/2: strictly increasing and β still decreasing. The
    // weight is as large as a 0.45ε sup-distance allows, to steepen β.
    let max_dev = (0..=4096)
        .map(|i| i as f64 / 4096.0)
        .chain(target.nodes().iter().copied())
        .map(|t| (0.5 * dim * (1.0 + t) - target.value(t)).abs())
        .fold(0.0, f64::max);
    let eta = if max_dev > 0.0 { (0.45 * epsilon / max_dev).min(0.5) } else { 0.5 };
    let perturbed = if is_strictly_increasing_on(target, 4096) {
        target.clone()
    } else {
        blend(target, eta)?
    };
    let phi = |t: f64| perturbed.value(t);
    let beta = |t: f64| perturbed.beta(t);

    let eps_psi = 0.5 * epsilon;
    let raw = |t: f64| {
        let omega = phi(t * t) * (1.0 - t);
        omega.max(beta(t) - eps_psi * (1.0 - t)).max(0.0)
    };
    let barrier = Barrier::new(raw);
    let psi = |t: f64| barrier.eval(t, raw);

    let probe = 2f64.powi(-(depth as i32) - 3);
    let mut curves: Vec<BetaFn> = Vec::new();
    let mut points: Vec<(f64, f64, u32)> = Vec::new(); // (λ, y_λ, generation), sorted by λ
    let mut choices = Vec::new();
    let mut owner: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();

    for n in 1..=depth {
        let step = 2f64.powi(-(n as i32));
        let count = 1u64 << n;
        for j in (1..count).step_by(2) {
            let lam = j as f64 * step;
            let kappa = phi(lam);
            let top = beta(lam);
            let env = |t: f64| curves.iter().map(|c| c.eval(t)).fold(0.0, f64::max);
            let idx = points.partition_point(|p| p.0 < lam);
            let left = idx.checked_sub(1).map(|i| points[i]);
            let right = points.get(idx).copied();

            let mut lo = env(lam).max(psi(lam));
            let mut hi = top;
            if let Some((_, yl, _)) = left {
                hi = hi.min(yl);
            }
            if let Some((_, yr, _)) = right {
                lo = lo.max(yr);
            }
            // Probes around λ itself, if it must be a strict local maximum.
            if n + 2 <= depth {
                for p in [lam - probe, lam + probe] {
                    lo = lo.max(env(p) * (1.0 - lam) / (1.0 - p));
                }
            }
            let curve_at = |y: f64, t: f64| -> f64 {
                let c2 = c_of(lam, y, kappa).unwrap_or(lam.sqrt());
                h_value(kappa, lam, c2, t)
            };
            // The new curve must stay below every existing point and every probe bound.
            let mut caps: Vec<(f64, f64)> = points.iter().map(|&(nu, y, _)| (nu, y)).collect();
            for &(nu, y, g) in &points {
                if g + 2 <= depth {
                    for p in [nu - probe, nu + probe] {
                        caps.push((p, y * (1.0 - p) / (1.0 - nu)));
                    }
                }
            }
            for &(t, cap) in &caps {
                if curve_at(hi, t) >= cap {
                    if lo >= hi || curve_at(lo, t) >= cap {
                        hi = hi.min(lo);
                        break;
                    }
                    hi = bisect_predicate(lo, hi, 1e-15, |y| curve_at(y, t) >= cap);
                }
            }
            if !(lo < hi) {
                return Err(Error::Construction(format!(
                    "empty window at lambda = {lam}: ({lo}, {hi})"
                )));
            }
            let hard = (lo, hi);
            let mut relaxed = Vec::new();

            if let (Some((_, yl, _)), Some((_, yr, _))) = (left, right) {
                let avg = 0.5 * (yl + yr);
                if avg > lo {
                    hi = hi.min(avg);
                } else {
                    relaxed.push(format!("neighbour average y <= {avg}"));
                }
            }

            // A later child at λ ± 2^{-m} needs the average of y_λ and its other
            // neighbour above ψ there, so y_λ stays within the band at each
            // adjacent child.
            let band_min = (n + 1..=depth)
                .flat_map(|m| [lam - 2f64.powi(-(m as i32)), lam + 2f64.powi(-(m as i32))])
                .filter(|&t| t > 0.0 && t < 1.0)
                .map(|t| beta(t) - psi(t))
                .fold(f64::INFINITY, f64::min);
            let la = top - 0.9 * band_min.max(0.0);
            if la < hi {
                lo = lo.max(la);
            } else {
                relaxed.push(format!("band lookahead y >= {la}"));
            }

            if let (Some((l1, yl, _)), Some((l2, yr, _))) = (left, right) {
                let h1 = &curves[owner[&l1.to_bits()]];
                let outer = |t: f64| env(t).max(psi(t));
                let (m_lo, k_cap) = rate_window(&outer, h1, phi(l1), (l1, yl), (l2, yr), n - 1);
                if m_lo < hi {
                    lo = lo.max(m_lo);
                } else {
                    relaxed.push(format!("left rate bound y >= {m_lo}"));
                }
                let k_hi = k_cap(&curve_at, lo, hi);
                if k_hi > lo {
                    hi = hi.min(k_hi);
                } else {
                    relaxed.push(format!("right rate bound y <= {k_hi}"));
                }
            }
            let y = 0.5 * (lo + hi);
            let c2 = c_of(lam, y, kappa)?;
            owner.insert(lam.to_bits(), curves.len());
            curves.push(make_h(d, CParam { kappa, c1: lam, c2 })?);
            points.insert(idx, (lam, y, n));
            choices.push(DyadicChoice { lambda: lam, generation: n, y, kappa, c2, window: hard, relaxed });
        }
    }
    let refs: Vec<&BetaFn> = curves.iter().collect();
    Ok(NonMonoBuild {
        target: target.clone(),
        perturbed,
        epsilon,
        depth,
        choices,
        beta: beta_envelope(&refs),
    })
}

fn blend(target: &SpectrumFn, eta: f64) -> Result<SpectrumFn> {
    let d = target.dim();
    let dim = d.as_f64();
    let lift = |t: f64| 0.5 * dim * (1.0 - t * t);
    match target {
        SpectrumFn::ExactBeta(b) => {
            // The lift is quadratic in β; sample it densely between breakpoints.
            let mut xs: Vec<f64> = (0..=1024).map(|i| i as f64 / 1024.0).collect();
            xs.extend_from_slice(b.breakpoints());
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let vals = xs.iter().map(|&t| (1.0 - eta) * b.eval(t) + eta * lift(t)).collect();
            Ok(SpectrumFn::ExactBeta(BetaFn::new(d, xs, vals)?))
        }
        SpectrumFn::Tabulated(_) => {
            let grid = target.nodes().to_vec();
            SpectrumFn::tabulate(d, grid, |t| (1.0 - eta) * target.value(t) + eta * 0.5 * dim * (1.0 + t))
        }
    }
}

/// `h_{(κ,c1,c2)}(θ)` without building the function.
fn h_value(kappa: f64, c1: f64, c2: f64, t: f64) -> f64 {
    let knee = c1 / c2;
    let low = kappa * (1.0 - knee);
    if t <= c1 {
        low + kappa * (c2 - c1)
    } else if t <= c2 {
        low + kappa * (c2 - t)
    } else if t <= knee {
        low
    } else {
        kappa * (1.0 - t).max(0.0)
    }
}

type CapFn<'a> = Box<dyn Fn(&dyn Fn(f64, f64) -> f64, f64, f64) -> f64 + 'a>;

/// Rate constraints between neighbours `ℓ1 < λ < ℓ2` of generation `n`.
///
/// Returns the lower bound on `y_λ` that pins the right Dini derivative at
/// `ℓ1` (`h1` is the curve placed at `ℓ1`), and a closure producing the upper
/// bound that flattens the approach to `ℓ2`. `ℓ0` and `ℓ0'` are located by
/// scanning `(ℓ1, ℓ2)`.
fn rate_window<'a>(
    outer: &'a dyn Fn(f64) -> f64,
    h1: &BetaFn,
    phi1: f64,
    (l1, y1): (f64, f64),
    (l2, y2): (f64, f64),
    n: u32,
) -> (f64, CapFn<'a>) {
    const SCAN: usize = 256;
    let scan = |i: usize| l1 + (l2 - l1) * i as f64 / SCAN as f64;
    let pow = |e: u32| 2f64.powi(-(e as i32));

    let mut l0 = l1;
    for i in 1..SCAN {
        let t = scan(i);
        if (outer(t) - h1.eval(t)).abs() > 1e-12 {
            break;
        }
        l0 = t;
    }
    let mut m = 1;
    while l1 + pow(n + m) > l0 && m < 60 {
        m += 1;
    }
    let m_lo = y1 - pow(n + m) * (phi1 + 1.0 / (n + m) as f64);

    let mut l0p = l2;
    for i in (1..SCAN).rev() {
        let t = scan(i);
        if t < l0 || (outer(t) - y2).abs() > 1e-12 {
            break;
        }
        l0p = t;
    }
    let mut k = 1;
    while l2 - pow(n + k) < l0p && k < 60 {
        k += 1;
    }
    let slack = pow(n + k) / (n + k) as f64;
    let cap: CapFn<'a> = if k == 1 {
        Box::new(move |_, _, _| y2 + slack)
    } else {
        Box::new(move |curve_at, lo, hi| {
            if curve_at(hi, l0p) <= y2 + slack {
                return hi;
            }
            if curve_at(lo, l0p) > y2 + slack {
                return lo;
            }
            bisect_predicate(lo, hi, 1e-15, |y| curve_at(y, l0p) > y2 + slack)
        })
    };
    (m_lo, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::running_max;
    use crate::validation::{check_ad, check_upper_form, GridSpec};
    use proptest::prelude::*;

    fn d1() -> AmbientDim {
        AmbientDim::new(1).unwrap()
    }

    #[test]
    fn monotone_member_values() {
        let b = make_f(d1(), MParam { kappa: 1.0, c: 0.5 }).unwrap();
        assert_eq!((b.eval(0.0), b.eval(0.5), b.eval(1.0)), (0.5, 0.5, 0.0));
        let z = make_f(d1(), MParam { kappa: 0.0, c: 0.3 }).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let f = SpectrumFn::ExactBeta(make_f(d1(), MParam { kappa: 1.0, c: 0.9 }).unwrap());
        assert!((f.value(0.0) - 0.1).abs() < 1e-15);
        assert!(make_f(d1(), MParam { kappa: 1.0, c: 1.0 }).is_err());
        assert!(make_f(d1(), MParam { kappa: 1.5, c: 0.5 }).is_err());
    }

    #[test]
    fn nonmonotone_member_tick_values() {
        let h = make_h(d1(), CParam { kappa: 1.0, c1: 1.0 / 3.0, c2: 0.5 }).unwrap();
        let f = SpectrumFn::ExactBeta(h.clone());
        assert!((f.value(1.0 / 3.0) - 0.75).abs() < 1e-12);
        assert!((f.value(0.5) - 2.0 / 3.0).abs() < 1e-12);
        assert!((f.value(0.0) - 0.5).abs() < 1e-12);
        for t in [0.7, 0.8, 0.95] {
            assert!((f.value(t) - 1.0).abs() < 1e-12);
        }
        let lhs = h.eval(0.25) / 0.75;
        let rhs = h.eval(0.5) / 0.5;
        assert!((lhs - rhs).abs() < 1e-12 && (lhs - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn nonmonotone_rescaling_invariance() {
        let (c1, c2) = (0.2, 0.3);
        let h = make_h(d1(), CParam { kappa: 0.7, c1, c2 }).unwrap();
        for i in 0..=50 {
            let t = c2 * c2 + (c1 - c2 * c2) * i as f64 / 50.0;
            assert!((h.eval(t) - h.eval(t / c2) - 0.7 * (c2 - c1)).abs() < 1e-12);
        }
        // Past c1 the difference shrinks: at θ = c2 it is κ(1 − c1/c2).
        assert!((h.eval(c2) - h.eval(1.0) - 0.7 * (1.0 - c1 / c2)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_members() {
        let c1: f64 = 0.36;
        let h = make_h(d1(), CParam { kappa: 0.8, c1, c2: c1.sqrt() }).unwrap();
        let f = make_f(d1(), MParam { kappa: 0.8, c: c1 }).unwrap();
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            assert_eq!(h.eval(t), f.eval(t));
        }
        let z = make_h(d1(), CParam { kappa: 0.8, c1: 0.3, c2: 0.3 }).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let z = make_h(d1(), CParam { kappa: 0.0, c1: 0.3, c2: 0.4 }).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let full = make_h(d1(), CParam { kappa: 0.6, c1: 0.0, c2: 0.0 }).unwrap();
        assert!((full.eval(0.25) - 0.45).abs() < 1e-15);
        assert!(make_h(d1(), CParam { kappa: 1.0, c1: 0.3, c2: 0.2 }).is_err());
        assert!(make_h(d1(), CParam { kappa: 1.0, c1: 0.25, c2: 0.6 }).is_err());
    }

    #[test]
    fn c_of_examples() {
        let lam: f64 = 0.25;
        assert!((c_of(lam, 0.75, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((c_of(lam, 0.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        let c = c_of(lam, 0.5, 1.0).unwrap();
        let h = make_h(d1(), CParam { kappa: 1.0, c1: lam, c2: c }).unwrap();
        assert!((h.eval(lam) - 0.5).abs() < 1e-12);
        assert!(c_of(lam, 0.8, 1.0).is_err());
        assert!(c_of(lam, -0.1, 1.0).is_err());
    }

    #[test]
    fn holder_constants() {
        let h = HolderExample::new();
        let golden = 0.5 * (1.0 + 5f64.sqrt());
        assert!((h.theta0 - (1.0 - (-golden).exp())).abs() < 1e-12);
        assert!((h.theta0 - 0.801712).abs() < 1e-6);
        assert!((h.f_theta0 - 0.381966).abs() < 1e-6);
        assert!((h.f_theta0 - 0.5 * (3.0 - 5f64.sqrt())).abs() < 1e-12);
        assert!((h.sigma(1.0 - 1e-300) - 1.0).abs() < 1e-2);
        assert_eq!(h.sigma(1.0), 1.0);
    }

    #[test]
    fn holder_sigma_is_admissible_upper_form() {
        let s = make_holder_failure();
        let g = GridSpec::new(200, crate::validation::Spacing::GeometricNearEndpoints, 1e-9).unwrap();
        assert!(check_upper_form(&s, &g).passed);
        assert!(check_ad(&s, &GridSpec::uniform(200)).passed);
    }

    fn divergence(a: f64) -> Vec<f64> {
        let h = HolderExample::new();
        (2..=10)
            .map(|k| {
                let t = 1.0 - 10f64.powi(-k);
                (h.sigma(1.0) - h.sigma(t)) / (1.0 - t).powf(a)
            })
            .collect()
    }

    #[test]
    fn holder_divergence_ladders() {
        for a in [0.5, 0.25] {
            let v = divergence(a);
            assert!(v.windows(2).all(|w| w[0] < w[1]), "a = {a}: {v:?}");
        }
        // k = 8 is index 6.
        assert!(divergence(0.5)[6] > 10.0);
        // The quarter exponent grows like 10^{k/4}/(k log 10): about 5.4 at
        // k = 8, above 10 from k = 10.
        let q = divergence(0.25);
        assert!(q[6] < 10.0 && q[8] > 10.0, "{q:?}");
    }

    #[test]
    fn holder_envelope_examples() {
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let c = holder_envelope(d1(), |_| 0.6, grid.clone()).unwrap();
        assert!(grid.iter().all(|&t| (c.value(t) - 0.6).abs() < 1e-12));
        let lin = holder_envelope(d1(), |t| 0.5 + 0.5 * t, grid.clone()).unwrap();
        assert!((lin.value(1.0) - 1.0).abs() < 1e-12);
        assert!((lin.value(0.999) - 1.0).abs() < 1e-3);
        assert!(holder_envelope(d1(), |t| t, grid.clone()).is_err());

        // f = 1 + 1/log(1−θ) is negative near 0, so the envelope is taken of
        // max{f, σ}, which is positive and increasing; it must reproduce the
        // tabulated σ.
        let h = HolderExample::new();
        let sigma = make_holder_failure();
        let fhat = |t: f64| if t >= 1.0 { 1.0 } else { h.f(t).max(h.sigma(t)) };
        let env = holder_envelope(d1(), fhat, sigma.nodes().to_vec()).unwrap();
        for &t in sigma.nodes().iter().filter(|&&t| t < 1.0) {
            assert!((env.value(t) - sigma.value(t)).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn nonmonotone_depth_one() {
        let target = SpectrumFn::ExactBeta(make_f(d1(), MParam { kappa: 1.0, c: 0.5 }).unwrap());
        let b = build_nonmonotone(&target, 0.1, 1).unwrap();
        assert_eq!(b.choices.len(), 1);
        let ch = &b.choices[0];
        assert_eq!(ch.lambda, 0.5);
        assert!(ch.window.0 < ch.y && ch.y < ch.window.1);
        assert!(ch.y < b.perturbed.beta(0.5));
        assert!((b.beta.eval(0.5) - ch.y).abs() < 1e-12);
    }

    #[test]
    fn nonmonotone_large_epsilon() {
        let target = SpectrumFn::ExactBeta(make_f(d1(), MParam { kappa: 1.0, c: 0.5 }).unwrap());
        let b = build_nonmonotone(&target, 2.0, 3).unwrap();
        assert!(check_ad(&b.spectrum(), &GridSpec::uniform(200)).passed);
    }

    #[test]
    fn nonmonotone_depth_six() {
        let target = SpectrumFn::ExactBeta(make_f(d1(), MParam { kappa: 1.0, c: 0.5 }).unwrap());
        let b = build_nonmonotone(&target, 0.1, 6).unwrap();
        let f = b.spectrum();
        assert!(check_ad(&f, &GridSpec::uniform(200)).passed);
        let gap = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .map(|t| (f.value(t) - target.value(t)).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 0.1, "gap {gap}");
        let h = 2f64.powi(-9);
        for j in 1..16 {
            let lam = j as f64 / 16.0;
            let v = f.value(lam);
            assert!(v > f.value(lam - h) && v > f.value(lam + h), "lambda = {lam}");
        }
        assert!(check_upper_form(&running_max(&f), &GridSpec::uniform(1000)).passed);
    }

    proptest! {
        #[test]
        fn families_are_admissible(k in 0.0f64..=2.0, c1 in 0.01f64..0.95, s in 0.0f64..=1.0) {
            let d = AmbientDim::new(2).unwrap();
            let c2 = c1 + s * (c1.sqrt() - c1);
            let g = GridSpec::uniform(80);
            let h = SpectrumFn::ExactBeta(make_h(d, CParam { kappa: k, c1, c2 }).unwrap());
            prop_assert!(check_ad(&h, &g).passed);
            let f = SpectrumFn::ExactBeta(make_f(d, MParam { kappa: k, c: c1 }).unwrap());
            prop_assert!(check_ad(&f, &g).passed);
        }

        #[test]
        fn c_of_is_increasing_in_y(lam in 0.01f64..0.99, phi in 0.05f64..1.0) {
            let top = (1.0 - lam) * phi;
            let ladder: Vec<f64> = (0..=20).map(|i| c_of(lam, top * i as f64 / 20.0, phi).unwrap()).collect();
            prop_assert!(ladder.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn nonmonotone_running_max_is_upper_form(
            d in 1u32..=2,
            k in 0.1f64..=1.0,
            c in 0.05f64..0.95,
            e in 0.2f64..=1.0,
            depth in 1u32..=5,
        ) {
            let dim = AmbientDim::new(d).unwrap();
            let target = SpectrumFn::ExactBeta(make_f(dim, MParam { kappa: k * d as f64, c }).unwrap());
            let eps = e * d as f64;
            let b = build_nonmonotone(&target, eps, depth).unwrap();
            let f = b.spectrum();
            prop_assert!(check_ad(&f, &GridSpec::uniform(100)).passed);
            prop_assert!(check_upper_form(&running_max(&f), &GridSpec::uniform(500)).passed);
            let gap = (0..=1000)
                .map(|i| i as f64 / 1000.0)
                .map(|t| (f.value(t) - target.value(t)).abs())
                .fold(0.0, f64::max);
            prop_assert!(gap <= eps, "gap {}", gap);
            if depth >= 3 {
                let h = 2f64.powi(-(depth as i32) - 3);
                let m = 1u32 << (depth - 2);
                for j in 1..m {
                    let lam = j as f64 / m as f64;
                    let v = f.value(lam);
                    prop_assert!(v > f.value(lam - h) && v > f.value(lam + h), "lambda = {}", lam);
                }
            }
        }
    }
}
