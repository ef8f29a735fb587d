//! Grid checks of the admissibility inequalities and their consequences.
//!
//! Every check returns a [`ValidationReport`]; mathematical failure is report
//! content, never an error. Asymptotic statements (Dini derivatives, limits)
//! are replaced by explicit finite ladders that are recorded in the report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumFn;

/// Default tolerance for equality-type assertions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Points per decade-pair of the Dini ladder `[h_min, 100 h_min]`.
const DINI_LADDER: usize = 21;

/// Exponents `j` used for the near-endpoint points `2^{-j}` and `1 − 2^{-j}`.
const GEOMETRIC_DEPTH: i32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Uniform,
    GeometricNearEndpoints,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_theta: usize,
    pub spacing: Spacing,
    pub tolerance: f64,
}

impl GridSpec {
    pub fn new(n_theta: usize, spacing: Spacing, tolerance: f64) -> Result<Self> {
        if n_theta < 2 {
            return Err(Error::Argument("grid needs n_theta >= 2".into()));
        }
        if !(tolerance > 0.0) {
            return Err(Error::Argument("tolerance must be positive".into()));
        }
        Ok(GridSpec { n_theta, spacing, tolerance })
    }

    pub fn uniform(n_theta: usize) -> Self {
        GridSpec { n_theta, spacing: Spacing::Uniform, tolerance: DEFAULT_TOL }
    }

    /// Interior grid points in increasing order.
    ///
    /// Uniform spacing gives `i/(n+1)` for `i = 1..=n`; the geometric variant
    /// adds `2^{-j}` and `1 − 2^{-j}`.
    pub fn points(&self) -> Vec<f64> {
        let n = self.n_theta;
        let mut pts: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        if self.spacing == Spacing::GeometricNearEndpoints {
            for j in 1..=GEOMETRIC_DEPTH {
                let h = 2f64.powi(-j);
                pts.push(h);
                pts.push(1.0 - h);
            }
            pts.sort_by(f64::total_cmp);
            pts.dedup();
        }
        pts
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    /// Largest amount by which the inequality fails; 0 when it always holds.
    pub worst_violation: f64,
    /// Argument(s) attaining `worst_violation`, empty if nothing was sampled.
    pub witness: Vec<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub grid: Option<GridSpec>,
    pub notes: Vec<String>,
    /// Set when a check declines to give a verdict because its precondition
    /// failed (for instance a monotonicity-based criterion on a non-monotone
    /// input). `passed` is false in that case.
    pub abstained: bool,
}

impl ValidationReport {
    fn new(grid: Option<GridSpec>, checks: Vec<CheckOutcome>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        ValidationReport { passed, checks, grid, notes: Vec::new(), abstained: false }
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

/// Running worst violation; ties keep the first candidate seen.
#[derive(Clone, Debug)]
pub(crate) struct Worst {
    value: f64,
    witness: Vec<f64>,
}

impl Worst {
    pub(crate) fn new() -> Self {
        Worst { value: f64::NEG_INFINITY, witness: Vec::new() }
    }

    pub(crate) fn offer(&mut self, value: f64, witness: &[f64]) {
        // NaN is treated as an infinite violation.
        let value = if value.is_nan() { f64::INFINITY } else { value };
        if value > self.value {
            self.value = value;
            self.witness = witness.to_vec();
        }
    }

    fn merge(mut self, other: Worst) -> Worst {
        if other.value > self.value {
            self = other;
        }
        self
    }

    pub(crate) fn outcome(self, name: &str, tol: f64) -> CheckOutcome {
        let worst = self.value.max(0.0);
        CheckOutcome { name: name.to_string(), worst_violation: worst, witness: self.witness, passed: worst <= tol }
    }
}

/// Checks `0 ≤ β(λ) − β(θ) ≤ (θ−λ)φ(λ/θ)` over all grid pairs `λ < θ`, and the
/// secant restatement `(β(λ)−β(θ))/(θ−λ) ≤ β(λ/θ)/(1−λ/θ)`.
///
/// The secant violation is scaled back by `θ−λ` so both forms share the
/// tolerance; the report records how many pairs the two forms classify
/// differently.
pub fn check_ad(f: &SpectrumFn, grid: &GridSpec) -> ValidationReport {
    let pts = grid.points();
    let betas: Vec<f64> = pts.iter().map(|&t| f.beta(t)).collect();
    let tol = grid.tolerance;

    let rows: Vec<(Worst, Worst, Worst, usize)> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let (mut left, mut right, mut secant) = (Worst::new(), Worst::new(), Worst::new());
            let mut disagree = 0usize;
            let lam = pts[i];
            for j in i + 1..pts.len() {
                let th = pts[j];
                let drop = betas[i] - betas[j];
                let ratio = lam / th;
                let phi_ratio = f.value(ratio);
                let w = [lam, th];
                left.offer(-drop, &w);
                let r = drop - (th - lam) * phi_ratio;
                right.offer(r, &w);
                let s = (drop / (th - lam) - f.beta(ratio) / (1.0 - ratio)) * (th - lam);
                secant.offer(s, &w);
                if (r > tol) != (s > tol) {
                    disagree += 1;
                }
            }
            (left, right, secant, disagree)
        })
        .collect();

    let (mut left, mut right, mut secant) = (Worst::new(), Worst::new(), Worst::new());
    let mut disagree = 0;
    for (l, r, s, n) in rows {
        left = left.merge(l);
        right = right.merge(r);
        secant = secant.merge(s);
        disagree += n;
    }
    let mut report = ValidationReport::new(
        Some(*grid),
        vec![
            left.outcome("left", tol),
            right.outcome("right", tol),
            secant.outcome("secant", tol),
        ],
    );
    report.notes.push(format!("pairs where right and secant forms disagree: {disagree}"));
    report
}

/// Checks `φ(θ) ≤ φ(θ^{1/n}) + tol` for `n = 1..=n_max`.
pub fn check_nth_root(f: &SpectrumFn, theta: f64, n_max: u32) -> Result<ValidationReport> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} not in (0,1)")));
    }
    let base = f.value(theta);
    let mut worst = Worst::new();
    for n in 1..=n_max {
        let root = theta.powf(1.0 / n as f64);
        worst.offer(base - f.value(root), &[n as f64, root]);
    }
    Ok(ValidationReport::new(None, vec![worst.outcome("nth-root", DEFAULT_TOL)]))
}

fn dini_ladder(h_min: f64) -> impl Iterator<Item = f64> {
    (0..DINI_LADDER).map(move |j| h_min * 100f64.powf(j as f64 / (DINI_LADDER - 1) as f64))
}

fn check_dini_args(theta: f64, h_min: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} not in (0,1)")));
    }
    if !(h_min > 0.0) {
        return Err(Error::Domain("h_min must be positive".into()));
    }
    if theta + 100.0 * h_min >= 1.0 {
        return Err(Error::Domain(format!("ladder from theta = {theta} leaves (0,1)")));
    }
    Ok(())
}

/// Largest forward difference quotient of `φ` at `θ` over a geometric ladder
/// of `ε ∈ [h_min, 100 h_min]`; a finite stand-in for the upper right Dini
/// derivative.
pub fn dini_plus(f: &SpectrumFn, theta: f64, h_min: f64) -> Result<f64> {
    check_dini_args(theta, h_min)?;
    let base = f.value(theta);
    Ok(dini_ladder(h_min)
        .map(|e| (f.value(theta + e) - base) / e)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Default smallest step of the Dini ladder used by the grid checks.
pub const DINI_H_MIN: f64 = 1e-6;

/// Rate constraints at every grid point whose ladder stays inside `(0,1)`.
///
/// Each ladder quotient `q(ε)` is tested against the finite-scale forms
/// that the admissibility inequalities give directly,
/// `q(ε) ≤ φ(θ+ε)/(1−θ)` and `q(ε) ≥ −(φ(θ/(θ+ε)) − φ(θ))/(1−θ−ε)`,
/// whose `ε → 0` limits are the Dini bounds. The Lipschitz bound `d/δ` is
/// checked between consecutive grid points of `[0, 1−δ]`, `δ ∈ {0.1, 0.25}`.
pub fn check_rate_bounds(f: &SpectrumFn, grid: &GridSpec) -> ValidationReport {
    let pts = grid.points();
    let d = f.dim().as_f64();
    // Round-off in a difference quotient at step h is about eps·d/h.
    let tol = grid.tolerance + 16.0 * f64::EPSILON * d / DINI_H_MIN;
    let (mut upper, mut lower) = (Worst::new(), Worst::new());
    for &t in &pts {
        if check_dini_args(t, DINI_H_MIN).is_err() {
            continue;
        }
        let base = f.value(t);
        for e in dini_ladder(DINI_H_MIN) {
            let q = (f.value(t + e) - base) / e;
            upper.offer(q - f.value(t + e) / (1.0 - t), &[t, e]);
            let lo = -(f.value(t / (t + e)) - base) / (1.0 - t - e);
            lower.offer(lo - q, &[t, e]);
        }
    }
    let mut checks = vec![upper.outcome("dini-upper", tol), lower.outcome("dini-lower", tol)];
    for delta in [0.1, 0.25] {
        let mut lip = Worst::new();
        let mut prev = (0.0, f.value(0.0));
        for &t in pts.iter().filter(|&&t| t <= 1.0 - delta) {
            let v = f.value(t);
            lip.offer((v - prev.1).abs() / (t - prev.0) - d / delta, &[prev.0, t]);
            prev = (t, v);
        }
        checks.push(lip.outcome(&format!("lipschitz-{delta}"), grid.tolerance));
    }
    let mut report = ValidationReport::new(Some(*grid), checks);
    report.notes.push(format!(
        "dini ladder: {DINI_LADDER} geometric steps in [{DINI_H_MIN:e}, {:e}]; quotient tolerance {tol:e}",
        100.0 * DINI_H_MIN
    ));
    report
}

fn monotone_outcome(name: &str, values: &[f64], pts: &[f64], tol: f64, increasing: bool) -> CheckOutcome {
    let mut worst = Worst::new();
    // Compare against the running extreme so non-adjacent drops are caught.
    let mut extreme = (pts[0], values[0]);
    for (&t, &v) in pts.iter().zip(values).skip(1) {
        let excess = if increasing { extreme.1 - v } else { v - extreme.1 };
        worst.offer(excess, &[extreme.0, t]);
        if (increasing && v > extreme.1) || (!increasing && v < extreme.1) {
            extreme = (t, v);
        }
    }
    worst.outcome(name, tol)
}

/// Criterion for increasing functions: `φ` increasing and `D⁺φ ≤ φ/(1−θ)`.
///
/// The rate bound is tested in its finite-difference form
/// `q(ε) ≤ φ(θ+ε)/(1−θ)`. For a non-increasing input the report abstains.
pub fn check_increasing_ad(f: &SpectrumFn, grid: &GridSpec) -> ValidationReport {
    let pts = grid.points();
    let phis: Vec<f64> = pts.iter().map(|&t| f.value(t)).collect();
    let mono = monotone_outcome("increasing", &phis, &pts, grid.tolerance, true);
    if !mono.passed {
        let mut report = ValidationReport::new(Some(*grid), vec![mono]);
        report.abstained = true;
        report.notes.push("input is not increasing; no admissibility verdict".into());
        return report;
    }
    let rate = check_rate_bounds(f, grid);
    let upper = rate.check("dini-upper").cloned().expect("rate report has dini-upper");
    ValidationReport::new(Some(*grid), vec![mono, upper])
}

/// Upper-spectrum form: `φ` increasing and `β` decreasing on the grid.
pub fn check_upper_form(f: &SpectrumFn, grid: &GridSpec) -> ValidationReport {
    let pts = grid.points();
    let phis: Vec<f64> = pts.iter().map(|&t| f.value(t)).collect();
    let betas: Vec<f64> = pts.iter().map(|&t| f.beta(t)).collect();
    ValidationReport::new(
        Some(*grid),
        vec![
            monotone_outcome("phi-increasing", &phis, &pts, grid.tolerance, true),
            monotone_outcome("beta-decreasing", &betas, &pts, grid.tolerance, false),
        ],
    )
}

/// Finite versions of two structural consequences of admissibility.
///
/// - `flat-top`: once `φ(θ₀) ≥ φ(1) − tol` at a grid point, `φ` stays within
///   `10·tol` of `φ(θ₀)` on the rest of the grid.
/// - `zero-floor`: if `φ(0) ≤ tol` then `φ ≤ tol/(1−θ_max)` on the grid,
///   where `θ_max` is the largest grid point; this is the constant forced by
///   `β` being decreasing.
pub fn check_structure(f: &SpectrumFn, grid: &GridSpec) -> ValidationReport {
    let pts = grid.points();
    let tol = grid.tolerance;
    let phi1 = f.value(1.0);
    let mut flat = Worst::new();
    if let Some(i0) = pts.iter().position(|&t| f.value(t) >= phi1 - tol) {
        let v0 = f.value(pts[i0]);
        for &t in &pts[i0 + 1..] {
            flat.offer((f.value(t) - v0).abs() - 10.0 * tol, &[pts[i0], t]);
        }
    }
    let mut floor = Worst::new();
    if f.value(0.0) <= tol {
        let c = 1.0 / (1.0 - pts.last().copied().unwrap_or(0.0));
        for &t in &pts {
            floor.offer(f.value(t) - c * tol, &[t]);
        }
    }
    ValidationReport::new(Some(*grid), vec![flat.outcome("flat-top", 0.0), floor.outcome("zero-floor", 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{AmbientDim, BetaFn};
    use proptest::prelude::*;

    fn d1() -> AmbientDim {
        AmbientDim::new(1).unwrap()
    }

    fn mfam(kappa: f64, c: f64) -> SpectrumFn {
        BetaFn::new(d1(), vec![0.0, c, 1.0], vec![kappa * (1.0 - c), kappa * (1.0 - c), 0.0])
            .unwrap()
            .into()
    }

    fn identity() -> SpectrumFn {
        SpectrumFn::tabulate(d1(), (0..=1000).map(|i| i as f64 / 1000.0).collect(), |t| t).unwrap()
    }

    #[test]
    fn grid_points_are_interior_and_sorted() {
        let g = GridSpec::new(9, Spacing::GeometricNearEndpoints, 1e-9).unwrap();
        let p = g.points();
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert!(p[0] > 0.0 && *p.last().unwrap() < 1.0);
        assert!(p.contains(&(1.0 - 2f64.powi(-30))));
        assert!(GridSpec::new(1, Spacing::Uniform, 1e-9).is_err());
        assert!(GridSpec::new(5, Spacing::Uniform, 0.0).is_err());
    }

    #[test]
    fn monotone_member_is_admissible() {
        let r = check_ad(&mfam(1.0, 0.5), &GridSpec::uniform(200));
        assert!(r.passed, "{r:?}");
        assert!(r.notes[0].ends_with(": 0"));
    }

    #[test]
    fn identity_fails_left_inequality() {
        let f = identity();
        let r = check_ad(&f, &GridSpec::uniform(99));
        assert!(!r.passed);
        let left = r.check("left").unwrap();
        assert!(!left.passed);
        let (l, t) = (left.witness[0], left.witness[1]);
        assert!(f.beta(l) < f.beta(t));
        // The pair from the worked example also violates it.
        assert!((f.beta(0.1) - 0.09).abs() < 1e-12 && (f.beta(0.2) - 0.16).abs() < 1e-12);
    }

    #[test]
    fn nth_root_chain() {
        let f = mfam(1.0, 0.5);
        assert!(check_nth_root(&f, 0.5, 10).unwrap().passed);
        // Non-monotone member (1, 1/3, 1/2).
        let h = SpectrumFn::ExactBeta(
            BetaFn::new(
                d1(),
                vec![0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0],
                vec![0.5, 0.5, 1.0 / 3.0, 1.0 / 3.0, 0.0],
            )
            .unwrap(),
        );
        assert!(check_nth_root(&h, 0.49, 6).unwrap().passed);
        assert!(check_nth_root(&identity(), 0.3, 1).unwrap().passed);
        assert!(check_nth_root(&h, 1.0, 3).is_err());
    }

    #[test]
    fn dini_examples() {
        let f = mfam(1.0, 0.5);
        assert!(dini_plus(&f, 0.75, 1e-6).unwrap().abs() < 1e-9);
        let v = dini_plus(&f, 0.25, 1e-6).unwrap();
        assert!((v - 8.0 / 9.0).abs() < 1e-3, "{v}");
        let c = mfam(0.6, 0.5);
        assert!(dini_plus(&c, 0.7, 1e-6).unwrap().abs() < 1e-9);
        assert!(dini_plus(&f, 0.99999, 1e-6).is_err());
        assert!(dini_plus(&f, 0.5, 0.0).is_err());
    }

    #[test]
    fn rate_bounds_on_examples() {
        let g = GridSpec::uniform(200);
        let r = check_rate_bounds(&mfam(1.0, 0.5), &g);
        assert!(r.passed, "{r:?}");
        let full = SpectrumFn::ExactBeta(BetaFn::constant_phi(d1(), 1.0).unwrap());
        assert!(check_rate_bounds(&full, &g).passed);
    }

    #[test]
    fn increasing_criterion() {
        let g = GridSpec::uniform(200);
        let f = mfam(0.7, 0.4);
        let r = check_increasing_ad(&f, &g);
        assert!(r.passed && !r.abstained);
        assert_eq!(r.passed, check_ad(&f, &g).passed);
        let zero = SpectrumFn::ExactBeta(BetaFn::constant_phi(d1(), 0.0).unwrap());
        assert!(check_increasing_ad(&zero, &g).passed);
        let h = SpectrumFn::ExactBeta(
            BetaFn::new(
                d1(),
                vec![0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0],
                vec![0.5, 0.5, 1.0 / 3.0, 1.0 / 3.0, 0.0],
            )
            .unwrap(),
        );
        let r = check_increasing_ad(&h, &g);
        assert!(r.abstained && !r.passed);
    }

    #[test]
    fn identity_is_increasing_but_rejected() {
        let g = GridSpec::uniform(100);
        let f = identity();
        let r = check_increasing_ad(&f, &g);
        assert!(!r.abstained && !r.passed);
        assert_eq!(r.passed, check_ad(&f, &g).passed);
    }

    #[test]
    fn upper_form_examples() {
        let g = GridSpec::uniform(200);
        assert!(check_upper_form(&mfam(1.0, 0.5), &g).passed);
        let r = check_upper_form(&identity(), &g);
        assert!(!r.passed);
        assert!(!r.check("beta-decreasing").unwrap().passed);
        assert!(r.check("phi-increasing").unwrap().passed);
    }

    #[test]
    fn report_serializes() {
        let r = check_ad(&identity(), &GridSpec::uniform(20));
        let back: ValidationReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn monotone_family_structure(k in 0.0f64..=1.0, c in 0.01f64..0.99) {
            let f = mfam(k, c);
            let g = GridSpec::new(100, Spacing::GeometricNearEndpoints, 1e-9).unwrap();
            prop_assert!(check_structure(&f, &g).passed);
        }

        #[test]
        fn increasing_criterion_agrees_with_ad(
            k1 in 0.0f64..=1.0, c1 in 0.05f64..0.95, k2 in 0.0f64..=1.0, c2 in 0.05f64..0.95,
            p in 0.5f64..3.0, scale in 0.1f64..1.0,
        ) {
            let g = GridSpec::uniform(60);
            // Suprema of monotone members: increasing and admissible.
            let good = crate::spectrum::pointwise_sup(&[mfam(k1, c1), mfam(k2, c2)]).unwrap();
            prop_assert!(check_ad(&good, &g).passed);
            prop_assert!(check_increasing_ad(&good, &g).passed);
            // Powers: increasing, with β increasing near 0.
            let pts: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
            let bad = SpectrumFn::tabulate(d1(), pts, |t| scale * t.powf(p)).unwrap();
            let r = check_increasing_ad(&bad, &g);
            prop_assert!(!r.abstained);
            prop_assert!(!r.passed);
            prop_assert!(!check_ad(&bad, &g).passed);
        }

        #[test]
        fn secant_form_agrees(k in 0.0f64..=1.0, c in 0.01f64..0.99, s in 0.0f64..0.5) {
            let pts: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
            let m = mfam(k, c);
            let f = SpectrumFn::tabulate(d1(), pts, |t| (m.value(t) + s * t).min(1.0)).unwrap();
            let r = check_ad(&f, &GridSpec::uniform(50));
            prop_assert!(r.notes[0].ends_with(": 0"), "{}", r.notes[0]);
        }
    }
}
