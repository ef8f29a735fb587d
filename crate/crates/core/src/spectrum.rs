//! Candidate spectrum functions and their β-transforms.
//!
//! The canonical representation is [`BetaFn`]: a continuous piecewise-linear
//! `β` on `[0,1]`. The spectrum itself is recovered as `φ(θ) = β(θ)/(1−θ)`
//! only at evaluation time. Inputs that are not piecewise linear in `β` enter
//! as a [`Tabulated`] `φ` with linear interpolation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking `0 ≤ β ≤ d(1−θ)` and `0 ≤ φ ≤ d` at construction.
const RANGE_SLACK: f64 = 1e-9;

/// Ambient Euclidean dimension `d ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct AmbientDim(u32);

impl AmbientDim {
    pub fn new(d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::Argument("ambient dimension must be at least 1".into()));
        }
        Ok(AmbientDim(d))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<u32> for AmbientDim {
    type Error = Error;
    fn try_from(d: u32) -> Result<Self> {
        AmbientDim::new(d)
    }
}

impl From<AmbientDim> for u32 {
    fn from(d: AmbientDim) -> u32 {
        d.0
    }
}

fn check_abscissae(xs: &[f64], what: &str) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::Argument(format!("{what}: need at least two points")));
    }
    if xs[0] != 0.0 || *xs.last().unwrap() != 1.0 {
        return Err(Error::Argument(format!("{what}: grid must start at 0 and end at 1")));
    }
    for w in xs.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Argument(format!(
                "{what}: abscissae must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Index `i` such that `xs[i] ≤ x ≤ xs[i+1]`, clamped to the valid range.
fn segment_index(xs: &[f64], x: f64) -> usize {
    let i = xs.partition_point(|&b| b <= x);
    i.clamp(1, xs.len() - 1) - 1
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = segment_index(xs, x);
    let (a, b) = (xs[i], xs[i + 1]);
    if x == a {
        return ys[i];
    }
    if x == b {
        return ys[i + 1];
    }
    // Anchored at the right end so values near θ = 1 keep their relative accuracy.
    ys[i + 1] + (ys[i] - ys[i + 1]) * ((b - x) / (b - a))
}

/// Continuous piecewise-linear `β(θ) = (1−θ)φ(θ)` on `[0,1]`.
///
/// Invariants: breakpoints strictly increasing from 0 to 1, and
/// `0 ≤ β(θ) ≤ d(1−θ)` at every breakpoint (hence everywhere, by linearity).
/// In particular `β(1) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaFn {
    d: AmbientDim,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl BetaFn {
    pub fn new(d: AmbientDim, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::Argument("breakpoints and values differ in length".into()));
        }
        check_abscissae(&breakpoints, "beta breakpoints")?;
        let dim = d.as_f64();
        for (&t, &v) in breakpoints.iter().zip(&values) {
            if !v.is_finite() || v < -RANGE_SLACK || v > dim * (1.0 - t) + RANGE_SLACK {
                return Err(Error::Argument(format!(
                    "beta({t}) = {v} outside [0, d(1-theta)]"
                )));
            }
        }
        let mut values = values;
        for v in values.iter_mut() {
            *v = v.max(0.0);
        }
        *values.last_mut().unwrap() = 0.0;
        Ok(BetaFn { d, breakpoints, values })
    }

    /// Builds from `(θ, β)` pairs, merging abscissae closer than `1e-15`.
    pub fn from_points(d: AmbientDim, points: &[(f64, f64)]) -> Result<Self> {
        let mut xs: Vec<f64> = Vec::with_capacity(points.len());
        let mut ys: Vec<f64> = Vec::with_capacity(points.len());
        for &(x, y) in points {
            if let Some(&last) = xs.last() {
                if x - last <= 1e-15 {
                    let n = ys.len();
                    ys[n - 1] = ys[n - 1].max(y);
                    continue;
                }
            }
            xs.push(x);
            ys.push(y);
        }
        if let Some(last) = xs.last_mut() {
            if (*last - 1.0).abs() <= 1e-15 {
                *last = 1.0;
            }
        }
        BetaFn::new(d, xs, ys)
    }

    /// `β(θ) = κ(1−θ)`, i.e. the constant spectrum `κ`.
    pub fn constant_phi(d: AmbientDim, kappa: f64) -> Result<Self> {
        BetaFn::new(d, vec![0.0, 1.0], vec![kappa, 0.0])
    }

    pub fn dim(&self) -> AmbientDim {
        self.d
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `β(θ)` for `θ ∈ [0,1]` (clamped outside).
    pub fn eval(&self, theta: f64) -> f64 {
        interpolate(&self.breakpoints, &self.values, theta.clamp(0.0, 1.0))
    }

    /// Segments as `((a, β(a)), (b, β(b)))`.
    pub fn segments(&self) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
        (0..self.breakpoints.len() - 1).map(move |i| {
            (
                (self.breakpoints[i], self.values[i]),
                (self.breakpoints[i + 1], self.values[i + 1]),
            )
        })
    }

    /// Slope of `β` on the segment containing `θ` (right segment at breakpoints).
    pub fn slope_at(&self, theta: f64) -> f64 {
        let i = segment_index(&self.breakpoints, theta);
        (self.values[i + 1] - self.values[i]) / (self.breakpoints[i + 1] - self.breakpoints[i])
    }

    /// `φ(θ)` on the closed interval; `φ(1)` is the limit `β(b)/(1−b)` over
    /// the last segment `[b, 1]`.
    pub fn phi(&self, theta: f64) -> f64 {
        if theta >= 1.0 {
            let n = self.breakpoints.len();
            let b = self.breakpoints[n - 2];
            return self.values[n - 2] / (1.0 - b);
        }
        let theta = theta.max(0.0);
        self.eval(theta) / (1.0 - theta)
    }
}

/// Tabulated spectrum `φ` on a grid that includes both endpoints, linearly
/// interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabulated {
    d: AmbientDim,
    thetas: Vec<f64>,
    phis: Vec<f64>,
}

impl Tabulated {
    pub fn new(d: AmbientDim, thetas: Vec<f64>, phis: Vec<f64>) -> Result<Self> {
        if thetas.len() != phis.len() {
            return Err(Error::Argument("grid and values differ in length".into()));
        }
        check_abscissae(&thetas, "table grid")?;
        let dim = d.as_f64();
        for (&t, &v) in thetas.iter().zip(&phis) {
            if !v.is_finite() || v < -RANGE_SLACK || v > dim + RANGE_SLACK {
                return Err(Error::Argument(format!("phi({t}) = {v} outside [0, d]")));
            }
        }
        let phis = phis.into_iter().map(|v| v.clamp(0.0, dim)).collect();
        Ok(Tabulated { d, thetas, phis })
    }

    pub fn dim(&self) -> AmbientDim {
        self.d
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn phi(&self, theta: f64) -> f64 {
        interpolate(&self.thetas, &self.phis, theta.clamp(0.0, 1.0))
    }
}

/// A candidate spectrum `φ: [0,1] → [0,d]`.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumFn {
    ExactBeta(BetaFn),
    Tabulated(Tabulated),
}

impl SpectrumFn {
    /// Samples `f` on `grid` (which must contain 0 and 1).
    pub fn tabulate(d: AmbientDim, grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let phis = grid.iter().map(|&t| f(t)).collect();
        Ok(SpectrumFn::Tabulated(Tabulated::new(d, grid, phis)?))
    }

    pub fn dim(&self) -> AmbientDim {
        match self {
            SpectrumFn::ExactBeta(b) => b.dim(),
            SpectrumFn::Tabulated(t) => t.dim(),
        }
    }

    /// `φ(θ)` for `θ` in the open interval `(0,1)`.
    pub fn eval_phi(&self, theta: f64) -> Result<f64> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Domain(format!("theta = {theta} not in (0,1)")));
        }
        Ok(self.value(theta))
    }

    /// `φ` on `[0,1]`, using the endpoint limits (exact form) or the stored
    /// endpoint samples (tabulated form).
    pub fn value(&self, theta: f64) -> f64 {
        match self {
            SpectrumFn::ExactBeta(b) => b.phi(theta),
            SpectrumFn::Tabulated(t) => t.phi(theta),
        }
    }

    /// `β(θ) = (1−θ)φ(θ)` on `[0,1]`.
    pub fn beta(&self, theta: f64) -> f64 {
        match self {
            SpectrumFn::ExactBeta(b) => b.eval(theta),
            SpectrumFn::Tabulated(t) => (1.0 - theta) * t.phi(theta),
        }
    }

    pub fn as_beta(&self) -> Option<&BetaFn> {
        match self {
            SpectrumFn::ExactBeta(b) => Some(b),
            SpectrumFn::Tabulated(_) => None,
        }
    }

    /// Abscissae at which the representation changes: breakpoints or grid nodes.
    pub fn nodes(&self) -> &[f64] {
        match self {
            SpectrumFn::ExactBeta(b) => b.breakpoints(),
            SpectrumFn::Tabulated(t) => t.thetas(),
        }
    }
}

impl From<BetaFn> for SpectrumFn {
    fn from(b: BetaFn) -> Self {
        SpectrumFn::ExactBeta(b)
    }
}

/// β-transform. Exact for [`SpectrumFn::ExactBeta`]; for tabulated input the
/// result interpolates `(1−θᵢ)φᵢ` on the same grid.
pub fn beta_of(f: &SpectrumFn) -> BetaFn {
    match f {
        SpectrumFn::ExactBeta(b) => b.clone(),
        SpectrumFn::Tabulated(t) => {
            let values = t
                .thetas
                .iter()
                .zip(&t.phis)
                .map(|(&x, &p)| (1.0 - x) * p)
                .collect();
            BetaFn::new(t.d, t.thetas.clone(), values).expect("tabulated values already validated")
        }
    }
}

pub fn phi_of(b: BetaFn) -> SpectrumFn {
    SpectrumFn::ExactBeta(b)
}

/// `φ(0)` and `φ(1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EndpointLimits {
    pub phi0: f64,
    pub phi1: f64,
}

/// Endpoint values, cross-checked against the infimum and supremum over a
/// uniform interior grid. For admissible functions the endpoint limits are
/// the global inf and sup; a mismatch beyond `1e-9` is reported as
/// [`Error::Oscillation`].
pub fn endpoint_limits(f: &SpectrumFn, grid_size: usize) -> Result<EndpointLimits> {
    const TOL: f64 = 1e-9;
    if grid_size < 1 {
        return Err(Error::Argument("grid_size must be positive".into()));
    }
    let phi0 = f.value(0.0);
    let phi1 = f.value(1.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut at_lo, mut at_hi) = (0.0, 0.0);
    for i in 1..=grid_size {
        let t = i as f64 / (grid_size + 1) as f64;
        let v = f.value(t);
        if v < lo {
            lo = v;
            at_lo = t;
        }
        if v > hi {
            hi = v;
            at_hi = t;
        }
    }
    if phi0 > lo + TOL {
        return Err(Error::Oscillation(format!(
            "phi(0) = {phi0} exceeds phi({at_lo}) = {lo}"
        )));
    }
    if phi1 < hi - TOL {
        return Err(Error::Oscillation(format!(
            "phi(1) = {phi1} below phi({at_hi}) = {hi}"
        )));
    }
    Ok(EndpointLimits { phi0, phi1 })
}

/// Exact upper envelope of piecewise-linear functions sharing `[0,1]`.
pub(crate) fn beta_envelope(fs: &[&BetaFn]) -> BetaFn {
    let d = fs[0].dim();
    let mut xs: Vec<f64> = fs.iter().flat_map(|f| f.breakpoints().iter().copied()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let max_at = |x: f64| fs.iter().map(|f| f.eval(x)).fold(f64::NEG_INFINITY, f64::max);
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(xs.len() * 2);
    let mut cuts: Vec<f64> = Vec::new();
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        points.push((a, max_at(a)));
        // Linear on (a, b) for every input: the envelope can only bend where two
        // of them cross.
        let ends: Vec<(f64, f64)> = fs.iter().map(|f| (f.eval(a), f.eval(b))).collect();
        cuts.clear();
        for i in 0..ends.len() {
            for j in i + 1..ends.len() {
                let da = ends[i].0 - ends[j].0;
                let db = ends[i].1 - ends[j].1;
                if da * db < 0.0 {
                    let t = a + (b - a) * (da / (da - db));
                    if t > a && t < b {
                        cuts.push(t);
                    }
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for &t in &cuts {
            points.push((t, max_at(t)));
        }
    }
    let last = *xs.last().unwrap();
    points.push((last, max_at(last)));
    BetaFn::from_points(d, &simplify(&points)).expect("envelope of admissible pieces is admissible")
}

/// Drops interior points that lie on the chord of their neighbours.
fn simplify(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while out.len() >= 2 {
            let (x0, y0) = out[out.len() - 2];
            let (x1, y1) = out[out.len() - 1];
            let chord = y0 + (p.1 - y0) * ((x1 - x0) / (p.0 - x0));
            if (chord - y1).abs() <= 1e-15 * (1.0 + y1.abs()) {
                out.pop();
            } else {
                break;
            }
        }
        out.push(p);
    }
    out
}

/// Pointwise supremum. Exact (piecewise linear in β) when every input is in
/// exact form; otherwise tabulated on the union of all nodes.
pub fn pointwise_sup(fs: &[SpectrumFn]) -> Result<SpectrumFn> {
    let first = fs
        .first()
        .ok_or_else(|| Error::Argument("supremum of an empty family".into()))?;
    let d = first.dim();
    if fs.iter().any(|f| f.dim() != d) {
        return Err(Error::Argument("ambient dimensions differ".into()));
    }
    let betas: Option<Vec<&BetaFn>> = fs.iter().map(SpectrumFn::as_beta).collect();
    if let Some(betas) = betas {
        return Ok(SpectrumFn::ExactBeta(beta_envelope(&betas)));
    }
    let mut grid: Vec<f64> = fs.iter().flat_map(|f| f.nodes().iter().copied()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    SpectrumFn::tabulate(d, grid, |t| {
        fs.iter().map(|f| f.value(t)).fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Running maximum `φ̄(θ) = sup_{θ' ≤ θ} φ(θ')`.
///
/// In β-form the result is again piecewise linear: it follows `β` where `φ`
/// is at its running maximum `M` and equals `M(1−θ)` elsewhere.
pub fn running_max(f: &SpectrumFn) -> SpectrumFn {
    match f {
        SpectrumFn::ExactBeta(b) => SpectrumFn::ExactBeta(running_max_beta(b)),
        SpectrumFn::Tabulated(t) => {
            let mut m = f64::NEG_INFINITY;
            let phis = t
                .phis
                .iter()
                .map(|&p| {
                    m = m.max(p);
                    m
                })
                .collect();
            SpectrumFn::Tabulated(Tabulated { d: t.d, thetas: t.thetas.clone(), phis })
        }
    }
}

fn running_max_beta(b: &BetaFn) -> BetaFn {
    let mut m = b.values[0];
    let mut points = vec![(0.0, m)];
    for ((a, va), (x1, v1)) in b.segments() {
        // φ = (p + qθ)/(1−θ) is monotone on each segment.
        let phi_end = if x1 >= 1.0 { va / (1.0 - a) } else { v1 / (1.0 - x1) };
        if phi_end <= m {
            points.push((x1, m * (1.0 - x1)));
            continue;
        }
        let phi_start = va / (1.0 - a);
        if phi_start < m {
            let q = (v1 - va) / (x1 - a);
            let p = va - q * a;
            let cross = (m - p) / (q + m);
            if cross > a && cross < x1 {
                points.push((cross, m * (1.0 - cross)));
            }
        }
        points.push((x1, v1));
        m = phi_end;
    }
    BetaFn::from_points(b.dim(), &simplify(&points)).expect("running max stays within bounds")
}

/// On-disk form: `{"d", "form": "beta"|"table", "breakpoints", "values", ...}`.
/// Any further top-level fields are carried through in `extra`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub d: u32,
    pub form: Form,
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Beta,
    Table,
}

impl SpectrumFile {
    pub fn from_spectrum(f: &SpectrumFn) -> Self {
        let (form, breakpoints, values) = match f {
            SpectrumFn::ExactBeta(b) => (Form::Beta, b.breakpoints.clone(), b.values.clone()),
            SpectrumFn::Tabulated(t) => (Form::Table, t.thetas.clone(), t.phis.clone()),
        };
        SpectrumFile { d: f.dim().get(), form, breakpoints, values, extra: BTreeMap::new() }
    }

    pub fn to_spectrum(&self) -> Result<SpectrumFn> {
        let d = AmbientDim::new(self.d)?;
        match self.form {
            Form::Beta => Ok(SpectrumFn::ExactBeta(BetaFn::new(
                d,
                self.breakpoints.clone(),
                self.values.clone(),
            )?)),
            Form::Table => Ok(SpectrumFn::Tabulated(Tabulated::new(
                d,
                self.breakpoints.clone(),
                self.values.clone(),
            )?)),
        }
    }
}

impl SpectrumFn {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SpectrumFile::from_spectrum(self)).expect("plain data")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: SpectrumFile = serde_json::from_str(s)?;
        file.to_spectrum()
    }
}
