//! `assouad`: validate candidate spectra, emit example families, run the
//! growth-function / Moran roundtrip and draw figures.
//!
//! Exit codes: 0 when every check passes, 1 on a mathematical failure,
//! 2 on usage or input errors.

mod output;
mod svg;

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use assouad_core::families::{
    build_nonmonotone, make_f, make_h, CParam, HolderExample, MParam,
};
use assouad_core::growth::{build_g, spectrum_from_g};
use assouad_core::moran::{schedule_from_g, spectrum_from_schedule};
use assouad_core::spectrum::{AmbientDim, SpectrumFile, SpectrumFn};
use assouad_core::validation::{check_ad, check_structure, GridSpec, Spacing, ValidationReport};

use output::{Run, RunManifest};
use svg::{Curve, Figure, Stroke};

#[derive(Parser, Debug)]
#[command(name = "assouad", version, about = "Assouad spectrum toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Check a spectrum file for admissibility and write a JSON report.
    Validate(ValidateArgs),
    /// Emit a member of one of the example families.
    Family(FamilyArgs),
    /// Build a growth function and a Moran schedule for a spectrum and
    /// compare the recovered spectrum with the input.
    Roundtrip(RoundtripArgs),
    /// Draw spectrum files or CSV tables as an SVG figure.
    Plot(PlotArgs),
    /// Re-run the command recorded in a manifest.
    Rerun { manifest: PathBuf },
}

#[derive(clap::Args, Debug, Serialize)]
struct ValidateArgs {
    input: PathBuf,
    /// Number of interior grid points.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Add dyadic points accumulating at 0 and 1.
    #[arg(long)]
    geometric: bool,
    /// Report path; defaults to `<input stem>.report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
enum FamilyKind {
    M,
    C,
    Holder,
    Nonmono,
}

#[derive(clap::Args, Debug, Serialize)]
struct FamilyArgs {
    #[arg(long, value_enum, ignore_case = true)]
    family: FamilyKind,
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Corner of the monotone family (also the target for `nonmono`).
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    c1: f64,
    #[arg(long, default_value_t = 0.5)]
    c2: f64,
    /// Interior sample count for `holder`.
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 6)]
    depth: u32,
    #[arg(long, default_value = "spectrum.json")]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Serialize)]
struct RoundtripArgs {
    input: PathBuf,
    /// Upper growth level; defaults to φ(1).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 60.0)]
    xmax: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    thetas: Vec<f64>,
    /// Allowed error of the analytic estimate.
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Range `log(-log δ) ≤ X` of the materialized Moran schedule.
    #[arg(long, default_value_t = 4.0)]
    schedule_xmax: f64,
    #[arg(long, default_value_t = 400)]
    mesh: usize,
    #[arg(long, default_value = "roundtrip.csv")]
    out: PathBuf,
    /// Also write the schedule as `k,t_k,r_k`.
    #[arg(long)]
    schedule_out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
enum PlotMode {
    Phi,
    Beta,
}

#[derive(clap::Args, Debug, Serialize)]
struct PlotArgs {
    /// Spectrum JSON files or CSV tables.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "phi")]
    mode: PlotMode,
    /// Draw the two secants of the admissibility bound at `λ,θ` (β mode).
    #[arg(long, value_delimiter = ',')]
    secant: Option<Vec<f64>>,
    /// Ambient dimension used for schedule tables.
    #[arg(long, default_value_t = 1)]
    dim: u32,
    #[arg(long, default_value = "")]
    title: String,
    #[arg(long, default_value = "figure.svg")]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command, &argv) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let math = matches!(
                e.downcast_ref::<assouad_core::Error>(),
                Some(assouad_core::Error::Construction(_))
            );
            ExitCode::from(if math { 1 } else { 2 })
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("ASSOUAD_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        anyhow!("ASSOUAD_THREADS must be a positive integer, got {v:?}")
    })?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn dispatch(command: Command, argv: &[String]) -> Result<Status> {
    match command {
        Command::Validate(a) => cmd_validate(a, argv),
        Command::Family(a) => cmd_family(a, argv),
        Command::Roundtrip(a) => cmd_roundtrip(a, argv),
        Command::Plot(a) => cmd_plot(a, argv),
        Command::Rerun { manifest } => {
            let text = std::fs::read_to_string(&manifest)
                .with_context(|| format!("cannot read {}", manifest.display()))?;
            let m: RunManifest = serde_json::from_str(&text)
                .with_context(|| format!("{} is not a run manifest", manifest.display()))?;
            let cli = Cli::try_parse_from(&m.argv).map_err(|e| anyhow!("recorded argv: {e}"))?;
            if matches!(cli.command, Command::Rerun { .. }) {
                bail!("a manifest cannot record another rerun");
            }
            dispatch(cli.command, &m.argv)
        }
    }
}

fn read_spectrum(path: &Path) -> Result<(SpectrumFn, SpectrumFile)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file: SpectrumFile = serde_json::from_str(&text)
        .map_err(|e| anyhow!("{}: malformed spectrum file: {e}", path.display()))?;
    let f = file.to_spectrum().with_context(|| format!("{}: invalid spectrum", path.display()))?;
    Ok((f, file))
}

fn default_report_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    input.with_file_name(format!("{stem}.report.json"))
}

fn cmd_validate(a: ValidateArgs, argv: &[String]) -> Result<Status> {
    let out = a.out.clone().unwrap_or_else(|| default_report_path(&a.input));
    let spacing = if a.geometric { Spacing::GeometricNearEndpoints } else { Spacing::Uniform };
    let grid = GridSpec::new(a.grid, spacing, a.tol)?;
    let mut run = Run::new("validate", &a, argv);
    run.input(&a.input);
    run.grid(grid);
    let f = match read_spectrum(&a.input) {
        Ok((f, _)) => f,
        Err(e) => {
            let report = json!({ "passed": false, "error": format!("{e:#}") });
            run.write(&out, serde_json::to_string_pretty(&report)?.as_bytes())?;
            run.finish(a.manifest.as_deref())?;
            return Err(e);
        }
    };
    let ad = check_ad(&f, &grid);
    let st = check_structure(&f, &grid);
    let mut notes = ad.notes.clone();
    notes.extend(st.notes.iter().cloned());
    let report = ValidationReport {
        passed: ad.passed && st.passed,
        checks: ad.checks.iter().chain(&st.checks).cloned().collect(),
        grid: Some(grid),
        notes,
        abstained: ad.abstained || st.abstained,
    };
    run.write(&out, report.to_json().as_bytes())?;
    run.finish(a.manifest.as_deref())?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("{}: worst violation {:e} at {:?}", c.name, c.worst_violation, c.witness);
    }
    Ok(if report.passed { Status::Pass } else { Status::Fail })
}

fn cmd_family(a: FamilyArgs, argv: &[String]) -> Result<Status> {
    let d = AmbientDim::new(a.d)?;
    let mut extra: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    let f: SpectrumFn = match a.family {
        FamilyKind::M => {
            extra.insert("family".into(), json!({ "name": "M", "kappa": a.kappa, "c": a.c }));
            make_f(d, MParam { kappa: a.kappa, c: a.c })?.into()
        }
        FamilyKind::C => {
            extra.insert(
                "family".into(),
                json!({ "name": "C", "kappa": a.kappa, "c1": a.c1, "c2": a.c2 }),
            );
            make_h(d, CParam { kappa: a.kappa, c1: a.c1, c2: a.c2 })?.into()
        }
        FamilyKind::Holder => {
            if a.d != 1 {
                bail!("the holder example lives in dimension 1");
            }
            let h = HolderExample::new();
            extra.insert("family".into(), json!({ "name": "holder", "points": a.points }));
            extra.insert("theta0".into(), json!(h.theta0));
            extra.insert("f_theta0".into(), json!(h.f_theta0));
            h.tabulate(a.points)
        }
        FamilyKind::Nonmono => {
            let target: SpectrumFn = make_f(d, MParam { kappa: a.kappa, c: a.c })?.into();
            let b = build_nonmonotone(&target, a.epsilon, a.depth)?;
            let relaxed: usize = b.choices.iter().map(|c| c.relaxed.len()).sum();
            extra.insert(
                "family".into(),
                json!({
                    "name": "nonmono", "kappa": a.kappa, "c": a.c,
                    "epsilon": a.epsilon, "depth": a.depth,
                }),
            );
            extra.insert("relaxed_constraints".into(), json!(relaxed));
            extra.insert("choices".into(), serde_json::to_value(&b.choices)?);
            b.spectrum()
        }
    };
    let mut file = SpectrumFile::from_spectrum(&f);
    file.extra = extra;
    let mut run = Run::new("family", &a, argv);
    run.write(&a.out, serde_json::to_string_pretty(&file)?.as_bytes())?;
    run.finish(a.manifest.as_deref())?;
    Ok(Status::Pass)
}

fn cmd_roundtrip(a: RoundtripArgs, argv: &[String]) -> Result<Status> {
    let (target, _) = read_spectrum(&a.input)?;
    let pre = check_ad(&target, &GridSpec::uniform(200));
    if !pre.passed {
        bail!("{} does not pass validation", a.input.display());
    }
    if a.thetas.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        bail!("thetas must lie in (0,1)");
    }
    let phi1 = target.value(1.0);
    let alpha = a.alpha.unwrap_or(phi1);
    if alpha < phi1 - 1e-12 {
        bail!("alpha = {alpha} is below phi(1) = {phi1}");
    }
    let g = build_g(&target, alpha, None)?;
    let sched = schedule_from_g(&g, target.dim(), a.schedule_xmax)?;
    let top = a.schedule_xmax.exp();

    let mut csv = String::from(
        "theta,target,analytic,schedule,analytic_error,schedule_error\n",
    );
    let mut passed = true;
    for &th in &a.thetas {
        let want = target.value(th);
        let analytic = spectrum_from_g(&g, th, a.xmax, a.step)?.value;
        let schedule = spectrum_from_schedule(&sched, th, th * top, a.mesh)?;
        let (ea, es) = ((analytic - want).abs(), (schedule - want).abs());
        passed &= ea <= a.tol;
        let _ = writeln!(csv, "{th},{want},{analytic},{schedule},{ea},{es}");
    }
    let mut run = Run::new("roundtrip", &a, argv);
    run.input(&a.input);
    run.grid(json!({ "thetas": a.thetas, "xmax": a.xmax, "step": a.step }));
    run.write(&a.out, csv.as_bytes())?;
    if let Some(p) = &a.schedule_out {
        run.write(p, sched.to_csv().as_bytes())?;
    }
    run.finish(a.manifest.as_deref())?;
    Ok(if passed { Status::Pass } else { Status::Fail })
}

/// Curves read from a CSV table.
fn csv_curves(path: &Path, dim: u32) -> Result<Vec<Curve>> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("{}: malformed CSV", path.display()))?;
        // Empty cells (such as `r_0`) read as NaN and are skipped below.
        rows.push(rec.iter().map(|v| v.trim().parse().unwrap_or(f64::NAN)).collect());
    }
    if header.len() < 2 && header.first().map(String::as_str) != Some("x1") {
        bail!("{}: need at least two columns", path.display());
    }
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if header == ["k", "t_k", "r_k"] {
        let d = dim as f64;
        let pts = rows
            .iter()
            .filter(|r| r[0] >= 1.0 && r[1] > 1.0)
            .map(|r| (r[1].ln(), r[0] * d * LN_2 / r[1]))
            .collect();
        return Ok(vec![Curve { scatter: true, ..Curve::line(format!("{name}: s at log t_k"), pts) }]);
    }
    if header[0] == "x1" {
        let pts = rows.iter().map(|r| (r[0], r.get(1).copied().unwrap_or(0.0))).collect();
        return Ok(vec![Curve { scatter: true, ..Curve::line(name, pts) }]);
    }
    Ok((1..header.len())
        .map(|j| {
            let pts = rows
                .iter()
                .filter_map(|r| Some((*r.first()?, *r.get(j)?)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            Curve::line(format!("{name}: {}", header[j]), pts)
        })
        .collect())
}

fn sample_grid(f: &SpectrumFn) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    xs.extend(f.nodes().iter().copied().filter(|t| (0.0..=1.0).contains(t)));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn cmd_plot(a: PlotArgs, argv: &[String]) -> Result<Status> {
    let beta = a.mode == PlotMode::Beta || a.secant.is_some();
    let mut fig = Figure {
        title: a.title.clone(),
        x_label: "θ".into(),
        y_label: if beta { "β(θ) = (1−θ)φ(θ)".into() } else { "φ(θ)".into() },
        ..Figure::default()
    };
    let mut run = Run::new("plot", &a, argv);
    let mut spectra = Vec::new();
    for p in &a.inputs {
        run.input(p);
        let is_json = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            let (f, _) = read_spectrum(p)?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let pts = sample_grid(&f)
                .into_iter()
                .map(|t| (t, if beta { f.beta(t) } else { f.value(t) }))
                .collect();
            fig.curves.push(Curve::line(name, pts));
            spectra.push(f);
        } else {
            fig.curves.extend(csv_curves(p, a.dim)?);
        }
    }
    if fig.curves.iter().all(|c| c.points.is_empty()) {
        bail!("nothing to plot");
    }
    if let Some(sec) = &a.secant {
        let &[lam, th] = sec.as_slice() else {
            bail!("--secant takes two values: lambda,theta");
        };
        if !(0.0 < lam && lam < th && th < 1.0) {
            bail!("secant needs 0 < lambda < theta < 1");
        }
        let [f] = spectra.as_slice() else {
            bail!("secants need exactly one spectrum file");
        };
        let r = lam / th;
        let style = |label: &str, pts| Curve { stroke: Stroke::Dashed, ..Curve::line(label, pts) };
        fig.curves.push(style("secant λ to θ", vec![(lam, f.beta(lam)), (th, f.beta(th))]));
        fig.curves.push(style("secant λ/θ to 1", vec![(r, f.beta(r)), (1.0, 0.0)]));
        fig.x_marks = vec![(lam, "λ".into()), (th, "θ".into()), (r, "λ/θ".into())];
    }
    run.write(&a.out, fig.render().as_bytes())?;
    run.finish(a.manifest.as_deref())?;
    Ok(Status::Pass)
}
