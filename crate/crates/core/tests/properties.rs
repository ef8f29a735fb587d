//! Cross-module properties of the synthesis pipeline.

use assouad_core::families::{make_f, MParam};
use assouad_core::growth::{build_g, build_g_with_horizon, spectrum_from_g};
use assouad_core::moran::{s_delta, schedule_from_g, spectrum_from_schedule, RatioSchedule};
use assouad_core::spectrum::{AmbientDim, SpectrumFn};
use proptest::prelude::*;
use proptest::test_runner::Config;

fn d1() -> AmbientDim {
    AmbientDim::new(1).unwrap()
}

fn m(kappa: f64, c: f64) -> SpectrumFn {
    make_f(d1(), MParam { kappa, c }).unwrap().into()
}

fn quiet(cases: u32) -> Config {
    Config { cases, failure_persistence: None, ..Config::default() }
}

proptest! {
    #![proptest_config(quiet(24))]

    /// The two-scale quotient of a built growth function stays below the
    /// target at every sampled `x`, including the first few short blocks.
    #[test]
    fn quotient_never_exceeds_target(k in 0.2f64..=1.0, c in 0.1f64..0.9, th in 0.05f64..0.95) {
        let target = m(k, c);
        let g = build_g_with_horizon(&target, k, None, 80.0).unwrap();
        let want = target.value(th);
        let mut x = 0.01;
        while x <= 60.0 {
            let q = g.quotient(th, x);
            prop_assert!(q <= want + 1e-6, "x = {x}: {q} > {want}");
            x += 0.01;
        }
    }

    #[test]
    fn quotient_attains_target_at_block_starts(k in 0.2f64..=1.0, c in 0.1f64..0.9, th in 0.05f64..0.95) {
        let target = m(k, c);
        let g = build_g_with_horizon(&target, k, None, 80.0).unwrap();
        let want = target.value(th);
        let need = -th.ln() + 1.0;
        for blk in g.blocks().iter().filter(|b| b.n as f64 >= need && b.x_n < 70.0) {
            prop_assert!((g.quotient(th, blk.x_n) - want).abs() <= 1e-9);
        }
    }

    /// `|s(e^{−e^x}) − g(x)| ≤ d log 2 · e^{−x}` at every level.
    #[test]
    fn discretization_bound_at_every_level(k in 0.1f64..=1.0, c in 0.1f64..0.9) {
        let g = build_g(&m(k, c), k, None).unwrap();
        let s = schedule_from_g(&g, d1(), 4.0).unwrap();
        for &tk in &s.log_scales()[1..] {
            let gap = (s_delta(&s, (-tk).exp()).unwrap() - g.eval(tk.ln())).abs();
            prop_assert!(gap <= std::f64::consts::LN_2 * (-tk.ln()).exp());
        }
    }

    /// The schedule-based and growth-function-based estimators agree.
    #[test]
    fn two_estimators_agree(k in 0.2f64..=1.0, c in 0.1f64..0.9) {
        let g = build_g(&m(k, c), k, None).unwrap();
        let s = schedule_from_g(&g, d1(), 4.0).unwrap();
        for th in [0.2f64, 0.5, 0.8] {
            let from_s = spectrum_from_schedule(&s, th, th * 4f64.exp(), 400).unwrap();
            let from_g = spectrum_from_g(&g, th, 4.0 + th.ln(), 0.01).unwrap().value;
            prop_assert!((from_s - from_g).abs() <= 0.05, "theta {th}: {from_s} vs {from_g}");
        }
    }
}

#[test]
fn constant_quarter_ratio_is_half_dimensional() {
    let s = RatioSchedule::from_ratios(d1(), &[0.25; 40]).unwrap();
    for th in [0.2, 0.5, 0.8] {
        let v = spectrum_from_schedule(&s, th, th * s.t_max(), 400).unwrap();
        assert!((v - 0.5).abs() <= 0.02, "theta {th}: {v}");
    }
}

#[test]
fn constant_half_ratio_is_full_dimensional() {
    let s = RatioSchedule::constant(d1(), 0.5, 60).unwrap();
    for th in [0.2, 0.5, 0.8] {
        let v = spectrum_from_schedule(&s, th, th * s.t_max(), 400).unwrap();
        assert!(v >= 1.0 - 1e-12, "theta {th}: {v}");
    }
}
