mod common;

use minsup::analysis::{
    check_limit_family, check_locality, check_lsc, check_markov_identity, check_shift_identity, check_stability,
    discrete_jet, monotone_limit_check, viscosity_residual, write_summary, CheckReport, EqualityClaim, EventRule,
    LimitFamily, LocalityConfig, MarkovConfig, ShiftConfig, StabilityConfig, Verdict, ViscosityConfig,
};
use minsup::backward::{solve_ladder, GridConfig, LadderConfig, ValueSurface};
use minsup::convexlab::{Axis, EpiSequence, GridFunction, TailPolicy};
use minsup::forward::{concatenate, simulate_stream, Affine, DiffusionSpec};
use minsup::ladder::{GeneratorKind, GeneratorSpec, TerminalKind, TerminalSpec};
use proptest::prelude::*;

fn term(kind: TerminalKind) -> TerminalSpec {
    TerminalSpec::new(kind).unwrap()
}

fn heat_surface(steps: usize, n: usize, f: impl Fn(f64, f64) -> f64) -> ValueSurface {
    ValueSurface::from_fn(1.0, steps, Axis::new(-3.0, 3.0, n).unwrap(), 0.0, f)
}

fn visc(s: &ValueSurface, g: &GeneratorSpec) -> CheckReport {
    viscosity_residual(s, g, &DiffusionSpec::brownian(1.0), &ViscosityConfig::default()).unwrap()
}

#[test]
fn closed_form_heat_surfaces_have_zero_residual() {
    let zero = GeneratorSpec::zero();
    let r = visc(&heat_surface(50, 301, |_, x| x), &zero);
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.measured["max_abs_residual"] <= 1e-10);
    assert!(r.measured["interior_nodes"] > 0.0);

    // a = -1, M = 2: R = 1 - 1
    let r = visc(&heat_surface(64, 301, |t, x| x * x + (1.0 - t)), &zero);
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.measured["max_abs_residual"] <= 1e-8, "{:?}", r.measured);

    // decays too slowly in time for its curvature: a = -1/2, M = 2
    let r = visc(&heat_surface(64, 301, |t, x| x * x + 0.5 * (1.0 - t)), &zero);
    assert_eq!(r.verdict, Verdict::Fail);
    assert!((r.measured["min_residual"] + 0.5).abs() < 1e-8);
    // and one that decays faster is a strict supersolution
    let r = visc(&heat_surface(64, 301, |t, x| 0.5 * x * x + (1.0 - t)), &zero);
    assert_eq!(r.verdict, Verdict::Pass);
    assert!((r.measured["min_residual"] - 0.5).abs() < 1e-8);
}

#[test]
fn computed_entropic_surface_is_a_supersolution() {
    let d = DiffusionSpec::brownian(1.0);
    let g = GeneratorSpec::entropic();
    let sol = solve_ladder(
        &g,
        &term(TerminalKind::Tanh),
        &d,
        &GridConfig::default(),
        &LadderConfig { n_max: 16, tol: 1e-3 },
    )
    .unwrap();
    let r = viscosity_residual(&sol.surface, &g, &d, &ViscosityConfig::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.measured);
    assert!(r.measured["min_residual"] >= -1e-3);
    assert_eq!(check_lsc(&sol.surface, 0.5).unwrap().verdict, Verdict::Pass);
}

#[test]
fn jets_converge_at_the_expected_orders() {
    let f = |t: f64, x: f64| x.sin() * (-t).exp();
    let (ft, fx, fxx) = (
        |t: f64, x: f64| -x.sin() * (-t).exp(),
        |t: f64, x: f64| x.cos() * (-t).exp(),
        |t: f64, x: f64| -x.sin() * (-t).exp(),
    );
    let errors = |steps: usize, n: usize| {
        let s = heat_surface(steps, n, f);
        let j = steps / 2;
        let i = (n - 1) / 2 + (n - 1) / 12;
        let q = discrete_jet(&s, j, i).unwrap();
        (
            (q.a - ft(q.t, q.x)).abs(),
            (q.p - fx(q.t, q.x)).abs(),
            (q.m - fxx(q.t, q.x)).abs(),
        )
    };
    let (a1, _, _) = errors(20, 121);
    let (a2, _, _) = errors(40, 121);
    let ratio = a1 / a2;
    assert!((1.7..2.3).contains(&ratio), "time ratio {ratio}");
    let (_, p1, m1) = errors(40, 61);
    let (_, p2, m2) = errors(40, 121);
    assert!((3.4..4.6).contains(&(p1 / p2)), "p ratio {}", p1 / p2);
    assert!((3.4..4.6).contains(&(m1 / m2)), "M ratio {}", m1 / m2);

    // edge nodes of the window have no jet
    let s = heat_surface(10, 21, f);
    assert!(discrete_jet(&s, 5, 0).is_none());
    assert!(discrete_jet(&s, 5, 20).is_none());
    assert!(discrete_jet(&s, 0, 10).is_none());
    assert!(discrete_jet(&s, 5, 1).is_some());
}

#[test]
fn lsc_spikes() {
    let s = heat_surface(10, 121, |t, x| (x + t).tanh());
    assert_eq!(check_lsc(&s, 0.5).unwrap().verdict, Verdict::Pass);
    let eps = s.row(5).windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    let i = 70;
    let mut raised = s.clone();
    raised.values[5 * 121 + i] += 10.0 * eps;
    let r = check_lsc(&raised, 0.5).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    assert_eq!(r.measured["worst_x"], s.x.node(i));
    let mut lowered = s.clone();
    lowered.values[5 * 121 + i] -= 10.0 * eps;
    assert_eq!(check_lsc(&lowered, 0.5).unwrap().verdict, Verdict::Pass);
    assert!(check_lsc(&s, 0.55).is_err());
}

#[test]
fn limit_family_examples() {
    let r = check_limit_family(
        &LimitFamily::Oscillating { count: 32 },
        Axis::new(-2.0, 2.0, 81).unwrap(),
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.gaps["pk_gap"] <= 1e-12 && r.gaps["cc_gap"] <= 1e-12);

    let r = check_limit_family(
        &LimitFamily::ShiftedParabola { count: 32, tail: 2 },
        Axis::new(-1.0, 1.0, 41).unwrap(),
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.gaps);

    let axis = Axis::new(-1.0, 1.0, 101).unwrap();
    let r = check_limit_family(&LimitFamily::ScaledParabola { count: 64, tail: 4 }, axis).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    // the envelope sits under z^2 by at most the grid term plus the 1/65 shortfall
    let seq = LimitFamily::ScaledParabola { count: 64, tail: 4 }
        .sequence(axis)
        .unwrap();
    let sup = seq.members().last().unwrap();
    let eps = sup.grid_modulus();
    for k in 0..sup.len() {
        let z = sup.point(k)[0];
        assert!((sup.values()[k] - z * z).abs() <= 2.0 * eps + z * z / 65.0);
    }
}

#[test]
fn monotone_limit_examples() {
    let axis = Axis::new(-2.0, 2.0, 81).unwrap();
    let h = GridFunction::from_fn_1d(axis, |z| z.sin() + z * z).unwrap();
    // the tail starts at n = 21, where the 1/n ball holds only the node itself
    let seq = EpiSequence::new(vec![h.clone(); 30], TailPolicy::LastK(10)).unwrap();
    let r = monotone_limit_check(&seq).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.gaps["envelope_gap"], 0.0);

    let lower = h.with_values(h.values().iter().map(|v| v - 0.1).collect()).unwrap();
    let seq = EpiSequence::new(vec![h, lower], TailPolicy::Full).unwrap();
    assert!(monotone_limit_check(&seq).is_err());
}

fn increasing_pl_sequence() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    // knots on [-1, 1]; base values and positive increments per member, halved each
    // step so the sequence converges
    let knots = 9;
    (
        prop::collection::vec(-2.0f64..2.0, knots),
        prop::collection::vec(prop::collection::vec(0.0f64..0.5, knots), 24..48),
    )
}

fn pl(values: &[f64], z: f64) -> f64 {
    let h = 2.0 / (values.len() - 1) as f64;
    let s = ((z + 1.0) / h).clamp(0.0, (values.len() - 1) as f64);
    let i = (s.floor() as usize).min(values.len() - 2);
    let w = s - i as f64;
    values[i] + w * (values[i + 1] - values[i])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn increasing_pl_sequences_pass((base, incs) in increasing_pl_sequence(), k in 1usize..4) {
        let axis = Axis::new(-1.0, 1.0, 81).unwrap();
        let mut knots = base.clone();
        let mut members = Vec::new();
        for (n, inc) in incs.iter().enumerate() {
            for (v, d) in knots.iter_mut().zip(inc) {
                *v += d * 0.5f64.powi(n as i32);
            }
            members.push(GridFunction::from_fn_1d(axis, |z| pl(&knots, z)).unwrap());
        }
        let k = k.min(members.len());
        let seq = EpiSequence::new(members, TailPolicy::LastK(k)).unwrap();
        let r = monotone_limit_check(&seq).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.gaps);
    }

    #[test]
    fn residual_ignores_constant_shifts(c in -64i32..64, amp in 1i32..8) {
        // dyadic values keep u + c exact, so every difference is unchanged bit for bit
        let f = move |t: f64, x: f64| ((x * x * amp as f64 + (1.0 - t)) * 1024.0).round() / 1024.0;
        let s = heat_surface(16, 61, f);
        let shifted = heat_surface(16, 61, move |t, x| f(t, x) + c as f64);
        let g = GeneratorSpec::registry(GeneratorKind::QuadraticZ { c: 0.5 }).unwrap();
        let a = visc(&s, &g);
        let b = visc(&shifted, &g);
        prop_assert_eq!(a.gaps, b.gaps);
        prop_assert_eq!(a.measured, b.measured);
    }
}

fn stability_cfg() -> StabilityConfig {
    StabilityConfig {
        ladder: LadderConfig { n_max: 16, tol: 1e-3 },
        ..StabilityConfig::default()
    }
}

#[test]
fn stability_examples() {
    let d = DiffusionSpec::brownian(1.0);
    let tanh = term(TerminalKind::Tanh);
    let r = check_stability(&GeneratorSpec::zero(), &tanh, &d, 0.3, &[0.3; 8], &stability_cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.gaps["liminf_shortfall"], 0.0);
    assert_eq!(r.measured["tail_sup_gap"], 0.0);

    let xs: Vec<f64> = (1..=1000).map(|k| 1.0 / k as f64).collect();
    let cfg = StabilityConfig {
        claim: Some(EqualityClaim::Continuous),
        ..stability_cfg()
    };
    let r = check_stability(&GeneratorSpec::entropic(), &tanh, &d, 0.0, &xs, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.gaps);
    // the limit value matches the exponential-transform oracle
    assert!((r.measured["u_limit"] - common::entropic_value(0.0, 1.0)).abs() <= 0.02);

    let relu = GeneratorSpec::registry(GeneratorKind::WeightedReluZ).unwrap();
    let r = check_stability(&relu, &tanh, &d, 0.0, &xs[..64], &stability_cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Inconclusive);
    assert!(check_stability(&relu, &tanh, &d, 0.0, &[], &stability_cfg()).is_err());
}

#[test]
fn shift_identity_examples() {
    let d = DiffusionSpec::brownian(1.0);
    let g = GeneratorSpec::entropic();
    let tanh = term(TerminalKind::Tanh);
    let cfg = ShiftConfig::default();
    let r = check_shift_identity(&g, &tanh, &d, 0.0, 0.0, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.gaps["gap"], 0.0);

    let r = check_shift_identity(&g, &tanh, &d, 1.0, 0.4, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    let r = check_shift_identity(&g, &term(TerminalKind::Square), &d, 1.0, 5.0, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);

    let r = check_shift_identity(&g, &tanh, &d, 0.5, 0.0, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.measured);
    assert!(r.gaps["gap"] <= 5e-3);
}

#[test]
fn markov_identity_for_the_heat_equation() {
    let d = DiffusionSpec::brownian(1.0);
    // on [-4, 4] the level-16 cap never bites, so u = x^2 + (T - t)
    let cfg = MarkovConfig {
        grid: GridConfig {
            x_lo: -4.0,
            x_hi: 4.0,
            dx: 0.05,
            ..GridConfig::default()
        },
        ladder: LadderConfig { n_max: 16, tol: 1e-3 },
        n_paths: 20_000,
        steps: 20,
        seed: 5,
        equality: true,
        ..MarkovConfig::default()
    };
    let square = term(TerminalKind::Square);
    let r = check_markov_identity(&GeneratorSpec::zero(), &square, &d, 0.5, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?} {:?}", r.gaps, r.tolerances);

    let r = check_markov_identity(&GeneratorSpec::zero(), &square, &d, 1.0, &cfg).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.gaps["bucket_worst"], 0.0);
    assert_eq!(r.measured["mean_gap"], 0.0);

    assert!(check_markov_identity(&GeneratorSpec::zero(), &square, &d, 0.512, &cfg).is_err());
}

fn locality_cfg() -> LocalityConfig {
    LocalityConfig {
        n_paths: 20_000,
        steps: 20,
        seed: 11,
        ..LocalityConfig::default()
    }
}

#[test]
fn locality_trivial_cases() {
    let d = DiffusionSpec::brownian(1.0);
    let g = GeneratorSpec::entropic();
    let tanh = term(TerminalKind::Tanh);
    let r = check_locality(&g, &tanh, &d, &d, 0.5, EventRule::AboveStart, &locality_cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.gaps);
    let r = check_locality(&g, &tanh, &d, &d, 0.5, EventRule::Always, &locality_cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.notes.iter().any(|n| n.contains("degenerate")));
    assert_eq!(r.gaps["a_t"], 0.0);
}

#[test]
fn locality_matches_conditional_second_moments() {
    let (t, horizon, drift) = (0.5, 1.0, 0.5);
    let d1 = DiffusionSpec::brownian(horizon);
    let d2 = DiffusionSpec::new(Affine::constant(drift), Affine::constant(1.0), horizon).unwrap();
    let cfg = locality_cfg();
    let square = term(TerminalKind::Square);
    let r = check_locality(
        &GeneratorSpec::zero(),
        &square,
        &d1,
        &d2,
        t,
        EventRule::AboveStart,
        &cfg,
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?} {:?}", r.gaps, r.tolerances);

    // rebuild the concatenated paths and evaluate E[X_T^2 | X_s] in closed form
    let a = simulate_stream(&d1, 0.0, 0.0, horizon, cfg.steps, cfg.n_paths, cfg.seed, 1).unwrap();
    let b = simulate_stream(&d2, 0.0, 0.0, horizon, cfg.steps, cfg.n_paths, cfg.seed, 2).unwrap();
    let k = a.grid.index_of(t).unwrap();
    let mask: Vec<bool> = (0..cfg.n_paths).map(|p| a.state(p, k) > 0.0).collect();
    let x = concatenate(&a, &b, t, &mask).unwrap();
    for (tag, s) in [("t", k), ("mid", (k + cfg.steps) / 2)] {
        let tau = horizon - x.grid.time(s);
        for (cell, in_a) in [("a", true), ("ac", false)] {
            let m = if in_a { 0.0 } else { drift * tau };
            let vals: Vec<f64> = (0..cfg.n_paths)
                .filter(|&p| mask[p] == in_a)
                .map(|p| (x.state(p, s) + m).powi(2) + tau)
                .collect();
            let exact = vals.iter().sum::<f64>() / vals.len() as f64;
            let key = format!("{cell}_{tag}");
            let got = r.measured[&format!("{key}_concatenated")];
            let se = r.measured[&format!("{key}_se")];
            assert!((got - exact).abs() <= 3.0 * se, "{key}: {got} vs {exact}, se {se}");
        }
    }
}

#[test]
fn summary_csv() {
    let mut a = CheckReport::new("lsc", serde_json::Value::Null).with_scenario("demo");
    a.gap("lsc_excess", 0.0, 0.0);
    let a = a.conclude(true);
    let mut buf = Vec::new();
    write_summary(&[a], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "check,scenario,verdict,max_gap,tolerance");
    assert!(text.lines().nth(1).unwrap().starts_with("lsc,demo,pass,"));
}
