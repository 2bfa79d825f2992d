use std::f64::consts::TAU;

use kdv_core::fdsolver::{step_error, NodalGains};
use kdv_core::sim::run;
use kdv_core::{
    Error, Grid, GridFunction, InitialDatum, KernelSet, Mode, SimConfig, StateKind, Stepper,
    VolterraOp,
};
use proptest::prelude::*;

fn homogeneous(grid: &Grid, raw: &[f64]) -> GridFunction {
    let mut v = raw.to_vec();
    v.resize(grid.nodes(), 0.0);
    let j = grid.intervals();
    v[0] = 0.0;
    v[j - 1] = 0.0;
    v[j] = 0.0;
    GridFunction::new(grid, v, StateKind::Error).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homogeneous_steps_never_grow(
        j in 6usize..80,
        length in 0.5f64..10.0,
        dt in 1e-5f64..1.0,
        raw in prop::collection::vec(-1.0f64..1.0, 81),
    ) {
        let grid = Grid::new(length, j).unwrap();
        let stepper = Stepper::new(&grid, 1.0, dt).unwrap();
        let gains = NodalGains::zero(&grid);
        let mut u = homogeneous(&grid, &raw);
        let mut prev = grid.l2_norm(u.values());
        for _ in 0..20 {
            u = step_error(&u, &gains, &stepper, Mode::Uncontrolled).unwrap();
            let now = grid.l2_norm(u.values());
            prop_assert!(now <= prev * (1.0 + 1e-12), "{now} > {prev}");
            prev = now;
        }
    }

    #[test]
    fn transform_round_trip(
        lambda in 0.0f64..0.1,
        j in 6usize..120,
        raw in prop::collection::vec(-1.0f64..1.0, 121),
    ) {
        let ks = KernelSet::solve(lambda, lambda, TAU, 10).unwrap();
        let grid = Grid::new(TAU, j).unwrap();
        let op = VolterraOp::from_poly(&grid, &ks.k);
        let u = &raw[..grid.nodes()];
        let back = op.invert_direct_values(&op.apply_values(u).unwrap()).unwrap();
        let scale = grid.l2_norm(u).max(1e-300);
        let diff: Vec<f64> = back.iter().zip(u).map(|(a, b)| a - b).collect();
        prop_assert!(grid.l2_norm(&diff) <= 1e-12 * scale);
    }
}

#[test]
fn controlled_runs_beat_uncontrolled() {
    let base = SimConfig { t_final: 60.0, dt: 1e-2, intervals: 100, ..SimConfig::default() };
    let rate = |mode| run(&SimConfig { mode, ..base.clone() }).unwrap().fitted_rate_u.unwrap();
    let free = rate(Mode::Uncontrolled);
    let two = rate(Mode::TwoController);
    let single = rate(Mode::SingleController);
    assert!(two > free, "two {two} free {free}");
    assert!(single > free, "single {single} free {free}");
}

#[test]
fn error_decays_while_observer_starts_at_rest() {
    let r = run(&SimConfig { t_final: 40.0, dt: 1e-2, intervals: 100, ..SimConfig::default() }).unwrap();
    let err = r.fitted_rate_err.unwrap();
    let c = r.constants.unwrap();
    assert!(err > 0.0);
    assert!(c.alpha > c.kappa);
    // observer starts at zero, so its norm rises before decaying
    assert!(r.l2_uhat[0] == 0.0);
    assert!(r.l2_uhat.iter().cloned().fold(0.0, f64::max) > 0.0);
}

#[test]
fn observer_with_exact_data_tracks_plant() {
    let r = run(&SimConfig {
        uhat0: InitialDatum::OneMinusCos,
        mode: Mode::SingleController,
        t_final: 5.0,
        ..SimConfig::default()
    })
    .unwrap();
    assert!(r.l2_err.iter().all(|&e| e == 0.0));
    assert_eq!(r.l2_u, r.l2_uhat);
}

#[test]
fn incompatible_data_are_rejected() {
    let cfg = SimConfig {
        u0: InitialDatum::Tabulated { x: vec![0.0, TAU], values: vec![0.0, 1.0] },
        ..SimConfig::default()
    };
    assert!(matches!(run(&cfg), Err(Error::Compatibility { endpoint, .. }) if endpoint == TAU));
}

#[test]
fn runs_are_deterministic() {
    let cfg = SimConfig { t_final: 2.0, intervals: 60, ..SimConfig::default() };
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.l2_u, b.l2_u);
    assert_eq!(a.u_control, b.u_control);
    assert_eq!(a.v_control, b.v_control);
}
