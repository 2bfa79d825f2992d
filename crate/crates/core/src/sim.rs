//! Plant/observer/error simulation.
//!
//! The error `ũ = u - û` and the transformed observer `ŵ = (I - Υ_k) û` are
//! advanced with homogeneous (or, for one controller, explicitly forced)
//! boundary data. The observer is recovered by inverting the transform and
//! the plant is `u = û + ũ`. In the uncontrolled mode the plant is stepped
//! directly with homogeneous boundary data.

use alloc::vec;
use alloc::vec::Vec;

use crate::fdsolver::{
    cell_average_init, left_traces, step_error, step_observer_target,
    step_observer_target_forced, Grid, GridFunction, NodalGains, StateKind, Stepper,
};
use crate::kernel::{
    decay_constants, kernel_residual, solve_kernel, DecayConstants, EpsilonChoice, KernelSet,
    TRIANGLE_SAMPLES,
};
use crate::volterra::VolterraOp;
use crate::{Error, Result};

pub use crate::fdsolver::Mode;

/// Upper limit on `t_final / dt`.
pub const MAX_STEPS: f64 = 1e7;
/// Endpoint tolerance for `u0(0) = u0(L) = 0`.
pub const COMPATIBILITY_TOL: f64 = 1e-8;
/// A run aborts once any norm exceeds this multiple of its initial size.
pub const BLOW_UP_FACTOR: f64 = 1e6;
/// Fraction of the horizon discarded before fitting a decay rate.
pub const DEFAULT_SKIP_FRACTION: f64 = 0.2;
/// Norms below this are left out of rate fits.
pub const FIT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    Zero,
    /// `1 - cos x`
    OneMinusCos,
    /// Piecewise-linear interpolation of `(x, value)` samples, held constant
    /// outside the sampled range. `x` must be increasing.
    Tabulated { x: Vec<f64>, values: Vec<f64> },
}

impl InitialDatum {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialDatum::Zero => 0.0,
            InitialDatum::OneMinusCos => 1.0 - libm::cos(x),
            InitialDatum::Tabulated { x: xs, values } => interpolate(xs, values, x),
        }
    }

    fn validate(&self) -> Result<()> {
        if let InitialDatum::Tabulated { x, values } = self {
            if x.is_empty() || x.len() != values.len() {
                return Err(Error::InvalidParameter("tabulated datum needs matching, non-empty columns"));
            }
            if !x.windows(2).all(|w| w[1] > w[0]) {
                return Err(Error::InvalidParameter("tabulated datum abscissae must increase"));
            }
            if values.iter().chain(x).any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("tabulated datum must be finite"));
            }
        }
        Ok(())
    }
}

fn interpolate(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[n - 1] {
        return values[n - 1];
    }
    let hi = xs.partition_point(|&v| v <= x);
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    values[lo] + t * (values[hi] - values[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub length: f64,
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub epsilon: EpsilonChoice,
    /// Number of grid intervals `J`.
    pub intervals: usize,
    pub dt: f64,
    pub t_final: f64,
    pub n_iter: usize,
    pub m_iter: usize,
    pub mode: Mode,
    pub u0: InitialDatum,
    pub uhat0: InitialDatum,
    pub record_every: usize,
    /// Keep full state snapshots at every recorded step.
    pub record_states: bool,
}

impl Default for SimConfig {
    /// Critical length `2π`, `λ = λ̃ = 0.01`, `u0 = 1 - cos x`, `û0 = 0`, ten
    /// Picard and ten succession iterations.
    fn default() -> Self {
        SimConfig {
            length: core::f64::consts::TAU,
            lambda: 0.01,
            lambda_tilde: 0.01,
            epsilon: EpsilonChoice::Auto,
            intervals: 200,
            dt: 1e-3,
            t_final: 30.0,
            n_iter: 10,
            m_iter: 10,
            mode: Mode::TwoController,
            u0: InitialDatum::OneMinusCos,
            uhat0: InitialDatum::Zero,
            record_every: 10,
            record_states: false,
        }
    }
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        libm::round(self.t_final / self.dt) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter("domain length must be finite and > 0"));
        }
        if !(self.lambda >= 0.0 && self.lambda_tilde >= 0.0)
            || !self.lambda.is_finite()
            || !self.lambda_tilde.is_finite()
        {
            return Err(Error::InvalidParameter("kernel parameters must be finite and >= 0"));
        }
        if let EpsilonChoice::Fixed(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Epsilon(e));
            }
        }
        if self.intervals < 6 {
            return Err(Error::GridTooSmall(self.intervals));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter("dt must be finite and > 0"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter("t_final must be finite and > 0"));
        }
        let steps = self.t_final / self.dt;
        if steps > MAX_STEPS {
            return Err(Error::RunTooLong { steps });
        }
        if self.n_iter < 1 {
            return Err(Error::IterationCount(self.n_iter));
        }
        if self.m_iter < 1 {
            return Err(Error::IterationCount(self.m_iter));
        }
        if self.record_every < 1 {
            return Err(Error::InvalidParameter("record_every must be >= 1"));
        }
        self.u0.validate()?;
        self.uhat0.validate()?;
        for endpoint in [0.0, self.length] {
            let value = self.u0.eval(endpoint);
            if value.abs() > COMPATIBILITY_TOL {
                return Err(Error::Compatibility { endpoint, value });
            }
        }
        Ok(())
    }
}

/// Nodal values at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub uhat: Vec<f64>,
    pub uerr: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub mode: Mode,
    pub grid: Grid,
    pub times: Vec<f64>,
    pub l2_u: Vec<f64>,
    pub l2_uhat: Vec<f64>,
    pub l2_err: Vec<f64>,
    pub h3_err: Vec<f64>,
    /// Applied controller `U(t_n)`.
    pub u_control: Vec<f64>,
    /// Applied controller `V(t_n)`; identically zero with one controller.
    pub v_control: Vec<f64>,
    pub fitted_rate_u: Option<f64>,
    pub fitted_rate_uhat: Option<f64>,
    pub fitted_rate_err: Option<f64>,
    /// `None` in uncontrolled mode.
    pub constants: Option<DecayConstants>,
    /// Kernel equation plus boundary residual of `k` on a 50x50 triangle sample.
    pub picard_residual: f64,
    /// Last Picard increment `sup |G^n - G^(n-1)|`.
    pub picard_increment: f64,
    /// Max over the first and last step of `‖(I-K) û_m - ŵ‖ / ‖ŵ‖` for the succession inverse.
    pub succession_residual: f64,
    /// Max over recorded steps of `‖(I-K) û - ŵ‖ / ‖ŵ‖` for the production inverse.
    pub reconstruction_residual: f64,
    /// Max over recorded steps of `|û(L) - U|`.
    pub control_mismatch: f64,
    /// Max over recorded steps of `max_j |u_j - û_j|`.
    pub plant_observer_gap: f64,
    pub steps: usize,
    pub states: Vec<Snapshot>,
}

impl DecayReport {
    fn new(config: &SimConfig, grid: Grid) -> Self {
        DecayReport {
            mode: config.mode,
            grid,
            times: Vec::new(),
            l2_u: Vec::new(),
            l2_uhat: Vec::new(),
            l2_err: Vec::new(),
            h3_err: Vec::new(),
            u_control: Vec::new(),
            v_control: Vec::new(),
            fitted_rate_u: None,
            fitted_rate_uhat: None,
            fitted_rate_err: None,
            constants: None,
            picard_residual: 0.0,
            picard_increment: 0.0,
            succession_residual: 0.0,
            reconstruction_residual: 0.0,
            control_mismatch: 0.0,
            plant_observer_gap: 0.0,
            steps: 0,
            states: Vec::new(),
        }
    }

    fn fit(&mut self) {
        self.fitted_rate_u = fit_decay_rate(&self.times, &self.l2_u, DEFAULT_SKIP_FRACTION).ok();
        self.fitted_rate_uhat =
            fit_decay_rate(&self.times, &self.l2_uhat, DEFAULT_SKIP_FRACTION).ok();
        self.fitted_rate_err = fit_decay_rate(&self.times, &self.l2_err, DEFAULT_SKIP_FRACTION).ok();
    }
}

struct Recorder {
    threshold: Option<f64>,
    keep_states: bool,
}

impl Recorder {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        report: &mut DecayReport,
        step: usize,
        t: f64,
        u: &[f64],
        uhat: &[f64],
        err: &[f64],
        controls: (f64, f64),
    ) -> Result<()> {
        let grid = report.grid;
        let norms = [grid.l2_norm(u), grid.l2_norm(uhat), grid.l2_norm(err)];
        let h3 = h3_norm(err, grid.dx());
        let finite = norms.iter().chain([&h3, &controls.0, &controls.1]).all(|v| v.is_finite());
        if !finite {
            return Err(Error::BlowUp { step, time: t });
        }
        match self.threshold {
            None => {
                let initial = norms.iter().cloned().fold(0.0, f64::max);
                if initial > 0.0 {
                    self.threshold = Some(BLOW_UP_FACTOR * initial);
                }
            }
            Some(limit) => {
                if norms.iter().any(|&v| v > limit) {
                    return Err(Error::BlowUp { step, time: t });
                }
            }
        }
        report.times.push(t);
        report.l2_u.push(norms[0]);
        report.l2_uhat.push(norms[1]);
        report.l2_err.push(norms[2]);
        report.h3_err.push(h3);
        report.u_control.push(controls.0);
        report.v_control.push(controls.1);
        let gap = u.iter().zip(uhat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        report.plant_observer_gap = report.plant_observer_gap.max(gap);
        if self.keep_states {
            report.states.push(Snapshot {
                t,
                u: u.to_vec(),
                uhat: uhat.to_vec(),
                uerr: err.to_vec(),
            });
        }
        Ok(())
    }
}

pub fn run(config: &SimConfig) -> Result<DecayReport> {
    config.validate()?;
    let grid = Grid::new(config.length, config.intervals)?;
    match config.mode {
        Mode::Uncontrolled => run_uncontrolled(config, grid),
        Mode::TwoController | Mode::SingleController => run_controlled(config, grid),
    }
}

fn run_uncontrolled(config: &SimConfig, grid: Grid) -> Result<DecayReport> {
    let stepper = Stepper::new(&grid, 1.0, config.dt)?;
    let gains = NodalGains::zero(&grid);
    let mut report = DecayReport::new(config, grid);
    let mut recorder = Recorder { threshold: None, keep_states: config.record_states };
    let u0 = &config.u0;
    let mut u = cell_average_init(|x| u0.eval(x), &grid, StateKind::Error);
    let zeros = vec![0.0; grid.nodes()];
    recorder.push(&mut report, 0, 0.0, u.values(), &zeros, &zeros, (0.0, 0.0))?;

    let steps = config.steps();
    for n in 1..=steps {
        u = step_error(&u, &gains, &stepper, Mode::Uncontrolled)?;
        if n % config.record_every == 0 || n == steps {
            let t = n as f64 * config.dt;
            recorder.push(&mut report, n, t, u.values(), &zeros, &zeros, (0.0, 0.0))?;
        }
    }
    report.steps = steps;
    report.fit();
    Ok(report)
}

fn run_controlled(config: &SimConfig, grid: Grid) -> Result<DecayReport> {
    let mode = config.mode;
    let single = mode == Mode::SingleController;

    let ks = KernelSet::solve(config.lambda, config.lambda_tilde, config.length, config.n_iter)?;
    let picard = solve_kernel(config.lambda, config.length, config.n_iter)?;
    let residual = kernel_residual(&ks, TRIANGLE_SAMPLES)?;

    let gains = NodalGains::sample(&ks, &grid);
    let transform = VolterraOp::from_poly(&grid, &ks.k);
    let inverse_bound = transform.inverse_row_sum_norm()?;
    let constants = decay_constants(&ks, config.epsilon, inverse_bound)?;
    // Linear functional ŵ -> δx ∫ k_x(L,y) û(y) dy with û = (I - K)⁻¹ ŵ.
    let forcing_weights: Vec<f64> = transform
        .transpose_solve(&gains.v_weights)?
        .into_iter()
        .map(|r| r * grid.dx())
        .collect();
    let forcing = |w: &[f64]| -> f64 { forcing_weights.iter().zip(w).map(|(a, b)| a * b).sum() };

    let err_stepper = Stepper::new(&grid, 1.0, config.dt)?;
    let obs_stepper = Stepper::new(&grid, 1.0 + config.dt * config.lambda, config.dt)?;

    let (u0, uhat0) = (&config.u0, &config.uhat0);
    let mut err = cell_average_init(|x| u0.eval(x) - uhat0.eval(x), &grid, StateKind::Error);
    let uhat_init = cell_average_init(|x| uhat0.eval(x), &grid, StateKind::Plant);
    let mut w = transform.apply(&uhat_init)?.with_kind(StateKind::ObserverTarget);
    w.project_homogeneous();
    if single {
        let g = forcing(w.values());
        let j = grid.intervals();
        let mut values = w.into_values();
        values[j - 1] = g;
        w = GridFunction::new(&grid, values, StateKind::ObserverTarget)?;
    }

    let mut report = DecayReport::new(config, grid);
    report.constants = Some(constants);
    report.picard_residual = residual.max();
    report.picard_increment = picard.increments.last().copied().unwrap_or(0.0);
    report.succession_residual = transform.succession_residual(w.values(), config.m_iter)?;

    let mut recorder = Recorder { threshold: None, keep_states: config.record_states };
    let mut record = |report: &mut DecayReport, n: usize, w: &GridFunction, err: &GridFunction| {
        let uhat = transform.invert_direct_values(w.values())?;
        let u: Vec<f64> = uhat.iter().zip(err.values()).map(|(a, b)| a + b).collect();
        let back = transform.apply_values(&uhat)?;
        let diff: Vec<f64> = back.iter().zip(w.values()).map(|(a, b)| a - b).collect();
        let w_norm = grid.l2_norm(w.values());
        let rel = if w_norm > 0.0 { grid.l2_norm(&diff) / w_norm } else { grid.l2_norm(&diff) };
        report.reconstruction_residual = report.reconstruction_residual.max(rel);
        let u_ctrl = gains.controller_u(&uhat);
        let v_ctrl = if single { 0.0 } else { gains.controller_v(&uhat) };
        report.control_mismatch =
            report.control_mismatch.max((uhat[grid.intervals()] - u_ctrl).abs());
        let t = n as f64 * config.dt;
        recorder.push(report, n, t, &u, &uhat, err.values(), (u_ctrl, v_ctrl))
    };
    record(&mut report, 0, &w, &err)?;

    let steps = config.steps();
    for n in 1..=steps {
        let traces = left_traces(err.values(), grid.dx());
        err = step_error(&err, &gains, &err_stepper, mode)?;
        w = if single {
            let g = forcing(w.values());
            step_observer_target_forced(&w, traces, &gains, &obs_stepper, g)?
        } else {
            step_observer_target(&w, traces, &gains, &obs_stepper, mode, None)?
        };
        if n == steps {
            let r = transform.succession_residual(w.values(), config.m_iter)?;
            report.succession_residual = report.succession_residual.max(r);
        }
        if n % config.record_every == 0 || n == steps {
            record(&mut report, n, &w, &err)?;
        }
    }
    report.steps = steps;
    report.fit();
    Ok(report)
}

/// Least-squares slope of `-ln(norm)` against `t` after discarding the first
/// `skip_fraction` of the time span. Norms below `1e-14` are ignored.
pub fn fit_decay_rate(times: &[f64], norms: &[f64], skip_fraction: f64) -> Result<f64> {
    if times.is_empty() || times.len() != norms.len() {
        return Err(Error::TooFewSamples { usable: 0 });
    }
    let t0 = times[0];
    let cutoff = t0 + skip_fraction * (times[times.len() - 1] - t0);
    let samples: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(&t, &v)| t >= cutoff && v > FIT_FLOOR && v.is_finite())
        .map(|(&t, &v)| (t, -libm::log(v)))
        .collect();
    if samples.len() < 10 {
        return Err(Error::TooFewSamples { usable: samples.len() });
    }
    let n = samples.len() as f64;
    let mean_t = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, y) in &samples {
        sxy += (t - mean_t) * (y - mean_y);
        sxx += (t - mean_t) * (t - mean_t);
    }
    if sxx == 0.0 {
        return Err(Error::TooFewSamples { usable: 1 });
    }
    Ok(sxy / sxx)
}

/// Discrete H³ norm with forward differences, truncated at the right end.
pub fn h3_norm(u: &[f64], dx: f64) -> f64 {
    debug_assert!(u.len() >= 5, "h3_norm needs J >= 4");
    let mut total: f64 = u.iter().map(|v| v * v).sum();
    let mut diff = u.to_vec();
    for _ in 0..3 {
        diff = diff.windows(2).map(|p| (p[1] - p[0]) / dx).collect();
        total += diff.iter().map(|v| v * v).sum::<f64>();
    }
    libm::sqrt(total * dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::TAU;

    #[test]
    fn rate_of_exact_exponential() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| libm::exp(-0.5 * t)).collect();
        assert!((fit_decay_rate(&t, &v, 0.2).unwrap() - 0.5).abs() < 1e-10);
        let c = vec![3.0; 200];
        assert!(fit_decay_rate(&t, &c, 0.2).unwrap().abs() < 1e-14);
    }

    #[test]
    fn rate_needs_ten_samples() {
        let t: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let v = vec![1.0; 12];
        assert_eq!(
            fit_decay_rate(&t, &v, 0.2).unwrap_err(),
            Error::TooFewSamples { usable: 9 }
        );
        let z = vec![0.0; 12];
        assert!(fit_decay_rate(&t, &z, 0.0).is_err());
    }

    #[test]
    fn h3_examples() {
        assert_eq!(h3_norm(&[0.0; 11], 0.1), 0.0);
        let dx = 0.01;
        let lin: Vec<f64> = (0..=100).map(|j| j as f64 * dx).collect();
        let h = h3_norm(&lin, dx);
        let exact = libm::sqrt(4.0 / 3.0);
        assert!((h - exact).abs() < 0.02 * exact, "{h}");
        let c = vec![2.0; 101];
        // 101 nodes of width dx cover L + dx
        assert!((h3_norm(&c, dx) - 2.0 * libm::sqrt(1.0 + dx)).abs() < 1e-12);
    }

    #[test]
    fn interpolation() {
        let d = InitialDatum::Tabulated { x: vec![0.0, 1.0, 3.0], values: vec![0.0, 2.0, -2.0] };
        assert_eq!(d.eval(0.5), 1.0);
        assert_eq!(d.eval(2.0), 0.0);
        assert_eq!(d.eval(5.0), -2.0);
        assert_eq!(d.eval(-1.0), 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::default();
        assert!(c.validate().is_ok());
        c.intervals = 5;
        assert_eq!(c.validate().unwrap_err(), Error::GridTooSmall(5));
        let mut c = SimConfig { length: 3.0, ..SimConfig::default() };
        assert!(matches!(c.validate(), Err(Error::Compatibility { .. })));
        c.u0 = InitialDatum::Zero;
        assert!(c.validate().is_ok());
        c.dt = 1e-9;
        assert!(matches!(c.validate(), Err(Error::RunTooLong { .. })));
        let c = SimConfig { dt: 0.0, ..SimConfig::default() };
        assert!(c.validate().is_err());
        let c = SimConfig { epsilon: EpsilonChoice::Fixed(-1.0), ..SimConfig::default() };
        assert_eq!(c.validate().unwrap_err(), Error::Epsilon(-1.0));
    }

    #[test]
    fn zero_data_stay_zero() {
        for mode in [Mode::Uncontrolled, Mode::TwoController, Mode::SingleController] {
            let c = SimConfig {
                u0: InitialDatum::Zero,
                intervals: 40,
                dt: 1e-2,
                t_final: 1.0,
                mode,
                ..SimConfig::default()
            };
            let r = run(&c).unwrap();
            for series in [&r.l2_u, &r.l2_uhat, &r.l2_err, &r.h3_err, &r.u_control, &r.v_control] {
                assert!(series.iter().all(|&v| v == 0.0), "{mode:?}");
            }
        }
    }

    #[test]
    fn times_are_strictly_increasing() {
        let c = SimConfig { intervals: 40, dt: 1e-2, t_final: 1.05, record_every: 7, ..SimConfig::default() };
        let r = run(&c).unwrap();
        assert!(r.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*r.times.last().unwrap(), 105.0 * 1e-2);
        assert_eq!(r.steps, 105);
    }

    #[test]
    fn uncontrolled_has_no_controls() {
        let c = SimConfig { mode: Mode::Uncontrolled, intervals: 40, dt: 1e-2, t_final: 1.0, ..SimConfig::default() };
        let r = run(&c).unwrap();
        assert!(r.constants.is_none());
        assert!(r.u_control.iter().chain(&r.v_control).all(|&v| v == 0.0));
        assert!(r.l2_u[0] > 0.0);
    }

    #[test]
    fn controls_are_consistent() {
        let c = SimConfig { intervals: 60, dt: 1e-2, t_final: 2.0, ..SimConfig::default() };
        let r = run(&c).unwrap();
        assert!(r.control_mismatch < 1e-12, "{}", r.control_mismatch);
        assert!(r.reconstruction_residual < 1e-10);
        assert!(r.succession_residual < 1e-8);
        let single = run(&SimConfig { mode: Mode::SingleController, ..c }).unwrap();
        assert!(single.v_control.iter().all(|&v| v == 0.0));
        assert!(single.reconstruction_residual < 1e-10);
    }

    #[test]
    fn blow_up_is_reported() {
        // Huge kernel parameter with a coarse step drives the explicit trace
        // coupling unstable.
        let c = SimConfig {
            lambda: 50.0,
            lambda_tilde: 50.0,
            n_iter: 2,
            intervals: 30,
            dt: 0.5,
            t_final: 5000.0,
            ..SimConfig::default()
        };
        match run(&c) {
            Err(Error::BlowUp { .. }) | Err(Error::Singular { .. }) => {}
            other => panic!("expected blow-up, got {:?}", other.map(|r| r.l2_u.last().copied())),
        }
    }

    #[test]
    fn default_configuration() {
        let c = SimConfig::default();
        assert_eq!((c.lambda, c.lambda_tilde, c.n_iter, c.m_iter), (0.01, 0.01, 10, 10));
        assert_eq!(c.length, TAU);
        assert_eq!(c.u0, InitialDatum::OneMinusCos);
        assert_eq!(c.uhat0, InitialDatum::Zero);
    }
}
