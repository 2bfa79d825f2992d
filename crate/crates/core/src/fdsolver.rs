//! Implicit finite differences for `u_t + u_x + u_xxx = f`.
//!
//! Space is discretized with `A = D⁺D⁺D⁻ + D` on `x_j = j δx`; the discrete
//! state space fixes `u_0 = u_{J-1} = u_J = 0`, so the unknowns are
//! `u_1 ..= u_{J-2}`. Time stepping is backward Euler in the transport part
//! with boundary traces taken explicitly from the previous level.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernel::KernelSet;
use crate::{Error, Result};

/// Which controllers and measurements are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Uncontrolled,
    /// Controllers `U` and `V`, measurements `u_x(0)` and `u_xx(0)`.
    TwoController,
    /// `V = 0` and `P1 = 0`: one controller, one measurement.
    SingleController,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    length: f64,
    intervals: usize,
    dx: f64,
}

impl Grid {
    pub fn new(length: f64, intervals: usize) -> Result<Self> {
        if intervals < 6 {
            return Err(Error::GridTooSmall(intervals));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter("domain length must be finite and > 0"));
        }
        Ok(Grid { length, intervals, dx: length / intervals as f64 })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `J`
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// `J + 1`
    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    /// Composite trapezoid weights on `[0, L]`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.dx; self.nodes()];
        w[0] = 0.5 * self.dx;
        w[self.intervals] = 0.5 * self.dx;
        w
    }

    /// Trapezoid L2 norm.
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        let j = self.intervals;
        let interior: f64 = u[1..j].iter().map(|v| v * v).sum();
        let ends = 0.5 * (u[0] * u[0] + u[j] * u[j]);
        libm::sqrt((interior + ends) * self.dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// Observer minus plant; lives in `X_J`.
    Error,
    /// Transformed observer; lives in `X_J`, except that single-controller
    /// mode forces `w_{J-1}`.
    ObserverTarget,
    Plant,
    Generic,
}

impl StateKind {
    pub fn name(&self) -> &'static str {
        match self {
            StateKind::Error => "error",
            StateKind::ObserverTarget => "observer_target",
            StateKind::Plant => "plant",
            StateKind::Generic => "generic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
    kind: StateKind,
}

impl GridFunction {
    pub fn new(grid: &Grid, values: Vec<f64>, kind: StateKind) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::GridMismatch { expected: grid.nodes(), found: values.len() });
        }
        Ok(GridFunction { values, kind })
    }

    pub fn zeros(grid: &Grid, kind: StateKind) -> Self {
        GridFunction { values: vec![0.0; grid.nodes()], kind }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: StateKind) -> Self {
        self.kind = kind;
        self
    }

    /// Sets `u_0`, `u_{J-1}`, `u_J` to zero.
    pub fn project_homogeneous(&mut self) {
        let j = self.values.len() - 1;
        self.values[0] = 0.0;
        self.values[j - 1] = 0.0;
        self.values[j] = 0.0;
    }

    fn expect(&self, grid: &Grid, kind: StateKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::StateKind { expected: kind.name(), found: self.kind.name() });
        }
        if self.values.len() != grid.nodes() {
            return Err(Error::GridMismatch { expected: grid.nodes(), found: self.values.len() });
        }
        Ok(())
    }
}

/// Square band matrix with one sub-diagonal and two super-diagonals.
///
/// Entry `sub[i]` is `M[i][i-1]`, `sup1[i]` is `M[i][i+1]`, `sup2[i]` is
/// `M[i][i+2]`; entries that fall outside the matrix are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup1: Vec<f64>,
    pub sup2: Vec<f64>,
}

impl BandedMatrix {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i >= 1 {
                    acc += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.sup1[i] * x[i + 1];
                }
                if i + 2 < n {
                    acc += self.sup2[i] * x[i + 2];
                }
                acc
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i >= 1 {
                m[i][i - 1] = self.sub[i];
            }
            if i + 1 < n {
                m[i][i + 1] = self.sup1[i];
            }
            if i + 2 < n {
                m[i][i + 2] = self.sup2[i];
            }
        }
        m
    }

    fn shifted(&self, shift: f64, scale: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|a| scale * a).collect::<Vec<_>>();
        BandedMatrix {
            sub: s(&self.sub),
            diag: self.diag.iter().map(|a| shift + scale * a).collect(),
            sup1: s(&self.sup1),
            sup2: s(&self.sup2),
        }
    }
}

/// Stencil weights of `A` on `(u_{j-1}, u_j, u_{j+1}, u_{j+2})`.
pub fn stencil(dx: f64) -> [f64; 4] {
    let c3 = 1.0 / (dx * dx * dx);
    let c1 = 0.5 / dx;
    [-c3 - c1, 3.0 * c3, -3.0 * c3 + c1, c3]
}

/// `A = D⁺D⁺D⁻ + D` restricted to the unknowns `u_1 ..= u_{J-2}`.
pub fn build_a(grid: &Grid) -> Result<BandedMatrix> {
    if grid.intervals() < 6 {
        return Err(Error::GridTooSmall(grid.intervals()));
    }
    let n = grid.intervals() - 2;
    let [lo, mid, up1, up2] = stencil(grid.dx());
    let mut sub = vec![lo; n];
    sub[0] = 0.0;
    let mut sup1 = vec![up1; n];
    sup1[n - 1] = 0.0;
    let mut sup2 = vec![up2; n];
    sup2[n - 1] = 0.0;
    sup2[n - 2] = 0.0;
    Ok(BandedMatrix { sub, diag: vec![mid; n], sup1, sup2 })
}

/// Factored `c I + δt A`.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    shift: f64,
    dt: f64,
    matrix: BandedMatrix,
    // LU without pivoting: unit lower bidiagonal `lower`, upper band (d, e, f).
    lower: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    f: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &Grid, shift: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter("time step must be finite and > 0"));
        }
        let matrix = build_a(grid)?.shifted(shift, dt);
        let n = matrix.size();
        let mut lower = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut e = matrix.sup1.clone();
        let f = matrix.sup2.clone();
        d[0] = matrix.diag[0];
        for i in 1..n {
            if d[i - 1] == 0.0 {
                return Err(Error::Singular { row: i - 1 });
            }
            lower[i] = matrix.sub[i] / d[i - 1];
            d[i] = matrix.diag[i] - lower[i] * e[i - 1];
            e[i] -= lower[i] * f[i - 1];
        }
        if d[n - 1] == 0.0 {
            return Err(Error::Singular { row: n - 1 });
        }
        Ok(Stepper { grid: *grid, shift, dt, matrix, lower, d, e, f })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn matrix(&self) -> &BandedMatrix {
        &self.matrix
    }

    /// Solves `C x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            rhs[i] -= self.lower[i] * rhs[i - 1];
        }
        rhs[n - 1] /= self.d[n - 1];
        if n >= 2 {
            rhs[n - 2] = (rhs[n - 2] - self.e[n - 2] * rhs[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            rhs[i] = (rhs[i] - self.e[i] * rhs[i + 1] - self.f[i] * rhs[i + 2]) / self.d[i];
        }
    }

    /// Entries of `C` in rows `j = J-3` and `j = J-2` that multiply `u_{J-1}`.
    fn forced_column(&self) -> (f64, f64) {
        let [_, _, up1, up2] = stencil(self.grid.dx());
        (self.dt * up2, self.dt * up1)
    }
}

/// `(u_1 / δx, (u_2 - 2 u_1) / δx²)`, one-sided traces of `u_x(0)` and `u_xx(0)` when `u_0 = 0`.
pub fn left_traces(u: &[f64], dx: f64) -> (f64, f64) {
    (u[1] / dx, (u[2] - 2.0 * u[1]) / (dx * dx))
}

/// Kernel-derived gains sampled on the grid.
#[derive(Debug, Clone)]
pub struct NodalGains {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
    /// `k_y(x_j, 0)`
    pub ky0: Vec<f64>,
    /// Trapezoid weight times `k(L, x_i)`; `U = Σ u_weights[i] û_i`.
    pub u_weights: Vec<f64>,
    /// Trapezoid weight times `k_x(L, x_i)`; `V = Σ v_weights[i] û_i`.
    pub v_weights: Vec<f64>,
}

impl NodalGains {
    pub fn zero(grid: &Grid) -> Self {
        let z = vec![0.0; grid.nodes()];
        NodalGains {
            p1: z.clone(),
            p2: z.clone(),
            psi1: z.clone(),
            psi2: z.clone(),
            ky0: z.clone(),
            u_weights: z.clone(),
            v_weights: z,
        }
    }

    pub fn sample(ks: &KernelSet, grid: &Grid) -> Self {
        let xs: Vec<f64> = (0..grid.nodes()).map(|j| grid.x(j)).collect();
        let s = |p: &crate::poly2::UniPoly| xs.iter().map(|&x| p.eval(x)).collect::<Vec<_>>();
        let w = grid.trapezoid_weights();
        let weighted = |p: &crate::poly2::UniPoly| {
            xs.iter().zip(&w).map(|(&x, wi)| wi * p.eval(x)).collect::<Vec<_>>()
        };
        NodalGains {
            p1: s(&ks.p1),
            p2: s(&ks.p2),
            psi1: s(&ks.psi1),
            psi2: s(&ks.psi2),
            ky0: s(&ks.trace_ky0),
            u_weights: weighted(&ks.trace_kl),
            v_weights: weighted(&ks.trace_kxl),
        }
    }

    /// `Σ u_weights[i] û_i`
    pub fn controller_u(&self, uhat: &[f64]) -> f64 {
        self.u_weights.iter().zip(uhat).map(|(a, b)| a * b).sum()
    }

    /// `Σ v_weights[i] û_i`
    pub fn controller_v(&self, uhat: &[f64]) -> f64 {
        self.v_weights.iter().zip(uhat).map(|(a, b)| a * b).sum()
    }
}

/// One implicit step of the error system
/// `ũ_t + ũ_x + ũ_xxx = P1 ũ_x(0) + P2 ũ_xx(0)` with homogeneous boundary data.
pub fn step_error(
    u: &GridFunction,
    gains: &NodalGains,
    stepper: &Stepper,
    mode: Mode,
) -> Result<GridFunction> {
    let grid = stepper.grid();
    u.expect(grid, StateKind::Error)?;
    if stepper.shift() != 1.0 {
        return Err(Error::InvalidParameter("error stepper must be built with shift 1"));
    }
    let (a, b) = left_traces(u.values(), grid.dx());
    let (g1, g2) = match mode {
        Mode::TwoController => (a, b),
        Mode::SingleController => (0.0, b),
        Mode::Uncontrolled => (0.0, 0.0),
    };
    let dt = stepper.dt();
    let j_max = grid.intervals();
    let mut rhs: Vec<f64> = (1..j_max - 1)
        .map(|j| u.values[j] + dt * (gains.p1[j] * g1 + gains.p2[j] * g2))
        .collect();
    stepper.solve_in_place(&mut rhs);
    Ok(embed(rhs, StateKind::Error))
}

/// One implicit step of the transformed observer
/// `ŵ_t + ŵ_x + ŵ_xxx + λŵ = k_y(x,0) ŵ_x(0) - Ψ1 ũ_x(0) - Ψ2 ũ_xx(0)`.
///
/// `err_traces` are the left traces of the error state at the same time level.
/// In single-controller mode the `Ψ1` term is dropped and `ŵ_{J-1}` is forced to
/// `δx ∫ k_x(L,y) û(y) dy` evaluated on `uhat_prev`.
pub fn step_observer_target(
    w: &GridFunction,
    err_traces: (f64, f64),
    gains: &NodalGains,
    stepper: &Stepper,
    mode: Mode,
    uhat_prev: Option<&GridFunction>,
) -> Result<GridFunction> {
    let grid = stepper.grid();
    w.expect(grid, StateKind::ObserverTarget)?;
    let dx = grid.dx();
    let rhs = observer_rhs(w, err_traces, gains, stepper, mode);

    let forced = if mode == Mode::SingleController {
        let uhat = uhat_prev.ok_or(Error::MissingObserverState)?;
        if uhat.values().len() != grid.nodes() {
            return Err(Error::GridMismatch { expected: grid.nodes(), found: uhat.values().len() });
        }
        dx * gains.controller_v(uhat.values())
    } else {
        0.0
    };
    Ok(finish_observer_step(rhs, stepper, forced))
}

/// Same update as [`step_observer_target`] with the single-controller boundary
/// value `ŵ_{J-1}` supplied directly instead of through the observer state.
pub fn step_observer_target_forced(
    w: &GridFunction,
    err_traces: (f64, f64),
    gains: &NodalGains,
    stepper: &Stepper,
    forced: f64,
) -> Result<GridFunction> {
    let grid = stepper.grid();
    w.expect(grid, StateKind::ObserverTarget)?;
    let rhs = observer_rhs(w, err_traces, gains, stepper, Mode::SingleController);
    Ok(finish_observer_step(rhs, stepper, forced))
}

fn finish_observer_step(mut rhs: Vec<f64>, stepper: &Stepper, forced: f64) -> GridFunction {
    let n = rhs.len();
    if forced != 0.0 {
        let (c_far, c_near) = stepper.forced_column();
        rhs[n - 2] -= c_far * forced;
        rhs[n - 1] -= c_near * forced;
    }
    stepper.solve_in_place(&mut rhs);
    let mut out = embed(rhs, StateKind::ObserverTarget);
    out.values[n + 1] = forced;
    out
}

fn observer_rhs(
    w: &GridFunction,
    err_traces: (f64, f64),
    gains: &NodalGains,
    stepper: &Stepper,
    mode: Mode,
) -> Vec<f64> {
    let grid = stepper.grid();
    let dt = stepper.dt();
    let (a, b) = err_traces;
    let trace_w = w.values[1] / grid.dx();
    let psi1_on = if mode == Mode::SingleController { 0.0 } else { 1.0 };
    (1..grid.intervals() - 1)
        .map(|j| {
            let forcing = gains.ky0[j] * trace_w - psi1_on * gains.psi1[j] * a - gains.psi2[j] * b;
            w.values[j] + dt * forcing
        })
        .collect()
}

/// Places interior unknowns into a full vector with zero boundary entries.
fn embed(interior: Vec<f64>, kind: StateKind) -> GridFunction {
    let mut values = Vec::with_capacity(interior.len() + 3);
    values.push(0.0);
    values.extend(interior);
    values.push(0.0);
    values.push(0.0);
    GridFunction { values, kind }
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Mean of `f` over the cell `[x_j - δx/2, x_j + δx/2]`.
pub fn cell_average(f: &impl Fn(f64) -> f64, center: f64, dx: f64) -> f64 {
    let half = 0.5 * dx;
    GAUSS5.iter().map(|(node, w)| w * f(center + half * node)).sum::<f64>() * 0.5
}

/// Cell averages at every node. For the constrained kinds the entries
/// `0`, `J-1`, `J` are set to zero; for [`StateKind::Generic`] the end cells
/// are clipped to `[0, L]`.
pub fn cell_average_init(f: impl Fn(f64) -> f64, grid: &Grid, kind: StateKind) -> GridFunction {
    let dx = grid.dx();
    let j_max = grid.intervals();
    let mut values: Vec<f64> = (0..grid.nodes())
        .map(|j| cell_average(&f, grid.x(j), dx))
        .collect();
    match kind {
        StateKind::Generic => {
            values[0] = cell_average(&f, 0.25 * dx, 0.5 * dx);
            values[j_max] = cell_average(&f, grid.length() - 0.25 * dx, 0.5 * dx);
        }
        _ => {
            values[0] = 0.0;
            values[j_max - 1] = 0.0;
            values[j_max] = 0.0;
        }
    }
    GridFunction { values, kind }
}
