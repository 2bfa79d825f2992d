//! Backstepping kernels by successive approximation.
//!
//! With `s = x - y`, `t = y` and `G(s, t) = k(x, y)`, the controller kernel
//! solves the fixed-point problem
//!
//! ```text
//! G(s,t) = (λ/3) s t + 1/3 ∫_0^t ∫_0^s ∫_0^ω (-G_ttt + 3 G_stt - G_t - λ G)(ξ, η) dξ dω dη
//! ```
//!
//! Every iterate is a polynomial, so the iteration is carried out exactly on
//! [`BiPoly`] coefficient tables. The observer kernel is recovered by the
//! reflection `p(x, y) = G_p(x - y, L - x)`, where `G_p` is the fixed point at
//! the observer parameter.

use alloc::vec::Vec;

use crate::poly2::{AffineMap, BiPoly, UniPoly, Var};
use crate::{Error, Result};

const S: Var = Var::First;
const T: Var = Var::Second;
const X: Var = Var::First;
const Y: Var = Var::Second;

/// Side length of the sample grid used for sup-norms on the triangle.
pub const TRIANGLE_SAMPLES: usize = 50;

/// One sweep of the successive approximation.
pub fn picard_step(prev: &BiPoly, lambda: f64) -> BiPoly {
    let integrand = -prev.diff_n(T, 3) + prev.diff(S).diff_n(T, 2).scale(3.0)
        - prev.diff(T)
        - prev.scale(lambda);
    let integral = integrand.cumint(S).cumint(S).cumint(T);
    BiPoly::monomial(1, 1, lambda / 3.0) + integral.scale(1.0 / 3.0)
}

/// Result of [`solve_kernel`]: the last iterate and the sup-norm of every increment.
#[derive(Debug, Clone)]
pub struct KernelSolve {
    pub g: BiPoly,
    /// `increments[n - 1]` is `sup |G^n - G^(n-1)|` on the triangle `s + t <= L`.
    pub increments: Vec<f64>,
}

pub fn solve_kernel(lambda: f64, length: f64, n_iter: usize) -> Result<KernelSolve> {
    if n_iter < 1 {
        return Err(Error::IterationCount(n_iter));
    }
    check_parameters(lambda, length)?;
    let mut g = BiPoly::zero();
    let mut increments = Vec::with_capacity(n_iter);
    for _ in 0..n_iter {
        let next = picard_step(&g, lambda);
        increments.push(sup_on_triangle(&(&next - &g), length));
        g = next;
    }
    Ok(KernelSolve { g, increments })
}

fn check_parameters(lambda: f64, length: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter("kernel parameter must be finite and >= 0"));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidParameter("domain length must be finite and > 0"));
    }
    Ok(())
}

/// `sup |g(s, t)|` over `{t in [0, L], s in [0, L - t]}` on a 50x50 sample.
fn sup_on_triangle(g: &BiPoly, length: f64) -> f64 {
    let n = TRIANGLE_SAMPLES;
    let mut sup = 0.0f64;
    for a in 0..n {
        let t = length * a as f64 / (n - 1) as f64;
        for b in 0..n {
            let s = (length - t) * b as f64 / (n - 1) as f64;
            sup = sup.max(g.eval(s, t).abs());
        }
    }
    sup
}

/// Solved kernels with every derived quantity the simulator needs.
#[derive(Debug, Clone)]
pub struct KernelSet {
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub length: f64,
    pub n_iter: usize,
    /// Fixed point at `lambda`, in `(s, t)`.
    pub g: BiPoly,
    /// Fixed point at `lambda_tilde`, in `(s, t)`.
    pub g_p: BiPoly,
    pub k: BiPoly,
    pub p: BiPoly,
    pub k_x: BiPoly,
    pub k_y: BiPoly,
    pub p_x: BiPoly,
    pub p_y: BiPoly,
    /// `k_y(x, 0)`
    pub trace_ky0: UniPoly,
    /// `k_x(L, y)`
    pub trace_kxl: UniPoly,
    /// `p_x(L, y)`
    pub trace_pxl: UniPoly,
    /// `p_y(x, 0)`
    pub trace_py0: UniPoly,
    /// `k(L, y)`, the weight of the first boundary controller.
    pub trace_kl: UniPoly,
    pub p1: UniPoly,
    pub p2: UniPoly,
    pub psi1: UniPoly,
    pub psi2: UniPoly,
}

impl KernelSet {
    /// Solves both kernels. A single Picard solve is shared when the two
    /// parameters coincide.
    pub fn solve(lambda: f64, lambda_tilde: f64, length: f64, n_iter: usize) -> Result<Self> {
        check_parameters(lambda_tilde, length)?;
        let g = solve_kernel(lambda, length, n_iter)?.g;
        let g_p = if lambda == lambda_tilde {
            g.clone()
        } else {
            solve_kernel(lambda_tilde, length, n_iter)?.g
        };
        Ok(Self::derive(g, g_p, lambda, lambda_tilde, length, n_iter))
    }

    pub fn derive(
        g: BiPoly,
        g_p: BiPoly,
        lambda: f64,
        lambda_tilde: f64,
        length: f64,
        n_iter: usize,
    ) -> Self {
        let k = g.affine(&AffineMap::new(1.0, -1.0, 0.0, 0.0, 1.0, 0.0));
        let p = g_p.affine(&AffineMap::new(1.0, -1.0, 0.0, -1.0, 0.0, length));
        let k_x = k.diff(X);
        let k_y = k.diff(Y);
        let p_x = p.diff(X);
        let p_y = p.diff(Y);

        let trace_ky0 = k_y.restrict_second(0.0);
        let trace_kxl = k_x.restrict_first(length);
        let trace_pxl = p_x.restrict_first(length);
        let trace_py0 = p_y.restrict_second(0.0);
        let trace_kl = k.restrict_first(length);

        let p1 = trace_py0.clone();
        let p2 = p.restrict_second(0.0).scale(-1.0);
        let psi1 = transported_gain(&p1, &k);
        let psi2 = transported_gain(&p2, &k);

        KernelSet {
            lambda,
            lambda_tilde,
            length,
            n_iter,
            g,
            g_p,
            k,
            p,
            k_x,
            k_y,
            p_x,
            p_y,
            trace_ky0,
            trace_kxl,
            trace_pxl,
            trace_py0,
            trace_kl,
            p1,
            p2,
            psi1,
            psi2,
        }
    }
}

/// `P(x) - int_0^x P(y) k(x, y) dy`
fn transported_gain(gain: &UniPoly, k: &BiPoly) -> UniPoly {
    let integrand = &gain.lift_second() * k;
    let integral = integrand.cumint(Y).diagonal();
    gain - &integral
}

/// Maximum violation of the kernel equation and of its boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelResidual {
    /// `max |k_xxx + k_yyy + k_x + k_y + λ k|` on the sampled triangle.
    pub pde: f64,
    /// Max of `|k(x,x)|`, `|k(x,0)|`, `|k_x(x,x) - λx/3|` along the sampled edges.
    pub boundary: f64,
}

impl KernelResidual {
    pub fn max(&self) -> f64 {
        self.pde.max(self.boundary)
    }
}

/// Residual of the controller kernel on a `samples x samples` grid of `0 <= y <= x <= L`.
pub fn kernel_residual(ks: &KernelSet, samples: usize) -> Result<KernelResidual> {
    if samples < 2 {
        return Err(Error::InvalidParameter("residual needs at least 2 samples per side"));
    }
    let k = &ks.k;
    let operator = k.diff_n(X, 3) + k.diff_n(Y, 3) + ks.k_x.clone() + ks.k_y.clone()
        + k.scale(ks.lambda);
    let slope = UniPoly::new(alloc::vec![0.0, ks.lambda / 3.0]);
    let edges = [
        k.diagonal(),
        k.restrict_second(0.0),
        &ks.k_x.diagonal() - &slope,
    ];
    Ok(residual_on_triangle(&operator, &edges, ks.length, samples))
}

/// Same as [`kernel_residual`] for the observer kernel:
/// `p_xxx + p_yyy + p_x + p_y - λ̃ p` with `p(L,y) = p(x,x) = 0`,
/// `p_x(x,x) = -λ̃ (x - L) / 3`.
pub fn observer_kernel_residual(ks: &KernelSet, samples: usize) -> Result<KernelResidual> {
    if samples < 2 {
        return Err(Error::InvalidParameter("residual needs at least 2 samples per side"));
    }
    let p = &ks.p;
    let operator = p.diff_n(X, 3) + p.diff_n(Y, 3) + ks.p_x.clone() + ks.p_y.clone()
        - p.scale(ks.lambda_tilde);
    let slope = UniPoly::new(alloc::vec![
        ks.lambda_tilde * ks.length / 3.0,
        -ks.lambda_tilde / 3.0
    ]);
    let edges = [
        p.diagonal(),
        p.restrict_first(ks.length),
        &ks.p_x.diagonal() - &slope,
    ];
    Ok(residual_on_triangle(&operator, &edges, ks.length, samples))
}

fn residual_on_triangle(
    operator: &BiPoly,
    edges: &[UniPoly],
    length: f64,
    samples: usize,
) -> KernelResidual {
    let step = |i: usize| length * i as f64 / (samples - 1) as f64;
    let mut pde = 0.0f64;
    for a in 0..samples {
        let x = step(a);
        for b in 0..samples {
            let y = x * b as f64 / (samples - 1) as f64;
            pde = pde.max(operator.eval(x, y).abs());
        }
    }
    let mut boundary = 0.0f64;
    for a in 0..samples {
        let z = step(a);
        for e in edges {
            boundary = boundary.max(e.eval(z).abs());
        }
    }
    KernelResidual { pde, boundary }
}

/// How the Young-inequality parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonChoice {
    /// `ε = (λ - ½‖k_y(·,0)‖²) / (‖Ψ1‖² + ‖Ψ2‖²)`, so that κ is half of the available margin.
    Auto,
    Fixed(f64),
}

/// Guaranteed decay rates and the squared L2 norms they are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConstants {
    /// Error system, two measurements.
    pub alpha: f64,
    /// Observer, two controllers.
    pub kappa: f64,
    /// Error system, single measurement.
    pub beta: f64,
    /// Observer, single controller.
    pub mu: f64,
    pub epsilon: f64,
    pub norm_ky0: f64,
    pub norm_kxl: f64,
    pub norm_pxl: f64,
    pub norm_py0: f64,
    pub norm_psi1: f64,
    pub norm_psi2: f64,
    /// Bound on the norm of `(I - Υ_k)^-1` used in `mu`.
    pub inverse_bound: f64,
}

impl DecayConstants {
    /// `α > κ > 0`
    pub fn two_controller_ordering(&self) -> bool {
        self.alpha > self.kappa && self.kappa > 0.0
    }

    /// `β > μ`
    pub fn single_controller_ordering(&self) -> bool {
        self.beta > self.mu
    }

    /// Names of the constants that are not positive. These are reported, not rejected.
    pub fn nonpositive(&self) -> Vec<&'static str> {
        [
            ("alpha", self.alpha),
            ("kappa", self.kappa),
            ("beta", self.beta),
            ("mu", self.mu),
        ]
        .into_iter()
        .filter(|(_, v)| *v <= 0.0)
        .map(|(n, _)| n)
        .collect()
    }
}

pub fn decay_constants(
    ks: &KernelSet,
    epsilon: EpsilonChoice,
    inverse_bound: f64,
) -> Result<DecayConstants> {
    let l = ks.length;
    let norm_ky0 = ks.trace_ky0.norm_sq(0.0, l);
    let norm_kxl = ks.trace_kxl.norm_sq(0.0, l);
    let norm_pxl = ks.trace_pxl.norm_sq(0.0, l);
    let norm_py0 = ks.trace_py0.norm_sq(0.0, l);
    let norm_psi1 = ks.psi1.norm_sq(0.0, l);
    let norm_psi2 = ks.psi2.norm_sq(0.0, l);

    let margin = ks.lambda - 0.5 * norm_ky0;
    let epsilon = match epsilon {
        EpsilonChoice::Fixed(e) if e > 0.0 && e.is_finite() => e,
        EpsilonChoice::Fixed(e) => return Err(Error::Epsilon(e)),
        EpsilonChoice::Auto => {
            let denom = norm_psi1 + norm_psi2;
            // No admissible choice when the margin is gone; fall back to 1 and
            // let the caller see the negative constant.
            if denom > 0.0 && margin > 0.0 {
                margin / denom
            } else {
                1.0
            }
        }
    };

    let alpha = ks.lambda_tilde - 0.5 * norm_pxl;
    let kappa = margin - 0.5 * epsilon * (norm_psi1 + norm_psi2);
    let beta = ks.lambda_tilde - 0.5 * norm_pxl - 0.5 * norm_py0;
    let mu = margin - 0.5 * epsilon * norm_psi2 - 0.5 * norm_kxl * inverse_bound * inverse_bound;

    Ok(DecayConstants {
        alpha,
        kappa,
        beta,
        mu,
        epsilon,
        norm_ky0,
        norm_kxl,
        norm_pxl,
        norm_py0,
        norm_psi1,
        norm_psi2,
        inverse_bound,
    })
}
