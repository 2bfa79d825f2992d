//! Dense polynomials in one and two real variables.
//!
//! [`BiPoly`] stores `c[m][n]` for the monomial `v1^m v2^n` in a row-major
//! table. All operations are exact on the coefficient table up to float
//! rounding; there is no symbolic simplification beyond trimming zero tails.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

/// Coefficients smaller than this are flushed to zero.
const TRIM_THRESHOLD: f64 = 1e-300;

/// Selects one of the two variables of a [`BiPoly`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    First,
    Second,
}

/// Substitution `(v1, v2) <- (a1 x + b1 y + c1, a2 x + b2 y + c2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);

    pub const fn new(a1: f64, b1: f64, c1: f64, a2: f64, b2: f64, c2: f64) -> Self {
        AffineMap { a1, b1, c1, a2, b2, c2 }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a1 * x + self.b1 * y + self.c1,
            self.a2 * x + self.b2 * y + self.c2,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiPoly {
    rows: usize,
    cols: usize,
    coeffs: Vec<f64>,
}

impl Default for BiPoly {
    fn default() -> Self {
        Self::zero()
    }
}

impl BiPoly {
    pub fn zero() -> Self {
        BiPoly { rows: 1, cols: 1, coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        BiPoly { rows: 1, cols: 1, coeffs: vec![c] }.trimmed()
    }

    /// `c * v1^m * v2^n`
    pub fn monomial(m: usize, n: usize, c: f64) -> Self {
        let mut p = Self::with_shape(m + 1, n + 1);
        p.coeffs[m * (n + 1) + n] = c;
        p.trimmed()
    }

    /// Builds from `table[m][n]`; ragged rows are padded with zeros.
    pub fn from_table(table: &[Vec<f64>]) -> Self {
        let rows = table.len().max(1);
        let cols = table.iter().map(Vec::len).max().unwrap_or(1).max(1);
        let mut p = Self::with_shape(rows, cols);
        for (m, row) in table.iter().enumerate() {
            for (n, &c) in row.iter().enumerate() {
                p.coeffs[m * cols + n] = c;
            }
        }
        p.trimmed()
    }

    fn with_shape(rows: usize, cols: usize) -> Self {
        BiPoly { rows, cols, coeffs: vec![0.0; rows * cols] }
    }

    pub fn deg1(&self) -> usize {
        self.rows - 1
    }

    pub fn deg2(&self) -> usize {
        self.cols - 1
    }

    pub fn coeff(&self, m: usize, n: usize) -> f64 {
        if m < self.rows && n < self.cols {
            self.coeffs[m * self.cols + n]
        } else {
            0.0
        }
    }

    fn coeff_mut(&mut self, m: usize, n: usize) -> &mut f64 {
        &mut self.coeffs[m * self.cols + n]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    /// Every entry `(m, n, c)` of the dense table, row-major.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let cols = self.cols;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, &c)| (k / cols, k % cols, c))
    }

    fn trimmed(mut self) -> Self {
        for c in &mut self.coeffs {
            if c.abs() < TRIM_THRESHOLD {
                *c = 0.0;
            }
        }
        let mut rows = self.rows;
        while rows > 1 && (0..self.cols).all(|n| self.coeffs[(rows - 1) * self.cols + n] == 0.0) {
            rows -= 1;
        }
        let mut cols = self.cols;
        while cols > 1 && (0..rows).all(|m| self.coeffs[m * self.cols + cols - 1] == 0.0) {
            cols -= 1;
        }
        if rows == self.rows && cols == self.cols {
            return self;
        }
        let mut out = Self::with_shape(rows, cols);
        for m in 0..rows {
            for n in 0..cols {
                out.coeffs[m * cols + n] = self.coeffs[m * self.cols + n];
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        BiPoly {
            rows: self.rows,
            cols: self.cols,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
        .trimmed()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let rows = self.rows.max(other.rows);
        let cols = self.cols.max(other.cols);
        let mut out = Self::with_shape(rows, cols);
        for m in 0..rows {
            for n in 0..cols {
                out.coeffs[m * cols + n] = f(self.coeff(m, n), other.coeff(m, n));
            }
        }
        out.trimmed()
    }

    fn convolve(&self, other: &Self) -> Self {
        let rows = self.rows + other.rows - 1;
        let cols = self.cols + other.cols - 1;
        let mut out = Self::with_shape(rows, cols);
        for m1 in 0..self.rows {
            for n1 in 0..self.cols {
                let a = self.coeffs[m1 * self.cols + n1];
                if a == 0.0 {
                    continue;
                }
                for m2 in 0..other.rows {
                    for n2 in 0..other.cols {
                        out.coeffs[(m1 + m2) * cols + n1 + n2] +=
                            a * other.coeffs[m2 * other.cols + n2];
                    }
                }
            }
        }
        out.trimmed()
    }

    /// Exact partial derivative.
    pub fn diff(&self, var: Var) -> Self {
        match var {
            Var::First if self.rows == 1 => Self::zero(),
            Var::Second if self.cols == 1 => Self::zero(),
            Var::First => {
                let mut out = Self::with_shape(self.rows - 1, self.cols);
                for m in 1..self.rows {
                    for n in 0..self.cols {
                        *out.coeff_mut(m - 1, n) = m as f64 * self.coeff(m, n);
                    }
                }
                out.trimmed()
            }
            Var::Second => {
                let mut out = Self::with_shape(self.rows, self.cols - 1);
                for m in 0..self.rows {
                    for n in 1..self.cols {
                        *out.coeff_mut(m, n - 1) = n as f64 * self.coeff(m, n);
                    }
                }
                out.trimmed()
            }
        }
    }

    /// Repeated partial derivative.
    pub fn diff_n(&self, var: Var, order: usize) -> Self {
        (0..order).fold(self.clone(), |p, _| p.diff(var))
    }

    /// Antiderivative vanishing at zero: `q(X, .) = int_0^X p(xi, .) dxi`.
    pub fn cumint(&self, var: Var) -> Self {
        let mut out = match var {
            Var::First => Self::with_shape(self.rows + 1, self.cols),
            Var::Second => Self::with_shape(self.rows, self.cols + 1),
        };
        for m in 0..self.rows {
            for n in 0..self.cols {
                let c = self.coeff(m, n);
                match var {
                    Var::First => *out.coeff_mut(m + 1, n) = c / (m + 1) as f64,
                    Var::Second => *out.coeff_mut(m, n + 1) = c / (n + 1) as f64,
                }
            }
        }
        out.trimmed()
    }

    /// Expands `p(a1 x + b1 y + c1, a2 x + b2 y + c2)` as a polynomial in `(x, y)`.
    pub fn affine(&self, map: &AffineMap) -> Self {
        let first = linear_form(map.a1, map.b1, map.c1);
        let second = linear_form(map.a2, map.b2, map.c2);

        let mut powers = Vec::with_capacity(self.cols);
        powers.push(BiPoly::constant(1.0));
        for n in 1..self.cols {
            let next = &powers[n - 1] * &second;
            powers.push(next);
        }
        // row_poly(m) = sum_n c[m][n] * second^n
        let row_poly = |m: usize| {
            let mut acc = BiPoly::zero();
            for (n, pw) in powers.iter().enumerate() {
                let c = self.coeff(m, n);
                if c != 0.0 {
                    acc = acc.zip_with(pw, |a, b| a + c * b);
                }
            }
            acc
        };

        // Horner in the first linear form.
        let mut acc = row_poly(self.rows - 1);
        for m in (0..self.rows - 1).rev() {
            acc = &(&acc * &first) + &row_poly(m);
        }
        acc
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for m in (0..self.rows).rev() {
            let row = &self.coeffs[m * self.cols..(m + 1) * self.cols];
            let inner = row.iter().rev().fold(0.0, |a, &c| a * y + c);
            acc = acc * x + inner;
        }
        acc
    }

    /// `p(x0, y)` as a polynomial in `y`.
    pub fn restrict_first(&self, x0: f64) -> UniPoly {
        let mut out = vec![0.0; self.cols];
        for (n, o) in out.iter_mut().enumerate() {
            *o = (0..self.rows)
                .rev()
                .fold(0.0, |a, m| a * x0 + self.coeff(m, n));
        }
        UniPoly::new(out)
    }

    /// `p(x, y0)` as a polynomial in `x`.
    pub fn restrict_second(&self, y0: f64) -> UniPoly {
        let out = (0..self.rows)
            .map(|m| {
                let row = &self.coeffs[m * self.cols..(m + 1) * self.cols];
                row.iter().rev().fold(0.0, |a, &c| a * y0 + c)
            })
            .collect();
        UniPoly::new(out)
    }

    /// `p(x, x)` as a polynomial in `x`.
    pub fn diagonal(&self) -> UniPoly {
        let mut out = vec![0.0; self.rows + self.cols - 1];
        for (m, n, c) in self.terms() {
            out[m + n] += c;
        }
        UniPoly::new(out)
    }
}

fn linear_form(a: f64, b: f64, c: f64) -> BiPoly {
    BiPoly::from_table(&[vec![c, b], vec![a, 0.0]])
}

macro_rules! bipoly_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&BiPoly> for &BiPoly {
            type Output = BiPoly;
            fn $method(self, rhs: &BiPoly) -> BiPoly {
                let f: fn(&BiPoly, &BiPoly) -> BiPoly = $body;
                f(self, rhs)
            }
        }
        impl $tr<BiPoly> for BiPoly {
            type Output = BiPoly;
            fn $method(self, rhs: BiPoly) -> BiPoly {
                (&self).$method(&rhs)
            }
        }
    };
}

bipoly_binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
bipoly_binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
bipoly_binop!(Mul, mul, |a, b| a.convolve(b));

impl Neg for &BiPoly {
    type Output = BiPoly;
    fn neg(self) -> BiPoly {
        self.scale(-1.0)
    }
}

impl Neg for BiPoly {
    type Output = BiPoly;
    fn neg(self) -> BiPoly {
        self.scale(-1.0)
    }
}

/// Dense univariate polynomial, `coeffs[k]` multiplies `x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniPoly {
    coeffs: Vec<f64>,
}

impl Default for UniPoly {
    fn default() -> Self {
        Self::zero()
    }
}

impl UniPoly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        for c in &mut coeffs {
            if c.abs() < TRIM_THRESHOLD {
                *c = 0.0;
            }
        }
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        UniPoly { coeffs }
    }

    pub fn zero() -> Self {
        UniPoly { coeffs: vec![0.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |a, &c| a * x + c)
    }

    pub fn scale(&self, factor: f64) -> Self {
        UniPoly::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn diff(&self) -> Self {
        UniPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            out[k + 1] = c / (k + 1) as f64;
        }
        UniPoly::new(out)
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let anti = self.antiderivative();
        anti.eval(b) - anti.eval(a)
    }

    /// Squared L2 norm on `(a, b)`, integrated exactly.
    pub fn norm_sq(&self, a: f64, b: f64) -> f64 {
        (self * self).integral(a, b)
    }

    /// Embeds as a polynomial in the first variable of a [`BiPoly`].
    pub fn lift_first(&self) -> BiPoly {
        let table: Vec<Vec<f64>> = self.coeffs.iter().map(|&c| vec![c]).collect();
        BiPoly::from_table(&table)
    }

    /// Embeds as a polynomial in the second variable of a [`BiPoly`].
    pub fn lift_second(&self) -> BiPoly {
        BiPoly::from_table(core::slice::from_ref(&self.coeffs))
    }
}

impl Add<&UniPoly> for &UniPoly {
    type Output = UniPoly;
    fn add(self, rhs: &UniPoly) -> UniPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let get = |p: &UniPoly, k: usize| p.coeffs.get(k).copied().unwrap_or(0.0);
        UniPoly::new((0..n).map(|k| get(self, k) + get(rhs, k)).collect())
    }
}

impl Sub<&UniPoly> for &UniPoly {
    type Output = UniPoly;
    fn sub(self, rhs: &UniPoly) -> UniPoly {
        self + &rhs.scale(-1.0)
    }
}

impl Mul<&UniPoly> for &UniPoly {
    type Output = UniPoly;
    fn mul(self, rhs: &UniPoly) -> UniPoly {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UniPoly::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st() -> BiPoly {
        BiPoly::monomial(1, 1, 1.0)
    }

    #[test]
    fn add_examples() {
        assert!((&st() + &st().scale(-1.0)).is_zero());
        let p = BiPoly::constant(1.0) + BiPoly::monomial(1, 0, 1.0);
        assert_eq!(p, BiPoly::from_table(&[vec![1.0], vec![1.0]]));
        let a = st() + BiPoly::monomial(3, 1, 1.0);
        let sum = &a + &st().scale(2.0);
        assert_eq!(sum.coeff(1, 1), 3.0);
        assert_eq!(sum.coeff(3, 1), 1.0);
        assert_eq!((sum.deg1(), sum.deg2()), (3, 1));
    }

    #[test]
    fn cancellation_trims_degree() {
        let a = st() + BiPoly::monomial(4, 2, 2.0);
        let b = BiPoly::monomial(4, 2, -2.0);
        let sum = &a + &b;
        assert_eq!((sum.deg1(), sum.deg2()), (1, 1));
    }

    #[test]
    fn mul_examples() {
        let s = BiPoly::monomial(1, 0, 1.0);
        let t = BiPoly::monomial(0, 1, 1.0);
        assert_eq!(&s * &t, st());
        let p = BiPoly::from_table(&[vec![0.5, -1.0], vec![2.0, 0.0, 3.0]]);
        assert_eq!(&BiPoly::constant(1.0) * &p, p);
        let prod = (&s + &t) * (&s - &t);
        let expect = BiPoly::monomial(2, 0, 1.0) - BiPoly::monomial(0, 2, 1.0);
        assert_eq!(prod, expect);
    }

    #[test]
    fn diff_examples() {
        assert_eq!(st().diff(Var::Second), BiPoly::monomial(1, 0, 1.0));
        assert!(BiPoly::monomial(0, 2, 1.0).diff(Var::First).is_zero());
        let p = BiPoly::monomial(1, 3, 1.0).diff_n(Var::Second, 3);
        assert_eq!(p, BiPoly::monomial(1, 0, 6.0));
    }

    #[test]
    fn cumint_examples() {
        assert_eq!(
            BiPoly::constant(1.0).cumint(Var::First),
            BiPoly::monomial(1, 0, 1.0)
        );
        assert_eq!(st().cumint(Var::Second), BiPoly::monomial(1, 2, 0.5));
        assert!(BiPoly::zero().cumint(Var::First).is_zero());
    }

    #[test]
    fn affine_examples() {
        // (s, t) <- (x - y, y)
        let m = AffineMap::new(1.0, -1.0, 0.0, 0.0, 1.0, 0.0);
        let expect = BiPoly::monomial(1, 1, 1.0) - BiPoly::monomial(0, 2, 1.0);
        assert_eq!(st().affine(&m), expect);

        let p = BiPoly::from_table(&[vec![0.25, -1.0, 3.0], vec![2.0, 0.0, -0.5]]);
        assert_eq!(p.affine(&AffineMap::IDENTITY), p);

        // (s, t) <- (x - y, L - x)
        let l = 2.5;
        let m = AffineMap::new(1.0, -1.0, 0.0, -1.0, 0.0, l);
        let expect = BiPoly::from_table(&[vec![0.0, -l], vec![l, 1.0], vec![-1.0]]);
        let got = st().affine(&m);
        for mm in 0..3 {
            for nn in 0..2 {
                assert!((got.coeff(mm, nn) - expect.coeff(mm, nn)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn eval_examples() {
        assert_eq!(st().eval(2.0, 3.0), 6.0);
        assert_eq!(BiPoly::zero().eval(1.7, -4.2), 0.0);
        let p = st() - BiPoly::monomial(3, 1, 1.0 / 6.0);
        assert!((p.eval(1.0, 1.0) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn restrictions() {
        // p = 1 + 2x y + 3 x^2
        let p = BiPoly::from_table(&[vec![1.0], vec![0.0, 2.0], vec![3.0]]);
        assert_eq!(p.restrict_first(2.0).coeffs(), &[13.0, 4.0]);
        assert_eq!(p.restrict_second(0.5).coeffs(), &[1.0, 1.0, 3.0]);
        assert_eq!(p.diagonal().coeffs(), &[1.0, 0.0, 5.0]);
    }

    #[test]
    fn unipoly_integrals() {
        // int_0^L (a (L - y))^2 = a^2 L^3 / 3
        let (a, l) = (0.7, 3.0);
        let p = UniPoly::new(vec![a * l, -a]);
        assert!((p.norm_sq(0.0, l) - a * a * l * l * l / 3.0).abs() < 1e-13);
        assert_eq!(p.lift_second().restrict_first(9.0), p);
        assert_eq!(p.lift_first().restrict_second(9.0), p);
    }

    fn arb_poly(max_deg: usize) -> impl Strategy<Value = BiPoly> {
        (1..=max_deg + 1, 1..=max_deg + 1)
            .prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-1.0f64..1.0, c), r))
            .prop_map(|t| BiPoly::from_table(&t))
    }

    /// Sum of |c| |x|^m |y|^n, the scale against which evaluation error is measured.
    fn abs_eval(p: &BiPoly, x: f64, y: f64) -> f64 {
        p.terms()
            .map(|(m, n, c)| c.abs() * x.abs().powi(m as i32) * y.abs().powi(n as i32))
            .sum()
    }

    proptest! {
        #[test]
        fn cumint_then_diff_is_identity(p in arb_poly(8)) {
            for var in [Var::First, Var::Second] {
                let back = p.cumint(var).diff(var);
                prop_assert_eq!((back.deg1(), back.deg2()), (p.deg1(), p.deg2()));
                for (m, n, c) in p.terms() {
                    prop_assert!((back.coeff(m, n) - c).abs() <= 2.0 * f64::EPSILON * c.abs());
                }
            }
        }

        #[test]
        fn affine_commutes_with_eval(
            p in arb_poly(10),
            map in prop::array::uniform6(-1.0f64..1.0),
            x in 0.0..core::f64::consts::TAU,
            y in 0.0..core::f64::consts::TAU,
        ) {
            let m = AffineMap::new(map[0], map[1], map[2], map[3], map[4], map[5]);
            let (u, v) = m.apply(x, y);
            let direct = p.eval(u, v);
            let composed = p.affine(&m).eval(x, y);
            // Expansion of (a x + b y + c)^k reorders sums; measure against the
            // magnitude of the expanded terms.
            let scale = abs_eval(&p, map[0].abs() * x + map[1].abs() * y + map[2].abs(),
                                     map[3].abs() * x + map[4].abs() * y + map[5].abs()).max(1.0);
            prop_assert!((direct - composed).abs() <= 1e-10 * scale,
                "direct {} composed {} scale {}", direct, composed, scale);
        }

        #[test]
        fn mul_commutes_and_distributes(a in arb_poly(5), b in arb_poly(5), c in arb_poly(5)) {
            let ab = &a * &b;
            let ba = &b * &a;
            for (m, n, x) in ab.terms() {
                prop_assert!((x - ba.coeff(m, n)).abs() <= 1e-15 * (1.0 + x.abs()));
            }
            let lhs = &a * &(&b + &c);
            let rhs = &(&a * &b) + &(&a * &c);
            let tol = 1e-13 * (1.0 + lhs.max_abs_coeff());
            for m in 0..=lhs.deg1().max(rhs.deg1()) {
                for n in 0..=lhs.deg2().max(rhs.deg2()) {
                    prop_assert!((lhs.coeff(m, n) - rhs.coeff(m, n)).abs() <= tol);
                }
            }
        }

        #[test]
        fn eval_is_additive(a in arb_poly(6), b in arb_poly(6), x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let sum = (&a + &b).eval(x, y);
            let parts = a.eval(x, y) + b.eval(x, y);
            let scale = abs_eval(&a, x, y) + abs_eval(&b, x, y);
            prop_assert!((sum - parts).abs() <= 1e-12 * scale.max(1.0));
        }
    }
}
