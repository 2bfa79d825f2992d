//! Discrete Volterra operators `(I - K)` on a uniform grid.
//!
//! `K` discretizes `(Υ_η u)(x) = ∫_0^x η(x, y) u(y) dy` with the composite
//! trapezoid rule on each prefix `[0, x_j]`, so row `j` only touches
//! `u_0 ..= u_j`. The matrix is stored packed, row by row.

use alloc::vec;
use alloc::vec::Vec;

use crate::fdsolver::{Grid, GridFunction, StateKind};
use crate::poly2::BiPoly;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct VolterraOp {
    grid: Grid,
    /// Row `j` occupies `packed[j(j+1)/2 ..= j(j+1)/2 + j]`.
    packed: Vec<f64>,
}

#[inline]
fn row_start(j: usize) -> usize {
    j * (j + 1) / 2
}

impl VolterraOp {
    pub fn new(grid: &Grid, eta: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.nodes();
        let dx = grid.dx();
        let mut packed = vec![0.0; row_start(n)];
        for j in 1..n {
            let xj = grid.x(j);
            let row = &mut packed[row_start(j)..row_start(j) + j + 1];
            for (i, k) in row.iter_mut().enumerate() {
                let w = if i == 0 || i == j { 0.5 * dx } else { dx };
                *k = w * eta(xj, grid.x(i));
            }
        }
        VolterraOp { grid: *grid, packed }
    }

    pub fn from_poly(grid: &Grid, kernel: &BiPoly) -> Self {
        Self::new(grid, |x, y| kernel.eval(x, y))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `K[j][i]`, zero above the diagonal.
    pub fn entry(&self, j: usize, i: usize) -> f64 {
        if i > j {
            0.0
        } else {
            self.packed[row_start(j) + i]
        }
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.packed[row_start(j)..row_start(j) + j + 1]
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.grid.nodes() {
            return Err(Error::GridMismatch { expected: self.grid.nodes(), found: u.len() });
        }
        Ok(())
    }

    /// `K u`
    pub fn integral(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(self.integral_unchecked(u))
    }

    fn integral_unchecked(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len())
            .map(|j| self.row(j).iter().zip(u).map(|(k, v)| k * v).sum())
            .collect()
    }

    /// `(I - K) u`
    pub fn apply_values(&self, u: &[f64]) -> Result<Vec<f64>> {
        let ku = self.integral(u)?;
        Ok(u.iter().zip(ku).map(|(a, b)| a - b).collect())
    }

    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        let w = self.apply_values(u.values())?;
        GridFunction::new(&self.grid, w, StateKind::Generic)
    }

    /// Succession inverse: `v⁰ = K w`, `vᵏ = K (w + vᵏ⁻¹)`, `u = w + v^m`.
    pub fn invert_succession_values(&self, w: &[f64], m_iter: usize) -> Result<Vec<f64>> {
        self.check(w)?;
        let mut v = self.integral_unchecked(w);
        let mut sum = vec![0.0; w.len()];
        for _ in 0..m_iter {
            for ((s, a), b) in sum.iter_mut().zip(w).zip(&v) {
                *s = a + b;
            }
            v = self.integral_unchecked(&sum);
        }
        Ok(w.iter().zip(v).map(|(a, b)| a + b).collect())
    }

    pub fn invert_succession(&self, w: &GridFunction, m_iter: usize) -> Result<GridFunction> {
        let u = self.invert_succession_values(w.values(), m_iter)?;
        GridFunction::new(&self.grid, u, StateKind::Generic)
    }

    /// Exact discrete inverse by forward substitution.
    pub fn invert_direct_values(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        let mut u = vec![0.0; w.len()];
        for j in 0..w.len() {
            let row = self.row(j);
            let diag = 1.0 - row[j];
            if row[j].abs() >= 1.0 || diag == 0.0 {
                return Err(Error::Singular { row: j });
            }
            let acc: f64 = row[..j].iter().zip(&u[..j]).map(|(k, v)| k * v).sum();
            u[j] = (w[j] + acc) / diag;
        }
        Ok(u)
    }

    pub fn invert_direct(&self, w: &GridFunction) -> Result<GridFunction> {
        let u = self.invert_direct_values(w.values())?;
        GridFunction::new(&self.grid, u, StateKind::Generic)
    }

    /// Solves `(I - K)ᵀ r = c`, so that `c · (I - K)⁻¹ w = r · w` for every `w`.
    pub fn transpose_solve(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check(c)?;
        let n = c.len();
        let mut r = vec![0.0; n];
        for i in (0..n).rev() {
            let kii = self.entry(i, i);
            let diag = 1.0 - kii;
            if kii.abs() >= 1.0 || diag == 0.0 {
                return Err(Error::Singular { row: i });
            }
            let acc: f64 = (i + 1..n).map(|j| self.entry(j, i) * r[j]).sum();
            r[i] = (c[i] + acc) / diag;
        }
        Ok(r)
    }

    /// `‖(I - K) u_m - w‖ / ‖w‖` for the succession iterate `u_m`; zero when `w = 0`.
    pub fn succession_residual(&self, w: &[f64], m_iter: usize) -> Result<f64> {
        let u = self.invert_succession_values(w, m_iter)?;
        let back = self.apply_values(&u)?;
        let diff: Vec<f64> = back.iter().zip(w).map(|(a, b)| a - b).collect();
        let norm_w = self.grid.l2_norm(w);
        if norm_w == 0.0 {
            return Ok(self.grid.l2_norm(&diff));
        }
        Ok(self.grid.l2_norm(&diff) / norm_w)
    }

    /// Max row sum of `|(I - K)^-1|`, the discrete operator bound used for `mu`.
    pub fn inverse_row_sum_norm(&self) -> Result<f64> {
        let n = self.grid.nodes();
        // Column c of the inverse is the forward substitution of e_c; row sums
        // accumulate column by column.
        let mut row_sums = vec![0.0; n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            for j in c..n {
                let row = self.row(j);
                let diag = 1.0 - row[j];
                if row[j].abs() >= 1.0 || diag == 0.0 {
                    return Err(Error::Singular { row: j });
                }
                let rhs = if j == c { 1.0 } else { 0.0 };
                let acc: f64 = row[c..j].iter().zip(&col[c..j]).map(|(k, v)| k * v).sum();
                col[j] = (rhs + acc) / diag;
                row_sums[j] += col[j].abs();
            }
        }
        Ok(row_sums.into_iter().fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSet;
    use core::f64::consts::TAU;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_kernel_is_identity() {
        let grid = Grid::new(1.0, 10).unwrap();
        let op = VolterraOp::new(&grid, |_, _| 0.0);
        let u: Vec<f64> = (0..11).map(|j| j as f64 * 0.3 - 1.0).collect();
        assert_eq!(op.apply_values(&u).unwrap(), u);
        assert_eq!(op.invert_succession_values(&u, 5).unwrap(), u);
        assert_eq!(op.invert_direct_values(&u).unwrap(), u);
        assert_eq!(op.inverse_row_sum_norm().unwrap(), 1.0);
    }

    #[test]
    fn zero_state_maps_to_zero() {
        let grid = Grid::new(2.0, 12).unwrap();
        let op = VolterraOp::new(&grid, |x, y| x * y + 1.0);
        assert!(op.apply_values(&[0.0; 13]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_kernel_on_constant() {
        let grid = Grid::new(1.0, 100).unwrap();
        let op = VolterraOp::new(&grid, |_, _| 1.0);
        let w = op.apply_values(&[1.0; 101]).unwrap();
        for (j, v) in w.iter().enumerate() {
            assert!((v - (1.0 - grid.x(j))).abs() < 1e-14);
        }
        let u = op.invert_succession_values(&w, 20).unwrap();
        assert!(max_diff(&u, &[1.0; 101]) < 1e-6);
        let u = op.invert_direct_values(&w).unwrap();
        assert!(max_diff(&u, &[1.0; 101]) < 1e-13);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let grid = Grid::new(1.0, 10).unwrap();
        let op = VolterraOp::new(&grid, |_, _| 1.0);
        assert_eq!(
            op.apply_values(&[0.0; 5]).unwrap_err(),
            Error::GridMismatch { expected: 11, found: 5 }
        );
    }

    #[test]
    fn singular_diagonal_is_rejected() {
        let grid = Grid::new(1.0, 10).unwrap();
        // η(x, x) δx / 2 = 1 on the last row
        let op = VolterraOp::new(&grid, |x, _| if x > 0.95 { 20.0 } else { 0.0 });
        assert!(matches!(op.invert_direct_values(&[1.0; 11]), Err(Error::Singular { row: 10 })));
    }

    #[test]
    fn apply_is_linear() {
        let ks = KernelSet::solve(0.05, 0.05, TAU, 6).unwrap();
        let grid = Grid::new(TAU, 60).unwrap();
        let op = VolterraOp::from_poly(&grid, &ks.k);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = random_values(&mut rng, 61);
            let v = random_values(&mut rng, 61);
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = op.apply_values(&combo).unwrap();
            let au = op.apply_values(&u).unwrap();
            let av = op.apply_values(&v).unwrap();
            let rhs: Vec<f64> = au.iter().zip(&av).map(|(x, y)| a * x + b * y).collect();
            assert!(max_diff(&lhs, &rhs) < 1e-12 * (1.0 + lhs.iter().fold(0.0f64, |m, x| m.max(x.abs()))));
        }
    }

    #[test]
    fn direct_inverse_undoes_apply() {
        let ks = KernelSet::solve(0.1, 0.1, TAU, 10).unwrap();
        let grid = Grid::new(TAU, 80).unwrap();
        let op = VolterraOp::from_poly(&grid, &ks.k);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random_values(&mut rng, 81);
        let u = op.invert_direct_values(&w).unwrap();
        assert!(max_diff(&op.apply_values(&u).unwrap(), &w) < 1e-12);
    }

    #[test]
    fn succession_residual_shrinks_geometrically() {
        for &(lambda, l) in &[(0.01, TAU), (0.1, TAU), (0.1, 2.0)] {
            let ks = KernelSet::solve(lambda, lambda, l, 10).unwrap();
            let grid = Grid::new(l, 100).unwrap();
            let op = VolterraOp::from_poly(&grid, &ks.k);
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let w = random_values(&mut rng, 101);
            let res: Vec<f64> = (0..6).map(|m| op.succession_residual(&w, m).unwrap()).collect();
            for pair in res.windows(2) {
                assert!(pair[1] <= 0.5 * pair[0] || pair[1] < 1e-15, "{lambda}: {res:?}");
            }
        }
    }

    #[test]
    fn reflected_kernel_gives_same_transform() {
        let l = TAU;
        let ks = KernelSet::solve(0.01, 0.01, l, 10).unwrap();
        let grid = Grid::new(l, 64).unwrap();
        let from_p = VolterraOp::from_poly(&grid, &ks.p);
        let reflected = VolterraOp::new(&grid, |x, y| ks.k.eval(l - y, l - x));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_values(&mut rng, 65);
        let a = from_p.apply_values(&u).unwrap();
        let b = reflected.apply_values(&u).unwrap();
        assert!(max_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn transpose_solve_gives_functional_of_inverse() {
        let ks = KernelSet::solve(0.1, 0.1, TAU, 8).unwrap();
        let grid = Grid::new(TAU, 40).unwrap();
        let op = VolterraOp::from_poly(&grid, &ks.k);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_values(&mut rng, 41);
        let w = random_values(&mut rng, 41);
        let r = op.transpose_solve(&c).unwrap();
        let u = op.invert_direct_values(&w).unwrap();
        let lhs: f64 = c.iter().zip(&u).map(|(a, b)| a * b).sum();
        let rhs: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn inverse_bound_is_at_least_one() {
        let ks = KernelSet::solve(0.01, 0.01, TAU, 10).unwrap();
        let grid = Grid::new(TAU, 50).unwrap();
        let op = VolterraOp::from_poly(&grid, &ks.k);
        let b = op.inverse_row_sum_norm().unwrap();
        assert!((1.0..2.0).contains(&b), "{b}");
    }
}
