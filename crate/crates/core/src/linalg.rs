//! Dense linear algebra on top of nalgebra: minimum-norm least squares,
//! column-space projectors and numerical rank.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Singular values below `RANK_RTOL·σ_max` count as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Orthonormal basis of `col(X)` from a thin SVD.
#[derive(Debug, Clone)]
pub struct ColumnSpace {
    basis: DMatrix<f64>,
    singular_values: Vec<f64>,
}

impl ColumnSpace {
    pub fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        if x.ncols() == 0 || n == 0 {
            return Self {
                basis: DMatrix::zeros(n, 0),
                singular_values: Vec::new(),
            };
        }
        let svd = x.clone().svd(true, false);
        let u = svd.u.expect("requested U");
        let smax = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| smax > 0.0 && svd.singular_values[i] > RANK_RTOL * smax)
            .collect();
        let basis = DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])]);
        let singular_values = keep.iter().map(|&i| svd.singular_values[i]).collect();
        Self { basis, singular_values }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Coordinates `Uᵀw` of the projection in the basis.
    pub fn coordinates(&self, w: &[f64]) -> DVector<f64> {
        self.basis.tr_mul(&DVector::from_column_slice(w))
    }

    pub fn project(&self, w: &[f64]) -> DVector<f64> {
        &self.basis * self.coordinates(w)
    }

    /// `‖P w‖₂`.
    pub fn projected_norm(&self, w: &[f64]) -> f64 {
        self.coordinates(w).norm()
    }
}

pub fn numerical_rank(x: &DMatrix<f64>) -> usize {
    ColumnSpace::new(x).rank()
}

/// Moore–Penrose pseudo-inverse with the [`RANK_RTOL`] cut-off.
pub fn pseudo_inverse(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return DMatrix::zeros(d, n);
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DMatrix::zeros(d, n);
    }
    svd.pseudo_inverse(RANK_RTOL * smax).expect("U and Vᵀ were computed")
}

/// Minimum-norm solution of `min ‖y − Xθ‖₂`.
pub fn min_norm_lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return DVector::zeros(d);
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DVector::zeros(d);
    }
    svd.solve(y, RANK_RTOL * smax).expect("U and Vᵀ were computed")
}

/// `n × d` matrix of i.i.d. standard normals, filled row by row.
pub fn gaussian_matrix<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(n, d, &data)
}

/// Rescales every nonzero column to Euclidean norm `√n`.
pub fn normalize_columns(x: &mut DMatrix<f64>) {
    let target = (x.nrows() as f64).sqrt();
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col *= target / norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        let g = x.tr_mul(x);
        let chol = g.cholesky().expect("full column rank");
        chol.solve(&x.tr_mul(y))
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        let mut r = rng::substream(1, "lstsq", 0);
        let x = gaussian_matrix(50, 5, &mut r);
        let y = DVector::from_vec(rng::normal_vec(&mut r, 50));
        let a = min_norm_lstsq(&x, &y);
        let b = normal_equations(&x, &y);
        assert!((a - b).amax() <= 1e-8);
    }

    #[test]
    fn rank_and_projection() {
        let mut r = rng::substream(2, "rank", 0);
        let a = gaussian_matrix(20, 3, &mut r);
        // Duplicate a column: rank stays 3.
        let x = DMatrix::from_fn(20, 4, |i, j| a[(i, j.min(2))]);
        let cs = ColumnSpace::new(&x);
        assert_eq!(cs.rank(), 3);
        let w = rng::normal_vec(&mut r, 20);
        let p = cs.project(&w);
        let pp = cs.project(p.as_slice());
        assert!((&p - &pp).amax() < 1e-12);
        // Residual is orthogonal to the columns.
        let resid = DVector::from_vec(w) - &p;
        assert!(x.tr_mul(&resid).amax() < 1e-10);
        assert_eq!(numerical_rank(&DMatrix::zeros(4, 3)), 0);
        assert_eq!(min_norm_lstsq(&DMatrix::zeros(4, 3), &DVector::from_element(4, 1.0)).norm(), 0.0);
    }

    #[test]
    fn min_norm_for_wide_design() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::from_vec(vec![2.0]);
        let t = min_norm_lstsq(&x, &y);
        assert!((t[0] - 1.0).abs() < 1e-12 && (t[1] - 1.0).abs() < 1e-12);
        let p = pseudo_inverse(&x);
        assert!(((&p * &y) - t).amax() < 1e-12);
    }

    #[test]
    fn normalized_columns() {
        let mut r = rng::substream(3, "norm", 0);
        let mut x = gaussian_matrix(9, 4, &mut r);
        normalize_columns(&mut x);
        for c in x.column_iter() {
            assert!((c.norm() - 3.0).abs() < 1e-12);
        }
    }
}
