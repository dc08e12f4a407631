//! Least squares: OLS, affine-inequality-constrained OLS and split-sample fits.
//!
//! [`FixedDesign`] factors a regressor matrix once so that the many responses
//! drawn by a fixed-regressor bootstrap can be fitted cheaply against it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dgp::split_index;
use crate::error::{Error, Result};

/// Relative singular-value threshold below which a design is rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Result of a least-squares fit.
#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals.
    pub ssr: f64,
    /// `X'X`.
    pub gram: DMatrix<f64>,
    /// Residual variance `ssr / n`.
    pub sigma2_hat: f64,
}

/// Feasible set `{theta : a'theta + b >= c}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConstraint {
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
}

impl AffineConstraint {
    pub fn new(a: Vec<f64>, b: f64, c: f64) -> Result<Self> {
        let con = AffineConstraint { a, b, c };
        con.validate()?;
        Ok(con)
    }

    /// `theta_k >= 0` in a model with `dim` coefficients.
    pub fn nonnegative(k: usize, dim: usize) -> Self {
        let mut a = vec![0.0; dim];
        a[k] = 1.0;
        AffineConstraint { a, b: 0.0, c: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.iter().all(|v| *v == 0.0) {
            return Err(Error::param("a", "constraint gradient must be nonzero"));
        }
        if !self
            .a
            .iter()
            .chain([&self.b, &self.c])
            .all(|v| v.is_finite())
        {
            return Err(Error::param("a", "constraint coefficients must be finite"));
        }
        Ok(())
    }

    /// `g(theta) = a'theta + b`.
    pub fn g(&self, theta: &[f64]) -> f64 {
        self.a.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() + self.b
    }

    pub fn is_feasible(&self, theta: &[f64], tol: f64) -> bool {
        self.g(theta) >= self.c - tol
    }

    /// Same gradient and offset, different bound.
    pub fn with_bound(&self, c: f64) -> Self {
        AffineConstraint { c, ..self.clone() }
    }

    /// Gradient padded with zeros for `dim` coefficients (extra regressors
    /// left unconstrained).
    pub fn padded(&self, dim: usize) -> Result<Self> {
        if dim < self.a.len() {
            return Err(Error::Dimension(format!(
                "constraint has {} coefficients, model only {dim}",
                self.a.len()
            )));
        }
        let mut a = self.a.clone();
        a.resize(dim, 0.0);
        Ok(AffineConstraint { a, ..self.clone() })
    }
}

/// Constrained fit plus its KKT multiplier (zero when the constraint is slack).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedFit {
    pub fit: OlsFit,
    pub multiplier: f64,
    /// The unconstrained estimate the projection started from.
    pub unconstrained: Vec<f64>,
}

impl ConstrainedFit {
    pub fn binding(&self) -> bool {
        self.multiplier > 0.0
    }
}

/// A regressor matrix with its factorizations.
#[derive(Clone, Debug)]
pub struct FixedDesign {
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl FixedDesign {
    /// Factors `x`; fails if its smallest singular value is below
    /// [`RANK_TOL`] times the largest.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let (n, m) = x.shape();
        if m > 0 {
            if n < m {
                return Err(Error::SingularDesign { rank: n, cols: m });
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::param("x", "design contains non-finite values"));
            }
            let sv = x.singular_values();
            let max = sv.max();
            let rank = sv.iter().filter(|s| **s > RANK_TOL * max).count();
            if max == 0.0 || rank < m {
                return Err(Error::SingularDesign {
                    rank: if max == 0.0 { 0 } else { rank },
                    cols: m,
                });
            }
        }
        let gram = x.tr_mul(&x);
        let qr = x.clone().qr();
        let q = qr.q();
        let r = qr.r();
        Ok(FixedDesign { x, gram, q, r })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.nrows() {
            return Err(Error::Dimension(format!(
                "response has {} rows, design {}",
                y.len(),
                self.nrows()
            )));
        }
        Ok(())
    }

    fn assemble(&self, y: &[f64], coef: Vec<f64>) -> OlsFit {
        let theta = DVector::from_column_slice(&coef);
        let fitted = &self.x * &theta;
        let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
        let ssr = residuals.iter().map(|e| e * e).sum::<f64>();
        OlsFit {
            coef,
            residuals,
            ssr,
            gram: self.gram.clone(),
            sigma2_hat: ssr / y.len() as f64,
        }
    }

    fn solve_coef(&self, y: &[f64]) -> Vec<f64> {
        if self.ncols() == 0 {
            return Vec::new();
        }
        let qty = self.q.tr_mul(&DVector::from_column_slice(y));
        self.r
            .solve_upper_triangular(&qty)
            .expect("full-rank R has a nonzero diagonal")
            .as_slice()
            .to_vec()
    }

    pub fn fit(&self, y: &[f64]) -> Result<OlsFit> {
        self.check_len(y)?;
        let coef = self.solve_coef(y);
        Ok(self.assemble(y, coef))
    }

    /// `M^{-1} v` with `M = X'X`, via the triangular factor `R'R = M`.
    pub fn solve_gram(&self, v: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_column_slice(v);
        let z = self
            .r
            .tr_solve_upper_triangular(&rhs)
            .expect("full-rank R has a nonzero diagonal");
        self.r
            .solve_upper_triangular(&z)
            .expect("full-rank R has a nonzero diagonal")
            .as_slice()
            .to_vec()
    }

    /// Least squares subject to `a'theta + b >= c`.
    ///
    /// A feasible unconstrained estimate is returned as is. Otherwise it is
    /// projected onto the boundary in the `X'X` metric:
    /// `theta = theta_u + M^{-1} a (a'M^{-1}a)^{-1} (c - b - a'theta_u)`.
    pub fn constrained_fit(&self, y: &[f64], con: &AffineConstraint) -> Result<ConstrainedFit> {
        self.check_len(y)?;
        con.validate()?;
        if con.a.len() != self.ncols() {
            return Err(Error::Dimension(format!(
                "constraint has {} coefficients, design {}",
                con.a.len(),
                self.ncols()
            )));
        }
        let theta_u = self.solve_coef(y);
        let gap = con.c - con.g(&theta_u);
        if gap <= 0.0 {
            let fit = self.assemble(y, theta_u.clone());
            return Ok(ConstrainedFit {
                fit,
                multiplier: 0.0,
                unconstrained: theta_u,
            });
        }
        let m_inv_a = self.solve_gram(&con.a);
        let curvature: f64 = con.a.iter().zip(&m_inv_a).map(|(a, v)| a * v).sum();
        let multiplier = gap / curvature;
        let theta: Vec<f64> = theta_u
            .iter()
            .zip(&m_inv_a)
            .map(|(t, v)| t + v * multiplier)
            .collect();
        let fit = self.assemble(y, theta);
        Ok(ConstrainedFit {
            fit,
            multiplier,
            unconstrained: theta_u,
        })
    }
}

/// Ordinary least squares of `y` on the columns of `x`.
pub fn ols(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit> {
    FixedDesign::new(x.clone())?.fit(y)
}

/// Least squares under a single affine inequality constraint.
pub fn constrained_ols(
    y: &[f64],
    x: &DMatrix<f64>,
    con: &AffineConstraint,
) -> Result<ConstrainedFit> {
    FixedDesign::new(x.clone())?.constrained_fit(y, con)
}

/// Regressors `[X, X 1{t >= k}]` for a break at observation `k` (1-based).
pub fn break_design(x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (n, m) = x.shape();
    let mut out = DMatrix::zeros(n, 2 * m);
    out.view_mut((0, 0), (n, m)).copy_from(x);
    for t in k.max(1) - 1..n {
        for j in 0..m {
            out[(t, m + j)] = x[(t, j)];
        }
    }
    out
}

/// Restricted (no break) and unrestricted (break at `floor(r n)`) fits.
pub fn break_fit(y: &[f64], x: &DMatrix<f64>, r: f64) -> Result<(OlsFit, OlsFit)> {
    let (n, m) = x.shape();
    let k = split_index(r, n);
    check_split(k, n, m)?;
    let restricted = ols(y, x)?;
    let unrestricted = ols(y, &break_design(x, k))?;
    Ok((restricted, unrestricted))
}

pub(crate) fn check_split(k: usize, n: usize, m: usize) -> Result<()> {
    // observations t < k go to the first segment, t >= k to the second
    let first = k.saturating_sub(1);
    let second = (n + 1).saturating_sub(k.max(1));
    if k == 0 || k > n || first < m.max(1) || second < m.max(1) {
        return Err(Error::DegenerateSplit {
            split: k,
            min_obs: m.max(1),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngkit::{derive_stream, sample_std_normal};

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn two_point_hand_solution() {
        let fit = ols(&[0.0, 2.0], &col(&[1.0, 1.0])).unwrap();
        assert!((fit.coef[0] - 1.0).abs() < 1e-14);
        assert!((fit.residuals[0] + 1.0).abs() < 1e-14);
        assert!((fit.residuals[1] - 1.0).abs() < 1e-14);
        assert!((fit.ssr - 2.0).abs() < 1e-13);
        assert!((fit.sigma2_hat - 1.0).abs() < 1e-13);
    }

    #[test]
    fn perfect_fit() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 1.0, -1.0, 1.0, 2.0, 1.0, 3.0]);
        let theta = [0.3, -1.7];
        let y: Vec<f64> = (0..4)
            .map(|i| x[(i, 0)] * theta[0] + x[(i, 1)] * theta[1])
            .collect();
        let fit = ols(&y, &x).unwrap();
        for (a, b) in fit.coef.iter().zip(theta) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(fit.ssr < 1e-24);
    }

    #[test]
    fn orthogonal_columns_give_univariate_slopes() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let y = [1.0, 2.0, -0.5, 4.0];
        let fit = ols(&y, &x).unwrap();
        for j in 0..2 {
            let c = x.column(j);
            let slope = c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / c.norm_squared();
            assert!((fit.coef[j] - slope).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            ols(&[1.0, 2.0, 3.0], &x),
            Err(Error::SingularDesign { .. })
        ));
        assert!(matches!(
            ols(&[1.0], &DMatrix::zeros(1, 2)),
            Err(Error::SingularDesign { .. })
        ));
        assert!(matches!(
            ols(&[1.0, 1.0], &col(&[0.0, 0.0])),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn empty_design_leaves_response_as_residual() {
        let fit = ols(&[1.0, -2.0], &DMatrix::zeros(2, 0)).unwrap();
        assert!(fit.coef.is_empty());
        assert_eq!(fit.residuals, vec![1.0, -2.0]);
        assert_eq!(fit.ssr, 5.0);
    }

    #[test]
    fn inactive_constraint_returns_ols() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = [0.0, 1.0, 2.1];
        let con = AffineConstraint::nonnegative(1, 2);
        let c = constrained_ols(&y, &x, &con).unwrap();
        assert_eq!(c.fit, ols(&y, &x).unwrap());
        assert_eq!(c.multiplier, 0.0);
    }

    #[test]
    fn orthonormal_projection_zeroes_negative_coordinate() {
        let x = DMatrix::from_row_slice(4, 2, &[0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5]);
        assert!((x.tr_mul(&x) - DMatrix::identity(2, 2)).norm() < 1e-15);
        let y = [0.2, 1.0, -0.4, 0.9];
        let u = ols(&y, &x).unwrap();
        assert!(u.coef[1] < 0.0);
        let c = constrained_ols(&y, &x, &AffineConstraint::nonnegative(1, 2)).unwrap();
        assert!((c.fit.coef[0] - u.coef[0]).abs() < 1e-14);
        assert!(c.fit.coef[1].abs() < 1e-14);
        assert!(c.multiplier > 0.0);
    }

    #[test]
    fn constraint_validation() {
        assert!(AffineConstraint::new(vec![0.0, 0.0], 0.0, 0.0).is_err());
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let con = AffineConstraint::nonnegative(0, 3);
        assert!(matches!(
            constrained_ols(&[1.0, 2.0, 3.0], &x, &con),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn break_fits() {
        let n = 20;
        let x: Vec<f64> = (0..n).map(|t| 1.0 + t as f64 * 0.3).collect();
        let flat: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let (r, u) = break_fit(&flat, &col(&x), 0.5).unwrap();
        assert!(r.ssr < 1e-20 && u.ssr < 1e-20);
        // slope changes from 2 to 5 at t = 10 (1-based)
        let step: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| if i + 1 >= 10 { 5.0 * v } else { 2.0 * v })
            .collect();
        let (r, u) = break_fit(&step, &col(&x), 0.5).unwrap();
        assert!(u.ssr < 1e-20);
        assert!(r.ssr > 1.0);
    }

    #[test]
    fn nested_break_model_never_fits_worse() {
        let mut s = derive_stream(4, &[]);
        for _ in 0..20 {
            let x = col(&sample_std_normal(&mut s, 30));
            let y = sample_std_normal(&mut s, 30);
            for r in [0.2, 0.5, 0.8] {
                let (a, b) = break_fit(&y, &x, r).unwrap();
                assert!(b.ssr <= a.ssr * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn degenerate_split() {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.1, 1.0, 0.2, 1.0, 0.4, 1.0, 0.3, 1.0, 0.9]);
        let y = [1.0; 5];
        assert!(matches!(
            break_fit(&y, &x, 0.2),
            Err(Error::DegenerateSplit { .. })
        ));
        assert!(matches!(
            break_fit(&y, &x, 0.0),
            Err(Error::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut s = derive_stream(8, &[]);
        let n = 50;
        let x = DMatrix::from_vec(n, 3, sample_std_normal(&mut s, 3 * n));
        let y = sample_std_normal(&mut s, n);
        let fit = ols(&y, &x).unwrap();
        let xe = x.tr_mul(&DVector::from_column_slice(&fit.residuals));
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(xe.amax() <= 1e-8 * x.norm() * ynorm);
    }
}
