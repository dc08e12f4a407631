//! Original-sample test statistics.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::dgp::split_index;
use crate::error::{Error, Result};
use crate::estimators::{check_split, AffineConstraint, OlsFit};

/// SSRs at or below this fraction of `y'y` are treated as exact zeros.
pub const ZERO_SSR_REL: f64 = 1e-12;

/// A statistic and an optional by-product: the argmax break fraction for
/// sup-F, the location of the supremum for KS.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatValue {
    pub value: f64,
    pub aux: Option<f64>,
}

impl StatValue {
    pub fn new(value: f64) -> Self {
        StatValue { value, aux: None }
    }
}

/// `n^{alpha_exp/2} (beta_hat - beta0)` for the first coefficient of `fit`.
pub fn slope_stat(fit: &OlsFit, beta0: f64, alpha_exp: f64, n: usize) -> Result<StatValue> {
    let beta = *fit
        .coef
        .first()
        .ok_or_else(|| Error::Dimension("slope statistic needs a regressor".into()))?;
    Ok(StatValue::new(
        (n as f64).powf(alpha_exp / 2.0) * (beta - beta0),
    ))
}

/// Normalization of the CUSUM statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nu {
    /// `(sum (e_t - mean)^2)^{1/2}`.
    #[default]
    SqrtSumSquares,
    /// `max |e_t - mean|`.
    MaxAbs,
    /// No normalization.
    One,
}

/// `nu^{-1} max_t |sum_{i<=t} (e_i - mean)|`.
pub fn cusum_stat(e: &[f64], nu: Nu) -> Result<StatValue> {
    let n = e.len();
    if n < 2 {
        return Err(Error::param(
            "e",
            format!("CUSUM needs at least 2 observations, got {n}"),
        ));
    }
    let mean = e.iter().sum::<f64>() / n as f64;
    let scale = match nu {
        Nu::SqrtSumSquares => e.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt(),
        Nu::MaxAbs => e.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max),
        Nu::One => 1.0,
    };
    if !(scale > 0.0) {
        return Err(Error::DegenerateNormalization);
    }
    Ok(StatValue::new(max_abs_partial_sum(e, mean) / scale))
}

pub(crate) fn max_abs_partial_sum(e: &[f64], mean: f64) -> f64 {
    let mut s = 0.0;
    let mut best = 0.0f64;
    for v in e {
        s += v - mean;
        best = best.max(s.abs());
    }
    best
}

/// `n^{1/2} sup_u |F_n(u) - F0(u)|` for the empirical cdf `F_n` of `residuals`.
///
/// `aux` holds the order statistic at which the supremum is attained.
pub fn ks_stat(residuals: &[f64], f0: impl Fn(f64) -> f64) -> Result<StatValue> {
    let n = residuals.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut best = f64::NEG_INFINITY;
    let mut at = sorted[0];
    for (i, &u) in sorted.iter().enumerate() {
        let f = f0(u);
        let d = ((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
        if d > best {
            best = d;
            at = u;
        }
    }
    Ok(StatValue {
        value: nf.sqrt() * best,
        aux: Some(at),
    })
}

/// `n^{1/2} (a'theta + b)`.
pub fn boundary_stat(theta: &[f64], con: &AffineConstraint, n: usize) -> StatValue {
    StatValue::new((n as f64).sqrt() * con.g(theta))
}

/// Regressor moments shared by every response scanned for a break.
///
/// Built once per regressor matrix; a fixed-regressor bootstrap reuses it
/// for all replicates.
#[derive(Clone, Debug)]
pub struct SupFWorkspace {
    x: DMatrix<f64>,
    full: Cholesky<f64, Dyn>,
    splits: Vec<SplitFactor>,
}

#[derive(Clone, Debug)]
struct SplitFactor {
    k: usize,
    first: Cholesky<f64, Dyn>,
    second: Cholesky<f64, Dyn>,
}

impl SupFWorkspace {
    pub fn new(x: &DMatrix<f64>, r_lo: f64, r_hi: f64) -> Result<Self> {
        let (n, m) = x.shape();
        if !(r_lo > 0.0 && r_lo <= r_hi && r_hi < 1.0) {
            return Err(Error::param(
                "r_lo",
                format!("need 0 < r_lo <= r_hi < 1, got [{r_lo}, {r_hi}]"),
            ));
        }
        if m == 0 {
            return Err(Error::Dimension(
                "sup-F needs at least one regressor".into(),
            ));
        }
        if n <= 2 * m {
            return Err(Error::DegenerateSplit {
                split: 0,
                min_obs: m,
            });
        }
        let gram = x.tr_mul(x);
        let full = Cholesky::new(gram.clone()).ok_or(Error::SingularDesign { rank: 0, cols: m })?;
        let (k_lo, k_hi) = (split_index(r_lo, n), split_index(r_hi, n));
        let mut splits = Vec::new();
        let mut prefix = DMatrix::zeros(m, m);
        let mut rows = 0;
        let mut last_err = None;
        for k in k_lo..=k_hi {
            if let Err(e) = check_split(k, n, m) {
                last_err = Some(e);
                continue;
            }
            // first segment holds rows 0..k-1 (0-based), i.e. t < k
            while rows < k - 1 {
                let xr = x.row(rows);
                prefix += xr.transpose() * xr;
                rows += 1;
            }
            let first = Cholesky::new(prefix.clone());
            let second = Cholesky::new(&gram - &prefix);
            match (first, second) {
                (Some(first), Some(second)) => splits.push(SplitFactor { k, first, second }),
                _ => {
                    last_err = Some(Error::DegenerateSplit {
                        split: k,
                        min_obs: m,
                    })
                }
            }
        }
        if splits.is_empty() {
            return Err(last_err.unwrap_or(Error::DegenerateSplit {
                split: k_lo,
                min_obs: m,
            }));
        }
        Ok(SupFWorkspace {
            x: x.clone(),
            full,
            splits,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Observation indices `k` (1-based) of the admissible splits.
    pub fn split_points(&self) -> Vec<usize> {
        self.splits.iter().map(|s| s.k).collect()
    }

    /// `F` at every admissible split, in increasing order of `k`.
    pub fn f_path(&self, y: &[f64]) -> Result<Vec<(usize, f64)>> {
        let (n, m) = self.x.shape();
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "response has {} rows, design {n}",
                y.len()
            )));
        }
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let tol = ZERO_SSR_REL * yy;
        let xy_full = self.x.tr_mul(&DVector::from_column_slice(y));
        let ssr_r = (yy - quad_inv(&self.full, &xy_full)).max(0.0);
        let df = (n - 2 * m) as f64;
        let mut prefix = DVector::zeros(m);
        let mut rows = 0;
        let mut out = Vec::with_capacity(self.splits.len());
        for s in &self.splits {
            while rows < s.k - 1 {
                prefix += self.x.row(rows).transpose() * y[rows];
                rows += 1;
            }
            let rest = &xy_full - &prefix;
            let ssr_u = (yy - quad_inv(&s.first, &prefix) - quad_inv(&s.second, &rest)).max(0.0);
            let f = if ssr_u <= tol {
                if ssr_r <= tol {
                    0.0
                } else {
                    return Err(Error::InfiniteF { split: s.k });
                }
            } else {
                ((ssr_r - ssr_u).max(0.0)) / (ssr_u / df)
            };
            out.push((s.k, f));
        }
        Ok(out)
    }

    /// Maximum of `F` over the splits; `aux` is the argmax fraction `k/n`,
    /// ties going to the smallest `k`.
    pub fn statistic(&self, y: &[f64]) -> Result<StatValue> {
        let n = self.x.nrows() as f64;
        let mut best: Option<(usize, f64)> = None;
        for (k, f) in self.f_path(y)? {
            if best.is_none_or(|(_, b)| f > b) {
                best = Some((k, f));
            }
        }
        let (k, f) = best.expect("workspace has at least one split");
        Ok(StatValue {
            value: f,
            aux: Some(k as f64 / n),
        })
    }
}

fn quad_inv(chol: &Cholesky<f64, Dyn>, v: &DVector<f64>) -> f64 {
    v.dot(&chol.solve(v))
}

/// sup-F statistic for a single coefficient shift over `[r_lo, r_hi]`.
pub fn sup_f(y: &[f64], x: &DMatrix<f64>, r_lo: f64, r_hi: f64) -> Result<StatValue> {
    SupFWorkspace::new(x, r_lo, r_hi)?.statistic(y)
}
