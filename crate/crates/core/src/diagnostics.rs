//! Uniformity and validity diagnostics for collections of p-values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::ConditionalEcdfPanel;
use crate::normal;
use crate::rngkit::{fill_std_normal, Stream};

/// Default pointwise band quantiles of a fan chart.
pub const DEFAULT_BAND: (f64, f64) = (0.05, 0.95);
/// Default discretization of the Brownian functional.
pub const DEFAULT_ORACLE_STEPS: usize = 1000;

/// Rejection frequency at one nominal level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRate {
    pub level: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub ks_to_uniform: f64,
    pub rejection_rates: Vec<LevelRate>,
    pub n_pvalues: usize,
}

/// Fan chart of a panel of conditional cdfs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanChartSummary {
    pub grid: Vec<f64>,
    pub average_cdf: Vec<f64>,
    pub lower_band: Vec<f64>,
    pub upper_band: Vec<f64>,
    /// Quantile levels of the bands.
    pub band: (f64, f64),
    /// `max (upper - lower)` over the grid.
    pub max_dispersion: f64,
}

/// `count{v <= g} / len` at every grid point `g`.
///
/// ```
/// use randboot::diagnostics::ecdf;
///
/// let f = ecdf(&[0.2, 0.2, 0.7, 0.9], &[0.0, 0.5, 1.0]).unwrap();
/// assert_eq!(f, vec![0.0, 0.5, 1.0]);
/// ```
pub fn ecdf(values: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::param(
            "values",
            format!("p-values must lie in [0, 1], got {v}"),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|g| sorted.partition_point(|v| v <= g) as f64 / k)
        .collect())
}

/// `sup_x |F_k(x) - x|`, evaluated at the order statistics.
pub fn ks_to_uniform(pvals: &[f64]) -> Result<f64> {
    if pvals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = pvals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, p)| ((i + 1) as f64 / k - p).max(p - i as f64 / k))
        .fold(0.0, f64::max))
}

/// Fraction of p-values at or below `q`.
pub fn rejection_rate(pvals: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param(
            "q",
            format!("level must lie in (0, 1), got {q}"),
        ));
    }
    if pvals.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(pvals.iter().filter(|p| **p <= q).count() as f64 / pvals.len() as f64)
}

pub fn uniformity_report(pvals: &[f64], levels: &[f64]) -> Result<UniformityReport> {
    Ok(UniformityReport {
        ks_to_uniform: ks_to_uniform(pvals)?,
        rejection_rates: levels
            .iter()
            .map(|&level| {
                Ok(LevelRate {
                    level,
                    rate: rejection_rate(pvals, level)?,
                })
            })
            .collect::<Result<_>>()?,
        n_pvalues: pvals.len(),
    })
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a - F_b|`.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic KS critical value `c(level) sqrt(1/k_a + 1/k_b)` with
/// `c(level) = sqrt(-ln(level / 2) / 2)`; pass `k_b = usize::MAX` for the
/// one-sample case.
pub fn ks_critical_value(level: f64, k_a: usize, k_b: usize) -> f64 {
    let c = (-(level / 2.0).ln() / 2.0).sqrt();
    let inv_b = if k_b == usize::MAX {
        0.0
    } else {
        1.0 / k_b as f64
    };
    c * (1.0 / k_a as f64 + inv_b).sqrt()
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise average and quantile bands across the rows of a panel.
///
/// Bands are widened where needed so that they always bracket the average.
pub fn fanchart(panel: &ConditionalEcdfPanel, band: (f64, f64)) -> Result<FanChartSummary> {
    let (lo, hi) = band;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::param(
            "band",
            format!("need 0 <= lo <= hi <= 1, got ({lo}, {hi})"),
        ));
    }
    if panel.rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    panel.validate()?;
    let g = panel.grid.len();
    let m = panel.rows.len() as f64;
    let mut average_cdf = Vec::with_capacity(g);
    let mut lower_band = Vec::with_capacity(g);
    let mut upper_band = Vec::with_capacity(g);
    let mut column = Vec::with_capacity(panel.rows.len());
    for j in 0..g {
        column.clear();
        column.extend(panel.rows.iter().map(|r| r[j]));
        let avg = column.iter().sum::<f64>() / m;
        column.sort_by(f64::total_cmp);
        average_cdf.push(avg);
        lower_band.push(quantile_sorted(&column, lo).min(avg));
        upper_band.push(quantile_sorted(&column, hi).max(avg));
    }
    let max_dispersion = lower_band
        .iter()
        .zip(&upper_band)
        .map(|(l, u)| u - l)
        .fold(0.0, f64::max);
    Ok(FanChartSummary {
        grid: panel.grid.clone(),
        average_cdf,
        lower_band,
        upper_band,
        band,
        max_dispersion,
    })
}

/// `paths` draws of `steps^{-2} sum_t (sum_{s<=t} z_s)^2`, a discretization of
/// the integral of a squared standard Brownian motion over [0, 1].
pub fn brownian_square_integrals(
    paths: usize,
    steps: usize,
    stream: &mut Stream,
) -> Result<Vec<f64>> {
    if paths == 0 || steps == 0 {
        return Err(Error::param("paths", "paths and steps must be at least 1"));
    }
    let mut z = vec![0.0; steps];
    let norm = (steps as f64).powi(2).recip();
    Ok((0..paths)
        .map(|_| {
            fill_std_normal(stream, &mut z);
            let mut s = 0.0;
            let mut acc = 0.0;
            for v in &z {
                s += v;
                acc += s * s;
            }
            acc * norm
        })
        .collect())
}

/// `mean Phi(Phi^{-1}(q) - M^{1/2} b)` over draws of `M`.
pub fn local_power_from_draws(b: f64, q: f64, m_draws: &[f64]) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param(
            "q",
            format!("level must lie in (0, 1), got {q}"),
        ));
    }
    if m_draws.is_empty() {
        return Err(Error::EmptyInput);
    }
    let z = normal::quantile(q);
    Ok(m_draws
        .iter()
        .map(|m| normal::cdf(z - m.sqrt() * b))
        .sum::<f64>()
        / m_draws.len() as f64)
}

/// Asymptotic local power of the left-tailed slope test against `beta = b/n`
/// with a random-walk regressor and unit error variance.
pub fn local_power_oracle(
    b: f64,
    q: f64,
    paths: usize,
    steps: usize,
    stream: &mut Stream,
) -> Result<f64> {
    let m = brownian_square_integrals(paths, steps, stream)?;
    local_power_from_draws(b, q, &m)
}
