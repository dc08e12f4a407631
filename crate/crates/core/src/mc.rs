//! Monte Carlo harness: unconditional replications and the double
//! (conditional) design.
//!
//! Seed plan: the sample of outer replication `m` is drawn from path
//! `[m, 0]`. Unconditional runs bootstrap it from `[m, 1, b]`. Double runs
//! keep its regressors and redraw the response on `[m, v]` for
//! `v = 1..=N`, bootstrapping from `[m, v, b]`. Outer replications run in
//! parallel; results are collected in index order, so output never depends
//! on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    boundary_wild, fixed_design_gaussian, parametric_ks, permutation_cusum, pvalue, supf_wild,
    BootstrapDistribution, SchemeSpec, Tail,
};
use crate::dgp::{simulate, simulate_conditional, DgpSpec, SampleDraw};
use crate::diagnostics::ecdf;
use crate::error::{Error, Result};
use crate::estimators::{break_design, constrained_ols, ols, AffineConstraint};
use crate::rngkit::StreamPath;
use crate::statistics::{boundary_stat, cusum_stat, ks_stat, slope_stat, StatValue, SupFWorkspace};

/// Default number of points of the p-value grid.
pub const DEFAULT_GRID_SIZE: usize = 101;

fn two() -> f64 {
    2.0
}

fn default_constraint() -> AffineConstraint {
    AffineConstraint::nonnegative(1, 2)
}

/// Test statistic computed on each sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StatisticSpec {
    /// `n^{alpha_exp/2} (beta_hat - beta0)`; `beta0` defaults to the slope of
    /// the data-generating process.
    Slope {
        #[serde(default)]
        beta0: Option<f64>,
        #[serde(default = "two")]
        alpha_exp: f64,
    },
    /// CUSUM of the response, or of OLS residuals when `residual` is set.
    Cusum {
        #[serde(default)]
        residual: bool,
    },
    /// KS distance of the OLS residuals from the null law.
    Ks,
    /// `n^{1/2} g(theta_hat)` at the constrained estimate.
    Boundary {
        #[serde(default = "default_constraint")]
        constraint: AffineConstraint,
    },
    SupF,
}

/// A complete test design: data, statistic, bootstrap and tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub dgp: DgpSpec,
    pub scheme: SchemeSpec,
    pub statistic: StatisticSpec,
    #[serde(default)]
    pub tail: Tail,
    /// Local alternative: the slope is set to `b / n`.
    #[serde(default)]
    pub local_alt_b: Option<f64>,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        self.scheme.validate()?;
        let ok = matches!(
            (&self.scheme, &self.statistic),
            (
                SchemeSpec::FixedDesignGaussian { .. },
                StatisticSpec::Slope { .. }
            ) | (
                SchemeSpec::PermutationCusum { .. },
                StatisticSpec::Cusum { .. }
            ) | (SchemeSpec::ParametricKs { .. }, StatisticSpec::Ks)
                | (
                    SchemeSpec::BoundaryWild { .. },
                    StatisticSpec::Boundary { .. }
                )
                | (SchemeSpec::SupFWild { .. }, StatisticSpec::SupF)
        );
        if !ok {
            return Err(Error::Unsupported(format!(
                "scheme {} cannot bootstrap statistic {}",
                tag(&self.scheme),
                tag(&self.statistic)
            )));
        }
        if let StatisticSpec::Slope { alpha_exp, .. } = self.statistic {
            if !(alpha_exp.is_finite() && alpha_exp > 0.0) {
                return Err(Error::param(
                    "alpha_exp",
                    format!("must be positive, got {alpha_exp}"),
                ));
            }
            if self.dgp.slope().is_none() {
                return Err(Error::Unsupported(
                    "slope statistic needs a cointegrating slope design".into(),
                ));
            }
        }
        if let StatisticSpec::Boundary { constraint } = &self.statistic {
            constraint.validate()?;
        }
        if let Some(b) = self.local_alt_b {
            if !b.is_finite() {
                return Err(Error::param("local_alt_b", "must be finite"));
            }
            self.dgp.with_slope(0.0)?;
        }
        Ok(())
    }

    /// The data-generating process after applying the local alternative.
    pub fn effective_dgp(&self) -> Result<DgpSpec> {
        match self.local_alt_b {
            Some(b) => self.dgp.with_slope(b / self.dgp.n as f64),
            None => Ok(self.dgp.clone()),
        }
    }

    /// Statistic and bootstrap distribution for one sample.
    pub fn evaluate(
        &self,
        sample: &SampleDraw,
        base: &StreamPath,
    ) -> Result<(StatValue, BootstrapDistribution)> {
        let n = sample.n();
        match (&self.statistic, &self.scheme) {
            (
                StatisticSpec::Slope { beta0, alpha_exp },
                SchemeSpec::FixedDesignGaussian {
                    analytic,
                    b,
                    known_omega,
                },
            ) => {
                let beta0 = match beta0 {
                    Some(v) => *v,
                    None => self
                        .dgp
                        .slope()
                        .ok_or_else(|| Error::Unsupported("no slope".into()))?,
                };
                let fit = ols(&sample.y, &sample.x)?;
                let tau = slope_stat(&fit, beta0, *alpha_exp, n)?;
                let dist = fixed_design_gaussian(
                    sample,
                    &fit,
                    *alpha_exp,
                    *analytic,
                    *b,
                    *known_omega,
                    base,
                )?;
                Ok((tau, dist))
            }
            (
                StatisticSpec::Cusum { residual },
                SchemeSpec::PermutationCusum { replicates, nu },
            ) => {
                let e = if *residual {
                    ols(&sample.y, &sample.x)?.residuals
                } else {
                    sample.y.clone()
                };
                let tau = cusum_stat(&e, *nu)?;
                Ok((tau, permutation_cusum(&e, *replicates, *nu, base)?))
            }
            (StatisticSpec::Ks, SchemeSpec::ParametricKs { b, null_law }) => {
                let fit = ols(&sample.y, &sample.x)?;
                let tau = ks_stat(&fit.residuals, |u| null_law.cdf(u))?;
                Ok((tau, parametric_ks(&sample.x, *null_law, *b, base)?))
            }
            (StatisticSpec::Boundary { constraint }, SchemeSpec::BoundaryWild { b, gstar }) => {
                let full = constraint.padded(sample.x.ncols())?;
                let fit = constrained_ols(&sample.y, &sample.x, &full)?;
                let tau = boundary_stat(&fit.fit.coef[..constraint.a.len()], constraint, n);
                Ok((
                    tau,
                    boundary_wild(&sample.x, &fit, constraint, *gstar, *b, base)?,
                ))
            }
            (StatisticSpec::SupF, SchemeSpec::SupFWild { b, r_lo, r_hi }) => {
                let ws = SupFWorkspace::new(&sample.x, *r_lo, *r_hi)?;
                let tau = ws.statistic(&sample.y)?;
                let k = (tau.aux.expect("sup-F reports its argmax") * n as f64).round() as usize;
                let resid = ols(&sample.y, &break_design(&sample.x, k))?.residuals;
                Ok((tau, supf_wild(&ws, &resid, *b, base)?))
            }
            _ => Err(Error::Unsupported(format!(
                "scheme {} cannot bootstrap statistic {}",
                tag(&self.scheme),
                tag(&self.statistic)
            ))),
        }
    }

    /// Bootstrap p-value for one sample.
    pub fn pvalue(&self, sample: &SampleDraw, base: &StreamPath) -> Result<f64> {
        let (tau, dist) = self.evaluate(sample, base)?;
        Ok(pvalue(&dist, tau.value, self.tail))
    }
}

fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.get("kind").and_then(|k| k.as_str()).map(str::to_owned))
        .unwrap_or_else(|| "?".into())
}

/// Conditional p-value cdfs, one row per outer regressor draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEcdfPanel {
    pub grid: Vec<f64>,
    /// `M` rows of cdf values on `grid`.
    pub rows: Vec<Vec<f64>>,
    /// Inner draws `N` behind each row.
    pub inner: usize,
}

impl ConditionalEcdfPanel {
    /// Each row must be a nondecreasing sequence in [0, 1] of the grid's length.
    pub fn validate(&self) -> Result<()> {
        for (m, row) in self.rows.iter().enumerate() {
            if row.len() != self.grid.len() {
                return Err(Error::Dimension(format!(
                    "row {m} has {} values, grid {}",
                    row.len(),
                    self.grid.len()
                )));
            }
            let valid =
                row.iter().all(|v| (0.0..=1.0).contains(v)) && row.windows(2).all(|w| w[0] <= w[1]);
            if !valid {
                return Err(Error::param("panel", format!("row {m} is not a cdf")));
            }
        }
        Ok(())
    }
}

/// `size` equispaced points from 0 to 1.
pub fn uniform_grid(size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(Error::param(
            "grid_size",
            format!("need at least 2 points, got {size}"),
        ));
    }
    Ok((0..size).map(|i| i as f64 / (size - 1) as f64).collect())
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Unsupported(format!("cannot start worker pool: {e}")))
}

fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// `reps` independent samples, each with its bootstrap p-value.
///
/// `threads = 0` uses all available cores.
pub fn run_unconditional(
    exp: &Experiment,
    reps: usize,
    master_seed: u64,
    threads: usize,
) -> Result<Vec<f64>> {
    exp.validate()?;
    if reps == 0 {
        return Err(Error::param(
            "replications",
            "need at least one replication",
        ));
    }
    let dgp = exp.effective_dgp()?;
    let results = pool(threads)?.install(|| {
        (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let root = StreamPath::new(master_seed, &[r]);
                simulate(&dgp, &mut root.child(0).stream())
                    .and_then(|s| exp.pvalue(&s, &root.child(1)))
                    .map_err(|e| e.at(vec![r]))
            })
            .collect::<Vec<_>>()
    });
    first_error(results)
}

/// Conditional p-values: `outer` regressor draws times `inner` response draws.
pub fn run_double_pvalues(
    exp: &Experiment,
    outer: usize,
    inner: usize,
    master_seed: u64,
    threads: usize,
) -> Result<Vec<Vec<f64>>> {
    exp.validate()?;
    if outer == 0 || inner == 0 {
        return Err(Error::param(
            "outer",
            "outer and inner counts must be at least 1",
        ));
    }
    let dgp = exp.effective_dgp()?;
    if !dgp.supports_conditional() {
        return Err(Error::Unsupported(format!(
            "no conditional sampler for process {}",
            tag(&dgp.process)
        )));
    }
    let results = pool(threads)?.install(|| {
        (0..outer as u64)
            .into_par_iter()
            .map(|m| {
                let root = StreamPath::new(master_seed, &[m]);
                let regressor =
                    simulate(&dgp, &mut root.child(0).stream()).map_err(|e| e.at(vec![m]))?;
                (1..=inner as u64)
                    .map(|v| {
                        let path = root.child(v);
                        simulate_conditional(&dgp, &regressor, &mut path.stream())
                            .and_then(|s| exp.pvalue(&s, &path))
                            .map_err(|e| e.at(vec![m, v]))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Vec<_>>()
    });
    first_error(results)
}

/// Double Monte Carlo design summarized as a panel of conditional ecdfs.
pub fn run_double(
    exp: &Experiment,
    outer: usize,
    inner: usize,
    grid: &[f64],
    master_seed: u64,
    threads: usize,
) -> Result<ConditionalEcdfPanel> {
    let pvals = run_double_pvalues(exp, outer, inner, master_seed, threads)?;
    panel_from_pvalues(&pvals, grid)
}

pub fn panel_from_pvalues(pvals: &[Vec<f64>], grid: &[f64]) -> Result<ConditionalEcdfPanel> {
    let rows = pvals
        .iter()
        .map(|p| ecdf(p, grid))
        .collect::<Result<Vec<_>>>()?;
    let panel = ConditionalEcdfPanel {
        grid: grid.to_vec(),
        inner: pvals.first().map_or(0, Vec::len),
        rows,
    };
    panel.validate()?;
    Ok(panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::{GStar, Replicates};
    use crate::dgp::Process;
    use crate::diagnostics::{ks_critical_value, ks_to_uniform, two_sample_ks};
    use crate::statistics::Nu;

    fn exact_slope(n: usize) -> Experiment {
        Experiment {
            dgp: DgpSpec::new(n, Process::IidGaussian { beta: 1.0 }),
            scheme: SchemeSpec::FixedDesignGaussian {
                analytic: true,
                b: 0,
                known_omega: Some(1.0),
            },
            statistic: StatisticSpec::Slope {
                beta0: None,
                alpha_exp: 2.0,
            },
            tail: Tail::Left,
            local_alt_b: None,
        }
    }

    #[test]
    fn single_replication() {
        let p = run_unconditional(&exact_slope(10), 1, 1, 1).unwrap();
        assert_eq!(p.len(), 1);
        assert!((0.0..=1.0).contains(&p[0]));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut exp = exact_slope(20);
        exp.scheme = SchemeSpec::FixedDesignGaussian {
            analytic: false,
            b: 99,
            known_omega: None,
        };
        let a = run_unconditional(&exp, 40, 9, 1).unwrap();
        let b = run_unconditional(&exp, 40, 9, 8).unwrap();
        assert_eq!(a, b);
        let a = run_double(&exp, 5, 7, &uniform_grid(11).unwrap(), 9, 1).unwrap();
        let b = run_double(&exp, 5, 7, &uniform_grid(11).unwrap(), 9, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_case_is_uniform() {
        let r = 20_000;
        let p = run_unconditional(&exact_slope(10), r, 2024, 0).unwrap();
        let d = ks_to_uniform(&p).unwrap();
        assert!(d < 1.63 / (r as f64).sqrt(), "{d}");
    }

    #[test]
    fn double_design_shapes_and_errors() {
        let grid = uniform_grid(DEFAULT_GRID_SIZE).unwrap();
        let panel = run_double(&exact_slope(10), 1, 1, &grid, 3, 1).unwrap();
        assert_eq!(panel.rows.len(), 1);
        let row = &panel.rows[0];
        assert!(row.iter().all(|v| *v == 0.0 || *v == 1.0));
        let mut exp = exact_slope(10);
        exp.dgp = DgpSpec::new(10, Process::InfiniteVarianceIid { alpha: 1.5 });
        exp.statistic = StatisticSpec::Cusum { residual: false };
        exp.scheme = SchemeSpec::PermutationCusum {
            replicates: Replicates::Auto,
            nu: Nu::One,
        };
        assert!(matches!(
            run_double(&exp, 2, 2, &grid, 1, 1),
            Err(Error::Unsupported(_))
        ));
        assert!(uniform_grid(1).is_err());
    }

    #[test]
    fn exact_rows_deviate_like_ks_statistics() {
        let n_inner = 400;
        let grid = uniform_grid(DEFAULT_GRID_SIZE).unwrap();
        let pv = run_double_pvalues(&exact_slope(10), 21, n_inner, 5, 0).unwrap();
        let mut devs: Vec<f64> = pv.iter().map(|p| ks_to_uniform(p).unwrap()).collect();
        devs.sort_by(f64::total_cmp);
        assert!(devs[10] < 1.0 / (n_inner as f64).sqrt(), "{}", devs[10]);
        let panel = panel_from_pvalues(&pv, &grid).unwrap();
        panel.validate().unwrap();
    }

    #[test]
    fn pooled_double_matches_unconditional() {
        let exp = Experiment {
            dgp: DgpSpec::new(
                20,
                Process::EndogenousSign {
                    beta: 1.0,
                    delta: 9.0,
                },
            ),
            scheme: SchemeSpec::FixedDesignGaussian {
                analytic: true,
                b: 0,
                known_omega: None,
            },
            statistic: StatisticSpec::Slope {
                beta0: None,
                alpha_exp: 2.0,
            },
            tail: Tail::Left,
            local_alt_b: None,
        };
        let pooled: Vec<f64> = run_double_pvalues(&exp, 200, 20, 1, 0).unwrap().concat();
        let uncond = run_unconditional(&exp, 4000, 2, 0).unwrap();
        let d = two_sample_ks(&pooled, &uncond).unwrap();
        assert!(
            d < ks_critical_value(0.01, pooled.len(), uncond.len()),
            "{d}"
        );
    }

    #[test]
    fn incompatible_pairs_are_rejected() {
        let mut exp = exact_slope(10);
        exp.statistic = StatisticSpec::SupF;
        assert!(exp.validate().is_err());
        let mut exp = exact_slope(10);
        exp.scheme = SchemeSpec::BoundaryWild {
            b: 99,
            gstar: GStar::Standard,
        };
        assert!(exp.validate().is_err());
    }

    #[test]
    fn errors_carry_coordinates() {
        let exp = Experiment {
            dgp: DgpSpec::new(10, Process::IidGaussian { beta: 1.0 }),
            scheme: SchemeSpec::SupFWild {
                b: 99,
                r_lo: 0.45,
                r_hi: 0.45,
            },
            statistic: StatisticSpec::SupF,
            tail: Tail::Right,
            local_alt_b: None,
        };
        // n = 10, m = 1: the split at t = 4 is admissible, so this runs
        assert!(run_unconditional(&exp, 2, 1, 1).is_ok());
        let mut bad = exp.clone();
        bad.scheme = SchemeSpec::SupFWild {
            b: 99,
            r_lo: 0.05,
            r_hi: 0.1,
        };
        match run_unconditional(&bad, 3, 1, 1) {
            Err(Error::Replication { coords, .. }) => assert_eq!(coords, vec![0]),
            other => panic!("{other:?}"),
        }
    }
}
