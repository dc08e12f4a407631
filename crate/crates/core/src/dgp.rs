//! Data generating processes.
//!
//! Three cointegrating-regression designs share the form `y_t = beta x_t + eps_t`
//! with a random-walk regressor `x_t = sum_{s<=t} eta_s`:
//!
//! * [`Process::IidGaussian`]: `(eps_t, eta_t)` i.i.d. N(0, I2).
//! * [`Process::ArchBivariate`]: ARCH-type shocks,
//!   `eps_t = zeta_t (1 + 0.3 eps_{t-1}^2 + 0.3 eta_{t-1}^2)^{1/2}`,
//!   `eta_t = xi_t (1 + 0.6 eta_{t-1}^2)^{1/2}`.
//! * [`Process::EndogenousSign`]: `eta_t = xi_t (1 + delta 1{eps_t <= 0})`.
//!
//! For these (and for [`Process::CointegrationRw`]) the regressor path can be
//! held fixed while the response is redrawn from its conditional law, see
//! [`simulate_conditional`]. The remaining processes feed the permutation
//! CUSUM, boundary and structural-break experiments.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rngkit::{sample_std_normal, sample_symmetric_stable, Stream};

fn one() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    9.0
}
fn default_shift_at() -> f64 {
    0.5
}
fn default_shift_ratio() -> f64 {
    2.0
}

/// Coefficients of the bivariate ARCH design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchCoefficients {
    /// Loading of `eps_{t-1}^2` in the variance of `eps_t`.
    pub eps_on_eps: f64,
    /// Loading of `eta_{t-1}^2` in the variance of `eps_t`.
    pub eps_on_eta: f64,
    /// Loading of `eta_{t-1}^2` in the variance of `eta_t`.
    pub eta_on_eta: f64,
}

impl Default for ArchCoefficients {
    fn default() -> Self {
        ArchCoefficients {
            eps_on_eps: 0.3,
            eps_on_eta: 0.3,
            eta_on_eta: 0.6,
        }
    }
}

impl ArchCoefficients {
    /// Unconditional variances `(E eps^2, E eta^2)`.
    pub fn unconditional_variances(&self) -> (f64, f64) {
        let eta = 1.0 / (1.0 - self.eta_on_eta);
        let eps = (1.0 + self.eps_on_eta * eta) / (1.0 - self.eps_on_eps);
        (eps, eta)
    }
}

/// Regressor design for the structural-break regression (scalar regressor).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BreakRegressor {
    /// i.i.d. N(0, 1).
    #[default]
    Iid,
    /// Independent normal with variance 1 before `floor(at n)` and `ratio` after.
    VarianceShift {
        #[serde(default = "default_shift_at")]
        at: f64,
        #[serde(default = "default_shift_ratio")]
        ratio: f64,
    },
    /// `n^{-1/2}` times a Gaussian random walk.
    ScaledRandomWalk,
}

/// Error design for the structural-break regression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BreakErrors {
    #[default]
    Homoskedastic,
    /// GARCH(1,1): `h_t = omega + alpha eps_{t-1}^2 + beta h_{t-1}`, started at
    /// the unconditional variance.
    Garch { omega: f64, alpha: f64, beta: f64 },
}

/// The process family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Process {
    IidGaussian {
        #[serde(default = "one")]
        beta: f64,
    },
    ArchBivariate {
        #[serde(default = "one")]
        beta: f64,
        #[serde(default)]
        arch: ArchCoefficients,
    },
    EndogenousSign {
        #[serde(default = "one")]
        beta: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// Random-walk regression with independent Gaussian shocks of variances
    /// `omega_eps` and `omega_eta`.
    CointegrationRw {
        #[serde(default = "one")]
        beta: f64,
        #[serde(default = "one")]
        omega_eps: f64,
        #[serde(default = "one")]
        omega_eta: f64,
    },
    /// i.i.d. symmetric stable observations; `y = eps`, no regressors.
    InfiniteVarianceIid { alpha: f64 },
    /// i.i.d. N(0, 1) observations; `y = eps`, no regressors.
    GaussianNoise,
    /// `y_t = theta1 + theta2 x_{n,t-1} + eps_t` with
    /// `x_{n,t} = (1 - c/n) x_{n,t-1} + n^{-1/2} eta_t`, `x_{n,0} = 0` and
    /// `eta_t = rho eps_t + (1 - rho^2)^{1/2} xi_t`.
    ///
    /// The design matrix has columns `(1, x_{n,t-1}, x_{n,t} - x_{n,t-1})`.
    PredictiveRegression {
        #[serde(default)]
        theta1: f64,
        #[serde(default)]
        theta2: f64,
        #[serde(default)]
        c: f64,
        #[serde(default)]
        rho: f64,
    },
    /// `y_t = (beta1 + theta 1{t >= floor(r_star n)}) x_t + eps_t`, scalar `x_t`.
    BreakRegression {
        #[serde(default = "one")]
        beta1: f64,
        #[serde(default)]
        theta: f64,
        #[serde(default)]
        r_star: Option<f64>,
        #[serde(default)]
        regressor: BreakRegressor,
        #[serde(default)]
        errors: BreakErrors,
    },
}

/// A process together with its sample size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub n: usize,
    pub process: Process,
}

/// One simulated data set. Latent shocks are retained for conditional designs.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleDraw {
    pub y: Vec<f64>,
    pub x: DMatrix<f64>,
    pub eps: Vec<f64>,
    /// Regressor innovations; empty where the process has none.
    pub eta: Vec<f64>,
}

impl SampleDraw {
    pub fn n(&self) -> usize {
        self.y.len()
    }
}

impl DgpSpec {
    pub fn new(n: usize, process: Process) -> Self {
        DgpSpec { n, process }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param(
                "n",
                format!("sample size must be at least 2, got {}", self.n),
            ));
        }
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be finite"))
            }
        };
        match &self.process {
            Process::IidGaussian { beta } => finite("beta", *beta)?,
            Process::ArchBivariate { beta, arch } => {
                finite("beta", *beta)?;
                let ArchCoefficients {
                    eps_on_eps,
                    eps_on_eta,
                    eta_on_eta,
                } = *arch;
                if !(eps_on_eps >= 0.0 && eps_on_eta >= 0.0 && eta_on_eta >= 0.0) {
                    return Err(Error::param("arch", "coefficients must be nonnegative"));
                }
                if eps_on_eps >= 1.0 || eta_on_eta >= 1.0 {
                    return Err(Error::param("arch", "own-lag coefficients must be below 1"));
                }
            }
            Process::EndogenousSign { beta, delta } => {
                finite("beta", *beta)?;
                if !(*delta >= 0.0 && delta.is_finite()) {
                    return Err(Error::param("delta", format!("must be >= 0, got {delta}")));
                }
            }
            Process::CointegrationRw {
                beta,
                omega_eps,
                omega_eta,
            } => {
                finite("beta", *beta)?;
                if !(*omega_eps > 0.0 && *omega_eta > 0.0) {
                    return Err(Error::param("omega", "variances must be positive"));
                }
            }
            Process::GaussianNoise => {}
            Process::InfiniteVarianceIid { alpha } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(Error::param(
                        "alpha",
                        format!("must lie in (0, 2), got {alpha}"),
                    ));
                }
            }
            Process::PredictiveRegression {
                theta1,
                theta2,
                c,
                rho,
            } => {
                finite("theta1", *theta1)?;
                finite("theta2", *theta2)?;
                if !(*c >= 0.0 && c.is_finite()) {
                    return Err(Error::param("c", format!("must be >= 0, got {c}")));
                }
                if !(rho.abs() < 1.0) {
                    return Err(Error::param(
                        "rho",
                        format!("must lie in (-1, 1), got {rho}"),
                    ));
                }
            }
            Process::BreakRegression {
                beta1,
                theta,
                r_star,
                regressor,
                errors,
            } => {
                finite("beta1", *beta1)?;
                finite("theta", *theta)?;
                if let Some(r) = r_star {
                    if !(*r > 0.0 && *r < 1.0) {
                        return Err(Error::param(
                            "r_star",
                            format!("must lie in (0, 1), got {r}"),
                        ));
                    }
                }
                if let BreakRegressor::VarianceShift { at, ratio } = regressor {
                    if !(*at > 0.0 && *at < 1.0 && *ratio > 0.0) {
                        return Err(Error::param("regressor", "need 0 < at < 1 and ratio > 0"));
                    }
                }
                if let BreakErrors::Garch { omega, alpha, beta } = errors {
                    if !(*omega > 0.0 && *alpha >= 0.0 && *beta >= 0.0 && alpha + beta < 1.0) {
                        return Err(Error::param(
                            "errors",
                            "GARCH needs omega > 0, alpha, beta >= 0 and alpha + beta < 1",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether the regressor path can be held fixed while redrawing `y`.
    pub fn supports_conditional(&self) -> bool {
        matches!(
            self.process,
            Process::IidGaussian { .. }
                | Process::ArchBivariate { .. }
                | Process::EndogenousSign { .. }
                | Process::CointegrationRw { .. }
        )
    }

    /// Overrides the slope of a cointegrating design (used for local alternatives).
    pub fn with_slope(&self, slope: f64) -> Result<DgpSpec> {
        let mut out = self.clone();
        match &mut out.process {
            Process::IidGaussian { beta }
            | Process::ArchBivariate { beta, .. }
            | Process::EndogenousSign { beta, .. }
            | Process::CointegrationRw { beta, .. } => *beta = slope,
            _ => {
                return Err(Error::Unsupported(
                    "local alternatives need a cointegrating slope design".into(),
                ))
            }
        }
        Ok(out)
    }

    /// Slope of a cointegrating design, `None` for the other processes.
    pub fn slope(&self) -> Option<f64> {
        match self.process {
            Process::IidGaussian { beta }
            | Process::ArchBivariate { beta, .. }
            | Process::EndogenousSign { beta, .. }
            | Process::CointegrationRw { beta, .. } => Some(beta),
            _ => None,
        }
    }
}

fn cumsum(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, e| {
            *acc += e;
            Some(*acc)
        })
        .collect()
}

fn slope_sample(beta: f64, eps: Vec<f64>, eta: Vec<f64>) -> SampleDraw {
    let x = cumsum(&eta);
    let y = x.iter().zip(&eps).map(|(xt, e)| beta * xt + e).collect();
    SampleDraw {
        y,
        x: DMatrix::from_column_slice(x.len(), 1, &x),
        eps,
        eta,
    }
}

/// Simulates one data set from `spec`.
pub fn simulate(spec: &DgpSpec, stream: &mut Stream) -> Result<SampleDraw> {
    spec.validate()?;
    let n = spec.n;
    match spec.process {
        Process::IidGaussian { beta } => {
            let eps = sample_std_normal(stream, n);
            let eta = sample_std_normal(stream, n);
            Ok(slope_sample(beta, eps, eta))
        }
        Process::CointegrationRw {
            beta,
            omega_eps,
            omega_eta,
        } => {
            let se = omega_eps.sqrt();
            let sh = omega_eta.sqrt();
            let eps = sample_std_normal(stream, n)
                .into_iter()
                .map(|e| se * e)
                .collect();
            let eta = sample_std_normal(stream, n)
                .into_iter()
                .map(|e| sh * e)
                .collect();
            Ok(slope_sample(beta, eps, eta))
        }
        Process::ArchBivariate { beta, arch } => {
            let zeta = sample_std_normal(stream, n);
            let xi = sample_std_normal(stream, n);
            let eta = arch_eta(&arch, &xi);
            let eps = arch_eps(&arch, &zeta, &eta);
            Ok(slope_sample(beta, eps, eta))
        }
        Process::EndogenousSign { beta, delta } => {
            let eps = sample_std_normal(stream, n);
            let xi = sample_std_normal(stream, n);
            let eta = eps
                .iter()
                .zip(&xi)
                .map(|(e, x)| if *e <= 0.0 { x * (1.0 + delta) } else { *x })
                .collect();
            Ok(slope_sample(beta, eps, eta))
        }
        Process::GaussianNoise => {
            let eps = sample_std_normal(stream, n);
            Ok(SampleDraw {
                y: eps.clone(),
                x: DMatrix::zeros(n, 0),
                eps,
                eta: Vec::new(),
            })
        }
        Process::InfiniteVarianceIid { alpha } => {
            let eps = sample_symmetric_stable(stream, alpha, n)?;
            Ok(SampleDraw {
                y: eps.clone(),
                x: DMatrix::zeros(n, 0),
                eps,
                eta: Vec::new(),
            })
        }
        Process::PredictiveRegression {
            theta1,
            theta2,
            c,
            rho,
        } => {
            let eps = sample_std_normal(stream, n);
            let xi = sample_std_normal(stream, n);
            let scale = (n as f64).sqrt().recip();
            let ar = 1.0 - c / n as f64;
            let orth = (1.0 - rho * rho).sqrt();
            let mut x = DMatrix::zeros(n, 3);
            let mut eta = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            let mut prev = 0.0;
            for t in 0..n {
                let innov = rho * eps[t] + orth * xi[t];
                let cur = ar * prev + scale * innov;
                x[(t, 0)] = 1.0;
                x[(t, 1)] = prev;
                x[(t, 2)] = cur - prev;
                y.push(theta1 + theta2 * prev + eps[t]);
                eta.push(innov);
                prev = cur;
            }
            Ok(SampleDraw { y, x, eps, eta })
        }
        Process::BreakRegression {
            beta1,
            theta,
            r_star,
            regressor,
            errors,
        } => {
            let z = sample_std_normal(stream, n);
            let u = sample_std_normal(stream, n);
            let xs: Vec<f64> = match regressor {
                BreakRegressor::Iid => z.clone(),
                BreakRegressor::VarianceShift { at, ratio } => {
                    let k = split_index(at, n);
                    let sd = ratio.sqrt();
                    z.iter()
                        .enumerate()
                        .map(|(i, v)| if i + 1 >= k { sd * v } else { *v })
                        .collect()
                }
                BreakRegressor::ScaledRandomWalk => {
                    let s = (n as f64).sqrt().recip();
                    cumsum(&z).into_iter().map(|v| s * v).collect()
                }
            };
            let eps = match errors {
                BreakErrors::Homoskedastic => u,
                BreakErrors::Garch { omega, alpha, beta } => garch(&u, omega, alpha, beta),
            };
            let k = match r_star {
                Some(r) if theta != 0.0 => split_index(r, n),
                _ => usize::MAX,
            };
            let y = xs
                .iter()
                .zip(&eps)
                .enumerate()
                .map(|(i, (xt, e))| {
                    let b = if i + 1 >= k { beta1 + theta } else { beta1 };
                    b * xt + e
                })
                .collect();
            let eta = if matches!(regressor, BreakRegressor::ScaledRandomWalk) {
                z
            } else {
                Vec::new()
            };
            Ok(SampleDraw {
                y,
                x: DMatrix::from_column_slice(n, 1, &xs),
                eps,
                eta,
            })
        }
    }
}

/// `floor(r n)` guarded against representation error (`0.29 * 100` is
/// `28.999...` in binary floating point).
pub fn split_index(r: f64, n: usize) -> usize {
    (r * n as f64 + 1e-9).floor() as usize
}

fn arch_eta(arch: &ArchCoefficients, xi: &[f64]) -> Vec<f64> {
    let (_, h_eta) = arch.unconditional_variances();
    let mut out = Vec::with_capacity(xi.len());
    let mut h = h_eta;
    for &x in xi {
        let e = x * h.sqrt();
        out.push(e);
        h = 1.0 + arch.eta_on_eta * e * e;
    }
    out
}

fn arch_eps(arch: &ArchCoefficients, zeta: &[f64], eta: &[f64]) -> Vec<f64> {
    let (h_eps, _) = arch.unconditional_variances();
    let mut out = Vec::with_capacity(zeta.len());
    let mut h = h_eps;
    for (z, et) in zeta.iter().zip(eta) {
        let e = z * h.sqrt();
        out.push(e);
        h = 1.0 + arch.eps_on_eps * e * e + arch.eps_on_eta * et * et;
    }
    out
}

fn garch(u: &[f64], omega: f64, alpha: f64, beta: f64) -> Vec<f64> {
    let mut h = omega / (1.0 - alpha - beta);
    let mut out = Vec::with_capacity(u.len());
    for z in u {
        let e = z * h.sqrt();
        out.push(e);
        h = omega + alpha * e * e + beta * h;
    }
    out
}

/// Probability that `eps_t <= 0` given `eta_t` in the endogenous-sign design.
pub fn negative_sign_probability(eta: f64, delta: f64) -> f64 {
    let d = delta;
    let expo = -(eta * eta / 2.0) * d * (2.0 + d) / ((1.0 + d) * (1.0 + d));
    1.0 / (1.0 + (1.0 + d) * expo.exp())
}

/// Draws `y` for the endogenous-sign design conditionally on a fixed regressor
/// path: `eps_t | eta_t = |xi_t| s_t` with `s_t = -1` w.p.
/// [`negative_sign_probability`].
pub fn simulate_conditional_iii(
    regressor: &SampleDraw,
    delta: f64,
    beta: f64,
    stream: &mut Stream,
) -> Result<Vec<f64>> {
    let eps = conditional_sign_errors(&regressor.eta, delta, stream)?;
    Ok(regressor_times(regressor, beta, &eps))
}

fn conditional_sign_errors(eta: &[f64], delta: f64, stream: &mut Stream) -> Result<Vec<f64>> {
    if eta.is_empty() {
        return Err(Error::param(
            "eta",
            "regressor innovations were not retained",
        ));
    }
    if !(delta >= 0.0) {
        return Err(Error::param("delta", format!("must be >= 0, got {delta}")));
    }
    let xi = sample_std_normal(stream, eta.len());
    Ok(eta
        .iter()
        .zip(&xi)
        .map(|(e, x)| {
            let u: f64 = stream.random();
            if u < negative_sign_probability(*e, delta) {
                -x.abs()
            } else {
                x.abs()
            }
        })
        .collect())
}

fn regressor_times(regressor: &SampleDraw, beta: f64, eps: &[f64]) -> Vec<f64> {
    regressor
        .x
        .column(0)
        .iter()
        .zip(eps)
        .map(|(x, e)| beta * x + e)
        .collect()
}

/// Redraws the response conditionally on the regressor path of `regressor`
/// (which must come from [`simulate`] with the same `spec`).
pub fn simulate_conditional(
    spec: &DgpSpec,
    regressor: &SampleDraw,
    stream: &mut Stream,
) -> Result<SampleDraw> {
    spec.validate()?;
    let n = spec.n;
    if regressor.n() != n || regressor.eta.len() != n {
        return Err(Error::Dimension(format!(
            "regressor path has {} rows and {} innovations, expected {n}",
            regressor.n(),
            regressor.eta.len()
        )));
    }
    let beta = spec.slope().ok_or_else(|| {
        Error::Unsupported(format!("no conditional sampler for {:?}", spec.process))
    })?;
    let eps = match spec.process {
        Process::IidGaussian { .. } => sample_std_normal(stream, n),
        Process::CointegrationRw { omega_eps, .. } => {
            let s = omega_eps.sqrt();
            sample_std_normal(stream, n)
                .into_iter()
                .map(|e| s * e)
                .collect()
        }
        // eta does not load on eps, so fixing eta leaves zeta free
        Process::ArchBivariate { arch, .. } => {
            let zeta = sample_std_normal(stream, n);
            arch_eps(&arch, &zeta, &regressor.eta)
        }
        Process::EndogenousSign { delta, .. } => {
            conditional_sign_errors(&regressor.eta, delta, stream)?
        }
        _ => unreachable!("slope() is None for the other processes"),
    };
    let y = regressor_times(regressor, beta, &eps);
    Ok(SampleDraw {
        y,
        x: regressor.x.clone(),
        eps,
        eta: regressor.eta.clone(),
    })
}
