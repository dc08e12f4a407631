//! Fast invariant suite behind `randboot selftest`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::bootstrap::{
    fixed_design_gaussian, permutation_cusum, pvalue, Replicates, SchemeSpec, Tail,
};
use crate::dgp::{simulate, DgpSpec, Process};
use crate::estimators::ols;
use crate::estimators::{constrained_ols, AffineConstraint};
use crate::mc::{run_double, run_unconditional, uniform_grid, Experiment, StatisticSpec};
use crate::normal;
use crate::rngkit::{
    derive_stream, sample_std_normal, sample_uniform_permutation, Stream, StreamPath,
};
use crate::statistics::{cusum_stat, ks_stat, Nu};

/// Deliberate defects used to check that the suite catches them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Replace the permutation sampler by one that only produces single
    /// n-cycles.
    CyclicPermutations,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cyclic-permutations" => Ok(Fault::CyclicPermutations),
            other => Err(format!(
                "unknown fault `{other}` (known: cyclic-permutations)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(Option<Fault>) -> std::result::Result<String, String>;

const CHECKS: &[(&str, Check)] = &[
    ("stream determinism", stream_determinism),
    ("permutation uniformity", permutation_uniformity),
    (
        "permutation enumeration vs brute force",
        enumeration_vs_brute_force,
    ),
    ("constrained OLS vs grid oracle", constrained_vs_grid),
    ("KS statistic vs grid oracle", ks_vs_grid),
    (
        "analytic vs empirical Gaussian bootstrap",
        analytic_vs_empirical,
    ),
    ("thread-count invariance", thread_invariance),
    ("panel rows are cdfs", panel_validity),
];

/// Names of all invariants, in execution order.
pub fn invariant_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every invariant.
pub fn run(fault: Option<Fault>) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let (passed, detail) = match check(fault) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                name,
                passed,
                detail,
            }
        })
        .collect()
}

fn ensure(cond: bool, detail: String) -> std::result::Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: crate::Error) -> String {
    e.to_string()
}

fn stream_determinism(_: Option<Fault>) -> std::result::Result<String, String> {
    let a = sample_std_normal(&mut derive_stream(42, &[3, 1, 4]), 64);
    let b = sample_std_normal(&mut StreamPath::new(42, &[3, 1]).child(4).stream(), 64);
    let c = sample_std_normal(&mut derive_stream(42, &[3, 1, 5]), 64);
    ensure(
        a == b && a != c,
        "same path reproduces, neighbouring path differs".into(),
    )
}

fn sattolo(stream: &mut Stream, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = stream.random_range(0..i);
        p.swap(i, j);
    }
    p
}

fn permutation_uniformity(fault: Option<Fault>) -> std::result::Result<String, String> {
    let draws = 60_000;
    let mut s = derive_stream(7, &[]);
    let mut counts = std::collections::HashMap::new();
    for _ in 0..draws {
        let p = match fault {
            Some(Fault::CyclicPermutations) => sattolo(&mut s, 3),
            None => sample_uniform_permutation(&mut s, 3),
        };
        *counts.entry(p).or_insert(0usize) += 1;
    }
    let expected = draws as f64 / 6.0;
    let mut all = Vec::new();
    let mut p: Vec<usize> = (0..3).collect();
    crate::bootstrap::for_each_permutation(&mut p, |q| all.push(q.to_vec()));
    let chi2: f64 = all
        .iter()
        .map(|q| {
            let c = *counts.get(q).unwrap_or(&0) as f64;
            (c - expected).powi(2) / expected
        })
        .sum();
    // 0.1% critical value of chi-square with 5 degrees of freedom
    ensure(
        chi2 < 20.52,
        format!("chi-square {chi2:.2} over 6 orderings of 3"),
    )
}

fn brute_force_cusum(e: &[f64], nu: Nu) -> Vec<f64> {
    let n = e.len();
    let mut out = Vec::new();
    for code in 0..n.pow(n as u32) {
        let idx: Vec<usize> = (0..n).map(|d| code / n.pow(d as u32) % n).collect();
        let mut seen = vec![false; n];
        if idx.iter().all(|&i| !std::mem::replace(&mut seen[i], true)) {
            let p: Vec<f64> = idx.iter().map(|&i| e[i]).collect();
            out.push(cusum_stat(&p, nu).map(|v| v.value).unwrap_or(f64::NAN));
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

fn enumeration_vs_brute_force(_: Option<Fault>) -> std::result::Result<String, String> {
    let mut s = derive_stream(11, &[]);
    for n in 2..=4 {
        for nu in [Nu::One, Nu::MaxAbs, Nu::SqrtSumSquares] {
            let e = sample_std_normal(&mut s, n);
            let d = permutation_cusum(&e, Replicates::FullEnumeration, nu, &StreamPath::root(0))
                .map_err(err)?;
            let oracle = brute_force_cusum(&e, nu);
            let same = d.draws().len() == oracle.len()
                && d.draws()
                    .iter()
                    .zip(&oracle)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
            if !same {
                return Err(format!(
                    "n = {n}, {nu:?}: enumeration differs from brute force"
                ));
            }
        }
    }
    Ok("n = 2, 3, 4 under all normalizations".into())
}

fn ssr_at(y: &[f64], x: &DMatrix<f64>, theta: &[f64]) -> f64 {
    (0..y.len())
        .map(|t| {
            let f: f64 = (0..x.ncols()).map(|j| x[(t, j)] * theta[j]).sum();
            (y[t] - f).powi(2)
        })
        .sum()
}

/// Minimizes the objective over the line `a'theta + b = c` by repeatedly
/// refined grid search, and compares with the feasible unconstrained point.
pub fn constrained_grid_oracle(y: &[f64], x: &DMatrix<f64>, con: &AffineConstraint) -> f64 {
    let a = &con.a;
    let norm2 = a[0] * a[0] + a[1] * a[1];
    let base = [
        a[0] * (con.c - con.b) / norm2,
        a[1] * (con.c - con.b) / norm2,
    ];
    let dir = [-a[1], a[0]];
    let at = |s: f64| [base[0] + s * dir[0], base[1] + s * dir[1]];
    let (mut lo, mut hi) = (-1e3, 1e3);
    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..12 {
        let steps = 2000;
        let h = (hi - lo) / steps as f64;
        for i in 0..=steps {
            let s = lo + h * i as f64;
            let v = ssr_at(y, x, &at(s));
            if v < best.0 {
                best = (v, s);
            }
        }
        lo = best.1 - 2.0 * h;
        hi = best.1 + 2.0 * h;
    }
    let mut out = best.0;
    if let Ok(u) = ols(y, x) {
        if con.is_feasible(&u.coef, 0.0) {
            out = out.min(u.ssr);
        }
    }
    out
}

fn constrained_vs_grid(_: Option<Fault>) -> std::result::Result<String, String> {
    let mut s = derive_stream(13, &[]);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 20;
        let x = DMatrix::from_vec(n, 2, sample_std_normal(&mut s, 2 * n));
        let y = sample_std_normal(&mut s, n);
        let g = sample_std_normal(&mut s, 4);
        let con = AffineConstraint::new(vec![g[0], g[1]], g[2], g[3]).map_err(err)?;
        let fit = constrained_ols(&y, &x, &con).map_err(err)?;
        if !con.is_feasible(&fit.fit.coef, 1e-10) {
            return Err("constrained estimate is infeasible".into());
        }
        let gap = (fit.fit.ssr - constrained_grid_oracle(&y, &x, &con)).abs();
        worst = worst.max(gap);
    }
    ensure(
        worst < 1e-6,
        format!("max objective gap {worst:.2e} over 20 problems"),
    )
}

/// `sup |F_n - F0|` scanned over `10^5` grid points spanning the data
/// range widened by 5, plus both one-sided limits at every data point.
pub fn ks_grid_oracle(res: &[f64], f0: impl Fn(f64) -> f64) -> f64 {
    let n = res.len() as f64;
    let mut sorted = res.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0] - 5.0;
    let hi = sorted[sorted.len() - 1] + 5.0;
    let mut pts: Vec<f64> = (0..=100_000)
        .map(|i| lo + (hi - lo) * i as f64 / 100_000.0)
        .collect();
    pts.extend_from_slice(&sorted);
    pts.sort_by(f64::total_cmp);
    let mut best = 0.0f64;
    let (mut le, mut lt) = (0usize, 0usize);
    for u in pts {
        while le < sorted.len() && sorted[le] <= u {
            le += 1;
        }
        while lt < sorted.len() && sorted[lt] < u {
            lt += 1;
        }
        let f = f0(u);
        best = best
            .max((le as f64 / n - f).abs())
            .max((lt as f64 / n - f).abs());
    }
    n.sqrt() * best
}

fn ks_vs_grid(_: Option<Fault>) -> std::result::Result<String, String> {
    let mut s = derive_stream(17, &[]);
    let mut worst = 0.0f64;
    for n in [1, 3, 10, 50] {
        let r: Vec<f64> = sample_std_normal(&mut s, n)
            .iter()
            .map(|v| 1.3 * v - 0.2)
            .collect();
        let a = ks_stat(&r, normal::cdf).map_err(err)?.value;
        worst = worst.max((a - ks_grid_oracle(&r, normal::cdf)).abs());
    }
    ensure(worst < 1e-6, format!("max gap {worst:.2e}"))
}

fn analytic_vs_empirical(_: Option<Fault>) -> std::result::Result<String, String> {
    let spec = DgpSpec::new(10, Process::IidGaussian { beta: 1.0 });
    let sample = simulate(&spec, &mut derive_stream(19, &[])).map_err(err)?;
    let fit = ols(&sample.y, &sample.x).map_err(err)?;
    let base = StreamPath::new(19, &[1]);
    let a = fixed_design_gaussian(&sample, &fit, 2.0, true, 0, None, &base).map_err(err)?;
    let e = fixed_design_gaussian(&sample, &fit, 2.0, false, 100_000, None, &base).map_err(err)?;
    let tau = 100.0 * (fit.coef[0] - 1.0);
    let gap = [tau, -tau, 0.5 * tau, 2.0 * tau]
        .iter()
        .map(|t| (pvalue(&a, *t, Tail::Left) - pvalue(&e, *t, Tail::Left)).abs())
        .fold(0.0, f64::max);
    ensure(
        gap < 0.01,
        format!("max p-value gap {gap:.4} at B = 100000"),
    )
}

fn small_experiment() -> Experiment {
    Experiment {
        dgp: DgpSpec::new(
            30,
            Process::ArchBivariate {
                beta: 1.0,
                arch: Default::default(),
            },
        ),
        scheme: SchemeSpec::FixedDesignGaussian {
            analytic: false,
            b: 99,
            known_omega: None,
        },
        statistic: StatisticSpec::Slope {
            beta0: None,
            alpha_exp: 2.0,
        },
        tail: Tail::Left,
        local_alt_b: None,
    }
}

fn thread_invariance(_: Option<Fault>) -> std::result::Result<String, String> {
    let exp = small_experiment();
    let a = run_unconditional(&exp, 64, 5, 1).map_err(err)?;
    let b = run_unconditional(&exp, 64, 5, 4).map_err(err)?;
    let grid = uniform_grid(21).map_err(err)?;
    let c = run_double(&exp, 6, 10, &grid, 5, 1).map_err(err)?;
    let d = run_double(&exp, 6, 10, &grid, 5, 4).map_err(err)?;
    ensure(
        a == b && c == d,
        "1 vs 4 threads, unconditional and double".into(),
    )
}

fn panel_validity(_: Option<Fault>) -> std::result::Result<String, String> {
    let mut exp = small_experiment();
    exp.dgp = DgpSpec::new(
        20,
        Process::EndogenousSign {
            beta: 1.0,
            delta: 9.0,
        },
    );
    exp.scheme = SchemeSpec::FixedDesignGaussian {
        analytic: true,
        b: 0,
        known_omega: None,
    };
    let grid = uniform_grid(101).map_err(err)?;
    let panel = run_double(&exp, 8, 200, &grid, 23, 0).map_err(err)?;
    panel.validate().map_err(err)?;
    ensure(
        panel.rows.len() == 8,
        format!("{} rows of {} points", panel.rows.len(), grid.len()),
    )
}
