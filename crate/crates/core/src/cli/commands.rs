//! Subcommand implementations. Each writes its outputs under the configured
//! directory and returns a one-line summary.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::config::{CliError, Mode, RunConfig};
use crate::bootstrap::Tail;
use crate::diagnostics::{
    brownian_square_integrals, fanchart, local_power_from_draws, rejection_rate, uniformity_report,
};
use crate::error::Error;
use crate::mc::{
    panel_from_pvalues, run_double_pvalues, run_unconditional, uniform_grid, StatisticSpec,
};
use crate::rngkit::derive_stream;
use crate::selftest::{self, Fault};

/// Per-run provenance written next to every output.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub command: &'static str,
    pub master_seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
}

fn metadata(cfg: &RunConfig, command: &'static str) -> Metadata {
    Metadata {
        version: env!("CARGO_PKG_VERSION"),
        command,
        master_seed: cfg.master_seed,
        config_hash: cfg.config_hash(),
        config: serde_json::from_str(&cfg.normalized()).expect("normalized config is JSON"),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn prepare(cfg: &RunConfig, command: &'static str) -> Result<Metadata, CliError> {
    fs::create_dir_all(&cfg.output_dir)?;
    let meta = metadata(cfg, command);
    write_json(&cfg.output_dir.join("metadata.json"), &meta)?;
    Ok(meta)
}

/// Numeric failures are runtime errors; invalid designs are config errors.
fn classify(e: Error) -> CliError {
    match e {
        Error::Unsupported(_) | Error::Parameter { .. } => CliError::Config(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

fn long_row<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    g: f64,
    label: &str,
    v: f64,
) -> Result<(), CliError> {
    w.write_record([g.to_string(), label.to_string(), v.to_string()])?;
    Ok(())
}

/// Unconditional replications: `pvalues.csv` and `report.json`.
pub fn cmd_run(cfg: &RunConfig) -> Result<String, CliError> {
    let reps = match cfg.mode {
        Mode::Unconditional { replications } => replications,
        Mode::Double { .. } => {
            return Err(CliError::Config(
                "`run` needs mode.kind = \"unconditional\"".into(),
            ))
        }
    };
    let meta = prepare(cfg, "run")?;
    let pvals =
        run_unconditional(&cfg.experiment, reps, cfg.master_seed, cfg.threads).map_err(classify)?;
    let mut w = csv::Writer::from_path(cfg.output_dir.join("pvalues.csv"))?;
    w.write_record(["rep", "pvalue"])?;
    for (r, p) in pvals.iter().enumerate() {
        w.write_record([r.to_string(), p.to_string()])?;
    }
    w.flush()?;
    let report = uniformity_report(&pvals, &cfg.levels)?;
    write_json(
        &cfg.output_dir.join("report.json"),
        &json!({ "uniformity": report, "metadata": meta }),
    )?;
    Ok(format!(
        "{} p-values, KS distance from uniform {:.4}, written to {}",
        pvals.len(),
        report.ks_to_uniform,
        cfg.output_dir.display()
    ))
}

/// Double design: `panel.csv`, `fanchart.csv` and `report.json`.
pub fn cmd_fanchart(cfg: &RunConfig) -> Result<String, CliError> {
    let (outer, inner) = match cfg.mode {
        Mode::Double { outer, inner } => (outer, inner),
        Mode::Unconditional { .. } => {
            return Err(CliError::Config(
                "`fanchart` needs mode.kind = \"double\"".into(),
            ))
        }
    };
    if !cfg.experiment.dgp.supports_conditional() {
        return Err(CliError::Config(
            "`fanchart` needs a process with a conditional sampler \
             (iid_gaussian, arch_bivariate, endogenous_sign, cointegration_rw)"
                .into(),
        ));
    }
    let meta = prepare(cfg, "fanchart")?;
    let grid = uniform_grid(cfg.grid_size).map_err(classify)?;
    let pvals = run_double_pvalues(&cfg.experiment, outer, inner, cfg.master_seed, cfg.threads)
        .map_err(classify)?;
    let panel = panel_from_pvalues(&pvals, &grid)?;
    let fan = fanchart(&panel, cfg.band)?;

    let mut w = csv::Writer::from_path(cfg.output_dir.join("panel.csv"))?;
    w.write_record(["grid_point", "row_or_band", "value"])?;
    for (m, row) in panel.rows.iter().enumerate() {
        let label = m.to_string();
        for (g, v) in grid.iter().zip(row) {
            long_row(&mut w, *g, &label, *v)?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(cfg.output_dir.join("fanchart.csv"))?;
    w.write_record(["grid_point", "row_or_band", "value"])?;
    for (label, values) in [
        ("average", &fan.average_cdf),
        ("lower", &fan.lower_band),
        ("upper", &fan.upper_band),
    ] {
        for (g, v) in grid.iter().zip(values) {
            long_row(&mut w, *g, label, *v)?;
        }
    }
    w.flush()?;

    let pooled = uniformity_report(&pvals.concat(), &cfg.levels)?;
    let report = json!({
        "outer": outer,
        "inner": inner,
        "band": { "lower_quantile": cfg.band.0, "upper_quantile": cfg.band.1, "kind": "pointwise" },
        "max_dispersion": fan.max_dispersion,
        "pooled_uniformity": pooled,
        "metadata": meta,
    });
    write_json(&cfg.output_dir.join("report.json"), &report)?;
    Ok(format!(
        "{outer} x {inner} conditional p-values, max band width {:.4}, written to {}",
        fan.max_dispersion,
        cfg.output_dir.display()
    ))
}

/// Local-power sweep: `power.csv` with the simulated rejection rate and the
/// asymptotic oracle for each `b`.
pub fn cmd_power(cfg: &RunConfig) -> Result<String, CliError> {
    let power = cfg
        .power
        .as_ref()
        .ok_or_else(|| CliError::Config("`power` needs a \"power\" section with b_grid".into()))?;
    let reps = match cfg.mode {
        Mode::Unconditional { replications } => replications,
        Mode::Double { .. } => {
            return Err(CliError::Config(
                "`power` needs mode.kind = \"unconditional\"".into(),
            ))
        }
    };
    if !matches!(cfg.experiment.statistic, StatisticSpec::Slope { .. }) {
        return Err(CliError::Config("`power` needs the slope statistic".into()));
    }
    cfg.experiment
        .dgp
        .with_slope(0.0)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let meta = prepare(cfg, "power")?;
    // one set of functional draws for every b keeps the oracle monotone
    let draws = brownian_square_integrals(
        power.oracle_paths,
        power.oracle_steps,
        &mut derive_stream(cfg.master_seed, &[u64::MAX]),
    )?;
    let sign = match cfg.experiment.tail {
        Tail::Left => 1.0,
        Tail::Right => -1.0,
    };
    let mut w = csv::Writer::from_path(cfg.output_dir.join("power.csv"))?;
    w.write_record(["b", "mc_rejection_rate", "oracle"])?;
    let mut rows = Vec::new();
    for &b in &power.b_grid {
        let mut exp = cfg.experiment.clone();
        exp.local_alt_b = Some(b);
        let pvals =
            run_unconditional(&exp, reps, cfg.master_seed, cfg.threads).map_err(classify)?;
        let mc = rejection_rate(&pvals, power.level)?;
        let oracle = local_power_from_draws(sign * b, power.level, &draws)?;
        w.write_record([b.to_string(), mc.to_string(), oracle.to_string()])?;
        rows.push(json!({ "b": b, "mc_rejection_rate": mc, "oracle": oracle }));
    }
    w.flush()?;
    write_json(
        &cfg.output_dir.join("report.json"),
        &json!({ "level": power.level, "replications": reps, "rows": rows, "metadata": meta }),
    )?;
    Ok(format!(
        "{} local alternatives, written to {}",
        power.b_grid.len(),
        cfg.output_dir.display()
    ))
}

/// Runs the invariant suite and renders the pass/fail table.
pub fn cmd_selftest(fault: Option<Fault>) -> (bool, String) {
    let results = selftest::run(fault);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in &results {
        out.push_str(&format!(
            "{:<width$}  {}  {}\n",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        ));
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    out.push_str(&format!(
        "{} of {} invariants passed\n",
        results.len() - failed,
        results.len()
    ));
    (failed == 0, out)
}
