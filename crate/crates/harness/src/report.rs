//! CSV reports and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! report is reproducible byte for byte from `(config, seed)`. The manifest
//! records what produced a directory of outputs; it deliberately carries no
//! timestamps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::experiments::{
    ConstantsReport, ConvergenceReport, DiscretizationReport, LemmaReport, MalliavinReport,
    Sigma2Report, Sigma2Source, SimulateExport,
};
use crate::Result;

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv<P: AsRef<Path>>(path: P, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "{}", header.join(",")).unwrap();
    for row in rows {
        writeln!(text, "{}", row.join(",")).unwrap();
    }
    fs::write(path, text)?;
    Ok(())
}

/// `run_manifest.txt`: config hash, effective seed, tool version, outputs.
pub fn write_manifest(
    dir: &Path,
    cfg: &ExperimentConfig,
    subcommand: &str,
    outputs: &[&str],
) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "tool = hawkesbench {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(text, "subcommand = {subcommand}").unwrap();
    writeln!(text, "config_hash = {:016x}", cfg.config_hash).unwrap();
    writeln!(text, "master_seed = {}", cfg.master_seed).unwrap();
    writeln!(text, "replicas = {}", cfg.replicas).unwrap();
    writeln!(text, "rho = {}", fmt_f64(cfg.model.rho())).unwrap();
    for out in outputs {
        writeln!(text, "output = {out}").unwrap();
    }
    fs::write(dir.join("run_manifest.txt"), text)?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

/// Columns: t, n, marginal_w1, marginal_stderr, functional_lb,
/// functional_stderr, increment_lb, best_functional — empty fields where a
/// mode does not apply. The footer rows carry sigma2, slope and fitted_c.
pub fn write_convergence(dir: &Path, name: &str, report: &ConvergenceReport) -> Result<String> {
    let file = format!("{name}.csv");
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.t),
                r.n.to_string(),
                fmt_opt(r.marginal_w1),
                fmt_opt(r.marginal_stderr),
                fmt_opt(r.functional_lb),
                fmt_opt(r.functional_stderr),
                fmt_opt(r.increment_lb),
                r.best_functional.clone().unwrap_or_default(),
            ]
        })
        .collect();
    rows.push(vec![
        "sigma2".into(),
        fmt_f64(report.sigma2.sigma2),
        fmt_f64(report.sigma2.stderr),
        match report.sigma2.source {
            Sigma2Source::ClosedForm => "closed_form".into(),
            Sigma2Source::Estimated => "estimated".into(),
        },
        "slope".into(),
        fmt_f64(report.slope),
        "fitted_c".into(),
        fmt_f64(report.fitted_c),
    ]);
    rows.push(vec![
        "control".into(),
        report.control.name.clone(),
        fmt_f64(report.control.value),
        fmt_f64(report.control.threshold),
        if report.control.pass { "pass" } else { "fail" }.into(),
        String::new(),
        String::new(),
        String::new(),
    ]);
    write_csv(
        dir.join(&file),
        &[
            "t",
            "n",
            "marginal_w1",
            "marginal_stderr",
            "functional_lb",
            "functional_stderr",
            "increment_lb",
            "best_functional",
        ],
        &rows,
    )?;
    Ok(file)
}

pub fn write_lemmas(dir: &Path, report: &LemmaReport) -> Result<String> {
    let file = "lemma_checks.csv".to_string();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.t),
                r.n.to_string(),
                fmt_f64(r.quad_lhs),
                fmt_f64(r.quad_stderr),
                fmt_f64(r.quad_ratio),
                fmt_f64(r.var_lhs),
                fmt_f64(r.var_stderr),
                fmt_f64(r.var_ratio),
            ]
        })
        .collect();
    write_csv(
        dir.join(&file),
        &[
            "t",
            "n",
            "quad_lhs",
            "quad_stderr",
            "quad_ratio",
            "var_lhs",
            "var_stderr",
            "var_ratio",
        ],
        &rows,
    )?;
    Ok(file)
}

pub fn write_discretization(dir: &Path, report: &DiscretizationReport) -> Result<String> {
    let file = "discretization_error.csv".to_string();
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.stats.mean_sup_gap),
                fmt_f64(r.stats.stderr),
                fmt_f64(r.stats.fourth_moment),
            ]
        })
        .collect();
    rows.push(vec![
        "slope".into(),
        fmt_f64(report.slope),
        "t".into(),
        fmt_f64(report.t),
    ]);
    write_csv(
        dir.join(&file),
        &["n", "mean_sup_gap", "stderr", "fourth_moment"],
        &rows,
    )?;
    Ok(file)
}

pub fn write_malliavin(dir: &Path, report: &MalliavinReport) -> Result<String> {
    let file = "malliavin_bound.csv".to_string();
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.lag),
                fmt_f64(r.estimate),
                fmt_f64(r.stderr),
                fmt_f64(r.bound),
                if r.satisfied { "true" } else { "false" }.into(),
            ]
        })
        .collect();
    rows.push(vec![
        "theta_pairs".into(),
        report.theta_pairs.to_string(),
        "all_equal".into(),
        if report.theta_all_equal { "true" } else { "false" }.into(),
        String::new(),
    ]);
    write_csv(
        dir.join(&file),
        &["t_minus_u", "estimate", "stderr", "psi_bound", "ok"],
        &rows,
    )?;
    Ok(file)
}

pub fn write_sigma2(dir: &Path, report: &Sigma2Report) -> Result<String> {
    let file = "sigma2.csv".to_string();
    let rows = vec![vec![
        fmt_f64(report.value),
        fmt_f64(report.stderr),
        fmt_opt(report.closed_form),
        fmt_f64(report.mean_intensity_bound),
        fmt_f64(report.burn_in),
        fmt_f64(report.horizon),
        report.replicas.to_string(),
    ]];
    write_csv(
        dir.join(&file),
        &[
            "sigma2",
            "stderr",
            "closed_form",
            "mean_intensity_bound",
            "burn_in",
            "horizon",
            "replicas",
        ],
        &rows,
    )?;
    Ok(file)
}

pub fn write_constants(dir: &Path, report: &ConstantsReport) -> Result<String> {
    let file = "constants.csv".to_string();
    let rows = vec![
        vec!["kernel_family".into(), report.kernel_family.clone()],
        vec!["l1_norm".into(), fmt_f64(report.l1_norm)],
        vec!["first_moment".into(), fmt_f64(report.first_moment)],
        vec!["support_cutoff".into(), fmt_f64(report.support_cutoff)],
        vec!["tail_bound".into(), fmt_f64(report.tail_bound)],
        vec!["lipschitz_alpha".into(), fmt_f64(report.lipschitz)],
        vec!["m_b1".into(), fmt_f64(report.m_b[0])],
        vec!["m_b2".into(), fmt_f64(report.m_b[1])],
        vec!["m_g1".into(), fmt_f64(report.m_g[0])],
        vec!["m_g2".into(), fmt_f64(report.m_g[1])],
        vec!["m_g3".into(), fmt_f64(report.m_g[2])],
        vec!["m_g4".into(), fmt_f64(report.m_g[3])],
        vec!["rho".into(), fmt_f64(report.rho)],
        vec!["resolvent_l1".into(), fmt_f64(report.resolvent_l1)],
        vec![
            "resolvent_order".into(),
            report.resolvent_order.to_string(),
        ],
        vec![
            "mean_intensity_bound".into(),
            fmt_f64(report.mean_intensity_bound),
        ],
        vec![
            "sigma2_closed_form".into(),
            fmt_opt(report.sigma2_closed_form),
        ],
        vec!["h_mu".into(), fmt_f64(report.h_mu)],
    ];
    write_csv(dir.join(&file), &["constant", "value"], &rows)?;
    Ok(file)
}

pub fn write_simulate(dir: &Path, export: &SimulateExport) -> Result<Vec<String>> {
    let path_file = "path.csv".to_string();
    let rows: Vec<Vec<String>> = export
        .path
        .candidates
        .iter()
        .map(|c| {
            vec![
                fmt_f64(c.t),
                fmt_f64(c.theta),
                fmt_f64(c.mark),
                if c.accepted { "true" } else { "false" }.into(),
            ]
        })
        .collect();
    write_csv(
        dir.join(&path_file),
        &["tau", "theta", "mark", "accepted"],
        &rows,
    )?;

    let comp_file = "compensator.csv".to_string();
    let rows: Vec<Vec<String>> = export
        .checkpoints
        .iter()
        .map(|(t, lam)| vec![fmt_f64(*t), fmt_f64(*lam)])
        .collect();
    write_csv(dir.join(&comp_file), &["t", "Lambda"], &rows)?;
    Ok(vec![path_file, comp_file])
}
