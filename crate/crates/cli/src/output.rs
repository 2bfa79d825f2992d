use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use kdv_core::sim::DecayReport;
use kdv_core::{BiPoly, DecayConstants, EpsilonChoice, KernelSet, UniPoly};
use serde::{Deserialize, Serialize};

use crate::args::Invocation;

pub const FORMAT_VERSION: u32 = 1;

/// 17 significant digits in scientific notation; non-finite values are refused.
pub fn format_value(v: f64) -> Result<String> {
    if !v.is_finite() {
        bail!("refusing to write non-finite value {v}");
    }
    Ok(format!("{v:.16e}"))
}

fn push_row(out: &mut String, row: &[f64]) -> Result<()> {
    for (i, &v) in row.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_value(v)?);
    }
    out.push('\n');
    Ok(())
}

pub fn norms_csv(report: &DecayReport) -> Result<String> {
    let mut out = String::from("t,l2_u,l2_uhat,l2_err,h3_err,U,V\n");
    for i in 0..report.times.len() {
        let row = [
            report.times[i],
            report.l2_u[i],
            report.l2_uhat[i],
            report.l2_err[i],
            report.h3_err[i],
            report.u_control[i],
            report.v_control[i],
        ];
        push_row(&mut out, &row).with_context(|| format!("norms row {i}"))?;
    }
    Ok(out)
}

pub fn states_csv(report: &DecayReport) -> Result<String> {
    let grid = report.grid;
    let mut out = String::from("t,x,u,uhat,uerr\n");
    for snap in &report.states {
        for j in 0..grid.nodes() {
            let row = [snap.t, grid.x(j), snap.u[j], snap.uhat[j], snap.uerr[j]];
            push_row(&mut out, &row).with_context(|| format!("state at t = {}", snap.t))?;
        }
    }
    Ok(out)
}

/// Nonzero coefficients of `Σ c_mn x^m y^n` as `m,n,coeff` rows.
pub fn bipoly_csv(p: &BiPoly) -> Result<String> {
    let mut out = String::from("m,n,coeff\n");
    for (m, n, c) in p.terms().filter(|t| t.2 != 0.0) {
        writeln!(out, "{m},{n},{}", format_value(c)?)?;
    }
    Ok(out)
}

pub fn unipoly_csv(p: &UniPoly) -> Result<String> {
    let mut out = String::from("m,n,coeff\n");
    for (m, &c) in p.coeffs().iter().enumerate().filter(|t| *t.1 != 0.0) {
        writeln!(out, "{m},0,{}", format_value(c)?)?;
    }
    Ok(out)
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(contents).with_context(|| format!("writing {}", path.display()))?;
    tmp.as_file().sync_all().with_context(|| format!("flushing {}", path.display()))?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_kernels(ks: &KernelSet, dir: &Path) -> Result<()> {
    write_atomic(&dir.join("k.csv"), bipoly_csv(&ks.k)?.as_bytes())?;
    write_atomic(&dir.join("p.csv"), bipoly_csv(&ks.p)?.as_bytes())?;
    for (name, poly) in [("P1", &ks.p1), ("P2", &ks.p2), ("Psi1", &ks.psi1), ("Psi2", &ks.psi2)] {
        write_atomic(&dir.join(format!("{name}.csv")), unipoly_csv(poly)?.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonRecord {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub length: f64,
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub epsilon: EpsilonRecord,
    pub grid_points: usize,
    pub dt: f64,
    pub t_final: f64,
    pub n_iter: usize,
    pub m_iter: usize,
    pub mode: String,
    pub u0: String,
    pub uhat0: String,
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRecord {
    pub alpha: f64,
    pub kappa: f64,
    pub beta: f64,
    pub mu: f64,
    pub epsilon: f64,
}

impl From<&DecayConstants> for ConstantsRecord {
    fn from(c: &DecayConstants) -> Self {
        ConstantsRecord { alpha: c.alpha, kappa: c.kappa, beta: c.beta, mu: c.mu, epsilon: c.epsilon }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatesRecord {
    pub u: Option<f64>,
    pub uhat: Option<f64>,
    pub err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub format_version: u32,
    pub config: ConfigRecord,
    pub constants: Option<ConstantsRecord>,
    pub fitted_rates: RatesRecord,
    pub picard_residual: f64,
    pub succession_residual: f64,
    pub runtime_seconds: f64,
}

impl ReportRecord {
    pub fn new(inv: &Invocation, report: &DecayReport, runtime_seconds: f64) -> Self {
        let (c, a) = (&inv.config, &inv.args);
        let epsilon = match c.epsilon {
            EpsilonChoice::Auto => EpsilonRecord::Named("auto".into()),
            EpsilonChoice::Fixed(v) => EpsilonRecord::Fixed(v),
        };
        ReportRecord {
            format_version: FORMAT_VERSION,
            config: ConfigRecord {
                length: c.length,
                lambda: c.lambda,
                lambda_tilde: c.lambda_tilde,
                epsilon,
                grid_points: c.intervals,
                dt: c.dt,
                t_final: c.t_final,
                n_iter: c.n_iter,
                m_iter: c.m_iter,
                mode: a.mode.name().into(),
                u0: a.u0.label(),
                uhat0: a.uhat0.label(),
                record_every: c.record_every,
            },
            constants: report.constants.as_ref().map(ConstantsRecord::from),
            fitted_rates: RatesRecord {
                u: report.fitted_rate_u,
                uhat: report.fitted_rate_uhat,
                err: report.fitted_rate_err,
            },
            picard_residual: report.picard_residual,
            succession_residual: report.succession_residual,
            runtime_seconds,
        }
    }
}

pub fn write_outputs(inv: &Invocation, report: &DecayReport, runtime_seconds: f64) -> Result<()> {
    let outs = &inv.outputs;
    write_atomic(&outs.norms_path, norms_csv(report)?.as_bytes())?;
    if let Some(path) = &outs.states_path {
        write_atomic(path, states_csv(report)?.as_bytes())?;
    }
    if let Some(dir) = &outs.kernel_dir {
        let c = &inv.config;
        let ks = KernelSet::solve(c.lambda, c.lambda_tilde, c.length, c.n_iter)?;
        write_kernels(&ks, dir)?;
    }
    let record = ReportRecord::new(inv, report, runtime_seconds);
    let mut json = serde_json::to_string_pretty(&record)?;
    json.push('\n');
    write_atomic(&outs.report_path, json.as_bytes())?;
    Ok(())
}
