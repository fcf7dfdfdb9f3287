//! Output formatting for the subcommands: aligned text, CSV, or JSON, to
//! stdout or a file. All formats are byte-deterministic for fixed inputs.

use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use sarrt_core::report::{csv_string, fmt_f64, json_string};
use sarrt_core::{DepthConstants, PlanReport, RateEvaluator, Table1Row};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

pub fn sink(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::BufWriter::new(std::io::stdout())),
    })
}

/// Four decimals, except that integer-valued constants print bare
/// (`2`, not `2.0000`) the way the reference table is typeset.
fn fmt4(x: f64) -> String {
    if x == x.round() && x.abs() < 1e9 {
        format!("{}", x as i64)
    } else {
        format!("{x:.4}")
    }
}

pub fn emit_constants(
    c: &DepthConstants,
    format: Format,
    mut w: Box<dyn Write>,
) -> anyhow::Result<()> {
    match format {
        Format::Json => write!(w, "{}", json_string(c))?,
        Format::Csv => {
            writeln!(w, "law,one_over_mu,alpha_max,alpha_min,clt_scale")?;
            writeln!(
                w,
                "{},{},{},{},{}",
                c.law,
                fmt_f64(c.one_over_mu),
                fmt_f64(c.alpha_max),
                fmt_f64(c.alpha_min),
                c.clt_scale.map_or("".into(), fmt_f64)
            )?;
        }
        Format::Text => {
            writeln!(w, "law          {}", c.law)?;
            writeln!(w, "one_over_mu  {}", c.one_over_mu)?;
            writeln!(w, "alpha_max    {}", c.alpha_max)?;
            writeln!(w, "alpha_min    {}", c.alpha_min)?;
            match c.clt_scale {
                Some(s) => writeln!(w, "clt_scale    {s}")?,
                None => writeln!(w, "clt_scale    (absent: sigma^2 is 0 or infinite)")?,
            }
            writeln!(
                w,
                "solver       alpha_max bracket [{}, {}] in {} bisections; alpha_min probes {}",
                c.alpha_max_diag.bracket.0,
                c.alpha_max_diag.bracket.1,
                c.alpha_max_diag.iterations,
                c.alpha_min_diag.probes
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_table1(rows: &[Table1Row], format: Format, mut w: Box<dyn Write>) -> anyhow::Result<()> {
    match format {
        Format::Json => write!(w, "{}", json_string(&rows))?,
        Format::Csv => {
            writeln!(
                w,
                "k,rho_plus_min,rho_plus,rho_plus_max,rho_minus_min,rho_minus,rho_minus_max"
            )?;
            for r in rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    r.k,
                    fmt_f64(r.rho_plus_min),
                    fmt_f64(r.rho_plus),
                    fmt_f64(r.rho_plus_max),
                    fmt_f64(r.rho_minus_min),
                    fmt_f64(r.rho_minus),
                    fmt_f64(r.rho_minus_max)
                )?;
            }
        }
        Format::Text => {
            writeln!(w, "k  rho+_min  rho+  rho+_max  rho-_min  rho-  rho-_max")?;
            for r in rows {
                writeln!(
                    w,
                    "{}  {}  {}  {}  {}  {}  {}",
                    r.k,
                    fmt4(r.rho_plus_min),
                    fmt4(r.rho_plus),
                    fmt4(r.rho_plus_max),
                    fmt4(r.rho_minus_min),
                    fmt4(r.rho_minus),
                    fmt4(r.rho_minus_max)
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Serialize)]
pub struct RateReport {
    pub law: String,
    pub z: f64,
    pub c: f64,
    pub dual: f64,
    pub argmax: Option<f64>,
    pub capped: bool,
    pub unbounded: bool,
    pub psi: f64,
    pub lambda: Option<f64>,
    pub cumulant_at_lambda: Option<f64>,
}

impl RateReport {
    pub fn evaluate(ev: &RateEvaluator, z: f64, lambda: Option<f64>) -> Self {
        let d = ev.legendre_dual_detailed(z);
        let c = -1.0 / z;
        RateReport {
            law: ev.law().to_string(),
            z,
            c,
            dual: d.value,
            argmax: d.argmax,
            capped: d.capped,
            unbounded: d.unbounded,
            psi: if d.value.is_infinite() { f64::INFINITY } else { c * d.value },
            lambda,
            cumulant_at_lambda: lambda.map(|l| ev.cumulant(l)),
        }
    }
}

pub fn emit_rate(r: &RateReport, format: Format, mut w: Box<dyn Write>) -> anyhow::Result<()> {
    match format {
        Format::Json => write!(w, "{}", json_string(r))?,
        Format::Csv => {
            writeln!(w, "law,z,c,dual,psi,argmax,capped,unbounded,lambda,cumulant")?;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.law,
                fmt_f64(r.z),
                fmt_f64(r.c),
                fmt_f64(r.dual),
                fmt_f64(r.psi),
                r.argmax.map_or("".into(), fmt_f64),
                r.capped,
                r.unbounded,
                r.lambda.map_or("".into(), fmt_f64),
                r.cumulant_at_lambda.map_or("".into(), fmt_f64),
            )?;
        }
        Format::Text => {
            writeln!(w, "law           {}", r.law)?;
            writeln!(w, "z             {}", r.z)?;
            writeln!(w, "Lambda*(z)    {}", r.dual)?;
            if let Some(a) = r.argmax {
                writeln!(w, "argmax λ      {a}")?;
            }
            if r.capped {
                writeln!(w, "note          bracket capped; value is a lower estimate")?;
            }
            writeln!(w, "Psi(c)        {}  (c = -1/z = {})", r.psi, r.c)?;
            if let (Some(l), Some(cl)) = (r.lambda, r.cumulant_at_lambda) {
                writeln!(w, "Lambda({l})    {cl}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_plan(report: &PlanReport, format: Format, mut w: Box<dyn Write>) -> anyhow::Result<()> {
    match format {
        Format::Json => write!(w, "{}", json_string(report))?,
        Format::Csv => write!(w, "{}", csv_string(&report.rows))?,
        Format::Text => {
            writeln!(
                w,
                "law {}  seed {}  trials {}",
                report.law, report.seed, report.trials
            )?;
            for row in &report.rows {
                write!(w, "n {:>10}", row.n)?;
                for s in &row.stats {
                    write!(
                        w,
                        "  {} mean {:.4} ratio {:.4}",
                        s.name, s.mean, s.ratio_to_log_n
                    )?;
                }
                if let Some(r) = &row.renewal {
                    write!(
                        w,
                        "  exact<=hat {:.4} bar<=exact {:.4}",
                        r.frac_exact_le_hat, r.frac_bar_le_exact
                    )?;
                }
                if let Some(c) = &row.clt {
                    write!(
                        w,
                        "  clt mean {:.4} var {:.4} skew {:.4} exkurt {:.4} ks {:.4}",
                        c.mean, c.variance, c.skewness, c.excess_kurtosis, c.ks_distance
                    )?;
                }
                if let Some(p) = &row.path_event {
                    write!(w, "  event p {:.5} ci [{:.5}, {:.5}]", p.p_hat, p.ci.0, p.ci.1)?;
                }
                if let Some(r) = &row.rotation {
                    write!(w, "  rotation lhs {:.5} rhs {:.5} pass {}", r.lhs, r.rhs, r.pass)?;
                }
                writeln!(w)?;
            }
            for s in &report.skipped {
                writeln!(w, "skipped n {}: {}", s.n, s.reason)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Serialize)]
struct DagReport {
    n: u64,
    k: u32,
    node: u64,
    trials: u64,
    mean_min_label: f64,
    mean_max_label: f64,
    ratio_min_label: f64,
    ratio_max_label: f64,
    reduction_mismatches: Option<u64>,
    walks: Vec<(u64, u64, u64)>,
}

pub fn emit_dag(
    n: u64,
    k: u32,
    node: u64,
    rows: &[(u64, u64, u64)],
    mismatches: Option<u64>,
    format: Format,
    mut w: Box<dyn Write>,
) -> anyhow::Result<()> {
    let trials = rows.len() as u64;
    let mean = |f: fn(&(u64, u64, u64)) -> u64| {
        rows.iter().map(|r| f(r) as f64).sum::<f64>() / trials as f64
    };
    let log_n = (n as f64).ln();
    let report = DagReport {
        n,
        k,
        node,
        trials,
        mean_min_label: mean(|r| r.1),
        mean_max_label: mean(|r| r.2),
        ratio_min_label: mean(|r| r.1) / log_n,
        ratio_max_label: mean(|r| r.2) / log_n,
        reduction_mismatches: mismatches,
        walks: rows.to_vec(),
    };
    match format {
        Format::Json => write!(w, "{}", json_string(&report))?,
        Format::Csv => {
            writeln!(w, "trial,r_min_label,r_max_label")?;
            for (t, rmin, rmax) in rows {
                writeln!(w, "{t},{rmin},{rmax}")?;
            }
        }
        Format::Text => {
            writeln!(
                w,
                "k-dag n {} k {} node {}: over {} trials  R- mean {:.4} (/log n {:.4})  R+ mean {:.4} (/log n {:.4})",
                n, k, node, trials,
                report.mean_min_label, report.ratio_min_label,
                report.mean_max_label, report.ratio_max_label
            )?;
            if let Some(m) = mismatches {
                writeln!(w, "reduction check: {m} mismatches")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
