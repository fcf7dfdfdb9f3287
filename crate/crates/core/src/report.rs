//! Result serialization (CSV and a JSON mirror) and radial SVG tree renders.
//!
//! CSV numbers are written with 17 significant digits so a re-parse
//! reproduces every `f64` bit for bit; byte output is deterministic for a
//! fixed input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::montecarlo::ConvergenceRow;
use crate::tree::TreeDepths;

/// Node count cap for rendering; beyond this the SVG is unreadable anyway.
pub const RENDER_MAX_NODES: u64 = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("io error on `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("tree was built without retained parents; rebuild with keep_parents")]
    MissingParents,
    #[error("render of {n} nodes exceeds the cap {max}")]
    RenderTooLarge { n: u64, max: u64 },
}

/// Lossless float formatting: 17 significant digits in scientific notation,
/// with `inf`/`-inf`/`nan` spelled the way `f64::from_str` reads them back.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn push_stat_columns(header: &mut Vec<String>, prefix: &str) {
    for col in ["mean", "variance", "min", "q25", "median", "q75", "max", "ratio", "ci_half"] {
        header.push(format!("{prefix}_{col}"));
    }
}

fn push_stat_values(out: &mut Vec<String>, s: &crate::montecarlo::StatSummary) {
    for v in [s.mean, s.variance, s.min, s.q25, s.median, s.q75, s.max, s.ratio_to_log_n, s.ci_half_width] {
        out.push(fmt_f64(v));
    }
}

/// One line per `n`, header naming every column. The column set follows the
/// first row's recorded statistics (all rows of one plan share it).
pub fn csv_string(rows: &[ConvergenceRow]) -> String {
    let mut header = vec!["n".to_string(), "trials".to_string(), "log_n".to_string()];
    if let Some(first) = rows.first() {
        for s in &first.stats {
            push_stat_columns(&mut header, s.name);
        }
        if first.renewal.is_some() {
            for p in ["d_exact", "d_hat", "d_bar"] {
                push_stat_columns(&mut header, p);
            }
            for c in ["frac_exact_le_hat", "frac_bar_le_exact", "frac_bar_le_exact_lo", "frac_bar_le_exact_hi"] {
                header.push(c.to_string());
            }
        }
        if first.clt.is_some() {
            for c in [
                "clt_mu", "clt_sigma", "clt_mean", "clt_variance", "clt_skewness",
                "clt_excess_kurtosis", "clt_ks",
                "clt_thr_mean", "clt_thr_variance", "clt_thr_skewness", "clt_thr_kurtosis", "clt_thr_ks",
            ] {
                header.push(c.to_string());
            }
        }
        if first.path_event.is_some() {
            for c in ["pe_steps", "pe_beta", "pe_hits", "pe_p_hat", "pe_ci_lo", "pe_ci_hi"] {
                header.push(c.to_string());
            }
        }
        if first.rotation.is_some() {
            for c in ["rot_lhs", "rot_rhs", "rot_margin", "rot_margin_se", "rot_pass"] {
                header.push(c.to_string());
            }
        }
    }
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut cells = vec![row.n.to_string(), row.trials.to_string(), fmt_f64(row.log_n)];
        for s in &row.stats {
            push_stat_values(&mut cells, s);
        }
        if let Some(r) = &row.renewal {
            for s in [&r.d_exact, &r.d_hat, &r.d_bar] {
                push_stat_values(&mut cells, s);
            }
            for v in [r.frac_exact_le_hat, r.frac_bar_le_exact, r.frac_bar_le_exact_ci.0, r.frac_bar_le_exact_ci.1] {
                cells.push(fmt_f64(v));
            }
        }
        if let Some(c) = &row.clt {
            for v in [
                c.mu, c.sigma, c.mean, c.variance, c.skewness, c.excess_kurtosis, c.ks_distance,
                c.thresholds.mean_abs, c.thresholds.variance_tol, c.thresholds.skewness_abs,
                c.thresholds.excess_kurtosis_abs, c.thresholds.ks,
            ] {
                cells.push(fmt_f64(v));
            }
        }
        if let Some(p) = &row.path_event {
            cells.push(p.steps.to_string());
            cells.push(fmt_f64(p.beta));
            cells.push(p.hits.to_string());
            for v in [p.p_hat, p.ci.0, p.ci.1] {
                cells.push(fmt_f64(v));
            }
        }
        if let Some(r) = &row.rotation {
            for v in [r.lhs, r.rhs, r.margin, r.margin_se] {
                cells.push(fmt_f64(v));
            }
            cells.push(if r.pass { "1".into() } else { "0".into() });
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(rows: &[ConvergenceRow], path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, csv_string(rows)).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// JSON mirror of the CSV content (same rows, nested instead of flattened).
pub fn json_string<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, json_string(value)).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Radial layout parameters and the label color ramp.
#[derive(Debug, Clone, Copy)]
pub struct RenderSpec {
    /// Square canvas side in pixels.
    pub canvas: f64,
    pub node_radius: f64,
    /// Ramp endpoints, linear in the node label: light green to dark red.
    pub color_low: [u8; 3],
    pub color_high: [u8; 3],
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            canvas: 900.0,
            node_radius: 2.5,
            color_low: [144, 238, 144],
            color_high: [139, 0, 0],
        }
    }
}

fn ramp(spec: &RenderSpec, t: f64) -> String {
    let c = |i: usize| {
        (spec.color_low[i] as f64 + t * (spec.color_high[i] as f64 - spec.color_low[i] as f64))
            .round() as u8
    };
    format!("#{:02x}{:02x}{:02x}", c(0), c(1), c(2))
}

/// Renders a tree radially: radius proportional to depth, angle by recursive
/// allocation of subtree-sized sectors. One line per edge, one circle per
/// node, label-linear colors.
pub fn svg_string(tree: &TreeDepths, spec: &RenderSpec) -> Result<String, ReportError> {
    let n = tree.n();
    if n > RENDER_MAX_NODES {
        return Err(ReportError::RenderTooLarge {
            n,
            max: RENDER_MAX_NODES,
        });
    }
    let parents = tree.parents().ok_or(ReportError::MissingParents)?;
    let nn = n as usize;

    let mut subtree = vec![1u64; nn + 1];
    for i in (1..=nn).rev() {
        subtree[parents[i] as usize] += subtree[i];
    }
    // Sector allocation: children split the parent's sector in label order,
    // proportionally to subtree size. Parents precede children, so one
    // ascending pass suffices.
    let tau = std::f64::consts::TAU;
    let mut sector = vec![(0.0f64, 0.0f64); nn + 1]; // (start, width)
    let mut cursor = vec![0.0f64; nn + 1];
    sector[0] = (0.0, tau);
    for i in 1..=nn {
        let p = parents[i] as usize;
        let children_total = (subtree[p] - 1) as f64;
        let w = sector[p].1 * subtree[i] as f64 / children_total;
        sector[i] = (cursor[p].max(sector[p].0), w);
        cursor[i] = sector[i].0;
        cursor[p] = sector[i].0 + w;
    }

    let max_depth = tree.depths().iter().copied().max().unwrap_or(1).max(1) as f64;
    let center = spec.canvas / 2.0;
    let ring = (center - 4.0 * spec.node_radius - 2.0) / max_depth;
    let pos = |i: usize| -> (f64, f64) {
        if i == 0 {
            return (center, center);
        }
        let (start, width) = sector[i];
        let angle = start + width / 2.0;
        let r = tree.depths()[i] as f64 * ring;
        (center + r * angle.cos(), center + r * angle.sin())
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        spec.canvas
    );
    let _ = writeln!(
        svg,
        r##"<rect width="{0}" height="{0}" fill="#ffffff"/>"##,
        spec.canvas
    );
    for i in 1..=nn {
        let (x1, y1) = pos(i);
        let (x2, y2) = pos(parents[i] as usize);
        let _ = writeln!(
            svg,
            r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#999999" stroke-width="0.6"/>"##
        );
    }
    for i in 0..=nn {
        let (x, y) = pos(i);
        let color = ramp(spec, if n == 0 { 0.0 } else { i as f64 / n as f64 });
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{color}"/>"#,
            r = spec.node_radius
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_svg(tree: &TreeDepths, spec: &RenderSpec, path: &Path) -> Result<(), ReportError> {
    let svg = svg_string(tree, spec)?;
    std::fs::write(path, svg).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::AttachmentLaw;
    use crate::montecarlo::{run_plan, ExperimentPlan, Statistic};
    use crate::stream::RandomStream;
    use crate::tree::build_depths;

    fn sample_rows(n_grid: Vec<u64>) -> Vec<ConvergenceRow> {
        let plan = ExperimentPlan {
            law: AttachmentLaw::parse("uniform").unwrap(),
            n_grid,
            trials: 40,
            seed: 7,
            statistics: vec![Statistic::DLast, Statistic::Height, Statistic::Renewal],
            path_event: None,
            rotation: None,
        };
        run_plan(&plan).unwrap().rows
    }

    #[test]
    fn empty_rows_give_header_only() {
        let s = csv_string(&[]);
        assert_eq!(s.lines().count(), 1);
        assert!(s.starts_with("n,trials,log_n"));
    }

    #[test]
    fn one_row_gives_two_lines() {
        let rows = sample_rows(vec![500]);
        let s = csv_string(&rows);
        assert_eq!(s.lines().count(), 2);
        let header_cols = s.lines().next().unwrap().split(',').count();
        let data_cols = s.lines().nth(1).unwrap().split(',').count();
        assert_eq!(header_cols, data_cols);
    }

    #[test]
    fn csv_floats_round_trip_bit_exactly() {
        let rows = sample_rows(vec![500, 2000]);
        let s = csv_string(&rows);
        let mut lines = s.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        for (row, line) in rows.iter().zip(lines) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells.len(), header.len());
            let lookup = |name: &str| -> f64 {
                let idx = header.iter().position(|h| *h == name).unwrap();
                cells[idx].parse().unwrap()
            };
            assert_eq!(lookup("log_n").to_bits(), row.log_n.to_bits());
            assert_eq!(
                lookup("d_last_mean").to_bits(),
                row.stats[0].mean.to_bits()
            );
            assert_eq!(
                lookup("d_hat_ci_half").to_bits(),
                row.renewal.as_ref().unwrap().d_hat.ci_half_width.to_bits()
            );
        }
    }

    #[test]
    fn csv_bytes_are_deterministic() {
        let a = csv_string(&sample_rows(vec![500]));
        let b = csv_string(&sample_rows(vec![500]));
        assert_eq!(a, b);
    }

    #[test]
    fn fmt_handles_non_finite() {
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    /// Minimal well-formedness check: tag balance and quote closure.
    fn assert_well_formed_xml(s: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = s;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed tag") + start;
            let tag = &rest[start + 1..end];
            assert_eq!(tag.matches('"').count() % 2, 0, "unbalanced quotes in <{tag}>");
            if let Some(name) = tag.strip_prefix('/') {
                assert_eq!(stack.pop().as_deref(), Some(name), "mismatched </{name}>");
            } else if !tag.starts_with('?') && !tag.ends_with('/') {
                let name = tag.split_whitespace().next().unwrap().to_string();
                stack.push(name);
            }
            rest = &rest[end + 1..];
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn svg_single_node() {
        let t = build_depths(
            &AttachmentLaw::uniform(),
            &RandomStream::new(1, 0),
            1,
            true,
        )
        .unwrap();
        let svg = svg_string(&t, &RenderSpec::default()).unwrap();
        assert_well_formed_xml(&svg);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<line").count(), 1);
    }

    #[test]
    fn svg_element_counts_and_well_formedness() {
        let n = 14;
        let t = build_depths(
            &AttachmentLaw::constant(0.5).unwrap(),
            &RandomStream::new(1, 0),
            n,
            true,
        )
        .unwrap();
        let svg = svg_string(&t, &RenderSpec::default()).unwrap();
        assert_well_formed_xml(&svg);
        assert_eq!(svg.matches("<circle").count() as u64, n + 1);
        assert_eq!(svg.matches("<line").count() as u64, n);
    }

    #[test]
    fn svg_requires_parents_and_respects_cap() {
        let t = build_depths(
            &AttachmentLaw::uniform(),
            &RandomStream::new(1, 0),
            10,
            false,
        )
        .unwrap();
        assert!(matches!(
            svg_string(&t, &RenderSpec::default()),
            Err(ReportError::MissingParents)
        ));
    }

    #[test]
    fn heavier_tails_toward_zero_increase_root_degree() {
        // under shared uniforms U^3 < U^{1/2}, so every root child of the
        // flat law is a root child of the concentrated one
        let n = 500u64;
        let stream = RandomStream::new(42, 0);
        let slow = build_depths(&AttachmentLaw::power(0.5).unwrap(), &stream, n, true).unwrap();
        let fast = build_depths(&AttachmentLaw::power(3.0).unwrap(), &stream, n, true).unwrap();
        let degree = |t: &crate::tree::TreeDepths| {
            (1..=n).filter(|&i| t.parent(i) == Some(0)).count()
        };
        assert!(degree(&fast) > degree(&slow));
        let svg = svg_string(&fast, &RenderSpec::default()).unwrap();
        assert_well_formed_xml(&svg);
    }
}
