//! CSV and markdown writers. Floats are printed like C's `%g` with six
//! significant digits so output is byte-stable across runs and platforms.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use dam_core::experiments::{CapacityResult, ExperimentKind, ExperimentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            other => Err(format!("unknown output format {other:?} (csv, markdown)")),
        }
    }
}

/// `%g`-style formatting with six significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let rounded: f64 = sci.parse().expect("round trip");
    trim_zeros(&format!("{rounded:.*}", (5 - exp) as usize)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

enum Cell {
    Int(usize),
    Num(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Missing, Cell::Num)
    }

    fn render(&self, format: OutputFormat) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => fmt_num(*v),
            Cell::Text(s) => s.clone(),
            Cell::Missing => match format {
                OutputFormat::Csv => String::new(),
                OutputFormat::Markdown => "--".to_string(),
            },
        }
    }
}

type Column = (&'static str, fn(&ExperimentRecord) -> Cell);

fn ci_low(r: &ExperimentRecord) -> Cell {
    Cell::opt(r.ci.map(|c| c.0))
}

fn ci_high(r: &ExperimentRecord) -> Cell {
    Cell::opt(r.ci.map(|c| c.1))
}

fn columns(kind: ExperimentKind) -> Vec<Column> {
    let n: Column = ("N", |r| Cell::Int(r.point.neurons));
    let p: Column = ("p", |r| Cell::Int(r.point.patterns));
    let alpha: Column = ("alpha", |r| Cell::Num(r.theory.loading));
    let beta: Column = ("beta", |r| Cell::opt(r.beta_measured));
    let corruption: Column = ("corruption", |r| Cell::Num(r.point.corruption));
    let trials: Column = ("trials", |r| Cell::Int(r.trials));
    let rate: Column = ("success_rate", |r| Cell::Num(r.success_rate));
    let sweeps: Column = ("mean_sweeps", |r| Cell::opt(r.mean_sweeps));
    let lo: Column = ("ci_low", ci_low);
    let hi: Column = ("ci_high", ci_high);
    match kind {
        ExperimentKind::Convergence => vec![
            alpha,
            n,
            p,
            beta,
            corruption,
            ("m0", |r| Cell::Num(r.point.initial_overlap())),
            trials,
            sweeps,
            lo,
            hi,
            rate,
            ("alpha_rate", |r| Cell::Num(r.theory.alpha_rate)),
        ],
        ExperimentKind::Basin => vec![
            alpha,
            n,
            p,
            corruption,
            ("m0", |r| Cell::Num(r.point.initial_overlap())),
            trials,
            rate,
            lo,
            hi,
        ],
        ExperimentKind::Adversarial => vec![
            n,
            p,
            beta,
            ("gamma", |r| {
                Cell::opt(r.point.adversary.as_ref().map(|a| a.gamma0))
            }),
            ("adversary", |r| {
                Cell::Text(
                    r.point
                        .adversary
                        .as_ref()
                        .map_or("none", |a| a.model.name())
                        .to_string(),
                )
            }),
            ("rho", |r| {
                Cell::opt(r.point.adversary.as_ref().map(|a| a.rho))
            }),
            trials,
            rate,
            lo,
            hi,
        ],
        ExperimentKind::UpdateCompare => vec![
            ("alpha_prime", |r| Cell::Num(r.point.loading)),
            ("m0", |r| Cell::Num(r.point.initial_overlap())),
            n,
            p,
            ("mode", |r| Cell::Text(r.point.mode.name().to_string())),
            trials,
            rate,
            sweeps,
            lo,
            hi,
        ],
        ExperimentKind::PatternCompare => vec![
            alpha,
            n,
            p,
            ("ensemble", |r| {
                Cell::Text(r.point.ensemble.name().to_string())
            }),
            beta,
            corruption,
            trials,
            rate,
            lo,
            hi,
        ],
        ExperimentKind::RealData => vec![
            ("source", |r| {
                Cell::Text(
                    r.point
                        .source
                        .as_ref()
                        .map(|s| s.display().to_string())
                        .unwrap_or_default(),
                )
            }),
            n,
            p,
            alpha,
            beta,
            corruption,
            trials,
            rate,
            sweeps,
            lo,
            hi,
        ],
        ExperimentKind::Capacity => Vec::new(),
    }
}

fn table(headers: &[&str], rows: &[Vec<String>], format: OutputFormat) -> String {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(&headers.join(","));
            out.push('\n');
            for row in rows {
                let escaped: Vec<String> = row.iter().map(|c| csv_escape(c)).collect();
                out.push_str(&escaped.join(","));
                out.push('\n');
            }
        }
        OutputFormat::Markdown => {
            let _ = writeln!(out, "| {} |", headers.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(headers.len()));
            for row in rows {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
        }
    }
    out
}

fn csv_escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Renders records of one kind; an empty list yields the header only.
pub fn render_records(
    kind: ExperimentKind,
    records: &[ExperimentRecord],
    format: OutputFormat,
) -> String {
    let cols = columns(kind);
    let headers: Vec<&str> = cols.iter().map(|c| c.0).collect();
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| cols.iter().map(|c| (c.1)(r).render(format)).collect())
        .collect();
    table(&headers, &rows, format)
}

pub fn render_capacity(result: &CapacityResult, format: OutputFormat) -> String {
    let headers = ["N", "p_max", "scale", "alpha_eff"];
    let rows: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|p| {
            vec![
                p.neurons.to_string(),
                p.p_max.to_string(),
                fmt_num(p.scale),
                fmt_num(p.alpha_eff),
            ]
        })
        .collect();
    let mut out = table(&headers, &rows, format);
    if format == OutputFormat::Markdown {
        if let Some(fit) = &result.fit {
            let _ = writeln!(
                out,
                "\nFit: p_max ≈ {} · N^{}, R² = {}",
                fmt_num(fit.prefactor),
                fmt_num(fit.exponent),
                fmt_num(fit.r_squared)
            );
        }
    }
    out
}

/// Writes rendered text to `path`, or to stdout when `path` is `None`.
/// Returns the number of bytes written.
pub fn emit(text: &str, path: Option<&Path>) -> std::io::Result<usize> {
    match path {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(text.len())
}

pub fn write_records(
    kind: ExperimentKind,
    records: &[ExperimentRecord],
    format: OutputFormat,
    path: Option<&Path>,
) -> std::io::Result<usize> {
    emit(&render_records(kind, records, format), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dam_core::experiments::{run_experiment, ExperimentGrid, GridAxes};

    #[test]
    fn g_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(0.158095238), "0.158095");
        assert_eq!(fmt_num(123456.7), "123457");
        assert_eq!(fmt_num(1234567.0), "1.23457e+06");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(0.00001234), "1.234e-05");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(999999.5), "1e+06");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333");
    }

    #[test]
    fn empty_records_give_header_only() {
        let csv = render_records(ExperimentKind::Adversarial, &[], OutputFormat::Csv);
        assert_eq!(
            csv,
            "N,p,beta,gamma,adversary,rho,trials,success_rate,ci_low,ci_high\n"
        );
    }

    #[test]
    fn csv_round_trip_at_six_digits() {
        let axes = GridAxes {
            neurons: vec![60],
            pattern_counts: vec![20],
            rhos: vec![0.0, 0.13],
            ..GridAxes::default()
        };
        let grid = ExperimentGrid::new(ExperimentKind::Adversarial, axes, 7, 5);
        let records = run_experiment(&grid).unwrap();
        let csv = render_records(ExperimentKind::Adversarial, &records, OutputFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), records.len() + 1);
        for (line, r) in lines[1..].iter().zip(&records) {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| f[i].parse::<f64>().unwrap();
            let six = |x: f64| fmt_num(x).parse::<f64>().unwrap();
            assert_eq!(num(0), r.point.neurons as f64);
            assert_eq!(num(2), six(r.beta_measured.unwrap()));
            assert_eq!(num(5), six(r.point.adversary.as_ref().unwrap().rho));
            assert_eq!(num(7), six(r.success_rate));
            assert_eq!(num(8), six(r.ci.unwrap().0));
            assert_eq!(num(9), six(r.ci.unwrap().1));
            assert!(
                ((num(7) - r.success_rate) / r.success_rate.max(1e-300)).abs() < 1e-5
                    || r.success_rate == 0.0
            );
        }
        let md = render_records(
            ExperimentKind::Adversarial,
            &records,
            OutputFormat::Markdown,
        );
        assert!(md.starts_with("| N | p | beta |"));
    }
}
