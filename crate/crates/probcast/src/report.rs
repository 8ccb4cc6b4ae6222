//! Scoring backtest forecasts and persisting forecast artifacts.
//!
//! The scoring half joins per-method quantile curves with the observed
//! prices, computes interval diagnostics (PIPS, ACE, tail bias) at the
//! requested nominal levels plus overall and per-year CRPS, and attaches
//! conditional-predictive-ability p-values against a reference method.
//!
//! The persistence half defines the on-disk CSV formats for curves
//! (`date,hour,q01..q99`) and regression coefficients
//! (`date,hour,tau,beta0..betaM`), plus the JSON/CSV score outputs, all with
//! shortest round-trip float formatting so reruns are byte-comparable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::backtest::{CoefficientRow, CurveRow, MethodForecasts};
use crate::domain::{interval_from_curve, DomainError, QuantileCurve, GRID_LEN};
use crate::ingest::Dataset;
use crate::methods::{MethodKind, TauCoefficients};
use crate::metrics::{
    ace, cpa_test, crps, pips_from_interval, tail_bias, LevelScores, MetricsError, ScoreReport,
    YearCrps,
};

/// p-value below which a loss difference earns one star.
pub const STAR_P: f64 = 0.05;
/// p-value below which a loss difference earns two stars.
pub const STRONG_STAR_P: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot encode scores: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("no forecasts to score")]
    NoForecasts,
    #[error("forecast set contains no evaluation points")]
    NoPoints,
    #[error("method {0} appears twice")]
    DuplicateMethod(MethodKind),
    #[error("methods {a} and {b} cover different (day, hour) points")]
    MisalignedMethods { a: MethodKind, b: MethodKind },
    #[error("reference method {0} is not among the scored methods")]
    ReferenceMissing(MethodKind),
    #[error("no observations for: {0}")]
    MissingObservations(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Per-method loss series shared by the score assembly below.
struct Artifacts {
    crps_points: Vec<f64>,
    /// One (intervals, pips) pair per nominal level, point-aligned.
    per_level: Vec<(Vec<crate::domain::PredictionInterval>, Vec<f64>)>,
}

fn collect_artifacts(
    forecasts: &MethodForecasts,
    alphas: &[f64],
    observed: &[f64],
) -> Result<Artifacts, ReportError> {
    let mut crps_points = Vec::with_capacity(observed.len());
    for (row, &p) in forecasts.curves.iter().zip(observed) {
        crps_points.push(crps(&row.curve, p));
    }
    let mut per_level = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut intervals = Vec::with_capacity(observed.len());
        let mut pips = Vec::with_capacity(observed.len());
        for (row, &p) in forecasts.curves.iter().zip(observed) {
            let interval = interval_from_curve(&row.curve, alpha)?;
            pips.push(pips_from_interval(&interval, p));
            intervals.push(interval);
        }
        per_level.push((intervals, pips));
    }
    Ok(Artifacts { crps_points, per_level })
}

/// p-value of the conditional-predictive-ability test, or `None` when the
/// series is too short to instrument.
fn cpa_p(method: &[f64], reference: &[f64]) -> Result<Option<f64>, ReportError> {
    match cpa_test(method, reference) {
        Ok(result) => Ok(Some(result.p_value)),
        Err(MetricsError::TooShort { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn mean(values: &[f64]) -> f64 {
    // Adding +0.0 normalizes a negative-zero mean (all-exact forecasts) so
    // reports never print "-0".
    values.iter().sum::<f64>() / values.len() as f64 + 0.0
}

/// Scores every method against the observations in `dataset`.
///
/// All methods must cover exactly the same (day, hour) points, and every
/// point must have an observation. The reference method anchors the CPA
/// columns; its own report carries no p-values.
pub fn score_methods(
    forecasts: &[MethodForecasts],
    dataset: &Dataset,
    alphas: &[f64],
    reference: MethodKind,
) -> Result<Vec<ScoreReport>, ReportError> {
    if forecasts.is_empty() {
        return Err(ReportError::NoForecasts);
    }
    for (i, f) in forecasts.iter().enumerate() {
        if forecasts[..i].iter().any(|g| g.kind == f.kind) {
            return Err(ReportError::DuplicateMethod(f.kind));
        }
    }
    let reference_index = forecasts
        .iter()
        .position(|f| f.kind == reference)
        .ok_or(ReportError::ReferenceMissing(reference))?;
    let keys: Vec<(NaiveDate, u32)> =
        forecasts[0].curves.iter().map(|r| (r.day, r.hour)).collect();
    if keys.is_empty() {
        return Err(ReportError::NoPoints);
    }
    for f in &forecasts[1..] {
        if f.curves.len() != keys.len()
            || f.curves.iter().zip(&keys).any(|(r, k)| (r.day, r.hour) != *k)
        {
            return Err(ReportError::MisalignedMethods { a: forecasts[0].kind, b: f.kind });
        }
    }

    let mut lookup: BTreeMap<(NaiveDate, u32), f64> = BTreeMap::new();
    for record in dataset.all_records() {
        lookup.insert((record.day(), record.hour()), record.observed());
    }
    let mut observed = Vec::with_capacity(keys.len());
    let mut missing = Vec::new();
    for key in &keys {
        match lookup.get(key) {
            Some(&p) => observed.push(p),
            None => missing.push(*key),
        }
    }
    if !missing.is_empty() {
        let mut text = String::new();
        for (day, hour) in missing.iter().take(5) {
            if !text.is_empty() {
                text.push_str(", ");
            }
            let _ = write!(text, "{day} hour {hour}");
        }
        if missing.len() > 5 {
            let _ = write!(text, " and {} more", missing.len() - 5);
        }
        return Err(ReportError::MissingObservations(text));
    }

    let artifacts: Vec<Artifacts> = forecasts
        .iter()
        .map(|f| collect_artifacts(f, alphas, &observed))
        .collect::<Result<_, _>>()?;
    // Points grouped by calendar year, in key order within each year.
    let mut year_points: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, (day, _)) in keys.iter().enumerate() {
        year_points.entry(day.year()).or_default().push(i);
    }

    let reference_artifacts = &artifacts[reference_index];
    let mut reports = Vec::with_capacity(forecasts.len());
    for (i, f) in forecasts.iter().enumerate() {
        let own = &artifacts[i];
        let is_reference = i == reference_index;
        let mut levels = Vec::with_capacity(alphas.len());
        for (li, &alpha) in alphas.iter().enumerate() {
            let (intervals, pips) = &own.per_level[li];
            let cpa_p_value = if is_reference {
                None
            } else {
                cpa_p(pips, &reference_artifacts.per_level[li].1)?
            };
            levels.push(LevelScores {
                nominal_level: 1.0 - alpha,
                ace: ace(intervals, &observed)?,
                tail_bias: tail_bias(intervals, &observed)?,
                mean_pips: mean(pips),
                cpa_p_value,
            });
        }
        let crps_cpa_p_value = if is_reference {
            None
        } else {
            cpa_p(&own.crps_points, &reference_artifacts.crps_points)?
        };
        let mut per_year = Vec::with_capacity(year_points.len());
        for (&year, indices) in &year_points {
            let own_year: Vec<f64> = indices.iter().map(|&k| own.crps_points[k]).collect();
            let cpa_p_value = if is_reference {
                None
            } else {
                let reference_year: Vec<f64> =
                    indices.iter().map(|&k| reference_artifacts.crps_points[k]).collect();
                cpa_p(&own_year, &reference_year)?
            };
            per_year.push(YearCrps {
                year,
                points: indices.len(),
                mean_crps: mean(&own_year),
                cpa_p_value,
            });
        }
        reports.push(ScoreReport {
            method: f.kind.name().to_string(),
            reference: (!is_reference).then(|| reference.name().to_string()),
            points: keys.len(),
            levels,
            mean_crps: mean(&own.crps_points),
            crps_cpa_p_value,
            per_year,
        });
    }
    Ok(reports)
}

/// Significance marker for a method-versus-reference comparison. Stars only
/// appear when the reference has the *lower* mean loss and the test rejects:
/// they flag methods the reference significantly outperforms.
pub fn stars(p_value: Option<f64>, method_loss: f64, reference_loss: f64) -> &'static str {
    match p_value {
        Some(p) if method_loss > reference_loss && p < STRONG_STAR_P => "**",
        Some(p) if method_loss > reference_loss && p < STAR_P => "*",
        _ => "",
    }
}

fn io_error(path: &Path, e: csv::Error) -> ReportError {
    match e.kind() {
        csv::ErrorKind::Io(_) => ReportError::Io {
            path: path.display().to_string(),
            source: match e.into_kind() {
                csv::ErrorKind::Io(io) => io,
                _ => unreachable!("kind checked above"),
            },
        },
        _ => ReportError::Csv(e),
    }
}

/// Writes curve rows as `date,hour,q01..q99`.
pub fn write_curves_csv(path: &Path, rows: &[CurveRow]) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let mut header = vec!["date".to_string(), "hour".to_string()];
    header.extend((1..=GRID_LEN).map(|i| format!("q{i:02}")));
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(2 + GRID_LEN);
    for row in rows {
        record.clear();
        record.push(row.day.to_string());
        record.push(row.hour.to_string());
        record.extend(row.curve.values().iter().map(|v| format!("{v}")));
        writer.write_record(&record)?;
    }
    writer
        .flush()
        .map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })
}

/// Reads curve rows written by [`write_curves_csv`], re-validating every
/// curve.
pub fn read_curves_csv(path: &Path) -> Result<Vec<CurveRow>, ReportError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header = reader.headers()?;
    let expected: Vec<String> = ["date", "hour"]
        .into_iter()
        .map(str::to_string)
        .chain((1..=GRID_LEN).map(|i| format!("q{i:02}")))
        .collect();
    if header.len() != expected.len() || header.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(ReportError::Header(format!(
            "expected 'date,hour,q01..q{GRID_LEN}' in {}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line());
        let fail = |message: String| ReportError::Row { line, message };
        let day: NaiveDate =
            record[0].parse().map_err(|e| fail(format!("bad date '{}': {e}", &record[0])))?;
        let hour: u32 =
            record[1].parse().map_err(|e| fail(format!("bad hour '{}': {e}", &record[1])))?;
        let mut values = [0.0; GRID_LEN];
        for (j, value) in values.iter_mut().enumerate() {
            *value = record[2 + j]
                .parse()
                .map_err(|e| fail(format!("bad quantile '{}': {e}", &record[2 + j])))?;
        }
        let curve = QuantileCurve::new(values).map_err(|e| fail(e.to_string()))?;
        rows.push(CurveRow { day, hour, curve });
    }
    Ok(rows)
}

/// Writes coefficient rows as `date,hour,tau,beta0,beta1..betaM`.
pub fn write_coefficients_csv(
    path: &Path,
    rows: &[CoefficientRow],
    members: usize,
) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let mut header = vec!["date".to_string(), "hour".to_string(), "tau".to_string()];
    header.extend((0..=members).map(|j| format!("beta{j}")));
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(4 + members);
    for row in rows {
        record.clear();
        record.push(row.day.to_string());
        record.push(row.hour.to_string());
        record.push(format!("{}", row.coefficients.tau));
        record.push(format!("{}", row.coefficients.intercept));
        record.extend(row.coefficients.slopes.iter().map(|v| format!("{v}")));
        writer.write_record(&record)?;
    }
    writer
        .flush()
        .map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })
}

/// Reads coefficient rows written by [`write_coefficients_csv`]; returns the
/// rows and the member count M taken from the header.
pub fn read_coefficients_csv(path: &Path) -> Result<(Vec<CoefficientRow>, usize), ReportError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.len() < 4
        || header[..3] != ["date", "hour", "tau"]
        || header[3..]
            .iter()
            .enumerate()
            .any(|(j, name)| *name != format!("beta{j}"))
    {
        return Err(ReportError::Header(format!(
            "expected 'date,hour,tau,beta0..betaM' in {}",
            path.display()
        )));
    }
    let members = header.len() - 4;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line());
        let fail = |message: String| ReportError::Row { line, message };
        let day: NaiveDate =
            record[0].parse().map_err(|e| fail(format!("bad date '{}': {e}", &record[0])))?;
        let hour: u32 =
            record[1].parse().map_err(|e| fail(format!("bad hour '{}': {e}", &record[1])))?;
        let tau: f64 =
            record[2].parse().map_err(|e| fail(format!("bad tau '{}': {e}", &record[2])))?;
        let intercept: f64 = record[3]
            .parse()
            .map_err(|e| fail(format!("bad beta0 '{}': {e}", &record[3])))?;
        let mut slopes = Vec::with_capacity(members);
        for j in 0..members {
            let value: f64 = record[4 + j]
                .parse()
                .map_err(|e| fail(format!("bad beta{} '{}': {e}", j + 1, &record[4 + j])))?;
            slopes.push(value);
        }
        rows.push(CoefficientRow {
            day,
            hour,
            coefficients: TauCoefficients { tau, intercept, slopes },
        });
    }
    Ok((rows, members))
}

/// Writes a selection-frequency matrix as `tau,m1..mM`: one row per grid
/// level, cells in percent.
pub fn write_selection_csv(
    path: &Path,
    frequency: &crate::methods::SelectionFrequency,
) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let mut header = vec!["tau".to_string()];
    header.extend((1..=frequency.members).map(|j| format!("m{j}")));
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(1 + frequency.members);
    for (i, row) in frequency.matrix.iter().enumerate() {
        record.clear();
        record.push(format!("{}", crate::domain::tau_at(i)));
        record.extend(row.iter().map(|v| format!("{v}")));
        writer.write_record(&record)?;
    }
    writer
        .flush()
        .map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })
}

/// Writes the full reports as pretty-printed JSON.
pub fn write_reports_json(path: &Path, reports: &[ScoreReport]) -> Result<(), ReportError> {
    let file = std::fs::File::create(path)
        .map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })?;
    let mut writer = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, reports)?;
    use std::io::Write;
    writeln!(writer)
        .map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })
}

fn write_option(p: Option<f64>) -> String {
    p.map(|v| format!("{v}")).unwrap_or_default()
}

/// Locates the reference report named by the others, if any.
fn reference_report<'a>(reports: &'a [ScoreReport]) -> Option<&'a ScoreReport> {
    let name = reports.iter().find_map(|r| r.reference.as_deref())?;
    reports.iter().find(|r| r.method == name)
}

/// Long-format per-level diagnostics:
/// `method,nominal_level,mean_pips,ace,tail_bias,cpa_p_value,significance`.
pub fn write_levels_csv(path: &Path, reports: &[ScoreReport]) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    writer.write_record([
        "method",
        "nominal_level",
        "mean_pips",
        "ace",
        "tail_bias",
        "cpa_p_value",
        "significance",
    ])?;
    let reference = reference_report(reports);
    for report in reports {
        for level in &report.levels {
            let marks = reference
                .and_then(|r| {
                    r.levels.iter().find(|l| l.nominal_level == level.nominal_level)
                })
                .map_or("", |r| stars(level.cpa_p_value, level.mean_pips, r.mean_pips));
            writer.write_record([
                report.method.as_str(),
                &format!("{}", level.nominal_level),
                &format!("{}", level.mean_pips),
                &format!("{}", level.ace),
                &format!("{}", level.tail_bias),
                &write_option(level.cpa_p_value),
                marks,
            ])?;
        }
    }
    writer
        .flush()
        .map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })
}

/// Long-format CRPS results, one `all` row plus one row per year:
/// `method,year,points,mean_crps,cpa_p_value,significance`.
pub fn write_crps_csv(path: &Path, reports: &[ScoreReport]) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    writer.write_record(["method", "year", "points", "mean_crps", "cpa_p_value", "significance"])?;
    let reference = reference_report(reports);
    for report in reports {
        let overall_marks = reference.map_or("", |r| {
            stars(report.crps_cpa_p_value, report.mean_crps, r.mean_crps)
        });
        writer.write_record([
            report.method.as_str(),
            "all",
            &report.points.to_string(),
            &format!("{}", report.mean_crps),
            &write_option(report.crps_cpa_p_value),
            overall_marks,
        ])?;
        for year in &report.per_year {
            let marks = reference
                .and_then(|r| r.per_year.iter().find(|y| y.year == year.year))
                .map_or("", |r| stars(year.cpa_p_value, year.mean_crps, r.mean_crps));
            writer.write_record([
                report.method.as_str(),
                &year.year.to_string(),
                &year.points.to_string(),
                &format!("{}", year.mean_crps),
                &write_option(year.cpa_p_value),
                marks,
            ])?;
        }
    }
    writer
        .flush()
        .map_err(|e| ReportError::Io { path: path.display().to_string(), source: e })
}

/// Human-readable score table for terminal output.
pub fn format_summary(reports: &[ScoreReport]) -> String {
    let reference = reference_report(reports);
    let mut out = String::new();
    let _ = writeln!(out, "{:<6} {:>8} {:>12}  per-level (nominal: PIPS ACE TB)", "method", "points", "CRPS");
    for report in reports {
        let marks = reference.map_or("", |r| {
            stars(report.crps_cpa_p_value, report.mean_crps, r.mean_crps)
        });
        let _ = write!(
            out,
            "{:<6} {:>8} {:>12.4}{:<2}",
            report.method, report.points, report.mean_crps, marks
        );
        for level in &report.levels {
            let level_marks = reference
                .and_then(|r| {
                    r.levels.iter().find(|l| l.nominal_level == level.nominal_level)
                })
                .map_or("", |r| stars(level.cpa_p_value, level.mean_pips, r.mean_pips));
            let _ = write!(
                out,
                "  [{:.0}%: {:.4}{} {:+.3} {:+.2}]",
                100.0 * level.nominal_level,
                level.mean_pips,
                level_marks,
                level.ace,
                level.tail_bias
            );
        }
        out.push('\n');
    }
    out
}
