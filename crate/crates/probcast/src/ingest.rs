//! Dataset loading and saving.
//!
//! The on-disk format is a single CSV with header
//! `date,hour,observed,f1,...,fM`: one row per delivery hour, holding the
//! observed price and the M ensemble member forecasts. Hours run 1..=24.
//!
//! A loaded [`Dataset`] is rectangular: every hour that appears on any day
//! must appear on every day, with a uniform ensemble size. Daylight-saving
//! clock changes break that shape twice a year — the duplicated hour in
//! autumn and the missing hour in spring — and `merge_dst` repairs exactly
//! those two defects (averaging duplicates member-wise, imputing a missing
//! hour from its two same-day neighbours). Any other hole is reported as an
//! error rather than silently patched.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::domain::ForecastRecord;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("no data rows")]
    Empty,
    #[error("duplicate entry for {day} hour {hour} (pass --merge-dst to average clock-change duplicates)")]
    Duplicate { day: NaiveDate, hour: u32 },
    #[error("missing entries: {0}")]
    Missing(String),
    #[error("{day} hour {hour} has {got} members, expected {expected}")]
    MixedMembers { day: NaiveDate, hour: u32, got: usize, expected: usize },
}

/// A rectangular panel of forecast records, organized as one day-ordered
/// series per delivery hour.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    hours: BTreeMap<u32, Vec<ForecastRecord>>,
    members: usize,
}

impl Dataset {
    /// Groups loose records into per-hour series and checks the rectangular
    /// contract: no duplicates, uniform ensemble size, identical day sets
    /// across hours.
    pub fn from_records(records: Vec<ForecastRecord>) -> Result<Self, IngestError> {
        let first = records.first().ok_or(IngestError::Empty)?;
        let members = first.ensemble().len();
        let mut hours: BTreeMap<u32, Vec<ForecastRecord>> = BTreeMap::new();
        for r in records {
            if r.ensemble().len() != members {
                return Err(IngestError::MixedMembers {
                    day: r.day(),
                    hour: r.hour(),
                    got: r.ensemble().len(),
                    expected: members,
                });
            }
            hours.entry(r.hour()).or_default().push(r);
        }
        let mut day_sets: Vec<BTreeSet<NaiveDate>> = Vec::new();
        for series in hours.values_mut() {
            series.sort_by_key(ForecastRecord::day);
            for pair in series.windows(2) {
                if pair[0].day() == pair[1].day() {
                    return Err(IngestError::Duplicate { day: pair[0].day(), hour: pair[0].hour() });
                }
            }
            day_sets.push(series.iter().map(ForecastRecord::day).collect());
        }
        let all_days: BTreeSet<NaiveDate> = day_sets.iter().flatten().copied().collect();
        let mut missing = Vec::new();
        for (hour, days) in hours.keys().zip(&day_sets) {
            for day in all_days.difference(days) {
                missing.push((*day, *hour));
            }
        }
        if !missing.is_empty() {
            missing.sort();
            return Err(IngestError::Missing(describe_missing(&missing)));
        }
        Ok(Self { hours, members })
    }

    /// Delivery hours present in the dataset, ascending.
    pub fn hours(&self) -> impl Iterator<Item = u32> + '_ {
        self.hours.keys().copied()
    }

    /// The day-ordered record series for one delivery hour.
    pub fn series(&self, hour: u32) -> Option<&[ForecastRecord]> {
        self.hours.get(&hour).map(Vec::as_slice)
    }

    /// Ensemble size M.
    pub fn members(&self) -> usize {
        self.members
    }

    /// Distinct days, ascending. Identical for every hour.
    pub fn days(&self) -> Vec<NaiveDate> {
        self.hours
            .values()
            .next()
            .map(|series| series.iter().map(ForecastRecord::day).collect())
            .unwrap_or_default()
    }

    /// Total number of records.
    pub fn len(&self) -> usize {
        self.hours.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    /// All records in day-major order: day ascending, hour ascending.
    pub fn all_records(&self) -> Vec<&ForecastRecord> {
        let mut out: Vec<&ForecastRecord> = self.hours.values().flatten().collect();
        out.sort_by_key(|r| (r.day(), r.hour()));
        out
    }
}

fn describe_missing(missing: &[(NaiveDate, u32)]) -> String {
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
    text
}

/// One parsed CSV row before merging.
struct RawRow {
    observed: f64,
    ensemble: Vec<f64>,
}

/// Loads a dataset CSV. With `merge_dst`, duplicated (day, hour) rows are
/// averaged member-wise and a missing hour flanked by both same-day
/// neighbours is imputed as their member-wise mean.
pub fn load_dataset(path: &Path, merge_dst: bool) -> Result<Dataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => IngestError::Io {
                path: path.display().to_string(),
                source: match e.into_kind() {
                    csv::ErrorKind::Io(io) => io,
                    _ => unreachable!("kind checked above"),
                },
            },
            _ => IngestError::Csv(e),
        })?;
    let members = check_header(reader.headers()?)?;
    let mut cells: BTreeMap<(NaiveDate, u32), Vec<RawRow>> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(i as u64 + 2, |p| p.line());
        let fail = |message: String| IngestError::Row { line, message };
        let day: NaiveDate = row[0]
            .parse()
            .map_err(|e| fail(format!("bad date '{}': {e}", &row[0])))?;
        let hour: u32 = row[1]
            .parse()
            .map_err(|e| fail(format!("bad hour '{}': {e}", &row[1])))?;
        let observed: f64 = row[2]
            .parse()
            .map_err(|e| fail(format!("bad observed price '{}': {e}", &row[2])))?;
        let mut ensemble = Vec::with_capacity(members);
        for j in 0..members {
            let value: f64 = row[3 + j]
                .parse()
                .map_err(|e| fail(format!("bad forecast f{} '{}': {e}", j + 1, &row[3 + j])))?;
            ensemble.push(value);
        }
        cells.entry((day, hour)).or_default().push(RawRow { observed, ensemble });
    }
    if cells.is_empty() {
        return Err(IngestError::Empty);
    }
    let mut merged: BTreeMap<(NaiveDate, u32), RawRow> = BTreeMap::new();
    for ((day, hour), rows) in cells {
        if rows.len() > 1 && !merge_dst {
            return Err(IngestError::Duplicate { day, hour });
        }
        merged.insert((day, hour), average_rows(rows, members));
    }
    if merge_dst {
        impute_missing_hours(&mut merged, members);
    }
    let mut records = Vec::with_capacity(merged.len());
    for ((day, hour), row) in merged {
        let record = ForecastRecord::new(day, hour, row.observed, row.ensemble).map_err(|e| {
            IngestError::Row { line: 0, message: format!("{day} hour {hour}: {e}") }
        })?;
        records.push(record);
    }
    Dataset::from_records(records)
}

/// Member-wise mean of duplicated rows.
fn average_rows(rows: Vec<RawRow>, members: usize) -> RawRow {
    if rows.len() == 1 {
        return rows.into_iter().next().expect("one row");
    }
    let n = rows.len() as f64;
    let mut observed = 0.0;
    let mut ensemble = vec![0.0; members];
    for row in &rows {
        observed += row.observed;
        for (acc, v) in ensemble.iter_mut().zip(&row.ensemble) {
            *acc += v;
        }
    }
    observed /= n;
    ensemble.iter_mut().for_each(|v| *v /= n);
    RawRow { observed, ensemble }
}

/// Fills a (day, hour) hole with the member-wise mean of hours h-1 and h+1
/// on the same day, when both exist. Hours only appear as candidates if some
/// other day has them, so an entirely absent hour is never invented.
fn impute_missing_hours(merged: &mut BTreeMap<(NaiveDate, u32), RawRow>, members: usize) {
    let hours: BTreeSet<u32> = merged.keys().map(|(_, h)| *h).collect();
    let days: BTreeSet<NaiveDate> = merged.keys().map(|(d, _)| *d).collect();
    let mut fills = Vec::new();
    for &day in &days {
        for &hour in &hours {
            if merged.contains_key(&(day, hour)) {
                continue;
            }
            let below = hour.checked_sub(1).and_then(|h| merged.get(&(day, h)));
            let above = merged.get(&(day, hour + 1));
            if let (Some(lo), Some(hi)) = (below, above) {
                let mut ensemble = vec![0.0; members];
                for (v, (a, b)) in ensemble.iter_mut().zip(lo.ensemble.iter().zip(&hi.ensemble)) {
                    *v = 0.5 * (a + b);
                }
                let observed = 0.5 * (lo.observed + hi.observed);
                log::info!("imputing {day} hour {hour} from its neighbouring hours");
                fills.push(((day, hour), RawRow { observed, ensemble }));
            }
        }
    }
    for (key, row) in fills {
        merged.insert(key, row);
    }
}

fn check_header(header: &csv::StringRecord) -> Result<usize, IngestError> {
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 4 {
        return Err(IngestError::Header(format!(
            "expected at least 4 columns (date,hour,observed,f1), found {}",
            fields.len()
        )));
    }
    for (i, want) in ["date", "hour", "observed"].iter().enumerate() {
        if fields[i] != *want {
            return Err(IngestError::Header(format!(
                "column {} is '{}', expected '{want}'",
                i + 1,
                fields[i]
            )));
        }
    }
    for (j, field) in fields[3..].iter().enumerate() {
        let want = format!("f{}", j + 1);
        if *field != want {
            return Err(IngestError::Header(format!(
                "column {} is '{field}', expected '{want}'",
                j + 4
            )));
        }
    }
    Ok(fields.len() - 3)
}

/// Writes a dataset back to CSV in day-major order. Floats use the shortest
/// representation that round-trips, so save-then-load is the identity.
pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => IngestError::Io {
            path: path.display().to_string(),
            source: match e.into_kind() {
                csv::ErrorKind::Io(io) => io,
                _ => unreachable!("kind checked above"),
            },
        },
        _ => IngestError::Csv(e),
    })?;
    let mut header = vec!["date".to_string(), "hour".to_string(), "observed".to_string()];
    header.extend((1..=dataset.members()).map(|j| format!("f{j}")));
    writer.write_record(&header)?;
    let mut row = Vec::with_capacity(3 + dataset.members());
    for record in dataset.all_records() {
        row.clear();
        row.push(record.day().to_string());
        row.push(record.hour().to_string());
        row.push(format!("{}", record.observed()));
        row.extend(record.ensemble().iter().map(|v| format!("{v}")));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| IngestError::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn day(text: &str) -> NaiveDate {
        text.parse().unwrap()
    }

    fn write_csv(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn roundtrip_is_identity() {
        let records = vec![
            ForecastRecord::new(day("2021-01-01"), 1, 40.25, vec![39.0, 41.5]).unwrap(),
            ForecastRecord::new(day("2021-01-01"), 2, 38.0, vec![37.1, 40.0]).unwrap(),
            ForecastRecord::new(day("2021-01-02"), 1, 0.1, vec![-5.75, 3.0]).unwrap(),
            ForecastRecord::new(day("2021-01-02"), 2, 42.0, vec![40.0, 44.333333333333336]).unwrap(),
        ];
        let dataset = Dataset::from_records(records).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        save_dataset(&path, &dataset).unwrap();
        let loaded = load_dataset(&path, false).unwrap();
        assert_eq!(loaded, dataset);
        // Shortest float formatting: no trailing digit noise.
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("0.1"), "{text}");
        assert!(!text.contains("0.10000000000000001"), "{text}");
    }

    #[test]
    fn loads_unordered_rows_into_sorted_series() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            &dir,
            "d.csv",
            "date,hour,observed,f1\n\
             2021-01-02,1,2,20\n\
             2021-01-01,2,3,30\n\
             2021-01-01,1,1,10\n\
             2021-01-02,2,4,40\n",
        );
        let data = load_dataset(&path, false).unwrap();
        assert_eq!(data.members(), 1);
        assert_eq!(data.hours().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(data.days(), vec![day("2021-01-01"), day("2021-01-02")]);
        let hour1 = data.series(1).unwrap();
        assert_eq!(hour1[0].observed(), 1.0);
        assert_eq!(hour1[1].observed(), 2.0);
        assert_eq!(data.len(), 4);
    }

    #[test]
    fn duplicate_rows_error_without_merge_and_average_with_it() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            &dir,
            "d.csv",
            "date,hour,observed,f1,f2\n\
             2021-10-31,1,10,1,2\n\
             2021-10-31,3,30,5,6\n\
             2021-10-31,3,40,7,10\n\
             2021-10-31,2,20,3,4\n",
        );
        let err = load_dataset(&path, false).unwrap_err();
        assert!(matches!(err, IngestError::Duplicate { hour: 3, .. }), "{err}");
        let data = load_dataset(&path, true).unwrap();
        let hour3 = &data.series(3).unwrap()[0];
        assert_eq!(hour3.observed(), 35.0);
        assert_eq!(hour3.ensemble(), &[6.0, 8.0]);
    }

    #[test]
    fn missing_hour_is_imputed_from_neighbours_only_with_merge() {
        // Hour 3 is absent on the second day (spring clock change); hours 2
        // and 4 flank it.
        let mut rows = String::from("date,hour,observed,f1\n");
        for h in 1..=4 {
            rows.push_str(&format!("2021-03-27,{h},{},{}\n", h * 10, h));
        }
        for h in [1u32, 2, 4] {
            rows.push_str(&format!("2021-03-28,{h},{},{}\n", h * 100, h * 10));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(&dir, "d.csv", &rows);
        let err = load_dataset(&path, false).unwrap_err();
        assert!(matches!(err, IngestError::Missing(_)), "{err}");
        assert!(err.to_string().contains("2021-03-28 hour 3"), "{err}");
        let data = load_dataset(&path, true).unwrap();
        let imputed = &data.series(3).unwrap()[1];
        assert_eq!(imputed.observed(), 300.0); // mean of 200 and 400
        assert_eq!(imputed.ensemble(), &[30.0]); // mean of 20 and 40
    }

    #[test]
    fn missing_boundary_hour_is_not_imputed() {
        // Hour 1 has no lower neighbour, so even with merge the hole remains.
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            &dir,
            "d.csv",
            "date,hour,observed,f1\n\
             2021-01-01,1,1,1\n\
             2021-01-01,2,2,2\n\
             2021-01-02,2,4,4\n",
        );
        let err = load_dataset(&path, true).unwrap_err();
        assert!(matches!(err, IngestError::Missing(_)), "{err}");
        assert!(err.to_string().contains("2021-01-02 hour 1"), "{err}");
    }

    #[test]
    fn header_and_field_errors_carry_positions() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = write_csv(&dir, "h.csv", "day,hour,observed,f1\n2021-01-01,1,1,1\n");
        assert!(matches!(load_dataset(&bad_header, false), Err(IngestError::Header(_))));

        let bad_member = write_csv(&dir, "m.csv", "date,hour,observed,f1,g2\n");
        let err = load_dataset(&bad_member, false).unwrap_err();
        assert!(err.to_string().contains("'g2', expected 'f2'"), "{err}");

        let bad_value = write_csv(
            &dir,
            "v.csv",
            "date,hour,observed,f1\n2021-01-01,1,1,1\n2021-01-02,1,oops,1\n",
        );
        let err = load_dataset(&bad_value, false).unwrap_err();
        assert!(matches!(err, IngestError::Row { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("oops"), "{err}");

        let bad_hour = write_csv(&dir, "w.csv", "date,hour,observed,f1\n2021-01-01,25,1,1\n");
        let err = load_dataset(&bad_hour, false).unwrap_err();
        assert!(err.to_string().contains("hour 25"), "{err}");
    }

    #[test]
    fn empty_and_absent_files_error() {
        let dir = tempfile::tempdir().unwrap();
        let empty = write_csv(&dir, "e.csv", "date,hour,observed,f1\n");
        assert!(matches!(load_dataset(&empty, false), Err(IngestError::Empty)));
        let absent = dir.path().join("nope.csv");
        assert!(matches!(load_dataset(&absent, false), Err(IngestError::Io { .. })));
    }

    #[test]
    fn mixed_member_counts_are_rejected() {
        let records = vec![
            ForecastRecord::new(day("2021-01-01"), 1, 1.0, vec![1.0]).unwrap(),
            ForecastRecord::new(day("2021-01-02"), 1, 2.0, vec![1.0, 2.0]).unwrap(),
        ];
        assert!(matches!(
            Dataset::from_records(records),
            Err(IngestError::MixedMembers { expected: 1, got: 2, .. })
        ));
    }
}
