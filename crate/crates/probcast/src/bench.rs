//! Timing benchmark: the cost of producing one day of forecasts.
//!
//! Each method forecasts every delivery hour of the dataset's final day from
//! a trailing calibration window, fitting all 99 levels. Regression methods
//! run with one independent solve per level so that timings reflect the cost
//! of 99 per-level models rather than shared-basis shortcuts. Methods are
//! interleaved across repeats and the best time per method is reported,
//! which damps scheduler noise; file IO never enters the timed region.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::domain::{CalibrationWindow, DomainError};
use crate::ingest::Dataset;
use crate::methods::{fit_predict, FitStrategy, MethodError, MethodKind, MethodSpec};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no methods selected")]
    NoMethods,
    #[error("repeats must be positive")]
    BadRepeats,
    #[error("dataset spans {days} days, need more than the {window_len}-day window")]
    DatasetTooShort { days: usize, window_len: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{method}: {source}")]
    Method {
        method: MethodKind,
        #[source]
        source: MethodError,
    },
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Methods to time; sorted canonically, duplicates removed.
    pub methods: Vec<MethodKind>,
    /// Trailing calibration window length in days.
    pub window_len: usize,
    /// Timed passes per method.
    pub repeats: usize,
}

/// Timings for one method.
#[derive(Debug, Clone, Serialize)]
pub struct BenchEntry {
    pub method: MethodKind,
    /// Wall-clock seconds per repeat, in execution order.
    pub seconds: Vec<f64>,
}

impl BenchEntry {
    /// Best (smallest) time across repeats: the least-disturbed measurement.
    pub fn best(&self) -> f64 {
        self.seconds.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Benchmark results plus the workload shape they were measured on.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub window_len: usize,
    pub members: usize,
    pub hours: usize,
    pub repeats: usize,
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    /// Best time for one method, if it was benchmarked.
    pub fn seconds(&self, method: MethodKind) -> Option<f64> {
        self.entries.iter().find(|e| e.method == method).map(BenchEntry::best)
    }

    /// Human-readable cost-ordering checks between method families: the
    /// error-quantile methods should be cheapest, the distributional
    /// regression in between, the LP-based regressions dearest, and the
    /// penalty-grid search a multiple of a single regression.
    pub fn ordering_notes(&self) -> Vec<String> {
        use MethodKind::*;
        let mut notes = Vec::new();
        let mut faster = |a: MethodKind, b: MethodKind| {
            if let (Some(ta), Some(tb)) = (self.seconds(a), self.seconds(b)) {
                let verdict = if ta < tb { "ok" } else { "violated" };
                notes.push(format!("{a} < {b}: {verdict} ({ta:.4}s vs {tb:.4}s)"));
            }
        };
        for cheap in [Cp, Hs] {
            faster(cheap, Idr);
        }
        for regression in [Qra, Qrm, Iqra] {
            faster(Idr, regression);
            faster(regression, Lqra);
        }
        if let (Some(lqra), Some(qra)) = (self.seconds(Lqra), self.seconds(Qra)) {
            notes.push(format!("lqra / qra cost ratio: {:.1}", lqra / qra));
        }
        notes
    }
}

/// Times one day of forecasts per method.
pub fn run(dataset: &Dataset, config: &BenchConfig) -> Result<BenchReport, BenchError> {
    if config.repeats == 0 {
        return Err(BenchError::BadRepeats);
    }
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(BenchError::NoMethods);
    }
    let days = dataset.days();
    if days.len() <= config.window_len || config.window_len == 0 {
        return Err(BenchError::DatasetTooShort {
            days: days.len(),
            window_len: config.window_len,
        });
    }
    // The workload: for each hour, the final day as target with its trailing
    // window. Windows are built once, outside the timed region.
    let mut workload = Vec::new();
    for hour in dataset.hours() {
        let series = dataset.series(hour).expect("hour from this dataset");
        let target = series.last().expect("nonempty series");
        let start = series.len() - 1 - config.window_len;
        let window = CalibrationWindow::new(&series[start..series.len() - 1], target.day())?;
        workload.push((window, target));
    }

    let mut entries: Vec<BenchEntry> = methods
        .iter()
        .map(|&method| BenchEntry { method, seconds: Vec::with_capacity(config.repeats) })
        .collect();
    for _ in 0..config.repeats {
        for entry in entries.iter_mut() {
            let spec = MethodSpec::with_strategy(entry.method, FitStrategy::PerTau);
            let started = Instant::now();
            for (window, target) in &workload {
                let output = fit_predict(&spec, window, target)
                    .map_err(|source| BenchError::Method { method: entry.method, source })?;
                std::hint::black_box(&output);
            }
            entry.seconds.push(started.elapsed().as_secs_f64());
        }
    }
    Ok(BenchReport {
        window_len: config.window_len,
        members: dataset.members(),
        hours: workload.len(),
        repeats: config.repeats,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig, SynthRegime};

    fn small_dataset() -> Dataset {
        let mut config = SynthConfig::new(12, 3, 8, SynthRegime::GaussianEnsemble);
        config.hours = 2;
        generate(&config).unwrap()
    }

    #[test]
    fn times_every_method_in_canonical_order() {
        let data = small_dataset();
        let config = BenchConfig {
            methods: vec![MethodKind::Qrm, MethodKind::Cp, MethodKind::Cp],
            window_len: 8,
            repeats: 2,
        };
        let report = run(&data, &config).unwrap();
        assert_eq!(report.hours, 2);
        assert_eq!(report.members, 3);
        let kinds: Vec<MethodKind> = report.entries.iter().map(|e| e.method).collect();
        assert_eq!(kinds, vec![MethodKind::Cp, MethodKind::Qrm]);
        for entry in &report.entries {
            assert_eq!(entry.seconds.len(), 2);
            assert!(entry.best() > 0.0 && entry.best().is_finite());
        }
        assert!(report.seconds(MethodKind::Qrm).is_some());
        assert!(report.seconds(MethodKind::Lqra).is_none());
    }

    #[test]
    fn ordering_notes_cover_available_pairs() {
        let data = small_dataset();
        let config = BenchConfig {
            methods: vec![MethodKind::Cp, MethodKind::Idr, MethodKind::Qrm],
            window_len: 8,
            repeats: 1,
        };
        let report = run(&data, &config).unwrap();
        let notes = report.ordering_notes();
        assert_eq!(notes.len(), 2, "{notes:?}");
        assert!(notes[0].starts_with("cp < idr:"), "{notes:?}");
        assert!(notes[1].starts_with("idr < qrm:"), "{notes:?}");
    }

    #[test]
    fn rejects_bad_configurations() {
        let data = small_dataset();
        let base = BenchConfig { methods: vec![MethodKind::Cp], window_len: 8, repeats: 1 };
        assert!(matches!(
            run(&data, &BenchConfig { methods: vec![], ..base.clone() }),
            Err(BenchError::NoMethods)
        ));
        assert!(matches!(
            run(&data, &BenchConfig { repeats: 0, ..base.clone() }),
            Err(BenchError::BadRepeats)
        ));
        assert!(matches!(
            run(&data, &BenchConfig { window_len: 12, ..base }),
            Err(BenchError::DatasetTooShort { .. })
        ));
    }
}
