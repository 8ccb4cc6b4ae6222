//! Synthetic day-ahead market generator.
//!
//! Prices follow a latent process with the usual fingerprints of hourly
//! power markets: a slowly mean-reverting daily level, a double-peaked
//! intraday shape, cheaper weekends and occasional upward spikes. On top of
//! the latent price, three error regimes control how the ensemble forecasts
//! and the observed price are drawn:
//!
//! * `gaussian-ensemble` — members and observation get independent Gaussian
//!   errors with fixed standard deviations;
//! * `skewed-errors` — same ensemble, but the observation error is a
//!   mean-zero exponential (right-skewed), so symmetric bands misjudge the
//!   tails;
//! * `spread-informative` — each hour draws a log-normal volatility scale
//!   that multiplies both member and observation noise, so a wide ensemble
//!   genuinely signals an uncertain price.
//!
//! Generation is deterministic in the seed. The latent path and the noise
//! draws use two independent RNG streams, and cells are visited day-major
//! (day ascending, hour ascending) with a fixed draw order inside each cell.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::DomainError;
use crate::ingest::{Dataset, IngestError};

/// Long-run price level around which the daily level reverts.
const BASE_PRICE: f64 = 45.0;
/// Daily AR(1) coefficient of the level process.
const AR_COEFF: f64 = 0.985;
/// Standard deviation of the daily level innovation.
const AR_INNOVATION_SD: f64 = 2.0;
/// Morning demand peak: height, center hour, width.
const MORNING_PEAK: (f64, f64, f64) = (12.0, 9.0, 2.5);
/// Evening demand peak: height, center hour, width.
const EVENING_PEAK: (f64, f64, f64) = (6.0, 19.0, 3.0);
/// Price discounts on Saturdays and Sundays.
const SATURDAY_SHIFT: f64 = -5.0;
const SUNDAY_SHIFT: f64 = -8.0;
/// Per-hour probability of an upward price spike.
const SPIKE_PROB: f64 = 0.015;
/// Mean spike magnitude (exponentially distributed).
const SPIKE_MEAN: f64 = 60.0;
/// Log-scale standard deviation of the per-hour volatility multiplier in
/// the spread-informative regime.
const SPREAD_LOG_SD: f64 = 0.45;
/// Observation-to-member noise ratio in the spread-informative regime; below
/// one, the observed price usually falls inside the ensemble range.
const REPRESENTABLE_RATIO: f64 = 0.8;

/// RNG stream carrying the latent price path (level, spikes).
const LATENT_STREAM: u64 = 0;
/// RNG stream carrying forecast and observation errors.
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("days must be positive")]
    BadDays,
    #[error("hours must be in 1..=24, got {0}")]
    BadHours(u32),
    #[error("members must be positive")]
    BadMembers,
    #[error("noise standard deviations must be positive and finite")]
    BadNoise,
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Error regime for ensemble and observation draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthRegime {
    GaussianEnsemble,
    SkewedErrors,
    SpreadInformative,
}

impl SynthRegime {
    pub const ALL: [SynthRegime; 3] = [
        SynthRegime::GaussianEnsemble,
        SynthRegime::SkewedErrors,
        SynthRegime::SpreadInformative,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SynthRegime::GaussianEnsemble => "gaussian-ensemble",
            SynthRegime::SkewedErrors => "skewed-errors",
            SynthRegime::SpreadInformative => "spread-informative",
        }
    }
}

impl fmt::Display for SynthRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthRegime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SynthRegime::ALL
            .iter()
            .find(|r| r.name() == s.to_ascii_lowercase())
            .copied()
            .ok_or_else(|| {
                format!(
                    "unknown regime '{s}' (expected gaussian-ensemble, skewed-errors or spread-informative)"
                )
            })
    }
}

/// Full description of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub days: usize,
    /// Delivery hours 1..=hours are generated for every day.
    pub hours: u32,
    pub members: usize,
    pub seed: u64,
    pub regime: SynthRegime,
    pub start_date: NaiveDate,
    /// Standard deviation of member forecast errors.
    pub member_noise: f64,
    /// Standard deviation scale of observation errors.
    pub observation_noise: f64,
}

impl SynthConfig {
    pub fn new(days: usize, members: usize, seed: u64, regime: SynthRegime) -> Self {
        Self {
            days,
            hours: 24,
            members,
            seed,
            regime,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            member_noise: 5.0,
            observation_noise: 5.0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.days == 0 {
            return Err(SynthError::BadDays);
        }
        if !(1..=24).contains(&self.hours) {
            return Err(SynthError::BadHours(self.hours));
        }
        if self.members == 0 {
            return Err(SynthError::BadMembers);
        }
        for sd in [self.member_noise, self.observation_noise] {
            if !sd.is_finite() || sd <= 0.0 {
                return Err(SynthError::BadNoise);
            }
        }
        Ok(())
    }
}

/// Intraday price shape: two Gaussian demand bumps.
fn daily_shape(hour: u32) -> f64 {
    let h = hour as f64;
    let bump = |(height, center, width): (f64, f64, f64)| {
        height * (-(h - center) * (h - center) / (2.0 * width * width)).exp()
    };
    bump(MORNING_PEAK) + bump(EVENING_PEAK)
}

fn weekday_shift(day: NaiveDate) -> f64 {
    match day.weekday() {
        Weekday::Sat => SATURDAY_SHIFT,
        Weekday::Sun => SUNDAY_SHIFT,
        _ => 0.0,
    }
}

/// Generates the dataset described by `config`.
pub fn generate(config: &SynthConfig) -> Result<Dataset, SynthError> {
    config.validate()?;
    let mut latent_rng = ChaCha8Rng::seed_from_u64(config.seed);
    latent_rng.set_stream(LATENT_STREAM);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
    noise_rng.set_stream(NOISE_STREAM);

    let level_innovation = Normal::new(0.0, AR_INNOVATION_SD).expect("positive sd");
    let spike_size = Exp::new(1.0 / SPIKE_MEAN).expect("positive rate");
    let member_error = Normal::new(0.0, config.member_noise).expect("validated sd");
    let observation_error = Normal::new(0.0, config.observation_noise).expect("validated sd");
    let log_scale = Normal::new(0.0, SPREAD_LOG_SD).expect("positive sd");
    let unit_exp = Exp::new(1.0).expect("positive rate");

    let mut level = 0.0;
    let mut records = Vec::with_capacity(config.days * config.hours as usize);
    for d in 0..config.days {
        let day = config.start_date + Days::new(d as u64);
        level = AR_COEFF * level + level_innovation.sample(&mut latent_rng);
        for hour in 1..=config.hours {
            let mut latent = BASE_PRICE + level + daily_shape(hour) + weekday_shift(day);
            if latent_rng.gen::<f64>() < SPIKE_PROB {
                latent += spike_size.sample(&mut latent_rng);
            }
            // Fixed draw order per cell: (scale,) members ascending, then the
            // observation.
            let (ensemble, observed) = match config.regime {
                SynthRegime::GaussianEnsemble => {
                    let ens: Vec<f64> = (0..config.members)
                        .map(|_| latent + member_error.sample(&mut noise_rng))
                        .collect();
                    (ens, latent + observation_error.sample(&mut noise_rng))
                }
                SynthRegime::SkewedErrors => {
                    let ens: Vec<f64> = (0..config.members)
                        .map(|_| latent + member_error.sample(&mut noise_rng))
                        .collect();
                    let skewed = unit_exp.sample(&mut noise_rng) - 1.0;
                    (ens, latent + config.observation_noise * skewed)
                }
                SynthRegime::SpreadInformative => {
                    let scale = log_scale.sample(&mut noise_rng).exp();
                    let ens: Vec<f64> = (0..config.members)
                        .map(|_| latent + scale * member_error.sample(&mut noise_rng))
                        .collect();
                    let observed = latent
                        + scale * REPRESENTABLE_RATIO * observation_error.sample(&mut noise_rng);
                    (ens, observed)
                }
            };
            records.push(crate::domain::ForecastRecord::new(day, hour, observed, ensemble)?);
        }
    }
    Ok(Dataset::from_records(records)?)
}
