//! Data pipeline: synthetic record generation, CSV ingestion, gap-free
//! trajectory extraction, min-max normalization, and the train/validation
//! split.

mod csvio;
mod generator;
mod normalizer;
mod trajectory;

pub use csvio::{load_csv, save_csv, CsvLoad, GapReport, CSV_HEADER};
pub use generator::generate_synthetic;
pub use normalizer::{fit_normalizer, MinMax, Normalizer};
pub use trajectory::{extract_trajectories, split_dataset, ExtractParams};

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample period of every record stream.
pub const STEP_MINUTES: i64 = 15;
/// Sample period in hours, used for kWh and Kelvin-hour integrals.
pub const DT_HOURS: f64 = 0.25;

/// Whether a record (or episode) belongs to the heating or cooling season.
/// Heating uses non-negative power, cooling non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Heating,
    Cooling,
}

impl Mode {
    pub fn as_char(self) -> char {
        match self {
            Mode::Heating => 'H',
            Mode::Cooling => 'C',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'H' => Some(Mode::Heating),
            'C' => Some(Mode::Cooling),
            _ => None,
        }
    }

    /// Power sign is consistent with the season: heating never negative,
    /// cooling never positive.
    pub fn sign_ok(self, power: f64) -> bool {
        match self {
            Mode::Heating => power >= 0.0,
            Mode::Cooling => power <= 0.0,
        }
    }
}

/// One 15-minute measurement row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: DateTime<Utc>,
    /// Controlled zone temperature, degrees C (a measurement, noise included).
    pub t_zone: f64,
    /// Neighboring zone temperature, degrees C.
    pub t_neigh: f64,
    /// Outdoor temperature, degrees C.
    pub t_out: f64,
    /// Solar irradiation, W/m^2, non-negative.
    pub solar: f64,
    /// Applied heating (+) or cooling (-) power, kW.
    pub power: f64,
    pub mode: Mode,
}

impl RawRecord {
    /// Fraction of the day in [0, 1).
    pub fn time_of_day(&self) -> f64 {
        let secs = self.timestamp.num_seconds_from_midnight() as f64;
        secs / 86_400.0
    }

    /// Month as 1..=12.
    pub fn month(&self) -> u32 {
        self.timestamp.month()
    }

    /// Day of week, 0 = Monday .. 6 = Sunday.
    pub fn weekday(&self) -> u32 {
        self.timestamp.weekday().num_days_from_monday()
    }
}

/// A gap-free, single-season window of records: 48 to 288 steps
/// (12 h to 72 h) on a strict 15-minute cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<RawRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.records[0].timestamp
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.records[self.records.len() - 1].timestamp
    }

    pub fn mode(&self) -> Mode {
        self.records[0].mode
    }

    /// Panics on violated cadence/mode invariants; used by tests and by
    /// the extraction code's own debug assertions.
    pub fn validate(&self) -> Result<()> {
        if self.records.len() < trajectory::MIN_LEN || self.records.len() > trajectory::MAX_LEN {
            return Err(Error::Data(format!(
                "trajectory length {} outside [{}, {}]",
                self.records.len(),
                trajectory::MIN_LEN,
                trajectory::MAX_LEN
            )));
        }
        let mode = self.records[0].mode;
        for pair in self.records.windows(2) {
            let dt = pair[1].timestamp - pair[0].timestamp;
            if dt != chrono::Duration::minutes(STEP_MINUTES) {
                return Err(Error::Data(format!(
                    "trajectory cadence break at {}",
                    pair[1].timestamp
                )));
            }
            if pair[1].mode != mode {
                return Err(Error::Data(format!(
                    "trajectory mode change at {}",
                    pair[1].timestamp
                )));
            }
        }
        Ok(())
    }
}

/// Time-based train/validation split; no trajectory appears in both.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Trajectory>,
    pub validation: Vec<Trajectory>,
}
