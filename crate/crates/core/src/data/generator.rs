//! Synthetic ground-truth data.
//!
//! Weather is a seasonal plus diurnal sinusoid with AR(1) noise; solar is a
//! clipped daytime bell scaled by slowly varying cloud cover. Zone and
//! neighbor temperatures come from a hidden resistance-capacitance
//! simulation (zone node, slow envelope node, neighbor node) driven by a
//! scripted hysteresis controller with randomized per-cycle power levels.
//! The RC structure is deliberately different from the learned model so
//! that fitting it is a real system-identification task.

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::{Mode, RawRecord, STEP_MINUTES};
use crate::error::{Error, Result};

/// All generated streams start at this instant.
pub fn stream_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap()
}

/// Observation noise added to the recorded zone temperature, degrees C.
pub const OBS_NOISE_SIGMA: f64 = 0.1;

// Hidden RC coefficients, all "per 15-minute step". Sized so that 2 kW
// holds the zone near 23.5 C at the coldest outdoor extremes (~80% duty).
const K_ZONE_ENV: f64 = 0.010; // zone <-> envelope
const K_ZONE_OUT: f64 = 0.0016; // zone <-> outside (windows/infiltration)
const K_ZONE_NEIGH: f64 = 0.01; // zone <-> neighbor
const SOLAR_ZONE: f64 = 0.00018; // K per W/m^2
const HEAT_ZONE: f64 = 0.09; // K per kW
const K_ENV_ZONE: f64 = 0.006;
const K_ENV_OUT: f64 = 0.0012;
const SOLAR_ENV: f64 = 0.00006;
const K_NEIGH_ZONE: f64 = 0.008;
const K_NEIGH_OUT: f64 = 0.004;
const SOLAR_NEIGH: f64 = 0.00008;
const HEAT_NEIGH: f64 = 0.09;
const NEIGH_POWER: f64 = 1.5;

/// Cooling season months (inclusive); the rest of the year heats.
const COOLING_MONTHS: std::ops::RangeInclusive<u32> = 6..=9;

pub fn season_of_month(month: u32) -> Mode {
    if COOLING_MONTHS.contains(&month) {
        Mode::Cooling
    } else {
        Mode::Heating
    }
}

struct Hysteresis {
    on: bool,
    power: f64,
}

/// Generate `days` of synthetic records at 15-minute cadence,
/// deterministic per seed.
pub fn generate_synthetic(days: u32, seed: u64) -> Result<Vec<RawRecord>> {
    if days < 3 {
        return Err(Error::InvalidConfig(format!(
            "generator needs at least 3 days, got {days}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let steps = days as usize * 96;
    let start = stream_start();

    // Weather state.
    let mut ar_temp = 0.0; // AR(1), stationary sigma ~1.5
    let mut ar_cloud = 0.0; // AR(1), mapped into [0.15, 1.0]
    // Building state.
    let mut t_zone = 22.0;
    let mut t_env = 16.0;
    let mut t_neigh = 21.5;
    let mut zone_ctl = Hysteresis {
        on: false,
        power: 1.5,
    };
    let mut neigh_ctl = Hysteresis {
        on: false,
        power: NEIGH_POWER,
    };

    let mut records = Vec::with_capacity(steps);
    for k in 0..steps {
        let timestamp = start + Duration::minutes(STEP_MINUTES * k as i64);
        let day_frac = k as f64 * 0.25 / 24.0; // days since start
        let hour = (k % 96) as f64 * 0.25;
        let mode = season_of_month(timestamp.month());

        // Outdoor temperature: coldest mid-January, warmest mid-July.
        let seasonal = 12.0 - 14.0 * (2.0 * std::f64::consts::PI * (day_frac - 15.0) / 365.0).cos();
        let diurnal = -3.5 * (2.0 * std::f64::consts::PI * (hour - 14.5) / 24.0).cos();
        ar_temp = 0.98 * ar_temp + 0.30 * unit.sample(&mut rng);
        let t_out = seasonal + diurnal + ar_temp;

        // Solar: daytime bell, zero outside [6h, 18h], scaled by season and cloud.
        ar_cloud = 0.97 * ar_cloud + 0.12 * unit.sample(&mut rng);
        let cloud = (0.65 + ar_cloud).clamp(0.15, 1.0);
        let bell = (std::f64::consts::PI * (hour - 6.0) / 12.0).sin().max(0.0);
        let season_sun =
            0.55 - 0.45 * (2.0 * std::f64::consts::PI * (day_frac - 172.0) / 365.0).cos();
        let solar = 900.0 * bell.powf(1.3) * season_sun * cloud;

        // Scripted controller for the recorded zone: hysteresis bands with a
        // nightly setback and a freshly drawn power level per on-cycle, so
        // the data carries amplitude excitation for system identification.
        let night = !(8.0..20.0).contains(&hour);
        let u_zone = match mode {
            Mode::Heating => {
                let (sp_on, sp_off) = if night { (22.6, 23.6) } else { (21.0, 22.2) };
                if !zone_ctl.on && t_zone < sp_on {
                    zone_ctl.on = true;
                    zone_ctl.power = rng.gen_range(1.0..=2.0);
                } else if zone_ctl.on && t_zone > sp_off {
                    zone_ctl.on = false;
                } else if zone_ctl.on && t_zone < sp_on - 0.5 {
                    // Losing ground against the weather: escalate.
                    zone_ctl.power = 2.0;
                }
                if zone_ctl.on {
                    zone_ctl.power
                } else {
                    0.0
                }
            }
            Mode::Cooling => {
                let (sp_on, sp_off) = if night { (24.4, 23.4) } else { (25.8, 24.6) };
                if !zone_ctl.on && t_zone > sp_on {
                    zone_ctl.on = true;
                    zone_ctl.power = rng.gen_range(1.0..=2.0);
                } else if zone_ctl.on && t_zone < sp_off {
                    zone_ctl.on = false;
                } else if zone_ctl.on && t_zone > sp_on + 0.5 {
                    zone_ctl.power = 2.0;
                }
                if zone_ctl.on {
                    -zone_ctl.power
                } else {
                    0.0
                }
            }
        };

        // Neighbor room runs a plain constant-power hysteresis.
        let u_neigh = match mode {
            Mode::Heating => {
                if !neigh_ctl.on && t_neigh < 21.3 {
                    neigh_ctl.on = true;
                } else if neigh_ctl.on && t_neigh > 22.3 {
                    neigh_ctl.on = false;
                }
                if neigh_ctl.on {
                    neigh_ctl.power
                } else {
                    0.0
                }
            }
            Mode::Cooling => {
                if !neigh_ctl.on && t_neigh > 25.2 {
                    neigh_ctl.on = true;
                } else if neigh_ctl.on && t_neigh < 24.2 {
                    neigh_ctl.on = false;
                }
                if neigh_ctl.on {
                    -neigh_ctl.power
                } else {
                    0.0
                }
            }
        };

        // Record BEFORE stepping, so power at time k drives the transition
        // from k to k+1, matching the model's update convention.
        records.push(RawRecord {
            timestamp,
            t_zone: t_zone + OBS_NOISE_SIGMA * unit.sample(&mut rng),
            t_neigh,
            t_out,
            solar,
            power: u_zone,
            mode,
        });

        // Hidden RC step.
        let new_zone = t_zone
            + K_ZONE_ENV * (t_env - t_zone)
            + K_ZONE_OUT * (t_out - t_zone)
            + K_ZONE_NEIGH * (t_neigh - t_zone)
            + SOLAR_ZONE * solar
            + HEAT_ZONE * u_zone;
        let new_env = t_env
            + K_ENV_ZONE * (t_zone - t_env)
            + K_ENV_OUT * (t_out - t_env)
            + SOLAR_ENV * solar;
        let new_neigh = t_neigh
            + K_NEIGH_ZONE * (t_zone - t_neigh)
            + K_NEIGH_OUT * (t_out - t_neigh)
            + SOLAR_NEIGH * solar
            + HEAT_NEIGH * u_neigh;
        t_zone = new_zone;
        t_env = new_env;
        t_neigh = new_neigh;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_too_few_days() {
        assert!(generate_synthetic(2, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(5, 7).unwrap();
        let b = generate_synthetic(5, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(5, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn solar_is_zero_at_midnight() {
        let records = generate_synthetic(10, 1).unwrap();
        for r in records.iter().step_by(96) {
            assert_eq!(r.timestamp.format("%H:%M").to_string(), "00:00");
            assert_eq!(r.solar, 0.0);
        }
    }

    #[test]
    fn solar_never_negative_and_power_sign_matches_mode() {
        let records = generate_synthetic(30, 2).unwrap();
        for r in &records {
            assert!(r.solar >= 0.0);
            assert!(r.mode.sign_ok(r.power), "power {} in {:?}", r.power, r.mode);
        }
    }

    #[test]
    fn zone_temperature_stays_in_plausible_range_over_a_year() {
        let records = generate_synthetic(365, 3).unwrap();
        for r in &records {
            assert!(
                (5.0..=40.0).contains(&r.t_zone),
                "t_zone {} at {}",
                r.t_zone,
                r.timestamp
            );
        }
    }

    #[test]
    fn cadence_is_strict_15_minutes() {
        let records = generate_synthetic(3, 4).unwrap();
        assert_eq!(records.len(), 3 * 96);
        for pair in records.windows(2) {
            assert_eq!(
                pair[1].timestamp - pair[0].timestamp,
                Duration::minutes(15)
            );
        }
    }
}
