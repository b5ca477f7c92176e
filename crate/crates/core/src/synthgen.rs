//! Seeded synthetic 1 Hz trip corpora with ground-truth alcohol labels.
//!
//! Sober trips cruise smoothly on a mean-reverting speed profile with a
//! slowly turning heading and start at any daytime hour of the week.
//! Impaired trips scale the speed, heading and longitudinal-acceleration
//! noise by `1 + signature_strength` and mostly start on Friday to Sunday
//! nights. At strength 0 both groups are drawn from the same distributions.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, FixedOffset};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::UtcOffset;
use crate::model::RawRecord;
use crate::rng;
use crate::{Error, Result};

/// 2024-01-01 00:00:00 UTC, a Monday.
const MONDAY_EPOCH: i64 = 1_704_067_200;
const METERS_PER_DEG_LAT: f64 = 111_320.0;
const SOBER_INFLUENCES: [&str; 4] = ["fatigue", "none", "traffic", "phone use"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_drivers: usize,
    /// Drivers `0..n_public` are public (commercial) drivers.
    pub n_public: usize,
    pub n_trips: usize,
    pub n_positive: usize,
    pub points_min: usize,
    pub points_max: usize,
    pub seed: u64,
    pub signature_strength: f64,
    /// Start times are spread over this many consecutive weeks.
    pub weeks: usize,
    pub utc_offset: UtcOffset,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_drivers: 21,
            n_public: 16,
            n_trips: 108,
            n_positive: 14,
            points_min: 300,
            points_max: 3000,
            seed: 42,
            signature_strength: 1.0,
            weeks: 4,
            utc_offset: UtcOffset::WAT,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_trips == 0 {
            return fail("n_trips must be ≥ 1");
        }
        if self.n_positive > self.n_trips {
            return fail("n_positive exceeds n_trips");
        }
        if self.n_drivers == 0 || self.n_public > self.n_drivers {
            return fail("need n_drivers ≥ 1 and n_public ≤ n_drivers");
        }
        if self.points_min == 0 || self.points_min > self.points_max {
            return fail("need 1 ≤ points_min ≤ points_max");
        }
        if !(self.signature_strength >= 0.0 && self.signature_strength.is_finite()) {
            return fail("signature_strength must be finite and ≥ 0");
        }
        if self.weeks == 0 {
            return fail("weeks must be ≥ 1");
        }
        Ok(())
    }
}

/// Generated rows (trip-major, 1 Hz) and `trip_id → label`.
pub type Corpus = (Vec<RawRecord>, BTreeMap<String, u8>);

struct TripPlan {
    trip_id: String,
    driver: usize,
    impaired: bool,
}

pub fn generate_corpus(config: &GenConfig) -> Result<Corpus> {
    config.validate()?;
    let mut r = rng::derived(config.seed, u64::MAX);

    let mut positives: Vec<usize> = (0..config.n_trips).collect();
    positives.shuffle(&mut r);
    let mut impaired = vec![false; config.n_trips];
    for &i in &positives[..config.n_positive] {
        impaired[i] = true;
    }
    let width = config.n_trips.to_string().len().max(4);
    let plans: Vec<TripPlan> = (0..config.n_trips)
        .map(|i| TripPlan {
            trip_id: format!("trip-{:0width$}", i + 1),
            driver: r.random_range(0..config.n_drivers),
            impaired: impaired[i],
        })
        .collect();
    let homes: Vec<(f64, f64)> = (0..config.n_drivers)
        .map(|_| (r.random_range(6.45..6.65), r.random_range(3.25..3.55)))
        .collect();

    let trips: Vec<Vec<RawRecord>> = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let mut tr = rng::seeded(config.seed.wrapping_add(i as u64));
            generate_trip(config, plan, homes[plan.driver], &mut tr)
        })
        .collect();

    let truth = plans
        .iter()
        .map(|p| (p.trip_id.clone(), u8::from(p.impaired)))
        .collect();
    Ok((trips.into_iter().flatten().collect(), truth))
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite non-negative sd")
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn wrap_degrees(d: f64) -> f64 {
    let w = d.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Local start time in seconds since the first Monday 00:00.
fn start_offset(config: &GenConfig, impaired: bool, r: &mut ChaCha8Rng) -> i64 {
    let week = r.random_range(0..config.weeks) as i64 * 7 * 86_400;
    let night_share = (0.9 * config.signature_strength).min(1.0);
    if impaired && r.random::<f64>() < night_share {
        // Friday to Sunday, 20:00 to 02:00
        let day = r.random_range(4..7i64);
        let secs = r.random_range(20 * 3600..26 * 3600i64);
        week + day * 86_400 + secs
    } else {
        let day = r.random_range(0..7i64);
        let secs = r.random_range(6 * 3600..22 * 3600i64);
        week + day * 86_400 + secs
    }
}

fn generate_trip(
    config: &GenConfig,
    plan: &TripPlan,
    home: (f64, f64),
    r: &mut ChaCha8Rng,
) -> Vec<RawRecord> {
    let n = r.random_range(config.points_min..=config.points_max);
    let start_local = start_offset(config, plan.impaired, r);
    let start = MONDAY_EPOCH + start_local - i64::from(config.utc_offset.minutes()) * 60;
    let tz = FixedOffset::east_opt(config.utc_offset.minutes() * 60).expect("offset within ±14 h");

    let amplify = if plan.impaired {
        1.0 + config.signature_strength
    } else {
        1.0
    };
    let speed_noise = normal(r.random_range(1.2..1.8) * amplify);
    let course_noise = normal(r.random_range(0.8..1.2) * amplify);
    let acc_y_noise = normal(r.random_range(0.15..0.3) * amplify);
    let acc_x_noise = normal(0.1);
    let acc_z_noise = normal(0.05);
    let height_step = normal(0.05);
    let unit = normal(1.0);

    let influence = if plan.impaired {
        "alcohol".to_string()
    } else {
        SOBER_INFLUENCES[r.random_range(0..SOBER_INFLUENCES.len())].to_string()
    };
    let driver_type = if plan.driver < config.n_public {
        "public"
    } else {
        "private"
    };
    let driver_id = format!("driver-{:02}", plan.driver + 1);

    let cruise = r.random_range(35.0..65.0);
    let cruise_swing = r.random_range(2.0..6.0);
    let cruise_period = r.random_range(300.0..900.0);
    let road_heading = r.random_range(45.0..315.0);
    let mut heading_target: f64 = road_heading;
    let mut wobble = 0.0;
    let mut lat = home.0 + r.random_range(-0.02..0.02);
    let mut lon = home.1 + r.random_range(-0.02..0.02);
    let mut height = r.random_range(10.0..60.0);
    let mut total_meters = 0.0;
    let mut speed: f64 = cruise;
    let mut recent = [cruise; 3];
    let mut prev_speed = cruise;
    let mut prev_course = road_heading;

    let mut points = Vec::with_capacity(n);
    for t in 0..n {
        let target =
            cruise + cruise_swing * (2.0 * std::f64::consts::PI * t as f64 / cruise_period).sin();
        speed = (speed + 0.02 * (target - speed) + speed_noise.sample(r)).clamp(0.0, 120.0);
        let v = round_to(speed, 2);
        recent[t % 3] = v;
        let mid_speed = round_to(recent.iter().sum::<f64>() / 3.0, 2);

        if r.random::<f64>() < 1.0 / 300.0 {
            heading_target = (heading_target + r.random_range(-15.0..15.0))
                .clamp(road_heading - 40.0, road_heading + 40.0);
        }
        wobble += -0.1 * wobble + course_noise.sample(r);
        let course = round_to(wrap_degrees(heading_target + wobble), 2);
        let course = wrap_degrees(course);

        let dv = (v - prev_speed) / 3.6;
        let mut dheading = course - prev_course;
        if dheading > 180.0 {
            dheading -= 360.0;
        } else if dheading < -180.0 {
            dheading += 360.0;
        }
        let acc_y = round_to(dv + acc_y_noise.sample(r), 4);
        let acc_x = round_to(v / 3.6 * dheading.to_radians() + acc_x_noise.sample(r), 4);
        let acc_z = round_to(9.81 + acc_z_noise.sample(r), 4);
        height += height_step.sample(r) + 0.01 * unit.sample(r);

        let ts = start + t as i64;
        let point_date = DateTime::from_timestamp(ts, 0)
            .map(|d| d.with_timezone(&tz).format("%Y-%m-%d %H:%M:%S").to_string());
        points.push(RawRecord {
            trip_id: plan.trip_id.clone(),
            driver_id: driver_id.clone(),
            driver_type_raw: driver_type.to_string(),
            tick_timestamp: ts,
            latitude: lat,
            longitude: lon,
            speed: v,
            mid_speed,
            acc_x,
            acc_y,
            acc_z,
            course,
            height: round_to(height, 2),
            total_meters: round_to(total_meters, 3),
            influence_raw: Some(influence.clone()),
            point_date,
        });

        let step = v / 3.6;
        let theta = course.to_radians();
        lat += step * theta.cos() / METERS_PER_DEG_LAT;
        lon += step * theta.sin() / (METERS_PER_DEG_LAT * lat.to_radians().cos());
        total_meters += step;
        prev_speed = v;
        prev_course = course;
    }
    points
}

/// `trip_id,label` rows in trip-id order.
pub fn write_truth_csv<W: Write>(sink: W, truth: &BTreeMap<String, u8>) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["trip_id", "label"])?;
    for (id, label) in truth {
        w.write_record([id.as_str(), &label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
