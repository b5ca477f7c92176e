//! Shared domain types and the canonical per-trip feature order.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sensor channels summarised per trip, in canonical order.
pub const CHANNELS: [&str; 11] = [
    "latitude",
    "longitude",
    "speed",
    "mid_speed",
    "acc_x",
    "acc_y",
    "acc_z",
    "course",
    "height",
    "total_meters",
    "tick_timestamp",
];

/// Summary statistics computed for every channel, in canonical order.
pub const STATS: [&str; 4] = ["mean", "min", "max", "std"];

/// Trailing features that follow the channel block.
pub const EXTRAS: [&str; 3] = ["hour_of_day_mean", "day_of_week_mean", "driver_type"];

pub const N_CHANNELS: usize = CHANNELS.len();
pub const N_FEATURES: usize = N_CHANNELS * STATS.len() + EXTRAS.len();

pub const HOUR_OF_DAY_MEAN: usize = N_CHANNELS * STATS.len();
pub const DAY_OF_WEEK_MEAN: usize = HOUR_OF_DAY_MEAN + 1;
pub const DRIVER_TYPE: usize = HOUR_OF_DAY_MEAN + 2;

/// Index of `<channel>_<stat>` in the canonical order.
pub const fn channel_stat_index(channel: usize, stat: usize) -> usize {
    channel * STATS.len() + stat
}

/// The 47 canonical feature names: `<channel>_<stat>` for each channel, then
/// the temporal means and the driver type flag.
pub fn canonical_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_FEATURES);
    for channel in CHANNELS {
        for stat in STATS {
            names.push(format!("{channel}_{stat}"));
        }
    }
    names.extend(EXTRAS.iter().map(|s| s.to_string()));
    names
}

/// One 1 Hz sensor row as read from a log file.
///
/// Lateral and yaw columns are not modelled; they are skipped at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub trip_id: String,
    pub driver_id: String,
    pub driver_type_raw: String,
    pub tick_timestamp: i64,
    pub latitude: f64,
    pub longitude: f64,
    /// km/h
    pub speed: f64,
    /// km/h
    pub mid_speed: f64,
    /// m/s²
    pub acc_x: f64,
    /// m/s². Plays the role of the lateral "accelerationYOriginal" channel.
    pub acc_y: f64,
    /// m/s²
    pub acc_z: f64,
    /// Heading in degrees from North, [0, 360).
    pub course: f64,
    /// meters
    pub height: f64,
    /// Cumulative distance in meters.
    pub total_meters: f64,
    pub influence_raw: Option<String>,
    pub point_date: Option<String>,
}

impl RawRecord {
    /// Checks the range invariants. Returns the offending field name.
    pub fn check(&self) -> std::result::Result<(), &'static str> {
        if self.tick_timestamp <= 0 {
            return Err("tickTimestamp");
        }
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err("latitude");
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err("longitude");
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err("speed");
        }
        if !(self.mid_speed >= 0.0 && self.mid_speed.is_finite()) {
            return Err("midSpeed");
        }
        if !(0.0..360.0).contains(&self.course) {
            return Err("course");
        }
        if !(self.total_meters >= 0.0 && self.total_meters.is_finite()) {
            return Err("totalMeters");
        }
        for (v, name) in [
            (self.acc_x, "accX"),
            (self.acc_y, "accY"),
            (self.acc_z, "accZ"),
            (self.height, "height"),
        ] {
            if !v.is_finite() {
                return Err(name);
            }
        }
        Ok(())
    }

    /// Value of channel `c` (index into [`CHANNELS`]).
    pub fn channel(&self, c: usize) -> f64 {
        match c {
            0 => self.latitude,
            1 => self.longitude,
            2 => self.speed,
            3 => self.mid_speed,
            4 => self.acc_x,
            5 => self.acc_y,
            6 => self.acc_z,
            7 => self.course,
            8 => self.height,
            9 => self.total_meters,
            10 => self.tick_timestamp as f64,
            _ => panic!("channel index {c} out of range"),
        }
    }
}

/// All points of one trip plus its encoded labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub trip_id: String,
    /// 1 = public, 0 = private.
    pub driver_type: u8,
    /// Sorted by ascending `tick_timestamp`.
    pub points: Vec<RawRecord>,
    /// 1 = alcohol, 0 = any other reported influence.
    pub influence: u8,
}

impl TripRecord {
    pub fn new(
        trip_id: impl Into<String>,
        driver_type: u8,
        mut points: Vec<RawRecord>,
        influence: u8,
    ) -> Result<Self> {
        let trip_id = trip_id.into();
        if points.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "trip `{trip_id}` has no points"
            )));
        }
        if driver_type > 1 || influence > 1 {
            return Err(Error::InvalidDataset(format!(
                "trip `{trip_id}` has non-binary label"
            )));
        }
        if let Some(p) = points.iter().find(|p| p.trip_id != trip_id) {
            return Err(Error::InvalidDataset(format!(
                "point of trip `{}` filed under `{trip_id}`",
                p.trip_id
            )));
        }
        points.sort_by_key(|p| p.tick_timestamp);
        Ok(Self {
            trip_id,
            driver_type,
            points,
            influence,
        })
    }
}

/// Fixed-order per-trip aggregate feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct TripFeatureVector(Vec<f64>);

impl TripFeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != N_FEATURES {
            return Err(Error::InvalidDataset(format!(
                "feature vector has {} values, expected {N_FEATURES}",
                values.len()
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Named lookup, e.g. `get("speed_std")`.
    pub fn get(&self, name: &str) -> Option<f64> {
        canonical_feature_names()
            .iter()
            .position(|n| n == name)
            .map(|i| self.0[i])
    }

    pub fn stat(&self, channel: usize, stat: usize) -> f64 {
        self.0[channel_stat_index(channel, stat)]
    }
}

/// Feature matrix + binary labels + column names + row ids.
///
/// Datasets built from trips carry the 47 canonical columns; projections
/// produced by feature selection carry a subset, and small hand-built
/// fixtures may carry arbitrary names.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    trip_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        trip_ids: Vec<String>,
    ) -> Result<Self> {
        let n = features.len();
        if labels.len() != n || trip_ids.len() != n {
            return Err(Error::InvalidDataset(format!(
                "row counts differ: features {n}, labels {}, trip ids {}",
                labels.len(),
                trip_ids.len()
            )));
        }
        if let Some(i) = features.iter().position(|r| r.len() != feature_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has {} values, expected {}",
                features[i].len(),
                feature_names.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidDataset("labels must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            trip_ids,
        })
    }

    /// Convenience constructor for fixtures: names `f0..`, ids `row-0..`.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let width = features.first().map_or(0, Vec::len);
        let names = (0..width).map(|j| format!("f{j}")).collect();
        let ids = (0..features.len()).map(|i| format!("row-{i}")).collect();
        Self::new(features, labels, names, ids)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn trip_ids(&self) -> &[String] {
        &self.trip_ids
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_canonical(&self) -> bool {
        self.feature_names == canonical_feature_names()
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - pos, pos)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset_rows(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            trip_ids: indices.iter().map(|&i| self.trip_ids[i].clone()).collect(),
        }
    }

    /// Columns at `indices`, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&j) = indices.iter().find(|&&j| j >= self.n_features()) {
            return Err(Error::InvalidDataset(format!("column {j} out of range")));
        }
        Ok(Self {
            features: self
                .features
                .iter()
                .map(|r| indices.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            feature_names: indices
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            trip_ids: self.trip_ids.clone(),
        })
    }

    /// Columns named `names`, in that order.
    pub fn select_named(&self, names: &[String]) -> Result<Self> {
        let indices = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::InvalidDataset(format!("no column named `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.select_columns(&indices)
    }

    /// Appends rows; the caller guarantees width and label validity.
    pub(crate) fn push_row(&mut self, row: Vec<f64>, label: u8, trip_id: String) {
        debug_assert_eq!(row.len(), self.n_features());
        self.features.push(row);
        self.labels.push(label);
        self.trip_ids.push(trip_id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_names_shape() {
        let names = canonical_feature_names();
        assert_eq!(names.len(), 47);
        assert_eq!(names[0], "latitude_mean");
        assert_eq!(names[46], "driver_type");
        assert_eq!(names[channel_stat_index(2, 3)], "speed_std");
        assert_eq!(names[HOUR_OF_DAY_MEAN], "hour_of_day_mean");
        assert_eq!(names[DAY_OF_WEEK_MEAN], "day_of_week_mean");
        assert_eq!(names, canonical_feature_names());
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 47);
    }

    #[test]
    fn dataset_rejects_ragged_rows() {
        let err = LabeledDataset::from_rows(vec![vec![1.0, 2.0], vec![1.0]], vec![0, 1]);
        assert!(matches!(err, Err(Error::InvalidDataset(_))));
        let err = LabeledDataset::from_rows(vec![vec![1.0]], vec![2]);
        assert!(matches!(err, Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn select_columns_keeps_order() {
        let ds = LabeledDataset::from_rows(vec![vec![1.0, 2.0, 3.0]], vec![1]).unwrap();
        let sub = ds.select_columns(&[2, 0]).unwrap();
        assert_eq!(sub.features()[0], vec![3.0, 1.0]);
        assert_eq!(sub.feature_names(), &["f2".to_string(), "f0".to_string()]);
        assert!(ds.select_columns(&[3]).is_err());
    }
}
