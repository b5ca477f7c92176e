//! Per-trip statistical summaries and dataset assembly.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{decompose_timestamp, UtcOffset};
use crate::model::{
    canonical_feature_names, LabeledDataset, TripFeatureVector, TripRecord, N_CHANNELS, N_FEATURES,
};
use crate::{Error, Result};

/// Divisor used for the per-channel standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdKind {
    /// n − 1
    #[default]
    Sample,
    /// n
    Population,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateOptions {
    pub utc_offset: UtcOffset,
    pub std_kind: StdKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

/// mean/min/max/std of a non-empty slice. The mean is clamped into
/// [min, max] so rounding never breaks `min ≤ mean ≤ max`; that also makes
/// the deviations of a constant slice exactly zero.
pub fn summarize(values: &[f64], std_kind: StdKind) -> Summary {
    assert!(!values.is_empty(), "summarize needs at least one value");
    let n = values.len() as f64;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sum = 0.0;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let mean = (sum / n).clamp(min, max);
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let divisor = match std_kind {
        StdKind::Sample => n - 1.0,
        StdKind::Population => n,
    };
    let std = if divisor > 0.0 {
        (ss / divisor).sqrt()
    } else {
        0.0
    };
    Summary {
        mean,
        min,
        max,
        std,
    }
}

fn clamped_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut n, mut sum, mut lo, mut hi) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        n += 1;
        sum += v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (sum / n as f64).clamp(lo, hi)
}

/// Summarises one trip into the canonical 47-value feature vector.
///
/// Panics if the trip has no points; `TripRecord::new` and
/// `clean_and_group` never produce one.
pub fn aggregate_trip(trip: &TripRecord, opts: &AggregateOptions) -> TripFeatureVector {
    assert!(
        !trip.points.is_empty(),
        "trip `{}` has no points",
        trip.trip_id
    );
    let mut values = Vec::with_capacity(N_FEATURES);
    let mut buf = Vec::with_capacity(trip.points.len());
    for c in 0..N_CHANNELS {
        buf.clear();
        buf.extend(trip.points.iter().map(|p| p.channel(c)));
        let s = summarize(&buf, opts.std_kind);
        values.extend([s.mean, s.min, s.max, s.std]);
    }
    let temporal: Vec<(f64, u8)> = trip
        .points
        .iter()
        .map(|p| decompose_timestamp(p.tick_timestamp, opts.utc_offset))
        .collect();
    values.push(clamped_mean(temporal.iter().map(|t| t.0)));
    values.push(clamped_mean(temporal.iter().map(|t| f64::from(t.1))));
    values.push(f64::from(trip.driver_type));
    TripFeatureVector::new(values).expect("47 values by construction")
}

/// One canonical row per trip, in input order.
pub fn build_dataset(trips: &[TripRecord], opts: &AggregateOptions) -> Result<LabeledDataset> {
    if trips.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let features: Vec<Vec<f64>> = trips
        .par_iter()
        .map(|t| aggregate_trip(t, opts).into_inner())
        .collect();
    LabeledDataset::new(
        features,
        trips.iter().map(|t| t.influence).collect(),
        canonical_feature_names(),
        trips.iter().map(|t| t.trip_id.clone()).collect(),
    )
}

/// Writes `<feature names...>,label,trip_id`, one row per trip.
pub fn write_features_csv<W: Write>(sink: W, ds: &LabeledDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.extend(["label", "trip_id"]);
    w.write_record(&header)?;
    for ((row, label), id) in ds.features().iter().zip(ds.labels()).zip(ds.trip_ids()) {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        rec.push(label.to_string());
        rec.push(id.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_features_csv`].
pub fn read_features_csv<R: Read>(source: R) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_reader(source);
    let header = r.headers()?.clone();
    let n = header.len();
    if n < 2 || &header[n - 2] != "label" || &header[n - 1] != "trip_id" {
        return Err(Error::MissingColumn("label,trip_id".into()));
    }
    let names: Vec<String> = header.iter().take(n - 2).map(str::to_string).collect();
    let (mut features, mut labels, mut ids) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |column: &str, value: &str| Error::MalformedRow {
            line,
            column: column.to_string(),
            value: value.to_string(),
        };
        let row = names
            .iter()
            .enumerate()
            .map(|(j, name)| rec[j].parse::<f64>().map_err(|_| bad(name, &rec[j])))
            .collect::<Result<Vec<_>>>()?;
        let label = match &rec[n - 2] {
            "0" => 0,
            "1" => 1,
            v => return Err(bad("label", v)),
        };
        features.push(row);
        labels.push(label);
        ids.push(rec[n - 1].to_string());
    }
    LabeledDataset::new(features, labels, names, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{channel_stat_index, RawRecord, DAY_OF_WEEK_MEAN, HOUR_OF_DAY_MEAN};
    use proptest::prelude::*;

    fn point(ts: i64, speed: f64) -> RawRecord {
        RawRecord {
            trip_id: "t".into(),
            driver_id: "d".into(),
            driver_type_raw: "public".into(),
            tick_timestamp: ts,
            latitude: 6.5,
            longitude: 3.4,
            speed,
            mid_speed: speed,
            acc_x: 0.0,
            acc_y: 0.1,
            acc_z: 9.8,
            course: 90.0,
            height: 10.0,
            total_meters: speed,
            influence_raw: Some("none".into()),
            point_date: None,
        }
    }

    fn trip(points: Vec<RawRecord>) -> TripRecord {
        TripRecord::new("t", 1, points, 0).unwrap()
    }

    const SPEED: usize = 2;

    #[test]
    fn speed_summary() {
        let t = trip(vec![point(100, 10.0), point(101, 20.0), point(102, 30.0)]);
        let v = aggregate_trip(&t, &AggregateOptions::default());
        assert_eq!(v.get("speed_mean"), Some(20.0));
        assert_eq!(v.get("speed_min"), Some(10.0));
        assert_eq!(v.get("speed_max"), Some(30.0));
        assert_eq!(v.get("speed_std"), Some(10.0));
        assert_eq!(v.get("driver_type"), Some(1.0));
        let pop = AggregateOptions {
            std_kind: StdKind::Population,
            ..Default::default()
        };
        let v = aggregate_trip(&t, &pop);
        assert!((v.get("speed_std").unwrap() - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_point_trip() {
        let t = trip(vec![point(100, 42.5)]);
        let v = aggregate_trip(&t, &AggregateOptions::default());
        for c in 0..N_CHANNELS {
            assert_eq!(v.stat(c, 3), 0.0);
            assert_eq!(v.stat(c, 0), v.stat(c, 1));
            assert_eq!(v.stat(c, 0), v.stat(c, 2));
        }
        assert_eq!(v.values()[channel_stat_index(SPEED, 0)], 42.5);
    }

    #[test]
    fn hour_mean_of_two_evening_points() {
        // 22:00 and 23:00 WAT on 1970-01-01 are 21:00 and 22:00 UTC.
        let t = trip(vec![point(21 * 3600, 1.0), point(22 * 3600, 1.0)]);
        let v = aggregate_trip(&t, &AggregateOptions::default());
        assert_eq!(v.values()[HOUR_OF_DAY_MEAN], 22.5);
        assert_eq!(v.values()[DAY_OF_WEEK_MEAN], 3.0);
    }

    #[test]
    fn midnight_wrap_is_not_corrected() {
        // 23:30 and 00:30 local average to 12.0 with the arithmetic mean.
        let t = trip(vec![
            point(22 * 3600 + 1800, 1.0),
            point(23 * 3600 + 1800, 1.0),
        ]);
        let v = aggregate_trip(&t, &AggregateOptions::default());
        assert_eq!(v.values()[HOUR_OF_DAY_MEAN], 12.0);
    }

    #[test]
    fn constant_thirds_keep_mean_in_range() {
        let t = trip(vec![point(1, 0.1), point(2, 0.1), point(3, 0.1)]);
        let v = aggregate_trip(&t, &AggregateOptions::default());
        assert_eq!(v.get("speed_mean"), Some(0.1));
        assert_eq!(v.get("speed_std"), Some(0.0));
    }

    #[test]
    fn dataset_shapes_and_order() {
        assert!(matches!(
            build_dataset(&[], &AggregateOptions::default()),
            Err(Error::EmptyCorpus)
        ));
        let mk = |id: &str, s: f64, inf: u8| {
            let mut p = point(5, s);
            p.trip_id = id.into();
            TripRecord::new(id, 0, vec![p], inf).unwrap()
        };
        let trips = vec![mk("a", 1.0, 1), mk("b", 2.0, 0), mk("c", 3.0, 0)];
        let opts = AggregateOptions::default();
        let ds = build_dataset(&trips[..1], &opts).unwrap();
        assert_eq!((ds.n_rows(), ds.n_features()), (1, 47));
        assert!(ds.is_canonical());

        let ds = build_dataset(&trips, &opts).unwrap();
        let rev: Vec<TripRecord> = trips.iter().rev().cloned().collect();
        let ds_rev = build_dataset(&rev, &opts).unwrap();
        for i in 0..3 {
            assert_eq!(ds.features()[i], ds_rev.features()[2 - i]);
            assert_eq!(ds.trip_ids()[i], ds_rev.trip_ids()[2 - i]);
        }
        assert_eq!(ds.labels(), &[1, 0, 0]);
    }

    #[test]
    fn features_csv_round_trip() {
        let t = trip(vec![point(100, 10.0), point(101, 20.25)]);
        let ds = build_dataset(&[t], &AggregateOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &ds).unwrap();
        let back = read_features_csv(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    fn pts(values: &[(f64, f64)]) -> Vec<RawRecord> {
        values
            .iter()
            .enumerate()
            .map(|(i, &(s, c))| {
                let mut p = point(1_700_000_000 + 37 * i as i64, s);
                p.course = c;
                p.acc_y = s - c / 10.0;
                p
            })
            .collect()
    }

    proptest! {
        #[test]
        fn channel_invariants(values in proptest::collection::vec((0.0f64..150.0, 0.0f64..359.9), 1..40)) {
            let t = trip(pts(&values));
            let v = aggregate_trip(&t, &AggregateOptions::default());
            for c in 0..N_CHANNELS {
                let (mean, min, max, std) = (v.stat(c, 0), v.stat(c, 1), v.stat(c, 2), v.stat(c, 3));
                prop_assert!(min <= mean && mean <= max);
                prop_assert!(std >= 0.0);
                prop_assert_eq!(std == 0.0, min == max);
            }
        }

        #[test]
        fn order_free(values in proptest::collection::vec((0.0f64..150.0, 0.0f64..359.9), 1..30), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let p = pts(&values);
            let mut shuffled = p.clone();
            shuffled.shuffle(&mut crate::rng::seeded(seed));
            let a = aggregate_trip(&trip(p), &AggregateOptions::default());
            // TripRecord::new re-sorts; aggregate the raw shuffled order directly too.
            let raw = TripRecord { trip_id: "t".into(), driver_type: 1, points: shuffled, influence: 0 };
            let b = aggregate_trip(&raw, &AggregateOptions::default());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn duplicate_point_keeps_extremes(values in proptest::collection::vec((0.0f64..150.0, 0.0f64..359.9), 1..30), pick in 0usize..30) {
            let p = pts(&values);
            let a = aggregate_trip(&trip(p.clone()), &AggregateOptions::default());
            let mut q = p.clone();
            q.push(p[pick % p.len()].clone());
            let b = aggregate_trip(&trip(q), &AggregateOptions::default());
            for c in 0..N_CHANNELS {
                prop_assert_eq!(a.stat(c, 1), b.stat(c, 1));
                prop_assert_eq!(a.stat(c, 2), b.stat(c, 2));
            }
        }
    }
}
