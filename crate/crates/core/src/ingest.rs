//! Sensor-log CSV parsing, cleaning, label encoding and trip grouping.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::model::{RawRecord, TripRecord};
use crate::{Error, Result};

/// Ingestion column names, in the order the writer emits them.
pub const COLUMNS: [&str; 16] = [
    "tripId",
    "driverId",
    "driverType",
    "tickTimestamp",
    "latitude",
    "longitude",
    "speed",
    "midSpeed",
    "accX",
    "accY",
    "accZ",
    "course",
    "height",
    "totalMeters",
    "influence",
    "pointDate",
];

/// Columns that must be present in the header. `pointDate` is optional.
const REQUIRED: usize = 15;

/// Offset from UTC in minutes, within ±14 h.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtcOffset(i32);

impl UtcOffset {
    /// West Africa Time, UTC+1.
    pub const WAT: UtcOffset = UtcOffset(60);
    pub const UTC: UtcOffset = UtcOffset(0);

    pub fn from_minutes(minutes: i32) -> Result<Self> {
        if (-840..=840).contains(&minutes) {
            Ok(Self(minutes))
        } else {
            Err(Error::InvalidConfig(format!(
                "utc offset {minutes} min outside [-840, 840]"
            )))
        }
    }

    pub fn minutes(self) -> i32 {
        self.0
    }
}

impl Default for UtcOffset {
    fn default() -> Self {
        Self::WAT
    }
}

/// Outcome of encoding one influence report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Influence {
    Valid(u8),
    Invalid,
    Missing,
}

/// Per-run tallies of the cleaning step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub trips_in: usize,
    pub trips_kept: usize,
    pub trips_dropped_no_report: usize,
    pub trips_dropped_invalid_influence: usize,
    pub points_in: usize,
    pub points_kept: usize,
}

fn column_positions(headers: &csv::StringRecord) -> Result<[Option<usize>; 16]> {
    let mut pos = [None; 16];
    for (k, name) in COLUMNS.iter().enumerate() {
        pos[k] = headers.iter().position(|h| h.trim() == *name);
        if k < REQUIRED && pos[k].is_none() {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    Ok(pos)
}

/// Parses a sensor log. Extra columns (lateral, yaw, gyroscope, ...) are
/// ignored. Rows are returned in file order.
pub fn parse_sensor_csv<R: Read>(source: R) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let pos = column_positions(reader.headers()?)?;

    let mut out = Vec::new();
    let mut row = csv::StringRecord::new();
    while reader.read_record(&mut row)? {
        let line = row.position().map_or(0, |p| p.line());
        let cell = |k: usize| pos[k].and_then(|i| row.get(i)).unwrap_or("").trim();
        let real = |k: usize| -> Result<f64> {
            let v = cell(k);
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::MalformedRow {
                    line,
                    column: COLUMNS[k].to_string(),
                    value: v.to_string(),
                })
        };
        let optional = |k: usize| {
            let v = cell(k);
            (!v.is_empty()).then(|| v.to_string())
        };
        let ts_text = cell(3);
        let tick_timestamp = ts_text.parse::<i64>().map_err(|_| Error::MalformedRow {
            line,
            column: COLUMNS[3].to_string(),
            value: ts_text.to_string(),
        })?;

        let record = RawRecord {
            trip_id: cell(0).to_string(),
            driver_id: cell(1).to_string(),
            driver_type_raw: cell(2).to_string(),
            tick_timestamp,
            latitude: real(4)?,
            longitude: real(5)?,
            speed: real(6)?,
            mid_speed: real(7)?,
            acc_x: real(8)?,
            acc_y: real(9)?,
            acc_z: real(10)?,
            course: real(11)?,
            height: real(12)?,
            total_meters: real(13)?,
            influence_raw: optional(14),
            point_date: optional(15),
        };
        if record.trip_id.is_empty() {
            return Err(Error::MalformedRow {
                line,
                column: "tripId".into(),
                value: String::new(),
            });
        }
        if let Err(field) = record.check() {
            let k = COLUMNS.iter().position(|c| *c == field).unwrap_or(0);
            return Err(Error::MalformedRow {
                line,
                column: field.to_string(),
                value: cell(k).to_string(),
            });
        }
        out.push(record);
    }
    Ok(out)
}

/// Writes records in the ingestion schema. Reals use the shortest decimal
/// text that round-trips, so `parse_sensor_csv` recovers identical values.
pub fn write_sensor_csv<'a, W: Write>(
    sink: W,
    records: impl IntoIterator<Item = &'a RawRecord>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record([
            r.trip_id.clone(),
            r.driver_id.clone(),
            r.driver_type_raw.clone(),
            r.tick_timestamp.to_string(),
            r.latitude.to_string(),
            r.longitude.to_string(),
            r.speed.to_string(),
            r.mid_speed.to_string(),
            r.acc_x.to_string(),
            r.acc_y.to_string(),
            r.acc_z.to_string(),
            r.course.to_string(),
            r.height.to_string(),
            r.total_meters.to_string(),
            r.influence_raw.clone().unwrap_or_default(),
            r.point_date.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every point of every trip in the ingestion schema.
pub fn write_trips_csv<W: Write>(sink: W, trips: &[TripRecord]) -> Result<()> {
    write_sensor_csv(sink, trips.iter().flat_map(|t| t.points.iter()))
}

fn allowed_influence_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, ' ' | ',' | '-' | '_')
}

/// Binarizes a self-reported influence: alcohol → 1, anything else → 0.
pub fn encode_influence(raw: Option<&str>) -> Influence {
    let Some(s) = raw.map(str::trim).filter(|s| !s.is_empty()) else {
        return Influence::Missing;
    };
    if !s.chars().all(allowed_influence_char) {
        return Influence::Invalid;
    }
    if s.to_ascii_lowercase().contains("alcohol") {
        Influence::Valid(1)
    } else {
        Influence::Valid(0)
    }
}

fn encode_driver_type(raw: &str) -> Option<u8> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "public" => Some(1),
        "private" => Some(0),
        _ => None,
    }
}

/// Groups points into trips (first-appearance order), sorts each trip by
/// timestamp, and drops trips with a missing or invalid influence report.
pub fn clean_and_group(records: Vec<RawRecord>) -> Result<(Vec<TripRecord>, CleaningReport)> {
    let mut report = CleaningReport {
        points_in: records.len(),
        ..Default::default()
    };

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<RawRecord>> = HashMap::new();
    for r in records {
        match groups.get_mut(&r.trip_id) {
            Some(g) => g.push(r),
            None => {
                order.push(r.trip_id.clone());
                groups.insert(r.trip_id.clone(), vec![r]);
            }
        }
    }
    report.trips_in = order.len();

    let mut trips = Vec::new();
    for trip_id in order {
        let mut points = groups.remove(&trip_id).expect("grouped above");

        let mut report_text: Option<&str> = None;
        for p in &points {
            if let Some(s) = p
                .influence_raw
                .as_deref()
                .map(str::trim)
                .filter(|s| !s.is_empty())
            {
                match report_text {
                    Some(prev) if prev != s => return Err(Error::ConflictingInfluence(trip_id)),
                    _ => report_text = Some(s),
                }
            }
        }
        let influence = match encode_influence(report_text) {
            Influence::Missing => {
                report.trips_dropped_no_report += 1;
                continue;
            }
            Influence::Invalid => {
                report.trips_dropped_invalid_influence += 1;
                continue;
            }
            Influence::Valid(v) => v,
        };

        let driver_type = encode_driver_type(&points[0].driver_type_raw).ok_or_else(|| {
            Error::InvalidDriverType {
                trip_id: trip_id.clone(),
                value: points[0].driver_type_raw.clone(),
            }
        })?;
        if points
            .iter()
            .any(|p| encode_driver_type(&p.driver_type_raw) != Some(driver_type))
        {
            return Err(Error::ConflictingDriverType(trip_id));
        }

        points.sort_by_key(|p| p.tick_timestamp);
        report.trips_kept += 1;
        report.points_kept += points.len();
        trips.push(TripRecord {
            trip_id,
            driver_type,
            points,
            influence,
        });
    }
    Ok((trips, report))
}

/// Local hour of day (fractional) and weekday (Monday = 0).
pub fn decompose_timestamp(tick_timestamp: i64, offset: UtcOffset) -> (f64, u8) {
    let local = tick_timestamp + i64::from(offset.minutes()) * 60;
    let days = local.div_euclid(86_400);
    let secs = local.rem_euclid(86_400);
    // 1970-01-01 was a Thursday.
    let weekday = (days + 3).rem_euclid(7) as u8;
    (secs as f64 / 3600.0, weekday)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{DateTime, Datelike, FixedOffset, Timelike};
    use proptest::prelude::*;

    const HEADER: &str = "tripId,driverId,driverType,tickTimestamp,latitude,longitude,speed,midSpeed,accX,accY,accZ,course,height,totalMeters,influence";

    fn row(trip: &str, ts: i64, influence: &str) -> String {
        format!("{trip},d1,public,{ts},6.5,3.4,30.5,29,0.1,-0.2,9.8,90,40,100,{influence}")
    }

    fn parse(lines: &[String]) -> Result<Vec<RawRecord>> {
        let text = format!("{HEADER}\n{}\n", lines.join("\n"));
        parse_sensor_csv(text.as_bytes())
    }

    #[test]
    fn parses_minimal_file() {
        let recs = parse(&[row("t1", 100, "alcohol")]).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].speed, 30.5);
        assert_eq!(recs[0].influence_raw.as_deref(), Some("alcohol"));
        assert_eq!(recs[0].point_date, None);
    }

    #[test]
    fn bad_speed_names_the_line() {
        let bad = "t1,d1,public,101,6.5,3.4,abc,29,0.1,-0.2,9.8,90,40,100,".to_string();
        let err = parse(&[row("t1", 100, ""), bad]).unwrap_err();
        match err {
            Error::MalformedRow {
                line,
                column,
                value,
            } => {
                assert_eq!(line, 3);
                assert_eq!(column, "speed");
                assert_eq!(value, "abc");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn out_of_range_course_is_malformed() {
        let bad = "t1,d1,public,101,6.5,3.4,3,29,0.1,-0.2,9.8,360,40,100,".to_string();
        assert!(matches!(
            parse(&[bad]),
            Err(Error::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn missing_column_is_reported() {
        let text = "tripId,driverId\nt1,d1\n";
        match parse_sensor_csv(text.as_bytes()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "driverType"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lateral_and_yaw_are_ignored() {
        let text = "tripId,lateral,driverId,driverType,tickTimestamp,latitude,longitude,speed,midSpeed,accX,accY,accZ,course,height,totalMeters,influence,yaw\n\
                    t1,,d1,private,5,6.5,3.4,10,10,0,0,9.8,0,1,0,fatigue,\n";
        let recs = parse_sensor_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].driver_type_raw, "private");
    }

    #[test]
    fn influence_encoding() {
        assert_eq!(encode_influence(Some("alcohol")), Influence::Valid(1));
        assert_eq!(
            encode_influence(Some("Alcohol intake")),
            Influence::Valid(1)
        );
        assert_eq!(encode_influence(Some("fatigue")), Influence::Valid(0));
        assert_eq!(encode_influence(Some("phone use")), Influence::Valid(0));
        assert_eq!(encode_influence(Some("")), Influence::Missing);
        assert_eq!(encode_influence(Some("   ")), Influence::Missing);
        assert_eq!(encode_influence(None), Influence::Missing);
        assert_eq!(encode_influence(Some("über#fast")), Influence::Invalid);
        assert_eq!(encode_influence(Some("alcohol!")), Influence::Invalid);
    }

    #[test]
    fn drops_unreported_trips() {
        let recs = parse(&[
            row("a", 1, "alcohol"),
            row("b", 1, ""),
            row("b", 2, ""),
            row("c", 1, "none"),
        ])
        .unwrap();
        let (trips, rep) = clean_and_group(recs).unwrap();
        assert_eq!(trips.len(), 2);
        assert_eq!(rep.trips_in, 3);
        assert_eq!(rep.trips_dropped_no_report, 1);
        assert_eq!(rep.points_in, 4);
        assert_eq!(rep.points_kept, 2);
        assert_eq!(trips[0].influence, 1);
        assert_eq!(trips[1].influence, 0);
        assert_eq!(trips[0].driver_type, 1);
    }

    #[test]
    fn drops_invalid_influence() {
        let recs = parse(&[row("a", 1, "über#fast"), row("b", 1, "none")]).unwrap();
        let (trips, rep) = clean_and_group(recs).unwrap();
        assert_eq!(trips.len(), 1);
        assert_eq!(rep.trips_dropped_invalid_influence, 1);
        assert_eq!(
            rep.trips_kept + rep.trips_dropped_no_report + rep.trips_dropped_invalid_influence,
            rep.trips_in
        );
    }

    #[test]
    fn influence_on_last_row_only_is_accepted() {
        let recs = parse(&[row("a", 1, ""), row("a", 2, ""), row("a", 3, "alcohol")]).unwrap();
        let (trips, _) = clean_and_group(recs).unwrap();
        assert_eq!(trips[0].influence, 1);
        assert_eq!(trips[0].points.len(), 3);
    }

    #[test]
    fn conflicting_influence_errors() {
        let recs = parse(&[row("a", 1, "alcohol"), row("a", 2, "fatigue")]).unwrap();
        assert!(matches!(clean_and_group(recs), Err(Error::ConflictingInfluence(t)) if t == "a"));
    }

    #[test]
    fn points_are_sorted() {
        let recs = parse(&[
            row("a", 30, "none"),
            row("a", 10, "none"),
            row("a", 20, "none"),
        ])
        .unwrap();
        let (trips, _) = clean_and_group(recs).unwrap();
        let ts: Vec<i64> = trips[0].points.iter().map(|p| p.tick_timestamp).collect();
        assert_eq!(ts, vec![10, 20, 30]);
    }

    #[test]
    fn bad_driver_type_errors() {
        let text = format!("{HEADER}\nt1,d1,taxi,5,6.5,3.4,10,10,0,0,9.8,0,1,0,none\n");
        let recs = parse_sensor_csv(text.as_bytes()).unwrap();
        assert!(matches!(
            clean_and_group(recs),
            Err(Error::InvalidDriverType { .. })
        ));
    }

    #[test]
    fn timestamp_examples() {
        let (h, d) = decompose_timestamp(0, UtcOffset::WAT);
        assert_eq!((h, d), (1.0, 3));
        let (h, d) = decompose_timestamp(0, UtcOffset::UTC);
        assert_eq!((h, d), (0.0, 3));
        let (h, d) = decompose_timestamp(86_399, UtcOffset::UTC);
        assert!((h - (23.0 + 59.0 / 60.0 + 59.0 / 3600.0)).abs() < 1e-12);
        assert_eq!(d, 3);
        assert!(UtcOffset::from_minutes(841).is_err());
    }

    proptest! {
        // chrono serves as the independent calendar oracle.
        #[test]
        fn timestamp_matches_calendar(ts in 1i64..4_000_000_000, off in -840i32..=840) {
            let (h, d) = decompose_timestamp(ts, UtcOffset::from_minutes(off).unwrap());
            let tz = FixedOffset::east_opt(off * 60).unwrap();
            let dt = DateTime::from_timestamp(ts, 0).unwrap().with_timezone(&tz);
            let expect = dt.hour() as f64 + dt.minute() as f64 / 60.0 + dt.second() as f64 / 3600.0;
            prop_assert!((h - expect).abs() < 1e-12);
            prop_assert!((0.0..24.0).contains(&h));
            prop_assert_eq!(d as u32, dt.weekday().num_days_from_monday());
        }

        #[test]
        fn timestamp_day_shift(ts in 1i64..3_000_000_000, k in -1000i64..1000, off in -840i32..=840) {
            let off = UtcOffset::from_minutes(off).unwrap();
            let (h0, d0) = decompose_timestamp(ts, off);
            let (h1, d1) = decompose_timestamp(ts + 86_400 * k, off);
            prop_assert_eq!(h0, h1);
            prop_assert_eq!(d1 as i64, (d0 as i64 + k).rem_euclid(7));
        }

        #[test]
        fn trips_round_trip_through_csv(
            speeds in proptest::collection::vec(0.0f64..200.0, 1..20),
            lat in -90.0f64..=90.0,
            acc in -30.0f64..30.0,
        ) {
            let points: Vec<RawRecord> = speeds.iter().enumerate().map(|(i, &s)| RawRecord {
                trip_id: "trip-1".into(),
                driver_id: "drv".into(),
                driver_type_raw: "public".into(),
                tick_timestamp: 1_700_000_000 + i as i64,
                latitude: lat,
                longitude: 3.3792,
                speed: s,
                mid_speed: s / 3.0,
                acc_x: acc,
                acc_y: -acc / 7.0,
                acc_z: 9.81,
                course: (s * 1.7) % 360.0,
                height: -12.25,
                total_meters: s * i as f64,
                influence_raw: Some("alcohol".into()),
                point_date: Some("2023-11-14 22:13:20".into()),
            }).collect();
            let (trips, _) = clean_and_group(points).unwrap();
            let mut buf = Vec::new();
            write_trips_csv(&mut buf, &trips).unwrap();
            let (again, rep) = clean_and_group(parse_sensor_csv(buf.as_slice()).unwrap()).unwrap();
            prop_assert_eq!(rep.trips_kept, 1);
            prop_assert_eq!(again, trips);
        }
    }
}
