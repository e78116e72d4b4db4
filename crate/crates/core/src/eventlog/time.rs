use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::Event;
use crate::error::{Error, Result};

/// Seconds since the previous event and since the first event, per event.
pub fn time_deltas(events: &[Event]) -> (Vec<i64>, Vec<i64>) {
    let mut since_prev = Vec::with_capacity(events.len());
    let mut since_start = Vec::with_capacity(events.len());
    let mut acc = 0i64;
    for (i, e) in events.iter().enumerate() {
        let d = if i == 0 {
            0
        } else {
            (e.timestamp - events[i - 1].timestamp).max(0)
        };
        acc += d;
        since_prev.push(d);
        since_start.push(acc);
    }
    (since_prev, since_start)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFeature {
    SincePrevious,
    SinceCaseStart,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketStrategy {
    /// Equal-width buckets between the training minimum and maximum.
    #[default]
    EqualWidth,
    /// Equal-frequency buckets from training quantiles.
    Quantile,
}

/// Quantizer for a continuous time feature.
///
/// `edges` are the inner boundaries; a value `v` falls in bucket
/// `#{e in edges : e <= v}`. Empty `edges` means a single effective bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeBuckets {
    pub feature: TimeFeature,
    pub count: usize,
    pub edges: Vec<f64>,
}

impl TimeBuckets {
    pub fn index(&self, v: f64) -> usize {
        bucketize(v, self)
    }
}

pub fn fit_buckets(
    feature: TimeFeature,
    values: &[f64],
    count: usize,
    strategy: BucketStrategy,
) -> Result<TimeBuckets> {
    if values.is_empty() {
        return Err(Error::Invalid("cannot fit buckets on no values".into()));
    }
    if count < 2 {
        return Err(Error::Invalid(format!("bucket count must be >= 2, got {count}")));
    }
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::NonFinite("bucket training values".into()));
    }
    let edges = if min == max {
        Vec::new()
    } else {
        match strategy {
            BucketStrategy::EqualWidth => {
                let width = (max - min) / count as f64;
                (1..count).map(|i| min + width * i as f64).collect()
            }
            BucketStrategy::Quantile => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                let mut edges: Vec<f64> = (1..count)
                    .map(|i| sorted[(i * sorted.len() / count).min(sorted.len() - 1)])
                    .filter(|&e| e > min)
                    .collect();
                edges.dedup();
                edges
            }
        }
    };
    Ok(TimeBuckets {
        feature,
        count,
        edges,
    })
}

/// Bucket index of `v`; values outside the fitted range clamp to the end buckets.
pub fn bucketize(v: f64, buckets: &TimeBuckets) -> usize {
    buckets.edges.partition_point(|&e| e <= v)
}

/// Parses a timestamp to unix seconds. With no format, RFC 3339 and a few
/// ISO-8601 variants without offset are accepted.
pub(crate) fn parse_timestamp(s: &str, fmt: Option<&str>) -> Option<i64> {
    let s = s.trim();
    match fmt {
        Some("rfc3339") | None => DateTime::parse_from_rfc3339(s)
            .map(|d| d.timestamp())
            .ok()
            .or_else(|| {
                ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f%z"]
                    .iter()
                    .find_map(|f| parse_with(s, f))
            }),
        Some(f) => parse_with(s, f),
    }
}

fn parse_with(s: &str, fmt: &str) -> Option<i64> {
    if let Ok(d) = DateTime::parse_from_str(s, fmt) {
        return Some(d.timestamp());
    }
    if let Ok(d) = NaiveDateTime::parse_from_str(s, fmt) {
        return Some(d.and_utc().timestamp());
    }
    NaiveDate::parse_from_str(s, fmt)
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(t: i64) -> Event {
        Event {
            activity: 2,
            timestamp: t,
            attrs: vec![],
        }
    }

    #[test]
    fn deltas_for_daily_events() {
        let day = |d| parse_timestamp(&format!("{d:02}/03/2012"), Some("%d/%m/%Y")).unwrap();
        let evs = [ev(day(1)), ev(day(2)), ev(day(3))];
        let (prev, start) = time_deltas(&evs);
        assert_eq!(prev, vec![0, 86400, 86400]);
        assert_eq!(start, vec![0, 86400, 172800]);
    }

    #[test]
    fn single_and_tied_events() {
        assert_eq!(time_deltas(&[ev(5)]), (vec![0], vec![0]));
        assert_eq!(time_deltas(&[ev(5), ev(5)]).0, vec![0, 0]);
    }

    #[test]
    fn equal_width_edges() {
        let b = fit_buckets(TimeFeature::SincePrevious, &[0.0, 10.0], 10, BucketStrategy::EqualWidth)
            .unwrap();
        let expected: Vec<f64> = (1..10).map(f64::from).collect();
        assert_eq!(b.edges, expected);
        assert_eq!(bucketize(0.0, &b), 0);
        assert_eq!(bucketize(10.0, &b), 9);
        assert_eq!(bucketize(1e9, &b), 9);
        assert_eq!(bucketize(-3.0, &b), 0);
    }

    #[test]
    fn degenerate_values_use_one_bucket() {
        let b = fit_buckets(TimeFeature::SinceCaseStart, &[4.0; 6], 10, BucketStrategy::EqualWidth)
            .unwrap();
        for v in [0.0, 4.0, 100.0] {
            assert_eq!(bucketize(v, &b), 0);
        }
    }

    #[test]
    fn fit_errors() {
        assert!(fit_buckets(TimeFeature::SincePrevious, &[], 10, BucketStrategy::EqualWidth).is_err());
        assert!(fit_buckets(TimeFeature::SincePrevious, &[1.0], 1, BucketStrategy::EqualWidth).is_err());
    }

    #[test]
    fn quantile_edges_are_strictly_ascending() {
        let vals: Vec<f64> = (0..100).map(|i| (i / 10) as f64).collect();
        let b = fit_buckets(TimeFeature::SincePrevious, &vals, 10, BucketStrategy::Quantile).unwrap();
        assert!(b.edges.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(bucketize(0.0, &b), 0);
        assert_eq!(bucketize(9.0, &b), b.edges.len());
    }

    #[test]
    fn timestamp_formats() {
        assert_eq!(parse_timestamp("1970-01-01T00:01:00.000+00:00", None), Some(60));
        assert_eq!(parse_timestamp("1970-01-01T00:01:00+01:00", None), Some(60 - 3600));
        assert_eq!(parse_timestamp("1970-01-01 00:00:02", None), Some(2));
        assert_eq!(parse_timestamp("02/01/1970", Some("%d/%m/%Y")), Some(86400));
        assert_eq!(parse_timestamp("garbage", None), None);
    }

    proptest! {
        #[test]
        fn training_values_land_in_range(vals in proptest::collection::vec(0.0f64..1e7, 1..200), n in 2usize..20) {
            let b = fit_buckets(TimeFeature::SincePrevious, &vals, n, BucketStrategy::EqualWidth).unwrap();
            prop_assert!(b.edges.windows(2).all(|w| w[0] < w[1]));
            for &v in &vals {
                prop_assert!(bucketize(v, &b) < n);
            }
        }

        #[test]
        fn bucketize_is_monotone(vals in proptest::collection::vec(0.0f64..1e5, 2..50), a in 0.0f64..2e5, b in 0.0f64..2e5) {
            let bk = fit_buckets(TimeFeature::SincePrevious, &vals, 10, BucketStrategy::EqualWidth).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(bucketize(lo, &bk) <= bucketize(hi, &bk));
        }

        #[test]
        fn since_start_is_prefix_sum(ts in proptest::collection::vec(0i64..1_000_000, 1..30)) {
            let mut ts = ts;
            ts.sort();
            let evs: Vec<Event> = ts.iter().map(|&t| ev(t)).collect();
            let (prev, start) = time_deltas(&evs);
            prop_assert_eq!(prev[0], 0);
            let mut acc = 0;
            for i in 0..evs.len() {
                acc += prev[i];
                prop_assert!(prev[i] >= 0);
                prop_assert_eq!(start[i], acc);
            }
        }
    }
}
