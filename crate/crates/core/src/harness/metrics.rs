//! Run logs and their summary statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blockage::BlockageEvent;
use crate::context::ReflectorEstimate;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::link::{PathUsed, Strategy, ThroughputSample};
use crate::radar::RadarFrame;

/// Track positions right after a recalibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecalMarker {
    pub t: f64,
    /// `(user_id, position)` sorted by user id.
    pub tracks: Vec<(usize, Point2)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub t: f64,
    pub user_id: usize,
    pub position: Point2,
    pub direct_angle: f64,
    pub reflected_angle: Option<f64>,
    pub misses: usize,
}

impl TrackRecord {
    pub const CSV_HEADER: &'static str = "t,user_id,x,y,direct_angle,reflected_angle_or_blank,misses";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t,
            self.user_id,
            self.position.x,
            self.position.y,
            self.direct_angle,
            self.reflected_angle.map(|a| a.to_string()).unwrap_or_default(),
            self.misses
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct MetricsLog {
    /// Sorted by `(t, user_id)`, strategies in config order.
    pub samples: Vec<ThroughputSample>,
    pub events: Vec<BlockageEvent>,
    pub recalibrations: Vec<RecalMarker>,
    pub track_log: Vec<TrackRecord>,
    /// Final reflector estimates of the primary sensing pipeline.
    pub reflectors: Vec<ReflectorEstimate>,
    /// Airtime share charged to each strategy.
    pub overhead: Vec<(Strategy, f64)>,
    /// Only filled when frame dumps are requested.
    pub frames: Vec<RadarFrame>,
}

impl MetricsLog {
    pub fn samples_for(&self, strategy: Strategy) -> impl Iterator<Item = &ThroughputSample> {
        self.samples.iter().filter(move |s| s.strategy == strategy)
    }

    /// `(t, user_id, strategy, degrees)` for every sample.
    pub fn angle_errors(&self) -> impl Iterator<Item = (f64, usize, Strategy, f64)> + '_ {
        self.samples.iter().map(|s| (s.t, s.user_id, s.strategy, s.angle_error_deg))
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        let mut out: Vec<Strategy> = Vec::new();
        for s in &self.samples {
            if !out.contains(&s.strategy) {
                out.push(s.strategy);
            }
        }
        out
    }

    /// Concatenates logs from independent runs, e.g. the scenes of a suite.
    pub fn merge(logs: impl IntoIterator<Item = MetricsLog>) -> MetricsLog {
        let mut out = MetricsLog::default();
        for l in logs {
            out.samples.extend(l.samples);
            out.events.extend(l.events);
            out.recalibrations.extend(l.recalibrations);
            out.track_log.extend(l.track_log);
            out.reflectors.extend(l.reflectors);
            for (s, o) in l.overhead {
                if !out.overhead.iter().any(|(q, _)| *q == s) {
                    out.overhead.push((s, o));
                }
            }
        }
        out
    }
}

/// Percentile with linear interpolation between closest ranks: rank
/// `h = (n-1)·p/100` on the sorted data.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile input"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Domain(format!("percentile {p} outside [0, 100]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&v, p))
}

fn percentile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Values at percentiles 0, 1, ..., 100.
pub fn cdf(values: &[f64]) -> Result<Vec<(u32, f64)>> {
    if values.is_empty() {
        return Err(Error::Empty("cdf input"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok((0..=100).map(|p| (p, percentile_sorted(&v, p as f64))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub median: f64,
    pub p20: f64,
    pub p90: f64,
    pub mean: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Stats> {
        if values.is_empty() {
            return Err(Error::Empty("statistics input"));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(Stats {
            median: percentile_sorted(&v, 50.0),
            p20: percentile_sorted(&v, 20.0),
            p90: percentile_sorted(&v, 90.0),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub throughput_mbps: Stats,
    pub angle_error_deg: Stats,
    pub overhead_fraction: f64,
    pub outage_fraction: f64,
    pub n_samples: usize,
}

/// Per-strategy statistics, keyed by strategy name.
pub fn summarize(log: &MetricsLog) -> Result<BTreeMap<String, StrategySummary>> {
    if log.samples.is_empty() {
        return Err(Error::Empty("metrics log"));
    }
    let mut out = BTreeMap::new();
    for s in log.strategies() {
        let samples: Vec<&ThroughputSample> = log.samples_for(s).collect();
        let tput: Vec<f64> = samples.iter().map(|x| x.throughput_mbps).collect();
        let err: Vec<f64> = samples.iter().map(|x| x.angle_error_deg).collect();
        let outages = samples.iter().filter(|x| x.path_used == PathUsed::Outage).count();
        out.insert(
            s.name().to_string(),
            StrategySummary {
                throughput_mbps: Stats::of(&tput)?,
                angle_error_deg: Stats::of(&err)?,
                overhead_fraction: log.overhead.iter().find(|(q, _)| *q == s).map_or(0.0, |(_, o)| *o),
                outage_fraction: outages as f64 / samples.len() as f64,
                n_samples: samples.len(),
            },
        );
    }
    Ok(out)
}

/// Ratio of the median throughputs of two strategies in a summary.
pub fn median_ratio(summary: &BTreeMap<String, StrategySummary>, num: Strategy, den: Strategy) -> Option<f64> {
    let a = summary.get(num.name())?.throughput_mbps.median;
    let b = summary.get(den.name())?.throughput_mbps.median;
    (b > 0.0).then(|| a / b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_two_level_series() {
        let mut v = vec![0.0; 100];
        v.extend(std::iter::repeat_n(1000.0, 100));
        assert_eq!(percentile(&v, 50.0).unwrap(), 500.0);
        assert_eq!(percentile(&v, 20.0).unwrap(), 0.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 1000.0);
    }

    #[test]
    fn percentile_hand_values() {
        // h = 3·0.25 = 0.75 → 1 + 0.75·(2-1)
        let v = [4.0, 1.0, 3.0, 2.0];
        assert!((percentile(&v, 25.0).unwrap() - 1.75).abs() < 1e-12);
        assert!(percentile(&[], 50.0).is_err());
        assert!(percentile(&v, 101.0).is_err());
    }

    #[test]
    fn constant_series_all_equal() {
        let s = Stats::of(&[7.0; 33]).unwrap();
        assert_eq!((s.median, s.p20, s.p90, s.mean), (7.0, 7.0, 7.0, 7.0));
        let c = cdf(&[7.0; 5]).unwrap();
        assert_eq!(c.len(), 101);
        assert!(c.iter().all(|&(_, v)| v == 7.0));
    }

    fn sample(strategy: Strategy, tput: f64) -> ThroughputSample {
        ThroughputSample {
            t: 0.0,
            user_id: 1,
            strategy,
            snr_db: 0.0,
            throughput_mbps: tput,
            in_overhead: false,
            path_used: if tput > 0.0 { PathUsed::Direct } else { PathUsed::Outage },
            angle_error_deg: 1.0,
            rss_dbm: -60.0,
            direct_blocked: false,
        }
    }

    #[test]
    fn summary_and_ratio() {
        let mut log = MetricsLog::default();
        assert!(summarize(&log).is_err());
        for i in 0..10 {
            log.samples.push(sample(Strategy::CommradSingle, 1000.0 + i as f64));
            log.samples.push(sample(Strategy::NonCollaborative, if i < 2 { 0.0 } else { 400.0 }));
        }
        let s = summarize(&log).unwrap();
        assert_eq!(s["non_collaborative"].outage_fraction, 0.2);
        let r = median_ratio(&s, Strategy::CommradSingle, Strategy::NonCollaborative).unwrap();
        assert!((r - 1004.5 / 400.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn percentiles_are_ordered(v in proptest::collection::vec(-1e3f64..1e3, 1..60)) {
            let s = Stats::of(&v).unwrap();
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            proptest::prop_assert!(lo <= s.p20 && s.p20 <= s.median && s.median <= s.p90 && s.p90 <= hi);
        }
    }
}
