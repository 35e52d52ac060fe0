//! Files written by a run and read back by `report`.
//!
//! | file | header |
//! |---|---|
//! | `metrics.csv` | `t,user_id,strategy,snr_db,throughput_mbps,in_overhead,path_used,angle_error_deg,rss_dbm,direct_blocked` |
//! | `tracks.csv` | `t,user_id,x,y,direct_angle,reflected_angle_or_blank,misses` |
//! | `reflectors.csv` | `x1,y1,x2,y2,phi,n_obs` |
//! | `blockage_events.csv` | `t_predicted,user_id,path,t_arrival,duration` |
//! | `recalibrations.csv` | `t,user_id,x,y` |
//! | `summary.json` | per strategy statistics |
//! | `frames/frame_NNNNN.bin` | raw radar frames, see [`crate::radar::RadarFrame::write_to`] |
//!
//! Floats use Rust's shortest round-trip formatting, so identical runs give
//! identical bytes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::blockage::BlockageEvent;
use crate::context::ReflectorEstimate;
use crate::error::{Error, Result};
use crate::link::{PathUsed, Strategy, ThroughputSample};

use super::metrics::{cdf, summarize, MetricsLog, StrategySummary, TrackRecord};

fn write_lines(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every artifact of `log` into `dir`, creating it if needed.
pub fn write_run(dir: &Path, log: &MetricsLog) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_lines(&dir.join("metrics.csv"), ThroughputSample::CSV_HEADER, log.samples.iter().map(|s| s.csv_row()))?;
    write_lines(&dir.join("tracks.csv"), TrackRecord::CSV_HEADER, log.track_log.iter().map(|r| r.csv_row()))?;
    write_lines(&dir.join("reflectors.csv"), ReflectorEstimate::CSV_HEADER, log.reflectors.iter().map(|r| r.csv_row()))?;
    write_lines(&dir.join("blockage_events.csv"), BlockageEvent::CSV_HEADER, log.events.iter().map(|e| e.csv_row()))?;
    write_lines(
        &dir.join("recalibrations.csv"),
        "t,user_id,x,y",
        log.recalibrations
            .iter()
            .flat_map(|m| m.tracks.iter().map(move |(id, p)| format!("{},{},{},{}", m.t, id, p.x, p.y))),
    )?;
    if !log.samples.is_empty() {
        let summary = summarize(log)?;
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(dir.join("summary.json"), text + "\n")?;
    }
    if !log.frames.is_empty() {
        let fdir = dir.join("frames");
        fs::create_dir_all(&fdir)?;
        for (i, f) in log.frames.iter().enumerate() {
            let mut w = BufWriter::new(File::create(fdir.join(format!("frame_{i:05}.bin")))?);
            f.write_to(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn parse_path_used(s: &str) -> Option<PathUsed> {
    match s {
        "direct" => Some(PathUsed::Direct),
        "multi" => Some(PathUsed::Multi),
        "outage" => Some(PathUsed::Outage),
        _ => s.strip_prefix("reflected(")?.strip_suffix(')')?.parse().ok().map(PathUsed::Reflected),
    }
}

fn parse_sample(line: &str, lineno: usize) -> Result<ThroughputSample> {
    let bad = |what: &str| Error::config(format!("metrics.csv line {lineno}"), format!("bad {what}"));
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 10 {
        return Err(bad("field count"));
    }
    let num = |i: usize, what: &str| f64::from_str(f[i]).map_err(|_| bad(what));
    Ok(ThroughputSample {
        t: num(0, "t")?,
        user_id: f[1].parse().map_err(|_| bad("user_id"))?,
        strategy: Strategy::from_str(f[2])?,
        snr_db: num(3, "snr_db")?,
        throughput_mbps: num(4, "throughput_mbps")?,
        in_overhead: f[5].parse().map_err(|_| bad("in_overhead"))?,
        path_used: parse_path_used(f[6]).ok_or_else(|| bad("path_used"))?,
        angle_error_deg: num(7, "angle_error_deg")?,
        rss_dbm: num(8, "rss_dbm")?,
        direct_blocked: f[9].parse().map_err(|_| bad("direct_blocked"))?,
    })
}

/// Reads `metrics.csv` back into samples.
pub fn read_samples(path: &Path) -> Result<Vec<ThroughputSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let mut lines = text.lines();
    if lines.next() != Some(ThroughputSample::CSV_HEADER) {
        return Err(Error::config(path.display().to_string(), "unexpected header"));
    }
    lines.enumerate().map(|(i, l)| parse_sample(l, i + 2)).collect()
}

fn write_cdf(path: &Path, log: &MetricsLog, value: impl Fn(&ThroughputSample) -> f64) -> Result<()> {
    let strategies = log.strategies();
    let mut cols = Vec::new();
    for s in &strategies {
        let v: Vec<f64> = log.samples_for(*s).map(&value).collect();
        cols.push(cdf(&v)?);
    }
    let header = std::iter::once("percentile".to_string())
        .chain(strategies.iter().map(|s| s.to_string()))
        .collect::<Vec<_>>()
        .join(",");
    let rows = (0..=100).map(|p| {
        std::iter::once(p.to_string())
            .chain(cols.iter().map(|c| c[p].1.to_string()))
            .collect::<Vec<_>>()
            .join(",")
    });
    write_lines(path, &header, rows)
}

/// Summarizes a run directory: writes `cdf_throughput.csv`,
/// `cdf_angle_error.csv` and `report.txt`, and returns the text.
pub fn report(dir: &Path) -> Result<String> {
    let samples = read_samples(&dir.join("metrics.csv"))?;
    let mut log = MetricsLog { samples, ..MetricsLog::default() };
    // overhead shares are not in the per-sample CSV
    if let Ok(text) = fs::read_to_string(dir.join("summary.json")) {
        let prev: BTreeMap<String, StrategySummary> =
            serde_json::from_str(&text).map_err(|e| Error::config("summary.json", e.to_string()))?;
        for (name, s) in prev {
            log.overhead.push((Strategy::from_str(&name)?, s.overhead_fraction));
        }
    }
    let summary = summarize(&log)?;
    write_cdf(&dir.join("cdf_throughput.csv"), &log, |s| s.throughput_mbps)?;
    write_cdf(&dir.join("cdf_angle_error.csv"), &log, |s| s.angle_error_deg)?;

    let mut text = String::new();
    text.push_str(&format!(
        "{:<18} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9} {:>9}\n",
        "strategy", "tput_p20", "tput_med", "tput_p90", "err_med", "err_p90", "overhead", "outage"
    ));
    for s in log.strategies() {
        let x = &summary[s.name()];
        text.push_str(&format!(
            "{:<18} {:>10.1} {:>10.1} {:>10.1} {:>10.2} {:>10.2} {:>8.3}% {:>8.2}%\n",
            s.name(),
            x.throughput_mbps.p20,
            x.throughput_mbps.median,
            x.throughput_mbps.p90,
            x.angle_error_deg.median,
            x.angle_error_deg.p90,
            100.0 * x.overhead_fraction,
            100.0 * x.outage_fraction
        ));
    }
    let med = |s: Strategy| summary.get(s.name()).map(|x| x.throughput_mbps.median);
    if let (Some(a), Some(b)) = (med(Strategy::CommradSingle), med(Strategy::NonCollaborative)) {
        if b > 0.0 {
            text.push_str(&format!("median throughput commrad_single / non_collaborative: {:.2}\n", a / b));
        }
    }
    fs::write(dir.join("report.txt"), &text)?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_scenario, scenarios::builtin, ExperimentConfig};
    use crate::radar::RadarFrame;

    #[test]
    fn write_then_report() {
        let mut scene = builtin("blocker_crossing", 1).unwrap();
        scene.duration = 1.0;
        let mut cfg = ExperimentConfig::new(scene);
        cfg.dump_frames = true;
        let log = run_scenario(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &log).unwrap();
        let back = read_samples(&dir.path().join("metrics.csv")).unwrap();
        assert_eq!(back, log.samples);
        let frames: Vec<_> = fs::read_dir(dir.path().join("frames")).unwrap().collect();
        assert_eq!(frames.len(), 5);
        let f0 = RadarFrame::read_from(File::open(dir.path().join("frames/frame_00000.bin")).unwrap()).unwrap();
        assert_eq!(f0.raw.shape(), log.frames[0].raw.shape());
        let text = report(dir.path()).unwrap();
        assert!(text.contains("commrad_single"));
        let cdf = fs::read_to_string(dir.path().join("cdf_throughput.csv")).unwrap();
        assert_eq!(cdf.lines().count(), 102);
    }

    #[test]
    fn path_used_round_trip() {
        for p in [PathUsed::Direct, PathUsed::Multi, PathUsed::Outage, PathUsed::Reflected(3)] {
            assert_eq!(parse_path_used(&p.to_string()), Some(p));
        }
        assert_eq!(parse_path_used("reflected(x)"), None);
    }
}
