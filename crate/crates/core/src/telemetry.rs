//! Telemetry log of a tracking run: one record per sample tick, a CSV
//! encoding, and the offline statistics used to summarize a run.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "t_s,commanded_az_deg,commanded_el_deg,readback_az_deg,\
readback_el_deg,beacon_db,receiver_volts,phase,cycle_index";

/// Tracking cycle phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Acquire,
    Estimate,
    Move,
    Wait,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Acquire => "acquire",
            Phase::Estimate => "estimate",
            Phase::Move => "move",
            Phase::Wait => "wait",
        }
    }

    /// The only phase allowed to follow this one.
    pub fn successor(self) -> Phase {
        match self {
            Phase::Acquire => Phase::Estimate,
            Phase::Estimate => Phase::Move,
            Phase::Move => Phase::Wait,
            Phase::Wait => Phase::Acquire,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "acquire" => Ok(Phase::Acquire),
            "estimate" => Ok(Phase::Estimate),
            "move" => Ok(Phase::Move),
            "wait" => Ok(Phase::Wait),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub commanded_az: f64,
    pub commanded_el: f64,
    pub readback_az: f64,
    pub readback_el: f64,
    pub beacon_db: f64,
    pub receiver_volts: f64,
    pub phase: Phase,
    pub cycle_index: u64,
}

impl TelemetryRecord {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            fixed6(self.t),
            fixed6(self.commanded_az),
            fixed6(self.commanded_el),
            fixed6(self.readback_az),
            fixed6(self.readback_el),
            fixed6(self.beacon_db),
            fixed6(self.receiver_volts),
            self.phase,
            self.cycle_index
        )
    }

    pub fn parse_csv_line(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("field {}: {e}", i + 1),
            })
        };
        Ok(Self {
            t: num(0)?,
            commanded_az: num(1)?,
            commanded_el: num(2)?,
            readback_az: num(3)?,
            readback_el: num(4)?,
            beacon_db: num(5)?,
            receiver_volts: num(6)?,
            phase: fields[7].parse().map_err(|msg| Error::Parse { line: line_no, msg })?,
            cycle_index: fields[8].parse().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("cycle_index: {e}"),
            })?,
        })
    }
}

/// Shortest round-trip decimal, padded to at least six decimal places.
fn fixed6(v: f64) -> String {
    let mut s = v.to_string();
    if !v.is_finite() {
        return s;
    }
    let decimals = match s.find('.') {
        Some(dot) => s.len() - dot - 1,
        None => {
            s.push('.');
            0
        }
    };
    for _ in decimals..6 {
        s.push('0');
    }
    s
}

/// Destination for telemetry records; enforces strictly increasing time.
pub trait TelemetrySink {
    fn append(&mut self, record: TelemetryRecord) -> Result<()>;
}

fn check_order(last: Option<f64>, t: f64) -> Result<()> {
    match last {
        Some(last) if !(t > last) => Err(Error::NonMonotonicTime { t, last }),
        _ => Ok(()),
    }
}

/// In-memory telemetry log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TelemetryLog {
    records: Vec<TelemetryRecord>,
}

impl TelemetryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[TelemetryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn beacon_stats(&self, t0: f64, t1: f64) -> Result<BeaconStats> {
        beacon_stats(&self.records, t0, t1)
    }

    pub fn extract_trajectory(&self, decimation: usize) -> Result<Vec<(f64, f64)>> {
        extract_trajectory(&self.records, decimation)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = CsvWriter::new(out)?;
        for r in &self.records {
            w.append(*r)?;
        }
        w.flush()
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut log = Self::new();
        for r in CsvReader::new(input) {
            log.append(r?)?;
        }
        Ok(log)
    }
}

impl TelemetrySink for TelemetryLog {
    fn append(&mut self, record: TelemetryRecord) -> Result<()> {
        check_order(self.records.last().map(|r| r.t), record.t)?;
        self.records.push(record);
        Ok(())
    }
}

/// Streams records to a CSV writer as they are appended.
pub struct CsvWriter<W: Write> {
    out: W,
    last_t: Option<f64>,
    count: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self {
            out,
            last_t: None,
            count: 0,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> TelemetrySink for CsvWriter<W> {
    fn append(&mut self, record: TelemetryRecord) -> Result<()> {
        check_order(self.last_t, record.t)?;
        writeln!(self.out, "{}", record.to_csv_line())?;
        self.last_t = Some(record.t);
        self.count += 1;
        Ok(())
    }
}

/// Iterates the records of a CSV log, checking the header.
pub struct CsvReader<R: BufRead> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> CsvReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            lines: input.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for CsvReader<R> {
    type Item = Result<TelemetryRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if self.line_no == 1 {
                if line.trim_end() != CSV_HEADER {
                    return Some(Err(Error::Parse {
                        line: 1,
                        msg: "unexpected header".into(),
                    }));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            return Some(TelemetryRecord::parse_csv_line(&line, self.line_no));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

/// Streaming mean/variance (Welford) with min and max.
#[derive(Debug, Clone, Copy, Default)]
pub struct StatsAccumulator {
    count: usize,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Option<BeaconStats> {
        (self.count > 0).then(|| BeaconStats {
            count: self.count,
            mean: self.mean,
            stddev: (self.m2 / self.count as f64).max(0.0).sqrt(),
            min: self.min,
            max: self.max,
        })
    }
}

/// Population statistics of `beacon_db` over records with `t0 <= t <= t1`.
pub fn beacon_stats<'a>(
    records: impl IntoIterator<Item = &'a TelemetryRecord>,
    t0: f64,
    t1: f64,
) -> Result<BeaconStats> {
    let mut acc = StatsAccumulator::new();
    for r in records {
        if r.t >= t0 && r.t <= t1 {
            acc.push(r.beacon_db);
        }
    }
    acc.finish().ok_or(Error::EmptyWindow { t0, t1 })
}

/// Every `decimation`-th readback pair, starting with the first.
pub fn extract_trajectory<'a>(
    records: impl IntoIterator<Item = &'a TelemetryRecord>,
    decimation: usize,
) -> Result<Vec<(f64, f64)>> {
    if decimation == 0 {
        return Err(Error::Domain("decimation must be >= 1".into()));
    }
    Ok(records
        .into_iter()
        .step_by(decimation)
        .map(|r| (r.readback_az, r.readback_el))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(t: f64, level: f64) -> TelemetryRecord {
        TelemetryRecord {
            t,
            commanded_az: 10.0,
            commanded_el: 70.0,
            readback_az: 10.0 + t,
            readback_el: 70.0 - t,
            beacon_db: level,
            receiver_volts: 5.0,
            phase: Phase::Wait,
            cycle_index: 1,
        }
    }

    #[test]
    fn append_order() {
        let mut log = TelemetryLog::new();
        log.append(rec(0.0, 1.0)).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(
            log.append(rec(0.0, 1.0)),
            Err(Error::NonMonotonicTime { t: 0.0, last: 0.0 })
        );
        for i in 1..10 {
            log.append(rec(i as f64 * 0.02, 1.0)).unwrap();
        }
        assert_eq!(log.len(), 10);
        assert!(log.records().windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn stats_examples() {
        let mut log = TelemetryLog::new();
        for i in 0..5 {
            log.append(rec(i as f64, 2.5)).unwrap();
        }
        let s = log.beacon_stats(0.0, 10.0).unwrap();
        assert_eq!((s.mean, s.stddev, s.min, s.max), (2.5, 0.0, 2.5, 2.5));

        let mut log = TelemetryLog::new();
        log.append(rec(0.0, 1.0)).unwrap();
        log.append(rec(1.0, 3.0)).unwrap();
        let s = log.beacon_stats(f64::MIN, f64::MAX).unwrap();
        assert_eq!((s.mean, s.stddev), (2.0, 1.0));
        assert_eq!(s, log.beacon_stats(0.0, 1.0).unwrap());
        assert!(matches!(
            log.beacon_stats(5.0, 6.0),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn trajectory_stride() {
        let mut log = TelemetryLog::new();
        for i in 0..10 {
            log.append(rec(i as f64, 0.0)).unwrap();
        }
        assert_eq!(log.extract_trajectory(1).unwrap().len(), 10);
        assert_eq!(log.extract_trajectory(10).unwrap().len(), 1);
        let tr = log.extract_trajectory(3).unwrap();
        let ts: Vec<f64> = tr.iter().map(|(az, _)| az - 10.0).collect();
        assert_eq!(ts, vec![0.0, 3.0, 6.0, 9.0]);
        assert!(log.extract_trajectory(0).is_err());
    }

    #[test]
    fn csv_decimals() {
        assert_eq!(fixed6(0.02), "0.020000");
        assert_eq!(fixed6(3.0), "3.000000");
        assert_eq!(fixed6(-24.0), "-24.000000");
        assert_eq!(fixed6(0.1234567891), "0.1234567891");
        let line = rec(0.02, -1.5).to_csv_line();
        assert_eq!(
            line,
            "0.020000,10.000000,70.000000,10.020000,69.980000,-1.500000,5.000000,wait,1"
        );
    }

    #[test]
    fn csv_rejects_bad_input() {
        let text = format!("{CSV_HEADER}\n0.0,1,2,3\n");
        let err = TelemetryLog::read_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = TelemetryLog::read_csv("t,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let text = format!("{CSV_HEADER}\n0.0,1,2,3,4,5,6,spin,1\n");
        assert!(TelemetryLog::read_csv(text.as_bytes()).is_err());
    }

    fn phase_strategy() -> impl Strategy<Value = Phase> {
        prop_oneof![
            Just(Phase::Acquire),
            Just(Phase::Estimate),
            Just(Phase::Move),
            Just(Phase::Wait)
        ]
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            steps in prop::collection::vec(1e-6f64..10.0, 1..40),
            vals in prop::collection::vec(-1e4f64..1e4, 6),
            phase in phase_strategy(),
            cycle in 0u64..1_000_000,
        ) {
            let mut log = TelemetryLog::new();
            let mut t = 0.0;
            for (i, dt) in steps.iter().enumerate() {
                t += dt;
                log.append(TelemetryRecord {
                    t,
                    commanded_az: vals[0] * (i as f64 + 1.0).sqrt(),
                    commanded_el: vals[1],
                    readback_az: vals[2] / 3.0,
                    readback_el: vals[3],
                    beacon_db: vals[4] * 1e-7,
                    receiver_volts: vals[5].abs() % 10.0,
                    phase,
                    cycle_index: cycle + i as u64,
                }).unwrap();
            }
            let mut buf = Vec::new();
            log.write_csv(&mut buf).unwrap();
            let back = TelemetryLog::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), log.len());
            for (a, b) in log.records().iter().zip(back.records()) {
                prop_assert_eq!(a.t.to_bits(), b.t.to_bits());
                prop_assert_eq!(a.commanded_az.to_bits(), b.commanded_az.to_bits());
                prop_assert_eq!(a.readback_az.to_bits(), b.readback_az.to_bits());
                prop_assert_eq!(a.beacon_db.to_bits(), b.beacon_db.to_bits());
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn pooled_stats_match_oracle(
            a in prop::collection::vec(-30.0f64..10.0, 1..50),
            b in prop::collection::vec(-30.0f64..10.0, 1..50),
        ) {
            let mut log = TelemetryLog::new();
            for (i, v) in a.iter().chain(b.iter()).enumerate() {
                log.append(rec(i as f64, *v)).unwrap();
            }
            let split = a.len() as f64;
            let sa = log.beacon_stats(0.0, split - 0.5).unwrap();
            let sb = log.beacon_stats(split - 0.5, f64::MAX).unwrap();
            let all = log.beacon_stats(0.0, f64::MAX).unwrap();
            // pooled moments from the two halves
            let (na, nb) = (sa.count as f64, sb.count as f64);
            let n = na + nb;
            let mean = (na * sa.mean + nb * sb.mean) / n;
            let var = (na * (sa.stddev.powi(2) + sa.mean.powi(2))
                + nb * (sb.stddev.powi(2) + sb.mean.powi(2))) / n - mean * mean;
            prop_assert!((all.mean - mean).abs() < 1e-9);
            prop_assert!((all.stddev - var.max(0.0).sqrt()).abs() < 1e-6);
            prop_assert_eq!(all.min, sa.min.min(sb.min));
            prop_assert_eq!(all.max, sa.max.max(sb.max));
        }
    }
}
