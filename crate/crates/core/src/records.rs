//! Line-oriented CSV files of RSSI frames.
//!
//! Two layouts share one convention: a leading block of `# key=value`
//! comment lines, one header row, then one frame per line with an empty
//! field for a missing reading.
//!
//! * labeled: `timestamp,s0,..,s{S-1},zone`
//! * stream: `timestamp,tag,s0,..,s{S-1}`

use std::io;

use thiserror::Error;

use crate::signal_sim::{RssiFrame, ZoneSession};
use crate::zone_graph::ZoneId;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {msg}")]
    Format { line: u64, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn format_err(record: &csv::StringRecord, msg: impl Into<String>) -> RecordError {
    let line = record.position().map_or(0, |p| p.line());
    RecordError::Format { line, msg: msg.into() }
}

/// Frames with the true zone of each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Recording {
    pub frames: Vec<RssiFrame>,
    pub zones: Vec<ZoneId>,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// True zone at the frame nearest to `t`; the earlier frame wins a tie.
    pub fn zone_at(&self, t: f64) -> Option<ZoneId> {
        let idx = self.frames.partition_point(|f| f.timestamp < t);
        [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter(|&i| i < self.frames.len())
            .min_by(|&a, &b| (self.frames[a].timestamp - t).abs().total_cmp(&(self.frames[b].timestamp - t).abs()))
            .map(|i| self.zones[i])
    }

    /// Maximal runs of consecutive frames in the same zone.
    pub fn sessions(&self) -> Vec<ZoneSession> {
        let mut out: Vec<ZoneSession> = Vec::new();
        for (f, &z) in self.frames.iter().zip(&self.zones) {
            match out.last_mut() {
                Some(s) if s.zone == z => s.frames.push(f.clone()),
                _ => out.push(ZoneSession { zone: z, frames: vec![f.clone()] }),
            }
        }
        out
    }

    pub fn select(&self, sensors: &[usize]) -> Recording {
        Recording { frames: self.frames.iter().map(|f| f.select(sensors)).collect(), zones: self.zones.clone() }
    }
}

/// A frame from a multi-tag stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedFrame {
    pub tag: String,
    pub frame: RssiFrame,
}

fn write_meta<W: io::Write>(out: &mut W, meta: &[(&str, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

fn sensor_names(n: usize) -> impl Iterator<Item = String> {
    (0..n).map(|i| format!("s{i}"))
}

fn value_field(v: &Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_f64(record: &csv::StringRecord, field: &str, what: &str) -> Result<f64, RecordError> {
    let v: f64 = field.trim().parse().map_err(|_| format_err(record, format!("bad {what} {field:?}")))?;
    if !v.is_finite() {
        return Err(format_err(record, format!("non-finite {what}")));
    }
    Ok(v)
}

fn parse_values<'a>(
    record: &csv::StringRecord,
    fields: impl Iterator<Item = &'a str>,
) -> Result<Vec<Option<f64>>, RecordError> {
    fields
        .map(|f| if f.trim().is_empty() { Ok(None) } else { parse_f64(record, f, "reading").map(Some) })
        .collect()
}

fn reader<R: io::Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input)
}

pub fn write_labeled<W: io::Write>(mut out: W, meta: &[(&str, String)], rec: &Recording) -> Result<(), RecordError> {
    write_meta(&mut out, meta)?;
    let sensors = rec.frames.first().map_or(0, |f| f.values.len());
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> =
        std::iter::once("timestamp".to_string()).chain(sensor_names(sensors)).chain(["zone".to_string()]).collect();
    w.write_record(&header)?;
    for (f, z) in rec.frames.iter().zip(&rec.zones) {
        let row: Vec<String> = std::iter::once(f.timestamp.to_string())
            .chain(f.values.iter().map(value_field))
            .chain([z.0.to_string()])
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labeled<R: io::Read>(input: R) -> Result<Recording, RecordError> {
    let mut r = reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "timestamp" || &header[header.len() - 1] != "zone" {
        return Err(format_err(&header, "expected header timestamp,s0,..,zone"));
    }
    let sensors = header.len() - 2;
    let mut rec = Recording::default();
    for row in r.records() {
        let row = row?;
        let timestamp = parse_f64(&row, &row[0], "timestamp")?;
        let zone: usize =
            row[sensors + 1].parse().map_err(|_| format_err(&row, format!("bad zone {:?}", &row[sensors + 1])))?;
        let values = parse_values(&row, row.iter().skip(1).take(sensors))?;
        rec.frames.push(RssiFrame { timestamp, values });
        rec.zones.push(ZoneId(zone));
    }
    Ok(rec)
}

pub fn write_stream<W: io::Write>(mut out: W, meta: &[(&str, String)], frames: &[TaggedFrame]) -> Result<(), RecordError> {
    write_meta(&mut out, meta)?;
    let sensors = frames.first().map_or(0, |f| f.frame.values.len());
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = ["timestamp".to_string(), "tag".to_string()].into_iter().chain(sensor_names(sensors)).collect();
    w.write_record(&header)?;
    for f in frames {
        let row: Vec<String> = [f.frame.timestamp.to_string(), f.tag.clone()]
            .into_iter()
            .chain(f.frame.values.iter().map(value_field))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Incremental reader of a stream file, one frame per record.
pub struct StreamReader<R: io::Read> {
    inner: csv::Reader<R>,
    sensors: usize,
}

impl<R: io::Read> StreamReader<R> {
    pub fn new(input: R) -> Result<Self, RecordError> {
        let mut inner = reader(input);
        let header = inner.headers()?.clone();
        if header.len() < 3 || &header[0] != "timestamp" || &header[1] != "tag" {
            return Err(format_err(&header, "expected header timestamp,tag,s0,.."));
        }
        Ok(StreamReader { sensors: header.len() - 2, inner })
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors
    }
}

impl<R: io::Read> Iterator for StreamReader<R> {
    type Item = Result<TaggedFrame, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut row = csv::StringRecord::new();
        match self.inner.read_record(&mut row) {
            Ok(false) => None,
            Err(e) => Some(Err(e.into())),
            Ok(true) => Some((|| {
                let timestamp = parse_f64(&row, &row[0], "timestamp")?;
                let values = parse_values(&row, row.iter().skip(2))?;
                Ok(TaggedFrame { tag: row[1].to_string(), frame: RssiFrame { timestamp, values } })
            })()),
        }
    }
}
