//! Run traces: per-tick agent samples plus an event log, with the CSV
//! encodings the CLI reads and writes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::Action;
use crate::geometry::Point2;

pub const TRACE_CSV_HEADER: &str = "tick,time_s,agent_id,type,x,y,action,stage,speed";
pub const EVENT_CSV_HEADER: &str = "time_s,kind,subject,detail";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("csv: {0}")]
    Csv(String),
}

/// One agent sample within a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub agent: u64,
    pub type_idx: usize,
    pub x: f64,
    pub y: f64,
    pub action: Action,
    pub stage: usize,
    pub speed: f64,
}

impl TraceRow {
    pub fn position(&self) -> Point2 {
        Point2::xy(self.x, self.y)
    }
}

/// All agent samples at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub tick: u64,
    pub time: f64,
    pub rows: Vec<TraceRow>,
}

/// Timestamped run event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: String,
    pub subject: String,
    pub detail: String,
}

/// Full record of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub type_names: Vec<String>,
    pub frames: Vec<Frame>,
    /// (agent id, exit time), in exit order.
    pub exits: Vec<(u64, f64)>,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn duration(&self) -> f64 {
        self.frames.last().map(|f| f.time).unwrap_or(0.0)
    }

    /// Frames with `start <= time <= end`.
    pub fn frames_in(&self, start: f64, end: f64) -> impl Iterator<Item = &Frame> {
        self.frames
            .iter()
            .filter(move |f| f.time >= start - 1e-9 && f.time <= end + 1e-9)
    }

    /// Chronological (time, row) samples of one agent.
    pub fn agent_samples(&self, agent: u64) -> Vec<(f64, &TraceRow)> {
        let mut out = Vec::new();
        for frame in &self.frames {
            if let Some(row) = frame.rows.iter().find(|r| r.agent == agent) {
                out.push((frame.time, row));
            }
        }
        out
    }

    pub fn agent_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self
            .frames
            .iter()
            .flat_map(|f| f.rows.iter().map(|r| r.agent))
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn type_name(&self, idx: usize) -> &str {
        self.type_names.get(idx).map(String::as_str).unwrap_or("?")
    }
}

pub fn write_trace_csv(trace: &Trace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_CSV_HEADER.split(',')).expect("in-memory write");
    for frame in &trace.frames {
        for row in &frame.rows {
            w.write_record(&[
                frame.tick.to_string(),
                format!("{:.3}", frame.time),
                row.agent.to_string(),
                trace.type_name(row.type_idx).to_string(),
                format!("{:.4}", row.x),
                format!("{:.4}", row.y),
                row.action.as_str().to_string(),
                row.stage.to_string(),
                format!("{:.4}", row.speed),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn parse_trace_csv(text: &str) -> Result<Trace, TraceError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut trace = Trace::default();
    let mut current: Option<Frame> = None;
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2;
        let record = record.map_err(|e| TraceError::Csv(e.to_string()))?;
        let get = |idx: usize| record.get(idx).unwrap_or("");
        let parse_f = |idx: usize| -> Result<f64, TraceError> {
            get(idx)
                .parse()
                .map_err(|_| TraceError::Row { row: row_no, msg: format!("bad number '{}'", get(idx)) })
        };
        let tick: u64 = get(0)
            .parse()
            .map_err(|_| TraceError::Row { row: row_no, msg: format!("bad tick '{}'", get(0)) })?;
        let time = parse_f(1)?;
        let agent: u64 = get(2)
            .parse()
            .map_err(|_| TraceError::Row { row: row_no, msg: format!("bad agent id '{}'", get(2)) })?;
        let type_name = get(3).to_string();
        let type_idx = match trace.type_names.iter().position(|n| *n == type_name) {
            Some(idx) => idx,
            None => {
                trace.type_names.push(type_name);
                trace.type_names.len() - 1
            }
        };
        let action = Action::parse(get(6))
            .ok_or_else(|| TraceError::Row { row: row_no, msg: format!("bad action '{}'", get(6)) })?;
        let stage: usize = get(7)
            .parse()
            .map_err(|_| TraceError::Row { row: row_no, msg: format!("bad stage '{}'", get(7)) })?;
        let row = TraceRow {
            agent,
            type_idx,
            x: parse_f(4)?,
            y: parse_f(5)?,
            action,
            stage,
            speed: parse_f(8)?,
        };
        match current.as_mut() {
            Some(frame) if frame.tick == tick => frame.rows.push(row),
            _ => {
                if let Some(done) = current.take() {
                    trace.frames.push(done);
                }
                current = Some(Frame { tick, time, rows: vec![row] });
            }
        }
    }
    if let Some(done) = current.take() {
        trace.frames.push(done);
    }
    if let Some(first) = trace.frames.first() {
        if first.tick > 0 {
            trace.dt = first.time / first.tick as f64;
        }
    }
    // Recover exits from nothing: the event log carries them; keep empty.
    Ok(trace)
}

pub fn write_events_csv(events: &[Event]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EVENT_CSV_HEADER.split(',')).expect("in-memory write");
    for e in events {
        w.write_record(&[
            format!("{:.3}", e.time),
            e.kind.clone(),
            e.subject.clone(),
            e.detail.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn parse_events_csv(text: &str) -> Result<Vec<Event>, TraceError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| TraceError::Csv(e.to_string()))?;
        let get = |idx: usize| record.get(idx).unwrap_or("").to_string();
        let time: f64 = get(0)
            .parse()
            .map_err(|_| TraceError::Row { row: i + 2, msg: format!("bad time '{}'", get(0)) })?;
        out.push(Event { time, kind: get(1), subject: get(2), detail: get(3) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_trace() -> Trace {
        Trace {
            dt: 0.1,
            type_names: vec!["commuter".into()],
            frames: vec![
                Frame {
                    tick: 1,
                    time: 0.1,
                    rows: vec![TraceRow {
                        agent: 1,
                        type_idx: 0,
                        x: 1.0,
                        y: 2.0,
                        action: Action::Walking,
                        stage: 0,
                        speed: 1.34,
                    }],
                },
                Frame {
                    tick: 2,
                    time: 0.2,
                    rows: vec![TraceRow {
                        agent: 1,
                        type_idx: 0,
                        x: 1.134,
                        y: 2.0,
                        action: Action::Walking,
                        stage: 0,
                        speed: 1.34,
                    }],
                },
            ],
            exits: vec![],
            events: vec![],
        }
    }

    #[test]
    fn trace_roundtrip() {
        let t = tiny_trace();
        let text = write_trace_csv(&t);
        assert!(text.starts_with(TRACE_CSV_HEADER));
        let back = parse_trace_csv(&text).unwrap();
        assert_eq!(back.frames.len(), 2);
        assert!((back.dt - 0.1).abs() < 1e-9);
        assert_eq!(back.frames[0].rows[0].agent, 1);
        assert_eq!(back.frames[1].rows[0].action, Action::Walking);
    }

    #[test]
    fn events_roundtrip_with_commas_in_detail() {
        let events = vec![Event {
            time: 1.5,
            kind: "react".into(),
            subject: "42".into(),
            detail: "target=exit_a, was=exit_b".into(),
        }];
        let text = write_events_csv(&events);
        let back = parse_events_csv(&text).unwrap();
        assert_eq!(back, events);
    }
}
