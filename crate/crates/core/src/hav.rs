//! Hand-arm vibration exposure: tri-axial totals, daily A(8), the action
//! value trigger, and IFC-flavored event/task records.
//!
//! A stream of pre-weighted RMS windows is folded into a per-worker daily
//! ledger. Sessions open on a worker's first window with a tool and close on
//! an explicit end, a tool change, an idle gap, or day rollover.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Exposure action value, m/s².
pub const EAV: f64 = 2.5;
/// Reference duration of A(8), hours.
pub const REFERENCE_HOURS: f64 = 8.0;
const REFERENCE_SECONDS: f64 = REFERENCE_HOURS * 3600.0;
const DAY_SECONDS: f64 = 86_400.0;

/// `√(awx² + awy² + awz²)`.
pub fn vibration_total(awx: f64, awy: f64, awz: f64) -> f64 {
    (awx * awx + awy * awy + awz * awz).sqrt()
}

/// Daily exposure `√((1/8 h) Σ a_hv,i² T_i)` for `(a_hv, hours)` segments.
pub fn a8(segments: &[(f64, f64)]) -> f64 {
    let energy: f64 = segments.iter().map(|(a, t)| a * a * t).sum();
    (energy / REFERENCE_HOURS).sqrt()
}

/// One pre-weighted measurement window. Times are seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct VibrationWindow {
    pub worker_id: String,
    pub tool_label: String,
    pub start: f64,
    pub end: f64,
    pub awx: f64,
    pub awy: f64,
    pub awz: f64,
    /// BIM element the activity is attached to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_guid: Option<String>,
}

impl VibrationWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite() && self.end > self.start) {
            return Err(Error::invalid(format!("window end {} must follow start {}", self.end, self.start)));
        }
        if ![self.awx, self.awy, self.awz].iter().all(|a| *a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid("accelerations must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn a_hv(&self) -> f64 {
        vibration_total(self.awx, self.awy, self.awz)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RecordKind {
    ActivityStart,
    Intervention,
    ActivityEnd,
}

impl RecordKind {
    pub fn ifc_type(self) -> &'static str {
        match self {
            RecordKind::Intervention => "IfcTask",
            _ => "IfcEvent",
        }
    }

    fn predefined_type(self) -> &'static str {
        match self {
            RecordKind::ActivityStart => "STARTEVENT",
            RecordKind::ActivityEnd => "ENDEVENT",
            RecordKind::Intervention => "USERDEFINED",
        }
    }

    fn name(self) -> &'static str {
        match self {
            RecordKind::ActivityStart => "activityStart",
            RecordKind::Intervention => "intervention",
            RecordKind::ActivityEnd => "activityEnd",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [RecordKind::ActivityStart, RecordKind::Intervention, RecordKind::ActivityEnd]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SafetyRecord {
    pub kind: RecordKind,
    pub worker_id: String,
    pub tool_label: String,
    pub timestamp: f64,
    /// Window value for starts and interventions; energy-equivalent session
    /// value for ends.
    pub a_hv: f64,
    /// Accumulated daily exposure at `timestamp`.
    pub a8: f64,
    pub risk: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_guid: Option<String>,
}

impl SafetyRecord {
    /// Deterministic 22-character IFC GlobalId.
    pub fn guid(&self) -> String {
        ifc_guid(&self.worker_id, self.timestamp, self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct HavConfig {
    /// A gap longer than this between windows closes the session, seconds.
    pub idle_gap: f64,
    /// Offset added to timestamps before splitting days, so that local
    /// midnight falls on a multiple of 24 h. Seconds.
    pub day_offset: f64,
}

impl Default for HavConfig {
    fn default() -> Self {
        Self { idle_gap: 600.0, day_offset: 0.0 }
    }
}

impl HavConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.idle_gap > 0.0) || !self.day_offset.is_finite() {
            return Err(Error::invalid("idleGap must be positive and dayOffset finite"));
        }
        Ok(())
    }

    pub fn day_of(&self, t: f64) -> i64 {
        ((t + self.day_offset) / DAY_SECONDS).floor() as i64
    }
}

#[derive(Debug, Clone)]
struct Session {
    tool_label: String,
    element_guid: Option<String>,
    last_end: f64,
    /// Σ a² · seconds within the session
    energy: f64,
    seconds: f64,
}

#[derive(Debug, Clone)]
struct WorkerDay {
    day: i64,
    segments: Vec<(f64, f64)>,
    /// Σ a² · seconds over the day, kept in seconds so whole-second windows
    /// accumulate exactly.
    energy: f64,
    seconds: f64,
    intervened: bool,
    session: Option<Session>,
}

impl WorkerDay {
    fn new(day: i64) -> Self {
        Self { day, segments: Vec::new(), energy: 0.0, seconds: 0.0, intervened: false, session: None }
    }

    fn a8(&self) -> f64 {
        (self.energy / REFERENCE_SECONDS).sqrt()
    }
}

/// One worker's exposure on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DailyExposure {
    pub worker_id: String,
    pub day: i64,
    pub exposure_hours: f64,
    pub a8: f64,
    pub intervention: bool,
}

/// Per-worker daily exposure state.
#[derive(Debug, Clone)]
pub struct ExposureLedger {
    config: HavConfig,
    workers: BTreeMap<String, WorkerDay>,
    /// Latest time seen per worker, kept across day resets.
    latest: BTreeMap<String, f64>,
    closed: Vec<DailyExposure>,
}

impl ExposureLedger {
    pub fn new(config: HavConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, workers: BTreeMap::new(), latest: BTreeMap::new(), closed: Vec::new() })
    }

    /// Current-day A(8) of `worker`, 0 when unseen.
    pub fn a8(&self, worker: &str) -> f64 {
        self.workers.get(worker).map_or(0.0, WorkerDay::a8)
    }

    /// Current-day `(a_hv, hours)` segments of `worker`.
    pub fn segments(&self, worker: &str) -> &[(f64, f64)] {
        self.workers.get(worker).map_or(&[], |w| w.segments.as_slice())
    }

    pub fn ingest_window(&mut self, w: &VibrationWindow) -> Result<Vec<SafetyRecord>> {
        w.validate()?;
        let mut out = Vec::new();
        let day = self.config.day_of(w.start);
        let idle_gap = self.config.idle_gap;

        if let Some(&latest) = self.latest.get(&w.worker_id) {
            if w.start < latest {
                return Err(Error::OutOfOrder { worker: w.worker_id.clone(), start: w.start, latest });
            }
        }
        if self.workers.get(&w.worker_id).is_some_and(|s| s.day != day) {
            self.close_day(&w.worker_id, &mut out);
        }
        self.latest.insert(w.worker_id.clone(), w.end);
        let state = self.workers.entry(w.worker_id.clone()).or_insert_with(|| WorkerDay::new(day));

        let stale = state.session.as_ref().is_some_and(|s| {
            s.tool_label != w.tool_label || s.element_guid != w.element_guid || w.start - s.last_end > idle_gap
        });
        if stale {
            out.extend(end_session(&w.worker_id, state));
        }

        let a_hv = w.a_hv();
        if state.session.is_none() {
            out.push(SafetyRecord {
                kind: RecordKind::ActivityStart,
                worker_id: w.worker_id.clone(),
                tool_label: w.tool_label.clone(),
                timestamp: w.start,
                a_hv,
                a8: state.a8(),
                risk: state.a8() >= EAV,
                element_guid: w.element_guid.clone(),
            });
            state.session = Some(Session {
                tool_label: w.tool_label.clone(),
                element_guid: w.element_guid.clone(),
                last_end: w.start,
                energy: 0.0,
                seconds: 0.0,
            });
        }

        let seconds = w.duration();
        let energy = a_hv * a_hv * seconds;
        state.segments.push((a_hv, seconds / 3600.0));
        state.energy += energy;
        state.seconds += seconds;
        let session = state.session.as_mut().expect("opened above");
        session.energy += energy;
        session.seconds += seconds;
        session.last_end = w.end;

        let now = state.a8();
        if !state.intervened && now >= EAV {
            state.intervened = true;
            out.push(SafetyRecord {
                kind: RecordKind::Intervention,
                worker_id: w.worker_id.clone(),
                tool_label: w.tool_label.clone(),
                timestamp: w.end,
                a_hv,
                a8: now,
                risk: true,
                element_guid: w.element_guid.clone(),
            });
        }
        Ok(out)
    }

    /// Explicit end marker for `worker`. Closing an idle worker is a no-op.
    pub fn end_session(&mut self, worker: &str, timestamp: f64) -> Result<Vec<SafetyRecord>> {
        if let Some(&latest) = self.latest.get(worker) {
            if timestamp < latest {
                return Err(Error::OutOfOrder { worker: worker.to_string(), start: timestamp, latest });
            }
        }
        let Some(state) = self.workers.get_mut(worker) else {
            return Ok(Vec::new());
        };
        Ok(end_session(worker, state).into_iter().collect())
    }

    /// Closes every open session and resets all daily ledgers.
    pub fn roll_day(&mut self) -> Vec<SafetyRecord> {
        let mut out = Vec::new();
        let names: Vec<String> = self.workers.keys().cloned().collect();
        for name in names {
            self.close_day(&name, &mut out);
        }
        out
    }

    /// Closes open sessions at the end of the stream. Ledgers stay readable.
    pub fn finish(&mut self) -> Vec<SafetyRecord> {
        self.workers.iter_mut().filter_map(|(name, state)| end_session(name, state)).collect()
    }

    /// Closed days followed by the days still open, by worker.
    pub fn summary(&self) -> Vec<DailyExposure> {
        let mut all = self.closed.clone();
        all.extend(self.workers.iter().map(|(name, s)| daily(name, s)));
        all
    }

    fn close_day(&mut self, worker: &str, out: &mut Vec<SafetyRecord>) {
        if let Some(mut state) = self.workers.remove(worker) {
            out.extend(end_session(worker, &mut state));
            self.closed.push(daily(worker, &state));
        }
    }
}

fn daily(worker: &str, s: &WorkerDay) -> DailyExposure {
    DailyExposure {
        worker_id: worker.to_string(),
        day: s.day,
        exposure_hours: s.seconds / 3600.0,
        a8: s.a8(),
        intervention: s.intervened,
    }
}

fn end_session(worker: &str, state: &mut WorkerDay) -> Option<SafetyRecord> {
    let s = state.session.take()?;
    let a_hv = if s.seconds > 0.0 { (s.energy / s.seconds).sqrt() } else { 0.0 };
    Some(SafetyRecord {
        kind: RecordKind::ActivityEnd,
        worker_id: worker.to_string(),
        tool_label: s.tool_label,
        timestamp: s.last_end,
        a_hv,
        a8: state.a8(),
        risk: state.a8() >= EAV,
        element_guid: s.element_guid,
    })
}

/// Result of running a whole stream through a fresh ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct HavRun {
    pub records: Vec<SafetyRecord>,
    pub summary: Vec<DailyExposure>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "control", rename_all = "camelCase", deny_unknown_fields)]
enum Control {
    #[serde(rename_all = "camelCase")]
    SessionEnd { worker_id: String, timestamp: f64 },
    DayRollover {},
}

/// Processes a JSON-lines stream of windows and control lines
/// (`{"control":"sessionEnd","workerId":..,"timestamp":..}`,
/// `{"control":"dayRollover"}`). Blank lines are skipped. Errors name the
/// 1-based line.
pub fn process_stream<R: BufRead>(reader: R, config: HavConfig) -> Result<HavRun> {
    let mut ledger = ExposureLedger::new(config)?;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let at = |source: Error| Error::AtLine { line: i + 1, source: Box::new(source) };
        let line = line.map_err(|e| at(e.into()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| at(e.into()))?;
        let produced = if value.get("control").is_some() {
            match serde_json::from_value::<Control>(value).map_err(|e| at(e.into()))? {
                Control::SessionEnd { worker_id, timestamp } => ledger.end_session(&worker_id, timestamp),
                Control::DayRollover {} => Ok(ledger.roll_day()),
            }
        } else {
            let w: VibrationWindow = serde_json::from_value(value).map_err(|e| at(e.into()))?;
            ledger.ingest_window(&w)
        };
        records.extend(produced.map_err(at)?);
    }
    records.extend(ledger.finish());
    Ok(HavRun { records, summary: ledger.summary() })
}

const IFC_ALPHABET: &[u8; 64] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_$";

/// IFC GlobalId (128 bits in the 22-character IFC base-64 alphabet) from a
/// hash of worker, timestamp and record kind.
pub fn ifc_guid(worker: &str, timestamp: f64, kind: RecordKind) -> String {
    let mut h = Sha256::new();
    h.update(worker.as_bytes());
    h.update([0]);
    h.update(timestamp.to_bits().to_be_bytes());
    h.update(kind.name().as_bytes());
    let digest = h.finalize();
    let n = u128::from_be_bytes(digest[..16].try_into().expect("16 bytes"));
    // 2 bits, then 21 groups of 6
    let mut out = String::with_capacity(22);
    out.push(IFC_ALPHABET[(n >> 126) as usize] as char);
    for k in (0..21).rev() {
        out.push(IFC_ALPHABET[((n >> (6 * k)) & 63) as usize] as char);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct EntityAttributes {
    a_hv: f64,
    a8: f64,
    risk_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Entity {
    #[serde(rename = "type")]
    ifc_type: String,
    global_id: String,
    name: String,
    predefined_type: String,
    worker_id: String,
    tool_label: String,
    timestamp: f64,
    attributes: EntityAttributes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    related_element: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RecordDocument {
    schema: String,
    entities: Vec<Entity>,
}

const SCHEMA: &str = "IFC4-json-flavored";

/// Pretty JSON document with one entity per record, newline-terminated.
pub fn export_records(records: &[SafetyRecord]) -> String {
    let entities = records
        .iter()
        .map(|r| Entity {
            ifc_type: r.kind.ifc_type().to_string(),
            global_id: r.guid(),
            name: r.kind.name().to_string(),
            predefined_type: r.kind.predefined_type().to_string(),
            worker_id: r.worker_id.clone(),
            tool_label: r.tool_label.clone(),
            timestamp: r.timestamp,
            attributes: EntityAttributes { a_hv: r.a_hv, a8: r.a8, risk_flag: r.risk },
            related_element: r.element_guid.clone(),
        })
        .collect();
    let doc = RecordDocument { schema: SCHEMA.into(), entities };
    let mut s = serde_json::to_string_pretty(&doc).expect("records serialize");
    s.push('\n');
    s
}

/// Parses a document written by [`export_records`]. Type names, predefined
/// types and GlobalIds must agree with the record contents.
pub fn import_records(text: &str) -> Result<Vec<SafetyRecord>> {
    let doc: RecordDocument = serde_json::from_str(text)?;
    if doc.schema != SCHEMA {
        return Err(Error::parse(format!("unknown schema '{}'", doc.schema)));
    }
    doc.entities
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let kind = RecordKind::from_name(&e.name)
                .ok_or_else(|| Error::parse(format!("entity {i}: unknown record name '{}'", e.name)))?;
            if e.ifc_type != kind.ifc_type() || e.predefined_type != kind.predefined_type() {
                return Err(Error::parse(format!("entity {i}: {} {} does not match '{}'", e.ifc_type, e.predefined_type, e.name)));
            }
            let r = SafetyRecord {
                kind,
                worker_id: e.worker_id,
                tool_label: e.tool_label,
                timestamp: e.timestamp,
                a_hv: e.attributes.a_hv,
                a8: e.attributes.a8,
                risk: e.attributes.risk_flag,
                element_guid: e.related_element,
            };
            if r.guid() != e.global_id {
                return Err(Error::parse(format!("entity {i}: globalId {} does not match its contents", e.global_id)));
            }
            Ok(r)
        })
        .collect()
}
