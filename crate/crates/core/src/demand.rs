//! Origin-destination demand: time-binned OD matrices, arrival profiles,
//! supply-type mixes, CSV import/export and named demand settings.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::derive_seed;

pub const OD_CSV_HEADER: &str = "bin_start,bin_length,origin,destination,count";

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("duplicate bin key (start {bin_start}, origin '{origin}', destination '{destination}') at row {row}")]
    DuplicateKey { row: usize, bin_start: f64, origin: String, destination: String },
    #[error("no bin with key (start {0}, origin '{1}', destination '{2}')")]
    UnknownBin(f64, String, String),
    #[error("edit would make count negative ({0})")]
    NegativeCount(f64),
    #[error("unknown source '{0}'")]
    UnknownSource(String),
    #[error("unknown demand setting '{name}'; available: {available:?}")]
    UnknownSetting { name: String, available: Vec<String> },
    #[error("setting name must be non-empty")]
    EmptyName,
    #[error("supply mix for '{source_id}' sums to {sum}, expected 100")]
    BadMixSum { source_id: String, sum: f64 },
    #[error("csv: {0}")]
    Csv(String),
}

/// One OD bin: `count` pedestrians departing `origin` for route
/// `destination` during `[bin_start, bin_start + bin_length)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdBin {
    pub bin_start: f64,
    pub bin_length: f64,
    pub origin: String,
    pub destination: String,
    pub count: u64,
}

impl OdBin {
    fn key(&self) -> (u64, &str, &str) {
        (self.bin_start.to_bits(), &self.origin, &self.destination)
    }
}

/// Time-binned demand. Keys (bin_start, origin, destination) are unique.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ODMatrix {
    pub bins: Vec<OdBin>,
}

impl ODMatrix {
    pub fn new(bins: Vec<OdBin>) -> Result<Self, DemandError> {
        let mut m = ODMatrix { bins: Vec::new() };
        for (i, bin) in bins.into_iter().enumerate() {
            m.push_checked(bin, i + 2)?;
        }
        Ok(m)
    }

    fn push_checked(&mut self, bin: OdBin, row: usize) -> Result<(), DemandError> {
        if !(bin.bin_length > 0.0) {
            return Err(DemandError::Row { row, msg: format!("bin_length must be > 0, got {}", bin.bin_length) });
        }
        if !bin.bin_start.is_finite() || bin.bin_start < 0.0 {
            return Err(DemandError::Row { row, msg: format!("bin_start must be >= 0, got {}", bin.bin_start) });
        }
        if self.bins.iter().any(|b| b.key() == bin.key()) {
            return Err(DemandError::DuplicateKey {
                row,
                bin_start: bin.bin_start,
                origin: bin.origin.clone(),
                destination: bin.destination.clone(),
            });
        }
        self.bins.push(bin);
        Ok(())
    }

    pub fn total_count(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn sources(&self) -> Vec<String> {
        let mut v: Vec<String> = self.bins.iter().map(|b| b.origin.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    fn sorted_bins(&self) -> Vec<&OdBin> {
        let mut v: Vec<&OdBin> = self.bins.iter().collect();
        v.sort_by(|a, b| {
            a.bin_start
                .partial_cmp(&b.bin_start)
                .unwrap()
                .then_with(|| a.origin.cmp(&b.origin))
                .then_with(|| a.destination.cmp(&b.destination))
        });
        v
    }
}

/// How bin counts become individual injections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadPolicy {
    /// k arrivals in a bin of length L at `bin_start + (i + 0.5) * L / k`.
    Uniform,
    /// Exactly k arrivals per bin at sorted uniform draws (a Poisson
    /// process conditioned on its count).
    Poisson { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    /// All source bins are 1 s long: injections at explicit times.
    Timetable,
    Spread,
}

/// One pedestrian injection: when, and which route it is bound for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub time: f64,
    pub destination: String,
}

/// Per-source injection schedule derived from an [`ODMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProfile {
    pub source: String,
    pub mode: ProfileMode,
    /// Sorted by time, non-decreasing.
    pub entries: Vec<Injection>,
}

/// Derives the injection schedule for one source.
pub fn spread_profile(
    matrix: &ODMatrix,
    source: &str,
    policy: SpreadPolicy,
) -> Result<ArrivalProfile, DemandError> {
    let bins: Vec<&OdBin> = matrix
        .sorted_bins()
        .into_iter()
        .filter(|b| b.origin == source)
        .collect();
    if bins.is_empty() {
        return Err(DemandError::UnknownSource(source.to_string()));
    }
    let mode = if bins.iter().all(|b| b.bin_length == 1.0) {
        ProfileMode::Timetable
    } else {
        ProfileMode::Spread
    };
    let mut entries = Vec::with_capacity(bins.iter().map(|b| b.count as usize).sum());
    match policy {
        SpreadPolicy::Uniform => {
            for bin in &bins {
                let k = bin.count;
                for i in 0..k {
                    let t = bin.bin_start + (i as f64 + 0.5) * bin.bin_length / k as f64;
                    entries.push(Injection { time: t, destination: bin.destination.clone() });
                }
            }
        }
        SpreadPolicy::Poisson { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, source));
            for bin in &bins {
                let mut times: Vec<f64> = (0..bin.count)
                    .map(|_| bin.bin_start + rng.gen::<f64>() * bin.bin_length)
                    .collect();
                times.sort_by(|a, b| a.partial_cmp(b).unwrap());
                entries.extend(times.into_iter().map(|time| Injection {
                    time,
                    destination: bin.destination.clone(),
                }));
            }
        }
    }
    entries.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    Ok(ArrivalProfile { source: source.to_string(), mode, entries })
}

/// Key addressing one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinKey {
    pub bin_start: f64,
    pub origin: String,
    pub destination: String,
}

impl BinKey {
    fn matches(&self, bin: &OdBin) -> bool {
        self.bin_start.to_bits() == bin.bin_start.to_bits()
            && self.origin == bin.origin
            && self.destination == bin.destination
    }
}

/// In-place demand edits.
#[derive(Debug, Clone)]
pub enum EditOp {
    Add(OdBin),
    Delete(BinKey),
    /// Multiply counts by (1 + p/100), rounding half up. `keys: None`
    /// applies to every bin.
    ScalePercent { percent: f64, keys: Option<Vec<BinKey>> },
    /// Rewrite a bin's count to `rate * bin_length`, rounded half up.
    SetFrequency { key: BinKey, rate: f64 },
}

/// Half-up rounding of a non-negative value. Whole-percent scalings go
/// through exact integer arithmetic so ties like 5.5 never drift below the
/// boundary in floating point.
fn scale_count(count: u64, percent: f64) -> Result<u64, DemandError> {
    if percent < -100.0 {
        return Err(DemandError::NegativeCount(count as f64 * (1.0 + percent / 100.0)));
    }
    if percent.fract() == 0.0 {
        let p = percent as i128;
        let num = count as i128 * (100 + p);
        debug_assert!(num >= 0);
        return Ok(((2 * num + 100) / 200) as u64);
    }
    Ok(round_half_up(count as f64 * (1.0 + percent / 100.0)))
}

fn round_half_up(x: f64) -> u64 {
    debug_assert!(x >= 0.0);
    // The 1e-9 nudge keeps intended .5 ties from falling just short after
    // floating-point multiplication.
    (x + 0.5 + 1e-9).floor() as u64
}

pub fn edit_demand(matrix: &ODMatrix, op: &EditOp) -> Result<ODMatrix, DemandError> {
    let mut out = matrix.clone();
    match op {
        EditOp::Add(bin) => {
            out.push_checked(bin.clone(), out.bins.len() + 2)?;
        }
        EditOp::Delete(key) => {
            let before = out.bins.len();
            out.bins.retain(|b| !key.matches(b));
            if out.bins.len() == before {
                return Err(DemandError::UnknownBin(
                    key.bin_start,
                    key.origin.clone(),
                    key.destination.clone(),
                ));
            }
        }
        EditOp::ScalePercent { percent, keys } => {
            if let Some(keys) = keys {
                for key in keys {
                    if !out.bins.iter().any(|b| key.matches(b)) {
                        return Err(DemandError::UnknownBin(
                            key.bin_start,
                            key.origin.clone(),
                            key.destination.clone(),
                        ));
                    }
                }
            }
            for bin in out.bins.iter_mut() {
                let selected = match keys {
                    None => true,
                    Some(keys) => keys.iter().any(|k| k.matches(bin)),
                };
                if selected {
                    bin.count = scale_count(bin.count, *percent)?;
                }
            }
        }
        EditOp::SetFrequency { key, rate } => {
            if *rate < 0.0 {
                return Err(DemandError::NegativeCount(*rate));
            }
            let bin = out
                .bins
                .iter_mut()
                .find(|b| key.matches(b))
                .ok_or_else(|| {
                    DemandError::UnknownBin(key.bin_start, key.origin.clone(), key.destination.clone())
                })?;
            bin.count = round_half_up(rate * bin.bin_length);
        }
    }
    Ok(out)
}

pub fn parse_od_csv(text: &str) -> Result<ODMatrix, DemandError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    {
        let headers = reader.headers().map_err(|e| DemandError::Csv(e.to_string()))?;
        let expected: Vec<&str> = OD_CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(DemandError::Row {
                row: 1,
                msg: format!("header must be '{OD_CSV_HEADER}', got '{}'", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
    }
    let mut matrix = ODMatrix::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| DemandError::Csv(e.to_string()))?;
        if record.len() != 5 {
            return Err(DemandError::Row { row, msg: format!("expected 5 fields, got {}", record.len()) });
        }
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let bin_start: f64 = field(0)
            .parse()
            .map_err(|_| DemandError::Row { row, msg: format!("bad bin_start '{}'", field(0)) })?;
        let bin_length: f64 = field(1)
            .parse()
            .map_err(|_| DemandError::Row { row, msg: format!("bad bin_length '{}'", field(1)) })?;
        let count: i64 = field(4)
            .parse()
            .map_err(|_| DemandError::Row { row, msg: format!("bad count '{}'", field(4)) })?;
        if count < 0 {
            return Err(DemandError::Row { row, msg: format!("negative count {count}") });
        }
        matrix.push_checked(
            OdBin {
                bin_start,
                bin_length,
                origin: field(2).to_string(),
                destination: field(3).to_string(),
                count: count as u64,
            },
            row,
        )?;
    }
    Ok(matrix)
}

/// Byte-stable export sorted by (bin_start, origin, destination);
/// `parse_od_csv(export_od_csv(m)) == m` up to that ordering.
pub fn export_od_csv(matrix: &ODMatrix) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(OD_CSV_HEADER.split(','))
        .expect("in-memory write");
    for bin in matrix.sorted_bins() {
        writer
            .write_record(&[
                format!("{:?}", bin.bin_start),
                format!("{:?}", bin.bin_length),
                bin.origin.clone(),
                bin.destination.clone(),
                bin.count.to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf8")
}

/// Percentage mix of pedestrian types produced by one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyType {
    pub source: String,
    /// Type name -> percentage; sums to 100 within 1e-9.
    pub mix: BTreeMap<String, f64>,
}

impl SupplyType {
    pub fn validate(&self) -> Result<(), DemandError> {
        let sum: f64 = self.mix.values().sum();
        if self.mix.values().any(|p| *p < 0.0) || (sum - 100.0).abs() > 1e-9 {
            return Err(DemandError::BadMixSum { source_id: self.source.clone(), sum });
        }
        Ok(())
    }
}

/// Named demand variants stored with the scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemandStore {
    pub settings: BTreeMap<String, ODMatrix>,
}

impl DemandStore {
    pub fn store_setting(&mut self, name: &str, matrix: ODMatrix) -> Result<(), DemandError> {
        if name.is_empty() {
            return Err(DemandError::EmptyName);
        }
        self.settings.insert(name.to_string(), matrix);
        Ok(())
    }

    pub fn load_setting(&self, name: &str) -> Result<&ODMatrix, DemandError> {
        self.settings.get(name).ok_or_else(|| DemandError::UnknownSetting {
            name: name.to_string(),
            available: self.settings.keys().cloned().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin(start: f64, len: f64, o: &str, d: &str, count: u64) -> OdBin {
        OdBin { bin_start: start, bin_length: len, origin: o.into(), destination: d.into(), count }
    }

    #[test]
    fn parse_single_row() {
        let text = "bin_start,bin_length,origin,destination,count\n0,300,gateA,exitB,300\n";
        let m = parse_od_csv(text).unwrap();
        assert_eq!(m.bins.len(), 1);
        assert_eq!(m.total_count(), 300);
        assert_eq!(m.bins[0].origin, "gateA");
    }

    #[test]
    fn parse_empty_body() {
        let m = parse_od_csv("bin_start,bin_length,origin,destination,count\n").unwrap();
        assert!(m.bins.is_empty());
    }

    #[test]
    fn duplicate_key_reports_row() {
        let text = "bin_start,bin_length,origin,destination,count\n0,300,gateA,exitB,10\n0,300,gateA,exitB,20\n";
        match parse_od_csv(text).unwrap_err() {
            DemandError::DuplicateKey { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_count_and_zero_length_rejected() {
        let neg = "bin_start,bin_length,origin,destination,count\n0,300,a,b,-1\n";
        assert!(matches!(parse_od_csv(neg).unwrap_err(), DemandError::Row { row: 2, .. }));
        let zero = "bin_start,bin_length,origin,destination,count\n0,0,a,b,1\n";
        assert!(matches!(parse_od_csv(zero).unwrap_err(), DemandError::Row { row: 2, .. }));
    }

    #[test]
    fn uniform_spread_timing_rule() {
        // 300 pedestrians over [0, 300): rate 1/s, first at 0.5 s.
        let m = ODMatrix::new(vec![bin(0.0, 300.0, "gateA", "exitB", 300)]).unwrap();
        let p = spread_profile(&m, "gateA", SpreadPolicy::Uniform).unwrap();
        assert_eq!(p.entries.len(), 300);
        assert_eq!(p.entries[0].time, 0.5);
        assert_eq!(p.entries[299].time, 299.5);
        let rate = p.entries.len() as f64 / 300.0;
        assert!((rate - 1.0).abs() < 1e-12);
        // Hand rule (i + 0.5) * L / k.
        for (i, e) in p.entries.iter().enumerate() {
            assert_eq!(e.time, (i as f64 + 0.5) * 300.0 / 300.0);
        }
        assert_eq!(p.mode, ProfileMode::Spread);
    }

    #[test]
    fn uniform_single_arrival_at_midpoint() {
        let m = ODMatrix::new(vec![bin(0.0, 60.0, "s", "d", 1)]).unwrap();
        let p = spread_profile(&m, "s", SpreadPolicy::Uniform).unwrap();
        assert_eq!(p.entries.len(), 1);
        assert_eq!(p.entries[0].time, 30.0);
    }

    #[test]
    fn zero_count_bin_yields_no_arrivals() {
        let m = ODMatrix::new(vec![bin(0.0, 60.0, "s", "d", 0)]).unwrap();
        let p = spread_profile(&m, "s", SpreadPolicy::Uniform).unwrap();
        assert!(p.entries.is_empty());
    }

    #[test]
    fn poisson_spread_is_seeded_and_conserves_counts() {
        let m = ODMatrix::new(vec![bin(0.0, 120.0, "s", "d", 50), bin(120.0, 120.0, "s", "d", 25)]).unwrap();
        let a = spread_profile(&m, "s", SpreadPolicy::Poisson { seed: 9 }).unwrap();
        let b = spread_profile(&m, "s", SpreadPolicy::Poisson { seed: 9 }).unwrap();
        let c = spread_profile(&m, "s", SpreadPolicy::Poisson { seed: 10 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.entries.len(), 75);
        assert!(a.entries.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(a.entries.iter().all(|e| e.time >= 0.0 && e.time < 240.0));
    }

    #[test]
    fn timetable_mode_for_one_second_bins() {
        let m = ODMatrix::new(vec![bin(10.0, 1.0, "s", "d", 2), bin(20.0, 1.0, "s", "d", 1)]).unwrap();
        let p = spread_profile(&m, "s", SpreadPolicy::Uniform).unwrap();
        assert_eq!(p.mode, ProfileMode::Timetable);
    }

    #[test]
    fn scale_examples() {
        let m = ODMatrix::new(vec![bin(0.0, 300.0, "s", "d", 200)]).unwrap();
        let scaled = edit_demand(&m, &EditOp::ScalePercent { percent: 10.0, keys: None }).unwrap();
        assert_eq!(scaled.bins[0].count, 220);
        let zeroed = edit_demand(&m, &EditOp::ScalePercent { percent: -100.0, keys: None }).unwrap();
        assert_eq!(zeroed.bins[0].count, 0);
        let m5 = ODMatrix::new(vec![bin(0.0, 300.0, "s", "d", 5)]).unwrap();
        let up = edit_demand(&m5, &EditOp::ScalePercent { percent: 10.0, keys: None }).unwrap();
        assert_eq!(up.bins[0].count, 6, "5.5 rounds half up");
        assert!(edit_demand(&m, &EditOp::ScalePercent { percent: -120.0, keys: None }).is_err());
    }

    #[test]
    fn set_frequency_rewrites_count() {
        let m = ODMatrix::new(vec![bin(0.0, 300.0, "s", "d", 1)]).unwrap();
        let key = BinKey { bin_start: 0.0, origin: "s".into(), destination: "d".into() };
        let out = edit_demand(&m, &EditOp::SetFrequency { key, rate: 0.5 }).unwrap();
        assert_eq!(out.bins[0].count, 150);
    }

    #[test]
    fn delete_missing_bin_errors() {
        let m = ODMatrix::new(vec![bin(0.0, 300.0, "s", "d", 1)]).unwrap();
        let key = BinKey { bin_start: 99.0, origin: "s".into(), destination: "d".into() };
        assert!(matches!(edit_demand(&m, &EditOp::Delete(key)), Err(DemandError::UnknownBin(..))));
    }

    #[test]
    fn export_roundtrip_and_shape() {
        let empty = export_od_csv(&ODMatrix::default());
        assert_eq!(empty.trim(), OD_CSV_HEADER);
        let m = ODMatrix::new(vec![bin(0.0, 300.0, "s", "d", 7)]).unwrap();
        let text = export_od_csv(&m);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_od_csv(&text).unwrap(), m);
    }

    #[test]
    fn settings_store_and_load() {
        let mut store = DemandStore::default();
        let m = ODMatrix::new(vec![bin(0.0, 300.0, "s", "d", 100)]).unwrap();
        store.store_setting("base", m.clone()).unwrap();
        let halved = edit_demand(&m, &EditOp::ScalePercent { percent: -50.0, keys: None }).unwrap();
        store.store_setting("offpeak", halved).unwrap();
        assert_eq!(store.load_setting("base").unwrap(), &m);
        assert_eq!(store.load_setting("offpeak").unwrap().bins[0].count, 50);
        match store.load_setting("missing").unwrap_err() {
            DemandError::UnknownSetting { available, .. } => {
                assert_eq!(available, vec!["base".to_string(), "offpeak".to_string()]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(store.store_setting("", ODMatrix::default()).is_err());
    }

    #[test]
    fn supply_mix_must_sum_to_100() {
        let mut mix = BTreeMap::new();
        mix.insert("a".to_string(), 60.0);
        mix.insert("b".to_string(), 30.0);
        let s = SupplyType { source: "gate".into(), mix };
        assert!(matches!(s.validate(), Err(DemandError::BadMixSum { .. })));
    }

    #[test]
    fn disjoint_scales_commute() {
        let m = ODMatrix::new(vec![bin(0.0, 60.0, "a", "d", 11), bin(60.0, 60.0, "b", "d", 13)]).unwrap();
        let ka = BinKey { bin_start: 0.0, origin: "a".into(), destination: "d".into() };
        let kb = BinKey { bin_start: 60.0, origin: "b".into(), destination: "d".into() };
        let sa = EditOp::ScalePercent { percent: 23.0, keys: Some(vec![ka]) };
        let sb = EditOp::ScalePercent { percent: -40.0, keys: Some(vec![kb]) };
        let ab = edit_demand(&edit_demand(&m, &sa).unwrap(), &sb).unwrap();
        let ba = edit_demand(&edit_demand(&m, &sb).unwrap(), &sa).unwrap();
        assert_eq!(ab, ba);
    }
}
