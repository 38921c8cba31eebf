use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::{compute_fer, compute_ser, normalized_throughput, wilson_interval};
use super::{run_trial, Detector, ExperimentError, TrialOutcome};
use crate::config::{apply_overrides, ConfigError, LoadError, PrecoderKind, SystemConfig};

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    EsN0Db,
    NActive,
    NOnline,
    NAntennas,
    FrameLen,
    BompIters,
    PrecoderKind,
}

impl Axis {
    /// The `SystemConfig` field the axis writes.
    pub fn field(self) -> &'static str {
        match self {
            Axis::EsN0Db => "es_n0_db",
            Axis::NActive => "n_active",
            Axis::NOnline => "n_online",
            Axis::NAntennas => "n_antennas",
            Axis::FrameLen => "frame_len",
            Axis::BompIters => "bomp_iters",
            Axis::PrecoderKind => "precoder_kind",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.field())
    }
}

/// One value on a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Number(f64),
    Kind(PrecoderKind),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Number(v) => write!(f, "{v}"),
            AxisValue::Kind(k) => write!(f, "{k}"),
        }
    }
}

impl AxisValue {
    fn to_json(self, axis: Axis) -> Result<Value, ExperimentError> {
        let invalid = || ExperimentError::InvalidAxisValue { axis, value: self.to_string() };
        match (axis, self) {
            (Axis::PrecoderKind, AxisValue::Kind(k)) => Ok(serde_json::to_value(k).expect("kind serializes")),
            (Axis::EsN0Db, AxisValue::Number(v)) => Ok(Value::from(v)),
            (Axis::PrecoderKind, _) | (Axis::EsN0Db, _) | (_, AxisValue::Kind(_)) => Err(invalid()),
            (_, AxisValue::Number(v)) => {
                if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                    Ok(Value::from(v as u64))
                } else {
                    Err(invalid())
                }
            }
        }
    }
}

/// A one-dimensional parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub axis: Axis,
    pub values: Vec<AxisValue>,
    pub trials_per_point: usize,
    #[serde(default = "default_workers")]
    pub parallel_workers: usize,
    #[serde(default)]
    pub detector: Detector,
    /// Fill `mean_trial_ms`; off by default so tables are reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl SweepSpec {
    pub fn from_json_str(text: &str) -> Result<Self, LoadError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses a spec and applies dotted `key=value` overrides, e.g.
    /// `base.n_active=28` or `trials_per_point=50`.
    pub fn from_json_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self, LoadError> {
        let mut doc: Value = serde_json::from_str(text)?;
        apply_overrides(&mut doc, overrides)?;
        Ok(serde_json::from_value(doc)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Configuration of every point, in axis order. Fails on the first invalid
    /// value, listing every violated constraint of that point.
    pub fn points(&self) -> Result<Vec<SystemConfig>, ExperimentError> {
        if self.values.is_empty() {
            return Err(ExperimentError::EmptySweep);
        }
        self.values
            .iter()
            .map(|&v| {
                let mut doc = serde_json::to_value(&self.base).expect("config serializes");
                doc[self.axis.field()] = v.to_json(self.axis)?;
                let cfg: SystemConfig = serde_json::from_value(doc).map_err(LoadError::from)?;
                cfg.validate()
                    .map_err(|e: ConfigError| ExperimentError::InvalidPoint { value: v.to_string(), source: e })?;
                Ok(cfg)
            })
            .collect()
    }
}

/// Aggregates of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: String,
    pub trials: usize,
    pub ser: f64,
    pub ser_lo: f64,
    pub ser_hi: f64,
    pub fer: f64,
    pub fer_lo: f64,
    pub fer_hi: f64,
    pub throughput: f64,
    pub thm1_fraction: f64,
    pub mean_trial_ms: Option<f64>,
}

impl SweepRow {
    pub fn aggregate(cfg: &SystemConfig, axis_value: String, outcomes: &[TrialOutcome], mean_trial_ms: Option<f64>) -> Self {
        let symbols: usize = outcomes.iter().map(|o| o.symbols_total).sum();
        let symbol_errors: usize = outcomes.iter().map(|o| o.symbol_errors).sum();
        let frames: usize = outcomes.iter().map(|o| o.frames_total).sum();
        let frame_errors: usize = outcomes.iter().map(|o| o.frame_errors).sum();
        let (ser_lo, ser_hi) = wilson_interval(symbol_errors, symbols);
        let (fer_lo, fer_hi) = wilson_interval(frame_errors, frames);
        let fer = compute_fer(outcomes, cfg.fer_bit_threshold);
        let holds = outcomes.iter().filter(|o| o.theorem1_holds).count();
        Self {
            axis_value,
            trials: outcomes.len(),
            ser: compute_ser(outcomes),
            ser_lo,
            ser_hi,
            fer,
            fer_lo,
            fer_hi,
            throughput: normalized_throughput(fer, cfg),
            thm1_fraction: if outcomes.is_empty() { 0.0 } else { holds as f64 / outcomes.len() as f64 },
            mean_trial_ms,
        }
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "axis_value",
    "trials",
    "ser",
    "ser_lo",
    "ser_hi",
    "fer",
    "fer_lo",
    "fer_hi",
    "throughput",
    "thm1_fraction",
    "mean_trial_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let mut record = vec![r.axis_value.clone(), r.trials.to_string()];
            for v in [r.ser, r.ser_lo, r.ser_hi, r.fer, r.fer_lo, r.fer_hi, r.throughput, r.thm1_fraction] {
                record.push(v.to_string());
            }
            record.push(r.mean_trial_ms.map(|v| v.to_string()).unwrap_or_default());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads a table written by [`SweepTable::write_csv`].
    pub fn read_csv<R: std::io::Read>(axis: Axis, input: R) -> Result<Self, ExperimentError> {
        let mut rd = csv::Reader::from_reader(input);
        let parse = |s: &str| s.parse::<f64>().map_err(|e| ExperimentError::Parse(e.to_string()));
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != CSV_HEADER.len() {
                return Err(ExperimentError::Parse(format!("expected {} columns, got {}", CSV_HEADER.len(), rec.len())));
            }
            rows.push(SweepRow {
                axis_value: rec[0].to_string(),
                trials: rec[1].parse().map_err(|e: std::num::ParseIntError| ExperimentError::Parse(e.to_string()))?,
                ser: parse(&rec[2])?,
                ser_lo: parse(&rec[3])?,
                ser_hi: parse(&rec[4])?,
                fer: parse(&rec[5])?,
                fer_lo: parse(&rec[6])?,
                fer_hi: parse(&rec[7])?,
                throughput: parse(&rec[8])?,
                thm1_fraction: parse(&rec[9])?,
                mean_trial_ms: if rec[10].is_empty() { None } else { Some(parse(&rec[10])?) },
            });
        }
        Ok(Self { axis, rows })
    }
}

/// Runs `trials` trials of one point on the current rayon pool; results are
/// in trial order whatever the scheduling.
pub fn run_point(
    cfg: &SystemConfig,
    trials: usize,
    detector: Detector,
    record_timing: bool,
) -> Result<(Vec<TrialOutcome>, Option<f64>), ExperimentError> {
    let timed: Vec<(TrialOutcome, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let start = record_timing.then(Instant::now);
            let out = run_trial(cfg, t, detector)?;
            Ok((out, start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3)))
        })
        .collect::<Result<_, ExperimentError>>()?;
    let mean_ms = (record_timing && !timed.is_empty())
        .then(|| timed.iter().map(|(_, ms)| ms).sum::<f64>() / timed.len() as f64);
    Ok((timed.into_iter().map(|(o, _)| o).collect(), mean_ms))
}

/// Runs every point of `spec`, calling `on_row` as each row completes.
///
/// All points are validated before the first trial. Trial `t` of every point
/// draws from the same streams, so neighbouring points share randomness and
/// tables do not depend on the worker count.
pub fn run_sweep_with<F: FnMut(&SweepRow)>(spec: &SweepSpec, mut on_row: F) -> Result<SweepTable, ExperimentError> {
    let points = spec.points()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallel_workers.max(1))
        .build()
        .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
    let mut rows = Vec::with_capacity(points.len());
    for (cfg, value) in points.iter().zip(&spec.values) {
        let (outcomes, mean_ms) =
            pool.install(|| run_point(cfg, spec.trials_per_point, spec.detector, spec.record_timing))?;
        let row = SweepRow::aggregate(cfg, value.to_string(), &outcomes, mean_ms);
        on_row(&row);
        rows.push(row);
    }
    Ok(SweepTable { axis: spec.axis, rows })
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, ExperimentError> {
    run_sweep_with(spec, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SweepSpec {
        SweepSpec {
            base: SystemConfig {
                n_online: 12,
                n_active: 3,
                n_antennas: 4,
                frame_len: 20,
                msg_len: 4,
                bomp_iters: 4,
                es_n0_db: 0.0,
                precoder_kind: PrecoderKind::OrthonormalColumns,
                fer_bit_threshold: 1,
                seed: 5,
                msg_lens: None,
            },
            axis: Axis::EsN0Db,
            values: vec![AxisValue::Number(-5.0), AxisValue::Number(5.0), AxisValue::Number(15.0)],
            trials_per_point: 12,
            parallel_workers: 2,
            detector: Detector::Bomp,
            record_timing: false,
        }
    }

    #[test]
    fn single_point_single_trial_matches_run_trial() {
        let mut s = spec();
        s.values.truncate(1);
        s.trials_per_point = 1;
        let table = run_sweep(&s).unwrap();
        let cfg = &s.points().unwrap()[0];
        let out = run_trial(cfg, 0, Detector::Bomp).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0], SweepRow::aggregate(cfg, "-5".into(), &[out], None));
    }

    #[test]
    fn worker_count_does_not_change_the_table() {
        let mut s = spec();
        let one = {
            s.parallel_workers = 1;
            run_sweep(&s).unwrap().to_csv_string()
        };
        s.parallel_workers = 3;
        assert_eq!(run_sweep(&s).unwrap().to_csv_string(), one);
    }

    #[test]
    fn invalid_point_aborts_before_running() {
        let mut s = spec();
        s.axis = Axis::NActive;
        s.values = vec![AxisValue::Number(2.0), AxisValue::Number(13.0)];
        let mut rows = 0;
        let err = run_sweep_with(&s, |_| rows += 1).unwrap_err();
        assert_eq!(rows, 0);
        assert!(err.to_string().contains("n_active <= n_online"), "{err}");

        s.values = vec![AxisValue::Number(2.5)];
        assert!(matches!(s.points(), Err(ExperimentError::InvalidAxisValue { .. })));
        s.values = vec![AxisValue::Kind(PrecoderKind::NormalizedGaussian)];
        assert!(matches!(s.points(), Err(ExperimentError::InvalidAxisValue { .. })));
        s.values.clear();
        assert!(matches!(s.points(), Err(ExperimentError::EmptySweep)));
    }

    #[test]
    fn precoder_axis_and_json_round_trip() {
        let mut s = spec();
        s.axis = Axis::PrecoderKind;
        s.values = vec![
            AxisValue::Kind(PrecoderKind::OrthonormalColumns),
            AxisValue::Kind(PrecoderKind::NormalizedGaussian),
        ];
        let pts = s.points().unwrap();
        assert_eq!(pts[1].precoder_kind, PrecoderKind::NormalizedGaussian);
        let back = SweepSpec::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(back, s);
        let over = SweepSpec::from_json_with_overrides(&s.to_json_string(), &["base.n_active=5", "trials_per_point=3"]).unwrap();
        assert_eq!((over.base.n_active, over.trials_per_point), (5, 3));
        assert!(SweepSpec::from_json_with_overrides(&s.to_json_string(), &["base.nactive=5"]).is_err());
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let mut s = spec();
        s.trials_per_point = 4;
        s.record_timing = true;
        let table = run_sweep(&s).unwrap();
        let text = table.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.count(), 3);
        assert!(table.rows.iter().all(|r| r.mean_trial_ms.is_some()));
        let back = SweepTable::read_csv(Axis::EsN0Db, text.as_bytes()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn ser_improves_with_snr() {
        let table = run_sweep(&spec()).unwrap();
        assert!(table.rows[0].ser > table.rows[2].ser);
        for r in &table.rows {
            assert!(r.ser_lo <= r.ser && r.ser <= r.ser_hi);
            assert!(r.fer_lo <= r.fer && r.fer <= r.fer_hi);
        }
    }
}
