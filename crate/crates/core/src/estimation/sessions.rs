//! Session-log ingestion and writing.
//!
//! One CSV row per trial. The nine core columns are required; the
//! simulator and service also write the human inference, decision reward,
//! belief snapshot taken before the decision, and free-form flags.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EstimationError, Sequence, Trial};
use crate::model::{
    ActionTriple, Compliance, Experience, ObservationPair, Stimulus, Transparency,
};
use crate::util::{fmt_f64, write_atomic};

pub const CORE_COLUMNS: [&str; 9] = [
    "participant_id",
    "mission_id",
    "trial_index",
    "transparency",
    "recommendation",
    "experience",
    "truth",
    "compliance",
    "rt_seconds",
];

pub const EXTRA_COLUMNS: [&str; 5] = [
    "inference",
    "decision_reward",
    "p_trust_high",
    "p_workload_high",
    "flags",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub participant_id: String,
    pub mission_id: String,
    pub trial_index: usize,
    pub transparency: Transparency,
    pub recommendation: Stimulus,
    pub experience: Experience,
    pub truth: Stimulus,
    pub compliance: Compliance,
    pub rt_seconds: f64,
    pub inference: Option<Stimulus>,
    pub decision_reward: Option<f64>,
    pub p_trust_high: Option<f64>,
    pub p_workload_high: Option<f64>,
    /// `;`-separated markers such as `slow_rt` or `zero_likelihood`.
    pub flags: String,
}

impl SessionRow {
    pub fn action(&self) -> ActionTriple {
        ActionTriple::new(self.recommendation, self.experience, self.transparency)
    }

    pub fn observation(&self) -> Result<ObservationPair, EstimationError> {
        ObservationPair::new(self.compliance, self.rt_seconds).map_err(|e| EstimationError::Schema {
            line: 0,
            field: "rt_seconds".into(),
            message: e.to_string(),
        })
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.split(';').any(|f| f == flag)
    }

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        vec![
            self.participant_id.clone(),
            self.mission_id.clone(),
            self.trial_index.to_string(),
            self.transparency.label().into(),
            self.recommendation.label().into(),
            self.experience.label().into(),
            self.truth.label().into(),
            self.compliance.label().into(),
            fmt_f64(self.rt_seconds),
            self.inference.map(|s| s.label().to_string()).unwrap_or_default(),
            opt(self.decision_reward),
            opt(self.p_trust_high),
            opt(self.p_workload_high),
            self.flags.clone(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionFormat {
    Csv,
    Json,
}

impl SessionFormat {
    /// Guess from the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => SessionFormat::Json,
            _ => SessionFormat::Csv,
        }
    }
}

impl FromStr for SessionFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(SessionFormat::Csv),
            "json" => Ok(SessionFormat::Json),
            other => Err(format!("unknown session format `{other}` (csv|json)")),
        }
    }
}

fn schema(line: usize, field: &str, message: impl Into<String>) -> EstimationError {
    EstimationError::Schema {
        line,
        field: field.into(),
        message: message.into(),
    }
}

/// Parse session rows from CSV. Errors name the 1-based file line and column.
pub fn read_session_rows<R: Read>(reader: R) -> Result<Vec<SessionRow>, EstimationError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut core = [0usize; 9];
    for (slot, name) in core.iter_mut().zip(CORE_COLUMNS) {
        *slot = col(name).ok_or_else(|| schema(1, name, "missing column"))?;
    }
    let extra: Vec<Option<usize>> = EXTRA_COLUMNS.iter().map(|n| col(n)).collect();

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |k: usize| rec.get(core[k]).unwrap_or("");
        fn parse<T: FromStr>(line: usize, field: &str, raw: &str) -> Result<T, EstimationError>
        where
            T::Err: std::fmt::Display,
        {
            raw.parse::<T>()
                .map_err(|e| schema(line, field, format!("`{raw}`: {e}")))
        }
        let participant_id = get(0).to_string();
        if participant_id.is_empty() {
            return Err(schema(line, "participant_id", "empty"));
        }
        let rt_seconds: f64 = parse(line, "rt_seconds", get(8))?;
        if !(rt_seconds.is_finite() && rt_seconds > 0.0) {
            return Err(schema(
                line,
                "rt_seconds",
                format!("response time must be finite and > 0 (got {rt_seconds})"),
            ));
        }
        let extra_str = |k: usize| {
            extra[k]
                .and_then(|i| rec.get(i))
                .filter(|s| !s.is_empty())
        };
        let opt_f64 = |k: usize| -> Result<Option<f64>, EstimationError> {
            extra_str(k)
                .map(|s| parse::<f64>(line, EXTRA_COLUMNS[k], s))
                .transpose()
        };
        rows.push(SessionRow {
            participant_id,
            mission_id: get(1).to_string(),
            trial_index: parse(line, "trial_index", get(2))?,
            transparency: parse(line, "transparency", get(3))?,
            recommendation: parse(line, "recommendation", get(4))?,
            experience: parse(line, "experience", get(5))?,
            truth: parse(line, "truth", get(6))?,
            compliance: parse(line, "compliance", get(7))?,
            rt_seconds,
            inference: extra_str(0)
                .map(|s| parse::<Stimulus>(line, "inference", s))
                .transpose()?,
            decision_reward: opt_f64(1)?,
            p_trust_high: opt_f64(2)?,
            p_workload_high: opt_f64(3)?,
            flags: extra_str(4).unwrap_or("").to_string(),
        });
    }
    Ok(rows)
}

pub fn write_session_rows<W: Write>(writer: W, rows: &[SessionRow]) -> Result<(), EstimationError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CORE_COLUMNS.iter().chain(EXTRA_COLUMNS.iter()))?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|e| EstimationError::Io {
        path: "<writer>".into(),
        source: e,
    })?;
    Ok(())
}

/// Render rows as CSV bytes.
pub fn session_rows_to_csv(rows: &[SessionRow]) -> Result<Vec<u8>, EstimationError> {
    let mut buf = Vec::new();
    write_session_rows(&mut buf, rows)?;
    Ok(buf)
}

pub fn export_session_rows(path: &Path, rows: &[SessionRow]) -> Result<(), EstimationError> {
    let bytes = session_rows_to_csv(rows)?;
    write_atomic(path, &bytes).map_err(|e| EstimationError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Append rows to a session log, writing the header first when the file is
/// new or empty. Each call ends with the data synced to disk.
pub fn append_session_rows(path: &Path, rows: &[SessionRow]) -> Result<(), EstimationError> {
    let io_err = |e| EstimationError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err)?;
    let fresh = file.metadata().map_err(io_err)?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    if fresh {
        w.write_record(CORE_COLUMNS.iter().chain(EXTRA_COLUMNS.iter()))?;
    }
    for r in rows {
        w.write_record(r.record())?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(e.into_error()))?;
    file.write_all(&bytes).map_err(io_err)?;
    file.sync_data().map_err(io_err)
}

/// Group rows into sequences keyed by (participant, mission), trials sorted
/// by `trial_index`. Groups come out in order of first appearance.
pub fn rows_to_sequences(rows: &[SessionRow]) -> Result<Vec<Sequence>, EstimationError> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<(usize, Trial)>> = BTreeMap::new();
    for (k, r) in rows.iter().enumerate() {
        let key = (r.participant_id.clone(), r.mission_id.clone());
        let obs = ObservationPair::new(r.compliance, r.rt_seconds).map_err(|e| {
            schema(k + 2, "rt_seconds", e.to_string())
        })?;
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        if entry.iter().any(|(i, _)| *i == r.trial_index) {
            return Err(schema(
                k + 2,
                "trial_index",
                format!(
                    "duplicate trial {} for {}/{}",
                    r.trial_index, r.participant_id, r.mission_id
                ),
            ));
        }
        entry.push((
            r.trial_index,
            Trial {
                action: r.action(),
                observation: obs,
            },
        ));
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let mut trials = groups.remove(&key).expect("grouped key");
            trials.sort_by_key(|(i, _)| *i);
            Sequence {
                participant_id: key.0,
                mission_id: key.1,
                trials: trials.into_iter().map(|(_, t)| t).collect(),
            }
        })
        .collect())
}

/// Load sequences from a session-log CSV or a JSON array of sequences.
pub fn load_sessions(path: &Path, format: SessionFormat) -> Result<Vec<Sequence>, EstimationError> {
    let io = |e| EstimationError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    match format {
        SessionFormat::Csv => rows_to_sequences(&read_session_rows(std::io::BufReader::new(file))?),
        SessionFormat::Json => Ok(serde_json::from_reader(std::io::BufReader::new(file))?),
    }
}

/// Load every `*.csv` session log in a directory (sorted by file name) or a
/// single file.
pub fn load_session_path(path: &Path) -> Result<Vec<Sequence>, EstimationError> {
    if !path.is_dir() {
        return load_sessions(path, SessionFormat::from_path(path));
    }
    let io = |e| EstimationError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(load_sessions(&f, SessionFormat::Csv)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: &str, m: &str, i: usize, rt: f64) -> SessionRow {
        SessionRow {
            participant_id: p.into(),
            mission_id: m.into(),
            trial_index: i,
            transparency: Transparency::Medium,
            recommendation: Stimulus::Present,
            experience: Experience::Reliable,
            truth: Stimulus::Absent,
            compliance: Compliance::Agree,
            rt_seconds: rt,
            inference: None,
            decision_reward: None,
            p_trust_high: None,
            p_workload_high: None,
            flags: String::new(),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rows = vec![row("a", "m1", 0, 1.234_567_890_123), row("a", "m1", 1, 0.1 + 0.2)];
        rows[1].inference = Some(Stimulus::Present);
        rows[1].decision_reward = Some(-7.0);
        rows[1].p_trust_high = Some(0.871_400_000_000_01);
        rows[1].flags = "slow_rt".into();
        let bytes = session_rows_to_csv(&rows).unwrap();
        let back = read_session_rows(bytes.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn negative_rt_names_the_row() {
        let csv = "participant_id,mission_id,trial_index,transparency,recommendation,experience,truth,compliance,rt_seconds\n\
                   p,m,0,L,absent,reliable,absent,agree,1.5\n\
                   p,m,1,H,present,faulty,present,disagree,-2.0\n";
        match read_session_rows(csv.as_bytes()) {
            Err(EstimationError::Schema { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "rt_seconds");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn bad_label_and_missing_column() {
        let csv = "participant_id,mission_id,trial_index,transparency,recommendation,experience,truth,compliance,rt_seconds\n\
                   p,m,0,X,absent,reliable,absent,agree,1.5\n";
        let err = read_session_rows(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, EstimationError::Schema { line: 2, ref field, .. } if field == "transparency"));
        let csv = "participant_id,mission_id\np,m\n";
        assert!(matches!(
            read_session_rows(csv.as_bytes()),
            Err(EstimationError::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn grouping_sorts_trials_and_keeps_group_order() {
        let rows = vec![
            row("b", "m1", 1, 2.0),
            row("a", "m1", 0, 1.0),
            row("b", "m1", 0, 3.0),
        ];
        let seqs = rows_to_sequences(&rows).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].participant_id, "b");
        assert_eq!(seqs[0].trials[0].observation.response_time(), 3.0);
        let dup = vec![row("a", "m", 0, 1.0), row("a", "m", 0, 1.0)];
        assert!(rows_to_sequences(&dup).is_err());
    }

    #[test]
    fn json_and_csv_files_load() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row("a", "m1", 0, 1.0), row("a", "m2", 0, 2.0)];
        let csv_path = dir.path().join("s.csv");
        export_session_rows(&csv_path, &rows).unwrap();
        let from_csv = load_sessions(&csv_path, SessionFormat::Csv).unwrap();
        assert_eq!(from_csv.len(), 2);
        let json_path = dir.path().join("s.json");
        std::fs::write(&json_path, serde_json::to_vec(&from_csv).unwrap()).unwrap();
        let from_json = load_sessions(&json_path, SessionFormat::from_path(&json_path)).unwrap();
        assert_eq!(from_json, from_csv);
        assert_eq!(load_session_path(dir.path()).unwrap(), from_csv);
    }

    #[test]
    fn appending_matches_one_shot_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows: Vec<SessionRow> = (0..4).map(|i| row("a", "m1", i, 0.5 + i as f64)).collect();
        for r in &rows {
            append_session_rows(&path, std::slice::from_ref(r)).unwrap();
        }
        assert_eq!(std::fs::read(&path).unwrap(), session_rows_to_csv(&rows).unwrap());
    }
}
