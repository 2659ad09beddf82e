use std::fs;
use std::path::Path;

use dynsec::sim::Trace;
use dynsec::RealizationF64 as Realization;
use serde::Serialize;

use crate::commands::Output;

/// Failure of a CLI run, mapped to an exit status and an error record.
#[derive(Debug)]
pub enum CliError {
    Core(dynsec::Error),
    /// Unreadable or malformed files and bad flag values.
    Input(String),
    /// The run produced a report but its verdict is a failure.
    Rejected { report: Box<Output>, cause: dynsec::Error },
}

impl From<dynsec::Error> for CliError {
    fn from(e: dynsec::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        use dynsec::Error as E;
        match self {
            CliError::Input(_) => "input",
            CliError::Core(e) | CliError::Rejected { cause: e, .. } => match e {
                E::Dimension { .. } => "dimension",
                E::NonFinite(_) => "non_finite",
                E::Input(_) => "input",
                E::PoleProximity { .. } => "pole_proximity",
                E::NoNullSpace => "no_null_space",
                E::InvalidChannel { .. } => "invalid_channel",
                E::InvalidSupport { .. } => "invalid_support",
                E::Contract(_) => "contract",
                E::Hypothesis(_) => "hypothesis",
                E::Interpolation(_) => "interpolation",
                E::TruncationTooShort { .. } => "truncation_too_short",
                E::NotLeftInvertible { .. } => "not_left_invertible",
                E::Overflow { .. } => "overflow",
                E::Numeric(_) => "numeric",
            },
        }
    }

    pub fn to_json(&self) -> String {
        let message = match self {
            CliError::Core(e) | CliError::Rejected { cause: e, .. } => e.to_string(),
            CliError::Input(m) => m.clone(),
        };
        serde_json::to_string(&ErrorRecord { error: self.kind(), message }).expect("error record serializes")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

pub fn load_model(path: Option<&Path>) -> CliResult<Realization> {
    let path = path.ok_or_else(|| CliError::Input("--model is required".into()))?;
    Ok(Realization::from_json(&read_text(path)?)?)
}

/// Reads a CSV trace: one header row, then one row of decimals per sample.
pub fn read_trace(path: &Path) -> CliResult<Trace<f64>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let channels = reader.headers().map_err(|e| bad(e.to_string()))?.len();
    let mut samples = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let sample = row
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("sample {k}: `{s}` is not a number"))))
            .collect::<CliResult<Vec<f64>>>()?;
        samples.push(sample);
    }
    Ok(Trace::from_samples(channels, &samples)?)
}

/// CSV text of a trace with header `c1..cK`.
pub fn trace_csv(t: &Trace<f64>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((1..=t.channels()).map(|c| format!("c{c}"))).expect("in-memory write");
    for k in 0..t.len() {
        w.write_record((0..t.channels()).map(|c| t.get(c, k).to_string())).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Parses a comma-separated list; the empty string is the empty list.
pub fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> CliResult<Vec<T>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| CliError::Input(format!("{what}: `{x}` is not valid"))))
        .collect()
}
