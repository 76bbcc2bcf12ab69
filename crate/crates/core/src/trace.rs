//! Line-oriented event trace: one record per event.
//!
//! ```text
//! 2.000000 3 s_n REC1 ({1,2},{O},{N})
//! 4.000000 0 m_B NOM
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Nom,
    Rec1,
    Rec2,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Nom => "NOM",
            Mode::Rec1 => "REC1",
            Mode::Rec2 => "REC2",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NOM" => Ok(Mode::Nom),
            "REC1" => Ok(Mode::Rec1),
            "REC2" => Ok(Mode::Rec2),
            other => Err(TraceError::Field(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Seconds since simulation start.
    pub time: f64,
    pub drone: usize,
    pub event: String,
    /// Mode of the drone after the event.
    pub mode: Mode,
    /// Estimate of the lost drone after the event; present iff mode ≠ NOM.
    pub estimate: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("{0}")]
    Field(String),
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.6} {} {} {}",
            self.time, self.drone, self.event, self.mode
        )?;
        if let Some(est) = &self.estimate {
            write!(f, " {est}")?;
        }
        Ok(())
    }
}

impl FromStr for TraceRecord {
    type Err = TraceError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut parts = line.splitn(5, ' ');
        let mut field = |name: &str| {
            parts
                .next()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| TraceError::Field(format!("missing {name}")))
        };
        let time = field("time")?
            .parse::<f64>()
            .map_err(|e| TraceError::Field(format!("time: {e}")))?;
        let drone = field("drone")?
            .parse::<usize>()
            .map_err(|e| TraceError::Field(format!("drone: {e}")))?;
        let event = field("event")?.to_string();
        let mode: Mode = field("mode")?.parse()?;
        let estimate = parts.next().map(str::to_string);
        if estimate.is_some() != (mode != Mode::Nom) {
            return Err(TraceError::Field(
                "estimate must be present exactly when mode is not NOM".into(),
            ));
        }
        Ok(TraceRecord {
            time,
            drone,
            event,
            mode,
            estimate,
        })
    }
}

pub fn write_trace(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

/// Parses a trace and checks that timestamps never decrease.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out: Vec<TraceRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = line.parse().map_err(|e: TraceError| TraceError::Line {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if out.last().is_some_and(|p| p.time > rec.time) {
            return Err(TraceError::Line {
                line: i + 1,
                msg: "timestamp decreases".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}
