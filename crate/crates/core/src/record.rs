//! Uniformly sampled channel records and their on-disk CSV form.
//!
//! The format is one header line followed by one sample per line:
//!
//! ```text
//! # dt=0.01 units=m/s^2 channel=story3
//! -1.2345678901234567e-2
//! ```
//!
//! Samples are written with enough digits that a read-back reproduces the
//! original `f64` bit for bit.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical units a record can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    #[serde(rename = "m/s^2")]
    Acceleration,
    #[serde(rename = "m/s")]
    Velocity,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Units::Acceleration => write!(f, "m/s^2"),
            Units::Velocity => write!(f, "m/s"),
        }
    }
}

impl Units {
    fn parse(s: &str) -> Option<Units> {
        match s {
            "m/s^2" => Some(Units::Acceleration),
            "m/s" => Some(Units::Velocity),
            _ => None,
        }
    }
}

/// A uniformly sampled scalar channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Sample interval (s).
    pub dt: f64,
    pub units: Units,
    /// Channel label, e.g. `ground` or `story3`.
    pub channel: String,
    pub samples: Vec<f64>,
}

impl Record {
    pub fn new(dt: f64, units: Units, channel: impl Into<String>, samples: Vec<f64>) -> Self {
        Record {
            dt,
            units,
            channel: channel.into(),
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.samples.len() - 1) as f64 * self.dt
        }
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// 1-based story number when the channel is labeled `story<k>`.
    pub fn story_index(&self) -> Option<usize> {
        let rest = self.channel.strip_prefix("story")?;
        rest.parse::<usize>().ok().filter(|k| *k >= 1)
    }

    /// Require the record to carry the given units.
    pub fn expect_units(&self, expected: Units, context: &str) -> Result<()> {
        if self.units != expected {
            return Err(Error::UnitMismatch {
                expected: expected.to_string(),
                got: self.units.to_string(),
                context: context.to_string(),
            });
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        let mut w = BufWriter::new(file);
        writeln!(
            w,
            "# dt={} units={} channel={}",
            self.dt, self.units, self.channel
        )?;
        for x in &self.samples {
            // 17 significant digits: exact f64 round trip
            writeln!(w, "{x:.16e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Record> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = File::open(path)?;
        let reader = BufReader::new(file);
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: display.clone(),
            line,
            msg,
        };

        let mut dt = None;
        let mut units = None;
        let mut channel = None;
        let mut samples = Vec::new();
        let mut saw_header = false;

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if saw_header {
                    continue; // later comments are ignored
                }
                saw_header = true;
                for token in rest.split_whitespace() {
                    let (key, value) = token.split_once('=').ok_or_else(|| {
                        parse_err(line_no, format!("malformed header token `{token}`"))
                    })?;
                    match key {
                        "dt" => {
                            let v: f64 = value
                                .parse()
                                .map_err(|_| parse_err(line_no, format!("invalid dt `{value}`")))?;
                            if v <= 0.0 || !v.is_finite() {
                                return Err(parse_err(line_no, "dt must be positive".into()));
                            }
                            dt = Some(v);
                        }
                        "units" => {
                            units = Some(Units::parse(value).ok_or_else(|| {
                                parse_err(
                                    line_no,
                                    format!("unknown units `{value}` (expected m/s^2 or m/s)"),
                                )
                            })?);
                        }
                        "channel" => channel = Some(value.to_string()),
                        other => {
                            return Err(parse_err(line_no, format!("unknown header key `{other}`")))
                        }
                    }
                }
                continue;
            }
            if !saw_header {
                return Err(parse_err(
                    line_no,
                    "expected `# dt=... units=... channel=...` header before samples".into(),
                ));
            }
            let x: f64 = trimmed
                .parse()
                .map_err(|_| parse_err(line_no, format!("invalid sample `{trimmed}`")))?;
            samples.push(x);
        }

        let dt = dt.ok_or_else(|| parse_err(1, "header is missing dt".into()))?;
        let units = units.ok_or_else(|| parse_err(1, "header is missing units".into()))?;
        let channel = channel.ok_or_else(|| parse_err(1, "header is missing channel".into()))?;
        Ok(Record {
            dt,
            units,
            channel,
            samples,
        })
    }
}
