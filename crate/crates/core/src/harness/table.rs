//! CSV reports, one row per trial.
//!
//! Reals are written with 17 significant digits and parse back bit for bit;
//! absent values are empty fields. Lines end in LF.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guarantees::Regime;
use crate::serde17;

pub const HEADER: [&str; 21] = [
    "trial", "n", "d", "m", "s", "q", "eps", "delta_2s", "regime", "rho", "C0", "C1", "q0", "tail",
    "err_l2", "bound", "within_bound", "iters", "status", "audit_pass", "audit_total",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithinBound {
    True,
    False,
    /// No claim: the certificate is inapplicable, the constant is only a
    /// lower bound, or the solver result failed its gates.
    NotAsserted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    NotConverged,
    /// Converged, but infeasible or not below the true signal's objective.
    ConvergedGateFailed,
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:path => $text:literal),* $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $text),* }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($variant),)*
                    other => Err(Error::Parse(format!("unknown {} value {other:?}", stringify!($ty)))),
                }
            }
        }
    };
}

keyword_enum!(WithinBound {
    WithinBound::True => "true",
    WithinBound::False => "false",
    WithinBound::NotAsserted => "not_asserted",
});

keyword_enum!(Status {
    Status::Converged => "converged",
    Status::NotConverged => "not_converged",
    Status::ConvergedGateFailed => "converged_gate_failed",
});

/// The CSV columns of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub trial: usize,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub s: usize,
    #[serde(with = "serde17::option")]
    pub q: Option<f64>,
    #[serde(with = "serde17")]
    pub eps: f64,
    #[serde(with = "serde17")]
    pub delta_2s: f64,
    pub regime: Regime,
    #[serde(with = "serde17::option")]
    pub rho: Option<f64>,
    #[serde(rename = "C0", with = "serde17::option")]
    pub c0: Option<f64>,
    #[serde(rename = "C1", with = "serde17::option")]
    pub c1: Option<f64>,
    #[serde(with = "serde17::option")]
    pub q0: Option<f64>,
    #[serde(with = "serde17")]
    pub tail: f64,
    #[serde(with = "serde17")]
    pub err_l2: f64,
    #[serde(with = "serde17::option")]
    pub bound: Option<f64>,
    pub within_bound: WithinBound,
    pub iters: usize,
    pub status: Status,
    pub audit_pass: usize,
    pub audit_total: usize,
}

fn real(x: f64) -> String {
    serde17::fmt(x)
}

fn opt(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

impl CsvRow {
    fn fields(&self) -> [String; 21] {
        [
            self.trial.to_string(),
            self.n.to_string(),
            self.d.to_string(),
            self.m.to_string(),
            self.s.to_string(),
            opt(self.q),
            real(self.eps),
            real(self.delta_2s),
            self.regime.as_str().to_string(),
            opt(self.rho),
            opt(self.c0),
            opt(self.c1),
            opt(self.q0),
            real(self.tail),
            real(self.err_l2),
            opt(self.bound),
            self.within_bound.to_string(),
            self.iters.to_string(),
            self.status.to_string(),
            self.audit_pass.to_string(),
            self.audit_total.to_string(),
        ]
    }

    fn parse(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != HEADER.len() {
            return Err(Error::Parse(format!("expected {} fields, got {}", HEADER.len(), rec.len())));
        }
        let field = |i: usize| &rec[i];
        let count = |i: usize| -> Result<usize> {
            field(i)
                .parse()
                .map_err(|_| Error::Parse(format!("{}: not a count: {:?}", HEADER[i], field(i))))
        };
        let real = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| Error::Parse(format!("{}: not a real: {:?}", HEADER[i], field(i))))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if field(i).is_empty() {
                Ok(None)
            } else {
                real(i).map(Some)
            }
        };
        let regime = match field(8) {
            "general_l1" => Regime::GeneralL1,
            "special_n_le_4s" => Regime::SpecialNLe4s,
            "lq" => Regime::Lq,
            other => return Err(Error::Parse(format!("unknown regime {other:?}"))),
        };
        Ok(CsvRow {
            trial: count(0)?,
            n: count(1)?,
            d: count(2)?,
            m: count(3)?,
            s: count(4)?,
            q: opt(5)?,
            eps: real(6)?,
            delta_2s: real(7)?,
            regime,
            rho: opt(9)?,
            c0: opt(10)?,
            c1: opt(11)?,
            q0: opt(12)?,
            tail: real(13)?,
            err_l2: real(14)?,
            bound: opt(15)?,
            within_bound: field(16).parse()?,
            iters: count(17)?,
            status: field(18).parse()?,
            audit_pass: count(19)?,
            audit_total: count(20)?,
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("checked to be an I/O error"),
        }
    } else {
        Error::Parse(e.to_string())
    }
}

fn write_rows<'a, W: std::io::Write>(out: W, rows: impl IntoIterator<Item = &'a CsvRow>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(HEADER).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.fields()).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string<'a>(rows: impl IntoIterator<Item = &'a CsvRow>) -> String {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

pub fn write_csv<'a>(rows: impl IntoIterator<Item = &'a CsvRow>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows(std::io::BufWriter::new(file), rows)
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_error)?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected CSV header: {:?}", header)));
    }
    r.records().map(|rec| CsvRow::parse(&rec.map_err(csv_error)?)).collect()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(trial: usize) -> CsvRow {
        CsvRow {
            trial,
            n: 6,
            d: 9,
            m: 20,
            s: 1,
            q: None,
            eps: 0.05,
            delta_2s: 0.1 + 1.0 / 3.0,
            regime: Regime::GeneralL1,
            rho: Some(std::f64::consts::PI / 7.0),
            c0: Some(3.0_f64.sqrt()),
            c1: Some(1e-300),
            q0: None,
            tail: 0.0,
            err_l2: 5e-324,
            bound: Some(1.0 / 7.0),
            within_bound: WithinBound::True,
            iters: 123,
            status: Status::Converged,
            audit_pass: 13,
            audit_total: 13,
        }
    }

    #[test]
    fn empty_list_is_header_only() {
        assert_eq!(to_csv_string(&[]), format!("{}\n", HEADER.join(",")));
        assert!(parse_csv(&to_csv_string(&[])).unwrap().is_empty());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rows = vec![sample(0), sample(1)];
        rows[1].q = Some(0.5);
        rows[1].regime = Regime::Lq;
        rows[1].q0 = Some(0.8127144788204322);
        rows[1].within_bound = WithinBound::NotAsserted;
        rows[1].status = Status::ConvergedGateFailed;
        rows[1].bound = None;
        let text = to_csv_string(&rows);
        assert!(!text.contains('\r'));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, rows);
        for (a, b) in back.iter().zip(&rows) {
            assert_eq!(a.delta_2s.to_bits(), b.delta_2s.to_bits());
            assert_eq!(a.err_l2.to_bits(), b.err_l2.to_bits());
        }
    }

    #[test]
    fn absent_values_are_empty_fields() {
        let text = to_csv_string(&[sample(0)]);
        let line = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 21);
        assert_eq!(fields[5], "");
        assert_eq!(fields[12], "");
        assert!(!text.contains("NaN"));
        assert_eq!(fields[6], "5.0000000000000003e-2");
    }

    #[test]
    fn file_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        write_csv(&[sample(4)], &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), vec![sample(4)]);
        let err = write_csv(&[sample(4)], dir.path().join("missing/run.csv")).unwrap_err();
        assert!(err.is_io());
        assert!(parse_csv("a,b\n1,2\n").is_err());
        let bad = to_csv_string(&[sample(0)]).replace("converged", "maybe");
        assert!(parse_csv(&bad).is_err());
    }
}
