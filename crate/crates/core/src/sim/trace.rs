//! Per-round records and their CSV form.
//!
//! Columns, with `N` players and `M` event coordinates:
//! `t, omega_1..M, b_1..N, alpha_1..N, u_1..N, x_1..N, Q_1..N, Z_1..N,
//! gamma_1..N, ubar_1..N, xbar_1..N, gbar_1..N, objective`.
//! `t` counts from 0; queues and averages are the values after the round.
//! Variants without a proxy vector leave the `gamma` and `gbar` cells empty.
//! Floats use the shortest representation that parses back to the same bits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Action, ActionVector, EventVector, UtilityVector};
use crate::manager::BoundConstants;
use crate::sim::checks::Verdict;

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub omega: EventVector,
    pub baseline: ActionVector,
    pub suggestion: ActionVector,
    pub u: UtilityVector,
    pub x: UtilityVector,
    pub q: Vec<f64>,
    pub z: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub ubar: Vec<f64>,
    pub xbar: Vec<f64>,
    pub gbar: Option<Vec<f64>>,
    pub objective: f64,
}

impl RoundRecord {
    /// Rounds completed once this record is in.
    pub fn rounds(&self) -> u64 {
        self.t + 1
    }
}

pub fn header(num_players: usize, event_dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=event_dim).map(|j| format!("omega_{j}")));
    for prefix in ["b", "alpha", "u", "x", "Q", "Z", "gamma", "ubar", "xbar", "gbar"] {
        h.extend((1..=num_players).map(|i| format!("{prefix}_{i}")));
    }
    h.push("objective".into());
    h
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    num_players: usize,
    event_dim: usize,
    row: Vec<String>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W, num_players: usize, event_dim: usize) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        inner
            .write_record(header(num_players, event_dim))
            .map_err(csv_error)?;
        Ok(TraceWriter {
            inner,
            num_players,
            event_dim,
            row: Vec::new(),
        })
    }

    pub fn write(&mut self, r: &RoundRecord) -> Result<()> {
        let n = self.num_players;
        if r.omega.len() != self.event_dim || r.baseline.len() != n || r.suggestion.len() != n {
            return Err(Error::invalid("record does not match trace dimensions"));
        }
        let row = &mut self.row;
        row.clear();
        row.push(r.t.to_string());
        row.extend(r.omega.iter().map(|w| format_float(*w)));
        row.extend(r.baseline.iter().map(Action::to_string));
        row.extend(r.suggestion.iter().map(Action::to_string));
        for v in [&r.u.0, &r.x.0, &r.q, &r.z] {
            row.extend(v.iter().map(|x| format_float(*x)));
        }
        let optional = |row: &mut Vec<String>, v: &Option<Vec<f64>>| match v {
            Some(v) => row.extend(v.iter().map(|x| format_float(*x))),
            None => row.extend(std::iter::repeat(String::new()).take(n)),
        };
        optional(row, &r.gamma);
        row.extend(r.ubar.iter().map(|x| format_float(*x)));
        row.extend(r.xbar.iter().map(|x| format_float(*x)));
        optional(row, &r.gbar);
        row.push(format_float(r.objective));
        self.inner.write_record(&*row).map_err(csv_error)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(e.error().to_string()))
    }
}

/// Streams records back out of a trace file.
pub struct TraceReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    num_players: usize,
    event_dim: usize,
    line: u64,
}

impl<R: Read> TraceReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let h: Vec<String> = rdr
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(str::to_string)
            .collect();
        let event_dim = h.iter().filter(|c| c.starts_with("omega_")).count();
        let num_players = h.iter().filter(|c| c.starts_with("alpha_")).count();
        if h != header(num_players, event_dim) {
            return Err(Error::Format("unrecognized trace header".into()));
        }
        Ok(TraceReader {
            records: rdr.into_records(),
            num_players,
            event_dim,
            line: 1,
        })
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn event_dim(&self) -> usize {
        self.event_dim
    }

    fn parse(&self, rec: &csv::StringRecord) -> Result<RoundRecord> {
        let line = self.line;
        let n = self.num_players;
        let m = self.event_dim;
        let cells: Vec<&str> = rec.iter().collect();
        if cells.len() != 2 + m + 10 * n {
            return Err(Error::Format(format!(
                "line {line}: expected {} cells, found {}",
                2 + m + 10 * n,
                cells.len()
            )));
        }
        let bad = |what: &str, cell: &str| Error::Format(format!("line {line}: bad {what} {cell:?}"));
        let floats = |cells: &[&str], what: &str| -> Result<Vec<f64>> {
            cells
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad(what, c)))
                .collect()
        };
        let actions = |cells: &[&str]| -> Result<Vec<Action>> {
            cells
                .iter()
                .map(|c| c.parse::<Action>().map_err(|_| bad("action", c)))
                .collect()
        };
        let optional = |cells: &[&str], what: &str| -> Result<Option<Vec<f64>>> {
            if cells.iter().all(|c| c.is_empty()) {
                Ok(None)
            } else {
                floats(cells, what).map(Some)
            }
        };
        let t: u64 = cells[0].parse().map_err(|_| bad("round", cells[0]))?;
        let mut at = 1;
        let mut take = |k: usize| {
            let s = &cells[at..at + k];
            at += k;
            s
        };
        let omega = floats(take(m), "event")?;
        let baseline = actions(take(n))?;
        let suggestion = actions(take(n))?;
        let u = floats(take(n), "utility")?;
        let x = floats(take(n), "utility")?;
        let q = floats(take(n), "queue")?;
        let z = floats(take(n), "queue")?;
        let gamma = optional(take(n), "proxy")?;
        let ubar = floats(take(n), "average")?;
        let xbar = floats(take(n), "average")?;
        let gbar = optional(take(n), "proxy average")?;
        let last = take(1)[0];
        let objective = last.parse::<f64>().map_err(|_| bad("objective", last))?;
        Ok(RoundRecord {
            t,
            omega: EventVector(omega),
            baseline: ActionVector(baseline),
            suggestion: ActionVector(suggestion),
            u: UtilityVector(u),
            x: UtilityVector(x),
            q,
            z,
            gamma,
            ubar,
            xbar,
            gbar,
            objective,
        })
    }
}

impl<R: Read> Iterator for TraceReader<R> {
    type Item = Result<RoundRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.records.next()?;
        self.line += 1;
        Some(rec.map_err(|e| Error::Format(e.to_string())).and_then(|r| self.parse(&r)))
    }
}

/// End-of-run summary written next to the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    /// SHA-256 of the canonical scenario JSON.
    pub fingerprint: String,
    pub manager: String,
    pub rounds: u64,
    pub final_ubar: Vec<f64>,
    pub final_xbar: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_gbar: Option<Vec<f64>>,
    /// `ū − x̄` per player.
    pub regret_gap: Vec<f64>,
    pub max_q_norm: f64,
    pub max_z_norm: f64,
    pub constants: BoundConstants,
    pub verdicts: Vec<Verdict>,
}

impl TraceSummary {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: u64, gamma: bool) -> RoundRecord {
        RoundRecord {
            t,
            omega: EventVector::from([2.2, 0.1 + 0.2]),
            baseline: ActionVector::from([1, 2]),
            suggestion: ActionVector::from([2, 2]),
            u: UtilityVector::from([1.0 / 3.0, 5.0]),
            x: UtilityVector::from([2.2, 1e-300]),
            q: vec![0.0, 1e20],
            z: vec![-3.5, 0.0],
            gamma: gamma.then(|| vec![10.0, 7.25]),
            ubar: vec![0.1, 0.7],
            xbar: vec![f64::MIN_POSITIVE, 3.0],
            gbar: gamma.then(|| vec![9.0, 1.0 / 7.0]),
            objective: -0.0,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut w = TraceWriter::new(Vec::new(), 2, 2).unwrap();
        let recs = [record(0, true), record(1, false)];
        for r in &recs {
            w.write(r).unwrap();
        }
        let bytes = w.finish().unwrap();
        let back: Vec<_> = TraceReader::new(bytes.as_slice())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], recs[0]);
        assert_eq!(back[1], recs[1]);
        assert_eq!(back[0].u[0].to_bits(), recs[0].u[0].to_bits());
        assert!(back[0].objective.is_sign_negative());
    }

    #[test]
    fn header_layout() {
        let h = header(2, 3);
        assert_eq!(h.len(), 1 + 3 + 10 * 2 + 1);
        assert_eq!(&h[..5], ["t", "omega_1", "omega_2", "omega_3", "b_1"]);
        assert_eq!(h.last().unwrap(), "objective");
    }

    #[test]
    fn malformed_rows_are_reported() {
        let mut w = TraceWriter::new(Vec::new(), 2, 2).unwrap();
        w.write(&record(0, false)).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        let broken = text.replacen(",1,2,2,2,", ",1,x,2,2,", 1);
        let err = TraceReader::new(broken.as_bytes()).unwrap().next().unwrap().unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
        assert!(TraceReader::new("a,b\n".as_bytes()).is_err());
    }
}
