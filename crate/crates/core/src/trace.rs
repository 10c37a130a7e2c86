//! Round-indexed records of agent observables and their CSV export.

use std::io::{self, Write};
use std::time::Duration;

/// Per-agent list of agent ids whose messages were read during one round.
pub type RoundAccess = Vec<Vec<usize>>;

/// One synchronous round: `values[k][i]` is observable `k` of agent `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: usize,
    pub values: Vec<Vec<f64>>,
}

/// Time-indexed record of declared observables. Round indices are contiguous
/// from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    protocol: String,
    params: Vec<(String, String)>,
    observables: Vec<String>,
    rounds: Vec<Snapshot>,
    wall_clock: Option<Duration>,
    accesses: Option<Vec<RoundAccess>>,
}

impl RoundTrace {
    pub fn new(protocol: &str, observables: &[&str]) -> Self {
        Self {
            protocol: protocol.to_string(),
            params: Vec::new(),
            observables: observables.iter().map(|s| s.to_string()).collect(),
            rounds: Vec::new(),
            wall_clock: None,
            accesses: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// Appends the next round. Panics if the observable count is wrong.
    pub fn record(&mut self, values: Vec<Vec<f64>>) {
        assert_eq!(values.len(), self.observables.len(), "observable count");
        let t = self.rounds.len();
        self.rounds.push(Snapshot { t, values });
    }

    pub fn protocol(&self) -> &str {
        &self.protocol
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    pub fn observables(&self) -> &[String] {
        &self.observables
    }

    pub fn rounds(&self) -> &[Snapshot] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.rounds.last()
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.observables.iter().position(|o| o == name)
    }

    /// Values of observable `name` at round `t`.
    pub fn series(&self, name: &str, t: usize) -> Option<&[f64]> {
        let k = self.index_of(name)?;
        self.rounds.get(t).map(|s| s.values[k].as_slice())
    }

    pub fn wall_clock(&self) -> Option<Duration> {
        self.wall_clock
    }

    pub fn set_wall_clock(&mut self, d: Duration) {
        self.wall_clock = Some(d);
    }

    /// Message-read log, one entry per executed round transition, present
    /// only for runs with audit instrumentation.
    pub fn accesses(&self) -> Option<&[RoundAccess]> {
        self.accesses.as_deref()
    }

    pub(crate) fn set_accesses(&mut self, accesses: Vec<RoundAccess>) {
        self.accesses = Some(accesses);
    }

    /// Long-format CSV `t,agent,<columns...>` with 1-based agent ids. An empty
    /// column list selects every observable.
    pub fn write_csv<W: Write>(&self, out: &mut W, columns: &[&str]) -> io::Result<()> {
        let idx: Vec<usize> = if columns.is_empty() {
            (0..self.observables.len()).collect()
        } else {
            columns
                .iter()
                .map(|c| {
                    self.index_of(c).ok_or_else(|| {
                        io::Error::new(io::ErrorKind::InvalidInput, format!("unknown column {c}"))
                    })
                })
                .collect::<io::Result<_>>()?
        };
        write!(out, "t,agent")?;
        for &k in &idx {
            write!(out, ",{}", self.observables[k])?;
        }
        writeln!(out)?;
        for snap in &self.rounds {
            let agents = snap.values.first().map_or(0, Vec::len);
            for i in 0..agents {
                write!(out, "{},{}", snap.t, i + 1)?;
                for &k in &idx {
                    write!(out, ",{}", format_sig(snap.values[k][i]))?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self, columns: &[&str]) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, columns)
            .expect("writing to a Vec cannot fail for known columns");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

/// Formats with 15 significant digits, trimming trailing zeros.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        trim_fraction(&s).to_string()
    } else {
        let s = format!("{v:.14e}");
        match s.split_once('e') {
            Some((mantissa, e)) => format!("{}e{}", trim_fraction(mantissa), e),
            None => s,
        }
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(2.0), "2");
        assert_eq!(format_sig(0.1), "0.1");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333333");
        assert_eq!(format_sig(-12.5107), "-12.5107");
        assert_eq!(format_sig(123456.789), "123456.789");
        assert_eq!(format_sig(1.5e-9), "1.5e-9");
        assert_eq!(format_sig(0.0), "0");
        let x = 19.364916731037084_f64;
        assert_eq!(format_sig(x), "19.3649167310371");
        assert!((format_sig(x).parse::<f64>().unwrap() - x).abs() < 1e-13);
    }

    #[test]
    fn csv_long_format() {
        let mut tr = RoundTrace::new("estimate", &["c"]);
        tr.record(vec![vec![1.0, 1.0]]);
        tr.record(vec![vec![1.5, 1.5]]);
        assert_eq!(tr.to_csv_string(&[]), "t,agent,c\n0,1,1\n0,2,1\n1,1,1.5\n1,2,1.5\n");
        assert_eq!(tr.series("c", 1), Some(&[1.5, 1.5][..]));
        let mut buf = Vec::new();
        assert!(tr.write_csv(&mut buf, &["x"]).is_err());
    }
}
