use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};

use super::{MarketError, PricePoint, PriceTrace};

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    /// One raw trace per instance type, keyed by name.
    pub traces: BTreeMap<String, PriceTrace>,
    /// Rows dropped in lenient mode.
    pub skipped: Vec<RowError>,
}

/// Parses integer epoch seconds or an ISO-8601 date-time (UTC when no offset
/// is given). Sub-second precision is truncated.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%.f%z"] {
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Some(dt.timestamp());
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    None
}

/// Reads `timestamp,instance_type,price` records (extra columns are ignored,
/// `#` lines are comments). With `skip_bad`, malformed rows are collected in
/// [`Ingested::skipped`] instead of failing the whole read.
pub fn ingest_trace<R: Read>(source: R, skip_bad: bool) -> Result<Ingested, MarketError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);

    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
        Err(_) => return Ok(Ingested::default()),
    };
    if headers.is_empty() {
        return Ok(Ingested::default());
    }
    let col = |name: &str| -> Result<usize, MarketError> {
        headers.iter().position(|h| h == name).ok_or(MarketError::Row {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (ts_col, inst_col, price_col) = (col("timestamp")?, col("instance_type")?, col("price")?);

    let mut raw: BTreeMap<String, Vec<(i64, usize, f64)>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (ordinal, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = (|| {
            let field = |i: usize| rec.get(i).ok_or_else(|| format!("missing field {}", i + 1));
            let ts_s = field(ts_col)?;
            let ts = parse_timestamp(ts_s).ok_or_else(|| format!("bad timestamp `{ts_s}`"))?;
            let inst = field(inst_col)?;
            if inst.is_empty() {
                return Err("empty instance_type".to_string());
            }
            let p_s = field(price_col)?;
            let price: f64 = p_s.parse().map_err(|_| format!("bad price `{p_s}`"))?;
            if !(price > 0.0 && price.is_finite()) {
                return Err(format!("price must be positive, got {price}"));
            }
            Ok((ts, inst.to_string(), price))
        })();
        match parsed {
            Ok((ts, inst, price)) => raw.entry(inst).or_default().push((ts, ordinal, price)),
            Err(message) if skip_bad => skipped.push(RowError { line, message }),
            Err(message) => return Err(MarketError::Row { line, message }),
        }
    }

    let mut traces = BTreeMap::new();
    for (inst, mut rows) in raw {
        // Stable on (timestamp, file order): the last record at a timestamp wins.
        rows.sort_by_key(|&(ts, ord, _)| (ts, ord));
        let mut points: Vec<PricePoint> = Vec::with_capacity(rows.len());
        for (ts, _, price) in rows {
            match points.last_mut() {
                Some(last) if last.timestamp == ts => last.price = price,
                _ => points.push(PricePoint::new(ts, price)),
            }
        }
        traces.insert(inst.clone(), PriceTrace::new(inst, points)?);
    }
    Ok(Ingested { traces, skipped })
}

/// Writes traces in the ingest format with integer epoch timestamps. An
/// optional `comment` is emitted as a leading `#` line.
pub fn write_traces<'a, W: Write>(
    mut out: W,
    traces: impl IntoIterator<Item = &'a PriceTrace>,
    comment: Option<&str>,
) -> Result<(), MarketError> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "timestamp,instance_type,price")?;
    for tr in traces {
        for p in tr.points() {
            writeln!(out, "{},{},{}", p.timestamp, tr.instance(), p.price)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough_and_sorting() {
        let csv = "timestamp,instance_type,price\n120,r4.large,0.12\n0,r4.large,0.10\n60,m4.4xlarge,0.3\n";
        let got = ingest_trace(csv.as_bytes(), false).unwrap();
        let r4 = &got.traces["r4.large"];
        assert_eq!(r4.points(), &[PricePoint::new(0, 0.10), PricePoint::new(120, 0.12)]);
        assert_eq!(got.traces.len(), 2);
    }

    #[test]
    fn duplicate_timestamps_keep_last_record() {
        let csv = "timestamp,instance_type,price\n0,a,0.1\n0,a,0.2\n60,a,0.3\n";
        let got = ingest_trace(csv.as_bytes(), false).unwrap();
        assert_eq!(got.traces["a"].points()[0].price, 0.2);
        assert_eq!(got.traces["a"].len(), 2);
    }

    #[test]
    fn bad_price_names_the_row() {
        let csv = "timestamp,instance_type,price\n0,a,0.1\n60,a,abc\n";
        match ingest_trace(csv.as_bytes(), false) {
            Err(MarketError::Row { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("expected row error, got {other:?}"),
        }
        let lenient = ingest_trace(csv.as_bytes(), true).unwrap();
        assert_eq!(lenient.skipped.len(), 1);
        assert_eq!(lenient.traces["a"].len(), 1);
    }

    #[test]
    fn empty_input_is_empty_set() {
        assert!(ingest_trace("".as_bytes(), false).unwrap().traces.is_empty());
        assert!(ingest_trace("timestamp,instance_type,price\n".as_bytes(), false)
            .unwrap()
            .traces
            .is_empty());
    }

    #[test]
    fn iso_timestamps_and_extra_columns() {
        let csv = "timestamp,region,instance_type,price\n2017-05-08 00:00:00,us-east-1,a,0.1\n2017-05-08T00:01:00Z,us-east-1,a,0.2\n";
        let got = ingest_trace(csv.as_bytes(), false).unwrap();
        let pts = got.traces["a"].points();
        assert_eq!(pts[0].timestamp, 1_494_201_600);
        assert_eq!(pts[1].timestamp - pts[0].timestamp, 60);
        assert_eq!(parse_timestamp("2017-05-08 00:00:00+00:00"), Some(1_494_201_600));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn write_then_read_round_trip() {
        let tr = PriceTrace::from_prices("a", 100, 60, &[0.1, 0.123456789, 0.3]).unwrap();
        let mut buf = Vec::new();
        write_traces(&mut buf, [&tr], Some("seed=1")).unwrap();
        let back = ingest_trace(buf.as_slice(), false).unwrap();
        assert_eq!(back.traces["a"], tr);
    }
}
