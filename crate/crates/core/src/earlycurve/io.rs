use std::io::{Read, Write};

use super::{CurveError, CurvePoint, MetricTrace};

/// Reads a two-column `step,metric` file. A header row and `#` comments are
/// allowed.
pub fn read_metric_trace<R: Read>(source: R) -> Result<MetricTrace, CurveError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut trace = MetricTrace::new(Vec::new())?;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() < 2 {
            return Err(CurveError::Row {
                line,
                message: "expected step and metric columns".into(),
            });
        }
        let step = rec[0].parse::<u64>();
        let metric = rec[1].parse::<f64>();
        let (step, metric) = match (step, metric) {
            (Ok(s), Ok(m)) => (s, m),
            _ if i == 0 => continue,
            _ => {
                return Err(CurveError::Row {
                    line,
                    message: format!("cannot parse {:?}", rec.iter().collect::<Vec<_>>()),
                })
            }
        };
        trace
            .push(CurvePoint { step, metric })
            .map_err(|e| CurveError::Row { line, message: e.to_string() })?;
    }
    if trace.is_empty() {
        return Err(CurveError::Empty);
    }
    Ok(trace)
}

pub fn write_metric_trace<W: Write>(out: W, trace: &MetricTrace) -> Result<(), CurveError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "metric"])?;
    for p in trace.points() {
        w.write_record([p.step.to_string(), p.metric.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = MetricTrace::from_metrics(&[1.0, 0.5, 0.3333333333333333]).unwrap();
        let mut buf = Vec::new();
        write_metric_trace(&mut buf, &t).unwrap();
        assert_eq!(read_metric_trace(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn row_errors() {
        assert!(matches!(
            read_metric_trace("step,metric\n0,1\n1,0.5\n1,0.4\n".as_bytes()),
            Err(CurveError::Row { line: 4, .. })
        ));
        assert!(matches!(
            read_metric_trace("0,1\n1,-0.5\n".as_bytes()),
            Err(CurveError::Row { line: 2, .. })
        ));
        assert!(matches!(read_metric_trace("# nothing\n".as_bytes()), Err(CurveError::Empty)));
        let t = read_metric_trace("# epoch log\n0, 2.0\n5, 1.0\n".as_bytes()).unwrap();
        assert_eq!(t.points()[1], CurvePoint { step: 5, metric: 1.0 });
    }
}
