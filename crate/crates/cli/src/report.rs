//! CSV and JSON report writers.

use crate::config::Format;
use crate::run::Report;
use std::io::Write;

/// 17 significant digits.
pub fn number(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(number).unwrap_or_default()
}

fn header(r: &Report) -> Vec<String> {
    let d = r.dimension;
    let mut h: Vec<String> = ["scenario", "seed", "index", "t"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..d).map(|i| format!("x{i}")));
    h.extend((1..=d).map(|i| format!("tau{i}")));
    h.extend((1..=d).map(|i| format!("stereo{i}")));
    h.push("anchor".into());
    if d == 4 {
        h.extend((1..=4).map(|i| format!("residual{i}")));
    }
    h.push("oracle_delta".into());
    h.push("flags".into());
    h
}

fn padded(v: Option<&Vec<f64>>, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| opt(v.and_then(|v| v.get(i).copied())))
        .collect()
}

pub fn write_csv<W: Write>(r: &Report, out: W) -> csv::Result<()> {
    let d = r.dimension;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(r))?;
    for row in &r.rows {
        let mut rec = vec![
            row.scenario.clone(),
            row.seed.to_string(),
            row.index.to_string(),
        ];
        rec.extend(row.event.iter().map(|v| number(*v)));
        rec.extend(padded(row.emission.as_ref(), d));
        rec.extend(padded(row.stereo.as_ref(), d));
        rec.push(opt(row.anchor));
        if d == 4 {
            rec.extend(padded(Some(&row.residuals), 4));
        }
        rec.push(opt(row.oracle_delta));
        rec.push(row.flags.join(";"));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(r: &Report, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, r)?;
    writeln!(out)
}

pub fn write_report<W: Write>(r: &Report, format: Format, out: W) -> std::io::Result<()> {
    match format {
        Format::Csv => write_csv(r, out).map_err(std::io::Error::other),
        Format::Json => write_json(r, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::{Mode, ReportRow};

    fn report() -> Report {
        Report {
            scenario: "h".into(),
            seed: 3,
            dimension: 2,
            mode: Mode::Localize,
            rows: vec![ReportRow {
                scenario: "h".into(),
                seed: 3,
                index: 0,
                event: vec![0.1, 2.0],
                emission: Some(vec![1.0, 2.0]),
                stereo: None,
                anchor: None,
                residuals: vec![],
                oracle_delta: Some(0.0),
                flags: vec!["error: a, b".into()],
                records: None,
            }],
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(number(0.1), "1.0000000000000001e-1");
        assert_eq!(number(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&report(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "scenario,seed,index,t,x1,tau1,tau2,stereo1,stereo2,anchor,oracle_delta,flags"
        );
        assert!(lines[1].starts_with("h,3,0,1.0000000000000001e-1,"));
        assert!(lines[1].ends_with(",,,,0.0000000000000000e0,\"error: a, b\""));
    }
}
