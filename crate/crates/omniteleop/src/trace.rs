//! Operator wrench traces: CSV with the header `t,fa_x,fa_y,fa_z,tau_x,tau_y,tau_z`,
//! time in seconds, wrench in the handle frame.

use std::io::{Read, Write};
use std::path::Path;

use omniteleop_core::operator::WrenchTrace;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const TRACE_HEADER: [&str; 7] = ["t", "fa_x", "fa_y", "fa_z", "tau_x", "tau_y", "tau_z"];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    t: f64,
    fa_x: f64,
    fa_y: f64,
    fa_z: f64,
    tau_x: f64,
    tau_y: f64,
    tau_z: f64,
}

pub fn read_trace(path: &Path) -> AppResult<WrenchTrace> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    parse_trace(file, path)
}

pub fn parse_trace(reader: impl Read, path: &Path) -> AppResult<WrenchTrace> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| AppError::format(path, e))?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(AppError::format(
            path,
            format!("expected header `{}`", TRACE_HEADER.join(",")),
        ));
    }
    let mut samples = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let r = row.map_err(|e| AppError::format(path, e))?;
        samples.push((r.t, [r.fa_x, r.fa_y, r.fa_z, r.tau_x, r.tau_y, r.tau_z]));
    }
    WrenchTrace::new(samples).map_err(|e| AppError::format(path, e))
}

pub fn write_trace(out: impl Write, samples: &[(f64, [f64; 6])]) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for (t, f) in samples {
        w.serialize(Row {
            t: *t,
            fa_x: f[0],
            fa_y: f[1],
            fa_z: f[2],
            tau_x: f[3],
            tau_y: f[4],
            tau_z: f[5],
        })
        .map_err(|e| AppError::format(Path::new("<trace>"), e))?;
    }
    w.flush().map_err(|e| AppError::io(Path::new("<trace>"), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let samples = vec![
            (0.0, [1.0, 0.0, -2.5, 0.0, 0.125, 0.0]),
            (0.5, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,fa_x,fa_y,fa_z,tau_x,tau_y,tau_z\n"));
        let trace = parse_trace(&buf[..], Path::new("x")).unwrap();
        assert_eq!(trace.samples(), &samples[..]);
    }

    #[test]
    fn bad_header_and_rows_are_rejected() {
        let p = Path::new("x");
        assert!(parse_trace("t,fx\n0,1\n".as_bytes(), p).is_err());
        assert!(parse_trace("t,fa_x,fa_y,fa_z,tau_x,tau_y,tau_z\n0,1,2\n".as_bytes(), p).is_err());
        assert!(parse_trace(
            "t,fa_x,fa_y,fa_z,tau_x,tau_y,tau_z\n1,0,0,0,0,0,0\n0,0,0,0,0,0,0\n".as_bytes(),
            p
        )
        .is_err());
    }
}
