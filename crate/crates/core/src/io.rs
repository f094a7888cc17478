//! CSV import and export. Every number is written with 17 significant
//! digits so files round-trip bit-exactly.

use std::io::{Read, Write};

use crate::dynamics::{ControlField, TimeGrid};
use crate::error::{Error, Result};
use crate::geometric::DotReport;
use crate::optimizer::ConvergenceLog;
use crate::pulses::Spectrum;
use crate::scalar::Real;

/// Relative tolerance on grid spacing when reading a field file.
pub const GRID_SPACING_TOL: f64 = 1e-9;

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes `header` and one row per index of the equally long `columns`.
pub fn write_columns<W: Write>(w: W, header: &[String], columns: &[Vec<f64>]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::Shape(format!("{} headers for {} columns", header.len(), columns.len())));
    }
    let rows = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::Shape("columns differ in length".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for i in 0..rows {
        out.write_record(columns.iter().map(|c| fmt17(c[i]))).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `t,f1,...,fM` with one row per left endpoint.
pub fn write_field_csv<T: Real, W: Write>(w: W, field: &ControlField<T>) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=field.channels()).map(|m| format!("f{m}")));
    let mut cols = vec![field.grid().sample_times().iter().map(|t| t.as_f64()).collect::<Vec<_>>()];
    cols.extend(field.samples().iter().map(|c| c.iter().map(|x| x.as_f64()).collect()));
    write_columns(w, &header, &cols)
}

/// Reads a field file and rebuilds its grid from the time column.
pub fn read_field_csv<T: Real, R: Read>(r: R) -> Result<ControlField<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.get(0).map(str::trim) != Some("t") || header.len() < 2 {
        return Err(Error::Parse("field file header must be t,f1,...,fM".into()));
    }
    for (m, h) in header.iter().skip(1).enumerate() {
        if h.trim() != format!("f{}", m + 1) {
            return Err(Error::Parse(format!("unexpected column '{h}'")));
        }
    }
    let channels = header.len() - 1;
    let mut times = Vec::new();
    let mut samples = vec![Vec::new(); channels];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: '{s}': {e}", line + 2)))
        };
        times.push(parse(&rec[0])?);
        for m in 0..channels {
            samples[m].push(T::lit(parse(&rec[m + 1])?));
        }
    }
    if times.len() < 2 {
        return Err(Error::Parse("field file needs at least two rows".into()));
    }
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    for (k, t) in times.iter().enumerate() {
        let expect = times[0] + k as f64 * dt;
        if (t - expect).abs() > GRID_SPACING_TOL * dt.abs().max(1.0) * (k as f64 + 1.0) {
            return Err(Error::Parse(format!("non-uniform time column at row {}", k + 2)));
        }
    }
    let grid = TimeGrid::new(T::lit(times[0]), T::lit(times[0] + n as f64 * dt), n)?;
    ControlField::new(grid, samples)
}

/// `iter,J,figure_of_merit,fluence`.
pub fn write_convergence_csv<W: Write>(w: W, log: &ConvergenceLog) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iter", "J", "figure_of_merit", "fluence"]).map_err(csv_err)?;
    for r in &log.records {
        out.write_record([r.iter.to_string(), fmt17(r.j), fmt17(r.figure_of_merit), fmt17(r.fluence)]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `t,V`.
pub fn write_v_series_csv<W: Write>(w: W, t: &[f64], v: &[f64]) -> Result<()> {
    write_columns(w, &["t", "V"].map(String::from), &[t.to_vec(), v.to_vec()])
}

/// `omega,channel,magnitude` with one-based channels.
pub fn write_spectrum_csv<W: Write>(w: W, spec: &Spectrum) -> Result<()> {
    let (mut om, mut ch, mut mag) = (Vec::new(), Vec::new(), Vec::new());
    for (m, c) in spec.channels.iter().enumerate() {
        om.extend_from_slice(&c.omega);
        mag.extend_from_slice(&c.magnitude);
        ch.extend(std::iter::repeat((m + 1) as f64).take(c.omega.len()));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["omega", "channel", "magnitude"]).map_err(csv_err)?;
    for i in 0..om.len() {
        out.write_record([fmt17(om[i]), format!("{}", ch[i] as usize), fmt17(mag[i])]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `dot,excitation,infidelity`.
pub fn write_report_csv<W: Write>(w: W, rows: &[DotReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dot", "excitation", "infidelity"]).map_err(csv_err)?;
    for r in rows {
        out.write_record([r.dot.to_string(), fmt17(r.excitation), fmt17(r.infidelity)]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a numeric CSV into its header and columns.
pub fn read_columns<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(|s| s.trim().to_string()).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        for (c, s) in cols.iter_mut().zip(rec.iter()) {
            c.push(s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")))?);
        }
    }
    Ok((header, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::IterationRecord;
    use crate::pulses::spectrum;

    fn field() -> ControlField<f64> {
        let g = TimeGrid::new(0.0, 3.0, 7).unwrap();
        ControlField::from_fn(g, 2, |m, t: f64| if m == 0 { (1.3 * t).sin() / 3.0 } else { 1e-300 * t - 0.1 }).unwrap()
    }

    #[test]
    fn field_round_trip_is_bit_exact() {
        let f = field();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,f1,f2\n"));
        assert_eq!(text.lines().count(), 8);
        let back: ControlField<f64> = read_field_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples(), f.samples());
        assert_eq!(back.grid().steps(), 7);
        assert!((back.grid().tf() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_field_files_are_rejected() {
        assert!(read_field_csv::<f64, _>("x,f1\n0,1\n1,2\n".as_bytes()).is_err());
        assert!(read_field_csv::<f64, _>("t,f1\n0,1\n".as_bytes()).is_err());
        assert!(read_field_csv::<f64, _>("t,f1\n0,1\n1,2\n5,3\n".as_bytes()).is_err());
        assert!(read_field_csv::<f64, _>("t,f1\n0,1\n1,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn other_tables_have_fixed_headers() {
        let log = ConvergenceLog { records: vec![IterationRecord { iter: 0, j: 0.5, figure_of_merit: 0.6, fluence: 0.1 }] };
        let mut buf = Vec::new();
        write_convergence_csv(&mut buf, &log).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("iter,J,figure_of_merit,fluence\n"));
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &spectrum(&field()).unwrap()).unwrap();
        let (h, cols) = read_columns(buf.as_slice()).unwrap();
        assert_eq!(h, ["omega", "channel", "magnitude"]);
        assert_eq!(cols[1].iter().filter(|c| **c == 2.0).count(), 4);
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[DotReport { dot: 1, excitation: 0.25, infidelity: 0.75 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().next(), Some("dot,excitation,infidelity"));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }
}
