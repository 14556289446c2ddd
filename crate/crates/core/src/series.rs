//! Sampled signals and grid spectra, with their CSV encodings.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so files
//! are locale independent and re-reading them is lossless.

use std::io::{Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::matrix::{c, CMat, Hermitian};

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, SeriesError>;

/// `y_1, ..., y_N` with `y_t ∈ ℂ^m`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    dim: usize,
    data: Vec<Complex64>,
}

impl TimeSeries {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(SeriesError::Invalid(format!(
                "{} values do not form samples of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SeriesError::Invalid("non-finite sample".into()));
        }
        Ok(TimeSeries { dim, data })
    }

    pub fn from_real(dim: usize, values: &[f64]) -> Result<Self> {
        TimeSeries::new(dim, values.iter().map(|&v| c(v, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.dim)
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// Columns `t,y1,...` for real data; complex data adds `y1_im,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let real = self.is_real();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("y{k}")));
        if !real {
            header.extend((1..=self.dim).map(|k| format!("y{k}_im")));
        }
        w.write_record(&header)?;
        for (t, s) in self.samples().enumerate() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(s.iter().map(|z| z.re.to_string()));
            if !real {
                row.extend(s.iter().map(|z| z.im.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let names: Vec<&str> = header.iter().collect();
        if names.first() != Some(&"t") || names.len() < 2 {
            return Err(SeriesError::Parse { line: 1, msg: "expected header t,y1,...".into() });
        }
        let cols = names.len() - 1;
        let complex = names.iter().any(|n| n.ends_with("_im"));
        let dim = if complex { cols / 2 } else { cols };
        if dim == 0 || (complex && !cols.is_multiple_of(2)) {
            return Err(SeriesError::Parse { line: 1, msg: "unbalanced complex columns".into() });
        }
        let mut data = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            if rec.len() != names.len() {
                return Err(SeriesError::Parse { line, msg: "wrong number of fields".into() });
            }
            let vals: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| SeriesError::Parse { line, msg: e.to_string() })?;
            for j in 0..dim {
                data.push(c(vals[j], if complex { vals[dim + j] } else { 0.0 }));
            }
        }
        if data.is_empty() {
            return Err(SeriesError::Invalid("no samples".into()));
        }
        TimeSeries::new(dim, data)
    }
}

/// Column names `theta,re_11,im_11,re_12,...` for `m × m` spectra.
pub fn spectrum_header(m: usize) -> Vec<String> {
    let mut h = vec!["theta".to_string()];
    for i in 1..=m {
        for j in 1..=m {
            h.push(format!("re_{i}{j}"));
            h.push(format!("im_{i}{j}"));
        }
    }
    h
}

/// Spectrum samples with entries row-major, one grid node per line.
pub fn write_spectrum_csv<W: Write>(out: W, thetas: &[f64], values: &[Hermitian]) -> Result<()> {
    if thetas.len() != values.len() || values.is_empty() {
        return Err(SeriesError::Invalid("grid and values differ in length".into()));
    }
    let m = values[0].dim();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(spectrum_header(m))?;
    for (t, v) in thetas.iter().zip(values) {
        if v.dim() != m {
            return Err(SeriesError::Invalid("spectra of different sizes".into()));
        }
        let mut fields = vec![t.to_string()];
        for i in 0..m {
            for j in 0..m {
                let z = v.matrix()[(i, j)];
                fields.push(z.re.to_string());
                fields.push(z.im.to_string());
            }
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_spectrum_csv`].
pub fn read_spectrum_csv<R: Read>(input: R) -> Result<(Vec<f64>, Vec<Hermitian>)> {
    let mut r = csv::Reader::from_reader(input);
    let cols = r.headers()?.len();
    let m = (((cols.saturating_sub(1)) / 2) as f64).sqrt().round() as usize;
    if m == 0 || 2 * m * m + 1 != cols {
        return Err(SeriesError::Parse { line: 1, msg: format!("{cols} columns is not a spectrum") });
    }
    let mut thetas = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| SeriesError::Parse { line, msg: e.to_string() })?;
        if v.len() != cols {
            return Err(SeriesError::Parse { line, msg: "wrong number of fields".into() });
        }
        let mat = CMat::from_fn(m, m, |i, j| {
            let p = 1 + 2 * (i * m + j);
            c(v[p], v[p + 1])
        });
        thetas.push(v[0]);
        values.push(Hermitian::new(mat).map_err(|e| SeriesError::Parse { line, msg: e.to_string() })?);
    }
    if thetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SeriesError::Invalid("grid is not strictly increasing".into()));
    }
    Ok((thetas, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_series_round_trip() {
        let y = TimeSeries::from_real(2, &[1.0, -0.5, 0.1, 3.25e-7]).unwrap();
        let mut buf = Vec::new();
        y.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,y1,y2\n1,1,-0.5\n"));
        assert_eq!(TimeSeries::read_csv(&buf[..]).unwrap(), y);
    }

    #[test]
    fn complex_series_round_trip() {
        let y = TimeSeries::new(1, vec![c(0.1, 0.2), c(-1.0, 1e-300)]).unwrap();
        let mut buf = Vec::new();
        y.write_csv(&mut buf).unwrap();
        assert_eq!(TimeSeries::read_csv(&buf[..]).unwrap(), y);
    }

    #[test]
    fn rejects_bad_series() {
        assert!(TimeSeries::new(2, vec![c(1.0, 0.0)]).is_err());
        assert!(TimeSeries::from_real(1, &[f64::NAN]).is_err());
        assert!(TimeSeries::read_csv("t,y1\n1,abc\n".as_bytes()).is_err());
        assert!(TimeSeries::read_csv("t,y1\n".as_bytes()).is_err());
    }

    #[test]
    fn spectrum_round_trip() {
        let h = Hermitian::new(CMat::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.1, -0.3), c(0.1, 0.3), c(1.0, 0.0)],
        ))
        .unwrap();
        let thetas = [-1.0, 0.5];
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &thetas, &[h.clone(), h.scale(2.0)]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta,re_11,im_11,re_12,im_12,re_21,im_21,re_22,im_22\n"));
        let (t, v) = read_spectrum_csv(&buf[..]).unwrap();
        assert_eq!(t, thetas);
        assert_eq!(v[1], h.scale(2.0));
    }
}
