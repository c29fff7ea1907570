//! CSV and JSON encodings of paths and estimate curves.
//!
//! Every number is written with 17 significant digits, so identical inputs
//! give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimateCurve;
use crate::fbm::{FbmPath, HurstIndex};
use crate::rng::SeedStream;
use crate::scalar::{lit, to_f64, Real};
use crate::sde::SamplePath;

/// `x` with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// JSON has no NaN; `serde_json` writes it as `null`, read back here.
pub fn f64_or_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for row in rows {
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `t,value` rows.
pub fn write_fbm_csv<T: Real, W: Write>(path: &FbmPath<T>, w: W) -> Result<()> {
    write_rows(
        w,
        &["t", "value"],
        path.times
            .iter()
            .zip(&path.values)
            .map(|(&t, &v)| vec![fmt17(to_f64(t)), fmt17(to_f64(v))]),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbmJson {
    pub hurst: f64,
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    pub values: Vec<f64>,
}

pub fn fbm_to_json<T: Real>(path: &FbmPath<T>) -> FbmJson {
    FbmJson {
        hurst: to_f64(path.hurst.value()),
        dt: to_f64(path.dt()),
        seed: path.seed.seed,
        stream: path.seed.stream,
        values: path.values.iter().map(|&v| to_f64(v)).collect(),
    }
}

pub fn fbm_from_json<T: Real>(json: &FbmJson) -> Result<FbmPath<T>> {
    let values = json.values.iter().map(|&v| lit(v)).collect();
    FbmPath::from_values(
        values,
        lit(json.dt),
        HurstIndex::new(lit(json.hurst))?,
        SeedStream::new(json.seed, json.stream),
    )
}

/// Coarse observations as `t,X`.
pub fn write_path_csv<T: Real, W: Write>(path: &SamplePath<T>, w: W) -> Result<()> {
    write_rows(
        w,
        &["t", "X"],
        path.obs
            .iter()
            .enumerate()
            .map(|(k, &x)| vec![fmt17(to_f64(path.grid.time(k))), fmt17(to_f64(x))]),
    )
}

/// Fine grid as `t,X,B` (burn-in included, at negative times).
pub fn write_fine_csv<T: Real, W: Write>(path: &SamplePath<T>, w: W) -> Result<()> {
    let fine = path.fine()?;
    write_rows(
        w,
        &["t", "X", "B"],
        fine.values.iter().zip(&fine.fbm.values).enumerate().map(|(j, (&x, &b))| {
            vec![fmt17(to_f64(fine.time(j))), fmt17(to_f64(x)), fmt17(to_f64(b))]
        }),
    )
}

/// Parse `t,X` observations (header required, uniform spacing).
pub fn read_path_csv<T: Real, R: Read>(r: R, hurst: HurstIndex<T>) -> Result<SamplePath<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut times = Vec::new();
    let mut obs = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Parse(format!("row {}: expected 2 columns", line + 2)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))
        };
        times.push(field(0)?);
        obs.push(lit::<T>(field(1)?));
    }
    if times.len() < 2 {
        return Err(Error::Parse("need at least two observations".into()));
    }
    let spacing = times[1] - times[0];
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing.abs().max(1.0) {
            return Err(Error::Parse(format!("non-uniform spacing at row {}", k + 3)));
        }
    }
    SamplePath::from_observations(obs, lit(spacing), hurst)
}

/// `x,b_hat,mass,defined[,I,II,III,S]`; undefined estimates are written as `NaN`.
pub fn write_curve_csv<T: Real, W: Write>(curve: &EstimateCurve<T>, w: W) -> Result<()> {
    let mut header = vec!["x", "b_hat", "mass", "defined"];
    if curve.terms.is_some() {
        header.extend(["I", "II", "III", "S"]);
    }
    let rows = (0..curve.len()).map(|i| {
        let b = curve.b_hat[i];
        let mut row = vec![
            fmt17(to_f64(curve.x[i])),
            fmt17(b.map(to_f64).unwrap_or(f64::NAN)),
            fmt17(to_f64(curve.mass[i])),
            u8::from(b.is_some()).to_string(),
        ];
        if let Some(terms) = &curve.terms {
            let t = terms[i];
            row.extend([t.i, t.ii, t.iii, t.s].map(|v| fmt17(to_f64(v))));
        }
        row
    });
    write_rows(w, &header, rows)
}

pub fn write_json<S: Serialize + ?Sized, W: Write>(value: &S, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Terms;
    use crate::fbm::{sample_fbm, SamplingMethod};

    #[test]
    fn fmt17_has_seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt17(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt17(f64::NAN), "NaN");
    }

    #[test]
    fn fbm_csv_and_json() {
        let h = HurstIndex::new(0.7).unwrap();
        let p = sample_fbm(4, 0.25, h, 3, SamplingMethod::Circulant).unwrap();
        let mut buf = Vec::new();
        write_fbm_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,value");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "0.0000000000000000e0,0.0000000000000000e0");

        let json = serde_json::to_value(fbm_to_json(&p)).unwrap();
        for key in ["hurst", "dt", "seed", "values"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let back: FbmPath<f64> = fbm_from_json(&serde_json::from_value(json).unwrap()).unwrap();
        assert_eq!(back.values, p.values);
    }

    #[test]
    fn path_csv_reads_back() {
        let h = HurstIndex::new(0.7).unwrap();
        let p = SamplePath::from_observations(vec![0.5, 0.25, -1.0, 3.0], 0.1, h).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,X\n"));
        let q: SamplePath<f64> = read_path_csv(buf.as_slice(), h).unwrap();
        assert_eq!(q.obs, p.obs);
        assert!((q.grid.spacing - 0.1).abs() < 1e-15);

        let bad = "t,X\n0,1\n0.1,2\n0.3,3\n";
        assert!(matches!(read_path_csv(bad.as_bytes(), h), Err(Error::Parse(_))));
        assert!(matches!(read_path_csv("t,X\n0,abc\n1,2\n".as_bytes(), h), Err(Error::Parse(_))));
    }

    #[test]
    fn curve_csv_layout() {
        let c = EstimateCurve {
            x: vec![0.0, 1.0],
            b_hat: vec![Some(0.5), None],
            mass: vec![0.3, 0.0],
            terms: Some(vec![Terms { i: 0.0, ii: 0.1, iii: 0.05, s: 0.3 }; 2]),
        };
        let mut buf = Vec::new();
        write_curve_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,b_hat,mass,defined,I,II,III,S");
        assert!(lines[2].contains(",NaN,") && lines[2].contains(",0,"));
        assert_eq!(lines.len(), 3);
    }
}
