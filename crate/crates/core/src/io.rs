//! CSV and JSON exchange formats.
//!
//! Numbers are written with the shortest representation that round-trips,
//! so writing the same object twice yields identical bytes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discrete::{CaseTag, DiscreteSample};
use crate::error::{Error, Result};
use crate::operator::HSOperator;
use crate::semigroup::SemigroupSpec;
use crate::simulate::PathSample;
use crate::space::{GridFunction, SpaceSpec};

fn header_for(space: &SpaceSpec) -> [&'static str; 2] {
    match space {
        SpaceSpec::L2 { .. } => ["x", "value"],
        SpaceSpec::H1 { .. } => ["node", "coeff"],
        SpaceSpec::Spectral { .. } => ["mode", "coeff"],
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Io(format!("invalid number {s:?} in {what}")))
}

/// Writes `x,value` rows at cell midpoints (`L2`), `node,coeff` rows
/// (`H1`, node index from 0) or `mode,coeff` rows (sine modes from 1).
pub fn write_grid_function<W: Write>(w: W, f: &GridFunction) -> Result<()> {
    let space = f.space();
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header_for(&space))?;
    let xs = space.grid_points();
    for (k, c) in f.coeffs().iter().enumerate() {
        let key = match space {
            SpaceSpec::L2 { .. } => xs[k].to_string(),
            SpaceSpec::H1 { .. } => k.to_string(),
            SpaceSpec::Spectral { .. } => (k + 1).to_string(),
        };
        wr.write_record([key, c.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a function written by [`write_grid_function`] on a known space.
pub fn read_grid_function<R: std::io::Read>(r: R, space: SpaceSpec) -> Result<GridFunction> {
    let mut rd = csv::Reader::from_reader(r);
    let want = header_for(&space);
    let got: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if got != want {
        return Err(Error::Io(format!("expected header {}, found {}", want.join(","), got.join(","))));
    }
    let mut coeffs = Vec::with_capacity(space.dim());
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Io("grid function rows need two fields".into()));
        }
        coeffs.push(parse_f64(&rec[1], "grid function")?);
    }
    GridFunction::from_vec(space, coeffs)
}

/// Writes the kernel matrix as a headerless dense CSV.
pub fn write_operator<W: Write>(w: W, a: &HSOperator) -> Result<()> {
    write_matrix(w, a.kernel(), None)
}

pub fn read_operator<R: std::io::Read>(r: R, space: SpaceSpec) -> Result<HSOperator> {
    let m = read_matrix(r, false)?;
    let symmetric = m.nrows() == m.ncols() && m == m.transpose();
    HSOperator::new(space, m, symmetric)
}

fn write_matrix<W: Write>(w: W, m: &DMatrix<f64>, header: Option<Vec<String>>) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    if let Some(h) = header {
        wr.write_record(h)?;
    }
    for row in m.row_iter() {
        wr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

fn read_matrix<R: std::io::Read>(r: R, has_header: bool) -> Result<DMatrix<f64>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(has_header).from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        rows.push(rec.iter().map(|s| parse_f64(s, "matrix")).collect::<Result<_>>()?);
    }
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Io("empty matrix".into()));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Io("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Sidecar metadata of an exported path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub dt: f64,
    pub n: usize,
    pub space: SpaceSpec,
    pub semigroup: SemigroupSpec,
    pub seed: Option<u64>,
}

/// Location of the JSON sidecar of a path CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes the path matrix (rows = time index, columns = grid coefficients)
/// and its JSON sidecar next to it.
pub fn write_path(csv_path: &Path, p: &PathSample) -> Result<()> {
    let header: Vec<String> =
        std::iter::once("i".to_string()).chain((0..p.space().dim()).map(|k| format!("c{k}"))).collect();
    let mut wr = csv::Writer::from_writer(fs::File::create(csv_path)?);
    wr.write_record(&header)?;
    for i in 0..=p.n() {
        wr.write_record(std::iter::once(i.to_string()).chain(p.values().column(i).iter().map(|v| v.to_string())))?;
    }
    wr.flush()?;
    let meta = PathMeta { dt: p.dt(), n: p.n(), space: p.space(), semigroup: p.semigroup(), seed: p.seed() };
    fs::write(sidecar_path(csv_path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn read_path(csv_path: &Path) -> Result<PathSample> {
    let meta: PathMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(csv_path))?)?;
    let m = read_matrix(fs::File::open(csv_path)?, true)?;
    if m.ncols() != meta.space.dim() + 1 || m.nrows() != meta.n + 1 {
        return Err(Error::Io("path matrix does not match its metadata".into()));
    }
    let values = m.columns(1, meta.space.dim()).transpose();
    PathSample::new(meta.space, values, meta.dt, meta.semigroup)
}

/// Writes `# time_step=.. space_step=.. case=..` followed by one row of
/// values per time index.
pub fn write_discrete<W: Write>(mut w: W, d: &DiscreteSample) -> Result<()> {
    writeln!(w, "# time_step={} space_step={} case={}", d.time_step(), d.space_step(), d.case().as_str())?;
    write_matrix(w, d.values(), None)
}

pub fn read_discrete<R: std::io::Read>(r: R) -> Result<DiscreteSample> {
    let mut br = BufReader::new(r);
    let mut first = String::new();
    br.read_line(&mut first)?;
    let body = first
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Io("discrete sample must start with a '#' header line".into()))?;
    let (mut dt, mut dx, mut case) = (None, None, None);
    for kv in body.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Io(format!("malformed header entry {kv:?}")))?;
        match k {
            "time_step" => dt = Some(parse_f64(v, "header")?),
            "space_step" => dx = Some(parse_f64(v, "header")?),
            "case" => case = Some(CaseTag::parse(v).map_err(|e| Error::Io(e.to_string()))?),
            other => return Err(Error::Io(format!("unknown header key {other:?}"))),
        }
    }
    let (Some(dt), Some(dx), Some(case)) = (dt, dx, case) else {
        return Err(Error::Io("header needs time_step, space_step and case".into()));
    };
    DiscreteSample::new(read_matrix(br, false)?, dx, dt, case)
}

/// Writes a vector as a single `index,value` table.
pub fn write_series<W: Write>(w: W, name: &str, xs: &DVector<f64>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["index", name])?;
    for (i, v) in xs.iter().enumerate() {
        wr.write_record([i.to_string(), v.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip_fn(space: SpaceSpec) {
        let f =
            GridFunction::from_vec(space, (0..space.dim()).map(|k| (k as f64 * 0.37).sin() / 3.0).collect()).unwrap();
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &f).unwrap();
        assert_eq!(read_grid_function(buf.as_slice(), space).unwrap(), f);
    }

    #[test]
    fn grid_functions_roundtrip() {
        roundtrip_fn(SpaceSpec::l2(0.0, 2.0, 7).unwrap());
        roundtrip_fn(SpaceSpec::h1(9).unwrap());
        roundtrip_fn(SpaceSpec::spectral(5).unwrap());
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let f = GridFunction::zeros(SpaceSpec::h1(3).unwrap());
        let mut buf = Vec::new();
        write_grid_function(&mut buf, &f).unwrap();
        assert!(read_grid_function(buf.as_slice(), SpaceSpec::spectral(3).unwrap()).is_err());
    }

    #[test]
    fn operators_roundtrip() {
        let s = SpaceSpec::l2(0.0, 1.0, 4).unwrap();
        let a = HSOperator::from_kernel_fn(s, |x, y| (x * y).exp()).unwrap();
        let mut buf = Vec::new();
        write_operator(&mut buf, &a).unwrap();
        assert_eq!(read_operator(buf.as_slice(), s).unwrap(), a);
    }

    #[test]
    fn paths_roundtrip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let s = SpaceSpec::l2(0.0, 1.0, 3).unwrap();
        let v = DMatrix::from_fn(3, 5, |i, j| (i as f64 + 0.1) * j as f64 / 7.0);
        let p = PathSample::new(s, v, 0.25, SemigroupSpec::NilpotentShift).unwrap();
        let file = dir.path().join("path.csv");
        write_path(&file, &p).unwrap();
        assert!(sidecar_path(&file).exists());
        assert_eq!(read_path(&file).unwrap(), p);
    }

    #[test]
    fn discrete_samples_roundtrip() {
        let d = DiscreteSample::new(DMatrix::from_fn(4, 3, |i, j| i as f64 - 0.5 * j as f64), 0.125, 0.25, CaseTag::B)
            .unwrap();
        let mut buf = Vec::new();
        write_discrete(&mut buf, &d).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("# time_step=0.25 space_step=0.125 case=b\n"));
        assert_eq!(read_discrete(buf.as_slice()).unwrap(), d);
    }
}
