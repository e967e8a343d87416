//! File formats: point-cloud CSV, the `FDMD` binary matrix format, spectral
//! CSVs and report tables with a JSON header comment.
//!
//! Floats are written with 17 significant digits so that values round-trip.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde_json::{Map, Value};

use crate::error::{FdmError, Result};
use crate::geodesics::DistanceKind;
use crate::manifolds::{ManifoldTag, PointCloud};
use crate::spectral::SpectralResult;

pub const MAGIC: &[u8; 4] = b"FDMD";

/// Content tag of a binary matrix dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Euclidean = 0,
    Graph = 1,
    AnalyticGeodesic = 2,
    LocalKernel = 16,
    NonlocalKernel = 17,
    Markov = 32,
    SymmetricKernel = 33,
}

impl MatrixKind {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => MatrixKind::Euclidean,
            1 => MatrixKind::Graph,
            2 => MatrixKind::AnalyticGeodesic,
            16 => MatrixKind::LocalKernel,
            17 => MatrixKind::NonlocalKernel,
            32 => MatrixKind::Markov,
            33 => MatrixKind::SymmetricKernel,
            other => return Err(FdmError::Format(format!("unknown matrix kind code {other}"))),
        })
    }
}

impl From<DistanceKind> for MatrixKind {
    fn from(k: DistanceKind) -> Self {
        match k {
            DistanceKind::Euclidean => MatrixKind::Euclidean,
            DistanceKind::Graph => MatrixKind::Graph,
            DistanceKind::AnalyticGeodesic => MatrixKind::AnalyticGeodesic,
        }
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}

/// Magic, `u32` size, `u8` kind, then `N * N` little-endian `f64` row by row.
pub fn write_matrix<W: Write>(mut w: W, values: ArrayView2<'_, f64>, kind: MatrixKind) -> Result<()> {
    let n = values.nrows();
    if values.ncols() != n {
        return Err(FdmError::invalid("only square matrices can be written"));
    }
    let n32 = u32::try_from(n).map_err(|_| FdmError::invalid("matrix too large for the binary format"))?;
    w.write_all(MAGIC)?;
    w.write_all(&n32.to_le_bytes())?;
    w.write_all(&[kind.code()])?;
    let mut buf = Vec::with_capacity(8 * n);
    for row in values.rows() {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<(Array2<f64>, MatrixKind)> {
    let mut head = [0u8; 9];
    r.read_exact(&mut head).map_err(|e| FdmError::Format(format!("truncated header: {e}")))?;
    if &head[..4] != MAGIC {
        return Err(FdmError::Format("missing FDMD magic".into()));
    }
    let n = u32::from_le_bytes([head[4], head[5], head[6], head[7]]) as usize;
    let kind = MatrixKind::from_code(head[8])?;
    let mut bytes = vec![0u8; n * n * 8];
    r.read_exact(&mut bytes).map_err(|e| FdmError::Format(format!("truncated body: {e}")))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(FdmError::Format("trailing bytes after matrix body".into()));
    }
    let data: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((Array2::from_shape_vec((n, n), data).expect("shape"), kind))
}

pub fn save_matrix(path: &Path, values: ArrayView2<'_, f64>, kind: MatrixKind) -> Result<()> {
    write_matrix(BufWriter::new(File::create(path)?), values, kind)
}

pub fn load_matrix(path: &Path) -> Result<(Array2<f64>, MatrixKind)> {
    read_matrix(BufReader::new(File::open(path)?))
}

/// Dense CSV, one row per point, no header.
pub fn write_matrix_csv<W: Write>(w: W, values: ArrayView2<'_, f64>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in values.rows() {
        out.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> FdmError {
    FdmError::Format(e.to_string())
}

/// Header `x1,...,xn[,theta...]`, preceded by a `# manifold=<name>` comment.
pub fn write_cloud<W: Write>(mut w: W, cloud: &PointCloud) -> Result<()> {
    writeln!(w, "# manifold={}", cloud.tag.name())?;
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=cloud.ambient_dim()).map(|i| format!("x{i}")).collect();
    let chart_cols = cloud.intrinsic.as_ref().map_or(0, |c| c.ncols());
    match chart_cols {
        0 => {}
        1 => header.push("theta".into()),
        k => header.extend((1..=k).map(|i| format!("theta{i}"))),
    }
    out.write_record(&header).map_err(csv_err)?;
    for i in 0..cloud.len() {
        let mut rec: Vec<String> = cloud.point(i).iter().map(|v| fmt_f64(*v)).collect();
        if let Some(chart) = &cloud.intrinsic {
            rec.extend(chart.row(i).iter().map(|v| fmt_f64(*v)));
        }
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cloud<R: Read>(r: R) -> Result<PointCloud> {
    let mut text = String::new();
    BufReader::new(r).read_to_string(&mut text)?;
    let mut tag = ManifoldTag::External;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(name) = line.trim_start_matches('#').trim().strip_prefix("manifold=") {
            tag = ManifoldTag::from_name(name.trim())
                .ok_or_else(|| FdmError::Format(format!("unknown manifold '{name}'")))?;
        }
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let ambient_cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with('x')).collect();
    let chart_cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("theta")).collect();
    if ambient_cols.is_empty() || ambient_cols.len() + chart_cols.len() != header.len() {
        return Err(FdmError::Format(format!("unexpected header {header:?}; expected x1,...,xn[,theta...]")));
    }
    let (mut amb, mut chart) = (Vec::new(), Vec::new());
    let mut rows = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(FdmError::Format(format!("row {} has {} fields", line + 1, rec.len())));
        }
        let parse = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| FdmError::Format(format!("row {}: bad number '{}'", line + 1, &rec[i])))
        };
        for &i in &ambient_cols {
            amb.push(parse(i)?);
        }
        for &i in &chart_cols {
            chart.push(parse(i)?);
        }
        rows += 1;
    }
    let ambient = Array2::from_shape_vec((rows, ambient_cols.len()), amb).expect("shape");
    let intrinsic = (!chart_cols.is_empty())
        .then(|| Array2::from_shape_vec((rows, chart_cols.len()), chart).expect("shape"));
    if tag == ManifoldTag::External {
        return Ok(PointCloud { ambient, intrinsic, tag });
    }
    PointCloud::new(ambient, intrinsic, tag)
}

pub fn save_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_cloud(BufWriter::new(File::create(path)?), cloud)
}

pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    read_cloud(File::open(path)?)
}

/// Columns `index,eta,lambda,lambda_hat`.
pub fn write_eigenvalues<W: Write>(w: W, result: &SpectralResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "eta", "lambda", "lambda_hat"]).map_err(csv_err)?;
    for i in 0..result.eta.len() {
        out.write_record([
            i.to_string(),
            fmt_f64(result.eta[i]),
            fmt_f64(result.lambda[i]),
            fmt_f64(result.lambda_hat[i]),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// `N` rows of `l + 1` columns `phi0,...`.
pub fn write_eigenfunctions<W: Write>(w: W, result: &SpectralResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record((0..result.phi.ncols()).map(|j| format!("phi{j}"))).map_err(csv_err)?;
    for row in result.phi.rows() {
        out.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `eigenvalues.csv` and `eigenfunctions.csv` into `dir`.
pub fn save_spectral(dir: &Path, result: &SpectralResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_eigenvalues(BufWriter::new(File::create(dir.join("eigenvalues.csv"))?), result)?;
    write_eigenfunctions(BufWriter::new(File::create(dir.join("eigenfunctions.csv"))?), result)
}

/// Reads `eigenvalues.csv` back as `(eta, lambda, lambda_hat)`. Lines
/// starting with `#` are skipped.
pub fn read_eigenvalues<R: Read>(r: R) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let (mut eta, mut lambda, mut hat) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let p = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| FdmError::Format("bad eigenvalue row".into()));
        eta.push(p(1)?);
        lambda.push(p(2)?);
        hat.push(p(3)?);
    }
    Ok((eta, lambda, hat))
}

/// A table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

/// CSV table whose first line is `# {json}` with the generating configuration.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub meta: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Report { meta: Map::new(), columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(FdmError::invalid(format!("row has {} cells, table has {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", Value::Object(self.meta.clone()))?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }
}

/// Parses the JSON header comment of a report: the first leading `# {...}`
/// line (other leading comment lines, such as a timestamp, are skipped).
pub fn read_report_meta(text: &str) -> Result<Map<String, Value>> {
    let json = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# ").filter(|j| j.starts_with('{')))
        .ok_or_else(|| FdmError::Format("missing header comment".into()))?;
    match serde_json::from_str(json) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(FdmError::Format("header comment is not a JSON object".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{circle_random, sphere_icosphere_grid};
    use ndarray::array;

    #[test]
    fn binary_round_trip() {
        let m = array![[0.0, 1.5, -2.0], [1.5, 0.0, 1e-300], [-2.0, 1e-300, 0.0]];
        let mut buf = Vec::new();
        write_matrix(&mut buf, m.view(), MatrixKind::Graph).unwrap();
        assert_eq!(&buf[..4], b"FDMD");
        assert_eq!(&buf[4..8], &3u32.to_le_bytes());
        assert_eq!(buf[8], 1);
        assert_eq!(buf.len(), 9 + 72);
        assert_eq!(&buf[9 + 8..9 + 16], &1.5f64.to_le_bytes());
        let (back, kind) = read_matrix(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(kind, MatrixKind::Graph);
        assert!(read_matrix(&buf[..20]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_matrix(bad.as_slice()).is_err());
        bad = buf.clone();
        bad[8] = 99;
        assert!(read_matrix(bad.as_slice()).is_err());
    }

    #[test]
    fn cloud_round_trip_is_exact() {
        for cloud in [circle_random(37, 5).unwrap(), sphere_icosphere_grid(1).unwrap()] {
            let mut buf = Vec::new();
            write_cloud(&mut buf, &cloud).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            let header = text.lines().nth(1).unwrap();
            assert!(header.starts_with("x1,x2"));
            assert!(header.contains("theta"));
            let back = read_cloud(buf.as_slice()).unwrap();
            assert_eq!(back.ambient, cloud.ambient);
            assert_eq!(back.intrinsic, cloud.intrinsic);
            assert_eq!(back.tag, cloud.tag);
        }
    }

    #[test]
    fn cloud_without_comment_is_external() {
        let text = "x1,x2\n0,1\n1,0\n0.5,0.5\n";
        let c = read_cloud(text.as_bytes()).unwrap();
        assert_eq!(c.tag, ManifoldTag::External);
        assert_eq!(c.len(), 3);
        assert!(read_cloud("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_cloud("x1,x2\n1,zz\n".as_bytes()).is_err());
    }

    #[test]
    fn seventeen_digits() {
        let s = fmt_f64(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn report_header() {
        let mut r = Report::new(&["epsilon", "mean_rmse", "count"]).meta("beta", 2.0).meta("manifold", "circle");
        r.push(vec![0.5.into(), Cell::Missing, 3usize.into()]).unwrap();
        assert!(r.push(vec![Cell::Missing]).is_err());
        let mut buf = Vec::new();
        r.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let meta = read_report_meta(&text).unwrap();
        assert_eq!(meta["beta"], 2.0);
        assert_eq!(text.lines().nth(1).unwrap(), "epsilon,mean_rmse,count");
        assert_eq!(text.lines().nth(2).unwrap(), "5.0000000000000000e-1,,3");

        let stamped = format!("# generated_unix=1\n{text}");
        assert_eq!(read_report_meta(&stamped).unwrap()["manifold"], "circle");
        assert!(read_report_meta("x,y\n1,2\n").is_err());
    }
}
