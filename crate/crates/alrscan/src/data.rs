//! Case-control point data and aggregated case-population data.
//!
//! A [`PointDataset`] holds one row per subject: a d-dimensional location, a
//! binary case label, and optionally a covariate row (intercept column
//! prepended automatically). An [`AggregatedDataset`] holds one row per
//! location with a case count and a population size, and can be expanded to
//! an equivalent `PointDataset` of co-located subjects.
//!
//! CSV formats (UTF-8, comma separated, `.` decimal point, `#` comments):
//!
//! ```text
//! point:      id,x,y,case[,cov1,cov2,...]       (or x1,..,xd for d != 2)
//! aggregated: id,x,y,cases,population
//! ```

use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: file has no data rows")]
    Empty { path: String },
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Row { line: u64, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// Merged case-control subjects: locations, binary labels, optional covariates.
#[derive(Debug, Clone)]
pub struct PointDataset {
    dim: usize,
    coords: Vec<f64>,
    cases: Vec<bool>,
    covariates: Option<Covariates>,
}

/// Per-subject covariate matrix, row-major, first column identically 1.
#[derive(Debug, Clone)]
pub struct Covariates {
    cols: usize,
    data: Vec<f64>,
}

impl Covariates {
    /// Builds a covariate matrix from user columns, prepending the intercept.
    pub fn with_intercept(rows: usize, user_cols: usize, user_data: &[f64]) -> Self {
        assert_eq!(user_data.len(), rows * user_cols);
        let cols = user_cols + 1;
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.push(1.0);
            data.extend_from_slice(&user_data[r * user_cols..(r + 1) * user_cols]);
        }
        Covariates { cols, data }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    fn rows(&self) -> usize {
        self.data.len() / self.cols
    }
}

impl PointDataset {
    /// Builds a dataset from flat row-major coordinates and labels.
    ///
    /// `user_covariates`, when given, holds the non-intercept columns; the
    /// intercept is prepended here.
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        cases: Vec<bool>,
        user_covariates: Option<(usize, Vec<f64>)>,
    ) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::Invalid("dimension must be >= 1".into()));
        }
        if coords.len() != cases.len() * dim {
            return Err(DataError::Invalid(format!(
                "coordinate count {} does not match {} subjects of dimension {}",
                coords.len(),
                cases.len(),
                dim
            )));
        }
        if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
            return Err(DataError::Invalid(format!(
                "non-finite coordinate for subject {}",
                bad / dim
            )));
        }
        let covariates = match user_covariates {
            None => None,
            Some((user_cols, data)) => {
                if data.len() != cases.len() * user_cols {
                    return Err(DataError::Invalid("covariate matrix shape mismatch".into()));
                }
                if data.iter().any(|v| !v.is_finite()) {
                    return Err(DataError::Invalid("non-finite covariate value".into()));
                }
                Some(Covariates::with_intercept(cases.len(), user_cols, &data))
            }
        };
        Ok(PointDataset {
            dim,
            coords,
            cases,
            covariates,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of subjects J.
    pub fn num_subjects(&self) -> usize {
        self.cases.len()
    }

    /// Number of cases I.
    pub fn num_cases(&self) -> usize {
        self.cases.iter().filter(|&&c| c).count()
    }

    /// Null MLE of the common case probability, I/J.
    pub fn p0_hat(&self) -> f64 {
        self.num_cases() as f64 / self.num_subjects() as f64
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn cases(&self) -> &[bool] {
        &self.cases
    }

    pub fn covariates(&self) -> Option<&Covariates> {
        self.covariates.as_ref()
    }

    /// The same subjects with replacement labels (covariates and locations
    /// stay attached); used when permuting the response side.
    pub fn with_cases(&self, cases: Vec<bool>) -> Result<Self, DataError> {
        if cases.len() != self.cases.len() {
            return Err(DataError::Invalid(format!(
                "label vector has length {}, expected {}",
                cases.len(),
                self.cases.len()
            )));
        }
        Ok(PointDataset {
            dim: self.dim,
            coords: self.coords.clone(),
            cases,
            covariates: self.covariates.clone(),
        })
    }

    /// Rescales each non-intercept covariate column to mean 0, variance 1.
    ///
    /// Never done implicitly: the logistic iterate path (and therefore a
    /// report produced from it) depends on the covariate scale.
    pub fn standardize_covariates(&mut self) {
        let Some(cov) = self.covariates.as_mut() else {
            return;
        };
        let (rows, cols) = (cov.rows(), cov.cols);
        for k in 1..cols {
            let mean = (0..rows).map(|i| cov.data[i * cols + k]).sum::<f64>() / rows as f64;
            let var = (0..rows)
                .map(|i| (cov.data[i * cols + k] - mean).powi(2))
                .sum::<f64>()
                / rows as f64;
            let sd = var.sqrt();
            for i in 0..rows {
                let v = &mut cov.data[i * cols + k];
                *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
            }
        }
    }

    /// Axis-aligned bounding box of the locations, as (lows, highs).
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for i in 0..self.num_subjects() {
            for (k, &c) in self.point(i).iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        (lo, hi)
    }
}

/// Location-level case counts and population sizes.
#[derive(Debug, Clone)]
pub struct AggregatedDataset {
    dim: usize,
    centroids: Vec<f64>,
    case_counts: Vec<u64>,
    populations: Vec<u64>,
}

impl AggregatedDataset {
    pub fn new(
        dim: usize,
        centroids: Vec<f64>,
        case_counts: Vec<u64>,
        populations: Vec<u64>,
    ) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::Invalid("dimension must be >= 1".into()));
        }
        let q = populations.len();
        if case_counts.len() != q || centroids.len() != q * dim {
            return Err(DataError::Invalid(
                "aggregated arrays shape mismatch".into(),
            ));
        }
        if centroids.iter().any(|c| !c.is_finite()) {
            return Err(DataError::Invalid("non-finite centroid coordinate".into()));
        }
        for (j, (&m, &n)) in case_counts.iter().zip(&populations).enumerate() {
            if n == 0 {
                return Err(DataError::Invalid(format!("location {j}: population is 0")));
            }
            if m > n {
                return Err(DataError::Invalid(format!(
                    "location {j}: cases {m} exceed population {n}"
                )));
            }
        }
        Ok(AggregatedDataset {
            dim,
            centroids,
            case_counts,
            populations,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of locations q.
    pub fn num_locations(&self) -> usize {
        self.populations.len()
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    pub fn case_counts(&self) -> &[u64] {
        &self.case_counts
    }

    pub fn populations(&self) -> &[u64] {
        &self.populations
    }

    pub fn total_cases(&self) -> u64 {
        self.case_counts.iter().sum()
    }

    pub fn total_population(&self) -> u64 {
        self.populations.iter().sum()
    }

    /// Expands to a subject-level dataset: location j contributes n_j
    /// co-located subjects, the first m_j of them cases.
    pub fn expand(&self) -> PointDataset {
        let total = self.total_population() as usize;
        let mut coords = Vec::with_capacity(total * self.dim);
        let mut cases = Vec::with_capacity(total);
        for j in 0..self.num_locations() {
            let c = self.centroid(j);
            for r in 0..self.populations[j] {
                coords.extend_from_slice(c);
                cases.push(r < self.case_counts[j]);
            }
        }
        PointDataset::new(self.dim, coords, cases, None).expect("expansion is always valid")
    }
}

/// Which CSV schema a file follows, detected from its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Point,
    Aggregated,
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn header_names(rdr: &mut csv::Reader<File>) -> Result<Vec<String>, DataError> {
    Ok(rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect())
}

/// Detects the schema of a CSV file from its header row.
pub fn detect_csv_kind(path: &Path) -> Result<CsvKind, DataError> {
    let mut rdr = open_reader(path)?;
    let names = header_names(&mut rdr)?;
    if names.iter().any(|n| n == "population") {
        Ok(CsvKind::Aggregated)
    } else if names.iter().any(|n| n == "case") {
        Ok(CsvKind::Point)
    } else {
        Err(DataError::Header(format!(
            "cannot classify header [{}]: expected a `case` column (point data) \
             or `cases,population` columns (aggregated data)",
            names.join(",")
        )))
    }
}

/// Coordinate columns are either literal `x,y` or `x1..xd`.
fn coord_columns(names: &[String]) -> Result<Vec<usize>, DataError> {
    let xy: Vec<usize> = names
        .iter()
        .enumerate()
        .filter(|(_, n)| ["x", "y", "z"].contains(&n.as_str()))
        .map(|(i, _)| i)
        .collect();
    if !xy.is_empty() {
        return Ok(xy);
    }
    let mut numbered: Vec<(usize, usize)> = Vec::new();
    for (i, n) in names.iter().enumerate() {
        if let Some(rest) = n.strip_prefix('x') {
            if let Ok(k) = rest.parse::<usize>() {
                numbered.push((k, i));
            }
        }
    }
    numbered.sort_unstable();
    if numbered.is_empty() {
        return Err(DataError::Header(
            "no coordinate columns found (expected `x,y` or `x1..xd`)".into(),
        ));
    }
    Ok(numbered.into_iter().map(|(_, i)| i).collect())
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_f64(rec: &csv::StringRecord, col: usize, what: &str) -> Result<f64, DataError> {
    let line = record_line(rec);
    let raw = rec
        .get(col)
        .ok_or(DataError::Row {
            line,
            msg: format!("missing {what} column"),
        })?
        .trim();
    let v: f64 = raw.parse().map_err(|_| DataError::Row {
        line,
        msg: format!("cannot parse {what} value {raw:?}"),
    })?;
    Ok(v)
}

/// Loads subject-level data from `id,x,y,case[,cov...]` CSV.
pub fn load_point_csv(path: &Path) -> Result<PointDataset, DataError> {
    let mut rdr = open_reader(path)?;
    let names = header_names(&mut rdr)?;
    let coord_cols = coord_columns(&names)?;
    let dim = coord_cols.len();
    let case_col = names
        .iter()
        .position(|n| n == "case")
        .ok_or_else(|| DataError::Header("point data needs a `case` column".into()))?;
    let used: Vec<usize> = coord_cols.iter().copied().chain([case_col]).collect();
    let id_col = names.iter().position(|n| n == "id");
    let cov_cols: Vec<usize> = (0..names.len())
        .filter(|i| !used.contains(i) && Some(*i) != id_col)
        .collect();

    let mut coords = Vec::new();
    let mut cases = Vec::new();
    let mut covs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        for &c in &coord_cols {
            let v = parse_f64(&rec, c, "coordinate")?;
            if !v.is_finite() {
                return Err(DataError::Row {
                    line,
                    msg: format!("non-finite coordinate {v}"),
                });
            }
            coords.push(v);
        }
        let raw_case = rec.get(case_col).unwrap_or("").trim();
        match raw_case {
            "0" => cases.push(false),
            "1" => cases.push(true),
            other => {
                return Err(DataError::Row {
                    line,
                    msg: format!("case label must be 0 or 1, got {other:?}"),
                })
            }
        }
        for &c in &cov_cols {
            covs.push(parse_f64(&rec, c, "covariate")?);
        }
    }
    if cases.is_empty() {
        return Err(DataError::Empty {
            path: path.display().to_string(),
        });
    }
    let user_cov = if cov_cols.is_empty() {
        None
    } else {
        Some((cov_cols.len(), covs))
    };
    PointDataset::new(dim, coords, cases, user_cov)
}

/// Loads location-level data from `id,x,y,cases,population` CSV.
pub fn load_aggregated_csv(path: &Path) -> Result<AggregatedDataset, DataError> {
    let mut rdr = open_reader(path)?;
    let names = header_names(&mut rdr)?;
    let coord_cols = coord_columns(&names)?;
    let dim = coord_cols.len();
    let cases_col = names
        .iter()
        .position(|n| n == "cases")
        .ok_or_else(|| DataError::Header("aggregated data needs a `cases` column".into()))?;
    let pop_col = names
        .iter()
        .position(|n| n == "population")
        .ok_or_else(|| DataError::Header("aggregated data needs a `population` column".into()))?;

    let mut centroids = Vec::new();
    let mut case_counts = Vec::new();
    let mut populations = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = record_line(&rec);
        for &c in &coord_cols {
            centroids.push(parse_f64(&rec, c, "coordinate")?);
        }
        let m = parse_f64(&rec, cases_col, "cases")?;
        let n = parse_f64(&rec, pop_col, "population")?;
        if m < 0.0 || m.fract() != 0.0 || n < 0.0 || n.fract() != 0.0 {
            return Err(DataError::Row {
                line,
                msg: "cases and population must be nonnegative integers".into(),
            });
        }
        let (m, n) = (m as u64, n as u64);
        if n == 0 {
            return Err(DataError::Row {
                line,
                msg: "population is 0".into(),
            });
        }
        if m > n {
            return Err(DataError::Row {
                line,
                msg: format!("cases {m} exceed population {n}"),
            });
        }
        case_counts.push(m);
        populations.push(n);
    }
    if populations.is_empty() {
        return Err(DataError::Empty {
            path: path.display().to_string(),
        });
    }
    AggregatedDataset::new(dim, centroids, case_counts, populations)
}

/// Writes a point dataset back out in the loadable CSV format.
pub fn write_point_csv(data: &PointDataset, path: &Path) -> Result<(), DataError> {
    let mut f = File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut header = String::from("id");
    if data.dim() == 2 {
        header.push_str(",x,y");
    } else {
        for k in 1..=data.dim() {
            header.push_str(&format!(",x{k}"));
        }
    }
    header.push_str(",case");
    let ncov = data.covariates().map(|c| c.cols() - 1).unwrap_or(0);
    for k in 1..=ncov {
        header.push_str(&format!(",cov{k}"));
    }
    writeln!(f, "{header}").map_err(io_err)?;
    for i in 0..data.num_subjects() {
        let mut row = format!("{}", i + 1);
        for &c in data.point(i) {
            row.push_str(&format!(",{c}"));
        }
        row.push_str(if data.cases()[i] { ",1" } else { ",0" });
        if let Some(cov) = data.covariates() {
            for k in 1..cov.cols() {
                row.push_str(&format!(",{}", cov.value(i, k)));
            }
        }
        writeln!(f, "{row}").map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_three_row_point_file() {
        let f = write_tmp("id,x,y,case\n1,0.0,0.0,1\n2,1.0,0.0,0\n3,0.5,0.5,1\n");
        let ds = load_point_csv(f.path()).unwrap();
        assert_eq!(ds.num_subjects(), 3);
        assert_eq!(ds.num_cases(), 2);
        assert!(ds.covariates().is_none());
    }

    #[test]
    fn bad_case_label_names_line() {
        let f = write_tmp("id,x,y,case\n1,0,0,1\n2,1,0,0\n3,2,0,2\n");
        let err = load_point_csv(f.path()).unwrap_err();
        match err {
            DataError::Row { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_finite_coordinate_rejected() {
        let f = write_tmp("id,x,y,case\n1,NaN,0,1\n");
        assert!(load_point_csv(f.path()).is_err());
    }

    #[test]
    fn empty_file_rejected() {
        let f = write_tmp("id,x,y,case\n");
        assert!(matches!(
            load_point_csv(f.path()),
            Err(DataError::Empty { .. })
        ));
    }

    #[test]
    fn comment_lines_skipped_and_covariates_collected() {
        let f = write_tmp("id,x,y,case,age,smoker\n# a comment\n1,0,0,1,60,1\n2,1,1,0,42,0\n");
        let ds = load_point_csv(f.path()).unwrap();
        let cov = ds.covariates().unwrap();
        assert_eq!(cov.cols(), 3);
        assert_eq!(cov.row(0), &[1.0, 60.0, 1.0]);
        assert_eq!(cov.row(1), &[1.0, 42.0, 0.0]);
    }

    #[test]
    fn aggregated_expansion_preserves_totals() {
        let f = write_tmp("id,x,y,cases,population\n1,0,0,1,10\n2,3,4,0,5\n");
        let agg = load_aggregated_csv(f.path()).unwrap();
        assert_eq!(agg.num_locations(), 2);
        let ds = agg.expand();
        assert_eq!(ds.num_subjects(), 15);
        assert_eq!(ds.num_cases(), 1);
        assert_eq!(ds.point(9), &[0.0, 0.0]);
        assert_eq!(ds.point(10), &[3.0, 4.0]);
    }

    #[test]
    fn aggregated_rejects_cases_over_population() {
        let f = write_tmp("id,x,y,cases,population\n1,0,0,6,5\n");
        let err = load_aggregated_csv(f.path()).unwrap_err();
        assert!(matches!(err, DataError::Row { line: 2, .. }));
    }

    #[test]
    fn kind_detection() {
        let p = write_tmp("id,x,y,case\n1,0,0,1\n");
        let a = write_tmp("id,x,y,cases,population\n1,0,0,1,5\n");
        assert_eq!(detect_csv_kind(p.path()).unwrap(), CsvKind::Point);
        assert_eq!(detect_csv_kind(a.path()).unwrap(), CsvKind::Aggregated);
    }

    #[test]
    fn point_roundtrip_is_identity() {
        let f = write_tmp("id,x,y,case,cov1\n1,0.25,-1.5,1,2.5\n2,1e3,0.125,0,-0.75\n");
        let ds = load_point_csv(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_point_csv(&ds, out.path()).unwrap();
        let back = load_point_csv(out.path()).unwrap();
        assert_eq!(back.num_subjects(), ds.num_subjects());
        assert_eq!(back.num_cases(), ds.num_cases());
        assert_eq!(back.coords(), ds.coords());
        assert_eq!(back.cases(), ds.cases());
        assert_eq!(
            back.covariates().unwrap().row(1),
            ds.covariates().unwrap().row(1)
        );
    }

    #[test]
    fn higher_dimensional_header() {
        let f = write_tmp("id,x1,x2,x3,case\n1,0,0,0,1\n2,1,1,1,0\n");
        let ds = load_point_csv(f.path()).unwrap();
        assert_eq!(ds.dim(), 3);
    }

    #[test]
    fn standardize_centers_columns() {
        let f = write_tmp("id,x,y,case,v\n1,0,0,1,10\n2,1,0,0,20\n3,2,0,0,30\n");
        let mut ds = load_point_csv(f.path()).unwrap();
        ds.standardize_covariates();
        let cov = ds.covariates().unwrap();
        let mean: f64 = (0..3).map(|i| cov.value(i, 1)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
        assert_eq!(cov.value(0, 0), 1.0);
    }
}
