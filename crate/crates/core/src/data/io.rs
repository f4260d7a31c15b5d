use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{SpikedModelSpec, Standardization};
use crate::error::{Error, Result};
use crate::glm::{CumulantFamily, Dataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Libsvm,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "libsvm" | "svmlight" => Ok(Self::Libsvm),
            _ => Err(Error::InvalidArgument(format!("unknown data format '{s}' (expected csv or libsvm)"))),
        }
    }
}

/// Which CSV column holds the response. Ignored for libsvm, where the label
/// always comes first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    #[default]
    Last,
    First,
    Index(usize),
}

/// How raw labels become responses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMapping {
    /// Use the values as they are.
    #[default]
    Raw,
    /// Two-class labels `{−1, 1}`, `{1, 2}` or `{0, 1}` mapped onto `{0, 1}`.
    Binary,
    /// `1` where the label equals the given class, `0` elsewhere.
    OneVsRest(f64),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    pub format: Option<DataFormat>,
    pub label: LabelColumn,
    pub mapping: LabelMapping,
    /// Feature count for libsvm files; inferred from the largest index if absent.
    pub features: Option<usize>,
}

impl LoadOptions {
    /// Options matching what a family expects: binary mapping for logistic.
    pub fn for_family(family: CumulantFamily) -> Self {
        let mapping = if family == CumulantFamily::Logistic { LabelMapping::Binary } else { LabelMapping::Raw };
        Self { mapping, ..Self::default() }
    }
}

fn format_from_path(path: &Path) -> DataFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if ["svm", "libsvm", "svmlight"].contains(&e.to_ascii_lowercase().as_str()) => DataFormat::Libsvm,
        _ => DataFormat::Csv,
    }
}

/// Loads a dataset from disk. The format defaults to the file extension
/// (`.svm`/`.libsvm` → libsvm, anything else → CSV).
pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    match options.format.unwrap_or_else(|| format_from_path(path)) {
        DataFormat::Csv => parse_csv(file, options),
        DataFormat::Libsvm => parse_libsvm(BufReader::new(file), options),
    }
}

/// Parses comma-separated rows. A first line whose fields are all
/// non-numeric is taken as a header.
pub fn parse_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut first = true;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            if record.iter().all(|f| f.parse::<f64>().is_err()) {
                header = Some(record.iter().map(str::to_owned).collect());
                width = Some(record.len());
                continue;
            }
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse { line, message: format!("expected {w} columns, found {}", record.len()) })
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("column {}: '{field}' is not a number", j + 1) })?;
            row.push(v);
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    if width < 2 {
        return Err(Error::Parse { line: 1, message: "need at least one feature column and a label column".into() });
    }
    let label = match options.label {
        LabelColumn::Last => width - 1,
        LabelColumn::First => 0,
        LabelColumn::Index(i) if i < width => i,
        LabelColumn::Index(i) => return Err(Error::IndexOutOfRange { index: i, len: width }),
    };
    let n = rows.len();
    let p = width - 1;
    let feature_index = |j: usize| if j < label { j } else { j + 1 };
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][feature_index(j)]);
    let raw: Vec<f64> = rows.iter().map(|r| r[label]).collect();
    let y = map_labels(&raw, options.mapping)?;
    let data = Dataset::new(x, y)?;
    match header {
        Some(h) => data.with_feature_names((0..p).map(|j| h[feature_index(j)].clone()).collect()),
        None => Ok(data),
    }
}

/// Parses `label idx:val idx:val …` lines with 1-based indices. Blank lines
/// and `#` comments are skipped.
pub fn parse_libsvm<R: BufRead>(reader: R, options: &LoadOptions) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0;
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| Error::Parse { line: lineno, message: format!("label '{label_tok}' is not a number") })?;
        let mut row = Vec::new();
        for tok in tokens {
            let bad = || Error::Parse { line: lineno, message: format!("malformed entry '{tok}' (expected index:value)") };
            let (idx, val) = tok.split_once(':').ok_or_else(bad)?;
            let idx: usize = idx.parse().map_err(|_| bad())?;
            let val: f64 = val.parse().map_err(|_| bad())?;
            if idx == 0 {
                return Err(Error::Parse { line: lineno, message: "feature indices are 1-based".into() });
            }
            if let Some(p) = options.features {
                if idx > p {
                    return Err(Error::Parse { line: lineno, message: format!("index {idx} exceeds {p} features") });
                }
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        labels.push(label);
        entries.push(row);
    }
    if labels.is_empty() {
        return Err(Error::Parse { line: 1, message: "empty file".into() });
    }
    let p = options.features.unwrap_or(max_index);
    if p == 0 {
        return Err(Error::Parse { line: 1, message: "no features found".into() });
    }
    let mut x = DMatrix::zeros(labels.len(), p);
    for (i, row) in entries.iter().enumerate() {
        for &(j, v) in row {
            x[(i, j)] = v;
        }
    }
    Dataset::new(x, map_labels(&labels, options.mapping)?)
}

fn map_labels(raw: &[f64], mapping: LabelMapping) -> Result<DVector<f64>> {
    match mapping {
        LabelMapping::Raw => Ok(DVector::from_column_slice(raw)),
        LabelMapping::OneVsRest(class) => Ok(DVector::from_iterator(raw.len(), raw.iter().map(|&v| f64::from(u8::from(v == class))))),
        LabelMapping::Binary => {
            let all_in = |set: [f64; 2]| raw.iter().all(|v| set.contains(v));
            let negative = if all_in([0.0, 1.0]) {
                0.0
            } else if all_in([-1.0, 1.0]) {
                -1.0
            } else if all_in([1.0, 2.0]) {
                1.0
            } else {
                let bad = raw.iter().position(|v| ![-1.0, 0.0, 1.0, 2.0].contains(v)).unwrap_or(0);
                return Err(Error::Parse {
                    line: bad + 1,
                    message: "labels are not two-class {0,1}, {-1,1} or {1,2}".into(),
                });
            };
            Ok(DVector::from_iterator(raw.len(), raw.iter().map(|&v| if v == negative { 0.0 } else { 1.0 })))
        }
    }
}

/// Sidecar description written next to a dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub n: usize,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<CumulantFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SpikedModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Coefficients the responses were drawn from, for generated data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_true: Option<Vec<f64>>,
}

impl DatasetMetadata {
    pub fn for_dataset(data: &Dataset) -> Self {
        Self { n: data.n(), p: data.p(), family: None, standardization: None, generator: None, seed: None, beta_true: None }
    }
}

/// `data.csv` → `data.meta.json`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes features then the label as the last column, with a header line.
/// Values use the shortest representation that parses back to the same
/// `f64`.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let names: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.p()).map(|j| format!("x{j}")).collect(),
    };
    let mut header = names;
    header.push("y".into());
    w.write_record(&header)?;
    let x = data.x();
    let mut fields = Vec::with_capacity(data.p() + 1);
    for i in 0..data.n() {
        fields.clear();
        fields.extend(x.row(i).iter().map(|v| v.to_string()));
        fields.push(data.y()[i].to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the dataset CSV and its JSON sidecar; returns the sidecar path.
pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>, metadata: &DatasetMetadata) -> Result<PathBuf> {
    let path = path.as_ref();
    write_csv(data, BufWriter::new(File::create(path)?))?;
    let meta_path = metadata_path(path);
    let mut f = BufWriter::new(File::create(&meta_path)?);
    serde_json::to_writer_pretty(&mut f, metadata)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(meta_path)
}

pub fn read_metadata(path: impl AsRef<Path>) -> Result<DatasetMetadata> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
