//! Dataset ingestion: dense delimited files, sparse "idx:val" files,
//! provided train/validation splits, and seeded k-fold plans.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Where the label lives in a dense file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSpec {
    /// Last column (the default for labeled files).
    Last,
    /// 0-based column index.
    Index(usize),
    /// Column name; requires a header row.
    Name(String),
    /// No label column: every column is a feature.
    Absent,
}

impl LabelSpec {
    /// Parses a CLI value: "last", "none", a 0-based index, or a column name.
    pub fn parse(s: &str) -> LabelSpec {
        match s {
            "last" => LabelSpec::Last,
            "none" => LabelSpec::Absent,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelSpec::Index(i),
                Err(_) => LabelSpec::Name(s.to_string()),
            },
        }
    }
}

/// In-memory instance matrix with dense storage and 0-based class indices.
/// Missing feature values are NaN. `labels` is empty for unlabeled files.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    matrix: Vec<f64>,
    n_instances: usize,
    n_features: usize,
    labels: Vec<usize>,
    label_names: Vec<String>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn from_parts(
        matrix: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if n_features == 0 && !matrix.is_empty() {
            return Err(Error::DimensionMismatch("zero-width matrix".into()));
        }
        let n_instances = if n_features == 0 { 0 } else { matrix.len() / n_features };
        if n_instances * n_features != matrix.len() {
            return Err(Error::DimensionMismatch("matrix is not rectangular".into()));
        }
        if !labels.is_empty() {
            if labels.len() != n_instances {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} instances",
                    labels.len(),
                    n_instances
                )));
            }
            if let Some(&max) = labels.iter().max() {
                if max >= label_names.len() {
                    return Err(Error::Label(format!(
                        "label index {max} has no name (only {} names)",
                        label_names.len()
                    )));
                }
            }
        }
        Ok(Self {
            matrix,
            n_instances,
            n_features,
            labels,
            label_names,
            feature_names: None,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.matrix[i * self.n_features + k]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// New dataset holding the given rows, sharing the label mapping.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut matrix = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            matrix.extend_from_slice(self.row(i));
            if !self.labels.is_empty() {
                labels.push(self.labels[i]);
            }
        }
        Dataset {
            matrix,
            n_instances: indices.len(),
            n_features: self.n_features,
            labels,
            label_names: self.label_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Rewrites this dataset's class indices to match another mapping, so a
    /// separately loaded validation file agrees with the training file even
    /// when its labels first appear in a different order.
    pub fn remap_labels_to(&mut self, names: &[String]) -> Result<()> {
        let mapping: Vec<usize> = self
            .label_names
            .iter()
            .map(|name| {
                names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Label(format!("label '{name}' never seen in training data")))
            })
            .collect::<Result<_>>()?;
        for l in &mut self.labels {
            *l = mapping[*l];
        }
        self.label_names = names.to_vec();
        Ok(())
    }
}

fn parse_cell(tok: &str, path: &Path, line: usize, column: usize) -> Result<f64> {
    let t = tok.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: format!("'{t}' is not a number"),
    })
}

fn intern_label(names: &mut Vec<String>, raw: &str) -> usize {
    match names.iter().position(|n| n == raw) {
        Some(i) => i,
        None => {
            names.push(raw.to_string());
            names.len() - 1
        }
    }
}

/// Loads a comma- or tab-separated numeric file. The delimiter is sniffed
/// from the first line; labels are remapped to dense indices in first-seen
/// order; `limit` keeps only the first rows.
pub fn load_dense(
    path: impl AsRef<Path>,
    label: &LabelSpec,
    has_header: bool,
    limit: Option<usize>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let delim = if text.lines().next().is_some_and(|l| l.contains('\t')) {
        '\t'
    } else {
        ','
    };

    let mut lines = text.lines().enumerate();
    let header: Option<Vec<String>> = if has_header {
        match lines.next() {
            Some((_, l)) => Some(l.split(delim).map(|s| s.trim().to_string()).collect()),
            None => None,
        }
    } else {
        None
    };

    let mut matrix = Vec::new();
    let mut labels = Vec::new();
    let mut label_names = Vec::new();
    let mut expected_cols: Option<usize> = None;
    let mut label_col: Option<Option<usize>> = None;
    let mut n_rows = 0usize;

    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if limit.is_some_and(|l| n_rows >= l) {
            break;
        }
        let lineno = idx + 1;
        let cells: Vec<&str> = line.split(delim).collect();
        let ncols = cells.len();
        match expected_cols {
            None => {
                expected_cols = Some(ncols);
                let resolved = match label {
                    LabelSpec::Absent => None,
                    LabelSpec::Last => Some(ncols - 1),
                    LabelSpec::Index(i) => {
                        if *i >= ncols {
                            return Err(Error::Config(format!(
                                "label column {i} out of range for a {ncols}-column file"
                            )));
                        }
                        Some(*i)
                    }
                    LabelSpec::Name(name) => {
                        let hdr = header.as_ref().ok_or_else(|| {
                            Error::Config(format!(
                                "label column '{name}' needs a header row (pass --has-header)"
                            ))
                        })?;
                        Some(hdr.iter().position(|h| h == name).ok_or_else(|| {
                            Error::Config(format!("no column named '{name}' in the header"))
                        })?)
                    }
                };
                label_col = Some(resolved);
            }
            Some(e) if e != ncols => {
                return Err(Error::RaggedRows {
                    path: path.to_path_buf(),
                    line: lineno,
                    expected: e,
                    got: ncols,
                });
            }
            _ => {}
        }
        let lc = label_col.unwrap();
        for (c, tok) in cells.iter().enumerate() {
            if Some(c) == lc {
                labels.push(intern_label(&mut label_names, tok.trim()));
            } else {
                matrix.push(parse_cell(tok, path, lineno, c + 1)?);
            }
        }
        n_rows += 1;
    }

    // A file with no rows loads as a zero-instance dataset; whether that is
    // an error is the caller's call (training needs rows, classification of
    // nothing is vacuous success).
    let n_features = match expected_cols {
        Some(cols) => cols - usize::from(label_col.unwrap().is_some()),
        None => 0,
    };
    let resolved_label = label_col.flatten();
    let feature_names = header.map(|hdr| {
        hdr.iter()
            .enumerate()
            .filter(|(c, _)| Some(*c) != resolved_label)
            .map(|(_, h)| h.clone())
            .collect()
    });
    let mut ds = Dataset::from_parts(matrix, n_features, labels, label_names)?;
    ds.feature_names = feature_names;
    Ok(ds)
}

/// Loads a sparse "label idx:val idx:val ..." file with strictly ascending
/// 1-based indices per line. Unlisted coordinates are 0.0. The feature count
/// is `declared_dim` or the maximum index observed.
pub fn load_sparse(
    path: impl AsRef<Path>,
    declared_dim: Option<usize>,
    limit: Option<usize>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut label_names = Vec::new();
    let mut max_idx = 0usize;

    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if limit.is_some_and(|l| rows.len() >= l) {
            break;
        }
        let lineno = idx + 1;
        let mut toks = line.split_whitespace();
        let label_tok = toks.next().expect("non-empty line has a first token");
        labels.push(intern_label(&mut label_names, label_tok));
        let mut row = Vec::new();
        let mut prev = 0usize;
        for (t, tok) in toks.enumerate() {
            let (is, vs) = tok.split_once(':').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                column: t + 2,
                message: format!("'{tok}' is not an idx:val pair"),
            })?;
            let i: usize = is.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                column: t + 2,
                message: format!("'{is}' is not a feature index"),
            })?;
            if i == 0 || i <= prev {
                return Err(Error::NonAscendingIndex {
                    path: path.to_path_buf(),
                    line: lineno,
                });
            }
            let v: f64 = vs.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                column: t + 2,
                message: format!("'{vs}' is not a number"),
            })?;
            prev = i;
            max_idx = max_idx.max(i);
            row.push((i, v));
        }
        rows.push(row);
    }

    let n_features = declared_dim.unwrap_or(max_idx);
    let mut matrix = vec![0.0; rows.len() * n_features];
    for (r, row) in rows.iter().enumerate() {
        for &(i, v) in row {
            if i > n_features {
                return Err(Error::DimensionMismatch(format!(
                    "feature index {i} exceeds the declared dimension {n_features}"
                )));
            }
            matrix[r * n_features + (i - 1)] = v;
        }
    }
    Dataset::from_parts(matrix, n_features, labels, label_names)
}

/// Writes a dense dataset back out: features in order, label last, comma
/// separated, shortest-round-trip float formatting so a reload is bit-exact.
pub fn save_dense(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    if let Some(names) = ds.feature_names() {
        out.push_str(&names.join(","));
        out.push_str(",label\n");
    }
    for i in 0..ds.n_instances() {
        let mut line = String::new();
        for (k, &v) in ds.row(i).iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            if v.is_nan() {
                line.push_str("nan");
            } else {
                write!(line, "{v}").expect("writing to a String cannot fail");
            }
        }
        if !ds.labels().is_empty() {
            write!(line, ",{}", ds.label_names()[ds.labels()[i]])
                .expect("writing to a String cannot fail");
        }
        line.push('\n');
        out.push_str(&line);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Seeded shuffle followed by a contiguous partition into near-equal folds;
/// returns (train indices, validation indices) per fold, both ascending.
pub fn make_folds(
    n_instances: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 {
        return Err(Error::Config(format!("{folds} folds make no sense; need at least 2")));
    }
    if n_instances < folds {
        return Err(Error::TooFewInstances {
            got: n_instances,
            folds,
        });
    }
    let mut order: Vec<usize> = (0..n_instances).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let base = n_instances / folds;
    let extra = n_instances % folds;
    let mut plans = Vec::with_capacity(folds);
    let mut start = 0usize;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        let mut valid: Vec<usize> = order[start..start + size].to_vec();
        let mut train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        valid.sort_unstable();
        train.sort_unstable();
        plans.push((train, valid));
        start += size;
    }
    Ok(plans)
}
