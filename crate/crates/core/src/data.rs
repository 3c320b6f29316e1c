//! Labeled datasets, corruption masks and the dataset CSV format.
//!
//! CSV layout: an optional `#`-prefixed provenance line, a header row with
//! feature columns `f0..f{d-1}`, an integer `label` column, and optionally
//! `corrupted` (0/1) and `orig_label` columns.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::numerics::Matrix;

/// Ground truth for injected label noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionMask {
    pub corrupted: Vec<bool>,
    pub original_labels: Vec<usize>,
}

impl CorruptionMask {
    pub fn clean(labels: &[usize]) -> Self {
        Self {
            corrupted: vec![false; labels.len()],
            original_labels: labels.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.corrupted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corrupted.is_empty()
    }

    pub fn num_corrupted(&self) -> usize {
        self.corrupted.iter().filter(|&&c| c).count()
    }

    pub fn is_corrupted(&self, i: usize) -> bool {
        self.corrupted[i]
    }
}

/// `n` feature vectors with class labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    mask: Option<CorruptionMask>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        ensure_len("dataset labels", features.rows(), labels.len())?;
        if num_classes == 0 {
            return Err(Error::InvalidConfig("num_classes must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: num_classes,
            });
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("dataset features"));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            mask: None,
        })
    }

    pub fn with_mask(mut self, mask: CorruptionMask) -> Result<Self> {
        ensure_len("corruption mask", self.len(), mask.len())?;
        ensure_len("corruption mask labels", self.len(), mask.original_labels.len())?;
        if let Some(&bad) = mask.original_labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: self.num_classes,
            });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn mask(&self) -> Option<&CorruptionMask> {
        self.mask.as_ref()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Copy with point `i` removed (the mask, if any, follows).
    pub fn without(&self, i: usize) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&j| j != i).collect();
        self.subset(&keep)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &j in indices {
            if j >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    len: self.len(),
                });
            }
            data.extend_from_slice(self.x(j));
            labels.push(self.labels[j]);
        }
        let mut out = Self::new(
            Matrix::from_row_major(indices.len(), d, data)?,
            labels,
            self.num_classes,
        )?;
        if let Some(m) = &self.mask {
            out.mask = Some(CorruptionMask {
                corrupted: indices.iter().map(|&j| m.corrupted[j]).collect(),
                original_labels: indices.iter().map(|&j| m.original_labels[j]).collect(),
            });
        }
        Ok(out)
    }

    /// Replaces the labels, keeping features. Used by noise injection.
    pub(crate) fn relabeled(&self, labels: Vec<usize>, mask: CorruptionMask) -> Result<Self> {
        Self::new(self.features.clone(), labels, self.num_classes)?.with_mask(mask)
    }

    pub fn write_csv<W: Write>(&self, out: W, provenance: Option<&str>) -> Result<()> {
        let mut out = out;
        if let Some(p) = provenance {
            writeln!(out, "# {p}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        if self.mask.is_some() {
            header.push("corrupted".into());
            header.push("orig_label".into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.x(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            if let Some(m) = &self.mask {
                rec.push(u8::from(m.corrupted[i]).to_string());
                rec.push(m.original_labels[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, provenance: Option<&str>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), provenance)
    }

    /// Parses the dataset CSV. `num_classes` defaults to `max(label) + 1`.
    pub fn read_csv<R: Read>(input: R, num_classes: Option<usize>) -> Result<Self> {
        Self::read_csv_inner(input, num_classes, Path::new("<input>"))
    }

    pub fn load_csv(path: &Path, num_classes: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv_inner(std::io::BufReader::new(file), num_classes, path)
    }

    fn read_csv_inner<R: Read>(input: R, num_classes: Option<usize>, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = r.headers()?.clone();
        let mut feature_cols = Vec::new();
        let (mut label_col, mut corrupted_col, mut orig_col) = (None, None, None);
        for (c, h) in headers.iter().enumerate() {
            match h {
                "label" => label_col = Some(c),
                "corrupted" => corrupted_col = Some(c),
                "orig_label" => orig_col = Some(c),
                _ => {
                    let idx: usize = h
                        .strip_prefix('f')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad(format!("unexpected column `{h}`")))?;
                    feature_cols.push((idx, c));
                }
            }
        }
        let label_col = label_col.ok_or_else(|| bad("missing `label` column".into()))?;
        feature_cols.sort_unstable();
        for (expected, &(idx, _)) in feature_cols.iter().enumerate() {
            if idx != expected {
                return Err(bad(format!("feature columns must be f0..f{}", feature_cols.len() - 1)));
            }
        }

        let parse_usize = |s: &str, line: usize| -> Result<usize> {
            s.parse()
                .map_err(|_| bad(format!("line {line}: `{s}` is not a non-negative integer")))
        };
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut corrupted = Vec::new();
        let mut orig = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            for &(_, c) in &feature_cols {
                let v: f64 = rec[c]
                    .parse()
                    .map_err(|_| bad(format!("line {line}: `{}` is not a number", &rec[c])))?;
                data.push(v);
            }
            labels.push(parse_usize(&rec[label_col], line)?);
            if let Some(c) = corrupted_col {
                corrupted.push(match &rec[c] {
                    "0" => false,
                    "1" => true,
                    other => return Err(bad(format!("line {line}: corrupted must be 0/1, got `{other}`"))),
                });
            }
            if let Some(c) = orig_col {
                orig.push(parse_usize(&rec[c], line)?);
            }
        }
        let n = labels.len();
        let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
        let features = Matrix::from_row_major(n, feature_cols.len(), data)?;
        let ds = Self::new(features, labels, classes)?;
        match (corrupted_col, orig_col) {
            (None, None) => Ok(ds),
            (Some(_), o) => {
                let original_labels = if o.is_some() { orig } else { ds.labels.clone() };
                ds.with_mask(CorruptionMask {
                    corrupted,
                    original_labels,
                })
            }
            (None, Some(_)) => {
                let corrupted = orig.iter().zip(&ds.labels).map(|(o, l)| o != l).collect();
                ds.with_mask(CorruptionMask {
                    corrupted,
                    original_labels: orig,
                })
            }
        }
    }
}
