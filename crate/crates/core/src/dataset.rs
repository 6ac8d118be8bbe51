//! Feature matrix + action labels + row provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub const ALL: [SplitTag; 3] = [SplitTag::Train, SplitTag::Val, SplitTag::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }
}

/// Where a row came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub episode: usize,
    pub topology: String,
    pub time: u64,
    pub vehicle: usize,
    pub tag: Option<SplitTag>,
}

/// Row-major feature matrix with one action label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    values: Vec<f64>,
    labels: Vec<usize>,
    meta: Vec<RowMeta>,
    n_classes: usize,
}

impl Dataset {
    pub fn empty(names: Vec<String>, n_classes: usize) -> Self {
        Dataset { names, values: Vec::new(), labels: Vec::new(), meta: Vec::new(), n_classes }
    }

    /// Builds a dataset from rows, validating shape and labels.
    pub fn from_rows(names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let mut data = Dataset::empty(names, n_classes);
        for (i, (row, label)) in rows.into_iter().zip(labels).enumerate() {
            let meta = RowMeta { episode: 0, topology: String::new(), time: i as u64, vehicle: 0, tag: None };
            data.push_row(&row, label, meta)?;
        }
        Ok(data)
    }

    pub fn push_row(&mut self, row: &[f64], label: usize, meta: RowMeta) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::InvalidInput(format!("row has {} values, expected {}", row.len(), self.names.len())));
        }
        if label >= self.n_classes {
            return Err(Error::InvalidInput(format!("label {label} outside 0..{}", self.n_classes)));
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        self.meta.push(meta);
        Ok(())
    }

    pub(crate) fn extend_rows(&mut self, values: Vec<f64>, labels: Vec<usize>, meta: Vec<RowMeta>) {
        debug_assert_eq!(values.len(), labels.len() * self.names.len());
        self.values.extend(values);
        self.labels.extend(labels);
        self.meta.extend(meta);
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.names.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.names.len() + feature]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn meta(&self) -> &[RowMeta] {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut [RowMeta] {
        &mut self.meta
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut out = Dataset::empty(self.names.clone(), self.n_classes);
        for &i in indices {
            out.values.extend_from_slice(self.row(i));
            out.labels.push(self.labels[i]);
            out.meta.push(self.meta[i].clone());
        }
        out
    }

    pub fn with_tag(&self, tag: SplitTag) -> Dataset {
        let idx: Vec<usize> = (0..self.n_rows()).filter(|&i| self.meta[i].tag == Some(tag)).collect();
        self.subset(&idx)
    }

    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        let mut out = Dataset::empty(columns.iter().map(|&c| self.names[c].clone()).collect(), self.n_classes);
        for i in 0..self.n_rows() {
            let row = self.row(i);
            out.values.extend(columns.iter().map(|&c| row[c]));
        }
        out.labels = self.labels.clone();
        out.meta = self.meta.clone();
        out
    }

    /// Rows with identical feature vectors but different labels exist.
    pub fn has_contradictions(&self) -> bool {
        let mut order: Vec<usize> = (0..self.n_rows()).collect();
        let cmp = |a: &usize, b: &usize| {
            self.row(*a)
                .iter()
                .zip(self.row(*b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        };
        order.sort_by(cmp);
        order.windows(2).any(|w| cmp(&w[0], &w[1]).is_eq() && self.labels[w[0]] != self.labels[w[1]])
    }

    /// CSV with the feature names as header plus a final `action` column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = self.names.clone();
        header.push("action".into());
        w.write_record(&header)?;
        let mut buf = Vec::with_capacity(self.names.len() + 1);
        for i in 0..self.n_rows() {
            buf.clear();
            buf.extend(self.row(i).iter().map(|v| v.to_string()));
            buf.push(self.labels[i].to_string());
            w.write_record(&buf)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a CSV written by [`Dataset::write_csv`]; provenance is left blank.
    pub fn read_csv(path: &Path, n_classes: usize) -> Result<Dataset> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.last().map(String::as_str) != Some("action") {
            return Err(Error::Config(format!("{}: last column must be `action`", path.display())));
        }
        let names = header[..header.len() - 1].to_vec();
        let mut data = Dataset::empty(names, n_classes);
        let parse_err = |what: &str, v: &str| Error::Config(format!("{}: bad {what} `{v}`", path.display()));
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut row = Vec::with_capacity(data.n_features());
            for v in rec.iter().take(rec.len() - 1) {
                row.push(v.parse::<f64>().map_err(|_| parse_err("value", v))?);
            }
            let a = &rec[rec.len() - 1];
            let label = a.parse::<usize>().map_err(|_| parse_err("action", a))?;
            let meta = RowMeta { episode: 0, topology: String::new(), time: i as u64, vehicle: 0, tag: None };
            data.push_row(&row, label, meta)?;
        }
        Ok(data)
    }

    pub fn write_meta_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["episode", "topology", "time", "vehicle", "tag"])?;
        for m in &self.meta {
            let tag = m.tag.map_or("", SplitTag::name);
            w.write_record([
                m.episode.to_string(),
                m.topology.clone(),
                m.time.to_string(),
                m.vehicle.to_string(),
                tag.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Attaches provenance written by [`Dataset::write_meta_csv`].
    pub fn read_meta_csv(&mut self, path: &Path) -> Result<()> {
        let mut r = csv::Reader::from_path(path)?;
        let mut meta = Vec::with_capacity(self.n_rows());
        let bad = |v: &str| Error::Config(format!("{}: bad provenance field `{v}`", path.display()));
        for rec in r.records() {
            let rec = rec?;
            let tag = match &rec[4] {
                "" => None,
                "train" => Some(SplitTag::Train),
                "val" => Some(SplitTag::Val),
                "test" => Some(SplitTag::Test),
                other => return Err(bad(other)),
            };
            meta.push(RowMeta {
                episode: rec[0].parse().map_err(|_| bad(&rec[0]))?,
                topology: rec[1].to_string(),
                time: rec[2].parse().map_err(|_| bad(&rec[2]))?,
                vehicle: rec[3].parse().map_err(|_| bad(&rec[3]))?,
                tag,
            });
        }
        if meta.len() != self.n_rows() {
            return Err(Error::Config(format!(
                "{}: {} provenance rows for {} data rows",
                path.display(),
                meta.len(),
                self.n_rows()
            )));
        }
        self.meta = meta;
        Ok(())
    }
}
