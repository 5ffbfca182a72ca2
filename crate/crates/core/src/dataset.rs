//! Observational datasets with selectively observed outcomes.
//!
//! A row carries covariates `x`, the status-quo action `d`, the proposed
//! policy's positive-action probability `pi1`, an optional realized proposed
//! action `t`, and an outcome `y` that is present exactly when `d = 1`.
//! Optional categorical columns hold an instrument or treatment proxy `z`,
//! an outcome proxy `w`, and a subgroup label.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observational record, used to build datasets in code.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub x: Vec<f64>,
    pub d: bool,
    pub pi1: f64,
    pub t: Option<bool>,
    pub y: Option<bool>,
    pub z: Option<String>,
    pub w: Option<String>,
    pub group: Option<String>,
}

impl Row {
    pub fn new(x: Vec<f64>, d: bool, pi1: f64, y: Option<bool>) -> Self {
        Row {
            x,
            d,
            pi1,
            t: None,
            y,
            z: None,
            w: None,
            group: None,
        }
    }
}

/// A categorical column stored as level codes into a sorted label table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Categorical {
    pub codes: Vec<u32>,
    pub labels: Vec<String>,
}

impl Categorical {
    fn from_labels(values: Vec<String>) -> Self {
        let mut labels: Vec<String> = values.clone();
        labels.sort();
        labels.dedup();
        let index: BTreeMap<&str, u32> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let codes = values.iter().map(|v| index[v.as_str()]).collect();
        Categorical { codes, labels }
    }

    pub fn levels(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, row: usize) -> &str {
        &self.labels[self.codes[row] as usize]
    }

    fn subset(&self, rows: &[usize]) -> Self {
        Categorical {
            codes: rows.iter().map(|&i| self.codes[i]).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Column-name mapping used when reading CSV input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    /// Explicit covariate columns; when empty, every column starting with
    /// `x_prefix` is a covariate, in header order.
    pub x_columns: Vec<String>,
    pub x_prefix: String,
    pub d: String,
    pub pi1: String,
    pub t: String,
    pub y: String,
    pub z: Option<String>,
    pub w: Option<String>,
    pub group: Option<String>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            x_columns: Vec::new(),
            x_prefix: "x_".to_string(),
            d: "d".to_string(),
            pi1: "pi1".to_string(),
            t: "t".to_string(),
            y: "y".to_string(),
            z: None,
            w: None,
            group: None,
        }
    }
}

/// Immutable, validated observational sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalDataset {
    p: usize,
    x: Vec<f64>,
    d: Vec<bool>,
    pi1: Vec<f64>,
    t: Option<Vec<bool>>,
    y: Vec<Option<bool>>,
    z: Option<Categorical>,
    w: Option<Categorical>,
    group: Option<Categorical>,
    x_names: Vec<String>,
    masked_outcomes: usize,
}

impl ObservationalDataset {
    /// Builds a dataset from rows. An outcome supplied on a `d = 0` row is
    /// dropped and counted in [`masked_outcomes`](Self::masked_outcomes).
    pub fn from_rows(rows: Vec<Row>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let p = rows[0].x.len();
        let has_t = rows.iter().any(|r| r.t.is_some());
        let has_z = rows.iter().any(|r| r.z.is_some());
        let has_w = rows.iter().any(|r| r.w.is_some());
        let has_group = rows.iter().any(|r| r.group.is_some());

        let mut x = Vec::with_capacity(n * p);
        let mut d = Vec::with_capacity(n);
        let mut pi1 = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(if has_t { n } else { 0 });
        let mut y = Vec::with_capacity(n);
        let mut z = Vec::new();
        let mut w = Vec::new();
        let mut group = Vec::new();
        let mut masked = 0;

        for (i, row) in rows.into_iter().enumerate() {
            if row.x.len() != p {
                return Err(Error::DimensionMismatch {
                    row: i,
                    expected: p,
                    found: row.x.len(),
                });
            }
            if !(0.0..=1.0).contains(&row.pi1) {
                return Err(Error::Pi1OutOfRange {
                    row: i,
                    value: row.pi1,
                });
            }
            if row.d && row.y.is_none() {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: outcome must be observed when d = 1"
                )));
            }
            x.extend_from_slice(&row.x);
            if has_t {
                t.push(row.t.ok_or_else(|| {
                    Error::InvalidArgument(format!("row {i}: t missing while other rows carry it"))
                })?);
            }
            let outcome = if row.d {
                row.y
            } else {
                if row.y.is_some() {
                    masked += 1;
                }
                None
            };
            d.push(row.d);
            pi1.push(row.pi1);
            y.push(outcome);
            if has_z {
                z.push(row.z.ok_or_else(|| missing_cat(i, "z"))?);
            }
            if has_w {
                w.push(row.w.ok_or_else(|| missing_cat(i, "w"))?);
            }
            if has_group {
                group.push(row.group.ok_or_else(|| missing_cat(i, "group"))?);
            }
        }
        if masked > 0 {
            warn!("{masked} outcome(s) on d = 0 rows treated as missing");
        }

        Ok(ObservationalDataset {
            p,
            x,
            d,
            pi1,
            t: has_t.then_some(t),
            y,
            z: has_z.then(|| Categorical::from_labels(z)),
            w: has_w.then(|| Categorical::from_labels(w)),
            group: has_group.then(|| Categorical::from_labels(group)),
            x_names: (0..p).map(|j| format!("x_{j}")).collect(),
            masked_outcomes: masked,
        })
    }

    pub fn with_x_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::InvalidArgument(format!(
                "{} covariate names for {} covariates",
                names.len(),
                self.p
            )));
        }
        self.x_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Covariate dimension.
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn d(&self, i: usize) -> bool {
        self.d[i]
    }

    pub fn pi1(&self, i: usize) -> f64 {
        self.pi1[i]
    }

    /// Probability that the proposed policy takes action `t` at row `i`.
    pub fn pi_t(&self, i: usize, t: usize) -> f64 {
        if t == 1 {
            self.pi1[i]
        } else {
            1.0 - self.pi1[i]
        }
    }

    pub fn t(&self, i: usize) -> Option<bool> {
        self.t.as_ref().map(|t| t[i])
    }

    pub fn has_realized_t(&self) -> bool {
        self.t.is_some()
    }

    pub fn y(&self, i: usize) -> Option<bool> {
        self.y[i]
    }

    pub fn z(&self) -> Option<&Categorical> {
        self.z.as_ref()
    }

    pub fn w(&self) -> Option<&Categorical> {
        self.w.as_ref()
    }

    pub fn group(&self) -> Option<&Categorical> {
        self.group.as_ref()
    }

    /// Number of `d = 0` rows whose supplied outcome was discarded.
    pub fn masked_outcomes(&self) -> usize {
        self.masked_outcomes
    }

    pub fn missing_outcomes(&self) -> usize {
        self.y.iter().filter(|y| y.is_none()).count()
    }

    pub fn selected_count(&self) -> usize {
        self.d.iter().filter(|&&d| d).count()
    }

    /// Rows at the given indices (repeats allowed), in the given order.
    pub fn subset(&self, rows: &[usize]) -> ObservationalDataset {
        let mut x = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            x.extend_from_slice(self.x(i));
        }
        ObservationalDataset {
            p: self.p,
            x,
            d: rows.iter().map(|&i| self.d[i]).collect(),
            pi1: rows.iter().map(|&i| self.pi1[i]).collect(),
            t: self.t.as_ref().map(|t| rows.iter().map(|&i| t[i]).collect()),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            z: self.z.as_ref().map(|c| c.subset(rows)),
            w: self.w.as_ref().map(|c| c.subset(rows)),
            group: self.group.as_ref().map(|c| c.subset(rows)),
            x_names: self.x_names.clone(),
            masked_outcomes: 0,
        }
    }

    /// Replaces the proposed-policy probabilities, e.g. to compare a new
    /// candidate on the same observational sample.
    pub fn with_pi1(mut self, pi1: Vec<f64>) -> Result<Self> {
        if pi1.len() != self.len() {
            return Err(Error::InvalidArgument("pi1 length mismatch".into()));
        }
        if let Some((row, &value)) = pi1.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Pi1OutOfRange { row, value });
        }
        self.pi1 = pi1;
        self.t = None;
        Ok(self)
    }

    pub fn rows(&self) -> impl Iterator<Item = Row> + '_ {
        (0..self.len()).map(move |i| Row {
            x: self.x(i).to_vec(),
            d: self.d[i],
            pi1: self.pi1[i],
            t: self.t(i),
            y: self.y[i],
            z: self.z.as_ref().map(|c| c.label(i).to_string()),
            w: self.w.as_ref().map(|c| c.label(i).to_string()),
            group: self.group.as_ref().map(|c| c.label(i).to_string()),
        })
    }

    /// Writes the dataset as CSV with `x_*`, `d`, `pi1`, optional `t`, `y`
    /// (empty when missing), and whichever categorical columns are present.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.x_names.clone();
        header.extend(["d", "pi1"].map(String::from));
        if self.t.is_some() {
            header.push("t".into());
        }
        header.push("y".into());
        if self.z.is_some() {
            header.push("z".into());
        }
        if self.w.is_some() {
            header.push("w".into());
        }
        if self.group.is_some() {
            header.push("group".into());
        }
        writer.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            record.clear();
            record.extend(self.x(i).iter().map(|v| format_float(*v)));
            record.push(bit(self.d[i]));
            record.push(format_float(self.pi1[i]));
            if let Some(t) = self.t(i) {
                record.push(bit(t));
            }
            record.push(self.y[i].map(bit).unwrap_or_default());
            for cat in [&self.z, &self.w, &self.group].into_iter().flatten() {
                record.push(cat.label(i).to_string());
            }
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn missing_cat(row: usize, column: &str) -> Error {
    Error::InvalidArgument(format!("row {row}: {column} missing while other rows carry it"))
}

fn bit(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

pub(crate) fn format_float(v: f64) -> String {
    // Shortest representation that round-trips.
    format!("{v:?}")
}

/// Reads a CSV file into a validated dataset.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<ObservationalDataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: std::io::Read>(input: R, schema: &Schema) -> Result<ObservationalDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));

    let x_cols: Vec<(usize, String)> = if schema.x_columns.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with(&schema.x_prefix))
            .map(|(i, h)| (i, h.to_string()))
            .collect()
    } else {
        schema
            .x_columns
            .iter()
            .map(|c| require(c).map(|i| (i, c.clone())))
            .collect::<Result<_>>()?
    };
    if x_cols.is_empty() {
        return Err(Error::MissingColumn(format!("{}*", schema.x_prefix)));
    }
    let d_col = require(&schema.d)?;
    let y_col = require(&schema.y)?;
    let pi1_col = find(&schema.pi1);
    let t_col = find(&schema.t);
    if pi1_col.is_none() && t_col.is_none() {
        return Err(Error::MissingColumn(format!("{} or {}", schema.pi1, schema.t)));
    }
    let optional = |name: &Option<String>| -> Result<Option<usize>> {
        name.as_deref().map(require).transpose()
    };
    let z_col = optional(&schema.z)?;
    let w_col = optional(&schema.w)?;
    let group_col = optional(&schema.group)?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        if record.len() != headers.len() {
            return Err(Error::DimensionMismatch {
                row: i,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let mut x = Vec::with_capacity(x_cols.len());
        for (c, name) in &x_cols {
            let raw = field(*c);
            x.push(raw.parse::<f64>().map_err(|_| Error::Parse {
                row: i,
                column: name.clone(),
                value: raw.to_string(),
            })?);
        }
        let d = parse_binary(i, &schema.d, field(d_col))?;
        let t = t_col
            .map(|c| parse_binary(i, &schema.t, field(c)))
            .transpose()?;
        let pi1 = match pi1_col {
            Some(c) => {
                let raw = field(c);
                let v = raw.parse::<f64>().map_err(|_| Error::Parse {
                    row: i,
                    column: schema.pi1.clone(),
                    value: raw.to_string(),
                })?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Pi1OutOfRange { row: i, value: v });
                }
                v
            }
            None => {
                if t.expect("t column present") {
                    1.0
                } else {
                    0.0
                }
            }
        };
        let raw_y = field(y_col);
        let y = if raw_y.is_empty() || raw_y == "NA" {
            None
        } else {
            Some(parse_binary(i, &schema.y, raw_y)?)
        };
        if d && y.is_none() {
            return Err(Error::Parse {
                row: i,
                column: schema.y.clone(),
                value: "missing outcome on a d = 1 row".into(),
            });
        }
        let text = |c: Option<usize>| c.map(|c| field(c).to_string());
        rows.push(Row {
            x,
            d,
            pi1,
            t,
            y,
            z: text(z_col),
            w: text(w_col),
            group: text(group_col),
        });
    }
    let names = x_cols.into_iter().map(|(_, n)| n).collect();
    ObservationalDataset::from_rows(rows)?.with_x_names(names)
}

fn parse_binary(row: usize, column: &str, raw: &str) -> Result<bool> {
    match raw {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::NonBinary {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<ObservationalDataset> {
        read_dataset(text.as_bytes(), &Schema::default())
    }

    #[test]
    fn loads_four_rows_with_one_missing_outcome() {
        let ds = load("x_0,x_1,d,t,y\n0.1,1,1,1,1\n0.2,2,1,0,0\n0.3,3,0,1,\n0.4,4,1,1,1\n").unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.missing_outcomes(), 1);
        assert_eq!(ds.pi1(1), 0.0);
        assert_eq!(ds.pi1(2), 1.0);
        assert_eq!(ds.x(3), &[0.4, 4.0]);
    }

    #[test]
    fn outcome_on_unselected_row_is_masked() {
        let ds = load("x_0,d,t,y\n0,1,1,1\n1,0,0,1\n").unwrap();
        assert_eq!(ds.y(1), None);
        assert_eq!(ds.masked_outcomes(), 1);
    }

    #[test]
    fn na_is_a_missing_outcome() {
        let ds = load("x_0,d,pi1,y\n0,0,0.5,NA\n1,1,0.5,0\n").unwrap();
        assert_eq!(ds.missing_outcomes(), 1);
        assert_eq!(ds.masked_outcomes(), 0);
    }

    #[test]
    fn rejects_pi1_out_of_range() {
        let err = load("x_0,d,pi1,y\n0,1,1.3,1\n").unwrap_err();
        assert!(err.to_string().contains("pi1 out of range"), "{err}");
    }

    #[test]
    fn rejects_non_binary_columns() {
        assert!(matches!(
            load("x_0,d,t,y\n0,2,1,1\n"),
            Err(Error::NonBinary { .. })
        ));
        assert!(matches!(
            load("x_0,d,t,y\n0,1,true,1\n"),
            Err(Error::NonBinary { .. })
        ));
        assert!(matches!(
            load("x_0,d,t,y\n0,1,1,0.5\n"),
            Err(Error::NonBinary { .. })
        ));
    }

    #[test]
    fn rejects_missing_columns() {
        assert!(matches!(load("x_0,t,y\n0,1,1\n"), Err(Error::MissingColumn(c)) if c == "d"));
        assert!(matches!(load("x_0,d,y\n0,1,1\n"), Err(Error::MissingColumn(_))));
        assert!(matches!(load("a,d,t,y\n0,1,1,1\n"), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn rejects_inconsistent_dimension() {
        let rows = vec![
            Row::new(vec![0.0, 1.0], true, 0.5, Some(true)),
            Row::new(vec![0.0], true, 0.5, Some(true)),
        ];
        assert!(matches!(
            ObservationalDataset::from_rows(rows),
            Err(Error::DimensionMismatch { row: 1, .. })
        ));
    }

    #[test]
    fn categorical_columns_are_coded_by_sorted_label() {
        let schema = Schema {
            z: Some("judge".into()),
            group: Some("g".into()),
            ..Schema::default()
        };
        let ds = read_dataset(
            "x_0,d,pi1,y,judge,g\n0,1,0.5,1,b,u\n1,0,0.5,,a,v\n2,1,0.5,0,b,u\n".as_bytes(),
            &schema,
        )
        .unwrap();
        let z = ds.z().unwrap();
        assert_eq!(z.labels, vec!["a", "b"]);
        assert_eq!(z.codes, vec![1, 0, 1]);
        assert_eq!(ds.group().unwrap().levels(), 2);
    }

    #[test]
    fn subset_preserves_columns() {
        let ds = load("x_0,d,t,y\n0,1,1,1\n1,0,0,\n2,1,0,0\n").unwrap();
        let sub = ds.subset(&[2, 2, 0]);
        assert_eq!(sub.len(), 3);
        assert_eq!(sub.x(0), &[2.0]);
        assert_eq!(sub.t(2), Some(true));
        assert_eq!(sub.y(1), Some(false));
    }
}
