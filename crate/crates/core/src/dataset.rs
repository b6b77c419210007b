//! Dataset loading, cleaning, and min-max normalization.
//!
//! Datasets are delimited text (comma or tab, auto-detected from the header
//! line) with one header row. A separate schema file assigns every column a
//! role, one `name:kind` line per column, with
//! `kind ∈ {numeric, categorical, effort, size_numeric, id, ignore}`.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Kind of a predictor feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// Role of a dataset column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Numeric,
    Categorical,
    /// The effort target. Exactly one per schema.
    Effort,
    /// Numeric predictor that doubles as the project size attribute
    /// (Function Points or equivalent) for size-based adaptation.
    SizeNumeric,
    Id,
    Ignore,
}

impl ColumnRole {
    fn parse(token: &str) -> Result<Self> {
        match token {
            "numeric" => Ok(ColumnRole::Numeric),
            "categorical" => Ok(ColumnRole::Categorical),
            "effort" => Ok(ColumnRole::Effort),
            "size_numeric" => Ok(ColumnRole::SizeNumeric),
            "id" => Ok(ColumnRole::Id),
            "ignore" => Ok(ColumnRole::Ignore),
            other => Err(Error::Schema(format!("unknown column kind `{other}`"))),
        }
    }

    /// Kind of the predictor this column contributes, if any.
    pub fn feature_kind(self) -> Option<FeatureKind> {
        match self {
            ColumnRole::Numeric | ColumnRole::SizeNumeric => Some(FeatureKind::Numeric),
            ColumnRole::Categorical => Some(FeatureKind::Categorical),
            _ => None,
        }
    }
}

/// One predictor column, in file order.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub name: String,
    pub kind: FeatureKind,
    /// True for the `size_numeric` column.
    pub is_size: bool,
}

/// Column layout of a dataset file.
#[derive(Debug, Clone)]
pub struct Schema {
    columns: Vec<(String, ColumnRole)>,
    predictors: Vec<Predictor>,
    /// Predictor index (not column index) of the size attribute, if any.
    size_predictor: Option<usize>,
}

impl Schema {
    pub fn new(columns: Vec<(String, ColumnRole)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (name, _) in &columns {
            if !seen.insert(name.clone()) {
                return Err(Error::Schema(format!("duplicate column name `{name}`")));
            }
        }
        let effort_cols: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, (_, r))| *r == ColumnRole::Effort)
            .map(|(i, _)| i)
            .collect();
        if effort_cols.len() != 1 {
            return Err(Error::Schema(format!(
                "schema must mark exactly one effort column, found {}",
                effort_cols.len()
            )));
        }
        let id_cols: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, (_, r))| *r == ColumnRole::Id)
            .map(|(i, _)| i)
            .collect();
        if id_cols.len() > 1 {
            return Err(Error::Schema("at most one id column allowed".into()));
        }
        let mut predictors = Vec::new();
        let mut size_predictor = None;
        for (name, role) in &columns {
            if let Some(kind) = role.feature_kind() {
                if *role == ColumnRole::SizeNumeric {
                    if size_predictor.is_some() {
                        return Err(Error::Schema("at most one size column allowed".into()));
                    }
                    size_predictor = Some(predictors.len());
                }
                predictors.push(Predictor {
                    name: name.clone(),
                    kind,
                    is_size: *role == ColumnRole::SizeNumeric,
                });
            }
        }
        Ok(Schema {
            predictors,
            size_predictor,
            columns,
        })
    }

    /// Parse a schema file: one `name:kind` line per column, in file order.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut columns = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, kind) = line.rsplit_once(':').ok_or_else(|| {
                Error::Schema(format!("line {}: expected `name:kind`", lineno + 1))
            })?;
            columns.push((name.trim().to_string(), ColumnRole::parse(kind.trim())?));
        }
        Schema::new(columns)
    }

    pub fn columns(&self) -> &[(String, ColumnRole)] {
        &self.columns
    }

    /// Predictor columns in file order (effort/id/ignore excluded).
    pub fn predictors(&self) -> &[Predictor] {
        &self.predictors
    }

    /// Predictor index of the size attribute, if one is declared.
    pub fn size_predictor(&self) -> Option<usize> {
        self.size_predictor
    }

    pub fn predictor_names(&self) -> Vec<String> {
        self.predictors.iter().map(|p| p.name.clone()).collect()
    }
}

/// One cell of a predictor vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(String),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Cat(s) => write!(f, "{s}"),
            Value::Missing => write!(f, "?"),
        }
    }
}

/// One historical software project.
///
/// `features` is aligned to [`Schema::predictors`]. `effort` is NaN while a
/// row still has a missing effort cell; [`remove_missing`] drops such rows.
#[derive(Debug, Clone)]
pub struct Project {
    pub id: String,
    pub features: Vec<Value>,
    pub effort: f64,
}

impl Project {
    pub fn has_missing(&self) -> bool {
        !self.effort.is_finite() || self.features.iter().any(Value::is_missing)
    }
}

/// A schema plus the projects that conform to it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: Schema,
    pub projects: Vec<Project>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    /// Raw size values, one per project, in dataset order.
    pub fn size_values(&self, strategy_name: &'static str) -> Result<Vec<f64>> {
        let idx = self
            .schema
            .size_predictor()
            .ok_or(Error::MissingSizeColumn(strategy_name))?;
        self.projects
            .iter()
            .map(|p| {
                p.features[idx]
                    .as_num()
                    .ok_or_else(|| Error::Parse(format!("project {}: size value missing", p.id)))
            })
            .collect()
    }
}

const MISSING_SENTINEL: &str = "?";

fn detect_delimiter(header: &str) -> char {
    if header.contains('\t') {
        '\t'
    } else {
        ','
    }
}

/// Load a delimited text file against a schema.
///
/// Missing cells (empty or `?`) are kept as [`Value::Missing`]; call
/// [`remove_missing`] before estimation.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("file has no header row".into()))?;
    let delim = detect_delimiter(header);
    let names: Vec<&str> = header.split(delim).map(str::trim).collect();
    let expected: Vec<&str> = schema.columns().iter().map(|(n, _)| n.as_str()).collect();
    if names != expected {
        return Err(Error::Schema(format!(
            "header {:?} does not match schema columns {:?}",
            names, expected
        )));
    }

    let mut projects = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(delim).map(str::trim).collect();
        if cells.len() != schema.columns().len() {
            return Err(Error::Parse(format!(
                "row {}: expected {} cells, found {}",
                lineno + 2,
                schema.columns().len(),
                cells.len()
            )));
        }
        let mut features = Vec::with_capacity(schema.predictors().len());
        let mut effort = f64::NAN;
        let mut id = format!("{}", lineno + 1);
        for (cell, (name, role)) in cells.iter().zip(schema.columns()) {
            let missing = cell.is_empty() || *cell == MISSING_SENTINEL;
            match role {
                ColumnRole::Ignore => {}
                ColumnRole::Id => {
                    if !missing {
                        id = cell.to_string();
                    }
                }
                ColumnRole::Effort => {
                    if !missing {
                        effort = cell.parse::<f64>().map_err(|_| {
                            Error::Parse(format!(
                                "row {}: effort `{cell}` is not numeric",
                                lineno + 2
                            ))
                        })?;
                        if !effort.is_finite() || effort <= 0.0 {
                            return Err(Error::Parse(format!(
                                "row {}: effort must be a positive number, got `{cell}`",
                                lineno + 2
                            )));
                        }
                    }
                }
                ColumnRole::Numeric | ColumnRole::SizeNumeric => {
                    features.push(if missing {
                        Value::Missing
                    } else {
                        Value::Num(cell.parse::<f64>().map_err(|_| {
                            Error::Parse(format!(
                                "row {}: `{cell}` in numeric column {name} is not numeric",
                                lineno + 2
                            ))
                        })?)
                    });
                }
                ColumnRole::Categorical => {
                    features.push(if missing {
                        Value::Missing
                    } else {
                        Value::Cat(cell.to_string())
                    });
                }
            }
        }
        projects.push(Project { id, features, effort });
    }
    let mut ids = std::collections::HashSet::new();
    for p in &projects {
        if !ids.insert(p.id.clone()) {
            return Err(Error::Parse(format!("duplicate project id `{}`", p.id)));
        }
    }
    Ok(Dataset {
        schema: schema.clone(),
        projects,
    })
}

/// Drop every project with a missing cell (or missing effort), keeping order.
pub fn remove_missing(d: &Dataset) -> Dataset {
    Dataset {
        schema: d.schema.clone(),
        projects: d
            .projects
            .iter()
            .filter(|p| !p.has_missing())
            .cloned()
            .collect(),
    }
}

/// Per-column min/max fitted from a reference set.
///
/// Only numeric predictor columns get a range; the effort target is never
/// normalized (effort differences stay in raw units downstream).
#[derive(Debug, Clone)]
pub struct Normalizer {
    /// Aligned to predictors; `None` for categorical columns.
    ranges: Vec<Option<(f64, f64)>>,
}

impl Normalizer {
    pub fn ranges(&self) -> &[Option<(f64, f64)>] {
        &self.ranges
    }
}

/// Record the observed min/max of every numeric predictor over `d`.
pub fn fit_normalizer(d: &Dataset) -> Result<Normalizer> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut ranges = Vec::with_capacity(d.schema.predictors().len());
    for (j, pred) in d.schema.predictors().iter().enumerate() {
        if pred.kind != FeatureKind::Numeric {
            ranges.push(None);
            continue;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for p in &d.projects {
            if let Some(v) = p.features[j].as_num() {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if min > max {
            return Err(Error::Parse(format!(
                "column {} has no numeric values to fit",
                pred.name
            )));
        }
        ranges.push(Some((min, max)));
    }
    Ok(Normalizer { ranges })
}

/// Map each numeric predictor value v to (v − min)/(max − min).
///
/// A constant column maps to 0. Values outside the fitted range are not
/// clamped. Categorical values and effort pass through unchanged.
pub fn apply_normalizer(n: &Normalizer, d: &Dataset) -> Result<Dataset> {
    if n.ranges.len() != d.schema.predictors().len() {
        return Err(Error::Schema(format!(
            "normalizer fitted on {} predictors, dataset has {}",
            n.ranges.len(),
            d.schema.predictors().len()
        )));
    }
    let projects = d
        .projects
        .iter()
        .map(|p| {
            let features = p
                .features
                .iter()
                .zip(&n.ranges)
                .map(|(v, range)| match (v, range) {
                    (Value::Num(x), Some((min, max))) => {
                        if max > min {
                            Value::Num((x - min) / (max - min))
                        } else {
                            Value::Num(0.0)
                        }
                    }
                    _ => v.clone(),
                })
                .collect();
            Project {
                id: p.id.clone(),
                features,
                effort: p.effort,
            }
        })
        .collect();
    Ok(Dataset {
        schema: d.schema.clone(),
        projects,
    })
}
