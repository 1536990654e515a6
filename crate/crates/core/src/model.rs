//! Variables, mixed-type datasets and edge-type classification.
//!
//! Variables are addressed by their position in the dataset. Names are carried
//! as metadata and must be unique; algorithms that need a canonical ordering
//! independent of column position use the name order (see [`name_ranks`]).

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

impl VariableMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        VariableMeta { name: name.into(), kind: VariableKind::Continuous }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        VariableMeta { name: name.into(), kind: VariableKind::Categorical { levels } }
    }

    /// Categorical variable with levels labelled `0..k`.
    pub fn categorical_k(name: impl Into<String>, k: usize) -> Self {
        Self::categorical(name, (0..k).map(|l| l.to_string()).collect())
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, VariableKind::Continuous)
    }

    pub fn level_count(&self) -> Option<usize> {
        match &self.kind {
            VariableKind::Continuous => None,
            VariableKind::Categorical { levels } => Some(levels.len()),
        }
    }

    /// Degrees of freedom the variable contributes to a likelihood-ratio test:
    /// 1 for a continuous variable, `k - 1` for a k-level categorical one.
    pub fn dof(&self) -> usize {
        match &self.kind {
            VariableKind::Continuous => 1,
            VariableKind::Categorical { levels } => levels.len() - 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if let VariableKind::Categorical { levels } = &self.kind {
            if levels.len() < 2 {
                return Err(Error::InvalidData(format!(
                    "categorical variable `{}` needs at least 2 levels",
                    self.name
                )));
            }
            let distinct: HashSet<&String> = levels.iter().collect();
            if distinct.len() != levels.len() {
                return Err(Error::InvalidData(format!(
                    "categorical variable `{}` has duplicate level labels",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Continuous(Vec<f64>),
    /// Level indices in `0..k`.
    Categorical(Vec<u32>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Continuous(v) => Column::Continuous(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// Column-typed sample matrix. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    variables: Vec<VariableMeta>,
    columns: Vec<Column>,
    n: usize,
}

impl MixedDataset {
    pub fn new(variables: Vec<VariableMeta>, columns: Vec<Column>) -> Result<Self> {
        if variables.len() != columns.len() {
            return Err(Error::InvalidData(format!(
                "{} variables but {} columns",
                variables.len(),
                columns.len()
            )));
        }
        if variables.is_empty() {
            return Err(Error::InvalidData("dataset has no variables".into()));
        }
        let mut names = HashSet::new();
        for v in &variables {
            v.validate()?;
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidData(format!("duplicate variable name `{}`", v.name)));
            }
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no samples".into()));
        }
        for (v, c) in variables.iter().zip(&columns) {
            if c.len() != n {
                return Err(Error::InvalidData(format!(
                    "column `{}` has {} rows, expected {}",
                    v.name,
                    c.len(),
                    n
                )));
            }
            match (&v.kind, c) {
                (VariableKind::Continuous, Column::Continuous(_)) => {}
                (VariableKind::Categorical { levels }, Column::Categorical(vals)) => {
                    if let Some(bad) = vals.iter().find(|&&x| x as usize >= levels.len()) {
                        return Err(Error::InvalidData(format!(
                            "column `{}` has level index {} but only {} levels",
                            v.name,
                            bad,
                            levels.len()
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidData(format!(
                        "column `{}` does not match its declared kind",
                        v.name
                    )))
                }
            }
        }
        Ok(MixedDataset { variables, columns, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &VariableMeta {
        &self.variables[i]
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn continuous(&self, i: usize) -> Option<&[f64]> {
        match &self.columns[i] {
            Column::Continuous(v) => Some(v),
            Column::Categorical(_) => None,
        }
    }

    pub fn categorical(&self, i: usize) -> Option<&[u32]> {
        match &self.columns[i] {
            Column::Categorical(v) => Some(v),
            Column::Continuous(_) => None,
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Rows `rows` of every column, in the given order. Variable metadata
    /// (including the full level sets) is kept as is.
    pub fn subsample(&self, rows: &[usize]) -> MixedDataset {
        assert!(!rows.is_empty(), "subsample needs at least one row");
        MixedDataset {
            variables: self.variables.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n: rows.len(),
        }
    }

    /// Column `j` of the result is column `order[j]` of `self`.
    pub fn permute_columns(&self, order: &[usize]) -> MixedDataset {
        assert_eq!(order.len(), self.n_vars());
        MixedDataset {
            variables: order.iter().map(|&i| self.variables[i].clone()).collect(),
            columns: order.iter().map(|&i| self.columns[i].clone()).collect(),
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeType {
    Cc,
    Cd,
    Dd,
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeType::Cc => "cc",
            EdgeType::Cd => "cd",
            EdgeType::Dd => "dd",
        })
    }
}

pub fn edge_type(a: &VariableMeta, b: &VariableMeta) -> EdgeType {
    match (a.is_continuous(), b.is_continuous()) {
        (true, true) => EdgeType::Cc,
        (false, false) => EdgeType::Dd,
        _ => EdgeType::Cd,
    }
}

/// Position of each variable in the lexicographic order of names.
pub fn name_ranks(variables: &[VariableMeta]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..variables.len()).collect();
    order.sort_by(|&a, &b| variables[a].name.cmp(&variables[b].name));
    let mut rank = vec![0; variables.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}
