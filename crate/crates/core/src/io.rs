//! Reading and writing datasets and graphs.
//!
//! A dataset is a CSV file whose header holds the variable names, with
//! categorical values written as level labels. The optional `meta.json`
//! sidecar fixes the kinds and level sets:
//!
//! ```json
//! {"variables": [
//!   {"name": "C1", "kind": "continuous"},
//!   {"name": "D1", "kind": "categorical", "levels": ["0", "1", "2"]}
//! ]}
//! ```
//!
//! Without it, a column is continuous when every value parses as a number
//! and categorical otherwise, with its distinct labels sorted as levels.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MarkedGraph;
use crate::model::{Column, MixedDataset, VariableKind, VariableMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub variables: Vec<VariableMeta>,
}

pub fn write_data_csv<W: Write>(data: &MixedDataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(data.variables().iter().map(|v| v.name.as_str()))?;
    let mut row = Vec::with_capacity(data.n_vars());
    for i in 0..data.n() {
        row.clear();
        for j in 0..data.n_vars() {
            row.push(match (data.column(j), &data.variable(j).kind) {
                (Column::Continuous(v), _) => v[i].to_string(),
                (Column::Categorical(v), VariableKind::Categorical { levels }) => levels[v[i] as usize].clone(),
                _ => unreachable!("dataset columns match their kinds"),
            });
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_data_csv<R: Read>(r: R, meta: Option<&[VariableMeta]>) -> Result<MixedDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate() {
            raw[j].push(field.to_string());
        }
    }
    let variables: Vec<VariableMeta> = match meta {
        Some(m) => {
            if m.len() != header.len() || m.iter().zip(&header).any(|(v, h)| &v.name != h) {
                return Err(Error::InvalidData("CSV header does not match the metadata".into()));
            }
            m.to_vec()
        }
        None => header.iter().zip(&raw).map(|(name, vals)| infer_kind(name, vals)).collect(),
    };
    let mut columns = Vec::with_capacity(variables.len());
    for (v, vals) in variables.iter().zip(&raw) {
        columns.push(match &v.kind {
            VariableKind::Continuous => Column::Continuous(
                vals.iter()
                    .enumerate()
                    .map(|(i, s)| {
                        s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                            Error::InvalidData(format!("row {} of `{}`: `{s}` is not a finite number", i + 1, v.name))
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
            VariableKind::Categorical { levels } => {
                let index: HashMap<&str, u32> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
                Column::Categorical(
                    vals.iter()
                        .enumerate()
                        .map(|(i, s)| {
                            index.get(s.as_str()).copied().ok_or_else(|| {
                                Error::InvalidData(format!("row {} of `{}`: unknown level `{s}`", i + 1, v.name))
                            })
                        })
                        .collect::<Result<_>>()?,
                )
            }
        });
    }
    MixedDataset::new(variables, columns)
}

fn infer_kind(name: &str, vals: &[String]) -> VariableMeta {
    if vals.iter().all(|s| s.parse::<f64>().is_ok_and(f64::is_finite)) {
        VariableMeta::continuous(name)
    } else {
        let levels: BTreeSet<&String> = vals.iter().collect();
        VariableMeta::categorical(name, levels.into_iter().cloned().collect())
    }
}

pub fn read_meta(path: &Path) -> Result<Vec<VariableMeta>> {
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(meta.variables)
}

pub fn write_meta(path: &Path, variables: &[VariableMeta]) -> Result<()> {
    let text = serde_json::to_string_pretty(&DatasetMeta { variables: variables.to_vec() })?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// `meta.json` next to `data`, if present.
pub fn sibling_meta(data: &Path) -> Option<PathBuf> {
    let p = data.parent().unwrap_or(Path::new(".")).join("meta.json");
    p.is_file().then_some(p)
}

/// Reads a dataset, taking kinds from `meta` when given, else from a
/// sibling `meta.json`, else by inference.
pub fn read_dataset(data: &Path, meta: Option<&Path>) -> Result<MixedDataset> {
    let meta_path = meta.map(Path::to_path_buf).or_else(|| sibling_meta(data));
    let variables = meta_path.as_deref().map(read_meta).transpose()?;
    read_data_csv(fs::File::open(data)?, variables.as_deref())
}

/// Writes `data.csv` and `meta.json` into `dir`.
pub fn write_dataset(dir: &Path, data: &MixedDataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_data_csv(data, fs::File::create(dir.join("data.csv"))?)?;
    write_meta(&dir.join("meta.json"), data.variables())
}

pub fn read_graph(path: &Path, meta: Option<&[VariableMeta]>) -> Result<MarkedGraph> {
    MarkedGraph::from_text(&fs::read_to_string(path)?, meta)
}

pub fn write_graph(path: &Path, g: &MarkedGraph) -> Result<()> {
    fs::write(path, g.to_text())?;
    Ok(())
}
