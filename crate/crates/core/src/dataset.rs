//! Reaction tables, role-tagged feature schemas, and split plans.
//!
//! A dataset is a comma-delimited table with a header row plus a JSON sidecar
//! mapping every feature column name to a molecule role. The reserved columns
//! `reaction_id`, `reaction_type`, `ddg` and (optionally) `transition_state`
//! are parsed into record fields; every other column is a numeric feature.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// Molecule role of a feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRole {
    Imine,
    Nucleophile,
    Catalyst,
    Solvent,
    ReactionVariable,
}

impl FeatureRole {
    /// All five roles, in a fixed display order.
    pub const ALL: [FeatureRole; 5] = [
        FeatureRole::Imine,
        FeatureRole::Nucleophile,
        FeatureRole::Catalyst,
        FeatureRole::Solvent,
        FeatureRole::ReactionVariable,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureRole::Imine => "imine",
            FeatureRole::Nucleophile => "nucleophile",
            FeatureRole::Catalyst => "catalyst",
            FeatureRole::Solvent => "solvent",
            FeatureRole::ReactionVariable => "reaction_variable",
        }
    }
}

impl fmt::Display for FeatureRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imine" => Ok(FeatureRole::Imine),
            "nucleophile" => Ok(FeatureRole::Nucleophile),
            "catalyst" => Ok(FeatureRole::Catalyst),
            "solvent" => Ok(FeatureRole::Solvent),
            "reaction_variable" => Ok(FeatureRole::ReactionVariable),
            other => Err(Error::Schema(format!("unknown feature role `{other}`"))),
        }
    }
}

/// Geometric isomer label of the imine transition state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionState {
    E,
    Z,
}

impl TransitionState {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransitionState::E => "E",
            TransitionState::Z => "Z",
        }
    }

    /// Class index used by classifiers (`E` = 0, `Z` = 1).
    pub fn class_index(&self) -> u32 {
        match self {
            TransitionState::E => 0,
            TransitionState::Z => 1,
        }
    }

    pub fn from_class_index(idx: u32) -> Option<TransitionState> {
        match idx {
            0 => Some(TransitionState::E),
            1 => Some(TransitionState::Z),
            _ => None,
        }
    }
}

/// Ordered list of feature columns with their roles.
///
/// Column order is fixed at construction and identical across every record
/// of a dataset; names are unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<(String, FeatureRole)>,
}

impl FeatureSchema {
    pub fn new(features: Vec<(String, FeatureRole)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (name, _) in &features {
            if !seen.insert(name.clone()) {
                return Err(Error::Schema(format!("duplicate feature name `{name}`")));
            }
        }
        Ok(FeatureSchema { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.features[index].0
    }

    pub fn role(&self, index: usize) -> FeatureRole {
        self.features[index].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, FeatureRole)> {
        self.features.iter().map(|(n, r)| (n.as_str(), *r))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|(n, _)| n == name)
    }

    /// Indices of all columns whose role is in `roles`, in schema order.
    pub fn indices_with_roles(&self, roles: &[FeatureRole]) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, (_, r))| roles.contains(r))
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of columns per role, in [`FeatureRole::ALL`] order.
    pub fn role_counts(&self) -> BTreeMap<FeatureRole, usize> {
        let mut counts = BTreeMap::new();
        for (_, role) in &self.features {
            *counts.entry(*role).or_insert(0) += 1;
        }
        counts
    }
}

/// One reaction: identifiers, role-tagged features aligned to a schema,
/// the activation-energy target in kcal/mol, and an optional isomer label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionRecord {
    pub reaction_id: String,
    pub reaction_type: String,
    pub features: Vec<f64>,
    pub ddg: f64,
    pub transition_state: Option<TransitionState>,
}

/// A schema plus the records that conform to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    records: Vec<ReactionRecord>,
}

impl Dataset {
    /// Builds a dataset, checking that every record matches the schema and
    /// that all values are finite and reaction ids unique.
    pub fn new(schema: FeatureSchema, records: Vec<ReactionRecord>) -> Result<Self> {
        let mut ids = HashSet::new();
        for rec in &records {
            if rec.features.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "record `{}` has {} features, schema has {}",
                    rec.reaction_id,
                    rec.features.len(),
                    schema.len()
                )));
            }
            if let Some(j) = rec.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse(format!(
                    "non-finite value in record `{}`, column `{}`",
                    rec.reaction_id,
                    schema.name(j)
                )));
            }
            if !rec.ddg.is_finite() {
                return Err(Error::Parse(format!(
                    "non-finite ddg in record `{}`",
                    rec.reaction_id
                )));
            }
            if !ids.insert(rec.reaction_id.clone()) {
                return Err(Error::Parse(format!(
                    "duplicate reaction_id `{}`",
                    rec.reaction_id
                )));
            }
        }
        Ok(Dataset { schema, records })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[ReactionRecord] {
        &self.records
    }

    pub fn n_records(&self) -> usize {
        self.records.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ddg).collect()
    }

    /// Values of feature column `j` in record order.
    pub fn feature_column(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.features[j]).collect()
    }

    /// New dataset holding clones of the records at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Distinct reaction types in first-occurrence order.
    pub fn reaction_types(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut types = Vec::new();
        for rec in &self.records {
            if seen.insert(rec.reaction_type.clone()) {
                types.push(rec.reaction_type.clone());
            }
        }
        types
    }

    /// Indices of all records of the given reaction type.
    pub fn indices_of_type(&self, reaction_type: &str) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.reaction_type == reaction_type)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Keeps exactly the columns whose role is in `roles`; order and targets
/// are preserved.
pub fn select_features(ds: &Dataset, roles: &[FeatureRole]) -> Result<Dataset> {
    if roles.is_empty() {
        return Err(Error::InvalidParam("role selection is empty".into()));
    }
    let keep = ds.schema.indices_with_roles(roles);
    if keep.is_empty() {
        return Err(Error::Schema(format!(
            "selecting roles {:?} yields zero columns",
            roles.iter().map(|r| r.as_str()).collect::<Vec<_>>()
        )));
    }
    let schema = FeatureSchema::new(
        keep.iter()
            .map(|&j| (ds.schema.name(j).to_string(), ds.schema.role(j)))
            .collect(),
    )?;
    let records = ds
        .records
        .iter()
        .map(|r| ReactionRecord {
            reaction_id: r.reaction_id.clone(),
            reaction_type: r.reaction_type.clone(),
            features: keep.iter().map(|&j| r.features[j]).collect(),
            ddg: r.ddg,
            transition_state: r.transition_state,
        })
        .collect();
    Ok(Dataset { schema, records })
}

const RESERVED_COLUMNS: [&str; 4] = ["reaction_id", "reaction_type", "ddg", "transition_state"];

/// Reads the JSON sidecar mapping feature names to roles.
pub fn load_schema_map(path: &Path) -> Result<BTreeMap<String, FeatureRole>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("schema file {}: {e}", path.display())))
}

/// Writes the JSON sidecar for a schema.
pub fn save_schema_map(schema: &FeatureSchema, path: &Path) -> Result<()> {
    let map: BTreeMap<&str, FeatureRole> = schema.iter().collect();
    let text = serde_json::to_string_pretty(&map)
        .map_err(|e| Error::Parse(format!("schema serialization: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Loads a dataset from a delimited table plus its schema sidecar.
///
/// Row order is preserved. Errors on a missing reserved column, a feature
/// column absent from the sidecar, a non-numeric or non-finite cell, or a
/// duplicate `reaction_id`.
pub fn load_dataset(table_path: &Path, schema_path: &Path) -> Result<Dataset> {
    let roles = load_schema_map(schema_path)?;
    load_dataset_with_roles(table_path, &roles)
}

/// As [`load_dataset`], with the name-to-role map supplied directly.
pub fn load_dataset_with_roles(
    table_path: &Path,
    roles: &BTreeMap<String, FeatureRole>,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(table_path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", table_path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let col = |name: &str| headers.iter().position(|h| h == name);
    let id_col = col("reaction_id")
        .ok_or_else(|| Error::Parse("missing reserved column `reaction_id`".into()))?;
    let type_col = col("reaction_type")
        .ok_or_else(|| Error::Parse("missing reserved column `reaction_type`".into()))?;
    let ddg_col = col("ddg").ok_or_else(|| Error::Parse("missing reserved column `ddg`".into()))?;
    let ts_col = col("transition_state");

    let mut feature_cols = Vec::new();
    let mut schema_entries = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if RESERVED_COLUMNS.contains(&name.as_str()) {
            continue;
        }
        let role = roles
            .get(name)
            .ok_or_else(|| Error::Schema(format!("unmapped column `{name}`")))?;
        feature_cols.push(j);
        schema_entries.push((name.clone(), *role));
    }
    let schema = FeatureSchema::new(schema_entries)?;

    let mut records = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("row {}: {e}", row_idx + 2)))?;
        let cell = |j: usize| row.get(j).unwrap_or("").trim();
        let parse_num = |j: usize| -> Result<f64> {
            let text = cell(j);
            let v: f64 = text.parse().map_err(|_| {
                Error::Parse(format!(
                    "non-numeric cell `{text}` at row {}, column `{}`",
                    row_idx + 2,
                    headers[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "non-finite value at row {}, column `{}`",
                    row_idx + 2,
                    headers[j]
                )));
            }
            Ok(v)
        };

        let transition_state = match ts_col {
            None => None,
            Some(j) => match cell(j) {
                "" => None,
                "E" => Some(TransitionState::E),
                "Z" => Some(TransitionState::Z),
                other => {
                    return Err(Error::Parse(format!(
                        "invalid transition_state `{other}` at row {}",
                        row_idx + 2
                    )))
                }
            },
        };

        records.push(ReactionRecord {
            reaction_id: cell(id_col).to_string(),
            reaction_type: cell(type_col).to_string(),
            features: feature_cols
                .iter()
                .map(|&j| parse_num(j))
                .collect::<Result<Vec<f64>>>()?,
            ddg: parse_num(ddg_col)?,
            transition_state,
        });
    }

    Dataset::new(schema, records)
}

/// Writes a dataset as a delimited table plus schema sidecar; re-loading the
/// pair yields an identical dataset.
pub fn save_dataset(ds: &Dataset, table_path: &Path, schema_path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(table_path)?;
    let mut header = vec![
        "reaction_id".to_string(),
        "reaction_type".to_string(),
        "ddg".to_string(),
        "transition_state".to_string(),
    ];
    header.extend(ds.schema.iter().map(|(n, _)| n.to_string()));
    writer
        .write_record(&header)
        .map_err(|e| Error::Parse(format!("table write: {e}")))?;
    for rec in &ds.records {
        let mut row = vec![
            rec.reaction_id.clone(),
            rec.reaction_type.clone(),
            format!("{}", rec.ddg),
            rec.transition_state
                .map(|t| t.as_str().to_string())
                .unwrap_or_default(),
        ];
        row.extend(rec.features.iter().map(|v| format!("{v}")));
        writer
            .write_record(&row)
            .map_err(|e| Error::Parse(format!("table write: {e}")))?;
    }
    writer.flush()?;
    save_schema_map(&ds.schema, schema_path)
}

/// A reproducible list of (train, test) index pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub seed: u64,
}

/// Repeated k-fold plan over `0..n`.
///
/// Each repeat shuffles the indices with a ChaCha8 generator seeded from
/// `(seed, repeat)` and assigns folds by contiguous slices of the shuffled
/// order; fold sizes differ by at most one. Pairs are ordered repeat-major.
pub fn kfold_plan(n: usize, k: usize, repeats: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParam(format!(
            "k ({k}) exceeds the number of records ({n})"
        )));
    }
    if repeats == 0 {
        return Err(Error::InvalidParam("repeats must be positive".into()));
    }
    let mut pairs = Vec::with_capacity(repeats * k);
    for r in 0..repeats {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = seeding::rng(seeding::derive_index(seed, r as u64));
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);

        let base = n / k;
        let extra = n % k;
        let mut start = 0;
        for f in 0..k {
            let size = base + usize::from(f < extra);
            let mut test: Vec<usize> = order[start..start + size].to_vec();
            let mut train: Vec<usize> = order[..start]
                .iter()
                .chain(order[start + size..].iter())
                .copied()
                .collect();
            test.sort_unstable();
            train.sort_unstable();
            pairs.push((train, test));
            start += size;
        }
    }
    Ok(SplitPlan { pairs, seed })
}

/// One pair per distinct reaction type: test = that type, train = the rest.
pub fn leave_one_type_out_plan(ds: &Dataset) -> Result<SplitPlan> {
    let types = ds.reaction_types();
    if types.len() < 2 {
        return Err(Error::InvalidParam(
            "leave-one-type-out needs at least 2 reaction types".into(),
        ));
    }
    let pairs = types
        .iter()
        .map(|t| {
            let test = ds.indices_of_type(t);
            let train = (0..ds.n_records()).filter(|i| !test.contains(i)).collect();
            (train, test)
        })
        .collect();
    Ok(SplitPlan { pairs, seed: 0 })
}
