//! Random forests and boosted regression trees.
//!
//! Forest trees are fit on bootstrap resamples with per-node feature
//! subsampling; prediction averages tree outputs (regression) or takes a
//! majority vote (classification). Feature importances are the total
//! impurity decrease per feature across all trees, normalized to sum to 100.
//!
//! Boosting follows the AdaBoost.R2 scheme with linear loss; the final
//! prediction is the stage-weighted average of tree outputs rather than the
//! weighted median.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seeding;
use crate::tree::{fit_on_table, fit_targets, DecisionTree, FeatureTable, Task, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    /// Features considered per split; `None` uses `ceil(p/3)` for regression
    /// and `ceil(sqrt(p))` for classification.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            mtry: None,
            bootstrap: true,
            max_depth: None,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

impl RfParams {
    pub fn with_seed(seed: u64) -> Self {
        RfParams {
            seed,
            ..Default::default()
        }
    }

    fn resolve_mtry(&self, p: usize, task: Task) -> usize {
        match self.mtry {
            Some(m) => m,
            None => match task {
                Task::Regression => p.div_ceil(3),
                Task::Classification => (p as f64).sqrt().ceil() as usize,
            },
        }
        .clamp(1, p)
    }
}

/// Forest hyperparameters without a seed, for callers (protocol runners,
/// composite training) that derive per-fit seeds themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfSettings {
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for RfSettings {
    fn default() -> Self {
        let p = RfParams::default();
        RfSettings {
            n_trees: p.n_trees,
            mtry: p.mtry,
            bootstrap: p.bootstrap,
            max_depth: p.max_depth,
            min_samples_leaf: p.min_samples_leaf,
        }
    }
}

impl RfSettings {
    pub fn params(&self, seed: u64) -> RfParams {
        RfParams {
            n_trees: self.n_trees,
            mtry: self.mtry,
            bootstrap: self.bootstrap,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            seed,
        }
    }
}

/// Boosting hyperparameters without a seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostSettings {
    pub n_stages: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub mtry: Option<usize>,
}

impl Default for BoostSettings {
    fn default() -> Self {
        let p = BoostParams::default();
        BoostSettings {
            n_stages: p.n_stages,
            max_depth: p.max_depth,
            min_samples_leaf: p.min_samples_leaf,
            mtry: p.mtry,
        }
    }
}

impl BoostSettings {
    pub fn params(&self, seed: u64) -> BoostParams {
        BoostParams {
            n_stages: self.n_stages,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            mtry: self.mtry,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    params: RfParams,
    /// Per-feature impurity-decrease importances, normalized to sum to 100
    /// (all zero when no tree contains a split).
    importances: Vec<f64>,
    task: Task,
}

pub fn fit_rf(ds: &Dataset, params: &RfParams, task: Task) -> Result<RandomForest> {
    if ds.n_records() == 0 {
        return Err(Error::Numerical("cannot fit a forest on an empty dataset".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParam("n_trees must be at least 1".into()));
    }
    let table = FeatureTable::from_dataset(ds);
    let targets = fit_targets(ds, task)?;
    let n = ds.n_records();
    let p = ds.n_features();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        mtry: params.resolve_mtry(p, task),
    };

    // Per-tree seeds are derived from (forest seed, tree index) so parallel
    // fitting reproduces the sequential result.
    let trees: Vec<DecisionTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = seeding::derive_index(params.seed, t as u64);
            let indices: Vec<usize> = if params.bootstrap {
                let mut rng = seeding::rng(seeding::derive(tree_seed, "bootstrap"));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_on_table(
                &table,
                &targets,
                &indices,
                tree_params,
                seeding::derive(tree_seed, "nodes"),
                task,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut importances = vec![0.0; p];
    for tree in &trees {
        tree.accumulate_gains(&mut importances);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v *= 100.0 / total);
    }

    Ok(RandomForest {
        trees,
        params: *params,
        importances,
        task,
    })
}

pub(crate) fn majority_vote(labels: impl IntoIterator<Item = u32>) -> u32 {
    let mut counts: Vec<(u32, usize)> = Vec::new();
    for label in labels {
        match counts.iter_mut().find(|(l, _)| *l == label) {
            Some((_, c)) => *c += 1,
            None => counts.push((label, 1)),
        }
    }
    // highest count; ties go to the lowest label
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
        .expect("at least one label")
}

impl RandomForest {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn params(&self) -> &RfParams {
        &self.params
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    /// Importances paired with feature names, sorted descending.
    pub fn ranked_importances(&self, ds: &Dataset) -> Vec<(String, f64)> {
        let mut ranked: Vec<(String, f64)> = self
            .importances
            .iter()
            .enumerate()
            .map(|(j, &v)| (ds.schema().name(j).to_string(), v))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
    }

    /// Mean tree output (regression only).
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if self.task != Task::Regression {
            return Err(Error::InvalidParam("forest was fit for classification".into()));
        }
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.predict(features)?;
        }
        Ok(sum / self.trees.len() as f64)
    }

    /// Majority vote over tree labels; ties go to the lowest label.
    pub fn predict_label(&self, features: &[f64]) -> Result<u32> {
        if self.task != Task::Classification {
            return Err(Error::InvalidParam("forest was fit for regression".into()));
        }
        let labels = self
            .trees
            .iter()
            .map(|t| t.predict_label(features))
            .collect::<Result<Vec<u32>>>()?;
        Ok(majority_vote(labels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_stages: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_stages: 100,
            max_depth: Some(3),
            min_samples_leaf: 1,
            mtry: None,
            seed: 0,
        }
    }
}

impl BoostParams {
    pub fn with_seed(seed: u64) -> Self {
        BoostParams {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    trees: Vec<DecisionTree>,
    stage_weights: Vec<f64>,
    params: BoostParams,
}

/// Average loss below which a stage counts as perfect and boosting stops.
const PERFECT_STAGE_LOSS: f64 = 1e-12;

/// AdaBoost.R2 with linear loss: each stage fits a tree on a weighted
/// bootstrap of the training set, stops early when the weighted average
/// loss reaches 0.5 or vanishes, and reweights samples by `β^(1−loss)`.
pub fn fit_boost(ds: &Dataset, params: &BoostParams) -> Result<BoostedTrees> {
    if ds.n_records() == 0 {
        return Err(Error::Numerical("cannot fit boosted trees on an empty dataset".into()));
    }
    if params.n_stages == 0 {
        return Err(Error::InvalidParam("n_stages must be at least 1".into()));
    }
    let table = FeatureTable::from_dataset(ds);
    let targets = ds.targets();
    let n = ds.n_records();
    let p = ds.n_features();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        mtry: params.mtry.unwrap_or(p).clamp(1, p),
    };

    let mut sample_weights = vec![1.0 / n as f64; n];
    let mut trees = Vec::new();
    let mut stage_weights = Vec::new();

    for stage in 0..params.n_stages {
        let stage_seed = seeding::derive_index(params.seed, stage as u64);
        let mut rng = seeding::rng(seeding::derive(stage_seed, "bootstrap"));
        let sampler = WeightedIndex::new(&sample_weights)
            .map_err(|e| Error::Numerical(format!("boost stage {stage}: {e}")))?;
        let indices: Vec<usize> = (0..n).map(|_| rng.sample(&sampler)).collect();

        let tree = fit_on_table(
            &table,
            &targets,
            &indices,
            tree_params,
            seeding::derive(stage_seed, "nodes"),
            Task::Regression,
        )?;

        // linear loss on the full training set, scaled by the worst error
        let errors: Vec<f64> = (0..n)
            .map(|i| (tree.predict(&table_row(&table, i)).expect("fit schema") - targets[i]).abs())
            .collect();
        let max_error = errors.iter().fold(0.0f64, |a, &b| a.max(b));
        let losses: Vec<f64> = if max_error > 0.0 {
            errors.iter().map(|e| e / max_error).collect()
        } else {
            vec![0.0; n]
        };
        let avg_loss: f64 = sample_weights
            .iter()
            .zip(&losses)
            .map(|(w, l)| w * l)
            .sum();

        if avg_loss < PERFECT_STAGE_LOSS {
            // perfect stage: keep it with the loss floored so the weight is finite
            let beta = PERFECT_STAGE_LOSS / (1.0 - PERFECT_STAGE_LOSS);
            trees.push(tree);
            stage_weights.push((1.0 / beta).ln());
            break;
        }
        if avg_loss >= 0.5 {
            if trees.is_empty() {
                // a degenerate first stage is kept so at least one stage exists
                trees.push(tree);
                stage_weights.push(1.0);
            }
            break;
        }

        let beta = avg_loss / (1.0 - avg_loss);
        trees.push(tree);
        stage_weights.push((1.0 / beta).ln());

        for (w, l) in sample_weights.iter_mut().zip(&losses) {
            *w *= beta.powf(1.0 - l);
        }
        let total: f64 = sample_weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::Numerical(format!(
                "boost stage {stage}: sample weights degenerated (sum {total})"
            )));
        }
        sample_weights.iter_mut().for_each(|w| *w /= total);
    }

    Ok(BoostedTrees {
        trees,
        stage_weights,
        params: *params,
    })
}

fn table_row(table: &FeatureTable, i: usize) -> Vec<f64> {
    table.cols.iter().map(|c| c[i]).collect()
}

pub(crate) fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| v * w)
        .sum::<f64>()
        / total
}

impl BoostedTrees {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn stage_weights(&self) -> &[f64] {
        &self.stage_weights
    }

    pub fn params(&self) -> &BoostParams {
        &self.params
    }

    /// Stage-weighted average of tree outputs.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        let preds = self
            .trees
            .iter()
            .map(|t| t.predict(features))
            .collect::<Result<Vec<f64>>>()?;
        Ok(weighted_mean(&preds, &self.stage_weights))
    }
}
