//! Metrics and evaluation protocols: repeated k-fold cross-validation,
//! leave-one-reaction-type-out, grouped out-of-sample evaluation, and the
//! transition-state classification experiment.
//!
//! All runners are pure functions of (dataset, config, seed). The reported
//! spread across folds is the population standard deviation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::composite::{train_composite, Choice, CompositeConfig, GateDecision};
use crate::dataset::{self, select_features, Dataset, FeatureRole};
use crate::ensemble::{fit_boost, fit_rf, BoostSettings, BoostedTrees, RandomForest, RfSettings};
use crate::error::{Error, Result};
use crate::linear::{self, LassoModel};
use crate::seeding;
use crate::tree::{fit_tree, DecisionTree, Task, TreeParams};
use crate::composite::LassoTrainConfig;

/// Regression quality measures for one prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    pub mae: f64,
    /// Coefficient of determination; `None` when the targets are constant.
    pub r2: Option<f64>,
    /// Squared Pearson correlation; `None` when either side is constant.
    pub r2_pearson: Option<f64>,
    pub n: usize,
}

pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricReport> {
    if y_true.is_empty() {
        return Err(Error::InvalidParam("metrics need at least one pair".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidParam(format!(
            "length mismatch: {} targets vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let n = y_true.len() as f64;
    let mse = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum::<f64>()
        / n;
    let mae = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).abs())
        .sum::<f64>()
        / n;

    let mean_t = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean_t).powi(2)).sum();
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).powi(2))
        .sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);

    let mean_p = y_pred.iter().sum::<f64>() / n;
    let var_p: f64 = y_pred.iter().map(|p| (p - mean_p).powi(2)).sum();
    let r2_pearson = (ss_tot > 0.0 && var_p > 0.0).then(|| {
        let cov: f64 = y_true
            .iter()
            .zip(y_pred)
            .map(|(t, p)| (t - mean_t) * (p - mean_p))
            .sum();
        (cov * cov) / (ss_tot * var_p)
    });

    Ok(MetricReport {
        mse,
        mae,
        r2,
        r2_pearson,
        n: y_true.len(),
    })
}

/// Which base learner a cross-validation run trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Lasso(LassoTrainConfig),
    Tree {
        max_depth: Option<usize>,
        min_samples_leaf: usize,
    },
    RandomForest(RfSettings),
    BoostedTrees(BoostSettings),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Lasso(_) => "lasso",
            ModelSpec::Tree { .. } => "tree",
            ModelSpec::RandomForest(_) => "rf",
            ModelSpec::BoostedTrees(_) => "boost",
        }
    }
}

enum Fitted {
    Lasso(LassoModel),
    Tree(DecisionTree),
    Forest(RandomForest),
    Boost(BoostedTrees),
}

impl Fitted {
    fn predict(&self, features: &[f64]) -> Result<f64> {
        match self {
            Fitted::Lasso(m) => linear::predict_lasso(m, features),
            Fitted::Tree(m) => m.predict(features),
            Fitted::Forest(m) => m.predict(features),
            Fitted::Boost(m) => m.predict(features),
        }
    }
}

fn fit_spec(ds: &Dataset, spec: &ModelSpec, seed: u64) -> Result<Fitted> {
    match spec {
        ModelSpec::Lasso(cfg) => {
            let solver = crate::linear::LassoConfig {
                tol: cfg.tol,
                max_iter: cfg.max_iter,
            };
            let grid = match &cfg.grid {
                Some(g) => g.clone(),
                None => linear::default_lambda_grid(ds)?,
            };
            let folds = cfg.cv_folds.min(ds.n_records());
            let (lambda, _) =
                linear::select_lambda(ds, &grid, folds, seeding::derive(seed, "lambda"), &solver)?;
            Ok(Fitted::Lasso(linear::fit_lasso(ds, lambda, &solver)?))
        }
        ModelSpec::Tree {
            max_depth,
            min_samples_leaf,
        } => {
            let params = TreeParams {
                max_depth: *max_depth,
                min_samples_leaf: *min_samples_leaf,
                mtry: ds.n_features(),
            };
            Ok(Fitted::Tree(fit_tree(ds, params, seed, Task::Regression)?))
        }
        ModelSpec::RandomForest(settings) => Ok(Fitted::Forest(fit_rf(
            ds,
            &settings.params(seed),
            Task::Regression,
        )?)),
        ModelSpec::BoostedTrees(settings) => {
            Ok(Fitted::Boost(fit_boost(ds, &settings.params(seed))?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub train: MetricReport,
    pub test: MetricReport,
}

/// Per-fold metrics plus the protocol descriptor; aggregate statistics are
/// recomputed from the stored folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub protocol: String,
    pub model: String,
    pub seed: u64,
    pub folds: Vec<FoldMetrics>,
}

/// Mean and population standard deviation of the defined entries.
pub fn mean_std(values: impl IntoIterator<Item = Option<f64>>) -> Option<(f64, f64)> {
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    if defined.is_empty() {
        return None;
    }
    let n = defined.len() as f64;
    let mean = defined.iter().sum::<f64>() / n;
    let var = defined.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

impl CvSummary {
    pub fn stat(&self, f: impl Fn(&FoldMetrics) -> Option<f64>) -> Option<(f64, f64)> {
        mean_std(self.folds.iter().map(f))
    }

    pub fn test_mse(&self) -> (f64, f64) {
        self.stat(|m| Some(m.test.mse)).expect("non-empty folds")
    }

    pub fn test_mae(&self) -> (f64, f64) {
        self.stat(|m| Some(m.test.mae)).expect("non-empty folds")
    }

    pub fn test_r2(&self) -> Option<(f64, f64)> {
        self.stat(|m| m.test.r2)
    }

    pub fn train_r2(&self) -> Option<(f64, f64)> {
        self.stat(|m| m.train.r2)
    }
}

fn evaluate_on(ds: &Dataset, indices: &[usize], model: &Fitted) -> Result<MetricReport> {
    let mut y_true = Vec::with_capacity(indices.len());
    let mut y_pred = Vec::with_capacity(indices.len());
    for &i in indices {
        let rec = &ds.records()[i];
        y_true.push(rec.ddg);
        y_pred.push(model.predict(&rec.features)?);
    }
    metrics(&y_true, &y_pred)
}

/// Repeated k-fold cross-validation: trains the spec on each fold's training
/// half and evaluates on both halves. Fold-level model seeds derive from
/// (seed, pair index), so the run is reproducible and order-independent.
pub fn run_repeated_kfold(
    ds: &Dataset,
    spec: &ModelSpec,
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<CvSummary> {
    let plan = dataset::kfold_plan(ds.n_records(), k, repeats, seeding::derive(seed, "plan"))?;
    let folds: Vec<FoldMetrics> = plan
        .pairs
        .par_iter()
        .enumerate()
        .map(|(idx, (train_idx, test_idx))| {
            let train = ds.subset(train_idx);
            let model = fit_spec(&train, spec, seeding::derive_index(seed, idx as u64))?;
            Ok(FoldMetrics {
                train: evaluate_on(ds, train_idx, &model)?,
                test: evaluate_on(ds, test_idx, &model)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvSummary {
        protocol: format!("kfold k={k} repeats={repeats}"),
        model: spec.name().to_string(),
        seed,
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotoTypeRow {
    pub reaction_type: String,
    pub n_test: usize,
    pub decision: GateDecision,
    pub mae_composite: f64,
    pub mae_lasso: f64,
    pub mae_rf_overall: f64,
    pub mae_rf_nucleophile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotoReport {
    pub rows: Vec<LotoTypeRow>,
    pub avg_composite: f64,
    pub avg_lasso: f64,
    pub avg_rf_overall: f64,
    pub avg_rf_nucleophile: f64,
}

impl LotoReport {
    /// Average per-type advantage of the composite over each sub-model
    /// (positive means the composite is better).
    pub fn gaps(&self) -> (f64, f64, f64) {
        (
            self.avg_lasso - self.avg_composite,
            self.avg_rf_overall - self.avg_composite,
            self.avg_rf_nucleophile - self.avg_composite,
        )
    }
}

fn mae_of(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (t, p) in pairs {
        sum += (t - p).abs();
        n += 1;
    }
    sum / n as f64
}

/// Leave-one-reaction-type-out: for each held-out type, trains the composite
/// on the remaining types and reports its grouped MAE next to each individual
/// sub-model applied standalone.
pub fn run_leave_one_type_out(ds: &Dataset, cfg: &CompositeConfig) -> Result<LotoReport> {
    let plan = dataset::leave_one_type_out_plan(ds)?;
    let types = ds.reaction_types();
    let rows: Vec<LotoTypeRow> = plan
        .pairs
        .par_iter()
        .zip(&types)
        .enumerate()
        .map(|(idx, ((train_idx, test_idx), reaction_type))| {
            let train = ds.subset(train_idx);
            let fold_cfg = CompositeConfig {
                seed: seeding::derive_index(cfg.seed, idx as u64),
                ..cfg.clone()
            };
            let model = train_composite(&train, &fold_cfg)?;

            let test_rows: Vec<&[f64]> = test_idx
                .iter()
                .map(|&i| ds.records()[i].features.as_slice())
                .collect();
            let targets: Vec<f64> = test_idx.iter().map(|&i| ds.records()[i].ddg).collect();
            let (predictions, decision) = model.predict_group(&test_rows)?;

            let standalone = |choice: Choice| -> Result<f64> {
                let preds = test_rows
                    .iter()
                    .map(|row| model.predict_with(choice, row))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(mae_of(targets.iter().copied().zip(preds)))
            };

            Ok(LotoTypeRow {
                reaction_type: reaction_type.clone(),
                n_test: test_idx.len(),
                decision,
                mae_composite: mae_of(targets.iter().copied().zip(predictions)),
                mae_lasso: standalone(Choice::Lasso)?,
                mae_rf_overall: standalone(Choice::OverallRf)?,
                mae_rf_nucleophile: standalone(Choice::NucleophileRf)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let avg = |f: fn(&LotoTypeRow) -> f64| {
        rows.iter().map(f).sum::<f64>() / rows.len() as f64
    };
    Ok(LotoReport {
        avg_composite: avg(|r| r.mae_composite),
        avg_lasso: avg(|r| r.mae_lasso),
        avg_rf_overall: avg(|r| r.mae_rf_overall),
        avg_rf_nucleophile: avg(|r| r.mae_rf_nucleophile),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OosTypeRow {
    pub reaction_type: String,
    pub n: usize,
    pub decision: GateDecision,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OosReport {
    pub rows: Vec<OosTypeRow>,
    pub pooled: MetricReport,
    /// (measured, predicted) pairs in test record order, for scatter plots.
    pub pairs: Vec<(f64, f64)>,
}

/// Trains on `train`, then gates and predicts each reaction type of `test`
/// as a group.
pub fn run_out_of_sample(
    train: &Dataset,
    test: &Dataset,
    cfg: &CompositeConfig,
) -> Result<OosReport> {
    if train.schema() != test.schema() {
        return Err(Error::Schema(
            "train and test feature schemas do not match".into(),
        ));
    }
    if test.n_records() == 0 {
        return Err(Error::InvalidParam("test set is empty".into()));
    }
    let model = train_composite(train, cfg)?;

    let mut rows = Vec::new();
    let mut pairs: Vec<(f64, f64)> = vec![(f64::NAN, f64::NAN); test.n_records()];
    for reaction_type in test.reaction_types() {
        let indices = test.indices_of_type(&reaction_type);
        let test_rows: Vec<&[f64]> = indices
            .iter()
            .map(|&i| test.records()[i].features.as_slice())
            .collect();
        let (predictions, decision) = model.predict_group(&test_rows)?;
        let targets: Vec<f64> = indices.iter().map(|&i| test.records()[i].ddg).collect();
        for (&i, (&t, &p)) in indices.iter().zip(targets.iter().zip(&predictions)) {
            pairs[i] = (t, p);
        }
        rows.push(OosTypeRow {
            reaction_type,
            n: indices.len(),
            decision,
            mae: mae_of(targets.into_iter().zip(predictions)),
        });
    }
    let (measured, predicted): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    Ok(OosReport {
        rows,
        pooled: metrics(&measured, &predicted)?,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EzReport {
    /// (train accuracy, test accuracy) per fold.
    pub folds: Vec<(f64, f64)>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// Transition-state classification: a random-forest classifier on the
/// catalyst, nucleophile and solvent features (reaction variables included
/// unless excluded), evaluated by k-fold cross-validation.
pub fn run_ez_experiment(
    ds: &Dataset,
    k: usize,
    seed: u64,
    include_reaction_variables: bool,
    rf: &RfSettings,
) -> Result<EzReport> {
    if let Some(rec) = ds.records().iter().find(|r| r.transition_state.is_none()) {
        return Err(Error::InvalidParam(format!(
            "record `{}` has no transition_state label",
            rec.reaction_id
        )));
    }
    let mut roles = vec![
        FeatureRole::Catalyst,
        FeatureRole::Nucleophile,
        FeatureRole::Solvent,
    ];
    if include_reaction_variables {
        roles.push(FeatureRole::ReactionVariable);
    }
    let sub = select_features(ds, &roles)?;
    let labels: Vec<u32> = sub
        .records()
        .iter()
        .map(|r| r.transition_state.expect("checked").class_index())
        .collect();

    let plan = dataset::kfold_plan(sub.n_records(), k, 1, seeding::derive(seed, "ez_plan"))?;
    let accuracy = |model: &RandomForest, indices: &[usize]| -> Result<f64> {
        let mut correct = 0usize;
        for &i in indices {
            if model.predict_label(&sub.records()[i].features)? == labels[i] {
                correct += 1;
            }
        }
        Ok(correct as f64 / indices.len() as f64)
    };

    let folds: Vec<(f64, f64)> = plan
        .pairs
        .par_iter()
        .enumerate()
        .map(|(idx, (train_idx, test_idx))| {
            let train = sub.subset(train_idx);
            let model = fit_rf(
                &train,
                &rf.params(seeding::derive_index(seed, idx as u64)),
                Task::Classification,
            )?;
            Ok((accuracy(&model, train_idx)?, accuracy(&model, test_idx)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = folds.len() as f64;
    Ok(EzReport {
        train_accuracy: folds.iter().map(|f| f.0).sum::<f64>() / n,
        test_accuracy: folds.iter().map(|f| f.1).sum::<f64>() / n,
        folds,
    })
}
