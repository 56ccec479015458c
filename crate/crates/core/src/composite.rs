//! The gated composite predictor.
//!
//! Training fits three regressors on one dataset — an L1 linear model and a
//! random forest on all features, plus a second forest on everything except
//! the imine role — together with two gating mixtures over small imine and
//! nucleophile feature subsets. At prediction time the two gate log densities
//! select exactly one regressor per record (or per reaction-type group):
//! an unfamiliar nucleophile falls back to the linear model, an unfamiliar
//! imine with a familiar nucleophile uses the nucleophile-focused forest,
//! and in-distribution records use the overall forest. A density counts as
//! high when it exceeds 1, i.e. log density strictly greater than 0.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{select_features, Dataset, FeatureRole, FeatureSchema};
use crate::ensemble::{fit_rf, RandomForest, RfSettings};
use crate::error::{Error, Result};
use crate::gmm::{self, GmmConfig, GmmModel};
use crate::linear::{self, LassoConfig, LassoModel};
use crate::seeding;
use crate::tree::Task;

/// Which sub-model a gate decision routes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    Lasso,
    NucleophileRf,
    OverallRf,
}

impl Choice {
    pub fn as_str(&self) -> &'static str {
        match self {
            Choice::Lasso => "LASSO",
            Choice::NucleophileRf => "NUCLEOPHILE_RF",
            Choice::OverallRf => "OVERALL_RF",
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Both gate densities, their high/low flags, and the resulting choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub imine_log_density: f64,
    pub nucleophile_log_density: f64,
    pub imine_high: bool,
    pub nucleophile_high: bool,
    pub choice: Choice,
}

/// Routing rule on the two gate log densities ("high" means strictly > 0):
/// nucleophile low → linear model; nucleophile high with imine high → overall
/// forest; nucleophile high with imine low → nucleophile-focused forest.
pub fn route(imine_log_density: f64, nucleophile_log_density: f64) -> Result<GateDecision> {
    if !imine_log_density.is_finite() || !nucleophile_log_density.is_finite() {
        return Err(Error::Numerical(format!(
            "gate densities must be finite, got ({imine_log_density}, {nucleophile_log_density})"
        )));
    }
    let imine_high = imine_log_density > 0.0;
    let nucleophile_high = nucleophile_log_density > 0.0;
    let choice = if !nucleophile_high {
        Choice::Lasso
    } else if imine_high {
        Choice::OverallRf
    } else {
        Choice::NucleophileRf
    };
    Ok(GateDecision {
        imine_log_density,
        nucleophile_log_density,
        imine_high,
        nucleophile_high,
        choice,
    })
}

fn default_nucleophile_gate() -> Vec<String> {
    ["H-X-Nu", "H-X-CNu", "Nu", "Polarizability"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_imine_gate() -> Vec<String> {
    ["C", "SL", "PG"].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatingConfig {
    pub nucleophile_features: Vec<String>,
    pub imine_features: Vec<String>,
}

impl Default for GatingConfig {
    fn default() -> Self {
        GatingConfig {
            nucleophile_features: default_nucleophile_gate(),
            imine_features: default_imine_gate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoTrainConfig {
    /// λ grid, descending; `None` uses the data-driven default grid.
    pub grid: Option<Vec<f64>>,
    pub cv_folds: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoTrainConfig {
    fn default() -> Self {
        let solver = LassoConfig::default();
        LassoTrainConfig {
            grid: None,
            cv_folds: 5,
            tol: solver.tol,
            max_iter: solver.max_iter,
        }
    }
}

impl LassoTrainConfig {
    fn solver(&self) -> LassoConfig {
        LassoConfig {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmmSelectionConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Fixed component counts override BIC selection when set.
    pub nucleophile_components: Option<usize>,
    pub imine_components: Option<usize>,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub reg: f64,
}

impl Default for GmmSelectionConfig {
    fn default() -> Self {
        let em = GmmConfig::default();
        GmmSelectionConfig {
            k_min: 1,
            k_max: 20,
            nucleophile_components: None,
            imine_components: None,
            restarts: em.restarts,
            max_iter: em.max_iter,
            tol: em.tol,
            reg: em.reg,
        }
    }
}

impl GmmSelectionConfig {
    fn em_config(&self, seed: u64) -> GmmConfig {
        GmmConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.restarts,
            seed,
            reg: self.reg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompositeConfig {
    pub lasso: LassoTrainConfig,
    pub rf: RfSettings,
    pub gating: GatingConfig,
    pub gmm: GmmSelectionConfig,
    pub seed: u64,
}

/// Sidecar facts from training, kept for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub lambda: f64,
    pub lambda_table: Vec<(f64, f64)>,
    pub bic_imine: Vec<(usize, f64)>,
    pub bic_nucleophile: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeModel {
    pub lasso: LassoModel,
    pub rf_overall: RandomForest,
    pub rf_nucleophile: RandomForest,
    pub gmm_imine: GmmModel,
    pub gmm_nucleophile: GmmModel,
    pub schema: FeatureSchema,
    pub gating: GatingConfig,
    pub training: TrainingInfo,
    /// Schema columns feeding the nucleophile-focused forest.
    nucleophile_projection: Vec<usize>,
    imine_gate_columns: Vec<usize>,
    nucleophile_gate_columns: Vec<usize>,
}

/// Resolves gate feature names to schema columns, checking the role.
fn gate_columns(
    schema: &FeatureSchema,
    names: &[String],
    role: FeatureRole,
) -> Result<Vec<usize>> {
    if names.is_empty() {
        return Err(Error::InvalidParam(format!(
            "empty {role} gating feature list"
        )));
    }
    names
        .iter()
        .map(|name| {
            let j = schema
                .index_of(name)
                .ok_or_else(|| Error::Schema(format!("missing gating feature `{name}`")))?;
            if schema.role(j) != role {
                return Err(Error::Schema(format!(
                    "gating feature `{name}` has role {}, expected {role}",
                    schema.role(j)
                )));
            }
            Ok(j)
        })
        .collect()
}

fn gate_matrix(ds: &Dataset, columns: &[usize]) -> Vec<Vec<f64>> {
    ds.records()
        .iter()
        .map(|r| columns.iter().map(|&j| r.features[j]).collect())
        .collect()
}

/// Trains all sub-models and both gates on one dataset.
pub fn train_composite(ds: &Dataset, cfg: &CompositeConfig) -> Result<CompositeModel> {
    let schema = ds.schema().clone();
    let imine_gate_columns = gate_columns(&schema, &cfg.gating.imine_features, FeatureRole::Imine)?;
    let nucleophile_gate_columns = gate_columns(
        &schema,
        &cfg.gating.nucleophile_features,
        FeatureRole::Nucleophile,
    )?;

    // L1 linear model on all features, λ picked by inner cross-validation
    let solver = cfg.lasso.solver();
    let grid = match &cfg.lasso.grid {
        Some(g) => g.clone(),
        None => linear::default_lambda_grid(ds)?,
    };
    let (lambda, lambda_table) = linear::select_lambda(
        ds,
        &grid,
        cfg.lasso.cv_folds.min(ds.n_records()),
        seeding::derive(cfg.seed, "lasso"),
        &solver,
    )?;
    let lasso = linear::fit_lasso(ds, lambda, &solver)?;

    let rf_overall = fit_rf(
        ds,
        &cfg.rf.params(seeding::derive(cfg.seed, "rf_overall")),
        Task::Regression,
    )?;

    let non_imine_roles: Vec<FeatureRole> = FeatureRole::ALL
        .iter()
        .copied()
        .filter(|r| *r != FeatureRole::Imine)
        .collect();
    let nucleophile_ds = select_features(ds, &non_imine_roles)?;
    let nucleophile_projection = schema.indices_with_roles(&non_imine_roles);
    let rf_nucleophile = fit_rf(
        &nucleophile_ds,
        &cfg.rf.params(seeding::derive(cfg.seed, "rf_nucleophile")),
        Task::Regression,
    )?;

    let fit_gate = |columns: &[usize],
                    names: &[String],
                    fixed: Option<usize>,
                    label: &str|
     -> Result<(GmmModel, Vec<(usize, f64)>)> {
        let matrix = gate_matrix(ds, columns);
        let em = cfg.gmm.em_config(seeding::derive(cfg.seed, label));
        match fixed {
            Some(k) => {
                let model = gmm::fit_gmm_named(&matrix, k, &em, names.to_vec())?;
                let score = gmm::bic(&model, &matrix)?;
                Ok((model, vec![(k, score)]))
            }
            None => {
                let k_range: Vec<usize> = (cfg.gmm.k_min.max(1)..=cfg.gmm.k_max)
                    .filter(|&k| k <= ds.n_records())
                    .collect();
                if k_range.is_empty() {
                    return Err(Error::InvalidParam(format!(
                        "no feasible component count in {}..={} for {} rows",
                        cfg.gmm.k_min,
                        cfg.gmm.k_max,
                        ds.n_records()
                    )));
                }
                gmm::select_components_named(&matrix, &k_range, &em, names.to_vec())
            }
        }
    };

    let (gmm_imine, bic_imine) = fit_gate(
        &imine_gate_columns,
        &cfg.gating.imine_features,
        cfg.gmm.imine_components,
        "gmm_imine",
    )?;
    let (gmm_nucleophile, bic_nucleophile) = fit_gate(
        &nucleophile_gate_columns,
        &cfg.gating.nucleophile_features,
        cfg.gmm.nucleophile_components,
        "gmm_nucleophile",
    )?;

    Ok(CompositeModel {
        lasso,
        rf_overall,
        rf_nucleophile,
        gmm_imine,
        gmm_nucleophile,
        schema,
        gating: cfg.gating.clone(),
        training: TrainingInfo {
            lambda,
            lambda_table,
            bic_imine,
            bic_nucleophile,
        },
        nucleophile_projection,
        imine_gate_columns,
        nucleophile_gate_columns,
    })
}

impl CompositeModel {
    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.schema.len() {
            return Err(Error::Schema(format!(
                "feature length {} does not match model schema length {}",
                features.len(),
                self.schema.len()
            )));
        }
        Ok(())
    }

    fn gate_values(&self, features: &[f64], columns: &[usize]) -> Vec<f64> {
        columns.iter().map(|&j| features[j]).collect()
    }

    /// Log densities of one record under both gates.
    pub fn gate_log_densities(&self, features: &[f64]) -> Result<(f64, f64)> {
        self.check_features(features)?;
        let imine = gmm::log_density(
            &self.gmm_imine,
            &self.gate_values(features, &self.imine_gate_columns),
        )?;
        let nucleophile = gmm::log_density(
            &self.gmm_nucleophile,
            &self.gate_values(features, &self.nucleophile_gate_columns),
        )?;
        Ok((imine, nucleophile))
    }

    /// Evaluates the routed sub-model on one feature row.
    pub fn predict_with(&self, choice: Choice, features: &[f64]) -> Result<f64> {
        self.check_features(features)?;
        match choice {
            Choice::Lasso => linear::predict_lasso(&self.lasso, features),
            Choice::OverallRf => self.rf_overall.predict(features),
            Choice::NucleophileRf => {
                let projected: Vec<f64> = self
                    .nucleophile_projection
                    .iter()
                    .map(|&j| features[j])
                    .collect();
                self.rf_nucleophile.predict(&projected)
            }
        }
    }

    /// Gates and predicts a single record.
    pub fn predict(&self, features: &[f64]) -> Result<(f64, GateDecision)> {
        let (imine, nucleophile) = self.gate_log_densities(features)?;
        let decision = route(imine, nucleophile)?;
        Ok((self.predict_with(decision.choice, features)?, decision))
    }

    /// Routes once on the group's mean log densities, then applies the chosen
    /// sub-model to every row. This is the evaluation mode for grouped test
    /// sets and the leave-one-type-out protocol.
    pub fn predict_group(&self, rows: &[&[f64]]) -> Result<(Vec<f64>, GateDecision)> {
        if rows.is_empty() {
            return Err(Error::InvalidParam("predict_group needs a non-empty group".into()));
        }
        let mut sum_imine = 0.0;
        let mut sum_nucleophile = 0.0;
        for row in rows {
            let (imine, nucleophile) = self.gate_log_densities(row)?;
            sum_imine += imine;
            sum_nucleophile += nucleophile;
        }
        let n = rows.len() as f64;
        let decision = route(sum_imine / n, sum_nucleophile / n)?;
        let predictions = rows
            .iter()
            .map(|row| self.predict_with(decision.choice, row))
            .collect::<Result<Vec<f64>>>()?;
        Ok((predictions, decision))
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: CompositeModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// Writes the model as a versioned JSON document.
pub fn save_model(model: &CompositeModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string(&file)
        .map_err(|e| Error::Model(format!("serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Loads a model written by [`save_model`]; predictions of the loaded model
/// are bit-identical to the saved one.
pub fn load_model(path: &Path) -> Result<CompositeModel> {
    let text = std::fs::read_to_string(path)?;
    let probe: VersionProbe = serde_json::from_str(&text)
        .map_err(|e| Error::Model(format!("corrupt model file {}: {e}", path.display())))?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Model(format!(
            "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
            probe.format_version
        )));
    }
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Model(format!("corrupt model file {}: {e}", path.display())))?;
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_generate, GeneratorSpec};
    use crate::test_support::gate_demo_spec;

    fn quick_config(seed: u64) -> CompositeConfig {
        CompositeConfig {
            rf: RfSettings {
                n_trees: 30,
                ..Default::default()
            },
            gmm: GmmSelectionConfig {
                k_max: 3,
                restarts: 2,
                ..Default::default()
            },
            lasso: LassoTrainConfig {
                grid: Some(vec![0.1, 0.01, 0.001]),
                ..Default::default()
            },
            seed,
            ..Default::default()
        }
    }

    fn trained(seed: u64) -> CompositeModel {
        let ds = synth_generate(&gate_demo_spec(), seed).unwrap();
        train_composite(&ds, &quick_config(seed)).unwrap()
    }

    #[test]
    fn routing_covers_all_quadrants() {
        // published group decisions for the three out-of-sample types
        assert_eq!(route(8.43, -646434.25).unwrap().choice, Choice::Lasso);
        assert_eq!(route(-931.35, 14.82).unwrap().choice, Choice::NucleophileRf);
        assert_eq!(route(8.90, 10.60).unwrap().choice, Choice::OverallRf);
        // fourth quadrant and the boundary: low is inclusive
        assert_eq!(route(-1.0, -1.0).unwrap().choice, Choice::Lasso);
        assert_eq!(route(0.0, 0.0).unwrap().choice, Choice::Lasso);
        assert_eq!(route(0.0, 5.0).unwrap().choice, Choice::NucleophileRf);
        assert_eq!(route(5.0, 0.0).unwrap().choice, Choice::Lasso);
        assert!(route(f64::NAN, 0.0).is_err());
        assert!(route(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn gate_flags_match_densities() {
        let d = route(2.5, -3.5).unwrap();
        assert!(d.imine_high);
        assert!(!d.nucleophile_high);
        assert_eq!(d.imine_log_density, 2.5);
        assert_eq!(d.nucleophile_log_density, -3.5);
    }

    #[test]
    fn raising_nucleophile_density_never_moves_toward_lasso() {
        let rank = |c: Choice| match c {
            Choice::Lasso => 0,
            _ => 1,
        };
        for imine in [-5.0, -0.1, 0.0, 0.1, 5.0] {
            let mut prev = rank(route(imine, -10.0).unwrap().choice);
            for nucleophile in [-1.0, -1e-12, 0.0, 1e-12, 1.0, 10.0] {
                let now = rank(route(imine, nucleophile).unwrap().choice);
                assert!(now >= prev, "choice moved toward the fallback");
                prev = now;
            }
        }
    }

    #[test]
    fn training_requires_gating_features() {
        let spec = GeneratorSpec::from_toml_str(
            r#"
            [[features]]
            name = "x"
            role = "nucleophile"
            [[types]]
            name = "t"
            count = 20
            features = [{ center = 0.0, spread = 1.0 }]
            [target]
            weights = { x = 1.0 }
            "#,
        )
        .unwrap();
        let ds = synth_generate(&spec, 0).unwrap();
        let err = train_composite(&ds, &quick_config(0)).unwrap_err();
        assert!(err.to_string().contains("missing gating feature"), "{err}");
    }

    #[test]
    fn synthetic_training_satisfies_model_invariants() {
        let m = trained(1);
        assert_eq!(m.rf_nucleophile.trees().len(), 30);
        let imp_sum: f64 = m.rf_overall.importances().iter().sum();
        assert!((imp_sum - 100.0).abs() < 1e-9);
        // the nucleophile forest never sees imine columns
        assert_eq!(
            m.nucleophile_projection.len(),
            m.schema.len() - 3
        );
        let weight_sum: f64 = m.gmm_imine.components.iter().map(|c| c.weight).sum();
        assert!((weight_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prediction_delegates_exactly() {
        let ds = synth_generate(&gate_demo_spec(), 2).unwrap();
        let m = train_composite(&ds, &quick_config(2)).unwrap();
        for rec in ds.records().iter().take(25) {
            let (pred, decision) = m.predict(&rec.features).unwrap();
            let standalone = match decision.choice {
                Choice::Lasso => linear::predict_lasso(&m.lasso, &rec.features).unwrap(),
                Choice::OverallRf => m.rf_overall.predict(&rec.features).unwrap(),
                Choice::NucleophileRf => {
                    let proj: Vec<f64> = m
                        .nucleophile_projection
                        .iter()
                        .map(|&j| rec.features[j])
                        .collect();
                    m.rf_nucleophile.predict(&proj).unwrap()
                }
            };
            assert_eq!(pred.to_bits(), standalone.to_bits());
        }
    }

    #[test]
    fn group_of_one_matches_single_prediction() {
        let ds = synth_generate(&gate_demo_spec(), 3).unwrap();
        let m = train_composite(&ds, &quick_config(3)).unwrap();
        let rec = &ds.records()[5];
        let (single, d1) = m.predict(&rec.features).unwrap();
        let rows = [rec.features.as_slice()];
        let (group, d2) = m.predict_group(&rows).unwrap();
        assert_eq!(group, vec![single]);
        assert_eq!(d1, d2);
    }

    #[test]
    fn group_gating_averages_log_densities() {
        let m = trained(4);
        let ds = synth_generate(&gate_demo_spec(), 4).unwrap();
        let rows: Vec<&[f64]> = ds.records()[..10]
            .iter()
            .map(|r| r.features.as_slice())
            .collect();
        let (_, decision) = m.predict_group(&rows).unwrap();
        let mut sum_im = 0.0;
        let mut sum_nu = 0.0;
        for row in &rows {
            let (im, nu) = m.gate_log_densities(row).unwrap();
            sum_im += im;
            sum_nu += nu;
        }
        assert!((decision.imine_log_density - sum_im / 10.0).abs() < 1e-12);
        assert!((decision.nucleophile_log_density - sum_nu / 10.0).abs() < 1e-12);
        assert!(m.predict_group(&[]).is_err());
    }

    #[test]
    fn out_of_distribution_nucleophile_routes_to_lasso() {
        let ds = synth_generate(&gate_demo_spec(), 5).unwrap();
        let m = train_composite(&ds, &quick_config(5)).unwrap();
        // a record whose nucleophile gate values sit 50 spreads away
        let mut features = ds.records()[0].features.clone();
        for name in ["H-X-Nu", "H-X-CNu", "Polarizability"] {
            let j = m.schema.index_of(name).unwrap();
            features[j] = 5.0;
        }
        let (_, decision) = m.predict(&features).unwrap();
        assert!(decision.nucleophile_log_density < 0.0);
        assert_eq!(decision.choice, Choice::Lasso);
    }

    #[test]
    fn in_distribution_record_routes_to_overall_rf() {
        let ds = synth_generate(&gate_demo_spec(), 6).unwrap();
        let m = train_composite(&ds, &quick_config(6)).unwrap();
        // cluster centers of type alpha sit in the training bulk
        let features = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let (pred, decision) = m.predict(&features).unwrap();
        assert!(decision.imine_log_density > 0.0, "{decision:?}");
        assert!(decision.nucleophile_log_density > 0.0, "{decision:?}");
        assert_eq!(decision.choice, Choice::OverallRf);
        assert_eq!(pred, m.rf_overall.predict(&features).unwrap());
    }

    #[test]
    fn fixed_component_counts_are_honored() {
        let ds = synth_generate(&gate_demo_spec(), 7).unwrap();
        let mut cfg = quick_config(7);
        cfg.gmm.imine_components = Some(2);
        cfg.gmm.nucleophile_components = Some(3);
        let m = train_composite(&ds, &cfg).unwrap();
        assert_eq!(m.gmm_imine.n_components(), 2);
        assert_eq!(m.gmm_nucleophile.n_components(), 3);
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let ds = synth_generate(&gate_demo_spec(), 8).unwrap();
        let m = train_composite(&ds, &quick_config(8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&m, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        for rec in ds.records() {
            let (a, da) = m.predict(&rec.features).unwrap();
            let (b, db) = loaded.predict(&rec.features).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
            assert_eq!(da.choice, db.choice);
        }
    }

    #[test]
    fn version_and_corruption_are_detected() {
        let ds = synth_generate(&gate_demo_spec(), 9).unwrap();
        let m = train_composite(&ds, &quick_config(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&m, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replace("\"format_version\":1", "\"format_version\":99");
        std::fs::write(&path, &tampered).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");

        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(err.to_string().contains("corrupt"), "{err}");
    }
}
