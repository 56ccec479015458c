//! Composite stereoselectivity prediction: four base regressors (L1 linear,
//! CART tree, random forest, boosted trees) plus two Gaussian-mixture gates
//! that pick one predictor per reaction, with the evaluation protocols to
//! compare them.
//!
//! Everything is deterministic: a single seed flows through documented
//! derivations (see [`seeding`]) into every shuffle, bootstrap, and restart.

pub mod composite;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod gmm;
pub mod linear;
pub mod seeding;
pub mod synth;
pub mod tree;

#[cfg(test)]
pub(crate) mod test_support;

pub use composite::{
    load_model, route, save_model, train_composite, Choice, CompositeConfig, CompositeModel,
    GateDecision, GatingConfig,
};
pub use dataset::{
    kfold_plan, leave_one_type_out_plan, load_dataset, save_dataset, select_features, Dataset,
    FeatureRole, FeatureSchema, ReactionRecord, SplitPlan, TransitionState,
};
pub use ensemble::{
    fit_boost, fit_rf, BoostParams, BoostSettings, BoostedTrees, RandomForest, RfParams,
    RfSettings,
};
pub use error::{Error, Result};
pub use eval::{
    metrics, run_ez_experiment, run_leave_one_type_out, run_out_of_sample, run_repeated_kfold,
    CvSummary, EzReport, LotoReport, MetricReport, ModelSpec, OosReport,
};
pub use gmm::{bic, fit_gmm, log_density, select_components, GmmConfig, GmmModel};
pub use linear::{fit_lasso, predict_lasso, select_lambda, LassoConfig, LassoModel};
pub use synth::{synth_generate, GeneratorSpec};
pub use tree::{fit_tree, DecisionTree, Task, TreeParams};
