//! Tail-risk estimation for heavy-tailed losses: sample-average CVaR and its
//! gradient, importance sampling by tail scaling, extrapolation from a
//! moderate base level via the Hill estimator, and CVaR-minimising portfolio
//! descent.

pub mod empirical;
pub mod error;
pub mod extrapolation;
pub mod harness;
pub mod importance;
pub mod loss;
pub mod models;
pub mod optimizer;
pub mod rng;
pub mod sample;

pub use empirical::{
    hill_estimator, order_statistic, sa_cvar, sa_cvar_and_gradient, sa_cvar_gradient, sa_report,
    sa_var, sa_var_cvar, tail_count, EstimateReport, LossSample, Method, TailLevels,
};
pub use error::{Error, Result};
pub use extrapolation::{
    estimate_extrapolated, extrapolate, extrapolate_vec, extrapolated_cvar,
    extrapolation_factor, select_beta0, ExtrapolationConfig,
};
pub use importance::{
    is_cvar, is_estimate, is_var, is_variance_study, is_weighted_sample, likelihood_ratio,
    paired_cvar_estimates, scaling_vector, ScalingVector, VarianceStudy, WeightedLossSample,
};
pub use loss::LossModel;
pub use models::{
    joint_pdf, pareto_cvar_closed_form, pareto_var_closed_form, sample_pareto_matrix,
    sample_t_copula_matrix, JointDensity, ParetoModel, Sampler, TCopulaParetoModel,
    TailIndexVector,
};
pub use optimizer::{
    evaluate_solution, minimize_cvar, project_simplex, OptimizationResult, OptimizerConfig,
    PortfolioProblem, StartPoint,
};
pub use sample::SampleMatrix;
