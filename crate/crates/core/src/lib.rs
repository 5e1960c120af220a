//! Semiparametric estimation of treatment-effect contrasts
//! `Delta(X) = g(B^T X)` through the iMAVE family of alternating weighted
//! least-squares estimators.
//!
//! The crate is `no_std` + `alloc` when built without default features; the
//! `parallel` feature (on by default) spreads anchor-wise work over a rayon
//! pool without changing any result.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod efficiency;
pub mod error;
pub mod fit;
pub mod index;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod multiarm;
mod parallel;
pub mod selection;
pub mod simulation;
pub mod study;

pub use data::{
    contrast_weights, estimate_propensity, validate_dataset, ContrastSpec, Dataset, PropensityEstimate, PropensityKind,
    PropensityModel, RawTable,
};
pub use efficiency::{imave2_fit, imave2_refit, EtaStarEstimate, GEstimate, KernelSmoother, Smoothed};
pub use error::{Error, Result};
pub use fit::{imave_fit, EtaMode, FitConfig, FitResult, LocalFit};
pub use index::{grassmann_normalize, subspace_distance, IndexMatrix};
pub use kernel::{BandwidthSchedule, KernelFamily, KernelSpec};
pub use metrics::{BenefitMetrics, MetricReport, RankStatistic};
pub use multiarm::{contrast_smoother, multiarm_fit, MultiArmModel};
pub use selection::{select_dimension, CvConfig, CvResult};
pub use simulation::{generate_data, GShape, ScenarioSpec, SimulatedData};
pub use study::{run_replication_study, Estimator, PropensityMode, StudyConfig, StudySummary};
