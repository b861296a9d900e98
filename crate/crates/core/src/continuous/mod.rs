//! A kinematic 2D driving simulator with logged background traffic and a
//! scripted controller acting on masked observations.

pub mod dataset;
pub mod features;
pub mod policy;
pub mod recovery;
pub mod scene;
pub mod sim;

pub use dataset::{
    build_models, continuous_action_likelihood, continuous_problem, default_fit_bounds, default_lambda_range,
    generate_continuous_dataset, sample_lambda,
    heuristic_features, mc_behavioral_utility, ConstrualSpace, ContinuousConfig, SceneModel,
};
pub use features::HeuristicFeatures;
pub use recovery::{continuous_recovery, ContinuousRecovery, ContinuousRecoveryConfig, SampleEfficiencyRow};
pub use policy::{generalist_policy, observe, Control, ControllerParams, Observation};
pub use scene::{builtin_scenes, load_scene, save_scene, ContinuousScene, LoggedVehicle, Polyline, Pose, TimedPose};
pub use sim::{simulate, ContinuousTrajectory, EgoState, Episode, Outcome, SimConfig, SimRewards};
