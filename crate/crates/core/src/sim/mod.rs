//! Synthetic experiments: graph and treatment generation, outcome models,
//! replicated estimation and match-quality audits.

mod config;
mod distance;
mod generate;
mod outcome;
mod presets;
mod regime;
mod run;

pub use config::{AdeTarget, CovariateTerm, GraphSpec, Interference, Method, Noise, OutcomeModel, SimConfig};
pub use distance::{
    graph_distance, graph_distance_heuristic, group_match_quality, nearest_match_quality, NeighborhoodDistances,
    EXACT_LIMIT,
};
pub use generate::{gen_er, gen_sbm, randomize, Design};
pub use outcome::{gen_outcomes, interference_values, Outcomes};
pub use presets::{preset, ADDITIVE_SETTINGS, PRESET_NAMES};
pub use regime::{run_regime, RegimeConfig, RegimePoint, RegimeReport};
pub use run::{
    match_on_true_f, quantile, replicate, residualize_on_levels, run_experiment, summarize, ExperimentReport,
    MethodOutcome, MethodSummary, ReplicationRecord,
};
