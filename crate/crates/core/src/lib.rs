//! Curriculum-based course timetabling with a two-stage genetic algorithm
//! and learned surrogate evaluators.

pub mod cli;
pub mod dataset;
pub mod encoding;
pub mod evaluation;
pub mod ga;
pub mod instance;
pub mod metrics;
pub mod surrogate;

pub use dataset::{DatasetLog, Example};
pub use encoding::{HardIndividual, MoveMode, SoftIndividual};
pub use evaluation::{Label, Stage, Timetable, ViolationReport};
pub use ga::{solve, GaConfig, Solution};
pub use instance::Instance;
