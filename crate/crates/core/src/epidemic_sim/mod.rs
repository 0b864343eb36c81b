//! Exact event-driven SIR simulation on a configuration-model graph.
//!
//! The graph is revealed along the epidemic: a susceptible's half-edges are
//! paired only when it gets infected. The state is the susceptible degree
//! measure plus, for each infectious and each removed individual, its number
//! of edges to susceptibles.

pub mod degree;
pub mod roster;
pub mod sampling;
pub mod simulate;
pub mod state;
pub mod trajectory;

pub use degree::{r0_criterion, sample_degrees, DegreeSpec};
pub use roster::{Allocation, Roster};
pub use sampling::{hypergeometric, sample_jl, EdgePool};
pub use simulate::{run_simulation, simulate, SimParams};
pub use state::{
    execute_event, initialize_state, select_initial, EventRecord, InitialCondition, PopulationState, Rates, Selection,
};
pub use trajectory::{stopping_time, MeasureSnapshot, Termination, Trajectory, TrajectoryRow};
