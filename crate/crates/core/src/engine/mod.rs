//! Exact stochastic simulation of the household–workplace SIR epidemic.

mod params;
mod state;
mod trajectory;

pub use params::{EpidemicParams, InfectiousPeriod};
pub use state::{
    Channel, ConsistencyReport, Event, EventKind, InfectionRates, SimulationState, Status, Step, TypeHistogram,
};
pub use trajectory::{simulate, HistogramSnapshot, Observer, Sample, SamplingOptions, Trajectory};
