//! Synthetic six-cylinder engine that closes the control loop.

pub mod actuator;
pub mod cases;
pub mod firing;
pub mod manifold;
pub mod plant;
pub mod records;
pub mod sim;

pub use cases::{CasePreset, OperatingPoint};
pub use plant::{CycleRecord, MismatchConfig, NoiseConfig, Plant, PlantConfig, ResidualConfig};
pub use sim::{run_case, RunOutput};
