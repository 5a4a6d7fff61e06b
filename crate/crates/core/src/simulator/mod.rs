//! Synthetic closed-loop plant with injectable faults, plus dataset I/O and
//! windowing.

mod config;
mod dataset;
mod system;
mod window;

pub use config::{KeyValues, SimulationConfig};
pub use dataset::{format_float, Dataset, Label, Record};
pub use system::{simulate, ClosedLoopSystem, DisturbanceSpec, FaultKind, FaultSpec, SquareWave};
pub use window::{window_normalize, window_with, Normalization, WindowSet, WindowSpec};
