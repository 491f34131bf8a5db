//! Cell-free massive MIMO downlink with fractional-exponent conjugate
//! beamforming: channel snapshots, pilot training, user-centric clustering,
//! closed-form SINR, power control and a Monte-Carlo moment oracle.

pub mod channel_world;
pub mod clustering;
pub mod config;
pub mod error;
pub mod experiments;
pub mod mc_oracle;
pub mod performance;
pub mod power_control;
pub mod rng;
pub mod socp;
pub mod training;

pub use channel_world::{generate_snapshot, Point, Snapshot};
pub use clustering::{build_clusters, ClusterMap};
pub use config::{ExperimentConfig, PilotPolicy, Preset, SystemConfig};
pub use error::{Error, Result};
pub use performance::{PerformanceReport, PowerAllocation, SinrTerms, Strategy};
pub use power_control::{BisectionSettings, BisectionStatus, MmfOutcome, MmfProblemData};
pub use rng::RandomStream;
pub use training::{PilotBook, TrainingStats};
