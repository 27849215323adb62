//! Quality-diversity illumination with CVT-MAP-Elites.
//!
//! The crate provides the behavior-space tessellation ([`cvt`]), the elite
//! archive ([`archive`]), a family of variation operators including the
//! directional `Iso+LineDD` operator ([`variation`]), two benchmark tasks
//! ([`tasks`]), elite-hypervolume metrics and run statistics ([`metrics`]),
//! the run/campaign driver ([`engine`]) and the on-disk formats ([`io`]).

pub mod archive;
pub mod cvt;
pub mod engine;
pub mod error;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod tasks;
pub mod variation;

pub use archive::{Archive, Individual, Insertion};
pub use cvt::{build_centroids, nearest_centroid, CentroidSet, CvtBuilder};
pub use engine::{run, run_campaign, Campaign, RunConfig, RunHooks, RunResult};
pub use error::{Error, Result};
pub use metrics::{archive_stats, hypervolume, mann_whitney_u, similarity, spread, MetricsSnapshot};
pub use tasks::{TaskKind, TaskSpec};
pub use variation::{OperatorConfig, OperatorKind};
