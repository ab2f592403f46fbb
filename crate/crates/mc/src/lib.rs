//! Config-driven Monte Carlo experiments for the pre-averaging estimators:
//! scenario files, a parallel deterministic replication runner, JSON/CSV
//! reports and the efficiency comparison.

pub mod config;
pub mod efficiency;
pub mod plot;
pub mod scenario;
pub mod summary;

pub use config::{ConfigError, ScenarioConfig};
pub use efficiency::{compare_efficiency, parametric_bound, standard_configs, EfficiencyTable};
pub use scenario::{entry_labels, run_replication, RepRecord};
pub use summary::{persist, resolve_workers, run_scenario, summary_json, MCSummary, RunOutput};
