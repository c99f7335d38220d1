//! Config loading and task runners behind the `fractal-cuntz` binary.

mod config;
mod tasks;

pub use config::{load_config, parse_levels, ConfigError, MapSpec, BoxSpec, ModeKind, RawConfig, RunConfig, BUILTINS};
pub use tasks::{rn_tolerance, run_task, sampling_tolerance, Check, RunReport, Task, TaskError, RELATION_TOL};
