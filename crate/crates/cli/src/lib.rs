//! Command-line front end for nclab: spec files, the example corpus, batch
//! commands, reports and a results cache.

pub mod cache;
pub mod commands;
pub mod corpus;
pub mod error;
pub mod external;
pub mod report;
pub mod specfile;

pub use cache::{Cache, CacheStatus, CACHE_ENV};
pub use commands::{run_command, CommandKind, Flags, Outcome};
pub use error::{CliError, Result};
pub use report::{emit_report, Format, Report};
pub use specfile::{load_spec, parse_spec, SpecFile};
