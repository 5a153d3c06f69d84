//! Monte Carlo sweeps over one scenario parameter, the figure presets, per-run
//! records, and the invariant self-test suites.

mod protocols;
mod record;
mod runner;
pub mod selftest;
mod sweep;

pub use protocols::{figure_protocols, Figure, Scale};
pub use record::{read_records, write_records, RunKey, RunRecord, RunStatus};
pub use runner::{
    aggregate, read_rows, run_sweep, summarize, trace_table, write_rows, write_trace, RunnerOptions, SweepOutput,
    SweepRow, TraceRow, CSV_HEADER,
};
pub use selftest::{run_selftests, SuiteOutcome};
pub use sweep::{Series, Statistic, SweepParam, SweepPoint, SweepSpec};

#[cfg(test)]
mod tests;
