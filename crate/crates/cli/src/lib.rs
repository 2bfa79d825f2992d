//! Command-line driver for `kdv-core`: flag parsing, run dispatch and the
//! CSV/JSON output formats.

pub mod args;
pub mod output;

use std::time::Instant;

use anyhow::Result;
use kdv_core::sim::{run, DecayReport};

pub use args::{parse_args, Args, Invocation, RunOutputs};
pub use output::{write_outputs, ReportRecord};

/// Runs the simulation and writes every requested output.
pub fn execute(inv: &Invocation) -> Result<DecayReport> {
    let start = Instant::now();
    let report = run(&inv.config)?;
    let runtime = start.elapsed().as_secs_f64();
    write_outputs(inv, &report, runtime)?;
    Ok(report)
}
