//! Shared inputs for the criterion benches.

use transferscope_core::ledger::{synth_ledger, SynthConfig};
use transferscope_core::Ledger;

/// Synthetic single-task ledger of the given shape with 3 repetitions.
pub fn ledger(n_transfer: usize, n_target: usize) -> Ledger {
    let config = SynthConfig {
        seed: 42,
        n_transfer,
        n_target,
        tasks: 1,
        rep_count: 3,
        ..SynthConfig::default()
    };
    synth_ledger(&config).expect("valid bench config").0
}
