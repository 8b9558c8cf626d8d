//! Fixtures shared by the criterion benchmarks.

use zsl_core::data_io::{synth_generate, Bundle, SynthConfig};
use zsl_core::TrainConfig;

/// A seeded bundle with `per_class` instances for each of 20 seen classes.
pub fn fixture(per_class: usize, p: usize) -> Bundle {
    synth_generate(&SynthConfig { per_class, p, noise_sigma: 0.5, shift_sigma: 0.5, ..Default::default() })
        .expect("valid synthetic config")
        .bundle
}

/// One outer CCCP iteration with a single epoch per learning rate.
pub fn single_pass() -> TrainConfig {
    TrainConfig { epochs_per_eta: 1, max_outer_iters: 1, ..Default::default() }
}
