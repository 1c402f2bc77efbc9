//! Experiment harness: synthetic data generation, CSV ingestion, price-of-
//! anarchy metrics, the knife-edge counterexample instances, and seeded
//! parameter sweeps. Everything here is concrete `f64`.

mod data;
mod ppoa;
mod sweep;

pub use data::{generate_synthetic, ingest_csv, IngestReport};
pub use ppoa::{honest_q_fit, lad_fit, ppoa_q, unbounded_instance, PpoaValue, UnboundedInstance, LAD_SMOOTHING};
pub use sweep::{
    run_sweep, RegularizerKind, RegularizerSpec, SweepConfig, SweepResult, SweepRow,
    SweptParameter,
};

/// One round of the splitmix64 mix function.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed derivation: independent of thread scheduling.
pub(crate) fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ stream.wrapping_mul(0xA076_1D64_78BD_642F)) ^ index)
}
