//! Benchmark-only crate; see `benches/`.

use exciton_core::{NetworkConfig, SpectralKind};

/// Four-site chain at 3 nm spacing, the usual timing workload.
pub fn chain(kind: SpectralKind) -> NetworkConfig {
    NetworkConfig::chain(4, 3.0).expect("valid chain").with_spectrum(kind)
}
