//! Driving noise: Brownian bridges coupled across epochs, epoched Brownian
//! motions, scheme copulas, and Hölder seminorms on grids.

mod bridge;
pub mod csv;
mod grid;
mod holder;
mod scheme;

pub use bridge::{
    assemble_ebm, assemble_ebm_with, drift_gaussian, sample_bridge, sample_ebm, sample_epoched_bridge, BridgeEpochs,
    EbmEpochs, EbmPath, EpochedBridgePath,
};
pub use grid::{Grid, Path};
pub use holder::{
    holder_seminorm, holder_seminorm_by, holder_seminorm_uniform, holder_seminorm_with, window_max_holder,
    window_max_holder_with, window_seminorms, PairSet,
};
pub use scheme::{copula, cross_covariance, SchemeSpec};
