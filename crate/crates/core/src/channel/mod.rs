//! End-to-end photon pipeline: heralding, preparation, channel, detection.

pub mod counts;
pub mod detection;
pub mod scattering;
pub mod spdc;

pub use counts::{simulate_counts, CountRates, CountTable};
pub use detection::{detection_mode, measure_projection, DetectionModel, DEFAULT_FIBER_WAIST};
pub use scattering::{noise_floor_for_qber, scattering_matrix, MatrixKind, ScatteringMatrix, ScatteringSetup};
pub use spdc::{heralded_input, spdc_overlap, spdc_overlap_scan, SpdcConfig, DEFAULT_PUMP_WAIST};
