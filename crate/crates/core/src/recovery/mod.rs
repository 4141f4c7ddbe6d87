//! Reconstruction from local wave data: the inner-product identity,
//! controllability, distances, cut times, fiber frames, gauges and
//! connection coefficients.

mod blago;
mod control;
mod distance;
mod gauge;
mod local;

pub use blago::{blago_inner_product, HatMember, ReferenceBank};
pub use control::{
    bump_target, controllability_solve, fiber_basis_at_point, hat_family, recover_cut_time, ControlSolution,
    CutTimeParams, CutTimeReport, FiberBasisParams, FiberBasisReport, GlobalStates,
};
pub use distance::{recover_distance, ArrivalParams, DistanceEstimate, DistanceProfile};
pub use gauge::{
    apply_chirality, chart_difference, chirality_extension_residual, extend_spectral_data, gauge_transform,
    nodal_gauge_conjugate, nodal_gauge_matrix, recover_connection, ConnectionSample, ScalarGauge,
    MAX_PROBE_CONDITION,
};
pub use local::{
    time_average_j, LocalSource, LocalWaveData, LocalWaveMap, SealedWaveMap, SpectralWaveMap, GL_NODES, GL_WEIGHTS,
};
