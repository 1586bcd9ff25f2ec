//! Frequency-uniform decompositions on periodic grids, Wiener amalgam
//! quasi-norms, and the trace and extension operators between `n` and
//! `n - 1` dimensions.

pub mod decomposition;
pub mod error;
pub mod field;
pub mod norms;
pub mod partition;
pub mod trace;
pub mod verify;

pub use decomposition::{
    box_op, decompose, export_bandset, import_bandset, maximal_op, mixed_box_op, reconstruct, BandComponent,
    BandSet, Decomposer, MaximalParams, ShiftLattice,
};
pub use error::{Error, Result};
pub use field::{
    forward_transform, inverse_transform, load_amf, lp_norm, save_amf, slice_last_axis, GridSpec, RealField,
    SampledField, Spectrum,
};
pub use norms::{
    aniso2_norm, aniso_norm, bracket, evaluate, maximal_wiener_norm, sequence_mixed_norm, wiener_norm,
    NormSpec, NormVariant, SequenceMode, WeightedSequence,
};
pub use partition::{eval_mixed_window, BumpProfile, SupportBox, WindowFamily};
pub use trace::{
    extend, extension_weight, pointwise_maximal_bound_margin, trace, trace_band_identity_residual,
    ExtensionProfile, TraceEngine,
};
