//! `m̄_μ(e)` and `H̄` by the planar-metric and corrector routes.

mod hbar;
mod slope;

pub use hbar::{
    estimate_from_ladder, hbar_from_corrector, hbar_regularity_scan, CorrectorEstimate, EffectiveHamiltonianEstimate,
    HbarSample, RegularityReport, Route, CORRECTOR_FIT_THRESHOLD,
};
pub use slope::{estimate_mbar, invert_to_hbar, planar_values, slope_row_from_values, Inversion, SlopeRow, SlopeTable};
