//! Grids, grid functions and the monotone discrete operators.

mod function;
mod grid;
mod march;
mod operators;

pub use function::{DumpHeader, GridFunction};
pub use grid::{identity_frame, Grid, MaskSummary, NodeKind, Topology};
pub use march::{march, pseudo_time_step, residual_norm, MarchOutcome, SolveMethod, SolverConfig};
pub use operators::{
    centred_derivatives, diffusion_term, diffusion_term_raw, direction_net, max_gradient, min_gradient, node_residual,
    residual_into, scheme_residual, upwind_gradient, upwind_gradient_raw, EnvelopeRule, SampledField, SchemeOptions,
};
