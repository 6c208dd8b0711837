//! Step polyhedra, the PBS mask and the projection layers.

pub mod mask;
pub mod pipeline;
pub mod polyhedron;
pub mod project;

pub use mask::{apply_mask, masked_logprob, masked_logprob_sum, pbs_mask, ActionMask};
pub use pipeline::{Mode, PipelineOutput, PipelineSpec, Stage};
pub use polyhedron::{build_polyhedron, Polyhedron, RowLabel, StepPolyParams};
pub use project::{clip_box, cp_project, violation, vp_project, CpOutcome, CpParams, VpOutcome, VpParams};
