//! BEV visual semantic localization: multi-view images plus a vectorized
//! semantic map in, 3-DoF pose correction out.
//!
//! The crate is organized around the data path:
//! [`geometry`] (pose algebra and projection) -> [`map`] (semantic map model
//! and structured packing) -> [`synth`] (procedural scenes, rendering,
//! training examples) -> [`nn`] (tensors and reverse-mode autodiff) ->
//! [`model`] (map encoder, BEV encoder, cross-modal transformer, pose head)
//! -> [`harness`] (training, evaluation, ablations, CLI-facing operations).

pub mod geometry;
pub mod map;

pub use geometry::{
    compose_pose, inverse_delta, pose_error, project_to_image, CameraModel, Pose2D, PoseDelta,
    PoseError, Vec2, Vec3,
};
pub use map::{
    crop_map, map_to_vehicle, pack_structured, vectorize_element, ElementShape, MapElement,
    MapVector, PackConfig, SemanticMap, SemanticType, StructuredMapTensor,
};
