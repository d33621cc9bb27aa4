//! Randomized domain-adapted second-generation wavelets built with the
//! lifting scheme, and wavelet-domain statistical parametric mapping.

pub mod baseline;
pub mod basis;
pub mod denoise;
pub mod domain;
pub mod error;
pub mod glm;
pub mod hierarchy;
pub mod lifting;
pub mod phantom;
pub mod linear;
pub mod pyramid;
pub mod vxl;
pub mod wspm;

pub use domain::{make_ring_domain, DiscreteDomain, Dimension, VoxelIndex, Volume};
pub use error::{Error, Result};
pub use hierarchy::{build_hierarchy, GridHierarchy};
pub use lifting::{BasisKind, LiftingTransform, TransformOptions};
pub use pyramid::{CoefficientPyramid, Stage};
pub use wspm::{compute_thresholds, wspm_detect, WspmParams};
