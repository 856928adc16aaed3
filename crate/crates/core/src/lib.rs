//! Desk-scale testbed for embodied visual active learning.
//!
//! Agents move through procedurally generated indoor grid worlds, observe a
//! one-dimensional first-person strip, request per-view semantic annotations,
//! carry those labels along their motion, and refine an online per-pixel
//! classifier. The harness measures how well each exploration and
//! annotation policy trains that classifier.
//!
//! Module map:
//!
//! - [`world`]: floor-plan generation, kinematics, geodesic distances.
//! - [`render`]: raycast strip views and exact pixel correspondence.
//! - [`perception`]: the online segmentation model, its training loop and metrics.
//! - [`propagation`]: propagated label masks and the `Annotate` / `Collect` actions.
//! - [`agents`]: pre-specified exploration policies and annotation strategies.
//! - [`rl`]: the learnt policy, rewards and PPO training.
//! - [`harness`]: episodes, reference sets, benchmarks, ablations, pre-training.

pub mod agents;
pub mod error;
pub mod harness;
pub mod par;
pub mod perception;
pub mod propagation;
pub mod render;
pub mod rl;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
