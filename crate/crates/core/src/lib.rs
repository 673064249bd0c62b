//! Affect recognition from 3D skeleton motion.
//!
//! The crate covers the full pipeline: BVH parsing and forward kinematics
//! ([`bvh`]), temporal local/global feature extraction ([`features`]),
//! rotation-noise augmentation ([`augment`]), a hand-written recurrent + MLP
//! classifier with its own backpropagation and optimizer ([`neural`]),
//! leak-free k-fold evaluation ([`experiment`]) and a synthetic motion
//! generator for desk-scale testing ([`synthgen`]).

pub mod augment;
pub mod bvh;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod features;
pub mod label;
pub mod matrix;
pub mod neural;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
pub use label::AffectLabel;
