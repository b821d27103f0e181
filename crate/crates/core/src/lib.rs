//! Coverage-hole detection and recovery with aerial base stations.
//!
//! The pipeline runs in five stages: a terrestrial network is drawn from a
//! Poisson field, a patrol UAV labels hard-core checkpoints red or blue, a
//! scheduler turns the label stream into single-ABS or tetrahedral-swarm
//! deployments, the swarm controller flies them in, and the harness measures
//! coverage before and after.

// Validation uses `!(x > 0.0)` so that NaN is rejected along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod scheduling;
pub mod swarm;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Planar position in metres.
pub type Vec2 = nalgebra::Vector2<f64>;
/// Position or velocity in 3D, metres or m/s.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Seed for a deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// Derives an independent child seed, used for per-trial and per-purpose
    /// streams. SplitMix64 finaliser over the parent and index.
    pub fn derive(self, index: u64) -> Seed {
        let mut z = self
            .0
            .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Seed(z ^ (z >> 31))
    }

    pub fn rng(self) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(self.0)
    }
}
