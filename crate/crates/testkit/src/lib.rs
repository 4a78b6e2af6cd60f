//! Test support for `bir-core`: seeded random IR generators, an
//! independent structural-equality oracle, one defect injector per
//! violation code and deterministic named fixtures.

pub mod fixtures;
pub mod gen;
pub mod inject;
pub mod oracle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG every generator in this crate is exercised with.
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}
