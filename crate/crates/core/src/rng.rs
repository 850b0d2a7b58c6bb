//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! 64-bit seed and addressed by a stream index. Replication `r` of an
//! experiment always reads stream `r`, so results do not depend on how
//! replications are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name and version of the generator family, recorded in run manifests.
pub const GENERATOR: &str = "rand_chacha::ChaCha8Rng (rand_chacha 0.9), stream = replication index";

/// Generator for replication `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
