//! Counter-based replica streams.
//!
//! Replica `i` of a run with master seed `s` draws from the ChaCha8 stream
//! keyed by `s` with stream id `i`, so its samples do not depend on which
//! worker produces them or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicaRng = ChaCha8Rng;

pub fn replica_rng(master_seed: u64, replica: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}
