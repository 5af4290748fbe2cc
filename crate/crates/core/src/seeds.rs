//! Deterministic seed derivation for nested random streams.

/// Mix a base seed with a stream id (splitmix64 finalizer). Every component
/// that needs its own random stream derives one through here so that a single
/// top-level seed reproduces an entire run.
pub fn derive(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
