//! Seeded random streams.
//!
//! All randomness comes from ChaCha8, a counter-based generator. A stream is
//! addressed by `(base seed, tag, size, sample)`: the base seed keys the
//! cipher and the remaining coordinates are mixed into the 64-bit stream id,
//!
//! ```text
//! stream = mix(tag) ^ mix((size << 32) | sample)
//! ```
//!
//! with `mix` the SplitMix64 finaliser. Distinct samples therefore draw from
//! disjoint keystreams, independent of evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Gue = 0x4755_4500,
    Anderson = 0x414e_4400,
    Pattern = 0x5041_5400,
    Gauge = 0x4741_5500,
    Misc = 0x4d49_5300,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_id(tag: StreamTag, size: u64, sample: u64) -> u64 {
    splitmix64(tag as u64) ^ splitmix64((size << 32) | (sample & 0xffff_ffff))
}

pub fn stream(seed: u64, tag: StreamTag, size: u64, sample: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, size, sample));
    rng
}
