//! Counter-based random streams.
//!
//! A stream is identified by `(seed, stream)`; the `counter`-th logical draw
//! gets its own ChaCha8 stream, so any draw can be regenerated in isolation
//! and the environment, planners and agents never share generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `std`'s hasher.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Hash a sequence of string parts with a separator that cannot occur in ids.
pub fn stable_hash_parts(parts: &[&str]) -> u64 {
    let mut buf = Vec::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            buf.push(0x1f);
        }
        buf.extend_from_slice(p.as_bytes());
    }
    stable_hash(&buf)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            seed,
            stream,
            counter: 0,
        }
    }

    /// Stream keyed by a name, e.g. a retail edge id.
    pub fn named(seed: u64, name: &str) -> Self {
        Self::new(seed, stable_hash(name.as_bytes()))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn with_counter(mut self, counter: u64) -> Self {
        self.counter = counter;
        self
    }

    /// Generator for draw index `counter`. Pure in `(seed, stream, counter)`.
    pub fn generator_at(&self, counter: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut sm = self.seed ^ self.stream.rotate_left(17);
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut sm).to_le_bytes());
        }
        // Mix in the raw stream id so (a, b) and (b', a') collisions of the
        // xor above still land on different keys.
        let tail = splitmix64(&mut self.stream.clone()).to_le_bytes();
        for (k, t) in key[24..].iter_mut().zip(tail) {
            *k ^= t;
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(counter);
        rng
    }

    /// Generator for the next logical draw; advances the counter by one.
    pub fn next_generator(&mut self) -> ChaCha8Rng {
        let rng = self.generator_at(self.counter);
        self.counter += 1;
        rng
    }
}
