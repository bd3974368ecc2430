//! Circular phase arithmetic and addressable pseudorandom streams.
//!
//! Every absolute phase constant in the simulator (packet phases, cluster
//! phases) comes out of a [`SeededStream`]. A stream is addressed by
//! `(seed, stream_id, position)`: the draw at a given address is the same on
//! every platform and independent of how many other streams were consumed
//! before it, which is what makes ensemble runs replayable in any order.

use std::fmt;
use std::ops::Add;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// An angle reduced to `[0, 2π)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Phase<T>(T);

impl<T: Real> Phase<T> {
    /// Reduces any finite real modulo 2π onto `[0, 2π)`.
    pub fn new(radians: T) -> Self {
        let tau = T::tau();
        let mut r = radians % tau;
        if r < T::zero() {
            r = r + tau;
        }
        // `-tiny + tau` can round up to exactly tau.
        if r >= tau {
            r = T::zero();
        }
        Phase(r)
    }

    pub fn zero() -> Self {
        Phase(T::zero())
    }

    /// Maps `u` in `[0, 1)` linearly onto the circle.
    pub fn from_unit(u: T) -> Self {
        Self::new(u * T::tau())
    }

    pub fn value(self) -> T {
        self.0
    }

    /// Fraction of the full turn, `value / 2π`, in `[0, 1)`.
    pub fn turns(self) -> T {
        self.0 / T::tau()
    }

    pub fn cast<U: Real>(self) -> Phase<U> {
        Phase::new(U::lit(self.0.to_f64_lossy()))
    }
}

impl<T: Real> Add for Phase<T> {
    type Output = Phase<T>;

    /// Phase constants of independent factors add modulo 2π.
    fn add(self, rhs: Self) -> Self::Output {
        Phase::new(self.0 + rhs.0)
    }
}

impl<T: Real> fmt::Display for Phase<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shortest angular separation of two phases, in `[0, π]`.
pub fn circular_distance<T: Real>(a: Phase<T>, b: Phase<T>) -> T {
    let d = (a.0 - b.0).abs();
    d.min(T::tau() - d)
}

/// Well-known sub-stream labels. Keeping them in one place guarantees that
/// different consumers of one master seed never share a stream.
pub mod stream_tags {
    pub const SCREEN_GEOMETRY: u64 = 0x5C_0000;
    pub const SCREEN_POSITIONS: u64 = 0x5C_0001;
    pub const SCREEN_PHASES: u64 = 0x5C_0002;
    pub const SCREEN_SENSITIVITY: u64 = 0x5C_0003;
    pub const PACKET_PHASES: u64 = 0xA1_0001;
    pub const TRIAL_PHASES: u64 = 0xA2_0001;
    pub const LEGACY: u64 = 0x1E_0001;
    pub const BIRTHDAY: u64 = 0xB1_0001;
    pub const WIGNER: u64 = 0x31_0001;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seeded, counter-addressed generator (ChaCha8 keyed by `seed`, with
/// `stream_id` as the ChaCha stream nonce).
///
/// `position` counts 64-bit words consumed. `SeededStream::at(s, id, p)`
/// yields exactly the draw a fresh stream would produce after `p` words.
#[derive(Clone)]
pub struct SeededStream {
    seed: u64,
    stream_id: u64,
    position: u64,
    rng: ChaCha8Rng,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::at(seed, stream_id, 0)
    }

    pub fn at(seed: u64, stream_id: u64, position: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        if position != 0 {
            rng.set_word_pos(u128::from(position) * 2);
        }
        SeededStream {
            seed,
            stream_id,
            position,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// Child stream of the same seed. Labels are mixed so that
    /// `substream(a).substream(b)` and `substream(b).substream(a)` differ.
    pub fn substream(&self, label: u64) -> SeededStream {
        let id = splitmix64(self.stream_id ^ splitmix64(label.wrapping_add(0x2545_F491_4F6C_DD1D)));
        SeededStream::new(self.seed, id)
    }

    /// Child stream addressed by a label and an index (e.g. a trial id).
    pub fn indexed(&self, label: u64, index: u64) -> SeededStream {
        self.substream(label).substream(index)
    }

    pub fn next_word(&mut self) -> u64 {
        self.position += 1;
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)` by multiply-shift; `n` must be non-zero.
    pub fn next_below(&mut self, n: u64) -> u64 {
        ((u128::from(self.next_word()) * u128::from(n)) >> 64) as u64
    }

    pub fn draw_phase<T: Real>(&mut self) -> Phase<T> {
        Phase::from_unit(T::lit(self.next_unit()))
    }
}

impl fmt::Debug for SeededStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeededStream")
            .field("seed", &self.seed)
            .field("stream_id", &self.stream_id)
            .field("position", &self.position)
            .finish()
    }
}

impl RngCore for SeededStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Parses a seed written in decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(text: &str) -> Result<u64, std::num::ParseIntError> {
    let t = text.trim();
    match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    }
}
