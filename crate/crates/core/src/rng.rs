//! Counter-based, splittable random streams.
//!
//! A stream is identified by a master seed and a path of child steps. The
//! 256-bit ChaCha8 key is a pure function of that identity, so child streams
//! can be derived in any order, on any thread, and reproduce bit-for-bit.
//!
//! Key derivation (frozen): start from `mix(seed ^ ROOT_DOMAIN)`, then fold
//! each path step as `k = mix(k.wrapping_add(GOLDEN) ^ mix(step ^ tag))`
//! where `tag` distinguishes explicit children from sequential splits, and
//! `mix` is the SplitMix64 finalizer. The four key words are
//! `mix(k.wrapping_add(i * GOLDEN))` for `i = 1..=4`.
//!
//! Besides the sequential generator (ChaCha stream 0), every stream exposes
//! random-access lanes: word `i` of lane `l` is the `i`-th 64-bit output of
//! ChaCha stream `l`. The construction samplers read vertex labels and edge
//! summand uniforms by vertex/edge id from dedicated lanes.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const ROOT_DOMAIN: u64 = 0x5475_706c_6577_6973;
const CHILD_TAG: u64 = 0x0000_0000_0000_0000;
const SPLIT_TAG: u64 = 0xa5a5_a5a5_a5a5_a5a5;

/// Lane holding one word per vertex id (vertex labels).
pub const LABEL_LANE: u64 = 1;
/// Lane holding one word per edge id (summand uniforms).
pub const SUMMAND_LANE: u64 = 2;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PathStep {
    Child(u64),
    Split(u64),
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    path: Vec<PathStep>,
    state: u64,
    rng: ChaCha8Rng,
    splits: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::from_path(seed, Vec::new())
    }

    fn from_path(seed: u64, path: Vec<PathStep>) -> Self {
        let mut state = mix(seed ^ ROOT_DOMAIN);
        for step in &path {
            let (value, tag) = match *step {
                PathStep::Child(i) => (i, CHILD_TAG),
                PathStep::Split(i) => (i, SPLIT_TAG),
            };
            state = mix(state.wrapping_add(GOLDEN) ^ mix(value ^ tag));
        }
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            let word = mix(state.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN)));
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        RngStream {
            seed,
            path,
            state,
            rng: ChaCha8Rng::from_seed(key),
            splits: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[PathStep] {
        &self.path
    }

    /// 64-bit digest of the stream identity.
    pub fn identity(&self) -> u64 {
        self.state
    }

    /// Child stream `index`. Depends only on this stream's identity, never on
    /// how much of it has been consumed.
    pub fn derive(&self, index: u64) -> RngStream {
        let mut path = self.path.clone();
        path.push(PathStep::Child(index));
        Self::from_path(self.seed, path)
    }

    /// Next stream from the sequential split counter. Successive calls yield
    /// distinct streams; two clones split identically.
    pub fn split(&mut self) -> RngStream {
        let mut path = self.path.clone();
        path.push(PathStep::Split(self.splits));
        self.splits += 1;
        Self::from_path(self.seed, path)
    }

    pub fn lane(&self, lane: u64) -> Lane {
        assert!(lane != 0, "lane 0 is the sequential stream");
        let mut rng = self.rng.clone();
        rng.set_stream(lane);
        rng.set_word_pos(0);
        Lane { rng, next: 0 }
    }

    /// Uniform on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        open01(self.rng.next_u64())
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Random-access view of one ChaCha stream, one 64-bit word per index.
#[derive(Clone, Debug)]
pub struct Lane {
    rng: ChaCha8Rng,
    next: u64,
}

impl Lane {
    pub fn word(&mut self, index: u64) -> u64 {
        if index != self.next {
            self.rng.set_word_pos(u128::from(index) * 2);
        }
        self.next = index + 1;
        self.rng.next_u64()
    }

    pub fn open01(&mut self, index: u64) -> f64 {
        open01(self.word(index))
    }

    /// Uniform label in `1..=ell` via multiply-shift reduction.
    pub fn label(&mut self, index: u64, ell: u32) -> u32 {
        let w = self.word(index);
        1 + ((u128::from(w) * u128::from(ell)) >> 64) as u32
    }
}

pub fn open01(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn siblings_differ() {
        let s = RngStream::new(7);
        assert_ne!(s.derive(0).next_u64(), s.derive(1).next_u64());
    }

    #[test]
    fn path_order_matters() {
        let s = RngStream::new(7);
        let a = s.derive(0).derive(1).next_u64();
        let b = s.derive(1).derive(0).next_u64();
        assert_ne!(a, b);
    }

    #[test]
    fn derive_ignores_consumption() {
        let mut s = RngStream::new(3);
        let before = s.derive(5).next_u64();
        for _ in 0..100 {
            s.next_u64();
        }
        assert_eq!(before, s.derive(5).next_u64());
    }

    #[test]
    fn split_is_not_derive() {
        let mut s = RngStream::new(3);
        let split0 = s.split().next_u64();
        let split1 = s.split().next_u64();
        assert_ne!(split0, split1);
        assert_ne!(split0, s.derive(0).next_u64());
    }

    #[test]
    fn lane_random_access_matches_sequential() {
        let s = RngStream::new(11);
        let mut seq = s.lane(LABEL_LANE);
        let words: Vec<u64> = (0..40).map(|i| seq.word(i)).collect();
        let mut random = s.lane(LABEL_LANE);
        for &i in &[17u64, 3, 39, 0, 18, 19, 2] {
            assert_eq!(random.word(i), words[i as usize]);
        }
        assert_ne!(s.lane(SUMMAND_LANE).word(0), words[0]);
    }

    #[test]
    fn labels_in_range() {
        let mut lane = RngStream::new(1).lane(LABEL_LANE);
        for i in 0..1000 {
            let l = lane.label(i, 3);
            assert!((1..=3).contains(&l));
        }
    }

    #[test]
    fn open01_bounds() {
        assert!(open01(0) > 0.0);
        assert!(open01(u64::MAX) < 1.0);
    }
}
