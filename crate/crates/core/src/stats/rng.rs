//! Counter-based random streams.
//!
//! Every sample owns its own generator, seeded from a hash of the run seed,
//! a tag naming the estimate, the estimate's parameters and the sample
//! index. Parallel and serial evaluation therefore draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of sample `index` of the stream `(seed, tag, params)`.
pub fn stream_seed(seed: u64, tag: &str, params: &[f64], index: u64) -> u64 {
    let mut h = fnv(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv(h, tag.as_bytes());
    h = fnv(h, &[0xff]);
    for p in params {
        h = fnv(h, &p.to_bits().to_le_bytes());
    }
    h = fnv(h, &index.to_le_bytes());
    splitmix(h)
}

/// A family of per-sample generators keyed by seed, tag and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    seed: u64,
    tag: String,
    params: Vec<f64>,
}

impl Stream {
    pub fn new(seed: u64, tag: impl Into<String>, params: &[f64]) -> Self {
        Self {
            seed,
            tag: tag.into(),
            params: params.to_vec(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A sub-stream with an extended tag and parameter list.
    pub fn child(&self, tag: &str, params: &[f64]) -> Self {
        let mut all = self.params.clone();
        all.extend_from_slice(params);
        Self {
            seed: self.seed,
            tag: format!("{}/{}", self.tag, tag),
            params: all,
        }
    }

    pub fn sample_seed(&self, index: u64) -> u64 {
        stream_seed(self.seed, &self.tag, &self.params, index)
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.sample_seed(index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = Stream::new(7, "haar", &[3.0]);
        let a: Vec<u64> = (0..4).map(|i| s.rng(i).random()).collect();
        let b: Vec<u64> = (0..4).map(|i| s.rng(i).random()).collect();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        assert_ne!(s.sample_seed(0), Stream::new(8, "haar", &[3.0]).sample_seed(0));
        assert_ne!(s.sample_seed(0), Stream::new(7, "haar", &[3.5]).sample_seed(0));
        assert_ne!(s.sample_seed(0), Stream::new(7, "ks", &[3.0]).sample_seed(0));
        assert_ne!(s.sample_seed(0), s.child("x", &[]).sample_seed(0));
    }

    #[test]
    fn splitmix_reference_value() {
        // First output of the reference splitmix64 generator seeded with 0.
        assert_eq!(splitmix(0), 0xe220_a839_7b1d_cdaf);
    }
}
