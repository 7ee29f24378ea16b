use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Purpose tag for a random stream.
///
/// Each purpose maps to a distinct ChaCha stream id, so draws for weight
/// initialization never share keystream with minibatch shuffling, k-means
/// seeding, and so on, even under the same root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    KMeans,
    Synthesis,
    Subset,
    /// Re-initialization of the classification head before fine-tuning.
    HeadInit,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Shuffle => 2,
            Stream::KMeans => 3,
            Stream::Synthesis => 4,
            Stream::Subset => 5,
            Stream::HeadInit => 6,
        }
    }
}

/// Seeded ChaCha8 generator.
///
/// `Rng::new(seed)` is ChaCha8 seeded through `seed_from_u64` on stream 0;
/// `Rng::for_stream(seed, s)` uses the same key on the stream id of `s`.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn for_stream(seed: u64, stream: Stream) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream.id());
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// Mixes a root seed with a tag (e.g. a sweep member's train size) into an
/// independent seed, using the SplitMix64 finalizer.
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(root ^ mix(tag))
}
