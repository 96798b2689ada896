use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Counter-based random substream.
///
/// The pair `(seed, stream_id)` fully determines the output: ChaCha20 keyed by
/// the seed, with the 64-bit stream id selecting an independent keystream.
/// Streams are single-owner and `Send`; share seeds, not streams.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream for trial `trial` of an experiment channel. Channels keep the
    /// substreams of different experiments (or retries) disjoint.
    pub fn for_trial(seed: u64, channel: u16, trial: u64) -> Self {
        debug_assert!(trial < (1 << 48));
        Self::new(seed, ((channel as u64) << 48) | trial)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            // 53 random mantissa bits
            let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RandomStream {
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
