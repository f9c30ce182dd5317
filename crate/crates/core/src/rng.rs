//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the experiment seed, with the
//! replicate index selecting the 64-bit stream (nonce). Two streams with the
//! same seed and different ids never overlap, and a stream can be rebuilt on
//! any thread without coordination.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Stream of replicate `index` within the experiment keyed by this
    /// stream: same seed, stream id (stream_id << 32) + index. Distinct for
    /// stream ids and indices below 2^32.
    pub fn replicate(&self, index: u64) -> RngStream {
        RngStream::new(self.seed, (self.stream_id << 32).wrapping_add(index))
    }

    /// Position of the underlying block counter, in 32-bit words.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            // 53 random mantissa bits, zero rejected.
            let bits = self.inner.next_u64() >> 11;
            if bits != 0 {
                return bits as f64 * (1.0 / (1u64 << 53) as f64);
            }
        }
    }

    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn next_bit(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Lemire's multiply-shift with rejection.
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.inner.next_u64();
            let m = (x as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 4);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn replicate_streams_are_keyed_by_parent() {
        let parent = RngStream::new(5, 2);
        let mut a = parent.replicate(7);
        assert_eq!(a.seed(), 5);
        assert_eq!(a.stream_id(), (2 << 32) + 7);
        let mut b = RngStream::new(5, (2 << 32) + 7);
        assert_eq!(a.next_u64(), b.next_u64());
        assert_ne!(RngStream::new(5, 3).replicate(7).stream_id(), a.stream_id());
    }

    #[test]
    fn uniform_open_bounds() {
        let mut r = RngStream::new(1, 0);
        for _ in 0..100_000 {
            let u = r.uniform_open();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut r = RngStream::new(1, 0);
        let mut seen = [0usize; 5];
        for _ in 0..10_000 {
            seen[r.below(5) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 1800 && c < 2200), "{seen:?}");
    }

    #[test]
    fn stream_correlation_is_small() {
        let n = 100_000;
        let mut a = RngStream::new(11, 0);
        let mut b = RngStream::new(11, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.uniform_open()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.uniform_open()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!(rho.abs() < 0.01, "rho = {rho}");
    }
}
