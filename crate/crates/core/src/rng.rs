//! Counter-based random streams for reproducible parallel simulation.
//!
//! Every Gaussian increment is addressable by `(master seed, chain id,
//! step index, substream, lane)`, so coupled chains can share Brownian
//! increments and interpolation bridges can replay the increment of the
//! step they refine. Same key, same draw, regardless of worker count.

/// Substream tags, one per independent noise source of a chain.
pub mod sub {
    /// Brownian increment of an EM step.
    pub const DW: u64 = 0;
    /// Stochastic-gradient noise ζ.
    pub const ZETA: u64 = 1;
    /// Brownian-bridge draws used by off-grid interpolation.
    pub const BRIDGE: u64 = 2;
    /// Initial-condition sampling.
    pub const INIT: u64 = 3;
    /// Minibatch index shuffling.
    pub const BATCH: u64 = 4;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One logical noise stream, keyed by (master seed, chain id).
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    master_seed: u64,
    chain_id: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64, chain_id: u64) -> Self {
        Self { master_seed, chain_id }
    }

    pub fn chain_id(&self) -> u64 {
        self.chain_id
    }

    /// Raw 64-bit output for key (step, substream, lane).
    #[inline]
    pub fn raw(&self, step: u64, substream: u64, lane: u64) -> u64 {
        let mut h = splitmix64(self.master_seed);
        h = splitmix64(h ^ self.chain_id.wrapping_mul(0xd6e8_feb8_6659_fd93));
        h = splitmix64(h ^ step.wrapping_mul(0xa076_1d64_78bd_642f));
        h = splitmix64(h ^ substream.wrapping_mul(0xe703_7ed1_a0b4_28db));
        splitmix64(h ^ lane.wrapping_mul(0x8ebc_6af0_9c88_c6e3))
    }

    /// Uniform draw in (0, 1).
    #[inline]
    pub fn uniform(&self, step: u64, substream: u64, lane: u64) -> f64 {
        let bits = self.raw(step, substream, lane) >> 11;
        (bits as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw via Box-Muller; lanes are independent.
    #[inline]
    pub fn gaussian(&self, step: u64, substream: u64, lane: u64) -> f64 {
        let u1 = self.uniform(step, substream, 2 * lane);
        let u2 = self.uniform(step, substream, 2 * lane + 1);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Vector of standard normals.
    pub fn gaussian_vec(&self, step: u64, substream: u64, dim: usize) -> Vec<f64> {
        (0..dim).map(|i| self.gaussian(step, substream, i as u64)).collect()
    }

    /// Stateful generator seeded from this stream, for shuffles.
    pub fn sequential(&self, step: u64, substream: u64) -> SeqRng {
        SeqRng { state: self.raw(step, substream, u64::MAX) }
    }
}

/// Small sequential generator (splitmix64 walk) for index shuffling.
pub struct SeqRng {
    state: u64,
}

impl SeqRng {
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        splitmix64(self.state)
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }
}

/// First `m` entries of a Fisher-Yates partial shuffle of 0..n.
pub fn sample_without_replacement(n: usize, m: usize, rng: &mut SeqRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let m = m.min(n);
    for i in 0..m {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx
}
