//! Deterministic random streams.
//!
//! Every random draw made by the engine comes from an [`RngStream`] derived
//! from `(seed, domain, step, index)` by a SplitMix64-style mixer. A particle's
//! proposal at step `t` therefore depends only on the run seed and on `(t, n)`,
//! never on which worker thread evaluates it or in which order.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, Gamma, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Purpose tags separating the substream families of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Prior = 1,
    Propose = 2,
    MixtureSelect = 3,
    Resample = 4,
    Data = 5,
    Bootstrap = 6,
    User = 7,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a counter tuple into a 64-bit key.
#[inline]
pub fn derive_key(seed: u64, domain: Domain, step: u64, index: u64) -> u64 {
    let mut h = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    h = splitmix64(h ^ (domain as u64));
    h = splitmix64(h ^ step);
    splitmix64(h ^ index.rotate_left(32))
}

/// A reproducible pseudo-random stream (Xoshiro256++ under the hood).
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// The substream identified by `(seed, domain, step, index)`.
    #[inline]
    pub fn substream(seed: u64, domain: Domain, step: u64, index: u64) -> Self {
        Self::new(derive_key(seed, domain, step, index))
    }

    /// Forks a child stream; the parent advances by one draw.
    pub fn fork(&mut self) -> Self {
        Self::new(self.inner.next_u64())
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// A chi-square draw with `dof` degrees of freedom (any real `dof > 0`).
    pub fn chi_square(&mut self, dof: f64) -> f64 {
        ChiSquare::new(dof).sample(self)
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Pre-built chi-square sampler, `Gamma(dof / 2, 2)`.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquare {
    gamma: Gamma<f64>,
}

impl ChiSquare {
    /// Panics unless `dof > 0` and finite.
    pub fn new(dof: f64) -> Self {
        let gamma = Gamma::new(0.5 * dof, 2.0).expect("chi-square dof must be positive and finite");
        Self { gamma }
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.gamma.sample(&mut rng.inner)
    }
}
