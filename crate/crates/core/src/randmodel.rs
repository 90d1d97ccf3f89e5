//! Deterministic, seeded generators for the probabilistic coefficient models
//! and test dictionaries.
//!
//! The generator stack is pinned and must never change: golden tests and the
//! experiment harness depend on exact streams.
//!
//! - Bit source: xoshiro256++ (Blackman/Vigna reference algorithm), seeded by
//!   four successive splitmix64 outputs. Period 2^256 - 1.
//! - Uniform doubles: top 53 bits, `(x >> 11) * 2^-53`.
//! - Gaussians: Box-Muller on the pinned stream (one spare cached).
//! - Bounded integers: rejection sampling on the raw 64-bit stream.
//! - Fixed-k support selection: partial Fisher-Yates over `[n]` per column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

/// splitmix64 finalizer round; also the seeding function for the main stream.
#[inline]
fn splitmix64_mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed derivation: a splitmix-style finalizer applied to the
/// folded inputs. Tag order matters; distinct tag tuples give distinct
/// streams with overwhelming probability.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64_mix(master);
    for (i, &tag) in tags.iter().enumerate() {
        // the per-index round constant keeps small-integer (master, tag)
        // pairs away from the fold's self-cancellation family
        let round = (i as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        h = splitmix64_mix(h ^ splitmix64_mix(tag ^ round));
    }
    h
}

/// The pinned toolkit PRNG: xoshiro256++ with splitmix64 seeding.
#[derive(Clone, Debug)]
pub struct Prng {
    s: [u64; 4],
    spare_normal: Option<f64>,
}

impl Prng {
    pub fn seed_from(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for slot in s.iter_mut() {
            sm = sm.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = sm;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            *slot = z ^ (z >> 31);
        }
        Prng { s, spare_normal: None }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Uniform +1/-1.
    #[inline]
    pub fn rademacher(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform integer in [0, bound) by rejection; bound must be positive.
    pub fn uniform_usize(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        let bound = bound as u64;
        let reject_below = bound.wrapping_neg() % bound; // 2^64 mod bound
        loop {
            let x = self.next_u64();
            if x >= reject_below {
                return (x % bound) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.uniform_usize(i + 1);
            items.swap(i, j);
        }
    }
}

/// Distribution of the nonzero coefficient values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueDist {
    #[default]
    Gaussian,
    Rademacher,
}

impl ValueDist {
    fn draw(self, rng: &mut Prng) -> f64 {
        match self {
            ValueDist::Gaussian => rng.normal(),
            ValueDist::Rademacher => rng.rademacher(),
        }
    }

    /// Expected magnitude of a nonzero value.
    pub fn mean_abs(self) -> f64 {
        match self {
            ValueDist::Gaussian => (2.0 / std::f64::consts::PI).sqrt(),
            ValueDist::Rademacher => 1.0,
        }
    }
}

/// Sparsity pattern of the coefficient matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sparsity {
    /// Each entry nonzero independently with probability theta.
    Bernoulli { theta: f64 },
    /// Exactly k nonzeros per column at uniform distinct positions.
    FixedK { k: usize },
}

/// Parameters of the random sparse coefficient generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffModel {
    pub n: usize,
    pub p: usize,
    pub sparsity: Sparsity,
    pub dist: ValueDist,
    pub seed: u64,
}

impl CoeffModel {
    pub fn bernoulli(n: usize, p: usize, theta: f64, dist: ValueDist, seed: u64) -> Self {
        CoeffModel { n, p, sparsity: Sparsity::Bernoulli { theta }, dist, seed }
    }

    pub fn fixed_k(n: usize, p: usize, k: usize, dist: ValueDist, seed: u64) -> Self {
        CoeffModel { n, p, sparsity: Sparsity::FixedK { k }, dist, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Config("coefficient matrix needs n >= 1 and p >= 1".into()));
        }
        match self.sparsity {
            // theta = 1 is the fully dense corner used by sanity checks;
            // theta -> 0 is not representable
            Sparsity::Bernoulli { theta } => {
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(Error::Config(format!("bernoulli theta {theta} outside (0, 1]")));
                }
            }
            Sparsity::FixedK { k } => {
                if k == 0 || k > self.n {
                    return Err(Error::Config(format!("fixed_k k={k} outside [1, n={}]", self.n)));
                }
            }
        }
        Ok(())
    }
}

/// Generate the coefficient matrix for a model; bit-identical for equal models.
pub fn gen_coeffs(model: &CoeffModel) -> Result<Mat> {
    model.validate()?;
    let mut rng = Prng::seed_from(model.seed);
    let mut x = Mat::zeros(model.n, model.p);
    match model.sparsity {
        Sparsity::Bernoulli { theta } => {
            for i in 0..model.n {
                for j in 0..model.p {
                    if rng.next_f64() < theta {
                        x.set(i, j, model.dist.draw(&mut rng));
                    }
                }
            }
        }
        Sparsity::FixedK { k } => {
            let n = model.n;
            let mut positions: Vec<usize> = (0..n).collect();
            for j in 0..model.p {
                for (t, slot) in positions.iter_mut().enumerate() {
                    *slot = t;
                }
                for t in 0..k {
                    let u = t + rng.uniform_usize(n - t);
                    positions.swap(t, u);
                }
                for &i in &positions[..k] {
                    x.set(i, j, model.dist.draw(&mut rng));
                }
            }
        }
    }
    Ok(x)
}

/// Dictionary flavor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DictKind {
    #[default]
    GaussianIid,
    Hadamard,
    Identity,
}

/// Parameters of the test dictionary generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DictModel {
    pub n: usize,
    pub kind: DictKind,
    pub seed: u64,
}

/// Generate an n-by-n dictionary.
pub fn gen_dict(model: &DictModel) -> Result<Mat> {
    if model.n == 0 {
        return Err(Error::Config("dictionary needs n >= 1".into()));
    }
    match model.kind {
        DictKind::GaussianIid => {
            let mut rng = Prng::seed_from(model.seed);
            let data = (0..model.n * model.n).map(|_| rng.normal()).collect();
            Mat::from_vec(model.n, model.n, data)
        }
        DictKind::Hadamard => {
            let n = model.n;
            if !n.is_power_of_two() {
                return Err(Error::Config(format!("hadamard order {n} is not a power of 2")));
            }
            // Sylvester construction
            let mut h = Mat::from_vec(1, 1, vec![1.0])?;
            let mut size = 1;
            while size < n {
                let mut next = Mat::zeros(2 * size, 2 * size);
                for i in 0..size {
                    for j in 0..size {
                        let v = h.get(i, j);
                        next.set(i, j, v);
                        next.set(i, j + size, v);
                        next.set(i + size, j, v);
                        next.set(i + size, j + size, -v);
                    }
                }
                h = next;
                size *= 2;
            }
            Ok(h)
        }
        DictKind::Identity => Ok(Mat::identity(model.n)),
    }
}
