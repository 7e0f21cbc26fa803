//! Reproducible random streams.
//!
//! Every stochastic routine takes an explicit root seed. Sample `i` of a
//! Monte Carlo run draws from ChaCha stream `i` keyed by the root seed, so the
//! value of a sample depends on `(seed, i)` only, never on how samples are
//! spread over worker threads. Estimators that share a seed therefore see the
//! same channel realizations (common random numbers).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Independent generator for sample `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a new root seed from `seed` and a label (splitmix64 over the
/// label bytes). Used to keep unrelated random draws on disjoint keys.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut x = seed ^ 0x9E37_79B9_7F4A_7C15;
    for b in label.bytes() {
        x = splitmix(x ^ u64::from(b));
    }
    splitmix(x)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One circularly-symmetric `CN(0, 1)` draw.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
