//! Monte Carlo driver and summary statistics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};

/// Samples accumulated sequentially before the tree reduction.
const BLOCK: usize = 256;

/// Unit of reported capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

impl LogBase {
    /// Factor converting nats to this unit.
    pub fn from_nats(self) -> f64 {
        match self {
            LogBase::Bits => std::f64::consts::LOG2_E,
            LogBase::Nats => 1.0,
        }
    }
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Number of work shards; affects scheduling only, never results.
    pub shards: usize,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        McOptions {
            samples,
            seed,
            shards: rayon::current_num_threads().max(1),
        }
    }

    pub fn with_shards(mut self, shards: usize) -> Self {
        self.shards = shards.max(1);
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.samples < 100 {
            return Err(Error::Argument(format!(
                "Monte Carlo needs at least 100 samples, got {}",
                self.samples
            )));
        }
        Ok(())
    }
}

/// Evaluates `f` on every sample stream and returns the values in sample order.
pub fn monte_carlo<T, F>(opts: &McOptions, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync + Send,
{
    let chunk = opts.samples.div_ceil(opts.shards.max(1)).max(1);
    (0..opts.samples)
        .into_par_iter()
        .with_min_len(chunk)
        .map(|i| f(&mut substream(opts.seed, i as u64)))
        .collect()
}

/// Running count, mean and centred sum of squares.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(a: Moments, b: Moments) -> Moments {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let n = a.count + b.count;
        let delta = b.mean - a.mean;
        let mean = a.mean + delta * (b.count as f64 / n as f64);
        let m2 = a.m2 + b.m2 + delta * delta * (a.count as f64 * b.count as f64 / n as f64);
        Moments { count: n, mean, m2 }
    }

    /// Fixed-block sequential accumulation followed by a pairwise tree
    /// merge; the result depends only on the order of `values`.
    pub fn of(values: &[f64]) -> Moments {
        let mut level: Vec<Moments> = values
            .chunks(BLOCK)
            .map(|block| {
                let mut m = Moments::default();
                block.iter().for_each(|&x| m.push(x));
                m
            })
            .collect();
        if level.is_empty() {
            return Moments::default();
        }
        while level.len() > 1 {
            level = level
                .chunks(2)
                .map(|p| {
                    if p.len() == 2 {
                        Moments::merge(p[0], p[1])
                    } else {
                        p[0]
                    }
                })
                .collect();
        }
        level[0]
    }

    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.sample_variance() / self.count as f64).sqrt()
        }
    }
}

/// Monte Carlo estimate of an ergodic quantity: the unit of every reported
/// number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
    pub base: LogBase,
    /// Switch positions skipped as rank deficient, summed over samples.
    pub singular_candidates: u64,
}

impl CapacityEstimate {
    /// Estimate from per-sample values in nats.
    pub fn from_nats(values: &[f64], seed: u64) -> Self {
        let m = Moments::of(values);
        CapacityEstimate {
            mean: m.mean,
            std_error: m.std_error(),
            samples: values.len(),
            seed,
            base: LogBase::Nats,
            singular_candidates: 0,
        }
    }

    pub fn in_base(&self, base: LogBase) -> Self {
        let f = base.from_nats() / self.base.from_nats();
        CapacityEstimate {
            mean: self.mean * f,
            std_error: self.std_error * f,
            base,
            ..*self
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CapacityEstimate {
            mean: self.mean * factor,
            std_error: self.std_error * factor,
            ..*self
        }
    }

    /// `sqrt(se_a^2 + se_b^2)` in the units of `self`.
    pub fn combined_se(&self, other: &CapacityEstimate) -> f64 {
        let o = other.in_base(self.base);
        (self.std_error.powi(2) + o.std_error.powi(2)).sqrt()
    }
}

/// Per-sample values of a Monte Carlo run, kept for paired comparisons.
#[derive(Debug, Clone)]
pub struct McSamples {
    /// Nats.
    pub values: Vec<f64>,
    pub seed: u64,
    pub singular_candidates: u64,
}

impl McSamples {
    pub fn estimate(&self) -> CapacityEstimate {
        CapacityEstimate {
            singular_candidates: self.singular_candidates,
            ..CapacityEstimate::from_nats(&self.values, self.seed)
        }
    }

    /// Estimate of `E[self - other]` from paired samples.
    pub fn paired_difference(&self, other: &McSamples) -> Result<CapacityEstimate> {
        if self.values.len() != other.values.len() {
            return Err(Error::Dimension(format!(
                "paired samples differ in length: {} vs {}",
                self.values.len(),
                other.values.len()
            )));
        }
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(CapacityEstimate::from_nats(&d, self.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_two_pass_formulas() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i * 37) % 101) as f64 * 0.5 - 3.0)
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let m = Moments::of(&xs);
        assert!((m.mean - mean).abs() < 1e-12);
        assert!((m.sample_variance() - var).abs() < 1e-9);
        assert!((m.std_error() - (var / n).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn shard_count_does_not_change_results() {
        let f = |rng: &mut StreamRng| crate::rng::complex_gaussian(rng).norm_sqr();
        let a = monte_carlo(&McOptions::new(5000, 11).with_shards(1), f);
        let b = monte_carlo(&McOptions::new(5000, 11).with_shards(13), f);
        let ea = CapacityEstimate::from_nats(&a, 11);
        let eb = CapacityEstimate::from_nats(&b, 11);
        assert_eq!(ea.mean.to_bits(), eb.mean.to_bits());
        assert_eq!(ea.std_error.to_bits(), eb.std_error.to_bits());
    }

    #[test]
    fn unit_conversion() {
        let e = CapacityEstimate::from_nats(&[std::f64::consts::LN_2; 4], 0);
        let b = e.in_base(LogBase::Bits);
        assert!((b.mean - 1.0).abs() < 1e-15);
        assert_eq!(b.std_error, 0.0);
    }
}
