//! Reproducible parallel Monte Carlo.
//!
//! Samples are produced in fixed blocks; block `k` draws from a ChaCha8
//! generator keyed by `(seed, stream = k)`. Blocks are evaluated on a pool of
//! `n_streams` workers and merged in block order, so every result is
//! bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Samples per block.
pub const BLOCK: usize = 8192;

pub type McRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCSpec {
    pub seed: u64,
    pub n_samples: usize,
    /// Worker count; has no influence on results.
    pub n_streams: usize,
}

impl Default for MCSpec {
    fn default() -> Self {
        Self { seed: 20_240_601, n_samples: 200_000, n_streams: 1 }
    }
}

impl MCSpec {
    pub fn new(seed: u64, n_samples: usize) -> Self {
        Self { seed, n_samples, n_streams: 1 }
    }

    pub fn with_streams(mut self, n: usize) -> Self {
        self.n_streams = n.max(1);
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    /// A derived spec for an independent experiment sharing this seed.
    pub fn substream(&self, tag: u64) -> Self {
        let mut s = *self;
        s.seed = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(tag.wrapping_mul(0xD1B5_4A32_D192_ED03))
            .rotate_left(17);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be positive".into()));
        }
        Ok(())
    }

    fn blocks(&self) -> usize {
        self.n_samples.div_ceil(BLOCK)
    }

    /// Generator for block `k`.
    pub fn block_rng(&self, k: usize) -> McRng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(k as u64);
        r
    }

    /// Runs `work(rng, start, len)` for every block and returns the block
    /// results in order.
    pub fn map_blocks<S, F>(&self, work: F) -> Result<Vec<S>>
    where
        S: Send,
        F: Fn(&mut McRng, usize, usize) -> S + Sync,
    {
        self.validate()?;
        let nb = self.blocks();
        let run = |k: usize| {
            let start = k * BLOCK;
            let len = BLOCK.min(self.n_samples - start);
            let mut rng = self.block_rng(k);
            work(&mut rng, start, len)
        };
        if self.n_streams <= 1 {
            return Ok((0..nb).map(run).collect());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.n_streams)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
        Ok(pool.install(|| (0..nb).into_par_iter().map(run).collect()))
    }

    /// `n_samples` draws of dimension `dim`, row-major.
    pub fn draw<T, F>(&self, dim: usize, draw: F) -> Result<Vec<T>>
    where
        T: Real,
        F: Fn(&mut McRng, &mut [T]) + Sync,
    {
        let blocks = self.map_blocks(|rng, _, len| {
            let mut out = vec![T::zero(); len * dim];
            for row in out.chunks_mut(dim.max(1)) {
                draw(rng, row);
            }
            out
        })?;
        let mut all = Vec::with_capacity(self.n_samples * dim);
        for b in blocks {
            all.extend(b);
        }
        Ok(all)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Estimate {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

/// An estimate with its standard error, sample size, method and seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub value: Estimate,
    pub std_error: Estimate,
    pub n: usize,
    pub method: String,
    pub seed: Option<u64>,
}

impl EstimatorReport {
    pub fn scalar(value: f64, std_error: f64, n: usize, method: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            value: Estimate::Scalar(value),
            std_error: Estimate::Scalar(std_error.max(0.0)),
            n: n.max(1),
            method: method.into(),
            seed,
        }
    }

    pub fn matrix<T: Real>(value: &Matrix<T>, se: &Matrix<T>, n: usize, method: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            value: Estimate::Matrix(value.to_nested()),
            std_error: Estimate::Matrix(se.map(|v| v.abs()).to_nested()),
            n: n.max(1),
            method: method.into(),
            seed,
        }
    }

    /// Scalar value, or the trace of a matrix value.
    pub fn value(&self) -> f64 {
        match &self.value {
            Estimate::Scalar(v) => *v,
            Estimate::Matrix(m) => (0..m.len()).map(|i| m[i][i]).sum(),
        }
    }

    /// Scalar standard error, or the root sum of squares of the diagonal.
    pub fn se(&self) -> f64 {
        match &self.std_error {
            Estimate::Scalar(v) => *v,
            Estimate::Matrix(m) => (0..m.len()).map(|i| m[i][i] * m[i][i]).sum::<f64>().sqrt(),
        }
    }
}

/// Running sums merged in block order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n.max(1) as f64
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean();
        ((self.sum_sq - self.n as f64 * m * m) / (self.n - 1) as f64).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n.max(1) as f64).sqrt()
    }
}

/// Mean of a per-sample statistic with its standard error.
pub fn mean_report(values: &[f64], method: impl Into<String>, seed: Option<u64>) -> Result<EstimatorReport> {
    // Accumulate per block, in order, so sums do not depend on scheduling.
    let mut total = Moments::default();
    for (b, chunk) in values.chunks(BLOCK).enumerate() {
        let mut m = Moments::default();
        for (i, &v) in chunk.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { index: b * BLOCK + i });
            }
            m.push(v);
        }
        total.merge(&m);
    }
    if total.n == 0 {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    Ok(EstimatorReport::scalar(total.mean(), total.std_error(), total.n, method, seed))
}

/// `E[g(X)]` with `X` drawn by `sampler`, as an [`EstimatorReport`].
pub fn mc_expectation<G, S>(g: G, sampler: S, spec: &MCSpec) -> Result<EstimatorReport>
where
    G: Fn(f64) -> f64 + Sync,
    S: Fn(&mut McRng) -> f64 + Sync,
{
    let blocks = spec.map_blocks(|rng, start, len| {
        let mut m = Moments::default();
        for i in 0..len {
            let v = g(sampler(rng));
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { index: start + i });
            }
            m.push(v);
        }
        Ok(m)
    })?;
    let mut total = Moments::default();
    for b in blocks {
        total.merge(&b?);
    }
    Ok(EstimatorReport::scalar(
        total.mean(),
        total.std_error(),
        total.n,
        "monte-carlo",
        Some(spec.seed),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(r: &mut McRng) -> f64 {
        StandardNormal.sample(r)
    }

    #[test]
    fn second_moment_of_normal() {
        let spec = MCSpec::new(7, 1_000_000);
        let r = mc_expectation(|x| x * x, normal, &spec).unwrap();
        assert!((r.value() - 1.0).abs() < 3.0 * r.se());
        assert!((r.se() - 0.0014).abs() < 1e-4);
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let base = MCSpec::new(11, 100_000);
        let a = mc_expectation(|x| x.sin(), normal, &base).unwrap();
        for k in [4, 16] {
            let b = mc_expectation(|x| x.sin(), normal, &base.with_streams(k)).unwrap();
            assert_eq!(a.value().to_bits(), b.value().to_bits());
            assert_eq!(a.se().to_bits(), b.se().to_bits());
        }
    }

    #[test]
    fn non_finite_sample_is_named() {
        let spec = MCSpec::new(3, 20_000);
        let err = mc_expectation(|x| if x > 3.5 { f64::NAN } else { x }, normal, &spec).unwrap_err();
        assert!(matches!(err, Error::NonFiniteSample { .. }));
    }

    #[test]
    fn draws_are_reproducible() {
        let spec = MCSpec::new(5, 10_000);
        let a: Vec<f64> = spec.draw(2, |r, row| { row[0] = normal(r); row[1] = normal(r); }).unwrap();
        let b: Vec<f64> = spec.with_streams(3).draw(2, |r, row| { row[0] = normal(r); row[1] = normal(r); }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20_000);
    }
}
