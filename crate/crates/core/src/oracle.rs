//! Monte Carlo check of the first-order photodetection model.
//!
//! Samples are drawn from the Wigner function of the Gaussian state, which is
//! the multivariate normal with the state's moments. Photon numbers are then
//! computed exactly per sample as `|a|² - 1/2` with `a = (X + iY)/2`; the `-1/2`
//! converts the symmetric-ordered moment into `⟨a†a⟩`. Variances of `n` keep an
//! O(1) symmetric-ordering offset, small next to the `α²` signal.
//!
//! Work is split into batches of `McConfig::batch` samples. Batch `k` draws
//! from ChaCha8 stream `k` of the configured seed, and batch statistics are
//! merged pairwise in batch order, so results do not depend on how batches
//! are scheduled.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::detection::{detect_port, measure_currents, LinearObservable};
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    /// Samples per batch.
    pub batch: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_samples: 1_000_000,
            seed: 0x5eed,
            batch: 10_000,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                value: self.n_samples as f64,
            });
        }
        if self.batch < 1 {
            return Err(Error::InvalidParameter {
                name: "batch",
                value: self.batch as f64,
            });
        }
        Ok(())
    }

    pub fn batches(&self) -> u64 {
        self.n_samples.div_ceil(self.batch)
    }

    pub fn batch_len(&self, index: u64) -> u64 {
        let start = index * self.batch;
        self.batch.min(self.n_samples.saturating_sub(start))
    }

    /// The generator for one batch.
    pub fn batch_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Draws quadrature vectors `mean + L z` with `L Lᵀ = V`.
#[derive(Debug, Clone)]
pub struct WignerSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl WignerSampler {
    pub fn new(state: &GaussianState) -> Result<Self> {
        state.require_physical()?;
        let cov = state.cov().clone();
        let factor = match cov.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                let eig = nalgebra::linalg::SymmetricEigen::new(cov);
                let scale = eig.eigenvalues.amax().max(1.0);
                if eig.eigenvalues.min() < -1e-9 * scale {
                    return Err(Error::NotPositiveSemidefinite);
                }
                let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
                eig.eigenvectors * DMatrix::from_diagonal(&roots)
            }
        };
        Ok(WignerSampler {
            mean: state.mean().clone(),
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample_into<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
        normals: &mut DVector<f64>,
        out: &mut DVector<f64>,
    ) {
        for z in normals.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        out.copy_from(&self.mean);
        out.gemv(1.0, &self.factor, normals, 1.0);
    }
}

/// Iterator over Wigner samples, batch by batch.
pub struct WignerSamples {
    sampler: WignerSampler,
    config: McConfig,
    batch: u64,
    left_in_batch: u64,
    rng: ChaCha8Rng,
    normals: DVector<f64>,
}

impl Iterator for WignerSamples {
    type Item = DVector<f64>;

    fn next(&mut self) -> Option<DVector<f64>> {
        while self.left_in_batch == 0 {
            self.batch += 1;
            if self.batch >= self.config.batches() {
                return None;
            }
            self.rng = self.config.batch_rng(self.batch);
            self.left_in_batch = self.config.batch_len(self.batch);
        }
        self.left_in_batch -= 1;
        let mut out = DVector::zeros(self.sampler.dim());
        self.sampler
            .sample_into(&mut self.rng, &mut self.normals, &mut out);
        Some(out)
    }
}

/// Stream of `config.n_samples` quadrature samples of a physical state.
pub fn sample_wigner(state: &GaussianState, config: &McConfig) -> Result<WignerSamples> {
    config.validate()?;
    let sampler = WignerSampler::new(state)?;
    let dim = sampler.dim();
    Ok(WignerSamples {
        sampler,
        config: *config,
        batch: 0,
        left_in_batch: config.batch_len(0),
        rng: config.batch_rng(0),
        normals: DVector::zeros(dim),
    })
}

/// Running means and co-moments of `K` quantities (Welford / Chan updates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<const K: usize> {
    pub count: u64,
    pub mean: [f64; K],
    comoment: [[f64; K]; K],
}

impl<const K: usize> Default for Moments<K> {
    fn default() -> Self {
        Moments {
            count: 0,
            mean: [0.0; K],
            comoment: [[0.0; K]; K],
        }
    }
}

impl<const K: usize> Moments<K> {
    pub fn push(&mut self, x: &[f64; K]) {
        self.count += 1;
        let n = self.count as f64;
        let delta: [f64; K] = core::array::from_fn(|i| x[i] - self.mean[i]);
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / n;
        }
        for (row, di) in self.comoment.iter_mut().zip(&delta) {
            for ((c, xj), mj) in row.iter_mut().zip(x).zip(&self.mean) {
                *c += di * (xj - mj);
            }
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let mut out = Moments {
            count: self.count + other.count,
            ..Default::default()
        };
        let delta: [f64; K] = core::array::from_fn(|i| other.mean[i] - self.mean[i]);
        out.mean = core::array::from_fn(|i| self.mean[i] + delta[i] * nb / n);
        for i in 0..K {
            for j in 0..K {
                out.comoment[i][j] =
                    self.comoment[i][j] + other.comoment[i][j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        out
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.comoment[i][j] / (self.count - 1) as f64
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance(i, i)
    }
}

/// Pairwise merge in slice order.
pub fn merge_tree<const K: usize>(parts: &[Moments<K>]) -> Moments<K> {
    match parts.len() {
        0 => Moments::default(),
        1 => parts[0],
        n => merge_tree(&parts[..n / 2]).merge(&merge_tree(&parts[n / 2..])),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReport {
    pub n_samples: u64,
    pub mc_mean: f64,
    /// Standard error of `mc_mean`.
    pub mean_standard_error: f64,
    /// Variance of the exact quantity, with the linearized quantity evaluated on
    /// the same samples as a control variate:
    /// `linearized_variance + s²(exact) - s²(linear)`.
    pub mc_variance: f64,
    /// Plain sample variance of the exact quantity.
    pub raw_variance: f64,
    pub linearized_mean: f64,
    pub linearized_variance: f64,
    /// `|mc_variance - linearized_variance| / linearized_variance`.
    pub relative_error: f64,
    /// Standard error of `mc_variance`.
    pub standard_error: f64,
}

/// Per-sample quantities paired with their first-order predictions.
///
/// `evaluate` fills `K` values: the first `K/2` exact, the rest the matching
/// linearized values.
pub trait Statistic<const K: usize>: Sync {
    fn evaluate(&self, sample: &DVector<f64>) -> [f64; K];
    /// Linearized mean and variance of quantity `q < K/2`.
    fn prediction(&self, q: usize) -> (f64, f64);
}

/// Monte Carlo run over one state and one statistic.
pub struct MonteCarlo<S> {
    sampler: WignerSampler,
    config: McConfig,
    statistic: S,
}

impl<S> MonteCarlo<S> {
    pub fn new(state: &GaussianState, statistic: S, config: McConfig) -> Result<Self> {
        config.validate()?;
        Ok(MonteCarlo {
            sampler: WignerSampler::new(state)?,
            config,
            statistic,
        })
    }

    pub fn config(&self) -> &McConfig {
        &self.config
    }

    pub fn statistic(&self) -> &S {
        &self.statistic
    }

    pub fn batch<const K: usize>(&self, index: u64) -> Moments<K>
    where
        S: Statistic<K>,
    {
        let mut rng = self.config.batch_rng(index);
        let mut normals = DVector::zeros(self.sampler.dim());
        let mut sample = DVector::zeros(self.sampler.dim());
        let mut m = Moments::default();
        for _ in 0..self.config.batch_len(index) {
            self.sampler.sample_into(&mut rng, &mut normals, &mut sample);
            m.push(&self.statistic.evaluate(&sample));
        }
        m
    }

    /// Runs every batch sequentially.
    pub fn run<const K: usize>(&self) -> Vec<McReport>
    where
        S: Statistic<K>,
    {
        let parts: Vec<Moments<K>> = (0..self.config.batches()).map(|b| self.batch(b)).collect();
        self.finish(&parts)
    }

    /// Turns batch statistics (in batch order) into one report per quantity.
    pub fn finish<const K: usize>(&self, parts: &[Moments<K>]) -> Vec<McReport>
    where
        S: Statistic<K>,
    {
        let total = merge_tree(parts);
        let half = K / 2;
        (0..half)
            .map(|q| {
                let (lin_mean, lin_var) = self.statistic.prediction(q);
                let cv = |m: &Moments<K>| lin_var + m.variance(q) - m.variance(q + half);
                let mc_variance = cv(&total);
                let n = total.count as f64;
                let standard_error = if parts.len() >= 2 {
                    let estimates: Vec<f64> = parts.iter().map(cv).collect();
                    let b = estimates.len() as f64;
                    let mean = estimates.iter().sum::<f64>() / b;
                    let spread = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                        / (b - 1.0);
                    libm::sqrt(spread / b)
                } else {
                    libm::sqrt(2.0 / (n - 1.0).max(1.0)) * total.variance(q)
                };
                McReport {
                    n_samples: total.count,
                    mc_mean: total.mean[q],
                    mean_standard_error: libm::sqrt(total.variance(q) / n),
                    mc_variance,
                    raw_variance: total.variance(q),
                    linearized_mean: lin_mean,
                    linearized_variance: lin_var,
                    relative_error: (mc_variance - lin_var).abs() / lin_var,
                    standard_error,
                }
            })
            .collect()
    }
}

/// Exact photon number of one port next to its linearized counterpart.
#[derive(Debug, Clone)]
pub struct PortPhotons {
    modes: Vec<usize>,
    observable: LinearObservable,
    mean: DVector<f64>,
    variance: f64,
}

impl PortPhotons {
    pub fn new(state: &GaussianState, port: &[&str]) -> Result<Self> {
        let observable = detect_port(state, port)?.observable;
        let modes = port
            .iter()
            .map(|l| state.registry().require(l))
            .collect::<Result<Vec<_>>>()?;
        Ok(PortPhotons {
            variance: state.quadrature_variance(&observable.coeffs)?,
            modes,
            observable,
            mean: state.mean().clone(),
        })
    }
}

fn photons(sample: &DVector<f64>, modes: &[usize]) -> f64 {
    modes
        .iter()
        .map(|&m| {
            let (x, y) = (sample[2 * m], sample[2 * m + 1]);
            (x * x + y * y) / 4.0 - 0.5
        })
        .sum()
}

fn linear(obs: &LinearObservable, mean: &DVector<f64>, sample: &DVector<f64>) -> f64 {
    obs.dc + obs.coeffs.dot(&(sample - mean))
}

impl Statistic<2> for PortPhotons {
    fn evaluate(&self, sample: &DVector<f64>) -> [f64; 2] {
        [
            photons(sample, &self.modes),
            linear(&self.observable, &self.mean, sample),
        ]
    }

    fn prediction(&self, _q: usize) -> (f64, f64) {
        (self.observable.dc, self.variance)
    }
}

/// Exact `i₊ = (n_c + n_d)/√2` and `i₋ = (n_c - n_d)/√2` next to their
/// linearized counterparts.
#[derive(Debug, Clone)]
pub struct SplitCurrents {
    c: Vec<usize>,
    d: Vec<usize>,
    sum: LinearObservable,
    diff: LinearObservable,
    sum_variance: f64,
    diff_variance: f64,
    mean: DVector<f64>,
}

impl SplitCurrents {
    pub fn new(state: &GaussianState, port_c: &[&str], port_d: &[&str]) -> Result<Self> {
        let m = measure_currents(state, port_c, port_d, 0.0)?;
        let idx = |port: &[&str]| {
            port.iter()
                .map(|l| state.registry().require(l))
                .collect::<Result<Vec<_>>>()
        };
        Ok(SplitCurrents {
            c: idx(port_c)?,
            d: idx(port_d)?,
            sum_variance: m.sum_variance,
            diff_variance: m.diff_variance,
            sum: m.sum,
            diff: m.diff,
            mean: state.mean().clone(),
        })
    }
}

impl Statistic<4> for SplitCurrents {
    fn evaluate(&self, sample: &DVector<f64>) -> [f64; 4] {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let nc = photons(sample, &self.c);
        let nd = photons(sample, &self.d);
        [
            h * (nc + nd),
            h * (nc - nd),
            linear(&self.sum, &self.mean, sample),
            linear(&self.diff, &self.mean, sample),
        ]
    }

    fn prediction(&self, q: usize) -> (f64, f64) {
        if q == 0 {
            (self.sum.dc, self.sum_variance)
        } else {
            (self.diff.dc, self.diff_variance)
        }
    }
}

/// Exact photon statistics of one mode (or port) against the linearized model.
pub fn mc_photon_stats(state: &GaussianState, port: &[&str], config: &McConfig) -> Result<McReport> {
    let mc = MonteCarlo::new(state, PortPhotons::new(state, port)?, *config)?;
    Ok(mc.run::<2>()[0])
}

/// Reports for `i₊` and `i₋`, in that order.
pub fn mc_current_variance(
    state_after_chain: &GaussianState,
    port_c: &[&str],
    port_d: &[&str],
    config: &McConfig,
) -> Result<(McReport, McReport)> {
    let mc = MonteCarlo::new(
        state_after_chain,
        SplitCurrents::new(state_after_chain, port_c, port_d)?,
        *config,
    )?;
    let r = mc.run::<4>();
    Ok((r[0], r[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::ModeRegistry;
    use nalgebra::Complex;

    fn cfg(n: u64, seed: u64) -> McConfig {
        McConfig {
            n_samples: n,
            seed,
            batch: 4096,
        }
    }

    #[test]
    fn batches_cover_every_sample() {
        let c = McConfig {
            n_samples: 10_001,
            seed: 1,
            batch: 1000,
        };
        assert_eq!(c.batches(), 11);
        assert_eq!((0..c.batches()).map(|b| c.batch_len(b)).sum::<u64>(), 10_001);
        assert_eq!(c.batch_len(10), 1);
        assert!(McConfig { n_samples: 0, ..c }.validate().is_err());
        assert!(McConfig { batch: 0, ..c }.validate().is_err());
    }

    #[test]
    fn stream_is_reproducible_and_complete() {
        let st = GaussianState::vacuum(["a"]).unwrap();
        let c = McConfig {
            n_samples: 2500,
            seed: 9,
            batch: 1000,
        };
        let one: Vec<_> = sample_wigner(&st, &c).unwrap().collect();
        let two: Vec<_> = sample_wigner(&st, &c).unwrap().collect();
        assert_eq!(one.len(), 2500);
        assert_eq!(one, two);
        let other: Vec<_> = sample_wigner(&st, &McConfig { seed: 10, ..c }).unwrap().collect();
        assert_ne!(one, other);
    }

    #[test]
    fn vacuum_samples_have_unit_variance() {
        let st = GaussianState::vacuum(["a"]).unwrap();
        let n = 200_000u64;
        let mut m = Moments::<2>::default();
        for s in sample_wigner(&st, &cfg(n, 3)).unwrap() {
            m.push(&[s[0], s[1]]);
        }
        let se = libm::sqrt(2.0 / n as f64);
        assert!((m.variance(0) - 1.0).abs() < 4.0 * se);
        assert!((m.variance(1) - 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn non_physical_state_cannot_be_sampled() {
        let st = GaussianState::new(
            ModeRegistry::new(["a"]).unwrap(),
            DVector::zeros(2),
            DMatrix::identity(2, 2) * 0.5,
        )
        .unwrap();
        assert!(matches!(
            sample_wigner(&st, &cfg(10, 0)),
            Err(Error::NotPhysical { .. })
        ));
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<[f64; 2]> = (0..101)
            .map(|i| {
                let t = i as f64;
                [libm::sin(t) * 3.0 + 1.0, t * 0.01]
            })
            .collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|x| whole.push(x));
        let parts: Vec<Moments<2>> = xs
            .chunks(7)
            .map(|c| {
                let mut m = Moments::default();
                c.iter().for_each(|x| m.push(x));
                m
            })
            .collect();
        let merged = merge_tree(&parts);
        assert_eq!(merged.count, 101);
        for i in 0..2 {
            assert!((merged.mean[i] - whole.mean[i]).abs() < 1e-13);
            for j in 0..2 {
                assert!((merged.covariance(i, j) - whole.covariance(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_photon_number_is_zero_on_average() {
        let st = GaussianState::vacuum(["a"]).unwrap();
        let r = mc_photon_stats(&st, &["a"], &cfg(100_000, 5)).unwrap();
        assert!(r.mc_mean.abs() < 4.0 * r.mean_standard_error);
        assert!(r.mean_standard_error > 0.0);
    }

    #[test]
    fn bright_coherent_state_matches_linearization() {
        let st = GaussianState::vacuum(["a"])
            .unwrap()
            .displace("a", Complex::new(100.0, 0.0))
            .unwrap();
        let r = mc_photon_stats(&st, &["a"], &cfg(200_000, 11)).unwrap();
        assert!((r.mc_mean - 1e4).abs() < 4.0 * r.mean_standard_error);
        assert!(r.relative_error < 0.01);
        assert!(r.standard_error > 0.0);
    }

    #[test]
    fn dim_coherent_state_breaks_linearization() {
        let st = GaussianState::vacuum(["a"])
            .unwrap()
            .displace("a", Complex::new(1.0, 0.0))
            .unwrap();
        let r = mc_photon_stats(&st, &["a"], &cfg(200_000, 11)).unwrap();
        // Wigner variance of |a|² is α² + 1/4 against the linearized α²
        assert!(r.relative_error > 0.15, "{}", r.relative_error);
        assert!((r.mc_variance - 1.25).abs() < 5.0 * r.standard_error);
    }
}
