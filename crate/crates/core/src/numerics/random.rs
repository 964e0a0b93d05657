use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution};

use super::special::{inv_reg_inc_beta, reg_inc_beta};
use crate::error::{Error, Result};

/// Below this untruncated mass, truncated draws switch from resampling to
/// inverse-CDF sampling.
const NAIVE_TRUNCATION_MIN_MASS: f64 = 0.1;

/// A seedable, reproducible stream of random numbers.
///
/// Backed by ChaCha12 keyed from `seed`, with `stream_index` selecting one of
/// 2^64 independent keystreams. The same `(seed, stream_index)` always yields
/// the same sequence. A stream is advanced in place and must not be shared
/// between threads; parallel work takes [`substream`](Self::substream)s.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha12Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            rng,
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// A fresh stream for child task `child`, derived from this stream's
    /// identity (not its current position).
    pub fn substream(&self, child: u64) -> RandomStream {
        let index = splitmix64(splitmix64(self.stream_index) ^ child.wrapping_add(1));
        RandomStream::new(self.seed, index)
    }

    /// Uniform variate on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
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

/// Uniform variate on the open interval `(0, 1)`.
pub fn draw_uniform_open(rng: &mut RandomStream) -> f64 {
    loop {
        let u = rng.uniform();
        if u > 0.0 {
            return u;
        }
    }
}

fn beta_dist(a: f64, b: f64) -> Result<Beta<f64>> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain(format!(
            "beta shape parameters must be positive and finite, got ({a}, {b})"
        )));
    }
    Beta::new(a, b).map_err(|e| Error::domain(e.to_string()))
}

/// Draws from a prepared beta distribution, excluding the endpoints.
pub(crate) fn sample_open_beta(dist: &Beta<f64>, rng: &mut RandomStream) -> f64 {
    loop {
        let v = dist.sample(rng);
        if v > 0.0 && v < 1.0 {
            return v;
        }
    }
}

/// One beta(a, b) variate in `(0, 1)`.
pub fn draw_beta(rng: &mut RandomStream, a: f64, b: f64) -> Result<f64> {
    let dist = beta_dist(a, b)?;
    Ok(sample_open_beta(&dist, rng))
}

/// Beta(a, b) truncated to `(0, upper)`, with a precomputed prepared
/// distribution and untruncated mass `I_upper(a, b)`.
pub(crate) fn sample_truncated_beta(
    dist: &Beta<f64>,
    a: f64,
    b: f64,
    upper: f64,
    mass: f64,
    rng: &mut RandomStream,
) -> Result<f64> {
    if mass <= 0.0 {
        return Err(Error::Degenerate(format!(
            "beta({a}, {b}) has no mass below {upper}"
        )));
    }
    if mass >= NAIVE_TRUNCATION_MIN_MASS {
        loop {
            let v = sample_open_beta(dist, rng);
            if v < upper {
                return Ok(v);
            }
        }
    }
    loop {
        let target = draw_uniform_open(rng) * mass;
        let v = inv_reg_inc_beta(target, a, b)?;
        if v > 0.0 && v < upper {
            return Ok(v);
        }
    }
}

/// One beta(a, b) variate conditioned on lying in `(0, upper)`.
///
/// Resamples the untruncated law while `I_upper(a, b) ≥ 0.1`, otherwise
/// inverts the truncated CDF.
pub fn draw_truncated_beta(rng: &mut RandomStream, a: f64, b: f64, upper: f64) -> Result<f64> {
    if !(upper > 0.0 && upper <= 1.0) {
        return Err(Error::domain(format!(
            "truncation point {upper} outside (0, 1]"
        )));
    }
    let dist = beta_dist(a, b)?;
    let mass = reg_inc_beta(upper, a, b)?;
    sample_truncated_beta(&dist, a, b, upper, mass, rng)
}

/// Bernoulli(p) draw.
pub fn draw_bernoulli(rng: &mut RandomStream, p: f64) -> bool {
    rng.uniform() < p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let s2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, s2)
    }

    /// Kolmogorov–Smirnov distance between a sample and a reference CDF.
    fn ks_distance(mut v: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len() as f64;
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RandomStream::new(42, 7);
        let mut b = RandomStream::new(42, 7);
        let xs: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        let mut c = RandomStream::new(42, 8);
        let zs: Vec<u64> = (0..64).map(|_| c.next_u64()).collect();
        assert_ne!(xs, zs);
    }

    #[test]
    fn substreams_are_distinct_and_stable() {
        let base = RandomStream::from_seed(3);
        assert_eq!(
            base.substream(5).stream_index(),
            base.substream(5).stream_index()
        );
        assert_ne!(
            base.substream(5).stream_index(),
            base.substream(6).stream_index()
        );
        assert_ne!(base.substream(0).stream_index(), base.stream_index());
        assert_eq!(base.substream(1).seed(), 3);
    }

    #[test]
    fn beta_moments() {
        for &(a, b) in &[
            (14.94, 23.41),
            (2.0, 2.0),
            (0.5, 0.5),
            (38.35, 129.65),
            (1.0, 5.0),
        ] {
            let mut rng = RandomStream::new(11, 0);
            let v: Vec<f64> = (0..100_000)
                .map(|_| draw_beta(&mut rng, a, b).unwrap())
                .collect();
            let (m, s2) = mean_var(&v);
            let mean = a / (a + b);
            let var = a * b / ((a + b).powi(2) * (a + b + 1.0));
            let se_mean = (var / v.len() as f64).sqrt();
            assert!(
                (m - mean).abs() < 3.0 * se_mean,
                "beta({a},{b}) mean {m} vs {mean}"
            );
            // SE of the sample variance from the fourth central moment
            let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / v.len() as f64;
            let se_var = ((m4 - s2 * s2) / v.len() as f64).sqrt();
            assert!(
                (s2 - var).abs() < 3.0 * se_var,
                "beta({a},{b}) var {s2} vs {var}"
            );
            assert!(v.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn beta_one_one_is_uniform() {
        let mut rng = RandomStream::new(5, 1);
        let v: Vec<f64> = (0..100_000)
            .map(|_| draw_beta(&mut rng, 1.0, 1.0).unwrap())
            .collect();
        assert!(ks_distance(v, |x| x) < 0.006);
    }

    #[test]
    fn untruncated_matches_beta() {
        let (a, b) = (14.94, 23.41);
        let mut rng = RandomStream::new(9, 2);
        let v: Vec<f64> = (0..100_000)
            .map(|_| draw_truncated_beta(&mut rng, a, b, 1.0).unwrap())
            .collect();
        assert!(ks_distance(v, |x| reg_inc_beta(x, a, b).unwrap()) < 0.006);
    }

    #[test]
    fn truncated_beta_resampling_branch() {
        let (a, b, upper) = (38.35, 129.65, 0.40);
        let mass = reg_inc_beta(upper, a, b).unwrap();
        assert!(mass >= NAIVE_TRUNCATION_MIN_MASS);
        let mut rng = RandomStream::new(1, 3);
        let v: Vec<f64> = (0..100_000)
            .map(|_| draw_truncated_beta(&mut rng, a, b, upper).unwrap())
            .collect();
        assert!(v.iter().all(|&x| x < upper));
        assert!(ks_distance(v, |x| reg_inc_beta(x, a, b).unwrap() / mass) < 0.006);
    }

    #[test]
    fn truncated_beta_inverse_cdf_branch() {
        let (a, b, upper) = (38.35, 129.65, 0.16);
        let mass = reg_inc_beta(upper, a, b).unwrap();
        assert!(mass < NAIVE_TRUNCATION_MIN_MASS && mass > 0.0);
        let mut rng = RandomStream::new(1, 4);
        let v: Vec<f64> = (0..100_000)
            .map(|_| draw_truncated_beta(&mut rng, a, b, upper).unwrap())
            .collect();
        assert!(v.iter().all(|&x| x < upper));
        assert!(ks_distance(v, |x| reg_inc_beta(x, a, b).unwrap() / mass) < 0.006);
    }

    #[test]
    fn truncated_mean_matches_quadrature() {
        // ∫₀^½ 6t²(1−t) dt / ∫₀^½ 6t(1−t) dt = 0.15625 / 0.5
        let expected = 0.3125;
        let mut rng = RandomStream::new(2, 0);
        let v: Vec<f64> = (0..100_000)
            .map(|_| draw_truncated_beta(&mut rng, 2.0, 2.0, 0.5).unwrap())
            .collect();
        let (m, s2) = mean_var(&v);
        assert!((m - expected).abs() < 3.0 * (s2 / v.len() as f64).sqrt());
    }

    #[test]
    fn truncated_beta_degenerate() {
        let mut rng = RandomStream::from_seed(0);
        let err = draw_truncated_beta(&mut rng, 5000.0, 1.0, 1e-6).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(draw_truncated_beta(&mut rng, 2.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn bernoulli_endpoints_and_mean() {
        let mut rng = RandomStream::new(8, 0);
        assert!((0..10_000).all(|_| !draw_bernoulli(&mut rng, 0.0)));
        assert!((0..10_000).all(|_| draw_bernoulli(&mut rng, 1.0)));
        let n = 100_000;
        let hits = (0..n).filter(|_| draw_bernoulli(&mut rng, 0.225)).count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.225).abs() < 3.0 * (0.225 * 0.775 / n as f64).sqrt());
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let mut s1 = RandomStream::new(21, 0);
        let mut s2 = RandomStream::new(21, 1);
        let n = 100_000;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                (
                    draw_bernoulli(&mut s1, 0.5) as u8 as f64,
                    draw_bernoulli(&mut s2, 0.5) as u8 as f64,
                )
            })
            .collect();
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let cov = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
        let vx = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let vy = pairs.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
        assert!((cov / (vx * vy).sqrt()).abs() < 0.01);
    }
}
