//! Posterior sampling for the RFC model, a brute-force grid oracle, and
//! posterior summaries.
//!
//! [`sample_rfc_exact`] draws `y` from its marginal and then `x` from its
//! conditional: given `y`, `x·y` follows a beta(k+1, n−k+1) law truncated to
//! `(0, y)`. [`sample_rfc_rejection`] is an independent route through
//! uniform proposals under the MAP-height envelope. [`grid_posterior`]
//! evaluates the density on a midpoint grid and serves as a deterministic
//! oracle for both.

use std::fmt;
use std::str::FromStr;

use rand_distr::Beta;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{chunk_count, chunk_len, map_chunks, Execution};
use crate::models::{
    rafc_map, rfc_log_posterior_xy, rfc_map, Estimate, MarginalMode, Model, ObservedData, YMarginal,
};
use crate::numerics::quantile::quantile_sorted;
use crate::numerics::random::{sample_open_beta, sample_truncated_beta};
use crate::numerics::{draw_uniform_open, reg_inc_beta, RandomStream, SampleBatch};

/// Draws produced per chunk (and per random substream).
pub const DRAWS_PER_CHUNK: usize = 4096;

/// Smallest acceptable rate of the exact sampler's marginal correction, and
/// of the rejection sampler.
const MIN_ACCEPTANCE: f64 = 1e-6;

/// Minimum number of draws for [`summarize_posterior`].
pub const MIN_SUMMARY_DRAWS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub x: f64,
    pub y: f64,
    pub a: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerTag {
    /// Exact marginal-then-conditional sampler.
    Exact,
    /// The exact sampler without the incomplete-beta marginal correction.
    PaperApprox,
    /// Uniform-proposal rejection sampler.
    Rejection,
    /// Rejection ABC.
    Abc,
    /// Draws loaded from a file without provenance.
    External,
}

impl fmt::Display for SamplerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerTag::Exact => "exact",
            SamplerTag::PaperApprox => "paper-approx",
            SamplerTag::Rejection => "rejection",
            SamplerTag::Abc => "abc",
            SamplerTag::External => "external",
        })
    }
}

impl FromStr for SamplerTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SamplerTag::Exact),
            "paper-approx" => Ok(SamplerTag::PaperApprox),
            "rejection" => Ok(SamplerTag::Rejection),
            "abc" => Ok(SamplerTag::Abc),
            "external" => Ok(SamplerTag::External),
            other => Err(Error::domain(format!("unknown sampler tag {other:?}"))),
        }
    }
}

/// Posterior draws with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples {
    pub draws: Vec<Draw>,
    pub model: Model,
    pub sampler: SamplerTag,
    pub seed: u64,
    pub requested_count: usize,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.y).collect()
    }

    pub fn arbitrariness(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.a).collect()
    }

    /// Checks the draw invariants: `0 < x ≤ 1`, `0 < y < 1`, and `a` equal
    /// to the model's arbitrariness at `y` within 1e-12.
    pub fn validate(&self) -> Result<()> {
        for (i, d) in self.draws.iter().enumerate() {
            if !(d.x > 0.0 && d.x <= 1.0 && d.y > 0.0 && d.y < 1.0) {
                return Err(Error::domain(format!(
                    "draw {i} ({}, {}) outside the unit square",
                    d.x, d.y
                )));
            }
            let a = self.model.arbitrariness(d.y)?;
            if (a - d.a).abs() > 1e-12 {
                return Err(Error::domain(format!(
                    "draw {i} has a = {} but the model implies {a}",
                    d.a
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExactOptions {
    pub marginal: MarginalMode,
    pub execution: Execution,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            marginal: MarginalMode::Exact,
            execution: Execution::default(),
        }
    }
}

/// Exact sampling from the RFC posterior.
///
/// For each draw: propose `y ~ beta((1−â)k, âk+1)`; in exact mode keep it
/// with probability `I_y(k+1, n−k+1)`; draw `x* ~ beta(k+1, n−k+1)`
/// truncated to `(0, y)`; return `x = x*/y`, `a = 1 − y`.
pub fn sample_rfc_exact(
    d: &ObservedData,
    count: usize,
    rng: &RandomStream,
    opts: ExactOptions,
) -> Result<PosteriorSamples> {
    if count == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let marginal = YMarginal::new(d, opts.marginal)?;
    if marginal.normalizer() < MIN_ACCEPTANCE {
        return Err(Error::NonConvergence(format!(
            "marginal correction accepts only {:.3e} of proposals",
            marginal.normalizer()
        )));
    }
    let (s1, s2) = marginal.shapes();
    let y_dist = Beta::new(s1, s2).map_err(|e| Error::domain(e.to_string()))?;
    let (xa, xb) = (d.k() + 1.0, d.n() as f64 - d.k() + 1.0);
    let x_dist = Beta::new(xa, xb).map_err(|e| Error::domain(e.to_string()))?;
    let correct = opts.marginal == MarginalMode::Exact;

    let chunks = map_chunks(
        opts.execution,
        chunk_count(count, DRAWS_PER_CHUNK),
        |c| -> Result<Vec<Draw>> {
            let mut r = rng.substream(c as u64);
            let len = chunk_len(count, DRAWS_PER_CHUNK, c);
            let mut out = Vec::with_capacity(len);
            while out.len() < len {
                let y = sample_open_beta(&y_dist, &mut r);
                let mass = reg_inc_beta(y, xa, xb)?;
                if correct && r.uniform() >= mass {
                    continue;
                }
                let x_star = sample_truncated_beta(&x_dist, xa, xb, y, mass, &mut r)?;
                let x = (x_star / y).min(1.0);
                out.push(Draw { x, y, a: 1.0 - y });
            }
            Ok(out)
        },
    );
    let draws = concat(chunks)?;
    Ok(PosteriorSamples {
        draws,
        model: Model::Rfc,
        sampler: if correct {
            SamplerTag::Exact
        } else {
            SamplerTag::PaperApprox
        },
        seed: rng.seed(),
        requested_count: count,
    })
}

fn concat(chunks: Vec<Result<Vec<Draw>>>) -> Result<Vec<Draw>> {
    let mut out = Vec::new();
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Maximum of the RFC log posterior over the closed unit square.
///
/// Interior when `π̂ ≤ 1 − â` (the MAP); otherwise on the edge `x = 1`,
/// where the log posterior is concave in `y` with its peak at
/// `(2 − â)k / (n + k)`, restricted to `y ≤ π̂`.
pub fn rfc_log_posterior_max(d: &ObservedData) -> f64 {
    let f = |x: f64, y: f64| rfc_log_posterior_xy(x, y, d);
    match rfc_map(d).estimate {
        Some(e) if e.y < 1.0 => f(e.x, e.y),
        Some(_) => {
            // â = 0: the supremum is approached as y → 1 along x = π̂ / y
            let (n, k) = (d.n() as f64, d.k());
            k * d.pi_hat().ln() + (n - k) * (-d.pi_hat()).ln_1p()
        }
        None => {
            let (n, k) = (d.n() as f64, d.k());
            let y = ((2.0 - d.a_hat()) * k / (n + k)).min(d.pi_hat());
            f(1.0, y)
        }
    }
}

/// Rejection sampling from the RFC posterior with uniform proposals on the
/// unit square and envelope height `exp(M)`, `M` the log-posterior maximum.
pub fn sample_rfc_rejection(
    d: &ObservedData,
    count: usize,
    rng: &RandomStream,
    execution: Execution,
) -> Result<PosteriorSamples> {
    if count == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let m = rfc_log_posterior_max(d);
    let chunks = map_chunks(
        execution,
        chunk_count(count, DRAWS_PER_CHUNK),
        |c| -> Result<Vec<Draw>> {
            let mut r = rng.substream(c as u64);
            let len = chunk_len(count, DRAWS_PER_CHUNK, c);
            let mut out = Vec::with_capacity(len);
            let mut proposals = 0u64;
            while out.len() < len {
                let x = draw_uniform_open(&mut r);
                let y = draw_uniform_open(&mut r);
                proposals += 1;
                let ratio = (Model::Rfc.log_posterior(x, y, d) - m).exp();
                if r.uniform() < ratio {
                    out.push(Draw { x, y, a: 1.0 - y });
                }
                if proposals >= 1_000_000 && (out.len() as f64) < MIN_ACCEPTANCE * proposals as f64
                {
                    return Err(Error::NonConvergence(format!(
                        "rejection sampler accepted {} of {proposals} proposals",
                        out.len()
                    )));
                }
            }
            Ok(out)
        },
    );
    Ok(PosteriorSamples {
        draws: concat(chunks)?,
        model: Model::Rfc,
        sampler: SamplerTag::Rejection,
        seed: rng.seed(),
        requested_count: count,
    })
}

/// Posterior mass on a `resolution × resolution` midpoint grid over the unit
/// square. Cell `(i, j)` covers `x ∈ [i/R, (i+1)/R)` and `y ∈ [j/R, (j+1)/R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPosterior {
    resolution: usize,
    model: Model,
    mass: Vec<f64>,
}

impl GridPosterior {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.resolution as f64
    }

    /// Mass of cell `(i, j)` (x index, y index).
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.resolution + j]
    }

    pub fn cell_masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.mass
            .chunks(self.resolution)
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.resolution];
        for row in self.mass.chunks(self.resolution) {
            for (acc, m) in out.iter_mut().zip(row) {
                *acc += m;
            }
        }
        out
    }

    fn moments(&self, marginal: &[f64]) -> (f64, f64) {
        let mean: f64 = marginal
            .iter()
            .enumerate()
            .map(|(i, m)| m * self.center(i))
            .sum();
        let var: f64 = marginal
            .iter()
            .enumerate()
            .map(|(i, m)| m * (self.center(i) - mean).powi(2))
            .sum();
        (mean, var)
    }

    pub fn mean_x(&self) -> f64 {
        self.moments(&self.marginal_x()).0
    }

    pub fn mean_y(&self) -> f64 {
        self.moments(&self.marginal_y()).0
    }

    pub fn var_x(&self) -> f64 {
        self.moments(&self.marginal_x()).1
    }

    pub fn var_y(&self) -> f64 {
        self.moments(&self.marginal_y()).1
    }

    fn quantile(&self, marginal: &[f64], q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::domain(format!("quantile level {q} outside [0, 1]")));
        }
        let h = self.cell_width();
        let mut cum = 0.0;
        for (i, &m) in marginal.iter().enumerate() {
            if cum + m >= q && m > 0.0 {
                return Ok((i as f64 + (q - cum) / m) * h);
            }
            cum += m;
        }
        Ok(1.0)
    }

    /// Quantile of the x-marginal, linear within cells.
    pub fn quantile_x(&self, q: f64) -> Result<f64> {
        self.quantile(&self.marginal_x(), q)
    }

    pub fn quantile_y(&self, q: f64) -> Result<f64> {
        self.quantile(&self.marginal_y(), q)
    }

    /// Index `(i, j)` of the cell with the largest mass.
    /// Cell holding the highest midpoint mass.
    pub fn argmax_cell(&self) -> (usize, usize) {
        let mut best = 0;
        for (idx, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = idx;
            }
        }
        (best / self.resolution, best % self.resolution)
    }

    /// Location of the posterior mode, refined from the argmax cell by a
    /// quadratic fit to the log mass on its 3×3 neighbourhood. The fit keeps
    /// the estimate within one cell of the argmax; on the border of the grid
    /// the argmax centre is returned unchanged.
    pub fn mode(&self) -> (f64, f64) {
        let (i, j) = self.argmax_cell();
        let (cx, cy) = (self.center(i), self.center(j));
        let r = self.resolution;
        if i == 0 || j == 0 || i + 1 == r || j + 1 == r {
            return (cx, cy);
        }
        let f = |di: isize, dj: isize| {
            self.mass((i as isize + di) as usize, (j as isize + dj) as usize)
                .ln()
        };
        let f0 = f(0, 0);
        let gx = (f(1, 0) - f(-1, 0)) / 2.0;
        let gy = (f(0, 1) - f(0, -1)) / 2.0;
        let hxx = f(1, 0) - 2.0 * f0 + f(-1, 0);
        let hyy = f(0, 1) - 2.0 * f0 + f(0, -1);
        let hxy = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / 4.0;
        let det = hxx * hyy - hxy * hxy;
        if !(det > 0.0 && hxx < 0.0) || !det.is_finite() {
            return (cx, cy);
        }
        let dx = (-(hyy * gx) + hxy * gy) / det;
        let dy = (hxy * gx - hxx * gy) / det;
        let h = self.cell_width();
        (cx + dx.clamp(-1.0, 1.0) * h, cy + dy.clamp(-1.0, 1.0) * h)
    }

    /// Cell containing [`GridPosterior::mode`].
    pub fn mode_cell(&self) -> (usize, usize) {
        let (x, y) = self.mode();
        let idx = |v: f64| ((v * self.resolution as f64) as usize).min(self.resolution - 1);
        (idx(x), idx(y))
    }

    /// Whether `(x, y)` lies in cell `(i, j)`.
    pub fn cell_contains(&self, (i, j): (usize, usize), x: f64, y: f64) -> bool {
        let h = self.cell_width();
        let inside = |idx: usize, v: f64| v >= idx as f64 * h && v <= (idx + 1) as f64 * h;
        inside(i, x) && inside(j, y)
    }
}

/// Normalized posterior mass on a midpoint grid.
pub fn grid_posterior(d: &ObservedData, model: Model, resolution: usize) -> Result<GridPosterior> {
    if resolution < 10 {
        return Err(Error::domain("grid resolution must be at least 10"));
    }
    let h = 1.0 / resolution as f64;
    let mut log_mass = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let x = (i as f64 + 0.5) * h;
        for j in 0..resolution {
            let y = (j as f64 + 0.5) * h;
            log_mass.push(model.log_posterior(x, y, d));
        }
    }
    let peak = log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Degenerate(
            "posterior vanishes on every grid cell".into(),
        ));
    }
    let mut mass: Vec<f64> = log_mass.into_iter().map(|v| (v - peak).exp()).collect();
    let total: f64 = mass.iter().sum();
    for m in &mut mass {
        *m /= total;
    }
    Ok(GridPosterior {
        resolution,
        model,
        mass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl QuantitySummary {
    fn from_values(values: Vec<f64>) -> Result<Self> {
        let batch = SampleBatch::new(values)?;
        let sorted = batch.sorted();
        Ok(Self {
            mean: batch.mean()?,
            ci_low: quantile_sorted(&sorted, 0.025)?,
            ci_high: quantile_sorted(&sorted, 0.975)?,
        })
    }

    /// True when the mean lies inside the credible interval.
    pub fn brackets_mean(&self) -> bool {
        self.ci_low <= self.mean && self.mean <= self.ci_high
    }
}

/// Sample means, equal-tailed 95% intervals and the model's MAP.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub model: Model,
    pub sampler: SamplerTag,
    pub seed: u64,
    pub sample_count: usize,
    pub x: QuantitySummary,
    pub y: QuantitySummary,
    pub a: QuantitySummary,
    pub map: Option<Estimate>,
}

pub fn summarize_posterior(s: &PosteriorSamples, d: &ObservedData) -> Result<PosteriorSummary> {
    if s.len() < MIN_SUMMARY_DRAWS {
        return Err(Error::InsufficientSamples {
            needed: MIN_SUMMARY_DRAWS,
            got: s.len(),
        });
    }
    let map = match s.model {
        Model::Rfc => rfc_map(d),
        Model::Rafc { alpha } => rafc_map(d, alpha)?,
    };
    Ok(PosteriorSummary {
        model: s.model,
        sampler: s.sampler,
        seed: s.seed,
        sample_count: s.len(),
        x: QuantitySummary::from_values(s.xs())?,
        y: QuantitySummary::from_values(s.ys())?,
        a: QuantitySummary::from_values(s.arbitrariness())?,
        map: map.estimate,
    })
}
