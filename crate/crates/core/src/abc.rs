//! Forward simulation of the two-committee experiment and rejection ABC.
//!
//! Each simulated item is low quality (probability `1 − x`), high quality
//! (`αx`) or mid quality (`(1−α)x`). Both committees reject low items, accept
//! high items, and accept mid items independently with probability `y`.
//! ABC compares the simulated committee-1 acceptance rate and arbitrariness
//! against the observed pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{chunk_count, chunk_len, map_chunks, Execution};
use crate::models::{Model, ObservedData, RafcParams};
use crate::numerics::{draw_bernoulli, draw_uniform_open, RandomStream};
use crate::samplers::{Draw, PosteriorSamples, SamplerTag};

/// Simulations per chunk (and per random substream).
pub const SIMS_PER_CHUNK: usize = 2048;

pub const DEFAULT_SIMS: usize = 100_000;
pub const DEFAULT_EPSILON_PI: f64 = 0.02;
pub const DEFAULT_EPSILON_A: f64 = 0.05;
pub const DEFAULT_QUANTILE: f64 = 0.01;

/// One synthetic run of the two-committee experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub n: u64,
    /// Items accepted by committee 1.
    pub k1: u64,
    /// Items accepted by committee 2.
    pub k2: u64,
    /// Committee-1 accepts that committee 2 rejected.
    pub k1_rejected_by_2: u64,
}

impl SimOutcome {
    /// Committee-1 acceptance rate `k1 / n`.
    pub fn pi_sim(&self) -> f64 {
        self.k1 as f64 / self.n as f64
    }

    /// Acceptance rate pooled over both committees.
    pub fn pi_pooled(&self) -> f64 {
        (self.k1 + self.k2) as f64 / (2 * self.n) as f64
    }

    /// Simulated arbitrariness `k1_rejected_by_2 / k1`; `None` when `k1 = 0`.
    pub fn a_sim(&self) -> Option<f64> {
        (self.k1 > 0).then(|| self.k1_rejected_by_2 as f64 / self.k1 as f64)
    }

    /// Arbitrariness with the committee roles swapped.
    pub fn a_sim_committee2(&self) -> Option<f64> {
        let both = self.k1 - self.k1_rejected_by_2;
        (self.k2 > 0).then(|| (self.k2 - both) as f64 / self.k2 as f64)
    }
}

/// Simulates `n` items through two independent committees.
pub fn simulate_experiment(p: &RafcParams, n: u64, rng: &mut RandomStream) -> Result<SimOutcome> {
    if n == 0 {
        return Err(Error::domain("experiment size n must be at least 1"));
    }
    let high = p.alpha() * p.x();
    let quality = p.x();
    let y = p.y();
    let mut out = SimOutcome {
        n,
        k1: 0,
        k2: 0,
        k1_rejected_by_2: 0,
    };
    for _ in 0..n {
        let u = rng.uniform();
        let (first, second) = if u < high {
            (true, true)
        } else if u < quality {
            (draw_bernoulli(rng, y), draw_bernoulli(rng, y))
        } else {
            (false, false)
        };
        out.k1 += first as u64;
        out.k2 += second as u64;
        out.k1_rejected_by_2 += (first && !second) as u64;
    }
    Ok(out)
}

/// Independent replicates of [`simulate_experiment`], chunked over
/// substreams of `rng` so the result does not depend on the worker count.
pub fn simulate_replicates(
    p: &RafcParams,
    n: u64,
    replicates: usize,
    rng: &RandomStream,
    execution: Execution,
) -> Result<Vec<SimOutcome>> {
    let chunks = map_chunks(execution, chunk_count(replicates, SIMS_PER_CHUNK), |c| {
        let mut r = rng.substream(c as u64);
        (0..chunk_len(replicates, SIMS_PER_CHUNK, c))
            .map(|_| simulate_experiment(p, n, &mut r))
            .collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::with_capacity(replicates);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum AcceptanceRule {
    /// Keep draws with `|π_sim − π̂| ≤ epsilon_pi` and `|a_sim − â| ≤ epsilon_a`.
    FixedTolerance { epsilon_pi: f64, epsilon_a: f64 },
    /// Keep the fraction `q` of draws closest to the data in scaled
    /// Euclidean distance.
    TopQuantile { q: f64 },
}

impl Default for AcceptanceRule {
    fn default() -> Self {
        AcceptanceRule::FixedTolerance {
            epsilon_pi: DEFAULT_EPSILON_PI,
            epsilon_a: DEFAULT_EPSILON_A,
        }
    }
}

/// Which simulated acceptance rate is compared with `π̂`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiAttribution {
    #[default]
    Committee1,
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbcConfig {
    pub sims: usize,
    pub rule: AcceptanceRule,
    pub pi_attribution: PiAttribution,
    pub execution: Execution,
}

impl Default for AbcConfig {
    fn default() -> Self {
        Self {
            sims: DEFAULT_SIMS,
            rule: AcceptanceRule::default(),
            pi_attribution: PiAttribution::default(),
            execution: Execution::default(),
        }
    }
}

impl AbcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sims == 0 {
            return Err(Error::domain("ABC needs at least one simulation"));
        }
        match self.rule {
            AcceptanceRule::FixedTolerance {
                epsilon_pi,
                epsilon_a,
            } => {
                if [epsilon_pi, epsilon_a]
                    .iter()
                    .any(|e| e.is_nan() || *e <= 0.0)
                {
                    return Err(Error::domain("ABC tolerances must be positive"));
                }
            }
            AcceptanceRule::TopQuantile { q } => {
                if !(q > 0.0 && q <= 1.0) {
                    return Err(Error::domain(format!("ABC quantile {q} outside (0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Summary statistics of one simulation relative to the data.
#[derive(Clone, Copy, Debug)]
struct Discrepancy {
    d_pi: f64,
    /// `None` when arbitrariness is undefined (`k1 = 0`).
    d_a: Option<f64>,
}

impl Discrepancy {
    fn new(sim: &SimOutcome, d: &ObservedData, attribution: PiAttribution) -> Self {
        let pi = match attribution {
            PiAttribution::Committee1 => sim.pi_sim(),
            PiAttribution::Pooled => sim.pi_pooled(),
        };
        Self {
            d_pi: pi - d.pi_hat(),
            d_a: sim.a_sim().map(|a| a - d.a_hat()),
        }
    }

    /// Euclidean distance with coordinates scaled by `π̂` and `â`
    /// (unscaled when `â = 0`); infinite when arbitrariness is undefined.
    fn scaled(&self, d: &ObservedData) -> f64 {
        let a_scale = if d.a_hat() > 0.0 { d.a_hat() } else { 1.0 };
        match self.d_a {
            Some(da) => ((self.d_pi / d.pi_hat()).powi(2) + (da / a_scale).powi(2)).sqrt(),
            None => f64::INFINITY,
        }
    }

    fn within(&self, epsilon_pi: f64, epsilon_a: f64) -> bool {
        matches!(self.d_a, Some(da) if self.d_pi.abs() <= epsilon_pi && da.abs() <= epsilon_a)
    }
}

fn prior_draw(alpha: f64, rng: &mut RandomStream) -> Result<RafcParams> {
    let x = draw_uniform_open(rng);
    let y = draw_uniform_open(rng);
    RafcParams::new(x, y, alpha)
}

/// Rejection ABC for the RAFC model with known `alpha` under uniform priors.
pub fn abc_fit(
    d: &ObservedData,
    alpha: f64,
    cfg: &AbcConfig,
    rng: &RandomStream,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let model = Model::rafc(alpha)?;
    let n = d.n();

    let chunks = map_chunks(cfg.execution, chunk_count(cfg.sims, SIMS_PER_CHUNK), |c| {
        let mut r = rng.substream(c as u64);
        (0..chunk_len(cfg.sims, SIMS_PER_CHUNK, c))
            .map(|_| {
                let p = prior_draw(alpha, &mut r)?;
                let sim = simulate_experiment(&p, n, &mut r)?;
                Ok((p, Discrepancy::new(&sim, d, cfg.pi_attribution)))
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut records = Vec::with_capacity(cfg.sims);
    for c in chunks {
        records.extend(c?);
    }

    let min_distance = records
        .iter()
        .map(|(_, disc)| disc.scaled(d))
        .fold(f64::INFINITY, f64::min);
    let zero = || Error::ZeroAcceptance {
        sims: cfg.sims,
        min_distance,
    };

    let keep: Vec<usize> = match cfg.rule {
        AcceptanceRule::FixedTolerance {
            epsilon_pi,
            epsilon_a,
        } => records
            .iter()
            .enumerate()
            .filter(|(_, (_, disc))| disc.within(epsilon_pi, epsilon_a))
            .map(|(i, _)| i)
            .collect(),
        AcceptanceRule::TopQuantile { q } => {
            let mut ranked: Vec<(f64, usize)> = records
                .iter()
                .enumerate()
                .map(|(i, (_, disc))| (disc.scaled(d), i))
                .filter(|(dist, _)| dist.is_finite())
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let wanted = ((q * cfg.sims as f64).ceil() as usize).max(1);
            let mut idx: Vec<usize> = ranked.into_iter().take(wanted).map(|(_, i)| i).collect();
            idx.sort_unstable();
            idx
        }
    };
    if keep.is_empty() {
        return Err(zero());
    }
    let draws = keep
        .into_iter()
        .map(|i| {
            let p = records[i].0;
            Ok(Draw {
                x: p.x(),
                y: p.y(),
                a: model.arbitrariness(p.y())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSamples {
        draws,
        model,
        sampler: SamplerTag::Abc,
        seed: rng.seed(),
        requested_count: cfg.sims,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelChoiceEntry {
    pub alpha: f64,
    pub simulations: u64,
    pub accepted: u64,
    pub posterior_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelChoiceResult {
    pub models: Vec<ModelChoiceEntry>,
}

impl ModelChoiceResult {
    pub fn entry(&self, alpha: f64) -> Option<&ModelChoiceEntry> {
        self.models.iter().find(|m| m.alpha == alpha)
    }

    pub fn probability(&self, alpha: f64) -> Option<f64> {
        self.entry(alpha).map(|m| m.posterior_probability)
    }

    pub fn total_accepted(&self) -> u64 {
        self.models.iter().map(|m| m.accepted).sum()
    }

    /// Candidate with the highest posterior probability (first on ties).
    pub fn best(&self) -> &ModelChoiceEntry {
        let mut best = &self.models[0];
        for m in &self.models[1..] {
            if m.posterior_probability > best.posterior_probability {
                best = m;
            }
        }
        best
    }
}

/// ABC model choice over RAFC models indexed by `alpha`.
///
/// Each simulation picks a candidate uniformly, draws `(x, y)` from its
/// prior and is accepted under the fixed-tolerance rule. A candidate's
/// posterior probability is its share of the accepted simulations.
pub fn abc_model_choice(
    d: &ObservedData,
    alphas: &[f64],
    cfg: &AbcConfig,
    rng: &RandomStream,
) -> Result<ModelChoiceResult> {
    cfg.validate()?;
    if alphas.is_empty() {
        return Err(Error::domain(
            "model choice needs at least one candidate alpha",
        ));
    }
    for &a in alphas {
        Model::rafc(a)?;
    }
    let AcceptanceRule::FixedTolerance {
        epsilon_pi,
        epsilon_a,
    } = cfg.rule
    else {
        return Err(Error::domain(
            "model choice requires the fixed-tolerance acceptance rule",
        ));
    };
    let m = alphas.len();
    let n = d.n();

    struct Tally {
        sims: Vec<u64>,
        accepted: Vec<u64>,
        min_distance: f64,
    }
    let chunks = map_chunks(cfg.execution, chunk_count(cfg.sims, SIMS_PER_CHUNK), |c| {
        let mut r = rng.substream(c as u64);
        let mut t = Tally {
            sims: vec![0; m],
            accepted: vec![0; m],
            min_distance: f64::INFINITY,
        };
        for _ in 0..chunk_len(cfg.sims, SIMS_PER_CHUNK, c) {
            let which = ((r.uniform() * m as f64) as usize).min(m - 1);
            let p = prior_draw(alphas[which], &mut r)?;
            let sim = simulate_experiment(&p, n, &mut r)?;
            let disc = Discrepancy::new(&sim, d, cfg.pi_attribution);
            t.sims[which] += 1;
            if disc.within(epsilon_pi, epsilon_a) {
                t.accepted[which] += 1;
            }
            t.min_distance = t.min_distance.min(disc.scaled(d));
        }
        Ok::<_, Error>(t)
    });
    let mut sims = vec![0u64; m];
    let mut accepted = vec![0u64; m];
    let mut min_distance = f64::INFINITY;
    for t in chunks {
        let t = t?;
        for i in 0..m {
            sims[i] += t.sims[i];
            accepted[i] += t.accepted[i];
        }
        min_distance = min_distance.min(t.min_distance);
    }
    let total: u64 = accepted.iter().sum();
    if total == 0 {
        return Err(Error::ZeroAcceptance {
            sims: cfg.sims,
            min_distance,
        });
    }
    Ok(ModelChoiceResult {
        models: alphas
            .iter()
            .enumerate()
            .map(|(i, &alpha)| ModelChoiceEntry {
                alpha,
                simulations: sims[i],
                accepted: accepted[i],
                posterior_probability: accepted[i] as f64 / total as f64,
            })
            .collect(),
    })
}

/// Bayes factor of model `m1` against `m2`: the ratio of their accepted
/// counts, which equals the posterior odds under a uniform model prior.
pub fn bayes_factor(r: &ModelChoiceResult, m1: f64, m2: f64) -> Result<f64> {
    let find = |alpha: f64| {
        r.entry(alpha).ok_or_else(|| {
            Error::UndefinedBayesFactor(format!("alpha = {alpha} is not among the candidates"))
        })
    };
    let (e1, e2) = (find(m1)?, find(m2)?);
    if e2.accepted == 0 {
        return Err(Error::UndefinedBayesFactor(format!(
            "no simulation accepted for alpha = {m2}"
        )));
    }
    Ok(e1.accepted as f64 / e2.accepted as f64)
}
