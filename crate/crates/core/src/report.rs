//! File formats: sample CSVs, JSON summaries and density tables.
//!
//! Samples and density tables are written with 17 significant digits so they
//! read back bit-exactly. Summaries are rounded to 6 significant digits. Every
//! CSV is paired with a `<file>.meta.json` sidecar holding its [`RunMetadata`].

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::abc::{ModelChoiceResult, SimOutcome};
use crate::error::{Error, Result};
use crate::models::{Estimate, MarginalMode, Model, ObservedData};
use crate::samplers::{
    Draw, GridPosterior, PosteriorSamples, PosteriorSummary, QuantitySummary, SamplerTag,
};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SAMPLES_HEADER: [&str; 3] = ["x", "y", "a"];

/// Run settings echoed into every output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_mode: Option<MarginalMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
}

/// Everything needed to reproduce an output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: Model,
    pub sampler: SamplerTag,
    pub seed: u64,
    /// Requested draws, or simulations for ABC runs.
    pub requested_count: usize,
    /// Observed data the run conditioned on; absent for forward simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<ObservedData>,
    pub config: RunConfig,
    pub version: String,
}

impl RunMetadata {
    pub fn new(
        model: Model,
        sampler: SamplerTag,
        seed: u64,
        requested_count: usize,
        observed: Option<ObservedData>,
    ) -> Self {
        Self {
            model,
            sampler,
            seed,
            requested_count,
            observed,
            config: RunConfig::default(),
            version: ARTIFACT_VERSION.to_string(),
        }
    }

    pub fn for_samples(s: &PosteriorSamples, observed: ObservedData) -> Self {
        Self::new(
            s.model,
            s.sampler,
            s.seed,
            s.requested_count,
            Some(observed),
        )
    }

    pub fn with_config(mut self, config: RunConfig) -> Self {
        self.config = config;
        self
    }
}

/// Path of the metadata sidecar for `path`.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Formats `v` as a positional decimal with 17 significant digits, which is
/// enough for any `f64` to parse back to the same bits.
pub fn format_sig17(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (16 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Rounds to 6 significant digits.
pub fn round_sig6(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.5e}").parse().unwrap()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_sig17(*v)))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Writes draws as CSV with header `x,y,a`, plus the metadata sidecar.
pub fn write_samples(s: &PosteriorSamples, meta: &RunMetadata, path: &Path) -> Result<()> {
    write_rows(
        path,
        &SAMPLES_HEADER,
        s.draws.iter().map(|d| vec![d.x, d.y, d.a]),
    )?;
    write_json(&metadata_path(path), meta)
}

/// Reads a samples CSV written by [`write_samples`].
pub fn read_draws(path: &Path) -> Result<Vec<Draw>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(f);
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(SAMPLES_HEADER) {
        return Err(Error::format(
            path,
            format!(
                "expected header `x,y,a`, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut draws = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::format(
                        path,
                        format!(
                            "row {}: bad value in column {}",
                            line + 2,
                            SAMPLES_HEADER[i]
                        ),
                    )
                })
        };
        draws.push(Draw {
            x: field(0)?,
            y: field(1)?,
            a: field(2)?,
        });
    }
    Ok(draws)
}

/// Reads the sidecar of `path`, or `None` if there is none.
pub fn read_metadata(path: &Path) -> Result<Option<RunMetadata>> {
    let meta = metadata_path(path);
    if !meta.exists() {
        return Ok(None);
    }
    read_json(&meta).map(Some)
}

/// Reads draws together with their sidecar metadata.
pub fn read_samples(path: &Path) -> Result<(PosteriorSamples, RunMetadata)> {
    let draws = read_draws(path)?;
    let meta =
        read_metadata(path)?.ok_or_else(|| Error::format(path, "missing metadata sidecar"))?;
    let s = PosteriorSamples {
        draws,
        model: meta.model,
        sampler: meta.sampler,
        seed: meta.seed,
        requested_count: meta.requested_count,
    };
    Ok((s, meta))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantityDoc {
    pub mean: f64,
    pub ci95: [f64; 2],
}

impl From<QuantitySummary> for QuantityDoc {
    fn from(q: QuantitySummary) -> Self {
        Self {
            mean: round_sig6(q.mean),
            ci95: [round_sig6(q.ci_low), round_sig6(q.ci_high)],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapDoc {
    pub x: f64,
    pub y: f64,
}

impl From<Estimate> for MapDoc {
    fn from(e: Estimate) -> Self {
        Self {
            x: round_sig6(e.x),
            y: round_sig6(e.y),
        }
    }
}

/// The JSON summary document. Field order is the key order on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryDoc {
    pub model: Model,
    pub sampler: SamplerTag,
    pub seed: u64,
    pub count: usize,
    pub x: QuantityDoc,
    pub y: QuantityDoc,
    pub a: QuantityDoc,
    pub map: Option<MapDoc>,
    pub run: RunMetadata,
}

impl SummaryDoc {
    pub fn new(sum: &PosteriorSummary, meta: &RunMetadata) -> Self {
        Self {
            model: sum.model,
            sampler: sum.sampler,
            seed: sum.seed,
            count: sum.sample_count,
            x: sum.x.into(),
            y: sum.y.into(),
            a: sum.a.into(),
            map: sum.map.map(Into::into),
            run: meta.clone(),
        }
    }
}

pub fn write_summary(sum: &PosteriorSummary, meta: &RunMetadata, path: &Path) -> Result<()> {
    write_json(path, &SummaryDoc::new(sum, meta))
}

pub fn read_summary(path: &Path) -> Result<SummaryDoc> {
    read_json(path)
}

/// Model-choice output: per-candidate counts and probabilities, plus the
/// Bayes factor of each candidate against the first one where defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelChoiceDoc {
    pub models: Vec<ModelChoiceRow>,
    pub run: RunMetadata,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelChoiceRow {
    pub alpha: f64,
    pub simulations: u64,
    pub accepted: u64,
    pub probability: f64,
    pub bayes_factor_vs_first: Option<f64>,
}

impl ModelChoiceDoc {
    pub fn new(r: &ModelChoiceResult, meta: &RunMetadata) -> Self {
        let base = r.models[0].accepted;
        Self {
            models: r
                .models
                .iter()
                .map(|m| ModelChoiceRow {
                    alpha: m.alpha,
                    simulations: m.simulations,
                    accepted: m.accepted,
                    probability: round_sig6(m.posterior_probability),
                    bayes_factor_vs_first: (base > 0)
                        .then(|| round_sig6(m.accepted as f64 / base as f64)),
                })
                .collect(),
            run: meta.clone(),
        }
    }
}

pub fn write_model_choice(r: &ModelChoiceResult, meta: &RunMetadata, path: &Path) -> Result<()> {
    write_json(path, &ModelChoiceDoc::new(r, meta))
}

/// Writes simulator replicates as CSV, plus sidecar. `a_sim` is left empty
/// when committee 1 accepted nothing.
pub fn write_simulations(outcomes: &[SimOutcome], meta: &RunMetadata, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["n", "k1", "k2", "k1_rejected_by_2", "pi_sim", "a_sim"])
        .map_err(|e| csv_error(path, e))?;
    for o in outcomes {
        w.write_record([
            o.n.to_string(),
            o.k1.to_string(),
            o.k2.to_string(),
            o.k1_rejected_by_2.to_string(),
            format_sig17(o.pi_sim()),
            o.a_sim().map(format_sig17).unwrap_or_default(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&metadata_path(path), meta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityQuantity {
    JointXy,
    MarginalX,
    MarginalA,
}

impl fmt::Display for DensityQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DensityQuantity::JointXy => "joint-xy",
            DensityQuantity::MarginalX => "marginal-x",
            DensityQuantity::MarginalA => "marginal-a",
        })
    }
}

impl FromStr for DensityQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint-xy" => Ok(DensityQuantity::JointXy),
            "marginal-x" => Ok(DensityQuantity::MarginalX),
            "marginal-a" => Ok(DensityQuantity::MarginalA),
            other => Err(Error::domain(format!(
                "unknown density quantity `{other}` (expected joint-xy, marginal-x or marginal-a)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum DensitySource<'a> {
    Grid(&'a GridPosterior),
    Samples(&'a PosteriorSamples),
}

/// Binned density on `[0, 1]` (or `[0, 1]²` for the joint).
///
/// Marginal tables have `bins` rows. Joint tables have `bins²` rows ordered
/// by x bin, then y bin.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityTable {
    pub quantity: DensityQuantity,
    pub bins: usize,
    pub density: Vec<f64>,
}

impl DensityTable {
    pub fn bin_width(&self) -> f64 {
        1.0 / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.bins as f64
    }

    /// Cell area (or bin width) times the summed density.
    pub fn total_mass(&self) -> f64 {
        let w = match self.quantity {
            DensityQuantity::JointXy => self.bin_width().powi(2),
            _ => self.bin_width(),
        };
        self.density.iter().sum::<f64>() * w
    }

    /// Centre of the highest-density bin of a marginal table.
    pub fn peak(&self) -> Option<f64> {
        if self.quantity == DensityQuantity::JointXy {
            return None;
        }
        let mut best = 0;
        for (i, &v) in self.density.iter().enumerate() {
            if v > self.density[best] {
                best = i;
            }
        }
        Some(self.center(best))
    }

    /// Mass of the marginal bins whose centres lie in `(lo, hi)`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> Option<f64> {
        if self.quantity == DensityQuantity::JointXy {
            return None;
        }
        let w = self.bin_width();
        Some(
            self.density
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let c = self.center(*i);
                    c > lo && c < hi
                })
                .map(|(_, v)| v * w)
                .sum(),
        )
    }

    fn header(&self) -> &'static [&'static str] {
        match self.quantity {
            DensityQuantity::JointXy => &["x", "y", "density"],
            DensityQuantity::MarginalX => &["x", "density"],
            DensityQuantity::MarginalA => &["a", "density"],
        }
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        match self.quantity {
            DensityQuantity::JointXy => self
                .density
                .iter()
                .enumerate()
                .map(|(idx, &v)| {
                    vec![
                        self.center(idx / self.bins),
                        self.center(idx % self.bins),
                        v,
                    ]
                })
                .collect(),
            _ => self
                .density
                .iter()
                .enumerate()
                .map(|(i, &v)| vec![self.center(i), v])
                .collect(),
        }
    }
}

fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

/// Bins a grid posterior or a sample set into a normalized density table.
pub fn density_table(
    src: DensitySource<'_>,
    quantity: DensityQuantity,
    bins: usize,
) -> Result<DensityTable> {
    if bins < 2 {
        return Err(Error::domain("density export needs at least 2 bins"));
    }
    let len = match quantity {
        DensityQuantity::JointXy => bins * bins,
        _ => bins,
    };
    let mut mass = vec![0.0; len];
    let mut deposit = |x: f64, y: f64, a: f64, w: f64| {
        let idx = match quantity {
            DensityQuantity::JointXy => bin_of(x, bins) * bins + bin_of(y, bins),
            DensityQuantity::MarginalX => bin_of(x, bins),
            DensityQuantity::MarginalA => bin_of(a, bins),
        };
        mass[idx] += w;
    };
    match src {
        DensitySource::Samples(s) => {
            if s.draws.is_empty() {
                return Err(Error::EmptyBatch);
            }
            for d in &s.draws {
                deposit(d.x, d.y, d.a, 1.0);
            }
        }
        DensitySource::Grid(g) => {
            let r = g.resolution();
            let a_of: Vec<f64> = (0..r)
                .map(|j| g.model().arbitrariness(g.center(j)))
                .collect::<Result<_>>()?;
            for i in 0..r {
                for (j, &a) in a_of.iter().enumerate() {
                    deposit(g.center(i), g.center(j), a, g.mass(i, j));
                }
            }
        }
    }
    let total: f64 = mass.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::EmptyBatch);
    }
    let area = match quantity {
        DensityQuantity::JointXy => 1.0 / (bins * bins) as f64,
        _ => 1.0 / bins as f64,
    };
    Ok(DensityTable {
        quantity,
        bins,
        density: mass.into_iter().map(|m| m / (total * area)).collect(),
    })
}

/// Writes a density table as CSV (bin centres then density), plus sidecar.
pub fn write_density(table: &DensityTable, meta: &RunMetadata, path: &Path) -> Result<()> {
    write_rows(path, table.header(), table.rows())?;
    write_json(&metadata_path(path), meta)
}

pub fn density_grid_export(
    src: DensitySource<'_>,
    quantity: DensityQuantity,
    bins: usize,
    meta: &RunMetadata,
    path: &Path,
) -> Result<DensityTable> {
    let table = density_table(src, quantity, bins)?;
    write_density(&table, meta, path)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig17_round_trips_and_is_positional() {
        for v in [
            0.5625,
            0.1 + 0.2,
            1.0 / 3.0,
            1e-9,
            0.0,
            1.0,
            0.999_999_999_999_999_9,
            123.456,
        ] {
            let s = format_sig17(v);
            assert!(!s.contains('e'), "{s}");
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_sig17(0.5625), "0.56250000000000000");
        assert_eq!(format_sig17(0.25).trim_start_matches("0.").len(), 17);
    }

    #[test]
    fn sig6_rounding() {
        assert_eq!(round_sig6(0.6098765432), 0.609877);
        assert_eq!(round_sig6(123456789.0), 123457000.0);
        assert_eq!(round_sig6(0.0), 0.0);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            metadata_path(Path::new("out/s.csv")),
            PathBuf::from("out/s.csv.meta.json")
        );
    }

    #[test]
    fn density_quantity_parsing() {
        for q in [
            DensityQuantity::JointXy,
            DensityQuantity::MarginalX,
            DensityQuantity::MarginalA,
        ] {
            assert_eq!(q.to_string().parse::<DensityQuantity>().unwrap(), q);
        }
        assert!("marginal-y".parse::<DensityQuantity>().is_err());
    }
}
