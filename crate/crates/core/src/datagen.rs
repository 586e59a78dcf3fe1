//! Synthetic bounded regression data with symmetric label noise, CSV I/O,
//! and seeded train/test splits.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversarial::{Dataset, LinearModel};
use crate::error::{Error, Result};

/// Label noise, symmetric about zero in every variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    /// `+a` or `-a` with equal probability.
    TwoPoint { a: f64 },
    /// Uniform on `[-a, a]`.
    UniformSym { a: f64 },
    /// `+-a * outlier_scale` with probability `outlier_frac`, otherwise `+-a`.
    TwoPointWithOutliers { a: f64, outlier_frac: f64, outlier_scale: f64 },
}

impl Noise {
    pub fn validate(&self) -> Result<()> {
        let a = match *self {
            Noise::TwoPoint { a } | Noise::UniformSym { a } => a,
            Noise::TwoPointWithOutliers {
                a,
                outlier_frac,
                outlier_scale,
            } => {
                if !(0.0..=0.5).contains(&outlier_frac) {
                    return Err(Error::InvalidParams(format!("outlier_frac must lie in [0, 0.5], got {outlier_frac}")));
                }
                if !(outlier_scale > 0.0 && outlier_scale.is_finite()) {
                    return Err(Error::InvalidParams(format!("outlier_scale must be positive, got {outlier_scale}")));
                }
                a
            }
        };
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParams(format!("noise amplitude must be positive, got {a}")));
        }
        Ok(())
    }

    /// Largest possible `|zeta|`.
    pub fn amplitude(&self) -> f64 {
        match *self {
            Noise::TwoPoint { a } | Noise::UniformSym { a } => a,
            Noise::TwoPointWithOutliers { a, outlier_scale, .. } => a * outlier_scale.max(1.0),
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Noise::TwoPoint { a } => sign(rng) * a,
            Noise::UniformSym { a } => rng.gen_range(-a..=a),
            Noise::TwoPointWithOutliers {
                a,
                outlier_frac,
                outlier_scale,
            } => {
                let s = sign(rng);
                if rng.gen_bool(outlier_frac) {
                    s * a * outlier_scale
                } else {
                    s * a
                }
            }
        }
    }
}

fn sign(rng: &mut impl Rng) -> f64 {
    if rng.gen_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Noise::TwoPoint { a } => write!(f, "twopoint:{a}"),
            Noise::UniformSym { a } => write!(f, "uniform:{a}"),
            Noise::TwoPointWithOutliers {
                a,
                outlier_frac,
                outlier_scale,
            } => write!(f, "outliers:{a},{outlier_frac},{outlier_scale}"),
        }
    }
}

impl FromStr for Noise {
    type Err = Error;

    /// `twopoint:a`, `uniform:a` or `outliers:a,frac,scale`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParams(format!("bad noise spec {s:?}; expected twopoint:a, uniform:a or outliers:a,frac,scale"));
        let (kind, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        let noise = match (kind.to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("twopoint", &[a]) => Noise::TwoPoint { a },
            ("uniform", &[a]) => Noise::UniformSym { a },
            ("outliers", &[a, outlier_frac, outlier_scale]) => Noise::TwoPointWithOutliers {
                a,
                outlier_frac,
                outlier_scale,
            },
            _ => return Err(bad()),
        };
        noise.validate()?;
        Ok(noise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub d: usize,
    pub m: usize,
    #[serde(rename = "B")]
    pub bound: f64,
    pub noise: Noise,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::InvalidParams(format!("d and m must be >= 1, got d={} m={}", self.d, self.m)));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::InvalidParams(format!("B must be positive, got {}", self.bound)));
        }
        self.noise.validate()?;
        if self.noise.amplitude() >= self.bound {
            return Err(Error::ConfigInfeasible(format!(
                "noise amplitude {} leaves no room for the signal under B = {}",
                self.noise.amplitude(),
                self.bound
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub data: Dataset,
    pub truth: LinearModel,
}

/// Features uniform on `[-1, 1]^d`, labels `<w*, x> + b* + zeta`.
///
/// The truth is drawn uniformly and shrunk so that `||w*||_1 + |b*|` plus the
/// noise amplitude stays within `B`, so no label ever needs clipping.
pub fn synth_linear_dataset(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w: Vec<f64> = (0..cfg.d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mut b: f64 = rng.gen_range(-1.0..=1.0);
    let reach = (cfg.bound - cfg.noise.amplitude()) * (1.0 - 1e-12);
    let l1 = w.iter().map(|v| v.abs()).sum::<f64>() + b.abs();
    if l1 > reach {
        let scale = reach / l1;
        w.iter_mut().for_each(|v| *v *= scale);
        b *= scale;
    }
    let truth = LinearModel::new(w, b);
    let data = sample_rows(&truth, cfg, &mut rng)?;
    Ok(SynthData { data, truth })
}

/// Fresh rows from a fixed truth (for example an independent test sample),
/// drawn with `cfg.seed`. The truth must leave room for the noise under `B`.
pub fn synth_from_truth(truth: &LinearModel, cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    if truth.dim() != cfg.d {
        return Err(Error::DimensionMismatch {
            expected: cfg.d,
            found: truth.dim(),
            context: Some("truth weights".into()),
        });
    }
    let l1 = truth.weights.iter().map(|v| v.abs()).sum::<f64>() + truth.bias.abs();
    if l1 + cfg.noise.amplitude() > cfg.bound {
        return Err(Error::ConfigInfeasible(format!(
            "truth reach {l1} plus noise {} exceeds B = {}",
            cfg.noise.amplitude(),
            cfg.bound
        )));
    }
    sample_rows(truth, cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

fn sample_rows(truth: &LinearModel, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let mut features = Vec::with_capacity(cfg.m);
    let mut labels = Vec::with_capacity(cfg.m);
    for _ in 0..cfg.m {
        let x: Vec<f64> = (0..cfg.d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let y = truth.predict(&x) + cfg.noise.sample(rng);
        if y.abs() > cfg.bound {
            return Err(Error::ConfigInfeasible(format!("label {y} exceeds B = {}", cfg.bound)));
        }
        features.push(x);
        labels.push(y);
    }
    Dataset::new(features, labels)
}

/// Seeded shuffle, first `round(train_frac * m)` rows for training.
pub fn train_test_split(data: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidParams(format!("train fraction must lie in (0, 1), got {train_frac}")));
    }
    let m = data.len();
    let n_train = ((train_frac * m as f64).round() as usize).clamp(1, m.saturating_sub(1).max(1));
    if n_train >= m {
        return Err(Error::InvalidParams(format!("cannot split {m} rows")));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((data.subset(&idx[..n_train]), data.subset(&idx[n_train..])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { has_header: true }
    }
}

/// Numeric CSV with the label in the last column. Rows and columns in
/// errors are 1-based positions in the file.
pub fn parse_csv_dataset(reader: impl Read, options: CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            reason: e.to_string(),
        })?;
        let row = record.position().map_or(features.len() + 1, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(Error::Parse {
                row,
                column: record.len(),
                reason: "need at least one feature and a label".into(),
            });
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: record.len(),
                context: Some(format!("columns in row {row}")),
            });
        }
        let mut values = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                reason: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    reason: format!("not finite: {cell:?}"),
                });
            }
            values.push(v);
        }
        labels.push(values.pop().unwrap_or_default());
        features.push(values);
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            row: 0,
            column: 0,
            reason: "no data rows".into(),
        });
    }
    Dataset::new(features, labels)
}

pub fn load_csv_dataset(path: impl AsRef<Path>, options: CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv_dataset(file, options)
}

/// Header `f0,...,f{d-1},y`; values use the shortest round-trip formatting.
pub fn write_csv_dataset(data: &Dataset, writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Parse {
        row: 0,
        column: 0,
        reason: e.to_string(),
    };
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    header.push("y".into());
    wtr.write_record(&header).map_err(to_err)?;
    for (x, y) in data.rows() {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        wtr.write_record(&rec).map_err(to_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_csv_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_dataset(data, std::io::BufWriter::new(file))
}
