//! Binary classification datasets: libsvm text I/O and a seeded synthetic
//! generator.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Sparse features as `(0-based index, value)`, indices increasing.
    pub features: Vec<(usize, f64)>,
    /// `-1.0` or `+1.0`.
    pub label: f64,
}

impl Sample {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.features.iter().map(|&(i, v)| v * x[i]).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.features.iter().map(|&(_, v)| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dimension: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, dimension: usize) -> Result<Self> {
        for (n, s) in samples.iter().enumerate() {
            if s.label != 1.0 && s.label != -1.0 {
                return Err(Error::InvalidParameter(format!(
                    "sample {n} has label {} outside {{-1, +1}}",
                    s.label
                )));
            }
            if let Some(&(i, _)) = s.features.iter().find(|(i, _)| *i >= dimension) {
                return Err(Error::InvalidParameter(format!(
                    "sample {n} has feature index {i} >= dimension {dimension}"
                )));
            }
        }
        Ok(Self { samples, dimension })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn parse_label(token: &str) -> std::result::Result<f64, String> {
    let v: f64 = token.parse().map_err(|_| format!("label {token:?} is not a number"))?;
    if v == 1.0 {
        Ok(1.0)
    } else if v == 0.0 || v == -1.0 {
        Ok(-1.0)
    } else {
        Err(format!("unknown label value {token:?}"))
    }
}

fn parse_line(line: &str) -> std::result::Result<Option<Sample>, String> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let mut tokens = body.split_whitespace();
    let label = parse_label(tokens.next().unwrap())?;
    let mut features = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| format!("feature {tok:?} is not index:value"))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| format!("feature index {idx:?} is not a positive integer"))?;
        if idx == 0 {
            return Err("feature indices are 1-based; found 0".into());
        }
        let val: f64 = val
            .parse()
            .map_err(|_| format!("feature value {val:?} is not a number"))?;
        features.push((idx - 1, val));
    }
    features.sort_by_key(|&(i, _)| i);
    if features.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err("duplicate feature index".into());
    }
    Ok(Some(Sample { features, label }))
}

/// Parses libsvm text (`label idx:val ...`, 1-based indices). The dimension is
/// the largest index seen unless `dimension` overrides it.
pub fn parse_libsvm<R: BufRead>(reader: R, source: &Path, dimension: Option<usize>) -> Result<Dataset> {
    let mut samples = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        match parse_line(&line) {
            Ok(Some(s)) => samples.push(s),
            Ok(None) => {}
            Err(message) => {
                return Err(Error::Parse {
                    path: source.to_path_buf(),
                    line: n + 1,
                    message,
                })
            }
        }
    }
    let seen = samples
        .iter()
        .filter_map(|s| s.features.last().map(|&(i, _)| i + 1))
        .max()
        .unwrap_or(0);
    let dimension = match dimension {
        Some(d) if d < seen => {
            return Err(Error::Parse {
                path: source.to_path_buf(),
                line: 0,
                message: format!("dimension override {d} is smaller than largest index {seen}"),
            })
        }
        Some(d) => d,
        None => seen,
    };
    Dataset::new(samples, dimension)
}

pub fn load_libsvm(path: impl AsRef<Path>, dimension: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_libsvm(BufReader::new(file), path, dimension)
}

/// Writes libsvm text; floats use the shortest round-trip representation.
pub fn write_libsvm<W: Write>(dataset: &Dataset, mut writer: W) -> Result<()> {
    for s in &dataset.samples {
        write!(writer, "{}", if s.label > 0.0 { "+1" } else { "-1" })?;
        for &(i, v) in &s.features {
            write!(writer, " {}:{}", i + 1, v)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn save_libsvm(dataset: &Dataset, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let mut w = std::io::BufWriter::new(File::create(path)?);
    write_libsvm(dataset, &mut w)?;
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Seeded sparse Gaussian features with labels from a planted hyperplane and
/// 10% label noise.
pub fn synthesize_classification(samples: usize, dimension: usize, sparsity: f64, seed: u64) -> Result<Dataset> {
    if samples == 0 || dimension == 0 {
        return Err(Error::InvalidParameter(
            "need at least one sample and one feature".into(),
        ));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sparsity must be in (0, 1], got {sparsity}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut features = Vec::new();
        for j in 0..dimension {
            if rng.random::<f64>() < sparsity {
                let v: f64 = StandardNormal.sample(&mut rng);
                features.push((j, v));
            }
        }
        let score: f64 = features.iter().map(|&(j, v)| v * planted[j]).sum();
        let mut label = if score >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < 0.1 {
            label = -label;
        }
        out.push(Sample { features, label });
    }
    Dataset::new(out, dimension)
}
