//! Deterministic synthetic data and the dataset CSV format.
//!
//! Generator: SplitMix64. Each draw advances the state by
//! `0x9E3779B97F4A7C15` and mixes it:
//!
//! ```text
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z = z ^ (z >> 31)
//! ```
//!
//! Uniforms are `((z >> 11) + 0.5) * 2^-53`, strictly inside `(0, 1)`.
//! Normals come from Box-Muller in pairs: with uniforms `u1, u2` the stream
//! yields `sqrt(-2 ln u1) cos(2 pi u2)` and then `sqrt(-2 ln u1) sin(2 pi u2)`.
//! A dataset draws all `n * p` features row by row first, then the `n`
//! targets as `exp(normal)` from the same stream.

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::dualprob::{Hyperparams, TrainingSet};
use crate::error::{Error, Result};
use crate::kernel::{Features, KernelSpec, Symmetry};

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * 2f64.powi(-53)
    }
}

/// Standard normals by Box-Muller over a [`SplitMix64`] stream.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            rng: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.rng.next_uniform();
        let u2 = self.rng.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub id: String,
    pub n: usize,
    pub p: usize,
    pub epsilon_pct: f64,
    pub gamma: f64,
    pub symmetry: Symmetry,
    pub c: f64,
    pub seed: u64,
}

/// `(n, epsilon_pct, gamma, symmetry)` for C1..C10; `p = 5`, `C = 1`, seed = index.
const BUILTIN: [(usize, f64, f64, Symmetry); 10] = [
    (50, 5.0, 0.1, Symmetry::None),
    (50, 15.0, 0.1, Symmetry::None),
    (300, 5.0, 0.1, Symmetry::None),
    (300, 15.0, 0.1, Symmetry::None),
    (50, 5.0, 0.1, Symmetry::Even),
    (300, 10.0, 0.1, Symmetry::Even),
    (50, 5.0, 2.0, Symmetry::None),
    (300, 10.0, 2.0, Symmetry::None),
    (50, 5.0, 0.1, Symmetry::Odd),
    (300, 10.0, 0.1, Symmetry::Odd),
];

impl SyntheticConfig {
    /// Built-in configuration `C1` .. `C10` (case-insensitive).
    pub fn builtin(id: &str) -> Result<Self> {
        let index: usize = id
            .strip_prefix(['C', 'c'])
            .and_then(|s| s.parse().ok())
            .filter(|i| (1..=BUILTIN.len()).contains(i))
            .ok_or_else(|| Error::InvalidInput(format!("unknown configuration `{id}`")))?;
        let (n, epsilon_pct, gamma, symmetry) = BUILTIN[index - 1];
        Ok(SyntheticConfig {
            id: format!("C{index}"),
            n,
            p: 5,
            epsilon_pct,
            gamma,
            symmetry,
            c: 1.0,
            seed: index as u64,
        })
    }

    pub fn all_builtin() -> Vec<Self> {
        (1..=BUILTIN.len())
            .map(|i| Self::builtin(&format!("C{i}")).expect("builtin id"))
            .collect()
    }

    pub fn spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.gamma, self.symmetry)
    }

    /// Default hyperparameters with this configuration's `C` and `epsilon`.
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            c: self.c,
            epsilon_pct: self.epsilon_pct,
            ..Hyperparams::default()
        }
    }
}

pub fn generate(config: &SyntheticConfig) -> Result<TrainingSet> {
    if config.n == 0 || config.p == 0 {
        return Err(Error::InvalidInput(format!(
            "configuration {} needs n >= 1 and p >= 1 (got n = {}, p = {})",
            config.id, config.n, config.p
        )));
    }
    let mut normals = NormalStream::new(config.seed);
    let data: Vec<f64> = (0..config.n * config.p)
        .map(|_| normals.next_normal())
        .collect();
    let y: Vec<f64> = (0..config.n).map(|_| normals.next_normal().exp()).collect();
    TrainingSet::new(Features::new(data, config.n, config.p)?, y)
}

/// Rows read from a CSV file. The column named `y`, if present, holds targets;
/// every other column is a feature, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub feature_names: Vec<String>,
    pub x: Features,
    pub y: Option<Vec<f64>>,
}

impl Table {
    pub fn into_training_set(self) -> Result<TrainingSet> {
        let y = self
            .y
            .ok_or_else(|| Error::InvalidInput("dataset has no `y` column".into()))?;
        TrainingSet::new(self.x, y)
    }
}

pub fn read_csv<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let y_col = headers.iter().position(|h| h == "y");
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&i| Some(i) != y_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::parse(1, None, "no feature columns"));
    }
    let feature_names = feature_cols.iter().map(|&i| headers[i].to_owned()).collect();
    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut rows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let line = r + 2;
        let field = |i: usize| -> Result<f64> {
            let tok = &record[i];
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line, Some(&headers[i]), format!("`{tok}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(line, Some(&headers[i]), format!("`{tok}` is not finite")))
            }
        };
        for &i in &feature_cols {
            data.push(field(i)?);
        }
        if let Some(i) = y_col {
            y.push(field(i)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::parse(1, None, "no data rows"));
    }
    Ok(Table {
        feature_names,
        x: Features::new(data, rows, feature_cols.len())?,
        y: y_col.map(|_| y),
    })
}

/// Writes `y,x1,...,xp` with shortest round-trip decimals.
pub fn write_csv<W: Write>(train: &TrainingSet, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_owned()];
    header.extend((1..=train.dim()).map(|j| format!("x{j}")));
    wtr.write_record(&header)?;
    for (k, row) in train.x().iter_rows().enumerate() {
        let mut rec = vec![format!("{:?}", train.y()[k])];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
