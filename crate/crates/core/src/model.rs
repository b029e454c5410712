//! Bias recovery, prediction and the on-disk model format.
//!
//! A model file is UTF-8 text:
//!
//! ```text
//! psvr-model v1
//! variant m1
//! gamma 0.1
//! epsilon_pct 5.0
//! C 1.0
//! bias 1.2345 free_average
//! dim 5
//! nsv 2
//! 0.37 x_1 ... x_p
//! -0.12 x_1 ... x_p
//! ```
//!
//! Each support line is `beta x_1 ... x_p`. Reals use the shortest decimal
//! that parses back to the same `f64`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::dualprob::{check_targets, point_of, Bounds, DualState, Hyperparams, TrainingSet};
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Symmetry};
use crate::smo::{select_full, SolveResult};

const MAGIC: &str = "psvr-model";
const VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasMethod {
    /// Mean of `tau` over free variables.
    FreeAverage,
    /// Midpoint `(tau_{i*} + tau_{j*}) / 2`; used when nothing is free.
    Midpoint,
}

impl BiasMethod {
    pub fn token(self) -> &'static str {
        match self {
            BiasMethod::FreeAverage => "free_average",
            BiasMethod::Midpoint => "midpoint",
        }
    }
}

impl fmt::Display for BiasMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for BiasMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free_average" => Ok(BiasMethod::FreeAverage),
            "midpoint" => Ok(BiasMethod::Midpoint),
            other => Err(Error::InvalidInput(format!("unknown bias method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEstimate {
    pub bias: f64,
    pub method: BiasMethod,
}

/// Recovers the bias from a fully reconstructed `tau`.
pub fn recover_bias(state: &DualState, bounds: &Bounds) -> BiasEstimate {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..2 * state.n() {
        if state.is_free(i, bounds) {
            sum += state.tau[i];
            count += 1;
        }
    }
    if count > 0 {
        return BiasEstimate {
            bias: sum / count as f64,
            method: BiasMethod::FreeAverage,
        };
    }
    let bias = match select_full(state, bounds) {
        Some(ws) => 0.5 * (state.tau[ws.i_star] + state.tau[ws.j_star]),
        // Unreachable for valid states: every alpha is in I_up or I_down.
        None => 0.0,
    };
    BiasEstimate {
        bias,
        method: BiasMethod::Midpoint,
    }
}

/// `tau` values of the free dual variables.
pub fn free_tau(state: &DualState, bounds: &Bounds) -> Vec<f64> {
    (0..2 * state.n())
        .filter(|&i| state.is_free(i, bounds))
        .map(|i| state.tau[i])
        .collect()
}

/// The free dual indices, grouped by training point.
pub fn free_points(state: &DualState, bounds: &Bounds) -> Vec<usize> {
    let n = state.n();
    let mut pts: Vec<usize> = (0..2 * n)
        .filter(|&i| state.is_free(i, bounds))
        .map(|i| point_of(i, n))
        .collect();
    pts.dedup();
    pts
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: KernelSpec,
    pub bias: f64,
    pub bias_method: BiasMethod,
    pub epsilon_pct: f64,
    pub c: f64,
    dim: usize,
    /// Row-major support inputs, `support_beta.len()` rows of `dim` values.
    support_x: Vec<f64>,
    support_beta: Vec<f64>,
}

impl TrainedModel {
    /// Assembles a model from explicit support vectors. Zero coefficients are dropped.
    pub fn new(
        spec: KernelSpec,
        bias: f64,
        bias_method: BiasMethod,
        epsilon_pct: f64,
        c: f64,
        dim: usize,
        support: impl IntoIterator<Item = (f64, Vec<f64>)>,
    ) -> Result<Self> {
        spec.validate()?;
        if dim == 0 {
            return Err(Error::InvalidInput("model dimension must be at least 1".into()));
        }
        let mut support_x = Vec::new();
        let mut support_beta = Vec::new();
        for (beta, x) in support {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
            if beta != 0.0 {
                support_beta.push(beta);
                support_x.extend(x);
            }
        }
        Ok(TrainedModel {
            spec,
            bias,
            bias_method,
            epsilon_pct,
            c,
            dim,
            support_x,
            support_beta,
        })
    }

    pub fn from_solution(
        result: &SolveResult,
        train: &TrainingSet,
        spec: &KernelSpec,
        hp: &Hyperparams,
    ) -> Result<Self> {
        if result.alpha.len() != train.n() {
            return Err(Error::DimensionMismatch {
                expected: train.n(),
                found: result.alpha.len(),
            });
        }
        let support = result
            .beta()
            .into_iter()
            .enumerate()
            .map(|(k, b)| (b, train.x().row(k).to_vec()));
        TrainedModel::new(
            *spec,
            result.bias,
            result.bias_method,
            hp.epsilon_pct,
            hp.c,
            train.dim(),
            support,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_count(&self) -> usize {
        self.support_beta.len()
    }

    pub fn support_beta(&self) -> &[f64] {
        &self.support_beta
    }

    pub fn support_row(&self, s: usize) -> &[f64] {
        &self.support_x[s * self.dim..(s + 1) * self.dim]
    }

    /// `sum_s beta_s K(x_s, x) + b`, with the variant's kernel.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut f = 0.0;
        for (row, beta) in self.support_x.chunks_exact(self.dim).zip(&self.support_beta) {
            f += beta * self.spec.eval_unchecked(row, x);
        }
        Ok(f + self.bias)
    }

    pub fn predict_many<'r>(&self, rows: impl IntoIterator<Item = &'r [f64]>) -> Result<Vec<f64>> {
        rows.into_iter().map(|r| self.predict(r)).collect()
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC} {VERSION}")?;
        writeln!(w, "variant {}", self.spec.symmetry.token())?;
        writeln!(w, "gamma {:?}", self.spec.gamma)?;
        writeln!(w, "epsilon_pct {:?}", self.epsilon_pct)?;
        writeln!(w, "C {:?}", self.c)?;
        writeln!(w, "bias {:?} {}", self.bias, self.bias_method)?;
        writeln!(w, "dim {}", self.dim)?;
        writeln!(w, "nsv {}", self.support_beta.len())?;
        for (s, beta) in self.support_beta.iter().enumerate() {
            write!(w, "{beta:?}")?;
            for v in self.support_row(s) {
                write!(w, " {v:?}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((no, line)) => Ok((no, line?)),
                None => Err(Error::parse(0, Some(what), "unexpected end of file")),
            }
        };

        let (no, header) = next("header")?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(Error::parse(no, Some("header"), format!("expected `{MAGIC} {VERSION}`")));
        }
        match parts.next() {
            Some(VERSION) => {}
            Some(other) => return Err(Error::Version { found: other.to_owned() }),
            None => return Err(Error::parse(no, Some("header"), "missing version")),
        }

        let (no, line) = next("variant")?;
        let symmetry: Symmetry = keyed(no, &line, "variant")?[0]
            .parse()
            .map_err(|e: Error| Error::parse(no, Some("variant"), e.to_string()))?;
        let (no, line) = next("gamma")?;
        let gamma = real(no, "gamma", keyed(no, &line, "gamma")?[0])?;
        let (no, line) = next("epsilon_pct")?;
        let epsilon_pct = real(no, "epsilon_pct", keyed(no, &line, "epsilon_pct")?[0])?;
        let (no, line) = next("C")?;
        let c = real(no, "C", keyed(no, &line, "C")?[0])?;
        let (no, line) = next("bias")?;
        let fields = keyed(no, &line, "bias")?;
        let bias = real(no, "bias", fields[0])?;
        let bias_method: BiasMethod = fields
            .get(1)
            .ok_or_else(|| Error::parse(no, Some("bias"), "missing bias method"))?
            .parse()
            .map_err(|e: Error| Error::parse(no, Some("bias"), e.to_string()))?;
        let (no, line) = next("dim")?;
        let dim = count(no, "dim", keyed(no, &line, "dim")?[0])?;
        let (no, line) = next("nsv")?;
        let nsv = count(no, "nsv", keyed(no, &line, "nsv")?[0])?;

        let spec = KernelSpec::new(gamma, symmetry)
            .map_err(|e| Error::parse(0, Some("gamma"), e.to_string()))?;
        let mut support = Vec::with_capacity(nsv);
        for s in 0..nsv {
            let (no, line) = next("support vector")?;
            let vals = line
                .split_whitespace()
                .enumerate()
                .map(|(j, tok)| {
                    let field = if j == 0 { "beta".to_owned() } else { format!("x{j}") };
                    real(no, &field, tok)
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != dim + 1 {
                return Err(Error::parse(
                    no,
                    None,
                    format!("support vector {s} has {} values, expected {}", vals.len(), dim + 1),
                ));
            }
            if vals[0] == 0.0 {
                return Err(Error::parse(no, Some("beta"), "support coefficient is zero"));
            }
            support.push((vals[0], vals[1..].to_vec()));
        }
        for (no, line) in lines {
            if !line?.trim().is_empty() {
                return Err(Error::parse(no, None, "trailing content after support vectors"));
            }
        }
        TrainedModel::new(spec, bias, bias_method, epsilon_pct, c, dim, support)
    }
}

fn keyed<'l>(no: usize, line: &'l str, key: &str) -> Result<Vec<&'l str>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::parse(no, Some(key), format!("expected line starting with `{key}`")));
    }
    let rest: Vec<&str> = parts.collect();
    if rest.is_empty() {
        return Err(Error::parse(no, Some(key), "missing value"));
    }
    Ok(rest)
}

fn real(no: usize, field: &str, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(no, Some(field), format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(no, Some(field), format!("`{tok}` is not finite")));
    }
    Ok(v)
}

fn count(no: usize, field: &str, tok: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(no, Some(field), format!("`{tok}` is not a count")))
}

/// Mean absolute percentage error, in percent.
pub fn mape(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    check_targets(y_true)?;
    let sum: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p).abs() / t)
        .sum();
    Ok(100.0 * sum / y_true.len() as f64)
}
