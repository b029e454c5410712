//! RBF kernel evaluation and dense Gram matrices.
//!
//! The standard variant (m1) uses `K(x, x') = exp(-gamma * |x - x'|^2)`. The
//! symmetric variants (m2) use `K_s(x, x') = (K(x, x') + a K(x, -x')) / 2`
//! with `a = +1` (even) or `a = -1` (odd).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Symmetry imposed on the regression function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    /// Standard kernel (m1).
    None,
    /// `f(x) = f(-x)` (m2, a = +1).
    Even,
    /// `f(x) = -f(-x)` (m2, a = -1).
    Odd,
}

impl Symmetry {
    /// The sign `a` multiplying the reflected kernel, or `None` for m1.
    pub fn reflection_sign(self) -> Option<f64> {
        match self {
            Symmetry::None => None,
            Symmetry::Even => Some(1.0),
            Symmetry::Odd => Some(-1.0),
        }
    }

    /// Variant token used in files and on the command line.
    pub fn token(self) -> &'static str {
        match self {
            Symmetry::None => "m1",
            Symmetry::Even => "m2+",
            Symmetry::Odd => "m2-",
        }
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Symmetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m1" | "none" => Ok(Symmetry::None),
            "m2+" | "m2_even" | "even" => Ok(Symmetry::Even),
            "m2-" | "m2_odd" | "odd" => Ok(Symmetry::Odd),
            other => Err(Error::InvalidInput(format!(
                "unknown variant `{other}` (expected m1, m2+ or m2-)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub gamma: f64,
    pub symmetry: Symmetry,
}

impl KernelSpec {
    pub fn new(gamma: f64, symmetry: Symmetry) -> Result<Self> {
        let spec = KernelSpec { gamma, symmetry };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        Self::new(gamma, Symmetry::None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Kernel of the configured variant.
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        check_dims(x, x2)?;
        Ok(self.eval_unchecked(x, x2))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        match self.symmetry.reflection_sign() {
            None => rbf_unchecked(x, x2, self.gamma),
            Some(a) => sym_unchecked(x, x2, self.gamma, a),
        }
    }
}

/// Row-major dense feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Features {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "feature matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature value at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Features { data, rows, cols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Features::new(data, rows.len(), cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

fn check_dims(x: &[f64], x2: &[f64]) -> Result<()> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: x2.len(),
        });
    }
    Ok(())
}

fn sq_dist(x: &[f64], x2: &[f64]) -> f64 {
    x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `|x + x2|^2`, i.e. the squared distance between `x` and `-x2`.
fn sq_dist_reflected(x: &[f64], x2: &[f64]) -> f64 {
    x.iter().zip(x2).map(|(a, b)| (a + b) * (a + b)).sum()
}

fn rbf_unchecked(x: &[f64], x2: &[f64], gamma: f64) -> f64 {
    (-gamma * sq_dist(x, x2)).exp()
}

fn sym_unchecked(x: &[f64], x2: &[f64], gamma: f64, a: f64) -> f64 {
    0.5 * (rbf_unchecked(x, x2, gamma) + a * (-gamma * sq_dist_reflected(x, x2)).exp())
}

/// `exp(-gamma * |x - x2|^2)`.
pub fn rbf(x: &[f64], x2: &[f64], gamma: f64) -> Result<f64> {
    check_dims(x, x2)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    Ok(rbf_unchecked(x, x2, gamma))
}

/// Symmetric kernel `(K(x, x2) + a K(x, -x2)) / 2`. Fails for `Symmetry::None`.
pub fn sym_kernel(x: &[f64], x2: &[f64], spec: &KernelSpec) -> Result<f64> {
    let a = spec.symmetry.reflection_sign().ok_or_else(|| {
        Error::Contract("sym_kernel called with symmetry = none".to_owned())
    })?;
    check_dims(x, x2)?;
    spec.validate()?;
    Ok(sym_unchecked(x, x2, spec.gamma, a))
}

/// Column access to a kernel matrix.
///
/// The solver reads the Gram matrix only through this trait, so a column
/// cache can stand in for the dense matrix.
pub trait KernelColumns {
    fn len(&self) -> usize;

    /// Column `k`. The matrix is symmetric, so this is also row `k`.
    fn column(&self, k: usize) -> &[f64];

    fn entry(&self, k: usize, l: usize) -> f64 {
        self.column(l)[k]
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dense, exactly symmetric `n x n` kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGram {
    n: usize,
    entries: Vec<f64>,
    spec: KernelSpec,
}

impl KernelGram {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

impl KernelColumns for KernelGram {
    fn len(&self) -> usize {
        self.n
    }

    fn column(&self, k: usize) -> &[f64] {
        &self.entries[k * self.n..(k + 1) * self.n]
    }

    fn entry(&self, k: usize, l: usize) -> f64 {
        self.entries[k * self.n + l]
    }
}

/// Builds the Gram matrix of `x` under `spec`, filling the lower triangle and
/// mirroring it.
pub fn build_gram(x: &Features, spec: &KernelSpec) -> Result<KernelGram> {
    spec.validate()?;
    let n = x.rows();
    let mut entries = vec![0.0; n * n];
    for k in 0..n {
        let xk = x.row(k);
        for l in 0..=k {
            let v = spec.eval_unchecked(xk, x.row(l));
            entries[k * n + l] = v;
            entries[l * n + k] = v;
        }
    }
    Ok(KernelGram {
        n,
        entries,
        spec: *spec,
    })
}
