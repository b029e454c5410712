//! The MAPE-SVR dual problem.
//!
//! Variables are `u = [alpha; alpha_star]` in `R^{2N}`, minimizing
//! `1/2 u'Pu + q'u` with `P = [O, -O; -O, O]`, `q = [y(e - 1); y(e + 1)]`,
//! `e = epsilon_pct / 100`, subject to `sum(alpha - alpha_star) = 0` and
//! `0 <= alpha_k, alpha_star_k <= 100 C / y_k`.
//!
//! Dual index `i < N` addresses `alpha_i`; `N + k` addresses `alpha_star_k`.
//! The gradient is kept only in its sign-adjusted form `tau_i = -s_i G_i`.

use crate::error::{Error, Result};
use crate::kernel::{Features, KernelColumns};

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Regularization `C`.
    pub c: f64,
    /// Tube half-width in percent (5 means 5%).
    pub epsilon_pct: f64,
    /// Relative stopping tolerance; the absolute threshold is `tol * mean(y)`.
    pub tol: f64,
    /// Loop passes between shrinking checks. `None` means `min(N, 1000)`.
    pub n_check: Option<usize>,
    /// Consecutive qualifying checks before a point is frozen.
    pub n_freeze: usize,
    pub max_iter: usize,
    pub shrinking: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            c: 1.0,
            epsilon_pct: 5.0,
            tol: 1e-3,
            n_check: None,
            n_freeze: 5,
            max_iter: 100_000,
            shrinking: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
            }
        };
        positive("C", self.c)?;
        positive("epsilon", self.epsilon_pct)?;
        positive("tol", self.tol)?;
        if self.n_check == Some(0) {
            return Err(Error::InvalidInput("n_check must be at least 1".into()));
        }
        if self.n_freeze == 0 {
            return Err(Error::InvalidInput("n_freeze must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_check_for(&self, n: usize) -> usize {
        self.n_check.unwrap_or_else(|| n.clamp(1, 1000))
    }
}

/// Per-point upper bounds `c_k = 100 C / y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    c_k: Vec<f64>,
}

impl Bounds {
    pub fn upper(&self, k: usize) -> f64 {
        self.c_k[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c_k
    }

    pub fn len(&self) -> usize {
        self.c_k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c_k.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.c_k.iter().copied().fold(0.0, f64::max)
    }
}

pub fn make_bounds(y: &[f64], c: f64) -> Result<Bounds> {
    check_targets(y)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    Ok(Bounds {
        c_k: y.iter().map(|&yk| 100.0 * c / yk).collect(),
    })
}

pub(crate) fn check_targets(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::InvalidInput("at least one target is required".into()));
    }
    for (index, &value) in y.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveTarget { index, value });
        }
    }
    Ok(())
}

/// Inputs with strictly positive targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    x: Features,
    y: Vec<f64>,
}

impl TrainingSet {
    pub fn new(x: Features, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                found: y.len(),
            });
        }
        check_targets(&y)?;
        Ok(TrainingSet { x, y })
    }

    pub fn x(&self) -> &Features {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn mean_target(&self) -> f64 {
        mean(&self.y)
    }

    /// `max y / min y`.
    pub fn dynamic_range(&self) -> f64 {
        let max = self.y.iter().copied().fold(f64::MIN, f64::max);
        let min = self.y.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mutable solver state.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    /// Effective gradient; `tau[k]` for `alpha_k`, `tau[N + k]` for `alpha_star_k`.
    pub tau: Vec<f64>,
    /// Membership of each training point in the active set.
    pub active: Vec<bool>,
    /// Consecutive qualifying shrink checks per point.
    pub counter: Vec<usize>,
    pub iter: usize,
}

impl DualState {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Value of dual variable `i`.
    pub fn value(&self, i: usize) -> f64 {
        let n = self.n();
        if i < n {
            self.alpha[i]
        } else {
            self.alpha_star[i - n]
        }
    }

    /// `beta = alpha - alpha_star`.
    pub fn beta(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.alpha_star)
            .map(|(a, s)| a - s)
            .collect()
    }

    /// Whether dual variable `i` can move in its `+s_i` direction.
    pub fn in_up(&self, i: usize, bounds: &Bounds) -> bool {
        let n = self.n();
        if i < n {
            self.alpha[i] < bounds.upper(i)
        } else {
            self.alpha_star[i - n] > 0.0
        }
    }

    /// Whether dual variable `i` can move in its `-s_i` direction.
    pub fn in_down(&self, i: usize, bounds: &Bounds) -> bool {
        let n = self.n();
        if i < n {
            self.alpha[i] > 0.0
        } else {
            self.alpha_star[i - n] < bounds.upper(i - n)
        }
    }

    pub fn is_free(&self, i: usize, bounds: &Bounds) -> bool {
        let v = self.value(i);
        v > 0.0 && v < bounds.upper(point_of(i, self.n()))
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// `|sum(alpha - alpha_star)|`.
    pub fn equality_residual(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.alpha_star)
            .map(|(a, s)| a - s)
            .sum::<f64>()
            .abs()
    }
}

/// Training-point index of dual index `i`.
pub fn point_of(i: usize, n: usize) -> usize {
    if i < n {
        i
    } else {
        i - n
    }
}

/// Whether dual index `i` addresses an `alpha` (as opposed to `alpha_star`).
pub fn is_alpha(i: usize, n: usize) -> bool {
    i < n
}

/// Zero start: `tau_k = y_k(1 - e)`, `tau_{N+k} = y_k(1 + e)`, all points active.
pub fn init_state(y: &[f64], epsilon_pct: f64) -> Result<DualState> {
    check_targets(y)?;
    let n = y.len();
    let zeros = vec![0.0; n];
    Ok(DualState {
        tau: tau_from_expansion(y, &zeros, epsilon_pct),
        alpha: zeros.clone(),
        alpha_star: zeros,
        active: vec![true; n],
        counter: vec![0; n],
        iter: 0,
    })
}

/// `F_k = sum_i O_ki (alpha_i - alpha_star_i)`.
pub fn kernel_expansion<G: KernelColumns + ?Sized>(
    gram: &G,
    alpha: &[f64],
    alpha_star: &[f64],
) -> Vec<f64> {
    let n = gram.len();
    let mut f = vec![0.0; n];
    for i in 0..n {
        let beta = alpha[i] - alpha_star[i];
        if beta == 0.0 {
            continue;
        }
        for (fk, &o) in f.iter_mut().zip(gram.column(i)) {
            *fk += o * beta;
        }
    }
    f
}

pub(crate) fn tau_from_expansion(y: &[f64], f: &[f64], epsilon_pct: f64) -> Vec<f64> {
    let n = y.len();
    let mut tau = vec![0.0; 2 * n];
    for k in 0..n {
        tau[k] = y[k] * (1.0 - epsilon_pct / 100.0) - f[k];
        tau[n + k] = y[k] * (1.0 + epsilon_pct / 100.0) - f[k];
    }
    tau
}

/// Recomputes the full effective gradient in `O(N^2)`.
pub fn full_gradient<G: KernelColumns + ?Sized>(
    gram: &G,
    alpha: &[f64],
    alpha_star: &[f64],
    y: &[f64],
    epsilon_pct: f64,
) -> Vec<f64> {
    let f = kernel_expansion(gram, alpha, alpha_star);
    tau_from_expansion(y, &f, epsilon_pct)
}

/// `1/2 beta' O beta + sum_k [alpha_k y_k (e - 1) + alpha_star_k y_k (e + 1)]`.
pub fn dual_objective<G: KernelColumns + ?Sized>(
    gram: &G,
    alpha: &[f64],
    alpha_star: &[f64],
    y: &[f64],
    epsilon_pct: f64,
) -> f64 {
    let e = epsilon_pct / 100.0;
    let f = kernel_expansion(gram, alpha, alpha_star);
    let mut quad = 0.0;
    let mut lin = 0.0;
    for k in 0..y.len() {
        quad += (alpha[k] - alpha_star[k]) * f[k];
        lin += alpha[k] * y[k] * (e - 1.0) + alpha_star[k] * y[k] * (e + 1.0);
    }
    0.5 * quad + lin
}
