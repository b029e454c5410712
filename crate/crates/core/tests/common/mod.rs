//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver's own selection or gradient code.

#![allow(dead_code)]

use mape_smo::data::SplitMix64;
use mape_smo::KernelColumns;

/// Dense symmetric matrix usable wherever the solver expects kernel columns.
pub struct Matrix {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Matrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                a[r * n + c] = f(r, c);
            }
        }
        Matrix { n, a }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.n + c]
    }
}

impl KernelColumns for Matrix {
    fn len(&self) -> usize {
        self.n
    }

    fn column(&self, k: usize) -> &[f64] {
        &self.a[k * self.n..(k + 1) * self.n]
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Plain RBF, written out independently of the crate.
pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * sq_dist(a, b)).exp()
}

/// `K(a, b) + s K(a, -b)` without the factor one half.
pub fn rbf_sym_unhalved(a: &[f64], b: &[f64], gamma: f64, s: f64) -> f64 {
    let neg: Vec<f64> = b.iter().map(|v| -v).collect();
    rbf(a, b, gamma) + s * rbf(a, &neg, gamma)
}

/// Explicit `[O, -O; -O, O]`.
pub fn dense_p(o: &Matrix) -> Matrix {
    let n = o.n;
    Matrix::from_fn(2 * n, |r, c| {
        let sign = if (r < n) == (c < n) { 1.0 } else { -1.0 };
        sign * o.at(r % n, c % n)
    })
}

/// Effective gradient straight from `tau_i = -s_i (Pu + q)_i` with dense `P`.
pub fn tau_oracle(o: &Matrix, alpha: &[f64], alpha_star: &[f64], y: &[f64], eps_pct: f64) -> Vec<f64> {
    let n = o.n;
    let p = dense_p(o);
    let u: Vec<f64> = alpha.iter().chain(alpha_star).cloned().collect();
    let e = eps_pct / 100.0;
    (0..2 * n)
        .map(|i| {
            let pu: f64 = (0..2 * n).map(|j| p.at(i, j) * u[j]).sum();
            if i < n {
                -(pu + y[i] * (e - 1.0))
            } else {
                pu + y[i - n] * (e + 1.0)
            }
        })
        .collect()
}

/// Maximal KKT violation by direct enumeration of the candidate sets.
pub fn violation_oracle(alpha: &[f64], alpha_star: &[f64], c: &[f64], tau: &[f64]) -> f64 {
    let n = alpha.len();
    let mut up = f64::NEG_INFINITY;
    let mut down = f64::INFINITY;
    for k in 0..n {
        if alpha[k] < c[k] {
            up = up.max(tau[k]);
        }
        if alpha_star[k] > 0.0 {
            up = up.max(tau[n + k]);
        }
        if alpha[k] > 0.0 {
            down = down.min(tau[k]);
        }
        if alpha_star[k] < c[k] {
            down = down.min(tau[n + k]);
        }
    }
    up - down
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Small uniform helper on top of the crate's generator.
pub struct Rng(pub SplitMix64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(SplitMix64::new(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.next_uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn points(&mut self, n: usize, p: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..p).map(|_| self.uniform(-2.0, 2.0)).collect())
            .collect()
    }
}
