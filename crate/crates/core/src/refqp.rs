//! Reference solver for the dual QP
//!
//! ```text
//! min  1/2 u'Pu + q'u   s.t.  0 <= u_i <= c_i,  sum_i s_i u_i = 0
//! ```
//!
//! by projected gradient with a fixed step `1/L`. The projection onto the
//! box-plus-hyperplane set is exact (bisection on the hyperplane multiplier).
//! Optimality is certified with the same maximal-violating-pair measure the
//! SMO solver stops on, so the two solutions are comparable on equal terms.

use crate::dualprob::{make_bounds, mean, Bounds, DualState, Hyperparams, TrainingSet};
use crate::error::{Error, Result};
use crate::kernel::{build_gram, KernelColumns, KernelSpec};
use crate::model::{recover_bias, BiasMethod};
use crate::smo::select_full;

const BISECTION_STEPS: usize = 200;
const BISECTION_REL: f64 = 1e-14;

/// Euclidean projection of `v` onto `{u : 0 <= u_i <= c_i, sum s_i u_i = 0}`.
///
/// Each coordinate is `clip(v_i - lambda s_i, 0, c_i)`; `lambda` is found by
/// bisection and then refined by solving the hyperplane equation on the
/// unclipped coordinates.
pub fn project_box_hyperplane(v: &[f64], upper: &[f64], sign: &[f64]) -> Result<Vec<f64>> {
    let m = v.len();
    if upper.len() != m || sign.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: upper.len().min(sign.len()),
        });
    }
    if let Some(i) = upper.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidInput(format!("upper bound {i} is {}", upper[i])));
    }
    if let Some(i) = sign.iter().position(|&s| s != 1.0 && s != -1.0) {
        return Err(Error::InvalidInput(format!("sign {i} is {}, expected +-1", sign[i])));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let at = |lambda: f64, i: usize| (v[i] - lambda * sign[i]).clamp(0.0, upper[i]);
    let residual = |lambda: f64| (0..m).map(|i| sign[i] * at(lambda, i)).sum::<f64>();

    let c_max = upper.iter().cloned().fold(0.0, f64::max);
    let v_max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let reach = v_max + c_max + 1.0;
    let (mut lo, mut hi) = (-reach, reach);
    // residual is non-increasing in lambda.
    if residual(lo) < 0.0 || residual(hi) > 0.0 {
        return Err(Error::Contract("projection bracket does not contain a root".into()));
    }
    for _ in 0..BISECTION_STEPS {
        if hi - lo <= BISECTION_REL * c_max {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let mut u: Vec<f64> = (0..m).map(|i| at(lambda, i)).collect();

    let free: Vec<usize> = (0..m)
        .filter(|&i| {
            let w = v[i] - lambda * sign[i];
            w > 0.0 && w < upper[i]
        })
        .collect();
    if !free.is_empty() {
        let clipped: f64 = (0..m)
            .filter(|i| free.binary_search(i).is_err())
            .map(|i| sign[i] * u[i])
            .sum();
        let free_part: f64 = free.iter().map(|&i| sign[i] * v[i]).sum();
        let exact = (free_part + clipped) / free.len() as f64;
        let refined: Vec<f64> = free.iter().map(|&i| v[i] - exact * sign[i]).collect();
        if free.iter().zip(&refined).all(|(&i, &w)| (0.0..=upper[i]).contains(&w)) {
            for (&i, w) in free.iter().zip(refined) {
                u[i] = w;
            }
        }
    }
    Ok(u)
}

/// Symmetric linear map `u -> Pu` on `R^m`.
pub trait QpOperator {
    fn dim(&self) -> usize;
    fn apply(&self, u: &[f64], out: &mut [f64]);
}

/// `P = [O, -O; -O, O]` applied through `beta = alpha - alpha_star`.
pub struct DualOperator<'a, G: KernelColumns + ?Sized> {
    gram: &'a G,
}

impl<'a, G: KernelColumns + ?Sized> DualOperator<'a, G> {
    pub fn new(gram: &'a G) -> Self {
        DualOperator { gram }
    }
}

impl<G: KernelColumns + ?Sized> QpOperator for DualOperator<'_, G> {
    fn dim(&self) -> usize {
        2 * self.gram.len()
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.gram.len();
        let (top, bottom) = out.split_at_mut(n);
        top.fill(0.0);
        for i in 0..n {
            let beta = u[i] - u[n + i];
            if beta == 0.0 {
                continue;
            }
            for (t, &o) in top.iter_mut().zip(self.gram.column(i)) {
                *t += o * beta;
            }
        }
        for (b, t) in bottom.iter_mut().zip(top.iter()) {
            *b = -*t;
        }
    }
}

/// Explicit row-major `m x m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    m: usize,
    entries: Vec<f64>,
}

impl DenseOperator {
    pub fn new(entries: Vec<f64>, m: usize) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                found: entries.len(),
            });
        }
        Ok(DenseOperator { m, entries })
    }

    /// `scale * [K, -K; -K, K]` for an `n x n` matrix `K`.
    pub fn block(k: &dyn KernelColumns, scale: f64) -> Self {
        let n = k.len();
        let m = 2 * n;
        let mut entries = vec![0.0; m * m];
        for r in 0..n {
            for c in 0..n {
                let v = scale * k.entry(r, c);
                entries[r * m + c] = v;
                entries[r * m + n + c] = -v;
                entries[(n + r) * m + c] = -v;
                entries[(n + r) * m + n + c] = v;
            }
        }
        DenseOperator { m, entries }
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.m + c]
    }
}

impl QpOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.m
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (row, o) in self.entries.chunks_exact(self.m).zip(out.iter_mut()) {
            *o = row.iter().zip(u).map(|(a, b)| a * b).sum();
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Estimate of the largest `|eigenvalue|` of `op` after `iters` power steps.
pub fn power_iteration<O: QpOperator + ?Sized>(op: &O, iters: usize) -> f64 {
    let m = op.dim();
    if m == 0 {
        return 0.0;
    }
    // Hashed start, so the two halves of a block operator never coincide.
    let mut v: Vec<f64> = (0..m as u64)
        .map(|i| 0.5 + ((i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64 * 2f64.powi(-53))
        .collect();
    let mut w = vec![0.0; m];
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let nv = norm(&v);
        if nv == 0.0 {
            return estimate;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        op.apply(&v, &mut w);
        estimate = norm(&w);
        std::mem::swap(&mut v, &mut w);
    }
    estimate
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefOptions {
    /// Target KKT violation relative to `mean(y)`.
    pub tol_ref: f64,
    pub max_iter: usize,
    pub power_iters: usize,
    /// Nesterov momentum with gradient-based restart.
    pub accelerate: bool,
    /// Iterations between KKT evaluations.
    pub check_every: usize,
}

impl Default for RefOptions {
    fn default() -> Self {
        RefOptions {
            tol_ref: 1e-6,
            max_iter: 1_000_000,
            power_iters: 30,
            accelerate: true,
            check_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefSolution {
    /// `[alpha; alpha_star]`.
    pub u: Vec<f64>,
    pub objective: f64,
    /// Maximal-violating-pair violation over all variables.
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Effective gradient at `u`.
    pub tau: Vec<f64>,
    pub bias: f64,
    pub bias_method: BiasMethod,
    /// Training-set predictions `F_k + b`.
    pub predictions: Vec<f64>,
    pub threshold: f64,
    pub lipschitz: f64,
    /// Objective at each KKT evaluation, in iteration order.
    pub objective_trace: Vec<f64>,
}

impl RefSolution {
    pub fn n(&self) -> usize {
        self.u.len() / 2
    }

    pub fn alpha(&self) -> &[f64] {
        &self.u[..self.n()]
    }

    pub fn alpha_star(&self) -> &[f64] {
        &self.u[self.n()..]
    }

    pub fn beta(&self) -> Vec<f64> {
        self.alpha()
            .iter()
            .zip(self.alpha_star())
            .map(|(a, s)| a - s)
            .collect()
    }
}

struct Problem<'y> {
    y: &'y [f64],
    e: f64,
    q: Vec<f64>,
    upper: Vec<f64>,
    sign: Vec<f64>,
    bounds: Bounds,
}

impl<'y> Problem<'y> {
    fn new(y: &'y [f64], hp: &Hyperparams) -> Result<Self> {
        let n = y.len();
        let bounds = make_bounds(y, hp.c)?;
        let e = hp.epsilon_pct / 100.0;
        let mut q = Vec::with_capacity(2 * n);
        q.extend(y.iter().map(|v| v * (e - 1.0)));
        q.extend(y.iter().map(|v| v * (e + 1.0)));
        let upper = [bounds.as_slice(), bounds.as_slice()].concat();
        let sign = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
        Ok(Problem {
            y,
            e,
            q,
            upper,
            sign,
            bounds,
        })
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    /// `tau_i = -s_i (Pu + q)_i` from a precomputed `Pu`.
    fn tau(&self, pu: &[f64]) -> Vec<f64> {
        pu.iter()
            .zip(&self.q)
            .zip(&self.sign)
            .map(|((p, q), s)| -s * (p + q))
            .collect()
    }

    fn state(&self, u: &[f64], tau: Vec<f64>) -> DualState {
        let n = self.n();
        DualState {
            alpha: u[..n].to_vec(),
            alpha_star: u[n..].to_vec(),
            tau,
            active: vec![true; n],
            counter: vec![0; n],
            iter: 0,
        }
    }

    fn violation(&self, state: &DualState) -> f64 {
        select_full(state, &self.bounds).map_or(f64::NEG_INFINITY, |ws| ws.delta)
    }

    fn objective(&self, u: &[f64], pu: &[f64]) -> f64 {
        u.iter()
            .zip(pu)
            .zip(&self.q)
            .map(|((u, p), q)| u * (0.5 * p + q))
            .sum()
    }
}

/// Projected-gradient solve of the dual defined by `op`, targets `y` and `hp`
/// (only `c` and `epsilon_pct` are read).
pub fn solve_qp<O: QpOperator + ?Sized>(
    op: &O,
    y: &[f64],
    hp: &Hyperparams,
    opts: &RefOptions,
) -> Result<RefSolution> {
    hp.validate()?;
    if !(opts.tol_ref > 0.0) || opts.check_every == 0 {
        return Err(Error::InvalidInput("reference tolerance and check interval must be positive".into()));
    }
    let prob = Problem::new(y, hp)?;
    let n = prob.n();
    let m = 2 * n;
    if op.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: op.dim(),
        });
    }
    let threshold = opts.tol_ref * mean(y);
    let lipschitz = power_iteration(op, opts.power_iters);
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let mut x = vec![0.0; m];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut pu = vec![0.0; m];
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut iterations = 0;
    let mut trial = vec![0.0; m];
    let mut objective_trace = Vec::new();

    loop {
        if iterations % opts.check_every == 0 || iterations == opts.max_iter {
            op.apply(&x, &mut pu);
            objective_trace.push(prob.objective(&x, &pu));
            let viol = prob.violation(&prob.state(&x, prob.tau(&pu)));
            if best.as_ref().is_none_or(|(b, _, _)| viol < *b) {
                best = Some((viol, x.clone(), iterations));
            }
            if viol <= threshold || iterations >= opts.max_iter {
                break;
            }
        }
        op.apply(&z, &mut pu);
        for i in 0..m {
            trial[i] = z[i] - step * (pu[i] + prob.q[i]);
        }
        let next = project_box_hyperplane(&trial, &prob.upper, &prob.sign)?;
        iterations += 1;
        if opts.accelerate {
            // Restart when the momentum direction opposes the gradient step.
            let restart: f64 = (0..m).map(|i| (z[i] - next[i]) * (next[i] - x[i])).sum();
            if restart > 0.0 {
                t = 1.0;
                z.copy_from_slice(&next);
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let w = (t - 1.0) / t_next;
                for i in 0..m {
                    z[i] = next[i] + w * (next[i] - x[i]);
                }
                t = t_next;
            }
        } else {
            z.copy_from_slice(&next);
        }
        x = next;
    }

    let (kkt_violation, u, _) = best.expect("at least one KKT evaluation");
    op.apply(&u, &mut pu);
    let tau = prob.tau(&pu);
    let objective = prob.objective(&u, &pu);
    let state = prob.state(&u, tau);
    let bias = recover_bias(&state, &prob.bounds);
    let predictions = (0..n)
        .map(|k| prob.y[k] * (1.0 - prob.e) - state.tau[k] + bias.bias)
        .collect();
    Ok(RefSolution {
        converged: kkt_violation <= threshold,
        u,
        objective,
        kkt_violation,
        iterations,
        tau: state.tau,
        bias: bias.bias,
        bias_method: bias.method,
        predictions,
        threshold,
        lipschitz,
        objective_trace,
    })
}

/// Reference solve over a precomputed Gram matrix.
pub fn solve_reference_gram<G: KernelColumns + ?Sized>(
    gram: &G,
    y: &[f64],
    hp: &Hyperparams,
    opts: &RefOptions,
) -> Result<RefSolution> {
    solve_qp(&DualOperator::new(gram), y, hp, opts)
}

/// Builds the Gram matrix for `spec` and runs the reference solver with
/// default options at tolerance `tol_ref`.
pub fn solve_reference(
    train: &TrainingSet,
    spec: &KernelSpec,
    hp: &Hyperparams,
    tol_ref: f64,
) -> Result<RefSolution> {
    let gram = build_gram(train.x(), spec)?;
    let opts = RefOptions {
        tol_ref,
        ..RefOptions::default()
    };
    solve_reference_gram(&gram, train.y(), hp, &opts)
}
