//! Sequential minimal optimization over the MAPE-SVR dual.
//!
//! Each iteration picks the maximal violating pair
//! `i* = argmax_{I_up} tau_i`, `j* = argmin_{I_down} tau_j` over the active
//! points, moves both variables along the direction that keeps
//! `sum(alpha - alpha_star) = 0`, and updates `tau` from two kernel columns.
//! The per-point bounds `c_k` enter only through set membership and the
//! feasible room; curvature and the gradient update never see them.

use std::fmt;

use crate::dualprob::{
    init_state, is_alpha, kernel_expansion, make_bounds, mean, point_of, Bounds, DualState,
    Hyperparams, TrainingSet,
};
use crate::error::{Error, Result};
use crate::kernel::{build_gram, KernelColumns, KernelSpec};
use crate::model::{recover_bias, BiasMethod};
use crate::shrink::{reconstruct_and_verify, shrink_pass};

/// Relative distance to a bound under which a variable is placed exactly on it.
const SNAP_REL: f64 = 1e-12;
/// Consecutive rejected pairs tolerated before the solve is aborted.
const MAX_REJECTIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkingSet {
    pub i_star: usize,
    pub j_star: usize,
    /// KKT violation `tau_{i*} - tau_{j*}`.
    pub delta: f64,
}

/// Maximal violating pair over the given points, `alpha` side scanned before
/// `alpha_star` side so ties go to the lowest dual index.
fn select_among<I>(state: &DualState, bounds: &Bounds, points: I) -> Option<WorkingSet>
where
    I: Iterator<Item = usize> + Clone,
{
    let n = state.n();
    let mut up: Option<(usize, f64)> = None;
    let mut down: Option<(usize, f64)> = None;
    let dual = points.clone().chain(points.map(|k| n + k));
    for i in dual {
        let t = state.tau[i];
        if state.in_up(i, bounds) && up.is_none_or(|(_, best)| t > best) {
            up = Some((i, t));
        }
        if state.in_down(i, bounds) && down.is_none_or(|(_, best)| t < best) {
            down = Some((i, t));
        }
    }
    let ((i_star, ti), (j_star, tj)) = (up?, down?);
    Some(WorkingSet {
        i_star,
        j_star,
        delta: ti - tj,
    })
}

/// Working-set selection restricted to active points.
pub fn select_working_set(state: &DualState, bounds: &Bounds) -> Option<WorkingSet> {
    let active = &state.active;
    select_among(state, bounds, (0..state.n()).filter(|&k| active[k]))
}

/// Working-set selection over all `2N` variables, ignoring the active set.
pub fn select_full(state: &DualState, bounds: &Bounds) -> Option<WorkingSet> {
    select_among(state, bounds, 0..state.n())
}

/// `O_pp - 2 O_pq + O_qq`, independent of the variable types of the pair.
pub fn curvature<G: KernelColumns + ?Sized>(gram: &G, p: usize, q: usize) -> f64 {
    let pq = gram.entry(p, q);
    (gram.entry(p, p) - pq) + (gram.entry(q, q) - pq)
}

/// Room `(r_i, r_j)` each selected variable has along the update direction.
pub fn feasible_room(state: &DualState, bounds: &Bounds, ws: &WorkingSet) -> Result<(f64, f64)> {
    let n = state.n();
    let p = point_of(ws.i_star, n);
    let q = point_of(ws.j_star, n);
    let r_i = if is_alpha(ws.i_star, n) {
        bounds.upper(p) - state.alpha[p]
    } else {
        state.alpha_star[p]
    };
    let r_j = if is_alpha(ws.j_star, n) {
        state.alpha[q]
    } else {
        bounds.upper(q) - state.alpha_star[q]
    };
    if !(r_i > 0.0 && r_j > 0.0) {
        return Err(Error::Invariant {
            iter: state.iter,
            i_star: ws.i_star,
            j_star: ws.j_star,
            detail: format!("non-positive feasible room ({r_i}, {r_j})"),
        });
    }
    Ok((r_i, r_j))
}

/// Step length along the pair direction and whether it decreases the objective.
///
/// With positive curvature the unconstrained minimizer `delta / eta` is
/// clipped to `delta_max`. Otherwise the step goes to `delta_max` and is
/// accepted only if `delta > eta * delta_max / 2`.
pub fn compute_step(delta: f64, eta: f64, delta_max: f64) -> (f64, bool) {
    if eta > 0.0 {
        ((delta / eta).min(delta_max), true)
    } else {
        (delta_max, delta > 0.5 * eta * delta_max)
    }
}

fn snap(v: f64, upper: f64) -> f64 {
    let band = SNAP_REL * upper;
    if v.abs() <= band {
        0.0
    } else if (v - upper).abs() <= band {
        upper
    } else {
        v
    }
}

/// Moves `u_{i*}` by `+s_{i*} step` and `u_{j*}` by `-s_{j*} step`.
pub fn apply_step(state: &mut DualState, ws: &WorkingSet, step: f64, bounds: &Bounds) -> Result<()> {
    let n = state.n();
    let p = point_of(ws.i_star, n);
    let q = point_of(ws.j_star, n);
    let cp = bounds.upper(p);
    let cq = bounds.upper(q);
    let slot_i = if is_alpha(ws.i_star, n) {
        state.alpha[p] = snap(state.alpha[p] + step, cp);
        state.alpha[p]
    } else {
        state.alpha_star[p] = snap(state.alpha_star[p] - step, cp);
        state.alpha_star[p]
    };
    let slot_j = if is_alpha(ws.j_star, n) {
        state.alpha[q] = snap(state.alpha[q] - step, cq);
        state.alpha[q]
    } else {
        state.alpha_star[q] = snap(state.alpha_star[q] + step, cq);
        state.alpha_star[q]
    };
    for (v, c) in [(slot_i, cp), (slot_j, cq)] {
        if !(0.0..=c).contains(&v) {
            return Err(Error::Invariant {
                iter: state.iter,
                i_star: ws.i_star,
                j_star: ws.j_star,
                detail: format!("variable {v} left its box [0, {c}] after step {step}"),
            });
        }
    }
    Ok(())
}

fn update_points<G, I>(state: &mut DualState, gram: &G, p: usize, q: usize, step: f64, points: I)
where
    G: KernelColumns + ?Sized,
    I: Iterator<Item = usize>,
{
    let n = state.n();
    let col_p = gram.column(p);
    let col_q = gram.column(q);
    for m in points {
        let d = step * (col_p[m] - col_q[m]);
        state.tau[m] -= d;
        state.tau[n + m] -= d;
    }
}

/// `tau_l -= step (O_{k(l),p} - O_{k(l),q})` for both variables of every
/// active point. Frozen points are left stale.
pub fn update_gradient<G: KernelColumns + ?Sized>(
    state: &mut DualState,
    gram: &G,
    p: usize,
    q: usize,
    step: f64,
) {
    let active: Vec<usize> = (0..state.n()).filter(|&k| state.active[k]).collect();
    update_points(state, gram, p, q, step, active.into_iter());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterReached,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIterReached => "max_iter_reached",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Step,
    /// Pair skipped because the boundary step would not decrease the objective.
    Reject,
    Shrink,
    Unshrink,
    Converge,
}

impl TraceEvent {
    pub fn token(self) -> &'static str {
        match self {
            TraceEvent::Step => "step",
            TraceEvent::Reject => "reject",
            TraceEvent::Shrink => "shrink",
            TraceEvent::Unshrink => "unshrink",
            TraceEvent::Converge => "converge",
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub delta: f64,
    pub active_count: usize,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveWarning {
    /// No free support vector; the bias is the midpoint of the KKT interval.
    /// Usually means `C` is too small or `epsilon` too large for the data.
    NoFreeSupportVectors,
    MaxIterReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    pub bias_method: BiasMethod,
    pub status: Status,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
    /// Reconstructed effective gradient at exit.
    pub tau: Vec<f64>,
    /// KKT violation over all variables at exit.
    pub delta_full: f64,
    /// `F_k = sum_i O_ki beta_i` at exit.
    pub expansion: Vec<f64>,
    /// Absolute stopping threshold `tol * mean(y)`.
    pub threshold: f64,
    pub warnings: Vec<SolveWarning>,
}

impl SolveResult {
    pub fn beta(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.alpha_star)
            .map(|(a, s)| a - s)
            .collect()
    }

    /// Training-set predictions `F_k + b`.
    pub fn train_predictions(&self) -> Vec<f64> {
        self.expansion.iter().map(|f| f + self.bias).collect()
    }

    pub fn unshrink_count(&self) -> usize {
        self.trace
            .iter()
            .filter(|r| r.event == TraceEvent::Unshrink)
            .count()
    }
}

/// Outcome of one loop pass of [`Smo::advance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Stepped,
    Rejected,
    /// Active-set convergence was refuted by reconstruction; all points are active again.
    Reset,
    Converged,
    BudgetExhausted,
}

/// Incremental SMO driver. [`solve`] runs it to completion; tests step it.
pub struct Smo<'a, G: KernelColumns + ?Sized> {
    gram: &'a G,
    y: &'a [f64],
    hp: Hyperparams,
    bounds: Bounds,
    state: DualState,
    threshold: f64,
    n_check: usize,
    active_list: Vec<usize>,
    trace: Vec<TraceRecord>,
    rejections: usize,
    check_invariants: bool,
    outcome: Option<Status>,
    delta_full: Option<f64>,
}

impl<'a, G: KernelColumns + ?Sized> Smo<'a, G> {
    pub fn new(gram: &'a G, y: &'a [f64], hp: &Hyperparams) -> Result<Self> {
        hp.validate()?;
        if gram.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: gram.len(),
                found: y.len(),
            });
        }
        let bounds = make_bounds(y, hp.c)?;
        let state = init_state(y, hp.epsilon_pct)?;
        let n = y.len();
        Ok(Smo {
            gram,
            y,
            threshold: hp.tol * mean(y),
            n_check: hp.n_check_for(n),
            hp: hp.clone(),
            bounds,
            state,
            active_list: (0..n).collect(),
            trace: Vec::new(),
            rejections: 0,
            check_invariants: cfg!(debug_assertions),
            outcome: None,
            delta_full: None,
        })
    }

    /// Verify box and equality feasibility after every iteration.
    pub fn check_invariants(mut self, on: bool) -> Self {
        self.check_invariants = on;
        self
    }

    pub fn state(&self) -> &DualState {
        &self.state
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    fn rebuild_active_list(&mut self) {
        let active = &self.state.active;
        self.active_list = (0..active.len()).filter(|&k| active[k]).collect();
    }

    fn record(&mut self, iter: usize, delta: f64, event: TraceEvent) {
        self.trace.push(TraceRecord {
            iter,
            delta,
            active_count: self.active_list.len(),
            event,
        });
    }

    fn invariant(&self, ws: &WorkingSet, detail: String) -> Error {
        Error::Invariant {
            iter: self.state.iter,
            i_star: ws.i_star,
            j_star: ws.j_star,
            detail,
        }
    }

    fn verify_feasibility(&self, ws: &WorkingSet) -> Result<()> {
        for k in 0..self.state.n() {
            let c = self.bounds.upper(k);
            let (a, s) = (self.state.alpha[k], self.state.alpha_star[k]);
            if !((0.0..=c).contains(&a) && (0.0..=c).contains(&s)) {
                return Err(self.invariant(ws, format!("point {k} out of box: ({a}, {s}) vs {c}")));
            }
        }
        let residual = self.state.equality_residual();
        let limit = 1e-10 * self.state.n() as f64 * self.bounds.max();
        if residual > limit {
            return Err(self.invariant(ws, format!("equality residual {residual} exceeds {limit}")));
        }
        Ok(())
    }

    /// Runs one pass of the main loop.
    pub fn advance(&mut self) -> Result<Progress> {
        match self.outcome {
            Some(Status::Converged) => return Ok(Progress::Converged),
            Some(Status::MaxIterReached) => return Ok(Progress::BudgetExhausted),
            None => {}
        }
        let ws = select_among(&self.state, &self.bounds, self.active_list.iter().copied());
        let ws = match ws {
            Some(ws) if ws.delta > self.threshold => ws,
            _ => return Ok(self.verify_convergence()),
        };
        if self.state.iter >= self.hp.max_iter {
            self.outcome = Some(Status::MaxIterReached);
            return Ok(Progress::BudgetExhausted);
        }

        let n = self.state.n();
        let p = point_of(ws.i_star, n);
        let q = point_of(ws.j_star, n);
        debug_assert!(ws.i_star != ws.j_star);
        let tau_up = self.state.tau[ws.i_star];
        let tau_down = self.state.tau[ws.j_star];

        let eta = curvature(self.gram, p, q);
        let (r_i, r_j) = feasible_room(&self.state, &self.bounds, &ws)?;
        let (step, accept) = compute_step(ws.delta, eta, r_i.min(r_j));

        let t = self.state.iter + 1;
        let progress = if accept {
            let change = -ws.delta * step + 0.5 * eta * step * step;
            if self.check_invariants && !(change < 0.0) {
                return Err(self.invariant(&ws, format!("accepted step changes objective by {change}")));
            }
            apply_step(&mut self.state, &ws, step, &self.bounds)?;
            update_points(&mut self.state, self.gram, p, q, step, self.active_list.iter().copied());
            self.rejections = 0;
            self.record(t, ws.delta, TraceEvent::Step);
            Progress::Stepped
        } else {
            self.rejections += 1;
            self.record(t, ws.delta, TraceEvent::Reject);
            if self.rejections >= MAX_REJECTIONS {
                return Err(self.invariant(
                    &ws,
                    format!("{MAX_REJECTIONS} consecutive pairs rejected (eta = {eta})"),
                ));
            }
            Progress::Rejected
        };
        self.state.iter = t;

        if self.check_invariants {
            self.verify_feasibility(&ws)?;
        }
        if self.hp.shrinking && t.is_multiple_of(self.n_check) {
            let report = shrink_pass(
                &mut self.state,
                &self.bounds,
                tau_up,
                tau_down,
                self.hp.n_freeze,
                &[p, q],
            );
            if !report.frozen_this_check.is_empty() {
                self.rebuild_active_list();
                self.record(t, ws.delta, TraceEvent::Shrink);
            }
        }
        Ok(progress)
    }

    fn verify_convergence(&mut self) -> Progress {
        let v = reconstruct_and_verify(&mut self.state, self.gram, self.y, &self.hp, &self.bounds);
        self.delta_full = Some(v.delta_full);
        if v.reset {
            self.rebuild_active_list();
            if v.reactivated > 0 {
                self.record(self.state.iter, v.delta_full, TraceEvent::Unshrink);
            }
            Progress::Reset
        } else {
            self.outcome = Some(Status::Converged);
            self.record(self.state.iter, v.delta_full, TraceEvent::Converge);
            Progress::Converged
        }
    }

    /// Runs until convergence or the iteration budget is spent.
    pub fn run(mut self) -> Result<SolveResult> {
        loop {
            match self.advance()? {
                Progress::Converged | Progress::BudgetExhausted => break,
                _ => {}
            }
        }
        Ok(self.finish())
    }

    /// Reconstructs `tau` if needed and recovers the bias.
    pub fn finish(mut self) -> SolveResult {
        let status = self.outcome.unwrap_or(Status::MaxIterReached);
        let delta_full = match (status, self.delta_full) {
            (Status::Converged, Some(d)) => d,
            _ => {
                let v = reconstruct_and_verify(
                    &mut self.state,
                    self.gram,
                    self.y,
                    &self.hp,
                    &self.bounds,
                );
                v.delta_full
            }
        };
        let bias = recover_bias(&self.state, &self.bounds);
        let mut warnings = Vec::new();
        if bias.method == BiasMethod::Midpoint {
            warnings.push(SolveWarning::NoFreeSupportVectors);
        }
        if status == Status::MaxIterReached {
            warnings.push(SolveWarning::MaxIterReached);
        }
        let expansion = kernel_expansion(self.gram, &self.state.alpha, &self.state.alpha_star);
        SolveResult {
            iterations: self.state.iter,
            alpha: self.state.alpha,
            alpha_star: self.state.alpha_star,
            bias: bias.bias,
            bias_method: bias.method,
            status,
            trace: self.trace,
            tau: self.state.tau,
            delta_full,
            expansion,
            threshold: self.threshold,
            warnings,
        }
    }
}

/// Solves over a precomputed Gram matrix.
pub fn solve_gram<G: KernelColumns + ?Sized>(
    gram: &G,
    y: &[f64],
    hp: &Hyperparams,
) -> Result<SolveResult> {
    Smo::new(gram, y, hp)?.run()
}

/// Builds the Gram matrix for `spec` and trains.
pub fn solve(train: &TrainingSet, spec: &KernelSpec, hp: &Hyperparams) -> Result<SolveResult> {
    hp.validate()?;
    let gram = build_gram(train.x(), spec)?;
    solve_gram(&gram, train.y(), hp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualprob::{dual_objective, full_gradient, make_bounds};
    use crate::kernel::{Features, KernelGram, Symmetry};

    fn gram(rows: &[Vec<f64>], gamma: f64) -> KernelGram {
        build_gram(&Features::from_rows(rows).unwrap(), &KernelSpec::rbf(gamma).unwrap()).unwrap()
    }

    /// Brute-force enumeration of the candidate sets.
    fn brute_force_pair(state: &DualState, bounds: &Bounds) -> Option<WorkingSet> {
        let n = state.n();
        let mut up = Vec::new();
        let mut down = Vec::new();
        for k in 0..n {
            if !state.active[k] {
                continue;
            }
            let c = bounds.upper(k);
            if state.alpha[k] < c {
                up.push(k);
            }
            if state.alpha_star[k] > 0.0 {
                up.push(n + k);
            }
            if state.alpha[k] > 0.0 {
                down.push(k);
            }
            if state.alpha_star[k] < c {
                down.push(n + k);
            }
        }
        let best = |set: &[usize], better: fn(f64, f64) -> bool| {
            let mut set = set.to_vec();
            set.sort_unstable();
            set.into_iter()
                .fold(None, |acc: Option<usize>, i| match acc {
                    Some(b) if !better(state.tau[i], state.tau[b]) => Some(b),
                    _ => Some(i),
                })
        };
        let i = best(&up, |a, b| a > b)?;
        let j = best(&down, |a, b| a < b)?;
        Some(WorkingSet {
            i_star: i,
            j_star: j,
            delta: state.tau[i] - state.tau[j],
        })
    }

    #[test]
    fn selection_at_init() {
        let y = [1.0, 2.0];
        let s = init_state(&y, 5.0).unwrap();
        let b = make_bounds(&y, 1.0).unwrap();
        let ws = select_working_set(&s, &b).unwrap();
        assert_eq!(ws.i_star, 1);
        assert_eq!(ws.j_star, 2);
        assert!((ws.delta - 0.85).abs() < 1e-14);
    }

    #[test]
    fn selection_single_point_is_negative() {
        let y = [3.0];
        let s = init_state(&y, 10.0).unwrap();
        let b = make_bounds(&y, 1.0).unwrap();
        let ws = select_working_set(&s, &b).unwrap();
        assert_eq!((ws.i_star, ws.j_star), (0, 1));
        assert!((ws.delta + 0.6).abs() < 1e-14);
    }

    #[test]
    fn selection_matches_enumeration() {
        let y = [1.0, 0.5, 2.0, 4.0];
        let b = make_bounds(&y, 1.0).unwrap();
        let mut s = init_state(&y, 5.0).unwrap();
        // alpha_0 at its bound drops index 0 from I_up.
        s.alpha[0] = b.upper(0);
        s.alpha_star[1] = 30.0;
        s.alpha_star[3] = b.upper(3);
        s.alpha[2] = 10.0;
        s.tau = vec![9.0, 0.3, 0.7, 0.7, 0.2, -1.0, 0.7, 0.1];
        let ws = select_working_set(&s, &b).unwrap();
        assert_eq!(Some(ws), brute_force_pair(&s, &b));
        assert_ne!(ws.i_star, 0);
        // tie at 0.7 between indices 2 and 3 goes to the lowest.
        assert_eq!(ws.i_star, 2);
        s.active[2] = false;
        let ws = select_working_set(&s, &b).unwrap();
        assert_eq!(Some(ws), brute_force_pair(&s, &b));
    }

    #[test]
    fn curvature_examples() {
        let g = gram(&[vec![0.0], vec![std::f64::consts::LN_2.sqrt()]], 1.0);
        assert_eq!(curvature(&g, 1, 1), 0.0);
        assert!((curvature(&g, 0, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn room_cases_from_pair_table() {
        let y = [100.0, 50.0];
        let b = make_bounds(&y, 1.0).unwrap(); // c = (1, 2)
        let mut s = init_state(&y, 5.0).unwrap();
        // case 2: alpha_p up, alpha_star_q down.
        s.alpha[0] = 0.2;
        s.alpha_star[1] = 0.9;
        let (ri, rj) = feasible_room(&s, &b, &WorkingSet { i_star: 0, j_star: 3, delta: 1.0 }).unwrap();
        assert!(((ri.min(rj)) - 0.8).abs() < 1e-15);
        // case 3: alpha_star_p up, alpha_q down.
        let mut s = init_state(&y, 5.0).unwrap();
        s.alpha_star[0] = 0.4;
        s.alpha[1] = 0.1;
        let (ri, rj) = feasible_room(&s, &b, &WorkingSet { i_star: 2, j_star: 1, delta: 1.0 }).unwrap();
        assert_eq!(ri.min(rj), 0.1);
        // fresh init, case 2
        let s = init_state(&y, 5.0).unwrap();
        let (ri, rj) = feasible_room(&s, &b, &WorkingSet { i_star: 0, j_star: 3, delta: 1.0 }).unwrap();
        assert_eq!(ri.min(rj), 1.0);
    }

    #[test]
    fn room_rejects_degenerate_pair() {
        let y = [1.0, 1.0];
        let b = make_bounds(&y, 1.0).unwrap();
        let s = init_state(&y, 5.0).unwrap();
        // alpha_1 = 0 cannot decrease.
        let ws = WorkingSet { i_star: 0, j_star: 1, delta: 1.0 };
        assert!(matches!(feasible_room(&s, &b, &ws), Err(Error::Invariant { .. })));
    }

    #[test]
    fn step_examples() {
        assert_eq!(compute_step(1.0, 2.0, 10.0), (0.5, true));
        assert_eq!(compute_step(1.0, 2.0, 0.3), (0.3, true));
        assert_eq!(compute_step(0.1, -1.0, 0.3), (0.3, true));
        assert_eq!(compute_step(0.1, 0.0, 0.3), (0.3, true));
        assert_eq!(compute_step(-0.1, 0.0, 0.3), (0.3, false));
    }

    #[test]
    fn apply_case_one() {
        let y = [10.0, 10.0];
        let b = make_bounds(&y, 1.0).unwrap();
        let mut s = init_state(&y, 5.0).unwrap();
        s.alpha = vec![0.3, 0.5];
        s.alpha_star = vec![0.4, 0.4];
        let before: f64 = s.beta().iter().sum();
        apply_step(&mut s, &WorkingSet { i_star: 0, j_star: 1, delta: 1.0 }, 0.2, &b).unwrap();
        assert!((s.alpha[0] - 0.5).abs() < 1e-15 && (s.alpha[1] - 0.3).abs() < 1e-15);
        let after: f64 = s.beta().iter().sum();
        assert!((before - after).abs() < 1e-15);
    }

    #[test]
    fn apply_lands_exactly_on_bound() {
        let y = [7.0, 3.0];
        let b = make_bounds(&y, 1.0).unwrap();
        let mut s = init_state(&y, 5.0).unwrap();
        s.alpha[0] = 0.1;
        s.alpha_star[1] = 0.1 + 1e-9;
        let ws = WorkingSet { i_star: 0, j_star: 3, delta: 1.0 };
        let (ri, rj) = feasible_room(&s, &b, &ws).unwrap();
        apply_step(&mut s, &ws, ri.min(rj), &b).unwrap();
        assert_eq!(s.alpha[0], b.upper(0));
    }

    #[test]
    fn apply_case_four_snaps_both() {
        let y = [1.0, 200.0];
        let b = make_bounds(&y, 1.0).unwrap(); // c_q = 0.5
        let mut s = init_state(&y, 5.0).unwrap();
        s.alpha_star = vec![0.4, 0.1];
        s.alpha = vec![0.0, 0.5];
        apply_step(&mut s, &WorkingSet { i_star: 2, j_star: 3, delta: 1.0 }, 0.4, &b).unwrap();
        assert_eq!(s.alpha_star[0], 0.0);
        assert_eq!(s.alpha_star[1], 0.5);
    }

    #[test]
    fn update_same_column_is_noop() {
        let g = gram(&[vec![0.0], vec![1.0], vec![3.0]], 0.4);
        let y = [1.0, 2.0, 3.0];
        let mut s = init_state(&y, 5.0).unwrap();
        let before = s.tau.clone();
        update_gradient(&mut s, &g, 1, 1, 0.7);
        assert_eq!(s.tau, before);
    }

    #[test]
    fn update_after_first_step_matches_full_recompute() {
        let g = gram(&[vec![0.0, 1.0], vec![1.0, 0.3], vec![-0.5, 2.0]], 0.7);
        let y = [1.0, 2.0, 0.5];
        let b = make_bounds(&y, 1.0).unwrap();
        let mut s = init_state(&y, 5.0).unwrap();
        let ws = select_working_set(&s, &b).unwrap();
        let (p, q) = (point_of(ws.i_star, 3), point_of(ws.j_star, 3));
        let (ri, rj) = feasible_room(&s, &b, &ws).unwrap();
        let (step, accept) = compute_step(ws.delta, curvature(&g, p, q), ri.min(rj));
        assert!(accept);
        let gaps: Vec<f64> = (0..3).map(|k| s.tau[3 + k] - s.tau[k]).collect();
        apply_step(&mut s, &ws, step, &b).unwrap();
        update_gradient(&mut s, &g, p, q, step);
        let full = full_gradient(&g, &s.alpha, &s.alpha_star, &y, 5.0);
        for (a, f) in s.tau.iter().zip(&full) {
            assert!((a - f).abs() <= 1e-12);
        }
        for k in 0..3 {
            assert!(((s.tau[3 + k] - s.tau[k]) - gaps[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn single_point_converges_immediately() {
        let x = Features::from_rows(&[vec![0.3, -2.0]]).unwrap();
        let train = TrainingSet::new(x, vec![4.2]).unwrap();
        let r = solve(&train, &KernelSpec::rbf(0.5).unwrap(), &Hyperparams::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.alpha, vec![0.0]);
        assert_eq!(r.alpha_star, vec![0.0]);
        assert_eq!(r.bias_method, BiasMethod::Midpoint);
        assert!((r.bias - 4.2).abs() < 1e-12);
        assert_eq!(r.trace.last().unwrap().event, TraceEvent::Converge);
        assert!(r.warnings.contains(&SolveWarning::NoFreeSupportVectors));
    }

    #[test]
    fn objective_decreases_every_step() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.37).sin() * 2.0, (i as f64 * 0.91).cos()])
            .collect();
        let y: Vec<f64> = (0..12).map(|i| 0.5 + (i as f64 * 1.3).sin().abs() * 3.0).collect();
        let g = gram(&rows, 0.5);
        let hp = Hyperparams { epsilon_pct: 5.0, ..Default::default() };
        let mut smo = Smo::new(&g, &y, &hp).unwrap().check_invariants(true);
        let mut prev = 0.0;
        loop {
            match smo.advance().unwrap() {
                Progress::Stepped => {
                    let s = smo.state();
                    let obj = dual_objective(&g, &s.alpha, &s.alpha_star, &y, 5.0);
                    assert!(obj < prev, "objective rose from {prev} to {obj}");
                    prev = obj;
                }
                Progress::Converged => break,
                Progress::BudgetExhausted => panic!("no convergence"),
                _ => {}
            }
        }
        let r = smo.finish();
        assert_eq!(r.status, Status::Converged);
        assert!(r.delta_full <= r.threshold);
    }

    #[test]
    fn budget_exhaustion_still_returns_result() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1]).collect();
        let y: Vec<f64> = (0..20).map(|i| 1.0 + (i as f64).sqrt()).collect();
        let g = gram(&rows, 1.0);
        let hp = Hyperparams { max_iter: 3, tol: 1e-9, ..Default::default() };
        let r = solve_gram(&g, &y, &hp).unwrap();
        assert_eq!(r.status, Status::MaxIterReached);
        assert_eq!(r.iterations, 3);
        assert!(r.warnings.contains(&SolveWarning::MaxIterReached));
        assert!(r.bias.is_finite());
    }

    #[test]
    fn identical_runs_give_identical_traces() {
        let rows: Vec<Vec<f64>> = (0..15).map(|i| vec![(i % 4) as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = (0..15).map(|i| 1.0 + (i % 5) as f64).collect();
        let x = Features::from_rows(&rows).unwrap();
        let train = TrainingSet::new(x, y).unwrap();
        let spec = KernelSpec::new(0.3, Symmetry::Even).unwrap();
        let a = solve(&train, &spec, &Hyperparams::default()).unwrap();
        let b = solve(&train, &spec, &Hyperparams::default()).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.alpha, b.alpha);
    }
}
