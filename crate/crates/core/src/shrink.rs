//! Shrinking: freezing training points whose variables are predicted to stay
//! at a bound, and the reconstruction that verifies the prediction.
//!
//! The freezing unit is the training point. A point is frozen only when both
//! `alpha_k` and `alpha_star_k` sit at a bound and each satisfies its
//! criterion relative to the current interval `[tau_{j*}, tau_{i*}]`:
//!
//! | variable state        | freeze if                 |
//! |-----------------------|---------------------------|
//! | `alpha_k = 0`         | `tau_k < tau_{j*}`        |
//! | `alpha_k = c_k`       | `tau_k > tau_{i*}`        |
//! | `alpha_star_k = 0`    | `tau_{N+k} > tau_{i*}`    |
//! | `alpha_star_k = c_k`  | `tau_{N+k} < tau_{j*}`    |

use crate::dualprob::{full_gradient, mean, Bounds, DualState, Hyperparams};
use crate::kernel::KernelColumns;
use crate::smo::select_full;

/// Position of a variable relative to its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundState {
    Lower,
    Upper,
    Free,
}

fn bound_state(value: f64, upper: f64) -> BoundState {
    if value == 0.0 {
        BoundState::Lower
    } else if value == upper {
        BoundState::Upper
    } else {
        BoundState::Free
    }
}

/// Criterion for an `alpha` variable at `bound`.
pub fn alpha_criterion(bound: BoundState, tau_alpha: f64, tau_up: f64, tau_down: f64) -> bool {
    match bound {
        BoundState::Lower => tau_alpha < tau_down,
        BoundState::Upper => tau_alpha > tau_up,
        BoundState::Free => false,
    }
}

/// Criterion for an `alpha_star` variable at `bound`, in terms of its own `tau`.
pub fn alpha_star_criterion(bound: BoundState, tau_star: f64, tau_up: f64, tau_down: f64) -> bool {
    match bound {
        BoundState::Lower => tau_star > tau_up,
        BoundState::Upper => tau_star < tau_down,
        BoundState::Free => false,
    }
}

/// The `alpha_star` criterion rewritten against the paired `alpha` score,
/// using `tau_{N+k} = tau_k + gap` with `gap = 2 y_k eps / 100`.
///
/// At the lower bound the threshold drops to `tau_{i*} - gap` (easier to
/// freeze); at the upper bound it drops to `tau_{j*} - gap` (harder).
pub fn alpha_star_criterion_paired(
    bound: BoundState,
    tau_alpha: f64,
    gap: f64,
    tau_up: f64,
    tau_down: f64,
) -> bool {
    match bound {
        BoundState::Lower => tau_alpha > tau_up - gap,
        BoundState::Upper => tau_alpha < tau_down - gap,
        BoundState::Free => false,
    }
}

/// Whether point `k` qualifies for freezing at this check.
pub fn shrink_criteria(
    state: &DualState,
    bounds: &Bounds,
    tau_istar: f64,
    tau_jstar: f64,
    k: usize,
) -> bool {
    let n = state.n();
    let c = bounds.upper(k);
    let a = bound_state(state.alpha[k], c);
    let s = bound_state(state.alpha_star[k], c);
    if a == BoundState::Free || s == BoundState::Free {
        return false;
    }
    alpha_criterion(a, state.tau[k], tau_istar, tau_jstar)
        && alpha_star_criterion(s, state.tau[n + k], tau_istar, tau_jstar)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShrinkReport {
    pub frozen_this_check: Vec<usize>,
    pub active_count_after: usize,
}

/// One shrinking check over the active points.
///
/// Points listed in `protected` (the current working set) are never frozen.
pub fn shrink_pass(
    state: &mut DualState,
    bounds: &Bounds,
    tau_istar: f64,
    tau_jstar: f64,
    n_freeze: usize,
    protected: &[usize],
) -> ShrinkReport {
    let mut frozen = Vec::new();
    for k in 0..state.n() {
        if !state.active[k] {
            continue;
        }
        if shrink_criteria(state, bounds, tau_istar, tau_jstar, k) {
            state.counter[k] += 1;
        } else {
            state.counter[k] = 0;
        }
        if state.counter[k] >= n_freeze && !protected.contains(&k) {
            state.active[k] = false;
            frozen.push(k);
        }
    }
    ShrinkReport {
        frozen_this_check: frozen,
        active_count_after: state.active_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    /// KKT violation over all `2N` variables after reconstruction.
    pub delta_full: f64,
    /// The full violation exceeded the threshold; all points were reactivated.
    pub reset: bool,
    /// Number of points that were frozen before the reset.
    pub reactivated: usize,
}

/// Recomputes `tau` from `(alpha, alpha_star)` and checks the full KKT
/// violation against `tol * mean(y)`.
pub fn reconstruct_and_verify<G: KernelColumns + ?Sized>(
    state: &mut DualState,
    gram: &G,
    y: &[f64],
    hp: &Hyperparams,
    bounds: &Bounds,
) -> Verification {
    state.tau = full_gradient(gram, &state.alpha, &state.alpha_star, y, hp.epsilon_pct);
    let delta_full = select_full(state, bounds).map_or(f64::NEG_INFINITY, |ws| ws.delta);
    let threshold = hp.tol * mean(y);
    let reset = delta_full > threshold;
    let mut reactivated = 0;
    if reset {
        for k in 0..state.n() {
            if !state.active[k] {
                reactivated += 1;
                state.active[k] = true;
            }
            state.counter[k] = 0;
        }
    }
    Verification {
        delta_full,
        reset,
        reactivated,
    }
}
