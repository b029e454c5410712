mod common;

use mape_smo::dualprob::make_bounds;
use mape_smo::refqp::{solve_reference_gram, RefOptions};
use mape_smo::shrink::reconstruct_and_verify;
use mape_smo::smo::{select_working_set, Progress, Smo, SolveWarning};
use mape_smo::{
    build_gram, generate, solve, solve_gram, solve_reference, BiasMethod, Features, Hyperparams,
    KernelSpec, Status, SyntheticConfig, TraceEvent, TrainedModel, TrainingSet,
};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn duplicate_pair_alone_has_zero_coefficients() {
    let x = Features::from_rows(&[vec![0.5, -0.2], vec![0.5, -0.2]]).unwrap();
    let train = TrainingSet::new(x, vec![2.0, 2.0]).unwrap();
    let spec = KernelSpec::rbf(0.5).unwrap();
    let hp = Hyperparams::default();
    let res = solve(&train, &spec, &hp).unwrap();
    let beta = res.beta();
    assert_eq!(beta[0], beta[1]);
    assert_eq!(beta, vec![0.0, 0.0]);
    let reference = solve_reference(&train, &spec, &hp, 1e-8).unwrap();
    assert!(reference.converged);
    assert!(reference.beta().iter().all(|b| b.abs() < 1e-9));
}

#[test]
fn duplicate_inside_larger_set() {
    let cfg = SyntheticConfig {
        n: 20,
        ..SyntheticConfig::builtin("C1").unwrap()
    };
    let base = generate(&cfg).unwrap();
    let mut rows: Vec<Vec<f64>> = base.x().iter_rows().map(<[f64]>::to_vec).collect();
    let mut y = base.y().to_vec();
    rows.push(rows[3].clone());
    y.push(y[3]);
    let train = TrainingSet::new(Features::from_rows(&rows).unwrap(), y).unwrap();
    let spec = cfg.spec().unwrap();
    let hp = Hyperparams {
        tol: 1e-8,
        ..cfg.hyperparams()
    };
    let gram = build_gram(train.x(), &spec).unwrap();
    let res = solve_gram(&gram, train.y(), &hp).unwrap();
    let reference = solve_reference_gram(
        &gram,
        train.y(),
        &hp,
        &RefOptions {
            tol_ref: 1e-9,
            ..RefOptions::default()
        },
    )
    .unwrap();
    assert!(reference.converged);
    let (b, r) = (res.beta(), reference.beta());
    let last = b.len() - 1;
    // Only the combined coefficient of the duplicated pair is identified.
    assert!(((b[3] + b[last]) - (r[3] + r[last])).abs() < 1e-5, "{} vs {}", b[3] + b[last], r[3] + r[last]);
    let f = res.train_predictions();
    assert_eq!(f[3].to_bits(), f[last].to_bits());
    assert!(max_diff(&f, &reference.predictions) < 1e-5);
}

#[test]
fn reconstruction_without_shrinking_matches_active_violation() {
    let train = generate(&SyntheticConfig::builtin("C1").unwrap()).unwrap();
    let gram = build_gram(train.x(), &KernelSpec::rbf(0.1).unwrap()).unwrap();
    let hp = Hyperparams {
        shrinking: false,
        ..Hyperparams::default()
    };
    let mut smo = Smo::new(&gram, train.y(), &hp).unwrap();
    for _ in 0..300 {
        smo.advance().unwrap();
    }
    let bounds = make_bounds(train.y(), hp.c).unwrap();
    let mut state = smo.state().clone();
    let active = select_working_set(&state, &bounds).unwrap().delta;
    let v = reconstruct_and_verify(&mut state, &gram, train.y(), &hp, &bounds);
    assert!((v.delta_full - active).abs() <= 1e-12 * active.abs().max(1.0));
    assert_eq!(v.reset, v.delta_full > smo.threshold());
    assert_eq!(v.reactivated, 0);
}

#[test]
fn forced_freezing_resets_and_matches_unshrunk_solution() {
    let cfg = SyntheticConfig::builtin("C5").unwrap();
    let train = generate(&cfg).unwrap();
    let gram = build_gram(train.x(), &cfg.spec().unwrap()).unwrap();
    let tight = Hyperparams {
        tol: 1e-9,
        ..cfg.hyperparams()
    };
    let forced = solve_gram(
        &gram,
        train.y(),
        &Hyperparams {
            n_check: Some(1),
            n_freeze: 1,
            ..tight.clone()
        },
    )
    .unwrap();
    let plain = solve_gram(
        &gram,
        train.y(),
        &Hyperparams {
            shrinking: false,
            ..tight
        },
    )
    .unwrap();
    assert!(forced.unshrink_count() >= 1);
    assert_eq!(forced.status, Status::Converged);
    assert_eq!(forced.trace.last().unwrap().event, TraceEvent::Converge);
    let ybar = common::mean(train.y());
    assert!(max_diff(&forced.train_predictions(), &plain.train_predictions()) <= 1e-6 * ybar);
}

#[test]
fn model_reproduces_solver_predictions_on_training_rows() {
    for id in ["C1", "C5", "C9"] {
        let cfg = SyntheticConfig::builtin(id).unwrap();
        let train = generate(&cfg).unwrap();
        let spec = cfg.spec().unwrap();
        let hp = cfg.hyperparams();
        let res = solve(&train, &spec, &hp).unwrap();
        assert_eq!(res.status, Status::Converged);
        let model = TrainedModel::from_solution(&res, &train, &spec, &hp).unwrap();
        assert!(model.support_count() <= train.n());
        for (k, row) in train.x().iter_rows().enumerate() {
            let expected = res.expansion[k] + res.bias;
            let got = model.predict(row).unwrap();
            assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0), "{id} row {k}");
        }
    }
}

#[test]
fn odd_model_is_antisymmetric_about_the_bias() {
    let cfg = SyntheticConfig::builtin("C9").unwrap();
    let train = generate(&cfg).unwrap();
    let spec = cfg.spec().unwrap();
    let hp = cfg.hyperparams();
    let res = solve(&train, &spec, &hp).unwrap();
    let model = TrainedModel::from_solution(&res, &train, &spec, &hp).unwrap();
    for row in train.x().iter_rows().take(10) {
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        let s = (model.predict(row).unwrap() - model.bias) + (model.predict(&neg).unwrap() - model.bias);
        assert!(s.abs() < 1e-12);
    }
}

#[test]
fn c1_reference_certifies() {
    let cfg = SyntheticConfig::builtin("C1").unwrap();
    let train = generate(&cfg).unwrap();
    let reference = solve_reference(&train, &cfg.spec().unwrap(), &cfg.hyperparams(), 1e-6).unwrap();
    assert!(reference.converged);
    assert!(reference.kkt_violation <= 1e-6 * common::mean(train.y()));
    let n = train.n();
    let eq: f64 = (0..n).map(|k| reference.u[k] - reference.u[n + k]).sum();
    assert!(eq.abs() <= 1e-10);
    let c = make_bounds(train.y(), 1.0).unwrap();
    for k in 0..n {
        assert!(reference.u[k] >= 0.0 && reference.u[k] <= c.upper(k));
        assert!(reference.u[n + k] >= 0.0 && reference.u[n + k] <= c.upper(k));
    }
}

#[test]
fn c1_smo_agrees_with_reference() {
    let cfg = SyntheticConfig::builtin("C1").unwrap();
    let cmp = mape_smo::validation::compare_config(&cfg, 1e-3, 100_000, &RefOptions::default()).unwrap();
    assert!(cmp.ref_converged);
    assert!(cmp.max_abs_diff <= 5e-3, "{}", cmp.max_abs_diff);
}

#[test]
fn budget_exhaustion_is_reported() {
    let cfg = SyntheticConfig::builtin("C1").unwrap();
    let train = generate(&cfg).unwrap();
    let hp = Hyperparams {
        max_iter: 25,
        ..cfg.hyperparams()
    };
    let res = solve(&train, &cfg.spec().unwrap(), &hp).unwrap();
    assert_eq!(res.status, Status::MaxIterReached);
    assert_eq!(res.iterations, 25);
    assert!(res.warnings.contains(&SolveWarning::MaxIterReached));
    assert!(res.bias.is_finite());
}

#[test]
fn heavy_regularization_falls_back_to_midpoint() {
    // A tiny C pins every multiplier at its bound, leaving nothing free.
    let cfg = SyntheticConfig {
        c: 1e-6,
        n: 10,
        ..SyntheticConfig::builtin("C1").unwrap()
    };
    let train = generate(&cfg).unwrap();
    let res = solve(&train, &cfg.spec().unwrap(), &cfg.hyperparams()).unwrap();
    assert_eq!(res.status, Status::Converged);
    if res.bias_method == BiasMethod::Midpoint {
        assert!(res.warnings.contains(&SolveWarning::NoFreeSupportVectors));
    }
}

#[test]
fn solver_state_after_convergence_is_stable() {
    let cfg = SyntheticConfig::builtin("C2").unwrap();
    let train = generate(&cfg).unwrap();
    let gram = build_gram(train.x(), &cfg.spec().unwrap()).unwrap();
    let hp = cfg.hyperparams();
    let mut smo = Smo::new(&gram, train.y(), &hp).unwrap();
    while smo.advance().unwrap() != Progress::Converged {}
    let before = smo.state().clone();
    assert_eq!(smo.advance().unwrap(), Progress::Converged);
    assert_eq!(smo.state(), &before);
}
