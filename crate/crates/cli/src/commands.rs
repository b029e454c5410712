use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use mape_smo::data::{read_csv, write_csv, Table};
use mape_smo::refqp::RefOptions;
use mape_smo::validation::{compare, write_report, Thresholds, Verdict};
use mape_smo::{
    generate, mape, solve, Error, Hyperparams, KernelSpec, Status, Symmetry, SyntheticConfig,
    TrainedModel, TrainingSet,
};

use crate::manifest::RunManifest;
use crate::{
    GenArgs, HyperArgs, PredictArgs, Source, TrainArgs, ValidateArgs, EXIT_INPUT, EXIT_INTERNAL,
    EXIT_MAX_ITER, EXIT_UNASSERTED, EXIT_VALIDATION,
};

/// Largest training set `validate` accepts without `--allow-large`; the
/// reference solver is slow beyond this.
const VALIDATE_CAP: usize = 500;

const DEFAULT_GAMMA: f64 = 0.1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_INPUT,
            error: error.into(),
        }
    }

    fn internal(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_INTERNAL,
            error: error.into(),
        }
    }
}

/// Library errors about the caller's data or settings are input errors;
/// broken invariants and I/O failures are internal.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant { .. } | Error::Contract(_) | Error::Io(_) => Failure::internal(e),
            _ => Failure::input(e),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn open_input(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(Failure::input)
}

fn create_output(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(Failure::internal)
}

fn read_table(path: &Path) -> Result<Table, Failure> {
    read_csv(open_input(path)?)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::input)
}

struct Problem {
    label: String,
    train: TrainingSet,
    spec: KernelSpec,
    hp: Hyperparams,
    builtin: bool,
}

fn resolve(source: &Source, args: &HyperArgs) -> Result<Problem, Failure> {
    let (label, train, defaults, builtin) = match (&source.config, &source.data) {
        (Some(id), _) => {
            let cfg = SyntheticConfig::builtin(id)?;
            let train = generate(&cfg)?;
            let d = (cfg.c, cfg.epsilon_pct, cfg.gamma, cfg.symmetry);
            (cfg.id, train, d, true)
        }
        (None, Some(path)) => {
            let train = read_table(path)?
                .into_training_set()
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::input)?;
            let hp = Hyperparams::default();
            let d = (hp.c, hp.epsilon_pct, DEFAULT_GAMMA, Symmetry::None);
            (path.display().to_string(), train, d, false)
        }
        (None, None) => return Err(Failure::input(anyhow!("either --config or --data is required"))),
    };
    let spec = KernelSpec::new(args.gamma.unwrap_or(defaults.2), args.variant.unwrap_or(defaults.3))?;
    let hp = Hyperparams {
        c: args.c.unwrap_or(defaults.0),
        epsilon_pct: args.epsilon.unwrap_or(defaults.1),
        tol: args.tol,
        n_check: args.n_check,
        n_freeze: args.n_freeze,
        max_iter: args.max_iter,
        shrinking: !args.no_shrink,
    };
    hp.validate()?;
    Ok(Problem {
        label,
        train,
        spec,
        hp,
        builtin,
    })
}

pub fn train(args: TrainArgs) -> Outcome {
    let pb = resolve(&args.source, &args.hyper)?;
    let mut manifest = RunManifest::new("train");
    manifest.push("source", &pb.label).problem(&pb.train, &pb.spec, &pb.hp);
    manifest.push("model", args.model.display());
    if let Some(t) = &args.trace {
        manifest.push("trace", t.display());
    }
    manifest.print();

    let res = solve(&pb.train, &pb.spec, &pb.hp)?;
    let model = TrainedModel::from_solution(&res, &pb.train, &pb.spec, &pb.hp)?;
    let mut out = create_output(&args.model)?;
    model.save(&mut out).map_err(Failure::internal)?;
    out.flush().map_err(Failure::internal)?;

    if let Some(path) = &args.trace {
        let mut wtr = csv::Writer::from_writer(create_output(path)?);
        let write = |wtr: &mut csv::Writer<_>| -> csv::Result<()> {
            wtr.write_record(["iter", "delta", "active_count", "event"])?;
            for r in &res.trace {
                wtr.write_record([
                    r.iter.to_string(),
                    format!("{:?}", r.delta),
                    r.active_count.to_string(),
                    r.event.token().to_owned(),
                ])?;
            }
            wtr.flush()?;
            Ok(())
        };
        write(&mut wtr).map_err(Failure::internal)?;
    }

    let fitted = model.predict_many(pb.train.x().iter_rows())?;
    let train_mape = mape(pb.train.y(), &fitted)?;
    println!("# summary");
    println!("status = {}", res.status);
    println!("iterations = {}", res.iterations);
    println!("delta = {:e}", res.delta_full);
    println!("threshold = {:e}", res.threshold);
    println!("unshrink_events = {}", res.unshrink_count());
    println!("bias = {:?}", res.bias);
    println!("bias_method = {}", res.bias_method);
    println!("support_vectors = {}", model.support_count());
    println!("train_mape_pct = {:.4}", train_mape);
    for w in &res.warnings {
        eprintln!("warning: {w:?}");
    }
    let code = if res.status == Status::MaxIterReached {
        EXIT_MAX_ITER
    } else {
        0
    };
    println!("exit_status = {code}");
    Ok(code)
}

pub fn predict(args: PredictArgs) -> Outcome {
    let mut manifest = RunManifest::new("predict");
    manifest
        .push("model", args.model.display())
        .push("input", args.input.display())
        .push("output", args.output.display());
    manifest.print();

    let model = TrainedModel::load(open_input(&args.model)?)
        .with_context(|| format!("loading {}", args.model.display()))
        .map_err(Failure::input)?;
    let table = read_table(&args.input)?;
    let preds = model
        .predict_many(table.x.iter_rows())
        .with_context(|| format!("predicting {}", args.input.display()))
        .map_err(Failure::input)?;

    let mut wtr = csv::Writer::from_writer(create_output(&args.output)?);
    let write = |wtr: &mut csv::Writer<_>| -> csv::Result<()> {
        wtr.write_record(["y_pred"])?;
        for p in &preds {
            wtr.write_record([format!("{p:?}")])?;
        }
        wtr.flush()?;
        Ok(())
    };
    write(&mut wtr).map_err(Failure::internal)?;

    println!("# summary");
    println!("rows = {}", preds.len());
    if let Some(y) = &table.y {
        println!("mape_pct = {:.4}", mape(y, &preds)?);
    }
    println!("exit_status = 0");
    Ok(0)
}

pub fn validate(args: ValidateArgs) -> Outcome {
    let pb = resolve(&args.source, &args.hyper)?;
    if pb.train.n() > VALIDATE_CAP && !args.allow_large {
        return Err(Failure::input(anyhow!(
            "{} has {} points; validation is capped at {VALIDATE_CAP} (use --allow-large)",
            pb.label,
            pb.train.n()
        )));
    }
    let mut limits = if pb.builtin {
        Thresholds::for_config(&pb.label, pb.hp.tol)
    } else {
        Thresholds::default()
    };
    if let Some(m) = args.max_diff {
        limits.max_abs = m;
    }
    if let Some(m) = args.mean_diff {
        limits.mean_abs = Some(m);
    }
    let mut manifest = RunManifest::new("validate");
    manifest.push("source", &pb.label).problem(&pb.train, &pb.spec, &pb.hp);
    manifest
        .push("tol_ref", format!("{:e}", args.tol_ref))
        .push("ref_max_iter", args.ref_max_iter)
        .push("max_abs_limit", format!("{:e}", limits.max_abs))
        .push(
            "mean_abs_limit",
            limits.mean_abs.map_or("none".to_owned(), |m| format!("{m:e}")),
        );
    if let Some(r) = &args.report {
        manifest.push("report", r.display());
    }
    manifest.print();

    let opts = RefOptions {
        tol_ref: args.tol_ref,
        max_iter: args.ref_max_iter,
        ..RefOptions::default()
    };
    let cmp = compare(&pb.label, &pb.train, &pb.spec, &pb.hp, &opts)?;
    match &args.report {
        Some(path) => {
            let mut out = create_output(path)?;
            write_report(std::slice::from_ref(&cmp), &mut out).map_err(Failure::internal)?;
            out.flush().map_err(Failure::internal)?;
        }
        None => write_report(std::slice::from_ref(&cmp), std::io::stdout()).map_err(Failure::internal)?,
    }

    let verdict = cmp.verdict(&limits);
    println!("# summary");
    println!("smo_status = {}", cmp.smo_status);
    println!("ref_converged = {}", cmp.ref_converged);
    println!("ref_iterations = {}", cmp.iters_ref);
    println!("max_abs_diff = {:e}", cmp.max_abs_diff);
    println!("mean_abs_diff = {:e}", cmp.mean_abs_diff);
    println!("verdict = {}", match verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Unasserted => "unasserted",
    });
    let code = match verdict {
        Verdict::Pass => 0,
        Verdict::Fail => EXIT_VALIDATION,
        Verdict::Unasserted => EXIT_UNASSERTED,
    };
    println!("exit_status = {code}");
    Ok(code)
}

pub fn gen(args: GenArgs) -> Outcome {
    let cfg = SyntheticConfig::builtin(&args.config)?;
    let mut manifest = RunManifest::new("gen");
    manifest
        .push("config", &cfg.id)
        .push("n", cfg.n)
        .push("p", cfg.p)
        .push("seed", cfg.seed)
        .push("output", args.output.display());
    manifest.print();

    let train = generate(&cfg)?;
    let mut out = create_output(&args.output)?;
    write_csv(&train, &mut out).map_err(Failure::internal)?;
    out.flush().map_err(Failure::internal)?;
    println!("exit_status = 0");
    Ok(0)
}
