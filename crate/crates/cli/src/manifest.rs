//! Run manifest echoed to stdout before any work starts, so every output can be
//! traced back to the exact inputs and settings that produced it.

use std::fmt::Display;

use mape_smo::{Hyperparams, KernelSpec, TrainingSet};

#[derive(Debug, Default)]
pub struct RunManifest {
    entries: Vec<(&'static str, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = RunManifest::default();
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: &'static str, value: impl Display) -> &mut Self {
        self.entries.push((key, value.to_string()));
        self
    }

    pub fn problem(&mut self, train: &TrainingSet, spec: &KernelSpec, hp: &Hyperparams) -> &mut Self {
        self.push("n", train.n())
            .push("p", train.dim())
            .push("C", format!("{:?}", hp.c))
            .push("epsilon_pct", format!("{:?}", hp.epsilon_pct))
            .push("gamma", format!("{:?}", spec.gamma))
            .push("variant", spec.symmetry)
            .push("tol", format!("{:e}", hp.tol))
            .push("max_iter", hp.max_iter)
            .push("n_check", hp.n_check_for(train.n()))
            .push("n_freeze", hp.n_freeze)
            .push("shrinking", hp.shrinking)
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# run manifest\n");
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn print(&self) {
        print!("{}", self.render());
    }
}
