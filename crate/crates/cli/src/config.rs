//! Resolved run configuration and `--set key=value` overrides.

use std::fmt::Write;
use std::str::FromStr;

use zsl_core::baselines::RidgeConfig;
use zsl_core::data_io::SynthConfig;
use zsl_core::eval::MethodConfig;
use zsl_core::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub ridge: RidgeConfig,
    pub synth: SynthConfig,
    /// Condense seen classes to their means before training.
    pub fast_training: bool,
    pub sweep_fractions: Vec<f64>,
    pub gradcheck_cases: usize,
    pub gradcheck_step: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            ridge: RidgeConfig::default(),
            synth: SynthConfig::default(),
            fast_training: false,
            sweep_fractions: vec![0.1, 0.2, 0.5, 1.0],
            gradcheck_cases: 100,
            gradcheck_step: zsl_core::gradcheck::DEFAULT_STEP,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn list(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Every settable key, in log order.
    pub const KEYS: [&'static str; 24] = [
        "train.c",
        "train.minibatch",
        "train.eta_schedule",
        "train.epochs_per_eta",
        "train.tolerance",
        "train.max_outer_iters",
        "train.theta_fractions",
        "train.init_std",
        "train.fixed_delta",
        "train.keep_first_label",
        "train.fast_training",
        "ridge.gamma",
        "ridge.lambda_sem",
        "synth.k_seen",
        "synth.l_unseen",
        "synth.per_class",
        "synth.p",
        "synth.q",
        "synth.noise_sigma",
        "synth.shift_sigma",
        "sweep.fractions",
        "gradcheck.cases",
        "gradcheck.step",
        "seed",
    ];

    /// Applies one `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), String> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| format!("override `{assignment}` is not of the form key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "train.c" => self.train.c = parse(key, value)?,
            "train.minibatch" => self.train.minibatch = parse(key, value)?,
            "train.eta_schedule" => self.train.eta_schedule = parse_list(key, value)?,
            "train.epochs_per_eta" => self.train.epochs_per_eta = parse(key, value)?,
            "train.tolerance" => self.train.tolerance = parse(key, value)?,
            "train.max_outer_iters" => self.train.max_outer_iters = parse(key, value)?,
            "train.theta_fractions" => self.train.theta_fractions = parse_list(key, value)?,
            "train.init_std" => self.train.init_std = parse(key, value)?,
            "train.fixed_delta" => self.train.fixed_delta = parse(key, value)?,
            "train.keep_first_label" => self.train.keep_first_label = parse(key, value)?,
            "train.fast_training" => self.fast_training = parse(key, value)?,
            "ridge.gamma" => self.ridge.gamma = parse(key, value)?,
            "ridge.lambda_sem" => self.ridge.lambda_sem = parse(key, value)?,
            "synth.k_seen" => self.synth.k_seen = parse(key, value)?,
            "synth.l_unseen" => self.synth.l_unseen = parse(key, value)?,
            "synth.per_class" => self.synth.per_class = parse(key, value)?,
            "synth.p" => self.synth.p = parse(key, value)?,
            "synth.q" => self.synth.q = parse(key, value)?,
            "synth.noise_sigma" => self.synth.noise_sigma = parse(key, value)?,
            "synth.shift_sigma" => self.synth.shift_sigma = parse(key, value)?,
            "sweep.fractions" => self.sweep_fractions = parse_list(key, value)?,
            "gradcheck.cases" => self.gradcheck_cases = parse(key, value)?,
            "gradcheck.step" => self.gradcheck_step = parse(key, value)?,
            "seed" => self.set_seed(parse(key, value)?),
            _ => return Err(format!("unknown config key `{key}`")),
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.synth.seed = seed;
    }

    pub fn method_config(&self) -> MethodConfig {
        MethodConfig {
            train: self.train.clone(),
            ridge: self.ridge,
        }
    }

    fn value(&self, key: &str) -> String {
        let t = &self.train;
        let s = &self.synth;
        match key {
            "train.c" => t.c.to_string(),
            "train.minibatch" => t.minibatch.to_string(),
            "train.eta_schedule" => list(&t.eta_schedule),
            "train.epochs_per_eta" => t.epochs_per_eta.to_string(),
            "train.tolerance" => t.tolerance.to_string(),
            "train.max_outer_iters" => t.max_outer_iters.to_string(),
            "train.theta_fractions" => list(&t.theta_fractions),
            "train.init_std" => t.init_std.to_string(),
            "train.fixed_delta" => t.fixed_delta.to_string(),
            "train.keep_first_label" => t.keep_first_label.to_string(),
            "train.fast_training" => self.fast_training.to_string(),
            "ridge.gamma" => self.ridge.gamma.to_string(),
            "ridge.lambda_sem" => self.ridge.lambda_sem.to_string(),
            "synth.k_seen" => s.k_seen.to_string(),
            "synth.l_unseen" => s.l_unseen.to_string(),
            "synth.per_class" => s.per_class.to_string(),
            "synth.p" => s.p.to_string(),
            "synth.q" => s.q.to_string(),
            "synth.noise_sigma" => s.noise_sigma.to_string(),
            "synth.shift_sigma" => s.shift_sigma.to_string(),
            "sweep.fractions" => list(&self.sweep_fractions),
            "gradcheck.cases" => self.gradcheck_cases.to_string(),
            "gradcheck.step" => self.gradcheck_step.to_string(),
            "seed" => t.seed.to_string(),
            _ => unreachable!("unlisted key {key}"),
        }
    }

    /// `key = value` lines for every key; feeding them back through
    /// [`RunConfig::set`] reproduces this configuration exactly.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.value(key));
        }
        out
    }

    /// `--set key=value` arguments reproducing this configuration.
    pub fn to_set_args(&self) -> String {
        Self::KEYS
            .iter()
            .map(|key| format!("--set {key}={}", self.value(key)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("train.c=0.37").unwrap();
        cfg.set("train.eta_schedule=0.5, 0.05").unwrap();
        cfg.set("synth.noise_sigma=0.1234567890123").unwrap();
        cfg.set("seed=9").unwrap();
        let mut back = RunConfig::default();
        for line in cfg.to_kv().lines() {
            back.set(&line.replacen(" = ", "=", 1)).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("train.learning_rate=1").unwrap_err().contains("unknown config key"));
        assert!(cfg.set("train.c").is_err());
        assert!(cfg.set("train.minibatch=-3").is_err());
        assert!(cfg.set("train.fixed_delta=yes").is_err());
    }
}
