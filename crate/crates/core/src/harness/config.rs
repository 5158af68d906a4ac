//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; a `[section]` line
//! prefixes the keys that follow with `section.`. Unknown keys are errors.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `seed` | RNG seed (required) | |
//! | `optimizer` | `sgd`, `mkor`, `mkor-h`, `kfac`, `sngd` | `mkor` |
//! | `workers` | logical data-parallel workers | 1 |
//! | `iterations` | training iterations | 500 |
//! | `batch_size` | per-worker batch | 32 |
//! | `eval_every` | full-dataset loss every N iterations (0 = never) | 10 |
//! | `rank1_every` | rank-1 error records every N iterations (0 = never) | 0 |
//! | `timing` | write wall-clock times to the artifacts | false |
//! | `target_loss` | full-dataset loss that counts as converged in sweeps | unset |
//! | `optim.lr`, `optim.momentum` | backend step size and heavy-ball momentum | 0.01, 0.9 |
//! | `optim.gamma` | factor momentum (MKOR: 0.9, KFAC: 0.95 when unset) | |
//! | `optim.zeta`, `optim.epsilon_norm` | stabilizer blend and trigger | 0.95, 100 |
//! | `optim.inversion_period` | factor refresh period, integer or `inf` (MKOR 10, KFAC 100) | |
//! | `optim.damping` | KFAC / SNGD damping (1e-3 / 1.0) | |
//! | `optim.switch_ratio`, `optim.window` | MKOR-H switch | 0.1, 50 |
//! | `optim.half_precision_comm` | binary16 synchronization | false |
//! | `optim.sm_formula` | `mkor` or `exact` | `mkor` |
//! | `optim.second_order_layers` | `all` or comma-separated indices | `all` |
//! | `sched.scheduler` | `constant`, `step`, `knee` | `constant` |
//! | `sched.beta`, `sched.decay_factor` | knee tolerance and decay | 0.2, 0.5 |
//! | `sched.milestones`, `sched.factor`, `sched.iters_per_epoch` | step decay | 25,35,40,45,50,55,56, 0.5, 100 |
//! | `data.source` | `synth`, `idx`, `csv` | `synth` |
//! | `data.kind` | `xor`, `gaussian-blobs`, `random-autoencoder` | `xor` |
//! | `data.n`, `data.dim`, `data.classes`, `data.latent`, `data.sigma`, `data.center_scale` | generator shape | |
//! | `data.seed` | dataset seed (defaults to `seed`) | |
//! | `data.images`, `data.labels` | IDX paths | |
//! | `data.path`, `data.target_cols` | CSV path and number of trailing target columns | |
//! | `net.hidden` | comma-separated hidden widths | `8` |
//! | `net.activation`, `net.output_activation` | `identity`, `relu`, `tanh`, `sigmoid` | `tanh`, `identity` |
//! | `net.bias` | biases on every layer | true |
//! | `net.loss` | `mse` or `ce` | `mse` |
//!
//! The optimizer keys `lr`, `momentum`, `gamma`, `zeta`, `epsilon_norm`,
//! `inversion_period`, `damping`, `switch_ratio`, `window`,
//! `half_precision_comm`, and the scheduler keys `scheduler`, `beta`,
//! `decay_factor`, `milestones` are also accepted without their prefix.

use super::data::{synth_dataset, SynthKind, SynthSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{Activation, LayerSpec, LossKind, Network};
use crate::optim::{
    HybridState, Kfac, KfacConfig, LayerSelection, Mkor, MkorConfig, Optimizer, OptimizerKind, Period, SgdMomentum,
    SmFormula, Sngd, SngdConfig,
};
use crate::sched::{KneePointState, Scheduler, DEFAULT_MILESTONES};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth(SynthSpec),
    Idx { images: PathBuf, labels: PathBuf },
    Csv { path: PathBuf, target_cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedKind {
    Constant,
    Step,
    Knee,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub optimizer: OptimizerKind,
    pub workers: usize,
    pub iterations: u64,
    pub batch_size: usize,
    pub eval_every: u64,
    pub rank1_every: u64,
    pub timing: bool,
    pub target_loss: Option<f64>,

    pub lr: f64,
    pub momentum: f64,
    pub gamma: Option<f64>,
    pub zeta: f64,
    pub epsilon_norm: f64,
    pub inversion_period: Option<Period>,
    pub damping: Option<f64>,
    pub switch_ratio: f64,
    pub window: usize,
    pub half_precision_comm: bool,
    pub sm_formula: SmFormula,
    pub second_order_layers: LayerSelection,

    pub scheduler: SchedKind,
    pub beta: f64,
    pub decay_factor: f64,
    pub milestones: Vec<u64>,
    pub step_factor: f64,
    pub iters_per_epoch: u64,

    pub data: DataSource,
    pub data_seed: Option<u64>,

    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub output_activation: Activation,
    pub bias: bool,
    pub loss: LossKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: None,
            optimizer: OptimizerKind::Mkor,
            workers: 1,
            iterations: 500,
            batch_size: 32,
            eval_every: 10,
            rank1_every: 0,
            timing: false,
            target_loss: None,
            lr: 0.01,
            momentum: 0.9,
            gamma: None,
            zeta: 0.95,
            epsilon_norm: 100.0,
            inversion_period: None,
            damping: None,
            switch_ratio: 0.1,
            window: 50,
            half_precision_comm: false,
            sm_formula: SmFormula::Mkor,
            second_order_layers: LayerSelection::All,
            scheduler: SchedKind::Constant,
            beta: 0.2,
            decay_factor: 0.5,
            milestones: DEFAULT_MILESTONES.to_vec(),
            step_factor: 0.5,
            iters_per_epoch: 100,
            data: DataSource::Synth(SynthSpec::default()),
            data_seed: None,
            hidden: vec![8],
            activation: Activation::Tanh,
            output_activation: Activation::Identity,
            bias: true,
            loss: LossKind::Mse,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value `{value}` for `{key}`"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let x: f64 = num(key, value)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(key, value))
    }
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|p| num(key, p.trim())).collect()
}

const UNPREFIXED_OPTIM: [&str; 10] = [
    "lr",
    "momentum",
    "gamma",
    "zeta",
    "epsilon_norm",
    "inversion_period",
    "damping",
    "switch_ratio",
    "window",
    "half_precision_comm",
];
const UNPREFIXED_SCHED: [&str; 4] = ["scheduler", "beta", "decay_factor", "milestones"];

fn canonical(key: &str) -> String {
    if UNPREFIXED_OPTIM.contains(&key) {
        format!("optim.{key}")
    } else if UNPREFIXED_SCHED.contains(&key) {
        format!("sched.{key}")
    } else {
        key.to_string()
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            self.set(&key, v.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, config_message(e))))?;
        }
        Ok(())
    }

    /// Applies `key=value` (as given on the command line).
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    fn synth_mut(&mut self, key: &str) -> Result<&mut SynthSpec> {
        match &mut self.data {
            DataSource::Synth(s) => Ok(s),
            _ => Err(Error::Config(format!("`{key}` only applies to synthetic data"))),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = canonical(key);
        let k = key.as_str();
        match k {
            "seed" => self.seed = Some(num(k, value)?),
            "optimizer" => {
                self.optimizer =
                    OptimizerKind::parse(value).ok_or_else(|| Error::Config(format!("unknown optimizer `{value}`")))?
            }
            "workers" => {
                self.workers = num(k, value)?;
                if self.workers == 0 {
                    return Err(bad(k, value));
                }
            }
            "iterations" => self.iterations = num(k, value)?,
            "batch_size" => {
                self.batch_size = num(k, value)?;
                if self.batch_size == 0 {
                    return Err(bad(k, value));
                }
            }
            "eval_every" => self.eval_every = num(k, value)?,
            "rank1_every" => self.rank1_every = num(k, value)?,
            "timing" => self.timing = boolean(k, value)?,
            "target_loss" => self.target_loss = Some(num(k, value)?),
            "optim.lr" => self.lr = positive(k, value)?,
            "optim.momentum" => {
                self.momentum = num(k, value)?;
                if !(0.0..1.0).contains(&self.momentum) {
                    return Err(bad(k, value));
                }
            }
            "optim.gamma" => self.gamma = Some(num(k, value)?),
            "optim.zeta" => self.zeta = num(k, value)?,
            "optim.epsilon_norm" => self.epsilon_norm = positive(k, value)?,
            "optim.inversion_period" => {
                self.inversion_period = Some(Period::parse(value).ok_or_else(|| bad(k, value))?)
            }
            "optim.damping" => self.damping = Some(positive(k, value)?),
            "optim.switch_ratio" => self.switch_ratio = positive(k, value)?,
            "optim.window" => {
                self.window = num(k, value)?;
                if self.window == 0 {
                    return Err(bad(k, value));
                }
            }
            "optim.half_precision_comm" => self.half_precision_comm = boolean(k, value)?,
            "optim.sm_formula" => self.sm_formula = SmFormula::parse(value).ok_or_else(|| bad(k, value))?,
            "optim.second_order_layers" => {
                self.second_order_layers = LayerSelection::parse(value).ok_or_else(|| bad(k, value))?
            }
            "sched.scheduler" => {
                self.scheduler = match value {
                    "constant" | "none" => SchedKind::Constant,
                    "step" | "step_decay" => SchedKind::Step,
                    "knee" | "knee_point" => SchedKind::Knee,
                    _ => return Err(bad(k, value)),
                }
            }
            "sched.beta" => self.beta = positive(k, value)?,
            "sched.decay_factor" => self.decay_factor = positive(k, value)?,
            "sched.milestones" => self.milestones = list(k, value)?,
            "sched.factor" => self.step_factor = positive(k, value)?,
            "sched.iters_per_epoch" => {
                self.iters_per_epoch = num(k, value)?;
                if self.iters_per_epoch == 0 {
                    return Err(bad(k, value));
                }
            }
            "data.source" => {
                self.data = match (value, &self.data) {
                    ("synth", DataSource::Synth(_))
                    | ("idx", DataSource::Idx { .. })
                    | ("csv", DataSource::Csv { .. }) => return Ok(()),
                    ("synth", _) => DataSource::Synth(SynthSpec::default()),
                    ("idx", _) => DataSource::Idx {
                        images: PathBuf::new(),
                        labels: PathBuf::new(),
                    },
                    ("csv", _) => DataSource::Csv {
                        path: PathBuf::new(),
                        target_cols: 1,
                    },
                    _ => return Err(bad(k, value)),
                }
            }
            "data.kind" => {
                let kind = SynthKind::parse(value).ok_or_else(|| bad(k, value))?;
                self.synth_mut(k)?.kind = kind;
            }
            "data.n" => self.synth_mut(k)?.n = num(k, value)?,
            "data.dim" => self.synth_mut(k)?.dim = num(k, value)?,
            "data.classes" => self.synth_mut(k)?.classes = num(k, value)?,
            "data.latent" => self.synth_mut(k)?.latent = num(k, value)?,
            "data.sigma" => self.synth_mut(k)?.sigma = num(k, value)?,
            "data.center_scale" => self.synth_mut(k)?.center_scale = num(k, value)?,
            "data.seed" => self.data_seed = Some(num(k, value)?),
            "data.images" | "data.labels" => match &mut self.data {
                DataSource::Idx { images, labels } => {
                    if k == "data.images" {
                        *images = PathBuf::from(value);
                    } else {
                        *labels = PathBuf::from(value);
                    }
                }
                _ => return Err(Error::Config(format!("`{k}` needs data.source = idx"))),
            },
            "data.path" | "data.target_cols" => match &mut self.data {
                DataSource::Csv { path, target_cols } => {
                    if k == "data.path" {
                        *path = PathBuf::from(value);
                    } else {
                        *target_cols = num(k, value)?;
                    }
                }
                _ => return Err(Error::Config(format!("`{k}` needs data.source = csv"))),
            },
            "net.hidden" => self.hidden = list(k, value)?,
            "net.activation" => self.activation = Activation::parse(value).ok_or_else(|| bad(k, value))?,
            "net.output_activation" => {
                self.output_activation = Activation::parse(value).ok_or_else(|| bad(k, value))?
            }
            "net.bias" => self.bias = boolean(k, value)?,
            "net.loss" => self.loss = LossKind::parse(value).ok_or_else(|| bad(k, value))?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("`seed` is required".into()))
    }

    /// Checks everything that can be checked before a run starts.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        match &self.data {
            DataSource::Synth(s) if s.n == 0 => return Err(Error::Config("data.n must be positive".into())),
            DataSource::Idx { images, labels } => {
                for p in [images, labels] {
                    if !p.is_file() {
                        return Err(Error::Config(format!("IDX file `{}` not found", p.display())));
                    }
                }
            }
            DataSource::Csv { path, .. } if !path.is_file() => {
                return Err(Error::Config(format!("CSV file `{}` not found", path.display())))
            }
            _ => {}
        }
        self.mkor_config().validate()?;
        self.kfac_config().validate()?;
        if self.optimizer == OptimizerKind::Sngd && self.batch_size * self.workers > crate::optim::SNGD_MAX_BATCH {
            return Err(Error::Config(format!(
                "sngd needs batch_size × workers ≤ {}",
                crate::optim::SNGD_MAX_BATCH
            )));
        }
        if self.scheduler == SchedKind::Knee {
            KneePointState::new(self.lr, self.beta, self.decay_factor)?;
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let seed = self.data_seed.map_or_else(|| self.seed(), Ok)?;
        match &self.data {
            DataSource::Synth(s) => synth_dataset(s, seed),
            DataSource::Idx { images, labels } => super::data::load_idx(images, labels),
            DataSource::Csv { path, target_cols } => super::data::load_csv(path, *target_cols),
        }
    }

    pub fn layer_specs(&self, input_dim: usize, output_dim: usize) -> Vec<LayerSpec> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden);
        dims.push(output_dim);
        let last = dims.len() - 2;
        (0..dims.len() - 1)
            .map(|i| {
                let act = if i == last {
                    self.output_activation
                } else {
                    self.activation
                };
                LayerSpec::new(dims[i], dims[i + 1], act, self.bias)
            })
            .collect()
    }

    pub fn mkor_config(&self) -> MkorConfig {
        MkorConfig {
            gamma: self.gamma.unwrap_or(0.9),
            zeta: self.zeta,
            epsilon_norm: self.epsilon_norm,
            inversion_period: self.inversion_period.unwrap_or(Period::Every(10)),
            lr: self.lr,
            momentum: self.momentum,
            second_order_layers: self.second_order_layers.clone(),
            half_precision_comm: self.half_precision_comm,
            sm_formula: self.sm_formula,
        }
    }

    pub fn kfac_config(&self) -> KfacConfig {
        KfacConfig {
            gamma: self.gamma.unwrap_or(0.95),
            damping: self.damping.unwrap_or(1e-3),
            inversion_period: self.inversion_period.unwrap_or(Period::Every(100)),
            lr: self.lr,
            momentum: self.momentum,
            second_order_layers: self.second_order_layers.clone(),
        }
    }

    pub fn build_optimizer(&self, net: &Network) -> Result<Optimizer> {
        Ok(match self.optimizer {
            OptimizerKind::Sgd => Optimizer::Sgd(SgdMomentum::new(self.lr, self.momentum)),
            OptimizerKind::Mkor => Optimizer::Mkor(Box::new(Mkor::new(self.mkor_config(), net)?)),
            OptimizerKind::MkorH => Optimizer::Mkor(Box::new(Mkor::hybrid(
                self.mkor_config(),
                net,
                HybridState::new(self.window, self.switch_ratio, 0.9),
            )?)),
            OptimizerKind::Kfac => Optimizer::Kfac(Box::new(Kfac::new(self.kfac_config(), net)?)),
            OptimizerKind::Sngd => Optimizer::Sngd(Sngd::new(SngdConfig {
                damping: self.damping.unwrap_or(1.0),
                lr: self.lr,
                momentum: self.momentum,
                second_order_layers: self.second_order_layers.clone(),
            })?),
        })
    }

    pub fn build_scheduler(&self) -> Result<Scheduler> {
        Ok(match self.scheduler {
            SchedKind::Constant => Scheduler::Constant(self.lr),
            SchedKind::Step => Scheduler::StepDecay {
                base_lr: self.lr,
                milestones: self.milestones.clone(),
                factor: self.step_factor,
                iters_per_epoch: self.iters_per_epoch,
            },
            SchedKind::Knee => Scheduler::Knee(KneePointState::new(self.lr, self.beta, self.decay_factor)?),
        })
    }

    /// Canonical `key → value` listing of every setting, used to echo the
    /// configuration into run summaries.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed.map(|s| s.to_string()).unwrap_or_default());
        put("optimizer", self.optimizer.name().into());
        put("workers", self.workers.to_string());
        put("iterations", self.iterations.to_string());
        put("batch_size", self.batch_size.to_string());
        put("eval_every", self.eval_every.to_string());
        put("rank1_every", self.rank1_every.to_string());
        put("timing", self.timing.to_string());
        if let Some(t) = self.target_loss {
            put("target_loss", t.to_string());
        }
        put("optim.lr", self.lr.to_string());
        put("optim.momentum", self.momentum.to_string());
        if let Some(g) = self.gamma {
            put("optim.gamma", g.to_string());
        }
        put("optim.zeta", self.zeta.to_string());
        put("optim.epsilon_norm", self.epsilon_norm.to_string());
        if let Some(p) = self.inversion_period {
            put("optim.inversion_period", p.to_string());
        }
        if let Some(d) = self.damping {
            put("optim.damping", d.to_string());
        }
        put("optim.switch_ratio", self.switch_ratio.to_string());
        put("optim.window", self.window.to_string());
        put("optim.half_precision_comm", self.half_precision_comm.to_string());
        put(
            "optim.sm_formula",
            match self.sm_formula {
                SmFormula::Mkor => "mkor",
                SmFormula::Exact => "exact",
            }
            .into(),
        );
        put("optim.second_order_layers", self.second_order_layers.to_string());
        put(
            "sched.scheduler",
            match self.scheduler {
                SchedKind::Constant => "constant",
                SchedKind::Step => "step",
                SchedKind::Knee => "knee",
            }
            .into(),
        );
        put("sched.beta", self.beta.to_string());
        put("sched.decay_factor", self.decay_factor.to_string());
        let ms: Vec<String> = self.milestones.iter().map(|x| x.to_string()).collect();
        put("sched.milestones", ms.join(","));
        put("sched.factor", self.step_factor.to_string());
        put("sched.iters_per_epoch", self.iters_per_epoch.to_string());
        match &self.data {
            DataSource::Synth(s) => {
                put("data.source", "synth".into());
                put("data.kind", s.kind.name().into());
                put("data.n", s.n.to_string());
                put("data.dim", s.dim.to_string());
                put("data.classes", s.classes.to_string());
                put("data.latent", s.latent.to_string());
                put("data.sigma", s.sigma.to_string());
                put("data.center_scale", s.center_scale.to_string());
            }
            DataSource::Idx { images, labels } => {
                put("data.source", "idx".into());
                put("data.images", images.display().to_string());
                put("data.labels", labels.display().to_string());
            }
            DataSource::Csv { path, target_cols } => {
                put("data.source", "csv".into());
                put("data.path", path.display().to_string());
                put("data.target_cols", target_cols.to_string());
            }
        }
        if let Some(s) = self.data_seed {
            put("data.seed", s.to_string());
        }
        let hs: Vec<String> = self.hidden.iter().map(|x| x.to_string()).collect();
        put("net.hidden", hs.join(","));
        put("net.activation", self.activation.name().into());
        put("net.output_activation", self.output_activation.name().into());
        put("net.bias", self.bias.to_string());
        put(
            "net.loss",
            match self.loss {
                LossKind::Mse => "mse",
                LossKind::SoftmaxCrossEntropy => "ce",
            }
            .into(),
        );
        m
    }
}

fn config_message(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_aliases() {
        let cfg = ExperimentConfig::parse(
            "seed = 3\noptimizer = kfac\n# comment\n[optim]\ndamping = 0.5\n[net]\nhidden = 4, 4\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.optimizer, OptimizerKind::Kfac);
        assert_eq!(cfg.damping, Some(0.5));
        assert_eq!(cfg.hidden, vec![4, 4]);
        let mut c = cfg.clone();
        c.apply_override("lr=0.5").unwrap();
        assert_eq!(c.lr, 0.5);
    }

    #[test]
    fn unknown_key_rejected() {
        let e = ExperimentConfig::parse("seed = 1\nlearning_rate = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(ExperimentConfig::parse("optimizer = adam\n").is_err());
    }

    #[test]
    fn map_roundtrips() {
        let cfg = ExperimentConfig::parse(
            "seed = 9\noptimizer = mkor-h\ninversion_period = inf\n[data]\nkind = blobs\nclasses = 5\n",
        )
        .unwrap();
        let mut back = ExperimentConfig::default();
        for (k, v) in cfg.to_map() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn seed_required() {
        assert!(ExperimentConfig::default().validate().is_err());
    }
}
