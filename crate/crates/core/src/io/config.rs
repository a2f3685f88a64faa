//! Flat `key = value` run configuration.

use std::path::Path;

use crate::autodiff::AdamConfig;
use crate::error::{Error, Result};
use crate::experts::{ExpertConfig, GenerationConfig, Split};
use crate::policy::Architecture;
use crate::trainer::TrainConfig;
use crate::world::{Task, WorldSpec};

/// Every recognized key, in documentation order.
pub const KEYS: &[&str] = &[
    "task",
    "n",
    "L",
    "K",
    "T",
    "split",
    "sigma",
    "seed",
    "curriculum",
    "c_K",
    "c_N",
    "K_init",
    "baseline_K",
    "lr",
    "E",
    "batch",
    "checkpoint_every",
    "comm_radius",
    "u_max",
    "k_a",
    "k_r",
    "k_d",
    "d_safe",
    "waypoint_offset",
    "switch_radius",
    "goal_radius",
    "min_separation",
    "goal_relative",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub n: usize,
    pub trajectories: usize,
    pub horizon: usize,
    pub dt: f64,
    pub split: Split,
    pub sigma: f64,
    pub seed: u64,
    pub curriculum: bool,
    pub c_k: usize,
    pub c_n: usize,
    pub k_init: usize,
    pub baseline_k: usize,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub checkpoint_every: usize,
    pub comm_radius: f64,
    pub u_max: f64,
    pub expert: ExpertConfig<f64>,
    pub goal_radius: Option<f64>,
    pub min_separation: f64,
    pub goal_relative: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::Navigation,
            n: 4,
            trajectories: 200,
            horizon: 60,
            dt: WorldSpec::<f64>::DEFAULT_DT,
            split: Split::Train,
            sigma: 0.0,
            seed: 0,
            curriculum: true,
            c_k: 1,
            c_n: 150,
            k_init: 1,
            baseline_k: 5,
            lr: 0.005,
            steps: 5000,
            batch: 32,
            checkpoint_every: 500,
            comm_radius: WorldSpec::<f64>::DEFAULT_COMM_RADIUS,
            u_max: WorldSpec::<f64>::DEFAULT_U_MAX,
            expert: ExpertConfig::default(),
            goal_radius: None,
            min_separation: 0.5,
            goal_relative: false,
        }
    }
}

fn parse<V: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<V> {
    raw.parse().map_err(|_| Error::Config {
        line,
        msg: format!("cannot parse {key} = {raw:?}"),
    })
}

fn switch(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(Error::Config {
            line,
            msg: format!("{key} expects on/off, got {raw:?}"),
        }),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: "expected key = value".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_owned()) && KEYS.contains(&key) {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key {key}"),
                });
            }
            cfg.set(line, key, value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, line: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "task" => self.task = v.parse().map_err(|e: Error| Error::Config { line, msg: e.to_string() })?,
            "n" => self.n = parse(line, key, v)?,
            "L" => self.trajectories = parse(line, key, v)?,
            "K" => self.horizon = parse(line, key, v)?,
            "T" => self.dt = parse(line, key, v)?,
            "split" => {
                self.split = match v {
                    "train" => Split::Train,
                    "test" => Split::Test,
                    _ => return Err(Error::Config { line, msg: format!("split expects train/test, got {v:?}") }),
                }
            }
            "sigma" => self.sigma = parse(line, key, v)?,
            "seed" => self.seed = parse(line, key, v)?,
            "curriculum" => self.curriculum = switch(line, key, v)?,
            "c_K" => self.c_k = parse(line, key, v)?,
            "c_N" => self.c_n = parse(line, key, v)?,
            "K_init" => self.k_init = parse(line, key, v)?,
            "baseline_K" => self.baseline_k = parse(line, key, v)?,
            "lr" => self.lr = parse(line, key, v)?,
            "E" => self.steps = parse(line, key, v)?,
            "batch" => self.batch = parse(line, key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse(line, key, v)?,
            "comm_radius" => self.comm_radius = parse(line, key, v)?,
            "u_max" => self.u_max = parse(line, key, v)?,
            "k_a" => self.expert.k_attract = parse(line, key, v)?,
            "k_r" => self.expert.k_repulse = parse(line, key, v)?,
            "k_d" => self.expert.k_damp = parse(line, key, v)?,
            "d_safe" => self.expert.safety_radius = parse(line, key, v)?,
            "waypoint_offset" => self.expert.waypoint_offset = parse(line, key, v)?,
            "switch_radius" => self.expert.switch_radius = parse(line, key, v)?,
            "goal_radius" => {
                self.goal_radius = match v {
                    "none" => None,
                    _ => Some(parse(line, key, v)?),
                }
            }
            "min_separation" => self.min_separation = parse(line, key, v)?,
            "goal_relative" => self.goal_relative = switch(line, key, v)?,
            _ => {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    pub fn generation(&self) -> GenerationConfig<f64> {
        GenerationConfig {
            split: self.split,
            comm_radius: self.comm_radius,
            u_max: self.u_max,
            dt: self.dt,
            expert: self.expert,
            goal_radius: self.goal_radius,
            min_separation: self.min_separation,
            ..GenerationConfig::new(self.task, self.n, self.trajectories, self.horizon, self.seed)
        }
    }

    pub fn training(&self) -> TrainConfig<f64> {
        TrainConfig {
            steps: self.steps,
            batch: self.batch,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            sigma: self.sigma,
            seed: self.seed,
            curriculum: self.curriculum,
            c_k: self.c_k,
            c_n: self.c_n,
            k_init: self.k_init,
            baseline_horizon: self.baseline_k,
            checkpoint_every: self.checkpoint_every,
            arch: Architecture {
                goal_relative: self.goal_relative,
                ..Architecture::default()
            },
            ..TrainConfig::new(self.task)
        }
    }
}
