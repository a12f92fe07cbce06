//! Run configuration.
//!
//! One structured-text (TOML) document with the sections `[track]`,
//! `[vehicle]`, `[planner]`, `[pcs]`, `[es]`, `[game]`, `[train]` and
//! `[experiment]`. Every field has a default, so an empty file is a valid
//! configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub track: TrackConfig,
    pub vehicle: VehicleConfig,
    pub planner: PlannerConfig,
    pub pcs: PcsConfig,
    pub es: EsConfig,
    pub game: GameConfig,
    pub train: TrainConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.track.resolution <= 0.0 {
            return bad("track.resolution must be > 0");
        }
        if self.vehicle.dt <= 0.0 {
            return bad("vehicle.dt must be > 0");
        }
        if self.vehicle.lidar_beams < 2 {
            return bad("vehicle.lidar_beams must be >= 2");
        }
        if self.planner.n_long == 0 || self.planner.n_lat == 0 {
            return bad("planner lattice counts must be >= 1");
        }
        if self.planner.velocity_factors.is_empty() {
            return bad("planner.velocity_factors must not be empty");
        }
        if self.planner.replan_period < self.vehicle.dt {
            return bad("planner.replan_period must be >= vehicle.dt");
        }
        if self.pcs.epsilon <= 0.0 {
            return bad("pcs.epsilon must be > 0");
        }
        if self.game.m == 0 || self.game.m > crate::regret::MAX_GAME_STEPS {
            return bad("game.m must be in 1..=4 for the 40-wide feature layout");
        }
        if self.game.default_action >= crate::pcs::ACTION_COUNT {
            return bad("game.default_action must be an action index in 0..4");
        }
        if self.game.step_duration <= 0.0 {
            return bad("game.step_duration must be > 0");
        }
        if self.train.batch == 0 || self.train.lr0 < 0.0 {
            return bad("train.batch must be >= 1 and train.lr0 >= 0");
        }
        if !(0.0..1.0).contains(&self.train.alpha) || self.train.alpha == 0.0 {
            return bad("train.alpha must be in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    /// Occupancy grid (PGM P2/P5 or CSV of 0/1). `None` selects the built-in oval.
    pub grid_file: Option<PathBuf>,
    pub centerline_file: Option<PathBuf>,
    /// Optional raceline CSV `x,y,theta,v`; the centerline fallback is used otherwise.
    pub raceline_file: Option<PathBuf>,
    pub resolution: f64,
    pub origin: [f64; 2],
    /// Uniform centerline resampling spacing in meters; `None` keeps the input points.
    pub resample_spacing: Option<f64>,
    /// Vehicle footprint disc radius in meters.
    pub footprint_radius: f64,
    /// Constant speed of the centerline fallback raceline.
    pub raceline_speed: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            grid_file: None,
            centerline_file: None,
            raceline_file: None,
            resolution: 0.05,
            origin: [0.0, 0.0],
            resample_spacing: Some(0.1),
            footprint_radius: 0.3,
            raceline_speed: 6.0,
        }
    }
}

/// Single-track model parameters (F1TENTH scaled car) plus sensor and stepping settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    pub mass: f64,
    pub inertia_z: f64,
    pub lf: f64,
    pub lr: f64,
    pub cg_height: f64,
    pub mu: f64,
    pub cs_front: f64,
    pub cs_rear: f64,
    pub steer_max: f64,
    pub steer_rate_max: f64,
    pub v_max: f64,
    pub accel_max: f64,
    /// Speed above which available acceleration falls off as 1/v.
    pub v_accel_switch: f64,
    /// Below this speed the kinematic model replaces the slip dynamics.
    pub v_kinematic: f64,
    pub dt: f64,
    pub lidar_beams: usize,
    pub lidar_fov: f64,
    pub lidar_max_range: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        Self {
            mass: 3.74,
            inertia_z: 0.04712,
            lf: 0.15875,
            lr: 0.17145,
            cg_height: 0.074,
            mu: 1.0489,
            cs_front: 4.718,
            cs_rear: 5.4562,
            steer_max: 0.4189,
            steer_rate_max: 3.2,
            v_max: 20.0,
            accel_max: 9.51,
            v_accel_switch: 7.319,
            v_kinematic: 0.5,
            dt: 0.01,
            lidar_beams: 108,
            lidar_fov: 4.7,
            lidar_max_range: 10.0,
        }
    }
}

impl VehicleConfig {
    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Largest path curvature reachable at full steering lock.
    pub fn kappa_max(&self) -> f64 {
        self.steer_max.tan() / self.wheelbase()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub replan_period: f64,
    pub n_long: usize,
    pub n_lat: usize,
    pub lookahead_min: f64,
    pub lookahead_max: f64,
    /// Full lateral extent of the lattice; `None` uses local track width minus two footprints.
    pub lateral_span: Option<f64>,
    pub velocity_factors: Vec<f64>,
    pub pure_pursuit_lookahead: f64,
    pub hysteresis_points: usize,
    /// Simpson intervals used to integrate clothoid positions (even).
    pub clothoid_samples: usize,
    pub clothoid_iterations: usize,
    pub normalize_costs: bool,
    pub lateral_accel_max: f64,
    /// Pin the velocity scale to 1 and optimize only the seven cost weights.
    pub freeze_gamma_v: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            replan_period: 0.1,
            n_long: 8,
            n_lat: 9,
            lookahead_min: 2.0,
            lookahead_max: 4.0,
            lateral_span: None,
            velocity_factors: vec![0.8, 0.9, 1.0],
            pure_pursuit_lookahead: 1.2,
            hysteresis_points: 20,
            clothoid_samples: 64,
            clothoid_iterations: 50,
            normalize_costs: true,
            lateral_accel_max: 8.0,
            freeze_gamma_v: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcsConfig {
    /// Step size of a PCS action in normalized units.
    pub epsilon: f64,
    /// Value substituted for an infinite per-step time-to-collision (seconds).
    pub ttc_clamp: f64,
}

impl Default for PcsConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, ttc_clamp: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsConfig {
    pub population: usize,
    pub elite_ratio: f64,
    /// Initial step size as a fraction of the (unit-normalized) box span.
    pub sigma0: f64,
    pub generations: usize,
    pub eval_pairings: usize,
    pub eval_duration: f64,
    pub exploration_bonus: bool,
    pub d_near: f64,
    pub n_dpp: usize,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            population: 100,
            elite_ratio: 0.5,
            sigma0: 0.3,
            generations: 50,
            eval_pairings: 120,
            eval_duration: 8.0,
            exploration_bonus: false,
            d_near: 0.3,
            n_dpp: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    /// Game steps per race; step 1 observes, steps 2..=m follow a decision.
    pub m: usize,
    pub step_duration: f64,
    pub n_init: usize,
    /// Number of collection passes accumulated into each regret target.
    pub passes: usize,
    /// Action taken when every clipped regret is zero (index into the action set).
    pub default_action: usize,
    /// Lateral offset of each car from the centerline at the start line.
    pub start_offset: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self { m: 4, step_duration: 8.0, n_init: 20, passes: 1, default_action: 0, start_offset: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Relu,
    /// Linear hidden layer; used to validate gradients.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub activation: Activation,
    pub alpha: f64,
    pub batch: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub val_fraction: f64,
    pub clip_output: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 2048,
            activation: Activation::LeakyRelu,
            alpha: 0.01,
            batch: 1024,
            epochs: 2000,
            lr0: 0.005,
            plateau_patience: 10,
            plateau_factor: 0.5,
            val_fraction: 0.1,
            clip_output: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_ego: usize,
    pub n_opp: usize,
    pub n_starts: usize,
    /// Opponent kinds, one report row each: `non-gt`, `random`, `unseen`.
    pub opponents: Vec<String>,
    /// Speed scale of the fixed raceline-following opponent.
    pub unseen_speed_scale: f64,
    pub unseen_lookahead: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_ego: 20,
            n_opp: 20,
            n_starts: 5,
            opponents: vec!["non-gt".into(), "random".into(), "unseen".into()],
            unseen_speed_scale: 0.9,
            unseen_lookahead: 1.5,
        }
    }
}
