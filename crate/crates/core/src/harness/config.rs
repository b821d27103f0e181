use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, FadingMode};
use crate::detection::StartPolicy;
use crate::geometry::{MaternKind, Region};
use crate::scheduling::{Altitudes, Mode, OnlineOptions};
use crate::swarm::ControlParams;
use crate::{Error, Result, Seed, Vec2};

/// Where checkpoints come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Hard-core random checkpoints with a nearest-neighbour patrol.
    #[default]
    Proposed,
    /// Checkpoints at every BS site in the region.
    Bsl,
    /// Cell centres of a uniform grid, serpentine order.
    Grid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Bsl => "bsl",
            Method::Grid => "grid",
        }
    }
}

/// Channel constants as they appear in a config file (dB at the boundary).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub m: f64,
    pub omega: f64,
    pub alpha_b: f64,
    pub alpha_al: f64,
    pub alpha_an: f64,
    pub env_a: f64,
    pub env_b: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    /// Terrestrial path gain at 1 m, dB.
    pub ref_gain_db: f64,
    /// Air-to-ground path gain at 1 m, dB.
    pub aerial_ref_gain_db: f64,
    pub interference_factor: f64,
    pub aerial_interference_factor: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            m: 3.0,
            omega: 1.0,
            alpha_b: 2.2,
            alpha_al: 2.0,
            alpha_an: 2.5,
            env_a: std::f64::consts::PI / 18.0,
            env_b: 0.11,
            bandwidth_hz: 15e6,
            noise_figure_db: 0.0,
            ref_gain_db: -90.5,
            aerial_ref_gain_db: -76.4,
            interference_factor: 0.003,
            aerial_interference_factor: 0.02,
        }
    }
}

impl ChannelConfig {
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            m: self.m,
            omega: self.omega,
            alpha_b: self.alpha_b,
            alpha_al: self.alpha_al,
            alpha_an: self.alpha_an,
            env_a: self.env_a,
            env_b: self.env_b,
            noise_power: channel::thermal_noise_watts(self.bandwidth_hz, self.noise_figure_db),
            ref_gain: channel::db_to_linear(self.ref_gain_db),
            aerial_ref_gain: channel::db_to_linear(self.aerial_ref_gain_db),
            interference_factor: self.interference_factor,
            aerial_interference_factor: self.aerial_interference_factor,
        }
    }
}

/// One experiment. Every field has a default; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub region: Region,
    pub bs_density_per_km2: f64,
    /// Share of BSs that are switched off; 0.7 gives the sparse scenario.
    pub bs_failure_fraction: f64,
    pub bs_height: f64,
    pub bs_power_dbm: f64,
    /// BSs are also drawn in a band this wide around the region.
    pub bs_guard: f64,
    pub channel: ChannelConfig,
    pub gamma_th_db: f64,
    pub abs_power_dbm: f64,
    pub lambda_cp_per_km2: f64,
    pub hard_core_distance: f64,
    pub matern: MaternKind,
    pub patrol_height: f64,
    pub ue_height: f64,
    pub altitudes: Altitudes,
    pub control: ControlParams,
    pub grid_resolution: f64,
    pub trials: usize,
    pub seed: u64,
    pub method: Method,
    pub mode: Mode,
    pub start_policy: StartPolicy,
    pub two_opt: bool,
    pub grid_size: usize,
    /// Fixed merge radius for online units. Defaults to each unit's
    /// coverage radius.
    pub dedup_radius: Option<f64>,
    pub flush: bool,
    pub label_fading: FadingMode,
    pub beta: f64,
    pub patrol_speed: f64,
    pub fly: bool,
    pub flight_time: f64,
    pub flight_dt: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            region: Region {
                width: 500.0,
                height: 500.0,
                origin: Vec2::zeros(),
            },
            bs_density_per_km2: 100.0,
            bs_failure_fraction: 0.0,
            bs_height: 30.0,
            bs_power_dbm: 43.0,
            bs_guard: 100.0,
            channel: ChannelConfig::default(),
            gamma_th_db: 11.3,
            abs_power_dbm: 37.0,
            lambda_cp_per_km2: 50.0,
            hard_core_distance: 50.0,
            matern: MaternKind::TypeII,
            patrol_height: 25.0,
            ue_height: 1.5,
            altitudes: Altitudes::default(),
            control: ControlParams::default(),
            grid_resolution: 10.0,
            trials: 100,
            seed: 1,
            method: Method::Proposed,
            mode: Mode::Online,
            start_policy: StartPolicy::LeftMost,
            two_opt: false,
            grid_size: 7,
            dedup_radius: None,
            flush: true,
            label_fading: FadingMode::Mean,
            beta: 0.7124,
            patrol_speed: 20.0,
            fly: false,
            flight_time: 600.0,
            flight_dt: 0.01,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    /// Desk-scale sparse scenario: 70% of BSs off.
    pub fn sparse() -> Self {
        ScenarioConfig {
            bs_failure_fraction: 0.7,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::config("<config>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.region
            .validate()
            .map_err(|e| Error::config("region", e.to_string()))?;
        if !(self.bs_density_per_km2 >= 0.0) {
            return Err(Error::config("bs_density_per_km2", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.bs_failure_fraction) {
            return Err(Error::config("bs_failure_fraction", "must lie in [0, 1)"));
        }
        positive("bs_height", self.bs_height)?;
        if !(self.bs_guard >= 0.0) {
            return Err(Error::config("bs_guard", "must be non-negative"));
        }
        if !(self.lambda_cp_per_km2 >= 0.0) {
            return Err(Error::config("lambda_cp_per_km2", "must be non-negative"));
        }
        positive("hard_core_distance", self.hard_core_distance)?;
        positive("patrol_height", self.patrol_height)?;
        positive("ue_height", self.ue_height)?;
        positive("altitudes.single", self.altitudes.single)?;
        positive("altitudes.base", self.altitudes.base)?;
        if !(self.altitudes.apex > self.altitudes.base) {
            return Err(Error::config(
                "altitudes.apex",
                "must exceed altitudes.base",
            ));
        }
        positive("grid_resolution", self.grid_resolution)?;
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.grid_size == 0 {
            return Err(Error::config("grid_size", "must be at least 1"));
        }
        if let Some(r) = self.dedup_radius {
            if !(r >= 0.0) {
                return Err(Error::config("dedup_radius", "must be non-negative"));
            }
        }
        positive("beta", self.beta)?;
        positive("patrol_speed", self.patrol_speed)?;
        positive("flight_time", self.flight_time)?;
        positive("flight_dt", self.flight_dt)?;
        if !self.gamma_th_db.is_finite() {
            return Err(Error::config("gamma_th_db", "must be finite"));
        }
        self.channel
            .params()
            .validate()
            .map_err(|e| Error::config("channel", e.to_string()))?;
        self.control
            .validate()
            .map_err(|e| Error::config("control", e.to_string()))?;
        Ok(())
    }

    pub fn channel_params(&self) -> ChannelParams {
        self.channel.params()
    }

    pub fn gamma_th(&self) -> f64 {
        channel::db_to_linear(self.gamma_th_db)
    }

    pub fn bs_power(&self) -> f64 {
        channel::dbm_to_watts(self.bs_power_dbm)
    }

    pub fn abs_power(&self) -> f64 {
        channel::dbm_to_watts(self.abs_power_dbm)
    }

    pub fn bs_density(&self) -> f64 {
        self.bs_density_per_km2 * 1e-6
    }

    pub fn lambda_cp(&self) -> f64 {
        self.lambda_cp_per_km2 * 1e-6
    }

    /// Online options for `method`. Units claim reds inside their coverage
    /// disk unless `dedup_radius` overrides it; the grid baseline never
    /// merges.
    pub fn online_options(&self, method: Method) -> Result<OnlineOptions> {
        if method == Method::Grid {
            return Ok(OnlineOptions::uniform(0.0, self.flush));
        }
        if let Some(r) = self.dedup_radius {
            return Ok(OnlineOptions::uniform(r, self.flush));
        }
        let (r1, r2) = self.fleet_radii()?;
        Ok(OnlineOptions {
            single_radius: r1,
            swarm_radius: r2,
            flush: self.flush,
        })
    }

    pub fn master_seed(&self) -> Seed {
        Seed(self.seed)
    }

    /// Single-ABS radius at the single-unit altitude and swarm radius built on
    /// the single-ABS radius at the apex altitude.
    pub fn fleet_radii(&self) -> Result<(f64, f64)> {
        let p = self.channel_params();
        let r = |h: f64| {
            channel::coverage_radius_single(
                self.abs_power(),
                self.gamma_th(),
                p.noise_power,
                p.alpha_al,
                h,
                p.aerial_ref_gain,
            )
        };
        let r1 = r(self.altitudes.single)?;
        let r2 = channel::coverage_radius_swarm(
            r(self.altitudes.apex)?,
            self.altitudes.apex,
            self.altitudes.base,
        )?;
        Ok((r1, r2))
    }
}
