//! Scenario assembly, the end-to-end trial pipeline, Monte Carlo driver and
//! baselines.

mod config;
mod output;
mod study;

pub use config::{ChannelConfig, Method, ScenarioConfig};
pub use output::{write_outputs, BoxStats, MonteCarloReport, Summary, METRICS_HEADER};
pub use study::{
    delay_study, monte_carlo, monte_carlo_with_workers, visiting_order_study, DelayReport,
    OrderStudyRow,
};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::channel::{build_coverage_map, CoverageMap, FadingMode, Transmitter};
use crate::detection::{self, CheckpointGraph, CheckpointId};
use crate::geometry::{sample_ppp_with, Region};
use crate::scheduling::{schedule_offline, schedule_online, Deployment, Mode, UnitKind};
use crate::swarm::{self, TrajectoryLog};
use crate::{Error, Result, Seed, Vec2, Vec3};

/// Terrestrial network of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub seed: Seed,
    pub region: Region,
    /// Every BS site, including the guard band.
    pub bs_sites: Vec<Vec2>,
    pub active: Vec<bool>,
}

impl Scene {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn transmitters(&self, cfg: &ScenarioConfig) -> Vec<Transmitter> {
        self.bs_sites
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(p, _)| Transmitter::terrestrial(*p, cfg.bs_height, cfg.bs_power()))
            .collect()
    }

    /// Sites inside the region, operational or not.
    pub fn sites_in_region(&self) -> Vec<Vec2> {
        self.bs_sites
            .iter()
            .filter(|p| self.region.contains(p))
            .copied()
            .collect()
    }
}

/// Seed of trial `trial` under the config's master seed.
pub fn trial_seed(cfg: &ScenarioConfig, trial: usize) -> Seed {
    cfg.master_seed().derive(trial as u64)
}

/// Draws the BS field for `seed` and switches off a uniformly chosen
/// `bs_failure_fraction` of the sites.
pub fn build_scenario(cfg: &ScenarioConfig, seed: Seed) -> Result<Scene> {
    cfg.validate()?;
    let field = sample_ppp_with(
        &cfg.region.expanded(cfg.bs_guard),
        cfg.bs_density(),
        &mut seed.derive(0).rng(),
    )?;
    let n = field.points.len();
    let failed = (cfg.bs_failure_fraction * n as f64).round() as usize;
    let mut active = vec![true; n];
    for i in sample(&mut seed.derive(1).rng(), n, failed) {
        active[i] = false;
    }
    Ok(Scene {
        seed,
        region: cfg.region,
        bs_sites: field.points,
        active,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub mode: Mode,
    pub coverage_before: f64,
    pub coverage_after: f64,
    pub abs_count: usize,
    pub config1_units: usize,
    pub config2_units: usize,
    /// Recovered area per deployed ABS, m².
    pub per_abs_improvement: f64,
    pub checkpoints: usize,
    pub red_checkpoints: usize,
    pub path_length: f64,
    /// Completion time of every red checkpoint, seconds.
    pub red_checkpoint_completion_times: Vec<f64>,
    /// Checkpoints served by each single ABS.
    pub small_groups: Vec<Vec<CheckpointId>>,
    /// Checkpoints served by each swarm.
    pub big_groups: Vec<Vec<CheckpointId>>,
}

impl TrialMetrics {
    pub fn improvement(&self) -> f64 {
        self.coverage_after - self.coverage_before
    }

    pub fn mean_completion(&self) -> f64 {
        let v: Vec<f64> = self
            .red_checkpoint_completion_times
            .iter()
            .copied()
            .filter(|t| t.is_finite())
            .collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

/// Everything a single trial produced.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub metrics: TrialMetrics,
    pub graph: Option<CheckpointGraph>,
    pub deployment: Deployment,
    pub before: CoverageMap,
    pub after: CoverageMap,
    pub flight: Option<TrajectoryLog>,
}

/// Runs the configured method on `scene`.
pub fn run_trial(scene: &Scene, cfg: &ScenarioConfig) -> Result<TrialOutcome> {
    run_method(scene, cfg, cfg.method, 0)
}

pub fn run_baseline_bsl(scene: &Scene, cfg: &ScenarioConfig) -> Result<TrialOutcome> {
    run_method(scene, cfg, Method::Bsl, 0)
}

pub fn run_baseline_grid(scene: &Scene, cfg: &ScenarioConfig) -> Result<TrialOutcome> {
    run_method(scene, cfg, Method::Grid, 0)
}

/// Patrol graph for `method`, `None` when there is nothing to visit.
pub fn checkpoint_graph(
    scene: &Scene,
    cfg: &ScenarioConfig,
    method: Method,
) -> Result<Option<CheckpointGraph>> {
    let cps = match method {
        Method::Grid => return detection::grid_checkpoints(&scene.region, cfg.grid_size).map(Some),
        Method::Proposed => detection::generate_checkpoints_with(
            &scene.region,
            cfg.lambda_cp(),
            cfg.hard_core_distance,
            cfg.matern,
            &mut scene.seed.derive(2).rng(),
        )?,
        Method::Bsl => scene
            .sites_in_region()
            .into_iter()
            .enumerate()
            .map(|(i, p)| detection::Checkpoint::new(i, p))
            .collect(),
    };
    if cps.is_empty() {
        return Ok(None);
    }
    detection::plan_patrol_path(cps, cfg.start_policy, cfg.two_opt).map(Some)
}

/// Labels `graph` and schedules units for it with `cfg.method`'s rules.
pub fn detect_and_schedule(
    graph: CheckpointGraph,
    scene: &Scene,
    cfg: &ScenarioConfig,
) -> Result<(CheckpointGraph, Deployment)> {
    let params = cfg.channel_params();
    let bs = scene.transmitters(cfg);
    let graph = detection::label_checkpoints(
        graph,
        &bs,
        &params,
        cfg.gamma_th(),
        cfg.patrol_height,
        cfg.label_fading,
    )?;
    let deployment = match cfg.mode {
        Mode::Offline => {
            let (_, r2) = cfg.fleet_radii()?;
            schedule_offline(&graph, &cfg.altitudes, r2)?
        }
        Mode::Online => {
            let stream: Vec<_> = graph
                .ordered()
                .iter()
                .map(|c| (c.position, c.label.expect("labelled")))
                .collect();
            schedule_online(&stream, &cfg.altitudes, &cfg.online_options(cfg.method)?)?
        }
    };
    Ok((graph, deployment))
}

/// Coverage map at UE height with the given deployment in the air.
pub fn coverage_map(
    scene: &Scene,
    cfg: &ScenarioConfig,
    deployment: Option<&Deployment>,
) -> Result<CoverageMap> {
    let units: Vec<_> = deployment
        .map(|d| {
            d.units
                .iter()
                .map(|u| u.unit.to_aerial(cfg.abs_power()))
                .collect()
        })
        .unwrap_or_default();
    build_coverage_map(
        &scene.region,
        &scene.transmitters(cfg),
        &units,
        &cfg.channel_params(),
        cfg.gamma_th(),
        cfg.grid_resolution,
        cfg.ue_height,
        FadingMode::Mean,
    )
}

/// Patrol arrival time at each checkpoint in visiting order, starting from
/// the region's origin corner.
pub fn patrol_arrivals(graph: &CheckpointGraph, base: Vec2, speed: f64) -> Vec<f64> {
    let mut t = 0.0;
    let mut here = base;
    graph
        .ordered()
        .iter()
        .map(|c| {
            t += (c.position - here).norm() / speed;
            here = c.position;
            t
        })
        .collect()
}

/// Completion time of every served red: dispatch time plus travel from the
/// base, but never before the red was assigned. `travel` overrides the
/// straight-line travel time per unit.
pub fn completion_times(
    graph: &CheckpointGraph,
    deployment: &Deployment,
    base: Vec2,
    speed: f64,
    travel: Option<&[f64]>,
) -> Vec<f64> {
    let arrivals = patrol_arrivals(graph, base, speed);
    let ordered = graph.ordered();
    let n = arrivals.len();
    let mut out = Vec::new();
    for (k, u) in deployment.units.iter().enumerate() {
        let dispatch = match deployment.mode {
            Mode::Offline => arrivals[n - 1],
            Mode::Online => arrivals[u.decision_index.min(n) - 1],
        };
        for (&j, &a) in u.targets.iter().zip(&u.assigned) {
            let fly = match travel {
                Some(t) => t[k],
                None => (ordered[j].position - base).norm() / speed,
            };
            out.push((dispatch + fly).max(arrivals[a.min(n) - 1]));
        }
    }
    out
}

fn groupings(
    graph: &CheckpointGraph,
    deployment: &Deployment,
    kind: UnitKind,
) -> Vec<Vec<CheckpointId>> {
    let ids = &graph.visit_order;
    deployment
        .units
        .iter()
        .filter(|u| u.unit.kind == kind)
        .map(|u| u.targets.iter().map(|&j| ids[j]).collect())
        .collect()
}

/// Flies every unit from takeoff pads near the base and returns the log and
/// per-unit arrival times (NaN if a unit never settles).
pub fn fly_deployment(
    deployment: &Deployment,
    cfg: &ScenarioConfig,
) -> Result<(TrajectoryLog, Vec<f64>)> {
    let units: Vec<_> = deployment.units.iter().map(|u| u.unit.clone()).collect();
    let needed = deployment.abs_count();
    let cols = (needed as f64).sqrt().ceil().max(1.0) as usize;
    let spacing = 1.5 * cfg.control.r_d;
    let pads: Vec<Vec3> = (0..needed)
        .map(|k| {
            let o = cfg.region.origin;
            Vec3::new(
                o.x + spacing * (k % cols) as f64,
                o.y + spacing * (k / cols) as f64,
                0.0,
            )
        })
        .collect();
    let agents = swarm::agents_for_deployment(&units, &pads, 1.0)?;
    let record_every = (1.0 / cfg.flight_dt).round().max(1.0) as usize;
    let log = swarm::simulate(
        &agents,
        &cfg.control,
        cfg.flight_time,
        cfg.flight_dt,
        &[],
        record_every,
    )?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); units.len()];
    for (i, g) in log.groups.iter().enumerate() {
        let uid = match g {
            swarm::Group::Single(u) => *u,
            swarm::Group::Swarm { id, .. } => *id,
        };
        members[uid].push(i);
    }
    let arrival = members
        .iter()
        .map(|m| {
            let mut settled = f64::NAN;
            for s in &log.snapshots {
                let ok = m
                    .iter()
                    .all(|&i| (s.x[i] - log.destinations[i]).norm() < 0.5 && s.v[i].norm() < 0.05);
                if ok && settled.is_nan() {
                    settled = s.t;
                } else if !ok {
                    settled = f64::NAN;
                }
            }
            settled
        })
        .collect();
    Ok((log, arrival))
}

pub(crate) fn run_method(
    scene: &Scene,
    cfg: &ScenarioConfig,
    method: Method,
    trial: usize,
) -> Result<TrialOutcome> {
    let annotate = |e: Error| Error::Trial {
        trial,
        seed: scene.seed.0,
        source: Box::new(e),
    };
    let before = coverage_map(scene, cfg, None).map_err(annotate)?;
    let mut metrics = TrialMetrics {
        trial,
        seed: scene.seed.0,
        method,
        mode: cfg.mode,
        coverage_before: before.coverage_fraction(),
        coverage_after: before.coverage_fraction(),
        abs_count: 0,
        config1_units: 0,
        config2_units: 0,
        per_abs_improvement: 0.0,
        checkpoints: 0,
        red_checkpoints: 0,
        path_length: 0.0,
        red_checkpoint_completion_times: Vec::new(),
        small_groups: Vec::new(),
        big_groups: Vec::new(),
    };
    let Some(graph) = checkpoint_graph(scene, cfg, method).map_err(annotate)? else {
        return Ok(TrialOutcome {
            metrics,
            graph: None,
            deployment: Deployment {
                mode: cfg.mode,
                units: Vec::new(),
            },
            after: before.clone(),
            before,
            flight: None,
        });
    };
    let method_cfg;
    let cfg = if cfg.method == method {
        cfg
    } else {
        method_cfg = ScenarioConfig {
            method,
            ..cfg.clone()
        };
        &method_cfg
    };
    let (graph, deployment) = detect_and_schedule(graph, scene, cfg).map_err(annotate)?;
    let after = coverage_map(scene, cfg, Some(&deployment)).map_err(annotate)?;
    let (flight, travel) = if cfg.fly && !deployment.units.is_empty() {
        let (log, arrival) = fly_deployment(&deployment, cfg).map_err(annotate)?;
        (Some(log), Some(arrival))
    } else {
        (None, None)
    };
    metrics.coverage_after = after.coverage_fraction();
    metrics.abs_count = deployment.abs_count();
    metrics.config1_units = deployment.count(UnitKind::Config1);
    metrics.config2_units = deployment.count(UnitKind::Config2);
    if metrics.abs_count > 0 {
        metrics.per_abs_improvement =
            metrics.improvement() * scene.region.area() / metrics.abs_count as f64;
    }
    metrics.checkpoints = graph.len();
    metrics.red_checkpoints = graph.red_ids().len();
    metrics.path_length = graph.path_length;
    metrics.red_checkpoint_completion_times = completion_times(
        &graph,
        &deployment,
        scene.region.origin,
        cfg.patrol_speed,
        travel.as_deref(),
    );
    metrics.small_groups = groupings(&graph, &deployment, UnitKind::Config1);
    metrics.big_groups = groupings(&graph, &deployment, UnitKind::Config2);
    Ok(TrialOutcome {
        metrics,
        graph: Some(graph),
        deployment,
        before,
        after,
        flight,
    })
}
