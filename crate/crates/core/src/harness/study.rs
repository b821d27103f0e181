use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::{MonteCarloReport, Summary};
use super::{
    build_scenario, checkpoint_graph, completion_times, detect_and_schedule, patrol_arrivals,
    run_method, trial_seed, ScenarioConfig, Scene, TrialMetrics,
};
use crate::detection::StartPolicy;
use crate::scheduling::{expected_completion, expected_discovery_time, DelayParams, Mode};
use crate::{Error, Result, Seed};

fn run_all(cfg: &ScenarioConfig) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let mut results: Vec<(usize, Result<_>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let out = build_scenario(cfg, trial_seed(cfg, t))
                .and_then(|scene| run_method(&scene, cfg, cfg.method, t));
            (t, out)
        })
        .collect();
    results.sort_by_key(|(t, _)| *t);
    let mut metrics = Vec::with_capacity(results.len());
    let mut first = None;
    for (t, r) in results {
        let out = r?;
        metrics.push(out.metrics.clone());
        if t == 0 {
            first = Some(out);
        }
    }
    Ok(MonteCarloReport {
        summary: Summary::from_metrics(cfg, &metrics),
        config: cfg.clone(),
        metrics,
        first,
    })
}

/// Runs `cfg.trials` independent trials on the global thread pool.
pub fn monte_carlo(cfg: &ScenarioConfig) -> Result<MonteCarloReport> {
    run_all(cfg)
}

/// As [`monte_carlo`] on a dedicated pool of `workers` threads.
pub fn monte_carlo_with_workers(cfg: &ScenarioConfig, workers: usize) -> Result<MonteCarloReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    pool.install(|| run_all(cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStudyRow {
    pub policy: String,
    pub metrics: TrialMetrics,
}

/// Runs the configured method on one scene once per start policy.
pub fn visiting_order_study(
    scene: &Scene,
    cfg: &ScenarioConfig,
    policies: &[StartPolicy],
) -> Result<Vec<OrderStudyRow>> {
    policies
        .par_iter()
        .map(|&p| {
            let c = ScenarioConfig {
                start_policy: p,
                ..cfg.clone()
            };
            Ok(OrderStudyRow {
                policy: p.name(),
                metrics: run_method(scene, &c, c.method, 0)?.metrics,
            })
        })
        .collect()
}

/// Empirical completion times against the closed-form delay model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub trials: usize,
    pub reds: usize,
    pub beta_configured: f64,
    /// Path-length constant fitted on a disjoint calibration batch.
    pub beta_fitted: f64,
    /// Checkpoint density fitted on the calibration batch, per m².
    pub lambda_fitted: f64,
    /// Mean base-to-red distance, m.
    pub mean_r: f64,
    pub discovery_time: f64,
    pub offline_model: f64,
    pub online_model: f64,
    pub offline_measured: f64,
    pub online_measured: f64,
}

impl DelayReport {
    pub fn gap_measured(&self) -> f64 {
        self.online_measured - self.offline_measured
    }

    pub fn gap_model(&self) -> f64 {
        self.online_model - self.offline_model
    }
}

struct DelaySample {
    checkpoints: usize,
    walk: f64,
    reds: Vec<f64>,
    offline: Vec<f64>,
    online: Vec<f64>,
}

fn delay_sample(cfg: &ScenarioConfig, seed: Seed) -> Result<DelaySample> {
    let scene = build_scenario(cfg, seed)?;
    let base = scene.region.origin;
    let Some(graph) = checkpoint_graph(&scene, cfg, cfg.method)? else {
        return Ok(DelaySample {
            checkpoints: 0,
            walk: 0.0,
            reds: vec![],
            offline: vec![],
            online: vec![],
        });
    };
    let walk = patrol_arrivals(&graph, base, 1.0)
        .last()
        .copied()
        .unwrap_or(0.0);
    let checkpoints = graph.len();
    let mut times = [Vec::new(), Vec::new()];
    let mut reds = Vec::new();
    for (k, mode) in [Mode::Offline, Mode::Online].into_iter().enumerate() {
        let c = ScenarioConfig {
            mode,
            ..cfg.clone()
        };
        let (g, dep) = detect_and_schedule(graph.clone(), &scene, &c)?;
        times[k] = completion_times(&g, &dep, base, cfg.patrol_speed, None);
        if k == 0 {
            reds = g
                .red_ids()
                .iter()
                .map(|id| (g.get(*id).expect("known id").position - base).norm())
                .collect();
        }
    }
    let [offline, online] = times;
    Ok(DelaySample {
        checkpoints,
        walk,
        reds,
        offline,
        online,
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Measures red-checkpoint completion times over `cfg.trials` scenes for both
/// modes. The path-length constant and checkpoint density in the model are
/// fitted on `calibration` further scenes drawn from disjoint seeds. The
/// region must be square and the patrol base is its origin corner.
pub fn delay_study(cfg: &ScenarioConfig, calibration: usize) -> Result<DelayReport> {
    cfg.validate()?;
    if calibration == 0 {
        return Err(Error::param("calibration", "must be at least 1"));
    }
    let side = cfg.region.width;
    if (cfg.region.height - side).abs() > 1e-9 {
        return Err(Error::param("region", "delay model needs a square region"));
    }
    let cal_master = cfg.master_seed().derive(u64::MAX);
    let cal: Vec<DelaySample> = (0..calibration)
        .into_par_iter()
        .map(|t| delay_sample(cfg, cal_master.derive(t as u64)))
        .collect::<Result<_>>()?;
    let area = side * side;
    let lambda_fitted = mean(cal.iter().map(|s| s.checkpoints as f64)) / area;
    let beta_fitted = mean(cal.iter().map(|s| s.walk)) / (area * lambda_fitted.sqrt());

    let runs: Vec<DelaySample> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| delay_sample(cfg, trial_seed(cfg, t)))
        .collect::<Result<_>>()?;
    let mean_r = mean(runs.iter().flat_map(|s| s.reds.iter().copied()));
    let p = DelayParams {
        beta: beta_fitted,
        speed_v: cfg.patrol_speed,
        side_a: side,
        lambda_cp: lambda_fitted,
    };
    Ok(DelayReport {
        trials: cfg.trials,
        reds: runs.iter().map(|s| s.reds.len()).sum(),
        beta_configured: cfg.beta,
        beta_fitted,
        lambda_fitted,
        mean_r,
        discovery_time: expected_discovery_time(&p),
        offline_model: expected_completion(&p, mean_r, Mode::Offline),
        online_model: expected_completion(&p, mean_r, Mode::Online),
        offline_measured: mean(runs.iter().flat_map(|s| s.offline.iter().copied())),
        online_measured: mean(runs.iter().flat_map(|s| s.online.iter().copied())),
    })
}
