use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Method, ScenarioConfig, TrialMetrics, TrialOutcome};
use crate::detection::CheckpointId;
use crate::scheduling::Mode;
use crate::swarm::Group;
use crate::Result;

/// Column order of `metrics.csv`.
pub const METRICS_HEADER: [&str; 18] = [
    "trial",
    "seed",
    "method",
    "mode",
    "coverage_before",
    "coverage_after",
    "improvement",
    "abs_count",
    "config1_units",
    "config2_units",
    "per_abs_improvement",
    "checkpoints",
    "red_checkpoints",
    "path_length",
    "mean_completion_time",
    "completion_times",
    "small_groups",
    "big_groups",
];

/// Five-number summary plus mean. Quartiles interpolate linearly between
/// order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    /// NaNs are dropped. An empty input gives all-NaN statistics.
    pub fn from_values(values: &[f64]) -> BoxStats {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| -> f64 {
            if v.is_empty() {
                return f64::NAN;
            }
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        BoxStats {
            count: v.len(),
            min: q(0.0),
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: q(1.0),
            mean: if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub seed: u64,
    pub method: Method,
    pub mode: Mode,
    pub coverage_before: BoxStats,
    pub coverage_after: BoxStats,
    pub improvement: BoxStats,
    pub abs_count: BoxStats,
    pub per_abs_improvement: BoxStats,
    pub mean_completion_time: BoxStats,
    pub red_checkpoints: BoxStats,
}

impl Summary {
    pub fn from_metrics(cfg: &ScenarioConfig, m: &[TrialMetrics]) -> Summary {
        let stat = |f: &dyn Fn(&TrialMetrics) -> f64| {
            BoxStats::from_values(&m.iter().map(f).collect::<Vec<_>>())
        };
        Summary {
            trials: m.len(),
            seed: cfg.seed,
            method: cfg.method,
            mode: cfg.mode,
            coverage_before: stat(&|t| t.coverage_before),
            coverage_after: stat(&|t| t.coverage_after),
            improvement: stat(&|t| t.improvement()),
            abs_count: stat(&|t| t.abs_count as f64),
            per_abs_improvement: stat(&|t| t.per_abs_improvement),
            mean_completion_time: stat(&|t| t.mean_completion()),
            red_checkpoints: stat(&|t| t.red_checkpoints as f64),
        }
    }

    fn rows(&self) -> [(&'static str, &BoxStats); 7] {
        [
            ("coverage_before", &self.coverage_before),
            ("coverage_after", &self.coverage_after),
            ("improvement", &self.improvement),
            ("abs_count", &self.abs_count),
            ("per_abs_improvement", &self.per_abs_improvement),
            ("mean_completion_time", &self.mean_completion_time),
            ("red_checkpoints", &self.red_checkpoints),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub config: ScenarioConfig,
    pub metrics: Vec<TrialMetrics>,
    pub summary: Summary,
    /// Full outcome of trial 0, kept for heatmaps and trajectories.
    pub first: Option<TrialOutcome>,
}

fn join_groups(groups: &[Vec<CheckpointId>]) -> String {
    groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|id| id.0.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("|")
}

impl MonteCarloReport {
    /// One row per trial. List columns use `;` between times, `|` between
    /// groups and spaces between checkpoint ids.
    pub fn write_metrics_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(METRICS_HEADER)?;
        for m in &self.metrics {
            let times: Vec<String> = m
                .red_checkpoint_completion_times
                .iter()
                .map(|t| t.to_string())
                .collect();
            out.write_record([
                m.trial.to_string(),
                m.seed.to_string(),
                m.method.as_str().to_string(),
                match m.mode {
                    Mode::Offline => "offline".into(),
                    Mode::Online => "online".into(),
                },
                m.coverage_before.to_string(),
                m.coverage_after.to_string(),
                m.improvement().to_string(),
                m.abs_count.to_string(),
                m.config1_units.to_string(),
                m.config2_units.to_string(),
                m.per_abs_improvement.to_string(),
                m.checkpoints.to_string(),
                m.red_checkpoints.to_string(),
                m.path_length.to_string(),
                m.mean_completion().to_string(),
                times.join(";"),
                join_groups(&m.small_groups),
                join_groups(&m.big_groups),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Columns `metric,count,min,q1,median,q3,max,mean`.
    pub fn write_boxplot_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "metric", "count", "min", "q1", "median", "q3", "max", "mean",
        ])?;
        for (name, s) in self.summary.rows() {
            out.write_record([
                name.to_string(),
                s.count.to_string(),
                s.min.to_string(),
                s.q1.to_string(),
                s.median.to_string(),
                s.q3.to_string(),
                s.max.to_string(),
                s.mean.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes every output of a run into `dir`, creating it if needed. Returns
/// the file names written.
pub fn write_outputs(report: &MonteCarloReport, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    report.write_metrics_csv(create(dir, "metrics.csv")?)?;
    written.push("metrics.csv".to_string());
    report.write_boxplot_csv(create(dir, "boxplot.csv")?)?;
    written.push("boxplot.csv".to_string());
    let mut w = create(dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &report.summary)?;
    writeln!(w)?;
    written.push("summary.json".to_string());
    let mut w = create(dir, "config.json")?;
    serde_json::to_writer_pretty(&mut w, &report.config)?;
    writeln!(w)?;
    written.push("config.json".to_string());

    let Some(first) = &report.first else {
        return Ok(written);
    };
    first.before.write_csv(create(dir, "heatmap_before.csv")?)?;
    first.after.write_csv(create(dir, "heatmap_after.csv")?)?;
    written.push("heatmap_before.csv".to_string());
    written.push("heatmap_after.csv".to_string());
    if let Some(g) = &first.graph {
        let mut w = create(dir, "checkpoints.json")?;
        serde_json::to_writer_pretty(&mut w, g)?;
        writeln!(w)?;
        written.push("checkpoints.json".to_string());
    }
    let mut w = create(dir, "deployment.json")?;
    serde_json::to_writer_pretty(&mut w, &first.deployment)?;
    writeln!(w)?;
    written.push("deployment.json".to_string());
    if let Some(log) = &first.flight {
        for (u, su) in first.deployment.units.iter().enumerate() {
            let agents: Vec<usize> = log
                .groups
                .iter()
                .enumerate()
                .filter(|(_, g)| match g {
                    Group::Single(k) => *k == u,
                    Group::Swarm { id, .. } => *id == u,
                })
                .map(|(i, _)| i)
                .collect();
            let name = match su.unit.kind {
                crate::scheduling::UnitKind::Config1 => format!("trajectory_single{u}.csv"),
                crate::scheduling::UnitKind::Config2 => format!("trajectory_swarm{u}.csv"),
            };
            log.write_csv(create(dir, &name)?, &agents)?;
            written.push(name);
        }
    }
    Ok(written)
}
