//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use holecover::channel::{nakagami_pdf, sample_power_gains};
use holecover::detection::Label;
use holecover::geometry::{covering_bounds, hex_cover, matern_thin, sample_ppp, Region};
use holecover::harness::{
    delay_study, monte_carlo, monte_carlo_with_workers, Method, MonteCarloReport, ScenarioConfig,
};
use holecover::scheduling::{abs_count_bounds, window_policy, Action};
use holecover::swarm::{
    case_study, potential, potential_gradient, simulate, ControlParams, Disturbance, TrajectoryLog,
};
use holecover::{Seed, Vec3};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn decision_table() -> Outcome {
    use Label::{Blue as B, Red as R};
    let table = [
        ([R, B, R], Action::DeployConfig1),
        ([R, B, B], Action::DeployConfig1),
        ([B, R, B], Action::DeployConfig1),
        ([R, R, R], Action::DeployConfig2),
        ([R, R, B], Action::DeployConfig2),
        ([B, R, R], Action::DeployConfig2),
        ([B, B, R], Action::NoAction),
        ([B, B, B], Action::NoAction),
    ];
    let wrong: Vec<String> = table
        .iter()
        .filter(|(w, a)| window_policy(w[0], w[1], w[2]).action != *a)
        .map(|(w, _)| w.iter().map(|l| l.as_char()).collect())
        .collect();
    check(
        wrong.is_empty(),
        format!("8 triplets, mismatches {wrong:?}"),
    )
}

fn covering_sandwich() -> Outcome {
    let mut rng = Seed(2024).rng();
    let mut upper_misses = 0;
    for _ in 0..50 {
        let region = Region::new(
            rng.random_range(50.0..3000.0),
            rng.random_range(50.0..3000.0),
        )
        .unwrap();
        let r = rng.random_range(20.0..800.0);
        let b = covering_bounds(&region, r).map_err(|e| e.to_string())?;
        let n = hex_cover(&region, r).map_err(|e| e.to_string())?.len() as f64;
        if !(b.lower <= n && b.lower <= b.upper) {
            return Err(format!(
                "{region:?} R {r}: lower {} upper {} hex {n}",
                b.lower, b.upper
            ));
        }
        if n > b.upper {
            upper_misses += 1;
        }
    }
    Ok(format!(
        "50 cases, hex count above upper bound in {upper_misses}"
    ))
}

fn config(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ScenarioConfig::from_path(&path).expect("shipped config loads")
}

fn fleet_bounds() -> Outcome {
    let cfg = config("full_scale.json");
    let (r1, r2) = cfg.fleet_radii().map_err(|e| e.to_string())?;
    let b = abs_count_bounds(&cfg.region, r1, r2).map_err(|e| e.to_string())?;
    let ok = (b.min_int as i64 - 3).abs() <= 1 && (b.max_int as i64 - 80).abs() <= 1;
    check(
        ok,
        format!(
            "R1 {r1:.1} m, R2 {r2:.1} m, bounds [{}, {}] from [{:.2}, {:.2}]",
            b.min_int, b.max_int, b.min, b.max
        ),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

fn nakagami() -> Outcome {
    let (m, omega) = (3.0, 1.0);
    let g = sample_power_gains(m, omega, 100_000, Seed(77)).map_err(|e| e.to_string())?;
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let norm = simpson(|x| nakagami_pdf(x, m, omega).unwrap(), 0.0, 20.0, 200_000);
    let ok = (mean - omega).abs() <= 0.01 * omega
        && (var - omega * omega / m).abs() <= 0.05 * omega * omega / m
        && (norm - 1.0).abs() <= 1e-6;
    check(
        ok,
        format!("mean {mean:.4}, variance {var:.4}, pdf integral {norm:.9}"),
    )
}

fn matern() -> Outcome {
    let (lambda, d) = (50e-6, 50.0);
    let inner = Region::square(1000.0).unwrap();
    let outer = inner.expanded(d);
    let mut total = 0usize;
    for f in 0..1000u64 {
        let parent = sample_ppp(&outer, lambda, Seed(31).derive(f)).map_err(|e| e.to_string())?;
        let kept = matern_thin(&parent, d);
        if let Some(m) = kept.min_pairwise_distance() {
            if m < d {
                return Err(format!("field {f}: pair {m:.3} m apart"));
            }
        }
        total += kept.points.iter().filter(|p| inner.contains(p)).count();
    }
    let measured = total as f64 / (1000.0 * inner.area());
    let expected = lambda * (-lambda * PI * d * d).exp();
    let rel = measured / expected - 1.0;
    check(
        rel.abs() <= 0.10,
        format!(
            "1000 fields hard-core, intensity {:.3}/km² vs {:.3}/km² ({:+.2}%)",
            measured * 1e6,
            expected * 1e6,
            rel * 100.0
        ),
    )
}

fn gradient() -> Outcome {
    let (rc, rd) = (10.0, 30.0);
    let mut rng = Seed(5).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.random_range(rc + 0.01..rd - 0.01);
        let theta = rng.random_range(0.0..2.0 * PI);
        let z: f64 = rng.random_range(-1.0..1.0);
        let dir = Vec3::new(
            (1.0 - z * z).sqrt() * theta.cos(),
            (1.0 - z * z).sqrt() * theta.sin(),
            z,
        );
        let xi = Vec3::new(3.0, -2.0, 100.0);
        let xk = xi + r * dir;
        // Step scaled to the local length over which the barrier changes.
        let scale = ((r * r - rc * rc) / (2.0 * r)).min(rd - r);
        let h = 1e-4 * scale;
        let g = potential_gradient(&xi, &xk, rc, rd).map_err(|e| e.to_string())?;
        let mut fd = Vec3::zeros();
        for a in 0..3 {
            let (mut up, mut down) = (xi, xi);
            up[a] += h;
            down[a] -= h;
            fd[a] = (potential(&up, &xk, rc, rd).unwrap() - potential(&down, &xk, rc, rd).unwrap())
                / (2.0 * h);
        }
        worst = worst.max((g - fd).norm() / g.norm());
    }
    check(
        worst <= 1e-6,
        format!("100 separations, worst relative error {worst:.2e}"),
    )
}

struct CaseStudy {
    log: TrajectoryLog,
    runtime: Duration,
}

fn case_study_run() -> &'static Result<CaseStudy, String> {
    static RUN: OnceLock<Result<CaseStudy, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let p = ControlParams::default();
        let agents = case_study(Seed(1), &p).map_err(|e| e.to_string())?;
        let kick = Disturbance {
            time: 500.0,
            impulse: Vec3::new(5.0, 10.0, -3.0),
            agents: None,
        };
        let start = Instant::now();
        let log = simulate(&agents, &p, 600.0, 0.01, &[kick], 100).map_err(|e| e.to_string())?;
        Ok(CaseStudy {
            log,
            runtime: start.elapsed(),
        })
    })
}

fn swarm_case() -> Outcome {
    let run = case_study_run().as_ref().map_err(|e| e.clone())?;
    let log = &run.log;
    let settle = log.settling_time(0.0, 500.0, 0.5, 0.05);
    let resettle = log.settling_time(500.0, f64::INFINITY, 0.5, 0.05);
    let min_d = log.min_distance();
    let ok = settle.is_some_and(|t| t <= 400.0)
        && resettle.is_some_and(|t| t - 500.0 <= 100.0)
        && min_d > 10.0
        && run.runtime < Duration::from_secs(120);
    let secs = |t: Option<f64>| t.map_or("never".to_string(), |t| format!("{t:.2} s"));
    check(
        ok,
        format!(
            "settled at {}, again {} after the impulse, min distance {min_d:.2} m, flight {:.1?}",
            secs(settle),
            secs(resettle.map(|t| t - 500.0)),
            run.runtime
        ),
    )
}

fn lyapunov() -> Outcome {
    let run = case_study_run().as_ref().map_err(|e| e.clone())?;
    let v = run.log.lyapunov_violations(1e-6);
    check(
        v.is_empty(),
        format!(
            "{} steps checked, {} increases",
            run.log.steps.len() - 1,
            v.len()
        ),
    )
}

fn desk_runs() -> &'static Result<[MonteCarloReport; 5], String> {
    static RUNS: OnceLock<Result<[MonteCarloReport; 5], String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let regular = config("desk_regular.json");
        let sparse = config("desk_sparse.json");
        let run = |c: &ScenarioConfig, m: Method| {
            monte_carlo(&ScenarioConfig {
                method: m,
                ..c.clone()
            })
            .map_err(|e| e.to_string())
        };
        Ok([
            run(&regular, Method::Proposed)?,
            run(&regular, Method::Grid)?,
            run(&sparse, Method::Proposed)?,
            run(&sparse, Method::Bsl)?,
            run(&sparse, Method::Grid)?,
        ])
    })
}

fn coverage_recovery() -> Outcome {
    let [regular, _, sparse, _, _] = desk_runs().as_ref().map_err(|e| e.clone())?;
    let lowered = [regular, sparse]
        .iter()
        .flat_map(|r| &r.metrics)
        .filter(|m| m.abs_count > 0 && m.coverage_after < m.coverage_before)
        .count();
    let (ri, si) = (
        regular.summary.improvement.median,
        sparse.summary.improvement.median,
    );
    let ok = lowered == 0 && si >= 0.15 && (0.02..=0.10).contains(&ri);
    check(
        ok,
        format!(
            "{} trials, {lowered} lowered; regular {:.3} -> {:.3} (+{ri:.3}), sparse {:.3} -> {:.3} (+{si:.3})",
            regular.metrics.len() + sparse.metrics.len(),
            regular.summary.coverage_before.median,
            regular.summary.coverage_after.median,
            sparse.summary.coverage_before.median,
            sparse.summary.coverage_after.median
        ),
    )
}

fn baseline_ordering() -> Outcome {
    let [regular, regular_grid, sparse, sparse_bsl, sparse_grid] =
        desk_runs().as_ref().map_err(|e| e.clone())?;
    let fewer = regular
        .metrics
        .iter()
        .zip(&regular_grid.metrics)
        .filter(|(p, g)| p.abs_count < g.abs_count)
        .count();
    let share = fewer as f64 / regular.metrics.len() as f64;
    let grid = sparse_grid.summary.coverage_after.median;
    let bsl = sparse_bsl.summary.coverage_after.median;
    let prop = sparse.summary.coverage_after.median;
    let ok = share >= 0.90 && grid <= bsl && grid <= prop;
    check(
        ok,
        format!(
            "regular: fewer ABSs than grid in {:.0}% (median {} vs {}); sparse coverage grid {grid:.3}, BSL {bsl:.3}, proposed {prop:.3}",
            share * 100.0,
            regular.summary.abs_count.median,
            regular_grid.summary.abs_count.median
        ),
    )
}

fn delay() -> Outcome {
    let cfg = ScenarioConfig {
        region: Region::square(1000.0).unwrap(),
        trials: 200,
        ..config("desk_sparse.json")
    };
    let r = delay_study(&cfg, 200).map_err(|e| e.to_string())?;
    let off = r.offline_measured / r.offline_model - 1.0;
    let on = r.online_measured / r.online_model - 1.0;
    let gap = r.gap_measured() / (-r.discovery_time / 2.0) - 1.0;
    let ok = off.abs() <= 0.15 && on.abs() <= 0.15 && gap.abs() <= 0.15;
    check(
        ok,
        format!(
            "{} reds, fitted beta {:.3}; offline {:.1} s vs {:.1} s ({:+.1}%), online {:.1} s vs {:.1} s ({:+.1}%), gap {:.1} s vs {:.1} s ({:+.1}%)",
            r.reds,
            r.beta_fitted,
            r.offline_measured,
            r.offline_model,
            off * 100.0,
            r.online_measured,
            r.online_model,
            on * 100.0,
            r.gap_measured(),
            -r.discovery_time / 2.0,
            gap * 100.0
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = config("desk_sparse.json");
    let bytes = |w: usize| -> Result<Vec<u8>, String> {
        let mut buf = Vec::new();
        monte_carlo_with_workers(&cfg, w)
            .and_then(|r| r.write_metrics_csv(&mut buf))
            .map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let a = bytes(1)?;
    let b = bytes(4)?;
    let c = bytes(4)?;
    check(
        a == b && b == c,
        format!("{} bytes of metrics.csv at 1 and 4 workers", a.len()),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("decision table", decision_table),
        ("covering sandwich", covering_sandwich),
        ("fleet bounds at full scale", fleet_bounds),
        ("nakagami sampler", nakagami),
        ("matern hard-core", matern),
        ("gradient check", gradient),
        ("swarm case study", swarm_case),
        ("lyapunov monotonicity", lyapunov),
        ("coverage recovery", coverage_recovery),
        ("baseline ordering", baseline_ordering),
        ("delay analysis", delay),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        match out {
            Ok(d) => println!("PASS {name}: {d} [{took:.2?}]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{took:.2?}]");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
