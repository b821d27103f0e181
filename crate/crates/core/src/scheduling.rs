//! Hole classification, ABS scheduling, fleet bounds and delay estimates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::channel::AerialUnit;
use crate::detection::{CheckpointGraph, CheckpointId, Label};
use crate::geometry::{covering_bounds, Region};
use crate::{Error, Result, Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnitKind {
    /// A single ABS.
    Config1,
    /// Four ABSs in a regular tetrahedron.
    Config2,
}

impl UnitKind {
    pub fn abs_count(self) -> usize {
        match self {
            UnitKind::Config1 => 1,
            UnitKind::Config2 => 4,
        }
    }
}

/// Flight altitudes in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Altitudes {
    pub single: f64,
    pub apex: f64,
    pub base: f64,
}

impl Default for Altitudes {
    fn default() -> Self {
        Altitudes {
            single: 150.0,
            apex: 300.0,
            base: 150.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentUnit {
    pub kind: UnitKind,
    pub anchor: Vec2,
    pub positions: Vec<Vec3>,
    pub h_a: Option<f64>,
    pub h_b: Option<f64>,
}

impl DeploymentUnit {
    pub fn config1(anchor: Vec2, h: f64) -> Self {
        DeploymentUnit {
            kind: UnitKind::Config1,
            anchor,
            positions: vec![Vec3::new(anchor.x, anchor.y, h)],
            h_a: None,
            h_b: None,
        }
    }

    /// Tetrahedron with apex at `h_a` directly above `anchor` and base
    /// triangle at `h_b`.
    pub fn config2(anchor: Vec2, h_a: f64, h_b: f64) -> Result<Self> {
        let c = formation_centroid(anchor, h_a, h_b);
        let positions = tetrahedron_offsets(h_a, h_b)?
            .iter()
            .map(|o| c + o)
            .collect();
        Ok(DeploymentUnit {
            kind: UnitKind::Config2,
            anchor,
            positions,
            h_a: Some(h_a),
            h_b: Some(h_b),
        })
    }

    pub fn new(kind: UnitKind, anchor: Vec2, alt: &Altitudes) -> Result<Self> {
        match kind {
            UnitKind::Config1 => Ok(Self::config1(anchor, alt.single)),
            UnitKind::Config2 => Self::config2(anchor, alt.apex, alt.base),
        }
    }

    pub fn to_aerial(&self, tx_power: f64) -> AerialUnit {
        AerialUnit {
            members: self.positions.clone(),
            tx_power,
        }
    }
}

/// Centroid of the tetrahedron placed over `anchor`.
pub fn formation_centroid(anchor: Vec2, h_a: f64, h_b: f64) -> Vec3 {
    Vec3::new(anchor.x, anchor.y, h_b + (h_a - h_b) / 4.0)
}

/// Member offsets from the centroid of a regular tetrahedron whose apex sits
/// `h_a - h_b` above its base plane. The apex comes first.
pub fn tetrahedron_offsets(h_a: f64, h_b: f64) -> Result<[Vec3; 4]> {
    if !(h_a > h_b) {
        return Err(Error::param(
            "h_a",
            format!("apex {h_a} m must be above base {h_b} m"),
        ));
    }
    let dh = h_a - h_b;
    let edge = dh * 1.5f64.sqrt();
    let rb = edge / 3f64.sqrt();
    let base = |k: f64| {
        let th = 2.0 * std::f64::consts::PI * k / 3.0;
        Vec3::new(rb * th.cos(), rb * th.sin(), -dh / 4.0)
    };
    Ok([
        Vec3::new(0.0, 0.0, 0.75 * dh),
        base(0.0),
        base(1.0),
        base(2.0),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HoleSize {
    Small,
    Big,
}

/// Size tag for each red checkpoint, in visiting order. A red is small iff
/// its path neighbours are all blue.
pub fn classify_hole_offline(graph: &CheckpointGraph) -> Result<Vec<(CheckpointId, HoleSize)>> {
    let labels = graph
        .labels()
        .ok_or_else(|| Error::Precondition("graph has unvisited checkpoints".into()))?;
    let ids = &graph.visit_order;
    Ok((0..labels.len())
        .filter(|&i| labels[i].is_red())
        .map(|i| {
            let prev = i > 0 && labels[i - 1].is_red();
            let next = i + 1 < labels.len() && labels[i + 1].is_red();
            (
                ids[i],
                if prev || next {
                    HoleSize::Big
                } else {
                    HoleSize::Small
                },
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Offline,
    #[default]
    Online,
}

/// A unit together with when it was decided and which checkpoints it serves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledUnit {
    pub unit: DeploymentUnit,
    /// 1-based position in the patrol stream at which the unit is issued.
    pub decision_index: usize,
    /// 0-based stream positions of the red checkpoints this unit serves.
    pub targets: Vec<usize>,
    /// Stream position (1-based) at which each target was assigned. Later
    /// than `decision_index` for reds that fell inside an issued unit's disk.
    pub assigned: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub mode: Mode,
    pub units: Vec<ScheduledUnit>,
}

impl Deployment {
    pub fn abs_count(&self) -> usize {
        self.units.iter().map(|u| u.unit.kind.abs_count()).sum()
    }

    pub fn count(&self, kind: UnitKind) -> usize {
        self.units.iter().filter(|u| u.unit.kind == kind).count()
    }

    /// Stream positions of all served checkpoints, sorted.
    pub fn served(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .units
            .iter()
            .flat_map(|u| u.targets.iter().copied())
            .collect();
        v.sort_unstable();
        v
    }
}

/// Offline schedule after the full patrol: one single ABS above every isolated
/// red, one swarm per maximal red run anchored at its first red, and further
/// swarms along a run wherever a red lies more than `2 * r2` from the latest
/// swarm anchor.
pub fn schedule_offline(graph: &CheckpointGraph, alt: &Altitudes, r2: f64) -> Result<Deployment> {
    let labels = graph
        .labels()
        .ok_or_else(|| Error::Precondition("graph has unvisited checkpoints".into()))?;
    let pos: Vec<Vec2> = graph.ordered().iter().map(|c| c.position).collect();
    let n = labels.len();
    let mut units = Vec::new();
    let mut i = 0;
    while i < n {
        if !labels[i].is_red() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && labels[i].is_red() {
            i += 1;
        }
        if i - start == 1 {
            units.push(ScheduledUnit {
                unit: DeploymentUnit::config1(pos[start], alt.single),
                decision_index: n,
                targets: vec![start],
                assigned: vec![n],
            });
            continue;
        }
        let mut current = ScheduledUnit {
            unit: DeploymentUnit::config2(pos[start], alt.apex, alt.base)?,
            decision_index: n,
            targets: vec![start],
            assigned: vec![n],
        };
        for (j, p) in pos.iter().enumerate().take(i).skip(start + 1) {
            if (p - current.unit.anchor).norm() > 2.0 * r2 {
                let next = ScheduledUnit {
                    unit: DeploymentUnit::config2(*p, alt.apex, alt.base)?,
                    decision_index: n,
                    targets: vec![j],
                    assigned: vec![n],
                };
                units.push(std::mem::replace(&mut current, next));
            } else {
                current.targets.push(j);
                current.assigned.push(n);
            }
        }
        units.push(current);
    }
    Ok(Deployment {
        mode: Mode::Offline,
        units,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    DeployConfig1,
    DeployConfig2,
    NoAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub window: [Label; 3],
    pub action: Action,
    /// Offsets (0 or 1) of the red checkpoints among the first two.
    pub target: Vec<usize>,
}

/// Decision for three consecutive labels; placement goes over the red members
/// of the first two.
pub fn window_policy(l1: Label, l2: Label, l3: Label) -> ScheduleDecision {
    use Label::{Blue as B, Red as R};
    let action = match (l1, l2, l3) {
        (R, B, R) | (R, B, B) | (B, R, B) => Action::DeployConfig1,
        (R, R, R) | (R, R, B) | (B, R, R) => Action::DeployConfig2,
        (B, B, R) | (B, B, B) => Action::NoAction,
    };
    let target = match action {
        Action::NoAction => Vec::new(),
        _ => [l1, l2]
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_red())
            .map(|(k, _)| k)
            .collect(),
    };
    ScheduleDecision {
        window: [l1, l2, l3],
        action,
        target,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineOptions {
    /// Coverage disk of an issued single unit. A red inside it is already
    /// served and joins that unit.
    pub single_radius: f64,
    /// Same for an issued swarm.
    pub swarm_radius: f64,
    /// Append two virtual blue labels after the last checkpoint so that reds
    /// at the end of the path are still served.
    pub flush: bool,
}

impl OnlineOptions {
    /// Same disk for both unit kinds.
    pub fn uniform(radius: f64, flush: bool) -> Self {
        OnlineOptions {
            single_radius: radius,
            swarm_radius: radius,
            flush,
        }
    }

    fn radius(&self, kind: UnitKind) -> f64 {
        match kind {
            UnitKind::Config1 => self.single_radius,
            UnitKind::Config2 => self.swarm_radius,
        }
    }
}

impl Default for OnlineOptions {
    fn default() -> Self {
        OnlineOptions {
            single_radius: 0.0,
            swarm_radius: 0.0,
            flush: true,
        }
    }
}

/// Sliding-window scheduler over the patrol stream. Streams shorter than
/// three checkpoints yield nothing.
pub fn schedule_online(
    stream: &[(Vec2, Label)],
    alt: &Altitudes,
    opts: &OnlineOptions,
) -> Result<Deployment> {
    let mut units: Vec<ScheduledUnit> = Vec::new();
    let n = stream.len();
    if n < 3 {
        return Ok(Deployment {
            mode: Mode::Online,
            units,
        });
    }
    let mut labels: Vec<Label> = stream.iter().map(|(_, l)| *l).collect();
    if opts.flush {
        labels.extend([Label::Blue, Label::Blue]);
    }
    let mut served: HashSet<usize> = HashSet::new();
    for i in 2..labels.len() {
        let d = window_policy(labels[i - 2], labels[i - 1], labels[i]);
        let kind = match d.action {
            Action::NoAction => continue,
            Action::DeployConfig1 => UnitKind::Config1,
            Action::DeployConfig2 => UnitKind::Config2,
        };
        let mut fresh = Vec::new();
        for j in d.target.iter().map(|k| i - 2 + k) {
            if served.contains(&j) {
                continue;
            }
            let p = stream[j].0;
            if let Some(u) = units
                .iter_mut()
                .find(|u| (u.unit.anchor - p).norm() <= opts.radius(u.unit.kind))
            {
                u.targets.push(j);
                u.assigned.push(i + 1);
                served.insert(j);
            } else {
                fresh.push(j);
            }
        }
        if fresh.is_empty() {
            continue;
        }
        let anchor = fresh.iter().map(|&j| stream[j].0).sum::<Vec2>() / fresh.len() as f64;
        served.extend(fresh.iter().copied());
        units.push(ScheduledUnit {
            unit: DeploymentUnit::new(kind, anchor, alt)?,
            decision_index: i + 1,
            assigned: vec![i + 1; fresh.len()],
            targets: fresh,
        });
    }
    Ok(Deployment {
        mode: Mode::Online,
        units,
    })
}

/// Bounds on the total number of ABSs for covering `region` with either
/// single units of radius `r1` or swarms of radius `r2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FleetBounds {
    pub min: f64,
    pub max: f64,
    pub min_int: u64,
    pub max_int: u64,
}

pub fn abs_count_bounds(region: &Region, r1: f64, r2: f64) -> Result<FleetBounds> {
    let single = covering_bounds(region, r1)?;
    let swarm = covering_bounds(region, r2)?;
    let min = single.lower.min(4.0 * swarm.lower);
    let max = single.upper.max(4.0 * swarm.upper);
    Ok(FleetBounds {
        min,
        max,
        min_int: min.ceil() as u64,
        max_int: max.floor() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayParams {
    /// Path-length constant.
    pub beta: f64,
    /// UAV speed, m/s.
    pub speed_v: f64,
    /// Region side, m.
    pub side_a: f64,
    /// Checkpoints per square metre.
    pub lambda_cp: f64,
}

/// Expected time for the patrol to visit every checkpoint.
pub fn expected_discovery_time(p: &DelayParams) -> f64 {
    p.beta * p.side_a * p.side_a * p.lambda_cp.sqrt() / p.speed_v
}

/// Expected completion time of a red checkpoint whose mean distance from the
/// base is `mean_r`.
pub fn expected_completion(p: &DelayParams, mean_r: f64, mode: Mode) -> f64 {
    let t = expected_discovery_time(p);
    let travel = mean_r / p.speed_v;
    match mode {
        Mode::Offline => t + travel,
        Mode::Online => t / 2.0 + travel,
    }
}
