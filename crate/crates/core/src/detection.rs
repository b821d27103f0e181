//! Checkpoints, patrol paths and red/blue labelling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, FadingMode, Transmitter};
use crate::geometry::{self, MaternKind, Region};
use crate::{Error, Result, Seed, Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CheckpointId(pub usize);

/// Patrol verdict at a checkpoint. Red marks a coverage hole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "R")]
    Red,
    #[serde(rename = "B")]
    Blue,
}

impl Label {
    pub fn is_red(self) -> bool {
        self == Label::Red
    }

    pub fn from_char(c: char) -> Option<Label> {
        match c {
            'R' | 'r' => Some(Label::Red),
            'B' | 'b' => Some(Label::Blue),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Label::Red => 'R',
            Label::Blue => 'B',
        }
    }
}

/// Parses strings such as `"RBBR"`.
pub fn parse_labels(s: &str) -> Option<Vec<Label>> {
    s.chars().map(Label::from_char).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub id: CheckpointId,
    pub position: Vec2,
    /// `None` until the patrol visits.
    pub label: Option<Label>,
}

impl Checkpoint {
    pub fn new(id: usize, position: Vec2) -> Self {
        Checkpoint {
            id: CheckpointId(id),
            position,
            label: None,
        }
    }
}

/// Hard-core checkpoints: a Poisson field thinned at distance `d`. The parent
/// field extends `d` beyond the region so that points near the border see the
/// same neighbourhood as interior ones.
pub fn generate_checkpoints(
    region: &Region,
    lambda_cp: f64,
    d: f64,
    seed: Seed,
) -> Result<Vec<Checkpoint>> {
    generate_checkpoints_with(region, lambda_cp, d, MaternKind::TypeI, &mut seed.rng())
}

pub fn generate_checkpoints_with<R: Rng + ?Sized>(
    region: &Region,
    lambda_cp: f64,
    d: f64,
    kind: MaternKind,
    rng: &mut R,
) -> Result<Vec<Checkpoint>> {
    if !(d > 0.0) {
        return Err(Error::param("D", format!("must be positive, got {d}")));
    }
    let field = geometry::sample_ppp_with(&region.expanded(d), lambda_cp, rng)?;
    let thinned = match kind {
        MaternKind::TypeI => geometry::matern_thin(&field, d),
        MaternKind::TypeII => geometry::matern_thin_type2(&field, d, rng),
    };
    Ok(thinned
        .points
        .into_iter()
        .filter(|p| region.contains(p))
        .enumerate()
        .map(|(i, p)| Checkpoint::new(i, p))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartPolicy {
    LeftMost,
    RightMost,
    TopMost,
    BottomMost,
    Random(Seed),
    Id(CheckpointId),
}

impl StartPolicy {
    /// The four deterministic extremal policies plus a seeded random start.
    pub fn all(seed: Seed) -> [StartPolicy; 5] {
        [
            StartPolicy::LeftMost,
            StartPolicy::RightMost,
            StartPolicy::TopMost,
            StartPolicy::BottomMost,
            StartPolicy::Random(seed),
        ]
    }

    pub fn name(&self) -> String {
        match self {
            StartPolicy::LeftMost => "left-most".into(),
            StartPolicy::RightMost => "right-most".into(),
            StartPolicy::TopMost => "top-most".into(),
            StartPolicy::BottomMost => "bottom-most".into(),
            StartPolicy::Random(s) => format!("random-{}", s.0),
            StartPolicy::Id(id) => format!("id-{}", id.0),
        }
    }

    fn pick(&self, cps: &[Checkpoint]) -> Result<usize> {
        // Extremal picks break ties on the lowest id.
        let extremal = |key: &dyn Fn(&Checkpoint) -> f64| -> usize {
            let mut best = 0;
            for (i, c) in cps.iter().enumerate().skip(1) {
                let (k, kb) = (key(c), key(&cps[best]));
                if k < kb || (k == kb && c.id < cps[best].id) {
                    best = i;
                }
            }
            best
        };
        Ok(match self {
            StartPolicy::LeftMost => extremal(&|c| c.position.x),
            StartPolicy::RightMost => extremal(&|c| -c.position.x),
            StartPolicy::TopMost => extremal(&|c| -c.position.y),
            StartPolicy::BottomMost => extremal(&|c| c.position.y),
            StartPolicy::Random(seed) => seed.rng().random_range(0..cps.len()),
            StartPolicy::Id(id) => cps
                .iter()
                .position(|c| c.id == *id)
                .ok_or_else(|| Error::param("start", format!("no checkpoint with id {}", id.0)))?,
        })
    }
}

/// Checkpoints with a Hamiltonian visiting order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointGraph {
    pub checkpoints: Vec<Checkpoint>,
    pub visit_order: Vec<CheckpointId>,
    /// Metres, summed over consecutive visits.
    pub path_length: f64,
}

impl CheckpointGraph {
    /// Builds a graph with an explicit order, which must be a permutation of
    /// the checkpoint ids.
    pub fn with_order(
        checkpoints: Vec<Checkpoint>,
        visit_order: Vec<CheckpointId>,
    ) -> Result<Self> {
        let mut seen = vec![false; checkpoints.len()];
        if visit_order.len() != checkpoints.len() {
            return Err(Error::param(
                "visit_order",
                "must visit every checkpoint once",
            ));
        }
        let index = id_index(&checkpoints)?;
        for id in &visit_order {
            let i = *index
                .get(id)
                .ok_or_else(|| Error::param("visit_order", format!("unknown id {}", id.0)))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::param(
                    "visit_order",
                    format!("id {} visited twice", id.0),
                ));
            }
        }
        let mut g = CheckpointGraph {
            checkpoints,
            visit_order,
            path_length: 0.0,
        };
        g.path_length = g.recompute_length();
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn get(&self, id: CheckpointId) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.id == id)
    }

    /// Checkpoints in visiting order.
    pub fn ordered(&self) -> Vec<&Checkpoint> {
        self.visit_order
            .iter()
            .map(|id| self.get(*id).expect("visit order refers to known ids"))
            .collect()
    }

    /// Labels in visiting order; `None` if any checkpoint is unvisited.
    pub fn labels(&self) -> Option<Vec<Label>> {
        self.ordered().iter().map(|c| c.label).collect()
    }

    pub fn recompute_length(&self) -> f64 {
        self.ordered()
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }

    pub fn red_ids(&self) -> Vec<CheckpointId> {
        let mut ids: Vec<_> = self
            .checkpoints
            .iter()
            .filter(|c| c.label == Some(Label::Red))
            .map(|c| c.id)
            .collect();
        ids.sort();
        ids
    }
}

fn id_index(cps: &[Checkpoint]) -> Result<std::collections::HashMap<CheckpointId, usize>> {
    let mut m = std::collections::HashMap::with_capacity(cps.len());
    for (i, c) in cps.iter().enumerate() {
        if m.insert(c.id, i).is_some() {
            return Err(Error::param(
                "checkpoints",
                format!("duplicate id {}", c.id.0),
            ));
        }
    }
    Ok(m)
}

/// Greedy nearest-neighbour patrol path, ties to the lowest id, optionally
/// improved by 2-opt with the start fixed.
pub fn plan_patrol_path(
    checkpoints: Vec<Checkpoint>,
    start: StartPolicy,
    two_opt: bool,
) -> Result<CheckpointGraph> {
    if checkpoints.is_empty() {
        return Err(Error::Precondition(
            "patrol path needs at least one checkpoint".into(),
        ));
    }
    id_index(&checkpoints)?;
    let n = checkpoints.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start.pick(&checkpoints)?;
    visited[cur] = true;
    order.push(cur);
    while order.len() < n {
        let here = checkpoints[cur].position;
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in checkpoints.iter().enumerate() {
            if visited[j] {
                continue;
            }
            let d = (c.position - here).norm_squared();
            let better = match best {
                None => true,
                Some((b, bd)) => d < bd || (d == bd && c.id < checkpoints[b].id),
            };
            if better {
                best = Some((j, d));
            }
        }
        cur = best.expect("unvisited checkpoint remains").0;
        visited[cur] = true;
        order.push(cur);
    }
    if two_opt {
        improve_two_opt(&checkpoints, &mut order);
    }
    let ids = order.iter().map(|&i| checkpoints[i].id).collect();
    CheckpointGraph::with_order(checkpoints, ids)
}

/// 2-opt on an open path whose first node stays fixed.
fn improve_two_opt(cps: &[Checkpoint], order: &mut [usize]) {
    let n = order.len();
    if n < 3 {
        return;
    }
    let d = |a: usize, b: usize| (cps[a].position - cps[b].position).norm();
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n - 2 {
            for j in i + 2..n {
                let (a, b, c) = (order[i], order[i + 1], order[j]);
                let mut delta = d(a, c) - d(a, b);
                if j + 1 < n {
                    let e = order[j + 1];
                    delta += d(b, e) - d(c, e);
                }
                if delta < -1e-9 {
                    order[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
    }
}

/// Labels every checkpoint in visiting order: red iff the patrol-height SINR
/// falls below `gamma_th`. Without any BS every checkpoint is red.
pub fn label_checkpoints(
    graph: CheckpointGraph,
    bs: &[Transmitter],
    params: &ChannelParams,
    gamma_th: f64,
    patrol_height: f64,
    fading: FadingMode,
) -> Result<CheckpointGraph> {
    if graph.checkpoints.iter().any(|c| c.label.is_some()) {
        return Err(Error::Precondition(
            "checkpoints are already labelled".into(),
        ));
    }
    let mut g = graph;
    let order = g.visit_order.clone();
    for id in order {
        let cp = g
            .checkpoints
            .iter_mut()
            .find(|c| c.id == id)
            .expect("visit order refers to known ids");
        let rx = Vec3::new(cp.position.x, cp.position.y, patrol_height);
        let sinr = measure(&rx, bs, params, fading, id)?;
        cp.label = Some(if sinr < gamma_th {
            Label::Red
        } else {
            Label::Blue
        });
    }
    Ok(g)
}

fn measure(
    rx: &Vec3,
    bs: &[Transmitter],
    params: &ChannelParams,
    fading: FadingMode,
    id: CheckpointId,
) -> Result<f64> {
    let Some(serving) = channel::serving_index(rx, bs, params) else {
        return Ok(0.0);
    };
    match fading {
        FadingMode::Mean => {
            channel::sinr_c2a(rx, bs, serving, params, &vec![params.omega; bs.len()])
        }
        FadingMode::Sampled { count, seed } => {
            let count = count.max(1);
            let gains = channel::sample_power_gains(
                params.m,
                params.omega,
                count * bs.len(),
                seed.derive(id.0 as u64),
            )?;
            let mut acc = 0.0;
            for g in gains.chunks(bs.len()) {
                acc += channel::sinr_c2a(rx, bs, serving, params, g)?;
            }
            Ok(acc / count as f64)
        }
    }
}

/// Serpentine visiting order over the centres of a `k`×`k` grid, starting
/// at the top-left cell.
pub fn grid_checkpoints(region: &Region, k: usize) -> Result<CheckpointGraph> {
    if k == 0 {
        return Err(Error::param("grid_size", "must be at least 1"));
    }
    let (sx, sy) = (region.width / k as f64, region.height / k as f64);
    let mut cps = Vec::with_capacity(k * k);
    for row in 0..k {
        let y = region.origin.y + region.height - (row as f64 + 0.5) * sy;
        for step in 0..k {
            let col = if row % 2 == 0 { step } else { k - 1 - step };
            let x = region.origin.x + (col as f64 + 0.5) * sx;
            cps.push(Checkpoint::new(cps.len(), Vec2::new(x, y)));
        }
    }
    let order = cps.iter().map(|c| c.id).collect();
    CheckpointGraph::with_order(cps, order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_serpentine() {
        let r = Region::square(70.0).unwrap();
        let g = grid_checkpoints(&r, 7).unwrap();
        assert_eq!(g.len(), 49);
        let o = g.ordered();
        assert!(o[0].position.x < o[6].position.x);
        assert!(o[7].position.x > o[13].position.x);
        assert!(o[0].position.y > o[7].position.y);
    }

    #[test]
    fn relabelling_is_rejected() {
        let g = plan_patrol_path(
            vec![Checkpoint::new(0, Vec2::zeros())],
            StartPolicy::LeftMost,
            false,
        )
        .unwrap();
        let p = ChannelParams::default();
        let g = label_checkpoints(g, &[], &p, 1.0, 25.0, FadingMode::Mean).unwrap();
        assert!(label_checkpoints(g, &[], &p, 1.0, 25.0, FadingMode::Mean).is_err());
    }
}
