//! Double-integrator ABS dynamics with drag, potential-field collision
//! avoidance, formation control and an energy diagnostic.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::scheduling::{formation_centroid, tetrahedron_offsets, DeploymentUnit, UnitKind};
use crate::{Error, Result, Seed, Vec2, Vec3};

/// Which controller an agent runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    /// Lone ABS with its own id.
    Single(usize),
    /// Member `member` (0..4) of swarm `id`.
    Swarm { id: usize, member: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: Vec3,
    pub v: Vec3,
    pub x_dest: Vec3,
    /// Offset within the formation; zero for single units.
    pub x_star: Vec3,
    pub mass: f64,
    pub group: Group,
}

impl AgentState {
    pub fn pos_error(&self) -> Vec3 {
        self.x - self.x_dest
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlParams {
    /// Velocity feedback gain.
    pub b: f64,
    /// Adaptive gain.
    pub c: f64,
    /// Per-axis saturation of the adaptive term, m.
    pub eps: f64,
    /// Linear drag, kg/s.
    pub k1: f64,
    /// Quadratic drag, kg/m.
    pub k2: f64,
    /// Collision radius, m.
    pub r_c: f64,
    /// Communication radius, m.
    pub r_d: f64,
    /// Speed limit, m/s.
    pub v_max: f64,
    /// Swarm interconnection weights.
    pub adjacency: [[f64; 4]; 4],
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            b: 0.5,
            c: 1.0,
            eps: 10.0,
            k1: 0.01,
            k2: 0.02,
            r_c: 10.0,
            r_d: 30.0,
            v_max: 20.0,
            adjacency: default_adjacency(),
        }
    }
}

pub fn default_adjacency() -> [[f64; 4]; 4] {
    let pattern = [
        [0., 1., 0., 1.],
        [0., 0., 1., 0.],
        [1., 1., 0., 0.],
        [1., 1., 1., 0.],
    ];
    pattern.map(|row| row.map(|a| 0.01 * a))
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b >= 0.0) {
            return Err(Error::param("b", "must be non-negative"));
        }
        if !(self.c > 0.0 && self.eps > 0.0) {
            return Err(Error::param("c", "c and eps must be positive"));
        }
        if !(self.k1 >= 0.0 && self.k2 >= 0.0) {
            return Err(Error::param("k1", "drag coefficients must be non-negative"));
        }
        if !(self.r_c > 0.0 && self.r_c <= self.r_d) {
            return Err(Error::param("r_c", "need 0 < r_c <= r_d"));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::param("v_max", "must be positive"));
        }
        check_strongly_connected(&self.adjacency)
    }
}

/// Errors unless every node reaches every other along edges with positive
/// weight.
pub fn check_strongly_connected(a: &[[f64; 4]; 4]) -> Result<()> {
    for (i, row) in a.iter().enumerate() {
        if row[i] != 0.0 {
            return Err(Error::InvalidTopology(format!("self-loop on node {i}")));
        }
        if row.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidTopology(format!(
                "negative weight in row {i}"
            )));
        }
    }
    let reach = |transpose: bool| {
        let mut seen = [false; 4];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for w in 0..4 {
                let edge = if transpose { a[w][u] } else { a[u][w] };
                if edge > 0.0 && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    if reach(false) && reach(true) {
        Ok(())
    } else {
        Err(Error::InvalidTopology(
            "swarm graph is not strongly connected".into(),
        ))
    }
}

/// Air resistance acceleration; zero at rest.
pub fn drag_accel(v: &Vec3, k1: f64, k2: f64, mass: f64) -> Vec3 {
    let s = v.norm();
    if s == 0.0 {
        return Vec3::zeros();
    }
    -(k1 * s + k2 * s * s) * v / (mass * s)
}

fn separation_sq(xi: &Vec3, xk: &Vec3, r_c: f64) -> Result<f64> {
    let s = (xi - xk).norm_squared();
    if s <= r_c * r_c {
        return Err(Error::CollisionDomain { distance: s.sqrt() });
    }
    Ok(s)
}

/// Pairwise barrier: diverges at `r_c`, vanishes beyond `r_d`.
pub fn potential(xi: &Vec3, xk: &Vec3, r_c: f64, r_d: f64) -> Result<f64> {
    let s = separation_sq(xi, xk, r_c)?;
    let rd2 = r_d * r_d;
    if s >= rd2 {
        return Ok(0.0);
    }
    let q = (rd2 - s) / (s - r_c * r_c);
    Ok(q * q)
}

/// Gradient of [`potential`] with respect to `xi`.
pub fn potential_gradient(xi: &Vec3, xk: &Vec3, r_c: f64, r_d: f64) -> Result<Vec3> {
    let s = separation_sq(xi, xk, r_c)?;
    let (rc2, rd2) = (r_c * r_c, r_d * r_d);
    if s >= rd2 {
        return Ok(Vec3::zeros());
    }
    let k = 4.0 * (rd2 - rc2) * (rd2 - s) / (s - rc2).powi(3);
    Ok(k * (xk - xi))
}

/// Per-axis saturated proportional term.
pub fn adaptive_term(x_tilde: &Vec3, c: f64, eps: f64) -> Vec3 {
    x_tilde.map(|e| {
        if e.abs() > eps {
            c * eps * e.signum()
        } else {
            c * e
        }
    })
}

/// Integral of [`adaptive_term`] along one axis.
fn adaptive_energy(e: f64, c: f64, eps: f64) -> f64 {
    if e.abs() > eps {
        c * (eps * e.abs() - eps * eps / 2.0)
    } else {
        c * e * e / 2.0
    }
}

fn repulsion(i: usize, agents: &[AgentState], p: &ControlParams) -> Result<Vec3> {
    let mut f = Vec3::zeros();
    for (k, other) in agents.iter().enumerate() {
        if k != i {
            f += potential_gradient(&agents[i].x, &other.x, p.r_c, p.r_d)?;
        }
    }
    Ok(f)
}

fn formation_term(i: usize, agents: &[AgentState], p: &ControlParams) -> Vec3 {
    let Group::Swarm { id, member } = agents[i].group else {
        return Vec3::zeros();
    };
    let me = &agents[i];
    agents
        .iter()
        .filter_map(|a| match a.group {
            Group::Swarm {
                id: j_id,
                member: mj,
            } if j_id == id && mj != member => {
                Some(p.adjacency[member][mj] * (me.x - a.x - me.x_star + a.x_star))
            }
            _ => None,
        })
        .sum()
}

/// Control for a lone ABS: damping, repulsion from every other agent and the
/// saturated pull towards its destination.
pub fn control_config1(i: usize, agents: &[AgentState], p: &ControlParams) -> Result<Vec3> {
    let a = &agents[i];
    if !matches!(a.group, Group::Single(_)) {
        return Err(Error::Precondition(format!(
            "agent {i} is not a single unit"
        )));
    }
    Ok(-p.b * a.v - repulsion(i, agents, p)? - adaptive_term(&a.pos_error(), p.c, p.eps))
}

/// Control for a swarm member: the single-unit law plus formation consensus
/// with the other members.
pub fn control_config2(i: usize, agents: &[AgentState], p: &ControlParams) -> Result<Vec3> {
    let a = &agents[i];
    if !matches!(a.group, Group::Swarm { .. }) {
        return Err(Error::Precondition(format!(
            "agent {i} is not a swarm member"
        )));
    }
    check_strongly_connected(&p.adjacency)?;
    Ok(-(formation_term(i, agents, p)
        + p.b * a.v
        + repulsion(i, agents, p)?
        + adaptive_term(&a.pos_error(), p.c, p.eps)))
}

/// Controls for all agents from the same snapshot.
pub fn controls(agents: &[AgentState], p: &ControlParams) -> Result<Vec<Vec3>> {
    let n = agents.len();
    let mut rep = vec![Vec3::zeros(); n];
    for i in 0..n {
        for k in i + 1..n {
            let g = potential_gradient(&agents[i].x, &agents[k].x, p.r_c, p.r_d)?;
            rep[i] += g;
            rep[k] -= g;
        }
    }
    Ok(agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            -(formation_term(i, agents, p)
                + p.b * a.v
                + rep[i]
                + adaptive_term(&a.pos_error(), p.c, p.eps))
        })
        .collect())
}

/// Velocity kick applied to a set of agents (all when `agents` is `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub time: f64,
    pub impulse: Vec3,
    pub agents: Option<Vec<usize>>,
}

fn accelerations(states: &[AgentState], p: &ControlParams) -> Result<Vec<Vec3>> {
    let u = controls(states, p)?;
    Ok(states
        .iter()
        .zip(u)
        .map(|(s, u)| drag_accel(&s.v, p.k1, p.k2, s.mass) + u)
        .collect())
}

fn shifted(base: &[AgentState], dx: &[Vec3], dv: &[Vec3], h: f64) -> Vec<AgentState> {
    base.iter()
        .zip(dx.iter().zip(dv))
        .map(|(s, (dx, dv))| AgentState {
            x: s.x + h * dx,
            v: s.v + h * dv,
            ..*s
        })
        .collect()
}

/// One classical RK4 step, then any impulses, then the speed clamp.
pub fn step(
    states: &[AgentState],
    p: &ControlParams,
    dt: f64,
    impulses: &[(usize, Vec3)],
) -> Result<Vec<AgentState>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let v1: Vec<Vec3> = states.iter().map(|s| s.v).collect();
    let a1 = accelerations(states, p)?;
    let s2 = shifted(states, &v1, &a1, dt / 2.0);
    let v2: Vec<Vec3> = s2.iter().map(|s| s.v).collect();
    let a2 = accelerations(&s2, p)?;
    let s3 = shifted(states, &v2, &a2, dt / 2.0);
    let v3: Vec<Vec3> = s3.iter().map(|s| s.v).collect();
    let a3 = accelerations(&s3, p)?;
    let s4 = shifted(states, &v3, &a3, dt);
    let v4: Vec<Vec3> = s4.iter().map(|s| s.v).collect();
    let a4 = accelerations(&s4, p)?;

    let mut next: Vec<AgentState> = states
        .iter()
        .enumerate()
        .map(|(i, s)| AgentState {
            x: s.x + dt / 6.0 * (v1[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]),
            v: s.v + dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]),
            ..*s
        })
        .collect();
    for (i, dv) in impulses {
        next[*i].v += dv;
    }
    for s in &mut next {
        let speed = s.v.norm();
        if speed > p.v_max {
            s.v *= p.v_max / speed;
        }
    }
    Ok(next)
}

/// The four energy components: formation disagreement, kinetic, barrier over
/// ordered pairs, saturated destination error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovTerms {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
}

impl LyapunovTerms {
    /// Weighted total whose time derivative along the closed loop is
    /// `-Σ (b|v|² + drag·v)` up to the asymmetric part of the adjacency.
    pub fn total(&self) -> f64 {
        0.5 * (self.v1 + self.v2 + self.v3) + self.v4
    }
}

pub fn lyapunov_terms(agents: &[AgentState], p: &ControlParams) -> Result<LyapunovTerms> {
    let mut t = LyapunovTerms {
        v1: 0.0,
        v2: 0.0,
        v3: 0.0,
        v4: 0.0,
    };
    for (i, a) in agents.iter().enumerate() {
        t.v2 += a.v.norm_squared();
        let e = a.pos_error();
        t.v4 += e
            .iter()
            .map(|&x| adaptive_energy(x, p.c, p.eps))
            .sum::<f64>();
        for (k, b) in agents.iter().enumerate() {
            if k == i {
                continue;
            }
            t.v3 += potential(&a.x, &b.x, p.r_c, p.r_d)?;
            if let (
                Group::Swarm { id, member: mi },
                Group::Swarm {
                    id: idk,
                    member: mk,
                },
            ) = (a.group, b.group)
            {
                if id == idk {
                    let w = 0.5 * (p.adjacency[mi][mk] + p.adjacency[mk][mi]);
                    t.v1 += 0.5 * w * (e - b.pos_error()).norm_squared();
                }
            }
        }
    }
    Ok(t)
}

pub fn lyapunov_value(agents: &[AgentState], p: &ControlParams) -> Result<f64> {
    Ok(lyapunov_terms(agents, p)?.total())
}

pub fn min_pairwise_distance(agents: &[AgentState]) -> f64 {
    let mut m = f64::INFINITY;
    for (i, a) in agents.iter().enumerate() {
        for b in &agents[i + 1..] {
            m = m.min((a.x - b.x).norm());
        }
    }
    m
}

/// Scalar diagnostics after one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub lyapunov: f64,
    pub min_distance: f64,
    /// Largest position error norm over agents, m.
    pub max_pos_error: f64,
    /// Largest speed over agents, m/s.
    pub max_vel_error: f64,
    /// An impulse was applied at the end of this step.
    pub disturbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub dt: f64,
    pub params: ControlParams,
    pub groups: Vec<Group>,
    pub destinations: Vec<Vec3>,
    /// One record per step, starting with the initial state at t = 0.
    pub steps: Vec<StepRecord>,
    /// Full states every `record_every` steps.
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryLog {
    /// First time in `[from, until)` after which every record in that window
    /// stays below both error thresholds.
    pub fn settling_time(&self, from: f64, until: f64, pos_tol: f64, vel_tol: f64) -> Option<f64> {
        let mut settled: Option<f64> = None;
        for r in self.steps.iter().filter(|r| r.t >= from && r.t < until) {
            if r.max_pos_error < pos_tol && r.max_vel_error < vel_tol {
                settled.get_or_insert(r.t);
            } else {
                settled = None;
            }
        }
        settled
    }

    pub fn min_distance(&self) -> f64 {
        self.steps
            .iter()
            .map(|r| r.min_distance)
            .fold(f64::INFINITY, f64::min)
    }

    /// Steps whose energy rose by more than `rel_tol * max(1, V)`, excluding
    /// disturbed steps.
    pub fn lyapunov_violations(&self, rel_tol: f64) -> Vec<(f64, f64)> {
        self.steps
            .windows(2)
            .filter(|w| !w[1].disturbed)
            .filter(|w| w[1].lyapunov > w[0].lyapunov + rel_tol * w[0].lyapunov.max(1.0))
            .map(|w| (w[1].t, w[1].lyapunov - w[0].lyapunov))
            .collect()
    }

    /// Long-format CSV for the selected agents, preceded by a `#` line with
    /// the run parameters as JSON. Columns:
    /// `t,agent,x,y,z,vx,vy,vz,pos_error,speed,lyapunov,min_distance`.
    pub fn write_csv<W: Write>(&self, mut w: W, agents: &[usize]) -> Result<()> {
        let header = serde_json::json!({
            "dt": self.dt,
            "params": self.params,
            "agents": agents,
            "groups": agents.iter().map(|&i| self.groups[i]).collect::<Vec<_>>(),
        });
        writeln!(w, "# {header}")?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record([
            "t",
            "agent",
            "x",
            "y",
            "z",
            "vx",
            "vy",
            "vz",
            "pos_error",
            "speed",
            "lyapunov",
            "min_distance",
        ])?;
        let step_of = |t: f64| ((t / self.dt).round() as usize).min(self.steps.len() - 1);
        for s in &self.snapshots {
            let rec = &self.steps[step_of(s.t)];
            for &i in agents {
                let (x, v) = (s.x[i], s.v[i]);
                cw.write_record(&[
                    format!("{:.2}", s.t),
                    i.to_string(),
                    format!("{:.4}", x.x),
                    format!("{:.4}", x.y),
                    format!("{:.4}", x.z),
                    format!("{:.5}", v.x),
                    format!("{:.5}", v.y),
                    format!("{:.5}", v.z),
                    format!("{:.5}", (x - self.destinations[i]).norm()),
                    format!("{:.5}", v.norm()),
                    format!("{:.6e}", rec.lyapunov),
                    format!("{:.4}", rec.min_distance),
                ])?;
            }
        }
        cw.flush()?;
        Ok(())
    }
}

fn record(t: f64, states: &[AgentState], p: &ControlParams, disturbed: bool) -> Result<StepRecord> {
    Ok(StepRecord {
        t,
        lyapunov: lyapunov_value(states, p)?,
        min_distance: min_pairwise_distance(states),
        max_pos_error: states
            .iter()
            .map(|s| s.pos_error().norm())
            .fold(0.0, f64::max),
        max_vel_error: states.iter().map(|s| s.v.norm()).fold(0.0, f64::max),
        disturbed,
    })
}

fn snapshot(t: f64, states: &[AgentState]) -> Snapshot {
    Snapshot {
        t,
        x: states.iter().map(|s| s.x).collect(),
        v: states.iter().map(|s| s.v).collect(),
    }
}

fn collision_check(t: f64, states: &[AgentState], r_c: f64) -> Result<()> {
    for (i, a) in states.iter().enumerate() {
        for (k, b) in states.iter().enumerate().skip(i + 1) {
            let d = (a.x - b.x).norm();
            if d <= r_c {
                return Err(Error::Collision {
                    time: t,
                    i,
                    k,
                    distance: d,
                });
            }
        }
    }
    Ok(())
}

/// Fixed-step flight over `[0, t_end]`. Impulses fire at the end of the step
/// that reaches their time. A pair inside `r_c` halts the run.
pub fn simulate(
    initial: &[AgentState],
    p: &ControlParams,
    t_end: f64,
    dt: f64,
    events: &[Disturbance],
    record_every: usize,
) -> Result<TrajectoryLog> {
    p.validate()?;
    collision_check(0.0, initial, p.r_c)?;
    let n_steps = (t_end / dt).round() as usize;
    let record_every = record_every.max(1);
    let mut log = TrajectoryLog {
        dt,
        params: *p,
        groups: initial.iter().map(|s| s.group).collect(),
        destinations: initial.iter().map(|s| s.x_dest).collect(),
        steps: Vec::with_capacity(n_steps + 1),
        snapshots: Vec::new(),
    };
    log.steps.push(record(0.0, initial, p, false)?);
    log.snapshots.push(snapshot(0.0, initial));
    let mut states = initial.to_vec();
    for k in 0..n_steps {
        let (t0, t1) = (k as f64 * dt, (k + 1) as f64 * dt);
        let mut kicks = Vec::new();
        for e in events
            .iter()
            .filter(|e| e.time > t0 - 1e-12 && e.time <= t1 - 1e-12)
        {
            match &e.agents {
                Some(ids) => kicks.extend(ids.iter().map(|&i| (i, e.impulse))),
                None => kicks.extend((0..states.len()).map(|i| (i, e.impulse))),
            }
        }
        states = step(&states, p, dt, &kicks).map_err(|e| match e {
            Error::CollisionDomain { distance } => Error::Collision {
                time: t1,
                i: usize::MAX,
                k: usize::MAX,
                distance,
            },
            other => other,
        })?;
        collision_check(t1, &states, p.r_c)?;
        log.steps.push(record(t1, &states, p, !kicks.is_empty())?);
        if (k + 1) % record_every == 0 {
            log.snapshots.push(snapshot(t1, &states));
        }
    }
    Ok(log)
}

/// Agents for a deployment, at rest on the given takeoff pads. Swarm members
/// are assigned apex first.
pub fn agents_for_deployment(
    units: &[DeploymentUnit],
    pads: &[Vec3],
    mass: f64,
) -> Result<Vec<AgentState>> {
    let needed: usize = units.iter().map(|u| u.kind.abs_count()).sum();
    if pads.len() < needed {
        return Err(Error::param(
            "pads",
            format!("{} pads for {needed} agents", pads.len()),
        ));
    }
    let mut agents = Vec::with_capacity(needed);
    let mut pad = pads.iter();
    for (uid, u) in units.iter().enumerate() {
        match u.kind {
            UnitKind::Config1 => agents.push(AgentState {
                x: *pad.next().expect("counted"),
                v: Vec3::zeros(),
                x_dest: u.positions[0],
                x_star: Vec3::zeros(),
                mass,
                group: Group::Single(uid),
            }),
            UnitKind::Config2 => {
                let (h_a, h_b) = (u.h_a.expect("swarm apex"), u.h_b.expect("swarm base"));
                let offsets = tetrahedron_offsets(h_a, h_b)?;
                let c = formation_centroid(u.anchor, h_a, h_b);
                for (member, o) in offsets.iter().enumerate() {
                    agents.push(AgentState {
                        x: *pad.next().expect("counted"),
                        v: Vec3::zeros(),
                        x_dest: c + o,
                        x_star: *o,
                        mass,
                        group: Group::Swarm { id: uid, member },
                    });
                }
            }
        }
    }
    Ok(agents)
}

/// Anchors of the five-swarm flight scenario in a 1 km square, chosen so that
/// all destinations sit more than `r_d` apart.
pub const CASE_STUDY_ANCHORS: [[f64; 2]; 5] = [
    [600.0, 600.0],
    [900.0, 580.0],
    [580.0, 900.0],
    [880.0, 890.0],
    [740.0, 740.0],
];

/// Five tetrahedral swarms (apex 300 m, base 150 m) taking off from random
/// ground positions in the upper-right quarter, pairwise more than `r_d`
/// apart.
pub fn case_study(seed: Seed, p: &ControlParams) -> Result<Vec<AgentState>> {
    use rand::Rng;
    let units: Vec<DeploymentUnit> = CASE_STUDY_ANCHORS
        .iter()
        .map(|a| DeploymentUnit::config2(Vec2::new(a[0], a[1]), 300.0, 150.0))
        .collect::<Result<_>>()?;
    let mut rng = seed.rng();
    let mut pads: Vec<Vec3> = Vec::new();
    while pads.len() < 20 {
        let c = Vec3::new(
            500.0 + 500.0 * rng.random::<f64>(),
            500.0 + 500.0 * rng.random::<f64>(),
            0.0,
        );
        if pads.iter().all(|q| (q - c).norm() > p.r_d) {
            pads.push(c);
        }
    }
    agents_for_deployment(&units, &pads, 1.0)
}
