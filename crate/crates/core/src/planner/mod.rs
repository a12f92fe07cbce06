//! Lattice planner parameterized by a velocity scale and seven cost weights.

pub mod clothoid;
pub mod costs;
pub mod lattice;
pub mod params;
pub mod pure_pursuit;

use std::sync::Arc;

use crate::config::{PlannerConfig, VehicleConfig};
use crate::error::{Error, Result};
use crate::geom::Pose2;
use crate::sim::{ControlInput, Driver, Observation, VehicleState};
use crate::track::{Raceline, TrackMap};

pub use clothoid::{solve_clothoid, Clothoid, ClothoidOptions, PathPoint};
pub use costs::{
    evaluate_costs, score_candidates, select_index, select_trajectory, CandidateTrajectory, CostContext,
    OpponentPrediction, N_COSTS,
};
pub use lattice::{lateral_offsets, sample_goals, GoalSpec, LatticeGoal};
pub use params::{PolicyParams, COST_NAMES, PARAM_DIM, PARAM_LOWER, PARAM_UPPER};
pub use pure_pursuit::pure_pursuit;

/// Read-only inputs shared by every planner instance in a run.
#[derive(Debug, Clone)]
pub struct PlannerEnv {
    pub track: Arc<TrackMap>,
    pub raceline: Arc<Raceline>,
    pub planner: PlannerConfig,
    pub vehicle: VehicleConfig,
    pub footprint: f64,
}

impl PlannerEnv {
    pub fn new(track: Arc<TrackMap>, raceline: Arc<Raceline>, planner: PlannerConfig, vehicle: VehicleConfig, footprint: f64) -> Self {
        Self { track, raceline, planner, vehicle, footprint }
    }

    fn goal_spec(&self) -> GoalSpec {
        GoalSpec {
            lookahead_min: self.planner.lookahead_min,
            lookahead_max: self.planner.lookahead_max,
            n_long: self.planner.n_long,
            n_lat: self.planner.n_lat,
        }
    }

    /// Configured span, or the local free width minus the footprint on both sides.
    pub fn lateral_span(&self, s: f64) -> f64 {
        match self.planner.lateral_span {
            Some(v) => v,
            None => {
                let r = self.raceline.sample(s);
                (2.0 * self.track.grid().clearance(r.x, r.y) - 2.0 * self.footprint).max(0.0)
            }
        }
    }
}

/// Everything one planning call produced; kept for diagnostics and plots.
#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub candidates: Vec<CandidateTrajectory>,
    pub selected: Option<usize>,
    pub goals: Vec<LatticeGoal>,
}

/// Lattice planner with its hysteresis memo; also a simulator [`Driver`].
#[derive(Debug, Clone)]
pub struct LatticePlanner {
    env: Arc<PlannerEnv>,
    params: PolicyParams,
    previous: Option<Vec<[f64; 2]>>,
    raceline_hint: Option<f64>,
    blocked_count: usize,
}

impl LatticePlanner {
    pub fn new(env: Arc<PlannerEnv>, params: PolicyParams) -> Self {
        let params = params.with_frozen_gamma(env.planner.freeze_gamma_v);
        Self { env, params, previous: None, raceline_hint: None, blocked_count: 0 }
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    /// Switches policy; the hysteresis memo is kept.
    pub fn set_params(&mut self, params: PolicyParams) {
        self.params = params.with_frozen_gamma(self.env.planner.freeze_gamma_v);
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked_count
    }

    pub fn env(&self) -> &Arc<PlannerEnv> {
        &self.env
    }

    fn raceline_progress(&mut self, x: f64, y: f64) -> f64 {
        let rl = &self.env.raceline;
        let f = match self.raceline_hint {
            Some(h) => rl.project_near(x, y, h, 3.0),
            None => rl.project(x, y),
        };
        self.raceline_hint = Some(f.s);
        f.s
    }

    /// Generates, scores and selects candidates from `ego` given opponent states.
    pub fn plan(&mut self, ego: &VehicleState, opponents: &[VehicleState]) -> PlanOutput {
        let env = Arc::clone(&self.env);
        let pc = &env.planner;
        let kappa_max = env.vehicle.kappa_max();
        let ego_s = self.raceline_progress(ego.x, ego.y);
        let goals = sample_goals(&env.raceline, ego_s, &env.goal_spec(), &|s| env.lateral_span(s));
        let start = Pose2::new(ego.x, ego.y, ego.psi);
        let kappa0 = (ego.delta.tan() / env.vehicle.wheelbase()).clamp(-kappa_max, kappa_max);
        let opts = ClothoidOptions { intervals: pc.clothoid_samples, max_iterations: pc.clothoid_iterations, kappa_max };
        let preds: Vec<OpponentPrediction> =
            opponents.iter().map(|o| OpponentPrediction { x: o.x, y: o.y, psi: o.psi + o.beta, v: o.v }).collect();
        let previous = self.previous.as_ref().map(|p| costs::advance_polyline(p, [ego.x, ego.y]));
        let ctx = CostContext {
            track: &env.track,
            raceline: &env.raceline,
            previous: previous.as_deref(),
            opponents: &preds,
            footprint: env.footprint,
            kappa_max,
            v_ref: env.raceline.max_speed(),
            gamma_v: self.params.gamma_v,
            hysteresis_points: pc.hysteresis_points,
            raceline_hint: ego_s,
        };
        let mut candidates = Vec::with_capacity(goals.len() * pc.velocity_factors.len());
        for (gi, goal) in goals.iter().enumerate() {
            let kg = goal.kappa.clamp(-kappa_max, kappa_max);
            let Some(c) = solve_clothoid(start, kappa0, goal.pose, kg, &opts) else {
                continue;
            };
            let (geo, collides) = costs::path_costs(&c.points, &ctx);
            let span = goal.s - ego_s;
            let base: Vec<f64> = c
                .points
                .iter()
                .map(|p| {
                    let v_r = env.raceline.sample(ego_s + span * p.s / c.length).v;
                    let cap = if p.kappa.abs() > 1e-9 { (pc.lateral_accel_max / p.kappa.abs()).sqrt() } else { f64::INFINITY };
                    (v_r, cap)
                })
                .map(|(v, cap)| v.min(cap))
                .collect();
            for &f in &pc.velocity_factors {
                let vel: Vec<f64> = c
                    .points
                    .iter()
                    .zip(&base)
                    .map(|(p, &b)| {
                        let cap = if p.kappa.abs() > 1e-9 { (pc.lateral_accel_max / p.kappa.abs()).sqrt() } else { f64::INFINITY };
                        (f * b).min(cap)
                    })
                    .collect();
                let vc = costs::velocity_costs(&c.points, &vel, &ctx);
                let mut cand = CandidateTrajectory::new(c.points.clone(), vel, gi, f);
                cand.costs = [geo[0], geo[1], geo[2], geo[3], vc[0], vc[1], vc[2]];
                cand.collides = collides;
                candidates.push(cand);
            }
        }
        score_candidates(&mut candidates, &self.params, pc.normalize_costs);
        let selected = select_index(&candidates).ok();
        match selected {
            Some(i) => self.previous = Some(candidates[i].path.iter().map(|p| [p.x, p.y]).collect()),
            None => {
                self.previous = None;
                self.blocked_count += 1;
            }
        }
        PlanOutput { candidates, selected, goals }
    }

    /// Plans and converts the selection into a control; a blocked plan stops the car.
    pub fn control(&mut self, ego: &VehicleState, opponents: &[VehicleState]) -> ControlInput {
        let out = self.plan(ego, opponents);
        match out.selected {
            Some(i) => {
                let sel = select_trajectory(&self.params, &out.candidates[i..=i]).expect("finite candidate");
                pure_pursuit(ego, &sel.path, &sel.velocity, self.env.planner.pure_pursuit_lookahead, self.env.vehicle.wheelbase())
            }
            None => ControlInput::new(ego.delta, 0.0),
        }
    }
}

impl Driver for LatticePlanner {
    fn act(&mut self, obs: &Observation<'_>) -> Result<ControlInput> {
        let opps: Vec<VehicleState> = obs.opponents().copied().collect();
        let u = self.control(obs.ego(), &opps);
        if !u.delta_des.is_finite() || !u.v_des.is_finite() {
            return Err(Error::NonFinite("planner control".into()));
        }
        Ok(u)
    }
}

/// Pure-pursuit raceline follower with fixed tuning (no lattice, no opponent awareness).
#[derive(Debug, Clone)]
pub struct RacelineFollower {
    raceline: Arc<Raceline>,
    wheelbase: f64,
    lookahead: f64,
    speed_scale: f64,
    hint: Option<f64>,
}

impl RacelineFollower {
    pub fn new(raceline: Arc<Raceline>, wheelbase: f64, lookahead: f64, speed_scale: f64) -> Self {
        Self { raceline, wheelbase, lookahead, speed_scale, hint: None }
    }
}

impl Driver for RacelineFollower {
    fn act(&mut self, obs: &Observation<'_>) -> Result<ControlInput> {
        let ego = obs.ego();
        let f = match self.hint {
            Some(h) => self.raceline.project_near(ego.x, ego.y, h, 3.0),
            None => self.raceline.project(ego.x, ego.y),
        };
        self.hint = Some(f.s);
        let n = 24;
        let path: Vec<PathPoint> = (0..=n)
            .map(|i| {
                let s = f.s + 2.0 * self.lookahead * i as f64 / n as f64;
                let r = self.raceline.sample(s);
                PathPoint { x: r.x, y: r.y, psi: r.theta, kappa: r.kappa, s: s - f.s }
            })
            .collect();
        let vel: Vec<f64> = path.iter().map(|p| self.raceline.sample(f.s + p.s).v * self.speed_scale).collect();
        Ok(pure_pursuit(ego, &path, &vel, self.lookahead, self.wheelbase))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Simulation;
    use crate::track::{synthetic_oval, OvalSpec};

    fn env() -> Arc<PlannerEnv> {
        let (track, _, _) = synthetic_oval(&OvalSpec::default()).unwrap();
        let rl = Raceline::from_centerline(&track, 5.0).unwrap();
        Arc::new(PlannerEnv::new(Arc::new(track), Arc::new(rl), PlannerConfig::default(), VehicleConfig::default(), 0.3))
    }

    fn start(env: &PlannerEnv, s: f64, d: f64) -> VehicleState {
        let c = env.track.centerline();
        let p = c.from_frenet(s, d);
        VehicleState { s, ..VehicleState::at_rest(p[0], p[1], c.point_at(s).1) }
    }

    #[test]
    fn plan_produces_feasible_selection() {
        let e = env();
        let mut pl = LatticePlanner::new(Arc::clone(&e), PolicyParams::default());
        let out = pl.plan(&start(&e, 2.0, 0.0), &[]);
        assert_eq!(out.goals.len(), 72);
        let i = out.selected.unwrap();
        let sel = &out.candidates[i];
        assert!(sel.total_cost.is_finite() && !sel.collides);
        assert!(sel.path.iter().all(|p| !e.track.is_collision(p.x, p.y, 0.3)));
        assert!(out.candidates.iter().all(|c| c.path.iter().all(|p| p.kappa.abs() <= e.vehicle.kappa_max() + 1e-12)));
    }

    #[test]
    fn larger_deviation_weight_does_not_increase_deviation() {
        let e = env();
        let ego = start(&e, 2.0, 0.6);
        let mut lo = LatticePlanner::new(Arc::clone(&e), PolicyParams::default());
        let mut w = [1.0; 7];
        w[3] = 10.0;
        let mut hi = LatticePlanner::new(Arc::clone(&e), PolicyParams { gamma_v: 1.0, weights: w });
        let a = lo.plan(&ego, &[]);
        let b = hi.plan(&ego, &[]);
        let da = a.candidates[a.selected.unwrap()].costs[3];
        let db = b.candidates[b.selected.unwrap()].costs[3];
        assert!(db <= da + 1e-12, "{db} > {da}");
    }

    #[test]
    fn planner_drives_laps_without_crashing() {
        let e = env();
        let track = Arc::clone(&e.track);
        let veh = e.vehicle.clone();
        let mut sim = Simulation::new(&track, &veh, 0.3, 0.1, vec![start(&e, 1.0, 0.0)]).unwrap();
        let mut pl = LatticePlanner::new(Arc::clone(&e), PolicyParams::default());
        let seg = sim.run(&mut [&mut pl], 12.0).unwrap();
        assert_eq!(seg.collisions, vec![false]);
        let s = seg.trajectories[0].last().s;
        assert!(s > 30.0, "progress {s}");
    }

    #[test]
    fn follower_completes_distance() {
        let e = env();
        let track = Arc::clone(&e.track);
        let veh = e.vehicle.clone();
        let mut sim = Simulation::new(&track, &veh, 0.3, 0.1, vec![start(&e, 1.0, 0.0)]).unwrap();
        let mut f = RacelineFollower::new(Arc::clone(&e.raceline), veh.wheelbase(), 1.5, 0.9);
        let seg = sim.run(&mut [&mut f], 10.0).unwrap();
        assert_eq!(seg.collisions, vec![false]);
        assert!(seg.trajectories[0].last().s > 25.0);
    }
}
