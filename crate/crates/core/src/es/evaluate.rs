//! Policy evaluation by paired rollouts against a frozen opponent set.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::pcs::{g_agg, g_res, PcsPoint};
use crate::planner::{LatticePlanner, PlannerEnv, PolicyParams, PARAM_LOWER, PARAM_UPPER};
use crate::sim::{side_by_side, Driver, Segment, Simulation};

/// One evaluation rollout: opponent policy, start line and side assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pairing {
    pub opponent: PolicyParams,
    pub s0: f64,
    /// Ego takes the right slot when set.
    pub swap: bool,
}

/// Opponents and start lines shared by every candidate of a synthesis run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub pairings: Vec<Pairing>,
    pub duration: f64,
    pub start_offset: f64,
}

/// Uniform draw from the parameter box.
pub fn random_params<R: Rng>(rng: &mut R, freeze_gamma: bool) -> PolicyParams {
    let mut v = [0.0; 8];
    for (k, x) in v.iter_mut().enumerate() {
        *x = rng.random_range(PARAM_LOWER[k]..=PARAM_UPPER[k]);
    }
    PolicyParams::from_array(v).with_frozen_gamma(freeze_gamma)
}

impl EvalSet {
    pub fn random<R: Rng>(n: usize, duration: f64, start_offset: f64, track_length: f64, freeze_gamma: bool, rng: &mut R) -> Self {
        let pairings = (0..n)
            .map(|i| Pairing {
                opponent: random_params(rng, freeze_gamma),
                s0: rng.random_range(0.0..track_length),
                swap: i % 2 == 1,
            })
            .collect();
        Self { pairings, duration, start_offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub pcs: PcsPoint,
    pub crash_rate: f64,
    pub overtake_rate: f64,
    pub skipped: usize,
}

impl Evaluation {
    pub fn from_pcs(pcs: PcsPoint) -> Self {
        Self { pcs, crash_rate: 0.0, overtake_rate: 0.0, skipped: 0 }
    }
}

/// Plays two planners head to head from a side-by-side start.
pub fn head_to_head(env: &Arc<PlannerEnv>, ego: PolicyParams, opp: PolicyParams, s0: f64, offset: f64, swap: bool, duration: f64) -> Result<Segment> {
    let init = side_by_side(&env.track, s0, offset, swap);
    let mut sim = Simulation::new(&env.track, &env.vehicle, env.footprint, env.planner.replan_period, init.to_vec())?.with_scans(true);
    let mut a = LatticePlanner::new(Arc::clone(env), ego);
    let mut b = LatticePlanner::new(Arc::clone(env), opp);
    let mut drivers: [&mut dyn Driver; 2] = [&mut a, &mut b];
    sim.run(&mut drivers, duration)
}

/// Evaluates policies on a fixed [`EvalSet`].
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub env: Arc<PlannerEnv>,
    pub set: EvalSet,
    pub ttc_clamp: f64,
    pub exploration_bonus: bool,
}

impl Evaluator {
    pub fn evaluate(&self, params: &PolicyParams) -> Result<Evaluation> {
        let mut agg = 0.0;
        let mut res = 0.0;
        let mut crashes = 0usize;
        let mut overtakes = 0usize;
        let mut done = 0usize;
        let mut skipped = 0usize;
        for p in &self.set.pairings {
            let seg = match head_to_head(&self.env, *params, p.opponent, p.s0, self.set.start_offset, p.swap, self.set.duration) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("pairing at s0={:.2} skipped: {e}", p.s0);
                    skipped += 1;
                    continue;
                }
            };
            let (ego, opp) = (&seg.trajectories[0], &seg.trajectories[1]);
            let mut a = g_agg(&[(ego, opp)])?;
            let mut r = g_res(&[ego], self.ttc_clamp)?;
            let crashed = seg.collisions[0];
            let was_behind = ego.states.iter().zip(&opp.states).any(|(e, o)| e.s < o.s);
            let overtook = was_behind && ego.last().s > opp.last().s;
            if self.exploration_bonus {
                if overtook {
                    a *= 1.1;
                }
                if crashed {
                    a *= 1.1;
                    r += 1.0;
                }
            }
            agg += a;
            res += r;
            crashes += crashed as usize;
            overtakes += overtook as usize;
            done += 1;
        }
        if done == 0 {
            return Err(Error::Simulation(format!("all {skipped} evaluation rollouts failed")));
        }
        let n = done as f64;
        Ok(Evaluation {
            pcs: PcsPoint::new(agg / n, res / n),
            crash_rate: crashes as f64 / n,
            overtake_rate: overtakes as f64 / n,
            skipped,
        })
    }
}
