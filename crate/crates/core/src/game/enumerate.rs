//! Exhaustive game-tree enumeration with shared prefixes.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{decode_prefix, encode_prefix, leaf_count, split_joint, Leaf, OutcomeTable, TerminalOutcome, BRANCH};
use super::{terminal_utility, GameHistory};
use crate::error::Result;
use crate::pcs::{apply_action, g_agg_window, g_res, PcsAction, PcsNormalizer, PcsPoint, PolicyCollection, PolicyEntry};
use crate::planner::{LatticePlanner, PlannerEnv};
use crate::sim::{side_by_side, Driver, Simulation, Trajectory};

/// A two-player game played in fixed steps with PCS actions between steps.
pub trait GameModel: Sync {
    type State: Clone + Send + Sync;

    /// Advances one game step and records both agents' observations.
    fn play_step(&self, state: &mut Self::State) -> Result<()>;

    fn apply(&self, state: &mut Self::State, ego: PcsAction, opp: PcsAction);

    fn history(&self, state: &Self::State) -> GameHistory;

    fn outcome(&self, state: &Self::State) -> TerminalOutcome;
}

/// Outcomes for every joint sequence plus the ego history at every decision node.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTree {
    pub table: OutcomeTable,
    /// `histories[j][n]` for node `n` at decision level `j`; `None` below a failure.
    pub histories: Vec<Vec<Option<GameHistory>>>,
}

enum Item {
    Leaf(usize, Leaf),
    Node(usize, usize, GameHistory),
}

/// Plays every joint action sequence from `root`. Sibling branches share the
/// simulated prefix by cloning the state at each decision point.
pub fn enumerate_game_tree<G: GameModel>(model: &G, root: G::State, m: usize, games: &AtomicU64) -> GameTree {
    assert!(m >= 1);
    let mut items = Vec::new();
    let mut st = root;
    match model.play_step(&mut st) {
        Ok(()) => expand(model, st, m, 0, 0, &mut items),
        Err(e) => {
            log::warn!("observation step failed: {e}");
            fail_below(m, 0, 0, &mut items);
        }
    }
    let mut table = OutcomeTable::new(m);
    let mut histories: Vec<Vec<Option<GameHistory>>> = (0..m - 1).map(|j| vec![None; BRANCH.pow(j as u32)]).collect();
    for it in items {
        match it {
            Item::Leaf(i, l) => {
                if matches!(l, Leaf::Done(_)) {
                    games.fetch_add(1, Ordering::Relaxed);
                }
                table.leaves[i] = l;
            }
            Item::Node(j, n, h) => histories[j][n] = Some(h),
        }
    }
    GameTree { table, histories }
}

fn fail_below(m: usize, level: usize, node: usize, out: &mut Vec<Item>) {
    let span = leaf_count(m) / BRANCH.pow(level as u32);
    for i in node * span..(node + 1) * span {
        out.push(Item::Leaf(i, Leaf::Failed));
    }
}

// `st` has finished step `level + 1`; decision `level` comes next.
fn expand<G: GameModel>(model: &G, st: G::State, m: usize, level: usize, node: usize, out: &mut Vec<Item>) {
    if level == m - 1 {
        out.push(Item::Leaf(node, Leaf::Done(model.outcome(&st))));
        return;
    }
    out.push(Item::Node(level, node, model.history(&st)));
    let children: Vec<Vec<Item>> = (0..BRANCH)
        .into_par_iter()
        .map(|joint| {
            let mut local = Vec::new();
            let mut child = st.clone();
            let (a, b) = split_joint(joint);
            model.apply(&mut child, PcsAction::ALL[a], PcsAction::ALL[b]);
            let id = node * BRANCH + joint;
            match model.play_step(&mut child) {
                Ok(()) => expand(model, child, m, level + 1, id, &mut local),
                Err(e) => {
                    log::warn!("branch {:?} failed: {e}", decode_prefix(level + 1, id));
                    fail_below(m, level + 1, id, &mut local);
                }
            }
            local
        })
        .collect();
    out.extend(children.into_iter().flatten());
}

/// Replays one joint sequence from scratch; returns the state after every step.
pub fn replay<G: GameModel>(model: &G, root: G::State, joint: &[usize]) -> Result<Vec<G::State>> {
    let mut st = root;
    model.play_step(&mut st)?;
    let mut out = vec![st.clone()];
    for &j in joint {
        let (a, b) = split_joint(j);
        model.apply(&mut st, PcsAction::ALL[a], PcsAction::ALL[b]);
        model.play_step(&mut st)?;
        out.push(st.clone());
    }
    Ok(out)
}

/// Leaf index of a full joint sequence.
pub fn leaf_index(joint: &[usize]) -> usize {
    encode_prefix(joint)
}

/// Start line and side assignment of one game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartPose {
    pub s0: f64,
    pub swap: bool,
}

impl StartPose {
    /// Pose for start pair `index`, drawn from a generator seeded by `(seed, index)`.
    pub fn seeded(seed: u64, index: u64, track_length: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::es::generation_seed(seed, index));
        Self { s0: rng.random_range(0.0..track_length), swap: rng.random_bool(0.5) }
    }
}

/// Both planners on the simulator, switching policies inside a normalized collection.
pub struct SimGame<'a> {
    pub env: &'a Arc<PlannerEnv>,
    pub collection: &'a PolicyCollection,
    pub normalizer: PcsNormalizer,
    pub epsilon: f64,
    pub ttc_clamp: f64,
    pub step_duration: f64,
    pub start_offset: f64,
}

#[derive(Debug, Clone)]
pub struct SimGameState<'a> {
    pub sim: Simulation<'a>,
    pub ego: LatticePlanner,
    pub opp: LatticePlanner,
    pub ego_entry: PolicyEntry,
    pub opp_entry: PolicyEntry,
    pub history: GameHistory,
    /// Trajectories of the most recent step (ego, opponent).
    pub last: Option<(Trajectory, Trajectory)>,
}

impl<'a> SimGame<'a> {
    pub fn root(&self, ego: PolicyEntry, opp: PolicyEntry, pose: StartPose) -> Result<SimGameState<'a>> {
        let init = side_by_side(&self.env.track, pose.s0, self.start_offset, pose.swap);
        let sim = Simulation::new(&self.env.track, &self.env.vehicle, self.env.footprint, self.env.planner.replan_period, init.to_vec())?
            .with_scans(true);
        Ok(SimGameState {
            sim,
            ego: LatticePlanner::new(Arc::clone(self.env), ego.params),
            opp: LatticePlanner::new(Arc::clone(self.env), opp.params),
            ego_entry: ego,
            opp_entry: opp,
            history: GameHistory::default(),
            last: None,
        })
    }

    /// Normalized PCS estimate of `agent` from one step of trajectories.
    pub fn observe(&self, agent: &Trajectory, other: &Trajectory) -> PcsPoint {
        estimate_pcs(agent, other, self.ttc_clamp, &self.normalizer)
    }
}

/// PCS coordinates of one agent over a window: progress advantage and restraint.
/// A window without scans (the episode was already frozen) counts as least restrained.
pub fn estimate_pcs(agent: &Trajectory, other: &Trajectory, ttc_clamp: f64, normalizer: &PcsNormalizer) -> PcsPoint {
    let agg = g_agg_window(agent, other);
    let res = g_res(&[agent], ttc_clamp).unwrap_or(-ttc_clamp);
    normalizer.apply(PcsPoint::new(agg, res))
}

impl<'a> GameModel for SimGame<'a> {
    type State = SimGameState<'a>;

    fn play_step(&self, st: &mut Self::State) -> Result<()> {
        let mut drivers: [&mut dyn Driver; 2] = [&mut st.ego, &mut st.opp];
        let seg = st.sim.run(&mut drivers, self.step_duration)?;
        let mut it = seg.trajectories.into_iter();
        let (e, o) = (it.next().unwrap(), it.next().unwrap());
        st.history.ego_pcs.push(st.ego_entry.pcs);
        st.history.opp_pcs.push(self.observe(&o, &e));
        st.last = Some((e, o));
        Ok(())
    }

    fn apply(&self, st: &mut Self::State, ego: PcsAction, opp: PcsAction) {
        let (_, e) = apply_action(st.ego_entry.pcs, ego, self.epsilon, self.collection);
        let (_, o) = apply_action(st.opp_entry.pcs, opp, self.epsilon, self.collection);
        st.ego_entry = e;
        st.opp_entry = o;
        st.ego.set_params(e.params);
        st.opp.set_params(o.params);
        st.history.ego_actions.push(ego);
    }

    fn history(&self, st: &Self::State) -> GameHistory {
        st.history.clone()
    }

    fn outcome(&self, st: &Self::State) -> TerminalOutcome {
        let s = st.sim.states();
        terminal_utility(s[0].s, s[1].s, st.sim.collisions().iter().any(|&c| c))
    }
}
