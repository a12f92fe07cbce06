//! Agents, the online regret-matching step and single races.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::game::{estimate_pcs, terminal_utility, GameHistory, StartPose};
use crate::pcs::{apply_action, PcsAction, PcsNormalizer, PcsPoint, PolicyCollection, PolicyEntry, ACTION_COUNT};
use crate::planner::{LatticePlanner, PlannerEnv, RacelineFollower};
use crate::regret::{encode, Mlp, Scalar, FEATURE_LEN};
use crate::sim::{side_by_side, ControlInput, Driver, Observation, Simulation, Trajectory};

/// Anything that maps a feature vector to an approximate regret.
pub trait RegretModel: Send + Sync + fmt::Debug {
    fn input_len(&self) -> usize;

    /// Raw (unclipped) prediction.
    fn regret(&self, features: &[f64]) -> f64;
}

impl<T: Scalar> RegretModel for Mlp<T> {
    fn input_len(&self) -> usize {
        self.input
    }

    fn regret(&self, features: &[f64]) -> f64 {
        let x: Vec<T> = features.iter().map(|v| T::from_f64(*v).unwrap()).collect();
        self.forward(&x).to_f64().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    /// Switches policies online by regret matching.
    Gt,
    /// Keeps its starting policy for the whole race.
    NonGt,
    /// A fixed policy drawn from every explored policy.
    Random,
    /// Raceline follower with its own tuning; no lattice planner.
    ExternalFixed,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Gt => "gt",
            AgentKind::NonGt => "non-gt",
            AgentKind::Random => "random",
            AgentKind::ExternalFixed => "unseen",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gt" => Ok(AgentKind::Gt),
            "non-gt" => Ok(AgentKind::NonGt),
            "random" => Ok(AgentKind::Random),
            "unseen" | "external" | "external-fixed" => Ok(AgentKind::ExternalFixed),
            _ => Err(Error::InvalidArgument(format!("unknown agent kind {s:?} (gt, non-gt, random, unseen)"))),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartPolicy {
    RandomFromPareto,
    RandomFromAll,
    Explicit(PolicyEntry),
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub start: StartPolicy,
    pub model: Option<Arc<dyn RegretModel>>,
    pub seed: u64,
}

impl AgentSpec {
    pub fn gt(model: Arc<dyn RegretModel>, seed: u64) -> Self {
        Self { kind: AgentKind::Gt, start: StartPolicy::RandomFromPareto, model: Some(model), seed }
    }

    pub fn non_gt(seed: u64) -> Self {
        Self { kind: AgentKind::NonGt, start: StartPolicy::RandomFromPareto, model: None, seed }
    }

    pub fn random(seed: u64) -> Self {
        Self { kind: AgentKind::Random, start: StartPolicy::RandomFromAll, model: None, seed }
    }

    pub fn external() -> Self {
        Self { kind: AgentKind::ExternalFixed, start: StartPolicy::RandomFromAll, model: None, seed: 0 }
    }

    /// Builds a spec of `kind`; GT needs a model.
    pub fn of_kind(kind: AgentKind, model: Option<Arc<dyn RegretModel>>, seed: u64) -> Result<Self> {
        match kind {
            AgentKind::Gt => Ok(Self::gt(model.ok_or_else(|| Error::InvalidArgument("a GT agent needs a regret model".into()))?, seed)),
            AgentKind::NonGt => Ok(Self::non_gt(seed)),
            AgentKind::Random => Ok(Self::random(seed)),
            AgentKind::ExternalFixed => Ok(Self::external()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = &self.model {
            if m.input_len() != FEATURE_LEN {
                return Err(Error::InvalidArgument(format!("regret model expects {} features, the encoder produces {FEATURE_LEN}", m.input_len())));
            }
        } else if self.kind == AgentKind::Gt {
            return Err(Error::InvalidArgument("a GT agent needs a regret model".into()));
        }
        Ok(())
    }

    /// Starting policy, or `None` for the external follower.
    pub fn starting_policy(&self, ctx: &RaceContext) -> Option<PolicyEntry> {
        let pick = |c: &PolicyCollection| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            c.entries[rng.random_range(0..c.len())]
        };
        match (self.kind, self.start) {
            (AgentKind::ExternalFixed, _) => None,
            (_, StartPolicy::Explicit(e)) => Some(e),
            (_, StartPolicy::RandomFromPareto) => Some(pick(&ctx.pareto)),
            (_, StartPolicy::RandomFromAll) => Some(pick(&ctx.all)),
        }
    }
}

/// Everything a race needs besides the two agents. Collections carry
/// normalized PCS coordinates.
#[derive(Debug, Clone)]
pub struct RaceContext {
    pub env: Arc<PlannerEnv>,
    pub all: PolicyCollection,
    pub pareto: PolicyCollection,
    /// Collection GT agents switch within.
    pub strategy: PolicyCollection,
    pub normalizer: PcsNormalizer,
    pub game: GameConfig,
    pub epsilon: f64,
    pub ttc_clamp: f64,
    pub unseen_speed_scale: f64,
    pub unseen_lookahead: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtDecision {
    pub action: PcsAction,
    pub entry: PolicyEntry,
    /// Clipped predictions in action order.
    pub regrets: [f64; ACTION_COUNT],
    /// Every clipped regret was zero and the default action was taken.
    pub defaulted: bool,
}

/// Picks the action with the largest clipped predicted regret (ties to the
/// lowest index, all zero to `default_action`) and snaps to the new policy.
pub fn gt_step(
    history: &GameHistory,
    model: &dyn RegretModel,
    collection: &PolicyCollection,
    current: PcsPoint,
    epsilon: f64,
    m: usize,
    default_action: PcsAction,
) -> Result<GtDecision> {
    if model.input_len() != FEATURE_LEN {
        return Err(Error::InvalidArgument(format!("regret model expects {} features, the encoder produces {FEATURE_LEN}", model.input_len())));
    }
    let mut regrets = [0.0; ACTION_COUNT];
    for a in PcsAction::ALL {
        let r = model.regret(&encode(history, a, m)?);
        if r.is_nan() {
            return Err(Error::NonFinite(format!("predicted regret for {a}")));
        }
        regrets[a.index()] = r.max(0.0);
    }
    let mut best = 0;
    for k in 1..ACTION_COUNT {
        if regrets[k] > regrets[best] {
            best = k;
        }
    }
    let defaulted = regrets[best] == 0.0;
    let action = if defaulted { default_action } else { PcsAction::ALL[best] };
    let (_, entry) = apply_action(current, action, epsilon, collection);
    Ok(GtDecision { action, entry, regrets, defaulted })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    Ego,
    Opp,
    Draw,
}

impl Winner {
    pub fn name(self) -> &'static str {
        match self {
            Winner::Ego => "ego",
            Winner::Opp => "opp",
            Winner::Draw => "draw",
        }
    }
}

/// One online decision of a GT agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionLogRow {
    /// Game step the decision leads into.
    pub step: usize,
    pub opp_pcs: PcsPoint,
    pub regrets: [f64; ACTION_COUNT],
    pub action: PcsAction,
    pub defaulted: bool,
    pub new_pcs: PcsPoint,
}

/// PCS state of both agents after one game step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Policy each agent drove with; `None` for the external follower.
    pub policy: [Option<PcsPoint>; 2],
    /// PCS estimated from the step's trajectories.
    pub observed: [PcsPoint; 2],
    pub s: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct RaceResult {
    pub winner: Winner,
    /// `|s_ego - s_opp|`; zero for a draw.
    pub margin: f64,
    pub collision: bool,
    /// Signed terminal utility of the ego.
    pub utility_ego: f64,
    pub final_s: [f64; 2],
    /// Decisions of each agent (empty for non-GT kinds).
    pub logs: [Vec<ActionLogRow>; 2],
    pub steps: Vec<StepRecord>,
    pub trajectories: [Trajectory; 2],
}

enum AgentDriver {
    Planner(Box<LatticePlanner>),
    Follower(RacelineFollower),
    #[cfg(test)]
    Custom(Box<dyn Driver>),
}

impl Driver for AgentDriver {
    fn act(&mut self, obs: &Observation<'_>) -> Result<ControlInput> {
        match self {
            AgentDriver::Planner(p) => p.act(obs),
            AgentDriver::Follower(f) => f.act(obs),
            #[cfg(test)]
            AgentDriver::Custom(d) => d.act(obs),
        }
    }
}

struct RaceAgent {
    driver: AgentDriver,
    entry: Option<PolicyEntry>,
    model: Option<Arc<dyn RegretModel>>,
    history: GameHistory,
    log: Vec<ActionLogRow>,
}

impl RaceAgent {
    fn new(spec: &AgentSpec, ctx: &RaceContext) -> Result<Self> {
        spec.validate()?;
        let entry = spec.starting_policy(ctx);
        let driver = match entry {
            Some(e) => AgentDriver::Planner(Box::new(LatticePlanner::new(Arc::clone(&ctx.env), e.params))),
            None => AgentDriver::Follower(RacelineFollower::new(
                Arc::clone(&ctx.env.raceline),
                ctx.env.vehicle.wheelbase(),
                ctx.unseen_lookahead,
                ctx.unseen_speed_scale,
            )),
        };
        let model = if spec.kind == AgentKind::Gt { spec.model.clone() } else { None };
        Ok(Self { driver, entry, model, history: GameHistory::default(), log: Vec::new() })
    }

    fn decide(&mut self, ctx: &RaceContext, step: usize) -> Result<()> {
        let (Some(model), Some(current)) = (&self.model, self.entry) else {
            return Ok(());
        };
        let default = PcsAction::from_index(ctx.game.default_action)?;
        let d = gt_step(&self.history, model.as_ref(), &ctx.strategy, current.pcs, ctx.epsilon, ctx.game.m, default)?;
        self.log.push(ActionLogRow {
            step,
            opp_pcs: *self.history.opp_pcs.last().expect("decisions follow an observed step"),
            regrets: d.regrets,
            action: d.action,
            defaulted: d.defaulted,
            new_pcs: d.entry.pcs,
        });
        self.history.ego_actions.push(d.action);
        self.entry = Some(d.entry);
        if let AgentDriver::Planner(p) = &mut self.driver {
            p.set_params(d.entry.params);
        }
        Ok(())
    }
}

/// Races `ego` (agent 0) against `opp` (agent 1): one observation step, then
/// `m - 1` steps each preceded by a decision of every GT agent.
pub fn run_race(ctx: &RaceContext, ego: &AgentSpec, opp: &AgentSpec, start: StartPose) -> Result<RaceResult> {
    let agents = [RaceAgent::new(ego, ctx)?, RaceAgent::new(opp, ctx)?];
    race_agents(ctx, agents, start)
}

fn race_agents(ctx: &RaceContext, mut agents: [RaceAgent; 2], start: StartPose) -> Result<RaceResult> {
    let env = &ctx.env;
    let init = side_by_side(&env.track, start.s0, ctx.game.start_offset, start.swap);
    let mut sim = Simulation::new(&env.track, &env.vehicle, env.footprint, env.planner.replan_period, init.to_vec())?.with_scans(true);
    let mut steps = Vec::with_capacity(ctx.game.m);
    let mut full: Option<[Trajectory; 2]> = None;
    for step in 1..=ctx.game.m {
        if step > 1 {
            for a in agents.iter_mut() {
                a.decide(ctx, step)?;
            }
        }
        let seg = {
            let [a, b] = &mut agents;
            let mut drivers: [&mut dyn Driver; 2] = [&mut a.driver, &mut b.driver];
            sim.run(&mut drivers, ctx.game.step_duration)?
        };
        let t = &seg.trajectories;
        let observed = [
            estimate_pcs(&t[0], &t[1], ctx.ttc_clamp, &ctx.normalizer),
            estimate_pcs(&t[1], &t[0], ctx.ttc_clamp, &ctx.normalizer),
        ];
        for (i, a) in agents.iter_mut().enumerate() {
            a.history.ego_pcs.push(a.entry.map(|e| e.pcs).unwrap_or(observed[i]));
            a.history.opp_pcs.push(observed[1 - i]);
        }
        steps.push(StepRecord {
            step,
            policy: [agents[0].entry.map(|e| e.pcs), agents[1].entry.map(|e| e.pcs)],
            observed,
            s: [t[0].last().s, t[1].last().s],
        });
        match &mut full {
            None => full = Some([t[0].clone(), t[1].clone()]),
            Some([a, b]) => {
                a.extend_with(&t[0]);
                b.extend_with(&t[1]);
            }
        }
    }
    let st = sim.states();
    let collision = sim.collisions().iter().any(|&c| c);
    let out = terminal_utility(st[0].s, st[1].s, collision);
    let u = out.utility_ego;
    let winner = if u > 0.0 {
        Winner::Ego
    } else if u < 0.0 {
        Winner::Opp
    } else {
        Winner::Draw
    };
    let [a, b] = agents;
    Ok(RaceResult {
        winner,
        margin: u.abs(),
        collision,
        utility_ego: u,
        final_s: out.final_s,
        logs: [a.log, b.log],
        steps,
        trajectories: full.expect("m >= 1"),
    })
}

/// Writes the action log CSV of one agent.
pub fn write_action_log(path: &Path, log: &[ActionLogRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "step,opp_agg,opp_res,r_agg+,r_agg-,r_res+,r_res-,action,new_agg,new_res,defaulted").map_err(io)?;
    for r in log {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.opp_pcs.agg,
            r.opp_pcs.res,
            r.regrets[0],
            r.regrets[1],
            r.regrets[2],
            r.regrets[3],
            r.action,
            r.new_pcs.agg,
            r.new_pcs.res,
            r.defaulted as u8
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes the one-row race summary CSV.
pub fn write_race_summary(path: &Path, r: &RaceResult) -> Result<()> {
    let text = format!(
        "winner,margin,collision,utility_ego,s_ego,s_opp\n{},{},{},{},{},{}\n",
        r.winner.name(),
        r.margin,
        r.collision as u8,
        r.utility_ego,
        r.final_s[0],
        r.final_s[1]
    );
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes per-step PCS points of both agents (policy and observed).
pub fn write_pcs_trace(path: &Path, steps: &[StepRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "step,agent,policy_agg,policy_res,observed_agg,observed_res,s").map_err(io)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in steps {
        for i in 0..2 {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.step,
                i,
                opt(r.policy[i].map(|p| p.agg)),
                opt(r.policy[i].map(|p| p.res)),
                r.observed[i].agg,
                r.observed[i].res,
                r.s[i]
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::config::{PlannerConfig, TrackConfig, VehicleConfig};
    use crate::pcs::CollectionLabel;
    use crate::planner::PolicyParams;
    use crate::track::{synthetic_oval, OvalSpec, Raceline};
    use proptest::prelude::*;

    /// Returns fixed outputs indexed by the candidate action.
    #[derive(Debug)]
    pub(crate) struct Fixed(pub [f64; 4]);

    impl RegretModel for Fixed {
        fn input_len(&self) -> usize {
            FEATURE_LEN
        }

        fn regret(&self, f: &[f64]) -> f64 {
            let k = f[FEATURE_LEN - ACTION_COUNT..].iter().position(|&v| v == 1.0).unwrap();
            self.0[k]
        }
    }

    fn grid_collection() -> PolicyCollection {
        let mut entries = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let mut w = [3.0; 7];
                w[0] = 1.0 + i as f64;
                w[4] = 1.0 + j as f64;
                entries.push(PolicyEntry { params: PolicyParams::new(0.9, w).unwrap(), pcs: PcsPoint::new(i as f64 / 4.0, j as f64 / 4.0) });
            }
        }
        PolicyCollection::new(entries, CollectionLabel::All).unwrap()
    }

    pub(crate) fn test_context(m: usize, step: f64) -> RaceContext {
        let (track, _, _) = synthetic_oval(&OvalSpec::default()).unwrap();
        let rl = Raceline::from_centerline(&track, TrackConfig::default().raceline_speed).unwrap();
        let planner = PlannerConfig { n_long: 3, n_lat: 5, ..Default::default() };
        let env = Arc::new(PlannerEnv::new(Arc::new(track), Arc::new(rl), planner, VehicleConfig::default(), 0.3));
        let all = grid_collection();
        RaceContext {
            env,
            pareto: all.clone(),
            strategy: all.clone(),
            all,
            normalizer: PcsNormalizer::identity(),
            game: GameConfig { m, step_duration: step, ..Default::default() },
            epsilon: 0.25,
            ttc_clamp: 10.0,
            unseen_speed_scale: 0.9,
            unseen_lookahead: 1.5,
        }
    }

    fn hist() -> GameHistory {
        GameHistory { ego_pcs: vec![PcsPoint::new(0.5, 0.5)], opp_pcs: vec![PcsPoint::new(0.25, 0.75)], ego_actions: vec![] }
    }

    #[test]
    fn forced_first_action() {
        let c = grid_collection();
        let d = gt_step(&hist(), &Fixed([1.0, 0.0, 0.0, 0.0]), &c, PcsPoint::new(0.5, 0.5), 0.25, 4, PcsAction::ResMinus).unwrap();
        assert_eq!(d.action, PcsAction::AggPlus);
        assert!(!d.defaulted);
        assert_eq!(d.entry.pcs, PcsPoint::new(0.75, 0.5));
    }

    #[test]
    fn all_nonpositive_takes_default() {
        let c = grid_collection();
        let d = gt_step(&hist(), &Fixed([-1.0, 0.0, -0.2, -3.0]), &c, PcsPoint::new(0.5, 0.5), 0.25, 4, PcsAction::ResMinus).unwrap();
        assert_eq!(d.action, PcsAction::ResMinus);
        assert!(d.defaulted);
        assert_eq!(d.regrets, [0.0; 4]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let c = grid_collection();
        let d = gt_step(&hist(), &Fixed([0.1, 0.5, 0.5, 0.2]), &c, PcsPoint::new(0.5, 0.5), 0.25, 4, PcsAction::AggPlus).unwrap();
        assert_eq!(d.action, PcsAction::AggMinus);
    }

    #[test]
    fn argmax_matches_exhaustive_comparison() {
        let c = grid_collection();
        let model = Mlp::<f64>::random(FEATURE_LEN, 16, crate::config::Activation::LeakyRelu, 0.01, 3);
        let h = hist();
        let d = gt_step(&h, &model, &c, PcsPoint::new(0.5, 0.5), 0.25, 3, PcsAction::AggPlus).unwrap();
        let raw: Vec<f64> = PcsAction::ALL.iter().map(|a| model.regret(&encode(&h, *a, 3).unwrap())).collect();
        if raw.iter().all(|&r| r <= 0.0) {
            assert!(d.defaulted);
        } else {
            let best = (0..4).fold(0, |b, k| if raw[k].max(0.0) > raw[b].max(0.0) { k } else { b });
            assert_eq!(d.action.index(), best);
        }
    }

    #[test]
    fn model_width_mismatch_is_rejected() {
        let model = Mlp::<f32>::zeros(12, 4, crate::config::Activation::LeakyRelu, 0.01);
        let r = gt_step(&hist(), &model, &grid_collection(), PcsPoint::new(0.5, 0.5), 0.25, 4, PcsAction::AggPlus);
        assert!(r.is_err());
        let spec = AgentSpec::gt(Arc::new(model), 1);
        assert!(spec.validate().is_err());
        assert!(AgentSpec::of_kind(AgentKind::Gt, None, 1).is_err());
    }

    proptest! {
        // Sign-preserving strictly increasing maps keep the clipped argmax.
        #[test]
        fn argmax_invariant_under_increasing_maps(out in prop::collection::vec(-2.0f64..2.0, 4), scale in 0.1f64..10.0, cube in any::<bool>()) {
            let c = grid_collection();
            let f = |v: f64| if cube { v.powi(3) * scale } else { v * scale };
            let a = [out[0], out[1], out[2], out[3]];
            let b = a.map(f);
            let p = PcsPoint::new(0.5, 0.5);
            let da = gt_step(&hist(), &Fixed(a), &c, p, 0.25, 4, PcsAction::ResPlus).unwrap();
            let db = gt_step(&hist(), &Fixed(b), &c, p, 0.25, 4, PcsAction::ResPlus).unwrap();
            prop_assert_eq!(da.action, db.action);
            prop_assert_eq!(da.defaulted, db.defaulted);
        }
    }

    fn explicit(ctx: &RaceContext, i: usize) -> StartPolicy {
        StartPolicy::Explicit(ctx.all.entries[i])
    }

    #[test]
    fn side_swap_negates_margin() {
        let ctx = test_context(2, 1.5);
        let a = AgentSpec { start: explicit(&ctx, 3), ..AgentSpec::gt(Arc::new(Fixed([0.0, 1.0, 0.0, 0.0])), 1) };
        let b = AgentSpec { start: explicit(&ctx, 17), ..AgentSpec::gt(Arc::new(Fixed([0.0, 0.0, 2.0, 0.0])), 2) };
        let pose = StartPose { s0: 3.0, swap: false };
        let r1 = run_race(&ctx, &a, &b, pose).unwrap();
        let r2 = run_race(&ctx, &b, &a, StartPose { swap: true, ..pose }).unwrap();
        assert_eq!(r1.utility_ego, -r2.utility_ego);
        assert_eq!(r1.logs[0], r2.logs[1]);
        assert_eq!(r1.logs[0].len(), 1);
        assert_eq!(r1.logs[0][0].action, PcsAction::AggMinus);
    }

    #[test]
    fn parked_opponent_loses_by_ego_progress() {
        let ctx = test_context(2, 1.5);
        let ego = RaceAgent::new(&AgentSpec { start: explicit(&ctx, 12), ..AgentSpec::non_gt(0) }, &ctx).unwrap();
        let parked = RaceAgent {
            driver: AgentDriver::Custom(Box::new(|_: &Observation<'_>| Ok(ControlInput::stop()))),
            entry: None,
            model: None,
            history: GameHistory::default(),
            log: Vec::new(),
        };
        let s0 = 3.0;
        let r = race_agents(&ctx, [ego, parked], StartPose { s0, swap: false }).unwrap();
        assert_eq!(r.winner, Winner::Ego);
        assert!(!r.collision);
        let progress = r.final_s[0] - s0;
        assert!(progress > 1.0);
        assert!((r.margin - progress).abs() < 0.05, "margin {} progress {progress}", r.margin);
    }

    #[test]
    fn overlapping_start_is_a_collision_draw() {
        let mut ctx = test_context(2, 0.5);
        ctx.game.start_offset = 0.0;
        let r = run_race(&ctx, &AgentSpec::non_gt(1), &AgentSpec::non_gt(2), StartPose { s0: 3.0, swap: false }).unwrap();
        assert!(r.collision);
        assert_eq!(r.winner, Winner::Draw);
        assert_eq!(r.margin, 0.0);
        assert_eq!(r.utility_ego, 0.0);
    }

    #[test]
    fn external_follower_drives() {
        let ctx = test_context(2, 1.0);
        let r = run_race(&ctx, &AgentSpec::external(), &AgentSpec::random(4), StartPose { s0: 20.0, swap: true }).unwrap();
        assert!(r.final_s[0] > 20.5);
        assert_eq!(r.steps.len(), 2);
        assert!(r.steps[0].policy[0].is_none());
        assert!(r.margin >= 0.0);
    }
}
