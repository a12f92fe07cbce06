//! Glue shared by the command line and the end-to-end tests.

use std::sync::Arc;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::game::{build_dataset, DatasetSummary, RegretSample, SimGame, StartPose};
use crate::harness::RaceContext;
use crate::pcs::{PcsNormalizer, PolicyCollection};
use crate::planner::PlannerEnv;
use crate::track::{Raceline, TrackMap};

/// Track, raceline and planner settings from a configuration.
pub fn build_env(cfg: &Config) -> Result<Arc<PlannerEnv>> {
    let track = TrackMap::from_config(&cfg.track)?;
    let raceline = match &cfg.track.raceline_file {
        Some(p) => Raceline::load(p, cfg.track.raceline_speed)?,
        None => Raceline::from_centerline(&track, cfg.track.raceline_speed)?,
    };
    Ok(Arc::new(PlannerEnv::new(Arc::new(track), Arc::new(raceline), cfg.planner.clone(), cfg.vehicle.clone(), cfg.track.footprint_radius)))
}

/// Policy sets a data collection run works from, all in raw PCS coordinates.
#[derive(Debug, Clone)]
pub struct CollectionInputs<'a> {
    /// Policies the agents switch within.
    pub collection: &'a PolicyCollection,
    pub ego_starts: &'a PolicyCollection,
    pub opp_starts: &'a PolicyCollection,
    pub normalizer: PcsNormalizer,
}

/// Enumerates one game tree for every pair in the first `n_init` ego starts
/// times the first `n_init` opponent starts.
pub fn collect_dataset(env: &Arc<PlannerEnv>, cfg: &Config, inputs: &CollectionInputs<'_>, seed: u64) -> Result<(Vec<RegretSample>, DatasetSummary)> {
    let g = &cfg.game;
    let n = g.n_init;
    if n == 0 || inputs.ego_starts.len() < n || inputs.opp_starts.len() < n {
        return Err(Error::InvalidArgument(format!(
            "n_init = {n} needs that many starting policies per side, have {} and {}",
            inputs.ego_starts.len(),
            inputs.opp_starts.len()
        )));
    }
    let norm = |c: &PolicyCollection| c.map_pcs(|p| inputs.normalizer.apply(p));
    let collection = norm(inputs.collection);
    let (ego, opp) = (norm(inputs.ego_starts), norm(inputs.opp_starts));
    let model = SimGame {
        env,
        collection: &collection,
        normalizer: inputs.normalizer,
        epsilon: cfg.pcs.epsilon,
        ttc_clamp: cfg.pcs.ttc_clamp,
        step_duration: g.step_duration,
        start_offset: g.start_offset,
    };
    let mut roots = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let pose = StartPose::seeded(seed, (i * n + j) as u64, env.track.length());
            roots.push(model.root(ego.entries[i], opp.entries[j], pose)?);
        }
    }
    build_dataset(&model, roots, g.m, g.passes)
}

/// Race context over raw collections; PCS coordinates are normalized here.
pub fn race_context(
    env: Arc<PlannerEnv>,
    cfg: &Config,
    all: &PolicyCollection,
    pareto: &PolicyCollection,
    strategy: &PolicyCollection,
    normalizer: PcsNormalizer,
) -> RaceContext {
    let norm = |c: &PolicyCollection| c.map_pcs(|p| normalizer.apply(p));
    RaceContext {
        env,
        all: norm(all),
        pareto: norm(pareto),
        strategy: norm(strategy),
        normalizer,
        game: cfg.game.clone(),
        epsilon: cfg.pcs.epsilon,
        ttc_clamp: cfg.pcs.ttc_clamp,
        unseen_speed_scale: cfg.experiment.unseen_speed_scale,
        unseen_lookahead: cfg.experiment.unseen_lookahead,
    }
}
