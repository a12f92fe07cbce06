//! Two-player zero-sum game over PCS actions: enumeration, counterfactual
//! regrets and the regret training set.

pub mod enumerate;
pub mod tree;

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::binio::{read_file, ByteReader};
use crate::error::{Error, Result};
use crate::pcs::{PcsAction, PcsPoint, ACTION_COUNT};
use crate::regret::{encode, FeatureVector, FEATURE_LEN};

pub use enumerate::{enumerate_game_tree, estimate_pcs, leaf_index, replay, GameModel, GameTree, SimGame, SimGameState, StartPose};
pub use tree::{
    decode_prefix, describe, encode_prefix, game_count, joint_index, leaf_count, sample_count, samples_per_tree, split_joint,
    terminal_utility, CfrSolution, Leaf, NodeValues, OutcomeTable, TerminalOutcome, BRANCH,
};

/// What the ego has seen before a decision: one PCS point per finished step
/// for each agent, and its own past actions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GameHistory {
    pub ego_pcs: Vec<PcsPoint>,
    pub opp_pcs: Vec<PcsPoint>,
    pub ego_actions: Vec<PcsAction>,
}

impl GameHistory {
    /// Game step the next decision leads into (1-based).
    pub fn step(&self) -> usize {
        self.ego_pcs.len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretSample {
    pub features: FeatureVector,
    pub action: PcsAction,
    pub regret: f64,
}

/// Regret samples of one solved tree, in (level, node, action) order.
/// Returns the samples and the number skipped because a branch failed.
pub fn tree_samples(tree: &GameTree, m: usize, passes: usize) -> Result<(Vec<RegretSample>, usize)> {
    let sol = tree.table.solve()?;
    let mut out = Vec::with_capacity(samples_per_tree(m));
    let mut skipped = 0;
    for (j, level) in sol.levels.iter().enumerate() {
        for node in level {
            let hist = tree.histories[j][node.node].as_ref();
            for (k, r) in node.regrets.iter().enumerate() {
                match (hist, r) {
                    (Some(h), Some(r)) => {
                        let a = PcsAction::ALL[k];
                        // Passes replay identical deterministic games, so accumulation is a scale.
                        out.push(RegretSample { features: encode(h, a, m)?, action: a, regret: passes as f64 * r });
                    }
                    _ => skipped += 1,
                }
            }
        }
    }
    Ok((out, skipped))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSummary {
    pub trees: usize,
    pub games: u64,
    pub failed_branches: usize,
    pub samples: usize,
    pub skipped_samples: usize,
}

/// Enumerates one tree per root in parallel and collects the regret samples in
/// root order. Sample and game totals are checked against the tree arithmetic.
pub fn build_dataset<G: GameModel>(model: &G, roots: Vec<G::State>, m: usize, passes: usize) -> Result<(Vec<RegretSample>, DatasetSummary)> {
    let games = AtomicU64::new(0);
    let n = roots.len();
    let per_tree: Vec<Result<(Vec<RegretSample>, usize, usize)>> = roots
        .into_par_iter()
        .map(|root| {
            let tree = enumerate_game_tree(model, root, m, &games);
            let failed = tree.table.failed_count();
            let (s, skipped) = tree_samples(&tree, m, passes)?;
            Ok((s, skipped, failed))
        })
        .collect();
    let mut samples = Vec::new();
    let mut summary = DatasetSummary { trees: n, ..Default::default() };
    for r in per_tree {
        let (s, skipped, failed) = r?;
        summary.skipped_samples += skipped;
        summary.failed_branches += failed;
        samples.extend(s);
    }
    summary.games = games.load(Ordering::Relaxed);
    summary.samples = samples.len();
    let expected = samples_per_tree(m) * n;
    if summary.samples + summary.skipped_samples != expected {
        return Err(Error::Simulation(format!("sample count {} + {} skipped != {expected}", summary.samples, summary.skipped_samples)));
    }
    if summary.games + summary.failed_branches as u64 != (leaf_count(m) * n) as u64 {
        return Err(Error::Simulation(format!("game count {} + {} failed != {}", summary.games, summary.failed_branches, leaf_count(m) * n)));
    }
    if summary.failed_branches > 0 {
        log::warn!("{} branches failed, {} samples skipped", summary.failed_branches, summary.skipped_samples);
    }
    Ok((samples, summary))
}

const DATASET_MAGIC: &[u8; 4] = b"PCSD";
const DATASET_VERSION: u32 = 1;
const RECORD_LEN: usize = FEATURE_LEN * 4 + 1 + 4;

/// Streaming writer for the binary regret dataset.
pub struct DatasetWriter {
    path: PathBuf,
    out: BufWriter<std::fs::File>,
    count: usize,
}

impl DatasetWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(f);
        let mut head = Vec::with_capacity(16);
        head.extend_from_slice(DATASET_MAGIC);
        head.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        head.extend_from_slice(&(FEATURE_LEN as u32).to_le_bytes());
        head.extend_from_slice(&(ACTION_COUNT as u32).to_le_bytes());
        out.write_all(&head).map_err(|e| Error::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), out, count: 0 })
    }

    pub fn write(&mut self, s: &RegretSample) -> Result<()> {
        if !s.regret.is_finite() {
            return Err(Error::NonFinite(format!("regret of sample {}", self.count)));
        }
        let mut rec = Vec::with_capacity(RECORD_LEN);
        for v in s.features.iter() {
            rec.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        rec.push(s.action.index() as u8);
        rec.extend_from_slice(&(s.regret as f32).to_le_bytes());
        self.out.write_all(&rec).map_err(|e| Error::io(&self.path, e))?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.count)
    }
}

pub fn write_dataset(path: &Path, samples: &[RegretSample]) -> Result<()> {
    let mut w = DatasetWriter::create(path)?;
    for s in samples {
        w.write(s)?;
    }
    w.finish().map(|_| ())
}

pub fn read_dataset(path: &Path) -> Result<Vec<RegretSample>> {
    let data = read_file(path)?;
    let mut r = ByteReader::new(&data, "regret dataset");
    r.expect_magic(DATASET_MAGIC)?;
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("dataset version {version}, expected {DATASET_VERSION}")));
    }
    let flen = r.u32()? as usize;
    let acount = r.u32()? as usize;
    if flen != FEATURE_LEN || acount != ACTION_COUNT {
        return Err(Error::Format(format!(
            "dataset has feature_len {flen} and {acount} actions, expected {FEATURE_LEN} and {ACTION_COUNT}"
        )));
    }
    if !r.remaining().is_multiple_of(RECORD_LEN) {
        return Err(Error::Format(format!("dataset body of {} bytes is not a whole number of records", r.remaining())));
    }
    let mut out = Vec::with_capacity(r.remaining() / RECORD_LEN);
    while r.remaining() > 0 {
        let mut features = [0.0; FEATURE_LEN];
        for f in features.iter_mut() {
            *f = r.f32()? as f64;
        }
        let action = PcsAction::from_index(r.u8()? as usize).map_err(|e| Error::Format(e.to_string()))?;
        let regret = r.f32()? as f64;
        out.push(RegretSample { features, action, regret });
    }
    Ok(out)
}

/// Sidecar summary next to a dataset file (`<file>.summary.csv`).
pub fn summary_path(dataset: &Path) -> PathBuf {
    let mut s = dataset.as_os_str().to_owned();
    s.push(".summary.csv");
    PathBuf::from(s)
}

pub fn write_summary(path: &Path, s: &DatasetSummary) -> Result<()> {
    let text = format!(
        "trees,games,failed_branches,samples,skipped_samples\n{},{},{},{},{}\n",
        s.trees, s.games, s.failed_branches, s.samples, s.skipped_samples
    );
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Abstract game: each agent's PCS point moves by its actions and the
    /// utility is a fixed function of the final points.
    struct Toy {
        fail_on: Option<Vec<usize>>,
    }

    #[derive(Clone)]
    struct ToySt {
        e: PcsPoint,
        o: PcsPoint,
        h: GameHistory,
        joint: Vec<usize>,
    }

    impl GameModel for Toy {
        type State = ToySt;
        fn play_step(&self, st: &mut ToySt) -> Result<()> {
            if self.fail_on.as_ref() == Some(&st.joint) {
                return Err(Error::Simulation("injected".into()));
            }
            st.h.ego_pcs.push(st.e);
            st.h.opp_pcs.push(st.o);
            Ok(())
        }
        fn apply(&self, st: &mut ToySt, a: PcsAction, b: PcsAction) {
            st.e = a.target(st.e, 0.1);
            st.o = b.target(st.o, 0.1);
            st.h.ego_actions.push(a);
            st.joint.push(joint_index(a.index(), b.index()));
        }
        fn history(&self, st: &ToySt) -> GameHistory {
            st.h.clone()
        }
        fn outcome(&self, st: &ToySt) -> TerminalOutcome {
            terminal_utility(st.e.agg * 3.0 + st.e.res, st.o.agg * 2.0 - st.o.res, false)
        }
    }

    fn root() -> ToySt {
        ToySt { e: PcsPoint::new(0.5, 0.5), o: PcsPoint::new(0.4, 0.6), h: GameHistory::default(), joint: vec![] }
    }

    #[test]
    fn sample_and_game_counts() {
        let toy = Toy { fail_on: None };
        for (m, n) in [(2, 1), (2, 2), (3, 2)] {
            let (s, sum) = build_dataset(&toy, vec![root(); n * n], m, 1).unwrap();
            assert_eq!(sum.games, game_count(m, n));
            assert_eq!(s.len() as u64, sample_count(m, n));
        }
    }

    #[test]
    fn node_regrets_are_zero_mean() {
        let toy = Toy { fail_on: None };
        let (s, _) = build_dataset(&toy, vec![root()], 3, 1).unwrap();
        for chunk in s.chunks(4) {
            let sum: f64 = chunk.iter().map(|x| x.regret).sum();
            assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn replay_matches_enumerated_leaf() {
        let toy = Toy { fail_on: None };
        let games = AtomicU64::new(0);
        let tree = enumerate_game_tree(&toy, root(), 3, &games);
        let seq = [joint_index(2, 1), joint_index(0, 3)];
        let states = replay(&toy, root(), &seq).unwrap();
        assert_eq!(tree.table.leaves[leaf_index(&seq)], Leaf::Done(toy.outcome(states.last().unwrap())));
    }

    #[test]
    fn failed_branch_is_excluded() {
        let toy = Toy { fail_on: Some(vec![joint_index(1, 1)]) };
        let (s, sum) = build_dataset(&toy, vec![root()], 3, 1).unwrap();
        assert_eq!(sum.failed_branches, 16);
        assert_eq!(sum.skipped_samples, 4);
        assert_eq!(s.len(), samples_per_tree(3) - 4);
    }

    #[test]
    fn dataset_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        let toy = Toy { fail_on: None };
        let (s, sum) = build_dataset(&toy, vec![root()], 2, 1).unwrap();
        write_dataset(&p, &s).unwrap();
        write_summary(&summary_path(&p), &sum).unwrap();
        let back = read_dataset(&p).unwrap();
        assert_eq!(back.len(), 4);
        for (a, b) in s.iter().zip(&back) {
            assert_eq!(a.action, b.action);
            assert_eq!(a.regret as f32 as f64, b.regret);
        }
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_dataset(&p), Err(Error::Format(_))));
        assert!(std::fs::read_to_string(summary_path(&p)).unwrap().starts_with("trees,games"));
    }
}
