//! Outcome tables over joint action sequences and their counterfactual values.
//!
//! A game has `m` steps; the first only observes, and both agents choose one
//! of [`ACTION_COUNT`] actions simultaneously before each of the remaining
//! `m - 1` steps. A node at decision level `j` is identified by the `j` joint
//! actions leading to it, packed as base-16 digits (first action most
//! significant). Values are for the ego agent under the uniform profile.

use crate::error::{Error, Result};
use crate::pcs::{PcsAction, ACTION_COUNT};

/// Joint actions per decision.
pub const BRANCH: usize = ACTION_COUNT * ACTION_COUNT;

pub fn joint_index(ego: usize, opp: usize) -> usize {
    ego * ACTION_COUNT + opp
}

pub fn split_joint(j: usize) -> (usize, usize) {
    (j / ACTION_COUNT, j % ACTION_COUNT)
}

/// Leaves (full games) per start pair.
pub fn leaf_count(m: usize) -> usize {
    BRANCH.pow(m.saturating_sub(1) as u32)
}

/// Total games for `n_init` starting policies per agent.
pub fn game_count(m: usize, n_init: usize) -> u64 {
    leaf_count(m) as u64 * (n_init * n_init) as u64
}

/// Ego (history, action) samples per start pair.
pub fn samples_per_tree(m: usize) -> usize {
    (0..m.saturating_sub(1)).map(|j| BRANCH.pow(j as u32) * ACTION_COUNT).sum()
}

pub fn sample_count(m: usize, n_init: usize) -> u64 {
    samples_per_tree(m) as u64 * (n_init * n_init) as u64
}

/// Joint action digits of node `node` at level `level`.
pub fn decode_prefix(level: usize, node: usize) -> Vec<usize> {
    let mut digits = vec![0; level];
    let mut n = node;
    for d in digits.iter_mut().rev() {
        *d = n % BRANCH;
        n /= BRANCH;
    }
    digits
}

pub fn encode_prefix(joint: &[usize]) -> usize {
    joint.iter().fold(0, |acc, &j| acc * BRANCH + j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalOutcome {
    pub utility_ego: f64,
    pub utility_opp: f64,
    pub collision: bool,
    pub final_s: [f64; 2],
}

/// Zero-sum progress utility; any collision or an exact tie gives (0, 0).
pub fn terminal_utility(s_ego: f64, s_opp: f64, collision: bool) -> TerminalOutcome {
    let u = if collision || s_ego == s_opp { 0.0 } else { s_ego - s_opp };
    TerminalOutcome { utility_ego: u, utility_opp: -u, collision, final_s: [s_ego, s_opp] }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Leaf {
    Pending,
    Failed,
    Done(TerminalOutcome),
}

/// Terminal outcome for every joint action sequence of one start pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    pub m: usize,
    pub leaves: Vec<Leaf>,
}

impl OutcomeTable {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        Self { m, leaves: vec![Leaf::Pending; leaf_count(m)] }
    }

    /// Table of collision-free outcomes with the given ego utilities.
    pub fn from_utilities(m: usize, utilities: &[f64]) -> Result<Self> {
        if utilities.len() != leaf_count(m) {
            return Err(Error::InvalidArgument(format!("{} utilities for {} leaves", utilities.len(), leaf_count(m))));
        }
        let leaves = utilities
            .iter()
            .map(|&u| Leaf::Done(TerminalOutcome { utility_ego: u, utility_opp: -u, collision: false, final_s: [0.0; 2] }))
            .collect();
        Ok(Self { m, leaves })
    }

    pub fn failed_count(&self) -> usize {
        self.leaves.iter().filter(|l| matches!(l, Leaf::Failed)).count()
    }

    /// Errors with the first few missing branches if any leaf is still pending.
    pub fn check_complete(&self) -> Result<()> {
        let missing: Vec<usize> = (0..self.leaves.len()).filter(|&i| self.leaves[i] == Leaf::Pending).collect();
        if missing.is_empty() {
            return Ok(());
        }
        let first = missing.iter().take(5).map(|&i| describe(&decode_prefix(self.m - 1, i))).collect();
        Err(Error::IncompleteTree { count: missing.len(), first })
    }

    /// Counterfactual values and regrets at every decision node.
    pub fn solve(&self) -> Result<CfrSolution> {
        self.check_complete()?;
        let levels = self.m - 1;
        // expected[j][n]: renormalized uniform-play value of node n at level j.
        let mut expected: Vec<Vec<Option<f64>>> = vec![Vec::new(); levels + 1];
        expected[levels] = self
            .leaves
            .iter()
            .map(|l| match l {
                Leaf::Done(o) => Some(o.utility_ego),
                _ => None,
            })
            .collect();
        for j in (0..levels).rev() {
            let below = &expected[j + 1];
            expected[j] = (0..BRANCH.pow(j as u32)).map(|n| mean_defined(&below[n * BRANCH..(n + 1) * BRANCH])).collect();
        }
        let mut nodes = Vec::with_capacity(levels);
        for j in 0..levels {
            let reach = (ACTION_COUNT as f64).powi(-(j as i32));
            let below = &expected[j + 1];
            let level: Vec<NodeValues> = (0..BRANCH.pow(j as u32))
                .map(|n| {
                    let kids = &below[n * BRANCH..(n + 1) * BRANCH];
                    let mut action_values = [None; ACTION_COUNT];
                    for (k, av) in action_values.iter_mut().enumerate() {
                        *av = mean_defined(&kids[k * ACTION_COUNT..(k + 1) * ACTION_COUNT]).map(|v| reach * v);
                    }
                    let value = expected[j][n].map(|v| reach * v);
                    let mut regrets = [None; ACTION_COUNT];
                    if let Some(v) = value {
                        for k in 0..ACTION_COUNT {
                            regrets[k] = action_values[k].map(|a| a - v);
                        }
                    }
                    NodeValues { level: j, node: n, value, action_values, regrets }
                })
                .collect();
            nodes.push(level);
        }
        Ok(CfrSolution { levels: nodes, failed: self.failed_count() })
    }
}

fn mean_defined(v: &[Option<f64>]) -> Option<f64> {
    let (s, n) = v.iter().flatten().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Human-readable joint action sequence, e.g. `agg+/res-,res+/agg+`.
pub fn describe(joint: &[usize]) -> String {
    joint
        .iter()
        .map(|&j| {
            let (a, b) = split_joint(j);
            format!("{}/{}", PcsAction::ALL[a].name(), PcsAction::ALL[b].name())
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Values at one ego decision node; `None` where every branch below failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeValues {
    pub level: usize,
    pub node: usize,
    pub value: Option<f64>,
    pub action_values: [Option<f64>; ACTION_COUNT],
    pub regrets: [Option<f64>; ACTION_COUNT],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfrSolution {
    pub levels: Vec<Vec<NodeValues>>,
    pub failed: usize,
}

impl CfrSolution {
    pub fn node(&self, level: usize, node: usize) -> &NodeValues {
        &self.levels[level][node]
    }

    pub fn node_for(&self, joint: &[usize]) -> &NodeValues {
        self.node(joint.len(), encode_prefix(joint))
    }
}
