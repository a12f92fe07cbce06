//! Fixed-width encoding of (history, candidate action).
//!
//! Layout (40 values): ego PCS slots 3x2, opponent PCS slots 3x2, ego mask
//! 3x2, opponent mask 3x2, past ego actions one-hot 3x4, candidate one-hot 4.
//! Empty slots and their masks are exactly zero.

use crate::error::{Error, Result};
use crate::game::GameHistory;
use crate::pcs::{PcsAction, PcsPoint, ACTION_COUNT};

use super::MAX_GAME_STEPS;

pub const SLOTS: usize = MAX_GAME_STEPS - 1;
pub const FEATURE_LEN: usize = 4 * 2 * SLOTS + SLOTS * ACTION_COUNT + ACTION_COUNT;

pub type FeatureVector = [f64; FEATURE_LEN];

const EGO: usize = 0;
const OPP: usize = 2 * SLOTS;
const EGO_MASK: usize = 4 * SLOTS;
const OPP_MASK: usize = 6 * SLOTS;
const PAST: usize = 8 * SLOTS;
const CAND: usize = PAST + SLOTS * ACTION_COUNT;

/// Encodes a history at game step `history.step() <= m`.
pub fn encode(history: &GameHistory, action: PcsAction, m: usize) -> Result<FeatureVector> {
    let h = history;
    if h.step() > m || h.ego_pcs.len() > SLOTS {
        return Err(Error::InvalidArgument(format!("history at step {} exceeds game length {m}", h.step())));
    }
    if h.opp_pcs.len() != h.ego_pcs.len() || h.ego_actions.len() > SLOTS {
        return Err(Error::InvalidArgument(format!(
            "inconsistent history: {} ego, {} opponent observations, {} actions",
            h.ego_pcs.len(),
            h.opp_pcs.len(),
            h.ego_actions.len()
        )));
    }
    let mut f = [0.0; FEATURE_LEN];
    for (i, p) in h.ego_pcs.iter().enumerate() {
        f[EGO + 2 * i] = p.agg;
        f[EGO + 2 * i + 1] = p.res;
        f[EGO_MASK + 2 * i] = 1.0;
        f[EGO_MASK + 2 * i + 1] = 1.0;
    }
    for (i, p) in h.opp_pcs.iter().enumerate() {
        f[OPP + 2 * i] = p.agg;
        f[OPP + 2 * i + 1] = p.res;
        f[OPP_MASK + 2 * i] = 1.0;
        f[OPP_MASK + 2 * i + 1] = 1.0;
    }
    for (i, a) in h.ego_actions.iter().enumerate() {
        f[PAST + i * ACTION_COUNT + a.index()] = 1.0;
    }
    f[CAND + action.index()] = 1.0;
    Ok(f)
}

/// Inverse of [`encode`].
pub fn decode(f: &FeatureVector) -> Result<(GameHistory, PcsAction)> {
    let mut h = GameHistory::default();
    for i in 0..SLOTS {
        if f[EGO_MASK + 2 * i] == 1.0 {
            h.ego_pcs.push(PcsPoint::new(f[EGO + 2 * i], f[EGO + 2 * i + 1]));
        }
        if f[OPP_MASK + 2 * i] == 1.0 {
            h.opp_pcs.push(PcsPoint::new(f[OPP + 2 * i], f[OPP + 2 * i + 1]));
        }
        let row = &f[PAST + i * ACTION_COUNT..PAST + (i + 1) * ACTION_COUNT];
        if let Some(k) = row.iter().position(|&v| v == 1.0) {
            h.ego_actions.push(PcsAction::from_index(k)?);
        }
    }
    let k = f[CAND..CAND + ACTION_COUNT]
        .iter()
        .position(|&v| v == 1.0)
        .ok_or_else(|| Error::InvalidArgument("feature vector has no candidate action".into()))?;
    Ok((h, PcsAction::from_index(k)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn width_is_forty() {
        assert_eq!(FEATURE_LEN, 40);
    }

    #[test]
    fn empty_history_is_candidate_only() {
        let f = encode(&GameHistory::default(), PcsAction::AggPlus, 4).unwrap();
        assert_eq!(f.iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(f[CAND], 1.0);
    }

    #[test]
    fn full_history_sets_every_mask() {
        let p = PcsPoint::new(0.3, 0.7);
        let h = GameHistory { ego_pcs: vec![p; 3], opp_pcs: vec![p; 3], ego_actions: vec![PcsAction::ResMinus; 2] };
        let f = encode(&h, PcsAction::ResPlus, 4).unwrap();
        assert!(f[EGO_MASK..PAST].iter().all(|&v| v == 1.0));
        assert!(encode(&h, PcsAction::ResPlus, 3).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(n in 0usize..=3, vals in prop::collection::vec(-2.0f64..2.0, 12), acts in prop::collection::vec(0usize..4, 4)) {
            let h = GameHistory {
                ego_pcs: (0..n).map(|i| PcsPoint::new(vals[2 * i], vals[2 * i + 1])).collect(),
                opp_pcs: (0..n).map(|i| PcsPoint::new(vals[6 + 2 * i], vals[7 + 2 * i])).collect(),
                ego_actions: (0..n.saturating_sub(1)).map(|i| PcsAction::ALL[acts[i]]).collect(),
            };
            let a = PcsAction::ALL[acts[3]];
            let f = encode(&h, a, 4).unwrap();
            let (h2, a2) = decode(&f).unwrap();
            prop_assert_eq!(h2, h);
            prop_assert_eq!(a2, a);
        }
    }
}
