//! Policy characteristic space: basis functions, actions and policy collections.

pub mod basis;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::PolicyParams;

pub use basis::{g_agg, g_agg_window, g_res, min_ittc};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PcsPoint {
    pub agg: f64,
    pub res: f64,
}

impl PcsPoint {
    pub fn new(agg: f64, res: f64) -> Self {
        Self { agg, res }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.agg, self.res]
    }

    pub fn dist(&self, o: &PcsPoint) -> f64 {
        (self.agg - o.agg).hypot(self.res - o.res)
    }

    pub fn is_finite(&self) -> bool {
        self.agg.is_finite() && self.res.is_finite()
    }

    /// True if `self` is at least as good on both axes and better on one (maximization).
    pub fn dominates(&self, o: &PcsPoint) -> bool {
        self.agg >= o.agg && self.res >= o.res && (self.agg > o.agg || self.res > o.res)
    }
}

/// The four PCS actions, in the order used by features and logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PcsAction {
    AggPlus,
    AggMinus,
    ResPlus,
    ResMinus,
}

pub const ACTION_COUNT: usize = 4;

impl PcsAction {
    pub const ALL: [PcsAction; ACTION_COUNT] = [PcsAction::AggPlus, PcsAction::AggMinus, PcsAction::ResPlus, PcsAction::ResMinus];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or_else(|| Error::InvalidArgument(format!("action index {i} out of range")))
    }

    pub fn name(self) -> &'static str {
        match self {
            PcsAction::AggPlus => "agg+",
            PcsAction::AggMinus => "agg-",
            PcsAction::ResPlus => "res+",
            PcsAction::ResMinus => "res-",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| Error::InvalidArgument(format!("unknown action {s:?}")))
    }

    /// `p + eps * e_axis * sign`.
    pub fn target(self, p: PcsPoint, eps: f64) -> PcsPoint {
        match self {
            PcsAction::AggPlus => PcsPoint::new(p.agg + eps, p.res),
            PcsAction::AggMinus => PcsPoint::new(p.agg - eps, p.res),
            PcsAction::ResPlus => PcsPoint::new(p.agg, p.res + eps),
            PcsAction::ResMinus => PcsPoint::new(p.agg, p.res - eps),
        }
    }
}

impl fmt::Display for PcsAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionLabel {
    All,
    Pareto,
    NearOptimal,
    DppSubset,
}

impl CollectionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CollectionLabel::All => "all",
            CollectionLabel::Pareto => "pareto",
            CollectionLabel::NearOptimal => "near_optimal",
            CollectionLabel::DppSubset => "dpp_subset",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CollectionLabel::All),
            "pareto" => Ok(CollectionLabel::Pareto),
            "near_optimal" => Ok(CollectionLabel::NearOptimal),
            "dpp_subset" => Ok(CollectionLabel::DppSubset),
            _ => Err(Error::InvalidArgument(format!("unknown collection label {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEntry {
    pub params: PolicyParams,
    pub pcs: PcsPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCollection {
    pub entries: Vec<PolicyEntry>,
    pub label: CollectionLabel,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    gamma_v: f64,
    w_mc: f64,
    w_al: f64,
    w_hys: f64,
    w_do: f64,
    w_co: f64,
    w_v1: f64,
    w_v2: f64,
    agg: f64,
    res: f64,
    label: String,
}

impl PolicyCollection {
    pub fn new(entries: Vec<PolicyEntry>, label: CollectionLabel) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("policy collection must not be empty".into()));
        }
        if let Some(e) = entries.iter().find(|e| !e.pcs.is_finite()) {
            return Err(Error::NonFinite(format!("PCS point {:?}", e.pcs)));
        }
        Ok(Self { entries, label })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn points(&self) -> Vec<PcsPoint> {
        self.entries.iter().map(|e| e.pcs).collect()
    }

    /// Index of the entry nearest to `target`, ties to the lowest index.
    pub fn nearest(&self, target: PcsPoint) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, e) in self.entries.iter().enumerate() {
            let d = e.pcs.dist(&target);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    pub fn map_pcs(&self, f: impl Fn(PcsPoint) -> PcsPoint) -> Self {
        Self {
            entries: self.entries.iter().map(|e| PolicyEntry { params: e.params, pcs: f(e.pcs) }).collect(),
            label: self.label,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        for e in &self.entries {
            let [gamma_v, w_mc, w_al, w_hys, w_do, w_co, w_v1, w_v2] = e.params.to_array();
            w.serialize(CsvRow {
                gamma_v,
                w_mc,
                w_al,
                w_hys,
                w_do,
                w_co,
                w_v1,
                w_v2,
                agg: e.pcs.agg,
                res: e.pcs.res,
                label: self.label.as_str().into(),
            })
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        let mut label = None;
        for (i, row) in r.deserialize::<CsvRow>().enumerate() {
            let row = row.map_err(|e| Error::parse(path.display().to_string(), i + 2, e.to_string()))?;
            let l = CollectionLabel::parse(&row.label)?;
            label.get_or_insert(l);
            let params = PolicyParams::from_array([row.gamma_v, row.w_mc, row.w_al, row.w_hys, row.w_do, row.w_co, row.w_v1, row.w_v2]);
            entries.push(PolicyEntry { params, pcs: PcsPoint::new(row.agg, row.res) });
        }
        Self::new(entries, label.unwrap_or(CollectionLabel::All))
    }
}

/// Moves `current` by `action` and snaps to the nearest collection entry.
pub fn apply_action(current: PcsPoint, action: PcsAction, eps: f64, collection: &PolicyCollection) -> (usize, PolicyEntry) {
    let i = collection.nearest(action.target(current, eps));
    (i, collection.entries[i])
}

/// Per-axis affine map onto [0, 1]; a constant axis maps to 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcsNormalizer {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl PcsNormalizer {
    pub fn fit(points: &[PcsPoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("cannot normalize an empty collection".into()));
        }
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            for (k, v) in p.as_array().into_iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn identity() -> Self {
        Self { min: [0.0; 2], max: [1.0; 2] }
    }

    fn axis(&self, k: usize, v: f64) -> f64 {
        let span = self.max[k] - self.min[k];
        if span > 0.0 {
            if v == self.max[k] {
                1.0
            } else {
                (v - self.min[k]) / span
            }
        } else {
            0.5
        }
    }

    pub fn apply(&self, p: PcsPoint) -> PcsPoint {
        PcsPoint::new(self.axis(0, p.agg), self.axis(1, p.res))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Normalizes a raw collection; returns the normalized copy and the stored map.
pub fn normalize_pcs(collection: &PolicyCollection) -> Result<(PolicyCollection, PcsNormalizer)> {
    let norm = PcsNormalizer::fit(&collection.points())?;
    Ok((collection.map_pcs(|p| norm.apply(p)), norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coll(points: &[(f64, f64)]) -> PolicyCollection {
        let entries =
            points.iter().map(|&(a, r)| PolicyEntry { params: PolicyParams::default(), pcs: PcsPoint::new(a, r) }).collect();
        PolicyCollection::new(entries, CollectionLabel::All).unwrap()
    }

    #[test]
    fn exact_match_and_nearest_of_two() {
        let c = coll(&[(0.31, 0.5), (0.0, 0.0)]);
        let (i, e) = apply_action(PcsPoint::new(0.2, 0.5), PcsAction::AggPlus, 0.1, &c);
        assert_eq!(i, 0);
        assert_eq!(e.pcs, PcsPoint::new(0.31, 0.5));
        let (j, _) = apply_action(PcsPoint::new(0.1, 0.0), PcsAction::AggMinus, 0.1, &c);
        assert_eq!(j, 1);
    }

    #[test]
    fn ties_take_lowest_index() {
        let c = coll(&[(1.0, 0.0), (-1.0, 0.0)]);
        assert_eq!(c.nearest(PcsPoint::new(0.0, 0.0)), 0);
    }

    #[test]
    fn round_trip_on_grid() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push((i as f64 * 0.1, j as f64 * 0.1));
            }
        }
        let c = coll(&pts);
        for (k, e) in c.entries.iter().enumerate().filter(|(_, e)| e.pcs.agg < 0.35 && e.pcs.res > 0.05) {
            for (a, b) in [(PcsAction::AggPlus, PcsAction::AggMinus), (PcsAction::ResMinus, PcsAction::ResPlus)] {
                let (_, mid) = apply_action(e.pcs, a, 0.1, &c);
                let (back, _) = apply_action(mid.pcs, b, 0.1, &c);
                assert_eq!(back, k);
            }
        }
    }

    #[test]
    fn normalization_examples() {
        let (n, _) = normalize_pcs(&coll(&[(0.0, -2.0), (10.0, -1.0)])).unwrap();
        assert_eq!(n.points(), vec![PcsPoint::new(0.0, 0.0), PcsPoint::new(1.0, 1.0)]);
        let (n, _) = normalize_pcs(&coll(&[(0.0, 3.0), (4.0, 3.0), (2.0, 3.0)])).unwrap();
        assert!(n.points().iter().all(|p| p.res == 0.5));
    }

    #[test]
    fn csv_round_trip() {
        let c = PolicyCollection::new(
            vec![PolicyEntry {
                params: PolicyParams::from_array([0.75, 1.5, 2.0, 3.25, 4.0, 5.0, 6.5, 9.0]),
                pcs: PcsPoint::new(-0.125, 3.5),
            }],
            CollectionLabel::Pareto,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        c.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("gamma_v,w_mc,w_al,w_hys,w_do,w_co,w_v1,w_v2,agg,res,label\n"));
        assert_eq!(PolicyCollection::read_csv(&p).unwrap(), c);
    }

    #[test]
    fn action_names_round_trip() {
        for a in PcsAction::ALL {
            assert_eq!(PcsAction::parse(a.name()).unwrap(), a);
            assert_eq!(PcsAction::from_index(a.index()).unwrap(), a);
        }
    }

    proptest! {
        #[test]
        fn nearest_matches_brute_force(pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 50),
                                       t in (-1.2f64..1.2, -1.2f64..1.2)) {
            let c = coll(&pts);
            let target = PcsPoint::new(t.0, t.1);
            let got = c.nearest(target);
            let best = pts.iter().map(|p| (p.0 - t.0).hypot(p.1 - t.1)).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(c.entries[got].pcs.dist(&target), best);
            prop_assert!(pts[..got].iter().all(|p| (p.0 - t.0).hypot(p.1 - t.1) > best));
        }

        #[test]
        fn normalized_endpoints_are_exact(pts in prop::collection::vec((-50.0f64..50.0, -10.0f64..0.0), 2..40)) {
            let (n, _) = normalize_pcs(&coll(&pts)).unwrap();
            let q = n.points();
            for k in 0..2 {
                let vals: Vec<f64> = q.iter().map(|p| p.as_array()[k]).collect();
                let raw: Vec<f64> = pts.iter().map(|p| if k == 0 { p.0 } else { p.1 }).collect();
                let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for (v, r) in vals.iter().zip(&raw) {
                    if hi > lo {
                        if *r == lo { prop_assert_eq!(*v, 0.0); }
                        if *r == hi { prop_assert_eq!(*v, 1.0); }
                        prop_assert!((0.0..=1.0).contains(v));
                    } else {
                        prop_assert_eq!(*v, 0.5);
                    }
                }
            }
        }
    }
}
