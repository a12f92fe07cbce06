use crate::error::{Error, Result};
use crate::planner::clothoid::PathPoint;
use crate::planner::params::PolicyParams;
use crate::track::{Raceline, TrackMap};

pub const N_COSTS: usize = 7;

/// Constant-velocity, constant-heading prediction of the opponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpponentPrediction {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
}

impl OpponentPrediction {
    pub fn at(&self, t: f64) -> [f64; 2] {
        let (s, c) = self.psi.sin_cos();
        [self.x + self.v * t * c, self.y + self.v * t * s]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTrajectory {
    pub path: Vec<PathPoint>,
    /// Speed at each path point before the global velocity scale.
    pub velocity: Vec<f64>,
    pub arc_length: f64,
    pub goal_index: usize,
    pub velocity_factor: f64,
    pub costs: [f64; N_COSTS],
    /// Costs after scaling over the candidate set (equal to `costs` when scaling is off).
    pub normalized: [f64; N_COSTS],
    pub total_cost: f64,
    pub collides: bool,
}

impl CandidateTrajectory {
    pub fn new(path: Vec<PathPoint>, velocity: Vec<f64>, goal_index: usize, velocity_factor: f64) -> Self {
        let arc_length = path.last().map_or(0.0, |p| p.s);
        Self {
            path,
            velocity,
            arc_length,
            goal_index,
            velocity_factor,
            costs: [0.0; N_COSTS],
            normalized: [0.0; N_COSTS],
            total_cost: f64::INFINITY,
            collides: false,
        }
    }
}

pub struct CostContext<'a> {
    pub track: &'a TrackMap,
    pub raceline: &'a Raceline,
    /// Previously selected path, already advanced past the ego position.
    pub previous: Option<&'a [[f64; 2]]>,
    pub opponents: &'a [OpponentPrediction],
    pub footprint: f64,
    pub kappa_max: f64,
    /// Reference speed for the velocity and collision terms.
    pub v_ref: f64,
    pub gamma_v: f64,
    pub hysteresis_points: usize,
    /// Raceline arc near the first path point, used to seed projections.
    pub raceline_hint: f64,
}

/// Geometry-only terms `(c_mc, c_al, c_hys, c_do)` and the environment-collision flag.
pub fn path_costs(path: &[PathPoint], ctx: &CostContext<'_>) -> ([f64; 4], bool) {
    let c_mc = path.iter().map(|p| p.kappa.abs()).fold(0.0, f64::max);
    let c_al = path.last().map_or(0.0, |p| p.s);
    let c_hys = match ctx.previous {
        Some(prev) if prev.len() >= 2 => {
            let xy: Vec<[f64; 2]> = path.iter().map(|p| [p.x, p.y]).collect();
            let a = resample_polyline(&xy, ctx.hysteresis_points);
            let b = resample_polyline(prev, ctx.hysteresis_points);
            a.iter().zip(&b).map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sum::<f64>().sqrt()
        }
        _ => 0.0,
    };
    let mut hint = ctx.raceline_hint;
    let mut sum_d = 0.0;
    let mut last_s = 0.0;
    for p in path {
        hint += p.s - last_s;
        last_s = p.s;
        let f = ctx.raceline.project_near(p.x, p.y, hint, 1.0);
        sum_d += f.d.abs();
    }
    let c_do = if path.is_empty() { 0.0 } else { sum_d / path.len() as f64 };
    let collides = path.iter().any(|p| ctx.track.is_collision(p.x, p.y, ctx.footprint));
    ([c_mc, c_al, c_hys, c_do], collides)
}

/// Speed-dependent terms `(c_co, c_v1, c_v2)` for one velocity profile.
pub fn velocity_costs(path: &[PathPoint], velocity: &[f64], ctx: &CostContext<'_>) -> [f64; 3] {
    let v_ref = ctx.v_ref;
    let scaled: Vec<f64> = velocity.iter().map(|v| v * ctx.gamma_v).collect();
    let mut c_co = 0.0;
    if !ctx.opponents.is_empty() {
        let mut t = 0.0;
        for (i, p) in path.iter().enumerate() {
            if i > 0 {
                let ds = p.s - path[i - 1].s;
                let v_avg = (0.5 * (scaled[i] + scaled[i - 1])).max(0.1);
                t += ds / v_avg;
            }
            for o in ctx.opponents {
                let q = o.at(t);
                if (p.x - q[0]).hypot(p.y - q[1]) < 2.0 * ctx.footprint {
                    c_co += ((scaled[i] - o.v) / v_ref).clamp(0.0, 1.0);
                }
            }
        }
    }
    let mean_v = scaled.iter().sum::<f64>() / scaled.len().max(1) as f64;
    let c_v1 = (v_ref - mean_v) / v_ref;
    let c_v2 = path
        .iter()
        .zip(&scaled)
        .map(|(p, v)| (v / v_ref) * (p.kappa.abs() / ctx.kappa_max))
        .fold(0.0, f64::max);
    [c_co, c_v1, c_v2]
}

/// All seven terms for one candidate; environment collisions make the total infinite.
pub fn evaluate_costs(cand: &mut CandidateTrajectory, ctx: &CostContext<'_>) {
    let (geo, collides) = path_costs(&cand.path, ctx);
    let vel = velocity_costs(&cand.path, &cand.velocity, ctx);
    cand.costs = [geo[0], geo[1], geo[2], geo[3], vel[0], vel[1], vel[2]];
    cand.collides = collides;
}

/// Fills `normalized` and `total_cost`. With `normalize`, each term is divided
/// by its maximum over the non-colliding candidates (when that maximum is > 0).
pub fn score_candidates(cands: &mut [CandidateTrajectory], params: &PolicyParams, normalize: bool) {
    let mut scale = [1.0; N_COSTS];
    if normalize {
        for (j, sc) in scale.iter_mut().enumerate() {
            let m = cands.iter().filter(|c| !c.collides).map(|c| c.costs[j].abs()).fold(0.0, f64::max);
            if m > 0.0 {
                *sc = 1.0 / m;
            }
        }
    }
    for c in cands.iter_mut() {
        for j in 0..N_COSTS {
            c.normalized[j] = c.costs[j] * scale[j];
        }
        c.total_cost = if c.collides {
            f64::INFINITY
        } else {
            c.normalized.iter().zip(&params.weights).map(|(c, w)| c * w).sum()
        };
    }
}

/// Index of the minimum finite total cost, ties to the lowest index.
pub fn select_index(cands: &[CandidateTrajectory]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in cands.iter().enumerate() {
        if c.total_cost.is_finite() && best.is_none_or(|(_, b)| c.total_cost < b) {
            best = Some((i, c.total_cost));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::Blocked)
}

/// Selects the weighted-cost minimizer and applies the global velocity scale.
pub fn select_trajectory(params: &PolicyParams, cands: &[CandidateTrajectory]) -> Result<CandidateTrajectory> {
    let i = select_index(cands)?;
    let mut out = cands[i].clone();
    for v in &mut out.velocity {
        *v *= params.gamma_v;
    }
    Ok(out)
}

/// `n` points at equal arc spacing along an open polyline (endpoints included).
pub fn resample_polyline(pts: &[[f64; 2]], n: usize) -> Vec<[f64; 2]> {
    if pts.is_empty() || n == 0 {
        return Vec::new();
    }
    let mut cum = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in pts.windows(2) {
        acc += (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        cum.push(acc);
    }
    if n == 1 || acc == 0.0 {
        return vec![pts[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let target = acc * k as f64 / (n - 1) as f64;
        while seg + 2 < pts.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { ((target - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    out
}

/// Part of an open polyline after the point closest to `p`.
pub fn advance_polyline(pts: &[[f64; 2]], p: [f64; 2]) -> Vec<[f64; 2]> {
    if pts.len() < 2 {
        return pts.to_vec();
    }
    let mut best = (f64::INFINITY, 0usize, 0.0);
    for (i, w) in pts.windows(2).enumerate() {
        let ab = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = if len2 > 0.0 { (((p[0] - w[0][0]) * ab[0] + (p[1] - w[0][1]) * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = [w[0][0] + t * ab[0], w[0][1] + t * ab[1]];
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        if d2 < best.0 {
            best = (d2, i, t);
        }
    }
    let (_, i, t) = best;
    let a = pts[i];
    let b = pts[i + 1];
    let mut out = vec![[a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]];
    out.extend_from_slice(&pts[i + 1..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::{synthetic_oval, OvalSpec};
    use proptest::prelude::*;

    fn straight_path(x0: f64, y: f64, len: f64, n: usize) -> Vec<PathPoint> {
        (0..=n)
            .map(|i| {
                let s = len * i as f64 / n as f64;
                PathPoint { x: x0 + s, y, psi: 0.0, kappa: 0.0, s }
            })
            .collect()
    }

    fn with_ctx<R>(prev: Option<&[[f64; 2]]>, opps: &[OpponentPrediction], f: impl FnOnce(&CostContext<'_>) -> R) -> R {
        let (track, _, _) = synthetic_oval(&OvalSpec::default()).unwrap();
        let rl = Raceline::from_centerline(&track, 5.0).unwrap();
        let ctx = CostContext {
            track: &track,
            raceline: &rl,
            previous: prev,
            opponents: opps,
            footprint: 0.3,
            kappa_max: 1.3,
            v_ref: 5.0,
            gamma_v: 1.0,
            hysteresis_points: 20,
            raceline_hint: 1.0,
        };
        f(&ctx)
    }

    // The synthetic oval's bottom straight runs along y = -5 from x = -6 to 6.
    #[test]
    fn straight_on_raceline_has_zero_geometry_costs() {
        let path = straight_path(-5.0, -5.0, 3.0, 30);
        let vel = vec![5.0; path.len()];
        let mut c = CandidateTrajectory::new(path, vel, 0, 1.0);
        with_ctx(None, &[], |ctx| evaluate_costs(&mut c, ctx));
        assert_eq!(c.costs[0], 0.0);
        assert!(c.costs[3] < 1e-9);
        assert_eq!(c.costs[4], 0.0);
        assert!(!c.collides);
    }

    #[test]
    fn identical_previous_has_zero_hysteresis() {
        let path = straight_path(-5.0, -4.8, 3.0, 30);
        let prev: Vec<[f64; 2]> = path.iter().map(|p| [p.x, p.y]).collect();
        let ([_, _, hys, _], _) = with_ctx(Some(&prev), &[], |ctx| path_costs(&path, ctx));
        assert_eq!(hys, 0.0);
    }

    #[test]
    fn opponent_overlap_at_one_step() {
        // Ego at 4 m/s along the straight; the opponent crosses its path downwards.
        let path = straight_path(-5.0, -5.0, 2.0, 4);
        let vel = vec![4.0; path.len()];
        let opp = OpponentPrediction { x: -3.0, y: -3.5, psi: -std::f64::consts::FRAC_PI_2, v: 2.0 };
        let [c_co, _, _] = with_ctx(None, &[opp], |ctx| velocity_costs(&path, &vel, ctx));
        // Points are 0.5 m apart, reached at t = 0.125 k; recompute overlaps directly.
        let hits: Vec<usize> = (0..path.len())
            .filter(|&k| {
                let q = opp.at(0.125 * k as f64);
                (path[k].x - q[0]).hypot(path[k].y - q[1]) < 0.6
            })
            .collect();
        assert_eq!(hits, vec![4]);
        assert!((c_co - (4.0 - 2.0) / 5.0).abs() < 1e-12, "{c_co}");
    }

    #[test]
    fn wall_collision_is_infinite() {
        let path = straight_path(-5.0, -6.4, 3.0, 30);
        let vel = vec![5.0; path.len()];
        let mut c = vec![CandidateTrajectory::new(path, vel, 0, 1.0)];
        with_ctx(None, &[], |ctx| evaluate_costs(&mut c[0], ctx));
        score_candidates(&mut c, &PolicyParams::default(), true);
        assert!(c[0].collides && c[0].total_cost.is_infinite());
        assert!(matches!(select_trajectory(&PolicyParams::default(), &c), Err(Error::Blocked)));
    }

    fn fixed(costs: [f64; 7]) -> CandidateTrajectory {
        let mut c = CandidateTrajectory::new(straight_path(0.0, 0.0, 1.0, 2), vec![2.0; 3], 0, 1.0);
        c.costs = costs;
        c
    }

    #[test]
    fn dominance_and_single_candidate() {
        let p = PolicyParams::default();
        let mut one = vec![fixed([0.3; 7])];
        score_candidates(&mut one, &p, true);
        assert_eq!(select_index(&one).unwrap(), 0);
        let mut two = vec![fixed([1.0; 7]), fixed([2.0; 7])];
        score_candidates(&mut two, &p, true);
        assert_eq!(select_index(&two).unwrap(), 0);
        let sel = select_trajectory(&PolicyParams { gamma_v: 0.8, ..p }, &two).unwrap();
        assert!(sel.velocity.iter().all(|v| (v - 1.6).abs() < 1e-12));
    }

    #[test]
    fn resample_endpoints_and_spacing() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 3.0]];
        let r = resample_polyline(&pts, 5);
        assert_eq!(r[0], [0.0, 0.0]);
        assert_eq!(r[4], [1.0, 3.0]);
        assert!((r[1][0] - 1.0).abs() < 1e-12 && (r[1][1] - 0.0).abs() < 1e-12);
        let adv = advance_polyline(&pts, [0.5, 0.2]);
        assert_eq!(adv[0], [0.5, 0.0]);
    }

    proptest! {
        #[test]
        fn selection_matches_brute_force(costs in prop::collection::vec(prop::array::uniform7(0.0f64..5.0), 1..30),
                                         w in prop::array::uniform7(1.0f64..10.0), k in 0.1f64..10.0) {
            let mut cands: Vec<_> = costs.iter().map(|c| fixed(*c)).collect();
            let p = PolicyParams { gamma_v: 1.0, weights: w };
            score_candidates(&mut cands, &p, true);
            let got = select_index(&cands).unwrap();
            // Oracle: recompute normalized weighted sums from scratch.
            let maxes: Vec<f64> = (0..7).map(|j| costs.iter().map(|c| c[j]).fold(0.0, f64::max)).collect();
            let totals: Vec<f64> = costs.iter().map(|c| (0..7).map(|j| if maxes[j] > 0.0 { c[j] / maxes[j] } else { c[j] } * w[j]).sum()).collect();
            let mut best = 0;
            for i in 1..totals.len() {
                if totals[i] < totals[best] { best = i; }
            }
            prop_assert!((totals[got] - totals[best]).abs() <= 1e-12 * totals[best].abs().max(1.0));
            // Positive scaling of all weights does not change the choice.
            let scaled = PolicyParams { gamma_v: 1.0, weights: w.map(|x| x * k) };
            score_candidates(&mut cands, &scaled, true);
            let again = select_index(&cands).unwrap();
            prop_assert!((totals[again] - totals[got]).abs() <= 1e-9 * totals[got].abs().max(1.0));
        }
    }
}
