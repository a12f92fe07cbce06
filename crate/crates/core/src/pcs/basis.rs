use crate::error::{Error, Result};
use crate::sim::{LidarScan, Trajectory};

/// Mean final progress advantage of ego over opponent across paired rollouts.
pub fn g_agg(pairs: &[(&Trajectory, &Trajectory)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("g_agg needs at least one rollout pair".into()));
    }
    let sum: f64 = pairs.iter().map(|(e, o)| e.last().s - o.last().s).sum();
    Ok(sum / pairs.len() as f64)
}

/// [`g_agg`] over a window, with each agent's progress measured from its own
/// first state in the window.
pub fn g_agg_window(ego: &Trajectory, opp: &Trajectory) -> f64 {
    (ego.last().s - ego.first().s) - (opp.last().s - opp.first().s)
}

/// Smallest instantaneous time-to-collision over the beams of one scan.
///
/// Beams whose range is at `max_range` or that are not closing (`v cos(angle) <= 0`)
/// count as infinite.
pub fn min_ittc(scan: &LidarScan, v: f64) -> f64 {
    let mut best = f64::INFINITY;
    for (r, a) in scan.ranges.iter().zip(scan.angles.iter()) {
        if *r >= scan.max_range {
            continue;
        }
        let rate = v * a.cos();
        if rate > 0.0 {
            best = best.min(r / rate);
        }
    }
    best
}

/// Negated mean of the per-scan minimum iTTC, each clamped at `ttc_clamp`,
/// averaged over the scans of each trajectory and then over trajectories.
pub fn g_res(trajs: &[&Trajectory], ttc_clamp: f64) -> Result<f64> {
    if trajs.is_empty() {
        return Err(Error::InvalidArgument("g_res needs at least one rollout".into()));
    }
    let mut total = 0.0;
    for tr in trajs {
        if tr.scans.is_empty() {
            return Err(Error::InvalidArgument("g_res needs recorded scans".into()));
        }
        let mut acc = 0.0;
        for st in &tr.scans {
            let v = tr.states[st.index].v;
            acc += min_ittc(&st.scan, v).min(ttc_clamp);
        }
        total += acc / tr.scans.len() as f64;
    }
    Ok(-total / trajs.len() as f64)
}
