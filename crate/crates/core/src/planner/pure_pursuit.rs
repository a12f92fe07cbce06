use crate::geom::Pose2;
use crate::planner::clothoid::PathPoint;
use crate::sim::{ControlInput, VehicleState};

/// Steering toward the first path point at least `lookahead` away; speed is
/// read from `velocity` at that point. Falls back to the last point.
pub fn pure_pursuit(state: &VehicleState, path: &[PathPoint], velocity: &[f64], lookahead: f64, wheelbase: f64) -> ControlInput {
    assert!(!path.is_empty(), "pure pursuit needs a non-empty path");
    let idx = path
        .iter()
        .position(|p| (p.x - state.x).hypot(p.y - state.y) >= lookahead)
        .unwrap_or(path.len() - 1);
    let target = &path[idx];
    let pose = Pose2::new(state.x, state.y, state.psi);
    let (lx, ly) = pose.to_local(target.x, target.y);
    let ld2 = lx * lx + ly * ly;
    let delta = if ld2 > 1e-12 { (wheelbase * 2.0 * ly / ld2).atan() } else { 0.0 };
    ControlInput::new(delta, velocity.get(idx).copied().unwrap_or(0.0))
}
