//! Vehicle dynamics, LiDAR and fixed-step multi-agent rollouts.

pub mod dynamics;
pub mod lidar;
pub mod rollout;

pub use dynamics::{step_dynamics, ControlInput, VehicleState};
pub use lidar::{Lidar, LidarScan};
pub use rollout::{write_trajectories_csv, Driver, Observation, Segment, Simulation, StampedScan, Trajectory};

use crate::track::TrackMap;

/// Two cars at rest side by side on the start line at arc position `s0`,
/// `offset` meters either side of the centerline. Agent 0 takes the left
/// slot unless `swap` is set.
pub fn side_by_side(track: &TrackMap, s0: f64, offset: f64, swap: bool) -> [VehicleState; 2] {
    let c = track.centerline();
    let heading = c.point_at(s0).1;
    let place = |d: f64| {
        let p = c.from_frenet(s0, d);
        VehicleState { s: s0, ..VehicleState::at_rest(p[0], p[1], heading) }
    };
    let (a, b) = if swap { (-offset, offset) } else { (offset, -offset) };
    [place(a), place(b)]
}
