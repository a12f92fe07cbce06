use std::sync::Arc;

use crate::track::OccupancyGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub ranges: Vec<f64>,
    /// Beam angles relative to the heading, shared between scans of one sensor.
    pub angles: Arc<[f64]>,
    pub max_range: f64,
}

/// Fixed beam layout spread evenly over the field of view.
#[derive(Debug, Clone)]
pub struct Lidar {
    angles: Arc<[f64]>,
    max_range: f64,
}

impl Lidar {
    pub fn new(beams: usize, fov: f64, max_range: f64) -> Self {
        assert!(beams >= 2, "lidar needs at least two beams");
        let step = fov / (beams - 1) as f64;
        let angles: Vec<f64> = (0..beams).map(|i| -0.5 * fov + i as f64 * step).collect();
        Self { angles: angles.into(), max_range }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    /// Scans from `(x, y, psi)` against the grid and the discs `(cx, cy, r)` of other agents.
    pub fn scan(&self, grid: &OccupancyGrid, x: f64, y: f64, psi: f64, discs: &[[f64; 3]]) -> LidarScan {
        let ranges = self
            .angles
            .iter()
            .map(|&a| {
                let ang = psi + a;
                let mut r = grid.raycast(x, y, ang, self.max_range);
                let (dy, dx) = ang.sin_cos();
                for d in discs {
                    if let Some(t) = ray_circle(x, y, dx, dy, d[0], d[1], d[2]) {
                        r = r.min(t);
                    }
                }
                r.clamp(f64::MIN_POSITIVE, self.max_range)
            })
            .collect();
        LidarScan { ranges, angles: self.angles.clone(), max_range: self.max_range }
    }
}

/// First non-negative hit of the unit-direction ray with a circle, if any.
pub fn ray_circle(ox: f64, oy: f64, dx: f64, dy: f64, cx: f64, cy: f64, r: f64) -> Option<f64> {
    let fx = ox - cx;
    let fy = oy - cy;
    let b = fx * dx + fy * dy;
    let c = fx * fx + fy * fy - r * r;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 || b > 0.0 {
        return None;
    }
    Some(-b - disc.sqrt())
}
