//! Track geometry: occupancy grid, closed centerline, raceline and Frenet projection.
//!
//! Everything here is immutable once built and can be shared across
//! concurrent rollouts behind an `Arc`.

mod grid;
pub mod io;
mod polyline;

use std::path::Path;

pub use grid::OccupancyGrid;
pub use polyline::{ClosedPolyline, Projection};

use crate::config::TrackConfig;
use crate::error::{Error, Result};
use crate::geom::wrap_angle;

/// Track-aligned coordinates: `s` along the centerline, `d` positive to the left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetPose {
    pub s: f64,
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct TrackMap {
    grid: OccupancyGrid,
    centerline: ClosedPolyline,
}

impl TrackMap {
    /// Validates the centerline against the grid and optionally resamples it.
    ///
    /// The centerline may list its first point again at the end; otherwise the
    /// implicit closing segment must be no longer than twice the longest other segment.
    pub fn new(grid: OccupancyGrid, centerline: Vec<[f64; 2]>, resample: Option<f64>) -> Result<Self> {
        let mut pts = centerline;
        pts.dedup();
        let explicit_close = pts.len() > 1 && pts.first() == pts.last();
        if explicit_close {
            pts.pop();
        }
        if pts.len() < 3 {
            return Err(Error::Track("centerline needs at least 3 distinct points".into()));
        }
        if !explicit_close {
            let longest = pts.windows(2).map(|w| polyline::dist(w[0], w[1])).fold(0.0, f64::max);
            let gap = polyline::dist(pts[pts.len() - 1], pts[0]);
            if gap > 2.0 * longest {
                return Err(Error::Track(format!(
                    "centerline is not closed: end-to-start gap {gap:.3} m exceeds twice the longest segment ({longest:.3} m)"
                )));
            }
        }
        let raw = ClosedPolyline::new(pts)?;
        if !raw.is_simple() {
            return Err(Error::Track("centerline self-intersects".into()));
        }
        let centerline = match resample {
            Some(spacing) => raw.resample(spacing)?,
            None => raw,
        };
        let step = grid.resolution() * 0.5;
        for i in 0..centerline.len() {
            let (a, b) = centerline.segment(i);
            let len = polyline::dist(a, b);
            let n = (len / step).ceil().max(1.0) as usize;
            for k in 0..=n {
                let t = k as f64 / n as f64;
                let x = a[0] + t * (b[0] - a[0]);
                let y = a[1] + t * (b[1] - a[1]);
                if grid.disc_hits_obstacle(x, y, 0.0) {
                    return Err(Error::Track(format!("centerline leaves free space at ({x:.3}, {y:.3})")));
                }
            }
        }
        Ok(Self { grid, centerline })
    }

    /// Loads a grid file and a centerline CSV (`x,y` header).
    pub fn load(grid_file: &Path, centerline_file: &Path, cfg: &TrackConfig) -> Result<Self> {
        let raw = io::read_grid(grid_file)?;
        let grid = OccupancyGrid::new(raw.width, raw.height, cfg.origin, cfg.resolution, raw.bottom_up_cells())?;
        let rows = io::read_columns(centerline_file, &["x", "y"], &[])?;
        let pts = rows.into_iter().map(|r| [r[0].unwrap(), r[1].unwrap()]).collect();
        Self::new(grid, pts, cfg.resample_spacing)
    }

    /// Loads the configured track, falling back to the built-in oval.
    pub fn from_config(cfg: &TrackConfig) -> Result<Self> {
        match (&cfg.grid_file, &cfg.centerline_file) {
            (Some(g), Some(c)) => Self::load(g, c, cfg),
            (None, None) => Ok(synthetic_oval(&OvalSpec { resolution: cfg.resolution, ..OvalSpec::default() })?.0),
            _ => Err(Error::Config("track.grid_file and track.centerline_file must be given together".into())),
        }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn centerline(&self) -> &ClosedPolyline {
        &self.centerline
    }

    pub fn length(&self) -> f64 {
        self.centerline.length()
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution()
    }

    pub fn to_frenet(&self, x: f64, y: f64) -> FrenetPose {
        let p = self.centerline.project([x, y]);
        FrenetPose { s: p.s, d: p.d }
    }

    /// Projection restricted to a window around a known arc position.
    pub fn to_frenet_near(&self, x: f64, y: f64, hint_s: f64, window: f64) -> FrenetPose {
        let p = self.centerline.project_near([x, y], hint_s, window);
        FrenetPose { s: p.s, d: p.d }
    }

    pub fn is_collision(&self, x: f64, y: f64, footprint_radius: f64) -> bool {
        self.grid.disc_hits_obstacle(x, y, footprint_radius)
    }

    /// Conservative local width: twice the wall clearance at the centerline point.
    pub fn width_at(&self, s: f64) -> f64 {
        let (p, _) = self.centerline.point_at(s);
        2.0 * self.grid.clearance(p[0], p[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

/// Interpolated raceline state at an arc position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RacelineSample {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub kappa: f64,
    pub v: f64,
}

#[derive(Debug, Clone)]
pub struct Raceline {
    waypoints: Vec<Waypoint>,
    curvature: Vec<f64>,
    path: ClosedPolyline,
}

/// Turning angles above this are treated as corners and take the outgoing heading.
const KINK_ANGLE: f64 = std::f64::consts::FRAC_PI_4;

impl Raceline {
    pub fn from_waypoints(waypoints: Vec<Waypoint>) -> Result<Self> {
        if let Some(w) = waypoints.iter().find(|w| !(w.v > 0.0) || !w.x.is_finite() || !w.y.is_finite()) {
            return Err(Error::Track(format!("raceline waypoint needs finite position and v > 0, got {w:?}")));
        }
        let path = ClosedPolyline::new(waypoints.iter().map(|w| [w.x, w.y]).collect())?;
        if path.len() != waypoints.len() {
            return Err(Error::Track("raceline has repeated consecutive waypoints".into()));
        }
        let n = waypoints.len();
        let curvature = (0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let next = (i + 1) % n;
                let ds_fwd = path.segment_length(i);
                let ds_back = path.segment_length(prev);
                wrap_angle(waypoints[next].theta - waypoints[prev].theta) / (ds_fwd + ds_back)
            })
            .collect();
        Ok(Self { waypoints, curvature, path })
    }

    /// Centerline with finite-difference headings and a constant speed.
    pub fn from_centerline(track: &TrackMap, v_const: f64) -> Result<Self> {
        if !(v_const > 0.0) {
            return Err(Error::InvalidArgument(format!("raceline speed must be > 0, got {v_const}")));
        }
        let line = track.centerline();
        let headings = finite_difference_headings(line);
        let wps = line
            .points()
            .iter()
            .zip(headings)
            .map(|(p, theta)| Waypoint { x: p[0], y: p[1], theta, v: v_const })
            .collect();
        Self::from_waypoints(wps)
    }

    /// Reads `x,y[,theta,v]`; missing headings are differenced, missing speeds use `default_v`.
    pub fn load(path: &Path, default_v: f64) -> Result<Self> {
        let rows = io::read_columns(path, &["x", "y"], &["theta", "v"])?;
        let pts: Vec<[f64; 2]> = rows.iter().map(|r| [r[0].unwrap(), r[1].unwrap()]).collect();
        let line = ClosedPolyline::new(pts)?;
        if line.len() != rows.len() {
            return Err(Error::Track("raceline has repeated consecutive points".into()));
        }
        let diff = finite_difference_headings(&line);
        let wps = rows
            .iter()
            .zip(diff)
            .map(|(r, h)| Waypoint { x: r[0].unwrap(), y: r[1].unwrap(), theta: r[2].unwrap_or(h), v: r[3].unwrap_or(default_v) })
            .collect();
        Self::from_waypoints(wps)
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn cumulative_s(&self) -> &[f64] {
        self.path.cumulative_s()
    }

    pub fn length(&self) -> f64 {
        self.path.length()
    }

    pub fn path(&self) -> &ClosedPolyline {
        &self.path
    }

    pub fn max_speed(&self) -> f64 {
        self.waypoints.iter().map(|w| w.v).fold(0.0, f64::max)
    }

    pub fn sample(&self, s: f64) -> RacelineSample {
        let s = self.path.wrap_s(s);
        let i = self.path.segment_at(s);
        let j = (i + 1) % self.waypoints.len();
        let t = ((s - self.path.cumulative_s()[i]) / self.path.segment_length(i)).clamp(0.0, 1.0);
        let (a, b) = (&self.waypoints[i], &self.waypoints[j]);
        RacelineSample {
            x: a.x + t * (b.x - a.x),
            y: a.y + t * (b.y - a.y),
            theta: wrap_angle(a.theta + t * wrap_angle(b.theta - a.theta)),
            kappa: self.curvature[i] + t * (self.curvature[j] - self.curvature[i]),
            v: a.v + t * (b.v - a.v),
        }
    }

    pub fn project(&self, x: f64, y: f64) -> FrenetPose {
        let p = self.path.project([x, y]);
        FrenetPose { s: p.s, d: p.d }
    }

    pub fn project_near(&self, x: f64, y: f64, hint_s: f64, window: f64) -> FrenetPose {
        let p = self.path.project_near([x, y], hint_s, window);
        FrenetPose { s: p.s, d: p.d }
    }
}

/// Central differences, except at corners sharper than 45 degrees where the
/// outgoing segment direction is used.
fn finite_difference_headings(line: &ClosedPolyline) -> Vec<f64> {
    let n = line.len();
    let pts = line.points();
    (0..n)
        .map(|i| {
            if line.turn_angle(i).abs() > KINK_ANGLE {
                line.segment_heading(i)
            } else {
                let a = pts[(i + n - 1) % n];
                let b = pts[(i + 1) % n];
                (b[1] - a[1]).atan2(b[0] - a[0])
            }
        })
        .collect()
}

/// Stadium-shaped test track: two straights joined by semicircles, driven counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvalSpec {
    pub straight: f64,
    pub radius: f64,
    pub width: f64,
    pub margin: f64,
    pub resolution: f64,
    pub spacing: f64,
}

impl Default for OvalSpec {
    fn default() -> Self {
        Self { straight: 12.0, radius: 5.0, width: 3.0, margin: 0.5, resolution: 0.05, spacing: 0.1 }
    }
}

/// Builds the oval map; also returns the raw image rows and centerline points for writing to disk.
pub fn synthetic_oval(spec: &OvalSpec) -> Result<(TrackMap, io::RawGrid, Vec<[f64; 2]>)> {
    let half = spec.straight / 2.0;
    let ext_x = half + spec.radius + spec.width / 2.0 + spec.margin;
    let ext_y = spec.radius + spec.width / 2.0 + spec.margin;
    let width = (2.0 * ext_x / spec.resolution).ceil() as usize;
    let height = (2.0 * ext_y / spec.resolution).ceil() as usize;
    let origin = [-ext_x, -ext_y];
    let mut cells = vec![false; width * height];
    for j in 0..height {
        for i in 0..width {
            let x = origin[0] + (i as f64 + 0.5) * spec.resolution;
            let y = origin[1] + (j as f64 + 0.5) * spec.resolution;
            let cx = x.clamp(-half, half);
            let spine = ((x - cx).powi(2) + y * y).sqrt();
            cells[j * width + i] = (spine - spec.radius).abs() > spec.width / 2.0;
        }
    }
    let raw = io::RawGrid {
        width,
        height,
        rows: (0..height).rev().map(|j| cells[j * width..(j + 1) * width].to_vec()).collect(),
    };
    let grid = OccupancyGrid::new(width, height, origin, spec.resolution, cells)?;
    let length = 2.0 * spec.straight + 2.0 * std::f64::consts::PI * spec.radius;
    let n = (length / spec.spacing).round() as usize;
    let pts: Vec<[f64; 2]> = (0..n).map(|k| oval_point(spec, k as f64 * length / n as f64)).collect();
    let track = TrackMap::new(grid, pts.clone(), None)?;
    Ok((track, raw, pts))
}

/// Point at arc position `s` on the oval centerline, starting at the bottom-left of the lower straight.
pub fn oval_point(spec: &OvalSpec, s: f64) -> [f64; 2] {
    let half = spec.straight / 2.0;
    let r = spec.radius;
    let arc = std::f64::consts::PI * r;
    let s = s.rem_euclid(2.0 * spec.straight + 2.0 * arc);
    if s < spec.straight {
        [-half + s, -r]
    } else if s < spec.straight + arc {
        let a = -std::f64::consts::FRAC_PI_2 + (s - spec.straight) / r;
        [half + r * a.cos(), r * a.sin()]
    } else if s < 2.0 * spec.straight + arc {
        [half - (s - spec.straight - arc), r]
    } else {
        let a = std::f64::consts::FRAC_PI_2 + (s - 2.0 * spec.straight - arc) / r;
        [-half + r * a.cos(), r * a.sin()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn open_grid(n: usize, res: f64) -> OccupancyGrid {
        OccupancyGrid::new(n, n, [0.0, 0.0], res, vec![false; n * n]).unwrap()
    }

    fn square_track() -> TrackMap {
        let pts = vec![[2.0, 2.0], [8.0, 2.0], [8.0, 8.0], [2.0, 8.0]];
        TrackMap::new(open_grid(10, 1.0), pts, None).unwrap()
    }

    #[test]
    fn square_on_free_grid() {
        let t = square_track();
        assert_eq!(t.centerline().len(), 4);
        assert_eq!(t.length(), 24.0);
    }

    #[test]
    fn occupied_cell_under_centerline_is_rejected() {
        let mut cells = vec![false; 100];
        cells[2 * 10 + 5] = true;
        let grid = OccupancyGrid::new(10, 10, [0.0, 0.0], 1.0, cells).unwrap();
        let err = TrackMap::new(grid, vec![[2.0, 2.5], [8.0, 2.5], [8.0, 8.0], [2.0, 8.0]], None).unwrap_err();
        assert!(matches!(err, Error::Track(_)), "{err}");
    }

    #[test]
    fn open_polyline_is_rejected() {
        let pts = vec![[1.0, 1.0], [2.0, 1.0], [3.0, 1.0], [4.0, 1.0], [5.0, 1.0], [5.0, 2.0]];
        assert!(TrackMap::new(open_grid(10, 1.0), pts, None).is_err());
    }

    #[test]
    fn square_raceline_axis_headings() {
        let rl = Raceline::from_centerline(&square_track(), 5.0).unwrap();
        let hs: Vec<f64> = rl.waypoints().iter().map(|w| w.theta).collect();
        let expected = [0.0, FRAC_PI_2, PI, -FRAC_PI_2];
        for (h, e) in hs.iter().zip(expected) {
            assert!(wrap_angle(h - e).abs() < 1e-12, "{h} vs {e}");
        }
        assert!(Raceline::from_centerline(&square_track(), 0.0).is_err());
    }

    #[test]
    fn circle_raceline_headings_are_tangent() {
        let r = 5.0;
        let n = 400;
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                [10.0 + r * a.cos(), 10.0 + r * a.sin()]
            })
            .collect();
        let track = TrackMap::new(open_grid(400, 0.05), pts, None).unwrap();
        let rl = Raceline::from_centerline(&track, 3.0).unwrap();
        for w in rl.waypoints() {
            let a = (w.y - 10.0).atan2(w.x - 10.0);
            let tangent = a + FRAC_PI_2;
            assert!(wrap_angle(w.theta - tangent).abs() < 1e-3);
        }
        let k = rl.sample(1.234).kappa;
        assert!((k - 1.0 / r).abs() < 1e-3, "kappa {k}");
    }

    #[test]
    fn oval_length_matches_segment_sum() {
        let (track, _, pts) = synthetic_oval(&OvalSpec::default()).unwrap();
        let n = pts.len();
        let oracle: f64 = (0..n).map(|i| polyline::dist(pts[i], pts[(i + 1) % n])).sum();
        assert!((track.length() - oracle).abs() < 1e-9);
        for p in track.centerline().points() {
            assert!(!track.is_collision(p[0], p[1], 0.0));
        }
        assert!((track.width_at(3.0) - 3.0).abs() < 0.15);
    }

    #[test]
    fn collision_inside_obstacle_and_free_interior() {
        let (track, _, _) = synthetic_oval(&OvalSpec::default()).unwrap();
        assert!(!track.is_collision(0.0, -5.0, 0.3));
        assert!(track.is_collision(0.0, 0.0, 0.3));
        assert!(track.is_collision(0.0, -6.4, 0.3));
    }
}
