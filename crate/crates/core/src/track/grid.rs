use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

/// Boolean occupancy grid with a precomputed distance field.
///
/// Cell `(i, j)` covers `[ox + i*res, ox + (i+1)*res) x [oy + j*res, oy + (j+1)*res)`.
/// Row `j = 0` is the bottom of the map. Everything outside the grid is occupied.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    origin: [f64; 2],
    resolution: f64,
    occupied: Vec<bool>,
    /// Center-to-center distance (m) to the nearest occupied cell, border included.
    field: Vec<f32>,
}

impl OccupancyGrid {
    /// `occupied[j * width + i]` is the occupancy of cell `(i, j)`.
    pub fn new(width: usize, height: usize, origin: [f64; 2], resolution: f64, occupied: Vec<bool>) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::Track("resolution must be > 0".into()));
        }
        if width == 0 || height == 0 || occupied.len() != width * height {
            return Err(Error::Track(format!(
                "grid {}x{} does not match {} cells",
                width,
                height,
                occupied.len()
            )));
        }
        let field = distance_field(width, height, &occupied, resolution);
        Ok(Self { width, height, origin, resolution, occupied, field })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn cells(&self) -> &[bool] {
        &self.occupied
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = ((x - self.origin[0]) / self.resolution).floor();
        let fj = ((y - self.origin[1]) / self.resolution).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.width as f64 || fj >= self.height as f64 || !fi.is_finite() || !fj.is_finite() {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn is_occupied_cell(&self, i: isize, j: isize) -> bool {
        if i < 0 || j < 0 || i as usize >= self.width || j as usize >= self.height {
            return true;
        }
        self.occupied[j as usize * self.width + i as usize]
    }

    /// Distance (m) from the center of the cell under `(x, y)` to the nearest occupied cell center.
    pub fn clearance(&self, x: f64, y: f64) -> f64 {
        match self.cell_of(x, y) {
            Some((i, j)) => self.field[j * self.width + i] as f64,
            None => 0.0,
        }
    }

    /// True iff an occupied cell (or the outside of the map) meets the open disc of radius `r`.
    pub fn disc_hits_obstacle(&self, x: f64, y: f64, r: f64) -> bool {
        let Some((ci, cj)) = self.cell_of(x, y) else {
            return true;
        };
        let idx = cj * self.width + ci;
        if self.occupied[idx] {
            return true;
        }
        if r <= 0.0 {
            return false;
        }
        let res = self.resolution;
        if self.field[idx] as f64 - res * SQRT_2 >= r {
            return false;
        }
        let i0 = ((x - r - self.origin[0]) / res).floor() as isize;
        let i1 = ((x + r - self.origin[0]) / res).floor() as isize;
        let j0 = ((y - r - self.origin[1]) / res).floor() as isize;
        let j1 = ((y + r - self.origin[1]) / res).floor() as isize;
        let r2 = r * r;
        for j in j0..=j1 {
            for i in i0..=i1 {
                if self.is_occupied_cell(i, j) && self.point_cell_dist_sq(x, y, i, j) < r2 {
                    return true;
                }
            }
        }
        false
    }

    pub(crate) fn point_cell_dist_sq(&self, x: f64, y: f64, i: isize, j: isize) -> f64 {
        let res = self.resolution;
        let x0 = self.origin[0] + i as f64 * res;
        let y0 = self.origin[1] + j as f64 * res;
        let dx = (x0 - x).max(0.0).max(x - (x0 + res));
        let dy = (y0 - y).max(0.0).max(y - (y0 + res));
        dx * dx + dy * dy
    }

    /// Distance along the ray to the first occupied cell, capped at `max_range`.
    pub fn raycast(&self, ox: f64, oy: f64, angle: f64, max_range: f64) -> f64 {
        let (dy, dx) = angle.sin_cos();
        let res = self.resolution;
        let mut t = 0.0f64;
        let mut guard = 0usize;
        let guard_max = 4 * (self.width + self.height) + 64;
        while t < max_range {
            guard += 1;
            if guard > guard_max {
                break;
            }
            let px = ox + t * dx;
            let py = oy + t * dy;
            let Some((i, j)) = self.cell_of(px, py) else {
                return t;
            };
            let idx = j * self.width + i;
            if self.occupied[idx] {
                return t;
            }
            let safe = self.field[idx] as f64 - res * SQRT_2;
            if safe > res {
                t += safe;
                continue;
            }
            // Walk to the boundary of the current cell.
            let x0 = self.origin[0] + i as f64 * res;
            let y0 = self.origin[1] + j as f64 * res;
            let tx = if dx > 0.0 {
                (x0 + res - px) / dx
            } else if dx < 0.0 {
                (x0 - px) / dx
            } else {
                f64::INFINITY
            };
            let ty = if dy > 0.0 {
                (y0 + res - py) / dy
            } else if dy < 0.0 {
                (y0 - py) / dy
            } else {
                f64::INFINITY
            };
            t += tx.min(ty).max(0.0) + 1e-9;
        }
        max_range
    }
}

/// Exact squared Euclidean distance transform of a sampled function (Felzenszwalb-Huttenlocher).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let meet = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = meet(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = meet(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

fn distance_field(width: usize, height: usize, occupied: &[bool], resolution: f64) -> Vec<f32> {
    // Pad by one occupied ring so the map border counts as an obstacle.
    let pw = width + 2;
    let ph = height + 2;
    let big = 1e20;
    let mut g = vec![0.0f64; pw * ph];
    for j in 0..ph {
        for i in 0..pw {
            let inside = i >= 1 && j >= 1 && i <= width && j <= height;
            g[j * pw + i] = if !inside || occupied[(j - 1) * width + (i - 1)] { 0.0 } else { big };
        }
    }
    let n = pw.max(ph);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for i in 0..pw {
        for j in 0..ph {
            f[j] = g[j * pw + i];
        }
        edt_1d(&f[..ph], &mut out[..ph], &mut v, &mut z);
        for j in 0..ph {
            g[j * pw + i] = out[j];
        }
    }
    for j in 0..ph {
        f[..pw].copy_from_slice(&g[j * pw..(j + 1) * pw]);
        edt_1d(&f[..pw], &mut out[..pw], &mut v, &mut z);
        g[j * pw..(j + 1) * pw].copy_from_slice(&out[..pw]);
    }
    let mut field = vec![0.0f32; width * height];
    for j in 0..height {
        for i in 0..width {
            field[j * width + i] = (g[(j + 1) * pw + (i + 1)].sqrt() * resolution) as f32;
        }
    }
    field
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_with(width: usize, height: usize, res: f64, occ: &[(usize, usize)]) -> OccupancyGrid {
        let mut cells = vec![false; width * height];
        for &(i, j) in occ {
            cells[j * width + i] = true;
        }
        OccupancyGrid::new(width, height, [0.0, 0.0], res, cells).unwrap()
    }

    #[test]
    fn distance_field_matches_brute_force() {
        let occ = [(3, 4), (10, 2), (7, 7), (0, 9)];
        let g = grid_with(12, 11, 1.0, &occ);
        for j in 0..11isize {
            for i in 0..12isize {
                let mut best = f64::INFINITY;
                for jj in -1..=11isize {
                    for ii in -1..=12isize {
                        if g.is_occupied_cell(ii, jj) {
                            best = best.min((((ii - i).pow(2) + (jj - j).pow(2)) as f64).sqrt());
                        }
                    }
                }
                let f = g.field[j as usize * 12 + i as usize] as f64;
                assert!((f - best).abs() < 1e-5, "cell {i},{j}: {f} vs {best}");
            }
        }
    }

    #[test]
    fn wall_three_meters_ahead() {
        // 0.05 m cells, wall column starting exactly at x = 3.5.
        let res = 0.05;
        let w = 100;
        let h = 40;
        let wall: Vec<(usize, usize)> = (0..h).map(|j| (70, j)).collect();
        let g = grid_with(w, h, res, &wall);
        let r = g.raycast(0.5, 1.0, 0.0, 10.0);
        assert!((r - 3.0).abs() <= res, "range {r}");
    }

    #[test]
    fn out_of_bounds_is_obstacle() {
        let g = grid_with(10, 10, 1.0, &[]);
        assert!(g.disc_hits_obstacle(-0.5, 5.0, 0.1));
        assert!(g.disc_hits_obstacle(5.0, 9.95, 0.1));
        assert!(!g.disc_hits_obstacle(5.0, 5.0, 0.1));
        let r = g.raycast(5.0, 5.0, 0.0, 20.0);
        assert!((r - 5.0).abs() < 1e-6);
    }
}
