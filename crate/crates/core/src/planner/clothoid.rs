use nalgebra::{Matrix4, Vector4};

use crate::geom::{wrap_angle, Pose2};

/// Sample of a planned path in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub kappa: f64,
    /// Arc length from the start of the path.
    pub s: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ClothoidOptions {
    /// Number of Simpson intervals over the arc (each uses its midpoint).
    pub intervals: usize,
    pub max_iterations: usize,
    pub kappa_max: f64,
}

impl Default for ClothoidOptions {
    fn default() -> Self {
        Self { intervals: 64, max_iterations: 50, kappa_max: f64::INFINITY }
    }
}

/// Cubic-curvature spiral `kappa(s) = a + b s + c s^2 + d s^3` from a start pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Clothoid {
    pub start: Pose2,
    pub coeffs: [f64; 4],
    pub length: f64,
    pub points: Vec<PathPoint>,
    pub iterations: usize,
}

impl Clothoid {
    pub fn kappa(&self, s: f64) -> f64 {
        let [a, b, c, d] = self.coeffs;
        a + s * (b + s * (c + s * d))
    }

    /// Heading relative to the start heading.
    pub fn theta(&self, s: f64) -> f64 {
        let [a, b, c, d] = self.coeffs;
        s * (a + s * (b / 2.0 + s * (c / 3.0 + s * d / 4.0)))
    }

    pub fn end(&self) -> &PathPoint {
        self.points.last().expect("non-empty path")
    }
}

fn theta_of(p: &[f64; 4], s: f64) -> f64 {
    s * (p[0] + s * (p[1] / 2.0 + s * (p[2] / 3.0 + s * p[3] / 4.0)))
}

struct Integrals {
    x: f64,
    y: f64,
    // d x / d(b, c, d) and d y / d(b, c, d)
    dx: [f64; 3],
    dy: [f64; 3],
}

/// Composite Simpson over `n` intervals with midpoints, in the start frame.
fn integrate(p: &[f64; 4], sf: f64, n: usize, with_jacobian: bool) -> Integrals {
    let h = sf / n as f64;
    let mut out = Integrals { x: 0.0, y: 0.0, dx: [0.0; 3], dy: [0.0; 3] };
    let mut add = |s: f64, w: f64| {
        let (sn, cs) = theta_of(p, s).sin_cos();
        out.x += w * cs;
        out.y += w * sn;
        if with_jacobian {
            let g = [s * s / 2.0, s * s * s / 3.0, s * s * s * s / 4.0];
            for k in 0..3 {
                out.dx[k] -= w * sn * g[k];
                out.dy[k] += w * cs * g[k];
            }
        }
    };
    for i in 0..n {
        let s0 = i as f64 * h;
        let w = if i == 0 { 1.0 } else { 2.0 };
        add(s0, w);
        add(s0 + 0.5 * h, 4.0);
    }
    add(sf, 1.0);
    let scale = h / 6.0;
    out.x *= scale;
    out.y *= scale;
    for k in 0..3 {
        out.dx[k] *= scale;
        out.dy[k] *= scale;
    }
    out
}

fn residual(p: &[f64; 4], sf: f64, goal: (f64, f64, f64, f64), n: usize) -> Vector4<f64> {
    let it = integrate(p, sf, n, false);
    let kf = p[0] + sf * (p[1] + sf * (p[2] + sf * p[3]));
    Vector4::new(it.x - goal.0, it.y - goal.1, theta_of(p, sf) - goal.2, kf - goal.3)
}

/// Solves the two-point boundary value problem from `start` (with curvature
/// `kappa0`) to `goal` (with curvature `kappa_goal`) by damped Newton shooting
/// on `(b, c, d, s_f)`. Returns `None` when the iteration fails, the arc is not
/// positive, or the curvature bound is exceeded.
pub fn solve_clothoid(start: Pose2, kappa0: f64, goal: Pose2, kappa_goal: f64, opts: &ClothoidOptions) -> Option<Clothoid> {
    let n = opts.intervals.max(2);
    let (gx, gy) = start.to_local(goal.x, goal.y);
    let gth = wrap_angle(goal.theta - start.theta);
    let dist = gx.hypot(gy);
    if !(dist > 1e-9) || !kappa0.is_finite() || !kappa_goal.is_finite() {
        return None;
    }
    let target = (gx, gy, gth, kappa_goal);

    // Initial guess: quadratic curvature meeting the heading and curvature targets.
    let sf0 = dist * (gth * gth / 5.0 + 1.0) + 0.4 * gth.abs();
    let a = kappa0;
    let cc = 3.0 * kappa_goal + 3.0 * a - 6.0 * gth / sf0;
    let bb = kappa_goal - a - cc;
    let mut p = [a, bb / sf0, cc / (sf0 * sf0), 0.0];
    let mut sf = sf0;

    let mut r = residual(&p, sf, target, n);
    let mut iterations = 0;
    let converged = |r: &Vector4<f64>| r[0].abs() < 1e-7 && r[1].abs() < 1e-7 && r[2].abs() < 1e-7 && r[3].abs() < 1e-6;
    while !converged(&r) {
        if iterations >= opts.max_iterations {
            return None;
        }
        iterations += 1;
        let it = integrate(&p, sf, n, true);
        let (sn, cs) = theta_of(&p, sf).sin_cos();
        let kf = p[0] + sf * (p[1] + sf * (p[2] + sf * p[3]));
        #[rustfmt::skip]
        let jac = Matrix4::new(
            it.dx[0], it.dx[1], it.dx[2], cs,
            it.dy[0], it.dy[1], it.dy[2], sn,
            sf * sf / 2.0, sf.powi(3) / 3.0, sf.powi(4) / 4.0, kf,
            sf, sf * sf, sf.powi(3), p[1] + 2.0 * p[2] * sf + 3.0 * p[3] * sf * sf,
        );
        let step = jac.lu().solve(&(-r))?;
        let norm0 = r.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let cand = [p[0], p[1] + alpha * step[0], p[2] + alpha * step[1], p[3] + alpha * step[2]];
            let sf_c = sf + alpha * step[3];
            if sf_c > 1e-6 {
                let rc = residual(&cand, sf_c, target, n);
                if rc.iter().all(|v| v.is_finite()) && rc.norm() < norm0 {
                    p = cand;
                    sf = sf_c;
                    r = rc;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if !(sf > 0.0) {
        return None;
    }
    let points = sample_path(start, &p, sf, n);
    if points.iter().any(|q| q.kappa.abs() > opts.kappa_max) {
        return None;
    }
    Some(Clothoid { start, coeffs: p, length: sf, points, iterations })
}

/// Path at the `n + 1` interval nodes, integrated with the solver's quadrature.
fn sample_path(start: Pose2, p: &[f64; 4], sf: f64, n: usize) -> Vec<PathPoint> {
    let h = sf / n as f64;
    let mut pts = Vec::with_capacity(n + 1);
    let (mut lx, mut ly) = (0.0, 0.0);
    let kappa = |s: f64| p[0] + s * (p[1] + s * (p[2] + s * p[3]));
    let push = |pts: &mut Vec<PathPoint>, lx: f64, ly: f64, s: f64| {
        let (x, y) = start.to_world(lx, ly);
        pts.push(PathPoint { x, y, psi: wrap_angle(start.theta + theta_of(p, s)), kappa: kappa(s), s });
    };
    push(&mut pts, 0.0, 0.0, 0.0);
    let mut cos_prev = 1.0;
    let mut sin_prev = 0.0;
    for i in 0..n {
        let s0 = i as f64 * h;
        let (sm, cm) = theta_of(p, s0 + 0.5 * h).sin_cos();
        let (s1, c1) = theta_of(p, s0 + h).sin_cos();
        lx += h / 6.0 * (cos_prev + 4.0 * cm + c1);
        ly += h / 6.0 * (sin_prev + 4.0 * sm + s1);
        cos_prev = c1;
        sin_prev = s1;
        let s = if i + 1 == n { sf } else { s0 + h };
        push(&mut pts, lx, ly, s);
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Endpoint from a fine, independent trapezoid integration of the returned coefficients.
    fn fine_endpoint(c: &Clothoid) -> (f64, f64, f64) {
        let m = 200_000;
        let h = c.length / m as f64;
        let (mut x, mut y) = (0.0, 0.0);
        let mut prev = c.theta(0.0);
        for i in 1..=m {
            let th = c.theta(i as f64 * h);
            x += 0.5 * h * (prev.cos() + th.cos());
            y += 0.5 * h * (prev.sin() + th.sin());
            prev = th;
        }
        let (wx, wy) = c.start.to_world(x, y);
        (wx, wy, wrap_angle(c.start.theta + c.theta(c.length)))
    }

    #[test]
    fn straight_goal_gives_zero_curvature() {
        let start = Pose2::new(1.0, 2.0, 0.4);
        let (gx, gy) = start.to_world(3.0, 0.0);
        let c = solve_clothoid(start, 0.0, Pose2::new(gx, gy, 0.4), 0.0, &ClothoidOptions::default()).unwrap();
        assert!(c.points.iter().all(|p| p.kappa.abs() < 1e-6));
        assert!((c.length - 3.0).abs() < 1e-6);
    }

    #[test]
    fn constant_arc_is_recovered() {
        let k0: f64 = 0.4;
        let arc = 2.5;
        let start = Pose2::new(0.0, 0.0, 0.0);
        let goal = Pose2::new((k0 * arc).sin() / k0, (1.0 - (k0 * arc).cos()) / k0, k0 * arc);
        let c = solve_clothoid(start, k0, goal, k0, &ClothoidOptions::default()).unwrap();
        for p in &c.points {
            assert!((p.kappa - k0).abs() < 1e-3, "{}", p.kappa);
        }
        assert!((c.length - arc).abs() < 1e-3);
    }

    #[test]
    fn goal_behind_with_opposite_heading_is_infeasible() {
        let opts = ClothoidOptions { kappa_max: 1.3, ..Default::default() };
        let r = solve_clothoid(Pose2::new(0.0, 0.0, 0.0), 0.0, Pose2::new(-1.0, 0.0, std::f64::consts::PI), 0.0, &opts);
        assert!(r.is_none());
    }

    #[test]
    fn sampled_end_matches_fine_integration() {
        let start = Pose2::new(0.0, 0.0, 0.0);
        let c = solve_clothoid(start, 0.1, Pose2::new(3.0, 0.8, 0.3), -0.2, &ClothoidOptions::default()).unwrap();
        let (x, y, th) = fine_endpoint(&c);
        let e = c.end();
        assert!((x - e.x).abs() < 1e-6 && (y - e.y).abs() < 1e-6 && (th - e.psi).abs() < 1e-9);
        assert!((x - 3.0).abs() < 1e-6 && (y - 0.8).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn feasible_solutions_hit_the_goal(
            gx in 1.5f64..4.0, gy in -1.2f64..1.2, gth in -0.6f64..0.6, k0 in -0.4f64..0.4, kg in -0.4f64..0.4,
        ) {
            let start = Pose2::new(0.0, 0.0, 0.0);
            if let Some(c) = solve_clothoid(start, k0, Pose2::new(gx, gy, gth), kg, &ClothoidOptions::default()) {
                let (x, y, th) = fine_endpoint(&c);
                prop_assert!((x - gx).hypot(y - gy) <= 1e-3);
                prop_assert!(wrap_angle(th - gth).abs() <= 1e-3);
                prop_assert!((c.kappa(c.length) - kg).abs() <= 1e-3);
            }
        }
    }
}
