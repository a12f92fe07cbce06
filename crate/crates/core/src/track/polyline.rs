use crate::error::{Error, Result};
use crate::geom::wrap_angle;

/// Closed polyline: segment `i` joins point `i` to point `(i + 1) % n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedPolyline {
    points: Vec<[f64; 2]>,
    cumulative_s: Vec<f64>,
    /// Unit left normals at the vertices (bisectors of adjacent segment normals).
    normals: Vec<[f64; 2]>,
    length: f64,
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub segment: usize,
    /// Fraction along the segment in [0, 1].
    pub t: f64,
    pub s: f64,
    pub d: f64,
    pub distance_sq: f64,
}

impl ClosedPolyline {
    /// Builds a loop, dropping consecutive duplicates and an explicit closing repeat.
    pub fn new(mut points: Vec<[f64; 2]>) -> Result<Self> {
        points.dedup();
        while points.len() > 1 && points.first() == points.last() {
            points.pop();
        }
        if points.len() < 3 {
            return Err(Error::Track(format!("closed polyline needs >= 3 distinct points, got {}", points.len())));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("polyline point".into()));
        }
        let n = points.len();
        let mut cumulative_s = Vec::with_capacity(n);
        let mut s = 0.0;
        for i in 0..n {
            cumulative_s.push(s);
            s += dist(points[i], points[(i + 1) % n]);
        }
        let seg_normal = |i: usize| {
            let a = points[i];
            let b = points[(i + 1) % n];
            let l = dist(a, b);
            [-(b[1] - a[1]) / l, (b[0] - a[0]) / l]
        };
        let normals = (0..n)
            .map(|i| {
                let u = seg_normal((i + n - 1) % n);
                let w = seg_normal(i);
                let m = [u[0] + w[0], u[1] + w[1]];
                let l = (m[0] * m[0] + m[1] * m[1]).sqrt();
                if l < 1e-9 {
                    w
                } else {
                    [m[0] / l, m[1] / l]
                }
            })
            .collect();
        Ok(Self { points, cumulative_s, normals, length: s })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn cumulative_s(&self) -> &[f64] {
        &self.cumulative_s
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn segment(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.points.len();
        (self.points[i % n], self.points[(i + 1) % n])
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        let (a, b) = self.segment(i);
        dist(a, b)
    }

    pub fn segment_heading(&self, i: usize) -> f64 {
        let (a, b) = self.segment(i);
        (b[1] - a[1]).atan2(b[0] - a[0])
    }

    /// Wraps an arc position into [0, length).
    pub fn wrap_s(&self, s: f64) -> f64 {
        let r = s.rem_euclid(self.length);
        if r >= self.length {
            0.0
        } else {
            r
        }
    }

    /// Index of the segment containing arc position `s`.
    pub fn segment_at(&self, s: f64) -> usize {
        let s = self.wrap_s(s);
        match self.cumulative_s.binary_search_by(|v| v.partial_cmp(&s).expect("finite arc")) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    /// Point and segment heading at arc position `s`.
    pub fn point_at(&self, s: f64) -> ([f64; 2], f64) {
        let s = self.wrap_s(s);
        let i = self.segment_at(s);
        let (a, b) = self.segment(i);
        let len = dist(a, b);
        let t = ((s - self.cumulative_s[i]) / len).clamp(0.0, 1.0);
        ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], (b[1] - a[1]).atan2(b[0] - a[0]))
    }

    /// World point at Frenet coordinates `(s, d)`; `d` is positive to the left.
    pub fn from_frenet(&self, s: f64, d: f64) -> [f64; 2] {
        let s = self.wrap_s(s);
        let i = self.segment_at(s);
        let (a, b) = self.segment(i);
        let t = ((s - self.cumulative_s[i]) / dist(a, b)).clamp(0.0, 1.0);
        let nrm = self.normal_at(i, t);
        [a[0] + t * (b[0] - a[0]) + d * nrm[0], a[1] + t * (b[1] - a[1]) + d * nrm[1]]
    }

    /// Unit normal interpolated between the vertex normals of segment `i`.
    fn normal_at(&self, i: usize, t: f64) -> [f64; 2] {
        let n = self.points.len();
        let na = self.normals[i];
        let nb = self.normals[(i + 1) % n];
        let m = [na[0] + t * (nb[0] - na[0]), na[1] + t * (nb[1] - na[1])];
        let l = (m[0] * m[0] + m[1] * m[1]).sqrt();
        [m[0] / l, m[1] / l]
    }

    /// Projects along the interpolated normal field: finds `t` in [0, 1] with
    /// `p - q(t)` parallel to `n(t)`. Returns `None` when no such `t` exists.
    fn project_segment(&self, i: usize, p: [f64; 2]) -> Option<Projection> {
        let n = self.points.len();
        let (a, b) = self.segment(i);
        let e = [b[0] - a[0], b[1] - a[1]];
        let w = [p[0] - a[0], p[1] - a[1]];
        let na = self.normals[i];
        let nb = self.normals[(i + 1) % n];
        let m = [nb[0] - na[0], nb[1] - na[1]];
        let cross = |u: [f64; 2], v: [f64; 2]| u[0] * v[1] - u[1] * v[0];
        // cross(na + t m, w - t e) = 0
        let qa = -cross(m, e);
        let qb = cross(m, w) - cross(na, e);
        let qc = cross(na, w);
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        let wl = (w[0] * w[0] + w[1] * w[1]).sqrt();
        let tol = 1e-12 * len * (len + wl);
        if qa.abs() <= tol && qb.abs() <= tol && qc.abs() <= tol {
            // Every t satisfies the condition (p sits on the normals' focus).
            return Some(self.closest_on_segment(i, p));
        }
        let scale = qb.abs().max(qc.abs()).max(1e-300);
        let mut roots = [f64::NAN; 2];
        if qa.abs() <= 1e-12 * scale {
            if qb != 0.0 {
                roots[0] = -qc / qb;
            } else if qc == 0.0 {
                roots[0] = 0.0;
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let q = -0.5 * (qb + qb.signum() * sq);
                roots[0] = q / qa;
                roots[1] = if q != 0.0 { qc / q } else { 0.0 };
            }
        }
        let mut best: Option<Projection> = None;
        for &r in &roots {
            if !(-1e-12..=1.0 + 1e-12).contains(&r) {
                continue;
            }
            let t = r.clamp(0.0, 1.0);
            let q = [a[0] + t * e[0], a[1] + t * e[1]];
            let dq = [p[0] - q[0], p[1] - q[1]];
            let nrm = self.normal_at(i, t);
            let d = dq[0] * nrm[0] + dq[1] * nrm[1];
            let mut s = self.cumulative_s[i] + t * len;
            if s >= self.length {
                s -= self.length;
            }
            let cand = Projection { segment: i, t, s, d, distance_sq: dq[0] * dq[0] + dq[1] * dq[1] };
            if best.is_none_or(|b| cand.d.abs() < b.d.abs()) {
                best = Some(cand);
            }
        }
        best
    }

    /// Plain closest-point projection onto segment `i`.
    fn closest_on_segment(&self, i: usize, p: [f64; 2]) -> Projection {
        let (a, b) = self.segment(i);
        let ab = [b[0] - a[0], b[1] - a[1]];
        let ap = [p[0] - a[0], p[1] - a[1]];
        let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
        let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len_sq).clamp(0.0, 1.0);
        let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
        let dq = [p[0] - q[0], p[1] - q[1]];
        let distance_sq = dq[0] * dq[0] + dq[1] * dq[1];
        let cross = ab[0] * ap[1] - ab[1] * ap[0];
        let d = if cross < 0.0 { -distance_sq.sqrt() } else { distance_sq.sqrt() };
        let mut s = self.cumulative_s[i] + t * len_sq.sqrt();
        if s >= self.length {
            s -= self.length;
        }
        Projection { segment: i, t, s, d, distance_sq }
    }

    fn better(cand: &Projection, best: &Option<Projection>) -> bool {
        match best {
            None => true,
            Some(b) => cand.d.abs() < b.d.abs() || (cand.d.abs() == b.d.abs() && cand.s < b.s),
        }
    }

    fn project_over(&self, segments: impl Iterator<Item = usize> + Clone, p: [f64; 2]) -> Projection {
        let mut best: Option<Projection> = None;
        for i in segments.clone() {
            if let Some(c) = self.project_segment(i, p) {
                if Self::better(&c, &best) {
                    best = Some(c);
                }
            }
        }
        if let Some(b) = best {
            return b;
        }
        let mut best: Option<Projection> = None;
        for i in segments {
            let c = self.closest_on_segment(i, p);
            if Self::better(&c, &best) {
                best = Some(c);
            }
        }
        best.expect("at least one segment")
    }

    /// Exhaustive projection along the interpolated normal field.
    ///
    /// Among segments admitting a foot point the smallest `|d|` wins; ties go to
    /// the lower arc position.
    pub fn project(&self, p: [f64; 2]) -> Projection {
        self.project_over(0..self.points.len(), p)
    }

    /// Projection restricted to segments within `window` meters of arc `hint_s`.
    pub fn project_near(&self, p: [f64; 2], hint_s: f64, window: f64) -> Projection {
        let n = self.points.len();
        let mean_seg = self.length / n as f64;
        let k = (window / mean_seg).ceil() as usize + 1;
        if 2 * k + 1 >= n {
            return self.project(p);
        }
        let center = self.segment_at(hint_s);
        let first = (center + n - k) % n;
        self.project_over((0..=2 * k).map(move |j| (first + j) % n), p)
    }

    /// Uniformly resamples the loop to segments of length close to `spacing`.
    pub fn resample(&self, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidArgument("resample spacing must be > 0".into()));
        }
        let n = ((self.length / spacing).round() as usize).max(3);
        let step = self.length / n as f64;
        let pts = (0..n).map(|k| self.point_at(k as f64 * step).0).collect();
        Self::new(pts)
    }

    /// True when no two non-adjacent segments intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.points.len();
        for i in 0..n {
            let (a, b) = self.segment(i);
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = self.segment(j);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Signed heading change at vertex `i` between incoming and outgoing segments.
    pub fn turn_angle(&self, i: usize) -> f64 {
        let n = self.points.len();
        wrap_angle(self.segment_heading(i) - self.segment_heading((i + n - 1) % n))
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    if a[0].max(b[0]) < c[0].min(d[0])
        || c[0].max(d[0]) < a[0].min(b[0])
        || a[1].max(b[1]) < c[1].min(d[1])
        || c[1].max(d[1]) < a[1].min(b[1])
    {
        return false;
    }
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn square() -> ClosedPolyline {
        ClosedPolyline::new(vec![[0.0, 0.0], [6.0, 0.0], [6.0, 6.0], [0.0, 6.0]]).unwrap()
    }

    fn circle(r: f64, n: usize) -> ClosedPolyline {
        let pts = (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        ClosedPolyline::new(pts).unwrap()
    }

    #[test]
    fn square_length_and_closure_repeat() {
        let p = ClosedPolyline::new(vec![[0.0, 0.0], [6.0, 0.0], [6.0, 6.0], [0.0, 6.0], [0.0, 0.0]]).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.length(), 24.0);
        assert!(p.is_simple());
    }

    #[test]
    fn bow_tie_is_not_simple() {
        let p = ClosedPolyline::new(vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]]).unwrap();
        assert!(!p.is_simple());
    }

    #[test]
    fn projection_on_start_and_left_offset() {
        let p = square();
        let pr = p.project([0.0, 0.0]);
        assert_eq!((pr.s, pr.d), (0.0, 0.0));
        let pr = p.project([3.0, 0.5]);
        assert!((pr.s - 3.0).abs() < 1e-12 && (pr.d - 0.5).abs() < 1e-12);
        let pr = p.project([3.0, -0.5]);
        assert!((pr.d + 0.5).abs() < 1e-12);
    }

    #[test]
    fn equidistant_tie_takes_lower_s() {
        // Center of the square is 3 m from all four sides.
        let pr = square().project([3.0, 3.0]);
        assert_eq!(pr.segment, 0);
        assert!((pr.s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn circle_matches_closed_form() {
        let r = 1.0;
        let p = circle(r, 4096);
        let mut rng_state = 12345u64;
        for _ in 0..200 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let phi = (rng_state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 * PI;
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let d = ((rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.6;
            // Counter-clockwise travel puts the center on the left: d > 0 is inside.
            let rad = r - d;
            let pr = p.project([rad * phi.cos(), rad * phi.sin()]);
            let s_exact = r * phi;
            let ds = (pr.s - s_exact).abs().min(p.length() - (pr.s - s_exact).abs());
            assert!(ds < 1e-6, "s {} vs {}", pr.s, s_exact);
            assert!((pr.d - d).abs() < 1e-6, "d {} vs {}", pr.d, d);
        }
    }

    #[test]
    fn near_projection_agrees_with_exhaustive() {
        let p = circle(5.0, 300);
        for k in 0..50 {
            let s = k as f64 * 0.61;
            let q = p.from_frenet(s, 0.3);
            let a = p.project(q);
            let b = p.project_near(q, s + 0.4, 2.0);
            assert_eq!(a.segment, b.segment);
            assert!((a.s - b.s).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_preserves_length() {
        let p = circle(5.0, 64);
        let r = p.resample(0.1).unwrap();
        assert!(((r.length() - p.length()) / p.length()).abs() < 1e-3);
        let sq = square().resample(6.0).unwrap();
        assert_eq!(sq.len(), 4);
    }

    proptest! {
        #[test]
        fn frenet_round_trip(frac in 0.0f64..1.0, t in 0.25f64..0.75, d in -1.0f64..1.0) {
            let p = circle(5.0, 200);
            let seg = (frac * 200.0) as usize % 200;
            let s = p.cumulative_s()[seg] + t * p.segment_length(seg);
            let q = p.from_frenet(s, d);
            let pr = p.project(q);
            prop_assert!((pr.s - s).abs() < 1e-6);
            prop_assert!((pr.d - d).abs() < 1e-6);
        }
    }
}
